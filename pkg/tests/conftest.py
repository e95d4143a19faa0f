# ----------------------------------------------------------------------------
# File: tests/conftest.py (Fixtures Compartilhadas dos Testes)
# ----------------------------------------------------------------------------
# SPDX-License-Identifier: MIT
# Copyright (c) 2024-2025 Mateus G Pereira <mateus.pereira@ifsp.edu.br>
"""
Fixtures de teste: datasets pequenos e semeados numa grade 16x16, uma
arquitetura mínima e uma configuração de experimento que roda o pipeline
completo em poucos segundos.
"""
from typing import Any, Dict, List, Sequence

import numpy as np
import pytest

from anomalia.control.analysis import ScoreRecord
from anomalia.control.eventgen import GeneratorConfig, generate_dataset, specs_for
from anomalia.control.network import Architecture, ConvLayerSpec
from anomalia.control.settings import ExperimentConfig
from anomalia.control.training import TrainConfig

SMALL_GRID = GeneratorConfig(height=16, width=16)
AWARE_CLASSES = ("W", "R2", "R3", "R4")
ALL_ANOMALIES = ("W", "R2", "R3", "R4", "EFT")


@pytest.fixture(scope="session")
def small_grid() -> GeneratorConfig:
    return SMALL_GRID


@pytest.fixture(scope="session")
def normal_ds():
    """QCD e Top, 20 imagens por classe (16 treino / 4 teste)."""
    return generate_dataset(specs_for(["QCD", "Top"]), 20, 0.8, seed=3, config=SMALL_GRID)


@pytest.fixture(scope="session")
def anomaly_ds():
    """Cinco classes de anomalia, 12 imagens por classe."""
    return generate_dataset(specs_for(ALL_ANOMALIES), 12, 0.75, seed=5, config=SMALL_GRID)


@pytest.fixture
def tiny_arch() -> Architecture:
    return Architecture(input_shape=(16, 16), conv_layers=(ConvLayerSpec(4, 3, 1, 2),),
                        dense_layers=(8, 2), num_classes=2).validate()


@pytest.fixture
def train_config() -> TrainConfig:
    return TrainConfig(lambda_aa=0.5, epochs=2, batch_size=8, learning_rate=1e-2, seed=11,
                       anomaly_classes=AWARE_CLASSES)


def tiny_config_dict(output_dir: str, seed: int = 7) -> Dict[str, Any]:
    """Configuração mínima (JSON/TOML equivalente) usada pelos testes de ponta a ponta."""
    return {
        "seed": seed,
        "output_dir": output_dir,
        "generator": {"per_class_count": 15, "height": 16, "width": 16},
        "architecture": {"conv_layers": [[4, 3, 1, 2]], "dense_hidden": [8]},
        "training": {"epochs": 2, "batch_size": 8, "learning_rate": 0.01},
        "analysis": {"deltas": [0.1, 0.2], "pdf_bins": 10, "simplex_bins": 5,
                     "luminosities": [100.0, 1000.0, 3000.0]},
    }


@pytest.fixture
def tiny_config(tmp_path) -> ExperimentConfig:
    return ExperimentConfig.from_dict(tiny_config_dict(str(tmp_path / "exp")))


def make_records(values: Sequence[float], label: str, start: int = 0) -> List[ScoreRecord]:
    """Registros binários com probs = (v, 1 - v)."""
    return [ScoreRecord(probs=np.array([v, 1.0 - v]), true_class=label, event_id=start + i)
            for i, v in enumerate(values)]
