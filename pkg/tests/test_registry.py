# ----------------------------------------------------------------------------
# File: tests/test_registry.py (Testes do Registro de Proveniência)
# ----------------------------------------------------------------------------
# SPDX-License-Identifier: MIT
# Copyright (c) 2024-2025 Mateus G Pereira <mateus.pereira@ifsp.edu.br>
"""Testes do banco de proveniência: registro, linhagem, execuções e verificação."""
import json
from dataclasses import replace

import pytest

from anomalia.control.constants import MESSAGES, REGISTRY_FILENAME
from anomalia.control.registry import ProvenanceRegistry
from anomalia.control.training import PHASE_PRIOR, prior_run
from anomalia.control.utils import sha256_file


@pytest.fixture
def registry(tmp_path):
    with ProvenanceRegistry(tmp_path) as reg:
        yield reg


def _write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def test_register_artifact_stores_relative_path_and_digest(tmp_path, registry):
    data = _write(tmp_path / "data" / "normal.aajd", "abc")
    artifact = registry.register_artifact(data, "dataset", "gen", "c" * 64)
    assert artifact.path == "data/normal.aajd"
    assert artifact.sha256 == sha256_file(data)
    assert (tmp_path / REGISTRY_FILENAME).exists()


def test_register_twice_updates_in_place(tmp_path, registry):
    data = _write(tmp_path / "a.txt", "v1")
    registry.register_artifact(data, "dataset", "gen", "c" * 64)
    data.write_text("v2", encoding="utf-8")
    registry.register_artifact(data, "dataset", "gen", "d" * 64)
    artifacts = registry.artifacts()
    assert len(artifacts) == 1
    assert artifacts[0].config_digest == "d" * 64
    assert registry.verify() == {"a.txt": MESSAGES["digest_ok"]}


def test_lineage_records_direct_inputs(tmp_path, registry, caplog):
    a = _write(tmp_path / "a.txt", "a")
    b = _write(tmp_path / "b.txt", "b")
    c = _write(tmp_path / "c.txt", "c")
    registry.register_artifact(a, "dataset", "gen", "0" * 64)
    registry.register_artifact(b, "dataset", "gen", "0" * 64)
    with caplog.at_level("WARNING"):
        registry.register_artifact(c, "checkpoint", "train", "0" * 64,
                                   inputs=[b, a, tmp_path / "fantasma.txt"])
    assert registry.lineage(c) == ["a.txt", "b.txt"]
    assert registry.lineage(a) == []
    assert registry.lineage(tmp_path / "desconhecido") == []
    assert "fantasma.txt" in caplog.text


def test_verify_flags_tampered_and_missing_files(tmp_path, registry):
    a = _write(tmp_path / "a.txt", "a")
    b = _write(tmp_path / "b.txt", "b")
    registry.register_artifact(a, "scores", "eval", "0" * 64)
    registry.register_artifact(b, "scores", "eval", "0" * 64)
    a.write_text("adulterado", encoding="utf-8")
    b.unlink()
    assert registry.verify() == {"a.txt": MESSAGES["digest_mismatch"],
                                 "b.txt": MESSAGES["digest_missing"]}


def test_record_run_keeps_summary(tmp_path, registry, normal_ds, tiny_arch, train_config):
    _, report = prior_run(normal_ds, tiny_arch, replace(train_config, epochs=1))
    ckpt = _write(tmp_path / "checkpoints" / "prior.ckpt", "blob")
    artifact = registry.register_artifact(ckpt, "checkpoint", "train", "0" * 64)
    registry.record_run("prior", report, seed=11, checkpoint=artifact)
    registry.record_run("prior", report, seed=11, checkpoint=artifact)
    runs = registry.runs()
    assert len(runs) == 1
    assert runs[0].phase == PHASE_PRIOR
    assert runs[0].seed == "11"
    assert runs[0].checkpoint.path == "checkpoints/prior.ckpt"
    assert json.loads(runs[0].centering) == report.centering


def test_registry_persists_across_sessions(tmp_path):
    data = _write(tmp_path / "x.bin", "x")
    with ProvenanceRegistry(tmp_path) as reg:
        reg.register_artifact(data, "dataset", "gen", "0" * 64)
    with ProvenanceRegistry(tmp_path) as reg:
        assert [a.path for a in reg.artifacts()] == ["x.bin"]
