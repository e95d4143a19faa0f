# ----------------------------------------------------------------------------
# File: anomalia/control/constants.py (Constantes da Aplicação)
# ----------------------------------------------------------------------------
# SPDX-License-Identifier: MIT
# Copyright (c) 2024-2025 Mateus G Pereira <mateus.pereira@ifsp.edu.br>
"""
Define constantes globais, layout do diretório de experimento, valores padrão
do gerador, do treinamento e da análise, e os textos usados nos relatórios
do pipeline de Anomaly Awareness.
"""
from pathlib import Path
from typing import Dict, Final, List, Tuple

# --- Layout do Diretório de Experimento ---
DEFAULT_OUTPUT_DIR: Path = Path("./experimento")
CONFIG_FILENAME: str = "config.json"
DATASETS_DIR: str = "datasets"
CHECKPOINTS_DIR: str = "checkpoints"
SCORES_DIR: str = "scores"
REPORTS_DIR: str = "reports"
ABLATION_DIR: str = "ablation"
AVERAGES_DIR: str = "averages"
LOGS_DIR: str = "logs"
LOG_FILENAME: str = "anomalia.log"
LOG_SEPARATOR_WIDTH: int = 35
REGISTRY_FILENAME: str = "registry.db"
LOCK_FILENAME: str = ".aa.lock"
REPORT_SCHEMA_ID: str = "anomalia.report/1"

NORMAL_DATASET: str = "normal"
ANOMALY_DATASET: str = "anomalies"
DATASET_SUFFIX: str = ".aajd"
CHECKPOINT_SUFFIX: str = ".ckpt"
PRIOR_TAG: str = "prior"
AA_TAG: str = "aa"

REPORT_JSON: str = "report.json"
SUMMARY_TXT: str = "summary.txt"
SUMMARY_XLSX: str = "summary.xlsx"

# --- Formatos Binários ---
DATASET_MAGIC: Final[bytes] = b"AAJD"
DATASET_VERSION: Final[int] = 1
CHECKPOINT_MAGIC: Final[bytes] = b"AACK"
CHECKPOINT_VERSION: Final[int] = 1
PGM_MAXVAL: Final[int] = 65535

# --- Gerador de Imagens (substituto paramétrico da simulação Monte Carlo) ---
GRID_HEIGHT: int = 32
GRID_WIDTH: int = 32
ENERGY_MIN_GEV: float = 800.0
ENERGY_MAX_GEV: float = 1600.0
DEFAULT_PER_CLASS_COUNT: int = 5000
DEFAULT_SPLIT_FRACTION: float = 0.8

NORMAL_CLASSES: Tuple[str, ...] = ("QCD", "Top")
ANOMALY_CLASSES: Tuple[str, ...] = ("W", "R2", "R3", "R4", "EFT")
# Ordem cumulativa da varredura de ablação (W, depois R4, EFT, R3 e R2)
ABLATION_ORDER: Tuple[str, ...] = ("W", "R4", "EFT", "R3", "R2")
DEFAULT_HELDOUT_CLASS: str = "EFT"
# Classes conhecidas no termo AA do run principal (EFT fica de fora)
DEFAULT_AA_CLASSES: Tuple[str, ...] = ("W", "R2", "R3", "R4")

# --- Treinamento ---
DEFAULT_LAMBDA_AA: float = 0.5
LAMBDA_GRID: Tuple[float, ...] = (0.3, 0.5, 0.8)
DEFAULT_EPOCHS: int = 10
DEFAULT_BATCH_SIZE: int = 100
DEFAULT_LEARNING_RATE: float = 1e-3
DEFAULT_MIX_RATIO: float = 1.0
ADAM_BETA1: float = 0.9
ADAM_BETA2: float = 0.999
ADAM_EPSILON: float = 1e-8
OPTIMIZERS: Tuple[str, ...] = ("adam", "sgd")

# Arquitetura padrão: (canais de saída, kernel, stride, pooling)
DEFAULT_CONV_LAYERS: List[Tuple[int, int, int, int]] = [(8, 3, 1, 2), (16, 3, 1, 2)]
DEFAULT_DENSE_HIDDEN: List[int] = [64]

# --- Verificação de Gradiente ---
GRAD_CHECK_EPS_MIN: float = 1e-7
GRAD_CHECK_EPS_MAX: float = 1e-3
GRAD_CHECK_FULL_LIMIT: int = 2000
GRAD_CHECK_SAMPLE: int = 256

# --- Análise ---
DEFAULT_DELTAS: Tuple[float, ...] = (0.08, 0.1, 0.12)
SCAN_STEP_FRACTION: float = 0.1
# Casas decimais das bordas de janela (grade nominal da varredura)
GRID_DECIMALS: int = 12
# sigma_QCD da ordem de 50e3 fb; sigma_Top e sigma_W são marcadores configuráveis
DEFAULT_CROSS_SECTIONS_FB: Dict[str, float] = {"QCD": 5.0e4, "Top": 2.0e3, "W": 1.0e3}
SIGNIFICANCE_THRESHOLD: float = 5.0
HL_LHC_LUMINOSITY: float = 3000.0
DEFAULT_LUMINOSITY_GRID: Tuple[float, ...] = (
    10.0, 30.0, 100.0, 300.0, 500.0, 1000.0, 1500.0, 2000.0, 2500.0, 3000.0)
DEFAULT_SCAN_AXIS_CLASS: str = "Top"
DEFAULT_PDF_BINS: int = 50
DEFAULT_SIMPLEX_BINS: int = 30
DEFAULT_SCAN_SPLIT: str = "test"

# --- Códigos de Saída da CLI ---
EXIT_OK: int = 0
EXIT_UNEXPECTED: int = 1
EXIT_CONFIG: int = 2
EXIT_DATA: int = 3
EXIT_NUMERIC: int = 4

# --- Textos dos Relatórios (centralizados) ---
MESSAGES: Dict[str, str] = {
    "naive_note": ("P_An = 1 - P(Top) - P(QCD) é apenas diagnóstico: ingênua demais "
                   "para física de partículas, pois ignora as seções de choque e as "
                   "eficiências de QCD e Top restantes após o corte."),
    "sigma_top_note": ("sigma_Top é um marcador configurável; forneça o valor após os "
                       "cortes na configuração antes de qualquer conclusão física."),
    "cuts_note": ("Os cortes de seleção (p_T > 750 GeV, m_J em [50, 300] GeV) não são "
                  "simulados; o intervalo [E_min, E_max] do gerador os substitui."),
    "excluded_window": "janela excluída de R_max (fundo nulo, aproximação gaussiana inválida)",
    "digest_mismatch": "digest divergente",
    "digest_ok": "ok",
    "digest_missing": "arquivo ausente",
    "summary_title": "Relatório do Experimento Anomaly Awareness",
    "log_command_start": "{sep} INÍCIO DO COMANDO {command} {sep}",
    "log_command_end": "{sep} FIM DO COMANDO {command} {sep}",
}
