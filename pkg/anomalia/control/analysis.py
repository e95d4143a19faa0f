# ----------------------------------------------------------------------------
# File: anomalia/control/analysis.py (Estatísticas de Detecção)
# ----------------------------------------------------------------------------
# SPDX-License-Identifier: MIT
# Copyright (c) 2024-2025 Mateus G Pereira <mateus.pereira@ifsp.edu.br>
"""
Transforma modelos treinados em estatísticas de detecção: extração de
probabilidades softmax, histogramas (PDFs), ROC/AUC entre classes normais,
probabilidade ingênua de anomalia, varredura de janelas com largura delta,
métrica R, significância e seção de choque mínima detectável.

Todas as operações são puras sobre coleções imutáveis de `ScoreRecord`.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from anomalia.control.constants import (DEFAULT_LUMINOSITY_GRID, DEFAULT_PDF_BINS,
                                        DEFAULT_SIMPLEX_BINS, GRID_DECIMALS, MESSAGES,
                                        SCAN_STEP_FRACTION, SIGNIFICANCE_THRESHOLD)
from anomalia.control.eventgen import Dataset
from anomalia.control.exceptions import (ConfigurationError, DimensionError, EmptyInputError,
                                         NumericError, PreconditionError, UnknownClassError)
from anomalia.control.network import NetworkParams, predict_proba

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ScoreRecord:
    """Vetor softmax (K,) de um evento e a sua classe de origem."""

    probs: np.ndarray
    true_class: str
    event_id: int = 0


@dataclass(frozen=True)
class Window:
    """Janela fechada [p_min, p_max] sobre a probabilidade do eixo `axis`."""

    p_min: float
    p_max: float
    axis: int = 0

    def validate(self) -> "Window":
        if not 0.0 <= self.p_min < self.p_max <= 1.0:
            raise ConfigurationError(
                f"Janela inválida [{self.p_min}, {self.p_max}]; exige 0 <= p_min < p_max <= 1.")
        return self

    def contains(self, value: float) -> bool:
        return self.p_min <= value <= self.p_max


@dataclass(frozen=True)
class Histogram:
    """Histograma de densidade 1D: `density[i]` cobre [edges[i], edges[i+1])."""

    edges: np.ndarray
    density: np.ndarray

    def integral(self) -> float:
        return float(np.sum(self.density * np.diff(self.edges)))


@dataclass(frozen=True)
class Histogram2D:
    x_edges: np.ndarray
    y_edges: np.ndarray
    density: np.ndarray

    def integral(self) -> float:
        areas = np.outer(np.diff(self.x_edges), np.diff(self.y_edges))
        return float(np.sum(self.density * areas))


@dataclass(frozen=True)
class RocCurve:
    """Pontos (fpr, tpr) por limiar decrescente e a área sob a curva."""

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float


@dataclass
class ScanResult:
    """
    Saída da varredura de janelas.

    Janelas com fundo nulo e eficiência de anomalia positiva ficam marcadas
    em `excluded` e têm R armazenado como 0, logo `r_max == max(r_values)`.
    """

    delta: float
    step: float
    axis: int
    anomaly_class: str
    backgrounds: Tuple[str, ...]
    windows: List[Window]
    efficiencies: List[Dict[str, float]]
    errors: List[Dict[str, float]]
    r_values: List[float]
    excluded: List[bool]
    r_max: float
    best_index: int
    counts: Dict[str, int] = field(default_factory=dict)

    @property
    def best_window(self) -> Window:
        return self.windows[self.best_index]

    @property
    def centers(self) -> List[float]:
        return [(w.p_min + w.p_max) / 2.0 for w in self.windows]


# --- Extração de scores ---

def score_dataset(model: NetworkParams, ds: Dataset,
                  indices: Optional[Sequence[int]] = None) -> List[ScoreRecord]:
    """
    Probabilidades softmax de cada evento do dataset, na ordem original.

    Raises:
        DimensionError: Imagens incompatíveis com a entrada do modelo.
    """
    idx = np.arange(len(ds)) if indices is None else np.asarray(indices, dtype=np.int64)
    if idx.size == 0:
        return []
    if tuple(ds.image_shape) != tuple(model.arch.input_shape):
        raise DimensionError("Imagens do dataset", model.arch.input_shape, ds.image_shape)
    probs = predict_proba(model, ds.normalized_pixels(idx))
    labels = ds.label_names
    return [ScoreRecord(probs=probs[row], true_class=labels[int(i)], event_id=int(i))
            for row, i in enumerate(idx)]


def records_matrix(records: Sequence[ScoreRecord]) -> Tuple[np.ndarray, List[str]]:
    """Empilha os registros em (N, K) float64 e a lista de classes de origem."""
    if not records:
        return np.zeros((0, 0), dtype=np.float64), []
    return (np.stack([np.asarray(r.probs, dtype=np.float64) for r in records]),
            [r.true_class for r in records])


def _axis_values(records: Sequence[ScoreRecord], axis: int) -> Tuple[np.ndarray, List[str]]:
    probs, labels = records_matrix(records)
    if probs.size and not 0 <= axis < probs.shape[1]:
        raise DimensionError("Eixo de probabilidade", f"0..{probs.shape[1] - 1}", axis)
    return (probs[:, axis] if probs.size else np.zeros(0)), labels


def class_names_in(records: Iterable[ScoreRecord]) -> List[str]:
    """Classes de origem presentes, na ordem de primeira ocorrência."""
    seen: Dict[str, None] = {}
    for r in records:
        seen.setdefault(r.true_class, None)
    return list(seen)


# --- Histogramas ---

def pdf_histogram(records: Sequence[ScoreRecord], axis: int,
                  bins: int = DEFAULT_PDF_BINS) -> Histogram:
    """
    Histograma de densidade de probs[axis] em [0, 1] (integral 1).

    Raises:
        PreconditionError: bins < 2.
        EmptyInputError: Lista de registros vazia.
    """
    if bins < 2:
        raise PreconditionError(f"pdf_histogram: bins deve ser >= 2 ({bins}).")
    if not records:
        raise EmptyInputError("pdf_histogram: nenhum registro.")
    values, _ = _axis_values(records, axis)
    density, edges = np.histogram(values, bins=bins, range=(0.0, 1.0), density=True)
    return Histogram(edges=edges, density=density)


def pdf_by_class(records: Sequence[ScoreRecord], axis: int,
                 bins: int = DEFAULT_PDF_BINS) -> Dict[str, Histogram]:
    """Um histograma normalizado por classe de origem presente."""
    return {name: pdf_histogram([r for r in records if r.true_class == name], axis, bins)
            for name in class_names_in(records)}


def simplex_pdf(records: Sequence[ScoreRecord], axes: Tuple[int, int],
                bins: int = DEFAULT_SIMPLEX_BINS) -> Histogram2D:
    """
    Densidade 2D de (probs[a], probs[b]) no quadrado [0, 1]^2 (integral 1).

    Raises:
        ConfigurationError: K < 3 ou eixos iguais.
        EmptyInputError: Lista de registros vazia.
    """
    if not records:
        raise EmptyInputError("simplex_pdf: nenhum registro.")
    probs, _ = records_matrix(records)
    if probs.shape[1] < 3:
        raise ConfigurationError(f"simplex_pdf: exige K >= 3 classes, recebido K={probs.shape[1]}.")
    a, b = axes
    if a == b:
        raise ConfigurationError(f"simplex_pdf: eixos devem ser distintos ({a}, {b}).")
    for axis in (a, b):
        if not 0 <= axis < probs.shape[1]:
            raise DimensionError("Eixo do simplex", f"0..{probs.shape[1] - 1}", axis)
    if bins < 1:
        raise PreconditionError(f"simplex_pdf: bins deve ser >= 1 ({bins}).")
    density, x_edges, y_edges = np.histogram2d(probs[:, a], probs[:, b], bins=bins,
                                               range=[[0.0, 1.0], [0.0, 1.0]], density=True)
    return Histogram2D(x_edges=x_edges, y_edges=y_edges, density=density)


# --- ROC ---

def roc_auc(records: Sequence[ScoreRecord], positive_class: str, negative_class: str,
            axis: int) -> RocCurve:
    """
    Curva ROC varrendo limiares sobre probs[axis] (eventos com score >= limiar
    são positivos). Empates formam um único ponto; AUC pela regra do trapézio.

    Raises:
        UnknownClassError: Alguma das classes ausente dos registros.
    """
    values, labels = _axis_values(records, axis)
    present = set(labels)
    for name in (positive_class, negative_class):
        if name not in present:
            raise UnknownClassError(name, sorted(present))
    label_arr = np.asarray(labels)
    pos = np.sort(values[label_arr == positive_class])
    neg = np.sort(values[label_arr == negative_class])
    thresholds = np.unique(np.concatenate([pos, neg]))[::-1]
    tp = pos.size - np.searchsorted(pos, thresholds, side="left")
    fp = neg.size - np.searchsorted(neg, thresholds, side="left")
    tpr = np.concatenate([[0.0], tp / pos.size])
    fpr = np.concatenate([[0.0], fp / neg.size])
    auc = float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(fpr=fpr, tpr=tpr, thresholds=np.concatenate([[np.inf], thresholds]), auc=auc)


# --- Probabilidade ingênua de anomalia ---

def naive_anomaly_prob(record: ScoreRecord, axes: Optional[Sequence[int]]) -> float:
    """
    P_An = 1 - soma de probs sobre os eixos normais (ex: Top e QCD).

    Com uma softmax que cobre só as classes normais o valor é 0; é mantido
    como diagnóstico, ingênuo demais para fins de física.

    Raises:
        ConfigurationError: Eixos não definidos.
    """
    if not axes:
        raise ConfigurationError("naive_anomaly_prob: eixos das classes normais não definidos.")
    probs = np.asarray(record.probs, dtype=np.float64)
    return float(1.0 - sum(probs[a] for a in axes))


def naive_anomaly_summary(records: Sequence[ScoreRecord],
                          axes: Sequence[int]) -> Dict[str, object]:
    """Média de P_An por classe de origem, acompanhada da nota de ingenuidade."""
    means: Dict[str, float] = {}
    for name in class_names_in(records):
        values = [naive_anomaly_prob(r, axes) for r in records if r.true_class == name]
        means[name] = float(np.mean(values))
    return {"mean_by_class": means, "note": MESSAGES["naive_note"]}


# --- Eficiências e métrica R ---

def window_efficiency(records: Sequence[ScoreRecord], window: Window,
                      classes: Optional[Sequence[str]] = None) -> Dict[str, Optional[float]]:
    """
    Fração dos eventos de cada classe com probs[axis] em [p_min, p_max]
    (fronteiras inclusivas).

    Args:
        classes: Classes a reportar; padrão, as presentes nos registros.

    Returns:
        Mapa classe -> eficiência; None para classe sem registros.
    """
    window.validate()
    values, labels = _axis_values(records, window.axis)
    names = list(classes) if classes is not None else class_names_in(records)
    label_arr = np.asarray(labels)
    result: Dict[str, Optional[float]] = {}
    for name in names:
        v = values[label_arr == name] if values.size else values
        if v.size == 0:
            result[name] = None
            continue
        inside = int(np.count_nonzero((v >= window.p_min) & (v <= window.p_max)))
        result[name] = inside / v.size
    return result


def efficiency_errors(eff: Mapping[str, Optional[float]],
                      counts: Mapping[str, int]) -> Dict[str, Optional[float]]:
    """Erro binomial sqrt(eps (1 - eps) / n) por classe."""
    errors: Dict[str, Optional[float]] = {}
    for name, value in eff.items():
        n = counts.get(name, 0)
        errors[name] = None if value is None or n <= 0 else math.sqrt(value * (1.0 - value) / n)
    return errors


def validate_cross_sections(xsec: Mapping[str, float]) -> Dict[str, float]:
    """
    Raises:
        ConfigurationError: Alguma seção de choque não positiva ou não finita.
    """
    table = {str(k): float(v) for k, v in xsec.items()}
    for name, value in table.items():
        if not math.isfinite(value) or value <= 0:
            raise ConfigurationError(f"Seção de choque inválida para '{name}': {value} fb.")
    return table


def compute_R(eff: Mapping[str, Optional[float]], xsec: Mapping[str, float],
              anomaly_class: str, background_classes: Sequence[str]) -> float:
    """
    R = eps_An / sqrt(sum_b sigma_b eps_b), em fb^(-1/2).

    Denominador nulo com eps_An > 0 devolve `math.inf` (sentinela de janela
    sem fundo); eps_An = 0 devolve 0.

    Raises:
        ConfigurationError: Classe sem eficiência ou fundo sem seção de choque.
        NumericError: Eficiência ou seção de choque negativa.
    """
    needed = [anomaly_class, *background_classes]
    for name in needed:
        if eff.get(name) is None:
            raise ConfigurationError(f"compute_R: sem eficiência para a classe '{name}'.")
        if eff[name] < 0:  # type: ignore[operator]
            raise NumericError(f"compute_R: eficiência negativa para '{name}'.")
    for name in background_classes:
        if name not in xsec:
            raise ConfigurationError(f"compute_R: sem seção de choque para '{name}'.")
        if xsec[name] < 0:
            raise NumericError(f"compute_R: seção de choque negativa para '{name}'.")
    eps_an = float(eff[anomaly_class])  # type: ignore[arg-type]
    if eps_an == 0.0:
        return 0.0
    denom = 0.0
    for name in background_classes:
        denom += float(xsec[name]) * float(eff[name])  # type: ignore[arg-type]
    if denom == 0.0:
        return math.inf
    return eps_an / math.sqrt(denom)


def _scan_windows(delta: float, step: float, axis: int) -> List[Window]:
    # Bordas a partir do índice inteiro, arredondadas à grade decimal nominal
    n = int(math.floor(round((1.0 - delta) / step, GRID_DECIMALS - 3))) + 1
    windows = []
    for i in range(n):
        low = round(i * step, GRID_DECIMALS)
        high = round(i * step + delta, GRID_DECIMALS)
        windows.append(Window(max(0.0, low), min(1.0, high), axis))
    return windows


def scan_windows(records: Sequence[ScoreRecord], delta: float, step: Optional[float],
                 xsec: Mapping[str, float], anomaly_class: str,
                 backgrounds: Sequence[str], axis: int = 0) -> ScanResult:
    """
    Desliza a janela [c - delta/2, c + delta/2] pelos centros
    c = delta/2, delta/2 + step, ..., 1 - delta/2 e calcula R em cada uma.

    Args:
        step: Passo entre centros; None usa delta/10.

    Raises:
        ConfigurationError: delta/step fora da faixa ou nenhuma janela válida.
    """
    if step is None:
        step = delta * SCAN_STEP_FRACTION
    if not 0.0 < delta <= 1.0:
        raise ConfigurationError(f"scan_windows: delta deve estar em (0, 1], recebido {delta}.")
    if not 0.0 < step <= delta:
        raise ConfigurationError(f"scan_windows: step deve estar em (0, delta], recebido {step}.")
    values, labels = _axis_values(records, axis)
    label_arr = np.asarray(labels)
    names = [anomaly_class, *backgrounds]
    sorted_values: Dict[str, np.ndarray] = {}
    for name in names:
        if name not in sorted_values:
            sorted_values[name] = np.sort(values[label_arr == name]) if values.size else values
    counts = {name: int(v.size) for name, v in sorted_values.items()}

    windows = [w.validate() for w in _scan_windows(delta, step, axis)]
    efficiencies: List[Dict[str, float]] = []
    errors: List[Dict[str, float]] = []
    r_values: List[float] = []
    excluded: List[bool] = []
    for window in windows:
        eff: Dict[str, Optional[float]] = {}
        for name, v in sorted_values.items():
            if v.size == 0:
                eff[name] = None
                continue
            inside = (np.searchsorted(v, window.p_max, side="right")
                      - np.searchsorted(v, window.p_min, side="left"))
            eff[name] = int(inside) / v.size
        r = compute_R(eff, xsec, anomaly_class, backgrounds)
        is_excluded = math.isinf(r)
        efficiencies.append(eff)  # type: ignore[arg-type]
        errors.append(efficiency_errors(eff, counts))  # type: ignore[arg-type]
        excluded.append(is_excluded)
        r_values.append(0.0 if is_excluded else r)

    if all(excluded):
        raise ConfigurationError("scan_windows: nenhuma janela válida (fundo nulo em todas).")
    best = int(np.argmax(r_values))
    n_excluded = sum(excluded)
    if n_excluded:
        logger.info("scan_windows(delta=%s): %d janela(s) excluída(s) - %s.",
                    delta, n_excluded, MESSAGES["excluded_window"])
    logger.debug("scan_windows(delta=%s): %d janelas, R_max=%.6g em [%.4f, %.4f].", delta,
                 len(windows), r_values[best], windows[best].p_min, windows[best].p_max)
    return ScanResult(delta=delta, step=step, axis=axis, anomaly_class=anomaly_class,
                      backgrounds=tuple(backgrounds), windows=windows, efficiencies=efficiencies,
                      errors=errors, r_values=r_values, excluded=excluded,
                      r_max=r_values[best], best_index=best, counts=counts)


# --- Significância ---

def significance(n_anomaly: float, n_sm: float) -> float:
    """
    N_An / sqrt(N_SM).

    Raises:
        NumericError: n_sm <= 0 (significância indefinida) ou n_anomaly < 0.
    """
    if not n_sm > 0:
        raise NumericError(f"significance: N_SM deve ser > 0, recebido {n_sm}.")
    if n_anomaly < 0:
        raise NumericError(f"significance: N_An negativo ({n_anomaly}).")
    return n_anomaly / math.sqrt(n_sm)


def sigma_min(r_max: float, luminosity: float,
              threshold: float = SIGNIFICANCE_THRESHOLD) -> float:
    """
    Seção de choque mínima detectável: threshold / (R_max sqrt(L)), em fb.

    Raises:
        NumericError: r_max ou luminosidade não positivos (ou não finitos).
    """
    for name, value in (("r_max", r_max), ("luminosity", luminosity), ("threshold", threshold)):
        if not math.isfinite(value) or value <= 0:
            raise NumericError(f"sigma_min: {name} deve ser finito e > 0, recebido {value}.")
    return threshold / (r_max * math.sqrt(luminosity))


def sigma_min_curve(r_max: float, luminosities: Sequence[float] = DEFAULT_LUMINOSITY_GRID,
                    threshold: float = SIGNIFICANCE_THRESHOLD) -> List[Tuple[float, float]]:
    """Pares (L, sigma_min) sobre a grade de luminosidade."""
    return [(float(lum), sigma_min(r_max, lum, threshold)) for lum in luminosities]
