# ----------------------------------------------------------------------------
# File: anomalia/control/training.py (Treinamento: Prior Run e Anomaly Awareness)
# ----------------------------------------------------------------------------
# SPDX-License-Identifier: MIT
# Copyright (c) 2024-2025 Mateus G Pereira <mateus.pereira@ifsp.edu.br>
"""
Implementa as duas fases de treinamento:

- *prior run*: classificação pura das K classes normais (entropia cruzada);
- *anomaly awareness run*: perda combinada l1 + lambda_AA * l2, em que l2 é a
  entropia cruzada entre a saída e o alvo uniforme sobre lotes de anomalias
  conhecidas.

Inclui ainda a varredura cumulativa de ablação, o estudo de classe retida
(hold-out) e o estudo da grade de lambda_AA.
"""
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from anomalia.control.constants import (ABLATION_ORDER, DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS,
                                        DEFAULT_LAMBDA_AA, DEFAULT_LEARNING_RATE,
                                        DEFAULT_MIX_RATIO, LAMBDA_GRID, NORMAL_CLASSES,
                                        OPTIMIZERS)
from anomalia.control.eventgen import Dataset
from anomalia.control.exceptions import (ConfigurationError, DimensionError, EmptyInputError,
                                         PreconditionError, UnknownClassError)
from anomalia.control.network import (AdamHyper, AdamState, Architecture, NetworkParams,
                                      adam_step, init_params, loss_and_gradient, loss_only,
                                      predict_proba, sgd_step)
from anomalia.control.utils import derive_seed, sha256_bytes

logger = logging.getLogger(__name__)

PHASE_PRIOR = "prior"
PHASE_AA = "aa"


@dataclass(frozen=True)
class TrainConfig:
    """
    Parâmetros do treinamento (ambas as fases).

    Attributes:
        lambda_aa: Peso do termo uniforme (>= 0); ignorado no prior run.
        epochs: Passagens pela partição de treino normal (>= 1).
        batch_size: Tamanho do lote normal (>= 1).
        learning_rate: Passo do otimizador (> 0).
        seed: Semente dos embaralhamentos e da amostragem de anomalias.
        normal_classes: Classes normais, na ordem dos eixos da softmax.
        anomaly_classes: Classes do termo de anomalia (vazio = todas do dataset).
        anomaly_mix_ratio: Exemplos de anomalia por exemplo normal em cada passo (> 0).
        optimizer: "adam" ou "sgd".
    """

    lambda_aa: float = DEFAULT_LAMBDA_AA
    epochs: int = DEFAULT_EPOCHS
    batch_size: int = DEFAULT_BATCH_SIZE
    learning_rate: float = DEFAULT_LEARNING_RATE
    seed: int = 0
    normal_classes: Tuple[str, ...] = NORMAL_CLASSES
    anomaly_classes: Tuple[str, ...] = ()
    anomaly_mix_ratio: float = DEFAULT_MIX_RATIO
    optimizer: str = "adam"

    def validate(self) -> "TrainConfig":
        if self.epochs < 1:
            raise PreconditionError(f"TrainConfig.epochs deve ser >= 1, recebido {self.epochs}.")
        if self.batch_size < 1:
            raise PreconditionError(
                f"TrainConfig.batch_size deve ser >= 1, recebido {self.batch_size}.")
        if not math.isfinite(self.lambda_aa) or self.lambda_aa < 0:
            raise ConfigurationError(f"TrainConfig.lambda_aa deve ser >= 0 ({self.lambda_aa}).")
        if not self.learning_rate > 0:
            raise ConfigurationError(
                f"TrainConfig.learning_rate deve ser > 0 ({self.learning_rate}).")
        if not self.anomaly_mix_ratio > 0:
            raise ConfigurationError(
                f"TrainConfig.anomaly_mix_ratio deve ser > 0 ({self.anomaly_mix_ratio}).")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigurationError(
                f"TrainConfig.optimizer '{self.optimizer}' inválido; opções: {OPTIMIZERS}.")
        if len(self.normal_classes) < 2 or len(set(self.normal_classes)) != len(self.normal_classes):
            raise ConfigurationError(
                f"TrainConfig.normal_classes exige >= 2 nomes distintos ({self.normal_classes}).")
        return self

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["normal_classes"] = list(self.normal_classes)
        data["anomaly_classes"] = list(self.anomaly_classes)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise ConfigurationError(f"TrainConfig: campos desconhecidos {sorted(extra)}.")
        values = dict(data)
        for key in ("normal_classes", "anomaly_classes"):
            if key in values:
                values[key] = tuple(values[key])
        try:
            return cls(**values).validate()
        except TypeError as e:
            raise ConfigurationError(f"TrainConfig inválido: {e}") from e


@dataclass
class EpochLoss:
    epoch: int
    l1: float
    l2: float
    total: float
    train_acc: float
    test_acc: float


@dataclass
class RunReport:
    """
    Relatório de uma execução de treinamento.

    Attributes:
        phase: "prior" ou "aa".
        epochs: Perdas e acurácias por época.
        train_accuracy: Acurácia final na partição de treino normal.
        test_accuracy: Acurácia final na partição de teste normal.
        config: Eco da configuração usada.
        architecture: Eco da arquitetura.
        params_sha256: Digest do vetor de parâmetros (float32 little-endian).
        checkpoint: Caminho do checkpoint, quando persistido.
        centering: Métrica de centralização por classe de anomalia (teste).
    """

    phase: str
    epochs: List[EpochLoss]
    train_accuracy: float
    test_accuracy: float
    config: Dict[str, Any]
    architecture: Dict[str, Any]
    params_sha256: str
    checkpoint: Optional[str] = None
    centering: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["epochs"] = [asdict(e) for e in self.epochs]
        return data


# --- Perdas elementares ---

def _check_probs(probs: np.ndarray) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size < 2:
        raise DimensionError("Vetor de probabilidades", "(K,), K >= 2", p.shape)
    if (p < 0).any() or abs(p.sum() - 1.0) > 1e-6:
        raise PreconditionError("Vetor de probabilidades inválido (entradas >= 0, soma 1).")
    return p


def cross_entropy(probs: np.ndarray, target_class: int) -> float:
    """
    -log probs[target_class].

    Raises:
        DimensionError: Índice alvo fora de [0, K).
    """
    p = _check_probs(probs)
    if not 0 <= target_class < p.size:
        raise DimensionError("Classe alvo", f"0..{p.size - 1}", target_class)
    with np.errstate(divide="ignore"):
        return float(-np.log(p[target_class]))


def uniform_cross_entropy(probs: np.ndarray) -> float:
    """-(1/K) sum_k log probs[k]; mínimo log K no vetor uniforme."""
    p = _check_probs(probs)
    with np.errstate(divide="ignore"):
        return float(-np.log(p).mean())


def centering_metric(probs: np.ndarray) -> float:
    """
    Média de (1 - max_k p_k): distância dos vértices one-hot.

    Raises:
        EmptyInputError: Nenhuma linha de probabilidades.
    """
    p = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    if p.shape[0] == 0 or p.size == 0:
        raise EmptyInputError("centering_metric: nenhum evento.")
    return float(np.mean(1.0 - p.max(axis=1)))


def accuracy(params: NetworkParams, x: np.ndarray, labels: np.ndarray) -> float:
    """Fração de acertos do argmax; 0.0 para conjunto vazio."""
    if labels.size == 0:
        return 0.0
    return float(np.mean(predict_proba(params, x).argmax(axis=1) == labels))


def centering_by_class(params: NetworkParams, ds: Dataset, classes: Sequence[str],
                       split: Optional[str] = "test") -> Dict[str, float]:
    """Métrica de centralização por classe sobre uma partição do dataset."""
    result: Dict[str, float] = {}
    for name in classes:
        idx = ds.class_indices(name, split)
        if idx.size == 0:
            idx = ds.class_indices(name)
        result[name] = centering_metric(predict_proba(params, ds.normalized_pixels(idx)))
    return result


def params_digest(params: NetworkParams) -> str:
    return sha256_bytes(params.flat.astype("<f4").tobytes())


# --- Núcleo de treinamento ---

@dataclass
class _NormalData:
    x: np.ndarray
    labels: np.ndarray
    train: np.ndarray
    test: np.ndarray


def _prepare_normal(normal: Dataset, arch: Architecture, config: TrainConfig) -> _NormalData:
    if arch.num_classes != len(config.normal_classes):
        raise ConfigurationError(
            f"Arquitetura com {arch.num_classes} saídas para {len(config.normal_classes)} "
            "classes normais.")
    missing = [name for name in config.normal_classes if name not in normal.class_names]
    if missing:
        raise ConfigurationError(f"Dataset normal sem as classes declaradas: {missing}.")
    if set(normal.class_names) != set(config.normal_classes):
        logger.debug("Restringindo dataset normal às classes %s.", config.normal_classes)
        normal = normal.select_classes(list(config.normal_classes))
    axis = {name: k for k, name in enumerate(config.normal_classes)}
    labels = np.array([axis[name] for name in normal.label_names], dtype=np.int64)
    train = normal.indices("train")
    for name in config.normal_classes:
        if not np.any(labels[train] == axis[name]):
            raise ConfigurationError(f"Classe normal '{name}' sem imagens de treino.")
    return _NormalData(x=normal.normalized_pixels(), labels=labels, train=train,
                       test=normal.indices("test"))


def _anomaly_pools(anomalies: Optional[Dataset],
                   config: TrainConfig) -> Tuple[Optional[np.ndarray], List[np.ndarray], List[str]]:
    if anomalies is None or len(anomalies) == 0:
        return None, [], []
    names = list(config.anomaly_classes) or list(anomalies.class_names)
    for name in names:
        if name not in anomalies.class_names:
            raise UnknownClassError(name, anomalies.class_names)
    pools = []
    for name in names:
        idx = anomalies.class_indices(name, "train")
        if idx.size == 0:
            idx = anomalies.class_indices(name)
        if idx.size == 0:
            raise ConfigurationError(f"Classe de anomalia '{name}' sem imagens.")
        pools.append(idx)
    return anomalies.normalized_pixels(), pools, names


def _sample_anomalies(rng: np.random.Generator, pools: List[np.ndarray], total: int,
                      step: int) -> np.ndarray:
    """Amostra com reposição, estratificada igualmente entre as classes."""
    n_classes = len(pools)
    base, rest = divmod(total, n_classes)
    chosen = []
    for c, pool in enumerate(pools):
        # O resto gira entre as classes a cada passo
        n_c = base + (1 if (c - step) % n_classes < rest else 0)
        if n_c:
            chosen.append(pool[rng.integers(0, pool.size, size=n_c)])
    return np.concatenate(chosen)


def _train(params: NetworkParams, data: _NormalData, anomaly_x: Optional[np.ndarray],
           pools: List[np.ndarray], config: TrainConfig, lambda_aa: float,
           with_anomaly_term: bool) -> Tuple[NetworkParams, List[EpochLoss]]:
    k = params.arch.num_classes
    eye = np.eye(k, dtype=np.float64)
    uniform_row = np.full(k, 1.0 / k)
    n_anomaly = max(1, int(math.floor(config.batch_size * config.anomaly_mix_ratio + 0.5)))
    use_l2 = with_anomaly_term and anomaly_x is not None and bool(pools)
    hyper = AdamHyper(learning_rate=config.learning_rate)
    state = AdamState.zeros_like(params)
    history: List[EpochLoss] = []

    for epoch in range(1, config.epochs + 1):
        order = np.random.default_rng([config.seed, epoch]).permutation(data.train)
        anomaly_rng = np.random.default_rng([config.seed, epoch, 1])
        sum_l1 = sum_l2 = sum_total = 0.0
        steps = 0
        for start in range(0, order.size, config.batch_size):
            batch = order[start:start + config.batch_size]
            l1, grad = loss_and_gradient(params, data.x[batch], eye[data.labels[batch]])
            l2 = 0.0
            if use_l2:
                picked = _sample_anomalies(anomaly_rng, pools, n_anomaly, steps)
                targets = np.broadcast_to(uniform_row, (picked.size, k))
                if lambda_aa > 0:
                    l2, grad2 = loss_and_gradient(params, anomaly_x[picked], targets)
                    grad = grad.with_flat(grad.flat + lambda_aa * grad2.flat)
                else:
                    # lambda = 0: só o valor de l2 é registrado
                    l2 = loss_only(params, anomaly_x[picked], targets)
            if config.optimizer == "sgd":
                params = sgd_step(params, grad, config.learning_rate)
            else:
                params, state = adam_step(params, grad, state, hyper)
            sum_l1 += l1
            sum_l2 += l2
            sum_total += l1 + lambda_aa * l2
            steps += 1
        train_acc = accuracy(params, data.x[data.train], data.labels[data.train])
        test_acc = accuracy(params, data.x[data.test], data.labels[data.test])
        record = EpochLoss(epoch=epoch, l1=sum_l1 / steps, l2=sum_l2 / steps,
                           total=sum_total / steps, train_acc=train_acc, test_acc=test_acc)
        history.append(record)
        logger.info("Época %d/%d: l1=%.6f l2=%.6f total=%.6f acc treino=%.4f teste=%.4f",
                    epoch, config.epochs, record.l1, record.l2, record.total,
                    train_acc, test_acc)
    return params, history


def _report(phase: str, params: NetworkParams, history: List[EpochLoss], config: TrainConfig,
            lambda_aa: float) -> RunReport:
    echo = config.to_dict()
    echo["lambda_aa"] = lambda_aa
    last = history[-1]
    return RunReport(phase=phase, epochs=history, train_accuracy=last.train_acc,
                     test_accuracy=last.test_acc, config=echo,
                     architecture=params.arch.to_dict(), params_sha256=params_digest(params))


def _initial(arch: Architecture, config: TrainConfig,
             init: Optional[NetworkParams]) -> NetworkParams:
    if init is None:
        return init_params(arch, derive_seed(config.seed, "init"))
    if init.arch != arch:
        raise ConfigurationError("Parâmetros iniciais com arquitetura diferente da pedida.")
    return init.astype(np.float32)


def prior_run(normal: Dataset, arch: Architecture, config: TrainConfig,
              init: Optional[NetworkParams] = None) -> Tuple[NetworkParams, RunReport]:
    """
    Prior run: minimiza a entropia cruzada nas classes normais.

    Args:
        normal: Dataset com as K classes normais declaradas.
        arch: Arquitetura (num_classes == K).
        config: Configuração (lambda_aa é ignorado).
        init: Parâmetros para continuar o treino; None inicializa do zero.

    Raises:
        PreconditionError: epochs < 1.
        ConfigurationError: Dataset sem alguma classe declarada.
    """
    config.validate()
    arch.validate()
    data = _prepare_normal(normal, arch, config)
    logger.info("Prior run: %d imagens de treino, %d épocas, otimizador %s.",
                data.train.size, config.epochs, config.optimizer)
    params, history = _train(_initial(arch, config, init), data, None, [], config, 0.0, False)
    report = _report(PHASE_PRIOR, params, history, config, 0.0)
    return params, report


def aa_run(normal: Dataset, anomalies: Optional[Dataset], arch: Architecture,
           config: TrainConfig,
           init: Optional[NetworkParams] = None) -> Tuple[NetworkParams, RunReport]:
    """
    Anomaly awareness run: perda l1 + lambda_AA * l2 com alvos uniformes.

    Cada passo usa um lote normal de `batch_size` e um lote de anomalias de
    round(batch_size * anomaly_mix_ratio), estratificado entre as classes e
    sorteado com reposição num fluxo aleatório próprio. Com lambda_AA = 0 o
    resultado é idêntico à continuação do prior run com a mesma semente.

    Raises:
        ConfigurationError: Dataset de anomalias vazio com lambda_aa > 0.
    """
    config.validate()
    arch.validate()
    anomaly_x, pools, names = _anomaly_pools(anomalies, config)
    if config.lambda_aa > 0 and not pools:
        raise ConfigurationError("aa_run: dataset de anomalias vazio com lambda_aa > 0.")
    data = _prepare_normal(normal, arch, config)
    if init is None:
        logger.warning("aa_run sem parâmetros iniciais: partida a frio.")
    logger.info("AA run: lambda_AA=%s, anomalias %s, mix=%s.", config.lambda_aa, names,
                config.anomaly_mix_ratio)
    params, history = _train(_initial(arch, config, init), data, anomaly_x, pools, config,
                             config.lambda_aa, True)
    report = _report(PHASE_AA, params, history, config, config.lambda_aa)
    if anomalies is not None and names:
        report.centering = centering_by_class(params, anomalies, names)
    return params, report


# --- Estudos ---

def _baseline(normal: Dataset, arch: Architecture, config: TrainConfig,
              init: Optional[NetworkParams]) -> NetworkParams:
    """Parâmetros do prior run; sem `init`, treina um prior run em memória."""
    if init is not None:
        return init
    logger.info("Estudo sem prior run: treinando um prior run para a linha de base.")
    params, _ = prior_run(normal, arch, config)
    return params


@dataclass
class AblationStep:
    n_classes: int
    classes: List[str]
    heldout: str
    heldout_centering: float
    prior_centering: float
    report: RunReport

    @property
    def gain(self) -> float:
        return self.heldout_centering - self.prior_centering

    def to_dict(self) -> Dict[str, Any]:
        return {"n_classes": self.n_classes, "classes": list(self.classes),
                "heldout": self.heldout, "heldout_centering": self.heldout_centering,
                "prior_centering": self.prior_centering, "gain": self.gain,
                "report": self.report.to_dict()}


def ablation_sweep(normal: Dataset, anomaly_pool: Dataset, arch: Architecture,
                   config: TrainConfig, init: Optional[NetworkParams], heldout: str,
                   order: Sequence[str] = ABLATION_ORDER) -> List[AblationStep]:
    """
    AA runs com subconjuntos cumulativos de anomalias (1, 2, ..., n classes),
    sempre sem a classe retida; reporta a centralização da classe retida.

    O conjunto considerado são as classes de `order` presentes no pool
    (incluindo a retida).
    Sem `init`, um prior run é treinado antes e serve de linha de base
    e de ponto de partida.

    Raises:
        ConfigurationError: Pool com menos de 2 classes ou classe retida ausente.
    """
    pool = [name for name in order if name in anomaly_pool.class_names]
    if not pool:
        raise ConfigurationError("ablation_sweep: pool de anomalias vazio.")
    if len(pool) < 2:
        raise ConfigurationError(
            f"ablation_sweep: pool exige >= 2 classes (incluindo a retida), recebido {pool}.")
    if heldout not in pool:
        raise UnknownClassError(heldout, pool)
    aware = [name for name in pool if name != heldout]
    start = _baseline(normal, arch, config, init)
    prior_c = centering_by_class(start, anomaly_pool, [heldout])[heldout]
    steps: List[AblationStep] = []
    for n in range(1, len(aware) + 1):
        classes = aware[:n]
        run_config = replace(config, anomaly_classes=tuple(classes),
                             seed=derive_seed(config.seed, f"ablation-{n}"))
        logger.info("Ablação %d/%d: classes %s, retida %s.", n, len(aware), classes, heldout)
        params, report = aa_run(normal, anomaly_pool, arch, run_config, start)
        held_c = centering_by_class(params, anomaly_pool, [heldout])[heldout]
        report.centering[heldout] = held_c
        steps.append(AblationStep(n_classes=n, classes=list(classes), heldout=heldout,
                                  heldout_centering=held_c, prior_centering=prior_c,
                                  report=report))
    return steps


@dataclass
class HoldoutResult:
    heldout: str
    aware: List[str]
    prior_centering: float
    aa_centering: float

    @property
    def gain(self) -> float:
        return self.aa_centering - self.prior_centering


def holdout_study(normal: Dataset, anomalies: Dataset, arch: Architecture,
                  config: TrainConfig,
                  init: Optional[NetworkParams] = None) -> Dict[str, HoldoutResult]:
    """
    Retém cada classe de anomalia por vez: AA run com as demais e ganho de
    centralização da retida em relação ao prior run.
    """
    names = list(config.anomaly_classes) or list(anomalies.class_names)
    if len(names) < 2:
        raise ConfigurationError(f"holdout_study: exige >= 2 classes de anomalia ({names}).")
    init = _baseline(normal, arch, config, init)
    prior = centering_by_class(init, anomalies, names)
    results: Dict[str, HoldoutResult] = {}
    for name in names:
        aware = [other for other in names if other != name]
        params, _ = aa_run(normal, anomalies, arch, replace(config, anomaly_classes=tuple(aware)),
                           init)
        held = centering_by_class(params, anomalies, [name])[name]
        results[name] = HoldoutResult(heldout=name, aware=aware, prior_centering=prior[name],
                                      aa_centering=held)
        logger.info("Hold-out %s: centralização %.4f -> %.4f.", name, prior[name], held)
    return results


@dataclass
class LambdaResult:
    lambda_aa: float
    test_accuracy: float
    centering: Dict[str, float]


def lambda_study(normal: Dataset, anomalies: Dataset, arch: Architecture, config: TrainConfig,
                 init: Optional[NetworkParams] = None,
                 grid: Sequence[float] = LAMBDA_GRID) -> List[LambdaResult]:
    """AA runs sobre a grade de lambda_AA (sem ajuste automático)."""
    init = _baseline(normal, arch, config, init)
    results = []
    for lam in grid:
        _, report = aa_run(normal, anomalies, arch, replace(config, lambda_aa=float(lam)), init)
        results.append(LambdaResult(lambda_aa=float(lam), test_accuracy=report.test_accuracy,
                                    centering=dict(report.centering)))
    return results
