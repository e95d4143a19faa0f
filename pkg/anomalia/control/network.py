# ----------------------------------------------------------------------------
# File: anomalia/control/network.py (Classificador com Retropropagação Explícita)
# ----------------------------------------------------------------------------
# SPDX-License-Identifier: MIT
# Copyright (c) 2024-2025 Mateus G Pereira <mateus.pereira@ifsp.edu.br>
"""
Rede feedforward mínima: camadas convolucionais configuráveis (ReLU e
max-pooling opcional) seguidas de camadas densas e saída softmax.

Os passos forward e backward são escritos à mão para o cardápio fixo de
camadas. Todos os parâmetros vivem num único vetor contíguo (`flat`), e os
tensores de cada camada são *views* desse vetor, na ordem:

    conv0.W, conv0.b, conv1.W, conv1.b, ..., dense0.W, dense0.b, ...

Pesos convolucionais têm forma (saída, entrada, k, k); pesos densos, (entrada, saída).
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

import numpy as np

from anomalia.control.constants import (ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON,
                                        DEFAULT_CONV_LAYERS, DEFAULT_DENSE_HIDDEN,
                                        DEFAULT_LEARNING_RATE, GRAD_CHECK_EPS_MAX,
                                        GRAD_CHECK_EPS_MIN, GRAD_CHECK_FULL_LIMIT,
                                        GRAD_CHECK_SAMPLE, GRID_HEIGHT, GRID_WIDTH)
from anomalia.control.exceptions import (ConfigurationError, DimensionError, NumericError,
                                         PreconditionError)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConvLayerSpec:
    """Camada convolucional sem padding, seguida de ReLU e max-pool `pool` x `pool`."""

    out_channels: int
    kernel_size: int
    stride: int = 1
    pool: int = 1


@dataclass(frozen=True)
class Architecture:
    """
    Arquitetura do classificador.

    Attributes:
        input_shape: (H, W) da imagem de entrada (um canal).
        conv_layers: Camadas convolucionais em ordem.
        dense_layers: Larguras das camadas densas; a última é `num_classes`.
        num_classes: Número K de classes normais (>= 2).
    """

    input_shape: Tuple[int, int]
    conv_layers: Tuple[ConvLayerSpec, ...]
    dense_layers: Tuple[int, ...]
    num_classes: int

    def validate(self) -> Self:
        """
        Raises:
            ConfigurationError: Se algum kernel não couber na extensão espacial,
                ou se a última camada densa não tiver largura `num_classes`.
        """
        if self.num_classes < 2:
            raise ConfigurationError(f"Architecture: num_classes deve ser >= 2 ({self.num_classes}).")
        if not self.dense_layers or self.dense_layers[-1] != self.num_classes:
            raise ConfigurationError(
                f"Architecture: a última camada densa deve ter largura {self.num_classes}, "
                f"recebido {list(self.dense_layers)}.")
        if any(width < 1 for width in self.dense_layers):
            raise ConfigurationError(f"Architecture: largura densa inválida {list(self.dense_layers)}.")
        h, w = self.input_shape
        if h < 1 or w < 1:
            raise ConfigurationError(f"Architecture: entrada inválida {self.input_shape}.")
        for i, layer in enumerate(self.conv_layers):
            if min(layer.out_channels, layer.kernel_size, layer.stride, layer.pool) < 1:
                raise ConfigurationError(f"Architecture: conv{i} com parâmetro < 1 ({layer}).")
            if layer.kernel_size > h or layer.kernel_size > w:
                raise ConfigurationError(
                    f"Architecture: kernel {layer.kernel_size} da conv{i} não cabe em {h}x{w}.")
            h = (h - layer.kernel_size) // layer.stride + 1
            w = (w - layer.kernel_size) // layer.stride + 1
            if layer.pool > h or layer.pool > w:
                raise ConfigurationError(
                    f"Architecture: pooling {layer.pool} da conv{i} não cabe em {h}x{w}.")
            h, w = h // layer.pool, w // layer.pool
        return self

    def feature_shapes(self) -> List[Tuple[int, int, int]]:
        """Formas (C, H, W) após cada camada convolucional, começando pela entrada."""
        shapes = [(1, *self.input_shape)]
        c, (h, w) = 1, self.input_shape
        for layer in self.conv_layers:
            h = ((h - layer.kernel_size) // layer.stride + 1) // layer.pool
            w = ((w - layer.kernel_size) // layer.stride + 1) // layer.pool
            c = layer.out_channels
            shapes.append((c, h, w))
        return shapes

    def tensor_shapes(self) -> List[Tuple[str, Tuple[int, ...]]]:
        """Nome e forma de cada tensor na ordem do vetor plano."""
        shapes: List[Tuple[str, Tuple[int, ...]]] = []
        c_in = 1
        for i, layer in enumerate(self.conv_layers):
            k = layer.kernel_size
            shapes.append((f"conv{i}.W", (layer.out_channels, c_in, k, k)))
            shapes.append((f"conv{i}.b", (layer.out_channels,)))
            c_in = layer.out_channels
        c, h, w = self.feature_shapes()[-1]
        fan_in = c * h * w
        for j, width in enumerate(self.dense_layers):
            shapes.append((f"dense{j}.W", (fan_in, width)))
            shapes.append((f"dense{j}.b", (width,)))
            fan_in = width
        return shapes

    def param_count(self) -> int:
        return sum(math.prod(shape) for _, shape in self.tensor_shapes())

    def to_dict(self) -> Dict[str, Any]:
        return {"input_shape": list(self.input_shape),
                "conv_layers": [[c.out_channels, c.kernel_size, c.stride, c.pool]
                                for c in self.conv_layers],
                "dense_layers": list(self.dense_layers),
                "num_classes": self.num_classes}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Architecture":
        try:
            arch = cls(input_shape=tuple(int(v) for v in data["input_shape"]),  # type: ignore[arg-type]
                       conv_layers=tuple(ConvLayerSpec(*[int(v) for v in layer])
                                         for layer in data.get("conv_layers", [])),
                       dense_layers=tuple(int(v) for v in data["dense_layers"]),
                       num_classes=int(data["num_classes"]))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigurationError(f"Architecture: definição inválida ({e}).") from e
        return arch.validate()


def default_architecture(num_classes: int,
                         input_shape: Tuple[int, int] = (GRID_HEIGHT, GRID_WIDTH)) -> Architecture:
    """Duas convoluções 3x3 (8 e 16 canais, pool 2x2), densa 64 e densa K."""
    return Architecture(
        input_shape=input_shape,
        conv_layers=tuple(ConvLayerSpec(*layer) for layer in DEFAULT_CONV_LAYERS),
        dense_layers=(*DEFAULT_DENSE_HIDDEN, num_classes),
        num_classes=num_classes,
    ).validate()


class NetworkParams:
    """
    Parâmetros da rede num vetor plano contíguo com views por tensor.

    Escrever em `flat` ou num tensor é observacionalmente idêntico.
    """

    def __init__(self: Self, arch: Architecture, flat: Optional[np.ndarray] = None,
                 dtype: Any = np.float32):
        self.arch = arch
        expected = arch.param_count()
        if flat is None:
            flat = np.zeros(expected, dtype=dtype)
        flat = np.ascontiguousarray(flat)
        if flat.ndim != 1 or flat.size != expected:
            raise DimensionError("NetworkParams.flat", (expected,), flat.shape)
        self.flat = flat
        self.names: List[str] = []
        self.tensors: List[np.ndarray] = []
        offset = 0
        for name, shape in arch.tensor_shapes():
            size = math.prod(shape)
            self.names.append(name)
            self.tensors.append(self.flat[offset:offset + size].reshape(shape))
            offset += size

    @property
    def flat_view(self) -> np.ndarray:
        return self.flat

    def weight(self: Self, layer: int) -> np.ndarray:
        return self.tensors[2 * layer]

    def bias(self: Self, layer: int) -> np.ndarray:
        return self.tensors[2 * layer + 1]

    def tensor(self: Self, name: str) -> np.ndarray:
        return self.tensors[self.names.index(name)]

    def copy(self: Self) -> "NetworkParams":
        return NetworkParams(self.arch, self.flat.copy())

    def astype(self: Self, dtype: Any) -> "NetworkParams":
        return NetworkParams(self.arch, self.flat.astype(dtype, copy=True))

    def with_flat(self: Self, flat: np.ndarray) -> "NetworkParams":
        return NetworkParams(self.arch, flat)

    def __len__(self: Self) -> int:
        return int(self.flat.size)

    def __repr__(self: Self) -> str:
        return f"<NetworkParams(n={self.flat.size}, dtype={self.flat.dtype})>"


def init_params(arch: Architecture, seed: int) -> NetworkParams:
    """
    Inicializa os pesos com normal de média zero e escala sqrt(2 / fan_in)
    (He) e os vieses com zero. Determinístico dada a semente.

    Raises:
        ConfigurationError: Arquitetura inválida.
    """
    arch.validate()
    rng = np.random.default_rng(seed)
    params = NetworkParams(arch)
    for name, tensor in zip(params.names, params.tensors):
        if name.endswith(".b"):
            continue
        if name.startswith("conv"):
            fan_in = tensor.shape[1] * tensor.shape[2] * tensor.shape[3]
        else:
            fan_in = tensor.shape[0]
        tensor[...] = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=tensor.shape)
    logger.debug("Parâmetros inicializados: %d valores (semente %d).", len(params), seed)
    return params


# --- Blocos de camada ---

def _windows(x: np.ndarray, kernel: int, stride: int) -> np.ndarray:
    """Janelas (N, C, Ho, Wo, k, k) de `x` (N, C, H, W) sem cópia, via as_strided."""
    n, c, h, w = x.shape
    out_h = (h - kernel) // stride + 1
    out_w = (w - kernel) // stride + 1
    s_n, s_c, s_h, s_w = x.strides
    return np.lib.stride_tricks.as_strided(
        x, (n, c, out_h, out_w, kernel, kernel),
        (s_n, s_c, stride * s_h, stride * s_w, s_h, s_w), writeable=False)


def _conv_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray,
                  stride: int) -> np.ndarray:
    windows = _windows(np.ascontiguousarray(x), weight.shape[2], stride)
    out = np.einsum("nchwij,ocij->nohw", windows, weight, optimize=True)
    return out + bias[None, :, None, None]


def _conv_backward(x: np.ndarray, weight: np.ndarray, dout: np.ndarray, stride: int,
                   need_dx: bool) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    k = weight.shape[2]
    windows = _windows(np.ascontiguousarray(x), k, stride)
    dw = np.einsum("nohw,nchwij->ocij", dout, windows, optimize=True)
    db = dout.sum(axis=(0, 2, 3))
    if not need_dx:
        return dw, db, None
    dx = np.zeros_like(x)
    out_h, out_w = dout.shape[2], dout.shape[3]
    # Espalha o gradiente de cada deslocamento (i, j) do kernel
    for i in range(k):
        for j in range(k):
            dx[:, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride] += np.einsum(
                "nohw,oc->nchw", dout, weight[:, :, i, j], optimize=True)
    return dw, db, dx


def _pool_forward(a: np.ndarray, pool: int) -> Tuple[np.ndarray, np.ndarray]:
    n, c, h, w = a.shape
    hp, wp = h // pool, w // pool
    blocks = (a[:, :, :hp * pool, :wp * pool]
              .reshape(n, c, hp, pool, wp, pool)
              .transpose(0, 1, 2, 4, 3, 5)
              .reshape(n, c, hp, wp, pool * pool))
    argmax = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, argmax[..., None], axis=-1)[..., 0]
    return out, argmax


def _pool_backward(dout: np.ndarray, argmax: np.ndarray, pool: int,
                   input_shape: Tuple[int, ...]) -> np.ndarray:
    n, c, hp, wp = dout.shape
    blocks = np.zeros((n, c, hp, wp, pool * pool), dtype=dout.dtype)
    np.put_along_axis(blocks, argmax[..., None], dout[..., None], axis=-1)
    grad = (blocks.reshape(n, c, hp, wp, pool, pool)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(n, c, hp * pool, wp * pool))
    full = np.zeros(input_shape, dtype=dout.dtype)
    full[:, :, :hp * pool, :wp * pool] = grad
    return full


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    """log-softmax estabilizado por log-sum-exp (float64)."""
    z = logits.astype(np.float64)
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


@dataclass
class ForwardTrace:
    """
    Resultado do forward: ativações retidas para a retropropagação.

    Attributes:
        inputs: Entrada (N, 1, H, W).
        pre_activations: Pré-ativações de cada camada (conv e densa).
        activations: Saídas de cada camada após ReLU/pooling (a última são os logits).
        output_probs: Softmax (N, K) em float64; vetor (K,) para entrada única.
        log_probs: log-softmax (N, K) em float64.
    """

    inputs: np.ndarray
    pre_activations: List[np.ndarray]
    activations: List[np.ndarray]
    output_probs: np.ndarray
    log_probs: np.ndarray
    pool_argmax: List[Optional[np.ndarray]] = field(default_factory=list)
    relu_outputs: List[np.ndarray] = field(default_factory=list)

    @property
    def logits(self) -> np.ndarray:
        return self.activations[-1]


def _as_batch(arch: Architecture, images: np.ndarray, dtype: Any) -> Tuple[np.ndarray, bool]:
    x = np.asarray(images)
    single = x.ndim == 2
    if single:
        x = x[None, ...]
    if x.ndim != 3 or tuple(x.shape[1:]) != tuple(arch.input_shape):
        raise DimensionError("Entrada da rede", ("N", *arch.input_shape), x.shape)
    return x.astype(dtype, copy=False)[:, None, :, :], single


def forward(params: NetworkParams, images: np.ndarray) -> ForwardTrace:
    """
    Propaga uma imagem (H, W) ou um lote (N, H, W) já normalizados.

    Returns:
        O traço com probabilidades softmax; para imagem única,
        `output_probs` tem forma (K,).

    Raises:
        DimensionError: Dimensões incompatíveis com a arquitetura.
    """
    arch = params.arch
    x, single = _as_batch(arch, images, params.flat.dtype)
    pre: List[np.ndarray] = []
    acts: List[np.ndarray] = []
    relus: List[np.ndarray] = []
    argmaxes: List[Optional[np.ndarray]] = []
    a = x
    for i, layer in enumerate(arch.conv_layers):
        z = _conv_forward(a, params.weight(i), params.bias(i), layer.stride)
        r = np.maximum(z, 0)
        if layer.pool > 1:
            a, argmax = _pool_forward(r, layer.pool)
        else:
            a, argmax = r, None
        pre.append(z)
        relus.append(r)
        argmaxes.append(argmax)
        acts.append(a)
    a = a.reshape(a.shape[0], -1)
    n_conv = len(arch.conv_layers)
    n_dense = len(arch.dense_layers)
    for j in range(n_dense):
        z = a @ params.weight(n_conv + j) + params.bias(n_conv + j)
        a = np.maximum(z, 0) if j < n_dense - 1 else z
        pre.append(z)
        acts.append(a)
    log_probs = _log_softmax(a)
    probs = np.exp(log_probs)
    if single:
        probs = probs[0]
    return ForwardTrace(inputs=x, pre_activations=pre, activations=acts, output_probs=probs,
                        log_probs=log_probs, pool_argmax=argmaxes, relu_outputs=relus)


def predict_proba(params: NetworkParams, images: np.ndarray, batch_size: int = 500) -> np.ndarray:
    """Probabilidades softmax (N, K) em float64, avaliadas em blocos."""
    x = np.asarray(images)
    if x.shape[0] == 0:
        _as_batch(params.arch, np.zeros((1, *x.shape[1:]), dtype=np.float32), params.flat.dtype)
        return np.zeros((0, params.arch.num_classes), dtype=np.float64)
    chunks = [np.atleast_2d(forward(params, x[i:i + batch_size]).output_probs)
              for i in range(0, x.shape[0], batch_size)]
    return np.concatenate(chunks, axis=0)


def _check_targets(targets: np.ndarray, n: int, k: int) -> np.ndarray:
    t = np.asarray(targets, dtype=np.float64)
    if t.ndim == 1:
        t = t[None, :]
    if t.shape != (n, k):
        raise DimensionError("Alvos do lote", (n, k), t.shape)
    if (t < 0).any() or np.abs(t.sum(axis=1) - 1.0).max(initial=0.0) > 1e-6:
        raise PreconditionError("Alvos devem ser vetores de probabilidade (>= 0, soma 1).")
    return t


def loss_and_gradient(params: NetworkParams, images: np.ndarray,
                      targets: np.ndarray) -> Tuple[float, NetworkParams]:
    """
    Entropia cruzada média entre as saídas softmax e os vetores-alvo, e seu
    gradiente em relação a todos os parâmetros.

    Aceita alvos one-hot (classes normais) e uniformes (termo de anomalia).

    Returns:
        (perda em float64, gradiente com a mesma forma e dtype dos parâmetros).

    Raises:
        DimensionError: Tamanhos de lote e alvos incompatíveis.
        PreconditionError: Alvos que não são vetores de probabilidade.
    """
    arch = params.arch
    trace = forward(params, images)
    n = trace.inputs.shape[0]
    t = _check_targets(targets, n, arch.num_classes)
    loss = float(-(t * trace.log_probs).sum() / n)

    dtype = params.flat.dtype
    grad = NetworkParams(arch, dtype=dtype)
    probs = np.atleast_2d(trace.output_probs)
    dz = ((probs - t) / n).astype(dtype)

    n_conv = len(arch.conv_layers)
    n_dense = len(arch.dense_layers)
    for j in reversed(range(n_dense)):
        layer = n_conv + j
        if j < n_dense - 1:
            dz = dz * (trace.pre_activations[layer] > 0)
        if j > 0:
            a_prev = trace.activations[layer - 1]
        elif n_conv > 0:
            a_prev = trace.activations[n_conv - 1].reshape(n, -1)
        else:
            a_prev = trace.inputs.reshape(n, -1)
        grad.weight(layer)[...] = a_prev.T @ dz
        grad.bias(layer)[...] = dz.sum(axis=0)
        dz = dz @ params.weight(layer).T

    if n_conv:
        da = dz.reshape(trace.activations[n_conv - 1].shape)
        for i in reversed(range(n_conv)):
            layer = arch.conv_layers[i]
            relu_out = trace.relu_outputs[i]
            if layer.pool > 1:
                da = _pool_backward(da, trace.pool_argmax[i], layer.pool, relu_out.shape)
            dz_conv = da * (trace.pre_activations[i] > 0)
            x_in = trace.inputs if i == 0 else trace.activations[i - 1]
            dw, db, dx = _conv_backward(x_in, params.weight(i), dz_conv, layer.stride,
                                        need_dx=i > 0)
            grad.weight(i)[...] = dw
            grad.bias(i)[...] = db
            da = dx
    return loss, grad


def backward(params: NetworkParams, batch: np.ndarray, targets: np.ndarray) -> NetworkParams:
    """Gradiente da entropia cruzada média do lote (ver `loss_and_gradient`)."""
    x = np.asarray(batch)
    t = np.asarray(targets)
    n_batch = 1 if x.ndim == 2 else x.shape[0]
    n_targets = 1 if t.ndim == 1 else t.shape[0]
    if n_batch != n_targets:
        raise DimensionError("Tamanho do lote vs alvos", n_batch, n_targets)
    return loss_and_gradient(params, batch, targets)[1]


def loss_only(params: NetworkParams, images: np.ndarray, targets: np.ndarray) -> float:
    """Perda média sem gradiente (float64)."""
    trace = forward(params, images)
    n = trace.inputs.shape[0]
    t = _check_targets(targets, n, params.arch.num_classes)
    return float(-(t * trace.log_probs).sum() / n)


def grad_check(params: NetworkParams, batch: np.ndarray, targets: np.ndarray,
               epsilon: float = 1e-5, sample: int = GRAD_CHECK_SAMPLE, seed: int = 0,
               atol: float = 1e-8) -> float:
    """
    Compara o gradiente analítico com diferenças finitas centrais.

    Avalia todas as coordenadas quando a rede tem até GRAD_CHECK_FULL_LIMIT
    parâmetros; acima disso, uma subamostra aleatória de max(200, sample)
    coordenadas. A avaliação é feita numa cópia float64 dos parâmetros.

    Coordenadas em que ambos os valores ficam abaixo de `atol` contam como
    erro zero (o erro relativo perde sentido no piso de arredondamento).

    Returns:
        Maior erro relativo |a - b| / max(|a|, |b|, 1e-12).

    Raises:
        PreconditionError: epsilon fora de [1e-7, 1e-3].
    """
    if not GRAD_CHECK_EPS_MIN <= epsilon <= GRAD_CHECK_EPS_MAX:
        raise PreconditionError(
            f"grad_check: epsilon {epsilon} fora de [{GRAD_CHECK_EPS_MIN}, {GRAD_CHECK_EPS_MAX}].")
    trial = params.astype(np.float64)
    x = np.asarray(batch, dtype=np.float64)
    _, analytic = loss_and_gradient(trial, x, targets)

    n = len(trial)
    if n <= GRAD_CHECK_FULL_LIMIT:
        coords = np.arange(n)
    else:
        rng = np.random.default_rng(seed)
        coords = np.sort(rng.choice(n, size=min(n, max(200, sample)), replace=False))

    worst = 0.0
    for idx in coords:
        original = trial.flat[idx]
        trial.flat[idx] = original + epsilon
        plus = loss_only(trial, x, targets)
        trial.flat[idx] = original - epsilon
        minus = loss_only(trial, x, targets)
        trial.flat[idx] = original
        numeric = (plus - minus) / (2.0 * epsilon)
        a = float(analytic.flat[idx])
        if abs(a) < atol and abs(numeric) < atol:
            continue
        err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-12)
        worst = max(worst, err)
    logger.debug("grad_check: %d coordenadas, erro relativo máximo %.3e.", len(coords), worst)
    return worst


# --- Otimizadores ---

def _check_step(params: NetworkParams, gradient: NetworkParams, learning_rate: float):
    if not learning_rate > 0:
        raise PreconditionError(f"learning_rate deve ser > 0, recebido {learning_rate}.")
    if gradient.flat.shape != params.flat.shape:
        raise DimensionError("Gradiente", params.flat.shape, gradient.flat.shape)
    if not np.isfinite(gradient.flat).all():
        raise NumericError("Gradiente com entradas não finitas; passo abortado.")


def sgd_step(params: NetworkParams, gradient: NetworkParams,
             learning_rate: float) -> NetworkParams:
    """params' = params - learning_rate * gradient (novo objeto)."""
    _check_step(params, gradient, learning_rate)
    return params.with_flat(params.flat - learning_rate * gradient.flat)


@dataclass(frozen=True)
class AdamHyper:
    learning_rate: float = DEFAULT_LEARNING_RATE
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    epsilon: float = ADAM_EPSILON


@dataclass
class AdamState:
    """Momentos do Adam, carregados explicitamente entre passos."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, params: NetworkParams) -> "AdamState":
        return cls(np.zeros_like(params.flat), np.zeros_like(params.flat), 0)


def adam_step(params: NetworkParams, gradient: NetworkParams, moments: AdamState,
              hyper: AdamHyper) -> Tuple[NetworkParams, AdamState]:
    """
    Um passo Adam com correção de viés.

    Returns:
        (novos parâmetros, novos momentos); as entradas não são alteradas.
    """
    _check_step(params, gradient, hyper.learning_rate)
    g = gradient.flat
    t = moments.t + 1
    m = hyper.beta1 * moments.m + (1.0 - hyper.beta1) * g
    v = hyper.beta2 * moments.v + (1.0 - hyper.beta2) * g * g
    m_hat = m / (1.0 - hyper.beta1 ** t)
    v_hat = v / (1.0 - hyper.beta2 ** t)
    update = hyper.learning_rate * m_hat / (np.sqrt(v_hat) + hyper.epsilon)
    new_flat = (params.flat - update).astype(params.flat.dtype, copy=False)
    return params.with_flat(new_flat), AdamState(m.astype(params.flat.dtype, copy=False),
                                                 v.astype(params.flat.dtype, copy=False), t)


def architecture_from_layers(input_shape: Tuple[int, int], conv: Sequence[Sequence[int]],
                             hidden: Sequence[int], num_classes: int) -> Architecture:
    """Monta e valida uma arquitetura a partir de listas simples (configuração)."""
    return Architecture(input_shape=tuple(input_shape),  # type: ignore[arg-type]
                        conv_layers=tuple(ConvLayerSpec(*[int(v) for v in layer]) for layer in conv),
                        dense_layers=(*[int(h) for h in hidden], num_classes),
                        num_classes=num_classes).validate()
