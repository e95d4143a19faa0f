# ----------------------------------------------------------------------------
# File: tests/test_network.py (Testes da Rede e da Retropropagação)
# ----------------------------------------------------------------------------
# SPDX-License-Identifier: MIT
# Copyright (c) 2024-2025 Mateus G Pereira <mateus.pereira@ifsp.edu.br>
"""
Testes do classificador: layout dos parâmetros, forward/softmax, gradiente
contra diferenças finitas em arquiteturas aleatórias e otimizadores.
"""
import numpy as np
import pytest

from anomalia.control.exceptions import (ConfigurationError, DimensionError, NumericError,
                                         PreconditionError)
from anomalia.control.network import (AdamHyper, AdamState, Architecture, ConvLayerSpec,
                                      NetworkParams, adam_step, backward, default_architecture,
                                      forward, grad_check, init_params, loss_and_gradient,
                                      predict_proba, sgd_step)


def _arch_from_seed(seed: int) -> Architecture:
    rng = np.random.default_rng(seed)
    size = int(rng.integers(6, 10))
    h = size
    conv = []
    for _ in range(int(rng.integers(0, 3))):
        kernel = int(rng.integers(1, min(3, h) + 1))
        stride = int(rng.integers(1, 3))
        out = (h - kernel) // stride + 1
        pool = 2 if out >= 4 and rng.uniform() < 0.5 else 1
        conv.append(ConvLayerSpec(int(rng.integers(1, 4)), kernel, stride, pool))
        h = out // pool
    k = int(rng.integers(2, 5))
    hidden = [int(rng.integers(2, 6)) for _ in range(int(rng.integers(0, 3)))]
    return Architecture(input_shape=(size, size), conv_layers=tuple(conv),
                        dense_layers=(*hidden, k), num_classes=k).validate()


def _random_params(arch: Architecture, rng: np.random.Generator) -> NetworkParams:
    # Vieses aleatórios evitam pré-ativações exatamente nulas (dobra da ReLU)
    flat = rng.normal(0.0, 0.3, size=arch.param_count())
    return NetworkParams(arch, flat.astype(np.float64))


def _random_targets(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    return rng.dirichlet(np.ones(k), size=n)


@pytest.mark.parametrize("seed", range(20))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(1000 + seed)
    arch = _arch_from_seed(seed)
    params = _random_params(arch, rng)
    batch = rng.uniform(0.0, 1.0, size=(2, *arch.input_shape))
    targets = _random_targets(rng, 2, arch.num_classes)
    assert grad_check(params, batch, targets, epsilon=1e-5) < 1e-4


def test_gradient_check_single_example_one_hot():
    rng = np.random.default_rng(7)
    arch = Architecture((6, 6), (ConvLayerSpec(2, 3, 1, 2),), (4, 3), 3).validate()
    params = _random_params(arch, rng)
    image = rng.uniform(0.0, 1.0, size=(6, 6))
    assert grad_check(params, image, np.array([0.0, 1.0, 0.0]), epsilon=1e-5) < 1e-4


def test_gradient_check_tiny_dense_net():
    rng = np.random.default_rng(3)
    arch = Architecture((4, 4), (), (6, 2), 2).validate()
    assert arch.param_count() <= 500
    params = _random_params(arch, rng)
    batch = rng.uniform(size=(3, 4, 4))
    assert grad_check(params, batch, _random_targets(rng, 3, 2), epsilon=1e-5) < 1e-4


def test_gradient_is_zero_when_target_equals_output():
    rng = np.random.default_rng(5)
    arch = Architecture((6, 6), (ConvLayerSpec(2, 3, 1, 1),), (3, 2), 2).validate()
    params = _random_params(arch, rng)
    batch = rng.uniform(size=(2, 6, 6))
    targets = forward(params, batch).output_probs
    _, grad = loss_and_gradient(params, batch, targets)
    assert not np.any(grad.flat)
    assert grad_check(params, batch, targets, epsilon=1e-5) < 1e-4


def test_batch_of_identical_examples_matches_single():
    rng = np.random.default_rng(9)
    arch = Architecture((7, 7), (ConvLayerSpec(2, 3, 2, 1),), (4, 2), 2).validate()
    params = _random_params(arch, rng)
    image = rng.uniform(size=(7, 7))
    target = np.array([1.0, 0.0])
    one = backward(params, image, target)
    two = backward(params, np.stack([image, image]), np.stack([target, target]))
    assert np.allclose(one.flat, two.flat, rtol=1e-10, atol=1e-14)


def test_backward_rejects_mismatched_batch():
    arch = Architecture((4, 4), (), (2,), 2).validate()
    params = init_params(arch, 0)
    with pytest.raises(DimensionError):
        backward(params, np.zeros((3, 4, 4)), np.full((2, 2), 0.5))


def test_grad_check_epsilon_range():
    arch = Architecture((4, 4), (), (2,), 2).validate()
    params = init_params(arch, 0)
    with pytest.raises(PreconditionError):
        grad_check(params, np.zeros((1, 4, 4)), np.array([[1.0, 0.0]]), epsilon=1e-2)


def test_softmax_output_is_probability_vector():
    rng = np.random.default_rng(0)
    for seed in range(10):
        arch = _arch_from_seed(seed)
        params = _random_params(arch, rng)
        probs = forward(params, rng.uniform(size=(5, *arch.input_shape))).output_probs
        assert probs.shape == (5, arch.num_classes)
        assert np.all(probs >= 0)
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)


def test_single_image_returns_vector():
    arch = default_architecture(2)
    probs = forward(init_params(arch, 1), np.zeros((32, 32), dtype=np.float32)).output_probs
    assert probs.shape == (2,)


def test_zero_weights_give_uniform_output():
    arch = Architecture((8, 8), (ConvLayerSpec(2, 3, 1, 2),), (4, 3), 3).validate()
    params = NetworkParams(arch)
    probs = predict_proba(params, np.random.default_rng(0).uniform(size=(4, 8, 8)))
    assert np.allclose(probs, 1.0 / 3.0)


def test_forward_rejects_wrong_shape():
    params = init_params(default_architecture(2), 0)
    with pytest.raises(DimensionError):
        forward(params, np.zeros((2, 16, 16)))


def test_predict_proba_chunks_match_forward():
    arch = Architecture((6, 6), (ConvLayerSpec(2, 3, 1, 1),), (2,), 2).validate()
    params = init_params(arch, 4)
    x = np.random.default_rng(1).uniform(size=(7, 6, 6)).astype(np.float32)
    assert np.allclose(predict_proba(params, x, batch_size=3), forward(params, x).output_probs)
    assert predict_proba(params, x[:0]).shape == (0, 2)


def test_architecture_validation():
    with pytest.raises(ConfigurationError, match="kernel"):
        Architecture((4, 4), (ConvLayerSpec(2, 5),), (2,), 2).validate()
    with pytest.raises(ConfigurationError, match="última camada"):
        Architecture((4, 4), (), (3,), 2).validate()
    with pytest.raises(ConfigurationError):
        Architecture((4, 4), (), (1,), 1).validate()


def test_architecture_dict_round_trip():
    arch = default_architecture(3, (16, 16))
    assert Architecture.from_dict(arch.to_dict()) == arch


def test_flat_vector_and_tensors_share_memory():
    arch = Architecture((6, 6), (ConvLayerSpec(2, 3, 1, 2),), (4, 2), 2).validate()
    params = NetworkParams(arch)
    assert len(params) == arch.param_count()
    assert params.names == ["conv0.W", "conv0.b", "dense0.W", "dense0.b", "dense1.W", "dense1.b"]
    params.tensor("dense0.b")[...] = 3.0
    offset = sum(t.size for t in params.tensors[:3])
    assert np.all(params.flat[offset:offset + 4] == 3.0)
    params.flat[0] = -1.0
    assert params.weight(0)[0, 0, 0, 0] == -1.0
    with pytest.raises(DimensionError):
        NetworkParams(arch, np.zeros(arch.param_count() + 1))


def test_init_params_is_deterministic_with_zero_biases():
    arch = default_architecture(2, (16, 16))
    a, b = init_params(arch, 12), init_params(arch, 12)
    assert a.flat.tobytes() == b.flat.tobytes()
    assert not np.array_equal(a.flat, init_params(arch, 13).flat)
    for name, tensor in zip(a.names, a.tensors):
        if name.endswith(".b"):
            assert not np.any(tensor)


def test_sgd_step_is_pure():
    arch = Architecture((4, 4), (), (2,), 2).validate()
    params = init_params(arch, 0)
    before = params.flat.copy()
    grad = params.with_flat(np.ones_like(params.flat))
    updated = sgd_step(params, grad, 0.5)
    assert np.array_equal(params.flat, before)
    assert np.allclose(updated.flat, before - 0.5)
    with pytest.raises(PreconditionError):
        sgd_step(params, grad, 0.0)
    with pytest.raises(NumericError):
        sgd_step(params, params.with_flat(np.full_like(params.flat, np.nan)), 0.1)


def test_adam_first_step_moves_by_learning_rate():
    arch = Architecture((4, 4), (), (2,), 2).validate()
    params = init_params(arch, 0).astype(np.float64)
    grad = params.with_flat(np.linspace(-2.0, 2.0, len(params)) + 0.01)
    state = AdamState.zeros_like(params)
    updated, new_state = adam_step(params, grad, state, AdamHyper(learning_rate=0.01))
    assert new_state.t == 1 and state.t == 0
    assert not np.any(state.m)
    assert np.allclose(params.flat - updated.flat, 0.01 * np.sign(grad.flat), rtol=1e-5)
