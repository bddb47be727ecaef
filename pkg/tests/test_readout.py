import numpy as np
import pytest

import diffgraph.autodiff as ad
from diffgraph.diffusion import DiffusionConfig, build_kernel
from diffgraph.errors import ConfigError
from diffgraph.readout import (
    ReadoutConfig,
    apply_readout,
    attention_readout,
    diffusion_readout,
    max_readout,
    mean_readout,
)

from helpers import random_graph, random_structure


def test_mean_and_max_hand_values():
    z = np.array([[1.0, -2.0], [3.0, 0.0], [2.0, 5.0]])
    np.testing.assert_allclose(mean_readout(z), [2.0, 1.0])
    np.testing.assert_allclose(max_readout(z), [3.0, 5.0])


def test_attention_uniform_weights_recovers_mean():
    z = np.array([[1.0, 2.0], [3.0, 4.0]])
    # zero attention vector gives equal logits, hence the plain mean
    got = attention_readout(z, np.zeros(2))
    np.testing.assert_allclose(got, [2.0, 3.0], atol=1e-15)


def test_attention_hand_value():
    z = np.array([[1.0, 0.0], [0.0, 1.0]])
    w = np.array([1.0, 0.0])
    # logits (1, 0): weights softmax = (e, 1)/(e+1)
    e = np.e
    want = np.array([e / (e + 1.0), 1.0 / (e + 1.0)])
    np.testing.assert_allclose(attention_readout(z, w), want, atol=1e-14)


def test_tensor_paths_match_numpy_paths():
    rng = np.random.default_rng(3)
    z = rng.normal(size=(7, 4))
    w = rng.normal(size=4)
    np.testing.assert_allclose(mean_readout(ad.constant(z)).data, mean_readout(z), atol=1e-15)
    np.testing.assert_allclose(max_readout(ad.constant(z)).data, max_readout(z), atol=1e-15)
    np.testing.assert_allclose(
        attention_readout(ad.constant(z), ad.constant(w)).data,
        attention_readout(z, w),
        atol=1e-12,
    )


def test_max_gradient_first_argmax():
    z = ad.leaf(np.array([[2.0, 0.0], [2.0, 1.0], [1.0, 1.0]]))
    out = max_readout(z)
    ad.backward(ad.tsum(out))
    # col 0 ties rows 0 and 1: grad goes to row 0 only; col 1 ties rows 1 and 2
    want = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    np.testing.assert_array_equal(z.grad, want)


def test_diffusion_readout_matches_dense_oracle():
    rng = np.random.default_rng(5)
    config = DiffusionConfig(kind="ppr", alpha=0.2, order=3)
    for _ in range(20):
        structure = random_structure(rng)
        z = rng.normal(size=(structure.n_nodes, 3))
        got = diffusion_readout(z, structure, config)
        k = build_kernel(structure, config).matrix.to_dense()
        want = np.ones(structure.n_nodes) @ k @ z / structure.n_nodes
        np.testing.assert_allclose(got, want, atol=1e-12)


def test_diffusion_readout_tensor_matches_numpy():
    rng = np.random.default_rng(6)
    structure = random_graph(rng, n=6)
    config = DiffusionConfig(kind="random_walk", lam=0.4, order=2)
    z = rng.normal(size=(6, 3))
    got = diffusion_readout(ad.constant(z), structure, config)
    np.testing.assert_allclose(got.data, diffusion_readout(z, structure, config), atol=1e-14)


def numeric_grad(f, x, h=1e-5):
    grad = np.zeros_like(x)
    flat = x.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = f(x)
        flat[i] = orig - h
        down = f(x)
        flat[i] = orig
        grad.ravel()[i] = (up - down) / (2.0 * h)
    return grad


def relcheck(fd, an):
    rel = np.abs(fd - an) / np.maximum.reduce([np.abs(fd), np.abs(an), np.full_like(fd, 1e-8)])
    assert np.max(rel) < 1e-4


def test_attention_gradcheck():
    rng = np.random.default_rng(8)
    z0 = rng.normal(size=(5, 3))
    w0 = rng.normal(size=3)
    probe = rng.normal(size=3)

    def scalar(z_val, w_val):
        return float(attention_readout(z_val, w_val) @ probe)

    z = ad.leaf(z0.copy())
    w = ad.leaf(w0.copy())
    out = attention_readout(z, w)
    ad.backward(ad.tsum(out * ad.constant(probe)))
    relcheck(numeric_grad(lambda v: scalar(v, w0), z0.copy()), z.grad)
    relcheck(numeric_grad(lambda v: scalar(z0, v), w0.copy()), w.grad)


def test_diffusion_readout_gradcheck():
    rng = np.random.default_rng(9)
    structure = random_graph(rng, n=5)
    config = DiffusionConfig(kind="heat", time=0.7, order=4)
    z0 = rng.normal(size=(5, 2))
    probe = rng.normal(size=2)

    def scalar(z_val):
        return float(diffusion_readout(z_val, structure, config) @ probe)

    z = ad.leaf(z0.copy())
    out = diffusion_readout(z, structure, config)
    ad.backward(ad.tsum(out * ad.constant(probe)))
    relcheck(numeric_grad(scalar, z0.copy()), z.grad)


def test_apply_readout_dispatch():
    rng = np.random.default_rng(10)
    structure = random_graph(rng, n=5)
    z = rng.normal(size=(5, 3))
    w = rng.normal(size=3)
    diff = DiffusionConfig(kind="ppr", order=2)
    np.testing.assert_array_equal(apply_readout(ReadoutConfig("mean"), z), mean_readout(z))
    np.testing.assert_array_equal(apply_readout(ReadoutConfig("max"), z), max_readout(z))
    np.testing.assert_array_equal(
        apply_readout(ReadoutConfig("attention"), z, attention_weights=w),
        attention_readout(z, w),
    )
    np.testing.assert_array_equal(
        apply_readout(ReadoutConfig("diffusion", diff), z, structure=structure),
        diffusion_readout(z, structure, diff),
    )


def test_readout_config_validation():
    with pytest.raises(ConfigError):
        ReadoutConfig("median").validate()
    with pytest.raises(ConfigError):
        ReadoutConfig("diffusion").validate()
    with pytest.raises(ConfigError):
        ReadoutConfig("mean", DiffusionConfig()).validate()
    with pytest.raises(ConfigError):
        apply_readout(ReadoutConfig("attention"), np.zeros((2, 2)))
    with pytest.raises(ConfigError):
        apply_readout(ReadoutConfig("diffusion", DiffusionConfig()), np.zeros((2, 2)))
