import numpy as np
import pytest
import torch

from stylefield.config import StyleConfig
from stylefield.styles import (MappingNetwork, broadcast, interpolate, mix,
                               sample_latent)


def small_mapping():
    torch.manual_seed(0)
    return MappingNetwork(StyleConfig(z_dim=8, w_dim=8, mapping_layers=3))


def test_sample_latent_deterministic():
    g1 = torch.Generator().manual_seed(7)
    g2 = torch.Generator().manual_seed(7)
    assert torch.equal(sample_latent(16, 4, generator=g1),
                       sample_latent(16, 4, generator=g2))


def test_sample_latent_moments():
    g = torch.Generator().manual_seed(0)
    z = sample_latent(64, 4096, generator=g)
    assert abs(float(z.mean())) < 0.01
    assert abs(float(z.std()) - 1.0) < 0.01


def test_mapping_matches_loop_oracle():
    """Dense forward re-done with explicit numpy loops."""
    m = small_mapping()
    g = torch.Generator().manual_seed(3)
    z = sample_latent(8, 2, generator=g)
    got = m(z).detach().numpy()

    x = z.numpy().astype(np.float64)
    x = x / np.sqrt((x ** 2).mean(axis=-1, keepdims=True) + 1e-8)
    for i, layer in enumerate(m.layers):
        wt = layer.weight.detach().numpy().astype(np.float64)
        b = layer.bias.detach().numpy().astype(np.float64)
        y = np.empty((x.shape[0], wt.shape[0]))
        for r in range(x.shape[0]):
            for o in range(wt.shape[0]):
                y[r, o] = float(np.dot(wt[o], x[r]) + b[o])
        x = y
        if i + 1 < len(m.layers):
            x = np.where(x >= 0, x, 0.2 * x)
    assert np.abs(got - x).max() < 1e-5


def test_mapping_input_scale_invariance():
    m = small_mapping()
    z = torch.randn(3, 8, generator=torch.Generator().manual_seed(1))
    assert torch.allclose(m(z), m(z * 100.0), atol=1e-5)


def test_mapping_rejects_wrong_dim():
    m = small_mapping()
    with pytest.raises(ValueError):
        m(torch.zeros(2, 5))


def test_running_mean_and_truncation():
    m = small_mapping()
    g = torch.Generator().manual_seed(0)
    w1 = m(sample_latent(8, 10, generator=g), update_mean=True)
    m(sample_latent(8, 10, generator=g), update_mean=True)
    assert float(m.w_mean_count) == 20
    w = w1[0]
    assert torch.allclose(m.truncate(w, 1.0), w)
    assert torch.allclose(m.truncate(w, 0.0), m.w_mean)
    half = m.truncate(w, 0.5)
    assert torch.allclose(half, 0.5 * (w + m.w_mean), atol=1e-6)


def test_broadcast_shapes_and_validation():
    w = torch.arange(4.0)
    b = broadcast(w, 5)
    assert b.shape == (5, 4)
    assert torch.equal(b[3], w)
    batch = broadcast(torch.stack([w, w + 1]), 3)
    assert batch.shape == (2, 3, 4)
    with pytest.raises(ValueError):
        broadcast(w, 0)


def test_mix_semantics():
    a = broadcast(torch.zeros(4), 6)
    b = broadcast(torch.ones(4), 6)
    m = mix(a, b, 2)
    assert torch.equal(m[:2], a[:2])
    assert torch.equal(m[2:], b[2:])
    assert torch.equal(mix(a, b, 0), b)
    assert torch.equal(mix(a, b, 6), a)
    with pytest.raises(ValueError):
        mix(a, b, 7)
    with pytest.raises(ValueError):
        mix(a, b[:5], 2)


def test_interpolate_endpoints_and_bounds():
    a, b = torch.zeros(4), torch.ones(4)
    assert torch.equal(interpolate(a, b, 0.0), a)
    assert torch.equal(interpolate(a, b, 1.0), b)
    assert torch.allclose(interpolate(a, b, 0.25), torch.full((4,), 0.25))
    with pytest.raises(ValueError):
        interpolate(a, b, 1.5)
    with pytest.raises(ValueError):
        interpolate(a, b, -0.1)
