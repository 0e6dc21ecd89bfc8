"""Latent sampling, the mapping network Z -> W, and style-space ops."""
from __future__ import annotations

from typing import Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from .config import StyleConfig


def sample_latent(z_dim: int, batch: int = 1, *,
                  generator: Optional[torch.Generator] = None,
                  dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Draw latents from a standard spherical Gaussian."""
    return torch.randn(batch, z_dim, generator=generator, dtype=dtype)


class MappingNetwork(nn.Module):
    """Fully connected stack mapping latents z to style vectors w.

    The input latent is normalized onto the sphere of radius sqrt(dim)
    before the stack, matching the spherical-Gaussian prior.
    """

    def __init__(self, cfg: StyleConfig):
        super().__init__()
        self.cfg = cfg
        dims = [cfg.z_dim] + [cfg.w_dim] * cfg.mapping_layers
        self.layers = nn.ModuleList(
            nn.Linear(dims[i], dims[i + 1]) for i in range(cfg.mapping_layers))
        # running mean of w, used by the optional truncation pull
        self.register_buffer("w_mean", torch.zeros(cfg.w_dim))
        self.register_buffer("w_mean_count", torch.zeros(()))

    def forward(self, z: torch.Tensor, update_mean: bool = False) -> torch.Tensor:
        if z.ndim == 1:
            return self.forward(z[None], update_mean=update_mean)[0]
        if z.shape[-1] != self.cfg.z_dim:
            raise ValueError(
                f"latent dimension {z.shape[-1]} does not match mapping input "
                f"{self.cfg.z_dim}")
        x = z * torch.rsqrt(z.square().mean(dim=-1, keepdim=True) + 1e-8)
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i + 1 < len(self.layers):
                x = F.leaky_relu(x, 0.2)
        if update_mean:
            with torch.no_grad():
                n = x.shape[0]
                total = self.w_mean_count + n
                self.w_mean.mul_(self.w_mean_count / total).add_(
                    x.mean(dim=0).detach() * (n / total))
                self.w_mean_count.copy_(total)
        return x

    def truncate(self, w: torch.Tensor, psi: float) -> torch.Tensor:
        """Pull w toward the running mean; psi=1 is a no-op."""
        return self.w_mean.to(w.dtype) + psi * (w - self.w_mean.to(w.dtype))


def map_latent(mapping: MappingNetwork, z: torch.Tensor) -> torch.Tensor:
    return mapping(z)


def broadcast(w: torch.Tensor, layer_count: int) -> torch.Tensor:
    """Tile a single style vector into one row per style-consuming layer."""
    if layer_count <= 0:
        raise ValueError(f"layer_count must be positive, got {layer_count}")
    if w.ndim == 1:
        return w[None].expand(layer_count, -1).clone()
    if w.ndim == 2:   # batch of styles -> (B, layers, w_dim)
        return w[:, None].expand(-1, layer_count, -1).clone()
    raise ValueError(f"expected 1D or 2D style tensor, got shape {tuple(w.shape)}")


def mix(broadcast_a: torch.Tensor, broadcast_b: torch.Tensor,
        crossover_layer: int) -> torch.Tensor:
    """Rows before the crossover come from a, rows at/after from b."""
    if broadcast_a.shape != broadcast_b.shape:
        raise ValueError("mixing requires identically shaped broadcasts")
    layers = broadcast_a.shape[-2]
    if not 0 <= crossover_layer <= layers:
        raise ValueError(
            f"crossover_layer {crossover_layer} outside [0, {layers}]")
    out = broadcast_b.clone()
    out[..., :crossover_layer, :] = broadcast_a[..., :crossover_layer, :]
    return out


def interpolate(w_a: torch.Tensor, w_b: torch.Tensor, t: float) -> torch.Tensor:
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"interpolation parameter must lie in [0,1], got {t}")
    if w_a.shape != w_b.shape:
        raise ValueError("interpolation requires equal style dimensions")
    return (1.0 - t) * w_a + t * w_b
