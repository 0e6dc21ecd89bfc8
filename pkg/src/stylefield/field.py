"""Style-conditioned radiance field.

Foreground samples inside the unit sphere run through modulated 1x1
blocks over Fourier-encoded coordinates; background samples outside are
re-parameterized onto the inverted sphere and handled by a narrower
network. Density comes from an early feature level, color from a deeper
shared branch.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from .config import FieldConfig


def fourier_features(x: torch.Tensor, L: int) -> torch.Tensor:
    """Per input scalar: [sin(2^k x), cos(2^k x)] for k = 0..L-1.

    Input (..., D) -> output (..., D * 2L), frequency-major per scalar.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    freqs = 2.0 ** torch.arange(L, dtype=x.dtype, device=x.device)
    ang = x[..., None] * freqs                       # (..., D, L)
    enc = torch.stack([torch.sin(ang), torch.cos(ang)], dim=-1)  # (..., D, L, 2)
    return enc.reshape(*x.shape[:-1], x.shape[-1] * 2 * L)


def invert_sphere(x: torch.Tensor) -> torch.Tensor:
    """Map points with ||x|| >= 1 to (x/r, y/r, z/r, 1/r)."""
    r = x.norm(dim=-1, keepdim=True)
    if bool((r < 1.0 - 1e-6).any()):
        raise ValueError("inverted-sphere parameterization requires ||x|| >= 1")
    return torch.cat([x / r, 1.0 / r], dim=-1)


class ModulatedLinear(nn.Module):
    """1x1 convolution whose weight is scaled per input channel by an
    affine function of the style, then row-renormalized (demodulation)."""

    def __init__(self, in_features: int, out_features: int, w_dim: int, *,
                 demodulate: bool = True, activation: str = "lrelu",
                 eps: float = 1e-8):
        super().__init__()
        self.weight = nn.Parameter(torch.randn(out_features, in_features)
                                   / in_features ** 0.5)
        self.bias = nn.Parameter(torch.zeros(out_features))
        self.affine = nn.Linear(w_dim, in_features)
        nn.init.zeros_(self.affine.weight)
        nn.init.ones_(self.affine.bias)
        self.demodulate = demodulate
        self.activation = activation
        self.eps = eps

    def forward(self, x: torch.Tensor, w: torch.Tensor,
                pre_activation_bias: Optional[torch.Tensor] = None) -> torch.Tensor:
        """x: (B, ..., in), w: (B, w_dim) or (w_dim,) applied to all.

        ``pre_activation_bias`` (e.g. an injected noise map) is added to
        the linear response before the nonlinearity.
        """
        if not torch.isfinite(w).all():
            raise FloatingPointError("non-finite style vector")
        squeeze = False
        if w.ndim == 1:
            w = w[None]
            x = x[None]
            squeeze = True
        s = self.affine(w)                                   # (B, in)
        wgt = self.weight[None] * s[:, None, :]              # (B, out, in)
        if self.demodulate:
            wgt = wgt * torch.rsqrt(wgt.square().sum(dim=-1, keepdim=True)
                                    + self.eps)
        y = torch.einsum("b...i,boi->b...o", x, wgt) + self.bias
        if pre_activation_bias is not None:
            y = y + pre_activation_bias
        if self.activation == "lrelu":
            y = F.leaky_relu(y, 0.2)
        elif self.activation != "linear":
            raise ValueError(f"unknown activation {self.activation!r}")
        return y[0] if squeeze else y


@dataclass
class FieldSample:
    """Per-point field outputs."""
    sigma: torch.Tensor          # (..., ) nonnegative
    features: torch.Tensor       # (..., hidden_fg) density-level features
    color: Optional[torch.Tensor] = None   # (..., 3), color path only


class EvalCounter:
    """Counts network evaluations per point, split by field."""

    def __init__(self):
        self.foreground = 0
        self.background = 0

    def reset(self):
        self.foreground = 0
        self.background = 0

    @property
    def total(self):
        return self.foreground + self.background


class RadianceField(nn.Module):
    """Foreground + background style-conditioned field with shared color
    branch.

    Style layer layout (indices consumed from a broadcast style):
      [0, n_sigma)                       foreground trunk (density)
      [n_sigma, n_sigma + n_bg)          background trunk (density)
      [boundary, boundary + n_c-n_sigma) shared mid blocks (color features)
    where boundary = n_sigma + n_bg is the 2D-aggregation point. The
    trailing mid blocks run per-sample on the color path and per-pixel
    after aggregation on the approximated path.
    """

    def __init__(self, cfg: FieldConfig, w_dim: int, *, activation: str = "lrelu"):
        super().__init__()
        self.cfg = cfg
        self.w_dim = w_dim
        in_fg = 3 * 2 * cfg.fourier_L
        in_bg = 4 * 2 * cfg.fourier_L
        mk = lambda i, o: ModulatedLinear(i, o, w_dim, activation=activation,
                                          eps=cfg.demod_eps)
        self.fg_blocks = nn.ModuleList(
            [mk(in_fg, cfg.hidden_fg)]
            + [mk(cfg.hidden_fg, cfg.hidden_fg) for _ in range(cfg.n_sigma - 1)])
        self.bg_blocks = nn.ModuleList(
            [mk(in_bg, cfg.hidden_bg)]
            + [mk(cfg.hidden_bg, cfg.hidden_bg) for _ in range(cfg.n_bg - 1)])
        self.mid_blocks = nn.ModuleList(
            mk(cfg.hidden_fg, cfg.hidden_fg) for _ in range(cfg.n_c - cfg.n_sigma))
        self.fg_sigma_head = nn.Linear(cfg.hidden_fg, 1)
        self.bg_sigma_head = nn.Linear(cfg.hidden_bg, 1)
        # start nearly transparent: density then grows where the data
        # demands content instead of being carved out of uniform fog
        nn.init.constant_(self.fg_sigma_head.bias, cfg.sigma_bias)
        nn.init.constant_(self.bg_sigma_head.bias, cfg.sigma_bias)
        self.bg_project = nn.Linear(cfg.hidden_bg, cfg.hidden_fg)
        color_in = cfg.hidden_fg + (3 * 2 * cfg.fourier_L if cfg.use_view_dirs else 0)
        head_act = nn.LeakyReLU(0.2) if activation == "lrelu" else nn.Identity()
        self.color_head = nn.Sequential(
            nn.Linear(color_in, cfg.hidden_fg), head_act,
            nn.Linear(cfg.hidden_fg, 3))
        self.counter = EvalCounter()

    # -- style layer bookkeeping -------------------------------------------
    @property
    def aggregation_index(self) -> int:
        return self.cfg.n_sigma + self.cfg.n_bg

    @property
    def num_style_layers(self) -> int:
        return self.aggregation_index + len(self.mid_blocks)

    def _rows(self, w: torch.Tensor, start: int, count: int):
        """Slice per-layer styles out of a broadcast (layers, w_dim) or
        (B, layers, w_dim) tensor; a flat vector is reused everywhere."""
        if w.ndim == 1:
            return [w] * count
        if w.ndim == 2:
            return [w[start + i] for i in range(count)]
        return [w[:, start + i] for i in range(count)]

    # -- evaluation ---------------------------------------------------------
    def eval_foreground(self, points: torch.Tensor, dirs: Optional[torch.Tensor],
                        w: torch.Tensor, *, want_color: bool = False) -> FieldSample:
        """Points inside the foreground sphere; (B, P, 3) or (P, 3)."""
        if bool((points.norm(dim=-1) > 1.0 + 1e-4).any()):
            raise ValueError("foreground evaluation outside the unit sphere")
        x = fourier_features(points, self.cfg.fourier_L)
        for block, wl in zip(self.fg_blocks,
                             self._rows(w, 0, self.cfg.n_sigma)):
            x = block(x, wl)
        self.counter.foreground += points.shape[-2] * (
            points.shape[0] if points.ndim == 3 else 1)
        sigma = F.softplus(self.fg_sigma_head(x)).squeeze(-1)
        color = None
        if want_color:
            color = self.color_branch(x, dirs, w)
        return FieldSample(sigma=sigma, features=x, color=color)

    def eval_background(self, points: torch.Tensor, w: torch.Tensor, *,
                        dirs: Optional[torch.Tensor] = None,
                        want_color: bool = False) -> FieldSample:
        """Points outside the unit sphere; parameterized on the inverted
        sphere. Features are projected to the foreground width so both
        fields composite into one aggregate."""
        x = fourier_features(invert_sphere(points), self.cfg.fourier_L)
        for block, wl in zip(self.bg_blocks,
                             self._rows(w, self.cfg.n_sigma, self.cfg.n_bg)):
            x = block(x, wl)
        self.counter.background += points.shape[-2] * (
            points.shape[0] if points.ndim == 3 else 1)
        sigma = F.softplus(self.bg_sigma_head(x)).squeeze(-1)
        feats = self.bg_project(x)
        color = None
        if want_color:
            color = self.color_branch(feats, dirs, w)
        return FieldSample(sigma=sigma, features=feats, color=color)

    def mid_features(self, features: torch.Tensor, w: torch.Tensor) -> torch.Tensor:
        """Shared blocks between the density level and the color level."""
        x = features
        for block, wl in zip(self.mid_blocks,
                             self._rows(w, self.aggregation_index,
                                        len(self.mid_blocks))):
            x = block(x, wl)
        return x

    def color_branch(self, density_features: torch.Tensor,
                     dirs: Optional[torch.Tensor], w: torch.Tensor) -> torch.Tensor:
        x = self.mid_features(density_features, w)
        if self.cfg.use_view_dirs:
            if dirs is None:
                raise ValueError("view directions required when use_view_dirs")
            x = torch.cat([x, fourier_features(dirs, self.cfg.fourier_L)], dim=-1)
        return self.color_head(x)
