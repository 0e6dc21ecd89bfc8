"""2x feature upsamplers.

The hybrid operator adds a learnable per-pixel correction to a
channel-quadruplicated copy of the input, rearranges depth-to-space and
smooths with a fixed normalized blur kernel. The bilinear and
coordinate-conditioned variants exist for ablation.
"""
from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

BLUR_TAPS = (1.0, 3.0, 3.0, 1.0)


def blur_kernel(dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Fixed separable low-pass kernel, normalized to sum 1."""
    taps = torch.tensor(BLUR_TAPS, dtype=dtype)
    k = torch.outer(taps, taps)
    return k / k.sum()


def blur(x: torch.Tensor) -> torch.Tensor:
    """Depthwise blur with replicate padding, (B, C, H, W) -> same shape."""
    c = x.shape[1]
    k = blur_kernel(x.dtype).to(x.device)
    weight = k[None, None].expand(c, 1, -1, -1)
    # 4x4 kernel: pad 1 before, 2 after to keep spatial size
    xp = F.pad(x, (1, 2, 1, 2), mode="replicate")
    return F.conv2d(xp, weight, groups=c)


class HybridUpsampler(nn.Module):
    """Pixelshuffle(Repeat(X, 4) + psi(X), 2) followed by the fixed blur."""

    def __init__(self, channels: int):
        super().__init__()
        self.channels = channels
        self.psi = nn.Sequential(
            nn.Linear(channels, channels), nn.LeakyReLU(0.2),
            nn.Linear(channels, 4 * channels))
        # start as the pure fixed-filter upsampler; psi fades in with training
        nn.init.zeros_(self.psi[2].weight)
        nn.init.zeros_(self.psi[2].bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] != self.channels:
            raise ValueError(
                f"upsampler built for {self.channels} channels, got {x.shape[1]}")
        b, c, h, w = x.shape
        corr = self.psi(x.permute(0, 2, 3, 1))            # (B, H, W, 4C)
        corr = corr.reshape(b, h, w, c, 4).permute(0, 3, 4, 1, 2)
        corr = corr.reshape(b, 4 * c, h, w)
        base = x.repeat_interleave(4, dim=1)
        up = F.pixel_shuffle(base + corr, 2)
        return blur(up)


class BilinearUpsampler(nn.Module):
    """Fixed low-pass 2x interpolation (no learnable part)."""

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return F.interpolate(x, scale_factor=2, mode="bilinear",
                             align_corners=False)


class CoordinateUpsampler(nn.Module):
    """Depth-to-space of a per-pixel map conditioned on normalized pixel
    coordinates. Exhibits the coordinate-sticking pathology on purpose."""

    def __init__(self, channels: int):
        super().__init__()
        self.channels = channels
        self.net = nn.Sequential(
            nn.Linear(channels + 2, channels), nn.LeakyReLU(0.2),
            nn.Linear(channels, 4 * channels))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, c, h, w = x.shape
        ys = torch.linspace(-1.0, 1.0, h, dtype=x.dtype, device=x.device)
        xs = torch.linspace(-1.0, 1.0, w, dtype=x.dtype, device=x.device)
        gy, gx = torch.meshgrid(ys, xs, indexing="ij")
        coords = torch.stack([gy, gx], dim=-1)[None].expand(b, -1, -1, -1)
        inp = torch.cat([x.permute(0, 2, 3, 1), coords], dim=-1)
        out = self.net(inp).reshape(b, h, w, c, 4).permute(0, 3, 4, 1, 2)
        return F.pixel_shuffle(out.reshape(b, 4 * c, h, w), 2)


def make_upsampler(kind: str, channels: int) -> nn.Module:
    if kind == "hybrid":
        return HybridUpsampler(channels)
    if kind == "bilinear":
        return BilinearUpsampler()
    if kind == "coordinate":
        return CoordinateUpsampler(channels)
    raise ValueError(f"unknown upsampler kind {kind!r}")
