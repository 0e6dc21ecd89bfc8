"""Convolutional discriminator with progressive growth, and the loss
terms: non-saturating GAN loss, R1 penalty, render-path consistency."""
from __future__ import annotations

from typing import Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from .config import GeneratorConfig


def stable_f(u: torch.Tensor) -> torch.Tensor:
    """f(u) = -log(1 + exp(-u)), computed without overflow."""
    return -F.softplus(-u)


class DiscriminatorBlock(nn.Module):
    def __init__(self, c_in: int, c_out: int):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_in, 3, padding=1)
        self.conv2 = nn.Conv2d(c_in, c_out, 3, padding=1)

    def forward(self, x):
        x = F.leaky_relu(self.conv1(x), 0.2)
        x = F.leaky_relu(self.conv2(x), 0.2)
        return F.avg_pool2d(x, 2)


class Discriminator(nn.Module):
    """Image -> scalar logit. The trunk downsamples from the active
    resolution to 4x4; resolutions above the active one stay dormant, and
    the fade-in entry blends with a downsampled lower-resolution path."""

    MIN_RES = 4

    def __init__(self, gen_cfg: GeneratorConfig):
        super().__init__()
        self.cfg = gen_cfg
        res = []
        r = gen_cfg.target_resolution
        while r >= self.MIN_RES:
            res.append(r)
            r //= 2
        self.resolutions = res                      # descending, target..4
        ch = {r: gen_cfg.channels(r) for r in res}
        self.from_rgb = nn.ModuleDict(
            {str(r): nn.Conv2d(3, ch[r], 1) for r in res})
        self.blocks = nn.ModuleDict(
            {str(r): DiscriminatorBlock(ch[r], ch[r // 2])
             for r in res if r > self.MIN_RES})
        c4 = ch[self.MIN_RES]
        self.final_conv = nn.Conv2d(c4, c4, 3, padding=1)
        self.final_fc = nn.Sequential(
            nn.Linear(c4 * self.MIN_RES ** 2, c4), nn.LeakyReLU(0.2),
            nn.Linear(c4, 1))

    def forward(self, image: torch.Tensor, *, active_resolution: Optional[int] = None,
                fade_alpha: float = 1.0) -> torch.Tensor:
        """image: (B, 3, H, W) at the active resolution."""
        res = active_resolution or self.cfg.target_resolution
        if image.shape[-1] != res or image.shape[-2] != res:
            raise ValueError(f"expected {res}x{res} input, got "
                             f"{image.shape[-2]}x{image.shape[-1]}")
        if res not in self.resolutions:
            raise ValueError(f"resolution {res} outside discriminator chain")
        x = F.leaky_relu(self.from_rgb[str(res)](image), 0.2)
        r = res
        first = True
        while r > self.MIN_RES:
            x = self.blocks[str(r)](x)
            if first and fade_alpha < 1.0:
                low = F.avg_pool2d(image, 2)
                xl = F.leaky_relu(self.from_rgb[str(r // 2)](low), 0.2)
                x = fade_alpha * x + (1.0 - fade_alpha) * xl
            first = False
            r //= 2
        x = F.leaky_relu(self.final_conv(x), 0.2)
        return self.final_fc(x.flatten(1)).squeeze(-1)


def gan_losses(scores_fake: torch.Tensor,
               scores_real: Optional[torch.Tensor] = None):
    """Non-saturating losses.

    The generator maximizes E[f(D(fake))], implemented as minimizing
    softplus(-D(fake)); the discriminator minimizes
    softplus(-D(real)) + softplus(D(fake)). The R1 term is added
    separately by the caller.
    """
    g_loss = F.softplus(-scores_fake).mean()
    d_loss = None
    if scores_real is not None:
        # for the D step the caller passes scores of detached fake images
        d_loss = (F.softplus(-scores_real).mean()
                  + F.softplus(scores_fake).mean())
    return g_loss, d_loss


def r1_penalty(discriminator: Discriminator, real_images: torch.Tensor, *,
               weight: float, active_resolution: Optional[int] = None,
               fade_alpha: float = 1.0, interval: int = 1) -> torch.Tensor:
    """weight * mean over the batch of ||d D / d image||^2.

    When applied lazily every ``interval`` steps the weight is scaled by
    the interval so the time-averaged regularization is unchanged.
    """
    imgs = real_images.detach().requires_grad_(True)
    scores = discriminator(imgs, active_resolution=active_resolution,
                           fade_alpha=fade_alpha)
    grads = torch.autograd.grad(scores.sum(), imgs, create_graph=True)[0]
    penalty = grads.flatten(1).square().sum(dim=1).mean()
    return weight * interval * penalty


def nerf_path_loss(approx_image: torch.Tensor, nerf_image: torch.Tensor,
                   index_map: torch.Tensor,
                   pixel_set: torch.Tensor) -> torch.Tensor:
    """Mean squared difference over sampled low-res pixels between the
    upsampled output (at the aligned high-res sites) and the
    low-resolution full render. Channel differences are averaged.

    approx_image: (H, W, 3); nerf_image: (h, w, 3);
    index_map: (h, w, 2) aligned high-res indices;
    pixel_set: (K, 2) low-res pixel coordinates.
    """
    if pixel_set.numel() == 0:
        raise ValueError("empty pixel set")
    li, lj = pixel_set[:, 0], pixel_set[:, 1]
    hi = index_map[li, lj, 0]
    hj = index_map[li, lj, 1]
    diff = approx_image[hi, hj] - nerf_image[li, lj]
    return diff.square().mean()


def sample_pixel_set(resolution: int, count: int,
                     generator: Optional[torch.Generator] = None) -> torch.Tensor:
    """Uniformly resampled low-res pixel coordinates, (count, 2)."""
    flat = torch.randint(0, resolution * resolution, (count,),
                         generator=generator)
    return torch.stack([flat // resolution, flat % resolution], dim=-1)
