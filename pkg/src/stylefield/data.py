"""Training data ingestion: a procedural lambertian-sphere set whose
geometry is learnable at desk scale, and a generic image folder source.
Images are square, pixel range [-1, 1]."""
from __future__ import annotations

import math
import os
from typing import Iterator, Optional

import numpy as np
import torch
import torch.nn.functional as F

from .camera import CameraPose, PoseDistribution, generate_rays, sample_pose
from .config import DatasetConfig

_LIGHT = (0.35, 0.65, 0.55)


def render_sphere_image(resolution: int, color: torch.Tensor, radius: float,
                        pose: CameraPose) -> torch.Tensor:
    """Analytic lambertian shading of a centered sphere, (H, W, 3) in [-1, 1]."""
    bundle = generate_rays(pose, resolution, bounding_radius=1.0)
    o, d = bundle.origins, bundle.directions
    od = (o * d).sum(-1)
    oo = (o * o).sum(-1)
    disc = od.square() - (oo - radius * radius)
    hit = disc >= 0
    t = (-od - torch.sqrt(disc.clamp_min(0)))
    p = o + t[..., None] * d
    n = p / (p.norm(dim=-1, keepdim=True) + 1e-9)
    light = torch.tensor(_LIGHT)
    light = light / light.norm()
    lam = (n * light).sum(-1).clamp_min(0)
    shade = 0.25 + 0.75 * lam
    fg = color[None, None] * shade[..., None]
    bg = torch.full_like(fg, 0.82)
    img = torch.where(hit[..., None], fg, bg)
    return img * 2.0 - 1.0


def synthetic_spheres(cfg: DatasetConfig,
                      pose_dist: PoseDistribution) -> torch.Tensor:
    """The full procedural dataset as a (size, H, W, 3) tensor.

    Per-image color, radius and pose are drawn from a generator seeded
    by cfg.seed, so the set is a pure function of the config.
    """
    g = torch.Generator().manual_seed(cfg.seed)
    images = []
    for _ in range(cfg.size):
        color = 0.25 + 0.75 * torch.rand(3, generator=g)
        # small enough to leave visible background within the camera frustum
        radius = 0.12 + 0.1 * torch.rand(1, generator=g).item()
        pose = sample_pose(pose_dist, generator=g)
        images.append(render_sphere_image(cfg.resolution, color, radius, pose))
    return torch.stack(images)


def load_image_folder(cfg: DatasetConfig) -> torch.Tensor:
    from PIL import Image
    files = sorted(os.listdir(cfg.path))
    images, skipped = [], 0
    for name in files:
        path = os.path.join(cfg.path, name)
        try:
            with Image.open(path) as im:
                im = im.convert("RGB")
                if cfg.center_crop:
                    side = min(im.size)
                    left = (im.width - side) // 2
                    top = (im.height - side) // 2
                    im = im.crop((left, top, left + side, top + side))
                im = im.resize((cfg.resolution, cfg.resolution), Image.LANCZOS)
                arr = np.asarray(im, dtype=np.float32) / 127.5 - 1.0
                images.append(torch.from_numpy(arr))
        except Exception:
            skipped += 1
    if not images:
        raise RuntimeError(f"no readable images in {cfg.path!r} "
                           f"({skipped} unreadable)")
    if skipped:
        print(f"[data] skipped {skipped} unreadable files in {cfg.path}")
    return torch.stack(images)


def load_dataset(cfg: DatasetConfig, pose_dist: PoseDistribution) -> torch.Tensor:
    if cfg.source == "synthetic_spheres":
        return synthetic_spheres(cfg, pose_dist)
    if cfg.source == "image_folder":
        return load_image_folder(cfg)
    raise ValueError(f"unknown dataset source {cfg.source!r}")


def resize_batch(batch: torch.Tensor, resolution: int) -> torch.Tensor:
    """(B, H, W, 3) -> (B, 3, res, res)."""
    x = batch.permute(0, 3, 1, 2)
    if x.shape[-1] != resolution:
        x = F.interpolate(x, size=(resolution, resolution), mode="area")
    return x


def ingest(dataset: torch.Tensor, batch_size: int,
           generator: torch.Generator) -> Iterator[torch.Tensor]:
    """Endless batch stream, deterministic under the generator.

    Each batch draws indices independently so a resumed run continues
    the stream bit-exactly from a restored generator state.
    """
    n = dataset.shape[0]
    while True:
        idx = torch.randint(0, n, (batch_size,), generator=generator)
        yield dataset[idx]
