"""Verification and analysis instruments: view-consistency metrics,
geometry extraction, pose prediction, inversion, and budget benchmarks."""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .camera import CameraPose, PoseDistribution, sample_pose
from .config import SamplingConfig
from .generator import Generator, density_grid
from .renderer import count_evaluations
from .styles import sample_latent


# ---------------------------------------------------------------------------
# consistency
# ---------------------------------------------------------------------------
@dataclass
class ConsistencyReport:
    pose_center: dict
    deltas: list
    mean_changes: list            # mean |dI| per delta
    depth_convexity: float        # center minus border expected depth
    eval_counts: dict
    millis_per_frame: float

    def to_json(self) -> str:
        return json.dumps(self.__dict__)


def depth_convexity(depth: torch.Tensor, alpha: torch.Tensor) -> float:
    """Positive when the object's center is nearer than its silhouette
    ring (a convex, camera-facing surface)."""
    h, w = depth.shape
    yy, xx = torch.meshgrid(torch.arange(h), torch.arange(w), indexing="ij")
    r = ((yy - (h - 1) / 2) ** 2 + (xx - (w - 1) / 2) ** 2).sqrt()
    occupied = alpha > 0.5
    if occupied.sum() < 8:
        return 0.0
    radii = r[occupied]
    inner = occupied & (r <= radii.float().quantile(0.3))
    outer = occupied & (r >= radii.float().quantile(0.7))
    if inner.sum() == 0 or outer.sum() == 0:
        return 0.0
    return float(depth[outer].mean() - depth[inner].mean())


def consistency_sweep(generator: Generator, w: torch.Tensor,
                      pose_center: CameraPose, deltas: list[float], *,
                      resolution: Optional[int] = None) -> ConsistencyReport:
    """Render the center pose and yaw-perturbed poses; report mean pixel
    change per perturbation. A view-consistent model changes
    monotonically with the perturbation size."""
    res = resolution or generator.cfg.target_resolution
    generator.field.counter.reset()
    t0 = time.perf_counter()
    with torch.no_grad():
        ref = generator.synthesize(w, pose_center, active_resolution=res)
    millis = (time.perf_counter() - t0) * 1000.0
    changes = []
    for d in deltas:
        pose = CameraPose(theta=pose_center.theta, phi=pose_center.phi + d,
                          radius=pose_center.radius, fov=pose_center.fov)
        with torch.no_grad():
            out = generator.synthesize(w, pose, active_resolution=res)
        changes.append(float((out.image - ref.image).abs().mean()))
    return ConsistencyReport(
        pose_center=pose_center.to_dict(), deltas=list(deltas),
        mean_changes=changes,
        depth_convexity=depth_convexity(ref.depth, ref.alpha),
        eval_counts={"foreground": generator.field.counter.foreground,
                     "background": generator.field.counter.background},
        millis_per_frame=millis)


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------
@dataclass
class Mesh:
    vertices: np.ndarray    # (V, 3)
    faces: np.ndarray       # (F, 3) int
    empty: bool = False


def iso_level(cfg: SamplingConfig, span: float = 2.0) -> float:
    """Density at which a single mean-spacing step reaches alpha 0.5."""
    spacing = span / max(cfg.n_coarse + cfg.n_importance, 1)
    return math.log(2.0) / spacing


def extract_geometry(sigma_grid: torch.Tensor, iso: float, *,
                     extent: float = 1.0) -> Mesh:
    """Marching-cubes surface of a density grid over [-extent, extent]^3."""
    from skimage import measure
    vol = sigma_grid.detach().cpu().numpy()
    n = vol.shape[0]
    if vol.max() <= iso or vol.min() >= iso:
        return Mesh(vertices=np.zeros((0, 3)), faces=np.zeros((0, 3), int),
                    empty=True)
    spacing = 2.0 * extent / (n - 1)
    verts, faces, _, _ = measure.marching_cubes(vol, level=iso,
                                                spacing=(spacing,) * 3)
    verts = verts - extent
    return Mesh(vertices=verts, faces=faces.astype(np.int64))


def extract_generator_geometry(generator: Generator, w: torch.Tensor,
                               grid_resolution: int) -> Mesh:
    if grid_resolution > 128:
        raise ValueError("grid_resolution capped at 128")
    grid = density_grid(generator.field, generator.broadcast(w),
                        grid_resolution)
    return extract_geometry(grid, iso_level(generator.sampling))


def save_mesh(mesh: Mesh, path: str) -> None:
    """Indexed-triangle text format: counts, then vertices, then faces."""
    with open(path, "w") as fh:
        fh.write(f"{len(mesh.vertices)} {len(mesh.faces)}\n")
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.6f} {v[1]:.6f} {v[2]:.6f}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0]} {f[1]} {f[2]}\n")


# ---------------------------------------------------------------------------
# camera predictor + inversion
# ---------------------------------------------------------------------------
class CameraPredictor(nn.Module):
    """Small from-scratch conv encoder predicting (pitch, yaw)."""

    def __init__(self, resolution: int, channels: int = 32, blocks: int = 5):
        super().__init__()
        layers = []
        c_in = 3
        c = channels
        r = resolution
        for _ in range(blocks):
            layers += [nn.Conv2d(c_in, c, 3, stride=2, padding=1),
                       nn.LeakyReLU(0.2)]
            c_in, c = c, min(2 * c, 128)
            r = (r + 1) // 2
        self.encoder = nn.Sequential(*layers)
        self.head = nn.Linear(c_in * r * r, 2)
        self.resolution = resolution
        # support bounds for canonicalizing outputs, set during training
        self.register_buffer("pitch_range", torch.tensor([-1.6, 1.6]))
        self.register_buffer("yaw_range", torch.tensor([-math.pi, math.pi]))

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        x = self.encoder(images)
        out = self.head(x.flatten(1))
        pr, yr = self.pitch_range, self.yaw_range
        pitch = pr[0] + (pr[1] - pr[0]) * torch.sigmoid(out[:, 0])
        yaw = yr[0] + (yr[1] - yr[0]) * torch.sigmoid(out[:, 1])
        return torch.stack([pitch, yaw], dim=-1)

    def predict_pose(self, image: torch.Tensor, template: CameraPose) -> CameraPose:
        with torch.no_grad():
            out = self(image.permute(2, 0, 1)[None].float())[0]
        return CameraPose(theta=float(out[0]), phi=float(out[1]),
                          radius=template.radius, fov=template.fov)


class PredictorDiverged(RuntimeError):
    pass


def _support_bounds(dist: PoseDistribution):
    if dist.kind == "uniform":
        return ((dist.pitch_low, dist.pitch_high),
                (dist.yaw_low, dist.yaw_high))
    return ((dist.pitch_mean - 4 * dist.pitch_std,
             dist.pitch_mean + 4 * dist.pitch_std),
            (dist.yaw_mean - 4 * dist.yaw_std,
             dist.yaw_mean + 4 * dist.yaw_std))


def train_camera_predictor(generator: Generator, dist: PoseDistribution,
                           steps: int, *, batch: int = 8, lr: float = 2e-4,
                           seed: int = 0,
                           resolution: Optional[int] = None):
    """Self-supervised pose regression on the generator's own renders.

    Returns (predictor, validation_error) where the error is the median
    angular error in radians over a held-out batch of renders.
    """
    res = resolution or generator.cfg.base_resolution
    rng = torch.Generator().manual_seed(seed)
    pred = CameraPredictor(res)
    (plo, phi_), (ylo, yhi) = _support_bounds(dist)
    pred.pitch_range.copy_(torch.tensor([plo, phi_]))
    pred.yaw_range.copy_(torch.tensor([ylo, yhi]))
    opt = torch.optim.Adam(pred.parameters(), lr=lr)

    def make_batch(n):
        imgs, targets = [], []
        for _ in range(n):
            w = generator.mapping(sample_latent(
                generator.style_cfg.z_dim, 1, generator=rng,
                dtype=next(generator.parameters()).dtype))[0]
            pose = sample_pose(dist, generator=rng)
            with torch.no_grad():
                out = generator.synthesize(w, pose, active_resolution=res)
            imgs.append(out.image.permute(2, 0, 1).float())
            targets.append([pose.theta, pose.phi])
        return torch.stack(imgs), torch.tensor(targets, dtype=torch.float32)

    first_loss = None
    for step in range(steps):
        imgs, targets = make_batch(batch)
        loss = F.smooth_l1_loss(pred(imgs), targets)
        if first_loss is None:
            first_loss = float(loss)
        if steps >= 10 and step == steps // 5 and float(loss) > 2.0 * first_loss:
            raise PredictorDiverged(
                f"pose predictor loss {float(loss):.4f} above initial "
                f"{first_loss:.4f} after {step} steps")
        opt.zero_grad()
        loss.backward()
        opt.step()

    imgs, targets = make_batch(max(batch, 16))
    with torch.no_grad():
        err = (pred(imgs) - targets).abs()
    val = float(err.norm(dim=-1).median())
    return pred, val


def invert(generator: Generator, target: torch.Tensor, pose: CameraPose, *,
           iters: int = 200, lr: float = 0.05,
           resolution: Optional[int] = None):
    """Recover a style vector reproducing the target image at a fixed
    (predictor-estimated) pose via gradient descent on pixel MSE.

    Returns (best_w, best_error, error_history); the best iterate is
    tracked so the reported error is nonincreasing in iters.
    """
    res = resolution or target.shape[0]
    dtype = next(generator.parameters()).dtype
    w = generator.mapping.w_mean.detach().clone().to(dtype).requires_grad_(True)
    opt = torch.optim.Adam([w], lr=lr)
    best_w = w.detach().clone()
    best_err = float("inf")
    history = []
    for _ in range(max(iters, 0)):
        out = generator.synthesize(w, pose, active_resolution=res)
        err = F.mse_loss(out.image, target.to(dtype))
        if float(err.detach()) < best_err:
            best_err = float(err.detach())
            best_w = w.detach().clone()
        history.append(best_err)
        opt.zero_grad()
        err.backward()
        opt.step()
    if iters == 0:
        with torch.no_grad():
            out = generator.synthesize(w.detach(), pose, active_resolution=res)
        best_err = float(F.mse_loss(out.image, target.to(dtype)))
        history.append(best_err)
    return best_w, best_err, history


# ---------------------------------------------------------------------------
# benchmarks
# ---------------------------------------------------------------------------
def bench(generator: Optional[Generator], resolutions: list[int],
          cfg: Optional[SamplingConfig] = None, *,
          base_resolution: int = 32, seeds: int = 1) -> dict:
    """Per-resolution wall-clock and evaluation-budget table."""
    cfg = cfg or (generator.sampling if generator is not None
                  else SamplingConfig())
    base = generator.cfg.base_resolution if generator is not None \
        else base_resolution
    rows = []
    for res in resolutions:
        budget = count_evaluations(res, cfg, base_resolution=base)
        row = {"resolution": res, "budget": budget}
        if generator is not None and res in generator.cfg.resolutions():
            w = generator.mapping(sample_latent(
                generator.style_cfg.z_dim, 1,
                generator=torch.Generator().manual_seed(0),
                dtype=next(generator.parameters()).dtype))[0]
            times = []
            for s in range(seeds):
                t0 = time.perf_counter()
                with torch.no_grad():
                    generator.synthesize(w, CameraPose(), active_resolution=res)
                times.append((time.perf_counter() - t0) * 1000.0)
            row["millis"] = sum(times) / len(times)
        rows.append(row)
    return {"base_resolution": base, "rows": rows}
