"""Camera poses on a sphere, pose distributions, and ray generation."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import torch

from .config import CameraConfig

_TAU = 2.0 * math.pi


def canonicalize_angle(angle: float) -> float:
    """Wrap an angle into (-pi, pi]; multiples of 2*pi collapse together."""
    r = math.remainder(float(angle), _TAU)
    # remainder returns [-pi, pi]; fold -pi onto pi for a unique representative
    if r == -math.pi:
        r = math.pi
    return r


def _snap(v: float, tol: float = 1e-15) -> float:
    """Collapse trig round-off at axis-aligned angles to exact values."""
    for target in (0.0, 1.0, -1.0):
        if abs(v - target) < tol:
            return target
    return v


@dataclass(frozen=True)
class CameraPose:
    """Pitch/yaw on a sphere of given radius, looking at the origin."""
    theta: float = 0.0       # pitch, radians
    phi: float = 0.0         # yaw, radians
    radius: float = 1.0
    fov: float = 12.0        # degrees

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("camera radius must be positive")
        if not 0.0 < self.fov < 180.0:
            raise ValueError("fov must lie in (0, 180) degrees")

    def canonical(self) -> "CameraPose":
        return replace(self,
                       theta=canonicalize_angle(self.theta),
                       phi=canonicalize_angle(self.phi))

    def position(self, dtype: torch.dtype = torch.float32) -> torch.Tensor:
        p = self.canonical()
        ct, st = _snap(math.cos(p.theta)), _snap(math.sin(p.theta))
        cp, sp = _snap(math.cos(p.phi)), _snap(math.sin(p.phi))
        return torch.tensor(
            [self.radius * ct * sp, self.radius * st, self.radius * ct * cp],
            dtype=dtype)

    def to_dict(self) -> dict:
        return {"theta": self.theta, "phi": self.phi,
                "radius": self.radius, "fov": self.fov}

    @classmethod
    def from_dict(cls, d: dict) -> "CameraPose":
        return cls(**d)


@dataclass(frozen=True)
class PoseDistribution:
    kind: str = "gaussian"     # gaussian | uniform
    pitch_mean: float = 0.0
    pitch_std: float = 0.15
    yaw_mean: float = 0.0
    yaw_std: float = 0.3
    pitch_low: float = -0.3
    pitch_high: float = 0.3
    yaw_low: float = 0.0
    yaw_high: float = _TAU
    radius: float = 1.0
    fov: float = 12.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "uniform"):
            raise ValueError(f"unknown pose distribution kind {self.kind!r}")
        if self.kind == "gaussian" and (self.pitch_std < 0 or self.yaw_std < 0):
            raise ValueError("gaussian stds must be nonnegative")
        if self.kind == "uniform" and (self.pitch_low > self.pitch_high
                                       or self.yaw_low > self.yaw_high):
            raise ValueError("uniform bounds must satisfy low <= high")

    @classmethod
    def from_config(cls, cfg: CameraConfig) -> "PoseDistribution":
        return cls(kind=cfg.pose_kind,
                   pitch_mean=cfg.pitch_mean, pitch_std=cfg.pitch_std,
                   yaw_mean=cfg.yaw_mean, yaw_std=cfg.yaw_std,
                   pitch_low=cfg.pitch_low, pitch_high=cfg.pitch_high,
                   yaw_low=cfg.yaw_low, yaw_high=cfg.yaw_high,
                   radius=cfg.radius, fov=cfg.fov)


def sample_pose(dist: PoseDistribution,
                generator: Optional[torch.Generator] = None) -> CameraPose:
    u = torch.rand(2, generator=generator, dtype=torch.float64)
    n = torch.randn(2, generator=generator, dtype=torch.float64)
    if dist.kind == "gaussian":
        theta = dist.pitch_mean + dist.pitch_std * n[0].item()
        phi = dist.yaw_mean + dist.yaw_std * n[1].item()
    else:
        theta = dist.pitch_low + (dist.pitch_high - dist.pitch_low) * u[0].item()
        phi = dist.yaw_low + (dist.yaw_high - dist.yaw_low) * u[1].item()
    return CameraPose(theta=theta, phi=phi, radius=dist.radius, fov=dist.fov)


@dataclass
class RayBundle:
    """Per-pixel rays: origins/directions are (H, W, 3)."""
    origins: torch.Tensor
    directions: torch.Tensor     # unit vectors
    near: torch.Tensor           # (H, W)
    far: torch.Tensor            # (H, W)
    foreground_mask: torch.Tensor  # (H, W) bool, False = background-only ray

    @property
    def resolution(self) -> int:
        return self.origins.shape[0]

    def flat(self):
        n = self.origins.shape[0] * self.origins.shape[1]
        return (self.origins.reshape(n, 3), self.directions.reshape(n, 3),
                self.near.reshape(n), self.far.reshape(n),
                self.foreground_mask.reshape(n))


def _camera_frame(pose: CameraPose, dtype: torch.dtype):
    origin = pose.position(dtype=dtype)
    forward = -origin / origin.norm()
    up = torch.tensor([0.0, 1.0, 0.0], dtype=dtype)
    right = torch.linalg.cross(forward, up)
    rn = right.norm()
    if rn < 1e-8:   # looking straight along the up axis
        right = torch.tensor([1.0, 0.0, 0.0], dtype=dtype)
        rn = right.norm()
    right = right / rn
    true_up = torch.linalg.cross(right, forward)
    return origin, forward, right, true_up


def _pixel_coords(resolution: int, dtype: torch.dtype) -> torch.Tensor:
    """Pixel-center coordinates over the normalized image plane [-1, 1]."""
    idx = torch.arange(resolution, dtype=dtype)
    return (2.0 * idx + 1.0 - resolution) / resolution


def _rays_from_plane_coords(pose: CameraPose, us: torch.Tensor, vs: torch.Tensor,
                            bounding_radius: float, near_eps: float) -> RayBundle:
    """Rays through the given continuous image-plane coordinate grids.

    ``us`` indexes columns (x on the plane), ``vs`` rows; both 1D.
    """
    dtype = us.dtype
    origin, forward, right, true_up = _camera_frame(pose, dtype)
    half_extent = math.tan(math.radians(pose.fov) / 2.0)
    uu, vv = torch.meshgrid(vs, us, indexing="ij")   # rows, cols
    # image v grows downward; plane y = -v so row 0 is the top of the image
    dirs = (forward[None, None]
            + half_extent * uu[..., None] * (-true_up)[None, None]
            + half_extent * vv[..., None] * right[None, None])
    dirs = dirs / dirs.norm(dim=-1, keepdim=True)
    h, w = dirs.shape[:2]
    origins = origin[None, None].expand(h, w, 3).clone()

    # ray-sphere intersection with the foreground bounding sphere
    b = bounding_radius
    od = (origins * dirs).sum(dim=-1)
    oo = (origins * origins).sum(dim=-1)
    disc = od.square() - (oo - b * b)
    hit = disc >= 0
    sq = torch.sqrt(disc.clamp_min(0))
    t0 = -od - sq
    t1 = -od + sq
    near = torch.clamp(t0, min=near_eps)
    far = t1
    valid = hit & (far > near)
    near = torch.where(valid, near, torch.zeros_like(near))
    far = torch.where(valid, far, torch.zeros_like(far))
    return RayBundle(origins=origins, directions=dirs, near=near, far=far,
                     foreground_mask=valid)


def generate_rays(pose: CameraPose, resolution: int, *,
                  bounding_radius: float = 1.0, near_eps: float = 1e-3,
                  dtype: torch.dtype = torch.float32) -> RayBundle:
    """Pixel-center ray bundle for a square image at the given resolution."""
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    coords = _pixel_coords(resolution, dtype)
    return _rays_from_plane_coords(pose, coords, coords, bounding_radius, near_eps)


def corresponding_rays(pose: CameraPose, low_res: int, high_res: int, *,
                       bounding_radius: float = 1.0, near_eps: float = 1e-3,
                       dtype: torch.dtype = torch.float32):
    """Low-res rays aligned with a subset of high-res pixels.

    Returns (low_bundle, high_bundle, index_map) where index_map is an
    (low_res, low_res, 2) long tensor of aligned high-res pixel indices.
    The low bundle is generated at exactly the continuous image-plane
    coordinates of those high-res pixels, so corresponding directions
    agree to floating-point reproduction.
    """
    if high_res < low_res or high_res % low_res != 0:
        raise ValueError("high_res must be a multiple of low_res")
    factor = high_res // low_res
    if factor & (factor - 1):
        raise ValueError("resolution ratio must be a power of two")
    high_coords = _pixel_coords(high_res, dtype)
    # low pixel i aligns with high pixel i*factor + (factor-1)//2
    offset = (factor - 1) // 2
    sel = torch.arange(low_res) * factor + offset
    low = _rays_from_plane_coords(pose, high_coords[sel], high_coords[sel],
                                  bounding_radius, near_eps)
    high = _rays_from_plane_coords(pose, high_coords, high_coords,
                                   bounding_radius, near_eps)
    ii, jj = torch.meshgrid(sel, sel, indexing="ij")
    index_map = torch.stack([ii, jj], dim=-1)
    return low, high, index_map
