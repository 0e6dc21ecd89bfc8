"""Discretized volume rendering with stratified + importance sampling.

Alpha compositing: alpha_i = 1 - exp(-sigma_i * delta_i),
T_i = prod_{j<i}(1 - alpha_j), weight_i = T_i * alpha_i. Foreground and
background are composited in sequence with continued transmittance.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import torch

from .camera import RayBundle
from .config import SamplingConfig
from .field import RadianceField

_LAST_BG_DELTA = 1e10


@dataclass
class RenderOutput:
    weights: torch.Tensor             # (R, S) per-sample compositing weights
    value: torch.Tensor               # (R, C) composited payload
    accumulated_alpha: torch.Tensor   # (R,)
    transmittance: torch.Tensor       # (R,) remaining after the last sample
    depth: Optional[torch.Tensor] = None   # (R,) expected termination distance


def stratified_samples(near: torch.Tensor, far: torch.Tensor, n: int,
                       generator: Optional[torch.Generator] = None,
                       stratified: bool = True) -> torch.Tensor:
    """N increasing t-values per ray; one per equal bin (jittered or midpoint)."""
    if bool((near >= far).any()):
        raise ValueError("stratified sampling requires near < far")
    shape = near.shape + (n,)
    edges = torch.linspace(0.0, 1.0, n + 1, dtype=near.dtype)
    lo, hi = edges[:-1], edges[1:]
    if stratified:
        u = torch.rand(shape, generator=generator, dtype=near.dtype)
    else:
        u = torch.full(shape, 0.5, dtype=near.dtype)
    frac = lo + (hi - lo) * u
    return near[..., None] + (far - near)[..., None] * frac


def importance_samples(t_coarse: torch.Tensor, weights: torch.Tensor, m: int,
                       generator: Optional[torch.Generator] = None,
                       stratified: bool = True):
    """Inverse-CDF draws from the piecewise-constant coarse weight
    distribution. Returns (samples, fallback_mask); rays whose weights
    are all ~zero fall back to uniform over the coarse span.
    """
    if bool((weights < 0).any()):
        raise ValueError("importance sampling requires nonnegative weights")
    weights = weights.detach()
    t = t_coarse.detach()
    edges = torch.cat([t[..., :1],
                       0.5 * (t[..., 1:] + t[..., :-1]),
                       t[..., -1:]], dim=-1)               # (R, N+1)
    total = weights.sum(dim=-1, keepdim=True)
    fallback = (total < 1e-12).squeeze(-1)
    safe = torch.where(fallback[..., None], torch.ones_like(weights), weights)
    pdf = safe / safe.sum(dim=-1, keepdim=True)
    cdf = torch.cat([torch.zeros_like(pdf[..., :1]),
                     torch.cumsum(pdf, dim=-1)], dim=-1)
    if stratified:
        u = torch.rand(t.shape[:-1] + (m,), generator=generator, dtype=t.dtype)
    else:   # deterministic mid-quantiles for inference
        u = ((torch.arange(m, dtype=t.dtype) + 0.5) / m).expand(
            t.shape[:-1] + (m,))
    u = u.clamp(1e-7, 1.0 - 1e-7)
    idx = torch.searchsorted(cdf, u, right=True).clamp(1, cdf.shape[-1] - 1)
    c0 = torch.gather(cdf, -1, idx - 1)
    c1 = torch.gather(cdf, -1, idx)
    e0 = torch.gather(edges, -1, idx - 1)
    e1 = torch.gather(edges, -1, idx)
    denom = torch.where(c1 - c0 < 1e-12, torch.ones_like(c0), c1 - c0)
    samples = e0 + (u - c0) / denom * (e1 - e0)
    return samples, fallback


def composite(t_values: torch.Tensor, sigmas: torch.Tensor,
              values: torch.Tensor, *,
              far: Optional[torch.Tensor] = None,
              last_delta: Optional[float] = None,
              initial_transmittance: Optional[torch.Tensor] = None) -> RenderOutput:
    """Alpha-composite per-sample payloads along each ray.

    The final sample's extent is (far - t_last) when ``far`` is given,
    else ``last_delta`` (default: a large cap).
    """
    if bool((t_values[..., 1:] <= t_values[..., :-1]).any()):
        raise ValueError("t-values must be sorted strictly increasing")
    deltas = t_values[..., 1:] - t_values[..., :-1]
    if far is not None:
        last = (far[..., None] - t_values[..., -1:]).clamp_min(0)
    else:
        last = torch.full_like(t_values[..., -1:],
                               _LAST_BG_DELTA if last_delta is None else last_delta)
    deltas = torch.cat([deltas, last], dim=-1)
    alphas = 1.0 - torch.exp(-sigmas * deltas)
    trans = torch.cumprod(1.0 - alphas + 1e-12, dim=-1)
    trans = torch.cat([torch.ones_like(trans[..., :1]), trans[..., :-1]], dim=-1)
    weights = trans * alphas
    if initial_transmittance is not None:
        weights = weights * initial_transmittance[..., None]
    out = (weights[..., None] * values).sum(dim=-2)
    acc = weights.sum(dim=-1)
    remaining = (initial_transmittance if initial_transmittance is not None
                 else torch.ones_like(acc)) - acc
    return RenderOutput(weights=weights, value=out, accumulated_alpha=acc,
                        transmittance=remaining.clamp_min(0))


def _background_ts(bundle_flat, g: int, background_start: float,
                   stratified: bool, generator, dtype) -> torch.Tensor:
    """Ray parameters of background samples, uniform in inverse radius
    over [1/R, 0) exclusive of zero."""
    origins, dirs, _, _, _ = bundle_flat
    s_hi = 1.0 / background_start
    edges = torch.linspace(0.0, 1.0, g + 1, dtype=dtype)
    lo, hi = edges[:-1], edges[1:]
    if stratified:
        u = torch.rand((origins.shape[0], g), generator=generator, dtype=dtype)
    else:
        u = torch.full((origins.shape[0], g), 0.5, dtype=dtype)
    frac = lo + (hi - lo) * u
    s = s_hi * (1.0 - frac * (1.0 - 1.0 / (g + 1.0)))   # decreasing toward 0
    radius = 1.0 / s                                    # (R, G) increasing
    od = (origins * dirs).sum(dim=-1, keepdim=True)
    oo = (origins * origins).sum(dim=-1, keepdim=True)
    return -od + torch.sqrt((od.square() - oo + radius.square()).clamp_min(0))


def render_rays(field: RadianceField, bundle: RayBundle, w: torch.Tensor,
                cfg: SamplingConfig, *, background_start: float = 2.0,
                generator: Optional[torch.Generator] = None,
                want_color: bool = False) -> dict:
    """Composite field features (and optionally colors) along every ray.

    Returns per-ray tensors shaped (H, W, ...). Exactly n_coarse +
    n_importance foreground and n_background background evaluations are
    spent per ray: the coarse pass is reused in the merged composite.
    """
    h, wid = bundle.resolution, bundle.origins.shape[1]
    origins, dirs, near, far, mask = bundle.flat()
    dtype = origins.dtype
    n, m, g = cfg.n_coarse, cfg.n_importance, cfg.n_background

    safe_far = torch.where(mask, far, near + 1.0)
    t_fg = stratified_samples(near, safe_far, n, generator, cfg.stratified)
    pts = origins[:, None] + t_fg[..., None] * dirs[:, None]
    pts = _clip_to_sphere(pts)
    sample = field.eval_foreground(pts, _expand_dirs(dirs, n), w,
                                   want_color=want_color)
    sigma = sample.sigma * mask[:, None]
    feats = sample.features
    colors = sample.color

    if m > 0:
        coarse = composite(t_fg, sigma, feats.detach(), far=safe_far)
        t_fine, _ = importance_samples(t_fg, coarse.weights, m, generator,
                                       stratified=cfg.stratified)
        pts_f = origins[:, None] + t_fine[..., None] * dirs[:, None]
        pts_f = _clip_to_sphere(pts_f)
        fine = field.eval_foreground(pts_f, _expand_dirs(dirs, m), w,
                                     want_color=want_color)
        t_all = torch.cat([t_fg, t_fine], dim=-1)
        order = torch.argsort(t_all, dim=-1)
        t_all = torch.gather(t_all, -1, order)
        t_all = _dedupe_ts(t_all)
        sigma = torch.gather(
            torch.cat([sigma, fine.sigma * mask[:, None]], dim=-1), -1, order)
        feats = torch.gather(
            torch.cat([feats, fine.features], dim=-2), -2,
            order[..., None].expand(-1, -1, feats.shape[-1]))
        if want_color:
            colors = torch.gather(
                torch.cat([colors, fine.color], dim=-2), -2,
                order[..., None].expand(-1, -1, 3))
    else:
        t_all = t_fg

    fg = composite(t_all, sigma, feats, far=safe_far)
    fg_color = None
    if want_color:
        fg_color = composite(t_all, sigma, colors, far=safe_far)

    depth_t = composite(t_all, sigma, t_all[..., None], far=safe_far)
    depth = depth_t.value.squeeze(-1) + fg.transmittance * safe_far

    if g > 0:
        t_bg = _background_ts((origins, dirs, near, far, mask), g,
                              background_start, cfg.stratified, generator, dtype)
        pts_bg = origins[:, None] + t_bg[..., None] * dirs[:, None]
        bg_sample = field.eval_background(pts_bg, w, dirs=_expand_dirs(dirs, g),
                                          want_color=want_color)
        bg = composite(t_bg, bg_sample.sigma, bg_sample.features,
                       initial_transmittance=fg.transmittance)
        features = fg.value + bg.value
        alpha = fg.accumulated_alpha + bg.accumulated_alpha
        color = None
        if want_color:
            bg_c = composite(t_bg, bg_sample.sigma, bg_sample.color,
                             initial_transmittance=fg.transmittance)
            color = fg_color.value + bg_c.value
    else:
        features, alpha = fg.value, fg.accumulated_alpha
        color = fg_color.value if want_color else None

    out = {
        "features": features.reshape(h, wid, -1),
        "weights": fg.weights.reshape(h, wid, -1),
        "alpha": alpha.reshape(h, wid),
        "fg_alpha": fg.accumulated_alpha.reshape(h, wid),
        "depth": depth.reshape(h, wid),
    }
    if want_color:
        out["rgb"] = color.reshape(h, wid, 3)
    return out


def _expand_dirs(dirs: torch.Tensor, count: int) -> torch.Tensor:
    return dirs[:, None].expand(-1, count, -1)


def _clip_to_sphere(pts: torch.Tensor, radius: float = 1.0) -> torch.Tensor:
    """Numerical guard: pull sample points that drift marginally outside
    the foreground sphere back onto it."""
    r = pts.norm(dim=-1, keepdim=True)
    scale = torch.where(r > radius, radius / r, torch.ones_like(r))
    return pts * scale


def _dedupe_ts(t_sorted: torch.Tensor, eps: Optional[float] = None) -> torch.Tensor:
    """Nudge exactly coincident t-values apart to keep strict ordering.

    The nudge must survive addition at the magnitude of the t-values, so
    it is scaled to the dtype's machine epsilon."""
    if eps is None:
        eps = max(1e-9, 8.0 * float(torch.finfo(t_sorted.dtype).eps))
    diffs = t_sorted[..., 1:] - t_sorted[..., :-1]
    bump = torch.cumsum((diffs <= 0).to(t_sorted.dtype) * eps, dim=-1)
    return torch.cat([t_sorted[..., :1], t_sorted[..., 1:] + bump], dim=-1)


def aggregate_features(field: RadianceField, bundle: RayBundle,
                       w: torch.Tensor, cfg: SamplingConfig, *,
                       background_start: float = 2.0,
                       generator: Optional[torch.Generator] = None) -> dict:
    """Per-pixel composited density-level features A(r) over a
    low-resolution bundle, plus depth and alpha diagnostics."""
    return render_rays(field, bundle, w, cfg,
                       background_start=background_start,
                       generator=generator, want_color=False)


def render_nerf_rgb(field: RadianceField, bundle: RayBundle,
                    w: torch.Tensor, cfg: SamplingConfig, *,
                    background_start: float = 2.0,
                    generator: Optional[torch.Generator] = None) -> dict:
    """Low-resolution RGB along the unapproximated per-sample color path.

    ``rgb`` is the raw pre-activation image; ``rgb_display`` the
    tanh-squashed form for viewing.
    """
    out = render_rays(field, bundle, w, cfg,
                      background_start=background_start,
                      generator=generator, want_color=True)
    out["rgb_display"] = torch.tanh(out["rgb"])
    return out


def count_evaluations(resolution_out: int, cfg: SamplingConfig,
                      base_resolution: int = 32) -> dict:
    """Field-evaluation budget for the approximated path versus running
    the full per-pixel render at the output resolution."""
    per_ray_fg = cfg.n_coarse + cfg.n_importance
    approx = {
        "foreground": base_resolution ** 2 * per_ray_fg,
        "background": base_resolution ** 2 * cfg.n_background,
    }
    full = {
        "foreground": resolution_out ** 2 * per_ray_fg,
        "background": resolution_out ** 2 * cfg.n_background,
    }
    approx_total = approx["foreground"] + approx["background"]
    full_total = full["foreground"] + full["background"]
    return {
        "output_resolution": resolution_out,
        "base_resolution": base_resolution,
        "approx_path": {**approx, "total": approx_total},
        "full_path": {**full, "total": full_total},
        "ratio": full_total / approx_total,
    }
