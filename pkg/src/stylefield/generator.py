"""Full synthesis network: low-resolution feature aggregation, style
blocks interleaved with 2x upsamplers, RGB projection, progressive
variants and the inference-time geometry-attached noise option."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dc_field
from typing import Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from .camera import CameraPose, generate_rays
from .config import FieldConfig, GeneratorConfig, SamplingConfig, StyleConfig
from .field import ModulatedLinear, RadianceField
from .renderer import aggregate_features, render_nerf_rgb
from .styles import MappingNetwork, broadcast as broadcast_styles
from .upsampler import make_upsampler


@dataclass
class MixingSpec:
    """Two broadcast styles split at a crossover layer index."""
    style_a: torch.Tensor
    style_b: torch.Tensor
    crossover_layer: int


@dataclass
class GeneratorOutput:
    image: torch.Tensor                       # (H, W, 3) raw
    depth: torch.Tensor                       # (base, base)
    alpha: torch.Tensor                       # (base, base)
    low_res_rgb: Optional[torch.Tensor] = None   # full-path render, training
    aux: dict = dc_field(default_factory=dict)   # per-stage feature grids


@dataclass
class LayerPlan:
    resolution: int
    active_stages: int
    fade_alpha: float
    stage_resolutions: list
    stage_channels: list


class Generator(nn.Module):
    """Mapping network + radiance field + 2D synthesis stack."""

    def __init__(self, style_cfg: StyleConfig, field_cfg: FieldConfig,
                 gen_cfg: GeneratorConfig, sampling_cfg: SamplingConfig, *,
                 upsampler_kind: str = "hybrid", activation: str = "lrelu"):
        super().__init__()
        self.style_cfg = style_cfg
        self.field_cfg = field_cfg
        self.cfg = gen_cfg
        self.sampling = sampling_cfg
        self.upsampler_kind = upsampler_kind
        self.mapping = MappingNetwork(style_cfg)
        self.field = RadianceField(field_cfg, style_cfg.w_dim,
                                   activation=activation)

        w_dim = style_cfg.w_dim
        resolutions = gen_cfg.resolutions()
        chans = [gen_cfg.channels(r) for r in resolutions]
        self.entry = ModulatedLinear(field_cfg.hidden_fg, chans[0], w_dim,
                                     activation=activation,
                                     eps=field_cfg.demod_eps)
        self.upsamplers = nn.ModuleList()
        self.stage_blocks = nn.ModuleList()
        self.to_rgbs = nn.ModuleList()
        for s in range(1, len(resolutions)):
            c_prev, c = chans[s - 1], chans[s]
            self.upsamplers.append(make_upsampler(upsampler_kind, c_prev))
            blocks = nn.ModuleList(
                [ModulatedLinear(c_prev, c, w_dim, activation=activation,
                                 eps=field_cfg.demod_eps)]
                + [ModulatedLinear(c, c, w_dim, activation=activation,
                                   eps=field_cfg.demod_eps)
                   for _ in range(gen_cfg.blocks_per_stage - 1)])
            self.stage_blocks.append(blocks)
            self.to_rgbs.append(ModulatedLinear(c, 3, w_dim, demodulate=False,
                                                activation="linear"))
        # RGB projection used when no stage is active (base resolution)
        self.base_rgb = ModulatedLinear(chans[0], 3, w_dim, demodulate=False,
                                        activation="linear")
        self._noise_lattices: dict[int, torch.Tensor] = {}

    # -- style layer accounting --------------------------------------------
    @property
    def aggregation_layer_index(self) -> int:
        return self.field.aggregation_index

    @property
    def num_style_layers(self) -> int:
        # field layers, the entry projection, per-stage blocks, per-stage
        # RGB projections, and the base RGB projection
        per_stage = self.cfg.blocks_per_stage + 1
        return (self.field.num_style_layers + 1
                + self.cfg.num_stages * per_stage + 1)

    def style_layer_labels(self) -> list[str]:
        """Human-readable names for every style-consuming layer, in
        broadcast-row order. Rows before ``aggregation_layer_index``
        control geometry; the rest control appearance."""
        f = self.field_cfg
        labels = [f"fg_block_{i}" for i in range(f.n_sigma)]
        labels += [f"bg_block_{i}" for i in range(f.n_bg)]
        labels += [f"mid_block_{i}" for i in range(f.n_c - f.n_sigma)]
        labels += ["entry", "base_rgb"]
        for s, r in enumerate(self.cfg.resolutions()[1:]):
            labels += [f"stage{r}_block_{i}"
                       for i in range(self.cfg.blocks_per_stage)]
            labels += [f"stage{r}_rgb"]
        return labels

    def broadcast(self, w: torch.Tensor) -> torch.Tensor:
        return broadcast_styles(w, self.num_style_layers)

    def _styles(self, w) -> torch.Tensor:
        """Accept a flat w, a broadcast matrix, or a MixingSpec."""
        if isinstance(w, MixingSpec):
            from .styles import mix
            a = w.style_a if w.style_a.ndim == 2 else self.broadcast(w.style_a)
            b = w.style_b if w.style_b.ndim == 2 else self.broadcast(w.style_b)
            return mix(a, b, w.crossover_layer)
        if w.ndim == 1:
            return self.broadcast(w)
        if w.ndim == 2 and w.shape[0] == self.num_style_layers:
            return w
        raise ValueError(f"bad style shape {tuple(w.shape)}")

    # -- layer plan ---------------------------------------------------------
    def active_architecture(self, active_resolution: int,
                            fade_alpha: float = 1.0) -> LayerPlan:
        resolutions = self.cfg.resolutions()
        if active_resolution not in resolutions:
            raise ValueError(f"resolution {active_resolution} not in chain "
                             f"{resolutions}")
        k = resolutions.index(active_resolution)
        if self.cfg.progressive_kind == "insert_upsampler":
            fade_alpha = 1.0
        return LayerPlan(resolution=active_resolution, active_stages=k,
                         fade_alpha=fade_alpha,
                         stage_resolutions=resolutions[:k + 1],
                         stage_channels=[self.cfg.channels(r)
                                         for r in resolutions[:k + 1]])

    # -- synthesis ----------------------------------------------------------
    def synthesize(self, w, pose: CameraPose, *,
                   active_resolution: Optional[int] = None,
                   fade_alpha: float = 1.0,
                   generator: Optional[torch.Generator] = None,
                   want_nerf_rgb: bool = False,
                   noise_seed: int = 0) -> GeneratorOutput:
        """Render one image for one style/pose.

        With noise_mode="none" (default) this is a deterministic pure
        function of (w, pose, parameters) when sampling is deterministic.
        """
        styles = self._styles(w)
        dtype = styles.dtype
        plan = self.active_architecture(
            active_resolution or self.cfg.target_resolution, fade_alpha)
        base = self.cfg.base_resolution
        bundle = generate_rays(pose, base, bounding_radius=1.0, dtype=dtype)

        agg = aggregate_features(self.field, bundle, styles, self.sampling,
                                 background_start=self.field_cfg.background_start,
                                 generator=generator)
        feats = self.field.mid_features(agg["features"], styles)   # (H, W, D)
        aux = {"aggregated": agg["features"]}

        low_res_rgb = None
        if want_nerf_rgb:
            nerf = render_nerf_rgb(self.field, bundle, styles, self.sampling,
                                   background_start=self.field_cfg.background_start,
                                   generator=generator)
            low_res_rgb = nerf["rgb"]

        rows = self._stage_style_rows(styles)
        x = self.entry(feats, rows["entry"])                       # (H, W, C0)
        x = x.permute(2, 0, 1)[None]                               # (1, C0, H, W)
        aux["stage_32"] = x[0]

        noise_maps = None
        if self.cfg.noise_mode == "geometry_aware":
            noise_maps = self._geometry_noise_maps(
                styles, pose, agg, plan, noise_seed=noise_seed, dtype=dtype)

        img = self._run_stages(x, rows, plan, aux, noise_maps)
        return GeneratorOutput(image=img.permute(1, 2, 0),
                               depth=agg["depth"], alpha=agg["alpha"],
                               low_res_rgb=low_res_rgb, aux=aux)

    def _stage_style_rows(self, styles: torch.Tensor) -> dict:
        f = self.field.num_style_layers
        rows = {"entry": styles[f], "base_rgb": styles[f + 1]}
        idx = f + 2
        per = []
        for s in range(self.cfg.num_stages):
            blocks = [styles[idx + i] for i in range(self.cfg.blocks_per_stage)]
            idx += self.cfg.blocks_per_stage
            per.append({"blocks": blocks, "rgb": styles[idx]})
            idx += 1
        rows["stages"] = per
        return rows

    def _run_stages(self, x: torch.Tensor, rows: dict, plan: LayerPlan,
                    aux: dict, noise_maps) -> torch.Tensor:
        grow = self.cfg.progressive_kind == "grow"
        k = plan.active_stages
        rgb_prev = None
        for s in range(k):
            if grow and s == k - 1 and plan.fade_alpha < 1.0:
                rgb_prev = self._to_image(x, rows, s - 1)
            x = self.upsamplers[s](x)
            for bi, block in enumerate(self.stage_blocks[s]):
                noise = noise_maps[s][..., None] if noise_maps is not None else None
                xh = block(x[0].permute(1, 2, 0), rows["stages"][s]["blocks"][bi],
                           pre_activation_bias=noise)
                x = xh.permute(2, 0, 1)[None]
            aux[f"stage_{x.shape[-1]}"] = x[0]
        img = self._to_image(x, rows, k - 1)
        if rgb_prev is not None:
            up_prev = F.interpolate(rgb_prev[None], scale_factor=2,
                                    mode="bilinear", align_corners=False)[0]
            img = (1.0 - plan.fade_alpha) * up_prev + plan.fade_alpha * img
        return img

    def _to_image(self, x: torch.Tensor, rows: dict, stage: int) -> torch.Tensor:
        """RGB projection of a (1, C, H, W) feature grid; stage -1 uses the
        base-resolution projection."""
        hwc = x[0].permute(1, 2, 0)
        if stage < 0:
            rgb = self.base_rgb(hwc, rows["base_rgb"])
        else:
            rgb = self.to_rgbs[stage](hwc, rows["stages"][stage]["rgb"])
        return rgb.permute(2, 0, 1)

    # -- geometry-attached noise -------------------------------------------
    def _noise_lattice(self, resolution: int, seed: int,
                       dtype: torch.dtype) -> torch.Tensor:
        key = (resolution, seed)
        if key not in self._noise_lattices:
            g = torch.Generator().manual_seed(seed * 7919 + resolution)
            self._noise_lattices[key] = torch.randn(
                (resolution,) * 3, generator=g, dtype=dtype)
        return self._noise_lattices[key]

    def _geometry_noise_maps(self, styles, pose, agg, plan: LayerPlan, *,
                             noise_seed: int, dtype) -> Optional[list]:
        """Per-stage noise maps sampled from fixed 3D lattices at the
        expected surface point of each pixel's ray, so the noise is
        attached to the geometry rather than to screen coordinates."""
        if self.cfg.noise_std == 0.0:
            return None
        if float(agg["fg_alpha"].max()) < 1e-3:
            warnings.warn("degenerate density: skipping geometry-aware noise")
            return None
        maps = []
        base_depth = agg["depth"][None, None]
        base_alpha = agg["fg_alpha"][None, None]
        for s, res in enumerate(plan.stage_resolutions[1:plan.active_stages + 1]):
            n = min(res, self.cfg.noise_grid_cap)
            lattice = self._noise_lattice(n, noise_seed, dtype)
            bundle = generate_rays(pose, res, dtype=dtype)
            depth = F.interpolate(base_depth, size=(res, res),
                                  mode="bilinear", align_corners=False)[0, 0]
            alpha = F.interpolate(base_alpha, size=(res, res),
                                  mode="bilinear", align_corners=False)[0, 0]
            surface = bundle.origins + depth[..., None] * bundle.directions
            noise = _sample_lattice(lattice, surface) * alpha
            maps.append(self.cfg.noise_std * noise)
        return maps

    def inject_geometry_noise(self, *args, **kwargs):
        raise NotImplementedError(
            "geometry-aware noise is applied inside synthesize() with "
            "noise_mode='geometry_aware'")


def _sample_lattice(lattice: torch.Tensor, points: torch.Tensor) -> torch.Tensor:
    """Trilinear lookup of a cubic noise lattice spanning [-1, 1]^3."""
    n = lattice.shape[0]
    grid = points.reshape(1, 1, 1, -1, 3).clamp(-1.0, 1.0)
    vol = lattice[None, None]
    out = F.grid_sample(vol, grid.to(vol.dtype), mode="bilinear",
                        padding_mode="border", align_corners=True)
    return out.reshape(points.shape[:-1])


def density_grid(field: RadianceField, w: torch.Tensor, resolution: int, *,
                 dtype: torch.dtype = torch.float32,
                 chunk: int = 65536) -> torch.Tensor:
    """Foreground density sampled on a regular cube over [-1, 1]^3.

    Points outside the unit sphere get zero density.
    """
    coords = torch.linspace(-1.0, 1.0, resolution, dtype=dtype)
    gx, gy, gz = torch.meshgrid(coords, coords, coords, indexing="ij")
    pts = torch.stack([gx, gy, gz], dim=-1).reshape(-1, 3)
    inside = pts.norm(dim=-1) <= 1.0
    sigmas = torch.zeros(pts.shape[0], dtype=dtype)
    pin = pts[inside]
    outs = []
    with torch.no_grad():
        for i in range(0, pin.shape[0], chunk):
            s = field.eval_foreground(pin[i:i + chunk][None], None, w)
            outs.append(s.sigma[0])
    if outs:
        sigmas[inside] = torch.cat(outs)
    return sigmas.reshape(resolution, resolution, resolution)
