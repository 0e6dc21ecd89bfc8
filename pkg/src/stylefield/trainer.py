"""Adversarial training loop with the three-stage progressive schedule,
EMA parameter averaging, lazy R1, render-path regularization and
bit-exact checkpointing."""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch
import torch.nn.functional as F

from . import data as data_mod
from .adversary import Discriminator, gan_losses, nerf_path_loss, r1_penalty, \
    sample_pixel_set
from .camera import PoseDistribution, corresponding_rays, sample_pose
from .config import PipelineConfig, config_from_dict, config_to_dict
from .generator import Generator
from .io import CheckpointError, load_archive, save_archive
from .renderer import render_nerf_rgb
from .styles import sample_latent

CHECKPOINT_VERSION = "stylefield-1"


def schedule_resolve(images_seen: int, t1: int, t2: int,
                     base_resolution: int, target_resolution: int):
    """(active_resolution, fade_alpha, stage) for an image count.

    Stage 1 (< T1): base resolution, unapproximated path. Stage 2
    (T1..T2): resolution doublings at equal sub-intervals, fade ramping
    linearly within each. Stage 3 (>= T2): target resolution.
    """
    if images_seen < 0:
        raise ValueError("images_seen must be nonnegative")
    doublings = int(math.log2(target_resolution // base_resolution))
    if images_seen < t1:
        return base_resolution, 1.0, 1
    if images_seen >= t2 or doublings == 0:
        return target_resolution, 1.0, 3
    sub = (t2 - t1) / doublings
    i = min(int((images_seen - t1) / sub), doublings - 1)
    alpha = (images_seen - t1 - i * sub) / sub
    return base_resolution * 2 ** (i + 1), float(alpha), 2


def build_models(cfg: PipelineConfig, *, seed: int = 0):
    torch.manual_seed(seed)
    gen = Generator(cfg.styles, cfg.field_cfg, cfg.generator, cfg.sampling,
                    upsampler_kind=cfg.upsampler.kind)
    disc = Discriminator(cfg.generator)
    if cfg.train.dtype == "float64":
        gen.double()
        disc.double()
    return gen, disc


@dataclass
class StepMetrics:
    step: int
    images_seen: int
    resolution: int
    fade_alpha: float
    stage: int
    g_loss: float
    d_loss: float
    r1: float
    nerf_path: float
    aborted: bool = False

    def to_json(self) -> str:
        return json.dumps(self.__dict__)


class Trainer:
    """Single-writer training loop; all parameter mutation happens in
    ``train_step``."""

    def __init__(self, cfg: PipelineConfig, *, dataset: Optional[torch.Tensor] = None):
        self.cfg = cfg
        self.pose_dist = PoseDistribution.from_config(cfg.camera)
        self.generator, self.discriminator = build_models(cfg, seed=cfg.train.seed)
        self.g_ema = copy.deepcopy(self.generator)
        for p in self.g_ema.parameters():
            p.requires_grad_(False)
        self.dtype = torch.float64 if cfg.train.dtype == "float64" else torch.float32

        mapping_params = list(self.generator.mapping.parameters())
        mapping_ids = {id(p) for p in mapping_params}
        other = [p for p in self.generator.parameters()
                 if id(p) not in mapping_ids]
        lr = cfg.train.lr
        betas = (cfg.train.adam_beta1, cfg.train.adam_beta2)
        self.opt_g = torch.optim.Adam(
            [{"params": other, "lr": lr},
             {"params": mapping_params,
              "lr": lr * cfg.styles.mapping_lr_multiplier}], betas=betas)
        self.opt_d = torch.optim.Adam(self.discriminator.parameters(),
                                      lr=lr, betas=betas)

        if dataset is None:
            dataset = data_mod.load_dataset(cfg.dataset, self.pose_dist)
        self.dataset = dataset.to(self.dtype)
        self.data_rng = torch.Generator().manual_seed(cfg.train.seed + 1)
        self.g_rng = torch.Generator().manual_seed(cfg.train.seed + 2)
        self._batches = data_mod.ingest(self.dataset, cfg.train.batch_size,
                                        self.data_rng)
        self.images_seen = 0
        self.step_count = 0

    # -- helpers ------------------------------------------------------------
    def resolve(self):
        return schedule_resolve(self.images_seen, self.cfg.schedule.t1,
                                self.cfg.schedule.t2,
                                self.cfg.generator.base_resolution,
                                self.cfg.generator.target_resolution)

    def _sample_styles(self, batch: int) -> torch.Tensor:
        z = sample_latent(self.cfg.styles.z_dim, batch,
                          generator=self.g_rng, dtype=self.dtype)
        return self.generator.mapping(z, update_mean=True)

    def _sample_poses(self, batch: int):
        return [sample_pose(self.pose_dist, generator=self.g_rng)
                for _ in range(batch)]

    def _squash(self, image: torch.Tensor) -> torch.Tensor:
        return torch.tanh(image) if self.cfg.train.squash_fakes else image

    def _render_fakes(self, ws, poses, res, alpha, stage, *,
                      want_nerf=False):
        """Per-sample synthesis; stage 1 uses the unapproximated path."""
        images, nerf_pairs = [], []
        for w, pose in zip(ws, poses):
            if stage == 1:
                bundle = _base_bundle(self.generator, pose, self.dtype)
                out = render_nerf_rgb(
                    self.generator.field, bundle, self.generator.broadcast(w),
                    self.cfg.sampling,
                    background_start=self.cfg.field_cfg.background_start,
                    generator=self.g_rng)
                # optionally squash to the dataset's value range; the raw
                # pre-squash image is what the consistency term compares
                img = out["rgb"]
                images.append(self._squash(img).permute(2, 0, 1))
            else:
                out = self.generator.synthesize(
                    w, pose, active_resolution=res, fade_alpha=alpha,
                    generator=self.g_rng)
                images.append(self._squash(out.image).permute(2, 0, 1))
                if want_nerf:
                    nerf_pairs.append((out.image, pose, w))
        return torch.stack(images), nerf_pairs

    def _nerf_path_term(self, nerf_pairs, res):
        base = self.cfg.generator.base_resolution
        total = None
        for image, pose, w in nerf_pairs:
            low, _, index_map = corresponding_rays(
                pose, base, res, dtype=self.dtype)
            nerf = render_nerf_rgb(
                self.generator.field, low, self.generator.broadcast(w),
                self.cfg.sampling,
                background_start=self.cfg.field_cfg.background_start,
                generator=self.g_rng)
            pix = sample_pixel_set(base, self.cfg.loss.nerf_path_pixels,
                                   generator=self.g_rng)
            term = nerf_path_loss(image, nerf["rgb"], index_map, pix)
            total = term if total is None else total + term
        return total / len(nerf_pairs)

    # -- the step -----------------------------------------------------------
    def train_step(self) -> StepMetrics:
        cfg = self.cfg
        batch = next(self._batches)
        res, alpha, stage = self.resolve()
        real = data_mod.resize_batch(batch, res).to(self.dtype)
        if stage == 2 and alpha < 1.0:
            low = F.interpolate(F.avg_pool2d(real, 2), scale_factor=2,
                                mode="bilinear", align_corners=False)
            real = alpha * real + (1.0 - alpha) * low

        snapshot = (copy.deepcopy(self.generator.state_dict()),
                    copy.deepcopy(self.discriminator.state_dict()),
                    copy.deepcopy(self.opt_g.state_dict()),
                    copy.deepcopy(self.opt_d.state_dict()))

        def rollback():
            self.generator.load_state_dict(snapshot[0])
            self.discriminator.load_state_dict(snapshot[1])
            self.opt_g.load_state_dict(snapshot[2])
            self.opt_d.load_state_dict(snapshot[3])

        b = real.shape[0]

        # discriminator step
        ws = self._sample_styles(b).detach()
        poses = self._sample_poses(b)
        with torch.no_grad():
            fakes, _ = self._render_fakes(ws, poses, res, alpha, stage)
        scores_fake = self.discriminator(fakes, active_resolution=res,
                                         fade_alpha=alpha)
        scores_real = self.discriminator(real, active_resolution=res,
                                         fade_alpha=alpha)
        _, d_loss = gan_losses(scores_fake, scores_real)
        r1_val = 0.0
        if cfg.loss.r1_weight > 0 and self.step_count % cfg.loss.r1_interval == 0:
            r1 = r1_penalty(self.discriminator, real,
                            weight=cfg.loss.r1_weight,
                            active_resolution=res, fade_alpha=alpha,
                            interval=cfg.loss.r1_interval)
            r1_val = float(r1.detach())
            d_total = d_loss + r1
        else:
            d_total = d_loss

        if not torch.isfinite(d_total):
            rollback()
            return StepMetrics(self.step_count, self.images_seen, res, alpha,
                               stage, float("nan"), float(d_total), r1_val,
                               0.0, aborted=True)

        self.opt_d.zero_grad(set_to_none=True)
        d_total.backward()
        self.opt_d.step()

        # generator step (scored against the freshly updated discriminator)
        ws_g = self._sample_styles(b)
        poses_g = self._sample_poses(b)
        fakes_g, nerf_pairs = self._render_fakes(
            ws_g, poses_g, res, alpha, stage,
            want_nerf=stage >= 2 and cfg.loss.nerf_path_weight > 0)
        g_scores = self.discriminator(fakes_g, active_resolution=res,
                                      fade_alpha=alpha)
        g_adv, _ = gan_losses(g_scores)
        nerf_val = 0.0
        if nerf_pairs:
            nerf_term = self._nerf_path_term(nerf_pairs, res)
            nerf_val = float(nerf_term.detach())
            g_total = g_adv + cfg.loss.nerf_path_weight * nerf_term
        else:
            g_total = g_adv

        if not torch.isfinite(g_total):
            rollback()
            return StepMetrics(self.step_count, self.images_seen, res, alpha,
                               stage, float(g_total), float(d_total.detach()),
                               r1_val, nerf_val, aborted=True)

        self.opt_g.zero_grad(set_to_none=True)
        g_total.backward()
        self.opt_g.step()

        self._update_ema(b)
        self.images_seen += b
        self.step_count += 1
        return StepMetrics(self.step_count, self.images_seen, res, alpha,
                           stage, float(g_total.detach()),
                           float(d_total.detach()), r1_val,
                           nerf_val)

    def _update_ema(self, batch: int):
        decay = 0.5 ** (batch / max(self.cfg.train.ema_halflife_images, 1e-8))
        with torch.no_grad():
            for p_ema, p in zip(self.g_ema.parameters(),
                                self.generator.parameters()):
                p_ema.lerp_(p, 1.0 - decay)
            for b_ema, bb in zip(self.g_ema.buffers(), self.generator.buffers()):
                b_ema.copy_(bb)

    def train(self, steps: int, *, log_stream=None) -> list:
        out = []
        for _ in range(steps):
            m = self.train_step()
            out.append(m)
            if log_stream is not None and (m.step % self.cfg.train.log_every == 0
                                           or m.aborted):
                log_stream.write(m.to_json() + "\n")
                log_stream.flush()
        return out

    # -- checkpointing ------------------------------------------------------
    def save_checkpoint(self, path: str) -> None:
        save_checkpoint(path, self)

    @classmethod
    def load_checkpoint(cls, path: str,
                        dataset: Optional[torch.Tensor] = None) -> "Trainer":
        return load_checkpoint(path, dataset=dataset)


def _base_bundle(generator: Generator, pose, dtype):
    from .camera import generate_rays
    return generate_rays(pose, generator.cfg.base_resolution, dtype=dtype)


def _state_to_arrays(prefix: str, state: dict, arrays: dict):
    for k, v in state.items():
        arrays[f"{prefix}/{k}"] = v.detach().cpu().numpy()


def _arrays_to_state(prefix: str, arrays: dict) -> dict:
    plen = len(prefix) + 1
    return {k[plen:]: torch.from_numpy(v)
            for k, v in arrays.items() if k.startswith(prefix + "/")}


def _opt_to_arrays(prefix: str, opt, arrays: dict, meta: dict):
    sd = opt.state_dict()
    meta[prefix + "_param_groups"] = json.dumps(sd["param_groups"])
    for idx, st in sd["state"].items():
        for k, v in st.items():
            t = v if torch.is_tensor(v) else torch.tensor(v)
            arrays[f"{prefix}/{idx}/{k}"] = t.detach().cpu().numpy()


def _opt_from_arrays(prefix: str, arrays: dict, meta: dict, opt):
    groups = json.loads(meta[prefix + "_param_groups"])
    state: dict = {}
    plen = len(prefix) + 1
    for k, v in arrays.items():
        if not k.startswith(prefix + "/"):
            continue
        idx_s, name = k[plen:].split("/", 1)
        state.setdefault(int(idx_s), {})[name] = torch.from_numpy(v.copy())
    opt.load_state_dict({"state": state, "param_groups": groups})


def save_checkpoint(path: str, trainer: Trainer) -> None:
    arrays: dict = {}
    meta = {
        "version": CHECKPOINT_VERSION,
        "config": config_to_dict(trainer.cfg),
        "images_seen": trainer.images_seen,
        "step_count": trainer.step_count,
    }
    _state_to_arrays("gen", trainer.generator.state_dict(), arrays)
    _state_to_arrays("disc", trainer.discriminator.state_dict(), arrays)
    _state_to_arrays("ema", trainer.g_ema.state_dict(), arrays)
    _opt_to_arrays("opt_g", trainer.opt_g, arrays, meta)
    _opt_to_arrays("opt_d", trainer.opt_d, arrays, meta)
    arrays["rng/data"] = trainer.data_rng.get_state().numpy()
    arrays["rng/model"] = trainer.g_rng.get_state().numpy()
    save_archive(path, arrays, meta)


def load_checkpoint(path: str, *, dataset: Optional[torch.Tensor] = None) -> Trainer:
    arrays, meta = load_archive(path)
    if meta.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: checkpoint version {meta.get('version')!r}, expected "
            f"{CHECKPOINT_VERSION}")
    cfg = config_from_dict(meta["config"])
    trainer = Trainer(cfg, dataset=dataset)
    trainer.generator.load_state_dict(_arrays_to_state("gen", arrays))
    trainer.discriminator.load_state_dict(_arrays_to_state("disc", arrays))
    trainer.g_ema.load_state_dict(_arrays_to_state("ema", arrays))
    _opt_from_arrays("opt_g", arrays, meta, trainer.opt_g)
    _opt_from_arrays("opt_d", arrays, meta, trainer.opt_d)
    trainer.data_rng.set_state(torch.from_numpy(arrays["rng/data"].copy()))
    trainer.g_rng.set_state(torch.from_numpy(arrays["rng/model"].copy()))
    trainer.images_seen = int(meta["images_seen"])
    trainer.step_count = int(meta["step_count"])
    return trainer


def load_generator(path: str, *, ema: bool = True):
    """Load just the (EMA) generator and config from a checkpoint, for
    rendering and evaluation."""
    arrays, meta = load_archive(path)
    if meta.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: checkpoint version {meta.get('version')!r}, expected "
            f"{CHECKPOINT_VERSION}")
    cfg = config_from_dict(meta["config"])
    gen, _ = build_models(cfg)
    gen.load_state_dict(_arrays_to_state("ema" if ema else "gen", arrays))
    gen.eval()
    for p in gen.parameters():
        p.requires_grad_(False)
    return gen, cfg
