"""Command-line interface."""
from __future__ import annotations

import json
import os
import sys
from dataclasses import replace
from typing import Optional

import click
import numpy as np
import torch

from .camera import CameraPose, PoseDistribution
from .config import PipelineConfig, load_config
from .generator import Generator, MixingSpec
from .styles import interpolate as style_interpolate, sample_latent


def _fail(message: str, code: int = 1):
    sys.stderr.write(json.dumps({"error": message}) + "\n")
    raise SystemExit(code)


def _load_cfg(config: Optional[str]) -> PipelineConfig:
    try:
        return load_config(config)
    except (OSError, KeyError, ValueError) as e:
        _fail(f"config error: {e}")


def _generator(checkpoint: Optional[str], cfg: PipelineConfig, seed: int):
    """A generator from a checkpoint, or a freshly initialized one."""
    if checkpoint:
        from .trainer import load_generator
        try:
            gen, cfg = load_generator(checkpoint)
        except Exception as e:
            _fail(f"checkpoint error: {e}")
    else:
        from .trainer import build_models
        gen, _ = build_models(cfg, seed=seed)
        gen.eval()
        for p in gen.parameters():
            p.requires_grad_(False)
    gen.sampling = replace(gen.sampling, stratified=False)
    return gen, cfg


def _style_from_seed(gen: Generator, cfg: PipelineConfig, seed: int):
    g = torch.Generator().manual_seed(seed)
    dtype = next(gen.parameters()).dtype
    z = sample_latent(cfg.styles.z_dim, 1, generator=g, dtype=dtype)
    return gen.mapping(z)[0]


def _save_png(image: torch.Tensor, path: str):
    from .service import image_to_bytes
    with open(path, "wb") as fh:
        fh.write(image_to_bytes(image))


@click.group()
def main():
    """Style-conditioned radiance-field generator toolkit."""


_config_opt = click.option("--config", type=click.Path(), default=None,
                           help="INI config file")
_seed_opt = click.option("--seed", type=int, default=0)
_ckpt_opt = click.option("--checkpoint", type=click.Path(), default=None)


@main.command("make-data")
@_config_opt
@_seed_opt
@click.option("--out", type=click.Path(), required=True)
@click.option("--count", type=int, default=None)
def make_data(config, seed, out, count):
    """Write the procedural sphere dataset as PNG files."""
    from . import data as data_mod
    cfg = _load_cfg(config)
    ds_cfg = replace(cfg.dataset, seed=seed)
    if count:
        ds_cfg = replace(ds_cfg, size=count)
    dist = PoseDistribution.from_config(cfg.camera)
    images = data_mod.synthetic_spheres(ds_cfg, dist)
    os.makedirs(out, exist_ok=True)
    from PIL import Image
    for i, img in enumerate(images):
        arr = ((img + 1.0) * 127.5).clamp(0, 255).numpy().astype(np.uint8)
        Image.fromarray(arr).save(os.path.join(out, f"{i:05d}.png"))
    click.echo(json.dumps({"written": len(images), "dir": out}))


@main.command()
@_config_opt
@_seed_opt
@click.option("--steps", type=int, default=None)
@click.option("--out", type=click.Path(), required=True,
              help="checkpoint output path")
@click.option("--resume", type=click.Path(), default=None)
@click.option("--resume-at-full", is_flag=True,
              help="finetune from the checkpoint at the target resolution")
@click.option("--log", type=click.Path(), default=None,
              help="metrics stream (line-delimited JSON); default stdout")
def train(config, seed, steps, out, resume, resume_at_full, log):
    """Run adversarial training and save a checkpoint."""
    from .trainer import Trainer
    cfg = _load_cfg(config)
    if seed:
        cfg.train.seed = seed
    if resume:
        try:
            trainer = Trainer.load_checkpoint(resume)
        except Exception as e:
            _fail(f"checkpoint error: {e}")
        if resume_at_full:
            trainer.images_seen = max(trainer.images_seen, trainer.cfg.schedule.t2)
    else:
        trainer = Trainer(cfg)
    n = steps if steps is not None else cfg.train.total_steps
    stream = open(log, "w") if log else sys.stdout
    try:
        trainer.train(n, log_stream=stream)
    finally:
        if log:
            stream.close()
    trainer.save_checkpoint(out)
    click.echo(json.dumps({"checkpoint": out, "steps": n,
                           "images_seen": trainer.images_seen}))


@main.command()
@_config_opt
@_ckpt_opt
@_seed_opt
@click.option("--theta", type=float, default=0.0)
@click.option("--phi", type=float, default=0.0)
@click.option("--radius", type=float, default=1.0)
@click.option("--fov", type=float, default=12.0)
@click.option("--res", type=int, default=0)
@click.option("--out", type=click.Path(), required=True)
def render(config, checkpoint, seed, theta, phi, radius, fov, res, out):
    """Render one image for a style seed and camera pose."""
    cfg = _load_cfg(config)
    gen, cfg = _generator(checkpoint, cfg, seed)
    w = _style_from_seed(gen, cfg, seed)
    pose = CameraPose(theta=theta, phi=phi, radius=radius, fov=fov)
    with torch.no_grad():
        o = gen.synthesize(w, pose,
                           active_resolution=res or cfg.generator.base_resolution)
    _save_png(o.image, out)
    click.echo(json.dumps({"out": out}))


@main.command()
@_config_opt
@_ckpt_opt
@_seed_opt
@click.option("--seed-b", type=int, required=True)
@click.option("--crossover", type=int, required=True)
@click.option("--theta", type=float, default=0.0)
@click.option("--phi", type=float, default=0.0)
@click.option("--res", type=int, default=0)
@click.option("--out", type=click.Path(), required=True)
def mix(config, checkpoint, seed, seed_b, crossover, theta, phi, res, out):
    """Render with styles A below and B at/after a crossover layer."""
    cfg = _load_cfg(config)
    gen, cfg = _generator(checkpoint, cfg, seed)
    spec = MixingSpec(style_a=gen.broadcast(_style_from_seed(gen, cfg, seed)),
                      style_b=gen.broadcast(_style_from_seed(gen, cfg, seed_b)),
                      crossover_layer=crossover)
    with torch.no_grad():
        o = gen.synthesize(spec, CameraPose(theta=theta, phi=phi),
                           active_resolution=res or cfg.generator.base_resolution)
    _save_png(o.image, out)
    click.echo(json.dumps({"out": out,
                           "aggregation_layer": gen.aggregation_layer_index}))


@main.command()
@_config_opt
@_ckpt_opt
@click.option("--seed-a", type=int, required=True)
@click.option("--seed-b", type=int, required=True)
@click.option("--frames", type=int, default=5)
@click.option("--res", type=int, default=0)
@click.option("--out", type=click.Path(), required=True,
              help="output directory")
@click.option("--seed", type=int, default=0)
def interpolate(config, checkpoint, seed_a, seed_b, frames, res, out, seed):
    """Linear style-space walk between two seeds."""
    cfg = _load_cfg(config)
    gen, cfg = _generator(checkpoint, cfg, seed)
    wa = _style_from_seed(gen, cfg, seed_a)
    wb = _style_from_seed(gen, cfg, seed_b)
    os.makedirs(out, exist_ok=True)
    for i in range(frames):
        t = i / (frames - 1) if frames > 1 else 0.0
        w = style_interpolate(wa, wb, t)
        with torch.no_grad():
            o = gen.synthesize(w, CameraPose(),
                               active_resolution=res or cfg.generator.base_resolution)
        _save_png(o.image, os.path.join(out, f"frame_{i:03d}.png"))
    click.echo(json.dumps({"frames": frames, "dir": out}))


@main.command()
@_config_opt
@_ckpt_opt
@_seed_opt
@click.option("--target", type=click.Path(exists=True), required=True)
@click.option("--iters", type=int, default=200)
@click.option("--predictor-steps", type=int, default=150)
@click.option("--out", type=click.Path(), default=None)
def invert(config, checkpoint, seed, target, iters, predictor_steps, out):
    """Recover pose and style for a target image."""
    from PIL import Image
    from . import evalsuite
    cfg = _load_cfg(config)
    gen, cfg = _generator(checkpoint, cfg, seed)
    img = Image.open(target).convert("RGB")
    res = cfg.generator.base_resolution
    img = img.resize((res, res), Image.LANCZOS)
    tensor = torch.from_numpy(np.asarray(img).astype(np.float32) / 127.5 - 1.0)
    dist = PoseDistribution.from_config(cfg.camera)
    predictor, val_err = evalsuite.train_camera_predictor(
        gen, dist, predictor_steps, seed=seed)
    pose = predictor.predict_pose(tensor, CameraPose(radius=cfg.camera.radius,
                                                     fov=cfg.camera.fov))
    w, err, _ = evalsuite.invert(gen, tensor, pose, iters=iters, resolution=res)
    result = {"pose": pose.to_dict(), "mse": err,
              "predictor_val_error": val_err}
    if out:
        with torch.no_grad():
            o = gen.synthesize(w, pose, active_resolution=res)
        _save_png(o.image, out)
        result["out"] = out
    click.echo(json.dumps(result))


@main.command("eval-consistency")
@_config_opt
@_ckpt_opt
@_seed_opt
@click.option("--deltas", default="0.0175,0.0873",
              help="comma-separated yaw deltas in radians")
@click.option("--styles", "n_styles", type=int, default=5)
@click.option("--out", type=click.Path(), default=None)
def eval_consistency(config, checkpoint, seed, deltas, n_styles, out):
    """Multi-view consistency report over several style seeds."""
    from . import evalsuite
    cfg = _load_cfg(config)
    gen, cfg = _generator(checkpoint, cfg, seed)
    delta_list = [float(d) for d in deltas.split(",")]
    reports = []
    for i in range(n_styles):
        w = _style_from_seed(gen, cfg, seed + i)
        rep = evalsuite.consistency_sweep(
            gen, w, CameraPose(radius=cfg.camera.radius, fov=cfg.camera.fov),
            delta_list, resolution=cfg.generator.base_resolution)
        reports.append(json.loads(rep.to_json()))
    payload = json.dumps({"reports": reports}, indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(payload)
    click.echo(payload)


@main.command("extract-geometry")
@_config_opt
@_ckpt_opt
@_seed_opt
@click.option("--grid", type=int, default=64)
@click.option("--out", type=click.Path(), required=True)
def extract_geometry(config, checkpoint, seed, grid, out):
    """Marching-cubes mesh of the learned density."""
    from . import evalsuite
    cfg = _load_cfg(config)
    gen, cfg = _generator(checkpoint, cfg, seed)
    w = _style_from_seed(gen, cfg, seed)
    mesh = evalsuite.extract_generator_geometry(gen, w, grid)
    evalsuite.save_mesh(mesh, out)
    click.echo(json.dumps({"vertices": len(mesh.vertices),
                           "faces": len(mesh.faces), "empty": mesh.empty,
                           "out": out}))


@main.command()
@_config_opt
@_ckpt_opt
@_seed_opt
@click.option("--res", default="32,256", help="comma-separated resolutions")
@click.option("--out", type=click.Path(), default=None)
def bench(config, checkpoint, seed, res, out):
    """Evaluation-budget and wall-clock table."""
    from . import evalsuite
    cfg = _load_cfg(config)
    gen = None
    if checkpoint:
        gen, cfg = _generator(checkpoint, cfg, seed)
    resolutions = [int(r) for r in res.split(",")]
    table = evalsuite.bench(gen, resolutions, cfg.sampling,
                            base_resolution=cfg.generator.base_resolution)
    payload = json.dumps(table, indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(payload)
    click.echo(payload)


@main.command()
@_config_opt
@click.option("--checkpoint", type=click.Path(), default=None)
@click.option("--port", type=int, default=None)
@click.option("--seed", type=int, default=0)
def serve(config, checkpoint, port, seed):
    """Start the HTTP/WebSocket rendering service."""
    from .service import serve as run_serve
    cfg = _load_cfg(config)
    checkpoint = os.environ.get("STYLENERF_CHECKPOINT", checkpoint)
    port = int(os.environ.get("STYLENERF_PORT", port or cfg.service.port))
    if not checkpoint:
        _fail("no checkpoint: pass --checkpoint or set STYLENERF_CHECKPOINT")
    run_serve(checkpoint, port,
              render_budget_ms=cfg.service.render_budget_ms)


if __name__ == "__main__":
    main()
