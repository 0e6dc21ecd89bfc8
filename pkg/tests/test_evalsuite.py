import math

import numpy as np
import pytest
import torch

from stylefield.camera import CameraPose, PoseDistribution
from stylefield.config import SamplingConfig
from stylefield.evalsuite import (CameraPredictor, Mesh, bench,
                                  consistency_sweep, depth_convexity,
                                  extract_generator_geometry,
                                  extract_geometry, invert, iso_level,
                                  save_mesh, train_camera_predictor)
from stylefield.trainer import build_models

from conftest import tiny_config
from test_generator import randomize_modulation, style_for


def make_gen():
    cfg = tiny_config(sampling={"stratified": False})
    gen, _ = build_models(cfg, seed=0)
    gen.eval()
    for p in gen.parameters():
        p.requires_grad_(False)
    return gen, cfg


def test_depth_convexity_signs():
    n = 32
    yy, xx = torch.meshgrid(torch.linspace(-1, 1, n),
                            torch.linspace(-1, 1, n), indexing="ij")
    r2 = xx ** 2 + yy ** 2
    alpha = (r2 < 0.5).float()
    bulge = 1.0 + r2          # center nearer than rim
    dent = 2.0 - r2           # center farther than rim
    assert depth_convexity(bulge, alpha) > 0
    assert depth_convexity(dent, alpha) < 0


def test_depth_convexity_empty_alpha():
    d = torch.ones(16, 16)
    assert depth_convexity(d, torch.zeros(16, 16)) <= 0


def test_consistency_sweep_report():
    gen, _ = make_gen()
    randomize_modulation(gen)
    w = style_for(gen, 1)
    rep = consistency_sweep(gen, w, CameraPose(), [0.0175, 0.0873],
                            resolution=32)
    assert len(rep.mean_changes) == 2
    assert all(c >= 0 for c in rep.mean_changes)
    # constant eval budget regardless of output resolution
    rep64 = consistency_sweep(gen, w, CameraPose(), [0.0175, 0.0873],
                              resolution=64)
    assert rep.eval_counts == rep64.eval_counts


def test_iso_level_scaling():
    a = iso_level(SamplingConfig(n_coarse=32, n_importance=32))
    b = iso_level(SamplingConfig(n_coarse=64, n_importance=64))
    assert b == pytest.approx(2 * a)
    assert a == pytest.approx(math.log(2.0) / (2.0 / 64))


def analytic_ball(n, radius=0.5, inside=10.0):
    c = torch.linspace(-1, 1, n)
    gx, gy, gz = torch.meshgrid(c, c, c, indexing="ij")
    r = torch.sqrt(gx ** 2 + gy ** 2 + gz ** 2)
    return torch.where(r <= radius, torch.full_like(r, inside),
                       torch.zeros_like(r))


def test_marching_cubes_ball_radius():
    grid = analytic_ball(33)
    mesh = extract_geometry(grid, 5.0)
    assert not mesh.empty
    radii = np.linalg.norm(mesh.vertices, axis=1)
    voxel = 2.0 / 32
    assert abs(radii.mean() - 0.5) < 2 * voxel


def test_marching_cubes_empty_grid():
    mesh = extract_geometry(torch.zeros(9, 9, 9), 1.0)
    assert mesh.empty
    assert mesh.vertices.shape == (0, 3)


def test_extract_generator_geometry_caps_grid():
    gen, _ = make_gen()
    w = style_for(gen, 1)
    with pytest.raises(ValueError):
        extract_generator_geometry(gen, w, 256)
    mesh = extract_generator_geometry(gen, w, 12)
    assert isinstance(mesh, Mesh)


def test_save_mesh_format(tmp_path):
    mesh = Mesh(vertices=np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0],
                                   [0.0, 1.0, 0.0]]),
                faces=np.array([[0, 1, 2]]))
    p = tmp_path / "m.mesh"
    save_mesh(mesh, str(p))
    lines = p.read_text().splitlines()
    assert lines[0] == "3 1"
    assert lines[1].startswith("v ")
    assert lines[-1] == "f 0 1 2"


def test_camera_predictor_outputs_in_support():
    torch.manual_seed(0)
    pred = CameraPredictor(16)
    with torch.no_grad():
        pred.pitch_range.copy_(torch.tensor([-0.3, 0.3]))
        pred.yaw_range.copy_(torch.tensor([-0.5, 0.5]))
    out = pred(torch.randn(4, 3, 16, 16))
    assert out.shape == (4, 2)
    assert bool((out[:, 0] >= -0.3).all()) and bool((out[:, 0] <= 0.3).all())
    assert bool((out[:, 1] >= -0.5).all()) and bool((out[:, 1] <= 0.5).all())
    pose = pred.predict_pose(torch.randn(16, 16, 3), CameraPose(fov=40.0))
    assert pose.fov == 40.0


def test_train_camera_predictor_runs():
    gen, cfg = make_gen()
    randomize_modulation(gen)
    dist = PoseDistribution(kind="uniform", pitch_low=-0.2, pitch_high=0.2,
                            yaw_low=-0.4, yaw_high=0.4, fov=50.0)
    pred, err = train_camera_predictor(gen, dist, 4, seed=0, batch=2)
    assert math.isfinite(err)


def test_invert_errors_nonincreasing_and_zero_iters():
    gen, _ = make_gen()
    randomize_modulation(gen)
    w_true = style_for(gen, 5)
    with torch.no_grad():
        target = gen.synthesize(w_true, CameraPose(),
                                active_resolution=16).image
    _, err, hist = invert(gen, target, CameraPose(), iters=12, resolution=16)
    assert all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))
    assert err == hist[-1]
    _, err0, hist0 = invert(gen, target, CameraPose(), iters=0, resolution=16)
    assert len(hist0) == 1 and math.isfinite(err0)


def test_bench_table():
    gen, _ = make_gen()
    table = bench(gen, [16, 32, 48])
    rows = {r["resolution"]: r for r in table["rows"]}
    assert rows[16]["budget"]["approx_path"] == rows[32]["budget"]["approx_path"]
    assert "millis" in rows[32]
    assert "millis" not in rows[48]       # not in the resolution chain
    table2 = bench(None, [64], SamplingConfig(), base_resolution=32)
    assert table2["rows"][0]["budget"]["ratio"] == 4.0
