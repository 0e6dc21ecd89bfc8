import math

import pytest
import torch

from stylefield.camera import (CameraPose, PoseDistribution,
                               canonicalize_angle, corresponding_rays,
                               generate_rays, sample_pose)


def test_canonicalize_wraps_exactly():
    assert canonicalize_angle(0.0) == 0.0
    assert canonicalize_angle(2 * math.pi) == 0.0
    assert canonicalize_angle(-2 * math.pi) == 0.0
    assert canonicalize_angle(3 * math.pi) == math.pi
    assert canonicalize_angle(-math.pi) == math.pi
    a = 0.7
    assert canonicalize_angle(a + 2 * math.pi) == pytest.approx(a, abs=1e-12)


def test_full_turn_identical_position():
    p = CameraPose(theta=0.2, phi=0.9)
    q = CameraPose(theta=0.2, phi=0.9 + 2 * math.pi)
    assert torch.equal(p.position(), q.position())


def test_axis_aligned_positions_exact():
    assert torch.equal(CameraPose(radius=2.0).position(),
                       torch.tensor([0.0, 0.0, 2.0]))
    assert torch.equal(CameraPose(phi=math.pi / 2).position(),
                       torch.tensor([1.0, 0.0, 0.0]))
    assert torch.equal(CameraPose(theta=math.pi / 2).position(),
                       torch.tensor([0.0, 1.0, 0.0]))


def test_pose_validation_and_serialization():
    with pytest.raises(ValueError):
        CameraPose(radius=0.0)
    with pytest.raises(ValueError):
        CameraPose(fov=0.0)
    p = CameraPose(theta=0.1, phi=0.2, radius=1.5, fov=30.0)
    assert CameraPose.from_dict(p.to_dict()) == p


def test_pose_distribution_validation():
    with pytest.raises(ValueError):
        PoseDistribution(kind="banana")
    with pytest.raises(ValueError):
        PoseDistribution(kind="uniform", pitch_low=1.0, pitch_high=0.0)


def test_sample_pose_statistics():
    d = PoseDistribution(kind="gaussian", pitch_std=0.15, yaw_std=0.3)
    g = torch.Generator().manual_seed(0)
    thetas = [sample_pose(d, g).theta for _ in range(2000)]
    mean = sum(thetas) / len(thetas)
    var = sum((t - mean) ** 2 for t in thetas) / len(thetas)
    assert abs(mean) < 0.02
    assert abs(math.sqrt(var) - 0.15) < 0.02

    u = PoseDistribution(kind="uniform", yaw_low=1.0, yaw_high=2.0)
    g = torch.Generator().manual_seed(1)
    phis = [sample_pose(u, g).phi for _ in range(500)]
    assert all(1.0 <= p <= 2.0 for p in phis)


def test_generate_rays_basic_geometry():
    bundle = generate_rays(CameraPose(radius=1.0, fov=12.0), 8,
                           bounding_radius=1.0)
    assert bundle.origins.shape == (8, 8, 3)
    norms = bundle.directions.norm(dim=-1)
    assert torch.allclose(norms, torch.ones_like(norms), atol=1e-6)
    # all rays start at the camera position
    assert torch.allclose(bundle.origins,
                          CameraPose().position().expand(8, 8, 3))
    # near/far bracket the unit sphere from radius-1 camera
    m = bundle.foreground_mask
    assert bool(m.any())
    assert bool((bundle.near[m] < bundle.far[m]).all())
    assert bool((bundle.far[m] <= 2.0 + 1e-5).all())


def test_ray_sphere_intersection_oracle():
    """near/far re-derived with the scalar quadratic per ray."""
    bundle = generate_rays(CameraPose(theta=0.3, phi=1.1, radius=1.2, fov=40.0),
                           6, bounding_radius=1.0, dtype=torch.float64)
    o, d, near, far, mask = bundle.flat()
    for i in range(o.shape[0]):
        b = 2.0 * float((o[i] * d[i]).sum())
        c = float((o[i] * o[i]).sum()) - 1.0
        disc = b * b - 4.0 * c
        if disc <= 0:
            assert not bool(mask[i])
        else:
            t0 = (-b - math.sqrt(disc)) / 2.0
            t1 = (-b + math.sqrt(disc)) / 2.0
            assert bool(mask[i])
            assert float(near[i]) == pytest.approx(max(t0, 1e-3), abs=1e-9)
            assert float(far[i]) == pytest.approx(t1, abs=1e-9)


def test_central_ray_points_at_origin():
    for pose in (CameraPose(), CameraPose(theta=0.4, phi=2.0, radius=1.7)):
        bundle = generate_rays(pose, 2, bounding_radius=1.0,
                               dtype=torch.float64)
        center_dir = bundle.directions.mean(dim=(0, 1))
        center_dir = center_dir / center_dir.norm()
        expect = -pose.position(torch.float64)
        expect = expect / expect.norm()
        assert torch.allclose(center_dir, expect, atol=1e-6)


def test_corresponding_rays_exact_alignment():
    pose = CameraPose(theta=0.1, phi=0.5)
    low, high, index_map = corresponding_rays(pose, 4, 16,
                                              dtype=torch.float64)
    assert low.origins.shape == (4, 4, 3)
    assert high.origins.shape == (16, 16, 3)
    assert index_map.shape == (4, 4, 2)
    # factor 4 -> low-res site k sits at high-res pixel 4k+1
    assert index_map[:, 0, 0].tolist() == [1, 5, 9, 13]
    assert index_map[0, :, 1].tolist() == [1, 5, 9, 13]
    for a in range(4):
        for b in range(4):
            ha, hb = int(index_map[a, b, 0]), int(index_map[a, b, 1])
            diff = (low.directions[a, b] - high.directions[ha, hb]).abs().max()
            assert float(diff) < 1e-9


def test_corresponding_rays_factor_two():
    low, high, index_map = corresponding_rays(CameraPose(), 8, 16,
                                              dtype=torch.float64)
    sel = index_map[:, 0, 0]
    assert sel.tolist() == [2 * k for k in range(8)]
    d = (low.directions - high.directions[sel][:, sel]).abs().max()
    assert float(d) < 1e-9
