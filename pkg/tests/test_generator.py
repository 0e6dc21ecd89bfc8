import pytest
import torch

from stylefield.camera import CameraPose
from stylefield.generator import Generator, MixingSpec, density_grid
from stylefield.trainer import build_models

from conftest import tiny_config


def make_gen(**kw):
    cfg = tiny_config(**kw)
    gen, _ = build_models(cfg, seed=0)
    gen.eval()
    return gen, cfg


def randomize_modulation(gen, seed=0):
    """Fresh modulation affines are zero (style-neutral); give them
    weight so styles actually influence the output."""
    from stylefield.field import ModulatedLinear
    g = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for m in gen.modules():
            if isinstance(m, ModulatedLinear):
                m.affine.weight.copy_(
                    0.3 * torch.randn(m.affine.weight.shape, generator=g))
    return gen


def style_for(gen, seed):
    g = torch.Generator().manual_seed(seed)
    z = torch.randn(1, gen.style_cfg.z_dim, generator=g)
    with torch.no_grad():
        return gen.mapping(z)[0]


def test_style_layer_accounting():
    gen, cfg = make_gen()
    labels = gen.style_layer_labels()
    assert len(labels) == gen.num_style_layers
    # density-affecting rows all sit before the aggregation index
    agg = gen.aggregation_layer_index
    assert agg == cfg.field_cfg.n_sigma + cfg.field_cfg.n_bg
    assert all(l.startswith(("fg_block", "bg_block")) for l in labels[:agg])
    assert not any(l.startswith(("fg_block", "bg_block")) for l in labels[agg:])


def test_active_architecture_plan():
    gen, _ = make_gen()
    plan = gen.active_architecture(64)
    assert plan.active_stages == 2
    assert plan.stage_resolutions == [16, 32, 64]
    with pytest.raises(ValueError):
        gen.active_architecture(48)


def test_synthesize_shapes_all_resolutions():
    gen, _ = make_gen()
    w = style_for(gen, 0)
    for res in (16, 32, 64):
        with torch.no_grad():
            out = gen.synthesize(w, CameraPose(), active_resolution=res)
        assert out.image.shape == (res, res, 3)
        assert out.depth.shape == (16, 16)
        assert out.alpha.shape == (16, 16)


def test_synthesize_deterministic():
    gen, _ = make_gen(sampling={"stratified": False})
    w = style_for(gen, 1)
    with torch.no_grad():
        a = gen.synthesize(w, CameraPose(theta=0.1), active_resolution=32)
        b = gen.synthesize(w, CameraPose(theta=0.1), active_resolution=32)
    assert torch.equal(a.image, b.image)
    assert torch.equal(a.depth, b.depth)


def test_synthesize_responds_to_style_and_pose():
    gen, _ = make_gen(sampling={"stratified": False})
    randomize_modulation(gen)
    wa, wb = style_for(gen, 1), style_for(gen, 2)
    with torch.no_grad():
        ia = gen.synthesize(wa, CameraPose(), active_resolution=32).image
        ib = gen.synthesize(wb, CameraPose(), active_resolution=32).image
        ic = gen.synthesize(wa, CameraPose(phi=0.6), active_resolution=32).image
    assert not torch.equal(ia, ib)
    assert not torch.equal(ia, ic)


def test_nerf_rgb_path_available():
    gen, _ = make_gen(sampling={"stratified": False})
    w = style_for(gen, 1)
    with torch.no_grad():
        out = gen.synthesize(w, CameraPose(), active_resolution=32,
                             want_nerf_rgb=True)
    assert out.low_res_rgb.shape == (16, 16, 3)


def test_mixing_endpoints_reproduce_pure_styles():
    gen, _ = make_gen(sampling={"stratified": False})
    randomize_modulation(gen)
    wa, wb = style_for(gen, 1), style_for(gen, 2)
    n = gen.num_style_layers
    with torch.no_grad():
        pure_a = gen.synthesize(wa, CameraPose(), active_resolution=32).image
        pure_b = gen.synthesize(wb, CameraPose(), active_resolution=32).image
        at_max = gen.synthesize(
            MixingSpec(style_a=wa, style_b=wb, crossover_layer=n),
            CameraPose(), active_resolution=32).image
        at_zero = gen.synthesize(
            MixingSpec(style_a=wa, style_b=wb, crossover_layer=0),
            CameraPose(), active_resolution=32).image
    assert torch.equal(at_max, pure_a)
    assert torch.equal(at_zero, pure_b)


def test_depth_bitwise_invariant_past_aggregation():
    gen, _ = make_gen(sampling={"stratified": False})
    randomize_modulation(gen)
    wa = style_for(gen, 1)
    agg = gen.aggregation_layer_index
    with torch.no_grad():
        base = gen.synthesize(wa, CameraPose(), active_resolution=32)
        for seed_b in (2, 3):
            wb = style_for(gen, seed_b)
            mixed = gen.synthesize(
                MixingSpec(style_a=wa, style_b=wb, crossover_layer=agg),
                CameraPose(), active_resolution=32)
            assert torch.equal(mixed.depth, base.depth)
            assert not torch.equal(mixed.image, base.image)


def test_fade_blends_between_stages():
    gen, _ = make_gen(sampling={"stratified": False})
    w = style_for(gen, 1)
    with torch.no_grad():
        lo = gen.synthesize(w, CameraPose(), active_resolution=32,
                            fade_alpha=0.0).image
        hi = gen.synthesize(w, CameraPose(), active_resolution=32,
                            fade_alpha=1.0).image
        mid = gen.synthesize(w, CameraPose(), active_resolution=32,
                             fade_alpha=0.5).image
    assert torch.allclose(mid, 0.5 * (lo + hi), atol=1e-5)


def test_density_grid_shapes_and_sphere_support():
    gen, _ = make_gen()
    w = style_for(gen, 1)
    grid = density_grid(gen.field, w, 9)
    assert grid.shape == (9, 9, 9)
    assert bool((grid >= 0).all())
    assert float(grid[0, 0, 0]) == 0.0     # corner is outside the sphere


def test_geometry_noise_mode_runs_and_is_seeded():
    gen, cfg = make_gen(generator={"noise_mode": "geometry_aware",
                                   "noise_grid_cap": 16},
                        sampling={"stratified": False})
    w = style_for(gen, 1)
    with torch.no_grad():
        a = gen.synthesize(w, CameraPose(), active_resolution=32, noise_seed=7)
        b = gen.synthesize(w, CameraPose(), active_resolution=32, noise_seed=7)
        c = gen.synthesize(w, CameraPose(), active_resolution=32, noise_seed=8)
    assert torch.equal(a.image, b.image)
    assert not torch.equal(a.image, c.image)


def test_insert_upsampler_variant_ignores_fade():
    gen, _ = make_gen(generator={"progressive_kind": "insert_upsampler"},
                      sampling={"stratified": False})
    w = style_for(gen, 1)
    with torch.no_grad():
        a = gen.synthesize(w, CameraPose(), active_resolution=32,
                           fade_alpha=0.3).image
        b = gen.synthesize(w, CameraPose(), active_resolution=32,
                           fade_alpha=1.0).image
    assert torch.equal(a, b)


def test_bad_style_shape_rejected():
    gen, _ = make_gen()
    with pytest.raises(ValueError):
        gen.synthesize(torch.zeros(3, 32, 32), CameraPose(),
                       active_resolution=16)
