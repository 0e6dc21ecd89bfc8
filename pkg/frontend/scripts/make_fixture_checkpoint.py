"""Write a small untrained checkpoint for service-level viewer tests.

The wire-protocol checks (frame-hash replay, mixing endpoints, latency
header) only need a deterministic model behind the service, not a
trained one, so this builds the smallest configuration that still has
several upsampling stages and saves it immediately.

Usage: python3 make_fixture_checkpoint.py OUT.pt
"""

import dataclasses
import sys

from stylefield.config import PipelineConfig
from stylefield.trainer import Trainer, save_checkpoint


def fixture_config() -> PipelineConfig:
    cfg = PipelineConfig()
    cfg.styles = dataclasses.replace(cfg.styles, z_dim=32, w_dim=32,
                                     mapping_layers=2)
    cfg.field_cfg = dataclasses.replace(cfg.field_cfg, hidden_fg=32,
                                        hidden_bg=16, n_sigma=2, n_c=4,
                                        n_bg=2, fourier_L=4)
    cfg.sampling = dataclasses.replace(cfg.sampling, n_coarse=8,
                                       n_importance=4, n_background=4)
    cfg.generator = dataclasses.replace(cfg.generator, base_resolution=16,
                                        target_resolution=64,
                                        channel_base=1024, channel_max=64,
                                        blocks_per_stage=1)
    cfg.dataset = dataclasses.replace(cfg.dataset, size=16, resolution=64)
    cfg.train = dataclasses.replace(cfg.train, batch_size=2)
    return cfg


def perturb_styles(module, seed: int) -> None:
    """Give the style pathway a visible effect.

    Freshly initialized modulation weights are zero (styles start
    neutral), which would make every seed render the same image and
    defeat the seed/mixing checks. A small seeded perturbation makes
    distinct seeds produce distinct frames.
    """
    import torch

    g = torch.Generator().manual_seed(seed)
    for m in module.modules():
        if hasattr(m, "affine") and isinstance(m.affine, torch.nn.Linear):
            with torch.no_grad():
                m.affine.weight.copy_(
                    0.3 * torch.randn(m.affine.weight.shape, generator=g))


def main() -> None:
    out = sys.argv[1]
    trainer = Trainer(fixture_config())
    perturb_styles(trainer.generator, seed=1)
    perturb_styles(trainer.g_ema, seed=1)
    save_checkpoint(out, trainer)
    print(out)


if __name__ == "__main__":
    main()
