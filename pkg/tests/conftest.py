import dataclasses

import pytest
import torch

from stylefield.config import PipelineConfig


def tiny_config(**kw) -> PipelineConfig:
    """A small configuration that keeps test runtimes in the seconds."""
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
    cfg.train = dataclasses.replace(cfg.train, batch_size=2, log_every=1)
    cfg.schedule = dataclasses.replace(cfg.schedule, t1=4, t2=16, t3=32)
    for section, changes in kw.items():
        setattr(cfg, section, dataclasses.replace(getattr(cfg, section),
                                                  **changes))
    return cfg


@pytest.fixture
def cfg():
    return tiny_config()


@pytest.fixture
def rng():
    return torch.Generator().manual_seed(0)


# ---------------------------------------------------------------------------
# acceptance-criteria reporting
# ---------------------------------------------------------------------------
import contextlib


@pytest.fixture
def criterion(request):
    """Record one pass/fail line per acceptance criterion; the lines are
    echoed verbatim in the terminal summary."""
    lines = getattr(request.config, "_criterion_lines", None)
    if lines is None:
        lines = request.config._criterion_lines = []

    @contextlib.contextmanager
    def _record(name):
        try:
            yield
        except Exception as exc:
            lines.append(f"[FAIL] {name} -- {type(exc).__name__}: {exc}")
            raise
        else:
            lines.append(f"[PASS] {name}")

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_criterion_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
