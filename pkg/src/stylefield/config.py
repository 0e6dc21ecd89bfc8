"""Configuration dataclasses and INI-style config file loading.

Every tunable in the pipeline lives here so that a single config file
(plus CLI overrides) describes a full run.
"""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field, fields
from typing import Optional


@dataclass
class StyleConfig:
    z_dim: int = 512
    w_dim: int = 512
    mapping_layers: int = 8
    mapping_lr_multiplier: float = 0.01
    truncation_psi: float = 1.0      # 1.0 = off
    mixing_probability: float = 0.0  # training-time mixing, off by default


@dataclass
class CameraConfig:
    radius: float = 1.0
    bounding_radius: float = 1.0
    fov: float = 12.0
    near_eps: float = 1e-3
    pose_kind: str = "gaussian"   # gaussian | uniform
    pitch_mean: float = 0.0
    pitch_std: float = 0.15
    yaw_mean: float = 0.0
    yaw_std: float = 0.3
    pitch_low: float = -0.3
    pitch_high: float = 0.3
    yaw_low: float = 0.0
    yaw_high: float = 6.283185307179586


@dataclass
class FieldConfig:
    fourier_L: int = 10
    n_sigma: int = 4
    n_c: int = 8
    n_bg: int = 4
    hidden_fg: int = 256
    hidden_bg: int = 128
    use_view_dirs: bool = False
    background_start: float = 2.0   # inverse-depth boundary R
    demod_eps: float = 1e-8
    sigma_bias: float = -2.5        # density-head bias: near-transparent start

    def __post_init__(self):
        if not (self.n_c > self.n_sigma >= 1):
            raise ValueError(
                f"color branch depth must exceed density branch depth "
                f"(got n_c={self.n_c}, n_sigma={self.n_sigma})")
        if self.hidden_fg < 1 or self.hidden_bg < 1:
            raise ValueError("hidden widths must be >= 1")


@dataclass
class SamplingConfig:
    n_coarse: int = 32
    n_importance: int = 32
    n_background: int = 16
    stratified: bool = True

    def __post_init__(self):
        if self.n_coarse < 1 or self.n_importance < 0 or self.n_background < 0:
            raise ValueError("invalid sample counts")


@dataclass
class UpsamplerConfig:
    kind: str = "hybrid"   # hybrid | bilinear | coordinate


@dataclass
class GeneratorConfig:
    base_resolution: int = 32
    target_resolution: int = 256
    channel_base: int = 32768     # channels(res) = min(channel_max, channel_base/res)
    channel_max: int = 512
    blocks_per_stage: int = 2
    noise_mode: str = "none"      # none | geometry_aware
    noise_std: float = 1.0
    noise_grid_cap: int = 64
    progressive_kind: str = "grow"   # grow | insert_upsampler

    def __post_init__(self):
        if self.target_resolution < self.base_resolution:
            raise ValueError("target resolution below base resolution")
        r = self.base_resolution
        while r < self.target_resolution:
            r *= 2
        if r != self.target_resolution:
            raise ValueError("target must be a power-of-two multiple of base")

    def channels(self, res: int) -> int:
        return min(self.channel_max, self.channel_base // res)

    @property
    def num_stages(self) -> int:
        n = 0
        r = self.base_resolution
        while r < self.target_resolution:
            r *= 2
            n += 1
        return n

    def resolutions(self) -> list[int]:
        out = [self.base_resolution]
        while out[-1] < self.target_resolution:
            out.append(out[-1] * 2)
        return out


@dataclass
class LossConfig:
    r1_weight: float = 0.5
    nerf_path_weight: float = 0.2
    nerf_path_pixels: int = 64
    r1_interval: int = 16

    def __post_init__(self):
        if self.r1_weight < 0 or self.nerf_path_weight < 0:
            raise ValueError("loss weights must be nonnegative")
        if self.nerf_path_pixels < 1:
            raise ValueError("nerf_path_pixels must be >= 1")


@dataclass
class ScheduleConfig:
    t1: int = 5_000
    t2: int = 50_000
    t3: int = 250_000

    def __post_init__(self):
        if not (0 < self.t1 < self.t2 <= self.t3):
            raise ValueError("milestones must satisfy 0 < T1 < T2 <= T3")


@dataclass
class DatasetConfig:
    source: str = "synthetic_spheres"   # synthetic_spheres | image_folder
    path: str = ""
    resolution: int = 64
    size: int = 512
    center_crop: bool = True
    seed: int = 0


@dataclass
class TrainConfig:
    batch_size: int = 8
    lr: float = 0.0025
    adam_beta1: float = 0.0
    adam_beta2: float = 0.99
    # Optionally tanh-squash fakes to the data range before the
    # discriminator. Off by default: the squash halves the generator's
    # pixel gradients and measurably degrades recovered geometry, while
    # scale drift is already held in check by R1 regularization.
    squash_fakes: bool = False
    ema_halflife_images: int = 500
    total_steps: int = 2000
    seed: int = 0
    dtype: str = "float32"   # float32 | float64
    log_every: int = 10


@dataclass
class ServiceConfig:
    port: int = 8000
    render_budget_ms: int = 10_000


@dataclass
class PipelineConfig:
    """Everything needed to build, train and serve a model."""
    styles: StyleConfig = field(default_factory=StyleConfig)
    camera: CameraConfig = field(default_factory=CameraConfig)
    field_cfg: FieldConfig = field(default_factory=FieldConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    upsampler: UpsamplerConfig = field(default_factory=UpsamplerConfig)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)


_SECTIONS = {
    "styles": ("styles", StyleConfig),
    "camera": ("camera", CameraConfig),
    "field": ("field_cfg", FieldConfig),
    "sampling": ("sampling", SamplingConfig),
    "upsampler": ("upsampler", UpsamplerConfig),
    "generator": ("generator", GeneratorConfig),
    "loss": ("loss", LossConfig),
    "schedule": ("schedule", ScheduleConfig),
    "dataset": ("dataset", DatasetConfig),
    "train": ("train", TrainConfig),
    "service": ("service", ServiceConfig),
}


def _coerce(value: str, typ):
    if typ is bool:
        v = value.strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    return typ(value)


def load_config(path: Optional[str] = None,
                overrides: Optional[dict[str, dict[str, str]]] = None) -> PipelineConfig:
    """Build a PipelineConfig from an INI file plus override mapping.

    ``overrides`` is {section: {key: raw string}} and takes precedence
    over the file; both layers sit on top of the dataclass defaults.
    """
    raw: dict[str, dict[str, str]] = {}
    if path is not None:
        parser = configparser.ConfigParser()
        parser.optionxform = str
        read = parser.read(path)
        if not read:
            raise FileNotFoundError(path)
        for section in parser.sections():
            raw.setdefault(section, {}).update(dict(parser[section]))
    for section, kv in (overrides or {}).items():
        raw.setdefault(section, {}).update(kv)

    cfg = PipelineConfig()
    for section, kv in raw.items():
        if section not in _SECTIONS:
            raise KeyError(f"unknown config section [{section}]")
        attr, cls = _SECTIONS[section]
        current = dataclasses.asdict(getattr(cfg, attr))
        typemap = {f.name: f.type for f in fields(cls)}
        pytypes = {f.name: type(getattr(cls(), f.name)) for f in fields(cls)}
        for key, value in kv.items():
            if key not in typemap:
                raise KeyError(f"unknown key {key!r} in section [{section}]")
            current[key] = _coerce(value, pytypes[key])
        setattr(cfg, attr, cls(**current))
    return cfg


def save_config(cfg: PipelineConfig, path: str) -> None:
    parser = configparser.ConfigParser()
    parser.optionxform = str
    for section, (attr, _) in _SECTIONS.items():
        parser[section] = {k: str(v) for k, v in dataclasses.asdict(getattr(cfg, attr)).items()}
    with open(path, "w") as fh:
        parser.write(fh)


def config_to_dict(cfg: PipelineConfig) -> dict:
    return {section: dataclasses.asdict(getattr(cfg, attr))
            for section, (attr, _) in _SECTIONS.items()}


def config_from_dict(d: dict) -> PipelineConfig:
    cfg = PipelineConfig()
    for section, kv in d.items():
        attr, cls = _SECTIONS[section]
        setattr(cfg, attr, cls(**kv))
    return cfg
