"""
### config.py
#### Functions:
    - RunConfig
    - load_config
    - apply_overrides
    - config_hash
    - section_hash

One YAML document holds every tunable of a run. Sections mirror the dataclasses below; unknown
keys and out-of-range values raise ConfigError before any work starts.
"""

import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

import yaml

from brainvidpy._tools.tools import sha256_bytes
from brainvidpy.diffusion.denoiser import FREEZE_MODES
from brainvidpy.diffusion.schedule import SCHEDULES
from brainvidpy.errors import ConfigError
from brainvidpy.interpret.attention import TOKEN_SCORES
from brainvidpy.phase1.augment import MASK_MODES

RUN_ROOT_ENV = "BRAINVIDPY_RUN_ROOT"
CODEC_KINDS = ('trained', 'identity')


@dataclass
class DataSection:
    n_samples: int = 1000
    n_categories: int = 50
    n_voxels: int = 256
    window: int = 2
    frames_per_fmri: int = 6
    height: int = 32
    width: int = 32
    hemodynamic_lag: int = 4
    noise_sigma: float = 0.5
    overlap: float = 0.56
    val_fraction: float = 0.2
    test_fraction: float = 0.2
    speed: float = 1.0
    subject_id: int = 0
    classifier_per_class: int = 8


@dataclass
class EncoderSection:
    patch_size: int = 16
    layers: int = 6
    embed_dim: int = 64
    heads: int = 4
    mlp_ratio: float = 2.0
    proj_rows: int = 8
    proj_dim: int = 32


@dataclass
class PretrainSection:
    enabled: bool = True
    mask_ratio: float = 0.75
    steps: int = 500
    lr: float = 1e-3
    batch_size: int = 32


@dataclass
class AugmentSection:
    gamma_spa: float = 0.2
    gamma_tem: float = 1 / 3
    mode: str = 'channels'
    normalize: bool = False


@dataclass
class Phase1Section:
    mu_spa: float = 1.0
    mu_tem: float = 1.0
    temperature: float = 0.07
    batch_size: int = 16
    steps: int = 2000
    lr: float = 1e-3
    literal_pairing: bool = False
    shuffle_pairing: bool = False
    log_every: int = 100


@dataclass
class CodecSection:
    kind: str = 'trained'
    latent_channels: int = 8
    hidden: int = 32
    steps: int = 1000
    lr: float = 2e-3
    batch_size: int = 64


@dataclass
class DiffusionSection:
    T: int = 1000
    schedule: str = 'linear'
    dependent_noise: bool = True
    beta: float = 0.5
    steps: int = 2000
    lr: float = 1e-3
    batch_size: int = 8
    finetune_encoder: bool = False
    freeze: str = 'none'
    channels: list[int] = field(default_factory=lambda: [32, 64])
    heads: int = 4
    temporal_window: int = 2
    time_dim: int = 64
    groups: int = 8
    log_every: int = 100

    @property
    def effective_beta(self) -> float:
        """beta, or 0 (independent frame noise) when dependent noise is off."""
        return self.beta if self.dependent_noise else 0.0


@dataclass
class DecodeSection:
    ddim_steps: int = 50
    eta: float = 0.0
    batch_size: int = 16
    export_clips: int = 4


@dataclass
class EvalSection:
    n_way: int = 50
    top_k: int = 1
    video_n_way: int = 50
    trials: int = 100
    classifier_steps: int = 1500
    gate: float = 0.9
    time_average: bool = True


@dataclass
class InterpretSection:
    mode: str = 'received'
    max_samples: int = 64


@dataclass
class RunConfig:
    name: str = 'default'
    seed: int = 0
    data: DataSection = field(default_factory=DataSection)
    encoder: EncoderSection = field(default_factory=EncoderSection)
    pretrain: PretrainSection = field(default_factory=PretrainSection)
    augment: AugmentSection = field(default_factory=AugmentSection)
    phase1: Phase1Section = field(default_factory=Phase1Section)
    codec: CodecSection = field(default_factory=CodecSection)
    diffusion: DiffusionSection = field(default_factory=DiffusionSection)
    decode: DecodeSection = field(default_factory=DecodeSection)
    eval: EvalSection = field(default_factory=EvalSection)
    interpret: InterpretSection = field(default_factory=InterpretSection)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict | None) -> "RunConfig":
        config = _build(cls, data or {}, "")
        validate(config)
        return config


def _coerce(path: str, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path} must be true or false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"{path} must be an integer, got {value!r}")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path} must be a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{path} must be a string, got {value!r}")
        return value
    if isinstance(default, list):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path} must be a list, got {value!r}")
        return [_coerce(f"{path}[{i}]", v, default[0]) for i, v in enumerate(value)] if default else list(value)
    return value


def _build(cls, data: dict, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(f"section '{prefix or 'root'}' must be a mapping")
    instance = cls()
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(prefix + k for k in unknown)}")
    for key, value in data.items():
        default = getattr(instance, key)
        if is_dataclass(default):
            setattr(instance, key, _build(type(default), value, f"{prefix}{key}."))
        else:
            setattr(instance, key, _coerce(prefix + key, value, default))
    return instance


def _check(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def validate(config: RunConfig) -> None:
    """Range checks across the whole config."""
    d, e, a, p1, df, ev = config.data, config.encoder, config.augment, config.phase1, config.diffusion, config.eval
    _check(d.n_categories >= 2, "data.n_categories must be >= 2")
    _check(d.window >= 2, "data.window must be >= 2")
    _check(d.n_voxels >= 4 * e.patch_size, "data.n_voxels must be >= 4 * encoder.patch_size")
    _check(d.height % 8 == 0 and d.width % 8 == 0, "data.height and data.width must be multiples of 8")
    _check(d.noise_sigma >= 0, "data.noise_sigma must be >= 0")
    _check(0 <= d.overlap <= 1, "data.overlap must be in [0, 1]")
    _check(0 < d.val_fraction < 1 and 0 < d.test_fraction < 1, "split fractions must be in (0, 1)")
    _check(e.layers >= 3, "encoder.layers must be >= 3 for first/middle/last interpretation")
    _check(e.embed_dim % e.heads == 0, "encoder.embed_dim must be divisible by encoder.heads")
    _check(0 < config.pretrain.mask_ratio < 1, "pretrain.mask_ratio must be in (0, 1)")
    _check(0 <= a.gamma_spa <= 1 and 0 <= a.gamma_tem <= 1, "augment ratios must be in [0, 1]")
    _check(a.mode in MASK_MODES, f"augment.mode must be one of {MASK_MODES}")
    _check(p1.temperature > 0, "phase1.temperature must be > 0")
    _check(p1.mu_spa >= 0 and p1.mu_tem >= 0, "phase1 loss weights must be >= 0")
    _check(p1.batch_size >= 2, "phase1.batch_size must be >= 2")
    _check(config.codec.kind in CODEC_KINDS, f"codec.kind must be one of {CODEC_KINDS}")
    _check(config.codec.latent_channels > 3, "codec.latent_channels must be > 3 (block means plus detail)")
    _check(df.T >= 2, "diffusion.T must be >= 2")
    _check(df.schedule in SCHEDULES, f"diffusion.schedule must be one of {sorted(SCHEDULES)}")
    _check(0 <= df.beta <= 1, "diffusion.beta must be in [0, 1]")
    _check(df.freeze in FREEZE_MODES, f"diffusion.freeze must be one of {FREEZE_MODES}")
    _check(len(df.channels) == 2, "diffusion.channels needs two widths")
    _check(df.temporal_window >= 1, "diffusion.temporal_window must be >= 1")
    _check(1 <= config.decode.ddim_steps <= df.T, "decode.ddim_steps must be in 1..diffusion.T")
    _check(config.decode.eta >= 0, "decode.eta must be >= 0")
    _check(2 <= ev.n_way <= d.n_categories, "eval.n_way must be in 2..data.n_categories")
    _check(2 <= ev.video_n_way <= 4 * d.n_categories, "eval.video_n_way must be in 2..4 * data.n_categories")
    _check(1 <= ev.top_k <= min(ev.n_way, ev.video_n_way), "eval.top_k must be in 1..N")
    _check(ev.trials >= 1, "eval.trials must be >= 1")
    _check(config.interpret.mode in TOKEN_SCORES, f"interpret.mode must be one of {sorted(TOKEN_SCORES)}")


def load_config(path: str | Path | None=None, overrides: list[str] | None=None) -> RunConfig:
    """Reads a YAML config (defaults when `path` is None) and applies dotted overrides."""
    data = {}
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return RunConfig.from_dict(apply_overrides(data, overrides or []))


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Applies ``section.key=value`` strings; values are parsed as YAML scalars."""
    data = yaml.safe_load(yaml.safe_dump(data)) or {}
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"override '{item}' is not of the form key=value")
        parts = [p.replace("-", "_") for p in key.strip().lstrip("-").split(".")]
        node = data
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override '{item}' descends into a scalar")
        node[parts[-1]] = yaml.safe_load(raw)
    return data


def dump_config(config: RunConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=True)


def config_hash(config: RunConfig) -> str:
    return sha256_bytes(dump_config(config).encode("utf-8"))


def section_hash(config: RunConfig, sections: tuple[str, ...]) -> str:
    """Hash of the named sections only; stages use it to decide whether they are stale."""
    part = {name: getattr(config, name) for name in sections}
    part = {k: asdict(v) if is_dataclass(v) else v for k, v in part.items()}
    return sha256_bytes(yaml.safe_dump(part, sort_keys=True).encode("utf-8"))


def run_root(explicit: str | Path | None=None) -> Path:
    return Path(explicit or os.environ.get(RUN_ROOT_ENV, "runs"))
