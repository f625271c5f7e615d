"""
Experiment configuration. Every section is a `RecordClass` with defaults;
a JSON file is merged over the defaults section by section and the merged
result is echoed verbatim into each artifact the pipeline writes.
"""
from __future__ import annotations
import hashlib
import json
from typing import Any, Dict, Optional, Tuple
from recordclass import RecordClass
from saydream.errors import ConfigError, DatasetError


class EnvConfig(RecordClass):
    height: int = 32
    width: int = 32
    colors: Tuple[str, ...] = ('red', 'blue', 'yellow', 'green')
    min_distractors: int = 1
    max_distractors: int = 3
    max_steps: int = 120
    episodes: int = 400
    holdout_fraction: float = 0.1


class CodecConfig(RecordClass):
    factor: int = 2
    epochs: int = 20
    lr: float = 1e-2
    batch_size: int = 64
    init: str = 'random'


class WorldModelConfig(RecordClass):
    n_frames: int = 8
    width: int = 32
    heads: int = 2
    blocks: int = 2
    sigma_min: float = 0.002
    sigma_max: float = 80.0
    p: float = 7.0
    p_mean: float = 0.0
    p_std: float = 1.0
    iterations: int = 3000
    batch_size: int = 4
    lr: float = 1e-3
    weight_decay: float = 0.0
    lr_schedule: str = 'constant'
    cycle_length: int = 1000
    sample_steps: int = 35
    checkpoint_every: int = 500
    log_every: int = 50


class DistillConfig(RecordClass):
    steps: int = 8
    lam: float = 0.1
    head_taps: Tuple[int, ...] = (0, 1)
    head_channels: int = 16
    iterations: int = 1500
    batch_size: int = 2
    lr: float = 1e-4
    log_every: int = 25


class PolicyConfig(RecordClass):
    history: int = 8
    chunk: int = 8
    execute: int = 0
    q: float = 0.5
    width: int = 64
    layers: int = 2
    heads: int = 4
    iterations: int = 3000
    batch_size: int = 32
    lr: float = 1e-3
    history_mode: str = 'recent'
    redream_interval: int = 0


class EvalConfig(RecordClass):
    theta_high: float = 0.9
    theta_low: float = 0.7
    contact_radius: float = 0.04
    pixel_tolerance: float = 1.0
    comove_frames: int = 3
    coverage: float = 0.8
    detect_min: float = 0.5
    episodes: int = 50
    world_model: str = 'student'
    source: str = 'dream'
    ffd_seed: int = 1234
    ffd_dims: int = 64
    ablation_steps: Tuple[int, ...] = (1, 5, 10, 20, 35)
    ablation_clips: int = 32


_SECTIONS = {
    'env': EnvConfig,
    'codec': CodecConfig,
    'wm': WorldModelConfig,
    'distill': DistillConfig,
    'policy': PolicyConfig,
    'eval': EvalConfig,
}


def record_dict(record: RecordClass) -> Dict[str, Any]:
    return {name: (list(value) if isinstance(value, tuple) else value)
            for name, value in zip(type(record).__fields__, record)}


def _build_section(name: str, values: Dict[str, Any]) -> RecordClass:
    cls = _SECTIONS[name]
    fields = cls.__fields__
    unknown = sorted(set(values) - set(fields))
    if (unknown):
        raise ConfigError(f'Unknown keys in section "{name}": {unknown}')
    record = cls()
    for key, value in values.items():
        default = getattr(record, key)
        if (isinstance(default, tuple)):
            value = tuple(value)
        elif (isinstance(default, float) and isinstance(value, int)):
            value = float(value)
        elif (type(default) is not type(value)):
            raise ConfigError(f'{name}.{key}: expected '
                              f'{type(default).__name__}, got {value!r}')
        setattr(record, key, value)
    return record


class ExperimentConfig:
    """The full, defaulted configuration of one experiment."""

    def __init__(self, seed: int = 0, workers: int = 1,
                 sections: Optional[Dict[str, Dict[str, Any]]] = None):
        sections = sections or {}
        unknown = sorted(set(sections) - set(_SECTIONS))
        if (unknown):
            raise ConfigError(f'Unknown config sections: {unknown}')
        self.seed = seed
        self.workers = workers
        self.env: EnvConfig = _build_section('env', sections.get('env', {}))
        self.codec: CodecConfig = _build_section('codec',
                                                 sections.get('codec', {}))
        self.wm: WorldModelConfig = _build_section('wm',
                                                   sections.get('wm', {}))
        self.distill: DistillConfig = _build_section(
            'distill', sections.get('distill', {}))
        self.policy: PolicyConfig = _build_section('policy',
                                                   sections.get('policy', {}))
        self.eval: EvalConfig = _build_section('eval',
                                               sections.get('eval', {}))
        self._validate()

    def _validate(self) -> None:
        if (self.wm.n_frames < 2):
            raise ConfigError('wm.n_frames must be at least 2')
        if (not 1 <= self.env.min_distractors <= self.env.max_distractors
                <= 3):
            raise ConfigError('distractor range must lie within 1..3')
        if (self.env.height % self.codec.factor or
                self.env.width % self.codec.factor):
            raise ConfigError('frame size must be divisible by codec.factor')
        if (not 0.0 <= self.policy.q <= 1.0):
            raise ConfigError('policy.q must lie in [0, 1]')
        if (self.distill.steps < 1):
            raise ConfigError('distill.steps must be positive')

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> ExperimentConfig:
        values = dict(values)
        seed = values.pop('seed', 0)
        workers = values.pop('workers', 1)
        return cls(seed=seed, workers=workers, sections=values)

    @classmethod
    def load(cls, path: Optional[str] = None,
             seed: Optional[int] = None) -> ExperimentConfig:
        """
        Load a JSON config file merged over the defaults (or the defaults
        only when `path` is None). A given `seed` overrides the file's.
        """
        values: Dict[str, Any] = {}
        if (path is not None):
            try:
                with open(path) as fh:
                    values = json.load(fh)
            except OSError as e:
                raise DatasetError(path, f'cannot read config: {e}')
            except json.JSONDecodeError as e:
                raise ConfigError(f'{path}: invalid JSON: {e}')
        config = cls.from_dict(values)
        if (seed is not None):
            config.seed = seed
        return config

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {'seed': self.seed, 'workers': self.workers}
        for name in _SECTIONS:
            out[name] = record_dict(getattr(self, name))
        return out

    def dump(self, path: str) -> None:
        with open(path, 'w') as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)


def stage_seed(global_seed: int, stage: str) -> int:
    """
    Derive the seed of one pipeline stage from the global seed: the first
    8 bytes (little-endian) of sha256("<seed>:<stage>") masked to 63 bits.
    """
    digest = hashlib.sha256(f'{global_seed}:{stage}'.encode('utf-8')).digest()
    return int.from_bytes(digest[:8], 'little') & ((1 << 63) - 1)


def content_hash(path: str) -> str:
    """The git blob hash of the file at `path`."""
    try:
        with open(path, 'rb') as fh:
            data = fh.read()
    except OSError as e:
        raise DatasetError(path, f'cannot hash: {e}')
    header = f'blob {len(data)}\0'.encode('utf-8')
    return hashlib.sha1(header + data).hexdigest()
