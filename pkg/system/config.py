"""Settings dataclasses and loading from YAML files and the environment."""

import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

import yaml
from dotenv import load_dotenv

from .errors import ConfigError

# prompts x trajectories per batch
BATCH_PRESETS: Dict[str, Tuple[int, int]] = {
    "8x32": (8, 32),
    "16x16": (16, 16),
    "32x16": (32, 16),
    "8x64": (8, 64),
}

ESTIMATORS = ("unbiased", "partition")


@dataclass
class RolloutConfig:
    """Episode and group sampling settings."""
    max_turns: int = 40
    group_size: int = 64
    prompts_per_batch: int = 8
    worker_cap: int = 8
    retry_count: int = 3
    user_visibility: str = "full"  # "full" or "results"

    def __post_init__(self):
        if self.max_turns < 1:
            raise ConfigError("max_turns must be >= 1")
        if self.group_size < 2:
            raise ConfigError("group_size must be >= 2")
        if self.prompts_per_batch < 1:
            raise ConfigError("prompts_per_batch must be >= 1")
        if self.worker_cap < 1:
            raise ConfigError("worker_cap must be >= 1")
        if self.retry_count < 0:
            raise ConfigError("retry_count must be >= 0")
        if self.user_visibility not in ("full", "results"):
            raise ConfigError(f"unknown user_visibility {self.user_visibility!r}")


@dataclass
class GrpoConfig:
    """Clipped-surrogate training knobs."""
    epsilon: float = 0.2
    group_size: int = 8
    prompts_per_batch: int = 4
    dynamic_filter: bool = True
    learning_rate: float = 2.0
    iterations: int = 300
    epochs: int = 1
    seed: int = 0
    max_turns: int = 12
    worker_cap: int = 1

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError("epsilon must lie in (0, 1)")
        if self.group_size < 2:
            raise ConfigError("group_size must be >= 2")
        if self.prompts_per_batch < 1:
            raise ConfigError("prompts_per_batch must be >= 1")
        if self.learning_rate < 0.0:
            raise ConfigError("learning_rate must be >= 0")
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.max_turns < 1:
            raise ConfigError("max_turns must be >= 1")

    @classmethod
    def from_preset(cls, name: str, **overrides: Any) -> "GrpoConfig":
        """Build a config from a named ``prompts x trajectories`` preset."""
        if name not in BATCH_PRESETS:
            raise ConfigError(f"unknown batch preset {name!r}")
        prompts, trajs = BATCH_PRESETS[name]
        return cls(prompts_per_batch=prompts, group_size=trajs, **overrides)


@dataclass
class RemoteConfig:
    """Chat-completion endpoint settings."""
    base_url: Optional[str] = None
    model: str = "gpt-4.1"
    api_key_env: str = "TANDEM_API_KEY"
    timeout: float = 60.0
    retry_count: int = 3
    max_in_flight: int = 8
    temperature: float = 1.0

    def __post_init__(self):
        if self.timeout <= 0:
            raise ConfigError("timeout must be positive")
        if self.retry_count < 0:
            raise ConfigError("retry_count must be >= 0")
        if self.max_in_flight < 1:
            raise ConfigError("max_in_flight must be >= 1")

    def api_key(self) -> Optional[str]:
        return os.getenv(self.api_key_env) or os.getenv("OPENAI_API_KEY")


@dataclass
class SynthConfig:
    """Three-phase synthesis settings."""
    k_sets: int = 4
    pilot_batch_size: int = 5
    max_pilot_iterations: int = 16
    max_repairs: int = 3
    audit_rate: float = 0.2
    n_target: int = 50
    infeasibility_max: float = 0.10
    validity_min: float = 0.95
    stability_delta: float = 0.05
    drift_window: int = 20
    max_turns: int = 30
    worker_cap: int = 4
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.k_sets <= 64:
            raise ConfigError("k_sets must lie in [1, 64]")
        if not 5 <= self.pilot_batch_size <= 20:
            raise ConfigError("pilot_batch_size must lie in [5, 20]")
        if not 1 <= self.max_pilot_iterations <= 16:
            raise ConfigError("max_pilot_iterations must lie in [1, 16]")
        if not 1 <= self.max_repairs <= 3:
            raise ConfigError("max_repairs must lie in [1, 3]")
        if not 0.0 <= self.audit_rate <= 1.0:
            raise ConfigError("audit_rate must lie in [0, 1]")
        if self.n_target < 1:
            raise ConfigError("n_target must be >= 1")
        if self.drift_window < 2:
            raise ConfigError("drift_window must be >= 2")


@dataclass
class BenchConfig:
    """Benchmark trial settings."""
    n_trials: int = 4
    ks: Tuple[int, ...] = (1, 2, 3, 4)
    estimator: str = "unbiased"
    max_turns: int = 40
    worker_cap: int = 4

    def __post_init__(self):
        self.ks = tuple(int(k) for k in self.ks)
        if self.n_trials < 1:
            raise ConfigError("n_trials must be >= 1")
        if not self.ks or min(self.ks) < 1:
            raise ConfigError("ks must be positive")
        if max(self.ks) > self.n_trials:
            raise ConfigError(f"k={max(self.ks)} exceeds n_trials={self.n_trials}")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"unknown estimator {self.estimator!r}")


@dataclass
class Settings:
    """All settings sections."""
    rollout: RolloutConfig = field(default_factory=RolloutConfig)
    grpo: GrpoConfig = field(default_factory=GrpoConfig)
    remote: RemoteConfig = field(default_factory=RemoteConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


_SECTIONS = {
    "rollout": RolloutConfig,
    "grpo": GrpoConfig,
    "remote": RemoteConfig,
    "synth": SynthConfig,
    "bench": BenchConfig,
}


def _build_section(name: str, values: Mapping[str, Any]):
    cls = _SECTIONS[name]
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {', '.join(unknown)}")
    try:
        return cls(**dict(values))
    except TypeError as e:
        raise ConfigError(f"invalid [{name}] section: {e}") from e


def load_settings(path: Optional[str] = None,
                  environ: Optional[Mapping[str, str]] = None) -> Settings:
    """Load settings from an optional YAML file plus environment overrides.

    Args:
        path: YAML file with top-level sections rollout/grpo/remote/synth/bench
        environ: Environment mapping, defaults to ``os.environ`` after loading ``.env``

    Returns:
        Validated Settings
    """
    if environ is None:
        load_dotenv(override=False)
        environ = os.environ

    raw: Dict[str, Any] = {}
    if path:
        config_path = Path(path)
        if not config_path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = yaml.safe_load(config_path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"could not parse {path}: {e}") from e
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a mapping of sections")

    unknown = sorted(set(raw) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown config sections: {', '.join(unknown)}")

    remote = dict(raw.get("remote") or {})
    if environ.get("TANDEM_BASE_URL"):
        remote["base_url"] = environ["TANDEM_BASE_URL"]
    if environ.get("TANDEM_MODEL"):
        remote["model"] = environ["TANDEM_MODEL"]
    raw["remote"] = remote

    return Settings(**{name: _build_section(name, raw.get(name) or {}) for name in _SECTIONS})
