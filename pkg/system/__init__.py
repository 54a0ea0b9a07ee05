from .errors import TandemError, ConfigError
from .config import (
    Settings, RolloutConfig, GrpoConfig, RemoteConfig, SynthConfig, BenchConfig,
    BATCH_PRESETS, load_settings,
)
from .logs import setup_logging, get_logger, kv
from .seeding import derive_seed, digest
from .storage import JsonlWriter, canonical_json, read_json, read_jsonl, write_json
from .workers import WorkerPool

__all__ = [
    'TandemError', 'ConfigError',
    'Settings', 'RolloutConfig', 'GrpoConfig', 'RemoteConfig', 'SynthConfig', 'BenchConfig',
    'BATCH_PRESETS', 'load_settings',
    'setup_logging', 'get_logger', 'kv',
    'derive_seed', 'digest',
    'JsonlWriter', 'canonical_json', 'read_json', 'read_jsonl', 'write_json',
    'WorkerPool',
]
