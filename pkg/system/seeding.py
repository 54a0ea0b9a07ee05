"""Stable seed derivation for reproducible runs."""

import hashlib
import json
from typing import Any

SEED_MASK = (1 << 63) - 1


def derive_seed(*parts: Any) -> int:
    """Derive a non-negative 63-bit seed from arbitrary parts.

    Python's built-in ``hash`` is salted per process, so seeds are derived
    from a SHA-256 digest of the parts' text form instead.

    Args:
        *parts: Values identifying the random stream (run seed, iteration, task id...)

    Returns:
        Integer seed usable with numpy's default_rng
    """
    tag = "|".join(str(p) for p in parts)
    return int(hashlib.sha256(tag.encode("utf-8")).hexdigest()[:16], 16) & SEED_MASK


def digest(payload: Any, length: int = 12) -> str:
    """Short hex digest of a JSON-serializable payload."""
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:length]
