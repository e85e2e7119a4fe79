"""On-disk cache for explicit reference solutions.

Entries are keyed by a hash of the defining parameters so a cached file is
never reused for a different setup.  The cache directory comes from the
SOLHEAT_CACHE_DIR environment variable and defaults to ``refcache/``.
"""

import hashlib
import os
from pathlib import Path

import numpy as np

__all__ = ["cache_dir", "reference_key", "reference_path", "load_reference",
           "save_reference"]


def cache_dir():
    return Path(os.environ.get("SOLHEAT_CACHE_DIR", "refcache"))


def reference_key(kind, **params):
    """Stable hash of a reference-run description."""
    items = " ".join(f"{k}={params[k]!r}" for k in sorted(params))
    digest = hashlib.sha256(f"{kind} {items}".encode()).hexdigest()
    return f"{kind}-{digest[:16]}"


def reference_path(key):
    return cache_dir() / f"{key}.npz"


def load_reference(key):
    """Cached field for ``key``, or None when absent."""
    path = reference_path(key)
    if not path.exists():
        return None
    with np.load(path) as data:
        return {name: data[name] for name in data.files}


def save_reference(key, **arrays):
    d = cache_dir()
    d.mkdir(parents=True, exist_ok=True)
    tmp = reference_path(key).with_suffix(".tmp.npz")
    np.savez(tmp, **arrays)
    os.replace(tmp, reference_path(key))
    return reference_path(key)
