"""Small shared helpers: worker pool sizing, config hashing, float text I/O."""
from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor

WORKERS_ENV = "QCOARSE_WORKERS"


def worker_count(default: int = 1) -> int:
    """Worker count for parallel scans, from the QCOARSE_WORKERS env var."""
    raw = os.environ.get(WORKERS_ENV, "")
    if not raw:
        return default
    try:
        n = int(raw)
    except ValueError:
        return default
    return max(1, n)


def parallel_map(fn, items, workers=None):
    """Map preserving order; threads only when more than one worker requested.

    The heavy callees release the GIL (LAPACK, compiled kernels), so threads
    are enough and keep results picklable-free and deterministic.
    """
    items = list(items)
    if workers is None:
        workers = worker_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def fmt_float(x) -> str:
    """Shortest decimal text that round-trips a float64 exactly."""
    return format(float(x), ".17g")


def config_hash(payload) -> str:
    """Stable short hash of a configuration mapping (stamped into outputs)."""
    if isinstance(payload, dict):
        text = ";".join(f"{k}={payload[k]}" for k in sorted(payload))
    else:
        text = str(payload)
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def text_hash(text: str) -> str:
    """Short content hash of a string (e.g. a serialized model)."""
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def file_hash(path) -> str:
    """Short content hash of a file, used to tie samples to their model."""
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()[:12]
