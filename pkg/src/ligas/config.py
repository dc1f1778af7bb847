"""Reproducibility plumbing: seed sub-streams, config files, digests.

All randomness in the pipeline flows from one 64-bit seed. Each consumer
draws from a named sub-stream so that, say, adding an extra generator call
cannot shift the training shuffle.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import DataError

# the five sentence categories the pipeline analyzes
CATEGORIES = ("CIA", "RAA", "SVA", "SVO", "WHE")


def sub_seed(seed: int, stream: str) -> int:
    """Derive the 64-bit seed of a named sub-stream from the global seed."""
    digest = hashlib.sha256(f"{seed:#x}:{stream}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def stream_rng(seed: int, stream: str) -> np.random.Generator:
    """PCG64 generator for a named sub-stream (model-init, train-shuffle, gen, split)."""
    return np.random.default_rng(sub_seed(seed, stream))


def parse_config_file(path: str) -> dict[str, str]:
    """Read a flat ``key = value`` config file.

    Blank lines and ``#`` comments are ignored. Keys mirror CLI flag names
    with underscores (``d_model = 32``). Values stay as strings; the CLI
    coerces them where flags would.
    """
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DataError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if not key:
                raise DataError(f"{path}:{lineno}: empty key")
            values[key] = value.strip()
    return values


def config_digest(values: dict[str, object]) -> str:
    """12-hex digest of the semantically relevant configuration.

    Output paths are excluded by the callers so that two runs that differ
    only in their destination directory still produce identical bytes.
    """
    canonical = "\n".join(f"{k}={values[k]}" for k in sorted(values))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]
