"""Small shared helpers: config files, hashing, percentages, parallel map."""

import hashlib
import multiprocessing

from .model import ConfigError, PipelineConfig


def read_key_values(path) -> dict:
    """Parse a `key = value` file; '#' starts a comment, blank lines ignored."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, _, value = text.partition("=")
            out[key.strip()] = value.strip()
    return out


def load_config(path) -> PipelineConfig:
    return PipelineConfig.from_dict(read_key_values(path))


def config_hash(config: PipelineConfig) -> str:
    """Stable short fingerprint of the configuration actually used."""
    blob = "\n".join(config.to_lines()).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def percent(part: int, whole: int) -> float:
    """Share of `part` in `whole` as a percentage rounded to one decimal."""
    if whole <= 0:
        raise ConfigError("percentage of a non-positive total")
    return round(100.0 * part / whole, 1)


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def parallel_map(func, items, threads: int = 1, chunksize: int = 1):
    """Order-preserving map over `items`, forking `threads` workers if > 1.

    Falls back to a plain loop for one worker so tracebacks stay readable and
    tiny inputs skip the fork cost. Results are in input order either way,
    which keeps downstream output byte-identical across worker counts.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with multiprocessing.Pool(processes=threads) as pool:
        return pool.map(func, items, chunksize=max(1, chunksize))
