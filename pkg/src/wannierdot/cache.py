"""Content-addressed on-disk cache for pipeline stage outputs.

Layout: ``<root>/<stage>/<hash>.bin`` (pickled payload) and ``<hash>.meta``
(text: key fields, format version, payload digest, creation time).
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import pickle
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


def _canonical(value):
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _canonical(v) for k, v in sorted(value.items())}
    return value


@dataclass(frozen=True)
class StageKey:
    stage: str
    fields: tuple  # sorted (name, value) pairs

    @classmethod
    def make(cls, stage: str, **fields) -> "StageKey":
        return cls(stage, tuple(sorted(fields.items())))

    def serialize(self) -> str:
        body = {"stage": self.stage, "version": FORMAT_VERSION, "fields": {k: _canonical(v) for k, v in self.fields}}
        return json.dumps(body, sort_keys=True, separators=(",", ":"))

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.serialize().encode()).hexdigest()[:32]


class StageCache:
    def __init__(self, root):
        self.root = Path(root)
        self.hits = 0
        self.misses = 0

    def _paths(self, key: StageKey):
        d = self.root / key.stage
        return d / f"{key.digest}.bin", d / f"{key.digest}.meta"

    def _verified_bytes(self, key: StageKey, warn: bool) -> bytes:
        bin_path, meta_path = self._paths(key)
        if not bin_path.exists() or not meta_path.exists():
            raise KeyError(key.stage)
        data = bin_path.read_bytes()
        meta = dict(line.split("=", 1) for line in meta_path.read_text().splitlines() if "=" in line)
        if meta.get("version") != str(FORMAT_VERSION) or meta.get("key") != key.serialize():
            raise KeyError(key.stage)
        if meta.get("sha256") != hashlib.sha256(data).hexdigest():
            if warn:
                logger.warning("corrupt cache entry %s/%s; recomputing", key.stage, key.digest)
            raise KeyError(key.stage)
        return data

    def load(self, key: StageKey):
        """Return the cached payload or raise KeyError (also for corrupt entries)."""
        return pickle.loads(self._verified_bytes(key, warn=True))

    def store(self, key: StageKey, value) -> None:
        bin_path, meta_path = self._paths(key)
        try:
            self._verified_bytes(key, warn=False)
            return  # a valid entry exists: first writer wins
        except (KeyError, OSError):
            pass
        bin_path.parent.mkdir(parents=True, exist_ok=True)
        data = pickle.dumps(value, protocol=4)
        meta = (f"key={key.serialize()}\nversion={FORMAT_VERSION}\n"
                f"sha256={hashlib.sha256(data).hexdigest()}\ncreated={time.strftime('%Y-%m-%dT%H:%M:%S')}\n")
        _atomic_write(bin_path, data)
        _atomic_write(meta_path, meta.encode())


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run_stage(key: StageKey, producer, cache: StageCache | None = None):
    """Return the cached output for ``key`` or compute, store and return it."""
    if cache is None:
        return producer()
    try:
        value = cache.load(key)
    except KeyError:
        pass
    except Exception:  # unreadable pickle
        logger.warning("unreadable cache entry %s/%s; recomputing", key.stage, key.digest)
    else:
        cache.hits += 1
        return value
    cache.misses += 1
    value = producer()
    cache.store(key, value)
    return value
