"""Sentence embedders: a signed feature-hashing encoder plus cached and HTTP-backed providers.

The built-in encoder lowercases the text, extracts word unigrams and
character trigrams of ``'^' + text + '$'``, hashes each feature with 64-bit
FNV-1a and adds ``+1``/``-1`` (bit 63 of the hash) at ``hash % dim``. The
result is L2-normalised unless it is all zeros.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import urllib.error
import urllib.request
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import CacheCorrupt, DimensionMismatch, ProviderUnavailable

DEFAULT_DIM = 256
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1
_SIGN_BIT = 1 << 63

# Feature namespaces keep a word from colliding with the identical trigram.
WORD_PREFIX = "w:"
TRIGRAM_PREFIX = "c:"

KINDS = ("hashed", "cached", "external")


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


def features(text: str) -> list[str]:
    text = text.lower()
    feats = [WORD_PREFIX + w for w in text.split()]
    if text:
        padded = "^" + text + "$"
        feats.extend(TRIGRAM_PREFIX + padded[i:i + 3] for i in range(len(padded) - 2))
    return feats


@lru_cache(maxsize=65536)
def _embed_tuple(text: str, dim: int) -> tuple[float, ...]:
    counts = [0] * dim
    for feat in features(text):
        h = fnv1a_64(feat.encode("utf-8"))
        counts[h % dim] += -1 if h & _SIGN_BIT else 1
    norm = math.sqrt(math.fsum(c * c for c in counts))
    if norm == 0.0:
        return tuple(0.0 for _ in counts)
    return tuple(c / norm for c in counts)


def embed(text: str, dim: int = DEFAULT_DIM) -> np.ndarray:
    """Embed ``text`` with the hashing encoder. Returns a read-only float64 array."""
    if dim < 8:
        raise ValueError("dim must be >= 8")
    vec = np.array(_embed_tuple(text, dim), dtype=np.float64)
    vec.setflags(write=False)
    return vec


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatch(f"{u.shape} vs {v.shape}")
    nu = math.sqrt(float(np.dot(u, u)))
    nv = math.sqrt(float(np.dot(v, v)))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v)) / (nu * nv)


@dataclass(frozen=True)
class ProviderConfig:
    kind: str = "hashed"
    dimension: int = DEFAULT_DIM
    cache_path: str | None = None
    endpoint: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown provider kind {self.kind!r}")
        if self.dimension < 8:
            raise ValueError("dimension must be >= 8")
        if self.kind == "external" and not self.endpoint:
            raise ValueError("external provider requires an endpoint")
        if self.kind == "cached" and not self.cache_path:
            raise ValueError("cached provider requires a cache_path")

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def fingerprint(self) -> str:
        # Cache location does not change the vectors, so it is left out.
        source = f"external:{self.endpoint}" if self.endpoint else "hashed-fnv1a64"
        blob = json.dumps({"source": source, "dim": self.dimension}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


class HashedProvider:
    def __init__(self, dim: int = DEFAULT_DIM):
        self.config = ProviderConfig("hashed", dim)
        self.dim = dim

    @property
    def fingerprint(self) -> str:
        return self.config.fingerprint

    def embed(self, text: str) -> np.ndarray:
        return embed(text, self.dim)

    def embed_many(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dim))
        return np.vstack([self.embed(t) for t in texts])


class ExternalProvider:
    """Client for an embedding server.

    The server takes ``POST {"texts": [...]}`` and answers
    ``{"vectors": [[...], ...]}``.
    """

    def __init__(self, endpoint: str, dim: int = DEFAULT_DIM, timeout: float = 30.0):
        self.config = ProviderConfig("external", dim, endpoint=endpoint)
        self.dim = dim
        self.timeout = timeout

    @property
    def fingerprint(self) -> str:
        return self.config.fingerprint

    def embed_many(self, texts: Sequence[str]) -> np.ndarray:
        texts = list(texts)
        if not texts:
            return np.zeros((0, self.dim))
        body = json.dumps({"texts": texts}).encode("utf-8")
        req = urllib.request.Request(self.config.endpoint, data=body, method="POST",
                                     headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise ProviderUnavailable(f"{self.config.endpoint}: {exc}") from exc
        vectors = payload.get("vectors") if isinstance(payload, dict) else None
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise ProviderUnavailable("malformed response from embedding server")
        out = np.asarray(vectors, dtype=np.float64)
        if out.ndim != 2 or out.shape[1] != self.dim:
            raise DimensionMismatch(f"server returned shape {out.shape}, expected dim {self.dim}")
        return out

    def embed(self, text: str) -> np.ndarray:
        return self.embed_many([text])[0]


def _checksum(values: Sequence[float]) -> str:
    return hashlib.sha256(np.asarray(values, dtype="<f8").tobytes()).hexdigest()


def text_key(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class CachedProvider:
    """Wraps another provider with an append-only JSONL vector cache.

    One line per text: ``{"text_sha256", "dim", "values", "checksum"}``;
    ``checksum`` is the sha256 of the little-endian float64 bytes of ``values``.
    """

    def __init__(self, inner, cache_path):
        self.inner = inner
        self.dim = inner.dim
        self.cache_path = os.fspath(cache_path)
        self.config = ProviderConfig("cached", inner.dim, cache_path=self.cache_path,
                                     endpoint=inner.config.endpoint)
        self._vectors: dict[str, np.ndarray] = {}
        self.hits = 0
        self.misses = 0
        self._load()

    @property
    def fingerprint(self) -> str:
        return self.config.fingerprint

    def _load(self):
        if not os.path.exists(self.cache_path):
            return
        with open(self.cache_path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    key, dim, values = obj["text_sha256"], obj["dim"], obj["values"]
                except (ValueError, KeyError, TypeError) as exc:
                    raise CacheCorrupt(f"{self.cache_path}:{lineno}: {exc}") from exc
                if dim != self.dim or len(values) != dim:
                    raise DimensionMismatch(f"{self.cache_path}:{lineno}: dim {dim}")
                if obj.get("checksum") != _checksum(values):
                    raise CacheCorrupt(f"{self.cache_path}:{lineno}: checksum mismatch")
                vec = np.asarray(values, dtype=np.float64)
                vec.setflags(write=False)
                self._vectors[key] = vec

    def _append(self, rows: Iterable[tuple[str, np.ndarray]]):
        with open(self.cache_path, "a", encoding="utf-8") as fh:
            for key, vec in rows:
                values = [float(x) for x in vec]
                fh.write(json.dumps({"text_sha256": key, "dim": self.dim, "values": values,
                                     "checksum": _checksum(values)}) + "\n")

    def embed_many(self, texts: Sequence[str]) -> np.ndarray:
        keys = [text_key(t) for t in texts]
        missing = sorted({k: t for k, t in zip(keys, texts) if k not in self._vectors}.items())
        self.hits += len(texts) - len(missing)
        self.misses += len(missing)
        if missing:
            computed = self.inner.embed_many([t for _, t in missing])
            rows = []
            for (key, _), vec in zip(missing, computed):
                vec = np.array(vec, dtype=np.float64)
                vec.setflags(write=False)
                self._vectors[key] = vec
                rows.append((key, vec))
            self._append(rows)
        if not texts:
            return np.zeros((0, self.dim))
        return np.vstack([self._vectors[k] for k in keys])

    def embed(self, text: str) -> np.ndarray:
        return self.embed_many([text])[0]


def make_provider(config: ProviderConfig | None = None):
    config = config or ProviderConfig()
    if config.kind == "hashed":
        return HashedProvider(config.dimension)
    if config.kind == "external":
        return ExternalProvider(config.endpoint, config.dimension)
    inner = (ExternalProvider(config.endpoint, config.dimension) if config.endpoint
             else HashedProvider(config.dimension))
    return CachedProvider(inner, config.cache_path)


def embed_cached(text: str, provider) -> np.ndarray:
    """Embed through ``provider`` (a config or a provider instance)."""
    if isinstance(provider, ProviderConfig):
        provider = make_provider(provider)
    return provider.embed(text)
