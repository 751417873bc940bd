"""Translation backends behind one tiny interface.

A backend exposes ``identity`` (a stable label) and ``translate(request)``.
Three implementations are provided: a live HTTP client for a hosted
translation API, a persistent JSON-lines cache wrapper, and a deterministic
degradation simulator for offline experiments.  Identity requests
(source == target) are short-circuited by :func:`translate` and never reach
a backend.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import random
import threading
import time
import unicodedata
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import urlsplit

import requests

from .catalog import Catalog, max_tree_distance, tree_distance


class BackendError(Exception):
    """Base class for translation backend failures."""


class TransportError(BackendError):
    """Network-level failure that persisted through all retries."""


class AuthenticationError(BackendError):
    """Missing or rejected credentials."""


class UnsupportedPairError(BackendError):
    """The backend cannot translate between the requested languages."""


class RateLimitExhaustedError(BackendError):
    """The service kept throttling until the retry budget ran out."""


class CacheIntegrityError(Exception):
    """A cache store record failed to parse or verify."""


@dataclass(frozen=True)
class TranslationRequest:
    text: str
    source: str
    target: str


@dataclass(frozen=True)
class BackendConfig:
    endpoint: str = "https://translation.googleapis.com/language/translate/v2"
    api_key_env: str = "TRANSLATE_API_KEY"
    rate_limit: float = 8.0
    max_attempts: int = 4
    backoff_base: float = 0.5
    timeout: float = 20.0

    def __post_init__(self):
        if self.rate_limit <= 0:
            raise ValueError("rate_limit must be > 0")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


def translate(backend, request: TranslationRequest) -> str:
    """Dispatch a request, serving identity pairs locally."""
    if request.source == request.target:
        return request.text
    return backend.translate(request)


class RateLimiter:
    """Sliding-window limiter: at most ceil(rate) grants in any 1 s window.

    Clock and sleep are injectable so the guarantee is testable without
    real waiting.  Thread-safe; intended to be shared process-wide.
    """

    def __init__(self, rate: float, clock=time.monotonic, sleep=time.sleep):
        if rate <= 0:
            raise ValueError("rate must be > 0")
        self.max_per_second = math.ceil(rate)
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._grants: deque[float] = deque()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                while self._grants and now - self._grants[0] >= 1.0:
                    self._grants.popleft()
                if len(self._grants) < self.max_per_second:
                    self._grants.append(now)
                    return
                wait = 1.0 - (now - self._grants[0])
            self._sleep(max(wait, 0.0))


class GoogleV2Backend:
    """Client for a v2-style hosted translation endpoint.

    Credentials come only from the environment variable named in the
    config; they are never stored or echoed.  Transport and throttling
    errors are retried with exponential backoff and jitter; unsupported
    pairs and rejected credentials fail immediately.
    """

    def __init__(self, config: BackendConfig, session=None, limiter=None,
                 sleep=time.sleep, rng: random.Random | None = None):
        key = os.environ.get(config.api_key_env)
        if not key:
            raise AuthenticationError(
                f"credential environment variable {config.api_key_env!r} is not set"
            )
        self.config = config
        self.identity = f"google-v2:{urlsplit(config.endpoint).netloc}"
        self._key = key
        self._session = session if session is not None else requests.Session()
        self._limiter = limiter if limiter is not None else RateLimiter(config.rate_limit)
        self._sleep = sleep
        self._rng = rng if rng is not None else random.Random()

    def translate(self, request: TranslationRequest) -> str:
        throttled = False
        for attempt in range(1, self.config.max_attempts + 1):
            self._limiter.acquire()
            try:
                response = self._session.post(
                    self.config.endpoint,
                    data={
                        "q": request.text,
                        "source": request.source,
                        "target": request.target,
                        "format": "text",
                        "key": self._key,
                    },
                    timeout=self.config.timeout,
                )
            except requests.RequestException as exc:
                if attempt == self.config.max_attempts:
                    raise TransportError(f"request failed after {attempt} attempts: {exc}") from exc
                self._backoff(attempt)
                continue

            status = response.status_code
            if status == 200:
                try:
                    return response.json()["data"]["translations"][0]["translatedText"]
                except (ValueError, LookupError, TypeError) as exc:
                    raise TransportError(f"malformed translation response: {exc}") from exc
            if status in (401, 403):
                raise AuthenticationError(f"service rejected credentials (HTTP {status})")
            if status == 400:
                raise UnsupportedPairError(
                    f"service rejected pair {request.source}->{request.target}: "
                    f"{_error_message(response)}"
                )
            if status == 429:
                throttled = True
            if attempt == self.config.max_attempts:
                if throttled:
                    raise RateLimitExhaustedError(
                        f"still throttled after {attempt} attempts (HTTP {status})"
                    )
                raise TransportError(f"HTTP {status} after {attempt} attempts")
            self._backoff(attempt)
        raise TransportError("retry loop exited unexpectedly")

    def _backoff(self, attempt: int) -> None:
        delay = self.config.backoff_base * (2 ** (attempt - 1))
        self._sleep(delay * (0.5 + self._rng.random() / 2))


def _error_message(response) -> str:
    try:
        return response.json()["error"]["message"]
    except Exception:
        return response.text[:200]


def _text_digest(text: str) -> str:
    normalized = unicodedata.normalize("NFC", text)
    return hashlib.sha256(normalized.encode("utf-8")).hexdigest()


class TranslationCache:
    """Append-only JSON-lines store of translation responses.

    One record per line: key, response text, backend identity, timestamp,
    and a checksum.  Duplicate keys are allowed on disk (append-only);
    the latest record wins and :meth:`compact` rewrites the log to one
    record per key.  Reads are lock-free after load; writes are serialized.
    """

    def __init__(self, directory: str | Path):
        self._dir = Path(directory)
        self._dir.mkdir(parents=True, exist_ok=True)
        self._path = self._dir / "cache.jsonl"
        self._lock = threading.Lock()
        self._records: dict[str, str] = {}
        self._disk_lines = 0
        if self._path.exists():
            self._load()

    @staticmethod
    def key_for(backend_identity: str, request: TranslationRequest) -> str:
        return "|".join(
            [backend_identity, request.source, request.target, _text_digest(request.text)]
        )

    def _load(self) -> None:
        for lineno, line in enumerate(
            self._path.read_text(encoding="utf-8").splitlines(), start=1
        ):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                key, text, check = record["key"], record["text"], record["check"]
            except (ValueError, KeyError, TypeError) as exc:
                raise CacheIntegrityError(f"{self._path}:{lineno}: bad record: {exc}") from exc
            if check != self._checksum(key, text):
                raise CacheIntegrityError(f"{self._path}:{lineno}: checksum mismatch")
            self._records[key] = text
            self._disk_lines += 1

    @staticmethod
    def _checksum(key: str, text: str) -> str:
        return hashlib.sha256(f"{key}\x1f{text}".encode("utf-8")).hexdigest()[:16]

    def get(self, key: str) -> str | None:
        return self._records.get(key)

    def put(self, key: str, text: str, backend_identity: str) -> None:
        record = {
            "key": key,
            "text": text,
            "backend": backend_identity,
            "ts": time.time(),
            "check": self._checksum(key, text),
        }
        line = json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n"
        with self._lock:
            with open(self._path, "a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()
            self._records[key] = text
            self._disk_lines += 1

    def compact(self) -> None:
        """Rewrite the log keeping one (latest) record per key."""
        with self._lock:
            if self._disk_lines == len(self._records):
                return
            tmp = self._path.with_suffix(".jsonl.tmp")
            with open(tmp, "w", encoding="utf-8") as fh:
                for key in sorted(self._records):
                    text = self._records[key]
                    record = {
                        "key": key,
                        "text": text,
                        "backend": key.split("|", 1)[0],
                        "ts": time.time(),
                        "check": self._checksum(key, text),
                    }
                    fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
            tmp.replace(self._path)
            self._disk_lines = len(self._records)

    def __len__(self) -> int:
        return len(self._records)


def cached_translate(cache: TranslationCache, backend, request: TranslationRequest) -> str:
    """Serve from the cache, delegating (and persisting) on the first miss.

    Backend errors propagate and are never cached.
    """
    key = cache.key_for(backend.identity, request)
    hit = cache.get(key)
    if hit is not None:
        return hit
    text = backend.translate(request)
    cache.put(key, text, backend.identity)
    return text


class CachedBackend:
    """Transparent memoizing wrapper around another backend."""

    def __init__(self, inner, cache: TranslationCache):
        self.inner = inner
        self.cache = cache
        self.identity = inner.identity

    def translate(self, request: TranslationRequest) -> str:
        return cached_translate(self.cache, self.inner, request)


@dataclass(frozen=True)
class SimulatorParams:
    """Knobs for the deterministic degradation simulator.

    Per-word deletion and substitution probabilities are the coefficients
    scaled by the normalized tree distance of the language pair, so
    distant pairs degrade text faster than close ones.
    """

    seed: int = 0
    deletion_coefficient: float = 0.03
    substitution_coefficient: float = 0.08
    distance_normalizer: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.deletion_coefficient <= 1.0:
            raise ValueError("deletion_coefficient must be in [0, 1]")
        if not 0.0 <= self.substitution_coefficient <= 1.0:
            raise ValueError("substitution_coefficient must be in [0, 1]")
        if self.distance_normalizer is not None and self.distance_normalizer <= 0:
            raise ValueError("distance_normalizer must be > 0")


class SimulatorBackend:
    """Deterministic word-level degradation stand-in for a real service.

    Each word is independently dropped or replaced by a stable
    pseudo-synonym with probabilities that grow with the tree distance of
    the pair.  Output depends only on (params.seed, request): no call
    ordering, no shared state, never more words than the input.
    """

    def __init__(self, catalog: Catalog, params: SimulatorParams | None = None):
        self.catalog = catalog
        self.params = params if params is not None else SimulatorParams()
        self._normalizer = (
            self.params.distance_normalizer
            if self.params.distance_normalizer is not None
            else float(max_tree_distance(catalog))
        )
        self._seed_key = self.params.seed.to_bytes(8, "big", signed=True)
        self.identity = (
            f"simulator:seed={self.params.seed}"
            f";del={self.params.deletion_coefficient}"
            f";sub={self.params.substitution_coefficient}"
            f";norm={self._normalizer}"
        )

    def translate(self, request: TranslationRequest) -> str:
        if request.source not in self.catalog or request.target not in self.catalog:
            missing = request.source if request.source not in self.catalog else request.target
            raise UnsupportedPairError(f"language {missing!r} not in catalog")
        distance = tree_distance(self.catalog, request.source, request.target)
        scaled = min(max(distance / self._normalizer, 0.0), 1.0)
        if scaled == 0.0:
            return request.text
        p_delete = min(self.params.deletion_coefficient * scaled, 1.0)
        p_substitute = min(self.params.substitution_coefficient * scaled, 1.0)
        digest = _text_digest(request.text)
        out: list[str] = []
        for i, word in enumerate(request.text.split()):
            u_delete, u_substitute = self._word_draws(request, digest, i, word)
            if u_delete < p_delete:
                continue
            if u_substitute < p_substitute:
                out.append(self._pseudo_synonym(word, request.target))
            else:
                out.append(word)
        return " ".join(out)

    def _word_draws(self, request: TranslationRequest, digest: str, index: int, word: str):
        material = f"{request.source}|{request.target}|{digest}|{index}|{word}"
        h = hashlib.blake2b(material.encode("utf-8"), key=self._seed_key, digest_size=16)
        raw = h.digest()
        u1 = int.from_bytes(raw[:8], "big") / 2**64
        u2 = int.from_bytes(raw[8:], "big") / 2**64
        return u1, u2

    def _pseudo_synonym(self, word: str, target: str) -> str:
        normalized = unicodedata.normalize("NFC", word).lower()
        h = hashlib.blake2b(
            f"syn|{target}|{normalized}".encode("utf-8"),
            key=self._seed_key,
            digest_size=10,
        ).digest()
        length = 3 + h[0] % 6
        return "".join(chr(ord("a") + b % 26) for b in h[1 : 1 + length])


def simulate_translate(params: SimulatorParams, catalog: Catalog,
                       request: TranslationRequest) -> str:
    """One-shot simulator call (builds a backend and translates)."""
    return SimulatorBackend(catalog, params).translate(request)
