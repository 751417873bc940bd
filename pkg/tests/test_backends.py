import json
import threading

import pytest

from helpers import EchoBackend, ExplodingBackend
from mtchain.backends import (
    AuthenticationError,
    BackendConfig,
    CachedBackend,
    CacheIntegrityError,
    GoogleV2Backend,
    RateLimiter,
    RateLimitExhaustedError,
    SimulatorBackend,
    SimulatorParams,
    TransportError,
    TranslationCache,
    TranslationRequest,
    UnsupportedPairError,
    cached_translate,
    translate,
)

SAMPLE = "the quick brown fox jumps over the lazy dog " * 6


def test_identity_request_never_reaches_backend():
    req = TranslationRequest("hello there", "en", "en")
    assert translate(ExplodingBackend(), req) == "hello there"


# --- simulator ---------------------------------------------------------


def test_simulator_zero_distance_is_identity(catalog):
    backend = SimulatorBackend(catalog)
    req = TranslationRequest("qualquer texto aqui", "pt", "pt")
    assert backend.translate(req) == "qualquer texto aqui"


def test_simulator_is_deterministic(catalog):
    backend = SimulatorBackend(catalog, SimulatorParams(seed=5))
    req = TranslationRequest(SAMPLE, "en", "zh")
    assert backend.translate(req) == backend.translate(req)
    again = SimulatorBackend(catalog, SimulatorParams(seed=5))
    assert again.translate(req) == backend.translate(req)


def test_simulator_seed_changes_output(catalog):
    req = TranslationRequest(SAMPLE, "en", "zh")
    outputs = {
        SimulatorBackend(catalog, SimulatorParams(seed=s)).translate(req) for s in range(8)
    }
    assert len(outputs) > 1


def test_simulator_never_gains_words(catalog):
    backend = SimulatorBackend(catalog, SimulatorParams(seed=1))
    for seed in range(30):
        text = SAMPLE
        for src, tgt in [("en", "zh"), ("zh", "en"), ("en", "hi"), ("hi", "en")]:
            out = backend.translate(TranslationRequest(text, src, tgt))
            assert len(out.split()) <= len(text.split())
            text = out


def test_simulator_distance_sensitivity(catalog):
    # low-distance pair must retain more words per hop than a high-distance
    # pair, averaged over many seeds
    text = SAMPLE
    words = len(text.split())
    retained_near = 0
    retained_far = 0
    for seed in range(120):
        near = SimulatorBackend(catalog, SimulatorParams(seed=seed))
        retained_near += len(near.translate(TranslationRequest(text, "en", "de")).split())
        retained_far += len(near.translate(TranslationRequest(text, "en", "zh")).split())
    assert retained_near / 120 / words > retained_far / 120 / words


def test_simulator_unknown_language(catalog):
    backend = SimulatorBackend(catalog)
    with pytest.raises(UnsupportedPairError):
        backend.translate(TranslationRequest("hi", "en", "xx"))


def test_simulator_pseudo_synonyms_are_stable(catalog):
    backend = SimulatorBackend(catalog, SimulatorParams(seed=3))
    a = backend._pseudo_synonym("house", "zh")
    b = backend._pseudo_synonym("house", "zh")
    c = backend._pseudo_synonym("house", "fr")
    assert a == b
    assert a != c
    assert a.isalpha() and a.islower()


def test_simulator_empty_text(catalog):
    backend = SimulatorBackend(catalog)
    assert backend.translate(TranslationRequest("", "en", "zh")) == ""


def test_simulator_params_validation():
    with pytest.raises(ValueError):
        SimulatorParams(deletion_coefficient=1.5)
    with pytest.raises(ValueError):
        SimulatorParams(substitution_coefficient=-0.1)
    with pytest.raises(ValueError):
        SimulatorParams(distance_normalizer=0.0)


# --- cache --------------------------------------------------------------


def test_cache_memoizes_repeat_requests(catalog, tmp_path):
    cache = TranslationCache(tmp_path / "cache")
    inner = SimulatorBackend(catalog, SimulatorParams(seed=2))
    backend = CachedBackend(inner, cache)
    req = TranslationRequest(SAMPLE, "en", "ru")
    first = backend.translate(req)
    calls_before = _count_sim_calls(cache)
    second = backend.translate(req)
    assert first == second
    assert _count_sim_calls(cache) == calls_before  # no new record appended


def _count_sim_calls(cache):
    return len(cache)


def test_cache_distinct_texts_distinct_keys():
    key_a = TranslationCache.key_for("b", TranslationRequest("one text", "en", "fr"))
    key_b = TranslationCache.key_for("b", TranslationRequest("other text", "en", "fr"))
    key_c = TranslationCache.key_for("b", TranslationRequest("one text", "en", "de"))
    assert len({key_a, key_b, key_c}) == 3


def test_cache_counts_backend_calls(catalog, tmp_path):
    cache = TranslationCache(tmp_path / "cache")
    echo = EchoBackend()
    req = TranslationRequest("some words", "en", "fr")
    cached_translate(cache, echo, req)
    cached_translate(cache, echo, req)
    cached_translate(cache, echo, req)
    assert echo.calls == 1


def test_cache_survives_reopen(tmp_path):
    store = tmp_path / "cache"
    cache = TranslationCache(store)
    echo = EchoBackend()
    req = TranslationRequest("persist me", "en", "fr")
    cached_translate(cache, echo, req)

    class SameIdentity:
        identity = echo.identity

        def translate(self, request):
            raise AssertionError("should be served from cache")

    reopened = TranslationCache(store)
    assert cached_translate(reopened, SameIdentity(), req) == "persist me"


def test_cache_reopen_serves_without_backend(tmp_path):
    store = tmp_path / "cache"
    cache = TranslationCache(store)
    echo = EchoBackend()
    req = TranslationRequest("persist me", "en", "fr")
    cached_translate(cache, echo, req)
    reopened = TranslationCache(store)
    hit = reopened.get(TranslationCache.key_for(echo.identity, req))
    assert hit == "persist me"


def test_cache_corrupted_record_raises(tmp_path):
    store = tmp_path / "cache"
    cache = TranslationCache(store)
    cache.put("k1", "text", "b")
    path = store / "cache.jsonl"
    record = json.loads(path.read_text().splitlines()[0])
    record["text"] = "tampered"
    path.write_text(json.dumps(record) + "\n", encoding="utf-8")
    with pytest.raises(CacheIntegrityError, match="checksum"):
        TranslationCache(store)


def test_cache_unparseable_record_raises(tmp_path):
    store = tmp_path / "cache"
    store.mkdir()
    (store / "cache.jsonl").write_text("{not json}\n", encoding="utf-8")
    with pytest.raises(CacheIntegrityError):
        TranslationCache(store)


def test_cache_transparency(catalog, tmp_path):
    inner = SimulatorBackend(catalog, SimulatorParams(seed=4))
    cached = CachedBackend(inner, TranslationCache(tmp_path / "cache"))
    requests = [
        TranslationRequest(SAMPLE, "en", "fr"),
        TranslationRequest(SAMPLE, "en", "fr"),
        TranslationRequest("short words only", "en", "zh"),
        TranslationRequest(SAMPLE, "en", "fr"),
        TranslationRequest("short words only", "en", "zh"),
    ]
    assert [cached.translate(r) for r in requests] == [inner.translate(r) for r in requests]


def test_cache_errors_are_not_cached(catalog, tmp_path):
    cache = TranslationCache(tmp_path / "cache")

    class Flaky:
        identity = "flaky"

        def __init__(self):
            self.calls = 0

        def translate(self, request):
            self.calls += 1
            if self.calls == 1:
                raise TransportError("boom")
            return "ok now"

    flaky = Flaky()
    req = TranslationRequest("x", "en", "fr")
    with pytest.raises(TransportError):
        cached_translate(cache, flaky, req)
    assert cached_translate(cache, flaky, req) == "ok now"
    assert flaky.calls == 2


def test_cache_compaction_keeps_latest(tmp_path):
    store = tmp_path / "cache"
    cache = TranslationCache(store)
    cache.put("k", "old", "b")
    cache.put("k", "new", "b")
    cache.put("other", "v", "b")
    cache.compact()
    reopened = TranslationCache(store)
    assert reopened.get("k") == "new"
    assert reopened.get("other") == "v"
    assert len((store / "cache.jsonl").read_text().splitlines()) == 2


# --- rate limiter -------------------------------------------------------


class FakeClock:
    def __init__(self):
        self.now = 0.0

    def __call__(self):
        return self.now

    def sleep(self, seconds):
        self.now += max(seconds, 1e-4)


def test_rate_limiter_bounds_sliding_window():
    clock = FakeClock()
    limiter = RateLimiter(3, clock=clock, sleep=clock.sleep)
    grants = []
    for _ in range(25):
        limiter.acquire()
        grants.append(clock.now)
        clock.now += 0.01
    for i, start in enumerate(grants):
        in_window = [g for g in grants if start <= g < start + 1.0]
        assert len(in_window) <= 3


def test_rate_limiter_threaded_window():
    clock = FakeClock()
    lock = threading.Lock()

    def locked_clock():
        with lock:
            return clock.now

    def locked_sleep(seconds):
        with lock:
            clock.now += max(seconds, 1e-4)

    limiter = RateLimiter(2.5, clock=locked_clock, sleep=locked_sleep)
    grants = []

    def worker():
        for _ in range(10):
            limiter.acquire()
            with lock:
                grants.append(clock.now)

    threads = [threading.Thread(target=worker) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for start in grants:
        assert len([g for g in grants if start <= g < start + 1.0]) <= 3  # ceil(2.5)


def test_rate_limiter_rejects_bad_rate():
    with pytest.raises(ValueError):
        RateLimiter(0)


# --- live backend (fake transport) --------------------------------------


class FakeResponse:
    def __init__(self, status_code, payload=None, text=""):
        self.status_code = status_code
        self._payload = payload
        self.text = text

    def json(self):
        if self._payload is None:
            raise ValueError("no json")
        return self._payload


class FakeSession:
    def __init__(self, responses):
        self.responses = list(responses)
        self.calls = []

    def post(self, url, data=None, timeout=None):
        self.calls.append({"url": url, "data": data, "timeout": timeout})
        action = self.responses.pop(0)
        if isinstance(action, Exception):
            raise action
        return action


def _ok(text):
    return FakeResponse(200, {"data": {"translations": [{"translatedText": text}]}})


def _backend(monkeypatch, responses, **config_kwargs):
    import requests

    monkeypatch.setenv("TRANSLATE_API_KEY", "sekrit")
    session = FakeSession(responses)
    clock = FakeClock()
    limiter = RateLimiter(100, clock=clock, sleep=clock.sleep)
    backend = GoogleV2Backend(
        BackendConfig(max_attempts=3, backoff_base=0.01, **config_kwargs),
        session=session,
        limiter=limiter,
        sleep=lambda s: None,
    )
    return backend, session


def test_live_backend_success(monkeypatch):
    backend, session = _backend(monkeypatch, [_ok("bonjour")])
    out = backend.translate(TranslationRequest("hello", "en", "fr"))
    assert out == "bonjour"
    assert session.calls[0]["data"]["q"] == "hello"
    assert session.calls[0]["data"]["source"] == "en"
    assert session.calls[0]["data"]["target"] == "fr"


def test_live_backend_requires_credentials(monkeypatch):
    monkeypatch.delenv("TRANSLATE_API_KEY", raising=False)
    with pytest.raises(AuthenticationError, match="TRANSLATE_API_KEY"):
        GoogleV2Backend(BackendConfig())


def test_live_backend_auth_rejection_not_retried(monkeypatch):
    backend, session = _backend(monkeypatch, [FakeResponse(403, {"error": {"message": "no"}})])
    with pytest.raises(AuthenticationError):
        backend.translate(TranslationRequest("hello", "en", "fr"))
    assert len(session.calls) == 1


def test_live_backend_unsupported_pair_not_retried(monkeypatch):
    backend, session = _backend(
        monkeypatch, [FakeResponse(400, {"error": {"message": "invalid target"}})]
    )
    with pytest.raises(UnsupportedPairError, match="invalid target"):
        backend.translate(TranslationRequest("hello", "en", "xx"))
    assert len(session.calls) == 1


def test_live_backend_retries_transport_errors(monkeypatch):
    import requests

    backend, session = _backend(
        monkeypatch,
        [requests.ConnectionError("down"), FakeResponse(500), _ok("tredje")],
    )
    assert backend.translate(TranslationRequest("third", "en", "sv")) == "tredje"
    assert len(session.calls) == 3


def test_live_backend_transport_exhaustion(monkeypatch):
    import requests

    backend, session = _backend(
        monkeypatch, [requests.ConnectionError("down")] * 3
    )
    with pytest.raises(TransportError):
        backend.translate(TranslationRequest("hello", "en", "fr"))
    assert len(session.calls) == 3


def test_live_backend_throttling_exhaustion(monkeypatch):
    backend, session = _backend(monkeypatch, [FakeResponse(429)] * 3)
    with pytest.raises(RateLimitExhaustedError):
        backend.translate(TranslationRequest("hello", "en", "fr"))
    assert len(session.calls) == 3


def test_live_backend_malformed_response(monkeypatch):
    backend, _ = _backend(monkeypatch, [FakeResponse(200, {"data": {}})])
    with pytest.raises(TransportError, match="malformed"):
        backend.translate(TranslationRequest("hello", "en", "fr"))


def test_backend_config_validation():
    with pytest.raises(ValueError):
        BackendConfig(rate_limit=0)
    with pytest.raises(ValueError):
        BackendConfig(max_attempts=0)
