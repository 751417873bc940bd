"""Independent oracles and scripted test backends shared across the suite.

The oracles deliberately avoid the library's code paths: the scorer
enumerates subsequences with naive list counting, and the fit oracle is a
dense grid scan.
"""

from __future__ import annotations

import numpy as np


def brute_force_gleu(candidate: list[str], reference: list[str], n_max: int = 4) -> float:
    """Plain enumeration scorer used as the ground truth for GLEU."""

    def all_subsequences(tokens):
        grams = []
        for n in range(1, n_max + 1):
            for i in range(len(tokens) - n + 1):
                grams.append(tuple(tokens[i : i + n]))
        return grams

    cand_grams = all_subsequences(candidate)
    ref_grams = all_subsequences(reference)
    if not cand_grams and not ref_grams:
        return 1.0
    if not cand_grams or not ref_grams:
        return 0.0
    matches = 0
    for gram in set(cand_grams) | set(ref_grams):
        matches += min(cand_grams.count(gram), ref_grams.count(gram))
    precision = matches / len(cand_grams)
    recall = matches / len(ref_grams)
    return min(precision, recall)


def grid_fit_oracle(points: list[tuple[int, float]], step: float = 1e-5,
                    lower: float = 0.0, upper: float = 10.0) -> float:
    """Best alpha on a dense grid, found by coarse scan plus local refinement.

    The refinement window spans several coarse steps on each side of the
    coarse minimum, so the result equals a full grid scan at `step`
    resolution for any curve whose objective is not pathologically jagged.
    """
    t = np.array([p[0] for p in points], dtype=float)
    v = np.array([p[1] for p in points], dtype=float)

    def rmse_at(alphas: np.ndarray) -> np.ndarray:
        model = (t[None, :] + 1.0) ** (-alphas[:, None])
        return np.sqrt(np.mean((v[None, :] - model) ** 2, axis=1))

    coarse_step = 1e-3
    coarse = np.arange(lower, upper + coarse_step, coarse_step)
    errors = rmse_at(coarse)
    center = coarse[int(np.argmin(errors))]
    lo = max(lower, center - 5 * coarse_step)
    hi = min(upper, center + 5 * coarse_step)
    fine = np.arange(lo, hi + step, step)
    return float(fine[int(np.argmin(rmse_at(fine)))])


class ScriptedBackend:
    """Backend returning pre-scripted outputs keyed by (text, source, target)."""

    def __init__(self, script: dict[tuple[str, str, str], str], identity: str = "scripted"):
        self.script = dict(script)
        self.identity = identity
        self.calls = 0

    def translate(self, request):
        self.calls += 1
        key = (request.text, request.source, request.target)
        if key not in self.script:
            raise KeyError(f"no scripted output for {key!r}")
        return self.script[key]


class EchoBackend:
    """Backend that returns the input text unchanged (identity hops)."""

    def __init__(self, identity: str = "echo"):
        self.identity = identity
        self.calls = 0

    def translate(self, request):
        self.calls += 1
        return request.text


class CountingBackend:
    """Transparent wrapper that counts delegated translate calls."""

    def __init__(self, inner):
        self.inner = inner
        self.identity = inner.identity
        self.calls = 0

    def translate(self, request):
        self.calls += 1
        return self.inner.translate(request)


class ExplodingBackend:
    """Backend that must never be reached."""

    identity = "exploding"

    def translate(self, request):
        raise AssertionError("backend should not have been called")
