from __future__ import annotations

import functools

import pytest

from corpusforge.synthetic import make_synthetic_corpus


@pytest.fixture(scope="session")
def synthetic_corpus(tmp_path_factory):
    return make_synthetic_corpus(tmp_path_factory.mktemp("synthetic"))


def brute_edit_distance(a, b) -> int:
    """Plain recursive Levenshtein, memoized. Used as an independent oracle."""
    a, b = tuple(a), tuple(b)

    @functools.lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))

    return d(len(a), len(b))


def brute_best_path_weight(att) -> float:
    """Max total weight over monotone paths from token 0 to token K-1.

    Enumerates every way of splitting T frames into K nonempty runs.
    """
    import itertools

    T, K = att.shape
    best = float("-inf")
    for cuts in itertools.combinations(range(1, T), K - 1):
        bounds = (0,) + cuts + (T,)
        w = sum(att[t, k] for k in range(K) for t in range(bounds[k], bounds[k + 1]))
        best = max(best, w)
    return best


ACCEPTANCE_LINES: list = []


@pytest.fixture
def acceptance_line():
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def emit(number: int, ok, detail: str) -> bool:
        ok = bool(ok)
        line = f"[acceptance {number:2d}] {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
