"""Shared fixtures and independent reference helpers for the test suite."""
import numpy as np
import pytest

from somcell import IncidenceMatrix, load_problem1

# Expected two-cell grouping of the bundled demo instance (0-based indices).
P1_MACHINE_CELLS = (frozenset({0, 2, 4, 8, 9}), frozenset({1, 3, 5, 6, 7}))
P1_PART_FAMILIES = (frozenset({0, 1, 9}), frozenset(range(2, 9)))


@pytest.fixture(scope="session")
def problem1() -> IncidenceMatrix:
    return load_problem1()


def naive_bmu(codebook, x):
    """Reference best-matching-unit scan, written independently of the package."""
    best, best_d = 0, None
    for i in range(len(codebook)):
        d = 0.0
        for j in range(len(x)):
            diff = codebook[i][j] - x[j]
            d += diff * diff
        if best_d is None or d < best_d:
            best, best_d = i, d
    return best


def random_incidence(rng, parts, machines, density=0.4):
    """Random binary matrix with no empty rows or columns."""
    while True:
        v = (rng.random((parts, machines)) < density).astype(np.uint8)
        if v.sum(axis=1).min() > 0 and v.sum(axis=0).min() > 0:
            return v


def planted_instance(rng, side=6, k_range=(2, 3), max_flips=2, min_run=2):
    """Block-diagonal matrix with planted cells, light bit noise, then shuffled.

    Blocks are at least min_run wide on both axes; instances that would end
    up with an empty row or column are resampled rather than repaired so the
    distribution stays clean.
    """
    hi = min(k_range[1], side // min_run)  # k blocks need k*min_run slots
    while True:
        k = int(rng.integers(k_range[0], hi + 1))

        def runs(n):
            while True:
                cuts = np.sort(rng.choice(np.arange(1, n), size=k - 1, replace=False))
                edges = np.concatenate([[0], cuts, [n]])
                if np.diff(edges).min() >= min_run:
                    return edges

        pe, me = runs(side), runs(side)
        v = np.zeros((side, side), dtype=np.uint8)
        for b in range(k):
            v[pe[b]:pe[b + 1], me[b]:me[b + 1]] = 1
        for _ in range(int(rng.integers(0, max_flips + 1))):
            i, j = int(rng.integers(side)), int(rng.integers(side))
            v[i, j] ^= 1
        if (v.sum(axis=1) == 0).any() or (v.sum(axis=0) == 0).any():
            continue
        rp, cp = rng.permutation(side), rng.permutation(side)
        return v[rp][:, cp]


def random_assignment(rng, parts, machines, k):
    """Random cell assignment using every id on both sides."""
    while True:
        pf = rng.integers(1, k + 1, size=parts)
        mc = rng.integers(1, k + 1, size=machines)
        if len(set(pf.tolist())) == k and len(set(mc.tolist())) == k:
            return tuple(int(x) for x in pf), tuple(int(x) for x in mc)


_ACCEPT_RESULTS = {}


def pytest_runtest_logreport(report):
    if "test_acceptance" in report.nodeid and report.when == "call":
        name = report.nodeid.rsplit("::", 1)[-1]
        _ACCEPT_RESULTS[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPT_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPT_RESULTS):
        verdict = "PASS" if _ACCEPT_RESULTS[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict}  {name}")
