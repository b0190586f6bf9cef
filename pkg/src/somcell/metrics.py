"""Grouping quality measures for cell assignments.

Two scores over the diagonal blocks an assignment induces: grouping
efficiency (weighted mix of in-block density and off-block sparsity) and
grouping efficacy, kept as an exact rational so assignments can be ranked
without float noise. A brute-force oracle finds the true optimum on small
instances for calibration.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import kernels

ORACLE_MAX_PARTS = 10
ORACLE_MAX_MACHINES = 10
ORACLE_MAX_CELLS = 3


class OracleSizeError(ValueError):
    """Instance exceeds the exhaustive oracle's enumeration bounds."""


@dataclass(frozen=True)
class BlockCounts:
    """Raw tallies of a matrix against an assignment's diagonal blocks.

    Entry (p, j) is in-block iff part p's family id equals machine j's cell
    id. ``n1`` counts all ones, ``n1_out`` the exceptional ones outside any
    block, ``n0_in`` the voids (zeros inside a block).
    """

    n1: int
    n1_out: int
    n0_in: int
    in_block_elements: int
    total_elements: int


def count_blocks(data, assignment) -> BlockCounts:
    part_family = np.asarray(assignment.part_family, dtype=np.int64)
    machine_cell = np.asarray(assignment.machine_cell, dtype=np.int64)
    values = data.values
    if part_family.shape[0] != values.shape[0] or machine_cell.shape[0] != values.shape[1]:
        raise ValueError("assignment does not match the matrix dimensions")
    in_block = part_family[:, None] == machine_cell[None, :]
    n1 = int(values.sum())
    n1_in = int(values[in_block].sum())
    in_elements = int(in_block.sum())
    return BlockCounts(
        n1=n1,
        n1_out=n1 - n1_in,
        n0_in=in_elements - n1_in,
        in_block_elements=in_elements,
        total_elements=int(values.size),
    )


def grouping_efficacy(counts: BlockCounts) -> Fraction:
    """(n1 - n1_out) / (n1 + n0_in), exact.

    1 exactly when the blocks are perfect (no exceptions, no voids); falls
    with every exceptional one and every void.
    """
    if counts.n1 < 1:
        raise ValueError("efficacy is undefined for a matrix with no ones")
    return Fraction(counts.n1 - counts.n1_out, counts.n1 + counts.n0_in)


def efficiency_components(counts: BlockCounts, r: float = 0.5):
    """(eta1, eta2, eta): in-block density, off-block sparsity, and their r-mix.

    A side with no elements at all (no in-block area, or blocks covering
    everything) contributes 1, the vacuous optimum.
    """
    if not 0.0 < r < 1.0:
        raise ValueError("r must lie strictly between 0 and 1")
    in_elements = counts.in_block_elements
    off_elements = counts.total_elements - in_elements
    eta1 = (counts.n1 - counts.n1_out) / in_elements if in_elements else 1.0
    eta2 = (off_elements - counts.n1_out) / off_elements if off_elements else 1.0
    return eta1, eta2, r * eta1 + (1.0 - r) * eta2


def grouping_efficiency(counts: BlockCounts, r: float = 0.5) -> float:
    return efficiency_components(counts, r)[2]


@dataclass(frozen=True)
class GroupingScore:
    """Everything the two measures need, bundled for reports."""

    n1: int
    n1_out: int
    n0_in: int
    in_block_elements: int
    total_elements: int
    efficacy: Fraction
    r: float
    eta1: float
    eta2: float
    efficiency: float

    @property
    def efficacy_value(self) -> float:
        return float(self.efficacy)

    @property
    def efficacy_text(self) -> str:
        return f"{self.efficacy.numerator}/{self.efficacy.denominator} = {float(self.efficacy):.4f}"

    def to_dict(self) -> dict:
        return {
            "n1": self.n1,
            "n1_out": self.n1_out,
            "n0_in": self.n0_in,
            "in_block_elements": self.in_block_elements,
            "total_elements": self.total_elements,
            "efficacy_num": self.efficacy.numerator,
            "efficacy_den": self.efficacy.denominator,
            "efficacy": float(self.efficacy),
            "efficacy_text": self.efficacy_text,
            "r": self.r,
            "eta1": self.eta1,
            "eta2": self.eta2,
            "efficiency": self.efficiency,
        }


def score(data, assignment, r: float = 0.5) -> GroupingScore:
    counts = count_blocks(data, assignment)
    eta1, eta2, eta = efficiency_components(counts, r)
    return GroupingScore(
        n1=counts.n1,
        n1_out=counts.n1_out,
        n0_in=counts.n0_in,
        in_block_elements=counts.in_block_elements,
        total_elements=counts.total_elements,
        efficacy=grouping_efficacy(counts),
        r=r,
        eta1=eta1,
        eta2=eta2,
        efficiency=eta,
    )


def _part_partitions(n_parts: int, max_blocks: int):
    """Canonical partitions of n parts into at most max_blocks families.

    Yields restricted growth strings in ascending lexicographic order: the
    first part is always family 0 and each new family id is one past the
    current maximum. The yielded array is reused; copy to keep it.
    """
    a = np.zeros(n_parts, dtype=np.int64)
    while True:
        yield a
        pos = n_parts - 1
        while pos > 0:
            cap = min(int(a[:pos].max()) + 1, max_blocks - 1)
            if a[pos] < cap:
                break
            pos -= 1
        if pos == 0:
            return
        a[pos] += 1
        a[pos + 1:] = 0


def oracle_best_assignment(data, k: int):
    """Exhaustive best-efficacy assignment for small instances.

    Enumerates every partition of the parts into at most ``k`` nonempty
    families and, for each, every machine assignment that uses all those
    families; exact rational comparison throughout. Among ties the first
    optimum in enumeration order wins, which is the lexicographically
    smallest (part families first, then machine cells). Bounds: at most
    10 parts, 10 machines, k <= 3; larger instances raise OracleSizeError.

    Returns ``(assignment, efficacy)``.
    """
    from .cells import CellAssignment  # runtime import, cells builds on metrics

    n_parts, n_machines = data.parts, data.machines
    if k < 1:
        raise ValueError("k must be at least 1")
    if n_parts > ORACLE_MAX_PARTS or n_machines > ORACLE_MAX_MACHINES or k > ORACLE_MAX_CELLS:
        raise OracleSizeError(
            f"instance {n_parts}x{n_machines} with k={k} exceeds the oracle bounds "
            f"(parts <= {ORACLE_MAX_PARTS}, machines <= {ORACLE_MAX_MACHINES}, "
            f"k <= {ORACLE_MAX_CELLS})"
        )
    values = data.values.astype(np.int64)
    n1 = int(values.sum())
    best: tuple[int, int, np.ndarray, np.ndarray] | None = None
    for part_family in _part_partitions(n_parts, min(k, n_parts)):
        k_eff = int(part_family.max()) + 1
        if k_eff > n_machines:
            continue  # no surjective machine assignment exists
        block_ones = np.zeros((k_eff, n_machines), dtype=np.int64)
        for f in range(k_eff):
            block_ones[f] = values[part_family == f].sum(axis=0)
        sizes = np.bincount(part_family, minlength=k_eff).astype(np.int64)
        num, den, machine_cell = kernels.best_machine_split(block_ones, sizes, n1)
        if num < 0:
            continue
        if best is None or num * best[1] > best[0] * den:
            best = (int(num), int(den), part_family.copy(), np.asarray(machine_cell))
    assert best is not None  # the single-family partition is always feasible
    assignment = CellAssignment(
        k=int(best[2].max()) + 1,
        part_family=tuple(int(f) + 1 for f in best[2]),
        machine_cell=tuple(int(c) + 1 for c in best[3]),
    )
    return assignment, Fraction(best[0], best[1])
