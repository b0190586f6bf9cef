"""Grouping measures and the exhaustive oracle."""
from fractions import Fraction

import numpy as np
import pytest

from conftest import planted_instance, random_assignment, random_incidence
from somcell import (
    CellAssignment,
    IncidenceMatrix,
    OracleSizeError,
    count_blocks,
    grouping_efficacy,
    grouping_efficiency,
    oracle_best_assignment,
    score,
)
from somcell.metrics import BlockCounts, _part_partitions, efficiency_components


def naive_counts(values, pf, mc):
    """Independent tally, straight from the definition."""
    n1 = n1_out = n0_in = in_el = 0
    for p in range(values.shape[0]):
        for j in range(values.shape[1]):
            inside = pf[p] == mc[j]
            if inside:
                in_el += 1
            if values[p, j]:
                n1 += 1
                if not inside:
                    n1_out += 1
            elif inside:
                n0_in += 1
    return n1, n1_out, n0_in, in_el


def test_count_blocks_matches_naive_tally():
    rng = np.random.default_rng(13)
    for _ in range(50):
        p, m = int(rng.integers(2, 8)), int(rng.integers(2, 8))
        values = random_incidence(rng, p, m)
        k = int(rng.integers(1, min(p, m) + 1))
        pf, mc = random_assignment(rng, p, m, k)
        counts = count_blocks(
            IncidenceMatrix.from_array(values),
            CellAssignment(k=k, part_family=pf, machine_cell=mc),
        )
        assert (counts.n1, counts.n1_out, counts.n0_in, counts.in_block_elements) == naive_counts(values, pf, mc)
        assert counts.total_elements == p * m


def test_count_blocks_rejects_size_mismatch():
    data = IncidenceMatrix.from_array(np.eye(3, dtype=np.uint8))
    with pytest.raises(ValueError):
        count_blocks(data, CellAssignment(k=1, part_family=(1, 1), machine_cell=(1, 1, 1)))


def test_efficacy_is_exact_and_reduces():
    counts = BlockCounts(n1=52, n1_out=2, n0_in=0, in_block_elements=50, total_elements=100)
    mu = grouping_efficacy(counts)
    assert mu == Fraction(50, 52)
    assert (mu.numerator, mu.denominator) == (25, 26)


def test_efficacy_one_iff_perfect_blocks():
    rng = np.random.default_rng(14)
    for _ in range(40):
        p, m = int(rng.integers(2, 7)), int(rng.integers(2, 7))
        values = random_incidence(rng, p, m)
        k = int(rng.integers(1, min(p, m) + 1))
        pf, mc = random_assignment(rng, p, m, k)
        counts = count_blocks(
            IncidenceMatrix.from_array(values),
            CellAssignment(k=k, part_family=pf, machine_cell=mc),
        )
        mu = grouping_efficacy(counts)
        assert 0 <= mu <= 1
        assert (mu == 1) == (counts.n1_out == 0 and counts.n0_in == 0)


def test_efficacy_requires_some_ones():
    with pytest.raises(ValueError):
        grouping_efficacy(BlockCounts(0, 0, 0, 4, 4))


def test_efficiency_components_and_vacuous_sides():
    counts = BlockCounts(n1=52, n1_out=2, n0_in=0, in_block_elements=50, total_elements=100)
    eta1, eta2, eta = efficiency_components(counts)
    assert eta1 == pytest.approx(1.0)
    assert eta2 == pytest.approx(0.96)
    assert eta == pytest.approx(0.98)
    # blocks covering the whole matrix leave no off-block side
    full = BlockCounts(n1=3, n1_out=0, n0_in=1, in_block_elements=4, total_elements=4)
    _, eta2_full, _ = efficiency_components(full)
    assert eta2_full == 1.0
    with pytest.raises(ValueError):
        efficiency_components(counts, r=0.0)
    with pytest.raises(ValueError):
        efficiency_components(counts, r=1.0)


def test_efficiency_weighting_moves_with_r():
    counts = BlockCounts(n1=52, n1_out=2, n0_in=0, in_block_elements=50, total_elements=100)
    assert grouping_efficiency(counts, r=0.9) > grouping_efficiency(counts, r=0.1)


def test_score_bundles_everything(problem1):
    asg = CellAssignment(
        k=2,
        part_family=(2, 2, 1, 1, 1, 1, 1, 1, 1, 2),
        machine_cell=(1, 2, 1, 2, 1, 2, 2, 2, 1, 1),
    )
    sc = score(problem1, asg)
    assert (sc.n1, sc.n1_out, sc.n0_in) == (52, 2, 0)
    assert sc.efficacy == Fraction(50, 52)
    assert sc.efficacy_text.startswith("25/26 = 0.9615")
    d = sc.to_dict()
    assert d["efficacy_num"] == 25 and d["efficacy_den"] == 26
    assert d["efficacy"] == pytest.approx(50 / 52)
    assert sc.eta1 == pytest.approx(1.0) and sc.eta2 == pytest.approx(0.96)
    assert sc.efficiency == pytest.approx(0.98)


def test_part_partitions_enumerates_restricted_growth_strings():
    got = [a.copy().tolist() for a in _part_partitions(3, 3)]
    assert got == [
        [0, 0, 0],
        [0, 0, 1],
        [0, 1, 0],
        [0, 1, 1],
        [0, 1, 2],
    ]
    capped = [a.copy().tolist() for a in _part_partitions(3, 2)]
    assert capped == [[0, 0, 0], [0, 0, 1], [0, 1, 0], [0, 1, 1]]


def test_oracle_prefers_single_block_on_all_ones():
    data = IncidenceMatrix.from_array(np.ones((3, 3), dtype=np.uint8))
    asg, mu = oracle_best_assignment(data, 2)
    assert mu == 1
    assert asg.k == 1


def test_oracle_on_identity_blocks_is_perfect():
    data = IncidenceMatrix.from_array(np.eye(4, dtype=np.uint8))
    asg, mu = oracle_best_assignment(data, 3)
    # only 3 families may form, so two of the four singleton blocks merge
    assert mu == Fraction(4, 6)
    assert asg.k == 3


def test_oracle_matches_planted_construction():
    # planted blocks with e exceptions and v voids score (n1-e)/(n1+v)
    v = np.zeros((6, 6), dtype=np.uint8)
    v[:3, :3] = 1
    v[3:, 3:] = 1
    v[0, 3] = 1  # exception
    v[4, 4] = 0  # void
    data = IncidenceMatrix.from_array(v)
    n1 = int(v.sum())
    asg, mu = oracle_best_assignment(data, 2)
    assert mu == Fraction(n1 - 1, n1 + 1)
    assert asg.part_family == (1, 1, 1, 2, 2, 2)
    assert asg.machine_cell == (1, 1, 1, 2, 2, 2)


def test_oracle_tie_prefers_first_enumerated():
    # two symmetric singleton blocks: both labelings score 1, the partition
    # enumerated first assigns part 1 to family 1
    data = IncidenceMatrix.from_array(np.eye(2, dtype=np.uint8))
    asg, mu = oracle_best_assignment(data, 2)
    assert mu == 1
    assert asg.part_family == (1, 2)
    assert asg.machine_cell == (1, 2)


def test_oracle_bounds():
    big = IncidenceMatrix.from_array(np.eye(11, dtype=np.uint8))
    with pytest.raises(OracleSizeError):
        oracle_best_assignment(big, 2)
    small = IncidenceMatrix.from_array(np.eye(3, dtype=np.uint8))
    with pytest.raises(OracleSizeError):
        oracle_best_assignment(small, 4)
    with pytest.raises(ValueError):
        oracle_best_assignment(small, 0)


def test_oracle_never_loses_to_any_sampled_assignment():
    rng = np.random.default_rng(15)
    for _ in range(8):
        values = planted_instance(rng, side=5)
        data = IncidenceMatrix.from_array(values)
        _, mu_star = oracle_best_assignment(data, 3)
        for _ in range(40):
            k = int(rng.integers(1, 4))
            pf, mc = random_assignment(rng, 5, 5, k)
            mu = grouping_efficacy(
                count_blocks(data, CellAssignment(k=k, part_family=pf, machine_cell=mc))
            )
            assert mu <= mu_star
