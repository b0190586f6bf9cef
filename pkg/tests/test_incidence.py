"""Matrix parsing, validation, views, and canonical ordering."""
import numpy as np
import pytest

from somcell import (
    BlockDiagonalView,
    IncidenceMatrix,
    MatrixFormatError,
    canonical_form,
    load_matrix,
    parse_matrix,
    render_block_diagonal,
)

GOOD = """\
# demo
2 3
1 0 1
0 1 0
"""


def test_parse_round_trip():
    m = parse_matrix(GOOD)
    assert m.parts == 2 and m.machines == 3
    assert m.values.tolist() == [[1, 0, 1], [0, 1, 0]]
    assert m.part_labels == ("p1", "p2")
    assert m.machine_labels == ("m1", "m2", "m3")


def test_parse_allows_comments_and_blanks_between_rows():
    text = "2 2\n1 0\n# note\n\n0 1\n# trailing comment\n"
    assert parse_matrix(text).values.tolist() == [[1, 0], [0, 1]]


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("", "no header"),
        ("2\n1 0\n0 1\n", "header"),
        ("2 2\n1 0\n0 2\n", "0 or 1"),
        ("2 2\n1 0 1\n0 1\n", "expected 2"),
        ("2 2\n1 0\n", "expected 2 matrix rows"),
        ("2 2\n1 0\n0 1\n1 1\n", "after the last"),
        ("x y\n1 0\n0 1\n", "header"),
    ],
)
def test_parse_rejects_malformed_input(text, fragment):
    with pytest.raises(MatrixFormatError) as e:
        parse_matrix(text)
    assert fragment in str(e.value)


def test_parse_error_carries_line_number():
    with pytest.raises(MatrixFormatError) as e:
        parse_matrix("2 2\n1 0\n0 x\n")
    assert "line 3" in str(e.value)


def test_empty_row_and_column_rejected():
    with pytest.raises(ValueError):
        IncidenceMatrix.from_array(np.array([[1, 1], [0, 0]], dtype=np.uint8))
    with pytest.raises(ValueError):
        IncidenceMatrix.from_array(np.array([[1, 0], [1, 0]], dtype=np.uint8))


def test_from_array_rejects_non_binary_and_wrong_shape():
    with pytest.raises(ValueError):
        IncidenceMatrix.from_array(np.array([[1, 2], [1, 1]]))
    with pytest.raises(ValueError):
        IncidenceMatrix.from_array(np.ones(4, dtype=np.uint8))


def test_values_are_read_only():
    m = parse_matrix(GOOD)
    with pytest.raises(ValueError):
        m.values[0, 0] = 0


def test_transposed_swaps_axes_and_regenerates_labels():
    m = parse_matrix(GOOD)
    t = m.transposed()
    assert t.parts == 3 and t.machines == 2
    assert t.values.tolist() == [[1, 0], [0, 1], [1, 0]]
    assert t.part_labels == ("p1", "p2", "p3")
    assert t.machine_labels == ("m1", "m2")


def test_load_matrix_reads_file(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text(GOOD)
    assert load_matrix(path).values.tolist() == [[1, 0, 1], [0, 1, 0]]


def test_problem1_shape_and_totals(problem1):
    assert problem1.parts == 10 and problem1.machines == 10
    assert int(problem1.values.sum()) == 52


def test_view_validates_permutations_and_tiling():
    with pytest.raises(ValueError):
        BlockDiagonalView(
            row_order=(0, 0),
            col_order=(0, 1),
            cell_boundaries=(((0, 2), (0, 2)),),
        )
    with pytest.raises(ValueError):
        BlockDiagonalView(
            row_order=(0, 1),
            col_order=(0, 1),
            cell_boundaries=(((0, 1), (0, 2)),),
        )
    v = BlockDiagonalView.identity(2, 2)
    assert v.cell_boundaries == (((0, 2), (0, 2)),)


def test_render_block_diagonal_layout():
    m = parse_matrix("2 2\n1 0\n0 1\n")
    view = BlockDiagonalView(
        row_order=(0, 1),
        col_order=(0, 1),
        cell_boundaries=(((0, 1), (0, 1)), ((1, 2), (1, 2))),
    )
    out = render_block_diagonal(m, view)
    lines = out.splitlines()
    assert out.endswith("\n")
    assert "|" in lines[1] and any(set(line.strip()) <= {"-", "+", "|", " "} for line in lines)
    assert lines[1].startswith("p1")


def test_canonical_form_is_permutation_invariant():
    rng = np.random.default_rng(5)
    from conftest import random_incidence

    for _ in range(40):
        v = random_incidence(rng, 6, 7)
        m = IncidenceMatrix.from_array(v)
        canon, rp, cp = canonical_form(m)
        # canonical values must be the claimed permutation of the input
        assert np.array_equal(canon.values, v[np.ix_(rp, cp)])
        perm = v[rng.permutation(6)][:, rng.permutation(7)]
        canon2, _, _ = canonical_form(IncidenceMatrix.from_array(perm))
        assert np.array_equal(canon.values, canon2.values)


def test_canonical_form_handles_regular_matrices():
    # complement of identity: all row/column sums equal, maximally ambiguous
    v = (1 - np.eye(5, dtype=np.uint8)).astype(np.uint8)
    canon, _, _ = canonical_form(IncidenceMatrix.from_array(v))
    rng = np.random.default_rng(9)
    for _ in range(10):
        perm = v[rng.permutation(5)][:, rng.permutation(5)]
        canon2, _, _ = canonical_form(IncidenceMatrix.from_array(perm))
        assert np.array_equal(canon.values, canon2.values)
    ones = np.ones((4, 6), dtype=np.uint8)
    canon3, _, _ = canonical_form(IncidenceMatrix.from_array(ones))
    assert np.array_equal(canon3.values, ones)


def test_canonical_form_idempotent():
    rng = np.random.default_rng(6)
    from conftest import random_incidence

    v = random_incidence(rng, 5, 5)
    canon, _, _ = canonical_form(IncidenceMatrix.from_array(v))
    again, rp, cp = canonical_form(canon)
    assert np.array_equal(again.values, canon.values)
