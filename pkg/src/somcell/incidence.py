"""Binary part-machine incidence matrices: parsing, validation, block-diagonal rendering.

Rows are parts and columns are machines throughout. Every entry is 0 or 1,
every part must use at least one machine, and every machine must serve at
least one part; anything else is rejected on construction. Labels are
positional (p1..pP, m1..mM) and regenerated rather than parsed.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MatrixFormatError",
    "IncidenceMatrix",
    "BlockDiagonalView",
    "parse_matrix",
    "load_matrix",
    "load_problem1",
    "render_block_diagonal",
    "canonical_form",
]


class MatrixFormatError(ValueError):
    """Malformed matrix text or inconsistent matrix data."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True, eq=False)
class IncidenceMatrix:
    """Validated part-by-machine 0/1 matrix with stable positional labels."""

    values: np.ndarray
    part_labels: tuple[str, ...]
    machine_labels: tuple[str, ...]

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise MatrixFormatError("matrix must be 2-D with at least one part and one machine")
        if v.size and not np.isin(v, (0, 1)).all():
            raise MatrixFormatError("entries must be 0 or 1")
        v = np.ascontiguousarray(v.astype(np.uint8))
        row_sums = v.sum(axis=1)
        if (row_sums == 0).any():
            empty = int(np.flatnonzero(row_sums == 0)[0]) + 1
            raise MatrixFormatError(f"part p{empty} uses no machine (empty row)")
        col_sums = v.sum(axis=0)
        if (col_sums == 0).any():
            empty = int(np.flatnonzero(col_sums == 0)[0]) + 1
            raise MatrixFormatError(f"machine m{empty} serves no part (empty column)")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "part_labels", tuple(self.part_labels))
        object.__setattr__(self, "machine_labels", tuple(self.machine_labels))
        if len(self.part_labels) != v.shape[0] or len(self.machine_labels) != v.shape[1]:
            raise MatrixFormatError("label count does not match matrix shape")

    @classmethod
    def from_array(cls, values) -> "IncidenceMatrix":
        """Build from any 0/1 array-like, regenerating positional labels."""
        v = np.asarray(values)
        if v.ndim != 2:
            raise MatrixFormatError("matrix must be 2-D")
        parts = tuple(f"p{i + 1}" for i in range(v.shape[0]))
        machines = tuple(f"m{j + 1}" for j in range(v.shape[1]))
        return cls(v, parts, machines)

    @property
    def parts(self) -> int:
        return int(self.values.shape[0])

    @property
    def machines(self) -> int:
        return int(self.values.shape[1])

    def transposed(self) -> "IncidenceMatrix":
        """Swap the part/machine roles (labels are regenerated)."""
        return IncidenceMatrix.from_array(self.values.T)

    def float_rows(self) -> np.ndarray:
        return self.values.astype(np.float64)


@dataclass(frozen=True)
class BlockDiagonalView:
    """Row/column permutation plus contiguous ranges marking one diagonal block per cell.

    ``cell_boundaries`` holds one ``((part_start, part_end), (machine_start,
    machine_end))`` half-open range pair per cell, in display order. The part
    ranges must tile ``0..P`` and the machine ranges ``0..M``.
    """

    row_order: tuple[int, ...]
    col_order: tuple[int, ...]
    cell_boundaries: tuple[tuple[tuple[int, int], tuple[int, int]], ...]

    def __post_init__(self):
        object.__setattr__(self, "row_order", tuple(int(i) for i in self.row_order))
        object.__setattr__(self, "col_order", tuple(int(j) for j in self.col_order))
        object.__setattr__(
            self,
            "cell_boundaries",
            tuple(((int(a), int(b)), (int(c), int(d))) for (a, b), (c, d) in self.cell_boundaries),
        )
        for name, order in (("row_order", self.row_order), ("col_order", self.col_order)):
            if sorted(order) != list(range(len(order))):
                raise ValueError(f"{name} is not a permutation")
        if not self.cell_boundaries:
            raise ValueError("view needs at least one cell")
        for axis, total in ((0, len(self.row_order)), (1, len(self.col_order))):
            cursor = 0
            for bounds in self.cell_boundaries:
                start, end = bounds[axis]
                if start != cursor or end <= start:
                    raise ValueError("cell ranges must be contiguous, nonempty, and start at 0")
                cursor = end
            if cursor != total:
                raise ValueError("cell ranges must cover the whole axis")

    @classmethod
    def identity(cls, parts: int, machines: int) -> "BlockDiagonalView":
        """Original order, one cell spanning the whole matrix."""
        return cls(tuple(range(parts)), tuple(range(machines)), (((0, parts), (0, machines)),))


def parse_matrix(text: str) -> IncidenceMatrix:
    """Parse the plain-text matrix format.

    Lines starting with ``#`` and blank lines are ignored anywhere. The first
    significant line is a header ``P M``; exactly P rows of M whitespace-
    separated 0/1 tokens must follow. Raises MatrixFormatError (with a line
    number where possible) on anything else.
    """
    header: tuple[int, int] | None = None
    rows: list[list[int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if header is None:
            if len(tokens) != 2:
                raise MatrixFormatError("header must be two integers: P M", lineno)
            try:
                p, m = int(tokens[0]), int(tokens[1])
            except ValueError:
                raise MatrixFormatError("header must be two integers: P M", lineno) from None
            if p < 1 or m < 1:
                raise MatrixFormatError("P and M must both be positive", lineno)
            header = (p, m)
            continue
        if len(rows) == header[0]:
            raise MatrixFormatError("unexpected content after the last matrix row", lineno)
        if len(tokens) != header[1]:
            raise MatrixFormatError(
                f"expected {header[1]} entries in this row, found {len(tokens)}", lineno
            )
        row = []
        for tok in tokens:
            if tok == "0":
                row.append(0)
            elif tok == "1":
                row.append(1)
            else:
                raise MatrixFormatError(f"entry must be 0 or 1, found {tok!r}", lineno)
        rows.append(row)
    if header is None:
        raise MatrixFormatError("no header line found")
    if len(rows) != header[0]:
        raise MatrixFormatError(f"expected {header[0]} matrix rows, found {len(rows)}")
    return IncidenceMatrix.from_array(np.array(rows, dtype=np.uint8))


def load_matrix(path) -> IncidenceMatrix:
    """Read and parse a matrix file."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_matrix(fh.read())


def load_problem1() -> IncidenceMatrix:
    """The bundled 10x10 demo instance."""
    resource = importlib.resources.files("somcell").joinpath("data").joinpath("problem1.txt")
    return parse_matrix(resource.read_text(encoding="utf-8"))


def render_block_diagonal(matrix: IncidenceMatrix, view: BlockDiagonalView) -> str:
    """Render the permuted matrix as text with cell boundaries drawn in.

    Columns are separated with spaces, ``|`` marks cell boundaries between
    column groups, and a rule of ``-`` separates row groups. The header row
    carries machine labels; each body row starts with its part label.
    """
    if len(view.row_order) != matrix.parts or len(view.col_order) != matrix.machines:
        raise ValueError("view permutation size does not match the matrix")
    values = matrix.values[np.ix_(view.row_order, view.col_order)]
    row_labels = [matrix.part_labels[i] for i in view.row_order]
    col_labels = [matrix.machine_labels[j] for j in view.col_order]

    label_width = max(len(lab) for lab in row_labels)
    col_widths = [max(len(lab), 1) for lab in col_labels]
    col_starts = {bounds[1][0] for bounds in view.cell_boundaries[1:]}
    row_starts = {bounds[0][0] for bounds in view.cell_boundaries[1:]}

    def format_row(leader: str, cells: list[str]) -> str:
        out = [leader.ljust(label_width)]
        for j, cell in enumerate(cells):
            if j in col_starts:
                out.append("|")
            out.append(cell.rjust(col_widths[j]))
        return " ".join(out)

    lines = [format_row("", col_labels)]
    width = len(lines[0])
    for i in range(values.shape[0]):
        if i in row_starts:
            lines.append("-" * width)
        lines.append(format_row(row_labels[i], [str(int(x)) for x in values[i]]))
    return "\n".join(lines) + "\n"


def _rank_signatures(sigs: list) -> list[int]:
    # rank by signature value, not first appearance, to stay order-independent
    index = {s: r for r, s in enumerate(sorted(set(sigs)))}
    return [index[s] for s in sigs]


def _refine_colors(values: np.ndarray, row_color: list[int], col_color: list[int]):
    """Split row/column color classes by neighbor color multisets until stable."""
    n_rows, n_cols = values.shape
    ones_by_row = [np.flatnonzero(values[i]) for i in range(n_rows)]
    ones_by_col = [np.flatnonzero(values[:, j]) for j in range(n_cols)]
    while True:
        new_row = _rank_signatures([
            (row_color[i], tuple(sorted(col_color[j] for j in ones_by_row[i])))
            for i in range(n_rows)
        ])
        new_col = _rank_signatures([
            (col_color[j], tuple(sorted(new_row[i] for i in ones_by_col[j])))
            for j in range(n_cols)
        ])
        if new_row == row_color and new_col == col_color:
            return row_color, col_color
        row_color, col_color = new_row, new_col


def _branch_class(values: np.ndarray, colors: list[int], axis: int):
    """Smallest color class with two members that are not literal duplicates.

    Returns (color, representative indices), one representative per distinct
    vector; classes of mutually identical rows/columns are interchangeable
    and never branched on.
    """
    by_color: dict[int, list[int]] = {}
    for idx, c in enumerate(colors):
        by_color.setdefault(c, []).append(idx)
    for c in sorted(by_color):
        members = by_color[c]
        if len(members) < 2:
            continue
        reps: dict[bytes, int] = {}
        for idx in members:
            vec = values[idx] if axis == 0 else values[:, idx]
            reps.setdefault(vec.tobytes(), idx)
        if len(reps) > 1:
            return c, sorted(reps.values())
    return None, []


def canonical_form(matrix: IncidenceMatrix):
    """Permutation-invariant normal form of a matrix.

    Two matrices that differ only by a row and/or column permutation map to
    the same canonical matrix. Works by color refinement on the bipartite
    row/column graph followed by an individualization search over ambiguous
    classes, keeping the lexicographically largest arrangement; duplicate
    rows or columns are recognized as interchangeable, so the search stays
    small except on highly regular symmetric designs, which do not occur in
    this domain.

    Returns ``(canonical, row_perm, col_perm)`` with
    ``canonical.values[i, j] == matrix.values[row_perm[i], col_perm[j]]``.
    """
    values = np.asarray(matrix.values, dtype=np.uint8)
    n_rows, n_cols = values.shape
    # dense rows/columns get small colors so they sort toward the top left
    row0 = _rank_signatures([(-int(values[i].sum()),) for i in range(n_rows)])
    col0 = _rank_signatures([(-int(values[:, j].sum()),) for j in range(n_cols)])
    best: tuple[bytes, np.ndarray, np.ndarray] | None = None

    def search(row_color: list[int], col_color: list[int]) -> None:
        nonlocal best
        row_color, col_color = _refine_colors(values, row_color, col_color)
        color, reps = _branch_class(values, row_color, 0)
        if color is not None:
            for rep in reps:
                forked = [(c, 0 if i == rep else 1) for i, c in enumerate(row_color)]
                search(_rank_signatures(forked), list(col_color))
            return
        color, reps = _branch_class(values, col_color, 1)
        if color is not None:
            for rep in reps:
                forked = [(c, 0 if j == rep else 1) for j, c in enumerate(col_color)]
                search(list(row_color), _rank_signatures(forked))
            return
        row_perm = np.lexsort((np.arange(n_rows), np.array(row_color)))
        col_perm = np.lexsort((np.arange(n_cols), np.array(col_color)))
        arranged = values[np.ix_(row_perm, col_perm)]
        key = arranged.tobytes()
        if best is None or key > best[0]:
            best = (key, row_perm, col_perm)

    search(row0, col0)
    assert best is not None
    _, row_perm, col_perm = best
    canon = IncidenceMatrix.from_array(values[np.ix_(row_perm, col_perm)])
    return canon, row_perm, col_perm
