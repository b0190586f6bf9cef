"""Cell extraction from a trained map.

Pipeline: cluster the codebook vectors of units that actually caught parts,
let every part inherit its BMU's cluster as a family, pull each machine
into the family that uses it most densely, dissolve families that end up
without machines, and sweep the cluster count, keeping the assignment with
the best grouping efficacy.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import metrics
from .incidence import BlockDiagonalView, IncidenceMatrix
from .som import SomModel
from .viz import HitHistogram, compute_hits


@dataclass(frozen=True)
class CellAssignment:
    """Partition of parts into families and machines into cells, ids 1..k.

    Every id in 1..k must appear on both sides: a cell without machines or
    without parts is not a cell.
    """

    k: int
    part_family: tuple[int, ...]
    machine_cell: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "part_family", tuple(int(f) for f in self.part_family))
        object.__setattr__(self, "machine_cell", tuple(int(c) for c in self.machine_cell))
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not self.part_family or not self.machine_cell:
            raise ValueError("assignment needs at least one part and one machine")
        ids = set(range(1, self.k + 1))
        if not set(self.part_family) <= ids or not set(self.machine_cell) <= ids:
            raise ValueError("ids must lie in 1..k")
        if set(self.part_family) != ids:
            raise ValueError("every cell needs at least one part")
        if set(self.machine_cell) != ids:
            raise ValueError("every cell needs at least one machine")


def _farthest_first_centers(points: np.ndarray, k: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(points.shape[0]))]
    d2 = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    while len(chosen) < k:
        nxt = int(np.argmax(d2))  # first max, so ties go to the lowest index
        chosen.append(nxt)
        d2 = np.minimum(d2, ((points - points[nxt]) ** 2).sum(axis=1))
    return points[chosen].copy()


def _kmeans_labels(points: np.ndarray, k: int, seed: int) -> np.ndarray:
    centers = _farthest_first_centers(points, k, seed)
    labels = np.full(points.shape[0], -1, dtype=np.int64)
    for _ in range(100):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(d2, axis=1)  # ties to the lowest center index
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            members = points[labels == c]
            if members.shape[0]:
                centers[c] = members.mean(axis=0)
            # an emptied cluster keeps its previous center
    return labels


def cluster_map(model: SomModel, hits: HitHistogram, k: int) -> np.ndarray:
    """Cluster ids (1..k) for every map unit.

    k-means over the codebook rows of units with at least one hit:
    farthest-first seeding from the model seed, then Lloyd iterations until
    the labels stop changing (at most 100 rounds). Units with no hits
    inherit the cluster of the nearest hit unit in codebook space.
    """
    hit_units = np.flatnonzero(hits.hits > 0)
    if not 1 <= k <= hit_units.size:
        raise ValueError(f"k must lie in 1..{hit_units.size} (units with hits)")
    labels = _kmeans_labels(model.codebook[hit_units], k, model.seed)
    out = np.zeros(model.grid.units, dtype=np.int64)
    out[hit_units] = labels + 1
    for u in np.flatnonzero(hits.hits == 0):
        d2 = ((model.codebook[hit_units] - model.codebook[u]) ** 2).sum(axis=1)
        out[u] = out[hit_units[int(np.argmin(d2))]]
    return out


def assign_parts(clusters, hits: HitHistogram) -> np.ndarray:
    """Each part takes the cluster id of its BMU."""
    clusters = np.asarray(clusters, dtype=np.int64)
    if clusters.shape[0] != hits.grid.units:
        raise ValueError("need one cluster id per unit")
    return clusters[hits.bmus].copy()


def assign_machines(data: IncidenceMatrix, part_family) -> np.ndarray:
    """Pull each machine into the family that uses it most densely.

    Density of machine j in family f is the mean of column j over f's
    parts. Exact ties go to the smaller family id. Idempotent by
    construction: it depends only on (data, part_family).
    """
    part_family = np.asarray(part_family, dtype=np.int64)
    if part_family.shape[0] != data.parts:
        raise ValueError("need one family id per part")
    values = data.values
    out = np.zeros(data.machines, dtype=np.int64)
    best = np.full(data.machines, -1.0)
    for f in np.unique(part_family):  # ascending, so strict > keeps the smaller id on ties
        density = values[part_family == f].mean(axis=0)
        better = density > best
        out[better] = f
        best[better] = density[better]
    return out


def _relabel_by_size(part_family: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Renumber family ids 1..k: biggest family first, then densest.

    Machine assignment breaks density ties toward the smaller family id, so
    this ordering makes a machine that is equally dense everywhere side
    with the largest (then fullest) family instead of collapsing onto a
    small or sparse one. Ordering: size desc, in-family ones desc, earliest
    part asc.
    """
    ids, first, counts = np.unique(part_family, return_index=True, return_counts=True)
    ones = np.array([int(values[part_family == f].sum()) for f in ids])
    order = sorted(range(ids.size), key=lambda i: (-counts[i], -ones[i], first[i]))
    remap = {int(ids[i]): rank + 1 for rank, i in enumerate(order)}
    return np.array([remap[int(f)] for f in part_family], dtype=np.int64)


def _settle_assignment(data: IncidenceMatrix, part_family: np.ndarray) -> CellAssignment:
    """Assign machines and dissolve machine-less families until stable.

    Dissolving moves the orphan family's parts to whichever surviving
    family's machines they use most densely, then machines are
    re-assigned; each round removes one family, so this terminates. The
    returned ids are the canonical size-ordered ones, which keeps
    assign_machines idempotent on the result.
    """
    part_family = np.asarray(part_family, dtype=np.int64).copy()
    values = data.values
    while True:
        part_family = _relabel_by_size(part_family, values)
        machine_cell = assign_machines(data, part_family)
        used = np.unique(part_family)
        machineless = np.setdiff1d(used, np.unique(machine_cell))
        if machineless.size == 0:
            break
        orphan = int(machineless[0])
        survivors = used[used != orphan]
        for p in np.flatnonzero(part_family == orphan):
            best_family = -1
            best_density = -1.0
            for g in survivors:
                cols = np.flatnonzero(machine_cell == g)
                if cols.size == 0:
                    continue
                density = float(values[p, cols].mean())
                if density > best_density:
                    best_density = density
                    best_family = int(g)
            part_family[p] = best_family
    return CellAssignment(
        k=int(np.unique(part_family).size),
        part_family=tuple(int(f) for f in part_family),
        machine_cell=tuple(int(c) for c in machine_cell),
    )


def form_cells(model: SomModel, data: IncidenceMatrix, k_max: int) -> CellAssignment:
    """Best assignment over a sweep of candidate cell counts.

    Tries every k from 2 up to min(k_max, units with hits, machines,
    parts); each candidate is clustered, settled, and scored, and the
    highest exact efficacy wins, ties going to the smaller k. If the sweep
    is empty (a single busy unit, say) everything lands in one cell.
    """
    if k_max < 2:
        raise ValueError("k_max must be at least 2")
    if model.input_dim != data.machines:
        raise ValueError(f"model expects {model.input_dim} machines, matrix has {data.machines}")
    hits = compute_hits(model, data)
    busy_units = int((hits.hits > 0).sum())
    upper = min(k_max, busy_units, data.machines, data.parts)
    best: tuple[Fraction, CellAssignment] | None = None
    for k in range(2, upper + 1):
        clusters = cluster_map(model, hits, k)
        candidate = _settle_assignment(data, assign_parts(clusters, hits))
        efficacy = metrics.grouping_efficacy(metrics.count_blocks(data, candidate))
        if best is None or efficacy > best[0]:
            best = (efficacy, candidate)
    if best is None:
        return CellAssignment(
            k=1, part_family=(1,) * data.parts, machine_cell=(1,) * data.machines
        )
    return best[1]


def build_view(assignment: CellAssignment) -> BlockDiagonalView:
    """Row/column orders sorted by (cell id, original index), boundaries at id changes."""
    part_family = np.asarray(assignment.part_family)
    machine_cell = np.asarray(assignment.machine_cell)
    row_order = np.argsort(part_family, kind="stable")
    col_order = np.argsort(machine_cell, kind="stable")
    boundaries = []
    p_cursor = m_cursor = 0
    for cell in range(1, assignment.k + 1):
        p_count = int((part_family == cell).sum())
        m_count = int((machine_cell == cell).sum())
        boundaries.append(((p_cursor, p_cursor + p_count), (m_cursor, m_cursor + m_count)))
        p_cursor += p_count
        m_cursor += m_count
    return BlockDiagonalView(tuple(row_order), tuple(col_order), tuple(boundaries))
