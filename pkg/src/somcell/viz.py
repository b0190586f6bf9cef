"""Visual surfaces of a trained map and their SVG/CSV exporters.

Four surfaces: the U-matrix (codebook distance between adjacent units),
one component plane per machine, a hit histogram of where parts land, and
a two-component principal projection of parts and unit prototypes.

Heatmap SVGs share one grayscale ramp per figure (low = white, high =
black) with a numeric min/max legend. Hit and projection views accept an
optional per-part cell id sequence and then color by cell.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from . import kernels, pca
from ._util import atomic_write_text
from .som import MapGrid, SomModel, _as_rows

_PALETTE = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#ff7f0e",
    "#9467bd",
    "#8c564b",
    "#e377c2",
    "#7f7f7f",
    "#bcbd22",
    "#17becf",
)


@dataclass(frozen=True, eq=False)
class UMatrix:
    """Adjacent-unit codebook distances plus their per-unit means."""

    grid: MapGrid
    pairs: np.ndarray
    pair_values: np.ndarray
    unit_values: np.ndarray


@dataclass(frozen=True, eq=False)
class ComponentPlane:
    """One codebook column rendered over the lattice."""

    grid: MapGrid
    machine_index: int
    label: str
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class HitHistogram:
    """Per-unit sample counts plus which part landed where."""

    grid: MapGrid
    hits: np.ndarray
    bmus: np.ndarray
    part_labels: tuple[str, ...]

    def unit_labels(self) -> tuple[tuple[str, ...], ...]:
        """Part labels grouped by their BMU, one tuple per unit."""
        out: list[list[str]] = [[] for _ in range(self.grid.units)]
        for part, unit in enumerate(self.bmus):
            out[int(unit)].append(self.part_labels[part])
        return tuple(tuple(labels) for labels in out)


@dataclass(frozen=True, eq=False)
class Projection:
    """Parts and unit prototypes dropped onto the top two principal components."""

    grid: MapGrid
    part_points: np.ndarray
    unit_points: np.ndarray
    axes: np.ndarray
    eigenvalues: np.ndarray
    part_labels: tuple[str, ...]


def _part_labels_for(data, count: int) -> tuple[str, ...]:
    labels = getattr(data, "part_labels", None)
    if labels is None:
        labels = tuple(f"p{i + 1}" for i in range(count))
    return tuple(labels)


def compute_umatrix(model: SomModel) -> UMatrix:
    """Codebook distance for every adjacent unit pair; unit value = mean of its incident pairs."""
    pairs = model.grid.neighbor_pairs
    diffs = model.codebook[pairs[:, 0]] - model.codebook[pairs[:, 1]]
    pair_values = np.linalg.norm(diffs, axis=1)
    totals = np.zeros(model.grid.units)
    counts = np.zeros(model.grid.units)
    np.add.at(totals, pairs[:, 0], pair_values)
    np.add.at(totals, pairs[:, 1], pair_values)
    np.add.at(counts, pairs[:, 0], 1.0)
    np.add.at(counts, pairs[:, 1], 1.0)
    unit_values = np.divide(totals, counts, out=np.zeros_like(totals), where=counts > 0)
    return UMatrix(grid=model.grid, pairs=pairs, pair_values=pair_values, unit_values=unit_values)


def component_planes(model: SomModel, machine_labels=None) -> list[ComponentPlane]:
    """One plane per input feature, in feature order."""
    if machine_labels is None:
        machine_labels = tuple(f"m{j + 1}" for j in range(model.input_dim))
    if len(machine_labels) != model.input_dim:
        raise ValueError("need one label per input feature")
    return [
        ComponentPlane(
            grid=model.grid,
            machine_index=j,
            label=str(machine_labels[j]),
            values=model.codebook[:, j].copy(),
        )
        for j in range(model.input_dim)
    ]


def compute_hits(model: SomModel, data) -> HitHistogram:
    """Map every part to its BMU and count arrivals per unit."""
    rows = _as_rows(data)
    if rows.shape[1] != model.input_dim:
        raise ValueError(f"data has {rows.shape[1]} features, model expects {model.input_dim}")
    bmus = kernels.batch_bmu(model.codebook, rows)
    hits = np.bincount(bmus, minlength=model.grid.units).astype(np.int64)
    return HitHistogram(
        grid=model.grid,
        hits=hits,
        bmus=bmus,
        part_labels=_part_labels_for(data, rows.shape[0]),
    )


def pca_project(model: SomModel, data) -> Projection:
    """Project parts and unit prototypes onto the data's top two principal components.

    Axis signs are fixed by making each axis's largest-magnitude loading
    positive; the data mean maps to the origin.
    """
    rows = _as_rows(data)
    if rows.shape[0] < 2:
        raise ValueError("need at least two parts to project")
    if rows.shape[1] != model.input_dim:
        raise ValueError(f"data has {rows.shape[1]} features, model expects {model.input_dim}")
    mean = rows.mean(axis=0)
    centered = rows - mean
    if np.abs(centered).max() <= 1e-12:
        raise ValueError("parts are all identical; nothing to project")
    cov = centered.T @ centered / (rows.shape[0] - 1)
    lam, vecs = pca.top_eigenpairs(cov, count=2)
    if lam[0] <= 1e-12:
        raise ValueError("parts have zero variance; nothing to project")
    axes = vecs.copy()
    for i in range(2):
        lead = int(np.argmax(np.abs(axes[i])))
        if axes[i][lead] < 0:
            axes[i] = -axes[i]
    return Projection(
        grid=model.grid,
        part_points=centered @ axes.T,
        unit_points=(model.codebook - mean) @ axes.T,
        axes=axes,
        eigenvalues=lam,
        part_labels=_part_labels_for(data, rows.shape[0]),
    )


# ---------------------------------------------------------------------------
# SVG rendering. Hand-rolled: the figures are simple enough that a template
# beats a drawing dependency.

_CELL = 42.0  # pixel distance between adjacent unit centers
_MARGIN = 30.0
_FOOTER = 56.0


def _hex_points(cx: float, cy: float, radius: float) -> str:
    pts = []
    for i in range(6):
        ang = math.radians(60 * i + 30)
        pts.append(f"{cx + radius * math.cos(ang):.2f},{cy + radius * math.sin(ang):.2f}")
    return " ".join(pts)


def _ramp_fill(value: float, lo: float, hi: float) -> str:
    t = 0.5 if hi <= lo else (value - lo) / (hi - lo)
    g = int(round(255 * (1.0 - t)))
    return f"rgb({g},{g},{g})"


def _cell_color(cell_id: int) -> str:
    return _PALETTE[(int(cell_id) - 1) % len(_PALETTE)]


def _svg_document(width: float, height: float, body: list[str], title: str) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width:.0f}" height="{height:.0f}" '
        f'viewBox="0 0 {width:.0f} {height:.0f}">'
    )
    caption = (
        f'<text x="{_MARGIN:.1f}" y="{height - _FOOTER + 24:.1f}" '
        f'font-family="sans-serif" font-size="13">{escape(title)}</text>'
    )
    return "\n".join([head, f'<rect width="100%" height="100%" fill="white"/>', *body, caption, "</svg>"]) + "\n"


def _legend(x: float, y: float, lo: float, hi: float) -> list[str]:
    parts = []
    for offset, val, fill in ((0.0, lo, "white"), (120.0, hi, "black")):
        parts.append(
            f'<rect x="{x + offset:.1f}" y="{y:.1f}" width="16" height="16" '
            f'fill="{fill}" stroke="#333"/>'
        )
        parts.append(
            f'<text x="{x + offset + 22:.1f}" y="{y + 13:.1f}" '
            f'font-family="sans-serif" font-size="12">{val:.4f}</text>'
        )
    return parts


def _lattice_canvas(grid: MapGrid):
    coords = grid.coords * _CELL
    xs = coords[:, 0] + _MARGIN + _CELL / 2
    ys = coords[:, 1] + _MARGIN + _CELL / 2
    width = xs.max() + _CELL / 2 + _MARGIN
    height = ys.max() + _CELL / 2 + _MARGIN + _FOOTER
    return xs, ys, width, height


def _heatmap_svg(grid: MapGrid, unit_values, title: str, extra=None) -> str:
    """Hex heatmap over the lattice; ``extra`` adds midpoint hexes (for pair values)."""
    xs, ys, width, height = _lattice_canvas(grid)
    values = [float(v) for v in unit_values]
    if extra:
        values += [float(v) for _, _, v in extra]
    lo, hi = min(values), max(values)
    radius = _CELL / math.sqrt(3.0) * 0.98
    body = []
    for u in range(grid.units):
        fill = _ramp_fill(float(unit_values[u]), lo, hi)
        body.append(
            f'<polygon points="{_hex_points(xs[u], ys[u], radius)}" '
            f'fill="{fill}" stroke="#666" stroke-width="0.6"/>'
        )
    if extra:
        for a, b, v in extra:
            mx = (xs[a] + xs[b]) / 2
            my = (ys[a] + ys[b]) / 2
            body.append(
                f'<polygon points="{_hex_points(mx, my, radius * 0.52)}" '
                f'fill="{_ramp_fill(float(v), lo, hi)}" stroke="#888" stroke-width="0.4"/>'
            )
    body += _legend(_MARGIN, height - _FOOTER + 34, lo, hi)
    return _svg_document(width, height, body, title)


def _umatrix_svg(um: UMatrix) -> str:
    extra = [(int(a), int(b), v) for (a, b), v in zip(um.pairs, um.pair_values)]
    return _heatmap_svg(um.grid, um.unit_values, "u-matrix (codebook distance between neighbors)", extra)


def _plane_svg(plane: ComponentPlane) -> str:
    return _heatmap_svg(plane.grid, plane.values, f"component plane {plane.label}")


def unit_cells_from_hits(hits: HitHistogram, part_cells) -> np.ndarray:
    """Cell id per unit, majority vote of its parts' cells (ties to the smaller id).

    Units with no hits get 0; callers that need them filled can propagate
    from neighbors (see export_scatter_data, which uses codebook proximity).
    """
    part_cells = np.asarray(part_cells, dtype=np.int64)
    if part_cells.shape[0] != hits.bmus.shape[0]:
        raise ValueError("need one cell id per part")
    out = np.zeros(hits.grid.units, dtype=np.int64)
    for u in range(hits.grid.units):
        members = part_cells[hits.bmus == u]
        if members.size:
            ids, counts = np.unique(members, return_counts=True)
            out[u] = int(ids[np.argmax(counts)])  # unique sorts ids, argmax takes first max
    return out


def _hits_svg(hits: HitHistogram, part_cells=None) -> str:
    xs, ys, width, height = _lattice_canvas(hits.grid)
    radius = _CELL / math.sqrt(3.0) * 0.98
    counts = hits.hits
    lo, hi = 0.0, float(max(counts.max(), 1))
    unit_cells = unit_cells_from_hits(hits, part_cells) if part_cells is not None else None
    labels = hits.unit_labels()
    body = []
    for u in range(hits.grid.units):
        points = _hex_points(xs[u], ys[u], radius)
        if counts[u] == 0:
            # interpolative unit: hollow
            body.append(
                f'<polygon points="{points}" fill="none" stroke="#999" '
                f'stroke-width="0.8" stroke-dasharray="3,2"/>'
            )
            continue
        if unit_cells is not None and unit_cells[u] > 0:
            fill = _cell_color(unit_cells[u])
            text_color = "white"
        else:
            fill = _ramp_fill(float(counts[u]), lo, hi)
            text_color = "black" if counts[u] < 0.6 * hi else "white"
        body.append(f'<polygon points="{points}" fill="{fill}" stroke="#666" stroke-width="0.6"/>')
        body.append(
            f'<text x="{xs[u]:.1f}" y="{ys[u] - 2:.1f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11" fill="{text_color}">{int(counts[u])}</text>'
        )
        if labels[u]:
            shown = ",".join(labels[u])
            body.append(
                f'<text x="{xs[u]:.1f}" y="{ys[u] + 10:.1f}" text-anchor="middle" '
                f'font-family="sans-serif" font-size="6.5" fill="{text_color}">{escape(shown)}</text>'
            )
    if unit_cells is None:
        body += _legend(_MARGIN, height - _FOOTER + 34, lo, hi)
    return _svg_document(width, height, body, "hit histogram (parts per unit; hollow = no hits)")


def _projection_svg(proj: Projection, part_cells=None) -> str:
    pts = np.vstack([proj.unit_points, proj.part_points])
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    side = 480.0
    scale = side / span.max()

    def to_px(p):
        # y flipped so the second component points up
        return (
            _MARGIN + (p[0] - lo[0]) * scale,
            _MARGIN + (hi[1] - p[1]) * scale,
        )

    width = _MARGIN * 2 + span[0] * scale
    height = _MARGIN * 2 + span[1] * scale + _FOOTER
    body = []
    for a, b in proj.grid.neighbor_pairs:
        xa, ya = to_px(proj.unit_points[a])
        xb, yb = to_px(proj.unit_points[b])
        body.append(
            f'<line x1="{xa:.1f}" y1="{ya:.1f}" x2="{xb:.1f}" y2="{yb:.1f}" '
            f'stroke="#ccc" stroke-width="0.7"/>'
        )
    for point in proj.unit_points:
        x, y = to_px(point)
        body.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="2.6" fill="#aaa"/>')
    cells = None
    if part_cells is not None:
        cells = np.asarray(part_cells, dtype=np.int64)
        if cells.shape[0] != proj.part_points.shape[0]:
            raise ValueError("need one cell id per part")
    for i, point in enumerate(proj.part_points):
        x, y = to_px(point)
        fill = _cell_color(cells[i]) if cells is not None else "#222"
        body.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="5" fill="{fill}" stroke="black" stroke-width="0.6"/>')
        body.append(
            f'<text x="{x + 7:.1f}" y="{y + 4:.1f}" font-family="sans-serif" '
            f'font-size="11">{escape(proj.part_labels[i])}</text>'
        )
    title = (
        "principal projection of parts (dots) and prototypes (gray net); "
        f"component variances {proj.eigenvalues[0]:.3f}, {proj.eigenvalues[1]:.3f}"
    )
    return _svg_document(width, height, body, title)


def export_svg(surface, path, part_cells=None) -> None:
    """Write any surface as a standalone SVG file (written atomically).

    ``part_cells`` (one cell id per part) switches hit and projection views
    to the categorical cell palette; heatmap surfaces ignore it.
    """
    if isinstance(surface, UMatrix):
        text = _umatrix_svg(surface)
    elif isinstance(surface, ComponentPlane):
        text = _plane_svg(surface)
    elif isinstance(surface, HitHistogram):
        text = _hits_svg(surface, part_cells)
    elif isinstance(surface, Projection):
        text = _projection_svg(surface, part_cells)
    else:
        raise TypeError(f"cannot render {type(surface).__name__} as SVG")
    atomic_write_text(path, text)


def export_scatter_data(model: SomModel, data, assignment, path) -> None:
    """CSV of part rows and codebook prototypes tagged with cell ids.

    Columns: source (data/prototype), label, one column per machine, cell.
    Part rows carry their family id from ``assignment``; prototype rows
    carry the majority family of their parts, and units with no parts
    inherit from the nearest hit unit in codebook space.
    """
    rows = _as_rows(data)
    machine_labels = getattr(data, "machine_labels", None) or tuple(
        f"m{j + 1}" for j in range(model.input_dim)
    )
    hits = compute_hits(model, data)
    part_cells = np.asarray(assignment.part_family, dtype=np.int64)
    unit_cells = unit_cells_from_hits(hits, part_cells)
    hit_units = np.flatnonzero(hits.hits > 0)
    for u in np.flatnonzero(hits.hits == 0):
        d2 = ((model.codebook[hit_units] - model.codebook[u]) ** 2).sum(axis=1)
        unit_cells[u] = unit_cells[hit_units[int(np.argmin(d2))]]

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["source", "label", *machine_labels, "cell"])
    for i in range(rows.shape[0]):
        writer.writerow(
            ["data", hits.part_labels[i], *[int(v) for v in rows[i]], int(part_cells[i])]
        )
    for u in range(model.grid.units):
        writer.writerow(
            ["prototype", f"u{u + 1}", *[repr(float(v)) for v in model.codebook[u]], int(unit_cells[u])]
        )
    atomic_write_text(path, buf.getvalue())
