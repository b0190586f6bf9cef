"""Hexagonal self-organizing map: lattice geometry, codebook init, online training.

Training is the classic sequential scheme. For each sample the best
matching unit (BMU) is the codebook row nearest in Euclidean distance, and
every unit then moves toward the sample by a Gaussian factor of its lattice
distance to the BMU, scaled by the current learning rate. Learning rate and
neighborhood radius decay linearly inside each schedule phase.

Everything here is deterministic: sample order is a seeded shuffle per
epoch, initialization is seeded, and retraining the same model on the same
data reproduces the codebook bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from . import kernels, pca
from ._util import atomic_write_text

_ROW_PITCH = math.sqrt(3.0) / 2.0
_RANK_TOL = 1e-9


@dataclass(frozen=True)
class MapGrid:
    """Hexagonal unit lattice; odd rows shift half a unit right, rows sqrt(3)/2 apart.

    Units are indexed row-major: unit ``(r, c)`` has flat index ``r * cols + c``.
    """

    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid needs at least one row and one column")

    @property
    def units(self) -> int:
        return self.rows * self.cols

    def unit_index(self, row: int, col: int) -> int:
        return row * self.cols + col

    @cached_property
    def coords(self) -> np.ndarray:
        """(units, 2) plane positions of unit centers, adjacent centers distance 1."""
        flat = np.arange(self.units)
        rows = flat // self.cols
        cols = flat % self.cols
        x = cols + 0.5 * (rows % 2)
        y = rows * _ROW_PITCH
        out = np.column_stack([x, y])
        out.flags.writeable = False
        return out

    @cached_property
    def distance_sq(self) -> np.ndarray:
        """(units, units) squared plane distance between unit centers."""
        delta = self.coords[:, None, :] - self.coords[None, :, :]
        out = (delta * delta).sum(axis=2)
        out.flags.writeable = False
        return out

    @cached_property
    def neighbor_pairs(self) -> np.ndarray:
        """(n_pairs, 2) adjacent unit pairs (a < b), plane distance exactly 1."""
        a, b = np.nonzero(np.abs(self.distance_sq - 1.0) < 1e-9)
        keep = a < b
        out = np.column_stack([a[keep], b[keep]])
        out.flags.writeable = False
        return out


@dataclass(frozen=True)
class Phase:
    """One schedule leg; alpha and sigma interpolate linearly over its steps."""

    epochs: int
    alpha_start: float
    alpha_end: float
    sigma_start: float
    sigma_end: float

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("phase needs at least one epoch")
        if not 0.0 <= self.alpha_end <= self.alpha_start <= 1.0:
            raise ValueError("alpha must decay within [0, 1]")
        if not 0.0 <= self.sigma_end <= self.sigma_start:
            raise ValueError("sigma must decay and stay non-negative")


@dataclass(frozen=True)
class TrainingSchedule:
    phases: tuple[Phase, ...]

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(self.phases))
        if self.phases and self.phases[-1].sigma_end > 1.0:
            raise ValueError("the last phase must end with sigma <= 1")

    @property
    def total_epochs(self) -> int:
        return sum(ph.epochs for ph in self.phases)

    def step_values(self, samples_per_epoch: int):
        """Per-step (alpha, sigma) arrays across all phases."""
        alphas = []
        sigmas = []
        for ph in self.phases:
            steps = ph.epochs * samples_per_epoch
            frac = np.arange(steps, dtype=np.float64) / max(steps - 1, 1)
            alphas.append(ph.alpha_start + (ph.alpha_end - ph.alpha_start) * frac)
            sigmas.append(ph.sigma_start + (ph.sigma_end - ph.sigma_start) * frac)
        return np.concatenate(alphas), np.concatenate(sigmas)

    def to_dicts(self) -> list[dict]:
        return [
            {
                "epochs": ph.epochs,
                "alpha_start": ph.alpha_start,
                "alpha_end": ph.alpha_end,
                "sigma_start": ph.sigma_start,
                "sigma_end": ph.sigma_end,
            }
            for ph in self.phases
        ]


def default_schedule(grid: MapGrid) -> TrainingSchedule:
    """A rough ordering pass followed by a longer low-rate finetune pass."""
    sigma0 = max(1.0, max(grid.rows, grid.cols) / 2.0)
    return TrainingSchedule(
        (
            Phase(epochs=10, alpha_start=0.5, alpha_end=0.05, sigma_start=sigma0, sigma_end=1.0),
            Phase(epochs=20, alpha_start=0.05, alpha_end=0.01, sigma_start=1.0, sigma_end=0.1),
        )
    )


def default_grid(parts: int) -> MapGrid:
    """Smallest near-square grid holding at least ceil(5 * sqrt(parts)) units."""
    if parts < 1:
        raise ValueError("parts must be positive")
    target = math.ceil(5.0 * math.sqrt(parts))
    base = math.isqrt(target)
    if base * base >= target:
        rows, cols = base, base
    elif base * (base + 1) >= target:
        rows, cols = base + 1, base
    else:
        rows, cols = base + 1, base + 1
    return MapGrid(rows, cols)


@dataclass(frozen=True, eq=False)
class SomModel:
    """Immutable trained (or initialized) map: grid plus one reference vector per unit."""

    grid: MapGrid
    codebook: np.ndarray
    input_dim: int
    seed: int
    trained_epochs: int = 0
    schedule: TrainingSchedule | None = None

    def __post_init__(self):
        cb = np.ascontiguousarray(np.asarray(self.codebook, dtype=np.float64))
        if cb.shape != (self.grid.units, self.input_dim):
            raise ValueError("codebook shape must be (grid units, input_dim)")
        if not np.isfinite(cb).all():
            raise ValueError("codebook entries must be finite")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        cb.flags.writeable = False
        object.__setattr__(self, "codebook", cb)


def _as_rows(data) -> np.ndarray:
    """Accept an IncidenceMatrix or a plain 2-D array of sample rows."""
    values = getattr(data, "values", data)
    rows = np.ascontiguousarray(np.asarray(values, dtype=np.float64))
    if rows.ndim != 2:
        raise ValueError("training data must be 2-D (samples by features)")
    return rows


def init_codebook(grid: MapGrid, data, seed: int) -> SomModel:
    """Deterministic codebook spanning the top two principal directions.

    Units are laid out linearly along the principal plane of the data, the
    longer grid side along the first component, scaled by the square roots
    of the eigenvalues and then shrunk, if needed, so every component stays
    inside the data's componentwise range. When the data has fewer than two
    informative directions the codebook falls back to a small seeded box
    around the data mean (every unit within 0.2 of it).
    """
    rows = _as_rows(data)
    n_samples, dim = rows.shape
    mean = rows.mean(axis=0)
    lam = vecs = None
    if n_samples >= 2 and dim >= 2:
        centered = rows - mean
        cov = centered.T @ centered / (n_samples - 1)
        lam, vecs = pca.top_eigenpairs(cov, count=2)
    if lam is None or lam[0] <= _RANK_TOL or lam[1] <= _RANK_TOL * max(lam[0], 1.0):
        rng = np.random.default_rng(seed)
        offsets = rng.uniform(-0.1, 0.1, size=(grid.units, dim)) / math.sqrt(dim)
        codebook = mean + offsets
    else:
        flat = np.arange(grid.units)
        r = flat // grid.cols
        c = flat % grid.cols
        along_rows = 2.0 * r / (grid.rows - 1) - 1.0 if grid.rows > 1 else np.zeros(grid.units)
        along_cols = 2.0 * c / (grid.cols - 1) - 1.0 if grid.cols > 1 else np.zeros(grid.units)
        if grid.rows >= grid.cols:
            major, minor = along_rows, along_cols
        else:
            major, minor = along_cols, along_rows
        offsets = np.outer(major, math.sqrt(lam[0]) * vecs[0]) + np.outer(
            minor, math.sqrt(lam[1]) * vecs[1]
        )
        # shrink uniformly so no component leaves the data's hull
        lo = rows.min(axis=0)
        hi = rows.max(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            room_up = np.where(offsets > 1e-9, (hi - mean) / offsets, np.inf)
            room_dn = np.where(offsets < -1e-9, (lo - mean) / offsets, np.inf)
        scale = min(1.0, float(room_up.min()), float(room_dn.min()))
        codebook = np.clip(mean + scale * offsets, lo, hi)
    return SomModel(grid=grid, codebook=codebook, input_dim=dim, seed=int(seed))


def find_bmu(model: SomModel, x) -> int:
    """Flat index of the codebook row nearest to ``x``; ties go to the lowest index."""
    xv = np.asarray(x, dtype=np.float64).reshape(-1)
    if xv.shape[0] != model.input_dim:
        raise ValueError(f"input has {xv.shape[0]} features, model expects {model.input_dim}")
    return int(kernels.batch_bmu(model.codebook, xv[None, :])[0])


def train(model: SomModel, data, schedule: TrainingSchedule) -> SomModel:
    """Run the schedule over the data and return the trained model.

    The input model is untouched. Sample order is a fresh seeded shuffle per
    epoch derived from (model seed, epochs already trained), so repeated
    calls are deterministic and continued training does not replay the same
    shuffles.
    """
    rows = _as_rows(data)
    if rows.shape[1] != model.input_dim:
        raise ValueError(f"data has {rows.shape[1]} features, model expects {model.input_dim}")
    if not schedule.phases:
        raise ValueError("empty schedule")
    n_samples = rows.shape[0]
    alphas, sigmas = schedule.step_values(n_samples)
    epochs = schedule.total_epochs
    rng = np.random.default_rng([model.seed, model.trained_epochs])
    orders = np.stack([rng.permutation(n_samples) for _ in range(epochs)]).astype(np.int64)
    codebook = kernels.train_run(
        model.codebook, rows, orders, alphas, sigmas, model.grid.distance_sq
    )
    return replace(
        model,
        codebook=codebook,
        trained_epochs=model.trained_epochs + epochs,
        schedule=schedule,
    )


def quantization_error(model: SomModel, data) -> float:
    """Mean Euclidean distance from each sample to its BMU's codebook vector."""
    rows = _as_rows(data)
    if rows.shape[1] != model.input_dim:
        raise ValueError(f"data has {rows.shape[1]} features, model expects {model.input_dim}")
    bmus = kernels.batch_bmu(model.codebook, rows)
    return float(np.linalg.norm(rows - model.codebook[bmus], axis=1).mean())


def save_model(model: SomModel, path) -> None:
    """Serialize to JSON; float values round-trip exactly through load_model."""
    doc = {
        "format": "somcell-model",
        "version": 1,
        "grid": {"rows": model.grid.rows, "cols": model.grid.cols, "topology": "hexagonal"},
        "input_dim": model.input_dim,
        "seed": model.seed,
        "trained_epochs": model.trained_epochs,
        "schedule": model.schedule.to_dicts() if model.schedule is not None else None,
        "codebook": [[float(v) for v in row] for row in model.codebook],
    }
    atomic_write_text(path, json.dumps(doc, indent=1))


def load_model(path) -> SomModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "somcell-model":
        raise ValueError(f"{path}: not a somcell model file")
    schedule = None
    if doc.get("schedule"):
        schedule = TrainingSchedule(tuple(Phase(**ph) for ph in doc["schedule"]))
    return SomModel(
        grid=MapGrid(doc["grid"]["rows"], doc["grid"]["cols"]),
        codebook=np.array(doc["codebook"], dtype=np.float64),
        input_dim=int(doc["input_dim"]),
        seed=int(doc["seed"]),
        trained_epochs=int(doc["trained_epochs"]),
        schedule=schedule,
    )
