"""Command-line front end: train maps, extract cells, score, visualize,
brute-force small instances, and benchmark a corpus of instances.

Every command is deterministic given its flags, and all file outputs are
written atomically (temp file plus rename).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import metrics
from ._util import atomic_write_text
from .cells import CellAssignment, build_view, form_cells
from .incidence import (
    IncidenceMatrix,
    MatrixFormatError,
    load_matrix,
    render_block_diagonal,
)
from .som import (
    MapGrid,
    SomModel,
    default_grid,
    default_schedule,
    init_codebook,
    load_model,
    quantization_error,
    save_model,
    train,
)
from .viz import (
    component_planes,
    compute_hits,
    compute_umatrix,
    export_scatter_data,
    export_svg,
    pca_project,
)

DEFAULT_SEED = 42
DEFAULT_RESTARTS = 10


class CliError(Exception):
    """User-facing command failure; message goes to stderr, exit code 2."""


def _parse_grid(text: str) -> MapGrid:
    try:
        rows_text, cols_text = text.lower().split("x")
        grid = MapGrid(int(rows_text), int(cols_text))
    except (ValueError, TypeError):
        raise argparse.ArgumentTypeError(
            f"grid must look like ROWSxCOLS with positive integers, got {text!r}"
        ) from None
    return grid


def _read_matrix(path, transpose: bool = False) -> IncidenceMatrix:
    try:
        matrix = load_matrix(path)
    except OSError as exc:
        raise CliError(f"cannot read matrix file {path}: {exc.strerror or exc}") from exc
    except MatrixFormatError as exc:
        raise CliError(f"{path}: {exc}") from exc
    return matrix.transposed() if transpose else matrix


def _read_model(path) -> SomModel:
    try:
        return load_model(path)
    except OSError as exc:
        raise CliError(f"cannot read model file {path}: {exc.strerror or exc}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise CliError(f"{path}: not a valid model file ({exc})") from exc


def default_kmax(matrix: IncidenceMatrix) -> int:
    return max(2, math.ceil(min(matrix.parts, matrix.machines) / 2))


def train_map(matrix: IncidenceMatrix, seed: int, grid: MapGrid | None = None) -> SomModel:
    """Initialize and train with the default schedule; the shared pipeline front half."""
    if grid is None:
        grid = default_grid(matrix.parts)
    model = init_codebook(grid, matrix, seed)
    return train(model, matrix, default_schedule(grid))


def extract_cells(model: SomModel, matrix: IncidenceMatrix, k_max: int | None = None):
    """Cells plus score for a trained model; the shared pipeline back half."""
    assignment = form_cells(model, matrix, k_max or default_kmax(matrix))
    return assignment, metrics.score(matrix, assignment)


def _assignment_dict(assignment: CellAssignment, matrix: IncidenceMatrix) -> dict:
    return {
        "k": assignment.k,
        "part_family": list(assignment.part_family),
        "machine_cell": list(assignment.machine_cell),
        "part_labels": list(matrix.part_labels),
        "machine_labels": list(matrix.machine_labels),
    }


def _load_assignment(path) -> CellAssignment:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        return CellAssignment(
            k=int(doc["k"]),
            part_family=tuple(doc["part_family"]),
            machine_cell=tuple(doc["machine_cell"]),
        )
    except OSError as exc:
        raise CliError(f"cannot read assignment file {path}: {exc.strerror or exc}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise CliError(f"{path}: not a valid assignment file ({exc})") from exc


def _check_dims(model: SomModel, matrix: IncidenceMatrix) -> None:
    if model.input_dim != matrix.machines:
        raise CliError(
            f"model expects {model.input_dim} machines but the matrix has {matrix.machines}; "
            "was it trained on a different instance?"
        )


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(args) -> int:
    matrix = _read_matrix(args.input, args.transpose)
    grid = args.grid or default_grid(matrix.parts)
    model = train_map(matrix, args.seed, grid)
    save_model(model, args.out)
    qe = quantization_error(model, matrix)
    print(
        f"trained {grid.rows}x{grid.cols} map on {matrix.parts} parts x "
        f"{matrix.machines} machines (seed {args.seed}); quantization error {qe:.6f}"
    )
    print(f"model written to {args.out}")
    return 0


def cmd_cells(args) -> int:
    matrix = _read_matrix(args.input, args.transpose)
    model = _read_model(args.model)
    _check_dims(model, matrix)
    assignment, grouping = extract_cells(model, matrix, args.kmax)
    view = build_view(assignment)
    print(render_block_diagonal(matrix, view), end="")
    print(f"cells: {assignment.k}")
    for cell in range(1, assignment.k + 1):
        machines = [matrix.machine_labels[j] for j, c in enumerate(assignment.machine_cell) if c == cell]
        parts = [matrix.part_labels[i] for i, f in enumerate(assignment.part_family) if f == cell]
        print(f"  cell {cell}: machines {{{', '.join(machines)}}} parts {{{', '.join(parts)}}}")
    print(f"grouping efficacy {grouping.efficacy_text}; efficiency (r={grouping.r:g}) = {grouping.efficiency:.4f}")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out_dir / "assignment.json", json.dumps(_assignment_dict(assignment, matrix), indent=1))
    atomic_write_text(out_dir / "score.json", json.dumps(grouping.to_dict(), indent=1))
    print(f"assignment and score written to {out_dir}")
    return 0


def cmd_metrics(args) -> int:
    matrix = _read_matrix(args.input, args.transpose)
    assignment = _load_assignment(args.assignment)
    try:
        grouping = metrics.score(matrix, assignment, r=args.r)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    print(f"n1={grouping.n1} exceptional={grouping.n1_out} voids={grouping.n0_in}")
    print(f"grouping efficacy {grouping.efficacy_text}")
    print(f"grouping efficiency (r={grouping.r:g}): eta1={grouping.eta1:.4f} eta2={grouping.eta2:.4f} eta={grouping.efficiency:.4f}")
    if args.out:
        atomic_write_text(args.out, json.dumps(grouping.to_dict(), indent=1))
        print(f"score written to {args.out}")
    return 0


def cmd_viz(args) -> int:
    matrix = _read_matrix(args.input, args.transpose)
    model = _read_model(args.model)
    _check_dims(model, matrix)
    assignment, _ = extract_cells(model, matrix, args.kmax)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    part_cells = assignment.part_family
    written: list[Path] = []

    def note(path):
        written.append(path)

    wanted = args.only or ("umatrix", "planes", "hits", "projection", "scatter")
    if "umatrix" in wanted:
        path = out_dir / "umatrix.svg"
        export_svg(compute_umatrix(model), path)
        note(path)
    if "planes" in wanted:
        for plane in component_planes(model, matrix.machine_labels):
            path = out_dir / f"plane_{plane.label}.svg"
            export_svg(plane, path)
            note(path)
    if "hits" in wanted:
        path = out_dir / "hits.svg"
        export_svg(compute_hits(model, matrix), path, part_cells=part_cells)
        note(path)
    if "projection" in wanted:
        path = out_dir / "projection.svg"
        export_svg(pca_project(model, matrix), path, part_cells=part_cells)
        note(path)
    if "scatter" in wanted:
        path = out_dir / "scatter.csv"
        export_scatter_data(model, matrix, assignment, path)
        note(path)
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_oracle(args) -> int:
    matrix = _read_matrix(args.input, args.transpose)
    try:
        assignment, efficacy = metrics.oracle_best_assignment(matrix, args.k)
    except metrics.OracleSizeError as exc:
        raise CliError(str(exc)) from exc
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    print(render_block_diagonal(matrix, build_view(assignment)), end="")
    print(
        f"optimal grouping efficacy (k <= {args.k}): "
        f"{efficacy.numerator}/{efficacy.denominator} = {float(efficacy):.4f} "
        f"with {assignment.k} cells"
    )
    if args.out:
        doc = _assignment_dict(assignment, matrix)
        doc["efficacy_num"] = efficacy.numerator
        doc["efficacy_den"] = efficacy.denominator
        doc["efficacy"] = float(efficacy)
        atomic_write_text(args.out, json.dumps(doc, indent=1))
        print(f"assignment written to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# bench harness


def _load_manifest(path: Path) -> list[dict]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read manifest {path}: {exc.strerror or exc}") from exc
    except ValueError as exc:
        raise CliError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, list):
        raise CliError(f"{path}: manifest must be a JSON array of cases")
    return doc


def _bench_case(case: dict, base_dir: Path, restarts: int, base_seed: int, grid: MapGrid | None, kmax: int | None) -> dict:
    name = str(case.get("name", "unnamed"))
    row = {
        "name": name,
        "parts": None,
        "machines": None,
        "k": None,
        "mu_num": None,
        "mu_den": None,
        "mu": None,
        "target": None,
        "delta": None,
        "seconds": None,
        "best_seed": None,
        "error": None,
    }
    start = time.perf_counter()
    try:
        target = case.get("target_efficacy")
        if target is not None:
            target = float(target)
            if not 0.0 < target <= 1.0:
                raise ValueError(f"target_efficacy must lie in (0, 1], got {target}")
        row["target"] = target
        rel = case.get("path")
        if not rel:
            raise ValueError("case has no matrix path")
        matrix = _read_matrix(base_dir / rel, bool(case.get("transpose", False)))
        row["parts"], row["machines"] = matrix.parts, matrix.machines
        best: tuple[Fraction, CellAssignment, int] | None = None
        for i in range(restarts):
            seed = base_seed + i
            model = train_map(matrix, seed, grid)
            assignment, grouping = extract_cells(model, matrix, kmax)
            if best is None or grouping.efficacy > best[0]:
                best = (grouping.efficacy, assignment, seed)
        efficacy, assignment, seed = best
        row.update(
            k=assignment.k,
            mu_num=efficacy.numerator,
            mu_den=efficacy.denominator,
            mu=float(efficacy),
            best_seed=seed,
        )
        if target is not None:
            row["delta"] = float(efficacy) - target
    except (CliError, ValueError, MatrixFormatError) as exc:
        row["error"] = str(exc)
    row["seconds"] = time.perf_counter() - start
    return row


def _bench_report_csv(rows: list[dict]) -> str:
    lines = ["name,P,M,k,mu_num,mu_den,mu,target,delta,seconds"]
    for row in rows:

        def fmt(key, spec=""):
            value = row[key]
            return "" if value is None else format(value, spec)

        lines.append(
            ",".join(
                [
                    row["name"],
                    fmt("parts"),
                    fmt("machines"),
                    fmt("k"),
                    fmt("mu_num"),
                    fmt("mu_den"),
                    fmt("mu", ".6f"),
                    fmt("target", ".6f"),
                    fmt("delta", ".6f"),
                    fmt("seconds", ".3f"),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def cmd_bench(args) -> int:
    corpus = Path(args.corpus)
    manifest_path = Path(args.manifest) if args.manifest else corpus / "manifest.json"
    cases = _load_manifest(manifest_path)
    workers = args.jobs or min(4, max(1, len(cases)))
    if cases:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(
                pool.map(
                    lambda case: _bench_case(case, corpus, args.restarts, args.seed, args.grid, args.kmax),
                    cases,
                )
            )
    else:
        rows = []

    matched = improved = regressed = errors = 0
    for row in rows:
        if row["error"] is not None:
            errors += 1
            print(f"{row['name']}: ERROR {row['error']}")
            continue
        note = ""
        if row["delta"] is not None:
            # 4-decimal reporting resolution decides the verdict
            if abs(row["delta"]) <= 5e-5:
                matched += 1
                note = f" (target {row['target']:.4f}, matched)"
            elif row["delta"] > 0:
                improved += 1
                note = f" (target {row['target']:.4f}, improved by {row['delta']:+.4f})"
            else:
                regressed += 1
                note = f" (target {row['target']:.4f}, regressed by {row['delta']:+.4f})"
        print(
            f"{row['name']}: {row['parts']}x{row['machines']} k={row['k']} "
            f"mu={row['mu_num']}/{row['mu_den']}={row['mu']:.4f}{note} "
            f"[{row['seconds']:.2f}s, best seed {row['best_seed']}]"
        )
    print(
        f"summary: {len(rows)} cases, {matched} matched, {improved} improved, "
        f"{regressed} regressed, {errors} errors "
        f"(restarts {args.restarts}, seeds {args.seed}..{args.seed + args.restarts - 1})"
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out_dir / "report.csv", _bench_report_csv(rows))
    report = {
        "restarts": args.restarts,
        "base_seed": args.seed,
        "cases": rows,
        "summary": {
            "cases": len(rows),
            "matched": matched,
            "improved": improved,
            "regressed": regressed,
            "errors": errors,
        },
    }
    atomic_write_text(out_dir / "report.json", json.dumps(report, indent=1))
    print(f"report written to {out_dir}")
    # regressions are reported, not fatal: exit 0 so sweeps keep running
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="somcell",
        description="Train self-organizing maps on part-machine incidence matrices and extract manufacturing cells.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_matrix_flags(sp):
        sp.add_argument("--input", required=True, help="matrix file (header 'P M', then P rows of M 0/1 tokens)")
        sp.add_argument("--transpose", action="store_true", help="treat file rows as machines instead of parts")

    sp = sub.add_parser("train", help="train a map and write the model JSON")
    add_matrix_flags(sp)
    sp.add_argument("--grid", type=_parse_grid, default=None, help="ROWSxCOLS (default: near-square, about 5*sqrt(P) units)")
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.add_argument("--out", required=True, help="model output path")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("cells", help="extract cells from a trained model and score them")
    add_matrix_flags(sp)
    sp.add_argument("--model", required=True, help="model JSON from `somcell train`")
    sp.add_argument("--kmax", type=int, default=None, help="largest cell count to try (default max(2, ceil(min(P, M)/2)))")
    sp.add_argument("--out-dir", default="cells-out", help="where assignment.json and score.json go")
    sp.set_defaults(func=cmd_cells)

    sp = sub.add_parser("metrics", help="score an existing assignment against a matrix")
    add_matrix_flags(sp)
    sp.add_argument("--assignment", required=True, help="assignment JSON (as written by `somcell cells`)")
    sp.add_argument("--r", type=float, default=0.5, help="efficiency weight between in-block density and off-block sparsity")
    sp.add_argument("--out", default=None, help="optional score JSON output path")
    sp.set_defaults(func=cmd_metrics)

    sp = sub.add_parser("viz", help="render map surfaces as SVG plus a scatter CSV")
    add_matrix_flags(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--kmax", type=int, default=None)
    sp.add_argument("--out-dir", default="viz-out")
    sp.add_argument(
        "--only",
        action="append",
        choices=["umatrix", "planes", "hits", "projection", "scatter"],
        help="restrict output (repeatable)",
    )
    sp.set_defaults(func=cmd_viz)

    sp = sub.add_parser("oracle", help="exhaustive best assignment for small instances")
    add_matrix_flags(sp)
    sp.add_argument("--k", type=int, default=2, help="largest number of cells to consider (at most 3)")
    sp.add_argument("--out", default=None, help="optional assignment JSON output path")
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("bench", help="run the pipeline over a corpus and compare to targets")
    sp.add_argument("--corpus", required=True, help="directory with matrix files (and manifest.json unless --manifest)")
    sp.add_argument("--manifest", default=None, help="manifest JSON (default: <corpus>/manifest.json)")
    sp.add_argument("--restarts", type=int, default=DEFAULT_RESTARTS, help="seeds per case; the best efficacy wins")
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED, help="base seed; restart i uses seed+i")
    sp.add_argument("--grid", type=_parse_grid, default=None, help="override the per-case default grid")
    sp.add_argument("--kmax", type=int, default=None)
    sp.add_argument("--jobs", type=int, default=None, help="worker threads (default: min(4, cases))")
    sp.add_argument("--out-dir", default="bench-out", help="where report.csv and report.json go")
    sp.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
