"""Command line: support selection, mesh deformation, analysis metrics and
an m-sweep benchmark, plus a generator for the desk-scale wing case.

All outputs are MDK1 meshes or CSV. Runs are deterministic given a config
and seed; only the timing columns vary between runs.
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from .core import deform_points
from .deformers import BendTwistParams, SpanSineParams, bend_twist, prescribe, span_sine
from .errors import RBFDeformError
from .meshio import (
    Mesh,
    read_displacements,
    read_mesh,
    read_supports_csv,
    write_history_csv,
    write_mesh,
    write_supports_csv,
)
from .metrics import kl_divergence, quality_report
from .selection import (
    BoundarySet,
    SelectionConfig,
    error_stage_cost,
    gcb_select,
    greedy_select,
    random_select,
)
from .synthetic import swept_wing_case

BENCH_HEADER = "m,n_supports,converged,iterations,cum_kernel_evals,t1_s,t2_s,t3_s"


def _load_mesh(path):
    with open(path) as f:
        return read_mesh(f)


def _displacement_source(args, mesh):
    """Prescribed displacements for the mesh boundary from exactly one of
    --disp or --deform-mode."""
    if (args.disp is None) == (args.deform_mode is None):
        raise RBFDeformError("exactly one of --disp or --deform-mode is required")
    points = mesh.boundary_points()
    if args.disp is not None:
        with open(args.disp) as f:
            field = read_displacements(f, mesh.boundary)
        return prescribe(points, field=field)
    if args.b is None:
        raise RBFDeformError(f"--deform-mode {args.deform_mode} requires --b")
    if args.deform_mode == "bend-twist":
        if args.theta_m is None:
            raise RBFDeformError("--deform-mode bend-twist requires --theta-m")
        params = BendTwistParams(b=args.b, theta_m=args.theta_m, x0=args.x0, y0=args.y0)
        return prescribe(points, deformer=lambda p: bend_twist(p, params))
    if args.c is None:
        raise RBFDeformError("--deform-mode span-sine requires --c")
    params = SpanSineParams(b=args.b, c=args.c)
    return prescribe(points, deformer=lambda p: span_sine(p, params))


def resolve_auto_m(boundary, radius, tol, seed=0, workers=1, probe_cap=200):
    """Group count from a short greedy probe.

    Runs greedy selection to the earlier of ``probe_cap`` supports or the
    tolerance, extrapolates the final support count from the error-decay
    slope, and returns round(1.5 * N_b / N_c_hat) clamped to [1, N_b],
    i.e. the middle of the recommended [N_b/N_c, 2*N_b/N_c] band.
    """
    nb = len(boundary)
    cap = min(probe_cap, nb)
    config = SelectionConfig(
        radius=radius, tol=tol, max_supports=max(cap, 3), seed=seed, workers=workers
    )
    probe = greedy_select(boundary, config)
    n_probe = len(probe.support)
    if probe.converged:
        n_hat = n_probe
    else:
        # With m = 1 every over-tolerance visit adds a node, so the support
        # count at record r is 3 + its position; fit the decay on the tail.
        errors = np.array([r.local_max_error for r in probe.history.records])
        counts = 3.0 + np.arange(len(errors))
        tail = slice(len(errors) // 2, None)
        loge = np.log(np.maximum(errors[tail], 1e-300))
        slope, intercept = np.polyfit(counts[tail], loge, 1)
        if slope >= 0:
            n_hat = nb
        else:
            n_hat = (np.log(tol) - intercept) / slope
        n_hat = min(max(n_hat, n_probe), nb)
    return int(np.clip(round(1.5 * nb / n_hat), 1, nb))


def _resolve_m(args, boundary):
    if args.algorithm == "greedy":
        return 1
    if args.m == "auto":
        return resolve_auto_m(
            boundary, args.radius, args.tol, seed=args.seed, workers=args.workers
        )
    try:
        return int(args.m)
    except ValueError:
        raise RBFDeformError(f"--m must be an integer or 'auto', got {args.m!r}") from None


def _run_selection(args, boundary):
    m = _resolve_m(args, boundary)
    config = SelectionConfig(
        radius=args.radius,
        tol=args.tol,
        max_supports=args.max_supports if args.max_supports else len(boundary),
        m=m,
        seed=args.seed,
        workers=args.workers,
    )
    select = gcb_select if args.algorithm == "gcb" else greedy_select
    return select(boundary, config), m


def _print_selection_summary(result, m, boundary, tol):
    history = result.history
    t1 = sum(r.t1_s for r in history.records)
    t2 = sum(r.t2_s for r in history.records)
    sweep = history.final_sweep
    print(f"supports: {len(result.support)} of {len(boundary)} boundary nodes (m={m})")
    print(f"converged: {str(result.converged).lower()} "
          f"(final sweep max error {sweep.local_max_error:.6e}, tol {tol:g})")
    print(f"iterations: {len(history.records)}")
    print(f"error-stage kernel evals: {error_stage_cost(history)}")
    print(f"t1 error stage: {t1:.6f} s")
    print(f"t2 solve stage: {t2:.6f} s")


def cmd_select(args):
    mesh = _load_mesh(args.mesh)
    boundary = mesh.boundary_set(_displacement_source(args, mesh))
    result, m = _run_selection(args, boundary)
    if args.history:
        Path(args.history).write_text(write_history_csv(result.history))
    if args.supports_out:
        Path(args.supports_out).write_text(write_supports_csv(result.support))
    _print_selection_summary(result, m, boundary, args.tol)
    if result.converged:
        return 0
    # Stopping at the cap is fine when the user asked for that cap.
    return 0 if args.max_supports else 1


def cmd_deform(args):
    mesh = _load_mesh(args.mesh)
    boundary = mesh.boundary_set(_displacement_source(args, mesh))
    if args.supports:
        support = read_supports_csv(Path(args.supports[0]).read_text())
        history = None
    else:
        result, m = _run_selection(args, boundary)
        support = result.support
        history = result.history
        _print_selection_summary(result, m, boundary, args.tol)
    t0 = time.perf_counter()
    moved = deform_points(mesh.nodes, support, args.radius, args.workers)
    t3 = time.perf_counter() - t0
    if history is not None:
        history.t3_s = t3
        if args.history:
            Path(args.history).write_text(write_history_csv(history))
    if args.supports_out:
        Path(args.supports_out).write_text(write_supports_csv(support))
    deformed = Mesh(nodes=moved, boundary=mesh.boundary, cells=mesh.cells)
    Path(args.out).write_text(write_mesh(deformed))
    print(f"t3 volume evaluation: {t3:.6f} s ({mesh.n_nodes} nodes)")
    print(f"wrote {args.out}")
    return 0


def _quality_rows(label, mesh):
    report = quality_report(mesh.cells, mesh.nodes)
    rows = [
        (label, "cells", str(len(report.q))),
        (label, "min", repr(report.q_min)),
        (label, "mean", repr(report.q_mean)),
    ]
    rows.extend(
        (label, f"hist_{0.05 * b:.2f}", str(int(count)))
        for b, count in enumerate(report.histogram)
    )
    return rows


def cmd_metrics(args):
    before = _load_mesh(args.mesh)
    rows = _quality_rows("quality_before", before)
    if args.deformed:
        rows += _quality_rows("quality_after", _load_mesh(args.deformed))

    named = [
        (Path(path).stem, read_supports_csv(Path(path).read_text()))
        for path in args.supports or []
    ]
    if named or args.random:
        if before.n_boundary == 0:
            raise RBFDeformError("support-set metrics need a mesh with boundary nodes")
        geometry = BoundarySet(
            before.boundary,
            before.boundary_points(),
            np.zeros((before.n_boundary, 3)),
        )
        for k, spec in enumerate(args.random or [], start=1):
            try:
                n, seed = (int(v) for v in spec.split(":"))
            except ValueError:
                raise RBFDeformError(
                    f"--random expects N:SEED, got {spec!r}"
                ) from None
            named.append((f"random{k}", random_select(geometry, n, seed, args.radius)))
        for label_a, set_a in named:
            for label_b, set_b in named:
                if label_a != label_b:
                    value = kl_divergence(set_a, set_b, geometry)
                    rows.append(("kl", f"{label_a}||{label_b}", repr(value)))

    text = "section,key,value\n" + "\n".join(",".join(r) for r in rows) + "\n"
    if args.report:
        Path(args.report).write_text(text)
        print(f"wrote {args.report}")
    else:
        print(text, end="")
    return 0


def cmd_bench(args):
    mesh = _load_mesh(args.mesh)
    boundary = mesh.boundary_set(_displacement_source(args, mesh))
    try:
        m_list = [int(v) for v in args.m_list.split(",") if v]
    except ValueError:
        raise RBFDeformError(f"--m-list expects integers, got {args.m_list!r}") from None
    if not m_list:
        raise RBFDeformError("--m-list is empty")

    max_supports = args.max_supports if args.max_supports else len(boundary)

    def run(m):
        config = SelectionConfig(
            radius=args.radius,
            tol=args.tol,
            max_supports=max_supports,
            m=m,
            seed=args.seed,
            workers=args.workers,
        )
        return gcb_select(boundary, config)

    run(m_list[0])  # warm-up, excluded from timing
    rows = [BENCH_HEADER]
    for m in m_list:
        result = run(m)
        history = result.history
        t0 = time.perf_counter()
        deform_points(mesh.nodes, result.support, args.radius, args.workers)
        t3 = time.perf_counter() - t0
        history.t3_s = t3
        rows.append(
            f"{m},{len(result.support)},{str(result.converged).lower()},"
            f"{len(history.records)},{error_stage_cost(history)},"
            f"{sum(r.t1_s for r in history.records)!r},"
            f"{sum(r.t2_s for r in history.records)!r},{t3!r}"
        )
    text = "\n".join(rows) + "\n"
    Path(args.out).write_text(text)
    print(text, end="")
    return 0


def cmd_make_wing(args):
    mesh = swept_wing_case(
        n_span=args.n_span,
        n_section=args.n_section,
        n_layers=args.n_layers,
        box_n=args.box_n,
        seed=args.seed,
    )
    Path(args.out).write_text(write_mesh(mesh))
    print(
        f"wrote {args.out}: {mesh.n_nodes} nodes "
        f"({mesh.n_boundary} boundary, {mesh.n_nodes - mesh.n_boundary} volume), "
        f"{len(mesh.cells)} surface cells"
    )
    return 0


def _add_source_flags(p):
    p.add_argument("--disp", help="MDK1-DISP displacement file")
    p.add_argument(
        "--deform-mode",
        choices=["bend-twist", "span-sine"],
        help="analytic displacement mode",
    )
    p.add_argument("--b", type=float, help="root chord (bend-twist) or span (span-sine)")
    p.add_argument("--theta-m", type=float, help="max twist angle, degrees")
    p.add_argument("--x0", type=float, default=0.0, help="twist pivot x")
    p.add_argument("--y0", type=float, default=0.0, help="twist pivot y")
    p.add_argument("--c", type=float, help="mean aerodynamic chord (span-sine)")


def _add_selection_flags(p):
    p.add_argument("--radius", type=float, default=7.0, help="RBF support radius")
    p.add_argument("--tol", type=float, default=1e-6, help="allowable interpolation error")
    p.add_argument("--algorithm", choices=["greedy", "gcb"], default="greedy")
    p.add_argument("--m", default="1", help="group count for gcb, or 'auto'")
    p.add_argument("--seed", type=int, default=0, help="partition RNG seed")
    p.add_argument("--max-supports", type=int, default=None, help="support-count cap")
    p.add_argument("--workers", type=int, default=1, help="threads for scans")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rbfdeform",
        description="RBF mesh deformation with greedy support-node reduction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("select", help="select support nodes")
    p.add_argument("--mesh", required=True, help="MDK1 mesh file")
    _add_source_flags(p)
    _add_selection_flags(p)
    p.add_argument("--history", help="write per-iteration history CSV here")
    p.add_argument("--supports-out", help="write selected supports CSV here")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("deform", help="deform a mesh")
    p.add_argument("--mesh", required=True, help="MDK1 mesh file")
    _add_source_flags(p)
    _add_selection_flags(p)
    p.add_argument("--supports", nargs=1, help="reuse a selection (supports CSV)")
    p.add_argument("--history", help="write per-iteration history CSV here")
    p.add_argument("--supports-out", help="write selected supports CSV here")
    p.add_argument("--out", required=True, help="deformed MDK1 mesh path")
    p.set_defaults(func=cmd_deform)

    p = sub.add_parser("metrics", help="quality reports and KL divergences")
    p.add_argument("--mesh", required=True, help="undeformed MDK1 mesh")
    p.add_argument("--deformed", help="deformed MDK1 mesh")
    p.add_argument("--supports", nargs="+", help="supports CSVs to compare")
    p.add_argument(
        "--random",
        action="append",
        metavar="N:SEED",
        help="add a random baseline support set (repeatable)",
    )
    p.add_argument("--radius", type=float, default=7.0, help="RBF support radius")
    p.add_argument("--report", help="write the report CSV here")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("bench", help="m-sweep benchmark")
    p.add_argument("--mesh", required=True, help="MDK1 mesh file")
    _add_source_flags(p)
    _add_selection_flags(p)
    p.add_argument("--m-list", required=True, help="comma-separated group counts")
    p.add_argument("--out", required=True, help="benchmark CSV path")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("make-wing", help="generate the desk-scale wing mesh")
    p.add_argument("--out", required=True, help="MDK1 mesh path")
    p.add_argument("--n-span", type=int, default=50)
    p.add_argument("--n-section", type=int, default=100)
    p.add_argument("--n-layers", type=int, default=39)
    p.add_argument("--box-n", type=int, default=17)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_make_wing)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as err:  # RBFDeformError is a ValueError
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
