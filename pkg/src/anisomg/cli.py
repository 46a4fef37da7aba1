"""Command-line front end: ``anisomg mesh|sweep|verify|lower-bound|solve``."""
from __future__ import annotations

import argparse
import csv
import io
import math
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import mesh as meshmod
from .assembly import DofMap, assemble_mass
from .strips import build_strips
from .twolevel import build_case, estimate_rate, solve

CSV_COLUMNS = ["omega", "level", "h", "epsilon", "smoother", "rate", "K_est", "iterations",
               "converged"]
LOWER_BOUND_COLUMNS = ["epsilon", "level", "h", "R", "R*(eps+h^2)", "measured_rate"]
DEFAULT_EPS = [10.0**-k for k in range(9)]
SMOOTHERS = {"point": "point-gs", "line": "line-gs"}

_ANGLE = re.compile(r"^\s*(?P<num>[-+]?\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(?P<den>\d+\.?\d*))?\s*$")


def parse_angle(text: str) -> float:
    """Radians from ``0.5236``, ``pi``, ``pi/6``, ``2pi/3`` or ``2*pi/3``."""
    text = text.strip().lower()
    try:
        return float(text)
    except ValueError:
        pass
    m = _ANGLE.match(text)
    if not m:
        raise argparse.ArgumentTypeError(f"cannot parse angle {text!r}")
    num = m.group("num")
    factor = float(num) if num not in ("", "+", "-") else (-1.0 if num == "-" else 1.0)
    den = float(m.group("den")) if m.group("den") else 1.0
    return factor * math.pi / den


def parse_levels(text: str) -> list[int]:
    """``1-5`` (inclusive range), ``1,3,4`` or ``4``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = (int(p) for p in part.split("-", 1))
            out.extend(range(lo, hi + 1))
        elif part:
            out.append(int(part))
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError(f"levels must be >= 1, got {text!r}")
    return out


@dataclass
class SweepSpec:
    omegas: list
    levels: list
    epsilons: list
    smoothers: list
    N0: int = 4
    strip_width: float | None = None
    ordering: str = "forward"
    seed: int = 42
    tol: float = 1e-8
    max_iter: int = 2000
    base_mesh: str | None = None  # mesh text of a loaded coarsest mesh

    def __post_init__(self):
        if not (self.omegas and self.levels and self.epsilons and self.smoothers):
            raise ValueError("sweep lists must be non-empty")
        if min(self.levels) < 1:
            raise ValueError("levels must be >= 1")

    def cases(self):
        for omega in self.omegas:
            for smoother in self.smoothers:
                for level in self.levels:
                    for eps in self.epsilons:
                        yield omega, level, eps, smoother


def run_case(spec: SweepSpec, omega, level, eps, smoother):
    """One sweep row; failures become a non-converged row with a NaN rate."""
    base = meshmod.load_mesh(spec.base_mesh) if spec.base_mesh else None
    try:
        op = build_case(spec.N0, omega, level, eps, smoother, ordering=spec.ordering,
                        strip_width=spec.strip_width, base=base)
        if base is not None:
            op.omega = omega
        rep = estimate_rate(op, tol=spec.tol, max_iter=spec.max_iter, seed=spec.seed)
        K = rep.K_est
        return [repr(float(omega)), level, repr(float(rep.h)), repr(float(eps)), smoother,
                repr(float(rep.rate)), "" if K is None else repr(float(K)), rep.iterations,
                int(rep.converged)]
    except Exception as exc:  # recorded in the row, never aborts the sweep
        print(f"case omega={omega} level={level} eps={eps} {smoother} failed: {exc}",
              file=sys.stderr)
        return [repr(float(omega)), level, "nan", repr(float(eps)), smoother, "nan", "", 0, 0]


def _run_case_star(args):
    return run_case(*args)


def sweep_rows(spec: SweepSpec, workers: int | None = None) -> list[list]:
    """Rows in spec order; cases run on ``workers`` processes (``ANISO_THREADS``)."""
    if workers is None:
        workers = int(os.environ.get("ANISO_THREADS", "1") or 1)
    jobs = [(spec, *case) for case in spec.cases()]
    if workers <= 1:
        return [run_case(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_case_star, jobs))


def rows_to_csv(rows, columns=CSV_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def read_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def plot_rates(rows: list[dict], path: Path, title: str):
    """Rate vs log10(eps), one polyline per level, as a self-contained SVG."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "anisomg"
    matplotlib.rcParams["svg.fonttype"] = "path"
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for level in sorted({int(r["level"]) for r in rows}):
        sel = sorted((r for r in rows if int(r["level"]) == level),
                     key=lambda r: float(r["epsilon"]))
        x = [math.log10(float(r["epsilon"])) for r in sel]
        y = [float(r["rate"]) for r in sel]
        ax.plot(x, y, marker="o", ms=3, label=f"k={level}")
    ax.set_xlabel(r"$\log_{10}\,\epsilon$")
    ax.set_ylabel(r"rate $\|E_{TL}\|_a^2$")
    ax.set_ylim(0.0, 1.0)
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# -- subcommands -------------------------------------------------------------------

def _write(text: str, out: str | None):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _read_mesh(path: str) -> meshmod.Mesh:
    return meshmod.load_mesh(Path(path).read_text())


def cmd_mesh(args) -> int:
    if args.mesh_cmd == "gen":
        m = meshmod.build_rotated_uniform(meshmod.MeshSpec(args.n0, args.omega))
        _write(meshmod.save_mesh(m), args.out)
    elif args.mesh_cmd == "refine":
        m, _ = meshmod.refine_times(_read_mesh(args.mesh_file), args.times)
        _write(meshmod.save_mesh(m), args.out)
    elif args.mesh_cmd == "jitter":
        m = meshmod.jitter_interior(_read_mesh(args.mesh_file), args.amplitude, args.seed)
        _write(meshmod.save_mesh(m), args.out)
    else:
        m = _read_mesh(args.mesh_file)
        y0, y1 = m.y_extent
        w = m.h_char if args.strip_width is None else args.strip_width
        strips = build_strips(m, strip_width=w)
        dofs = DofMap.from_mesh(m)
        print(f"vertices      {m.n_vertices}")
        print(f"triangles     {m.n_triangles}")
        print(f"boundary      {int(m.boundary.sum())}")
        print(f"interior dofs {dofs.n}")
        print(f"h_char        {m.h_char!r}")
        print(f"area          {float(m.signed_areas().sum())!r}")
        print(f"y_min         {y0!r}")
        print(f"y_max         {y1!r}")
        print(f"strip_width   {w!r}")
        print(f"L             {strips.L}")
        print(f"blocks        {len(strips.nonempty_blocks())}")
    return 0


def _sweep_spec(args) -> SweepSpec:
    base = Path(args.mesh_file).read_text() if args.mesh_file else None
    omegas = args.omega or ([0.0] if base else [0.0, math.pi / 6, math.pi / 4])
    smoothers = [SMOOTHERS[s] for s in (args.smoother or ["line"])]
    levels = args.levels or list(range(1, 6))
    return SweepSpec(omegas=omegas, levels=levels, epsilons=args.eps or DEFAULT_EPS,
                     smoothers=smoothers, N0=args.n0, strip_width=args.strip_width,
                     ordering=args.ordering, seed=args.seed, tol=args.tol,
                     max_iter=args.max_iter, base_mesh=base)


def cmd_sweep(args) -> int:
    spec = _sweep_spec(args)
    if max(spec.levels) > 5 and not args.allow_level6:
        print("levels above 5 need --allow-level6", file=sys.stderr)
        return 2
    rows = sweep_rows(spec)
    text = rows_to_csv(rows)
    _write(text, args.out_csv)
    if args.out_svg:
        prefix = Path(args.out_svg)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        records = read_csv(text)
        for omega in spec.omegas:
            for sm in spec.smoothers:
                sel = [r for r in records if r["omega"] == repr(float(omega)) and r["smoother"] == sm]
                deg = round(math.degrees(omega), 3)
                plot_rates(sel, prefix.with_name(f"{prefix.name}_w{deg:g}_{sm}.svg"),
                           f"{sm}, omega = {deg:g} deg")
    return 0


def cmd_verify(args) -> int:
    from . import verify as V

    omegas = args.omega or [0.0]
    reports = []
    for omega in omegas:
        if args.mesh_file:
            coarse = _read_mesh(args.mesh_file)
        else:
            coarse = meshmod.build_rotated_uniform(meshmod.MeshSpec(args.n0, omega))
        fine, hier = meshmod.refine_regular(coarse)
        from .transfer import prolongation
        P = prolongation(hier)
        if args.corrupt_prolongation:
            P = P.tolil()
            r = P.shape[0] // 2
            P[r, :] = P[r, :] * 0.0
            P[r, 0] = 0.7
            P = P.tocsr()
        strips = build_strips(fine, strip_width=args.strip_width)
        t = args.trials
        reports.append(V.check_derivative_identity(fine, t, args.seed))
        reports.append(V.check_prop41(hier, t, args.seed, prolong=P))
        reports.append(V.check_interpolation_identities(hier, t, args.seed, P=P))
        reports.append(V.check_partition_identity(fine, strips, t, args.seed))
        if abs(omega) == 0.0 and not args.mesh_file:
            reports.append(V.check_v0(hier))
        if t > 0:
            reports.append(V.check_lemma42(hier, t, args.seed))
            reports.append(V.check_lemma56(hier, strips, t, args.seed, bound=args.c_obs))
            reports.append(V.check_decomposition_stability(hier, strips, t, args.seed))
        else:
            print("notice: trials=0, inequality checks skipped")

    for rep in reports:
        print(rep.line())
    if args.out_csv:
        cols = ["lemma", "kind", "mesh", "trials", "worst", "bound", "passed"]
        rows = [[r.lemma, r.kind, r.mesh, r.trials, repr(r.worst), repr(r.bound), int(r.passed)]
                for r in reports]
        _write(rows_to_csv(rows, cols), args.out_csv)
    hard = [r for r in reports if r.kind == "identity" or r.lemma == "interp-stability"]
    return 0 if all(r.passed for r in hard) else 1


def cmd_lower_bound(args) -> int:
    from .verify import check_lower_bound

    levels = args.levels or [2, 3, 4, 5]
    eps = args.eps or DEFAULT_EPS
    rows = check_lower_bound(args.n0, eps, levels, rates=not args.no_rates,
                             rate_kwargs={"tol": args.tol, "max_iter": args.max_iter,
                                          "seed": args.seed})
    print(f"{'epsilon':>10} {'level':>5} {'h':>10} {'R':>12} {'R*(eps+h^2)':>12} {'rate':>10}")
    for r in rows:
        print(f"{r.epsilon:10.1e} {r.level:5d} {r.h:10.4e} {r.R:12.5e} {r.R_scaled:12.5e} "
              f"{r.measured_rate:10.6f}")
    if args.out_csv:
        out = [[repr(r.epsilon), r.level, repr(r.h), repr(r.R), repr(r.R_scaled),
                repr(r.measured_rate)] for r in rows]
        _write(rows_to_csv(out, LOWER_BOUND_COLUMNS), args.out_csv)
    return 0


def cmd_solve(args) -> int:
    omega = (args.omega or [0.0])[0]
    level = (args.levels or [3])[-1]
    eps = (args.eps or [1e-4])[0]
    base = _read_mesh(args.mesh_file) if args.mesh_file else None
    kind = SMOOTHERS[(args.smoother or ["line"])[0]]
    op = build_case(args.n0, omega, level, eps, kind, ordering=args.ordering,
                    strip_width=args.strip_width, base=base)
    dofs = DofMap.from_mesh(op.fine_mesh)
    b = assemble_mass(op.fine_mesh, dofs) @ np.ones(dofs.n)
    x, its, hist = solve(op, b, tol=args.tol, max_iter=args.max_iter)
    print(f"dofs={op.n} iterations={its} final_residual={hist[-1]:.3e}")
    for k in range(1, len(hist)):
        print(f"{k:4d} {hist[k]:.6e} {hist[k] / hist[k - 1]:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="anisomg", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp, levels=True):
        sp.add_argument("--n0", type=int, default=4, help="squares per side of the coarsest mesh")
        sp.add_argument("--omega", type=parse_angle, action="append",
                        help="rotation angle, radians or e.g. pi/6 (repeatable)")
        if levels:
            sp.add_argument("--levels", type=parse_levels, help="e.g. 1-5 or 2,3")
        sp.add_argument("--eps", type=float, action="append", help="anisotropy ratio (repeatable)")
        sp.add_argument("--smoother", choices=sorted(SMOOTHERS), action="append")
        sp.add_argument("--ordering", choices=["forward", "backward", "symmetric"],
                        default="forward")
        sp.add_argument("--strip-width", type=float, default=None)
        sp.add_argument("--seed", type=int, default=42)
        sp.add_argument("--tol", type=float, default=1e-8)
        sp.add_argument("--max-iter", type=int, default=2000)
        sp.add_argument("--out-csv")
        sp.add_argument("--mesh-file", help="coarsest mesh in the text mesh format")

    m = sub.add_parser("mesh", help="generate, refine, jitter or inspect meshes")
    msub = m.add_subparsers(dest="mesh_cmd", required=True)
    g = msub.add_parser("gen")
    g.add_argument("--n0", type=int, default=4)
    g.add_argument("--omega", type=parse_angle, default=0.0)
    g.add_argument("--out")
    r = msub.add_parser("refine")
    r.add_argument("--mesh-file", required=True)
    r.add_argument("--times", type=int, default=1)
    r.add_argument("--out")
    j = msub.add_parser("jitter")
    j.add_argument("--mesh-file", required=True)
    j.add_argument("--amplitude", type=float, default=0.2)
    j.add_argument("--seed", type=int, default=1)
    j.add_argument("--out")
    i = msub.add_parser("info")
    i.add_argument("--mesh-file", required=True)
    i.add_argument("--strip-width", type=float, default=None)
    m.set_defaults(func=cmd_mesh)

    s = sub.add_parser("sweep", help="two-level rates over omega x level x eps")
    common(s)
    s.add_argument("--out-svg", help="path prefix for one SVG per (omega, smoother)")
    s.add_argument("--allow-level6", action="store_true")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="identity and stability checks")
    common(v, levels=False)
    v.add_argument("--trials", type=int, default=100)
    v.add_argument("--c-obs", type=float, default=32.0)
    v.add_argument("--corrupt-prolongation", action="store_true", help=argparse.SUPPRESS)
    v.set_defaults(func=cmd_verify)

    lb = sub.add_parser("lower-bound", help="point smoother lower-bound witness")
    common(lb)
    lb.add_argument("--no-rates", action="store_true")
    lb.set_defaults(func=cmd_lower_bound)

    so = sub.add_parser("solve", help="run the two-level iteration on f = 1")
    common(so)
    so.set_defaults(func=cmd_solve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.cmd == "solve" and args.tol == 1e-8:
        args.tol = 1e-10
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
