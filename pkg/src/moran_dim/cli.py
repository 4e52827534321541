"""``moran-dim`` command line.

Every subcommand reads a JSON spec (except ``example``, which writes one),
validates it and writes a CSV whose first line records the spec digest, the
package version and the seed.  Exit codes: 0 success, 2 invalid spec,
3 enumeration budget exhausted.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .csvio import atomic_write, provenance_line, render_csv
from .errors import BudgetExceeded, SpecError
from .estimators import empirical_assouad, greedy_packing, packing_exponent_test
from .geometry import bnc_verdict, check_osc, cone_constant, default_r_schedule, max_neighbourhood, render_points
from .ifs_core import DEFAULT_CAP, IFSSpec, validate_spec
from .pressure import assouad_symbolic, theta_table
from .specfile import content_hash, dumps, loads

EXIT_OK, EXIT_SPEC, EXIT_BUDGET = 0, 2, 3
THREADS_ENV = "MORAN_DIM_THREADS"


def _threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _load(args) -> tuple[IFSSpec, str]:
    raw = Path(args.spec).read_bytes()
    spec = validate_spec(loads(raw.decode()))
    return spec, content_hash(raw)


def _window(spec: IFSSpec, n_max: int | None) -> range:
    if n_max is not None:
        return range(1, n_max + 1)
    if spec.is_periodic:
        return spec.default_window()
    return range(1, 11)


def _range_arg(text: str) -> list[int]:
    if ":" in text:
        a, b = text.split(":")
        return list(range(int(a), int(b) + 1))
    return [int(v) for v in text.split(",")]


def _point(text: str | None, spec: IFSSpec) -> np.ndarray:
    if text is None:
        return spec.ambient.center
    return np.array([float(v) for v in text.split(",")])


def _emit(args, spec_hash: str, header, rows, extra: list[str] = ()) -> None:
    prov = provenance_line(spec_hash, __version__, args.seed)
    if extra:
        prov = "\n".join([prov, *extra])
    text = render_csv(header, rows, prov)
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_theta(args) -> int:
    spec, h = _load(args)
    tab = theta_table(spec, _window(spec, args.n_max), range(1, args.m_max + 1), tol=args.tol)
    _emit(args, h, ["n", "m", "theta", "residual"], tab.rows())
    return EXIT_OK


def cmd_dima(args) -> int:
    spec, h = _load(args)
    verdict = bnc_verdict(spec, cap=args.cap).status
    n_window = _window(spec, args.n_max) if args.n_max is not None or not spec.is_periodic else None
    rep = assouad_symbolic(spec, args.m_max, n_window, bnc=verdict, tol=args.tol)
    extra = [f"#estimate={rep.estimate:.12g} #bnc={rep.bnc} #window={rep.window}"
             f" #window_limited={str(rep.window_limited).lower()}"]
    _emit(args, h, ["m", "sup_theta"], rep.s_by_m, extra)
    return EXIT_OK


def cmd_check(args) -> int:
    spec, h = _load(args)
    osc = check_osc(spec, args.max_level)
    verdict = bnc_verdict(spec, osc=osc, cap=args.cap)
    rows = [("validation", "pass"), ("certificate", spec.certificate or ""),
            ("osc", osc.status), ("osc_levels_checked", osc.levels_checked)]
    if osc.witness is not None:
        rows.append(("osc_witness", json.dumps(osc.witness, sort_keys=True, default=str)))
    if spec.ambient.kind == "box" and spec.dimension in (1, 2):
        rows.append(("cone_constant", cone_constant(spec)))
    rows += [("r_min", verdict.r_min),
             ("branching_max", max(verdict.branching.values()) if verdict.branching else ""),
             ("branching_bounded", verdict.branching_bounded),
             ("bnc", verdict.status),
             ("bnc_clauses", ";".join(f"{k}={v:.12g}" for k, v in sorted(verdict.clauses.items()))),
             ("bnc_reason", verdict.reason)]
    _emit(args, h, ["key", "value"], rows)
    return EXIT_OK


def cmd_nbhd(args) -> int:
    spec, h = _load(args)
    rs = [float(v) for v in args.r.split(",")] if args.r else default_r_schedule(args.levels)
    rows = []
    for r in rs:
        mn = max_neighbourhood(spec, r, refinement_depth=args.refine, cap=args.cap)
        rows.append((r, mn.M_lower, mn.M_upper, mn.n_centers))
    _emit(args, h, ["r", "M_lower", "M_upper", "n_centers"], rows)
    return EXIT_OK


def cmd_estimate(args) -> int:
    spec, h = _load(args)
    deltas = [args.delta_min ** (k / args.delta_steps) for k in range(1, args.delta_steps + 1)]
    if args.r_steps == 1:
        rs = [args.r_max]
    else:
        rs = [args.r_max * (args.r_min / args.r_max) ** (i / (args.r_steps - 1)) for i in range(args.r_steps)]
    est = empirical_assouad(spec, deltas, rs, cap=args.cap, max_centers=args.max_centers,
                            seed=args.seed, workers=_threads())
    extra = [f"#interval=[{est.lower:.12g},{est.upper:.12g}] #delta={est.delta:.12g}"
             f" #skipped={len(est.skipped)}", f"#caveat={est.caveat}"]
    rows = [(s.r, s.delta, s.psi[0], s.psi[1], s.Psi[0], s.Psi[1]) for s in est.samples]
    _emit(args, h, ["r", "delta", "psi_lo", "psi_hi", "Psi_lo", "Psi_hi"], rows, extra)
    return EXIT_OK


def cmd_pack(args) -> int:
    spec, h = _load(args)
    x = _point(args.x, spec)
    R = args.R if args.R is not None else spec.ambient.radius
    alphas = [float(v) for v in args.alpha.split(",")]
    packs = [greedy_packing(spec, x, R, d, margin=args.margin, cap=args.cap) for d in _range_arg(args.depths)]
    rows = []
    for a in alphas:
        for p in packs:
            rows.append((a, p.depth, packing_exponent_test([p], a).max_ratio, len(p)))
    _emit(args, h, ["alpha", "depth", "max_ratio", "n_balls"], rows)
    return EXIT_OK


def cmd_example(args) -> int:
    params = {}
    for item in args.param or []:
        key, _, val = item.partition("=")
        try:
            params[key] = json.loads(val)
        except json.JSONDecodeError:
            params[key] = val
    spec = validate_spec(IFSSpec.from_generator(args.name, params))
    text = dumps(spec)
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_render(args) -> int:
    spec, h = _load(args)
    pts, err = render_points(spec, args.depth, cap=args.cap)
    cols = ["x", "y"][: spec.dimension] if spec.dimension <= 2 else [f"x{i}" for i in range(spec.dimension)]
    rows = [(*map(float, p), float(e)) for p, e in zip(pts, err)]
    _emit(args, h, [*cols, "err"], rows)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="moran-dim", description="Dimension computations for non-autonomous self-similar sets.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, help, spec=True):
        p = sub.add_parser(name, help=help)
        if spec:
            p.add_argument("--spec", required=True, help="JSON spec file")
        p.add_argument("--out", help="output file (default: standard output)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--cap", type=int, default=DEFAULT_CAP, help="cylinder enumeration budget")
        p.set_defaults(func=func)
        return p

    p = add("theta", cmd_theta, "table of pressure zeros theta(n, m)")
    p.add_argument("--m-max", type=int, default=5)
    p.add_argument("--n-max", type=int)
    p.add_argument("--tol", type=float, default=1e-12)

    p = add("dima", cmd_dima, "symbolic Assouad dimension min_m sup_n theta(n, m)")
    p.add_argument("--m-max", type=int, default=10)
    p.add_argument("--n-max", type=int)
    p.add_argument("--tol", type=float, default=1e-12)

    p = add("check", cmd_check, "open set, cone and bounded neighbourhood conditions")
    p.add_argument("--max-level", type=int)

    p = add("nbhd", cmd_nbhd, "maximal neighbourhood counts M(r)")
    p.add_argument("--r", help="comma-separated radii (default 2^-1..2^-levels)")
    p.add_argument("--levels", type=int, default=8)
    p.add_argument("--refine", type=int, default=4)

    p = add("estimate", cmd_estimate, "empirical Assouad interval from covering numbers")
    p.add_argument("--delta-min", type=float, default=1e-3)
    p.add_argument("--delta-steps", type=int, default=3)
    p.add_argument("--r-max", type=float, default=1.0)
    p.add_argument("--r-min", type=float, default=0.01)
    p.add_argument("--r-steps", type=int, default=3)
    p.add_argument("--max-centers", type=int)

    p = add("pack", cmd_pack, "centred packing exponent test")
    p.add_argument("--alpha", required=True, help="comma-separated exponents")
    p.add_argument("--depths", default="1:8", help="range a:b or comma list")
    p.add_argument("--x", help="comma-separated center (default: center of X)")
    p.add_argument("--R", type=float, help="radius (default: circumradius of X)")
    p.add_argument("--margin", type=float, default=0.01)

    p = add("example", cmd_example, "write a generated example spec", spec=False)
    p.add_argument("--name", required=True, choices=["unbounded", "arbitrary"])
    p.add_argument("--param", action="append", help="key=value (value parsed as JSON when possible)")

    p = add("render", cmd_render, "coding points of all words of a given length")
    p.add_argument("--depth", type=int, required=True)
    return ap


def _positive(args) -> str | None:
    for name in ("tol", "delta_min", "r_max", "r_min", "R", "margin"):
        v = getattr(args, name, None)
        if v is not None and not (v > 0 and math.isfinite(v)):
            return f"--{name.replace('_', '-')} must be positive"
    for name in ("cap", "m_max", "n_max", "delta_steps", "r_steps", "levels"):
        v = getattr(args, name, None)
        if v is not None and v < 1:
            return f"--{name.replace('_', '-')} must be at least 1"
    if getattr(args, "delta_min", None) is not None and args.delta_min >= 1:
        return "--delta-min must be below 1"
    return None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    problem = _positive(args)
    if problem:
        print(f"moran-dim: {problem}", file=sys.stderr)
        return EXIT_SPEC
    try:
        return args.func(args)
    except (SpecError, OSError) as e:
        print(f"moran-dim: invalid spec: {e}", file=sys.stderr)
        return EXIT_SPEC
    except BudgetExceeded as e:
        print(f"moran-dim: budget exhausted: {e}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
