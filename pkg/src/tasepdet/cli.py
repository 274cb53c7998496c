"""Batch command-line front end.

Every command emits a deterministic text artifact (CSV with a `#` metadata
preamble, or JSON-lines for event streams).  With ``--out`` the artifact is
written to disk together with a ``<out>.manifest.json`` sidecar recording
the command, all resolved parameters, the seed, the tool version, wall
time, and a sha256 of each output file — enough to reproduce the run
bit-exactly (Monte Carlo) or to stated tolerance (quadrature).

Exit status: 0 on success, 1 when any numerical check flags (cross-check
failures, non-converged determinants, window violations, or exact-vs-MC
discrepancies at 4 standard errors), 2 for invalid arguments.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from typing import Callable, Sequence

import numpy as np

from tasepdet import __version__
from tasepdet.airy_scaling import ScaledPoint, convergence_scan, scan_csv
from tasepdet.fredholm import (
    ThresholdSpec,
    TruncationPolicy,
    f1_marginal,
    joint_distribution_continuum,
    joint_distribution_discrete,
)
from tasepdet.kernels import LatticePoint, kernel_flat, kernel_general
from tasepdet.schuetz_core import (
    ContourError,
    CrossCheckError,
    NumericsError,
    ParticleConfig,
    WindowError,
    decomposition_sum,
    eval_F,
    transition_probability,
)
from tasepdet.tasep_sim import (
    FlatWindow,
    SimConfig,
    empirical_joint,
    events_jsonl,
    flat_half_width,
    simulate,
)

_NUMERICAL_ERRORS = (NumericsError, CrossCheckError, ContourError, WindowError)


# ---------------------------------------------------------------------------
# small parsers for list-ish arguments
# ---------------------------------------------------------------------------


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.split(",") if tok.strip() != "")

def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(",") if tok.strip() != "")


def _int_range(text: str) -> list[int]:
    """Either "lo:hi" (inclusive) or a comma list."""
    if ":" in text:
        lo, hi = (int(tok) for tok in text.split(":"))
        if hi < lo:
            raise ValueError(f"empty range {text!r}")
        return list(range(lo, hi + 1))
    return list(_ints(text))


def _float_grid(text: str) -> list[float]:
    """Either "lo:hi:step" or a comma list."""
    if ":" in text:
        lo, hi, step = (float(tok) for tok in text.split(":"))
        if step <= 0 or hi < lo:
            raise ValueError(f"bad grid {text!r}")
        n = int(round((hi - lo) / step))
        return [lo + k * step for k in range(n + 1)]
    return list(_floats(text))


def _rows(text: str, parse: Callable[[str], tuple]) -> list[tuple]:
    return [parse(row) for row in text.split(";") if row.strip() != ""]


def _preamble(command: str, args: argparse.Namespace, keys: Sequence[str]) -> list[str]:
    lines = [f"# command={command}", f"# version={__version__}"]
    for key in keys:
        lines.append(f"# {key.replace('_', '-')}={getattr(args, key)}")
    return lines


# ---------------------------------------------------------------------------
# commands: each returns (text, flagged)
# ---------------------------------------------------------------------------


def _cmd_fn(args: argparse.Namespace) -> tuple[str, bool]:
    lines = _preamble("fn", args, ["n", "x", "time"])
    lines.append("n,x,t,value,est_error")
    for n in _int_range(args.n):
        for x in _int_range(args.x):
            fn = eval_F(n, x, args.time)
            lines.append(f"{n},{x},{args.time:g},{fn.value:.12g},{fn.est_error:.3g}")
    return "\n".join(lines) + "\n", False


def _cmd_green(args: argparse.Namespace) -> tuple[str, bool]:
    y = ParticleConfig(_ints(args.initial))
    lines = _preamble("green", args, ["initial", "time", "tolerance"])
    lines.append("final,transition,decomposition,abs_diff")
    flagged = False
    for final in _rows(args.final, _ints):
        x = ParticleConfig(final)
        g = transition_probability(y, x, args.time)
        d = decomposition_sum(y, x, args.time)
        diff = abs(g - d)
        flagged |= diff > args.tolerance
        joined = ";".join(str(v) for v in final)
        lines.append(f"{joined},{g:.12g},{d:.12g},{diff:.3g}")
    return "\n".join(lines) + "\n", flagged


def _cmd_kernel(args: argparse.Namespace) -> tuple[str, bool]:
    if args.variant == "general":
        if args.initial is None:
            raise ValueError("--initial is required for the general kernel")
        y = ParticleConfig(_ints(args.initial))
        evaluate = lambda p1, p2: kernel_general(p1, p2, y, args.time)
    else:
        evaluate = lambda p1, p2: kernel_flat(p1, p2, args.time)
    lines = _preamble("kernel", args, ["variant", "initial", "time"])
    lines.append("n1,x1,n2,x2,value")
    for n1, x1, n2, x2 in _rows(args.points, _ints):
        value = evaluate(LatticePoint(n1, x1), LatticePoint(n2, x2))
        lines.append(f"{n1},{x1},{n2},{x2},{value:.12g}")
    return "\n".join(lines) + "\n", False


def _make_joint_exact(args, labels):
    if args.flat:
        kern = lambda p1, p2: kernel_flat(p1, p2, args.time)
        x_min = tuple(-2 * n - 5 for n in labels)
    else:
        y = ParticleConfig(_ints(args.initial))
        kern = lambda p1, p2: kernel_general(p1, p2, y, args.time)
        x_min = tuple(y.positions[n - 1] - 5 for n in labels)
    policy = TruncationPolicy(x_min=x_min, tolerance=args.tolerance)
    return lambda spec: joint_distribution_discrete(kern, spec, policy).value


def _make_joint_mc(args, thresholds_max):
    if args.flat:
        rng = max(8, thresholds_max)
        initial = FlatWindow(flat_half_width(args.time, rng))
        config = SimConfig(
            initial=initial, horizon=args.time, seed=args.seed,
            replicas=args.replicas, observation_range=rng,
        )
    else:
        config = SimConfig(
            initial=ParticleConfig(_ints(args.initial)), horizon=args.time,
            seed=args.seed, replicas=args.replicas,
        )
    return lambda spec: empirical_joint(config, spec)


def _cmd_joint(args: argparse.Namespace) -> tuple[str, bool]:
    if args.flat == (args.initial is not None):
        raise ValueError("give exactly one of --flat or --initial")
    labels = _ints(args.labels)
    rows = _rows(args.thresholds, _ints)
    if any(len(r) != len(labels) for r in rows):
        raise ValueError("every threshold row needs one entry per label")
    exact_of = _make_joint_exact(args, labels) if args.method in ("exact", "both") else None
    mc_of = (
        _make_joint_mc(args, max(max(r) for r in rows))
        if args.method in ("mc", "both")
        else None
    )
    lines = _preamble(
        "joint", args, ["flat", "initial", "time", "labels", "method", "replicas", "seed"]
    )
    lines.append("labels,thresholds,exact,mc,stderr,z,replicas,seed")
    flagged = False
    name = ";".join(str(n) for n in labels)
    for row in rows:
        spec = ThresholdSpec(labels, row)
        exact = exact_of(spec) if exact_of else None
        est = mc_of(spec) if mc_of else None
        z = None
        if exact is not None and est is not None:
            if est.stderr > 0:
                z = abs(exact - est.value) / est.stderr
            else:
                z = 0.0 if exact == est.value else float("inf")
            flagged |= z >= 4.0
        cells = [
            name,
            ";".join(str(a) for a in row),
            "" if exact is None else f"{exact:.12g}",
            "" if est is None else f"{est.value:.12g}",
            "" if est is None else f"{est.stderr:.6g}",
            "" if z is None else f"{z:.3f}",
            "" if est is None else str(est.replicas),
            str(args.seed),
        ]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n", flagged


def _cmd_f1(args: argparse.Namespace) -> tuple[str, bool]:
    lines = _preamble("f1", args, ["s_grid", "quad_order"])
    lines.append("s,value,stabilization_delta")
    for s in _float_grid(args.s_grid):
        det = joint_distribution_continuum([0.0], [s], quad_order=args.quad_order)
        lines.append(f"{s:g},{det.value:.12g},{det.stabilization_delta:.3g}")
    return "\n".join(lines) + "\n", False


def _cmd_converge(args: argparse.Namespace) -> tuple[str, bool]:
    times = list(_floats(args.times))
    points = []
    for r in _rows(args.points, _floats):
        if len(r) != 4:
            raise ValueError("each scan point needs four numbers: u1,s1,u2,s2")
        points.append((ScaledPoint(r[0], r[1]), ScaledPoint(r[2], r[3])))
    rows = convergence_scan(times, points)
    lines = _preamble("converge", args, ["times", "points"])
    lines.extend(scan_csv(rows).rstrip("\n").split("\n"))
    return "\n".join(lines) + "\n", False


def _cmd_simulate(args: argparse.Namespace) -> tuple[str, bool]:
    if args.flat == (args.initial is not None):
        raise ValueError("give exactly one of --flat or --initial")
    if args.flat:
        rng = args.observation_range
        initial = FlatWindow(flat_half_width(args.time, rng))
        config = SimConfig(
            initial=initial, horizon=args.time, seed=args.seed,
            replicas=args.replicas, observation_range=rng,
        )
        default_labels = [0, 1, 2]
    else:
        y = ParticleConfig(_ints(args.initial))
        config = SimConfig(
            initial=y, horizon=args.time, seed=args.seed, replicas=args.replicas
        )
        default_labels = list(range(1, y.n_particles + 1))
    if args.format == "jsonl":
        record = simulate(config, args.replica)
        return "\n".join(events_jsonl(record)) + "\n", not record.valid
    labels = list(_ints(args.labels)) if args.labels else default_labels
    from tasepdet.tasep_sim import _final_positions_batch

    finals, bad = _final_positions_batch(config, labels)
    lines = _preamble(
        "simulate", args, ["flat", "initial", "time", "replicas", "seed"]
    )
    lines.append("replica," + ",".join(f"x_{n}" for n in labels))
    for r in range(finals.shape[0]):
        if bad[r]:
            continue
        lines.append(f"{r}," + ",".join(str(int(v)) for v in finals[r]))
    return "\n".join(lines) + "\n", bool(bad.any())


# ---------------------------------------------------------------------------
# wiring
# ---------------------------------------------------------------------------


def _add_common_options(parser: argparse.ArgumentParser, root: bool) -> None:
    """The four run-level flags, accepted both before and after the
    subcommand.  The root parser carries the defaults; the per-command
    copies suppress theirs so an explicit trailing flag overrides but an
    absent one never clobbers what the root already parsed."""
    suppress = {} if root else {"default": argparse.SUPPRESS}
    parser.add_argument(
        "--out", **({"default": None} if root else suppress),
        help="write the artifact here plus a manifest sidecar",
    )
    parser.add_argument(
        "--seed", type=int, **({"default": 1} if root else suppress),
        help="Monte Carlo seed",
    )
    parser.add_argument(
        "--threads", type=int, **({"default": None} if root else suppress),
        help="cap simulator parallelism",
    )
    parser.add_argument(
        "--tolerance", type=float, **({"default": 1e-8} if root else suppress),
        help="numerical agreement gate where a command checks one",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tasepdet",
        allow_abbrev=False,
        description="Exact TASEP distribution formulas, their scaling limit, "
        "and Monte Carlo cross-checks.",
    )
    _add_common_options(parser, root=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fn", help="evaluate F_n(x, t) on a grid")
    p.add_argument("--n", required=True, help='indices, "lo:hi" or comma list')
    p.add_argument("--x", required=True, help='arguments, "lo:hi" or comma list')
    p.add_argument("--time", type=float, required=True)
    _add_common_options(p, root=False)
    p.set_defaults(func=_cmd_fn)

    p = sub.add_parser("green", help="transition probability + decomposition check")
    p.add_argument("--initial", required=True, help='initial positions "0,-2"')
    p.add_argument("--final", required=True, help='final rows "2,-1;3,0"')
    p.add_argument("--time", type=float, required=True)
    _add_common_options(p, root=False)
    p.set_defaults(func=_cmd_green)

    p = sub.add_parser("kernel", help="extended kernel tables")
    p.add_argument("--variant", choices=("general", "flat"), required=True)
    p.add_argument("--initial", help="initial positions (general variant)")
    p.add_argument("--time", type=float, required=True)
    p.add_argument("--points", required=True, help='"n1,x1,n2,x2;..." rows')
    _add_common_options(p, root=False)
    p.set_defaults(func=_cmd_kernel)

    p = sub.add_parser("joint", help="joint distributions: Fredholm vs Monte Carlo")
    p.add_argument("--flat", action="store_true")
    p.add_argument("--initial")
    p.add_argument("--time", type=float, required=True)
    p.add_argument("--labels", required=True, help='particle labels "1,2"')
    p.add_argument("--thresholds", required=True, help='rows "1,-1;2,0"')
    p.add_argument("--method", choices=("exact", "mc", "both"), default="both")
    p.add_argument("--replicas", type=int, default=200_000)
    _add_common_options(p, root=False)
    p.set_defaults(func=_cmd_joint)

    p = sub.add_parser("f1", help="limit marginal distribution sweep")
    p.add_argument("--s-grid", default="-4:2:0.25", help='"lo:hi:step" or comma list')
    p.add_argument("--quad-order", type=int, default=40)
    _add_common_options(p, root=False)
    p.set_defaults(func=_cmd_f1)

    p = sub.add_parser("converge", help="rescaled kernel vs its limit over time")
    p.add_argument("--times", default="100,1000,10000")
    p.add_argument(
        "--points",
        default="0,0,0,0;0,0.4,0,-0.3;-0.5,0.2,0.5,0.4;0.3,-0.1,0.8,0.5;0,1.2,0,1.2",
        help='"u1,s1,u2,s2;..." rows',
    )
    _add_common_options(p, root=False)
    p.set_defaults(func=_cmd_converge)

    p = sub.add_parser("simulate", help="raw Monte Carlo output")
    p.add_argument("--flat", action="store_true")
    p.add_argument("--initial")
    p.add_argument("--time", type=float, required=True)
    p.add_argument("--replicas", type=int, default=10_000)
    p.add_argument("--observation-range", type=int, default=8)
    p.add_argument("--labels", help="labels to report (CSV format)")
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--replica", type=int, default=0, help="trajectory for jsonl")
    _add_common_options(p, root=False)
    p.set_defaults(func=_cmd_simulate)
    return parser


def _write_manifest(args: argparse.Namespace, wall: float, text: str) -> None:
    digest = hashlib.sha256(text.encode()).hexdigest()
    parameters = {
        k: v for k, v in sorted(vars(args).items()) if k != "func" and v is not None
    }
    manifest = {
        "command": args.command,
        "parameters": parameters,
        "seed": args.seed,
        "version": __version__,
        "wall_time_seconds": round(wall, 3),
        "outputs": [
            {"path": args.out, "sha256": digest, "bytes": len(text.encode())}
        ],
    }
    with open(args.out + ".manifest.json", "w") as sidecar:
        json.dump(manifest, sidecar, indent=2, sort_keys=True)
        sidecar.write("\n")


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.threads is not None:
        import numba

        numba.set_num_threads(max(1, args.threads))
    start = time.perf_counter()
    try:
        text, flagged = args.func(args)
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"invalid arguments: {exc}", file=sys.stderr)
        return 2
    wall = time.perf_counter() - start
    if args.out:
        with open(args.out, "w") as sink:
            sink.write(text)
        _write_manifest(args, wall, text)
    else:
        sys.stdout.write(text)
    if flagged:
        print("numerical check flagged; see output", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
