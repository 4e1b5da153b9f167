"""Command-line interface: ``almostconv {analyze,kernel,hardy,tauber}``.

Every command writes one JSON report (to ``--out`` or stdout) with the
top-level keys ``verdict``, ``ladders``, ``checks`` and ``provenance``,
and optionally a CSV of plot data (``--plot-out``). Reports depend only
on the arguments, so identical invocations give identical bytes; the wall
time goes to stderr.

Exit codes: 0 almost convergent / check passed, 1 divergent / check
failed, 2 inconclusive, 3 usage or input error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time

import numpy as np
import scipy

from . import __version__
from .aclimit import ACConfig, Status, ac_verdict
from .convolve import HorizonPolicy, convolve_many
from .errors import AlmostConvError, InadmissibleKernel
from .hardy import HalfPlaneFunction, boundary_vs_interior, cluster_sample, multiplicativity_check
from .kernels import Box, Poisson, dilate, parse_kernel
from .sigdsl import eval_signal, parse_signal
from .tauber import kernel_transfer_check

SCHEMA = "almostconv.report/1"
EXIT_OK, EXIT_DIVERGENT, EXIT_INCONCLUSIVE, EXIT_ERROR = 0, 1, 2, 3
_STATUS_EXIT = {Status.ALMOST_CONVERGENT: EXIT_OK, Status.DIVERGENT: EXIT_DIVERGENT,
                Status.INCONCLUSIVE: EXIT_INCONCLUSIVE}

ANALYZE_CSV = ("kernel", "part", "k", "r", "F_bar", "F_under", "slack")
KERNEL_CSV = ("xi", "re", "im", "modulus")
HARDY_CSV = ("side", "part", "k", "r", "F_bar", "F_under", "slack")
TAUBER_CSV = ("kernel", "k", "r", "re", "im", "slack")


class UsageError(AlmostConvError, ValueError):
    pass


# -- argument helpers ----------------------------------------------------------

def split_top_level(text: str, sep: str = ",") -> list[str]:
    """Split on ``sep`` outside parentheses and brackets, so custom kernels may contain commas."""
    out, depth, cur = [], 0, []
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if ch == sep and depth == 0:
            out.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    out.append("".join(cur).strip())
    return [s for s in out if s]


def parse_kernels(text: str):
    return [parse_kernel(s) for s in split_top_level(text)]


def parse_xi(text: str) -> np.ndarray:
    """``a:b:step`` (inclusive of ``b``) or a single value."""
    parts = text.split(":")
    if len(parts) == 1:
        return np.array([float(parts[0])])
    if len(parts) != 3:
        raise UsageError(f"--xi expects 'a:b:step' or a number, got {text!r}")
    a, b, step = (float(p) for p in parts)
    if not step > 0 or b < a:
        raise UsageError("--xi needs a <= b and step > 0")
    n = int(math.floor((b - a) / step + 1e-9))
    return a + step * np.arange(n + 1)


def _plain(obj):
    """Recursively turn complex, numpy and non-finite values into JSON-safe ones."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _plain(float(obj.real)), "im": _plain(float(obj.imag))}
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(obj, Status):
        return obj.value
    return obj


def _config(args) -> ACConfig:
    try:
        return ACConfig(r0=args.r0, rho=args.rho, K=args.K, tol=args.tol, eps_conv=args.eps_conv,
                        eps_agree=args.eps_agree, eps_div=args.eps_div,
                        horizon=HorizonPolicy.parse(args.horizon),
                        check_admissible=getattr(args, "check_admissible", False), workers=args.workers)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _provenance(args, command: str, cfg: ACConfig | None = None):
    echo = {k: v for k, v in sorted(vars(args).items())
            if k not in ("func", "out", "plot_out", "workers") and v is not None}
    return {
        "schema": SCHEMA, "tool": "almostconv", "version": __version__, "command": command,
        "arguments": echo, "config": None if cfg is None else cfg.as_dict(),
        "numpy": np.__version__, "scipy": scipy.__version__,
    }


def _ladder_rows(ladders, first_col):
    rows = []
    for lad in ladders:
        for k, rung in enumerate(lad.rungs):
            rows.append((first_col(lad), lad.part, k, rung.r, rung.F_bar, rung.F_under, rung.slack))
    return rows


def _write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


# -- commands ----------------------------------------------------------------

def cmd_analyze(args):
    cfg = _config(args)
    signal = parse_signal(args.signal)
    kernels = parse_kernels(args.kernels)
    verdict = ac_verdict(signal, kernels, cfg)

    # Seeded spot check: values at random translates sit inside the last rung's band.
    rng = np.random.default_rng(args.seed)
    spot = []
    for lad in verdict.ladders:
        if not lad.rungs:
            continue
        rung = lad.rungs[-1]
        kern = next(k for k in kernels if k.spec == lad.kernel)
        xs = rng.uniform(-rung.r, rung.r, 8)
        vals, errs, _ = convolve_many(dilate(kern, rung.r), signal, xs, cfg.tol)
        comp = vals.real if lad.part == "re" else vals.imag
        slack = rung.slack + errs
        inside = bool(np.all((comp >= rung.F_under - slack) & (comp <= rung.F_bar + slack)))
        spot.append({"kernel": lad.kernel, "part": lad.part, "r": rung.r, "n": int(xs.size), "inside_band": inside})

    report = {
        "verdict": verdict.as_dict(),
        "ladders": [lad.as_dict() for lad in verdict.ladders],
        "checks": {"translate_spot_check": spot},
        "provenance": _provenance(args, "analyze", cfg),
    }
    rows = _ladder_rows(verdict.ladders, lambda lad: lad.kernel)
    return report, (ANALYZE_CSV, rows), _STATUS_EXIT[verdict.status]


def cmd_kernel(args):
    kernel = parse_kernel(args.spec or args.kernels)
    xi = parse_xi(args.xi)
    tol = min(args.tol, 1e-10)
    closed = kernel.mellin_closed_form(0.0) is not None
    vals = np.array([kernel.mellin(float(v), tol) for v in xi])
    mod = np.abs(vals)
    j = int(np.argmin(mod))
    slack = 0.0 if closed else tol
    floor = 1e-8
    samples = [{"xi": float(a), "value": complex(v), "modulus": float(m), "slack": slack}
               for a, v, m in zip(xi, vals, mod)]
    verdict = {"kernel": kernel.spec, "admissible": bool(mod[j] > floor + slack), "min_modulus": float(mod[j]),
               "argmin_xi": float(xi[j]), "floor": floor, "slack": slack,
               "method": "closed_form" if closed else "quadrature"}
    if xi.size == 1:
        verdict["value"] = complex(vals[0])
    report = {
        "verdict": verdict,
        "ladders": [],
        "checks": {"mellin": samples},
        "provenance": _provenance(args, "kernel"),
    }
    rows = [(float(a), float(v.real), float(v.imag), float(m)) for a, v, m in zip(xi, vals, mod)]
    return report, (KERNEL_CSV, rows), EXIT_OK if verdict["admissible"] else EXIT_DIVERGENT


def cmd_hardy(args):
    cfg = _config(args)
    hpf = HalfPlaneFunction.parse(args.fn)
    eq = boundary_vs_interior(hpf, cfg)
    checks = {}
    if args.times:
        other = HalfPlaneFunction.parse(args.times)
        checks["multiplicativity"] = multiplicativity_check(hpf, other, cfg).as_dict()
    if args.cluster:
        rng = np.random.default_rng(args.seed)
        xs = [cfg.r0 * cfg.rho ** k for k in range(cfg.K + 1)]
        ys = rng.uniform(-10.0, 10.0, len(xs))
        checks["cluster"] = cluster_sample(hpf, xs, ys, cfg.eps_conv * 10, min(cfg.tol, 1e-9)).as_dict()
    report = {
        "verdict": eq.as_dict(),
        "ladders": [lad.as_dict() for lad in eq.boundary.ladders] + [lad.as_dict() for lad in eq.interior_ladders],
        "checks": checks,
        "provenance": _provenance(args, "hardy", cfg),
    }
    rows = (_ladder_rows(eq.boundary.ladders, lambda lad: "boundary")
            + _ladder_rows(eq.interior_ladders, lambda lad: "interior"))
    rows = [(row[0],) + row[1:] for row in rows]
    if eq.agree:
        code = _STATUS_EXIT[eq.boundary.status]
    else:
        code = EXIT_INCONCLUSIVE
    return report, (HARDY_CSV, rows), code


def cmd_tauber(args):
    cfg = _config(args)
    signal = parse_signal(args.signal)
    kernels = parse_kernels(args.kernels)
    if len(kernels) == 1:
        kernels.append(Poisson() if not isinstance(kernels[0], Poisson) else Box())
    f, others = kernels[0], kernels[1:]
    reports = [kernel_transfer_check(f, g, signal, args.x, args.gamma, cfg) for g in others]
    lf = reports[0].f
    outcomes = [r.transfer_ok for r in reports]
    if any(o is False for o in outcomes):
        code = EXIT_DIVERGENT
    elif any(o is None for o in outcomes):
        code = EXIT_INCONCLUSIVE
    else:
        code = EXIT_OK
    verdict = {
        "kernel": f.spec, "x": args.x, "gamma": args.gamma, "limit": lf.limit, "stable": lf.stable,
        "slack": max(lf.errs[-3:]) + lf.drift,
        "transfer": [{"g": r.g.kernel, "limit": r.g.limit, "stable": r.g.stable, "transfer_ok": r.transfer_ok,
                      "reason": r.reason} for r in reports],
    }
    checks = {}
    if args.gamma == "zero":
        value = eval_signal(signal, args.x)
        checks["fatou"] = {"signal_value": value, "gap": abs(lf.limit - value),
                           "note": "at a jump an even kernel tends to the midpoint of the one-sided limits"}
    ladders = [lf] + [r.g for r in reports]
    report = {
        "verdict": verdict,
        "ladders": [lad.as_dict() for lad in ladders],
        "checks": checks,
        "provenance": _provenance(args, "tauber", cfg),
    }
    rows = [(lad.kernel, k, r, v.real, v.imag, e)
            for lad in ladders for k, (r, v, e) in enumerate(zip(lad.radii, lad.values, lad.errs))]
    return report, (TAUBER_CSV, rows), code


# -- parser ----------------------------------------------------------------

def _common(p, kernels_default="box,poisson"):
    d = ACConfig()
    p.add_argument("--kernels", default=kernels_default, help="comma-separated kernel specs")
    p.add_argument("--r0", type=float, default=d.r0)
    p.add_argument("--rho", type=float, default=d.rho)
    p.add_argument("--K", type=int, default=d.K)
    p.add_argument("--tol", type=float, default=d.tol)
    p.add_argument("--eps-conv", type=float, default=d.eps_conv)
    p.add_argument("--eps-agree", type=float, default=d.eps_agree)
    p.add_argument("--eps-div", type=float, default=d.eps_div)
    p.add_argument("--horizon", default="auto", help="auto, lo:hi, or <factor>r")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="report path (default: stdout)")
    p.add_argument("--plot-out", help="CSV path for plot data")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="almostconv", description="Almost convergence of bounded functions.")
    parser.add_argument("--version", action="version", version=f"almostconv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="almost-convergence verdict for a signal")
    p.add_argument("--signal", required=True)
    p.add_argument("--check-admissible", action="store_true")
    _common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("kernel", help="half-line Mellin transform and admissibility of a kernel")
    p.add_argument("--spec", help="kernel spec (defaults to --kernels)")
    p.add_argument("--xi", default="0:10:0.1", help="a:b:step or a single value")
    _common(p, kernels_default="box")
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("hardy", help="boundary versus interior limit of a bounded analytic function")
    p.add_argument("--fn", required=True, help="function of z in the closed-form grammar")
    p.add_argument("--times", help="second function for the product check")
    p.add_argument("--cluster", action="store_true", help="sample the cluster set along the ladder")
    _common(p, kernels_default="box")
    p.set_defaults(func=cmd_hardy)

    p = sub.add_parser("tauber", help="kernel transfer at a fixed point")
    p.add_argument("--signal", required=True)
    p.add_argument("--x", type=float, default=0.0)
    p.add_argument("--gamma", choices=("inf", "zero"), default="inf")
    _common(p, kernels_default="box,poisson")
    p.set_defaults(func=cmd_tauber)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    start = time.perf_counter()
    try:
        report, (header, rows), code = args.func(args)
    except InadmissibleKernel as exc:
        print(f"almostconv: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (AlmostConvError, ValueError, OSError) as exc:
        print(f"almostconv: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    text = json.dumps(_plain(report), sort_keys=True, indent=2, allow_nan=False) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.plot_out:
        _write_csv(args.plot_out, header, rows)
    print(f"almostconv {args.command}: exit {code}, {time.perf_counter() - start:.2f} s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
