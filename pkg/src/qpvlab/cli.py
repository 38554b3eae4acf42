"""``qpv-lab`` command-line entry point.

Every command builds a :class:`ReportBundle`.  With ``--json`` the bundle is
printed as canonical JSON (sorted keys, floats at 12 significant digits,
rationals as ``{"exact": "p/q", "decimal": ...}``); otherwise a short text
summary is printed.  When ``--out`` or ``QPV_LAB_OUT`` names a directory the
bundle is also written there, and ``simulate`` appends a CSV row.

Exit status: 0 when every requested check passes, 1 on a failed check or a
solver that did not converge, 2 on bad flags or unknown names.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__, bounds, montecarlo, protocols, sdp, strategies, suite
from ._backend import NAME as BACKEND

TOOL = "qpv-lab"
# fixed so that reruns with the same flags are byte-identical
TIMESTAMP = "1970-01-01T00:00:00Z"
ENV_OUT = "QPV_LAB_OUT"
CERTIFICATES = {"sym-antisym": "single", "sym-antisym-2": "two_round"}


class UsageError(Exception):
    pass


def canonical(x):
    """JSON-ready copy of ``x`` with the bundle's number conventions."""
    if isinstance(x, Fraction):
        return {"exact": f"{x.numerator}/{x.denominator}", "decimal": canonical(float(x))}
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return float(f"{x:.12g}") if math.isfinite(x) else None
    if isinstance(x, dict):
        return {str(k): canonical(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [canonical(v) for v in x]
    if hasattr(x, "to_dict"):
        return canonical(x.to_dict())
    if dataclasses.is_dataclass(x):
        return canonical(dataclasses.asdict(x))
    return x


@dataclasses.dataclass
class ReportBundle:
    command: str
    config: dict
    seed: int = 0
    results: list = dataclasses.field(default_factory=list)
    ok: bool = True
    version: str = __version__
    timestamp: str = TIMESTAMP

    def add(self, name: str, **payload):
        self.results.append({"name": name, **payload})

    def to_dict(self) -> dict:
        return {
            "tool": TOOL,
            "version": self.version,
            "backend": BACKEND,
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "timestamp": self.timestamp,
            "ok": self.ok,
            "results": self.results,
        }

    def to_json(self) -> str:
        return json.dumps(canonical(self.to_dict()), sort_keys=True, indent=2) + "\n"


def schema() -> dict:
    return json.loads((Path(__file__).with_name("report_schema.json")).read_text())


# ---------------------------------------------------------------------------
# argument helpers


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("values must be positive integers")
    return vals


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals or any(not 0 < v <= 1 for v in vals):
        raise argparse.ArgumentTypeError("eta values must lie in (0, 1]")
    return vals


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _tol(text: str) -> float:
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("tolerance must lie in (0, 1)")
    return v


def _out_dir(args) -> Path | None:
    out = args.out or os.environ.get(ENV_OUT)
    return Path(out) if out else None


# ---------------------------------------------------------------------------
# commands


def cmd_bounds(args) -> ReportBundle:
    b = ReportBundle("bounds", {"d": args.d, "k": args.k})
    for d in args.d:
        for k in args.k:
            b.add(f"bounds d={d} k={k}", d=d, k=k, reports=bounds.all_reports(d, k).to_list())
    return b


def _sdp_problem(name):
    spec = protocols.get(name)
    if not isinstance(spec, protocols.ProtocolSpec):
        raise UsageError(f"protocol {name!r} has no concrete input states to build an SDP from")
    return sdp.build(spec)


def cmd_sdp(args) -> ReportBundle:
    action = args.action
    cfg = {"action": action, "protocol": args.protocol, "tol": args.tol, "max_iter": args.max_iter}
    if action == "loss-sweep":
        cfg["eta"] = args.eta
    b = ReportBundle(f"sdp {action}", cfg)
    p = _sdp_problem(args.protocol)
    if action == "solve":
        try:
            sol = sdp.solve(p, tol=args.tol, max_iter=args.max_iter)
        except sdp.ConvergenceError as exc:
            sol = exc.solution
            b.ok = False
        b.add("sdp-solve", protocol=args.protocol, value=sol.value, dual_bound=sol.dual_bound,
              gap=sol.gap, residuals=sol.residuals, iterations=sol.iterations, converged=sol.converged)
    elif action == "verify-cert":
        which = CERTIFICATES.get(args.protocol)
        if which is None:
            raise UsageError(f"no shipped certificate for {args.protocol!r}; choose from {sorted(CERTIFICATES)}")
        check = sdp.verify_dual(p, sdp.appendix_certificates(which))
        b.ok = check.valid
        b.add("verify-cert", protocol=args.protocol, certificate=which, valid=check.valid,
              exact=check.exact, bound=check.exact_bound if check.exact_bound is not None else check.bound,
              min_eigenvalues=list(check.min_eigenvalues))
    else:
        for eta in args.eta:
            try:
                res = sdp.solve_with_loss(p, eta, tol=args.tol, max_iter=args.max_iter)
            except sdp.ConvergenceError as exc:
                b.ok = False
                b.add("loss-sweep", protocol=args.protocol, eta=eta, error=str(exc))
                continue
            b.add("loss-sweep", protocol=args.protocol, **res.to_dict())
    return b


def cmd_simulate(args) -> ReportBundle:
    cfg = montecarlo.RunConfig(args.protocol, args.strategy, args.rounds, args.seed, args.chunks, args.d, args.k)
    b = ReportBundle("simulate", {**cfg.to_dict(), "cross_check": args.cross_check}, seed=args.seed)
    if args.cross_check:
        cc = montecarlo.cross_check(cfg)
        stats = cc.stats
        b.ok = cc.ok
        b.add("simulate", config_hash=cfg.config_hash(), stats=stats.to_dict())
        b.add("cross-check", exact=dataclasses.asdict(cc.exact), flags=cc.flags)
    else:
        stats = montecarlo.simulate(cfg)
        b.add("simulate", config_hash=cfg.config_hash(), stats=stats.to_dict())
    out = _out_dir(args)
    if out is not None:
        montecarlo.append_csv(out / "simulations.csv", cfg, stats)
    return b


def cmd_paper_suite(args) -> ReportBundle:
    b = ReportBundle("paper-suite", {"quick": args.quick, "tol": args.tol}, seed=args.seed)
    echo = None if args.json else (lambda r: print(r.line(), flush=True))
    results = suite.run(seed=args.seed, quick=args.quick, tol=args.tol, on_result=echo)
    b.results = [r.to_dict() for r in results]
    b.ok = all(r.passed for r in results)
    return b


# ---------------------------------------------------------------------------
# text rendering


def _fmt(v):
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator} ({float(v):.12g})"
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def render_text(b: ReportBundle) -> str:
    lines = []
    for r in b.results:
        if b.command == "bounds":
            lines.append(f"# d={r['d']} k={r['k']}")
            for rep in r["reports"]:
                exact = f"  [{rep['exact']}]" if "exact" in rep else ""
                lines.append(f"{rep['name']:<30} {rep['value']:<16.12g}{exact}")
        elif b.command == "paper-suite":
            continue
        else:
            body = {k: v for k, v in r.items() if k != "name"}
            if "stats" in body:
                st = body.pop("stats")
                body.update({k: st[k] for k in ("success_rate", "conclusive_rate", "conditional_rate")})
                body["wilson_success"] = st["wilson"]["success_rate"]
            if "points" in body:
                body.pop("points")
            lines.append(r["name"] + ": " + ", ".join(f"{k}={_fmt(v)}" for k, v in body.items()))
    if b.command == "paper-suite":
        passed = sum(r["passed"] for r in b.results)
        lines.append(f"{passed}/{len(b.results)} checks passed")
    lines.append("OK" if b.ok else "FAILED")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="print the canonical JSON bundle")
    common.add_argument("--out", metavar="DIR", help=f"write the bundle (and CSV rows) here; overrides ${ENV_OUT}")

    parser = argparse.ArgumentParser(prog=TOOL, description="Attack and bound calculator for quantum position verification.")
    parser.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    pb = sub.add_parser("bounds", parents=[common], help="closed-form bounds")
    pb.add_argument("--d", type=_int_list, default=[2], help="dimension(s), comma-separated (default 2)")
    pb.add_argument("--k", type=_int_list, default=[1], help="answer alphabet size(s), comma-separated (default 1)")
    pb.set_defaults(func=cmd_bounds)

    ps = sub.add_parser("sdp", parents=[common], help="PPT discrimination SDP")
    ps.add_argument("action", choices=("solve", "verify-cert", "loss-sweep"))
    ps.add_argument("--protocol", default="sym-antisym",
                    choices=[n for n in protocols.REGISTRY if n != "qpv-generic"], help="default sym-antisym")
    ps.add_argument("--tol", type=_tol, default=1e-7, help="gap and residual tolerance (default 1e-7)")
    ps.add_argument("--max-iter", type=_positive, default=200_000, help="iteration budget (default 200000)")
    ps.add_argument("--eta", type=_float_list, default=[0.25, 0.5, 0.75, 1.0],
                    help="transmission rates for loss-sweep (default 0.25,0.5,0.75,1.0)")
    ps.set_defaults(func=cmd_sdp)

    pm = sub.add_parser("simulate", parents=[common], help="seeded Monte Carlo run")
    pm.add_argument("--protocol", required=True, choices=sorted(protocols.REGISTRY))
    pm.add_argument("--strategy", required=True, choices=sorted(strategies.REGISTRY))
    pm.add_argument("--rounds", type=_positive, default=100_000, help="default 100000")
    pm.add_argument("--seed", type=_seed, default=0, help="64-bit seed (default 0)")
    pm.add_argument("--chunks", type=_positive, default=4, help="independent RNG chunks (default 4)")
    pm.add_argument("--d", type=_positive, default=2, help="dimension for qpv-generic (default 2)")
    pm.add_argument("--k", type=_positive, default=1, help="alphabet size for qpv-generic (default 1)")
    pm.add_argument("--cross-check", action="store_true", help="compare against exact evaluation")
    pm.set_defaults(func=cmd_simulate)

    pp = sub.add_parser("paper-suite", parents=[common], help="run the reference battery")
    pp.add_argument("--quick", action="store_true", help="10^4 Monte Carlo rounds instead of 10^6")
    pp.add_argument("--seed", type=_seed, default=0, help="64-bit seed (default 0)")
    pp.add_argument("--tol", type=_tol, default=1e-7, help="SDP tolerance (default 1e-7)")
    pp.set_defaults(func=cmd_paper_suite)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        bundle = args.func(args)
    except (UsageError, KeyError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"{TOOL}: error: {msg}", file=sys.stderr)
        return 2
    text = bundle.to_json()
    out = _out_dir(args)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / (bundle.command.replace(" ", "-") + ".json")).write_text(text)
    sys.stdout.write(text if args.json else render_text(bundle))
    return 0 if bundle.ok else 1


if __name__ == "__main__":
    sys.exit(main())
