"""Command-line entry point: ``mimo-glasso {scenario-a,scenario-b,solve}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields

from .channel import load_channel
from .metrics import NoiseProfile, evaluate
from .precoder import group_lasso_precoder, mrt_random
from .scenarios import METHODS, ScenarioConfig, emit_csv, load_config, run_sweep
from .solver import SolverConfig

log = logging.getLogger("mimo_glasso")


def _int_list(text: str) -> list:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _method_list(text: str) -> list:
    items = [tok.strip() for tok in text.split(",") if tok.strip()]
    bad = [x for x in items if x not in METHODS]
    if bad or not items:
        raise argparse.ArgumentTypeError(f"methods must be drawn from {','.join(METHODS)}")
    return items


def _add_solver_flags(p):
    g = p.add_argument_group("solver")
    g.add_argument("--eta", type=float, help="relaxation factor of the l2,1 budget (default 1)")
    g.add_argument("--lambda", dest="lam", type=float, help="initial ridge weight (default 0)")
    g.add_argument("--mu", type=float, help="initial group-sparsity weight (default 0)")
    g.add_argument("--tol", type=float, help="relative objective change to stop at (default 1e-8)")
    g.add_argument("--max-iter", dest="max_iter", type=int, help="iteration cap per solve (default 5000)")
    g.add_argument("--no-acceleration", action="store_true", help="plain proximal gradient")


def _add_common(p):
    p.add_argument("--config", help="key: value file with ScenarioConfig fields; flags override it")
    p.add_argument("--m", dest="m_values", type=_int_list, help="array sizes, e.g. 4,8,16,32,64")
    p.add_argument("--power", type=float)
    p.add_argument("--noise-var", dest="noise_variance", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", dest="master_seed", type=int)
    p.add_argument("--methods", type=_method_list, help="comma-separated subset of group-lasso,mrt")
    p.add_argument("--workers", type=int, default=1, help="worker processes (results do not depend on it)")
    p.add_argument("--out", required=True, help="CSV output path")
    _add_solver_flags(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mimo-glasso",
                                     description="Joint user selection and precoding via group LASSO.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("scenario-a", help="fixed loads: K = ceil(alpha_k M), L = ceil(alpha_l M)")
    a.add_argument("--alpha-k", dest="alpha_k", type=float)
    a.add_argument("--alpha-l", dest="alpha_l", type=float)
    _add_common(a)

    b = sub.add_parser("scenario-b", help="fixed number of users K, one curve per L")
    b.add_argument("--k", dest="k_users", type=int)
    b.add_argument("--l", dest="l_values", type=_int_list)
    _add_common(b)

    s = sub.add_parser("solve", help="precode one channel read from a file, print JSON")
    s.add_argument("--channel", required=True, help="channel file ('M K' header, then 're im' lines)")
    s.add_argument("--power", type=float, default=1.0)
    s.add_argument("--l", dest="l_users", type=int, required=True)
    s.add_argument("--beta", type=float, default=1.0)
    s.add_argument("--noise-var", dest="noise_variance", type=float, default=0.1)
    s.add_argument("--method", choices=METHODS, default="group-lasso")
    s.add_argument("--seed", type=int, default=0, help="selection seed for mrt")
    _add_solver_flags(s)
    return parser


def _solver_from_args(args, base: SolverConfig) -> SolverConfig:
    changes = {}
    for name, attr in (("eta", "eta"), ("lam", "lam"), ("mu", "mu"),
                       ("tol", "tolerance"), ("max_iter", "max_iterations")):
        val = getattr(args, name, None)
        if val is not None:
            changes[attr] = val
    if getattr(args, "no_acceleration", False):
        changes["acceleration"] = False
    return base.with_(**changes)


def _scenario_from_args(args) -> ScenarioConfig:
    base = load_config(args.config).to_dict() if args.config else {}
    base["mode"] = "fixed-load" if args.command == "scenario-a" else "fixed-users"
    names = {f.name for f in fields(ScenarioConfig)} - {"solver", "mode"}
    for name in names:
        val = getattr(args, name, None)
        if val is not None:
            base[name] = val
    solver = base.pop("solver", None)
    solver = SolverConfig(**solver) if isinstance(solver, dict) else SolverConfig()
    base["solver"] = _solver_from_args(args, solver)
    return ScenarioConfig(**base)


def _run_solve(args) -> int:
    h = load_channel(args.channel)
    cfg = _solver_from_args(args, SolverConfig(beta=args.beta))
    if args.method == "mrt":
        out = mrt_random(h, args.power, args.l_users, args.seed)
    else:
        out = group_lasso_precoder(h, args.power, args.l_users, cfg)
    report = evaluate(h, out, NoiseProfile.uniform(h.k_users, args.noise_variance), beta=args.beta)
    doc = {
        "method": args.method,
        "M": h.m_antennas,
        "K": h.k_users,
        "L": args.l_users,
        "precoder": out.summary(),
        "metrics": report.to_dict(),
    }
    json.dump(doc, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "solve":
            return _run_solve(args)
        try:
            cfg = _scenario_from_args(args)
        except (ValueError, TypeError) as exc:
            parser.error(str(exc))
        if args.workers < 1:
            parser.error("--workers must be >= 1")
        records = run_sweep(cfg, workers=args.workers)
        emit_csv(records, args.out)
        for r in records:
            if r.flagged:
                print(f"warning: {r.method} M={r.m} L={r.l}: {r.degenerate} degenerate draws",
                      file=sys.stderr)
        return 0
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"mimo-glasso: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
