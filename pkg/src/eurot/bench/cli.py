"""Command line entry points: single solves, oracle queries, experiments.

Exit codes: 0 when every requested run converged, 2 when a solver ran out of
budget before its tolerance, 1 for input or usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NOT_CONVERGED = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits 2 on usage errors; we want 1
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eurot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run one accuracy-targeted solve on an image pair")
    solve.add_argument("--method", required=True,
                       choices=["euclid-sinkhorn", "apdagd", "aam", "clvr", "entropy-sinkhorn"])
    solve.add_argument("--epsilon", type=float, required=True)
    solve.add_argument("--source-idx", required=True, metavar="FILE:INDEX")
    solve.add_argument("--target-idx", required=True, metavar="FILE:INDEX")
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--max-iters", type=int, default=1_000_000)
    solve.add_argument("--no-normalise-cost", action="store_true")
    solve.add_argument("--fidelity", choices=["printed", "corrected"], default="corrected")
    solve.add_argument("--out", required=True, help="output directory")

    oracle = sub.add_parser("oracle", help="exact references on a small JSON instance")
    which = oracle.add_mutually_exclusive_group(required=True)
    which.add_argument("--lp", action="store_true", help="transportation-simplex optimum")
    which.add_argument("--dual", action="store_true", help="high-precision dual maximiser")
    oracle.add_argument("--instance", required=True,
                        help="JSON file with keys a, b, C and (for --dual) gamma")
    oracle.add_argument("--tol", type=float, default=1e-9, help="dual ascent tolerance")
    oracle.add_argument("--out", default=None, help="write JSON here instead of stdout")

    exp = sub.add_parser("experiment", help="run a (method, epsilon, seed) sweep from a config")
    exp.add_argument("--config", required=True, help="JSON experiment configuration")
    return parser


def _cmd_solve(args) -> int:
    from .experiment import ExperimentConfig, run_experiment

    cfg = ExperimentConfig(
        source=args.source_idx,
        target=args.target_idx,
        epsilons=[args.epsilon],
        methods=[args.method],
        seeds=[args.seed],
        out=args.out,
        normalise_cost=not args.no_normalise_cost,
        max_iter=args.max_iters,
        fidelity=args.fidelity,
    )
    summaries = run_experiment(cfg)
    for s in summaries:
        status = "converged" if s.get("converged") else (s["error"] or "not converged")
        print(f"{s['method']} eps={s['epsilon']} seed={s['seed']}: {status}, "
              f"cost={s.get('final_cost')}, iterations={s.get('iterations')}")
    if any(s["error"] for s in summaries):
        return EXIT_INPUT
    return EXIT_OK if all(s["converged"] for s in summaries) else EXIT_NOT_CONVERGED


def _cmd_oracle(args) -> int:
    from eurot.core import CostMatrix, Measure, Problem
    from eurot.oracles import dual_ascent_reference, lp_transport_simplex, oracle_dual_value

    with open(args.instance) as fh:
        raw = json.load(fh)
    a = Measure(np.asarray(raw["a"], dtype=np.float64))
    b = Measure(np.asarray(raw["b"], dtype=np.float64))
    c = CostMatrix(np.asarray(raw["C"], dtype=np.float64))
    if args.lp:
        sol = lp_transport_simplex(a, b, c)
        payload = {
            "value": sol.value,
            "plan": sol.plan.entries.tolist(),
            "basis": sorted(list(cell) for cell in sol.basis),
        }
    else:
        gamma = raw.get("gamma")
        if gamma is None:
            raise ValueError("instance JSON needs a gamma field for --dual")
        problem = Problem(a, b, c, float(gamma))
        d = dual_ascent_reference(problem, tol=args.tol)
        payload = {
            "lam": d.lam.tolist(),
            "mu": d.mu.tolist(),
            "phi": oracle_dual_value(problem, d),
        }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_experiment(args) -> int:
    from .experiment import ExperimentConfig, run_experiment

    cfg = ExperimentConfig.from_json(args.config)
    summaries = run_experiment(cfg)
    failures = [s for s in summaries if s["error"]]
    stragglers = [s for s in summaries if not s["error"] and not s["converged"]]
    print(f"{len(summaries)} runs: {len(summaries) - len(failures) - len(stragglers)} "
          f"converged, {len(stragglers)} hit their budget, {len(failures)} failed")
    if failures:
        return EXIT_INPUT
    return EXIT_NOT_CONVERGED if stragglers else EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "oracle":
            return _cmd_oracle(args)
        return _cmd_experiment(args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INPUT
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
