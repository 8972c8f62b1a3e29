"""Command-line entry point: ``twoweight <command> ...``.

Exit codes: 0 success, 1 failed verification, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from .io import InstanceFormatError, canonical_json, instance_digest, load_instance, save_instance

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

EXPLAIN = {
    "norm": [
        "value: best constant C in ||T(f sigma)||_{L^q(omega)} <= C ||f||_{L^p(sigma)},",
        "  T(f sigma) = sum_Q lambda_Q <f>^sigma_Q 1_Q, from multiplicative ascent on the unit sphere",
        "upper_bound: certified from the concave dual gap (1 - q) F + ||grad F||_{L^p'(sigma)}",
    ],
    "lp-norm": [
        "value: mixed norm (int (sum_Q |a_Q|^s 1_Q)^{r/s} d mu)^{1/r};",
        "  r = inf gives the Carleson form sup_Q (mu(Q)^{-1} sum_{R in Q} |a_R|^s mu(R))^{1/s}",
    ],
    "wolff": [
        "potential: W(x) = sum_{Q ni x} lambda_Q (omega(Q)/sigma(Q))^{p'-1} Lambda_{gamma,Q}^{p'-1}",
        "Lambda_{gamma,Q}: gamma power mean over omega|Q of rho_Q = sum_{R in Q} lambda_R 1_R",
        "condition_value: int W^{(p-1)q/(p-q)} d omega",
        "dlbo_ratio: largest sup/inf ratio of rho_Q on Q over active cubes",
    ],
    "characterize": [
        "A1, A2: the two sufficient-family conditions for a family a built from the maximizer",
        "D1, D2: the companion pair for d = lambda (omega/sigma) a",
        "upper_bound: minimized (D1 D2)^{1/p} over families a",
        "factorization_bound: constant of the factorization through a normalized density",
    ],
    "counterexample": [
        "small-gamma: nested chain where the gamma-Wolff integral stays bounded",
        "  while the testing integral sigma(P_0)^{-q/p} int rho^q d omega grows without bound",
        "large-gamma: increasing chain where the Carleson-type sufficient integral is finite",
        "  while the gamma = q sup-form Wolff integral grows like N^{1 - alpha beta}",
    ],
    "verify": [
        "invariants: identities and monotonicity on seeded random instances",
        "sandwich: two-sided comparison of the minimized bound with the operator norm",
        "wolff-scale: comparability brackets and gamma monotonicity at depths 3 and 4",
        "counterexamples: growth verdicts of both chain constructions",
    ],
}


def _print_json(obj) -> None:
    sys.stdout.write(canonical_json(obj) + "\n")


def _load(path):
    return load_instance(path)


def cmd_norm(args) -> int:
    from .operator import SolverConfig, estimate_norm

    inst = _load(args.instance)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        est = estimate_norm(inst, SolverConfig(tol=args.tol, restarts=args.restarts, seed=args.seed))
    if args.value_only:
        print(format(est.value, ".12g"))
        return EXIT_OK
    out = est.to_dict()
    out["instance_digest"] = instance_digest(inst)
    _print_json(out)
    return EXIT_OK


def _coeffs(inst, path):
    if path is None:
        return inst.lam
    data = json.loads(Path(path).read_text())
    a = np.zeros(inst.tree.n_nodes)
    for key, v in data.items():
        a[inst.tree.node_index(key)] = float(v)
    return a


def cmd_lp_norm(args) -> int:
    from .lpspaces import lp_norm

    inst = _load(args.instance)
    mu = inst.sigma_leaves if args.measure == "sigma" else inst.omega_leaves
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        val = lp_norm(inst.tree, _coeffs(inst, args.coeffs), args.r, args.s, mu)
    _print_json({"value": val, "r": args.r, "s": args.s, "measure": args.measure,
                 "warnings": [str(w.message) for w in caught]})
    return EXIT_OK


def cmd_wolff(args) -> int:
    from .wolff import wolff_report

    inst = _load(args.instance)
    if inst.exponents.p == 1:
        raise ValueError("the Wolff potential needs p > 1")
    _print_json(wolff_report(inst, args.gamma).to_dict())
    return EXIT_OK


def cmd_characterize(args) -> int:
    from .characterizations import characterize

    inst = _load(args.instance)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = characterize(inst, sweeps=args.sweeps)
    _print_json(rep.to_dict())
    return EXIT_OK


def cmd_counterexample(args) -> int:
    from . import counterexamples as ce

    N = args.depth
    if args.which == "small-gamma":
        res = ce.run_small_gamma(args.p, args.q, args.gamma, args.epsilon, N)
        build = lambda: ce.build_counterexample_small_gamma(args.p, args.q, args.gamma, N, args.epsilon)
        tree_depth = N + 1
    else:
        res = ce.run_large_gamma(args.p, args.q, args.beta, N)
        build = lambda: ce.build_counterexample_large_gamma(args.p, args.q, N, args.beta)
        tree_depth = N
    out = res.to_dict()
    if args.instance_out:
        if tree_depth > ce.MATERIALIZE_MAX_DEPTH:
            raise ValueError(f"materialized trees need depth <= {ce.MATERIALIZE_MAX_DEPTH}")
        save_instance(build(), args.instance_out)
        out["instance_file"] = str(args.instance_out)
    out["note"] = "the endpoint p = 1 variant is not constructed"
    _print_json(out)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .suites import SuiteConfig, run_suite

    sizes = tuple(int(s) for s in args.sizes.split(",")) if args.sizes else None
    cfg = SuiteConfig(n_instances=args.n, reproducer_dir=args.reproducer_dir, chain_depth=args.chain_depth)
    rep = run_suite(args.suite, args.seed, sizes, cfg)
    text = rep.to_json()
    if args.report:
        Path(args.report).write_text(text + "\n")
    summary = {"suite": args.suite, "passed": rep.passed, "hash": rep.hash,
               "constants": rep.constants, "reproducers": rep.reproducers,
               "wall_time": rep.wall_time}
    _print_json(summary)
    return EXIT_OK if rep.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="twoweight", description=__doc__.splitlines()[0])
    ap.add_argument("--explain", action="store_true", help="describe the computed quantities and exit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("norm", help="operator norm estimate")
    p.add_argument("instance")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--value-only", action="store_true")
    p.set_defaults(func=cmd_norm)

    p = sub.add_parser("lp-norm", help="discrete Littlewood-Paley norm of a coefficient family")
    p.add_argument("instance")
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--measure", choices=("sigma", "omega"), default="omega")
    p.add_argument("--coeffs", help="JSON object {node path: value}; defaults to lambda")
    p.set_defaults(func=cmd_lp_norm)

    p = sub.add_parser("wolff", help="generalized Wolff potential and condition value")
    p.add_argument("instance")
    p.add_argument("--gamma", type=float, default=None)
    p.set_defaults(func=cmd_wolff)

    p = sub.add_parser("characterize", help="characterization quantities and bounds")
    p.add_argument("instance")
    p.add_argument("--sweeps", type=int, default=50)
    p.set_defaults(func=cmd_characterize)

    p = sub.add_parser("counterexample", help="chain constructions and their growth reports")
    p.add_argument("--which", choices=("small-gamma", "large-gamma"), required=True)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--q", type=float, default=0.5)
    p.add_argument("--gamma", type=float, default=0.25)
    p.add_argument("--depth", type=int, default=10**5)
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=1.25)
    p.add_argument("--instance-out", help="write the materialized tree (small depth only)")
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("verify", help="run a seeded verification suite")
    p.add_argument("--suite", choices=("invariants", "sandwich", "wolff-scale", "counterexamples"), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sizes", default=None, help="comma-separated depths")
    p.add_argument("--n", type=int, default=200, help="number of instances")
    p.add_argument("--chain-depth", type=int, default=10**5)
    p.add_argument("--reproducer-dir", default=".")
    p.add_argument("--report", help="write the full run report here")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    ap = build_parser()
    if "--explain" in argv:
        cmds = [a for a in argv if a in EXPLAIN]
        for c in cmds or list(EXPLAIN):
            print(f"[{c}]")
            print("\n".join(EXPLAIN[c]))
        return EXIT_OK
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except (InstanceFormatError, ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
