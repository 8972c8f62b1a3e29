"""Seeded verification suites and the run report they produce."""
from __future__ import annotations

import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .io import canonical_json, digest, instance_to_dict, save_instance
from .tree import Instance, random_instance

WORKERS_ENV = "TWOWEIGHT_WORKERS"
SUITES = ("invariants", "sandwich", "wolff-scale", "counterexamples")
DEFAULT_GRID = ((1.5, 0.25), (1.5, 0.5), (2.0, 0.25), (2.0, 0.5), (3.0, 0.5))
GAMMAS = (0.25, 0.5, 1.0, 2.0, 4.0)


@dataclass
class SuiteConfig:
    seed: int = 0
    n_instances: int = 200
    sizes: tuple[int, ...] = (1, 2, 3)
    grid: tuple[tuple[float, float], ...] = DEFAULT_GRID
    sweeps: int = 30
    sandwich_limit: float = 50.0
    chain_depth: int = 10**5
    reproducer_dir: str = "."
    workers: int | None = None


@dataclass
class Check:
    name: str
    passed: bool
    value: float = math.nan

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "value": float(self.value)}


@dataclass
class CaseResult:
    index: int
    label: str
    checks: list[Check]
    constants: dict[str, float] = field(default_factory=dict)
    instance: dict | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


@dataclass
class RunReport:
    command: str
    instance_digest: str
    results: list[dict]
    constants: dict
    wall_time: float
    passed: bool
    reproducers: list[str] = field(default_factory=list)

    def content(self) -> dict:
        """Everything except timing and file locations."""
        d = asdict(self)
        d.pop("wall_time")
        d.pop("reproducers")
        return d

    @property
    def hash(self) -> str:
        return digest(self.content())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hash"] = self.hash
        d["format"] = 1
        return d

    def to_json(self) -> str:
        return canonical_json(self.to_dict())


# ---------------------------------------------------------------- helpers

def _rel_close(x, y, tol) -> bool:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    scale = np.maximum(np.maximum(np.abs(x), np.abs(y)), 1e-300)
    return bool(np.all(np.abs(x - y) <= tol * scale))


def _case_instance(seed: int, index: int, depth: int, p: float, q: float) -> Instance:
    rng = np.random.default_rng([seed, index])
    return random_instance(rng, depth, p=p, q=q)


def _case_params(cfg: SuiteConfig, index: int):
    p, q = cfg.grid[index % len(cfg.grid)]
    depth = cfg.sizes[(index // len(cfg.grid)) % len(cfg.sizes)]
    return depth, p, q


# ---------------------------------------------------------------- invariants

def invariant_checks(inst: Instance) -> tuple[list[Check], dict]:
    """Exact identities and inequalities every instance must satisfy."""
    from .lpspaces import f_norm_scaling_check
    from .operator import domination_sides, estimate_norm, multiplier_norm_sup, transform_b_to_a
    from .wolff import lambda_gamma_all, wolff_potential

    tree = inst.tree
    checks = []
    sig = inst.sigma
    kids = sig[tree.offset(1):].reshape(-1, tree.branching).sum(axis=1) if tree.depth else sig[:0]
    checks.append(Check("measure_additivity", bool(np.array_equal(kids, sig[: len(kids)]))))

    lams = [lambda_gamma_all(inst, g) for g in GAMMAS]
    worst = max(float(np.max(lo - hi)) for lo, hi in zip(lams, lams[1:]))
    checks.append(Check("jensen_monotone", worst <= 1e-12, worst))
    if inst.exponents.p > 1:
        Ws = [wolff_potential(inst, g) for g in GAMMAS]
        worst = max(float(np.max(lo - hi * (1 + 1e-12))) for lo, hi in zip(Ws, Ws[1:]))
        checks.append(Check("wolff_monotone_in_gamma", worst <= 1e-12, worst))

    inner = tree.descendant_sums(inst.lam_active * inst.omega)
    checks.append(Check("wolff_inner_sum_identity", _rel_close(lams[2] * inst.omega, inner, 1e-12)))

    rng = np.random.default_rng(0)
    b = rng.uniform(0.0, 1.0, tree.n_nodes)
    rho_b, lam_a, sum_b, sup_a = domination_sides(inst, b=b)
    checks.append(Check("domination_rho_b", _rel_close(rho_b, lam_a, 1e-12)))
    a = transform_b_to_a(tree, rng.uniform(0.0, 1.0, tree.n_nodes))
    _, _, sum_b, sup_a = domination_sides(inst, a=rng.permutation(a))
    checks.append(Check("domination_sup", _rel_close(sum_b, sup_a, 1e-12)))

    r = f_norm_scaling_check(b, 2.0, 1.5, 0.7, inst.measures)
    checks.append(Check("lp_power_scaling", abs(r - 1) <= 1e-12, r))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        est = estimate_norm(inst)
        mult = multiplier_norm_sup(inst)
    checks.append(Check("norm_certified", est.value <= est.upper_bound * (1 + 1e-12) and est.converged,
                        est.stationarity_residual))
    consts = {}
    if est.value > 0 and inst.exponents.p > 1:
        ratio = est.value / mult.value
        pc = inst.exponents.p_conj
        checks.append(Check("multiplier_comparable", 1 - 1e-6 <= ratio <= pc * (1 + 1e-6), ratio))
        consts["norm_over_multiplier"] = ratio
    return checks, consts


def _invariants_case(cfg: SuiteConfig, index: int) -> CaseResult:
    depth, p, q = _case_params(cfg, index)
    inst = _case_instance(cfg.seed, index, depth, p, q)
    checks, consts = invariant_checks(inst)
    return CaseResult(index, f"p={p},q={q}", checks, consts, instance_to_dict(inst))


# ---------------------------------------------------------------- sandwich

def _sandwich_case(cfg: SuiteConfig, index: int) -> CaseResult:
    from .characterizations import maurey_factorization, minimize_auxiliary_bound, factorization_bound
    from .operator import estimate_norm

    depth, p, q = _case_params(cfg, index)
    inst = _case_instance(cfg.seed, index, depth, p, q)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        est = estimate_norm(inst)
        sw = minimize_auxiliary_bound(inst, sweeps=cfg.sweeps, est=est)
        b, c = maurey_factorization(inst, est)
        fact = factorization_bound(inst, b, c)
    C1 = max(sw.ratio, 1.0 / sw.ratio)
    checks = [
        Check("auxiliary_bound_sandwich", C1 <= cfg.sandwich_limit, C1),
        Check("factorization_bound_dominates", fact >= est.value * (1 - 1e-6), fact / est.value),
    ]
    return CaseResult(index, f"p={p},q={q}", checks,
                      {"auxiliary_bound_C": C1, "factorization_bound_C": fact / est.value}, instance_to_dict(inst))


# ---------------------------------------------------------------- wolff-scale

def _wolff_case(cfg: SuiteConfig, index: int) -> CaseResult:
    from .lpspaces import equivalent_expressions_ratio, summation_by_parts_ratio
    from .wolff import dlbo_ratio, wolff_potential

    _, p, q = _case_params(cfg, index)
    checks, consts = [], {}
    for depth in (3, 4):
        inst = _case_instance(cfg.seed, index + 10_000 * depth, depth, p, q)
        mask = inst.active
        a = np.where(mask, inst.lam, 0.0)
        lo1, hi1 = summation_by_parts_ratio(a, p, inst.measures, "omega", mask)
        lo2, hi2 = equivalent_expressions_ratio(a, p, inst.measures, "omega", mask)
        consts[f"sbp_low_d{depth}"], consts[f"sbp_high_d{depth}"] = lo1, hi1
        consts[f"equiv_low_d{depth}"], consts[f"equiv_high_d{depth}"] = lo2, hi2
        checks.append(Check(f"ratios_finite_d{depth}", all(map(math.isfinite, (lo1, hi1, lo2, hi2)))))
        Ws = [wolff_potential(inst, g) for g in GAMMAS]
        worst = max(float(np.max(lo - hi * (1 + 1e-12))) for lo, hi in zip(Ws, Ws[1:]))
        checks.append(Check(f"wolff_monotone_d{depth}", worst <= 1e-12, worst))
        dl = dlbo_ratio(inst)
        checks.append(Check(f"dlbo_at_least_one_d{depth}", dl >= 1.0, dl))
        consts[f"dlbo_d{depth}"] = dl
    return CaseResult(index, f"p={p}", checks, consts)


# ---------------------------------------------------------------- counterexamples

def counterexample_checks(N: int) -> tuple[list[Check], dict]:
    from .counterexamples import (
        build_counterexample_large_gamma, build_counterexample_small_gamma, large_gamma_terms,
        necessary_quantity_tree, run_large_gamma, run_small_gamma, small_gamma_terms,
        sufficient_quantity_tree, sup_form_quantity_tree, LargeGammaParams, SmallGammaParams,
    )
    from .wolff import wolff_condition_value

    checks, consts = [], {}
    lg = run_large_gamma(2.0, 0.5, 1.25, N)
    sg = run_small_gamma(2.0, 0.5, 0.25, 0.5, N)
    sup = lg.reports["sup_form"]
    checks.append(Check("large_gamma_divergent_slope", abs(sup.increment_slope - 1 / 6) <= 0.03,
                        sup.increment_slope))
    suf = lg.reports["sufficient"]
    checks.append(Check("large_gamma_convergent_tail", suf.at(N) - suf.at(N // 2)
                        < lg.verdicts["sufficient"].tail_bound, suf.at(N) - suf.at(N // 2)))
    nec = sg.reports["necessary"]
    checks.append(Check("small_gamma_necessary_grows", bool(np.all(np.diff(nec.partial_sums) > 0))))
    checks.append(Check("small_gamma_wolff_certified", sg.verdicts["gamma_wolff"].converges
                        and not sg.verdicts["necessary"].converges))
    consts["large_gamma_increment_slope"] = sup.increment_slope
    consts["small_gamma_necessary_growth"] = nec.at(N) / nec.at(1000) if N >= 1000 else math.nan

    # materialized cross-checks
    n = 8
    inst = build_counterexample_small_gamma(2.0, 0.5, 0.25, n, 0.5)
    necs, wol = small_gamma_terms(SmallGammaParams(2.0, 0.5, 0.25, 0.5), n)
    checks.append(Check("small_gamma_tree_wolff", _rel_close(wol.sum(), wolff_condition_value(inst, 0.25), 1e-10)))
    checks.append(Check("small_gamma_tree_necessary",
                        _rel_close(necs.sum(), necessary_quantity_tree(inst)[0], 1e-10)))
    inst = build_counterexample_large_gamma(2.0, 0.5, n, 1.25)
    s, sf, _ = large_gamma_terms(LargeGammaParams(2.0, 0.5, 1.25), n)
    checks.append(Check("large_gamma_tree_sufficient",
                        _rel_close(s.sum() ** (2.0 / 1.5), sufficient_quantity_tree(inst), 1e-10)))
    checks.append(Check("large_gamma_tree_sup_form", _rel_close(sf.sum(), sup_form_quantity_tree(inst), 1e-10)))
    return checks, consts


def _counterexample_case(cfg: SuiteConfig, index: int) -> CaseResult:
    checks, consts = counterexample_checks(cfg.chain_depth)
    return CaseResult(index, "chains", checks, consts)


# ---------------------------------------------------------------- driver

_CASES = {
    "invariants": _invariants_case,
    "sandwich": _sandwich_case,
    "wolff-scale": _wolff_case,
    "counterexamples": _counterexample_case,
}


def _n_cases(name: str, cfg: SuiteConfig) -> int:
    if name == "counterexamples":
        return 1
    if name == "wolff-scale":
        return min(cfg.n_instances, 10 * len(cfg.grid))
    return cfg.n_instances


def _workers(cfg: SuiteConfig) -> int:
    if cfg.workers is not None:
        return max(1, cfg.workers)
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _merge_constants(name: str, cases: list[CaseResult]) -> dict:
    """Worst observed constant per (label, key), plus the best for lower brackets."""
    table: dict[str, dict[str, float]] = {}
    for case in cases:
        row = table.setdefault(case.label, {})
        for key, v in case.constants.items():
            if not math.isfinite(v):
                continue
            if "low" in key:
                row[key] = min(row.get(key, math.inf), v)
            else:
                row[key] = max(row.get(key, -math.inf), v)
    return table


def run_suite(name: str, seed: int = 0, sizes=None, cfg: SuiteConfig | None = None) -> RunReport:
    """Run a named suite; failing instances are dumped to reproducer files."""
    if name not in _CASES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    cfg = cfg or SuiteConfig()
    cfg.seed = seed
    if sizes is not None:
        cfg.sizes = tuple(sizes)
    t0 = time.perf_counter()
    fn = _CASES[name]
    idx = range(_n_cases(name, cfg))
    nw = _workers(cfg)
    if nw > 1:
        with ProcessPoolExecutor(nw) as pool:
            cases = list(pool.map(fn, [cfg] * len(idx), idx))
    else:
        cases = [fn(cfg, i) for i in idx]
    cases.sort(key=lambda c: c.index)
    repro = []
    for case in cases:
        if not case.passed and case.instance is not None:
            path = Path(cfg.reproducer_dir) / f"repro-{name}-seed{seed}-{case.index}.json"
            path.write_text(canonical_json(case.instance) + "\n")
            repro.append(str(path))
    inst_digest = digest([c.instance for c in cases])
    results = [
        {"index": c.index, "label": c.label, "passed": c.passed, "checks": [k.to_dict() for k in c.checks]}
        for c in cases
    ]
    command = f"verify --suite {name} --seed {seed} --sizes {','.join(map(str, cfg.sizes))}"
    return RunReport(command, inst_digest, results, _merge_constants(name, cases),
                     time.perf_counter() - t0, all(c.passed for c in cases), repro)


def dump_reproducer(inst: Instance, path) -> None:
    save_instance(inst, path)
