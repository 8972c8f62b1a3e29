"""Auxiliary-coefficient characterizations of the two-weight inequality.

Every family here is a node array; only entries on the active collection
are read, and every sum or supremum runs over active cubes.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .operator import NormEstimate, SolverConfig, apply_T, estimate_norm, lp_leaf_norm
from .tree import Instance, safe_divide
from .wolff import lambda_gamma_all


class DomainError(ValueError):
    pass


def _positive_on_active(inst: Instance, fam, name: str) -> np.ndarray:
    fam = np.asarray(fam, dtype=float)
    if fam.shape != (inst.tree.n_nodes,):
        raise ValueError(f"{name} must have one entry per node")
    bad = inst.active & ~(fam > 0)
    if bad.any():
        raise DomainError(f"{name} must be positive on every active cube ({int(bad.sum())} violations)")
    return np.where(inst.active, fam, 0.0)


def _inv(inst: Instance, fam: np.ndarray) -> np.ndarray:
    return np.where(inst.active, safe_divide(1.0, fam), 0.0)


def _pow(x, e):
    out = np.zeros_like(np.asarray(x, dtype=float))
    np.power(x, e, out=out, where=x > 0)
    return out


def _carleson(inst: Instance, terms: np.ndarray, mu_nodes: np.ndarray) -> float:
    """sup over active Q of (1/mu(Q)) sum_{R <= Q, R active} terms_R."""
    inner = inst.tree.descendant_sums(np.where(inst.active, terms, 0.0))
    vals = safe_divide(inner, mu_nodes)[inst.active]
    return float(vals.max(initial=0.0))


def _sup_integral(inst: Instance, fam: np.ndarray, power: float) -> float:
    """integral of (sup_Q fam_Q 1_Q)^power against omega."""
    env = inst.tree.path_max(np.where(inst.active, fam, 0.0))
    return float(np.dot(_pow(env, power), inst.omega_leaves))


# ---------------------------------------------------------------------------
# the quantities A and D

def quantities_A(inst: Instance, a) -> tuple[float, float]:
    e = inst.exponents
    a = _positive_on_active(inst, a, "a")
    if not inst.active.any():
        return 0.0, 0.0
    dens = inst.tree.path_sums(inst.lam_active * inst.density_ratio * _inv(inst, a))
    A1 = lp_leaf_norm(dens, inst.sigma_leaves, e.p_conj)
    A2 = _sup_integral(inst, a, e.omega_exponent) ** ((1.0 - e.q) / e.q)
    return A1, A2


def quantities_D(inst: Instance, d) -> tuple[float, float]:
    e = inst.exponents
    if e.p == 1:
        raise ValueError("D2 needs p > 1")
    d = _positive_on_active(inst, d, "d")
    if not inst.active.any():
        return 0.0, 0.0
    D1 = _carleson(inst, inst.lam_active * _inv(inst, d) * inst.omega, inst.sigma)
    pot = inst.tree.path_sums(inst.lam_active * _pow(d, e.p_conj - 1.0))
    D2 = float(np.dot(_pow(pot, e.wolff_exponent), inst.omega_leaves)) ** ((e.p - e.q) / e.q)
    return D1, D2


def construct_d_from_a(inst: Instance, a) -> np.ndarray:
    """d_Q = a_Q sup_{R >= Q} (1/sigma(R)) sum_{S <= R} lambda_S a_S^{-1} omega(S)."""
    a = _positive_on_active(inst, a, "a")
    tree = inst.tree
    local = safe_divide(tree.descendant_sums(inst.lam_active * _inv(inst, a) * inst.omega), inst.sigma)
    env = tree.ancestor_max(np.where(inst.active, local, 0.0))
    return np.where(inst.active, a * env, 0.0)


def construct_a_from_d(inst: Instance, d) -> np.ndarray:
    """a_Q = (sum_{R >= Q} lambda_R d_R^{p'-1})^{(1-q)(p-1)/(p-q)}."""
    e = inst.exponents
    d = _positive_on_active(inst, d, "d")
    anc = inst.tree.ancestor_sums(inst.lam_active * _pow(d, e.p_conj - 1.0))
    return np.where(inst.active, _pow(anc, (1.0 - e.q) * (e.p - 1.0) / (e.p - e.q)), 0.0)


def auxiliary_family_bound(inst: Instance, a) -> float:
    """The auxiliary-coefficient bound for the operator norm (p > 1).

    Invariant under a -> t a.  It equals D1^{1/p} D2^{1/p} for the family
    d = lambda (omega/sigma) a.
    """
    e = inst.exponents
    if e.p == 1:
        raise ValueError("the auxiliary-coefficient bound needs p > 1")
    a = _positive_on_active(inst, a, "a")
    if not inst.active.any():
        return 0.0
    first = _carleson(inst, _inv(inst, a) * inst.sigma, inst.sigma)
    terms = inst.lam_active ** e.p_conj * inst.density_ratio ** (e.p_conj - 1.0) * _pow(a, e.p_conj - 1.0)
    pot = inst.tree.path_sums(terms)
    second = float(np.dot(_pow(pot, e.wolff_exponent), inst.omega_leaves))
    return first ** (1.0 / e.p) * second ** ((e.p - e.q) / (e.p * e.q))


def factorization_bound(inst: Instance, b, c, rtol: float = 1e-12) -> float:
    """Factorization bound for lambda = b c on the active collection."""
    e = inst.exponents
    act = inst.active
    if not act.any():
        return 0.0
    b = _positive_on_active(inst, b, "b")
    c = _positive_on_active(inst, c, "c")
    prod = b * c
    if not np.allclose(prod[act], inst.lam[act], rtol=rtol, atol=0.0):
        worst = float(np.max(np.abs(prod[act] - inst.lam[act]) / inst.lam[act]))
        raise ValueError(f"b*c differs from lambda (max relative error {worst:.3e})")
    first = _sup_integral(inst, b, e.omega_exponent) ** ((1.0 - e.q) / e.q)
    dens = inst.tree.path_sums(c * inst.density_ratio)
    second = lp_leaf_norm(dens, inst.sigma_leaves, e.p_conj)
    return first * second


# ---------------------------------------------------------------------------
# Maurey densities

def maurey_discretize(inst: Instance, phi) -> np.ndarray:
    """a_Q = 1 / <phi^{-(1-q)/q}>^omega_Q on active cubes."""
    q = inst.exponents.q
    phi = np.asarray(phi, dtype=float)
    if np.any(phi < 0):
        raise ValueError("phi must be nonnegative")
    need = inst.covered_leaves & (inst.omega_leaves > 0)
    if np.any(need & (phi <= 0)):
        raise DomainError(
            "phi vanishes on an omega-charged leaf of an active cube; a Maurey density "
            "must be positive omega-a.e. on every cube with lambda_Q > 0 and omega(Q) > 0"
        )
    neg = np.zeros_like(phi)
    np.power(phi, -(1.0 - q) / q, out=neg, where=need)
    avg = safe_divide(inst.tree.node_sums(neg * inst.omega_leaves), inst.omega)
    return np.where(inst.active, safe_divide(1.0, avg), 0.0)


def maurey_undiscretize(inst: Instance, a) -> np.ndarray:
    """phi = (sup over active Q of a_Q 1_Q)^{q/(1-q)}."""
    a = np.where(inst.active, np.asarray(a, dtype=float), 0.0)
    return _pow(inst.tree.path_max(a), inst.exponents.omega_exponent)


def maurey_density(inst: Instance, est: NormEstimate | None = None) -> np.ndarray:
    """Normalized density (T f*)^q / int (T f*)^q d omega from a norm maximizer."""
    est = est or estimate_norm(inst)
    Tf = apply_T(inst, est.maximizer)
    vals = _pow(Tf, inst.exponents.q)
    total = float(np.dot(vals, inst.omega_leaves))
    return vals / total if total > 0 else vals


def maurey_factorization(inst: Instance, est: NormEstimate | None = None):
    """(b, c) with lambda = b c built from the discretized Maurey density."""
    phi = maurey_density(inst, est)
    b = maurey_discretize(inst, phi)
    c = np.where(inst.active, safe_divide(inst.lam, b), 0.0)
    return b, c


# ---------------------------------------------------------------------------
# two-sided comparison of the auxiliary bound with the norm

def _log_bound(inst: Instance, idx: np.ndarray, x: np.ndarray) -> float:
    a = np.zeros(inst.tree.n_nodes)
    a[idx] = np.exp(x)
    return math.log(auxiliary_family_bound(inst, a))


@dataclass
class SandwichResult:
    norm: float
    bound: float
    family: np.ndarray
    sweeps: int
    start_bound: float

    @property
    def ratio(self) -> float:
        return self.bound / self.norm if self.norm > 0 else math.nan


def minimize_auxiliary_bound(
    inst: Instance,
    start=None,
    sweeps: int = 200,
    tol: float = 1e-6,
    est: NormEstimate | None = None,
) -> SandwichResult:
    """Coordinate descent in log-coordinates on the auxiliary-coefficient bound.

    The default start turns the Maurey factorization of a norm maximizer into
    a family through the explicit d-from-a construction.
    """
    est = est or estimate_norm(inst)
    act = inst.active
    idx = np.flatnonzero(act)
    if idx.size == 0:
        return SandwichResult(0.0, 0.0, np.zeros(inst.tree.n_nodes), 0, 0.0)
    if start is None:
        b, _ = maurey_factorization(inst, est)
        d = construct_d_from_a(inst, b)
        start = safe_divide(d * inst.sigma, inst.lam_active * inst.omega)
    x = np.log(np.asarray(start, dtype=float)[idx])
    x -= x.mean()
    cur = _log_bound(inst, idx, x)
    first = cur
    done = 0
    for done in range(1, sweeps + 1):
        before = cur
        for j in range(idx.size):
            def f(t, j=j):
                y = x.copy()
                y[j] = t
                return _log_bound(inst, idx, y)

            res = minimize_scalar(f, bounds=(x[j] - 4.0, x[j] + 4.0), method="bounded", options={"xatol": 1e-6})
            if res.fun < cur:
                x[j], cur = res.x, res.fun
        if before - cur <= tol:
            break
    a = np.zeros(inst.tree.n_nodes)
    a[idx] = np.exp(x)
    return SandwichResult(est.value, math.exp(cur), a, done, math.exp(first))


# ---------------------------------------------------------------------------
# factorizations of individual conditions

def condition_factorization_d2(inst: Instance, d, e_fam) -> tuple[float, float]:
    """D2(d) against the product bound over an auxiliary family e."""
    ex = inst.exponents
    d = _positive_on_active(inst, d, "d")
    e_fam = _positive_on_active(inst, e_fam, "e")
    lhs = quantities_D(inst, d)[1]
    s = float(np.sum(inst.lam_active * _pow(_inv(inst, e_fam), ex.p_conj) * inst.omega * _pow(d, ex.p_conj - 1.0)))
    sup_int = _sup_integral(inst, e_fam, ex.omega_exponent)
    rhs = s ** (ex.p - 1.0) * sup_int ** (ex.p * (1.0 - ex.q) / ex.q)
    return lhs, rhs


def condition_factorization_a1(inst: Instance, a, b) -> tuple[float, float]:
    """A1(a^{-1}) against the Carleson-times-sum bound over a family b."""
    ex = inst.exponents
    a = _positive_on_active(inst, a, "a")
    b = _positive_on_active(inst, b, "b")
    lhs = quantities_A(inst, a)[0]
    carl = _carleson(inst, inst.lam_active * _inv(inst, b) * inst.omega, inst.sigma)
    s = float(np.sum(inst.lam_active * _pow(_inv(inst, a), ex.p_conj) * _pow(b, ex.p_conj - 1.0) * inst.omega))
    return lhs, carl ** (1.0 / ex.p) * s ** (1.0 / ex.p_conj)


def _local_a_inv(inst: Instance, a: np.ndarray) -> np.ndarray:
    """(1/sigma(Q)) sum_{R <= Q} lambda_R a_R^{-1} omega(R)."""
    return safe_divide(inst.tree.descendant_sums(inst.lam_active * _inv(inst, a) * inst.omega), inst.sigma)


def condition_factorization_a1_alt(inst: Instance, a, c) -> tuple[float, float]:
    """A1(a^{-1}) against sup_Q (a_Q/c_Q) M_Q to the 1/p times sum to the 1/p'.

    M_Q is the sigma-normalized local sum of lambda a^{-1} omega.  The outer
    exponents (1/p, 1/p') are the ones forced by homogeneity in a.
    """
    ex = inst.exponents
    a = _positive_on_active(inst, a, "a")
    c = _positive_on_active(inst, c, "c")
    lhs = quantities_A(inst, a)[0]
    M = _local_a_inv(inst, a)
    sup = float(np.max((a * M * _inv(inst, c))[inst.active], initial=0.0))
    s = float(np.sum(inst.lam_active * _pow(_inv(inst, a), ex.p_conj) * _pow(c, ex.p_conj - 1.0) * inst.omega))
    return lhs, sup ** (1.0 / ex.p) * s ** (1.0 / ex.p_conj)


def witness_factorization_d2(inst: Instance, d) -> np.ndarray:
    """e = the a-from-d construction, which reverses the D2 factorization."""
    return construct_a_from_d(inst, d)


def witness_factorization_a1(inst: Instance, a) -> np.ndarray:
    """b = the d-from-a construction, which reverses the A1 factorization."""
    return construct_d_from_a(inst, a)


def witness_factorization_a1_alt(inst: Instance, a) -> np.ndarray:
    """c_Q = a_Q M_Q, which makes the supremum factor equal to one."""
    a = _positive_on_active(inst, a, "a")
    return np.where(inst.active, a * _local_a_inv(inst, a), 0.0)


# ---------------------------------------------------------------------------
# constructions from Wolff-type potentials

def inverse_local_mean(inst: Instance, gamma: float) -> np.ndarray:
    """(Lambda_{gamma-1,Q})^{1-gamma} = 1 / <rho_Q^{gamma-1}>^omega_Q (1 at gamma = 1)."""
    if gamma == 1:
        return np.where(inst.omega > 0, 1.0, 0.0)
    lg = lambda_gamma_all(inst, gamma - 1.0)
    return _pow(lg, 1.0 - gamma)


@dataclass
class WolffConstruction:
    variant: str
    families: dict
    conditions: dict
    bound_constant: float


def sufficiency_construction_wolff(inst: Instance, gamma: float = 1.0, variant: str = "wolff") -> WolffConstruction:
    """Explicit auxiliary families certifying the Wolff-type sufficient conditions.

    ``variant="wolff_variant"`` builds d from gamma-averages and reports the
    Carleson-type supremum (bounded by max(1, 1/gamma)) and the integral.
    ``variant="wolff"`` builds (a, c) from the classical potential and
    reports the three factorized conditions.
    """
    ex = inst.exponents
    if ex.p == 1:
        raise ValueError("needs p > 1")
    act = inst.active
    pc = ex.p_conj
    tree = inst.tree
    if variant == "wolff_variant":
        if not gamma > 0:
            raise ValueError("gamma must be positive")
        lg = lambda_gamma_all(inst, gamma)
        env = tree.ancestor_max(np.where(act, inst.density_ratio * _pow(lg, gamma), 0.0))
        d = np.where(act, inverse_local_mean(inst, gamma) * env, 0.0)
        D1 = _carleson(inst, inst.lam_active * _inv(inst, d) * inst.omega, inst.sigma)
        pot = tree.path_sums(inst.lam_active * _pow(d, pc - 1.0))
        integral = float(np.dot(_pow(pot, ex.wolff_exponent), inst.omega_leaves))
        return WolffConstruction(
            variant, {"d": d}, {"carleson": D1, "integral": integral}, max(1.0, 1.0 / gamma)
        )
    if variant != "wolff":
        raise ValueError(f"unknown variant {variant!r}")
    l1 = lambda_gamma_all(inst, 1.0)
    terms = inst.lam_active * _pow(inst.density_ratio * l1, pc - 1.0)
    a = np.where(act, _pow(tree.ancestor_sums(terms), (ex.p - 1.0) * (1.0 - ex.q) / (ex.p - ex.q)), 0.0)
    c = np.where(act, inst.density_ratio * l1, 0.0)
    M = _local_a_inv(inst, a)
    ca = float(np.max((a * M * _inv(inst, c))[act], initial=0.0))
    cb = float(np.sum(inst.lam_active * _pow(_inv(inst, a), pc) * _pow(c, pc - 1.0) * inst.omega))
    cc = _sup_integral(inst, a, ex.omega_exponent)
    return WolffConstruction(variant, {"a": a, "c": c}, {"ca": ca, "cb": cb, "cc": cc}, 1.0)


# ---------------------------------------------------------------------------
# condition systems

SYSTEMS = ("i", "ii", "iii", "iv", "v")


def condition_system_check(inst: Instance, system: str, a, b=None) -> tuple[float, ...]:
    """Raw values (no outer powers) of the conditions of one equivalent system.

    (i)   a: A1-integral, A2-integral
    (ii)  a, b: Carleson sum of b^{-1}, sum lambda a^{-p'} b^{p'-1} omega, A2-integral
    (iii) a: Carleson sum of a^{-1}, D2-integral
    (iv)  a, b: Carleson sum of a^{-1}, sum lambda b^{-p'} omega a^{p'-1}, A2-integral of b
    (v)   a, b: sup (a/b) M, sum lambda a^{-p'} b^{p'-1} omega, A2-integral
    Systems (i) and (v) are reconstructed from the A1 condition and the
    second A1 factorization.
    """
    ex = inst.exponents
    if ex.p == 1:
        raise ValueError("needs p > 1")
    if system not in SYSTEMS:
        raise ValueError(f"unknown system {system!r}")
    if not inst.active.any():
        return (0.0, 0.0) if system in ("i", "iii") else (0.0, 0.0, 0.0)
    pc = ex.p_conj
    lam, om = inst.lam_active, inst.omega
    a = _positive_on_active(inst, a, "a")
    if system in ("ii", "iv", "v"):
        if b is None:
            raise ValueError(f"system ({system}) needs two families")
        b = _positive_on_active(inst, b, "b")
    if system == "i":
        A1, _ = quantities_A(inst, a)
        return A1**pc, _sup_integral(inst, a, ex.omega_exponent)
    if system == "ii":
        carl = _carleson(inst, lam * _inv(inst, b) * om, inst.sigma)
        s = float(np.sum(lam * _pow(_inv(inst, a), pc) * _pow(b, pc - 1.0) * om))
        return carl, s, _sup_integral(inst, a, ex.omega_exponent)
    if system == "iii":
        D1, D2 = quantities_D(inst, a)
        return D1, D2 ** (ex.q / (ex.p - ex.q))
    if system == "iv":
        carl = _carleson(inst, lam * _inv(inst, a) * om, inst.sigma)
        s = float(np.sum(lam * _pow(_inv(inst, b), pc) * om * _pow(a, pc - 1.0)))
        return carl, s, _sup_integral(inst, b, ex.omega_exponent)
    M = _local_a_inv(inst, a)
    sup = float(np.max((a * M * _inv(inst, b))[inst.active], initial=0.0))
    s = float(np.sum(lam * _pow(_inv(inst, a), pc) * _pow(b, pc - 1.0) * om))
    return sup, s, _sup_integral(inst, a, ex.omega_exponent)


# ---------------------------------------------------------------------------
# report

@dataclass
class CharacterizationReport:
    A1: float
    A2: float
    D1: float
    D2: float
    upper_bound: float
    factorization_bound: float
    norm_value: float
    norm_upper: float
    wolff_condition_gamma1: float
    sandwich_ratio_low: float
    sandwich_ratio_high: float

    def to_dict(self) -> dict:
        return asdict(self)


def characterize(inst: Instance, sweeps: int = 50, cfg: SolverConfig | None = None) -> CharacterizationReport:
    """All characterization quantities for the families built from a maximizer."""
    from .wolff import wolff_condition_value

    est = estimate_norm(inst, cfg)
    if not inst.active.any():
        return CharacterizationReport(*([0.0] * 9), math.nan, math.nan)
    b, c = maurey_factorization(inst, est)
    A1, A2 = quantities_A(inst, b)
    d = construct_d_from_a(inst, b)
    D1, D2 = quantities_D(inst, d) if inst.exponents.p > 1 else (math.nan, math.nan)
    fact = factorization_bound(inst, b, c)
    if inst.exponents.p > 1:
        sw = minimize_auxiliary_bound(inst, sweeps=sweeps, est=est)
        upper = sw.bound
        wolff = wolff_condition_value(inst, 1.0)
    else:
        upper, wolff = math.nan, math.nan
    n = est.value
    ratios = [x / n for x in (upper, fact) if x == x]
    return CharacterizationReport(
        A1, A2, D1, D2, upper, fact, n, est.upper_bound, wolff, min(ratios), max(ratios),
    )
