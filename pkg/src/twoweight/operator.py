"""The positive dyadic operator f -> sum_Q lambda_Q <f>^sigma_Q 1_Q and its norm."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .lpspaces import lp_norm
from .tree import Instance, safe_divide
from .wolff import lambda_gamma_all


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 20_000
    tol: float = 1e-10
    restarts: int = 3
    seed: int = 0


def apply_T(inst: Instance, f: np.ndarray) -> np.ndarray:
    """Leaf values of T(f sigma), summing over active cubes only."""
    tree = inst.tree
    f = np.asarray(f, dtype=float)
    avg = safe_divide(tree.node_sums(f * inst.sigma_leaves), inst.sigma)
    return tree.path_sums(inst.lam_active * avg)


def apply_T_adjoint(inst: Instance, g: np.ndarray) -> np.ndarray:
    """Leaf values of sigma-density of the adjoint: sum_Q lambda_Q <g>^omega... scaled.

    Returns ``h`` with ``sum_x (Tf)(x) g(x) omega(x) = sum_y f(y) h(y) sigma(y)``.
    """
    tree = inst.tree
    coeff = safe_divide(inst.lam_active * tree.node_sums(np.asarray(g, float) * inst.omega_leaves), inst.sigma)
    return tree.path_sums(coeff)


def maximal_function(inst: Instance, f: np.ndarray) -> np.ndarray:
    """Dyadic maximal function of ``f`` relative to sigma (cubes with sigma(Q) > 0)."""
    tree = inst.tree
    f = np.asarray(f, dtype=float)
    avg = safe_divide(tree.node_sums(f * inst.sigma_leaves), inst.sigma)
    avg = np.where(inst.sigma > 0, avg, -np.inf)
    out = tree.path_max(avg)
    return np.where(np.isfinite(out), out, 0.0)


def lp_leaf_norm(f: np.ndarray, mu: np.ndarray, p: float) -> float:
    f = np.abs(np.asarray(f, dtype=float))
    if p == math.inf:
        charged = mu > 0
        return float(f[charged].max(initial=0.0))
    vals = np.zeros_like(f)
    np.power(f, p, out=vals, where=f > 0)
    return float(np.dot(vals, mu)) ** (1.0 / p)


@dataclass
class NormEstimate:
    value: float
    maximizer: np.ndarray
    iterations: int
    stationarity_residual: float
    upper_bound: float
    converged: bool = True
    oracle_value: float | None = None

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "upper_bound": self.upper_bound,
            "iterations": self.iterations,
            "stationarity_residual": self.stationarity_residual,
            "converged": self.converged,
            "maximizer": self.maximizer.tolist(),
        }


def objective(inst: Instance, f: np.ndarray) -> float:
    """F(f) = integral of (T f)^q against omega."""
    Tf = apply_T(inst, f)
    vals = np.zeros_like(Tf)
    np.power(Tf, inst.exponents.q, out=vals, where=Tf > 0)
    return float(np.dot(vals, inst.omega_leaves))


def _gradient(inst: Instance, Tf: np.ndarray) -> np.ndarray:
    """dF/df(y) divided by sigma(y): q * T^*[(Tf)^{q-1}] (finite where Tf > 0)."""
    q = inst.exponents.q
    w = np.zeros_like(Tf)
    np.power(Tf, q - 1.0, out=w, where=Tf > 0)
    return q * apply_T_adjoint(inst, w)


def _dual_norm(h: np.ndarray, sigma: np.ndarray, p: float) -> float:
    if p == 1:
        return lp_leaf_norm(h, sigma, math.inf)
    return lp_leaf_norm(h, sigma, p / (p - 1.0))


def _ascend(inst: Instance, f: np.ndarray, var: np.ndarray, cfg: SolverConfig):
    """Multiplicative fixed-point ascent on the unit sphere of L^p(sigma).

    With ``h = dF/df / sigma`` the update is ``f <- f * (h / f^{p-1})^theta``
    followed by renormalization; a fixed point satisfies the KKT conditions.
    The step ``theta`` grows after successful moves and is halved otherwise.
    """
    p, q = inst.exponents.p, inst.exponents.q
    sig = inst.sigma_leaves

    def normalize(v):
        return v / lp_leaf_norm(v, sig, p)

    f = normalize(f)
    F = objective(inst, f)
    theta = 1.0 / (p - q)
    it = 0
    resid = math.inf
    for it in range(1, cfg.max_iter + 1):
        Tf = apply_T(inst, f)
        h = _gradient(inst, Tf)
        upper = (1.0 - q) * F + _dual_norm(np.where(var, h, 0.0), sig, p)
        resid = (upper - F) / F if F > 0 else math.inf
        if resid <= cfg.tol:
            break
        ratio = np.ones_like(f)
        base = f[var] ** (p - 1.0) if p > 1 else 1.0
        ratio[var] = h[var] / base
        ratio[var] /= np.exp(np.mean(np.log(ratio[var])))
        while True:
            cand = np.where(var, f * ratio**theta, 0.0)
            cand = normalize(cand)
            Fc = objective(inst, cand)
            if Fc > F:
                f, F = cand, Fc
                theta = min(theta * 1.5, 64.0 / (p - q + 1e-300))
                break
            theta *= 0.5
            if theta < 1e-14:
                return f, F, it, resid
    return f, F, it, resid


def estimate_norm(inst: Instance, cfg: SolverConfig | None = None) -> NormEstimate:
    """Operator norm from L^p(sigma) to L^q(omega), 0 < q < 1 <= p.

    The objective F is concave and the feasible set convex, so the
    Frank-Wolfe gap ``(1 - q) F + ||dF/(sigma df)||_{L^{p'}(sigma)}``
    certifies an upper bound for the maximal value at every iterate.
    """
    cfg = cfg or SolverConfig()
    tree = inst.tree
    p, q = inst.exponents.p, inst.exponents.q
    var = inst.covered_leaves & (inst.sigma_leaves > 0)
    if not var.any():
        return NormEstimate(0.0, np.zeros(tree.n_leaves), 0, 0.0, 0.0)
    rng = np.random.default_rng(cfg.seed)
    best = None
    total_iter = 0
    for start in range(max(cfg.restarts, 1)):
        f0 = np.where(var, 1.0 if start == 0 else rng.uniform(0.05, 1.0, tree.n_leaves), 0.0)
        f, F, it, resid = _ascend(inst, f0, var, cfg)
        total_iter += it
        if best is None or F > best[1]:
            best = (f, F, resid)
        if resid <= cfg.tol:
            break
    f, F, resid = best
    h = _gradient(inst, apply_T(inst, f))
    upper = (1.0 - q) * F + _dual_norm(np.where(var, h, 0.0), inst.sigma_leaves, p)
    resid = (upper - F) / F
    converged = resid <= max(cfg.tol, 1e-6)
    if not converged:
        warnings.warn(f"norm estimate not converged (gap {resid:.2e})", ConvergenceWarning, stacklevel=2)
    return NormEstimate(F ** (1.0 / q), f, total_iter, resid, upper ** (1.0 / q), converged)


def norm_of(inst: Instance, f: np.ndarray) -> float:
    """||T(f sigma)||_{L^q(omega)} / ||f||_{L^p(sigma)}."""
    den = lp_leaf_norm(f, inst.sigma_leaves, inst.exponents.p)
    if den == 0:
        return 0.0
    return objective(inst, f) ** (1.0 / inst.exponents.q) / den


# ---------------------------------------------------------------------------
# multiplier reformulations

def transform_b_to_a(tree, b) -> np.ndarray:
    """a_Q = sum over ancestors R of Q (Q included) of b_R."""
    return tree.ancestor_sums(np.asarray(b, dtype=float))


def transform_a_to_b(tree, a) -> np.ndarray:
    """Increments of the ancestor envelope: b_Q = env(Q) - env(parent Q).

    ``env(Q) = sup_{S >= Q} a_S`` and the root increment is ``env(root)``.
    Then sum_Q b_Q 1_Q equals sup_Q a_Q 1_Q at every leaf.
    """
    env = tree.ancestor_max(np.asarray(a, dtype=float))
    b = env.copy()
    for k in range(1, tree.depth + 1):
        b[tree.level_slice(k)] -= np.repeat(env[tree.level_slice(k - 1)], tree.branching)
    return b


def domination_sides(inst: Instance, a=None, b=None):
    """Leafwise sides of the two domination relations.

    Returns ``(sum rho_Q b_Q 1_Q, sum lambda_Q a_Q 1_Q, sum b_Q 1_Q, sup a_Q 1_Q)``.
    """
    tree = inst.tree
    if a is None:
        a = transform_b_to_a(tree, b)
    if b is None:
        b = transform_a_to_b(tree, a)
    lam = inst.lam
    rho_b = _sum_rho_b(tree, lam, b)
    return rho_b, tree.path_sums(lam * a), tree.path_sums(b), tree.path_max(a)


def _sum_rho_b(tree, lam, b) -> np.ndarray:
    """sum_Q b_Q rho_Q evaluated directly through the localized sums."""
    out = np.zeros(tree.n_leaves)
    for k, rho in tree.localized_levels(lam):
        bk = np.asarray(b, dtype=float)[tree.level_slice(k)]
        out += (rho * bk[:, None]).reshape(-1)
    return out


@dataclass
class MultiplierEstimate:
    value: float
    family: np.ndarray
    iterations: int
    gap: float
    upper_bound: float = math.nan


def multiplier_norm_sup(inst: Instance, cfg: SolverConfig | None = None) -> MultiplierEstimate:
    """sup over a >= 0 of ||sum lambda_Q a_Q 1_Q||_{L^q(omega)} / ||sup a_Q 1_Q||_{L^p(sigma)}.

    Parametrized by increments b >= 0 (a = ancestor sums of b) the numerator
    is a concave function of b and the denominator a convex one, so the same
    multiplicative ascent as for the operator norm applies.
    """
    cfg = cfg or SolverConfig()
    tree = inst.tree
    p, q = inst.exponents.p, inst.exponents.q
    lam = inst.lam_active
    var = (inst.sigma > 0) & (tree.descendant_sums(inst.active.astype(float)) > 0)
    if not var.any():
        return MultiplierEstimate(0.0, np.zeros(tree.n_nodes), 0, 0.0, 0.0)
    sig, om = inst.sigma_leaves, inst.omega_leaves

    def parts(b):
        u = tree.path_sums(lam * tree.ancestor_sums(b))
        H = tree.path_sums(b)
        return u, H

    def value(b):
        u, H = parts(b)
        G = float(np.dot(np.where(u > 0, u, 0.0) ** q, om))
        D = lp_leaf_norm(H, sig, p)
        return G, D

    def normalize(b):
        return b / value(b)[1]

    rng = np.random.default_rng(cfg.seed)
    best = None
    total = 0
    for start in range(max(cfg.restarts, 1)):
        b = np.where(var, 1.0 if start == 0 else rng.uniform(0.05, 1.0, tree.n_nodes), 0.0)
        b = normalize(b)
        G, _ = value(b)
        theta = 1.0 / (p - q)
        spread = math.inf
        for it in range(1, cfg.max_iter + 1):
            u, H = parts(b)
            w = np.zeros_like(u)
            np.power(u, q - 1.0, out=w, where=u > 0)
            dG = q * tree.descendant_sums(lam * tree.node_sums(w * om))
            hp = np.ones_like(H) if p == 1 else np.where(H > 0, H, 0.0) ** (p - 1.0)
            dD = p * tree.node_sums(hp * sig)
            ratio = np.ones(tree.n_nodes)
            ratio[var] = dG[var] / dD[var]
            # any b' with ||sum b' 1_Q||_p <= 1 has <dG, b'> <= p max(ratio)
            upper = (1.0 - q) * G + p * float(ratio[var].max())
            spread = (upper - G) / G
            if spread <= cfg.tol:
                break
            ratio[var] /= np.exp(np.mean(np.log(ratio[var])))
            moved = False
            while theta > 1e-14:
                cand = normalize(np.where(var, b * ratio**theta, 0.0))
                Gc, _ = value(cand)
                if Gc > G:
                    b, G, moved = cand, Gc, True
                    theta = min(theta * 1.5, 64.0)
                    break
                theta *= 0.5
            if not moved:
                break
        total += it
        if best is None or G > best[1]:
            best = (b, G, spread)
    b, G, spread = best
    upper = G * (1.0 + spread)
    return MultiplierEstimate(G ** (1.0 / q), transform_b_to_a(tree, b), total, spread, upper ** (1.0 / q))


def multiplier_ratio(inst: Instance, a: np.ndarray) -> float:
    """The multiplier ratio for one family ``a`` (indexation over active cubes)."""
    tree = inst.tree
    a = np.where(inst.active, np.asarray(a, dtype=float), 0.0)
    num = lp_leaf_norm(tree.path_sums(inst.lam * a), inst.omega_leaves, inst.exponents.q)
    den = lp_leaf_norm(tree.path_max(a), inst.sigma_leaves, inst.exponents.p)
    return 0.0 if den == 0 else num / den


# ---------------------------------------------------------------------------
# dual multiplier, sufficient condition, Stein-type necessity

@dataclass
class DualMultiplierCheck:
    lhs: float
    rhs: float
    sufficient_quantity: float


def dual_multiplier_check(inst: Instance, b) -> DualMultiplierCheck:
    """Both sides of the dual multiplier estimate and the sufficient integral.

    lhs = ||{lambda^q omega/sigma b}||_{f^{p/(p-q),1}(sigma)},
    rhs = ||b||_{f^{inf,1/(1-q)}(omega)}, and the sufficient quantity is
    the integral of (sum lambda^q omega/sigma 1_Q)^{p/(p-q)} against sigma.
    """
    tree = inst.tree
    p, q = inst.exponents.p, inst.exponents.q
    act = inst.active
    b = np.where(act, np.asarray(b, dtype=float), 0.0)
    mult = inst.lam_active**q * inst.density_ratio
    r3 = p / (p - q)
    lhs = lp_norm(tree, mult * b, r3, 1.0, inst.sigma_leaves, act)
    rhs = lp_norm(tree, b, math.inf, 1.0 / (1.0 - q), inst.omega_leaves, act)
    dens = tree.path_sums(mult)
    suff = float(np.dot(dens**r3, inst.sigma_leaves))
    return DualMultiplierCheck(lhs, rhs, suff)


def stein_necessity_check(inst: Instance, gamma: float, a) -> tuple[float, float]:
    """(||sum Lambda_{gamma,Q} a_Q 1_Q||_{L^q(omega)}, ||sum a_Q 1_Q||_{L^p(sigma)})."""
    q = inst.exponents.q
    if not 0 < gamma < q:
        raise ValueError("gamma must lie in (0, q)")
    tree = inst.tree
    a = np.where(inst.active, np.asarray(a, dtype=float), 0.0)
    lg = lambda_gamma_all(inst, gamma)
    lhs = lp_leaf_norm(tree.path_sums(lg * a), inst.omega_leaves, q)
    rhs = lp_leaf_norm(tree.path_sums(a), inst.sigma_leaves, inst.exponents.p)
    return lhs, rhs
