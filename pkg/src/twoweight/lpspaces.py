"""Discrete Littlewood-Paley sequence norms on a finite tree.

A family ``a`` is a node array.  Integrals against a leaf measure are exact
leaf sums.  ``support`` restricts the indexation of every sum and supremum;
by default all nodes take part (zero entries are harmless except for
negative inner exponents).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .tree import DyadicTree, MeasurePair, safe_divide

INF = math.inf


class NormWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FNormSpec:
    """Outer exponent ``r`` in (0, inf], inner exponent ``s`` nonzero or inf."""

    r: float
    s: float
    measure: str = "omega"

    def __post_init__(self):
        if not (self.r > 0):
            raise ValueError(f"outer exponent must be positive, got {self.r}")
        if self.s == 0 or math.isnan(self.s) or self.s == -INF:
            raise ValueError(f"inner exponent must be nonzero real or inf, got {self.s}")
        if self.measure not in ("sigma", "omega"):
            raise ValueError("measure must be 'sigma' or 'omega'")

    @property
    def regime(self) -> str:
        outer = "inf" if self.r == INF else "finite"
        inner = "inf" if self.s == INF else "finite"
        return f"{outer}-{inner}"


def _support(tree: DyadicTree, support) -> np.ndarray:
    if support is None:
        return np.ones(tree.n_nodes, dtype=bool)
    return np.asarray(support, dtype=bool)


def lp_norm(
    tree: DyadicTree,
    a: np.ndarray,
    r: float,
    s: float,
    mu_leaves: np.ndarray,
    support=None,
) -> float:
    """Norm of ``a`` in f^{r,s}(mu) with ``mu`` given by its leaf masses."""
    FNormSpec(r, s)
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise ValueError("families must be nonnegative")
    mu_leaves = np.asarray(mu_leaves, dtype=float)
    sup = _support(tree, support)
    mu_nodes = tree.node_sums(mu_leaves)

    if s < 0:
        # only cubes that carry mass can make a zero entry matter
        bad = sup & (a == 0) & (mu_nodes > 0)
        if bad.any():
            warnings.warn(
                f"{int(bad.sum())} zero coefficients raised to negative power {s}",
                NormWarning,
                stacklevel=2,
            )
            return INF

    if s == INF:
        vals = np.where(sup, a, 0.0)
        if r == INF:
            return float(vals.max(initial=0.0))
        env = tree.path_max(vals)
        return float(np.dot(env**r, mu_leaves) ** (1.0 / r))

    powered = np.zeros(tree.n_nodes)
    np.power(a, s, out=powered, where=sup & (a > 0))
    if r == INF:
        inner = tree.descendant_sums(powered * mu_nodes)
        ratio = safe_divide(inner, mu_nodes)
        vals = ratio[sup & (mu_nodes > 0)]
        if vals.size == 0:
            return 0.0
        if s > 0:
            return float(vals.max() ** (1.0 / s))
        return float(vals.min() ** (1.0 / s))

    inner = tree.path_sums(powered)
    charged = mu_leaves > 0
    integrand = np.zeros_like(inner)
    pos = charged & (inner > 0)
    integrand[pos] = inner[pos] ** (r / s)
    if s < 0 and np.any(charged & (inner == 0)):
        return INF
    total = float(np.dot(integrand, mu_leaves))
    return total ** (1.0 / r)


def f_norm(a, spec: FNormSpec, m: MeasurePair, support=None) -> float:
    return lp_norm(m.tree, a, spec.r, spec.s, m.leaves(spec.measure), support)


def f_norm_scaling_check(a, r: float, s: float, t: float, m: MeasurePair, measure="omega", support=None) -> float:
    """``||a^t||_{f^{r,s}} / ||a||_{f^{tr,ts}}^t``, equal to one."""
    if not t > 0:
        raise ValueError("t must be positive")
    a = np.asarray(a, dtype=float)
    mu = m.leaves(measure)
    lhs = lp_norm(m.tree, a**t, r, s, mu, support)
    rhs = lp_norm(m.tree, a, t * r, t * s, mu, support) ** t
    if lhs == rhs:
        return 1.0
    return lhs / rhs


def conjugate(x: float) -> float:
    if x == 1:
        return INF
    if x == INF:
        return 1.0
    return x / (x - 1.0)


# ---------------------------------------------------------------------------
# duality

def _norm_and_subgradient(tree, b, r, s, mu_leaves, mu_nodes, sup):
    """Value of ||b||_{f^{r,s}} and one subgradient, for r, s >= 1."""
    grad = np.zeros(tree.n_nodes)
    b = np.where(sup, b, 0.0)
    if s == INF and r == INF:
        k = int(np.argmax(b))
        grad[k] = 1.0
        return float(b[k]), grad
    if s == INF:
        anc = tree.ancestor_max(b)
        leaves = anc[tree.level_slice(tree.depth)]
        norm = float(np.dot(leaves**r, mu_leaves)) ** (1.0 / r)
        if norm == 0:
            return 0.0, grad
        # each leaf charges the shallowest node attaining its envelope
        arg = _path_argmax(tree, b)
        np.add.at(grad, arg, norm ** (1 - r) * leaves ** (r - 1) * mu_leaves)
        return norm, grad
    if r == INF:
        inner = safe_divide(tree.descendant_sums(b**s * mu_nodes), mu_nodes)
        inner = np.where(sup & (mu_nodes > 0), inner, -1.0)
        k = int(np.argmax(inner))
        val = max(inner[k], 0.0)
        norm = val ** (1.0 / s)
        if norm == 0:
            return 0.0, grad
        below = _subtree_mask(tree, k)
        grad[below] = norm ** (1 - s) * b[below] ** (s - 1) * mu_nodes[below] / mu_nodes[k]
        return norm, grad
    inner = tree.path_sums(b**s)
    norm = float(np.dot(inner ** (r / s), mu_leaves)) ** (1.0 / r)
    if norm == 0:
        return 0.0, grad
    w = np.zeros_like(inner)
    np.power(inner, r / s - 1.0, out=w, where=inner > 0)
    grad = norm ** (1 - r) * b ** (s - 1) * tree.node_sums(w * mu_leaves)
    return norm, np.where(sup, grad, 0.0)


def _path_argmax(tree: DyadicTree, v: np.ndarray) -> np.ndarray:
    """Per leaf, the shallowest node on its path attaining the path maximum."""
    best = np.full(1, v[0])
    arg = np.zeros(1, dtype=np.int64)
    for k in range(1, tree.depth + 1):
        best = np.repeat(best, tree.branching)
        arg = np.repeat(arg, tree.branching)
        cur = v[tree.level_slice(k)]
        better = cur > best
        best = np.where(better, cur, best)
        arg = np.where(better, tree.offset(k) + np.arange(cur.size), arg)
    return arg


def _subtree_mask(tree: DyadicTree, node: int) -> np.ndarray:
    mask = np.zeros(tree.n_nodes, dtype=bool)
    k, pos = tree.level_and_position(node)
    for j in range(k, tree.depth + 1):
        width = tree.branching ** (j - k)
        start = tree.offset(j) + pos * width
        mask[start : start + width] = True
    return mask


@dataclass
class DualResult:
    value: float
    maximizer: np.ndarray
    iterations: int
    converged: bool


def f_norm_dual(
    a,
    r: float,
    s: float,
    m: MeasurePair,
    measure: str = "omega",
    support=None,
    restarts: int = 8,
    max_iter: int = 10_000,
    tol: float = 1e-9,
    seed: int = 0,
) -> DualResult:
    """sup of sum_Q a_Q b_Q mu(Q) over b >= 0 with ||b||_{f^{r',s'}(mu)} <= 1.

    Projected subgradient ascent on the ratio ``<a, b>_mu / ||b||`` with step
    halving, restarted from the uniform family and ``restarts - 1`` random
    ones.  The best value over all starts is returned.
    """
    if not (r >= 1 and s >= 1):
        raise ValueError("duality needs r, s in [1, inf]")
    tree = m.tree
    a = np.asarray(a, dtype=float)
    mu_leaves = m.leaves(measure)
    mu_nodes = tree.node_sums(mu_leaves)
    sup = _support(tree, support) & (mu_nodes > 0)
    weights = np.where(sup, a * mu_nodes, 0.0)
    if not np.any(weights > 0):
        return DualResult(0.0, np.zeros(tree.n_nodes), 0, True)
    rc, sc = conjugate(r), conjugate(s)
    rng = np.random.default_rng(seed)

    def ratio(b):
        n, g = _norm_and_subgradient(tree, b, rc, sc, mu_leaves, mu_nodes, sup)
        if n == 0:
            return 0.0, np.zeros_like(b), n
        lin = float(np.dot(weights, b))
        return lin / n, (weights - lin / n * g) / n, n

    best_val, best_b, total_iter, converged = -1.0, None, 0, False
    for start in range(restarts):
        b = np.where(sup, 1.0 if start == 0 else rng.uniform(0.1, 1.0, tree.n_nodes), 0.0)
        if start == 1:
            b = np.where(sup, weights, 0.0)
        val, grad, n = ratio(b)
        b = b / n
        val, grad, _ = ratio(b)
        step = 0.5
        for it in range(max_iter):
            gnorm = np.linalg.norm(grad)
            if gnorm == 0:
                converged = True
                break
            cand = np.maximum(b + step * grad / gnorm * np.linalg.norm(b), 0.0)
            cand = np.where(sup, cand, 0.0)
            cval, cgrad, cn = ratio(cand)
            if cn > 0 and cval > val:
                gain = cval - val
                b, val, grad = cand / cn, cval, cgrad
                step = min(step * 1.5, 1.0)
                if gain <= tol * abs(val):
                    converged = True
                    break
            else:
                step *= 0.5
                if step < 1e-12:
                    converged = True
                    break
        total_iter += it + 1
        if val > best_val:
            best_val, best_b = val, b
    if not converged:
        warnings.warn("dual optimizer hit the iteration cap", NormWarning, stacklevel=2)
    return DualResult(best_val, best_b, total_iter, converged)


# ---------------------------------------------------------------------------
# factorization

@dataclass
class Factorization:
    a: np.ndarray
    b: np.ndarray
    constant: float
    refined: bool = False
    norms: tuple = field(default=(0.0, 0.0, 0.0))


def _check_holder(x, x1, x2, name):
    inv = lambda t: 0.0 if t == INF else 1.0 / t
    if not math.isclose(inv(x), inv(x1) + inv(x2), rel_tol=1e-12, abs_tol=1e-15):
        raise ValueError(f"Hoelder relation violated for {name}: 1/{x} != 1/{x1} + 1/{x2}")


def core_split(tree: DyadicTree, c: np.ndarray, r: float, s: float, mu_leaves: np.ndarray):
    """Split ``c = A * B`` with ``A`` in f^{r,inf} and ``B`` in f^{inf,s}.

    With ``G_Q`` the localized sum of ``c^s`` on ``Q`` and
    ``g = min(1, r/(2s))`` (``g = 1`` when ``r = inf``)::

        A_Q = (sup_{R >= Q} <G_R^g>_R / <G_Q^(g-1)>_Q)^(1/s),   B = c / A.

    Then ||B||_{f^{inf,s}} <= g^(-1/s) and ||A||_{f^{r,inf}} is controlled by
    the maximal function of G^g.
    """
    c = np.asarray(c, dtype=float)
    pos = c > 0
    if s == INF:
        return c.copy(), pos.astype(float)
    g = 1.0 if r == INF else min(1.0, r / (2.0 * s))
    mu_nodes = tree.node_sums(mu_leaves)
    cs = np.where(pos, c, 0.0) ** s
    mean_g = np.zeros(tree.n_nodes)
    mean_gm1 = np.zeros(tree.n_nodes)
    for k, rho in tree.localized_levels(cs):
        mu = mu_leaves.reshape(rho.shape)
        sl = tree.level_slice(k)
        mean_g[sl] = safe_divide((rho**g * mu).sum(axis=1), mu_nodes[sl])
        with np.errstate(divide="ignore"):
            neg = np.where(rho > 0, rho, np.inf) ** (g - 1.0)
        mean_gm1[sl] = safe_divide((neg * mu).sum(axis=1), mu_nodes[sl])
    env = tree.ancestor_max(mean_g)
    A = np.zeros(tree.n_nodes)
    ok = pos & (mean_gm1 > 0)
    A[ok] = (env[ok] / mean_gm1[ok]) ** (1.0 / s)
    # cubes of zero measure: any positive split works
    A[pos & ~ok] = c[pos & ~ok]
    B = safe_divide(c, A)
    return A, B


def _power_split(x: np.ndarray, theta: float) -> np.ndarray:
    out = np.zeros_like(x)
    np.power(x, theta, out=out, where=x > 0)
    return out


def f_factorize(
    c,
    rs: tuple[float, float],
    rs1: tuple[float, float],
    rs2: tuple[float, float],
    m: MeasurePair,
    measure: str = "omega",
    max_constant: float = 100.0,
) -> Factorization:
    """Factor ``c = a * b`` with ``a`` in f^{r1,s1} and ``b`` in f^{r2,s2}."""
    (r, s), (r1, s1), (r2, s2) = rs, rs1, rs2
    _check_holder(r, r1, r2, "outer exponents")
    _check_holder(s, s1, s2, "inner exponents")
    for x in (r, r1, r2, s, s1, s2):
        if not x > 0:
            raise ValueError("exponents must be positive")
    tree = m.tree
    mu = m.leaves(measure)
    c = np.asarray(c, dtype=float)
    if np.any(c < 0):
        raise ValueError("c must be nonnegative")
    A, B = core_split(tree, c, r, s, mu)
    ta = 0.5 if r == INF else r / r1
    tb = 0.5 if s == INF else s / s1
    a = _power_split(A, ta) * _power_split(B, tb)
    b = safe_divide(c, a)
    res = _finish(tree, c, a, b, (r, s), (r1, s1), (r2, s2), mu)
    if res.constant > max_constant:
        res = _refine(tree, c, res, (r, s), (r1, s1), (r2, s2), mu)
    return res


def _finish(tree, c, a, b, rs, rs1, rs2, mu, refined=False):
    nc = lp_norm(tree, c, *rs, mu)
    na = lp_norm(tree, a, *rs1, mu)
    nb = lp_norm(tree, b, *rs2, mu)
    const = 0.0 if nc == 0 else na * nb / nc
    return Factorization(a, b, const, refined, (na, nb, nc))


def _refine(tree, c, start, rs, rs1, rs2, mu):
    pos = c > 0
    idx = np.flatnonzero(pos)
    logc = np.log(c[idx])

    def objective(x):
        a = np.zeros(tree.n_nodes)
        a[idx] = np.exp(x)
        b = np.zeros(tree.n_nodes)
        b[idx] = np.exp(logc - x)
        return math.log(lp_norm(tree, a, *rs1, mu)) + math.log(lp_norm(tree, b, *rs2, mu))

    x0 = np.log(start.a[idx])
    out = minimize(objective, x0, method="Nelder-Mead" if idx.size < 3 else "Powell",
                   options={"maxiter": 20_000, "xtol": 1e-8, "ftol": 1e-10})
    if out.fun >= objective(x0):
        return start
    a = np.zeros(tree.n_nodes)
    a[idx] = np.exp(out.x)
    b = safe_divide(c, a)
    return _finish(tree, c, a, b, rs, rs1, rs2, mu, refined=True)


# ---------------------------------------------------------------------------
# comparable expressions

def _masked(tree, a, mu_nodes, support):
    a = np.asarray(a, dtype=float)
    return np.where(_support(tree, support) & (mu_nodes > 0), a, 0.0)


def _pow(x, e):
    out = np.zeros_like(x, dtype=float)
    np.power(x, e, out=out, where=x > 0)
    return out


def summation_by_parts_expressions(tree: DyadicTree, a, p: float, mu_leaves, support=None) -> np.ndarray:
    """The three expressions of the summation-by-parts comparison."""
    mu_leaves = np.asarray(mu_leaves, dtype=float)
    mu_nodes = tree.node_sums(mu_leaves)
    a = _masked(tree, a, mu_nodes, support)
    e1 = float(np.dot(_pow(tree.path_sums(a), p), mu_leaves))
    e2 = float(np.sum(a * mu_nodes * _pow(tree.ancestor_sums(a), p - 1.0)))
    e3 = 0.0
    for k, rho in tree.localized_levels(a):
        sl = tree.level_slice(k)
        integ = (_pow(rho, p - 1.0) * mu_leaves.reshape(rho.shape)).sum(axis=1)
        e3 += float(np.sum(a[sl] * integ))
    return np.array([e1, e2, e3])


def equivalent_expressions(tree: DyadicTree, a, p: float, mu_leaves, support=None) -> np.ndarray:
    """The three comparable expressions plus the sup-variant, in that order."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    mu_leaves = np.asarray(mu_leaves, dtype=float)
    mu_nodes = tree.node_sums(mu_leaves)
    a = _masked(tree, a, mu_nodes, support)
    local = safe_divide(tree.descendant_sums(a * mu_nodes), mu_nodes)
    e1 = float(np.dot(_pow(tree.path_sums(a), p), mu_leaves))
    e2 = float(np.sum(a * mu_nodes * _pow(local, p - 1.0)))
    e3 = float(np.dot(_pow(tree.path_max(local), p), mu_leaves))
    e4 = float(np.sum(a * mu_nodes * _pow(tree.ancestor_max(local), p - 1.0)))
    return np.array([e1, e2, e3, e4])


def _ratio_pair(values: np.ndarray) -> tuple[float, float]:
    if values[0] == 0:
        if np.all(values == 0):
            return 1.0, 1.0
        return 0.0, INF
    r = values / values[0]
    return float(r.min()), float(r.max())


def summation_by_parts_ratio(a, p: float, m: MeasurePair, measure="omega", support=None):
    """(min, max) of the expressions divided by the integral expression."""
    if not p > 0:
        raise ValueError("p must be positive")
    return _ratio_pair(summation_by_parts_expressions(m.tree, a, p, m.leaves(measure), support))


def equivalent_expressions_ratio(a, p: float, m: MeasurePair, measure="omega", support=None):
    """(min, max) of the four expressions divided by the integral expression."""
    return _ratio_pair(equivalent_expressions(m.tree, a, p, m.leaves(measure), support))
