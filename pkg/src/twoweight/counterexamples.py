"""Chain counterexamples, the Riesz model family and a log-power series classifier.

Two chain constructions are provided.  The decreasing chain makes the
gamma-Wolff condition finite while the testing-type necessary condition
blows up; the increasing chain makes the sufficient Carleson-type condition
finite while the gamma = q sup-form Wolff condition blows up.  Each has a
streaming evaluator that never builds the tree (N up to ~10^7) and a
materialized instance for small N that is cross-checked against the
generic tree operations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import integrate

from .tree import DyadicTree, ExponentConfig, Instance, MeasurePair, build_tree

MATERIALIZE_MAX_DEPTH = 20


class ParameterError(ValueError):
    pass


# ---------------------------------------------------------------- series

@dataclass(frozen=True)
class SeriesTerm:
    """Term C (k+1)^{-a-1} log(k+2)^{-b}, k >= 0."""

    C: float
    a: float
    b: float

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError("coefficient must be positive")

    def __call__(self, k):
        k = np.asarray(k, dtype=float)
        return self.C * (k + 1.0) ** (-self.a - 1.0) * np.log(k + 2.0) ** (-self.b)


@dataclass(frozen=True)
class SeriesVerdict:
    converges: bool
    term: SeriesTerm
    tail_bound: float
    scale: float
    k: int

    @property
    def label(self) -> str:
        return "converges" if self.converges else "diverges"


def _tail_bound(term: SeriesTerm, k: int) -> float:
    """Integral-test bound for sum_{j >= k} term(j); inf if divergent."""
    C, a, b = term.C, term.a, term.b
    if not (a > 0 or (a == 0 and b > 1)):
        return math.inf
    head = float(term(k))
    if a == 0:
        # int_k^inf (t+1)^{-1} log(t+2)^{-b} <= int (t+1)^{-1} log(t+1)^{-b}
        if k < 2:
            rest, _ = integrate.quad(lambda t: float(term(t)), k, math.inf, limit=200)
            return head + rest
        return head + C * math.log(k + 1.0) ** (1.0 - b) / (b - 1.0)
    if b >= 0:
        return head + C * (k + 1.0) ** (-a) * math.log(k + 2.0) ** (-b) / a
    rest, _ = integrate.quad(lambda t: float(term(t)), k, math.inf, limit=200)
    return head + rest


def _scale(term: SeriesTerm, k: int) -> float:
    """Growth scale of partial sums (a <= 0) or of tails (a > 0) at k."""
    C, a, b = term.C, term.a, term.b
    if a != 0:
        return C * (k + 1.0) ** (-a) * math.log(k + 2.0) ** (-b)
    if b == 1:
        return C * math.log(math.log(k + 2.0))
    return C * math.log(k + 2.0) ** (1.0 - b) / abs(1.0 - b)


def classify_series(term: SeriesTerm, k: int = 1000) -> SeriesVerdict:
    """Convergence of sum_k term(k) with comparison bounds evaluated at ``k``."""
    conv = term.a > 0 or (term.a == 0 and term.b > 1)
    return SeriesVerdict(conv, term, _tail_bound(term, k), _scale(term, k), k)


# ---------------------------------------------------------------- growth

@dataclass
class GrowthReport:
    """Partial sums of a truncated quantity and their growth trend."""

    name: str
    checkpoints: np.ndarray
    partial_sums: np.ndarray
    increment_slope: float
    raw_slope: float
    verdict: str

    def at(self, k: int) -> float:
        i = np.searchsorted(self.checkpoints, k)
        if i >= len(self.checkpoints) or self.checkpoints[i] != k:
            raise KeyError(f"no checkpoint at {k}")
        return float(self.partial_sums[i])

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "checkpoints": [int(c) for c in self.checkpoints],
            "partial_sums": [float(s) for s in self.partial_sums],
            "increment_slope": self.increment_slope,
            "raw_slope": self.raw_slope,
            "verdict": self.verdict,
        }


def _checkpoints(N: int) -> np.ndarray:
    pts = {N // 4, N // 2, N}
    k = 1
    while k <= N:
        pts.add(k)
        k *= 10
    k = 1
    while k <= N:
        pts.add(k)
        k *= 2
    return np.array(sorted(p for p in pts if p >= 1), dtype=np.int64)


def growth_report(name: str, terms: np.ndarray, verdict: str, fit_from: int = 1000) -> GrowthReport:
    """Partial sums S(K) = sum_{k<=K} terms[k] at checkpoints, with log-log slopes.

    The increment slope fits log(S(K) - S(K/2)) against log K over dyadic
    K >= fit_from; the raw slope fits log S(K) on the same points.
    """
    N = len(terms) - 1
    csum = np.cumsum(terms)
    cps = _checkpoints(N)
    sums = csum[cps]
    dy = [k for k in cps if k >= max(fit_from, 2) and (k & (k - 1)) == 0]
    inc_slope = raw_slope = math.nan
    if len(dy) >= 2:
        K = np.array(dy)
        inc = csum[K] - csum[K // 2]
        if np.all(inc > 0):
            inc_slope = float(np.polyfit(np.log(K), np.log(inc), 1)[0])
        if np.all(csum[K] > 0):
            raw_slope = float(np.polyfit(np.log(K), np.log(csum[K]), 1)[0])
    return GrowthReport(name, cps, sums, inc_slope, raw_slope, verdict)


# ---------------------------------------------------------------- decreasing chain

@dataclass
class SmallGammaParams:
    p: float
    q: float
    gamma: float
    epsilon: float
    alpha: float = 1.0

    @property
    def beta(self) -> float:
        return self.alpha * self.q

    @property
    def delta(self) -> float:
        return 1.0 / self.q

    def check(self) -> None:
        p, q, g, e, a = self.p, self.q, self.gamma, self.epsilon, self.alpha
        bad = []
        if not (0 < q < 1 < p < math.inf):
            bad.append("0 < q < 1 < p < inf")
        if not (0 < g < q):
            bad.append("0 < gamma < q")
        if not (0 < e < 1):
            bad.append("0 < epsilon < 1")
        if not a > 0:
            bad.append("alpha > 0")
        if not self.beta - a * g > 0:
            bad.append("beta - alpha*gamma > 0")
        pc = p / (p - 1)
        if not a * pc - self.beta * (pc - 1) > 0:
            bad.append("alpha*p' - beta*(p'-1) > 0")
        if bad:
            raise ParameterError("violated: " + "; ".join(bad))

    def necessary_term(self) -> SeriesTerm:
        """Comparison term of the testing-type quantity at the root."""
        return SeriesTerm(1.0, self.beta - self.alpha * self.q, self.q * self.delta)

    def wolff_term(self) -> SeriesTerm:
        """Comparison term dominating the gamma-Wolff quantity."""
        p, q = self.p, self.q
        a = (self.beta * p - self.alpha * p * q) / (p - q)
        b = (self.delta * p * q - self.epsilon * q) / (p - q)
        return SeriesTerm(1.0, a, b)


def small_gamma_sequences(prm: SmallGammaParams, N: int):
    """(lambda_{P_j}, omega(E_j), sigma(P_j)) for j = 0..N."""
    j = np.arange(N + 1, dtype=float)
    jj = np.where(j == 0, 1.0, j)  # lambda_{P_0} takes the j = 1 value
    lam = jj ** (prm.alpha - 1.0) * np.log(jj + 2.0) ** (-prm.delta)
    wE = (j + 1.0) ** (-prm.beta - 1.0)
    sig = np.log(j + 2.0) ** (-prm.epsilon)
    return lam, wE, sig


_RHO = 0.4
_J = 32
_LEAF = 16


@numba.njit(cache=True)
def _block_moments(S, w, M, J):
    """Normalized centered moments of every aligned block of size >= 16."""
    nblocks = 0
    size = _LEAF
    while size <= M:
        nblocks += M // size
        size *= 2
    lo = np.empty(nblocks)
    width = np.empty(nblocks)
    nu = np.zeros((nblocks, J + 1))
    base = 0
    size = _LEAF
    while size <= M:
        for b in range(M // size):
            s0 = b * size
            idx = base + b
            lo[idx] = S[s0]
            wd = S[s0 + size - 1] - S[s0]
            width[idx] = wd
            for m in range(s0, s0 + size):
                x = (S[m] - S[s0]) / wd if wd > 0 else 0.0
                t = w[m]
                nu[idx, 0] += t
                if wd > 0:
                    for jj in range(1, J + 1):
                        t *= x
                        nu[idx, jj] += t
        base += M // size
        size *= 2
    return lo, width, nu


@numba.njit(cache=True)
def _gamma_sums(S, w, n, M, gamma, lo, width, nu, rho, J):
    """F[l] = sum_{m=l}^{n-1} w[m] (S[m] - S[l-1])^gamma for every l."""
    binom = np.empty(J + 1)
    binom[0] = 1.0
    for jj in range(1, J + 1):
        binom[jj] = binom[jj - 1] * (gamma - jj + 1) / jj
    nlev = 0
    size = _LEAF
    while size <= M:
        nlev += 1
        size *= 2
    level_base = np.empty(nlev, dtype=np.int64)
    base = 0
    for t in range(nlev):
        level_base[t] = base
        base += M // (_LEAF << t)
    F = np.zeros(n)
    for l in range(n):
        c = S[l - 1] if l > 0 else 0.0
        pos = l
        acc = 0.0
        while pos < n:
            if pos % _LEAF != 0:
                stop = min(n, (pos // _LEAF + 1) * _LEAF)
                for m in range(pos, stop):
                    if w[m] > 0:
                        acc += w[m] * (S[m] - c) ** gamma
                pos = stop
                continue
            t = 0
            while t + 1 < nlev and pos % (_LEAF << (t + 1)) == 0:
                t += 1
            done = False
            while not done:
                size = _LEAF << t
                idx = level_base[t] + pos // size
                A = lo[idx] - c
                if A > 0 and width[idx] <= rho * A:
                    x = width[idx] / A
                    s = 0.0
                    xp = 1.0
                    for jj in range(J + 1):
                        s += binom[jj] * nu[idx, jj] * xp
                        xp *= x
                    acc += A ** gamma * s
                    pos += size
                    done = True
                elif t == 0:
                    stop = min(n, pos + _LEAF)
                    for m in range(pos, stop):
                        if w[m] > 0:
                            acc += w[m] * (S[m] - c) ** gamma
                    pos = stop
                    done = True
                else:
                    t -= 1
        F[l] = acc
    return F


def gamma_localized_sums(lam: np.ndarray, wE: np.ndarray, gamma: float) -> np.ndarray:
    """F[l] = sum_{m>=l} wE[m] (lam[l] + ... + lam[m])^gamma along a chain.

    Uses a hierarchy of block moments with a binomial expansion, so the cost
    is O(N log N) instead of O(N^2).
    """
    n = len(lam)
    M = _LEAF
    while M < n:
        M *= 2
    S = np.empty(M)
    S[:n] = np.cumsum(lam)
    S[n:] = S[n - 1]
    w = np.zeros(M)
    w[:n] = wE
    lo, width, nu = _block_moments(S, w, M, _J)
    return _gamma_sums(S, w, n, M, float(gamma), lo, width, nu, _RHO, _J)


def gamma_localized_sums_direct(lam: np.ndarray, wE: np.ndarray, gamma: float) -> np.ndarray:
    """Quadratic-time reference for :func:`gamma_localized_sums`."""
    n = len(lam)
    S = np.cumsum(lam)
    out = np.empty(n)
    for l in range(n):
        c = S[l - 1] if l > 0 else 0.0
        out[l] = np.dot(wE[l:], (S[l:] - c) ** gamma)
    return out


@dataclass
class ChainResult:
    """Streaming evaluation of a chain construction."""

    which: str
    params: dict
    depth: int
    reports: dict[str, GrowthReport]
    verdicts: dict[str, SeriesVerdict] = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "which": self.which,
            "params": self.params,
            "depth": self.depth,
            "quantities": {k: r.to_dict() for k, r in self.reports.items()},
            "classifier": {
                k: {"a": v.term.a, "b": v.term.b, "verdict": v.label, "tail_bound": v.tail_bound, "k": v.k}
                for k, v in self.verdicts.items()
            },
            "extras": self.extras,
        }


def small_gamma_terms(prm: SmallGammaParams, N: int):
    """Per-k terms of the two tracked quantities on the depth-N chain.

    necessary[k] = sigma(P_0)^{-q/p} omega(E_k) (sum_{l<=k} lambda_{P_l})^q
    wolff[k]     = omega(E_k) (sum_{l<=k} lambda_{P_l} (omega/sigma)^{p'-1} Lambda_gamma^{p'-1})^{(p-1)q/(p-q)}
    """
    p, q, g = prm.p, prm.q, prm.gamma
    lam, wE, sig = small_gamma_sequences(prm, N)
    S = np.cumsum(lam)
    necessary = sig[0] ** (-q / p) * wE * S ** q
    wP = np.cumsum(wE[::-1])[::-1]
    F = gamma_localized_sums(lam, wE, g)
    Lam = (F / wP) ** (1.0 / g)
    e = p / (p - 1) - 1.0
    U = lam * (wP / sig * Lam) ** e
    wolff = wE * np.cumsum(U) ** ((p - 1) * q / (p - q))
    return necessary, wolff


def run_small_gamma(p=2.0, q=0.5, gamma=0.25, epsilon=0.5, N=10**6, alpha=1.0, k_ref=1000) -> ChainResult:
    prm = SmallGammaParams(p, q, gamma, epsilon, alpha)
    prm.check()
    if N < 4:
        raise ParameterError("depth N must be >= 4")
    necessary, wolff = small_gamma_terms(prm, N)
    return ChainResult(
        "small-gamma",
        {"p": p, "q": q, "gamma": gamma, "epsilon": epsilon, "alpha": alpha,
         "beta": prm.beta, "delta": prm.delta},
        N,
        {
            "necessary": growth_report("necessary", necessary, "diverges"),
            "gamma_wolff": growth_report("gamma_wolff", wolff, "converges"),
        },
        {
            "necessary": classify_series(prm.necessary_term(), k_ref),
            "gamma_wolff": classify_series(prm.wolff_term(), k_ref),
        },
    )


def build_counterexample_small_gamma(p, q, gamma, N, epsilon, alpha=1.0) -> Instance:
    """Decreasing chain along the leftmost path of a binary tree of depth N+1."""
    prm = SmallGammaParams(p, q, gamma, epsilon, alpha)
    prm.check()
    if N < 4:
        raise ParameterError("depth N must be >= 4")
    tree = build_tree(2, N + 1)
    lam_j, wE, sig = small_gamma_sequences(prm, N)
    lam = np.zeros(tree.n_nodes)
    for j in range(N + 1):
        lam[tree.offset(j)] = lam_j[j]
    sE = sig - np.append(sig[1:], 0.0)
    sl = np.zeros(tree.n_leaves)
    wl = np.zeros(tree.n_leaves)
    for j in range(N + 1):
        leaf = 2 ** (N - j)  # leftmost leaf of the off-path child of P_j
        sl[leaf] = sE[j]
        wl[leaf] = wE[j]
    return Instance(tree, lam, MeasurePair(tree, sl, wl), ExponentConfig(p, q, gamma))


def chain_nodes_small_gamma(tree: DyadicTree) -> np.ndarray:
    return np.array([tree.offset(j) for j in range(tree.depth)])


# ---------------------------------------------------------------- increasing chain

@dataclass
class LargeGammaParams:
    p: float
    q: float
    beta: float
    sigma0: float = 1.0

    @property
    def alpha(self) -> float:
        return (self.p - 1) / (self.p - self.q)

    def check(self) -> None:
        bad = []
        if not (0 < self.q < 1 < self.p < math.inf):
            bad.append("0 < q < 1 < p < inf")
        if not self.beta > 1:
            bad.append("beta > 1")
        if not self.alpha * self.beta < 1:
            bad.append("alpha*beta < 1")
        if not self.sigma0 > 0:
            bad.append("sigma(P_0) > 0")
        if bad:
            raise ParameterError("violated: " + "; ".join(bad))


def large_gamma_log_sequences(prm: LargeGammaParams, N: int):
    """(log lambda_{P_j}, log omega(E_j), log omega(P_j)) for j = 0..N."""
    j = np.arange(N + 1, dtype=float)
    log2 = math.log(2.0)
    logwE = (j + 1.0) * log2
    logwP = (j + 2.0) * log2 + np.log1p(-(2.0 ** -(j + 1.0)))
    loglam = (-prm.beta * np.log(j + 1.0) - logwP) / prm.q
    return loglam, logwE, logwP


def _chain_q_integrals(loglam: np.ndarray, logwE: np.ndarray, q: float, window: int = 48) -> np.ndarray:
    """I[k] = sum_{j<=k} omega(E_j) (lambda_j + ... + lambda_k)^q for a fast-decaying lambda.

    Contributions of lambda_l with l > j + window relative to lambda_j are below
    machine precision and are dropped.
    """
    n = len(loglam)
    W = min(window, n - 1)
    e = np.exp(logwE + q * loglam)  # omega(E_j) lambda_j^q, order-one numbers
    partial = np.ones(n)  # sum_{t=0}^{d} lambda_{j+t}/lambda_j
    full = np.ones(n)
    I = np.zeros(n)
    I += e  # d = 0 term
    for d in range(1, W + 1):
        ratio = np.zeros(n)
        ratio[: n - d] = np.exp(loglam[d:] - loglam[: n - d])
        partial = partial + ratio
        if d < W:
            # j = k - d contributes e_j * partial_d(j)^q to I[k]
            I[d:] += e[: n - d] * partial[: n - d] ** q
    full = partial
    head = np.cumsum(e * full ** q)
    I[W:] += head[: n - W]
    return I


def large_gamma_terms(prm: LargeGammaParams, N: int):
    """Per-index terms of the two tracked quantities on the increasing chain.

    sufficient[j] = lambda_{P_j}^q omega(P_j) = (j+1)^{-beta}; the condition
        equals sigma(P_0)^{-q/(p-q)} (sum_j sufficient[j])^{p/(p-q)}.
    sup_form[j]  = omega(E_j) sup_{k>=j} lambda^{(p-1)q/(p-q)} (omega/sigma)^{q/(p-q)} Lambda_q^{q/(p-q)} at P_k.
    lower[j]     = (omega(E_j)/omega(P_j)) (lambda^q omega(P_j))^alpha, the comparison series.
    """
    p, q = prm.p, prm.q
    loglam, logwE, logwP = large_gamma_log_sequences(prm, N)
    j = np.arange(N + 1, dtype=float)
    sufficient = (j + 1.0) ** (-prm.beta)
    I = _chain_q_integrals(loglam, logwE, q)
    r = (p - 1) * q / (p - q)
    logterm = (r * loglam + q / (p - q) * (logwP - math.log(prm.sigma0))
               + (np.log(I) - logwP) / (p - q))
    logsup = np.maximum.accumulate(logterm[::-1])[::-1]
    sup_form = np.exp(logwE + logsup)
    lower = np.exp(logwE - logwP) * sufficient ** prm.alpha
    return sufficient, sup_form, lower


def large_gamma_lower_estimate(prm: LargeGammaParams, N: int) -> float:
    """Finite telescoping lower bound for sum_{j<=N} (omega(E_j)/omega(P_j)) b_j^alpha.

    With A_j = omega(P_j) and decreasing b_j = (j+1)^{-beta}:
    sum_{j<N} (A_{j+1}-A_j)/A_j b_j^alpha >= (log A_N - log A_0) b_N^alpha, and
    omega(E_j)/omega(P_j) >= (1/2) omega(E_{j+1})/omega(P_j).
    """
    _, _, logwP = large_gamma_log_sequences(prm, N)
    return 0.5 * (logwP[N] - logwP[0]) * (N + 1.0) ** (-prm.alpha * prm.beta)


def run_large_gamma(p=2.0, q=0.5, beta=1.25, N=10**6) -> ChainResult:
    prm = LargeGammaParams(p, q, beta)
    prm.check()
    if N < 4:
        raise ParameterError("depth N must be >= 4")
    sufficient, sup_form, lower = large_gamma_terms(prm, N)
    res = ChainResult(
        "large-gamma",
        {"p": p, "q": q, "beta": beta, "alpha": prm.alpha},
        N,
        {
            "sufficient": growth_report("sufficient", sufficient, "converges"),
            "sup_form": growth_report("sup_form", sup_form, "diverges"),
            "comparison": growth_report("comparison", lower, "diverges"),
        },
        {
            "sufficient": classify_series(SeriesTerm(1.0, beta - 1.0, 0.0)),
            "comparison": classify_series(SeriesTerm(0.5, prm.alpha * beta - 1.0, 0.0)),
        },
    )
    res.extras["lower_estimate"] = large_gamma_lower_estimate(prm, N)
    res.extras["expected_slope"] = 1.0 - prm.alpha * beta
    return res


def build_counterexample_large_gamma(p, q, N, beta, sigma0: float = 1.0) -> Instance:
    """Increasing chain of ancestors of leaf 0 in a binary tree of depth N."""
    prm = LargeGammaParams(p, q, beta, sigma0)
    prm.check()
    if N < 4:
        raise ParameterError("depth N must be >= 4")
    tree = build_tree(2, N)
    loglam, logwE, _ = large_gamma_log_sequences(prm, N)
    lam = np.zeros(tree.n_nodes)
    for j in range(N + 1):
        lam[tree.offset(N - j)] = math.exp(loglam[j])
    sl = np.zeros(tree.n_leaves)
    wl = np.zeros(tree.n_leaves)
    sl[0] = sigma0
    wl[0] = math.exp(logwE[0])
    for j in range(1, N + 1):
        wl[2 ** (j - 1)] = math.exp(logwE[j])  # leftmost leaf of the sibling of P_{j-1}
    return Instance(tree, lam, MeasurePair(tree, sl, wl), ExponentConfig(p, q, q))


def chain_nodes_large_gamma(tree: DyadicTree) -> np.ndarray:
    N = tree.depth
    return np.array([tree.offset(N - j) for j in range(N + 1)])


# ---------------------------------------------------------------- generic evaluations

def necessary_quantity_tree(inst: Instance) -> np.ndarray:
    """sigma(Q)^{-q/p} int rho_Q^q d omega for every node (0 where sigma = 0)."""
    from .wolff import lambda_gamma_all

    q, p = inst.exponents.q, inst.exponents.p
    lg = lambda_gamma_all(inst, q)
    out = np.zeros(inst.tree.n_nodes)
    ok = inst.sigma > 0
    out[ok] = inst.sigma[ok] ** (-q / p) * lg[ok] ** q * inst.omega[ok]
    return out


def sufficient_quantity_tree(inst: Instance) -> float:
    """int (sum_Q lambda_Q^q omega(Q)/sigma(Q) 1_Q)^{p/(p-q)} d sigma."""
    p, q = inst.exponents.p, inst.exponents.q
    vals = inst.lam_active ** q * inst.density_ratio
    W = inst.tree.path_sums(vals)
    return float(np.dot(W ** (p / (p - q)), inst.sigma_leaves))


def sup_form_quantity_tree(inst: Instance, gamma: float | None = None) -> float:
    """int sup_Q lambda^{(p-1)q/(p-q)} (omega/sigma)^{q/(p-q)} Lambda_gamma^{q/(p-q)} 1_Q d omega."""
    from .wolff import lambda_gamma_all

    p, q = inst.exponents.p, inst.exponents.q
    gamma = q if gamma is None else gamma
    lg = lambda_gamma_all(inst, gamma)
    r = (p - 1) * q / (p - q)
    vals = inst.lam_active ** r * (inst.density_ratio * lg) ** (q / (p - q))
    return float(np.dot(inst.tree.path_max(vals), inst.omega_leaves))


# ---------------------------------------------------------------- Riesz model

def riesz_model_coefficients(tree: DyadicTree, sigma_nodes: np.ndarray, alpha_r: float) -> np.ndarray:
    """lambda_Q = sigma(Q) |Q|^{alpha_r/d - 1} with |Q| = 2^{-k d} at depth k."""
    d = tree.dimension
    if not 0 < alpha_r < d:
        raise ValueError("alpha_r must lie in (0, d)")
    k = tree.node_level
    return np.asarray(sigma_nodes, dtype=float) * 2.0 ** (-k * d * (alpha_r / d - 1.0))
