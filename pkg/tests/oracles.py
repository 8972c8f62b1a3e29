"""Independent brute-force references used by the tests."""
from __future__ import annotations

import itertools

import numpy as np


def kernel_matrix(inst) -> np.ndarray:
    """K[x, y] with (T f)(x) = sum_y K[x, y] f(y), built from an explicit ancestor loop."""
    tree = inst.tree
    n = tree.n_leaves
    K = np.zeros((n, n))
    lam = inst.lam_active
    sig_leaves = inst.sigma_leaves
    for node in range(tree.n_nodes):
        if lam[node] == 0:
            continue
        leaves = list(tree.leaf_range(node))
        s = sig_leaves[leaves].sum()
        if s == 0:
            continue
        for x in leaves:
            for y in leaves:
                K[x, y] += lam[node] * sig_leaves[y] / s
    return K


def _simplex_grid(n: int, m: int) -> np.ndarray:
    pts = []
    for c in itertools.combinations(range(m + n - 1), n - 1):
        bars = (-1,) + c + (m + n - 1,)
        pts.append([bars[i + 1] - bars[i] - 1 for i in range(n)])
    return np.array(pts, dtype=float) / m


def grid_norm(inst, m: int = 40, rounds: int = 6, shrink: float = 0.35, seed: int = 0) -> float:
    """Norm by exhaustive search over f = (x / sigma)^{1/p}, x on a simplex grid.

    After the global grid, each round samples a shrinking box around the best
    point (projected back to the simplex).
    """
    p, q = inst.exponents.p, inst.exponents.q
    K = kernel_matrix(inst)
    sig = inst.sigma_leaves
    var = np.flatnonzero(sig > 0)
    if var.size == 0:
        return 0.0
    w = inst.omega_leaves

    def value(X):
        F = np.zeros((X.shape[0], len(sig)))
        F[:, var] = (X / sig[var]) ** (1.0 / p)
        Tf = F @ K.T
        return (np.clip(Tf, 0, None) ** q) @ w

    X = _simplex_grid(var.size, m)
    vals = value(X)
    best = X[np.argmax(vals)]
    best_val = vals.max()
    rng = np.random.default_rng(seed)
    radius = 1.0 / m
    for _ in range(rounds):
        cand = best + rng.uniform(-radius, radius, size=(4000, var.size))
        cand = np.clip(cand, 0, None)
        cand /= cand.sum(axis=1, keepdims=True)
        v = value(cand)
        i = np.argmax(v)
        if v[i] > best_val:
            best, best_val = cand[i], v[i]
        radius *= shrink
    return float(best_val ** (1.0 / q))


def _cubes_containing(tree, leaf):
    return [n for n in range(tree.n_nodes) if leaf in tree.leaf_range(n)]


def brute_lambda_gamma(inst, node, gamma) -> float:
    """Power mean of the localized sum over the omega-charged leaves of one cube."""
    tree = inst.tree
    lam = inst.lam_active
    w = inst.omega_leaves
    leaves = [x for x in tree.leaf_range(node) if w[x] > 0]
    total = sum(w[x] for x in leaves)
    if total == 0:
        return 0.0
    vals = []
    for x in leaves:
        vals.append(sum(lam[r] for r in _cubes_containing(tree, x) if r in tree_descendants(tree, node)))
    vals = np.array(vals)
    ws = np.array([w[x] for x in leaves])
    with np.errstate(divide="ignore"):
        return float((np.dot(ws, vals**gamma) / total) ** (1.0 / gamma))


def tree_descendants(tree, node):
    out, stack = set(), [node]
    while stack:
        n = stack.pop()
        out.add(n)
        if tree.node_level[n] < tree.depth:
            stack.extend(tree.children(n))
    return out


def brute_wolff_condition(inst, gamma) -> float:
    """Triple loop: leaves x, cubes Q containing x, leaves inside Q."""
    p, q = inst.exponents.p, inst.exponents.q
    pc = p / (p - 1)
    tree = inst.tree
    lam = inst.lam_active
    total = 0.0
    for x in range(tree.n_leaves):
        if inst.omega_leaves[x] == 0:
            continue
        W = 0.0
        for Q in _cubes_containing(tree, x):
            if lam[Q] == 0:
                continue
            L = brute_lambda_gamma(inst, Q, gamma)
            W += lam[Q] * (inst.omega[Q] / inst.sigma[Q]) ** (pc - 1) * L ** (pc - 1)
        total += inst.omega_leaves[x] * W ** ((p - 1) * q / (p - q))
    return total


def brute_lp_norm(tree, a, r, s, mu) -> float:
    """(sum_x mu(x) (sum_{Q ni x} |a_Q|^s)^{r/s})^{1/r} for finite r, s > 0."""
    total = 0.0
    for x in range(tree.n_leaves):
        inner = sum(abs(a[Q]) ** s for Q in _cubes_containing(tree, x))
        total += mu[x] * inner ** (r / s)
    return total ** (1.0 / r)


def brute_quantities_A(inst, a):
    p, q = inst.exponents.p, inst.exponents.q
    pc = p / (p - 1)
    tree = inst.tree
    act = inst.active
    s1 = s2 = 0.0
    for x in range(tree.n_leaves):
        cubes = [Q for Q in _cubes_containing(tree, x) if act[Q]]
        dens = sum(inst.lam[Q] * inst.omega[Q] / inst.sigma[Q] / a[Q] for Q in cubes)
        s1 += inst.sigma_leaves[x] * dens**pc
        sup = max((a[Q] for Q in cubes), default=0.0)
        s2 += inst.omega_leaves[x] * sup ** (q / (1 - q))
    return s1 ** (1 / pc), s2 ** ((1 - q) / q)


def brute_quantities_D(inst, d):
    p, q = inst.exponents.p, inst.exponents.q
    pc = p / (p - 1)
    tree = inst.tree
    act = inst.active
    D1 = 0.0
    for Q in range(tree.n_nodes):
        if not act[Q]:
            continue
        s = sum(inst.lam[R] / d[R] * inst.omega[R] for R in tree_descendants(tree, Q) if act[R])
        D1 = max(D1, s / inst.sigma[Q])
    total = 0.0
    for x in range(tree.n_leaves):
        pot = sum(inst.lam[Q] * d[Q] ** (pc - 1) for Q in _cubes_containing(tree, x) if act[Q])
        total += inst.omega_leaves[x] * pot ** ((p - 1) * q / (p - q))
    return D1, total ** ((p - q) / q)
