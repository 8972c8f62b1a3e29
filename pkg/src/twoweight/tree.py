"""Finite dyadic trees, leaf-supported measures and node families.

Nodes are stored level by level: level ``k`` occupies the index range
``[offset(k), offset(k) + b**k)`` and the node at position ``i`` of level ``k``
has children ``b*i, ..., b*i + b - 1`` on level ``k + 1``.  The position of a
node inside its level, written in base ``b`` with ``k`` digits, is its path
from the root, so leaves appear in lexicographic path order.

Every reduction below walks the levels in a fixed order, which makes all
results bit-reproducible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

DEFAULT_NODE_CAP = 2**26


class TreeTooLarge(ValueError):
    """Requested tree exceeds the configured node cap."""


@dataclass(frozen=True)
class ExponentConfig:
    """Exponents ``0 < q < 1 <= p < inf`` and the integrability parameter gamma."""

    p: float
    q: float
    gamma: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.q < 1.0):
            raise ValueError(f"q must lie in (0, 1), got {self.q}")
        if not (1.0 <= self.p < math.inf):
            raise ValueError(f"p must lie in [1, inf), got {self.p}")
        if self.gamma == 0 or math.isnan(self.gamma):
            raise ValueError("gamma must be a nonzero real or +-inf")

    @property
    def p_conj(self) -> float:
        """Hoelder conjugate p' (``inf`` exactly when p == 1)."""
        return math.inf if self.p == 1.0 else self.p / (self.p - 1.0)

    @property
    def wolff_exponent(self) -> float:
        """(p-1)q/(p-q), the outer exponent of the Wolff-type integrals."""
        return (self.p - 1.0) * self.q / (self.p - self.q)

    @property
    def omega_exponent(self) -> float:
        """q/(1-q)."""
        return self.q / (1.0 - self.q)

    @property
    def dual_exponent(self) -> float:
        """p/(p-q)."""
        return self.p / (self.p - self.q)


@dataclass(frozen=True)
class DyadicTree:
    """Complete ``branching``-ary tree truncated at ``depth``."""

    branching: int
    depth: int
    node_cap: int = field(default=DEFAULT_NODE_CAP, compare=False, repr=False)

    def __post_init__(self):
        if self.branching < 2:
            raise ValueError("branching must be >= 2")
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        if self.n_nodes > self.node_cap:
            raise TreeTooLarge(
                f"tree with branching={self.branching}, depth={self.depth} has "
                f"{self.n_nodes} nodes, above the node cap {self.node_cap}"
            )

    @property
    def n_nodes(self) -> int:
        b = self.branching
        return (b ** (self.depth + 1) - 1) // (b - 1)

    @property
    def n_leaves(self) -> int:
        return self.branching**self.depth

    @property
    def dimension(self) -> float:
        return math.log2(self.branching)

    def offset(self, level: int) -> int:
        b = self.branching
        return (b**level - 1) // (b - 1)

    def level_slice(self, level: int) -> slice:
        start = self.offset(level)
        return slice(start, start + self.branching**level)

    @cached_property
    def node_level(self) -> np.ndarray:
        out = np.empty(self.n_nodes, dtype=np.int64)
        for k in range(self.depth + 1):
            out[self.level_slice(k)] = k
        out.setflags(write=False)
        return out

    @cached_property
    def leaves_below(self) -> np.ndarray:
        """Number of leaves under each node."""
        out = self.branching ** (self.depth - self.node_level)
        out.setflags(write=False)
        return out

    # -- addressing -------------------------------------------------------
    def node_index(self, path: str | tuple[int, ...] = "") -> int:
        digits = [int(c) for c in path] if isinstance(path, str) else list(path)
        pos = 0
        for d in digits:
            if not 0 <= d < self.branching:
                raise ValueError(f"digit {d} out of range for branching {self.branching}")
            pos = pos * self.branching + d
        if len(digits) > self.depth:
            raise ValueError(f"path {path!r} deeper than the tree")
        return self.offset(len(digits)) + pos

    def level_and_position(self, node: int) -> tuple[int, int]:
        if not 0 <= node < self.n_nodes:
            raise IndexError(node)
        k = int(self.node_level[node])
        return k, node - self.offset(k)

    def path(self, node: int) -> tuple[int, ...]:
        k, pos = self.level_and_position(node)
        digits = []
        for _ in range(k):
            pos, d = divmod(pos, self.branching)
            digits.append(d)
        return tuple(reversed(digits))

    def path_str(self, node: int) -> str:
        if self.branching > 10:
            raise ValueError("string paths need branching <= 10")
        return "".join(str(d) for d in self.path(node))

    def parent(self, node: int) -> int | None:
        k, pos = self.level_and_position(node)
        if k == 0:
            return None
        return self.offset(k - 1) + pos // self.branching

    def child(self, node: int, i: int) -> int:
        k, pos = self.level_and_position(node)
        if k == self.depth:
            raise ValueError("leaves have no children")
        if not 0 <= i < self.branching:
            raise ValueError(f"child index {i} out of range")
        return self.offset(k + 1) + pos * self.branching + i

    def children(self, node: int) -> list[int]:
        k, _ = self.level_and_position(node)
        if k == self.depth:
            return []
        return [self.child(node, i) for i in range(self.branching)]

    def leaf_range(self, node: int) -> range:
        """Leaf positions (0-based, lexicographic) under ``node``."""
        k, pos = self.level_and_position(node)
        width = self.branching ** (self.depth - k)
        return range(pos * width, (pos + 1) * width)

    def leaf_node(self, leaf: int) -> int:
        return self.offset(self.depth) + leaf

    def ancestors(self, node: int) -> list[int]:
        """Ancestors of ``node`` from the root down, ``node`` included."""
        chain = [node]
        while (par := self.parent(chain[-1])) is not None:
            chain.append(par)
        return chain[::-1]

    def leaf_ancestor_matrix(self) -> np.ndarray:
        """Boolean ``(n_leaves, n_nodes)`` matrix ``[x in Q]``; small trees only."""
        out = np.zeros((self.n_leaves, self.n_nodes), dtype=bool)
        for k in range(self.depth + 1):
            width = self.branching ** (self.depth - k)
            cols = self.offset(k) + np.arange(self.n_leaves) // width
            out[np.arange(self.n_leaves), cols] = True
        return out

    # -- sweeps -----------------------------------------------------------
    def node_sums(self, leaf_values: np.ndarray) -> np.ndarray:
        """Bottom-up subtree sums of a leaf array."""
        leaf_values = np.asarray(leaf_values, dtype=float)
        out = np.empty(self.n_nodes)
        acc = leaf_values
        out[self.level_slice(self.depth)] = acc
        for k in range(self.depth - 1, -1, -1):
            acc = acc.reshape(-1, self.branching).sum(axis=1)
            out[self.level_slice(k)] = acc
        return out

    def descendant_sums(self, node_values: np.ndarray) -> np.ndarray:
        """``out[Q] = sum_{R subseteq Q} v[R]``."""
        v = np.asarray(node_values, dtype=float)
        out = np.empty(self.n_nodes)
        acc = v[self.level_slice(self.depth)].copy()
        out[self.level_slice(self.depth)] = acc
        for k in range(self.depth - 1, -1, -1):
            acc = v[self.level_slice(k)] + acc.reshape(-1, self.branching).sum(axis=1)
            out[self.level_slice(k)] = acc
        return out

    def ancestor_sums(self, node_values: np.ndarray) -> np.ndarray:
        """``out[Q] = sum_{R supseteq Q} v[R]``."""
        v = np.asarray(node_values, dtype=float)
        out = np.empty(self.n_nodes)
        acc = v[self.level_slice(0)].copy()
        out[self.level_slice(0)] = acc
        for k in range(1, self.depth + 1):
            acc = np.repeat(acc, self.branching) + v[self.level_slice(k)]
            out[self.level_slice(k)] = acc
        return out

    def ancestor_max(self, node_values: np.ndarray) -> np.ndarray:
        """``out[Q] = max_{R supseteq Q} v[R]``."""
        v = np.asarray(node_values, dtype=float)
        out = np.empty(self.n_nodes)
        acc = v[self.level_slice(0)].copy()
        out[self.level_slice(0)] = acc
        for k in range(1, self.depth + 1):
            acc = np.maximum(np.repeat(acc, self.branching), v[self.level_slice(k)])
            out[self.level_slice(k)] = acc
        return out

    def path_sums(self, node_values: np.ndarray) -> np.ndarray:
        """Per leaf ``x``: ``sum_{Q ni x} v[Q]``."""
        return self.ancestor_sums(node_values)[self.level_slice(self.depth)]

    def path_max(self, node_values: np.ndarray) -> np.ndarray:
        """Per leaf ``x``: ``max_{Q ni x} v[Q]``."""
        return self.ancestor_max(node_values)[self.level_slice(self.depth)]

    def spread(self, node_values: np.ndarray, level: int) -> np.ndarray:
        """Broadcast the values of one level onto the leaves."""
        v = np.asarray(node_values, dtype=float)[self.level_slice(level)]
        return np.repeat(v, self.branching ** (self.depth - level))

    def localized_levels(self, node_values: np.ndarray):
        """Yield ``(level, rho)`` with ``rho`` of shape ``(b**level, b**(depth-level))``.

        Row ``i`` holds the localized sum ``sum_{R subseteq Q} v[R] 1_R`` on
        the leaves of the ``i``-th node ``Q`` of that level.  The sums are
        accumulated from the leaves upwards, so no cancellation occurs.
        Levels are produced from the deepest to the root.
        """
        acc = np.zeros(self.n_leaves)
        for k in range(self.depth, -1, -1):
            acc = acc + self.spread(node_values, k)
            yield k, acc.reshape(self.branching**k, -1)


def build_tree(branching: int, depth: int, node_cap: int = DEFAULT_NODE_CAP) -> DyadicTree:
    return DyadicTree(branching, depth, node_cap)


@dataclass(frozen=True)
class MeasurePair:
    """Leaf masses of sigma and omega with cached cube masses."""

    tree: DyadicTree
    sigma_leaves: np.ndarray
    omega_leaves: np.ndarray

    def __post_init__(self):
        for name in ("sigma_leaves", "omega_leaves"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (self.tree.n_leaves,):
                raise ValueError(
                    f"{name} has length {arr.size}, expected {self.tree.n_leaves} leaves"
                )
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ValueError(f"{name} must be finite and nonnegative")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for name, leaves in (("sigma", self.sigma_leaves), ("omega", self.omega_leaves)):
            nodes = self.tree.node_sums(leaves)
            nodes.setflags(write=False)
            object.__setattr__(self, name, nodes)

    def leaves(self, which: str) -> np.ndarray:
        return {"sigma": self.sigma_leaves, "omega": self.omega_leaves}[which]

    def nodes(self, which: str) -> np.ndarray:
        return {"sigma": self.sigma, "omega": self.omega}[which]


def node_measure(m: MeasurePair, which: str, node: int) -> float:
    return float(m.nodes(which)[node])


def safe_divide(num, den) -> np.ndarray:
    """Elementwise ``num / den`` with the convention ``x / 0 := 0``."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    out = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=den != 0)
    return out


def averages(tree: DyadicTree, f: np.ndarray, mu_leaves: np.ndarray) -> np.ndarray:
    """Per node ``<f>^mu_Q`` with ``0/0 := 0``."""
    mu_leaves = np.asarray(mu_leaves, dtype=float)
    return safe_divide(tree.node_sums(np.asarray(f) * mu_leaves), tree.node_sums(mu_leaves))


def average(f: np.ndarray, m: MeasurePair, which: str, node: int) -> float:
    leaves = m.tree.leaf_range(node)
    mu = m.leaves(which)[leaves.start : leaves.stop]
    total = mu.sum()
    if total == 0:
        return 0.0
    return float(np.dot(np.asarray(f, dtype=float)[leaves.start : leaves.stop], mu) / total)


def active_collection(tree: DyadicTree, lam: np.ndarray, m: MeasurePair) -> np.ndarray:
    """Mask of the contributing cubes: lambda > 0, sigma(Q) > 0, omega(Q) > 0."""
    lam = np.asarray(lam, dtype=float)
    return (lam > 0) & (m.sigma > 0) & (m.omega > 0)


def localized_sum(tree: DyadicTree, lam: np.ndarray, node: int) -> np.ndarray:
    """Leaf values of ``rho_Q = sum_{R subseteq Q} lam_R 1_R`` on the leaves of ``Q``."""
    lam = np.asarray(lam, dtype=float)
    k, pos = tree.level_and_position(node)
    width = tree.branching ** (tree.depth - k)
    out = np.zeros(width)
    # walk down the subtree one level at a time
    for j in range(k, tree.depth + 1):
        sub = tree.branching ** (j - k)
        vals = lam[tree.offset(j) + pos * sub : tree.offset(j) + (pos + 1) * sub]
        out += np.repeat(vals, width // sub)
    return out


@dataclass(frozen=True)
class Instance:
    """A tree with coefficients, two measures and exponents."""

    tree: DyadicTree
    lam: np.ndarray
    measures: MeasurePair
    exponents: ExponentConfig

    def __post_init__(self):
        lam = np.array(self.lam, dtype=float)
        if lam.shape != (self.tree.n_nodes,):
            raise ValueError(f"lambda has {lam.size} entries, expected {self.tree.n_nodes}")
        if not np.all(np.isfinite(lam)) or np.any(lam < 0):
            raise ValueError("lambda must be finite and nonnegative")
        lam.setflags(write=False)
        object.__setattr__(self, "lam", lam)
        if self.measures.tree != self.tree:
            raise ValueError("measures live on a different tree")

    @classmethod
    def from_arrays(cls, branching, depth, lam, sigma_leaves, omega_leaves, p=2.0, q=0.5, gamma=1.0):
        tree = build_tree(branching, depth)
        return cls(tree, lam, MeasurePair(tree, sigma_leaves, omega_leaves), ExponentConfig(p, q, gamma))

    @property
    def sigma(self) -> np.ndarray:
        return self.measures.sigma

    @property
    def omega(self) -> np.ndarray:
        return self.measures.omega

    @property
    def sigma_leaves(self) -> np.ndarray:
        return self.measures.sigma_leaves

    @property
    def omega_leaves(self) -> np.ndarray:
        return self.measures.omega_leaves

    @cached_property
    def active(self) -> np.ndarray:
        mask = active_collection(self.tree, self.lam, self.measures)
        mask.setflags(write=False)
        return mask

    @cached_property
    def lam_active(self) -> np.ndarray:
        """lambda with every cube outside the active collection zeroed."""
        out = np.where(self.active, self.lam, 0.0)
        out.setflags(write=False)
        return out

    @cached_property
    def covered_leaves(self) -> np.ndarray:
        """Leaves lying in at least one active cube."""
        return self.tree.path_max(self.active.astype(float)) > 0

    @cached_property
    def density_ratio(self) -> np.ndarray:
        """omega(Q)/sigma(Q) on active cubes, 0 elsewhere."""
        return np.where(self.active, safe_divide(self.omega, self.sigma), 0.0)

    def with_lambda(self, lam) -> "Instance":
        return Instance(self.tree, lam, self.measures, self.exponents)

    def with_exponents(self, **kw) -> "Instance":
        params = {"p": self.exponents.p, "q": self.exponents.q, "gamma": self.exponents.gamma}
        params.update(kw)
        return Instance(self.tree, self.lam, self.measures, ExponentConfig(**params))

    def with_measures(self, sigma_leaves=None, omega_leaves=None) -> "Instance":
        m = MeasurePair(
            self.tree,
            self.sigma_leaves if sigma_leaves is None else sigma_leaves,
            self.omega_leaves if omega_leaves is None else omega_leaves,
        )
        return Instance(self.tree, self.lam, m, self.exponents)


def random_instance(
    rng: np.random.Generator,
    depth: int,
    branching: int = 2,
    p: float = 2.0,
    q: float = 0.5,
    gamma: float = 1.0,
    zero_prob: float = 0.15,
) -> Instance:
    """Random instance with a nonempty active collection.

    Coefficients and leaf masses are uniform on [0.1, 1] and independently
    zeroed with probability ``zero_prob``; the root coefficient and at least
    one leaf of each measure are kept positive.
    """
    tree = build_tree(branching, depth)

    def draw(n):
        vals = rng.uniform(0.1, 1.0, size=n)
        vals[rng.random(n) < zero_prob] = 0.0
        return vals

    lam = draw(tree.n_nodes)
    lam[0] = rng.uniform(0.1, 1.0)
    sigma = draw(tree.n_leaves)
    omega = draw(tree.n_leaves)
    if sigma.sum() == 0:
        sigma[rng.integers(tree.n_leaves)] = 1.0
    if omega.sum() == 0:
        omega[rng.integers(tree.n_leaves)] = 1.0
    return Instance(tree, lam, MeasurePair(tree, sigma, omega), ExponentConfig(p, q, gamma))
