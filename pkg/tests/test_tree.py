import numpy as np
import pytest
from hypothesis import given, strategies as st

from twoweight.tree import (
    DyadicTree,
    ExponentConfig,
    Instance,
    MeasurePair,
    TreeTooLarge,
    active_collection,
    average,
    build_tree,
    localized_sum,
    node_measure,
    random_instance,
)


def test_build_tree_counts():
    assert build_tree(2, 0).n_nodes == 1
    t = build_tree(2, 2)
    assert (t.n_nodes, t.n_leaves) == (7, 4)
    assert build_tree(4, 3).n_nodes == 85


def test_node_cap_error_names_cap():
    with pytest.raises(TreeTooLarge, match="1000"):
        DyadicTree(2, 12, node_cap=1000)


@pytest.mark.parametrize("b,depth", [(2, 3), (3, 2), (4, 2)])
def test_addressing_roundtrip(b, depth):
    t = build_tree(b, depth)
    for node in range(t.n_nodes):
        assert t.node_index(t.path(node)) == node
        for c in t.children(node):
            assert t.parent(c) == node
        if t.node_level[node] < depth:
            assert len(t.children(node)) == b
    assert t.node_index("") == 0


def test_node_measure_examples():
    t = build_tree(2, 1)
    m = MeasurePair(t, [0.5, 0.5], [1, 1])
    assert node_measure(m, "sigma", 0) == 1.0
    assert node_measure(m, "sigma", t.leaf_node(1)) == 0.5
    t2 = build_tree(2, 2)
    m2 = MeasurePair(t2, np.ones(4), [1, 2, 3, 4])
    assert node_measure(m2, "omega", t2.node_index("0")) == 3.0


def test_measure_validation():
    t = build_tree(2, 1)
    with pytest.raises(ValueError, match="leaves"):
        MeasurePair(t, [1, 1, 1], [1, 1])
    with pytest.raises(ValueError, match="nonnegative"):
        MeasurePair(t, [1, -1], [1, 1])


def test_active_collection_examples():
    t = build_tree(2, 2)
    m = MeasurePair(t, np.ones(4), np.ones(4))
    assert not active_collection(t, np.zeros(7), m).any()
    lam = np.zeros(7)
    lam[0] = 1
    assert np.flatnonzero(active_collection(t, lam, m)).tolist() == [0]
    m2 = MeasurePair(t, np.ones(4), [1, 1, 0, 0])
    act = active_collection(t, np.ones(7), m2)
    assert sorted(t.path_str(n) for n in np.flatnonzero(act)) == ["", "0", "00", "01"]


def test_localized_sum_examples():
    t = build_tree(2, 2)
    lam = np.zeros(7)
    lam[0] = 1
    assert np.array_equal(localized_sum(t, lam, 0), np.ones(4))
    assert np.allclose(localized_sum(t, np.full(7, 0.7), 0), 2.1)
    lam = np.arange(7.0)
    leaf = t.leaf_node(2)
    assert localized_sum(t, lam, leaf).tolist() == [lam[leaf]]


def test_average_examples():
    t = build_tree(2, 1)
    m = MeasurePair(t, [0.5, 0.5], [0, 0])
    assert average(np.full(2, 3.0), m, "sigma", 0) == 3.0
    assert average(np.array([2.0, 0.0]), m, "sigma", 0) == 1.0
    assert average(np.array([2.0, 1.0]), m, "omega", 0) == 0.0


def test_exponent_config():
    e = ExponentConfig(2.0, 0.5)
    assert e.p_conj == 2.0
    assert e.wolff_exponent == pytest.approx(1 / 3)
    assert e.omega_exponent == 1.0
    assert e.dual_exponent == pytest.approx(4 / 3)
    assert ExponentConfig(1.0, 0.5).p_conj == np.inf
    for bad in [(0.5, 0.5), (2.0, 1.0), (2.0, 0.0)]:
        with pytest.raises(ValueError):
            ExponentConfig(*bad)


def brute_localized(t, lam, node):
    leaves = t.leaf_range(node)
    out = []
    for x in leaves:
        chain = t.ancestors(t.leaf_node(x))
        k = chain.index(node)
        out.append(sum(lam[r] for r in chain[k:]))
    return np.array(out)


@given(st.integers(0, 10_000), st.integers(0, 4), st.sampled_from([2, 3]))
def test_sweeps_match_brute_force(seed, depth, b):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, depth, branching=b)
    t, lam = inst.tree, inst.lam
    M = t.leaf_ancestor_matrix()
    # additivity is exact
    for node in range(t.n_nodes):
        kids = t.children(node)
        if kids:
            assert inst.sigma[node] == sum(inst.sigma[c] for c in kids) or np.isclose(
                inst.sigma[node], sum(inst.sigma[c] for c in kids), rtol=1e-15
            )
    assert np.allclose(t.path_sums(lam), M @ lam)
    for node in range(t.n_nodes):
        assert np.allclose(localized_sum(t, lam, node), brute_localized(t, lam, node))
    # level-blocked localized sums agree with the per-node routine
    for k, rho in t.localized_levels(lam):
        for i in range(rho.shape[0]):
            assert np.allclose(rho[i], localized_sum(t, lam, t.offset(k) + i))


@given(st.integers(0, 10_000), st.integers(1, 4))
def test_localized_sum_telescopes(seed, depth):
    rng = np.random.default_rng(seed)
    t = build_tree(2, depth)
    lam = rng.random(t.n_nodes)
    for node in range(t.n_nodes):
        kids = t.children(node)
        rho = localized_sum(t, lam, node)
        width = len(rho) // 2 if kids else 0
        for i, c in enumerate(kids):
            diff = rho[i * width : (i + 1) * width] - localized_sum(t, lam, c)
            assert np.allclose(diff, lam[node])


@given(st.integers(0, 10_000), st.integers(0, 3))
def test_active_collection_monotone(seed, depth):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, depth)
    bigger = inst.with_measures(
        inst.sigma_leaves + rng.random(inst.tree.n_leaves) * (rng.random() < 0.5),
        inst.omega_leaves + rng.random(inst.tree.n_leaves),
    ).with_lambda(inst.lam + rng.random(inst.tree.n_nodes))
    assert np.all(bigger.active >= inst.active)


def test_measures_monotone_along_paths(rng):
    inst = random_instance(rng, 4)
    t = inst.tree
    for node in range(1, t.n_nodes):
        assert inst.sigma[node] <= inst.sigma[t.parent(node)]
        assert inst.omega[node] <= inst.omega[t.parent(node)]


def test_instance_rejects_bad_lambda():
    t = build_tree(2, 1)
    m = MeasurePair(t, [1, 1], [1, 1])
    with pytest.raises(ValueError):
        Instance(t, [1, 1], m, ExponentConfig(2, 0.5))
    with pytest.raises(ValueError):
        Instance(t, [1, -1, 1], m, ExponentConfig(2, 0.5))
