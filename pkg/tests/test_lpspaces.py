import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import brute_lp_norm
from twoweight import build_tree, random_instance
from twoweight.lpspaces import (
    FNormSpec,
    NormWarning,
    conjugate,
    core_split,
    equivalent_expressions_ratio,
    f_factorize,
    f_norm,
    f_norm_dual,
    f_norm_scaling_check,
    lp_norm,
    summation_by_parts_expressions,
    summation_by_parts_ratio,
)
from twoweight.tree import MeasurePair

INF = math.inf


def pair(depth, sigma=None, omega=None):
    t = build_tree(2, depth)
    n = t.n_leaves
    return MeasurePair(t, np.ones(n) if sigma is None else sigma, np.ones(n) if omega is None else omega)


def test_spec_validation_and_regime():
    assert FNormSpec(2, INF).regime == "finite-inf"
    assert FNormSpec(INF, 2).regime == "inf-finite"
    with pytest.raises(ValueError):
        FNormSpec(0, 1)
    with pytest.raises(ValueError):
        FNormSpec(1, 0)
    with pytest.raises(ValueError):
        FNormSpec(1, 1, measure="lebesgue")


def test_root_only_square_root_two():
    m = pair(1)
    a = np.array([1.0, 0, 0])
    assert lp_norm(m.tree, a, 2, 1, m.omega_leaves) == pytest.approx(math.sqrt(2), rel=1e-15)


def test_single_cube_carleson():
    t = build_tree(2, 0)
    assert lp_norm(t, np.array([1.0]), INF, 3, np.array([5.0])) == pytest.approx(1.0, rel=1e-15)


def test_sup_inner_exponent():
    m = pair(1)
    assert lp_norm(m.tree, np.array([2.0, 1.0, 0.0]), 1, INF, m.omega_leaves) == 4.0


def test_f_norm_uses_named_measure():
    m = pair(1, sigma=np.array([1.0, 3.0]))
    a = np.array([1.0, 0, 0])
    assert f_norm(a, FNormSpec(1, 1, "sigma"), m) == pytest.approx(4.0)
    assert f_norm(a, FNormSpec(1, 1, "omega"), m) == pytest.approx(2.0)


def test_negative_inner_exponent_zero_coefficient_is_infinite():
    m = pair(1)
    with pytest.warns(NormWarning):
        v = lp_norm(m.tree, np.array([1.0, 0.0, 1.0]), 1, -1, m.omega_leaves)
    assert v == INF


def test_frozen_mixed_norm():
    # frozen from the leaf-loop oracle
    inst = random_instance(np.random.default_rng(2024), 2)
    a = np.linspace(0.5, 2.0, inst.tree.n_nodes)
    assert lp_norm(inst.tree, a, 2, 1.5, inst.omega_leaves) == pytest.approx(3.0975661095017184, rel=1e-13)


@given(st.integers(0, 10_000), st.sampled_from([(1.0, 1.0), (2.0, 1.5), (0.5, 3.0), (3.0, 0.7)]))
def test_matches_leaf_loop_oracle(seed, rs):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 2)
    a = rng.uniform(0, 2, inst.tree.n_nodes)
    ref = brute_lp_norm(inst.tree, a, *rs, inst.omega_leaves)
    assert lp_norm(inst.tree, a, *rs, inst.omega_leaves) == pytest.approx(ref, rel=1e-12)


def test_scaling_identity_examples():
    m = pair(2)
    a = np.random.default_rng(0).uniform(0, 1, m.tree.n_nodes)
    assert f_norm_scaling_check(a, 2, 3, 1.0, m) == 1.0
    t = build_tree(2, 0)
    single = MeasurePair(t, [1.0], [1.0])
    assert f_norm_scaling_check(np.array([4.0]), 1, 1, 0.5, single) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        f_norm_scaling_check(a, 1, 1, 0.0, m)


@given(st.integers(0, 10_000), st.floats(0.2, 4.0), st.sampled_from([(1.0, 1.0), (2.0, 0.5), (INF, 2.0), (3.0, INF)]))
def test_scaling_identity_property(seed, t, rs):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 3)
    a = rng.uniform(0, 2, inst.tree.n_nodes)
    assert f_norm_scaling_check(a, *rs, t, inst.measures) == pytest.approx(1.0, abs=1e-12)


@given(st.integers(0, 10_000), st.floats(0.1, 10.0))
def test_positive_homogeneity(seed, t):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 2)
    a = rng.uniform(0, 2, inst.tree.n_nodes)
    for rs in ((2.0, 1.0), (INF, 2.0), (1.5, INF)):
        n1 = lp_norm(inst.tree, t * a, *rs, inst.omega_leaves)
        assert n1 == pytest.approx(t * lp_norm(inst.tree, a, *rs, inst.omega_leaves), rel=1e-12)


def test_conjugate():
    assert conjugate(2) == 2
    assert conjugate(1) == INF
    assert conjugate(INF) == 1
    assert conjugate(3) == pytest.approx(1.5)


def test_dual_single_node():
    t = build_tree(2, 0)
    m = MeasurePair(t, [1.0], [1.0])
    res = f_norm_dual(np.array([3.0]), 2, 2, m)
    assert res.value == pytest.approx(3.0, rel=1e-6)
    assert f_norm_dual(np.array([0.0]), 2, 2, m).value == 0.0


def test_dual_comparable_to_direct_norm():
    rng = np.random.default_rng(5)
    ratios = []
    for _ in range(5):
        inst = random_instance(rng, 2)
        a = rng.uniform(0.1, 1.0, inst.tree.n_nodes)
        d = f_norm_dual(a, 2, 1, inst.measures, restarts=4, max_iter=3000).value
        n = lp_norm(inst.tree, a, 2, 1, inst.omega_leaves)
        ratios.append(d / n)
    assert 0.2 <= min(ratios) and max(ratios) <= 5


def test_factorize_zero_and_trivial_split():
    m = pair(2)
    z = f_factorize(np.zeros(m.tree.n_nodes), (1, 1), (2, 2), (2, 2), m)
    assert np.all(z.a * z.b == 0)
    c = np.random.default_rng(1).uniform(0.1, 1, m.tree.n_nodes)
    f = f_factorize(c, (1, 1), (2, 2), (2, 2), m)
    assert np.allclose(f.a * f.b, c, rtol=1e-12)
    assert f.constant == pytest.approx(1.0, rel=1e-9)


def test_factorize_holder_relation_checked():
    m = pair(1)
    with pytest.raises(ValueError, match="Hoelder"):
        f_factorize(np.ones(3), (1, 1), (2, 2), (3, 2), m)


def test_factorize_mixed_split_constant():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(5):
        inst = random_instance(rng, 3)
        c = rng.uniform(0.05, 1, inst.tree.n_nodes)
        f = f_factorize(c, (1, 1.5), (1.5, 1.5), (3, INF), inst.measures)
        assert np.allclose(f.a * f.b, c, rtol=1e-10)
        worst = max(worst, f.constant)
    assert worst <= 10


def test_core_split_product():
    inst = random_instance(np.random.default_rng(3), 3)
    c = np.random.default_rng(4).uniform(0, 1, inst.tree.n_nodes)
    A, B = core_split(inst.tree, c, 2.0, 1.0, inst.omega_leaves)
    assert np.allclose(A * B, c, rtol=1e-12)


def test_summation_by_parts_single_node_and_p1():
    t = build_tree(2, 0)
    m = MeasurePair(t, [2.0], [3.0])
    assert summation_by_parts_ratio(np.array([1.5]), 2.5, m) == (1.0, 1.0)
    assert equivalent_expressions_ratio(np.array([1.5]), 2.5, m) == (1.0, 1.0)
    inst = random_instance(np.random.default_rng(8), 3)
    e = summation_by_parts_expressions(inst.tree, inst.lam, 1.0, inst.omega_leaves)
    assert e[0] == pytest.approx(e[1], rel=1e-12)


def test_root_supported_family_ratios_one():
    inst = random_instance(np.random.default_rng(9), 3)
    a = np.zeros(inst.tree.n_nodes)
    a[0] = 2.0
    assert equivalent_expressions_ratio(a, 1.5, inst.measures) == pytest.approx((1.0, 1.0))


@given(st.integers(0, 10_000))
def test_summation_by_parts_bracket(seed):
    inst = random_instance(np.random.default_rng(seed), 4)
    lo, hi = summation_by_parts_ratio(inst.lam, 2.0, inst.measures)
    assert 0.5 <= lo <= hi <= 2.0
