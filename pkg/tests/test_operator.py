import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import grid_norm, kernel_matrix
from twoweight import Instance, build_tree, random_instance
from twoweight.operator import (
    SolverConfig,
    apply_T,
    apply_T_adjoint,
    domination_sides,
    dual_multiplier_check,
    estimate_norm,
    lp_leaf_norm,
    maximal_function,
    multiplier_norm_sup,
    multiplier_ratio,
    norm_of,
    stein_necessity_check,
    transform_a_to_b,
    transform_b_to_a,
)
from twoweight.wolff import lambda_gamma_all


def single(p=2.0, q=0.5, lam=1.0, sigma=1.0, omega=1.0):
    return Instance.from_arrays(2, 0, [lam], [sigma], [omega], p=p, q=q)


def test_apply_T_single_cube_average():
    inst = Instance.from_arrays(2, 1, [1.0, 0, 0], [0.5, 0.5], [1, 1])
    assert np.allclose(apply_T(inst, np.array([2.0, 0.0])), [1.0, 1.0])


def test_apply_T_of_one_is_root_localized_sum():
    inst = random_instance(np.random.default_rng(1), 3, zero_prob=0.0)
    rho = inst.tree.path_sums(inst.lam_active)
    assert np.allclose(apply_T(inst, np.ones(inst.tree.n_leaves)), rho, rtol=1e-13)


@given(st.integers(0, 10_000))
def test_apply_T_matches_double_loop(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 2)
    f = rng.uniform(0, 1, inst.tree.n_leaves)
    assert np.allclose(apply_T(inst, f), kernel_matrix(inst) @ f, rtol=1e-12, atol=1e-14)


@given(st.integers(0, 10_000))
def test_adjoint_pairing(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 3)
    f = rng.uniform(0, 1, inst.tree.n_leaves)
    g = rng.uniform(0, 1, inst.tree.n_leaves)
    lhs = np.dot(apply_T(inst, f) * g, inst.omega_leaves)
    rhs = np.dot(f * apply_T_adjoint(inst, g), inst.sigma_leaves)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("p,q", [(1.0, 0.5), (1.5, 0.25), (2.0, 0.5), (4.0, 0.9)])
def test_single_cube_norm_is_one(p, q):
    est = estimate_norm(single(p, q))
    assert est.value == pytest.approx(1.0, rel=1e-9)
    assert est.converged


def test_zero_lambda_norm_zero():
    inst = Instance.from_arrays(2, 2, np.zeros(7), np.ones(4), np.ones(4))
    assert estimate_norm(inst).value == 0.0


def test_frozen_depth2_norm():
    # frozen from the sphere-grid oracle (grid_norm, m=60, 10 zoom rounds)
    inst = random_instance(np.random.default_rng(2024), 2)
    est = estimate_norm(inst)
    assert est.value == pytest.approx(2.624263381622154, rel=1e-8)
    assert est.value <= est.upper_bound


@given(st.integers(0, 10_000), st.sampled_from([(1.5, 0.25), (2.0, 0.5), (3.0, 0.75)]))
def test_norm_against_grid_oracle(seed, pq):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 1, p=pq[0], q=pq[1])
    est = estimate_norm(inst)
    ref = grid_norm(inst, m=30, rounds=4)
    assert ref <= est.upper_bound * (1 + 1e-9)
    assert est.value == pytest.approx(ref, rel=0.02)


@given(st.integers(0, 10_000))
def test_norm_dominates_every_test_function(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 3)
    est = estimate_norm(inst)
    for _ in range(5):
        f = rng.uniform(0, 1, inst.tree.n_leaves)
        assert norm_of(inst, f) <= est.upper_bound * (1 + 1e-9)


@given(st.integers(0, 10_000), st.floats(0.1, 10.0))
def test_norm_homogeneous_in_lambda(seed, t):
    inst = random_instance(np.random.default_rng(seed), 2)
    a = estimate_norm(inst).value
    b = estimate_norm(inst.with_lambda(t * inst.lam)).value
    assert b == pytest.approx(t * a, rel=1e-6)


def test_endpoint_p_one():
    inst = random_instance(np.random.default_rng(3), 2, p=1.0, q=0.5)
    est = estimate_norm(inst, SolverConfig(max_iter=5000))
    f = np.zeros(inst.tree.n_leaves)
    best = 0.0
    for x in np.flatnonzero(inst.sigma_leaves > 0):
        f[:] = 0
        f[x] = 1.0
        best = max(best, norm_of(inst, f))
    assert est.value >= best * (1 - 1e-6)


def test_lp_leaf_norm_inf():
    assert lp_leaf_norm(np.array([1.0, 5.0, 3.0]), np.array([1.0, 0.0, 1.0]), math.inf) == 3.0


def test_maximal_function_examples():
    inst = Instance.from_arrays(2, 1, [1, 0, 0], [1.0, 1.0], [1, 1])
    M = maximal_function(inst, np.array([1.0, 0.0]))
    assert M[0] == 1.0 and M[1] == pytest.approx(0.5)
    M = maximal_function(inst, np.full(2, 3.0))
    assert np.allclose(M, 3.0)
    inst = Instance.from_arrays(2, 2, np.ones(7), [0, 2.0, 0, 0], np.ones(4))
    M = maximal_function(inst, np.array([5.0, 7.0, 1.0, 1.0]))
    assert M[1] == 7.0


def test_transforms_root_delta_and_envelope():
    t = build_tree(2, 2)
    b = np.zeros(t.n_nodes)
    b[0] = 2.0
    assert np.allclose(transform_b_to_a(t, b), 2.0)
    a = np.array([3.0, 2.0, 1.0, 1.0, 0.5, 1.0, 0.2])
    bb = transform_a_to_b(t, a)
    assert np.allclose(t.path_sums(bb), t.path_max(a))
    assert np.count_nonzero(bb) == 1


@given(st.integers(0, 10_000))
def test_domination_identities(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 3)
    b = rng.uniform(0, 1, inst.tree.n_nodes)
    rho_b, lam_a, _, _ = domination_sides(inst, b=b)
    assert np.allclose(rho_b, lam_a, rtol=1e-12)
    a = rng.uniform(0, 1, inst.tree.n_nodes)
    _, _, sum_b, sup_a = domination_sides(inst, a=a)
    assert np.allclose(sum_b, sup_a, rtol=1e-12)


def test_multiplier_single_family_and_zero():
    inst = random_instance(np.random.default_rng(4), 2)
    a = np.zeros(inst.tree.n_nodes)
    a[0] = 1.0
    p, q = inst.exponents.p, inst.exponents.q
    expected = inst.lam[0] * inst.omega[0] ** (1 / q) / inst.sigma[0] ** (1 / p)
    assert multiplier_ratio(inst, a) == pytest.approx(expected, rel=1e-13)
    zero = Instance.from_arrays(2, 1, np.zeros(3), np.ones(2), np.ones(2))
    assert multiplier_norm_sup(zero).value == 0.0


@given(st.integers(0, 10_000), st.sampled_from([1.5, 2.0, 3.0]))
def test_multiplier_comparable_to_norm(seed, p):
    inst = random_instance(np.random.default_rng(seed), 2, p=p)
    n = estimate_norm(inst).value
    m = multiplier_norm_sup(inst)
    assert m.value <= n * (1 + 1e-6)
    assert n <= inst.exponents.p_conj * m.value * (1 + 1e-6)


def test_dual_multiplier_single_node():
    p, q = 2.0, 0.5
    inst = single(p, q, lam=2.0, sigma=3.0, omega=5.0)
    chk = dual_multiplier_check(inst, np.array([1.0]))
    mult = 2.0**q * 5.0 / 3.0
    assert chk.lhs == pytest.approx(mult * 3.0 ** ((p - q) / p), rel=1e-13)
    assert chk.rhs == pytest.approx(1.0, rel=1e-13)
    assert chk.sufficient_quantity == pytest.approx(mult ** (p / (p - q)) * 3.0, rel=1e-13)
    z = dual_multiplier_check(inst, np.array([0.0]))
    assert (z.lhs, z.rhs) == (0.0, 0.0)


@given(st.integers(0, 10_000))
def test_dual_multiplier_sufficient_bound(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 3)
    b = rng.uniform(0, 1, inst.tree.n_nodes)
    chk = dual_multiplier_check(inst, b)
    p, q = inst.exponents.p, inst.exponents.q
    assert chk.lhs <= chk.sufficient_quantity ** ((p - q) / p) * chk.rhs * (1 + 1e-9) + 1e-300


def test_stein_check_root_delta_and_zero():
    inst = random_instance(np.random.default_rng(6), 2)
    a = np.zeros(inst.tree.n_nodes)
    a[0] = 1.0
    lhs, rhs = stein_necessity_check(inst, 0.25, a)
    L = lambda_gamma_all(inst, 0.25)[0]
    assert lhs == pytest.approx(L * inst.omega[0] ** (1 / inst.exponents.q), rel=1e-13)
    assert rhs == pytest.approx(inst.sigma[0] ** 0.5, rel=1e-13)
    zero = inst.with_lambda(np.zeros(inst.tree.n_nodes))
    assert stein_necessity_check(zero, 0.25, a)[0] == 0.0
    with pytest.raises(ValueError):
        stein_necessity_check(inst, 0.75, a)


@given(st.integers(0, 10_000))
def test_stein_ratio_bounded_by_norm_multiple(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 2)
    n = estimate_norm(inst).value
    a = rng.uniform(0, 1, inst.tree.n_nodes)
    lhs, rhs = stein_necessity_check(inst, 0.25, a)
    assert lhs <= 20 * n * rhs
