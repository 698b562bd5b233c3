import itertools
import math

import numpy as np
import pytest

from dirkkit.conditions import (
    DEFAULT_ORDER_TOL,
    elementary_weights,
    order_residuals,
    residual,
    stage_order,
    verify_order,
)
from dirkkit.tableau import ButcherTableau, builtin_names, load_builtin
from dirkkit.trees import RootedTree, enumerate_trees

ALL_BUILTINS = list(builtin_names())


def leaf():
    return RootedTree()


def chain(q):
    t = leaf()
    for _ in range(q - 1):
        t = RootedTree([t])
    return t


def midpoint():
    return ButcherTableau("implicit-midpoint", np.array([[0.5]]), np.array([1.0]), 2)


def explicit_euler():
    return ButcherTableau("explicit-euler", np.array([[0.0]]), np.array([1.0]), 1)


@pytest.fixture(scope="module")
def reports():
    return {name: verify_order(load_builtin(name)) for name in ALL_BUILTINS}


# --- elementary weights -----------------------------------------------------


def test_weight_of_single_vertex_is_ones():
    t = load_builtin("DIRK(6,6)A")
    assert np.array_equal(elementary_weights(t, leaf()), np.ones(6))


def test_weight_of_chain_two_is_c():
    for name in ALL_BUILTINS:
        t = load_builtin(name)
        # A @ e equals the row sums up to summation order
        assert np.allclose(elementary_weights(t, chain(2)), t.c, rtol=1e-15, atol=1e-15)


def test_third_order_chain_weight_value():
    t = load_builtin("DIRK(6,6)A")
    # b . Phi(chain of 3) is b^T A c, and the condition value is 1/gamma = 1/6
    val = t.b @ elementary_weights(t, chain(3))
    assert val == pytest.approx(t.b @ (t.A @ t.c), abs=1e-15)
    assert val == pytest.approx(1.0 / 6.0, abs=1e-13)


# --- residuals ----------------------------------------------------------------


def test_explicit_euler_order_two_residual():
    assert residual(explicit_euler(), chain(2)) == pytest.approx(-0.5, abs=0)


def test_midpoint_bushy_order_three_residual():
    bushy3 = RootedTree([leaf(), leaf()])
    # (1/2) * (b.c^2 - 1/3) = (1/4 - 1/3)/2 = -1/24
    assert residual(midpoint(), bushy3) == pytest.approx(-1.0 / 24.0, abs=1e-16)


@pytest.mark.parametrize("name", ALL_BUILTINS)
def test_builtin_residuals_below_tolerance(name, reports):
    rep = reports[name]
    p = rep.declared_order
    assert rep.achieved_order >= p
    assert rep.max_residual_through(p) <= 5e-13


@pytest.mark.parametrize("name", ALL_BUILTINS)
def test_builtins_not_secretly_higher_order(name, reports):
    rep = reports[name]
    beyond = rep.residuals[rep.declared_order + 1]
    assert np.max(np.abs(beyond)) > 1e-6


@pytest.mark.parametrize("name", ALL_BUILTINS)
def test_builtin_stage_order_one(name):
    assert stage_order(load_builtin(name)) == 1


def test_residual_invariant_under_child_permutation():
    t = load_builtin("DIRK(9,7)A")
    a = RootedTree.from_level_sequence([1, 2, 3, 2, 2, 3])
    b = RootedTree.from_level_sequence([1, 2, 2, 3, 2, 3])
    assert a == b
    assert residual(t, a) == residual(t, b)


# --- report fields ------------------------------------------------------------


def test_report_norm_ordering(reports):
    for rep in reports.values():
        for l2, linf in rep.e_norms.values():
            assert 0 <= linf <= l2


def test_report_tolerance_validation():
    with pytest.raises(ValueError):
        verify_order(midpoint(), tol=0.0)


def test_midpoint_report():
    rep = verify_order(midpoint())
    assert rep.achieved_order == 2
    assert rep.stage_order == 1
    assert rep.d_max == 1.0
    # order 3 and 4 norms both present (p + 2 = 4)
    assert set(rep.e_norms) == {3, 4}


def test_report_csv_shape(reports):
    rep = reports["DIRK(6,6)A"]
    lines = rep.to_csv().strip().splitlines()
    assert lines[0] == "order,tree_index,residual"
    # 1+1+2+4+9+20+48+115 trees through order 8
    assert len(lines) - 1 == 200
    assert "DIRK(6,6)A" in rep.summary()


def test_unweighted_norms_differ(reports):
    rep = reports["DIRK(6,6)A"]
    p1 = rep.declared_order + 1
    assert rep.e_norms[p1] != rep.e_norms_unweighted[p1]


# --- brute-force oracle -------------------------------------------------------


def bruteforce_weight(A, b, tree):
    """b . Phi(tree) by explicit summation over all index assignments.

    Each vertex gets a stage index; the weight is the sum over assignments of
    b at the root times a factor A[parent, child] for every edge.
    """
    s = len(b)
    edges = []
    counter = itertools.count()

    def build(node):
        me = next(counter)
        for child in node.children:
            edges.append((me, build(child)))
        return me

    build(tree)
    n = tree.order
    total = 0.0
    for assign in itertools.product(range(s), repeat=n):
        w = b[assign[0]]
        for u, v in edges:
            w *= A[assign[u], assign[v]]
        total += w
    return total


@pytest.mark.parametrize("seed", range(20))
def test_recursive_weights_match_bruteforce(seed):
    rng = np.random.default_rng(seed)
    s = int(rng.integers(1, 4))
    A = rng.uniform(-1, 1, size=(s, s))
    b = rng.uniform(-1, 1, size=s)
    t = ButcherTableau(f"random-{seed}", A, b, 1)
    for q in range(1, 7):
        for tree in enumerate_trees(q):
            direct = float(t.b @ elementary_weights(t, tree))
            brute = bruteforce_weight(A, b, tree)
            assert direct == pytest.approx(brute, abs=1e-14, rel=1e-12)


def test_bruteforce_also_checks_residual_normalization():
    # tie the full residual formula to the oracle on one nontrivial case
    rng = np.random.default_rng(123)
    A = rng.uniform(-1, 1, size=(3, 3))
    b = rng.uniform(-1, 1, size=3)
    t = ButcherTableau("random", A, b, 1)
    tree = RootedTree.from_level_sequence([1, 2, 2, 3])
    expected = (bruteforce_weight(A, b, tree) - 1.0 / tree.gamma) / tree.sigma
    assert residual(t, tree) == pytest.approx(expected, abs=1e-14)
