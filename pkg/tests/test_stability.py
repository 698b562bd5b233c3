import numpy as np
import pytest

from dirkkit.stability import (
    AStabilityVerdict,
    DegenerateStabilityError,
    StabilityConfigError,
    a_stability_check,
    analyze_stability,
    e_consistency,
    e_consistency_samples,
    e_polynomial,
    internal_stability_maxima,
    l_stability_check,
    r_at_infinity,
    scan_data,
    stability_function,
    stability_polynomials,
)
from dirkkit.tableau import ButcherTableau, builtin_names, load_builtin

ALL_BUILTINS = list(builtin_names())
SA_BUILTINS = [n for n in ALL_BUILTINS if n.endswith("SA")]


def midpoint(a=0.5):
    return ButcherTableau("midpoint", np.array([[a]]), np.array([1.0]), 2)


def explicit_euler():
    return ButcherTableau("explicit-euler", np.array([[0.0]]), np.array([1.0]), 1)


# --- P and Q ------------------------------------------------------------------


def test_midpoint_polynomials():
    P, Q = stability_polynomials(midpoint())
    assert P.tolist() == [1.0, 0.5]
    assert Q.tolist() == [1.0, -0.5]


def test_explicit_euler_polynomials():
    P, Q = stability_polynomials(explicit_euler())
    assert P.tolist() == [1.0, 1.0]
    assert Q.tolist() == [1.0]


@pytest.mark.parametrize("name", ALL_BUILTINS)
def test_polynomials_reconstruct_r(name):
    t = load_builtin(name)
    P, Q = stability_polynomials(t)
    assert P[0] == 1.0 and Q[0] == 1.0
    R = stability_function(t)
    rng = np.random.default_rng(7)
    z = -rng.uniform(0.01, 20, 100) + 1j * rng.uniform(-20, 20, 100)
    pv = np.polynomial.polynomial.polyval(z, P)
    qv = np.polynomial.polynomial.polyval(z, Q)
    direct = np.array([R(zz) for zz in z])
    assert np.max(np.abs(pv / qv - direct) / np.abs(direct)) <= 1e-10


@pytest.mark.parametrize("name", SA_BUILTINS)
def test_stiffly_accurate_degree_drop(name):
    P, Q = stability_polynomials(load_builtin(name))
    assert len(P) - 1 <= len(Q) - 2  # deg P < deg Q


def test_interpolation_fallback_general_tableau():
    # two-stage Gauss method: not lower triangular, R is the (2,2) Pade
    # approximant (1 + z/2 + z^2/12) / (1 - z/2 + z^2/12)
    sq = np.sqrt(3.0) / 6.0
    A = np.array([[0.25, 0.25 - sq], [0.25 + sq, 0.25]])
    b = np.array([0.5, 0.5])
    t = ButcherTableau("gauss-4", A, b, 4)
    P, Q = stability_polynomials(t)
    assert np.allclose(P, [1.0, 0.5, 1.0 / 12.0], atol=1e-12)
    assert np.allclose(Q, [1.0, -0.5, 1.0 / 12.0], atol=1e-12)


# --- E polynomial and A-stability ----------------------------------------------


def test_midpoint_e_identically_zero():
    E = e_polynomial(midpoint())
    assert E.tolist() == [0.0]
    verdict = a_stability_check(midpoint())
    assert verdict.a_stable and verdict.margin == 0.0


def test_e_poly_first_coefficient_vanishes():
    for name in ALL_BUILTINS:
        E = e_polynomial(load_builtin(name))
        assert E[0] == 0.0


def test_explicit_euler_not_a_stable():
    # E(w) = -w: |R(iy)|^2 = 1 + y^2
    E = e_polynomial(explicit_euler())
    assert E.tolist() == [0.0, -1.0]
    assert not a_stability_check(explicit_euler())


@pytest.mark.parametrize("name", ALL_BUILTINS)
def test_builtins_a_stable(name):
    verdict = a_stability_check(load_builtin(name))
    assert verdict.a_stable
    assert verdict.margin >= -verdict.tolerance


def test_perturbed_midpoint_verdict_flips_with_half():
    below = a_stability_check(midpoint(0.5 - 1e-4))
    above = a_stability_check(midpoint(0.5 + 1e-4))
    assert not below.a_stable and below.margin < 0
    assert above.a_stable and above.margin > 0


def test_degenerate_pair_rejected():
    # decoupled unused stage: P and Q share the factor (1 - z/2)
    A = np.array([[0.5, 0.0], [0.0, 0.5]])
    t = ButcherTableau("reducible", A, np.array([1.0, 0.0]), 1)
    with pytest.raises(DegenerateStabilityError):
        a_stability_check(t)


def test_verdict_is_truthy():
    assert bool(AStabilityVerdict(True, 0.0, 1e-9))
    assert not bool(AStabilityVerdict(False, -1.0, 1e-9))


@pytest.mark.parametrize("name", ALL_BUILTINS)
def test_r_magnitude_bounded_on_imaginary_axis(name):
    R = stability_function(load_builtin(name))
    y = np.logspace(-3, 6, 2000)
    mags = np.array([abs(R(1j * yy)) for yy in y])
    assert np.max(mags) <= 1.0 + 1e-9


@pytest.mark.parametrize("name", ALL_BUILTINS)
def test_e_two_evaluations_agree(name):
    t = load_builtin(name)
    E = e_polynomial(t)
    P, Q = stability_polynomials(t)
    w = np.logspace(-6, 10, 300)
    y = np.sqrt(w)
    from_coeffs = np.polynomial.polynomial.polyval(w, E)
    qv = np.polynomial.polynomial.polyval(1j * y, Q)
    pv = np.polynomial.polynomial.polyval(1j * y, P)
    direct = np.abs(qv) ** 2 - np.abs(pv) ** 2
    scale = np.polynomial.polynomial.polyval(w, np.abs(E)) + np.max(np.abs(E))
    assert np.max(np.abs(from_coeffs - direct) / scale) <= 1e-10


def test_rounding_robustness_of_r_on_axis():
    # perturbing the coefficients at the last-digit level moves |R(iy)| only
    # at roundoff scale anywhere on the axis
    t = load_builtin("DIRK(13,8)A")
    rng = np.random.default_rng(42)
    A = t.A + np.tril(rng.uniform(-1e-13, 1e-13, t.A.shape))
    b = t.b + rng.uniform(-1e-13, 1e-13, t.s)
    tp = ButcherTableau("perturbed", A, b, t.declared_order)
    R, Rp = stability_function(t), stability_function(tp)
    y = np.logspace(-3, 6, 500)
    diff = np.array([abs(abs(R(1j * yy)) - abs(Rp(1j * yy))) for yy in y])
    assert np.max(diff) <= 1e-9


# --- L-stability -----------------------------------------------------------------


@pytest.mark.parametrize("name", SA_BUILTINS)
def test_sa_builtins_l_stable(name):
    res = l_stability_check(load_builtin(name))
    assert abs(res.r_inf) <= 1e-12
    assert res.l_stable


def test_midpoint_r_infinity():
    res = l_stability_check(midpoint())
    assert res.r_inf == pytest.approx(-1.0, abs=1e-14)
    assert not res.l_stable


def test_dirk_9_7_r_infinity_matches_direct_formula():
    t = load_builtin("DIRK(9,7)A")
    expected = 1.0 - t.b @ np.linalg.solve(t.A, np.ones(t.s))
    assert r_at_infinity(t) == pytest.approx(expected, rel=1e-9)
    assert abs(expected) > 1e-3  # genuinely not L-stable
    res = l_stability_check(t)
    assert not res.l_stable


def test_r_infinity_zero_diagonal_via_degrees():
    assert r_at_infinity(explicit_euler()) == np.inf


# --- internal stability -----------------------------------------------------------


def test_internal_maxima_single_stage():
    res = internal_stability_maxima(midpoint(), points_per_decade=200)
    assert res.max_R == pytest.approx(1.0, abs=1e-9)
    assert res.max_Q == pytest.approx(1.0, abs=1e-9)


def test_internal_maxima_rejects_zero_diagonal():
    with pytest.raises(StabilityConfigError):
        internal_stability_maxima(explicit_euler())
    sq = np.sqrt(3.0) / 6.0
    gauss = ButcherTableau(
        "gauss", np.array([[0.25, 0.25 - sq], [0.25 + sq, 0.25]]), np.array([0.5, 0.5]), 4
    )
    with pytest.raises(StabilityConfigError):
        internal_stability_maxima(gauss)


def test_internal_maxima_against_dense_solver():
    t = load_builtin("DIRK(8,6)SA")
    res = internal_stability_maxima(t, points_per_decade=500)
    # oracle: dense complex solves on an independent grid
    y = np.logspace(-2, 3, 20001)
    best_r = best_q = 0.0
    eye = np.eye(t.s)
    for yy in y:
        M = eye - 1j * yy * t.A
        best_r = max(best_r, np.max(np.abs(np.linalg.solve(M, np.ones(t.s)))))
        best_q = max(best_q, np.max(np.abs(np.linalg.solve(M.T, t.b))))
    assert res.max_R == pytest.approx(best_r, abs=2e-4)
    assert res.max_Q == pytest.approx(best_q, abs=2e-4)


# --- e-consistency ------------------------------------------------------------------


def test_midpoint_e_consistency_order_two():
    res = e_consistency(midpoint())
    assert res.order == 2
    assert res.taylor_defects[3] == pytest.approx(1.0 / 6.0 - 1.0 / 4.0, abs=1e-16)


def test_explicit_euler_e_consistency_order_one():
    assert e_consistency(explicit_euler()).order == 1


@pytest.mark.parametrize("name", ALL_BUILTINS)
def test_builtin_e_consistency_at_least_declared(name):
    t = load_builtin(name)
    assert e_consistency(t).order >= t.declared_order


def test_e_consistency_term_cap():
    with pytest.raises(ValueError):
        e_consistency(midpoint(), n_terms=26)


def test_e_consistency_samples_small_and_large():
    t = midpoint()
    # at z = -0.1 the defect is dominated by the z^3 term: |eps| ~ |d3| * 1e-3
    small = e_consistency_samples(t, np.array([-0.1 + 0j]))[0]
    assert small == pytest.approx(abs(-1.0 / 12.0) * 1e-3, rel=0.2)
    big = e_consistency_samples(t, np.array([-50.0 + 0j]))[0]
    # R(-50) = (1 - 25)/(1 + 25), exp(-50) negligible
    assert big == pytest.approx(24.0 / 26.0, rel=1e-6)


# --- aggregate report ----------------------------------------------------------------


def test_analyze_stability_report():
    rep = analyze_stability(load_builtin("DIRK(8,6)SA"), internal_points_per_decade=200)
    assert rep.a_stable and rep.l_stable
    assert rep.r_at_infinity == 0.0
    assert rep.e_consistency_order >= 6
    assert rep.internal_max_R == pytest.approx(5.38, abs=0.02)
    assert "A-stable" in rep.summary()


def test_analyze_stability_handles_unsupported_internal():
    rep = analyze_stability(explicit_euler())
    assert rep.internal_max_R is None and rep.internal_max_Q is None
    assert not rep.a_stable


def test_scan_data_kinds():
    t = midpoint()
    rows = scan_data(t, "r-magnitude", 1e-2, 1e2, 16)
    assert len(rows) == 16 and all(v <= 1.0 + 1e-12 for _, v in rows)
    rows = scan_data(t, "e-poly", 1e-2, 1e2, 8)
    assert all(v == 0.0 for _, v in rows)
    rows = scan_data(t, "e-consistency", 1e-1, 1e1, 8)
    assert all(v >= 0.0 for _, v in rows)
    with pytest.raises(ValueError):
        scan_data(t, "nope", 1, 2, 3)
