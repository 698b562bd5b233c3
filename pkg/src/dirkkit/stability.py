"""Linear stability analysis: R(z) = P(z)/Q(z) and everything built on it.

Applied to y' = lam*y, one step of a Runge-Kutta method multiplies the
solution by the rational stability function

    R(z) = 1 + z b^T (I - zA)^{-1} e = P(z) / Q(z),        z = lam*dt.

A-stability (|R| <= 1 on the closed left half-plane) is decided through the
real polynomial E(w) = |Q(iy)|^2 - |P(iy)|^2 with w = y^2: the method is
A-stable iff E is nonnegative for all w >= 0.  For lower-triangular A the
polynomials are computed in exact rational arithmetic (the float coefficients
are dyadic rationals), so E carries no roundoff beyond the final rounding of
its coefficients; general tableaus fall back to interpolation at Chebyshev
sample points.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .tableau import ButcherTableau

#: Relative tolerance on E(w) >= 0; absorbs the 16-digit rounding of published
#: coefficients, which can turn exact tangencies into roundoff-level dips.
A_STABILITY_RTOL = 1e-9

#: Coefficients smaller than this times the largest one are snapped to zero.
COEFF_SNAP_RTOL = 1e-14

#: |R(inf)| at or below this counts as L-stable.
L_STABILITY_TOL = 1e-12


class DegenerateStabilityError(ValueError):
    """P and Q share a root; the stability function is reducible."""


class StabilityConfigError(ValueError):
    """Tableau shape not supported by the requested analysis."""


# --- exact polynomial arithmetic over Fraction coefficients -----------------


def _pmul(p: list[Fraction], q: list[Fraction]) -> list[Fraction]:
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, pi in enumerate(p):
        if pi:
            for j, qj in enumerate(q):
                out[i + j] += pi * qj
    return out


def _padd(p: list[Fraction], q: list[Fraction]) -> list[Fraction]:
    out = list(p) + [Fraction(0)] * (len(q) - len(p))
    for j, qj in enumerate(q):
        out[j] += qj
    return out


def _stability_polynomials_exact(
    A: np.ndarray, b: np.ndarray
) -> tuple[list[Fraction], list[Fraction]]:
    # Forward substitution on (I - zA)u = e carried out over polynomials:
    # with prefix products pref_i = prod_{k<=i} (1 - z a_kk), the scaled stage
    # vectors V_i = u_i * pref_i satisfy
    #   V_i = pref_{i-1} + z * sum_{j<i} a_ij V_j prod_{j<k<i} (1 - z a_kk)
    # and P = Q + z * sum_j b_j V_j prod_{k>j} (1 - z a_kk).  Exact because A
    # is lower triangular and every float is a dyadic rational.
    s = len(b)
    Af = [[Fraction(A[i, j]) for j in range(s)] for i in range(s)]
    bf = [Fraction(b[i]) for i in range(s)]
    lin = [[Fraction(1), -Af[i][i]] for i in range(s)]  # 1 - z a_ii

    pref = [[Fraction(1)]]
    for i in range(s):
        pref.append(_pmul(pref[-1], lin[i]))

    def mid(j: int, i: int) -> list[Fraction]:
        out = [Fraction(1)]
        for k in range(j + 1, i):
            out = _pmul(out, lin[k])
        return out

    V: list[list[Fraction]] = []
    for i in range(s):
        acc = list(pref[i])
        for j in range(i):
            if Af[i][j]:
                term = _pmul([Fraction(0), Af[i][j]], _pmul(V[j], mid(j, i)))
                acc = _padd(acc, term)
        V.append(acc)

    P = list(pref[s])
    for j in range(s):
        if bf[j]:
            term = _pmul([Fraction(0), bf[j]], _pmul(V[j], mid(j, s)))
            P = _padd(P, term)
    return P, pref[s]


def _snap(coeffs: np.ndarray) -> np.ndarray:
    # interpolation-noise cleanup; never applied to exactly computed
    # coefficients, whose genuinely tiny entries (products of small diagonal
    # values) control the behavior at large |z|
    if coeffs.size == 0 or np.max(np.abs(coeffs)) == 0.0:
        return np.zeros(1)
    out = np.where(np.abs(coeffs) < COEFF_SNAP_RTOL * np.max(np.abs(coeffs)), 0.0, coeffs)
    nz = np.nonzero(out)[0]
    return out[: nz[-1] + 1]


def _from_exact(coeffs: list[Fraction]) -> np.ndarray:
    # exact zeros stay exact through float conversion; only trim the tail
    arr = np.array([float(c) for c in coeffs])
    nz = np.nonzero(arr)[0]
    return arr[: nz[-1] + 1] if nz.size else np.zeros(1)


def _is_lower_triangular(A: np.ndarray) -> bool:
    return bool(np.all(np.triu(A, k=1) == 0.0))


def stability_function(t: ButcherTableau):
    """R as a callable on complex points, evaluated through the resolvent."""
    A, b = t.A, t.b
    e = np.ones(t.s)

    def R(z: complex) -> complex:
        u = np.linalg.solve(np.eye(t.s) - z * A, e)
        return 1.0 + z * (b @ u)

    return R


def _stability_polynomials_interp(t: ButcherTableau) -> tuple[np.ndarray, np.ndarray]:
    # General-tableau fallback: interpolate P = R*Q and Q = det(I - zA) at
    # s+1 Chebyshev points on [-2, 2], nudging any point that lands on a pole.
    s = t.s
    R = stability_function(t)
    k = np.arange(s + 1)
    pts = 2.0 * np.cos(np.pi * (2 * k + 1) / (2 * (s + 1)))
    poles = [1.0 / d for d in np.diag(t.A) if d != 0.0]
    for i, z in enumerate(pts):
        while any(abs(z - pole) < 1e-6 for pole in poles):
            z += 1e-4
        pts[i] = z
    qv = np.array([np.linalg.det(np.eye(s) - z * t.A) for z in pts])
    pv = np.array([R(z).real * q for z, q in zip(pts, qv)])
    P = np.polynomial.polynomial.polyfit(pts, pv, s)
    Q = np.polynomial.polynomial.polyfit(pts, qv, s)
    return _snap(P), _snap(Q)


def stability_polynomials(t: ButcherTableau) -> tuple[np.ndarray, np.ndarray]:
    """Numerator and denominator coefficients of R(z), ascending powers.

    Lower-triangular A (any DIRK, or explicit methods) goes through the exact
    rational path, where stiff accuracy cancels the leading P coefficient
    identically and deg P < deg Q holds exactly.  General tableaus go through
    sample-point interpolation, with coefficients below ``COEFF_SNAP_RTOL``
    of the largest snapped to zero.
    """
    if _is_lower_triangular(t.A):
        P, Q = _stability_polynomials_exact(t.A, t.b)
        return _from_exact(P), _from_exact(Q)
    return _stability_polynomials_interp(t)


# --- the E polynomial and A-stability ----------------------------------------


def _half_squares(coeffs: list[Fraction]) -> tuple[list[Fraction], list[Fraction]]:
    # Q(iy) = Qe(w) + iy*Qo(w) with w = y^2:
    # Qe_j = (-1)^j q_{2j}, Qo_j = (-1)^j q_{2j+1}
    even = [c if j % 2 == 0 else -c for j, c in enumerate(coeffs[0::2])]
    odd = [c if j % 2 == 0 else -c for j, c in enumerate(coeffs[1::2])]
    return even or [Fraction(0)], odd or [Fraction(0)]


def e_polynomial_exact(
    P: list[Fraction], Q: list[Fraction]
) -> list[Fraction]:
    """E(w) = |Q(iy)|^2 - |P(iy)|^2 as an exact polynomial in w = y^2."""
    qe, qo = _half_squares(Q)
    pe, po = _half_squares(P)
    e = _padd(_pmul(qe, qe), [Fraction(0)] + _pmul(qo, qo))
    e = _padd(e, [-c for c in _pmul(pe, pe)])
    e = _padd(e, [Fraction(0)] + [-c for c in _pmul(po, po)])
    return e


def e_polynomial(t: ButcherTableau) -> np.ndarray:
    """Float coefficients of E(w) for the tableau (exact path when triangular)."""
    if _is_lower_triangular(t.A):
        P, Q = _stability_polynomials_exact(t.A, t.b)
        return _from_exact(e_polynomial_exact(P, Q))
    P, Q = _stability_polynomials_interp(t)
    e = e_polynomial_exact(
        [Fraction(c) for c in P], [Fraction(c) for c in Q]
    )
    return _snap(np.array([float(c) for c in e]))


def _check_nondegenerate(P: np.ndarray, Q: np.ndarray) -> None:
    if len(P) < 2 or len(Q) < 2:
        return
    rp = np.polynomial.polynomial.polyroots(P)
    rq = np.polynomial.polynomial.polyroots(Q)
    for zp in rp:
        for zq in rq:
            if abs(zp - zq) < 1e-10 * max(1.0, abs(zp)):
                raise DegenerateStabilityError(
                    f"P and Q share a root near {zp:.6g}; "
                    "the stability function is degenerate"
                )


@dataclass(frozen=True)
class AStabilityVerdict:
    """Outcome of the E-polynomial nonnegativity test.

    ``margin`` is the most negative scaled value of E seen over the scan and
    the near-root probes, normalized by the polynomial's magnitude scale at
    each point; nonnegative margins mean no violation at all.
    """

    a_stable: bool
    margin: float
    tolerance: float

    def __bool__(self) -> bool:  # allows `if a_stability_check(t): ...`
        return self.a_stable


def _scaled_e_min(E: np.ndarray, w: np.ndarray) -> float:
    vals = np.polynomial.polynomial.polyval(w, E)
    scale = np.polynomial.polynomial.polyval(w, np.abs(E)) + np.max(np.abs(E))
    return float(np.min(vals / scale))


def a_stability_check(t: ButcherTableau) -> AStabilityVerdict:
    """Decide A-stability from E(w) >= 0 for all w >= 0.

    The verdict combines (a) a parity check that every positive real root of
    E has even multiplicity (tangency, not crossing) and (b) a dense
    log-spaced scan over w in [1e-8, 1e16] with probes around each candidate
    root, all compared against a relative tolerance that absorbs coefficient
    rounding.

    Raises
    ------
    DegenerateStabilityError
        If P and Q share a root; the E test assumes a nondegenerate R.
    """
    P, Q = stability_polynomials(t)
    _check_nondegenerate(P, Q)
    E = e_polynomial(t)

    if len(E) == 1 and E[0] == 0.0:
        # |R(iy)| identically 1, e.g. the implicit midpoint rule
        return AStabilityVerdict(True, 0.0, A_STABILITY_RTOL)

    # Factor out the exact zero at w = 0 (the coefficients through the
    # consistency order vanish identically); keeping it would scatter a
    # spurious root cluster around the origin in the companion eigenvalues.
    m = int(np.nonzero(E)[0][0])
    reduced = E[m:]

    # E -> -inf as w grows forces violation regardless of roots
    lead_ok = reduced[-1] > 0.0

    if len(reduced) > 1:
        roots = np.polynomial.polynomial.polyroots(reduced)
    else:
        roots = np.array([])
    candidates = [
        r.real
        for r in roots
        if r.real > 0.0 and abs(r.imag) <= 1e-7 * abs(r)
    ]

    # Cluster the candidate roots.  A root of even multiplicity is a
    # tangency; an odd one is a sign crossing.  Published coefficients are
    # rounded to 16 digits, which perturbs exact tangencies (and the exactly
    # vanishing low-order coefficients) into sign crossings with dips many
    # orders below the polynomial's scale, so multiplicity is adjudicated by
    # probing E around each cluster at tolerance scale rather than by
    # counting: a crossing only disqualifies if the dip is material.
    clusters: list[list[float]] = []
    for r in sorted(candidates):
        if clusters and abs(r - clusters[-1][0]) <= 1e-6 * max(1.0, abs(r)):
            clusters[-1].append(r)
        else:
            clusters.append([r])

    w_scan = np.logspace(-8, 16, 4801)
    probes = [w_scan]
    for cluster in clusters:
        w0 = cluster[0]
        probes.append(w0 * np.array([1 - 1e-2, 1 - 1e-4, 1.0, 1 + 1e-4, 1 + 1e-2]))
    margin = min(_scaled_e_min(E, w) for w in probes)

    stable = lead_ok and margin >= -A_STABILITY_RTOL
    return AStabilityVerdict(bool(stable), margin, A_STABILITY_RTOL)


# --- L-stability ---------------------------------------------------------------


@dataclass(frozen=True)
class LStabilityResult:
    r_inf: float
    l_stable: bool


def r_at_infinity(t: ButcherTableau) -> float:
    """Limit of R(z) as |z| -> infinity.

    Uses 1 - b^T A^{-1} e when A is invertible, otherwise the ratio of the
    leading P and Q coefficients (zero when deg P < deg Q).  When b equals
    the last row of A exactly, b^T A^{-1} is the last unit vector and the
    limit is zero as an algebraic identity; short-circuiting it avoids the
    conditioning of A (schemes with a tiny leading diagonal entry lose up to
    nine digits in the solve).
    """
    if np.array_equal(t.A[-1], t.b):
        return 0.0
    diag = np.diag(t.A)
    if _is_lower_triangular(t.A) and np.any(diag == 0.0):
        return _r_inf_from_degrees(t)
    try:
        x = np.linalg.solve(t.A, np.ones(t.s))
    except np.linalg.LinAlgError:
        return _r_inf_from_degrees(t)
    return float(1.0 - t.b @ x)


def _r_inf_from_degrees(t: ButcherTableau) -> float:
    P, Q = stability_polynomials(t)
    dp, dq = len(P) - 1, len(Q) - 1
    if dp < dq:
        return 0.0
    if dp == dq:
        return float(P[-1] / Q[-1])
    return math.inf


def l_stability_check(
    t: ButcherTableau, a_stable: bool | None = None
) -> LStabilityResult:
    """L-stability requires A-stability plus R(inf) = 0."""
    if a_stable is None:
        a_stable = a_stability_check(t).a_stable
    r_inf = r_at_infinity(t)
    return LStabilityResult(r_inf, bool(a_stable and abs(r_inf) <= L_STABILITY_TOL))


# --- internal stability ----------------------------------------------------------


@dataclass(frozen=True)
class InternalStabilityMaxima:
    max_R: float
    max_Q: float


def _stage_amplifications(t: ButcherTableau, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # u solves (I - iyA)u = e stagewise (forward substitution, vectorized over
    # y); v solves the transposed system against b (backward substitution).
    # u_j is the amplification of a y_n perturbation up to stage j, v_j the
    # effect of a stage-j perturbation on y_{n+1}.
    A = t.A
    s = t.s
    z = 1j * y
    u = np.empty((s, y.size), dtype=complex)
    for i in range(s):
        acc = np.ones_like(z)
        for j in range(i):
            if A[i, j] != 0.0:
                acc = acc + z * (A[i, j] * u[j])
        u[i] = acc / (1.0 - z * A[i, i])
    v = np.empty((s, y.size), dtype=complex)
    for i in range(s - 1, -1, -1):
        acc = np.full_like(z, t.b[i])
        for j in range(i + 1, s):
            if A[j, i] != 0.0:
                acc = acc + z * (A[j, i] * v[j])
        v[i] = acc / (1.0 - z * A[i, i])
    return u, v


def _golden_max(f, lo: float, hi: float, rel_tol: float = 1e-6) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > rel_tol * max(abs(a), abs(b), 1e-300):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return max(fc, fd)


def internal_stability_maxima(
    t: ButcherTableau, points_per_decade: int = 2000
) -> InternalStabilityMaxima:
    """Peak stage amplification along the imaginary axis.

    Scans y in [1e-6, 1e8] (plus y = 0) on a log grid and refines the grid
    maximum by golden-section search; only DIRK tableaus with a fully nonzero
    diagonal are supported, which guarantees decay as y grows.
    """
    flags_upper = np.triu(t.A, k=1)
    if np.any(flags_upper != 0.0):
        raise StabilityConfigError("internal stability maxima require a DIRK tableau")
    if np.any(np.diag(t.A) == 0.0):
        raise StabilityConfigError(
            "internal stability maxima require all diagonal entries nonzero"
        )
    decades = 14
    y = np.concatenate([[0.0], np.logspace(-6, 8, decades * points_per_decade + 1)])
    u, v = _stage_amplifications(t, y)
    gu = np.max(np.abs(u), axis=0)
    gv = np.max(np.abs(v), axis=0)

    def refine(vals: np.ndarray, which: str) -> float:
        k = int(np.argmax(vals))
        best = float(vals[k])
        if 0 < k < y.size - 1:
            lo, hi = y[k - 1], y[k + 1]

            def f(yy: float) -> float:
                uu, vv = _stage_amplifications(t, np.array([yy]))
                arr = uu if which == "u" else vv
                return float(np.max(np.abs(arr)))

            best = max(best, _golden_max(f, lo, hi))
        return best

    return InternalStabilityMaxima(refine(gu, "u"), refine(gv, "v"))


# --- consistency with the exponential -----------------------------------------


@dataclass(frozen=True)
class EConsistency:
    """Taylor comparison of R against exp at z = 0.

    ``taylor_defects[k]`` is 1/k! minus the k-th Taylor coefficient of R,
    computed in exact rational arithmetic and rounded once; ``order`` is the
    largest q with all defects through q below 1e-13 in magnitude.
    """

    taylor_defects: tuple[float, ...]
    order: int


def e_consistency(t: ButcherTableau, n_terms: int = 25) -> EConsistency:
    """Defects of the Taylor coefficients of R versus the exponential.

    The coefficients are r_0 = 1 and r_k = b^T A^{k-1} e, evaluated over
    exact rationals so that defects at the 1e-16 level are meaningful.
    """
    if n_terms > 25:
        raise ValueError("n_terms capped at 25")
    s = t.s
    Af = [[Fraction(t.A[i, j]) for j in range(s)] for i in range(s)]
    bf = [Fraction(t.b[i]) for i in range(s)]
    w = [Fraction(1)] * s  # A^{k-1} e, updated in place
    defects = [0.0]
    for k in range(1, n_terms + 1):
        rk = sum(bi * wi for bi, wi in zip(bf, w))
        defects.append(float(Fraction(1, math.factorial(k)) - rk))
        w = [sum(Af[i][j] * w[j] for j in range(s)) for i in range(s)]
    order = 0
    for k in range(1, len(defects)):
        if abs(defects[k]) > 1e-13:
            break
        order = k
    return EConsistency(tuple(defects), order)


def e_consistency_samples(
    t: ButcherTableau, z: np.ndarray
) -> np.ndarray:
    """|exp(z) - R(z)| at the given complex points.

    Near the origin the difference is evaluated from the exact Taylor defects
    (direct subtraction would cancel catastrophically below ~1e-16); away
    from it, directly through the resolvent.
    """
    defects = e_consistency(t).taylor_defects
    R = stability_function(t)
    out = np.empty(z.shape, dtype=float)
    for idx, zz in np.ndenumerate(z):
        if abs(zz) <= 1.0:
            out[idx] = abs(
                math.fsum(
                    (d * zz**k).real for k, d in enumerate(defects)
                )
                + 1j
                * math.fsum((d * zz**k).imag for k, d in enumerate(defects))
            )
        else:
            out[idx] = abs(np.exp(zz) - R(zz))
    return out


# --- aggregate report -------------------------------------------------------------


@dataclass(frozen=True)
class StabilityReport:
    scheme: str
    P_coeffs: np.ndarray
    Q_coeffs: np.ndarray
    E_coeffs: np.ndarray
    a_stable: bool
    a_stability_margin: float
    r_at_infinity: float
    l_stable: bool
    e_consistency_order: int
    internal_max_R: float | None
    internal_max_Q: float | None

    def summary(self) -> str:
        lines = [
            f"scheme {self.scheme}: "
            f"{'A-stable' if self.a_stable else 'NOT A-stable'} "
            f"(margin {self.a_stability_margin:.2e})",
            f"  R(inf) = {self.r_at_infinity:.6e}  "
            f"L-stable: {'yes' if self.l_stable else 'no'}",
            f"  e-consistency order {self.e_consistency_order}",
        ]
        if self.internal_max_R is not None:
            lines.append(
                f"  internal stability: max|R_j| = {self.internal_max_R:.2f}  "
                f"max|Q_j| = {self.internal_max_Q:.2f}"
            )
        return "\n".join(lines)


def analyze_stability(
    t: ButcherTableau, internal_points_per_decade: int = 2000
) -> StabilityReport:
    """Run the full stability battery on one tableau."""
    P, Q = stability_polynomials(t)
    verdict = a_stability_check(t)
    lres = l_stability_check(t, a_stable=verdict.a_stable)
    econ = e_consistency(t)
    try:
        internal = internal_stability_maxima(t, internal_points_per_decade)
        max_r, max_q = internal.max_R, internal.max_Q
    except StabilityConfigError:
        max_r = max_q = None
    return StabilityReport(
        scheme=t.name,
        P_coeffs=P,
        Q_coeffs=Q,
        E_coeffs=e_polynomial(t),
        a_stable=verdict.a_stable,
        a_stability_margin=verdict.margin,
        r_at_infinity=lres.r_inf,
        l_stable=lres.l_stable,
        e_consistency_order=econ.order,
        internal_max_R=max_r,
        internal_max_Q=max_q,
    )


# --- plot data ---------------------------------------------------------------------


def scan_data(t: ButcherTableau, kind: str, lo: float, hi: float, n: int):
    """Rows of (abscissa, value) for the CLI's plot-data output.

    Kinds: ``r-magnitude`` samples |R(iy)| for y on a log grid, ``e-poly``
    samples E(w) on a log grid, ``e-consistency`` samples |exp(z) - R(z)|
    along the imaginary axis on a log grid in y.
    """
    if kind == "r-magnitude":
        y = np.logspace(np.log10(lo), np.log10(hi), n)
        R = stability_function(t)
        return [(float(yy), abs(R(1j * yy))) for yy in y]
    if kind == "e-poly":
        w = np.logspace(np.log10(lo), np.log10(hi), n)
        E = e_polynomial(t)
        vals = np.polynomial.polynomial.polyval(w, E)
        return list(zip(w.tolist(), vals.tolist()))
    if kind == "e-consistency":
        y = np.logspace(np.log10(lo), np.log10(hi), n)
        vals = e_consistency_samples(t, 1j * y)
        return list(zip(y.tolist(), vals.tolist()))
    raise ValueError(f"unknown scan kind {kind!r}")
