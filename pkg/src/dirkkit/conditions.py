"""Order-condition residuals, achieved order, and truncation-error measures.

A method has classical order p exactly when, for every rooted tree t with at
most p vertices, the weighted residual

    tau(t) = (1/sigma(t)) * (b . Phi(t) - 1/gamma(t))

vanishes, where Phi(t) is the elementary weight vector of the tree.  This
module evaluates the residuals, determines the achieved and stage orders, and
collects the leading truncation-error norms and the largest-coefficient
measure into an :class:`OrderReport`.
"""

import io
import math
from dataclasses import dataclass

import numpy as np

from .tableau import ButcherTableau
from .trees import MAX_ORDER, RootedTree, enumerate_trees

#: Default residual tolerance: 16-digit coefficient rounding inflates exact
#: residuals to roughly 1e-13 for schemes whose coefficients reach 4..8.
DEFAULT_ORDER_TOL = 5e-13

#: Stage-order conditions are degree-k polynomials of O(1) coefficients, so an
#: exact relation survives 16-digit rounding at ~1e-15.  A tighter cutoff than
#: the classical-order tolerance is needed to tell that apart from schemes
#: whose optimizer left the relation nearly (but not exactly) satisfied, with
#: defects around 1e-13.
STAGE_ORDER_TOL = 1e-14

Weights = dict[RootedTree, np.ndarray]


def elementary_weights(
    t: ButcherTableau, tree: RootedTree, _cache: Weights | None = None
) -> np.ndarray:
    """Elementary weight vector Phi(tree) of the tableau.

    Defined recursively: Phi(leaf) is the all-ones vector and otherwise Phi
    is the componentwise product over children of A @ Phi(child).  A shared
    cache may be passed when evaluating many trees against one tableau; the
    returned array must not be mutated.
    """
    if tree.order > MAX_ORDER:
        raise ValueError(f"tree order {tree.order} exceeds supported {MAX_ORDER}")
    cache = {} if _cache is None else _cache
    return _phi(t.A, tree, cache)


def _phi(A: np.ndarray, tree: RootedTree, cache: Weights) -> np.ndarray:
    known = cache.get(tree)
    if known is not None:
        return known
    phi = np.ones(A.shape[0])
    for child in tree.children:
        phi = phi * (A @ _phi(A, child, cache))
    cache[tree] = phi
    return phi


def residual(
    t: ButcherTableau, tree: RootedTree, _cache: Weights | None = None
) -> float:
    """Weighted order-condition residual tau(tree) for the tableau.

    The dot product is accumulated with exactly rounded summation: order-8
    conditions mix terms of widely different magnitude.
    """
    phi = elementary_weights(t, tree, _cache)
    terms = [bi * pi for bi, pi in zip(t.b, phi)]
    terms.append(-1.0 / tree.gamma)
    return math.fsum(terms) / tree.sigma


def order_residuals(
    t: ButcherTableau, max_order: int, _cache: Weights | None = None
) -> dict[int, np.ndarray]:
    """Residual vectors for every order q = 1..max_order, in canonical tree order."""
    cache = {} if _cache is None else _cache
    return {
        q: np.array([residual(t, tree, cache) for tree in enumerate_trees(q)])
        for q in range(1, max_order + 1)
    }


def stage_order(t: ButcherTableau, tol: float = STAGE_ORDER_TOL) -> int:
    """Largest r such that A c^(k-1) = c^k / k componentwise for k = 1..r."""
    r = 0
    for k in range(1, min(MAX_ORDER, t.s + 1) + 1):
        defect = t.A @ t.c ** (k - 1) - t.c**k / k
        if np.max(np.abs(defect)) > tol:
            break
        r = k
    return r


@dataclass
class OrderReport:
    """Result of verifying a tableau against the order conditions."""

    scheme: str
    declared_order: int
    tolerance_used: float
    achieved_order: int
    stage_order: int
    residuals: dict[int, np.ndarray]
    #: order -> (L2, Linf) with the 1/sigma weighting, for p+1 and p+2
    e_norms: dict[int, tuple[float, float]]
    #: same norms under the alternate convention without the 1/sigma factor
    e_norms_unweighted: dict[int, tuple[float, float]]
    d_max: float

    def max_residual_through(self, order: int) -> float:
        return max(
            float(np.max(np.abs(self.residuals[q])))
            for q in range(1, order + 1)
            if q in self.residuals
        )

    def summary(self) -> str:
        lines = [
            f"scheme {self.scheme}: declared order {self.declared_order}, "
            f"achieved {self.achieved_order}, stage order {self.stage_order} "
            f"(tol {self.tolerance_used:.1e})",
            f"  max residual through order {self.achieved_order}: "
            f"{self.max_residual_through(self.achieved_order):.3e}",
            f"  D (largest coefficient) = {self.d_max:.3g}",
        ]
        for k in sorted(self.e_norms):
            l2, linf = self.e_norms[k]
            lines.append(f"  E2({k}) = {l2:.3e}   Einf({k}) = {linf:.3e}")
        return "\n".join(lines)

    def to_csv(self) -> str:
        """One row per tree: order, tree index, residual."""
        buf = io.StringIO()
        buf.write("order,tree_index,residual\n")
        for q in sorted(self.residuals):
            for j, tau in enumerate(self.residuals[q], start=1):
                buf.write(f"{q},{j},{tau!r}\n")
        return buf.getvalue()


def _norm_pair(vec: np.ndarray) -> tuple[float, float]:
    return float(np.linalg.norm(vec)), float(np.max(np.abs(vec)))


def verify_order(t: ButcherTableau, tol: float = DEFAULT_ORDER_TOL) -> OrderReport:
    """Evaluate all order conditions through declared order + 2 (capped at 10).

    The achieved order is the largest p' with every residual of order <= p'
    within ``tol``; the error norms E are taken over the residual vectors at
    orders p+1 and p+2 (the latter omitted when it would exceed order 10).
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    p = t.declared_order
    top = min(p + 2, MAX_ORDER)
    cache: Weights = {}
    residuals = order_residuals(t, top, cache)

    achieved = 0
    for q in range(1, top + 1):
        if np.max(np.abs(residuals[q])) > tol:
            break
        achieved = q

    e_norms = {}
    e_unweighted = {}
    for k in (p + 1, p + 2):
        if k <= top:
            vec = residuals[k]
            sigmas = np.array([tree.sigma for tree in enumerate_trees(k)])
            e_norms[k] = _norm_pair(vec)
            e_unweighted[k] = _norm_pair(vec * sigmas)

    d_max = max(float(np.max(np.abs(t.A))), float(np.max(np.abs(t.b))),
                float(np.max(np.abs(t.c))))

    return OrderReport(
        scheme=t.name,
        declared_order=p,
        tolerance_used=tol,
        achieved_order=achieved,
        stage_order=stage_order(t),
        residuals=residuals,
        e_norms=e_norms,
        e_norms_unweighted=e_unweighted,
        d_max=d_max,
    )
