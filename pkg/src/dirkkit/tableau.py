"""Butcher tableau data model, built-in scheme registry, and file format.

A tableau is the coefficient set (A, b, c) of a Runge-Kutta method.  The
abscissae c are always recomputed as row sums of A, never stored: every
method in this toolkit assumes c_i = sum_j a_ij, and recomputing enforces
that by construction.
"""

import re
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .builtin_schemes import BUILTIN_SCHEMES

#: Stiff accuracy is declared when the last row of A matches b to this level.
STIFF_ACCURACY_TOL = 1e-15


class UnknownSchemeError(KeyError):
    """Raised when a scheme name is not in the built-in registry."""


class TableauParseError(ValueError):
    """Raised on malformed scheme files; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class ButcherTableau:
    """Runge-Kutta coefficients; immutable and safe to share across threads.

    Parameters
    ----------
    name : str
        Scheme identifier.
    A : ndarray, shape (s, s)
        Stage coefficient matrix.
    b : ndarray, shape (s,)
        Advancing weights.
    declared_order : int
        Classical order the scheme is claimed to have.
    """

    name: str
    A: np.ndarray
    b: np.ndarray
    declared_order: int
    c: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        b = np.array(self.b, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        if b.shape != (A.shape[0],):
            raise ValueError(
                f"b has length {b.shape[0] if b.ndim == 1 else b.shape}, "
                f"A is {A.shape[0]}x{A.shape[0]}"
            )
        if self.declared_order < 1:
            raise ValueError("declared_order must be a positive integer")
        c = A.sum(axis=1)
        for arr in (A, b, c):
            arr.flags.writeable = False
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def s(self) -> int:
        """Stage count."""
        return self.b.shape[0]

    @property
    def is_dirk(self) -> bool:
        return structural_flags(self).is_dirk

    @property
    def is_stiffly_accurate(self) -> bool:
        return structural_flags(self).is_stiffly_accurate

    @property
    def has_zero_diagonal(self) -> bool:
        return structural_flags(self).has_zero_diagonal

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ButcherTableau)
            and self.name == other.name
            and self.declared_order == other.declared_order
            and np.array_equal(self.A, other.A)
            and np.array_equal(self.b, other.b)
        )

    def __hash__(self):
        return hash((self.name, self.declared_order, self.A.tobytes(), self.b.tobytes()))


class StructuralFlags(NamedTuple):
    is_dirk: bool
    is_stiffly_accurate: bool
    has_zero_diagonal: bool


def structural_flags(t: ButcherTableau) -> StructuralFlags:
    """Structure inferred from the coefficients themselves.

    DIRK requires an exactly zero strict upper triangle and at least one
    nonzero diagonal entry; stiff accuracy compares the last row of A with b
    to within ``STIFF_ACCURACY_TOL``.
    """
    upper = np.triu(t.A, k=1)
    diag = np.diag(t.A)
    is_dirk = bool(np.all(upper == 0.0) and np.any(diag != 0.0))
    is_sa = bool(np.max(np.abs(t.A[-1] - t.b)) <= STIFF_ACCURACY_TOL)
    return StructuralFlags(is_dirk, is_sa, bool(np.any(diag == 0.0)))


def _canonical_name(name: str) -> str:
    # "DIRK(10,7)SA" and aliases like "dirk-10-7-sa" normalize the same way
    return re.sub(r"[^a-z0-9]", "", name.lower())


_REGISTRY_BY_KEY = {_canonical_name(name): name for name in BUILTIN_SCHEMES}


def builtin_names() -> tuple[str, ...]:
    """Canonical names of the built-in schemes."""
    return tuple(BUILTIN_SCHEMES)


def _parse_floats(text: str) -> list[float]:
    return [float(tok) for tok in text.split()]


def load_builtin(name: str) -> ButcherTableau:
    """Load one of the published schemes by name (parenthesized or alias form)."""
    canonical = _REGISTRY_BY_KEY.get(_canonical_name(name))
    if canonical is None:
        raise UnknownSchemeError(
            f"unknown scheme {name!r}; available: {', '.join(BUILTIN_SCHEMES)}"
        )
    spec = BUILTIN_SCHEMES[canonical]
    rows = [_parse_floats(line) for line in spec["rows"].strip().splitlines()]
    s = len(rows)
    A = np.zeros((s, s))
    for i, row in enumerate(rows):
        if len(row) != i + 1:
            raise ValueError(
                f"{canonical}: row {i + 1} has {len(row)} entries, expected {i + 1}"
            )
        A[i, : i + 1] = row
    b = np.array(rows[-1]) if spec["b"] is None else np.array(_parse_floats(spec["b"]))
    return ButcherTableau(name=canonical, A=A, b=b, declared_order=spec["order"])


def parse_tableau(text: str) -> ButcherTableau:
    """Parse a scheme file.

    Format (UTF-8 text, ``#`` starts a comment, blank lines ignored)::

        name <string>
        order <p>
        stages <s>
        <s rows of s floats>     rows of A, full square including zeros
        <s floats>               b

    Raises
    ------
    TableauParseError
        Naming the offending line on any structural or numeric problem.
    """
    lines: list[tuple[int, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if stripped:
            lines.append((lineno, stripped))

    def take(expected: str | None = None) -> tuple[int, str]:
        if not lines:
            last = lineno if text else 0
            raise TableauParseError(
                f"unexpected end of file, expected {expected or 'more data'}", last
            )
        return lines.pop(0)

    ln, content = take("'name <string>'")
    if not content.startswith("name "):
        raise TableauParseError("expected 'name <string>'", ln)
    name = content[5:].strip()

    ln, content = take("'order <p>'")
    m = re.fullmatch(r"order\s+(\d+)", content)
    if not m:
        raise TableauParseError("expected 'order <p>' with a positive integer", ln)
    order = int(m.group(1))

    ln, content = take("'stages <s>'")
    m = re.fullmatch(r"stages\s+(\d+)", content)
    if not m:
        raise TableauParseError("expected 'stages <s>' with a positive integer", ln)
    s = int(m.group(1))
    if s < 1:
        raise TableauParseError("stage count must be at least 1", ln)

    A = np.zeros((s, s))
    for i in range(s):
        ln, content = take(f"row {i + 1} of A")
        try:
            row = _parse_floats(content)
        except ValueError as exc:
            raise TableauParseError(f"bad float in row {i + 1} of A: {exc}", ln) from None
        if len(row) != s:
            raise TableauParseError(
                f"row {i + 1} of A has {len(row)} entries, expected {s}", ln
            )
        A[i] = row

    ln, content = take("the b row")
    try:
        b = _parse_floats(content)
    except ValueError as exc:
        raise TableauParseError(f"bad float in b: {exc}", ln) from None
    if len(b) != s:
        raise TableauParseError(f"b has {len(b)} entries, expected {s}", ln)

    if lines:
        ln, content = lines[0]
        raise TableauParseError(f"unexpected trailing content: {content!r}", ln)

    return ButcherTableau(name=name, A=A, b=np.array(b), declared_order=order)


def serialize_tableau(t: ButcherTableau) -> str:
    """Render a tableau in the scheme file format; parse round-trips bit-for-bit."""
    out = [f"name {t.name}", f"order {t.declared_order}", f"stages {t.s}"]
    for i in range(t.s):
        out.append(" ".join(format(x, ".17g") for x in t.A[i]))
    out.append(" ".join(format(x, ".17g") for x in t.b))
    return "\n".join(out) + "\n"
