"""Unordered rooted trees with their symmetry and density invariants.

Rooted trees index the Runge-Kutta order conditions: each tree of q vertices
contributes one algebraic condition on the coefficients of a method of order
>= q.  This module enumerates all non-isomorphic rooted trees up to order 10
and computes, in exact integer arithmetic, the two combinatorial weights that
appear in the conditions: the symmetry sigma(t) (size of the automorphism
group) and the density gamma(t).
"""

import itertools
import math
import threading
from typing import Iterable, Iterator, NamedTuple

# Order conditions are needed up to p + 2 = 10 for the eighth-order schemes;
# nothing in the toolkit looks beyond that.
MAX_ORDER = 10


class RootedTree:
    """An unordered rooted tree in canonical form.

    Children are stored sorted by decreasing level sequence, so two trees are
    isomorphic if and only if they compare equal.  ``order`` is the vertex
    count, ``sigma`` the symmetry, and ``gamma`` the density; both invariants
    are exact integers.
    """

    __slots__ = ("children", "order", "sigma", "gamma", "_levels")

    def __init__(self, children: Iterable["RootedTree"] = ()):
        kids = sorted(children, key=lambda t: t._levels, reverse=True)
        self.children = tuple(kids)
        self.order = 1 + sum(k.order for k in kids)

        gamma = self.order
        for k in kids:
            gamma *= k.gamma
        self.gamma = gamma

        sigma = 1
        for _, group in itertools.groupby(kids, key=lambda t: t._levels):
            group = list(group)
            sigma *= group[0].sigma ** len(group) * math.factorial(len(group))
        self.sigma = sigma

        levels = [1]
        for k in kids:
            levels.extend(lvl + 1 for lvl in k._levels)
        self._levels = tuple(levels)

    def level_sequence(self) -> tuple[int, ...]:
        """Canonical level sequence, root at level 1 (e.g. ``(1, 2, 3, 3, 2)``)."""
        return self._levels

    @classmethod
    def from_level_sequence(cls, levels: Iterable[int]) -> "RootedTree":
        """Build a tree from any valid level sequence (need not be canonical)."""
        levels = list(levels)
        if not levels or levels[0] != 1:
            raise ValueError("level sequence must start with 1 at the root")
        children_of: list[list[int]] = [[] for _ in levels]
        stack: list[int] = []
        for i, lvl in enumerate(levels):
            if lvl < 1 or lvl > len(stack) + 1:
                raise ValueError(f"invalid level {lvl} at position {i}")
            del stack[lvl - 1 :]
            if stack:
                children_of[stack[-1]].append(i)
            stack.append(i)

        def build(i: int) -> "RootedTree":
            return cls(build(j) for j in children_of[i])

        return build(0)

    def __eq__(self, other) -> bool:
        return isinstance(other, RootedTree) and self._levels == other._levels

    def __hash__(self) -> int:
        return hash(self._levels)

    def __repr__(self) -> str:
        return f"RootedTree({list(self._levels)})"


class TreeStats(NamedTuple):
    sigma: int
    gamma: int


def tree_stats(tree: RootedTree) -> TreeStats:
    """Symmetry and density of ``tree`` as exact integers."""
    return TreeStats(tree.sigma, tree.gamma)


def _check_order(q: int) -> None:
    if not 1 <= q <= MAX_ORDER:
        raise ValueError(f"tree order must be in 1..{MAX_ORDER}, got {q}")


def _level_sequences(order: int) -> Iterator[tuple[int, ...]]:
    # Successor generation over canonical level sequences (Beyer-Hedetniemi):
    # start from the chain and repeat the tail segment that begins at the
    # parent of the last vertex deeper than level 2.  Emits every canonical
    # sequence exactly once, in decreasing lexicographic order.
    seq = list(range(1, order + 1))
    while True:
        yield tuple(seq)
        p = next((i for i in range(order - 1, -1, -1) if seq[i] > 2), None)
        if p is None:
            return
        q = next(i for i in range(p - 1, -1, -1) if seq[i] == seq[p] - 1)
        for i in range(p, order):
            seq[i] = seq[i - (p - q)]


_cache: dict[int, tuple[RootedTree, ...]] = {}
_cache_lock = threading.Lock()


def enumerate_trees(q: int) -> tuple[RootedTree, ...]:
    """All non-isomorphic rooted trees with ``q`` vertices.

    The result is deterministic (canonical level-sequence order, chain first)
    and cached per order; the returned tuple must not be mutated.
    """
    _check_order(q)
    trees = _cache.get(q)
    if trees is None:
        trees = tuple(
            RootedTree.from_level_sequence(seq) for seq in _level_sequences(q)
        )
        with _cache_lock:
            _cache.setdefault(q, trees)
    return trees


def cumulative_condition_count(p: int) -> int:
    """Total number of order conditions for a method of order ``p``."""
    _check_order(p)
    return sum(len(enumerate_trees(q)) for q in range(1, p + 1))


def dump_level_sequences(q: int) -> str:
    """Debug dump: one tree per line as a space-separated level sequence."""
    return "\n".join(
        " ".join(str(lvl) for lvl in t.level_sequence()) for t in enumerate_trees(q)
    )
