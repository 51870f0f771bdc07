"""Block and chain relations built from tuple listings, and arity combinators."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from ..relations import Named, eval_ground
from ..universe import SetDescription


class TupleNotFound(KeyError):
    """The tuple (or number) lies outside the enumerated prefix."""


def _set_equality(sets: Mapping[int, SetDescription] | None) -> Callable[[int, int], bool]:
    """=^ce on indices: ground truth on descriptions, or plain index equality."""
    if sets is None:
        return lambda a, b: a == b
    eq = Named("EqCe")
    return lambda a, b: a == b or eval_ground(eq, sets[a], sets[b])


@dataclass
class BlockRelation:
    """Numbers mn .. mn+n-1 copy set equality from the m-th listed n-tuple."""

    n: int
    tuples: list
    sets: Mapping[int, SetDescription] | None = None
    _pos: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.tuples = [tuple(t) for t in self.tuples]
        for m, t in enumerate(self.tuples):
            if len(t) != self.n:
                raise ValueError(f"tuple {t} does not have length {self.n}")
            if t in self._pos:
                raise ValueError(f"tuple {t} listed twice")
            self._pos[t] = m
        self._eq = _set_equality(self.sets)

    def block(self, i: int) -> int:
        return i // self.n

    def related(self, i: int, j: int) -> bool:
        m = self.block(i)
        if self.block(j) != m:
            return False
        if m >= len(self.tuples):
            raise TupleNotFound(f"block {m} lies beyond the listed prefix")
        a = self.tuples[m]
        return self._eq(a[i - m * self.n], a[j - m * self.n])

    def reduce(self, xs: Sequence[int]) -> tuple:
        xs = tuple(xs)
        if xs not in self._pos:
            raise TupleNotFound(xs)
        m = self._pos[xs]
        return tuple(m * self.n + i for i in range(self.n))


def block_relation(n: int, tuples: list, sets=None):
    """(E, f): E on numbers, f the n-ary reduction of set equality to E."""
    rel = BlockRelation(n, tuples, sets)
    return rel.related, rel.reduce


@dataclass
class ChainRelation:
    """Tuples of varying length laid end to end along the walk g."""

    tuples: list
    sets: Mapping[int, SetDescription] | None = None

    def __post_init__(self):
        self.tuples = [tuple(t) for t in self.tuples]
        if any(not t for t in self.tuples):
            raise ValueError("tuples must be nonempty")
        if len(set(self.tuples)) != len(self.tuples):
            raise ValueError("tuples must be listed without repetition")
        self._pos = {t: m for m, t in enumerate(self.tuples)}
        self._starts = [0]
        for t in self.tuples:
            self._starts.append(self._starts[-1] + len(t))
        self._eq = _set_equality(self.sets)

    def top(self, m: int) -> int:
        """n_m: the last position of block m."""
        return len(self.tuples[m]) - 1

    def g(self, x: int) -> tuple[int, int]:
        if x < 0 or x >= self._starts[-1]:
            raise TupleNotFound(f"{x} lies beyond the listed prefix")
        lo, hi = 0, len(self.tuples)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self._starts[mid] <= x:
                lo = mid
            else:
                hi = mid
        return lo, x - self._starts[lo]

    def g_walk(self, count: int) -> list[tuple[int, int]]:
        """g(0), g(1), ... by the successor rule, for cross-checking ``g``."""
        out = [(0, 0)]
        while len(out) < count:
            m, i = out[-1]
            out.append((m, i + 1) if i < self.top(m) else (m + 1, 0))
        return out[:count]

    def g_inv(self, m: int, i: int) -> int:
        if m >= len(self.tuples) or not 0 <= i <= self.top(m):
            raise TupleNotFound((m, i))
        return self._starts[m] + i

    def related(self, x: int, y: int) -> bool:
        (m, j), (m2, k) = self.g(x), self.g(y)
        return m == m2 and self._eq(self.tuples[m][j], self.tuples[m][k])

    def h(self, i: int, xs: Sequence[int]) -> int:
        xs = tuple(xs)
        if xs not in self._pos:
            raise TupleNotFound(xs)
        return self.g_inv(self._pos[xs], i)

    def reduce(self, xs: Sequence[int]) -> tuple:
        return tuple(self.h(i, xs) for i in range(len(xs)))


def chain_relation(tuples: list, sets=None):
    """(E, h): E on numbers, h the finitary reduction of set equality to E."""
    rel = ChainRelation(tuples, sets)
    return rel.related, rel.reduce


def narrow(h: Callable[[tuple], tuple], n: int) -> Callable[[tuple], tuple]:
    """An n-ary reduction from an (n+1)-ary one: pad with 0, keep n outputs."""
    def reduced(xs):
        xs = tuple(xs)
        if len(xs) != n:
            raise ValueError(f"expected {n} arguments, got {len(xs)}")
        return tuple(h(xs + (0,)))[:n]
    return reduced


def widen(f: Callable[[int], object]) -> Callable[[tuple], tuple]:
    """The finitary reduction applying a full reduction coordinatewise."""
    return lambda xs: tuple(f(x) for x in xs)


def small_tuples(n: int | None, count: int) -> list[tuple]:
    """A duplicate-free listing of tuples with entries and length growing together.

    ``n`` fixes the length; ``None`` lists tuples of every length >= 1.
    """
    out: list[tuple] = []
    seen: set = set()
    bound = 0
    while len(out) < count:
        lengths = [n] if n is not None else range(1, bound + 2)
        for ln in lengths:
            for t in itertools.product(range(bound + 1), repeat=ln):
                if t not in seen:
                    seen.add(t)
                    out.append(t)
        bound += 1
    return out[:count]
