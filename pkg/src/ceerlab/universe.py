"""Enumeration substrate: pairing, set descriptions, stage streams, fresh numbers."""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping


class ParseError(ValueError):
    """Raised when a description literal or scenario entry is malformed."""


# ---------------------------------------------------------------- pairing

def pair(x: int, n: int) -> int:
    """Cantor code of (x, n); n is the column index."""
    if x < 0 or n < 0:
        raise ValueError("pair takes natural numbers")
    return (x + n) * (x + n + 1) // 2 + n


def unpair(c: int) -> tuple[int, int]:
    if c < 0:
        raise ValueError("codes are natural numbers")
    w = (math.isqrt(8 * c + 1) - 1) // 2
    n = c - w * (w + 1) // 2
    return w - n, n


def pair_tuple(xs: Iterable[int]) -> int:
    """Right-nested code of a nonempty tuple: <a,b,c> = <a,<b,c>>."""
    xs = list(xs)
    if not xs:
        raise ValueError("empty tuple")
    code = xs[-1]
    for x in reversed(xs[:-1]):
        code = pair(x, code)
    return code


# ------------------------------------------------------- eventually periodic

INF = math.inf
NEG_INF = -math.inf


@dataclass(frozen=True)
class Shape:
    """Canonical eventually periodic set.

    Members below ``start`` are listed in ``head``; from ``start`` on, x is a
    member iff ``x % mod`` is in ``res``.  ``mod`` and ``start`` are minimal,
    so two shapes denote the same set iff they are equal.
    """

    start: int
    head: frozenset
    mod: int
    res: frozenset

    @staticmethod
    def make(start: int, head: Iterable[int], mod: int, res: Iterable[int]) -> "Shape":
        mod = max(1, int(mod))
        res = frozenset(r % mod for r in res)
        head = frozenset(x for x in head if 0 <= x < start)
        for d in sorted(_divisors(mod)):
            if all((r in res) == ((r % d) in res) for r in range(mod)):
                res = frozenset(r % d for r in res)
                mod = d
                break
        while start > 0 and ((start - 1) in head) == (((start - 1) % mod) in res):
            start -= 1
        head = frozenset(x for x in head if x < start)
        return Shape(start, head, mod, res)

    def contains(self, x: int) -> bool:
        if x < self.start:
            return x in self.head
        return (x % self.mod) in self.res

    @property
    def finite(self) -> bool:
        return not self.res

    @property
    def cofinite(self) -> bool:
        return len(self.res) == self.mod

    @property
    def density(self) -> float:
        return len(self.res) / self.mod

    def card(self) -> float:
        return len(self.head) if self.finite else INF

    def maximum(self) -> float:
        if not self.finite:
            return INF
        return max(self.head) if self.head else NEG_INF

    def minimum(self) -> float:
        if self.head:
            return min(self.head)
        if self.finite:
            return INF
        return min(x for x in range(self.start, self.start + self.mod) if self.contains(x))

    def sym_diff(self, other: "Shape") -> "Shape":
        start = max(self.start, other.start)
        mod = math.lcm(self.mod, other.mod)
        head = [x for x in range(start) if self.contains(x) != other.contains(x)]
        res = [r for r in range(mod) if ((r % self.mod) in self.res) != ((r % other.mod) in other.res)]
        return Shape.make(start, head, mod, res)

    def almost_equal(self, other: "Shape") -> bool:
        return self.sym_diff(other).finite

    def elements_below(self, n: int) -> list[int]:
        return [x for x in range(n) if self.contains(x)]


def _divisors(m: int) -> list[int]:
    return [d for d in range(1, m + 1) if m % d == 0]


# ------------------------------------------------------------ descriptions

@dataclass(frozen=True)
class Finite:
    elems: frozenset = frozenset()

    def __init__(self, elems: Iterable[int] = ()):
        object.__setattr__(self, "elems", frozenset(elems))

    def shape(self) -> Shape:
        top = max(self.elems) + 1 if self.elems else 0
        return Shape.make(top, self.elems, 1, ())

    def literal(self) -> dict:
        return {"kind": "finite", "elems": sorted(self.elems)}


@dataclass(frozen=True)
class CofiniteMissing:
    missing: frozenset = frozenset()

    def __init__(self, missing: Iterable[int] = ()):
        object.__setattr__(self, "missing", frozenset(missing))

    def shape(self) -> Shape:
        top = max(self.missing) + 1 if self.missing else 0
        return Shape.make(top, (x for x in range(top) if x not in self.missing), 1, (0,))

    def literal(self) -> dict:
        return {"kind": "cofinite", "missing": sorted(self.missing)}


@dataclass(frozen=True)
class All:
    def shape(self) -> Shape:
        return Shape.make(0, (), 1, (0,))

    def literal(self) -> dict:
        return {"kind": "all"}


@dataclass(frozen=True)
class Periodic:
    mod: int
    res: frozenset
    offset: int = 0

    def __init__(self, mod: int, res: Iterable[int], offset: int = 0):
        if mod < 1 or offset < 0:
            raise ParseError("periodic needs mod >= 1 and offset >= 0")
        res = frozenset(res)
        if any(r < 0 or r >= mod for r in res):
            raise ParseError("periodic residues must lie in [0, mod)")
        object.__setattr__(self, "mod", mod)
        object.__setattr__(self, "res", res)
        object.__setattr__(self, "offset", offset)

    def shape(self) -> Shape:
        return Shape.make(self.offset, (), self.mod, self.res)

    def literal(self) -> dict:
        return {"kind": "periodic", "mod": self.mod, "res": sorted(self.res), "offset": self.offset}


ColumnDesc = Finite | CofiniteMissing | All | Periodic


def column_contains(col: ColumnDesc, x: int) -> bool:
    if isinstance(col, Finite):
        return x in col.elems
    if isinstance(col, CofiniteMissing):
        return x not in col.missing
    if isinstance(col, All):
        return True
    return x >= col.offset and (x % col.mod) in col.res


@dataclass(frozen=True)
class Flat:
    col: ColumnDesc

    def literal(self) -> dict:
        return self.col.literal()


@dataclass(frozen=True)
class Columnar:
    """Finitely many listed columns; every other column follows ``default``."""

    cols: tuple = ()
    default: ColumnDesc = Finite()

    def __init__(self, cols: Mapping[int, ColumnDesc] | Iterable = (), default: ColumnDesc | None = None):
        items = cols.items() if isinstance(cols, Mapping) else cols
        object.__setattr__(self, "cols", tuple(sorted((int(k), v) for k, v in items)))
        object.__setattr__(self, "default", default if default is not None else Finite())

    def column(self, n: int) -> ColumnDesc:
        for k, v in self.cols:
            if k == n:
                return v
        return self.default

    @property
    def listed(self) -> list[int]:
        return [k for k, _ in self.cols]

    def literal(self) -> dict:
        out = {"kind": "columnar", "cols": {str(k): v.literal() for k, v in self.cols}}
        if self.default != Finite():
            out["default"] = self.default.literal()
        return out


SetDescription = Flat | Columnar


def parse_column(lit) -> ColumnDesc:
    if not isinstance(lit, dict) or "kind" not in lit:
        raise ParseError(f"column literal must be an object with 'kind': {lit!r}")
    kind = lit["kind"]
    try:
        if kind == "finite":
            return Finite(_nats(lit.get("elems", [])))
        if kind == "cofinite":
            return CofiniteMissing(_nats(lit.get("missing", [])))
        if kind == "all":
            return All()
        if kind == "periodic":
            return Periodic(int(lit["mod"]), _nats(lit.get("res", [])), int(lit.get("offset", 0)))
    except (KeyError, TypeError) as exc:
        raise ParseError(f"bad {kind} literal {lit!r}: {exc}") from exc
    raise ParseError(f"unknown column kind {kind!r}")


def parse_description(lit) -> SetDescription:
    """Read the JSON literal syntax used by scenario files."""
    if isinstance(lit, dict) and lit.get("kind") == "columnar":
        cols = lit.get("cols", {})
        if not isinstance(cols, dict):
            raise ParseError("columnar 'cols' must be an object")
        try:
            parsed = {int(k): parse_column(v) for k, v in cols.items()}
        except ValueError as exc:
            raise ParseError(f"column index must be a natural number: {exc}") from exc
        if any(k < 0 for k in parsed):
            raise ParseError("column index must be a natural number")
        default = parse_column(lit["default"]) if "default" in lit else None
        return Columnar(parsed, default)
    return Flat(parse_column(lit))


def _nats(xs) -> list[int]:
    out = [int(x) for x in xs]
    if any(x < 0 for x in out):
        raise ParseError(f"negative number in {xs!r}")
    return out


def decide_limit_membership(d: SetDescription, x: int) -> bool:
    if isinstance(d, Flat):
        return column_contains(d.col, x)
    v, n = unpair(x)
    return column_contains(d.column(n), v)


# ----------------------------------------------------------------- streams

class Stream:
    """Monotone stage-indexed set of naturals with an append-only history."""

    kind = "set"

    def __init__(self, name: str = "", scope: str | None = None):
        self.name = name
        self.scope = scope
        self._stages: list[int] = []   # stage of each event, nondecreasing
        self._elems: list[int] = []    # element of each event
        self._members: set[int] = set()
        self._top = -1
        self.frontier_complete = False  # true when snapshot(s) = limit set ∩ [0, s]

    # mutation
    def add(self, stage: int, x: int) -> bool:
        if self._stages and stage < self._stages[-1]:
            raise ValueError("history is append-only")
        if x in self._members:
            return False
        self._members.add(x)
        self._stages.append(stage)
        self._elems.append(x)
        self._top = max(self._top, x)
        return True

    # queries
    def _count(self, s: int) -> int:
        return bisect.bisect_right(self._stages, s)

    def snapshot(self, s: int | None = None) -> frozenset:
        if s is None:
            return frozenset(self._members)
        return frozenset(self._elems[: self._count(s)])

    def newly(self, s: int) -> frozenset:
        lo = bisect.bisect_left(self._stages, s)
        return frozenset(self._elems[lo: self._count(s)])

    def contains(self, x: int, s: int | None = None) -> bool:
        if s is None:
            return x in self._members
        return x in self.snapshot(s)

    def size(self, s: int | None = None) -> int:
        return len(self._members) if s is None else self._count(s)

    def maximum(self, s: int | None = None) -> float:
        if s is None:
            return self._top if self._members else NEG_INF
        k = self._count(s)
        return max(self._elems[:k]) if k else NEG_INF

    def minimum(self, s: int | None = None) -> float:
        k = len(self._elems) if s is None else self._count(s)
        return min(self._elems[:k]) if k else INF

    def top(self) -> int:
        """Largest number mentioned so far (-1 if none)."""
        return self._top

    def change_stages(self) -> list[int]:
        return sorted(set(self._stages))

    def events(self) -> list[tuple[int, int]]:
        return list(zip(self._stages, self._elems))


class Segment(Stream):
    """Stream whose snapshots are always initial segments [0, length)."""

    kind = "segment"

    def __init__(self, name: str = "", scope: str | None = None):
        super().__init__(name, scope)
        self._lens: list[int] = []   # length after each change
        self._len_stages: list[int] = []

    @property
    def length(self) -> int:
        return self._lens[-1] if self._lens else 0

    def extend_to(self, stage: int, length: int) -> bool:
        """Grow to [0, length); shorter requests are ignored."""
        if length <= self.length:
            return False
        if self._len_stages and stage < self._len_stages[-1]:
            raise ValueError("history is append-only")
        if self._len_stages and self._len_stages[-1] == stage:
            self._lens[-1] = length
        else:
            self._len_stages.append(stage)
            self._lens.append(length)
        self._top = length - 1
        return True

    def add(self, stage: int, x: int) -> bool:
        if x < self.length:
            return False
        if x != self.length:
            raise ValueError("segments grow only at their end")
        return self.extend_to(stage, x + 1)

    def length_at(self, s: int) -> int:
        k = bisect.bisect_right(self._len_stages, s)
        return self._lens[k - 1] if k else 0

    def snapshot(self, s: int | None = None) -> frozenset:
        return frozenset(range(self.length if s is None else self.length_at(s)))

    def newly(self, s: int) -> frozenset:
        return frozenset(range(self.length_at(s - 1) if s > 0 else 0, self.length_at(s)))

    def contains(self, x: int, s: int | None = None) -> bool:
        return 0 <= x < (self.length if s is None else self.length_at(s))

    def size(self, s: int | None = None) -> int:
        return self.length if s is None else self.length_at(s)

    def maximum(self, s: int | None = None) -> float:
        n = self.size(s)
        return n - 1 if n else NEG_INF

    def minimum(self, s: int | None = None) -> float:
        return 0 if self.size(s) else INF

    def change_stages(self) -> list[int]:
        return list(self._len_stages)

    def events(self) -> list[tuple[int, int]]:
        return list(zip(self._len_stages, self._lens))


def column_snapshot(stream: Stream, n: int, s: int | None = None) -> frozenset:
    """The n-th column {x : <x,n> in snapshot(s)}."""
    out = set()
    for c in stream.snapshot(s):
        x, m = unpair(c)
        if m == n:
            out.add(x)
    return frozenset(out)


@dataclass
class DescribedStream:
    """A stream driven by a description under the ascending frontier policy."""

    desc: SetDescription
    pace: int
    stream: Stream
    _pending: list = field(default_factory=list)
    _next: int = 0

    def refill(self, stage: int) -> list[int]:
        """Pending members up to the frontier (= stage), ascending."""
        while self._next <= stage:
            if decide_limit_membership(self.desc, self._next):
                self._pending.append(self._next)
            self._next += 1
        return self._pending

    def advance(self, stage: int) -> list[int]:
        self.refill(stage)
        out = self._pending[: self.pace]
        del self._pending[: self.pace]
        for x in out:
            self.stream.add(stage, x)
        return out


def stream_from_description(d: SetDescription, pace: int = 1, horizon: int = 0,
                            name: str = "", scope: str | None = None) -> Stream:
    """Enumerate ``d`` ascending, at most ``pace`` members per stage, frontier = clock."""
    if pace < 1:
        raise ValueError("pace must be >= 1")
    drv = DescribedStream(d, pace, Stream(name, scope))
    for s in range(horizon + 1):
        drv.advance(s)
    drv.stream.frontier_complete = pace >= 1
    return drv.stream


# ---------------------------------------------------------------- universe

class Universe:
    """Indexed streams, a clock, and per-scope fresh-number allocators.

    With ``joint=True`` at most one element enters the union of all
    described streams per stage: the least pending one, ties going to the
    earliest registered stream.
    """

    def __init__(self, joint: bool = False):
        self.joint = joint
        self.streams: dict = {}
        self.clock = 0
        self._drivers: dict = {}
        self._fresh: dict[str, int] = {}

    def add_stream(self, key, stream: Stream) -> Stream:
        self.streams[key] = stream
        return stream

    def describe(self, key, d: SetDescription, pace: int = 1, scope: str | None = None) -> Stream:
        st = Stream(str(key), scope)
        st.frontier_complete = True
        self._drivers[key] = DescribedStream(d, pace, st)
        if self.joint:
            st.frontier_complete = False
            self._drivers[key].refill(self.clock)
        else:
            self._drivers[key].advance(self.clock)
        return self.add_stream(key, st)

    def _joint_step(self) -> None:
        best = None
        for drv in self._drivers.values():
            pend = drv.refill(self.clock)
            if pend and (best is None or pend[0] < best._pending[0]):
                best = drv
        if best is not None:
            best.stream.add(self.clock, best._pending.pop(0))

    def tick(self) -> int:
        """Advance the clock one stage and let described streams enumerate."""
        self.clock += 1
        if self.joint:
            self._joint_step()
        else:
            for drv in self._drivers.values():
                drv.advance(self.clock)
        return self.clock

    def run_to(self, stage: int) -> None:
        while self.clock < stage:
            self.tick()

    def fresh(self, scope: str) -> int:
        mentioned = max((st.top() for st in self.streams.values() if st.scope == scope), default=-1)
        val = 1 + max(self._fresh.get(scope, -1), mentioned, self.clock)
        self._fresh[scope] = val
        return val
