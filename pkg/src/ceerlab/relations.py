"""Ground-truth relation evaluators and stage-level evidence functions."""
from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .universe import (
    INF, NEG_INF, All, CofiniteMissing, Columnar, Finite, Flat, ParseError,
    SetDescription, Shape, Stream, pair, unpair,
)

NAMED = ("ESet", "E3", "Z0", "ECof", "EFin", "EMax", "EMin", "ECard", "EqCe", "EPerm")


class UnsupportedShape(ValueError):
    """The description variant admits no exact evaluation for this relation."""


class PacingViolation(ValueError):
    """More than one new element entered a union at a single stage."""


# ------------------------------------------------------------ relation specs

@dataclass(frozen=True)
class Named:
    name: str

    def __post_init__(self):
        if self.name not in NAMED:
            raise ParseError(f"unknown relation {self.name!r}")


@dataclass(frozen=True)
class Table:
    """Explicit partition of a finite field of indices."""

    classes: tuple

    def __init__(self, classes: Iterable[Iterable[int]]):
        cls = tuple(tuple(sorted(int(x) for x in c)) for c in classes)
        seen: set[int] = set()
        for c in cls:
            if not c:
                raise ParseError("empty class in table")
            for x in c:
                if x in seen:
                    raise ParseError(f"index {x} appears in two classes")
                seen.add(x)
        object.__setattr__(self, "classes", tuple(sorted(cls)))

    @property
    def field(self) -> list[int]:
        return sorted(x for c in self.classes for x in c)

    def class_of(self, x: int) -> int:
        for k, c in enumerate(self.classes):
            if x in c:
                return k
        raise KeyError(x)

    def related(self, x: int, y: int) -> bool:
        return self.class_of(x) == self.class_of(y)

    def within_pairs(self) -> list[tuple[int, int]]:
        out = [p for c in self.classes for p in itertools.combinations(c, 2)]
        return sorted(out, key=lambda p: pair(*p))


RelationSpec = Named | Table


def parse_relation(lit) -> RelationSpec:
    if isinstance(lit, dict) and "named" in lit:
        return Named(str(lit["named"]))
    if isinstance(lit, dict) and "table" in lit:
        tab = lit["table"]
        if not isinstance(tab, list) or not all(isinstance(c, list) for c in tab):
            raise ParseError(f"relation table must be a list of lists: {tab!r}")
        for c in tab:
            for x in c:
                if not isinstance(x, int) or x < 0:
                    raise ParseError(f"bad table entry {x!r}")
        return Table(tab)
    raise ParseError(f"relation must be {{'named':..}} or {{'table':..}}: {lit!r}")


# ------------------------------------------------------------- ground truth

def column_shapes(d: SetDescription) -> tuple[dict[int, Shape], Shape]:
    """Listed column shapes plus the default shape of every other column."""
    if isinstance(d, Columnar):
        return {k: v.shape() for k, v in d.cols}, d.default.shape()
    col = d.col
    if isinstance(col, Finite):
        cols: dict[int, set] = {}
        for c in col.elems:
            x, n = unpair(c)
            cols.setdefault(n, set()).add(x)
        return {n: Finite(xs).shape() for n, xs in cols.items()}, Finite().shape()
    if isinstance(col, (CofiniteMissing, All)):
        missing = getattr(col, "missing", frozenset())
        cols = {}
        for c in missing:
            x, n = unpair(c)
            cols.setdefault(n, set()).add(x)
        return {n: CofiniteMissing(xs).shape() for n, xs in cols.items()}, All().shape()
    raise UnsupportedShape("periodic flat descriptions have no exact column structure")


def _flat(d: SetDescription) -> Shape:
    if isinstance(d, Flat):
        return d.col.shape()
    raise UnsupportedShape("relation is only decided on flat descriptions")


def _aligned(a, b):
    ca, da = column_shapes(a)
    cb, db = column_shapes(b)
    keys = sorted(set(ca) | set(cb))
    return [(ca.get(k, da), cb.get(k, db)) for k in keys] + [(da, db)]


def _column_multiset(d) -> tuple[Counter, Shape]:
    cols, default = column_shapes(d)
    return Counter(cols.values()), default


def set_maximum(d: SetDescription) -> float:
    if isinstance(d, Flat):
        return d.col.shape().maximum()
    cols, default = column_shapes(d)
    if not default.finite or any(not s.finite for s in cols.values()):
        return INF
    if default.head:
        return INF  # infinitely many nonempty default columns
    codes = [pair(x, n) for n, s in cols.items() for x in s.head]
    return max(codes) if codes else NEG_INF


def set_minimum(d: SetDescription) -> float:
    if isinstance(d, Flat):
        return d.col.shape().minimum()
    cols, default = column_shapes(d)
    best = INF
    for n, s in cols.items():
        m = s.minimum()
        if m != INF:
            best = min(best, pair(int(m), n))
    m = default.minimum()
    if m != INF:
        n = 0
        while n in cols:
            n += 1
        best = min(best, pair(int(m), n))
    return best


def set_card(d: SetDescription) -> float:
    if isinstance(d, Flat):
        return d.col.shape().card()
    cols, default = column_shapes(d)
    if default.card() != 0:
        return INF
    return sum(s.card() for s in cols.values())


def eval_ground(rel: RelationSpec, a: SetDescription, b: SetDescription) -> bool:
    """Decide the limit relation between two described sets."""
    if not isinstance(rel, Named):
        raise UnsupportedShape("tables relate indices, not descriptions")
    name = rel.name
    if name == "EqCe":
        if isinstance(a, Flat) and isinstance(b, Flat):
            return a.col.shape() == b.col.shape()
        return all(x == y for x, y in _aligned(a, b))
    if name == "E3":
        return all(x.almost_equal(y) for x, y in _aligned(a, b))
    if name == "ECof":
        return all(x.cofinite == y.cofinite for x, y in _aligned(a, b))
    if name == "EFin":
        return all(x.finite == y.finite for x, y in _aligned(a, b))
    if name == "ESet":
        ca, da = column_shapes(a)
        cb, db = column_shapes(b)
        return set(ca.values()) | {da} == set(cb.values()) | {db}
    if name == "EPerm":
        return eperm_decide(a, b)
    if name == "EMax":
        return set_maximum(a) == set_maximum(b)
    if name == "EMin":
        return set_minimum(a) == set_minimum(b)
    if name == "ECard":
        return set_card(a) == set_card(b)
    if name == "Z0":
        return _flat(a).sym_diff(_flat(b)).density == 0
    raise UnsupportedShape(name)


def eperm_decide(a: SetDescription, b: SetDescription) -> bool:
    """Column multisets agree, a default column counting as infinitely repeated."""
    ma, da = _column_multiset(a)
    mb, db = _column_multiset(b)

    def mult(m: Counter, d: Shape, v: Shape) -> float:
        return INF if v == d else m[v]

    values = set(ma) | set(mb) | {da, db}
    return all(mult(ma, da, v) == mult(mb, db, v) for v in values)


# ------------------------------------------------------------------ chips

@dataclass(frozen=True)
class InfinitelyOften:
    period: int
    phase: int


@dataclass(frozen=True)
class FinitelyMany:
    stages: tuple = ()


@dataclass
class ChipSchedule:
    """Serialized chip delivery: at most one unordered pair per stage."""

    field: tuple
    variants: dict            # (x, y) with x < y -> InfinitelyOften | FinitelyMany
    slot_period: int = 1
    slot_phase: int = 0
    rotation: tuple = ()      # within-class pairs in round-robin order
    noise_at: dict = field(default_factory=dict)  # stage -> pair

    def chip(self, s: int):
        """Pair receiving a chip at stage s, or None."""
        if s in self.noise_at:
            return self.noise_at[s]
        if self.rotation and s >= self.slot_phase and (s - self.slot_phase) % self.slot_period == 0:
            t = (s - self.slot_phase) // self.slot_period
            return self.rotation[t % len(self.rotation)]
        return None

    def related(self, x: int, y: int) -> bool:
        if x == y:
            return True
        v = self.variants.get((min(x, y), max(x, y)))
        return isinstance(v, InfinitelyOften)

    def variant(self, x: int, y: int):
        return self.variants.get((min(x, y), max(x, y)), FinitelyMany())


@dataclass
class Approximator:
    """h(x, y, s) in {0, 1}; related iff h is 1 at infinitely many stages."""

    schedule: ChipSchedule

    def __call__(self, x: int, y: int, s: int) -> int:
        if x == y:
            return 1
        c = self.schedule.chip(s)
        return int(c is not None and c == (min(x, y), max(x, y)))

    def related(self, x: int, y: int) -> bool:
        return self.schedule.related(x, y)


@dataclass(frozen=True)
class ChipPolicy:
    period: int = 3
    phase: int = 0
    noise: tuple = ()  # ((x, y), (stages...)) entries

    @staticmethod
    def parse(lit) -> "ChipPolicy":
        if lit is None:
            return ChipPolicy()
        try:
            period = int(lit.get("period", 3))
            phase = int(lit.get("phase", 0))
            noise = tuple(
                ((int(e["pair"][0]), int(e["pair"][1])), tuple(int(s) for s in e["stages"]))
                for e in lit.get("noise", [])
            )
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ParseError(f"bad chips policy {lit!r}: {exc}") from exc
        if period < 1 or phase < 0:
            raise ParseError("chip period must be >= 1 and phase >= 0")
        return ChipPolicy(period, phase, noise)


def chips_from_spec(rel: Table, policy: ChipPolicy) -> tuple[ChipSchedule, Approximator]:
    """Within-class pairs chip forever (round robin); noise chips are finite.

    A noise chip takes its stage even when the round robin would chip
    there; that turn is skipped, which finitely many chips cannot starve.
    """
    rotation = tuple(rel.within_pairs())
    noise_at: dict[int, tuple[int, int]] = {}
    placed: dict[tuple[int, int], list[int]] = {}
    requests = sorted(
        (s, pair(min(p), max(p)), (min(p), max(p)))
        for p, stages in policy.noise for s in stages if p[0] != p[1]
    )
    for s, _, p in requests:
        while s in noise_at:
            s += 1  # another noise chip owns this stage
        noise_at[s] = p
        placed.setdefault(p, []).append(s)
    variants: dict = {}
    for x, y in itertools.combinations(rel.field, 2):
        if rel.related(x, y):
            k = rotation.index((x, y))
            variants[(x, y)] = InfinitelyOften(policy.period * len(rotation), policy.phase + k * policy.period)
        else:
            variants[(x, y)] = FinitelyMany(tuple(sorted(placed.get((x, y), []))))
    sched = ChipSchedule(tuple(rel.field), variants, policy.period, policy.phase, rotation, noise_at)
    return sched, Approximator(sched)


# ------------------------------------------------------- evidence functions

def density_F(snap_i: frozenset, snap_j: frozenset, n: int) -> Fraction:
    """|(i △ j) ∩ [0, n)| / n for two stage snapshots."""
    if n < 1:
        raise ValueError("n >= 1")
    return Fraction(sum(1 for x in snap_i ^ snap_j if x < n), n)


def density_at(u, i, j, n: int, s: int) -> Fraction:
    return density_F(u.streams[i].snapshot(s), u.streams[j].snapshot(s), n)


def agreement_F(a: Stream, b: Stream, s: int) -> int:
    """Max disagreement below the entering element (or below s); 0 on an empty max."""
    prev_union = a.snapshot(s - 1) | b.snapshot(s - 1) if s > 0 else frozenset()
    sa, sb = a.snapshot(s), b.snapshot(s)
    new = (sa | sb) - prev_union
    if len(new) > 1:
        raise PacingViolation(f"{len(new)} elements entered at stage {s}")
    bound = next(iter(new)) if new else s
    diff = [z for z in sa ^ sb if z < bound]
    return max(diff) if diff else 0


def colcount_F(col_snaps: Sequence[frozenset], x: int, frontier: int) -> int:
    """Columns y <= x agreeing with column x below the frontier."""
    target = {v for v in col_snaps[x] if v < frontier}
    return sum(1 for y in range(x + 1) if {v for v in col_snaps[y] if v < frontier} == target)


def marker_m(sa: frozenset, sb: frozenset, s: int) -> int:
    """s when the snapshots agree, else the least disagreement."""
    diff = sa ^ sb
    return min(diff) if diff else s
