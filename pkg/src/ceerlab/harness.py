"""Judging constructed outputs at a finite horizon, checking reductions, small oracles, scenarios."""
from __future__ import annotations

import bisect
import hashlib
import itertools
import json
import math
import random
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .constructions import (
    FLAT, ConstructionRun, FieldTooLarge, Trace, column_chips, column_span,
    card_max_bridge, cof_to_set, dup_columns, eqce_to_emax_ternary, min_to_max_finitary,
    pad_family, perm_to_set, pi02_to_eqce, set_to_e3_binary, set_to_e3_finitary,
    set_to_e3_ternary, small_tuples, z0_to_e3,
)
from .constructions.base import Family, Full, changes_in
from .constructions.combinators import BlockRelation, ChainRelation
from .constructions.sets import column_frontier
from .relations import (
    ChipPolicy, Named, RelationSpec, Table, UnsupportedShape, chips_from_spec, eval_ground,
    parse_relation,
)
from .universe import (
    INF, NEG_INF, Columnar, Flat, ParseError, Segment, SetDescription, Shape, Stream,
    parse_description, unpair,
)

STABLE_EQUAL = "StableEqual"
STABLE_DISTINCT = "StableDistinct"
CO_GROWING = "CoGrowing"
UNDECIDED = "Undecided"

DEFAULT_HORIZON = 5000
DEFAULT_WINDOW = 500
MAX_PERIOD = 64


class HorizonTooShort(ValueError):
    """Too few stages to split a stream into settled columns."""


class UndecidedPresent(RuntimeError):
    """Some pairs could not be classified at this horizon."""

    def __init__(self, report: "Report"):
        super().__init__(f"{len(report.undecided)} undecided pair(s) in {report.scenario}")
        self.report = report


# ------------------------------------------------------------------ values

@dataclass(frozen=True)
class Seg:
    """The finite initial segment [0, n)."""

    n: int
    finite = True
    cofinite = False

    def shape(self) -> Shape:
        return Shape.make(self.n, range(self.n), 1, ())

    def maximum(self) -> float:
        return self.n - 1 if self.n else NEG_INF

    def minimum(self) -> float:
        return 0 if self.n else INF

    def card(self) -> float:
        return self.n


@dataclass(frozen=True)
class Unbounded:
    """An infinite limit whose exact shape could not be read off the prefix."""

    finite = False
    cofinite = False


@dataclass(frozen=True)
class Opaque:
    """A limit known only up to finite difference: finite, or cofinite."""

    finite: bool
    cofinite: bool = False


EMPTY = Seg(0)
OMEGA = Shape.make(0, (), 1, (0,))


def canon(sh: Shape):
    """Finite initial segments become ``Seg``; everything else stays a Shape."""
    if sh.finite and len(sh.head) == sh.start:
        return Seg(sh.start)
    return sh


def finite_value(members: Iterable[int]):
    members = frozenset(members)
    if not members:
        return EMPTY
    top = max(members) + 1
    if len(members) == top:
        return Seg(top)
    return Shape.make(top, members, 1, ())


def almost_equal(a, b) -> bool | None:
    """=* on values; None when an unreadable infinite value makes it unclear."""
    if a is b:
        return True
    if a.finite and b.finite:
        return True
    if a.finite != b.finite:
        return False
    if a.cofinite and b.cofinite:
        return True
    if isinstance(a, (Unbounded, Opaque)) or isinstance(b, (Unbounded, Opaque)):
        return None
    return a.almost_equal(b)


def same_set(a, b) -> bool | None:
    if a is b:
        return True
    if a.finite != b.finite:
        return False
    if isinstance(a, (Unbounded, Opaque)) or isinstance(b, (Unbounded, Opaque)):
        return None
    return a == b


def infer_periodic(members: set, length: int, max_period: int = MAX_PERIOD) -> Shape | None:
    """Least eventually periodic set matching ``members`` on [0, length).

    The smallest period wins; a period must repeat at least three times after
    its start and leave some residue occupied.
    """
    bits = bytearray(length)
    for x in members:
        if x < length:
            bits[x] = 1
    for m in range(1, min(max_period, length // 3) + 1):
        x = length - 1
        while x >= m and bits[x] == bits[x - m]:
            x -= 1
        start = 0 if x < m else x - m + 1
        if length - start < max(3 * m, 8):
            continue
        res = [r % m for r in range(start, start + m) if bits[r]]
        if not res:
            continue
        return Shape.make(start, [y for y in range(start) if bits[y]], m, res)
    return None


# ------------------------------------------------------------------ status

@dataclass(frozen=True)
class Status:
    """Limit guess for one stream: stable, growing, or undecided."""

    kind: str
    value: object = None
    last_change: int = -1
    recent: int = 0     # changes in the last window
    before: int = 0     # changes in the window before it

    @property
    def decided(self) -> bool:
        return self.value is not None


STABLE_EMPTY = Status("stable", EMPTY)


def last_change(st: Stream, horizon: int) -> int:
    if isinstance(st, Full):
        return min(horizon, st.until) if st.length_at(horizon) else -1
    ch = st.change_stages()
    k = bisect.bisect_right(ch, horizon)
    return ch[k - 1] if k else -1


def entered(st: Stream, lo: int, hi: int) -> list[int]:
    """Elements enumerated during (lo, hi]."""
    return [x for s, x in st.events() if lo < s <= hi]


def stream_status(st: Stream, horizon: int, window: int) -> Status:
    recent = changes_in(st, horizon - window, horizon)
    before = changes_in(st, horizon - 2 * window, horizon - window)
    if st.kind == "fixed":
        return Status("stable", Seg(st.length), 0 if st.length else -1)
    last = last_change(st, horizon)
    if hasattr(st, "logs"):
        return _lazy_marker_status(st, horizon, window, recent, before, last)
    if recent == 0:
        if isinstance(st, Segment):
            value = Seg(st.length_at(horizon))
        else:
            value = finite_value(st.snapshot(horizon))
        return Status("stable", value, last, recent, before)
    if before == 0:
        return Status("undecided", None, last, recent, before)
    if isinstance(st, Segment):
        return Status("growing", OMEGA, last, recent, before)
    fresh = entered(st, horizon - window, horizon)
    bound = min(fresh)
    prefix = {x for x in st.snapshot(horizon) if x < bound}
    shape = infer_periodic(prefix, bound)
    return Status("growing", shape if shape is not None else Unbounded(), last, recent, before)


def _lazy_marker_status(st, horizon: int, window: int, recent: int, before: int, last: int) -> Status:
    """Judge a move-log marker from its move ranks, without materializing it.

    Move c enumerates the c-th missing number, so the limit is cofinite iff
    some rank recurs forever; a steady least rank across both windows is
    read as that recurrence.
    """
    if recent == 0:
        return Status("stable", Opaque(True), last, recent, before)
    if before == 0:
        return Status("undecided", None, last, recent, before)
    late = min(st.ranks_in(horizon - window, horizon))
    early = min(st.ranks_in(horizon - 2 * window, horizon - window))
    if late <= early:
        return Status("growing", Opaque(False, True), last, recent, before)
    return Status("undecided", None, last, recent, before)


class Judge:
    """Status cache keyed by stream identity; shared columns are judged once."""

    def __init__(self, horizon: int = DEFAULT_HORIZON, window: int = DEFAULT_WINDOW):
        if window < 1 or 2 * window > horizon:
            raise ValueError("need 1 <= window and 2 * window <= horizon")
        self.horizon = horizon
        self.window = window
        self._cache: dict[int, tuple[Stream, Status]] = {}
        self._views: dict = {}

    def view(self, fam: Family, nested: bool = False, copies: float = INF) -> "View":
        key = (id(fam), nested, copies)
        hit = self._views.get(key)
        if hit is None or hit[0] is not fam:
            hit = self._views[key] = (fam, family_view(fam, self, nested, copies))
        return hit[1]

    def status(self, st: Stream | None) -> Status:
        if st is None:
            return STABLE_EMPTY
        hit = self._cache.get(id(st))
        if hit is not None and hit[0] is st:
            return hit[1]
        res = stream_status(st, self.horizon, self.window)
        self._cache[id(st)] = (st, res)
        return res


# ------------------------------------------------------------------ views

@dataclass
class View:
    """Judged columns of one output set.

    ``nested`` groups keys by all but their last entry (inner columns);
    ``copies`` caps column multiplicities (the cap counts as infinite);
    ``default`` is the status of every column not listed.
    """

    cols: Mapping
    default: Status = STABLE_EMPTY
    nested: bool = False
    copies: float = INF
    streams: Mapping = field(default_factory=dict)


def family_view(fam: Family, judge: Judge, nested: bool = False, copies: float = INF) -> View:
    cols = {}
    streams = {}
    for k in fam.keys():
        st = fam.column(k)
        cols[k] = judge.status(st)
        streams[k] = st
    return View(cols, STABLE_EMPTY, nested, copies, streams)


def flat_view(st: Stream, judge: Judge) -> View:
    return View({FLAT: judge.status(st)}, streams={FLAT: st})


def description_view(st: Stream, judge: Judge, settled: int = 24) -> View:
    """Split a described stream into its columns.

    A column is listed while at least ``settled`` of its values had been
    enumerable two windows before the horizon; the highest listed column
    stands for the default of all later ones.
    """
    early = judge.horizon - 2 * judge.window
    split: dict[int, Stream] = {}
    for s, code in st.events():
        x, n = unpair(code)
        split.setdefault(n, Stream(f"col{n}")).add(s, x)
    top = 0
    while column_frontier(early, top + 1) >= settled:
        top += 1
    if column_frontier(early, 0) < settled:
        raise HorizonTooShort("horizon too short to settle any column")
    cols = {n: judge.status(split.get(n)) for n in range(top + 1)}
    return View(cols, cols[top], streams={n: split.get(n) for n in range(top + 1)})


# ------------------------------------------------------------------ verdicts

@dataclass
class PairClassification:
    verdict: str
    evidence: dict = field(default_factory=dict)

    @property
    def related(self) -> bool | None:
        if self.verdict in (STABLE_EQUAL, CO_GROWING):
            return True
        if self.verdict == STABLE_DISTINCT:
            return False
        return None


def _key_text(k) -> str:
    return json.dumps(k if not isinstance(k, tuple) else list(k), default=str)


def _value_text(v) -> str:
    if isinstance(v, Seg):
        return f"[0,{v.n})"
    if isinstance(v, Unbounded):
        return "infinite"
    if isinstance(v, Opaque):
        return "finite" if v.finite else "cofinite"
    if isinstance(v, Shape):
        if v.cofinite and v == OMEGA:
            return "omega"
        return f"shape(start={v.start}, head={sorted(v.head)}, mod={v.mod}, res={sorted(v.res)})"
    return repr(v)


def _evidence(sa: Status, sb: Status, **extra) -> dict:
    ev = {"last_change": [sa.last_change, sb.last_change],
          "window_changes": [[sa.before, sa.recent], [sb.before, sb.recent]]}
    ev.update(extra)
    return ev


def _columnwise(va: View, vb: View, test: Callable) -> PairClassification:
    pending = None
    growing = False
    pairs_checked: dict = {}

    def rows():
        for k, sa in va.cols.items():
            yield k, sa, vb.cols.get(k, vb.default)
        for k, sb in vb.cols.items():
            if k not in va.cols:
                yield k, va.default, sb
        yield "default", va.default, vb.default

    count = 0
    for k, sa, sb in rows():
        count += 1
        memo = (id(sa), id(sb))
        if memo in pairs_checked:
            continue
        pairs_checked[memo] = True
        if sa.decided and sb.decided:
            eq = test(sa.value, sb.value)
        else:
            eq = None
        if eq is False:
            why = "cardinality divergence" if sa.value.finite != sb.value.finite else "column values differ"
            return PairClassification(STABLE_DISTINCT, _evidence(
                sa, sb, witness=why, column=_key_text(k),
                values=[_value_text(sa.value), _value_text(sb.value)]))
        if eq is None:
            if pending is None:
                pending = (k, sa, sb)
            continue
        growing = growing or sa.kind == "growing" or sb.kind == "growing"
    if pending is not None:
        k, sa, sb = pending
        return PairClassification(UNDECIDED, _evidence(sa, sb, column=_key_text(k),
                                                       statuses=[sa.kind, sb.kind]))
    return PairClassification(CO_GROWING if growing else STABLE_EQUAL,
                              {"columns": count - 1})


def _column_values(v: View):
    """Column value per column (grouped by inner column when nested), or None if any is unknown."""
    if not v.nested:
        vals = []
        for st in v.cols.values():
            if not st.decided:
                return None
            vals.append(st.value)
        return vals
    groups: dict = {}
    for k, st in v.cols.items():
        if not st.decided:
            return None
        if st.value == EMPTY:
            groups.setdefault(k[:-1], {})
            continue
        groups.setdefault(k[:-1], {})[k[-1]] = st.value
    return [frozenset(g.items()) for g in groups.values()]


def _value_key(x):
    return repr(x)


def _compare_sets(va: View, vb: View) -> PairClassification:
    ca, cb = _column_values(va), _column_values(vb)
    if ca is None or cb is None or not va.default.decided or not vb.default.decided:
        return PairClassification(UNDECIDED, {"witness": "some column undecided"})
    # unlisted columns follow the default (empty for output families)
    sa = set(ca) | ({frozenset()} if va.nested else {va.default.value})
    sb = set(cb) | ({frozenset()} if vb.nested else {vb.default.value})
    growing = any(s.kind == "growing" for v in (va, vb) for s in v.cols.values())
    if sa == sb:
        return PairClassification(CO_GROWING if growing else STABLE_EQUAL, {"values": len(sa)})
    only = sorted(sa ^ sb, key=_value_key)[0]
    side = "lhs" if only in sa else "rhs"
    return PairClassification(STABLE_DISTINCT, {"witness": f"column value only on {side}",
                                                "value": _value_key(only)})


def _compare_multisets(va: View, vb: View) -> PairClassification:
    ca, cb = _column_values(va), _column_values(vb)
    if ca is None or cb is None:
        return PairClassification(UNDECIDED, {"witness": "some column undecided"})

    def counts(vals, cap):
        c = Counter(v for v in vals if v != EMPTY and v != frozenset())
        return {v: (INF if n >= cap else n) for v, n in c.items()}

    ma, mb = counts(ca, va.copies), counts(cb, vb.copies)
    growing = any(s.kind == "growing" for v in (va, vb) for s in v.cols.values())
    if ma == mb:
        return PairClassification(CO_GROWING if growing else STABLE_EQUAL, {"values": len(ma)})
    diff = sorted((v for v in set(ma) | set(mb) if ma.get(v, 0) != mb.get(v, 0)), key=_value_key)[0]
    return PairClassification(STABLE_DISTINCT, {"witness": "multiplicity differs",
                                                "value": _value_key(diff),
                                                "counts": [ma.get(diff, 0), mb.get(diff, 0)]})


def _measure(v: View, which: str, judge: Judge):
    """(kind, value) for max/min/card of a flat output, or None if unclear."""
    sa = v.cols.get(FLAT, STABLE_EMPTY)
    st = v.streams.get(FLAT)
    if which == "min":
        if st is None:
            return ("stable", INF)
        now = st.minimum(judge.horizon)
        if now == st.minimum(judge.horizon - judge.window):
            return ("stable", now)
        return None
    if sa.kind == "growing":
        return ("growing", INF)
    if sa.kind == "undecided":
        return None
    return ("stable", sa.value.maximum() if which == "max" else sa.value.card())


def _compare_measures(va: View, vb: View, which: str, judge: Judge) -> PairClassification:
    ma, mb = _measure(va, which, judge), _measure(vb, which, judge)
    sa, sb = va.cols.get(FLAT, STABLE_EMPTY), vb.cols.get(FLAT, STABLE_EMPTY)
    if ma is None or mb is None:
        return PairClassification(UNDECIDED, _evidence(sa, sb, measure=which))
    ev = _evidence(sa, sb, measure=which, values=[ma[1], mb[1]])
    if ma[1] != mb[1]:
        ev["witness"] = f"{which} differs"
        return PairClassification(STABLE_DISTINCT, ev)
    kind = CO_GROWING if "growing" in (ma[0], mb[0]) or (sa.kind == "growing" and sb.kind == "growing") else STABLE_EQUAL
    return PairClassification(kind, ev)


def compare_views(va: View, vb: View, rel: str, judge: Judge) -> PairClassification:
    if rel == "EqCe":
        return _columnwise(va, vb, same_set)
    if rel == "E3":
        return _columnwise(va, vb, almost_equal)
    if rel == "ECof":
        def test(a, b):
            if isinstance(a, Unbounded) or isinstance(b, Unbounded):
                return None
            return a.cofinite == b.cofinite
        return _columnwise(va, vb, test)
    if rel == "EFin":
        return _columnwise(va, vb, lambda a, b: a.finite == b.finite)
    if rel == "ESet":
        return _compare_sets(va, vb)
    if rel == "EPerm":
        return _compare_multisets(va, vb)
    if rel in ("EMax", "EMin", "ECard"):
        return _compare_measures(va, vb, rel[1:].lower(), judge)
    raise UnsupportedShape(f"no finite-horizon comparator for {rel}")


def _rel_name(rel) -> str:
    if isinstance(rel, Named):
        return rel.name
    if isinstance(rel, str):
        return Named(rel).name
    raise UnsupportedShape("classification needs a named relation")


def tail_blocks(horizon: int, window: int) -> tuple[int, int, int]:
    """Block indices late enough to be telling yet settled before the last window."""
    top = horizon - window - 1
    return (horizon // 2, horizon // 2 + 3, top)


def z0_blocks_pair(run: ConstructionRun, a: int, b: int, judge: Judge) -> PairClassification:
    """=* on block outputs, judged from the sampled tail blocks of every column."""
    tail = set(run.meta["tail"])
    related = True
    for col in run.meta["columns"]:
        i, j, p = col
        ns = [n for n in run.meta["blocks"][col] if n in tail]
        if not ns:
            raise ValueError("no tail blocks were materialized")
        same = []
        for n in ns:
            sa = judge.status(run.outputs[a].column((i, j, p, n)))
            sb = judge.status(run.outputs[b].column((i, j, p, n)))
            if sa.kind != "stable" or sb.kind != "stable":
                return PairClassification(UNDECIDED, _evidence(sa, sb, column=list(col), block=n))
            same.append(sa.value == sb.value)
        if not any(same):
            sa = judge.status(run.outputs[a].column((i, j, p, ns[-1])))
            sb = judge.status(run.outputs[b].column((i, j, p, ns[-1])))
            return PairClassification(STABLE_DISTINCT, _evidence(
                sa, sb, witness="tail blocks differ", column=list(col), blocks=ns,
                values=[_value_text(sa.value), _value_text(sb.value)]))
        if not all(same):
            return PairClassification(UNDECIDED, {"column": list(col), "blocks": ns,
                                                  "witness": "tail blocks disagree"})
    return PairClassification(STABLE_EQUAL if related else STABLE_DISTINCT,
                              {"columns": len(run.meta["columns"])})


def classify_outputs(fa: Family, fb: Family, rel, horizon: int = DEFAULT_HORIZON,
                     window: int = DEFAULT_WINDOW, meta: Mapping | None = None,
                     judge: Judge | None = None) -> PairClassification:
    """Classify two output families (possibly from separate runs)."""
    judge = judge or Judge(horizon, window)
    meta = meta or {}
    name = _rel_name(rel)
    va = judge.view(fa, meta.get("nested", False), meta.get("copies", INF))
    vb = judge.view(fb, meta.get("nested", False), meta.get("copies", INF))
    return compare_views(va, vb, name, judge)


def classify_pair(run: ConstructionRun, pair: tuple, rel, horizon: int | None = None,
                  window: int = DEFAULT_WINDOW, judge: Judge | None = None) -> PairClassification:
    horizon = run.horizon if horizon is None else horizon
    judge = judge or Judge(horizon, window)
    a, b = pair
    if run.id == "z0_to_e3" and _rel_name(rel) == "E3":
        return z0_blocks_pair(run, a, b, judge)
    return classify_outputs(run.outputs[a], run.outputs[b], rel, horizon, window, run.meta, judge)


def classify_streams(sa: Stream, sb: Stream, rel, horizon: int = DEFAULT_HORIZON,
                     window: int = DEFAULT_WINDOW, columns: bool = False) -> PairClassification:
    """Classify two plain streams; ``columns`` reads them column by column."""
    judge = Judge(horizon, window)
    view = (lambda st: description_view(st, judge)) if columns else (lambda st: flat_view(st, judge))
    return compare_views(view(sa), view(sb), _rel_name(rel), judge)


# ------------------------------------------------------------------ finite oracles

def is_nary_reduction(E: Callable, F: Callable, g: Callable, n: int, field: Sequence[int]) -> list:
    """Tuples (with the offending positions) where g breaks the n-ary biconditionals."""
    bad = []
    for xs in itertools.product(field, repeat=n):
        ys = g(xs)
        for i, j in itertools.combinations(range(n), 2):
            if E(xs[i], xs[j]) != F(ys[i], ys[j]):
                bad.append((xs, i, j))
                break
    return bad


def _signature(xs: tuple, E: Table) -> tuple:
    """Shape of a tuple: class pattern plus which positions hold the same number."""
    cls, same = {}, {}
    return (tuple(cls.setdefault(E.class_of(x), len(cls)) for x in xs),
            tuple(same.setdefault(x, len(same)) for x in xs))


def brute_nary(E: Table, F: Table, n: int, target_field_bound: int | None = None,
               growing: Iterable[int] = ()) -> tuple[bool, dict | None]:
    """Exhaustive search for an n-ary reduction from E to F on their fields.

    Targets are the first ``target_field_bound`` numbers of F's field.  Numbers
    listed in ``growing`` belong to F's unbounded classes (the classes whose
    members keep growing in the limit); when any are listed, two distinct
    E-related inputs must land in such a class, since relatedness of distinct
    inputs is only ever witnessed by unbounded growth.  Tuples are grouped by
    signature and each signature is solved once.
    """
    targets = F.field if target_field_bound is None else F.field[:target_field_bound]
    grow_cls = {F.class_of(y) for y in growing}
    typed = bool(grow_cls)
    solved: dict = {}
    witness: dict = {}
    for xs in itertools.product(E.field, repeat=n):
        sig = _signature(xs, E)
        if sig not in solved:
            solved[sig] = _solve(xs, E, F, targets, grow_cls if typed else None)
        ys = solved[sig]
        if ys is None:
            return False, None
        witness[xs] = ys
    return True, witness


def _solve(xs, E: Table, F: Table, targets, grow_cls):
    n = len(xs)
    rel = [[E.related(xs[i], xs[j]) for j in range(n)] for i in range(n)]
    forced = [grow_cls is not None and any(rel[i][j] and xs[i] != xs[j] for j in range(n))
              for i in range(n)]
    choices = [[y for y in targets if not forced[i] or F.class_of(y) in grow_cls] for i in range(n)]

    def extend(prefix):
        i = len(prefix)
        if i == n:
            return tuple(prefix)
        for y in choices[i]:
            if all(F.related(prefix[j], y) == rel[j][i] for j in range(i)):
                got = extend(prefix + [y])
                if got is not None:
                    return got
        return None

    return extend([])


def emax_shadow() -> tuple[Table, Table, list[int]]:
    """Three classes of two numbers each, against one unbounded and two finite singleton classes."""
    E = Table([[0, 1], [2, 3], [4, 5]])
    F = Table([[0, 1, 2, 3], [4], [5]])
    return E, F, [0]


# ------------------------------------------------------------------ scenarios

SCHEMA = "ceerlab/1"
CONSTRUCTIONS = (
    "dup_columns", "perm_to_set", "cof_to_set", "z0_to_e3", "set_to_e3_binary",
    "set_to_e3_ternary", "set_to_e3_finitary", "pi02_to_eqce", "min_to_max",
    "eqce_to_emax_ternary", "card_max_bridge", "block_relation", "chain_relation",
)
ADVERSARIES = (
    "adv_set_not_e3", "adv_max_to_min_binary", "adv_no4ary_emax", "adv_pigeonhole",
    "adv_finitary_slice", "adv_infclasses",
)


@dataclass
class Scenario:
    name: str
    construction: str | None = None
    adversary: str | None = None
    relation: RelationSpec | None = None
    descriptions: list = field(default_factory=list)
    chips: ChipPolicy = field(default_factory=ChipPolicy)
    params: dict = field(default_factory=dict)
    horizon: int = DEFAULT_HORIZON
    window: int = DEFAULT_WINDOW
    seed: int = 0
    candidate: str | None = None
    expect: str = "pass"
    source: str | None = None

    @property
    def field(self) -> list:
        if isinstance(self.relation, Table):
            return self.relation.field
        return list(range(len(self.descriptions)))


def parse_scenario(obj, name: str = "scenario") -> Scenario:
    if not isinstance(obj, dict):
        raise ParseError("scenario must be a JSON object")
    if obj.get("schema") != SCHEMA:
        raise ParseError(f"schema must be {SCHEMA!r}, got {obj.get('schema')!r}")
    cons, adv = obj.get("construction"), obj.get("adversary")
    if (cons is None) == (adv is None):
        raise ParseError("scenario needs exactly one of 'construction' or 'adversary'")
    if cons is not None and cons not in CONSTRUCTIONS:
        raise ParseError(f"unknown construction {cons!r}")
    if adv is not None and adv not in ADVERSARIES:
        raise ParseError(f"unknown adversary {adv!r}")
    rel = None
    if "relation" in obj:
        try:
            rel = parse_relation(obj["relation"])
        except ParseError as exc:
            raise ParseError(f"relation: {exc}") from exc
    descs = []
    for i, lit in enumerate(obj.get("descriptions", [])):
        try:
            descs.append(parse_description(lit))
        except ParseError as exc:
            raise ParseError(f"descriptions[{i}]: {exc}") from exc
    try:
        horizon = int(obj.get("horizon", DEFAULT_HORIZON))
        window = int(obj.get("window", DEFAULT_WINDOW))
        seed = int(obj.get("seed", 0))
    except (TypeError, ValueError) as exc:
        raise ParseError(f"horizon, window and seed must be integers: {exc}") from exc
    if horizon < 1 or window < 1 or 2 * window > horizon:
        raise ParseError("need horizon >= 2 * window >= 2")
    params = obj.get("params", {})
    if not isinstance(params, dict):
        raise ParseError("params must be an object")
    expect = obj.get("expect", "pass")
    if expect not in ("pass", "fail"):
        raise ParseError("expect must be 'pass' or 'fail'")
    return Scenario(
        name=str(obj.get("name", name)), construction=cons, adversary=adv, relation=rel,
        descriptions=descs, chips=ChipPolicy.parse(obj.get("chips")), params=params,
        horizon=horizon, window=window, seed=seed, candidate=obj.get("candidate"),
        expect=expect,
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path.name}: not valid JSON ({exc})") from exc
    sc = parse_scenario(obj, path.stem)
    sc.source = str(path)
    return sc


def with_overrides(sc: Scenario, horizon=None, window=None, seed=None) -> Scenario:
    out = Scenario(**{**sc.__dict__})
    if horizon is not None:
        out.horizon = horizon
        if window is None and 2 * out.window > horizon:
            out.window = max(1, horizon // 10)
    if window is not None:
        out.window = window
    if seed is not None:
        out.seed = seed
    if out.window < 1 or 2 * out.window > out.horizon:
        raise ParseError("need horizon >= 2 * window >= 2")
    return out


def seeded_policy(sc: Scenario, pairs: Sequence[tuple]) -> ChipPolicy:
    """The chip policy, with ``noise_count`` random noise chips drawn from the seed."""
    count = int(sc.params.get("noise_count", 0))
    if not count or not pairs:
        return sc.chips
    rng = random.Random(sc.seed)
    extra = []
    for _ in range(count):
        p = rng.choice(list(pairs))
        extra.append((p, (rng.randrange(1, 60),)))
    return ChipPolicy(sc.chips.period, sc.chips.phase, sc.chips.noise + tuple(extra))


# ------------------------------------------------------------------ reports

@dataclass
class PairRow:
    pair: tuple
    expected: bool
    verdict: str
    evidence: dict = field(default_factory=dict)

    @property
    def observed(self) -> bool | None:
        return PairClassification(self.verdict).related

    @property
    def match(self) -> bool:
        return self.observed == self.expected


@dataclass
class Report:
    scenario: str
    construction: str
    rows: list = field(default_factory=list)
    audits: list = field(default_factory=list)
    digest: str = ""
    runtime: float = 0.0
    extra: dict = field(default_factory=dict)
    verdict: object = None      # adversary matches only
    expect: str = "pass"

    @property
    def undecided(self) -> list:
        return [r for r in self.rows if r.verdict == UNDECIDED]

    @property
    def mismatches(self) -> list:
        return [r for r in self.rows if r.observed is not None and not r.match]

    @property
    def passed(self) -> bool:
        if self.verdict is not None:
            return bool(self.extra.get("validated")) and type(self.verdict).__name__ == "Defeated"
        return bool(self.rows) and not self.undecided and not self.mismatches and not self.audits

    def table(self) -> str:
        lines = [f"scenario {self.scenario} [{self.construction}]"]
        if self.verdict is not None:
            lines.append(f"  verdict: {self.verdict.describe()}")
        else:
            lines.append(f"  {'pair':<12}{'expected':<12}{'observed':<16}match")
            for r in self.rows:
                exp = "related" if r.expected else "unrelated"
                lines.append(f"  {str(r.pair):<12}{exp:<12}{r.verdict:<16}{'yes' if r.match else 'NO'}")
        if self.audits:
            lines.append(f"  audit violations: {len(self.audits)}")
        if "block_maxima" in self.extra:
            lines.append(f"  block maxima: {self.extra['block_maxima']}")
        lines.append(f"  digest {self.digest}")
        lines.append(f"  {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        out = {"scenario": self.scenario, "construction": self.construction,
               "passed": self.passed, "digest": self.digest, "runtime": round(self.runtime, 3),
               "rows": [{"pair": list(r.pair), "expected": r.expected, "verdict": r.verdict,
                         "match": r.match, "evidence": r.evidence} for r in self.rows],
               "audits": self.audits[:20]}
        if self.verdict is not None:
            out["verdict"] = self.verdict.describe()
            out["certificate"] = getattr(self.verdict, "certificate", None) and self.verdict.certificate.to_dict()
        return out


def combined_trace(runs: Sequence[ConstructionRun]) -> Trace:
    if len(runs) == 1:
        return runs[0].trace
    out = Trace()
    for idx, run in enumerate(runs):
        for r in run.trace:
            out.log(r.stage, f"{r.actor}#{idx}", r.rule, **r.data)
    return out


# ------------------------------------------------------------------ executing constructions

def _need(sc: Scenario, count: int | None = None, kind=None):
    if count is not None and len(sc.descriptions) != count:
        raise ParseError(f"{sc.construction} takes {count} descriptions, got {len(sc.descriptions)}")
    if not sc.descriptions:
        raise ParseError(f"{sc.construction} needs descriptions")
    if kind is not None:
        for i, d in enumerate(sc.descriptions):
            if not isinstance(d, kind):
                raise UnsupportedShape(f"descriptions[{i}] must be {kind.__name__}")


def z0_periods(descs: Sequence[SetDescription]) -> tuple:
    """Thresholds 2^-p for p = 4 .. enough to separate every positive density difference."""
    mods = [d.col.mod for d in descs if isinstance(d, Flat) and hasattr(d.col, "mod")]
    lcm = math.lcm(*mods) if mods else 1
    top = max(5, math.ceil(math.log2(lcm)) + 1)
    return tuple(range(4, top + 1))


def cof_nbound(descs: Sequence[SetDescription]) -> int:
    """Columns C(i, n) with n past every missing number of a cofinite column."""
    top = 2
    for d in descs:
        cols = [c for _, c in d.cols] + [d.default] if isinstance(d, Columnar) else [d.col]
        for c in cols:
            sh = c.shape()
            if sh.cofinite:
                top = max(top, sh.start + 1)
    return top


def _ground(sc: Scenario, rel: str):
    return lambda i, j: eval_ground(Named(rel), sc.descriptions[i], sc.descriptions[j])


def _field_pairs(k: int):
    return list(itertools.combinations(range(k), 2))


def execute(sc: Scenario) -> tuple[Report, Trace]:
    """Run a construction scenario and classify every field pair."""
    t0 = time.perf_counter()
    H, W = sc.horizon, sc.window
    judge = Judge(H, W)
    c = sc.construction
    extra: dict = {}
    audits: list = []
    rows: list[PairRow] = []

    if c in ("block_relation", "chain_relation"):
        return _execute_combinator(sc, t0)

    if c == "pi02_to_eqce":
        if not isinstance(sc.relation, Table):
            raise ParseError("pi02_to_eqce needs a relation table")
        table = sc.relation
        fld = table.field
        if len(fld) < 2:
            raise ParseError("pi02_to_eqce needs a field of at least two indices")
        policy = seeded_policy(sc, list(itertools.combinations(fld, 2)))
        chips, _ = chips_from_spec(table, policy)
        run = pi02_to_eqce(len(fld), chips, H, field=fld)
        runs = [run]
        audits = run.audit
        for i, j in _field_pairs(len(fld)):
            cl = classify_pair(run, (i, j), "EqCe", judge=judge)
            rows.append(PairRow((fld[i], fld[j]), table.related(fld[i], fld[j]), cl.verdict, cl.evidence))
    elif c in ("set_to_e3_binary", "set_to_e3_ternary", "set_to_e3_finitary"):
        _need(sc, {"set_to_e3_binary": 2, "set_to_e3_ternary": 3}.get(c), Columnar)
        span = int(sc.params.get("span", column_span(sc.descriptions)))
        if span < column_span(sc.descriptions):
            raise ParseError("span must cover every listed column plus one default column")
        n = len(sc.descriptions)
        policy = seeded_policy(sc, [((u, a), (v, b)) for u in range(n) for v in range(n) if u < v
                                    for a in range(span) for b in range(span)][:1])
        chips = column_chips(sc.descriptions, policy, span)
        if c == "set_to_e3_binary":
            run = set_to_e3_binary(chips, H, span)
            outs = ["f", "g"]
        elif c == "set_to_e3_ternary":
            run = set_to_e3_ternary(chips, H, span)
            outs = [0, 1, 2]
        else:
            run = set_to_e3_finitary(chips, n, H, span, int(sc.params.get("max_field", 5)))
            outs = list(range(n))
        runs = [run]
        truth = _ground(sc, "ESet")
        for i, j in _field_pairs(n):
            cl = classify_outputs(run.outputs[outs[i]], run.outputs[outs[j]], "E3", judge=judge)
            rows.append(PairRow((i, j), truth(i, j), cl.verdict, cl.evidence))
        extra["columns"] = run.meta.get("columns")
    elif c == "z0_to_e3":
        _need(sc, None, Flat)
        ps = tuple(sc.params.get("ps", z0_periods(sc.descriptions)))
        tail = tuple(sc.params.get("tail", tail_blocks(H, W)))
        run = z0_to_e3(sc.descriptions, H, ps=ps, tail=tail)
        run.meta["tail"] = tail
        runs = [run]
        audits = run.audit
        truth = _ground(sc, "Z0")
        for i, j in _field_pairs(len(sc.descriptions)):
            cl = classify_pair(run, (i, j), "E3", judge=judge)
            rows.append(PairRow((i, j), truth(i, j), cl.verdict, cl.evidence))
        extra["block_maxima"] = run.meta["block_maxima"]
    elif c == "min_to_max":
        _need(sc)
        run = min_to_max_finitary(sc.descriptions, H)
        runs = [run]
        truth = _ground(sc, "EMin")
        for i, j in _field_pairs(len(sc.descriptions)):
            cl = classify_pair(run, (i, j), "EMax", judge=judge)
            rows.append(PairRow((i, j), truth(i, j), cl.verdict, cl.evidence))
    elif c == "eqce_to_emax_ternary":
        _need(sc, 3)
        run = eqce_to_emax_ternary(sc.descriptions, H)
        runs = [run]
        truth = _ground(sc, "EqCe")
        for i, j in _field_pairs(3):
            cl = classify_pair(run, (i, j), "EMax", judge=judge)
            rows.append(PairRow((i, j), truth(i, j), cl.verdict, cl.evidence))
    elif c in ("dup_columns", "perm_to_set", "cof_to_set", "card_max_bridge"):
        runs, rows, extra = _execute_unary(sc, judge)
    else:  # pragma: no cover - parse_scenario rejects unknown names
        raise ParseError(f"unknown construction {c!r}")

    trace = combined_trace(runs)
    report = Report(sc.name, c, rows, list(audits), trace.digest(), time.perf_counter() - t0,
                    extra, expect=sc.expect)
    return report, trace


def _execute_unary(sc: Scenario, judge: Judge):
    c = sc.construction
    _need(sc)
    H = sc.horizon
    descs = sc.descriptions
    extra: dict = {}
    if c == "card_max_bridge":
        direction = sc.params.get("direction", "card->max")
        if direction not in ("max->card", "card->max"):
            raise ParseError(f"unknown direction {direction!r}")
        src, dst = ("EMax", "ECard") if direction == "max->card" else ("ECard", "EMax")
        runs = [card_max_bridge(direction, d, H) for d in descs]
        out = 0
    else:
        for i, d in enumerate(descs):
            if not isinstance(d, Columnar):
                raise UnsupportedShape(f"descriptions[{i}] must be columnar")
        span = int(sc.params.get("span", column_span(descs)))
        out = "out"
        if c == "dup_columns":
            src, dst = "ESet", "EPerm"
            runs = [dup_columns(d, H, span, int(sc.params.get("copies", 3))) for d in descs]
        elif c == "perm_to_set":
            src, dst = "EPerm", "ESet"
            runs = [perm_to_set(d, H, span, width=0) for d in descs]
            # D columns only need to reach the longest guess that settled
            for r in runs:
                fam = r.outputs["out"]
                lens = [judge.status(fam.column(k)).value.n for k in list(fam.cols)
                        if k[0] == "C" and k[3] != 0 and judge.status(fam.column(k)).kind == "stable"]
                pad_family(r, max(lens, default=0) + 1)
        else:
            src, dst = "ECof", "ESet"
            nbound = int(sc.params.get("nbound", cof_nbound(descs)))
            runs = [cof_to_set(d, H, span, nbound) for d in descs]
        if c != "dup_columns":
            width = max(r.meta["width"] for r in runs)
            for r in runs:
                pad_family(r, width)
            extra["width"] = width
    truth = _ground(sc, src)
    rows = []
    for i, j in _field_pairs(len(descs)):
        meta = runs[i].meta
        cl = classify_outputs(runs[i].outputs[out], runs[j].outputs[out], dst, meta=meta, judge=judge)
        rows.append(PairRow((i, j), truth(i, j), cl.verdict, cl.evidence))
    return runs, rows, extra


def _execute_combinator(sc: Scenario, t0: float) -> tuple[Report, Trace]:
    descs = dict(enumerate(sc.descriptions))
    count = int(sc.params.get("tuples", 20))
    trace = Trace()
    rows = []
    eq = lambda a, b: a == b or eval_ground(Named("EqCe"), descs[a], descs[b])
    if sc.construction == "block_relation":
        n = int(sc.params.get("n", 3))
        listing = [t for t in small_tuples(n, count * 4) if max(t) < len(descs)][:count]
        rel = BlockRelation(n, listing, descs)
    else:
        listing = [t for t in small_tuples(None, count * 8) if max(t) < len(descs)][:count]
        rel = ChainRelation(listing, descs)
    for m, xs in enumerate(listing):
        ys = rel.reduce(xs)
        trace.log(m, sc.construction, "reduce", tuple=list(xs), image=list(ys))
        for i, j in itertools.combinations(range(len(xs)), 2):
            got = rel.related(ys[i], ys[j])
            rows.append(PairRow((xs[i], xs[j]), eq(xs[i], xs[j]),
                                STABLE_EQUAL if got else STABLE_DISTINCT,
                                {"tuple": list(xs), "image": [ys[i], ys[j]]}))
    report = Report(sc.name, sc.construction, rows, [], trace.digest(), time.perf_counter() - t0,
                    {"tuples": len(listing)}, expect=sc.expect)
    return report, trace


def verify_reduction(sc: Scenario, strict: bool = False) -> Report:
    """Run the scenario's construction and compare every pair with ground truth."""
    if sc.construction is None:
        raise ParseError("verify_reduction needs a construction scenario")
    report, _ = execute(sc)
    if strict and report.undecided:
        raise UndecidedPresent(report)
    return report


def run_scenario(path, horizon: int | None = None, window: int | None = None,
                 seed: int | None = None, trace_path=None, candidate: str | None = None):
    """Load, run and report one scenario file; returns (Report, Trace)."""
    sc = with_overrides(load_scenario(path), horizon, window, seed)
    return run_loaded(sc, trace_path, candidate)


def run_loaded(sc: Scenario, trace_path=None, candidate: str | None = None):
    if sc.adversary is not None:
        from .adversaries import run_adversary_scenario
        report, trace = run_adversary_scenario(sc, candidate)
    else:
        report, trace = execute(sc)
    if trace_path is not None:
        trace.write(trace_path)
    return report, trace


def digest_of(texts: Iterable[str]) -> str:
    h = hashlib.sha256()
    for t in texts:
        h.update(t.encode())
    return h.hexdigest()
