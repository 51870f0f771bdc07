"""Run records, output families, traces and replay."""
from __future__ import annotations

import bisect
import hashlib
import heapq
import json
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

from ..universe import INF, NEG_INF, Segment, Stream


class FieldTooLarge(ValueError):
    """A construction table would exceed the configured size bound."""


@dataclass(frozen=True)
class TraceRecord:
    stage: int
    actor: str
    rule: str
    data: dict

    def line(self) -> str:
        return json.dumps({"stage": self.stage, "actor": self.actor, "rule": self.rule,
                           "data": self.data}, sort_keys=True, separators=(",", ":"))


class Trace:
    def __init__(self):
        self.records: list[TraceRecord] = []

    def log(self, stage: int, actor: str, rule: str, **data) -> None:
        self.records.append(TraceRecord(stage, actor, rule, _jsonable(data)))

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def jsonl(self) -> str:
        return "".join(r.line() + "\n" for r in self.records)

    def digest(self) -> str:
        h = hashlib.sha256()
        for r in self.records:
            h.update(r.line().encode())
            h.update(b"\n")
        return h.hexdigest()

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.jsonl())


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (tuple, list)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (set, frozenset)):
        return sorted(_jsonable(v) for v in x)
    return x


def key_from_json(k):
    if isinstance(k, list):
        return tuple(key_from_json(v) for v in k)
    return k


# ----------------------------------------------------------- column kinds

class Full(Segment):
    """The whole of omega, enumerated at the frontier: [0, s - since] at stage s."""

    kind = "full"

    def __init__(self, since: int = 0, name: str = "", scope: str | None = None):
        super().__init__(name, scope)
        self.since = since
        self.until = since

    def length_at(self, s: int) -> int:
        return max(0, min(s, self.until) - self.since + 1)

    @property
    def length(self) -> int:
        return self.length_at(self.until)

    def advance(self, stage: int) -> None:
        self.until = max(self.until, stage)
        self._top = self.length - 1

    def change_stages(self) -> list[int]:
        return list(range(self.since, self.until + 1))

    def changes_in(self, lo: int, hi: int) -> int:
        return max(0, min(hi, self.until) - max(lo + 1, self.since) + 1)

    def ranks_in(self, lo: int, hi: int) -> list[int]:
        return [0] * self.changes_in(lo, hi)


class Fixed(Segment):
    """The initial segment [0, n), present from stage 0 on and never changing."""

    kind = "fixed"

    def __init__(self, n: int):
        super().__init__()
        if n:
            self.extend_to(0, n)


class Marker(Stream):
    """Set column grown only by marker moves: move c enumerates the c-th gap."""

    kind = "marker"

    def __init__(self, name: str = "", scope: str | None = None):
        super().__init__(name, scope)
        self._ranks: list[int] = []

    def move(self, stage: int, c: int) -> int:
        x = nth_gap(self._members, c)
        self.add(stage, x)
        self._ranks.append(c)
        return x

    def ranks_in(self, lo: int, hi: int) -> list[int]:
        a = bisect.bisect_right(self._stages, lo)
        b = bisect.bisect_right(self._stages, hi)
        return self._ranks[a:b]


def nth_gap(members, c: int) -> int:
    """The c-th (0-based) smallest natural not in ``members``."""
    x, seen = 0, -1
    while True:
        if x not in members:
            seen += 1
            if seen == c:
                return x
        x += 1


def changes_in(st: Stream, lo: int, hi: int) -> int:
    """Number of change stages in (lo, hi]."""
    if hasattr(st, "changes_in"):
        return st.changes_in(lo, hi)
    ch = st.change_stages()
    return bisect.bisect_right(ch, hi) - bisect.bisect_right(ch, lo)


def ranks_in(st: Stream, lo: int, hi: int) -> list[int]:
    """Gap ranks of the elements enumerated during (lo, hi]."""
    if hasattr(st, "ranks_in"):
        return st.ranks_in(lo, hi)
    if isinstance(st, Segment):
        return [0] * changes_in(st, lo, hi)
    evs = st.events()
    before = sorted(x for s, x in evs if s <= lo)
    out = []
    for s, x in evs:
        if lo < s <= hi:
            i = bisect.bisect_left(before, x)
            out.append(x - i)  # naturals below x that were still missing
            before.insert(i, x)
    return out


# ----------------------------------------------------------------- families

class Family:
    """An output set presented column by column; absent columns are empty."""

    def __init__(self, name: str):
        self.name = name
        self.cols: dict[Any, Stream] = {}
        self.lazy: dict[Any, Callable[[], Stream]] = {}
        self.implicit: Callable[[], Iterable] | None = None

    def get(self, key, kind: str = "segment", since: int = 0) -> Stream:
        st = self.cols.get(key)
        if st is None:
            st = make_column(kind, since, f"{self.name}{list(key) if isinstance(key, tuple) else key}")
            self.cols[key] = st
        return st

    def column(self, key) -> Stream | None:
        if key in self.cols:
            return self.cols[key]
        if key in self.lazy:
            st = self.lazy[key]()
            self.cols[key] = st
            return st
        return None

    def keys(self) -> list:
        ks = set(self.cols) | set(self.lazy)
        return sorted(ks, key=repr)

    def stored(self) -> int:
        return len(self.cols)


class VirtualFamily(Family):
    """Family whose columns are computed on demand and never stored.

    ``key_space`` yields every column key; ``build(key)`` returns the
    (possibly shared) column for a key.
    """

    def __init__(self, name: str, key_space: Callable[[], Iterable], build: Callable[[Any], Stream]):
        super().__init__(name)
        self.key_space = key_space
        self.build = build

    def column(self, key) -> Stream | None:
        return self.cols.get(key) or self.build(key)

    def keys(self):
        return self.key_space()

    def snapshot(self, s: int | None = None) -> dict:
        out = {}
        for k in self.keys():
            snap = self.column(k).snapshot(s)
            if snap:
                out[k] = snap
        return out


def make_column(kind: str, since: int = 0, name: str = "") -> Stream:
    if kind == "segment":
        return Segment(name)
    if kind == "full":
        return Full(since, name)
    if kind == "marker":
        return Marker(name)
    if kind == "set":
        return Stream(name)
    raise ValueError(kind)


FLAT = "flat"  # column key of single-column outputs


@dataclass
class ConstructionRun:
    id: str
    inputs: list = field(default_factory=list)
    outputs: dict = field(default_factory=dict)   # name -> Family
    trace: Trace = field(default_factory=Trace)
    horizon: int = 0
    meta: dict = field(default_factory=dict)
    audit: list = field(default_factory=list)    # invariant violations

    def family(self, name) -> Family:
        if name not in self.outputs:
            self.outputs[name] = Family(str(name))
        return self.outputs[name]

    # recorded mutations; replay() understands exactly these
    def extend(self, stage: int, out, key, length: int, rule: str) -> bool:
        st = self.family(out).get(key, "segment")
        if st.extend_to(stage, length):
            self.trace.log(stage, self.id, rule, out=out, col=key, op="extend", v=length)
            return True
        return False

    def add(self, stage: int, out, key, x: int, rule: str) -> bool:
        st = self.family(out).get(key, "set")
        if st.add(stage, x):
            self.trace.log(stage, self.id, rule, out=out, col=key, op="add", v=x)
            return True
        return False

    def move(self, stage: int, out, key, c: int, rule: str = "marker") -> int:
        st = self.family(out).get(key, "marker")
        x = st.move(stage, c)
        self.trace.log(stage, self.id, rule, out=out, col=key, op="move", v=c)
        return x

    def fill(self, stage: int, out, key, rule: str = "fill") -> None:
        self.family(out).get(key, "full", since=stage)
        self.trace.log(stage, self.id, rule, out=out, col=key, op="fill", v=stage)

    def finish(self, horizon: int) -> "ConstructionRun":
        self.horizon = horizon
        for fam in self.outputs.values():
            for st in fam.cols.values():
                if isinstance(st, Full):
                    st.advance(horizon)
        return self

    def output_names(self) -> list:
        return list(self.outputs)


def replay(run: ConstructionRun) -> dict:
    """Rebuild output families from the trace alone."""
    fams: dict = {}
    for r in run.trace:
        op = r.data.get("op")
        if op is None:
            continue
        out = key_from_json(r.data["out"])
        key = key_from_json(r.data["col"])
        fam = fams.setdefault(out, Family(str(out)))
        if op == "extend":
            fam.get(key, "segment").extend_to(r.stage, r.data["v"])
        elif op == "add":
            fam.get(key, "set").add(r.stage, r.data["v"])
        elif op == "move":
            fam.get(key, "marker").move(r.stage, r.data["v"])
        elif op == "fill":
            fam.get(key, "full", since=r.data["v"])
    for fam in fams.values():
        for st in fam.cols.values():
            if isinstance(st, Full):
                st.advance(run.horizon)
    return fams


def same_history(a: Stream, b: Stream, horizon: int) -> bool:
    """Identical snapshots at every stage up to the horizon."""
    if type(a) is not type(b):
        return False
    if isinstance(a, Segment):
        return all(a.length_at(s) == b.length_at(s) for s in sorted(set(a.change_stages()) | set(b.change_stages()) | {horizon}))
    return a.events() == b.events()


def replay_matches(run: ConstructionRun) -> bool:
    """Trace replay reproduces every stored column (and any move logs)."""
    if "logs" in run.meta:
        rebuilt: dict = {}
        for r in run.trace:
            if r.rule == "marker" and "disjunct" in r.data:
                rebuilt.setdefault(tuple(r.data["disjunct"]), []).append((r.stage, r.data["c"]))
        if rebuilt != {k: v for k, v in run.meta["logs"].items() if v}:
            return False
    fams = replay(run)
    for name, fam in run.outputs.items():
        other = fams.get(key_from_json(_jsonable(name)))
        for key, st in fam.cols.items():
            if not st.snapshot() and not st.change_stages():
                continue
            o = other.cols.get(key_from_json(_jsonable(key))) if other else None
            if o is None or not same_history(st, o, run.horizon):
                return False
    return True


def merge_logs(logs: Iterable[list]) -> list:
    """Merge per-source (stage, value) logs into one stage-ordered list."""
    return list(heapq.merge(*logs))


def extremum(st: Stream, which: str, s: int | None = None) -> float:
    return st.maximum(s) if which == "max" else st.minimum(s)


__all__ = [
    "FieldTooLarge", "TraceRecord", "Trace", "Full", "Fixed", "Marker", "Family", "VirtualFamily",
    "ConstructionRun",
    "FLAT", "replay", "replay_matches", "nth_gap", "changes_in", "ranks_in", "merge_logs",
    "INF", "NEG_INF",
]
