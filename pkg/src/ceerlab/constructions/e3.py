"""Column-set equality into almost-equality of columns: binary, ternary, finitary."""
from __future__ import annotations

import bisect
import itertools
from dataclasses import dataclass

from ..relations import ChipPolicy, ChipSchedule, Table, chips_from_spec, column_shapes
from ..universe import SetDescription, Stream
from .base import ConstructionRun, FieldTooLarge, Full, VirtualFamily, nth_gap


@dataclass
class ColumnChips:
    """Chips on column pairs: label l stands for column labels[l] = (input, column)."""

    labels: list
    schedule: ChipSchedule

    def chip(self, s: int):
        c = self.schedule.chip(s)
        if c is None:
            return None
        return self.labels[c[0]], self.labels[c[1]]


def column_span(descs) -> int:
    """Columns 0..span-1 cover every listed column plus one default column."""
    top = -1
    for d in descs:
        cols, _ = column_shapes(d)
        top = max([top, *cols])
    return top + 2


def column_chips(descs: list[SetDescription], policy: ChipPolicy, span: int | None = None) -> ColumnChips:
    """Chip schedule whose within-class pairs are columns with equal limit sets."""
    span = span or column_span(descs)
    labels = [(u, c) for u in range(len(descs)) for c in range(span)]
    shapes = []
    for u, d in enumerate(descs):
        cols, default = column_shapes(d)
        shapes.extend(cols.get(c, default) for c in range(span))
    groups: dict = {}
    for idx, sh in enumerate(shapes):
        groups.setdefault(sh, []).append(idx)
    sched, _ = chips_from_spec(Table(groups.values()), policy)
    return ColumnChips(labels, sched)


def _chip_pairs(chips: ColumnChips, s: int):
    """Both orientations ((u, i), (v, c)) of a cross-input chip at stage s."""
    ch = chips.chip(s)
    if ch is None or ch[0][0] == ch[1][0]:
        return ()
    return (ch, (ch[1], ch[0]))


def set_to_e3_binary(chips: ColumnChips, horizon: int, span: int | None = None) -> ConstructionRun:
    """Outputs f, g; even column 2k asks whether column k of x occurs in y."""
    span = span or max(c for _, c in chips.labels) + 1
    run = ConstructionRun("set_to_e3_binary", inputs=[0, 1], meta={"span": span})
    for k in range(span):
        run.fill(0, "f", 2 * k)
        run.fill(0, "g", 2 * k + 1)
    for s in range(horizon + 1):
        for (u, i), (v, c) in _chip_pairs(chips, s):
            if u == 0:      # chip for x^[i] and y^[c]
                run.move(s, "g", 2 * i, c)
            else:           # chip for y^[i] and x^[c]
                run.move(s, "f", 2 * i + 1, c)
    return run.finish(horizon)


def set_to_e3_ternary(chips: ColumnChips, horizon: int, span: int | None = None) -> ConstructionRun:
    """Outputs 0, 1, 2 built from the L and R column families."""
    span = span or max(c for _, c in chips.labels) + 1
    run = ConstructionRun("set_to_e3_ternary", inputs=[0, 1, 2], meta={"span": span})
    others = {w: [p for p in range(3) if p != w] for w in range(3)}
    idx = list(itertools.product(range(span), repeat=2))
    for w in range(3):
        p, q = others[w]
        for a, b in idx:
            run.fill(0, w, ("L", w, a, b))
            run.fill(0, p, ("R", w, a, b))
            run.fill(0, q, ("R", w, a, b))
    for s in range(horizon + 1):
        for (u, i), (v, c) in _chip_pairs(chips, s):
            # left family of u: column i of u may occur as column c of v
            p, q = others[u]
            for a, b in idx:
                if (v == p and a == i) or (v == q and b == i):
                    run.move(s, p, ("L", u, a, b), c)
                    run.move(s, q, ("L", u, a, b), c)
            # right family of v: column i of u may occur as column c of v
            p, q = others[v]
            for a, b in idx:
                if (u == p and a == i) or (u == q and b == i):
                    run.move(s, v, ("R", v, a, b), c)
    return run.finish(horizon)


# ---------------------------------------------------------------- finitary

def partitions(items: list) -> list[list[list]]:
    """All set partitions of ``items``, in a fixed order."""
    if not items:
        return [[]]
    head, rest = items[0], items[1:]
    out = []
    for p in partitions(rest):
        out.append([[head], *p])
        for k in range(len(p)):
            out.append([*p[:k], [head, *p[k]], *p[k + 1:]])
    return out


class LazyMarker(Stream):
    """Marker column whose moves are the union of several disjunct logs.

    Nothing is stored per column; elements are produced on demand.
    """

    kind = "marker"

    def __init__(self, logs: list, name: str = ""):
        super().__init__(name)
        self.logs = logs
        self._built = False

    def _build(self):
        if self._built:
            return
        self._built = True
        merged = sorted(ev for log in self.logs for ev in log)
        for s, c in merged:
            Stream.add(self, s, nth_gap(self._members, c))

    def add(self, stage, x):
        raise TypeError("lazy marker columns are read-only")

    def ranks_in(self, lo: int, hi: int) -> list[int]:
        out = []
        for log in self.logs:
            a = bisect.bisect_right(log, (lo, float("inf")))
            b = bisect.bisect_right(log, (hi, float("inf")))
            out.extend(c for _, c in log[a:b])
        return out

    def changes_in(self, lo: int, hi: int) -> int:
        stages = set()
        for log in self.logs:
            a = bisect.bisect_right(log, (lo, float("inf")))
            b = bisect.bisect_right(log, (hi, float("inf")))
            stages.update(s for s, _ in log[a:b])
        return len(stages)

    def snapshot(self, s=None):
        self._build()
        return super().snapshot(s)

    def events(self):
        self._build()
        return super().events()

    def change_stages(self):
        return sorted({s for log in self.logs for s, _ in log})

    def size(self, s=None):
        self._build()
        return super().size(s)

    def maximum(self, s=None):
        self._build()
        return super().maximum(s)

    def minimum(self, s=None):
        self._build()
        return super().minimum(s)

    def top(self):
        self._build()
        return super().top()

    def contains(self, x, s=None):
        self._build()
        return super().contains(x, s)


def set_to_e3_finitary(chips: ColumnChips, n: int, horizon: int, span: int | None = None,
                       max_field: int = 5) -> ConstructionRun:
    """One column per (partition, orientation choice, index tuple, class).

    In the column for class r, outputs of class r share a marker column
    moved by every disjunct of the choice; every other output is full.
    Columns are virtual: only the per-disjunct move logs are stored.
    """
    if n < 2:
        raise ValueError("finitary construction needs n >= 2")
    if n > max_field:
        raise FieldTooLarge(f"field of {n} exceeds the bound {max_field}")
    span = span or max(c for _, c in chips.labels) + 1
    run = ConstructionRun("set_to_e3_finitary", inputs=list(range(n)), meta={"span": span})
    logs: dict = {}   # (left, i, right) -> [(stage, c)]: "column i of left is column c of right"

    for s in range(horizon + 1):
        for (u, i), (v, c) in _chip_pairs(chips, s):
            logs.setdefault((u, i, v), []).append((s, c))
            run.trace.log(s, run.id, "marker", disjunct=[u, i, v], c=c)

    parts = partitions(list(range(n)))
    layout = []
    for pid, P in enumerate(parts):
        cls = {x: r for r, block in enumerate(P) for x in block}
        cross = [(a, b) for a, b in itertools.combinations(range(n), 2) if cls[a] != cls[b]]
        layout.append((P, cls, cross))
    full = _full(horizon)
    markers: dict = {}
    live_of: dict = {}

    def key_space():
        for pid, (P, cls, cross) in enumerate(layout):
            for cid in range(2 ** len(cross)):
                for tup in itertools.product(range(span), repeat=len(cross)):
                    for r in range(len(P)):
                        yield (pid, cid, tup, r)

    def disjuncts(pid, cid, tup):
        _, _, cross = layout[pid]
        sides = [(a, b) if not (cid >> k) & 1 else (b, a) for k, (a, b) in enumerate(cross)]
        return tuple((l, i, r) for (l, r), i in zip(sides, tup))

    def builder(o):
        def build(key):
            pid, cid, tup, r = key
            if layout[pid][1][o] != r:
                return full
            # markers moved by the same disjuncts are the same column
            live = live_of.get((pid, cid, tup))
            if live is None:
                live = live_of[(pid, cid, tup)] = tuple(
                    d for d in disjuncts(pid, cid, tup) if logs.get(d))
            m = markers.get(live)
            if m is None:
                m = markers[live] = LazyMarker([logs[d] for d in live], f"marker{list(live)}")
            return m
        return build

    for o in range(n):
        run.outputs[o] = VirtualFamily(str(o), key_space, builder(o))
    run.meta["columns"] = sum(2 ** len(c) * span ** len(c) * len(P) for P, _, c in layout)
    run.meta["logs"] = logs
    run.meta["disjuncts"] = disjuncts
    return run.finish(horizon)


def _full(horizon: int) -> Full:
    f = Full(0)
    f.advance(horizon)
    return f
