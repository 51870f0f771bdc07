"""Column-duplication, permutation and cofiniteness constructions."""
from __future__ import annotations

from ..relations import colcount_F
from ..universe import SetDescription, Segment, Stream, Universe, pair, unpair
from .base import ConstructionRun, Fixed


class ColumnTracker:
    """Incremental column view of a stream, updated from its per-stage news."""

    def __init__(self, stream: Stream):
        self.stream = stream
        self.cols: dict[int, set] = {}
        self.news: list = []

    def update(self, s: int) -> list[tuple[int, int]]:
        self.news = []
        for c in sorted(self.stream.newly(s)):
            x, n = unpair(c)
            self.cols.setdefault(n, set()).add(x)
            self.news.append((x, n))
        return self.news

    def column(self, n: int) -> set:
        return self.cols.get(n, set())


def column_frontier(s: int, n: int) -> int:
    """Number of values v with <v, n> <= s: the settled prefix of column n at stage s."""
    v = 0
    while pair(v, n) <= s:
        v += 1
    return v


def _universe(descs: list[SetDescription], pace: int = 1) -> Universe:
    u = Universe()
    for k, d in enumerate(descs):
        u.describe(k, d, pace, scope="input")
    return u


def dup_columns(a: SetDescription, horizon: int, span: int, copies: int = 3) -> ConstructionRun:
    """Output column <e, i> copies input column e, for i < ``copies``."""
    u = _universe([a])
    tr = ColumnTracker(u.streams[0])
    run = ConstructionRun("dup_columns", inputs=[0], meta={"span": span, "copies": copies})
    run.family("out")
    for s in range(horizon + 1):
        if s:
            u.tick()
        for x, e in tr.update(s):
            if e < span:
                for i in range(copies):
                    run.add(s, "out", (e, i), x, "copy")
    return run.finish(horizon)


def perm_to_set(a: SetDescription, horizon: int, span: int, width: int | None = None) -> ConstructionRun:
    """Columns C[x, n] (keys ("C", x, n, k)) and D[x, i, j] (keys ("D", x, i, j, k)).

    Column k of each is an inner column: k = 0 copies input column x, the
    marked inner column is the guessing column (C) or [0, j) (D).
    ``width`` bounds j; by default it covers every guessing column, and
    ``pad_perm`` can widen it later.
    """
    u = _universe([a])
    tr = ColumnTracker(u.streams[0])
    run = ConstructionRun("perm_to_set", inputs=[0], meta={"span": span})
    run.family("out")
    counts = []
    snaps = [frozenset()] * span
    frontier = [0] * span
    for s in range(horizon + 1):
        if s:
            u.tick()
        for x, e in tr.update(s):
            if e < span:
                for n in range(1, span + 1):
                    run.add(s, "out", ("C", e, n, 0), x, "copy")
        for y in {e for _, e in tr.news if e < span}:
            snaps[y] = frozenset(tr.column(y))
        for y in range(span):
            while pair(frontier[y], y) <= s:
                frontier[y] += 1
        f = [colcount_F(snaps, x, frontier[x]) for x in range(span)]
        counts.append(f)
        for x in range(span):
            for n in range(1, f[x] + 1):
                run.extend(s, "out", ("C", x, n, n), s + 1, "guess")
    run.meta["colcount"] = counts
    run.meta["nested"] = True
    if width is None:
        lens = [st.length for k, st in run.family("out").cols.items()
                if k[0] == "C" and k[3] != 0 and isinstance(st, Segment)]
        width = max(lens, default=0) + 1
    pad_perm(run, width)
    return run.finish(horizon)


def pad_perm(run: ConstructionRun, width: int) -> None:
    """Lay out D[x, i, j] for every j <= width (idempotent, lazy)."""
    fam = run.family("out")
    span = run.meta["span"]
    empty = Stream()
    for x in range(span):
        # inner column 0 of every D[x, ., .] is the stream of C[x, 1]
        src = fam.cols.get(("C", x, 1, 0), empty)
        for i in range(1, span + 1):
            for j in range(run.meta.get("width", -1) + 1, width + 1):
                fam.lazy[("D", x, i, j, 0)] = (lambda src=src: src)
                fam.lazy[("D", x, i, j, i)] = (lambda j=j: Fixed(j))
    run.meta["width"] = max(width, run.meta.get("width", -1))


def cof_to_set(a: SetDescription, horizon: int, span: int, nbound: int,
               width: int | None = None) -> ConstructionRun:
    """Columns C(i, n) = [0,i] ∪ [i+2, i+M+2] and D(a, b) = [0,a] ∪ [a+2, a+b+1].

    M is the least number >= n missing from input column i at the current
    stage; it never decreases.
    """
    u = _universe([a])
    tr = ColumnTracker(u.streams[0])
    run = ConstructionRun("cof_to_set", inputs=[0], meta={"span": span, "nbound": nbound})
    run.family("out")
    ms: dict = {}
    for s in range(horizon + 1):
        if s:
            u.tick()
        tr.update(s)
        for i in range(span):
            col = tr.column(i)
            for n in range(nbound + 1):
                m = ms.get((i, n), n)
                while m in col:
                    m += 1
                if (i, n) in ms and m == ms[(i, n)]:
                    continue
                ms[(i, n)] = m
                for x in d_column(i, m + 1):
                    run.add(s, "out", ("C", i, n), x, "grow")
    run.meta["M"] = dict(ms)
    if width is None:
        width = max(ms.values(), default=0) + 2
    pad_cof(run, width)
    return run.finish(horizon)


def d_column(a: int, b: int) -> list[int]:
    """D(a, b) = [0, a] ∪ [a + 2, a + b + 1]."""
    return list(range(a + 1)) + list(range(a + 2, a + b + 2))


def pad_cof(run: ConstructionRun, width: int) -> None:
    """Lay out D(p, b) for every b <= width (idempotent, lazy)."""
    fam = run.family("out")
    for p in range(run.meta["span"]):
        for b in range(run.meta.get("width", -1) + 1, width + 1):
            fam.lazy[("D", p, b)] = (lambda p=p, b=b: _static(d_column(p, b)))
    run.meta["width"] = max(width, run.meta.get("width", -1))


def pad_family(run: ConstructionRun, width: int) -> None:
    if run.id == "perm_to_set":
        pad_perm(run, width)
    elif run.id == "cof_to_set":
        pad_cof(run, width)


def _static(elems) -> Stream:
    st = Stream()
    for x in sorted(elems):
        st.add(0, x)
    return st
