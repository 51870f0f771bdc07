"""Density-zero equivalence into almost-equality of columns, via blocks."""
from __future__ import annotations

import itertools
from fractions import Fraction

from ..relations import UnsupportedShape
from ..universe import Flat, SetDescription, Universe
from .base import ConstructionRun


def block_bound(n: int) -> int:
    return n * n * (n + 1)


def star_offset(j: int, n: int) -> int:
    """Position of block n inside column <i, j, p>; blocks start at n = j + 1."""
    return sum(block_bound(m) + 1 for m in range(j + 1, n))


def default_blocks(j: int, tail: tuple) -> list[int]:
    return list(range(j + 1, j + 9)) + [n for n in tail if n > j + 8]


def _components(vertices: list[int], adjacent) -> dict[int, int]:
    comp = {v: v for v in vertices}

    def find(v):
        while comp[v] != v:
            comp[v] = comp[comp[v]]
            v = comp[v]
        return v

    for a, b in itertools.combinations(vertices, 2):
        if adjacent(a, b):
            comp[find(a)] = find(b)
    return {v: find(v) for v in vertices}


def z0_to_e3(descs: list[SetDescription], horizon: int, ps=(4, 5),
             tail=(4096, 4099, 5000), blocks: dict | None = None) -> ConstructionRun:
    """Blocks C_{i,j,n,p}(k) for every column <i,j,p> with i < j in the field.

    Only the blocks listed in ``blocks`` (default: the first eight after j
    plus the ``tail`` sample) are materialized.  Output k, column (i,j,p,n)
    holds block n of column <i,j,p> as an initial segment.
    """
    for d in descs:
        if not isinstance(d, Flat):
            raise UnsupportedShape("density constructions take flat descriptions")
    nf = len(descs)
    u = Universe()
    for k, d in enumerate(descs):
        u.describe(k, d, scope="input")
    cols = [(i, j, p) for i, j in itertools.combinations(range(nf), 2) for p in ps]
    bl = blocks or {c: default_blocks(c[1], tail) for c in cols}
    ns = sorted({n for c in cols for n in bl[c]})
    run = ConstructionRun("z0_to_e3", inputs=list(range(nf)),
                          meta={"columns": cols, "blocks": bl, "ps": list(ps)})
    for k in range(nf):
        run.family(k)
    pairs = list(itertools.combinations(range(nf), 2))
    diff = {(pr, n): 0 for pr in pairs for n in ns}   # |(W_a △ W_b) ∩ [0, n)|
    sizes = {(c, n, k): 0 for c in cols for n in bl[c] for k in range(nf)}
    members = [set() for _ in range(nf)]
    maxima: dict = {}

    for s in range(horizon + 1):
        if s:
            u.tick()
        news = [u.streams[k].newly(s) for k in range(nf)]
        changed: set[int] = set()
        for a, b in pairs:
            for x in news[a] ^ news[b]:
                other = b if x in news[a] else a
                delta = -1 if x in members[other] else 1
                for n in ns:
                    if x < n:
                        diff[((a, b), n)] += delta
                        if b < n:
                            changed.add(n)
        for k in range(nf):
            members[k] |= news[k]
        if not changed:
            continue
        for c in cols:
            i, j, p = c
            for n in bl[c]:
                if n not in changed:
                    continue
                verts = [k for k in range(nf) if k < n]
                dens = lambda a, b: Fraction(diff[((min(a, b), max(a, b)), n)], n)
                m = sizes[(c, n, i)]          # C(i) = [0, m - 1]
                new = {k: m + 1 for k in verts}
                if dens(i, j) >= Fraction(1, 2 ** p):
                    comp = _components(verts, lambda a, b: dens(a, b) < Fraction(1, 2 ** (p + a + b + 1)))
                    if comp[i] == comp[j]:
                        run.audit.append({"stage": s, "column": c, "block": n, "issue": "i~j"})
                    for k in verts:
                        if comp[k] == comp[j]:
                            new[k] = m + 2
                for k, size in new.items():
                    if size > sizes[(c, n, k)]:
                        sizes[(c, n, k)] = size
                        run.extend(s, k, (i, j, p, n), size, "block")
                    if size > block_bound(n):
                        run.audit.append({"stage": s, "column": c, "block": n, "issue": "size"})
                    maxima[n] = max(maxima.get(n, 0), sizes[(c, n, k)])
    run.meta["block_maxima"] = maxima
    return run.finish(horizon)


def star_column(run: ConstructionRun, k: int, col: tuple, s: int | None = None) -> set[int]:
    """Materialize the materialized blocks of column <i,j,p> of output k."""
    i, j, p = col
    out: set[int] = set()
    fam = run.outputs[k]
    for n in run.meta["blocks"][col]:
        st = fam.cols.get((i, j, p, n))
        if st is None:
            continue
        off = star_offset(j, n)
        out.update(off + x for x in st.snapshot(s))
    return out
