"""The k-ary chip game: any chip-approximated relation into set equality."""
from __future__ import annotations

import itertools

from ..relations import ChipSchedule
from .base import ConstructionRun


def pi02_to_eqce(k: int, chips: ChipSchedule, horizon: int, field=None,
                 audit: bool = True) -> ConstructionRun:
    """Outputs A_0..A_{k-1}; column (a, b) of every A_i is an initial segment.

    ``field`` lists the chip indices standing for positions 0..k-1.
    """
    if k < 2:
        raise ValueError("the chip game needs k >= 2")
    field = list(field) if field is not None else list(range(k))
    if len(field) != k:
        raise ValueError("field must list k indices")
    pos = {m: p for p, m in enumerate(field)}
    cols = list(itertools.combinations(range(k), 2))
    run = ConstructionRun("pi02_to_eqce", inputs=field, meta={"k": k, "columns": cols})
    lens = {(i, c): 0 for i in range(k) for c in cols}
    top = -1  # largest number mentioned by any column

    def grow(s, i, c, n, rule):
        nonlocal top
        if n > lens[(i, c)]:
            lens[(i, c)] = n
            top = max(top, n - 1)
            run.extend(s, i, c, n, rule)

    for i in range(k):
        run.family(i)
    for a, b in cols:
        grow(0, b, (a, b), 1, "init")

    for s in range(horizon + 1):
        ch = chips.chip(s)
        if ch is not None and ch[0] in pos and ch[1] in pos:
            i, j = sorted((pos[ch[0]], pos[ch[1]]))
            t = 1 + max(top, s)  # fresh
            grow(s, i, (i, j), t + 1, "game")
            grow(s, j, (i, j), t + 2, "game")
            for c in cols:
                if c == (i, j):
                    continue
                li, lj = lens[(i, c)], lens[(j, c)]
                if li == lj:
                    continue
                short = i if li < lj else j
                grow(s, short, c, max(li, lj), "match")
                a, b = c
                if short == a:
                    grow(s, b, c, lens[(a, c)] + 1, "pad")
        if audit:
            for a, b in cols:
                c = (a, b)
                lb = lens[(b, c)]
                if lens[(a, c)] + 1 != lb or any(lens[(i, c)] > lb for i in range(k)):
                    run.audit.append({"stage": s, "column": c,
                                      "lengths": [lens[(i, c)] for i in range(k)]})
    run.meta["audited_stages"] = horizon + 1 if audit else 0
    return run.finish(horizon)
