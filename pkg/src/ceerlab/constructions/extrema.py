"""Minimum, maximum and cardinality constructions."""
from __future__ import annotations

import heapq

from ..relations import PacingViolation
from ..universe import INF, SetDescription, Universe
from .base import FLAT, ConstructionRun


def _inputs(descs: list[SetDescription]) -> Universe:
    u = Universe()
    for k, d in enumerate(descs):
        u.describe(k, d, scope="input")
    return u


def min_to_max_finitary(descs: list[SetDescription], horizon: int) -> ConstructionRun:
    """When some input minimum drops, every A_j becomes [0, t + min_j] for one fresh t.

    Outputs of inputs that are still empty grow by one element per stage,
    so an empty input yields maximum +infinity.
    """
    k = len(descs)
    if k < 1:
        raise ValueError("need at least one input")
    u = _inputs(descs)
    run = ConstructionRun("min_to_max", inputs=list(range(k)))
    for j in range(k):
        run.family(j)
    lens = [0] * k
    mins = [INF] * k
    top = -1
    for s in range(horizon + 1):
        if s:
            u.tick()
        cur = [u.streams[j].minimum() for j in range(k)]
        if any(c < m for c, m in zip(cur, mins)):
            t = 1 + max(top, s)  # fresh
            for j in range(k):
                target = t + cur[j] + 1 if cur[j] != INF else t + 1
                if target > lens[j]:
                    lens[j] = int(target)
                    run.extend(s, j, FLAT, lens[j], "reset")
            mins = cur
        for j in range(k):
            if cur[j] == INF:
                lens[j] += 1
                run.extend(s, j, FLAT, lens[j], "grow")
        top = max(top, max(lens) - 1)
    return run.finish(horizon)


class TernaryMaxGame:
    """Stage rule of the ternary reduction of set equality to max equality.

    ``step`` takes the elements that entered each of the three inputs at a
    stage and returns the output lengths it raises (outputs are initial
    segments [0, length)).  Symmetric differences are kept incrementally,
    so each marker value m = min(difference), or s on agreement, is cheap.
    """

    PAIRS = ((0, 1), (0, 2), (1, 2))

    def __init__(self):
        self.lens = [2, 1, 0]
        self.members = [set(), set(), set()]
        self.diff = {pr: set() for pr in self.PAIRS}
        self.heap = {pr: [] for pr in self.PAIRS}
        self.prev = None

    def _marker(self, pr, s: int) -> int:
        d, h = self.diff[pr], self.heap[pr]
        while h and h[0] not in d:
            heapq.heappop(h)
        return h[0] if h else s

    def _absorb(self, news) -> None:
        for x, new in enumerate(news):
            for v in new:
                if v in self.members[x]:
                    continue
                self.members[x].add(v)
                for pr in self.PAIRS:
                    if x not in pr:
                        continue
                    other = pr[1] if pr[0] == x else pr[0]
                    if v in self.members[other]:
                        self.diff[pr].discard(v)
                    else:
                        self.diff[pr].add(v)
                        heapq.heappush(self.heap[pr], v)

    def step(self, s: int, news) -> list[tuple[int, int, str]]:
        self._absorb(news)
        cur = {pr: self._marker(pr, s) for pr in self.PAIRS}
        if self.prev is None:
            self.prev = cur
            return []
        ij, ik, jk = (cur[pr] != self.prev[pr] for pr in self.PAIRS)
        self.prev = cur
        top = max(self.lens) - 1   # current largest element of the three outputs
        moves = []

        def to(x, n, rule):
            if n > self.lens[x]:
                self.lens[x] = n
                moves.append((x, n, rule))

        if ij:
            to(0, top + 4, "ij")
            to(1, top + 3, "ij")
            if ik or jk:
                to(2, top + 2, "ij")
        elif ik:
            to(0, top + 4, "ik")
            to(2, top + 3, "ik")
            if jk:
                to(1, top + 2, "ik")
        elif jk:
            to(1, top + 4, "jk")
            to(2, top + 3, "jk")
        return moves


def eqce_to_emax_ternary(descs: list[SetDescription], horizon: int) -> ConstructionRun:
    """Three outputs whose maxima agree exactly where the inputs agree as sets.

    Inputs are enumerated jointly, one element per stage across all three.
    """
    if len(descs) != 3:
        raise ValueError("ternary construction takes three inputs")
    u = Universe(joint=True)
    for k, d in enumerate(descs):
        u.describe(k, d, scope="input")
    st = [u.streams[x] for x in range(3)]
    run = ConstructionRun("eqce_to_emax_ternary", inputs=[0, 1, 2])
    game = TernaryMaxGame()
    for x in range(3):
        run.family(x)
        if game.lens[x]:
            run.extend(0, x, FLAT, game.lens[x], "init")
    game.step(0, [x.newly(0) for x in st])
    for s in range(1, horizon + 1):
        u.tick()
        entered = st[0].newly(s) | st[1].newly(s) | st[2].newly(s)
        if len(entered) > 1:
            raise PacingViolation(f"{len(entered)} elements entered at stage {s}")
        for x, n, rule in game.step(s, [x.newly(s) for x in st]):
            run.extend(s, x, FLAT, n, rule)
    return run.finish(horizon)


def card_max_bridge(direction: str, desc: SetDescription, horizon: int) -> ConstructionRun:
    """``max->card``: output [0, max] (cardinality max + 1).
    ``card->max``: output [0, |A|) (maximum |A| - 1).
    """
    if direction not in ("max->card", "card->max"):
        raise ValueError(f"unknown direction {direction!r}")
    u = _inputs([desc])
    st = u.streams[0]
    run = ConstructionRun("card_max_bridge", inputs=[0], meta={"direction": direction})
    run.family(0)
    for s in range(horizon + 1):
        if s:
            u.tick()
        if direction == "max->card":
            mx = st.maximum()
            if mx != -INF:
                run.extend(s, 0, FLAT, int(mx) + 1, "raise")
        else:
            run.extend(s, 0, FLAT, st.size(), "count")
    return run.finish(horizon)
