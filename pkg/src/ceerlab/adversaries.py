"""Diagonalization games played against candidate reductions.

Each game builds its own sets stage by stage while a candidate reduction
runs alongside it.  Both sides see the other only through one-stage-lagged
views, so the joint run is computed stage by stage without any fixed-point
search.  A defeat comes with a self-contained certificate that
``validate_certificate`` checks from the stored data alone.
"""
from __future__ import annotations

import bisect
import itertools
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from .constructions.base import Trace
from .constructions.combinators import BlockRelation, ChainRelation, TupleNotFound, small_tuples
from .constructions.extrema import TernaryMaxGame
from .harness import HorizonTooShort, Report, Scenario, classify_streams
from .relations import Named, Table, chips_from_spec, eval_ground
from .universe import (INF, Columnar, Finite, Flat, ParseError, SetDescription, Stream,
                       decide_limit_membership, pair, parse_description, unpair)


class LagViolation(RuntimeError):
    """A read reached a stage the reader is not allowed to see yet."""


class ArityMismatch(ParseError):
    """Candidate and adversary disagree on the number of arguments."""


# ------------------------------------------------------------------ lagged views

class Lagged:
    """Read-only view of a stream that refuses reads past ``limit``."""

    __slots__ = ("_st", "limit")

    def __init__(self, st: Stream, limit: int):
        self._st = st
        self.limit = limit

    def _at(self, s):
        if s is None:
            return self.limit
        if s > self.limit:
            raise LagViolation(f"read of stage {s} through a view limited to stage {self.limit}")
        return s

    def snapshot(self, s=None) -> frozenset:
        return self._st.snapshot(self._at(s))

    def between(self, lo: int, hi=None) -> list[int]:
        """Elements that entered during stages (lo, hi]."""
        hi = self._at(hi)
        st = self._st
        a = bisect.bisect_right(st._stages, lo)
        b = bisect.bisect_right(st._stages, hi)
        return st._elems[a:b]

    def size(self, s=None) -> int:
        return self._st.size(self._at(s))

    def maximum(self, s=None) -> float:
        return self._st.maximum(self._at(s))

    def minimum(self, s=None) -> float:
        return self._st.minimum(self._at(s))


# ------------------------------------------------------------------ candidates

@dataclass
class Candidate:
    """A would-be reduction: index map with convergence delays, plus outputs.

    ``image(call, i)`` is the i-th output index on the argument tuple
    ``call``; it may be read once ``delay(call, i)`` stages have passed, and
    a delay of None never converges.  ``spawn(call)`` starts the output
    transformer for that call: its ``step(s, views)`` sees the arguments
    through stage s - 1 and returns one batch of new elements per output.
    """

    name: str
    arity: int
    kind: str = "builtin"
    image: Callable[[tuple, int], int] | None = None
    delay: Callable[[tuple, int], int | None] = lambda call, i: 0
    spawn: Callable[[tuple], object] | None = None

    def converged(self, call: tuple, i: int, s: int) -> bool:
        d = self.delay(call, i)
        return d is not None and s >= d


class Echo:
    """Output k copies argument ``sources[k]`` one stage late."""

    def __init__(self, sources):
        self.sources = list(sources)
        self.read = -1

    def step(self, s, views):
        out = [views[k].between(self.read, s - 1) for k in self.sources]
        self.read = s - 1
        return out


class Constant:
    """Every output enumerates a fixed description, all members up to the stage."""

    def __init__(self, descs: list[SetDescription]):
        self.descs = descs
        self.next = 0

    def step(self, s, views):
        members = range(self.next, s + 1)
        self.next = s + 1
        return [[x for x in members if decide_limit_membership(d, x)] for d in self.descs]


class Mixed:
    """Per-output choice between a constant description and an echo."""

    def __init__(self, specs: list):
        self.parts = []
        for spec in specs:
            if isinstance(spec, dict) and "echo" in spec:
                self.parts.append(Echo([int(spec["echo"])]))
            else:
                self.parts.append(Constant([spec]))

    def step(self, s, views):
        return [p.step(s, views)[0] for p in self.parts]


# ------------------------------------------------------------------ verdicts

@dataclass
class Certificate:
    """Stored evidence that one pair breaks the reduction biconditional."""

    pair: tuple
    lhs_relation: str
    rhs_relation: str
    witnesses: dict

    def to_dict(self) -> dict:
        return {"pair": list(self.pair), "lhs_relation": self.lhs_relation,
                "rhs_relation": self.rhs_relation, "witnesses": self.witnesses}

    @staticmethod
    def from_dict(obj: dict) -> "Certificate":
        return Certificate(tuple(obj["pair"]), obj["lhs_relation"], obj["rhs_relation"], obj["witnesses"])


@dataclass
class Defeated:
    certificate: Certificate
    stage: int

    def describe(self) -> str:
        c = self.certificate
        lhs = "related" if c.witnesses["lhs"]["claim"] else "unrelated"
        rhs = "related" if c.witnesses["rhs"]["claim"] else "unrelated"
        return (f"Defeated at stage {self.stage}: pair {list(c.pair)} is {lhs} under "
                f"{c.lhs_relation} but its images are {rhs} under {c.rhs_relation}")


@dataclass
class Survived:
    horizon: int

    def describe(self) -> str:
        return f"Survived to horizon {self.horizon} (inconclusive, not a proof of correctness)"


@dataclass
class CandidateDiverged:
    call: tuple
    output: int
    stage: int

    def describe(self) -> str:
        return (f"CandidateDiverged: index map on {list(self.call)} output {self.output} "
                f"had not converged by stage {self.stage}")


# ------------------------------------------------------------------ certificate checking

COLUMN_RELATIONS = ("E3", "ECof", "EFin", "ESet", "EPerm")


def _events_stream(events) -> Stream:
    st = Stream()
    for s, x in events:
        st.add(int(s), int(x))
    return st


def family_has_omega(side: dict, horizon: int, window: int) -> bool | None:
    """Whether a game set has an infinite column, judged from its column-bound log.

    The fixed sets carry the answer in their definition; the others log the
    stages at which each even column's bound was raised.  A bound raised in
    both of the last two windows marks an infinite column; when every bound
    raised in the last window is raised there for the first time, the
    raises are escaping upward and every column is finite.
    """
    fam = side["family"]
    if fam == "A":
        return True        # column 0 is all of the naturals
    if fam == "B":
        return False       # column k is [0, k]
    hits = {int(j): [int(t) for t in st] for j, st in side["hits"].items()}
    recent = {j for j, st in hits.items() if any(horizon - window < t <= horizon for t in st)}
    early = {j for j, st in hits.items() if any(horizon - 2 * window < t <= horizon - window for t in st)}
    if recent & early:
        return True
    older = {j for j, st in hits.items() if any(t <= horizon - window for t in st)}
    if not recent & older:
        return False
    return None


def _index_relation(spec: dict) -> Callable[[int, int], bool]:
    kind = spec["kind"]
    if kind == "table":
        t = Table(spec["classes"])
        return t.related
    if kind == "block":
        rel = BlockRelation(int(spec["n"]), small_tuples(int(spec["n"]), int(spec["count"])))
        return rel.related
    if kind == "chain":
        rel = ChainRelation(small_tuples(None, int(spec["count"])))
        return rel.related
    raise ValueError(f"unknown index relation {kind!r}")


def side_truth(relation: str, part: dict, horizon: int, window: int) -> bool | None:
    """Decide one side of a certificate from its stored witnesses."""
    a, b = part["left"], part["right"]
    kind = a["kind"]
    if kind != b["kind"]:
        raise ValueError("both witnesses of a side must have the same kind")
    if kind == "events":
        cols = relation in COLUMN_RELATIONS
        cl = classify_streams(_events_stream(a["events"]), _events_stream(b["events"]),
                              relation, horizon, window, columns=cols)
        return cl.related
    if kind == "description":
        return eval_ground(Named(relation), parse_description(a["literal"]), parse_description(b["literal"]))
    if kind == "family":
        if relation != "ESet":
            raise ValueError("family witnesses only decide ESet")
        x, y = family_has_omega(a, horizon, window), family_has_omega(b, horizon, window)
        return None if x is None or y is None else x == y
    if kind == "index":
        try:
            return _index_relation(part["relation"])(int(a["value"]), int(b["value"]))
        except (TupleNotFound, KeyError):
            return None
    raise ValueError(f"unknown witness kind {kind!r}")


def validate_certificate(cert: Certificate | dict) -> bool:
    """Re-decide both sides from the stored witnesses; true iff they really disagree."""
    if isinstance(cert, dict):
        cert = Certificate.from_dict(cert)
    w = cert.witnesses
    try:
        H, W = int(w["horizon"]), int(w["window"])
        lhs = side_truth(cert.lhs_relation, w["lhs"], H, W)
        rhs = side_truth(cert.rhs_relation, w["rhs"], H, W)
    except (KeyError, TypeError, ValueError):
        return False
    if lhs is None or rhs is None:
        return False
    return lhs != rhs and lhs == w["lhs"]["claim"] and rhs == w["rhs"]["claim"]


def _events_side(st: Stream) -> dict:
    return {"kind": "events", "events": [[s, x] for s, x in st.events()]}


# ------------------------------------------------------------------ games

class Game:
    """Adversary side of a joint run.

    ``inputs`` holds the game's own sets by label; ``calls()`` lists the
    argument tuples the candidate is applied to; ``step(s, outputs)`` acts at
    stage s with candidate outputs visible through stage s - 1.
    """

    name = ""
    lhs_relation = "EqCe"
    rhs_relation = ""
    arity = 1

    def __init__(self, candidate: Candidate, horizon: int, window: int, trace: Trace):
        self.cand = candidate
        self.horizon = horizon
        self.window = window
        self.trace = trace
        self.inputs: dict[str, Stream] = {}
        self.labels: list[str] = []
        self.waiting: tuple | None = None
        self.audits: list = []
        self.done_at: int | None = None

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def args(self, call: tuple) -> tuple:
        return tuple(self.index(l) for l in call)

    def calls(self) -> list[tuple]:
        return []

    def ready(self, call: tuple, s: int) -> bool:
        """All outputs of ``call`` have converged by stage s; otherwise note the wait."""
        args = self.args(call)
        for i in range(len(call)):
            if not self.cand.converged(args, i, s):
                if self.waiting != (call, i):
                    self.waiting = (call, i)
                    self.trace.log(s, self.name, "wait", call=list(call), output=i)
                return False
        if self.waiting is not None and self.waiting[0] == call:
            self.waiting = None
        return True

    def log(self, s: int, rule: str, **data) -> None:
        self.trace.log(s, self.name, rule, read=s - 1, **data)

    def step(self, s: int, outputs: dict) -> None:
        raise NotImplementedError

    def verdict(self, outputs: dict) -> object:
        raise NotImplementedError


@dataclass
class JointRun:
    game: Game
    outputs: dict
    trace: Trace
    horizon: int
    verdict: object = None


def interleave(game: Game, candidate: Candidate, horizon: int, settle: bool = False) -> JointRun:
    """Alternate one adversary stage and one candidate stage up to ``horizon``.

    Each side reads the other through stage s - 1 only, so the joint
    history is determined stage by stage.  With ``settle`` the game is also
    judged at every window boundary from two windows on, as a run cut off
    there would be, and the match ends at the first defeat found.
    """
    outputs: dict = {}
    running: dict = {}
    trace = game.trace
    run = JointRun(game, outputs, trace, horizon)
    for s in range(horizon + 1):
        game.step(s, {k: Lagged(st, s - 1) for k, st in outputs.items()})
        if game.done_at is not None:
            break
        for call in game.calls() if candidate.spawn is not None else ():
            args = game.args(call)
            if call not in running:
                if not all(candidate.converged(args, i, s) for i in range(len(call))):
                    continue
                running[call] = candidate.spawn(args)
                for i in range(len(call)):
                    outputs[(call, i)] = Stream(f"{candidate.name}{list(call)}[{i}]")
                trace.log(s, "candidate", "converge", call=list(call))
            views = [Lagged(game.inputs[l], s - 1) for l in call]
            for i, inc in enumerate(running[call].step(s, views)):
                for x in sorted(set(inc)):
                    outputs[(call, i)].add(s, x)
        if settle and s < horizon and _checkpoint(game, s):
            full, game.horizon = game.horizon, s
            found = game.verdict(outputs)
            if isinstance(found, Defeated):
                trace.log(s, game.name, "settle", pair=list(found.certificate.pair))
                run.horizon, run.verdict = s, found
                break
            game.horizon = full
    return run


def _checkpoint(game: Game, s: int) -> bool:
    W = game.window
    return W > 0 and s >= 2 * W and s % W == 0 and game.waiting is None


def lag_audit(trace: Trace) -> list:
    """Adversary records whose read stage is not strictly before their own stage."""
    return [r.line() for r in trace if "read" in r.data and r.data["read"] >= r.stage]


def _judge_pairs(game: Game, pairs, lhs_side, rhs_side, rhs_relation=None, stage=None):
    """The first pair whose two sides are decided and disagree, as a defeat."""
    H, W = game.horizon, game.window
    for p in pairs:
        lhs = {"left": lhs_side(p[0]), "right": lhs_side(p[1])}
        rhs = {"left": rhs_side(p[0]), "right": rhs_side(p[1])}
        if rhs_relation is not None:
            rhs["relation"] = rhs_relation
        try:
            lt = side_truth(game.lhs_relation, lhs, H, W)
            rt = side_truth(game.rhs_relation, rhs, H, W)
        except HorizonTooShort:
            continue
        if lt is None or rt is None or lt == rt:
            continue
        lhs["claim"], rhs["claim"] = lt, rt
        cert = Certificate(tuple(p), game.lhs_relation, game.rhs_relation,
                           {"horizon": H, "window": W, "lhs": lhs, "rhs": rhs})
        return Defeated(cert, H if stage is None else stage)
    return None


# .................................................................. set vs almost-equality

class BoundedColumns:
    """Set whose column k is [0, bound(k)], enumerated as the frontier allows."""

    def __init__(self, name: str, bound: Callable[[int], float]):
        self.stream = Stream(name)
        self.bound = bound
        self.next = 0
        self.pending: dict[int, list[int]] = {}

    def advance(self, s: int) -> None:
        while self.next <= s:
            x, k = unpair(self.next)
            if x <= self.bound(k):
                self.stream.add(s, self.next)
            else:
                self.pending.setdefault(k, []).append(x)
            self.next += 1

    def raised(self, s: int, k: int) -> None:
        waiting = self.pending.get(k)
        if not waiting:
            return
        keep = []
        for x in waiting:
            if x <= self.bound(k):
                self.stream.add(s, pair(x, k))
            else:
                keep.append(x)
        self.pending[k] = keep


class Disagreement:
    """Running max of the disagreement set of two columns below a bound."""

    def __init__(self):
        self.sides = (set(), set())
        self.diff: list[int] = []

    def below(self, bound: int) -> int:
        k = bisect.bisect_left(self.diff, bound)
        return self.diff[k - 1] if k else 0

    def feed(self, side: int, z: int) -> int | None:
        own, other = self.sides[side], self.sides[1 - side]
        if z in own:
            return None
        own.add(z)
        value = self.below(z)
        if z in other:
            self.diff.pop(bisect.bisect_left(self.diff, z))
        else:
            bisect.insort(self.diff, z)
        return value


class SetNotE3(Game):
    """Sets A, B and C_0..C_{N-1}; C_i's even columns follow the disagreement
    count between the images of B and C_i on column i."""

    name = "adv_set_not_e3"
    lhs_relation = "ESet"
    rhs_relation = "E3"
    arity = 1

    def __init__(self, candidate, horizon, window, trace, columns: int = 3):
        super().__init__(candidate, horizon, window, trace)
        self.n = columns
        self.labels = ["A", "B"] + [f"C{i}" for i in range(columns)]
        self.sets = {
            "A": BoundedColumns("A", lambda k: INF if k == 0 else k - 1),
            "B": BoundedColumns("B", lambda k: k),
        }
        self.thresholds = [dict() for _ in range(columns)]
        self.hits = [dict() for _ in range(columns)]
        for i in range(columns):
            self.sets[f"C{i}"] = BoundedColumns(f"C{i}", self._c_bound(i))
        self.inputs = {k: v.stream for k, v in self.sets.items()}
        self.trackers = [Disagreement() for _ in range(columns)]
        self.read = [[-1, -1] for _ in range(columns)]

    def _c_bound(self, i):
        thr = self.thresholds[i]

        def bound(k):
            if k % 2:
                return k // 2
            return thr.get(k // 2, 0)
        return bound

    def calls(self):
        return [(l,) for l in self.labels]

    def step(self, s, outputs):
        for st in self.sets.values():
            st.advance(s)
        if s == 0:
            return
        t = s - 1
        for i in range(self.n):
            ci = f"C{i}"
            if not (self.ready(("B",), s) and self.ready((ci,), s)):
                continue
            b_out, c_out = outputs.get((("B",), 0)), outputs.get(((ci,), 0))
            if b_out is None or c_out is None:
                continue
            news = []
            for side, view in ((0, b_out), (1, c_out)):
                lo = self.read[i][side]
                news += [(x, side) for x, col in map(unpair, view.between(lo, t)) if col == i]
                self.read[i][side] = t
            values = []
            for x, side in sorted(news):
                v = self.trackers[i].feed(side, x)
                if v is not None:
                    values.append(v)
            if not values:
                values = [self.trackers[i].below(t)]
            for j in sorted(set(values)):
                self.hits[i].setdefault(j, []).append(t)
                if self.thresholds[i].get(j, 0) < t:
                    self.thresholds[i][j] = t
                    self.sets[ci].raised(s, 2 * j)
            self.log(s, "count", set=ci, values=sorted(set(values)))

    def verdict(self, outputs):
        def lhs(label):
            if label in ("A", "B"):
                return {"kind": "family", "family": label}
            i = int(label[1:])
            return {"kind": "family", "family": "C", "hits": {str(j): v for j, v in self.hits[i].items()}}

        def rhs(label):
            return _events_side(outputs.get(((label,), 0), Stream()))
        return _judge_pairs(self, itertools.combinations(self.labels, 2), lhs, rhs)


# .................................................................. max against min, binary

class MaxToMin(Game):
    """Initial segments W_i, W_j toggled against the minima of their images."""

    name = "adv_max_to_min_binary"
    lhs_relation = "EMax"
    rhs_relation = "EMin"
    arity = 2

    def __init__(self, candidate, horizon, window, trace):
        super().__init__(candidate, horizon, window, trace)
        self.labels = ["i", "j"]
        self.inputs = {"i": Stream("W_i"), "j": Stream("W_j")}

    def calls(self):
        return [("i", "j")]

    def step(self, s, outputs):
        call = ("i", "j")
        if s == 0 or not self.ready(call, s) or (call, 0) not in outputs:
            return
        wi, wj = self.inputs["i"], self.inputs["j"]
        same_max = wi.maximum() == wj.maximum()
        same_min = outputs[(call, 0)].minimum() == outputs[(call, 1)].minimum()
        if same_max and same_min:
            wi.add(s, wi.size())
            self.log(s, "split", added=wi.size() - 1)
        elif not same_max and not same_min:
            wj.add(s, wj.size())
            self.log(s, "join", added=wj.size() - 1)

    def verdict(self, outputs):
        call = ("i", "j")
        return _judge_pairs(
            self, [("i", "j")],
            lambda l: _events_side(self.inputs[l]),
            lambda l: _events_side(outputs.get((call, self.index(l)), Stream())))


# .................................................................. no 4-ary reduction to max

class No4aryMax(Game):
    """Even toggles on (i, j) and odd toggles on (k, l) against image maxima."""

    name = "adv_no4ary_emax"
    lhs_relation = "EqCe"
    rhs_relation = "EMax"
    arity = 4
    INITIAL = {"i": (0,), "j": (0, 2), "k": (1,), "l": (1, 3)}

    def __init__(self, candidate, horizon, window, trace):
        super().__init__(candidate, horizon, window, trace)
        self.labels = ["i", "j", "k", "l"]
        self.inputs = {l: Stream(f"W_{l}") for l in self.labels}
        self.started = False

    def calls(self):
        return [tuple(self.labels)]

    def _next(self, st: Stream, parity: int) -> int:
        x = parity
        while st.contains(x):
            x += 2
        return x

    def step(self, s, outputs):
        call = tuple(self.labels)
        if not self.ready(call, s):
            return
        if not self.started:
            self.started = True
            for l, xs in self.INITIAL.items():
                for x in xs:
                    self.inputs[l].add(s, x)
            self.log(s, "init")
            return
        if (call, 0) not in outputs:
            return
        out = {l: outputs[(call, n)] for n, l in enumerate(self.labels)}
        for a, b, parity in (("i", "j", 0), ("k", "l", 1)):
            wa, wb = self.inputs[a], self.inputs[b]
            same_set = wa.snapshot() == wb.snapshot()
            same_max = out[a].maximum() == out[b].maximum()
            if not same_set and not same_max:
                x = self._next(wa, parity)
                wa.add(s, x)
                self.log(s, "catch_up", set=a, added=x)
            elif same_set and same_max:
                x = self._next(wb, parity)
                wb.add(s, x)
                self.log(s, "pull_ahead", set=b, added=x)
        for l, parity in (("i", 0), ("j", 0), ("k", 1), ("l", 1)):
            bad = [x for x in self.inputs[l].newly(s) if x % 2 != parity]
            if bad:
                self.audits.append({"stage": s, "set": l, "wrong_parity": bad})

    def verdict(self, outputs):
        call = tuple(self.labels)
        pairs = [("i", "j"), ("k", "l"), ("i", "k"), ("i", "l"), ("j", "k"), ("j", "l")]
        return _judge_pairs(
            self, pairs,
            lambda l: _events_side(self.inputs[l]),
            lambda l: _events_side(outputs.get((call, self.index(l)), Stream())))


# .................................................................. pigeonhole into blocks

class Pigeonhole(Game):
    """n+1 programs against the block relation with n slots per block."""

    name = "adv_pigeonhole"
    rhs_relation = "block"

    def __init__(self, candidate, horizon, window, trace, n: int = 3, count: int = 64):
        super().__init__(candidate, horizon, window, trace)
        self.n = n
        self.count = count
        self.arity = n + 1
        self.labels = [f"x{i}" for i in range(n + 1)]
        self.inputs = {l: Stream(l) for l in self.labels}
        self.relation = BlockRelation(n, small_tuples(n, count))
        self.images: list[int] = []
        self.descs: dict[str, SetDescription] = {}

    def step(self, s, outputs):
        call = tuple(self.labels)
        if not self.ready(call, s):
            return
        args = self.args(call)
        self.images = [int(self.cand.image(args, i)) for i in range(self.n + 1)]
        blocks = {self.relation.block(y) for y in self.images}
        if len(blocks) == 1:
            for i, l in enumerate(self.labels):
                self.inputs[l].add(s, i)
                self.descs[l] = _finite({i})
            self.log(s, "distinct", images=self.images)
        else:
            for l in self.labels:
                self.descs[l] = _finite(())
            self.log(s, "silent", images=self.images)
        self.done_at = s

    def verdict(self, outputs):
        spec = {"kind": "block", "n": self.n, "count": self.count}
        return _judge_pairs(
            self, itertools.combinations(self.labels, 2),
            lambda l: {"kind": "description", "literal": self.descs[l].literal()},
            lambda l: {"kind": "index", "value": self.images[self.index(l)]},
            rhs_relation=spec, stage=self.done_at)


def _finite(xs) -> SetDescription:
    return Flat(Finite(xs))


# .................................................................. finitary slice

class FinitarySlice(Game):
    """A slice of 2 + n_m arguments against the chain relation."""

    name = "adv_finitary_slice"
    rhs_relation = "chain"
    arity = 1

    def __init__(self, candidate, horizon, window, trace, slice_: int = 0, count: int = 200):
        super().__init__(candidate, horizon, window, trace)
        self.slice = slice_
        self.count = count
        self.relation = ChainRelation(small_tuples(None, count))
        self.members = 1          # grows to 2 + n_m once the first image is known
        self.labels = []
        self._grow(1)
        self.images: dict[str, int] = {}
        self.descs: dict[str, SetDescription] = {}
        self.block = None

    def _grow(self, count: int) -> None:
        for j in range(len(self.labels), count):
            label = f"s{j}"
            self.labels.append(label)
            self.inputs[label] = Stream(label)

    def index(self, label: str) -> int:
        return pair(int(label[1:]), self.slice)

    def _image(self, label: str) -> int:
        y = int(self.cand.image((self.index(label),), 0))
        try:
            self.relation.g(y)
        except TupleNotFound:
            raise ParseError(f"image {y} lies beyond the listed chain prefix; raise params.tuples")
        return y

    def step(self, s, outputs):
        if self.block is None:
            if not self.ready((self.labels[0],), s):
                return
            y = self._image(self.labels[0])
            self.images[self.labels[0]] = y
            self.block = self.relation.g(y)[0]
            self._grow(2 + self.relation.top(self.block))
            self.log(s, "first_image", image=y, block=self.block)
        for l in self.labels[1:]:
            if not self.ready((l,), s):
                return
        for l in self.labels[1:]:
            self.images[l] = self._image(l)
        same = all(self.relation.g(y)[0] == self.block for y in self.images.values())
        for j, l in enumerate(self.labels):
            if same:
                self.inputs[l].add(s, j)
            self.descs[l] = _finite({j} if same else ())
        self.log(s, "distinct" if same else "merged", images=[self.images[l] for l in self.labels])
        self.done_at = s

    def verdict(self, outputs):
        spec = {"kind": "chain", "count": self.count}
        return _judge_pairs(
            self, itertools.combinations(self.labels, 2),
            lambda l: {"kind": "description", "literal": self.descs[l].literal()},
            lambda l: {"kind": "index", "value": self.images[l]},
            rhs_relation=spec, stage=self.done_at)


# .................................................................. infinitely many hard classes

class InfClasses(Game):
    """Toggles on (a, b) and (c, d) driven by an approximating function of E."""

    name = "adv_infclasses"
    rhs_relation = "table"
    arity = 4

    def __init__(self, candidate, horizon, window, trace, table: Table, approx, z: list[int]):
        super().__init__(candidate, horizon, window, trace)
        self.table = table
        self.h = approx
        self.z = list(z)
        self.labels = ["a", "b", "c", "d"]
        self.inputs = {l: Stream(l.upper()) for l in self.labels}
        self.hat: list[int] | None = None
        self.start = None
        self.fresh = [0, 1]              # next unused even, odd
        self.last_one: dict = {}         # (number, i) -> last round with h = 1

    def _take(self, parity: int) -> int:
        x = self.fresh[parity]
        self.fresh[parity] += 2
        return x

    def _toggle(self, s, r, x, y, hx, hy, parity):
        A, B = self.inputs[x], self.inputs[y]
        equal = A.snapshot() == B.snapshot()
        if self.h(hx, hy, r) == 1 and equal:
            v = self._take(parity)
            A.add(s, v)
            self.log(s, "separate", set=x, added=v)
        elif self.h(hx, hy, r) == 0 and not equal:
            union = A.snapshot() | B.snapshot()
            for v in sorted(union - A.snapshot()):
                A.add(s, v)
            for v in sorted(union - B.snapshot()):
                B.add(s, v)
            self.log(s, "merge", sets=[x, y])

    def _nearest(self, x: int, r: int) -> int | None:
        best, pick = -1, None
        for i, zi in enumerate(self.z):
            if self.h(x, zi, r) == 1:
                self.last_one[(x, i)] = r
            t = self.last_one.get((x, i), -1)
            if t > best:
                best, pick = t, i
        return pick

    def step(self, s, outputs):
        call = tuple(self.labels)
        if self.hat is None:
            if not self.ready(call, s):
                return
            args = self.args(call)
            self.hat = [int(self.cand.image(args, i)) for i in range(4)]
            for y in self.hat:
                self.table.class_of(y)   # images must lie in the field
            self.start = s
            self.log(s, "images", images=self.hat)
            return
        g = s - self.start
        a, b, c, d = self.hat
        if g % 2:
            r = g // 2
            self._toggle(s, r, "a", "b", a, b, 0)
            self._toggle(s, r, "c", "d", c, d, 1)
            return
        r = g // 2 - 1
        i, j = self._nearest(a, r), self._nearest(c, r)
        if i is None or j is None:
            return
        A, B, C, D = (self.inputs[l] for l in self.labels)
        if i == j:
            v = self._take(0)
            A.add(s, v)
            B.add(s, v)
            self.log(s, "same_class", i=i, added=v)
        else:
            evens = sorted(x for x in A.snapshot() if x % 2 == 0)
            odds = sorted(x for x in C.snapshot() if x % 2 == 1)
            for st, vals in ((C, evens), (D, evens), (A, odds), (B, odds)):
                for v in vals:
                    st.add(s, v)
            self.log(s, "cross", i=i, j=j)

    def verdict(self, outputs):
        if self.hat is None:
            return None
        spec = {"kind": "table", "classes": [list(c) for c in self.table.classes]}
        pairs = [("a", "b"), ("c", "d"), ("a", "c"), ("a", "d"), ("b", "c"), ("b", "d")]
        return _judge_pairs(
            self, pairs,
            lambda l: _events_side(self.inputs[l]),
            lambda l: {"kind": "index", "value": self.hat[self.index(l)]},
            rhs_relation=spec)


# ------------------------------------------------------------------ builtin candidates

def _staggered(call, i):
    return 1 + i


def _segment_step(lengths_fn):
    """Transformer emitting initial segments whose lengths come from ``lengths_fn``."""
    class SegmentOut:
        def __init__(self, arity):
            self.lens = [0] * arity

        def step(self, s, views):
            out = []
            for k, n in enumerate(lengths_fn(s, views)):
                out.append(range(self.lens[k], max(n, self.lens[k])))
                self.lens[k] = max(n, self.lens[k])
            return out
    return SegmentOut


class DupTruncate:
    """Column k of the argument goes to columns 2k and 2k+1, cut below ``cut``."""

    def __init__(self, cut: int = 6):
        self.cut = cut
        self.read = -1

    def step(self, s, views):
        out = []
        for c in views[0].between(self.read, s - 1):
            x, k = unpair(c)
            if x < self.cut:
                out += [pair(x, 2 * k), pair(x, 2 * k + 1)]
        self.read = s - 1
        return [out]


class TernaryAs4ary:
    """The ternary max game on the first three arguments; output 3 echoes output 2."""

    def __init__(self):
        self.game = TernaryMaxGame()
        self.read = -1
        self.started = False

    def step(self, s, views):
        news = [set(views[x].between(self.read, s - 1)) for x in range(3)]
        self.read = s - 1
        before = list(self.game.lens)
        if not self.started:
            self.started = True
            self.game.step(s, news)
            grown = [range(n) for n in self.game.lens]
        else:
            self.game.step(s, news)
            grown = [range(a, b) for a, b in zip(before, self.game.lens)]
        return grown + [grown[2]]


class SizeSegment:
    """Output x is [0, |argument x|]."""

    def __init__(self, arity: int):
        self.lens = [0] * arity

    def step(self, s, views):
        out = []
        for k, v in enumerate(views):
            n = v.size() + 1
            out.append(range(self.lens[k], n))
            self.lens[k] = max(self.lens[k], n)
        return out


@dataclass
class Context:
    """What builtins may know about the game they are entered into."""

    adversary: str
    n: int = 3
    block: BlockRelation | None = None
    chain: ChainRelation | None = None
    slice: int = 0
    table: Table | None = None
    z: tuple = ()


def _set_not_e3_builtins(ctx):
    const = Columnar({}, Finite({0}))
    return {
        "constant": Candidate("constant", 1, delay=_staggered, image=lambda c, i: 0,
                              spawn=lambda call: Constant([const])),
        "dup_truncate": Candidate("dup_truncate", 1, delay=_staggered, image=lambda c, i: c[0],
                                  spawn=lambda call: DupTruncate()),
        "identity": Candidate("identity", 1, delay=_staggered, image=lambda c, i: c[0],
                              spawn=lambda call: Echo([0])),
    }


def _max_to_min_builtins(ctx):
    zero = Finite({0})
    return {
        "constant_equal": Candidate("constant_equal", 2, delay=_staggered, image=lambda c, i: 0,
                                    spawn=lambda call: Constant([Flat(zero), Flat(zero)])),
        "constant_split": Candidate("constant_split", 2, delay=_staggered, image=lambda c, i: i,
                                    spawn=lambda call: Constant([Flat(zero), Flat(Finite({1}))])),
        "echo": Candidate("echo", 2, delay=_staggered, image=lambda c, i: c[i],
                          spawn=lambda call: Echo([0, 1])),
    }


def _no4ary_builtins(ctx):
    return {
        "ternary_as_4ary": Candidate("ternary_as_4ary", 4, delay=_staggered, image=lambda c, i: c[min(i, 2)],
                                     spawn=lambda call: TernaryAs4ary()),
        "identical": Candidate("identical", 4, delay=_staggered, image=lambda c, i: 0,
                               spawn=lambda call: Constant([Flat(Finite({0, 1}))] * 4)),
        "size_segment": Candidate("size_segment", 4, delay=_staggered, image=lambda c, i: c[i],
                                  spawn=lambda call: SizeSegment(4)),
    }


def _pigeonhole_builtins(ctx):
    n, rel = ctx.n, ctx.block

    def nearest(call, i):
        m = rel._pos[tuple(call[:n])]
        return m * n + min(i, n - 1)
    return {
        "nearest_block": Candidate("nearest_block", n + 1, delay=_staggered, image=nearest),
        "collapse": Candidate("collapse", n + 1, delay=_staggered, image=lambda c, i: 0),
        "split": Candidate("split", n + 1, delay=_staggered, image=lambda c, i: i * n),
    }


def _slice_builtins(ctx):
    chain = ctx.chain
    roomy = next(m for m, t in enumerate(chain.tuples) if len(t) >= 3)

    def one_block(call, i):
        j, _ = unpair(call[0])
        return chain.g_inv(roomy, min(j, chain.top(roomy)))

    def scatter(call, i):
        j, _ = unpair(call[0])
        return chain.g_inv(j, 0)

    def packer(call, i):
        j, _ = unpair(call[0])
        m = roomy
        while j > chain.top(m):
            j -= chain.top(m) + 1
            m += 1
        return chain.g_inv(m, j)
    return {
        "one_block": Candidate("one_block", 1, delay=lambda c, i: 1, image=one_block),
        "scatter": Candidate("scatter", 1, delay=lambda c, i: 1, image=scatter),
        "greedy_packer": Candidate("greedy_packer", 1, delay=lambda c, i: 2, image=packer),
    }


def _infclasses_builtins(ctx):
    table, z = ctx.table, ctx.z

    def partner(x):
        cls = table.classes[table.class_of(x)]
        return next((y for y in cls if y != x), x)
    one = [z[0], partner(z[0]), z[0], partner(z[0])]
    two = [z[0], partner(z[0]), z[1 % len(z)], partner(z[1 % len(z)])]
    return {
        "one_class": Candidate("one_class", 4, delay=_staggered, image=lambda c, i: one[i]),
        "two_classes": Candidate("two_classes", 4, delay=_staggered, image=lambda c, i: two[i]),
    }


BUILTIN_SUITE = {
    "adv_set_not_e3": _set_not_e3_builtins,
    "adv_max_to_min_binary": _max_to_min_builtins,
    "adv_no4ary_emax": _no4ary_builtins,
    "adv_pigeonhole": _pigeonhole_builtins,
    "adv_finitary_slice": _slice_builtins,
    "adv_infclasses": _infclasses_builtins,
}


def reference_candidates() -> dict[str, Candidate]:
    """Correct reductions shipped for contrast; they belong to no game's suite."""
    return {
        "eqce_to_emax_ternary": Candidate(
            "eqce_to_emax_ternary", 3, delay=lambda c, i: 0, image=lambda c, i: c[i],
            spawn=lambda call: _TernaryOnly()),
    }


class _TernaryOnly(TernaryAs4ary):
    def step(self, s, views):
        return super().step(s, views)[:3]


def builtin_names(adversary: str) -> list[str]:
    return sorted(BUILTIN_SUITE[adversary](context_for(adversary, {}, None)).keys())


# ------------------------------------------------------------------ table candidates

def load_table_candidate(path) -> Candidate:
    """Scripted candidate from JSON.

    Keys: ``arity``; ``images`` (a list of output indices, or an object from
    comma-joined argument tuples to such lists, with optional "default");
    ``delays`` (a number, null for never, or a list per output); ``outputs``
    (per output: a description literal, or {"echo": k}).
    """
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except FileNotFoundError:
        raise ParseError(f"file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path.name}: not valid JSON ({exc})")
    try:
        arity = int(obj["arity"])
    except (KeyError, TypeError, ValueError):
        raise ParseError("table candidate needs an integer 'arity'")
    width = 1 if arity == 1 else arity
    images = obj.get("images")
    delays = obj.get("delays", 0)
    if isinstance(delays, list):
        if len(delays) != width:
            raise ParseError(f"delays lists {len(delays)} entries for {width} outputs")
        delay = lambda c, i: delays[i]
    else:
        delay = lambda c, i: delays

    def image(call, i):
        if images is None:
            return call[min(i, len(call) - 1)]
        if isinstance(images, list):
            return int(images[i])
        key = ",".join(str(x) for x in call)
        row = images.get(key, images.get("default"))
        if row is None:
            raise ParseError(f"table candidate has no image for {key}")
        return int(row[i] if isinstance(row, list) else row)

    spawn = None
    if "outputs" in obj:
        specs = []
        for k, lit in enumerate(obj["outputs"]):
            if isinstance(lit, dict) and "echo" in lit:
                specs.append({"echo": int(lit["echo"])})
            else:
                try:
                    specs.append(parse_description(lit))
                except ParseError as exc:
                    raise ParseError(f"outputs[{k}]: {exc}")
        if len(specs) != width:
            raise ParseError(f"outputs lists {len(specs)} entries for {width} outputs")
        spawn = lambda call: Mixed(specs)
    return Candidate(path.stem, arity, kind="table", image=image, delay=delay, spawn=spawn)


# ------------------------------------------------------------------ scenarios

GAMES = {
    "adv_set_not_e3": SetNotE3,
    "adv_max_to_min_binary": MaxToMin,
    "adv_no4ary_emax": No4aryMax,
    "adv_pigeonhole": Pigeonhole,
    "adv_finitary_slice": FinitarySlice,
    "adv_infclasses": InfClasses,
}


def context_for(adversary: str, params: dict, sc: Scenario | None) -> Context:
    ctx = Context(adversary)
    if adversary == "adv_pigeonhole":
        ctx.n = int(params.get("n", 3))
        if ctx.n < 1:
            raise ParseError("pigeonhole needs n >= 1")
        ctx.block = BlockRelation(ctx.n, small_tuples(ctx.n, int(params.get("blocks", 64))))
    elif adversary == "adv_finitary_slice":
        ctx.slice = int(params.get("slice", 0))
        ctx.chain = ChainRelation(small_tuples(None, int(params.get("tuples", 200))))
    elif adversary == "adv_infclasses":
        rel = sc.relation if sc is not None else None
        if rel is None:
            rel = Table([[0, 1], [2, 3]])
        if not isinstance(rel, Table):
            raise ParseError("adv_infclasses needs a table relation")
        z = [int(x) for x in params.get("z", [c[0] for c in rel.classes if len(c) > 1])]
        hard = {rel.class_of(x) for x in z}
        if len(hard) != len(z):
            raise ParseError("z must name pairwise unrelated numbers")
        if any(len(c) > 1 and k not in hard for k, c in enumerate(rel.classes)):
            raise ParseError("z must represent every class with more than one member")
        if not z:
            raise ParseError("adv_infclasses needs at least one class with two members")
        ctx.table, ctx.z = rel, tuple(z)
    return ctx


def game_arity(adversary: str, ctx: Context) -> int:
    if adversary == "adv_pigeonhole":
        return ctx.n + 1
    return GAMES[adversary].arity


def resolve_candidate(selector: str, ctx: Context, base: Path | None = None) -> Candidate:
    """``builtin:<name>`` from the game's suite or the reference set, or ``table:<file>``."""
    kind, _, name = selector.partition(":")
    if kind == "builtin":
        suite = BUILTIN_SUITE[ctx.adversary](ctx)
        if name in suite:
            return suite[name]
        refs = reference_candidates()
        if name in refs:
            return refs[name]
        raise ParseError(f"unknown builtin {name!r} for {ctx.adversary}; "
                         f"choose from {sorted(suite)}")
    if kind == "table":
        path = Path(name)
        if not path.exists() and base is not None and (base / name).exists():
            path = base / name
        return load_table_candidate(path)
    raise ParseError(f"candidate selector must be builtin:<name> or table:<file>, got {selector!r}")


def build_game(sc: Scenario, candidate: Candidate, ctx: Context, trace: Trace) -> Game:
    cls = GAMES[sc.adversary]
    p = sc.params
    args = dict(candidate=candidate, horizon=sc.horizon, window=sc.window, trace=trace)
    if cls is SetNotE3:
        return cls(**args, columns=int(p.get("columns", 3)))
    if cls is Pigeonhole:
        return cls(**args, n=ctx.n, count=int(p.get("blocks", 64)))
    if cls is FinitarySlice:
        return cls(**args, slice_=ctx.slice, count=int(p.get("tuples", 200)))
    if cls is InfClasses:
        _, approx = chips_from_spec(ctx.table, sc.chips)
        return cls(**args, table=ctx.table, approx=approx, z=list(ctx.z))
    return cls(**args)


def play(game: Game, candidate: Candidate) -> JointRun:
    """Run the match and settle its verdict."""
    run = interleave(game, candidate, game.horizon, settle=True)
    if run.verdict is not None:
        return run
    if game.waiting is not None:
        call, i = game.waiting
        run.verdict = CandidateDiverged(game.args(call), i, game.horizon)
    else:
        run.verdict = game.verdict(run.outputs) or Survived(game.horizon)
    return run


def run_adversary_scenario(sc: Scenario, candidate: str | None = None):
    """Play the scenario's game against the selected candidate; returns (Report, Trace)."""
    selector = candidate or sc.candidate
    if not selector:
        raise ParseError("no candidate selected (use --candidate or the scenario's 'candidate')")
    t0 = time.perf_counter()
    ctx = context_for(sc.adversary, sc.params, sc)
    base = Path(sc.source).parent if sc.source else None
    cand = resolve_candidate(selector, ctx, base)
    need = game_arity(sc.adversary, ctx)
    if cand.arity != need:
        raise ArityMismatch(f"arity mismatch: {sc.adversary} plays {need}-ary candidates, "
                            f"{cand.name} is {cand.arity}-ary")
    trace = Trace()
    game = build_game(sc, cand, ctx, trace)
    run = play(game, cand)
    lagged = lag_audit(trace)
    validated = False
    if isinstance(run.verdict, Defeated):
        stored = json.loads(json.dumps(run.verdict.certificate.to_dict()))
        validated = validate_certificate(stored) and not lagged and not game.audits
    report = Report(
        scenario=sc.name, construction=sc.adversary, audits=list(game.audits) + lagged,
        digest=trace.digest(), runtime=time.perf_counter() - t0, verdict=run.verdict,
        expect=sc.expect,
        extra={"validated": validated, "candidate": selector, "lag_violations": len(lagged)},
    )
    return report, trace
