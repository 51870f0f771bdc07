import itertools
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from ceerlab.relations import (
    ChipPolicy, FinitelyMany, InfinitelyOften, Named, PacingViolation, Table, agreement_F, chips_from_spec,
    colcount_F, density_F, eperm_decide, eval_ground, marker_m, parse_relation,
)
from ceerlab.universe import (
    All, CofiniteMissing, Columnar, Finite, Flat, ParseError, Periodic, Stream, Universe,
    stream_from_description,
)


def fl(*xs):
    return Flat(Finite(xs))


def test_ground_truth_examples():
    assert eval_ground(Named("EMax"), fl(0, 3), fl(1, 2, 3)) is True
    assert eval_ground(Named("EMax"), fl(), fl(0)) is False
    assert eval_ground(Named("E3"), Columnar({0: All()}), Columnar({0: Finite({0})})) is False
    assert eval_ground(Named("EMin"), fl(), Flat(CofiniteMissing({0, 1, 2}))) is False
    assert eval_ground(Named("ECard"), fl(4, 9), fl(0, 1)) is True
    assert eval_ground(Named("Z0"), Flat(Periodic(2, {0})), Flat(Periodic(2, {0}, 6))) is True


def test_perm_decision_examples():
    one = Finite({1})
    assert eperm_decide(Columnar({0: one, 1: one}), Columnar({0: one, 2: one})) is True
    assert eperm_decide(Columnar({0: one}), Columnar({0: one, 1: one})) is False
    d = Columnar({0: one, 3: All()}, CofiniteMissing({2}))
    assert eperm_decide(d, d) is True


def test_chip_schedule_examples():
    sched, h = chips_from_spec(Table([[0, 1], [2]]), ChipPolicy(3))
    assert isinstance(sched.variant(0, 1), InfinitelyOften)
    assert sched.variant(0, 2) == FinitelyMany(()) and sched.variant(1, 2) == FinitelyMany(())
    noisy, _ = chips_from_spec(Table([[0, 1], [2]]), ChipPolicy(3, 0, (((0, 2), (2, 4)),)))
    assert noisy.variant(0, 2) == FinitelyMany((2, 4))
    busy, _ = chips_from_spec(Table([[0, 1], [2]]), ChipPolicy(1, 0, (((1, 2), (5, 5)),)))
    assert [busy.chip(s) for s in (4, 5, 6, 7)] == [(0, 1), (1, 2), (1, 2), (0, 1)]
    lonely, _ = chips_from_spec(Table([[0]]), ChipPolicy(3))
    assert all(lonely.chip(s) is None for s in range(200))
    assert h(0, 1, 0) == 1 and h(0, 2, 0) == 0


def test_density_examples():
    assert density_F(frozenset({1, 5}), frozenset({1, 5}), 8) == 0
    assert density_F(frozenset({0, 1, 9}), frozenset(), 4) == Fraction(1, 2)
    assert density_F(frozenset({0, 2}), frozenset({1, 3}), 4) == 1


def test_agreement_examples():
    same = Stream()
    same.add(1, 4)
    assert agreement_F(same, same, 6) == 0
    a, b = Stream(), Stream()
    a.add(1, 1)
    b.add(2, 3)
    a.add(3, 5)
    assert agreement_F(a, b, 3) == 3


def test_agreement_is_unbounded_on_disjoint_streams():
    u = Universe(joint=True)
    u.describe(0, Flat(Periodic(2, {0})))
    u.describe(1, Flat(Periodic(2, {1})))
    u.run_to(400)
    vals = [agreement_F(u.streams[0], u.streams[1], s) for s in range(400)]
    assert max(vals[:100]) < max(vals[300:])
    assert max(vals) > 300


def test_agreement_rejects_two_entries_in_one_stage():
    a = Stream()
    a.add(1, 0)
    a.add(1, 1)
    with pytest.raises(PacingViolation):
        agreement_F(a, Stream(), 1)


def test_column_count_examples():
    empty = [frozenset()] * 4
    assert colcount_F(empty, 3, 50) == 4
    assert colcount_F([frozenset({7}), frozenset()], 1, 100) == 1
    assert colcount_F([frozenset({1}), frozenset({2})], 0, 100) == 1


def test_marker_examples():
    assert marker_m(frozenset({1, 2}), frozenset({1, 2}), 9) == 9
    assert marker_m(frozenset({0, 2}), frozenset({0, 3}), 9) == 2
    a = stream_from_description(Flat(Periodic(3, {1})), 1, 600)
    b = stream_from_description(Flat(Periodic(3, {1})), 2, 600)
    vals = [marker_m(a.snapshot(s), b.snapshot(s), s) for s in range(600)]
    assert any(vals[s] == s for s in range(500, 600))


def test_malformed_tables_name_the_entry():
    with pytest.raises(ParseError, match="'x'"):
        parse_relation({"table": [[0, "x"]]})
    with pytest.raises(ParseError, match="index 1 appears in two classes"):
        parse_relation({"table": [[0, 1], [1]]})
    with pytest.raises(ParseError, match="unknown relation"):
        parse_relation({"named": "Nope"})


# ---------------------------------------------------------------- properties

partitions_st = st.integers(2, 6).flatmap(
    lambda k: st.lists(st.integers(0, k - 1), min_size=k, max_size=k)).map(
    lambda labels: Table([[x for x, c in enumerate(labels) if c == lab] for lab in sorted(set(labels))]))


@settings(max_examples=80, deadline=None)
@given(partitions_st, st.integers(1, 12), st.integers(0, 6),
       st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5), st.integers(0, 30)), max_size=3))
def test_chips_respect_classes_and_windows(table, period, phase, noise):
    fld = table.field
    noise = tuple(((a, b), (s,)) for a, b, s in noise if a in fld and b in fld and a != b)
    sched, _ = chips_from_spec(table, ChipPolicy(period, phase, noise))
    prefix = max(sched.noise_at, default=-1) + 1
    within = table.within_pairs()
    seen: dict = {p: [] for p in within}
    for s in range(prefix + 3 * period * max(1, len(within)) + 50):
        c = sched.chip(s)
        if c is None:
            continue
        assert c == (min(c), max(c))
        if s >= prefix:
            assert table.related(*c)
            seen[c].append(s)
    span = period * len(within)
    for p, stages in seen.items():
        lo = max(prefix, phase)
        marks = [lo - 1] + stages
        assert all(b - a <= span for a, b in zip(marks, marks[1:]))


flat_shapes = st.one_of(
    st.builds(Finite, st.frozensets(st.integers(0, 15), max_size=4)),
    st.builds(CofiniteMissing, st.frozensets(st.integers(0, 15), max_size=3)),
    st.integers(2, 5).flatmap(lambda m: st.builds(
        Periodic, st.just(m), st.frozensets(st.integers(0, m - 1), min_size=1), st.integers(0, 10))),
).map(Flat)


@settings(max_examples=100, deadline=None)
@given(flat_shapes, flat_shapes, flat_shapes)
def test_max_relation_is_an_equivalence(a, b, c):
    e = lambda x, y: eval_ground(Named("EMax"), x, y)
    assert e(a, a)
    assert e(a, b) == e(b, a)
    if e(a, b) and e(b, c):
        assert e(a, c)


def _bitmap(col, top=90):
    sh = col.shape()
    return tuple(sh.contains(x) for x in range(top))


def _brute_perm(a: Columnar, b: Columnar, width=14, listed=6):
    def counts(d):
        c = Counter(_bitmap(d.column(n)) for n in range(width))
        return {k: (v if v < width - listed else "inf") for k, v in c.items()}
    return counts(a) == counts(b)


perm_cols = st.one_of(
    st.builds(Finite, st.frozensets(st.integers(0, 19), max_size=3)),
    st.builds(CofiniteMissing, st.frozensets(st.integers(0, 19), max_size=2)),
    st.just(All()),
    st.builds(Periodic, st.integers(2, 4), st.just({0}), st.integers(0, 19)),
)
perm_descs = st.builds(Columnar, st.dictionaries(st.integers(0, 5), perm_cols, max_size=6),
                       st.one_of(st.none(), perm_cols))


@settings(max_examples=200, deadline=None)
@given(perm_descs, perm_descs)
def test_perm_decision_matches_brute_count(a, b):
    assert eperm_decide(a, b) == _brute_perm(a, b)


@settings(max_examples=100, deadline=None)
@given(perm_descs)
def test_perm_decision_sees_reordered_columns(a):
    listed = dict(a.cols)
    keys = sorted(listed)
    moved = Columnar({k: listed[keys[(i + 1) % len(keys)]] for i, k in enumerate(keys)}, a.default)
    assert eperm_decide(a, moved)


descs3 = st.lists(st.builds(Periodic, st.integers(2, 4), st.frozensets(st.integers(0, 1), min_size=1),
                            st.integers(0, 8)).map(Flat) | st.builds(Finite, st.frozensets(
                                st.integers(0, 30), max_size=4)).map(Flat), min_size=3, max_size=3)


@settings(max_examples=25, deadline=None)
@given(descs3)
def test_density_triangle_and_change_count(ds):
    H = 400
    streams = [stream_from_description(d, 1, H) for d in ds]
    news = [{} for _ in streams]
    for k, st_ in enumerate(streams):
        for s, x in st_.events():
            news[k].setdefault(s, set()).add(x)
    for n in (4, 9, 16):
        prev = None
        changes = 0
        snaps = [frozenset()] * 3
        for s in range(H + 1):
            snaps = [snaps[k] | news[k].get(s, set()) for k in range(3)]
            d = {(i, j): density_F(snaps[i], snaps[j], n) for i, j in itertools.permutations(range(3), 2)}
            for i, j, k in itertools.permutations(range(3)):
                assert d[(i, k)] <= d[(i, j)] + d[(j, k)]
            if prev is not None and d[(0, 1)] != prev:
                changes += 1
            prev = d[(0, 1)]
        assert changes <= 2 * n
