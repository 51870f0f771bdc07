import itertools

import pytest
from hypothesis import given, settings, strategies as st

from ceerlab.universe import (
    All, CofiniteMissing, Columnar, Finite, Flat, ParseError, Periodic, Stream, Universe,
    column_snapshot, decide_limit_membership, pair, pair_tuple, parse_description, stream_from_description,
    unpair,
)

nat = st.integers(min_value=0, max_value=10_000)


def test_pairing_small_values():
    assert pair(0, 0) == 0
    assert pair(0, 1) == 2
    assert unpair(pair(3, 5)) == (3, 5)


def test_pairing_is_a_bijection_on_a_square():
    codes = {pair(x, n) for x in range(1001) for n in range(1001)}
    assert len(codes) == 1001 * 1001
    # every code below the smallest missed diagonal is hit
    assert set(range(1001 * 1002 // 2)) <= codes


def test_pairing_matches_closed_form():
    for x, n in itertools.product(range(40), repeat=2):
        assert pair(x, n) == (x + n) * (x + n + 1) // 2 + n


@given(nat, nat)
def test_unpair_inverts_pair(x, n):
    assert unpair(pair(x, n)) == (x, n)


@given(st.integers(min_value=0, max_value=10**9))
def test_pair_inverts_unpair(c):
    assert pair(*unpair(c)) == c


def test_tuple_pairing_is_injective_per_length():
    for ln in range(1, 4):
        seen = {}
        for t in itertools.product(range(6), repeat=ln):
            code = pair_tuple(t)
            assert seen.setdefault(code, t) == t


def test_finite_description_settles():
    s = stream_from_description(Flat(Finite({2, 5})), 1, 50)
    assert s.snapshot(5) == {2, 5}
    assert s.snapshot(50) == {2, 5}
    assert s.change_stages()[-1] <= 5


def test_empty_description_stays_empty():
    s = stream_from_description(Flat(Finite(set())), 1, 100)
    assert all(s.snapshot(t) == frozenset() for t in range(101))


def test_periodic_description_keeps_growing_through_evens():
    s = stream_from_description(Flat(Periodic(2, {0}, 0)), 1, 200)
    assert all(x % 2 == 0 for x in s.snapshot())
    sizes = [s.size(t) for t in range(0, 201, 10)]
    assert all(a < b for a, b in zip(sizes, sizes[1:]))


def test_limit_membership():
    assert decide_limit_membership(Flat(CofiniteMissing({4})), 4) is False
    assert decide_limit_membership(Flat(CofiniteMissing({4})), 7) is True
    assert decide_limit_membership(Columnar({3: All()}), pair(9, 3)) is True
    assert decide_limit_membership(Columnar({3: All()}), pair(9, 2)) is False


def test_column_snapshot_unfolds_codes():
    assert column_snapshot(Stream(), 4, 10) == frozenset()
    s = Stream()
    for c in (pair(0, 2), pair(4, 2), pair(1, 3)):
        s.add(3, c)
    assert column_snapshot(s, 2, 3) == {0, 4}
    d = Columnar({2: Finite({0, 4})})
    big = stream_from_description(d, 1, pair(4, 2) + 5)
    assert column_snapshot(big, 2) == {0, 4}


def test_fresh_numbers_dominate_the_scope():
    u = Universe()
    assert u.fresh("out") == 1
    st_ = u.add_stream("w", Stream("w", "out"))
    st_.add(0, 17)
    assert u.fresh("out") >= 18
    a, b = u.fresh("out"), u.fresh("out")
    assert b > a


def test_parse_errors_name_the_problem():
    with pytest.raises(ParseError, match="unknown column kind"):
        parse_description({"kind": "bogus"})
    with pytest.raises(ParseError, match="negative"):
        parse_description({"kind": "finite", "elems": [-1]})
    with pytest.raises(ParseError):
        parse_description({"kind": "columnar", "cols": {"x": {"kind": "all"}}})


# ---------------------------------------------------------------- properties

small = st.integers(min_value=0, max_value=30)
columns = st.one_of(
    st.builds(Finite, st.frozensets(small, max_size=5)),
    st.builds(CofiniteMissing, st.frozensets(small, max_size=4)),
    st.just(All()),
    st.integers(min_value=2, max_value=6).flatmap(
        lambda m: st.builds(Periodic, st.just(m), st.frozensets(st.integers(0, m - 1), min_size=1),
                            st.integers(0, 20))),
)
descriptions = st.one_of(
    st.builds(Flat, columns),
    st.builds(Columnar, st.dictionaries(st.integers(0, 4), columns, max_size=3),
              st.one_of(st.none(), columns)),
)


@settings(max_examples=60, deadline=None)
@given(descriptions, st.integers(min_value=1, max_value=3))
def test_snapshots_only_grow(d, pace):
    s = stream_from_description(d, pace, 300)
    prev = frozenset()
    for t in range(301):
        cur = s.snapshot(t)
        assert prev <= cur
        prev = cur


@settings(max_examples=40, deadline=None)
@given(descriptions)
def test_enumeration_is_faithful_below_200(d):
    s = stream_from_description(d, 1, 5000)
    got = s.snapshot()
    for x in range(200):
        assert (x in got) == decide_limit_membership(d, x)


@settings(max_examples=30, deadline=None)
@given(descriptions)
def test_universes_are_deterministic(d):
    def history():
        u = Universe()
        u.describe(0, d)
        u.describe(1, d, pace=2)
        u.run_to(150)
        return [u.streams[k].events() for k in (0, 1)]
    assert history() == history()
