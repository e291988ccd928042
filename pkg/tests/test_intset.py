import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shiftlab.errors import CapExceeded, ConfigError, HorizonExhausted
from shiftlab.intset import (
    ArithmeticProgression,
    CongruenceStructure,
    DifferenceOf,
    DyadicBlocks,
    Explicit,
    Intersection,
    Naturals,
    Range,
    SetRule,
    Translate,
    Union,
    WindowedSet,
    congruence_structures,
    cross_difference,
    difference_set,
    doubling_conflicts,
    doubling_free_certificate,
    materialize,
    parse_set_rule,
    stats,
    translate,
)


def ws(members, horizon, complete=True):
    return WindowedSet(horizon, tuple(members), complete)


# ---------------------------------------------------------------------------
# oracles


def oracle_difference(members):
    return sorted({a - b for a in members for b in members if a > b})


def oracle_dyadic(h):
    out = []
    k = 1
    while 2 ** (2 * k - 1) < h:
        out.extend(range(2 ** (2 * k - 1), min(2 ** (2 * k), h)))
        k += 1
    return out


# ---------------------------------------------------------------------------
# WindowedSet basics


def test_members_must_be_increasing_and_bounded():
    with pytest.raises(ConfigError):
        ws([3, 2], 10)
    with pytest.raises(ConfigError):
        ws([2, 2], 10)
    with pytest.raises(ConfigError):
        ws([2, 10], 10)
    with pytest.raises(ConfigError):
        ws([], 0)


def test_membership_small_and_dense_paths():
    small = ws([1, 5], 100)
    assert 5 in small and 4 not in small and -1 not in small
    big = ws([1, 5000], 10000)
    assert 5000 in big and 4999 not in big


# ---------------------------------------------------------------------------
# materialize


def test_materialize_range():
    assert materialize(Range(2, 3), 10).members == (2, 3)


def test_materialize_dyadic_blocks_h20():
    got = materialize(DyadicBlocks(), 20)
    assert got.members == (2, 3, 8, 9, 10, 11, 12, 13, 14, 15)
    assert got.members == tuple(oracle_dyadic(20))


def test_materialize_progression():
    assert materialize(ArithmeticProgression(1, 2), 8).members == (1, 3, 5, 7)


def test_materialize_naturals_excludes_zero():
    assert materialize(Naturals(), 5).members == (1, 2, 3, 4)


def test_materialize_rejects_bad_rules():
    with pytest.raises(ConfigError):
        Range(4, 2)
    with pytest.raises(ConfigError):
        ArithmeticProgression(3, 0)
    with pytest.raises(ConfigError):
        materialize(Range(1, 2), 0)


def test_nesting_cap():
    rule: SetRule = Range(1, 2)
    for _ in range(20):
        rule = Union((rule,))
    with pytest.raises(CapExceeded):
        materialize(rule, 10)


# ---------------------------------------------------------------------------
# difference_set


def test_difference_examples():
    assert difference_set(ws([1, 3, 6], 7)).members == (2, 3, 5)
    assert difference_set(ws([5], 7)).members == ()
    evens = materialize(ArithmeticProgression(2, 2), 11)
    assert evens.members == (2, 4, 6, 8, 10)
    d = difference_set(evens)
    assert d.members == (2, 4, 6, 8)
    assert d.members == tuple(oracle_difference(evens.members))
    assert not d.complete
    assert d.horizon == evens.horizon


@given(
    st.lists(st.integers(min_value=0, max_value=200), min_size=0, max_size=40, unique=True),
)
def test_difference_matches_pairwise_oracle(vals):
    members = tuple(sorted(vals))
    s = ws(members, 201)
    assert difference_set(s).members == tuple(oracle_difference(members))


def test_cross_difference():
    a = ws([1, 4], 10)
    b = ws([2, 6], 10)
    # {b - a : b in B, a in A, b > a} = {2-1, 6-1, 6-4} = {1, 2, 5}
    assert cross_difference(a, b).members == (1, 2, 5)


# ---------------------------------------------------------------------------
# translate


def test_translate_examples():
    assert translate(ws([2, 5], 10), 3).members == (5, 8)
    assert translate(ws([2, 5], 10), -3).members == (2,)
    assert translate(ws([], 10), 5).members == ()


def test_translate_horizon_bookkeeping():
    s = ws([2, 5], 10)
    assert translate(s, 3).horizon == 13
    assert translate(s, -3).horizon == 7
    with pytest.raises(HorizonExhausted):
        translate(s, 10)
    with pytest.raises(HorizonExhausted):
        translate(s, -10)


@given(
    st.lists(st.integers(min_value=0, max_value=80), max_size=25, unique=True),
    st.integers(min_value=0, max_value=40),
)
def test_translate_round_trip(vals, n):
    s = ws(sorted(vals), 81)
    back = translate(translate(s, n), -n)
    cutoff = s.horizon - n
    want = tuple(v for v in s.members if 1 <= v < cutoff)
    got = tuple(v for v in back.members if 1 <= v < cutoff)
    assert got == want


# ---------------------------------------------------------------------------
# stats


def test_stats_solid_block():
    r = stats(ws(range(8, 16), 16))
    assert r.longest_run == 8
    assert r.max_internal_gap == 1
    assert r.window_density == pytest.approx(0.5)


def test_stats_dyadic_h16():
    r = stats(materialize(DyadicBlocks(), 16))
    assert r.max_internal_gap == 5  # between 3 and 8


def test_stats_degenerate():
    r = stats(ws([], 4))
    assert r.longest_run == 0 and r.max_internal_gap is None
    r1 = stats(ws([3], 4))
    assert r1.longest_run == 1 and r1.max_internal_gap is None


# ---------------------------------------------------------------------------
# rule grammar

CANONICAL = [
    ("range(2,3)", Range(2, 3)),
    ("ap(1,2)", ArithmeticProgression(1, 2)),
    ("dyadic()", DyadicBlocks()),
    ("nat()", Naturals()),
    ("evens()", ArithmeticProgression(2, 2)),
    ("explicit(1,3,6)", Explicit((1, 3, 6))),
    ("union(range(2,3),ap(1,2))", Union((Range(2, 3), ArithmeticProgression(1, 2)))),
    ("inter(nat(),evens())", Intersection((Naturals(), ArithmeticProgression(2, 2)))),
    ("shift(evens(),-1)", Translate(ArithmeticProgression(2, 2), -1)),
    ("diff(dyadic())", DifferenceOf(DyadicBlocks())),
]


@pytest.mark.parametrize("text,rule", CANONICAL)
def test_parse_canonical(text, rule):
    assert parse_set_rule(text) == rule


def test_parse_is_whitespace_insensitive():
    assert parse_set_rule(" union( range( 2 , 3 ) , dyadic( ) ) ") == Union(
        (Range(2, 3), DyadicBlocks())
    )


@pytest.mark.parametrize(
    "bad",
    ["", "range(2)", "range(2,3", "frobnicate()", "union()", "range(2,3)x", "ap(,2)"],
)
def test_parse_rejects_garbage(bad):
    with pytest.raises(ConfigError):
        parse_set_rule(bad)


def test_literals_round_trip():
    for text, rule in CANONICAL:
        if text == "evens()":
            continue  # sugar normalizes to ap(2,2)
        assert parse_set_rule(rule.literal()) == rule


# ---------------------------------------------------------------------------
# property tests over random rules

leaf_rules = st.one_of(
    st.builds(lambda a, w: Range(a, a + w), st.integers(1, 30), st.integers(0, 30)),
    st.builds(ArithmeticProgression, st.integers(1, 10), st.integers(1, 8)),
    st.just(DyadicBlocks()),
    st.just(Naturals()),
    st.builds(
        lambda vs: Explicit(tuple(sorted(set(vs)))),
        st.lists(st.integers(1, 60), min_size=1, max_size=6),
    ),
)


def complete_rules(depth=2):
    if depth == 0:
        return leaf_rules
    sub = complete_rules(depth - 1)
    return st.one_of(
        leaf_rules,
        st.builds(lambda a, b: Union((a, b)), sub, sub),
        st.builds(lambda a, b: Intersection((a, b)), sub, sub),
        st.builds(Translate, sub, st.integers(-10, 10)),
    )


@settings(max_examples=150)
@given(complete_rules(), st.integers(1, 80), st.integers(0, 80))
def test_window_monotonicity(rule, h1, extra):
    # Holds for every completeness-preserving rule; diff() is exempt by
    # design (see test_difference_rule_is_sound_but_not_monotone).
    h2 = h1 + extra
    small = materialize(rule, h1)
    large = materialize(rule, h2)
    assert small.members == tuple(v for v in large.members if v < h1)
    assert small.complete and large.complete


def test_difference_rule_is_sound_but_not_monotone():
    rule = DifferenceOf(Explicit((2, 4)))
    assert materialize(rule, 3).members == ()
    assert materialize(rule, 5).members == (2,)  # new small member appears
    assert not materialize(rule, 5).complete


@settings(max_examples=60)
@given(complete_rules(), st.integers(2, 60))
def test_difference_of_rule_matches_op(rule, h):
    via_rule = materialize(DifferenceOf(rule), h)
    via_op = difference_set(materialize(rule, h))
    assert via_rule.members == via_op.members


# ---------------------------------------------------------------------------
# dyadic doubling law


def test_dyadic_parity_law_on_window():
    assert doubling_conflicts(DyadicBlocks(), 5000) == ()
    s = materialize(DyadicBlocks(), 5000)
    inside = [m for m in s.members if 2 * m < 5000]
    assert inside and all(2 * m not in s for m in inside)


def test_doubling_free_certificate_only_for_dyadic():
    cert = doubling_free_certificate(DyadicBlocks())
    assert cert is not None and cert["name"] == "parity-law"
    assert doubling_free_certificate(ArithmeticProgression(2, 2)) is None
    # evens genuinely double into themselves
    assert doubling_conflicts(ArithmeticProgression(2, 2), 50) != ()


# ---------------------------------------------------------------------------
# congruence structure


def test_congruences_of_evens():
    structs = congruence_structures(ArithmeticProgression(2, 2))
    mods = {c.modulus: c.residues for c in structs}
    assert mods[2] == frozenset({0})


def test_congruences_sound_on_window():
    rule = Union((ArithmeticProgression(3, 6), Explicit((1, 13))))
    s = materialize(rule, 400)
    for c in congruence_structures(rule):
        assert all(v % c.modulus in c.residues for v in s.members)


def test_congruences_unknown_for_dyadic():
    assert congruence_structures(DyadicBlocks()) == ()
