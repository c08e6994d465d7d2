import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from norminflation.errors import InvalidParameters
from norminflation.resonance import (
    ResonantTuple,
    box_points,
    cubic_rows,
    enumerate_resonant,
    is_resonant,
    pad_tuple,
    quintic_tuple,
    resonant_cubic_1d,
    resonant_cubic_multid,
    resonant_rows,
    tuple_table,
)


def T(*entries, j):
    return ResonantTuple(tuple(entries), j)


def test_is_resonant_examples():
    assert is_resonant([2, -1, -2, 4, 3], 0)
    assert is_resonant([(1, 0), (1, 1), (0, 1)], (0, 0))
    assert is_resonant([5, 5, 2], 2)
    assert not is_resonant([1, 2, 1], 0)


def test_is_resonant_rejects_bad_input():
    with pytest.raises(InvalidParameters):
        is_resonant([1, 2], 1)
    with pytest.raises(Exception):
        is_resonant([(1, 0), 1, 1], (0, 0))


def test_oracle_small_box():
    got = enumerate_resonant(0, 1, 1)
    want = sorted(
        [T(0, ell, ell, j=0) for ell in (-1, 1)] + [T(ell, ell, 0, j=0) for ell in (-1, 1)] + [T(0, 0, 0, j=0)]
    )
    assert got == want


def test_oracle_against_triple_loop():
    # independent check: plain loops over every triple of the box
    K, j = 2, (1,)
    brute = {
        (k, ell, m)
        for k, ell, m in itertools.product(range(-K, K + 1), repeat=3)
        if k - ell + m == 1 and k * k - ell * ell + m * m == 1
    }
    got = {tuple(e[0] for e in t.entries) for t in enumerate_resonant(j, 1, K)}
    assert got == brute


def test_box_must_contain_target():
    with pytest.raises(InvalidParameters):
        enumerate_resonant(3, 1, 2)


def test_multid_unit_square():
    got = set(enumerate_resonant((0, 0), 1, 1))
    assert T((1, 0), (1, 1), (0, 1), j=(0, 0)) in got
    assert T((0, 1), (1, 1), (1, 0), j=(0, 0)) in got
    assert T((1, 0), (1, 1), (0, 1), j=(0, 0)) in set(resonant_cubic_multid((0, 0), 1))


def test_cubic_1d_examples():
    assert resonant_cubic_1d(0, 1) == enumerate_resonant(0, 1, 1)
    assert resonant_cubic_1d(1, 1) == sorted(
        [T(1, ell, ell, j=1) for ell in (-1, 0)] + [T(ell, ell, 1, j=1) for ell in (-1, 0)] + [T(1, 1, 1, j=1)]
    )
    for K in range(1, 9):
        assert len(resonant_cubic_1d(0, K)) == 4 * K + 1
        assert resonant_cubic_1d(0, K) == enumerate_resonant(0, 1, K)


def test_multid_matches_oracle_d2():
    assert resonant_cubic_multid((0, 0), 2) == enumerate_resonant((0, 0), 1, 2)


def test_multid_contains_degenerate_family():
    got = set(resonant_cubic_multid((1, -1), 2))
    for ell in map(tuple, box_points(2, 2)):
        if ell != (1, -1):
            assert T((1, -1), ell, ell, j=(1, -1)) in got


def test_rows_agree_with_objects():
    rows = resonant_rows((1, 0), 1, 2)
    assert [t.flat() for t in enumerate_resonant((1, 0), 1, 2)] == [tuple(r) for r in rows.tolist()]
    np.testing.assert_array_equal(cubic_rows((1, 0), 2), rows)


@pytest.mark.parametrize("p,q,want", [(2, 1, (2, -1, -2, 4, 3)), (3, 1, (3, -1, -3, 9, 8))])
def test_quintic_examples(p, q, want):
    t = quintic_tuple(p, q)
    assert tuple(e[0] for e in t.entries) == want
    assert t.target == (0,)


@pytest.mark.parametrize("p,q", [(1, 1), (2, -2), (0, 3), (3, 0)])
def test_quintic_rejects(p, q):
    with pytest.raises(InvalidParameters) as err:
        quintic_tuple(p, q)
    assert err.value.reason == "invalid-parameters"


def test_quintic_in_oracle():
    assert quintic_tuple(2, 1) in enumerate_resonant(0, 2, 4)


def test_padding_examples():
    base = T((1, 0), (1, 1), (0, 1), j=(0, 0))
    out = pad_tuple(base, 2)
    assert T((1, 0), (1, 1), (0, 1), (1, 0), (1, 0), j=(0, 0)) in out
    assert all(len(t.entries) == 7 for t in pad_tuple(base, 3))
    with pytest.raises(InvalidParameters):
        pad_tuple(base, 1)


small = st.integers(-4, 4)


@given(st.tuples(small, small), st.tuples(small, small), st.tuples(small, small))
def test_rectangle_identity(k, ell, m):
    j = tuple(a - b + c for a, b, c in zip(k, ell, m))
    dot = sum((a - b) * (c - b) for a, b, c in zip(k, ell, m))
    assert is_resonant([k, ell, m], j) == (dot == 0)


@given(st.integers(-3, 3))
def test_oracle_closed_under_odd_swap(j):
    got = set(enumerate_resonant(j, 1, 3))
    assert {T(t.entries[2], t.entries[1], t.entries[0], j=t.target) for t in got} == got


@given(st.lists(st.tuples(small, small), min_size=3, max_size=3), st.sampled_from([2, 3]))
def test_padding_property(triple, sigma):
    k, ell, m = triple
    j = tuple(a - b + c for a, b, c in zip(k, ell, m))
    if not is_resonant(triple, j):
        return
    for t in pad_tuple(ResonantTuple(tuple(triple), j), sigma):
        assert is_resonant(t.entries, t.target)


def test_tuple_table_defect():
    idx, targets, defect = tuple_table([(1,), (2,)], 1)
    assert len(idx) == 8
    for row, t, dlt in zip(idx, targets, defect):
        k, ell, m = (np.array([1, 2])[row])
        assert t[0] == k - ell + m
        assert dlt == t[0] ** 2 - (k * k - ell * ell + m * m)
