import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from transport_noise.lattice import (FULL, THIRD, coupling, coupling_matrix, eps, eps_table,
                                     inverse_square_sum, is_positive, lattice_sum_S, mode_set,
                                     partial_quartic_sum, sum_coupling_sq, sum_coupling_sq_many,
                                     viscosity_threshold, _quartic_tail_bounds)


def brute_modes(N, kind=FULL):
    r2 = N * N if kind == FULL else (N * N) // 9
    return {(a, b) for a in range(-N, N + 1) for b in range(-N, N + 1) if 0 < a * a + b * b <= r2}


@pytest.mark.parametrize("N", [1, 2, 3, 5, 8, 13])
@pytest.mark.parametrize("kind", [FULL, THIRD])
def test_mode_set_membership(N, kind):
    ms = mode_set(N, kind)
    assert {tuple(k) for k in ms.members} == brute_modes(N, kind)
    assert len(ms) == len(brute_modes(N, kind))


def test_mode_order_is_colex():
    m = mode_set(6).members
    keys = [(k[1], k[0]) for k in m]
    assert keys == sorted(keys)


def test_mode_set_counts():
    assert len(mode_set(1)) == 4
    assert len(mode_set(2)) == 12
    assert len(mode_set(8)) == 196
    assert len(mode_set(3, THIRD)) == 4
    assert len(mode_set(2, THIRD)) == 0


def test_index_round_trip():
    ms = mode_set(7)
    for i, k in enumerate(ms.members):
        assert ms.index(k) == i
    with pytest.raises(KeyError):
        ms.index((8, 0))
    assert (0, 0) not in ms


def test_positive_half_plane():
    assert is_positive((1, -3)) and is_positive((0, 2))
    assert not is_positive((0, -2)) and not is_positive((-1, 5))
    ms = mode_set(5).members
    pos = [is_positive(k) for k in ms]
    assert sum(pos) * 2 == len(ms)
    for k in ms:
        assert is_positive(k) != is_positive((-k[0], -k[1]))


@pytest.mark.parametrize("N", [0, -1, 2.5])
def test_bad_cutoff(N):
    with pytest.raises(ValueError):
        mode_set(N)


@pytest.mark.parametrize("N", [1, 2, 4, 9, 16])
@pytest.mark.parametrize("kind", [FULL, THIRD])
def test_eps_matches_brute_force(N, kind):
    modes = brute_modes(N, kind)
    if not modes:
        with pytest.raises(ValueError):
            eps(N, kind)
        return
    s = mpmath.fsum(mpmath.mpf(1) / (a * a + b * b) for a, b in modes)
    assert inverse_square_sum(N, kind) == pytest.approx(float(s), rel=1e-15)
    assert eps(N, kind) == pytest.approx(float(1 / mpmath.sqrt(s)), rel=1e-15)


def test_eps_values():
    # single shell: sum over four unit modes is 4
    assert eps(1) == 0.5
    assert eps(2) == pytest.approx((4 + 4 / 2 + 4 / 4) ** -0.5, rel=1e-15)


@pytest.mark.parametrize("kind", [FULL, THIRD])
def test_eps_table_agrees(kind):
    table = eps_table(200, kind)
    for N in (3, 17, 64, 128, 200):
        assert table[N - 1] == pytest.approx(eps(N, kind), rel=1e-13)
    if kind == THIRD:
        assert np.isnan(table[:2]).all()


def test_eps_decays_like_inverse_root_log():
    # sum |k|^-2 over the disc grows like 2 pi log N
    t = eps_table(4096)
    ratio = t[4095] ** -2 / (2 * math.pi * math.log(4096))
    assert 1.0 < ratio < 1.3
    assert np.all(np.diff(t) <= 0)


def test_coupling_exact_antisymmetry():
    rng = np.random.default_rng(1)
    for _ in range(200):
        k = tuple(int(v) for v in rng.integers(-20, 21, 2))
        l = tuple(int(v) for v in rng.integers(-20, 21, 2))
        if k == (0, 0):
            continue
        assert coupling((-k[0], -k[1]), l) == -coupling(k, l)
        assert coupling(k, k) == 0.0


def test_coupling_matrix_matches_scalar():
    ks = mode_set(4).members
    ls = mode_set(3).members
    M = coupling_matrix(ks, ls)
    for i, k in enumerate(ks):
        for j, l in enumerate(ls):
            assert M[i, j] == coupling(k, l)
    with pytest.raises(ValueError):
        coupling((0, 0), (1, 0))


@given(st.integers(1, 40), st.integers(-8, 8), st.integers(-8, 8), st.sampled_from([FULL, THIRD]))
@settings(max_examples=60, deadline=None)
def test_coupling_sum_identity(N, l1, l2, kind):
    if kind == THIRD and N < 3:
        return
    expect = 0.5 * (l1 * l1 + l2 * l2) / eps(N, kind) ** 2
    got = sum_coupling_sq((l1, l2), N, kind)
    assert abs(got - expect) <= 1e-12 * max(expect, 1.0)


def test_coupling_sum_many_matches_scalar():
    ls = mode_set(5).members
    many = sum_coupling_sq_many(ls, 20)
    for l, v in zip(ls, many):
        assert v == pytest.approx(sum_coupling_sq(tuple(l), 20), rel=1e-14)


def test_quartic_tail_bounds_bracket_brute_force():
    R = 40
    tail = partial_quartic_sum(400) - partial_quartic_sum(R)
    # the remaining tail beyond 400 is below 2 pi / (2 * 398^2)
    lo, hi = _quartic_tail_bounds(R)
    lo400, hi400 = _quartic_tail_bounds(400)
    assert lo - hi400 <= tail <= hi - lo400


def test_lattice_sum_S_certified():
    res = lattice_sum_S(1e-10)
    exact = float(4 * mpmath.zeta(2) * mpmath.catalan)
    assert abs(res.value - exact) <= res.tail_bound
    assert res.tail_bound <= 1e-10 * res.value
    assert res.value == pytest.approx(6.02681, abs=5e-6)


def test_lattice_sum_S_agrees_with_partial_sums():
    res = lattice_sum_S(1e-6)
    p = partial_quartic_sum(res.radius)
    lo, hi = _quartic_tail_bounds(res.radius)
    assert p + lo <= res.value <= p + hi
    with pytest.raises(OverflowError):
        lattice_sum_S(1e-16, max_radius=100)
    with pytest.raises(ValueError):
        lattice_sum_S(0.0)


def test_viscosity_threshold():
    exact = 4 * mpmath.sqrt(5) / mpmath.pi ** mpmath.mpf(1.5)
    assert viscosity_threshold(4 * math.pi) == pytest.approx(float(exact), rel=1e-15)
    assert viscosity_threshold(lattice_sum_S().value) == pytest.approx(1.11239512, abs=1e-8)
    with pytest.raises(ValueError):
        viscosity_threshold(-1.0)
