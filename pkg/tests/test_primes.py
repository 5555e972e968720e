import math

import numpy as np
import pytest
import sympy

from apvariance.characters import character_from_values, character_group
from apvariance.primes import (
    SIEVE_CEILING,
    CapacityError,
    TallyCache,
    character_sum,
    imprimitive_correction,
    prime_power_part,
    prime_powers_up_to,
    primes_in_range,
    primes_up_to,
    psi_from_primitive,
    read_tally,
    sieve_tallies,
    sieve_tally,
    step_trajectory,
    write_tally,
)


def naive_primes(n):
    return [p for p in range(2, n + 1) if all(p % d for d in range(2, math.isqrt(p) + 1))]


def naive_theta(x, q):
    out = [0.0] * q
    for p in sympy.primerange(2, x + 1):
        out[p % q] = math.fsum([out[p % q], math.log(p)])
    return out


def chi_m4():
    return character_from_values(4, {3: -1})


@pytest.mark.parametrize("x", [10**3, 10**4, 10**5])
def test_sieve_against_trial_division(x):
    got = primes_up_to(x).tolist()
    ref = naive_primes(x) if x <= 10**4 else list(sympy.primerange(2, x + 1))
    assert got == ref
    for q in (3, 7, 30):
        t = sieve_tally(x, q)
        exact = [math.fsum(math.log(p) for p in ref if p % q == a) for a in range(q)]
        for a in t.units:
            assert abs(t.theta(a) - exact[a]) <= 1e-9 * max(1.0, exact[a])


def test_small_segments_agree_with_one_segment():
    a = primes_up_to(200000, segment_odds=1000)
    b = primes_up_to(200000)
    assert np.array_equal(a, b)


def test_primes_in_range_half_open():
    assert primes_in_range(7, 13).tolist() == [11, 13]
    assert primes_in_range(0, 2).tolist() == [2]
    assert primes_in_range(14, 16).tolist() == []


def test_tally_examples():
    t = sieve_tally(10, 3)
    assert t.theta(1) == pytest.approx(math.log(7), abs=1e-15)
    assert t.theta(2) == pytest.approx(math.log(10), abs=1e-15)
    t5 = sieve_tally(2, 5)
    assert t5.theta(2) == pytest.approx(math.log(2))
    assert t5.theta(1) == t5.theta(3) == t5.theta(4) == 0


def test_chebyshev_bias_mod4():
    t = sieve_tally(10**6, 4)
    assert t.theta(3) - t.theta(1) > 0
    ref = naive_theta(10**5, 4)
    t5 = sieve_tally(10**5, 4)
    assert t5.theta(3) - t5.theta(1) == pytest.approx(ref[3] - ref[1], abs=1e-8)


def test_capacity_error():
    with pytest.raises(CapacityError):
        sieve_tally(SIEVE_CEILING * 10, 3)


def test_workers_do_not_change_results():
    a = sieve_tallies(300000, [3, 8, 11], workers=1, segment_odds=10000)
    b = sieve_tallies(300000, [3, 8, 11], workers=3, segment_odds=10000)
    for q in a:
        assert np.array_equal(a[q].theta_by_residue, b[q].theta_by_residue)
        assert np.array_equal(a[q].psi_by_residue, b[q].psi_by_residue)


def test_character_sum_examples():
    from apvariance.characters import principal

    chi0 = principal(3)
    assert character_sum(chi0, sieve_tally(10, 3)).theta == pytest.approx(math.log(70))
    th = character_sum(chi_m4(), sieve_tally(10, 4)).theta
    assert th == pytest.approx(math.log(5) - math.log(3) - math.log(7))


def test_character_sum_modulus_mismatch():
    with pytest.raises(ValueError):
        character_sum(chi_m4(), sieve_tally(10, 3))


@pytest.mark.parametrize("q", [3, 8, 12, 25, 30])
def test_psi_minus_theta_is_prime_power_sum(q):
    x = 10**6
    t = sieve_tally(x, q)
    for chi in character_group(q):
        cs = character_sum(chi, t)
        pp = prime_power_part(chi, x)
        assert abs((cs.psi - cs.theta) - pp) <= 1e-12 * max(1.0, abs(pp)) + 1e-12 * abs(cs.theta)


def test_conjugation_of_character_sums():
    t = sieve_tally(10**5, 13)
    for chi in character_group(13):
        a = character_sum(chi, t)
        b = character_sum(chi.conj(), t)
        assert abs(a.theta - b.theta.conjugate()) < 1e-12 * max(1, abs(a.theta))
        assert abs(a.psi - b.psi.conjugate()) < 1e-12 * max(1, abs(a.psi))


def test_imprimitive_correction_mod8():
    chi8 = [c for c in character_group(8) if c.conductor == 4][0]
    corr = imprimitive_correction(chi8, 100)
    assert corr == 0  # chi_-4(2^k) = 0
    chi12 = [c for c in character_group(12) if c.conductor == 3][0]
    assert imprimitive_correction(chi12, 100) == pytest.approx(-sum(math.log(3) for k in range(1, 5)) * 0 + sum(chi12.primitive()(3**k) * math.log(3) for k in range(1, 5)))


def test_imprimitive_correction_primitive_is_empty():
    chi = character_from_values(5, {2: 1j})
    x = 1000
    direct = character_sum(chi, sieve_tally(x, 5)).psi
    assert psi_from_primitive(chi, x) == pytest.approx(direct)


def test_mod15_from_mod5_matches_direct():
    chi5 = character_from_values(5, {2: 1j})
    chi15 = [c for c in character_group(15) if c.conductor == 5 and c.primitive() == chi5][0]
    x = 10**4
    direct = character_sum(chi15, sieve_tally(x, 15)).psi
    via = psi_from_primitive(chi15, x)
    assert abs(direct - via) < 1e-9


def test_prime_powers():
    pp = prime_powers_up_to(30)
    assert [v for v, _, _ in pp] == [4, 8, 9, 16, 25, 27]


def test_step_trajectory_small():
    pts, vals = step_trajectory(chi_m4(), 10, prime_powers=False)
    assert pts.tolist() == [3, 5, 7]
    assert vals[-1].real == pytest.approx(math.log(5) - math.log(21))


def test_tally_roundtrip(tmp_path):
    t = sieve_tally(10**4, 7)
    write_tally(t, tmp_path / "t.bin")
    r = read_tally(tmp_path / "t.bin")
    assert r.q == 7 and r.x == t.x
    assert np.array_equal(r.theta_by_residue, t.theta_by_residue)
    cache = TallyCache(tmp_path / "cache")
    a = cache.get(10**4, 7)
    b = cache.get(10**4, 7)
    assert np.array_equal(a.psi_by_residue, b.psi_by_residue)


def test_corrupt_tally_rejected(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"XXXX" + bytes(40))
    with pytest.raises(ValueError):
        read_tally(p)
