import math
import random
from fractions import Fraction

import mpmath as mp
import pytest

from apvariance.lfunc import PrecisionError
from apvariance.sync import (
    MemoryBudgetError,
    SyncMiss,
    SyncProblem,
    default_floor,
    distance_exact,
    frequencies,
    phase_reduce,
    phase_reduce_double,
    reduce_phase,
    sync_brute,
    sync_bucket,
    sync_lowest_in_range,
    sync_stream,
    verify,
)

G1 = "6.020948904697596"  # chi_-4
G2 = "10.24377030416028"


def test_one_third():
    p = SyncProblem([Fraction(1, 3)], 4, 10)
    hits = sync_brute(p).hits
    assert {3, 6, 9} <= set(hits)
    assert len(hits) >= math.ceil(10 / 4) - 1


def test_golden_ratio_fibonacci():
    with mp.workdps(40):
        lam = (mp.sqrt(5) - 1) / 2
    p = SyncProblem([lam], 10, 200, digits=40)
    hits = sync_brute(p).hits
    assert 144 in hits
    oracle = [n for n in range(1, 201) if distance_exact(n, lam) <= mp.mpf(1) / 10]
    assert hits == oracle


def test_half():
    assert sync_brute(SyncProblem([Fraction(1, 2)], 3, 10)).hits == [2, 4, 6, 8, 10]


def test_chi_m4_zero_frequencies():
    lams = frequencies([mp.mpf(G1), mp.mpf(G2)], Fraction(1, 2))
    p = SyncProblem(lams, 6, 36 * 40, digits=15)
    b = sync_brute(p)
    assert b.hits
    assert verify(p, b.hits) == b.hits
    oracle = [n for n in range(1, p.N + 1) if all(distance_exact(n, l) <= mp.mpf(1) / 6 for l in lams)]
    assert b.hits == oracle


def test_bucket_subset_of_brute_small_N():
    rng = random.Random(7)
    for _ in range(30):
        k = rng.randint(1, 3)
        M = rng.randint(2, 6)
        N = rng.randint(1, 10**4 // M)
        p = SyncProblem([Fraction(rng.randint(0, 999), 1000) + Fraction(1, 7919) for _ in range(k)], M, N)
        assert set(sync_bucket(p).hits) <= set(sync_brute(p).hits)


def test_random_three_frequency_count():
    rng = random.Random(11)
    for _ in range(10):
        M = rng.randint(2, 5)
        p = SyncProblem([mp.mpf(rng.random()) for _ in range(3)], M, 20 * M**3)
        assert len(sync_brute(p).hits) >= p.N / M ** p.k - 1


def test_stream_hits_are_sound():
    rng = random.Random(3)
    p = SyncProblem([mp.mpf(rng.random()) for _ in range(3)], 5, 5**3 * 20)
    s = sync_stream(p)
    brute = set(sync_brute(p).hits)
    assert s.hits and set(s.hits) <= brute


def test_memory_budget():
    p = SyncProblem([mp.mpf(0.1) * i + mp.mpf("0.0123") for i in range(1, 6)], 200, 10)
    with pytest.raises(MemoryBudgetError, match="sync_stream"):
        sync_bucket(p)


def test_N_too_large():
    with pytest.raises(ValueError, match="too large"):
        sync_brute(SyncProblem([mp.mpf("0.1234")], 4, 10**12))


def test_lowest_in_range():
    assert sync_lowest_in_range(SyncProblem([Fraction(1, 3)], 4, 27), 3) == 3
    assert default_floor(27) == 3 and default_floor(28) == 4


def test_lowest_in_range_miss():
    p = SyncProblem([Fraction(1, 2) + Fraction(1, 10**6)], 10, 1)
    with pytest.raises(SyncMiss) as exc:
        sync_lowest_in_range(p, 1)
    assert exc.value.details["guaranteed"] is False


def test_tolerance_parameter():
    p = SyncProblem([Fraction(1, 3)], 4, 10, tol=Fraction(1, 20))
    assert sync_brute(p).hits == [3, 6, 9]
    assert p.cells == 20


def test_phase_n_one():
    g = 6.020948904697596
    assert abs(phase_reduce(1, mp.mpf(G1), Fraction(1, 2), 16) - (0.5 * g) % (2 * math.pi)) < 1e-12


def test_phase_large_n_stable():
    with mp.workdps(60):
        g40 = mp.mpf("6.020948904697596654902511521612085868864")  # chi_-4, 40 digits
    n = 10**20
    a = phase_reduce(n, g40, Fraction(1, 2), 40)
    with mp.workdps(80):
        x = n * g40 / 2
        ref = float(x - 2 * mp.pi * mp.floor(x / (2 * mp.pi)))
    assert abs(a - ref) <= 1e-10


def test_phase_rational_gamma():
    n = 10**25 + 3
    got = phase_reduce(n, Fraction(22, 7), Fraction(1, 10))
    with mp.workdps(80):
        x = mp.mpf(n) * 22 / 70
        ref = float(x - 2 * mp.pi * mp.floor(x / (2 * mp.pi)))
    assert abs(got - ref) < 1e-12


def test_phase_precision_contract():
    with pytest.raises(PrecisionError, match="digits"):
        phase_reduce(10**20, mp.mpf(G1), Fraction(1, 2), 16)


def test_phase_double_agrees_for_small_n():
    rng = random.Random(5)
    for _ in range(50):
        n = rng.randint(1, 10**6)
        g = rng.uniform(1, 200)
        a = phase_reduce(n, g, Fraction(1, 4), 40)
        b = phase_reduce_double(n, g, 0.25)
        d = abs(a - b)
        assert min(d, 2 * math.pi - d) < 1e-9


def test_reduce_phase_fraction_y():
    y = Fraction(6971, 5)
    with mp.workdps(50):
        g = mp.mpf("6.18357819545085391437751731")
        ref = float((y.numerator * g / y.denominator) % (2 * mp.pi))
    assert abs(reduce_phase(y, g, 27) - ref) < 1e-12
