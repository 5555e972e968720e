"""Simultaneous Diophantine approximation by pigeonhole, and phase reduction.

Fractional parts frac(n lambda) are tracked as unsigned 64-bit fixed point:
lambda is stored as L = floor(frac(lambda) 2^64), and n L mod 2^64 wraps
exactly in numpy uint64 arithmetic.  The fixed-point value differs from the
true frac(n lambda) by less than n 2^-64 plus n times the representation
error of lambda; candidates that land within that margin of the tolerance are
rechecked in multiprecision.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath as mp
import numpy as np
from sympy import integer_nthroot

from .lfunc import PrecisionError

log = logging.getLogger(__name__)

TWO64 = 1 << 64
BRUTE_LIMIT = 10**8
MEMORY_BITS = 28  # dense cube table of at most 2^28 counters
CHUNK = 1 << 18
DEDUP_RESOLUTION = 1e-12


class MemoryBudgetError(RuntimeError):
    pass


class SyncMiss(RuntimeError):
    def __init__(self, message: str, details: dict):
        super().__init__(message)
        self.details = details


def _to_mpf(x):
    if isinstance(x, Fraction):
        return mp.mpf(x.numerator) / x.denominator
    return mp.mpf(x)


def _digits_of(x) -> int:
    if isinstance(x, Fraction):
        return 10**6  # exact
    if isinstance(x, float):
        return 15
    return int(mp.mp.dps)


@dataclass
class SyncProblem:
    lambdas: list  # mpf, Fraction, float or str
    M: int
    N: int
    tol: Fraction | float | None = None  # defaults to 1/M
    digits: int | None = None  # precision of the lambdas, if known

    def __post_init__(self):
        if self.M < 2 or self.N < 1 or not self.lambdas:
            raise ValueError("need M >= 2, N >= 1 and at least one frequency")
        self.lambdas = dedupe(self.lambdas)
        if self.tol is None:
            self.tol = Fraction(1, self.M)

    @property
    def k(self) -> int:
        return len(self.lambdas)

    @property
    def tol_mp(self):
        return _to_mpf(self.tol)

    @property
    def cells(self) -> int:
        """Cubes per axis: the largest m with 1/m not exceeding the tolerance."""
        return max(2, math.ceil(1 / Fraction(self.tol) if isinstance(self.tol, Fraction) else 1 / self.tol - 1e-12))

    def count_lower_bound(self) -> float:
        return self.N / float(self.cells) ** self.k - 1


@dataclass
class SyncResult:
    hits: list[int]
    count_lower_bound: float
    method: str
    max_fractional_error: float
    complete: bool = False
    details: dict = field(default_factory=dict)


def dedupe(lambdas) -> list:
    """Drop frequencies within 1e-12 of an earlier one (mod 1)."""
    out, seen = [], []
    for lam in lambdas:
        v = float(_to_mpf(lam) % 1) if not isinstance(lam, Fraction) else float(lam % 1)
        if any(min(abs(v - s), 1 - abs(v - s)) < DEDUP_RESOLUTION for s in seen):
            continue
        seen.append(v)
        out.append(lam)
    return out


def _fixed_point(lam) -> int:
    if isinstance(lam, Fraction):
        fr = lam % 1
        return (fr.numerator * TWO64) // fr.denominator
    with mp.workdps(60):
        fr = mp.frac(_to_mpf(lam))
        return int(mp.floor(fr * TWO64))


def _lambda_error(problem: SyncProblem) -> float:
    """Bound on |lambda - L/2^64| including the stored precision of lambda."""
    rep = 2.0**-64
    digits = problem.digits
    if digits is None:
        digits = min(_digits_of(lam) for lam in problem.lambdas)
    return rep + 10.0 ** (-digits) * max(1.0, max(abs(float(_to_mpf(l))) for l in problem.lambdas))


def distance_exact(n: int, lam, dps: int | None = None):
    """||n lambda|| (distance to the nearest integer), multiprecision or exact."""
    if isinstance(lam, Fraction):
        fr = (n * lam) % 1
        return min(fr, 1 - fr)
    dps = dps or len(str(abs(n))) + 40
    with mp.workdps(dps):
        x = n * _to_mpf(lam)
        fr = x - mp.floor(x)
        return min(fr, 1 - fr)


def within(n: int, lam, tol) -> bool:
    d = distance_exact(n, lam)
    if isinstance(d, Fraction) and isinstance(tol, (Fraction, int)):
        return d <= tol
    return _to_mpf(d) <= _to_mpf(tol)


def _dist_u64(u: np.ndarray) -> np.ndarray:
    return np.minimum(u, np.uint64(0) - u)


def _scan_chunk(problem: SyncProblem, Ls: np.ndarray, start: int, stop: int, lam_err: float):
    """Hits in [start, stop) by fixed-point test, with multiprecision recheck near the edge."""
    n = np.arange(start, stop, dtype=np.uint64)
    tol = float(problem.tol)
    tol_u = tol * TWO64
    margin = (float(stop) * lam_err + 2.0**-60) * TWO64
    sure = np.ones(len(n), dtype=bool)
    maybe = np.ones(len(n), dtype=bool)
    with np.errstate(over="ignore"):
        for L in Ls:
            d = _dist_u64(n * L).astype(np.float64)
            sure &= d <= tol_u - margin
            maybe &= d <= tol_u + margin
    hits = n[sure].astype(np.int64).tolist()
    border = n[maybe & ~sure].astype(np.int64).tolist()
    for m in border:
        if all(within(m, lam, problem.tol) for lam in problem.lambdas):
            hits.append(m)
    return sorted(hits)


def _max_error(problem: SyncProblem, hits, sample: int = 2000) -> float:
    worst = 0.0
    for m in hits[:sample]:
        for lam in problem.lambdas:
            worst = max(worst, float(distance_exact(m, lam)))
    return worst


def sync_brute(problem: SyncProblem, start: int = 1, stop_at_first: bool = False) -> SyncResult:
    """Every n in [start, N] with ||n lambda|| <= tol for all lambda."""
    if problem.N > BRUTE_LIMIT // problem.k:
        raise ValueError(f"N={problem.N} too large for exhaustive search (limit {BRUTE_LIMIT // problem.k})")
    Ls = np.array([_fixed_point(l) for l in problem.lambdas], dtype=np.uint64)
    lam_err = _lambda_error(problem)
    hits: list[int] = []
    for lo in range(start, problem.N + 1, CHUNK):
        hi = min(lo + CHUNK, problem.N + 1)
        found = _scan_chunk(problem, Ls, lo, hi, lam_err)
        hits.extend(found)
        if stop_at_first and hits:
            break
    return SyncResult(hits, problem.count_lower_bound(), "brute", _max_error(problem, hits), complete=not stop_at_first)


def _cube_indices(u: np.ndarray, m: int) -> np.ndarray:
    """floor(u m / 2^64) exactly, for uint64 u and m < 2^31 (half-open cubes)."""
    hi = u >> np.uint64(32)
    lo = u & np.uint64(0xFFFFFFFF)
    mm = np.uint64(m)
    return (hi * mm + ((lo * mm) >> np.uint64(32))) >> np.uint64(32)


def sync_bucket(problem: SyncProblem, memory_bits: int = MEMORY_BITS) -> SyncResult:
    """The pigeonhole argument, literally.

    Multiples n v (1 <= n <= N) are placed in the m^k half-open cubes of side
    1/m, m = ceil(1/tol); the fullest cube holds s >= N/m^k of them, and the
    differences m_j - m_1 are emitted after verification.
    """
    m = problem.cells
    k = problem.k
    if k * math.log2(m) > memory_bits:
        raise MemoryBudgetError(
            f"{m}^{k} cubes exceed the 2^{memory_bits} memory budget; use sync_stream"
        )
    Ls = np.array([_fixed_point(l) for l in problem.lambdas], dtype=np.uint64)
    counts = np.zeros(m**k, dtype=np.int64)
    ids_all = []
    for lo in range(1, problem.N + 1, CHUNK):
        n = np.arange(lo, min(lo + CHUNK, problem.N + 1), dtype=np.uint64)
        cid = np.zeros(len(n), dtype=np.int64)
        with np.errstate(over="ignore"):
            for L in Ls:
                cid = cid * m + _cube_indices(n * L, m).astype(np.int64)
        counts += np.bincount(cid, minlength=m**k)
        ids_all.append(cid)
    ids = np.concatenate(ids_all)
    best = int(np.argmax(counts))
    members = (np.flatnonzero(ids == best) + 1).tolist()
    candidates = [b - members[0] for b in members[1:]]
    hits = verify(problem, candidates)
    rejected = len(candidates) - len(hits)
    details = {"cube": best, "cube_population": len(members), "cells_per_axis": m, "rejected": rejected}
    return SyncResult(hits, problem.count_lower_bound(), "bucket", _max_error(problem, hits), details=details)


def sync_stream(problem: SyncProblem, start: int = 1, floor: int | None = None, limit_hits: int | None = None, seed: int = 0) -> SyncResult:
    """Difference method with hashed cube ids, for large k log m.

    The first visitor of each cube is remembered; every later visitor n
    proposes n - first, which is verified before being reported.  Hash
    collisions only cost a rejected candidate.
    """
    m = problem.cells
    rng = np.random.default_rng(seed)
    mult = rng.integers(1, 2**63, size=problem.k, dtype=np.uint64) | np.uint64(1)
    Ls = np.array([_fixed_point(l) for l in problem.lambdas], dtype=np.uint64)
    first: dict[int, int] = {}
    found: set[int] = set()
    proposed = 0
    for lo in range(start, problem.N + 1, CHUNK):
        n = np.arange(lo, min(lo + CHUNK, problem.N + 1), dtype=np.uint64)
        h = np.zeros(len(n), dtype=np.uint64)
        with np.errstate(over="ignore"):
            for L, a in zip(Ls, mult):
                c = _cube_indices(n * L, m)
                h = (h ^ (c * a)) * np.uint64(0x9E3779B97F4A7C15)
        for nn, hh in zip(n.tolist(), h.tolist()):
            base = first.setdefault(hh, nn)
            if base != nn:
                d = nn - base
                if floor is None or d >= floor:
                    proposed += 1
                    found.add(d)
        if limit_hits is not None and len(found) >= limit_hits * 4:
            break
    hits = verify(problem, sorted(found))
    if limit_hits is not None:
        hits = hits[:limit_hits]
    details = {"cells_per_axis": m, "proposed": proposed, "cubes_seen": len(first)}
    return SyncResult(hits, problem.count_lower_bound(), "difference", _max_error(problem, hits), details=details)


def verify(problem: SyncProblem, candidates) -> list[int]:
    """Candidates n >= 1 that satisfy every ||n lambda|| <= tol, checked in multiprecision."""
    out = []
    for n in candidates:
        if n >= 1 and all(within(n, lam, problem.tol) for lam in problem.lambdas):
            out.append(int(n))
    return sorted(set(out))


def default_floor(N: int) -> int:
    root, exact = integer_nthroot(int(N), 3)
    return int(root) if exact else int(root) + 1


def sync_lowest_in_range(problem: SyncProblem, floor: int | None = None) -> int:
    """Smallest hit n with floor <= n <= N (floor defaults to ceil(N^(1/3)))."""
    floor = default_floor(problem.N) if floor is None else int(floor)
    bound = problem.count_lower_bound()
    if problem.N <= BRUTE_LIMIT // problem.k:
        res = sync_brute(problem, start=max(1, floor), stop_at_first=True)
        method = "brute"
    else:
        res = sync_stream(problem, floor=floor, limit_hits=1)
        method = "difference"
    hits = [n for n in res.hits if n >= floor]
    if not hits:
        raise SyncMiss(
            f"no n in [{floor}, {problem.N}] synchronizes all {problem.k} frequencies",
            {"floor": floor, "N": problem.N, "count_lower_bound": bound, "guaranteed": bound >= 2, "method": method},
        )
    return min(hits)


# ---------------------------------------------------------------------------
# phase reduction


def _gamma_digits(gamma, gamma_digits):
    if gamma_digits is not None:
        return gamma_digits
    digits = getattr(gamma, "precision_digits", None)
    if digits is not None:
        return digits
    if isinstance(gamma, (Fraction, int)):
        return None
    if isinstance(gamma, str):
        return len(gamma.replace("-", "").replace(".", "").lstrip("0"))
    if isinstance(gamma, float):
        return 15
    return int(mp.mp.dps)


def reduce_phase(y: Fraction | int, gamma, gamma_digits: int | None = None) -> float:
    """(y gamma) mod 2 pi for exact rational y, with absolute error below 1e-10."""
    y = Fraction(y)
    g = getattr(gamma, "gamma", gamma)
    digits = _gamma_digits(gamma, gamma_digits)
    ydigits = len(str(abs(y.numerator // y.denominator))) if y else 1
    if digits is not None and digits < ydigits + 15:
        raise PrecisionError(
            f"phase reduction at y ~ 10^{ydigits} needs gamma to {ydigits + 15} digits, have {digits}"
        )
    work = ydigits + (digits if digits is not None else 0) + 30
    with mp.workdps(max(work, 40)):
        if isinstance(g, (Fraction, int)):
            prod = y * Fraction(g)
            x = mp.mpf(prod.numerator) / prod.denominator
        else:
            x = (mp.mpf(y.numerator) / y.denominator) * mp.mpf(g)
        r = x - 2 * mp.pi * mp.floor(x / (2 * mp.pi))
        return float(r)


def phase_reduce(n: int, gamma, delta: Fraction, gamma_digits: int | None = None) -> float:
    """(n delta gamma) mod 2 pi in [0, 2 pi), delta an exact rational."""
    return reduce_phase(Fraction(n) * Fraction(delta), gamma, gamma_digits)


def _split(a: float) -> tuple[float, float]:
    c = 134217729.0 * a  # 2^27 + 1
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a: float, b: float) -> tuple[float, float]:
    """Dekker product: a b = p + e exactly."""
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def phase_reduce_double(n: int, gamma: float, delta: float) -> float:
    """Compensated double-precision reduction, used to cross-check small n."""
    x, ex = _two_prod(float(n), delta)
    p, ep = _two_prod(x, gamma)
    err = ep + ex * gamma
    two_pi_hi = 6.283185307179586
    two_pi_lo = 2.4492935982947064e-16
    k = math.floor(p / two_pi_hi)
    kh, kl = _two_prod(float(k), two_pi_hi)
    r = ((p - kh) - kl) - k * two_pi_lo + err
    return r % two_pi_hi


def frequencies(gammas, delta: Fraction, dps: int = 40) -> list:
    """lambda = delta gamma / 2 pi for each ordinate."""
    with mp.workdps(dps):
        d = mp.mpf(delta.numerator) / delta.denominator
        return [d * mp.mpf(g) / (2 * mp.pi) for g in gammas]
