"""Segmented sieving and exact prime tallies in residue classes.

theta(x; q, a) = sum_{p <= x, p = a mod q} log p and psi(x; q, a) (von Mangoldt
weights) are accumulated per residue with math.fsum inside each segment, then
merged across segments in segment order, so results do not depend on the
number of workers.  Sums at real x use n <= floor(x).
"""

from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .characters import DirichletCharacter, factorize

SIEVE_CEILING = 10**9
SIEVE_VERSION = 1
SEGMENT_ODDS = 1 << 20


class CapacityError(ValueError):
    """Requested x lies beyond the configured sieve ceiling."""


def simple_sieve(limit: int) -> np.ndarray:
    if limit < 2:
        return np.zeros(0, dtype=np.int64)
    flags = np.ones(limit + 1, dtype=bool)
    flags[:2] = False
    flags[4::2] = False
    for p in range(3, math.isqrt(limit) + 1, 2):
        if flags[p]:
            flags[p * p :: 2 * p] = False
    return np.flatnonzero(flags).astype(np.int64)


def _segment_primes(low: int, high: int, base: np.ndarray) -> np.ndarray:
    """Odd primes in [low, high) for odd low, given base primes up to sqrt(high)."""
    count = (high - low + 1) // 2
    mask = np.ones(count, dtype=bool)
    for p in base[1:]:
        p = int(p)
        if p * p >= high:
            break
        start = max(p * p, (low + p - 1) // p * p)
        if start % 2 == 0:
            start += p
        if start < high:
            mask[(start - low) // 2 :: p] = False
    out = low + 2 * np.flatnonzero(mask).astype(np.int64)
    return out[out < high]


def segments(x: int, segment_odds: int = SEGMENT_ODDS):
    span = 2 * segment_odds
    low = 3
    while low <= x:
        yield low, min(low + span, x + 1)
        low += span


def primes_up_to(x, segment_odds: int = SEGMENT_ODDS) -> np.ndarray:
    """All primes p <= x as int64, via the segmented sieve."""
    n = _check_x(x)
    if n < 2:
        return np.zeros(0, dtype=np.int64)
    base = simple_sieve(math.isqrt(n) + 1)
    parts = [np.array([2], dtype=np.int64)]
    parts += [_segment_primes(lo, hi, base) for lo, hi in segments(n, segment_odds)]
    return np.concatenate(parts)


@lru_cache(maxsize=4)
def _cached_primes(n: int) -> np.ndarray:
    arr = primes_up_to(n)
    arr.setflags(write=False)
    return arr


def primes_in_range(lo: float, hi: float) -> np.ndarray:
    """Primes p with lo < p <= hi."""
    a, b = math.floor(lo), _check_x(hi)
    if b < 2 or b <= a:
        return np.zeros(0, dtype=np.int64)
    base = simple_sieve(math.isqrt(b) + 1)
    start = max(3, a + 1) | 1
    odd = _segment_primes(start, b + 1, base) if start <= b else np.zeros(0, dtype=np.int64)
    if a < 2 <= b:
        odd = np.concatenate([[2], odd]).astype(np.int64)
    return odd[odd > lo]


def prime_powers_up_to(x) -> list[tuple[int, int, int]]:
    """(p^k, p, k) for all prime powers p^k <= x with k >= 2, sorted by p^k."""
    n = _check_x(x)
    out = []
    for p in simple_sieve(math.isqrt(n)).tolist():
        pk, k = p * p, 2
        while pk <= n:
            out.append((pk, p, k))
            pk *= p
            k += 1
    out.sort()
    return out


def _check_x(x) -> int:
    if x > SIEVE_CEILING:
        raise CapacityError(f"x={x} exceeds the sieve ceiling {SIEVE_CEILING}; use zero-side evaluation")
    return math.floor(x)


def _residue_fsums(values: np.ndarray, weights: np.ndarray, q: int) -> list[float]:
    """Per-residue math.fsum of weights, grouped by values mod q."""
    out = [0.0] * q
    if len(values) == 0:
        return out
    r = values % q
    order = np.argsort(r, kind="stable")
    r_sorted = r[order]
    w_sorted = weights[order]
    cuts = np.flatnonzero(np.diff(r_sorted)) + 1
    starts = np.concatenate([[0], cuts])
    ends = np.concatenate([cuts, [len(r_sorted)]])
    for s, e in zip(starts.tolist(), ends.tolist()):
        out[int(r_sorted[s])] = math.fsum(w_sorted[s:e].tolist())
    return out


@dataclass(frozen=True)
class PrimeTally:
    x: float
    q: int
    theta_by_residue: np.ndarray  # index a in 0..q-1; zero when gcd(a, q) > 1
    psi_by_residue: np.ndarray

    @property
    def units(self) -> list[int]:
        return [a for a in range(self.q) if math.gcd(a, self.q) == 1]

    def theta(self, a: int) -> float:
        return float(self.theta_by_residue[a % self.q])

    def psi(self, a: int) -> float:
        return float(self.psi_by_residue[a % self.q])

    @property
    def prime_power_by_residue(self) -> np.ndarray:
        return self.psi_by_residue - self.theta_by_residue


def sieve_tallies(x, moduli, workers: int = 1, segment_odds: int = SEGMENT_ODDS) -> dict[int, PrimeTally]:
    """PrimeTally for every q in ``moduli`` from a single sieve pass up to x."""
    n = _check_x(x)
    moduli = sorted(set(int(q) for q in moduli))
    if any(q < 1 for q in moduli):
        raise ValueError("moduli must be positive")
    if n < 2:
        zero = {q: np.zeros(q) for q in moduli}
        return {q: PrimeTally(float(x), q, zero[q], zero[q].copy()) for q in moduli}
    base = simple_sieve(math.isqrt(n) + 1)

    def work(seg):
        lo, hi = seg
        ps = _segment_primes(lo, hi, base)
        logs = np.log(ps.astype(float))
        return {q: _residue_fsums(ps, logs, q) for q in moduli}

    segs = list(segments(n, segment_odds))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            partials = list(pool.map(work, segs))  # order preserved
    else:
        partials = [work(s) for s in segs]
    two = {q: [0.0] * q for q in moduli}
    for q in moduli:
        two[q][2 % q] = math.log(2)
    pp = prime_powers_up_to(n)
    pp_vals = np.array([v for v, _, _ in pp], dtype=np.int64)
    pp_logs = np.array([math.log(p) for _, p, _ in pp])

    out = {}
    for q in moduli:
        theta = np.array([math.fsum([two[q][a]] + [part[q][a] for part in partials]) for a in range(q)])
        extra = np.array(_residue_fsums(pp_vals, pp_logs, q))
        coprime = np.array([math.gcd(a, q) == 1 for a in range(q)])
        theta = np.where(coprime, theta, 0.0)
        psi = theta + np.where(coprime, extra, 0.0)
        out[q] = PrimeTally(float(x), q, theta, psi)
    return out


def sieve_tally(x, q: int, workers: int = 1) -> PrimeTally:
    if x < 0:
        raise ValueError("x must be nonnegative")
    return sieve_tallies(x, [q], workers)[q]


# ---------------------------------------------------------------------------
# character sums


@dataclass(frozen=True)
class CharacterSum:
    chi: DirichletCharacter
    x: float
    theta: complex
    psi: complex


def _csum(values: np.ndarray, weights: np.ndarray) -> complex:
    prod = values * weights
    return complex(math.fsum(prod.real.tolist()), math.fsum(prod.imag.tolist()))


def character_sum(chi: DirichletCharacter, tally: PrimeTally) -> CharacterSum:
    if tally.q != chi.modulus:
        raise ValueError(f"tally modulus {tally.q} does not match character modulus {chi.modulus}")
    vals = chi.values
    theta = _csum(vals, tally.theta_by_residue)
    psi = theta + _csum(vals, tally.prime_power_by_residue)
    return CharacterSum(chi, tally.x, theta, psi)


def prime_power_part(chi: DirichletCharacter, x) -> complex:
    """sum over p^k <= x with k >= 2 of chi(p^k) log p, by direct enumeration."""
    q = chi.modulus
    terms = [chi.values[pk % q] * math.log(p) for pk, p, _ in prime_powers_up_to(x)]
    arr = np.array(terms, dtype=complex)
    return complex(math.fsum(arr.real.tolist()), math.fsum(arr.imag.tolist()))


def psi_theta_budget(x) -> float:
    """sum over p^k <= x with k >= 2 of log p; bounds |psi(x, chi) - theta(x, chi)|."""
    return math.fsum(math.log(p) for _, p, _ in prime_powers_up_to(x))


def imprimitive_correction(chi: DirichletCharacter, x) -> complex:
    """sum over p | q, p^k <= x of chi*(p^k) log p, with chi* inducing chi."""
    prim = chi.primitive()
    n = _check_x(x)
    terms = []
    for p, _ in factorize(chi.modulus):
        pk = p
        while pk <= n:
            terms.append(prim(pk) * math.log(p))
            pk *= p
    return complex(math.fsum(t.real for t in terms), math.fsum(t.imag for t in terms))


def psi_from_primitive(chi: DirichletCharacter, x, primitive_psi: complex | None = None) -> complex:
    """psi(x, chi) = psi(x, chi*) - sum_{p | q} sum_{p^k <= x} chi*(p^k) log p."""
    prim = chi.primitive()
    if primitive_psi is None:
        primitive_psi = character_sum(prim, sieve_tally(x, prim.modulus)).psi
    return primitive_psi - imprimitive_correction(chi, x)


def step_trajectory(chi: DirichletCharacter, x, prime_powers: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Jump points n <= x and the value of psi(n, chi) (or theta) just after each jump."""
    n = _check_x(x)
    ps = _cached_primes(n) if n <= 10**8 else primes_up_to(n)
    points = ps
    weights = np.log(ps.astype(float))
    if prime_powers:
        pp = prime_powers_up_to(n)
        if pp:
            points = np.concatenate([points, np.array([v for v, _, _ in pp], dtype=np.int64)])
            weights = np.concatenate([weights, np.array([math.log(p) for _, p, _ in pp])])
    order = np.argsort(points, kind="stable")
    points, weights = points[order], weights[order]
    jumps = chi.values[points % chi.modulus] * weights
    live = jumps != 0
    return points[live], np.cumsum(jumps[live])


# ---------------------------------------------------------------------------
# binary tally cache
#
# little-endian: magic b"APVT", u32 format version, u32 sieve version,
# u64 q, f64 x, then q f64 theta values, then q f64 psi values.

_MAGIC = b"APVT"
_FORMAT = 1
_HEAD = struct.Struct("<4sIIQd")


def write_tally(tally: PrimeTally, path) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_HEAD.pack(_MAGIC, _FORMAT, SIEVE_VERSION, tally.q, tally.x))
        fh.write(np.asarray(tally.theta_by_residue, dtype="<f8").tobytes())
        fh.write(np.asarray(tally.psi_by_residue, dtype="<f8").tobytes())
    tmp.replace(path)


def read_tally(path) -> PrimeTally:
    data = Path(path).read_bytes()
    magic, fmt, version, q, x = _HEAD.unpack_from(data)
    if magic != _MAGIC or fmt != _FORMAT:
        raise ValueError(f"{path}: not a tally cache file")
    if version != SIEVE_VERSION:
        raise ValueError(f"{path}: sieve version {version}, expected {SIEVE_VERSION}")
    body = np.frombuffer(data, dtype="<f8", offset=_HEAD.size)
    if len(body) != 2 * q:
        raise ValueError(f"{path}: truncated tally cache")
    return PrimeTally(x, q, body[:q].astype(float), body[q:].astype(float))


class TallyCache:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def path(self, x, q: int) -> Path:
        return self.root / f"tally_v{SIEVE_VERSION}_q{q}_x{_check_x(x)}.bin"

    def get(self, x, q: int) -> PrimeTally:
        p = self.path(x, q)
        if p.exists():
            return read_tally(p)
        tally = sieve_tally(x, q)
        write_tally(tally, p)
        return tally
