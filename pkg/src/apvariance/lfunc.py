"""Dirichlet L-functions by Euler-Maclaurin summation of Hurwitz zeta sums.

For a character chi mod q,

    L(s, chi) = q^-s sum_{a=1}^{q} chi(a) zeta(s, a/q).

Writing W_a = N q + a, the Hurwitz sums collapse to a plain Dirichlet series
over m <= N q plus, per residue a, the Euler-Maclaurin tail

    W^(1-s) / (q (s-1)) + W^-s / 2
        + sum_k B_2k / (2k)! (s)_(2k-1) q^(2k-1) W^(-s-2k+1).

The tail is cut once the Rademacher bound |next term| |s+2K+1| / (sigma+2K+1)
falls below the requested tolerance.  Two engines share this: a vectorized
double-precision one used for grid scans, and an mpmath one for refinement.
"""

from __future__ import annotations

import logging
import math
from functools import lru_cache

import mpmath as mp
import numpy as np
from scipy.special import loggamma

from .characters import DirichletCharacter

log = logging.getLogger(__name__)

HEIGHT_CEILING = 400.0


class PrecisionError(RuntimeError):
    """Requested accuracy could not be reached within the configured limits."""


@lru_cache(maxsize=64)
def _bernoulli_coeffs_mp(prec: int, K: int = 400) -> tuple:
    with mp.workprec(prec):
        return tuple(mp.bernoulli(2 * k) / mp.factorial(2 * k) for k in range(1, K + 1))


@lru_cache(maxsize=None)
def _bernoulli_coeffs_float(K: int) -> np.ndarray:
    return np.array([float(mp.bernoulli(2 * k) / mp.factorial(2 * k)) for k in range(1, K + 1)])


def _em_shift(t_abs: float, terms: int) -> int:
    # keeps (|s| + 2K) / (2 pi N) <= 0.3 so the Bernoulli tail contracts fast
    return max(8, math.ceil((t_abs + 2 * terms + 1) / (2 * math.pi * 0.3)))


# ---------------------------------------------------------------------------
# double precision, vectorized over s


def dirichlet_L_array(chi: DirichletCharacter, s, terms: int = 12, chunk: int = 512) -> np.ndarray:
    """L(s, chi) for an array of complex s (double precision, |Im s| <= ceiling)."""
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    out = np.empty_like(s)
    order = np.argsort(np.abs(s.imag))
    for start in range(0, len(s), chunk):
        idx = order[start : start + chunk]
        out[idx] = _L_block(chi, s[idx], terms)
    return out


def _L_block(chi: DirichletCharacter, s: np.ndarray, K: int) -> np.ndarray:
    q = chi.modulus
    N = _em_shift(float(np.max(np.abs(s))), K)
    m = np.arange(1, N * q + 1)
    coef = chi.values[m % q]
    keep = coef != 0
    logm = np.log(m[keep].astype(float))
    head = np.exp(-np.outer(s, logm)) @ coef[keep]

    a = np.arange(1, q + 1)
    ca = chi.values[a % q]
    live = ca != 0
    a, ca = a[live], ca[live]
    W = (N * q + a).astype(float)
    logW = np.log(W)
    Ws = np.exp(-np.outer(s, logW))  # W^-s, shape (len(s), len(a))
    if chi.is_principal:
        tail = (Ws * W) / (q * (s[:, None] - 1)) + Ws / 2
    else:
        # sum of chi(a) vanishes, so W^(1-s) may be replaced by W^(1-s) - 1,
        # which stays finite through s = 1
        u = np.outer(1 - s, logW)
        safe = np.where(u == 0, 1.0, u)
        ratio = np.where(u == 0, 1.0, np.expm1(safe) / safe)
        tail = -logW * ratio / q + Ws / 2
    B = _bernoulli_coeffs_float(K)
    rising = s.copy()  # (s)_(2k-1)
    power = Ws / W  # W^(-s-1)
    qpow = float(q)
    for k in range(1, K + 1):
        tail = tail + B[k - 1] * (rising * qpow)[:, None] * power
        rising = rising * (s + 2 * k - 1) * (s + 2 * k)
        power = power / (W * W)
        qpow *= q * q
    return head + tail @ ca


def hardy_theta_array(chi: DirichletCharacter, t) -> np.ndarray:
    """Continuous phase theta(t) = (t/2) log(q/pi) + Im log Gamma((1/2 + a + i t)/2)."""
    t = np.asarray(t, dtype=float)
    q, a = chi.modulus, chi.parity
    return 0.5 * t * math.log(q / math.pi) + loggamma((0.5 + a + 1j * t) / 2).imag


def hardy_Z_array(chi: DirichletCharacter, t) -> np.ndarray:
    """Real-valued Z(t) with |Z(t)| = |L(1/2 + it, chi)|, double precision."""
    t = np.asarray(t, dtype=float)
    if np.max(np.abs(t), initial=0.0) > HEIGHT_CEILING:
        raise PrecisionError(f"|t| exceeds the height ceiling {HEIGHT_CEILING}")
    alpha = np.angle(chi.root_number()) if chi.modulus > 1 else 0.0
    rot = np.exp(1j * (hardy_theta_array(chi, t) - alpha / 2))
    return (rot * dirichlet_L_array(chi, 0.5 + 1j * t)).real


# ---------------------------------------------------------------------------
# multiprecision


def _mp_values(chi: DirichletCharacter) -> list:
    """chi(0..q-1) as mpc at the current precision (exact at quarter turns)."""
    L = chi.ctx.exponent
    vals = []
    for k in chi.value_exponents:
        vals.append(mp.mpc(0) if k < 0 else mp.expjpi(mp.mpf(2 * int(k)) / L))
    return vals


def _L_mp(chi: DirichletCharacter, s, digits: int) -> mp.mpc:
    q = chi.modulus
    vals = _mp_values(chi)
    sigma = s.real
    tol = mp.mpf(10) ** (-digits)
    # smallest Bernoulli term is about exp(-2 pi N); shift past |s| as well
    N = int(mp.ceil(abs(s) / mp.pi)) + math.ceil(0.4 * digits) + 5
    bern = _bernoulli_coeffs_mp(mp.mp.prec)
    total = mp.mpc(0)
    for m in range(1, N * q + 1):
        c = vals[m % q]
        if c:
            total += c * mp.power(m, -s)
    qq = mp.mpf(q)
    for a in range(1, q + 1):
        c = vals[a % q]
        if not c:
            continue
        W = mp.mpf(N * q + a)
        Ws = mp.power(W, -s)
        tail = Ws * W / (qq * (s - 1)) + Ws / 2
        rising = s
        power = Ws / W
        qpow = qq
        W2 = W * W
        for k in range(1, 400):
            term = bern[k - 1] * rising * qpow * power
            bound = abs(term) * abs(s + 2 * k - 1) / (sigma + 2 * k - 1)
            tail += term
            if bound < tol:
                break
            rising *= (s + 2 * k - 1) * (s + 2 * k)
            power /= W2
            qpow *= qq * qq
        else:
            raise PrecisionError("Euler-Maclaurin tail failed to converge")
        total += c * tail
    return total


def dirichlet_L(chi: DirichletCharacter, s, digits: int = 25, validate: bool = True) -> mp.mpc:
    """L(s, chi) correct to about ``digits`` significant digits.

    With ``validate`` the value is recomputed at doubled working precision and
    a PrecisionError is raised if the two disagree beyond 10^-digits.
    """
    s_c = complex(s) if not isinstance(s, (mp.mpc, mp.mpf)) else s
    if abs(mp.mpc(s_c).imag) > HEIGHT_CEILING:
        raise PrecisionError(f"|Im s| exceeds the height ceiling {HEIGHT_CEILING}")
    with mp.workdps(digits + 10):
        s_mp = mp.mpc(s_c)
        value = _L_mp(chi, s_mp, digits + 8)
    if validate:
        with mp.workdps(2 * digits + 10):
            check = _L_mp(chi, mp.mpc(s_c), 2 * digits + 8)
            scale = max(abs(check), mp.mpf(1))
            if abs(check - value) > scale * mp.mpf(10) ** (-digits):
                raise PrecisionError(f"L value unstable under precision doubling at s={s_c}")
        log.debug("L(%s) validated at %d digits", s_c, digits)
    return value


def root_number_mp(chi: DirichletCharacter) -> mp.mpc:
    q = chi.modulus
    if q == 1:
        return mp.mpc(1)
    vals = _mp_values(chi)
    tau = mp.fsum(vals[a] * mp.expjpi(mp.mpf(2 * a) / q) for a in range(q))
    return tau / (mp.mpc(0, 1) ** chi.parity * mp.sqrt(q))


def hardy_theta(chi: DirichletCharacter, t) -> mp.mpf:
    t = mp.mpf(t)
    return t / 2 * mp.log(mp.mpf(chi.modulus) / mp.pi) + mp.loggamma((mp.mpf(0.5) + chi.parity + 1j * t) / 2).imag


def hardy_Z(chi: DirichletCharacter, t, digits: int = 25, validate: bool = False) -> mp.mpf:
    """Z(t) = exp(i(theta(t) - alpha/2)) L(1/2 + it, chi), real for primitive chi."""
    if not chi.is_primitive:
        raise ValueError("Hardy Z is defined here for primitive characters only")
    with mp.workdps(digits + 10):
        t = mp.mpf(t)
        alpha = mp.arg(root_number_mp(chi))
        L = dirichlet_L(chi, mp.mpc(mp.mpf(0.5), t), digits + 5, validate=validate)
        z = mp.expj(hardy_theta(chi, t) - alpha / 2) * L
        return +z.real


def lower_order_constant(chi: DirichletCharacter, dps: int = 30) -> complex:
    """b(chi) in the explicit formula for psi(x, chi), chi primitive nonprincipal.

    b = L'/L(0) for odd chi; for even chi the constant term of L'/L at 0,
    i.e. L''(0) / (2 L'(0)).  Computed from Hurwitz derivatives in mpmath.
    """
    if not chi.is_primitive or chi.is_principal:
        raise ValueError("b(chi) needs a primitive nonprincipal character")
    q = chi.modulus
    with mp.workdps(dps):
        vals = _mp_values(chi)
        lq = mp.log(q)

        def hz(k):
            return [mp.zeta(0, mp.mpf(a) / q, k) for a in range(1, q + 1)]

        z0, z1, z2 = hz(0), hz(1), hz(2)
        S0 = mp.fsum(vals[a % q] * z0[a - 1] for a in range(1, q + 1))
        S1 = mp.fsum(vals[a % q] * z1[a - 1] for a in range(1, q + 1))
        S2 = mp.fsum(vals[a % q] * z2[a - 1] for a in range(1, q + 1))
        # L(s) = q^-s S(s): derivatives at s = 0
        L0 = S0
        L1 = S1 - lq * S0
        L2 = S2 - 2 * lq * S1 + lq**2 * S0
        if chi.parity == 1:
            b = L1 / L0
        else:
            b = L2 / (2 * L1)
        return complex(b)
