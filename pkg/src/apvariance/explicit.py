"""Zero side and prime side of the explicit formula, averaged over short intervals.

For a family F closed under conjugation and y, delta > 0,

    R(y) = (1/2 delta) int_{y-delta}^{y+delta} sum_{chi in F} psi(e^t, chi) dt,
    S(y) = the same with theta in place of psi.

Both are reported divided by e^(y/2).  On the zero side each zero
rho = 1/2 + i gamma contributes -e^(i y gamma) K(gamma) / rho^2, where the
kernel K is either the first-order form i sin(delta gamma)/delta + cos(delta gamma)/2
or the exact average sinh(delta rho)/delta.  Phases y gamma are reduced
modulo 2 pi in multiprecision, so y may be astronomically large.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath as mp
import numpy as np
from scipy.integrate import quad

from .characters import DirichletCharacter, factorize
from .family import CharacterFamily, log2
from .lfunc import lower_order_constant
from .primes import SIEVE_CEILING, CapacityError, imprimitive_correction, psi_theta_budget, step_trajectory
from .sync import reduce_phase
from .zeros import DEFAULT_DIGITS, RVM_CONSTANT, ZeroSet, ZeroStore, inverse_square_tail

log = logging.getLogger(__name__)

LOWER_ORDER_MAX_Y = 1000.0  # beyond this the lower-order terms are below e^-490


class UnverifiedZeros(RuntimeError):
    pass


@dataclass
class EFParams:
    delta: Fraction
    T: float
    family: CharacterFamily
    M: float = 1.0
    C: float | None = None
    epsilon: float = 0.1

    def __post_init__(self):
        self.delta = Fraction(self.delta).limit_denominator(10**30) if not isinstance(self.delta, Fraction) else self.delta
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.M < 1:
            raise ValueError("M must be at least 1")

    @property
    def d(self) -> float:
        return float(self.delta)

    @classmethod
    def pipeline(cls, delta, C: float, family: CharacterFamily, epsilon: float = 0.1) -> EFParams:
        delta = Fraction(delta)
        T = C / float(delta)
        return cls(delta, T, family, M=C * math.log(T), C=C, epsilon=epsilon)


@dataclass
class EFValue:
    y: Fraction | float
    R_normalized: float | None = None
    S_normalized: float | None = None
    main_term_prediction: float | None = None
    error_budget: dict = field(default_factory=dict)
    imag_residue: float = 0.0
    details: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# zero access


def _check_status(zs: ZeroSet, allow_unverified: bool) -> None:
    if zs.status != "verified" and not allow_unverified:
        raise UnverifiedZeros(f"zero set {zs.character_label} has status {zs.status}; pass allow_unverified to proceed")


def zeros_both_signs(store: ZeroStore, chi: DirichletCharacter, T: float, digits: int = DEFAULT_DIGITS, allow_unverified: bool = False, **kw):
    """Ordinates (as CriticalZero-like pairs (gamma_mp, digits)) of chi* in [-T, T]."""
    prim = chi.primitive()
    pos = store.get(prim, T, digits, **kw)
    _check_status(pos, allow_unverified)
    if prim.is_real:
        neg = pos
    else:
        neg = store.get(prim.conj(), T, digits, **kw)
        _check_status(neg, allow_unverified)
    out = [(z.gamma, z.precision_digits) for z in pos.zeros]
    out += [(mp.fneg(z.gamma, exact=True), z.precision_digits) for z in neg.zeros]
    return out


def _zero_at_half(gammas, digits) -> None:
    for g, d in gammas:
        if abs(g) < mp.mpf(10) ** (-d):
            raise ValueError("a zero at s = 1/2 was found; conjugate grouping is not valid for it")


# ---------------------------------------------------------------------------
# truncated explicit formula for psi(x, chi)


def lower_order_psi(chi: DirichletCharacter, x: float) -> complex:
    """-(1 - a) log x - b(chi*) + sum_m x^(a - 2m)/(2m - a) for the primitive chi*."""
    prim = chi.primitive()
    a = prim.parity
    b = lower_order_constant(prim)
    trivial = math.fsum(x ** (a - 2 * m) / (2 * m - a) for m in range(1, 200))
    return -(1 - a) * math.log(x) - b + trivial


def truncated_explicit_psi(
    chi: DirichletCharacter,
    x: float,
    T: float,
    store: ZeroStore,
    digits: int = DEFAULT_DIGITS,
    lower_order: bool = False,
    allow_unverified: bool = False,
) -> dict:
    """-sum_{|gamma| <= T} x^rho / rho minus the imprimitive correction, with its error budget."""
    if chi.is_principal:
        raise ValueError("the explicit formula here is for nonprincipal characters")
    zs = zeros_both_signs(store, chi, T, digits, allow_unverified)
    gam = np.array([float(g) for g, _ in zs if abs(g) <= T])
    rho = 0.5 + 1j * gam
    lx = math.log(x)
    terms = np.exp(1j * gam * lx) * math.sqrt(x) / rho
    value = -complex(math.fsum(terms.real.tolist()), math.fsum(terms.imag.tolist()))
    value -= imprimitive_correction(chi, x)
    if lower_order:
        value += lower_order_psi(chi, x)
    q = chi.modulus
    return {
        "value": value,
        "zeros_used": int(len(gam)),
        "budget": x * math.log(q * x * T) ** 2 / T,
    }


# ---------------------------------------------------------------------------
# R_delta: zero side


def _kernel(gamma: np.ndarray, d: float, kind: str) -> np.ndarray:
    if kind == "lemma":
        return 1j * np.sin(d * gamma) / d + np.cos(d * gamma) / 2
    if kind == "exact":
        return (math.sinh(d / 2) * np.cos(d * gamma) + 1j * math.cosh(d / 2) * np.sin(d * gamma)) / d
    raise ValueError(f"unknown kernel {kind!r}")


def _phases(y, gammas) -> np.ndarray:
    """y gamma mod 2 pi; exact rational y goes through multiprecision reduction."""
    if isinstance(y, (Fraction, int)) and abs(y) > 10**6:
        return np.array([reduce_phase(y, g, d) for g, d in gammas])
    yf = float(y)
    if isinstance(y, (Fraction, int)):
        return np.array([reduce_phase(y, g, d) for g, d in gammas]) if gammas else np.zeros(0)
    return np.array([yf * float(g) for g, _ in gammas])


def _lower_order_average(chi: DirichletCharacter, y: float, d: float) -> complex:
    """(1/2 delta) int_{y-d}^{y+d} of psi(e^t, chi) minus its zero sum, i.e. the non-oscillating part."""
    prim = chi.primitive()
    a = prim.parity
    b = lower_order_constant(prim)
    lo, hi = y - d, y + d
    if lo <= 0:
        raise ValueError("the interval must lie in t > 0")
    out = -(1 - a) * y - b
    # trivial zeros: sum_m e^{(a-2m)t}/(2m-a), averaged
    triv = math.fsum(
        (math.exp((a - 2 * m) * lo) - math.exp((a - 2 * m) * hi)) / (2 * m - a) ** 2 for m in range(1, 400)
    ) / (2 * d)
    out += triv
    # imprimitive correction: - sum_{p | q, p^k <= e^t} chi*(p^k) log p
    corr = 0j
    for p, _ in factorize(chi.modulus):
        lp = math.log(p)
        k = 1
        while k * lp <= hi:
            length = hi - max(lo, k * lp)
            corr += prim(p**k) * lp * length
            k += 1
    out -= corr / (2 * d)
    return out


def R_delta(
    params: EFParams,
    y,
    store: ZeroStore,
    kernel: str = "lemma",
    lower_order: bool | None = None,
    digits: int = DEFAULT_DIGITS,
    allow_unverified: bool = False,
    **zero_kw,
) -> EFValue:
    """Normalized zero side R(y)/e^(y/2).

    ``lower_order`` adds the averaged -(1-a) t - b(chi) + trivial-zero and
    imprimitive terms; by default they are included when y <= 1000 and the
    exact kernel is used.
    """
    fam = params.family
    if any(chi.is_principal for chi in fam.characters):
        raise ValueError("R_delta supports nonprincipal families only")
    d = params.d
    y_float = float(y)
    if lower_order is None:
        lower_order = kernel == "exact" and y_float <= LOWER_ORDER_MAX_Y
    total = 0j
    per_char = {}
    used = 0
    for chi in fam.characters:
        zs = [(g, dg) for g, dg in zeros_both_signs(store, chi, params.T, digits, allow_unverified, **zero_kw) if abs(g) <= params.T]
        _zero_at_half(zs, digits)
        gam = np.array([float(g) for g, _ in zs])
        rho = 0.5 + 1j * gam
        phase = np.exp(1j * _phases(y, zs))
        terms = -phase * _kernel(gam, d, kernel) / rho**2
        s = complex(math.fsum(terms.real.tolist()), math.fsum(terms.imag.tolist()))
        if lower_order:
            s += _lower_order_average(chi, y_float, d) / math.exp(y_float / 2)
        per_char[chi.label] = s
        used += len(gam)
    total = complex(math.fsum(v.real for v in per_char.values()), math.fsum(v.imag for v in per_char.values()))
    tail = truncation_tail(params, kernel)
    pred = final_R_prediction(params, y)
    budget = dict(pred["budget"])
    budget["zero_truncation_tail"] = tail
    if not lower_order:
        budget["lower_order_terms"] = lower_order_bound(params, y_float)
    return EFValue(
        y=y,
        R_normalized=total.real,
        main_term_prediction=pred["prediction"],
        error_budget=budget,
        imag_residue=abs(total.imag),
        details={"kernel": kernel, "lower_order": lower_order, "zeros_used": used, "per_character": {k: v.real for k, v in per_char.items()}},
    )


def truncation_tail(params: EFParams, kernel: str = "lemma", constant: float = RVM_CONSTANT) -> float:
    """Bound for the zeros with |gamma| > T: |K| / |rho|^2 summed with the RvM-based tail."""
    d = params.d
    kmax = math.cosh(d / 2) / d + math.sinh(d / 2) / d if kernel == "exact" else 1 / d + 0.5
    return math.fsum(kmax * inverse_square_tail(chi.conductor, params.T, constant) for chi in params.family.characters)


def lower_order_bound(params: EFParams, y: float) -> float:
    """Crude size of the omitted lower-order terms: Phi (y log q + 2) / e^(y/2) with constant 1."""
    if y > 1400:
        return 0.0
    q = params.family.q
    return params.family.phi_F * (y * math.log(q) + 2) / math.exp(y / 2)


# ---------------------------------------------------------------------------
# S_delta: prime side


class _Steps:
    """Jump points and running sums of theta(n, chi) (or psi) for one character."""

    def __init__(self, chi: DirichletCharacter, x: float, kind: str):
        pts, vals = step_trajectory(chi, x, prime_powers=(kind == "psi"))
        self.points = pts
        self.logs = np.log(pts.astype(float))
        self.jumps = np.diff(np.concatenate([[0], vals]))
        self.values = vals

    def at(self, x: float) -> complex:
        i = np.searchsorted(self.points, math.floor(x), side="right")
        return complex(self.values[i - 1]) if i > 0 else 0j

    def average(self, lo: float, hi: float) -> complex:
        """int_lo^hi f(e^t) dt in closed form (f a step function in e^t)."""
        i0 = np.searchsorted(self.points, math.floor(math.exp(lo)), side="right")
        i1 = np.searchsorted(self.points, math.floor(math.exp(hi)), side="right")
        base = self.at(math.exp(lo)) * (hi - lo)
        seg = self.jumps[i0:i1] * (hi - self.logs[i0:i1])
        return base + complex(math.fsum(seg.real.tolist()), math.fsum(seg.imag.tolist()))


def _steps_for(fam: CharacterFamily, x: float, kind: str, cache: dict | None):
    key = (fam.q, fam.members, math.floor(x), kind)
    if cache is not None and key in cache:
        return cache[key]
    steps = {chi.label: _Steps(chi, x, kind) for chi in fam.characters}
    if cache is not None:
        cache[key] = steps
    return steps


def S_delta_prime_side(params: EFParams, y: float, kind: str = "theta", cache: dict | None = None) -> EFValue:
    """Normalized prime side S(y)/e^(y/2) from sieved values, integrated in closed form."""
    d = params.d
    y = float(y)
    hi = y + d
    if math.exp(hi) > SIEVE_CEILING:
        raise CapacityError(f"e^(y+delta) = {math.exp(hi):.3g} exceeds the sieve ceiling; use R_delta (zero side)")
    steps = _steps_for(params.family, math.exp(hi), kind, cache)
    total = 0j
    for chi in params.family.characters:
        integral = steps[chi.label].average(y - d, hi)
        if chi.is_principal:
            integral -= math.exp(hi) - math.exp(y - d)
        total += integral
    total /= 2 * d
    norm = math.exp(y / 2)
    budget = {"psi_minus_theta": params.family.phi_F * psi_theta_budget(math.exp(hi)) / norm}
    return EFValue(y=y, S_normalized=(total / norm).real, error_budget=budget, imag_residue=abs(total.imag) / norm)


def S_delta_quadrature(params: EFParams, y: float, kind: str = "theta") -> float:
    """Independent check of S: scipy quad on each piece between jump points."""
    d = params.d
    lo, hi = y - d, y + d
    steps = _steps_for(params.family, math.exp(hi), kind, None)
    total = 0.0
    for chi in params.family.characters:
        st = steps[chi.label]
        inside = st.logs[(st.logs > lo) & (st.logs < hi)]
        cuts = [lo, *inside.tolist(), hi]
        for a, b in zip(cuts[:-1], cuts[1:]):
            val, _ = quad(lambda t, st=st: st.at(math.exp(t)).real, a, b, epsabs=1e-13, epsrel=1e-13)
            total += val
        if chi.is_principal:
            total -= quad(math.exp, lo, hi)[0]
    return total / (2 * d) / math.exp(y / 2)


def cross_check_cell(params: EFParams, y: float, store: ZeroStore, cache: dict | None = None, digits: int = 20) -> dict:
    """S versus R at one y, with R including lower-order terms and the exact kernel."""
    R = R_delta(params, Fraction(y).limit_denominator(10**12) if not isinstance(y, Fraction) else y, store, kernel="exact", lower_order=True, digits=digits)
    S = S_delta_prime_side(params, float(y), cache=cache)
    budget = S.error_budget["psi_minus_theta"] + R.error_budget["zero_truncation_tail"]
    diff = abs(S.S_normalized - R.R_normalized)
    return {
        "y": float(y),
        "R_normalized": R.R_normalized,
        "S_normalized": S.S_normalized,
        "difference": diff,
        "budget": budget,
        "psi_minus_theta_budget": S.error_budget["psi_minus_theta"],
        "tail_budget": R.error_budget["zero_truncation_tail"],
        "within": diff <= budget,
    }


# ---------------------------------------------------------------------------
# main terms and budgets


def zero_sum_main_term(params: EFParams, store: ZeroStore, digits: int = DEFAULT_DIGITS, allow_unverified: bool = False, **zero_kw) -> dict:
    """delta sum_chi sum_{0 <= gamma <= T} (2 gamma^4/|rho|^4) sin^2(delta gamma)/(delta gamma)^2 against Phi/2 log(q/delta)."""
    fam = params.family
    d = params.d
    T = params.T
    q = fam.q
    terms = []
    for chi in fam.characters:
        zs = store.get(chi.primitive(), T, digits, **zero_kw)
        _check_status(zs, allow_unverified)
        g = zs.gammas
        g = g[g <= T]
        r2 = 0.25 + g**2
        terms.extend((d * 2 * g**4 / r2**2 * np.sinc(d * g / math.pi) ** 2).tolist())
    lhs = math.fsum(terms)
    Phi = fam.phi_F
    pred = Phi / 2 * math.log(q / d)
    budget = {
        "delta_Phi_log(qT)_logT": d * Phi * math.log(q * T) * math.log(T),
        "sqrt(delta)_Phi_log(q/delta)": math.sqrt(d) * Phi * math.log(q / d),
        "(E_q+Phi)_log(T delta)": (fam.E_q + Phi) * math.log(T * d),
        "Phi_log(qT)/(delta T)": Phi * math.log(q * T) / (d * T),
    }
    ratio = lhs / pred if pred else (1.0 if lhs == 0 else math.inf)
    if Phi == 0:
        ratio = 1.0 if lhs == 0 else math.inf
    return {"lhs": lhs, "prediction": pred, "ratio": ratio, "budget": budget, "delta": d, "T": T, "Phi_q": Phi}


def final_R_prediction(params: EFParams, y=None) -> dict:
    """-Phi log(q^2/delta)/2 and the itemized budget (each O-constant taken as 1), normalized by e^(y/2)."""
    fam = params.family
    q, Phi, d, T, M = fam.q, fam.phi_F, params.d, params.T, params.M
    lq = math.log(q)
    yv = float(y) if y is not None else math.inf
    items = {
        "log(qT)/(delta T)": math.log(q * T) / (d * T),
        "(E_q/Phi+1) log(T delta)": ((fam.E_q / Phi if Phi else 0.0) + 1) * math.log(T * d),
        "y log q / e^(y/2)": 0.0 if yv > 1400 else yv * lq / math.exp(yv / 2),
        "log(qT) log T / M": math.log(q * T) * math.log(T) / M,
        "sqrt(delta) log(qT)": math.sqrt(d) * math.log(q * T),
        "log q / log log q": lq / log2(q) if q >= 3 else 0.0,
    }
    budget = {k: Phi * v for k, v in items.items()}
    return {
        "prediction": -Phi * math.log(q * q / d) / 2,
        "budget": budget,
        "budget_total": math.fsum(budget.values()),
    }


def search_C(fam: CharacterFamily, delta, C_start: float = 10.0, C_max: float = 1e6, step: float = 1.0) -> dict:
    """Smallest C >= C_start (on a grid) with budget < |prediction|/2 for T = C/delta, M = C log T."""
    C = C_start
    history = []
    while C <= C_max:
        params = EFParams.pipeline(delta, C, fam)
        pred = final_R_prediction(params)
        ok = pred["budget_total"] < abs(pred["prediction"]) / 2
        history.append((C, pred["budget_total"], abs(pred["prediction"]) / 2))
        if ok:
            return {"C": C, "achieved": True, "budget_total": pred["budget_total"], "half_prediction": abs(pred["prediction"]) / 2}
        C += step
        step *= 1.05
    last = history[-1]
    return {"C": C_start, "achieved": False, "budget_total": last[1], "half_prediction": last[2], "note": "budget never fell below half the main term"}
