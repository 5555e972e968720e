import math

import mpmath as mp
import numpy as np
import pytest

from apvariance.characters import character_from_values, character_group, principal
from apvariance.lfunc import (
    PrecisionError,
    dirichlet_L,
    dirichlet_L_array,
    hardy_Z,
    hardy_Z_array,
    lower_order_constant,
)


def chi_m4():
    return character_from_values(4, {3: -1})


def exact_values(chi):
    e = chi.ctx.exponent
    out = []
    for a in range(chi.modulus):
        k = chi.value_exponent(a)
        out.append(0 if k is None else mp.expjpi(mp.mpf(2 * k) / e))
    return out


def catalan_partial():
    # alternating series: the error is below the first omitted term
    n = 200000
    k = np.arange(n, dtype=float)
    s = math.fsum(((-1.0) ** k / (2 * k + 1) ** 2).tolist())
    return s, 1 / (2 * n + 1) ** 2


def test_catalan():
    s, tail = catalan_partial()
    with mp.workdps(30):
        val = dirichlet_L(chi_m4(), 2)
        assert abs(float(val.real) - s) <= tail + 1e-15
        assert abs(val - mp.catalan) < mp.mpf(10) ** -24


def test_zeta_two():
    with mp.workdps(30):
        assert abs(dirichlet_L(principal(1), 2) - mp.pi**2 / 6) < mp.mpf(10) ** -24


@pytest.mark.parametrize("q", [3, 4, 5, 7, 8, 12])
def test_against_mpmath_dirichlet(q):
    for chi in character_group(q):
        if not chi.is_primitive or q == 1:
            continue
        for s in (2, 0.5 + 14j, 0.3 - 40j, 1.5 + 100j):
            with mp.workdps(30):
                coeffs = exact_values(chi)
                ref = mp.dirichlet(s, coeffs)
                got = dirichlet_L(chi, s, digits=20)
                assert abs(got - ref) < 1e-18 * max(1, abs(ref))


def test_double_precision_engine_matches_mp():
    chi = character_from_values(5, {2: 1j})
    s = 0.5 + 1j * np.linspace(0, 150, 31)
    fast = dirichlet_L_array(chi, s)
    for si, fi in zip(s, fast):
        ref = complex(dirichlet_L(chi, si, digits=16, validate=False))
        assert abs(fi - ref) < 1e-9 * max(1, abs(ref))


def test_imprimitive_L_has_euler_factor_removed():
    chi8 = [c for c in character_group(8) if c.conductor == 4][0]
    s = mp.mpc(3, 5)
    lhs = dirichlet_L(principal(6), s)
    with mp.workdps(30):
        rhs = mp.zeta(s) * (1 - mp.power(2, -s)) * (1 - mp.power(3, -s))
        assert abs(lhs - rhs) < 1e-20
    with mp.workdps(30):
        assert abs(dirichlet_L(chi8, s) - dirichlet_L(chi_m4(), s)) < 1e-20  # chi_-4(2) = 0


def test_first_zero_chi_m4():
    assert abs(dirichlet_L(chi_m4(), mp.mpc(0.5, "6.0209489046975965"), digits=20)) < 1e-8


def test_Z_at_zero_is_real_and_matches_L():
    chi = chi_m4()
    z0 = hardy_Z(chi, 0)
    assert z0 != 0
    assert abs(abs(z0) - abs(dirichlet_L(chi, 0.5))) < 1e-20


def test_Z_sign_change():
    chi = chi_m4()
    assert hardy_Z(chi, 6.0) * hardy_Z(chi, 6.1) < 0
    grid = hardy_Z_array(chi, np.array([6.0, 6.1]))
    assert grid[0] * grid[1] < 0


def test_Z_conjugate_symmetry():
    chi = character_from_values(5, {2: 1j})
    bar = chi.conj()
    for t in (1.3, 6.18, 20.0):
        assert abs(abs(hardy_Z(bar, t)) - abs(hardy_Z(chi, -t))) < 1e-18


def test_Z_array_agrees_with_mp():
    chi = character_from_values(7, {3: cmath_exp(1 / 3)})
    t = np.array([0.5, 10.0, 55.5])
    fast = hardy_Z_array(chi, t)
    for ti, fi in zip(t, fast):
        assert abs(fi - float(hardy_Z(chi, ti))) < 1e-9


def cmath_exp(frac):
    import cmath

    return cmath.exp(2j * math.pi * frac)


def test_height_ceiling():
    with pytest.raises(PrecisionError):
        dirichlet_L(chi_m4(), 0.5 + 500j)


def test_imprimitive_Z_rejected():
    with pytest.raises(ValueError):
        hardy_Z(principal(6), 1.0)


def test_lower_order_constant_odd_is_log_derivative_at_zero():
    chi = chi_m4()
    b = lower_order_constant(chi)
    # L(0, chi_-4) = 1/2 and L'(0, chi_-4) = log(Gamma(1/4)^2 / (2 pi sqrt 2))
    with mp.workdps(30):
        ref = 2 * mp.log(mp.gamma(0.25) ** 2 / (2 * mp.pi * mp.sqrt(2)))
    assert abs(b - complex(ref)) < 1e-12


def test_high_precision_is_returned():
    with mp.workdps(40):
        assert abs(dirichlet_L(chi_m4(), 2, digits=35) - mp.catalan) < mp.mpf(10) ** -34
