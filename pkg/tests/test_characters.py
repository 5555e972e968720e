import cmath
import itertools
import math

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from apvariance.characters import (
    brute_conductor,
    character_from_values,
    character_group,
    conductor,
    euler_phi,
    evaluate,
    gauss_sum,
    modulus_context,
    primitive_inducing,
    principal,
)


def chi_m4():
    return character_from_values(4, {3: -1})


def test_group_sizes():
    assert len(character_group(4)) == 2
    assert len(character_group(1)) == 1
    g12 = character_group(12)
    assert len(g12) == 4
    assert sum(chi.is_real for chi in g12) == 4


def test_q_zero_rejected():
    with pytest.raises(ValueError):
        character_group(0)


def test_mod4_values():
    chi = chi_m4()
    assert chi(1) == 1 and chi(3) == -1
    assert evaluate(chi, 7) == -1
    assert evaluate(chi, 4) == 0


def test_value_at_modulus_is_zero():
    for q in (5, 9, 12, 35):
        for chi in character_group(q):
            assert evaluate(chi, q) == 0


def test_order_four_mod5():
    chi = character_from_values(5, {2: 1j})
    assert abs(chi(3) - (-1j)) < 1e-12
    assert chi.order == 4


def test_phi_against_sympy():
    for q in range(1, 300):
        assert euler_phi(q) == sympy.totient(q)


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=1, max_value=60))
def test_orthogonality(q):
    chars = character_group(q)
    units = [a for a in range(1, q + 1) if math.gcd(a, q) == 1]
    for a, b in itertools.product(units, units):
        s = sum(chi(a) * chi(b).conjugate() for chi in chars)
        assert abs(s - (len(chars) if a % q == b % q else 0)) < 1e-10


def test_conjugation_closure():
    for q in range(1, 80):
        chars = set(character_group(q))
        for chi in chars:
            assert chi.conj() in chars
            assert chi.conj().conductor == chi.conductor


def test_conductor_matches_brute_force():
    for q in range(1, 201):
        for chi in character_group(q):
            assert conductor(chi) == brute_conductor(chi), (q, chi.label)


def test_conductor_examples():
    assert conductor(principal(12)) == 1
    chi3 = character_from_values(3, {2: -1})
    induced = [c for c in character_group(9) if c.primitive() == chi3]
    assert len(induced) == 1 and induced[0].conductor == 3
    assert all(c.conductor == 5 for c in character_group(5) if not c.is_principal)


def test_primitive_inducing():
    chi = chi_m4()
    assert primitive_inducing(chi) == chi
    triv = primitive_inducing(principal(12))
    assert triv.modulus == 1
    from8 = [c for c in character_group(8) if c.conductor == 4]
    assert len(from8) == 1
    prim = from8[0].primitive()
    assert prim == chi
    for n in (1, 3, 5, 7):
        assert from8[0](n) == prim(n)


def test_gauss_sums():
    assert abs(gauss_sum(chi_m4()) - 2j) < 1e-12
    chi3 = character_from_values(3, {2: -1})
    assert abs(gauss_sum(chi3) - 1j * math.sqrt(3)) < 1e-12
    assert abs(gauss_sum(principal(1)) - 1) < 1e-12


def test_gauss_sum_rejects_imprimitive():
    with pytest.raises(ValueError):
        gauss_sum(principal(12))


def test_gauss_sum_modulus_sqrt_q():
    for q in (5, 7, 8, 11, 15, 16, 21):
        for chi in character_group(q):
            if chi.is_primitive:
                assert abs(abs(gauss_sum(chi)) - math.sqrt(q)) < 1e-10


def test_values_against_direct_evaluation():
    # the table must be a homomorphism: chi(ab) = chi(a) chi(b)
    for q in (24, 25, 27, 32, 45):
        for chi in character_group(q):
            v = chi.values
            for a, b in [(5, 7), (11, 13), (7, 7)]:
                assert abs(v[(a * b) % q] - v[a % q] * v[b % q]) < 1e-12


def test_parity():
    assert chi_m4().parity == 1
    assert principal(7).parity == 0
