"""Dirichlet characters modulo q.

A character is stored as an exponent vector on a fixed set of generators of
(Z/qZ)^*.  The generators come from the CRT decomposition of q:

* odd p^k: one cyclic factor generated by the least primitive root g mod p
  that is also primitive mod p^2 (so the same g generates mod every p^k);
* 4: the factor generated by -1;
* 2^k, k >= 3: two factors generated by -1 (order 2) and 5 (order 2^(k-2)).

Factors are ordered by prime, and for 2^k the -1 factor precedes the 5 factor.
The external label of a character is the mixed-radix integer
``sum_j e_j * prod_{i<j} ord_i`` (first factor least significant), so label 0
is always the principal character.  Labels are stable across releases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from itertools import product

import numpy as np
import sympy

TABLE_CACHE_LIMIT = 10**6


def factorize(q: int) -> list[tuple[int, int]]:
    return sorted(sympy.factorint(q).items())


def euler_phi(q: int) -> int:
    phi = q
    for p, _ in factorize(q):
        phi = phi // p * (p - 1)
    return phi


@lru_cache(maxsize=None)
def _stable_primitive_root(p: int) -> int:
    """Least primitive root mod p that stays primitive mod p^2."""
    g = sympy.primitive_root(p)
    while pow(g, p - 1, p * p) == 1 or sympy.n_order(g, p) != p - 1:
        g += 1
    return g


@dataclass(frozen=True)
class CyclicFactor:
    prime: int
    power: int  # modulus of the prime-power component, p^k
    generator: int  # residue mod ``power``
    order: int


@lru_cache(maxsize=None)
def _prime_power_factors(p: int, k: int) -> tuple[CyclicFactor, ...]:
    pk = p**k
    if p == 2:
        if k == 1:
            return ()
        if k == 2:
            return (CyclicFactor(2, 4, 3, 2),)
        return (CyclicFactor(2, pk, pk - 1, 2), CyclicFactor(2, pk, 5, 2 ** (k - 2)))
    return (CyclicFactor(p, pk, _stable_primitive_root(p) % pk, pk // p * (p - 1)),)


@lru_cache(maxsize=None)
def _prime_power_logs(p: int, k: int) -> np.ndarray:
    """Discrete logs of every residue mod p^k on that component's generators.

    Shape (p^k, r) with r the number of cyclic factors; rows of non-units are -1.
    """
    pk = p**k
    factors = _prime_power_factors(p, k)
    table = np.full((pk, len(factors)), -1, dtype=np.int64)
    if not factors:
        return table
    if p == 2 and k >= 3:
        power = 1
        for v in range(2 ** (k - 2)):
            table[power, :] = (0, v)
            table[pk - power, :] = (1, v)
            power = power * 5 % pk
        return table
    g = factors[0].generator
    power = 1
    for e in range(factors[0].order):
        table[power, 0] = e
        power = power * g % pk
    return table


class ModulusContext:
    """Group structure of (Z/qZ)^* with cached discrete-log and root tables."""

    def __init__(self, q: int):
        if q < 1:
            raise ValueError(f"modulus must be a positive integer, got {q}")
        self.q = int(q)
        self.factorization = factorize(self.q)
        self.phi = euler_phi(self.q)
        factors: list[CyclicFactor] = []
        for p, k in self.factorization:
            factors.extend(_prime_power_factors(p, k))
        self.factors: tuple[CyclicFactor, ...] = tuple(factors)
        self.orders: tuple[int, ...] = tuple(f.order for f in self.factors)
        self.exponent = math.lcm(*self.orders) if self.orders else 1
        assert math.prod(self.orders) == self.phi

    def __repr__(self) -> str:
        return f"ModulusContext({self.q})"

    @property
    def generators(self) -> list[int]:
        """Generators lifted to residues mod q (1 on the other CRT components)."""
        gens = []
        for f in self.factors:
            residues = [(f.generator, f.power)]
            residues += [(1, p**k) for p, k in self.factorization if p != f.prime]
            gens.append(int(sympy.ntheory.modular.crt([m for _, m in residues], [r for r, _ in residues])[0]))
        return gens

    @cached_property
    def log_table(self) -> np.ndarray:
        """Exponent vectors of all residues 0..q-1 (rows of non-units are -1)."""
        n = np.arange(self.q, dtype=np.int64)
        table = np.zeros((self.q, len(self.factors)), dtype=np.int64)
        unit = np.ones(self.q, dtype=bool)
        col = 0
        for p, k in self.factorization:
            local = _prime_power_logs(p, k)[n % p**k]
            width = local.shape[1]
            if width:
                table[:, col : col + width] = local
                unit &= local[:, 0] >= 0
            else:
                unit &= n % 2 == 1
            col += width
        table[~unit] = -1
        return table

    @cached_property
    def units(self) -> np.ndarray:
        return np.flatnonzero(self.log_table[:, 0] >= 0) if self.factors else np.flatnonzero(
            np.gcd(np.arange(self.q), self.q) == 1
        )

    @cached_property
    def roots(self) -> np.ndarray:
        """exp(2 pi i k / exponent) for k = 0..exponent-1, exact at quarter turns."""
        L = self.exponent
        k = np.arange(L)
        roots = np.exp(2j * np.pi * k / L)
        for j in range(L):
            if (4 * j) % L == 0:
                roots[j] = (1, 1j, -1, -1j)[(4 * j) // L]
        return roots

    def exponents_of(self, a: int) -> tuple[int, ...] | None:
        a %= self.q
        if math.gcd(a, self.q) != 1:
            return None
        return tuple(int(v) for v in self.log_table[a]) if self.q <= TABLE_CACHE_LIMIT else self._slow_log(a)

    def _slow_log(self, a: int) -> tuple[int, ...]:
        out: list[int] = []
        for p, k in self.factorization:
            out.extend(int(v) for v in _prime_power_logs(p, k)[a % p**k])
        return tuple(out)

    def character(self, exponents) -> DirichletCharacter:
        exps = tuple(int(e) % o for e, o in zip(exponents, self.orders))
        if len(exps) != len(self.orders):
            raise ValueError(f"expected {len(self.orders)} exponents for modulus {self.q}")
        return DirichletCharacter(self, exps)

    def from_label(self, label: int) -> DirichletCharacter:
        if not 0 <= label < self.phi:
            raise ValueError(f"label {label} out of range for modulus {self.q}")
        exps = []
        for o in self.orders:
            label, e = divmod(label, o)
            exps.append(e)
        return DirichletCharacter(self, tuple(exps))

    @cached_property
    def characters(self) -> tuple[DirichletCharacter, ...]:
        # product() varies the last factor fastest; reorder so label order holds
        chars = [DirichletCharacter(self, tuple(reversed(e))) for e in product(*(range(o) for o in reversed(self.orders)))]
        chars.sort(key=lambda c: c.label)
        return tuple(chars)


@lru_cache(maxsize=256)
def modulus_context(q: int) -> ModulusContext:
    return ModulusContext(q)


@dataclass(frozen=True, eq=False)
class DirichletCharacter:
    ctx: ModulusContext = field(repr=False)
    exponents: tuple[int, ...]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, DirichletCharacter)
            and self.ctx.q == other.ctx.q
            and self.exponents == other.exponents
        )

    def __hash__(self) -> int:
        return hash((self.ctx.q, self.exponents))

    def __repr__(self) -> str:
        return f"DirichletCharacter(q={self.modulus}, label={self.label}, exponents={self.exponents})"

    @property
    def modulus(self) -> int:
        return self.ctx.q

    @property
    def label(self) -> int:
        label, radix = 0, 1
        for e, o in zip(self.exponents, self.ctx.orders):
            label += e * radix
            radix *= o
        return label

    @property
    def key(self) -> tuple[int, int]:
        return (self.modulus, self.label)

    @property
    def is_principal(self) -> bool:
        return all(e == 0 for e in self.exponents)

    @property
    def order(self) -> int:
        return math.lcm(1, *(o // math.gcd(o, e) for e, o in zip(self.exponents, self.ctx.orders)))

    @property
    def is_real(self) -> bool:
        return self.order <= 2

    @cached_property
    def parity(self) -> int:
        """a_chi in {0, 1} with chi(-1) = (-1)^a_chi."""
        if self.modulus <= 2:
            return 0
        v = self(-1)
        return 0 if v.real > 0 else 1

    def conj(self) -> DirichletCharacter:
        return DirichletCharacter(self.ctx, tuple((-e) % o for e, o in zip(self.exponents, self.ctx.orders)))

    # values -------------------------------------------------------------

    @cached_property
    def value_exponents(self) -> np.ndarray:
        """chi(a) = roots[value_exponents[a]] for units; -1 marks non-units."""
        ctx = self.ctx
        if not ctx.factors:
            out = np.zeros(ctx.q, dtype=np.int64)
            out[np.gcd(np.arange(ctx.q), ctx.q) != 1] = -1
            return out
        table = ctx.log_table
        weights = np.array([e * (ctx.exponent // o) for e, o in zip(self.exponents, ctx.orders)], dtype=np.int64)
        out = (table @ weights) % ctx.exponent
        out[table[:, 0] < 0] = -1
        return out

    @cached_property
    def values(self) -> np.ndarray:
        """Complex value table chi(0..q-1)."""
        idx = self.value_exponents
        vals = self.ctx.roots[np.where(idx >= 0, idx, 0)].astype(complex)
        vals[idx < 0] = 0
        return vals

    def __call__(self, n: int) -> complex:
        n = int(n) % self.modulus
        if self.modulus <= TABLE_CACHE_LIMIT:
            return complex(self.values[n])
        exps = self.ctx.exponents_of(n)
        if exps is None:
            return 0j
        k = sum(e * v * (self.ctx.exponent // o) for e, v, o in zip(self.exponents, exps, self.ctx.orders))
        return complex(self.ctx.roots[k % self.ctx.exponent])

    def value_exponent(self, n: int) -> int | None:
        """Index k with chi(n) = exp(2 pi i k / exponent), or None if gcd(n, q) > 1."""
        k = int(self.value_exponents[int(n) % self.modulus])
        return None if k < 0 else k

    # conductor and primitivity ------------------------------------------

    def _local_conductors(self) -> list[tuple[int, int]]:
        """Per prime p | q: exponent j of p in the conductor."""
        out = []
        col = 0
        for p, k in self.ctx.factorization:
            width = len(_prime_power_factors(p, k))
            exps = self.exponents[col : col + width]
            col += width
            if p != 2:
                e = exps[0]
                if e == 0:
                    j = 0
                else:
                    v = 0
                    while e % p == 0:
                        e //= p
                        v += 1
                    j = k - v
            elif k == 1:
                j = 0
            elif k == 2:
                j = 2 if exps[0] else 0
            else:
                sign, b = exps
                if b == 0:
                    j = 2 if sign else 0
                else:
                    v = 0
                    while b % 2 == 0:
                        b //= 2
                        v += 1
                    j = k - v
            out.append((p, j))
        return out

    @cached_property
    def conductor(self) -> int:
        return math.prod(p**j for p, j in self._local_conductors())

    @property
    def is_primitive(self) -> bool:
        return self.conductor == self.modulus

    def primitive(self) -> DirichletCharacter:
        """The primitive character mod the conductor inducing this one."""
        if self.is_primitive:
            return self
        target = modulus_context(self.conductor)
        exps: list[int] = []
        col = 0
        for (p, k), (_, j) in zip(self.ctx.factorization, self._local_conductors()):
            width = len(_prime_power_factors(p, k))
            local = self.exponents[col : col + width]
            col += width
            if j == 0:
                continue
            if p != 2:
                exps.append(local[0] // p ** (k - j))
            elif j == 2:
                exps.append(local[0])
            else:
                exps.extend((local[0], local[1] // 2 ** (k - j)))
        return target.character(exps)

    def gauss_sum(self) -> complex:
        """tau(chi) = sum_a chi(a) e(a/q); defined here for primitive chi only."""
        if not self.is_primitive:
            raise ValueError(f"Gauss sum requested for imprimitive character {self!r}")
        q = self.modulus
        a = np.arange(q)
        return complex(np.sum(self.values * np.exp(2j * np.pi * a / q)))

    def root_number(self) -> complex:
        """epsilon(chi) = tau(chi) / (i^a sqrt(q)), of modulus 1."""
        return self.gauss_sum() / (1j**self.parity * math.sqrt(self.modulus))


def character_group(q: int) -> list[DirichletCharacter]:
    """All phi(q) characters mod q in label order (label 0 is principal)."""
    if q < 1:
        raise ValueError(f"modulus must be a positive integer, got {q}")
    return list(modulus_context(q).characters)


def evaluate(chi: DirichletCharacter, n: int) -> complex:
    return chi(n)


def conductor(chi: DirichletCharacter) -> int:
    return chi.conductor


def primitive_inducing(chi: DirichletCharacter) -> DirichletCharacter:
    return chi.primitive()


def gauss_sum(chi: DirichletCharacter) -> complex:
    return chi.gauss_sum()


def principal(q: int) -> DirichletCharacter:
    return modulus_context(q).from_label(0)


def character_from_values(q: int, values: dict[int, complex], tol: float = 1e-9) -> DirichletCharacter:
    """Find the character mod q matching the given values (used for external tables)."""
    for chi in character_group(q):
        if all(abs(chi(a) - v) < tol for a, v in values.items()):
            return chi
    raise LookupError(f"no character mod {q} matches {values}")


def brute_conductor(chi: DirichletCharacter) -> int:
    """Smallest d | q such that chi is trivial on units congruent to 1 mod d."""
    q = chi.modulus
    units = [a for a in range(1, q + 1) if math.gcd(a, q) == 1]
    for d in sorted(sympy.divisors(q)):
        if all(abs(chi(a) - 1) < 1e-12 for a in units if (a - 1) % d == 0):
            return d
    return q
