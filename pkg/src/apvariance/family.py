"""Conjugation-closed character families with controlled conductors."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import sympy

from .characters import DirichletCharacter, modulus_context


def log2(q: float) -> float:
    """Iterated logarithm log log q."""
    return math.log(math.log(q))


@dataclass
class CharacterFamily:
    q: int
    members: tuple[int, ...]  # labels, ascending
    w: float | None = None
    g: float | None = None
    f: float | None = None
    K: float | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def characters(self) -> list[DirichletCharacter]:
        ctx = modulus_context(self.q)
        return [ctx.from_label(label) for label in self.members]

    @property
    def phi_F(self) -> int:
        return len(self.members)

    @property
    def E_q(self) -> float:
        lq = math.log(self.q)
        return math.fsum(lq - math.log(chi.conductor) for chi in self.characters)

    def is_conjugation_closed(self) -> bool:
        ctx = modulus_context(self.q)
        labels = set(self.members)
        return {ctx.from_label(label).conj().label for label in labels} == labels

    def conjugate_pairs(self) -> list[tuple[DirichletCharacter, DirichletCharacter]]:
        """Each member once, paired with its conjugate (real members pair with themselves)."""
        seen, out = set(), []
        for chi in self.characters:
            if chi.label in seen:
                continue
            bar = chi.conj()
            seen.update({chi.label, bar.label})
            out.append((chi, bar))
        return out

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "members": list(self.members),
            "conductors": [chi.conductor for chi in self.characters],
            "Phi_q": self.phi_F,
            "E_q": self.E_q,
            "w": self.w,
            "g": self.g,
            "f": self.f,
            "K": self.K,
            "notes": list(self.notes),
        }

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> CharacterFamily:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        fam = cls(int(d["q"]), tuple(sorted(int(m) for m in d["members"])), d.get("w"), d.get("g"), d.get("f"), d.get("K"), list(d.get("notes", [])))
        if not fam.is_conjugation_closed():
            raise ValueError(f"{path}: family is not closed under conjugation")
        return fam


def conductor_variance(q: int) -> float:
    """(1/phi(q)) sum over chi mod q of (log q_chi - log q)^2."""
    if q < 3:
        raise ValueError("conductor variance needs q >= 3")
    ctx = modulus_context(q)
    lq = math.log(q)
    return math.fsum((math.log(chi.conductor) - lq) ** 2 for chi in ctx.characters) / ctx.phi


def primitive_count(d: int) -> int:
    """Number of primitive characters mod d (multiplicative in d)."""
    out = 1
    for p, k in modulus_context(d).factorization:
        if k == 1:
            out *= p - 2
        else:
            out *= p ** (k - 2) * (p - 1) ** 2
    return out


def conductor_variance_grouped(q: int) -> float:
    """Same statistic, grouping characters by conductor d | q."""
    if q < 3:
        raise ValueError("conductor variance needs q >= 3")
    lq = math.log(q)
    phi = modulus_context(q).phi
    return math.fsum(primitive_count(d) * (math.log(d) - lq) ** 2 for d in sympy.divisors(q)) / phi


def threshold(q: int, w: float) -> float:
    return log2(q) / w


def select_family(q: int, w: float, target_size="max") -> CharacterFamily:
    """Complex characters with |log q_chi - log q| <= w^-1 log log q, truncated in conjugate pairs.

    Pairs with the largest conductor are kept first, ties broken by the
    smaller label of the pair.
    """
    if q < 3:
        raise ValueError("families need q >= 3")
    if not 0 < w <= 1:
        raise ValueError("w must lie in (0, 1]")
    ctx = modulus_context(q)
    lq = math.log(q)
    bound = threshold(q, w)
    survivors = [
        chi
        for chi in ctx.characters
        if not chi.is_real and abs(math.log(chi.conductor) - lq) <= bound
    ]
    pairs = {}
    for chi in survivors:
        key = min(chi.label, chi.conj().label)
        pairs[key] = (chi.conductor, key)
    ranked = sorted(pairs.values(), key=lambda item: (-item[0], item[1]))
    if target_size == "max":
        chosen = ranked
    else:
        size = int(target_size)
        if size != target_size or size % 2:
            raise ValueError(f"target size must be even, got {target_size}")
        if size > 2 * len(ranked):
            raise ValueError(f"target size {size} exceeds the {2 * len(ranked)} surviving characters")
        chosen = ranked[: size // 2]
    labels = set()
    for _, key in chosen:
        labels.update({key, ctx.from_label(key).conj().label})
    notes = []
    if bound >= lq:
        notes.append("conductor threshold is vacuous at this q (w^-1 log log q >= log q)")
    return CharacterFamily(q, tuple(sorted(labels)), w=w, notes=notes)


def full_family(q: int) -> CharacterFamily:
    """All nonprincipal characters mod q (real ones included)."""
    ctx = modulus_context(q)
    return CharacterFamily(q, tuple(chi.label for chi in ctx.characters if not chi.is_principal))


def pipeline_size(q: int, g: float | None = None, K: float = 1.0) -> int:
    phi = modulus_context(q).phi
    g = math.log(q) if g is None else g
    return 2 * math.floor(phi * g / (2 * math.log(q)) * (1 - K / log2(q) ** 2))


def pipeline_family(q: int, epsilon: float = 0.1, g: float | None = None, K: float = 1.0, f: float | None = None) -> CharacterFamily:
    """Family of size 2 floor(phi g / (2 log q) (1 - K (log log q)^-2)) with w = (log log q)^-1."""
    if q < 3:
        raise ValueError("families need q >= 3")
    size = pipeline_size(q, g, K)
    if size < 2:
        raise ValueError(f"pipeline family size {size} < 2 at q={q} (g={g}, K={K}); use a larger q or an explicit family")
    w = 1 / log2(q)
    if not 0 < w <= 1:
        raise ValueError(f"w = 1/log log q = {w} is outside (0, 1] at q={q}")
    fam = select_family(q, w, size)
    fam.g = math.log(q) if g is None else g
    fam.K = K
    fam.f = f
    fam.notes.append(f"epsilon={epsilon}")
    return fam
