"""Variances of primes in progressions, directly and through characters.

    G(x; q)   = sum_{(a,q)=1} (theta(x; q, a) - x/phi(q))^2
    V_L(x; q) = sum_{(a,q)=1} (psi(x; q, a) - psi_q(x)/phi(q))^2

where psi_q(x) is the sum of Lambda(n) over n <= x coprime to q.  Their
character-side forms are

    G = (1/phi) sum_chi |theta(x, chi) - [chi = chi0] x|^2,
    V = (1/phi) sum_{chi != chi0} |psi(x, chi)|^2.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .characters import character_group, euler_phi
from .primes import CharacterSum, PrimeTally, character_sum, sieve_tallies

SCAN_COLUMNS = ["q", "x", "G", "V", "hooley_ratio", "flag"]
WINDOW_COLUMNS = ["Q", "x", "window_average"]
SCAN_SCHEMA_VERSION = 1


@dataclass
class VarianceReport:
    q: int
    x: float
    G: float
    V: float
    hooley_ratio: float
    parseval_residual_G: float | None = None
    parseval_residual_V: float | None = None
    per_character_contributions: dict[int, float] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)


def _flags(q: int, x: float) -> list[str]:
    return ["x<q"] if x < q else []


def variance_direct(tally: PrimeTally) -> VarianceReport:
    q, x = tally.q, tally.x
    if q < 3:
        raise ValueError("variance needs q >= 3")
    phi = euler_phi(q)
    units = tally.units
    mean = x / phi
    G = math.fsum((tally.theta_by_residue[a] - mean) ** 2 for a in units)
    psi_total = math.fsum(tally.psi_by_residue[a] for a in units)
    mean_psi = psi_total / phi
    V = math.fsum((tally.psi_by_residue[a] - mean_psi) ** 2 for a in units)
    return VarianceReport(q, x, G, V, G / (x * math.log(q)), flags=_flags(q, x))


def variance_parseval(sums: list[CharacterSum]) -> VarianceReport:
    if not sums:
        raise ValueError("no character sums given")
    q, x = sums[0].chi.modulus, sums[0].x
    phi = euler_phi(q)
    if any(s.chi.modulus != q or s.x != x for s in sums):
        raise ValueError("character sums must share modulus and x")
    labels = {s.chi.label for s in sums}
    if len(sums) != phi or len(labels) != phi:
        raise ValueError(f"need all {phi} characters mod {q}, got {len(labels)} distinct")
    contrib = {}
    v_terms = []
    for s in sorted(sums, key=lambda s: s.chi.label):
        shift = x if s.chi.is_principal else 0.0
        contrib[s.chi.label] = abs(s.theta - shift) ** 2 / phi
        if not s.chi.is_principal:
            v_terms.append(abs(s.psi) ** 2 / phi)
    G = math.fsum(contrib.values())
    V = math.fsum(v_terms)
    ratio = G / (x * math.log(q)) if q >= 3 else float("nan")
    return VarianceReport(q, x, G, V, ratio, per_character_contributions=contrib, flags=_flags(q, x))


def character_sums(tally: PrimeTally) -> list[CharacterSum]:
    return [character_sum(chi, tally) for chi in character_group(tally.q)]


def variance_report(tally: PrimeTally, parseval_check: bool = True) -> VarianceReport:
    """Direct report, with the character-side residuals filled in when requested."""
    rep = variance_direct(tally)
    if parseval_check:
        par = variance_parseval(character_sums(tally))
        rep.parseval_residual_G = abs(rep.G - par.G)
        rep.parseval_residual_V = abs(rep.V - par.V)
        rep.per_character_contributions = par.per_character_contributions
    return rep


def relative_residuals(rep: VarianceReport) -> tuple[float, float]:
    return (
        rep.parseval_residual_G / rep.G if rep.G else rep.parseval_residual_G,
        rep.parseval_residual_V / rep.V if rep.V else rep.parseval_residual_V,
    )


def log3(x: float) -> float:
    return math.log(math.log(math.log(x)))


def hooley_scan(q_range, x_grid, out=None, workers: int = 1) -> dict:
    """G, V and Hooley ratio per (q, x), plus windowed averages over Q < q <= 2Q.

    The window average is (1/Q) sum_{Q < q <= 2Q} G(x; q) / (x (log_3 x)^2),
    reported for every Q whose window lies inside q_range.
    """
    qs = sorted(set(int(q) for q in q_range))
    xs = sorted(set(x_grid))
    rows = []
    G_at: dict[tuple[int, float], float] = {}
    for x in xs:
        tallies = sieve_tallies(x, qs, workers) if qs else {}
        for q in qs:
            rep = variance_direct(tallies[q])
            G_at[(q, x)] = rep.G
            rows.append({"q": q, "x": x, "G": rep.G, "V": rep.V, "hooley_ratio": rep.hooley_ratio, "flag": ";".join(rep.flags)})
    windows = []
    qset = set(qs)
    for Q in range(1, max(qs, default=0) // 2 + 1):
        window = range(Q + 1, 2 * Q + 1)
        if not all(q in qset for q in window) or Q + 1 < 3:
            continue
        for x in xs:
            if math.log(math.log(x)) <= 1:
                continue  # log_3 x not positive
            avg = math.fsum(G_at[(q, x)] for q in window) / Q / (x * log3(x) ** 2)
            windows.append({"Q": Q, "x": x, "window_average": avg})
    if out is not None:
        write_scan_csv(rows, out)
        if windows:
            write_window_csv(windows, Path(out).with_suffix(".windows.csv"))
    return {"rows": rows, "windows": windows}


def write_scan_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# hooley-scan schema {SCAN_SCHEMA_VERSION}\n")
        writer = csv.DictWriter(fh, SCAN_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({**r, "G": repr(r["G"]), "V": repr(r["V"]), "hooley_ratio": repr(r["hooley_ratio"])})


def write_window_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# hooley-scan windows schema {SCAN_SCHEMA_VERSION}\n")
        writer = csv.DictWriter(fh, WINDOW_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({**r, "window_average": repr(r["window_average"])})


def parseval_grid(q_values, x_values) -> list[dict]:
    """Relative direct-vs-character residuals of G and V over a grid."""
    out = []
    for x in x_values:
        tallies = sieve_tallies(x, list(q_values))
        for q in q_values:
            rep = variance_report(tallies[q])
            rg, rv = relative_residuals(rep)
            out.append({"q": q, "x": x, "G": rep.G, "V": rep.V, "rel_G": rg, "rel_V": rv})
    return out


def as_array(rows, key) -> np.ndarray:
    return np.array([r[key] for r in rows])
