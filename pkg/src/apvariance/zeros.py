"""Critical-line zeros of primitive Dirichlet L-functions.

Zeros are located as sign changes of the Hardy function Z(t) on a grid,
bracketed in double precision and polished with mpmath.  The count of zeros
with 0 < gamma <= T is then checked against an argument-principle count that
never looks at Z:

    N+(T) = (theta(T) + arg L(1/2 + iT) - arg L(1/2)) / pi,

with arg L continued from Re s = 3/2, where |arg L| < log zeta(3/2) < pi/2.

A ZeroSet stores the ordinates 0 <= gamma <= T of one primitive character.
Zeros at negative height are the zeros of the conjugate character.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import mpmath as mp
import numpy as np
from scipy.optimize import brentq

from .characters import DirichletCharacter, modulus_context
from .lfunc import PrecisionError, dirichlet_L_array, hardy_theta_array, hardy_Z, hardy_Z_array

log = logging.getLogger(__name__)

MODULUS_CEILING = 100
HEIGHT_CEILING = 200.0
DEFAULT_DIGITS = 25
DEFAULT_STEP = 0.05
MAX_RETRIES = 4
RVM_CONSTANT = 5.0
STORE_ENV = "APVARIANCE_ZERO_STORE"


class ZeroCountMismatch(RuntimeError):
    pass


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class CriticalZero:
    gamma: mp.mpf
    precision_digits: int
    character_label: tuple[int, int]

    def __float__(self) -> float:
        return float(self.gamma)


@dataclass
class ZeroSet:
    character_label: tuple[int, int]
    zeros: list[CriticalZero]
    height: float
    verified_count: int | None = None
    status: str = "unverified"  # verified | unverified | ingested
    diagnostics: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.zeros)

    @property
    def gammas(self) -> np.ndarray:
        return np.array([float(z.gamma) for z in self.zeros])

    @property
    def gammas_mp(self) -> list:
        return [z.gamma for z in self.zeros]

    @property
    def digits(self) -> int:
        return min((z.precision_digits for z in self.zeros), default=DEFAULT_DIGITS)

    def truncated(self, T: float) -> ZeroSet:
        if T > self.height + 1e-12:
            raise ValueError(f"zero set covers height {self.height}, asked for {T}")
        kept = [z for z in self.zeros if z.gamma <= T]
        count = len(kept) if self.status == "verified" else None
        return ZeroSet(self.character_label, kept, T, count, self.status, dict(self.diagnostics))

    def negated_for_conjugate(self) -> list:
        return [mp.fneg(z.gamma, exact=True) for z in self.zeros]


# ---------------------------------------------------------------------------
# counting


def rvm_main_term(T: float, q: int) -> float:
    """(T/pi) log(q T / (2 pi e)): main term for zeros with |gamma| <= T."""
    return T / math.pi * math.log(q * T / (2 * math.pi * math.e))


def rvm_error_bound(T: float, q: int, constant: float = RVM_CONSTANT) -> float:
    return constant * math.log(q * (T + 2))


def _continued_arg(chi: DirichletCharacter, path: np.ndarray, max_depth: int = 12) -> float:
    """Continuous change of arg L along the polyline through ``path`` (complex s)."""
    values = dirichlet_L_array(chi, path)
    total = 0.0
    for i in range(len(path) - 1):
        total += _segment_arg(chi, path[i], path[i + 1], values[i], values[i + 1], max_depth)
    return total


def _segment_arg(chi, s0, s1, v0, v1, depth) -> float:
    step = np.angle(v1 / v0)
    if abs(step) < math.pi / 8 or depth == 0:
        if depth == 0 and abs(step) >= math.pi / 8:
            log.warning("argument tracking hit the subdivision limit near s=%s", s0)
        return float(step)
    mid = (s0 + s1) / 2
    vm = dirichlet_L_array(chi, [mid])[0]
    return _segment_arg(chi, s0, mid, v0, vm, depth - 1) + _segment_arg(chi, mid, s1, vm, v1, depth - 1)


def argument_principle_count(chi: DirichletCharacter, T: float, samples_per_unit: int = 8) -> int:
    """Number of zeros of L(s, chi) with 0 < Im rho <= T, from the argument principle."""
    if not chi.is_primitive:
        raise ValueError("argument principle count needs a primitive character")
    if T <= 0:
        return 0
    if abs(hardy_Z_array(chi, [T])[0]) < 1e-10:
        raise PrecisionError(f"T={T} sits on a zero; move the height slightly")
    n = max(8, int(samples_per_unit))
    top = 1.5 + 1j * T - np.linspace(0.0, 1.0, n + 1)
    arg_top = float(np.angle(dirichlet_L_array(chi, [1.5 + 1j * T])[0])) + _continued_arg(chi, top)
    theta = float(hardy_theta_array(chi, T))
    if chi.modulus == 1:
        # pole at s = 1: use N(T) = theta(T)/pi + 1 + arg zeta(1/2 + iT)/pi
        value = theta / math.pi + 1 + arg_top / math.pi
    else:
        bottom = np.linspace(1.5, 0.5, n + 1).astype(complex)
        arg_bottom = float(np.angle(dirichlet_L_array(chi, [1.5])[0])) + _continued_arg(chi, bottom)
        value = (theta + arg_top - arg_bottom) / math.pi
    count = round(value)
    if abs(value - count) > 0.05:
        raise PrecisionError(f"argument principle count not near an integer: {value}")
    return int(count)


# ---------------------------------------------------------------------------
# locating zeros


def _refine(chi: DirichletCharacter, a: float, b: float, digits: int):
    f = lambda t: float(hardy_Z_array(chi, [t])[0])
    root = brentq(f, a, b, xtol=1e-14, rtol=1e-15, maxiter=200)
    if digits <= 14:
        return mp.mpf(root)
    with mp.workdps(digits + 10):
        target = mp.mpf(10) ** (-digits - 3)
        x0, x1 = mp.mpf(root), mp.mpf(root) + mp.mpf("1e-13")
        f0, f1 = hardy_Z(chi, x0, digits), hardy_Z(chi, x1, digits)
        for _ in range(20):
            if f1 == f0:
                break
            x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
            x0, f0 = x1, f1
            x1 = x2
            if abs(x1 - x0) < target:
                break
            f1 = hardy_Z(chi, x1, digits)
        else:
            raise PrecisionError(f"secant refinement stalled near t={root}")
        if not a - 1e-9 <= x1 <= b + 1e-9:
            raise PrecisionError(f"refined zero {x1} left its bracket [{a}, {b}]")
        return +x1


def _scan(chi: DirichletCharacter, T: float, step: float) -> list[tuple[float, float]]:
    n = max(2, math.ceil(T / step))
    grid = np.linspace(0.0, T, n + 1)
    z = hardy_Z_array(chi, grid)
    brackets = []
    for i in range(n):
        if z[i] == 0.0:
            raise PrecisionError(f"Z vanishes on a grid point t={grid[i]}")
        if z[i] * z[i + 1] < 0:
            brackets.append((float(grid[i]), float(grid[i + 1])))
    return brackets


def find_zeros(
    chi: DirichletCharacter,
    T: float,
    digits: int = DEFAULT_DIGITS,
    step: float = DEFAULT_STEP,
    retries: int = MAX_RETRIES,
    height_ceiling: float = HEIGHT_CEILING,
    modulus_ceiling: int = MODULUS_CEILING,
) -> ZeroSet:
    """All zeros 0 <= gamma <= T of L(s, chi), chi primitive.

    The grid step is halved after a count mismatch, at most ``retries`` times;
    a final mismatch returns status "unverified" with a diagnostic.
    """
    if not chi.is_primitive:
        raise ValueError("find_zeros expects a primitive character; use chi.primitive()")
    if chi.modulus > modulus_ceiling:
        raise ValueError(f"conductor {chi.modulus} above the modulus ceiling {modulus_ceiling}")
    if T > height_ceiling:
        raise ValueError(f"height {T} above the height ceiling {height_ceiling}")
    label = chi.key
    if T <= 0:
        return ZeroSet(label, [], T, 0, "verified")
    expected = argument_principle_count(chi, T)
    diagnostics: dict = {"argument_principle_count": expected}
    for attempt in range(retries + 1):
        brackets = _scan(chi, T, step)
        diagnostics.update(grid_step=step, attempts=attempt + 1, sign_changes=len(brackets))
        if len(brackets) == expected:
            break
        log.info("chi=%s T=%s: %d sign changes vs %d expected, halving step", label, T, len(brackets), expected)
        step /= 2
    zeros = [CriticalZero(_refine(chi, a, b, digits), digits, label) for a, b in brackets]
    z_at_half = abs(float(hardy_Z_array(chi, [0.0])[0]))
    diagnostics["abs_L_half"] = z_at_half
    status = "verified" if len(zeros) == expected else "unverified"
    if status != "verified":
        diagnostics["problem"] = (
            f"{len(zeros)} sign changes against {expected} from the argument principle; "
            "a close pair may have been missed, retry with a finer grid"
        )
    return ZeroSet(label, zeros, float(T), expected, status, diagnostics)


def rvm_check(zs: ZeroSet, constant: float = RVM_CONSTANT) -> dict:
    """Compare #zeros in (0, T] with half the Riemann-von Mangoldt main term."""
    q = zs.character_label[0]
    T = zs.height
    predicted = 0.5 * rvm_main_term(T, q)
    bound = rvm_error_bound(T, q, constant)
    return {
        "count": len(zs),
        "predicted": predicted,
        "deviation": len(zs) - predicted,
        "bound": bound,
        "ok": abs(len(zs) - predicted) <= bound,
    }


# ---------------------------------------------------------------------------
# file format: CSV with header q,label,gamma,digits sorted by (q, label, gamma)

HEADER = ["q", "label", "gamma", "digits"]


def _gamma_str(g, digits: int) -> str:
    with mp.workdps(digits + 5):
        return mp.nstr(g, digits + 3, strip_zeros=False, min_fixed=-mp.inf, max_fixed=mp.inf)


def export_zeros(zero_sets, path) -> None:
    if isinstance(zero_sets, ZeroSet):
        zero_sets = [zero_sets]
    rows = []
    for zs in zero_sets:
        q, label = zs.character_label
        for z in zs.zeros:
            rows.append((q, label, z.gamma, z.precision_digits))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HEADER)
        for q, label, g, d in rows:
            writer.writerow([q, label, _gamma_str(g, d), d])
    os.replace(tmp, path)


def ingest_zero_table(path, height: float | None = None) -> dict[tuple[int, int], ZeroSet]:
    """Read a zero CSV into ZeroSets (status "ingested"), validating the schema."""
    sets: dict[tuple[int, int], list[CriticalZero]] = {}
    last = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != HEADER:
            raise SchemaError(f"{path}:1: expected header {','.join(HEADER)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise SchemaError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                q, label, digits = int(row[0]), int(row[1]), int(row[3])
                with mp.workdps(max(digits, 15) + 10):
                    gamma = mp.mpf(row[2])
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: {exc}") from None
            if gamma < 0:
                raise SchemaError(f"{path}:{lineno}: negative ordinate")
            if q < 1 or not 0 <= label < modulus_context(q).phi:
                raise SchemaError(f"{path}:{lineno}: no character mod {q} with label {label}")
            key = (q, label, gamma)
            if last is not None and key <= last:
                raise SchemaError(f"{path}:{lineno}: rows not sorted by (q, label, gamma) or duplicated")
            last = key
            sets.setdefault((q, label), []).append(CriticalZero(gamma, digits, (q, label)))
    out = {}
    for key, zeros in sets.items():
        h = height if height is not None else float(zeros[-1].gamma)
        out[key] = ZeroSet(key, zeros, h, None, "ingested")
    return out


def ingest_zeros(path, character: tuple[int, int] | None = None, height: float | None = None) -> ZeroSet:
    table = ingest_zero_table(path, height)
    if character is not None:
        return table[character]
    if len(table) != 1:
        raise SchemaError(f"{path}: holds {len(table)} characters; pass character=(q, label)")
    return next(iter(table.values()))


def verify_ingested(zs: ZeroSet, tol: float = 1e-6, digits: int = 15) -> ZeroSet:
    """Recompute zeros locally and upgrade an ingested set to verified on agreement."""
    chi = modulus_context(zs.character_label[0]).from_label(zs.character_label[1])
    local = find_zeros(chi, zs.height, digits=digits)
    if local.status != "verified" or len(local) != len(zs):
        raise ZeroCountMismatch(f"{zs.character_label}: {len(zs)} ingested vs {len(local)} recomputed")
    worst = max((abs(float(a) - float(b)) for a, b in zip(zs.gammas, local.gammas)), default=0.0)
    if worst > tol:
        raise ZeroCountMismatch(f"{zs.character_label}: ordinates differ by {worst:g}")
    return ZeroSet(zs.character_label, zs.zeros, zs.height, local.verified_count, "verified", {"max_deviation": worst})


# ---------------------------------------------------------------------------
# persistent store


class ZeroStore:
    """Directory of verified zero sets, one CSV plus JSON sidecar per character.

    Writes go through a temporary file and an atomic rename, so concurrent
    readers never observe a partial file (single writer, many readers).
    """

    def __init__(self, root=None):
        root = root or os.environ.get(STORE_ENV) or Path.home() / ".cache" / "apvariance" / "zeros"
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._memory: dict[tuple[int, int], ZeroSet] = {}

    def _paths(self, key):
        stem = f"zeros_q{key[0]}_l{key[1]}"
        return self.root / f"{stem}.csv", self.root / f"{stem}.json"

    def load(self, key) -> ZeroSet | None:
        if key in self._memory:
            return self._memory[key]
        csv_path, meta_path = self._paths(key)
        if not (csv_path.exists() and meta_path.exists()):
            return None
        meta = json.loads(meta_path.read_text())
        if meta.get("sha256") != _sha256(csv_path):
            log.warning("zero store entry %s fails its checksum; ignoring", key)
            return None
        zs = ingest_zeros(csv_path, key, meta["height"]) if csv_path.stat().st_size > len(",".join(HEADER)) + 1 else ZeroSet(key, [], meta["height"])
        zs.status = meta["status"]
        zs.verified_count = meta.get("verified_count")
        zs.diagnostics = meta.get("diagnostics", {})
        self._memory[key] = zs
        return zs

    def save(self, zs: ZeroSet) -> None:
        csv_path, meta_path = self._paths(zs.character_label)
        export_zeros(zs, csv_path)
        meta = {
            "q": zs.character_label[0],
            "label": zs.character_label[1],
            "height": zs.height,
            "status": zs.status,
            "verified_count": zs.verified_count,
            "digits": zs.digits,
            "count": len(zs),
            "diagnostics": zs.diagnostics,
            "sha256": _sha256(csv_path),
        }
        tmp = meta_path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(meta, indent=1, sort_keys=True))
        os.replace(tmp, meta_path)
        self._memory[zs.character_label] = zs

    def get(self, chi: DirichletCharacter, T: float, digits: int = DEFAULT_DIGITS, **kwargs) -> ZeroSet:
        """Verified zeros of chi* (the primitive character inducing chi) up to T."""
        prim = chi.primitive()
        have = self.load(prim.key)
        if have is not None and have.status == "verified" and have.height >= T and have.digits >= digits:
            return have.truncated(T)
        zs = find_zeros(prim, T, digits=digits, **kwargs)
        if zs.status == "verified":
            self.save(zs)
        return zs

    def fingerprint(self, key) -> str | None:
        csv_path, _ = self._paths(key)
        return _sha256(csv_path) if csv_path.exists() else None


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def ordinates_both_signs(store: ZeroStore, chi: DirichletCharacter, T: float, digits: int = DEFAULT_DIGITS) -> list:
    """Ordinates of chi* in [-T, T]: its own nonnegative zeros plus negated zeros of conj(chi*)."""
    prim = chi.primitive()
    pos = store.get(prim, T, digits).gammas_mp
    if prim.is_real:
        neg = [mp.fneg(g, exact=True) for g in pos]
    else:
        neg = [mp.fneg(g, exact=True) for g in store.get(prim.conj(), T, digits).gammas_mp]
    return sorted(neg) + pos


# ---------------------------------------------------------------------------
# multiplicity at s = 1/2 and the Fejer statistic


def multiplicity_at_half(zs: ZeroSet) -> int:
    threshold = mp.mpf(10) ** (-zs.digits)
    return sum(1 for z in zs.zeros if abs(z.gamma) < threshold)


def fejer_kernel(x):
    """(sin(2 pi x) / (2 pi x))^2 with value 1 at x = 0."""
    x = np.asarray(x, dtype=float)
    return np.sinc(2 * x) ** 2


def inverse_square_tail(q: int, T: float, constant: float = RVM_CONSTANT) -> float:
    """Upper bound for sum over zeros with |gamma| > T of 1/gamma^2.

    Partial summation with N(t) <= (t/pi) log(qt/2pi e) + c log(q(t+2)) and
    N(T) >= (T/pi) log(qT/2pi e) - c log(q(T+2)).
    """
    if T <= 2 * math.pi * math.e / q:
        raise ValueError("tail bound needs q T > 2 pi e")
    A = math.log(q * T / (2 * math.pi * math.e))
    main_integral = (A + 1) / (math.pi * T)  # int_T^inf (t/pi) log(qt/2pi e) t^-3 dt
    B = math.log(q * T * (1 + 2 / T))
    err_integral = constant * (B / (2 * T * T) + 1 / (4 * T * T))  # int c log(q(t+2)) t^-3 dt
    lower_NT = max(0.0, rvm_main_term(T, q) - rvm_error_bound(T, q, constant))
    return 2 * (main_integral + err_integral) - lower_NT / (T * T)


def _tail_any_height(q: int, T: float) -> float:
    """inverse_square_tail extended below q T = 2 pi e by counting zeros up to a safe height."""
    T0 = 2 * math.pi * math.e / q + 1
    if T >= T0:
        return inverse_square_tail(q, T)
    if T <= 0:
        return math.inf
    count = rvm_main_term(T0, q) + rvm_error_bound(T0, q)
    return inverse_square_tail(q, T0) + 2 * max(count, 0.0) / T**2


def fejer_density(q: int, store: ZeroStore, T: float, digits: int = DEFAULT_DIGITS) -> dict:
    """sum over chi != chi0 mod q of sum_{|gamma| <= T} f((log q / 2 pi) gamma), with tail bound."""
    lq = math.log(q)
    total = 0.0
    tail = 0.0
    per_character = {}
    for chi in modulus_context(q).characters:
        if chi.is_principal:
            continue
        pos = store.get(chi, T, digits).gammas
        neg = store.get(chi.primitive().conj(), T, digits).gammas
        value = float(np.sum(fejer_kernel(lq / (2 * math.pi) * pos)) + np.sum(fejer_kernel(lq / (2 * math.pi) * neg)))
        per_character[chi.label] = value
        total += value
        tail += _tail_any_height(chi.conductor, T) / lq**2
    phi = modulus_context(q).phi
    return {"q": q, "height": T, "density": total, "tail_bound": tail, "half_phi": phi / 2, "per_character": per_character}
