"""Inhomogeneous Diophantine profiling of a point (alpha, beta) in R^{1+d}.

For each height H the profile stores

    psi(H) = min { ||q alpha + m.beta|| : 0 < |q| + |m|_1 <= H },

where ||.|| is the distance to the nearest integer.  The minimum is found by
exhaustive search over the height box, so every value comes with a witness
(q, m, p).  Nothing here decides the Diophantine property; the fit only
reports whether finite data look consistent with a power law.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientData, ZeroIndex

ZERO_TOL = 1e-12
GAMMA_CAP = 10.0
MIN_RECORDS = 5
TREND_FACTOR = 2.0
MAX_BOX = 5 * 10**8


@dataclass(frozen=True)
class TargetPoint:
    alpha: float
    beta: tuple[float, ...] = ()

    def __post_init__(self):
        beta = tuple(float(b) for b in np.atleast_1d(np.asarray(self.beta, dtype=float)))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", beta)
        if not all(math.isfinite(v) for v in (self.alpha, *beta)):
            raise ValueError("target point must have finite entries")

    @property
    def d(self) -> int:
        return len(self.beta)

    def reduced(self):
        """Fractional parts and the integer parts they were split from."""
        a_int = math.floor(self.alpha)
        b_int = [math.floor(b) for b in self.beta]
        return self.alpha - a_int, [b - k for b, k in zip(self.beta, b_int)], a_int, b_int


def _nearest(x):
    p = np.rint(x)
    dist = np.abs(x - p)
    return np.where(dist < ZERO_TOL, 0.0, dist), p


def residual(point: TargetPoint, q: int, m=()) -> float:
    """Distance of q alpha + m.beta to the nearest integer."""
    m = tuple(int(v) for v in np.atleast_1d(np.asarray(m, dtype=int))) if np.size(m) else ()
    m = m + (0,) * (point.d - len(m))
    if q == 0 and not any(m):
        raise ZeroIndex("(q, m) must be nonzero")
    a, b, _, _ = point.reduced()
    # same accumulation order as the vectorised search so witnesses replay exactly
    x = np.float64(q) * a
    for mk, bk in zip(m, b):
        x = x + np.float64(mk) * bk
    return float(_nearest(x)[0])


def _witness_p(point: TargetPoint, q: int, m) -> int:
    a, b, a_int, b_int = point.reduced()
    x = np.float64(q) * a
    for mk, bk in zip(m, b):
        x = x + np.float64(mk) * bk
    return int(np.rint(x)) + q * a_int + sum(mk * k for mk, k in zip(m, b_int))


@dataclass
class DiophantineProfile:
    point: TargetPoint
    H_max: int
    psi: np.ndarray  # psi[H - 1] for H = 1..H_max
    witness: np.ndarray  # (H_max, 1 + d) integer (q, m) realising psi[H - 1]
    records: list = field(default_factory=list)  # (H, psi, q, m, p) at strict decreases
    fit: dict | None = None

    def table(self) -> dict[int, float]:
        return {h + 1: float(v) for h, v in enumerate(self.psi)}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["H", "psi", "q", "m", "p"])
        rec_at = {r[0]: r for r in self.records}
        for h in range(1, self.H_max + 1):
            r = rec_at.get(h)
            if r is None:
                writer.writerow([h, f"{self.psi[h - 1]:.17g}", "", "", ""])
            else:
                writer.writerow([h, f"{r[1]:.17g}", r[2], " ".join(map(str, r[3])), r[4]])
        return buf.getvalue()


def _height_minima(point: TargetPoint, H_max: int):
    """Minimum residual at each exact height 1..H_max with its (q, m) witness.

    (q, m) and (-q, -m) give the same residual, so q >= 0 suffices, and for
    q = 0 the first nonzero m-coordinate is taken positive.  The last
    m-coordinate is scanned as a vector.
    """
    d = point.d
    a, b, _, _ = point.reduced()
    best = np.full(H_max + 1, np.inf)
    wit = np.zeros((H_max + 1, 1 + d), dtype=np.int64)

    def update(used, j, vals, q, prefix, signs):
        hs = used + j
        better = vals < best[hs]
        if np.any(better):
            hs = hs[better]
            best[hs] = vals[better]
            wit[hs, 0] = q
            for k, v in enumerate(prefix):
                wit[hs, 1 + k] = v
            wit[hs, d] = (signs * j)[better]

    if d == 0:
        q = np.arange(1, H_max + 1)
        vals, _ = _nearest(q.astype(np.float64) * a)
        best[1:] = vals
        wit[1:, 0] = q
        return best[1:], wit[1:]

    for q in range(0, H_max + 1):
        budget = H_max - q
        for prefix in itertools.product(range(-budget, budget + 1), repeat=d - 1):
            used = q + sum(abs(v) for v in prefix)
            if used > H_max:
                continue
            positive_only = False
            if q == 0:
                nz = [v for v in prefix if v != 0]
                if nz and nz[0] < 0:
                    continue
                positive_only = not nz
            j = np.arange(1 if positive_only else 0, H_max - used + 1, dtype=np.int64)
            if not len(j):
                continue
            x = np.float64(q) * a
            for mk, bk in zip(prefix, b[:-1]):
                x = x + np.float64(mk) * bk
            jf = j.astype(np.float64)
            vp, _ = _nearest(x + jf * b[-1])
            if positive_only:
                update(used, j, vp, q, prefix, np.ones_like(j))
                continue
            vn, _ = _nearest(x + (-jf) * b[-1])
            neg = vn < vp
            update(used, j, np.where(neg, vn, vp), q, prefix, np.where(neg, -1, 1))
    return best[1:], wit[1:]


def profile(point: TargetPoint, H_max: int) -> DiophantineProfile:
    if H_max < 1:
        raise ValueError("H_max must be >= 1")
    if (2 * H_max + 1) ** (point.d + 1) > MAX_BOX * 2 ** (point.d + 1):
        raise ValueError(f"height box for H_max={H_max}, d={point.d} exceeds the search budget")
    at_height, wit_h = _height_minima(point, H_max)
    psi = np.minimum.accumulate(at_height)
    witness = np.empty_like(wit_h)
    records = []
    cur = math.inf
    for h in range(H_max):
        if at_height[h] < cur:
            cur = at_height[h]
            witness[h] = wit_h[h]
            q, m = int(wit_h[h, 0]), tuple(int(v) for v in wit_h[h, 1:])
            records.append((h + 1, float(cur), q, m, _witness_p(point, q, m)))
        else:
            witness[h] = witness[h - 1]
    return DiophantineProfile(point, H_max, psi, witness, records)


def fit_exponent(prof: DiophantineProfile, gamma_cap: float = GAMMA_CAP, min_records: int = MIN_RECORDS,
                 trend_factor: float = TREND_FACTOR):
    """Least-squares fit psi ~ C H^{-gamma} on the record minima.

    Returns (C, gamma, classification).  A profile touching zero is
    'resonant' without a fit (C = gamma = nan).
    """
    recs = prof.records
    if any(r[1] == 0.0 for r in recs):
        prof.fit = {"C": math.nan, "gamma": math.nan, "classification": "resonant"}
        return math.nan, math.nan, "resonant"
    if len(recs) < min_records:
        raise InsufficientData(f"need >= {min_records} record minima, have {len(recs)}")
    x = np.log([r[0] for r in recs])
    y = np.log([r[1] for r in recs])
    slope, intercept = np.polyfit(x, y, 1)
    gamma, C = -slope, math.exp(intercept)
    half = len(recs) // 2
    tail_gamma = -np.polyfit(x[half:], y[half:], 1)[0] if len(recs) - half >= 3 else gamma
    suspect = gamma > gamma_cap or tail_gamma > max(trend_factor * gamma, gamma + trend_factor)
    cls = "liouville-suspect" if suspect else "diophantine-consistent"
    prof.fit = {
        "C": C,
        "gamma": float(gamma),
        "tail_gamma": float(tail_gamma),
        "classification": cls,
        "n_records": len(recs),
        "gamma_cap": gamma_cap,
        "min_records": min_records,
        "trend_factor": trend_factor,
    }
    return C, float(gamma), cls


def convergent_denominators(x: float, n_terms: int = 40, q_max: int | None = None) -> list[int]:
    """Denominators of the continued-fraction convergents of x (float expansion)."""
    qs = []
    q_prev, q = 1, 0
    frac = x
    for _ in range(n_terms):
        a = math.floor(frac)
        q_prev, q = q, a * q + q_prev
        if q_max is not None and q > q_max:
            break
        qs.append(q)
        rem = frac - a
        if rem < 1e-15:
            break
        frac = 1.0 / rem
    return qs
