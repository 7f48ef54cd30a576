"""Suspension flows over a torus skew product and their correlation functions.

Phase space: (x, theta, u) with 0 <= u < r(x), glued by
(x, theta, r(x)) ~ (sigma x, theta + Theta(x), 0).  The invariant measure is
mu x Haar x Leb / int r dmu, with Haar on T^d normalised to mass one, so a test
function E = sum_m e_m(x, u) e^{i m.theta} has e_m = int E e^{-i m.theta} dtheta.

Two independent routes to the Laplace transform of a Fourier-mode
correlation are provided: the transfer-operator series (mode_series_laplace)
and Monte-Carlo correlations followed by numerical quadrature
(correlation_mc + laplace_numeric).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson, simpson

from .errors import GridTooCoarse, GridTooShort, InsufficientData, NonConvergent, NonPositiveRoof, TailBoundTooLarge
from .sft import GibbsData, LocallyConstantFn, sample_blocks
from .transfer import TwistParams, skew_values, twisted_matrix

POINTS_PER_UNIT = 128
MIN_POINTS = 129
MAX_SPACING = 0.05
TAIL_EPS = 1e-6


@dataclass(eq=False)
class SuspensionSystem:
    gibbs: GibbsData
    roof: LocallyConstantFn
    skew: LocallyConstantFn

    def __post_init__(self):
        r = np.asarray(self.roof.values)
        if np.iscomplexobj(r):
            if np.any(r.imag != 0):
                raise NonPositiveRoof("roof must be real")
            r = r.real
        if np.any(r <= 0):
            raise NonPositiveRoof(f"roof must be strictly positive, min = {r.min()}")

    @property
    def sft(self):
        return self.gibbs.sft

    @property
    def d(self) -> int:
        v = self.skew.values
        return 1 if v.ndim == 1 else v.shape[1]

    @property
    def depth(self) -> int:
        return max(self.roof.depth, self.skew.depth, self.gibbs.normalized.depth, self.gibbs.block_depth)

    @property
    def r_min(self) -> float:
        return float(np.min(np.real(self.roof.values)))

    @property
    def r_max(self) -> float:
        return float(np.max(np.real(self.roof.values)))

    @property
    def mean_roof(self) -> float:
        return float(np.real(self.gibbs.integrate(self.roof)))

    def roof_at(self, depth: int) -> np.ndarray:
        return np.real(self.roof.lift(depth).values)

    def skew_at(self, depth: int) -> np.ndarray:
        return skew_values(self.skew, depth)


# ---------------------------------------------------------------------------
# test functions


@dataclass(frozen=True, eq=False)
class ModeCoefficient:
    """e_m(x, u) as a sum of c(x) u^k e^{i omega u} terms, or as per-cylinder u-samples.

    terms: tuple of (k, omega, LocallyConstantFn).  grid: LocallyConstantFn whose
    values have shape (K, n) holding e_m at u_j = j r(x) / (n - 1).
    """

    terms: tuple = ()
    grid: LocallyConstantFn | None = None

    @property
    def depth(self) -> int:
        ds = [t[2].depth for t in self.terms]
        if self.grid is not None:
            ds.append(self.grid.depth)
        return max(ds) if ds else 1

    def conj(self) -> "ModeCoefficient":
        terms = tuple((k, -w, c.conj()) for k, w, c in self.terms)
        grid = self.grid.conj() if self.grid is not None else None
        return ModeCoefficient(terms, grid)

    def evaluate(self, sft, depth: int, idx: np.ndarray, u: np.ndarray, roof: np.ndarray) -> np.ndarray:
        """Values at depth-words idx (into sft.words(depth)) and heights u; roof holds r at those words."""
        out = np.zeros(np.broadcast(idx, u).shape, dtype=complex)
        for k, w, c in self.terms:
            cv = c.lift(depth).values[idx]
            out += cv * (u**k if k else 1.0) * (np.exp(1j * w * u) if w else 1.0)
        if self.grid is not None:
            g = self.grid.lift(depth).values[idx]
            n = g.shape[-1]
            pos = np.clip(u / roof * (n - 1), 0, n - 1)
            j = np.minimum(pos.astype(np.int64), n - 2)
            frac = pos - j
            lo = np.take_along_axis(g, j[..., None], axis=-1)[..., 0]
            hi = np.take_along_axis(g, (j + 1)[..., None], axis=-1)[..., 0]
            out += (1 - frac) * lo + frac * hi
        return out


class TestFunction:
    """Finite Fourier sum E(x, theta, u) = sum_m e_m(x, u) e^{i m.theta}."""

    __test__ = False  # keep pytest from collecting the class

    def __init__(self, modes: dict, d: int = 1):
        self.d = d
        self.modes: dict[tuple, ModeCoefficient] = {}
        for m, coef in modes.items():
            m = tuple(int(v) for v in np.atleast_1d(m))
            if len(m) != d:
                raise ValueError(f"mode {m} does not have dimension {d}")
            self.modes[m] = coef

    @property
    def depth(self) -> int:
        return max((c.depth for c in self.modes.values()), default=1)

    def mode(self, m):
        return self.modes.get(tuple(int(v) for v in np.atleast_1d(m)))

    def only_mode(self, m) -> "TestFunction":
        m = tuple(int(v) for v in np.atleast_1d(m))
        return TestFunction({m: self.modes[m]} if m in self.modes else {}, self.d)

    def with_conjugates(self) -> "TestFunction":
        """Add e_{-m} = conj(e_m) for every mode lacking its partner, making E real."""
        modes = dict(self.modes)
        for m, c in self.modes.items():
            neg = tuple(-v for v in m)
            if neg not in modes:
                modes[neg] = c.conj()
        return TestFunction(modes, self.d)

    def retrivialize(self, v: LocallyConstantFn) -> "TestFunction":
        """E(x, theta - v(x), u): coefficients pick up e^{-i m.v(x)}."""
        out = {}
        for m, c in self.modes.items():
            D = max(c.depth, v.depth)
            vv = skew_values(v, D) @ np.asarray(m, dtype=float)
            phase = LocallyConstantFn(v.sft, D, np.exp(-1j * vv))
            terms = tuple((k, w, cf.lift(D) * phase) for k, w, cf in c.terms)
            grid = None
            if c.grid is not None:
                g = c.grid.lift(D).values * phase.values[:, None]
                grid = LocallyConstantFn(v.sft, D, g)
            out[m] = ModeCoefficient(terms, grid)
        return TestFunction(out, self.d)

    def evaluate(self, sft, depth: int, idx, theta, u, roof) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        out = np.zeros(np.broadcast(idx, u).shape, dtype=complex)
        for m, c in self.modes.items():
            phase = np.exp(1j * (theta @ np.asarray(m, dtype=float)))
            out += c.evaluate(sft, depth, idx, u, roof) * phase
        return out


def closed_form_mode(sft, terms) -> ModeCoefficient:
    """terms: iterable of (k, omega, coefficient) with coefficient a scalar or LocallyConstantFn."""
    out = []
    for k, w, c in terms:
        if not isinstance(c, LocallyConstantFn):
            c = LocallyConstantFn.constant(sft, complex(c))
        out.append((int(k), float(w), LocallyConstantFn(sft, c.depth, c.values.astype(complex))))
    return ModeCoefficient(tuple(out))


def grid_mode(system: SuspensionSystem, depth: int, func, n: int | None = None) -> ModeCoefficient:
    """Sample func(word_tuple, u_array) on per-cylinder grids of [0, r]."""
    sft = system.sft
    D = max(depth, system.roof.depth)
    r = system.roof_at(D)
    if n is None:
        n = max(MIN_POINTS, 2 * math.ceil(POINTS_PER_UNIT * r.max() / 2) + 1)
    vals = np.empty((len(r), n), dtype=complex)
    for i, w in enumerate(sft.words(D)):
        vals[i] = func(tuple(int(x) for x in w), np.linspace(0.0, r[i], n))
    return ModeCoefficient(grid=LocallyConstantFn(sft, D, vals))


# ---------------------------------------------------------------------------
# Laplace transforms of mode coefficients


def _u_integrals(k: int, z: np.ndarray, r: np.ndarray) -> np.ndarray:
    """I_k(z, r) = int_0^r u^k e^{-z u} du, elementwise."""
    z = np.asarray(z, dtype=complex) * np.ones_like(r, dtype=complex)
    r = np.asarray(r, dtype=float)
    out = np.empty(np.broadcast(z, r).shape, dtype=complex)
    zr = np.abs(z * r)
    small = zr <= k + 1.0
    if np.any(small):
        zs, rs = z[small], r[small]
        acc = np.zeros(zs.shape, dtype=complex)
        term = np.ones(zs.shape, dtype=complex)  # (-z r)^j / j!
        for j in range(80):
            acc += term / (j + k + 1)
            term = term * (-zs * rs) / (j + 1)
            if np.all(np.abs(term) < 1e-18 * np.maximum(np.abs(acc), 1e-300)):
                break
        out[small] = acc * rs ** (k + 1)
    big = ~small
    if np.any(big):
        zb, rb = z[big], r[big]
        e = np.exp(-zb * rb)
        val = (1 - e) / zb
        for j in range(1, k + 1):
            val = (j * val - rb**j * e) / zb
        out[big] = val
    return out


def mode_coefficient_laplace(system: SuspensionSystem, E: TestFunction, m, s, depth: int | None = None):
    """e_{m,s}(x) = int_0^{r(x)} e^{-s u} e_m(x, u) du as a locally constant function."""
    s = complex(s)
    coef = E.mode(m)
    D = max(system.roof.depth, coef.depth if coef else 1, depth or 1)
    sft = system.sft
    r = system.roof_at(D)
    out = np.zeros(len(r), dtype=complex)
    if coef is None:
        return LocallyConstantFn(sft, D, out)
    for k, w, c in coef.terms:
        out += c.lift(D).values * _u_integrals(k, s - 1j * w, r)
    if coef.grid is not None:
        g = coef.grid.lift(D).values
        n = g.shape[1]
        if n < max(MIN_POINTS // 2, math.ceil(64 * r.max()) + 1):
            raise ValueError(f"u-grid of {n} points is below 64 points per unit roof")
        tau = np.linspace(0.0, 1.0, n)
        u = r[:, None] * tau[None, :]
        out += simpson(np.exp(-s * u) * g, x=u, axis=1)
    return LocallyConstantFn(sft, D, out)


# ---------------------------------------------------------------------------
# transfer-operator series


@dataclass
class SeriesLaplace:
    value: complex
    boundary: complex
    series: complex
    tail_bound: float
    n_terms: int
    mean_correction: complex = 0j
    terms: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex), repr=False)

    def __complex__(self):
        return complex(self.value)


def _boundary_term(system, E, F, m, s, D):
    """Laplace transform of Delta_m: sum_w mu_w int_0^r e^{-s v} e_m(v) int_0^v e^{s u} f_{-m}(u) du dv."""
    ce, cf = E.mode(m), F.mode(tuple(-v for v in m))
    sft = system.sft
    r = system.roof_at(D)
    n = max(MIN_POINTS, 2 * math.ceil(POINTS_PER_UNIT * r.max() / 2) + 1)
    tau = np.linspace(0.0, 1.0, n)
    u = r[:, None] * tau[None, :]
    idx = np.broadcast_to(np.arange(len(r))[:, None], u.shape)
    rr = np.broadcast_to(r[:, None], u.shape)
    ev = ce.evaluate(sft, D, idx, u, rr)
    fv = cf.evaluate(sft, D, idx, u, rr)
    g = np.exp(s * u) * fv
    # cumulative_simpson is real-only
    inner = cumulative_simpson(g.real, x=u, axis=1, initial=0) + 1j * cumulative_simpson(g.imag, x=u, axis=1, initial=0)
    per_word = simpson(np.exp(-s * u) * ev * inner, x=u, axis=1)
    return complex(np.sum(system.gibbs.word_measures(D) * per_word))


def mode_series_laplace(system: SuspensionSystem, E: TestFunction, F: TestFunction, m, s,
                        N_max: int = 200, tol: float | None = None) -> SeriesLaplace:
    """Laplace transform of the mode-m correlation rho_{E_m, F_-m} at Re s > 0.

    Uses the boundary term plus the transfer-operator series, normalised by
    int r dmu so it matches correlations for the probability measure on the
    suspension; for m = 0 the product of means is removed.
    """
    s = complex(s)
    if s.real <= 0:
        raise NonConvergent(f"Re s = {s.real} <= 0")
    m = tuple(int(v) for v in np.atleast_1d(m))
    neg = tuple(-v for v in m)
    if E.mode(m) is None or F.mode(neg) is None:
        return SeriesLaplace(0j, 0j, 0j, 0.0, 0)
    D = max(system.depth, E.mode(m).depth, F.mode(neg).depth)
    e = mode_coefficient_laplace(system, E, m, s, D).values
    f = mode_coefficient_laplace(system, F, neg, -s, D).values
    mu = system.gibbs.word_measures(D)
    op = twisted_matrix(system.gibbs, system.roof, system.skew, TwistParams(s, m), depth=D)
    M = op.matrix
    terms = np.empty(N_max, dtype=complex)
    g = f
    for n in range(N_max):
        g = M @ g
        terms[n] = np.sum(mu * e * g)
    q = float(np.max(np.abs(M).sum(axis=1)))
    tail = float(np.abs(e).max() * np.abs(f).max() * q ** (N_max + 1) / (1 - q)) if q < 1 else math.inf
    boundary = _boundary_term(system, E, F, m, s, D)
    R = system.mean_roof
    series = complex(terms.sum())
    value = (boundary + series) / R
    correction = 0j
    if not any(m):
        mean_e = np.sum(mu * mode_coefficient_laplace(system, E, m, 0.0, D).values) / R
        mean_f = np.sum(mu * mode_coefficient_laplace(system, F, neg, 0.0, D).values) / R
        correction = complex(mean_e * mean_f / s)
        value -= correction
    tail /= R
    if tol is not None and tail > tol:
        raise TailBoundTooLarge(f"tail bound {tail:.3g} exceeds tolerance {tol:.3g}; raise N_max")
    return SeriesLaplace(complex(value), boundary / R, series / R, tail, N_max, correction, terms / R)


# ---------------------------------------------------------------------------
# Monte-Carlo correlations


@dataclass
class CorrelationSeries:
    t: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    n_samples: int
    seed: int | None
    batch_values: np.ndarray | None = None  # (n_batches, len(t))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "re_rho", "im_rho", "stderr"])
        for t, v, e in zip(self.t, self.values, self.stderr):
            w.writerow([f"{t:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}", f"{e:.17g}"])
        return buf.getvalue()


def _batch_stderr(batches: np.ndarray) -> np.ndarray:
    nb = batches.shape[0]
    var = np.var(batches.real, axis=0, ddof=1) + np.var(batches.imag, axis=0, ddof=1)
    return np.maximum(np.sqrt(var / nb), np.finfo(float).tiny)


def _sample_paths(system: SuspensionSystem, t_max: float, n: int, rng, D: int):
    """Draw (x, theta, u) from the suspension measure and the roof data along each orbit."""
    sft = system.sft
    gibbs = system.gibbs
    words = sft.words(D)
    r = system.roof_at(D)
    th = system.skew_at(D)
    tilt = gibbs.word_measures(D) * r
    tilt = tilt / tilt.sum()
    start = rng.choice(len(words), size=n, p=tilt)
    # (n_cross + 1) r_min >= t_max + r_min, so u + t_max never passes the last crossing
    n_cross = math.ceil(t_max / system.r_min) + 1
    k = gibbs.block_depth
    first_block = sft.index(words[start][:, D - k :])
    blocks = sample_blocks(gibbs, first_block, n_cross, rng)
    letters = np.hstack([words[start], gibbs.blocks[blocks][:, :, -1]])
    widx = np.empty((n, n_cross + 1), dtype=np.int64)
    for j in range(n_cross + 1):
        widx[:, j] = sft.index(letters[:, j : j + D])
    R = r[widx]
    cum_r = np.zeros((n, n_cross + 2))
    np.cumsum(R, axis=1, out=cum_r[:, 1:])
    cum_th = np.zeros((n, n_cross + 2, th.shape[1]))
    np.cumsum(th[widx], axis=1, out=cum_th[:, 1:])
    theta0 = rng.uniform(0.0, 2 * np.pi, (n, system.d))
    u0 = rng.uniform(0.0, 1.0, n) * R[:, 0]
    return widx, R, cum_r, cum_th, theta0, u0


def _flow_direct(system, E, t_grid, D, widx, R, cum_r, cum_th, theta0, u0, Fv):
    """E(phi_t(x, theta, u)) stepped along the grid; works for every coefficient form."""
    n, n_cross = widx.shape[0], widx.shape[1] - 1
    rows = np.arange(n)
    ptr = np.zeros(n, dtype=np.int64)
    EF = np.empty(len(t_grid), dtype=complex)
    Em = np.empty(len(t_grid), dtype=complex)
    for i, t in enumerate(t_grid):
        target = u0 + t
        while True:
            adv = cum_r[rows, ptr + 1] <= target
            if not adv.any():
                break
            ptr = ptr + adv
            if ptr.max() > n_cross:
                raise RuntimeError("roof crossing cap exceeded")
        u = target - cum_r[rows, ptr]
        theta = theta0 + cum_th[rows, ptr]
        Ev = E.evaluate(system.sft, D, widx[rows, ptr], theta, u, R[rows, ptr])
        EF[i] = np.mean(Ev * Fv)
        Em[i] = np.mean(Ev)
    return EF, Em


def _flow_segments(system, E, t_grid, D, widx, R, cum_r, cum_th, theta0, u0, Fv):
    """Same sums as _flow_direct for closed-form coefficients.

    Between crossings j and j+1 the height is u = delta + t with
    delta = u0 - cum_r[j], so each term c u^k e^{i w u} e^{i m.theta} is a
    polynomial times e^{i w t} in t.  Its coefficients are scattered onto the
    grid interval the segment covers with difference arrays.
    """
    n, n_seg = widx.shape
    nt = len(t_grid)
    lo = np.searchsorted(t_grid, (cum_r[:, :-1] - u0[:, None]).ravel(), side="left")
    hi = np.searchsorted(t_grid, (cum_r[:, 1:] - u0[:, None]).ravel(), side="left")
    if np.any(hi[n_seg - 1 :: n_seg] < nt):
        raise RuntimeError("roof crossing cap exceeded")
    delta = u0[:, None] - cum_r[:, :-1]
    theta = theta0[:, None, :] + cum_th[:, :-1, :]
    EF = np.zeros(nt, dtype=complex)
    Em = np.zeros(nt, dtype=complex)

    def scatter(weights):
        acc = np.zeros(nt + 1, dtype=complex)
        for part, unit in ((weights.real, 1.0), (weights.imag, 1j)):
            acc += unit * (np.bincount(lo, part, nt + 1) - np.bincount(hi, part, nt + 1))
        return np.cumsum(acc[:nt])

    for m, coef in E.modes.items():
        phase = np.exp(1j * (theta @ np.asarray(m, dtype=float)))
        for k, w, c in coef.terms:
            base = c.lift(D).values[widx] * phase * np.exp(1j * w * delta)
            carrier = np.exp(1j * w * t_grid)
            for p in range(k + 1):
                coeff = math.comb(k, p) * base * delta ** (k - p)
                tp = t_grid**p * carrier
                EF += tp * scatter((coeff * Fv[:, None]).ravel())
                Em += tp * scatter(coeff.ravel())
    return EF / n, Em / n


def _sample_batch(system: SuspensionSystem, E: TestFunction, F: TestFunction, t_grid, n, rng, D):
    widx, R, cum_r, cum_th, theta0, u0 = paths = _sample_paths(system, float(t_grid[-1]), n, rng, D)
    Fv = F.evaluate(system.sft, D, widx[:, 0], theta0, u0, R[:, 0])
    closed = all(c.grid is None for c in E.modes.values())
    flow = _flow_segments if closed else _flow_direct
    EF, Em = flow(system, E, t_grid, D, *paths, Fv)
    return EF, Em, np.mean(Fv)


def correlation_mc(system: SuspensionSystem, E: TestFunction, F: TestFunction, t_grid, n_samples: int,
                   seed: int = 0, n_batches: int = 32) -> CorrelationSeries:
    """Monte-Carlo rho_{E,F}(t) = int E o phi_t . F - int E int F with batch-means errors."""
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid < 0) or np.any(np.diff(t_grid) < 0):
        raise ValueError("t grid must be nonnegative and nondecreasing")
    if n_samples < 2 * n_batches:
        raise ValueError("need at least two samples per batch")
    D = max(system.depth, E.depth, F.depth)
    children = np.random.SeedSequence(seed).spawn(n_batches)
    sizes = np.full(n_batches, n_samples // n_batches)
    sizes[: n_samples % n_batches] += 1
    batches = np.empty((n_batches, len(t_grid)), dtype=complex)
    tot_ef = np.zeros(len(t_grid), dtype=complex)
    tot_e = np.zeros(len(t_grid), dtype=complex)
    tot_f = 0j
    for b, (ss, nb) in enumerate(zip(children, sizes)):
        rng = np.random.default_rng(ss)
        EF, Em, Fm = _sample_batch(system, E, F, t_grid, int(nb), rng, D)
        batches[b] = EF - Em * Fm
        tot_ef += nb * EF
        tot_e += nb * Em
        tot_f += nb * Fm
    values = tot_ef / n_samples - (tot_e / n_samples) * (tot_f / n_samples)
    return CorrelationSeries(t_grid, values, _batch_stderr(batches), n_samples, seed, batches)


# ---------------------------------------------------------------------------
# numerical Laplace transform


def _filon_weights(t: np.ndarray, s: complex):
    """Weights w with sum w_i rho_i = int e^{-st} (piecewise linear rho) dt over [t_0, t_max]."""
    h = np.diff(t)
    E0 = np.exp(-s * t[:-1])
    sh = s * h
    em = np.exp(-sh)
    # int_0^h e^{-s tau} dtau and int_0^h tau e^{-s tau} dtau, series for small |s h|
    small = np.abs(sh) < 1e-3
    i0 = np.where(small, h * (1 - sh / 2 + sh**2 / 6), (1 - em) / np.where(small, 1, s))
    i1 = np.where(small, h**2 * (0.5 - sh / 3 + sh**2 / 8), (1 - em * (1 + sh)) / np.where(small, 1, s) ** 2)
    left = E0 * (i0 - i1 / h)
    right = E0 * (i1 / h)
    w = np.zeros(len(t), dtype=complex)
    w[:-1] += left
    w[1:] += right
    return w


def _filon_quadratic_weights(t: np.ndarray, s: complex):
    """Weights for exact integration of the piecewise-quadratic interpolant on a uniform grid.

    Pairs of intervals carry quadratics; an odd leftover interval is linear.
    """
    n_int = len(t) - 1
    h = float(t[1] - t[0])
    pairs = n_int // 2
    mu = [_u_integrals(k, np.array([s]), np.array([2 * h]))[0] for k in range(3)]
    loc = np.array([
        (mu[2] - 3 * h * mu[1] + 2 * h * h * mu[0]) / (2 * h * h),
        -(mu[2] - 2 * h * mu[1]) / (h * h),
        (mu[2] - h * mu[1]) / (2 * h * h),
    ])
    w = np.zeros(len(t), dtype=complex)
    starts = np.exp(-s * t[: 2 * pairs : 2])
    for j in range(3):
        np.add.at(w, np.arange(pairs) * 2 + j, starts * loc[j])
    if n_int % 2:
        w[-2:] += _filon_weights(t[-2:], s)
    return w


def laplace_numeric(series: CorrelationSeries, s, with_error: bool = False):
    """int_0^inf e^{-st} rho(t) dt by exact integration of an interpolant of rho.

    Uniform grids use piecewise quadratics (Filon's rule), others piecewise
    linear interpolation.

    The tail beyond t_max is estimated from the mean of the last tenth of the
    samples.  With with_error=True returns (value, stderr) using the batch
    series.
    """
    s = complex(s)
    if s.real <= 0:
        raise NonConvergent(f"Re s = {s.real} <= 0")
    t = np.asarray(series.t, dtype=float)
    if len(t) < 2 or t[0] > 1e-12:
        raise GridTooShort("t grid must start at 0 and hold at least two points")
    if np.max(np.diff(t)) > MAX_SPACING + 1e-12:
        raise GridTooCoarse(f"grid spacing {np.max(np.diff(t)):.3g} exceeds {MAX_SPACING}")
    if math.exp(-s.real * t[-1]) > TAIL_EPS:
        raise GridTooShort(f"exp(-Re s t_max) = {math.exp(-s.real * t[-1]):.3g} exceeds {TAIL_EPS}")
    dt = np.diff(t)
    uniform = len(t) >= 3 and np.ptp(dt) <= 1e-9 * dt.max()
    w = _filon_quadratic_weights(t, s) if uniform else _filon_weights(t, s)
    n_tail = max(1, len(t) // 10)
    tail_w = np.zeros(len(t), dtype=complex)
    tail_w[-n_tail:] = np.exp(-s * t[-1]) / s / n_tail
    weights = w + tail_w
    value = complex(weights @ np.asarray(series.values))
    if not with_error:
        return value
    if series.batch_values is None:
        raise InsufficientData("series carries no batch values")
    per_batch = np.asarray(series.batch_values) @ weights
    nb = len(per_batch)
    err = math.sqrt((np.var(per_batch.real, ddof=1) + np.var(per_batch.imag, ddof=1)) / nb)
    return value, err


# ---------------------------------------------------------------------------
# decay diagnostics


def decay_fit(series: CorrelationSeries, t_min: float = 1.0, censor_sigma: float = 3.0):
    """Power-law fit of the log-log envelope of |rho| beyond t_min.

    The envelope is the running maximum of |rho| taken from the right, which
    is nonincreasing and passes through the local maxima.  Points whose
    envelope falls below censor_sigma standard errors are dropped.
    Classification uses the fitted exponent and the curvature of a quadratic
    fit in log-log coordinates.
    """
    t = np.asarray(series.t, dtype=float)
    a = np.abs(np.asarray(series.values))
    err = np.asarray(series.stderr, dtype=float)
    keep = t > t_min
    if keep.sum() < 20:
        raise InsufficientData(f"need >= 20 points beyond t = {t_min}, have {int(keep.sum())}")
    t, a, err = t[keep], a[keep], err[keep]
    env = np.maximum.accumulate(a[::-1])[::-1]
    ok = (env > censor_sigma * err) & (env > 0)
    n_ok = int(ok.sum())
    report = {"n_points": len(t), "n_used": n_ok, "t_min": t_min}
    if n_ok < 5:
        report.update(exponent=math.inf, ci=(math.nan, math.nan), curvature=math.nan,
                      classification="superpolynomial-consistent")
        return report
    x, y = np.log(t[ok]), np.log(env[ok])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope, intercept = coef
    resid = y - A @ coef
    dof = max(len(x) - 2, 1)
    se = math.sqrt(float(resid @ resid) / dof / float(np.sum((x - x.mean()) ** 2)))
    curv = float(np.polyfit(x, y, 2)[0]) if len(x) >= 3 else 0.0
    exponent = float(-slope)
    span = float(x.max() - x.min())
    if exponent < 0.1 and abs(curv) * span < 0.5:
        cls = "no-decay"
    elif curv * span**2 < -0.5:
        cls = "superpolynomial-consistent"
    else:
        cls = "polynomial"
    report.update(exponent=exponent, intercept=float(intercept), ci=(exponent - 1.96 * se, exponent + 1.96 * se),
                  curvature=curv, classification=cls)
    return report
