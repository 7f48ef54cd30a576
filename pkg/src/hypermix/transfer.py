"""Twisted transfer operators as exact matrices on locally constant functions.

For s = a + ib and m in Z^d the operator

    L h(v) = sum_{u -> v} exp(phi~(u) - s r(u) + i m.Theta(u)) h(u)

maps depth-D functions to depth-D functions, so it is a K x K matrix with
M[v, u] nonzero exactly when u[1:] == v[:-1] and the letters are allowed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceeded, DepthMismatch, NonPositiveRoof, ZeroFrequency
from .sft import GibbsData, LocallyConstantFn, Sft, lipschitz_seminorm

EIG_BUDGET = 4096


@dataclass(frozen=True)
class TwistParams:
    s: complex = 0j
    m: tuple = (0,)
    C1: float = 1.0
    C4: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "s", complex(self.s))
        object.__setattr__(self, "m", tuple(int(v) for v in np.atleast_1d(self.m)))
        if self.C1 <= 0 or self.C4 <= 0:
            raise ValueError("C1 and C4 must be positive")

    @property
    def a(self) -> float:
        return self.s.real

    @property
    def b(self) -> float:
        return self.s.imag

    @property
    def b_m(self) -> float:
        return abs(self.b) + self.C1 * sum(abs(v) for v in self.m)


def skew_values(theta: LocallyConstantFn, depth: int) -> np.ndarray:
    """Theta on depth-words as a (K, d) real array."""
    vals = theta.lift(depth).values
    vals = np.real(vals)
    return vals[:, None] if vals.ndim == 1 else vals


@dataclass(frozen=True, eq=False)
class TwistedOperator:
    matrix: np.ndarray
    depth: int
    sft: Sft
    twist: TwistParams
    gibbs: GibbsData = field(repr=False)
    roof: LocallyConstantFn = field(repr=False)
    skew: LocallyConstantFn = field(repr=False)

    @property
    def words(self):
        return self.sft.words(self.depth)

    def apply(self, h):
        vals = h.lift(self.depth).values if isinstance(h, LocallyConstantFn) else np.asarray(h)
        return self.matrix @ vals

    def power(self, n: int) -> np.ndarray:
        return np.linalg.matrix_power(self.matrix, n)

    def as_function(self, vals) -> LocallyConstantFn:
        return LocallyConstantFn(self.sft, self.depth, vals)


def shift_pairs(sft: Sft, depth: int):
    """(source, target) index pairs with source[1:] == target[:-1]."""
    ext = sft.words(depth + 1)
    return sft.index(ext[:, :depth]), sft.index(ext[:, 1:])


def twisted_matrix(gibbs: GibbsData, r: LocallyConstantFn, theta: LocallyConstantFn,
                   twist: TwistParams, depth: int | None = None) -> TwistedOperator:
    sft = gibbs.sft
    if r.sft is not sft or theta.sft is not sft:
        raise DepthMismatch("roof and skew must live on the Gibbs data's shift")
    r_vals = np.asarray(r.values)
    if np.iscomplexobj(r_vals) and np.any(r_vals.imag != 0):
        raise NonPositiveRoof("roof must be real")
    if np.any(np.real(r_vals) <= 0):
        raise NonPositiveRoof(f"roof must be strictly positive, min = {np.real(r_vals).min()}")
    D = max(gibbs.normalized.depth, r.depth, theta.depth)
    if depth is not None:
        if depth < D:
            raise DepthMismatch(f"requested depth {depth} is below the input depth {D}")
        D = depth
    th = skew_values(theta, D)
    m = np.asarray(twist.m, dtype=float)
    if len(m) == 1 and th.shape[1] > 1 and not np.any(m):
        m = np.zeros(th.shape[1])
    if len(m) != th.shape[1]:
        raise DepthMismatch(f"m has dimension {len(m)} but the skew has dimension {th.shape[1]}")
    phi = gibbs.normalized.lift(D).values
    rr = np.real(r.lift(D).values)
    weight = np.exp(phi - twist.s * rr + 1j * (th @ m))
    src, dst = shift_pairs(sft, D)
    K = sft.n_words(D)
    M = np.zeros((K, K), dtype=complex)
    M[dst, src] = weight[src]
    return TwistedOperator(M, D, sft, twist, gibbs, r, theta)


def spectral_radius(op: TwistedOperator, budget: int = EIG_BUDGET) -> float:
    K = op.matrix.shape[0]
    if K > budget:
        raise BudgetExceeded(f"matrix of size {K} exceeds the dense eigensolver budget {budget}")
    return float(np.max(np.abs(np.linalg.eigvals(op.matrix))))


def bm_norm(sft: Sft, h: LocallyConstantFn, twist: TwistParams) -> float:
    if twist.b_m == 0:
        raise ZeroFrequency("(b, m) = (0, 0) has no b_m norm")
    return max(h.sup(), lipschitz_seminorm(sft, h) / (twist.C4 * twist.b_m))


class _PairTable:
    """Pairwise first-difference weights lambda^{-N(u, v)} for depth-words, cached."""

    def __init__(self, sft: Sft, depth: int):
        words = sft.words(depth)
        diff = words[:, None, :] != words[None, :, :]
        any_diff = diff.any(axis=2)
        k = np.where(any_diff, diff.argmax(axis=2), 0)
        self.inv_dist = np.where(any_diff, sft.lam ** (-k.astype(float)), 0.0)

    def lip(self, vals: np.ndarray) -> np.ndarray:
        """|h|_Lip for each column of vals (K, n)."""
        vals = vals if vals.ndim == 2 else vals[:, None]
        out = np.empty(vals.shape[1])
        for j in range(vals.shape[1]):
            dv = np.abs(vals[:, None, j] - vals[None, :, j])
            out[j] = float((dv * self.inv_dist).max())
        return out


def _bm_norms(table: _PairTable, vals: np.ndarray, C4: float, b_m: float) -> np.ndarray:
    vals = vals if vals.ndim == 2 else vals[:, None]
    return np.maximum(np.abs(vals).max(axis=0), table.lip(vals) / (C4 * b_m))


def lasota_yorke_constant(op: TwistedOperator) -> float:
    """Rigorous one-step constant K_1 with |L h|_Lip <= lambda S |h|_Lip + K_1 |h|_inf.

    (L h)(v) depends on v only through the letter weights c_v[a] = M[v, a v[:D-1]];
    two targets first differing at k differ by at most sum_a |c_v[a] - c_v'[a]| |h|_inf
    plus terms controlled by the Lipschitz part.  S is the maximal row modulus sum.
    """
    sft = op.sft
    words = op.words
    onehot = np.zeros((len(words), sft.n_symbols))
    onehot[np.arange(len(words)), words[:, 0]] = 1.0
    C = op.matrix @ onehot
    table = _PairTable(sft, op.depth)
    best = 0.0
    for i in range(len(words)):
        d = np.abs(C[i][None, :] - C).sum(axis=1)
        best = max(best, float((d * table.inv_dist[i]).max()))
    return best


def lasota_yorke_bound(op: TwistedOperator) -> float:
    """C_6 = K_1 / ((1 - lambda) b_m), valid for every n when a >= 0."""
    lam = op.sft.lam
    if op.twist.b_m == 0:
        raise ZeroFrequency("(b, m) = (0, 0)")
    return lasota_yorke_constant(op) / ((1 - lam) * op.twist.b_m)


def auto_C4(ops, lam: float) -> float:
    """Smallest C_4 >= 1 with C_6 / C_4 + lambda <= (1 + lambda) / 2 on every operator.

    With that choice ||L^n h||_{b_m} <= ||h||_{b_m} holds for all n.
    """
    c6 = max(lasota_yorke_bound(op) for op in ops)
    return max(1.0, c6 / ((1.0 - lam) / 2.0))


def _random_functions(K: int, n: int, rng, table: _PairTable, C4: float, b_m: float):
    """Uniform values on cylinders, damped towards the mean until |h|_Lip <= 2 C4 b_m |h|_inf."""
    vals = rng.uniform(-1, 1, (K, n)) + 1j * rng.uniform(-1, 1, (K, n))
    for j in range(n):
        h = vals[:, j]
        for _ in range(200):
            lip = table.lip(h)[0]
            sup = np.abs(h).max()
            if lip <= 2 * C4 * b_m * sup:
                break
            c = h.mean()
            h = c + 0.5 * (h - c)
        vals[:, j] = h
    return vals


def contraction_probe(gibbs: GibbsData, r, theta, grid, C2: float = 4.0, trials: int = 16, seed=0,
                      C1: float = 1.0, C4=1.0, refine: int = 8, depth: int | None = None):
    """Empirical contraction of L^n, n = ceil(C2 log b_m), in the b_m norm.

    C4 may be a number or "auto" (see auto_C4).  Returns a dict with one row
    per grid point and least-squares fits of log(1 - rho) and log(1 - ratio)
    against log b_m, whose negated slopes are empirical C_3 values.
    """
    grid = [(float(b), tuple(int(v) for v in np.atleast_1d(m))) for b, m in grid]
    if any(not any(m) for _, m in grid):
        raise ValueError("every grid point needs m != 0")
    ops = [twisted_matrix(gibbs, r, theta, TwistParams(1j * b, m, C1, 1.0), depth) for b, m in grid]
    if C4 == "auto":
        C4 = auto_C4(ops, gibbs.sft.lam)
    C4 = float(C4)
    seeds = np.random.SeedSequence(seed).spawn(len(grid))
    table = _PairTable(gibbs.sft, ops[0].depth)
    rows = []
    for (b, m), op, ss in zip(grid, ops, seeds):
        rng = np.random.default_rng(ss)
        twist = TwistParams(1j * b, m, C1, C4)
        b_m = twist.b_m
        n = max(1, math.ceil(C2 * math.log(b_m))) if b_m > 1 else 1
        Ln = np.linalg.matrix_power(op.matrix, n)
        H = _random_functions(op.matrix.shape[0], trials, rng, table, C4, b_m)
        num = _bm_norms(table, Ln @ H, C4, b_m)
        den = _bm_norms(table, H, C4, b_m)
        ratios = num / den
        h = H[:, int(np.argmax(ratios))]
        best = float(ratios.max())
        for _ in range(refine):
            # push the best candidate through the adjoint and back, then re-test
            g = Ln.conj().T @ (Ln @ h)
            if not np.any(g):
                break
            g = g / np.abs(g).max()
            ratio = float(_bm_norms(table, Ln @ g, C4, b_m)[0] / _bm_norms(table, g, C4, b_m)[0])
            if ratio <= best:
                break
            best, h = ratio, g
        rho = spectral_radius(op)
        rows.append({"b": b, "m": m, "b_m": b_m, "n": n, "ratio": best, "spectral_radius": rho,
                     "rho_n": rho**n})
    return {"rows": rows, "C4": C4, "C1": C1, "C2": C2, "trials": trials, "seed": seed,
            "fit_spectral": _fit_c3([r_["b_m"] for r_ in rows], [r_["spectral_radius"] for r_ in rows]),
            "fit_ratio": _fit_c3([r_["b_m"] for r_ in rows], [r_["ratio"] for r_ in rows])}


def _fit_c3(bm, vals):
    x, y = [], []
    for b, v in zip(bm, vals):
        if v < 1 and b > 0:
            x.append(math.log(b))
            y.append(math.log(1 - v))
    if len(x) < 3 or np.ptp(x) == 0:
        return {"C3": math.nan, "intercept": math.nan, "r2": math.nan, "n_points": len(x)}
    x, y = np.array(x), np.array(y)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1 - float(np.sum(resid**2)) / ss if ss > 0 else 1.0
    return {"C3": float(-slope), "intercept": float(intercept), "r2": r2, "n_points": len(x)}


def _adversarial_functions(Ln: np.ndarray, table: _PairTable, n_pairs: int = 64):
    """Test functions aimed at the largest Lipschitz quotient of L^n h.

    For a target pair (v, v') the quotient is |g.h| with
    g = (L^n[v] - L^n[v']) lambda^{-N(v, v')}; the unimodular h = conj(g)/|g|
    maximises it at fixed sup norm.  Blends with the constant function trade
    Lipschitz size against that gain.
    """
    K = Ln.shape[0]
    iu, ju = np.triu_indices(K, 1)
    weights = table.inv_dist[iu, ju]
    gain = np.abs(Ln[iu] - Ln[ju]).sum(axis=1) * weights
    top = np.argsort(gain)[::-1][:n_pairs]
    cands = []
    for p in top:
        g = (Ln[iu[p]] - Ln[ju[p]]) * weights[p]
        h = np.where(np.abs(g) > 0, np.conj(g) / np.maximum(np.abs(g), 1e-300), 1.0)
        c = h.mean()
        for t in (1.0, 0.5, 0.25, 0.1):
            cands.append(c + t * (h - c))
    return np.array(cands).T if cands else np.ones((K, 1), dtype=complex)


def lasota_yorke_probe(gibbs: GibbsData, r, theta, twist: TwistParams, n_list=(2, 4, 8, 16), trials: int = 16,
                       seed=0, depth: int | None = None, h_vals=None, adversarial: bool = True):
    """Smallest C with |L^n h|_Lip <= C b_m |h|_inf + lambda^n |h|_Lip over a family of h.

    The family holds `trials` random functions, the constant function and,
    unless disabled, adversarial functions built from L^n itself.  Returns a
    dict with per-n constants, their running maximum (a constant valid for
    every n' <= n, as the inequality demands), the fitted C_6 (the overall
    maximum), the spread max/min of the running maximum, and the rigorous
    bound K_1/((1 - lambda) b_m).
    """
    if twist.b_m == 0:
        raise ZeroFrequency("(b, m) = (0, 0)")
    op = twisted_matrix(gibbs, r, theta, twist, depth)
    lam = gibbs.sft.lam
    table = _PairTable(gibbs.sft, op.depth)
    rng = np.random.default_rng(seed)
    K = op.matrix.shape[0]
    if h_vals is not None:
        base = np.asarray(h_vals, dtype=complex).reshape(K, -1)
    else:
        base = rng.uniform(-1, 1, (K, trials)) + 1j * rng.uniform(-1, 1, (K, trials))
        base = np.hstack([base, np.ones((K, 1))])
    per_n = {}
    for n in n_list:
        Ln = np.linalg.matrix_power(op.matrix, n)
        H = np.hstack([base, _adversarial_functions(Ln, table)]) if adversarial and h_vals is None else base
        excess = table.lip(Ln @ H) - lam**n * table.lip(H)
        per_n[int(n)] = float(max(0.0, np.max(excess / (twist.b_m * np.abs(H).max(axis=0)))))
    running, cur = {}, 0.0
    for n in sorted(per_n):
        cur = max(cur, per_n[n])
        running[n] = cur
    vals = [v for v in running.values() if v > 0]
    spread = max(vals) / min(vals) if vals else 1.0
    return {"per_n": per_n, "running": running, "C6": max(per_n.values()), "spread": spread,
            "rigorous_C6": lasota_yorke_bound(op), "b_m": twist.b_m}


def coboundary_transform(sft: Sft, r: LocallyConstantFn, u: LocallyConstantFn) -> LocallyConstantFn:
    """r + u o sigma - u."""
    if r.sft is not sft or u.sft is not sft:
        raise DepthMismatch("functions must live on the same shift")
    D = max(r.depth, u.depth + 1)
    words = sft.words(D)
    vals = r.on_words(words) + u.on_words(words[:, 1 : 1 + u.depth]) - u.on_words(words)
    return LocallyConstantFn(sft, D, vals)
