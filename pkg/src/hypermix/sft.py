"""One-sided subshifts of finite type, locally constant functions and Gibbs data.

Everything is finite-dimensional: a function of depth D is one value per
admissible D-word, words being kept in lexicographic order.  The
Ruelle-Perron-Frobenius data of a depth-D potential live on the
k-blocks, k = max(D - 1, 1), where the transfer operator acts as the
transpose of the weighted block matrix B[u, v] = exp(phi(u + v[-1])).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BadLambda, ConvergenceFailure, DepthMismatch, NotAperiodic

DENSE_FALLBACK = 4096


class Sft:
    """Adjacency matrix plus metric constant lambda for d(x, y) = lambda^{N(x, y)}."""

    def __init__(self, adjacency, lam: float = 0.5):
        A = np.asarray(adjacency)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or not np.isin(A, (0, 1)).all():
            raise ValueError("adjacency must be a square 0/1 matrix")
        if not 0.0 < lam < 1.0:
            raise BadLambda(f"metric constant must lie in (0, 1), got {lam}")
        self.A = A.astype(np.int8)
        self.lam = float(lam)
        self.n_symbols = A.shape[0]
        if not is_aperiodic(self.A):
            raise NotAperiodic("no power of the adjacency matrix is entrywise positive")
        self._words: dict[int, np.ndarray] = {}
        self._codes: dict[int, np.ndarray] = {}

    def __repr__(self):
        return f"Sft(n_symbols={self.n_symbols}, lam={self.lam})"

    def words(self, depth: int) -> np.ndarray:
        """Admissible words of the given length, lexicographically ordered."""
        if depth < 1:
            raise ValueError("depth must be >= 1")
        if depth not in self._words:
            if depth == 1:
                w = np.arange(self.n_symbols, dtype=np.int64)[:, None]
            else:
                prev = self.words(depth - 1)
                rows, letters = np.nonzero(self.A[prev[:, -1]])
                w = np.hstack([prev[rows], letters[:, None].astype(np.int64)])
            w.setflags(write=False)
            self._words[depth] = w
        return self._words[depth]

    def n_words(self, depth: int) -> int:
        return len(self.words(depth))

    def encode(self, words) -> np.ndarray:
        words = np.asarray(words, dtype=np.int64)
        if words.ndim == 1:
            words = words[None, :]
        powers = self.n_symbols ** np.arange(words.shape[1] - 1, -1, -1, dtype=np.int64)
        return words @ powers

    def codes(self, depth: int) -> np.ndarray:
        if depth not in self._codes:
            self._codes[depth] = self.encode(self.words(depth))
        return self._codes[depth]

    def index(self, words) -> np.ndarray:
        """Row indices into words(len) for an array of words; -1 where inadmissible."""
        words = np.asarray(words, dtype=np.int64)
        if words.ndim == 1:
            words = words[None, :]
        depth = words.shape[1]
        codes = self.codes(depth)
        c = self.encode(words)
        pos = np.clip(np.searchsorted(codes, c), 0, len(codes) - 1)
        return np.where(codes[pos] == c, pos, -1)

    def is_admissible(self, word: Sequence[int]) -> bool:
        w = list(word)
        if any(x < 0 or x >= self.n_symbols for x in w):
            return False
        return all(self.A[w[i], w[i + 1]] for i in range(len(w) - 1))

    def first_difference(self, depth: int) -> np.ndarray:
        """N(u, v) for all pairs of depth-words; depth where u == v."""
        w = self.words(depth)
        diff = w[:, None, :] != w[None, :, :]
        any_diff = diff.any(axis=2)
        return np.where(any_diff, diff.argmax(axis=2), depth)


def is_aperiodic(A) -> bool:
    """Primitivity test: A^k > 0 for k >= (n-1)^2 + 1 (Wielandt), by repeated squaring."""
    A = (np.asarray(A) > 0).astype(np.int64)
    n = A.shape[0]
    target = (n - 1) ** 2 + 1
    M, power = A.copy(), 1
    while power < target:
        M = ((M @ M) > 0).astype(np.int64)
        power *= 2
    return bool((M > 0).all())


def build_sft(A, lam: float = 0.5) -> Sft:
    return Sft(A, lam)


@dataclass(frozen=True, eq=False)
class LocallyConstantFn:
    """Function of x_0..x_{depth-1}; values has shape (K,) or (K, dim)."""

    sft: Sft
    depth: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.dtype.kind not in "fc":
            vals = vals.astype(float)
        if vals.shape[0] != self.sft.n_words(self.depth):
            raise ValueError(
                f"expected {self.sft.n_words(self.depth)} values for depth {self.depth}, got {vals.shape[0]}"
            )
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, sft: Sft, value, depth: int = 1):
        return cls(sft, depth, np.full(sft.n_words(depth), value))

    @classmethod
    def from_mapping(cls, sft: Sft, depth: int, mapping: dict):
        """Values keyed by word tuples (or comma/space separated strings)."""
        words = sft.words(depth)
        first = next(iter(mapping.values()))
        shape = (len(words),) + np.shape(first)
        vals = np.zeros(shape, dtype=complex if np.iscomplexobj(first) else float)
        seen = np.zeros(len(words), dtype=bool)
        for key, val in mapping.items():
            word = _parse_word(key)
            idx = sft.index([word])[0] if len(word) == depth else -1
            if idx < 0:
                raise ValueError(f"{key!r} is not an admissible word of length {depth}")
            vals[idx] = val
            seen[idx] = True
        if not seen.all():
            missing = [tuple(int(x) for x in w) for w in words[~seen]]
            raise ValueError(f"missing values for words {missing[:5]}")
        return cls(sft, depth, vals)

    @classmethod
    def from_function(cls, sft: Sft, depth: int, func):
        return cls(sft, depth, np.array([func(tuple(int(x) for x in w)) for w in sft.words(depth)]))

    @property
    def real_valued(self) -> bool:
        return not np.iscomplexobj(self.values) or bool(np.all(self.values.imag == 0))

    def on_words(self, words) -> np.ndarray:
        """Values at an array of words of length >= depth."""
        words = np.asarray(words, dtype=np.int64)
        idx = self.sft.index(words[:, : self.depth])
        if np.any(idx < 0):
            raise ValueError("inadmissible word")
        return self.values[idx]

    def __call__(self, seq):
        return self.on_words(np.asarray(seq, dtype=np.int64)[None, : self.depth])[0]

    def lift(self, depth: int) -> "LocallyConstantFn":
        if depth < self.depth:
            raise DepthMismatch(f"cannot lower depth {self.depth} to {depth}")
        if depth == self.depth:
            return self
        return LocallyConstantFn(self.sft, depth, self.on_words(self.sft.words(depth)))

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def _binary(self, other, op):
        if isinstance(other, LocallyConstantFn):
            d = max(self.depth, other.depth)
            return LocallyConstantFn(self.sft, d, op(self.lift(d).values, other.lift(d).values))
        return LocallyConstantFn(self.sft, self.depth, op(self.values, other))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __radd__ = __add__
    __rmul__ = __mul__

    def __neg__(self):
        return LocallyConstantFn(self.sft, self.depth, -self.values)

    def conj(self):
        return LocallyConstantFn(self.sft, self.depth, np.conj(self.values))


def _parse_word(key) -> tuple[int, ...]:
    if isinstance(key, str):
        return tuple(int(t) for t in key.replace(",", " ").split())
    if isinstance(key, (int, np.integer)):
        return (int(key),)
    return tuple(int(t) for t in key)


def lipschitz_seminorm(sft: Sft, h: LocallyConstantFn, chunk: int = 512) -> float:
    """Exact sup |h(x) - h(y)| / lambda^{N(x, y)} for a locally constant h.

    Pairs of one-sided sequences first differing at k < depth reduce to pairs
    of admissible depth-words first differing at k; beyond the depth h does
    not see the difference.
    """
    words = sft.words(h.depth)
    vals = h.values if h.values.ndim == 1 else h.values
    best = 0.0
    K = len(words)
    for start in range(0, K, chunk):
        w = words[start : start + chunk]
        diff = w[:, None, :] != words[None, :, :]
        any_diff = diff.any(axis=2)
        k = np.where(any_diff, diff.argmax(axis=2), 0)
        dv = vals[start : start + chunk, None] - vals[None, :]
        mag = np.abs(dv) if dv.ndim == 2 else np.abs(dv).sum(axis=2)
        ratio = np.where(any_diff, mag / sft.lam ** k, 0.0)
        best = max(best, float(ratio.max()))
    return best


# ---------------------------------------------------------------------------
# Ruelle-Perron-Frobenius normalisation


@dataclass(eq=False)
class GibbsData:
    sft: Sft
    potential: LocallyConstantFn
    pressure: float
    eigenvalue: float
    eigenfunction: LocallyConstantFn  # positive, on k-blocks
    density: np.ndarray  # right Perron vector of B, on k-blocks
    normalized: LocallyConstantFn
    block_depth: int
    stationary: np.ndarray
    transition: np.ndarray
    iterations: int = 0
    _measures: dict = field(default_factory=dict, repr=False)

    @property
    def blocks(self) -> np.ndarray:
        return self.sft.words(self.block_depth)

    def word_measures(self, depth: int) -> np.ndarray:
        """mu[w] for every admissible word of the given length."""
        if depth in self._measures:
            return self._measures[depth]
        k = self.block_depth
        if depth < k:
            full = self.word_measures(k)
            prefix_idx = self.sft.index(self.sft.words(k)[:, :depth])
            out = np.bincount(prefix_idx, weights=full, minlength=self.sft.n_words(depth))
        else:
            words = self.sft.words(depth)
            idx = [self.sft.index(words[:, j : j + k]) for j in range(depth - k + 1)]
            out = self.stationary[idx[0]].copy()
            for a, b in zip(idx[:-1], idx[1:]):
                out *= self.transition[a, b]
        self._measures[depth] = out
        return out

    def cylinder_measure(self, word: Sequence[int]) -> float:
        word = [int(x) for x in word]
        if not word or not self.sft.is_admissible(word):
            return 0.0
        k = self.block_depth
        if len(word) < k:
            return float(self.word_measures(len(word))[self.sft.index([word])[0]])
        idx = [int(self.sft.index([word[j : j + k]])[0]) for j in range(len(word) - k + 1)]
        out = float(self.stationary[idx[0]])
        for a, b in zip(idx[:-1], idx[1:]):
            out *= self.transition[a, b]
        return out

    def integrate(self, fn: LocallyConstantFn):
        vals = fn.values
        mu = self.word_measures(fn.depth)
        return np.tensordot(mu, vals, axes=(0, 0))


def _perron(M: np.ndarray, tol: float, max_iter: int):
    """Positive eigenvector of a primitive nonnegative matrix by sup-normalised power iteration."""
    v = np.ones(M.shape[0])
    lam = 0.0
    for it in range(1, max_iter + 1):
        w = M @ v
        lam_new = float(w.max())
        w /= lam_new
        done = abs(lam_new - lam) <= tol * lam_new and float(np.max(np.abs(w - v))) <= tol
        v, lam = w, lam_new
        if done:
            return lam, v, it
    if M.shape[0] <= DENSE_FALLBACK:
        vals, vecs = np.linalg.eig(M)
        i = int(np.argmax(vals.real))
        vec = np.abs(vecs[:, i].real)
        vec /= vec.max()
        # polish the dense answer with a few power steps
        for _ in range(50):
            w = M @ vec
            lam = float(w.max())
            vec = w / lam
        return lam, vec, max_iter
    raise ConvergenceFailure(f"power iteration did not reach {tol} in {max_iter} steps")


def block_matrix(sft: Sft, phi: LocallyConstantFn) -> tuple[np.ndarray, int]:
    k = max(phi.depth - 1, 1)
    pairs = sft.words(k + 1)
    u = sft.index(pairs[:, :k])
    v = sft.index(pairs[:, 1:])
    n = sft.n_words(k)
    B = np.zeros((n, n))
    B[u, v] = np.exp(phi.on_words(pairs))
    return B, k


def rpf_normalize(sft: Sft, phi: LocallyConstantFn, tol: float = 1e-14, max_iter: int = 200_000) -> GibbsData:
    if not phi.real_valued:
        raise ValueError("potential must be real valued")
    phi = LocallyConstantFn(sft, phi.depth, np.real(phi.values).astype(float))
    B, k = block_matrix(sft, phi)
    lam, h, it_left = _perron(B.T, tol, max_iter)
    lam_r, r, it_right = _perron(B, tol, max_iter)
    pressure = math.log(lam)
    h_fn = LocallyConstantFn(sft, k, h)
    if np.ptp(h) <= 1e-13 * np.max(h):
        normalized = LocallyConstantFn(sft, phi.depth, phi.values - pressure)
    else:
        words = sft.words(k + 1)
        log_h = np.log(h)
        vals = (
            phi.on_words(words)
            + log_h[sft.index(words[:, :k])]
            - log_h[sft.index(words[:, 1:])]
            - pressure
        )
        normalized = LocallyConstantFn(sft, k + 1, vals)
    pi = h * r
    pi /= pi.sum()
    P = B * r[None, :] / (lam * r[:, None])
    P /= P.sum(axis=1, keepdims=True)
    return GibbsData(
        sft=sft,
        potential=phi,
        pressure=pressure,
        eigenvalue=lam,
        eigenfunction=h_fn,
        density=r,
        normalized=normalized,
        block_depth=k,
        stationary=pi,
        transition=P,
        iterations=max(it_left, it_right),
    )


def normalized_operator_apply(gibbs: GibbsData, g: LocallyConstantFn) -> LocallyConstantFn:
    """L_{phi~} g on the common depth of g and phi~."""
    sft = gibbs.sft
    D = max(g.depth, gibbs.normalized.depth)
    words = sft.words(D + 1)
    u = words[:, :D]
    target = sft.index(words[:, 1:])
    contrib = np.exp(gibbs.normalized.on_words(u)) * g.on_words(u)
    out = np.zeros(sft.n_words(D), dtype=contrib.dtype)
    np.add.at(out, target, contrib)
    return LocallyConstantFn(sft, D, out)


def gibbs_constant_check(gibbs: GibbsData, n_max: int):
    """Observed Gibbs constant: max over n <= n_max, n-words w and x in [w] of
    max(ratio, 1/ratio) with ratio = mu[w] / exp(phi~_n(x)).

    Returns (C_1, per_n) where per_n[n - 1] is the running maximum.
    """
    sft = gibbs.sft
    phi = gibbs.normalized
    Dt = phi.depth
    per_n = []
    running = 0.0
    for n in range(1, n_max + 1):
        ext = sft.words(n + Dt - 1)
        birkhoff = np.zeros(len(ext))
        for i in range(n):
            birkhoff += phi.on_words(ext[:, i : i + Dt])
        mu = gibbs.word_measures(n)[sft.index(ext[:, :n])]
        log_ratio = np.log(mu) - birkhoff
        running = max(running, float(np.max(np.abs(log_ratio))))
        per_n.append(math.exp(running))
    return per_n[-1], per_n


def recode_depth2(sft: Sft, fns: Sequence[LocallyConstantFn]):
    """Higher-block presentation: letters become admissible (D-1)-blocks.

    Returns (new_sft, new_fns) with every function re-expressed at depth 2.
    """
    depths = {f.depth for f in fns}
    if len(depths) != 1:
        raise DepthMismatch(f"functions have different depths {sorted(depths)}")
    D = depths.pop()
    if D < 2:
        raise DepthMismatch("recoding needs depth >= 2")
    blocks = sft.words(D - 1)
    pairs_old = sft.words(D)
    u = sft.index(pairs_old[:, :-1])
    v = sft.index(pairs_old[:, 1:])
    A2 = np.zeros((len(blocks), len(blocks)), dtype=np.int8)
    A2[u, v] = 1
    new = Sft(A2, sft.lam)
    pairs_new = new.words(2)
    old_words = np.hstack([blocks[pairs_new[:, 0]], blocks[pairs_new[:, 1]][:, -1:]])
    out = [LocallyConstantFn(new, 2, f.on_words(old_words)) for f in fns]
    return new, out


def block_to_word(sft: Sft, depth: int, block_word: Sequence[int]) -> tuple[int, ...]:
    """Translate a word over the recoded alphabet back to the original letters."""
    blocks = sft.words(depth - 1)
    first = [int(x) for x in blocks[block_word[0]]]
    return tuple(first + [int(blocks[b][-1]) for b in block_word[1:]])


def sample_path(gibbs: GibbsData, length: int, seed) -> np.ndarray:
    """Symbol sequence of the stationary Markov chain attached to the Gibbs measure."""
    if length < 1:
        raise ValueError("length must be >= 1")
    rng = np.random.default_rng(seed)
    blocks = gibbs.blocks
    k = gibbs.block_depth
    cum = np.cumsum(gibbs.transition, axis=1)
    state = int(np.searchsorted(np.cumsum(gibbs.stationary), rng.random() * gibbs.stationary.sum(), side="right"))
    state = min(state, len(blocks) - 1)
    out = np.empty(max(length, k), dtype=np.int64)
    out[:k] = blocks[state]
    draws = rng.random(max(length - k, 0))
    rows = [c for c in cum]
    last = blocks[:, -1]
    for i, u in enumerate(draws):
        row = rows[state]
        nxt = int(np.searchsorted(row, u * row[-1], side="right"))
        state = min(nxt, len(row) - 1)
        out[k + i] = last[state]
    return out[:length]


def sample_blocks(gibbs: GibbsData, start_blocks: np.ndarray, n_steps: int, rng) -> np.ndarray:
    """Vectorised chain continuation from given block indices; returns (n, n_steps) block indices."""
    cum = np.cumsum(gibbs.transition, axis=1)
    cum[:, -1] = np.inf
    state = np.asarray(start_blocks, dtype=np.int64)
    out = np.empty((len(state), n_steps), dtype=np.int64)
    for j in range(n_steps):
        u = rng.random(len(state))
        state = (u[:, None] >= cum[state]).sum(axis=1)
        out[:, j] = state
    return out
