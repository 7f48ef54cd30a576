"""Prime periodic orbits of the Schottky expanding map and holonomy statistics.

Words are 0-based letter tuples stored as their least cyclic rotation (a
Lyndon word).  In ``full`` mode the alphabet is the N generators acting on
D_0..D_{N-1}; in ``no-backtrack`` mode it is the 2N generators and inverses
with the partner letter forbidden after each letter.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    DegenerateDenominator,
    EmptyCensus,
    ExpansionBoundUnavailable,
    Inadmissible,
    NonPrimitive,
    NotLoxodromic,
    ParabolicOrElliptic,
)
from .moebius import (
    TWO_PI,
    SchottkyGroup,
    apply,
    compose_word,
    image_disc,
    min_derivative_on_disc,
    multiplier,
    multiplier_from_trace,
    wrap_angle,
)

FIXED_POINT_TOL = 1e-12
RECORD_AGREEMENT_TOL = 1e-8
_PRUNE_SLACK = 1e-9


def least_rotation(word: Sequence[int]) -> tuple[int, ...]:
    word = tuple(word)
    return min(word[i:] + word[:i] for i in range(len(word))) if word else word


def is_primitive(word: Sequence[int]) -> bool:
    word = tuple(word)
    n = len(word)
    return all(word != word[k:] + word[:k] for k in range(1, n) if n % k == 0)


def cyclically_admissible(word: Sequence[int], adjacency) -> bool:
    n = len(word)
    return n > 0 and all(adjacency[word[i]][word[(i + 1) % n]] for i in range(n))


def enumerate_prime_words(alphabet_size: int, adjacency, max_len: int) -> Iterator[tuple[int, ...]]:
    """One Lyndon representative per primitive, cyclically admissible class.

    Depth-first Fredricksen-Kessler-Maiorana generation restricted to
    admissible paths; output is ordered by length, then lexicographically.
    """
    adj = np.asarray(adjacency, dtype=bool)
    by_len: list[list[tuple[int, ...]]] = [[] for _ in range(max_len + 1)]

    def extend(word: list[int], p: int):
        n = len(word)
        if p == n and adj[word[-1], word[0]]:
            by_len[n].append(tuple(word))
        if n == max_len:
            return
        ref = word[n - p]
        for x in range(ref, alphabet_size):
            if not adj[word[-1], x]:
                continue
            word.append(x)
            extend(word, p if x == ref else n + 1)
            word.pop()

    for first in range(alphabet_size):
        extend([first], 1)
    for n in range(1, max_len + 1):
        yield from sorted(by_len[n])


@dataclass(frozen=True)
class OrbitRecord:
    word: tuple[int, ...]
    length: float
    holonomy: float

    @property
    def period(self) -> int:
        return len(self.word)


def _check_word(group: SchottkyGroup, word, mode: str) -> tuple[int, ...]:
    word = tuple(int(x) for x in word)
    n_letters = len(group.letter_maps(mode))
    if not word or any(x < 0 or x >= n_letters for x in word):
        raise Inadmissible(f"word {word} uses letters outside 0..{n_letters - 1}")
    if not cyclically_admissible(word, group.adjacency(mode)):
        raise Inadmissible(f"word {word} is not cyclically admissible in {mode} mode")
    if not is_primitive(word):
        raise NonPrimitive(f"word {word} is a proper power")
    return word


def periodic_point(group: SchottkyGroup, word, mode: str = "full", tol: float = FIXED_POINT_TOL, max_iter: int = 10_000):
    """Fixed point of the contracting inverse branch along ``word``, started at the disc centre."""
    maps = group.letter_maps(mode)
    inverses = [m.inverse() for m in maps]
    z = group.letter_discs(mode)[word[0]].center
    for _ in range(max_iter):
        w = z
        for letter in reversed(word):
            w = apply(inverses[letter], w)
        if abs(w - z) <= tol * max(1.0, abs(z)):
            return w
        z = w
    raise NotLoxodromic(f"inverse branch iteration for {word} did not converge")


def chain_rule_multiplier(group: SchottkyGroup, word, mode: str = "full") -> complex:
    """(T^n)'(z) as the product of per-letter derivatives along the orbit of z."""
    maps = group.letter_maps(mode)
    z = periodic_point(group, word, mode)
    kappa = 1.0 + 0j
    for letter in word:
        kappa *= maps[letter].derivative(z)
        z = apply(maps[letter], z)
    return kappa


def orbit_record(group: SchottkyGroup, word, mode: str = "full", check: bool = True) -> OrbitRecord:
    word = _check_word(group, word, mode)
    composed = compose_word(group.letter_maps(mode), word)
    try:
        mult = multiplier(composed)
    except ParabolicOrElliptic as exc:
        raise NotLoxodromic(str(exc)) from exc
    if check:
        kappa = chain_rule_multiplier(group, word, mode)
        if abs(kappa - mult.kappa) > RECORD_AGREEMENT_TOL * abs(mult.kappa):
            raise NotLoxodromic(
                f"multiplier {mult.kappa} and chain-rule product {kappa} disagree for {word}"
            )
    return OrbitRecord(least_rotation(word), mult.length, mult.holonomy)


# ---------------------------------------------------------------------------
# census


def transition_log_bounds(group: SchottkyGroup, mode: str = "full", samples: int = 256):
    """log of the minimal expansion of letter j on the first-level cylinder T_j^{-1}(D_k).

    Returns (exact, sampled): the exact minimum of |T_j'| over the closed
    cylinder disc and the minimum over ``samples`` boundary points.  Entries
    for forbidden transitions are +inf.
    """
    maps = group.letter_maps(mode)
    discs = group.letter_discs(mode)
    adj = group.adjacency(mode)
    n = len(maps)
    exact = np.full((n, n), np.inf)
    sampled = np.full((n, n), np.inf)
    for j in range(n):
        inv = maps[j].inverse()
        for k in range(n):
            if not adj[j, k]:
                continue
            cyl, inside = image_disc(inv, discs[k])
            if cyl is None or not inside:
                exact[j, k] = sampled[j, k] = -np.inf
                continue
            exact[j, k] = math.log(min_derivative_on_disc(maps[j], cyl))
            pts = cyl.boundary(samples)
            sampled[j, k] = float(np.min(-2 * np.log(np.abs(maps[j].c * pts + maps[j].d))))
    return exact, sampled


@dataclass
class Census:
    records: list[OrbitRecord]
    cutoff: float
    mode: str
    completeness_certificate: dict = field(default_factory=dict)
    group_hash: str = ""

    def __len__(self):
        return len(self.records)

    @property
    def lengths(self) -> np.ndarray:
        return np.array([r.length for r in self.records])

    @property
    def holonomies(self) -> np.ndarray:
        return np.array([r.holonomy for r in self.records])

    def restrict(self, cutoff: float) -> "Census":
        keep = [r for r in self.records if r.length <= cutoff]
        return Census(keep, cutoff, self.mode, dict(self.completeness_certificate), self.group_hash)

    def to_csv(self) -> str:
        buf = io.StringIO()
        cert = self.completeness_certificate
        buf.write(f"# group_hash={self.group_hash}\n")
        buf.write(f"# mode={self.mode}\n")
        buf.write(f"# cutoff={self.cutoff:.17g}\n")
        buf.write(f"# kappa_min={cert.get('kappa_min', float('nan')):.17g}\n")
        buf.write(f"# word_length_bound={cert.get('word_length_bound', -1)}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["word", "period", "length", "holonomy"])
        for r in self.records:
            writer.writerow(["-".join(map(str, r.word)), r.period, f"{r.length:.17g}", f"{r.holonomy:.17g}"])
        return buf.getvalue()


def _bfs_census(maps, adj, log_kappa, cutoff, max_len, prune=True):
    """Level-synchronous FKM enumeration with prefix expansion pruning.

    Frontier state per word: letters, FKM period p, prefix matrix product and
    the sum of transition log-bounds along the open path.
    """
    n_letters = len(maps)
    mats = np.array([m.matrix for m in maps])
    min_close = float(np.min(log_kappa[adj.astype(bool)]))
    letters = np.arange(n_letters, dtype=np.int16)[:, None]
    period = np.ones(n_letters, dtype=np.int64)
    prod = mats.copy()
    bound = np.zeros(n_letters)
    out_words, out_len, out_hol = [], [], []
    for n in range(1, max_len + 1):
        if len(letters) == 0:
            break
        first, last = letters[:, 0], letters[:, -1]
        closing = adj[last, first].astype(bool) & (period == n)
        if prune:
            closing &= bound + log_kappa[last, first] <= cutoff + _PRUNE_SLACK
        idx = np.nonzero(closing)[0]
        if len(idx):
            tr = prod[idx, 0, 0] + prod[idx, 1, 1]
            _, ell, hol = multiplier_from_trace(tr)
            ok = ell <= cutoff
            for i, e, h in zip(idx[ok], ell[ok], np.atleast_1d(hol)[ok]):
                out_words.append(tuple(int(x) for x in letters[i]))
                out_len.append(float(e))
                out_hol.append(float(h))
        if n == max_len:
            break
        # extend every frontier word by every admissible letter
        new_letters, new_period, new_prod, new_bound = [], [], [], []
        for x in range(n_letters):
            ref = letters[np.arange(len(letters)), n - period]
            keep = adj[last, x].astype(bool) & (ref <= x)
            nb = bound + log_kappa[last, x]
            if prune:
                keep &= nb + min_close <= cutoff + _PRUNE_SLACK
            sel = np.nonzero(keep)[0]
            if not len(sel):
                continue
            new_letters.append(np.hstack([letters[sel], np.full((len(sel), 1), x, dtype=np.int16)]))
            new_period.append(np.where(ref[sel] == x, period[sel], n + 1))
            new_prod.append(np.einsum("ij,njk->nik", mats[x], prod[sel]))
            new_bound.append(nb[sel])
        if not new_letters:
            break
        letters = np.vstack(new_letters)
        period = np.concatenate(new_period)
        prod = np.concatenate(new_prod)
        bound = np.concatenate(new_bound)
    order = sorted(range(len(out_words)), key=lambda i: (len(out_words[i]), out_words[i]))
    return [OrbitRecord(out_words[i], out_len[i], out_hol[i]) for i in order]


def expansion_certificate(group: SchottkyGroup, cutoff: float, mode: str = "full") -> dict:
    exact, sampled = transition_log_bounds(group, mode)
    adj = group.adjacency(mode).astype(bool)
    log_kmin = float(np.min(exact[adj]))
    kappa_min = math.exp(log_kmin) if np.isfinite(log_kmin) else 0.0
    cert = {
        "mode": mode,
        "kappa_min": kappa_min,
        "kappa_min_sampled": math.exp(float(np.min(sampled[adj]))),
        "transition_log_bounds": exact,
    }
    if kappa_min <= 1.0:
        raise ExpansionBoundUnavailable(
            f"minimal per-letter expansion {kappa_min:.6g} <= 1; word-length pruning would be unsound"
        )
    cert["word_length_bound"] = int(math.floor(cutoff / log_kmin + _PRUNE_SLACK))
    return cert


def census(group: SchottkyGroup, T: float, mode: str = "full", prune: bool = True) -> Census:
    """All prime closed orbits with length <= T.

    Completeness: every orbit of period n has length >= n log(kappa_min),
    so words longer than T / log(kappa_min) are never needed.  Inside that
    bound, prefixes whose accumulated transition bounds already exceed T are
    dropped (``prune=False`` disables this second step).
    """
    if not T > 0:
        raise ValueError("cutoff T must be positive")
    cert = expansion_certificate(group, T, mode)
    max_len = cert["word_length_bound"]
    maps = group.letter_maps(mode)
    adj = group.adjacency(mode)
    records = [] if max_len < 1 else _bfs_census(maps, adj, cert["transition_log_bounds"], T, max_len, prune)
    cert = dict(cert)
    cert["transition_log_bounds"] = cert["transition_log_bounds"].tolist()
    return Census(records, float(T), mode, cert, group.fingerprint())


def brute_force_census(group: SchottkyGroup, T: float, max_len: int, mode: str = "full") -> list[OrbitRecord]:
    """Exhaustive oracle: every prime word up to max_len, kept if its length is <= T."""
    maps = group.letter_maps(mode)
    adj = group.adjacency(mode)
    out = []
    for word in enumerate_prime_words(len(maps), adj, max_len):
        rec = orbit_record(group, word, mode, check=False)
        if rec.length <= T:
            out.append(rec)
    return out


def weyl_sums(census: Census | Sequence[OrbitRecord], m_list) -> list[complex]:
    """W_m = mean over orbits of exp(i m theta); normalised Haar on the circle."""
    records = census.records if isinstance(census, Census) else list(census)
    if not records:
        raise EmptyCensus("census has no orbits")
    theta = np.array([r.holonomy for r in records])
    out = []
    for m in m_list:
        m = int(np.sum(m)) if np.ndim(m) else int(m)
        out.append(1.0 + 0j if m == 0 else complex(np.mean(np.exp(1j * m * theta))))
    return out


def triple_to_alpha_beta(o1: OrbitRecord, o2: OrbitRecord, o3: OrbitRecord):
    """(alpha, beta) attached to three closed orbits with holonomies lifted to [0, 2pi)."""
    den = o2.length - o3.length
    if abs(den) <= 1e-12:
        raise DegenerateDenominator("orbits 2 and 3 have equal lengths")
    alpha = (o1.length - o2.length) / den
    th = [np.atleast_1d(np.asarray(o.holonomy, dtype=float)) for o in (o1, o2, o3)]
    beta = (th[0] - th[1]) / TWO_PI - alpha * (th[1] - th[2]) / TWO_PI
    return alpha, beta


def census_counts(census: Census) -> dict[int, int]:
    counts: dict[int, int] = {}
    for r in census.records:
        counts[r.period] = counts.get(r.period, 0) + 1
    return counts


__all__ = [
    "Census",
    "OrbitRecord",
    "brute_force_census",
    "census",
    "chain_rule_multiplier",
    "cyclically_admissible",
    "enumerate_prime_words",
    "expansion_certificate",
    "is_primitive",
    "least_rotation",
    "orbit_record",
    "periodic_point",
    "transition_log_bounds",
    "triple_to_alpha_beta",
    "weyl_sums",
    "wrap_angle",
]
