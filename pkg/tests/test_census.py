import itertools
import math

import numpy as np
import pytest

from hypermix.census import (
    OrbitRecord,
    brute_force_census,
    census,
    census_counts,
    chain_rule_multiplier,
    enumerate_prime_words,
    orbit_record,
    triple_to_alpha_beta,
    weyl_sums,
)
from hypermix.errors import (
    DegenerateDenominator,
    EmptyCensus,
    ExpansionBoundUnavailable,
    Inadmissible,
    NonPrimitive,
)
from hypermix.moebius import Disc, MoebiusMap, SchottkyGroup, compose_word, image_disc, multiplier, pair_disc_group


def necklaces(n, k=2):
    """Primitive necklace count (1/n) sum_{d | n} mu(d) k^{n/d}."""

    def mobius(d):
        out, p = 1, 2
        while p * p <= d:
            if d % p == 0:
                d //= p
                if d % p == 0:
                    return 0
                out = -out
            p += 1
        return -out if d > 1 else out

    return sum(mobius(d) * k ** (n // d) for d in range(1, n + 1) if n % d == 0) // n


def brute_classes(adj, n):
    """Primitive cyclically admissible classes of length n by exhaustive filtering."""
    k = len(adj)
    classes = set()
    for w in itertools.product(range(k), repeat=n):
        if not all(adj[w[i]][w[(i + 1) % n]] for i in range(n)):
            continue
        rots = [w[i:] + w[:i] for i in range(n)]
        if len(set(rots)) < n:
            continue
        classes.add(min(rots))
    return classes


def test_full_shift_counts():
    words = list(enumerate_prime_words(2, np.ones((2, 2)), 5))
    counts = [sum(len(w) == n for w in words) for n in range(1, 6)]
    assert counts == [2, 1, 2, 3, 6]
    assert counts == [necklaces(n) for n in range(1, 6)]
    assert [w for w in words if len(w) == 1] == [(0,), (1,)]


@pytest.mark.parametrize("k,max_len", [(3, 6), (2, 9)])
def test_full_shift_matches_brute_force(k, max_len):
    adj = np.ones((k, k))
    words = list(enumerate_prime_words(k, adj, max_len))
    assert len(words) == len(set(words))
    for n in range(1, max_len + 1):
        assert {w for w in words if len(w) == n} == brute_classes(adj, n)


def test_no_backtrack_matches_brute_force():
    adj = np.ones((4, 4), dtype=int)
    for j in range(4):
        adj[j, (j + 2) % 4] = 0
    words = list(enumerate_prime_words(4, adj, 6))
    for n in range(1, 7):
        assert {w for w in words if len(w) == n} == brute_classes(adj, n)


def test_enumeration_deterministic():
    adj = np.ones((3, 3))
    assert list(enumerate_prime_words(3, adj, 5)) == list(enumerate_prime_words(3, adj, 5))


def single_generator_group():
    T = MoebiusMap(3, -1, 1, 0)
    d0 = Disc(0.2, 0.3)
    d1, _ = image_disc(T, d0)
    return SchottkyGroup((T,), (d0, d1))


def test_orbit_record_single_letter():
    rec = orbit_record(single_generator_group(), (0,))
    assert rec.length == pytest.approx(2 * math.log((3 + math.sqrt(5)) / 2), abs=1e-9)
    assert min(rec.holonomy, 2 * math.pi - rec.holonomy) < 1e-9


def test_orbit_record_errors(schottky2):
    with pytest.raises(NonPrimitive):
        orbit_record(schottky2, (0, 0))
    with pytest.raises(Inadmissible):
        orbit_record(schottky2, (0, 5))
    nb = schottky2.adjacency("no-backtrack")
    assert not nb[0, 2]
    with pytest.raises(Inadmissible):
        orbit_record(schottky2, (0, 2), mode="no-backtrack")


def test_two_routes_agree(schottky2, schottky3):
    for grp in (schottky2, schottky3):
        n = grp.n_generators
        for word in enumerate_prime_words(n, np.ones((n, n)), 4):
            comp = multiplier(compose_word(grp.letter_maps(), word)).kappa
            chain = chain_rule_multiplier(grp, word)
            assert abs(comp - chain) <= 1e-8 * abs(comp)


def test_rotation_invariance(schottky3):
    word = (0, 1, 1, 2, 0, 2)
    base = orbit_record(schottky3, word)
    for k in range(1, len(word)):
        rec = orbit_record(schottky3, word[k:] + word[:k])
        assert rec.word == base.word
        assert rec.length == pytest.approx(base.length, abs=1e-9)
        d = abs(rec.holonomy - base.holonomy)
        assert min(d, 2 * math.pi - d) < 1e-9


def test_census_small_cutoffs(schottky2):
    shortest = min(orbit_record(schottky2, (i,)).length for i in range(2))
    assert len(census(schottky2, 0.5 * shortest)) == 0
    c1 = census(schottky2, 8.0)
    c2 = census(schottky2, 12.0)
    assert {r.word for r in c1.records} <= {r.word for r in c2.records}
    assert all(r.length <= 8.0 for r in c1.records)
    assert {r.word for r in c2.restrict(8.0).records} == {r.word for r in c1.records}


@pytest.mark.parametrize("mode", ["full", "no-backtrack"])
def test_pruned_equals_brute_force(schottky2, mode):
    cert = census(schottky2, 1.0, mode).completeness_certificate
    log_k = math.log(cert["kappa_min"])
    T = 6 * log_k
    pruned = census(schottky2, T, mode)
    unpruned = census(schottky2, T, mode, prune=False)
    brute = brute_force_census(schottky2, T, pruned.completeness_certificate["word_length_bound"], mode)
    key = lambda recs: sorted((r.word, round(r.length, 9)) for r in recs)  # noqa: E731
    assert key(pruned.records) == key(brute) == key(unpruned.records)
    assert len(pruned) > 0


def test_certificate_contents(schottky2):
    c = census(schottky2, 10.0)
    cert = c.completeness_certificate
    assert cert["kappa_min"] > 1
    assert cert["word_length_bound"] == math.floor(10.0 / math.log(cert["kappa_min"]) + 1e-9)
    # the sampled boundary estimate can only sit above the exact minimum
    assert cert["kappa_min_sampled"] >= cert["kappa_min"] * (1 - 1e-12)
    text = c.to_csv()
    assert "# kappa_min=" in text and "word,period,length,holonomy" in text


def test_census_refuses_without_expansion():
    bad = pair_disc_group([0, 0.1], [1.0, 1.0], [0.0])
    with pytest.raises(ExpansionBoundUnavailable):
        census(bad, 5.0)


def test_census_growth(schottky3):
    full = census(schottky3, 16.0)
    sizes = [len(full.restrict(T)) for T in np.arange(6.0, 16.5, 2.0)]
    assert all(b > a for a, b in zip(sizes, sizes[1:]))
    assert sum(census_counts(full).values()) == len(full)


def test_weyl_sums_trivial_cases(schottky3):
    recs = [OrbitRecord((i,), 1.0 + i, 0.0) for i in range(3)]
    assert weyl_sums(recs, [1, 2, 3]) == [1, 1, 1]
    one = [OrbitRecord((0,), 1.0, 1.234)]
    assert abs(abs(weyl_sums(one, [2])[0]) - 1) < 1e-15
    c = census(schottky3, 12.0)
    w = weyl_sums(c, [0, 1, 2, 3])
    assert w[0] == 1
    assert all(abs(x) <= 1 for x in w)
    with pytest.raises(EmptyCensus):
        weyl_sums([], [1])


def test_triple_to_alpha_beta_examples():
    tp = 2 * math.pi
    o = [OrbitRecord((0,), 3.0, 0.3 * tp), OrbitRecord((1,), 2.0, 0.2 * tp), OrbitRecord((2,), 1.0, 0.1 * tp)]
    alpha, beta = triple_to_alpha_beta(*o)
    assert alpha == pytest.approx(1.0, abs=1e-15)
    assert beta[0] == pytest.approx(0.0, abs=1e-12)

    o1 = OrbitRecord((0,), 2.0, 1.1)
    alpha, beta = triple_to_alpha_beta(o1, o[1], o[2])
    assert alpha == 0
    assert beta[0] == pytest.approx((1.1 - 0.2 * tp) / tp, abs=1e-15)
    with pytest.raises(DegenerateDenominator):
        triple_to_alpha_beta(o[0], o[1], OrbitRecord((3,), 2.0, 0.0))
