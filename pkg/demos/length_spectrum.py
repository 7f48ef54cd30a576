"""Closed geodesics of a three-generator Schottky group.

Counts prime orbits up to a length cutoff, checks that holonomies spread
out over the circle, and asks how well the length/holonomy data of three
short orbits can be approximated by rationals.
"""

import math

import numpy as np

from hypermix.census import census, census_counts, orbit_record, triple_to_alpha_beta, weyl_sums
from hypermix.diophantine import TargetPoint, fit_exponent, profile
from hypermix.fixtures import build_group

group = build_group("schottky3")[0]

T = 28.0
full = census(group, T)
cert = full.completeness_certificate
print(f"{len(full)} prime orbits with length <= {T}")
print(f"word lengths searched up to {cert['word_length_bound']} (kappa_min = {cert['kappa_min']:.3f})")

# growth: log #pi(T) / T should creep towards the critical exponent
for cut in (12.0, 16.0, 20.0, 24.0, 28.0):
    n = len(full.restrict(cut))
    print(f"  T={cut:5.1f}  #pi={n:6d}  log(#pi T)/T={math.log(n * cut) / cut:.4f}")

print("word length histogram:", dict(sorted(census_counts(full).items())))

# equidistribution of holonomy: Weyl sums shrink as T grows
for cut in (14.0, 28.0):
    W = weyl_sums(full.restrict(cut), [1, 2, 3])
    print(f"  T={cut:4.1f}  |W_m| =", "  ".join(f"{abs(w):.4f}" for w in W))

records = [orbit_record(group, (k,)) for k in range(3)]
for r in records:
    print(f"letter {r.word}: ell={r.length:.6f}  theta={r.holonomy:+.6f}")
alpha, beta = triple_to_alpha_beta(*records)
prof = profile(TargetPoint(alpha, beta), 5000)
C, gamma, cls = fit_exponent(prof)
print(f"(alpha, beta) = ({alpha:.6f}, {np.round(beta, 6)})  ->  {cls}, gamma ~ {gamma:.2f}, C ~ {C:.3f}")
