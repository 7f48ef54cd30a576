"""Spectral radii of twisted transfer operators.

First the rank-one example, where the radius has a closed form, then the
Schottky-coded system, where we look for uniform contraction across a
frequency grid.
"""

import math

import numpy as np

from hypermix.fixtures import build_system
from hypermix.transfer import TwistParams, contraction_probe, lasota_yorke_probe, spectral_radius, twisted_matrix

one = build_system("rank_one")[0]
alpha, omega = math.sqrt(2), 0.7
print("rank one: rho(b, m) vs |e^{-ib} + e^{-i b alpha + i m omega}| / 2")
for b, m in [(0.5, 1), (3.0, 2), (17.0, -4)]:
    rho = spectral_radius(twisted_matrix(one.gibbs, one.roof, one.skew, TwistParams(1j * b, m)))
    exact = abs((np.exp(-1j * b) + np.exp(-1j * b * alpha + 1j * m * omega)) / 2)
    print(f"  b={b:5.1f} m={m:+d}  rho={rho:.12f}  closed={exact:.12f}")

coded = build_system("schottky3_coded")[0]
grid = [(b, m) for b in np.linspace(-40, 40, 9) for m in (1, -2, 3)]
out = contraction_probe(coded.gibbs, coded.roof, coded.skew, grid, C4="auto", seed=1)
print(f"\ncoded system, C4 = {out['C4']:.3f}")
print("     b   m    rho     ratio   n")
for row in out["rows"]:
    print(f"{row['b']:6.1f} {row['m']!s:>3} {row['spectral_radius']:.4f}  {row['ratio']:.4f}  {row['n']}")
fit = out["fit_spectral"]
print(f"fit 1 - rho ~ C3 / log b_m: C3={fit['C3']:.4f}, R^2={fit['r2']:.3f}")

ly = lasota_yorke_probe(coded.gibbs, coded.roof, coded.skew, TwistParams(10j, 1))
print(f"Lasota-Yorke constant at b=10, m=1: fitted {ly['C6']:.3f}, one-step bound {ly['rigorous_C6']:.3f}")
