"""Moebius maps, classical Schottky groups, fixed points and multipliers.

A Moebius map is stored as a determinant-one 2x2 complex matrix.  The
multiplier of a loxodromic map is its derivative at the repelling fixed
point; ``log|kappa|`` is the length of the corresponding closed geodesic and
``arg(kappa)`` its holonomy.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateC, ParabolicOrElliptic

INF = complex(math.inf, 0.0)
PARABOLIC_TOL = 1e-10
TWO_PI = 2.0 * math.pi


def is_infinite(z) -> bool:
    return cmath.isinf(complex(z))


def wrap_angle(theta):
    """Reduce angles to [0, 2pi)."""
    out = np.mod(theta, TWO_PI)
    # np.mod can return exactly 2pi for tiny negative inputs
    out = np.where(out >= TWO_PI, 0.0, out)
    if np.ndim(out) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class MoebiusMap:
    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        a, b, c, d = (complex(v) for v in (self.a, self.b, self.c, self.d))
        det = a * d - b * c
        if det == 0:
            raise ValueError("singular matrix does not define a Moebius map")
        root = cmath.sqrt(det)
        object.__setattr__(self, "a", a / root)
        object.__setattr__(self, "b", b / root)
        object.__setattr__(self, "c", c / root)
        object.__setattr__(self, "d", d / root)

    @classmethod
    def _with_det(cls, a, b, c, d, det) -> "MoebiusMap":
        """Normalise by a determinant known from elsewhere.

        For long products ad - bc cancels badly, while the determinant of a
        product is exactly the product of the factors' determinants.
        """
        out = object.__new__(cls)
        root = cmath.sqrt(det)
        for name, v in zip("abcd", (a, b, c, d)):
            object.__setattr__(out, name, complex(v) / root)
        return out

    @classmethod
    def from_matrix(cls, mat) -> "MoebiusMap":
        mat = np.asarray(mat, dtype=complex)
        return cls(mat[0, 0], mat[0, 1], mat[1, 0], mat[1, 1])

    @classmethod
    def identity(cls) -> "MoebiusMap":
        return cls(1, 0, 0, 1)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=complex)

    @property
    def trace(self) -> complex:
        return self.a + self.d

    @property
    def eta(self) -> complex:
        return self.trace / 2

    @property
    def det(self) -> complex:
        return self.a * self.d - self.b * self.c

    @property
    def pole(self) -> complex:
        """Point sent to infinity."""
        if self.c == 0:
            return INF
        return -self.d / self.c

    def inverse(self) -> "MoebiusMap":
        return MoebiusMap(self.d, -self.b, -self.c, self.a)

    def __matmul__(self, other: "MoebiusMap") -> "MoebiusMap":
        return compose(self, other)

    def __call__(self, z):
        return apply(self, z)

    def derivative(self, z) -> complex:
        return 1.0 / (self.c * z + self.d) ** 2

    def allclose(self, other: "MoebiusMap", tol: float = 1e-10) -> bool:
        """Equality as Moebius maps, i.e. up to the sign of the matrix."""
        m, n = self.matrix, other.matrix
        return bool(np.max(np.abs(m - n)) <= tol or np.max(np.abs(m + n)) <= tol)


def compose(m1: MoebiusMap, m2: MoebiusMap) -> MoebiusMap:
    """Matrix product m1 @ m2, i.e. the map z -> m1(m2(z))."""
    return MoebiusMap._with_det(
        m1.a * m2.a + m1.b * m2.c,
        m1.a * m2.b + m1.b * m2.d,
        m1.c * m2.a + m1.d * m2.c,
        m1.c * m2.b + m1.d * m2.d,
        m1.det * m2.det,
    )


def compose_word(maps, word) -> MoebiusMap:
    """Map applied by following ``word`` left to right: T_{w[-1]} o ... o T_{w[0]}."""
    out = MoebiusMap.identity()
    for letter in word:
        out = compose(maps[letter], out)
    return out


def apply(m: MoebiusMap, z):
    if is_infinite(z):
        return INF if m.c == 0 else m.a / m.c
    z = complex(z)
    den = m.c * z + m.d
    if den == 0:
        return INF
    return (m.a * z + m.b) / den


def _check_loxodromic(m: MoebiusMap, tol: float = PARABOLIC_TOL):
    if m.c == 0:
        raise DegenerateC("lower-left entry c is zero")
    t = m.trace
    if abs(t * t - 4) <= tol:
        raise ParabolicOrElliptic(f"trace^2 - 4 = {t * t - 4} is within {tol} of zero")


def _eigenvalues(m: MoebiusMap) -> tuple[complex, complex]:
    """(w_small, w_big): roots of w^2 - t w + 1, i.e. the values of cz + d at the fixed points.

    The small root is taken as 1/w_big, which avoids cancellation in t - sqrt(t^2 - 4).
    """
    t = m.trace
    root = cmath.sqrt(t * t - 4)
    w_big = (t + root) / 2
    if abs(w_big) < abs(t - root) / 2:
        w_big = (t - root) / 2
    return 1 / w_big, w_big


def fixed_points(m: MoebiusMap, tol: float = PARABOLIC_TOL) -> tuple[complex, complex]:
    """Roots of c z^2 + (d - a) z - b = 0, repelling one first.

    At a fixed point z the matrix has eigenvector (z, 1) with eigenvalue
    w = cz + d, so z = (w - d)/c and the derivative there is 1/w^2.
    """
    _check_loxodromic(m, tol)
    w_small, w_big = _eigenvalues(m)
    if abs(w_big) <= 1.0 + 1e-15:
        # |trace| close to 2 with elliptic-like rotation: no expanding point
        raise ParabolicOrElliptic("no fixed point with |derivative| > 1")
    return (w_small - m.d) / m.c, (w_big - m.d) / m.c


@dataclass(frozen=True)
class Multiplier:
    kappa: complex
    length: float
    holonomy: float


def multiplier(m: MoebiusMap, tol: float = PARABOLIC_TOL) -> Multiplier:
    """Derivative 1/(c z + d)^2 at the repelling fixed point, evaluated as w_big^2."""
    _check_loxodromic(m, tol)
    w_small, w_big = _eigenvalues(m)
    if abs(w_big) <= 1.0 + 1e-15:
        raise ParabolicOrElliptic("no fixed point with |derivative| > 1")
    kappa = w_big * w_big
    return Multiplier(kappa, 2 * math.log(abs(w_big)), wrap_angle(2 * cmath.phase(w_big)))


def multiplier_from_trace(trace):
    """Closed form kappa = lambda^2, lambda the eigenvalue of modulus > 1.

    Vectorised over numpy arrays of traces; the sign ambiguity of the
    normalised matrix drops out because kappa is even in the trace.
    """
    eta = np.asarray(trace, dtype=complex) / 2
    root = np.sqrt(eta * eta - 1)
    lam = eta + root
    small = np.abs(lam) < 1
    lam = np.where(small, eta - root, lam)
    kappa = lam * lam
    return kappa, 2 * np.log(np.abs(lam)), wrap_angle(2 * np.angle(lam))


def numeric_derivative(m: MoebiusMap, z: complex, rel_step: float = 1e-3) -> complex:
    """Five-point central difference of ``apply`` at z.

    The step is scaled to the distance from z to the pole, which keeps the
    truncation error near (rel_step)^4 independent of the map.
    """
    dist = abs(z - m.pole) if m.c != 0 else max(1.0, abs(z))
    h = rel_step * dist
    f = lambda w: apply(m, w)  # noqa: E731
    return (-f(z + 2 * h) + 8 * f(z + h) - 8 * f(z - h) + f(z - 2 * h)) / (12 * h)


# ---------------------------------------------------------------------------
# discs and Schottky groups


@dataclass(frozen=True)
class Disc:
    center: complex
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"disc radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "radius", float(self.radius))

    def contains(self, z, closed: bool = False) -> bool:
        dist = abs(complex(z) - self.center)
        return dist <= self.radius if closed else dist < self.radius

    def boundary(self, n: int = 256) -> np.ndarray:
        angles = TWO_PI * np.arange(n) / n
        return self.center + self.radius * np.exp(1j * angles)


def circle_through(z1: complex, z2: complex, z3: complex) -> tuple[complex, float]:
    """Center and radius of the circle through three points (radius inf if collinear)."""
    w = (z3 - z1) / (z2 - z1)
    if abs(w.imag) < 1e-14 * max(1.0, abs(w)):
        return INF, math.inf
    center = (z2 - z1) * (w - abs(w) ** 2) / (2j * w.imag) + z1
    return center, abs(z1 - center)


def image_disc(m: MoebiusMap, disc: Disc) -> tuple[Disc | None, bool]:
    """Image of a disc under m.

    Returns (D', inside) where D' is bounded by the image circle and
    ``inside`` says whether the interior of ``disc`` maps onto the interior of
    D' (False when the pole of m lies inside ``disc``).
    """
    pts = [apply(m, disc.center + disc.radius * cmath.exp(1j * t)) for t in (0.3, 2.4, 4.4)]
    if any(is_infinite(p) for p in pts):
        return None, False
    center, radius = circle_through(*pts)
    if not math.isfinite(radius):
        return None, False
    inside = not disc.contains(m.pole, closed=True) if m.c != 0 else True
    return Disc(center, radius), inside


def min_derivative_on_disc(m: MoebiusMap, disc: Disc) -> float:
    """Exact min of |m'(z)| = 1/|cz+d|^2 over a closed disc avoiding the pole."""
    if m.c == 0:
        return 1.0 / abs(m.d) ** 2
    far = abs(m.c) * (abs(disc.center - m.pole) + disc.radius)
    return 1.0 / far**2


@dataclass(frozen=True)
class SchottkyGroup:
    """N generators T_i with discs D_0..D_{2N-1}; T_i pairs D_i with D_{i+N}."""

    generators: tuple[MoebiusMap, ...]
    discs: tuple[Disc, ...]

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "discs", tuple(self.discs))
        if len(self.discs) != 2 * len(self.generators):
            raise ValueError("need exactly 2N discs for N generators")

    @property
    def n_generators(self) -> int:
        return len(self.generators)

    def partner(self, i: int) -> int:
        n = self.n_generators
        return i + n if i < n else i - n

    def letter_maps(self, mode: str = "full") -> list[MoebiusMap]:
        """Branches of the expanding map, one per letter of the coding alphabet."""
        if mode == "full":
            return list(self.generators)
        if mode == "no-backtrack":
            return list(self.generators) + [g.inverse() for g in self.generators]
        raise ValueError(f"unknown mode {mode!r}")

    def letter_discs(self, mode: str = "full") -> list[Disc]:
        return list(self.discs[: self.n_generators]) if mode == "full" else list(self.discs)

    def adjacency(self, mode: str = "full") -> np.ndarray:
        n = self.n_generators
        if mode == "full":
            return np.ones((n, n), dtype=np.int8)
        adj = np.ones((2 * n, 2 * n), dtype=np.int8)
        for j in range(2 * n):
            adj[j, self.partner(j)] = 0
        return adj

    def fingerprint(self) -> str:
        import hashlib

        parts = []
        for g in self.generators:
            parts += [f"{v.real:.17g},{v.imag:.17g}" for v in (g.a, g.b, g.c, g.d)]
        for dsc in self.discs:
            parts.append(f"{dsc.center.real:.17g},{dsc.center.imag:.17g},{dsc.radius:.17g}")
        return hashlib.sha256(";".join(parts).encode()).hexdigest()[:16]


def pair_disc_group(centers, radii, twists) -> SchottkyGroup:
    """Inversion construction T_i(z) = c_{i+N} + r_i r_{i+N} e^{i psi_i} / (z - c_i).

    T_i sends the circle |z - c_i| = r_i onto |w - c_{i+N}| = r_{i+N} and the
    inside of the first onto the outside of the second.
    """
    centers = [complex(c) for c in centers]
    radii = [float(r) for r in radii]
    n = len(twists)
    if len(centers) != 2 * n or len(radii) != 2 * n:
        raise ValueError("need 2N centers and radii for N twist phases")
    gens = []
    for i, psi in enumerate(twists):
        c_src, c_dst = centers[i], centers[i + n]
        k = radii[i] * radii[i + n] * cmath.exp(1j * psi)
        gens.append(MoebiusMap(c_dst, k - c_dst * c_src, 1, -c_src))
    discs = [Disc(c, r) for c, r in zip(centers, radii)]
    return SchottkyGroup(tuple(gens), tuple(discs))


@dataclass
class ValidationReport:
    valid: bool
    margins: dict = field(default_factory=dict)
    boundary_residuals: list = field(default_factory=list)
    orientation_ok: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)


def validate_schottky(group: SchottkyGroup, tol: float = 1e-9) -> ValidationReport:
    report = ValidationReport(valid=True)
    discs = group.discs
    for i in range(len(discs)):
        for j in range(i + 1, len(discs)):
            gap = abs(discs[i].center - discs[j].center) - discs[i].radius - discs[j].radius
            report.margins[(i, j)] = gap
            if gap <= 0:
                report.valid = False
                report.diagnostics.append(f"discs {i} and {j} have intersecting closures (margin {gap:.3g})")
    n = group.n_generators
    for i, g in enumerate(group.generators):
        if g.c == 0:
            report.valid = False
            report.boundary_residuals.append(math.inf)
            report.orientation_ok.append(False)
            report.diagnostics.append(f"generator {i}: DegenerateC (c = 0)")
            continue
        target = discs[i + n]
        img, _ = image_disc(g, discs[i])
        if img is None:
            resid = math.inf
        else:
            resid = abs(img.center - target.center) + abs(img.radius - target.radius)
        report.boundary_residuals.append(resid)
        if not resid <= tol:
            report.valid = False
            report.diagnostics.append(f"generator {i}: boundary image residual {resid:.3g} > {tol}")
        w = apply(g, discs[i].center)
        outside = is_infinite(w) or not target.contains(w, closed=True)
        report.orientation_ok.append(outside)
        if not outside:
            report.valid = False
            report.diagnostics.append(f"generator {i}: interior of disc {i} not sent outside disc {i + n}")
    return report
