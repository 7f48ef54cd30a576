"""Bundled and user fixtures: Schottky groups, subshift systems and test functions.

Fixtures are YAML files looked up by name, first in the directories listed
in HYPERMIX_FIXTURES (os.pathsep separated), then in the package data.
"""

from __future__ import annotations

import cmath
import math
import os
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .errors import FixtureError
from .moebius import SchottkyGroup, pair_disc_group, wrap_angle
from .sft import LocallyConstantFn, Sft, rpf_normalize
from .suspension import ModeCoefficient, SuspensionSystem, TestFunction, closed_form_mode

ENV_VAR = "HYPERMIX_FIXTURES"


def search_path() -> list[Path]:
    dirs = [Path(p) for p in os.environ.get(ENV_VAR, "").split(os.pathsep) if p]
    dirs.append(Path(str(resources.files("hypermix") / "data" / "fixtures")))
    return dirs


def available() -> list[str]:
    names = set()
    for d in search_path():
        if d.is_dir():
            names.update(p.stem for p in d.glob("*.yaml"))
    return sorted(names)


def load_fixture(ref) -> dict:
    """Fixture mapping from a name, a path, or an inline mapping."""
    if isinstance(ref, dict):
        if "ref" in ref:
            base = load_fixture(ref["ref"])
            base.update({k: v for k, v in ref.items() if k != "ref"})
            return base
        return dict(ref)
    ref = str(ref)
    path = Path(ref)
    if path.suffix in (".yaml", ".yml") and path.is_file():
        return _read(path)
    for d in search_path():
        cand = d / f"{ref}.yaml"
        if cand.is_file():
            return _read(cand)
    raise FixtureError(f"fixture {ref!r} not found in {[str(d) for d in search_path()]}")


def _read(path: Path) -> dict:
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise FixtureError(f"cannot parse fixture {path}: {exc}") from exc
    if not isinstance(data, dict) or "kind" not in data:
        raise FixtureError(f"fixture {path} has no 'kind'")
    data.setdefault("name", path.stem)
    return data


def _complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    return complex(v)


# ---------------------------------------------------------------------------
# Schottky groups


def build_group(spec) -> tuple[SchottkyGroup, str]:
    """(group, coding mode) from a schottky fixture."""
    spec = load_fixture(spec)
    if spec.get("kind") != "schottky":
        raise FixtureError(f"fixture kind {spec.get('kind')!r} is not 'schottky'")
    try:
        twists = [float(t) for t in spec["twists"]]
        n2 = 2 * len(twists)
        if "centers" in spec:
            centers = [_complex(c) for c in spec["centers"]]
        else:
            rho = float(spec.get("ring_radius", 1.0))
            centers = [rho * cmath.exp(1j * math.pi * k / len(twists)) for k in range(n2)]
        radii = spec["radii"]
        radii = [float(radii)] * n2 if np.isscalar(radii) else [float(r) for r in radii]
    except (KeyError, TypeError, ValueError) as exc:
        raise FixtureError(f"malformed schottky fixture: {exc}") from exc
    return pair_disc_group(centers, radii, twists), spec.get("mode", "full")


# ---------------------------------------------------------------------------
# subshift systems


def _fn(sft: Sft, spec, default_depth: int = 1, dim: int | None = None) -> LocallyConstantFn:
    if spec is None:
        raise FixtureError("missing function specification")
    if np.isscalar(spec):
        spec = {"constant": spec}
    depth = int(spec.get("depth", default_depth))
    K = sft.n_words(depth)
    if "constant" in spec:
        c = spec["constant"]
        if dim and dim > 1:
            return LocallyConstantFn(sft, depth, np.tile(np.asarray(c, dtype=float), (K, 1)))
        return LocallyConstantFn(sft, depth, np.full(K, float(c)))
    if "probabilities" in spec:
        p = np.asarray(spec["probabilities"], dtype=float)
        return LocallyConstantFn(sft, 1, np.log(p))
    if "values" in spec:
        vals = spec["values"]
        if isinstance(vals, dict):
            conv = {k: (np.asarray(v, dtype=float) if dim and dim > 1 else _num(v)) for k, v in vals.items()}
            return LocallyConstantFn.from_mapping(sft, depth, conv)
        return LocallyConstantFn(sft, depth, np.asarray(vals, dtype=float))
    raise FixtureError(f"function spec needs 'constant', 'probabilities' or 'values': {spec}")


def _num(v):
    c = _complex(v)
    return c.real if c.imag == 0 else c


def _coeff_fn(sft: Sft, spec) -> LocallyConstantFn:
    if isinstance(spec, dict):
        depth = int(spec.get("depth", 1))
        vals = {k: _complex(v) for k, v in spec["values"].items()}
        return LocallyConstantFn.from_mapping(sft, depth, vals)
    return LocallyConstantFn.constant(sft, _complex(spec))


def build_test_function(sft: Sft, spec, d: int = 1) -> TestFunction:
    modes = {}
    for entry in spec.get("modes", []):
        m = tuple(int(v) for v in np.atleast_1d(entry["m"]))
        terms = [(int(t.get("k", 0)), float(t.get("omega", 0.0)), _coeff_fn(sft, t["coeff"])) for t in entry["terms"]]
        modes[m] = closed_form_mode(sft, terms)
    tf = TestFunction(modes, d)
    if spec.get("real", False):
        zero = tuple([0] * d)
        if zero in tf.modes:
            # a real function needs a real zero mode
            c = tf.modes[zero]
            tf.modes[zero] = _real_part(c)
        tf = tf.with_conjugates()
    return tf


def _real_part(c: ModeCoefficient) -> ModeCoefficient:
    half = [(k, w, cf * 0.5) for k, w, cf in c.terms] + [(k, -w, cf.conj() * 0.5) for k, w, cf in c.terms]
    return ModeCoefficient(tuple(half), c.grid)


def coded_functions(group: SchottkyGroup, depth: int, sft: Sft):
    """Roof log|T_{w0}'(z_w)| and skew arg T_{w0}'(z_w) at z_w = T_{w0}^{-1} ... T_{w_{D-2}}^{-1}(c_{w_{D-1}})."""
    maps = group.letter_maps("full")
    inverses = [g.inverse() for g in maps]
    centers = [dsc.center for dsc in group.letter_discs("full")]
    words = sft.words(depth)
    roof = np.empty(len(words))
    skew = np.empty(len(words))
    for i, w in enumerate(words):
        z = centers[w[-1]]
        for letter in reversed(w[:-1]):
            z = inverses[letter](z)
        dv = maps[w[0]].derivative(z)
        roof[i] = math.log(abs(dv))
        skew[i] = wrap_angle(cmath.phase(dv))
    return LocallyConstantFn(sft, depth, roof), LocallyConstantFn(sft, depth, skew)


def build_system(spec):
    """(SuspensionSystem, test functions dict, fixture mapping) from an sft or schottky_coded fixture."""
    spec = load_fixture(spec)
    kind = spec.get("kind")
    try:
        if kind == "sft":
            sft = Sft(np.asarray(spec["adjacency"]), float(spec.get("lam", 0.5)))
            phi = _fn(sft, spec.get("potential", {"constant": 0.0}))
            gibbs = rpf_normalize(sft, phi)
            roof = _fn(sft, spec["roof"])
            skew_spec = spec.get("skew", {"constant": 0.0, "dim": 1})
            d = int(skew_spec.get("dim", 1)) if isinstance(skew_spec, dict) else 1
            skew = _fn(sft, skew_spec, dim=d)
        elif kind == "schottky_coded":
            group, mode = build_group(spec["group"])
            if mode != "full":
                raise FixtureError("coded systems use the full-shift coding")
            sft = Sft(group.adjacency("full"), float(spec.get("lam", 0.5)))
            depth = int(spec.get("depth", 3))
            roof, skew = coded_functions(group, depth, sft)
            pot = spec.get("potential", {"constant": 0.0})
            if isinstance(pot, dict) and "roof_multiple" in pot:
                phi = roof * (-float(pot["roof_multiple"]))
            else:
                phi = _fn(sft, pot)
            gibbs = rpf_normalize(sft, phi)
            d = 1
        else:
            raise FixtureError(f"fixture kind {kind!r} does not describe a suspension system")
    except (KeyError, TypeError) as exc:
        raise FixtureError(f"malformed fixture {spec.get('name')!r}: {exc}") from exc
    system = SuspensionSystem(gibbs, roof, skew)
    tests = {name: build_test_function(sft, tf, d) for name, tf in spec.get("test_functions", {}).items()}
    return system, tests, spec


def cos_sin_test_function(sft: Sft) -> TestFunction:
    """cos(theta) sin(2 pi u) on a 1-torus."""
    c = closed_form_mode(sft, [(0, 2 * math.pi, 1 / 4j), (0, -2 * math.pi, -1 / 4j)])
    return TestFunction({(1,): c, (-1,): c}, 1)
