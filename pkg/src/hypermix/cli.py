"""Config-driven experiment runner.

    hypermix census --config census.yaml --out runs/census
    hypermix summary runs/*

A config is a flat YAML mapping plus an optional `fixture:` entry (a fixture
name, a path, or an inline mapping).  Every run writes its outputs and a
manifest.json with the config hash, versions, wall clock, per-file sha256
and headline numbers.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__
from .census import census, triple_to_alpha_beta, orbit_record, weyl_sums
from .diophantine import TargetPoint, fit_exponent, profile
from .errors import ConfigInvalid, FixtureError, HypermixError, InsufficientData, NumericFailure
from .fixtures import build_group, build_system, cos_sin_test_function, load_fixture
from .suspension import correlation_mc, decay_fit, laplace_numeric, mode_series_laplace
from .transfer import TwistParams, contraction_probe, spectral_radius, twisted_matrix

KINDS = ("census", "equidist", "dioph", "spectrum", "contraction", "correlate", "laplace-check")
EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_NUMERIC, EXIT_FIXTURE = 0, 1, 2, 3, 4


def fmt(x) -> str:
    return f"{x:.17g}"


# ---------------------------------------------------------------------------
# config validation


def _positive(key, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0 or not math.isfinite(v):
        raise ConfigInvalid(key, f"must be a positive number, got {v!r}")
    return float(v)


def _positive_int(key, v):
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise ConfigInvalid(key, f"must be a positive integer, got {v!r}")
    return v


def _seed(key, v):
    if isinstance(v, bool) or not isinstance(v, int) or not 0 <= v < 2**64:
        raise ConfigInvalid(key, f"must be an unsigned 64-bit integer, got {v!r}")
    return v


def _number(key, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigInvalid(key, f"must be a number, got {v!r}")
    return float(v)


def _int_list(key, v):
    if not isinstance(v, list) or not v or not all(isinstance(x, int) and not isinstance(x, bool) for x in v):
        raise ConfigInvalid(key, f"must be a nonempty list of integers, got {v!r}")
    return v


def _num_list(key, v):
    if isinstance(v, dict) and set(v) == {"start", "stop", "num"}:
        return np.linspace(_number(key, v["start"]), _number(key, v["stop"]), _positive_int(key, v["num"])).tolist()
    if not isinstance(v, list) or not v or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        raise ConfigInvalid(key, f"must be a nonempty list of numbers or {{start, stop, num}}, got {v!r}")
    return [float(x) for x in v]


def _complex_list(key, v):
    if not isinstance(v, list) or not v:
        raise ConfigInvalid(key, "must be a nonempty list of [re, im] pairs")
    out = []
    for x in v:
        if not (isinstance(x, list) and len(x) == 2 and all(isinstance(y, (int, float)) for y in x)):
            raise ConfigInvalid(key, f"entry {x!r} is not an [re, im] pair")
        out.append([float(x[0]), float(x[1])])
    return out


def _word_list(key, v):
    if not (isinstance(v, list) and len(v) == 3 and all(isinstance(w, list) and w for w in v)):
        raise ConfigInvalid(key, "must be three words (lists of letters)")
    return v


def _choice(*options):
    def check(key, v):
        if v not in options:
            raise ConfigInvalid(key, f"must be one of {options}, got {v!r}")
        return v

    return check


def _bool(key, v):
    if not isinstance(v, bool):
        raise ConfigInvalid(key, f"must be true or false, got {v!r}")
    return v


def _string(key, v):
    if not isinstance(v, str):
        raise ConfigInvalid(key, f"must be a string, got {v!r}")
    return v


def _c4(key, v):
    return v if v == "auto" else _positive(key, v)


def _fixture(key, v):
    if not isinstance(v, (str, dict)):
        raise ConfigInvalid(key, "must be a fixture name, path or mapping")
    return v


REQUIRED = object()
COMMON = {"kind": (_choice(*KINDS), None), "out": (_string, None), "tolerance_scale": (_positive, 1.0),
          "jobs": (_positive_int, 1)}
SCHEMAS = {
    "census": {"fixture": (_fixture, REQUIRED), "T": (_positive, REQUIRED), "mode": (_choice("full", "no-backtrack"), None),
               "prune": (_bool, True), "m_list": (_int_list, [1, 2, 3])},
    "equidist": {"fixture": (_fixture, REQUIRED), "T": (_positive, REQUIRED), "m_list": (_int_list, [1, 2, 3]),
                 "triple": (_word_list, [[0], [1], [2]]), "H_max": (_positive_int, 2000)},
    "dioph": {"alpha": (_number, None), "beta": (_num_list, None), "fixture": (_fixture, None),
              "triple": (_word_list, [[0], [1], [2]]), "H_max": (_positive_int, REQUIRED)},
    "spectrum": {"fixture": (_fixture, REQUIRED), "b_values": (_num_list, REQUIRED), "m_values": (_int_list, REQUIRED),
                 "a": (_number, 0.0)},
    "contraction": {"fixture": (_fixture, REQUIRED), "b_values": (_num_list, REQUIRED), "m_values": (_int_list, REQUIRED),
                    "C1": (_positive, 1.0), "C2": (_positive, 4.0), "C4": (_c4, "auto"),
                    "trials": (_positive_int, 16), "seed": (_seed, REQUIRED)},
    "correlate": {"fixture": (_fixture, REQUIRED), "E": (_string, "E"), "F": (_string, "F"), "mode": (_int_list, None),
                  "t_max": (_positive, REQUIRED), "dt": (_positive, 0.05), "n_samples": (_positive_int, REQUIRED),
                  "seed": (_seed, REQUIRED)},
    "laplace-check": {"fixture": (_fixture, REQUIRED), "E": (_string, "E"), "F": (_string, "F"),
                      "m_list": (_int_list, [1, 2]), "s_list": (_complex_list, REQUIRED), "dt": (_positive, 0.05),
                      "n_samples": (_positive_int, REQUIRED), "seed": (_seed, REQUIRED), "N_max": (_positive_int, 200),
                      "sigma": (_positive, 3.0)},
}


def validate_config(raw: dict, kind: str | None = None) -> dict:
    if not isinstance(raw, dict):
        raise ConfigInvalid("<root>", "config must be a mapping")
    kind = kind or raw.get("kind")
    if kind not in SCHEMAS:
        raise ConfigInvalid("kind", f"must be one of {KINDS}, got {kind!r}")
    if raw.get("kind", kind) != kind:
        raise ConfigInvalid("kind", f"config says {raw['kind']!r} but {kind!r} was requested")
    schema = {**COMMON, **SCHEMAS[kind]}
    out = {"kind": kind}
    for key in raw:
        if key not in schema:
            raise ConfigInvalid(key, f"unknown key for {kind}")
    for key, (check, default) in schema.items():
        if key == "kind":
            continue
        if key in raw and raw[key] is not None:
            out[key] = check(key, raw[key])
        elif default is REQUIRED:
            raise ConfigInvalid(key, "is required")
        elif default is not None:
            out[key] = default
    if kind == "dioph" and "alpha" not in out and "fixture" not in out:
        raise ConfigInvalid("alpha", "give alpha (and beta) or a schottky fixture")
    return out


def config_hash(cfg: dict) -> str:
    payload = {k: v for k, v in cfg.items() if k not in ("out", "jobs")}
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()


# ---------------------------------------------------------------------------
# experiments


@dataclass
class RunManifest:
    kind: str
    config_hash: str
    versions: dict
    wall_clock: float
    outputs: dict = field(default_factory=dict)
    headline: dict = field(default_factory=dict)
    out_dir: str = ""

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    return str(o)


def _csv_rows(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def _census(cfg, ctx):
    group, mode = build_group(cfg["fixture"])
    mode = cfg.get("mode", mode)
    cen = census(group, cfg["T"], mode=mode, prune=cfg["prune"])
    ctx.write("census.csv", cen.to_csv())
    head = {"n_orbits": len(cen), "T": cfg["T"], "kappa_min": cen.completeness_certificate["kappa_min"]}
    if len(cen):
        for m, w in zip(cfg["m_list"], weyl_sums(cen, cfg["m_list"])):
            head[f"abs_W_{m}"] = abs(w)
    return head


def _equidist(cfg, ctx):
    group, mode = build_group(cfg["fixture"])
    T = cfg["T"]
    cen = census(group, T, mode=mode)
    rows, head = [], {"T": T, "n_orbits": len(cen)}
    for cut in (T / 2, T):
        sub = cen.restrict(cut)
        for m, w in zip(cfg["m_list"], weyl_sums(sub, cfg["m_list"])):
            rows.append([cut, len(sub), m, w.real, w.imag, abs(w)])
            if cut == T:
                head[f"abs_W_{m}"] = abs(w)
            else:
                head[f"abs_W_{m}_half"] = abs(w)
    ctx.write("weyl.csv", _csv_rows(["T", "n_orbits", "m", "re", "im", "abs"], rows))
    recs = [orbit_record(group, w, mode) for w in cfg["triple"]]
    alpha, beta = triple_to_alpha_beta(*recs)
    prof = profile(TargetPoint(alpha, beta), cfg["H_max"])
    ctx.write("profile.csv", prof.to_csv())
    head.update(alpha=alpha, beta=[float(b) for b in beta], **_fit_head(prof))
    return head


def _fit_head(prof):
    try:
        C, gamma, cls = fit_exponent(prof)
    except InsufficientData:
        return {"dioph_class": "insufficient-data"}
    return {"dioph_class": cls, "gamma": None if math.isnan(gamma) else gamma, "C": None if math.isnan(C) else C}


def _dioph(cfg, ctx):
    if "alpha" in cfg:
        point = TargetPoint(cfg["alpha"], cfg.get("beta", []))
    else:
        group, mode = build_group(cfg["fixture"])
        recs = [orbit_record(group, w, mode) for w in cfg["triple"]]
        point = TargetPoint(*triple_to_alpha_beta(*recs))
    prof = profile(point, cfg["H_max"])
    ctx.write("profile.csv", prof.to_csv())
    return {"alpha": point.alpha, "beta": list(point.beta), "H_max": cfg["H_max"],
            "n_records": len(prof.records), **_fit_head(prof)}


def _grid(cfg):
    return [(b, m) for b in cfg["b_values"] for m in cfg["m_values"]]


def _spectrum(cfg, ctx):
    system, _, _ = build_system(cfg["fixture"])

    def radius(point):
        b, m = point
        op = twisted_matrix(system.gibbs, system.roof, system.skew, TwistParams(complex(cfg["a"], b), (m,)))
        return spectral_radius(op)

    grid = _grid(cfg)
    with ThreadPoolExecutor(max_workers=cfg["jobs"]) as pool:
        radii = list(pool.map(radius, grid))
    rows = [[b, m, abs(b) + abs(m), rho] for (b, m), rho in zip(grid, radii)]
    ctx.write("spectrum.csv", _csv_rows(["b", "m", "b_m", "spectral_radius"], rows))
    return {"max_spectral_radius": max(radii), "n_points": len(rows)}


def _contraction(cfg, ctx):
    system, _, _ = build_system(cfg["fixture"])
    grid = [(b, (m,)) for b, m in _grid(cfg) if m != 0]
    res = contraction_probe(system.gibbs, system.roof, system.skew, grid, C2=cfg["C2"], trials=cfg["trials"],
                            seed=cfg["seed"], C1=cfg["C1"], C4=cfg["C4"])
    rows = [[r["b"], r["m"][0], r["b_m"], r["n"], r["ratio"], r["spectral_radius"]] for r in res["rows"]]
    ctx.write("contraction.csv", _csv_rows(["b", "m", "b_m", "n", "ratio", "spectral_radius"], rows))
    fit = {"C1": res["C1"], "C2": res["C2"], "C4": res["C4"], "fit_spectral": res["fit_spectral"],
           "fit_ratio": res["fit_ratio"]}
    ctx.write("fit.yaml", yaml.safe_dump(_plain(fit), sort_keys=True))
    return {"C3": res["fit_spectral"]["C3"], "r2": res["fit_spectral"]["r2"], "C4": res["C4"],
            "max_ratio": max(r["ratio"] for r in res["rows"]),
            "max_spectral_radius": max(r["spectral_radius"] for r in res["rows"])}


def _test_functions(cfg, system, tests):
    out = []
    for key in ("E", "F"):
        name = cfg[key]
        if name == "cos_sin":
            out.append(cos_sin_test_function(system.sft))
        elif name in tests:
            out.append(tests[name])
        else:
            raise ConfigInvalid(key, f"test function {name!r} is not defined by the fixture")
    return out


def _correlate(cfg, ctx):
    system, tests, _ = build_system(cfg["fixture"])
    E, F = _test_functions(cfg, system, tests)
    if "mode" in cfg:
        m = tuple(cfg["mode"])
        E, F = E.only_mode(m), F.only_mode(tuple(-v for v in m))
    t = np.arange(0.0, cfg["t_max"] + 0.5 * cfg["dt"], cfg["dt"])
    series = correlation_mc(system, E, F, t, cfg["n_samples"], seed=cfg["seed"])
    ctx.write("correlation.csv", series.to_csv())
    head = {"n_samples": cfg["n_samples"], "rho_0": abs(series.values[0])}
    try:
        head["decay_class"] = decay_fit(series)["classification"]
    except InsufficientData:
        pass
    return head


def _laplace_check(cfg, ctx):
    system, tests, _ = build_system(cfg["fixture"])
    E, F = _test_functions(cfg, system, tests)
    s_list = [complex(*s) for s in cfg["s_list"]]
    a_min = min(s.real for s in s_list)
    if a_min <= 0:
        raise ConfigInvalid("s_list", "every s needs a positive real part")
    t_max = math.log(1e6) / a_min + 1.0
    t = np.arange(0.0, t_max + cfg["dt"], cfg["dt"])
    sigma = cfg["sigma"] * cfg["tolerance_scale"]
    report, verdicts = [], []
    for m in cfg["m_list"]:
        series = correlation_mc(system, E.only_mode((m,)), F.only_mode((-m,)), t, cfg["n_samples"], seed=cfg["seed"])
        for s in s_list:
            exact = mode_series_laplace(system, E, F, (m,), s, N_max=cfg["N_max"])
            num, err = laplace_numeric(series, s, with_error=True)
            diff = abs(exact.value - num)
            ok = diff <= sigma * err + exact.tail_bound
            verdicts.append(ok)
            report.append({"m": m, "s": [s.real, s.imag], "series": [exact.value.real, exact.value.imag],
                           "numeric": [num.real, num.imag], "stderr": err, "difference": diff,
                           "tail_bound": exact.tail_bound, "tolerance": sigma * err, "verdict": "pass" if ok else "fail"})
    ctx.write("laplace.yaml", yaml.safe_dump(_plain({"checks": report}), sort_keys=True))
    head = {"n_checks": len(verdicts), "n_pass": int(sum(verdicts)),
            "verdict": "pass" if all(verdicts) else "fail"}
    ctx.failed = not all(verdicts)
    return head


def _plain(obj):
    """YAML-safe copy with floats rendered to 17 significant digits."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(fmt(float(obj)))
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


RUNNERS = {"census": _census, "equidist": _equidist, "dioph": _dioph, "spectrum": _spectrum,
           "contraction": _contraction, "correlate": _correlate, "laplace-check": _laplace_check}


class _Context:
    def __init__(self, out: Path):
        self.out = out
        self.outputs: dict[str, str] = {}
        self.failed = False

    def write(self, name: str, text: str):
        data = text.encode()
        (self.out / name).write_bytes(data)
        self.outputs[name] = hashlib.sha256(data).hexdigest()


def run_experiment(config, out_dir=None, seed=None, tolerance_scale=None, jobs=None) -> RunManifest:
    """Validate, dispatch and write outputs plus manifest.json; returns the manifest.

    A verification experiment whose tolerance is exceeded still writes its
    outputs and manifest, then raises NumericFailure.
    """
    raw = dict(config)
    if seed is not None:
        raw["seed"] = seed
    if tolerance_scale is not None:
        raw["tolerance_scale"] = tolerance_scale
    if jobs is not None:
        raw["jobs"] = jobs
    cfg = validate_config(raw)
    if "fixture" in cfg:
        load_fixture(cfg["fixture"])  # fail fast on unresolvable fixtures
    out = Path(out_dir or cfg.get("out") or f"hypermix-{cfg['kind']}")
    out.mkdir(parents=True, exist_ok=True)
    ctx = _Context(out)
    t0 = time.perf_counter()
    try:
        headline = RUNNERS[cfg["kind"]](cfg, ctx)
    except (ConfigInvalid, FixtureError):
        raise
    except HypermixError as exc:
        raise type(exc)(f"{cfg['kind']} experiment failed: {exc}") from exc
    manifest = RunManifest(
        kind=cfg["kind"],
        config_hash=config_hash(cfg),
        versions={"hypermix": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                  "python": platform.python_version()},
        wall_clock=time.perf_counter() - t0,
        outputs=dict(ctx.outputs),
        headline=_plain(headline),
        out_dir=str(out),
    )
    (out / "manifest.json").write_text(manifest.to_json())
    if ctx.failed:
        raise NumericFailure(f"{cfg['kind']} verification failed; see {out}")
    return manifest


def emit_summary(manifests) -> str:
    """YAML digest of headline numbers, one section per kind, entries sorted by config hash."""
    manifests = [m if isinstance(m, RunManifest) else RunManifest(**m) for m in manifests]
    if not manifests:
        raise ValueError("need at least one manifest")
    sections: dict[str, list] = {}
    for m in sorted(manifests, key=lambda m: (m.kind, m.config_hash)):
        entry = {"config_hash": m.config_hash}
        entry.update({k: v for k, v in m.headline.items() if v is not None and v == v})
        entry = {k: v for k, v in entry.items() if v not in ({}, [], "")}
        sections.setdefault(m.kind, []).append(entry)
    return yaml.safe_dump(_plain(sections), sort_keys=False)


def load_manifest(path) -> RunManifest:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    return RunManifest(**json.loads(path.read_text()))


# ---------------------------------------------------------------------------
# command line


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hypermix", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind, help=f"run the {kind} experiment")
        sp.add_argument("--config", required=True, help="YAML config file")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--jobs", type=int, help="worker threads")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--tolerance-scale", type=float, dest="tolerance_scale", help="scale verification tolerances")
    sp = sub.add_parser("summary", help="digest of one or more run directories")
    sp.add_argument("runs", nargs="+")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "summary":
            sys.stdout.write(emit_summary([load_manifest(r) for r in args.runs]))
            return EXIT_OK
        try:
            raw = yaml.safe_load(Path(args.config).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigInvalid("--config", str(exc)) from exc
        if not isinstance(raw, dict):
            raise ConfigInvalid("<root>", "config must be a mapping")
        raw.setdefault("kind", args.command)
        if raw["kind"] != args.command:
            raise ConfigInvalid("kind", f"config is for {raw['kind']!r}, not {args.command!r}")
        manifest = run_experiment(raw, args.out, args.seed, args.tolerance_scale, args.jobs)
    except ConfigInvalid as exc:
        print(f"hypermix: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FixtureError as exc:
        print(f"hypermix: fixture error: {exc}", file=sys.stderr)
        return EXIT_FIXTURE
    except NumericFailure as exc:
        print(f"hypermix: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except HypermixError as exc:
        print(f"hypermix: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"{manifest.kind}: wrote {len(manifest.outputs)} file(s) to {manifest.out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
