import json

import numpy as np
import pytest
import yaml

from hypermix import cli
from hypermix.errors import ConfigInvalid, FixtureError
from hypermix.fixtures import available, build_group, build_system, load_fixture
from hypermix.moebius import validate_schottky


def write_config(path, cfg):
    path.write_text(yaml.safe_dump(cfg))
    return str(path)


def run(tmp_path, kind, cfg, name="run", extra=()):
    conf = write_config(tmp_path / f"{name}.yaml", cfg)
    return cli.main([kind, "--config", conf, "--out", str(tmp_path / name), *extra])


def test_bundled_fixtures():
    names = available()
    for n in ("schottky2", "schottky3", "bernoulli", "golden_mean", "rank_one", "schottky3_coded"):
        assert n in names
    grp, mode = build_group("schottky3")
    assert mode == "full" and validate_schottky(grp).valid
    system, tests, spec = build_system("schottky3_coded")
    assert set(tests) == {"E", "F"}
    assert system.r_min > 0 and system.sft.n_symbols == 3


def test_fixture_search_path(tmp_path, monkeypatch):
    (tmp_path / "tiny.yaml").write_text(
        "kind: sft\nadjacency: [[1, 1], [1, 1]]\nroof: 2.0\npotential: {probabilities: [0.3, 0.7]}\n"
    )
    monkeypatch.setenv("HYPERMIX_FIXTURES", str(tmp_path))
    assert "tiny" in available()
    system, _, _ = build_system("tiny")
    assert system.mean_roof == pytest.approx(2.0)
    assert system.gibbs.cylinder_measure((1,)) == pytest.approx(0.7)
    override = load_fixture({"ref": "schottky2", "twists": [0.1, 0.2]})
    assert override["twists"] == [0.1, 0.2] and override["radii"] == [0.4] * 4


def test_fixture_errors(tmp_path):
    with pytest.raises(FixtureError):
        load_fixture("no_such_fixture")
    bad = tmp_path / "bad.yaml"
    bad.write_text("adjacency: [[1]]\n")
    with pytest.raises(FixtureError):
        load_fixture(str(bad))
    with pytest.raises(FixtureError):
        build_group("bernoulli")
    with pytest.raises(FixtureError):
        build_system({"kind": "sft", "adjacency": [[1, 1], [1, 1]]})


def test_validate_config():
    cfg = cli.validate_config({"kind": "census", "fixture": "schottky2", "T": 5})
    assert cfg["prune"] is True and cfg["m_list"] == [1, 2, 3]
    for raw, key in [
        ({"kind": "census", "fixture": "schottky2", "T": -1}, "T"),
        ({"kind": "census", "fixture": "schottky2"}, "T"),
        ({"kind": "census", "fixture": "schottky2", "T": 1, "colour": 3}, "colour"),
        ({"kind": "correlate", "fixture": "bernoulli", "t_max": 2, "n_samples": 100}, "seed"),
        ({"kind": "spectra"}, "kind"),
    ]:
        with pytest.raises(ConfigInvalid) as info:
            cli.validate_config(raw)
        assert info.value.key == key
        assert key in str(info.value)


def test_census_smoke(tmp_path, capsys):
    assert run(tmp_path, "census", {"fixture": "schottky2", "T": 12.0}) == 0
    text = (tmp_path / "run" / "census.csv").read_text()
    header = [line for line in text.splitlines() if not line.startswith("#")][0]
    assert header == "word,period,length,holonomy"
    manifest = json.loads((tmp_path / "run" / "manifest.json").read_text())
    assert set(manifest["outputs"]) == {"census.csv"}
    assert manifest["headline"]["n_orbits"] > 0
    assert "wrote 1 file" in capsys.readouterr().out


def test_exit_codes(tmp_path, capsys):
    assert run(tmp_path, "census", {"fixture": "schottky2", "T": -1.0}, "neg") == 2
    assert "T" in capsys.readouterr().err
    assert run(tmp_path, "census", {"fixture": "nowhere", "T": 3.0}, "nofix") == 4
    assert run(tmp_path, "spectrum", {"fixture": "bernoulli", "b_values": [1.0], "m_values": [1], "kind": "census"},
               "mismatch") == 2
    # tolerance scaled to nothing: the Monte-Carlo check cannot pass
    cfg = {"fixture": "schottky3_coded", "m_list": [1], "s_list": [[0.5, 1.0]], "n_samples": 2000, "seed": 1}
    assert run(tmp_path, "laplace-check", cfg, "tight", ["--tolerance-scale", "1e-12"]) == 3
    assert (tmp_path / "tight" / "manifest.json").exists()


def test_spectrum_rerun_identical(tmp_path):
    cfg = {"fixture": "rank_one", "b_values": [0.5, 2.0, 7.0], "m_values": [1, 2], "jobs": 2}
    assert run(tmp_path, "spectrum", cfg, "a") == 0
    assert run(tmp_path, "spectrum", cfg, "b", ["--jobs", "1"]) == 0
    ma, mb = cli.load_manifest(tmp_path / "a"), cli.load_manifest(tmp_path / "b")
    assert ma.outputs == mb.outputs and ma.config_hash == mb.config_hash
    rows = np.loadtxt(tmp_path / "a" / "spectrum.csv", delimiter=",", skiprows=1)
    b, m, rho = rows[:, 0], rows[:, 1], rows[:, 3]
    closed = np.abs((np.exp(-1j * b) + np.exp(-1j * b * np.sqrt(2) + 1j * m * 0.7)) / 2)
    assert np.allclose(rho, closed, atol=1e-12)


def test_seed_override_changes_output(tmp_path):
    cfg = {"fixture": "bernoulli", "E": "cos_sin", "F": "cos_sin", "t_max": 1.0, "n_samples": 2000, "seed": 1}
    assert run(tmp_path, "correlate", cfg, "s1") == 0
    assert run(tmp_path, "correlate", cfg, "s2", ["--seed", "2"]) == 0
    assert cli.load_manifest(tmp_path / "s1").outputs != cli.load_manifest(tmp_path / "s2").outputs


def test_summary(tmp_path, capsys):
    assert run(tmp_path, "census", {"fixture": "schottky2", "T": 10.0}, "c") == 0
    assert run(tmp_path, "dioph", {"alpha": 0.5, "beta": [0.25], "H_max": 20}, "d") == 0
    assert run(tmp_path, "spectrum", {"fixture": "rank_one", "b_values": [1.0], "m_values": [1]}, "s") == 0
    capsys.readouterr()
    assert cli.main(["summary", str(tmp_path / "s"), str(tmp_path / "c"), str(tmp_path / "d")]) == 0
    digest = yaml.safe_load(capsys.readouterr().out)
    assert list(digest) == ["census", "dioph", "spectrum"]
    assert digest["census"][0]["n_orbits"] > 0 and "abs_W_1" in digest["census"][0]
    # a resonant profile has no fitted gamma; the key is dropped rather than printed as null
    assert digest["dioph"][0]["dioph_class"] == "resonant"
    assert "gamma" not in digest["dioph"][0]
    again = cli.emit_summary([cli.load_manifest(tmp_path / p) for p in ("c", "d", "s")])
    assert yaml.safe_load(again) == digest
