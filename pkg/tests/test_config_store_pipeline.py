from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fhnlab import pipeline
from fhnlab.config import ConfigError, OUTPUT_ENV, load_config, parse_config
from fhnlab.report import emit_report, render_summary
from fhnlab.store import ArtifactStore, IntegrityError, dumps, loads


# configuration


def test_defaults_load(tmp_path):
    cfg = load_config(output_dir=tmp_path)
    assert cfg.params.mu == 0.3 and cfg.grid.cells == 64
    assert cfg.section("spectral")["xi0"] == "auto"


@pytest.mark.parametrize("text", ["[model]\nmu = 0.3\nfoo = 1\n", "[nonsense]\na = 1\n"])
def test_unknown_entries_rejected(text, tmp_path):
    with pytest.raises(ConfigError):
        parse_config(text, output_dir=tmp_path)


@pytest.mark.parametrize("override", [{"wave.tol": "-1"}, {"family.n_k": "4"}, {"model.gamma": "0"},
                                      {"spectral.n_modes": "16"}, {"simulation.kind": "noise"},
                                      {"grid.n": "12.5"}, {"floquet.bromwich_radii": "10 -3"}])
def test_invalid_values_rejected(override, tmp_path):
    with pytest.raises(ConfigError):
        load_config(overrides=override, output_dir=tmp_path)


def test_output_dir_never_enters_keys(tmp_path):
    a = load_config(output_dir=tmp_path / "a")
    b = parse_config("[output]\ndir = elsewhere\n", output_dir=tmp_path / "b")
    for stage, items in pipeline.KEY_ITEMS.items():
        assert a.key(stage, *items) == b.key(stage, *items)


def test_keys_change_with_what_a_stage_reads(tmp_path):
    a = load_config(output_dir=tmp_path)
    b = load_config(overrides={"simulation.t_end": "100"}, output_dir=tmp_path)
    assert a.key("wave", *pipeline.KEY_ITEMS["wave"]) == b.key("wave", *pipeline.KEY_ITEMS["wave"])
    assert a.key("simulate", *pipeline.KEY_ITEMS["simulate"]) != b.key("simulate", *pipeline.KEY_ITEMS["simulate"])


def test_output_env_default(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "from-env"))
    assert load_config().output_dir == tmp_path / "from-env"
    assert load_config(output_dir=tmp_path / "explicit").output_dir == tmp_path / "explicit"


# store


floats = st.floats(allow_nan=True, allow_infinity=True)
payloads = st.recursive(
    st.one_of(st.none(), st.booleans(), st.integers(-2**53, 2**53), floats, st.text(max_size=8),
              st.complex_numbers(allow_nan=False, allow_infinity=False)),
    lambda children: st.one_of(st.lists(children, max_size=4),
                               st.dictionaries(st.text(max_size=6).filter(lambda s: not s.startswith("__")),
                                               children, max_size=4)),
    max_leaves=20)


def _same(a, b):
    if isinstance(a, float) and np.isnan(a):
        return isinstance(b, float) and np.isnan(b)
    if isinstance(a, dict):
        return a.keys() == b.keys() and all(_same(a[k], b[k]) for k in a)
    if isinstance(a, list):
        return len(a) == len(b) and all(_same(x, y) for x, y in zip(a, b))
    return a == b and type(a) is type(b)


@given(payloads)
@settings(max_examples=100)
def test_json_roundtrip_exact(payload):
    assert _same(loads(dumps(payload)), payload)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_bits_preserved(x):
    assert np.float64(loads(dumps([x]))[0]).tobytes() == np.float64(x).tobytes()


def test_store_roundtrip_and_tamper_detection(tmp_path):
    s = ArtifactStore(tmp_path)
    s.put("k1", {"a": [1.5, 2j]})
    assert ArtifactStore(tmp_path).get("k1") == {"a": [1.5, 2j]}
    path = tmp_path / "k1" / "payload.json"
    path.write_text(path.read_text().replace("1.5", "1.6"))
    with pytest.raises(IntegrityError):
        s.get("k1")


def test_store_rejects_rebinding(tmp_path):
    s = ArtifactStore(tmp_path)
    s.put("k", {"x": 1})
    s.put("k", {"x": 1})
    with pytest.raises(IntegrityError):
        s.put("k", {"x": 2})


def test_trajectory_chunks_bit_exact(tmp_path, rng):
    s = ArtifactStore(tmp_path)
    times = np.arange(150) * 0.5
    u = rng.normal(size=(150, 32))
    v = rng.normal(size=(150, 32))
    s.put("traj", {"times": times, "u": u, "v": v, "meta": {"seed": 3}}, fmt="npy-chunks")
    back = ArtifactStore(tmp_path).get("traj")
    assert back["u"].tobytes() == u.tobytes() and back["v"].tobytes() == v.tobytes()
    assert np.array_equal(back["times"], times) and back["meta"] == {"seed": 3}
    with pytest.raises(ValueError):
        s.put("bad", {"x": 1}, fmt="pickle")


# pipeline and report


def test_empty_stage_list(tmp_path):
    res = pipeline.run_pipeline(load_config(output_dir=tmp_path), [])
    assert res.status == 0 and res.manifest_path is None
    assert not (tmp_path / "manifest.json").exists()


def test_dependencies_expand():
    assert pipeline.expand(["spectrum"]) == ["wave", "family", "spectrum"]


@pytest.fixture(scope="module")
def two_runs(tmp_path_factory):
    out = tmp_path_factory.mktemp("pipe")
    cfg = load_config(output_dir=out)
    first = pipeline.run_pipeline(cfg, ["family"])
    second = pipeline.run_pipeline(cfg, ["family"])
    return out, first, second


def test_stage_artifacts_cached(two_runs):
    _, first, second = two_runs
    assert first.status == 0
    assert first.manifest["run"]["status"] == {"wave": "computed", "family": "computed"}
    assert second.manifest["run"]["status"] == {"wave": "cached", "family": "cached"}


def test_manifest_deterministic(two_runs):
    _, first, second = two_runs
    assert pipeline.deterministic_part(first.manifest) == pipeline.deterministic_part(second.manifest)


def test_manifest_checks_have_full_rows(two_runs):
    _, first, _ = two_runs
    for c in first.manifest["checks"]:
        assert set(c) == {"id", "criterion", "claim", "anchor", "predicted", "measured", "tolerance", "verdict"}
        assert c["verdict"] in ("PASS", "FAIL")


def test_report_files(two_runs):
    out, first, _ = two_runs
    rep = emit_report(first.manifest, out / "report", ArtifactStore(out / "artifacts"))
    assert rep["failed"] == 0
    assert (out / "report" / "wave_profile.csv").exists()
    assert (out / "report" / "checks.csv").read_text().startswith("criterion,id,claim")
    assert "all checks passed" in rep["text"]


def test_report_counts_failures():
    row = pipeline.check("C9.x", 9, "claim", "anchor", "0", 1.0, "1e-3", False)
    ok = pipeline.check("C3.nu", 3, "claim", "ν = −½ω″(1)", "0.05", 0.05, "rel 1e-2", True)
    manifest = {"checks": [row, ok], "run": {"runtime_checks": []}}
    text = render_summary(manifest)
    assert text.endswith("1 FAILED")
    assert "ν = −½ω″(1)" in text


def test_report_empty_manifest():
    assert render_summary({}).endswith("all checks passed")


def test_failed_stage_gives_partial_manifest(tmp_path, monkeypatch):
    def boom(ctx):
        raise pipeline.StageFailure("family", "injected", {"why": "test"})

    monkeypatch.setitem(pipeline.STAGE_FUNCS, "family", boom)
    res = pipeline.run_pipeline(load_config(output_dir=tmp_path), ["family"])
    assert res.status == 1
    saved = json.loads((tmp_path / "manifest.json").read_text())
    assert saved["failure"]["stage"] == "family"
    assert "wave" in saved["stages"] and "family" not in saved["stages"]
