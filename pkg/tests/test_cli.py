"""Configuration, the staged pipeline with its cache, reports and the command line."""

import json
import time

import numpy as np
import pytest

from hyperrank import cli, pipeline
from hyperrank.config import DEFAULT_TOML, PipelineConfig
from hyperrank.errors import ConfigInvalid, StepLimit
from hyperrank.pipeline import STAGES, RunManifest, exit_code, file_hash, run_pipeline
from hyperrank.report import emit_report

SMALL = {
    "identities": {"lambdas": 8, "continuity_per_octave": 4},
    "model": {"sizes": [8, 16, 32]},
    "orbit": {"steps": 128, "seeds": 2, "unitary_steps": 1000, "weyl_steps": 5000},
}


@pytest.fixture(scope="module")
def small_config():
    return PipelineConfig(SMALL)


@pytest.fixture(scope="module")
def full_run(tmp_path_factory, small_config):
    out = tmp_path_factory.mktemp("run")
    man = run_pipeline(small_config, out)
    return out, man


# -- configuration -----------------------------------------------------------------


def test_defaults_validate_and_round_trip():
    cfg = PipelineConfig()
    assert cfg["lacunary"]["truncation"] == 12 and cfg["cantor"]["depth"] == 8
    assert PipelineConfig.from_toml(cfg.to_toml()).data == cfg.data
    assert "[orbit]" in DEFAULT_TOML


def test_overrides_merge_with_defaults(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('[cantor]\ndelta = 2e-3\n[orbit]\neps = 1\n')
    cfg = PipelineConfig.load(p)
    assert cfg["cantor"]["delta"] == 2e-3 and cfg["cantor"]["depth"] == 8
    assert cfg["orbit"]["eps"] == 1.0 and isinstance(cfg["orbit"]["eps"], float)


@pytest.mark.parametrize(
    "override",
    [
        {"cantor": {"delta": 1e-12}},  # below tail(12) ~ 1.67e-11
        {"lacunary": {"truncation": 23}},  # 9*23 + 53 = 260 > 256
        {"model": {"sizes": [8, 512]}},  # > 2**8
        {"identities": {"lambdas": 300}},
        {"cantor": {"depht": 8}},
        {"cantor": {"depth": "8"}},
        {"identities": {"path": "sideways"}},
        {"orbit": {"trend_sizes": [8, 128]}},
    ],
)
def test_invalid_configs_rejected(override):
    with pytest.raises(ConfigInvalid):
        PipelineConfig(override)


def test_invariant_edge_is_inclusive():
    # 9N + 53 = B exactly
    PipelineConfig({"lacunary": {"truncation": 15, "precision": 192}, "cantor": {"delta": 1e-3}})


def test_invalid_config_does_no_work(tmp_path):
    code = cli.main(["run", "--out", str(tmp_path / "x"), "--config", str(_write(tmp_path, "[cantor]\ndelta = 0.0\n"))])
    assert code == 1
    assert not (tmp_path / "x").exists()


def test_section_hashes_are_independent():
    a = PipelineConfig()
    b = a.replace(orbit={"eps": 0.1})
    assert a.hash("cantor") == b.hash("cantor")
    assert a.hash("orbit") != b.hash("orbit")


# -- pipeline ----------------------------------------------------------------------


def test_full_run_completes_six_stages(full_run):
    out, man = full_run
    assert list(man.stages) == list(STAGES)
    assert all(man.stages[s].status == "completed" for s in STAGES)
    assert (out / "manifest.json").exists()
    back = RunManifest.load(out / "manifest.json")
    assert back.config_hash == man.config_hash


def test_every_artifact_is_hashed(full_run):
    out, man = full_run
    for rec in man.stages.values():
        assert rec.artifacts
        for art in rec.artifacts.values():
            assert file_hash(out / art["path"]) == art["sha256"]


def test_core_checks_pass(full_run):
    _, man = full_run
    for name in STAGES[:-1]:
        failed = [k for k, v in man.stages[name].checks.items() if not v]
        assert not failed, (name, failed)


def test_rerun_is_all_cache_hits(full_run, small_config):
    out, _ = full_run
    t = time.perf_counter()
    man = run_pipeline(small_config, out)
    assert time.perf_counter() - t < 1.0
    assert all(man.stages[s].status == "cached" for s in STAGES)


def test_orbit_change_keeps_upstream_cache(tmp_path, full_run, small_config):
    out, _ = full_run
    cfg = small_config.replace(orbit={"eps": 0.1})
    man = run_pipeline(cfg, out)
    assert [man.stages[s].status for s in STAGES] == ["cached"] * 5 + ["completed"]
    run_pipeline(small_config, out)  # restore for later tests


def test_tampered_artifact_invalidates_cache(tmp_path, small_config):
    cfg = small_config.replace(model={"sizes": [8]}, orbit={"trend_sizes": [8]}, identities={"lambdas": 2})
    run_pipeline(cfg, tmp_path)
    (tmp_path / "build-cantor" / "tree.json").write_text("{}")
    man = run_pipeline(cfg, tmp_path)
    assert man.stages["belov-check"].status == "cached"
    assert man.stages["build-cantor"].status == "completed"


def test_csv_artifacts_are_deterministic(tmp_path, full_run, small_config):
    out, man = full_run
    cfg = small_config.replace(orbit={"weyl_steps": 5000})
    again = run_pipeline(cfg, tmp_path)
    for name in STAGES:
        for key, art in man.stages[name].artifacts.items():
            if art["path"].endswith(".csv"):
                assert again.stages[name].artifacts[key]["sha256"] == art["sha256"], art["path"]


def test_stage_failure_is_recorded(tmp_path, small_config, monkeypatch):
    def boom(*a, **k):
        raise StepLimit("forced")

    monkeypatch.setitem(pipeline.STAGE_FUNCS, "decompose", boom)
    cfg = small_config.replace(model={"sizes": [8]}, orbit={"trend_sizes": [8]}, identities={"lambdas": 2})
    with pytest.raises(StepLimit):
        run_pipeline(cfg, tmp_path)
    man = RunManifest.load(tmp_path / "manifest.json")
    assert man.stages["decompose"].status == "failed"
    assert man.stages["decompose"].error["type"] == "StepLimit"
    assert man.stages["orbit"].status == "not run"
    assert man.stages["build-model"].status == "completed"


def test_exit_codes():
    man = RunManifest.empty(PipelineConfig())
    for s in STAGES:
        man.stages[s].status = "completed"
        man.stages[s].checks = {"x": True}
    assert exit_code(man) == 0
    man.stages["orbit"].checks = {"x": False}
    assert exit_code(man) == 3
    man.stages["decompose"].checks = {"x": False}
    assert exit_code(man) == 2
    man.stages["orbit"].status = "failed"
    assert exit_code(man) == 1


# -- report ------------------------------------------------------------------------


def test_report_lists_three_identities_per_lambda(full_run):
    out, man = full_run
    files = emit_report(man, out)
    text = (out / "summary.md").read_text()
    assert out / "summary.md" in files
    rows = [l for l in text.splitlines() if l.startswith("| ") and "| analytic |" in l]
    lams = {r.split("|")[1].strip() for r in rows}
    assert len(lams) == 8 and len(rows) == 24
    for ident in ("<h_lam,g>=1", "<h_lam,g1>=1/lam", "<h,g1>=0"):
        assert sum(ident in r for r in rows) == 8


def test_report_lists_decomposition(full_run):
    out, man = full_run
    emit_report(man, out)
    text = (out / "summary.md").read_text()
    assert "unitarity defect" in text and "sigma(R)" in text


def test_report_renders_figures(full_run):
    out, man = full_run
    files = emit_report(man, out)
    pngs = [f for f in files if f.suffix == ".png"]
    assert len(pngs) >= 5
    for f in pngs:
        assert f.read_bytes()[:4] == b"\x89PNG"
        assert any(f.parent == (out / a["path"]).parent for r in man.stages.values() for a in r.artifacts.values())


def test_empty_manifest_report(tmp_path):
    emit_report(RunManifest.empty(PipelineConfig()), tmp_path)
    text = (tmp_path / "summary.md").read_text()
    assert text.count("not run") >= len(STAGES)


def test_missing_artifact_is_flagged(tmp_path, full_run):
    out, man = full_run
    man2 = RunManifest.from_json(man.to_json())
    man2.stages["decompose"].artifacts["decompose_csv"] = {"path": "decompose/gone.csv", "sha256": "0"}
    emit_report(man2, out, summary_name="partial.md")
    text = (out / "partial.md").read_text()
    assert "missing artifact" in text and "decompose/gone.csv" in text


# -- command line ----------------------------------------------------------------


def _write(tmp_path, text):
    p = tmp_path / "cfg.toml"
    p.write_text(text)
    return p


def test_print_config(capsys):
    assert cli.main(["--print-config"]) == 0
    printed = capsys.readouterr().out
    assert PipelineConfig.from_toml(printed).data == PipelineConfig().data


def test_belov_check_command(tmp_path):
    assert cli.main(["belov-check", "--out", str(tmp_path)]) == 0
    recs = json.loads((tmp_path / "belov.json").read_text())["records"]
    assert {"m", "lhs", "rhs", "pass", "margin"} <= set(recs[0])
    assert {r["m"] for r in recs} >= set(range(1, 21))


def test_single_stage_commands(tmp_path, capsys):
    d = str(tmp_path)
    assert cli.main(["build-cantor", "--depth", "6", "--seed", "1", "--out", d]) == 0
    tree = tmp_path / "tree.json"
    assert json.loads(tree.read_text())["depth"] == 6
    assert cli.main(["verify-identities", "--tree", str(tree), "--lambdas", "4", "--path", "analytic", "--out", d]) == 0
    assert (tmp_path / "identities.csv").read_text().count("analytic") == 12
    assert cli.main(["build-model", "--tree", str(tree), "--m", "8", "--out", d]) == 0
    model = tmp_path / "model_m8.json"
    assert cli.main(["eigen-residuals", "--tree", str(tree), "--model", str(model), "--out", d]) == 0
    assert (tmp_path / "eigen_residuals.csv").exists()
    capsys.readouterr()
    assert cli.main(["decompose", "--model", str(model), "--method", "contraction"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert {"unitarity_defect", "singvals_R", "norm_A", "branch"} <= set(rep)
    assert cli.main(["orbit", "--model", str(model), "--matrix", "V", "--steps", "20", "--stream"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("step,") and len(lines) >= 22


def test_global_flags_before_or_after(tmp_path):
    assert cli.main(["--out", str(tmp_path / "a"), "belov-check"]) == 0
    assert (tmp_path / "a" / "belov.json").exists()


def test_run_and_report_commands(tmp_path):
    cfg = _write(tmp_path, '[model]\nsizes = [8]\n[identities]\nlambdas = 2\n'
                           '[orbit]\ntrend_sizes = [8]\nsteps = 32\nseeds = 2\nunitary_steps = 100\nweyl_steps = 2000\n')
    out = tmp_path / "o"
    code = cli.main(["--config", str(cfg), "--threads", "1", "run", "--out", str(out)])
    assert code in (0, 3)
    assert (out / "summary.md").exists()
    (out / "summary.md").unlink()
    assert cli.main(["report", "--out", str(out)]) == code
    assert (out / "summary.md").exists()


def test_report_without_manifest(tmp_path):
    assert cli.main(["report", "--out", str(tmp_path)]) == 0
    assert "not run" in (tmp_path / "summary.md").read_text()


def test_execution_error_exit_code(tmp_path):
    assert cli.main(["decompose", "--model", str(tmp_path / "none.json")]) == 1
