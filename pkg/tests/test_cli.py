import json

import pytest

from vancorisk.cli import main
from vancorisk.pipeline import STAGES, load_config

SMALL = {"seed": 3, "generator": {"n_patients": 1500}, "selection": {"n_trees": 20},
         "models": {"cv_folds": 2}, "evaluation": {"n_boot": 50},
         "interpret": {"shap_rows": 100, "ablation_boot": 2}, "uq": {"n_iterations": 60}}


def _write_config(path, cfg):
    path.write_text(json.dumps(cfg))
    return path


def _artifacts(out):
    """Every CSV/JSON/markdown artifact except the run-specific manifest."""
    return {p.relative_to(out).as_posix(): p.read_bytes() for p in sorted(out.rglob("*"))
            if p.is_file() and p.suffix in (".csv", ".json", ".md") and p.name != "manifest.json"}


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = _write_config(root / "small.json", SMALL)
    out = root / "run"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    return root, cfg, out


def test_run_writes_contract_artifacts(small_run):
    _, _, out = small_run
    for name in ("attrition.json", "features.csv", "metrics.json", "roc.csv", "shap.csv",
                 "ale.csv", "ablation.csv", "posterior.json", "report.md", "manifest.json"):
        assert (out / name).exists(), name
    assert list(out.glob("*.svg"))
    metrics = json.loads((out / "metrics.json").read_text())
    assert "schema_version" in metrics


def test_manifest_reads_are_acyclic(small_run):
    _, _, out = small_run
    manifest = json.loads((out / "manifest.json").read_text())
    assert [s["stage"] for s in manifest["steps"]] == list(STAGES)
    written = {}
    for s in manifest["steps"]:
        for w in s["writes"]:
            written.setdefault(w, STAGES.index(s["stage"]))
    for s in manifest["steps"]:
        for r in s["reads"]:
            assert written[r] < STAGES.index(s["stage"]), (s["stage"], r)
        assert s["wall_time_s"] >= 0
    assert manifest["seed"] == 3 and manifest["config_hash"]


def test_stagewise_equals_end_to_end(small_run, capsys):
    root, cfg, out = small_run
    staged = root / "staged"
    assert main(["generate", "--config", str(cfg), "--out", str(staged)]) == 0
    for stage in STAGES[1:]:
        # later stages pick up the config.json the first stage wrote
        assert main([stage, "--out", str(staged)]) == 0
    assert _artifacts(staged) == _artifacts(out)


def test_rerun_byte_identical(small_run):
    root, cfg, out = small_run
    again = root / "again"
    assert main(["run", "--config", str(cfg), "--out", str(again)]) == 0
    assert _artifacts(again) == _artifacts(out)


def test_uq_toggle(small_run):
    root, _, out = small_run
    cfg = _write_config(root / "nouq.json", {**SMALL, "uq": {"enabled": False}})
    off = root / "nouq"
    assert main(["run", "--config", str(cfg), "--out", str(off)]) == 0
    assert not (off / "posterior.json").exists() and not (off / "posterior_hist.csv").exists()
    on, no = _artifacts(out), _artifacts(off)
    for name in ("features.csv", "metrics.json", "roc.csv", "shap.csv", "ablation.csv"):
        assert on[name] == no[name]


def test_evaluate_reproduces_metrics(small_run, tmp_path):
    _, _, out = small_run
    before = (out / "metrics.json").read_bytes()
    assert main(["evaluate", "--out", str(out)]) == 0
    assert (out / "metrics.json").read_bytes() == before


def test_config_error_exit_2(tmp_path, capsys):
    cfg = _write_config(tmp_path / "bad.json", {"seed": 0, "split": {"test_fraction": 2}})
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["error"] == "ConfigError"


def test_missing_upstream_names_stage_and_file(tmp_path, capsys):
    cfg = _write_config(tmp_path / "c.json", SMALL)
    assert main(["evaluate", "--config", str(cfg), "--out", str(tmp_path / "empty")]) == 1
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["error"] == "SchemaError" and record["stage"] == "evaluate"
    assert record["field"].endswith((".csv", ".json"))


def test_env_overrides_out(tmp_path, monkeypatch):
    monkeypatch.setenv("VANCORISK_OUT", str(tmp_path / "env"))
    cfg = _write_config(tmp_path / "c.json", {**SMALL, "generator": {"n_patients": 50}})
    assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "env" / "events.csv").exists()
    assert not (tmp_path / "flag").exists()


def test_seed_flag_overrides_config(tmp_path):
    assert load_config(None, {"seed": 9})["seed"] == 9
    cfg = _write_config(tmp_path / "c.json", {"seed": 1})
    assert load_config(cfg, {"seed": 4})["seed"] == 4
