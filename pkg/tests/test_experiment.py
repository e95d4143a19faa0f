# ----------------------------------------------------------------------------
# File: tests/test_experiment.py (Testes dos Comandos e do Relatório)
# ----------------------------------------------------------------------------
# SPDX-License-Identifier: MIT
# Copyright (c) 2024-2025 Mateus G Pereira <mateus.pereira@ifsp.edu.br>
"""
Testes de ponta a ponta sobre um experimento mínimo: layout, trava,
gen/train/eval/scan/ablate, relatório consolidado, verificação de digests e
reprodutibilidade entre diretórios.
"""
import json
import shutil
from dataclasses import replace

import pytest

from conftest import tiny_config_dict

from anomalia.control.constants import MESSAGES, REPORT_SCHEMA_ID
from anomalia.control.exceptions import ArtifactError, ConfigurationError
from anomalia.control.experiment import (Experiment, cmd_ablate, cmd_eval, cmd_gen, cmd_run,
                                         cmd_scan, cmd_train, load_tag_scores)
from anomalia.control.report import build_report, cmd_report, validate_report
from anomalia.control.serialization import load_checkpoint, load_dataset
from anomalia.control.settings import ExperimentConfig, apply_overrides
from anomalia.control.training import PHASE_AA, PHASE_PRIOR


def _config(root, **overrides):
    return apply_overrides(ExperimentConfig.from_dict(tiny_config_dict(str(root))), **overrides)


def _run_all(config):
    with Experiment(config) as exp:
        summary = cmd_run(exp)
        report = cmd_report(exp)
    return summary, report


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Experimento completo (run + report) compartilhado pelos testes de leitura."""
    root = tmp_path_factory.mktemp("pipeline") / "exp"
    summary, report = _run_all(_config(root))
    return root, summary, report


def _reopen(src, dst):
    shutil.copytree(src, dst)
    return Experiment(_config(dst))


# --- Layout e trava ---

def test_open_creates_layout_and_config_echo(tiny_config):
    with Experiment(tiny_config) as exp:
        root = exp.root
        assert (root / ".aa.lock").exists()
        for sub in ("datasets", "checkpoints", "scores", "reports", "averages"):
            assert (root / sub).is_dir()
        echo = json.loads((root / "config.json").read_text(encoding="utf-8"))
        assert "output_dir" not in echo
        assert ExperimentConfig.from_dict(echo).digest() == tiny_config.digest()
        assert [a.path for a in exp.registry.artifacts()] == ["config.json"]
    assert not (root / ".aa.lock").exists()


def test_second_writer_is_rejected(tiny_config):
    with Experiment(tiny_config) as exp:
        with pytest.raises(ArtifactError, match="em uso"):
            Experiment(tiny_config).open()
        assert (exp.root / ".aa.lock").exists()


def test_closed_experiment_has_no_registry(tiny_config):
    with pytest.raises(ArtifactError):
        _ = Experiment(tiny_config).registry


# --- Comandos individuais ---

def test_gen_writes_datasets_and_averages(tiny_config):
    with Experiment(tiny_config) as exp:
        written = cmd_gen(exp)
        normal = load_dataset(written["normal"])
        anomalies = load_dataset(written["anomalies"])
        assert normal.class_names == ("QCD", "Top")
        assert anomalies.class_names == ("W", "R2", "R3", "R4", "EFT")
        assert normal.counts() == {"QCD": 15, "Top": 15}
        for name in ("QCD", "Top", "W", "EFT"):
            assert (exp.root / "averages" / f"{name}.pgm").exists()
            assert (exp.root / "averages" / f"{name}.csv").exists()
        assert exp.registry.lineage(exp.root / "datasets" / "normal.json") == \
            ["datasets/normal.aajd"]


def test_gen_is_deterministic_per_seed(tmp_path):
    digests = []
    for name, seed in (("a", 7), ("b", 7), ("c", 8)):
        with Experiment(_config(tmp_path / name, seed=seed)) as exp:
            digests.append(cmd_gen(exp)["normal"].read_bytes())
    assert digests[0] == digests[1]
    assert digests[0] != digests[2]


def test_train_requires_generated_data(tiny_config):
    with Experiment(tiny_config) as exp:
        with pytest.raises(ArtifactError) as excinfo:
            cmd_train(exp, PHASE_PRIOR)
    assert "datasets/normal.aajd" in excinfo.value.missing


def test_aa_run_without_prior_checkpoint(tiny_config):
    with Experiment(tiny_config) as exp:
        cmd_gen(exp)
        with pytest.raises(ConfigurationError, match="cold-start"):
            cmd_train(exp, PHASE_AA)
        report = cmd_train(exp, PHASE_AA, cold_start=True, tag="aa-frio")
        assert report.phase == PHASE_AA
        assert exp.checkpoint_path("aa-frio").exists()
        with pytest.raises(ConfigurationError):
            cmd_train(exp, "fase")


def test_zero_lambda_aa_matches_prior_continuation(tmp_path):
    config = _config(tmp_path / "exp", lambda_aa=0.0)
    with Experiment(config) as exp:
        cmd_gen(exp)
        cmd_train(exp, PHASE_PRIOR)
        prior_ckpt = exp.checkpoint_path("prior")
        cont = cmd_train(exp, PHASE_PRIOR, init=prior_ckpt, tag="prior-cont")
        aware = cmd_train(exp, PHASE_AA)
        assert aware.params_sha256 == cont.params_sha256
        a, _ = load_checkpoint(exp.checkpoint_path("aa"))
        b, _ = load_checkpoint(exp.checkpoint_path("prior-cont"))
        assert a.flat.tobytes() == b.flat.tobytes()
        assert exp.registry.lineage(exp.checkpoint_path("aa")) == \
            ["checkpoints/prior.ckpt", "datasets/anomalies.aajd", "datasets/normal.aajd"]


def test_eval_rejects_checkpoint_with_other_class_count(tmp_path, pipeline):
    root, _, _ = pipeline
    with _reopen(root, tmp_path / "copia") as exp:
        three = replace(exp.config, training=replace(exp.config.training,
                                                     normal_classes=("QCD", "Top", "W")))
        exp.config = three
        with pytest.raises(ConfigurationError, match="classes"):
            cmd_eval(exp, ["prior"])


def test_eval_simplex_uses_configured_axes(tmp_path):
    data = tiny_config_dict(str(tmp_path / "exp"))
    data["generator"]["anomaly_classes"] = ["R2", "EFT"]
    data["training"].update(normal_classes=["QCD", "Top", "W"], anomaly_classes=["R2"])
    data["analysis"]["simplex_axes"] = ["W", "QCD"]
    with Experiment(ExperimentConfig.from_dict(data)) as exp:
        cmd_gen(exp)
        cmd_train(exp, PHASE_PRIOR)
        summary = cmd_eval(exp, ["prior"])["prior"]
        simplex = json.loads((exp.root / summary["simplex"]).read_text(encoding="utf-8"))
    assert simplex["axes"] == ["W", "QCD"]
    assert set(simplex["by_class"]) == {"QCD", "Top", "W", "R2", "EFT"}


# --- Pipeline completo ---

def test_pipeline_outputs(pipeline):
    root, summary, _ = pipeline
    for tag in ("prior", "aa"):
        assert (root / "checkpoints" / f"{tag}.ckpt").exists()
        assert (root / "scores" / f"{tag}-normal.csv").exists()
        assert (root / "scores" / f"{tag}-anomalies.csv").exists()
        for name in (f"train-{tag}.json", f"loss-{tag}.csv", f"eval-{tag}.json",
                     f"roc-{tag}.csv", f"pdf-{tag}.csv", f"scan-{tag}.json", f"sigma-{tag}.csv"):
            assert (root / "reports" / name).exists(), name
    evaluation = summary["evaluations"]["aa"]
    assert 0.0 <= evaluation["roc"]["auc"] <= 1.0
    assert evaluation["simplex"] is None
    assert set(evaluation["naive_anomaly"]["mean_by_class"]) == \
        {"QCD", "Top", "W", "R2", "R3", "R4", "EFT"}
    scan = summary["scans"]["aa"]
    assert [d["delta"] for d in scan["deltas"]] == [0.1, 0.2]
    assert scan["sigma_min"]["luminosities"] == [100.0, 1000.0, 3000.0]
    for entry in scan["deltas"]:
        assert entry["r_max"] >= 0.0
        assert (root / entry["curve"]).exists()


def test_scan_scores_restricted_to_test_split(pipeline):
    root, _, _ = pipeline
    meta = json.loads((root / "scores" / "aa-normal.json").read_text(encoding="utf-8"))
    assert meta["class_names"] == ["QCD", "Top"]
    assert meta["n_records"] == 30
    assert len(meta["splits"]["test"]) == 6


def test_load_tag_scores_and_rescan(tmp_path, pipeline):
    root, summary, _ = pipeline
    with _reopen(root, tmp_path / "copia") as exp:
        records, names, files = load_tag_scores(exp, "aa")
        assert names == ["QCD", "Top"]
        assert len(files) == 2
        assert len(records) == 6 + 5 * 3
        again = cmd_scan(exp, "aa")
    assert again["deltas"] == summary["scans"]["aa"]["deltas"]


def test_report_document(pipeline):
    root, _, report = pipeline
    assert validate_report(report) == []
    assert report["schema"] == REPORT_SCHEMA_ID
    assert set(report["runs"]) == {"prior", "aa"}
    assert report["runs"]["aa"]["lambda_aa"] == 0.5
    assert report["runs"]["prior"]["lambda_aa"] == 0.0
    assert isinstance(report["auc_difference"], float)
    assert report["auc_difference"] == pytest.approx(
        report["evaluations"]["prior"]["auc"] - report["evaluations"]["aa"]["auc"])
    assert report["digest_mismatches"] == []
    assert all(a["status"] == MESSAGES["digest_ok"] for a in report["artifacts"])
    assert MESSAGES["cuts_note"] in report["notes"]
    assert report["ablation"] is None
    on_disk = json.loads((root / "reports" / "report.json").read_text(encoding="utf-8"))
    assert on_disk == json.loads(json.dumps(report))
    assert (root / "reports" / "summary.xlsx").exists()
    assert all(not a["path"].startswith("/") for a in report["artifacts"])


def test_report_flags_tampered_artifact(tmp_path, pipeline):
    root, _, _ = pipeline
    with _reopen(root, tmp_path / "copia") as exp:
        with open(exp.root / "averages" / "QCD.csv", "a", encoding="utf-8") as f:
            f.write("0.0\n")
        report = build_report(exp)
    assert report["digest_mismatches"] == ["averages/QCD.csv"]
    assert validate_report(report) == []


def test_report_lists_every_missing_artifact(tmp_path, pipeline):
    root, _, _ = pipeline
    with _reopen(root, tmp_path / "copia") as exp:
        (exp.root / "checkpoints" / "prior.ckpt").unlink()
        (exp.root / "scores" / "aa-normal.csv").unlink()
        with pytest.raises(ArtifactError) as excinfo:
            build_report(exp)
    assert "checkpoints/prior.ckpt" in excinfo.value.missing
    assert "scores/aa-normal.csv" in excinfo.value.missing


def test_report_on_empty_experiment(tiny_config):
    with Experiment(tiny_config) as exp:
        with pytest.raises(ArtifactError) as excinfo:
            cmd_report(exp)
    assert "reports/train-prior.json" in excinfo.value.missing


def test_validate_report_problems():
    problems = validate_report({})
    assert "campo ausente: schema" in problems
    assert len(problems) == 14
    problems = validate_report({"schema": "outro/9", "extra": 1})
    assert "campo não previsto: extra" in problems
    assert "esquema desconhecido: outro/9" in problems


def test_same_seed_in_two_directories_gives_identical_report(tmp_path, pipeline):
    root, _, _ = pipeline
    other = tmp_path / "outro"
    _run_all(_config(other))
    for rel in ("reports/report.json", "checkpoints/aa.ckpt", "scores/aa-anomalies.csv",
                "reports/scan-aa.json", "datasets/anomalies.aajd"):
        assert (root / rel).read_bytes() == (other / rel).read_bytes(), rel


# --- Ablação ---

def test_ablation_studies_feed_the_report(tmp_path, pipeline):
    root, _, _ = pipeline
    with _reopen(root, tmp_path / "copia") as exp:
        sweep = cmd_ablate(exp, "sweep")
        holdout = cmd_ablate(exp, "holdout")
        lambdas = cmd_ablate(exp, "lambda")
        with pytest.raises(ConfigurationError):
            cmd_ablate(exp, "grade")
        report = cmd_report(exp)
    assert [s["classes"] for s in sweep["steps"]][-1] == ["W", "R4", "R3", "R2"]
    assert [s["n_classes"] for s in sweep["steps"]] == [1, 2, 3, 4]
    assert [r["heldout"] for r in holdout["results"]] == ["W", "R2", "R3", "R4"]
    assert [r["lambda_aa"] for r in lambdas["results"]] == [0.3, 0.5, 0.8]
    assert len(report["ablation"]["saturation"]) == 4
    assert set(report["studies"]) == {"holdout", "lambda"}
    assert (tmp_path / "copia" / "ablation" / "saturation.csv").exists()
    assert validate_report(report) == []


def test_ablation_without_prior_checkpoint(tmp_path):
    with Experiment(_config(tmp_path / "exp")) as exp:
        cmd_gen(exp)
        with pytest.raises(ConfigurationError, match="cold-start"):
            cmd_ablate(exp, "sweep")
        sweep = cmd_ablate(exp, "sweep", cold_start=True)
    assert [s["n_classes"] for s in sweep["steps"]] == [1, 2, 3, 4]
    assert not (tmp_path / "exp" / "checkpoints" / "prior.ckpt").exists()
