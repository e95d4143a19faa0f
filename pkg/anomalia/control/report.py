# ----------------------------------------------------------------------------
# File: anomalia/control/report.py (Relatório Consolidado)
# ----------------------------------------------------------------------------
# SPDX-License-Identifier: MIT
# Copyright (c) 2024-2025 Mateus G Pereira <mateus.pereira@ifsp.edu.br>
"""
Agrega os artefatos de um diretório de experimento (configuração, treinos,
avaliações, varreduras e ablação) num único documento JSON com os digests de
proveniência. O documento não contém horários nem caminhos absolutos: o mesmo
experimento com a mesma semente produz o mesmo relatório, byte a byte.
"""
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from anomalia.control.constants import (AA_TAG, ABLATION_DIR, CHECKPOINT_SUFFIX,
                                        CHECKPOINTS_DIR, CONFIG_FILENAME, DATASET_SUFFIX,
                                        DATASETS_DIR, MESSAGES, NORMAL_DATASET, PRIOR_TAG,
                                        REPORT_JSON, REPORT_SCHEMA_ID, REPORTS_DIR,
                                        SUMMARY_XLSX)
from anomalia.control.excel_exporter import export_report_xlsx
from anomalia.control.exceptions import ArtifactError
from anomalia.control.experiment import Experiment
from anomalia.control.utils import load_csv_rows, load_json, save_json

logger = logging.getLogger(__name__)

# Artefatos gerados pelo próprio relatório (fora da listagem de proveniência)
REPORT_KINDS: Tuple[str, ...] = ("report",)

# Chave -> tipos aceitos no nível superior do documento
REPORT_SCHEMA: Dict[str, Tuple[type, ...]] = {
    "schema": (str,),
    "title": (str,),
    "seed": (int,),
    "config_digest": (str,),
    "config": (dict,),
    "runs": (dict,),
    "evaluations": (dict,),
    "auc_difference": (float, type(None)),
    "scans": (dict,),
    "ablation": (dict, type(None)),
    "studies": (dict,),
    "artifacts": (list,),
    "digest_mismatches": (list,),
    "notes": (list,),
}

_RUN_FIELDS: Dict[str, Tuple[type, ...]] = {
    "phase": (str,), "lambda_aa": (float, int), "train_accuracy": (float, int),
    "test_accuracy": (float, int), "params_sha256": (str,), "centering": (dict,),
}
_ARTIFACT_FIELDS = ("path", "kind", "sha256", "status")


def required_artifacts(root: Path) -> List[Path]:
    """Arquivos sem os quais o relatório não pode ser montado."""
    normal = root / DATASETS_DIR / f"{NORMAL_DATASET}{DATASET_SUFFIX}"
    return [root / CONFIG_FILENAME, normal, normal.with_suffix(".json"),
            root / CHECKPOINTS_DIR / f"{PRIOR_TAG}{CHECKPOINT_SUFFIX}",
            root / REPORTS_DIR / f"train-{PRIOR_TAG}.json"]


def _tag_of(path: Path, prefix: str) -> str:
    return path.stem[len(prefix):]


def _collect(root: Path, prefix: str) -> Dict[str, Dict[str, Any]]:
    """Documentos `reports/<prefix><tag>.json`, por tag, em ordem de nome."""
    found: Dict[str, Dict[str, Any]] = {}
    for path in sorted((root / REPORTS_DIR).glob(f"{prefix}*.json")):
        found[_tag_of(path, prefix)] = load_json(path)
    return found


def _run_summary(doc: Dict[str, Any]) -> Dict[str, Any]:
    return {"phase": doc["phase"], "lambda_aa": float(doc["config"].get("lambda_aa", 0.0)),
            "train_accuracy": doc["train_accuracy"], "test_accuracy": doc["test_accuracy"],
            "params_sha256": doc["params_sha256"], "checkpoint": doc.get("checkpoint"),
            "epochs": len(doc.get("epochs", [])), "centering": doc.get("centering", {})}


def _eval_summary(doc: Dict[str, Any]) -> Dict[str, Any]:
    return {"auc": doc["roc"]["auc"], "roc_axis": doc["roc"]["positive"],
            "accuracy": doc["accuracy"], "centering": doc["centering"],
            "naive_anomaly": doc["naive_anomaly"]["mean_by_class"],
            "model_sha256": doc["model_sha256"]}


def _scan_summary(doc: Dict[str, Any]) -> Dict[str, Any]:
    return {"anomaly_class": doc["anomaly_class"], "axis_class": doc["axis_class"],
            "backgrounds": doc["backgrounds"],
            "deltas": [{"delta": d["delta"], "r_max": d["r_max"],
                        "best_window": d["best_window"], "n_excluded": d["n_excluded"],
                        "sigma_min_hl_lhc": d["sigma_min_hl_lhc"], "curve": d["curve"]}
                       for d in doc["deltas"]],
            "sigma_min": doc["sigma_min"]}


def _saturation(root: Path) -> Optional[Dict[str, Any]]:
    sweep = root / ABLATION_DIR / "sweep.json"
    if not sweep.exists():
        return None
    doc = load_json(sweep)
    table = [{"n_classes": s["n_classes"], "classes": s["classes"],
              "prior_centering": s["prior_centering"],
              "heldout_centering": s["heldout_centering"], "gain": s["gain"]}
             for s in doc["steps"]]
    return {"heldout": doc["heldout"], "saturation": table}


def _studies(root: Path) -> Dict[str, Any]:
    studies: Dict[str, Any] = {}
    for name in ("holdout", "lambda"):
        path = root / ABLATION_DIR / f"{name}.json"
        if path.exists():
            studies[name] = load_json(path)["results"]
    return studies


def build_report(exp: Experiment) -> Dict[str, Any]:
    """
    Monta o relatório consolidado.

    Raises:
        ArtifactError: Listando todos os artefatos obrigatórios ausentes
            (incluindo arquivos registrados que sumiram).
    """
    root = exp.root
    registry = exp.registry
    missing = [exp.rel(p) for p in required_artifacts(root) if not p.exists()]
    status = registry.verify()
    tracked = [item for item in registry.artifacts() if item.kind not in REPORT_KINDS]
    missing += [item.path for item in tracked
                if status[item.path] == MESSAGES["digest_missing"] and item.path not in missing]
    if missing:
        raise ArtifactError("Relatório impossível: artefatos do experimento ausentes.",
                            missing=sorted(missing))

    artifacts = []
    for item in tracked:
        artifacts.append({"path": item.path, "kind": item.kind, "sha256": item.sha256,
                          "status": status[item.path], "inputs": registry.lineage(item.path)})
    mismatches = [a["path"] for a in artifacts if a["status"] == MESSAGES["digest_mismatch"]]
    if mismatches:
        logger.warning("Relatório: %d artefato(s) com digest divergente: %s",
                       len(mismatches), mismatches)

    runs = {tag: _run_summary(doc) for tag, doc in _collect(root, "train-").items()}
    evaluations = {tag: _eval_summary(doc) for tag, doc in _collect(root, "eval-").items()}
    scans = {tag: _scan_summary(doc) for tag, doc in _collect(root, "scan-").items()}
    auc_difference = None
    if PRIOR_TAG in evaluations and AA_TAG in evaluations:
        auc_difference = float(evaluations[PRIOR_TAG]["auc"] - evaluations[AA_TAG]["auc"])

    config = load_json(root / CONFIG_FILENAME)
    return {
        "schema": REPORT_SCHEMA_ID,
        "title": MESSAGES["summary_title"],
        "seed": int(config.get("seed", exp.seed)),
        "config_digest": exp.config_digest,
        "config": config,
        "runs": runs,
        "evaluations": evaluations,
        "auc_difference": auc_difference,
        "scans": scans,
        "ablation": _saturation(root),
        "studies": _studies(root),
        "artifacts": artifacts,
        "digest_mismatches": mismatches,
        "notes": [MESSAGES["naive_note"], MESSAGES["sigma_top_note"], MESSAGES["cuts_note"]],
    }


def validate_report(report: Dict[str, Any]) -> List[str]:
    """
    Confere o documento contra o esquema publicado.

    Returns:
        Lista de problemas encontrados (vazia quando válido).
    """
    problems: List[str] = []
    for key, types in REPORT_SCHEMA.items():
        if key not in report:
            problems.append(f"campo ausente: {key}")
        elif not isinstance(report[key], types) or isinstance(report[key], bool):
            problems.append(f"tipo inválido em {key}: {type(report[key]).__name__}")
    for key in sorted(set(report) - set(REPORT_SCHEMA)):
        problems.append(f"campo não previsto: {key}")
    if "schema" in report and report["schema"] != REPORT_SCHEMA_ID:
        problems.append(f"esquema desconhecido: {report['schema']}")
    for tag, run in (report.get("runs") or {}).items():
        for key, types in _RUN_FIELDS.items():
            if not isinstance(run.get(key), types):
                problems.append(f"runs.{tag}.{key} ausente ou inválido")
    for i, item in enumerate(report.get("artifacts") or []):
        for key in _ARTIFACT_FIELDS:
            if not isinstance(item.get(key), str):
                problems.append(f"artifacts[{i}].{key} ausente ou inválido")
    for tag, scan in (report.get("scans") or {}).items():
        for entry in scan.get("deltas", []):
            if not isinstance(entry.get("r_max"), (float, int)) or entry["r_max"] < 0:
                problems.append(f"scans.{tag}: r_max inválido para delta {entry.get('delta')}")
    return problems


def _xlsx_tables(root: Path, report: Dict[str, Any]) -> Dict[str, List[List[Any]]]:
    r_rows: List[List[Any]] = []
    sigma_rows: List[List[Any]] = []
    for tag, scan in report["scans"].items():
        for entry in scan["deltas"]:
            rows = load_csv_rows(root / entry["curve"])
            for row in rows[1:]:
                r_rows.append([tag, entry["delta"], float(row[0]), float(row[1]),
                               float(row[2]), float(row[3]), int(row[4])])
        lums = scan["sigma_min"]["luminosities"]
        for label, values in scan["sigma_min"]["by_delta"].items():
            for lum, value in zip(lums, values):
                sigma_rows.append([tag, float(label), lum, value])
    saturation = [[s["n_classes"], "+".join(s["classes"]), s["prior_centering"],
                   s["heldout_centering"], s["gain"]]
                  for s in (report["ablation"] or {}).get("saturation", [])]
    return {"r_scan": r_rows, "sigma_min": sigma_rows, "saturation": saturation}


def cmd_report(exp: Experiment) -> Dict[str, Any]:
    """
    Grava `reports/report.json` e a planilha `reports/summary.xlsx`.

    Raises:
        ArtifactError: Artefatos obrigatórios ausentes.
    """
    report = build_report(exp)
    problems = validate_report(report)
    if problems:
        # Não deveria acontecer com artefatos gerados por esta versão
        logger.error("Relatório fora do esquema: %s", problems)
    path = save_json(exp.root / REPORTS_DIR / REPORT_JSON, report)
    exp.register(path, "report", "report")
    xlsx = export_report_xlsx(report, _xlsx_tables(exp.root, report),
                              exp.root / REPORTS_DIR / SUMMARY_XLSX)
    if xlsx is not None:
        exp.register(xlsx, "report", "report", [path])
    logger.info("Relatório consolidado salvo em %s", path)
    return report
