# ----------------------------------------------------------------------------
# File: anomalia/control/experiment.py (Comandos do Experimento)
# ----------------------------------------------------------------------------
# SPDX-License-Identifier: MIT
# Copyright (c) 2024-2025 Mateus G Pereira <mateus.pereira@ifsp.edu.br>
"""
Orquestra um experimento num diretório de layout fixo::

    <out>/config.json  datasets/  checkpoints/  scores/  reports/
         averages/  ablation/  logs/  registry.db  .aa.lock

Cada comando (`cmd_gen`, `cmd_train`, `cmd_eval`, `cmd_scan`, `cmd_ablate`,
`cmd_run`) lê os artefatos de que precisa, grava os seus de forma atômica e
os registra no banco de proveniência junto com as entradas.
"""
import logging
import os
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

import numpy as np

from anomalia.control.analysis import (ScanResult, ScoreRecord, naive_anomaly_summary,
                                       pdf_by_class, roc_auc, scan_windows, score_dataset,
                                       sigma_min_curve, simplex_pdf)
from anomalia.control.constants import (AA_TAG, ABLATION_DIR, ANOMALY_DATASET, AVERAGES_DIR,
                                        CHECKPOINT_SUFFIX, CHECKPOINTS_DIR, CONFIG_FILENAME,
                                        DATASET_SUFFIX, DATASETS_DIR, HL_LHC_LUMINOSITY,
                                        LOCK_FILENAME, MESSAGES, NORMAL_DATASET, PRIOR_TAG,
                                        REPORTS_DIR, SCORES_DIR)
from anomalia.control.eventgen import Dataset, average_image, generate_dataset, specs_for
from anomalia.control.exceptions import (ArtifactError, ConfigurationError, EmptyInputError,
                                         NumericError, UnknownClassError)
from anomalia.control.network import Architecture, NetworkParams, init_params
from anomalia.control.registry import ProvenanceRegistry
from anomalia.control.serialization import (load_checkpoint, load_dataset, load_scores,
                                            save_average_image, save_checkpoint, save_dataset,
                                            save_scores, sidecar_path)
from anomalia.control.settings import ExperimentConfig
from anomalia.control.training import (PHASE_AA, PHASE_PRIOR, RunReport, TrainConfig,
                                       aa_run, ablation_sweep, centering_metric, holdout_study,
                                       lambda_study, params_digest, prior_run)
from anomalia.control.utils import (PathLike, derive_seed, format_float,
                                    save_csv_from_list, save_json, sha256_file)

logger = logging.getLogger(__name__)

STUDIES: Tuple[str, ...] = ("sweep", "holdout", "lambda")


class ExperimentLock:
    """
    Trava consultiva `<out>/.aa.lock`, criada com O_CREAT|O_EXCL e removida
    na saída; impede dois escritores no mesmo diretório.
    """

    def __init__(self: Self, root: PathLike):
        self.path = Path(root) / LOCK_FILENAME
        self._held = False

    def acquire(self: Self) -> None:
        """
        Raises:
            ArtifactError: Trava já existente (outro processo escrevendo).
        """
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError as e:
            raise ArtifactError(
                f"Diretório de experimento em uso (trava {self.path}); remova a trava "
                "se nenhum outro processo estiver ativo.") from e
        except OSError as e:
            raise ArtifactError(f"Não foi possível criar a trava {self.path}: {e}") from e
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(f"{os.getpid()}\n")
        self._held = True
        logger.debug("Trava adquirida: %s", self.path)

    def release(self: Self) -> None:
        if not self._held:
            return
        try:
            self.path.unlink()
        except FileNotFoundError:
            logger.warning("Trava %s já havia sido removida.", self.path)
        self._held = False
        logger.debug("Trava liberada: %s", self.path)

    def __enter__(self: Self) -> Self:
        self.acquire()
        return self

    def __exit__(self: Self, *exc_info) -> None:
        self.release()


class Experiment:
    """
    Diretório de experimento aberto para escrita: layout, trava, registro
    de proveniência e eco da configuração efetiva.

    Uso::

        with Experiment(config) as exp:
            cmd_gen(exp)
    """

    def __init__(self: Self, config: ExperimentConfig):
        self.config = config
        self.root = Path(config.output_dir)
        self.seed = int(config.seed)
        self.config_digest = config.digest()
        self._lock = ExperimentLock(self.root)
        self._registry: Optional[ProvenanceRegistry] = None

    # --- Ciclo de vida ---

    def open(self: Self) -> Self:
        """
        Cria o layout, adquire a trava, abre o registro e grava `config.json`.

        Raises:
            ArtifactError: Diretório não gravável ou em uso.
        """
        try:
            for sub in (DATASETS_DIR, CHECKPOINTS_DIR, SCORES_DIR, REPORTS_DIR, AVERAGES_DIR):
                (self.root / sub).mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ArtifactError(f"Diretório de saída não gravável: {self.root} ({e})") from e
        self._lock.acquire()
        try:
            self._registry = ProvenanceRegistry(self.root)
            config_path = save_json(self.root / CONFIG_FILENAME,
                                    self.config.to_dict(include_output=False))
            self.register(config_path, "config", "config")
        except Exception:
            self.close()
            raise
        logger.info("Experimento aberto em %s (seed %d, config %s).", self.root, self.seed,
                    self.config_digest[:12])
        return self

    def close(self: Self) -> None:
        if self._registry is not None:
            self._registry.close()
            self._registry = None
        self._lock.release()

    def __enter__(self: Self) -> Self:
        return self.open()

    def __exit__(self: Self, *exc_info) -> None:
        self.close()

    @property
    def registry(self: Self) -> ProvenanceRegistry:
        if self._registry is None:
            raise ArtifactError("Experimento não aberto (use 'with Experiment(...)').")
        return self._registry

    # --- Caminhos ---

    def dataset_path(self: Self, name: str) -> Path:
        return self.root / DATASETS_DIR / f"{name}{DATASET_SUFFIX}"

    def checkpoint_path(self: Self, tag: str) -> Path:
        return self.root / CHECKPOINTS_DIR / f"{tag}{CHECKPOINT_SUFFIX}"

    def scores_path(self: Self, tag: str, dataset: str) -> Path:
        return self.root / SCORES_DIR / f"{tag}-{dataset}.csv"

    def report_path(self: Self, name: str) -> Path:
        return self.root / REPORTS_DIR / name

    def rel(self: Self, path: PathLike) -> str:
        return self.registry.relative(path)

    def register(self: Self, path: PathLike, kind: str, command: str,
                 inputs: Sequence[PathLike] = ()):
        return self.registry.register_artifact(path, kind, command, self.config_digest, inputs)

    def provenance(self: Self, inputs: Sequence[PathLike]) -> Dict[str, Any]:
        """Bloco de proveniência embutido nos JSON de saída."""
        return {"config_digest": self.config_digest,
                "inputs": {self.rel(p): sha256_file(p) for p in inputs}}

    # --- Leitura de artefatos ---

    def require(self: Self, *paths: Path) -> None:
        missing = [self.rel(p) for p in paths if not p.exists()]
        if missing:
            raise ArtifactError("Artefatos necessários ausentes; rode os comandos anteriores.",
                                missing=missing)

    def load_normal(self: Self) -> Dataset:
        path = self.dataset_path(NORMAL_DATASET)
        self.require(path, sidecar_path(path))
        return load_dataset(path)

    def load_anomalies(self: Self, required: bool = True) -> Optional[Dataset]:
        path = self.dataset_path(ANOMALY_DATASET)
        if not path.exists() and not required:
            return None
        self.require(path, sidecar_path(path))
        return load_dataset(path)

    def load_params(self: Self, path: PathLike) -> NetworkParams:
        path = Path(path)
        self.require(path)
        params, header = load_checkpoint(path)
        logger.info("Checkpoint %s carregado (fase %s, %d parâmetros).", path,
                    header.get("phase"), len(params))
        return params

    def fresh_params(self: Self, arch: Architecture) -> NetworkParams:
        return init_params(arch, derive_seed(self.seed, "init"))

    def train_config(self: Self) -> TrainConfig:
        return replace(self.config.training, seed=derive_seed(self.seed, "train"))


# --- gen ---

def cmd_gen(exp: Experiment) -> Dict[str, Path]:
    """
    Gera os datasets normal e de anomalias, com sidecars e imagens médias
    (PGM + CSV) por classe.

    Returns:
        Mapa nome -> caminho do contêiner gravado.
    """
    config = exp.config
    table = config.generator.spec_table()
    gen_config = config.generator.generator_config()
    plan = [(NORMAL_DATASET, list(config.normal_classes), "gen-normal"),
            (ANOMALY_DATASET, list(config.generator.anomaly_classes), "gen-anomaly")]
    written: Dict[str, Path] = {}
    for name, classes, component in plan:
        if not classes:
            logger.info("Dataset '%s' sem classes configuradas; pulando.", name)
            continue
        logger.info("Gerando dataset '%s': classes %s, %d por classe.", name, classes,
                    config.generator.per_class_count)
        ds = generate_dataset(specs_for(classes, table), config.generator.per_class_count,
                              config.generator.split_fraction, derive_seed(exp.seed, component),
                              gen_config)
        data_path, meta_path = save_dataset(ds, exp.dataset_path(name))
        exp.register(data_path, "dataset", "gen")
        exp.register(meta_path, "dataset-meta", "gen", [data_path])
        for class_name in classes:
            stem = exp.root / AVERAGES_DIR / class_name
            for path in save_average_image(average_image(ds, class_name), stem):
                exp.register(path, "average-image", "gen", [data_path])
        written[name] = data_path
    return written


# --- train ---

def _loss_rows(report: RunReport) -> List[List[Any]]:
    return [[e.epoch, float(e.l1), float(e.l2), float(e.total), float(e.train_acc),
             float(e.test_acc)] for e in report.epochs]


def cmd_train(exp: Experiment, phase: str = PHASE_PRIOR, init: Optional[PathLike] = None,
              cold_start: bool = False, tag: Optional[str] = None) -> RunReport:
    """
    Treina uma fase e grava checkpoint, RunReport JSON e curva de perda CSV.

    Args:
        phase: "prior" ou "aa".
        init: Checkpoint inicial; no prior run significa continuação. No AA run
            o padrão é `checkpoints/prior.ckpt`.
        cold_start: Permite o AA run sem checkpoint inicial.
        tag: Nome dos artefatos (padrão: a própria fase).

    Raises:
        ConfigurationError: Fase inválida, ou AA run sem checkpoint inicial e
            sem `cold_start`.
    """
    if phase not in (PHASE_PRIOR, PHASE_AA):
        raise ConfigurationError(f"Fase inválida '{phase}'; use '{PHASE_PRIOR}' ou '{PHASE_AA}'.")
    tag = tag or phase
    normal = exp.load_normal()
    inputs: List[Path] = [exp.dataset_path(NORMAL_DATASET)]
    init_path = Path(init) if init is not None else None
    if phase == PHASE_AA and init_path is None and exp.checkpoint_path(PRIOR_TAG).exists():
        init_path = exp.checkpoint_path(PRIOR_TAG)
    if phase == PHASE_AA and init_path is None and not cold_start:
        raise ConfigurationError(
            "AA run exige o checkpoint do prior run (--init) ou a opção --cold-start.")

    if init_path is not None:
        start = exp.load_params(init_path)
        arch = start.arch
        inputs.append(init_path)
    else:
        arch = exp.config.architecture_for(normal.image_shape)
        start = exp.fresh_params(arch)
    config = exp.train_config()

    if phase == PHASE_PRIOR:
        params, report = prior_run(normal, arch, config, start)
    else:
        anomalies = exp.load_anomalies()
        inputs.append(exp.dataset_path(ANOMALY_DATASET))
        params, report = aa_run(normal, anomalies, arch, config, start)

    ckpt = exp.checkpoint_path(tag)
    header = {"phase": phase, "tag": tag, "seed": exp.seed, "train_seed": config.seed,
              "epoch": config.epochs, "lambda_aa": config.lambda_aa,
              "optimizer": {"name": config.optimizer, "learning_rate": config.learning_rate,
                            "batch_size": config.batch_size},
              "init_sha256": params_digest(start) if init_path is not None else None,
              "config_digest": exp.config_digest}
    save_checkpoint(params, ckpt, header)
    ckpt_artifact = exp.register(ckpt, "checkpoint", "train", inputs)
    report.checkpoint = exp.rel(ckpt)

    loss_csv = save_csv_from_list(exp.report_path(f"loss-{tag}.csv"),
                                  ["epoch", "l1", "l2", "total", "train_acc", "test_acc"],
                                  _loss_rows(report))
    exp.register(loss_csv, "loss-curve", "train", [ckpt])
    document = report.to_dict()
    document.update({"tag": tag, "seed": exp.seed, "provenance": exp.provenance(inputs)})
    report_json = save_json(exp.report_path(f"train-{tag}.json"), document)
    exp.register(report_json, "run-report", "train", [*inputs, ckpt])
    exp.registry.record_run(tag, report, config.seed, ckpt_artifact)
    logger.info("Treino '%s' concluído: acurácia treino %.4f, teste %.4f.", tag,
                report.train_accuracy, report.test_accuracy)
    return report


# --- eval ---

def _split_filter(records: Sequence[ScoreRecord], metadata: Dict[str, Any],
                  split: str) -> List[ScoreRecord]:
    """Restringe registros de um arquivo de scores a uma partição do seu dataset."""
    if split == "all":
        return list(records)
    splits = metadata.get("splits", {})
    if split not in splits:
        logger.warning("Scores sem a partição '%s'; usando todos os eventos.", split)
        return list(records)
    keep = set(int(i) for i in splits[split])
    return [r for r in records if r.event_id in keep]


def _records_accuracy(records: Sequence[ScoreRecord], classes: Sequence[str]) -> float:
    axis = {name: k for k, name in enumerate(classes)}
    known = [r for r in records if r.true_class in axis]
    if not known:
        return 0.0
    hits = sum(int(np.argmax(r.probs)) == axis[r.true_class] for r in known)
    return hits / len(known)


def _centering_from_records(records: Sequence[ScoreRecord]) -> Dict[str, float]:
    result: Dict[str, float] = {}
    for name in sorted({r.true_class for r in records}):
        probs = np.stack([r.probs for r in records if r.true_class == name])
        result[name] = centering_metric(probs)
    return result


def _score_file(exp: Experiment, params: NetworkParams, ds: Dataset, ds_name: str,
                tag: str, ckpt: Path) -> Tuple[Path, List[ScoreRecord], Dict[str, Any]]:
    records = score_dataset(params, ds)
    ds_path = exp.dataset_path(ds_name)
    metadata = {"checkpoint": exp.rel(ckpt), "model_sha256": params_digest(params),
                "dataset": exp.rel(ds_path), "dataset_sha256": sha256_file(ds_path),
                "splits": {k: [int(i) for i in v] for k, v in sorted(ds.splits.items())},
                "config_digest": exp.config_digest}
    csv_path, meta_path = save_scores(exp.scores_path(tag, ds_name), records,
                                      list(exp.config.normal_classes), metadata)
    exp.register(csv_path, "scores", "eval", [ds_path, ckpt])
    exp.register(meta_path, "scores-meta", "eval", [csv_path])
    return csv_path, records, metadata


def cmd_eval(exp: Experiment, tags: Sequence[str] = (PRIOR_TAG,)) -> Dict[str, Dict[str, Any]]:
    """
    Pontua os datasets com cada checkpoint e grava scores, ROC, PDFs,
    densidade no simplex (K >= 3), P_An ingênua e centralização.

    Raises:
        ConfigurationError: Número de classes do checkpoint diferente do pedido.
    """
    analysis = exp.config.analysis
    classes = list(exp.config.normal_classes)
    axis = classes.index(analysis.scan_axis_class)
    normal = exp.load_normal()
    anomalies = exp.load_anomalies(required=False)
    summaries: Dict[str, Dict[str, Any]] = {}
    for tag in tags:
        ckpt = exp.checkpoint_path(tag)
        params = exp.load_params(ckpt)
        if params.arch.num_classes != len(classes):
            raise ConfigurationError(
                f"Checkpoint '{tag}' tem {params.arch.num_classes} classes; a configuração "
                f"pede {len(classes)} ({classes}).")
        csv_normal, normal_records, normal_meta = _score_file(exp, params, normal,
                                                              NORMAL_DATASET, tag, ckpt)
        score_files = [csv_normal]
        selected = _split_filter(normal_records, normal_meta, analysis.split)
        all_selected = list(selected)
        if anomalies is not None:
            csv_anom, anom_records, anom_meta = _score_file(exp, params, anomalies,
                                                            ANOMALY_DATASET, tag, ckpt)
            score_files.append(csv_anom)
            all_selected += _split_filter(anom_records, anom_meta, analysis.split)
        if not all_selected:
            raise EmptyInputError(f"Nenhum evento na partição '{analysis.split}' para avaliar.")

        negative = next(name for name in classes if name != analysis.scan_axis_class)
        roc = roc_auc(selected, analysis.scan_axis_class, negative, axis)
        roc_csv = save_csv_from_list(
            exp.report_path(f"roc-{tag}.csv"), ["threshold", "fpr", "tpr"],
            ([float(t), float(f), float(p)] for t, f, p in zip(roc.thresholds, roc.fpr, roc.tpr)))

        pdfs = pdf_by_class(all_selected, axis, analysis.pdf_bins)
        pdf_names = list(pdfs)
        edges = next(iter(pdfs.values())).edges
        pdf_csv = save_csv_from_list(
            exp.report_path(f"pdf-{tag}.csv"), ["bin_lo", "bin_hi", *pdf_names],
            ([float(edges[b]), float(edges[b + 1]), *[float(pdfs[n].density[b]) for n in pdf_names]]
             for b in range(edges.size - 1)))
        outputs = [roc_csv, pdf_csv]

        simplex_info = None
        if len(classes) >= 3:
            axis_names = list(analysis.simplex_axes or classes[:2])
            simplex_axes = (classes.index(axis_names[0]), classes.index(axis_names[1]))
            simplex = {}
            for name in sorted({r.true_class for r in all_selected}):
                hist = simplex_pdf([r for r in all_selected if r.true_class == name],
                                   simplex_axes, analysis.simplex_bins)
                simplex[name] = {"x_edges": hist.x_edges.tolist(),
                                 "y_edges": hist.y_edges.tolist(),
                                 "density": hist.density.tolist()}
            simplex_json = save_json(exp.report_path(f"simplex-{tag}.json"),
                                     {"axes": axis_names, "by_class": simplex})
            outputs.append(simplex_json)
            simplex_info = exp.rel(simplex_json)

        train_records = _split_filter(normal_records, normal_meta, "train")
        test_records = _split_filter(normal_records, normal_meta, "test")
        summary = {
            "tag": tag,
            "checkpoint": exp.rel(ckpt),
            "model_sha256": params_digest(params),
            "split": analysis.split,
            "accuracy": {"train": _records_accuracy(train_records, classes),
                         "test": _records_accuracy(test_records, classes)},
            "roc": {"positive": analysis.scan_axis_class, "negative": negative,
                    "axis": axis, "auc": roc.auc, "points": int(roc.fpr.size),
                    "data": exp.rel(roc_csv)},
            "pdf": {"axis_class": analysis.scan_axis_class, "bins": analysis.pdf_bins,
                    "classes": pdf_names, "data": exp.rel(pdf_csv)},
            "simplex": simplex_info,
            "naive_anomaly": naive_anomaly_summary(all_selected, list(range(len(classes)))),
            "centering": _centering_from_records(all_selected),
            "score_files": [exp.rel(p) for p in score_files],
            "provenance": exp.provenance([*score_files, ckpt]),
        }
        eval_json = save_json(exp.report_path(f"eval-{tag}.json"), summary)
        for path in (*outputs, eval_json):
            exp.register(path, "eval-report", "eval", score_files)
        logger.info("Avaliação '%s': AUC %.4f, acurácia teste %.4f.", tag, roc.auc,
                    summary["accuracy"]["test"])
        summaries[tag] = summary
    return summaries


# --- scan ---

def _delta_label(delta: float) -> str:
    return format_float(float(delta))


def _scan_rows(result: ScanResult, names: Sequence[str]) -> List[List[Any]]:
    rows = []
    for i, window in enumerate(result.windows):
        eff = result.efficiencies[i]
        err = result.errors[i]
        rows.append([float((window.p_min + window.p_max) / 2.0), float(window.p_min),
                     float(window.p_max), float(result.r_values[i]),
                     int(result.excluded[i]),
                     *["" if eff.get(n) is None else float(eff[n]) for n in names],
                     *["" if err.get(n) is None else float(err[n]) for n in names]])
    return rows


def load_tag_scores(exp: Experiment, tag: str) -> Tuple[List[ScoreRecord], List[str], List[Path]]:
    """
    Junta os scores de um checkpoint (datasets normal e de anomalias) restritos
    à partição da análise.

    Raises:
        ArtifactError: Arquivo de scores do dataset normal ausente.
        DataFormatError: Arquivo malformado (com número da linha).
    """
    split = exp.config.analysis.split
    files = [exp.scores_path(tag, NORMAL_DATASET)]
    exp.require(files[0])
    anomaly_file = exp.scores_path(tag, ANOMALY_DATASET)
    if anomaly_file.exists():
        files.append(anomaly_file)
    records: List[ScoreRecord] = []
    class_names: List[str] = []
    for path in files:
        loaded, metadata = load_scores(path)
        names = list(metadata.get("class_names", []))
        if class_names and names and names != class_names:
            raise ConfigurationError(f"Classes divergentes entre arquivos de scores: {path}.")
        class_names = class_names or names
        records += _split_filter(loaded, metadata, split)
    return records, class_names, files


def cmd_scan(exp: Experiment, tag: str = AA_TAG) -> Dict[str, Any]:
    """
    Varre janelas sobre P(eixo) para cada delta e grava a curva R(centro),
    o resumo de R_max e a curva sigma_min(L).

    Raises:
        UnknownClassError: Eixo da varredura fora das classes dos scores.
    """
    analysis = exp.config.analysis
    records, class_names, files = load_tag_scores(exp, tag)
    if analysis.scan_axis_class not in class_names:
        raise UnknownClassError(analysis.scan_axis_class, class_names)
    axis = class_names.index(analysis.scan_axis_class)
    names = [analysis.anomaly_class, *analysis.backgrounds]
    header = ["center", "p_min", "p_max", "R", "excluded",
              *[f"eps_{n}" for n in names], *[f"err_{n}" for n in names]]

    deltas: List[Dict[str, Any]] = []
    curves: Dict[str, List[Tuple[float, Optional[float]]]] = {}
    outputs: List[Path] = []
    for delta in analysis.deltas:
        result = scan_windows(records, delta, delta * analysis.step_fraction,
                              analysis.cross_sections, analysis.anomaly_class,
                              analysis.backgrounds, axis)
        label = _delta_label(delta)
        curve_csv = save_csv_from_list(exp.report_path(f"scan-{tag}-d{label}.csv"), header,
                                       _scan_rows(result, names))
        outputs.append(curve_csv)
        best = result.best_window
        entry = {"delta": float(delta), "step": float(result.step), "r_max": result.r_max,
                 "best_window": [best.p_min, best.p_max],
                 "best_center": (best.p_min + best.p_max) / 2.0,
                 "n_windows": len(result.windows), "n_excluded": int(sum(result.excluded)),
                 "counts": result.counts, "curve": exp.rel(curve_csv)}
        try:
            curves[label] = list(sigma_min_curve(result.r_max, analysis.luminosities,
                                                 analysis.threshold))
        except NumericError as e:
            logger.warning("sigma_min indefinido para delta=%s: %s", label, e)
            curves[label] = [(float(lum), None) for lum in analysis.luminosities]
        hl = [s for lum, s in curves[label] if lum == HL_LHC_LUMINOSITY]
        entry["sigma_min_hl_lhc"] = hl[0] if hl else None
        deltas.append(entry)
        logger.info("Varredura delta=%s: R_max=%.6g em [%.4f, %.4f].", label, result.r_max,
                    best.p_min, best.p_max)

    labels = list(curves)
    sigma_csv = save_csv_from_list(
        exp.report_path(f"sigma-{tag}.csv"), ["luminosity", *[f"sigma_d{lab}" for lab in labels]],
        ([float(lum), *["" if curves[lab][i][1] is None else float(curves[lab][i][1])
                        for lab in labels]]
         for i, lum in enumerate(analysis.luminosities)))
    outputs.append(sigma_csv)
    summary = {"tag": tag, "axis_class": analysis.scan_axis_class,
               "anomaly_class": analysis.anomaly_class,
               "backgrounds": list(analysis.backgrounds),
               "cross_sections": dict(sorted(analysis.cross_sections.items())),
               "split": analysis.split, "threshold": analysis.threshold,
               "deltas": deltas,
               "sigma_min": {"luminosities": [float(v) for v in analysis.luminosities],
                             "by_delta": {lab: [s for _, s in curves[lab]] for lab in labels},
                             "data": exp.rel(sigma_csv)},
               "notes": [MESSAGES["sigma_top_note"], MESSAGES["excluded_window"]],
               "provenance": exp.provenance(files)}
    scan_json = save_json(exp.report_path(f"scan-{tag}.json"), summary)
    for path in (*outputs, scan_json):
        exp.register(path, "scan", "scan", files)
    return summary


# --- ablate ---

def _ablation_init(exp: Experiment, cold_start: bool) -> Optional[NetworkParams]:
    """Checkpoint do prior run; com --cold-start e sem checkpoint, None (prior em memória)."""
    ckpt = exp.checkpoint_path(PRIOR_TAG)
    if ckpt.exists():
        return exp.load_params(ckpt)
    if not cold_start:
        raise ConfigurationError(
            "Ablação exige o checkpoint do prior run ou a opção --cold-start.")
    return None


def cmd_ablate(exp: Experiment, study: str = "sweep",
               cold_start: bool = False) -> Dict[str, Any]:
    """
    Estudos sobre o conjunto de anomalias, gravados em `ablation/`:

    * ``sweep``: varredura cumulativa com a classe retida (tabela de saturação);
    * ``holdout``: retém cada classe por vez;
    * ``lambda``: AA runs sobre a grade de lambda_AA.
    """
    if study not in STUDIES:
        raise ConfigurationError(f"Estudo desconhecido '{study}'; opções: {STUDIES}.")
    normal = exp.load_normal()
    anomalies = exp.load_anomalies()
    arch = exp.config.architecture_for(normal.image_shape)
    init = _ablation_init(exp, cold_start)
    if init is not None:
        arch = init.arch
    inputs = [exp.dataset_path(NORMAL_DATASET), exp.dataset_path(ANOMALY_DATASET)]
    if exp.checkpoint_path(PRIOR_TAG).exists():
        inputs.append(exp.checkpoint_path(PRIOR_TAG))
    out_dir = exp.root / ABLATION_DIR
    out_dir.mkdir(parents=True, exist_ok=True)

    if study == "sweep":
        # Sementes por passo derivadas da semente global ("ablation-<n>")
        config = replace(exp.config.training, seed=exp.seed)
        heldout = exp.config.ablation.heldout
        steps = ablation_sweep(normal, anomalies, arch, config, init, heldout,
                               exp.config.ablation.order)
        rows = [[s.n_classes, "+".join(s.classes), float(s.prior_centering),
                 float(s.heldout_centering), float(s.gain)] for s in steps]
        table = save_csv_from_list(out_dir / "saturation.csv",
                                   ["n_classes", "classes", "prior_centering",
                                    "heldout_centering", "gain"], rows)
        document = {"study": study, "heldout": heldout,
                    "order": list(exp.config.ablation.order),
                    "steps": [s.to_dict() for s in steps]}
    elif study == "holdout":
        results = holdout_study(normal, anomalies, arch, exp.train_config(), init)
        rows = [[r.heldout, "+".join(r.aware), float(r.prior_centering),
                 float(r.aa_centering), float(r.gain)] for r in results.values()]
        table = save_csv_from_list(out_dir / "holdout.csv",
                                   ["heldout", "aware", "prior_centering", "aa_centering",
                                    "gain"], rows)
        document = {"study": study,
                    "results": [{"heldout": r.heldout, "aware": r.aware,
                                 "prior_centering": r.prior_centering,
                                 "aa_centering": r.aa_centering, "gain": r.gain}
                                for r in results.values()]}
    else:
        results = lambda_study(normal, anomalies, arch, exp.train_config(), init)
        names = sorted({n for r in results for n in r.centering})
        rows = [[float(r.lambda_aa), float(r.test_accuracy),
                 *[float(r.centering.get(n, float("nan"))) for n in names]] for r in results]
        table = save_csv_from_list(out_dir / "lambda.csv",
                                   ["lambda_aa", "test_accuracy",
                                    *[f"centering_{n}" for n in names]], rows)
        document = {"study": study,
                    "results": [{"lambda_aa": r.lambda_aa, "test_accuracy": r.test_accuracy,
                                 "centering": r.centering} for r in results]}

    document["provenance"] = exp.provenance(inputs)
    doc_json = save_json(out_dir / f"{study}.json", document)
    exp.register(table, "ablation", "ablate", inputs)
    exp.register(doc_json, "ablation", "ablate", inputs)
    return document


# --- run ---

def cmd_run(exp: Experiment) -> Dict[str, Any]:
    """Pipeline completo: gen -> train prior -> train aa -> eval -> scan."""
    cmd_gen(exp)
    cmd_train(exp, PHASE_PRIOR)
    cmd_train(exp, PHASE_AA, init=exp.checkpoint_path(PRIOR_TAG))
    evaluations = cmd_eval(exp, (PRIOR_TAG, AA_TAG))
    scans = {tag: cmd_scan(exp, tag) for tag in (PRIOR_TAG, AA_TAG)}
    return {"evaluations": evaluations, "scans": scans}
