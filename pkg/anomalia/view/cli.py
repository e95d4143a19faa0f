# ----------------------------------------------------------------------------
# File: anomalia/view/cli.py (Interface de Linha de Comando)
# ----------------------------------------------------------------------------
# SPDX-License-Identifier: MIT
# Copyright (c) 2024-2025 Mateus G Pereira <mateus.pereira@ifsp.edu.br>
"""
Interface de linha de comando `aa`: subcomandos gen, train, eval, scan,
ablate, report e run, resolução da configuração efetiva e o resumo textual
do relatório consolidado.
"""
import argparse
import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from anomalia.control.constants import (AA_TAG, CONFIG_FILENAME, DEFAULT_OUTPUT_DIR,
                                        LOG_SEPARATOR_WIDTH, MESSAGES, PRIOR_TAG,
                                        REPORTS_DIR, SUMMARY_TXT)
from anomalia.control.experiment import STUDIES, Experiment, cmd_ablate, cmd_eval, cmd_gen
from anomalia.control.experiment import cmd_run, cmd_scan, cmd_train
from anomalia.control.report import cmd_report
from anomalia.control.settings import ExperimentConfig, apply_overrides, load_config
from anomalia.control.training import PHASE_AA, PHASE_PRIOR
from anomalia.control.utils import atomic_write_text

logger = logging.getLogger(__name__)

COMMANDS = ("gen", "train", "eval", "scan", "ablate", "report", "run")


def build_parser() -> argparse.ArgumentParser:
    """Monta o parser com as opções comuns e as de cada subcomando."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None,
                        help="Arquivo de configuração (.json ou .toml).")
    common.add_argument("--seed", type=int, default=None, help="Semente global.")
    common.add_argument("--out", type=Path, default=None, help="Diretório do experimento.")
    common.add_argument("--lambda-aa", dest="lambda_aa", type=float, default=None,
                        help="Peso lambda_AA do termo de anomalias.")
    common.add_argument("--delta", dest="deltas", type=float, action="append", default=None,
                        help="Largura de janela da varredura (repetível).")
    common.add_argument("--per-class-count", dest="per_class_count", type=int, default=None,
                        help="Imagens geradas por classe.")
    common.add_argument("--epochs", type=int, default=None, help="Épocas de treinamento.")
    common.add_argument("-v", "--verbose", action="store_true", help="Log em nível DEBUG.")

    parser = argparse.ArgumentParser(
        prog="aa",
        description="Anomaly Awareness: treino com consciência de anomalias, "
                    "varredura de janelas e significância.")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="{" + ",".join(COMMANDS) + "}")

    sub.add_parser("gen", parents=[common], help="Gera os datasets e as imagens médias.")

    train = sub.add_parser("train", parents=[common], help="Treina o prior run ou o AA run.")
    train.add_argument("--phase", choices=(PHASE_PRIOR, PHASE_AA), default=PHASE_PRIOR)
    train.add_argument("--init", type=Path, default=None,
                       help="Checkpoint inicial (continuação ou ponto de partida do AA run).")
    train.add_argument("--cold-start", dest="cold_start", action="store_true",
                       help="Permite o AA run sem checkpoint do prior run.")
    train.add_argument("--tag", default=None, help="Nome dos artefatos (padrão: a fase).")

    evaluate = sub.add_parser("eval", parents=[common], help="Pontua os datasets.")
    evaluate.add_argument("--checkpoint", dest="checkpoints", action="append", default=None,
                          help="Tag do checkpoint (repetível; padrão: prior e aa existentes).")

    scan = sub.add_parser("scan", parents=[common], help="Varredura de janelas e sigma_min.")
    scan.add_argument("--checkpoint", default=AA_TAG, help="Tag dos scores a varrer.")

    ablate = sub.add_parser("ablate", parents=[common], help="Estudos do conjunto de anomalias.")
    ablate.add_argument("--study", choices=STUDIES, default="sweep")
    ablate.add_argument("--cold-start", dest="cold_start", action="store_true",
                        help="Sem checkpoint do prior run, treina um prior run em memória.")

    sub.add_parser("report", parents=[common], help="Relatório consolidado e resumo.")
    sub.add_parser("run", parents=[common], help="Pipeline completo até o relatório.")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """
    Configuração efetiva: arquivo `--config` (ou o eco `config.json` já
    existente no diretório de saída) com as opções da linha de comando por cima.
    """
    path: Optional[Path] = args.config
    out = args.out
    if path is None:
        echo = Path(out or DEFAULT_OUTPUT_DIR) / CONFIG_FILENAME
        if echo.exists():
            logger.info("Usando a configuração ecoada em %s", echo)
            path = echo
    config = load_config(path)
    return apply_overrides(config, seed=args.seed, output_dir=out, lambda_aa=args.lambda_aa,
                           deltas=args.deltas, per_class_count=args.per_class_count,
                           epochs=args.epochs)


def _fmt(value: Any, digits: int = 4) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        if value != 0 and abs(value) < 1e-3:
            return f"{value:.{digits}g}"
        return f"{value:.{digits}f}"
    return str(value)


def render_summary(report: Dict[str, Any]) -> str:
    """Resumo legível do relatório consolidado."""
    sep = "=" * LOG_SEPARATOR_WIDTH
    lines: List[str] = [report["title"], sep,
                        f"Semente: {report['seed']}    "
                        f"Configuração: {report['config_digest'][:12]}", ""]
    lines.append("Treinamentos:")
    for tag, run in report["runs"].items():
        lines.append(f"  {tag:<12} fase={run['phase']:<6} lambda_AA={_fmt(run['lambda_aa'], 2)} "
                     f"acurácia treino={_fmt(run['train_accuracy'])} "
                     f"teste={_fmt(run['test_accuracy'])}")
    if report["evaluations"]:
        lines += ["", "Avaliações (AUC e centralização 1 - max p):"]
        for tag, evaluation in report["evaluations"].items():
            centering = ", ".join(f"{name}={_fmt(value)}"
                                  for name, value in sorted(evaluation["centering"].items()))
            lines.append(f"  {tag:<12} AUC={_fmt(evaluation['auc'])}  {centering}")
        if report["auc_difference"] is not None:
            lines.append(f"  AUC(prior) - AUC(aa) = {_fmt(report['auc_difference'])}")
    if report["scans"]:
        lines += ["", "Varreduras (R em fb^-1/2, sigma_min em fb):"]
        for tag, scan in report["scans"].items():
            lines.append(f"  {tag}: sinal {scan['anomaly_class']} no eixo "
                         f"P({scan['axis_class']}), fundos {', '.join(scan['backgrounds'])}")
            for entry in scan["deltas"]:
                low, high = entry["best_window"]
                lines.append(f"    delta={entry['delta']:<5} R_max={_fmt(entry['r_max'], 6)} "
                             f"janela=[{low:.3f}, {high:.3f}] "
                             f"excluídas={entry['n_excluded']} "
                             f"sigma_min(3000 fb^-1)={_fmt(entry['sigma_min_hl_lhc'])}")
    ablation = report.get("ablation")
    if ablation:
        lines += ["", f"Saturação (classe retida: {ablation['heldout']}):"]
        for step in ablation["saturation"]:
            lines.append(f"  n={step['n_classes']} [{'+'.join(step['classes'])}] "
                         f"centralização={_fmt(step['heldout_centering'])} "
                         f"ganho={_fmt(step['gain'])}")
    mismatches = report["digest_mismatches"]
    lines += ["", f"Artefatos verificados: {len(report['artifacts'])}; "
                  f"{MESSAGES['digest_mismatch']}: {len(mismatches)}"]
    lines += [f"  ! {path}" for path in mismatches]
    lines += ["", "Notas:"] + [f"  - {note}" for note in report["notes"]]
    return "\n".join(lines) + "\n"


def _write_summary(exp: Experiment, report: Dict[str, Any]) -> Path:
    path = atomic_write_text(exp.root / REPORTS_DIR / SUMMARY_TXT, render_summary(report))
    exp.register(path, "report", "report")
    return path


def _run_report(exp: Experiment, args: argparse.Namespace) -> Any:
    report = cmd_report(exp)
    _write_summary(exp, report)
    return report


def _run_eval(exp: Experiment, args: argparse.Namespace) -> Any:
    tags = args.checkpoints
    if not tags:
        tags = [tag for tag in (PRIOR_TAG, AA_TAG) if exp.checkpoint_path(tag).exists()] \
            or [PRIOR_TAG]
    return cmd_eval(exp, tags)


def _run_pipeline(exp: Experiment, args: argparse.Namespace) -> Any:
    cmd_run(exp)
    return _run_report(exp, args)


HANDLERS: Dict[str, Callable[[Experiment, argparse.Namespace], Any]] = {
    "gen": lambda exp, args: cmd_gen(exp),
    "train": lambda exp, args: cmd_train(exp, args.phase, args.init, args.cold_start, args.tag),
    "eval": _run_eval,
    "scan": lambda exp, args: cmd_scan(exp, args.checkpoint),
    "ablate": lambda exp, args: cmd_ablate(exp, args.study, args.cold_start),
    "report": _run_report,
    "run": _run_pipeline,
}


def run_command(args: argparse.Namespace,
                on_config: Optional[Callable[[ExperimentConfig], None]] = None) -> Any:
    """
    Resolve a configuração, abre o experimento e executa o subcomando.

    Args:
        on_config: Chamado com a configuração efetiva antes de abrir o
            experimento (usado para ligar o log em arquivo).
    """
    config = resolve_config(args)
    if on_config is not None:
        on_config(config)
    sep = "=" * LOG_SEPARATOR_WIDTH
    logger.info(MESSAGES["log_command_start"].format(sep=sep, command=args.command))
    try:
        with Experiment(config) as exp:
            return HANDLERS[args.command](exp, args)
    finally:
        logger.info(MESSAGES["log_command_end"].format(sep=sep, command=args.command))


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    return build_parser().parse_args(argv)
