# ----------------------------------------------------------------------------
# File: anomalia/control/excel_exporter.py (Exportador Excel do Relatório)
# ----------------------------------------------------------------------------
# SPDX-License-Identifier: MIT
# Copyright (c) 2024-2025 Mateus G Pereira <mateus.pereira@ifsp.edu.br>
"""
Exporta o relatório consolidado para uma planilha Excel (.xlsx) com as abas
Summary, R scan, Sigma min e Saturation: apenas dados prontos para gráfico.
"""
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import xlsxwriter
from xlsxwriter.exceptions import XlsxWriterException

from anomalia.control.utils import PathLike

logger = logging.getLogger(__name__)

R_SCAN_HEADER = ("Checkpoint", "Delta", "Centro", "p_min", "p_max", "R", "Excluída")
SIGMA_HEADER = ("Checkpoint", "Delta", "Luminosidade (fb^-1)", "sigma_min (fb)")
SATURATION_HEADER = ("N classes", "Classes", "Centralização prior", "Centralização retida",
                     "Ganho")


def _summary_rows(report: Dict[str, Any]) -> List[Sequence[Any]]:
    """Pares (campo, valor) da aba de resumo."""
    rows: List[Sequence[Any]] = [("Semente", report["seed"]),
                                 ("Digest da configuração", report["config_digest"])]
    for tag, run in report["runs"].items():
        rows.append((f"{tag}: acurácia de teste", run["test_accuracy"]))
        rows.append((f"{tag}: lambda_AA", run["lambda_aa"]))
    for tag, evaluation in report["evaluations"].items():
        rows.append((f"{tag}: AUC", evaluation["auc"]))
        for name, value in sorted(evaluation["centering"].items()):
            rows.append((f"{tag}: centralização {name}", value))
    if report.get("auc_difference") is not None:
        rows.append(("AUC(prior) - AUC(aa)", report["auc_difference"]))
    for tag, scan in report["scans"].items():
        for entry in scan["deltas"]:
            rows.append((f"{tag}: R_max (delta={entry['delta']})", entry["r_max"]))
    rows.append(("Artefatos com digest divergente", len(report["digest_mismatches"])))
    return rows


def _write_sheet(workbook: xlsxwriter.Workbook, name: str, header: Sequence[str],
                 rows: Sequence[Sequence[Any]], header_format, cell_format,
                 widths: Sequence[int]) -> None:
    worksheet = workbook.add_worksheet(name)
    worksheet.write_row(0, 0, header, header_format)
    worksheet.freeze_panes(1, 0)
    for row_idx, row in enumerate(rows, start=1):
        # Células vazias (None) ficam em branco
        for col_idx, value in enumerate(row):
            if value is None:
                worksheet.write_blank(row_idx, col_idx, None, cell_format)
            else:
                worksheet.write(row_idx, col_idx, value, cell_format)
    for col_idx, width in enumerate(widths):
        worksheet.set_column(col_idx, col_idx, width)


def export_report_xlsx(report: Dict[str, Any], tables: Dict[str, List[List[Any]]],
                       output_path: PathLike) -> Optional[Path]:
    """
    Grava a planilha do relatório.

    Args:
        report: Documento de `build_report`.
        tables: Linhas das abas "r_scan", "sigma_min" e "saturation".
        output_path: Arquivo .xlsx de saída.

    Returns:
        O caminho gravado, ou None se a exportação falhar (o relatório JSON
        continua válido; a falha é apenas registrada no log).
    """
    output_path = Path(output_path)
    workbook: Optional[xlsxwriter.Workbook] = None
    try:
        logger.info("Iniciando exportação Excel para: %s", output_path)
        workbook = xlsxwriter.Workbook(str(output_path), {"constant_memory": True,
                                                          "nan_inf_to_errors": True})
        header_format = workbook.add_format(
            {"bold": True, "align": "center", "valign": "vcenter", "border": 1})
        cell_format = workbook.add_format({"border": 1, "valign": "vcenter"})

        _write_sheet(workbook, "Summary", ("Campo", "Valor"), _summary_rows(report),
                     header_format, cell_format, (45, 70))
        _write_sheet(workbook, "R scan", R_SCAN_HEADER, tables.get("r_scan", []),
                     header_format, cell_format, (12, 8, 10, 10, 10, 14, 10))
        _write_sheet(workbook, "Sigma min", SIGMA_HEADER, tables.get("sigma_min", []),
                     header_format, cell_format, (12, 8, 20, 16))
        _write_sheet(workbook, "Saturation", SATURATION_HEADER, tables.get("saturation", []),
                     header_format, cell_format, (10, 24, 20, 20, 10))
        workbook.close()
        workbook = None
        logger.info("Planilha do relatório exportada para %s", output_path)
        return output_path
    except (IOError, OSError, XlsxWriterException) as e:
        logger.exception("Erro de I/O ou XlsxWriter durante exportação Excel: %s", e)
        if output_path.exists():
            try:
                os.remove(output_path)
                logger.info("Arquivo parcial removido: %s", output_path)
            except OSError as remove_err:
                logger.warning("Não foi possível remover arquivo parcial %s: %s",
                               output_path, remove_err)
        return None
    finally:
        if workbook is not None:
            try:
                workbook.close()
            except Exception as close_err:
                logger.error("Erro adicional ao fechar workbook: %s", close_err)
