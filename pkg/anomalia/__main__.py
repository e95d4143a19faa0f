# ----------------------------------------------------------------------------
# File: anomalia/__main__.py (Ponto de Entrada da Aplicação via Pacote)
# ----------------------------------------------------------------------------
# SPDX-License-Identifier: MIT
# Copyright (c) 2024-2025 Mateus G Pereira <mateus.pereira@ifsp.edu.br>
"""
Ponto de entrada da CLI `aa` (também `python -m anomalia`).

Configura o logging (console e arquivo rotativo em `<out>/logs`), executa o
subcomando pedido e converte as exceções previstas em códigos de saída:
0 sucesso, 2 configuração, 3 dados/E-S, 4 numérico, 1 inesperado.
"""
import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional, Sequence

from anomalia.control.constants import EXIT_OK, EXIT_UNEXPECTED, LOG_FILENAME, LOGS_DIR
from anomalia.control.exceptions import AnomaliaError
from anomalia.control.settings import ExperimentConfig
from anomalia.view.cli import parse_args, run_command

# --- Constantes Globais do Módulo ---
LOG_FORMAT = "%(asctime)s - %(levelname)-8s - [%(name)s:%(lineno)d] %(message)s"
LOG_DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

logger = logging.getLogger(__name__)


def _setup_file_logging(root_logger: logging.Logger, log_dir: Path) -> bool:
    """Adiciona o handler de arquivo rotativo (10MB, 5 backups) em `log_dir`."""
    log_file = log_dir / LOG_FILENAME
    try:
        log_dir.mkdir(parents=True, exist_ok=True)
        file_h = RotatingFileHandler(
            log_file, maxBytes=10 * 1024 * 1024, backupCount=5, encoding="utf-8"
        )
        file_h.setFormatter(logging.Formatter(LOG_FORMAT, LOG_DATE_FORMAT))
        file_h.setLevel(logging.DEBUG if root_logger.level <= logging.DEBUG else logging.INFO)
        root_logger.addHandler(file_h)
        return True
    except PermissionError:
        logging.warning(
            "Permissão negada para escrever no arquivo de log: %s. Logs de arquivo desativados.",
            log_file
        )
    except OSError as file_log_err:
        logging.warning(
            "Erro ao configurar log para arquivo (%s). Logs de arquivo desativados.",
            file_log_err
        )
    return False


def setup_logging(verbose: bool = False, log_dir: Optional[Path] = None) -> None:
    """
    Configura o logging global: console (stdout) e, se `log_dir` for dado,
    arquivo rotativo.
    """
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, datefmt=LOG_DATE_FORMAT,
                        force=True, handlers=[])
    root_logger = logging.getLogger()
    root_logger.setLevel(level)

    stream_h = logging.StreamHandler(sys.stdout)
    stream_h.setFormatter(logging.Formatter(LOG_FORMAT, LOG_DATE_FORMAT))
    stream_h.setLevel(level)
    root_logger.addHandler(stream_h)

    if log_dir is not None:
        _setup_file_logging(root_logger, log_dir)

    # Reduz verbosidade de libs externas
    logging.getLogger("fuzzywuzzy").setLevel(logging.WARNING)
    logging.getLogger("sqlalchemy.engine").setLevel(logging.WARNING)
    logging.debug("Sistema de logging configurado.")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Executa a CLI e retorna o código de saída.

    Args:
        argv: Argumentos (sem o nome do programa); None usa `sys.argv`.
    """
    args = parse_args(argv)
    setup_logging(args.verbose)

    def _attach_file_log(config: ExperimentConfig) -> None:
        _setup_file_logging(logging.getLogger(), Path(config.output_dir) / LOGS_DIR)

    exit_code = EXIT_UNEXPECTED
    try:
        run_command(args, on_config=_attach_file_log)
        exit_code = EXIT_OK
    except AnomaliaError as err:
        logger.error("%s: %s", type(err).__name__, err)
        logger.debug("Traceback:", exc_info=True)
        exit_code = err.exit_code
    except KeyboardInterrupt:
        logger.warning("Interrompido pelo usuário.")
    except Exception:
        logger.critical("Erro crítico não tratado durante a execução.", exc_info=True)
    finally:
        logger.info("Código de saída: %d", exit_code)
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
