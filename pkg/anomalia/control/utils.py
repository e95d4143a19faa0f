# ----------------------------------------------------------------------------
# File: anomalia/control/utils.py (Utilitários Principais)
# ----------------------------------------------------------------------------
# SPDX-License-Identifier: MIT
# Copyright (c) 2024-2025 Mateus G Pereira <mateus.pereira@ifsp.edu.br>
"""
Funções utilitárias gerais: leitura/escrita atômica de JSON e CSV, digests
SHA-256, derivação de sementes a partir da semente global e formatação
decimal de ida-e-volta para floats de 64 bits.
"""
import csv
import hashlib
import io
import json
import logging
import os
import tempfile
from json import JSONDecodeError
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from anomalia.control.exceptions import ArtifactError, DataFormatError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def derive_seed(seed: int, component: str) -> int:
    """
    Deriva uma semente independente para um componente do pipeline.

    Os primeiros 8 bytes do SHA-256 de "<seed>:<component>" (big-endian),
    mascarados para 63 bits.

    Args:
        seed: Semente global do experimento.
        component: Nome do componente (ex: "gen-normal", "train").

    Returns:
        Semente inteira não negativa.
    """
    digest = hashlib.sha256(f"{seed}:{component}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & ((1 << 63) - 1)


def sha256_bytes(data: bytes) -> str:
    """Retorna o SHA-256 hexadecimal de um bloco de bytes."""
    return hashlib.sha256(data).hexdigest()


def sha256_file(filename: PathLike, chunk_size: int = 1 << 20) -> str:
    """
    Calcula o SHA-256 de um arquivo lendo-o em blocos.

    Raises:
        ArtifactError: Se o arquivo não puder ser lido.
    """
    hasher = hashlib.sha256()
    try:
        with open(filename, "rb") as f:
            for chunk in iter(lambda: f.read(chunk_size), b""):
                hasher.update(chunk)
    except OSError as e:
        _handle_file_error(e, filename, "digest SHA-256")
    return hasher.hexdigest()


def canonical_json(data: Any) -> str:
    """Serialização JSON canônica (chaves ordenadas, sem espaços) para digests."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def format_float(value: float) -> str:
    """Formatação decimal de ida-e-volta (repr) para floats de 64 bits."""
    return repr(float(value))


def _handle_file_error(e: Exception, filename: PathLike, operation: str):
    """
    Centraliza o log de erros de E/S e os converte nas exceções da aplicação.

    Args:
        e: A exceção capturada.
        filename: O arquivo envolvido.
        operation: Descrição da operação (ex: "leitura JSON").

    Raises:
        DataFormatError: Para conteúdo malformado (JSON/CSV).
        ArtifactError: Para os demais erros de E/S.
    """
    filepath = str(filename)
    if isinstance(e, FileNotFoundError):
        logger.error("Arquivo não encontrado durante '%s': %s", operation, filepath)
        raise ArtifactError(f"Arquivo não encontrado ({operation}).", missing=[filepath]) from e
    if isinstance(e, PermissionError):
        logger.error("Permissão negada durante '%s' no arquivo: %s", operation, filepath)
        raise ArtifactError(f"Permissão negada ({operation}): {filepath}") from e
    if isinstance(e, JSONDecodeError):
        logger.error("Erro de decodificação JSON durante '%s' no arquivo: %s - %s",
                     operation, filepath, e)
        raise DataFormatError(f"JSON inválido em {filepath}: {e.msg}", line=e.lineno) from e
    if isinstance(e, csv.Error):
        logger.error("Erro de formato CSV durante '%s' no arquivo: %s - %s",
                     operation, filepath, e)
        raise DataFormatError(f"CSV inválido em {filepath}: {e}") from e
    logger.error("Erro de E/S durante '%s' em %s: %s", operation, filepath, e)
    raise ArtifactError(f"Falha de E/S ({operation}) em {filepath}: {e}") from e


def atomic_write_bytes(filename: PathLike, data: bytes) -> Path:
    """
    Escreve bytes de forma atômica (arquivo temporário + os.replace).
    Cria diretórios pais se não existirem.

    Returns:
        O caminho escrito.
    """
    file_path = Path(filename)
    try:
        file_path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=file_path.parent, prefix=file_path.name + ".")
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(data)
            os.replace(tmp_name, file_path)
        except BaseException:
            if os.path.exists(tmp_name):
                os.remove(tmp_name)
            raise
    except OSError as e:
        _handle_file_error(e, file_path, "escrita atômica")
    logger.debug("Arquivo escrito: %s (%d bytes)", file_path, len(data))
    return file_path


def atomic_write_text(filename: PathLike, text: str) -> Path:
    """Versão texto (UTF-8, fim de linha '\\n') de `atomic_write_bytes`."""
    return atomic_write_bytes(filename, text.encode("utf-8"))


def load_json(filename: PathLike) -> Any:
    """
    Carrega dados de um arquivo JSON.

    Raises:
        ArtifactError: Arquivo ausente ou ilegível.
        DataFormatError: Conteúdo JSON inválido.
    """
    logger.debug("Carregando JSON de: %s", filename)
    try:
        with open(filename, "r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, JSONDecodeError) as e:
        _handle_file_error(e, filename, "leitura JSON")


def save_json(filename: PathLike, data: Union[Dict[str, Any], List[Any]]) -> Path:
    """
    Salva dados em JSON indentado, com chaves ordenadas para saídas estáveis.

    Raises:
        DataFormatError: Se os dados não forem serializáveis.
    """
    try:
        text = json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    except (TypeError, ValueError) as te:
        logger.error("Erro de tipo ao serializar JSON para %s: %s", filename, te)
        raise DataFormatError(f"Dados não serializáveis em JSON: {te}") from te
    return atomic_write_text(filename, text)


def load_csv_rows(filename: PathLike) -> List[List[str]]:
    """
    Lê um CSV como lista de linhas (a primeira é o cabeçalho).

    Raises:
        ArtifactError: Arquivo ausente ou ilegível.
        DataFormatError: CSV malformado.
    """
    try:
        with open(filename, "r", newline="", encoding="utf-8") as file:
            rows = list(csv.reader(file))
    except (OSError, csv.Error) as e:
        _handle_file_error(e, filename, "leitura CSV")
    logger.debug("Carregadas %d linhas do CSV: %s", len(rows), filename)
    return rows


def csv_text(rows: Iterable[Sequence[Any]],
             header: Optional[Sequence[str]] = None) -> Tuple[str, int]:
    """Monta o texto CSV (QUOTE_MINIMAL, floats em formato de ida-e-volta)."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
    if header is not None:
        writer.writerow(header)
    count = 0
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, float) else str(v) for v in row])
        count += 1
    return buffer.getvalue(), count


def save_csv_from_list(filename: PathLike, header: Sequence[str],
                       rows: Iterable[Sequence[Any]]) -> Path:
    """
    Salva um cabeçalho e linhas em CSV. Floats são escritos com
    formatação de ida-e-volta.

    Returns:
        O caminho escrito.
    """
    text, count = csv_text(rows, header)
    path = atomic_write_text(filename, text)
    logger.info("%d linhas salvas no CSV: %s", count, filename)
    return path
