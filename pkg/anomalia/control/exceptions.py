# ----------------------------------------------------------------------------
# File: anomalia/control/exceptions.py (Hierarquia de Exceções)
# ----------------------------------------------------------------------------
# SPDX-License-Identifier: MIT
# Copyright (c) 2024-2025 Mateus G Pereira <mateus.pereira@ifsp.edu.br>
"""
Exceções da aplicação. Cada categoria carrega o código de saída usado pela
CLI: 2 para configuração, 3 para dados/formato/E-S e 4 para falhas numéricas.
"""
from typing import Iterable, List, Optional, Sequence

from fuzzywuzzy import process

from anomalia.control.constants import EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC


class AnomaliaError(Exception):
    """Base de todos os erros previstos pelo pipeline."""

    exit_code: int = 1


class ConfigurationError(AnomaliaError, ValueError):
    """Parâmetro de configuração inválido ou inconsistente."""

    exit_code = EXIT_CONFIG


class PreconditionError(ConfigurationError):
    """Pré-condição de uma operação violada (ex: epochs=0, epsilon fora da faixa)."""


class UnknownClassError(ConfigurationError, LookupError):
    """
    Identificador de classe desconhecido. A mensagem sugere os nomes
    conhecidos mais próximos (busca por similaridade).
    """

    def __init__(self, name: str, known: Iterable[str]):
        self.name = name
        self.known: List[str] = list(known)
        self.suggestions: List[str] = suggest_names(name, self.known)
        message = f"Classe desconhecida: '{name}'. Classes conhecidas: {self.known}."
        if self.suggestions:
            message += f" Você quis dizer: {', '.join(self.suggestions)}?"
        super().__init__(message)


class DimensionError(AnomaliaError, ValueError):
    """Formato (shape) incompatível; informa o esperado e o recebido."""

    exit_code = EXIT_DATA

    def __init__(self, what: str, expected: object, actual: object):
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what}: esperado {expected}, recebido {actual}.")


class DataFormatError(AnomaliaError, ValueError):
    """Arquivo malformado, digest divergente ou linha inválida em CSV."""

    exit_code = EXIT_DATA

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"linha {line}: {message}"
        super().__init__(message)


class EmptyInputError(DataFormatError):
    """Coleção de entrada vazia onde ao menos um elemento é exigido."""


class ArtifactError(AnomaliaError, OSError):
    """Falha de E/S ou artefato ausente no diretório de experimento."""

    exit_code = EXIT_DATA

    def __init__(self, message: str, missing: Sequence[str] = ()):
        self.missing: List[str] = list(missing)
        if self.missing:
            message += " Ausentes: " + ", ".join(self.missing)
        super().__init__(message)


class NumericError(AnomaliaError, ArithmeticError):
    """Valor numérico inválido (não finito, negativo ou indefinido)."""

    exit_code = EXIT_NUMERIC


def suggest_names(name: str, known: Sequence[str], limit: int = 2,
                  min_score: int = 60) -> List[str]:
    """
    Retorna os nomes conhecidos mais parecidos com `name`.

    Args:
        name: Nome procurado.
        known: Nomes válidos.
        limit: Número máximo de sugestões.
        min_score: Pontuação mínima de similaridade (0-100).

    Returns:
        Lista (possivelmente vazia) de sugestões ordenadas por similaridade.
    """
    if not name or not known:
        return []
    matches = process.extract(name, list(known), limit=limit)
    return [candidate for candidate, score in matches if score >= min_score]
