# ----------------------------------------------------------------------------
# File: anomalia/control/generic_crud.py (CRUD Genérico)
# ----------------------------------------------------------------------------
# SPDX-License-Identifier: MIT
# Copyright (c) 2024-2025 Mateus G Pereira <mateus.pereira@ifsp.edu.br>
"""
Classe genérica de criação, leitura, atualização e upsert sobre modelos
SQLAlchemy, usada pelo registro de proveniência.
"""
import logging
from typing import Any, Dict, Generic, Optional, Sequence, Type, TypeVar

try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

from sqlalchemy import select
from sqlalchemy.exc import SQLAlchemyError
from sqlalchemy.orm import Session as DBSession

from anomalia.control.exceptions import ArtifactError
from anomalia.model.tables import Base

logger = logging.getLogger(__name__)

MODEL = TypeVar("MODEL", bound=Base)


class CRUD(Generic[MODEL]):
    """
    Operações básicas sobre um modelo SQLAlchemy. Erros de banco fazem
    rollback da sessão e são relançados como `ArtifactError`.
    """

    def __init__(self: Self, session: DBSession, model: Type[MODEL]):
        """
        Args:
            session: Sessão SQLAlchemy.
            model: Classe mapeada.

        Raises:
            TypeError: Sessão ou modelo inválidos.
        """
        if not isinstance(session, DBSession):
            raise TypeError("O argumento 'session' deve ser uma Sessão SQLAlchemy (DBSession).")
        if not hasattr(model, "__mapper__"):
            raise TypeError(f"O modelo '{model.__name__}' deve ser uma classe SQLAlchemy mapeada.")
        self._db_session = session
        self._model = model
        self._primary_key_name = model.__mapper__.primary_key[0].name  # type: ignore[attr-defined]
        logger.debug("CRUD inicializado para o modelo %s com PK %s",
                     model.__name__, self._primary_key_name)

    def _handle_db_error(self: Self, operation: str, error: Exception,
                         item_info: Any = None) -> None:
        """Loga o erro, faz rollback e relança como ArtifactError."""
        info = ""
        if item_info is not None:
            info_repr = repr(item_info)
            info = f" (Info: {info_repr[:197] + '...' if len(info_repr) > 200 else info_repr})"
        logger.debug("Traceback do erro de DB durante '%s':", operation, exc_info=True)
        logger.error("Erro de DB durante '%s'%s: %s", operation, info, error)
        try:
            self._db_session.rollback()
        except SQLAlchemyError as rb_exc:
            logger.error("Erro adicional durante o rollback da sessão DB: %s", rb_exc)
        raise ArtifactError(f"Falha no registro de proveniência ({operation}): {error}") from error

    def create(self: Self, data: Dict[str, Any]) -> MODEL:
        try:
            item = self._model(**data)  # type: ignore[call-arg]
            self._db_session.add(item)
            self._db_session.commit()
            self._db_session.refresh(item)
            return item
        except (SQLAlchemyError, TypeError) as e:
            self._handle_db_error("create", e, data)
            raise  # inalcançável


    def read_filtered_one(self: Self, **filters: Any) -> Optional[MODEL]:
        """Primeiro registro que satisfaz os filtros de igualdade."""
        try:
            stmt = select(self._model)
            for key, value in filters.items():
                if not hasattr(self._model, key):
                    raise AttributeError(
                        f"Modelo {self._model.__name__} não possui o atributo '{key}'.")
                stmt = stmt.where(getattr(self._model, key) == value)
            return self._db_session.scalars(stmt.limit(1)).first()
        except (SQLAlchemyError, AttributeError) as e:
            self._handle_db_error("read_filtered_one", e, filters)
            raise

    def read_all_ordered_by(self: Self, *order_by_columns: Any) -> Sequence[MODEL]:
        try:
            return self._db_session.scalars(select(self._model).order_by(*order_by_columns)).all()
        except SQLAlchemyError as e:
            self._handle_db_error("read_all_ordered_by", e, order_by_columns)
            raise

    def update(self: Self, item: MODEL, data: Dict[str, Any]) -> MODEL:
        try:
            for key, value in data.items():
                if not hasattr(item, key):
                    raise AttributeError(
                        f"Modelo {self._model.__name__} não possui o atributo '{key}'.")
                setattr(item, key, value)
            self._db_session.commit()
            self._db_session.refresh(item)
            return item
        except (SQLAlchemyError, AttributeError) as e:
            self._handle_db_error("update", e, data)
            raise

    def upsert(self: Self, key_filters: Dict[str, Any], data: Dict[str, Any]) -> MODEL:
        """Atualiza o registro identificado por `key_filters` ou cria um novo."""
        existing = self.read_filtered_one(**key_filters)
        if existing is not None:
            logger.debug("Atualizando %s existente: %s", self._model.__name__, key_filters)
            return self.update(existing, data)
        return self.create({**key_filters, **data})
