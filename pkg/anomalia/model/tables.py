# ----------------------------------------------------------------------------
# File: anomalia/model/tables.py (Modelos do Registro de Proveniência)
# ----------------------------------------------------------------------------
# SPDX-License-Identifier: MIT
# Copyright (c) 2024-2025 Mateus G Pereira <mateus.pereira@ifsp.edu.br>
"""
Define os modelos SQLAlchemy do registro de proveniência de um experimento:
artefatos gravados (com digest SHA-256), execuções de treinamento e a
linhagem artefato -> artefatos de entrada.
"""
from typing import List, Optional

from sqlalchemy import Column, Float, ForeignKey, Integer, String, Table, Text, UniqueConstraint
from sqlalchemy.orm import Mapped, declarative_base, mapped_column, relationship

# Base declarativa para os modelos SQLAlchemy
Base = declarative_base()

# --- Tabela de Associação Artefato <-> Entradas (Muitos-para-Muitos) ---
# Um artefato aponta para os artefatos dos quais foi derivado.
artifact_lineage = Table(
    "artifact_lineage",
    Base.metadata,
    Column("artifact_id", Integer, ForeignKey("artifacts.id", ondelete="CASCADE"),
           primary_key=True),
    Column("input_id", Integer, ForeignKey("artifacts.id", ondelete="CASCADE"),
           primary_key=True),
)


class Artifact(Base):
    """Arquivo produzido por um comando, identificado pelo caminho relativo."""

    __tablename__ = "artifacts"

    id: Mapped[int] = mapped_column(Integer, primary_key=True, autoincrement=True)
    # Caminho relativo ao diretório do experimento (único)
    path: Mapped[str] = mapped_column(String(255), unique=True, nullable=False, index=True)
    kind: Mapped[str] = mapped_column(String(32), nullable=False, index=True)
    sha256: Mapped[str] = mapped_column(String(64), nullable=False)
    command: Mapped[str] = mapped_column(String(32), nullable=False)
    config_digest: Mapped[str] = mapped_column(String(64), nullable=False)

    # Artefatos de entrada (linhagem); entradas são registradas antes das saídas
    inputs: Mapped[List["Artifact"]] = relationship(
        "Artifact",
        secondary=artifact_lineage,
        primaryjoin=id == artifact_lineage.c.artifact_id,
        secondaryjoin=id == artifact_lineage.c.input_id,
        lazy="select",
    )

    def __repr__(self) -> str:
        return f"<Artifact(id={self.id}, kind='{self.kind}', path='{self.path}')>"


class RunRecord(Base):
    """Resumo de uma execução de treinamento (prior, aa ou passo de ablação)."""

    __tablename__ = "runs"
    __table_args__ = (UniqueConstraint("name", name="_run_name_uc"),)

    id: Mapped[int] = mapped_column(Integer, primary_key=True, autoincrement=True)
    name: Mapped[str] = mapped_column(String(64), nullable=False)
    phase: Mapped[str] = mapped_column(String(16), nullable=False)
    seed: Mapped[str] = mapped_column(String(24), nullable=False)
    lambda_aa: Mapped[float] = mapped_column(Float, nullable=False)
    train_accuracy: Mapped[float] = mapped_column(Float, nullable=False)
    test_accuracy: Mapped[float] = mapped_column(Float, nullable=False)
    # Centralização por classe, em JSON
    centering: Mapped[Optional[str]] = mapped_column(Text, nullable=True)
    checkpoint_id: Mapped[Optional[int]] = mapped_column(
        ForeignKey("artifacts.id", ondelete="SET NULL"), nullable=True)

    checkpoint: Mapped[Optional["Artifact"]] = relationship(lazy="joined")

    def __repr__(self) -> str:
        return (f"<RunRecord(id={self.id}, name='{self.name}', phase='{self.phase}', "
                f"test_acc={self.test_accuracy:.4f})>")
