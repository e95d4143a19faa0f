# ----------------------------------------------------------------------------
# File: anomalia/control/registry.py (Registro de Proveniência)
# ----------------------------------------------------------------------------
# SPDX-License-Identifier: MIT
# Copyright (c) 2024-2025 Mateus G Pereira <mateus.pereira@ifsp.edu.br>
"""
Gerencia o banco SQLite de proveniência de um diretório de experimento:
cada artefato gravado é registrado com digest SHA-256, comando produtor,
digest da configuração e os artefatos de entrada dos quais deriva.
"""
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

from sqlalchemy import create_engine
from sqlalchemy.exc import SQLAlchemyError
from sqlalchemy.orm import Session as SQLASession
from sqlalchemy.orm import sessionmaker

from anomalia.control.constants import MESSAGES, REGISTRY_FILENAME
from anomalia.control.exceptions import ArtifactError
from anomalia.control.generic_crud import CRUD
from anomalia.control.training import RunReport
from anomalia.control.utils import PathLike, sha256_file
from anomalia.model.tables import Artifact, Base, RunRecord

logger = logging.getLogger(__name__)


class ProvenanceRegistry:
    """
    Conexão com `<experimento>/registry.db` e operações de registro.

    Caminhos são sempre guardados relativos à raiz do experimento, para que
    dois diretórios com o mesmo conteúdo tenham registros equivalentes.
    """

    def __init__(self: Self, root: PathLike):
        """
        Args:
            root: Diretório do experimento (já existente).

        Raises:
            ArtifactError: Falha ao abrir ou criar o banco.
        """
        self.root = Path(root)
        db_path = self.root / REGISTRY_FILENAME
        logger.debug("Abrindo registro de proveniência em %s", db_path)
        try:
            self._engine = create_engine(f"sqlite:///{db_path}", echo=False)
            Base.metadata.create_all(self._engine)
            session_local_factory = sessionmaker(autocommit=False, autoflush=False,
                                                 bind=self._engine)
            self.database_session: SQLASession = session_local_factory()
        except SQLAlchemyError as db_err:
            logger.error("Falha ao inicializar o registro %s: %s", db_path, db_err)
            raise ArtifactError(f"Não foi possível abrir o registro {db_path}: {db_err}",
                                missing=()) from db_err

        self.artifact_crud: CRUD[Artifact] = CRUD[Artifact](self.database_session, Artifact)
        self.run_crud: CRUD[RunRecord] = CRUD[RunRecord](self.database_session, RunRecord)

    def __enter__(self: Self) -> Self:
        return self

    def __exit__(self: Self, *exc_info) -> None:
        self.close()

    def relative(self: Self, path: PathLike) -> str:
        """Caminho relativo à raiz, em notação POSIX."""
        p = Path(path)
        try:
            return p.resolve().relative_to(self.root.resolve()).as_posix()
        except ValueError:
            return p.as_posix()

    def register_artifact(self: Self, path: PathLike, kind: str, command: str,
                          config_digest: str,
                          inputs: Sequence[PathLike] = ()) -> Artifact:
        """
        Registra (ou atualiza) um artefato gravado.

        Entradas que ainda não estão no registro são ignoradas com aviso; como
        entradas são sempre registradas antes das saídas, a linhagem não tem
        ciclos.

        Args:
            path: Arquivo existente.
            kind: Tipo do artefato ("dataset", "checkpoint", "scores", ...).
            command: Comando produtor.
            config_digest: Digest da configuração efetiva.
            inputs: Arquivos dos quais este deriva.
        """
        rel = self.relative(path)
        input_items: List[Artifact] = []
        for item in inputs:
            found = self.artifact_crud.read_filtered_one(path=self.relative(item))
            if found is None:
                logger.warning("Entrada %s de %s não está no registro; ignorada.", item, rel)
                continue
            if found.path != rel:
                input_items.append(found)
        data = {"kind": kind, "sha256": sha256_file(path), "command": command,
                "config_digest": config_digest, "inputs": input_items}
        artifact = self.artifact_crud.upsert({"path": rel}, data)
        logger.debug("Artefato registrado: %s (%s, %s)", rel, kind, artifact.sha256[:12])
        return artifact

    def record_run(self: Self, name: str, report: RunReport, seed: int,
                   checkpoint: Optional[Artifact] = None) -> RunRecord:
        """Registra o resumo de uma execução de treinamento."""
        data = {"phase": report.phase, "seed": str(seed),
                "lambda_aa": float(report.config.get("lambda_aa", 0.0)),
                "train_accuracy": report.train_accuracy,
                "test_accuracy": report.test_accuracy,
                "centering": json.dumps(report.centering, sort_keys=True),
                "checkpoint": checkpoint}
        return self.run_crud.upsert({"name": name}, data)

    def artifacts(self: Self) -> Sequence[Artifact]:
        return self.artifact_crud.read_all_ordered_by(Artifact.path)

    def runs(self: Self) -> Sequence[RunRecord]:
        return self.run_crud.read_all_ordered_by(RunRecord.name)

    def lineage(self: Self, path: PathLike) -> List[str]:
        """Caminhos das entradas diretas de um artefato (vazio se desconhecido)."""
        found = self.artifact_crud.read_filtered_one(path=self.relative(path))
        if found is None:
            return []
        return sorted(item.path for item in found.inputs)

    def verify(self: Self) -> Dict[str, str]:
        """
        Recalcula o digest de cada artefato registrado.

        Returns:
            Mapa caminho relativo -> estado ("ok", "digest divergente" ou
            "arquivo ausente").
        """
        status: Dict[str, str] = {}
        for artifact in self.artifacts():
            full = self.root / artifact.path
            if not full.exists():
                status[artifact.path] = MESSAGES["digest_missing"]
            elif sha256_file(full) != artifact.sha256:
                logger.warning("Digest divergente para %s.", artifact.path)
                status[artifact.path] = MESSAGES["digest_mismatch"]
            else:
                status[artifact.path] = MESSAGES["digest_ok"]
        return status

    def close(self: Self) -> None:
        try:
            self.database_session.close()
        finally:
            self._engine.dispose()
        logger.debug("Registro de proveniência fechado.")
