# ----------------------------------------------------------------------------
# File: anomalia/control/serialization.py (Formatos de Arquivo)
# ----------------------------------------------------------------------------
# SPDX-License-Identifier: MIT
# Copyright (c) 2024-2025 Mateus G Pereira <mateus.pereira@ifsp.edu.br>
"""
Leitura e escrita dos artefatos binários e tabulares do experimento.

Contêiner de dataset (little-endian)::

    "AAJD" | u16 versão | u16 H | u16 W | u16 n_classes
    n_classes x (u16 tamanho | nome UTF-8)
    u32 n_imagens
    n_imagens x (u16 rótulo | H*W f32, por linhas)

acompanhado de um sidecar JSON (especificações, semente, contagens, partições).

Checkpoint::

    "AACK" | u32 tamanho do cabeçalho | cabeçalho JSON UTF-8 | blob f32

O cabeçalho traz arquitetura, semente, época, metadados do otimizador e o
SHA-256 do blob, verificado na leitura.
"""
import csv
import io
import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from anomalia.control.analysis import ScoreRecord
from anomalia.control.constants import (CHECKPOINT_MAGIC, CHECKPOINT_VERSION, DATASET_MAGIC,
                                        DATASET_VERSION, PGM_MAXVAL)
from anomalia.control.eventgen import ClassSpec, Dataset, GeneratorConfig, JetImage
from anomalia.control.exceptions import DataFormatError
from anomalia.control.network import Architecture, NetworkParams
from anomalia.control.utils import (PathLike, _handle_file_error, atomic_write_bytes,
                                    atomic_write_text, canonical_json, csv_text,
                                    load_json, save_json, sha256_bytes)

logger = logging.getLogger(__name__)

_DATASET_HEADER = struct.Struct("<4sHHHH")
_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")


def _read_bytes(path: PathLike) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        _handle_file_error(e, path, "leitura binária")
    return b""


# --- Dataset ---

def _record_dtype(height: int, width: int) -> np.dtype:
    return np.dtype([("label", "<u2"), ("pixels", "<f4", (height, width))])


def encode_dataset(ds: Dataset) -> bytes:
    """Serializa o dataset no contêiner AAJD (bytes determinísticos)."""
    height, width = ds.image_shape
    parts = [_DATASET_HEADER.pack(DATASET_MAGIC, DATASET_VERSION, height, width,
                                  len(ds.class_names))]
    for name in ds.class_names:
        raw = name.encode("utf-8")
        parts.append(_U16.pack(len(raw)) + raw)
    parts.append(_U32.pack(len(ds)))
    records = np.zeros(len(ds), dtype=_record_dtype(height, width))
    if len(ds):
        records["label"] = ds.labels
        records["pixels"] = ds.pixels()
    parts.append(records.tobytes())
    return b"".join(parts)


def decode_dataset(data: bytes) -> Tuple[List[JetImage], Tuple[str, ...], Tuple[int, int]]:
    """
    Lê o contêiner AAJD.

    Returns:
        (imagens, nomes das classes, (H, W)).

    Raises:
        DataFormatError: Magic, versão, tamanho ou rótulos inválidos.
    """
    if len(data) < _DATASET_HEADER.size:
        raise DataFormatError("Contêiner de dataset truncado (cabeçalho).")
    magic, version, height, width, n_classes = _DATASET_HEADER.unpack_from(data, 0)
    if magic != DATASET_MAGIC:
        raise DataFormatError(f"Magic inválido {magic!r}; esperado {DATASET_MAGIC!r}.")
    if version != DATASET_VERSION:
        raise DataFormatError(f"Versão de dataset não suportada: {version}.")
    offset = _DATASET_HEADER.size
    names: List[str] = []
    try:
        for _ in range(n_classes):
            (length,) = _U16.unpack_from(data, offset)
            offset += _U16.size
            names.append(data[offset:offset + length].decode("utf-8"))
            offset += length
        (n_images,) = _U32.unpack_from(data, offset)
    except (struct.error, UnicodeDecodeError) as e:
        raise DataFormatError(f"Tabela de classes corrompida: {e}") from e
    offset += _U32.size
    dtype = _record_dtype(height, width)
    if len(data) - offset != n_images * dtype.itemsize:
        raise DataFormatError(
            f"Tamanho do contêiner incompatível: {len(data) - offset} bytes para "
            f"{n_images} imagens de {height}x{width}.")
    records = np.frombuffer(data, dtype=dtype, count=n_images, offset=offset)
    if n_images and int(records["label"].max()) >= n_classes:
        raise DataFormatError("Rótulo fora da tabela de classes.")
    images = []
    for rec in records:
        pixels = np.array(rec["pixels"], dtype=np.float32)
        images.append(JetImage(pixels=pixels, label=names[int(rec["label"])],
                               total_energy=float(pixels.sum(dtype=np.float64))))
    return images, tuple(names), (height, width)


def dataset_sidecar(ds: Dataset, container_sha256: str) -> Dict[str, Any]:
    return {
        "format": DATASET_MAGIC.decode("ascii"),
        "version": DATASET_VERSION,
        "seed": ds.seed,
        "class_names": list(ds.class_names),
        "specs": [spec.to_dict() for spec in ds.specs],
        "generator": {"height": ds.config.height, "width": ds.config.width,
                      "e_min": ds.config.e_min, "e_max": ds.config.e_max},
        "counts": ds.counts(),
        "splits": {name: [int(i) for i in idx] for name, idx in sorted(ds.splits.items())},
        "container_sha256": container_sha256,
    }


def dataset_digest(ds: Dataset) -> str:
    """SHA-256 do contêiner somado ao sidecar canônico (sem o próprio digest)."""
    container = encode_dataset(ds)
    sidecar = dataset_sidecar(ds, sha256_bytes(container))
    return sha256_bytes(container + canonical_json(sidecar).encode("utf-8"))


def sidecar_path(path: PathLike) -> Path:
    return Path(path).with_suffix(".json")


def save_dataset(ds: Dataset, path: PathLike) -> Tuple[Path, Path]:
    """
    Grava contêiner e sidecar JSON.

    Returns:
        (caminho do contêiner, caminho do sidecar).
    """
    container = encode_dataset(ds)
    digest = sha256_bytes(container)
    data_path = atomic_write_bytes(path, container)
    meta_path = save_json(sidecar_path(path), dataset_sidecar(ds, digest))
    logger.info("Dataset salvo em %s (%d imagens, sha256 %s).", data_path, len(ds), digest[:12])
    return data_path, meta_path


def load_dataset(path: PathLike) -> Dataset:
    """
    Lê contêiner e sidecar, verificando o digest do contêiner.

    Raises:
        ArtifactError: Arquivo ausente.
        DataFormatError: Conteúdo inválido ou digest divergente.
    """
    container = _read_bytes(path)
    meta = load_json(sidecar_path(path))
    if not isinstance(meta, dict):
        raise DataFormatError(f"Sidecar de {path} não é um objeto JSON.")
    expected = meta.get("container_sha256")
    actual = sha256_bytes(container)
    if expected != actual:
        raise DataFormatError(f"Digest divergente para {path}: esperado {expected}, obtido {actual}.")
    images, names, shape = decode_dataset(container)
    if list(names) != list(meta.get("class_names", [])):
        raise DataFormatError(f"Tabela de classes do contêiner difere do sidecar em {path}.")
    gen = meta.get("generator") or {"height": shape[0], "width": shape[1]}
    try:
        config = GeneratorConfig(**gen).validate()
    except TypeError as e:
        raise DataFormatError(f"Configuração do gerador inválida no sidecar: {e}") from e
    splits = {name: np.asarray(idx, dtype=np.int64)
              for name, idx in meta.get("splits", {}).items()}
    specs = tuple(ClassSpec.from_dict(s) for s in meta.get("specs", []))
    return Dataset(images=images, splits=splits, seed=int(meta.get("seed", 0)),
                   class_names=names, specs=specs, config=config)


# --- Checkpoint ---

def encode_checkpoint(params: NetworkParams, header: Dict[str, Any]) -> bytes:
    """Serializa parâmetros (f32 little-endian) e cabeçalho JSON com o digest do blob."""
    blob = params.flat.astype("<f4").tobytes()
    full_header = dict(header)
    full_header.update({"format": CHECKPOINT_MAGIC.decode("ascii"),
                        "version": CHECKPOINT_VERSION,
                        "architecture": params.arch.to_dict(),
                        "n_params": len(params),
                        "blob_sha256": sha256_bytes(blob)})
    raw_header = canonical_json(full_header).encode("utf-8")
    return CHECKPOINT_MAGIC + _U32.pack(len(raw_header)) + raw_header + blob


def decode_checkpoint(data: bytes) -> Tuple[NetworkParams, Dict[str, Any]]:
    """
    Raises:
        DataFormatError: Magic ou versão inválidos, cabeçalho corrompido, digest
            divergente ou blob de tamanho incompatível com a arquitetura.
    """
    if len(data) < 8 or data[:4] != CHECKPOINT_MAGIC:
        raise DataFormatError("Checkpoint inválido (magic).")
    (header_len,) = _U32.unpack_from(data, 4)
    try:
        header = json.loads(data[8:8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataFormatError(f"Cabeçalho de checkpoint corrompido: {e}") from e
    if not isinstance(header, dict):
        raise DataFormatError("Cabeçalho de checkpoint não é um objeto JSON.")
    if header.get("version") != CHECKPOINT_VERSION:
        raise DataFormatError(f"Versão de checkpoint não suportada: {header.get('version')!r}.")
    blob = data[8 + header_len:]
    if sha256_bytes(blob) != header.get("blob_sha256"):
        raise DataFormatError("Digest do blob de parâmetros divergente do cabeçalho.")
    if "architecture" not in header:
        raise DataFormatError("Cabeçalho de checkpoint sem arquitetura.")
    arch = Architecture.from_dict(header["architecture"])
    expected = arch.param_count() * 4
    if len(blob) != expected:
        raise DataFormatError(
            f"Blob de parâmetros com {len(blob)} bytes; a arquitetura exige {expected}.")
    flat = np.frombuffer(blob, dtype="<f4").astype(np.float32)
    return NetworkParams(arch, flat), header


def save_checkpoint(params: NetworkParams, path: PathLike, header: Dict[str, Any]) -> Path:
    written = atomic_write_bytes(path, encode_checkpoint(params, header))
    logger.info("Checkpoint salvo em %s.", written)
    return written


def load_checkpoint(path: PathLike) -> Tuple[NetworkParams, Dict[str, Any]]:
    return decode_checkpoint(_read_bytes(path))


# --- Scores ---

def save_scores(path: PathLike, records: Sequence[ScoreRecord], class_names: Sequence[str],
                metadata: Dict[str, Any]) -> Tuple[Path, Path]:
    """
    CSV `event_id,true_class,p_0..p_{K-1}` (floats de ida-e-volta) e
    metadados JSON ao lado (`<arquivo>.json`).
    """
    header = ["event_id", "true_class", *[f"p_{i}" for i in range(len(class_names))]]
    rows = ([rec.event_id, rec.true_class,
             *[float(v) for v in np.asarray(rec.probs, dtype=np.float64)]] for rec in records)
    text, _ = csv_text(rows, header)
    csv_path = atomic_write_text(path, text)
    meta = dict(metadata)
    meta["class_names"] = list(class_names)
    meta["n_records"] = len(records)
    meta_path = save_json(sidecar_path(path), meta)
    return csv_path, meta_path


def load_scores(path: PathLike) -> Tuple[List[ScoreRecord], Dict[str, Any]]:
    """
    Lê um arquivo de scores.

    Raises:
        DataFormatError: Cabeçalho ou linha malformada, com o número da linha.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        _handle_file_error(e, path, "leitura de scores")
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader, None)
        if not header:
            raise DataFormatError(f"Arquivo de scores vazio: {path}", line=1)
        if header[:2] != ["event_id", "true_class"] or len(header) < 4:
            raise DataFormatError(f"Cabeçalho de scores inválido: {header!r}", line=1)
        k = len(header) - 2
        if header[2:] != [f"p_{i}" for i in range(k)]:
            raise DataFormatError(f"Colunas de probabilidade inválidas: {header[2:]}", line=1)
        records = [_score_row(cells, k, reader.line_num) for cells in reader if cells]
    except csv.Error as e:
        raise DataFormatError(f"CSV de scores malformado ({e})", line=reader.line_num) from e
    meta_file = sidecar_path(path)
    metadata = load_json(meta_file) if meta_file.exists() else {}
    return records, metadata


def _score_row(cells: List[str], k: int, number: int) -> ScoreRecord:
    if len(cells) != k + 2:
        raise DataFormatError(f"esperadas {k + 2} colunas, encontradas {len(cells)}",
                              line=number)
    try:
        event_id = int(cells[0])
        probs = np.array([float(c) for c in cells[2:]], dtype=np.float64)
    except ValueError as e:
        raise DataFormatError(f"valor numérico inválido ({e})", line=number) from e
    if not np.isfinite(probs).all() or (probs < 0).any() or abs(probs.sum() - 1.0) > 1e-6:
        raise DataFormatError("probabilidades inválidas (soma 1 +/- 1e-6)", line=number)
    return ScoreRecord(probs=probs, true_class=cells[1], event_id=event_id)


# --- Imagens médias ---

def encode_pgm(image: np.ndarray, maxval: int = PGM_MAXVAL) -> bytes:
    """PGM binário (P5), 16 bits big-endian, escala linear até o pico da imagem."""
    img = np.asarray(image, dtype=np.float64)
    height, width = img.shape
    peak = float(img.max()) if img.size else 0.0
    scaled = np.zeros_like(img) if peak <= 0 else np.clip(img, 0.0, None) / peak * maxval
    values = np.rint(scaled).astype(">u2")
    return f"P5\n{width} {height}\n{maxval}\n".encode("ascii") + values.tobytes()


def decode_pgm(data: bytes) -> np.ndarray:
    """Lê um PGM P5 de 16 bits gerado por `encode_pgm`."""
    parts = data.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"P5":
        raise DataFormatError("PGM inválido (esperado P5).")
    width, height = (int(v) for v in parts[1].split())
    values = np.frombuffer(parts[3], dtype=">u2", count=width * height)
    return values.reshape(height, width).astype(np.int64)


def save_average_image(image: np.ndarray, stem: PathLike) -> Tuple[Path, Path]:
    """Grava `<stem>.pgm` e `<stem>.csv` (valores em GeV, ida-e-volta)."""
    stem = Path(stem)
    pgm = atomic_write_bytes(stem.with_suffix(".pgm"), encode_pgm(image))
    text, _ = csv_text([float(v) for v in row] for row in np.asarray(image, dtype=np.float64))
    table = atomic_write_text(stem.with_suffix(".csv"), text)
    return pgm, table
