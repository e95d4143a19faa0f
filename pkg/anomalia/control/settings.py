# ----------------------------------------------------------------------------
# File: anomalia/control/settings.py (Configuração do Experimento)
# ----------------------------------------------------------------------------
# SPDX-License-Identifier: MIT
# Copyright (c) 2024-2025 Mateus G Pereira <mateus.pereira@ifsp.edu.br>
"""
Configuração completa de um experimento (gerador, arquitetura, treinamento,
análise e ablação), carregada de JSON ou TOML. Campos ausentes assumem os
padrões de `anomalia.control.constants`; chaves desconhecidas são erro.
"""
import logging
import math
try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from anomalia.control.constants import (ABLATION_ORDER, ANOMALY_CLASSES,
                                        DEFAULT_AA_CLASSES, DEFAULT_CONV_LAYERS,
                                        DEFAULT_CROSS_SECTIONS_FB, DEFAULT_DELTAS,
                                        DEFAULT_DENSE_HIDDEN, DEFAULT_HELDOUT_CLASS,
                                        DEFAULT_LUMINOSITY_GRID, DEFAULT_OUTPUT_DIR,
                                        DEFAULT_PDF_BINS, DEFAULT_PER_CLASS_COUNT,
                                        DEFAULT_SCAN_AXIS_CLASS, DEFAULT_SCAN_SPLIT,
                                        DEFAULT_SIMPLEX_BINS, DEFAULT_SPLIT_FRACTION,
                                        ENERGY_MAX_GEV, ENERGY_MIN_GEV, GRID_HEIGHT,
                                        GRID_WIDTH, NORMAL_CLASSES, SCAN_STEP_FRACTION,
                                        SIGNIFICANCE_THRESHOLD)
from anomalia.control.eventgen import ClassSpec, GeneratorConfig, default_specs
from anomalia.control.exceptions import (ConfigurationError, PreconditionError,
                                         UnknownClassError, suggest_names)
from anomalia.control.network import Architecture, architecture_from_layers
from anomalia.control.training import TrainConfig
from anomalia.control.utils import (PathLike, _handle_file_error, canonical_json, load_json,
                                    sha256_bytes)

logger = logging.getLogger(__name__)


def _reject_unknown(section: str, data: Dict[str, Any], known: Iterable[str]) -> None:
    known = list(known)
    extra = sorted(set(data) - set(known))
    if not extra:
        return
    hints = []
    for key in extra:
        close = suggest_names(key, known, limit=1)
        hints.append(f"'{key}'" + (f" (quis dizer '{close[0]}'?)" if close else ""))
    raise ConfigurationError(f"Configuração [{section}]: chaves desconhecidas {', '.join(hints)}.")


def _section(data: Dict[str, Any], name: str) -> Dict[str, Any]:
    value = data.get(name, {})
    if not isinstance(value, dict):
        raise ConfigurationError(f"Configuração [{name}] deve ser uma tabela/objeto.")
    return value


@dataclass(frozen=True)
class GeneratorSettings:
    """
    Parâmetros do gerador de imagens.

    Attributes:
        per_class_count: Imagens por classe.
        split_fraction: Fração de treino da partição estratificada.
        height: Linhas da grade.
        width: Colunas da grade.
        e_min: Energia total mínima (GeV).
        e_max: Energia total máxima (GeV).
        anomaly_classes: Classes do dataset de anomalias.
        specs: Especificações que substituem (ou acrescentam a) `default_specs()`.
    """

    per_class_count: int = DEFAULT_PER_CLASS_COUNT
    split_fraction: float = DEFAULT_SPLIT_FRACTION
    height: int = GRID_HEIGHT
    width: int = GRID_WIDTH
    e_min: float = ENERGY_MIN_GEV
    e_max: float = ENERGY_MAX_GEV
    anomaly_classes: Tuple[str, ...] = ANOMALY_CLASSES
    specs: Tuple[ClassSpec, ...] = ()

    def generator_config(self) -> GeneratorConfig:
        return GeneratorConfig(self.height, self.width, self.e_min, self.e_max).validate()

    def spec_table(self) -> Dict[str, ClassSpec]:
        table = default_specs()
        for spec in self.specs:
            table[spec.name] = spec.validate()
        return table

    def to_dict(self) -> Dict[str, Any]:
        return {"per_class_count": self.per_class_count, "split_fraction": self.split_fraction,
                "height": self.height, "width": self.width, "e_min": self.e_min,
                "e_max": self.e_max, "anomaly_classes": list(self.anomaly_classes),
                "specs": [spec.to_dict() for spec in self.specs]}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GeneratorSettings":
        _reject_unknown("generator", data, cls.__dataclass_fields__)
        values = dict(data)
        if "anomaly_classes" in values:
            values["anomaly_classes"] = tuple(values["anomaly_classes"])
        if "specs" in values:
            values["specs"] = tuple(ClassSpec.from_dict(s) for s in values["specs"])
        try:
            return cls(**values)
        except TypeError as e:
            raise ConfigurationError(f"Configuração [generator] inválida: {e}") from e


@dataclass(frozen=True)
class ArchitectureSettings:
    """Camadas convolucionais (canais, kernel, stride, pooling) e densas ocultas."""

    conv_layers: Tuple[Tuple[int, ...], ...] = tuple(tuple(c) for c in DEFAULT_CONV_LAYERS)
    dense_hidden: Tuple[int, ...] = tuple(DEFAULT_DENSE_HIDDEN)

    def build(self, input_shape: Tuple[int, int], num_classes: int) -> Architecture:
        return architecture_from_layers(input_shape, self.conv_layers, self.dense_hidden,
                                        num_classes)

    def to_dict(self) -> Dict[str, Any]:
        return {"conv_layers": [list(c) for c in self.conv_layers],
                "dense_hidden": list(self.dense_hidden)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ArchitectureSettings":
        _reject_unknown("architecture", data, cls.__dataclass_fields__)
        try:
            conv = tuple(tuple(int(v) for v in layer)
                         for layer in data.get("conv_layers", DEFAULT_CONV_LAYERS))
            hidden = tuple(int(h) for h in data.get("dense_hidden", DEFAULT_DENSE_HIDDEN))
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"Configuração [architecture] inválida: {e}") from e
        for layer in conv:
            if not 1 <= len(layer) <= 4:
                raise ConfigurationError(
                    f"Camada convolucional {list(layer)}: use [canais, kernel, stride, pool].")
        return cls(conv_layers=conv, dense_hidden=hidden)


@dataclass(frozen=True)
class AnalysisSettings:
    """
    Parâmetros da varredura de janelas e da significância.

    Attributes:
        deltas: Larguras de janela.
        step_fraction: Passo entre centros como fração de delta.
        cross_sections: Seções de choque (fb) por classe de fundo.
        luminosities: Grade de luminosidade integrada (fb^-1).
        threshold: Critério de significância.
        scan_axis_class: Classe normal cuja probabilidade é varrida.
        anomaly_class: Classe tratada como sinal na varredura.
        backgrounds: Classes de fundo do denominador de R.
        pdf_bins: Bins dos histogramas 1D.
        simplex_bins: Bins por eixo do histograma 2D.
        simplex_axes: Par de classes normais dos eixos do simplex (K >= 3);
            vazio usa as duas primeiras.
        split: Partição usada para ROC, PDFs e varredura.
    """

    deltas: Tuple[float, ...] = DEFAULT_DELTAS
    step_fraction: float = SCAN_STEP_FRACTION
    cross_sections: Dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_CROSS_SECTIONS_FB))
    luminosities: Tuple[float, ...] = DEFAULT_LUMINOSITY_GRID
    threshold: float = SIGNIFICANCE_THRESHOLD
    scan_axis_class: str = DEFAULT_SCAN_AXIS_CLASS
    anomaly_class: str = DEFAULT_HELDOUT_CLASS
    backgrounds: Tuple[str, ...] = NORMAL_CLASSES
    pdf_bins: int = DEFAULT_PDF_BINS
    simplex_bins: int = DEFAULT_SIMPLEX_BINS
    simplex_axes: Tuple[str, ...] = ()
    split: str = DEFAULT_SCAN_SPLIT

    def validate(self) -> "AnalysisSettings":
        if not self.deltas:
            raise ConfigurationError("analysis.deltas: lista vazia.")
        for delta in self.deltas:
            if not 0.0 < delta <= 1.0:
                raise ConfigurationError(f"analysis.deltas: {delta} fora de (0, 1].")
        if not 0.0 < self.step_fraction <= 1.0:
            raise ConfigurationError(
                f"analysis.step_fraction deve estar em (0, 1], recebido {self.step_fraction}.")
        if any(not math.isfinite(v) or v <= 0 for v in self.luminosities):
            raise ConfigurationError("analysis.luminosities: valores devem ser > 0.")
        if not self.threshold > 0:
            raise ConfigurationError("analysis.threshold deve ser > 0.")
        for name in self.backgrounds:
            if name not in self.cross_sections:
                raise ConfigurationError(
                    f"analysis.cross_sections: falta a seção de choque do fundo '{name}'.")
        if self.pdf_bins < 2 or self.simplex_bins < 2:
            raise PreconditionError("analysis.pdf_bins/simplex_bins devem ser >= 2.")
        if self.simplex_axes and (len(self.simplex_axes) != 2
                                  or self.simplex_axes[0] == self.simplex_axes[1]):
            raise ConfigurationError(
                "analysis.simplex_axes: exige duas classes distintas, recebido "
                f"{list(self.simplex_axes)}.")
        if self.split not in ("train", "test", "all"):
            raise ConfigurationError(f"analysis.split inválido: '{self.split}'.")
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {"deltas": list(self.deltas), "step_fraction": self.step_fraction,
                "cross_sections": dict(sorted(self.cross_sections.items())),
                "luminosities": list(self.luminosities), "threshold": self.threshold,
                "scan_axis_class": self.scan_axis_class, "anomaly_class": self.anomaly_class,
                "backgrounds": list(self.backgrounds), "pdf_bins": self.pdf_bins,
                "simplex_bins": self.simplex_bins, "simplex_axes": list(self.simplex_axes),
                "split": self.split}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "AnalysisSettings":
        _reject_unknown("analysis", data, cls.__dataclass_fields__)
        values = dict(data)
        try:
            for key in ("deltas", "luminosities"):
                if key in values:
                    values[key] = tuple(float(v) for v in values[key])
            for key in ("backgrounds", "simplex_axes"):
                if key in values:
                    values[key] = tuple(str(v) for v in values[key])
            if "cross_sections" in values:
                values["cross_sections"] = {str(k): float(v)
                                            for k, v in values["cross_sections"].items()}
            settings = cls(**values)
        except (TypeError, ValueError, AttributeError) as e:
            raise ConfigurationError(f"Configuração [analysis] inválida: {e}") from e
        return settings.validate()


@dataclass(frozen=True)
class AblationSettings:
    """Classe retida e ordem cumulativa das classes na varredura de ablação."""

    heldout: str = DEFAULT_HELDOUT_CLASS
    order: Tuple[str, ...] = ABLATION_ORDER

    def to_dict(self) -> Dict[str, Any]:
        return {"heldout": self.heldout, "order": list(self.order)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "AblationSettings":
        _reject_unknown("ablation", data, cls.__dataclass_fields__)
        return cls(heldout=str(data.get("heldout", DEFAULT_HELDOUT_CLASS)),
                   order=tuple(data.get("order", ABLATION_ORDER)))


_SECTIONS = ("seed", "output_dir", "generator", "architecture", "training", "analysis",
             "ablation")


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Configuração completa de um experimento.

    A semente global é a única fonte de aleatoriedade; `training` não aceita
    semente própria (ela é derivada com `derive_seed(seed, "train")`).
    """

    seed: int = 0
    output_dir: str = str(DEFAULT_OUTPUT_DIR)
    generator: GeneratorSettings = field(default_factory=GeneratorSettings)
    architecture: ArchitectureSettings = field(default_factory=ArchitectureSettings)
    training: TrainConfig = field(
        default_factory=lambda: TrainConfig(anomaly_classes=DEFAULT_AA_CLASSES))
    analysis: AnalysisSettings = field(default_factory=AnalysisSettings)
    ablation: AblationSettings = field(default_factory=AblationSettings)

    @property
    def normal_classes(self) -> Tuple[str, ...]:
        return self.training.normal_classes

    @property
    def generated_classes(self) -> List[str]:
        return [*self.normal_classes, *self.generator.anomaly_classes]

    def validate(self) -> "ExperimentConfig":
        """
        Verifica a consistência entre as seções.

        Raises:
            ConfigurationError: Semente negativa, classes sobrepostas ou ausentes.
            UnknownClassError: Classe sem especificação no gerador.
        """
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigurationError(f"seed deve ser inteiro >= 0, recebido {self.seed}.")
        if self.generator.per_class_count < 1:
            raise PreconditionError("generator.per_class_count deve ser >= 1.")
        if not 0.0 <= self.generator.split_fraction <= 1.0:
            raise ConfigurationError("generator.split_fraction deve estar em [0, 1].")
        self.generator.generator_config()
        self.training.validate()
        self.analysis.validate()

        overlap = set(self.normal_classes) & set(self.generator.anomaly_classes)
        if overlap:
            raise ConfigurationError(
                f"Classes ao mesmo tempo normais e anômalas: {sorted(overlap)}.")
        table = self.generator.spec_table()
        for name in self.generated_classes:
            if name not in table:
                raise UnknownClassError(name, table.keys())
        generated = self.generated_classes
        for name in self.training.anomaly_classes:
            if name not in self.generator.anomaly_classes:
                raise UnknownClassError(name, self.generator.anomaly_classes)
        for name in (*self.analysis.simplex_axes, self.analysis.scan_axis_class):
            if name not in self.normal_classes:
                raise UnknownClassError(name, self.normal_classes)
        for name in (self.analysis.anomaly_class, *self.analysis.backgrounds):
            if name not in generated:
                raise UnknownClassError(name, generated)
        if self.ablation.heldout not in self.generator.anomaly_classes:
            raise UnknownClassError(self.ablation.heldout, self.generator.anomaly_classes)
        return self

    def architecture_for(self, input_shape: Optional[Tuple[int, int]] = None) -> Architecture:
        shape = input_shape or (self.generator.height, self.generator.width)
        return self.architecture.build(shape, len(self.normal_classes))

    def to_dict(self, include_output: bool = True) -> Dict[str, Any]:
        """
        Eco serializável da configuração.

        Args:
            include_output: Inclui `output_dir`; o eco gravado no próprio
                diretório e o digest o omitem, para que o mesmo experimento
                em diretórios diferentes produza artefatos idênticos.
        """
        training = self.training.to_dict()
        training.pop("seed", None)
        data: Dict[str, Any] = {"seed": self.seed,
                                "generator": self.generator.to_dict(),
                                "architecture": self.architecture.to_dict(),
                                "training": training,
                                "analysis": self.analysis.to_dict(),
                                "ablation": self.ablation.to_dict()}
        if include_output:
            data["output_dir"] = self.output_dir
        return data

    def digest(self) -> str:
        return sha256_bytes(canonical_json(self.to_dict(include_output=False)).encode("utf-8"))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        """
        Raises:
            ConfigurationError: Chave desconhecida ou valor inválido.
        """
        if not isinstance(data, dict):
            raise ConfigurationError("A configuração deve ser um objeto/tabela.")
        _reject_unknown("raiz", data, _SECTIONS)
        training = dict(_section(data, "training"))
        if "seed" in training:
            raise ConfigurationError(
                "Configuração [training]: 'seed' não é aceito; use a semente global.")
        training.setdefault("anomaly_classes", list(DEFAULT_AA_CLASSES))
        try:
            seed = int(data.get("seed", 0))
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"seed inválido: {e}") from e
        config = cls(seed=seed,
                     output_dir=str(data.get("output_dir", DEFAULT_OUTPUT_DIR)),
                     generator=GeneratorSettings.from_dict(_section(data, "generator")),
                     architecture=ArchitectureSettings.from_dict(_section(data, "architecture")),
                     training=TrainConfig.from_dict(training),
                     analysis=AnalysisSettings.from_dict(_section(data, "analysis")),
                     ablation=AblationSettings.from_dict(_section(data, "ablation")))
        return config.validate()


def load_config(path: Optional[PathLike]) -> ExperimentConfig:
    """
    Carrega a configuração de um arquivo `.json` ou `.toml`; None retorna os padrões.

    Raises:
        ConfigurationError: Extensão não suportada ou conteúdo inválido.
        ArtifactError: Arquivo ausente.
    """
    if path is None:
        return ExperimentConfig().validate()
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".json":
        data = load_json(path)
    elif suffix == ".toml":
        try:
            with open(path, "rb") as f:
                data = tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ConfigurationError(f"TOML inválido em {path}: {e}") from e
        except OSError as e:
            _handle_file_error(e, path, "leitura TOML")
    else:
        raise ConfigurationError(f"Formato de configuração não suportado: '{path.suffix}' "
                                 "(use .json ou .toml).")
    logger.info("Configuração carregada de %s", path)
    return ExperimentConfig.from_dict(data)


def apply_overrides(config: ExperimentConfig, seed: Optional[int] = None,
                    output_dir: Optional[PathLike] = None,
                    lambda_aa: Optional[float] = None,
                    deltas: Optional[Sequence[float]] = None,
                    per_class_count: Optional[int] = None,
                    epochs: Optional[int] = None) -> ExperimentConfig:
    """Aplica as opções de linha de comando sobre a configuração do arquivo."""
    if seed is not None:
        config = replace(config, seed=int(seed))
    if output_dir is not None:
        config = replace(config, output_dir=str(output_dir))
    if lambda_aa is not None:
        config = replace(config, training=replace(config.training, lambda_aa=float(lambda_aa)))
    if epochs is not None:
        config = replace(config, training=replace(config.training, epochs=int(epochs)))
    if deltas:
        config = replace(config, analysis=replace(config.analysis,
                                                  deltas=tuple(float(d) for d in deltas)))
    if per_class_count is not None:
        config = replace(config, generator=replace(config.generator,
                                                   per_class_count=int(per_class_count)))
    return config.validate()
