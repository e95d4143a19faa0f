# ----------------------------------------------------------------------------
# File: anomalia/control/eventgen.py (Gerador Paramétrico de Imagens de Jato)
# ----------------------------------------------------------------------------
# SPDX-License-Identifier: MIT
# Copyright (c) 2024-2025 Mateus G Pereira <mateus.pereira@ifsp.edu.br>
"""
Gerador determinístico e semeável de imagens de jato "de brinquedo".

Cada classe é descrita por um `ClassSpec`: a energia total do jato é
sorteada no intervalo [E_min, E_max] do gerador, repartida entre
`prong_count` sub-aglomerados gaussianos por uma Dirichlet, somada a ruído
por célula e recortada em zero. Os cortes de seleção da análise original
(p_T e massa do jato) não são simulados; o intervalo de energia os substitui.

Cada imagem usa o seu próprio fluxo aleatório derivado de (semente, índice
global), de modo que qualquer ordem de geração produz o mesmo dataset.
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from anomalia.control.constants import (DEFAULT_SPLIT_FRACTION, ENERGY_MAX_GEV,
                                        ENERGY_MIN_GEV, GRID_HEIGHT, GRID_WIDTH)
from anomalia.control.exceptions import (ConfigurationError, EmptyInputError,
                                         PreconditionError, UnknownClassError)

logger = logging.getLogger(__name__)

# Fluxo auxiliar usado apenas na partição treino/teste
_SPLIT_STREAM = 0x5EED
# Fração do passo angular 2*pi/n usada como jitter de cada prong
_ANGLE_JITTER = 0.2


@dataclass(frozen=True)
class ClassSpec:
    """
    Parâmetros de uma classe de jato.

    Attributes:
        name: Identificador da classe (ex: "QCD", "Top").
        prong_count: Número de sub-aglomerados de energia (>= 1).
        prong_spread: Largura gaussiana de cada prong, em pixels (> 0).
        energy_profile: Concentrações da Dirichlet que repartem a energia.
        displacement_scale: Escala radial de posicionamento dos prongs, em pixels.
        noise_level: Amplitude do ruído aditivo por célula, em GeV.
    """

    name: str
    prong_count: int
    prong_spread: float
    energy_profile: Tuple[float, ...]
    displacement_scale: float
    noise_level: float = 0.0

    def validate(self) -> "ClassSpec":
        """
        Verifica os invariantes da especificação.

        Returns:
            A própria instância, para encadeamento.

        Raises:
            ConfigurationError: Nomeando o primeiro campo inválido.
        """
        if not self.name:
            raise ConfigurationError("ClassSpec.name: nome vazio.")
        if int(self.prong_count) != self.prong_count or self.prong_count < 1:
            raise ConfigurationError(
                f"ClassSpec.prong_count ({self.name}): deve ser inteiro >= 1, "
                f"recebido {self.prong_count}.")
        if not math.isfinite(self.prong_spread) or self.prong_spread <= 0:
            raise ConfigurationError(
                f"ClassSpec.prong_spread ({self.name}): deve ser > 0, "
                f"recebido {self.prong_spread}.")
        if len(self.energy_profile) != self.prong_count:
            raise ConfigurationError(
                f"ClassSpec.energy_profile ({self.name}): {len(self.energy_profile)} "
                f"entradas para {self.prong_count} prongs.")
        if any(not math.isfinite(a) or a <= 0 for a in self.energy_profile):
            raise ConfigurationError(
                f"ClassSpec.energy_profile ({self.name}): todas as entradas devem ser > 0.")
        if not math.isfinite(self.displacement_scale) or self.displacement_scale < 0:
            raise ConfigurationError(
                f"ClassSpec.displacement_scale ({self.name}): deve ser >= 0.")
        if not math.isfinite(self.noise_level) or self.noise_level < 0:
            raise ConfigurationError(f"ClassSpec.noise_level ({self.name}): deve ser >= 0.")
        return self

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["energy_profile"] = list(self.energy_profile)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ClassSpec":
        """Constrói e valida uma especificação a partir de um dicionário (JSON/TOML)."""
        known = {"name", "prong_count", "prong_spread", "energy_profile",
                 "displacement_scale", "noise_level"}
        extra = set(data) - known
        if extra:
            raise ConfigurationError(f"ClassSpec: campos desconhecidos {sorted(extra)}.")
        try:
            spec = cls(name=str(data["name"]),
                       prong_count=int(data["prong_count"]),
                       prong_spread=float(data["prong_spread"]),
                       energy_profile=tuple(float(a) for a in data["energy_profile"]),
                       displacement_scale=float(data["displacement_scale"]),
                       noise_level=float(data.get("noise_level", 0.0)))
        except KeyError as e:
            raise ConfigurationError(f"ClassSpec: campo obrigatório ausente {e}.") from e
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"ClassSpec: valor inválido ({e}).") from e
        return spec.validate()


@dataclass(frozen=True)
class GeneratorConfig:
    """Geometria da grade e intervalo de energia total do gerador."""

    height: int = GRID_HEIGHT
    width: int = GRID_WIDTH
    e_min: float = ENERGY_MIN_GEV
    e_max: float = ENERGY_MAX_GEV

    def validate(self) -> "GeneratorConfig":
        if self.height < 1 or self.width < 1:
            raise ConfigurationError(
                f"GeneratorConfig: grade inválida {self.height}x{self.width}.")
        if not 0 < self.e_min <= self.e_max:
            raise ConfigurationError(
                f"GeneratorConfig: intervalo de energia inválido [{self.e_min}, {self.e_max}].")
        return self

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.height, self.width)


@dataclass(frozen=True, eq=False)
class JetImage:
    """
    Imagem de jato: grade H x W de energia depositada (GeV).

    Attributes:
        pixels: Matriz float32 não negativa.
        label: Nome da classe de origem.
        total_energy: Soma dos pixels (acumulada em float64).
        centers: Centros (linha, coluna) dos prongs sorteados, quando conhecidos.
    """

    pixels: np.ndarray
    label: str
    total_energy: float
    centers: Optional[np.ndarray] = None


def default_specs() -> Dict[str, ClassSpec]:
    """
    Especificações padrão das classes (unidades de pixel numa grade 32x32).

    QCD tem um prong largo; W e Top têm 2 e 3 prongs; R2/R3/R4 usam prongs
    mais estreitos e hierarquias de energia distintas; EFT tem 2 prongs
    assimétricos e mais afastados.
    """
    specs = [
        ClassSpec("QCD", 1, 3.0, (1.0,), 1.5, 0.3),
        ClassSpec("Top", 3, 1.2, (4.0, 4.0, 4.0), 6.0, 0.3),
        ClassSpec("W", 2, 1.2, (4.0, 4.0), 5.0, 0.3),
        ClassSpec("R2", 2, 0.8, (6.0, 2.0), 8.0, 0.3),
        ClassSpec("R3", 3, 0.8, (6.0, 3.0, 2.0), 8.0, 0.3),
        ClassSpec("R4", 4, 0.8, (4.0, 3.0, 2.0, 1.0), 9.0, 0.3),
        ClassSpec("EFT", 2, 1.0, (8.0, 1.5), 10.0, 0.3),
    ]
    return {spec.name: spec.validate() for spec in specs}


def specs_for(names: Iterable[str],
              available: Optional[Dict[str, ClassSpec]] = None) -> List[ClassSpec]:
    """
    Seleciona especificações pelo nome, na ordem pedida.

    Raises:
        UnknownClassError: Se algum nome não existir em `available`.
    """
    table = available if available is not None else default_specs()
    selected = []
    for name in names:
        if name not in table:
            raise UnknownClassError(name, table.keys())
        selected.append(table[name])
    return selected


def _prong_centers(spec: ClassSpec, rng: np.random.Generator,
                   config: GeneratorConfig) -> np.ndarray:
    """Sorteia os centros (linha, coluna) dos prongs em torno do centro da grade."""
    center = np.array([(config.height - 1) / 2.0, (config.width - 1) / 2.0])
    n = spec.prong_count
    if n == 1:
        # Uniforme no disco de raio displacement_scale
        radius = spec.displacement_scale * math.sqrt(rng.uniform())
        angle = rng.uniform(0.0, 2.0 * math.pi)
        return (center + radius * np.array([math.sin(angle), math.cos(angle)]))[None, :]
    phi0 = rng.uniform(0.0, 2.0 * math.pi)
    step = 2.0 * math.pi / n
    jitter = rng.uniform(-_ANGLE_JITTER, _ANGLE_JITTER, size=n) * step
    angles = phi0 + step * np.arange(n) + jitter
    radii = spec.displacement_scale * rng.uniform(0.6, 1.0, size=n)
    offsets = np.stack([radii * np.sin(angles), radii * np.cos(angles)], axis=1)
    return center + offsets


def generate_image(spec: ClassSpec, rng: np.random.Generator,
                   config: Optional[GeneratorConfig] = None) -> JetImage:
    """
    Gera uma imagem de jato para a classe descrita por `spec`.

    Args:
        spec: Especificação da classe.
        rng: Fluxo aleatório já inicializado (consumido pela chamada).
        config: Geometria e intervalo de energia; padrão 32x32, [800, 1600] GeV.

    Returns:
        A imagem gerada, com `label == spec.name`.

    Raises:
        ConfigurationError: Se `spec` ou `config` forem inválidos.
    """
    spec.validate()
    config = (config or GeneratorConfig()).validate()

    total = rng.uniform(config.e_min, config.e_max)
    shares = rng.dirichlet(np.asarray(spec.energy_profile, dtype=np.float64))
    centers = _prong_centers(spec, rng, config)

    rows = np.arange(config.height, dtype=np.float64)[:, None]
    cols = np.arange(config.width, dtype=np.float64)[None, :]
    image = np.zeros(config.shape, dtype=np.float64)
    two_var = 2.0 * spec.prong_spread ** 2
    for share, (r0, c0) in zip(shares, centers):
        blob = np.exp(-((rows - r0) ** 2 + (cols - c0) ** 2) / two_var)
        norm = blob.sum()
        if norm > 0:
            image += share * blob / norm

    image *= total
    if spec.noise_level > 0:
        image += rng.normal(0.0, spec.noise_level, size=config.shape)
    np.clip(image, 0.0, None, out=image)
    # Reescala para que a soma volte a ser a energia sorteada
    image *= total / image.sum()

    pixels = image.astype(np.float32)
    return JetImage(pixels=pixels, label=spec.name,
                    total_energy=float(pixels.sum(dtype=np.float64)), centers=centers)


@dataclass
class Dataset:
    """
    Coleção ordenada de imagens com partição nomeada (treino/teste).

    Attributes:
        images: Imagens em ordem "classe-maior" (todas da 1a classe, depois da 2a...).
        splits: Índices por partição ("train", "test"), disjuntos e cobrindo tudo.
        seed: Semente usada na geração.
        class_names: Conjunto declarado de classes, na ordem dos rótulos inteiros.
        specs: Especificações usadas (vazio quando o dataset foi recortado).
        config: Configuração do gerador.
    """

    images: List[JetImage]
    splits: Dict[str, np.ndarray]
    seed: int
    class_names: Tuple[str, ...]
    specs: Tuple[ClassSpec, ...] = ()
    config: GeneratorConfig = field(default_factory=GeneratorConfig)
    _stack: Optional[np.ndarray] = field(default=None, init=False, repr=False)

    def __len__(self) -> int:
        return len(self.images)

    @property
    def image_shape(self) -> Tuple[int, int]:
        if self.images:
            return tuple(self.images[0].pixels.shape)  # type: ignore[return-value]
        return self.config.shape

    @property
    def labels(self) -> np.ndarray:
        """Rótulos inteiros (índices em `class_names`)."""
        index = {name: i for i, name in enumerate(self.class_names)}
        return np.array([index[img.label] for img in self.images], dtype=np.int64)

    @property
    def label_names(self) -> List[str]:
        return [img.label for img in self.images]

    def indices(self, split: Optional[str] = None) -> np.ndarray:
        """Índices de uma partição ("train"/"test") ou de todo o dataset (None/"all")."""
        if split is None or split == "all":
            return np.arange(len(self.images), dtype=np.int64)
        if split not in self.splits:
            raise ConfigurationError(
                f"Partição desconhecida '{split}'; disponíveis: {sorted(self.splits)}.")
        return self.splits[split]

    def pixels(self, indices: Optional[Sequence[int]] = None) -> np.ndarray:
        """Pilha (N, H, W) float32 das energias brutas."""
        if self._stack is None:
            if self.images:
                self._stack = np.stack([img.pixels for img in self.images])
            else:
                self._stack = np.zeros((0, *self.config.shape), dtype=np.float32)
        if indices is None:
            return self._stack
        return self._stack[np.asarray(indices, dtype=np.int64)]

    def normalized_pixels(self, indices: Optional[Sequence[int]] = None) -> np.ndarray:
        """Imagens normalizadas para energia total unitária (entrada da rede)."""
        raw = self.pixels(indices)
        totals = raw.sum(axis=(1, 2), dtype=np.float64)
        totals[totals == 0] = 1.0
        return (raw / totals[:, None, None]).astype(np.float32)

    def class_indices(self, name: str, split: Optional[str] = None) -> np.ndarray:
        """Índices das imagens de uma classe, opcionalmente restritos a uma partição."""
        if name not in self.class_names:
            raise UnknownClassError(name, self.class_names)
        idx = self.indices(split)
        labels = self.label_names
        return np.array([i for i in idx if labels[i] == name], dtype=np.int64)

    def subset(self, indices: Sequence[int],
               class_names: Optional[Sequence[str]] = None) -> "Dataset":
        """
        Recorta o dataset mantendo a ordem dos índices e remapeando as partições.
        """
        keep = np.asarray(indices, dtype=np.int64)
        remap = {int(old): new for new, old in enumerate(keep)}
        splits = {name: np.array([remap[int(i)] for i in idx if int(i) in remap],
                                 dtype=np.int64)
                  for name, idx in self.splits.items()}
        names = tuple(class_names) if class_names is not None else self.class_names
        specs = tuple(s for s in self.specs if s.name in names)
        return Dataset(images=[self.images[int(i)] for i in keep], splits=splits,
                       seed=self.seed, class_names=names, specs=specs, config=self.config)

    def select_classes(self, names: Sequence[str]) -> "Dataset":
        """
        Restringe o dataset às classes pedidas (na ordem dada).

        Raises:
            UnknownClassError: Se alguma classe não for declarada no dataset.
        """
        for name in names:
            if name not in self.class_names:
                raise UnknownClassError(name, self.class_names)
        wanted = set(names)
        keep = [i for i, img in enumerate(self.images) if img.label in wanted]
        return self.subset(keep, class_names=list(names))

    def counts(self) -> Dict[str, int]:
        labels = self.label_names
        return {name: labels.count(name) for name in self.class_names}


def stratified_split(per_class_count: int, n_classes: int, split_fraction: float,
                     seed: int) -> Dict[str, np.ndarray]:
    """
    Partição estratificada por classe: cada classe contribui
    round(per_class_count * split_fraction) imagens ao treino.

    Returns:
        Dicionário {"train": índices, "test": índices}, ambos ordenados.
    """
    n_train = int(math.floor(per_class_count * split_fraction + 0.5))
    train: List[np.ndarray] = []
    test: List[np.ndarray] = []
    for c in range(n_classes):
        rng = np.random.default_rng([seed, c, _SPLIT_STREAM])
        perm = rng.permutation(per_class_count) + c * per_class_count
        train.append(perm[:n_train])
        test.append(perm[n_train:])
    return {"train": np.sort(np.concatenate(train)).astype(np.int64),
            "test": np.sort(np.concatenate(test)).astype(np.int64)}


def generate_dataset(specs: Sequence[ClassSpec], per_class_count: int,
                     split_fraction: float = DEFAULT_SPLIT_FRACTION, seed: int = 0,
                     config: Optional[GeneratorConfig] = None) -> Dataset:
    """
    Gera um dataset balanceado com `per_class_count` imagens por classe.

    Args:
        specs: Especificações das classes (nomes únicos).
        per_class_count: Imagens por classe (>= 1).
        split_fraction: Fração de treino em [0, 1].
        seed: Semente (inteiro não negativo).
        config: Configuração do gerador.

    Returns:
        O dataset gerado; a imagem global `g` usa o fluxo `default_rng([seed, g])`.

    Raises:
        ConfigurationError: Lista vazia, nomes duplicados ou fração fora de [0, 1].
        PreconditionError: per_class_count < 1.
    """
    if not specs:
        raise ConfigurationError("generate_dataset: lista de especificações vazia.")
    names = [spec.name for spec in specs]
    if len(set(names)) != len(names):
        raise ConfigurationError(f"generate_dataset: nomes de classe repetidos em {names}.")
    if per_class_count < 1:
        raise PreconditionError(
            f"generate_dataset: per_class_count deve ser >= 1, recebido {per_class_count}.")
    if not 0.0 <= split_fraction <= 1.0:
        raise ConfigurationError(
            f"generate_dataset: split_fraction deve estar em [0, 1], recebido {split_fraction}.")
    if seed < 0:
        raise ConfigurationError(f"generate_dataset: semente negativa ({seed}).")
    config = (config or GeneratorConfig()).validate()
    for spec in specs:
        spec.validate()

    images: List[JetImage] = []
    for c, spec in enumerate(specs):
        for i in range(per_class_count):
            rng = np.random.default_rng([seed, c * per_class_count + i])
            images.append(generate_image(spec, rng, config))
        logger.info("Classe '%s': %d imagens geradas.", spec.name, per_class_count)

    splits = stratified_split(per_class_count, len(specs), split_fraction, seed)
    logger.debug("Partição: %d treino / %d teste.", len(splits["train"]), len(splits["test"]))
    return Dataset(images=images, splits=splits, seed=seed, class_names=tuple(names),
                   specs=tuple(specs), config=config)


def average_image(ds: Dataset, class_name: str) -> np.ndarray:
    """
    Imagem média (float64) de uma classe do dataset.

    Raises:
        UnknownClassError: Classe não declarada no dataset.
        EmptyInputError: Classe declarada mas sem imagens.
    """
    idx = ds.class_indices(class_name)
    if idx.size == 0:
        raise EmptyInputError(f"Classe '{class_name}' não tem imagens no dataset.")
    return ds.pixels(idx).astype(np.float64).mean(axis=0)

