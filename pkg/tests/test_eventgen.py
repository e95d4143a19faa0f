# ----------------------------------------------------------------------------
# File: tests/test_eventgen.py (Testes do Gerador de Imagens)
# ----------------------------------------------------------------------------
# SPDX-License-Identifier: MIT
# Copyright (c) 2024-2025 Mateus G Pereira <mateus.pereira@ifsp.edu.br>
"""Testes do gerador paramétrico de imagens de jato e do tipo Dataset."""
from dataclasses import replace
from itertools import combinations

import numpy as np
import pytest

from anomalia.control.eventgen import (ClassSpec, Dataset, GeneratorConfig, average_image,
                                       default_specs, generate_dataset, generate_image,
                                       specs_for, stratified_split)
from anomalia.control.exceptions import (ConfigurationError, EmptyInputError,
                                         PreconditionError, UnknownClassError)
from anomalia.control.serialization import dataset_digest


def _local_maxima(img: np.ndarray):
    """Pixels positivos >= aos 8 vizinhos (busca exaustiva)."""
    h, w = img.shape
    found = []
    for r in range(h):
        for c in range(w):
            v = img[r, c]
            if v <= 0:
                continue
            neigh = img[max(r - 1, 0):r + 2, max(c - 1, 0):c + 2]
            if v >= neigh.max():
                found.append((float(v), r, c))
    return sorted(found, reverse=True)


@pytest.mark.parametrize("field, value", [
    ("prong_count", 0),
    ("prong_spread", 0.0),
    ("displacement_scale", -1.0),
    ("noise_level", -0.1),
])
def test_class_spec_rejects_invalid_field(field, value):
    spec = replace(default_specs()["W"], **{field: value})
    with pytest.raises(ConfigurationError, match=field):
        spec.validate()


def test_class_spec_rejects_profile_length_mismatch():
    with pytest.raises(ConfigurationError, match="energy_profile"):
        ClassSpec("X", 2, 1.0, (1.0,), 2.0).validate()


def test_class_spec_from_dict_unknown_field():
    data = default_specs()["QCD"].to_dict()
    data["prongs"] = 3
    with pytest.raises(ConfigurationError, match="prongs"):
        ClassSpec.from_dict(data)


def test_class_spec_dict_round_trip():
    spec = default_specs()["R4"]
    assert ClassSpec.from_dict(spec.to_dict()) == spec


def test_generate_image_is_deterministic():
    spec = default_specs()["Top"]
    a = generate_image(spec, np.random.default_rng(42))
    b = generate_image(spec, np.random.default_rng(42))
    assert a.pixels.tobytes() == b.pixels.tobytes()
    assert a.label == b.label == "Top"


def test_one_prong_without_noise_peaks_at_sampled_center():
    spec = replace(default_specs()["QCD"], noise_level=0.0)
    for seed in range(10):
        img = generate_image(spec, np.random.default_rng(seed))
        peak = np.unravel_index(np.argmax(img.pixels), img.pixels.shape)
        expected = tuple(int(v) for v in np.rint(img.centers[0]))
        assert peak == expected


def test_image_invariants_hold_for_every_class():
    config = GeneratorConfig()
    for name, spec in default_specs().items():
        for seed in range(5):
            img = generate_image(spec, np.random.default_rng([seed, 99]), config)
            assert img.pixels.dtype == np.float32
            assert np.isfinite(img.pixels).all()
            assert img.pixels.min() >= 0.0
            total = float(img.pixels.sum(dtype=np.float64))
            assert img.total_energy == pytest.approx(total, rel=1e-9)
            assert config.e_min * (1 - 1e-6) <= img.total_energy <= config.e_max * (1 + 1e-6)
            assert img.label == name


def test_three_prong_images_show_separated_maxima():
    spec = replace(default_specs()["Top"], noise_level=0.0)
    assert spec.prong_spread <= spec.displacement_scale / 2
    for seed in range(100):
        img = generate_image(spec, np.random.default_rng(seed))
        maxima = _local_maxima(img.pixels.astype(np.float64))
        assert len(maxima) >= 3
        for (_, r1, c1), (_, r2, c2) in combinations(maxima[:3], 2):
            assert np.hypot(r1 - r2, c1 - c2) >= 1.0


def test_generate_dataset_stratified_split():
    ds = generate_dataset(specs_for(["QCD", "Top"]), 100, 0.8, seed=1)
    assert len(ds) == 200
    train, test = ds.splits["train"], ds.splits["test"]
    assert train.size == 160 and test.size == 40
    assert set(train).isdisjoint(test)
    assert sorted(np.concatenate([train, test]).tolist()) == list(range(200))
    labels = np.array(ds.label_names)
    assert (labels[train] == "QCD").sum() == 80
    assert (labels[test] == "Top").sum() == 20


def test_generate_dataset_same_seed_same_digest(small_grid):
    specs = specs_for(["QCD", "Top"])
    a = generate_dataset(specs, 10, 0.8, seed=9, config=small_grid)
    b = generate_dataset(specs, 10, 0.8, seed=9, config=small_grid)
    c = generate_dataset(specs, 10, 0.8, seed=10, config=small_grid)
    assert dataset_digest(a) == dataset_digest(b)
    assert dataset_digest(a) != dataset_digest(c)


def test_image_stream_depends_only_on_seed_and_global_index(small_grid):
    specs = specs_for(["QCD", "Top"])
    ds = generate_dataset(specs, 4, 0.5, seed=21, config=small_grid)
    # Imagem global 5 = Top, índice 1 dentro da classe
    alone = generate_image(specs[1], np.random.default_rng([21, 5]), small_grid)
    assert np.array_equal(ds.images[5].pixels, alone.pixels)


def test_generate_dataset_preconditions():
    with pytest.raises(ConfigurationError):
        generate_dataset([], 10)
    with pytest.raises(PreconditionError):
        generate_dataset(specs_for(["QCD"]), 0)
    with pytest.raises(ConfigurationError, match="repetidos"):
        generate_dataset(specs_for(["QCD", "QCD"]), 2)
    with pytest.raises(ConfigurationError):
        generate_dataset(specs_for(["QCD"]), 2, split_fraction=1.5)


def test_specs_for_suggests_close_name():
    with pytest.raises(UnknownClassError) as excinfo:
        specs_for(["Tpo"])
    assert isinstance(excinfo.value, LookupError)
    assert "Top" in excinfo.value.suggestions


def test_stratified_split_rounds_per_class():
    splits = stratified_split(per_class_count=7, n_classes=3, split_fraction=0.5, seed=0)
    # round(3.5) = 4 por classe
    assert splits["train"].size == 12
    assert splits["test"].size == 9
    for c in range(3):
        block = set(range(7 * c, 7 * (c + 1)))
        assert len(block & set(splits["train"].tolist())) == 4


def test_average_image_of_single_and_pair(small_grid):
    ds = generate_dataset(specs_for(["QCD", "W"]), 2, 0.5, seed=4, config=small_grid)
    single = ds.select_classes(["QCD"]).subset([0])
    assert np.allclose(average_image(single, "QCD"), single.images[0].pixels)
    a, b = ds.images[2].pixels, ds.images[3].pixels
    assert np.allclose(average_image(ds, "W"), (a.astype(np.float64) + b) / 2.0)


def test_average_image_errors(small_grid):
    ds = generate_dataset(specs_for(["QCD"]), 2, 0.5, seed=4, config=small_grid)
    with pytest.raises(UnknownClassError):
        average_image(ds, "Top")
    empty = Dataset(images=[], splits={"train": np.array([], dtype=np.int64)}, seed=0,
                    class_names=("QCD",), config=small_grid)
    with pytest.raises(EmptyInputError):
        average_image(empty, "QCD")


def test_qcd_average_is_nearly_rotation_symmetric():
    ds = generate_dataset(specs_for(["QCD"]), 1000, 1.0, seed=2)
    avg = average_image(ds, "QCD")
    asymmetry = np.abs(avg - np.rot90(avg)).mean()
    assert asymmetry < 0.1 * avg.max()


def test_nearest_centroid_separates_qcd_from_top():
    ds = generate_dataset(specs_for(["QCD", "Top"]), 1000, 0.5, seed=8)
    x = ds.normalized_pixels().reshape(len(ds), -1).astype(np.float64)
    labels = ds.labels
    train, test = ds.indices("train"), ds.indices("test")
    centroids = np.stack([x[train][labels[train] == k].mean(axis=0) for k in (0, 1)])
    dist = ((x[test][:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    accuracy = float(np.mean(dist.argmin(axis=1) == labels[test]))
    assert test.size == 1000
    assert accuracy > 0.9


def test_dataset_select_and_counts(normal_ds):
    top = normal_ds.select_classes(["Top"])
    assert top.class_names == ("Top",)
    assert top.counts() == {"Top": 20}
    assert top.splits["train"].size + top.splits["test"].size == 20
    with pytest.raises(UnknownClassError):
        normal_ds.select_classes(["W"])
    with pytest.raises(ConfigurationError):
        normal_ds.indices("validation")


def test_normalized_pixels_sum_to_one(normal_ds):
    sums = normal_ds.normalized_pixels().sum(axis=(1, 2), dtype=np.float64)
    assert np.allclose(sums, 1.0, atol=1e-5)
