# ----------------------------------------------------------------------------
# File: tests/test_analysis.py (Testes das Estatísticas de Detecção)
# ----------------------------------------------------------------------------
# SPDX-License-Identifier: MIT
# Copyright (c) 2024-2025 Mateus G Pereira <mateus.pereira@ifsp.edu.br>
"""
Testes de scores, histogramas, ROC, eficiências, métrica R, varredura de
janelas (contra recomputação exaustiva) e seção de choque mínima.
"""
import math
from fractions import Fraction

import numpy as np
import pytest

from conftest import make_records

from anomalia.control.analysis import (ScoreRecord, Window, compute_R, efficiency_errors,
                                       naive_anomaly_prob, naive_anomaly_summary,
                                       pdf_by_class, pdf_histogram, roc_auc, scan_windows,
                                       score_dataset, sigma_min, sigma_min_curve,
                                       significance, simplex_pdf, validate_cross_sections,
                                       window_efficiency)
from anomalia.control.constants import DEFAULT_LUMINOSITY_GRID, MESSAGES
from anomalia.control.exceptions import (ConfigurationError, DimensionError, EmptyInputError,
                                         NumericError, PreconditionError, UnknownClassError)
from anomalia.control.network import Architecture, NetworkParams, init_params

XSEC = {"QCD": 5.0e4, "Top": 1.0e3}


# --- Scores ---

def test_score_dataset_preserves_order(normal_ds, tiny_arch):
    params = init_params(tiny_arch, 0)
    records = score_dataset(params, normal_ds)
    assert len(records) == len(normal_ds)
    assert [r.event_id for r in records] == list(range(len(normal_ds)))
    assert [r.true_class for r in records] == normal_ds.label_names
    subset = score_dataset(params, normal_ds, [5, 2])
    assert [r.event_id for r in subset] == [5, 2]
    assert np.allclose(subset[1].probs, records[2].probs)
    assert score_dataset(params, normal_ds, []) == []


def test_score_dataset_zero_model_is_uniform(normal_ds, tiny_arch):
    records = score_dataset(NetworkParams(tiny_arch), normal_ds)
    assert all(np.allclose(r.probs, 0.5) for r in records)


def test_score_dataset_shape_mismatch(normal_ds):
    params = init_params(Architecture((8, 8), (), (2,), 2).validate(), 0)
    with pytest.raises(DimensionError):
        score_dataset(params, normal_ds)


# --- Histogramas ---

def test_pdf_histogram_single_bin():
    hist = pdf_histogram(make_records([0.5] * 7, "Top"), axis=0, bins=10)
    assert np.count_nonzero(hist.density) == 1
    assert hist.integral() == pytest.approx(1.0, abs=1e-9)


def test_pdf_histogram_two_points():
    hist = pdf_histogram(make_records([0.1, 0.9], "Top"), axis=0, bins=2)
    assert hist.density[0] == hist.density[1]


def test_pdf_histograms_integrate_to_one():
    rng = np.random.default_rng(4)
    for _ in range(20):
        records = make_records(rng.uniform(size=int(rng.integers(1, 200))), "QCD")
        hist = pdf_histogram(records, axis=int(rng.integers(0, 2)), bins=int(rng.integers(2, 60)))
        assert abs(hist.integral() - 1.0) <= 1e-9


def test_pdf_histogram_preconditions():
    with pytest.raises(PreconditionError):
        pdf_histogram(make_records([0.5], "Top"), 0, bins=1)
    with pytest.raises(EmptyInputError):
        pdf_histogram([], 0)


def test_pdf_by_class_splits_by_origin():
    records = make_records([0.1, 0.2], "QCD") + make_records([0.8], "EFT", start=2)
    pdfs = pdf_by_class(records, 0, bins=5)
    assert list(pdfs) == ["QCD", "EFT"]
    assert all(abs(h.integral() - 1.0) <= 1e-9 for h in pdfs.values())


def test_simplex_pdf_uniform_records_fill_one_cell():
    records = [ScoreRecord(np.full(3, 1.0 / 3.0), "W", i) for i in range(10)]
    hist = simplex_pdf(records, (0, 1), bins=5)
    occupied = np.argwhere(hist.density > 0)
    assert occupied.tolist() == [[1, 1]]
    assert hist.x_edges[1] <= 1.0 / 3.0 < hist.x_edges[2]
    assert abs(hist.integral() - 1.0) <= 1e-9


def test_simplex_pdf_integral_random():
    rng = np.random.default_rng(2)
    probs = rng.dirichlet(np.ones(4), size=300)
    records = [ScoreRecord(p, "Top", i) for i, p in enumerate(probs)]
    assert abs(simplex_pdf(records, (1, 3), bins=17).integral() - 1.0) <= 1e-9


def test_simplex_pdf_errors():
    with pytest.raises(ConfigurationError):
        simplex_pdf(make_records([0.5], "Top"), (0, 1))
    records = [ScoreRecord(np.full(3, 1.0 / 3.0), "W")]
    with pytest.raises(ConfigurationError):
        simplex_pdf(records, (1, 1))
    with pytest.raises(EmptyInputError):
        simplex_pdf([], (0, 1))


# --- ROC ---

def test_roc_perfect_separation():
    records = make_records([0.9, 0.8, 0.95], "Top") + make_records([0.1, 0.3], "QCD")
    curve = roc_auc(records, "Top", "QCD", axis=0)
    assert curve.auc == 1.0
    assert curve.thresholds[0] == np.inf
    assert curve.fpr[0] == 0.0 and curve.tpr[0] == 0.0
    assert curve.fpr[-1] == 1.0 and curve.tpr[-1] == 1.0


def test_roc_identical_distributions_near_half():
    rng = np.random.default_rng(17)
    records = (make_records(rng.uniform(size=5000), "Top")
               + make_records(rng.uniform(size=5000), "QCD", start=5000))
    assert roc_auc(records, "Top", "QCD", 0).auc == pytest.approx(0.5, abs=0.02)


def test_roc_label_swap_complements_auc():
    rng = np.random.default_rng(3)
    values = np.round(rng.uniform(size=300), 2)  # com empates
    records = make_records(values[:150], "Top") + make_records(values[150:] ** 2, "QCD", 150)
    auc = roc_auc(records, "Top", "QCD", 0).auc
    swapped = roc_auc(records, "QCD", "Top", 0).auc
    assert 0.0 <= auc <= 1.0
    assert swapped == pytest.approx(1.0 - auc, abs=1e-12)


def test_roc_missing_class():
    with pytest.raises(UnknownClassError):
        roc_auc(make_records([0.4], "Top"), "Top", "QCD", 0)


# --- P_An ingênua ---

def test_naive_anomaly_probability():
    assert naive_anomaly_prob(ScoreRecord(np.array([0.3, 0.7]), "EFT"), (0, 1)) == \
        pytest.approx(0.0)
    three = ScoreRecord(np.array([0.3, 0.3, 0.4]), "EFT")
    assert naive_anomaly_prob(three, (0, 1)) == pytest.approx(0.4)
    with pytest.raises(ConfigurationError):
        naive_anomaly_prob(three, None)


def test_naive_anomaly_summary_carries_note():
    summary = naive_anomaly_summary(make_records([0.2, 0.6], "W"), (0, 1))
    assert summary["note"] == MESSAGES["naive_note"]
    assert summary["mean_by_class"]["W"] == pytest.approx(0.0)


# --- Eficiências e R ---

def test_window_efficiency_examples():
    records = make_records(np.arange(1, 11) / 20.0, "EFT")
    assert window_efficiency(records, Window(0.2, 0.5))["EFT"] == pytest.approx(0.7)
    assert window_efficiency(records, Window(0.0, 1.0))["EFT"] == 1.0
    assert window_efficiency(records, Window(0.9, 1.0))["EFT"] == 0.0
    assert window_efficiency(records, Window(0.0, 1.0), ["EFT", "QCD"])["QCD"] is None
    with pytest.raises(ConfigurationError):
        window_efficiency(records, Window(0.5, 0.5))


def test_window_efficiency_is_monotone():
    rng = np.random.default_rng(8)
    records = make_records(rng.uniform(size=200), "QCD")
    for _ in range(50):
        a, b = np.sort(rng.uniform(size=2))
        if a == b:
            continue
        inner = window_efficiency(records, Window(a, b))["QCD"]
        outer = window_efficiency(records, Window(max(0.0, a - 0.05), min(1.0, b + 0.05)))["QCD"]
        assert outer >= inner


def test_efficiency_errors_binomial():
    errors = efficiency_errors({"QCD": 0.25, "Top": None}, {"QCD": 100, "Top": 0})
    assert errors["QCD"] == pytest.approx(math.sqrt(0.25 * 0.75 / 100))
    assert errors["Top"] is None


def test_compute_r_hand_example():
    eff = {"EFT": 0.5, "QCD": 0.01, "Top": 0.04}
    r = compute_R(eff, {"QCD": 50000.0, "Top": 1000.0}, "EFT", ["QCD", "Top"])
    assert r == pytest.approx(0.5 / math.sqrt(540.0), rel=1e-9)
    assert r == pytest.approx(0.021517, abs=1e-6)


def test_compute_r_scaling_laws():
    eff = {"EFT": 0.3, "QCD": 0.02, "Top": 0.1}
    base = compute_R(eff, XSEC, "EFT", ["QCD", "Top"])
    doubled = compute_R({"EFT": 0.3, "QCD": 0.04, "Top": 0.2}, XSEC, "EFT", ["QCD", "Top"])
    assert base / doubled == pytest.approx(math.sqrt(2.0), rel=1e-12)
    scaled = compute_R(eff, {k: 9.0 * v for k, v in XSEC.items()}, "EFT", ["QCD", "Top"])
    assert base / scaled == pytest.approx(3.0, rel=1e-12)
    assert compute_R({"EFT": 0.0, "QCD": 0.1, "Top": 0.1}, XSEC, "EFT", ["QCD", "Top"]) == 0.0


def test_compute_r_edge_cases():
    assert compute_R({"EFT": 0.2, "QCD": 0.0}, {"QCD": 5e4}, "EFT", ["QCD"]) == math.inf
    with pytest.raises(NumericError):
        compute_R({"EFT": -0.1, "QCD": 0.1}, {"QCD": 5e4}, "EFT", ["QCD"])
    with pytest.raises(NumericError):
        compute_R({"EFT": 0.1, "QCD": 0.1}, {"QCD": -1.0}, "EFT", ["QCD"])
    with pytest.raises(ConfigurationError):
        compute_R({"EFT": 0.1, "QCD": 0.1}, {}, "EFT", ["QCD"])
    with pytest.raises(ConfigurationError):
        compute_R({"EFT": 0.1, "QCD": None}, {"QCD": 1.0}, "EFT", ["QCD"])


def test_validate_cross_sections():
    assert validate_cross_sections({"QCD": 5e4}) == {"QCD": 5e4}
    with pytest.raises(ConfigurationError):
        validate_cross_sections({"Top": 0.0})


# --- Varredura de janelas ---

def _brute_force_scan(values, labels, delta, step, xsec, anomaly, backgrounds):
    """
    Recalcula cada janela a partir dos valores brutos, sem ordenação nem busca
    binária; bordas da grade decimal em aritmética exata (frações).
    """
    delta_q, step_q = Fraction(repr(delta)), Fraction(repr(round(step, 12)))
    n = math.floor((1 - delta_q) / step_q) + 1
    rows = []
    for i in range(n):
        lo, hi = float(i * step_q), float(min(Fraction(1), i * step_q + delta_q))
        eff = {}
        for name in [anomaly, *backgrounds]:
            own = [v for v, lab in zip(values, labels) if lab == name]
            eff[name] = sum(1 for v in own if lo <= v <= hi) / len(own)
        denom = 0.0
        for name in backgrounds:
            denom += xsec[name] * eff[name]
        if eff[anomaly] == 0.0:
            r, excluded = 0.0, False
        elif denom == 0.0:
            r, excluded = 0.0, True
        else:
            r, excluded = eff[anomaly] / math.sqrt(denom), False
        rows.append((lo, hi, eff, r, excluded))
    return rows


@pytest.mark.parametrize("seed", range(5))
def test_scan_windows_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n_an, n_qcd, n_top = (int(v) for v in rng.integers(20, 300, size=3))
    values = np.concatenate([rng.beta(5, 2, n_an), rng.beta(1, 6, n_qcd), rng.beta(8, 1, n_top)])
    labels = ["EFT"] * n_an + ["QCD"] * n_qcd + ["Top"] * n_top
    assert len(values) <= 1000
    records = [ScoreRecord(np.array([v, 1.0 - v]), lab, i)
               for i, (v, lab) in enumerate(zip(values, labels))]
    delta = float(rng.choice([0.08, 0.1, 0.12, 0.25]))
    result = scan_windows(records, delta, delta / 10.0, XSEC, "EFT", ["QCD", "Top"], axis=0)
    expected = _brute_force_scan(values.tolist(), labels, delta, delta / 10.0, XSEC, "EFT",
                                 ["QCD", "Top"])
    assert len(result.windows) == len(expected)
    for i, (lo, hi, eff, r, excluded) in enumerate(expected):
        assert (result.windows[i].p_min, result.windows[i].p_max) == (lo, hi)
        assert result.efficiencies[i] == eff
        assert result.r_values[i] == r
        assert result.excluded[i] == excluded
    assert result.r_max == max(result.r_values)
    assert result.r_values[result.best_index] == result.r_max
    assert all(r >= 0 for r in result.r_values)


def test_scan_window_edges_sit_on_the_decimal_grid():
    records = (make_records([0.25, 0.35, 0.07], "EFT")
               + make_records([0.01, 0.01, 0.01, 0.25, 0.35, 0.99], "QCD", 3))
    result = scan_windows(records, 0.1, 0.01, {"QCD": 5.0e4}, "EFT", ["QCD"])
    assert len(result.windows) == 91
    for i, window in enumerate(result.windows):
        assert window.p_min == float(Fraction(i, 100))
        assert window.p_max == float(Fraction(i + 10, 100))
    # [0.25, 0.35] contém as duas bordas; [0.15, 0.25] e [0.26, 0.36] só uma
    assert result.efficiencies[25] == {"EFT": 2 / 3, "QCD": 2 / 6}
    assert result.efficiencies[15] == {"EFT": 1 / 3, "QCD": 1 / 6}
    assert result.efficiencies[26] == {"EFT": 1 / 3, "QCD": 1 / 6}
    assert result.windows[-1].p_max == 1.0


def test_scan_full_width_window():
    records = make_records([0.2, 0.7], "EFT") + make_records([0.1, 0.5, 0.9], "QCD", 2) \
        + make_records([0.95], "Top", 5)
    result = scan_windows(records, 1.0, None, XSEC, "EFT", ["QCD", "Top"])
    assert len(result.windows) == 1
    assert (result.best_window.p_min, result.best_window.p_max) == (0.0, 1.0)
    assert result.r_max == pytest.approx(1.0 / math.sqrt(XSEC["QCD"] + XSEC["Top"]))
    assert result.step == pytest.approx(0.1)


def test_scan_finds_clustered_anomalies():
    records = (make_records([0.5] * 20, "EFT")
               + make_records([0.02] * 50 + [0.5] * 2, "QCD", 20)
               + make_records([0.98] * 50 + [0.5], "Top", 72))
    result = scan_windows(records, 0.1, 0.01, XSEC, "EFT", ["QCD", "Top"])
    assert result.best_window.contains(0.5)
    r_max = [scan_windows(records, d, d / 10, XSEC, "EFT", ["QCD", "Top"]).r_max
             for d in (0.08, 0.1, 0.12)]
    assert max(r_max) <= 1.15 * min(r_max)


def test_scan_flags_zero_background_windows():
    records = make_records([0.5] * 5, "EFT") + make_records([0.02] * 5, "QCD", 5)
    result = scan_windows(records, 0.1, 0.05, {"QCD": 5e4}, "EFT", ["QCD"])
    assert any(result.excluded)
    assert all(r == 0.0 for r, ex in zip(result.r_values, result.excluded) if ex)
    assert result.r_max == 0.0


def test_scan_argmax_invariant_under_cross_section_scaling():
    rng = np.random.default_rng(11)
    records = (make_records(rng.beta(4, 2, 200), "EFT")
               + make_records(rng.beta(1, 4, 300), "QCD", 200)
               + make_records(rng.beta(6, 1, 300), "Top", 500))
    a = scan_windows(records, 0.1, 0.01, XSEC, "EFT", ["QCD", "Top"])
    b = scan_windows(records, 0.1, 0.01, {k: 4.0 * v for k, v in XSEC.items()}, "EFT",
                     ["QCD", "Top"])
    assert a.best_index == b.best_index
    assert a.r_max == pytest.approx(2.0 * b.r_max, rel=1e-12)


def test_scan_preconditions():
    records = make_records([0.5], "EFT") + make_records([0.4], "QCD", 1)
    with pytest.raises(ConfigurationError):
        scan_windows(records, 0.0, 0.01, XSEC, "EFT", ["QCD"])
    with pytest.raises(ConfigurationError):
        scan_windows(records, 0.1, 0.2, XSEC, "EFT", ["QCD"])
    with pytest.raises(ConfigurationError, match="nenhuma janela"):
        scan_windows(records, 1.0, None, {"QCD": 0.0}, "EFT", ["QCD"])


# --- Significância ---

def test_significance_examples():
    assert significance(50, 100) == 5.0
    assert significance(0, 7) == 0.0
    assert significance(5, 1) == 5.0
    with pytest.raises(NumericError):
        significance(3, 0)


def test_sigma_min_example_and_identities():
    r_max = 0.5 / math.sqrt(540.0)
    assert sigma_min(0.021517, 3000.0) == pytest.approx(4.243, abs=1e-3)
    curve = sigma_min_curve(r_max)
    assert [lum for lum, _ in curve] == list(DEFAULT_LUMINOSITY_GRID)
    assert 3000.0 in DEFAULT_LUMINOSITY_GRID and len(curve) == 10
    for lum, sigma in curve:
        assert sigma * r_max * math.sqrt(lum) == pytest.approx(5.0, rel=1e-12)
    assert sigma_min(r_max, 500.0) / sigma_min(r_max, 1000.0) == pytest.approx(math.sqrt(2.0))
    assert sigma_min(r_max, 100.0) / sigma_min(r_max, 400.0) == pytest.approx(2.0)


def test_sigma_min_rejects_non_positive():
    with pytest.raises(NumericError):
        sigma_min(0.0, 3000.0)
    with pytest.raises(NumericError):
        sigma_min(0.02, -1.0)
    with pytest.raises(NumericError):
        sigma_min_curve(0.0)
