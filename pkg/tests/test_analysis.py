import math

import numpy as np
import pytest

from conftest import polar_angle_deviation
from spinpath.analysis import (
    FitError,
    NormalizationError,
    ScanResult,
    SinusoidFit,
    calibrate_phase,
    estimate_bell_s,
    fit_sinusoid,
    fit_sinusoid_xy,
    normalize_by_reference,
    projections_from_fit,
    read_scan_results,
    run_azimuthal_scan,
    run_polar_scan,
    write_scan_results,
)
from spinpath.chsh import s_polar_max
from spinpath.experiment import ExperimentConfig, Interferogram, simulate_interferogram

TSIRELSON = 2.0 * math.sqrt(2.0)


def make_gram(chi, counts):
    return Interferogram(chi, counts, delta=0.0, gamma=0.0)


def flat_fit(mean, visibility, phase):
    amplitude = visibility * mean
    return SinusoidFit(mean=mean, amplitude=amplitude, phase=phase,
                       visibility=visibility, covariance=np.eye(3),
                       residual_chi2=0.0)


def visibility_sigma(fit):
    a, b, c = fit.abc()
    amp = math.hypot(b, c)
    grad = np.array([-amp / a ** 2, b / (amp * a), c / (amp * a)])
    return math.sqrt(grad @ fit.covariance @ grad)


# ---------------------------------------------------------------------------
# sinusoid fitting
# ---------------------------------------------------------------------------

def test_fit_recovers_spec_example():
    chi = np.linspace(0, 4 * math.pi, 32, endpoint=False)
    fit = fit_sinusoid(make_gram(chi, 100.0 * (1.0 + 0.5 * np.cos(chi - 0.3))))
    assert fit.mean == pytest.approx(100.0, rel=1e-9)
    assert fit.visibility == pytest.approx(0.5, rel=1e-9)
    # phase convention: model = mean + A*cos(chi + phase), phase in [0, 2*pi)
    assert fit.phase == pytest.approx(2 * math.pi - 0.3, abs=1e-9)
    fit = fit_sinusoid(make_gram(chi, 100.0 * (1.0 + 0.5 * np.cos(chi + 0.3))))
    assert fit.phase == pytest.approx(0.3, abs=1e-9)


def test_fit_recovers_random_parameters():
    rng = np.random.default_rng(0)
    chi = np.linspace(0, 4 * math.pi, 32, endpoint=False)
    for _ in range(100):
        mean = rng.uniform(50, 2000)
        visibility = rng.uniform(0.05, 1.0)
        phase = rng.uniform(0, 2 * math.pi)
        counts = mean * (1.0 + visibility * np.cos(chi + phase))
        fit = fit_sinusoid(make_gram(chi, counts))
        assert fit.mean == pytest.approx(mean, rel=1e-9)
        assert fit.amplitude == pytest.approx(mean * visibility, rel=1e-9)
        assert fit.visibility == pytest.approx(visibility, rel=1e-9)
        delta_phase = (fit.phase - phase + math.pi) % (2 * math.pi) - math.pi
        assert abs(delta_phase) < 1e-9


def test_fit_flat_data():
    chi = np.linspace(0, 4 * math.pi, 32, endpoint=False)
    fit = fit_sinusoid(make_gram(chi, np.full(32, 250.0)))
    assert fit.amplitude == pytest.approx(0.0, abs=1e-9)
    assert fit.visibility == pytest.approx(0.0, abs=1e-9)


def test_fit_rejects_degenerate_designs():
    with pytest.raises(FitError):
        fit_sinusoid(make_gram(np.full(8, 1.3), np.full(8, 100.0)))
    with pytest.raises(FitError):
        fit_sinusoid(make_gram(np.array([0.0, 1.0, 2.0, 3.0]),
                               np.array([1.0, 2.0, 1.0, 2.0])))
    with pytest.raises(FitError):
        fit_sinusoid_xy(np.array([0.0, 1.0, 2.0]), np.array([1.0, 1.0, 1.0]),
                        np.array([1.0, -1.0, 1.0]))


def test_fit_poisson_visibility_coverage():
    # 1e4 mean counts, V = 0.5: fitted contrast within 3 sigma in >= 99% of
    # seeded trials
    config_template = dict(max_rate=25.0, measure_time=800.0, visibility=0.5)
    hits = 0
    trials = 200
    for seed in range(trials):
        config = ExperimentConfig(seed=seed, **config_template)
        gram = simulate_interferogram(config, math.pi / 2, 0.0)
        fit = fit_sinusoid(gram)
        if abs(fit.visibility - 0.5) <= 3 * visibility_sigma(fit):
            hits += 1
    assert hits / trials >= 0.99


def test_fitted_visibility_matches_config():
    config = ExperimentConfig(max_rate=25.0, measure_time=1600.0,
                              visibility=0.5, seed=2)
    fit = fit_sinusoid(simulate_interferogram(config, math.pi / 2, 0.0))
    assert abs(fit.visibility - 0.5) <= 3 * visibility_sigma(fit)


# ---------------------------------------------------------------------------
# reference normalization
# ---------------------------------------------------------------------------

def test_normalize_contrast_ratio():
    fit = normalize_by_reference(flat_fit(100.0, 0.4, 1.0),
                                 flat_fit(100.0, 0.5, 0.3))
    assert fit.visibility == pytest.approx(0.8, rel=1e-12)
    assert fit.phase == pytest.approx(0.7, abs=1e-12)
    assert fit.over_unity is False


def test_normalize_clips_over_unity():
    fit = normalize_by_reference(flat_fit(100.0, 0.55, 0.0),
                                 flat_fit(100.0, 0.5, 0.0))
    assert fit.visibility == pytest.approx(1.0, abs=1e-12)
    assert fit.over_unity is True


def test_normalize_requires_reference_contrast():
    with pytest.raises(NormalizationError):
        normalize_by_reference(flat_fit(100.0, 0.4, 0.0),
                               flat_fit(100.0, 0.0, 0.0))


def test_normalize_wraps_phase():
    fit = normalize_by_reference(flat_fit(100.0, 0.4, 0.2),
                                 flat_fit(100.0, 0.5, 0.5))
    assert fit.phase == pytest.approx(2 * math.pi - 0.3, abs=1e-12)


def test_calibrate_phase_keeps_contrast():
    fit = calibrate_phase(flat_fit(100.0, 0.4, 1.0), flat_fit(100.0, 0.5, 0.3))
    assert fit.visibility == pytest.approx(0.4, rel=1e-12)
    assert fit.phase == pytest.approx(0.7, abs=1e-12)


def test_reference_phase_recovery_from_noiseless_run():
    from spinpath.experiment import reference_run

    config = ExperimentConfig(dyn_offset=0.3)
    ref = reference_run(config, math.pi / 2, exact=True)
    fit = fit_sinusoid(ref)
    assert fit.phase == pytest.approx(0.3, abs=1e-9)


# ---------------------------------------------------------------------------
# fringe projections
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("mean,amp,phase,expected", [
    (100.0, 50.0, 0.0, (150.0, 50.0)),
    (100.0, 0.0, 1.234, (100.0, 100.0)),
    (80.0, 40.0, math.pi / 2, (80.0, 80.0)),
])
def test_projections_examples(mean, amp, phase, expected):
    fit = SinusoidFit(mean=mean, amplitude=amp, phase=phase,
                      visibility=amp / mean, covariance=np.eye(3),
                      residual_chi2=0.0)
    i0, ipi = projections_from_fit(fit)
    assert i0 == pytest.approx(expected[0], abs=1e-9)
    assert ipi == pytest.approx(expected[1], abs=1e-9)


# ---------------------------------------------------------------------------
# full pipeline, infinite statistics
# ---------------------------------------------------------------------------

def test_polar_scan_matches_analytic_curve():
    config = ExperimentConfig()
    gammas = [0.0, math.pi / 4, math.pi / 2, 2.0]
    results = run_polar_scan(config, gammas, exact=True)
    for r in results:
        assert r.s == pytest.approx(s_polar_max(r.gamma), abs=1e-6)
        assert polar_angle_deviation(r.beta1, r.beta1_p, r.gamma) < 1e-5
        assert r.method == "polar-adjusted"


def test_polar_scan_gamma_quarter_value():
    config = ExperimentConfig()
    result = run_polar_scan(config, [math.pi / 4], exact=True)[0]
    assert result.s == pytest.approx(2.449489742783178, abs=1e-6)


def test_azimuthal_scan_matches_analytic_curves():
    config = ExperimentConfig()
    gammas = [0.0, math.pi / 6, math.pi, 4.0]
    results = run_azimuthal_scan(config, gammas, exact=True)
    adjusted = [r for r in results if r.method == "azimuthal-adjusted"]
    unadjusted = [r for r in results if r.method == "azimuthal-unadjusted"]
    for r, gamma in zip(adjusted, gammas):
        assert r.s == pytest.approx(TSIRELSON, abs=1e-6)
        delta = (r.alpha2p - gamma + math.pi) % (2 * math.pi) - math.pi
        assert abs(delta) < 1e-6
    for r, gamma in zip(unadjusted, gammas):
        want = math.sqrt(2.0) * abs(1.0 + math.cos(gamma))
        assert r.s == pytest.approx(want, abs=1e-6)
        assert r.alpha2p == 0.0


def test_pipeline_removes_dynamical_offset():
    config = ExperimentConfig(dyn_offset=0.4)
    result = run_azimuthal_scan(config, [math.pi / 6], exact=True)[0]
    assert result.s == pytest.approx(TSIRELSON, abs=1e-6)
    assert result.alpha2p == pytest.approx(math.pi / 6, abs=1e-6)


def test_flip_imperfection_degrades_s():
    values = []
    for theta in (0.0, 0.2, 0.4):
        config = ExperimentConfig(theta=theta)
        values.append(estimate_bell_s(config, 0.0, exact=True).s)
    assert values[0] == pytest.approx(TSIRELSON, abs=1e-9)
    assert values[0] > values[1] > values[2]


# ---------------------------------------------------------------------------
# full pipeline, Monte Carlo
# ---------------------------------------------------------------------------

def test_estimator_unbiased_and_sigma_calibrated():
    target = TSIRELSON
    values, sigmas = [], []
    for seed in range(1000):
        config = ExperimentConfig(seed=seed)
        est = estimate_bell_s(config, 0.0)
        values.append(est.s)
        sigmas.append(est.sigma_s)
    values = np.asarray(values)
    sigmas = np.asarray(sigmas)
    assert abs(values.mean() - target) < 0.01
    assert abs(values.std(ddof=1) / sigmas.mean() - 1.0) < 0.2


def test_polar_scan_monte_carlo():
    config = ExperimentConfig(seed=5)
    result = run_polar_scan(config, [0.0])[0]
    assert abs(result.s - TSIRELSON) <= 4 * result.sigma_s
    assert polar_angle_deviation(result.beta1, result.beta1_p, 0.0) < 0.1


def test_azimuthal_scan_monte_carlo():
    config = ExperimentConfig(seed=21)
    adjusted, unadjusted = run_azimuthal_scan(config, [math.pi / 6])
    assert abs(adjusted.s - TSIRELSON) <= 4 * adjusted.sigma_s
    delta = (adjusted.alpha2p - math.pi / 6 + math.pi) % (2 * math.pi) - math.pi
    assert abs(delta) <= 3 * adjusted.angle_sigma
    want = math.sqrt(2.0) * (1.0 + math.cos(math.pi / 6))
    assert abs(unadjusted.s - want) <= 4 * unadjusted.sigma_s


def test_contrast_threshold():
    # exact counts: S scales as V * 2*sqrt(2), crossing S = 2 at V = 1/sqrt(2)
    for visibility in (0.3, 0.5, 1.0 / math.sqrt(2.0), 0.8, 1.0):
        config = ExperimentConfig(visibility=visibility)
        est = estimate_bell_s(config, 0.0, exact=True)
        assert est.s == pytest.approx(visibility * TSIRELSON, rel=0.02)
    crossing = estimate_bell_s(
        ExperimentConfig(visibility=1.0 / math.sqrt(2.0)), 0.0, exact=True)
    assert crossing.s == pytest.approx(2.0, rel=0.02)
    # Monte Carlo: V = 0.8 violates by >= 3 sigma, V = 0.5 stays below 2
    est = estimate_bell_s(ExperimentConfig(visibility=0.8, seed=11), 0.0)
    assert (est.s - 2.0) / est.sigma_s >= 3.0
    est = estimate_bell_s(ExperimentConfig(visibility=0.5, seed=11), 0.0)
    assert est.s < 2.0


def test_normalized_contrast_restores_fringe_terms():
    config = ExperimentConfig(visibility=0.5)
    raw = estimate_bell_s(config, 0.0, exact=True)
    normalized = estimate_bell_s(config, 0.0, exact=True,
                                 normalize_contrast=True)
    assert raw.s == pytest.approx(0.5 * TSIRELSON, abs=1e-9)
    # the two fringe-based terms recover full weight, the beam-block terms
    # keep the raw contrast: S = sqrt(2) * (1 + V)
    assert normalized.s == pytest.approx(math.sqrt(2.0) * 1.5, abs=1e-9)


# ---------------------------------------------------------------------------
# scan serialization and validation
# ---------------------------------------------------------------------------

def test_scan_results_roundtrip(tmp_path):
    results = [
        ScanResult(gamma=0.0, s=2.8, sigma_s=0.01, beta1=0.785, beta1_p=2.356,
                   method="polar-adjusted"),
        ScanResult(gamma=0.5, s=2.82, sigma_s=0.02, alpha2p=0.5,
                   method="azimuthal-adjusted"),
    ]
    path = tmp_path / "scan.csv"
    write_scan_results(results, path)
    text = path.read_text(encoding="utf-8")
    assert text.splitlines()[0] == \
        "gamma_rad,beta1_rad,beta1p_rad,alpha2p_rad,s,sigma_s,method"
    assert ",," in text  # unused angle columns stay empty
    back = read_scan_results(path)
    assert len(back) == 2
    assert back[0].beta1 == pytest.approx(0.785)
    assert back[0].alpha2p is None
    assert back[1].alpha2p == pytest.approx(0.5)
    assert back[1].beta1 is None
    assert back[1].method == "azimuthal-adjusted"


def test_scan_validation_errors():
    config = ExperimentConfig()
    with pytest.raises(ValueError):
        run_polar_scan(config, [])
    with pytest.raises(ValueError):
        run_azimuthal_scan(config, [])
    with pytest.raises(ValueError):
        run_polar_scan(config, [0.0], delta_grid=np.array([0.0, math.pi]))
    with pytest.raises(ValueError):
        run_polar_scan(config, [0.0],
                       delta_grid=np.linspace(0.0, math.pi / 2, 9))


def test_scan_result_validation():
    with pytest.raises(ValueError):
        ScanResult(gamma=0.0, s=-1.0, sigma_s=0.0)
