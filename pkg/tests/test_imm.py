import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moment_eot import imm as imm_module
from moment_eot.config import load_config, builtin_path
from moment_eot.dynamics import CtNoiseParams, CvNoiseParams
from moment_eot.measurement import NoiseSpec
from moment_eot.simulator import generate_scans, generate_truth, run_rng
from moment_eot.ukf import FilterError, GaussianBelief, PseudoMoments, UtParams
from moment_eot.imm import (
    MODE_FLOOR,
    ImmTracker,
    ModeSet,
    MotionModel,
    UkfTracker,
    combine,
    imm_mix,
    imm_step,
    model_likelihood,
    update_modes,
)

CV = MotionModel("CV", CvNoiseParams(0.01, [0.01] * 3))
CT = MotionModel("CT", CtNoiseParams([0.01] * 5 + [1e-6]))
NOISE = NoiseSpec(0.25, 0.25)


def belief(seed=0, r=2.0):
    rng = np.random.default_rng(seed)
    x = np.array([0.0, r * r / 4, r * r / 4, 1.0, 0.5, -1.0, 0.2, 0.01])
    x[3:7] += rng.normal(size=4) * 0.1
    A = rng.normal(size=(8, 8)) * 0.01
    return GaussianBelief(x, A @ A.T + np.diag([0.01] * 3 + [0.1, 0.01, 0.1, 0.01, 1e-4]))


def scan_of(b, n, seed):
    rng = np.random.default_rng(seed)
    r = np.sqrt(b.mean[1] * 4)
    phi = rng.uniform(0, 2 * np.pi, n)
    rad = r * np.sqrt(rng.uniform(size=n))
    return np.column_stack([b.mean[3] + rad * np.cos(phi), b.mean[5] + rad * np.sin(phi)])


def test_mode_set_validation():
    with pytest.raises(ValueError):
        ModeSet([0.6, 0.6], np.eye(2))
    with pytest.raises(ValueError):
        ModeSet([0.5, 0.5], [[0.9, 0.2], [0.1, 0.9]])
    with pytest.raises(ValueError):
        ModeSet([0.5, 0.5], np.eye(3))
    with pytest.raises(ValueError):
        MotionModel("CA", CvNoiseParams(0.0))
    with pytest.raises(TypeError):
        MotionModel("CT", CvNoiseParams(0.0))


def test_identity_transition_keeps_beliefs():
    b1, b2 = belief(1), belief(2)
    mixed, c = imm_mix([b1, b2], ModeSet([0.3, 0.7], np.eye(2)))
    assert np.array_equal(c, [0.3, 0.7])
    for out, ref in zip(mixed, (b1, b2)):
        assert out.mean == pytest.approx(ref.mean, abs=1e-15)
        assert out.cov == pytest.approx(ref.cov, abs=1e-15)


def test_identical_beliefs_unaffected_by_mixing():
    b = belief(3)
    mixed, _ = imm_mix([b, b], ModeSet([0.2, 0.8], [[0.6, 0.4], [0.3, 0.7]]))
    for out in mixed:
        assert out.mean == pytest.approx(b.mean, rel=1e-14)
        assert out.cov == pytest.approx(b.cov, rel=1e-13)


def test_mixing_one_dimensional_by_hand():
    b1 = GaussianBelief([1.0], [[2.0]])
    b2 = GaussianBelief([3.0], [[0.5]])
    modes = ModeSet([0.5, 0.5], [[0.9, 0.1], [0.25, 0.75]])
    mixed, c = imm_mix([b1, b2], modes)
    # c = (0.45 + 0.125, 0.05 + 0.375)
    assert c == pytest.approx([0.575, 0.425], abs=1e-15)
    w1 = np.array([0.45, 0.125]) / 0.575
    w2 = np.array([0.05, 0.375]) / 0.425
    for out, w in zip(mixed, (w1, w2)):
        m = w[0] * 1.0 + w[1] * 3.0
        v = w[0] * (2.0 + (1.0 - m) ** 2) + w[1] * (0.5 + (3.0 - m) ** 2)
        assert out.mean[0] == pytest.approx(m, rel=1e-14)
        assert out.cov[0, 0] == pytest.approx(v, rel=1e-14)
    # first model: m = 1 + 2 * 0.125 / 0.575
    assert mixed[0].mean[0] == pytest.approx(1.4347826086956523, rel=1e-14)


def test_mode_starvation_raises():
    modes = ModeSet([1.0, 0.0], [[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(FilterError, match="starvation"):
        imm_mix([belief(0), belief(1)], modes)


def test_unit_peak_likelihood(monkeypatch):
    monkeypatch.setattr(
        imm_module, "pseudo_measurement_moments", lambda *a, **k: PseudoMoments(0.0, 1 / (2 * np.pi), np.zeros(8))
    )
    rep = model_likelihood(belief(0), [[0.0, 0.0]], NOISE)
    assert rep.log_lik == pytest.approx(0.0, abs=1e-15)
    assert rep.avg_lik == pytest.approx(1.0, abs=1e-15)
    assert rep.n == 1


def test_non_positive_variance_raises(monkeypatch):
    monkeypatch.setattr(imm_module, "pseudo_measurement_moments", lambda *a, **k: PseudoMoments(0.0, 0.0, np.zeros(8)))
    with pytest.raises(FilterError, match="variance"):
        model_likelihood(belief(0), [[0.0, 0.0]], NOISE)


def test_likelihood_uses_the_prediction_not_the_update():
    b = belief(4)
    pts = scan_of(b, 5, 4)
    first = model_likelihood(b, pts[:1], NOISE)
    both = model_likelihood(b, pts[:2], NOISE)
    second = model_likelihood(b, pts[1:2], NOISE)
    assert both.log_lik == pytest.approx(first.log_lik + second.log_lik, rel=1e-13)


def test_empty_scan_likelihood_is_neutral():
    rep = model_likelihood(belief(0), np.empty((0, 2)), NOISE)
    assert (rep.log_lik, rep.avg_lik, rep.n) == (0.0, 1.0, 0)


def test_mode_floor():
    mu = update_modes(np.array([0.5, 0.5]), [1.0, 1e-300])
    assert mu.sum() == pytest.approx(1.0, abs=1e-12)
    assert mu[1] == pytest.approx(MODE_FLOOR, rel=1e-5)
    with pytest.raises(FilterError):
        update_modes(np.array([0.5, 0.5]), [0.0, 0.0])


def test_combine_moment_matching():
    out = combine([GaussianBelief([0.0], [[1.0]]), GaussianBelief([2.0], [[1.0]])], [0.5, 0.5])
    assert out.mean[0] == pytest.approx(1.0)
    assert out.cov[0, 0] == pytest.approx(2.0)


def test_single_mode_imm_matches_plain_ukf_bit_for_bit():
    prior = belief(5)
    ukf = UkfTracker(prior, CT, NOISE)
    imm = ImmTracker(prior, [CT], ModeSet([1.0], [[1.0]]), NOISE)
    truth = prior
    for k in range(6):
        pts = scan_of(truth, 15, 100 + k)
        a = ukf.step(pts, 1.0)
        b = imm.step(pts, 1.0)
        assert np.array_equal(a.mean, b.mean)
        assert np.array_equal(a.cov, b.cov)
        assert np.array_equal(imm.mode_probs, [1.0])


def test_tracker_requires_one_model_per_mode():
    with pytest.raises(ValueError):
        ImmTracker(belief(0), [CV], ModeSet([0.5, 0.5], np.eye(2)), NOISE)


def test_first_step_updates_without_prediction():
    prior = belief(6)
    pts = scan_of(prior, 10, 6)
    res = imm_step([prior, prior], ModeSet([0.5, 0.5], [[0.9, 0.1], [0.1, 0.9]]), [CV, CT], pts, NOISE, None)
    # without prediction both models see the same prior, so the modes stay put
    assert res.modes.mu == pytest.approx([0.5, 0.5], abs=1e-15)
    assert np.array_equal(res.beliefs[0].mean, res.beliefs[1].mean)


def test_ct_likelihood_beats_cv_in_steady_turn():
    config = load_config(builtin_path("slow-maneuver"))
    shape = config.shape.build()
    truth = generate_truth(
        config.truth.initial_state(), config.truth.build_segments(), config.scan.period,
        orientation=config.truth.orientation, duration=config.truth.duration,
    )
    cv, ct = config.filter.models()
    ut = config.filter.ut_params
    cov = np.diag([25.0, 25.0, 25.0, 1.0, 0.01, 1.0, 0.01, 1e-8])
    gain = []
    for run in range(5):
        scans = generate_scans(truth, shape, config.scan.build(), run_rng(config.seed, run))
        for k, epoch in enumerate(truth[:-1]):
            # steady part of the second turn, 0.9 deg/s for 570-670 s
            if not 580 <= epoch.time < 660:
                continue
            b = GaussianBelief(epoch.state(shape).to_vector(), cov)
            pts = scans[k + 1].points
            l_cv = model_likelihood(cv.predict(b, 10.0, ut), pts, config.scan.noise, ut).avg_lik
            l_ct = model_likelihood(ct.predict(b, 10.0, ut), pts, config.scan.noise, ut).avg_lik
            gain.append(np.log(l_ct) - np.log(l_cv))
    assert np.mean(gain) > 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 20))
def test_average_likelihood_invariant_to_duplication(seed, n):
    b = belief(seed % 7)
    pts = scan_of(b, n, seed)
    once = model_likelihood(b, pts, NOISE)
    twice = model_likelihood(b, np.concatenate([pts, pts]), NOISE)
    assert twice.avg_lik == pytest.approx(once.avg_lik, rel=1e-9)
    assert np.isfinite(once.avg_lik) and once.avg_lik > 0


@settings(max_examples=30, deadline=None)
@given(
    st.floats(0.01, 0.99),
    st.floats(0.5, 0.999),
    st.floats(0.5, 0.999),
    st.integers(0, 1000),
)
def test_mixing_keeps_mass_and_positive_definiteness(mu0, p00, p11, seed):
    modes = ModeSet([mu0, 1 - mu0], [[p00, 1 - p00], [1 - p11, p11]])
    mixed, c = imm_mix([belief(seed), belief(seed + 1)], modes)
    assert c.sum() == pytest.approx(1.0, abs=1e-12)
    for b in mixed:
        assert np.linalg.eigvalsh(b.cov).min() > 0
        assert np.abs(b.cov - b.cov.T).max() == 0


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_mode_probabilities_stay_normalized(seed):
    prior = belief(seed % 5)
    tracker = ImmTracker(prior, [CV, CT], ModeSet([0.5, 0.5], [[0.95, 0.05], [0.05, 0.95]]), NOISE, UtParams())
    rng = np.random.default_rng(seed)
    for k in range(5):
        tracker.step(scan_of(tracker.estimate, int(rng.integers(1, 20)), seed + k), 1.0)
        mu = tracker.mode_probs
        assert abs(mu.sum() - 1.0) <= 1e-12
        assert np.all((mu >= 0) & (mu <= 1))
