import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moment_eot.geometry import EllipseShape, ExtendedState, ellipse_to_moments
from moment_eot.measurement import NoiseSpec, pseudo_measurement
from moment_eot.metrics import iou
from moment_eot.simulator import EllipseTarget, run_rng, sample_target
from moment_eot.ukf import (
    FilterError,
    GaussianBelief,
    UtParams,
    augmented_belief,
    cholesky_repaired,
    pseudo_measurement_moments,
    sigma_points,
    ukf_update_point,
    ukf_update_scan,
    ukf_update_scan_counted,
    unscented_transform,
)

ut_params = st.builds(
    UtParams,
    alpha=st.floats(0.1, 1.0),
    beta=st.floats(0.0, 3.0),
    kappa=st.floats(0.0, 3.0),
)


def random_belief(dim, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(dim, dim))
    return GaussianBelief(rng.normal(size=dim), A @ A.T + 0.1 * np.eye(dim))


def circle_belief(r=0.89, mv=0.004, pv=0.01):
    x = np.array([0.0, r * r / 4, r * r / 4, 0.0, 0.0, 0.0, 0.0, 0.0])
    return GaussianBelief(x, np.diag([mv, mv, mv, pv, 1e-6, pv, 1e-6, 1e-6]))


def test_alpha_range():
    with pytest.raises(ValueError):
        UtParams(alpha=0.0)
    with pytest.raises(ValueError):
        UtParams(alpha=1.5)
    with pytest.raises(ValueError):
        UtParams(alpha=1.0, kappa=-3.0).weights(3)


def test_default_parameters():
    p = UtParams()
    assert (p.alpha, p.beta, p.kappa) == (1.0, 2.0, 0.0)
    assert p.lam(10) == 0.0


def test_sigma_points_reconstruct_covariance_when_weights_agree():
    b = random_belief(5, 1)
    alpha = 0.8
    params = UtParams(alpha, alpha**2 - 1, 1.0)
    pts, wm, wc = sigma_points(b, params)
    assert np.array_equal(wm, wc)
    d = pts - b.mean
    assert (wc[:, None] * d).T @ d == pytest.approx(b.cov, abs=1e-10)


def test_ut_identity_returns_belief():
    b = random_belief(4, 2)
    res = unscented_transform(b, UtParams(), lambda x: x)
    assert res.mean == pytest.approx(b.mean, abs=1e-10)
    assert res.cov == pytest.approx(b.cov, abs=1e-10)
    assert res.cross == pytest.approx(b.cov, abs=1e-10)


def test_ut_quadratic_matches_gaussian_moments():
    b = GaussianBelief([1.5, -0.5], np.diag([0.3, 2.0]))
    res = unscented_transform(b, UtParams(0.5, 2.0, 1.0), lambda x: x**2)
    assert res.mean == pytest.approx(b.mean**2 + np.diag(b.cov), abs=1e-8)


def test_ut_vectorized_matches_pointwise():
    b = random_belief(3, 4)
    fn = lambda x: np.array([np.sin(x[0]) + x[1], x[2] ** 3])
    vec = lambda X: np.column_stack([np.sin(X[:, 0]) + X[:, 1], X[:, 2] ** 3])
    a = unscented_transform(b, UtParams(), fn)
    c = unscented_transform(b, UtParams(), vec, vectorized=True)
    assert a.mean == pytest.approx(c.mean, rel=1e-14)
    assert a.cov == pytest.approx(c.cov, rel=1e-12)


def test_non_psd_covariance_raises_with_matrix():
    bad = GaussianBelief(np.zeros(2), np.array([[1.0, 0.0], [0.0, -1.0]]))
    with pytest.raises(FilterError) as info:
        sigma_points(bad)
    assert info.value.matrix is not None
    with pytest.raises(FilterError):
        cholesky_repaired(bad.cov, "test")


def test_cholesky_repair_adds_jitter_to_semidefinite():
    cov = np.array([[1.0, 1.0], [1.0, 1.0]])
    repaired, L = cholesky_repaired(cov)
    assert np.allclose(L @ L.T, repaired)
    assert np.abs(repaired - cov).max() < 1e-9


@pytest.mark.parametrize("seed", [0, 1, 2])
@pytest.mark.parametrize("params", [UtParams(), UtParams(0.5, 2.0, 1.0), UtParams(0.9, 0.0, -4.0)])
def test_structured_pseudo_measurement_matches_generic_ut(seed, params):
    rng = np.random.default_rng(seed)
    e = EllipseShape(2.0, 1.0, rng.uniform(-1, 1), (0.5, -0.5))
    x = ExtendedState(ellipse_to_moments(e), e.centroid, (0.2, 0.1), 0.01).to_vector()
    A = rng.normal(size=(8, 8)) * 0.05
    belief = GaussianBelief(x, A @ A.T + 1e-3 * np.eye(8))
    z = rng.normal(size=2)
    noise = NoiseSpec(0.2, 0.3)
    aug = augmented_belief(belief, z, noise)
    generic = unscented_transform(
        aug, params, lambda p: np.atleast_1d(pseudo_measurement(z, p[:8], p[8], p[9]))
    )
    chol = np.linalg.cholesky(belief.cov)
    pm = pseudo_measurement_moments(belief.mean, chol, z, noise, params)
    assert pm.mean == pytest.approx(generic.mean[0], rel=1e-10)
    assert pm.var == pytest.approx(generic.cov[0, 0], rel=1e-9)
    assert pm.cross == pytest.approx(generic.cross[:8, 0], rel=1e-9, abs=1e-12)


def test_empty_scan_returns_belief_unchanged():
    b = circle_belief()
    assert ukf_update_scan(b, np.empty((0, 2)), NoiseSpec(0.01, 0.01)) is b


def test_boundary_point_shrinks_position_variance_along_ray():
    b = circle_belief(r=1.0, mv=0.01, pv=0.1)
    out = ukf_update_point(b, (1.0, 0.0), NoiseSpec(1e-6, 1e-6))
    assert out.cov[3, 3] < b.cov[3, 3]
    out = ukf_update_point(b, (0.0, 1.0), NoiseSpec(1e-6, 1e-6))
    assert out.cov[5, 5] < b.cov[5, 5]


def test_static_ellipse_low_noise_reaches_table_iou():
    target = EllipseTarget(1.5, 1.0)
    truth = target.region((0.0, 0.0), 0.0)
    scores = []
    for run in range(10):
        rng = run_rng(99, run)
        z = sample_target(target, ((0.0, 0.0), 0.0), 400, rng) + 0.1 * rng.standard_normal((400, 2))
        est = ukf_update_scan(circle_belief(), z, NoiseSpec(0.01, 0.01))
        scores.append(iou(truth, ExtendedState.from_vector(est.mean).ellipse()))
    assert np.mean(scores) >= 0.90 - 0.05


def test_update_is_deterministic_and_order_sensitive():
    rng = np.random.default_rng(3)
    z = rng.uniform(-1, 1, size=(30, 2))
    noise = NoiseSpec(0.05, 0.05)
    a = ukf_update_scan(circle_belief(), z, noise)
    b = ukf_update_scan(circle_belief(), z, noise)
    c = ukf_update_scan(circle_belief(), z[::-1], noise)
    assert np.array_equal(a.mean, b.mean) and np.array_equal(a.cov, b.cov)
    assert not np.allclose(a.mean, c.mean, rtol=0, atol=1e-12)


def test_invalid_prior_moments_raise():
    x = circle_belief().mean.copy()
    x[:3] = [1.0, 1.0, 1.0]
    with pytest.raises(FilterError, match="prior"):
        ukf_update_scan(GaussianBelief(x, np.eye(8)), [[0.0, 0.0]], NoiseSpec(1, 1))


def test_improper_moment_updates_are_skipped_or_raised():
    # a tiny, confident circle hit by a far point with huge moment uncertainty
    b = circle_belief(r=0.1, mv=1.0, pv=1e-6)
    z = np.array([[5.0, 0.0]])
    noise = NoiseSpec(1e-4, 1e-4)
    out, skipped = ukf_update_scan_counted(b, z, noise)
    if skipped:
        assert np.array_equal(out.mean, b.mean)
        with pytest.raises(FilterError, match="point 0"):
            ukf_update_scan(b, z, noise, on_invalid="raise")
    with pytest.raises(ValueError):
        ukf_update_scan(b, z, noise, on_invalid="ignore")


@settings(max_examples=100, deadline=None)
@given(ut_params, st.integers(1, 12))
def test_weights_sum_to_one(params, n):
    if n + params.lam(n) == 0:
        return
    wm, wc = params.weights(n)
    assert wm.sum() == pytest.approx(1.0, abs=1e-12)
    assert wc.sum() == pytest.approx(1.0 + 1 - params.alpha**2 + params.beta, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(ut_params, st.integers(0, 1000))
def test_sigma_point_weighted_mean_is_exact(params, seed):
    b = random_belief(4, seed)
    pts, wm, _ = sigma_points(b, params)
    assert wm @ pts == pytest.approx(b.mean, abs=1e-9 * max(1.0, np.abs(pts).max()))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 1000), st.integers(1, 4))
def test_ut_exact_for_affine_maps(seed, out_dim):
    rng = np.random.default_rng(seed)
    b = random_belief(5, seed)
    A = rng.normal(size=(out_dim, 5))
    c = rng.normal(size=out_dim)
    res = unscented_transform(b, UtParams(), lambda x: A @ x + c)
    assert res.mean == pytest.approx(A @ b.mean + c, abs=1e-9)
    assert res.cov == pytest.approx(A @ b.cov @ A.T, abs=1e-9 * max(1.0, np.abs(A @ b.cov @ A.T).max()))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_single_update_does_not_inflate_and_stays_symmetric(seed):
    rng = np.random.default_rng(seed)
    b = circle_belief(r=1.0, mv=0.01, pv=0.05)
    z = rng.uniform(-1.5, 1.5, size=(1, 2))
    out = ukf_update_scan(b, z, NoiseSpec(0.05, 0.05))
    assert np.trace(out.cov) <= np.trace(b.cov) + 1e-9
    assert np.abs(out.cov - out.cov.T).max() <= 1e-12
    many = ukf_update_scan(b, rng.uniform(-1, 1, size=(20, 2)), NoiseSpec(0.05, 0.05))
    assert np.abs(many.cov - many.cov.T).max() <= 1e-12
    assert many.is_valid()
