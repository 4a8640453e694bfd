"""Tests for quantile function-on-scalar regression."""

import numpy as np
import pytest

from bernfit import NON_INCREASING, BasisSpec, DataError, Grid, fit_qfosr, predict_qfosr
from bernfit.dataset import FunctionalDataset


def quantile_dataset(n=80, m=50, seed=0, slope=-0.2, noise=0.0, n_z=1):
    """Q_i(p) = p + x_i * slope * p (+ optional extra predictors), monotone in p."""
    rng = np.random.default_rng(seed)
    pts = np.linspace(0, 1, m)
    z = rng.uniform(0, 1, size=(n, n_z))
    q = pts[None, :] + z[:, [0]] * slope * pts[None, :]
    if n_z > 1:
        q = q + 0.3 * z[:, [1]] * pts[None, :] ** 2
    q = q + noise * np.abs(rng.standard_normal((n, m))).cumsum(axis=1) / m
    return FunctionalDataset(
        grid=Grid(pts),
        ids=list(range(n)),
        y_curves=q,
        z_scalars=z,
        z_names=[f"v{j}" for j in range(n_z)],
    )


class TestFitQfosr:
    def test_predictions_monotone_everywhere(self):
        data = quantile_dataset(noise=0.02, seed=1)
        fit = fit_qfosr(data, BasisSpec(4))
        p = np.linspace(0, 1, 200)
        rng = np.random.default_rng(2)
        for _ in range(20):
            z = rng.uniform(0, 1, size=1)
            pred = fit.predict_quantiles(z, p)
            assert np.all(np.diff(pred) >= -1e-10)

    def test_decreasing_predictor_effect_allowed(self):
        # the slope coefficient is negative yet predictions stay monotone
        data = quantile_dataset(slope=-0.2, noise=0.0, seed=3)
        fit = fit_qfosr(data, BasisSpec(3))
        p = np.linspace(0, 1, 100)
        effect = fit.coefficient_fn(1, p)
        assert effect.mean() < 0
        lo, hi = fit.rescale[0]
        for z in ([lo], [hi], [0.5 * (lo + hi)]):
            pred = fit.predict_quantiles(z, np.linspace(0, 1, 500))
            assert np.all(np.diff(pred) >= -1e-10)

    def test_identical_responses_reproduce_common_curve(self):
        m = 40
        pts = np.linspace(0, 1, m)
        common = 0.5 * pts + pts**2  # monotone and inside the order-5 span
        n = 30
        z = np.random.default_rng(4).uniform(0, 1, size=(n, 1))
        data = FunctionalDataset(
            grid=Grid(pts), ids=list(range(n)), y_curves=np.tile(common, (n, 1)), z_scalars=z
        )
        fit = fit_qfosr(data, BasisSpec(5), whiten_fit=False)
        assert np.abs(fit.coef_blocks[1]).max() <= 1e-6
        recovered = fit.coefficient_fn(0, pts)
        assert np.abs(recovered - common).max() <= 1e-6

    def test_decreasing_responses_rejected(self):
        data = quantile_dataset(noise=0.0)
        data.y_curves[3] = data.y_curves[3][::-1].copy()
        with pytest.raises(DataError, match="decreasing"):
            fit_qfosr(data, BasisSpec(3))

    def test_constant_predictor_rejected(self):
        data = quantile_dataset()
        data.z_scalars[:, 0] = 0.7
        with pytest.raises(DataError, match="constant"):
            fit_qfosr(data, BasisSpec(3))

    def test_rescale_records_round_trip(self):
        rng = np.random.default_rng(5)
        data = quantile_dataset(seed=6)
        data.z_scalars = data.z_scalars * 40 + 20  # ages, say
        fit = fit_qfosr(data, BasisSpec(3))
        lo, hi = fit.rescale[0]
        assert lo == pytest.approx(data.z_scalars.min())
        assert hi == pytest.approx(data.z_scalars.max())
        x = fit.rescaled([lo])
        assert x[0] == 0.0

    def test_extra_shape_on_predictor_block(self):
        data = quantile_dataset(n=100, slope=-0.3, noise=0.01, seed=7)
        fit = fit_qfosr(data, BasisSpec(4), extra_shapes={1: NON_INCREASING})
        assert np.all(np.diff(fit.coef_blocks[1]) <= 1e-8)

    def test_two_predictors_vertex_condition(self):
        from bernfit.basis import derivative_coeffs, eval_basis_matrix

        data = quantile_dataset(n=120, n_z=2, noise=0.01, seed=8)
        fit = fit_qfosr(data, BasisSpec(4))
        p = np.linspace(0, 1, 200)
        deriv_basis = eval_basis_matrix(p, BasisSpec(3))
        rng = np.random.default_rng(9)
        vertex_grid = [(a, b) for a in (0.0, 1.0) for b in (0.0, 1.0)]
        interior = [tuple(rng.uniform(0, 1, 2)) for _ in range(100)]
        for x in vertex_grid + interior:
            pred_curve = fit.coef_blocks[0] + np.asarray(x) @ fit.coef_blocks[1:]
            slope = deriv_basis @ derivative_coeffs(pred_curve)
            assert slope.min() >= -1e-10


class TestQfosrBands:
    def test_band_brackets_effect_and_is_reproducible(self):
        from bernfit import qfosr_projection_ci

        data = quantile_dataset(n=100, slope=-0.25, noise=0.01, seed=12)
        band = qfosr_projection_ci(data, BasisSpec(3), block=1, draws=150, seed=5)
        again = qfosr_projection_ci(data, BasisSpec(3), block=1, draws=150, seed=5)
        assert band.lower.tobytes() == again.lower.tobytes()
        assert np.all(band.lower <= band.upper)
        # the estimated decreasing effect should be inside its own band mostly
        fit = fit_qfosr(data, BasisSpec(3))
        effect = fit.coefficient_fn(1, band.grid)
        inside = (band.lower <= effect) & (effect <= band.upper)
        assert inside.mean() >= 0.8

    def test_block_out_of_range(self):
        from bernfit import ConfigError, qfosr_projection_ci

        data = quantile_dataset(seed=13)
        with pytest.raises(ConfigError):
            qfosr_projection_ci(data, BasisSpec(3), block=5, draws=100)


class TestPredictQfosr:
    def test_training_predictions_monotone(self):
        data = quantile_dataset(noise=0.02, seed=10)
        fit = fit_qfosr(data, BasisSpec(4))
        preds = predict_qfosr(fit, data)
        assert np.all(np.diff(preds, axis=1) >= -1e-9)

    def test_missing_predictors_rejected(self):
        data = quantile_dataset(seed=11)
        fit = fit_qfosr(data, BasisSpec(3))
        bare = FunctionalDataset(grid=data.grid, ids=data.ids, y_curves=data.y_curves)
        with pytest.raises(DataError):
            predict_qfosr(fit, bare)
