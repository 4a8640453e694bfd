"""Projection-based confidence intervals and residual-bootstrap shape tests.

The interval construction samples from the large-sample normal law of the
unconstrained estimator, projects every draw onto the constraint polyhedron
in the Gram-weighted norm, and reads off pointwise quantiles of the
projected coefficient functions. The estimator covariance is the
heteroskedasticity-robust sandwich for scalar responses and the model-based
generalized-least-squares covariance after pre-whitening for functional
responses (whitened errors have unit covariance by construction).

The tests compare constrained (null) and unconstrained residual sums of
squares through T = (RSS_c - RSS_u) / RSS_u, with the null distribution
rebuilt by resampling residuals: individual residuals for scalar responses,
whole residual curves for functional responses (no pre-whitening on that
path, so the resampled curves carry the original within-curve covariance).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .basis import BasisSpec, TensorBasisSpec, eval_basis_matrix
from .clsq import ClsqSolver
from .constraints import ShapeSpec, build_constraints
from .dataset import FunctionalDataset
from .errors import ConfigError, DataError
from .functional import build_design, estimate_covariance
from .sofr import sofr_design_matrix
from .utils import spawn_rng


@dataclass
class CiBand:
    grid: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float
    draws: int
    seed: int

    def to_json(self) -> dict:
        return {
            "grid": self.grid.tolist(),
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "level": self.level,
            "draws": self.draws,
            "seed": self.seed,
        }


@dataclass
class TestReport:
    statistic: float
    p_value: float
    rss_constrained: float
    rss_unconstrained: float
    bootstrap_stats: np.ndarray
    seed: int

    def to_json(self) -> dict:
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "rss_constrained": self.rss_constrained,
            "rss_unconstrained": self.rss_unconstrained,
            "bootstrap_stats": self.bootstrap_stats.tolist(),
            "seed": self.seed,
        }


def _normal_factor(cov: np.ndarray) -> np.ndarray:
    """Square root of a covariance that may be PSD only up to roundoff."""
    cov = 0.5 * (cov + cov.T)
    evals, evecs = np.linalg.eigh(cov)
    floor = -1e-10 * max(float(np.abs(evals).max()), 1e-300)
    if evals.min() < floor:
        warnings.warn("draw covariance has negative eigenvalues; clipping to zero")
    return evecs * np.sqrt(np.maximum(evals, 0.0))


def _scalar_ingredients(data: FunctionalDataset, spec: BasisSpec):
    design, block = sofr_design_matrix(data, spec)
    y = data.y_scalar
    n = design.shape[0]
    solver = ClsqSolver(design.T @ design, None)
    beta_ur = solver.solve(design.T @ y).beta
    resid = y - design @ beta_ur
    omega = design.T @ design / n
    meat = design.T @ (design * resid[:, None] ** 2) / n
    omega_inv = np.linalg.inv(omega)
    delta_n = omega_inv @ meat @ omega_inv / n
    return design, block, beta_ur, omega, delta_n


def _functional_ingredients(data, model, spec, tensor, pve, whiten_fit):
    design = build_design(data, model, spec=spec, tensor=tensor)
    n = len(design.blocks)
    m = data.grid.n_points
    blocks, responses = design.blocks, design.responses
    if whiten_fit:
        gram, rhs, _, _ = design.gram_parts()
        step1 = ClsqSolver(gram, None).solve(rhs).beta
        resid = np.full((n, m), np.nan)
        for i, (z, y, idx) in enumerate(zip(blocks, responses, design.obs_indices)):
            resid[i, idx] = y - z @ step1
        cov = estimate_covariance(resid, data.grid, pve)
        wdesign = design.whitened(cov, full_mask=data.is_dense("y"))
        blocks, responses = wdesign.blocks, wdesign.responses
    gram = np.zeros((design.n_coefs, design.n_coefs))
    rhs = np.zeros(design.n_coefs)
    for z, y in zip(blocks, responses):
        gram += z.T @ z
        rhs += z.T @ y
    solver = ClsqSolver(gram, None)
    beta_ur = solver.solve(rhs).beta
    omega = gram / n
    if whiten_fit:
        # whitened errors have unit covariance by construction, so the
        # model-based GLS covariance applies directly
        delta_n = np.linalg.inv(gram)
    else:
        # raw path: errors stay correlated, fall back to the curve-level sandwich
        meat = np.zeros_like(gram)
        for z, y in zip(blocks, responses):
            ze = z.T @ (y - z @ beta_ur)
            meat += np.outer(ze, ze)
        omega_inv = np.linalg.inv(omega)
        delta_n = omega_inv @ (meat / n) @ omega_inv / n
    return design, beta_ur, omega, delta_n


def projection_ci(
    data: FunctionalDataset,
    model: str,
    spec: BasisSpec | None = None,
    shape: ShapeSpec | None = None,
    level: float = 0.95,
    draws: int = 500,
    seed: int = 0,
    tensor: TensorBasisSpec | None = None,
    eval_grid=None,
    pve: float = 0.95,
    whiten_fit: bool = True,
) -> CiBand:
    """Pointwise confidence band for the (possibly constrained) coefficient.

    With ``shape=None`` the projection is the identity and the band is the
    plain percentile band of the normal draws.
    """
    if not 0.0 < level < 1.0:
        raise ConfigError("level must be in (0, 1)")
    if draws < 100:
        raise ConfigError("use at least 100 draws")
    if model == "fofr" or isinstance(spec, TensorBasisSpec):
        raise ConfigError("confidence bands for bivariate coefficients are not supported")
    if model == "sofr":
        design, block, beta_ur, omega, delta_n = _scalar_ingredients(data, spec)
        total = design.shape[1]
        offset = block.start
        coef_spec = spec
    elif model in ("fosr", "flcm"):
        sdesign, beta_ur, omega, delta_n = _functional_ingredients(
            data, model, spec, tensor, pve, whiten_fit
        )
        total = sdesign.n_coefs
        offset = sdesign.slice1.start
        coef_spec = spec
    else:
        raise ConfigError(f"unknown model {model!r}")

    constraints = None
    if shape is not None:
        constraints = build_constraints(shape, coef_spec).padded(offset, total)
    projector = ClsqSolver(omega, constraints)
    factor = _normal_factor(delta_n)

    grid = np.asarray(eval_grid, dtype=float) if eval_grid is not None else data.grid.points
    basis = eval_basis_matrix(grid, coef_spec)
    curves = np.empty((draws, grid.size))
    p = beta_ur.size
    block_slice = slice(offset, offset + coef_spec.n_coefs)
    for b in range(draws):
        z_b = beta_ur + factor @ spawn_rng(seed, b).standard_normal(p)
        if constraints is not None and constraints.worst_violation(z_b) > 0.0:
            projected = projector.solve(omega @ z_b).beta
        else:
            projected = z_b
        curves[b] = basis @ projected[block_slice]
    alpha = 1.0 - level
    lower = np.quantile(curves, alpha / 2.0, axis=0)
    upper = np.quantile(curves, 1.0 - alpha / 2.0, axis=0)
    return CiBand(grid=grid, lower=lower, upper=upper, level=level, draws=draws, seed=seed)


def qfosr_projection_ci(
    data: FunctionalDataset,
    spec: BasisSpec,
    block: int,
    level: float = 0.95,
    draws: int = 500,
    seed: int = 0,
    extra_shapes: dict | None = None,
    eval_grid=None,
    pve: float = 0.95,
    whiten_fit: bool = True,
) -> CiBand:
    """Pointwise band for one quantile-regression coefficient function.

    ``block`` picks the curve: 0 is the intercept, j >= 1 the j-th predictor
    effect (on the rescaled [0, 1] predictor). Draws around the unconstrained
    estimator are projected onto the monotonicity polyhedron (plus any extra
    per-block shapes) before the quantiles are read off.
    """
    from .qfosr import build_qfosr_design, qfosr_constraints

    if not 0.0 < level < 1.0:
        raise ConfigError("level must be in (0, 1)")
    if draws < 100:
        raise ConfigError("use at least 100 draws")
    design, _ = build_qfosr_design(data, spec)
    n = len(design.blocks)
    j_count = data.z_scalars.shape[1]
    if not 0 <= block <= j_count:
        raise ConfigError(f"block must be in 0..{j_count}")
    blocks, responses = design.blocks, design.responses
    if whiten_fit:
        gram, rhs, _, _ = design.gram_parts()
        step1 = ClsqSolver(gram, None).solve(rhs).beta
        resid = np.full((n, data.grid.n_points), np.nan)
        for i, (z, y, idx) in enumerate(zip(blocks, responses, design.obs_indices)):
            resid[i, idx] = y - z @ step1
        cov = estimate_covariance(resid, data.grid, pve)
        wdesign = design.whitened(cov, full_mask=data.is_dense("y"))
        blocks, responses = wdesign.blocks, wdesign.responses
    gram = np.zeros((design.n_coefs, design.n_coefs))
    rhs = np.zeros(design.n_coefs)
    for z, y in zip(blocks, responses):
        gram += z.T @ z
        rhs += z.T @ y
    beta_ur = ClsqSolver(gram, None).solve(rhs).beta
    omega = gram / n
    delta_n = np.linalg.inv(gram) if whiten_fit else None
    if delta_n is None:
        meat = np.zeros_like(gram)
        for z, y in zip(blocks, responses):
            ze = z.T @ (y - z @ beta_ur)
            meat += np.outer(ze, ze)
        omega_inv = np.linalg.inv(omega)
        delta_n = omega_inv @ (meat / n) @ omega_inv / n
    constraints = qfosr_constraints(spec, j_count, extra_shapes)
    projector = ClsqSolver(omega, constraints)
    factor = _normal_factor(delta_n)
    grid = np.asarray(eval_grid, dtype=float) if eval_grid is not None else data.grid.points
    basis = eval_basis_matrix(grid, spec)
    p_block = spec.n_coefs
    block_slice = slice(block * p_block, (block + 1) * p_block)
    curves = np.empty((draws, grid.size))
    for b in range(draws):
        z_b = beta_ur + factor @ spawn_rng(seed, b).standard_normal(beta_ur.size)
        if constraints.worst_violation(z_b) > 0.0:
            z_b = projector.solve(omega @ z_b).beta
        curves[b] = basis @ z_b[block_slice]
    alpha = 1.0 - level
    return CiBand(
        grid=grid,
        lower=np.quantile(curves, alpha / 2.0, axis=0),
        upper=np.quantile(curves, 1.0 - alpha / 2.0, axis=0),
        level=level,
        draws=draws,
        seed=seed,
    )


def _statistic(rss_c: float, rss_u: float) -> float:
    if rss_u <= 0.0:
        if rss_c > 0.0:
            warnings.warn("unconstrained fit is exact; test statistic set to infinity")
            return float("inf")
        return 0.0
    return max(0.0, (rss_c - rss_u) / rss_u)


def bootstrap_shape_test_scalar(
    data: FunctionalDataset,
    spec: BasisSpec,
    shape_null: ShapeSpec,
    draws: int = 200,
    seed: int = 0,
) -> TestReport:
    """Residual bootstrap test of a shape null for scalar responses.

    Residuals come from the unconstrained fit; bootstrap responses are
    rebuilt around the constrained (null) fitted values, and the statistic
    is recomputed on each resample.
    """
    if draws < 100:
        raise ConfigError("use at least 100 bootstrap draws")
    design, block = sofr_design_matrix(data, spec)
    y = data.y_scalar
    gram = design.T @ design
    constraints = build_constraints(shape_null, spec).padded(block.start, design.shape[1])
    solver_u = ClsqSolver(gram, None)
    solver_c = ClsqSolver(gram, constraints)

    sol_u = solver_u.solve(design.T @ y, float(y @ y))
    sol_c = solver_c.solve(design.T @ y, float(y @ y))
    residuals = y - design @ sol_u.beta
    fitted_null = design @ sol_c.beta
    t_obs = _statistic(sol_c.rss, sol_u.rss)

    n = y.size
    stats_boot = np.empty(draws)
    for b in range(draws):
        rng = spawn_rng(seed, b)
        y_star = fitted_null + residuals[rng.integers(0, n, size=n)]
        rhs = design.T @ y_star
        yty = float(y_star @ y_star)
        rss_u = solver_u.solve(rhs, yty).rss
        rss_c = solver_c.solve(rhs, yty).rss
        stats_boot[b] = _statistic(rss_c, rss_u)
    p_value = float(np.count_nonzero(stats_boot >= t_obs)) / draws
    return TestReport(
        statistic=t_obs,
        p_value=p_value,
        rss_constrained=sol_c.rss,
        rss_unconstrained=sol_u.rss,
        bootstrap_stats=stats_boot,
        seed=seed,
    )


def bootstrap_shape_test_functional(
    data: FunctionalDataset,
    model: str,
    spec: BasisSpec | None,
    shape_null: ShapeSpec,
    draws: int = 200,
    seed: int = 0,
    tensor: TensorBasisSpec | None = None,
) -> TestReport:
    """Residual bootstrap test for functional responses.

    Whole residual curves are resampled with replacement so the bootstrap
    errors keep the within-curve covariance; both fits are raw stacked least
    squares without pre-whitening for the same reason. Requires densely
    observed responses.
    """
    if draws < 100:
        raise ConfigError("use at least 100 bootstrap draws")
    if not data.is_dense("y"):
        raise DataError("the functional shape test needs densely observed responses")
    design = build_design(data, model, spec=spec, tensor=tensor)
    coef_spec = tensor if model == "fofr" else spec
    constraints = build_constraints(shape_null, coef_spec).padded(
        design.slice1.start, design.n_coefs
    )
    gram, rhs, yty, _ = design.gram_parts()
    solver_u = ClsqSolver(gram, None)
    solver_c = ClsqSolver(gram, constraints)
    sol_u = solver_u.solve(rhs, yty)
    sol_c = solver_c.solve(rhs, yty)
    t_obs = _statistic(sol_c.rss, sol_u.rss)

    n = len(design.blocks)
    z_blocks = design.blocks
    resid_curves = [y - z @ sol_u.beta for z, y in zip(z_blocks, design.responses)]
    fitted_null = [z @ sol_c.beta for z in z_blocks]
    zt_list = [z.T for z in z_blocks]

    stats_boot = np.empty(draws)
    for b in range(draws):
        rng = spawn_rng(seed, b)
        pick = rng.integers(0, n, size=n)
        rhs_star = np.zeros(design.n_coefs)
        yty_star = 0.0
        for i in range(n):
            y_star = fitted_null[i] + resid_curves[pick[i]]
            rhs_star += zt_list[i] @ y_star
            yty_star += float(y_star @ y_star)
        rss_u = solver_u.solve(rhs_star, yty_star).rss
        rss_c = solver_c.solve(rhs_star, yty_star).rss
        stats_boot[b] = _statistic(rss_c, rss_u)
    p_value = float(np.count_nonzero(stats_boot >= t_obs)) / draws
    return TestReport(
        statistic=t_obs,
        p_value=p_value,
        rss_constrained=sol_c.rss,
        rss_unconstrained=sol_u.rss,
        bootstrap_stats=stats_boot,
        seed=seed,
    )


def bootstrap_shape_test(
    data: FunctionalDataset,
    model: str,
    spec: BasisSpec | None,
    shape_null: ShapeSpec,
    draws: int = 200,
    seed: int = 0,
    tensor: TensorBasisSpec | None = None,
) -> TestReport:
    """Dispatch to the scalar or functional bootstrap by model kind."""
    if model == "sofr":
        return bootstrap_shape_test_scalar(data, spec, shape_null, draws=draws, seed=seed)
    if model in ("fosr", "flcm", "fofr"):
        return bootstrap_shape_test_functional(
            data, model, spec, shape_null, draws=draws, seed=seed, tensor=tensor
        )
    raise ConfigError(f"unknown model {model!r}")
