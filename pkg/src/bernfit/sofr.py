"""Shape-constrained scalar-on-function regression.

The functional predictor is integrated against the basis to produce one
design row per subject; the intercept and any scalar confounders stay
unconstrained while the basis-coefficient block carries the shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BasisSpec, eval_basis_matrix, map_to_unit, sofr_design
from .clsq import QpProblem, solve_clsq
from .constraints import ShapeSpec, build_constraints
from .dataset import FunctionalDataset
from .errors import DataError


@dataclass
class SofrFit:
    alpha: float
    gamma: np.ndarray
    beta_coefs: np.ndarray
    basis: BasisSpec
    shape: ShapeSpec | None
    rss: float
    residuals: np.ndarray
    ridge_used: float

    def beta_fn(self, t) -> np.ndarray:
        """Evaluate the fitted coefficient function at points ``t``."""
        mat = eval_basis_matrix(np.atleast_1d(np.asarray(t, dtype=float)), self.basis)
        return mat @ self.beta_coefs


def sofr_design_matrix(data: FunctionalDataset, spec: BasisSpec):
    """Full design [1 | Z | W] plus the slice of the constrained block."""
    if data.x_curves is None:
        raise DataError("scalar-on-function regression needs functional covariates")
    if data.y_scalar is None:
        raise DataError("scalar-on-function regression needs a scalar response")
    w = sofr_design(data.x_curves, data.grid, spec)
    cols = [np.ones((data.n_subjects, 1))]
    if data.z_scalars is not None:
        cols.append(data.z_scalars)
    cols.append(w)
    design = np.hstack(cols)
    offset = design.shape[1] - spec.n_coefs
    return design, slice(offset, design.shape[1])


def fit_sofr(
    data: FunctionalDataset,
    spec: BasisSpec,
    shape: ShapeSpec | None = None,
    ridge: float = 0.0,
) -> SofrFit:
    """Fit the model Y = alpha + Z gamma + int X(t) beta(t) dt + eps.

    ``shape=None`` gives the unconstrained fit used as the comparison
    baseline; otherwise the basis-coefficient block is constrained to the
    requested shape (the intercept and confounders never are).
    """
    design, block = sofr_design_matrix(data, spec)
    n, p = design.shape
    if n < spec.order + 2 + data.n_z:
        raise DataError(
            f"need at least {spec.order + 2 + data.n_z} subjects for order {spec.order}, got {n}"
        )
    system = None
    if shape is not None:
        system = build_constraints(shape, spec).padded(block.start, p)
    sol = solve_clsq(QpProblem.from_design(design, data.y_scalar, system, ridge))
    fitted = design @ sol.beta
    residuals = data.y_scalar - fitted
    gamma = sol.beta[1 : block.start]
    return SofrFit(
        alpha=float(sol.beta[0]),
        gamma=gamma,
        beta_coefs=sol.beta[block],
        basis=spec,
        shape=shape,
        rss=float(residuals @ residuals),
        residuals=residuals,
        ridge_used=sol.ridge,
    )


def predict_sofr(fit: SofrFit, data: FunctionalDataset) -> np.ndarray:
    """Predictions alpha + Z gamma + W beta with W built as in training."""
    map_to_unit(data.grid.points, fit.basis.domain)  # validates the domain
    w = sofr_design(data.x_curves, data.grid, fit.basis)
    out = fit.alpha + w @ fit.beta_coefs
    if fit.gamma.size:
        if data.z_scalars is None or data.z_scalars.shape[1] != fit.gamma.size:
            raise DataError("prediction data is missing the scalar covariates used in training")
        out = out + data.z_scalars @ fit.gamma
    return out
