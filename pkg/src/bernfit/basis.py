"""Bernstein polynomial bases and regression design matrices.

All evaluation happens on [0, 1]; inputs on a general interval [a, b] are
affinely mapped on the way in. Basis values are computed with the de
Casteljau recurrence, which stays stable for orders well beyond what the
closed binomial form tolerates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError


@dataclass(frozen=True)
class BasisSpec:
    """Bernstein basis of a given order over a closed interval."""

    order: int
    domain: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 0:
            raise ConfigError(f"basis order must be a non-negative integer, got {self.order}")
        a, b = self.domain
        if not a < b:
            raise ConfigError(f"domain must satisfy a < b, got [{a}, {b}]")

    @property
    def n_coefs(self) -> int:
        return self.order + 1


@dataclass(frozen=True)
class TensorBasisSpec:
    """Tensor product of two univariate Bernstein bases of equal order.

    The coefficient vector for a surface is stacked k1-major: the column for
    the (k1, k2) product basis sits at index ``k1 * (order + 1) + k2``.
    """

    order_s: int
    order_t: int
    domain_s: tuple[float, float] = (0.0, 1.0)
    domain_t: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if self.order_s != self.order_t:
            raise ConfigError("tensor basis requires equal orders in s and t")
        if self.order_s < 1:
            raise ConfigError("tensor basis orders must be >= 1")
        for a, b in (self.domain_s, self.domain_t):
            if not a < b:
                raise ConfigError(f"domain must satisfy a < b, got [{a}, {b}]")

    @property
    def order(self) -> int:
        return self.order_s

    @property
    def n_coefs(self) -> int:
        return (self.order_s + 1) * (self.order_t + 1)

    @property
    def spec_s(self) -> BasisSpec:
        return BasisSpec(self.order_s, self.domain_s)

    @property
    def spec_t(self) -> BasisSpec:
        return BasisSpec(self.order_t, self.domain_t)


@dataclass(frozen=True)
class Grid:
    """Strictly increasing evaluation points, optionally with per-subject subsets."""

    points: np.ndarray
    per_subject: tuple | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or pts.size == 0:
            raise DataError("grid points must be a non-empty 1-d array")
        if pts.size > 1 and not np.all(np.diff(pts) > 0):
            raise DataError("grid points must be strictly increasing")
        if self.per_subject is not None:
            subsets = tuple(np.asarray(s, dtype=int) for s in self.per_subject)
            for i, s in enumerate(subsets):
                if s.size == 0:
                    raise DataError(f"subject {i}: empty grid subset")
                if s.min() < 0 or s.max() >= pts.size:
                    raise DataError(f"subject {i}: grid subset index out of range")
            object.__setattr__(self, "per_subject", subsets)

    @property
    def n_points(self) -> int:
        return self.points.size


def map_to_unit(t, domain: tuple[float, float]) -> np.ndarray:
    """Affinely map values from ``domain`` onto [0, 1], rejecting outliers."""
    a, b = domain
    u = (np.asarray(t, dtype=float) - a) / (b - a)
    # allow a whisker of roundoff from the affine map itself
    if np.any(u < -1e-12) or np.any(u > 1.0 + 1e-12):
        raise DataError(f"evaluation points outside the basis domain [{a}, {b}]")
    return np.clip(u, 0.0, 1.0)


def _bernstein_matrix(u: np.ndarray, order: int) -> np.ndarray:
    """All order-``order`` Bernstein values at unit-interval points ``u``.

    de Casteljau recurrence: row j holds b_0(u_j),...,b_order(u_j).
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.zeros((u.size, order + 1))
    out[:, 0] = 1.0
    one_minus = 1.0 - u
    for j in range(1, order + 1):
        out[:, 1 : j + 1] = u[:, None] * out[:, :j] + one_minus[:, None] * out[:, 1 : j + 1]
        out[:, 0] *= one_minus
    return out


def eval_basis(t: float, spec: BasisSpec) -> np.ndarray:
    """Vector (b_0(t), ..., b_N(t)) for a single point ``t`` in the domain."""
    u = map_to_unit(t, spec.domain)
    return _bernstein_matrix(np.atleast_1d(u), spec.order)[0]


def eval_basis_matrix(grid, spec: BasisSpec) -> np.ndarray:
    """Matrix with row j equal to ``eval_basis(t_j, spec)``."""
    pts = grid.points if isinstance(grid, Grid) else np.asarray(grid, dtype=float)
    u = map_to_unit(pts, spec.domain)
    return _bernstein_matrix(u, spec.order)


def derivative_coeffs(beta) -> np.ndarray:
    """Coefficients of the derivative in the order-(N-1) basis.

    For B(t) = sum_k beta_k b_k(t, N), the derivative is
    B'(t) = N * sum_k (beta_{k+1} - beta_k) b_k(t, N-1).
    """
    beta = np.asarray(beta, dtype=float)
    if beta.ndim != 1 or beta.size < 2:
        raise ValueError("derivative needs a coefficient vector of length >= 2")
    return (beta.size - 1) * np.diff(beta)


def quadrature_weights(points: np.ndarray) -> np.ndarray:
    """Composite trapezoid weights for the given (increasing) points."""
    points = np.asarray(points, dtype=float)
    if points.size < 2:
        raise DataError("quadrature needs at least 2 points")
    w = np.zeros_like(points)
    gaps = np.diff(points)
    w[:-1] += gaps / 2.0
    w[1:] += gaps / 2.0
    return w


def sofr_design(curves: np.ndarray, grid: Grid, spec: BasisSpec) -> np.ndarray:
    """Row i holds the trapezoid approximations of int X_i(t) b_k(t) dt.

    ``curves`` is (n, m) with NaN marking unobserved points; each subject
    must have at least two observed points. Sparse designs are expected to be
    completed upstream when full-curve integrals are required.
    """
    x = np.asarray(curves, dtype=float)
    if x.ndim != 2:
        raise DataError("curves must be a 2-d array (subjects x grid)")
    pts = grid.points
    if x.shape[1] != pts.size:
        raise DataError("curve columns do not match the grid")
    basis = eval_basis_matrix(grid, spec)
    if np.all(np.isfinite(x)):
        w = quadrature_weights(pts)
        return (x * w) @ basis
    out = np.empty((x.shape[0], spec.n_coefs))
    for i in range(x.shape[0]):
        obs = np.flatnonzero(np.isfinite(x[i]))
        if obs.size < 2:
            raise DataError(f"subject {i}: fewer than 2 observed covariate points")
        w = quadrature_weights(pts[obs])
        out[i] = (x[i, obs] * w) @ basis[obs]
    return out


def flcm_design(x_row: np.ndarray, basis_matrix: np.ndarray) -> np.ndarray:
    """Design rows X_i(t_j) * b(t_j) for the concurrent model.

    A constant ``x_row`` recovers the scalar-predictor special case.
    """
    x_row = np.asarray(x_row, dtype=float)
    basis_matrix = np.asarray(basis_matrix, dtype=float)
    if x_row.ndim != 1 or basis_matrix.ndim != 2 or x_row.size != basis_matrix.shape[0]:
        raise ValueError("x_row length must match the basis matrix rows")
    return x_row[:, None] * basis_matrix


def fofr_design(
    x_curve: np.ndarray,
    s_grid: Grid,
    tensor: TensorBasisSpec,
    t_points: np.ndarray,
) -> np.ndarray:
    """Design matrix for a bivariate coefficient surface, k1-major columns.

    Column (k1, k2) at output row j is
    ``[trapezoid int X_i(s) b_k1(s) ds] * b_k2(t_j)``.
    """
    weights = sofr_design(np.atleast_2d(x_curve), s_grid, tensor.spec_s)[0]
    basis_t = eval_basis_matrix(np.asarray(t_points, dtype=float), tensor.spec_t)
    return np.einsum("k,jl->jkl", weights, basis_t).reshape(basis_t.shape[0], -1)
