"""Linearly constrained least squares and weighted projections onto polyhedra.

The solver is a dual active-set method: the problem is reduced through the
Cholesky factor of the Gram matrix to a least-distance program, which is
solved by nonnegative least squares on its dual. Constraint multipliers fall
out of the dual solution, so KKT certificates come for free. Everything is
deterministic: ties in the dual pivoting resolve to the lowest index.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .constraints import ConstraintSystem
from .errors import InfeasibleError, NumericalError

FEASIBILITY_TOL = 1e-8


@dataclass(frozen=True)
class QpProblem:
    """Least-squares problem in normal-equation form, plus constraints.

    ``gram`` and ``rhs`` are Z'Z and Z'y; ``yty`` is y'y, needed to report
    objective values. ``ridge`` adds a Tikhonov term ridge * ||beta||^2.
    """

    gram: np.ndarray
    rhs: np.ndarray
    yty: float
    n_rows: int
    constraints: ConstraintSystem | None = None
    ridge: float = 0.0

    @classmethod
    def from_design(cls, z, y, constraints=None, ridge: float = 0.0) -> "QpProblem":
        z = np.asarray(z, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if z.ndim != 2 or z.shape[0] != y.size:
            raise ValueError("design and response dimensions do not agree")
        if constraints is not None and constraints.coef_len != z.shape[1]:
            raise ValueError("constraint width does not match the design")
        return cls(z.T @ z, z.T @ y, float(y @ y), z.shape[0], constraints, ridge)


@dataclass
class QpSolution:
    beta: np.ndarray
    active_set: np.ndarray
    multipliers: np.ndarray
    objective: float
    rss: float
    kkt_residual: float
    ridge: float
    iterations: int


def _nnls(e: np.ndarray, f: np.ndarray, max_iter: int) -> tuple[np.ndarray, int]:
    """Lawson-Hanson nonnegative least squares: min ||e x - f||, x >= 0."""
    m, n = e.shape
    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    grad_tol = 10.0 * np.finfo(float).eps * max(m, n) * max(np.abs(e).sum(axis=0).max(), 1.0)
    w = e.T @ f
    iters = 0
    while True:
        candidates = np.where(passive, -np.inf, w)
        j = int(np.argmax(candidates))
        if candidates[j] <= grad_tol:
            return x, iters
        passive[j] = True
        while True:
            iters += 1
            if iters > max_iter:
                raise NumericalError(
                    f"nonnegative least squares failed to converge in {max_iter} iterations",
                    last_iterate=x,
                )
            idx = np.flatnonzero(passive)
            sol, *_ = np.linalg.lstsq(e[:, idx], f, rcond=None)
            if sol.min(initial=np.inf) > 0.0:
                x = np.zeros(n)
                x[idx] = sol
                break
            s_full = np.zeros(n)
            s_full[idx] = sol
            shrink = idx[sol <= 0.0]
            steps = x[shrink] / (x[shrink] - s_full[shrink])
            alpha = float(steps.min())
            x = x + alpha * (s_full - x)
            released = passive & (x <= 1e-14 * max(1.0, np.abs(x).max()))
            x[released] = 0.0
            passive[released] = False
        w = e.T @ (f - e @ x)


def _ldp(g: np.ndarray, h: np.ndarray, max_iter: int) -> tuple[np.ndarray, np.ndarray, int]:
    """Least distance program: min ||u|| subject to g @ u >= h.

    Returns the minimizer, the constraint multipliers, and the iteration
    count. Raises InfeasibleError when the polyhedron is (numerically) empty.
    """
    n_rows, p = g.shape
    e = np.vstack([g.T, h[None, :]])
    f = np.zeros(p + 1)
    f[-1] = 1.0
    x, iters = _nnls(e, f, max_iter)
    r = e @ x - f
    rnorm2 = float(r @ r)
    if rnorm2 <= 1e-20:
        raise InfeasibleError(
            "constraint system is infeasible (or its solution exceeds 1e10 in norm)",
            certificate=np.flatnonzero(x > 0),
        )
    u = -r[:p] / r[-1]
    lam = x / rnorm2
    return u, lam, iters


class ClsqSolver:
    """Factored constrained least-squares solver, reusable across responses.

    The Gram matrix and the constraint geometry are factored once; ``solve``
    then costs one triangular solve plus the dual iteration. This is the
    workhorse for bootstrap loops where only the response changes.
    """

    def __init__(
        self,
        gram: np.ndarray,
        constraints: ConstraintSystem | None = None,
        ridge: float = 0.0,
        tol: float = FEASIBILITY_TOL,
    ):
        gram = np.asarray(gram, dtype=float)
        gram = 0.5 * (gram + gram.T)
        p = gram.shape[0]
        trace = float(np.trace(gram))
        self.tol = float(tol)
        self.ridge = float(ridge)
        if p:
            min_eig = float(np.linalg.eigvalsh(gram).min())
            # auto-regularize near-singular Gram matrices and record the bump
            if min_eig < 1e-10 * max(trace, 1e-300):
                self.ridge = max(self.ridge, 1e-8 * trace if trace > 0 else 1e-8)
        self.gram = gram
        h = gram + self.ridge * np.eye(p)
        try:
            self._chol = np.linalg.cholesky(h)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - ridge policy prevents this
            raise NumericalError(f"Gram matrix is not positive definite: {exc}") from None
        self.constraints = constraints
        if constraints is not None and constraints.n_rows > 0:
            eq = constraints.equality
            a_ext = np.vstack([constraints.a, -constraints.a[eq]])
            b_ext = np.concatenate([constraints.b, -constraints.b[eq]])
            # ext row -> (original row, sign); equality rows appear with both signs
            self._row_map = np.concatenate([np.arange(constraints.n_rows), np.flatnonzero(eq)])
            self._row_sign = np.concatenate(
                [np.ones(constraints.n_rows), -np.ones(int(eq.sum()))]
            )
            self._a_ext = a_ext
            self._b_ext = b_ext
            self._g_ext = solve_triangular(self._chol, a_ext.T, lower=True).T
            self.max_iter = 50 * (p + a_ext.shape[0])
        else:
            self._a_ext = None
            self.max_iter = 50 * max(p, 1)

    def _unconstrained(self, rhs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        w = solve_triangular(self._chol, rhs, lower=True)
        beta = solve_triangular(self._chol.T, w, lower=False)
        return beta, w

    def _objective_parts(self, beta: np.ndarray, rhs: np.ndarray, yty: float) -> tuple[float, float]:
        rss = float(beta @ self.gram @ beta - 2.0 * rhs @ beta + yty)
        rss = max(rss, 0.0)
        return rss + self.ridge * float(beta @ beta), rss

    def _finish(
        self,
        beta: np.ndarray,
        mult: np.ndarray,
        rhs: np.ndarray,
        yty: float,
        iterations: int,
    ) -> QpSolution:
        cons = self.constraints
        objective, rss = self._objective_parts(beta, rhs, yty)
        if cons is not None and cons.n_rows > 0:
            resid = cons.a @ beta - cons.b
            scale = 1.0 + float(np.abs(cons.b).max(initial=0.0))
            active = np.flatnonzero(np.abs(resid) <= self.tol * scale)
            # stationarity in the scaling 2 Z'(Z beta - y) + 2 ridge beta = A' lambda
            stat = 2.0 * (self.gram @ beta - rhs + self.ridge * beta) - cons.a.T @ (2.0 * mult)
            multipliers = 2.0 * mult
        else:
            active = np.empty(0, dtype=int)
            multipliers = np.empty(0)
            stat = 2.0 * (self.gram @ beta - rhs + self.ridge * beta)
        kkt = float(np.abs(stat).max(initial=0.0))
        return QpSolution(
            beta=beta,
            active_set=active,
            multipliers=multipliers,
            objective=objective,
            rss=rss,
            kkt_residual=kkt,
            ridge=self.ridge,
            iterations=iterations,
        )

    def _fold_multipliers(self, lam_ext: np.ndarray) -> np.ndarray:
        mult = np.zeros(self.constraints.n_rows)
        np.add.at(mult, self._row_map, self._row_sign * lam_ext)
        return mult

    def _polish(self, lam_ext: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
        """Re-solve on the dual's active rows for a machine-precision KKT point."""
        act = np.flatnonzero(lam_ext > 0)
        p = self.gram.shape[0]
        a_act = self._a_ext[act]
        size = p + act.size
        kkt = np.zeros((size, size))
        kkt[:p, :p] = self.gram + self.ridge * np.eye(p)
        kkt[:p, p:] = -a_act.T
        kkt[p:, :p] = a_act
        target = np.concatenate([rhs, self._b_ext[act]])
        sol, *_ = np.linalg.lstsq(kkt, target, rcond=None)
        beta, lam_act = sol[:p], sol[p:]
        slack = self._a_ext @ beta - self._b_ext
        scale = 1.0 + float(np.abs(self._b_ext).max(initial=0.0))
        if slack.min(initial=0.0) < -self.tol * scale or lam_act.min(initial=0.0) < -self.tol:
            return None
        lam_full = np.zeros(self._a_ext.shape[0])
        lam_full[act] = np.maximum(lam_act, 0.0)
        return beta, lam_full

    def solve(self, rhs: np.ndarray, yty: float = 0.0) -> QpSolution:
        rhs = np.asarray(rhs, dtype=float).ravel()
        beta_u, w = self._unconstrained(rhs)
        cons = self.constraints
        if cons is None or cons.n_rows == 0:
            return self._finish(beta_u, np.empty(0), rhs, yty, 0)
        slack_u = self._a_ext @ beta_u - self._b_ext
        if slack_u.min(initial=0.0) >= 0.0:
            return self._finish(beta_u, np.zeros(cons.n_rows), rhs, yty, 0)
        h = self._b_ext - self._g_ext @ w
        u, lam_ext, iters = _ldp(self._g_ext, h, self.max_iter)
        beta = solve_triangular(self._chol.T, u + w, lower=False)
        mult = self._fold_multipliers(lam_ext)
        sol = self._finish(beta, mult, rhs, yty, iters)
        tol_kkt = self.tol * (1.0 + float(np.abs(rhs).max(initial=0.0)))
        if sol.kkt_residual > tol_kkt:
            polished = self._polish(lam_ext, rhs)
            if polished is not None:
                beta_p, lam_p = polished
                candidate = self._finish(beta_p, self._fold_multipliers(lam_p), rhs, yty, iters)
                if candidate.kkt_residual < sol.kkt_residual:
                    sol = candidate
            if sol.kkt_residual > tol_kkt * 100.0:
                raise NumericalError(
                    f"constrained solve left a KKT residual of {sol.kkt_residual:.3e}",
                    last_iterate=sol.beta,
                )
        return sol


def solve_clsq(problem: QpProblem, tol: float = FEASIBILITY_TOL) -> QpSolution:
    """Solve one constrained least-squares problem.

    The solution satisfies A beta >= b - tol componentwise (equality rows to
    the same tolerance), has nonnegative multipliers on active inequalities,
    and certifies stationarity through its KKT residual.
    """
    solver = ClsqSolver(problem.gram, problem.constraints, problem.ridge, tol=tol)
    return solver.solve(problem.rhs, problem.yty)


def omega_factor(omega: np.ndarray) -> np.ndarray:
    """Matrix S with S'S = omega, validating symmetric positive definiteness.

    Small negative eigenvalues (roundoff) are clipped to 1e-12 * trace with a
    warning; anything below -1e-10 * trace is an error.
    """
    omega = np.asarray(omega, dtype=float)
    omega = 0.5 * (omega + omega.T)
    try:
        return np.linalg.cholesky(omega).T
    except np.linalg.LinAlgError:
        pass
    evals, evecs = np.linalg.eigh(omega)
    scale = max(float(np.trace(omega)), 1e-300)
    if evals.min() < -1e-10 * scale:
        raise NumericalError(
            f"weight matrix is not positive semidefinite (min eigenvalue {evals.min():.3e})"
        )
    warnings.warn("weight matrix has near-zero eigenvalues; clipping to keep it SPD")
    clipped = np.maximum(evals, 1e-12 * scale)
    return (evecs * np.sqrt(clipped)) @ evecs.T


def project_omega(
    z: np.ndarray,
    omega: np.ndarray,
    constraints: ConstraintSystem | None,
    tol: float = FEASIBILITY_TOL,
) -> np.ndarray:
    """Projection argmin_{A beta >= b} ||beta - z||^2 in the omega norm.

    Already-feasible points are returned unchanged, which also makes the
    projection idempotent.
    """
    z = np.asarray(z, dtype=float).ravel()
    if constraints is None or constraints.n_rows == 0:
        return z.copy()
    if constraints.worst_violation(z) <= 0.0:
        return z.copy()
    factor = omega_factor(omega)
    problem = QpProblem.from_design(factor, factor @ z, constraints)
    return solve_clsq(problem, tol=tol).beta
