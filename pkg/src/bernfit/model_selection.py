"""Basis-order selection by V-fold cross-validation.

Subjects (whole curves, for functional responses) are shuffled into folds by
the seed; each candidate order is scored by the held-out residual sum of
squares of the constrained fit, summed over folds. Functional-response fold
fits skip pre-whitening, which keeps the criterion a plain residual sum of
squares; the final refit at the chosen order is free to whiten.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import BasisSpec, TensorBasisSpec
from .constraints import ShapeSpec
from .dataset import FunctionalDataset
from .errors import ConfigError, DataError
from .utils import spawn_rng

# scores within this relative band of the minimum count as ties, broken downward
_TIE_RTOL = 1e-10


@dataclass
class CvResult:
    candidate_orders: list
    scores: dict
    chosen: int
    folds: int
    fold_assignment: np.ndarray
    seed: int
    skipped: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "candidate_orders": list(self.candidate_orders),
            "scores": {str(k): v for k, v in self.scores.items()},
            "chosen": self.chosen,
            "folds": self.folds,
            "fold_assignment": self.fold_assignment.tolist(),
            "seed": self.seed,
            "skipped": {str(k): v for k, v in self.skipped.items()},
        }


def _default_candidates(model: str) -> list[int]:
    return list(range(2, 7)) if model == "fofr" else list(range(2, 11))


def _holdout_error(train, test, model, order, shape, tensor_domains) -> float:
    from .functional import fit_functional
    from .qfosr import fit_qfosr, predict_qfosr
    from .sofr import fit_sofr, predict_sofr

    if model == "sofr":
        fit = fit_sofr(train, BasisSpec(order, train.domain), shape)
        pred = predict_sofr(fit, test)
        return float(np.sum((test.y_scalar - pred) ** 2))
    if model == "qfosr":
        fit = fit_qfosr(train, BasisSpec(order, train.domain), extra_shapes=shape, whiten_fit=False)
        pred = predict_qfosr(fit, test)
        mask = np.isfinite(test.y_curves)
        return float(np.sum((test.y_curves[mask] - pred[mask]) ** 2))
    if model == "fofr":
        tensor = TensorBasisSpec(order, order, *(tensor_domains or (train.domain, train.domain)))
        fit = fit_functional(train, "fofr", tensor=tensor, shape=shape, whiten_fit=False)
    else:
        fit = fit_functional(train, model, BasisSpec(order, train.domain), shape, whiten_fit=False)
    pts = test.grid.points
    mask = np.isfinite(test.y_curves)
    beta0 = fit.beta0_fn(pts)
    if model == "fofr":
        total = 0.0
        from .basis import fofr_design

        for i in range(test.n_subjects):
            idx = np.flatnonzero(mask[i])
            w = fofr_design(test.x_curves[i], test.grid, fit.basis1, pts[idx])
            pred = beta0[idx] + w @ fit.beta1_coefs
            total += float(np.sum((test.y_curves[i, idx] - pred) ** 2))
        return total
    beta1 = fit.beta1_fn(pts)
    if model == "fosr":
        pred = beta0[None, :] + test.x_scalar[:, None] * beta1[None, :]
    else:
        pred = beta0[None, :] + test.x_curves * beta1[None, :]
    return float(np.sum((test.y_curves[mask] - pred[mask]) ** 2))


def cv_select_order(
    data: FunctionalDataset,
    model: str,
    shape: ShapeSpec | None = None,
    candidates=None,
    folds: int = 5,
    seed: int = 0,
    tensor_domains=None,
) -> CvResult:
    """Pick the basis order minimizing cross-validated held-out error.

    Candidates below the shape's minimum order are skipped with a notice.
    Ties (scores equal up to roundoff) resolve to the smallest order. For
    the qfosr model the monotonicity system is implied and ``shape`` is the
    optional extra-shapes mapping passed through to the fit.
    """
    if folds < 2:
        raise ConfigError("cross-validation needs at least 2 folds")
    candidates = sorted(candidates) if candidates is not None else _default_candidates(model)
    if not candidates:
        raise ConfigError("no candidate orders supplied")
    n = data.n_subjects
    largest_fold = -(-n // folds)
    min_train = max(candidates) + 2
    if n - largest_fold < min_train:
        raise ConfigError(
            f"each fold must leave at least {min_train} training subjects; "
            f"n={n} with {folds} folds does not"
        )
    perm = spawn_rng(seed).permutation(n)
    fold_assignment = np.empty(n, dtype=int)
    fold_assignment[perm] = np.arange(n) % folds

    min_order_needed = 0
    if shape is not None and model != "qfosr":
        min_order_needed = shape.min_order()
    elif model == "qfosr":
        min_order_needed = 1

    scores: dict = {}
    skipped: dict = {}
    for order in candidates:
        if order < min_order_needed:
            skipped[order] = f"order {order} below the shape's minimum ({min_order_needed})"
            continue
        total = 0.0
        try:
            for v in range(folds):
                train = data.subset(np.flatnonzero(fold_assignment != v))
                test = data.subset(np.flatnonzero(fold_assignment == v))
                total += _holdout_error(train, test, model, order, shape, tensor_domains)
        except DataError as exc:
            skipped[order] = str(exc)
            continue
        scores[order] = total
    if not scores:
        reasons = "; ".join(f"order {k}: {v}" for k, v in skipped.items())
        raise ConfigError(f"every candidate order was skipped ({reasons})")
    best_score = min(scores.values())
    tol = _TIE_RTOL * (1.0 + abs(best_score))
    chosen = min(order for order, score in scores.items() if score <= best_score + tol)
    return CvResult(
        candidate_orders=candidates,
        scores=scores,
        chosen=chosen,
        folds=folds,
        fold_assignment=fold_assignment,
        seed=seed,
        skipped=skipped,
    )
