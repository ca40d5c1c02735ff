"""Composite layout loss: per-element squared error, an out-of-canvas hinge
penalty, and binary cross-entropy over constraint-membership probabilities.

The formulas are unit-agnostic; training uses normalized canvas units, and
reports can carry pixel-unit values alongside. The squared-error term is the
mean over elements of the squared 4-vector difference (not the mean over all
16 numbers), so a single badly placed element is not diluted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import tensor as T
from .model import ValidationError


@dataclass(frozen=True)
class LossWeights:
    lam: float = 1.0   # weight of the constraint term
    eta: float = 1.0   # weight of the boundary penalty

    def __post_init__(self) -> None:
        if self.lam <= 0 or self.eta <= 0:
            raise ValidationError("loss weights must be positive")


@dataclass
class LossReport:
    total: float
    element_mse: float
    boundary: float
    constraint_bce: float
    total_tensor: Optional[T.Tensor] = None
    # Pixel-unit mirrors when the loss itself ran on normalized units.
    element_mse_px: Optional[float] = None
    boundary_px: Optional[float] = None

    def csv_row(self, step: int) -> str:
        return (f"{step},{self.total:.17g},{self.element_mse:.17g},"
                f"{self.boundary:.17g},{self.constraint_bce:.17g}")


def element_loss(pred: T.Tensor, truth: T.Tensor, canvas: tuple[float, float],
                 eta: float = 1.0) -> tuple[T.Tensor, T.Tensor]:
    """(squared-error term, boundary term) for (N, 4) boxes as (x, y, w, h) rows.

    The boundary term charges eta per unit a box protrudes past any of the
    four canvas edges; boxes fully inside cost exactly zero.
    """
    if pred.shape != truth.shape or pred.shape[1] != 4:
        raise ValidationError(f"element_loss needs matching (N, 4) inputs, got {pred.shape} vs {truth.shape}")
    n = pred.shape[0]
    cw, ch = canvas
    if cw <= 0 or ch <= 0:
        raise ValidationError("canvas dimensions must be positive")
    diff = T.sub(pred, truth)
    mse_term = T.scale(T.sum_all(T.mul(diff, diff)), 1.0 / n)
    x = T.cols(pred, 0, 1)
    y = T.cols(pred, 1, 2)
    w = T.cols(pred, 2, 3)
    h = T.cols(pred, 3, 4)
    wall_r = T.constant(np.full((n, 1), float(cw)))
    wall_b = T.constant(np.full((n, 1), float(ch)))
    overflow = T.add(
        T.add(T.sum_all(T.relu(T.neg(x))), T.sum_all(T.relu(T.neg(y)))),
        T.add(T.sum_all(T.relu(T.sub(T.add(x, w), wall_r))),
              T.sum_all(T.relu(T.sub(T.add(y, h), wall_b)))),
    )
    return mse_term, T.scale(overflow, eta)


def constraint_loss(pred_probs: T.Tensor, truth_flags: T.Tensor) -> T.Tensor:
    """Mean BCE over constraint slots; probabilities clamped at 1e-7."""
    if pred_probs.shape != truth_flags.shape:
        raise ValidationError(
            f"constraint_loss length mismatch: {pred_probs.shape} vs {truth_flags.shape}")
    return T.bce(pred_probs, truth_flags)


def total_loss(pred: T.Tensor, truth: T.Tensor,
               pred_probs: Optional[T.Tensor], truth_flags: Optional[T.Tensor],
               canvas: tuple[float, float], weights: LossWeights = LossWeights(),
               ) -> LossReport:
    """Full objective: mse + boundary + lambda * bce, differentiable end to end.

    An empty constraint slate contributes an exact zero BCE term.
    """
    mse_term, boundary_term = element_loss(pred, truth, canvas, weights.eta)
    if pred_probs is not None and pred_probs.data.size > 0:
        bce_term = constraint_loss(pred_probs, truth_flags)
    else:
        bce_term = T.constant([[0.0]])
    total = T.add(T.add(mse_term, boundary_term), T.scale(bce_term, weights.lam))
    m, b, c = mse_term.item(), boundary_term.item(), bce_term.item()
    return LossReport(
        total=(m + b) + weights.lam * c,
        element_mse=m,
        boundary=b,
        constraint_bce=c,
        total_tensor=total,
    )
