"""Training objective: L1 plus a pairwise monotonicity penalty.

The monotonicity term sums max((pred_i - pred_j) * sgn(gt_j - gt_i), 0)
over all ordered pairs: it is zero exactly when predictions are weakly
order-consistent with the labels, and adding a constant to every
prediction leaves it unchanged.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, add, as_tensor, mul, relu, reshape, sub, tabs, tmean, tsum


def mono_loss(preds: Tensor | np.ndarray, gts: np.ndarray) -> Tensor:
    preds = as_tensor(preds)
    gts = np.asarray(gts, dtype=np.float64)
    if preds.data.ndim != 1 or gts.ndim != 1:
        raise ValueError("mono_loss expects 1-D predictions and labels")
    n = preds.data.shape[0]
    if gts.shape[0] != n:
        raise ValueError(f"length mismatch: {n} predictions vs {gts.shape[0]} labels")
    if n < 1:
        raise ValueError("need at least one sample")
    # sign[i, j] = sgn(gt_j - gt_i); diagonal is zero.
    sign = np.sign(gts.reshape(1, -1) - gts.reshape(-1, 1))
    diff = sub(reshape(preds, (n, 1)), reshape(preds, (1, n)))
    return tsum(relu(mul(diff, Tensor(sign))))


def l1_loss(preds: Tensor | np.ndarray, gts: np.ndarray) -> Tensor:
    preds = as_tensor(preds)
    gts = np.asarray(gts, dtype=np.float64)
    if preds.data.shape != gts.shape:
        raise ValueError(f"shape mismatch: {preds.data.shape} vs {gts.shape}")
    return tmean(tabs(sub(preds, Tensor(gts))))


def overall_loss(
    preds: Tensor | np.ndarray, gts: np.ndarray, mono_weight: float = 0.3
) -> Tensor:
    """Mean absolute error plus mono_weight times the monotonicity sum."""
    if mono_weight < 0:
        raise ValueError("mono_weight must be >= 0")
    base = l1_loss(preds, gts)
    if mono_weight == 0:
        return base
    return add(base, mul(mono_loss(preds, gts), mono_weight))
