"""Evaluation metrics: F1, MSE, item gain ratio, detection accuracy.

The item gain ratio (IGR) normalizes the post-recovery frequency gain of
the target items by the gain a baseline (input-domain) attack achieves
with the same number of fakes; 1/r means the attack was suppressed down
to baseline level, values well above 1/r mean it still dominates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["f1", "mse", "IgrInputs", "igr", "wilson_interval", "detection_accuracy"]


def f1(predicted: set | np.ndarray, truth: set | np.ndarray) -> float | None:
    """Harmonic mean of precision and recall over user-id sets.

    Returns None (not applicable) when both sets are empty; raises when
    only the truth is empty, as the score is undefined there.
    """
    pred = set(int(x) for x in predicted)
    true = set(int(x) for x in truth)
    if not true:
        if not pred:
            return None
        raise ValueError("F1 is undefined for an empty truth set")
    tp = len(pred & true)
    if tp == 0:
        return 0.0
    precision = tp / len(pred)
    recall = tp / len(true)
    return 2.0 * precision * recall / (precision + recall)


def mse(estimates: np.ndarray, truth: np.ndarray) -> float:
    """Mean squared error between two frequency vectors."""
    a = np.asarray(estimates, dtype=np.float64)
    b = np.asarray(truth, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


@dataclass(frozen=True)
class IgrInputs:
    """Per-target expected frequencies: pre-attack, post-recovery, and under
    the baseline attack. All indexed by the same target list."""

    f_before: np.ndarray
    f_recovery: np.ndarray
    f_base: np.ndarray
    r: int

    def __post_init__(self):
        shapes = {np.shape(self.f_before), np.shape(self.f_recovery), np.shape(self.f_base)}
        if len(shapes) != 1:
            raise ValueError("target vectors must share a shape")
        if self.r < 1:
            raise ValueError("r must be >= 1")


def igr(inputs: IgrInputs) -> float:
    """sum_T(f_recovery - f_before) / (sum_T(f_base - f_before) * r)."""
    num = float(np.sum(np.asarray(inputs.f_recovery) - np.asarray(inputs.f_before)))
    base_gain = float(np.sum(np.asarray(inputs.f_base) - np.asarray(inputs.f_before)))
    if base_gain <= 0:
        raise ValueError(
            f"baseline gain must be positive to normalize (got {base_gain:.3g})"
        )
    return num / (base_gain * inputs.r)


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """95% Wilson score interval for k successes out of n."""
    if n <= 0:
        raise ValueError("n must be positive")
    phat = k / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return max(center - half, 0.0), min(center + half, 1.0)


def detection_accuracy(outcomes: list[tuple[bool, bool]]) -> tuple[float, float, float]:
    """Fraction of (detected, attacked) pairs that agree, with Wilson CI."""
    if not outcomes:
        raise ValueError("no outcomes")
    correct = sum(1 for detected, attacked in outcomes if detected == attacked)
    n = len(outcomes)
    lo, hi = wilson_interval(correct, n)
    return correct / n, lo, hi
