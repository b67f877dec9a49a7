"""Post-processing of frequency estimates: consistency repair and recovery.

Five methods operate on an estimate vector:

* norm_sub: shift by delta and clip at zero so the result sums to 1
  (the additive consistency repair; equals Euclidean simplex projection).
* base_cut: zero out everything below a significance threshold, no
  sum-to-one constraint.
* normalization: subtract the minimum and rescale to sum 1.
* ldprecover: split the domain at a high-count boundary, strip the excess
  mass attributed to suspect items, then project onto the simplex.
* rsn: repair only the low-count region additively, then normalize
  multiplicatively so high-count ratios are preserved.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .oracles import EstimateVector
from .params import ProtocolParams

__all__ = [
    "RecoveryMethod",
    "RecoveryResult",
    "norm_sub",
    "base_cut",
    "normalization",
    "ldprecover",
    "rsn",
    "consistency_check",
    "apply_method",
]

_TOL = 1e-9


class RecoveryMethod(str, enum.Enum):
    NORM_SUB = "norm-sub"
    BASE_CUT = "base-cut"
    NORMALIZATION = "normalization"
    LDPRECOVER = "ldprecover"
    RSN = "rsn"

    @classmethod
    def parse(cls, name: str) -> "RecoveryMethod":
        for m in cls:
            if m.value == name.lower().replace("_", "-"):
                return m
        raise ValueError(f"unknown recovery method {name!r}")


@dataclass(frozen=True)
class RecoveryResult:
    freqs: np.ndarray
    method: RecoveryMethod
    delta: float = 0.0
    region_low: np.ndarray | None = None
    flags: tuple[str, ...] = ()


def _shift_clip_delta(x: np.ndarray, total: float) -> float:
    """Delta with sum(max(x + delta, 0)) == total, by breakpoint scan.

    The objective is piecewise linear and nondecreasing in delta with
    breakpoints at -x_(i); on the segment keeping the j largest entries
    positive the solution is (total - sum of those entries) / j.
    """
    if total < 0:
        raise ValueError("target total must be nonnegative")
    if total == 0:
        return float(-np.max(x))
    srt = np.sort(x)[::-1]
    csum = np.cumsum(srt)
    js = np.arange(1, len(x) + 1)
    deltas = (total - csum) / js
    # valid when every kept entry stays positive and the next would not
    keep_ok = srt + deltas > 0
    nxt = np.concatenate((srt[1:], [-np.inf]))
    next_clipped = nxt + deltas <= 0
    valid = np.flatnonzero(keep_ok & next_clipped)
    if len(valid) == 0:
        raise ValueError("no feasible shift found (degenerate input)")
    return float(deltas[valid[0]])


def norm_sub(freqs: np.ndarray) -> RecoveryResult:
    """Additive consistency repair: f' = max(f + delta, 0), sum f' = 1."""
    x = np.asarray(freqs, dtype=np.float64)
    if x.size == 0 or not np.isfinite(x).all():
        raise ValueError("input must be non-empty and finite")
    delta = _shift_clip_delta(x, 1.0)
    out = np.maximum(x + delta, 0.0)
    return RecoveryResult(freqs=out, method=RecoveryMethod.NORM_SUB, delta=delta)


def base_cut(freqs: np.ndarray, params: ProtocolParams, alpha: float = 0.05) -> RecoveryResult:
    """Keep estimates above the significance threshold, zero the rest.

    The threshold is the (1 - alpha/d) normal quantile of a zero-frequency
    estimate: T = ndtri(1 - alpha/d) * sigma0 / n.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    x = np.asarray(freqs, dtype=np.float64)
    threshold = ndtri(1.0 - alpha / params.d) * params.sigma0() / params.n
    out = np.where(x > threshold, x, 0.0)
    return RecoveryResult(freqs=out, method=RecoveryMethod.BASE_CUT, delta=threshold)


def normalization(freqs: np.ndarray) -> RecoveryResult:
    """Min-shift and rescale: f' = (f - min f) / sum(f - min f)."""
    x = np.asarray(freqs, dtype=np.float64)
    shifted = x - x.min()
    total = shifted.sum()
    if total <= 0:
        raise ValueError("constant input has no normalization")
    return RecoveryResult(freqs=shifted / total, method=RecoveryMethod.NORMALIZATION,
                          delta=float(-x.min()))


def _project_simplex(x: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    delta = _shift_clip_delta(x, 1.0)
    return np.maximum(x + delta, 0.0)


def ldprecover(freqs: np.ndarray, params: ProtocolParams) -> RecoveryResult:
    """Recovery via suspect-set excess removal plus consistency projection.

    Items above the zero-frequency bound xi(0.95)/n form the suspect set;
    the estimate's excess mass over 1 is removed from them uniformly, and
    the result is projected onto the simplex. Falls back to the plain
    additive repair when the suspect set is empty but excess mass remains.
    """
    from .asd import xi_threshold  # noqa: PLC0415

    x = np.asarray(freqs, dtype=np.float64)
    if x.size == 0 or not np.isfinite(x).all():
        raise ValueError("input must be non-empty and finite")
    bound = xi_threshold(0.95, params) / params.n
    suspects = x > bound
    excess = x.sum() - 1.0
    flags: tuple[str, ...] = ()
    adjusted = x.copy()
    if excess > 0:
        k = int(suspects.sum())
        if k > 0:
            adjusted[suspects] -= excess / k
        else:
            flags = ("no_suspects_fallback",)
    out = _project_simplex(adjusted)
    return RecoveryResult(freqs=out, method=RecoveryMethod.LDPRECOVER,
                          region_low=~suspects, flags=flags)


def rsn(counts: EstimateVector, params: ProtocolParams) -> RecoveryResult:
    """Segment repair: clip-shift the low region, normalize multiplicatively.

    The low region L holds counts below tau = 4 sigma0 (items whose
    estimate could have crossed zero under the perturbation noise). delta
    solves sum_L max(C + delta, 0) + sum_H max(C, 0) = sum C; the final
    frequencies divide the adjusted counts by their total, preserving the
    ratios of the untouched high-count entries.
    """
    c = np.asarray(counts.counts, dtype=np.float64)
    total = c.sum()
    if total <= 0:
        raise ValueError("total count must be positive")
    sigma0 = params.sigma0()
    tau = 4.0 * sigma0
    low = c < tau
    flags: tuple[str, ...] = ()
    high_sum = np.maximum(c[~low], 0.0).sum()
    target_low = total - high_sum
    adjusted = c.copy()
    adjusted[~low] = np.maximum(adjusted[~low], 0.0)
    delta = 0.0
    if low.any():
        if target_low <= 0:
            adjusted[low] = 0.0
            delta = float(-np.max(c[low])) if low.any() else 0.0
            flags = ("delta_clamped",)
        else:
            delta = _shift_clip_delta(c[low], target_low)
            adjusted[low] = np.maximum(c[low] + delta, 0.0)
    new_total = adjusted.sum()
    if new_total <= 0:
        raise ValueError("adjusted counts sum to zero; cannot normalize")
    out = adjusted / new_total
    return RecoveryResult(freqs=out, method=RecoveryMethod.RSN, delta=delta,
                          region_low=low, flags=flags)


def consistency_check(freqs: np.ndarray) -> bool:
    """True when all entries exceed -1e-9 and the sum is within 1e-9 of 1."""
    x = np.asarray(freqs, dtype=np.float64)
    return bool(x.min(initial=np.inf) >= -_TOL and abs(x.sum() - 1.0) <= _TOL)


def apply_method(
    method: RecoveryMethod,
    estimate: EstimateVector,
    params: ProtocolParams,
    alpha: float = 0.05,
) -> RecoveryResult:
    """Run one recovery method on an estimate vector."""
    if method == RecoveryMethod.NORM_SUB:
        return norm_sub(estimate.freqs)
    if method == RecoveryMethod.BASE_CUT:
        return base_cut(estimate.freqs, params, alpha)
    if method == RecoveryMethod.NORMALIZATION:
        return normalization(estimate.freqs)
    if method == RecoveryMethod.LDPRECOVER:
        return ldprecover(estimate.freqs, params)
    if method == RecoveryMethod.RSN:
        return rsn(estimate, params)
    raise ValueError(f"unknown method {method}")
