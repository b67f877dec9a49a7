"""Attack-presence detection from aggregated counts.

The de-biased counts of zero-frequency items concentrate around zero with
std sigma_0 = sqrt(n q (1-q)) / (p - q). For a confidence level gamma the
threshold xi(gamma) = z((1+gamma)/2) * sigma_0 bounds those counts from
above. Splitting the domain at xi into a low set B and a high set A, the
sum of counts in A stays below n on clean data, so sum_A > n flags an
attack. gamma is the smallest grid value whose approximate error
|B| * xi * (1 - gamma) stays under lambda * n.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from .oracles import EstimateVector, TrueDistribution
from .params import ProtocolParams

__all__ = ["AsdConfig", "AsdResult", "xi_threshold", "choose_gamma", "asd_detect",
           "true_error_reference"]

_DEFAULT_GRID = (0.80, 0.85, 0.90, 0.95, 0.975, 0.99, 0.995, 0.999, 0.9995, 0.9999)


@dataclass(frozen=True)
class AsdConfig:
    """lambda_ is the error-budget fraction; the gamma grid must increase."""

    lambda_: float = 0.02
    gamma_grid: tuple[float, ...] = _DEFAULT_GRID

    def __post_init__(self):
        if not 0.0 < self.lambda_ < 1.0:
            raise ValueError("lambda must lie in (0, 1)")
        grid = np.asarray(self.gamma_grid)
        if (np.diff(grid) <= 0).any() or grid[0] <= 0 or grid[-1] >= 1:
            raise ValueError("gamma grid must be strictly increasing within (0, 1)")


@dataclass(frozen=True)
class AsdResult:
    attack_detected: bool
    xi: float
    gamma: float
    sum_A: float
    set_B_size: int
    constraint_saturated: bool = False


def xi_threshold(gamma: float, params: ProtocolParams) -> float:
    """Upper bound on zero-frequency counts at confidence gamma."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    z = ndtri((1.0 + gamma) / 2.0)
    return float(z * params.sigma0())


def choose_gamma(
    counts: EstimateVector, params: ProtocolParams, cfg: AsdConfig | None = None
) -> tuple[float, float, np.ndarray, bool]:
    """Smallest grid gamma with Err = |B| xi (1-gamma) below lambda * n.

    Returns (gamma, xi, B_mask, saturated); when no grid point satisfies
    the budget, the gamma minimizing Err is returned with saturated=True.
    """
    cfg = cfg or AsdConfig()
    c = np.asarray(counts.counts, dtype=np.float64)
    n = counts.n
    best = None  # (err, gamma, xi, mask)
    for gamma in cfg.gamma_grid:
        xi = xi_threshold(gamma, params)
        mask = c <= xi
        err = mask.sum() * xi * (1.0 - gamma)
        if err < cfg.lambda_ * n:
            return gamma, xi, mask, False
        if best is None or err < best[0]:
            best = (err, gamma, xi, mask)
    _, gamma, xi, mask = best
    return gamma, xi, mask, True


def asd_detect(
    counts: EstimateVector, params: ProtocolParams, cfg: AsdConfig | None = None
) -> AsdResult:
    """Flag an attack when the high-count set alone sums above n."""
    cfg = cfg or AsdConfig()
    gamma, xi, b_mask, saturated = choose_gamma(counts, params, cfg)
    c = np.asarray(counts.counts, dtype=np.float64)
    sum_a = float(c[~b_mask].sum())
    return AsdResult(
        attack_detected=bool(sum_a > counts.n),
        xi=xi,
        gamma=gamma,
        sum_A=sum_a,
        set_B_size=int(b_mask.sum()),
        constraint_saturated=saturated,
    )


def true_error_reference(
    truth: TrueDistribution, params: ProtocolParams, gamma: float
) -> float:
    """Ground-truth error of the split at xi(gamma) (test oracle only).

    Evaluates, per item, the normal-model expectation
    n f_i Phi((xi - n f_i)/sigma_i) - sigma_i phi((xi - n f_i)/sigma_i)
    and sums over the domain. Requires the true distribution, which the
    detector never sees; tests use it to check that the |B| xi (1-gamma)
    approximation dominates the zero-frequency contribution.
    """
    xi = xi_threshold(gamma, params)
    f = truth.freqs
    n = truth.n
    sigma = np.sqrt(np.asarray([params.count_variance(fi) for fi in f]))
    z = (xi - n * f) / sigma
    pdf = np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)
    return float(np.sum(n * f * ndtr(z) - sigma * pdf))


def zero_item_reference_term(
    truth: TrueDistribution, params: ProtocolParams, gamma: float
) -> float:
    """Magnitude of the zero-frequency items' share of the reference error."""
    xi = xi_threshold(gamma, params)
    sigma0 = params.sigma0()
    z = xi / sigma0
    pdf = np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)
    n_zero = int((np.asarray(truth.counts) == 0).sum())
    return float(n_zero * sigma0 * pdf)
