"""Fake-user identification from support-size statistics.

Genuine reports have support-set sizes well modeled by Binomial(d, pt)
with pt = (p + (d-1)q)/d for OUE, 1/g for OLH and 1/2 for HST. Crafted
reports distort the observed size histogram O against its expectation
Y[k] = n * P(X=k). The detector scores bins by E_sq(k) = (O[k]-Y[k])^2,
iteratively discards the best-fitting bin, and within the remaining
candidate users searches supporter groups of the most commonly supported
items, keeping the group whose removal minimizes the chi-square statistic
E_freq of the retained population.

The refinement accretes supporter groups greedily while the fit keeps
improving, which is what lets it pull out attackers that each support
only a subset of the target items.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binom

from .params import Protocol, ProtocolParams
from .reports import ReportSet

__all__ = [
    "SupportModel",
    "DetectionResult",
    "expected_histogram",
    "e_sq",
    "e_freq",
    "diffstats_detect",
    "theorem_oracles",
]

# Cells with expectation below this fraction of n get pooled into their
# nearest healthy neighbor before any chi-square sum.
_POOL_EPS = 1e-12


def _p_tilde(params: ProtocolParams) -> float:
    fam = params.protocol.family
    if fam == "OUE":
        return (params.p + (params.d - 1) * params.q) / params.d
    if fam == "OLH":
        return 1.0 / params.g
    if fam == "HST":
        return 0.5
    raise ValueError("support-size model is undefined for GRR")


@dataclass(frozen=True)
class SupportModel:
    """Binomial support-size model for genuine reports of one protocol."""

    d: int
    p_tilde: float
    pmf: np.ndarray  # P(X=k) for k in [0, d]

    @classmethod
    def for_params(cls, params: ProtocolParams) -> "SupportModel":
        pt = _p_tilde(params)
        d = params.d
        # log-space pmf so deep tails stay finite for d > 1000
        pmf = np.exp(binom.logpmf(np.arange(d + 1), d, pt))
        return cls(d=d, p_tilde=pt, pmf=pmf)

    @property
    def genuine_mode(self) -> int:
        """Expected support size of a genuine report, floor(d * pt)."""
        return int(math.floor(self.d * self.p_tilde))


def expected_histogram(params: ProtocolParams, n: int | None = None) -> np.ndarray:
    """Y[k] = n * P(X = k) for k in [0, d]."""
    if params.protocol == Protocol.GRR:
        raise ValueError("expected support histogram is undefined for GRR")
    model = SupportModel.for_params(params)
    return (n if n is not None else params.n) * model.pmf


def exact_support_pmf(params: ProtocolParams) -> np.ndarray:
    """Exact support-size law of a genuine report.

    The held item is supported with probability p while the other d-1
    items are supported independently with probability q* (q for OUE, 1/g
    for OLH), so the size is Bernoulli(p) + Binomial(d-1, q*). For HST the
    size is the +1 count of a uniform public vector, Binomial(d, 1/2).

    The binomial SupportModel approximates this law; the detector scores
    candidates against the exact one because the approximation error grows
    with the retained population and otherwise rewards mass removals.
    """
    fam = params.protocol.family
    d = params.d
    if fam == "HST":
        return np.exp(binom.logpmf(np.arange(d + 1), d, 0.5))
    if fam == "OUE":
        qs = params.q
    elif fam == "OLH":
        qs = 1.0 / params.g
    else:
        raise ValueError("support-size law is undefined for GRR")
    base = np.exp(binom.logpmf(np.arange(d + 1), d - 1, qs))  # index k = size among others
    pmf = (1.0 - params.p) * base
    pmf[1:] += params.p * base[:-1]
    return pmf


def e_sq(O: np.ndarray, Y: np.ndarray, k: int) -> float:
    """Squared error of one support-size cell."""
    return float((O[k] - Y[k]) ** 2)


def _pool_starts(Y: np.ndarray, n: float) -> np.ndarray:
    """Group boundaries that merge near-empty cells into healthy neighbors.

    Y is unimodal, so the healthy cells form one contiguous block; the left
    tail pools into the first healthy cell and the right tail into the last.
    """
    good = np.flatnonzero(Y >= _POOL_EPS * n)
    if len(good) == 0:
        return np.asarray([0])
    starts = good.copy()
    starts[0] = 0  # left tail joins the first healthy cell
    return starts


def e_freq(O: np.ndarray, Y: np.ndarray) -> float:
    """Chi-square statistic sum_k (O[k]-Y[k])^2 / Y[k] with tail pooling."""
    O = np.asarray(O, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    starts = _pool_starts(Y, Y.sum())
    Op = np.add.reduceat(O, starts)
    Yp = np.add.reduceat(Y, starts)
    return float(((Op - Yp) ** 2 / Yp).sum())


@dataclass
class DetectionResult:
    fake_users: np.ndarray
    e_min: float
    trace: list[tuple[int, int, int]] = field(default_factory=list)
    wall_ms: float = 0.0


def _batched_e_freq(
    hist: np.ndarray, sizes: np.ndarray, pooled_o: np.ndarray, pooled_y: np.ndarray,
    starts: np.ndarray, n: int,
) -> np.ndarray:
    """E_freq of {U minus candidate} for a batch of candidate histograms.

    Y stays at the full-population scale n: removing a fraction phi of the
    users therefore costs about phi^2 * n in the statistic, so a candidate
    only pays off when it removes an actual anomaly. Rescaling Y to the
    retained count instead makes proportional mass removals free and the
    refinement degenerates into sweeping up most of the population.
    """
    pooled_h = np.add.reduceat(hist, starts, axis=1)
    o = pooled_o[None, :] - pooled_h
    y = pooled_y[None, :]
    e = ((o - y) ** 2 / y).sum(axis=1)
    e[sizes >= n] = np.inf
    return e


def diffstats_detect(
    reports: ReportSet,
    params: ProtocolParams | None = None,
    L: int = 6,
    max_iters: int | None = None,
    accumulate: bool = True,
    gain_sigmas: float = 3.0,
) -> DetectionResult:
    """Run the full fake-user detection over a report collection.

    L bounds the number of top commonly-supported items whose subsets are
    examined per iteration (2^L - 1 supporter groups). max_iters trims the
    outer loop for exploration; by default all d+1 bins are processed.
    With accumulate=True the returned set is grown greedily across
    improving candidates instead of keeping only the single best group.

    A candidate only displaces (or extends) the current answer when it
    improves the fit by more than gain_sigmas times the chi-square noise
    scale sqrt(2 * cells); below that, removals are indistinguishable from
    sampling noise and would only collect genuine users.
    """
    t0 = time.perf_counter()
    params = params or reports.params
    if params.protocol == Protocol.GRR:
        raise ValueError(
            "fake-user detection needs support sets larger than one item; "
            "GRR is out of scope (use the abnormal-statistics detector)"
        )
    if L < 1:
        raise ValueError("L must be >= 1")
    if L > params.d:
        raise ValueError("L cannot exceed the domain size")
    n, d = reports.n, params.d
    if n == 0:
        raise ValueError("empty report set")

    B = reports.support_bool_matrix()
    sizes = B.sum(axis=1).astype(np.int64)
    O = np.bincount(sizes, minlength=d + 1).astype(np.float64)
    Y = n * exact_support_pmf(params)

    starts = _pool_starts(Y, n)
    pooled_o = np.add.reduceat(O, starts)
    pooled_y = np.add.reduceat(Y, starts)

    esq = (O - Y) ** 2
    removal_order = np.argsort(esq, kind="stable")  # ties break toward smaller k
    iters = len(removal_order) if max_iters is None else min(max_iters, len(removal_order))

    by_bin = np.argsort(sizes, kind="stable")
    bin_bounds = np.searchsorted(sizes[by_bin], np.arange(d + 2))

    alive = np.ones(n, dtype=bool)
    item_support = B.sum(axis=0).astype(np.int64)

    baseline = float(((pooled_o - pooled_y) ** 2 / pooled_y).sum())
    e_min = baseline
    min_gain = gain_sigmas * math.sqrt(2.0 * len(pooled_y))
    uf_mask = np.zeros(n, dtype=bool)
    uf_hist = np.zeros(d + 1, dtype=np.float64)
    uf_size = 0

    bit_weights = (1 << np.arange(L)).astype(np.int64)
    n_sigs = 1 << L
    trace: list[tuple[int, int, int]] = []
    state = {"mask": uf_mask, "hist": uf_hist, "size": uf_size, "e_min": e_min}

    def refine(alive_idx: np.ndarray, support_counts: np.ndarray, max_rounds: int) -> None:
        """Greedy accretion over the supporter groups of the current U_s.

        A group replaces the answer when it improves the fit by more than
        min_gain, or matches the current fit with a strictly smaller
        removal; it extends the answer when the union clears min_gain.
        Rounds repeat while something is accepted.
        """
        order = np.lexsort((np.arange(d), -support_counts))
        top_items = order[:L]
        cols = B[np.ix_(alive_idx, top_items)]
        sig = cols.astype(np.int64) @ bit_weights
        k_alive = sizes[alive_idx]

        def sos_table(mask: np.ndarray | None) -> np.ndarray:
            s = sig if mask is None else sig[mask]
            k = k_alive if mask is None else k_alive[mask]
            cnt = np.bincount(s * (d + 1) + k, minlength=n_sigs * (d + 1)).reshape(
                n_sigs, d + 1
            ).astype(np.float64)
            for j in range(L):
                bit = 1 << j
                without = np.flatnonzero((np.arange(n_sigs) & bit) == 0)
                cnt[without] += cnt[without | bit]
            return cnt

        cand_hist = sos_table(None)[1:]
        cand_sizes = cand_hist.sum(axis=1)
        e_solo = _batched_e_freq(cand_hist, cand_sizes, pooled_o, pooled_y, starts, n)
        best = int(np.argmin(e_solo))
        e_best = float(e_solo[best])

        for _round in range(max_rounds):
            e_union_best = np.inf
            union_pick = None
            fresh = None
            if accumulate and state["size"] > 0:
                fresh = ~state["mask"][alive_idx]
                new_hist = sos_table(fresh)[1:]
                new_sizes = new_hist.sum(axis=1)
                e_union = _batched_e_freq(
                    new_hist + state["hist"][None, :], new_sizes + state["size"],
                    pooled_o, pooled_y, starts, n,
                )
                e_union[new_sizes == 0] = np.inf  # nothing added
                union_pick = int(np.argmin(e_union))
                e_union_best = float(e_union[union_pick])

            replace_ok = e_best < state["e_min"] - min_gain or (
                e_best < state["e_min"] and 0 < cand_sizes[best] < state["size"]
            )
            extend_ok = e_union_best < state["e_min"] - min_gain
            if extend_ok and (not replace_ok or e_union_best < e_best):
                s_mask = union_pick + 1
                members = alive_idx[fresh & ((sig & s_mask) == s_mask)]
                state["mask"][members] = True
                state["hist"] = state["hist"] + np.bincount(sizes[members], minlength=d + 1)
                state["size"] += len(members)
                state["e_min"] = e_union_best
            elif replace_ok:
                s_mask = best + 1
                members = alive_idx[(sig & s_mask) == s_mask]
                state["mask"][:] = False
                state["mask"][members] = True
                state["hist"] = cand_hist[best].copy()
                state["size"] = int(cand_sizes[best])
                state["e_min"] = e_best
                e_best = np.inf  # the same solo candidate cannot re-fire
            else:
                break

    for t in range(iters):
        delta = int(removal_order[t])
        users_delta = by_bin[bin_bounds[delta] : bin_bounds[delta + 1]]
        if len(users_delta):
            alive[users_delta] = False
            item_support -= B[users_delta].sum(axis=0)

        alive_idx = np.flatnonzero(alive)
        trace.append((delta, len(alive_idx), (1 << L) - 1))
        if len(alive_idx) == 0:
            continue
        refine(alive_idx, item_support, max_rounds=2 * L)

    # Terminal pass: the most anomalous bins are only reached when
    # everything else has been discarded, with few outer iterations left to
    # converge, and the greedy may have spent part of its removal budget on
    # earlier low-precision groups. Rebuild a fresh answer bin by bin over
    # every significantly deviating cell (> 4 sigma of its own count noise,
    # worst first) and keep whichever of the two answers fits better.
    if iters == len(removal_order):
        noise = np.maximum(Y * (1.0 - Y / n), 1.0)
        significant = np.flatnonzero(esq > 16.0 * noise)
        if len(significant) == 0:
            significant = np.asarray([removal_order[-1]])
        significant = significant[np.argsort(-esq[significant], kind="stable")]
        strata = []
        for worst in significant[:64]:
            stratum = by_bin[bin_bounds[worst] : bin_bounds[worst + 1]]
            if len(stratum):
                strata.append((stratum, B[stratum].sum(axis=0).astype(np.int64)))
        for stratum, support in strata:  # continue the loop answer first
            refine(stratum, support, max_rounds=64)
        looped = dict(state)
        state["mask"] = np.zeros(n, dtype=bool)
        state["hist"] = np.zeros(d + 1, dtype=np.float64)
        state["size"] = 0
        state["e_min"] = baseline
        for stratum, support in strata:  # then rebuild from scratch
            refine(stratum, support, max_rounds=64)
        if looped["e_min"] <= state["e_min"]:
            state = looped

    return DetectionResult(
        fake_users=np.flatnonzero(state["mask"]),
        e_min=state["e_min"],
        trace=trace,
        wall_ms=(time.perf_counter() - t0) * 1e3,
    )


def theorem_oracles(
    params: ProtocolParams, m: int, omega: np.ndarray | None = None
) -> dict:
    """Closed-form expected detection errors for the crafted-report attacks.

    Returns expected E_sq per cell and expected E_freq for the
    fixed-size construction (all fakes at the genuine mode l_g) and, when
    omega is given, for the shaped construction, plus their comparison at
    l_g: the fixed-size error strictly exceeds the shaped one whenever
    omega[l_g] < m and they agree at omega[l_g] = m.
    """
    model = SupportModel.for_params(params)
    n, d = params.n, params.d
    pmf = model.pmf
    lg = model.genuine_mode
    var_obs = (n - m) * pmf * (1.0 - pmf)

    esq_fixed = m**2 * pmf**2 + var_obs
    esq_fixed[lg] = m**2 * (pmf[lg] - 1.0) ** 2 + var_obs[lg]
    efreq_fixed = (m**2 / n) * (1.0 / pmf[lg] - 1.0) + (n - m) * d / n

    out = {
        "l_g": lg,
        "e_sq_mga": esq_fixed,
        "e_freq_mga": float(efreq_fixed),
    }
    if omega is not None:
        omega = np.asarray(omega, dtype=np.float64)
        if omega.shape[0] != d + 1:
            raise ValueError("omega must have length d + 1")
        esq_apa = (m * pmf - omega) ** 2 + var_obs
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = (m * pmf - omega) ** 2 / pmf
        terms[pmf <= 0] = 0.0
        efreq_apa = terms.sum() / n + (n - m) * d / n
        cmp_lg = "equal" if omega[lg] >= m else "mga_exceeds_apa"
        out.update(
            e_sq_apa=esq_apa,
            e_freq_apa=float(efreq_apa),
            comparison_at_l_g=cmp_lg,
        )
    return out
