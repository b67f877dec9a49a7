"""Fake-report crafting: baseline, full-target, subset, and shaped attacks.

All attacks inject m = floor(beta * n) fake users that try to raise the
estimated frequencies of a target set T of r items:

* baseline: fake users feed bogus inputs through the honest perturbation,
  indistinguishable from genuine users.
* MGA: reports support every target plus enough padding to mimic the
  expected support size of a genuine report.
* MGA-A: each fake supports a random r'-subset of T (dodges
  frequent-itemset style detection).
* APA: additionally shapes the histogram of fake support sizes via a
  vector omega[k] (number of fakes with support size k) so the pooled
  size histogram matches the genuine binomial profile.

OLH attackers search the seeded hash family for functions that send their
targets to a common value; searches scan seeds upward from 1 so the
winning seed is deterministic.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from .diffstats import SupportModel
from .hashing import hash_items
from .oracles import perturb_many, server_hash_assignment
from .params import Protocol, ProtocolParams
from .reports import ReportSet

__all__ = [
    "AttackKind",
    "AttackSpec",
    "AttackOutcome",
    "baseline_attack",
    "mga",
    "mga_adaptive",
    "apa",
    "craft",
    "build_optimal_omega",
    "grr_vulnerability_check",
]

OLH_SEARCH_BUDGET = 2_000_000  # seeds scanned per search before falling back
_BATCH = 65536


class AttackKind(str, enum.Enum):
    BASELINE = "baseline"
    MGA = "mga"
    MGA_A = "mga-a"
    APA = "apa"

    @classmethod
    def parse(cls, name: str) -> "AttackKind":
        for k in cls:
            if k.value == name.lower().replace("_", "-"):
                return k
        raise ValueError(f"unknown attack kind {name!r}")


@dataclass(frozen=True)
class AttackSpec:
    """Declarative attack description.

    targets are 1-based item ids; beta is the fake-user fraction of n.
    r_prime is the per-user subset size for the subset attack. omega, when
    given for the shaped attack, must sum to m; omit it to use the optimal
    shaping floor(m * P(X=k)).
    """

    kind: AttackKind
    targets: tuple[int, ...]
    beta: float
    r_prime: int | None = None
    omega: tuple[int, ...] | None = None

    def __post_init__(self):
        if not self.targets:
            raise ValueError("target set must be non-empty")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if self.kind == AttackKind.MGA_A:
            if self.r_prime is None or not (1 <= self.r_prime < len(self.targets)):
                raise ValueError("subset attack needs 1 <= r_prime < r")

    @property
    def r(self) -> int:
        return len(self.targets)

    def m(self, n: int) -> int:
        return int(np.floor(self.beta * n))


@dataclass
class AttackOutcome:
    """Crafted fake reports plus bookkeeping for evaluation only.

    fake_user_indices never flows into detectors; it exists so the harness
    can score detection quality after the fact.
    """

    fake_reports: ReportSet
    fake_user_indices: np.ndarray
    search_stats: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.fake_user_indices)


def grr_vulnerability_check(params: ProtocolParams, r: int) -> bool:
    """True when the direct-encoding protocol is the softer target,
    i.e. d > (2r - 1)(e^eps - 1) + 3r."""
    if r < 1:
        raise ValueError("r must be >= 1")
    ee = np.exp(params.epsilon)
    return params.d > (2 * r - 1) * (ee - 1.0) + 3 * r


def build_optimal_omega(m: int, params: ProtocolParams) -> np.ndarray:
    """Shape vector omega[k] = floor(m * P(X=k)) with the remainder spread
    over the cells with the largest fractional parts so it sums to m."""
    if m < 0:
        raise ValueError("m must be >= 0")
    model = SupportModel.for_params(params)
    raw = m * model.pmf
    omega = np.floor(raw).astype(np.int64)
    short = m - int(omega.sum())
    if short > 0:
        frac = raw - omega
        top = np.lexsort((np.arange(len(frac)), -frac))[:short]
        omega[top] += 1
    return omega


def _empty_outcome(params: ProtocolParams, master_seed: int) -> AttackOutcome:
    fam = params.protocol.family
    rs = ReportSet(params=params, master_seed=master_seed)
    if fam == "GRR":
        rs.values = np.empty(0, dtype=np.int32)
    elif fam == "OUE":
        rs.bits = np.zeros((0, params.d), dtype=bool)
    elif fam == "OLH":
        rs.hash_ids = np.empty(0, dtype=np.uint64)
        rs.hashed_values = np.empty(0, dtype=np.int16)
    else:
        rs.signed_values = np.empty(0, dtype=np.float64)
        rs.vector_seeds = np.empty(0, dtype=np.uint64)
    return AttackOutcome(rs, np.empty(0, dtype=np.int64))


def baseline_attack(
    spec: AttackSpec,
    params: ProtocolParams,
    rng: np.random.Generator,
    user_index0: int = 0,
    master_seed: int = 0,
) -> AttackOutcome:
    """Each fake user picks one target and runs the honest perturbation."""
    m = spec.m(params.n)
    if m == 0:
        return _empty_outcome(params, master_seed)
    targets = np.asarray(spec.targets, dtype=np.int64)
    values = targets[rng.integers(0, len(targets), size=m)]
    reports = perturb_many(values, params, rng, user_index0=user_index0, master_seed=master_seed)
    idx = np.arange(user_index0, user_index0 + m, dtype=np.int64)
    return AttackOutcome(reports, idx)


def _pad_rows(
    rng: np.random.Generator,
    pool: np.ndarray,
    pad_counts: np.ndarray,
    chunk: int = 2048,
):
    """Yield (row, chosen pool entries) picking pad_counts[row] distinct
    elements of pool uniformly per row."""
    m = len(pad_counts)
    width = len(pool)
    for i0 in range(0, m, chunk):
        counts = pad_counts[i0 : i0 + chunk]
        block = rng.random((len(counts), width))
        order = np.argsort(block, axis=1)
        take = np.arange(width)[None, :] < counts[:, None]
        rows, pos = np.nonzero(take)
        yield i0 + rows, pool[order[rows, pos]]


def _crafted_bits(
    rng: np.random.Generator,
    d: int,
    target_rows: np.ndarray,
    pad_counts: np.ndarray,
    all_targets: np.ndarray,
) -> np.ndarray:
    """Bit matrix with per-row targets set plus padding over non-targets."""
    m = target_rows.shape[0]
    bits = np.zeros((m, d), dtype=bool)
    rows = np.repeat(np.arange(m), target_rows.shape[1])
    bits[rows, target_rows.ravel() - 1] = True
    pool = np.setdiff1d(np.arange(1, d + 1, dtype=np.int64), all_targets)
    for rows_i, items in _pad_rows(rng, pool, pad_counts):
        bits[rows_i, items - 1] = True
    return bits


def _scan_batches(budget: int, start: int = 1):
    seed = start
    end = start + budget
    while seed < end:
        hi = min(seed + _BATCH, end)
        yield np.arange(seed, hi, dtype=np.uint64)
        seed = hi


def _row_best_value(h: np.ndarray, g: int) -> tuple[np.ndarray, np.ndarray]:
    """Per row of hash values: (max multiplicity, smallest value attaining it)."""
    best_count = np.zeros(h.shape[0], dtype=np.int64)
    best_value = np.zeros(h.shape[0], dtype=np.int64)
    for c in range(g):
        cnt = (h == c).sum(axis=1)
        better = cnt > best_count
        best_count = np.where(better, cnt, best_count)
        best_value = np.where(better, c, best_value)
    return best_count, best_value


def _support_size_of(seeds: np.ndarray, values0: np.ndarray, d: int, g: int) -> np.ndarray:
    items = np.arange(1, d + 1, dtype=np.uint64)
    sizes = np.empty(len(seeds), dtype=np.int64)
    for i0 in range(0, len(seeds), 1024):
        sl = slice(i0, min(i0 + 1024, len(seeds)))
        h = hash_items(np.asarray(seeds[sl], dtype=np.uint64)[:, None], items[None, :], g)
        sizes[sl] = (h == np.asarray(values0[sl])[:, None]).sum(axis=1)
    return sizes


def _olh_full_cover_pool(
    targets: np.ndarray,
    params: ProtocolParams,
    budget: int,
    max_candidates: int,
) -> dict:
    """Scan seeds for hash functions sending every target to one value.

    Returns the qualifying (seed, value) pool with support sizes, the
    number of seeds tried, and a best-coverage fallback if no seed fully
    covers the targets within budget.
    """
    g, d = params.g, params.d
    tvec = np.asarray(targets, dtype=np.uint64)
    pool_seeds: list[np.ndarray] = []
    pool_values: list[np.ndarray] = []
    tried = 0
    fallback = (0, None, None)  # coverage, seed, value
    for batch in _scan_batches(budget):
        h = hash_items(batch[:, None], tvec[None, :], g)
        tried += len(batch)
        full = h[:, 0][:, None] == h[:, 1:]
        hits = np.flatnonzero(full.all(axis=1)) if h.shape[1] > 1 else np.arange(len(batch))
        if len(hits):
            pool_seeds.append(batch[hits])
            pool_values.append(h[hits, 0])
        else:
            cov, val = _row_best_value(h, g)
            j = int(np.argmax(cov))
            if cov[j] > fallback[0]:
                fallback = (int(cov[j]), int(batch[j]), int(val[j]))
        if sum(len(s) for s in pool_seeds) >= max_candidates:
            break
    if pool_seeds:
        seeds = np.concatenate(pool_seeds)[:max_candidates]
        values = np.concatenate(pool_values)[:max_candidates]
        sizes = _support_size_of(seeds, values, d, g)
        return {"seeds": seeds, "values0": values, "sizes": sizes, "tried": tried,
                "coverage": len(targets)}
    return {"seeds": None, "tried": tried, "fallback": fallback}


def _olh_pick_nearest(pool: dict, want_size: float) -> tuple[int, int, int]:
    """(seed, value0, size) from a full-cover pool, nearest the wanted
    support size; ties resolve to the smallest seed."""
    sizes = pool["sizes"]
    dist = np.abs(sizes - want_size)
    order = np.lexsort((pool["seeds"], dist))
    j = order[0]
    return int(pool["seeds"][j]), int(pool["values0"][j]), int(sizes[j])


def _olh_user_attack_reports(
    params: ProtocolParams,
    seeds: np.ndarray,
    values0: np.ndarray,
    master_seed: int,
) -> ReportSet:
    rs = ReportSet(params=params, master_seed=master_seed)
    rs.hash_ids = np.asarray(seeds, dtype=np.uint64)
    rs.hashed_values = (np.asarray(values0, dtype=np.int64) + 1).astype(np.int16)
    return rs


def _hst_reports(params, vectors: np.ndarray, signs: np.ndarray, master_seed: int) -> ReportSet:
    m = vectors.shape[0]
    rs = ReportSet(params=params, master_seed=master_seed)
    rs.signed_values = signs * params.hst_coeff
    rs.vector_seeds = np.zeros(m, dtype=np.uint64)
    rs.explicit_rows = np.arange(m, dtype=np.int64)
    rs.explicit_vectors = vectors
    return rs


def _crafted_hst_vectors(
    rng: np.random.Generator,
    d: int,
    target_rows: np.ndarray,
    pad_counts: np.ndarray,
    all_targets: np.ndarray,
) -> np.ndarray:
    m = target_rows.shape[0]
    vec = np.full((m, d), -1, dtype=np.int8)
    rows = np.repeat(np.arange(m), target_rows.shape[1])
    vec[rows, target_rows.ravel() - 1] = 1
    pool = np.setdiff1d(np.arange(1, d + 1, dtype=np.int64), all_targets)
    for rows_i, items in _pad_rows(rng, pool, pad_counts):
        vec[rows_i, items - 1] = 1
    return vec


def _genuine_pad_budget(params: ProtocolParams, supported: int) -> int:
    """Padding count that matches a genuine report's expected support size."""
    fam = params.protocol.family
    if fam == "OUE":
        l = int(np.floor(params.p + (params.d - 1) * params.q - supported))
    elif fam == "HST":
        l = int(np.floor(params.d / 2 - supported))
    else:
        raise ValueError("padding budget applies to bit/sign vector protocols")
    if l < 0:
        warnings.warn(
            f"padding budget is negative ({l}); clamping to 0 "
            "(domain too small for this many targets)",
            RuntimeWarning,
            stacklevel=2,
        )
        l = 0
    return l


def mga(
    spec: AttackSpec,
    params: ProtocolParams,
    rng: np.random.Generator,
    user_index0: int = 0,
    master_seed: int = 0,
) -> AttackOutcome:
    """Full-target attack: every fake report supports all of T."""
    m = spec.m(params.n)
    if m == 0:
        return _empty_outcome(params, master_seed)
    targets = np.asarray(spec.targets, dtype=np.int64)
    r = len(targets)
    proto = params.protocol
    idx = np.arange(user_index0, user_index0 + m, dtype=np.int64)

    if proto == Protocol.GRR:
        values = targets[rng.integers(0, r, size=m)]
        rs = ReportSet(params=params, master_seed=master_seed)
        rs.values = values.astype(np.int32)
        return AttackOutcome(rs, idx)

    if proto == Protocol.OUE:
        l = _genuine_pad_budget(params, r)
        rows = np.tile(targets, (m, 1))
        bits = _crafted_bits(rng, params.d, rows, np.full(m, l), targets)
        rs = ReportSet(params=params, master_seed=master_seed, bits=bits)
        return AttackOutcome(rs, idx)

    if proto == Protocol.OLH_USER:
        pool = _olh_full_cover_pool(targets, params, OLH_SEARCH_BUDGET, max_candidates=512)
        if pool["seeds"] is not None:
            seed, value0, size = _olh_pick_nearest(pool, params.d / params.g)
            stats = {"seeds_tried": pool["tried"], "best_coverage": r, "support_size": size}
        else:
            cov, seed, value0 = pool["fallback"]
            size = int(_support_size_of(np.asarray([seed]), np.asarray([value0]),
                                        params.d, params.g)[0])
            stats = {"seeds_tried": pool["tried"], "best_coverage": cov, "support_size": size}
        rs = _olh_user_attack_reports(
            params, np.full(m, seed, dtype=np.uint64), np.full(m, value0), master_seed
        )
        return AttackOutcome(rs, idx, stats)

    if proto == Protocol.OLH_SERVER:
        seeds = server_hash_assignment(master_seed, idx)
        h_t = hash_items(seeds[:, None], targets.astype(np.uint64)[None, :], params.g)
        cov, values0 = _olh_best_assigned_value(seeds, h_t, params)
        rs = _olh_user_attack_reports(params, seeds, values0, master_seed)
        return AttackOutcome(rs, idx, {"best_coverage": int(cov.max(initial=0)),
                                       "mean_coverage": float(cov.mean())})

    if proto == Protocol.HST_USER:
        l = _genuine_pad_budget(params, r)
        rows = np.tile(targets, (m, 1))
        vec = _crafted_hst_vectors(rng, params.d, rows, np.full(m, l), targets)
        rs = _hst_reports(params, vec, np.ones(m), master_seed)
        return AttackOutcome(rs, idx)

    if proto == Protocol.HST_SERVER:
        seeds = server_hash_assignment(master_seed, idx)
        sign_t = np.where(
            hash_items(seeds[:, None], targets.astype(np.uint64)[None, :], 2) == 0, 1, -1
        )
        total = sign_t.sum(axis=1)
        y_sign = np.where(total >= 0, 1.0, -1.0)
        rs = ReportSet(params=params, master_seed=master_seed)
        rs.signed_values = y_sign * params.hst_coeff
        rs.vector_seeds = seeds
        return AttackOutcome(rs, idx)

    raise ValueError(f"unsupported protocol for this attack: {proto}")


def _olh_best_assigned_value(seeds, h_t, params) -> tuple[np.ndarray, np.ndarray]:
    """Per assigned hash: value covering the most targets; ties prefer the
    support size nearest d/g, then the smallest value."""
    g, d = params.g, params.d
    m = len(seeds)
    counts = np.zeros((m, g), dtype=np.int64)
    for c in range(g):
        counts[:, c] = (h_t == c).sum(axis=1)
    items = np.arange(1, d + 1, dtype=np.uint64)
    sizes = np.zeros((m, g), dtype=np.int64)
    for i0 in range(0, m, 512):
        sl = slice(i0, min(i0 + 512, m))
        h_all = hash_items(seeds[sl][:, None], items[None, :], g)
        for c in range(g):
            sizes[sl, c] = (h_all == c).sum(axis=1)
    dist = np.abs(sizes - d / g)
    # lexicographic score: coverage desc, size distance asc, value asc
    score = counts.astype(np.float64) * 1e12 - dist * 1e4 - np.arange(g)[None, :]
    values0 = np.argmax(score, axis=1)
    cov = counts[np.arange(m), values0]
    return cov, values0


def _draw_subsets(rng: np.random.Generator, targets: np.ndarray, m: int, r_prime: int) -> np.ndarray:
    """m uniform r'-subsets of the target set, one per row."""
    tiled = np.tile(targets, (m, 1))
    return rng.permuted(tiled, axis=1)[:, :r_prime]


def mga_adaptive(
    spec: AttackSpec,
    params: ProtocolParams,
    rng: np.random.Generator,
    user_index0: int = 0,
    master_seed: int = 0,
) -> AttackOutcome:
    """Subset attack: each fake supports a uniform r'-subset of T."""
    if params.protocol == Protocol.GRR:
        raise ValueError(
            "the subset attack is undefined for single-value reports; "
            "run the full-target attack on GRR instead"
        )
    m = spec.m(params.n)
    if m == 0:
        return _empty_outcome(params, master_seed)
    targets = np.asarray(spec.targets, dtype=np.int64)
    r_prime = spec.r_prime
    proto = params.protocol
    idx = np.arange(user_index0, user_index0 + m, dtype=np.int64)
    subsets = _draw_subsets(rng, targets, m, r_prime)

    if proto == Protocol.OUE:
        l = _genuine_pad_budget(params, r_prime)
        bits = _crafted_bits(rng, params.d, subsets, np.full(m, l), targets)
        rs = ReportSet(params=params, master_seed=master_seed, bits=bits)
        return AttackOutcome(rs, idx)

    if proto == Protocol.HST_USER:
        l = _genuine_pad_budget(params, r_prime)
        vec = _crafted_hst_vectors(rng, params.d, subsets, np.full(m, l), targets)
        rs = _hst_reports(params, vec, np.ones(m), master_seed)
        return AttackOutcome(rs, idx)

    if proto == Protocol.OLH_USER:
        seeds, values0, stats = _olh_subset_seeds(subsets, params)
        rs = _olh_user_attack_reports(params, seeds, values0, master_seed)
        return AttackOutcome(rs, idx, stats)

    if proto == Protocol.OLH_SERVER:
        seeds = server_hash_assignment(master_seed, idx)
        h_sub = hash_items(seeds[:, None], subsets.astype(np.uint64), params.g)
        cov, values0 = _olh_best_assigned_value(seeds, h_sub, params)
        rs = _olh_user_attack_reports(params, seeds, values0, master_seed)
        return AttackOutcome(rs, idx, {"mean_coverage": float(cov.mean())})

    if proto == Protocol.HST_SERVER:
        seeds = server_hash_assignment(master_seed, idx)
        sign_t = np.where(hash_items(seeds[:, None], subsets.astype(np.uint64), 2) == 0, 1, -1)
        y_sign = np.where(sign_t.sum(axis=1) >= 0, 1.0, -1.0)
        rs = ReportSet(params=params, master_seed=master_seed)
        rs.signed_values = y_sign * params.hst_coeff
        rs.vector_seeds = seeds
        return AttackOutcome(rs, idx)

    raise ValueError(f"unsupported protocol for this attack: {proto}")


def _olh_subset_seeds(subsets: np.ndarray, params: ProtocolParams) -> tuple:
    """One full-cover seed per distinct subset, shared by its users."""
    m = subsets.shape[0]
    keyed = np.sort(subsets, axis=1)
    uniq, inverse = np.unique(keyed, axis=0, return_inverse=True)
    per_subset_budget = max(OLH_SEARCH_BUDGET // max(len(uniq), 1), _BATCH)
    seeds = np.zeros(len(uniq), dtype=np.uint64)
    values0 = np.zeros(len(uniq), dtype=np.int64)
    tried = 0
    worst_cover = subsets.shape[1]
    for j, sub in enumerate(uniq):
        pool = _olh_full_cover_pool(sub, params, per_subset_budget, max_candidates=64)
        tried += pool["tried"]
        if pool["seeds"] is not None:
            s, v, _size = _olh_pick_nearest(pool, params.d / params.g)
        else:
            cov, s, v = pool["fallback"]
            worst_cover = min(worst_cover, cov)
        seeds[j] = s
        values0[j] = v
    stats = {"seeds_tried": tried, "best_coverage": int(worst_cover),
             "unique_subsets": len(uniq)}
    return seeds[inverse], values0[inverse], stats


def apa(
    spec: AttackSpec,
    params: ProtocolParams,
    rng: np.random.Generator,
    user_index0: int = 0,
    master_seed: int = 0,
) -> AttackOutcome:
    """Shaped attack: support sizes follow omega, every target supported.

    Each fake user is assigned a support size k with multiplicity
    omega[k]; its report sets all r target positions and max(k - r, 0)
    random non-target positions. OLH fakes pick, per assigned k, the
    full-cover hash whose support size is nearest k.
    """
    proto = params.protocol
    if proto not in (Protocol.OUE, Protocol.OLH_USER, Protocol.HST_USER):
        raise ValueError(
            "the shaped attack needs attacker-chosen supports; it applies to "
            "OUE, OLH-User and HST-User only"
        )
    m = spec.m(params.n)
    if m == 0:
        return _empty_outcome(params, master_seed)
    targets = np.asarray(spec.targets, dtype=np.int64)
    r = len(targets)
    if spec.omega is not None:
        omega = np.asarray(spec.omega, dtype=np.int64)
        if omega.shape[0] != params.d + 1:
            raise ValueError("omega must have length d + 1")
        if (omega < 0).any() or int(omega.sum()) != m:
            raise ValueError("omega entries must be nonnegative and sum to m")
    else:
        omega = build_optimal_omega(m, params)
    ks = np.repeat(np.arange(params.d + 1), omega)
    rng.shuffle(ks)
    idx = np.arange(user_index0, user_index0 + m, dtype=np.int64)

    if proto in (Protocol.OUE, Protocol.HST_USER):
        pad = np.maximum(ks - r, 0)
        rows = np.tile(targets, (m, 1))
        if proto == Protocol.OUE:
            bits = _crafted_bits(rng, params.d, rows, pad, targets)
            rs = ReportSet(params=params, master_seed=master_seed, bits=bits)
        else:
            vec = _crafted_hst_vectors(rng, params.d, rows, pad, targets)
            rs = _hst_reports(params, vec, np.ones(m), master_seed)
        return AttackOutcome(rs, idx)

    # OLH-User: pool of full-cover hashes, matched to assigned sizes.
    # The search cap is per fake user and found seeds are shared, so the
    # shaped attack may scan a larger slice of the aggregate m*cap budget
    # to populate enough distinct support sizes for stealthy matching.
    pool = _olh_full_cover_pool(
        targets, params, min(10 * OLH_SEARCH_BUDGET, m * OLH_SEARCH_BUDGET),
        max_candidates=4096,
    )
    if pool["seeds"] is None:
        cov, seed, value0 = pool["fallback"]
        rs = _olh_user_attack_reports(
            params, np.full(m, seed, dtype=np.uint64), np.full(m, value0), master_seed
        )
        stats = {"seeds_tried": pool["tried"], "best_coverage": cov,
                 "size_matching": "fallback"}
        return AttackOutcome(rs, idx, stats)
    sizes = pool["sizes"]
    order = np.argsort(sizes, kind="stable")
    sorted_sizes = sizes[order]
    pos = np.searchsorted(sorted_sizes, ks)
    pos = np.clip(pos, 0, len(sorted_sizes) - 1)
    left = np.clip(pos - 1, 0, len(sorted_sizes) - 1)
    pick = np.where(
        np.abs(sorted_sizes[left] - ks) <= np.abs(sorted_sizes[pos] - ks), left, pos
    )
    chosen = order[pick]
    rs = _olh_user_attack_reports(params, pool["seeds"][chosen], pool["values0"][chosen],
                                  master_seed)
    stats = {
        "seeds_tried": pool["tried"],
        "best_coverage": r,
        "pool_size": len(sizes),
        "size_error_mean": float(np.abs(sizes[chosen] - ks).mean()),
    }
    return AttackOutcome(rs, idx, stats)


def craft(
    spec: AttackSpec,
    params: ProtocolParams,
    rng: np.random.Generator,
    user_index0: int = 0,
    master_seed: int = 0,
) -> AttackOutcome:
    """Dispatch an attack spec to its constructor."""
    fn = {
        AttackKind.BASELINE: baseline_attack,
        AttackKind.MGA: mga,
        AttackKind.MGA_A: mga_adaptive,
        AttackKind.APA: apa,
    }[spec.kind]
    return fn(spec, params, rng, user_index0=user_index0, master_seed=master_seed)
