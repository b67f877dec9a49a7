"""Client-side perturbation and server-side aggregation for the four CFOs.

Estimators follow the standard de-biasing forms:

  GRR:  f_v = (C_v - n q) / (n (p - q))            C_v = #reports equal to v
  OUE:  f_v = (sum_j y_j[v] - n q) / (n (p - q))
  OLH:  f_v = (C_v - n/g) / (n (p - 1/g))          C_v = #reports supporting v
  HST:  f_v = (1/n) sum_j y_j * s_j[v]

EstimateVector carries both the de-biased counts C~ = n * f and the
frequencies; downstream detectors reason in counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import Protocol, ProtocolParams
from .reports import ReportSet

__all__ = [
    "EstimateVector",
    "TrueDistribution",
    "perturb",
    "perturb_many",
    "aggregate",
    "observed_support_histogram",
    "support_sizes",
    "server_hash_assignment",
]

_CHUNK = 8192


@dataclass(frozen=True)
class EstimateVector:
    """Length-d frequency estimates: de-biased counts and freqs = counts/n."""

    counts: np.ndarray
    freqs: np.ndarray
    n: int

    @classmethod
    def from_freqs(cls, freqs: np.ndarray, n: int) -> "EstimateVector":
        freqs = np.asarray(freqs, dtype=np.float64)
        return cls(counts=freqs * n, freqs=freqs, n=n)

    @property
    def d(self) -> int:
        return len(self.freqs)


@dataclass(frozen=True)
class TrueDistribution:
    """Ground-truth item counts; sum of counts equals the user count."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if (c < 0).any():
            raise ValueError("true counts must be nonnegative")

    @property
    def n(self) -> int:
        return int(np.sum(self.counts))

    @property
    def freqs(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=np.float64) / self.n


def server_hash_assignment(master_seed: int, user_index: np.ndarray | int) -> np.ndarray:
    """Deterministic per-user seed for the server settings of OLH/HST."""
    from .hashing import mix64, _GOLDEN  # noqa: PLC0415

    u = np.asarray(user_index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(np.uint64(master_seed) ^ (u * _GOLDEN + np.uint64(1)))


def _skip_uniform(rng: np.random.Generator, exclude0, size: int, domain: int) -> np.ndarray:
    """Uniform draw over [0, domain) \\ {exclude0} without rejection loops."""
    draw = rng.integers(0, domain - 1, size=size)
    return draw + (draw >= np.asarray(exclude0))


def perturb_many(
    values: np.ndarray,
    params: ProtocolParams,
    rng: np.random.Generator,
    user_index0: int = 0,
    master_seed: int = 0,
) -> ReportSet:
    """Perturb a vector of true items (1-based) into a ReportSet.

    Draws are made in user order from the supplied stream, so a fixed
    (stream, values) pair always produces the same reports. Server-setting
    hash/vector seeds are derived from master_seed and the user index.
    """
    values = np.asarray(values, dtype=np.int64)
    n = len(values)
    d = params.d
    if n and (values.min() < 1 or values.max() > d):
        raise ValueError("item values must lie in [1, d]")
    proto = params.protocol
    fam = proto.family
    out = ReportSet(params=params, master_seed=master_seed)

    if fam == "GRR":
        keep = rng.random(n) < params.p
        other = _skip_uniform(rng, values - 1, n, d) + 1
        out.values = np.where(keep, values, other).astype(np.int32)
        return out

    if fam == "OUE":
        bits = np.empty((n, d), dtype=bool)
        for i0 in range(0, n, _CHUNK):
            sl = slice(i0, min(i0 + _CHUNK, n))
            block = rng.random((sl.stop - sl.start, d))
            bits[sl] = block < params.q
        rows = np.arange(n)
        bits[rows, values - 1] = rng.random(n) < params.p
        out.bits = bits
        return out

    if fam == "OLH":
        from .hashing import hash_items  # noqa: PLC0415

        if proto.server_assigned:
            seeds = server_hash_assignment(master_seed, np.arange(user_index0, user_index0 + n))
        else:
            seeds = rng.integers(1, 2**63, size=n, dtype=np.uint64)
        true_hashed = hash_items(seeds, values.astype(np.uint64), params.g)
        keep = rng.random(n) < params.p
        other = _skip_uniform(rng, true_hashed, n, params.g)
        hashed = np.where(keep, true_hashed, other)
        out.hash_ids = seeds
        out.hashed_values = (hashed + 1).astype(np.int16)
        return out

    # HST
    from .hashing import hash_items  # noqa: PLC0415

    if proto.server_assigned:
        seeds = server_hash_assignment(master_seed, np.arange(user_index0, user_index0 + n))
    else:
        seeds = rng.integers(1, 2**63, size=n, dtype=np.uint64)
    sign_at_v = np.where(hash_items(seeds, values.astype(np.uint64), 2) == 0, 1.0, -1.0)
    keep = rng.random(n) < params.p  # p = e^eps / (e^eps + 1)
    y = np.where(keep, sign_at_v, -sign_at_v) * params.hst_coeff
    out.signed_values = y
    out.vector_seeds = seeds
    return out


def perturb(v: int, params: ProtocolParams, rng: np.random.Generator, user_index: int = 0,
            master_seed: int = 0):
    """Perturb a single item; returns a Report."""
    rs = perturb_many(np.asarray([v]), params, rng, user_index0=user_index,
                      master_seed=master_seed)
    return rs.report(0)


def aggregate(reports: ReportSet, params: ProtocolParams | None = None) -> EstimateVector:
    """De-biased frequency estimates from a report collection."""
    params = params or reports.params
    if params.protocol.family != reports.params.protocol.family:
        raise ValueError("params protocol does not match report set")
    n = reports.n
    if n == 0:
        raise ValueError("cannot aggregate an empty report set")
    d = params.d
    fam = params.protocol.family

    if fam == "GRR":
        c = np.bincount(reports.values, minlength=d + 1)[1:].astype(np.float64)
        freqs = (c - n * params.q) / (n * (params.p - params.q))
    elif fam == "OUE":
        sc = np.zeros(d, dtype=np.int64)
        for i0 in range(0, n, _CHUNK):
            sc += reports.bits[i0 : i0 + _CHUNK].sum(axis=0)
        freqs = (sc - n * params.q) / (n * (params.p - params.q))
    elif fam == "OLH":
        from .hashing import hash_items  # noqa: PLC0415

        sc = np.zeros(d, dtype=np.int64)
        items = np.arange(1, d + 1, dtype=np.uint64)
        vals0 = np.asarray(reports.hashed_values, dtype=np.int64) - 1
        for i0 in range(0, n, 2048):
            sl = slice(i0, min(i0 + 2048, n))
            h = hash_items(reports.hash_ids[sl, None], items[None, :], params.g)
            sc += (h == vals0[sl, None]).sum(axis=0)
        freqs = (sc - n / params.g) / (n * params.est_denominator)
    else:  # HST
        signs = None
        total = np.zeros(d, dtype=np.float64)
        y = reports.signed_values
        seeds = reports.vector_seeds
        from .hashing import hst_sign_matrix  # noqa: PLC0415

        for i0 in range(0, n, 2048):
            sl = slice(i0, min(i0 + 2048, n))
            signs = hst_sign_matrix(seeds[sl], d)
            total += y[sl] @ signs.astype(np.float64)
        if reports.explicit_rows is not None and len(reports.explicit_rows):
            # replace the seed-expanded contribution of explicit rows
            rows = reports.explicit_rows
            seed_signs = hst_sign_matrix(seeds[rows], d).astype(np.float64)
            total -= y[rows] @ seed_signs
            total += y[rows] @ reports.explicit_vectors.astype(np.float64)
        freqs = total / n

    counts = freqs * n
    return EstimateVector(counts=counts, freqs=freqs, n=n)


def support_sizes(reports: ReportSet, chunk: int = 4096) -> np.ndarray:
    """Support-set size per user (unsupported for GRR)."""
    fam = reports.params.protocol.family
    if fam == "GRR":
        raise ValueError("support sizes are constant 1 for GRR; histogram unsupported")
    n = reports.n
    sizes = np.empty(n, dtype=np.int32)
    if fam == "OUE":
        for i0 in range(0, n, chunk):
            sizes[i0 : i0 + chunk] = reports.bits[i0 : i0 + chunk].sum(axis=1)
        return sizes
    mat = reports.support_bool_matrix(chunk)
    for i0 in range(0, n, chunk):
        sizes[i0 : i0 + chunk] = mat[i0 : i0 + chunk].sum(axis=1)
    return sizes


def observed_support_histogram(reports: ReportSet, params: ProtocolParams | None = None) -> np.ndarray:
    """O[k] = number of users whose report supports exactly k items, k in [0, d]."""
    params = params or reports.params
    if params.protocol == Protocol.GRR:
        raise ValueError("observed support histogram is undefined for GRR")
    sizes = support_sizes(reports)
    return np.bincount(sizes, minlength=params.d + 1)
