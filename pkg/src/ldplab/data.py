"""Dataset synthesis and CSV ingestion.

The synthetic dataset draws n users i.i.d. from a zipf law over d ranks
(probability of rank k proportional to k^-s) using a Vose alias table.
CSV loaders accept either pre-tabulated `item,count` rows or a raw column
to tabulate; labels are re-indexed densely to 1..d in descending count
order and the mapping is kept for round trips.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .oracles import TrueDistribution
from .rng import RngPolicy

__all__ = [
    "DatasetSpec",
    "AliasSampler",
    "synthesize_zipf",
    "load_csv_counts",
    "load_csv_raw",
    "write_csv_counts",
    "materialize",
]


@dataclass(frozen=True)
class DatasetSpec:
    """Declarative dataset description used by the experiment harness."""

    source: str  # "zipf" | "csv_counts" | "csv_raw"
    s: float | None = None
    d: int | None = None
    n: int | None = None
    path: str | None = None
    item_column: str | int | None = None

    def __post_init__(self):
        if self.source == "zipf":
            if self.s is None or self.s <= 0:
                raise ValueError("zipf exponent s must be positive")
            if self.d is None or self.d < 2 or self.n is None or self.n < 1:
                raise ValueError("zipf needs d >= 2 and n >= 1")
        elif self.source in ("csv_counts", "csv_raw"):
            if not self.path:
                raise ValueError("csv sources need a path")
        else:
            raise ValueError(f"unknown dataset source {self.source!r}")


class AliasSampler:
    """Vose alias method: O(d) setup, O(1) per draw."""

    def __init__(self, probs: np.ndarray):
        p = np.asarray(probs, dtype=np.float64)
        if (p < 0).any() or p.sum() <= 0:
            raise ValueError("probabilities must be nonnegative with positive sum")
        p = p / p.sum()
        d = len(p)
        scaled = p * d
        self.prob = np.ones(d)
        self.alias = np.arange(d)
        small = [i for i in range(d) if scaled[i] < 1.0]
        large = [i for i in range(d) if scaled[i] >= 1.0]
        while small and large:
            s, l = small.pop(), large.pop()
            self.prob[s] = scaled[s]
            self.alias[s] = l
            scaled[l] = scaled[l] + scaled[s] - 1.0
            (small if scaled[l] < 1.0 else large).append(l)
        for rest in (*small, *large):
            self.prob[rest] = 1.0

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw `size` indices in [0, d)."""
        cols = rng.integers(0, len(self.prob), size=size)
        coin = rng.random(size) < self.prob[cols]
        return np.where(coin, cols, self.alias[cols])


def zipf_probs(s: float, d: int) -> np.ndarray:
    ranks = np.arange(1, d + 1, dtype=np.float64)
    w = ranks**-s
    return w / w.sum()


def synthesize_zipf(
    s: float, d: int, n: int, seed: int | RngPolicy, trial: int = 0
) -> tuple[TrueDistribution, np.ndarray]:
    """Sample n user items (1-based) from a zipf law over d ranks."""
    policy = seed if isinstance(seed, RngPolicy) else RngPolicy(seed)
    rng = policy.stream("dataset", trial)
    sampler = AliasSampler(zipf_probs(s, d))
    items = sampler.sample(rng, n) + 1
    counts = np.bincount(items, minlength=d + 1)[1:]
    return TrueDistribution(counts=counts), items


def _dense_reindex(labels: list, counts: np.ndarray) -> tuple[np.ndarray, list]:
    """Sort by descending count (ties by label) and return 1..d mapping."""
    order = sorted(range(len(labels)), key=lambda i: (-counts[i], str(labels[i])))
    mapping = [labels[i] for i in order]
    return counts[order], mapping


def load_csv_counts(path: str) -> tuple[TrueDistribution, list]:
    """Read `item,count` rows; duplicate items accumulate."""
    totals: dict[str, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or (lineno == 1 and row[-1].strip().lower() == "count"):
                continue
            if len(row) < 2:
                raise ValueError(f"{path}:{lineno}: expected `item,count`")
            try:
                cnt = int(row[1])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad count {row[1]!r}") from exc
            totals[row[0]] = totals.get(row[0], 0) + cnt
    if not totals:
        raise ValueError(f"{path}: no data rows")
    labels = list(totals)
    counts = np.asarray([totals[l] for l in labels], dtype=np.int64)
    counts, mapping = _dense_reindex(labels, counts)
    return TrueDistribution(counts=counts), mapping


def load_csv_raw(path: str, item_column: str | int = 0) -> tuple[TrueDistribution, list]:
    """Tabulate one column of a raw CSV (header resolved by name)."""
    totals: dict[str, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = iter(reader)
        first = next(rows, None)
        if first is None:
            raise ValueError(f"{path}: empty file")
        col: int
        if isinstance(item_column, str):
            try:
                col = first.index(item_column)
            except ValueError as exc:
                raise ValueError(f"{path}: no column named {item_column!r}") from exc
        else:
            col = int(item_column)
            if col < len(first):
                totals[first[col]] = 1  # headerless file: first row is data
        for lineno, row in enumerate(rows, start=2):
            if not row:
                continue
            if col >= len(row):
                raise ValueError(f"{path}:{lineno}: missing column {col}")
            totals[row[col]] = totals.get(row[col], 0) + 1
        if isinstance(item_column, str) and not totals:
            raise ValueError(f"{path}: no data rows")
    labels = list(totals)
    counts = np.asarray([totals[l] for l in labels], dtype=np.int64)
    counts, mapping = _dense_reindex(labels, counts)
    return TrueDistribution(counts=counts), mapping


def write_csv_counts(truth: TrueDistribution, path: str, mapping: list | None = None) -> None:
    """Write `item,count` rows; items default to their dense 1..d ids."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["item", "count"])
        for i, c in enumerate(np.asarray(truth.counts)):
            label = mapping[i] if mapping else i + 1
            writer.writerow([label, int(c)])


def materialize(
    spec: DatasetSpec, policy: RngPolicy, trial: int = 0
) -> tuple[TrueDistribution, np.ndarray]:
    """Resolve a dataset spec into (truth, per-user items).

    CSV sources fix the counts; per-user items are a seeded permutation of
    the expanded multiset so trials differ only by assignment order.
    """
    if spec.source == "zipf":
        return synthesize_zipf(spec.s, spec.d, spec.n, policy, trial)
    if spec.source == "csv_counts":
        truth, _ = load_csv_counts(spec.path)
    else:
        truth, _ = load_csv_raw(spec.path, spec.item_column or 0)
    items = np.repeat(np.arange(1, len(truth.counts) + 1), truth.counts)
    policy.stream("dataset", trial).shuffle(items)
    return truth, items
