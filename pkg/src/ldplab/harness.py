"""Experiment orchestration: dataset -> perturb -> attack -> detect ->
recover -> metrics, over trials and parameter sweeps.

Three mitigation paths are wired:

* Path 1: identify fake users, drop their reports, aggregate the rest,
  post-process, score.
* Path 2: aggregate everything, test the counts for attack presence; on a
  positive result post-process with the detection flag attached.
* Path 3: same flow with a negative detection; post-processing runs for
  utility only.

Detectors only ever see the report collection / estimate vector and the
public parameters; ground truth and fake-user indices stay in the trial
context for scoring.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import itertools
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .asd import AsdConfig, asd_detect
from .attacks import AttackKind, AttackSpec, craft
from .data import DatasetSpec, materialize
from .diffstats import diffstats_detect
from .metrics import IgrInputs, f1, igr, mse, wilson_interval
from .oracles import EstimateVector, aggregate, perturb_many
from .params import Protocol, ProtocolParams, derive_params
from .postprocess import RecoveryMethod, apply_method
from .reports import ReportSet, concat_report_sets
from .rng import RngPolicy

__all__ = [
    "Detector",
    "PathPolicy",
    "AttackConfig",
    "ExperimentSpec",
    "RunRecord",
    "run_experiment",
    "sweep",
    "write_csv",
    "write_estimates",
    "read_estimates",
    "spec_from_dict",
    "spec_to_dict",
    "CSV_COLUMNS",
]

# deterministic CSV payload; stage wall times stay on the RunRecord rows
# (TIMING_KEYS) so identical (spec, master_seed) runs write identical bytes
CSV_COLUMNS = [
    "protocol", "epsilon", "beta", "r", "r_prime", "attack", "detector", "path",
    "recovery", "trial", "f1", "mse", "igr", "accuracy", "ci_lo", "ci_hi",
    "detected", "fp", "e_min", "gamma", "xi",
]
TIMING_KEYS = ["perturb_s", "attack_s", "aggregate_s", "detect_s", "recover_s"]

APPLICABILITY = """\
detector/attack applicability:
  Diffstats : OUE, OLH-User, OLH-Server, HST-User, HST-Server (not GRR)
  ASD       : every protocol
  mga       : every protocol
  mga-a     : not GRR (the harness substitutes mga there)
  apa       : OUE, OLH-User, HST-User only
  baseline  : every protocol"""


class Detector(str, enum.Enum):
    NONE = "none"
    DIFFSTATS = "diffstats"
    ASD = "asd"
    BOTH = "both"


class PathPolicy(str, enum.Enum):
    PATH1 = "path1"
    PATH2 = "path2"
    PATH3 = "path3"
    AUTO = "auto"


@dataclass(frozen=True)
class AttackConfig:
    """Attack request at the harness level; targets may be drawn per trial."""

    kind: AttackKind
    r: int
    beta: float
    r_prime: int | None = None
    omega: tuple[int, ...] | None = None  # None means optimal shaping
    targets: tuple[int, ...] | None = None

    def materialize(self, d: int, rng: np.random.Generator) -> AttackSpec:
        if self.targets is not None:
            targets = self.targets
        else:
            targets = tuple(int(x) for x in np.sort(rng.choice(d, self.r, replace=False) + 1))
        kind = self.kind
        r_prime = self.r_prime
        return AttackSpec(kind=kind, targets=targets, beta=self.beta, r_prime=r_prime,
                          omega=self.omega)


@dataclass(frozen=True)
class ExperimentSpec:
    dataset: DatasetSpec
    protocol: Protocol
    epsilon: float
    attack: AttackConfig | None = None
    detector: Detector = Detector.NONE
    path_policy: PathPolicy = PathPolicy.AUTO
    recovery: RecoveryMethod | None = None
    trials: int = 5
    master_seed: int = 7
    L: int = 6
    lambda_: float = 0.02
    base_cut_alpha: float = 0.05
    max_iters: int | None = None
    sweep_axes: dict = field(default_factory=dict)


class SpecError(ValueError):
    pass


def validate_spec(spec: ExperimentSpec) -> None:
    proto = spec.protocol
    att = spec.attack
    if spec.path_policy == PathPolicy.PATH1 and spec.detector not in (
        Detector.DIFFSTATS, Detector.BOTH
    ):
        raise SpecError("Path 1 needs the fake-user detector.\n" + APPLICABILITY)
    if spec.path_policy in (PathPolicy.PATH2, PathPolicy.PATH3) and spec.detector not in (
        Detector.ASD, Detector.BOTH
    ):
        raise SpecError("Paths 2/3 need the abnormal-statistics detector.\n" + APPLICABILITY)
    if spec.detector in (Detector.DIFFSTATS, Detector.BOTH) and proto == Protocol.GRR:
        raise SpecError("fake-user detection does not apply to GRR.\n" + APPLICABILITY)
    if att is not None and att.kind == AttackKind.APA and proto not in (
        Protocol.OUE, Protocol.OLH_USER, Protocol.HST_USER
    ):
        raise SpecError(f"apa does not apply to {proto.value}.\n" + APPLICABILITY)
    if spec.trials < 1:
        raise SpecError("trials must be >= 1")


def _resolve_path(spec: ExperimentSpec) -> str | None:
    """Which flow to run; Path2 vs Path3 is settled by the detection result."""
    if spec.detector == Detector.NONE:
        return None
    if spec.path_policy == PathPolicy.PATH1:
        return "path1"
    if spec.path_policy in (PathPolicy.PATH2, PathPolicy.PATH3):
        return "path23"
    # auto: identify-and-remove whenever the fake-user detector applies and
    # the attack is not the shaped one it cannot see
    attack_kind = spec.attack.kind if spec.attack else None
    diffstats_ok = (
        spec.detector in (Detector.DIFFSTATS, Detector.BOTH)
        and spec.protocol != Protocol.GRR
        and attack_kind != AttackKind.APA
    )
    if diffstats_ok:
        return "path1"
    if spec.detector in (Detector.ASD, Detector.BOTH):
        return "path23"
    return None


def _effective_attack_kind(spec: ExperimentSpec) -> AttackKind | None:
    """GRR cannot carry the subset attack; substitute the full-target one."""
    if spec.attack is None:
        return None
    if spec.attack.kind == AttackKind.MGA_A and spec.protocol == Protocol.GRR:
        return AttackKind.MGA
    return spec.attack.kind


def _trial_row(spec: ExperimentSpec, policy: RngPolicy, trial: int) -> dict:
    row = {c: "" for c in CSV_COLUMNS + TIMING_KEYS}
    row.update(
        protocol=spec.protocol.value,
        epsilon=spec.epsilon,
        beta=spec.attack.beta if spec.attack else "",
        r=spec.attack.r if spec.attack else "",
        r_prime=(spec.attack.r_prime if spec.attack and spec.attack.r_prime else ""),
        attack=spec.attack.kind.value if spec.attack else "",
        detector=spec.detector.value,
        recovery=spec.recovery.value if spec.recovery else "",
        trial=trial,
    )
    truth, items = materialize(spec.dataset, policy, trial)
    n = len(items)
    d = len(truth.counts)
    params = derive_params(spec.protocol, spec.epsilon, d, n)
    # server-assigned hash/vector seeds are re-drawn each collection round
    assign_seed = policy.child("assign", trial).master_seed

    attack_spec = None
    if spec.attack is not None:
        kind = _effective_attack_kind(spec)
        cfg = spec.attack
        if kind != cfg.kind:
            cfg = replace(cfg, kind=kind, r_prime=None)
        attack_spec = cfg.materialize(d, policy.stream("targets", trial))
    m = attack_spec.m(n) if attack_spec else 0

    t0 = time.perf_counter()
    genuine = perturb_many(
        items[: n - m], params, policy.stream("perturb", trial),
        user_index0=0, master_seed=assign_seed,
    )
    row["perturb_s"] = time.perf_counter() - t0

    fake_idx = np.empty(0, dtype=np.int64)
    reports = genuine
    if attack_spec is not None and m > 0:
        t0 = time.perf_counter()
        outcome = craft(
            attack_spec, params, policy.stream("attack", trial),
            user_index0=n - m, master_seed=assign_seed,
        )
        row["attack_s"] = time.perf_counter() - t0
        fake_idx = outcome.fake_user_indices
        reports = concat_report_sets([genuine, outcome.fake_reports])

    path = _resolve_path(spec)
    estimate: EstimateVector
    detected = None

    if path == "path1":
        t0 = time.perf_counter()
        det = diffstats_detect(reports, params, L=spec.L, max_iters=spec.max_iters)
        row["detect_s"] = time.perf_counter() - t0
        row["e_min"] = det.e_min
        predicted = det.fake_users
        if m > 0:
            row["f1"] = f1(predicted, fake_idx)
        row["fp"] = int(len(np.setdiff1d(predicted, fake_idx)))
        keep = np.ones(n, dtype=bool)
        keep[predicted] = False
        t0 = time.perf_counter()
        estimate = aggregate(reports.subset(keep), params)
        row["aggregate_s"] = time.perf_counter() - t0
        row["path"] = "Path1"
        if spec.detector == Detector.BOTH:
            res = asd_detect(aggregate(reports, params), params, AsdConfig(spec.lambda_))
            detected = res.attack_detected
            row.update(detected=detected, gamma=res.gamma, xi=res.xi)
    elif path == "path23":
        t0 = time.perf_counter()
        estimate = aggregate(reports, params)
        row["aggregate_s"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        res = asd_detect(estimate, params, AsdConfig(spec.lambda_))
        row["detect_s"] = time.perf_counter() - t0
        detected = res.attack_detected
        row.update(detected=detected, gamma=res.gamma, xi=res.xi)
        row["path"] = "Path2" if detected else "Path3"
    else:
        t0 = time.perf_counter()
        estimate = aggregate(reports, params)
        row["aggregate_s"] = time.perf_counter() - t0
        row["path"] = "direct"

    if detected is not None:
        row["accuracy"] = float(detected == (m > 0))

    freqs_final = estimate.freqs
    if spec.recovery is not None:
        t0 = time.perf_counter()
        rec = apply_method(spec.recovery, estimate, params, spec.base_cut_alpha)
        row["recover_s"] = time.perf_counter() - t0
        freqs_final = rec.freqs

    row["mse"] = mse(freqs_final, truth.freqs)

    wants_igr = (
        attack_spec is not None
        and m > 0
        and attack_spec.kind != AttackKind.BASELINE
        and spec.recovery is not None
    )
    if wants_igr:
        before = aggregate(
            perturb_many(items, params, policy.stream("perturb-before", trial),
                         user_index0=0, master_seed=assign_seed),
            params,
        )
        base_spec = AttackSpec(AttackKind.BASELINE, attack_spec.targets, attack_spec.beta)
        base_out = craft(base_spec, params, policy.stream("attack-base", trial),
                         user_index0=n - m, master_seed=assign_seed)
        base_est = aggregate(concat_report_sets([genuine, base_out.fake_reports]), params)
        tcols = np.asarray(attack_spec.targets) - 1
        try:
            row["igr"] = igr(IgrInputs(
                f_before=before.freqs[tcols],
                f_recovery=freqs_final[tcols],
                f_base=base_est.freqs[tcols],
                r=attack_spec.r,
            ))
        except ValueError:
            row["igr"] = ""  # baseline gain not positive; value withheld
    return row


@dataclass
class RunRecord:
    spec_hash: str
    point: dict
    rows: list[dict]
    aggregate: dict
    wall_s: float

    def mean(self, column: str) -> float | None:
        vals = [r[column] for r in self.rows if r[column] != "" and r[column] is not None]
        if not vals:
            return None
        return float(np.mean([float(v) for v in vals]))


def _aggregate_rows(rows: list[dict], attacked: bool) -> dict:
    agg = {c: "" for c in CSV_COLUMNS + TIMING_KEYS}
    for c in ("protocol", "epsilon", "beta", "r", "r_prime", "attack", "detector",
              "path", "recovery"):
        agg[c] = rows[0][c]
    agg["trial"] = "mean"
    for c in ("f1", "mse", "igr", "e_min", "fp", "perturb_s", "attack_s",
              "aggregate_s", "detect_s", "recover_s"):
        vals = [float(r[c]) for r in rows if r[c] != "" and r[c] is not None]
        if vals:
            agg[c] = float(np.mean(vals))
    flags = [r["detected"] for r in rows if r["detected"] != ""]
    if flags:
        correct = sum(1 for r in rows if r["detected"] != "" and
                      bool(r["detected"]) == attacked)
        k, nn = correct, len(flags)
        agg["accuracy"] = k / nn
        lo, hi = wilson_interval(k, nn)
        agg["ci_lo"], agg["ci_hi"] = lo, hi
        agg["detected"] = float(np.mean([bool(x) for x in flags]))
    return agg


def spec_hash(spec: ExperimentSpec) -> str:
    canon = json.dumps(spec_to_dict(spec), sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def run_experiment(spec: ExperimentSpec) -> RunRecord:
    validate_spec(spec)
    policy = RngPolicy(spec.master_seed)
    t0 = time.perf_counter()
    workers = int(os.environ.get("LDPLAB_THREADS", "1"))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda t: _trial_row(spec, policy, t), range(spec.trials)))
    else:
        rows = [_trial_row(spec, policy, t) for t in range(spec.trials)]
    attacked = spec.attack is not None and spec.attack.beta > 0
    agg = _aggregate_rows(rows, attacked)
    point = {
        "epsilon": spec.epsilon,
        "beta": spec.attack.beta if spec.attack else None,
        "r": spec.attack.r if spec.attack else None,
        "r_prime": spec.attack.r_prime if spec.attack else None,
    }
    return RunRecord(spec_hash(spec), point, rows, agg, time.perf_counter() - t0)


def sweep(spec: ExperimentSpec) -> list[RunRecord]:
    """Cartesian product over the spec's sweep axes, one record per point."""
    axes = spec.sweep_axes or {}
    names = [k for k in ("epsilon", "beta", "r", "r_prime") if axes.get(k)]
    if not names:
        return [run_experiment(spec)]
    records = []
    for combo in itertools.product(*(axes[k] for k in names)):
        point = dict(zip(names, combo))
        sub = spec
        if "epsilon" in point:
            sub = replace(sub, epsilon=point["epsilon"])
        if sub.attack is not None:
            att = sub.attack
            if "beta" in point:
                att = replace(att, beta=point["beta"])
            if "r" in point:
                att = replace(att, r=point["r"], targets=None)
            if "r_prime" in point:
                att = replace(att, r_prime=point["r_prime"])
            sub = replace(sub, attack=att)
        sub = replace(sub, sweep_axes={})
        records.append(run_experiment(sub))
    return records


def _fmt(v) -> str:
    if v is None or v == "":
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def write_csv(records: list[RunRecord], path: str) -> None:
    """One row per (point, trial) plus one aggregate row per point."""
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            for row in rec.rows:
                writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
            writer.writerow([_fmt(rec.aggregate[c]) for c in CSV_COLUMNS])


def write_estimates(estimate: EstimateVector, params: ProtocolParams, path: str) -> None:
    payload = {
        "protocol": params.protocol.value,
        "epsilon": params.epsilon,
        "d": params.d,
        "n": estimate.n,
        "counts": [float(x) for x in estimate.counts],
        "freqs": [float(x) for x in estimate.freqs],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def read_estimates(path: str) -> tuple[EstimateVector, ProtocolParams]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    params = derive_params(
        Protocol.parse(payload["protocol"]), payload["epsilon"], payload["d"], payload["n"]
    )
    est = EstimateVector(
        counts=np.asarray(payload["counts"], dtype=np.float64),
        freqs=np.asarray(payload["freqs"], dtype=np.float64),
        n=payload["n"],
    )
    return est, params


def spec_to_dict(spec: ExperimentSpec) -> dict:
    d: dict = {
        "dataset": {k: v for k, v in vars(spec.dataset).items() if v is not None},
        "protocol": spec.protocol.value,
        "epsilon": spec.epsilon,
        "detector": spec.detector.value,
        "path_policy": spec.path_policy.value,
        "recovery": spec.recovery.value if spec.recovery else None,
        "trials": spec.trials,
        "master_seed": spec.master_seed,
        "L": spec.L,
        "lambda": spec.lambda_,
        "base_cut_alpha": spec.base_cut_alpha,
    }
    if spec.attack:
        d["attack"] = {
            "kind": spec.attack.kind.value,
            "r": spec.attack.r,
            "beta": spec.attack.beta,
            "r_prime": spec.attack.r_prime,
            "omega": list(spec.attack.omega) if spec.attack.omega else None,
            "targets": list(spec.attack.targets) if spec.attack.targets else None,
        }
    else:
        d["attack"] = None
    if spec.sweep_axes:
        d["sweep"] = spec.sweep_axes
    if spec.max_iters is not None:
        d["max_iters"] = spec.max_iters
    return d


def spec_from_dict(payload: dict) -> ExperimentSpec:
    ds = payload["dataset"]
    dataset = DatasetSpec(
        source=ds["source"],
        s=ds.get("s"),
        d=ds.get("d"),
        n=ds.get("n"),
        path=ds.get("path"),
        item_column=ds.get("item_column"),
    )
    attack = None
    if payload.get("attack"):
        a = payload["attack"]
        attack = AttackConfig(
            kind=AttackKind.parse(a["kind"]),
            r=a["r"],
            beta=a["beta"],
            r_prime=a.get("r_prime"),
            omega=tuple(a["omega"]) if a.get("omega") else None,
            targets=tuple(a["targets"]) if a.get("targets") else None,
        )
    return ExperimentSpec(
        dataset=dataset,
        protocol=Protocol.parse(payload["protocol"]),
        epsilon=payload["epsilon"],
        attack=attack,
        detector=Detector(payload.get("detector", "none")),
        path_policy=PathPolicy(payload.get("path_policy", "auto")),
        recovery=RecoveryMethod.parse(payload["recovery"]) if payload.get("recovery") else None,
        trials=payload.get("trials", 5),
        master_seed=payload.get("master_seed", 7),
        L=payload.get("L", 6),
        lambda_=payload.get("lambda", 0.02),
        base_cut_alpha=payload.get("base_cut_alpha", 0.05),
        max_iters=payload.get("max_iters"),
        sweep_axes=payload.get("sweep", {}),
    )
