"""Command-line workbench.

Exit codes: 0 ok, 1 detection positive, 2 error. The detection commands
use code 1 so shell pipelines can branch on an attack being flagged.
"""

from __future__ import annotations

import json
import sys

import click
import numpy as np

from .asd import AsdConfig, asd_detect
from .attacks import AttackKind, AttackSpec, craft
from .data import DatasetSpec, load_csv_counts, materialize, synthesize_zipf, write_csv_counts
from .diffstats import diffstats_detect
from .harness import (
    read_estimates,
    run_experiment,
    spec_from_dict,
    sweep as run_sweep,
    write_csv,
    write_estimates,
)
from .metrics import f1 as f1_score, mse as mse_metric
from .oracles import EstimateVector, aggregate, perturb_many
from .params import Protocol, derive_params
from .postprocess import RecoveryMethod, apply_method
from .reports import read_reports, write_reports
from .rng import RngPolicy


@click.group()
def main():
    """LDP frequency-oracle workbench: perturb, attack, detect, recover."""


@main.command()
@click.option("--s", type=float, default=1.5, show_default=True, help="zipf exponent")
@click.option("--d", type=int, required=True, help="domain size")
@click.option("--n", type=int, required=True, help="user count")
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="output CSV (item,count)")
def synth(s, d, n, seed, out):
    """Synthesize a zipf dataset and write its counts."""
    truth, _ = synthesize_zipf(s, d, n, seed)
    write_csv_counts(truth, out)
    click.echo(f"wrote {d} items / {n} users to {out}")


@main.command()
@click.option("--data", "data_path", type=click.Path(exists=True), required=True,
              help="counts CSV from synth")
@click.option("--protocol", type=str, required=True)
@click.option("--epsilon", type=float, required=True)
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="output report file")
def perturb(data_path, protocol, epsilon, seed, out):
    """Perturb every user's item and write the report file."""
    truth, _ = load_csv_counts(data_path)
    policy = RngPolicy(seed)
    items = np.repeat(np.arange(1, len(truth.counts) + 1), truth.counts)
    policy.stream("dataset", 0).shuffle(items)
    params = derive_params(Protocol.parse(protocol), epsilon, len(truth.counts), len(items))
    reports = perturb_many(items, params, policy.stream("perturb", 0), master_seed=seed)
    write_reports(reports, out)
    click.echo(f"wrote {reports.n} reports to {out}")


@main.command()
@click.option("--input", "in_path", type=click.Path(exists=True), required=True,
              help="report file to poison")
@click.option("--kind", type=click.Choice(["baseline", "mga", "mga-a", "apa"]), required=True)
@click.option("--beta", type=float, default=0.05, show_default=True)
@click.option("--r", type=int, default=10, show_default=True)
@click.option("--r-prime", type=int, default=None)
@click.option("--targets", type=str, default=None, help="comma-separated item ids")
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def attack(in_path, kind, beta, r, r_prime, targets, seed, out):
    """Replace the last beta*n reports with crafted ones."""
    reports = read_reports(in_path)
    params = reports.params
    policy = RngPolicy(seed)
    if targets:
        tset = tuple(int(t) for t in targets.split(","))
    else:
        rng = policy.stream("targets", 0)
        tset = tuple(int(x) for x in np.sort(rng.choice(params.d, r, replace=False) + 1))
    spec = AttackSpec(AttackKind.parse(kind), tset, beta, r_prime=r_prime)
    m = spec.m(params.n)
    outcome = craft(spec, params, policy.stream("attack", 0),
                    user_index0=params.n - m, master_seed=reports.master_seed)
    from .reports import concat_report_sets

    keep = reports.subset(np.arange(params.n - m))
    merged = concat_report_sets([keep, outcome.fake_reports])
    write_reports(merged, out)
    sidecar = out + ".fakes.json"
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump({"fake_user_indices": outcome.fake_user_indices.tolist(),
                   "targets": list(tset), "search_stats": outcome.search_stats}, fh)
    click.echo(f"injected {m} fake reports; evaluation sidecar at {sidecar}")


@main.group()
def detect():
    """Attack detection."""


@detect.command()
@click.option("--input", "in_path", type=click.Path(exists=True), required=True,
              help="report file")
@click.option("--L", "top_l", type=int, default=6, show_default=True)
@click.option("--max-iters", type=int, default=None, help="trim the outer loop")
@click.option("--out", type=click.Path(), default=None, help="write JSON result here")
def fake(in_path, top_l, max_iters, out):
    """Identify fake users from the report collection."""
    reports = read_reports(in_path)
    res = diffstats_detect(reports, L=top_l, max_iters=max_iters)
    payload = {
        "fake_user_ids": res.fake_users.tolist(),
        "E_min": res.e_min,
        "trace": res.trace[:32],
        "wall_time_ms": res.wall_ms,
    }
    text = json.dumps(payload)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        click.echo(text)
    sys.exit(1 if len(res.fake_users) else 0)


@detect.command()
@click.option("--input", "in_path", type=click.Path(exists=True), required=True,
              help="estimates JSON")
@click.option("--lambda", "lambda_", type=float, default=0.02, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def asd(in_path, lambda_, out):
    """Test aggregated counts for attack presence."""
    est, params = read_estimates(in_path)
    res = asd_detect(est, params, AsdConfig(lambda_))
    payload = {
        "attack_detected": res.attack_detected,
        "gamma": res.gamma,
        "xi": res.xi,
        "sum_A": res.sum_A,
        "set_B_size": res.set_B_size,
        "constraint_saturated": res.constraint_saturated,
    }
    text = json.dumps(payload)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        click.echo(text)
    sys.exit(1 if res.attack_detected else 0)


@main.command(name="aggregate")
@click.option("--input", "in_path", type=click.Path(exists=True), required=True,
              help="report file")
@click.option("--out", type=click.Path(), required=True, help="estimates JSON")
def aggregate_cmd(in_path, out):
    """Aggregate a report file into frequency estimates."""
    reports = read_reports(in_path)
    est = aggregate(reports)
    write_estimates(est, reports.params, out)
    click.echo(f"wrote estimates for d={reports.params.d} to {out}")


@main.command()
@click.option("--method", type=click.Choice([m.value for m in RecoveryMethod]), required=True)
@click.option("--input", "in_path", type=click.Path(exists=True), required=True,
              help="estimates JSON")
@click.option("--alpha", type=float, default=0.05, show_default=True,
              help="significance level for base-cut")
@click.option("--out", type=click.Path(), default=None)
def recover(method, in_path, alpha, out):
    """Post-process an estimate vector."""
    est, params = read_estimates(in_path)
    res = apply_method(RecoveryMethod.parse(method), est, params, alpha)
    payload = {
        "method": res.method.value,
        "delta": res.delta,
        "region_low_size": int(res.region_low.sum()) if res.region_low is not None else None,
        "flags": list(res.flags),
        "freqs": [float(x) for x in res.freqs],
    }
    text = json.dumps(payload)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        click.echo(text)


@main.command(name="eval")
@click.option("--estimates", type=click.Path(exists=True), required=True)
@click.option("--data", "data_path", type=click.Path(exists=True), required=True,
              help="ground-truth counts CSV")
@click.option("--predicted-fakes", type=click.Path(exists=True), default=None,
              help="JSON list of predicted fake user ids")
@click.option("--fakes-sidecar", type=click.Path(exists=True), default=None,
              help="sidecar written by the attack command")
def eval_cmd(estimates, data_path, predicted_fakes, fakes_sidecar):
    """Score estimates (and optionally a detection) against ground truth."""
    est, _params = read_estimates(estimates)
    truth, _ = load_csv_counts(data_path)
    out = {"mse": mse_metric(est.freqs, truth.freqs)}
    if predicted_fakes and fakes_sidecar:
        with open(predicted_fakes, encoding="utf-8") as fh:
            pred = json.load(fh)
        with open(fakes_sidecar, encoding="utf-8") as fh:
            truth_fakes = json.load(fh)["fake_user_indices"]
        out["f1"] = f1_score(pred, truth_fakes)
    click.echo(json.dumps(out))


@main.group()
def experiment():
    """Declarative experiment runs."""


@experiment.command()
@click.option("--config", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True, help="output CSV")
def run(config, out):
    """Run one experiment spec and write its CSV."""
    with open(config, encoding="utf-8") as fh:
        spec = spec_from_dict(json.load(fh))
    record = run_experiment(spec)
    write_csv([record], out)
    click.echo(f"spec {record.spec_hash}: {len(record.rows)} trials -> {out}")


@experiment.command(name="sweep")
@click.option("--config", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True, help="output CSV")
def sweep_cmd(config, out):
    """Run the spec's sweep axes and write one CSV over all points."""
    with open(config, encoding="utf-8") as fh:
        spec = spec_from_dict(json.load(fh))
    records = run_sweep(spec)
    write_csv(records, out)
    click.echo(f"{len(records)} sweep points -> {out}")


def entry() -> None:  # pragma: no cover
    try:
        main(standalone_mode=False)
    except SystemExit as exc:
        raise exc
    except click.ClickException as exc:
        exc.show()
        sys.exit(2)
    except Exception as exc:  # noqa: BLE001
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":  # pragma: no cover
    entry()
