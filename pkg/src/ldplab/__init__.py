"""Categorical LDP frequency oracles, poisoning attacks, zero-shot attack
detection, and recovery post-processing, with a reproducible experiment
harness."""

from .asd import AsdConfig, AsdResult, asd_detect, choose_gamma, xi_threshold
from .attacks import (
    AttackKind,
    AttackOutcome,
    AttackSpec,
    apa,
    baseline_attack,
    build_optimal_omega,
    craft,
    grr_vulnerability_check,
    mga,
    mga_adaptive,
)
from .data import DatasetSpec, load_csv_counts, load_csv_raw, synthesize_zipf
from .diffstats import (
    DetectionResult,
    SupportModel,
    diffstats_detect,
    e_freq,
    e_sq,
    expected_histogram,
    theorem_oracles,
)
from .harness import (
    AttackConfig,
    Detector,
    ExperimentSpec,
    PathPolicy,
    RunRecord,
    run_experiment,
    sweep,
    write_csv,
)
from .metrics import IgrInputs, detection_accuracy, f1, igr, mse, wilson_interval
from .oracles import (
    EstimateVector,
    TrueDistribution,
    aggregate,
    observed_support_histogram,
    perturb,
    perturb_many,
)
from .params import Protocol, ProtocolParams, derive_params
from .postprocess import (
    RecoveryMethod,
    RecoveryResult,
    base_cut,
    consistency_check,
    ldprecover,
    norm_sub,
    normalization,
    rsn,
)
from .reports import Report, ReportSet, concat_report_sets, read_reports, support_set, write_reports
from .rng import RngPolicy

__version__ = "0.1.0"
