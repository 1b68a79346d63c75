"""Controlled lazy random walks on the integer lattice.

Exact distribution evolution under capped laziness controls, dynamic
programming for extremal return probabilities with bang-bang region
extraction, the explicit control constructions (two-zone, fast-until-zero,
multiscale schedules), counter-based Monte Carlo, and the statistical
toolkit for measuring polynomial localization exponents.
"""

from .errors import (
    AdmissibilityError,
    CalibrationError,
    DegenerateScheduleError,
    InvariantError,
    ParameterError,
)
from .lattice import (
    FLOAT,
    HIT_ZERO,
    NOT_HIT,
    RATIONAL,
    AugmentedDistribution,
    ControlRow,
    LatticeDistribution,
    from_snapshot,
    interval_mass,
    point_mass,
    reset_hit_flags,
    step_distribution,
    to_snapshot,
)
from .policies import (
    BANG_BANG_TABLE,
    CONSTANT,
    FAST_UNTIL_ZERO,
    SCHEDULE,
    TWO_ZONE,
    PolicySpec,
    ScheduleSegment,
    bang_bang_table_policy,
    constant_policy,
    control_grid,
    control_values,
    evaluate,
    fast_until_zero_policy,
    flag_reset_times,
    horizon,
    multiscale_localization_schedule,
    multiscale_qto1_schedule,
    policy_from_json,
    policy_to_json,
    schedule_policy,
    two_zone_policy,
)
from .dp import (
    MAX,
    MIN,
    BangBangPolicy,
    ValueTable,
    as_target,
    boundary_to_csv,
    evolve,
    evolve_trace,
    extract_region,
    hit_probability,
    solve_extremal,
    value_table_to_csv,
)
from .rng import mix64, step_uniforms, trial_keys
from .montecarlo import (
    BarrierFamily,
    EscapeProbeResult,
    HitEstimate,
    ReturnProbeResult,
    StageStats,
    TrajectoryBatch,
    barrier_diagnostics,
    barrier_family,
    estimate_hit,
    lemma0_check,
    lemma_ori_check,
    run_batch,
    sample_path,
    wilson_interval,
)
from .analysis import (
    ChainSpec,
    ExponentFit,
    band_sum_direct,
    band_sum_profile,
    calibrate_lemma5,
    calibrate_lemma6,
    early_exit_probability,
    escape_probability,
    exponent_sweep,
    fit_exponent,
    heat_kernel_profile,
    interior_survival,
    interior_survival_absorbing,
    level_hit_cdf,
    level_hit_cdf_absorbing,
    reversibility_check,
    sweep_policy,
    verify_lemma5_certificate,
    verify_lemma6_certificate,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "ParameterError",
    "AdmissibilityError",
    "DegenerateScheduleError",
    "CalibrationError",
    "InvariantError",
    # lattice
    "FLOAT",
    "RATIONAL",
    "NOT_HIT",
    "HIT_ZERO",
    "LatticeDistribution",
    "AugmentedDistribution",
    "ControlRow",
    "point_mass",
    "step_distribution",
    "interval_mass",
    "reset_hit_flags",
    "to_snapshot",
    "from_snapshot",
    # policies
    "CONSTANT",
    "TWO_ZONE",
    "FAST_UNTIL_ZERO",
    "SCHEDULE",
    "BANG_BANG_TABLE",
    "PolicySpec",
    "ScheduleSegment",
    "constant_policy",
    "two_zone_policy",
    "fast_until_zero_policy",
    "schedule_policy",
    "bang_bang_table_policy",
    "multiscale_localization_schedule",
    "multiscale_qto1_schedule",
    "horizon",
    "flag_reset_times",
    "evaluate",
    "control_grid",
    "control_values",
    "policy_to_json",
    "policy_from_json",
    # dp
    "MAX",
    "MIN",
    "as_target",
    "evolve",
    "evolve_trace",
    "hit_probability",
    "ValueTable",
    "BangBangPolicy",
    "solve_extremal",
    "extract_region",
    "value_table_to_csv",
    "boundary_to_csv",
    # rng
    "mix64",
    "trial_keys",
    "step_uniforms",
    # montecarlo
    "wilson_interval",
    "BarrierFamily",
    "barrier_family",
    "TrajectoryBatch",
    "run_batch",
    "sample_path",
    "HitEstimate",
    "estimate_hit",
    "StageStats",
    "barrier_diagnostics",
    "EscapeProbeResult",
    "lemma0_check",
    "ReturnProbeResult",
    "lemma_ori_check",
    # analysis
    "ExponentFit",
    "fit_exponent",
    "sweep_policy",
    "exponent_sweep",
    "ChainSpec",
    "reversibility_check",
    "heat_kernel_profile",
    "band_sum_profile",
    "band_sum_direct",
    "calibrate_lemma5",
    "verify_lemma5_certificate",
    "level_hit_cdf",
    "level_hit_cdf_absorbing",
    "interior_survival",
    "interior_survival_absorbing",
    "escape_probability",
    "early_exit_probability",
    "calibrate_lemma6",
    "verify_lemma6_certificate",
]
