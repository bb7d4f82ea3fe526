//! Exact computation with upper and lower expectations on finite sample
//! spaces.
//!
//! A model is a finite outcome space, a value map, and a credal set given by
//! finitely many probability vectors; the upper expectation of a random
//! variable is its maximum linear expectation over the set. On top of that
//! base the crate provides:
//!
//! * joint evaluation of functionals of coordinate sequences under three
//!   dependence semantics — two adaptive elimination orders and a
//!   non-adaptive product rule ([`sequence`]);
//! * brute-force oracles that recompute the same values by enumerating
//!   adversary strategies, for cross-validation ([`oracle`]);
//! * capacities, Choquet integration, and tail-sum bounds ([`capacity`]);
//! * verification of maximal inequalities with explicit admissible
//!   constants, reported as machine-readable pass/fail records
//!   ([`inequality`], [`report`]);
//! * a Monte Carlo simulator for long-run frequency behavior when an
//!   adversary picks a vertex at every step ([`slln`]).
//!
//! All randomized routines take explicit seeds and produce identical output
//! regardless of thread count.

pub mod capacity;
pub mod expectation;
pub mod expr;
pub mod inequality;
pub mod model;
pub mod oracle;
pub mod parallel;
pub mod report;
pub mod rng;
pub mod sequence;
pub mod slln;

pub use capacity::{
    choquet, choquet_vs_riemann, countable_subadd_check, lower_capacity, mean_choquet_domination,
    outer_capacity, smooth_indicator_sandwich, truncated_second_moment_bound, upper_capacity,
    CapacityError, ChoquetResult, OUTER_SPACE_MAX,
};
pub use expectation::{
    check_axioms, expect_pair, factorization_check, holder_check, lower_expect, upper_expect,
    upper_expect_with_vertex, ExpectError, ExpectationPair,
};
pub use expr::{ExprAst, ExprError};
pub use inequality::{
    closure_constant, closure_scan_check, kolmogorov_suite, kolmogorov_verify,
    lower_rosenthal_verify, mz_verify, rosenthal_general_verify, rosenthal_indep_pge2_verify,
    rosenthal_low_p_verify, rosenthal_nd_pge2_verify, rosenthal_suite, scalar_inequality_suite,
    ConstantPolicy, InequalityError, LowPVariant, MaxSide,
};
pub use model::{
    linear_expect, make_measure, CredalSet, EventSet, FiniteSpace, Measure, ModelDocument,
    ModelError, RandomVar, NORMALIZATION_TOL,
};
pub use oracle::{
    oracle_choquet, oracle_lower, oracle_nd_scan, oracle_upper, NdScanConfig, OracleError,
};
pub use report::{
    merge_sorted, read_jsonl, reports_to_jsonl, write_jsonl, CheckReport, FingerprintHasher,
    InequalityReport, SLACK_TOL,
};
pub use sequence::{
    eval_lower, eval_upper, generate_monotone_functional, identical_distribution_check,
    monotone_scan, nd_check, Dependence, Functional, Kind, MonotoneFunctional, Post, Ramp,
    SequenceError, SequenceModel,
};
pub use slln::{
    band_delta, band_suite, choquet_moment_condition, cluster_check, cluster_run,
    default_policy_set, simulate, simulate_with, slln_band_check, smooth_indicator,
    trajectory_csv_string, trajectory_sidecar_json, truncate, truncate_residual,
    write_trajectory_csv, BandOutcome, ClusterEstimate, SelectionPolicy, SimulationConfig,
    SllnError, Trajectory, PRNG_ID,
};
