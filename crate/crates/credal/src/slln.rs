//! Monte Carlo simulation of running means when an adversary picks a vertex
//! measure at every step, plus the scalar shaping functions the
//! limit-theorem arguments rely on.
//!
//! Sampling realizes the product picture: the vertex chosen at step `k` may
//! depend on the past (never the future), and the outcome is then drawn
//! from that single measure by inverse CDF. Trajectories are fully
//! determined by `(marginal, values, policy, n, seed)`; the generator
//! identity is recorded in the metadata so runs can be replayed bit-exactly.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use std::fmt;
use std::io::{self, Write};

use crate::capacity::choquet;
use crate::expectation::{lower_expect, upper_expect, upper_expect_with_vertex};
use crate::model::{linear_expect, CredalSet, ModelError, RandomVar};
use crate::parallel::indexed_map;
use crate::report::{CheckReport, FingerprintHasher};
use crate::rng::split_seed;

/// Generator identity recorded in trajectory metadata.
pub const PRNG_ID: &str = "chacha8/rand_chacha-0.3";

/// Fraction of final steps used for tail statistics unless overridden.
pub const DEFAULT_TAIL_FRACTION: f64 = 0.2;

/// Geometric spacing ratio between recorded checkpoints.
pub const CHECKPOINT_RATIO: f64 = 1.02;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum SllnError {
    Model(ModelError),
    /// The ramp width must lie strictly between 0 and 1.
    BadEpsilon { eps: f64 },
    /// The policy text or its parameters don't fit the marginal.
    BadPolicy { detail: String },
    /// Simulation or estimate configuration out of range.
    BadConfig { detail: String },
    EmptyInput { what: &'static str },
}

impl fmt::Display for SllnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SllnError::Model(e) => write!(f, "{e}"),
            SllnError::BadEpsilon { eps } => write!(f, "ramp width {eps} outside (0, 1)"),
            SllnError::BadPolicy { detail } => write!(f, "bad policy: {detail}"),
            SllnError::BadConfig { detail } => write!(f, "bad configuration: {detail}"),
            SllnError::EmptyInput { what } => write!(f, "need at least one {what}"),
        }
    }
}

impl std::error::Error for SllnError {}

impl From<ModelError> for SllnError {
    fn from(e: ModelError) -> Self {
        SllnError::Model(e)
    }
}

// ---------------------------------------------------------------------------
// Scalar shapers
// ---------------------------------------------------------------------------

/// Two-sided clipping `(-c) \/ (x /\ c)`.
pub fn truncate(x: f64, c: f64) -> f64 {
    x.clamp(-c, c)
}

/// The clipped remainder `x - truncate(x, c)`.
pub fn truncate_residual(x: f64, c: f64) -> f64 {
    x - truncate(x, c)
}

/// Smooth threshold surrogate: 0 at or below `1 - eps`, 1 at or above 1,
/// raised-cosine ramp in between; `smooth_indicator(0.75, 0.5) == 0.5`.
/// Sandwiched between the indicators of `x >= 1` and `x > 1 - eps`.
pub fn smooth_indicator(u: f64, eps: f64) -> Result<f64, SllnError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(SllnError::BadEpsilon { eps });
    }
    let t = ((u - (1.0 - eps)) / eps).clamp(0.0, 1.0);
    Ok(0.5 * (1.0 - (std::f64::consts::PI * t).cos()))
}

// ---------------------------------------------------------------------------
// Selection policies
// ---------------------------------------------------------------------------

/// Rule choosing which vertex measure drives each simulation step.
///
/// The growing-block variants alternate between the mean-maximizing and
/// mean-minimizing vertices with ever longer runs; they exist to drag the
/// running mean back and forth across the whole mean interval. Block
/// lengths that only double converge to excursions of about a third of the
/// interval radius (the alternation fixed point is `r (C-1)/(C+1)` at
/// growth factor `C`), so the squaring variant is the one that sweeps.
#[derive(Debug, Clone, PartialEq)]
pub enum SelectionPolicy {
    /// The same vertex at every step.
    FixedVertex(usize),
    /// An independent uniform vertex draw at every step.
    IidRandomVertex,
    /// Alternate max/min vertex in constant-length blocks.
    PeriodicSwitch(u64),
    /// Alternate max/min vertex in blocks that double: L, 2L, 4L, ...
    DoublingBlocks(u64),
    /// Alternate max/min vertex in blocks sized by squaring the elapsed
    /// step count: n0, n0^2, (n0 + n0^2)^2, ...
    SquaringBlocks(u64),
    /// Chase a target running mean: pick the max vertex while below it,
    /// the min vertex while above.
    GreedyDrift(f64),
    /// Cycle a fixed vertex list.
    Schedule(Vec<usize>),
}

impl SelectionPolicy {
    /// Parses the textual policy grammar:
    /// `fixed:i`, `iid-random`, `periodic:L`, `periodic-doubling:L`,
    /// `periodic-squaring:n0`, `greedy:t`, `schedule:i,j,...`.
    pub fn parse(text: &str) -> Result<Self, SllnError> {
        let bad = |detail: String| Err(SllnError::BadPolicy { detail });
        if text == "iid-random" {
            return Ok(SelectionPolicy::IidRandomVertex);
        }
        let Some((kind, arg)) = text.split_once(':') else {
            return bad(format!("unknown policy '{text}'"));
        };
        match kind {
            "fixed" => match arg.parse::<usize>() {
                Ok(i) => Ok(SelectionPolicy::FixedVertex(i)),
                Err(_) => bad(format!("fixed wants a vertex index, got '{arg}'")),
            },
            "periodic" | "periodic-doubling" | "periodic-squaring" => match arg.parse::<u64>() {
                Ok(l) if l >= 1 => Ok(match kind {
                    "periodic" => SelectionPolicy::PeriodicSwitch(l),
                    "periodic-doubling" => SelectionPolicy::DoublingBlocks(l),
                    _ => SelectionPolicy::SquaringBlocks(l),
                }),
                _ => bad(format!("{kind} wants a block length >= 1, got '{arg}'")),
            },
            "greedy" => match arg.parse::<f64>() {
                Ok(t) if t.is_finite() => Ok(SelectionPolicy::GreedyDrift(t)),
                _ => bad(format!("greedy wants a finite target, got '{arg}'")),
            },
            "schedule" => {
                let indices: Result<Vec<usize>, _> =
                    arg.split(',').map(|s| s.trim().parse::<usize>()).collect();
                match indices {
                    Ok(list) if !list.is_empty() => Ok(SelectionPolicy::Schedule(list)),
                    _ => bad(format!("schedule wants comma-separated vertex indices, got '{arg}'")),
                }
            }
            _ => bad(format!("unknown policy '{text}'")),
        }
    }

    fn validate(&self, vertices: usize) -> Result<(), SllnError> {
        let check_index = |i: usize| {
            if i < vertices {
                Ok(())
            } else {
                Err(SllnError::BadPolicy {
                    detail: format!("vertex index {i} out of range for {vertices} vertices"),
                })
            }
        };
        match self {
            SelectionPolicy::FixedVertex(i) => check_index(*i),
            SelectionPolicy::IidRandomVertex => Ok(()),
            SelectionPolicy::PeriodicSwitch(l)
            | SelectionPolicy::DoublingBlocks(l)
            | SelectionPolicy::SquaringBlocks(l) => {
                if *l >= 1 {
                    Ok(())
                } else {
                    Err(SllnError::BadPolicy { detail: "block length must be >= 1".into() })
                }
            }
            SelectionPolicy::GreedyDrift(t) => {
                if t.is_finite() {
                    Ok(())
                } else {
                    Err(SllnError::BadPolicy { detail: format!("target {t} not finite") })
                }
            }
            SelectionPolicy::Schedule(list) => {
                if list.is_empty() {
                    return Err(SllnError::BadPolicy { detail: "empty schedule".into() });
                }
                list.iter().try_for_each(|&i| check_index(i))
            }
        }
    }
}

impl fmt::Display for SelectionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectionPolicy::FixedVertex(i) => write!(f, "fixed:{i}"),
            SelectionPolicy::IidRandomVertex => write!(f, "iid-random"),
            SelectionPolicy::PeriodicSwitch(l) => write!(f, "periodic:{l}"),
            SelectionPolicy::DoublingBlocks(l) => write!(f, "periodic-doubling:{l}"),
            SelectionPolicy::SquaringBlocks(l) => write!(f, "periodic-squaring:{l}"),
            SelectionPolicy::GreedyDrift(t) => write!(f, "greedy:{t}"),
            SelectionPolicy::Schedule(list) => {
                let parts: Vec<String> = list.iter().map(|i| i.to_string()).collect();
                write!(f, "schedule:{}", parts.join(","))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: u64,
    pub running_mean: f64,
    pub vertex_index: usize,
}

/// One simulated running-mean path, reduced to geometrically spaced
/// checkpoints plus exact tail statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub seed: u64,
    pub policy: SelectionPolicy,
    pub steps: u64,
    pub checkpoints: Vec<Checkpoint>,
    /// First step of the tail window the min/max cover.
    pub tail_start: u64,
    pub tail_min: f64,
    pub tail_max: f64,
    pub final_mean: f64,
    /// When requested, running means for every step from `means_from` on.
    pub means_from: Option<u64>,
    pub means: Vec<f64>,
    pub marginal_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    /// Fraction of final steps covered by `tail_min`/`tail_max`.
    pub tail_fraction: f64,
    /// Record the full running-mean sequence from this step (1-based) on.
    pub record_means_from: Option<u64>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig { tail_fraction: DEFAULT_TAIL_FRACTION, record_means_from: None }
    }
}

struct BlockState {
    is_hi: bool,
    block_end: u64,
    len: u64,
    squaring: bool,
}

impl BlockState {
    fn new(len: u64, squaring: bool) -> Self {
        BlockState { is_hi: true, block_end: len, len, squaring }
    }

    fn vertex_at(&mut self, step: u64, hi: usize, lo: usize) -> usize {
        while step > self.block_end {
            self.len = if self.squaring {
                self.block_end.saturating_mul(self.block_end)
            } else {
                self.len.saturating_mul(2)
            };
            self.block_end = self.block_end.saturating_add(self.len);
            self.is_hi = !self.is_hi;
        }
        if self.is_hi {
            hi
        } else {
            lo
        }
    }
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut total = 0.0;
    weights
        .iter()
        .map(|w| {
            total += w;
            total
        })
        .collect()
}

fn inverse_cdf(cdf: &[f64], u: f64) -> usize {
    for (i, &c) in cdf.iter().enumerate() {
        if u < c {
            return i;
        }
    }
    cdf.len() - 1
}

/// Runs one trajectory with the default tail fraction and no dense
/// mean recording.
pub fn simulate(
    marginal: &CredalSet,
    x: &RandomVar,
    policy: &SelectionPolicy,
    n: u64,
    seed: u64,
) -> Result<Trajectory, SllnError> {
    simulate_with(marginal, x, policy, n, seed, &SimulationConfig::default())
}

pub fn simulate_with(
    marginal: &CredalSet,
    x: &RandomVar,
    policy: &SelectionPolicy,
    n: u64,
    seed: u64,
    config: &SimulationConfig,
) -> Result<Trajectory, SllnError> {
    if n < 1 {
        return Err(SllnError::BadConfig { detail: "need at least one step".into() });
    }
    if !(config.tail_fraction > 0.0 && config.tail_fraction <= 1.0) {
        return Err(SllnError::BadConfig {
            detail: format!("tail fraction {} outside (0, 1]", config.tail_fraction),
        });
    }
    if let Some(from) = config.record_means_from {
        if from < 1 {
            return Err(SllnError::BadConfig { detail: "mean recording starts at step 1".into() });
        }
    }
    policy.validate(marginal.len())?;

    let (_, hi) = upper_expect_with_vertex(marginal, x)?;
    let (_, lo) = upper_expect_with_vertex(marginal, &x.scaled(-1.0)?)?;
    let cdfs: Vec<Vec<f64>> = marginal.vertices().iter().map(|q| cumulative(q.weights())).collect();
    let values = x.values();

    let tail_len = ((config.tail_fraction * n as f64).floor() as u64).max(1);
    let tail_start = n - tail_len + 1;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blocks = match policy {
        SelectionPolicy::DoublingBlocks(l) => Some(BlockState::new(*l, false)),
        SelectionPolicy::SquaringBlocks(l) => Some(BlockState::new(*l, true)),
        _ => None,
    };

    let mut sum = 0.0;
    let mut tail_min = f64::INFINITY;
    let mut tail_max = f64::NEG_INFINITY;
    let mut checkpoints = Vec::new();
    let mut means = Vec::new();
    let mut next_checkpoint = 1u64;

    for k in 1..=n {
        let vertex = match policy {
            SelectionPolicy::FixedVertex(i) => *i,
            SelectionPolicy::IidRandomVertex => rng.gen_range(0..marginal.len()),
            SelectionPolicy::PeriodicSwitch(l) => {
                if ((k - 1) / l) % 2 == 0 {
                    hi
                } else {
                    lo
                }
            }
            SelectionPolicy::DoublingBlocks(_) | SelectionPolicy::SquaringBlocks(_) => {
                blocks.as_mut().expect("block state exists").vertex_at(k, hi, lo)
            }
            SelectionPolicy::GreedyDrift(target) => {
                let prev_mean = if k > 1 { sum / (k - 1) as f64 } else { 0.0 };
                if prev_mean < *target {
                    hi
                } else {
                    lo
                }
            }
            SelectionPolicy::Schedule(list) => list[((k - 1) % list.len() as u64) as usize],
        };
        let outcome = inverse_cdf(&cdfs[vertex], rng.gen::<f64>());
        sum += values[outcome];
        let mean = sum / k as f64;

        if k >= tail_start {
            tail_min = tail_min.min(mean);
            tail_max = tail_max.max(mean);
        }
        if let Some(from) = config.record_means_from {
            if k >= from {
                means.push(mean);
            }
        }
        if k == next_checkpoint || k == n {
            checkpoints.push(Checkpoint { step: k, running_mean: mean, vertex_index: vertex });
            let geometric = (next_checkpoint as f64 * CHECKPOINT_RATIO).ceil() as u64;
            next_checkpoint = geometric.max(k + 1);
        }
    }

    let mut h = FingerprintHasher::new();
    crate::expectation::hash_credal(&mut h, marginal);
    for &v in values {
        h.write_f64(v);
    }

    Ok(Trajectory {
        seed,
        policy: policy.clone(),
        steps: n,
        checkpoints,
        tail_start,
        tail_min,
        tail_max,
        final_mean: sum / n as f64,
        means_from: config.record_means_from,
        means,
        marginal_fingerprint: h.finish(),
    })
}

// ---------------------------------------------------------------------------
// Trajectory output
// ---------------------------------------------------------------------------

/// Checkpoint rows under the fixed header `step,running_mean,vertex_index`.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut out: W) -> io::Result<()> {
    writeln!(out, "step,running_mean,vertex_index")?;
    for c in &traj.checkpoints {
        writeln!(out, "{},{},{}", c.step, c.running_mean, c.vertex_index)?;
    }
    Ok(())
}

pub fn trajectory_csv_string(traj: &Trajectory) -> String {
    let mut buf = Vec::new();
    write_trajectory_csv(traj, &mut buf).expect("write to vec");
    String::from_utf8(buf).expect("csv is utf8")
}

/// Metadata sidecar: everything needed to reproduce the trajectory.
pub fn trajectory_sidecar_json(traj: &Trajectory) -> String {
    serde_json::json!({
        "seed": traj.seed,
        "policy": traj.policy.to_string(),
        "n": traj.steps,
        "prng": PRNG_ID,
        "marginal_fingerprint": traj.marginal_fingerprint,
    })
    .to_string()
}

// ---------------------------------------------------------------------------
// Band and cluster checks
// ---------------------------------------------------------------------------

/// Scale-aware band width `4 * sqrt(Var_max / n) * sqrt(log n)`, where
/// `Var_max` is the largest single-vertex variance of `x`. Tail means
/// escaping the mean interval widened by this much indicate bugs rather
/// than luck at any reasonable horizon.
pub fn band_delta(marginal: &CredalSet, x: &RandomVar, n: u64) -> Result<f64, SllnError> {
    if n < 2 {
        return Err(SllnError::BadConfig { detail: "band width needs at least two steps".into() });
    }
    let squared = x.map(|v| v * v)?;
    let mut var_max = 0.0f64;
    for q in marginal.vertices() {
        let mean = linear_expect(q, x)?;
        let second = linear_expect(q, &squared)?;
        var_max = var_max.max(second - mean * mean);
    }
    let n = n as f64;
    Ok(4.0 * (var_max / n).sqrt() * n.ln().sqrt())
}

/// Every trajectory's tail range must fit inside the mean interval widened
/// by `delta` on each side.
pub fn slln_band_check(
    trajectories: &[Trajectory],
    marginal: &CredalSet,
    x: &RandomVar,
    delta: f64,
) -> Result<CheckReport, SllnError> {
    if trajectories.is_empty() {
        return Err(SllnError::EmptyInput { what: "trajectory" });
    }
    let upper = upper_expect(marginal, x)?;
    let lower = lower_expect(marginal, x)?;
    let mut report = CheckReport::new("slln-band");
    for t in trajectories {
        let margin = (t.tail_max - upper).max(lower - t.tail_min);
        report.record(margin, delta, || {
            format!(
                "policy {} seed {}: tail [{}, {}] vs [{lower}, {upper}] +- {delta}",
                t.policy, t.seed, t.tail_min, t.tail_max
            )
        });
    }
    Ok(report)
}

/// Observed spread of post-burn-in running means, and how much of the mean
/// interval they visited.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterEstimate {
    /// Min and max running mean over the inspected window.
    pub interval: (f64, f64),
    /// Fraction of width-`w` bins of the mean interval visited.
    pub coverage: f64,
    pub bins_visited: usize,
    pub bins_total: usize,
}

/// Bins `[lo, hi]` at width `w` and counts the bins the means touch; means
/// beyond an endpoint count toward the edge bin.
pub fn coverage_of_means(
    means: &[f64],
    lo: f64,
    hi: f64,
    width: f64,
) -> Result<(usize, usize), SllnError> {
    if !(width > 0.0) || !width.is_finite() {
        return Err(SllnError::BadConfig { detail: format!("bin width {width} must be positive") });
    }
    if hi - lo <= width * 1e-9 {
        return Ok((1, 1));
    }
    let total = ((hi - lo) / width).ceil() as usize;
    let mut visited = vec![false; total];
    for &m in means {
        let raw = ((m - lo) / width).floor();
        let idx = (raw.max(0.0) as usize).min(total - 1);
        visited[idx] = true;
    }
    Ok((visited.iter().filter(|&&v| v).count(), total))
}

/// Burn-in used by the cluster estimate: the first `ceil(sqrt(n))` steps.
pub fn cluster_burn_in(steps: u64) -> u64 {
    (steps as f64).sqrt().ceil() as u64
}

/// Coverage of the mean interval by the trajectory's running means after a
/// square-root burn-in. The trajectory must have been simulated with dense
/// mean recording reaching back at least that far.
pub fn cluster_check(
    traj: &Trajectory,
    marginal: &CredalSet,
    x: &RandomVar,
    width: f64,
) -> Result<ClusterEstimate, SllnError> {
    let burn = cluster_burn_in(traj.steps);
    if burn >= traj.steps {
        return Err(SllnError::BadConfig {
            detail: format!("horizon {} leaves nothing after burn-in {burn}", traj.steps),
        });
    }
    let Some(from) = traj.means_from else {
        return Err(SllnError::BadConfig {
            detail: "trajectory carries no recorded means; simulate with recording".into(),
        });
    };
    if from > burn + 1 {
        return Err(SllnError::BadConfig {
            detail: format!("recorded means start at step {from}, after burn-in end {}", burn + 1),
        });
    }
    let start = (burn + 1 - from) as usize;
    let window = &traj.means[start..];
    if window.is_empty() {
        return Err(SllnError::BadConfig { detail: "empty post-burn-in window".into() });
    }
    let upper = upper_expect(marginal, x)?;
    let lower = lower_expect(marginal, x)?;
    let (lo_seen, hi_seen) = window
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &m| (a.min(m), b.max(m)));
    let (bins_visited, bins_total) = coverage_of_means(window, lower, upper, width)?;
    Ok(ClusterEstimate {
        interval: (lo_seen, hi_seen),
        coverage: bins_visited as f64 / bins_total as f64,
        bins_visited,
        bins_total,
    })
}

/// Simulates one trajectory with just enough mean recording for
/// [`cluster_check`] and runs the estimate.
pub fn cluster_run(
    marginal: &CredalSet,
    x: &RandomVar,
    policy: &SelectionPolicy,
    n: u64,
    width: f64,
    seed: u64,
) -> Result<ClusterEstimate, SllnError> {
    let config = SimulationConfig {
        tail_fraction: DEFAULT_TAIL_FRACTION,
        record_means_from: Some(cluster_burn_in(n).max(1)),
    };
    let traj = simulate_with(marginal, x, policy, n, seed, &config)?;
    cluster_check(&traj, marginal, x, width)
}

// ---------------------------------------------------------------------------
// Moment hypothesis
// ---------------------------------------------------------------------------

/// On a finite space the moment hypotheses hold exactly: the level-set
/// integral of `|X|` is finite and the excess moment vanishes beyond the
/// largest value. Reports both.
pub fn choquet_moment_condition(
    marginal: &CredalSet,
    x: &RandomVar,
) -> Result<CheckReport, SllnError> {
    let absx = x.abs();
    let cv = choquet(marginal, &absx)?.value;
    let mut report = CheckReport::new("choquet-moment");
    report.record(if cv.is_finite() { 0.0 } else { 1.0 }, 0.0, || {
        format!("level-set integral of |X| is {cv}")
    });
    let top = absx.max_value();
    for cut in [top, top + 1.0] {
        let residual = upper_expect(marginal, &absx.map(|v| (v - cut).max(0.0))?)?;
        report.record(residual.abs(), 1e-12, || {
            format!("excess moment at cut {cut} is {residual}")
        });
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Band suite
// ---------------------------------------------------------------------------

/// One representative policy per kind, aimed at the given marginal size and
/// drift target.
pub fn default_policy_set(vertices: usize, drift_target: f64) -> Vec<SelectionPolicy> {
    vec![
        SelectionPolicy::FixedVertex(0),
        SelectionPolicy::IidRandomVertex,
        SelectionPolicy::PeriodicSwitch(1_000),
        SelectionPolicy::GreedyDrift(drift_target),
        SelectionPolicy::Schedule((0..vertices).collect()),
    ]
}

#[derive(Debug, Clone)]
pub struct BandOutcome {
    pub report: CheckReport,
    pub trajectories: Vec<Trajectory>,
}

/// Simulates `per_policy` trajectories for each policy on deterministic
/// per-trajectory seeds and band-checks them all. Thread count never
/// changes the result.
pub fn band_suite(
    marginal: &CredalSet,
    x: &RandomVar,
    policies: &[SelectionPolicy],
    per_policy: u64,
    n: u64,
    seed: u64,
    delta: f64,
    threads: usize,
) -> Result<BandOutcome, SllnError> {
    if policies.is_empty() {
        return Err(SllnError::EmptyInput { what: "policy" });
    }
    let mut specs = Vec::new();
    for policy in policies {
        for _ in 0..per_policy {
            specs.push(policy.clone());
        }
    }
    let results = indexed_map(&specs, threads, |flat, policy| {
        simulate(marginal, x, policy, n, split_seed(seed, flat as u64))
    });
    let trajectories: Vec<Trajectory> = results.into_iter().collect::<Result<_, _>>()?;
    let report = slln_band_check(&trajectories, marginal, x, delta)?;
    Ok(BandOutcome { report, trajectories })
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FiniteSpace;

    fn m0() -> (CredalSet, RandomVar) {
        let space = FiniteSpace::new(vec!["lo", "hi"]).unwrap();
        let credal =
            CredalSet::from_weight_rows(&space, vec![vec![0.6, 0.4], vec![0.4, 0.6]]).unwrap();
        let x = RandomVar::new(&space, vec![-1.0, 1.0]).unwrap();
        (credal, x)
    }

    fn point_mass(c: f64) -> (CredalSet, RandomVar) {
        let space = FiniteSpace::new(vec!["only"]).unwrap();
        let credal = CredalSet::from_weight_rows(&space, vec![vec![1.0]]).unwrap();
        let x = RandomVar::new(&space, vec![c]).unwrap();
        (credal, x)
    }

    #[test]
    fn truncation_clips_both_sides() {
        assert_eq!(truncate(5.0, 2.0), 2.0);
        assert_eq!(truncate(-5.0, 2.0), -2.0);
        assert_eq!(truncate(1.5, 2.0), 1.5);
        assert_eq!(truncate_residual(5.0, 2.0), 3.0);
        assert_eq!(truncate_residual(1.5, 2.0), 0.0);
    }

    #[test]
    fn smooth_indicator_matches_reference_points() {
        assert_eq!(smooth_indicator(0.4, 0.5).unwrap(), 0.0);
        assert_eq!(smooth_indicator(1.0, 0.5).unwrap(), 1.0);
        assert_eq!(smooth_indicator(2.0, 0.5).unwrap(), 1.0);
        assert!((smooth_indicator(0.75, 0.5).unwrap() - 0.5).abs() < 1e-15);
        let mut last = -1.0;
        for i in 0..=100 {
            let u = 0.4 + 0.7 * i as f64 / 100.0;
            let g = smooth_indicator(u, 0.5).unwrap();
            assert!(g >= last);
            last = g;
        }
    }

    #[test]
    fn smooth_indicator_rejects_bad_ramp_widths() {
        for eps in [0.0, 1.0, -0.5, 2.0, f64::NAN] {
            assert!(matches!(
                smooth_indicator(0.5, eps),
                Err(SllnError::BadEpsilon { .. })
            ));
        }
    }

    #[test]
    fn policy_grammar_round_trips() {
        let policies = [
            SelectionPolicy::FixedVertex(2),
            SelectionPolicy::IidRandomVertex,
            SelectionPolicy::PeriodicSwitch(50),
            SelectionPolicy::DoublingBlocks(4),
            SelectionPolicy::SquaringBlocks(100),
            SelectionPolicy::GreedyDrift(0.2),
            SelectionPolicy::Schedule(vec![0, 1, 0]),
        ];
        for p in policies {
            let text = p.to_string();
            assert_eq!(SelectionPolicy::parse(&text).unwrap(), p, "{text}");
        }
        for bad in ["", "fixed:", "periodic:0", "schedule:", "greedy:x", "bogus", "fixed:-1"] {
            assert!(
                matches!(SelectionPolicy::parse(bad), Err(SllnError::BadPolicy { .. })),
                "{bad}"
            );
        }
    }

    #[test]
    fn point_mass_runs_exactly_flat() {
        let (credal, x) = point_mass(1.5);
        let traj = simulate(&credal, &x, &SelectionPolicy::FixedVertex(0), 10, 7).unwrap();
        assert_eq!(traj.checkpoints.len(), 10);
        for (i, c) in traj.checkpoints.iter().enumerate() {
            assert_eq!(c.step, i as u64 + 1);
            assert_eq!(c.running_mean, 1.5);
            assert_eq!(c.vertex_index, 0);
        }
        assert_eq!((traj.tail_min, traj.tail_max, traj.final_mean), (1.5, 1.5, 1.5));
        let report = slln_band_check(&[traj], &credal, &x, 0.0).unwrap();
        assert!(report.pass);
    }

    #[test]
    fn trivial_schedule_equals_fixed_vertex() {
        let (credal, x) = m0();
        let a = simulate(&credal, &x, &SelectionPolicy::FixedVertex(0), 5_000, 42).unwrap();
        let b = simulate(&credal, &x, &SelectionPolicy::Schedule(vec![0]), 5_000, 42).unwrap();
        assert_eq!(a.checkpoints, b.checkpoints);
        assert_eq!((a.tail_min, a.tail_max, a.final_mean), (b.tail_min, b.tail_max, b.final_mean));
    }

    #[test]
    fn same_seed_reproduces_different_seed_differs() {
        let (credal, x) = m0();
        let p = SelectionPolicy::IidRandomVertex;
        let a = simulate(&credal, &x, &p, 3_000, 9).unwrap();
        let b = simulate(&credal, &x, &p, 3_000, 9).unwrap();
        assert_eq!(a, b);
        let c = simulate(&credal, &x, &p, 3_000, 10).unwrap();
        assert_ne!(a.final_mean, c.final_mean);
    }

    #[test]
    fn fixed_vertex_obeys_classical_lln() {
        let (credal, x) = m0();
        let traj = simulate(&credal, &x, &SelectionPolicy::FixedVertex(0), 20_000, 11).unwrap();
        // Vertex 0 weights the -1 outcome 0.6: mean -0.2... with X(lo) = -1
        // at weight 0.6 the drift is -0.2.
        assert!((traj.final_mean + 0.2).abs() < 0.05, "{}", traj.final_mean);
    }

    #[test]
    fn greedy_drift_attains_the_upper_mean() {
        let (credal, x) = m0();
        let traj =
            simulate(&credal, &x, &SelectionPolicy::GreedyDrift(0.2), 100_000, 3).unwrap();
        assert!((traj.final_mean - 0.2).abs() < 0.02, "{}", traj.final_mean);
        assert!(traj.tail_min > 0.15, "{}", traj.tail_min);
        assert!(traj.tail_max < 0.23, "{}", traj.tail_max);
    }

    #[test]
    fn band_suite_passes_on_reference_marginal() {
        let (credal, x) = m0();
        let policies = default_policy_set(credal.len(), 0.2);
        let outcome = band_suite(&credal, &x, &policies, 3, 20_000, 17, 0.1, 2).unwrap();
        assert!(outcome.report.pass, "{:?}", outcome.report.first_failure);
        assert_eq!(outcome.trajectories.len(), 15);
        // Thread count must not change anything.
        let again = band_suite(&credal, &x, &policies, 3, 20_000, 17, 0.1, 7).unwrap();
        assert_eq!(outcome.trajectories, again.trajectories);
    }

    #[test]
    fn scale_aware_band_width_contains_every_policy() {
        let (credal, x) = m0();
        let n = 20_000;
        let delta = band_delta(&credal, &x, n).unwrap();
        // Largest vertex variance is 1 - 0.2^2 = 0.96.
        let expected = 4.0 * (0.96f64 / n as f64).sqrt() * (n as f64).ln().sqrt();
        assert!((delta - expected).abs() < 1e-12);
        let policies = default_policy_set(credal.len(), 0.2);
        let outcome = band_suite(&credal, &x, &policies, 2, n, 29, delta, 2).unwrap();
        assert!(outcome.report.pass, "{:?}", outcome.report.first_failure);
    }

    #[test]
    fn doubling_blocks_saturate_inside_the_interval() {
        let (credal, x) = m0();
        let traj =
            simulate(&credal, &x, &SelectionPolicy::DoublingBlocks(1), 300_000, 5).unwrap();
        // Alternating blocks at growth factor 2 pin the running mean near
        // +-r/3 of the interval radius r = 0.2.
        assert!(traj.tail_max < 0.1, "{}", traj.tail_max);
        assert!(traj.tail_min > -0.1, "{}", traj.tail_min);
        let est = cluster_run(&credal, &x, &SelectionPolicy::DoublingBlocks(1), 300_000, 0.05, 5)
            .unwrap();
        assert!(est.coverage < 0.9, "{}", est.coverage);
    }

    #[test]
    fn squaring_blocks_sweep_the_interval() {
        let (credal, x) = m0();
        let est = cluster_run(&credal, &x, &SelectionPolicy::SquaringBlocks(50), 1_000_000, 0.05, 5)
            .unwrap();
        assert!(est.coverage >= 0.9, "{}", est.coverage);
        assert!(est.interval.0 < -0.15 && est.interval.1 > 0.15, "{:?}", est.interval);
    }

    #[test]
    fn coverage_is_monotone_on_nested_windows() {
        let (credal, x) = m0();
        let config = SimulationConfig { tail_fraction: 0.2, record_means_from: Some(101) };
        let traj = simulate_with(
            &credal,
            &x,
            &SelectionPolicy::DoublingBlocks(2),
            100_000,
            23,
            &config,
        )
        .unwrap();
        let mut last = 0;
        for cut in [1_000, 10_000, 100_000 - 100] {
            let (visited, _) =
                coverage_of_means(&traj.means[..cut], -0.2, 0.2, 0.05).unwrap();
            assert!(visited >= last);
            last = visited;
        }
    }

    #[test]
    fn cluster_check_demands_recorded_means() {
        let (credal, x) = m0();
        let traj = simulate(&credal, &x, &SelectionPolicy::PeriodicSwitch(10), 10_000, 1).unwrap();
        assert!(matches!(
            cluster_check(&traj, &credal, &x, 0.05),
            Err(SllnError::BadConfig { .. })
        ));
    }

    #[test]
    fn degenerate_interval_has_full_coverage() {
        let (credal, x) = point_mass(0.7);
        let est =
            cluster_run(&credal, &x, &SelectionPolicy::FixedVertex(0), 10_000, 0.05, 2).unwrap();
        assert_eq!(est.coverage, 1.0);
        assert_eq!((est.bins_visited, est.bins_total), (1, 1));
    }

    #[test]
    fn csv_layout_is_fixed() {
        let (credal, x) = point_mass(1.5);
        let traj = simulate(&credal, &x, &SelectionPolicy::FixedVertex(0), 3, 0).unwrap();
        let csv = trajectory_csv_string(&traj);
        assert_eq!(csv, "step,running_mean,vertex_index\n1,1.5,0\n2,1.5,0\n3,1.5,0\n");
    }

    #[test]
    fn sidecar_carries_exactly_the_reproduction_keys() {
        let (credal, x) = m0();
        let traj = simulate(&credal, &x, &SelectionPolicy::PeriodicSwitch(7), 50, 123).unwrap();
        let value: serde_json::Value =
            serde_json::from_str(&trajectory_sidecar_json(&traj)).unwrap();
        let obj = value.as_object().unwrap();
        let mut keys: Vec<&str> = obj.keys().map(|k| k.as_str()).collect();
        keys.sort_unstable();
        assert_eq!(keys, vec!["marginal_fingerprint", "n", "policy", "prng", "seed"]);
        assert_eq!(obj["policy"], "periodic:7");
        assert_eq!(obj["n"], 50);
        assert_eq!(obj["prng"], PRNG_ID);
    }

    #[test]
    fn checkpoint_steps_strictly_increase_and_space_out() {
        let (credal, x) = m0();
        let traj = simulate(&credal, &x, &SelectionPolicy::FixedVertex(1), 100_000, 2).unwrap();
        for pair in traj.checkpoints.windows(2) {
            assert!(pair[1].step > pair[0].step);
        }
        assert_eq!(traj.checkpoints.last().unwrap().step, 100_000);
        // Geometric spacing keeps the record compact.
        assert!(traj.checkpoints.len() < 1_000, "{}", traj.checkpoints.len());
    }

    #[test]
    fn moment_condition_holds_exactly() {
        let (credal, x) = m0();
        let report = choquet_moment_condition(&credal, &x).unwrap();
        assert!(report.pass);
        assert_eq!(report.cases, 3);
        let (pm, pv) = point_mass(0.0);
        assert!(choquet_moment_condition(&pm, &pv).unwrap().pass);
    }
}
