//! Brute-force recomputation of everything the fast engines produce.
//!
//! The adaptive semantics are recomputed by enumerating complete adversary
//! strategies — one vertex choice per observable history — and taking the
//! best induced expectation, instead of dynamic-programming elimination.
//! The product semantics is recomputed by enumerating vertex tuples
//! outright. These paths share no evaluation code with
//! [`crate::sequence::eval_upper`], so agreement between the two is a real
//! cross-check.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use std::fmt;

use crate::model::{CredalSet, ModelError, RandomVar};
use crate::report::CheckReport;
use crate::rng::split_seed;
use crate::sequence::{
    generate_monotone_functional, Dependence, Functional, SequenceError, SequenceModel,
};

/// Cap on enumerated adversary strategies.
pub const STRATEGY_BUDGET: u128 = 1_000_000;

/// Cap on enumerated vertex tuples.
pub const TUPLE_BUDGET: u128 = 1_000_000;

/// Cap on 0/1 candidate tables per block in [`oracle_nd_scan`] (as a grid
/// cell count; the candidate count is `2^cells`).
pub const SCAN_CELL_BUDGET: usize = 12;

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum OracleError {
    Model(ModelError),
    Sequence(SequenceError),
    BudgetExceeded { needed: u128, budget: u128 },
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::Model(e) => write!(f, "{e}"),
            OracleError::Sequence(e) => write!(f, "{e}"),
            OracleError::BudgetExceeded { needed, budget } => {
                write!(f, "oracle needs {needed} enumerations, budget is {budget}")
            }
        }
    }
}

impl std::error::Error for OracleError {}

impl From<ModelError> for OracleError {
    fn from(e: ModelError) -> Self {
        OracleError::Model(e)
    }
}

impl From<SequenceError> for OracleError {
    fn from(e: SequenceError) -> Self {
        OracleError::Sequence(e)
    }
}

// ---------------------------------------------------------------------------
// Tensor plumbing (kept local on purpose; see module docs)
// ---------------------------------------------------------------------------

/// Evaluates `f` on the joint grid, coordinate 0 slowest, by explicit index
/// decoding per cell.
fn fill_tensor(model: &SequenceModel, f: &Functional) -> Result<Vec<f64>, OracleError> {
    let n = model.horizon();
    let m = model.marginal().space().size();
    let cells = m.pow(n as u32);
    let mut tensor = Vec::with_capacity(cells);
    let mut point = vec![0.0; n];
    for cell in 0..cells {
        let mut rest = cell;
        for k in (0..n).rev() {
            point[k] = model.coords()[k].values()[rest % m];
            rest /= m;
        }
        tensor.push(f.eval(&point)?);
    }
    Ok(tensor)
}

/// Reverses the coordinate order of a row-major tensor.
fn reverse_axes(tensor: &[f64], m: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; tensor.len()];
    for (cell, &v) in tensor.iter().enumerate() {
        let mut rest = cell;
        let mut rev = 0;
        for _ in 0..n {
            rev = rev * m + rest % m;
            rest /= m;
        }
        out[rev] = v;
    }
    out
}

fn pow_u128(base: u128, exp: u32) -> u128 {
    base.checked_pow(exp).unwrap_or(u128::MAX)
}

// ---------------------------------------------------------------------------
// Strategy enumeration
// ---------------------------------------------------------------------------

/// Number of observable histories a forward strategy must cover:
/// `1 + m + .. + m^{n-1}`.
fn history_count(m: usize, n: usize) -> u128 {
    let mut total: u128 = 0;
    let mut level: u128 = 1;
    for _ in 0..n {
        total = total.saturating_add(level);
        level = level.saturating_mul(m as u128);
    }
    total
}

/// Expectation induced by one complete strategy on a tensor: at each history
/// node the assigned vertex integrates the next coordinate.
fn strategy_value(
    tensor: &[f64],
    m: usize,
    n: usize,
    marginal: &CredalSet,
    strategy: &[usize],
    level_base: &[usize],
) -> f64 {
    fn walk(
        tensor: &[f64],
        m: usize,
        n: usize,
        marginal: &CredalSet,
        strategy: &[usize],
        level_base: &[usize],
        level: usize,
        offset: usize,
        cell_base: usize,
    ) -> f64 {
        let q = marginal.vertices()[strategy[level_base[level] + offset]].weights();
        let stride = m.pow((n - 1 - level) as u32);
        let mut total = 0.0;
        for (s, w) in q.iter().enumerate() {
            let contribution = if level + 1 == n {
                tensor[cell_base + s * stride]
            } else {
                walk(
                    tensor,
                    m,
                    n,
                    marginal,
                    strategy,
                    level_base,
                    level + 1,
                    offset * m + s,
                    cell_base + s * stride,
                )
            };
            total += w * contribution;
        }
        total
    }
    walk(tensor, m, n, marginal, strategy, level_base, 0, 0, 0)
}

/// Maximum over all complete forward strategies, on a raw tensor.
fn forward_oracle_on_tensor(
    tensor: &[f64],
    m: usize,
    n: usize,
    marginal: &CredalSet,
) -> Result<f64, OracleError> {
    let verts = marginal.len();
    let histories = history_count(m, n);
    let strategies = pow_u128(verts as u128, histories.min(u128::from(u32::MAX)) as u32);
    if strategies > STRATEGY_BUDGET {
        return Err(OracleError::BudgetExceeded { needed: strategies, budget: STRATEGY_BUDGET });
    }
    let histories = histories as usize;
    let mut level_base = vec![0usize; n];
    for k in 1..n {
        level_base[k] = level_base[k - 1] + m.pow((k - 1) as u32);
    }
    let mut strategy = vec![0usize; histories];
    let mut best = f64::NEG_INFINITY;
    loop {
        let v = strategy_value(tensor, m, n, marginal, &strategy, &level_base);
        if v > best {
            best = v;
        }
        // Odometer over vertex assignments.
        let mut pos = 0;
        loop {
            if pos == histories {
                return Ok(best);
            }
            strategy[pos] += 1;
            if strategy[pos] < verts {
                break;
            }
            strategy[pos] = 0;
            pos += 1;
        }
    }
}

/// Upper joint expectation by strategy enumeration, honoring the model's
/// dependence semantics. The backward order is handled by reversing the
/// tensor axes and enumerating forward strategies on the reversal.
pub fn oracle_upper(model: &SequenceModel, f: &Functional) -> Result<f64, OracleError> {
    let m = model.marginal().space().size();
    let n = model.horizon();
    match model.semantics() {
        Dependence::PengForward => {
            let tensor = fill_tensor(model, f)?;
            forward_oracle_on_tensor(&tensor, m, n, model.marginal())
        }
        Dependence::PengBackward => {
            let tensor = fill_tensor(model, f)?;
            let reversed = reverse_axes(&tensor, m, n);
            forward_oracle_on_tensor(&reversed, m, n, model.marginal())
        }
        Dependence::QwiseProduct => {
            let tensor = fill_tensor(model, f)?;
            qwise_oracle_on_tensor(&tensor, m, n, model.marginal())
        }
    }
}

/// Lower expectation by conjugation of the enumerated upper value.
pub fn oracle_lower(model: &SequenceModel, f: &Functional) -> Result<f64, OracleError> {
    Ok(-oracle_upper(model, &f.negated())?)
}

/// Maximum product-measure expectation over explicit vertex tuples.
fn qwise_oracle_on_tensor(
    tensor: &[f64],
    m: usize,
    n: usize,
    marginal: &CredalSet,
) -> Result<f64, OracleError> {
    let verts = marginal.len();
    let tuples = pow_u128(verts as u128, n as u32);
    if tuples > TUPLE_BUDGET {
        return Err(OracleError::BudgetExceeded { needed: tuples, budget: TUPLE_BUDGET });
    }
    let mut tuple = vec![0usize; n];
    let mut best = f64::NEG_INFINITY;
    loop {
        let mut total = 0.0;
        for (cell, &v) in tensor.iter().enumerate() {
            let mut rest = cell;
            let mut weight = 1.0;
            for k in (0..n).rev() {
                weight *= marginal.vertices()[tuple[k]].weights()[rest % m];
                rest /= m;
            }
            total += weight * v;
        }
        if total > best {
            best = total;
        }
        let mut pos = 0;
        loop {
            if pos == n {
                return Ok(best);
            }
            tuple[pos] += 1;
            if tuple[pos] < verts {
                break;
            }
            tuple[pos] = 0;
            pos += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// Choquet by quadrature
// ---------------------------------------------------------------------------

/// Choquet integral of `x` against the upper capacity, computed from the
/// two-sided level representation by midpoint quadrature on the exact
/// breakpoint partition: `V(X >= t)` is piecewise constant with jumps only
/// at attained values, so midpoints integrate it exactly.
pub fn oracle_choquet(p: &CredalSet, x: &RandomVar) -> Result<f64, ModelError> {
    let mut cuts: Vec<f64> = x.values().to_vec();
    cuts.push(0.0);
    cuts.push(x.min_value().min(0.0) - 1.0);
    cuts.push(x.max_value().max(0.0) + 1.0);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for pair in cuts.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let mid = 0.5 * (lo + hi);
        let level = x.event_ge(mid);
        let mut v: f64 = 0.0;
        for q in p.vertices() {
            v = v.max(q.prob(&level)?);
        }
        let integrand = if mid >= 0.0 { v } else { v - 1.0 };
        total += integrand * (hi - lo);
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Exhaustive monotone-pair scan
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct NdScanConfig {
    /// Number of generated smooth ramp pairs checked in addition to the
    /// exhaustive 0/1 tables.
    pub smooth_pairs: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for NdScanConfig {
    fn default() -> Self {
        NdScanConfig { smooth_pairs: 0, seed: 0, tol: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy)]
struct TableDirection {
    nondecreasing: bool,
    nonincreasing: bool,
}

/// Axis-wise finite differences of a block table in value-sorted outcome
/// order.
fn table_direction(table: &[f64], m: usize, arity: usize, coords: &[RandomVar]) -> TableDirection {
    let mut nondec = true;
    let mut noninc = true;
    for axis in 0..arity {
        let vals = coords[axis].values();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let stride = m.pow((arity - 1 - axis) as u32);
        let outer = table.len() / (m * stride);
        for o in 0..outer {
            for s in 0..stride {
                let base = o * m * stride + s;
                for w in order.windows(2) {
                    if vals[w[1]] == vals[w[0]] {
                        continue;
                    }
                    let lo = table[base + w[0] * stride];
                    let hi = table[base + w[1] * stride];
                    if hi < lo - 1e-12 {
                        nondec = false;
                    }
                    if hi > lo + 1e-12 {
                        noninc = false;
                    }
                }
            }
        }
    }
    TableDirection { nondecreasing: nondec, nonincreasing: noninc }
}

/// Exhaustively checks the product bound across a split for *every* pair of
/// monotone 0/1 tables on the two blocks (plus optional generated smooth
/// pairs). Pairs without a common monotone direction are counted as
/// inapplicable; for the rest the bound `upper(product) <= upper * upper`
/// is recomputed entirely through the enumeration oracles.
pub fn oracle_nd_scan(
    model: &SequenceModel,
    split: usize,
    config: &NdScanConfig,
) -> Result<CheckReport, OracleError> {
    let n = model.horizon();
    let m = model.marginal().space().size();
    assert!(split > 0 && split < n, "split must be interior");
    let left_arity = split;
    let right_arity = n - split;
    let left_cells = m.pow(left_arity as u32);
    let right_cells = m.pow(right_arity as u32);
    if left_cells > SCAN_CELL_BUDGET || right_cells > SCAN_CELL_BUDGET {
        return Err(OracleError::BudgetExceeded {
            needed: left_cells.max(right_cells) as u128,
            budget: SCAN_CELL_BUDGET as u128,
        });
    }

    let left_coords = &model.coords()[..split];
    let right_coords = &model.coords()[split..];

    let monotone_tables = |cells: usize, arity: usize, coords: &[RandomVar]| {
        let mut out: Vec<(Vec<f64>, TableDirection)> = Vec::new();
        for mask in 0u32..(1 << cells) {
            let table: Vec<f64> =
                (0..cells).map(|c| f64::from(mask >> c & 1)).collect();
            let dir = table_direction(&table, m, arity, coords);
            if dir.nondecreasing || dir.nonincreasing {
                out.push((table, dir));
            }
        }
        out
    };
    let left_tables = monotone_tables(left_cells, left_arity, left_coords);
    let right_tables = monotone_tables(right_cells, right_arity, right_coords);

    let mut report = CheckReport::new("nd-scan");
    let check_pair = |t1: &[f64],
                          t2: &[f64],
                          label: &str,
                          report: &mut CheckReport|
     -> Result<(), OracleError> {
        let joint: Vec<f64> = t1
            .iter()
            .flat_map(|&a| t2.iter().map(move |&b| a * b))
            .collect();
        let lhs = match model.semantics() {
            Dependence::PengForward => forward_oracle_on_tensor(&joint, m, n, model.marginal())?,
            Dependence::PengBackward => {
                let reversed = reverse_axes(&joint, m, n);
                forward_oracle_on_tensor(&reversed, m, n, model.marginal())?
            }
            Dependence::QwiseProduct => qwise_oracle_on_tensor(&joint, m, n, model.marginal())?,
        };
        let block_value = |table: &[f64], arity: usize| -> Result<f64, OracleError> {
            match model.semantics() {
                Dependence::PengForward => {
                    forward_oracle_on_tensor(table, m, arity, model.marginal())
                }
                Dependence::PengBackward => {
                    let reversed = reverse_axes(table, m, arity);
                    forward_oracle_on_tensor(&reversed, m, arity, model.marginal())
                }
                Dependence::QwiseProduct => {
                    qwise_oracle_on_tensor(table, m, arity, model.marginal())
                }
            }
        };
        let rhs = block_value(t1, left_arity)? * block_value(t2, right_arity)?;
        report.record(lhs - rhs, config.tol, || {
            format!("{label}: joint {lhs} exceeds product {rhs}")
        });
        Ok(())
    };

    for (i, (t1, d1)) in left_tables.iter().enumerate() {
        for (j, (t2, d2)) in right_tables.iter().enumerate() {
            let compatible = (d1.nondecreasing && d2.nondecreasing)
                || (d1.nonincreasing && d2.nonincreasing);
            if !compatible {
                report.record_inapplicable();
                continue;
            }
            check_pair(t1, t2, &format!("step pair ({i},{j})"), &mut report)?;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for pair in 0..config.smooth_pairs {
        let nonincreasing = rng.gen::<bool>();
        let f1 = generate_monotone_functional(
            left_arity,
            nonincreasing,
            split_seed(config.seed, 2 * pair as u64),
        );
        let f2 = generate_monotone_functional(
            right_arity,
            nonincreasing,
            split_seed(config.seed, 2 * pair as u64 + 1),
        );
        let left_block = model.block(0..split)?;
        let right_block = model.block(split..n)?;
        let t1 = fill_tensor(&left_block, &f1)?;
        let t2 = fill_tensor(&right_block, &f2)?;
        check_pair(&t1, &t2, &format!("smooth pair {pair}"), &mut report)?;
    }

    Ok(report)
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FiniteSpace;
    use crate::expr::ExprAst;
    use crate::rng::{plain_space, random_credal, random_var};
    use crate::sequence::{eval_upper, Post};

    fn m0() -> (CredalSet, RandomVar) {
        let space = FiniteSpace::new(vec!["-1", "+1"]).unwrap();
        let x = RandomVar::new(&space, vec![-1.0, 1.0]).unwrap();
        let credal =
            CredalSet::from_weight_rows(&space, vec![vec![0.6, 0.4], vec![0.4, 0.6]]).unwrap();
        (credal, x)
    }

    #[test]
    fn oracle_matches_hand_values_on_product_functional() {
        let (credal, x) = m0();
        let ast = ExprAst::Mul(Box::new(ExprAst::Var(0)), Box::new(ExprAst::Var(1)));
        let f = Functional::expr(ast, 2);
        let fwd = SequenceModel::iid(&credal, &x, 2, Dependence::PengForward).unwrap();
        let qw = SequenceModel::iid(&credal, &x, 2, Dependence::QwiseProduct).unwrap();
        assert!((oracle_upper(&fwd, &f).unwrap() - 0.2).abs() < 1e-12);
        assert!((oracle_upper(&qw, &f).unwrap() - 0.04).abs() < 1e-12);
    }

    #[test]
    fn oracle_agrees_with_engine_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for trial in 0..40 {
            let m = rng.gen_range(2..=3);
            let n = if m == 2 { rng.gen_range(1..=3) } else { rng.gen_range(1..=2) };
            let verts = rng.gen_range(1..=2);
            let space = plain_space(m);
            let credal = random_credal(&mut rng, &space, verts);
            let x = random_var(&mut rng, &space, -2.0, 2.0);
            let f = match trial % 4 {
                0 => Functional::max_partial_sum(n).with_post(Post::Power(2.0)),
                1 => Functional::sum_power(n, 2.0),
                2 => generate_monotone_functional(n, false, 100 + trial),
                _ => Functional::max_abs_tail_sum(n).with_post(Post::Power(3.0)),
            };
            for sem in
                [Dependence::PengForward, Dependence::PengBackward, Dependence::QwiseProduct]
            {
                let model = SequenceModel::iid(&credal, &x, n, sem).unwrap();
                let fast = eval_upper(&model, &f).unwrap();
                let slow = oracle_upper(&model, &f).unwrap();
                assert!(
                    (fast - slow).abs() <= 1e-12 * fast.abs().max(1.0),
                    "trial {trial} {sem}: engine {fast} vs oracle {slow}"
                );
                let fast_lo = crate::sequence::eval_lower(&model, &f).unwrap();
                let slow_lo = oracle_lower(&model, &f).unwrap();
                assert!(
                    (fast_lo - slow_lo).abs() <= 1e-12 * fast_lo.abs().max(1.0),
                    "trial {trial} {sem} lower: engine {fast_lo} vs oracle {slow_lo}"
                );
            }
        }
    }

    #[test]
    fn strategy_budget_is_enforced() {
        let (credal, x) = m0();
        // Three vertices on a 3-outcome space, horizon 13 histories would
        // blow past the cap; horizon 5 with 3 vertices: histories = 31,
        // 3^31 >> budget.
        let space = plain_space(3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let credal3 = random_credal(&mut rng, &space, 3);
        let y = random_var(&mut rng, &space, -1.0, 1.0);
        let model = SequenceModel::iid(&credal3, &y, 5, Dependence::PengForward).unwrap();
        let err = oracle_upper(&model, &Functional::sum(5)).unwrap_err();
        assert!(matches!(err, OracleError::BudgetExceeded { .. }));
        drop((credal, x));
    }

    #[test]
    fn choquet_quadrature_matches_hand_value() {
        let (credal, x) = m0();
        let v = oracle_choquet(&credal, &x).unwrap();
        assert!((v - 0.2).abs() < 1e-12, "{v}");
        let v_abs = oracle_choquet(&credal, &x.abs()).unwrap();
        assert!((v_abs - 1.0).abs() < 1e-12, "{v_abs}");
    }

    #[test]
    fn nd_scan_exhausts_step_pairs_on_two_point_space() {
        let (credal, x) = m0();
        for sem in [Dependence::PengForward, Dependence::PengBackward, Dependence::QwiseProduct] {
            let model = SequenceModel::iid(&credal, &x, 2, sem).unwrap();
            let report = oracle_nd_scan(
                &model,
                1,
                &NdScanConfig { smooth_pairs: 10, seed: 7, tol: 1e-9 },
            )
            .unwrap();
            // Monotone 0/1 tables on {-1,+1}: 00, 11, 01 (nondecreasing),
            // 10 (nonincreasing); 16 ordered pairs, 2 direction-mismatched.
            assert_eq!(report.cases, 14 + 10, "{sem}");
            assert_eq!(report.inapplicable, 2, "{sem}");
            assert_eq!(report.failures, 0, "{sem}: {report:?}");
            assert!(report.pass);
        }
    }
}
