//! Upper and lower capacities induced by a credal set, Choquet integration,
//! and the envelope/subadditivity/tail-bound checks built on them.

use std::fmt;

use crate::expectation::{hash_credal, upper_expect};
use crate::model::{CredalSet, EventSet, ModelError, RandomVar};
use crate::report::{FingerprintHasher, InequalityReport};
use crate::slln::smooth_indicator;

/// Outcome-count cap for the exponential partition scan in
/// [`outer_capacity`].
pub const OUTER_SPACE_MAX: usize = 12;

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum CapacityError {
    Model(ModelError),
    /// The partition scan is exponential in the outcome count and refuses
    /// spaces beyond [`OUTER_SPACE_MAX`].
    SpaceTooLarge { size: usize, max: usize },
    BadInput { detail: String },
}

impl fmt::Display for CapacityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CapacityError::Model(e) => write!(f, "{e}"),
            CapacityError::SpaceTooLarge { size, max } => {
                write!(f, "space of size {size} exceeds partition-scan cap {max}")
            }
            CapacityError::BadInput { detail } => write!(f, "bad input: {detail}"),
        }
    }
}

impl std::error::Error for CapacityError {}

impl From<ModelError> for CapacityError {
    fn from(e: ModelError) -> Self {
        CapacityError::Model(e)
    }
}

// ---------------------------------------------------------------------------
// Capacities
// ---------------------------------------------------------------------------

/// `V(A)`: the largest probability any vertex assigns to the event.
pub fn upper_capacity(p: &CredalSet, event: &EventSet) -> Result<f64, ModelError> {
    if event.space() != p.space() {
        return Err(ModelError::SpaceMismatch);
    }
    let mut best: f64 = 0.0;
    for q in p.vertices() {
        best = best.max(q.prob(event)?);
    }
    Ok(best)
}

/// The conjugate capacity `1 - V(complement)`, the smallest probability any
/// vertex assigns.
pub fn lower_capacity(p: &CredalSet, event: &EventSet) -> Result<f64, ModelError> {
    Ok(1.0 - upper_capacity(p, &event.complement())?)
}

// ---------------------------------------------------------------------------
// Choquet integration
// ---------------------------------------------------------------------------

/// A Choquet integral together with the level decomposition it was computed
/// from: `level_points` are the sorted attained values, `level_capacities`
/// the matching `V(X >= level)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoquetResult {
    pub value: f64,
    pub level_points: Vec<f64>,
    pub level_capacities: Vec<f64>,
}

/// Choquet integral of `x` against the upper capacity, by the sorted-level
/// telescoping sum `x_(1) + sum_{i>=2} (x_(i) - x_(i-1)) V(X >= x_(i))`.
pub fn choquet(p: &CredalSet, x: &RandomVar) -> Result<ChoquetResult, ModelError> {
    if x.space() != p.space() {
        return Err(ModelError::SpaceMismatch);
    }
    let mut sorted: Vec<f64> = x.values().to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut capacities = Vec::with_capacity(sorted.len());
    let mut value = sorted[0];
    capacities.push(1.0);
    for i in 1..sorted.len() {
        let v = upper_capacity(p, &x.event_ge(sorted[i]))?;
        capacities.push(v);
        value += (sorted[i] - sorted[i - 1]) * v;
    }
    Ok(ChoquetResult { value, level_points: sorted, level_capacities: capacities })
}

/// Compares the exact sorted-level Choquet value with a midpoint Riemann sum
/// of the two-sided level integral. The range spans `[min-1, max+1]` widened
/// to include 0: the integrand `V(X >= t)` (for `t >= 0`) or `V(X >= t) - 1`
/// (for `t < 0`) is still nonzero between the attained values and 0 when `x`
/// is sign-definite. It is piecewise constant with total variation at most 2,
/// so the discrepancy is bounded by `grid_step` times the range width.
pub fn choquet_vs_riemann(
    p: &CredalSet,
    x: &RandomVar,
    grid_step: f64,
) -> Result<InequalityReport, CapacityError> {
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(CapacityError::BadInput {
            detail: format!("grid step {grid_step} must be positive and finite"),
        });
    }
    let exact = choquet(p, x)?.value;
    let lo = (x.min_value() - 1.0).min(0.0);
    let hi = (x.max_value() + 1.0).max(0.0);
    let cells = ((hi - lo) / grid_step).ceil() as usize;
    let mut riemann = 0.0;
    for c in 0..cells {
        let a = lo + c as f64 * grid_step;
        let b = (a + grid_step).min(hi);
        let mid = 0.5 * (a + b);
        let v = upper_capacity(p, &x.event_ge(mid))?;
        let integrand = if mid >= 0.0 { v } else { v - 1.0 };
        riemann += integrand * (b - a);
    }
    let mut h = FingerprintHasher::new();
    hash_credal(&mut h, p);
    for &v in x.values() {
        h.write_f64(v);
    }
    h.write_f64(grid_step);
    Ok(InequalityReport::new(
        "choquet-riemann",
        (exact - riemann).abs(),
        grid_step * (hi - lo),
        1.0,
        "midpoint rule error bound: step times integration range, from total variation <= 2",
        h.finish(),
        0,
    ))
}

// ---------------------------------------------------------------------------
// Outer envelope and subadditivity
// ---------------------------------------------------------------------------

/// The partition envelope `min over partitions of the event of sum V(part)`,
/// by dynamic programming over subsets (each subset's best partition reuses
/// the block containing its lowest member). Since `V` is a maximum of
/// measures it is subadditive and the envelope coincides with `V`; the scan
/// verifies that from first principles rather than assuming it.
pub fn outer_capacity(p: &CredalSet, event: &EventSet) -> Result<f64, CapacityError> {
    let size = p.space().size();
    if size > OUTER_SPACE_MAX {
        return Err(CapacityError::SpaceTooLarge { size, max: OUTER_SPACE_MAX });
    }
    if event.space() != p.space() {
        return Err(CapacityError::Model(ModelError::SpaceMismatch));
    }
    let members: Vec<usize> = event.indices();
    let k = members.len();
    if k == 0 {
        return Ok(0.0);
    }
    let full = 1usize << k;
    // Raw capacity of each subset of the event.
    let mut raw = vec![0.0f64; full];
    for mask in 1..full {
        let indices: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).map(|i| members[i]).collect();
        let sub = EventSet::from_indices(p.space(), &indices)?;
        raw[mask] = upper_capacity(p, &sub)?;
    }
    let mut best = vec![0.0f64; full];
    for mask in 1..full {
        let mut value = raw[mask];
        let low = mask & mask.wrapping_neg();
        // Proper submasks containing the lowest member.
        let mut sub = (mask - 1) & mask;
        while sub != 0 {
            if sub & low != 0 {
                let candidate = best[sub] + best[mask ^ sub];
                if candidate < value {
                    value = candidate;
                }
            }
            sub = (sub - 1) & mask;
        }
        best[mask] = value;
    }
    Ok(best[full - 1])
}

/// Verifies `V*(union of events) <= sum of V*(event)` for an explicit event
/// list, with both sides computed through the partition envelope.
pub fn countable_subadd_check(
    p: &CredalSet,
    events: &[EventSet],
) -> Result<InequalityReport, CapacityError> {
    if events.is_empty() {
        return Err(CapacityError::BadInput { detail: "event list is empty".into() });
    }
    let mut union = events[0].clone();
    for e in &events[1..] {
        union = union.union(e)?;
    }
    let lhs = outer_capacity(p, &union)?;
    let mut rhs = 0.0;
    for e in events {
        rhs += outer_capacity(p, e)?;
    }
    let mut h = FingerprintHasher::new();
    hash_credal(&mut h, p);
    h.write_u64(events.len() as u64);
    for e in events {
        for &m in e.members() {
            h.write_u64(u64::from(m));
        }
    }
    Ok(InequalityReport::new(
        "countable-subadditivity",
        lhs,
        rhs,
        1.0,
        "partition envelope of a union against the sum of envelopes",
        h.finish(),
        0,
    ))
}

// ---------------------------------------------------------------------------
// Tail and domination bounds
// ---------------------------------------------------------------------------

/// Verifies the summability bound used for truncation arguments: partial
/// sums of `upper[(|X| /\ j)^2] / j^2` stay below
/// `2 + 3 (1 + sum_{i>=1} V(|X| > i))`; the integer tail sum is finite
/// because the variable is bounded.
pub fn truncated_second_moment_bound(
    p: &CredalSet,
    x: &RandomVar,
    jmax: usize,
) -> Result<InequalityReport, CapacityError> {
    if jmax == 0 {
        return Err(CapacityError::BadInput { detail: "jmax must be at least 1".into() });
    }
    let magnitude = x.abs();
    let mut lhs = 0.0;
    for j in 1..=jmax {
        let cap = j as f64;
        let clipped = magnitude.map(|v| v.min(cap).powi(2))?;
        lhs += upper_expect(p, &clipped)? / (cap * cap);
    }
    let top = magnitude.max_value();
    let mut tail_sum = 0.0;
    let mut i = 1.0;
    while i < top {
        tail_sum += upper_capacity(p, &magnitude.event_gt(i))?;
        i += 1.0;
    }
    let rhs = 2.0 + 3.0 * (1.0 + tail_sum);
    let mut h = FingerprintHasher::new();
    hash_credal(&mut h, p);
    for &v in x.values() {
        h.write_f64(v);
    }
    h.write_u64(jmax as u64);
    Ok(InequalityReport::new(
        "truncated-second-moment",
        lhs,
        rhs,
        3.0,
        "clipped second moments against three times the integer tail sum, plus absolute terms",
        h.finish(),
        0,
    ))
}

/// Verifies that the upper expectation of `|X|` never exceeds its Choquet
/// integral: per vertex the linear expectation is the integral of that
/// vertex's tail probabilities, each dominated by the upper capacity.
pub fn mean_choquet_domination(
    p: &CredalSet,
    x: &RandomVar,
) -> Result<InequalityReport, ModelError> {
    let magnitude = x.abs();
    let lhs = upper_expect(p, &magnitude)?;
    let rhs = choquet(p, &magnitude)?.value;
    let mut h = FingerprintHasher::new();
    hash_credal(&mut h, p);
    for &v in x.values() {
        h.write_f64(v);
    }
    Ok(InequalityReport::new(
        "mean-choquet-domination",
        lhs,
        rhs,
        1.0,
        "levelwise: each vertex tail probability is below the upper capacity",
        h.finish(),
        0,
    ))
}

/// Sandwiches a tail capacity between expectations of a smooth threshold
/// surrogate: `V(X >= c) <= upper[g((X/c - (1-eps))/eps)] <= V(X > c(1-eps))`
/// by pointwise comparison with the two indicators. Returns the lower and
/// upper comparisons as two reports.
pub fn smooth_indicator_sandwich(
    p: &CredalSet,
    x: &RandomVar,
    c: f64,
    eps: f64,
) -> Result<Vec<InequalityReport>, CapacityError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(CapacityError::BadInput { detail: format!("threshold {c} must be positive") });
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(CapacityError::BadInput { detail: format!("eps {eps} must be in (0,1)") });
    }
    let surrogate = x.map(|v| smooth_indicator(v / c, eps).expect("eps checked above"))?;
    let mid = upper_expect(p, &surrogate)?;
    let below = upper_capacity(p, &x.event_ge(c))?;
    let above = upper_capacity(p, &x.event_gt(c * (1.0 - eps)))?;
    let mut h = FingerprintHasher::new();
    hash_credal(&mut h, p);
    for &v in x.values() {
        h.write_f64(v);
    }
    h.write_f64(c).write_f64(eps);
    let fingerprint = h.finish();
    Ok(vec![
        InequalityReport::new(
            "smooth-indicator-lower",
            below,
            mid,
            1.0,
            "hard indicator of the threshold is below the smooth surrogate pointwise",
            fingerprint.clone(),
            0,
        ),
        InequalityReport::new(
            "smooth-indicator-upper",
            mid,
            above,
            1.0,
            "smooth surrogate vanishes below the relaxed threshold",
            fingerprint,
            0,
        ),
    ])
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FiniteSpace;
    use crate::oracle::oracle_choquet;
    use crate::rng::{plain_space, random_credal, random_var};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m0() -> (CredalSet, RandomVar) {
        let space = FiniteSpace::new(vec!["-1", "+1"]).unwrap();
        let x = RandomVar::new(&space, vec![-1.0, 1.0]).unwrap();
        let credal =
            CredalSet::from_weight_rows(&space, vec![vec![0.6, 0.4], vec![0.4, 0.6]]).unwrap();
        (credal, x)
    }

    #[test]
    fn capacities_on_two_point_space() {
        let (credal, x) = m0();
        let plus = x.event_ge(0.0);
        assert!((upper_capacity(&credal, &plus).unwrap() - 0.6).abs() < 1e-15);
        assert!((lower_capacity(&credal, &plus).unwrap() - 0.4).abs() < 1e-15);
        let space = credal.space().clone();
        assert_eq!(upper_capacity(&credal, &EventSet::empty(&space)).unwrap(), 0.0);
        assert_eq!(upper_capacity(&credal, &EventSet::full(&space)).unwrap(), 1.0);
    }

    #[test]
    fn choquet_matches_quadrature_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let space = plain_space(rng.gen_range(2..=5));
            let verts = rng.gen_range(1..=4);
            let credal = random_credal(&mut rng, &space, verts);
            let x = random_var(&mut rng, &space, -3.0, 3.0);
            let exact = choquet(&credal, &x).unwrap().value;
            let quad = oracle_choquet(&credal, &x).unwrap();
            assert!((exact - quad).abs() < 1e-10, "{exact} vs {quad}");
        }
    }

    #[test]
    fn choquet_level_decomposition_on_hand_model() {
        let (credal, x) = m0();
        let r = choquet(&credal, &x).unwrap();
        assert!((r.value - 0.2).abs() < 1e-15);
        assert_eq!(r.level_points, vec![-1.0, 1.0]);
        assert_eq!(r.level_capacities, vec![1.0, 0.6]);
    }

    #[test]
    fn choquet_translation_and_homogeneity() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..30 {
            let space = plain_space(rng.gen_range(2..=4));
            let verts = rng.gen_range(1..=3);
            let credal = random_credal(&mut rng, &space, verts);
            let x = random_var(&mut rng, &space, -2.0, 2.0);
            let base = choquet(&credal, &x).unwrap().value;
            let c = rng.gen_range(-3.0..3.0);
            let shifted = choquet(&credal, &x.shifted(c).unwrap()).unwrap().value;
            assert!((shifted - (base + c)).abs() < 1e-10);
            let lambda = rng.gen_range(0.0..2.5);
            let scaled = choquet(&credal, &x.scaled(lambda).unwrap()).unwrap().value;
            assert!((scaled - lambda * base).abs() < 1e-10);
        }
    }

    #[test]
    fn riemann_comparison_stays_within_bound() {
        let (credal, x) = m0();
        let r = choquet_vs_riemann(&credal, &x, 1e-4).unwrap();
        assert!(r.pass, "{r:?}");
        assert!((r.rhs - 4e-4).abs() < 1e-15);
        assert!(r.lhs < r.rhs);
    }

    #[test]
    fn riemann_comparison_covers_sign_definite_variables() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let space = plain_space(rng.gen_range(1..=5));
            let verts = rng.gen_range(1..=4);
            let credal = random_credal(&mut rng, &space, verts);
            let x = random_var(&mut rng, &space, 0.5, 3.0);
            let r = choquet_vs_riemann(&credal, &x, 0.05).unwrap();
            assert!(r.pass, "positive values: {r:?}");
            let r = choquet_vs_riemann(&credal, &x.scaled(-1.0).unwrap(), 0.05).unwrap();
            assert!(r.pass, "negative values: {r:?}");
        }
    }

    #[test]
    fn outer_envelope_equals_capacity_for_measure_maxima() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..25 {
            let space = plain_space(rng.gen_range(2..=6));
            let verts = rng.gen_range(1..=4);
            let credal = random_credal(&mut rng, &space, verts);
            let members: Vec<bool> = (0..space.size()).map(|_| rng.gen::<bool>()).collect();
            let event = EventSet::from_members(&space, members).unwrap();
            let direct = upper_capacity(&credal, &event).unwrap();
            let envelope = outer_capacity(&credal, &event).unwrap();
            assert!((direct - envelope).abs() < 1e-12, "{direct} vs {envelope}");
        }
    }

    #[test]
    fn outer_envelope_rejects_large_spaces() {
        let space = plain_space(13);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let credal = random_credal(&mut rng, &space, 2);
        let err = outer_capacity(&credal, &EventSet::full(&space)).unwrap_err();
        assert!(matches!(err, CapacityError::SpaceTooLarge { size: 13, max: 12 }));
    }

    #[test]
    fn subadditivity_holds_on_random_event_lists() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..25 {
            let space = plain_space(rng.gen_range(2..=6));
            let verts = rng.gen_range(1..=4);
            let credal = random_credal(&mut rng, &space, verts);
            let events: Vec<EventSet> = (0..rng.gen_range(1..=4))
                .map(|_| {
                    let members: Vec<bool> =
                        (0..space.size()).map(|_| rng.gen::<bool>()).collect();
                    EventSet::from_members(&space, members).unwrap()
                })
                .collect();
            let r = countable_subadd_check(&credal, &events).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn truncated_second_moment_on_unit_magnitude() {
        let (credal, x) = m0();
        // |X| is identically 1, so every clipped second moment is 1 and the
        // integer tail sum vanishes.
        let r = truncated_second_moment_bound(&credal, &x, 50).unwrap();
        let expected: f64 = (1..=50).map(|j| 1.0 / (j as f64 * j as f64)).sum();
        assert!((r.lhs - expected).abs() < 1e-12);
        assert!((r.rhs - 5.0).abs() < 1e-12);
        assert!(r.pass);

        let zero = RandomVar::constant(credal.space(), 0.0).unwrap();
        let r = truncated_second_moment_bound(&credal, &zero, 10).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn domination_is_tight_or_strict_as_expected() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..40 {
            let space = plain_space(rng.gen_range(2..=5));
            let verts = rng.gen_range(1..=4);
            let credal = random_credal(&mut rng, &space, verts);
            let x = random_var(&mut rng, &space, -2.0, 2.0);
            let r = mean_choquet_domination(&credal, &x).unwrap();
            assert!(r.pass, "{r:?}");
        }
        // Vertices optimizing different levels make the gap strict.
        let space = plain_space(3);
        let credal = CredalSet::from_weight_rows(
            &space,
            vec![vec![0.0, 1.0, 0.0], vec![0.5, 0.0, 0.5]],
        )
        .unwrap();
        let x = RandomVar::new(&space, vec![0.0, 1.0, 2.0]).unwrap();
        let r = mean_choquet_domination(&credal, &x).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-15);
        assert!((r.rhs - 1.5).abs() < 1e-15);
    }

    #[test]
    fn sandwich_brackets_the_surrogate() {
        let space = plain_space(2);
        let credal =
            CredalSet::from_weight_rows(&space, vec![vec![0.6, 0.4], vec![0.4, 0.6]]).unwrap();
        let x = RandomVar::new(&space, vec![0.75, 2.0]).unwrap();
        let reports = smooth_indicator_sandwich(&credal, &x, 1.0, 0.5).unwrap();
        assert!(reports.iter().all(|r| r.pass), "{reports:?}");
        // g(0.75) = 1/2 exactly, so the middle value is 0.5*0.4 + 1*0.6
        // under the vertex favoring the high outcome... both weights give
        // 0.5 + 0.5*q(high); the upper value is 0.8.
        assert!((reports[0].rhs - 0.8).abs() < 1e-12);
        assert!((reports[0].lhs - 0.6).abs() < 1e-12);
        assert!((reports[1].rhs - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sandwich_validates_inputs() {
        let (credal, x) = m0();
        assert!(matches!(
            smooth_indicator_sandwich(&credal, &x, 0.0, 0.5),
            Err(CapacityError::BadInput { .. })
        ));
        assert!(matches!(
            smooth_indicator_sandwich(&credal, &x, 1.0, 1.0),
            Err(CapacityError::BadInput { .. })
        ));
    }
}
