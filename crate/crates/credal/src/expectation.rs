//! Upper and lower expectation operators of a credal set.
//!
//! The upper expectation is the envelope `max_Q E_Q[X]` over the vertex
//! measures; the lower expectation is its conjugate `-max_Q E_Q[-X]`. On a
//! finite vertex list both are exact maximizations, attained at a vertex,
//! with ties broken toward the lowest vertex index.

use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{linear_expect, CredalSet, ModelError, RandomVar};
use crate::report::{CheckReport, FingerprintHasher, InequalityReport};

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum ExpectError {
    Model(ModelError),
    /// Conjugate exponents must satisfy `1/p + 1/q = 1` with `p > 1`.
    BadExponent { p: f64, q: f64 },
    /// The shifted variable must be nonnegative before the product identity
    /// applies; the shift given leaves a negative value.
    PrNotNonnegative { min_value: f64 },
}

impl fmt::Display for ExpectError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExpectError::Model(e) => write!(f, "{e}"),
            ExpectError::BadExponent { p, q } => {
                write!(f, "exponents p={p}, q={q} are not conjugate (need 1/p + 1/q = 1, p > 1)")
            }
            ExpectError::PrNotNonnegative { min_value } => {
                write!(f, "shifted variable still takes negative value {min_value}")
            }
        }
    }
}

impl std::error::Error for ExpectError {}

impl From<ModelError> for ExpectError {
    fn from(e: ModelError) -> Self {
        ExpectError::Model(e)
    }
}

// ---------------------------------------------------------------------------
// Envelopes
// ---------------------------------------------------------------------------

/// Both envelopes of one variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectationPair {
    pub upper: f64,
    pub lower: f64,
}

/// `max_Q E_Q[X]` over the vertices.
pub fn upper_expect(p: &CredalSet, x: &RandomVar) -> Result<f64, ModelError> {
    Ok(upper_expect_with_vertex(p, x)?.0)
}

/// Upper expectation plus the index of the attaining vertex (lowest index on
/// ties).
pub fn upper_expect_with_vertex(p: &CredalSet, x: &RandomVar) -> Result<(f64, usize), ModelError> {
    let mut best = f64::NEG_INFINITY;
    let mut best_index = 0;
    for (i, q) in p.vertices().iter().enumerate() {
        let e = linear_expect(q, x)?;
        if e > best {
            best = e;
            best_index = i;
        }
    }
    Ok((best, best_index))
}

/// `min_Q E_Q[X]`, i.e. the conjugate `-upper(-X)`.
pub fn lower_expect(p: &CredalSet, x: &RandomVar) -> Result<f64, ModelError> {
    let mut best = f64::INFINITY;
    for q in p.vertices() {
        let e = linear_expect(q, x)?;
        if e < best {
            best = e;
        }
    }
    Ok(best)
}

pub fn expect_pair(p: &CredalSet, x: &RandomVar) -> Result<ExpectationPair, ModelError> {
    Ok(ExpectationPair {
        upper: upper_expect(p, x)?,
        lower: lower_expect(p, x)?,
    })
}

// ---------------------------------------------------------------------------
// Axiom sweep
// ---------------------------------------------------------------------------

/// Checks the four defining properties of the upper envelope on random
/// variables over `p`'s space: monotonicity, constant preserving,
/// sub-additivity, and positive homogeneity. Violations beyond `tol`
/// (relative where the compared quantities can be large) are failures.
pub fn check_axioms(p: &CredalSet, trials: u64, seed: u64, tol: f64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = CheckReport::new("expectation-axioms");
    let space = p.space().clone();
    let size = space.size();

    let draw_var = |rng: &mut ChaCha8Rng| {
        let values: Vec<f64> = (0..size).map(|_| rng.gen_range(-2.0..2.0)).collect();
        RandomVar::new(&space, values).expect("finite values")
    };

    for trial in 0..trials {
        let x = draw_var(&mut rng);
        let y = draw_var(&mut rng);
        let lambda: f64 = rng.gen_range(0.0..4.0);
        let c: f64 = rng.gen_range(-2.0..2.0);

        let ex = upper_expect(p, &x).expect("same space");
        let ey = upper_expect(p, &y).expect("same space");

        // Monotonicity, on a dominating pair built from x.
        let bump: Vec<f64> = (0..size).map(|_| rng.gen_range(0.0..1.0)).collect();
        let dominating = RandomVar::new(
            &space,
            x.values().iter().zip(&bump).map(|(v, b)| v + b).collect(),
        )
        .expect("finite");
        let e_dom = upper_expect(p, &dominating).expect("same space");
        report.record(ex - e_dom, tol, || {
            format!("monotonicity failed at trial {trial}")
        });

        // Constant preserving.
        let konst = RandomVar::constant(&space, c).expect("finite");
        let ec = upper_expect(p, &konst).expect("same space");
        report.record((ec - c).abs() / c.abs().max(1.0), tol, || {
            format!("constant preserving failed at trial {trial}: E[{c}] = {ec}")
        });

        // Sub-additivity.
        let sum = RandomVar::new(
            &space,
            x.values().iter().zip(y.values()).map(|(a, b)| a + b).collect(),
        )
        .expect("finite");
        let exy = upper_expect(p, &sum).expect("same space");
        report.record(
            (exy - (ex + ey)) / (ex.abs() + ey.abs()).max(1.0),
            tol,
            || format!("sub-additivity failed at trial {trial}"),
        );

        // Positive homogeneity.
        let scaled = x.scaled(lambda).expect("finite");
        let el = upper_expect(p, &scaled).expect("same space");
        report.record(
            (el - lambda * ex).abs() / (lambda * ex).abs().max(1.0),
            tol,
            || format!("positive homogeneity failed at trial {trial}: lambda {lambda}"),
        );
    }
    report
}

// ---------------------------------------------------------------------------
// Hölder
// ---------------------------------------------------------------------------

/// `E[|XY|] <= E[|X|^p]^(1/p) * E[|Y|^q]^(1/q)` for conjugate exponents.
pub fn holder_check(
    p_set: &CredalSet,
    x: &RandomVar,
    y: &RandomVar,
    p: f64,
    q: f64,
    seed: u64,
) -> Result<InequalityReport, ExpectError> {
    if !(p > 1.0) || !(q > 1.0) || ((1.0 / p + 1.0 / q) - 1.0).abs() > 1e-12 {
        return Err(ExpectError::BadExponent { p, q });
    }
    let xy = RandomVar::new(
        x.space(),
        x.values()
            .iter()
            .zip(y.values())
            .map(|(a, b)| (a * b).abs())
            .collect(),
    )
    .map_err(ExpectError::Model)?;
    let lhs = upper_expect(p_set, &xy)?;
    let xp = x.map(|v| v.abs().powf(p))?;
    let yq = y.map(|v| v.abs().powf(q))?;
    let rhs = upper_expect(p_set, &xp)?.powf(1.0 / p) * upper_expect(p_set, &yq)?.powf(1.0 / q);

    let mut h = FingerprintHasher::new();
    h.write_str("holder");
    hash_credal(&mut h, p_set);
    for &v in x.values() {
        h.write_f64(v);
    }
    for &v in y.values() {
        h.write_f64(v);
    }
    h.write_f64(p).write_f64(q);

    Ok(InequalityReport::new(
        "holder",
        lhs,
        rhs,
        1.0,
        format!("product-norm bound, p={p}, q={q}"),
        h.finish(),
        seed,
    ))
}

// ---------------------------------------------------------------------------
// Product factorization
// ---------------------------------------------------------------------------

/// Verifies the product identity for a shifted pair of consecutive
/// coordinates: with `X' = X + shift >= 0` and a second identically
/// distributed coordinate evaluated adaptively, the upper expectation of the
/// product equals the product of the upper expectations, and likewise for
/// the lower pair. Returns the upper and lower reports.
///
/// The two-coordinate recursion is inlined here (innermost coordinate
/// eliminated first); for a symmetric product functional the elimination
/// order does not matter.
pub fn factorization_check(
    marginal: &CredalSet,
    x: &RandomVar,
    shift: f64,
    seed: u64,
) -> Result<Vec<InequalityReport>, ExpectError> {
    let shifted = x.shifted(shift)?;
    if shifted.min_value() < 0.0 {
        return Err(ExpectError::PrNotNonnegative { min_value: shifted.min_value() });
    }

    // Eliminate the second coordinate at each fixed value of the first, then
    // the first; max picks the adaptive vertex per branch.
    let joint_upper = {
        let inner: Vec<f64> = shifted
            .values()
            .iter()
            .map(|&v1| {
                let prod = shifted.scaled(v1).expect("finite");
                upper_expect(marginal, &prod).expect("same space")
            })
            .collect();
        let outer = RandomVar::new(marginal.space(), inner)?;
        upper_expect(marginal, &outer)?
    };
    let joint_lower = {
        let inner: Vec<f64> = shifted
            .values()
            .iter()
            .map(|&v1| {
                let prod = shifted.scaled(v1).expect("finite");
                lower_expect(marginal, &prod).expect("same space")
            })
            .collect();
        let outer = RandomVar::new(marginal.space(), inner)?;
        lower_expect(marginal, &outer)?
    };

    let upper = upper_expect(marginal, &shifted)?;
    let lower = lower_expect(marginal, &shifted)?;

    let fingerprint = {
        let mut h = FingerprintHasher::new();
        h.write_str("factorization");
        hash_credal(&mut h, marginal);
        for &v in x.values() {
            h.write_f64(v);
        }
        h.write_f64(shift);
        h.finish()
    };

    // Equalities checked as two one-sided reports each would be noise; report
    // |difference| <= tol directly.
    let up = InequalityReport::new(
        "factorization-upper",
        (joint_upper - upper * upper).abs(),
        0.0,
        1.0,
        "adaptive product equals product of envelopes for nonnegative factors",
        fingerprint.clone(),
        seed,
    );
    let low = InequalityReport::new(
        "factorization-lower",
        (joint_lower - lower * lower).abs(),
        0.0,
        1.0,
        "adaptive product equals product of envelopes for nonnegative factors",
        fingerprint,
        seed,
    );
    Ok(vec![up, low])
}

pub(crate) fn hash_credal(h: &mut FingerprintHasher, p: &CredalSet) {
    h.write_u64(p.space().size() as u64);
    for label in p.space().labels() {
        h.write_str(label);
    }
    h.write_u64(p.len() as u64);
    for q in p.vertices() {
        for &w in q.weights() {
            h.write_f64(w);
        }
    }
}

// ---------------------------------------------------------------------------
