//! Verification harness for the maximal inequalities: every operation
//! evaluates the left side on the joint engine, assembles the right side
//! from marginal moments and an explicitly derived admissible constant,
//! and reports the slack.
//!
//! No constant here is fitted to data. Bounds on a maximal moment
//! `x = E[max ...]` arrive as recursions `x <= a + b x^(1-1/p) + c x^(1-2/p)`;
//! [`closure_constant`] turns such a recursion into the explicit bound
//! `3a + (3b)^p + (3c)^(p/2)` (two-term case `2a + (2c)^(p/2)`), and every
//! reported right side is built from one of these closures or from a direct
//! scalar split bound.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use std::fmt;

use crate::expectation::{lower_expect, upper_expect};
use crate::parallel::indexed_map;
use crate::report::{CheckReport, FingerprintHasher, InequalityReport};
use crate::rng::{plain_space, random_credal, random_var, split_seed};
use crate::sequence::{
    eval_lower, eval_upper, Dependence, Functional, Post, SequenceError, SequenceModel,
};

/// One-sided slack allowed when checking a mean hypothesis such as
/// `E[X_k] <= 0`.
pub const MEAN_TOL: f64 = 1e-12;

/// Default number of random models drawn per verification suite.
pub const DEFAULT_SUITE_TRIALS: u64 = 200;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum InequalityError {
    Sequence(SequenceError),
    /// The exponent is outside the range the bound is derived for.
    BadExponent { p: f64, detail: &'static str },
    /// A stated hypothesis (centering, semantics, coefficient sign) fails.
    HypothesisViolated { detail: String },
}

impl fmt::Display for InequalityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InequalityError::Sequence(e) => write!(f, "{e}"),
            InequalityError::BadExponent { p, detail } => {
                write!(f, "exponent {p} unsupported: {detail}")
            }
            InequalityError::HypothesisViolated { detail } => {
                write!(f, "hypothesis violated: {detail}")
            }
        }
    }
}

impl std::error::Error for InequalityError {}

impl From<SequenceError> for InequalityError {
    fn from(e: SequenceError) -> Self {
        InequalityError::Sequence(e)
    }
}

impl From<crate::model::ModelError> for InequalityError {
    fn from(e: crate::model::ModelError) -> Self {
        InequalityError::Sequence(SequenceError::Model(e))
    }
}

// ---------------------------------------------------------------------------
// Closure of moment recursions
// ---------------------------------------------------------------------------

/// Inputs and result of one closure-lemma application: the coefficients of
/// `x <= a + b x^(1-1/p) + c x^(1-2/p)` together with the explicit bound
/// derived from them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantPolicy {
    pub p: f64,
    pub a_coeff: f64,
    pub b_coeff: f64,
    pub c_coeff: f64,
    pub derived_constant: f64,
}

impl ConstantPolicy {
    /// Closes the full recursion: any `x >= 0` with
    /// `x <= a + b x^(1-1/p) + c x^(1-2/p)` satisfies
    /// `x <= 3a + (3b)^p + (3c)^(p/2)`, because whichever of the three
    /// terms is largest must exceed `x/3`. Needs only `p >= 2` so that both
    /// exponents lie in `[0, 1)`.
    pub fn three_term(p: f64, a: f64, b: f64, c: f64) -> Result<Self, InequalityError> {
        if !p.is_finite() || p < 2.0 {
            return Err(InequalityError::BadExponent { p, detail: "closure needs p >= 2" });
        }
        check_coeffs(&[a, b, c])?;
        let derived = 3.0 * a + (3.0 * b).powf(p) + (3.0 * c).powf(p / 2.0);
        Ok(ConstantPolicy { p, a_coeff: a, b_coeff: b, c_coeff: c, derived_constant: derived })
    }

    /// Two-term case `x <= a + c x^(1-2/p)`, closed as `2a + (2c)^(p/2)`.
    pub fn two_term(p: f64, a: f64, c: f64) -> Result<Self, InequalityError> {
        if !p.is_finite() || p < 2.0 {
            return Err(InequalityError::BadExponent { p, detail: "closure needs p >= 2" });
        }
        check_coeffs(&[a, c])?;
        let derived = 2.0 * a + (2.0 * c).powf(p / 2.0);
        Ok(ConstantPolicy { p, a_coeff: a, b_coeff: 0.0, c_coeff: c, derived_constant: derived })
    }
}

fn check_coeffs(cs: &[f64]) -> Result<(), InequalityError> {
    for &c in cs {
        if !c.is_finite() || c < 0.0 {
            return Err(InequalityError::HypothesisViolated {
                detail: format!("closure coefficients must be finite and nonnegative, got {c}"),
            });
        }
    }
    Ok(())
}

/// Explicit bound for `x <= a + b x^(1-1/p) + c x^(1-2/p)` with `p > 2`:
/// returns `3a + (3b)^p + (3c)^(p/2)`.
pub fn closure_constant(p: f64, a: f64, b: f64, c: f64) -> Result<f64, InequalityError> {
    if !p.is_finite() || p <= 2.0 {
        return Err(InequalityError::BadExponent { p, detail: "closure bound stated for p > 2" });
    }
    Ok(ConstantPolicy::three_term(p, a, b, c)?.derived_constant)
}

/// Grid-scans random recursions for points that satisfy the recursion while
/// exceeding the closed bound. Soundness check for [`closure_constant`].
pub fn closure_scan_check(trials: u64, seed: u64) -> CheckReport {
    let mut report = CheckReport::new("closure-bound");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = 800usize;
    for _ in 0..trials {
        let p = 2.001 + rng.gen::<f64>() * 4.0;
        let drop = rng.gen_range(0..4u32);
        let a = if drop == 1 { 0.0 } else { rng.gen::<f64>() * 10.0 };
        let b = if drop == 2 { 0.0 } else { rng.gen::<f64>() * 10.0 };
        let c = if drop == 3 { 0.0 } else { rng.gen::<f64>() * 10.0 };
        let bound = closure_constant(p, a, b, c).expect("admissible closure inputs");
        let mut worst = f64::NEG_INFINITY;
        for i in 0..=steps {
            let x = 2.0 * bound * (i as f64) / (steps as f64);
            let rec = a + b * x.powf(1.0 - 1.0 / p) + c * x.powf(1.0 - 2.0 / p);
            // Positive only when x both satisfies the recursion and beats
            // the bound, which would disprove the closure.
            worst = worst.max((rec - x).min(x - bound));
        }
        report.record(worst / bound.max(1.0), 1e-9, || {
            format!("p={p} a={a} b={b} c={c} bound={bound}")
        });
    }
    report
}

// ---------------------------------------------------------------------------
// Centering
// ---------------------------------------------------------------------------

/// Shifts every coordinate by minus its upper mean, so the result satisfies
/// `E[X_k] = 0` exactly (within 1e-12, enforced).
pub fn center_upper(model: &SequenceModel) -> Result<SequenceModel, InequalityError> {
    let marginal = model.marginal();
    let centered = model.map_coords(|_, c| {
        let mu = upper_expect(marginal, c)?;
        c.shifted(-mu)
    })?;
    for (k, c) in centered.coords().iter().enumerate() {
        let mu = upper_expect(centered.marginal(), c)?;
        if mu.abs() > MEAN_TOL {
            return Err(InequalityError::HypothesisViolated {
                detail: format!("coordinate {k} recentered upper mean is {mu}, not 0"),
            });
        }
    }
    Ok(centered)
}

/// Shifts every coordinate by minus its lower mean, so the result satisfies
/// `-E[-X_k] = 0`.
pub fn center_lower(model: &SequenceModel) -> Result<SequenceModel, InequalityError> {
    let marginal = model.marginal();
    let centered = model.map_coords(|_, c| {
        let mu = lower_expect(marginal, c)?;
        c.shifted(-mu)
    })?;
    for (k, c) in centered.coords().iter().enumerate() {
        let mu = lower_expect(centered.marginal(), c)?;
        if mu.abs() > MEAN_TOL {
            return Err(InequalityError::HypothesisViolated {
                detail: format!("coordinate {k} recentered lower mean is {mu}, not 0"),
            });
        }
    }
    Ok(centered)
}

// ---------------------------------------------------------------------------
// Shared pieces
// ---------------------------------------------------------------------------

fn pow2(e: f64) -> f64 {
    2f64.powf(e)
}

fn require_semantics(
    model: &SequenceModel,
    allowed: &[Dependence],
    what: &str,
) -> Result<(), InequalityError> {
    if allowed.contains(&model.semantics()) {
        return Ok(());
    }
    let tags: Vec<&str> = allowed.iter().map(|d| d.tag()).collect();
    Err(InequalityError::HypothesisViolated {
        detail: format!(
            "{what} needs semantics in [{}], model uses {}",
            tags.join(", "),
            model.semantics()
        ),
    })
}

fn require_nonpositive_upper_means(model: &SequenceModel) -> Result<(), InequalityError> {
    for (k, c) in model.coords().iter().enumerate() {
        let mu = upper_expect(model.marginal(), c)?;
        if mu > MEAN_TOL {
            return Err(InequalityError::HypothesisViolated {
                detail: format!("coordinate {k} has upper mean {mu} > 0"),
            });
        }
    }
    Ok(())
}

fn require_nonpositive_lower_means(model: &SequenceModel) -> Result<(), InequalityError> {
    for (k, c) in model.coords().iter().enumerate() {
        let mu = lower_expect(model.marginal(), c)?;
        if mu > MEAN_TOL {
            return Err(InequalityError::HypothesisViolated {
                detail: format!("coordinate {k} has lower mean {mu} > 0"),
            });
        }
    }
    Ok(())
}

/// Per-coordinate `E[|X_k|^p]`.
fn upper_abs_moments(model: &SequenceModel, p: f64) -> Result<Vec<f64>, InequalityError> {
    model
        .coords()
        .iter()
        .map(|c| {
            let v = c.abs().map(|t| t.powf(p))?;
            Ok(upper_expect(model.marginal(), &v)?)
        })
        .collect()
}

/// Per-coordinate `E[X_k^2]`.
fn upper_square_moments(model: &SequenceModel) -> Result<Vec<f64>, InequalityError> {
    model
        .coords()
        .iter()
        .map(|c| {
            let v = c.map(|t| t * t)?;
            Ok(upper_expect(model.marginal(), &v)?)
        })
        .collect()
}

/// `sum_k (E[X_k])^+ + (-E[-X_k])^-` — the centering defect that survives in
/// the bounds with no mean hypothesis.
fn mean_defect(model: &SequenceModel) -> Result<f64, InequalityError> {
    let mut total = 0.0;
    for c in model.coords() {
        let hi = upper_expect(model.marginal(), c)?;
        let lo = lower_expect(model.marginal(), c)?;
        total += hi.max(0.0) + (-lo).max(0.0);
    }
    Ok(total)
}

fn head_max_abs_pow(n: usize, p: f64) -> Functional {
    Functional::max_partial_sum(n).with_post(Post::Abs).with_post(Post::Power(p))
}

fn tail_max_abs_pow(n: usize, p: f64) -> Functional {
    Functional::max_tail_sum(n).with_post(Post::Abs).with_post(Post::Power(p))
}

fn running_max_abs_pow(n: usize, p: f64) -> Functional {
    Functional::max_abs_partial_sum(n).with_post(Post::Power(p))
}

fn op_fingerprint(model: &SequenceModel, op: &str, p: f64, extra: &str) -> String {
    let mut h = FingerprintHasher::new();
    h.write_str(&model.fingerprint()).write_str(op).write_f64(p).write_str(extra);
    h.finish()
}

// ---------------------------------------------------------------------------
// Kolmogorov-type square bound
// ---------------------------------------------------------------------------

/// `E[(max_k S_k)^2] <= sum_k E[X_k^2]` for coordinates with nonpositive
/// upper means under semantics where each coordinate's adversary adapts to
/// the future (or to nothing).
///
/// With `already_centered` the model is used as given (its upper means must
/// be `<= 0`); otherwise it is recentered by [`center_upper`] first.
pub fn kolmogorov_verify(
    model: &SequenceModel,
    already_centered: bool,
    seed: u64,
) -> Result<InequalityReport, InequalityError> {
    require_semantics(
        model,
        &[Dependence::PengBackward, Dependence::QwiseProduct],
        "the running-maximum square bound",
    )?;
    let work = if already_centered {
        require_nonpositive_upper_means(model)?;
        model.clone()
    } else {
        center_upper(model)?
    };
    let n = work.horizon();
    let lhs = eval_upper(&work, &Functional::max_partial_sum(n).with_post(Post::Power(2.0)))?;
    let rhs: f64 = upper_square_moments(&work)?.iter().sum();
    let fp = op_fingerprint(&work, "kolmogorov", 2.0, "");
    Ok(InequalityReport::new(
        "kolmogorov",
        lhs,
        rhs,
        1.0,
        "suffix-maximum recursion; cross terms vanish under nonpositive upper means",
        fp,
        seed,
    ))
}

// ---------------------------------------------------------------------------
// Low-exponent split bound (1 <= p <= 2)
// ---------------------------------------------------------------------------

/// Which maximal functional the low-exponent bound is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LowPVariant {
    /// `|max_{k<=n} S_k|^p`: the head-sum maximum. Needs semantics where
    /// coordinates adapt to the future or to nothing.
    Head,
    /// `|max_{0<=k<n} (S_n - S_k)|^p`: the tail-sum maximum, for the
    /// mirrored orientation.
    Tail,
    /// `((S_n)^+)^p`, dominated by both maxima pointwise, hence valid under
    /// every semantics.
    PositivePart,
}

impl LowPVariant {
    pub fn tag(self) -> &'static str {
        match self {
            LowPVariant::Head => "head",
            LowPVariant::Tail => "tail",
            LowPVariant::PositivePart => "snplus",
        }
    }
}

/// `E[variant^p] <= 2^(2-p) sum_k E[|X_k|^p]` for `1 <= p <= 2` and
/// nonpositive upper means.
pub fn rosenthal_low_p_verify(
    model: &SequenceModel,
    p: f64,
    variant: LowPVariant,
    seed: u64,
) -> Result<InequalityReport, InequalityError> {
    if !p.is_finite() || !(1.0..=2.0).contains(&p) {
        return Err(InequalityError::BadExponent { p, detail: "split bound needs 1 <= p <= 2" });
    }
    match variant {
        LowPVariant::Head => require_semantics(
            model,
            &[Dependence::PengBackward, Dependence::QwiseProduct],
            "the head maximum bound",
        )?,
        LowPVariant::Tail => require_semantics(
            model,
            &[Dependence::PengForward, Dependence::QwiseProduct],
            "the tail maximum bound",
        )?,
        LowPVariant::PositivePart => {}
    }
    require_nonpositive_upper_means(model)?;
    let n = model.horizon();
    let f = match variant {
        LowPVariant::Head => head_max_abs_pow(n, p),
        LowPVariant::Tail => tail_max_abs_pow(n, p),
        LowPVariant::PositivePart => {
            Functional::sum(n).with_post(Post::PositivePart).with_post(Post::Power(p))
        }
    };
    let lhs = eval_upper(model, &f)?;
    let constant = pow2(2.0 - p);
    let rhs = constant * upper_abs_moments(model, p)?.iter().sum::<f64>();
    let fp = op_fingerprint(model, "rosenthal-low-p", p, variant.tag());
    Ok(InequalityReport::new(
        format!("rosenthal-low-p-{}", variant.tag()),
        lhs,
        rhs,
        constant,
        format!(
            "2^(2-p) = {constant:.12} from the split |x+y|^p <= 2^(2-p)|x|^p + |y|^p \
             + p x |y|^(p-1) sgn y; the cross term dies under nonpositive upper means"
        ),
        fp,
        seed,
    ))
}

// ---------------------------------------------------------------------------
// High-exponent bounds (p >= 2)
// ---------------------------------------------------------------------------

/// `E[|max S|^p]` against the two-term closure of the p-th-moment recursion:
/// `a = 2^p p^2 sum_k E|X_k|^p`, `c = 2^p p^2 sum' (E|X_k|^p)^(2/p)`, bound
/// `2a + (2c)^(p/2)`. The statement-shaped form
/// `C_p n^(p/2-1) sum_k E|X_k|^p` is recorded alongside.
pub fn rosenthal_nd_pge2_verify(
    model: &SequenceModel,
    p: f64,
    seed: u64,
) -> Result<InequalityReport, InequalityError> {
    if !p.is_finite() || p < 2.0 {
        return Err(InequalityError::BadExponent { p, detail: "this moment bound needs p >= 2" });
    }
    require_nonpositive_upper_means(model)?;
    let n = model.horizon();
    let tail_form = model.semantics() == Dependence::PengForward;
    let f = if tail_form { tail_max_abs_pow(n, p) } else { head_max_abs_pow(n, p) };
    let moments = upper_abs_moments(model, p)?;
    let total: f64 = moments.iter().sum();
    let amp = pow2(p) * p * p;
    let a = amp * total;
    // The recursion's quadratic leg never touches the coordinate that seeds
    // it, so one endpoint drops out of the c-sum.
    let c_slice: &[f64] = if tail_form { &moments[1..] } else { &moments[..n - 1] };
    let c = amp * c_slice.iter().map(|m| m.powf(2.0 / p)).sum::<f64>();
    let policy = ConstantPolicy::two_term(p, a, c)?;
    let lhs = eval_upper(model, &f)?;
    let statement_c = 2.0 * amp + (2.0 * amp).powf(p / 2.0);
    let statement_rhs = statement_c * (n as f64).powf(p / 2.0 - 1.0) * total;
    let fp = op_fingerprint(model, "rosenthal-nd-pge2", p, "");
    Ok(InequalityReport::new(
        "rosenthal-nd-pge2",
        lhs,
        policy.derived_constant,
        statement_c,
        format!(
            "two-term closure 2a+(2c)^(p/2): a = 2^p p^2 sum E|X|^p = {a:.6e}, \
             c = 2^p p^2 sum' (E|X|^p)^(2/p) = {c:.6e}; statement form \
             C_p n^(p/2-1) sum E|X|^p = {statement_rhs:.6e} with C_p = {statement_c:.6e}"
        ),
        fp,
        seed,
    ))
}

/// Same maximal moment under sequential independence, where the quadratic
/// leg factorizes exactly: `c = 2^p p^2 sum' E[X_k^2]`, bound
/// `2a + (2c)^(p/2)`.
pub fn rosenthal_indep_pge2_verify(
    model: &SequenceModel,
    p: f64,
    seed: u64,
) -> Result<InequalityReport, InequalityError> {
    if !p.is_finite() || p < 2.0 {
        return Err(InequalityError::BadExponent { p, detail: "this moment bound needs p >= 2" });
    }
    require_semantics(
        model,
        &[Dependence::PengForward, Dependence::PengBackward],
        "the factorized second-moment bound",
    )?;
    require_nonpositive_upper_means(model)?;
    let n = model.horizon();
    let tail_form = model.semantics() == Dependence::PengForward;
    let f = if tail_form { tail_max_abs_pow(n, p) } else { head_max_abs_pow(n, p) };
    let moments = upper_abs_moments(model, p)?;
    let squares = upper_square_moments(model)?;
    let total: f64 = moments.iter().sum();
    let sq_total: f64 = squares.iter().sum();
    let amp = pow2(p) * p * p;
    let a = amp * total;
    let c_slice: &[f64] = if tail_form { &squares[1..] } else { &squares[..n - 1] };
    let c = amp * c_slice.iter().sum::<f64>();
    let policy = ConstantPolicy::two_term(p, a, c)?;
    let lhs = eval_upper(model, &f)?;
    let statement_c = (2.0 * amp).max((2.0 * amp).powf(p / 2.0));
    let statement_rhs = statement_c * (total + sq_total.powf(p / 2.0));
    let fp = op_fingerprint(model, "rosenthal-indep-pge2", p, "");
    Ok(InequalityReport::new(
        "rosenthal-indep-pge2",
        lhs,
        policy.derived_constant,
        statement_c,
        format!(
            "two-term closure 2a+(2c)^(p/2): a = 2^p p^2 sum E|X|^p = {a:.6e}, \
             c = 2^p p^2 sum' E[X^2] = {c:.6e}; statement form \
             C_p (sum E|X|^p + (sum E[X^2])^(p/2)) = {statement_rhs:.6e} \
             with C_p = {statement_c:.6e}"
        ),
        fp,
        seed,
    ))
}

/// Coefficients of the three-term closure behind [`mz_verify`], with the
/// head/tail conversion factor already applied.
fn mz_multipliers(p: f64, tail_to_head: bool) -> (f64, f64) {
    let r = if tail_to_head { pow2(p) } else { 1.0 };
    let m1 = r * (3.0 * pow2(p + 1.0) * p * p + (3.0 * pow2(2.0 * p - 1.0) * p * p).powf(p / 2.0));
    let m2 = r * (3.0 * pow2(p - 1.0) * p).powf(p);
    (m1, m2)
}

/// `E[max_k |S_k|^p] <= C (M^p + E[(sum_k X_k^2)^(p/2)])` where `M` is the
/// centering defect; the joint quadratic moment is evaluated by the engine
/// under the model's own semantics. No mean hypothesis.
pub fn mz_verify(
    model: &SequenceModel,
    p: f64,
    seed: u64,
) -> Result<InequalityReport, InequalityError> {
    if !p.is_finite() || p < 2.0 {
        return Err(InequalityError::BadExponent { p, detail: "this moment bound needs p >= 2" });
    }
    let n = model.horizon();
    let tail_to_head = model.semantics() == Dependence::PengForward;
    let quad = eval_upper(model, &Functional::sum_squares_power(n, p / 2.0))?;
    let defect = mean_defect(model)?;
    let (m1, m2) = mz_multipliers(p, tail_to_head);
    let constant = m1.max(m2);
    let rhs = constant * (defect.powf(p) + quad);
    let lhs = eval_upper(model, &running_max_abs_pow(n, p))?;
    let fp = op_fingerprint(model, "marcinkiewicz-zygmund", p, "");
    Ok(InequalityReport::new(
        "marcinkiewicz-zygmund",
        lhs,
        rhs,
        constant,
        format!(
            "three-term closure of x <= a + b x^(1-1/p) + c x^(1-2/p) with \
             a = 2^(p+1) p^2 Q, b = 2^(p-1) p M, c = 2^(2p-1) p^2 Q^(2/p); \
             Q = E[(sum X^2)^(p/2)], M = centering defect; m1 = {m1:.6e}, \
             m2 = {m2:.6e}, head conversion {}",
            if tail_to_head { "2^p" } else { "1" }
        ),
        fp,
        seed,
    ))
}

/// Admissible `(gamma1, gamma2, gamma3)` with `E[max_k |S_k|^p]` bounded by
/// `gamma1 sum E|X|^p + gamma2 (sum E[X^2])^(p/2) + gamma3 M^p`.
fn general_gammas(p: f64, tail_to_head: bool) -> (f64, f64, f64) {
    let (m1, m2) = mz_multipliers(p, tail_to_head);
    let (alpha, beta) = quad_split_constants(p, tail_to_head);
    (m1 * alpha, m1 * beta, m2)
}

/// Admissible `(alpha, beta)` with
/// `E[(sum X_k^2)^(p/2)] <= alpha sum E|X_k|^p + beta (sum E[X_k^2])^(p/2)`.
///
/// Base `2 <= p <= 4`: split each square into positive/negative halves,
/// recenter, and apply the low-exponent bound at exponent `p/2`. Above 4 the
/// three-gamma bound at exponent `p/2` applies to the squared halves, and
/// the fourth-moment sum interpolates away:
/// `(sum E[X^4])^(p/4) <= sum E|X|^p + (sum E[X^2])^(p/2)`.
fn quad_split_constants(p: f64, tail_to_head: bool) -> (f64, f64) {
    if p <= 4.0 {
        (pow2(p), 3.0 * pow2(p - 1.0))
    } else {
        let (g1, g2, g3) = general_gammas(p / 2.0, tail_to_head);
        let s = pow2(p / 2.0);
        (s * (g1 + g2), s * (g2 + g3))
    }
}

/// The no-hypothesis maximal moment bound
/// `E[max_k |S_k|^p] <= C_p (sum E|X|^p + (sum E[X^2])^(p/2) + M^p)`.
pub fn rosenthal_general_verify(
    model: &SequenceModel,
    p: f64,
    seed: u64,
) -> Result<InequalityReport, InequalityError> {
    if !p.is_finite() || p < 2.0 {
        return Err(InequalityError::BadExponent { p, detail: "this moment bound needs p >= 2" });
    }
    let n = model.horizon();
    let tail_to_head = model.semantics() == Dependence::PengForward;
    let moments = upper_abs_moments(model, p)?;
    let squares = upper_square_moments(model)?;
    let total: f64 = moments.iter().sum();
    let sq_total: f64 = squares.iter().sum();
    let defect = mean_defect(model)?;
    let (g1, g2, g3) = general_gammas(p, tail_to_head);
    let constant = g1.max(g2).max(g3);
    let rhs = constant * (total + sq_total.powf(p / 2.0) + defect.powf(p));
    let lhs = eval_upper(model, &running_max_abs_pow(n, p))?;
    let fp = op_fingerprint(model, "rosenthal-general", p, "");
    Ok(InequalityReport::new(
        "rosenthal-general",
        lhs,
        rhs,
        constant,
        format!(
            "C_p = max(gamma1, gamma2, gamma3) = {constant:.6e} with gamma1 = {g1:.6e}, \
             gamma2 = {g2:.6e}, gamma3 = {g3:.6e}: the quadratic-moment split \
             composed with the three-term closure"
        ),
        fp,
        seed,
    ))
}

// ---------------------------------------------------------------------------
// Lower-expectation split bound
// ---------------------------------------------------------------------------

/// Which maximum the lower-expectation bound runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxSide {
    Head,
    Tail,
}

impl MaxSide {
    pub fn tag(self) -> &'static str {
        match self {
            MaxSide::Head => "head",
            MaxSide::Tail => "tail",
        }
    }
}

/// `-E[-|max S|^p] <= 2^(2-p) sum_k E[|X_k|^p]` for `1 <= p <= 2` and
/// nonpositive lower means, under sequential independence.
pub fn lower_rosenthal_verify(
    model: &SequenceModel,
    p: f64,
    side: MaxSide,
    seed: u64,
) -> Result<InequalityReport, InequalityError> {
    if !p.is_finite() || !(1.0..=2.0).contains(&p) {
        return Err(InequalityError::BadExponent { p, detail: "split bound needs 1 <= p <= 2" });
    }
    match side {
        MaxSide::Head => {
            require_semantics(model, &[Dependence::PengBackward], "the lower head bound")?
        }
        MaxSide::Tail => {
            require_semantics(model, &[Dependence::PengForward], "the lower tail bound")?
        }
    }
    require_nonpositive_lower_means(model)?;
    let n = model.horizon();
    let f = match side {
        MaxSide::Head => head_max_abs_pow(n, p),
        MaxSide::Tail => tail_max_abs_pow(n, p),
    };
    let lhs = eval_lower(model, &f)?;
    let constant = pow2(2.0 - p);
    let rhs = constant * upper_abs_moments(model, p)?.iter().sum::<f64>();
    let fp = op_fingerprint(model, "lower-rosenthal", p, side.tag());
    Ok(InequalityReport::new(
        format!("lower-rosenthal-{}", side.tag()),
        lhs,
        rhs,
        constant,
        format!(
            "2^(2-p) = {constant:.12}; the lower expectation is sub-additive against \
             upper moments, and the cross term dies under nonpositive lower means"
        ),
        fp,
        seed,
    ))
}

// ---------------------------------------------------------------------------
// Scalar split inequalities
// ---------------------------------------------------------------------------

fn sgn(y: f64) -> f64 {
    if y == 0.0 {
        0.0
    } else {
        y.signum()
    }
}

fn low_p_split_margin(p: f64, x: f64, y: f64) -> f64 {
    let lhs = (x + y).abs().powf(p);
    let rhs = pow2(2.0 - p) * x.abs().powf(p)
        + y.abs().powf(p)
        + p * x * y.abs().powf(p - 1.0) * sgn(y);
    (lhs - rhs) / rhs.abs().max(1.0)
}

fn pge2_split_margin(p: f64, x: f64, y: f64) -> f64 {
    let amp = pow2(p) * p * p;
    let lhs = (x + y).abs().powf(p);
    let rhs = amp * x.abs().powf(p)
        + y.abs().powf(p)
        + p * x * y.abs().powf(p - 1.0) * sgn(y)
        + amp * x * x * y.abs().powf(p - 2.0);
    (lhs - rhs) / rhs.abs().max(1.0)
}

/// Checks the two pointwise split inequalities and the exponential bracket
/// `e^(-x) <= 1 - x/2 <= e^(-x/2)` on `[0, 1/2]`, each on a deterministic
/// grid plus `trials` random points.
pub fn scalar_inequality_suite(seed: u64, trials: u64) -> Vec<CheckReport> {
    let tol = 1e-12;

    let mut low = CheckReport::new("scalar-split-low-p");
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, 0));
    for pi in 0..=10 {
        let p = 1.0 + 0.1 * pi as f64;
        for xi in -15..=15 {
            for yi in -15..=15 {
                let (x, y) = (xi as f64 * 0.2, yi as f64 * 0.2);
                low.record(low_p_split_margin(p, x, y), tol, || {
                    format!("p={p} x={x} y={y}")
                });
            }
        }
    }
    for _ in 0..trials {
        let p = 1.0 + rng.gen::<f64>();
        let x = rng.gen_range(-5.0..=5.0);
        let y = rng.gen_range(-5.0..=5.0);
        low.record(low_p_split_margin(p, x, y), tol, || format!("p={p} x={x} y={y}"));
    }

    let mut high = CheckReport::new("scalar-split-pge2");
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, 1));
    for pi in 0..=6 {
        let p = 2.0 + 0.5 * pi as f64;
        for xi in -15..=15 {
            for yi in -15..=15 {
                let (x, y) = (xi as f64 * 0.2, yi as f64 * 0.2);
                high.record(pge2_split_margin(p, x, y), tol, || {
                    format!("p={p} x={x} y={y}")
                });
            }
        }
    }
    for _ in 0..trials {
        let p = 2.0 + 3.0 * rng.gen::<f64>();
        let x = rng.gen_range(-5.0..=5.0);
        let y = rng.gen_range(-5.0..=5.0);
        high.record(pge2_split_margin(p, x, y), tol, || format!("p={p} x={x} y={y}"));
    }

    let mut exp = CheckReport::new("scalar-exp-bracket");
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, 2));
    let grid = 10_000;
    for i in 0..=grid {
        let x = 0.5 * i as f64 / grid as f64;
        exp.record((-x).exp() - (1.0 - 0.5 * x), tol, || format!("left bracket at x={x}"));
        exp.record((1.0 - 0.5 * x) - (-0.5 * x).exp(), tol, || {
            format!("right bracket at x={x}")
        });
    }
    for _ in 0..trials {
        let x = 0.5 * rng.gen::<f64>();
        exp.record((-x).exp() - (1.0 - 0.5 * x), tol, || format!("left bracket at x={x}"));
        exp.record((1.0 - 0.5 * x) - (-0.5 * x).exp(), tol, || {
            format!("right bracket at x={x}")
        });
    }

    vec![low, high, exp]
}

// ---------------------------------------------------------------------------
// Random-model suites
// ---------------------------------------------------------------------------

const ALL_SEMANTICS: [Dependence; 3] =
    [Dependence::PengForward, Dependence::PengBackward, Dependence::QwiseProduct];
const PENG_SEMANTICS: [Dependence; 2] = [Dependence::PengForward, Dependence::PengBackward];
const HEADLIKE_SEMANTICS: [Dependence; 2] = [Dependence::PengBackward, Dependence::QwiseProduct];

const LOW_P_GRID: [f64; 4] = [1.0, 1.25, 1.5, 2.0];
const HIGH_P_GRID: [f64; 4] = [2.0, 2.5, 3.0, 4.0];

fn draw_model(
    rng: &mut ChaCha8Rng,
    semantics_pool: &[Dependence],
) -> Result<SequenceModel, InequalityError> {
    let space = plain_space(rng.gen_range(2..=3));
    let verts = rng.gen_range(1..=3);
    let credal = random_credal(rng, &space, verts);
    let n = rng.gen_range(1..=4);
    let coords: Vec<_> = (0..n).map(|_| random_var(rng, &space, -2.0, 2.0)).collect();
    let sem = semantics_pool[rng.gen_range(0..semantics_pool.len())];
    Ok(SequenceModel::from_coords(&credal, coords, sem)?)
}

fn run_indexed(
    trials: u64,
    threads: usize,
    job: impl Fn(u64) -> Result<InequalityReport, InequalityError> + Sync,
) -> Result<Vec<InequalityReport>, InequalityError> {
    let idx: Vec<u64> = (0..trials).collect();
    indexed_map(&idx, threads, |_, &i| job(i)).into_iter().collect()
}

/// Random centered models against [`kolmogorov_verify`].
pub fn kolmogorov_suite(
    trials: u64,
    seed: u64,
    threads: usize,
) -> Result<Vec<InequalityReport>, InequalityError> {
    run_indexed(trials, threads, |i| {
        let s = split_seed(seed, i);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let model = draw_model(&mut rng, &HEADLIKE_SEMANTICS)?;
        kolmogorov_verify(&model, false, s)
    })
}

/// Random centered models against [`rosenthal_low_p_verify`], cycling the
/// exponent grid and drawing a variant admissible for the drawn semantics.
pub fn low_p_suite(
    trials: u64,
    seed: u64,
    threads: usize,
) -> Result<Vec<InequalityReport>, InequalityError> {
    run_indexed(trials, threads, |i| {
        let s = split_seed(seed, i);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let model = center_upper(&draw_model(&mut rng, &ALL_SEMANTICS)?)?;
        let p = LOW_P_GRID[(i % 4) as usize];
        let choices: &[LowPVariant] = match model.semantics() {
            Dependence::PengBackward => &[LowPVariant::Head, LowPVariant::PositivePart],
            Dependence::PengForward => &[LowPVariant::Tail, LowPVariant::PositivePart],
            Dependence::QwiseProduct => {
                &[LowPVariant::Head, LowPVariant::Tail, LowPVariant::PositivePart]
            }
        };
        let variant = choices[rng.gen_range(0..choices.len())];
        rosenthal_low_p_verify(&model, p, variant, s)
    })
}

/// Random centered models against [`rosenthal_nd_pge2_verify`].
pub fn nd_pge2_suite(
    trials: u64,
    seed: u64,
    threads: usize,
) -> Result<Vec<InequalityReport>, InequalityError> {
    run_indexed(trials, threads, |i| {
        let s = split_seed(seed, i);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let model = center_upper(&draw_model(&mut rng, &ALL_SEMANTICS)?)?;
        rosenthal_nd_pge2_verify(&model, HIGH_P_GRID[(i % 4) as usize], s)
    })
}

/// Random centered models against [`rosenthal_indep_pge2_verify`].
pub fn indep_pge2_suite(
    trials: u64,
    seed: u64,
    threads: usize,
) -> Result<Vec<InequalityReport>, InequalityError> {
    run_indexed(trials, threads, |i| {
        let s = split_seed(seed, i);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let model = center_upper(&draw_model(&mut rng, &PENG_SEMANTICS)?)?;
        rosenthal_indep_pge2_verify(&model, HIGH_P_GRID[(i % 4) as usize], s)
    })
}

/// Random uncentered models against [`rosenthal_general_verify`].
pub fn general_suite(
    trials: u64,
    seed: u64,
    threads: usize,
) -> Result<Vec<InequalityReport>, InequalityError> {
    run_indexed(trials, threads, |i| {
        let s = split_seed(seed, i);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let model = draw_model(&mut rng, &ALL_SEMANTICS)?;
        rosenthal_general_verify(&model, HIGH_P_GRID[(i % 4) as usize], s)
    })
}

/// Random uncentered models against [`mz_verify`].
pub fn mz_suite(
    trials: u64,
    seed: u64,
    threads: usize,
) -> Result<Vec<InequalityReport>, InequalityError> {
    run_indexed(trials, threads, |i| {
        let s = split_seed(seed, i);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let model = draw_model(&mut rng, &ALL_SEMANTICS)?;
        mz_verify(&model, HIGH_P_GRID[(i % 4) as usize], s)
    })
}

/// Random lower-centered models against [`lower_rosenthal_verify`].
pub fn lower_suite(
    trials: u64,
    seed: u64,
    threads: usize,
) -> Result<Vec<InequalityReport>, InequalityError> {
    run_indexed(trials, threads, |i| {
        let s = split_seed(seed, i);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let model = center_lower(&draw_model(&mut rng, &PENG_SEMANTICS)?)?;
        let side = match model.semantics() {
            Dependence::PengBackward => MaxSide::Head,
            _ => MaxSide::Tail,
        };
        lower_rosenthal_verify(&model, LOW_P_GRID[(i % 4) as usize], side, s)
    })
}

/// Everything at once: the six maximal-moment suites, each on its own
/// deterministic seed stream.
pub fn rosenthal_suite(
    trials: u64,
    seed: u64,
    threads: usize,
) -> Result<Vec<InequalityReport>, InequalityError> {
    let mut out = Vec::new();
    out.extend(low_p_suite(trials, split_seed(seed, 1), threads)?);
    out.extend(nd_pge2_suite(trials, split_seed(seed, 2), threads)?);
    out.extend(indep_pge2_suite(trials, split_seed(seed, 3), threads)?);
    out.extend(general_suite(trials, split_seed(seed, 4), threads)?);
    out.extend(mz_suite(trials, split_seed(seed, 5), threads)?);
    out.extend(lower_suite(trials, split_seed(seed, 6), threads)?);
    Ok(out)
}

// ---------------------------------------------------------------------------
