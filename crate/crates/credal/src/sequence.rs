//! Joint evaluation of functionals of a coordinate sequence whose marginals
//! share one credal set.
//!
//! The three dependence semantics differ in who gets to adapt:
//!
//! * [`Dependence::PengForward`] — each new coordinate's distribution may
//!   react to all earlier ones. Evaluation eliminates coordinates from the
//!   last to the first: the innermost maximization ranges over the final
//!   coordinate at every fixed history, so the adversary's choice for step
//!   `k+1` is a function of steps `1..k`.
//! * [`Dependence::PengBackward`] — the mirror image: each coordinate's
//!   distribution may react to all *later* ones. Evaluation eliminates the
//!   first coordinate first.
//! * [`Dependence::QwiseProduct`] — no adaptivity: one vertex per
//!   coordinate, chosen up front; the value is the maximum of the product
//!   expectations over all vertex tuples.
//!
//! Both Peng orders dominate the product semantics, since constant choices
//! are a special case of adaptive ones.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use std::fmt;

use crate::expr::{ExprAst, ExprError};
use crate::model::{CredalSet, ModelError, RandomVar};
use crate::report::{CheckReport, FingerprintHasher, InequalityReport};

/// Cap on dense joint grids (`|space|^horizon` cells). Keeps a stray horizon
/// from allocating unbounded memory; generous enough for every desk-scale
/// model this crate targets.
pub const DEFAULT_GRID_BUDGET: u128 = 10_000_000;

/// Cap on vertex-tuple enumeration under product semantics.
pub const DEFAULT_TUPLE_BUDGET: u128 = 10_000_000;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum SequenceError {
    Model(ModelError),
    Expr(ExprError),
    /// The functional's arity does not match the model horizon.
    ArityMismatch { functional: usize, horizon: usize },
    /// The model needs at least one coordinate.
    EmptyHorizon,
    /// The joint grid or tuple enumeration would exceed its budget.
    BudgetExceeded { needed: u128, budget: u128 },
    /// The functional produced a non-finite value on the grid.
    NonFinite { detail: String },
    /// A check's hypotheses do not hold for the given inputs.
    PreconditionViolated { detail: String },
}

impl fmt::Display for SequenceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SequenceError::Model(e) => write!(f, "{e}"),
            SequenceError::Expr(e) => write!(f, "{e}"),
            SequenceError::ArityMismatch { functional, horizon } => {
                write!(f, "functional of arity {functional} against horizon {horizon}")
            }
            SequenceError::EmptyHorizon => write!(f, "sequence model needs horizon >= 1"),
            SequenceError::BudgetExceeded { needed, budget } => {
                write!(f, "evaluation needs {needed} cells, budget is {budget}")
            }
            SequenceError::NonFinite { detail } => {
                write!(f, "non-finite functional value: {detail}")
            }
            SequenceError::PreconditionViolated { detail } => {
                write!(f, "precondition violated: {detail}")
            }
        }
    }
}

impl std::error::Error for SequenceError {}

impl From<ModelError> for SequenceError {
    fn from(e: ModelError) -> Self {
        SequenceError::Model(e)
    }
}

impl From<ExprError> for SequenceError {
    fn from(e: ExprError) -> Self {
        SequenceError::Expr(e)
    }
}

// ---------------------------------------------------------------------------
// Dependence semantics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dependence {
    PengForward,
    PengBackward,
    QwiseProduct,
}

impl Dependence {
    pub fn tag(self) -> &'static str {
        match self {
            Dependence::PengForward => "peng-forward",
            Dependence::PengBackward => "peng-backward",
            Dependence::QwiseProduct => "qwise",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "peng-forward" => Some(Dependence::PengForward),
            "peng-backward" => Some(Dependence::PengBackward),
            "qwise" => Some(Dependence::QwiseProduct),
            _ => None,
        }
    }
}

impl fmt::Display for Dependence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

// ---------------------------------------------------------------------------
// SequenceModel
// ---------------------------------------------------------------------------

/// A horizon-`n` sequence sharing one marginal credal set. Coordinates carry
/// their own value maps so that per-coordinate transforms (centering,
/// truncation) stay within the same machinery; the identically distributed
/// case is just `n` copies of one map.
#[derive(Debug, Clone)]
pub struct SequenceModel {
    marginal: CredalSet,
    coords: Vec<RandomVar>,
    semantics: Dependence,
    grid_budget: u128,
}

impl SequenceModel {
    pub fn iid(
        marginal: &CredalSet,
        x: &RandomVar,
        horizon: usize,
        semantics: Dependence,
    ) -> Result<Self, SequenceError> {
        Self::from_coords(marginal, vec![x.clone(); horizon], semantics)
    }

    pub fn from_coords(
        marginal: &CredalSet,
        coords: Vec<RandomVar>,
        semantics: Dependence,
    ) -> Result<Self, SequenceError> {
        if coords.is_empty() {
            return Err(SequenceError::EmptyHorizon);
        }
        for c in &coords {
            if c.space() != marginal.space() {
                return Err(SequenceError::Model(ModelError::SpaceMismatch));
            }
        }
        let model = SequenceModel {
            marginal: marginal.clone(),
            coords,
            semantics,
            grid_budget: DEFAULT_GRID_BUDGET,
        };
        model.check_budget()?;
        Ok(model)
    }

    pub fn with_grid_budget(mut self, budget: u128) -> Result<Self, SequenceError> {
        self.grid_budget = budget;
        self.check_budget()?;
        Ok(self)
    }

    fn check_budget(&self) -> Result<(), SequenceError> {
        let needed = self.grid_cells();
        if needed > self.grid_budget {
            return Err(SequenceError::BudgetExceeded { needed, budget: self.grid_budget });
        }
        Ok(())
    }

    pub fn grid_cells(&self) -> u128 {
        let m = self.marginal.space().size() as u128;
        let mut cells: u128 = 1;
        for _ in 0..self.horizon() {
            cells = match cells.checked_mul(m) {
                Some(c) => c,
                None => return u128::MAX,
            };
        }
        cells
    }

    pub fn marginal(&self) -> &CredalSet {
        &self.marginal
    }

    pub fn coords(&self) -> &[RandomVar] {
        &self.coords
    }

    pub fn horizon(&self) -> usize {
        self.coords.len()
    }

    pub fn semantics(&self) -> Dependence {
        self.semantics
    }

    pub fn with_semantics(&self, semantics: Dependence) -> Self {
        let mut m = self.clone();
        m.semantics = semantics;
        m
    }

    /// Rebuilds every coordinate through `f(index, coord)`.
    pub fn map_coords(
        &self,
        f: impl Fn(usize, &RandomVar) -> Result<RandomVar, ModelError>,
    ) -> Result<Self, SequenceError> {
        let coords = self
            .coords
            .iter()
            .enumerate()
            .map(|(i, c)| f(i, c))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_coords(&self.marginal, coords, self.semantics)
    }

    /// The sub-model on a contiguous coordinate block, same semantics.
    pub fn block(&self, range: std::ops::Range<usize>) -> Result<Self, SequenceError> {
        Self::from_coords(&self.marginal, self.coords[range].to_vec(), self.semantics)
    }

    pub fn fingerprint(&self) -> String {
        let mut h = FingerprintHasher::new();
        crate::expectation::hash_credal(&mut h, &self.marginal);
        h.write_u64(self.horizon() as u64);
        for c in &self.coords {
            for &v in c.values() {
                h.write_f64(v);
            }
        }
        h.write_str(self.semantics.tag());
        h.finish()
    }
}

// ---------------------------------------------------------------------------
// Functionals
// ---------------------------------------------------------------------------

/// Pointwise transform applied after the base functional, in order.
#[derive(Debug, Clone, PartialEq)]
pub enum Post {
    Abs,
    /// `v^p`; errors on fractional powers of negative values.
    Power(f64),
    PositivePart,
    Scale(f64),
    Shift(f64),
}

/// A ramp `base + slope * max(0, x - knot)` (nondecreasing) or
/// `base + slope * max(0, knot - x)` (nonincreasing); nonnegative whenever
/// `base, slope >= 0`, which the generator guarantees.
#[derive(Debug, Clone, PartialEq)]
pub struct Ramp {
    pub base: f64,
    pub slope: f64,
    pub knot: f64,
}

impl Ramp {
    fn eval(&self, x: f64, nonincreasing: bool) -> f64 {
        let t = if nonincreasing { self.knot - x } else { x - self.knot };
        self.base + self.slope * t.max(0.0)
    }
}

/// Sum of products of per-coordinate ramps, all sharing one direction. A
/// product of nonnegative coordinatewise-monotone factors is monotone in the
/// same direction, and sums preserve that.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneFunctional {
    /// `terms[t][i]` is the ramp applied to coordinate `i` in term `t`.
    pub terms: Vec<Vec<Ramp>>,
    pub nonincreasing: bool,
}

impl MonotoneFunctional {
    fn eval(&self, point: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|term| {
                term.iter()
                    .zip(point)
                    .map(|(r, &x)| r.eval(x, self.nonincreasing))
                    .product::<f64>()
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Kind {
    /// `max_{1<=k<=n} S_k`
    MaxPartialSum,
    /// `max_{0<=k<=n-1} (S_n - S_k)` — the reversed-order partial-sum max.
    MaxTailSum,
    /// `max_{1<=k<=n} |S_k|`
    MaxAbsPartialSum,
    /// `max_{0<=k<=n-1} |S_n - S_k|`
    MaxAbsTailSum,
    /// `S_n`
    Sum,
    /// `|S_n|^p`
    SumPower(f64),
    /// `(sum_k x_k^2)^p`
    SumSquaresPower(f64),
    /// Projection to one coordinate.
    Coordinate(usize),
    /// A univariate functional applied to one coordinate of a wider model.
    AtCoordinate { coord: usize, inner: Box<Functional> },
    /// Product of a functional of the first `split` coordinates and one of
    /// the rest.
    SplitProduct { split: usize, left: Box<Functional>, right: Box<Functional> },
    Expr(ExprAst),
    Monotone(MonotoneFunctional),
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Functional {
    arity: usize,
    kind: Kind,
    post: Vec<Post>,
}

impl Functional {
    pub fn new(arity: usize, kind: Kind) -> Self {
        Functional { arity, kind, post: Vec::new() }
    }

    pub fn max_partial_sum(n: usize) -> Self {
        Functional::new(n, Kind::MaxPartialSum)
    }

    pub fn max_tail_sum(n: usize) -> Self {
        Functional::new(n, Kind::MaxTailSum)
    }

    pub fn max_abs_partial_sum(n: usize) -> Self {
        Functional::new(n, Kind::MaxAbsPartialSum)
    }

    pub fn max_abs_tail_sum(n: usize) -> Self {
        Functional::new(n, Kind::MaxAbsTailSum)
    }

    pub fn sum(n: usize) -> Self {
        Functional::new(n, Kind::Sum)
    }

    pub fn sum_power(n: usize, p: f64) -> Self {
        Functional::new(n, Kind::SumPower(p))
    }

    pub fn sum_squares_power(n: usize, p: f64) -> Self {
        Functional::new(n, Kind::SumSquaresPower(p))
    }

    pub fn coordinate(n: usize, k: usize) -> Self {
        Functional::new(n, Kind::Coordinate(k))
    }

    pub fn at_coordinate(n: usize, coord: usize, inner: Functional) -> Self {
        Functional::new(n, Kind::AtCoordinate { coord, inner: Box::new(inner) })
    }

    pub fn split_product(left: Functional, right: Functional) -> Self {
        let split = left.arity;
        Functional::new(
            split + right.arity,
            Kind::SplitProduct { split, left: Box::new(left), right: Box::new(right) },
        )
    }

    pub fn expr(ast: ExprAst, arity: usize) -> Self {
        Functional::new(arity, Kind::Expr(ast))
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Functional::new(n, Kind::Constant(c))
    }

    pub fn with_post(mut self, post: Post) -> Self {
        self.post.push(post);
        self
    }

    pub fn negated(&self) -> Self {
        self.clone().with_post(Post::Scale(-1.0))
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64, SequenceError> {
        if point.len() != self.arity {
            return Err(SequenceError::ArityMismatch {
                functional: self.arity,
                horizon: point.len(),
            });
        }
        let mut v = match &self.kind {
            Kind::MaxPartialSum => {
                let mut s = 0.0;
                let mut best = f64::NEG_INFINITY;
                for &x in point {
                    s += x;
                    best = best.max(s);
                }
                best
            }
            Kind::MaxTailSum => {
                // max over k of x_{k+1} + .. + x_n, scanning from the end.
                let mut s = 0.0;
                let mut best = f64::NEG_INFINITY;
                for &x in point.iter().rev() {
                    s += x;
                    best = best.max(s);
                }
                best
            }
            Kind::MaxAbsPartialSum => {
                let mut s = 0.0;
                let mut best = f64::NEG_INFINITY;
                for &x in point {
                    s += x;
                    best = best.max(s.abs());
                }
                best
            }
            Kind::MaxAbsTailSum => {
                let mut s = 0.0;
                let mut best = f64::NEG_INFINITY;
                for &x in point.iter().rev() {
                    s += x;
                    best = best.max(s.abs());
                }
                best
            }
            Kind::Sum => point.iter().sum(),
            Kind::SumPower(p) => {
                let s: f64 = point.iter().sum();
                s.abs().powf(*p)
            }
            Kind::SumSquaresPower(p) => {
                let s: f64 = point.iter().map(|&x| x * x).sum();
                s.powf(*p)
            }
            Kind::Coordinate(k) => point[*k],
            Kind::AtCoordinate { coord, inner } => inner.eval(&point[*coord..*coord + 1])?,
            Kind::SplitProduct { split, left, right } => {
                left.eval(&point[..*split])? * right.eval(&point[*split..])?
            }
            Kind::Expr(ast) => ast.eval(point)?,
            Kind::Monotone(m) => m.eval(point),
            Kind::Constant(c) => *c,
        };
        for p in &self.post {
            v = match p {
                Post::Abs => v.abs(),
                Post::Power(e) => {
                    if v < 0.0 && e.fract() != 0.0 {
                        return Err(SequenceError::NonFinite {
                            detail: format!("fractional power {e} of negative value {v}"),
                        });
                    }
                    v.powf(*e)
                }
                Post::PositivePart => v.max(0.0),
                Post::Scale(s) => s * v,
                Post::Shift(c) => v + c,
            };
        }
        if !v.is_finite() {
            return Err(SequenceError::NonFinite { detail: format!("value {v}") });
        }
        Ok(v)
    }
}

/// Draws a coordinatewise-monotone, nonnegative functional: a sum of one to
/// three products of per-coordinate ramps. Deterministic in `seed`.
pub fn generate_monotone_functional(
    arity: usize,
    nonincreasing: bool,
    seed: u64,
) -> Functional {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_terms = rng.gen_range(1..=3);
    let terms = (0..n_terms)
        .map(|_| {
            (0..arity)
                .map(|_| Ramp {
                    base: rng.gen_range(0.0..1.0),
                    slope: rng.gen_range(0.0..1.0),
                    knot: rng.gen_range(-2.0..2.0),
                })
                .collect()
        })
        .collect();
    Functional::new(arity, Kind::Monotone(MonotoneFunctional { terms, nonincreasing }))
}

// ---------------------------------------------------------------------------
// Evaluation engine
// ---------------------------------------------------------------------------

/// Upper joint expectation of `f` under the model's dependence semantics.
pub fn eval_upper(model: &SequenceModel, f: &Functional) -> Result<f64, SequenceError> {
    if f.arity() != model.horizon() {
        return Err(SequenceError::ArityMismatch {
            functional: f.arity(),
            horizon: model.horizon(),
        });
    }
    let tensor = materialize(model, f)?;
    let m = model.marginal.space().size();
    match model.semantics {
        Dependence::PengForward => Ok(eliminate_all(tensor, m, &model.marginal, Side::Last)),
        Dependence::PengBackward => Ok(eliminate_all(tensor, m, &model.marginal, Side::First)),
        Dependence::QwiseProduct => {
            let tuples = (model.marginal.len() as u128)
                .checked_pow(model.horizon() as u32)
                .unwrap_or(u128::MAX);
            if tuples > DEFAULT_TUPLE_BUDGET {
                return Err(SequenceError::BudgetExceeded {
                    needed: tuples,
                    budget: DEFAULT_TUPLE_BUDGET,
                });
            }
            Ok(qwise_max(&tensor, m, &model.marginal))
        }
    }
}

/// Lower joint expectation: the conjugate `-upper(-f)`.
pub fn eval_lower(model: &SequenceModel, f: &Functional) -> Result<f64, SequenceError> {
    Ok(-eval_upper(model, &f.negated())?)
}

/// Evaluates `f` on the dense joint grid, row-major with coordinate 0 as the
/// slowest index.
fn materialize(model: &SequenceModel, f: &Functional) -> Result<Vec<f64>, SequenceError> {
    model.check_budget()?;
    let n = model.horizon();
    let m = model.marginal.space().size();
    let total = model.grid_cells() as usize;
    let mut tensor = Vec::with_capacity(total);
    let mut odometer = vec![0usize; n];
    let mut point: Vec<f64> = model.coords.iter().map(|c| c.values()[0]).collect();
    loop {
        tensor.push(f.eval(&point)?);
        // Advance the fastest (last) coordinate, carrying leftward.
        let mut j = n;
        loop {
            if j == 0 {
                return Ok(tensor);
            }
            j -= 1;
            odometer[j] += 1;
            if odometer[j] < m {
                point[j] = model.coords[j].values()[odometer[j]];
                break;
            }
            odometer[j] = 0;
            point[j] = model.coords[j].values()[0];
        }
    }
}

enum Side {
    First,
    Last,
}

/// Repeatedly integrates out one coordinate, taking the vertex maximum
/// pointwise in the remaining ones, until a scalar is left.
fn eliminate_all(mut tensor: Vec<f64>, m: usize, marginal: &CredalSet, side: Side) -> f64 {
    while tensor.len() > 1 {
        let cells = tensor.len() / m;
        let mut next = vec![f64::NEG_INFINITY; cells];
        match side {
            Side::Last => {
                for (j, slot) in next.iter_mut().enumerate() {
                    let block = &tensor[j * m..(j + 1) * m];
                    for q in marginal.vertices() {
                        let e: f64 =
                            q.weights().iter().zip(block).map(|(w, v)| w * v).sum();
                        if e > *slot {
                            *slot = e;
                        }
                    }
                }
            }
            Side::First => {
                for (j, slot) in next.iter_mut().enumerate() {
                    for q in marginal.vertices() {
                        let mut e = 0.0;
                        for (s, w) in q.weights().iter().enumerate() {
                            e += w * tensor[s * cells + j];
                        }
                        if e > *slot {
                            *slot = e;
                        }
                    }
                }
            }
        }
        tensor = next;
    }
    tensor[0]
}

/// Maximum of the product-measure expectation over all vertex tuples,
/// explored as a tree with shared prefix contractions. The choice made at
/// depth `k` is constant across the remaining grid, which is exactly the
/// non-adaptive semantics.
fn qwise_max(tensor: &[f64], m: usize, marginal: &CredalSet) -> f64 {
    if tensor.len() == 1 {
        return tensor[0];
    }
    let cells = tensor.len() / m;
    let mut best = f64::NEG_INFINITY;
    let mut contracted = vec![0.0; cells];
    for q in marginal.vertices() {
        for (j, slot) in contracted.iter_mut().enumerate() {
            let mut e = 0.0;
            for (s, w) in q.weights().iter().enumerate() {
                e += w * tensor[s * cells + j];
            }
            *slot = e;
        }
        let v = qwise_max(&contracted, m, marginal);
        if v > best {
            best = v;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Negative dependence check
// ---------------------------------------------------------------------------

/// Direction classification from a finite-difference scan over the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotoneScan {
    pub nondecreasing: bool,
    pub nonincreasing: bool,
}

/// Scans `f` over the block's value grid along every axis in value-sorted
/// outcome order.
pub fn monotone_scan(block: &SequenceModel, f: &Functional) -> Result<MonotoneScan, SequenceError> {
    if f.arity() != block.horizon() {
        return Err(SequenceError::ArityMismatch {
            functional: f.arity(),
            horizon: block.horizon(),
        });
    }
    let tensor = materialize(block, f)?;
    let n = block.horizon();
    let m = block.marginal.space().size();
    let mut nondec = true;
    let mut noninc = true;
    let tol = 1e-12;
    for axis in 0..n {
        // Outcome order sorted by this coordinate's values.
        let mut order: Vec<usize> = (0..m).collect();
        let vals = block.coords[axis].values();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let stride: usize = m.pow((n - 1 - axis) as u32);
        let outer: usize = tensor.len() / (m * stride);
        for o in 0..outer {
            for s in 0..stride {
                let base = o * m * stride + s;
                for w in order.windows(2) {
                    if vals[w[1]] == vals[w[0]] {
                        continue;
                    }
                    let lo = tensor[base + w[0] * stride];
                    let hi = tensor[base + w[1] * stride];
                    if hi < lo - tol {
                        nondec = false;
                    }
                    if hi > lo + tol {
                        noninc = false;
                    }
                }
            }
        }
    }
    Ok(MonotoneScan { nondecreasing: nondec, nonincreasing: noninc })
}

/// Checks the product bound for a monotone pair across a coordinate split:
/// the joint upper expectation of `phi1(first block) * phi2(second block)`
/// must not exceed the product of the blocks' upper expectations.
///
/// Hypotheses (checked, [`SequenceError::PreconditionViolated`] otherwise):
/// both functionals coordinatewise monotone in the same direction, and the
/// sign conditions in the orientation matching the model's independence
/// direction — under forward or product semantics `phi1 >= 0` pointwise with
/// upper `phi2` nonnegative; under backward semantics the roles swap, since
/// there the *first* block is the independent one.
pub fn nd_check(
    model: &SequenceModel,
    split: usize,
    phi1: &Functional,
    phi2: &Functional,
    seed: u64,
) -> Result<InequalityReport, SequenceError> {
    let n = model.horizon();
    if split == 0 || split >= n {
        return Err(SequenceError::PreconditionViolated {
            detail: format!("split {split} must cut horizon {n} into two nonempty blocks"),
        });
    }
    if phi1.arity() != split || phi2.arity() != n - split {
        return Err(SequenceError::ArityMismatch {
            functional: phi1.arity() + phi2.arity(),
            horizon: n,
        });
    }
    let left = model.block(0..split)?;
    let right = model.block(split..n)?;

    let scan1 = monotone_scan(&left, phi1)?;
    let scan2 = monotone_scan(&right, phi2)?;
    let same_direction = (scan1.nondecreasing && scan2.nondecreasing)
        || (scan1.nonincreasing && scan2.nonincreasing);
    if !same_direction {
        return Err(SequenceError::PreconditionViolated {
            detail: "functionals are not monotone in a common direction".into(),
        });
    }

    let e1 = eval_upper(&left, phi1)?;
    let e2 = eval_upper(&right, phi2)?;

    // Which block must be pointwise nonnegative and which only in upper
    // expectation depends on which block is independent of the other.
    match model.semantics {
        Dependence::PengForward | Dependence::QwiseProduct => {
            let min1 = grid_min(&left, phi1)?;
            if min1 < 0.0 {
                return Err(SequenceError::PreconditionViolated {
                    detail: format!("first-block functional takes negative value {min1}"),
                });
            }
            if e2 < 0.0 {
                return Err(SequenceError::PreconditionViolated {
                    detail: format!("second-block upper expectation {e2} is negative"),
                });
            }
        }
        Dependence::PengBackward => {
            let min2 = grid_min(&right, phi2)?;
            if min2 < 0.0 {
                return Err(SequenceError::PreconditionViolated {
                    detail: format!("second-block functional takes negative value {min2}"),
                });
            }
            if e1 < 0.0 {
                return Err(SequenceError::PreconditionViolated {
                    detail: format!("first-block upper expectation {e1} is negative"),
                });
            }
        }
    }

    let product = Functional::split_product(phi1.clone(), phi2.clone());
    let lhs = eval_upper(model, &product)?;

    let mut h = FingerprintHasher::new();
    h.write_str("nd-check").write_str(&model.fingerprint()).write_u64(split as u64);
    Ok(InequalityReport::new(
        "negative-dependence",
        lhs,
        e1 * e2,
        1.0,
        format!("product bound for a monotone pair, {} orientation", model.semantics),
        h.finish(),
        seed,
    ))
}

fn grid_min(block: &SequenceModel, f: &Functional) -> Result<f64, SequenceError> {
    Ok(materialize(block, f)?
        .into_iter()
        .fold(f64::INFINITY, f64::min))
}

// ---------------------------------------------------------------------------
// Marginal consistency
// ---------------------------------------------------------------------------

/// For every coordinate and every univariate probe, the joint evaluation of
/// `probe(X_k)` must agree with the marginal upper expectation: the
/// elimination order must not distort single-coordinate laws.
pub fn identical_distribution_check(
    model: &SequenceModel,
    probes: &[Functional],
    tol: f64,
) -> Result<CheckReport, SequenceError> {
    let mut report = CheckReport::new("identical-distribution");
    for probe in probes {
        if probe.arity() != 1 {
            return Err(SequenceError::ArityMismatch {
                functional: probe.arity(),
                horizon: 1,
            });
        }
        for k in 0..model.horizon() {
            let lifted = Functional::at_coordinate(model.horizon(), k, probe.clone());
            let joint = eval_upper(model, &lifted)?;
            let composed = model.coords()[k].map(|v| {
                probe
                    .eval(&[v])
                    .expect("probe evaluates on marginal values")
            })?;
            let marginal = crate::expectation::upper_expect(model.marginal(), &composed)?;
            report.record((joint - marginal).abs(), tol, || {
                format!("coordinate {k}: joint {joint} vs marginal {marginal}")
            });
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FiniteSpace;

    fn m0() -> (CredalSet, RandomVar) {
        let space = FiniteSpace::new(vec!["-1", "+1"]).unwrap();
        let x = RandomVar::new(&space, vec![-1.0, 1.0]).unwrap();
        let credal =
            CredalSet::from_weight_rows(&space, vec![vec![0.6, 0.4], vec![0.4, 0.6]]).unwrap();
        (credal, x)
    }

    fn product_expr(n: usize) -> Functional {
        let mut ast = ExprAst::Var(0);
        for i in 1..n {
            ast = ExprAst::Mul(Box::new(ast), Box::new(ExprAst::Var(i)));
        }
        Functional::expr(ast, n)
    }

    #[test]
    fn adaptive_product_beats_tuple_product() {
        let (credal, x) = m0();
        let f = product_expr(2);
        let fwd = SequenceModel::iid(&credal, &x, 2, Dependence::PengForward).unwrap();
        let qw = SequenceModel::iid(&credal, &x, 2, Dependence::QwiseProduct).unwrap();
        // Adaptive choice exploits the sign of the first coordinate: 0.2.
        // Constant tuples only reach (2p-1)^2 at best: 0.04.
        assert!((eval_upper(&fwd, &f).unwrap() - 0.2).abs() < 1e-12);
        assert!((eval_upper(&qw, &f).unwrap() - 0.04).abs() < 1e-12);
        assert!((eval_lower(&fwd, &f).unwrap() + 0.2).abs() < 1e-12);
        assert!((eval_lower(&qw, &f).unwrap() + 0.04).abs() < 1e-12);
    }

    #[test]
    fn forward_and_backward_agree_on_symmetric_functional() {
        let (credal, x) = m0();
        let f = product_expr(3);
        let fwd = SequenceModel::iid(&credal, &x, 3, Dependence::PengForward).unwrap();
        let bwd = SequenceModel::iid(&credal, &x, 3, Dependence::PengBackward).unwrap();
        let vf = eval_upper(&fwd, &f).unwrap();
        let vb = eval_upper(&bwd, &f).unwrap();
        assert!((vf - vb).abs() < 1e-12, "{vf} vs {vb}");
    }

    #[test]
    fn elimination_orders_differ_on_asymmetric_functional() {
        let (credal, x) = m0();
        // x1 * (x2 + 1)^2 is asymmetric; the two orientations adapt to
        // different information and need not agree.
        let ast = ExprAst::parse("x1 * pow(x2 + 1, 2)", 2).unwrap();
        let f = Functional::expr(ast, 2);
        let fwd = SequenceModel::iid(&credal, &x, 2, Dependence::PengForward).unwrap();
        let bwd = SequenceModel::iid(&credal, &x, 2, Dependence::PengBackward).unwrap();
        let vf = eval_upper(&fwd, &f).unwrap();
        let vb = eval_upper(&bwd, &f).unwrap();
        // Forward: inner max over x2 at fixed x1 = x1 >= 0 ? 1.2*... hand
        // check: E_p[(X2+1)^2] = 4p, so inner is x1*4*0.6 for x1 > 0 and
        // x1*4*0.4 for x1 < 0: outer over {-1.6, 2.4} with p in {0.4, 0.6}
        // gives 0.8. Backward: inner max over x1 at fixed x2 = 0.2*(x2+1)^2,
        // outer gives 0.2 * 4 * 0.6 = 0.48.
        assert!((vf - 0.8).abs() < 1e-12, "forward {vf}");
        assert!((vb - 0.48).abs() < 1e-12, "backward {vb}");
    }

    #[test]
    fn constant_functional_evaluates_to_constant() {
        let (credal, x) = m0();
        for sem in [Dependence::PengForward, Dependence::PengBackward, Dependence::QwiseProduct] {
            let model = SequenceModel::iid(&credal, &x, 3, sem).unwrap();
            let v = eval_upper(&model, &Functional::constant(3, 2.5)).unwrap();
            assert!((v - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_budget_is_enforced() {
        let (credal, x) = m0();
        let err = SequenceModel::iid(&credal, &x, 24, Dependence::PengForward).unwrap_err();
        assert!(matches!(err, SequenceError::BudgetExceeded { .. }));
    }

    #[test]
    fn kolmogorov_instance_by_hand() {
        // Centered coordinates {-1.2, 0.8}, squared running maximum under
        // the backward order: hand recursion gives 1.408.
        let (credal, x) = m0();
        let centered = x.shifted(-0.2).unwrap();
        let model = SequenceModel::iid(&credal, &centered, 2, Dependence::PengBackward).unwrap();
        let f = Functional::max_partial_sum(2).with_post(Post::Power(2.0));
        let v = eval_upper(&model, &f).unwrap();
        assert!((v - 1.408).abs() < 1e-12, "{v}");
    }

    #[test]
    fn builtin_functionals_evaluate_pointwise() {
        let p = [1.0, -2.0, 3.0];
        assert_eq!(Functional::max_partial_sum(3).eval(&p).unwrap(), 2.0);
        assert_eq!(Functional::max_abs_partial_sum(3).eval(&p).unwrap(), 2.0);
        // Tail sums: 3, 1, 2 -> max 3.
        assert_eq!(Functional::max_tail_sum(3).eval(&p).unwrap(), 3.0);
        assert_eq!(Functional::max_abs_tail_sum(3).eval(&p).unwrap(), 3.0);
        assert_eq!(Functional::sum(3).eval(&p).unwrap(), 2.0);
        assert_eq!(Functional::sum_power(3, 2.0).eval(&p).unwrap(), 4.0);
        assert_eq!(Functional::sum_squares_power(3, 0.5).eval(&p).unwrap(), 14.0f64.sqrt());
        assert_eq!(Functional::coordinate(3, 1).eval(&p).unwrap(), -2.0);
        let posed = Functional::sum(3).with_post(Post::PositivePart).with_post(Post::Power(2.0));
        assert_eq!(posed.eval(&p).unwrap(), 4.0);
        assert_eq!(posed.eval(&[-1.0, 0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn nd_check_passes_on_product_semantics() {
        let (credal, x) = m0();
        let model = SequenceModel::iid(&credal, &x, 2, Dependence::QwiseProduct).unwrap();
        let shift_up = |n| {
            Functional::expr(
                ExprAst::Add(Box::new(ExprAst::Var(0)), Box::new(ExprAst::Num(1.0))),
                n,
            )
        };
        let r = nd_check(&model, 1, &shift_up(1), &shift_up(1), 0).unwrap();
        assert!(r.pass, "{r:?}");
        // Both sides are exactly 1.44 here.
        assert!((r.lhs - 1.44).abs() < 1e-12);
        assert!((r.rhs - 1.44).abs() < 1e-12);
    }

    #[test]
    fn nd_check_rejects_mixed_monotonicity() {
        let (credal, x) = m0();
        let model = SequenceModel::iid(&credal, &x, 2, Dependence::QwiseProduct).unwrap();
        let up = generate_monotone_functional(1, false, 5);
        let down = generate_monotone_functional(1, true, 6);
        assert!(matches!(
            nd_check(&model, 1, &up, &down, 0),
            Err(SequenceError::PreconditionViolated { .. })
        ));
    }

    #[test]
    fn nd_check_rejects_negative_first_block() {
        let (credal, x) = m0();
        let model = SequenceModel::iid(&credal, &x, 2, Dependence::QwiseProduct).unwrap();
        let ident = Functional::coordinate(1, 0); // takes value -1 < 0
        let up = generate_monotone_functional(1, false, 5);
        assert!(matches!(
            nd_check(&model, 1, &ident, &up, 0),
            Err(SequenceError::PreconditionViolated { .. })
        ));
    }

    #[test]
    fn generated_monotone_functionals_scan_clean() {
        let (credal, x) = m0();
        let block = SequenceModel::iid(&credal, &x, 2, Dependence::QwiseProduct).unwrap();
        for seed in 0..20 {
            let up = generate_monotone_functional(2, false, seed);
            let scan = monotone_scan(&block, &up).unwrap();
            assert!(scan.nondecreasing, "seed {seed}");
            let down = generate_monotone_functional(2, true, seed);
            let scan = monotone_scan(&block, &down).unwrap();
            assert!(scan.nonincreasing, "seed {seed}");
        }
        assert_eq!(
            generate_monotone_functional(3, false, 42),
            generate_monotone_functional(3, false, 42),
        );
    }

    #[test]
    fn identical_distribution_across_coordinates() {
        let (credal, x) = m0();
        for sem in [Dependence::PengForward, Dependence::PengBackward, Dependence::QwiseProduct] {
            let model = SequenceModel::iid(&credal, &x, 3, sem).unwrap();
            let probes = vec![
                Functional::coordinate(1, 0),
                Functional::coordinate(1, 0)
                    .with_post(Post::Shift(-0.2))
                    .with_post(Post::PositivePart),
                generate_monotone_functional(1, false, 11),
            ];
            let report = identical_distribution_check(&model, &probes, 1e-12).unwrap();
            assert!(report.pass, "{sem}: {report:?}");
        }
    }

    #[test]
    fn monotone_phi_makes_forward_equal_qwise_on_two_vertex_chain() {
        // With two stochastically ordered vertices and a coordinatewise
        // nondecreasing functional, adaptivity buys nothing: the dominating
        // vertex is optimal at every history.
        let (credal, x) = m0();
        for seed in [1u64, 2, 3] {
            let f = generate_monotone_functional(3, false, seed);
            let fwd = SequenceModel::iid(&credal, &x, 3, Dependence::PengForward).unwrap();
            let qw = SequenceModel::iid(&credal, &x, 3, Dependence::QwiseProduct).unwrap();
            let a = eval_upper(&fwd, &f).unwrap();
            let b = eval_upper(&qw, &f).unwrap();
            assert!((a - b).abs() < 1e-12, "seed {seed}: {a} vs {b}");
        }
    }

    #[test]
    fn per_coordinate_values_are_respected() {
        let (credal, x) = m0();
        let clipped = x.map(|v| v.clamp(-0.5, 0.5)).unwrap();
        let model = SequenceModel::from_coords(
            &credal,
            vec![x.clone(), clipped],
            Dependence::PengForward,
        )
        .unwrap();
        let f = Functional::sum(2);
        // Upper: 0.2 + 0.5*0.2 = 0.24? No: upper of clipped is max_p E_p[clip]
        // = max(0.2*0.5...) E_p[clip] = p*0.5 + (1-p)*(-0.5) = p - 0.5 ->
        // 0.1. Sum of independent uppers: 0.2 + 0.1 = 0.3.
        let v = eval_upper(&model, &f).unwrap();
        assert!((v - 0.3).abs() < 1e-12, "{v}");
    }
}
