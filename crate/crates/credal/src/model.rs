//! Finite sample spaces, probability measures, random variables, events, and
//! credal sets (finite families of measures whose upper envelope defines the
//! expectation operators in [`crate::expectation`]).
//!
//! Measures are validated at construction and never renormalized silently: a
//! weight vector must already sum to one within [`NORMALIZATION_TOL`].

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Absolute tolerance for `sum(weights) == 1`. Weight vectors produced by
/// normalizing positive reals land within a few ulps of one, far below this;
/// anything outside it is a caller bug, not float noise.
pub const NORMALIZATION_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    /// A sample space needs at least one outcome.
    EmptySpace,
    /// Outcome labels must be pairwise distinct.
    DuplicateLabel { label: String },
    /// A per-outcome vector does not match the space size.
    LengthMismatch { expected: usize, got: usize },
    /// Measures carry nonnegative mass only.
    NegativeWeight { index: usize, weight: f64 },
    /// Weights must sum to one; nothing is renormalized on the caller's behalf.
    NotNormalized { total: f64 },
    /// Random variables take finite real values.
    NonFiniteValue { index: usize },
    /// Two objects built over different sample spaces were combined.
    SpaceMismatch,
    /// A credal set needs at least one vertex measure.
    EmptyCredal,
    /// A model document failed to parse or validate.
    Document { detail: String },
    /// The document's `format_version` is not one this build understands.
    UnsupportedFormatVersion { got: u32 },
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::EmptySpace => write!(f, "sample space has no outcomes"),
            ModelError::DuplicateLabel { label } => {
                write!(f, "duplicate outcome label {label:?}")
            }
            ModelError::LengthMismatch { expected, got } => {
                write!(f, "expected {expected} entries, got {got}")
            }
            ModelError::NegativeWeight { index, weight } => {
                write!(f, "negative weight {weight} at outcome index {index}")
            }
            ModelError::NotNormalized { total } => {
                write!(f, "weights sum to {total}, not 1")
            }
            ModelError::NonFiniteValue { index } => {
                write!(f, "non-finite value at outcome index {index}")
            }
            ModelError::SpaceMismatch => {
                write!(f, "objects belong to different sample spaces")
            }
            ModelError::EmptyCredal => write!(f, "credal set has no vertices"),
            ModelError::Document { detail } => write!(f, "model document: {detail}"),
            ModelError::UnsupportedFormatVersion { got } => {
                write!(f, "unsupported format_version {got} (expected 1)")
            }
        }
    }
}

impl std::error::Error for ModelError {}

// ---------------------------------------------------------------------------
// FiniteSpace
// ---------------------------------------------------------------------------

/// An ordered finite sample space. Outcome order is part of the identity: it
/// fixes the layout of every weight and value vector built over the space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteSpace {
    labels: Arc<Vec<String>>,
}

impl FiniteSpace {
    pub fn new<S: Into<String>>(labels: Vec<S>) -> Result<Self, ModelError> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(ModelError::EmptySpace);
        }
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].contains(a) {
                return Err(ModelError::DuplicateLabel { label: a.clone() });
            }
        }
        Ok(FiniteSpace { labels: Arc::new(labels) })
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    fn check_len(&self, got: usize) -> Result<(), ModelError> {
        if got != self.size() {
            return Err(ModelError::LengthMismatch { expected: self.size(), got });
        }
        Ok(())
    }
}

fn check_same_space(a: &FiniteSpace, b: &FiniteSpace) -> Result<(), ModelError> {
    if a != b {
        return Err(ModelError::SpaceMismatch);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Measure
// ---------------------------------------------------------------------------

/// A probability measure on a [`FiniteSpace`], stored as one weight per
/// outcome in space order.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    space: FiniteSpace,
    weights: Vec<f64>,
}

/// Validates `weights` against `space` and builds a [`Measure`].
///
/// Rejects negative weights and weight vectors whose sum deviates from one by
/// more than [`NORMALIZATION_TOL`]; the caller normalizes, not this function.
pub fn make_measure(space: &FiniteSpace, weights: Vec<f64>) -> Result<Measure, ModelError> {
    space.check_len(weights.len())?;
    for (index, &weight) in weights.iter().enumerate() {
        if !weight.is_finite() {
            return Err(ModelError::NonFiniteValue { index });
        }
        if weight < 0.0 {
            return Err(ModelError::NegativeWeight { index, weight });
        }
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(ModelError::NotNormalized { total });
    }
    Ok(Measure { space: space.clone(), weights })
}

impl Measure {
    pub fn space(&self) -> &FiniteSpace {
        &self.space
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Probability of an event: the sum of member weights.
    pub fn prob(&self, event: &EventSet) -> Result<f64, ModelError> {
        check_same_space(&self.space, &event.space)?;
        Ok(self
            .weights
            .iter()
            .zip(&event.members)
            .filter(|(_, &m)| m)
            .map(|(w, _)| w)
            .sum())
    }
}

/// Expectation of `x` under the single measure `q`: `sum_i q_i * x_i`.
pub fn linear_expect(q: &Measure, x: &RandomVar) -> Result<f64, ModelError> {
    check_same_space(&q.space, &x.space)?;
    Ok(q.weights.iter().zip(&x.values).map(|(w, v)| w * v).sum())
}

// ---------------------------------------------------------------------------
// RandomVar
// ---------------------------------------------------------------------------

/// A real-valued random variable on a [`FiniteSpace`]: one finite value per
/// outcome in space order.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomVar {
    space: FiniteSpace,
    values: Vec<f64>,
}

impl RandomVar {
    pub fn new(space: &FiniteSpace, values: Vec<f64>) -> Result<Self, ModelError> {
        space.check_len(values.len())?;
        for (index, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(ModelError::NonFiniteValue { index });
            }
        }
        Ok(RandomVar { space: space.clone(), values })
    }

    pub fn constant(space: &FiniteSpace, c: f64) -> Result<Self, ModelError> {
        RandomVar::new(space, vec![c; space.size()])
    }

    pub fn space(&self) -> &FiniteSpace {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Applies `f` pointwise. The result must still be finite everywhere.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self, ModelError> {
        RandomVar::new(&self.space, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs).expect("abs of finite values is finite")
    }

    pub fn shifted(&self, c: f64) -> Result<Self, ModelError> {
        self.map(|v| v + c)
    }

    pub fn scaled(&self, lambda: f64) -> Result<Self, ModelError> {
        self.map(|v| lambda * v)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// The event `{X >= t}`.
    pub fn event_ge(&self, t: f64) -> EventSet {
        EventSet {
            space: self.space.clone(),
            members: self.values.iter().map(|&v| v >= t).collect(),
        }
    }

    /// The event `{X > t}`.
    pub fn event_gt(&self, t: f64) -> EventSet {
        EventSet {
            space: self.space.clone(),
            members: self.values.iter().map(|&v| v > t).collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// EventSet
// ---------------------------------------------------------------------------

/// A subset of a [`FiniteSpace`], stored as a membership flag per outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventSet {
    space: FiniteSpace,
    members: Vec<bool>,
}

impl EventSet {
    pub fn from_members(space: &FiniteSpace, members: Vec<bool>) -> Result<Self, ModelError> {
        space.check_len(members.len())?;
        Ok(EventSet { space: space.clone(), members })
    }

    pub fn from_indices(space: &FiniteSpace, indices: &[usize]) -> Result<Self, ModelError> {
        let mut members = vec![false; space.size()];
        for &i in indices {
            if i >= space.size() {
                return Err(ModelError::LengthMismatch { expected: space.size(), got: i + 1 });
            }
            members[i] = true;
        }
        Ok(EventSet { space: space.clone(), members })
    }

    pub fn from_predicate(space: &FiniteSpace, pred: impl Fn(&str) -> bool) -> Self {
        EventSet {
            space: space.clone(),
            members: space.labels().iter().map(|l| pred(l)).collect(),
        }
    }

    pub fn empty(space: &FiniteSpace) -> Self {
        EventSet { space: space.clone(), members: vec![false; space.size()] }
    }

    pub fn full(space: &FiniteSpace) -> Self {
        EventSet { space: space.clone(), members: vec![true; space.size()] }
    }

    pub fn space(&self) -> &FiniteSpace {
        &self.space
    }

    pub fn members(&self) -> &[bool] {
        &self.members
    }

    pub fn contains(&self, index: usize) -> bool {
        self.members.get(index).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.members.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.members.iter().all(|&m| !m)
    }

    pub fn indices(&self) -> Vec<usize> {
        self.members
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn complement(&self) -> Self {
        EventSet {
            space: self.space.clone(),
            members: self.members.iter().map(|&m| !m).collect(),
        }
    }

    pub fn union(&self, other: &EventSet) -> Result<Self, ModelError> {
        check_same_space(&self.space, &other.space)?;
        Ok(EventSet {
            space: self.space.clone(),
            members: self
                .members
                .iter()
                .zip(&other.members)
                .map(|(&a, &b)| a || b)
                .collect(),
        })
    }

    pub fn intersect(&self, other: &EventSet) -> Result<Self, ModelError> {
        check_same_space(&self.space, &other.space)?;
        Ok(EventSet {
            space: self.space.clone(),
            members: self
                .members
                .iter()
                .zip(&other.members)
                .map(|(&a, &b)| a && b)
                .collect(),
        })
    }

    pub fn is_subset_of(&self, other: &EventSet) -> Result<bool, ModelError> {
        check_same_space(&self.space, &other.space)?;
        Ok(self.members.iter().zip(&other.members).all(|(&a, &b)| !a || b))
    }

    /// The indicator of the event as a 0/1 random variable.
    pub fn indicator(&self) -> RandomVar {
        RandomVar {
            space: self.space.clone(),
            values: self.members.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// CredalSet
// ---------------------------------------------------------------------------

/// A nonempty finite family of measures over one space. The family is treated
/// as the vertex list of the credal set; upper expectations maximize over it.
#[derive(Debug, Clone, PartialEq)]
pub struct CredalSet {
    space: FiniteSpace,
    vertices: Vec<Measure>,
}

impl CredalSet {
    pub fn new(space: &FiniteSpace, vertices: Vec<Measure>) -> Result<Self, ModelError> {
        if vertices.is_empty() {
            return Err(ModelError::EmptyCredal);
        }
        for q in &vertices {
            check_same_space(space, &q.space)?;
        }
        Ok(CredalSet { space: space.clone(), vertices })
    }

    /// Builds the credal set from raw weight rows, validating each row.
    pub fn from_weight_rows(
        space: &FiniteSpace,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self, ModelError> {
        let vertices = rows
            .into_iter()
            .map(|row| make_measure(space, row))
            .collect::<Result<Vec<_>, _>>()?;
        CredalSet::new(space, vertices)
    }

    pub fn space(&self) -> &FiniteSpace {
        &self.space
    }

    pub fn vertices(&self) -> &[Measure] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

// ---------------------------------------------------------------------------
// Model document (JSON interchange)
// ---------------------------------------------------------------------------

/// The on-disk model format. Field order is fixed; unknown fields are
/// rejected so that typos fail loudly instead of being ignored.
///
/// `horizon` and `semantics` extend a plain model to a sequence model; they
/// are optional and omitted from output when absent.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub format_version: u32,
    pub outcomes: Vec<String>,
    pub values: Vec<f64>,
    pub vertices: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantics: Option<String>,
}

impl ModelDocument {
    pub fn new(outcomes: Vec<String>, values: Vec<f64>, vertices: Vec<Vec<f64>>) -> Self {
        ModelDocument {
            format_version: 1,
            outcomes,
            values,
            vertices,
            horizon: None,
            semantics: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Document { detail: e.to_string() })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model document serializes")
    }

    /// Validates the document and builds the typed triple.
    pub fn build(&self) -> Result<(FiniteSpace, RandomVar, CredalSet), ModelError> {
        if self.format_version != 1 {
            return Err(ModelError::UnsupportedFormatVersion { got: self.format_version });
        }
        let space = FiniteSpace::new(self.outcomes.clone())?;
        let x = RandomVar::new(&space, self.values.clone())?;
        let credal = CredalSet::from_weight_rows(&space, self.vertices.clone())?;
        Ok((space, x, credal))
    }
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn pm_space() -> FiniteSpace {
        FiniteSpace::new(vec!["-1", "+1"]).unwrap()
    }

    #[test]
    fn make_measure_accepts_valid_weights() {
        let q = make_measure(&pm_space(), vec![0.4, 0.6]).unwrap();
        assert_eq!(q.weights(), &[0.4, 0.6]);
    }

    #[test]
    fn make_measure_rejects_negative_weight() {
        let err = make_measure(&pm_space(), vec![-0.1, 1.1]).unwrap_err();
        assert!(matches!(err, ModelError::NegativeWeight { index: 0, .. }));
    }

    #[test]
    fn make_measure_rejects_unnormalized_weights() {
        let err = make_measure(&pm_space(), vec![0.4, 0.7]).unwrap_err();
        assert!(matches!(err, ModelError::NotNormalized { .. }));
        // Off by 1e-6 is far outside tolerance; nothing renormalizes it.
        let err = make_measure(&pm_space(), vec![0.4, 0.600001]).unwrap_err();
        assert!(matches!(err, ModelError::NotNormalized { .. }));
    }

    #[test]
    fn make_measure_rejects_length_mismatch() {
        let err = make_measure(&pm_space(), vec![1.0]).unwrap_err();
        assert!(matches!(err, ModelError::LengthMismatch { expected: 2, got: 1 }));
    }

    #[test]
    fn space_rejects_duplicate_labels() {
        let err = FiniteSpace::new(vec!["a", "a"]).unwrap_err();
        assert!(matches!(err, ModelError::DuplicateLabel { .. }));
    }

    #[test]
    fn linear_expect_matches_hand_sum() {
        let space = pm_space();
        let q = make_measure(&space, vec![0.4, 0.6]).unwrap();
        let x = RandomVar::new(&space, vec![-1.0, 1.0]).unwrap();
        let e = linear_expect(&q, &x).unwrap();
        assert!((e - 0.2).abs() < 1e-15);
    }

    #[test]
    fn complement_is_involution() {
        let space = FiniteSpace::new(vec!["a", "b", "c"]).unwrap();
        let a = EventSet::from_indices(&space, &[0, 2]).unwrap();
        assert_eq!(a.complement().complement(), a);
        assert_eq!(a.complement().indices(), vec![1]);
    }

    #[test]
    fn event_prob_sums_member_weights() {
        let space = pm_space();
        let q = make_measure(&space, vec![0.4, 0.6]).unwrap();
        let up = EventSet::from_indices(&space, &[1]).unwrap();
        assert!((q.prob(&up).unwrap() - 0.6).abs() < 1e-15);
        assert!((q.prob(&up.complement()).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn space_mismatch_is_detected() {
        let a = pm_space();
        let b = FiniteSpace::new(vec!["x", "y"]).unwrap();
        let q = make_measure(&a, vec![0.5, 0.5]).unwrap();
        let x = RandomVar::new(&b, vec![0.0, 1.0]).unwrap();
        assert!(matches!(linear_expect(&q, &x), Err(ModelError::SpaceMismatch)));
    }

    #[test]
    fn random_var_rejects_non_finite() {
        let err = RandomVar::new(&pm_space(), vec![f64::NAN, 0.0]).unwrap_err();
        assert!(matches!(err, ModelError::NonFiniteValue { index: 0 }));
    }

    #[test]
    fn document_round_trips_and_builds() {
        let doc = ModelDocument {
            format_version: 1,
            outcomes: vec!["-1".into(), "+1".into()],
            values: vec![-1.0, 1.0],
            vertices: vec![vec![0.6, 0.4], vec![0.4, 0.6]],
            horizon: Some(2),
            semantics: Some("peng-forward".into()),
        };
        let text = doc.to_json();
        let back = ModelDocument::from_json(&text).unwrap();
        assert_eq!(doc, back);
        let (space, x, credal) = back.build().unwrap();
        assert_eq!(space.size(), 2);
        assert_eq!(x.values(), &[-1.0, 1.0]);
        assert_eq!(credal.len(), 2);
    }

    #[test]
    fn document_field_order_is_stable() {
        let doc = ModelDocument::new(
            vec!["-1".into(), "+1".into()],
            vec![-1.0, 1.0],
            vec![vec![0.5, 0.5]],
        );
        assert_eq!(
            doc.to_json(),
            r#"{"format_version":1,"outcomes":["-1","+1"],"values":[-1.0,1.0],"vertices":[[0.5,0.5]]}"#
        );
    }

    #[test]
    fn document_rejects_unknown_fields() {
        let text = r#"{"format_version":1,"outcomes":["a"],"values":[0.0],"vertices":[[1.0]],"extra":3}"#;
        assert!(ModelDocument::from_json(text).is_err());
    }

    #[test]
    fn document_rejects_wrong_version() {
        let text = r#"{"format_version":2,"outcomes":["a"],"values":[0.0],"vertices":[[1.0]]}"#;
        let doc = ModelDocument::from_json(text).unwrap();
        assert!(matches!(
            doc.build(),
            Err(ModelError::UnsupportedFormatVersion { got: 2 })
        ));
    }
}
