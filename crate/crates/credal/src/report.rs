//! Verification records and their JSONL interchange format.
//!
//! Every inequality check in this crate reduces to "is `lhs <= rhs` up to
//! slack tolerance", recorded as an [`InequalityReport`] together with the
//! constant that produced `rhs` and a fingerprint of the inputs. Reports
//! serialize one-per-line as JSONL with a fixed field order, so identical
//! runs produce byte-identical output.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

/// Base slack tolerance: a check passes iff
/// `lhs <= rhs + SLACK_TOL * max(1, |rhs|)`. Relative in the size of the
/// bound so that large-constant inequalities are not judged more leniently
/// than tight ones in absolute terms.
pub const SLACK_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Fingerprints
// ---------------------------------------------------------------------------

/// Incremental FNV-1a (64-bit) over a canonical byte encoding of the inputs.
/// Stable across runs, platforms, and thread counts; used to key reports to
/// the exact model instance they were computed from.
#[derive(Debug, Clone)]
pub struct FingerprintHasher {
    state: u64,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

impl FingerprintHasher {
    pub fn new() -> Self {
        FingerprintHasher { state: FNV_OFFSET }
    }

    pub fn write_bytes(&mut self, bytes: &[u8]) -> &mut Self {
        for &b in bytes {
            self.state ^= u64::from(b);
            self.state = self.state.wrapping_mul(FNV_PRIME);
        }
        self
    }

    pub fn write_u64(&mut self, v: u64) -> &mut Self {
        self.write_bytes(&v.to_le_bytes())
    }

    /// Hashes the exact bit pattern, so `0.1 + 0.2` and `0.3` fingerprint
    /// differently — intended: reports key the instance actually evaluated.
    pub fn write_f64(&mut self, v: f64) -> &mut Self {
        self.write_bytes(&v.to_bits().to_le_bytes())
    }

    /// Length-prefixed so that `("ab","c")` and `("a","bc")` differ.
    pub fn write_str(&mut self, s: &str) -> &mut Self {
        self.write_u64(s.len() as u64);
        self.write_bytes(s.as_bytes())
    }

    pub fn finish(&self) -> String {
        let mut out = String::with_capacity(16);
        write!(out, "{:016x}", self.state).expect("write to string");
        out
    }
}

impl Default for FingerprintHasher {
    fn default() -> Self {
        FingerprintHasher::new()
    }
}

// ---------------------------------------------------------------------------
// InequalityReport
// ---------------------------------------------------------------------------

/// Outcome of one `lhs <= constant-bearing rhs` verification.
///
/// Field order here is the serialization order of the JSONL format; do not
/// reorder fields without bumping the format.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InequalityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// The admissible constant used to form `rhs`.
    pub constant: f64,
    /// Where the constant comes from (closure of a recursion, direct bound,
    /// tolerance policy, ...), as a short human-readable note.
    pub constant_provenance: String,
    /// `rhs - lhs`; negative means the inequality failed by that much.
    pub slack: f64,
    pub pass: bool,
    pub fingerprint: String,
    pub seed: u64,
}

impl InequalityReport {
    /// Builds a report under the default slack tolerance [`SLACK_TOL`].
    pub fn new(
        name: impl Into<String>,
        lhs: f64,
        rhs: f64,
        constant: f64,
        constant_provenance: impl Into<String>,
        fingerprint: String,
        seed: u64,
    ) -> Self {
        Self::with_tolerance(name, lhs, rhs, constant, constant_provenance, fingerprint, seed, SLACK_TOL)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_tolerance(
        name: impl Into<String>,
        lhs: f64,
        rhs: f64,
        constant: f64,
        constant_provenance: impl Into<String>,
        fingerprint: String,
        seed: u64,
        tol: f64,
    ) -> Self {
        let pass = lhs <= rhs + tol * rhs.abs().max(1.0);
        InequalityReport {
            name: name.into(),
            lhs,
            rhs,
            constant,
            constant_provenance: constant_provenance.into(),
            slack: rhs - lhs,
            pass,
            fingerprint,
            seed,
        }
    }

    pub fn to_jsonl_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Writes reports one per line. Order is the caller's; callers that merge
/// reports from parallel workers are expected to collect in a deterministic
/// order first.
pub fn write_jsonl<W: Write>(reports: &[InequalityReport], mut out: W) -> io::Result<()> {
    for r in reports {
        writeln!(out, "{}", r.to_jsonl_line())?;
    }
    Ok(())
}

pub fn reports_to_jsonl(reports: &[InequalityReport]) -> String {
    let mut buf = Vec::new();
    write_jsonl(reports, &mut buf).expect("write to vec");
    String::from_utf8(buf).expect("jsonl is utf8")
}

pub fn read_jsonl<R: BufRead>(input: R) -> io::Result<Vec<InequalityReport>> {
    let mut out = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let report: InequalityReport = serde_json::from_str(&line).map_err(|e| {
            io::Error::new(
                io::ErrorKind::InvalidData,
                format!("line {}: {}", lineno + 1, e),
            )
        })?;
        out.push(report);
    }
    Ok(out)
}

/// Merges report streams into a canonical order, independent of the order
/// the inputs were produced or concatenated in.
pub fn merge_sorted(mut reports: Vec<InequalityReport>) -> Vec<InequalityReport> {
    reports.sort_by(|a, b| {
        (&a.name, &a.fingerprint, a.seed)
            .cmp(&(&b.name, &b.fingerprint, b.seed))
            .then_with(|| a.lhs.total_cmp(&b.lhs))
    });
    reports
}

// ---------------------------------------------------------------------------
// CheckReport
// ---------------------------------------------------------------------------

/// Outcome of a many-case scan (axiom sweeps, step-function scans, ...):
/// how many cases ran, how many violated, and the worst violation seen.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub cases: u64,
    pub failures: u64,
    /// Cases that did not meet the check's hypotheses and were skipped.
    pub inapplicable: u64,
    /// Most positive violation margin observed (negative when every case
    /// held with room to spare).
    pub worst_margin: f64,
    /// Compact description of the first failing case, for reproduction.
    pub first_failure: Option<String>,
    pub pass: bool,
}

impl CheckReport {
    pub fn new(name: impl Into<String>) -> Self {
        CheckReport {
            name: name.into(),
            cases: 0,
            failures: 0,
            inapplicable: 0,
            worst_margin: f64::NEG_INFINITY,
            first_failure: None,
            pass: true,
        }
    }

    /// Records one case with violation `margin` (`> tol` counts as failure).
    pub fn record(&mut self, margin: f64, tol: f64, describe: impl FnOnce() -> String) {
        self.cases += 1;
        if margin > self.worst_margin {
            self.worst_margin = margin;
        }
        if margin > tol {
            self.failures += 1;
            self.pass = false;
            if self.first_failure.is_none() {
                self.first_failure = Some(describe());
            }
        }
    }

    pub fn record_inapplicable(&mut self) {
        self.inapplicable += 1;
    }
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_rule_is_relative_in_rhs() {
        let r = InequalityReport::new("t", 1.0 + 5e-10, 1.0, 1.0, "unit", "00".into(), 0);
        assert!(r.pass);
        let r = InequalityReport::new("t", 1.0 + 5e-9, 1.0, 1.0, "unit", "00".into(), 0);
        assert!(!r.pass);
        // rhs = 100: tolerance scales with it.
        let r = InequalityReport::new("t", 100.0 + 5e-8, 100.0, 1.0, "unit", "00".into(), 0);
        assert!(r.pass);
    }

    #[test]
    fn jsonl_round_trips_and_field_order_is_fixed() {
        let r = InequalityReport::new("kolmogorov", 1.408, 2.24, 1.0, "direct", "abcd".into(), 7);
        let line = r.to_jsonl_line();
        assert!(line.starts_with(r#"{"name":"kolmogorov","lhs":1.408,"rhs":2.24,"constant":1.0,"#));
        let back = read_jsonl(line.as_bytes()).unwrap();
        assert_eq!(back, vec![r]);
    }

    #[test]
    fn fingerprint_is_stable_and_input_sensitive() {
        let mut h = FingerprintHasher::new();
        h.write_str("m0").write_f64(0.4).write_f64(0.6);
        let a = h.finish();
        let mut h = FingerprintHasher::new();
        h.write_str("m0").write_f64(0.4).write_f64(0.6);
        assert_eq!(a, h.finish());
        let mut h = FingerprintHasher::new();
        h.write_str("m0").write_f64(0.6).write_f64(0.4);
        assert_ne!(a, h.finish());
        assert_eq!(a.len(), 16);
    }

    #[test]
    fn merge_sorted_is_order_independent() {
        let a = InequalityReport::new("b", 0.0, 1.0, 1.0, "u", "02".into(), 1);
        let b = InequalityReport::new("a", 0.0, 1.0, 1.0, "u", "01".into(), 2);
        let m1 = merge_sorted(vec![a.clone(), b.clone()]);
        let m2 = merge_sorted(vec![b, a]);
        assert_eq!(m1, m2);
        assert_eq!(m1[0].name, "a");
    }

    #[test]
    fn check_report_tracks_failures() {
        let mut c = CheckReport::new("scan");
        c.record(-1e-3, 1e-9, || unreachable!());
        c.record(2e-9, 1e-9, || "case 2".into());
        assert_eq!(c.cases, 2);
        assert_eq!(c.failures, 1);
        assert!(!c.pass);
        assert_eq!(c.first_failure.as_deref(), Some("case 2"));
        assert!((c.worst_margin - 2e-9).abs() < 1e-18);
    }
}
