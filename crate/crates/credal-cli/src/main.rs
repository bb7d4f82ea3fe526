//! Command-line front end: evaluate expressions under a model, run
//! verification suites, simulate running-mean trajectories, compute
//! level-set integrals, and summarize report files.
//!
//! Exit codes: 0 all checks pass, 1 check failures, 2 usage or
//! configuration errors, 3 I/O errors, 4 model validation errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use credal::inequality::{center_lower, center_upper};
use credal::rng::{plain_space, random_credal, random_var, split_seed};
use credal::{
    choquet, choquet_vs_riemann, eval_upper, kolmogorov_suite, kolmogorov_verify,
    lower_rosenthal_verify, mean_choquet_domination, merge_sorted, mz_verify, read_jsonl,
    rosenthal_general_verify, rosenthal_indep_pge2_verify, rosenthal_low_p_verify,
    rosenthal_nd_pge2_verify, simulate_with, smooth_indicator_sandwich, trajectory_sidecar_json,
    truncated_second_moment_bound, write_jsonl, write_trajectory_csv, CredalSet, Dependence,
    ExprAst, Functional, InequalityError, InequalityReport, LowPVariant, MaxSide, ModelDocument,
    RandomVar, SelectionPolicy, SequenceModel, SimulationConfig, SllnError,
};

const SUITE_THREADS: usize = 4;
const LOW_P_GRID: [f64; 4] = [1.0, 1.25, 1.5, 2.0];
const HIGH_P_GRID: [f64; 4] = [2.0, 2.5, 3.0, 4.0];

#[derive(Parser)]
#[command(name = "credal", version, about = "Upper/lower expectation laboratory for finite credal sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the joint upper expectation of an expression under a model.
    Eval {
        /// Model JSON file.
        #[arg(long)]
        model: PathBuf,
        /// Expression over coordinates x1..xn, e.g. "max(x1, x1+x2)^2".
        #[arg(long)]
        phi: String,
        /// peng-forward, peng-backward, or qwise; overrides the model file.
        #[arg(long)]
        semantics: Option<String>,
    },
    /// Run a named verification suite and write its reports as JSON lines.
    Verify {
        /// kolmogorov, rosenthal, low-p, nd-pge2, indep-pge2, general, mz,
        /// lower, capacity, or all.
        #[arg(long)]
        suite: String,
        /// Pin the marginal and values to this model instead of drawing
        /// random ones; horizons and exponents still vary per trial.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the relative slack tolerance used for pass/fail.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Write JSONL here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate one running-mean trajectory to CSV plus metadata sidecar.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        /// fixed:i, iid-random, periodic:L, periodic-doubling:L,
        /// periodic-squaring:n0, greedy:t, or schedule:i,j,...
        #[arg(long)]
        policy: String,
        #[arg(long)]
        steps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fraction of final steps covered by the tail statistics.
        #[arg(long, default_value_t = 0.2)]
        tail_fraction: f64,
        /// CSV output path; the sidecar lands next to it as .meta.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print upper and lower level-set integrals of the model's variable.
    Choquet {
        #[arg(long)]
        model: PathBuf,
        /// Optional reshaping of the variable, arity 1, e.g. "abs(x1)".
        #[arg(long)]
        phi: Option<String>,
    },
    /// Merge JSONL report files into a summary table.
    Report {
        /// One or more JSONL files produced by `verify`.
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

// ---------------------------------------------------------------------------
// Error-to-exit-code mapping
// ---------------------------------------------------------------------------

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
    fn io(message: impl Into<String>) -> Self {
        Failure { code: 3, message: message.into() }
    }
    fn model(message: impl Into<String>) -> Self {
        Failure { code: 4, message: message.into() }
    }
}

impl From<InequalityError> for Failure {
    fn from(e: InequalityError) -> Self {
        Failure::config(e.to_string())
    }
}

impl From<SllnError> for Failure {
    fn from(e: SllnError) -> Self {
        match e {
            SllnError::Model(m) => Failure::model(m.to_string()),
            other => Failure::config(other.to_string()),
        }
    }
}

/// Clamps display noise below the engine's own tolerance floor so that a
/// value computed as 0.19999999999999996 prints as 0.2.
fn display_round(v: f64) -> f64 {
    if v.is_finite() && v.abs() < 1e9 {
        (v * 1e12).round() / 1e12
    } else {
        v
    }
}

fn read_model(path: &Path) -> Result<(CredalSet, RandomVar, ModelDocument), Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    let doc = ModelDocument::from_json(&text)
        .map_err(|e| Failure::model(format!("{}: {e}", path.display())))?;
    let (_space, x, credal) =
        doc.build().map_err(|e| Failure::model(format!("{}: {e}", path.display())))?;
    Ok((credal, x, doc))
}

fn doc_semantics(doc: &ModelDocument, flag: Option<&str>) -> Result<Dependence, Failure> {
    if let Some(tag) = flag {
        return Dependence::from_tag(tag)
            .ok_or_else(|| Failure::config(format!("unknown semantics '{tag}'")));
    }
    match doc.semantics.as_deref() {
        Some(tag) => Dependence::from_tag(tag)
            .ok_or_else(|| Failure::model(format!("model file names unknown semantics '{tag}'"))),
        None => Ok(Dependence::PengForward),
    }
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_eval(model: &Path, phi: &str, semantics: Option<&str>) -> Result<u8, Failure> {
    let (credal, x, doc) = read_model(model)?;
    let sem = doc_semantics(&doc, semantics)?;
    let (ast, arity) = match doc.horizon {
        Some(h) => (ExprAst::parse(phi, h).map_err(|e| Failure::config(e.to_string()))?, h),
        None => {
            let (ast, inferred) =
                ExprAst::parse_infer_arity(phi).map_err(|e| Failure::config(e.to_string()))?;
            (ast, inferred.max(1))
        }
    };
    let joint = SequenceModel::iid(&credal, &x, arity, sem)
        .map_err(|e| Failure::model(e.to_string()))?;
    let value = eval_upper(&joint, &Functional::expr(ast, arity))
        .map_err(|e| Failure::config(e.to_string()))?;
    println!("{}", display_round(value));
    Ok(0)
}

fn cmd_verify(
    suite: &str,
    model: Option<&Path>,
    trials: u64,
    seed: u64,
    tolerance: Option<f64>,
    out: Option<&Path>,
) -> Result<u8, Failure> {
    let pinned = match model {
        Some(path) => {
            let (credal, x, _doc) = read_model(path)?;
            Some((credal, x))
        }
        None => None,
    };
    let mut reports = run_suite(suite, pinned.as_ref(), trials, seed)?;
    if let Some(tol) = tolerance {
        if !(tol >= 0.0 && tol.is_finite()) {
            return Err(Failure::config(format!("tolerance {tol} must be finite and >= 0")));
        }
        reports = reports
            .into_iter()
            .map(|r| {
                InequalityReport::with_tolerance(
                    r.name,
                    r.lhs,
                    r.rhs,
                    r.constant,
                    r.constant_provenance,
                    r.fingerprint,
                    r.seed,
                    tol,
                )
            })
            .collect();
    }
    let reports = merge_sorted(reports);
    match out {
        Some(path) => {
            let file = fs::File::create(path)
                .map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
            write_jsonl(&reports, file).map_err(|e| Failure::io(e.to_string()))?;
        }
        None => {
            let stdout = std::io::stdout();
            write_jsonl(&reports, stdout.lock()).map_err(|e| Failure::io(e.to_string()))?;
        }
    }
    Ok(if reports.iter().all(|r| r.pass) { 0 } else { 1 })
}

fn cmd_simulate(
    model: &Path,
    policy: &str,
    steps: u64,
    seed: u64,
    tail_fraction: f64,
    out: &Path,
) -> Result<u8, Failure> {
    let (credal, x, _doc) = read_model(model)?;
    let policy = SelectionPolicy::parse(policy)?;
    let config = SimulationConfig { tail_fraction, record_means_from: None };
    let traj = simulate_with(&credal, &x, &policy, steps, seed, &config)?;
    let file =
        fs::File::create(out).map_err(|e| Failure::io(format!("{}: {e}", out.display())))?;
    write_trajectory_csv(&traj, file).map_err(|e| Failure::io(e.to_string()))?;
    let sidecar = out.with_extension("meta.json");
    fs::write(&sidecar, trajectory_sidecar_json(&traj) + "\n")
        .map_err(|e| Failure::io(format!("{}: {e}", sidecar.display())))?;
    eprintln!(
        "wrote {} checkpoints to {} (metadata: {})",
        traj.checkpoints.len(),
        out.display(),
        sidecar.display()
    );
    Ok(0)
}

fn cmd_choquet(model: &Path, phi: Option<&str>) -> Result<u8, Failure> {
    let (credal, x, _doc) = read_model(model)?;
    let x = match phi {
        Some(text) => {
            let ast = ExprAst::parse(text, 1).map_err(|e| Failure::config(e.to_string()))?;
            x.map(|v| ast.eval(&[v]).unwrap_or(f64::NAN))
                .map_err(|e| Failure::config(e.to_string()))?
        }
        None => x,
    };
    let upper = choquet(&credal, &x).map_err(|e| Failure::model(e.to_string()))?.value;
    let negated = x.scaled(-1.0).map_err(|e| Failure::model(e.to_string()))?;
    let lower = -choquet(&credal, &negated).map_err(|e| Failure::model(e.to_string()))?.value;
    println!(
        "{}",
        serde_json::json!({
            "choquet_lower": display_round(lower),
            "choquet_upper": display_round(upper),
        })
    );
    Ok(0)
}

fn cmd_report(files: &[PathBuf]) -> Result<u8, Failure> {
    let mut all = Vec::new();
    for path in files {
        let file = fs::File::open(path)
            .map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
        let reports = read_jsonl(std::io::BufReader::new(file))
            .map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
        all.extend(reports);
    }
    let merged = merge_sorted(all);

    let mut names: Vec<&str> = merged.iter().map(|r| r.name.as_str()).collect();
    names.dedup();
    let mut total_runs = 0u64;
    let mut total_failures = 0u64;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let emit = |out: &mut dyn Write, line: String| {
        writeln!(out, "{line}").map_err(|e| Failure::io(e.to_string()))
    };
    emit(&mut out, format!("{:<32} {:>8} {:>9} {:>13}", "name", "runs", "failures", "worst_slack"))?;
    for name in names {
        let rows: Vec<&InequalityReport> = merged.iter().filter(|r| r.name == name).collect();
        let runs = rows.len() as u64;
        let failures = rows.iter().filter(|r| !r.pass).count() as u64;
        let worst = rows.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
        total_runs += runs;
        total_failures += failures;
        emit(&mut out, format!("{name:<32} {runs:>8} {failures:>9} {worst:>13.3e}"))?;
    }
    emit(&mut out, format!("{:<32} {total_runs:>8} {total_failures:>9}", "total"))?;
    Ok(if total_failures == 0 { 0 } else { 1 })
}

// ---------------------------------------------------------------------------
// Verification suites
// ---------------------------------------------------------------------------

fn run_suite(
    suite: &str,
    pinned: Option<&(CredalSet, RandomVar)>,
    trials: u64,
    seed: u64,
) -> Result<Vec<InequalityReport>, Failure> {
    match suite {
        "all" => {
            let mut out = run_suite("kolmogorov", pinned, trials, split_seed(seed, 101))?;
            out.extend(run_suite("rosenthal", pinned, trials, split_seed(seed, 102))?);
            out.extend(run_suite("capacity", pinned, trials, split_seed(seed, 103))?);
            Ok(out)
        }
        "rosenthal" => {
            let mut out = Vec::new();
            for (k, family) in
                ["low-p", "nd-pge2", "indep-pge2", "general", "mz", "lower"].iter().enumerate()
            {
                out.extend(run_suite(family, pinned, trials, split_seed(seed, 1 + k as u64))?);
            }
            Ok(out)
        }
        "capacity" => capacity_suite(pinned, trials, seed),
        "kolmogorov" | "low-p" | "nd-pge2" | "indep-pge2" | "general" | "mz" | "lower" => {
            match pinned {
                Some((credal, x)) => pinned_family(suite, credal, x, trials, seed),
                None => random_family(suite, trials, seed),
            }
        }
        other => Err(Failure::config(format!("unknown suite '{other}'"))),
    }
}

fn random_family(family: &str, trials: u64, seed: u64) -> Result<Vec<InequalityReport>, Failure> {
    use credal::inequality as iq;
    let out = match family {
        "kolmogorov" => kolmogorov_suite(trials, seed, SUITE_THREADS)?,
        "low-p" => iq::low_p_suite(trials, seed, SUITE_THREADS)?,
        "nd-pge2" => iq::nd_pge2_suite(trials, seed, SUITE_THREADS)?,
        "indep-pge2" => iq::indep_pge2_suite(trials, seed, SUITE_THREADS)?,
        "general" => iq::general_suite(trials, seed, SUITE_THREADS)?,
        "mz" => iq::mz_suite(trials, seed, SUITE_THREADS)?,
        "lower" => iq::lower_suite(trials, seed, SUITE_THREADS)?,
        other => unreachable!("dispatched family {other}"),
    };
    Ok(out)
}

fn pinned_family(
    family: &str,
    credal: &CredalSet,
    x: &RandomVar,
    trials: u64,
    seed: u64,
) -> Result<Vec<InequalityReport>, Failure> {
    let all_sem =
        [Dependence::PengForward, Dependence::PengBackward, Dependence::QwiseProduct];
    let peng_sem = [Dependence::PengForward, Dependence::PengBackward];
    let headlike = [Dependence::PengBackward, Dependence::QwiseProduct];
    let mut out = Vec::with_capacity(trials as usize);
    for i in 0..trials {
        let s = split_seed(seed, i);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let report = match family {
            "kolmogorov" => {
                let h = rng.gen_range(1..=5);
                let sem = headlike[rng.gen_range(0..headlike.len())];
                let joint = SequenceModel::iid(credal, x, h, sem)
                    .map_err(|e| Failure::model(e.to_string()))?;
                kolmogorov_verify(&joint, false, s)?
            }
            "low-p" => {
                let h = rng.gen_range(1..=4);
                let sem = all_sem[rng.gen_range(0..all_sem.len())];
                let joint = SequenceModel::iid(credal, x, h, sem)
                    .map_err(|e| Failure::model(e.to_string()))?;
                let centered = center_upper(&joint)?;
                let p = LOW_P_GRID[(i % 4) as usize];
                let choices: &[LowPVariant] = match sem {
                    Dependence::PengBackward => &[LowPVariant::Head, LowPVariant::PositivePart],
                    Dependence::PengForward => &[LowPVariant::Tail, LowPVariant::PositivePart],
                    Dependence::QwiseProduct => {
                        &[LowPVariant::Head, LowPVariant::Tail, LowPVariant::PositivePart]
                    }
                };
                let variant = choices[rng.gen_range(0..choices.len())];
                rosenthal_low_p_verify(&centered, p, variant, s)?
            }
            "nd-pge2" | "general" | "mz" => {
                let h = rng.gen_range(1..=4);
                let sem = all_sem[rng.gen_range(0..all_sem.len())];
                let joint = SequenceModel::iid(credal, x, h, sem)
                    .map_err(|e| Failure::model(e.to_string()))?;
                let p = HIGH_P_GRID[(i % 4) as usize];
                match family {
                    "nd-pge2" => rosenthal_nd_pge2_verify(&center_upper(&joint)?, p, s)?,
                    "general" => rosenthal_general_verify(&joint, p, s)?,
                    _ => mz_verify(&joint, p, s)?,
                }
            }
            "indep-pge2" => {
                let h = rng.gen_range(1..=4);
                let sem = peng_sem[rng.gen_range(0..peng_sem.len())];
                let joint = SequenceModel::iid(credal, x, h, sem)
                    .map_err(|e| Failure::model(e.to_string()))?;
                rosenthal_indep_pge2_verify(
                    &center_upper(&joint)?,
                    HIGH_P_GRID[(i % 4) as usize],
                    s,
                )?
            }
            "lower" => {
                let h = rng.gen_range(1..=4);
                let sem = peng_sem[rng.gen_range(0..peng_sem.len())];
                let joint = SequenceModel::iid(credal, x, h, sem)
                    .map_err(|e| Failure::model(e.to_string()))?;
                let centered = center_lower(&joint)?;
                let side = match sem {
                    Dependence::PengBackward => MaxSide::Head,
                    _ => MaxSide::Tail,
                };
                lower_rosenthal_verify(&centered, LOW_P_GRID[(i % 4) as usize], side, s)?
            }
            other => unreachable!("dispatched family {other}"),
        };
        out.push(report);
    }
    Ok(out)
}

fn capacity_suite(
    pinned: Option<&(CredalSet, RandomVar)>,
    trials: u64,
    seed: u64,
) -> Result<Vec<InequalityReport>, Failure> {
    let mut out = Vec::new();
    for i in 0..trials {
        let s = split_seed(seed, i);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let (credal, x) = match pinned {
            Some((credal, x)) => (credal.clone(), x.clone()),
            None => {
                let space = plain_space(rng.gen_range(1..=6));
                let verts = rng.gen_range(1..=5);
                let credal = random_credal(&mut rng, &space, verts);
                let x = random_var(&mut rng, &space, -3.0, 3.0);
                (credal, x)
            }
        };
        let capacity_err = |e: credal::CapacityError| Failure::config(e.to_string());
        out.push(choquet_vs_riemann(&credal, &x, 0.05).map_err(capacity_err)?);
        out.push(mean_choquet_domination(&credal, &x).map_err(|e| Failure::model(e.to_string()))?);
        let jmax = 1 + (i % 30) as usize;
        out.push(truncated_second_moment_bound(&credal, &x, jmax).map_err(capacity_err)?);
        let top = x.abs().max_value();
        let c = if top > 0.0 { top * [0.5, 0.75, 1.0][(i % 3) as usize] } else { 1.0 };
        out.extend(smooth_indicator_sandwich(&credal, &x, c, 0.5).map_err(capacity_err)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Eval { model, phi, semantics } => cmd_eval(model, phi, semantics.as_deref()),
        Command::Verify { suite, model, trials, seed, tolerance, out } => {
            cmd_verify(suite, model.as_deref(), *trials, *seed, *tolerance, out.as_deref())
        }
        Command::Simulate { model, policy, steps, seed, tail_fraction, out } => {
            cmd_simulate(model, policy, *steps, *seed, *tail_fraction, out)
        }
        Command::Choquet { model, phi } => cmd_choquet(model, phi.as_deref()),
        Command::Report { files } => cmd_report(files),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
