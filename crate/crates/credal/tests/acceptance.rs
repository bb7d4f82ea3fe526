//! End-to-end acceptance gate: every release-blocking property in one
//! target, one pass/fail line per criterion, with runtime budgets.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use credal::rng::{plain_space, random_credal, random_var, split_seed};
use credal::{
    band_suite, check_axioms, choquet, closure_scan_check, cluster_run, default_policy_set,
    eval_upper, kolmogorov_suite, kolmogorov_verify, mean_choquet_domination, oracle_choquet,
    oracle_nd_scan, oracle_upper, outer_capacity, rosenthal_suite, scalar_inequality_suite,
    trajectory_csv_string, trajectory_sidecar_json, truncated_second_moment_bound, upper_capacity,
    BandOutcome, CredalSet, Dependence, EventSet, FiniteSpace, Functional, NdScanConfig,
    RandomVar, SelectionPolicy, SequenceModel,
};

const MASTER_SEED: u64 = 0x5EED_2026;

struct Outcome {
    index: usize,
    pass: bool,
    elapsed: f64,
    budget: f64,
    detail: String,
}

fn finish(results: &mut Vec<Outcome>, index: usize, budget: f64, started: Instant, mut pass: bool, detail: String) {
    let elapsed = started.elapsed().as_secs_f64();
    let mut detail = detail;
    if elapsed > budget {
        pass = false;
        detail = format!("{detail}; over time budget");
    }
    println!(
        "criterion {index:02} {} ({elapsed:.1}s/{budget:.0}s) {detail}",
        if pass { "pass" } else { "FAIL" }
    );
    results.push(Outcome { index, pass, elapsed, budget, detail });
}

fn m0() -> (CredalSet, RandomVar) {
    let space = FiniteSpace::new(vec!["lo", "hi"]).unwrap();
    let credal = CredalSet::from_weight_rows(&space, vec![vec![0.6, 0.4], vec![0.4, 0.6]]).unwrap();
    let x = RandomVar::new(&space, vec![-1.0, 1.0]).unwrap();
    (credal, x)
}

// ---------------------------------------------------------------------------
// Individual criteria
// ---------------------------------------------------------------------------

fn criterion_axioms(results: &mut Vec<Outcome>) {
    let t = Instant::now();
    let seed = split_seed(MASTER_SEED, 1);
    let mut worst = f64::NEG_INFINITY;
    let mut failures = 0u64;
    for i in 0..1_000u64 {
        let s = split_seed(seed, i);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let space = plain_space(rng.gen_range(1..=6));
        let verts = rng.gen_range(1..=6);
        let p = random_credal(&mut rng, &space, verts);
        let report = check_axioms(&p, 10, s, 1e-9);
        worst = worst.max(report.worst_margin);
        failures += report.failures;
    }
    finish(
        results,
        1,
        5.0,
        t,
        failures == 0,
        format!("axioms on 1000 random credal sets, {failures} failures, worst margin {worst:.2e}"),
    );
}

fn criterion_engine_oracle(results: &mut Vec<Outcome>) {
    let t = Instant::now();
    let seed = split_seed(MASTER_SEED, 2);
    let semantics =
        [Dependence::PengForward, Dependence::PengBackward, Dependence::QwiseProduct];
    let mut worst = 0.0f64;
    let mut failures = 0u64;
    for i in 0..500u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, i));
        let m = rng.gen_range(2..=3);
        let space = plain_space(m);
        let n = rng.gen_range(1..=3);
        // The largest corner would need 3^13 adaptive strategies, past the
        // oracle's enumeration budget; trim the vertex count only there.
        let verts = if m == 3 && n == 3 { rng.gen_range(1..=2) } else { rng.gen_range(1..=3) };
        let credal = random_credal(&mut rng, &space, verts);
        let coords: Vec<RandomVar> =
            (0..n).map(|_| random_var(&mut rng, &space, -2.0, 2.0)).collect();
        let model =
            SequenceModel::from_coords(&credal, coords, semantics[(i % 3) as usize]).unwrap();
        let f = match i % 5 {
            0 => Functional::max_partial_sum(n),
            1 => Functional::max_abs_partial_sum(n),
            2 => Functional::max_tail_sum(n),
            3 => Functional::sum_power(n, 2.0),
            _ => Functional::sum(n),
        };
        let fast = eval_upper(&model, &f).unwrap();
        let slow = oracle_upper(&model, &f).unwrap();
        let gap = (fast - slow).abs();
        worst = worst.max(gap);
        if gap > 1e-12 {
            failures += 1;
        }
    }
    finish(
        results,
        2,
        30.0,
        t,
        failures == 0,
        format!("engine vs oracle on 500 instances, worst gap {worst:.2e}"),
    );
}

fn criterion_kolmogorov(results: &mut Vec<Outcome>) {
    let t = Instant::now();
    let reports = kolmogorov_suite(200, split_seed(MASTER_SEED, 3), 2).unwrap();
    let suite_ok = reports.iter().all(|r| r.pass);

    let space = FiniteSpace::new(vec!["lo", "hi"]).unwrap();
    let credal = CredalSet::from_weight_rows(&space, vec![vec![0.6, 0.4], vec![0.4, 0.6]]).unwrap();
    let centered = RandomVar::new(&space, vec![-1.2, 0.8]).unwrap();
    let model = SequenceModel::iid(&credal, &centered, 2, Dependence::PengBackward).unwrap();
    let reference = kolmogorov_verify(&model, true, 0).unwrap();
    let reference_ok =
        (reference.lhs - 1.408).abs() <= 1e-9 && (reference.rhs - 2.24).abs() <= 1e-9;

    finish(
        results,
        3,
        20.0,
        t,
        suite_ok && reference_ok,
        format!(
            "200 random models pass: {suite_ok}; reference lhs {:.6} rhs {:.6}",
            reference.lhs, reference.rhs
        ),
    );
}

fn criterion_rosenthal(results: &mut Vec<Outcome>) {
    let t = Instant::now();
    let reports = rosenthal_suite(200, split_seed(MASTER_SEED, 4), 2).unwrap();
    let failures = reports.iter().filter(|r| !r.pass).count();
    finish(
        results,
        4,
        120.0,
        t,
        failures == 0 && reports.len() == 1_200,
        format!("six moment-bound families x 200 models, {} reports, {failures} failures", reports.len()),
    );
}

fn criterion_closure(results: &mut Vec<Outcome>) {
    let t = Instant::now();
    let report = closure_scan_check(10_000, split_seed(MASTER_SEED, 5));
    finish(
        results,
        5,
        10.0,
        t,
        report.pass,
        format!("10000 scanned coefficient draws, worst margin {:.2e}", report.worst_margin),
    );
}

fn criterion_scalar(results: &mut Vec<Outcome>) {
    let t = Instant::now();
    let reports = scalar_inequality_suite(split_seed(MASTER_SEED, 6), 4_000);
    let all_pass = reports.iter().all(|r| r.pass);
    let enough = reports.iter().all(|r| r.cases >= 10_000);
    let cases: Vec<String> = reports.iter().map(|r| format!("{}:{}", r.name, r.cases)).collect();
    finish(
        results,
        6,
        5.0,
        t,
        all_pass && enough,
        format!("pointwise grids {}", cases.join(", ")),
    );
}

fn criterion_capacity(results: &mut Vec<Outcome>) {
    let t = Instant::now();
    let seed = split_seed(MASTER_SEED, 7);
    let mut ok = true;
    let mut detail = Vec::new();

    let mut worst_choquet = 0.0f64;
    for i in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, i));
        let space = plain_space(rng.gen_range(1..=6));
        let verts = rng.gen_range(1..=5);
        let p = random_credal(&mut rng, &space, verts);
        let x = random_var(&mut rng, &space, -3.0, 3.0);
        let fast = choquet(&p, &x).unwrap().value;
        let slow = oracle_choquet(&p, &x).unwrap();
        worst_choquet = worst_choquet.max((fast - slow).abs());
    }
    ok &= worst_choquet <= 1e-10;
    detail.push(format!("choquet vs oracle gap {worst_choquet:.2e}"));

    let mut worst_outer = 0.0f64;
    for size in 1..=5usize {
        for rep in 0..3u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, 1_000 + size as u64 * 10 + rep));
            let space = plain_space(size);
            let verts = rng.gen_range(1..=4);
            let p = random_credal(&mut rng, &space, verts);
            for mask in 0..(1u32 << size) {
                let indices: Vec<usize> = (0..size).filter(|b| mask >> b & 1 == 1).collect();
                let event = EventSet::from_indices(&space, &indices).unwrap();
                let outer = outer_capacity(&p, &event).unwrap();
                let upper = upper_capacity(&p, &event).unwrap();
                worst_outer = worst_outer.max((outer - upper).abs());
            }
        }
    }
    ok &= worst_outer <= 1e-10;
    detail.push(format!("outer vs upper gap {worst_outer:.2e} on all events up to 5 outcomes"));

    let mut dom_failures = 0u64;
    let mut tail_failures = 0u64;
    for i in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, 2_000 + i));
        let space = plain_space(rng.gen_range(1..=6));
        let verts = rng.gen_range(1..=5);
        let p = random_credal(&mut rng, &space, verts);
        let x = random_var(&mut rng, &space, -4.0, 4.0);
        if !mean_choquet_domination(&p, &x).unwrap().pass {
            dom_failures += 1;
        }
        let jmax = 1 + (i % 30) as usize;
        if !truncated_second_moment_bound(&p, &x, jmax).unwrap().pass {
            tail_failures += 1;
        }
    }
    ok &= dom_failures == 0 && tail_failures == 0;
    detail.push(format!("domination failures {dom_failures}, tail-bound failures {tail_failures}"));

    finish(results, 7, 30.0, t, ok, detail.join("; "));
}

fn criterion_nd_scan(results: &mut Vec<Outcome>) {
    let t = Instant::now();
    let seed = split_seed(MASTER_SEED, 8);
    let mut failures = 0u64;
    let mut cases = 0u64;
    for i in 0..25u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, i));
        let space = plain_space(rng.gen_range(2..=3));
        let verts = rng.gen_range(1..=3);
        let credal = random_credal(&mut rng, &space, verts);
        let coords: Vec<RandomVar> =
            (0..2).map(|_| random_var(&mut rng, &space, -2.0, 2.0)).collect();
        let model =
            SequenceModel::from_coords(&credal, coords, Dependence::QwiseProduct).unwrap();
        let config = NdScanConfig { smooth_pairs: 20, seed: split_seed(seed, 100 + i), tol: 1e-9 };
        let report = oracle_nd_scan(&model, 1, &config).unwrap();
        failures += report.failures;
        cases += report.cases;
    }
    finish(
        results,
        8,
        60.0,
        t,
        failures == 0,
        format!("negative-dependence scan over {cases} monotone pairs, {failures} violations"),
    );
}

fn band_run(threads: usize) -> BandOutcome {
    let (credal, x) = m0();
    let policies = default_policy_set(credal.len(), 0.2);
    band_suite(&credal, &x, &policies, 64, 100_000, split_seed(MASTER_SEED, 9), 0.02, threads)
        .unwrap()
}

fn band_bytes(outcome: &BandOutcome) -> Vec<u8> {
    let mut buf = Vec::new();
    for traj in &outcome.trajectories {
        buf.extend_from_slice(trajectory_csv_string(traj).as_bytes());
        buf.extend_from_slice(trajectory_sidecar_json(traj).as_bytes());
        buf.push(b'\n');
    }
    buf.extend_from_slice(serde_json::to_string(&outcome.report).unwrap().as_bytes());
    buf.push(b'\n');
    buf
}

fn criterion_band(results: &mut Vec<Outcome>) -> BandOutcome {
    let t = Instant::now();
    let outcome = band_run(1);
    let report = &outcome.report;
    finish(
        results,
        9,
        60.0,
        t,
        report.pass && report.cases == 320,
        format!(
            "{} tail windows inside the widened mean interval, worst margin {:.3}",
            report.cases, report.worst_margin
        ),
    );
    outcome
}

fn criterion_cluster(results: &mut Vec<Outcome>) {
    let t = Instant::now();
    let (credal, x) = m0();
    let policy = SelectionPolicy::SquaringBlocks(50);
    let est =
        cluster_run(&credal, &x, &policy, 1_000_000, 0.05, split_seed(MASTER_SEED, 10)).unwrap();
    finish(
        results,
        10,
        60.0,
        t,
        est.coverage >= 0.9,
        format!(
            "growing-block policy {policy} visits {}/{} bins of the mean interval (coverage {:.2})",
            est.bins_visited, est.bins_total, est.coverage
        ),
    );
}

fn criterion_determinism(results: &mut Vec<Outcome>, first: &BandOutcome) {
    let t = Instant::now();
    let second = band_run(5);
    let same = band_bytes(first) == band_bytes(&second);
    finish(
        results,
        11,
        120.0,
        t,
        same,
        format!(
            "trajectory CSVs and check reports byte-identical across thread counts: {same}"
        ),
    );
}

// ---------------------------------------------------------------------------

#[test]
fn all_criteria() {
    let mut results = Vec::new();
    criterion_axioms(&mut results);
    criterion_engine_oracle(&mut results);
    criterion_kolmogorov(&mut results);
    criterion_rosenthal(&mut results);
    criterion_closure(&mut results);
    criterion_scalar(&mut results);
    criterion_capacity(&mut results);
    criterion_nd_scan(&mut results);
    let band = criterion_band(&mut results);
    criterion_cluster(&mut results);
    criterion_determinism(&mut results, &band);

    let failed: Vec<String> = results
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format!("criterion {:02} ({:.1}s/{:.0}s): {}", r.index, r.elapsed, r.budget, r.detail))
        .collect();
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}
