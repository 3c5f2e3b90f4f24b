//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero when any criterion fails.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use dsrr::dualsolve::{solve_original, solve_reduced_sparse, Loss, SolverConfig};
use dsrr::rng::{CounterStream, Purpose};
use dsrr::sketch::{apply_dataset, make_operator, median, OperatorKind};
use dsrr::theory::restricted_spectrum_bruteforce;
use dsrr::dataset::synth_sparse_dual;
use dsrr_exp::config::{ConfigMap, DataSource, SynthShape};
use dsrr_exp::distributed::{comparison_csv, run_experiment, run_seed, warmstart_csv, DistExperiment, SeedRun};
use dsrr_exp::suites::{run_suite, thm1, Suite, SuiteReport, VerifySettings};
use dsrr_exp::sweep::{run_sweep, SweepConfig, SweepOutcome};
use support::{dense_sigma2, gaussian_instance, prox_dual, Dense};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn suite_outcome(report: &SuiteReport, min_evaluated: usize) -> Outcome {
    let mut detail = format!(
        "{} evaluated, {} skipped, {} violations",
        report.evaluated,
        report.skipped,
        report.violations.len()
    );
    if let Some(v) = report.violations.first() {
        detail.push_str(&format!("; first: {v}"));
    }
    outcome(report.passed() && report.evaluated >= min_evaluated, detail)
}

fn solver_correctness() -> Outcome {
    let mut rng = CounterStream::new(2024, Purpose::Probes, 7);
    let (mut worst_gap, mut worst_diff) = (0.0f64, 0.0f64);
    let mut failures = Vec::new();
    for case in 0..50 {
        let loss = if case % 2 == 0 { Loss::Hinge } else { Loss::SquaredHinge };
        let d = 8 + rng.below(13);
        let m = 2 + rng.below(d - 1);
        // The hinge dual is unique only when the reduced columns are independent.
        let n = if loss == Loss::Hinge { 2 + rng.below(m - 1) } else { 5 + rng.below(36) };
        let lambda = 0.05 + 0.95 * rng.uniform();
        let tau = 0.8 * rng.uniform();
        let ds = gaussian_instance(n, d, case);
        let cfg = SolverConfig::new(lambda, loss).with_max_epochs(20_000);
        let original = solve_original(&ds, &cfg).unwrap();
        let rds = apply_dataset(&make_operator(OperatorKind::GaussianProjection, d, m, case).unwrap(), &ds).unwrap();
        let reduced = solve_reduced_sparse(&rds, &cfg.with_tau(tau)).unwrap();
        for (what, r) in [("original", &original), ("reduced", &reduced)] {
            worst_gap = worst_gap.max(r.gap);
            if !(r.converged && r.gap <= 1e-8) {
                failures.push(format!("case {case} {what}: gap {:e} after {} epochs", r.gap, r.epochs_run));
            }
        }
        let fixed = solve_reduced_sparse(&rds, &cfg.with_tau(tau).with_gap_tol(0.0).with_max_epochs(5_000)).unwrap();
        let cols: Dense = (0..rds.n()).map(|i| rds.column(i).to_vec()).collect();
        let oracle = prox_dual(&cols, rds.labels(), lambda, tau, loss, 200_000);
        let diff = fixed.alpha.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst_diff = worst_diff.max(diff);
        if diff >= 1e-6 {
            failures.push(format!("case {case}: prox oracle differs by {diff:e}"));
        }
    }
    let mut detail = format!("50 instances, worst gap {worst_gap:.1e}, worst prox difference {worst_diff:.1e}");
    if let Some(f) = failures.first() {
        detail.push_str(&format!("; {} failures, first: {f}", failures.len()));
    }
    outcome(failures.is_empty(), detail)
}

fn hinge_cone(settings: &VerifySettings) -> Outcome {
    let report = run_suite(Suite::Thm2, settings).unwrap();
    let condition_col = report.header.split(',').position(|h| h == "condition").unwrap();
    let conditioned = report.rows.iter().filter(|r| r.split(',').nth(condition_col) == Some("true")).count();
    let base = suite_outcome(&report, 20);
    outcome(
        base.passed && conditioned > 0,
        format!("{}, {conditioned} brute-force instances meet the eigenvalue condition", base.detail),
    )
}

fn sigma_oracle(settings: &VerifySettings) -> Outcome {
    let setup = &settings.sigma;
    let ds = synth_sparse_dual(&setup.shape.spec(setup.shape.n, 0)).unwrap();
    let mut worst = 0.0f64;
    for &m in &setup.ms {
        for seed in 0..3 {
            let op = make_operator(OperatorKind::GaussianProjection, ds.d(), m, seed).unwrap();
            let lib = restricted_spectrum_bruteforce(&ds, Some(&op), setup.s).unwrap().sigma_s;
            worst = worst.max((lib - dense_sigma2(&ds, &op)).abs());
        }
    }
    let report = run_suite(Suite::Thm7Scaling, settings).unwrap();
    let base = suite_outcome(&report, 1);
    let medians: Vec<&str> = report.rows.iter().filter_map(|r| r.split(',').nth(2)).collect();
    outcome(
        worst < 1e-10 && base.passed,
        format!("oracle difference {worst:.1e}, medians by m [{}], {}", medians.join(", "), base.detail),
    )
}

fn sweep_config() -> SweepConfig {
    let mut cfg = ConfigMap::default();
    cfg.set("synth", "200,512,10,0.5,0.3");
    SweepConfig::from_config(&cfg).unwrap()
}

fn sweep_shape(sweep: &SweepOutcome, cfg: &SweepConfig) -> Outcome {
    let (lambda, loss) = (cfg.lambdas[0], cfg.losses[0]);
    let op = cfg.ops[0];
    let mut problems = Vec::new();
    for curve in sweep.curves(op, lambda, loss, "cone_ratio") {
        if let Some(w) = curve.points.windows(2).find(|w| w[1].1 > w[0].1 * (1.0 + 1e-12)) {
            problems.push(format!("{}: cone ratio rises from {} to {} at tau {}", curve.label, w[0].1, w[1].1, w[1].0));
        }
    }
    let smallest = cfg.ms.iter().min().unwrap().to_string();
    let curves = sweep.curves(op, lambda, loss, "rel_dual_err");
    let dual = curves.iter().find(|c| c.label.ends_with(&format!("={smallest}"))).unwrap();
    let ys: Vec<f64> = dual.points.iter().map(|p| p.1).collect();
    let argmin = (0..ys.len()).min_by(|a, b| ys[*a].total_cmp(&ys[*b])).unwrap();
    let interior = argmin > 0 && argmin + 1 < ys.len() && ys[argmin] < ys[0] && ys[argmin] < ys[ys.len() - 1];
    if !interior {
        problems.push(format!("{}: rel_dual_err minimum at index {argmin}", dual.label));
    }
    let detail = format!(
        "{} curves, rel_dual_err for {} falls from {:.3} to {:.3} at tau {} and ends at {:.3}",
        cfg.ms.len(),
        dual.label,
        ys[0],
        ys[argmin],
        dual.points[argmin].0,
        ys[ys.len() - 1]
    );
    let detail = match problems.first() {
        Some(p) => format!("{detail}; {p}"),
        None => detail,
    };
    outcome(problems.is_empty(), detail)
}

fn dist_experiment() -> DistExperiment {
    let mut cfg = ConfigMap::default();
    cfg.set("synth", "2000,200,50,0.5,0.3");
    let exp = DistExperiment::from_config(&cfg).unwrap();
    assert_eq!(exp.source, DataSource::Synth(SynthShape { n: 2000, d: 200, s: 50, margin: 0.5, noise: 0.3 }));
    exp
}

fn warm_start(runs: &[SeedRun], exp: &DistExperiment) -> Outcome {
    let rounds = |f: &dyn Fn(&SeedRun) -> Option<usize>| -> Vec<f64> {
        runs.iter().map(|r| f(r).map_or(f64::INFINITY, |v| v as f64)).collect()
    };
    let warm = median(&rounds(&|r| r.warm_rounds_to_target()));
    let cold = median(&rounds(&|r| r.cold_rounds_to_target()));
    let name = format!("DSRR-DisDCA-{}", exp.comm.iter().max().unwrap());
    let gaps: Vec<f64> = runs
        .iter()
        .map(|r| (r.method(&name).unwrap().test_error - r.method("DisDCA").unwrap().test_error).abs())
        .collect();
    let gap = median(&gaps);
    let passed = warm <= 0.5 * cold && gap <= 0.002;
    outcome(
        passed,
        format!(
            "median rounds to target: warm {warm}, cold {cold}; median |{name} - DisDCA| test error {gap:.4}; \
             cold runs took {} rounds",
            runs.iter().map(|r| r.cold.rounds_run().to_string()).collect::<Vec<_>>().join("/")
        ),
    )
}

fn write_twice(dir: &Path, name: &str, a: &str, b: &str) -> Option<String> {
    std::fs::create_dir_all(dir).unwrap();
    std::fs::write(dir.join(format!("{name}.first.csv")), a).unwrap();
    std::fs::write(dir.join(format!("{name}.second.csv")), b).unwrap();
    (a != b).then(|| format!("{name} differs"))
}

fn determinism(sweep: &SweepOutcome, cfg: &SweepConfig, settings: &VerifySettings, runs: &[SeedRun], exp: &DistExperiment) -> Outcome {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-determinism");
    let mut diffs = Vec::new();
    let again = run_sweep(cfg).unwrap();
    diffs.extend(write_twice(&dir, "sweep", &sweep.rows_csv(), &again.rows_csv()));
    diffs.extend(write_twice(&dir, "sweep_avg", &sweep.averages_csv(), &again.averages_csv()));
    let t1 = thm1(&settings.theorem).unwrap().csv();
    diffs.extend(write_twice(&dir, "verify_thm1", &t1, &thm1(&settings.theorem).unwrap().csv()));
    let rerun = run_seed(exp, runs[0].seed).unwrap();
    let first = &runs[..1];
    let second = std::slice::from_ref(&rerun);
    diffs.extend(write_twice(&dir, "comparison", &comparison_csv(first), &comparison_csv(second)));
    diffs.extend(write_twice(&dir, "warmstart", &warmstart_csv(first), &warmstart_csv(second)));
    diffs.extend(write_twice(&dir, "trace_cold", &first[0].cold.csv(), &rerun.cold.csv()));
    diffs.extend(write_twice(&dir, "trace_warm", &first[0].warm.csv(), &rerun.warm.csv()));
    let detail = if diffs.is_empty() {
        "sweep, sweep averages, thm1 report, comparison, warm-start summary and both traces are byte-identical".to_string()
    } else {
        diffs.join("; ")
    };
    outcome(diffs.is_empty(), detail)
}

fn report(number: usize, title: &str, started: Instant, o: Outcome) -> bool {
    let status = if o.passed { "PASS" } else { "FAIL" };
    println!("{status} criterion {number}: {title} [{:.1}s] {}", started.elapsed().as_secs_f64(), o.detail);
    o.passed
}

fn main() -> ExitCode {
    let settings = VerifySettings::default();
    let mut results = Vec::new();

    let t = Instant::now();
    results.push(report(1, "solver gap and proximal oracle", t, solver_correctness()));

    let t = Instant::now();
    let o = suite_outcome(&run_suite(Suite::Thm1, &settings).unwrap(), 20);
    results.push(report(2, "squared-hinge cone and four bounds", t, o));

    let t = Instant::now();
    results.push(report(3, "hinge cone and eigenvalue-condition bounds", t, hinge_cone(&settings)));

    let t = Instant::now();
    let o = suite_outcome(&run_suite(Suite::Thm4, &settings).unwrap(), 10);
    results.push(report(4, "near-sparse truncation bounds", t, o));

    let t = Instant::now();
    let o = suite_outcome(&run_suite(Suite::Thm5, &settings).unwrap(), 20);
    results.push(report(5, "primal recovery bound", t, o));

    let t = Instant::now();
    let o = suite_outcome(&run_suite(Suite::Thm6Scaling, &settings).unwrap(), 4);
    results.push(report(6, "perturbation scaling in m", t, o));

    let t = Instant::now();
    results.push(report(7, "restricted sigma oracle and decay", t, sigma_oracle(&settings)));

    let t = Instant::now();
    let cfg = sweep_config();
    let sweep = run_sweep(&cfg).unwrap();
    results.push(report(8, "sweep curve shapes", t, sweep_shape(&sweep, &cfg)));

    let t = Instant::now();
    let exp = dist_experiment();
    let runs = run_experiment(&exp).unwrap();
    results.push(report(9, "distributed warm start", t, warm_start(&runs, &exp)));

    let t = Instant::now();
    results.push(report(10, "byte-identical reruns", t, determinism(&sweep, &cfg, &settings, &runs, &exp)));

    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
