//! Command-line front end. Every flag maps onto a configuration key, so a run
//! can be replayed from a `--config` file; flags given on the command line
//! replace the file's value for that key.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use dsrr::dataset::{to_svmlight, LabeledDataset, SparseVector};
use dsrr::dualsolve::{
    predict_error, recover_primal, solve_original, solve_reduced_sparse, vector_dump, Loss, SolveResult, SolverConfig,
};
use dsrr::sketch::{apply_dataset, OperatorKind};
use dsrr::{Error, Result};

use crate::config::{parse_config, ConfigMap, DataSource};
use crate::suites::{run_suite, Suite, VerifySettings};
use crate::sweep::{run_sweep, write_file, SweepConfig};
use crate::{distributed, jl};

#[derive(Debug, Parser)]
#[command(name = "dsrr", version, about = "Dual-sparse randomized reduction experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// τ × m × λ recovery sweep with CSV and SVG output.
    Sweep(Common),
    /// Theorem-verification suites; exits nonzero on any violation.
    Verify(VerifyArgs),
    /// Distributed warm-start comparison.
    Distsim(DistArgs),
    /// JL distortion diagnostics.
    Jl(JlArgs),
    /// Solve the original problem, or the reduced one when --op is given.
    Solve(Common),
    /// Apply an operator to a dataset and write the reduced data.
    Reduce(Common),
}

#[derive(Debug, Args, Default)]
pub struct Common {
    /// key = value file; command-line flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// svmlight training file.
    #[arg(long)]
    pub data: Option<String>,
    /// svmlight test file (default: hold out the last 20% of --data).
    #[arg(long)]
    pub test: Option<String>,
    /// Synthetic data `n,d,s,margin,noise`.
    #[arg(long)]
    pub synth: Option<String>,
    #[arg(long)]
    pub data_seed: Option<String>,
    /// gauss, rademacher, discrete, hash, hadamard, sample (sweep also: identity).
    #[arg(long)]
    pub op: Option<String>,
    #[arg(long)]
    pub m: Option<String>,
    #[arg(long)]
    pub tau: Option<String>,
    #[arg(long)]
    pub lambda: Option<String>,
    /// hinge or sqhinge.
    #[arg(long)]
    pub loss: Option<String>,
    /// Comma list; items may be ranges `a..b`.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub gap_tol: Option<String>,
    #[arg(long)]
    pub max_epochs: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    /// thm1, thm2, thm4, thm5, thm6-scaling, thm7-scaling or all.
    #[arg(long)]
    pub suite: Option<String>,
    /// τ as a multiple of tau_min.
    #[arg(long)]
    pub tau_factor: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct DistArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub nodes: Option<String>,
    /// Warm-start round counts reported as DSRR-DisDCA-k.
    #[arg(long)]
    pub comm: Option<String>,
    /// Round limit for each DisDCA run.
    #[arg(long)]
    pub rounds: Option<String>,
    #[arg(long)]
    pub tau_factor: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct JlArgs {
    #[command(flatten)]
    pub common: Common,
    /// Probe dimension.
    #[arg(long)]
    pub d: Option<String>,
    /// unit:COUNT or spiky:COUNT:NNZ.
    #[arg(long)]
    pub probes: Option<String>,
}

fn set(map: &mut ConfigMap, key: &str, value: &Option<String>) {
    if let Some(v) = value {
        map.set(key, v.clone());
    }
}

impl Common {
    fn overrides(&self) -> ConfigMap {
        let mut map = ConfigMap::default();
        for (key, value) in [
            ("data", &self.data),
            ("test", &self.test),
            ("synth", &self.synth),
            ("data_seed", &self.data_seed),
            ("op", &self.op),
            ("m", &self.m),
            ("tau", &self.tau),
            ("lambda", &self.lambda),
            ("loss", &self.loss),
            ("seeds", &self.seeds),
            ("gap_tol", &self.gap_tol),
            ("max_epochs", &self.max_epochs),
            ("out", &self.out),
        ] {
            set(&mut map, key, value);
        }
        map
    }

    /// The config file, if any, overlaid with this command line.
    pub fn resolve(&self, extra: &[(&str, &Option<String>)]) -> Result<ConfigMap> {
        let mut cfg = match &self.config {
            Some(path) => parse_config(
                &std::fs::read_to_string(path)
                    .map_err(|e| Error::Argument(format!("cannot read {}: {e}", path.display())))?,
            )?,
            None => ConfigMap::default(),
        };
        let mut cli = self.overrides();
        for (key, value) in extra {
            set(&mut cli, key, value);
        }
        cfg.overlay(&cli);
        Ok(cfg)
    }
}

fn out_dir(cfg: &ConfigMap) -> PathBuf {
    PathBuf::from(cfg.get("out").unwrap_or("results"))
}

fn report_files(files: &[String]) {
    for f in files {
        println!("wrote {f}");
    }
}

/// Verification settings: the theorem-suite instance family follows the
/// configuration; the scaling suites keep their own grids.
pub fn verify_settings(cfg: &ConfigMap) -> Result<VerifySettings> {
    let mut s = VerifySettings::default();
    let t = &mut s.theorem;
    if let Some(shape) = cfg.one("synth")? {
        t.shape = shape;
    }
    t.lambda = cfg.one_or("lambda", t.lambda)?;
    t.op = cfg.one_or("op", t.op)?;
    t.m = cfg.one_or("m", t.m)?;
    t.seeds = cfg.seeds_or(&t.seeds)?;
    t.tau_factor = cfg.one_or("tau_factor", t.tau_factor)?;
    t.gap_tol = cfg.one_or("gap_tol", t.gap_tol)?;
    t.max_epochs = cfg.one_or("max_epochs", t.max_epochs)?;
    Ok(s)
}

pub fn selected_suites(cfg: &ConfigMap) -> Result<Vec<Suite>> {
    match cfg.get("suite") {
        None | Some("all") => Ok(Suite::ALL.to_vec()),
        Some(_) => Ok(cfg.list("suite")?.unwrap_or_default()),
    }
}

/// Runs the verification suites; `Ok(false)` when any inequality fails.
pub fn cmd_verify(cfg: &ConfigMap) -> Result<bool> {
    let settings = verify_settings(cfg)?;
    let out = out_dir(cfg);
    let mut all_pass = true;
    for suite in selected_suites(cfg)? {
        let report = run_suite(suite, &settings)?;
        let file = write_file(&out, &format!("verify_{suite}.csv"), &report.csv())?;
        println!(
            "{suite}: {} ({} evaluated, {} skipped, {} violations) -> {file}",
            if report.passed() { "PASS" } else { "FAIL" },
            report.evaluated,
            report.skipped,
            report.violations.len()
        );
        for v in &report.violations {
            println!("  violation: {v}");
        }
        all_pass &= report.passed();
    }
    Ok(all_pass)
}

pub fn cmd_sweep(cfg: &ConfigMap) -> Result<()> {
    let sweep = SweepConfig::from_config(cfg)?;
    let outcome = run_sweep(&sweep)?;
    let failed = outcome.rows.iter().filter(|r| r.failed).count();
    println!("{} cells x {} seeds, {failed} failed rows", outcome.averages.len(), sweep.seeds.len());
    report_files(&outcome.write(&out_dir(cfg))?);
    Ok(())
}

pub fn cmd_distsim(cfg: &ConfigMap) -> Result<()> {
    let exp = distributed::DistExperiment::from_config(cfg)?;
    let runs = distributed::run_experiment(&exp)?;
    if let Some(first) = runs.first() {
        print!("{}", first.card.header());
    }
    for (method, n, mean, lo, hi) in distributed::summary(&runs) {
        println!("{method}: mean test error {mean:.4} over {n} seeds, range [{lo:.4}, {hi:.4}]");
    }
    report_files(&distributed::write_outputs(&runs, &out_dir(cfg))?);
    Ok(())
}

pub fn cmd_jl(cfg: &ConfigMap) -> Result<()> {
    let rows = jl::run_jl(&jl::JlConfig::from_config(cfg)?)?;
    for s in jl::median_curves(&rows) {
        let pts: Vec<String> = s.points.iter().map(|(m, v)| format!("m={m}: {v:.4}")).collect();
        println!("{}: {}", s.label, pts.join(", "));
    }
    report_files(&jl::write_outputs(&rows, &out_dir(cfg))?);
    Ok(())
}

pub const SOLVE_HEADER: &str = "problem,lambda,loss,tau,objective,dual_objective,gap,epochs,nnz_alpha,test_error";

/// Solves the original problem, or with `op` set the reduced problem at the
/// first `tau` followed by primal recovery. Writes `solve.csv`, `alpha.txt`
/// and `w.txt`.
pub fn cmd_solve(cfg: &ConfigMap) -> Result<()> {
    let seed = cfg.seeds_or(&[0])?[0];
    let data = DataSource::from_config(cfg)?.load(cfg.one_or("data_seed", 0)?)?;
    let lambda = cfg.one_or("lambda", 0.01)?;
    let loss: Loss = cfg.one_or("loss", Loss::SquaredHinge)?;
    let solver = SolverConfig::new(lambda, loss)
        .with_gap_tol(cfg.one_or("gap_tol", 1e-8)?)
        .with_max_epochs(cfg.one_or("max_epochs", 1000)?)
        .with_seed(seed);
    let (label, tau, res, w): (String, f64, SolveResult, Vec<f64>) = match cfg.one::<OperatorKind>("op")? {
        None => {
            let res = solve_original(&data.train, &solver)?;
            let w = res.primal.clone();
            ("original".into(), 0.0, res, w)
        }
        Some(kind) => {
            let tau = cfg.one_or("tau", 0.0)?;
            let m = cfg.one_or("m", 64)?;
            let op = dsrr::sketch::make_operator(kind, data.train.d(), m, seed)?;
            let res = solve_reduced_sparse(&apply_dataset(&op, &data.train)?, &solver.with_tau(tau))?;
            let w = recover_primal(&data.train, &res.alpha, lambda)?;
            (format!("reduced-{kind}-{m}"), tau, res, w)
        }
    };
    let err = predict_error(&w, &data.test)?;
    println!(
        "{label}: objective {} gap {:e} after {} epochs{}; test error {err}",
        res.objective,
        res.gap,
        res.epochs_run,
        if res.converged { "" } else { " (not converged)" }
    );
    let out = out_dir(cfg);
    let row = format!("{label},{lambda},{loss},{tau},{},{}", res.csv_row(), err);
    report_files(&[
        write_file(&out, "solve.csv", &format!("{SOLVE_HEADER}\n{row}\n"))?,
        write_file(&out, "alpha.txt", &vector_dump(&res.alpha))?,
        write_file(&out, "w.txt", &vector_dump(&w))?,
    ]);
    Ok(())
}

/// Writes `reduced.svm` (the reduced training set in svmlight form) and
/// `operator.txt` (the replay header).
pub fn cmd_reduce(cfg: &ConfigMap) -> Result<()> {
    let seed = cfg.seeds_or(&[0])?[0];
    let data = DataSource::from_config(cfg)?.load(cfg.one_or("data_seed", 0)?)?;
    let kind: OperatorKind = cfg.one_or("op", OperatorKind::HashingHD)?;
    let m = cfg.one_or("m", 64)?;
    let op = dsrr::sketch::make_operator(kind, data.train.d(), m, seed)?;
    let rds = apply_dataset(&op, &data.train)?;
    let reduced = LabeledDataset::new(
        (0..rds.n()).map(|i| SparseVector::from_dense(rds.column(i))).collect(),
        rds.labels().to_vec(),
        m,
    )?;
    let out = out_dir(cfg);
    println!("reduced {} examples from d={} to m={m} with {kind}", rds.n(), data.train.d());
    report_files(&[
        write_file(&out, "reduced.svm", &to_svmlight(&reduced))?,
        write_file(&out, "operator.txt", &format!("{}\n", op.header()?))?,
    ]);
    Ok(())
}

/// Runs a parsed command line; `Ok(false)` signals failed verification.
pub fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Sweep(c) => cmd_sweep(&c.resolve(&[])?).map(|_| true),
        Command::Verify(v) => {
            cmd_verify(&v.common.resolve(&[("suite", &v.suite), ("tau_factor", &v.tau_factor)])?)
        }
        Command::Distsim(a) => cmd_distsim(&a.common.resolve(&[
            ("nodes", &a.nodes),
            ("comm", &a.comm),
            ("rounds", &a.rounds),
            ("tau_factor", &a.tau_factor),
        ])?)
        .map(|_| true),
        Command::Jl(a) => cmd_jl(&a.common.resolve(&[("d", &a.d), ("probes", &a.probes)])?).map(|_| true),
        Command::Solve(c) => cmd_solve(&c.resolve(&[])?).map(|_| true),
        Command::Reduce(c) => cmd_reduce(&c.resolve(&[])?).map(|_| true),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn command_line_overrides_file() {
        let dir = std::env::temp_dir().join(format!("dsrr-cli-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let file = dir.join("run.cfg");
        std::fs::write(&file, "m = 64\nm = 128\nlambda = 0.5\n").unwrap();
        let cli = Cli::parse_from(["dsrr", "sweep", "--config", file.to_str().unwrap(), "--m", "32"]);
        let Command::Sweep(c) = &cli.command else { panic!("wrong subcommand") };
        let cfg = c.resolve(&[]).unwrap();
        assert_eq!(cfg.list::<usize>("m").unwrap().unwrap(), vec![32]);
        assert_eq!(cfg.get("lambda"), Some("0.5"));
    }

    #[test]
    fn suite_selection() {
        let mut cfg = ConfigMap::default();
        assert_eq!(selected_suites(&cfg).unwrap().len(), Suite::ALL.len());
        cfg.set("suite", "thm1,thm5");
        assert_eq!(selected_suites(&cfg).unwrap(), vec![Suite::Thm1, Suite::Thm5]);
        cfg.set("suite", "thm9");
        assert!(selected_suites(&cfg).is_err());
    }
}
