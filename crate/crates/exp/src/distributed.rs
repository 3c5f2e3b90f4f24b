//! Distributed warm-start comparison: DSRR, DSRR-Rec, DSRR-DisDCA-k and
//! cold-start DisDCA on the same partitioned data.
//!
//! Test errors, round counts and communication counts are deterministic and
//! go to `comparison.csv`; wall-clock phase times go to `timing.csv`.

use std::path::Path;
use std::time::Instant;

use dsrr::dataset::{partition_indices, DatasetCard};
use dsrr::distsim::{
    disdca_run, dsrr_warmstart, gather_blocks, timing_breakdown, DistConfig, DistRunTrace, MethodTiming, WarmStart,
    TIMING_CSV_HEADER,
};
use dsrr::dualsolve::{naive_recover, predict_error, solve_original, Loss, SolverConfig};
use dsrr::sketch::{apply_dataset, make_operator, OperatorKind};
use dsrr::theory::{delta_vector, tau_min};
use dsrr::{Error, Result};

use crate::config::{ConfigMap, DataSource};
use crate::svg::{bar_chart, stack_vertical};
use crate::sweep::write_file;

/// Upper limit on the automatically chosen `τ`.
pub const TAU_CAP: f64 = 0.9;
/// Absolute test-error tolerance for "reaching" the converged model.
pub const TARGET_TOL: f64 = 0.001;

#[derive(Debug, Clone, PartialEq)]
pub struct DistExperiment {
    pub source: DataSource,
    pub op: OperatorKind,
    pub m: usize,
    /// Fixed `τ`; when absent, `min(tau_factor · tau_min, TAU_CAP)`.
    pub tau: Option<f64>,
    pub tau_factor: f64,
    pub lambda: f64,
    pub loss: Loss,
    pub nodes: usize,
    pub comm: Vec<usize>,
    pub max_rounds: usize,
    pub gap_tol: f64,
    pub seeds: Vec<u64>,
}

impl DistExperiment {
    pub fn from_config(cfg: &ConfigMap) -> Result<Self> {
        let exp = DistExperiment {
            source: DataSource::from_config(cfg)?,
            op: cfg.one_or("op", OperatorKind::GaussianProjection)?,
            m: cfg.one_or("m", 32)?,
            tau: cfg.one("tau")?,
            tau_factor: cfg.one_or("tau_factor", 1.1)?,
            lambda: cfg.one_or("lambda", 0.01)?,
            loss: cfg.one_or("loss", Loss::Hinge)?,
            nodes: cfg.one_or("nodes", 4)?,
            comm: cfg.list_or("comm", &[1, 2])?,
            max_rounds: cfg.one_or("rounds", 300)?,
            gap_tol: cfg.one_or("gap_tol", dsrr::distsim::DEFAULT_GAP_TOL)?,
            seeds: cfg.seeds_or(&[0, 1, 2, 3, 4])?,
        };
        if exp.seeds.is_empty() || exp.comm.is_empty() {
            return Err(Error::Argument("seeds and comm need at least one value".into()));
        }
        if let Some(t) = exp.tau.filter(|t| !(0.0..1.0).contains(t)) {
            return Err(Error::Argument(format!("tau {t} is outside [0, 1)")));
        }
        Ok(exp)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodRow {
    pub method: String,
    pub test_error: f64,
    pub comm_vectors: usize,
    pub rounds: usize,
}

/// Everything measured for one seed.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub card: DatasetCard,
    pub tau_min: f64,
    pub tau: f64,
    pub clamped: usize,
    pub methods: Vec<MethodRow>,
    pub timing: Vec<MethodTiming>,
    pub cold: DistRunTrace,
    pub warm: DistRunTrace,
}

impl SeedRun {
    /// The converged cold-start test error.
    pub fn target_error(&self) -> f64 {
        self.cold.final_record().test_error
    }

    pub fn cold_rounds_to_target(&self) -> Option<usize> {
        self.cold.rounds_to_error(self.target_error(), TARGET_TOL)
    }

    pub fn warm_rounds_to_target(&self) -> Option<usize> {
        self.warm.rounds_to_error(self.target_error(), TARGET_TOL)
    }

    pub fn method(&self, name: &str) -> Option<&MethodRow> {
        self.methods.iter().find(|m| m.method == name)
    }
}

pub fn run_seed(exp: &DistExperiment, seed: u64) -> Result<SeedRun> {
    let data = exp.source.load(seed)?;
    let (train, test) = (&data.train, &data.test);
    let card = DatasetCard::new(&data.name, train.n(), test.n(), train.d(), exp.nodes)?;

    let t = Instant::now();
    let op = make_operator(exp.op, train.d(), exp.m, seed)?;
    apply_dataset(&op, train)?;
    let reduce_time = t.elapsed().as_secs_f64();

    let tau_min_value = {
        let star = solve_original(train, &SolverConfig::new(exp.lambda, exp.loss).with_gap_tol(1e-9).with_max_epochs(5000))?;
        tau_min(&delta_vector(train, &op, &star.primal)?, 0.0)
    };
    let tau = exp.tau.unwrap_or_else(|| (exp.tau_factor * tau_min_value).min(TAU_CAP));

    let t = Instant::now();
    let ws = dsrr_warmstart(train, &op, &SolverConfig::new(exp.lambda, exp.loss).with_tau(tau))?;
    let reduced_solve_time = t.elapsed().as_secs_f64();

    let idx = partition_indices(train.n(), exp.nodes, seed)?;
    let parts: Vec<_> = idx.iter().map(|i| train.subset(i)).collect();
    let mut cfg = DistConfig::new(exp.nodes, exp.lambda, exp.loss);
    cfg.seed = seed;
    cfg.max_rounds = exp.max_rounds;
    cfg.gap_tol = exp.gap_tol;
    let cold = disdca_run(&parts, test, &cfg)?;
    cfg.warm_start = Some(WarmStart { alpha: gather_blocks(&ws.start.alpha, &idx), w: ws.start.w.clone() });
    let warm = disdca_run(&parts, test, &cfg)?;

    let mut methods = vec![
        MethodRow {
            method: "DSRR".into(),
            test_error: predict_error(&naive_recover(&op, &ws.reduced.primal)?, test)?,
            comm_vectors: 0,
            rounds: 0,
        },
        MethodRow { method: "DSRR-Rec".into(), test_error: predict_error(&ws.start.w, test)?, comm_vectors: 0, rounds: 0 },
    ];
    for &k in &exp.comm {
        let upto = k.min(warm.rounds_run());
        methods.push(MethodRow {
            method: format!("DSRR-DisDCA-{k}"),
            test_error: warm.records[upto].test_error,
            comm_vectors: warm.records[..=upto].iter().map(|r| r.comm_vectors).sum(),
            rounds: upto,
        });
    }
    methods.push(MethodRow {
        method: "DisDCA".into(),
        test_error: cold.final_record().test_error,
        comm_vectors: cold.total_comm(),
        rounds: cold.rounds_run(),
    });
    let timing = timing_breakdown(&warm, &exp.comm, &cold, reduce_time, reduced_solve_time);
    Ok(SeedRun { seed, card, tau_min: tau_min_value, tau, clamped: ws.clamped, methods, timing, cold, warm })
}

pub fn run_experiment(exp: &DistExperiment) -> Result<Vec<SeedRun>> {
    exp.seeds.iter().map(|&s| run_seed(exp, s)).collect()
}

pub const COMPARISON_HEADER: &str = "seed,method,test_error,comm_vectors,rounds";
pub const SUMMARY_HEADER: &str = "method,trials,mean_test_error,min_test_error,max_test_error";
pub const WARMSTART_HEADER: &str = "seed,tau_min,tau,clamped,cold_rounds,warm_rounds,target_error,\
cold_rounds_to_target,warm_rounds_to_target,warm_final_error";

fn rounds_field(r: Option<usize>) -> String {
    r.map_or_else(|| "inf".to_string(), |v| v.to_string())
}

pub fn comparison_csv(runs: &[SeedRun]) -> String {
    let mut out = runs.first().map(|r| r.card.header()).unwrap_or_default();
    out.push_str(COMPARISON_HEADER);
    out.push('\n');
    for r in runs {
        for m in &r.methods {
            out.push_str(&format!("{},{},{},{},{}\n", r.seed, m.method, m.test_error, m.comm_vectors, m.rounds));
        }
    }
    out
}

/// Mean and range of the test error per method, in method order.
pub fn summary(runs: &[SeedRun]) -> Vec<(String, usize, f64, f64, f64)> {
    let Some(first) = runs.first() else { return Vec::new() };
    first
        .methods
        .iter()
        .map(|m| {
            let errs: Vec<f64> = runs.iter().filter_map(|r| r.method(&m.method)).map(|x| x.test_error).collect();
            let mean = errs.iter().sum::<f64>() / errs.len() as f64;
            let lo = errs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = errs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (m.method.clone(), errs.len(), mean, lo, hi)
        })
        .collect()
}

pub fn summary_csv(runs: &[SeedRun]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for (m, n, mean, lo, hi) in summary(runs) {
        out.push_str(&format!("{m},{n},{mean},{lo},{hi}\n"));
    }
    out
}

pub fn warmstart_csv(runs: &[SeedRun]) -> String {
    let mut out = format!("{WARMSTART_HEADER}\n");
    for r in runs {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.seed,
            r.tau_min,
            r.tau,
            r.clamped,
            r.cold.rounds_run(),
            r.warm.rounds_run(),
            r.target_error(),
            rounds_field(r.cold_rounds_to_target()),
            rounds_field(r.warm_rounds_to_target()),
            r.warm.final_record().test_error
        ));
    }
    out
}

pub fn timing_csv(runs: &[SeedRun]) -> String {
    let mut out = format!("seed,{TIMING_CSV_HEADER}\n");
    for r in runs {
        for t in &r.timing {
            out.push_str(&format!("{},{},{},{},{},{}\n", r.seed, t.method, t.reduce, t.reduced_solve, t.original_solve, t.total()));
        }
    }
    out
}

/// Test error (top) and mean total time (bottom) per method.
pub fn comparison_svg(runs: &[SeedRun]) -> String {
    let errors: Vec<(String, f64)> = summary(runs).into_iter().map(|(m, _, mean, _, _)| (m, mean)).collect();
    let times: Vec<(String, f64)> = errors
        .iter()
        .map(|(m, _)| {
            let ts: Vec<f64> = runs.iter().flat_map(|r| r.timing.iter().filter(|t| &t.method == m).map(|t| t.total())).collect();
            (m.clone(), ts.iter().sum::<f64>() / ts.len().max(1) as f64)
        })
        .collect();
    stack_vertical(&[bar_chart("Testing error", "error rate", &errors), bar_chart("Training time", "seconds", &times)])
}

pub fn write_outputs(runs: &[SeedRun], out: &Path) -> Result<Vec<String>> {
    let mut files = vec![
        write_file(out, "comparison.csv", &comparison_csv(runs))?,
        write_file(out, "comparison_summary.csv", &summary_csv(runs))?,
        write_file(out, "warmstart.csv", &warmstart_csv(runs))?,
        write_file(out, "timing.csv", &timing_csv(runs))?,
        write_file(out, "comparison.svg", &comparison_svg(runs))?,
    ];
    for r in runs {
        files.push(write_file(out, &format!("trace_cold_seed{}.csv", r.seed), &r.cold.csv())?);
        files.push(write_file(out, &format!("trace_warm_seed{}.csv", r.seed), &r.warm.csv())?);
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DistExperiment {
        let mut cfg = ConfigMap::default();
        cfg.set("synth", "60,16,6,0.5,0.3");
        cfg.set("m", "8");
        cfg.set("nodes", "2");
        cfg.set("seeds", "0,1");
        cfg.set("loss", "sqhinge");
        DistExperiment::from_config(&cfg).unwrap()
    }

    #[test]
    fn method_rows_and_schema() {
        let runs = run_experiment(&small()).unwrap();
        let csv = comparison_csv(&runs);
        assert!(csv.starts_with("# Name #Training #Testing #Features #Nodes\n# synth-60x16 60 60 16 2\n"));
        assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1 + 2 * 5);
        for r in &runs {
            assert!(r.tau > 0.0 && r.tau <= TAU_CAP);
            let k1 = r.method("DSRR-DisDCA-1").unwrap();
            assert_eq!(k1.comm_vectors, 1 + 2 * k1.rounds);
        }
        assert_eq!(summary(&runs).len(), 5);
        assert_eq!(timing_csv(&runs).lines().count(), 1 + 2 * 5);
    }

    #[test]
    fn rejects_bad_tau() {
        let mut cfg = ConfigMap::default();
        cfg.set("synth", "60,16,6,0.5,0.3");
        cfg.set("tau", "1.5");
        assert!(DistExperiment::from_config(&cfg).is_err());
    }
}
