//! The τ × m × λ recovery sweep.
//!
//! The original problem is solved once per `(λ, loss)`. Each operator is
//! drawn and applied once per `(op, m, seed)` and reused across the `λ`,
//! loss and `τ` axes. Groups run on a rayon pool whose size is capped by the
//! `DSRR_THREADS` environment variable; rows are sorted by grid position
//! before they are written, so output files do not depend on scheduling.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use dsrr::dualsolve::{predict_error, recover_primal, solve_original, solve_reduced_sparse, Loss, SolveResult, SolverConfig};
use dsrr::sketch::{apply_dataset, make_operator, OperatorKind, ReductionOperator};
use dsrr::theory::{delta_vector, norm_inf, support_set};
use dsrr::{Error, Result};

use crate::config::{ConfigMap, DataSource, LoadedData};
use crate::svg::{line_chart, Axes, Series};

/// An operator axis value: a seeded kind, or the identity for lossless checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpChoice {
    Seeded(OperatorKind),
    Identity,
}

impl OpChoice {
    pub fn build(self, d: usize, m: usize, seed: u64) -> Result<ReductionOperator> {
        match self {
            OpChoice::Seeded(kind) => make_operator(kind, d, m, seed),
            OpChoice::Identity if m == d => ReductionOperator::identity(d),
            OpChoice::Identity => Err(Error::Argument(format!("identity operator needs m = d = {d}, got m = {m}"))),
        }
    }
}

impl fmt::Display for OpChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpChoice::Seeded(k) => write!(f, "{k}"),
            OpChoice::Identity => f.write_str("identity"),
        }
    }
}

impl FromStr for OpChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "identity" {
            Ok(OpChoice::Identity)
        } else {
            s.parse().map(OpChoice::Seeded)
        }
    }
}

/// Support threshold relative to `max|α*|`.
pub const SUPPORT_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub source: DataSource,
    pub data_seed: u64,
    pub ops: Vec<OpChoice>,
    pub ms: Vec<usize>,
    pub taus: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub losses: Vec<Loss>,
    pub seeds: Vec<u64>,
    /// Gap tolerance for both the original and the reduced solves.
    pub gap_tol: f64,
    pub max_epochs: usize,
}

impl SweepConfig {
    pub const DEFAULT_TAUS: [f64; 10] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

    pub fn from_config(cfg: &ConfigMap) -> Result<Self> {
        let sc = SweepConfig {
            source: DataSource::from_config(cfg)?,
            data_seed: cfg.one_or("data_seed", 0)?,
            ops: cfg.list_or("op", &[OpChoice::Seeded(OperatorKind::HashingHD)])?,
            ms: cfg.list_or("m", &[32, 64, 128, 256])?,
            taus: cfg.list_or("tau", &Self::DEFAULT_TAUS)?,
            lambdas: cfg.list_or("lambda", &[0.01])?,
            losses: cfg.list_or("loss", &[Loss::SquaredHinge])?,
            seeds: cfg.seeds_or(&[0, 1, 2, 3, 4])?,
            gap_tol: cfg.one_or("gap_tol", 1e-9)?,
            max_epochs: cfg.one_or("max_epochs", 5000)?,
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ops.is_empty()
            || self.ms.is_empty()
            || self.taus.is_empty()
            || self.lambdas.is_empty()
            || self.losses.is_empty()
            || self.seeds.is_empty()
        {
            return Err(Error::Argument("every sweep grid needs at least one value".into()));
        }
        if let Some(t) = self.taus.iter().find(|t| !(0.0..1.0).contains(*t)) {
            return Err(Error::Argument(format!("tau {t} is outside [0, 1)")));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(**l > 0.0)) {
            return Err(Error::Argument(format!("lambda {l} must be positive")));
        }
        Ok(())
    }

    fn solver(&self, lambda: f64, loss: Loss) -> SolverConfig {
        SolverConfig::new(lambda, loss).with_gap_tol(self.gap_tol).with_max_epochs(self.max_epochs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub cone_ratio: f64,
    pub rel_dual_err: f64,
    pub rel_primal_err: f64,
    pub delta_inf: f64,
    pub s: f64,
    pub test_error: f64,
}

impl Metrics {
    fn failed() -> Self {
        let inf = f64::INFINITY;
        Metrics { cone_ratio: inf, rel_dual_err: inf, rel_primal_err: inf, delta_inf: inf, s: inf, test_error: inf }
    }

    fn values(&self) -> [f64; 6] {
        [self.cone_ratio, self.rel_dual_err, self.rel_primal_err, self.delta_inf, self.s, self.test_error]
    }

    fn from_values(v: [f64; 6]) -> Self {
        Metrics { cone_ratio: v[0], rel_dual_err: v[1], rel_primal_err: v[2], delta_inf: v[3], s: v[4], test_error: v[5] }
    }

    fn csv(&self) -> String {
        self.values().map(|v| v.to_string()).join(",")
    }
}

/// Grid coordinates of one cell; `index` orders cells in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct CellKey {
    pub op: OpChoice,
    pub m: usize,
    pub lambda: f64,
    pub loss: Loss,
    pub tau: f64,
    index: [usize; 5],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub key: CellKey,
    pub seed: u64,
    pub metrics: Metrics,
    /// Set when the reduced solve errored or stopped before its gap tolerance.
    pub failed: bool,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str =
        "op,m,lambda,loss,tau,seed,cone_ratio,rel_dual_err,rel_primal_err,delta_inf,s,test_error,failed";

    pub fn csv(&self) -> String {
        let k = &self.key;
        format!("{},{},{},{},{},{},{},{}", k.op, k.m, k.lambda, k.loss, k.tau, self.seed, self.metrics.csv(), u8::from(self.failed))
    }
}

/// Seed average of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAverage {
    pub key: CellKey,
    pub trials: usize,
    pub failures: usize,
    pub metrics: Metrics,
}

impl SweepAverage {
    pub const CSV_HEADER: &'static str =
        "op,m,lambda,loss,tau,trials,cone_ratio,rel_dual_err,rel_primal_err,delta_inf,s,test_error,failures";

    pub fn csv(&self) -> String {
        let k = &self.key;
        format!("{},{},{},{},{},{},{},{}", k.op, k.m, k.lambda, k.loss, k.tau, self.trials, self.metrics.csv(), self.failures)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub data_name: String,
    pub rows: Vec<SweepRow>,
    pub averages: Vec<SweepAverage>,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// `‖α̃_{Sᶜ}‖₁ / ‖α̃_S − α*_S‖₁`, with `0/0 = 0`.
pub fn cone_ratio(alpha_tilde: &[f64], alpha_star: &[f64], support: &[usize]) -> f64 {
    let mut on = vec![false; alpha_star.len()];
    support.iter().for_each(|&i| on[i] = true);
    let (mut inside, mut outside) = (0.0, 0.0);
    for i in 0..alpha_star.len() {
        if on[i] {
            inside += (alpha_tilde[i] - alpha_star[i]).abs();
        } else {
            outside += alpha_tilde[i].abs();
        }
    }
    ratio(outside, inside)
}

struct Reference {
    lambda: f64,
    loss: Loss,
    star: SolveResult,
    support: Vec<usize>,
}

fn cell_metrics(data: &LoadedData, reference: &Reference, reduced: &SolveResult, delta_inf: f64) -> Result<Metrics> {
    let star = &reference.star;
    let w = recover_primal(&data.train, &reduced.alpha, reference.lambda)?;
    Ok(Metrics {
        cone_ratio: cone_ratio(&reduced.alpha, &star.alpha, &reference.support),
        rel_dual_err: ratio(dist2(&reduced.alpha, &star.alpha), norm2(&star.alpha)),
        rel_primal_err: ratio(dist2(&w, &star.primal), norm2(&star.primal)),
        delta_inf,
        s: reference.support.len() as f64,
        test_error: predict_error(&w, &data.test)?,
    })
}

fn run_group(
    cfg: &SweepConfig,
    data: &LoadedData,
    refs: &[Reference],
    (oi, op): (usize, OpChoice),
    (mi, m): (usize, usize),
    seed: u64,
) -> Vec<SweepRow> {
    let reduced_data = op.build(data.train.d(), m, seed).and_then(|o| Ok((apply_dataset(&o, &data.train)?, o)));
    let mut rows = Vec::new();
    for (ri, reference) in refs.iter().enumerate() {
        let (li, lsi) = (ri / cfg.losses.len(), ri % cfg.losses.len());
        let delta_inf = reduced_data
            .as_ref()
            .ok()
            .and_then(|(_, o)| delta_vector(&data.train, o, &reference.star.primal).ok())
            .map(|d| norm_inf(&d));
        for (ti, &tau) in cfg.taus.iter().enumerate() {
            let key = CellKey {
                op,
                m,
                lambda: reference.lambda,
                loss: reference.loss,
                tau,
                index: [oi, mi, li, lsi, ti],
            };
            let outcome = match (&reduced_data, delta_inf) {
                (Ok((rds, _)), Some(delta_inf)) => solve_reduced_sparse(rds, &cfg.solver(reference.lambda, reference.loss).with_tau(tau))
                    .and_then(|red| Ok((cell_metrics(data, reference, &red, delta_inf)?, !red.converged))),
                _ => Err(Error::Argument("reduction failed".into())),
            };
            let (metrics, failed) = outcome.unwrap_or_else(|_| (Metrics::failed(), true));
            rows.push(SweepRow { key, seed, metrics, failed });
        }
    }
    rows
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var("DSRR_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|n| *n > 0) {
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Error::Argument(format!("cannot start worker pool: {e}")))
}

fn average(rows: &[SweepRow], n_seeds: usize) -> Vec<SweepAverage> {
    rows.chunks(n_seeds)
        .map(|chunk| {
            let mut sum = [0.0; 6];
            for r in chunk {
                for (s, v) in sum.iter_mut().zip(r.metrics.values()) {
                    *s += v;
                }
            }
            SweepAverage {
                key: chunk[0].key.clone(),
                trials: chunk.len(),
                failures: chunk.iter().filter(|r| r.failed).count(),
                metrics: Metrics::from_values(sum.map(|s| s / chunk.len() as f64)),
            }
        })
        .collect()
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let data = cfg.source.load(cfg.data_seed)?;
    let pairs: Vec<(f64, Loss)> =
        cfg.lambdas.iter().flat_map(|&l| cfg.losses.iter().map(move |&loss| (l, loss))).collect();
    let pool = thread_pool()?;
    let refs: Vec<Reference> = pool.install(|| {
        pairs
            .par_iter()
            .map(|&(lambda, loss)| {
                let star = solve_original(&data.train, &cfg.solver(lambda, loss))?;
                let support = support_set(&star.alpha, SUPPORT_REL_TOL);
                Ok(Reference { lambda, loss, star, support })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    type Group = ((usize, OpChoice), (usize, usize), u64);
    let groups: Vec<Group> = cfg
        .ops
        .iter()
        .copied()
        .enumerate()
        .flat_map(|o| cfg.ms.iter().copied().enumerate().flat_map(move |m| cfg.seeds.iter().map(move |&s| (o, m, s))))
        .collect();
    let mut rows: Vec<SweepRow> = pool.install(|| {
        groups.par_iter().flat_map_iter(|&(o, m, s)| run_group(cfg, &data, &refs, o, m, s)).collect()
    });
    let seed_pos = |s: u64| cfg.seeds.iter().position(|&x| x == s).unwrap_or(usize::MAX);
    rows.sort_by_key(|r| (r.key.index, seed_pos(r.seed)));
    let averages = average(&rows, cfg.seeds.len());
    Ok(SweepOutcome { data_name: data.name, rows, averages })
}

pub const PLOTTED_METRICS: [&str; 3] = ["cone_ratio", "rel_dual_err", "rel_primal_err"];

impl SweepOutcome {
    pub fn rows_csv(&self) -> String {
        let mut out = format!("{}\n", SweepRow::CSV_HEADER);
        for r in &self.rows {
            out.push_str(&r.csv());
            out.push('\n');
        }
        out
    }

    pub fn averages_csv(&self) -> String {
        let mut out = format!("{}\n", SweepAverage::CSV_HEADER);
        for r in &self.averages {
            out.push_str(&r.csv());
            out.push('\n');
        }
        out
    }

    /// Seed-averaged `metric` against τ for one `(op, λ, loss)`, one series per m.
    pub fn curves(&self, op: OpChoice, lambda: f64, loss: Loss, metric: &str) -> Vec<Series> {
        let pick = |m: &Metrics| match metric {
            "cone_ratio" => m.cone_ratio,
            "rel_dual_err" => m.rel_dual_err,
            "rel_primal_err" => m.rel_primal_err,
            "delta_inf" => m.delta_inf,
            "test_error" => m.test_error,
            _ => f64::NAN,
        };
        let mut series: Vec<Series> = Vec::new();
        for a in self.averages.iter().filter(|a| a.key.op == op && a.key.lambda == lambda && a.key.loss == loss) {
            let label = format!("m={}", a.key.m);
            let point = (a.key.tau, pick(&a.metrics));
            match series.iter_mut().find(|s| s.label == label) {
                Some(s) => s.points.push(point),
                None => series.push(Series { label, points: vec![point] }),
            }
        }
        series
    }

    /// Writes `sweep.csv`, `sweep_avg.csv` and one SVG per plotted metric and
    /// `(op, λ, loss)`.
    pub fn write(&self, out: &Path) -> Result<Vec<String>> {
        let mut files = vec![
            write_file(out, "sweep.csv", &self.rows_csv())?,
            write_file(out, "sweep_avg.csv", &self.averages_csv())?,
        ];
        let mut combos: Vec<(OpChoice, f64, Loss)> = Vec::new();
        for a in &self.averages {
            let c = (a.key.op, a.key.lambda, a.key.loss);
            if !combos.contains(&c) {
                combos.push(c);
            }
        }
        for (op, lambda, loss) in combos {
            for metric in PLOTTED_METRICS {
                let title = format!("{} {metric} ({op}, λ={lambda}, {loss})", self.data_name);
                let svg = line_chart(&title, "tau", metric, &self.curves(op, lambda, loss, metric), Axes::default());
                files.push(write_file(out, &format!("sweep_{metric}_{op}_{lambda}_{loss}.svg"), &svg)?);
            }
        }
        Ok(files)
    }
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<String> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Argument(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::Argument(format!("cannot write {}: {e}", path.display())))?;
    Ok(path.display().to_string())
}
