//! Theorem-verification suites. Each suite builds its instances, evaluates
//! the relevant inequalities and returns a CSV report plus the list of
//! violated rows.

use std::fmt;
use std::str::FromStr;

use dsrr::dataset::{synth_sparse_dual, synth_spiky, LabeledDataset, SparseVector};
use dsrr::dualsolve::{recover_primal, solve_original, solve_reduced_sparse, Loss, SolveResult, SolverConfig};
use dsrr::rng::{CounterStream, Purpose};
use dsrr::sketch::{apply_dataset, make_operator, median, OperatorKind, ReductionOperator};
use dsrr::theory::{
    check_nonsmooth_condition, cone_and_bounds, delta_vector, near_sparsity_xi, norm_inf, primal_error_bound,
    restricted_spectrum_bruteforce, sigma1, support_set, tau_min, Perturbation, TheoremReport, SLACK,
};
use dsrr::{Error, Result};

use crate::config::SynthShape;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Suite {
    Thm1,
    Thm2,
    Thm4,
    Thm5,
    Thm6Scaling,
    Thm7Scaling,
}

impl Suite {
    pub const ALL: [Suite; 6] = [Suite::Thm1, Suite::Thm2, Suite::Thm4, Suite::Thm5, Suite::Thm6Scaling, Suite::Thm7Scaling];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Thm1 => "thm1",
            Suite::Thm2 => "thm2",
            Suite::Thm4 => "thm4",
            Suite::Thm5 => "thm5",
            Suite::Thm6Scaling => "thm6-scaling",
            Suite::Thm7Scaling => "thm7-scaling",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown suite '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub header: String,
    pub rows: Vec<String>,
    /// Human-readable description of every failed check.
    pub violations: Vec<String>,
    pub evaluated: usize,
    /// Instances whose admissible `τ` would reach 1.
    pub skipped: usize,
}

impl SuiteReport {
    fn new(suite: Suite, header: impl Into<String>) -> Self {
        Self { suite, header: header.into(), rows: Vec::new(), violations: Vec::new(), evaluated: 0, skipped: 0 }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.evaluated > 0
    }

    pub fn csv(&self) -> String {
        let mut out = format!("{}\n", self.header);
        for r in &self.rows {
            out.push_str(r);
            out.push('\n');
        }
        out
    }
}

/// Instance family and solver settings shared by the dual-recovery suites.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoremSetup {
    pub shape: SynthShape,
    pub lambda: f64,
    pub op: OperatorKind,
    pub m: usize,
    pub seeds: Vec<u64>,
    /// `τ = tau_factor · tau_min`.
    pub tau_factor: f64,
    pub gap_tol: f64,
    pub max_epochs: usize,
    pub rel_tol: f64,
}

impl Default for TheoremSetup {
    fn default() -> Self {
        Self {
            shape: SynthShape { n: 200, d: 512, s: 10, margin: 0.5, noise: 0.3 },
            lambda: 0.01,
            op: OperatorKind::GaussianProjection,
            m: 256,
            seeds: (0..20).collect(),
            tau_factor: 1.05,
            gap_tol: 1e-12,
            max_epochs: 5000,
            rel_tol: 1e-8,
        }
    }
}

/// Largest duality gap at which `α*` is treated as exact.
pub const EXACT_GAP: f64 = 1e-9;

impl TheoremSetup {
    fn solver(&self, loss: Loss) -> SolverConfig {
        SolverConfig::new(self.lambda, loss).with_gap_tol(self.gap_tol).with_max_epochs(self.max_epochs)
    }

    pub fn dataset(&self, seed: u64) -> Result<LabeledDataset> {
        synth_sparse_dual(&self.shape.spec(self.shape.n, seed))
    }

    pub fn operator(&self, seed: u64) -> Result<ReductionOperator> {
        make_operator(self.op, self.shape.d, self.m, seed)
    }

    fn key(&self, seed: u64, loss: Loss) -> String {
        format!("{seed},{loss},{},{},{}", self.op, self.m, self.lambda)
    }
}

const KEY_HEADER: &str = "seed,loss,op,m,lambda";

/// Everything computed for one instance of the exactly-sparse pipeline.
#[derive(Debug, Clone)]
pub struct Instance {
    pub seed: u64,
    pub ds: LabeledDataset,
    pub op: ReductionOperator,
    pub star: SolveResult,
    pub support: Vec<usize>,
    pub delta: Vec<f64>,
}

impl Instance {
    pub fn build(setup: &TheoremSetup, seed: u64, loss: Loss) -> Result<Self> {
        let ds = setup.dataset(seed)?;
        let star = solve_original(&ds, &setup.solver(loss))?;
        let support = support_set(&star.alpha, setup.rel_tol);
        let op = setup.operator(seed)?;
        let delta = delta_vector(&ds, &op, &star.primal)?;
        Ok(Self { seed, ds, op, star, support, delta })
    }

    /// Solves the reduced problem at `τ` and compares against `reference`
    /// on `support`.
    pub fn recover(
        &self,
        setup: &TheoremSetup,
        loss: Loss,
        tau: f64,
        reference: &[f64],
        support: &[usize],
        perturbation: Perturbation,
    ) -> Result<(SolveResult, TheoremReport)> {
        let rds = apply_dataset(&self.op, &self.ds)?;
        let reduced = solve_reduced_sparse(&rds, &setup.solver(loss).with_tau(tau))?;
        let report = cone_and_bounds(&reduced.alpha, reference, support, tau, loss.smoothness(), perturbation)?;
        Ok((reduced, report))
    }
}

fn check_exact(report: &mut SuiteReport, inst: &Instance, what: &str) -> bool {
    if inst.star.gap > EXACT_GAP {
        report.violations.push(format!(
            "seed {}: {what} solve stopped at gap {:e} > {EXACT_GAP:e}",
            inst.seed, inst.star.gap
        ));
        return false;
    }
    true
}

fn describe(report: &TheoremReport) -> String {
    let f = report.flags;
    let mut out = Vec::new();
    if !f.cone {
        out.push(format!("cone ratio {}", report.cone_ratio));
    }
    for (flag, name, v, b) in [
        (f.err2, "err2", report.err2, report.bound2),
        (f.err1, "err1", report.err1, report.bound1),
        (f.err_s, "err_S", report.err_s, report.bound_s),
        (f.err_sc, "mass_Sc", report.err_sc, report.bound_sc),
    ] {
        if flag == Some(false) {
            out.push(format!("{name} {v} > {b}"));
        }
    }
    out.join("; ")
}

/// Exactly-sparse recovery with a smooth loss, or the cone claim alone for
/// the hinge loss.
fn exact_sparse_suite(suite: Suite, setup: &TheoremSetup, loss: Loss) -> Result<SuiteReport> {
    let mut report = SuiteReport::new(
        suite,
        format!("{KEY_HEADER},{},w_err,w_bound", TheoremReport::CSV_HEADER),
    );
    for &seed in &setup.seeds {
        let inst = Instance::build(setup, seed, loss)?;
        if !check_exact(&mut report, &inst, "original") {
            continue;
        }
        let perturbation = Perturbation { delta_inf: norm_inf(&inst.delta), xi: 0.0 };
        let tau = setup.tau_factor * perturbation.tau_min();
        if !(tau > 0.0 && tau < 1.0) {
            report.skipped += 1;
            continue;
        }
        let (reduced, theorem) = inst.recover(setup, loss, tau, &inst.star.alpha, &inst.support, perturbation)?;
        report.evaluated += 1;
        let w_tilde = recover_primal(&inst.ds, &reduced.alpha, setup.lambda)?;
        let w_err = w_tilde
            .iter()
            .zip(&inst.star.primal)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let w_bound = primal_error_bound(sigma1(&inst.ds), setup.lambda, inst.ds.n(), loss.smoothness(), tau, theorem.s());
        let ok = match suite {
            Suite::Thm5 => w_err <= w_bound * SLACK,
            _ => theorem.passed(),
        };
        if !ok {
            let why = if suite == Suite::Thm5 {
                format!("primal error {w_err} > {w_bound}")
            } else {
                describe(&theorem)
            };
            report.violations.push(format!("seed {seed}: {why}"));
        }
        report.rows.push(format!("{},{},{w_err},{w_bound}", setup.key(seed, loss), theorem.csv_row()));
    }
    Ok(report)
}

pub fn thm1(setup: &TheoremSetup) -> Result<SuiteReport> {
    exact_sparse_suite(Suite::Thm1, setup, Loss::SquaredHinge)
}

pub fn thm5(setup: &TheoremSetup) -> Result<SuiteReport> {
    exact_sparse_suite(Suite::Thm5, setup, Loss::SquaredHinge)
}

/// Instance family for the brute-force part of the hinge suite: `n = 16`
/// examples in `d = 16`, one support vector `e_0` and fifteen examples
/// `y_i (c e_0 + b e_i)` whose margin `c > 1` keeps them off the support.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSetup {
    pub c: f64,
    pub b: f64,
    pub jitter: f64,
    pub lambda: f64,
    pub m: usize,
    pub seeds: Vec<u64>,
    pub tau_factor: f64,
}

impl Default for SpectralSetup {
    fn default() -> Self {
        Self { c: 1.2, b: 4.75, jitter: 0.002, lambda: 0.05, m: 400_000, seeds: (0..5).collect(), tau_factor: 1.05 }
    }
}

pub const SPECTRAL_N: usize = 16;

pub fn spectral_instance(setup: &SpectralSetup, seed: u64) -> Result<LabeledDataset> {
    let n = SPECTRAL_N;
    let mut rng = CounterStream::new(seed, Purpose::Synthetic, 2);
    let mut examples = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = if i == 0 { 1.0 } else { rng.sign() };
        let mut x = vec![0.0; n];
        if i == 0 {
            x[0] = 1.0;
        } else {
            x[0] = y * setup.c;
            x[i] = y * setup.b;
        }
        for v in x.iter_mut() {
            *v += setup.jitter * rng.gaussian();
        }
        examples.push(SparseVector::from_dense(&x));
        labels.push(y);
    }
    LabeledDataset::new(examples, labels, n)
}

pub fn thm2(setup: &TheoremSetup, spectral: &SpectralSetup) -> Result<SuiteReport> {
    let mut report = exact_sparse_suite(Suite::Thm2, setup, Loss::Hinge)?;
    report.header.push_str(",level,rho_minus,sigma,condition,bound2_nonsmooth,bound1_nonsmooth");
    let width = report.header.split(',').count();
    for r in report.rows.iter_mut() {
        r.push_str(",,,,,,");
    }
    for &seed in &spectral.seeds {
        let ds = spectral_instance(spectral, seed)?;
        let cfg = SolverConfig::new(spectral.lambda, Loss::Hinge).with_gap_tol(1e-12).with_max_epochs(100_000);
        let star = solve_original(&ds, &cfg)?;
        if star.gap > EXACT_GAP {
            report.violations.push(format!("spectral seed {seed}: gap {:e}", star.gap));
            continue;
        }
        let support = support_set(&star.alpha, 1e-8);
        let op = make_operator(OperatorKind::GaussianProjection, SPECTRAL_N, spectral.m, seed)?;
        let level = (16 * support.len()).min(ds.n());
        let spectrum = restricted_spectrum_bruteforce(&ds, Some(&op), level)?;
        let delta = delta_vector(&ds, &op, &star.primal)?;
        let perturbation = Perturbation { delta_inf: norm_inf(&delta), xi: 0.0 };
        let tau = spectral.tau_factor * tau_min(&delta, 0.0);
        if !(tau > 0.0 && tau < 1.0) {
            report.skipped += 1;
            continue;
        }
        let rds = apply_dataset(&op, &ds)?;
        let reduced = solve_reduced_sparse(&rds, &cfg.with_tau(tau))?;
        let theorem = cone_and_bounds(&reduced.alpha, &star.alpha, &support, tau, f64::INFINITY, perturbation)?;
        let check = check_nonsmooth_condition(&spectrum, support.len(), spectral.lambda, tau);
        report.evaluated += 1;
        if !theorem.passed() {
            report.violations.push(format!("spectral seed {seed}: {}", describe(&theorem)));
        }
        if check.condition
            && !(theorem.err2 <= check.bound2 * SLACK && theorem.err1 <= check.bound1 * SLACK)
        {
            report.violations.push(format!(
                "spectral seed {seed}: err2 {} vs {}, err1 {} vs {}",
                theorem.err2, check.bound2, theorem.err1, check.bound1
            ));
        }
        let row = format!(
            "{seed},hinge,{},{},{},{},,,{level},{},{},{},{},{}",
            OperatorKind::GaussianProjection,
            spectral.m,
            spectral.lambda,
            theorem.csv_row(),
            spectrum.rho_minus,
            spectrum.sigma_s,
            check.condition,
            check.bound2,
            check.bound1
        );
        debug_assert_eq!(row.split(',').count(), width);
        report.rows.push(row);
    }
    Ok(report)
}

/// Smallest truncation level at or above half the support whose admissible
/// `τ` stays below 1, with everything needed to evaluate it.
struct Truncation {
    alpha_s: Vec<f64>,
    support: Vec<usize>,
    perturbation: Perturbation,
    tau: f64,
}

fn choose_truncation(setup: &TheoremSetup, inst: &Instance) -> Result<Option<Truncation>> {
    let full = inst.support.len();
    for s in full.div_ceil(2)..=full {
        let (alpha_s, xi) = near_sparsity_xi(&inst.ds, &inst.star.alpha, s, setup.lambda, Loss::SquaredHinge)?;
        let w_s = recover_primal(&inst.ds, &alpha_s, setup.lambda)?;
        let delta_s = delta_vector(&inst.ds, &inst.op, &w_s)?;
        let perturbation = Perturbation { delta_inf: norm_inf(&inst.delta).max(norm_inf(&delta_s)), xi };
        let tau = setup.tau_factor * perturbation.tau_min();
        if tau > 0.0 && tau < 1.0 {
            let support = (0..alpha_s.len()).filter(|&i| alpha_s[i] != 0.0).collect();
            return Ok(Some(Truncation { alpha_s, support, perturbation, tau }));
        }
    }
    Ok(None)
}

pub fn thm4(setup: &TheoremSetup) -> Result<SuiteReport> {
    let loss = Loss::SquaredHinge;
    let mut report = SuiteReport::new(Suite::Thm4, format!("{KEY_HEADER},full_s,{}", TheoremReport::CSV_HEADER));
    for &seed in &setup.seeds {
        let inst = Instance::build(setup, seed, loss)?;
        if !check_exact(&mut report, &inst, "original") {
            continue;
        }
        let Some(t) = choose_truncation(setup, &inst)? else {
            report.skipped += 1;
            continue;
        };
        let (_, theorem) = inst.recover(setup, loss, t.tau, &t.alpha_s, &t.support, t.perturbation)?;
        report.evaluated += 1;
        if !theorem.passed() {
            report.violations.push(format!("seed {seed}: {}", describe(&theorem)));
        }
        report.rows.push(format!("{},{},{}", setup.key(seed, loss), inst.support.len(), theorem.csv_row()));
    }
    Ok(report)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

pub const SLOPE_RANGE: (f64, f64) = (-0.8, -0.2);

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSetup {
    pub shape: SynthShape,
    pub lambda: f64,
    pub kinds: Vec<OperatorKind>,
    pub ms: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Nonzeros per example in the spiky comparison set.
    pub spiky_nnz: usize,
    pub spiky_m: usize,
}

impl Default for ScalingSetup {
    fn default() -> Self {
        Self {
            shape: SynthShape { n: 200, d: 512, s: 10, margin: 0.5, noise: 0.3 },
            lambda: 0.01,
            kinds: vec![OperatorKind::GaussianProjection, OperatorKind::HashingHD, OperatorKind::HadamardPHD],
            ms: vec![64, 128, 256, 512],
            seeds: (0..10).collect(),
            spiky_nnz: 4,
            spiky_m: 128,
        }
    }
}

fn median_delta(ds: &LabeledDataset, w: &[f64], kind: OperatorKind, m: usize, seeds: &[u64]) -> Result<f64> {
    let values = seeds
        .iter()
        .map(|&seed| Ok(norm_inf(&delta_vector(ds, &make_operator(kind, ds.d(), m, seed)?, w)?)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(median(&values))
}

/// Median `‖Δ‖∞` against `m` per operator, plus the sampling-versus-Gaussian
/// comparison on spiky data.
pub fn thm6_scaling(setup: &ScalingSetup) -> Result<SuiteReport> {
    let mut report = SuiteReport::new(Suite::Thm6Scaling, "dataset,op,m,median_delta_inf,slope");
    let cfg = SolverConfig::new(setup.lambda, Loss::SquaredHinge).with_gap_tol(1e-10);
    let ds = synth_sparse_dual(&setup.shape.spec(setup.shape.n, 0))?;
    let w = solve_original(&ds, &cfg)?.primal;
    for &kind in &setup.kinds {
        let points = setup
            .ms
            .iter()
            .map(|&m| Ok((m as f64, median_delta(&ds, &w, kind, m, &setup.seeds)?)))
            .collect::<Result<Vec<_>>>()?;
        let slope = loglog_slope(&points);
        for (m, v) in &points {
            report.rows.push(format!("synth,{kind},{m},{v},{slope}"));
        }
        report.evaluated += 1;
        if !(SLOPE_RANGE.0..=SLOPE_RANGE.1).contains(&slope) {
            report.violations.push(format!("{kind}: slope {slope} outside {SLOPE_RANGE:?}"));
        }
    }
    let spiky = synth_spiky(setup.shape.n, setup.shape.d, setup.spiky_nnz, 0)?;
    let w = solve_original(&spiky, &cfg)?.primal;
    let sampled = median_delta(&spiky, &w, OperatorKind::SamplingP, setup.spiky_m, &setup.seeds)?;
    let gauss = median_delta(&spiky, &w, OperatorKind::GaussianProjection, setup.spiky_m, &setup.seeds)?;
    report.rows.push(format!("spiky,{},{},{sampled},", OperatorKind::SamplingP, setup.spiky_m));
    report.rows.push(format!("spiky,{},{},{gauss},", OperatorKind::GaussianProjection, setup.spiky_m));
    report.evaluated += 1;
    if sampled <= gauss {
        report.violations.push(format!("sampling {sampled} does not exceed gauss {gauss} on spiky data"));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSetup {
    pub shape: SynthShape,
    pub s: usize,
    pub ms: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl Default for SigmaSetup {
    fn default() -> Self {
        Self {
            shape: SynthShape { n: 10, d: 8, s: 2, margin: 0.5, noise: 0.3 },
            s: 2,
            ms: vec![8, 16, 32, 64, 128],
            seeds: (0..20).collect(),
        }
    }
}

/// Median brute-force `σ_s` over seeds for each `m`; the instance is fixed
/// and only the operator varies.
pub fn sigma_medians(setup: &SigmaSetup) -> Result<Vec<(usize, f64)>> {
    let ds = synth_sparse_dual(&setup.shape.spec(setup.shape.n, 0))?;
    setup
        .ms
        .iter()
        .map(|&m| {
            let values = setup
                .seeds
                .iter()
                .map(|&seed| {
                    let op = make_operator(OperatorKind::GaussianProjection, ds.d(), m, seed)?;
                    Ok(restricted_spectrum_bruteforce(&ds, Some(&op), setup.s)?.sigma_s)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((m, median(&values)))
        })
        .collect()
}

pub fn thm7_scaling(setup: &SigmaSetup) -> Result<SuiteReport> {
    let mut report = SuiteReport::new(Suite::Thm7Scaling, "s,m,median_sigma,slope");
    let medians = sigma_medians(setup)?;
    let points: Vec<(f64, f64)> = medians.iter().map(|&(m, v)| (m as f64, v)).collect();
    let slope = loglog_slope(&points);
    for (m, v) in &medians {
        report.rows.push(format!("{},{m},{v},{slope}", setup.s));
    }
    report.evaluated = 1;
    if !(SLOPE_RANGE.0..=SLOPE_RANGE.1).contains(&slope) {
        report.violations.push(format!("slope {slope} outside {SLOPE_RANGE:?}"));
    }
    for w in medians.windows(2) {
        if w[1].0 == 2 * w[0].0 && w[1].1 >= w[0].1 {
            report.violations.push(format!("median sigma did not drop from m={} to m={}", w[0].0, w[1].0));
        }
    }
    Ok(report)
}

/// Settings for every suite; the CLI overrides parts of it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifySettings {
    pub theorem: TheoremSetup,
    pub spectral: SpectralSetup,
    pub scaling: ScalingSetup,
    pub sigma: SigmaSetup,
}

pub fn run_suite(suite: Suite, s: &VerifySettings) -> Result<SuiteReport> {
    match suite {
        Suite::Thm1 => thm1(&s.theorem),
        Suite::Thm2 => thm2(&s.theorem, &s.spectral),
        Suite::Thm4 => thm4(&s.theorem),
        Suite::Thm5 => thm5(&s.theorem),
        Suite::Thm6Scaling => thm6_scaling(&s.scaling),
        Suite::Thm7Scaling => thm7_scaling(&s.sigma),
    }
}
