//! Stochastic dual coordinate ascent for L2-regularized hinge and squared
//! hinge classification, with a shifted margin.
//!
//! With `β_i = -y_i α_i` the ℓ1-regularized reduced dual
//!
//! ```text
//! max_α  -(1/n) Σ ℓ*_i(α_i) - 1/(2λn²) αᵀ X̂ᵀX̂ α - (τ/n) ‖α‖₁
//! ```
//!
//! is exactly the ordinary dual of the margin-`γ` problem with `γ = 1 - τ`:
//!
//! ```text
//! min_u  (1/n) Σ φ_γ(y_i uᵀx̂_i) + (λ/2) ‖u‖²,
//! φ_γ(z) = max(0, γ - z)        (hinge,          β ∈ [0, 1])
//! φ_γ(z) = max(0, γ - z)²       (squared hinge,  β ≥ 0)
//! ```
//!
//! so one coordinate-ascent kernel serves the original problem (`τ = 0`) and
//! the dual-sparse reduced problem (`τ > 0`). The primal iterate is kept as
//! `w = (1/λn) Σ β_i y_i x_i = -(1/λn) X α`.

use std::fmt;
use std::str::FromStr;

use crate::dataset::LabeledDataset;
use crate::error::{arg_err, Error, Result};
use crate::rng::{CounterStream, Purpose};
use crate::sketch::{ReducedDataset, ReductionOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Loss {
    Hinge,
    SquaredHinge,
}

impl Loss {
    /// Lipschitz constant of the loss gradient; infinite for the hinge.
    pub fn smoothness(self) -> f64 {
        match self {
            Loss::Hinge => f64::INFINITY,
            Loss::SquaredHinge => 2.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Loss::Hinge => "hinge",
            Loss::SquaredHinge => "sqhinge",
        }
    }

    /// `φ_γ(z)`
    pub fn value(self, margin: f64, z: f64) -> f64 {
        let slack = (margin - z).max(0.0);
        match self {
            Loss::Hinge => slack,
            Loss::SquaredHinge => slack * slack,
        }
    }

    /// Per-example dual term `-φ*_γ(-β)`.
    pub fn dual_term(self, margin: f64, beta: f64) -> f64 {
        match self {
            Loss::Hinge => margin * beta,
            Loss::SquaredHinge => margin * beta - 0.25 * beta * beta,
        }
    }

    /// Projects `β` onto the dual feasible set.
    pub fn clamp_beta(self, beta: f64) -> f64 {
        match self {
            Loss::Hinge => beta.clamp(0.0, 1.0),
            Loss::SquaredHinge => beta.max(0.0),
        }
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hinge" => Ok(Loss::Hinge),
            "sqhinge" | "squared_hinge" => Ok(Loss::SquaredHinge),
            _ => Err(Error::Argument(format!("unknown loss '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub lambda: f64,
    /// Weight of the ℓ1 penalty on the dual; the solver runs at margin `1 - tau`.
    pub tau: f64,
    pub loss: Loss,
    pub max_epochs: usize,
    pub gap_tol: f64,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(lambda: f64, loss: Loss) -> Self {
        Self { lambda, tau: 0.0, loss, max_epochs: 500, gap_tol: 1e-8, seed: 0 }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_gap_tol(mut self, gap_tol: f64) -> Self {
        self.gap_tol = gap_tol;
        self
    }

    pub fn with_max_epochs(mut self, max_epochs: usize) -> Self {
        self.max_epochs = max_epochs;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return arg_err(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(0.0..1.0).contains(&self.tau) {
            return arg_err(format!("tau must lie in [0, 1), got {}", self.tau));
        }
        if self.gap_tol.is_nan() || self.gap_tol < 0.0 {
            return arg_err("gap_tol must be non-negative");
        }
        Ok(())
    }

    pub fn margin(&self) -> f64 {
        1.0 - self.tau
    }
}

/// Read access to a column-stored example matrix.
pub trait Examples {
    fn len(&self) -> usize;
    fn dim(&self) -> usize;
    fn label(&self, i: usize) -> f64;
    fn dot(&self, i: usize, w: &[f64]) -> f64;
    /// `w += a * x_i`
    fn axpy(&self, i: usize, a: f64, w: &mut [f64]);
    fn sq_norm(&self, i: usize) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Examples for LabeledDataset {
    fn len(&self) -> usize {
        self.n()
    }
    fn dim(&self) -> usize {
        self.d()
    }
    fn label(&self, i: usize) -> f64 {
        LabeledDataset::label(self, i)
    }
    fn dot(&self, i: usize, w: &[f64]) -> f64 {
        self.example(i).dot_dense(w)
    }
    fn axpy(&self, i: usize, a: f64, w: &mut [f64]) {
        self.example(i).axpy_into(a, w);
    }
    fn sq_norm(&self, i: usize) -> f64 {
        self.example(i).sq_norm()
    }
}

impl Examples for ReducedDataset {
    fn len(&self) -> usize {
        self.n()
    }
    fn dim(&self) -> usize {
        self.m()
    }
    fn label(&self, i: usize) -> f64 {
        self.labels()[i]
    }
    fn dot(&self, i: usize, w: &[f64]) -> f64 {
        self.column(i).iter().zip(w).map(|(a, b)| a * b).sum()
    }
    fn axpy(&self, i: usize, a: f64, w: &mut [f64]) {
        for (o, x) in w.iter_mut().zip(self.column(i)) {
            *o += a * x;
        }
    }
    fn sq_norm(&self, i: usize) -> f64 {
        self.column(i).iter().map(|v| v * v).sum()
    }
}

/// Closed-form maximizer of the dual along coordinate `i`.
///
/// `z` is `y_i wᵀx_i` at the current iterate and `qnorm = ‖x_i‖²/(λn)`.
pub fn coordinate_step(loss: Loss, margin: f64, beta: f64, z: f64, qnorm: f64) -> f64 {
    match loss {
        Loss::Hinge if qnorm > 0.0 => (beta + (margin - z) / qnorm).clamp(0.0, 1.0),
        // The dual is linear along a zero column: jump to the better end.
        Loss::Hinge => {
            if margin > z {
                1.0
            } else {
                0.0
            }
        }
        Loss::SquaredHinge => (beta + (margin - z - 0.5 * beta) / (qnorm + 0.5)).max(0.0),
    }
}

/// Change of the dual objective when coordinate `i` moves from `old` to
/// `new`, times `n`.
fn step_gain(loss: Loss, margin: f64, old: f64, new: f64, z: f64, qnorm: f64) -> f64 {
    let delta = new - old;
    loss.dual_term(margin, new) - loss.dual_term(margin, old) - delta * z - 0.5 * delta * delta * qnorm
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// Dual variables in the original sign convention, `α_i = -y_i β_i`.
    pub alpha: Vec<f64>,
    /// Primal weights `-(1/λn) X α` in the space the problem was solved in.
    pub primal: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub epochs_run: usize,
    pub converged: bool,
    /// Dual objective after each epoch, starting with the initial point.
    pub dual_trace: Vec<f64>,
    /// Smallest single-coordinate change of the dual objective observed.
    pub min_step_gain: f64,
}

impl SolveResult {
    pub const CSV_HEADER: &'static str = "objective,dual_objective,gap,epochs,nnz_alpha";

    pub fn nnz_alpha(&self) -> usize {
        self.alpha.iter().filter(|a| **a != 0.0).count()
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.objective,
            self.dual_objective,
            self.gap,
            self.epochs_run,
            self.nnz_alpha()
        )
    }
}

/// One value per line, shortest round-trip representation.
pub fn vector_dump(v: &[f64]) -> String {
    let mut out = String::with_capacity(v.len() * 12);
    for x in v {
        out.push_str(&x.to_string());
        out.push('\n');
    }
    out
}

pub fn parse_vector_dump(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<f64>().map_err(|_| Error::Parse {
                line: i + 1,
                msg: format!("bad number '{}'", l.trim()),
            })
        })
        .collect()
}

/// Primal and dual objectives of the margin-`γ` problem at `(β, w)`.
pub fn objectives<E: Examples + ?Sized>(
    data: &E,
    loss: Loss,
    lambda: f64,
    margin: f64,
    beta: &[f64],
    w: &[f64],
) -> (f64, f64) {
    let n = data.len() as f64;
    let wsq: f64 = w.iter().map(|v| v * v).sum();
    let mut loss_sum = 0.0;
    let mut dual_sum = 0.0;
    for (i, &b) in beta.iter().enumerate() {
        let z = data.label(i) * data.dot(i, w);
        loss_sum += loss.value(margin, z);
        dual_sum += loss.dual_term(margin, b);
    }
    let reg = 0.5 * lambda * wsq;
    (loss_sum / n + reg, dual_sum / n - reg)
}

/// `w = (1/λn) Σ β_i y_i x_i`
pub fn primal_from_beta<E: Examples + ?Sized>(data: &E, lambda: f64, beta: &[f64]) -> Vec<f64> {
    let scale = 1.0 / (lambda * data.len() as f64);
    let mut w = vec![0.0; data.dim()];
    for (i, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            data.axpy(i, scale * b * data.label(i), &mut w);
        }
    }
    w
}

pub(crate) fn beta_from_alpha(labels: impl Iterator<Item = f64>, alpha: &[f64]) -> Vec<f64> {
    labels.zip(alpha).map(|(y, a)| -y * a).collect()
}

/// Runs coordinate ascent at `cfg.margin()` from `init` (dual variables in
/// the α convention) or from zero.
pub fn solve_sdca<E: Examples + ?Sized>(
    data: &E,
    cfg: &SolverConfig,
    init: Option<&[f64]>,
) -> Result<SolveResult> {
    cfg.validate()?;
    let n = data.len();
    if n == 0 {
        return arg_err("cannot solve on an empty dataset");
    }
    let margin = cfg.margin();
    let lambda = cfg.lambda;
    let mut beta = match init {
        Some(a) if a.len() != n => return arg_err(format!("initial alpha has length {} != {n}", a.len())),
        Some(a) => beta_from_alpha((0..n).map(|i| data.label(i)), a)
            .into_iter()
            .map(|b| cfg.loss.clamp_beta(b))
            .collect(),
        None => vec![0.0; n],
    };
    let mut w = primal_from_beta(data, lambda, &beta);
    let qnorm: Vec<f64> = (0..n).map(|i| data.sq_norm(i) / (lambda * n as f64)).collect();
    let inv_lambda_n = 1.0 / (lambda * n as f64);

    let (mut primal, mut dual) = objectives(data, cfg.loss, lambda, margin, &beta, &w);
    let mut dual_trace = vec![dual];
    let mut min_step_gain = f64::INFINITY;
    let mut epochs_run = 0;
    let mut rng = CounterStream::new(cfg.seed, Purpose::Permutation, 0);
    let mut order: Vec<usize> = (0..n).collect();

    while primal - dual > cfg.gap_tol && epochs_run < cfg.max_epochs {
        rng.shuffle(&mut order);
        for &i in &order {
            let y = data.label(i);
            let z = y * data.dot(i, &w);
            let old = beta[i];
            let new = coordinate_step(cfg.loss, margin, old, z, qnorm[i]);
            if new != old {
                min_step_gain = min_step_gain.min(step_gain(cfg.loss, margin, old, new, z, qnorm[i]) / n as f64);
                data.axpy(i, (new - old) * y * inv_lambda_n, &mut w);
                beta[i] = new;
            }
        }
        epochs_run += 1;
        (primal, dual) = objectives(data, cfg.loss, lambda, margin, &beta, &w);
        dual_trace.push(dual);
    }

    let w = primal_from_beta(data, lambda, &beta);
    let (objective, dual_objective) = objectives(data, cfg.loss, lambda, margin, &beta, &w);
    let gap = objective - dual_objective;
    let alpha = (0..n).map(|i| -data.label(i) * beta[i]).collect();
    Ok(SolveResult {
        alpha,
        primal: w,
        objective,
        dual_objective,
        gap,
        epochs_run,
        converged: gap <= cfg.gap_tol,
        dual_trace,
        min_step_gain,
    })
}

/// Solves the unreduced problem; `cfg.tau` must be zero.
pub fn solve_original(ds: &LabeledDataset, cfg: &SolverConfig) -> Result<SolveResult> {
    if cfg.tau != 0.0 {
        return arg_err("the original problem has no dual-sparse term; set tau = 0");
    }
    solve_sdca(ds, cfg, None)
}

/// Solves the dual-sparse reduced problem through its margin `1 - tau` form.
pub fn solve_reduced_sparse(rds: &ReducedDataset, cfg: &SolverConfig) -> Result<SolveResult> {
    solve_sdca(rds, cfg, None)
}

/// `-(1/λn) X α` over the original examples.
pub fn recover_primal(ds: &LabeledDataset, alpha: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if alpha.len() != ds.n() {
        return arg_err(format!("alpha has length {} but dataset has {} examples", alpha.len(), ds.n()));
    }
    let scale = -1.0 / (lambda * ds.n() as f64);
    let mut w = vec![0.0; ds.d()];
    for (x, &a) in ds.examples().iter().zip(alpha) {
        if a != 0.0 {
            x.axpy_into(scale * a, &mut w);
        }
    }
    Ok(w)
}

/// The `Aᵀu` baseline.
pub fn naive_recover(op: &ReductionOperator, u: &[f64]) -> Result<Vec<f64>> {
    op.adjoint(u)
}

/// Fraction of examples with `sign(wᵀx) != y`; a zero score is an error.
pub fn predict_error<E: Examples + ?Sized>(w: &[f64], test: &E) -> Result<f64> {
    if test.is_empty() {
        return arg_err("empty test set");
    }
    if w.len() != test.dim() {
        return arg_err(format!("weights have dim {} but examples have {}", w.len(), test.dim()));
    }
    let wrong = (0..test.len())
        .filter(|&i| test.label(i) * test.dot(i, w) <= 0.0)
        .count();
    Ok(wrong as f64 / test.len() as f64)
}
