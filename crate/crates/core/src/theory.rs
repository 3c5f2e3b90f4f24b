//! Numerical checks of the recovery-error theory.
//!
//! The perturbation vector is `Δ = (1/λn)(X̂ᵀX̂ − XᵀX)α*`. With
//! `w* = −(1/λn)Xα*` its entries factor as `Δ_i = x_iᵀw* − (Ax_i)ᵀ(Aw*)`, so it
//! is computed from one application of `A` to `w*` and one per example,
//! never forming an `n × n` Gram matrix.
//!
//! Restricted eigenvalues and `σ_s` are found by enumerating supports, which
//! is only feasible for tiny `n`; both budgets are enforced.

use itertools::Itertools;
use nalgebra::{DMatrix, SymmetricEigen};

use crate::dataset::LabeledDataset;
use crate::dualsolve::Loss;
use crate::error::{arg_err, Error, Result};
use crate::sketch::ReductionOperator;

/// Multiplicative slack applied to every inequality check.
pub const SLACK: f64 = 1.0 + 1e-9;
/// Largest number of size-`s` supports enumerated for `ρ±`.
pub const SUPPORT_BUDGET: u128 = 1_000_000;
/// Largest number of support pairs enumerated for `σ_s`.
pub const PAIR_BUDGET: u128 = 10_000_000;
/// `conv(S_{n,s}) ⊂ K_{n,s} ⊂ 2 conv(S_{n,s})` gives a factor of 4 on quadratic forms.
pub const RELAXATION_FACTOR: f64 = 4.0;

pub fn delta_vector(ds: &LabeledDataset, op: &ReductionOperator, w_star: &[f64]) -> Result<Vec<f64>> {
    if w_star.len() != ds.d() || op.d() != ds.d() {
        return arg_err(format!(
            "dimension mismatch: dataset d={}, operator d={}, w has {}",
            ds.d(),
            op.d(),
            w_star.len()
        ));
    }
    let aw = op.apply_dense(w_star)?;
    ds.examples()
        .iter()
        .map(|x| {
            let ax = op.apply(x)?;
            let reduced: f64 = ax.iter().zip(&aw).map(|(a, b)| a * b).sum();
            Ok(x.dot_dense(w_star) - reduced)
        })
        .collect()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn tau_min(delta: &[f64], xi: f64) -> f64 {
    2.0 * norm_inf(delta) + 2.0 * xi
}

/// Indices with `|α_i| > rel_tol · max|α|`, ascending.
pub fn support_set(alpha: &[f64], rel_tol: f64) -> Vec<usize> {
    let top = norm_inf(alpha);
    if top == 0.0 {
        return Vec::new();
    }
    let cut = rel_tol * top;
    (0..alpha.len()).filter(|&i| alpha[i].abs() > cut).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundFlags {
    pub tau_ok: bool,
    pub cone: bool,
    /// `None` when the loss is not smooth and the bound does not apply.
    pub err2: Option<bool>,
    pub err1: Option<bool>,
    pub err_s: Option<bool>,
    pub err_sc: Option<bool>,
}

impl BoundFlags {
    /// Every applicable inequality holds. `tau_ok` is reported separately.
    pub fn inequalities_hold(&self) -> bool {
        self.cone
            && [self.err2, self.err1, self.err_s, self.err_sc]
                .iter()
                .all(|f| f.unwrap_or(true))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremReport {
    pub delta_inf: f64,
    pub xi: f64,
    pub tau_used: f64,
    pub tau_min: f64,
    pub support: Vec<usize>,
    pub cone_ratio: f64,
    pub err2: f64,
    pub err1: f64,
    pub err_s: f64,
    pub err_sc: f64,
    pub bound2: f64,
    pub bound1: f64,
    pub bound_s: f64,
    pub bound_sc: f64,
    pub flags: BoundFlags,
}

impl TheoremReport {
    pub const CSV_HEADER: &'static str = "delta_inf,xi,tau,tau_min,s,cone_ratio,err2,err1,err_s,err_sc,\
bound2,bound1,bound_s,bound_sc,tau_ok,pass";

    pub fn s(&self) -> usize {
        self.support.len()
    }

    pub fn passed(&self) -> bool {
        self.flags.inequalities_hold()
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.delta_inf,
            self.xi,
            self.tau_used,
            self.tau_min,
            self.s(),
            self.cone_ratio,
            self.err2,
            self.err1,
            self.err_s,
            self.err_sc,
            self.bound2,
            self.bound1,
            self.bound_s,
            self.bound_sc,
            self.flags.tau_ok,
            self.passed()
        )
    }
}

/// The quantities that set the admissible `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Perturbation {
    pub delta_inf: f64,
    pub xi: f64,
}

impl Perturbation {
    pub fn tau_min(&self) -> f64 {
        2.0 * self.delta_inf + 2.0 * self.xi
    }
}

/// Cone ratio and the four error bounds for `α̃` against the reference `α*`
/// supported on `support`. `smoothness` is the loss gradient's Lipschitz
/// constant; an infinite value skips the four bounds.
pub fn cone_and_bounds(
    alpha_tilde: &[f64],
    alpha_star: &[f64],
    support: &[usize],
    tau: f64,
    smoothness: f64,
    perturbation: Perturbation,
) -> Result<TheoremReport> {
    if alpha_tilde.len() != alpha_star.len() {
        return arg_err("alpha vectors differ in length");
    }
    if !(tau > 0.0) {
        return arg_err(format!("tau must be positive, got {tau}"));
    }
    let n = alpha_star.len();
    let mut on_support = vec![false; n];
    for &i in support {
        if i >= n {
            return arg_err(format!("support index {i} out of range"));
        }
        on_support[i] = true;
    }
    let (mut err_s, mut err_sc, mut sq) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let e = alpha_tilde[i] - alpha_star[i];
        sq += e * e;
        if on_support[i] {
            err_s += e.abs();
        } else {
            err_sc += alpha_tilde[i].abs();
        }
    }
    let mass_sc: f64 = (0..n).filter(|&i| !on_support[i]).map(|i| (alpha_tilde[i] - alpha_star[i]).abs()).sum();
    let cone_ratio = if err_s > 0.0 {
        err_sc / err_s
    } else if err_sc == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let err2 = sq.sqrt();
    let err1 = err_s + mass_sc;
    let s = support.len() as f64;
    let l = smoothness;
    let smooth = l.is_finite();
    let bound2 = 3.0 * tau * l * s.sqrt();
    let bound1 = 12.0 * tau * l * s;
    let bound_s = 3.0 * tau * l * s;
    let bound_sc = 9.0 * tau * l * s;
    let check = |v: f64, b: f64| smooth.then_some(v <= b * SLACK);
    let tmin = perturbation.tau_min();
    let flags = BoundFlags {
        tau_ok: tau >= tmin,
        cone: cone_ratio <= 3.0 * SLACK,
        err2: check(err2, bound2),
        err1: check(err1, bound1),
        err_s: check(err_s, bound_s),
        err_sc: check(err_sc, bound_sc),
    };
    Ok(TheoremReport {
        delta_inf: perturbation.delta_inf,
        xi: perturbation.xi,
        tau_used: tau,
        tau_min: tmin,
        support: support.to_vec(),
        cone_ratio,
        err2,
        err1,
        err_s,
        err_sc,
        bound2,
        bound1,
        bound_s,
        bound_sc,
        flags,
    })
}

/// Keeps the `s` largest-magnitude entries; ties go to the lower index.
pub fn truncate_top_s(alpha: &[f64], s: usize) -> Vec<f64> {
    let mut order: Vec<usize> = (0..alpha.len()).collect();
    order.sort_by(|&a, &b| alpha[b].abs().total_cmp(&alpha[a].abs()).then(a.cmp(&b)));
    let mut out = vec![0.0; alpha.len()];
    for &i in order.iter().take(s) {
        out[i] = alpha[i];
    }
    out
}

/// Top-`s` truncation `α^s` of `α*` and its optimality residual `ξ`.
///
/// With `g_i = y_i + α^s_i/2 − x_iᵀw(α^s)` the gradient of the squared-hinge
/// dual, the residual is `|g_i|` where `α^s_i ≠ 0` and `max(0, y_i g_i)`
/// where `α^s_i = 0`, the part of the gradient that points into the feasible
/// set `α_i y_i ≤ 0`.
pub fn near_sparsity_xi(
    ds: &LabeledDataset,
    alpha_star: &[f64],
    s: usize,
    lambda: f64,
    loss: Loss,
) -> Result<(Vec<f64>, f64)> {
    if loss != Loss::SquaredHinge {
        return Err(Error::Unsupported(format!("near-sparsity residual needs a smooth loss, got {loss}")));
    }
    if alpha_star.len() != ds.n() {
        return arg_err("alpha length does not match dataset");
    }
    if s > ds.n() {
        return arg_err(format!("s={s} exceeds n={}", ds.n()));
    }
    let alpha_s = truncate_top_s(alpha_star, s);
    let w = crate::dualsolve::recover_primal(ds, &alpha_s, lambda)?;
    let xi = ds
        .examples()
        .iter()
        .zip(ds.labels())
        .zip(&alpha_s)
        .map(|((x, &y), &a)| {
            let g = y + 0.5 * a - x.dot_dense(&w);
            if a != 0.0 {
                g.abs()
            } else {
                (y * g).max(0.0)
            }
        })
        .fold(0.0, f64::max);
    Ok((alpha_s, xi))
}

/// `XᵀX / n` as a dense `n × n` matrix.
pub fn gram_matrix(ds: &LabeledDataset) -> DMatrix<f64> {
    let cols = ds.to_dense_columns();
    let n = ds.n();
    DMatrix::from_fn(n, n, |i, j| dot(&cols[i], &cols[j]) / n as f64)
}

/// `(XᵀX − X̂ᵀX̂) / n` with `X̂ = AX`.
pub fn gram_difference(ds: &LabeledDataset, op: &ReductionOperator) -> Result<DMatrix<f64>> {
    let n = ds.n();
    let reduced = ds.examples().iter().map(|x| op.apply(x)).collect::<Result<Vec<_>>>()?;
    let g = gram_matrix(ds);
    Ok(DMatrix::from_fn(n, n, |i, j| g[(i, j)] - dot(&reduced[i], &reduced[j]) / n as f64))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedSpectrumReport {
    pub s: usize,
    pub rho_plus: f64,
    pub rho_minus: f64,
    /// Largest singular value over all support-pair blocks of the Gram difference.
    pub sigma_s: f64,
    /// Largest `|αᵀUα|` over `s`-sparse unit vectors.
    pub sigma_quadratic: f64,
    pub kappa: f64,
    pub relaxation_factor: f64,
}

impl RestrictedSpectrumReport {
    pub const CSV_HEADER: &'static str = "s,rho_plus,rho_minus,sigma_s,sigma_quadratic,kappa,relaxation_factor";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.s,
            self.rho_plus,
            self.rho_minus,
            self.sigma_s,
            self.sigma_quadratic,
            self.kappa,
            self.relaxation_factor
        )
    }
}

fn block(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |a, b| m[(rows[a], cols[b])])
}

fn extreme_eigenvalues(m: DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(m).eigenvalues;
    (eig.min(), eig.max())
}

fn max_singular_value(m: DMatrix<f64>) -> f64 {
    m.singular_values().max()
}

/// Restricted eigenvalues of `XᵀX/n` at level `s` and, when an operator is
/// given, `σ_s` of the Gram difference, by exhaustive enumeration.
pub fn restricted_spectrum_bruteforce(
    ds: &LabeledDataset,
    op: Option<&ReductionOperator>,
    s: usize,
) -> Result<RestrictedSpectrumReport> {
    let n = ds.n();
    if s == 0 || s > n {
        return arg_err(format!("sparsity level {s} must lie in 1..={n}"));
    }
    let subsets = binomial(n, s);
    if subsets > SUPPORT_BUDGET {
        return arg_err(format!("C({n},{s}) = {subsets} supports exceeds the budget of {SUPPORT_BUDGET}"));
    }
    let supports: Vec<Vec<usize>> = (0..n).combinations(s).collect();
    let g = gram_matrix(ds);
    let (mut rho_minus, mut rho_plus) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in &supports {
        let (lo, hi) = extreme_eigenvalues(block(&g, t, t));
        rho_minus = rho_minus.min(lo);
        rho_plus = rho_plus.max(hi);
    }
    rho_minus = rho_minus.max(0.0);

    let (sigma_s, sigma_quadratic) = match op {
        None => (0.0, 0.0),
        Some(op) => {
            if subsets * subsets > PAIR_BUDGET {
                return arg_err(format!(
                    "{} support pairs exceed the budget of {PAIR_BUDGET}",
                    subsets * subsets
                ));
            }
            let u = gram_difference(ds, op)?;
            let mut quad: f64 = 0.0;
            for t in &supports {
                let (lo, hi) = extreme_eigenvalues(block(&u, t, t));
                quad = quad.max(lo.abs()).max(hi.abs());
            }
            let mut pair: f64 = 0.0;
            for t1 in &supports {
                for t2 in &supports {
                    pair = pair.max(max_singular_value(block(&u, t1, t2)));
                }
            }
            (pair, quad)
        }
    };
    Ok(RestrictedSpectrumReport {
        s,
        rho_plus,
        rho_minus,
        sigma_s,
        sigma_quadratic,
        kappa: if rho_minus > 0.0 { rho_plus / rho_minus } else { f64::INFINITY },
        relaxation_factor: RELAXATION_FACTOR,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonsmoothCheck {
    /// `σ < ρ⁻` at the report's level.
    pub condition: bool,
    pub bound2: f64,
    pub bound1: f64,
}

/// Hinge-loss error bounds `3λτ√s / (2(ρ⁻ − σ))` and `6λτs / (ρ⁻ − σ)`.
/// `report` should be taken at level `16s` (or `n` when that is smaller).
pub fn check_nonsmooth_condition(report: &RestrictedSpectrumReport, s: usize, lambda: f64, tau: f64) -> NonsmoothCheck {
    let gap = report.rho_minus - report.sigma_s;
    if gap <= 0.0 {
        return NonsmoothCheck { condition: false, bound2: f64::INFINITY, bound1: f64::INFINITY };
    }
    let s = s as f64;
    NonsmoothCheck {
        condition: true,
        bound2: 3.0 * lambda * tau * s.sqrt() / (2.0 * gap),
        bound1: 6.0 * lambda * tau * s / gap,
    }
}

/// Largest singular value of the `d × n` data matrix.
pub fn sigma1(ds: &LabeledDataset) -> f64 {
    let cols = ds.to_dense_columns();
    let m = DMatrix::from_fn(ds.d(), ds.n(), |r, c| cols[c][r]);
    if m.is_empty() {
        return 0.0;
    }
    max_singular_value(m)
}

/// `‖w̃ − w*‖₂ ≤ (σ₁/λn) · 3Lτ√s`
pub fn primal_error_bound(sigma1: f64, lambda: f64, n: usize, smoothness: f64, tau: f64, s: usize) -> f64 {
    sigma1 / (lambda * n as f64) * 3.0 * smoothness * tau * (s as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SparseVector;

    fn col(v: &[f64]) -> SparseVector {
        SparseVector::from_dense(v)
    }

    #[test]
    fn tau_min_arithmetic() {
        assert_eq!(tau_min(&[0.0, 0.0], 0.0), 0.0);
        assert!((tau_min(&[0.1, -0.3], 0.0) - 0.6).abs() < 1e-15);
        assert!((tau_min(&[0.1, -0.3], 0.05) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn support_thresholds() {
        assert_eq!(support_set(&[0.0, 0.5, 1e-12], 1e-8), vec![1]);
        assert!(support_set(&[0.0, 0.0], 1e-8).is_empty());
    }

    #[test]
    fn cone_by_hand() {
        let r = cone_and_bounds(&[0.9, 0.05], &[1.0, 0.0], &[0], 0.1, 2.0, Perturbation::default()).unwrap();
        assert!((r.cone_ratio - 0.5).abs() < 1e-12);
        assert!((r.err2 - (0.01f64 + 0.0025).sqrt()).abs() < 1e-12);
        let exact = cone_and_bounds(&[1.0, 0.0], &[1.0, 0.0], &[0], 0.01, 2.0, Perturbation::default()).unwrap();
        assert_eq!(exact.cone_ratio, 0.0);
        assert_eq!(exact.err2, 0.0);
        assert!(exact.passed());
        let off = cone_and_bounds(&[1.0, 0.2], &[1.0, 0.0], &[0], 0.01, 2.0, Perturbation::default()).unwrap();
        assert!(off.cone_ratio.is_infinite());
        assert!(!off.passed());
    }

    #[test]
    fn hinge_skips_smooth_bounds() {
        let r = cone_and_bounds(&[0.9, 0.0], &[1.0, 0.0], &[0], 0.1, f64::INFINITY, Perturbation::default()).unwrap();
        assert_eq!(r.flags.err2, None);
        assert!(r.passed());
    }

    #[test]
    fn truncation_ties_by_index() {
        assert_eq!(truncate_top_s(&[0.5, -0.5, 0.2], 1), vec![0.5, 0.0, 0.0]);
        assert_eq!(truncate_top_s(&[0.1, -0.5, 0.2], 2), vec![0.0, -0.5, 0.2]);
    }

    #[test]
    fn xi_at_zero_is_one() {
        let ds = LabeledDataset::new(vec![col(&[1.0, 0.0]), col(&[0.0, 2.0])], vec![1.0, -1.0], 2).unwrap();
        let (a, xi) = near_sparsity_xi(&ds, &[0.0, 0.0], 0, 0.1, Loss::SquaredHinge).unwrap();
        assert_eq!(a, vec![0.0, 0.0]);
        assert_eq!(xi, 1.0);
        assert!(near_sparsity_xi(&ds, &[0.0, 0.0], 1, 0.1, Loss::Hinge).is_err());
    }

    #[test]
    fn duplicated_columns_spectrum() {
        let ds = LabeledDataset::new(vec![col(&[1.0, 0.0]), col(&[1.0, 0.0])], vec![1.0, -1.0], 2).unwrap();
        let r1 = restricted_spectrum_bruteforce(&ds, None, 1).unwrap();
        assert!((r1.rho_plus - 0.5).abs() < 1e-12 && (r1.rho_minus - 0.5).abs() < 1e-12);
        let r2 = restricted_spectrum_bruteforce(&ds, None, 2).unwrap();
        assert!((r2.rho_plus - 1.0).abs() < 1e-12 && r2.rho_minus.abs() < 1e-12);
        let c = check_nonsmooth_condition(&r2, 1, 0.1, 0.1);
        assert!(!c.condition && c.bound2.is_infinite());
    }

    #[test]
    fn identity_has_no_perturbation() {
        let ds = LabeledDataset::new(vec![col(&[1.0, 2.0]), col(&[0.5, -1.0]), col(&[0.0, 3.0])], vec![1.0, -1.0, 1.0], 2)
            .unwrap();
        let op = ReductionOperator::identity(2).unwrap();
        assert_eq!(delta_vector(&ds, &op, &[0.3, -0.7]).unwrap(), vec![0.0; 3]);
        for s in 1..=3 {
            let r = restricted_spectrum_bruteforce(&ds, Some(&op), s).unwrap();
            assert_eq!(r.sigma_s, 0.0);
        }
        let doubled = ReductionOperator::scaled_identity(2, 2.0).unwrap();
        let w = [0.3, -0.7];
        let d = delta_vector(&ds, &doubled, &w).unwrap();
        for (i, x) in ds.examples().iter().enumerate() {
            assert!((d[i].abs() - 3.0 * x.dot_dense(&w).abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn budgets_enforced() {
        let cols: Vec<SparseVector> = (0..40).map(|i| col(&[i as f64, 1.0])).collect();
        let ds = LabeledDataset::new(cols, vec![1.0; 40], 2).unwrap();
        assert!(restricted_spectrum_bruteforce(&ds, None, 20).is_err());
        assert_eq!(binomial(10, 2), 45);
        assert_eq!(binomial(3, 5), 0);
    }

    #[test]
    fn sigma1_of_diagonal() {
        let ds = LabeledDataset::new(vec![col(&[3.0, 0.0]), col(&[0.0, 1.0])], vec![1.0, -1.0], 2).unwrap();
        assert!((sigma1(&ds) - 3.0).abs() < 1e-12);
    }
}
