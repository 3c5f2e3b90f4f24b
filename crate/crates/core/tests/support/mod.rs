//! Reference computations used only by tests. Each one takes a route that
//! shares no arithmetic with the library code it checks: dense matrices
//! instead of factored products, an explicit ℓ1 proximal step instead of the
//! margin shift, grid search instead of closed forms.
#![allow(dead_code)]

use dsrr::dataset::{LabeledDataset, SparseVector};
use dsrr::dualsolve::Loss;
use dsrr::rng::{CounterStream, Purpose};
use dsrr::sketch::ReductionOperator;

pub type Dense = Vec<Vec<f64>>;

/// Maximizes `f` over a uniform grid on `[lo, hi]`, returning the argmax.
pub fn grid_argmax(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> f64 {
    let count = ((hi - lo) / step).round() as usize;
    (0..=count)
        .map(|k| lo + k as f64 * step)
        .max_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap()
}

/// Rows of `A`, obtained by applying the operator to every basis vector.
pub fn operator_rows(op: &ReductionOperator) -> Dense {
    let d = op.d();
    let cols: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            op.apply_dense(&e).unwrap()
        })
        .collect();
    (0..op.m()).map(|r| cols.iter().map(|c| c[r]).collect()).collect()
}

pub fn columns(ds: &LabeledDataset) -> Dense {
    ds.examples().iter().map(|x| x.to_dense()).collect()
}

pub fn mat_vec(rows: &Dense, x: &[f64]) -> Vec<f64> {
    rows.iter().map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gram matrix `CᵀC` of a list of columns.
pub fn gram(cols: &Dense) -> Dense {
    cols.iter().map(|a| cols.iter().map(|b| dot(a, b)).collect()).collect()
}

/// `(1/λn)(X̂ᵀX̂ − XᵀX) α` by dense matrices.
pub fn dense_delta(ds: &LabeledDataset, a_rows: &Dense, alpha: &[f64], lambda: f64) -> Vec<f64> {
    let x = columns(ds);
    let xh: Dense = x.iter().map(|c| mat_vec(a_rows, c)).collect();
    let g = gram(&x);
    let gh = gram(&xh);
    let n = ds.n() as f64;
    (0..ds.n())
        .map(|i| (0..ds.n()).map(|j| (gh[i][j] - g[i][j]) * alpha[j]).sum::<f64>() / (lambda * n))
        .collect()
}

/// Squared-hinge dual gradient `y + α/2 + (1/λn)XᵀXα`, entrywise, from the
/// dense Gram matrix, reduced to its constraint-aware violation.
pub fn dense_xi(ds: &LabeledDataset, alpha: &[f64], lambda: f64) -> f64 {
    let g = gram(&columns(ds));
    let n = ds.n() as f64;
    (0..ds.n())
        .map(|i| {
            let y = ds.label(i);
            let grad = y + alpha[i] / 2.0 + (0..ds.n()).map(|j| g[i][j] * alpha[j]).sum::<f64>() / (lambda * n);
            if alpha[i] != 0.0 {
                grad.abs()
            } else {
                (y * grad).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Largest singular value of `[[a, b], [c, d]]` in closed form.
pub fn sv2(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let s = a * a + b * b + c * c + d * d;
    let det = a * d - b * c;
    ((s + (s * s - 4.0 * det * det).max(0.0).sqrt()) / 2.0).sqrt()
}

/// `σ₂` by enumerating every pair of two-element supports of the dense
/// matrix `(XᵀX − X̂ᵀX̂)/n` and taking closed-form 2×2 singular values.
pub fn dense_sigma2(ds: &LabeledDataset, op: &ReductionOperator) -> f64 {
    let n = ds.n();
    let x = columns(ds);
    let rows = operator_rows(op);
    let xh: Dense = x.iter().map(|c| mat_vec(&rows, c)).collect();
    let u = |i: usize, j: usize| (dot(&x[i], &x[j]) - dot(&xh[i], &xh[j])) / n as f64;
    let mut sigma: f64 = 0.0;
    for i1 in 0..n {
        for i2 in i1 + 1..n {
            for j1 in 0..n {
                for j2 in j1 + 1..n {
                    sigma = sigma.max(sv2(u(i1, j1), u(i1, j2), u(i2, j1), u(i2, j2)));
                }
            }
        }
    }
    sigma
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Cyclic proximal coordinate descent on the ℓ1-regularized reduced dual in
/// the original `α` variables:
///
/// ```text
/// min_α (1/n) Σ ℓ*_i(α_i) + 1/(2λn²) ‖X̂α‖² + (τ/n) ‖α‖₁,  α_i y_i ∈ dom
/// ```
///
/// Each coordinate problem is a one-dimensional quadratic plus `|·|`,
/// minimized by soft-thresholding and then projected onto the domain.
pub fn prox_dual(cols: &Dense, labels: &[f64], lambda: f64, tau: f64, loss: Loss, sweeps: usize) -> Vec<f64> {
    let n = cols.len();
    let nf = n as f64;
    let m = cols[0].len();
    let curvature = match loss {
        Loss::Hinge => 0.0,
        Loss::SquaredHinge => 0.25,
    };
    let mut alpha = vec![0.0; n];
    let mut v = vec![0.0; m];
    for _ in 0..sweeps {
        let mut moved: f64 = 0.0;
        for i in 0..n {
            let y = labels[i];
            let q = dot(&cols[i], &cols[i]);
            let a_old = alpha[i];
            let rest: f64 = dot(&cols[i], &v) - a_old * q;
            let quad = 2.0 * curvature / nf + q / (lambda * nf * nf);
            let lin = y / nf + rest / (lambda * nf * nf);
            let mut t = -soft_threshold(lin, tau / nf) / quad;
            let (lo, hi) = match (loss, y > 0.0) {
                (Loss::Hinge, true) => (-1.0, 0.0),
                (Loss::Hinge, false) => (0.0, 1.0),
                (Loss::SquaredHinge, true) => (f64::NEG_INFINITY, 0.0),
                (Loss::SquaredHinge, false) => (0.0, f64::INFINITY),
            };
            t = t.clamp(lo, hi);
            if t != a_old {
                for (vk, ck) in v.iter_mut().zip(&cols[i]) {
                    *vk += (t - a_old) * ck;
                }
                moved = moved.max((t - a_old).abs());
                alpha[i] = t;
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
    alpha
}

/// A dense Gaussian instance with ±1 labels; `n` columns of dimension `d`.
pub fn gaussian_instance(n: usize, d: usize, seed: u64) -> LabeledDataset {
    let mut rng = CounterStream::new(seed, Purpose::Probes, 99);
    let examples: Vec<SparseVector> = (0..n)
        .map(|_| SparseVector::from_dense(&(0..d).map(|_| rng.gaussian() / (d as f64).sqrt()).collect::<Vec<_>>()))
        .collect();
    let labels = (0..n).map(|_| rng.sign()).collect();
    LabeledDataset::new(examples, labels, d).unwrap()
}
