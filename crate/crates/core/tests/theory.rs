mod support;

use dsrr::dualsolve::{solve_original, Loss, SolverConfig};
use dsrr::sketch::{make_operator, OperatorKind, ReductionOperator};
use dsrr::theory::*;
use support::*;

#[test]
fn delta_matches_dense_gram_difference() {
    let ds = gaussian_instance(5, 4, 11);
    let lambda = 0.3;
    let res = solve_original(&ds, &SolverConfig::new(lambda, Loss::SquaredHinge).with_gap_tol(1e-12)).unwrap();
    for kind in [OperatorKind::GaussianProjection, OperatorKind::HashingHD, OperatorKind::SamplingP] {
        let op = make_operator(kind, 4, 3, 5).unwrap();
        let fast = delta_vector(&ds, &op, &res.primal).unwrap();
        let dense = dense_delta(&ds, &operator_rows(&op), &res.alpha, lambda);
        for (a, b) in fast.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-10, "{kind}: {a} vs {b}");
        }
    }
}

#[test]
fn identity_operator_has_zero_delta() {
    let ds = gaussian_instance(8, 6, 2);
    let w = vec![0.3, -1.0, 0.0, 2.0, 0.5, 0.1];
    let delta = delta_vector(&ds, &ReductionOperator::identity(6).unwrap(), &w).unwrap();
    assert!(norm_inf(&delta) < 1e-12);
    assert_eq!(tau_min(&delta, 0.25), 2.0 * norm_inf(&delta) + 0.5);
}

#[test]
fn xi_matches_dense_oracle() {
    let ds = gaussian_instance(12, 6, 7);
    let lambda = 0.1;
    let star = solve_original(&ds, &SolverConfig::new(lambda, Loss::SquaredHinge).with_gap_tol(1e-14)).unwrap();
    for s in [1, 3, 6, 12] {
        let (alpha_s, xi) = near_sparsity_xi(&ds, &star.alpha, s, lambda, Loss::SquaredHinge).unwrap();
        assert!(alpha_s.iter().filter(|a| **a != 0.0).count() <= s);
        assert!((xi - dense_xi(&ds, &alpha_s, lambda)).abs() < 1e-12);
    }
}

#[test]
fn xi_vanishes_without_truncation() {
    let ds = gaussian_instance(10, 5, 3);
    let lambda = 0.2;
    let star = solve_original(&ds, &SolverConfig::new(lambda, Loss::SquaredHinge).with_gap_tol(0.0).with_max_epochs(5_000))
        .unwrap();
    let (_, xi) = near_sparsity_xi(&ds, &star.alpha, ds.n(), lambda, Loss::SquaredHinge).unwrap();
    assert!(xi < 1e-6, "xi = {xi}");
    assert!(near_sparsity_xi(&ds, &star.alpha, 3, lambda, Loss::Hinge).is_err());
}

#[test]
fn sigma_pairs_match_dense_enumeration() {
    let (n, d, s) = (10, 8, 2);
    for seed in 0..3 {
        let ds = gaussian_instance(n, d, seed);
        let op = make_operator(OperatorKind::GaussianProjection, d, 4, seed).unwrap();
        let report = restricted_spectrum_bruteforce(&ds, Some(&op), s).unwrap();

        let sigma = dense_sigma2(&ds, &op);
        assert!((report.sigma_s - sigma).abs() < 1e-10, "{} vs {sigma}", report.sigma_s);
        // Diagonal blocks are among the pairs.
        assert!(report.sigma_quadratic <= report.sigma_s + 1e-12);
    }
}

#[test]
fn spectrum_is_monotone_in_level() {
    let ds = gaussian_instance(8, 6, 4);
    let op = make_operator(OperatorKind::RademacherProjection, 6, 3, 9).unwrap();
    let reports: Vec<_> = (1..=4).map(|s| restricted_spectrum_bruteforce(&ds, Some(&op), s).unwrap()).collect();
    for w in reports.windows(2) {
        assert!(w[1].sigma_s >= w[0].sigma_s - 1e-12);
        assert!(w[1].rho_plus >= w[0].rho_plus - 1e-12);
        assert!(w[1].rho_minus <= w[0].rho_minus + 1e-12);
    }
    let min_col = columns(&ds).iter().map(|c| dot(c, c)).fold(f64::INFINITY, f64::min);
    assert!(reports[0].rho_plus >= min_col / ds.n() as f64 - 1e-12);
    // At level one the restricted eigenvalues are the diagonal of XᵀX/n.
    let diag: Vec<f64> = columns(&ds).iter().map(|c| dot(c, c) / ds.n() as f64).collect();
    let lo = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = diag.iter().copied().fold(0.0, f64::max);
    assert!((reports[0].rho_minus - lo).abs() < 1e-12 && (reports[0].rho_plus - hi).abs() < 1e-12);
}

#[test]
fn enumeration_budget_is_enforced() {
    let ds = gaussian_instance(60, 4, 1);
    assert!(restricted_spectrum_bruteforce(&ds, None, 6).is_err());
    let op = make_operator(OperatorKind::GaussianProjection, 4, 2, 1).unwrap();
    assert!(restricted_spectrum_bruteforce(&ds, Some(&op), 3).is_err());
    assert!(restricted_spectrum_bruteforce(&ds, None, 0).is_err());
}

#[test]
fn top_s_truncation_keeps_largest_magnitudes() {
    let a = [0.1, -3.0, 2.0, -2.0, 0.0];
    assert_eq!(truncate_top_s(&a, 2), vec![0.0, -3.0, 2.0, 0.0, 0.0]);
    assert_eq!(truncate_top_s(&a, 0), vec![0.0; 5]);
    assert_eq!(support_set(&a, 0.05), vec![1, 2, 3]);
}
