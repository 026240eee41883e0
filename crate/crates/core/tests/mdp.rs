mod common;

use common::*;
use drfrontier::mdp::{d_eta_from_variances, stqp_upper_bound};
use drfrontier::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn ratio(v: &DMatrix<f64>, w: &DVector<f64>) -> f64 {
    let s = v.diagonal().map(f64::sqrt);
    s.dot(w) / w.dot(&(v * w)).sqrt()
}

#[test]
fn example_d_eta_is_edm() {
    let d = build_d_eta(&three_asset()).unwrap();
    assert!(assert_edm(&d).unwrap().is_edm);
}

#[test]
fn diagonal_mdp_matches_simplex_grid() {
    let v = DMatrix::from_diagonal(&DVector::from_vec(vec![0.04, 0.09, 0.25]));
    let u = AssetUniverse::new(v.clone(), None, None).unwrap();
    let w = mdp_global(&u).unwrap().weights_vector();
    let inv_vol = DVector::from_vec(vec![5.0, 1.0 / 0.3, 2.0]);
    assert!((&w - &inv_vol / inv_vol.sum()).amax() < 1e-12);
    let best = ratio(&v, &w);
    let steps = 400;
    let mut grid_best = 0.0f64;
    for i in 0..=steps {
        for j in 0..=(steps - i) {
            let x = DVector::from_vec(vec![
                i as f64 / steps as f64,
                j as f64 / steps as f64,
                (steps - i - j) as f64 / steps as f64,
            ]);
            grid_best = grid_best.max(ratio(&v, &x));
        }
    }
    assert!(grid_best <= best + 1e-12);
    assert!(best - grid_best < 1e-4);
}

#[test]
fn mdp_beats_random_portfolios() {
    let mut rng = rng(41);
    let u = random_universe(4, &mut rng);
    let w = mdp_global(&u).unwrap().weights_vector();
    let best = ratio(u.covariance(), &w);
    for _ in 0..10_000 {
        let x = budget_weights(4, &mut rng);
        assert!(ratio(u.covariance(), &x) <= best + 1e-12);
    }
}

#[test]
fn mdp_at_sigma_examples() {
    let u = three_asset();
    let mvp = min_variance_portfolio(&u).unwrap().weights_vector();
    let sol = mdp_at_sigma(&u, 1.0).unwrap();
    assert!((sol.weights - &mvp).amax() < 1e-12);
    assert_eq!(mdp_at_sigma(&u, 0.5).unwrap_err().kind(), "RiskBelowMVP");

    // sigma^2 = 2: sampled feasible points never beat the optimum
    let sigma = 2f64.sqrt();
    let w = mdp_at_sigma(&u, sigma).unwrap().weights;
    let s = u.eta().map(f64::sqrt);
    let best = s.dot(&w);
    let v = u.covariance();
    let mut rng = rng(42);
    for _ in 0..10_000 {
        let x = DVector::from_fn(3, |_, _| normal(&mut rng));
        let x = x.add_scalar(-x.mean());
        let t = rng.random::<f64>() / x.dot(&(v * &x)).sqrt();
        assert!(s.dot(&(&mvp + x * t)) <= best + 1e-12);
    }
    // dense circle search agrees
    let w_circle = circle_argmax(v, sigma, |w| s.dot(w));
    assert!((s.dot(&w_circle) - best).abs() < 1e-8);
}

#[test]
fn equilateral_stqp() {
    let d = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0]);
    let b = stqp_lower_bound(&d, 8, 1);
    assert!((b.value - 1.0 / 3.0).abs() < 1e-9);
    assert!(b.value > 0.25);
    let grid = simplex_grid_max3(&d, 999);
    assert!((grid - 1.0 / 3.0).abs() < 1e-6);
    assert!(b.converged);
}

#[test]
fn equal_variances_give_zero_bounds() {
    let v = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.2, 0.3, 1.0, 0.1, 0.2, 0.1, 1.0]);
    let u = AssetUniverse::new(v, None, None).unwrap();
    let b = d_max_bounds(&u, 8, 3).unwrap();
    assert_eq!(b.d_max_lower, 0.0);
    assert_eq!(b.d_max_upper, 0.0);
    let r = sandwich_check(&u, 1.1 * min_variance_portfolio(&u).unwrap().sigma(), 20_000, 4).unwrap();
    if let Some(gap) = r.gap {
        assert!(gap.abs() < 1e-15);
    }
}

#[test]
fn sandwich_on_example() {
    let r = sandwich_check(&three_asset(), 1.2f64.sqrt(), 100_000, 5).unwrap();
    assert!(r.accepted > 0);
    assert_eq!(r.holds, Some(true));
}

#[test]
fn empty_band_is_reported() {
    // long-only portfolios cannot reach this risk
    let r = sandwich_check(&three_asset(), 5.0, 1000, 6).unwrap();
    assert_eq!(r.accepted, 0);
    assert_eq!(r.holds, None);
}

#[test]
fn analysis_is_deterministic() {
    let mut rng = rng(43);
    let u = random_universe(8, &mut rng);
    let s = min_variance_portfolio(&u).unwrap().sigma() * 1.2;
    let a = mdp_analysis(&u, 32, 9, &[s], 5000).unwrap();
    let b = mdp_analysis(&u, 32, 9, &[s], 5000).unwrap();
    assert_eq!(a, b);
    assert!(a.d_max_lower <= a.d_max_upper + 1e-10);
    assert!((a.ratio - a.audit.sweep_ratio).abs() <= 1e-6 * a.ratio);
}

#[test]
fn non_positive_ratio_rejected() {
    // a low-vol asset highly correlated with two others: 1'V^-1 sqrt(eta) < 0
    let c = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.8, 0.5, 1.0, 0.8, 0.8, 0.8, 1.0]);
    let s = [1.0, 1.0, 0.1];
    let v = DMatrix::from_fn(3, 3, |i, j| c[(i, j)] * s[i] * s[j]);
    let u = AssetUniverse::new(v, None, None).unwrap();
    assert_eq!(mdp_global(&u).unwrap_err().kind(), "NonPositiveRatio");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn d_eta_bounds(seed in 0u64..100_000, n in 2usize..9) {
        let mut rng = rng(seed);
        let eta = DVector::from_fn(n, |_, _| rng.random_range(0.0..0.5));
        let d = d_eta_from_variances(&eta).unwrap();
        prop_assert!(assert_edm(&d).unwrap().is_edm);
        let lo4 = stqp_lower_bound(&d, 4, seed).value;
        let lo12 = stqp_lower_bound(&d, 12, seed).value;
        prop_assert!(lo12 >= lo4);
        prop_assert!(lo12 <= stqp_upper_bound(&d) + 1e-10);
        prop_assert!((lo12 - stqp_exact(&d)).abs() < 1e-6);
    }

    #[test]
    fn mdp_curve_tracks_dr_curve(seed in 0u64..100_000, n in 3usize..8) {
        let mut rng = rng(seed);
        let u = random_universe(n, &mut rng);
        let fp = frontier_params(&u).unwrap();
        let upper = stqp_upper_bound(&build_d_eta(&u).unwrap());
        for i in 0..20 {
            let s = fp.sigma_mvp() + (fp.sigma_mdrp() - fp.sigma_mvp()) * i as f64 / 19.0;
            let w = mdp_at_sigma(&u, s).unwrap().weights;
            let q = diversification_return(&u, &w).unwrap();
            let qd = q_dr_at(&fp, s).unwrap();
            prop_assert!(qd >= q - 1e-12);
            prop_assert!(qd - q <= 2.0 * upper + 1e-12, "gap {} bound {}", qd - q, 2.0 * upper);
        }
    }
}
