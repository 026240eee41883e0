#![allow(dead_code)]

use drfrontier::{validate_universe, AssetUniverse};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn three_asset() -> AssetUniverse {
    validate_universe(&three_asset_rows(), None, None).unwrap()
}

pub fn three_asset_rows() -> Vec<Vec<f64>> {
    vec![
        vec![11.0 / 9.0, 8.0 / 9.0, 8.0 / 9.0],
        vec![8.0 / 9.0, 23.0 / 9.0, -4.0 / 9.0],
        vec![8.0 / 9.0, -4.0 / 9.0, 23.0 / 9.0],
    ]
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Random covariance with vols in [0.1, 0.5] and a well-conditioned correlation.
pub fn random_cov(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let k = n + 2;
    let g = DMatrix::from_fn(n, k, |_, _| normal(rng));
    let mut c = &g * g.transpose() / k as f64 + DMatrix::identity(n, n) * 0.3;
    let d: Vec<f64> = (0..n).map(|i| c[(i, i)].sqrt()).collect();
    for i in 0..n {
        for j in 0..n {
            c[(i, j)] /= d[i] * d[j];
        }
    }
    let vols: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..0.5)).collect();
    let v = DMatrix::from_fn(n, n, |i, j| c[(i, j)] * vols[i] * vols[j]);
    (&v + v.transpose()) * 0.5
}

pub fn random_returns(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| 0.06 + 0.08 * normal(rng))
}

pub fn random_universe(n: usize, rng: &mut ChaCha8Rng) -> AssetUniverse {
    AssetUniverse::new(random_cov(n, rng), Some(random_returns(n, rng)), None).unwrap()
}

/// Random universe with returns and a risk-free rate below the MVP return.
pub fn random_universe_rf(n: usize, rng: &mut ChaCha8Rng) -> AssetUniverse {
    loop {
        let v = random_cov(n, rng);
        let r = random_returns(n, rng);
        let inv = v.clone().cholesky().unwrap().inverse();
        let ones = DVector::from_element(n, 1.0);
        let a = ones.dot(&(&inv * &ones));
        let b = ones.dot(&(&inv * &r));
        let r_mvp = b / a;
        let r0 = r_mvp - 0.02 - 0.03 * rng.random::<f64>();
        if r0 > -0.05 {
            return AssetUniverse::new(v, Some(r), Some(r0)).unwrap();
        }
    }
}

/// Budget-feasible weights with spread around 1/n.
pub fn budget_weights(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let mut w = DVector::from_fn(n, |_, _| normal(rng));
    let shift = (1.0 - w.sum()) / n as f64;
    w.add_scalar_mut(shift);
    w
}

pub fn ones(n: usize) -> DVector<f64> {
    DVector::from_element(n, 1.0)
}

pub fn dr(v: &DMatrix<f64>, w: &DVector<f64>) -> f64 {
    let eta = v.diagonal();
    0.5 * (eta.dot(w) - w.dot(&(v * w)))
}

/// Elementwise `1/2 (eta_i + eta_j) - V_ij`.
pub fn dist(v: &DMatrix<f64>) -> DMatrix<f64> {
    let n = v.nrows();
    DMatrix::from_fn(n, n, |i, j| 0.5 * (v[(i, i)] + v[(j, j)]) - v[(i, j)])
}

fn project(g: &DVector<f64>) -> DVector<f64> {
    let m = g.mean();
    g.add_scalar(-m)
}

/// Minimizes w'Vw on the budget hyperplane by projected gradient descent.
pub fn pg_min_variance(v: &DMatrix<f64>) -> DVector<f64> {
    let n = v.nrows();
    let lmax = v.clone().symmetric_eigen().eigenvalues.max();
    let step = 1.0 / (2.0 * lmax);
    let mut w = ones(n) / n as f64;
    for _ in 0..200_000 {
        let g = project(&(v * &w * 2.0));
        let next = &w - g * step;
        let moved = (&next - &w).amax();
        w = next;
        if moved < 1e-15 {
            break;
        }
    }
    w
}

/// Multi-start projected gradient ascent of q on the budget hyperplane.
pub fn ascent_max_dr(v: &DMatrix<f64>, starts: usize, rng: &mut ChaCha8Rng) -> (f64, DVector<f64>) {
    let n = v.nrows();
    let eta = v.diagonal();
    let lmax = v.clone().symmetric_eigen().eigenvalues.max();
    let step = 1.0 / (2.0 * lmax);
    let mut best = (f64::NEG_INFINITY, ones(n) / n as f64);
    for _ in 0..starts {
        let mut w = budget_weights(n, rng);
        for _ in 0..200_000 {
            let g = project(&((&eta - v * &w * 2.0) * 0.5));
            let next = &w + g * (2.0 * step);
            let moved = (&next - &w).amax();
            w = next;
            if moved < 1e-15 {
                break;
            }
        }
        let val = dr(v, &w);
        if val > best.0 {
            best = (val, w);
        }
    }
    best
}

/// Orthonormal basis of {x : 1'x = 0} for n = 3.
fn zero_sum_basis() -> (DVector<f64>, DVector<f64>) {
    let u1 = DVector::from_vec(vec![1.0, -1.0, 0.0]) / 2f64.sqrt();
    let u2 = DVector::from_vec(vec![1.0, 1.0, -2.0]) / 6f64.sqrt();
    (u1, u2)
}

/// Points of {1'w = 1, w'Vw = sigma^2} for n = 3, `m` angles.
pub fn circle_points(v: &DMatrix<f64>, sigma: f64, m: usize) -> Vec<DVector<f64>> {
    let inv = v.clone().cholesky().unwrap().inverse();
    let o = ones(3);
    let a = o.dot(&(&inv * &o));
    let w_mvp = &inv * &o / a;
    let excess = (sigma * sigma - 1.0 / a).max(0.0);
    let (u1, u2) = zero_sum_basis();
    (0..m)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
            let x = &u1 * th.cos() + &u2 * th.sin();
            let t = (excess / x.dot(&(v * &x))).sqrt();
            &w_mvp + x * t
        })
        .collect()
}

/// Dense circle search for `max f` followed by local angle refinement.
pub fn circle_argmax<F: Fn(&DVector<f64>) -> f64>(
    v: &DMatrix<f64>,
    sigma: f64,
    f: F,
) -> DVector<f64> {
    let m = 20_000;
    let pts = circle_points(v, sigma, m);
    let mut best = 0;
    for k in 1..m {
        if f(&pts[k]) > f(&pts[best]) {
            best = k;
        }
    }
    // refine on a finer grid around the best angle
    let inv = v.clone().cholesky().unwrap().inverse();
    let o = ones(3);
    let a = o.dot(&(&inv * &o));
    let w_mvp = &inv * &o / a;
    let excess = (sigma * sigma - 1.0 / a).max(0.0);
    let (u1, u2) = zero_sum_basis();
    let at = |th: f64| {
        let x = &u1 * th.cos() + &u2 * th.sin();
        let t = (excess / x.dot(&(v * &x))).sqrt();
        &w_mvp + x * t
    };
    let h = 2.0 * std::f64::consts::PI / m as f64;
    let th0 = best as f64 * h;
    let mut out = at(th0);
    for k in 0..=4000 {
        let th = th0 - h + 2.0 * h * k as f64 / 4000.0;
        let w = at(th);
        if f(&w) > f(&out) {
            out = w;
        }
    }
    out
}

/// Exact max of 1/2 x'Dx over the simplex by enumerating supports and
/// solving the face stationarity system on each.
pub fn stqp_exact(d: &DMatrix<f64>) -> f64 {
    let n = d.nrows();
    let mut best = 0.0f64;
    for mask in 1u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let k = idx.len();
        let mut m = DMatrix::zeros(k + 1, k + 1);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m[(a, b)] = d[(i, j)];
            }
            m[(a, k)] = 1.0;
            m[(k, a)] = 1.0;
        }
        let mut rhs = DVector::zeros(k + 1);
        rhs[k] = 1.0;
        let Some(sol) = m.clone().lu().solve(&rhs) else { continue };
        if (&m * &sol - &rhs).amax() > 1e-9 {
            continue;
        }
        let x: Vec<f64> = sol.iter().take(k).copied().collect();
        if x.iter().any(|&v| v < -1e-12) {
            continue;
        }
        let mut full = DVector::zeros(n);
        for (a, &i) in idx.iter().enumerate() {
            full[i] = x[a].max(0.0);
        }
        full /= full.sum();
        best = best.max(0.5 * full.dot(&(d * &full)));
    }
    best
}

/// Max of 1/2 x'Dx over a regular grid of the 2-simplex.
pub fn simplex_grid_max3(d: &DMatrix<f64>, steps: usize) -> f64 {
    let mut best = 0.0f64;
    for i in 0..=steps {
        for j in 0..=(steps - i) {
            let x = DVector::from_vec(vec![
                i as f64 / steps as f64,
                j as f64 / steps as f64,
                (steps - i - j) as f64 / steps as f64,
            ]);
            best = best.max(0.5 * x.dot(&(d * &x)));
        }
    }
    best
}
