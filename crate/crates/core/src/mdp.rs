//! Maximum diversification ratio portfolio and its distance to the DR objective.
//!
//! The ratio `sqrt(eta)'w / sqrt(w'Vw)` and the DR objective `eta'w` differ
//! per portfolio by `w' D_eta w`, where
//! `D_eta = 1/2 (eta 1' + 1 eta') - sqrt(eta) sqrt(eta)'` is itself a Euclidean
//! distance matrix. Over long-only portfolios that difference is bounded by
//! `2 d_max`, `d_max = max_{w in simplex} 1/2 w' D_eta w`, a standard quadratic
//! program. We bracket `d_max` from below by multi-start replicator dynamics
//! and from above by `1/2 max_ij D_eta[i][j]`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::edm::assert_edm;
use crate::error::{Error, Result};
use crate::frontiers::{KktSolution, LinearEllipsoidPath};
use crate::linalg::ones;
use crate::universe::{portfolio_stats, AssetUniverse, Portfolio};

/// Iteration cap per replicator start.
pub const REPLICATOR_MAX_ITER: usize = 10_000;
/// Stop when no weight moves more than this.
pub const REPLICATOR_STEP_TOL: f64 = 1e-12;
/// Relative agreement required between the closed-form MDP and the sigma sweep.
pub const MDP_AUDIT_TOL: f64 = 1e-6;
/// Relative half-width of the risk band used to sample `S_sigma^+`.
pub const SANDWICH_BAND: f64 = 0.01;

/// `D_eta[i][j] = 1/2 (sqrt(eta_i) - sqrt(eta_j))^2`.
pub fn d_eta_from_variances(eta: &DVector<f64>) -> Result<DMatrix<f64>> {
    if let Some((index, &value)) = eta.iter().enumerate().find(|(_, v)| **v < 0.0 || v.is_nan()) {
        return Err(Error::NegativeVariance { index, value });
    }
    let root = eta.map(f64::sqrt);
    let n = eta.len();
    Ok(DMatrix::from_fn(n, n, |i, j| 0.5 * (root[i] - root[j]).powi(2)))
}

pub fn build_d_eta(u: &AssetUniverse) -> Result<DMatrix<f64>> {
    d_eta_from_variances(u.eta())
}

/// `sqrt(eta)'w / sqrt(w'Vw)`.
pub fn diversification_ratio(u: &AssetUniverse, w: &DVector<f64>) -> f64 {
    let sqrt_eta = u.eta().map(|x| x.max(0.0).sqrt());
    sqrt_eta.dot(w) / u.variance_of(w).sqrt()
}

/// Outcome of checking the closed-form MDP against a sweep of fixed-risk optima.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MdpAudit {
    pub closed_form_ratio: f64,
    pub sweep_ratio: f64,
    pub sweep_sigma: f64,
    pub relative_gap: f64,
}

/// Global MDP `w ∝ V^-1 sqrt(eta)`, audited against `mdp_at_sigma`.
pub fn mdp_global(u: &AssetUniverse) -> Result<Portfolio> {
    Ok(mdp_global_audited(u)?.0)
}

pub fn mdp_global_audited(u: &AssetUniverse) -> Result<(Portfolio, MdpAudit)> {
    if let Some(index) = u.eta().iter().position(|&v| v <= 0.0) {
        return Err(Error::ZeroVariance { index });
    }
    let sqrt_eta = u.eta().map(f64::sqrt);
    let y = u.solve(&sqrt_eta)?;
    let total = ones(u.n()).dot(&y);
    if !(total > 0.0) {
        return Err(Error::NonPositiveRatio { value: total });
    }
    let w = y / total;
    let closed_form_ratio = diversification_ratio(u, &w);
    let (sweep_ratio, sweep_sigma) = sweep_ratio_max(u, &sqrt_eta)?;
    let relative_gap = (closed_form_ratio - sweep_ratio).abs() / closed_form_ratio.abs();
    if relative_gap > MDP_AUDIT_TOL {
        return Err(Error::MdpAuditFailed {
            closed_form: closed_form_ratio,
            sweep: sweep_ratio,
        });
    }
    let audit = MdpAudit {
        closed_form_ratio,
        sweep_ratio,
        sweep_sigma,
        relative_gap,
    };
    Ok((portfolio_stats(u, &w, None)?, audit))
}

/// Maximizes the ratio along the fixed-risk optimum path by a log-spaced
/// scan in `t = sqrt(sigma^2 - sigma_mvp^2)` followed by golden-section refinement.
fn sweep_ratio_max(u: &AssetUniverse, sqrt_eta: &DVector<f64>) -> Result<(f64, f64)> {
    let path = LinearEllipsoidPath::new(u, sqrt_eta)?;
    let sigma2_mvp = 1.0 / ones(u.n()).dot(&u.solve(&ones(u.n()))?);
    let ratio_at = |t: f64| -> Result<f64> {
        let sigma = (sigma2_mvp + t * t).sqrt();
        let w = path.solve(sigma)?.weights;
        Ok(diversification_ratio(u, &w))
    };
    let scale = sigma2_mvp.sqrt();
    let mut ts = vec![0.0];
    let points = 600;
    for i in 0..points {
        let e = -8.0 + 12.0 * i as f64 / (points - 1) as f64;
        ts.push(scale * 10f64.powf(e));
    }
    let mut vals = Vec::with_capacity(ts.len());
    for &t in &ts {
        vals.push(ratio_at(t)?);
    }
    let best = (0..ts.len())
        .max_by(|&i, &j| vals[i].total_cmp(&vals[j]))
        .unwrap_or(0);
    let lo = if best == 0 { 0.0 } else { ts[best - 1] };
    let hi = if best + 1 < ts.len() { ts[best + 1] } else { ts[best] };
    let (mut a, mut b) = (lo, hi);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (ratio_at(c)?, ratio_at(d)?);
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * b.abs().max(scale) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = ratio_at(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = ratio_at(d)?;
        }
    }
    let t_star = 0.5 * (a + b);
    let mut best_val = ratio_at(t_star)?;
    let mut best_t = t_star;
    if vals[best] > best_val {
        best_val = vals[best];
        best_t = ts[best];
    }
    Ok((best_val, (sigma2_mvp + best_t * best_t).sqrt()))
}

/// Fixed-risk MDP: `argmax sqrt(eta)'w` on the budget hyperplane inside
/// `w'Vw <= sigma^2`. Flags the degenerate case `sqrt(eta) ∝ 1`.
pub fn mdp_at_sigma(u: &AssetUniverse, sigma: f64) -> Result<KktSolution> {
    let sqrt_eta = u.eta().map(|x| x.max(0.0).sqrt());
    LinearEllipsoidPath::new(u, &sqrt_eta)?.solve(sigma)
}

/// Best value found for `max 1/2 w'Dw` over the simplex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StqpBound {
    pub value: f64,
    pub weights: Vec<f64>,
    pub starts_used: usize,
    pub converged: bool,
}

fn replicator(d: &DMatrix<f64>, mut x: DVector<f64>) -> (f64, DVector<f64>, bool) {
    for _ in 0..REPLICATOR_MAX_ITER {
        let dx = d * &x;
        let val = x.dot(&dx);
        if !(val > 1e-300) {
            return (0.5 * val.max(0.0), x, true);
        }
        let next = x.component_mul(&dx) / val;
        let step = (&next - &x).amax();
        x = next;
        if step <= REPLICATOR_STEP_TOL {
            let val = x.dot(&(d * &x));
            return (0.5 * val, x, true);
        }
    }
    let val = x.dot(&(d * &x));
    (0.5 * val, x, false)
}

fn random_simplex_point(n: usize, seed: u64, stream: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    loop {
        let draw: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut rng)).collect();
        let total: f64 = draw.iter().sum();
        if total > 0.0 {
            return DVector::from_vec(draw) / total;
        }
    }
}

/// Multi-start replicator ascent for `max 1/2 w'Dw`, `w` in the simplex,
/// for a symmetric nonnegative `D`.
///
/// Starts from every vertex, every pair midpoint and `random_starts`
/// Dirichlet(1) draws; random start `k` uses ChaCha stream `k` of `seed`, so
/// adding starts never lowers the result.
pub fn stqp_lower_bound(d: &DMatrix<f64>, random_starts: usize, seed: u64) -> StqpBound {
    let n = d.nrows();
    let mut starts: Vec<DVector<f64>> = Vec::new();
    for i in 0..n {
        let mut x = DVector::zeros(n);
        x[i] = 1.0;
        starts.push(x);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let mut x = DVector::zeros(n);
            x[i] = 0.5;
            x[j] = 0.5;
            starts.push(x);
        }
    }
    for k in 0..random_starts {
        starts.push(random_simplex_point(n, seed, k as u64));
    }
    let results: Vec<(f64, DVector<f64>, bool)> =
        starts.into_par_iter().map(|x| replicator(d, x)).collect();
    let converged = results.iter().all(|r| r.2);
    let starts_used = results.len();
    // first index among the maxima, independent of scheduling
    let (value, weights) = results
        .into_iter()
        .fold((f64::NEG_INFINITY, DVector::zeros(n)), |acc, (v, w, _)| {
            if v > acc.0 {
                (v, w)
            } else {
                acc
            }
        });
    StqpBound {
        value,
        weights: weights.iter().copied().collect(),
        starts_used,
        converged,
    }
}

/// `1/2 max_ij D[i][j]`, an upper bound of `max 1/2 w'Dw` on the simplex.
pub fn stqp_upper_bound(d: &DMatrix<f64>) -> f64 {
    0.5 * d.iter().copied().fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DmaxBounds {
    pub d_max_lower: f64,
    pub d_max_upper: f64,
    pub lower_weights: Vec<f64>,
    pub starts_used: usize,
    pub converged: bool,
}

pub fn d_max_bounds(u: &AssetUniverse, starts: usize, seed: u64) -> Result<DmaxBounds> {
    let d_eta = build_d_eta(u)?;
    let lower = stqp_lower_bound(&d_eta, starts, seed);
    Ok(DmaxBounds {
        d_max_lower: lower.value,
        d_max_upper: stqp_upper_bound(&d_eta),
        lower_weights: lower.weights,
        starts_used: lower.starts_used,
        converged: lower.converged,
    })
}

/// Empirical check of the long-only sandwich at one risk level,
/// with both objectives halved:
/// `1/2 max (sqrt(eta)'w)^2 <= 1/2 max eta'w <= 1/2 max (sqrt(eta)'w)^2 + d_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub sigma: f64,
    pub samples: usize,
    pub accepted: usize,
    /// `1/2 max eta'w` over accepted samples.
    pub half_max_eta: Option<f64>,
    /// `1/2 max (sqrt(eta)'w)^2` over accepted samples.
    pub half_max_sqrt_eta_sq: Option<f64>,
    pub gap: Option<f64>,
    pub d_max_upper: f64,
    /// `None` when no sample landed in the risk band.
    pub holds: Option<bool>,
}

pub fn sandwich_check(
    u: &AssetUniverse,
    sigma: f64,
    samples: usize,
    seed: u64,
) -> Result<SandwichReport> {
    let d_eta = build_d_eta(u)?;
    let d_max_upper = stqp_upper_bound(&d_eta);
    let sigma_mvp = {
        let inv = u.solve(&ones(u.n()))?;
        (1.0 / ones(u.n()).dot(&inv)).sqrt()
    };
    if sigma < sigma_mvp - crate::frontiers::SIGMA_SNAP {
        return Err(Error::RiskBelowMvp { sigma, sigma_mvp });
    }
    let eta = u.eta();
    let sqrt_eta = eta.map(|x| x.max(0.0).sqrt());
    let n = u.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accepted = 0usize;
    let mut max_eta = f64::NEG_INFINITY;
    let mut max_sq = f64::NEG_INFINITY;
    let mut w = DVector::zeros(n);
    for _ in 0..samples {
        let mut total = 0.0;
        for i in 0..n {
            let g: f64 = rng.sample(Exp1);
            w[i] = g;
            total += g;
        }
        w /= total;
        let s = u.variance_of(&w).max(0.0).sqrt();
        if (s - sigma).abs() > SANDWICH_BAND * sigma {
            continue;
        }
        accepted += 1;
        max_eta = max_eta.max(eta.dot(&w));
        max_sq = max_sq.max(sqrt_eta.dot(&w).powi(2));
    }
    if accepted == 0 {
        return Ok(SandwichReport {
            sigma,
            samples,
            accepted,
            half_max_eta: None,
            half_max_sqrt_eta_sq: None,
            gap: None,
            d_max_upper,
            holds: None,
        });
    }
    let half_eta = 0.5 * max_eta;
    let half_sq = 0.5 * max_sq;
    let gap = half_eta - half_sq;
    let slack = 1e-14 * half_eta.abs().max(1.0);
    Ok(SandwichReport {
        sigma,
        samples,
        accepted,
        half_max_eta: Some(half_eta),
        half_max_sqrt_eta_sq: Some(half_sq),
        gap: Some(gap),
        d_max_upper,
        holds: Some(gap >= -slack && gap <= d_max_upper + slack),
    })
}

/// Everything the `mdp` command reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MdpAnalysis {
    pub w_mdp: Vec<f64>,
    pub ratio: f64,
    pub audit: MdpAudit,
    pub d_eta_is_edm: bool,
    pub d_max_lower: f64,
    pub d_max_upper: f64,
    pub starts_used: usize,
    pub converged: bool,
    pub sandwich: Vec<SandwichReport>,
}

pub fn mdp_analysis(
    u: &AssetUniverse,
    starts: usize,
    seed: u64,
    sandwich_sigmas: &[f64],
    samples: usize,
) -> Result<MdpAnalysis> {
    let (p, audit) = mdp_global_audited(u)?;
    let d_eta = build_d_eta(u)?;
    let cert = assert_edm(&d_eta)?;
    let bounds = d_max_bounds(u, starts, seed)?;
    let sandwich = sandwich_sigmas
        .iter()
        .enumerate()
        .map(|(k, &s)| sandwich_check(u, s, samples, seed.wrapping_add(k as u64 + 1)))
        .collect::<Result<Vec<_>>>()?;
    Ok(MdpAnalysis {
        ratio: audit.closed_form_ratio,
        w_mdp: p.weights,
        audit,
        d_eta_is_edm: cert.is_edm,
        d_max_lower: bounds.d_max_lower,
        d_max_upper: bounds.d_max_upper,
        starts_used: bounds.starts_used,
        converged: bounds.converged,
        sandwich,
    })
}
