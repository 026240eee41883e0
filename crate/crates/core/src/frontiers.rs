//! Analytic `(sigma, q)` curves.
//!
//! All risky-asset curves come from one engine: maximize `c'w` subject to
//! `1'w = 1` and `w'Vw <= sigma^2`. For `c` not proportional to the ones
//! vector the optimum sits on the ellipsoid boundary and
//!
//! ```text
//!     w(sigma) = w_mvp + sqrt(sigma^2 - sigma_mvp^2) * u_c,
//!     u_c = V^-1 (c - (1'V^-1 c / a) 1) / kappa_c,
//!     kappa_c^2 = c'V^-1 c - (1'V^-1 c)^2 / a
//! ```
//!
//! which is the KKT solution with multipliers `beta = kappa_c / sqrt(sigma^2 - sigma_mvp^2)`
//! and `lambda = beta / a - 1'V^-1 c / a`. With `c = 2 eta` this is the
//! efficient DR frontier, with `c = rbar` the mean-variance frontier and
//! with `c = sqrt(eta)` the fixed-risk diversification-ratio portfolio.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::edm::EdmEmbedding;
use crate::error::{Error, Result};
use crate::format::fmt_num;
use crate::linalg::{is_proportional_to_ones, ones};
use crate::portfolios::{tangent_weights, EtaWoSign, MeanVariance, Moments, PROPORTIONAL_TOL};
use crate::universe::AssetUniverse;

/// Inputs this far below `sigma_mvp` are snapped onto it.
pub const SIGMA_SNAP: f64 = 1e-12;

/// Shape of the DR curve of mean-variance efficient portfolios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EfShape {
    /// `eta'w_o >= 0`: strongly concave with its peak at the Q-portfolio.
    StronglyConcave,
    /// `eta'w_o < 0`: strictly decreasing, convex then concave.
    StrictlyDecreasing,
    /// `rho = 0`: `eta` is proportional to the ones vector.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierParams {
    pub sigma2_mvp: f64,
    pub q_mvp: f64,
    pub rho: f64,
    pub sigma2_mdrp: f64,
    pub q_mdrp: f64,
    pub eta_wo: Option<f64>,
    pub eta_wo_sign: Option<EtaWoSign>,
    /// Inflection point as printed in the source formula (only when `eta'w_o < 0`).
    pub tau_o: Option<f64>,
    /// Inflection point solving `q_ef''(sigma) = 0` (only when `eta'w_o < 0`).
    pub tau_inflection: Option<f64>,
    pub ef_shape: Option<EfShape>,
}

impl FrontierParams {
    pub fn sigma_mvp(&self) -> f64 {
        self.sigma2_mvp.sqrt()
    }

    pub fn sigma_mdrp(&self) -> f64 {
        self.sigma2_mdrp.sqrt()
    }

    /// `sigma^2 - sigma_mvp^2`, snapping inputs just below `sigma_mvp`.
    pub fn excess_variance(&self, sigma: f64) -> Result<f64> {
        excess_variance(self.sigma2_mvp, sigma)
    }
}

fn excess_variance(sigma2_mvp: f64, sigma: f64) -> Result<f64> {
    let sigma_mvp = sigma2_mvp.sqrt();
    if !(sigma >= sigma_mvp - SIGMA_SNAP) {
        return Err(Error::RiskBelowMvp { sigma, sigma_mvp });
    }
    Ok((sigma * sigma - sigma2_mvp).max(0.0))
}

/// Verbatim inflection formula `sigma_mvp sqrt(1 + |k|^(4/3) / sigma_mvp^(2/3))`.
fn tau_o_formula(sigma2_mvp: f64, eta_wo: f64) -> f64 {
    let sigma_mvp = sigma2_mvp.sqrt();
    sigma_mvp * (1.0 + eta_wo.abs().powf(4.0 / 3.0) / sigma_mvp.powf(2.0 / 3.0)).sqrt()
}

/// Root of `q_ef''`: `sigma^2 = sigma_mvp^2 + (|k| sigma_mvp^2 / 2)^(2/3)`.
fn tau_second_derivative(sigma2_mvp: f64, eta_wo: f64) -> f64 {
    (sigma2_mvp + (0.5 * eta_wo.abs() * sigma2_mvp).powf(2.0 / 3.0)).sqrt()
}

pub fn frontier_params(u: &AssetUniverse) -> Result<FrontierParams> {
    let m = Moments::new(u)?;
    params_from(u, &m)
}

fn params_from(u: &AssetUniverse, m: &Moments) -> Result<FrontierParams> {
    let q_mvp = m.q_mvp();
    let rho = m.rho;
    let mv = match MeanVariance::new(u, m) {
        Ok(mv) => Some(mv),
        Err(Error::MissingReturns) | Err(Error::DegenerateReturns) => None,
        Err(e) => return Err(e),
    };
    let eta_wo = mv.as_ref().map(|mv| mv.eta_wo);
    let eta_wo_sign = eta_wo.map(|k| EtaWoSign::classify(k, rho));
    let (tau_o, tau_inflection) = match (eta_wo, eta_wo_sign) {
        (Some(k), Some(EtaWoSign::Negative)) => (
            Some(tau_o_formula(m.sigma2_mvp, k)),
            Some(tau_second_derivative(m.sigma2_mvp, k)),
        ),
        _ => (None, None),
    };
    let ef_shape = if m.eta_degenerate {
        Some(EfShape::Degenerate)
    } else {
        eta_wo_sign.map(|s| match s {
            EtaWoSign::Negative => EfShape::StrictlyDecreasing,
            _ => EfShape::StronglyConcave,
        })
    };
    Ok(FrontierParams {
        sigma2_mvp: m.sigma2_mvp,
        q_mvp,
        rho,
        sigma2_mdrp: m.sigma2_mvp + 0.25 * rho * rho,
        q_mdrp: q_mvp + 0.125 * rho * rho,
        eta_wo,
        eta_wo_sign,
        tau_o,
        tau_inflection,
        ef_shape,
    })
}

/// Boundary path of `max c'w` over budget-hyperplane ∩ variance ellipsoid.
#[derive(Debug, Clone)]
pub struct LinearEllipsoidPath {
    w_mvp: DVector<f64>,
    sigma2_mvp: f64,
    a: f64,
    ones_inv_c: f64,
    /// Unit-variance self-financing direction, zero when degenerate.
    direction: DVector<f64>,
    kappa: f64,
    degenerate: bool,
}

/// One solution of the linear-over-ellipsoid problem with its multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct KktSolution {
    pub weights: DVector<f64>,
    /// Multiplier of the variance constraint; `None` at `sigma = sigma_mvp`
    /// (unbounded) and in the degenerate case.
    pub beta: Option<f64>,
    /// Multiplier of the budget constraint (scaled as in `-2c - 2 lambda 1 + 2 beta V w = 0`).
    pub lambda: Option<f64>,
    /// `c` was proportional to the ones vector; the MVP is returned.
    pub degenerate: bool,
}

impl LinearEllipsoidPath {
    pub fn new(u: &AssetUniverse, c: &DVector<f64>) -> Result<Self> {
        let m = Moments::new(u)?;
        Self::with_moments(u, &m, c)
    }

    pub(crate) fn with_moments(u: &AssetUniverse, m: &Moments, c: &DVector<f64>) -> Result<Self> {
        if c.len() != u.n() {
            return Err(Error::DimensionMismatch {
                what: "objective",
                expected: u.n(),
                found: c.len(),
            });
        }
        let ones_inv_c = m.inv_ones.dot(c);
        let degenerate = is_proportional_to_ones(c, PROPORTIONAL_TOL);
        let (direction, kappa) = if degenerate {
            (DVector::zeros(u.n()), 0.0)
        } else {
            let c_perp = c - ones(u.n()) * (ones_inv_c / m.a);
            let y = u.solve(&c_perp)?;
            let kappa_sq = c_perp.dot(&y);
            if kappa_sq <= 0.0 {
                (DVector::zeros(u.n()), 0.0)
            } else {
                let kappa = kappa_sq.sqrt();
                (y / kappa, kappa)
            }
        };
        Ok(Self {
            w_mvp: m.w_mvp.clone(),
            sigma2_mvp: m.sigma2_mvp,
            a: m.a,
            ones_inv_c,
            degenerate: degenerate || kappa == 0.0,
            direction,
            kappa,
        })
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// `sqrt(c'V^-1 c - (1'V^-1 c)^2 / a)`; the slope of `c'w` in `sqrt(sigma^2 - sigma_mvp^2)`.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Self-financing unit-variance direction of the path.
    pub fn direction(&self) -> &DVector<f64> {
        &self.direction
    }

    pub fn solve(&self, sigma: f64) -> Result<KktSolution> {
        let excess = excess_variance(self.sigma2_mvp, sigma)?;
        if self.degenerate {
            return Ok(KktSolution {
                weights: self.w_mvp.clone(),
                beta: None,
                lambda: None,
                degenerate: true,
            });
        }
        if excess == 0.0 {
            return Ok(KktSolution {
                weights: self.w_mvp.clone(),
                beta: None,
                lambda: None,
                degenerate: false,
            });
        }
        let root = excess.sqrt();
        let beta = self.kappa / root;
        let lambda = beta / self.a - self.ones_inv_c / self.a;
        Ok(KktSolution {
            weights: &self.w_mvp + &self.direction * root,
            beta: Some(beta),
            lambda: Some(lambda),
            degenerate: false,
        })
    }
}

/// `argmax c'w s.t. 1'w = 1, w'Vw <= sigma^2`.
pub fn max_linear_over_ellipsoid(
    u: &AssetUniverse,
    c: &DVector<f64>,
    sigma: f64,
) -> Result<KktSolution> {
    LinearEllipsoidPath::new(u, c)?.solve(sigma)
}

/// Efficient DR curve
/// `q_dr(sigma) = -1/2 (sqrt(sigma^2 - sigma_mvp^2) - rho/2)^2 + rho^2/8 + q_mvp`.
pub fn q_dr_at(fp: &FrontierParams, sigma: f64) -> Result<f64> {
    let root = fp.excess_variance(sigma)?.sqrt();
    let rho = fp.rho;
    Ok(-0.5 * (root - 0.5 * rho).powi(2) + 0.125 * rho * rho + fp.q_mvp)
}

/// A point of the efficient DR frontier expressed as an MVP/MDRP mix.
#[derive(Debug, Clone, PartialEq)]
pub struct EfficientDrPoint {
    pub weights: DVector<f64>,
    pub alpha: f64,
    /// `alpha > 1`: more risk than the MDRP for less DR.
    pub beyond_mdrp: bool,
}

/// Two-fund separation: `w = alpha w_mdrp + (1 - alpha) w_mvp`,
/// `alpha = (2 / rho) sqrt(sigma^2 - sigma_mvp^2)`.
pub fn efficient_dr_portfolio(
    u: &AssetUniverse,
    fp: &FrontierParams,
    sigma: f64,
) -> Result<EfficientDrPoint> {
    let excess = fp.excess_variance(sigma)?;
    if fp.rho <= 0.0 {
        return Err(Error::DegenerateRho);
    }
    let m = Moments::new(u)?;
    Ok(mix_point(&m, fp.rho, excess))
}

fn mix_point(m: &Moments, rho: f64, excess: f64) -> EfficientDrPoint {
    let alpha = 2.0 / rho * excess.sqrt();
    let w_mdrp = m.w_mdrp();
    let weights = &w_mdrp * alpha + &m.w_mvp * (1.0 - alpha);
    EfficientDrPoint {
        weights,
        alpha,
        beyond_mdrp: alpha > 1.0,
    }
}

/// DR of the mean-variance efficient portfolio at risk `sigma` together with
/// its weights `w_mvp + sqrt(sigma^2 - sigma_mvp^2) w_o`.
pub fn q_ef_at(u: &AssetUniverse, fp: &FrontierParams, sigma: f64) -> Result<(f64, DVector<f64>)> {
    let excess = fp.excess_variance(sigma)?;
    let m = Moments::new(u)?;
    let mv = MeanVariance::new(u, &m)?;
    Ok(ef_point(fp, &m, &mv, excess))
}

fn ef_point(fp: &FrontierParams, m: &Moments, mv: &MeanVariance, excess: f64) -> (f64, DVector<f64>) {
    let root = excess.sqrt();
    let k = mv.eta_wo;
    let q = -0.5 * (root - 0.5 * k).powi(2) + 0.125 * k * k + fp.q_mvp;
    (q, &m.w_mvp + &mv.w_o * root)
}

/// `q_dr(sigma) - q_ef(sigma) = 1/2 (rho - eta'w_o) sqrt(sigma^2 - sigma_mvp^2)`.
pub fn dr_gap_at(fp: &FrontierParams, sigma: f64) -> Result<f64> {
    let k = fp.eta_wo.ok_or(Error::MissingReturns)?;
    let root = fp.excess_variance(sigma)?.sqrt();
    Ok(0.5 * (fp.rho - k) * root)
}

/// Capital-market-line quantities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CmlParams {
    pub eta_wt: f64,
    pub sigma_t: f64,
    /// Risk of the largest-DR CML portfolio, present when `eta'w_T > 0`.
    pub peak_sigma: Option<f64>,
    /// Exposure to the tangency portfolio at the peak.
    pub peak_beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmlPoint {
    pub q: f64,
    pub beta: f64,
    /// Risky holdings `beta w_T`.
    pub risky_weights: DVector<f64>,
    /// Risk-free holding `1 - beta`.
    pub w0: f64,
}

#[derive(Debug, Clone)]
struct Cml {
    w_t: DVector<f64>,
    params: CmlParams,
}

impl Cml {
    fn new(u: &AssetUniverse) -> Result<Self> {
        let w_t = tangent_weights(u)?;
        let eta_wt = u.eta().dot(&w_t);
        let sigma_t = u.variance_of(&w_t).max(0.0).sqrt();
        let (peak_sigma, peak_beta) = if eta_wt > 0.0 {
            (
                Some(eta_wt / (2.0 * sigma_t)),
                Some(eta_wt / (2.0 * sigma_t * sigma_t)),
            )
        } else {
            (None, None)
        };
        Ok(Self {
            w_t,
            params: CmlParams {
                eta_wt,
                sigma_t,
                peak_sigma,
                peak_beta,
            },
        })
    }

    fn at(&self, sigma: f64) -> Result<CmlPoint> {
        if !(sigma >= 0.0) {
            return Err(Error::RiskBelowMvp {
                sigma,
                sigma_mvp: 0.0,
            });
        }
        let p = &self.params;
        let q = -0.5 * sigma * sigma + p.eta_wt / (2.0 * p.sigma_t) * sigma;
        let beta = sigma / p.sigma_t;
        Ok(CmlPoint {
            q,
            beta,
            risky_weights: &self.w_t * beta,
            w0: 1.0 - beta,
        })
    }
}

pub fn cml_params(u: &AssetUniverse) -> Result<CmlParams> {
    Ok(Cml::new(u)?.params)
}

/// DR along the capital market line,
/// `q_cml(sigma) = -1/2 sigma^2 + (eta'w_T / (2 sigma_T)) sigma`.
pub fn q_cml_at(u: &AssetUniverse, sigma: f64) -> Result<CmlPoint> {
    Cml::new(u)?.at(sigma)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TildePoint {
    pub q: f64,
    /// Risky holdings, unconstrained in sum.
    pub risky_weights: DVector<f64>,
    /// Risk-free holding `1 - 1'w`.
    pub w0: f64,
}

#[derive(Debug, Clone)]
struct Tilde {
    /// `V^-1 eta / sqrt(eta'V^-1 eta)`
    direction: DVector<f64>,
    root: f64,
}

impl Tilde {
    fn new(u: &AssetUniverse) -> Result<Self> {
        let inv_eta = u.solve(u.eta())?;
        let root = u.eta().dot(&inv_eta).max(0.0).sqrt();
        let direction = if root > 0.0 {
            inv_eta / root
        } else {
            DVector::zeros(u.n())
        };
        Ok(Self { direction, root })
    }

    fn at(&self, sigma: f64) -> Result<TildePoint> {
        if !(sigma >= 0.0) {
            return Err(Error::RiskBelowMvp {
                sigma,
                sigma_mvp: 0.0,
            });
        }
        let risky_weights = &self.direction * sigma;
        let w0 = 1.0 - risky_weights.sum();
        Ok(TildePoint {
            q: -0.5 * sigma * sigma + 0.5 * sigma * self.root,
            risky_weights,
            w0,
        })
    }
}

/// Efficient DR curve once a risk-free asset is appended:
/// `q~_dr(sigma) = -1/2 sigma^2 + (sigma / 2) sqrt(eta'V^-1 eta)`.
pub fn q_dr_tilde_at(u: &AssetUniverse, sigma: f64) -> Result<TildePoint> {
    Tilde::new(u)?.at(sigma)
}

/// `sigma_eta = 1 / sqrt(eta'V^-1 eta)`, the minimum risk with `eta'w = 1`.
pub fn sigma_eta(u: &AssetUniverse) -> Result<f64> {
    let inv_eta = u.solve(u.eta())?;
    Ok(1.0 / u.eta().dot(&inv_eta).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CurveKind {
    EfficientDR,
    MVEfficientDR,
    CML,
    EfficientDRWithRiskFree,
    MVMeanReturn,
    /// Fixed-risk maximum diversification ratio portfolios.
    MdpAtSigma,
}

impl CurveKind {
    pub const ALL: [CurveKind; 6] = [
        CurveKind::EfficientDR,
        CurveKind::MVEfficientDR,
        CurveKind::CML,
        CurveKind::EfficientDRWithRiskFree,
        CurveKind::MVMeanReturn,
        CurveKind::MdpAtSigma,
    ];

    pub fn slug(&self) -> &'static str {
        match self {
            CurveKind::EfficientDR => "efficient_dr",
            CurveKind::MVEfficientDR => "mv_efficient_dr",
            CurveKind::CML => "cml",
            CurveKind::EfficientDRWithRiskFree => "efficient_dr_riskfree",
            CurveKind::MVMeanReturn => "mv_mean_return",
            CurveKind::MdpAtSigma => "mdp_at_sigma",
        }
    }

    pub fn from_slug(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.slug() == s)
    }

    pub fn needs_returns(&self) -> bool {
        matches!(
            self,
            CurveKind::MVEfficientDR
                | CurveKind::MVMeanReturn
                | CurveKind::CML
                | CurveKind::EfficientDRWithRiskFree
        )
    }

    pub fn needs_risk_free(&self) -> bool {
        matches!(self, CurveKind::CML | CurveKind::EfficientDRWithRiskFree)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum RowStatus {
    Ok,
    BeyondMdrp,
    /// The curve's objective is proportional to the ones vector.
    Degenerate,
    Error(String),
}

impl RowStatus {
    pub fn label(&self) -> String {
        match self {
            RowStatus::Ok => "ok".into(),
            RowStatus::BeyondMdrp => "beyond_mdrp".into(),
            RowStatus::Degenerate => "degenerate".into(),
            RowStatus::Error(k) => format!("error:{k}"),
        }
    }

    pub fn is_error(&self) -> bool {
        matches!(self, RowStatus::Error(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub sigma: f64,
    pub q: Option<f64>,
    pub expected_return: Option<f64>,
    pub centrality: Option<f64>,
    pub alpha: Option<f64>,
    pub weights: Option<Vec<f64>>,
    pub status: RowStatus,
}

impl CurveRow {
    fn failed(sigma: f64, e: &Error) -> Self {
        Self {
            sigma,
            q: None,
            expected_return: None,
            centrality: None,
            alpha: None,
            weights: None,
            status: RowStatus::Error(e.kind().to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierCurve {
    pub kind: CurveKind,
    pub rows: Vec<CurveRow>,
}

pub const CSV_HEADER: &str = "kind,sigma,q,ret,centrality,alpha,status";

impl FrontierCurve {
    pub fn all_failed(&self) -> bool {
        self.rows.iter().all(|r| r.status.is_error())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        let opt = |x: Option<f64>| x.map(fmt_num).unwrap_or_default();
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                self.kind.slug(),
                fmt_num(r.sigma),
                opt(r.q),
                opt(r.expected_return),
                opt(r.centrality),
                opt(r.alpha),
                r.status.label()
            ));
        }
        out
    }
}

/// Default risk grid: `points` values with `sigma^2 - sigma_mvp^2` spaced
/// geometrically from `1e-6 sigma_mvp^2` to `(3 sigma_mdrp)^2`.
pub fn default_grid(fp: &FrontierParams, points: usize) -> Vec<f64> {
    let lo = 1e-6 * fp.sigma2_mvp;
    let hi = 9.0 * fp.sigma2_mdrp;
    geometric(lo, hi, points)
        .into_iter()
        .map(|e| (fp.sigma2_mvp + e).sqrt())
        .collect()
}

fn geometric(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (llo + (lhi - llo) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Evenly spaced (or log-spaced) sigma values in `[min, max]`.
pub fn sigma_grid(min: f64, max: f64, points: usize, log_spacing: bool) -> Vec<f64> {
    if points <= 1 {
        return vec![min];
    }
    if log_spacing && min > 0.0 {
        return geometric(min, max, points);
    }
    (0..points)
        .map(|i| min + (max - min) * i as f64 / (points - 1) as f64)
        .collect()
}

/// Precomputed ingredients for repeated curve evaluation.
struct SweepContext<'a> {
    u: &'a AssetUniverse,
    emb: Option<&'a EdmEmbedding>,
    moments: Moments,
    fp: FrontierParams,
    mv: Result<MeanVariance>,
    mdp: Result<LinearEllipsoidPath>,
    cml: Result<Cml>,
    tilde: Result<Tilde>,
}

impl<'a> SweepContext<'a> {
    fn new(u: &'a AssetUniverse, emb: Option<&'a EdmEmbedding>, kind: CurveKind) -> Result<Self> {
        let moments = Moments::new(u)?;
        let fp = params_from(u, &moments)?;
        let mv = MeanVariance::new(u, &moments);
        let mdp = if kind == CurveKind::MdpAtSigma {
            let sqrt_eta = u.eta().map(|x| x.max(0.0).sqrt());
            LinearEllipsoidPath::with_moments(u, &moments, &sqrt_eta)
        } else {
            Err(Error::DegenerateRho)
        };
        let cml = if kind == CurveKind::CML { Cml::new(u) } else { Err(Error::MissingRiskFree) };
        let tilde = if kind == CurveKind::EfficientDRWithRiskFree {
            Tilde::new(u)
        } else {
            Err(Error::MissingRiskFree)
        };
        Ok(Self {
            u,
            emb,
            moments,
            fp,
            mv,
            mdp,
            cml,
            tilde,
        })
    }

    fn budget_row(&self, sigma: f64, q: f64, w: DVector<f64>, alpha: Option<f64>, status: RowStatus) -> CurveRow {
        CurveRow {
            sigma,
            q: Some(q),
            expected_return: self.u.expected_return_of(&w),
            centrality: self.emb.map(|e| e.centrality_sq_unchecked(&w).sqrt()),
            alpha,
            weights: Some(w.iter().copied().collect()),
            status,
        }
    }

    fn eval(&self, kind: CurveKind, sigma: f64) -> Result<CurveRow> {
        match kind {
            CurveKind::EfficientDR => {
                let excess = self.fp.excess_variance(sigma)?;
                let q = q_dr_at(&self.fp, sigma)?;
                if self.fp.rho <= 0.0 {
                    return Ok(CurveRow {
                        sigma,
                        q: Some(q),
                        expected_return: None,
                        centrality: None,
                        alpha: None,
                        weights: None,
                        status: RowStatus::Degenerate,
                    });
                }
                let p = mix_point(&self.moments, self.fp.rho, excess);
                let status = if p.beyond_mdrp { RowStatus::BeyondMdrp } else { RowStatus::Ok };
                Ok(self.budget_row(sigma, q, p.weights, Some(p.alpha), status))
            }
            CurveKind::MVEfficientDR | CurveKind::MVMeanReturn => {
                let mv = self.mv.as_ref().map_err(Clone::clone)?;
                let excess = self.fp.excess_variance(sigma)?;
                let (q, w) = ef_point(&self.fp, &self.moments, mv, excess);
                Ok(self.budget_row(sigma, q, w, None, RowStatus::Ok))
            }
            CurveKind::MdpAtSigma => {
                let path = self.mdp.as_ref().map_err(Clone::clone)?;
                let sol = path.solve(sigma)?;
                let q = self.u.dr_unchecked(&sol.weights);
                let status = if sol.degenerate { RowStatus::Degenerate } else { RowStatus::Ok };
                Ok(self.budget_row(sigma, q, sol.weights, None, status))
            }
            CurveKind::CML => {
                let cml = self.cml.as_ref().map_err(Clone::clone)?;
                let p = cml.at(sigma)?;
                let r0 = self.u.risk_free_rate().unwrap_or(0.0);
                Ok(CurveRow {
                    sigma,
                    q: Some(p.q),
                    expected_return: self.u.expected_return_of(&p.risky_weights).map(|r| r + p.w0 * r0),
                    centrality: None,
                    alpha: Some(p.beta),
                    weights: Some(p.risky_weights.iter().copied().collect()),
                    status: RowStatus::Ok,
                })
            }
            CurveKind::EfficientDRWithRiskFree => {
                let tilde = self.tilde.as_ref().map_err(Clone::clone)?;
                let p = tilde.at(sigma)?;
                let r0 = self.u.risk_free_rate().unwrap_or(0.0);
                Ok(CurveRow {
                    sigma,
                    q: Some(p.q),
                    expected_return: self.u.expected_return_of(&p.risky_weights).map(|r| r + p.w0 * r0),
                    centrality: None,
                    alpha: None,
                    weights: Some(p.risky_weights.iter().copied().collect()),
                    status: RowStatus::Ok,
                })
            }
        }
    }
}

/// Evaluates one curve over an ascending sigma grid.
///
/// Per-point failures become row statuses; only an unsorted grid or an
/// embedding from another universe aborts the sweep.
pub fn sweep(
    u: &AssetUniverse,
    kind: CurveKind,
    sigma_grid: &[f64],
    emb: Option<&EdmEmbedding>,
) -> Result<FrontierCurve> {
    if let Some(i) = sigma_grid.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::Parse {
            row: i + 1,
            column: 0,
            message: "sigma grid must be strictly increasing".into(),
        });
    }
    if let Some(e) = emb {
        if e.universe_fingerprint() != u.fingerprint() {
            return Err(Error::EmbeddingMismatch);
        }
    }
    let rows = match SweepContext::new(u, emb, kind) {
        Ok(ctx) => sigma_grid
            .par_iter()
            .map(|&s| ctx.eval(kind, s).unwrap_or_else(|e| CurveRow::failed(s, &e)))
            .collect(),
        Err(e) => sigma_grid.iter().map(|&s| CurveRow::failed(s, &e)).collect(),
    };
    Ok(FrontierCurve { kind, rows })
}

/// First sigma where second differences of `q` change sign from convex to
/// concave, interpolated between grid points.
pub fn empirical_inflection(curve: &FrontierCurve) -> Option<f64> {
    let pts: Vec<(f64, f64)> = curve
        .rows
        .iter()
        .filter_map(|r| r.q.map(|q| (r.sigma, q)))
        .collect();
    let mut prev: Option<(f64, f64)> = None;
    for w in pts.windows(3) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        let (x2, y2) = w[2];
        let s0 = (y1 - y0) / (x1 - x0);
        let s1 = (y2 - y1) / (x2 - x1);
        let curv = 2.0 * (s1 - s0) / (x2 - x0);
        if let Some((px, pc)) = prev {
            if pc > 0.0 && curv <= 0.0 {
                return Some(px + (x1 - px) * pc / (pc - curv));
            }
        }
        prev = Some((x1, curv));
    }
    None
}
