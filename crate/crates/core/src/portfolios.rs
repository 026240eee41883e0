//! Closed-form special portfolios: MVP, MDRP, the self-financing direction
//! `w_o` of the mean-variance frontier, the Q-portfolio and the tangency
//! portfolio.
//!
//! Every `V^-1 x` goes through the universe's cached Cholesky factor.

use nalgebra::DVector;
use serde::Serialize;

use crate::edm::{build_distance_matrix, EdmEmbedding};
use crate::error::{Error, Result};
use crate::linalg::{is_proportional_to_ones, ones};
use crate::universe::{portfolio_stats, AssetUniverse, Portfolio};

/// Threshold for "proportional to the ones vector" tests.
pub const PROPORTIONAL_TOL: f64 = 1e-12;

/// Shared `V^-1` quantities of a nonsingular universe.
#[derive(Debug, Clone)]
pub(crate) struct Moments {
    /// `V^-1 1`
    pub inv_ones: DVector<f64>,
    /// `1' V^-1 1`
    pub a: f64,
    pub sigma2_mvp: f64,
    pub w_mvp: DVector<f64>,
    /// `1' V^-1 eta`
    pub ones_inv_eta: f64,
    /// `w_mdrp - w_mvp`
    pub d: DVector<f64>,
    pub rho: f64,
    pub eta_degenerate: bool,
}

impl Moments {
    pub fn new(u: &AssetUniverse) -> Result<Self> {
        let n = u.n();
        let one = ones(n);
        let inv_ones = u.solve(&one)?;
        let a = one.dot(&inv_ones);
        let w_mvp = &inv_ones / a;
        let eta = u.eta();
        let inv_eta = u.solve(eta)?;
        let ones_inv_eta = one.dot(&inv_eta);
        let eta_degenerate = is_proportional_to_ones(eta, PROPORTIONAL_TOL);

        // V^-1 (eta - (1'V^-1 eta / a) 1) = 2 d
        let shift = ones_inv_eta / a;
        let two_d = &inv_eta - &inv_ones * shift;
        let (d, rho) = if eta_degenerate {
            (DVector::zeros(n), 0.0)
        } else {
            let eta_perp = eta - &one * shift;
            let rho_sq = eta_perp.dot(&two_d).max(0.0);
            (two_d * 0.5, rho_sq.sqrt())
        };
        Ok(Self {
            inv_ones,
            a,
            sigma2_mvp: 1.0 / a,
            w_mvp,
            ones_inv_eta,
            d,
            rho,
            eta_degenerate,
        })
    }

    /// `q_mvp = 1/2 (1'V^-1 eta - 1) sigma2_mvp`
    pub fn q_mvp(&self) -> f64 {
        0.5 * (self.ones_inv_eta - 1.0) * self.sigma2_mvp
    }

    pub fn w_mdrp(&self) -> DVector<f64> {
        &self.w_mvp + &self.d
    }
}

/// Mean-variance ingredients: `a`, `b`, and the normalized self-financing
/// portfolio `w_o` with `1'w_o = 0`, `w_o'V w_o = 1`.
#[derive(Debug, Clone)]
pub(crate) struct MeanVariance {
    pub b: f64,
    pub w_o: DVector<f64>,
    pub eta_wo: f64,
}

impl MeanVariance {
    pub fn new(u: &AssetUniverse, m: &Moments) -> Result<Self> {
        let rbar = u.expected_returns().ok_or(Error::MissingReturns)?;
        if is_proportional_to_ones(rbar, PROPORTIONAL_TOL) {
            return Err(Error::DegenerateReturns);
        }
        let b = m.inv_ones.dot(rbar);
        let excess = rbar - ones(u.n()) * (b / m.a);
        let dir = u.solve(&excess)?;
        let norm_sq = excess.dot(&dir);
        if norm_sq <= 0.0 {
            return Err(Error::DegenerateReturns);
        }
        let w_o = dir / norm_sq.sqrt();
        let eta_wo = u.eta().dot(&w_o);
        Ok(Self { b, w_o, eta_wo })
    }
}

/// Sign of `eta' w_o`, which decides the shape of the mean-variance DR curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EtaWoSign {
    Positive,
    /// `|eta' w_o| <= 1e-12 rho`
    Zero,
    Negative,
}

impl EtaWoSign {
    pub fn classify(eta_wo: f64, rho: f64) -> Self {
        if eta_wo.abs() <= PROPORTIONAL_TOL * rho {
            EtaWoSign::Zero
        } else if eta_wo > 0.0 {
            EtaWoSign::Positive
        } else {
            EtaWoSign::Negative
        }
    }
}

/// Minimum variance portfolio `V^-1 1 / 1'V^-1 1`.
pub fn min_variance_portfolio(u: &AssetUniverse) -> Result<Portfolio> {
    let m = Moments::new(u)?;
    portfolio_stats(u, &m.w_mvp, None)
}

/// `q_mvp` from its closed form; equals `q(w_mvp)`.
pub fn q_mvp_closed_form(u: &AssetUniverse) -> Result<f64> {
    Ok(Moments::new(u)?.q_mvp())
}

/// The two closed forms of the MDRP: `(D^-1 1 / 1'D^-1 1, V-form)`.
pub fn mdrp_both_forms(u: &AssetUniverse) -> Result<(DVector<f64>, DVector<f64>)> {
    let m = Moments::new(u)?;
    let d = build_distance_matrix(u)?;
    let one = ones(u.n());
    let y = d.lu().solve(&one).ok_or(Error::SingularD { value: 0.0 })?;
    let total = one.dot(&y);
    if total == 0.0 || !total.is_finite() {
        return Err(Error::SingularD { value: total });
    }
    let from_d = y / total;
    // (1 - 1'V^-1 eta / 2) w_mvp + 1/2 V^-1 eta
    let inv_eta = u.solve(u.eta())?;
    let from_v = &m.w_mvp * (1.0 - 0.5 * m.ones_inv_eta) + inv_eta * 0.5;
    Ok((from_d, from_v))
}

/// Maximum diversification return portfolio via the `V^-1` closed form.
pub fn max_dr_portfolio(u: &AssetUniverse) -> Result<Portfolio> {
    let (from_d, from_v) = mdrp_both_forms(u)?;
    let gap = (&from_d - &from_v).amax();
    if gap > 1e-8 * from_v.amax().max(1.0) {
        log::warn!("MDRP closed forms disagree by {gap:.3e}");
    }
    portfolio_stats(u, &from_v, None)
}

/// Normalized self-financing portfolio generating the mean-variance frontier.
pub fn self_financing_wo(u: &AssetUniverse) -> Result<DVector<f64>> {
    let m = Moments::new(u)?;
    Ok(MeanVariance::new(u, &m)?.w_o)
}

/// `(a, b) = (1'V^-1 1, 1'V^-1 rbar)`.
pub fn frontier_constants(u: &AssetUniverse) -> Result<(f64, f64)> {
    let m = Moments::new(u)?;
    let mv = MeanVariance::new(u, &m)?;
    Ok((m.a, mv.b))
}

/// Q-portfolio `w_mvp + (eta'w_o / 2) w_o`: the mean-variance efficient
/// portfolio with the largest DR when `eta'w_o >= 0`.
///
/// When `eta'w_o` is zero the coefficient vanishes and this is the MVP.
pub fn q_portfolio(u: &AssetUniverse) -> Result<Portfolio> {
    let m = Moments::new(u)?;
    let mv = MeanVariance::new(u, &m)?;
    let coef = match EtaWoSign::classify(mv.eta_wo, m.rho) {
        EtaWoSign::Zero => 0.0,
        _ => 0.5 * mv.eta_wo,
    };
    let w = &m.w_mvp + &mv.w_o * coef;
    portfolio_stats(u, &w, None)
}

/// Tangency portfolio `V^-1 (rbar - r0 1) / (b - r0 a)`.
pub fn tangent_portfolio(u: &AssetUniverse) -> Result<Portfolio> {
    let w = tangent_weights(u)?;
    portfolio_stats(u, &w, None)
}

pub(crate) fn tangent_weights(u: &AssetUniverse) -> Result<DVector<f64>> {
    let rbar = u.expected_returns().ok_or(Error::MissingReturns)?;
    let r0 = u.risk_free_rate().ok_or(Error::MissingRiskFree)?;
    let m = Moments::new(u)?;
    let b = m.inv_ones.dot(rbar);
    let margin = b - r0 * m.a;
    let scale = b.abs().max((r0 * m.a).abs()).max(f64::MIN_POSITIVE);
    if margin <= 1e-12 * scale {
        return Err(Error::TangencyInfeasible { margin });
    }
    let excess = rbar - ones(u.n()) * r0;
    Ok(u.solve(&excess)? / margin)
}

/// All special portfolios of a universe, for reporting.
#[derive(Debug, Clone, Serialize)]
pub struct SpecialPortfolios {
    pub mvp: Portfolio,
    pub mdrp: Portfolio,
    /// `w_mdrp - w_mvp`
    pub d: Vec<f64>,
    pub rho: f64,
    pub a: f64,
    pub b: Option<f64>,
    pub w_o: Option<Vec<f64>>,
    pub eta_wo: Option<f64>,
    pub eta_wo_sign: Option<EtaWoSign>,
    pub q_portfolio: Option<Portfolio>,
    pub tangent: Option<Portfolio>,
    /// Why optional members are absent.
    pub notes: Vec<String>,
}

pub fn special_portfolios(
    u: &AssetUniverse,
    emb: Option<&EdmEmbedding>,
) -> Result<SpecialPortfolios> {
    let m = Moments::new(u)?;
    let mvp = portfolio_stats(u, &m.w_mvp, emb)?;
    let mdrp_w = max_dr_portfolio(u)?.weights_vector();
    let mdrp = portfolio_stats(u, &mdrp_w, emb)?;
    let mut notes = Vec::new();

    let (b, w_o, eta_wo, eta_wo_sign, q_portfolio) = match MeanVariance::new(u, &m) {
        Ok(mv) => {
            let q = q_portfolio(u)?.weights_vector();
            (
                Some(mv.b),
                Some(mv.w_o.iter().copied().collect()),
                Some(mv.eta_wo),
                Some(EtaWoSign::classify(mv.eta_wo, m.rho)),
                Some(portfolio_stats(u, &q, emb)?),
            )
        }
        Err(e) => {
            notes.push(format!("q_portfolio: {e}"));
            (None, None, None, None, None)
        }
    };
    let tangent = match tangent_weights(u) {
        Ok(w) => Some(portfolio_stats(u, &w, emb)?),
        Err(e) => {
            notes.push(format!("tangent: {e}"));
            None
        }
    };
    Ok(SpecialPortfolios {
        mvp,
        mdrp,
        d: m.d.iter().copied().collect(),
        rho: m.rho,
        a: m.a,
        b,
        w_o,
        eta_wo,
        eta_wo_sign,
        q_portfolio,
        tangent,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::universe::validate_universe;

    fn identity(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect()
    }

    #[test]
    fn identity_mvp_is_uniform() {
        let u = validate_universe(&identity(4), None, None).unwrap();
        let p = min_variance_portfolio(&u).unwrap();
        for w in &p.weights {
            assert!((w - 0.25).abs() < 1e-15);
        }
        assert!((p.variance - 0.25).abs() < 1e-15);
    }

    #[test]
    fn identity_mdrp_equals_mvp() {
        let u = validate_universe(&identity(3), None, None).unwrap();
        let p = max_dr_portfolio(&u).unwrap();
        for w in &p.weights {
            assert!((w - 1.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_covariance_rejected() {
        let u = validate_universe(
            &[vec![0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
            None,
            None,
        )
        .unwrap();
        assert_eq!(min_variance_portfolio(&u).unwrap_err(), Error::SingularCovariance);
        assert_eq!(max_dr_portfolio(&u).unwrap_err(), Error::SingularCovariance);
    }

    #[test]
    fn wo_two_asset_identity() {
        let u = validate_universe(&identity(2), Some(&[0.0, 1.0]), None).unwrap();
        let (a, b) = frontier_constants(&u).unwrap();
        assert!((a - 2.0).abs() < 1e-15);
        assert!((b - 1.0).abs() < 1e-15);
        let w_o = self_financing_wo(&u).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!((w_o[0] + h).abs() < 1e-15);
        assert!((w_o[1] - h).abs() < 1e-15);
    }

    #[test]
    fn wo_requires_returns() {
        let u = validate_universe(&identity(2), None, None).unwrap();
        assert_eq!(self_financing_wo(&u).unwrap_err(), Error::MissingReturns);
        let u = validate_universe(&identity(2), Some(&[0.3, 0.3]), None).unwrap();
        assert_eq!(self_financing_wo(&u).unwrap_err(), Error::DegenerateReturns);
    }

    #[test]
    fn tangent_two_asset_identity() {
        let u = validate_universe(&identity(2), Some(&[0.1, 0.2]), Some(0.05)).unwrap();
        let t = tangent_portfolio(&u).unwrap();
        assert!((t.weights[0] - 0.25).abs() < 1e-14);
        assert!((t.weights[1] - 0.75).abs() < 1e-14);
    }

    #[test]
    fn tangent_equals_mvp_when_v1_proportional_to_ones() {
        // V 1 = 3 * 1 for this covariance; take rbar = V 1 and r0 = 0
        let v = vec![
            vec![11.0 / 9.0, 8.0 / 9.0, 8.0 / 9.0],
            vec![8.0 / 9.0, 23.0 / 9.0, -4.0 / 9.0],
            vec![8.0 / 9.0, -4.0 / 9.0, 23.0 / 9.0],
        ];
        let u = validate_universe(&v, Some(&[3.0, 3.0, 3.0]), Some(0.0)).unwrap();
        let t = tangent_portfolio(&u).unwrap();
        for w in &t.weights {
            assert!((w - 1.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn tangent_infeasible_on_boundary() {
        // b - r0 a = 0 when r0 equals the MVP return (0.15 here)
        let u = validate_universe(&identity(2), Some(&[0.1, 0.2]), Some(0.15)).unwrap();
        assert_eq!(tangent_portfolio(&u).unwrap_err().kind(), "TangencyInfeasible");
        let u = validate_universe(&identity(2), Some(&[0.1, 0.2]), Some(0.5)).unwrap();
        assert_eq!(tangent_portfolio(&u).unwrap_err().kind(), "TangencyInfeasible");
    }

    #[test]
    fn q_portfolio_zero_coefficient_is_mvp() {
        // eta = 1, so eta'w_o = 1'w_o = 0
        let u = validate_universe(&identity(3), Some(&[0.1, 0.2, 0.4]), None).unwrap();
        let q = q_portfolio(&u).unwrap();
        let mvp = min_variance_portfolio(&u).unwrap();
        for (a, b) in q.weights.iter().zip(&mvp.weights) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn sign_tristate() {
        assert_eq!(EtaWoSign::classify(1e-20, 1.0), EtaWoSign::Zero);
        assert_eq!(EtaWoSign::classify(0.3, 1.0), EtaWoSign::Positive);
        assert_eq!(EtaWoSign::classify(-0.3, 1.0), EtaWoSign::Negative);
    }

    #[test]
    fn special_portfolios_notes_missing_parts() {
        let u = validate_universe(&identity(3), None, None).unwrap();
        let sp = special_portfolios(&u, None).unwrap();
        assert!(sp.q_portfolio.is_none());
        assert!(sp.tangent.is_none());
        assert_eq!(sp.notes.len(), 2);
        assert_eq!(sp.rho, 0.0);
    }
}
