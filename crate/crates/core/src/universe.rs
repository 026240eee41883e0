//! Asset universes, portfolios and the diversification-return functional.
//!
//! For a budget-feasible weight vector `w` (weights summing to one) the
//! diversification return is
//!
//! ```text
//!     q(w) = 1/2 (eta' w - w' V w),   eta = diag(V)
//! ```
//!
//! i.e. half the gap between the weighted-average asset variance and the
//! portfolio variance. It depends on how many assets the portfolio is
//! expressed in: merging a sub-portfolio into a single composite asset changes
//! `q` even though the holdings are economically identical.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::edm::EdmEmbedding;
use crate::error::{Error, Result};
use crate::linalg;

/// Relative asymmetry tolerated (and repaired by symmetrizing).
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Eigenvalues down to `-PSD_TOL * lambda_max` are accepted and clamped to 0.
pub const PSD_TOL: f64 = 1e-10;
/// Absolute tolerance on `sum(w) = 1`.
pub const BUDGET_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Definiteness {
    PositiveDefinite,
    /// Positive semidefinite with at least one (numerically) zero eigenvalue.
    Semidefinite,
}

/// A validated covariance matrix with optional expected returns and risk-free rate.
///
/// Immutable once built. Holds a Cholesky factor when the covariance is
/// positive definite so repeated `V^-1 x` solves cost O(n^2).
#[derive(Debug, Clone)]
pub struct AssetUniverse {
    names: Vec<String>,
    cov: DMatrix<f64>,
    eta: DVector<f64>,
    expected_returns: Option<DVector<f64>>,
    risk_free_rate: Option<f64>,
    definiteness: Definiteness,
    eigen_range: (f64, f64),
    chol: Option<Cholesky<f64, Dyn>>,
    fingerprint: u64,
}

/// Validates a raw (possibly ragged) nested matrix plus optional return data.
pub fn validate_universe(
    raw: &[Vec<f64>],
    expected_returns: Option<&[f64]>,
    risk_free_rate: Option<f64>,
) -> Result<AssetUniverse> {
    let n = raw.len();
    if let Some(bad) = raw.iter().find(|row| row.len() != n) {
        return Err(Error::NonSquare {
            rows: n,
            cols: bad.len(),
        });
    }
    let cov = DMatrix::from_fn(n, n, |i, j| raw[i][j]);
    AssetUniverse::new(
        cov,
        expected_returns.map(DVector::from_column_slice),
        risk_free_rate,
    )
}

impl AssetUniverse {
    pub fn new(
        cov: DMatrix<f64>,
        expected_returns: Option<DVector<f64>>,
        risk_free_rate: Option<f64>,
    ) -> Result<Self> {
        let n = cov.nrows();
        let names = (1..=n).map(|i| format!("A{i}")).collect();
        Self::with_names(names, cov, expected_returns, risk_free_rate)
    }

    pub fn with_names(
        names: Vec<String>,
        cov: DMatrix<f64>,
        expected_returns: Option<DVector<f64>>,
        risk_free_rate: Option<f64>,
    ) -> Result<Self> {
        if cov.nrows() != cov.ncols() {
            return Err(Error::NonSquare {
                rows: cov.nrows(),
                cols: cov.ncols(),
            });
        }
        let n = cov.nrows();
        if n < 2 {
            return Err(Error::DimensionMismatch {
                what: "asset count",
                expected: 2,
                found: n,
            });
        }
        if names.len() != n {
            return Err(Error::DimensionMismatch {
                what: "asset names",
                expected: n,
                found: names.len(),
            });
        }
        if let Some(r) = &expected_returns {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "expected returns",
                    expected: n,
                    found: r.len(),
                });
            }
        }
        if cov.iter().any(|x| !x.is_finite()) {
            return Err(Error::NotPsd {
                min_eigenvalue: f64::NAN,
                max_eigenvalue: f64::NAN,
            });
        }

        let asym = linalg::relative_asymmetry(&cov);
        if asym > SYMMETRY_TOL {
            return Err(Error::Asymmetric {
                relative: asym,
                tolerance: SYMMETRY_TOL,
            });
        }
        let mut cov = if asym > 0.0 { linalg::symmetrize(&cov) } else { cov };

        let eig = linalg::sorted_symmetric_eigen(&cov);
        let lambda_max = eig.values[0];
        let mut lambda_min = eig.values[n - 1];
        let tol = PSD_TOL * lambda_max.max(0.0);
        if lambda_min < -tol {
            return Err(Error::NotPsd {
                min_eigenvalue: lambda_min,
                max_eigenvalue: lambda_max,
            });
        }
        if lambda_min < 0.0 {
            let clamped = DVector::from_iterator(n, eig.values.iter().map(|l| l.max(0.0)));
            let p = &eig.vectors;
            cov = linalg::symmetrize(&(p * DMatrix::from_diagonal(&clamped) * p.transpose()));
            lambda_min = 0.0;
        }

        let mut definiteness = if lambda_min > tol && lambda_max > 0.0 {
            Definiteness::PositiveDefinite
        } else {
            Definiteness::Semidefinite
        };
        let chol = match definiteness {
            Definiteness::PositiveDefinite => Cholesky::new(cov.clone()),
            Definiteness::Semidefinite => None,
        };
        if chol.is_none() {
            definiteness = Definiteness::Semidefinite;
        }

        let eta = cov.diagonal();
        let fingerprint = fingerprint_of(&cov);
        Ok(Self {
            names,
            cov,
            eta,
            expected_returns,
            risk_free_rate,
            definiteness,
            eigen_range: (lambda_min, lambda_max),
            chol,
            fingerprint,
        })
    }

    pub fn n(&self) -> usize {
        self.cov.nrows()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Asset variances, the diagonal of the covariance.
    pub fn eta(&self) -> &DVector<f64> {
        &self.eta
    }

    pub fn expected_returns(&self) -> Option<&DVector<f64>> {
        self.expected_returns.as_ref()
    }

    pub fn risk_free_rate(&self) -> Option<f64> {
        self.risk_free_rate
    }

    pub fn with_risk_free_rate(mut self, r0: Option<f64>) -> Self {
        self.risk_free_rate = r0;
        self
    }

    pub fn renamed(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n() {
            return Err(Error::DimensionMismatch {
                what: "asset names",
                expected: self.n(),
                found: names.len(),
            });
        }
        self.names = names;
        Ok(self)
    }

    pub fn with_expected_returns(mut self, rbar: Option<DVector<f64>>) -> Result<Self> {
        if let Some(r) = &rbar {
            if r.len() != self.n() {
                return Err(Error::DimensionMismatch {
                    what: "expected returns",
                    expected: self.n(),
                    found: r.len(),
                });
            }
        }
        self.expected_returns = rbar;
        Ok(self)
    }

    pub fn definiteness(&self) -> Definiteness {
        self.definiteness
    }

    pub fn is_nonsingular(&self) -> bool {
        self.definiteness == Definiteness::PositiveDefinite
    }

    /// Smallest and largest eigenvalue of the (possibly clamped) covariance.
    pub fn eigen_range(&self) -> (f64, f64) {
        self.eigen_range
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Solves `V x = b` with the cached Cholesky factor.
    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let chol = self.chol.as_ref().ok_or(Error::SingularCovariance)?;
        Ok(chol.solve(b))
    }

    pub fn variance_of(&self, w: &DVector<f64>) -> f64 {
        w.dot(&(&self.cov * w))
    }

    pub fn expected_return_of(&self, w: &DVector<f64>) -> Option<f64> {
        self.expected_returns.as_ref().map(|r| r.dot(w))
    }

    /// `q(w)` without the budget check; for self-financing or partial
    /// weight vectors where only the quadratic form is wanted.
    pub fn dr_unchecked(&self, w: &DVector<f64>) -> f64 {
        0.5 * (self.eta.dot(w) - self.variance_of(w))
    }
}

fn fingerprint_of(cov: &DMatrix<f64>) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update((cov.nrows() as u64).to_le_bytes());
    for x in cov.iter() {
        hasher.update(x.to_bits().to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}

pub fn check_budget(w: &DVector<f64>) -> Result<()> {
    let sum = w.sum();
    if (sum - 1.0).abs() > BUDGET_TOL || !sum.is_finite() {
        return Err(Error::BudgetViolation { sum });
    }
    Ok(())
}

fn check_len(u: &AssetUniverse, w: &DVector<f64>) -> Result<()> {
    if w.len() != u.n() {
        return Err(Error::DimensionMismatch {
            what: "weights",
            expected: u.n(),
            found: w.len(),
        });
    }
    Ok(())
}

/// Diversification return `q(w) = 1/2 (eta'w - w'Vw)` of a budget-feasible portfolio.
pub fn diversification_return(u: &AssetUniverse, w: &DVector<f64>) -> Result<f64> {
    check_len(u, w)?;
    check_budget(w)?;
    Ok(u.dr_unchecked(w))
}

/// A weight vector together with its risk and diversification statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Portfolio {
    pub weights: Vec<f64>,
    /// Sum of the weights (1 for budget-feasible portfolios).
    pub budget: f64,
    pub variance: f64,
    pub dr: f64,
    pub centrality_sq: Option<f64>,
    pub expected_return: Option<f64>,
}

impl Portfolio {
    pub fn weights_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.weights)
    }

    pub fn sigma(&self) -> f64 {
        self.variance.max(0.0).sqrt()
    }

    pub fn centrality(&self) -> Option<f64> {
        self.centrality_sq.map(|c| c.max(0.0).sqrt())
    }
}

/// Aggregates variance, DR, expected return and (when an embedding of the
/// same universe is supplied) squared centrality.
pub fn portfolio_stats(
    u: &AssetUniverse,
    w: &DVector<f64>,
    emb: Option<&EdmEmbedding>,
) -> Result<Portfolio> {
    let dr = diversification_return(u, w)?;
    let centrality_sq = match emb {
        Some(e) => {
            if e.universe_fingerprint() != u.fingerprint() {
                return Err(Error::EmbeddingMismatch);
            }
            Some(e.centrality_sq_unchecked(w))
        }
        None => None,
    };
    Ok(Portfolio {
        weights: w.iter().copied().collect(),
        budget: w.sum(),
        variance: u.variance_of(w).max(0.0),
        dr,
        centrality_sq,
        expected_return: u.expected_return_of(w),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex21() -> AssetUniverse {
        validate_universe(
            &[vec![0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
            None,
            None,
        )
        .unwrap()
    }

    #[test]
    fn singular_example_is_psd_only() {
        let u = ex21();
        assert_eq!(u.definiteness(), Definiteness::Semidefinite);
        assert_eq!(u.eta().as_slice(), &[0.0, 1.0, 1.0]);
        assert_eq!(u.solve(&DVector::zeros(3)), Err(Error::SingularCovariance));
    }

    #[test]
    fn identity_is_nonsingular() {
        let u = validate_universe(&[vec![1.0, 0.0], vec![0.0, 1.0]], None, None).unwrap();
        assert!(u.is_nonsingular());
    }

    #[test]
    fn indefinite_rejected() {
        let err = validate_universe(&[vec![1.0, 2.0], vec![2.0, 1.0]], None, None).unwrap_err();
        match err {
            Error::NotPsd { min_eigenvalue, .. } => assert!((min_eigenvalue + 1.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ragged_rejected() {
        let err = validate_universe(&[vec![1.0, 0.0], vec![0.0]], None, None).unwrap_err();
        assert_eq!(err.kind(), "NonSquare");
    }

    #[test]
    fn asymmetry_within_tolerance_is_repaired() {
        let u = validate_universe(&[vec![1.0, 0.1 + 1e-14], vec![0.1, 1.0]], None, None).unwrap();
        assert_eq!(u.covariance()[(0, 1)], u.covariance()[(1, 0)]);
        let err = validate_universe(&[vec![1.0, 0.1 + 1e-9], vec![0.1, 1.0]], None, None).unwrap_err();
        assert_eq!(err.kind(), "Asymmetric");
    }

    #[test]
    fn tiny_negative_eigenvalue_clamped() {
        // rank-one matrix perturbed slightly below zero in the null direction
        let eps = 1e-13;
        let u = validate_universe(
            &[vec![1.0 - eps, 1.0 + eps], vec![1.0 + eps, 1.0 - eps]],
            None,
            None,
        )
        .unwrap();
        assert_eq!(u.definiteness(), Definiteness::Semidefinite);
        assert!(u.eigen_range().0 >= 0.0);
        assert_eq!(u.eta()[0], u.covariance()[(0, 0)]);
    }

    #[test]
    fn returns_length_checked() {
        let err = validate_universe(&[vec![1.0, 0.0], vec![0.0, 1.0]], Some(&[0.1]), None).unwrap_err();
        assert_eq!(err.kind(), "DimensionMismatch");
    }

    #[test]
    fn single_asset_rejected() {
        let err = validate_universe(&[vec![1.0]], None, None).unwrap_err();
        assert_eq!(err.kind(), "DimensionMismatch");
    }

    #[test]
    fn size_matters_example() {
        let u = ex21();
        let w = DVector::from_vec(vec![0.5, 0.25, 0.25]);
        assert!((diversification_return(&u, &w).unwrap() - 3.0 / 16.0).abs() < 1e-15);

        let merged = validate_universe(&[vec![0.0, 0.0], vec![0.0, 0.5]], None, None).unwrap();
        let w = DVector::from_vec(vec![0.5, 0.5]);
        assert!((diversification_return(&merged, &w).unwrap() - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn concentrated_portfolio_has_zero_dr() {
        let u = ex21();
        for i in 0..3 {
            let mut w = DVector::zeros(3);
            w[i] = 1.0;
            assert_eq!(diversification_return(&u, &w).unwrap(), 0.0);
        }
    }

    #[test]
    fn budget_enforced() {
        let u = ex21();
        let w = DVector::from_vec(vec![0.5, 0.25, 0.26]);
        assert_eq!(diversification_return(&u, &w).unwrap_err().kind(), "BudgetViolation");
    }

    #[test]
    fn stats_without_embedding() {
        let u = validate_universe(
            &[vec![2.0, 0.5], vec![0.5, 1.0]],
            Some(&[0.1, 0.2]),
            None,
        )
        .unwrap();
        let p = portfolio_stats(&u, &DVector::from_vec(vec![1.0, 0.0]), None).unwrap();
        assert_eq!(p.dr, 0.0);
        assert_eq!(p.variance, 2.0);
        assert_eq!(p.expected_return, Some(0.1));
        assert!(p.centrality_sq.is_none());
    }
}
