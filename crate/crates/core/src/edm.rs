//! Euclidean distance matrix of a covariance and its spherical embedding.
//!
//! Under the budget constraint `q(w) = 1/2 w' D w` with
//! `D = 1/2 (eta 1' + 1 eta') - V`. `D` is a Euclidean distance matrix, so its
//! assets can be placed as points `x_i` with `|x_i - x_j|^2 = D_ij`. Centering
//! the configuration at the `s`-weighted mean, where `s` is the maximum
//! diversification return portfolio, puts every point on a sphere of radius
//! `sqrt(q_max)`. A portfolio's distance from that center is its centrality
//! and `c(w)^2 + q(w) = q_max` for every budget-feasible `w`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, ones};
use crate::universe::{check_budget, AssetUniverse};

/// Negative off-diagonal distances down to this magnitude are rounding noise.
pub const NEGATIVE_DISTANCE_TOL: f64 = 1e-12;
/// Embedding rank cutoff relative to the leading eigenvalue of `B`.
pub const RANK_TOL: f64 = 1e-10;
/// Singular-value cutoff for the pseudo-inverse fallback.
pub const PINV_TOL: f64 = 1e-10;

/// `D_ij = 1/2 (V_ii + V_jj) - V_ij` for an arbitrary square matrix.
///
/// The diagonal is set to exactly zero and tiny negative entries are
/// clamped; anything more negative than the tolerance is reported.
pub fn distance_matrix(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = cov.nrows();
    if n != cov.ncols() {
        return Err(Error::NonSquare {
            rows: n,
            cols: cov.ncols(),
        });
    }
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let v = 0.5 * (cov[(i, i)] + cov[(j, j)]) - cov[(i, j)];
            d[(i, j)] = if v < 0.0 {
                if v < -NEGATIVE_DISTANCE_TOL {
                    return Err(Error::NegativeEntry {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
                0.0
            } else {
                v
            };
        }
    }
    Ok(d)
}

pub fn build_distance_matrix(u: &AssetUniverse) -> Result<DMatrix<f64>> {
    distance_matrix(u.covariance())
}

/// Result of an EDM test: `-J D J` must be positive semidefinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdmCertificate {
    pub is_edm: bool,
    /// Smallest eigenvalue of `-J D J` (J the centering matrix).
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

/// Classical (Schoenberg) EDM test.
pub fn assert_edm(d: &DMatrix<f64>) -> Result<EdmCertificate> {
    let n = d.nrows();
    if n != d.ncols() {
        return Err(Error::NonSquare {
            rows: n,
            cols: d.ncols(),
        });
    }
    let scale = d.amax().max(f64::MIN_POSITIVE);
    for i in 0..n {
        if d[(i, i)].abs() > NEGATIVE_DISTANCE_TOL * scale.max(1.0) {
            return Err(Error::NonZeroDiagonal {
                index: i,
                value: d[(i, i)],
            });
        }
    }
    let asym = linalg::relative_asymmetry(d);
    if asym > crate::universe::SYMMETRY_TOL {
        return Err(Error::Asymmetric {
            relative: asym,
            tolerance: crate::universe::SYMMETRY_TOL,
        });
    }
    for i in 0..n {
        for j in 0..n {
            if d[(i, j)] < -NEGATIVE_DISTANCE_TOL * scale.max(1.0) {
                return Err(Error::NegativeEntry {
                    row: i,
                    col: j,
                    value: d[(i, j)],
                });
            }
        }
    }
    let j = DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
    let g = linalg::symmetrize(&(-(&j * d * &j)));
    let (min, max) = linalg::symmetric_extremes(&g);
    let tol = RANK_TOL * max.abs().max(scale);
    Ok(EdmCertificate {
        is_edm: min >= -tol,
        min_eigenvalue: min,
        max_eigenvalue: max,
    })
}

/// Which generalized inverse produced `D^- 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InverseRoute {
    /// Plain inverse through an LU factorization.
    Lu,
    /// Moore-Penrose pseudo-inverse via SVD.
    PseudoInverse,
}

/// Spherical embedding of a universe's distance matrix.
#[derive(Debug, Clone)]
pub struct EdmEmbedding {
    d: DMatrix<f64>,
    s: DVector<f64>,
    b: DMatrix<f64>,
    eigvals: Vec<f64>,
    /// n x k, orthonormal eigenvectors of `B` for the kept eigenvalues.
    eigvecs: DMatrix<f64>,
    /// k x n coordinates; column `i` is asset `i`'s embedded point.
    x: DMatrix<f64>,
    q_max: f64,
    route: InverseRoute,
    fingerprint: u64,
}

fn solve_d_ones(d: &DMatrix<f64>) -> (DVector<f64>, InverseRoute) {
    let n = d.nrows();
    let one = ones(n);
    let lu = d.clone().lu();
    let pivots_ok = {
        let u = lu.u();
        let diag: Vec<f64> = (0..n).map(|i| u[(i, i)].abs()).collect();
        let max = diag.iter().copied().fold(0.0, f64::max);
        let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
        max > 0.0 && min > 1e-13 * max
    };
    if pivots_ok {
        if let Some(y) = lu.solve(&one) {
            let resid = (d * &y - &one).norm();
            if y.iter().all(|v| v.is_finite()) && resid <= 1e-9 * (n as f64).sqrt() {
                return (y, InverseRoute::Lu);
            }
        }
    }
    (linalg::pinv_solve(d, &one, PINV_TOL), InverseRoute::PseudoInverse)
}

/// Builds `D`, the MDRP weights `s = D^-1 / 1'D^-1 1`, `q_max`, the Gram
/// matrix `B = -1/2 J_s' D J_s` and embedding coordinates.
pub fn embed(u: &AssetUniverse) -> Result<EdmEmbedding> {
    let d = build_distance_matrix(u)?;
    let n = d.nrows();
    let one = ones(n);
    let (y, route) = solve_d_ones(&d);
    if route == InverseRoute::PseudoInverse {
        // 1 must lie in range(D) for the generalized-inverse formulas.
        let resid = (&d * &y - &one).norm();
        if resid > 1e-8 * (n as f64).sqrt() {
            return Err(Error::SingularD { value: one.dot(&y) });
        }
    }
    let total = one.dot(&y);
    if !total.is_finite() || total.abs() <= 1e-14 * y.amax().max(1.0) {
        return Err(Error::SingularD { value: total });
    }
    let q_max = 1.0 / (2.0 * total);
    if q_max <= 0.0 {
        return Err(Error::NonPositiveQmax { q_max });
    }
    let s = y / total;

    let j_s = DMatrix::identity(n, n) - &s * one.transpose();
    let b = linalg::symmetrize(&(j_s.transpose() * &d * &j_s * -0.5));

    let eig = linalg::sorted_symmetric_eigen(&b);
    let lead = eig.values[0];
    let k = if lead > 0.0 {
        eig.values.iter().take_while(|&&l| l > RANK_TOL * lead).count()
    } else {
        0
    };
    let eigvals: Vec<f64> = eig.values[..k].to_vec();
    let eigvecs = eig.vectors.columns(0, k).into_owned();
    let mut x = eigvecs.transpose();
    for (r, l) in eigvals.iter().enumerate() {
        let scale = l.sqrt();
        x.row_mut(r).scale_mut(scale);
    }

    Ok(EdmEmbedding {
        d,
        s,
        b,
        eigvals,
        eigvecs,
        x,
        q_max,
        route,
        fingerprint: u.fingerprint(),
    })
}

impl EdmEmbedding {
    pub fn distance_matrix(&self) -> &DMatrix<f64> {
        &self.d
    }

    /// Maximum diversification return portfolio.
    pub fn mdrp_weights(&self) -> &DVector<f64> {
        &self.s
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// Positive eigenvalues of `B`, nonincreasing.
    pub fn eigvals(&self) -> &[f64] {
        &self.eigvals
    }

    pub fn eigvecs(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    pub fn coordinates(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn rank(&self) -> usize {
        self.eigvals.len()
    }

    pub fn q_max(&self) -> f64 {
        self.q_max
    }

    /// Embedding sphere radius `sqrt(q_max)`.
    pub fn radius(&self) -> f64 {
        self.q_max.sqrt()
    }

    pub fn inverse_route(&self) -> InverseRoute {
        self.route
    }

    pub fn universe_fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigvals.first().copied().unwrap_or(0.0)
    }

    pub(crate) fn centrality_sq_unchecked(&self, w: &DVector<f64>) -> f64 {
        w.dot(&(&self.b * w)).max(0.0)
    }

    /// Embedded point of a portfolio, `X w`.
    pub fn point_of(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.x * w
    }

    pub fn summary(&self) -> EmbeddingSummary {
        EmbeddingSummary {
            q_max: self.q_max,
            radius: self.radius(),
            rank: self.rank(),
            eigvals: self.eigvals.clone(),
            s: self.s.iter().copied().collect(),
            inverse_route: self.route,
        }
    }
}

/// JSON-facing view of an embedding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingSummary {
    pub q_max: f64,
    pub radius: f64,
    pub rank: usize,
    pub eigvals: Vec<f64>,
    pub s: Vec<f64>,
    pub inverse_route: InverseRoute,
}

/// Portfolio centrality `c(w) = sqrt(w' B w) = |X w|`.
pub fn centrality(emb: &EdmEmbedding, w: &DVector<f64>) -> Result<f64> {
    if w.len() != emb.s.len() {
        return Err(Error::DimensionMismatch {
            what: "weights",
            expected: emb.s.len(),
            found: w.len(),
        });
    }
    check_budget(w)?;
    Ok(emb.centrality_sq_unchecked(w).sqrt())
}

/// Lower bound on `q(w)` implied by an A-norm constraint `|w|_A <= tau`.
///
/// With `beta^2 = lambda_min(A) / lambda_max(B)`, `A - beta^2 B` is PSD so
/// `|w|_A >= beta c(w)` and therefore `q(w) >= q_max - (tau / beta)^2`.
pub fn norm_dr_bound(emb: &EdmEmbedding, a: &DMatrix<f64>, tau: f64) -> Result<f64> {
    let n = emb.s.len();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "norm matrix",
            expected: n,
            found: a.nrows(),
        });
    }
    if linalg::relative_asymmetry(a) > crate::universe::SYMMETRY_TOL {
        return Err(Error::NotSpd);
    }
    let (lambda_min_a, _) = linalg::symmetric_extremes(&linalg::symmetrize(a));
    if lambda_min_a <= 0.0 || nalgebra::Cholesky::new(a.clone()).is_none() {
        return Err(Error::NotSpd);
    }
    let lambda_max_b = emb.lambda_max();
    if lambda_max_b <= 0.0 {
        return Ok(emb.q_max);
    }
    let beta_sq = lambda_min_a / lambda_max_b;
    Ok(emb.q_max - tau * tau / beta_sq)
}
