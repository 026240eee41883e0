//! Small dense linear-algebra helpers shared by the analytic modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigenpairs of a symmetric matrix, eigenvalues sorted nonincreasing.
pub(crate) struct SortedEigen {
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector of `values[k]`.
    pub vectors: DMatrix<f64>,
}

pub(crate) fn sorted_symmetric_eigen(m: &DMatrix<f64>) -> SortedEigen {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    SortedEigen { values, vectors }
}

pub(crate) fn symmetric_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(m.clone());
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// max |A - A'| relative to max |A|; zero for the zero matrix.
pub(crate) fn relative_asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax();
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / scale
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// True when `v` lies (numerically) on the ray of the ones vector: the
/// residual after removing the mean is at most `tol * |v|`.
pub fn is_proportional_to_ones(v: &DVector<f64>, tol: f64) -> bool {
    let norm = v.norm();
    if norm == 0.0 {
        return true;
    }
    let mean = v.mean();
    let residual = v.map(|x| x - mean).norm();
    residual <= tol * norm
}

pub(crate) fn ones(n: usize) -> DVector<f64> {
    DVector::from_element(n, 1.0)
}

/// Moore-Penrose pseudo-inverse applied to `b`, dropping singular values
/// below `rel_cutoff * sigma_1`.
pub(crate) fn pinv_solve(m: &DMatrix<f64>, b: &DVector<f64>, rel_cutoff: f64) -> DVector<f64> {
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let s_max = svd.singular_values.max();
    let mut y = u.transpose() * b;
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s > rel_cutoff * s_max && *s > 0.0 {
            y[k] /= s;
        } else {
            y[k] = 0.0;
        }
    }
    v_t.transpose() * y
}
