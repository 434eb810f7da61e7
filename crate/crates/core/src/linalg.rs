//! Small dense linear-algebra helpers shared by the modules.
//!
//! Everything here works on `DMatrix<f64>` and uses factorizations
//! (LU, SVD, symmetric eigen) rather than explicit inverses.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Singular values in non-increasing order. Empty matrices yield an empty vector.
pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DVector::zeros(0);
    }
    let mut sv = m.clone().svd(false, false).singular_values;
    sv.as_mut_slice()
        .sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

/// Spectral (induced 2-) norm.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).iter().copied().fold(0.0, f64::max)
}

/// Smallest singular value over the `min(rows, cols)` available ones.
pub fn min_singular_value(m: &DMatrix<f64>) -> f64 {
    singular_values(m).iter().copied().fold(f64::INFINITY, f64::min)
}

/// 2-norm condition number; infinite for singular matrices.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = singular_values(m);
    if sv.is_empty() {
        return 1.0;
    }
    let max = sv[0];
    let min = sv[sv.len() - 1];
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Rank with singular values below `rel_tol * sigma_max` counted as zero.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = singular_values(m);
    if sv.is_empty() || sv[0] == 0.0 {
        return 0;
    }
    let cutoff = rel_tol * sv[0];
    sv.iter().filter(|&&s| s > cutoff).count()
}

/// Spectral radius via the real Schur form.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Default rank cutoff used for pseudo-inverse style solves:
/// `max(rows, cols) * eps * sigma_max`.
pub fn default_rank_tolerance(m: &DMatrix<f64>) -> f64 {
    m.nrows().max(m.ncols()) as f64 * f64::EPSILON
}

/// Minimum-Frobenius-norm solution of `S X = R` through a truncated SVD.
///
/// Singular values at or below `rel_cutoff * sigma_max` are discarded.
/// Returns the solution and the numerical rank that was used.
pub fn min_norm_solve(s: &DMatrix<f64>, rhs: &DMatrix<f64>, rel_cutoff: f64) -> Result<(DMatrix<f64>, usize)> {
    if s.nrows() != rhs.nrows() {
        return Err(Error::dimension("rhs rows", s.nrows(), rhs.nrows()));
    }
    let svd = s.clone().svd(true, true);
    let u = svd.u.ok_or_else(|| Error::Numerical("SVD did not return U".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numerical("SVD did not return V^T".into()))?;
    let sv = &svd.singular_values;
    let sigma_max = sv.iter().copied().fold(0.0, f64::max);
    let cutoff = rel_cutoff * sigma_max;

    let mut x = DMatrix::zeros(s.ncols(), rhs.ncols());
    let mut rank = 0;
    for (k, &sigma) in sv.iter().enumerate() {
        if sigma <= cutoff || sigma == 0.0 {
            continue;
        }
        rank += 1;
        // x += v_k (u_k^T R) / sigma_k
        let coeff = u.column(k).transpose() * rhs / sigma;
        x += v_t.row(k).transpose() * coeff;
    }
    Ok((x, rank))
}

/// Moore–Penrose pseudo-inverse with the default rank tolerance.
pub fn pseudo_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eye = DMatrix::identity(m.nrows(), m.nrows());
    min_norm_solve(m, &eye, default_rank_tolerance(m)).map(|(x, _)| x)
}

/// Solve `M X = B` for square `M` with an LU factorization.
pub fn lu_solve(m: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::dimension(
            "square matrix",
            format!("{0}x{0}", m.nrows()),
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    if m.nrows() != b.nrows() {
        return Err(Error::dimension("right-hand side rows", m.nrows(), b.nrows()));
    }
    m.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Numerical("singular matrix in LU solve".into()))
}

/// Vector variant of [`lu_solve`].
pub fn lu_solve_vec(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let bm = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
    lu_solve(m, &bm).map(|x| x.column(0).into_owned())
}

/// The block column `1_nu ⊗ I_m`, i.e. `nu` stacked identities of size `m`.
pub fn stacked_identity(nu: usize, m: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(nu * m, m);
    for i in 0..nu {
        out.view_mut((i * m, 0), (m, m)).fill_with_identity();
    }
    out
}

/// Stack matrices with a common column count on top of each other.
pub fn vstack(blocks: &[&DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let cols = blocks.first().map(|b| b.ncols()).unwrap_or(0);
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        if b.ncols() != cols {
            return Err(Error::dimension("stacked block columns", cols, b.ncols()));
        }
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(b);
        r += b.nrows();
    }
    Ok(out)
}

/// Extreme eigenvalues `(min, max)` of a symmetric matrix.
pub fn symmetric_eigen_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// Relative symmetry defect `||M - M^T||_F / max(||M||_F, 1)`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).norm() / m.norm().max(1.0)
}

/// Least-squares residual norm of `v` against the column span of `m`.
pub fn span_residual(m: &DMatrix<f64>, v: &DVector<f64>) -> Result<f64> {
    let rhs = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
    let (g, _) = min_norm_solve(m, &rhs, default_rank_tolerance(m))?;
    Ok((m * g - rhs).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn min_norm_matches_hand_solution() {
        // x1 + x2 = 2 has min-norm solution (1, 1).
        let s = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let r = DMatrix::from_row_slice(1, 1, &[2.0]);
        let (x, rank) = min_norm_solve(&s, &r, 1e-12).unwrap();
        assert_eq!(rank, 1);
        assert_relative_eq!(x[(0, 0)], 1.0, epsilon = 1e-14);
        assert_relative_eq!(x[(1, 0)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn spectral_radius_of_rotation() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -0.5, 0.5, 0.0]);
        assert_relative_eq!(spectral_radius(&a), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn stacked_identity_layout() {
        let s = stacked_identity(3, 2);
        assert_eq!(s.shape(), (6, 2));
        assert_eq!(s[(4, 0)], 1.0);
        assert_eq!(s[(5, 1)], 1.0);
        assert_eq!(s[(5, 0)], 0.0);
    }

    #[test]
    fn rank_ignores_roundoff() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0 + 1e-15]);
        assert_eq!(numerical_rank(&m, 1e-9), 1);
    }
}
