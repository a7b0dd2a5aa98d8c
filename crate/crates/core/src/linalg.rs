//! Dense linear-algebra kernels: LU solves and a one-sided Jacobi SVD.
//!
//! The SVD only produces left singular vectors and singular values, which is
//! all that POD and DEIM need. Wide matrices (more columns than rows, the
//! usual shape of a snapshot matrix) are first compressed with a Householder
//! QR of the transpose so that the Jacobi sweeps run on a square factor.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solves `a x = b` by LU with partial pivoting.
pub fn lu_solve(a: &DMatrix<f64>, b: &DVector<f64>, context: &str) -> Result<DVector<f64>> {
    if a.nrows() != a.ncols() || a.nrows() != b.len() {
        return Err(Error::Dimension {
            context: "lu_solve",
            expected: a.nrows(),
            got: b.len(),
        });
    }
    let x = a
        .clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Singular(context.to_string()))?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Singular(context.to_string()))
    }
}

/// Solves `a X = B` column by column with one factorization.
pub fn lu_solve_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(Error::Dimension {
            context: "lu_solve_matrix",
            expected: a.nrows(),
            got: b.nrows(),
        });
    }
    let x = a
        .clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Singular(context.to_string()))?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Singular(context.to_string()))
    }
}

/// Left singular vectors and singular values of an `m x n` matrix.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    /// `m x min(m, n)`, orthonormal columns.
    pub u: DMatrix<f64>,
    /// Non-increasing, length `min(m, n)`.
    pub singular_values: Vec<f64>,
}

const MAX_SWEEPS: usize = 80;

/// Thin SVD by one-sided (Hestenes) Jacobi rotations.
pub fn thin_svd(a: &DMatrix<f64>) -> ThinSvd {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return ThinSvd {
            u: DMatrix::zeros(m, 0),
            singular_values: Vec::new(),
        };
    }
    if n > m {
        // a = R^T Q^T with R square, so a and R^T share left vectors and spectrum.
        let r = a.transpose().qr().r();
        hestenes(r.transpose())
    } else {
        hestenes(a.clone())
    }
}

/// Orthogonalizes the columns of `w` in place; `w V = U Σ`.
fn hestenes(mut w: DMatrix<f64>) -> ThinSvd {
    let (m, p) = w.shape();
    let tol = f64::EPSILON * (m as f64).sqrt();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..p {
            for j in (i + 1)..p {
                let (alpha, beta, gamma) = {
                    let ci = w.column(i);
                    let cj = w.column(j);
                    (ci.norm_squared(), cj.norm_squared(), ci.dot(&cj))
                };
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for row in 0..m {
                    let wi = w[(row, i)];
                    let wj = w[(row, j)];
                    w[(row, i)] = c * wi - s * wj;
                    w[(row, j)] = s * wi + c * wj;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(usize, f64)> = (0..p).map(|j| (j, w.column(j).norm())).collect();
    // Stable sort keeps the column order for ties.
    order.sort_by(|a, b| b.1.total_cmp(&a.1));
    let sigma_max = order.first().map_or(0.0, |o| o.1);
    let cutoff = sigma_max * f64::EPSILON * (m.max(p) as f64);

    let k = m.min(p);
    let mut u = DMatrix::<f64>::zeros(m, k);
    let mut singular_values = Vec::with_capacity(k);
    let mut filled = 0;
    for &(j, sigma) in order.iter().take(k) {
        if sigma > cutoff && sigma > 0.0 {
            u.set_column(filled, &(w.column(j) / sigma));
            singular_values.push(sigma);
        } else {
            singular_values.push(0.0);
        }
        filled += 1;
    }
    complete_orthonormal(&mut u, &singular_values);
    ThinSvd { u, singular_values }
}

/// Replaces columns belonging to zero singular values with unit vectors
/// orthogonal to everything already in `u`.
fn complete_orthonormal(u: &mut DMatrix<f64>, sigma: &[f64]) {
    let m = u.nrows();
    let mut candidate = 0;
    for col in 0..u.ncols() {
        if sigma[col] > 0.0 {
            continue;
        }
        while candidate < m {
            let mut v = DVector::<f64>::zeros(m);
            v[candidate] = 1.0;
            candidate += 1;
            // Two Gram-Schmidt passes.
            for _ in 0..2 {
                for other in 0..u.ncols() {
                    if other == col || (sigma[other] == 0.0 && other > col) {
                        continue;
                    }
                    let proj = u.column(other).dot(&v);
                    v -= u.column(other) * proj;
                }
            }
            let norm = v.norm();
            if norm > 1e-8 {
                u.set_column(col, &(v / norm));
                break;
            }
        }
    }
}

/// Ratio of largest to smallest singular value; infinite when singular.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let svd = thin_svd(a);
    match (svd.singular_values.first(), svd.singular_values.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn orthonormality_error(u: &DMatrix<f64>) -> f64 {
        let gram = u.transpose() * u;
        (gram - DMatrix::identity(u.ncols(), u.ncols())).amax()
    }

    #[test]
    fn singular_values_match_bidiagonalization_on_wide_random() {
        // nalgebra's SVD (Householder bidiagonalization + implicit QR) is the oracle.
        for seed in 0..3 {
            let a = random_matrix(50, 200, seed);
            let ours = thin_svd(&a);
            let mut oracle: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
            oracle.sort_by(|x, y| y.total_cmp(x));
            assert_eq!(ours.singular_values.len(), 50);
            for (s, o) in ours.singular_values.iter().zip(&oracle) {
                assert!(((s - o) / o).abs() < 1e-10, "{s} vs {o}");
            }
            assert!(orthonormality_error(&ours.u) < 1e-10);
        }
    }

    #[test]
    fn tall_matrix_reconstructs() {
        let a = random_matrix(30, 12, 7);
        let svd = thin_svd(&a);
        assert_eq!(svd.u.shape(), (30, 12));
        // U U^T a = a since a has full column rank
        let recon = &svd.u * (svd.u.transpose() * &a);
        assert!((recon - &a).amax() < 1e-12);
        let total: f64 = svd.singular_values.iter().map(|s| s * s).sum();
        assert!((total - a.norm_squared()).abs() < 1e-10 * a.norm_squared());
    }

    #[test]
    fn rank_deficient_gets_completed_basis() {
        let c = DVector::from_vec(vec![1.0, 2.0, -2.0]);
        let a = DMatrix::from_fn(3, 4, |i, _| c[i]);
        let svd = thin_svd(&a);
        assert!((svd.singular_values[0] - 3.0 * 2.0).abs() < 1e-12);
        assert_eq!(&svd.singular_values[1..], &[0.0, 0.0]);
        assert!(orthonormality_error(&svd.u) < 1e-12);
    }

    #[test]
    fn lu_reports_singular() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let b = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(lu_solve(&a, &b, "test"), Err(Error::Singular(_))));
    }

    #[test]
    fn condition_of_identity_is_one() {
        let a = DMatrix::<f64>::identity(4, 4) * 3.0;
        assert!((condition_number(&a) - 1.0).abs() < 1e-14);
    }
}
