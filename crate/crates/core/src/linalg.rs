//! Thin singular value decomposition by one-sided Jacobi rotations.
//!
//! nalgebra's bidiagonal SVD returns inaccurate factors for some exactly
//! rank-deficient inputs (a rank-one 3×2 matrix can come back with a
//! reconstruction error near 1e-2). Pairs of intersecting or parallel
//! subspaces produce such matrices routinely, so every decomposition in this
//! crate goes through this module instead. One-sided Jacobi is also accurate
//! in the relative sense for small singular values, which the sine-based
//! principal angles rely on.

use nalgebra::{DMatrix, DVector};

const MAX_SWEEPS: usize = 80;

/// `A = U diag(σ) Vᵀ` with `r = min(m, n)` columns in `U` and `V`.
///
/// Singular values are sorted in decreasing order. Columns of `U` that belong
/// to a zero singular value are zero; [`Svd::completed_u`] fills them in.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v: DMatrix<f64>,
}

/// Decomposes any real matrix.
pub fn svd(a: &DMatrix<f64>) -> Svd {
    if a.nrows() < a.ncols() {
        let t = svd_tall(&a.transpose());
        return Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        };
    }
    svd_tall(a)
}

/// Singular values only, decreasing.
pub fn singular_values(a: &DMatrix<f64>) -> DVector<f64> {
    svd(a).singular_values
}

fn svd_tall(a: &DMatrix<f64>) -> Svd {
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let alpha = w.column(i).norm_squared();
                let beta = w.column(j).norm_squared();
                let gamma = w.column(i).dot(&w.column(j));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut w, i, j, c, s);
                rotate_columns(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|k| w.column(k).norm()).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));

    let mut u = DMatrix::zeros(m, n);
    let mut vs = DMatrix::zeros(n, n);
    let mut sv = DVector::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        let sigma = norms[src];
        sv[dst] = sigma;
        if sigma > 0.0 {
            u.set_column(dst, &(w.column(src) / sigma));
        }
        vs.set_column(dst, &v.column(src));
    }
    Svd {
        u,
        singular_values: sv,
        v: vs,
    }
}

fn rotate_columns(m: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    for r in 0..m.nrows() {
        let (x, y) = (m[(r, i)], m[(r, j)]);
        m[(r, i)] = c * x - s * y;
        m[(r, j)] = s * x + c * y;
    }
}

impl Svd {
    /// Minimum-norm least-squares solution of `Ax = b`, treating singular
    /// values at or below `tol` as zero.
    pub fn solve(&self, b: &DVector<f64>, tol: f64) -> DVector<f64> {
        let mut x = DVector::zeros(self.v.nrows());
        for k in 0..self.singular_values.len() {
            let sigma = self.singular_values[k];
            if sigma > tol {
                x += self.v.column(k) * (self.u.column(k).dot(b) / sigma);
            }
        }
        x
    }

    /// `U` with columns for zero singular values replaced so that the
    /// columns are orthonormal.
    pub fn completed_u(&self) -> DMatrix<f64> {
        let mut u = self.u.clone();
        let m = u.nrows();
        for k in 0..u.ncols() {
            if u.column(k).norm() > 0.5 {
                continue;
            }
            for e in 0..m {
                let mut cand = DVector::<f64>::zeros(m);
                cand[e] = 1.0;
                for p in 0..u.ncols() {
                    if p != k && u.column(p).norm() > 0.5 {
                        let proj = u.column(p).dot(&cand);
                        cand -= u.column(p) * proj;
                    }
                }
                let norm = cand.norm();
                if norm > 0.5 {
                    u.set_column(k, &(cand / norm));
                    break;
                }
            }
        }
        u
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn reconstruct(s: &Svd) -> DMatrix<f64> {
        &s.u * DMatrix::from_diagonal(&s.singular_values) * s.v.transpose()
    }

    #[test]
    fn rank_one_reconstructs() {
        // nalgebra's own SVD gets this one wrong.
        let a = DMatrix::from_column_slice(
            3,
            2,
            &[
                -0.03289711207437762,
                0.023790877883905104,
                0.015323259971104286,
                -0.106207425142124,
                0.07680819751616685,
                0.049470725048291614,
            ],
        );
        let s = svd(&a);
        assert_abs_diff_eq!(reconstruct(&s), a, epsilon = 1e-16);
        assert_abs_diff_eq!(s.singular_values[0], a.norm(), epsilon = 1e-16);
        assert!(s.singular_values[1] < 1e-16);
    }

    #[test]
    fn wide_and_tall_agree() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, -1.0, 0.5, 4.0]);
        let s = svd(&a);
        let t = svd(&a.transpose());
        assert_abs_diff_eq!(reconstruct(&s), a, epsilon = 1e-14);
        assert_abs_diff_eq!(s.singular_values, t.singular_values, epsilon = 1e-14);
        assert!(s.singular_values[0] >= s.singular_values[1]);
    }

    #[test]
    fn solve_is_minimum_norm() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let x = svd(&a).solve(&DVector::from_vec(vec![2.0, 2.0]), 1e-12);
        assert_abs_diff_eq!(x, DVector::from_vec(vec![1.0, 1.0]), epsilon = 1e-14);
    }

    #[test]
    fn completion_is_orthonormal() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        let u = svd(&a).completed_u();
        assert_abs_diff_eq!(u.transpose() * &u, DMatrix::identity(3, 3), epsilon = 1e-15);
    }
}
