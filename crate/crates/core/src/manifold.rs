//! Affine Grassmannian elements and the invariant distance between them.
//!
//! An element of Graff(k, n) is stored in affine coordinates `[A, b0]`: an
//! orthonormal `n x k` basis of the linear part and the orthogonal
//! displacement `b0` (the point of the subspace closest to the origin).
//! Distances are measured by embedding both elements into Gr(k + 1, n + 1)
//! and taking the geodesic distance between the embedded linear subspaces.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Tolerance on `AᵀA = I` and `Aᵀb0 = 0` for stored elements.
pub const INVARIANT_TOL: f64 = 1e-10;

/// Relative singular-value cutoff used by [`orthonormalize`].
pub const RANK_TOL: f64 = 1e-9;

/// Below this the linear parts are treated as sharing a direction when
/// locating the anchor point of a pair.
const PARALLEL_TOL: f64 = 1e-10;

/// A k-dimensional affine subspace of ℝⁿ.
#[derive(Debug, Clone, PartialEq)]
pub struct GraffElement {
    basis: DMatrix<f64>,
    displacement: DVector<f64>,
}

impl GraffElement {
    /// Builds an element from any full-rank spanning matrix and any point on
    /// the subspace. The basis is orthonormalized and the point is projected
    /// to the orthogonal displacement.
    pub fn new(span: &DMatrix<f64>, point: &DVector<f64>) -> Result<Self> {
        if span.nrows() != point.len() {
            return Err(Error::DimensionMismatch {
                expected: span.nrows(),
                found: point.len(),
            });
        }
        if span.ncols() >= span.nrows() {
            return Err(Error::InvalidParameter(format!(
                "subspace dimension {} must be smaller than ambient dimension {}",
                span.ncols(),
                span.nrows()
            )));
        }
        let basis = orthonormalize(span)?;
        let displacement = canonicalize_displacement(&basis, point);
        Ok(Self {
            basis,
            displacement,
        })
    }

    /// Wraps an already orthonormal basis and orthogonal displacement,
    /// checking both invariants.
    pub fn from_parts(basis: DMatrix<f64>, displacement: DVector<f64>) -> Result<Self> {
        let n = basis.nrows();
        if displacement.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: displacement.len(),
            });
        }
        if basis.ncols() >= n {
            return Err(Error::InvalidParameter(format!(
                "subspace dimension {} must be smaller than ambient dimension {n}",
                basis.ncols()
            )));
        }
        let k = basis.ncols();
        let gram_err = (basis.transpose() * &basis - DMatrix::identity(k, k)).norm();
        if gram_err > INVARIANT_TOL {
            return Err(Error::Validation(format!(
                "basis is not orthonormal (|AᵀA - I| = {gram_err:.3e})"
            )));
        }
        let leak = (basis.transpose() * &displacement).norm();
        if leak > INVARIANT_TOL * displacement.norm().max(1.0) {
            return Err(Error::Validation(format!(
                "displacement is not orthogonal to the basis (|Aᵀb0| = {leak:.3e})"
            )));
        }
        Ok(Self {
            basis,
            displacement,
        })
    }

    /// A point of ℝⁿ as an element of Graff(0, n).
    pub fn point(p: DVector<f64>) -> Self {
        Self {
            basis: DMatrix::zeros(p.len(), 0),
            displacement: p,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn displacement(&self) -> &DVector<f64> {
        &self.displacement
    }

    /// Translates the subspace by `offset`, keeping the displacement canonical.
    pub fn translated(&self, offset: &DVector<f64>) -> Self {
        let moved = &self.displacement + offset;
        Self {
            basis: self.basis.clone(),
            displacement: canonicalize_displacement(&self.basis, &moved),
        }
    }

    /// Applies `x -> R x + t`.
    pub fn rigid_motion(&self, rotation: &DMatrix<f64>, translation: &DVector<f64>) -> Self {
        let basis = rotation * &self.basis;
        let moved = rotation * &self.displacement + translation;
        let displacement = canonicalize_displacement(&basis, &moved);
        Self {
            basis,
            displacement,
        }
    }

    /// Orthogonal projector onto the linear part, `AAᵀ`.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }
}

/// Stiefel coordinates of an embedded element: an orthonormal
/// `(n + 1) x (k + 1)` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelCoords {
    pub y: DMatrix<f64>,
}

impl StiefelCoords {
    pub fn ambient_dim(&self) -> usize {
        self.y.nrows()
    }

    pub fn cols(&self) -> usize {
        self.y.ncols()
    }
}

/// Principal angles in radians, ascending, each in `[0, π/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalAngles {
    thetas: Vec<f64>,
}

impl PrincipalAngles {
    pub fn new(mut thetas: Vec<f64>) -> Result<Self> {
        if thetas
            .iter()
            .any(|t| !t.is_finite() || *t < 0.0 || *t > std::f64::consts::FRAC_PI_2)
        {
            return Err(Error::InvalidParameter(
                "principal angles must lie in [0, pi/2]".into(),
            ));
        }
        thetas.sort_by(f64::total_cmp);
        Ok(Self { thetas })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.thetas
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }
}

/// Orthonormal basis of the column space of `m`, with column signs chosen so
/// that the triangular factor has a positive diagonal.
pub fn orthonormalize(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, k) = m.shape();
    if k == 0 {
        return Ok(DMatrix::zeros(n, 0));
    }
    if k > n {
        return Err(Error::RankDeficient { rank: n, cols: k });
    }
    let sv = linalg::singular_values(m);
    let max = sv.max();
    let rank = sv.iter().filter(|s| **s > RANK_TOL * max).count();
    if max == 0.0 || rank < k {
        return Err(Error::RankDeficient { rank, cols: k });
    }
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

/// `(I - AAᵀ) b`: the component of `b` in the left nullspace of `A`.
pub fn canonicalize_displacement(basis: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if basis.ncols() == 0 {
        return b.clone();
    }
    b - basis * (basis.transpose() * b)
}

/// Stiefel coordinates of `j(Y)`, the embedding into Gr(k + 1, n + 1).
pub fn stiefel(elem: &GraffElement) -> StiefelCoords {
    let n = elem.ambient_dim();
    let k = elem.dim();
    let b0 = &elem.displacement;
    let eta = (1.0 + b0.norm_squared()).sqrt();
    let mut y = DMatrix::zeros(n + 1, k + 1);
    y.view_mut((0, 0), (n, k)).copy_from(&elem.basis);
    for i in 0..n {
        y[(i, k)] = b0[i] / eta;
    }
    y[(n, k)] = 1.0 / eta;
    StiefelCoords { y }
}

/// Principal angles between the column spaces of two Stiefel matrices.
///
/// Cosines come from the singular values of `Y1ᵀY2`. Angles below π/4 are
/// recovered from the matching sines instead, which keeps small angles
/// accurate where `arccos` loses half the digits.
pub fn principal_angles(y1: &StiefelCoords, y2: &StiefelCoords) -> Result<PrincipalAngles> {
    if y1.ambient_dim() != y2.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: y1.ambient_dim(),
            found: y2.ambient_dim(),
        });
    }
    let (narrow, wide) = if y1.cols() <= y2.cols() {
        (&y1.y, &y2.y)
    } else {
        (&y2.y, &y1.y)
    };
    let cross = wide.transpose() * narrow;
    let mut cosines: Vec<f64> = linalg::singular_values(&cross).iter().copied().collect();
    cosines.sort_by(|a, b| b.total_cmp(a));
    let residual = narrow - wide * cross;
    let mut sines: Vec<f64> = linalg::singular_values(&residual).iter().copied().collect();
    sines.sort_by(f64::total_cmp);

    let count = narrow.ncols();
    let mut thetas = Vec::with_capacity(count);
    for i in 0..count {
        let c = cosines.get(i).copied().unwrap_or(0.0).clamp(0.0, 1.0);
        let theta = if c > FRAC_1_SQRT_2 {
            let s = sines.get(i).copied().unwrap_or(0.0).clamp(0.0, 1.0);
            s.asin()
        } else {
            c.acos()
        };
        thetas.push(theta);
    }
    PrincipalAngles::new(thetas)
}

/// Geodesic distance on the Grassmannian, `sqrt(Σ θᵢ²)`.
pub fn gr_distance(angles: &PrincipalAngles) -> f64 {
    angles.thetas.iter().map(|t| t * t).sum::<f64>().sqrt()
}

/// The point of `y1` nearest to `y2`.
///
/// This is the minimum-norm solution of `min_c |(I - A2A2ᵀ)(b02 - b01 - A1c)|`,
/// so ties along directions shared by both linear parts resolve to `b01`
/// itself. The choice depends only on the relative placement of the pair,
/// which is what makes the shifted distance independent of the frame.
pub fn anchor_point(y1: &GraffElement, y2: &GraffElement) -> Result<DVector<f64>> {
    check_same_ambient(y1, y2)?;
    Ok(anchor_and_offset(y1, y2).0)
}

fn anchor_and_offset(y1: &GraffElement, y2: &GraffElement) -> (DVector<f64>, DVector<f64>) {
    let gap = canonicalize_displacement(&y2.basis, &(&y2.displacement - &y1.displacement));
    if y1.dim() == 0 {
        return (y1.displacement.clone(), gap);
    }
    let along = {
        let mut b = y1.basis.clone();
        for mut col in b.column_iter_mut() {
            let proj = canonicalize_displacement(&y2.basis, &col.clone_owned());
            col.copy_from(&proj);
        }
        b
    };
    let coeffs = linalg::svd(&along).solve(&gap, PARALLEL_TOL);
    let anchor = &y1.displacement + &y1.basis * &coeffs;
    let offset = gap - along * coeffs;
    (anchor, offset)
}

/// Translates both elements so that the anchor point of `y1` (see
/// [`anchor_point`]) lands on the origin. The first output has zero
/// displacement; the second keeps the relative placement.
pub fn shift_pair(y1: &GraffElement, y2: &GraffElement) -> Result<(GraffElement, GraffElement)> {
    check_same_ambient(y1, y2)?;
    let (_, offset) = anchor_and_offset(y1, y2);
    let first = GraffElement {
        basis: y1.basis.clone(),
        displacement: DVector::zeros(y1.ambient_dim()),
    };
    let second = GraffElement {
        basis: y2.basis.clone(),
        displacement: canonicalize_displacement(&y2.basis, &offset),
    };
    Ok((first, second))
}

/// Divides the displacement by `rho`.
pub fn scale_element(elem: &GraffElement, rho: f64) -> Result<GraffElement> {
    check_rho(rho)?;
    Ok(GraffElement {
        basis: elem.basis.clone(),
        displacement: &elem.displacement / rho,
    })
}

/// Rigid-motion invariant distance: shift the pair, scale by `rho`, embed,
/// and measure on the Grassmannian.
pub fn graff_distance(y1: &GraffElement, y2: &GraffElement, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    let (s1, s2) = shift_pair(y1, y2)?;
    embedded_distance(&scale_element(&s1, rho)?, &scale_element(&s2, rho)?)
}

/// The same distance without the shift step. Depends on where the pair sits
/// relative to the origin.
pub fn graff_distance_naive(y1: &GraffElement, y2: &GraffElement, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    check_same_ambient(y1, y2)?;
    embedded_distance(&scale_element(y1, rho)?, &scale_element(y2, rho)?)
}

fn embedded_distance(y1: &GraffElement, y2: &GraffElement) -> Result<f64> {
    let angles = principal_angles(&stiefel(y1), &stiefel(y2))?;
    Ok(gr_distance(&angles))
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "scaling rho must be positive, got {rho}"
        )));
    }
    Ok(())
}

fn check_same_ambient(y1: &GraffElement, y2: &GraffElement) -> Result<()> {
    if y1.ambient_dim() != y2.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: y1.ambient_dim(),
            found: y2.ambient_dim(),
        });
    }
    Ok(())
}
