//! Closed-form rigid registration from matched lines and planes.
//!
//! Rotation comes from the SVD of the correlation of matched directions and
//! normals; translation from a stacked linear least-squares system. Both
//! stages report a condition number and refuse degenerate geometry.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{DegenerateStage, Error, Result};
use crate::landmarks::{Geometry, Landmark, RigidTransform};
use crate::linalg;

/// Rotation correlation matrices at or above this condition number are degenerate.
pub const KAPPA_MAX: f64 = 1e3;
/// Translation systems with `σ_min < TRANSLATION_RANK_TOL · σ_max` are degenerate.
pub const TRANSLATION_RANK_TOL: f64 = 1e-6;
pub const SUCCESS_ROT_DEG: f64 = 5.0;
pub const SUCCESS_TRANS_M: f64 = 1.0;

const SEED_PAIRS: usize = 6;
const MIN_SEED_SINE: f64 = 0.1;
const SIGN_REFINE_ITERS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegistrationResult {
    /// Maps the first set's frame into the second's.
    pub transform: RigidTransform,
    pub kappa: f64,
    pub translation_kappa: f64,
    pub num_lines: usize,
    pub num_planes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentError {
    /// Radians, in `[0, π]`.
    pub rot_error: f64,
    /// Meters.
    pub trans_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotationEstimate {
    pub rotation: Matrix3<f64>,
    pub kappa: f64,
    /// Per-match sign applied to the second landmark's direction or normal.
    pub signs: Vec<f64>,
}

fn axes(matches: &[(Landmark, Landmark)]) -> Result<Vec<(Vector3<f64>, Vector3<f64>)>> {
    matches
        .iter()
        .map(|(x, y)| {
            if x.kind() != y.kind() {
                return Err(Error::InvalidParameter(format!(
                    "match {} <-> {} pairs a {} with a {}",
                    x.id,
                    y.id,
                    x.kind(),
                    y.kind()
                )));
            }
            Ok((*x.axis(), *y.axis()))
        })
        .collect()
}

fn correlation(axes: &[(Vector3<f64>, Vector3<f64>)], signs: &[f64]) -> Matrix3<f64> {
    axes.iter()
        .zip(signs)
        .fold(Matrix3::zeros(), |h, ((src, dst), s)| h + src * dst.transpose() * *s)
}

/// `R = V diag(1, 1, det(VUᵀ)) Uᵀ` for `H = UΣVᵀ`; maximizes `Σ dstᵀ R src`.
fn rotation_from_correlation(h: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = linalg::svd(&to_dynamic(h));
    let u = to_static(&svd.completed_u());
    let v = to_static(&svd.v);
    let det = (v * u.transpose()).determinant();
    let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, det.signum()));
    v * fix * u.transpose()
}

fn to_dynamic(m: &Matrix3<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(3, 3, m.as_slice())
}

fn to_static(m: &DMatrix<f64>) -> Matrix3<f64> {
    Matrix3::from_column_slice(m.as_slice())
}

fn condition(h: &Matrix3<f64>) -> f64 {
    let sv = linalg::singular_values(&to_dynamic(h));
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        sv.max() / min
    }
}

fn signs_for(axes: &[(Vector3<f64>, Vector3<f64>)], r: &Matrix3<f64>) -> Vec<f64> {
    axes.iter()
        .map(|(src, dst)| if dst.dot(&(r * src)) >= 0.0 { 1.0 } else { -1.0 })
        .collect()
}

fn residual(axes: &[(Vector3<f64>, Vector3<f64>)], r: &Matrix3<f64>) -> f64 {
    axes.iter()
        .map(|(src, dst)| 1.0 - dst.dot(&(r * src)).abs())
        .sum()
}

/// Alternates rotation and sign updates until the signs settle.
fn refine_signs(axes: &[(Vector3<f64>, Vector3<f64>)], mut signs: Vec<f64>) -> (Matrix3<f64>, Vec<f64>) {
    let mut r = rotation_from_correlation(&correlation(axes, &signs));
    for _ in 0..SIGN_REFINE_ITERS {
        let next = signs_for(axes, &r);
        if next == signs {
            break;
        }
        signs = next;
        r = rotation_from_correlation(&correlation(axes, &signs));
    }
    (r, signs)
}

/// Rotation from matched directions and normals.
///
/// Directions of lines and normals of planes are only defined up to sign, and
/// canonical signs in two frames need not agree. Candidates are seeded from
/// the canonical signs and from every sign choice on a few well-separated
/// match pairs; each is refined by re-deriving signs from its rotation, and
/// the one with the smallest axis residual wins.
pub fn estimate_rotation(matches: &[(Landmark, Landmark)]) -> Result<RotationEstimate> {
    let axes = axes(matches)?;
    if axes.len() < 2 {
        return Err(Error::Degenerate {
            stage: DegenerateStage::Rotation,
            kappa: f64::INFINITY,
        });
    }

    let mut candidates = vec![refine_signs(&axes, vec![1.0; axes.len()])];
    let mut seeds = Vec::new();
    'outer: for i in 0..axes.len() {
        for j in i + 1..axes.len() {
            if axes[i].0.cross(&axes[j].0).norm() > MIN_SEED_SINE {
                seeds.push((i, j));
                if seeds.len() == SEED_PAIRS {
                    break 'outer;
                }
            }
        }
    }
    for &(i, j) in &seeds {
        for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            let pair = [axes[i], axes[j]];
            let r = rotation_from_correlation(&correlation(&pair, &[si, sj]));
            candidates.push(refine_signs(&axes, signs_for(&axes, &r)));
        }
    }

    let mut best = 0;
    let mut best_res = residual(&axes, &candidates[0].0);
    for (k, (r, _)) in candidates.iter().enumerate().skip(1) {
        let res = residual(&axes, r);
        if res < best_res - 1e-15 {
            best = k;
            best_res = res;
        }
    }
    let (rotation, signs) = candidates.swap_remove(best);
    let kappa = condition(&correlation(&axes, &signs));
    if !(kappa < KAPPA_MAX) {
        return Err(Error::Degenerate {
            stage: DegenerateStage::Rotation,
            kappa,
        });
    }
    Ok(RotationEstimate {
        rotation,
        kappa,
        signs,
    })
}

/// Least-squares translation given the rotation.
///
/// Planes contribute `(R n)ᵀ t = d' - d` (after aligning the sign of the
/// second normal with `R n`); lines contribute the direction-orthogonal
/// residual `(I - a'a'ᵀ) t = (I - a'a'ᵀ)(b0' - R b0)` with `a' = R a`.
pub fn estimate_translation(matches: &[(Landmark, Landmark)], rotation: &Matrix3<f64>) -> Result<(Vector3<f64>, f64)> {
    let mut rows: Vec<[f64; 3]> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for (x, y) in matches {
        match (&x.geometry, &y.geometry) {
            (Geometry::Plane(p), Geometry::Plane(q)) => {
                let n = rotation * p.normal();
                let s = if n.dot(q.normal()) >= 0.0 { 1.0 } else { -1.0 };
                rows.push([n.x, n.y, n.z]);
                rhs.push(s * q.offset() - p.offset());
            }
            (Geometry::Line(l), Geometry::Line(k)) => {
                let a = rotation * l.direction();
                let proj = Matrix3::identity() - a * a.transpose();
                let r = proj * (k.closest_point() - rotation * l.closest_point());
                for i in 0..3 {
                    rows.push([proj[(i, 0)], proj[(i, 1)], proj[(i, 2)]]);
                    rhs.push(r[i]);
                }
            }
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "match {} <-> {} mixes landmark kinds",
                    x.id, y.id
                )))
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Degenerate {
            stage: DegenerateStage::Translation,
            kappa: f64::INFINITY,
        });
    }
    let a = DMatrix::from_fn(rows.len(), 3, |i, j| rows[i][j]);
    let b = DVector::from_vec(rhs);
    let svd = linalg::svd(&a);
    let max = svd.singular_values.max();
    let min = if rows.len() >= 3 { svd.singular_values.min() } else { 0.0 };
    let kappa = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(min >= TRANSLATION_RANK_TOL * max) || max == 0.0 {
        return Err(Error::Degenerate {
            stage: DegenerateStage::Translation,
            kappa,
        });
    }
    let t = svd.solve(&b, 0.0);
    Ok((Vector3::new(t[0], t[1], t[2]), kappa))
}

/// Rotation, then translation. `matches` pair landmarks of the first frame
/// with landmarks of the second; the result maps the first frame into the
/// second.
pub fn estimate_transform(matches: &[(Landmark, Landmark)]) -> Result<RegistrationResult> {
    let rot = estimate_rotation(matches)?;
    let (t, translation_kappa) = estimate_translation(matches, &rot.rotation)?;
    let num_planes = matches
        .iter()
        .filter(|(x, _)| matches!(x.geometry, Geometry::Plane(_)))
        .count();
    Ok(RegistrationResult {
        transform: RigidTransform::new(rot.rotation, t)?,
        kappa: rot.kappa,
        translation_kappa,
        num_lines: matches.len() - num_planes,
        num_planes,
    })
}

/// Rotation error from the chordal distance, `‖R₁ - R₂‖_F = 2√2 sin(θ/2)`,
/// which stays accurate for tiny angles where the trace formula does not.
pub fn alignment_error(est: &RigidTransform, truth: &RigidTransform) -> AlignmentError {
    let chord = (est.rotation() - truth.rotation()).norm() / (2.0 * std::f64::consts::SQRT_2);
    AlignmentError {
        rot_error: 2.0 * chord.min(1.0).asin(),
        trans_error: (est.translation() - truth.translation()).norm(),
    }
}

/// Within 5° and 1 m of the ground truth.
pub fn is_success(err: &AlignmentError) -> bool {
    err.rot_error <= SUCCESS_ROT_DEG.to_radians() && err.trans_error <= SUCCESS_TRANS_M
}
