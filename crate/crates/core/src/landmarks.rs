//! Line and plane landmarks in ℝ³, rigid transforms, and landmark-set files.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::GraffElement;

/// Tolerance on unit norms of directions and normals.
pub const UNIT_TOL: f64 = 1e-10;
/// Tolerance on `aᵀb0 = 0` for lines.
pub const ORTHO_TOL: f64 = 1e-9;
/// Offsets below this are treated as passing through the origin.
pub const ORIGIN_TOL: f64 = 1e-9;
/// Components below this are skipped when fixing the sign of a vector.
const SIGN_TOL: f64 = 1e-12;

/// Flips `v` so its first non-negligible component is positive.
fn leading_positive(v: Vector3<f64>) -> Vector3<f64> {
    for i in 0..3 {
        if v[i].abs() > SIGN_TOL {
            return if v[i] < 0.0 { -v } else { v };
        }
    }
    v
}

fn unit(v: Vector3<f64>, what: &str) -> Result<Vector3<f64>> {
    let n = v.norm();
    if !(n.is_finite() && n > 1e-12) {
        return Err(Error::InvalidParameter(format!("{what} must be a nonzero vector")));
    }
    Ok(v / n)
}

/// An infinite 3D line stored by unit direction and closest point to the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Line3 {
    direction: Vector3<f64>,
    closest_point: Vector3<f64>,
    pub centroid: Option<Vector3<f64>>,
    pub length: Option<f64>,
}

impl Line3 {
    /// Line with the given direction through `point`.
    pub fn new(direction: Vector3<f64>, point: Vector3<f64>) -> Result<Self> {
        let a = leading_positive(unit(direction, "line direction")?);
        let b0 = point - a * a.dot(&point);
        Ok(Self {
            direction: a,
            closest_point: b0,
            centroid: None,
            length: None,
        })
    }

    pub fn through_points(p: Vector3<f64>, q: Vector3<f64>) -> Result<Self> {
        Self::new(q - p, p)
    }

    pub fn with_centroid(mut self, c: Vector3<f64>) -> Self {
        self.centroid = Some(c);
        self
    }

    pub fn with_length(mut self, len: f64) -> Self {
        self.length = Some(len);
        self
    }

    pub fn direction(&self) -> &Vector3<f64> {
        &self.direction
    }

    pub fn closest_point(&self) -> &Vector3<f64> {
        &self.closest_point
    }

    /// Distance from `x` to the line.
    pub fn distance_to(&self, x: &Vector3<f64>) -> f64 {
        let r = x - self.closest_point;
        (r - self.direction * self.direction.dot(&r)).norm()
    }
}

/// An infinite plane in Hesse normal form, `nᵀx = d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane3 {
    normal: Vector3<f64>,
    offset: f64,
    pub centroid: Option<Vector3<f64>>,
    pub area: Option<f64>,
}

impl Plane3 {
    pub fn new(normal: Vector3<f64>, d: f64) -> Result<Self> {
        let len = normal.norm();
        let n = unit(normal, "plane normal")?;
        let (normal, offset) = canonical_plane(n, d / len);
        Ok(Self {
            normal,
            offset,
            centroid: None,
            area: None,
        })
    }

    pub fn through_point(normal: Vector3<f64>, point: Vector3<f64>) -> Result<Self> {
        let n = unit(normal, "plane normal")?;
        Self::new(n, n.dot(&point))
    }

    pub fn with_centroid(mut self, c: Vector3<f64>) -> Self {
        self.centroid = Some(c);
        self
    }

    pub fn with_area(mut self, area: f64) -> Self {
        self.area = Some(area);
        self
    }

    pub fn normal(&self) -> &Vector3<f64> {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn signed_distance(&self, x: &Vector3<f64>) -> f64 {
        self.normal.dot(x) - self.offset
    }
}

fn canonical_plane(n: Vector3<f64>, d: f64) -> (Vector3<f64>, f64) {
    if d.abs() < ORIGIN_TOL {
        let flipped = leading_positive(n);
        let d = if flipped == n { d } else { -d };
        (flipped, d)
    } else if d < 0.0 {
        (-n, -d)
    } else {
        (n, d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LandmarkKind {
    Line,
    Plane,
}

impl std::fmt::Display for LandmarkKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LandmarkKind::Line => write!(f, "line"),
            LandmarkKind::Plane => write!(f, "plane"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Line(Line3),
    Plane(Plane3),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Landmark {
    pub id: u64,
    pub geometry: Geometry,
}

impl Landmark {
    pub fn line(id: u64, line: Line3) -> Self {
        Self {
            id,
            geometry: Geometry::Line(line),
        }
    }

    pub fn plane(id: u64, plane: Plane3) -> Self {
        Self {
            id,
            geometry: Geometry::Plane(plane),
        }
    }

    pub fn kind(&self) -> LandmarkKind {
        match self.geometry {
            Geometry::Line(_) => LandmarkKind::Line,
            Geometry::Plane(_) => LandmarkKind::Plane,
        }
    }

    pub fn to_graff(&self) -> GraffElement {
        match &self.geometry {
            Geometry::Line(l) => line_to_graff(l),
            Geometry::Plane(p) => plane_to_graff(p),
        }
    }

    pub fn transformed(&self, t: &RigidTransform) -> Self {
        let geometry = match &self.geometry {
            Geometry::Line(l) => Geometry::Line(transform_line(l, t)),
            Geometry::Plane(p) => Geometry::Plane(transform_plane(p, t)),
        };
        Self {
            id: self.id,
            geometry,
        }
    }

    pub fn centroid(&self) -> Option<&Vector3<f64>> {
        match &self.geometry {
            Geometry::Line(l) => l.centroid.as_ref(),
            Geometry::Plane(p) => p.centroid.as_ref(),
        }
    }

    /// Direction for lines, normal for planes.
    pub fn axis(&self) -> &Vector3<f64> {
        match &self.geometry {
            Geometry::Line(l) => l.direction(),
            Geometry::Plane(p) => p.normal(),
        }
    }
}

/// Landmarks observed in a single frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LandmarkSet {
    pub frame_label: String,
    pub landmarks: Vec<Landmark>,
}

impl LandmarkSet {
    pub fn new(frame_label: impl Into<String>, landmarks: Vec<Landmark>) -> Result<Self> {
        let set = Self {
            frame_label: frame_label.into(),
            landmarks,
        };
        set.check_unique_ids()?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.landmarks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.landmarks.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&Landmark> {
        self.landmarks.iter().find(|l| l.id == id)
    }

    pub fn count(&self, kind: LandmarkKind) -> usize {
        self.landmarks.iter().filter(|l| l.kind() == kind).count()
    }

    pub fn transformed(&self, t: &RigidTransform) -> Self {
        Self {
            frame_label: self.frame_label.clone(),
            landmarks: self.landmarks.iter().map(|l| l.transformed(t)).collect(),
        }
    }

    fn check_unique_ids(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for l in &self.landmarks {
            if !seen.insert(l.id) {
                return Err(Error::Validation(format!("duplicate landmark id {}", l.id)));
            }
        }
        Ok(())
    }
}

/// A rigid motion `x -> R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let orth = (rotation.transpose() * rotation - Matrix3::identity()).norm();
        let det = rotation.determinant();
        if orth > 1e-10 || (det - 1.0).abs() > 1e-10 {
            return Err(Error::Validation(format!(
                "not a rotation matrix (|RᵀR - I| = {orth:.3e}, det = {det})"
            )));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_rotation(rotation: Rotation3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: *rotation.matrix(),
            translation,
        }
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * x + self.translation
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn compose(&self, first: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * first.rotation,
            translation: self.rotation * first.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Row-major rotation entries.
    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
        ]
    }

    pub fn from_row_major(r: &[f64; 9], t: &[f64; 3]) -> Result<Self> {
        Self::new(Matrix3::from_row_slice(r), Vector3::from_column_slice(t))
    }
}

pub fn line_to_graff(l: &Line3) -> GraffElement {
    GraffElement::from_parts(
        DMatrix::from_column_slice(3, 1, l.direction.as_slice()),
        DVector::from_column_slice(l.closest_point.as_slice()),
    )
    .expect("Line3 invariants imply Graff invariants")
}

/// Orthonormal basis of the plane orthogonal to `n`: start from the standard
/// basis vector least aligned with `n`, project it, and complete with a cross
/// product.
pub fn plane_basis(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let mut pick = 0;
    for i in 1..3 {
        if n[i].abs() < n[pick].abs() {
            pick = i;
        }
    }
    let e = Vector3::ith(pick, 1.0);
    let u = (e - n * n.dot(&e)).normalize();
    let w = n.cross(&u);
    (u, w)
}

pub fn plane_to_graff(p: &Plane3) -> GraffElement {
    let (u, w) = plane_basis(&p.normal);
    let basis = DMatrix::from_columns(&[
        DVector::from_column_slice(u.as_slice()),
        DVector::from_column_slice(w.as_slice()),
    ]);
    let b0 = p.normal * p.offset;
    GraffElement::from_parts(basis, DVector::from_column_slice(b0.as_slice()))
        .expect("Plane3 invariants imply Graff invariants")
}

pub fn transform_line(l: &Line3, t: &RigidTransform) -> Line3 {
    let a = leading_positive(t.rotation * l.direction);
    let moved = t.apply(&l.closest_point);
    Line3 {
        direction: a,
        closest_point: moved - a * a.dot(&moved),
        centroid: l.centroid.map(|c| t.apply(&c)),
        length: l.length,
    }
}

pub fn transform_plane(p: &Plane3, t: &RigidTransform) -> Plane3 {
    let n = t.rotation * p.normal;
    let d = p.offset + n.dot(&t.translation);
    let (normal, offset) = canonical_plane(n, d);
    Plane3 {
        normal,
        offset,
        centroid: p.centroid.map(|c| t.apply(&c)),
        area: p.area,
    }
}

/// Closest-point parameterization: `d·n` for planes, `b0` for lines.
pub fn cp_vector(lm: &Landmark) -> Result<Vector3<f64>> {
    let cp = match &lm.geometry {
        Geometry::Line(l) => l.closest_point,
        Geometry::Plane(p) => p.normal * p.offset,
    };
    if cp.norm() < ORIGIN_TOL {
        return Err(Error::UndefinedCp { id: lm.id });
    }
    Ok(cp)
}

/// The observed centroid carried by the landmark.
pub fn centroid_of(lm: &Landmark) -> Result<Vector3<f64>> {
    lm.centroid().copied().ok_or(Error::MissingAttribute {
        id: lm.id,
        attribute: "centroid",
    })
}

// ---- file format ----

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetFile {
    frame_label: String,
    landmarks: Vec<LandmarkRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum LandmarkRecord {
    Line(LineRecord),
    Plane(PlaneRecord),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineRecord {
    id: u64,
    direction: [f64; 3],
    closest_point: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    centroid: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    length: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlaneRecord {
    id: u64,
    normal: [f64; 3],
    d: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    centroid: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    area: Option<f64>,
}

fn arr(v: &Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

fn finite(id: u64, field: &str, xs: &[f64]) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "landmark {id}: `{field}` must be finite"
        )))
    }
}

fn positive(id: u64, field: &str, x: Option<f64>) -> Result<()> {
    match x {
        Some(v) if !(v.is_finite() && v > 0.0) => Err(Error::Validation(format!(
            "landmark {id}: `{field}` must be positive"
        ))),
        _ => Ok(()),
    }
}

impl LandmarkRecord {
    fn from_landmark(lm: &Landmark) -> Self {
        match &lm.geometry {
            Geometry::Line(l) => LandmarkRecord::Line(LineRecord {
                id: lm.id,
                direction: arr(&l.direction),
                closest_point: arr(&l.closest_point),
                centroid: l.centroid.as_ref().map(arr),
                length: l.length,
            }),
            Geometry::Plane(p) => LandmarkRecord::Plane(PlaneRecord {
                id: lm.id,
                normal: arr(&p.normal),
                d: p.offset,
                centroid: p.centroid.as_ref().map(arr),
                area: p.area,
            }),
        }
    }

    /// Re-validates geometry. Values are kept bit-exact; only exact sign
    /// flips are applied to reach the canonical orientation.
    fn into_landmark(self) -> Result<Landmark> {
        match self {
            LandmarkRecord::Line(r) => {
                finite(r.id, "direction", &r.direction)?;
                finite(r.id, "closest_point", &r.closest_point)?;
                if let Some(c) = &r.centroid {
                    finite(r.id, "centroid", c)?;
                }
                positive(r.id, "length", r.length)?;
                let a = Vector3::from(r.direction);
                let b0 = Vector3::from(r.closest_point);
                if (a.norm() - 1.0).abs() > UNIT_TOL {
                    return Err(Error::Validation(format!(
                        "landmark {}: direction not unit (norm {})",
                        r.id,
                        a.norm()
                    )));
                }
                if a.dot(&b0).abs() > ORTHO_TOL * b0.norm().max(1.0) {
                    return Err(Error::Validation(format!(
                        "landmark {}: closest_point not orthogonal to direction",
                        r.id
                    )));
                }
                Ok(Landmark::line(
                    r.id,
                    Line3 {
                        direction: leading_positive(a),
                        closest_point: b0,
                        centroid: r.centroid.map(Vector3::from),
                        length: r.length,
                    },
                ))
            }
            LandmarkRecord::Plane(r) => {
                finite(r.id, "normal", &r.normal)?;
                finite(r.id, "d", &[r.d])?;
                if let Some(c) = &r.centroid {
                    finite(r.id, "centroid", c)?;
                }
                positive(r.id, "area", r.area)?;
                let n = Vector3::from(r.normal);
                if (n.norm() - 1.0).abs() > UNIT_TOL {
                    return Err(Error::Validation(format!(
                        "landmark {}: normal not unit (norm {})",
                        r.id,
                        n.norm()
                    )));
                }
                let (normal, offset) = canonical_plane(n, r.d);
                Ok(Landmark::plane(
                    r.id,
                    Plane3 {
                        normal,
                        offset,
                        centroid: r.centroid.map(Vector3::from),
                        area: r.area,
                    },
                ))
            }
        }
    }
}

impl LandmarkSet {
    pub fn to_json(&self) -> String {
        let file = SetFile {
            frame_label: self.frame_label.clone(),
            landmarks: self
                .landmarks
                .iter()
                .map(LandmarkRecord::from_landmark)
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("landmark sets always serialize")
    }

    /// Parses the JSON document; `origin` labels errors.
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let file: SetFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let landmarks = file
            .landmarks
            .into_iter()
            .map(LandmarkRecord::into_landmark)
            .collect::<Result<Vec<_>>>()?;
        LandmarkSet::new(file.frame_label, landmarks)
    }
}

pub fn load_landmark_set(path: impl AsRef<Path>) -> Result<LandmarkSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    LandmarkSet::from_json(&text, path)
}

pub fn save_landmark_set(set: &LandmarkSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, set.to_json()).map_err(|e| Error::io(path, e))
}
