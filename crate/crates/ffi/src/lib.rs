//! C ABI over the `graffmatch` library.
//!
//! Landmark sets and match results are opaque heap handles owned by the
//! caller and released with their `_free` function. Every fallible call
//! returns a [`GmStatus`]; details of the most recent failure on the calling
//! thread are available from [`gm_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use graffmatch::association::{MatchConfig, Metric};
use graffmatch::landmarks::{load_landmark_set, save_landmark_set, Landmark, LandmarkSet, Line3, Plane3};
use graffmatch::manifold::graff_distance;
use graffmatch::nalgebra::Vector3;
use graffmatch::pipeline::match_sets;
use graffmatch::registration::RegistrationResult;
use graffmatch::solver::{CorrespondenceSet, SolverConfig};
use graffmatch::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Validation = 5,
    Degenerate = 6,
    UndefinedCp = 7,
    MissingAttribute = 8,
    EmptySet = 9,
    Internal = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GmMetric {
    Graff = 0,
    GraffNaive = 1,
    Centroid = 2,
    Cp = 3,
}

impl From<GmMetric> for Metric {
    fn from(m: GmMetric) -> Self {
        match m {
            GmMetric::Graff => Metric::Graff,
            GmMetric::GraffNaive => Metric::GraffNaive,
            GmMetric::Centroid => Metric::Centroid,
            GmMetric::Cp => Metric::Cp,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmMatchConfig {
    pub epsilon: f64,
    pub sigma: f64,
    pub rho: f64,
    pub metric: GmMetric,
    /// Seed of the solver's initialization.
    pub seed: u64,
}

/// Opaque landmark set.
pub struct GmLandmarkSet {
    inner: LandmarkSet,
}

/// Opaque matching outcome.
pub struct GmMatchResult {
    correspondences: CorrespondenceSet,
    registration: Result<RegistrationResult, String>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let msg = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("NUL bytes removed"));
}

fn status_of(e: &Error) -> GmStatus {
    match e {
        Error::Io { .. } => GmStatus::Io,
        Error::Parse { .. } => GmStatus::Parse,
        Error::Validation(_) => GmStatus::Validation,
        Error::Degenerate { .. } => GmStatus::Degenerate,
        Error::UndefinedCp { .. } => GmStatus::UndefinedCp,
        Error::MissingAttribute { .. } => GmStatus::MissingAttribute,
        Error::EmptySet => GmStatus::EmptySet,
        Error::RankDeficient { .. }
        | Error::DimensionMismatch { .. }
        | Error::InvalidParameter(_)
        | Error::TooLarge { .. }
        | Error::EmptySelection => GmStatus::InvalidArgument,
        _ => GmStatus::Internal,
    }
}

fn fail(e: Error) -> GmStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn null(name: &str) -> GmStatus {
    set_error(format!("`{name}` is null"));
    GmStatus::NullPointer
}

/// Runs `f`, converting panics into `GM_STATUS_INTERNAL`.
fn guarded(f: impl FnOnce() -> GmStatus) -> GmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == GmStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => {
            set_error("internal panic");
            GmStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, GmStatus> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("`{name}` is not valid UTF-8"));
        GmStatus::InvalidArgument
    })
}

unsafe fn vec3_arg(p: *const f64, name: &str) -> Result<Vector3<f64>, GmStatus> {
    if p.is_null() {
        return Err(null(name));
    }
    let s = std::slice::from_raw_parts(p, 3);
    Ok(Vector3::new(s[0], s[1], s[2]))
}

unsafe fn opt_vec3_arg(p: *const f64) -> Option<Vector3<f64>> {
    (!p.is_null()).then(|| {
        let s = std::slice::from_raw_parts(p, 3);
        Vector3::new(s[0], s[1], s[2])
    })
}

unsafe fn emit_set(out: *mut *mut GmLandmarkSet, set: LandmarkSet) {
    *out = Box::into_raw(Box::new(GmLandmarkSet { inner: set }));
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn gm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Default gate, falloff and scaling for `metric`.
#[no_mangle]
pub extern "C" fn gm_match_config_default(metric: GmMetric) -> GmMatchConfig {
    let c = MatchConfig::for_metric(metric.into());
    GmMatchConfig {
        epsilon: c.epsilon,
        sigma: c.sigma,
        rho: c.rho,
        metric,
        seed: 0,
    }
}

/// Creates an empty set. `label` may be null.
///
/// # Safety
/// `label` must be null or a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gm_landmark_set_new(label: *const c_char, out: *mut *mut GmLandmarkSet) -> GmStatus {
    guarded(|| {
        if out.is_null() {
            return null("out");
        }
        let label = if label.is_null() {
            ""
        } else {
            match str_arg(label, "label") {
                Ok(s) => s,
                Err(s) => return s,
            }
        };
        match LandmarkSet::new(label, Vec::new()) {
            Ok(set) => {
                emit_set(out, set);
                GmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Reads a landmark-set JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gm_landmark_set_load(path: *const c_char, out: *mut *mut GmLandmarkSet) -> GmStatus {
    guarded(|| {
        if out.is_null() {
            return null("out");
        }
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match load_landmark_set(path) {
            Ok(set) => {
                emit_set(out, set);
                GmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Parses a landmark set from a JSON string.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gm_landmark_set_from_json(json: *const c_char, out: *mut *mut GmLandmarkSet) -> GmStatus {
    guarded(|| {
        if out.is_null() {
            return null("out");
        }
        let text = match str_arg(json, "json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match LandmarkSet::from_json(text, Path::new("<memory>")) {
            Ok(set) => {
                emit_set(out, set);
                GmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Writes `set` as JSON to `path`.
///
/// # Safety
/// `set` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn gm_landmark_set_save(set: *const GmLandmarkSet, path: *const c_char) -> GmStatus {
    guarded(|| {
        let Some(set) = set.as_ref() else {
            return null("set");
        };
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match save_landmark_set(&set.inner, path) {
            Ok(()) => GmStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

fn push(set: &mut GmLandmarkSet, lm: Landmark) -> GmStatus {
    if set.inner.get(lm.id).is_some() {
        set_error(format!("duplicate landmark id {}", lm.id));
        return GmStatus::Validation;
    }
    set.inner.landmarks.push(lm);
    GmStatus::Ok
}

/// Appends a line with direction `direction[3]` through `point[3]`.
/// `centroid` may be null.
///
/// # Safety
/// `set` must be a live handle; array arguments must hold 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn gm_landmark_set_add_line(
    set: *mut GmLandmarkSet,
    id: u64,
    direction: *const f64,
    point: *const f64,
    centroid: *const f64,
) -> GmStatus {
    guarded(|| {
        let Some(set) = set.as_mut() else {
            return null("set");
        };
        let (a, p) = match (vec3_arg(direction, "direction"), vec3_arg(point, "point")) {
            (Ok(a), Ok(p)) => (a, p),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        match Line3::new(a, p) {
            Ok(mut line) => {
                line.centroid = opt_vec3_arg(centroid);
                push(set, Landmark::line(id, line))
            }
            Err(e) => fail(e),
        }
    })
}

/// Appends the plane `normalᵀx = d`. `centroid` may be null.
///
/// # Safety
/// `set` must be a live handle; array arguments must hold 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn gm_landmark_set_add_plane(
    set: *mut GmLandmarkSet,
    id: u64,
    normal: *const f64,
    d: f64,
    centroid: *const f64,
) -> GmStatus {
    guarded(|| {
        let Some(set) = set.as_mut() else {
            return null("set");
        };
        let n = match vec3_arg(normal, "normal") {
            Ok(n) => n,
            Err(s) => return s,
        };
        match Plane3::new(n, d) {
            Ok(mut plane) => {
                plane.centroid = opt_vec3_arg(centroid);
                push(set, Landmark::plane(id, plane))
            }
            Err(e) => fail(e),
        }
    })
}

/// Number of landmarks; 0 for a null handle.
///
/// # Safety
/// `set` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gm_landmark_set_len(set: *const GmLandmarkSet) -> usize {
    set.as_ref().map_or(0, |s| s.inner.len())
}

/// # Safety
/// `set` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gm_landmark_set_free(set: *mut GmLandmarkSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// `d_Graff` between landmark `id_a` of `a` and landmark `id_b` of `b`.
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gm_landmark_distance(
    a: *const GmLandmarkSet,
    id_a: u64,
    b: *const GmLandmarkSet,
    id_b: u64,
    rho: f64,
    out: *mut f64,
) -> GmStatus {
    guarded(|| {
        let (Some(a), Some(b)) = (a.as_ref(), b.as_ref()) else {
            return null("set");
        };
        if out.is_null() {
            return null("out");
        }
        let (Some(x), Some(y)) = (a.inner.get(id_a), b.inner.get(id_b)) else {
            set_error(format!("unknown landmark id {id_a} or {id_b}"));
            return GmStatus::InvalidArgument;
        };
        if !(rho.is_finite() && rho > 0.0) {
            set_error(format!("rho must be positive, got {rho}"));
            return GmStatus::InvalidArgument;
        }
        match graff_distance(&x.to_graff(), &y.to_graff(), rho) {
            Ok(d) => {
                *out = d;
                GmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Matches `a` against `b`. A degenerate registration still produces a
/// result; [`gm_match_result_transform`] then reports it.
///
/// # Safety
/// `a`, `b` must be live handles, `config` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gm_match(
    a: *const GmLandmarkSet,
    b: *const GmLandmarkSet,
    config: *const GmMatchConfig,
    out: *mut *mut GmMatchResult,
) -> GmStatus {
    guarded(|| {
        let (Some(a), Some(b)) = (a.as_ref(), b.as_ref()) else {
            return null("set");
        };
        let Some(cfg) = config.as_ref() else {
            return null("config");
        };
        if out.is_null() {
            return null("out");
        }
        let mc = MatchConfig {
            epsilon: cfg.epsilon,
            sigma: cfg.sigma,
            rho: cfg.rho,
            metric: cfg.metric.into(),
        };
        let sc = SolverConfig {
            seed: cfg.seed,
            ..SolverConfig::default()
        };
        match match_sets(&a.inner, &b.inner, &mc, &sc) {
            Ok(o) => {
                *out = Box::into_raw(Box::new(GmMatchResult {
                    correspondences: o.correspondences,
                    registration: o.registration.map_err(|e| e.to_string()),
                }));
                GmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Number of selected correspondences; 0 for a null handle.
///
/// # Safety
/// `res` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gm_match_result_len(res: *const GmMatchResult) -> usize {
    res.as_ref().map_or(0, |r| r.correspondences.len())
}

/// Ids of the `index`-th selected correspondence.
///
/// # Safety
/// `res` must be a live handle; `id_a` and `id_b` writable.
#[no_mangle]
pub unsafe extern "C" fn gm_match_result_pair(
    res: *const GmMatchResult,
    index: usize,
    id_a: *mut u64,
    id_b: *mut u64,
) -> GmStatus {
    guarded(|| {
        let Some(r) = res.as_ref() else {
            return null("result");
        };
        if id_a.is_null() || id_b.is_null() {
            return null("id");
        }
        let Some(h) = r.correspondences.selected.get(index) else {
            set_error(format!("index {index} out of range"));
            return GmStatus::InvalidArgument;
        };
        *id_a = h.a;
        *id_b = h.b;
        GmStatus::Ok
    })
}

/// Estimated transform: `rotation[9]` row-major and `translation[3]`.
/// Returns `GM_STATUS_DEGENERATE` when registration failed.
///
/// # Safety
/// `res` must be a live handle; outputs must hold 9 and 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn gm_match_result_transform(
    res: *const GmMatchResult,
    rotation: *mut f64,
    translation: *mut f64,
) -> GmStatus {
    guarded(|| {
        let Some(r) = res.as_ref() else {
            return null("result");
        };
        if rotation.is_null() || translation.is_null() {
            return null("output");
        }
        match &r.registration {
            Ok(reg) => {
                ptr::copy_nonoverlapping(reg.transform.rotation_row_major().as_ptr(), rotation, 9);
                let t = reg.transform.translation();
                ptr::copy_nonoverlapping([t.x, t.y, t.z].as_ptr(), translation, 3);
                GmStatus::Ok
            }
            Err(msg) => {
                set_error(msg.clone());
                GmStatus::Degenerate
            }
        }
    })
}

/// Condition numbers of the rotation and translation solves.
///
/// # Safety
/// `res` must be a live handle; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn gm_match_result_kappa(
    res: *const GmMatchResult,
    kappa: *mut f64,
    translation_kappa: *mut f64,
) -> GmStatus {
    guarded(|| {
        let Some(r) = res.as_ref() else {
            return null("result");
        };
        if kappa.is_null() || translation_kappa.is_null() {
            return null("output");
        }
        match &r.registration {
            Ok(reg) => {
                *kappa = reg.kappa;
                *translation_kappa = reg.translation_kappa;
                GmStatus::Ok
            }
            Err(msg) => {
                set_error(msg.clone());
                GmStatus::Degenerate
            }
        }
    })
}

/// Density of the selected set; NaN for a null handle.
///
/// # Safety
/// `res` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gm_match_result_density(res: *const GmMatchResult) -> f64 {
    res.as_ref().map_or(f64::NAN, |r| r.correspondences.density)
}

/// # Safety
/// `res` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gm_match_result_free(res: *mut GmMatchResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}
