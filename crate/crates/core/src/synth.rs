//! Seeded synthetic scenes and benchmark pairs.
//!
//! A scene is a set of random lines and planes. A pair observes the scene
//! twice: the first view as generated, the second under a random rigid
//! motion with observation noise, dropout and optional spurious landmarks.
//! Everything is a pure function of the configuration.

use std::fmt;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, Rotation3, Unit, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::assignment::linear_sum_assignment;
use crate::association::{consistency, distance_matrix, enumerate_hypotheses, MatchConfig, DEFAULT_RHO};
use crate::error::{Error, Result};
use crate::landmarks::{
    load_landmark_set, save_landmark_set, Geometry, Landmark, LandmarkKind, LandmarkSet, Line3, Plane3,
    RigidTransform,
};
use crate::manifold::graff_distance;
use crate::registration::estimate_transform;
use crate::solver::CorrespondenceSet;

/// Rejection sampling gives up on a landmark after this many draws.
pub const MAX_ATTEMPTS: usize = 1000;
/// Minimum `d_Graff` between any two generated scene landmarks.
pub const MIN_SEPARATION: f64 = 0.05;
pub const DEFAULT_ORACLE_GATE: f64 = 0.1;

/// Scene and observation parameters. Angles are radians, lengths meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub seed: u64,
    pub num_lines: usize,
    pub num_planes: usize,
    /// Half-width of the cube that holds landmark anchor points.
    pub extent: f64,
    /// Yaw about the vertical axis is drawn from `[-rotation_range, rotation_range]`.
    pub rotation_range: f64,
    /// Tilt about a random horizontal axis is drawn from `[-tilt_range, tilt_range]`.
    pub tilt_range: f64,
    /// Upper bound on the translation norm.
    pub translation_range: f64,
    pub direction_noise: f64,
    pub offset_noise: f64,
    /// Probability that a landmark is missing from the second view.
    pub dropout: f64,
    /// Extra unmatched landmarks added to each view.
    pub spurious: usize,
    /// Std of the in-subspace offset applied to second-view centroids,
    /// emulating view-dependent segment and patch extents.
    pub centroid_jitter: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            num_lines: 15,
            num_planes: 15,
            extent: 40.0,
            rotation_range: std::f64::consts::PI,
            tilt_range: 10f64.to_radians(),
            translation_range: 16.0,
            direction_noise: 1f64.to_radians(),
            offset_noise: 0.05,
            dropout: 0.6,
            spurious: 0,
            centroid_jitter: 1.0,
        }
    }
}

impl SceneConfig {
    /// Noise-free, dropout-free variant of `self`.
    pub fn noiseless(mut self) -> Self {
        self.direction_noise = 0.0;
        self.offset_noise = 0.0;
        self.dropout = 0.0;
        self.spurious = 0;
        self.centroid_jitter = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("rotation_range", self.rotation_range),
            ("tilt_range", self.tilt_range),
            ("translation_range", self.translation_range),
            ("direction_noise", self.direction_noise),
            ("offset_noise", self.offset_noise),
            ("centroid_jitter", self.centroid_jitter),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if !(self.extent.is_finite() && self.extent > 0.0) {
            return Err(Error::InvalidParameter(format!("extent must be positive, got {}", self.extent)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidParameter(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkPair {
    pub set_i: LandmarkSet,
    pub set_j: LandmarkSet,
    /// Maps the first view's frame into the second's.
    pub truth: RigidTransform,
    /// `(id in set_i, id in set_j)`, ascending by the first id.
    pub true_matches: Vec<(u64, u64)>,
    pub iir: f64,
}

impl BenchmarkPair {
    /// Number of same-kind hypotheses, `l_i l_j + p_i p_j`.
    pub fn possible_matches(&self) -> usize {
        let (li, pi) = (self.set_i.count(LandmarkKind::Line), self.set_i.count(LandmarkKind::Plane));
        let (lj, pj) = (self.set_j.count(LandmarkKind::Line), self.set_j.count(LandmarkKind::Plane));
        li * lj + pi * pj
    }

    /// Landmark pairs for the recorded true matches.
    pub fn true_landmark_pairs(&self) -> Vec<(Landmark, Landmark)> {
        self.true_matches
            .iter()
            .map(|&(a, b)| {
                (
                    self.set_i.get(a).expect("true match id in set_i").clone(),
                    self.set_j.get(b).expect("true match id in set_j").clone(),
                )
            })
            .collect()
    }
}

fn iir_of(num_true: usize, possible: usize) -> f64 {
    if possible == 0 {
        0.0
    } else {
        num_true as f64 / possible as f64
    }
}

/// IIR difficulty band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    Case1,
    Case2,
    Case3,
}

impl Case {
    pub const ALL: [Case; 3] = [Case::Case1, Case::Case2, Case::Case3];
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::Case1 => "case1",
            Case::Case2 => "case2",
            Case::Case3 => "case3",
        })
    }
}

impl std::str::FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "case1" => Ok(Case::Case1),
            "case2" => Ok(Case::Case2),
            "case3" => Ok(Case::Case3),
            _ => Err(Error::InvalidParameter(format!("unknown case `{s}`"))),
        }
    }
}

pub fn case_of_iir(iir: f64) -> Case {
    if iir >= 0.05 {
        Case::Case1
    } else if iir >= 0.03 {
        Case::Case2
    } else {
        Case::Case3
    }
}

pub fn case_of(pair: &BenchmarkPair) -> Case {
    case_of_iir(pair.iir)
}

fn unit_vector(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::from(UnitSphere.sample(rng))
}

fn point_in_box(rng: &mut ChaCha8Rng, extent: f64) -> Vector3<f64> {
    Vector3::from_fn(|_, _| rng.random_range(-extent..=extent))
}

fn sample_landmark(rng: &mut ChaCha8Rng, kind: LandmarkKind, extent: f64) -> Result<Landmark> {
    let dir = unit_vector(rng);
    let p = point_in_box(rng, extent);
    Ok(match kind {
        LandmarkKind::Line => Landmark::line(0, Line3::new(dir, p)?.with_centroid(p)),
        LandmarkKind::Plane => Landmark::plane(0, Plane3::through_point(dir, p)?.with_centroid(p)),
    })
}

fn separated(candidate: &Landmark, accepted: &[Landmark], min_sep: f64) -> Result<bool> {
    let g = candidate.to_graff();
    for other in accepted {
        if graff_distance(&other.to_graff(), &g, DEFAULT_RHO)? <= min_sep {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Random scene with `num_lines` lines (ids `0..num_lines`) followed by
/// `num_planes` planes. Every landmark carries its anchor point as centroid.
pub fn generate_scene(cfg: &SceneConfig) -> Result<LandmarkSet> {
    generate_separated(cfg, MIN_SEPARATION)
}

fn generate_separated(cfg: &SceneConfig, min_sep: f64) -> Result<LandmarkSet> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let kinds = std::iter::repeat_n(LandmarkKind::Line, cfg.num_lines)
        .chain(std::iter::repeat_n(LandmarkKind::Plane, cfg.num_planes));
    let mut accepted: Vec<Landmark> = Vec::with_capacity(cfg.num_lines + cfg.num_planes);
    for (id, kind) in kinds.enumerate() {
        let mut attempts = 0;
        loop {
            if attempts == MAX_ATTEMPTS {
                return Err(Error::GenerationFailed { attempts });
            }
            attempts += 1;
            let mut lm = sample_landmark(&mut rng, kind, cfg.extent)?;
            if separated(&lm, &accepted, min_sep)? {
                lm.id = id as u64;
                accepted.push(lm);
                break;
            }
        }
    }
    LandmarkSet::new("scene", accepted)
}

fn random_truth(rng: &mut ChaCha8Rng, cfg: &SceneConfig) -> RigidTransform {
    let yaw = if cfg.rotation_range > 0.0 {
        rng.random_range(-cfg.rotation_range..=cfg.rotation_range)
    } else {
        0.0
    };
    let tilt = if cfg.tilt_range > 0.0 {
        rng.random_range(-cfg.tilt_range..=cfg.tilt_range)
    } else {
        0.0
    };
    let heading = rng.random_range(0.0..std::f64::consts::TAU);
    let tilt_axis = Unit::new_normalize(Vector3::new(heading.cos(), heading.sin(), 0.0));
    let rotation = Rotation3::from_axis_angle(&tilt_axis, tilt) * Rotation3::from_axis_angle(&Vector3::z_axis(), yaw);
    let t = unit_vector(rng) * rng.random_range(0.0..=cfg.translation_range);
    RigidTransform::from_rotation(rotation, t)
}

/// Rotation about a uniform axis by `|N(0, sigma)|`.
fn small_rotation(rng: &mut ChaCha8Rng, sigma: f64) -> Rotation3<f64> {
    let axis = Unit::new_unchecked(unit_vector(rng));
    let angle: f64 = Normal::new(0.0, sigma).expect("finite sigma").sample(rng);
    Rotation3::from_axis_angle(&axis, angle.abs())
}

fn gaussian3(rng: &mut ChaCha8Rng, sigma: f64) -> Vector3<f64> {
    let n = Normal::new(0.0, sigma).expect("finite sigma");
    Vector3::from_fn(|_, _| n.sample(rng))
}

fn observe(lm: &Landmark, cfg: &SceneConfig, rng: &mut ChaCha8Rng) -> Result<Landmark> {
    let rot = (cfg.direction_noise > 0.0).then(|| small_rotation(rng, cfg.direction_noise));
    let out = match &lm.geometry {
        Geometry::Line(l) => {
            let mut dir = *l.direction();
            let mut point = *l.closest_point();
            if let Some(r) = rot {
                dir = r * dir;
            }
            if cfg.offset_noise > 0.0 {
                point += gaussian3(rng, cfg.offset_noise);
            }
            let mut line = Line3::new(dir, point)?;
            line.length = l.length;
            line.centroid = l.centroid.map(|c| {
                if cfg.centroid_jitter > 0.0 {
                    let s: f64 = Normal::new(0.0, cfg.centroid_jitter).expect("finite").sample(rng);
                    c + line.direction() * s
                } else {
                    c
                }
            });
            Landmark::line(lm.id, line)
        }
        Geometry::Plane(p) => {
            let mut normal = *p.normal();
            let mut d = p.offset();
            if let Some(r) = rot {
                normal = r * normal;
            }
            if cfg.offset_noise > 0.0 {
                d += Normal::new(0.0, cfg.offset_noise).expect("finite").sample(rng);
            }
            let mut plane = Plane3::new(normal, d)?;
            plane.area = p.area;
            plane.centroid = p.centroid.map(|c| {
                if cfg.centroid_jitter > 0.0 {
                    let g = gaussian3(rng, cfg.centroid_jitter);
                    let n = plane.normal();
                    c + g - n * n.dot(&g)
                } else {
                    c
                }
            });
            Landmark::plane(lm.id, plane)
        }
    };
    Ok(out)
}

fn spurious(rng: &mut ChaCha8Rng, cfg: &SceneConfig) -> Result<Vec<Landmark>> {
    (0..cfg.spurious)
        .map(|_| {
            let kind = if rng.random_bool(0.5) { LandmarkKind::Line } else { LandmarkKind::Plane };
            sample_landmark(rng, kind, cfg.extent)
        })
        .collect()
}

/// Shuffles `(origin, landmark)` entries and reassigns ids by position.
fn shuffled(mut entries: Vec<(Option<usize>, Landmark)>, rng: &mut ChaCha8Rng) -> Vec<(Option<usize>, Landmark)> {
    entries.shuffle(rng);
    for (id, (_, lm)) in entries.iter_mut().enumerate() {
        lm.id = id as u64;
    }
    entries
}

/// Observes `scene` from two poses.
///
/// The first view is the scene itself plus spurious landmarks. The second is
/// the scene under the drawn truth transform with noise and dropout applied,
/// plus its own spurious landmarks. Both views are shuffled and renumbered.
pub fn make_pair(scene: &LandmarkSet, cfg: &SceneConfig) -> Result<BenchmarkPair> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let truth = random_truth(&mut rng, cfg);

    let mut view_i: Vec<(Option<usize>, Landmark)> =
        scene.landmarks.iter().cloned().enumerate().map(|(k, lm)| (Some(k), lm)).collect();
    view_i.extend(spurious(&mut rng, cfg)?.into_iter().map(|lm| (None, lm)));

    let mut view_j = Vec::new();
    for (k, lm) in scene.landmarks.iter().enumerate() {
        if cfg.dropout > 0.0 && rng.random_bool(cfg.dropout) {
            continue;
        }
        view_j.push((Some(k), observe(&lm.transformed(&truth), cfg, &mut rng)?));
    }
    view_j.extend(spurious(&mut rng, cfg)?.into_iter().map(|lm| (None, lm)));

    let view_i = shuffled(view_i, &mut rng);
    let view_j = shuffled(view_j, &mut rng);

    let mut id_in_j = vec![None; scene.len()];
    for (origin, lm) in &view_j {
        if let Some(k) = origin {
            id_in_j[*k] = Some(lm.id);
        }
    }
    let mut true_matches: Vec<(u64, u64)> = view_i
        .iter()
        .filter_map(|(origin, lm)| origin.and_then(|k| id_in_j[k]).map(|b| (lm.id, b)))
        .collect();
    true_matches.sort_unstable();

    let set_i = LandmarkSet::new("view_i", view_i.into_iter().map(|(_, lm)| lm).collect())?;
    let set_j = LandmarkSet::new("view_j", view_j.into_iter().map(|(_, lm)| lm).collect())?;
    let mut pair = BenchmarkPair {
        set_i,
        set_j,
        truth,
        true_matches,
        iir: 0.0,
    };
    pair.iir = iir_of(pair.true_matches.len(), pair.possible_matches());

    if pair.true_matches.is_empty() {
        return Err(Error::DegenerateTruthScene("no landmark survived dropout".into()));
    }
    if let Err(e) = estimate_transform(&pair.true_landmark_pairs()) {
        return Err(Error::DegenerateTruthScene(e.to_string()));
    }
    Ok(pair)
}

/// `generate_scene` followed by `make_pair`.
pub fn generate_pair(cfg: &SceneConfig) -> Result<BenchmarkPair> {
    make_pair(&generate_scene(cfg)?, cfg)
}

/// Seed used for the `attempt`-th resample of `seed`.
pub fn resample_seed(seed: u64, attempt: u32) -> u64 {
    seed.wrapping_add(u64::from(attempt).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Like [`generate_pair`], but redraws with a derived seed while the truth
/// matches are degenerate. Returns the pair and the seed that produced it.
pub fn generate_pair_resampled(cfg: &SceneConfig, max_attempts: u32) -> Result<(BenchmarkPair, u64)> {
    let mut last = None;
    for attempt in 0..max_attempts.max(1) {
        let seed = resample_seed(cfg.seed, attempt);
        let mut c = cfg.clone();
        c.seed = seed;
        match generate_pair(&c) {
            Ok(p) => return Ok((p, seed)),
            Err(e @ Error::DegenerateTruthScene(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Assignments costing more than this `d_Graff` are discarded.
    pub gate: f64,
    /// Consistency parameters used to score the recovered set's density.
    pub match_config: MatchConfig,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            gate: DEFAULT_ORACLE_GATE,
            match_config: MatchConfig::default(),
        }
    }
}

/// Ground-truth correspondences by assignment after alignment.
///
/// `set_j` is mapped into the first frame with the inverse truth; lines and
/// planes are matched separately by minimum total `d_Graff`.
pub fn true_match_oracle(pair: &BenchmarkPair, cfg: &OracleConfig) -> Result<CorrespondenceSet> {
    let rho = cfg.match_config.rho;
    let back = pair.truth.inverse();
    let aligned = pair.set_j.transformed(&back);
    let mut chosen: Vec<(u64, u64)> = Vec::new();
    for kind in [LandmarkKind::Line, LandmarkKind::Plane] {
        let xs: Vec<&Landmark> = pair.set_i.landmarks.iter().filter(|l| l.kind() == kind).collect();
        let ys: Vec<&Landmark> = aligned.landmarks.iter().filter(|l| l.kind() == kind).collect();
        let gx: Vec<_> = xs.iter().map(|l| l.to_graff()).collect();
        let gy: Vec<_> = ys.iter().map(|l| l.to_graff()).collect();
        let mut cost = DMatrix::zeros(xs.len(), ys.len());
        for (r, a) in gx.iter().enumerate() {
            for (c, b) in gy.iter().enumerate() {
                cost[(r, c)] = graff_distance(a, b, rho)?;
            }
        }
        for (r, c) in linear_sum_assignment(&cost).into_iter().enumerate() {
            if let Some(c) = c {
                if cost[(r, c)] <= cfg.gate {
                    chosen.push((xs[r].id, ys[c].id));
                }
            }
        }
    }

    let hyps = enumerate_hypotheses(&pair.set_i, &pair.set_j);
    let mut indices: Vec<usize> = chosen
        .iter()
        .map(|&(a, b)| hyps.iter().position(|h| h.a == a && h.b == b).expect("same-kind hypothesis"))
        .collect();
    indices.sort_unstable();
    let selected: Vec<_> = indices.iter().map(|&k| hyps[k]).collect();
    let mut indicator = vec![false; hyps.len()];
    for &k in &indices {
        indicator[k] = true;
    }
    let density = selection_density(pair, &selected, &cfg.match_config)?;
    Ok(CorrespondenceSet {
        selected,
        indicator,
        density,
    })
}

fn selection_density(
    pair: &BenchmarkPair,
    selected: &[crate::association::CorrespondenceHypothesis],
    cfg: &MatchConfig,
) -> Result<f64> {
    if selected.is_empty() {
        return Ok(0.0);
    }
    let di = distance_matrix(&pair.set_i, cfg)?;
    let dj = distance_matrix(&pair.set_j, cfg)?;
    let index = |set: &LandmarkSet, id: u64| set.landmarks.iter().position(|l| l.id == id).expect("id in set");
    let pos: Vec<(usize, usize)> = selected
        .iter()
        .map(|h| (index(&pair.set_i, h.a), index(&pair.set_j, h.b)))
        .collect();
    let mut sum = 0.0;
    for (p, &(a, b)) in pos.iter().enumerate() {
        for (q, &(c, d)) in pos.iter().enumerate() {
            sum += if p == q {
                1.0
            } else {
                consistency(di[(a, c)], dj[(b, d)], cfg).unwrap_or(0.0)
            };
        }
    }
    Ok(sum / pos.len() as f64)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TruthRecord {
    #[serde(rename = "R")]
    r: [f64; 9],
    t: [f64; 3],
    true_matches: Vec<(u64, u64)>,
    iir: f64,
}

pub const SET_I_FILE: &str = "set_i.json";
pub const SET_J_FILE: &str = "set_j.json";
pub const TRUTH_FILE: &str = "truth.json";

/// Writes `set_i.json`, `set_j.json` and `truth.json` into `dir`.
pub fn write_pair_dir(pair: &BenchmarkPair, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_landmark_set(&pair.set_i, dir.join(SET_I_FILE))?;
    save_landmark_set(&pair.set_j, dir.join(SET_J_FILE))?;
    let t = pair.truth.translation();
    let rec = TruthRecord {
        r: pair.truth.rotation_row_major(),
        t: [t.x, t.y, t.z],
        true_matches: pair.true_matches.clone(),
        iir: pair.iir,
    };
    let path = dir.join(TRUTH_FILE);
    let text = serde_json::to_string_pretty(&rec).expect("truth record serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

pub fn read_pair_dir(dir: impl AsRef<Path>) -> Result<BenchmarkPair> {
    let dir = dir.as_ref();
    let set_i = load_landmark_set(dir.join(SET_I_FILE))?;
    let set_j = load_landmark_set(dir.join(SET_J_FILE))?;
    let path = dir.join(TRUTH_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let rec: TruthRecord = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.clone(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let truth = RigidTransform::from_row_major(&rec.r, &rec.t)?;
    for &(a, b) in &rec.true_matches {
        if set_i.get(a).is_none() || set_j.get(b).is_none() {
            return Err(Error::Validation(format!("true match ({a}, {b}) references an unknown id")));
        }
    }
    Ok(BenchmarkPair {
        set_i,
        set_j,
        truth,
        true_matches: rec.true_matches,
        iir: rec.iir,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registration::alignment_error;

    fn small(seed: u64) -> SceneConfig {
        SceneConfig {
            seed,
            num_lines: 5,
            num_planes: 5,
            ..SceneConfig::default()
        }
    }

    #[test]
    fn single_plane_scene() {
        let cfg = SceneConfig {
            num_lines: 0,
            num_planes: 1,
            ..SceneConfig::default()
        };
        let s = generate_scene(&cfg).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.landmarks[0].kind(), LandmarkKind::Plane);
    }

    #[test]
    fn scene_is_deterministic_and_bounded() {
        let cfg = SceneConfig {
            num_lines: 10,
            num_planes: 10,
            ..SceneConfig::default()
        };
        let a = generate_scene(&cfg).unwrap();
        assert_eq!(a, generate_scene(&cfg).unwrap());
        for lm in &a.landmarks {
            let c = lm.centroid().unwrap();
            assert!(c.iter().all(|x| x.abs() <= cfg.extent));
            let g = lm.to_graff();
            assert!(g.basis().tr_mul(g.displacement()).norm() < 1e-10);
        }
        let g: Vec<_> = a.landmarks.iter().map(|l| l.to_graff()).collect();
        for p in 0..g.len() {
            for q in p + 1..g.len() {
                assert!(graff_distance(&g[p], &g[q], DEFAULT_RHO).unwrap() > MIN_SEPARATION);
            }
        }
    }

    #[test]
    fn generation_fails_when_crowded() {
        let cfg = SceneConfig {
            num_lines: 0,
            num_planes: 50,
            ..SceneConfig::default()
        };
        assert!(matches!(generate_separated(&cfg, 1.0), Err(Error::GenerationFailed { attempts: MAX_ATTEMPTS })));
    }

    #[test]
    fn noiseless_pair_iir_and_exact_truth() {
        let cfg = small(3).noiseless();
        let pair = generate_pair(&cfg).unwrap();
        assert_eq!(pair.true_matches.len(), 10);
        assert_eq!(pair.iir, 10.0 / 50.0);
        let est = estimate_transform(&pair.true_landmark_pairs()).unwrap();
        let err = alignment_error(&est.transform, &pair.truth);
        assert!(err.rot_error < 1e-9 && err.trans_error < 1e-9);
    }

    #[test]
    fn dropout_is_deterministic() {
        let cfg = SceneConfig {
            dropout: 0.5,
            ..small(9).noiseless()
        };
        let cfg = SceneConfig { num_lines: 10, num_planes: 10, ..cfg };
        let a = generate_pair(&cfg).unwrap();
        assert_eq!(a, generate_pair(&cfg).unwrap());
        assert!(a.set_j.len() < 20);
    }

    #[test]
    fn iir_recomputes_exactly() {
        let cfg = SceneConfig {
            spurious: 3,
            ..SceneConfig::default()
        };
        let (pair, _) = generate_pair_resampled(&cfg, 10).unwrap();
        assert_eq!(pair.iir, pair.true_matches.len() as f64 / pair.possible_matches() as f64);
    }

    #[test]
    fn case_bands() {
        assert_eq!(case_of_iir(0.06), Case::Case1);
        assert_eq!(case_of_iir(0.05), Case::Case1);
        assert_eq!(case_of_iir(0.04), Case::Case2);
        assert_eq!(case_of_iir(0.03), Case::Case2);
        assert_eq!(case_of_iir(0.01), Case::Case3);
    }

    #[test]
    fn oracle_recovers_noiseless_matches() {
        let pair = generate_pair(&small(5).noiseless()).unwrap();
        let oracle = true_match_oracle(&pair, &OracleConfig::default()).unwrap();
        assert_eq!(oracle.pairs(), pair.true_matches);
        assert!(oracle.density > 0.0);
    }

    #[test]
    fn oracle_with_empty_second_view() {
        let mut pair = generate_pair(&small(5).noiseless()).unwrap();
        pair.set_j = LandmarkSet::new("view_j", vec![]).unwrap();
        pair.true_matches.clear();
        let oracle = true_match_oracle(&pair, &OracleConfig::default()).unwrap();
        assert!(oracle.is_empty());
        assert_eq!(oracle.density, 0.0);
    }

    #[test]
    fn pair_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let pair = generate_pair(&small(2)).unwrap();
        write_pair_dir(&pair, dir.path()).unwrap();
        assert_eq!(read_pair_dir(dir.path()).unwrap(), pair);
    }

    #[test]
    fn rejects_bad_config() {
        for cfg in [
            SceneConfig { extent: 0.0, ..SceneConfig::default() },
            SceneConfig { dropout: 1.0, ..SceneConfig::default() },
            SceneConfig { offset_noise: -1.0, ..SceneConfig::default() },
        ] {
            assert!(matches!(generate_scene(&cfg), Err(Error::InvalidParameter(_))));
        }
    }
}
