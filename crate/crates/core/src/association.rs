//! Consistency graph between two landmark sets.
//!
//! Every same-kind pair `(a in S_i, b in S_j)` is a putative correspondence.
//! Two correspondences are consistent when the intrascan distance between
//! their landmarks in `S_i` agrees with the one in `S_j` to within `epsilon`;
//! consistent pairs get weight `exp(-c² / 2σ²)`.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landmarks::{centroid_of, cp_vector, Landmark, LandmarkKind, LandmarkSet};
use crate::manifold::{graff_distance, graff_distance_naive, GraffElement};

pub const DEFAULT_GRAFF_EPSILON: f64 = 0.2;
pub const DEFAULT_GRAFF_SIGMA: f64 = 0.05;
pub const DEFAULT_RHO: f64 = 40.0;
pub const DEFAULT_EUCLIDEAN_EPSILON: f64 = 0.5;
pub const DEFAULT_EUCLIDEAN_SIGMA: f64 = 0.15;

/// Pairwise landmark distance used to score consistency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Shifted and scaled affine Grassmannian distance.
    Graff,
    /// Affine Grassmannian distance without the shift step.
    GraffNaive,
    /// Euclidean distance between observed centroids.
    #[serde(alias = "centroid-euclidean")]
    Centroid,
    /// Euclidean distance between closest-point vectors.
    #[serde(alias = "cp-euclidean")]
    Cp,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Graff, Metric::GraffNaive, Metric::Centroid, Metric::Cp];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Graff => "graff",
            Metric::GraffNaive => "graff-naive",
            Metric::Centroid => "centroid",
            Metric::Cp => "cp",
        }
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self, Metric::Centroid | Metric::Cp)
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "graff" => Ok(Metric::Graff),
            "graff-naive" => Ok(Metric::GraffNaive),
            "centroid" | "centroid-euclidean" => Ok(Metric::Centroid),
            "cp" | "cp-euclidean" => Ok(Metric::Cp),
            other => Err(Error::InvalidParameter(format!("unknown metric `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Consistency gate, radians for Graff metrics and meters otherwise.
    pub epsilon: f64,
    /// Weight falloff, same units as `epsilon`.
    pub sigma: f64,
    /// Displacement scaling in meters (Graff metrics only).
    pub rho: f64,
    pub metric: Metric,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self::for_metric(Metric::Graff)
    }
}

impl MatchConfig {
    /// Default gate and falloff for `metric`.
    pub fn for_metric(metric: Metric) -> Self {
        let (epsilon, sigma) = if metric.is_euclidean() {
            (DEFAULT_EUCLIDEAN_EPSILON, DEFAULT_EUCLIDEAN_SIGMA)
        } else {
            (DEFAULT_GRAFF_EPSILON, DEFAULT_GRAFF_SIGMA)
        };
        Self {
            epsilon,
            sigma,
            rho: DEFAULT_RHO,
            metric,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("epsilon", self.epsilon), ("sigma", self.sigma), ("rho", self.rho)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// A putative correspondence `a ∈ S_i ↔ b ∈ S_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CorrespondenceHypothesis {
    pub a: u64,
    pub b: u64,
    pub kind: LandmarkKind,
}

/// Square boolean mask over hypothesis pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairMask {
    size: usize,
    bits: Vec<bool>,
}

impl PairMask {
    pub fn new(size: usize) -> Self {
        Self {
            size,
            bits: vec![false; size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, p: usize, q: usize) -> bool {
        self.bits[p * self.size + q]
    }

    pub fn set(&mut self, p: usize, q: usize, value: bool) {
        self.bits[p * self.size + q] = value;
        self.bits[q * self.size + p] = value;
    }

    /// Appends `extra` rows and columns set to `value`, except the diagonal.
    pub fn grown(&self, extra: usize, value: bool) -> Self {
        let size = self.size + extra;
        let mut out = Self::new(size);
        for p in 0..size {
            for q in 0..size {
                let v = if p < self.size && q < self.size {
                    self.get(p, q)
                } else {
                    value && p != q
                };
                out.bits[p * size + q] = v;
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ConsistencyGraph {
    pub hypotheses: Vec<CorrespondenceHypothesis>,
    /// Symmetric weights in `[0, 1]` with unit diagonal.
    pub weights: DMatrix<f64>,
    /// Pairs excluded by the one-to-one rule.
    pub forbidden: PairMask,
}

impl ConsistencyGraph {
    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    /// Writes the hypothesis list as CSV: `index,a,b,kind`.
    pub fn write_hypotheses_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "a", "b", "kind"])?;
        for (i, h) in self.hypotheses.iter().enumerate() {
            w.write_record([i.to_string(), h.a.to_string(), h.b.to_string(), h.kind.to_string()])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    /// Writes the nonzero or forbidden upper-triangle entries as CSV:
    /// `row,col,weight,forbidden`.
    pub fn write_weights_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["row", "col", "weight", "forbidden"])?;
        let m = self.len();
        for p in 0..m {
            for q in p..m {
                let weight = self.weights[(p, q)];
                let forbidden = self.forbidden.get(p, q);
                if weight != 0.0 || forbidden {
                    w.write_record([
                        p.to_string(),
                        q.to_string(),
                        weight.to_string(),
                        forbidden.to_string(),
                    ])?;
                }
            }
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

/// Distance between two landmarks of the same set under `cfg.metric`.
pub fn pairwise_distance(x: &Landmark, y: &Landmark, cfg: &MatchConfig) -> Result<f64> {
    match cfg.metric {
        Metric::Graff => graff_distance(&x.to_graff(), &y.to_graff(), cfg.rho),
        Metric::GraffNaive => graff_distance_naive(&x.to_graff(), &y.to_graff(), cfg.rho),
        Metric::Centroid => Ok((centroid_of(x)? - centroid_of(y)?).norm()),
        Metric::Cp => Ok((cp_vector(x)? - cp_vector(y)?).norm()),
    }
}

/// Weight of a correspondence pair from its two intrascan distances, or
/// `None` when `|c_ij - c_kl| >= epsilon`.
pub fn consistency(c_ij: f64, c_kl: f64, cfg: &MatchConfig) -> Option<f64> {
    let c = (c_ij - c_kl).abs();
    if c < cfg.epsilon {
        Some((-c * c / (2.0 * cfg.sigma * cfg.sigma)).exp())
    } else {
        None
    }
}

/// All-to-all same-kind hypotheses in set order: for each landmark of `si`,
/// every landmark of `sj` with the same kind.
pub fn enumerate_hypotheses(si: &LandmarkSet, sj: &LandmarkSet) -> Vec<CorrespondenceHypothesis> {
    let mut out = Vec::new();
    for x in &si.landmarks {
        for y in sj.landmarks.iter().filter(|y| y.kind() == x.kind()) {
            out.push(CorrespondenceHypothesis {
                a: x.id,
                b: y.id,
                kind: x.kind(),
            });
        }
    }
    out
}

/// Symmetric matrix of intrascan distances for one set.
pub fn distance_matrix(set: &LandmarkSet, cfg: &MatchConfig) -> Result<DMatrix<f64>> {
    let n = set.len();
    let graff: Option<Vec<GraffElement>> = matches!(cfg.metric, Metric::Graff | Metric::GraffNaive)
        .then(|| set.landmarks.iter().map(Landmark::to_graff).collect());
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|p| {
            ((p + 1)..n)
                .map(|q| match (&graff, cfg.metric) {
                    (Some(g), Metric::Graff) => graff_distance(&g[p], &g[q], cfg.rho),
                    (Some(g), _) => graff_distance_naive(&g[p], &g[q], cfg.rho),
                    _ => pairwise_distance(&set.landmarks[p], &set.landmarks[q], cfg),
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut d = DMatrix::zeros(n, n);
    for (p, row) in rows.into_iter().enumerate() {
        for (offset, value) in row.into_iter().enumerate() {
            let q = p + 1 + offset;
            d[(p, q)] = value;
            d[(q, p)] = value;
        }
    }
    Ok(d)
}

pub fn build_consistency_graph(
    si: &LandmarkSet,
    sj: &LandmarkSet,
    cfg: &MatchConfig,
) -> Result<ConsistencyGraph> {
    cfg.validate()?;
    if si.is_empty() || sj.is_empty() {
        return Err(Error::EmptySet);
    }
    // attribute errors surface here regardless of how many hypotheses exist
    let di = distance_matrix(si, cfg)?;
    let dj = distance_matrix(sj, cfg)?;
    let pos_i = index_of(si);
    let pos_j = index_of(sj);
    let hypotheses = enumerate_hypotheses(si, sj);
    let ends: Vec<(usize, usize)> = hypotheses
        .iter()
        .map(|h| (pos_i[&h.a], pos_j[&h.b]))
        .collect();

    let m = hypotheses.len();
    let rows: Vec<Vec<(f64, bool)>> = (0..m)
        .into_par_iter()
        .map(|p| {
            let (ap, bp) = ends[p];
            ((p + 1)..m)
                .map(|q| {
                    let (aq, bq) = ends[q];
                    if ap == aq || bp == bq {
                        (0.0, true)
                    } else {
                        (consistency(di[(ap, aq)], dj[(bp, bq)], cfg).unwrap_or(0.0), false)
                    }
                })
                .collect()
        })
        .collect();

    let mut weights = DMatrix::identity(m, m);
    let mut forbidden = PairMask::new(m);
    for (p, row) in rows.into_iter().enumerate() {
        for (offset, (w, f)) in row.into_iter().enumerate() {
            let q = p + 1 + offset;
            weights[(p, q)] = w;
            weights[(q, p)] = w;
            if f {
                forbidden.set(p, q, true);
            }
        }
    }
    Ok(ConsistencyGraph {
        hypotheses,
        weights,
        forbidden,
    })
}

fn index_of(set: &LandmarkSet) -> std::collections::HashMap<u64, usize> {
    set.landmarks
        .iter()
        .enumerate()
        .map(|(i, l)| (l.id, i))
        .collect()
}
