//! Seeded benchmark sweeps and CSV reports.
//!
//! Every pair is generated from `seed + index`, matched under each requested
//! metric and scored against ground truth. Reports are deterministic for a
//! fixed configuration; wall-clock timings are kept in a separate table so
//! that the result tables stay bit-identical across runs.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::association::{
    MatchConfig, Metric, DEFAULT_EUCLIDEAN_EPSILON, DEFAULT_EUCLIDEAN_SIGMA, DEFAULT_GRAFF_EPSILON,
    DEFAULT_GRAFF_SIGMA, DEFAULT_RHO,
};
use crate::error::{Error, Result};
use crate::metrics::{compute_lmr, count_inliers, lmr_auc, DEFAULT_TAU_D_DEG, DEFAULT_TAU_OIR};
use crate::pipeline::match_sets;
use crate::registration::{alignment_error, is_success};
use crate::solver::SolverConfig;
use crate::synth::{case_of, generate_pair_resampled, Case, SceneConfig};

pub const PER_PAIR_FILE: &str = "per_pair.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const SUMMARY_BY_CASE_FILE: &str = "summary_by_case.csv";
pub const TIMINGS_FILE: &str = "timings.csv";
pub const RHO_SWEEP_FILE: &str = "rho_sweep.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    /// Pair `k` is generated from seed `seed + k`.
    pub seed: u64,
    pub num_pairs: usize,
    pub metrics: Vec<Metric>,
    pub graff_epsilon: f64,
    pub graff_sigma: f64,
    pub euclidean_epsilon: f64,
    pub euclidean_sigma: f64,
    pub rho: f64,
    /// `ρ` of the distance used to judge inliers; fixed so that sweeping
    /// `rho` does not move the yardstick.
    pub eval_rho: f64,
    pub tau_d_deg: f64,
    pub tau_oir: f64,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
    /// Redraws allowed when a pair's true matches are degenerate.
    pub max_resample: u32,
    pub scene: SceneConfig,
    pub solver: SolverConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            num_pairs: 200,
            metrics: Metric::ALL.to_vec(),
            graff_epsilon: DEFAULT_GRAFF_EPSILON,
            graff_sigma: DEFAULT_GRAFF_SIGMA,
            euclidean_epsilon: DEFAULT_EUCLIDEAN_EPSILON,
            euclidean_sigma: DEFAULT_EUCLIDEAN_SIGMA,
            rho: DEFAULT_RHO,
            eval_rho: DEFAULT_RHO,
            tau_d_deg: DEFAULT_TAU_D_DEG,
            tau_oir: DEFAULT_TAU_OIR,
            threads: 0,
            max_resample: 16,
            scene: SceneConfig::default(),
            solver: SolverConfig::default(),
        }
    }
}

impl BenchmarkConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Validation(format!("benchmark config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| line_col(&text, s.start))
                .unwrap_or((0, 0));
            Error::Parse {
                path: path.to_path_buf(),
                line,
                column,
                message: e.message().to_string(),
            }
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("benchmark config serializes")
    }

    pub fn match_config(&self, metric: Metric) -> MatchConfig {
        let (epsilon, sigma) = if metric.is_euclidean() {
            (self.euclidean_epsilon, self.euclidean_sigma)
        } else {
            (self.graff_epsilon, self.graff_sigma)
        };
        MatchConfig {
            epsilon,
            sigma,
            rho: self.rho,
            metric,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.metrics.is_empty() {
            return Err(Error::InvalidParameter("no metrics requested".into()));
        }
        for m in &self.metrics {
            self.match_config(*m).validate()?;
        }
        if !(self.eval_rho.is_finite() && self.eval_rho > 0.0) {
            return Err(Error::InvalidParameter(format!("eval_rho must be positive, got {}", self.eval_rho)));
        }
        if !(self.tau_d_deg.is_finite() && self.tau_d_deg > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tau_d_deg must be positive, got {}",
                self.tau_d_deg
            )));
        }
        if !(0.0..=1.0).contains(&self.tau_oir) {
            return Err(Error::InvalidParameter(format!("tau_oir must lie in [0, 1], got {}", self.tau_oir)));
        }
        self.scene.validate()?;
        self.solver.validate()
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerPairRow {
    pub pair: u64,
    /// Seed that produced the pair after any resampling.
    pub seed: u64,
    pub case: Option<Case>,
    pub iir: f64,
    pub num_true: usize,
    pub metric: Metric,
    pub num_selected: usize,
    pub num_inliers: usize,
    pub oir: f64,
    pub rot_error_deg: Option<f64>,
    pub trans_error_cm: Option<f64>,
    pub success: bool,
    pub kappa: Option<f64>,
    /// `ok`, `degenerate`, or `failed: <reason>`.
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub pair: u64,
    pub metric: Metric,
    pub graph_ms: f64,
    pub solver_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub metric: Metric,
    /// `all`, or a case label.
    pub case: String,
    pub pairs: usize,
    pub successes: usize,
    pub recall_pct: f64,
    pub lmr: f64,
    pub auc: f64,
    /// Over successful registrations only.
    pub mean_rot_error_deg: Option<f64>,
    pub mean_trans_error_cm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub rows: Vec<PerPairRow>,
    pub timings: Vec<TimingRow>,
    pub summary: Vec<SummaryRow>,
    pub by_case: Vec<SummaryRow>,
}

impl BenchmarkReport {
    pub fn summary_for(&self, metric: Metric) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.metric == metric)
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn summarize_group(metric: Metric, case: String, rows: &[&PerPairRow], tau_oir: f64) -> SummaryRow {
    let oirs: Vec<f64> = rows.iter().map(|r| r.oir).collect();
    let ok: Vec<&&PerPairRow> = rows.iter().filter(|r| r.success).collect();
    SummaryRow {
        metric,
        case,
        pairs: rows.len(),
        successes: ok.len(),
        recall_pct: 100.0 * ok.len() as f64 / rows.len() as f64,
        lmr: compute_lmr(&oirs, tau_oir),
        auc: lmr_auc(&oirs),
        mean_rot_error_deg: mean(ok.iter().filter_map(|r| r.rot_error_deg)),
        mean_trans_error_cm: mean(ok.iter().filter_map(|r| r.trans_error_cm)),
    }
}

/// Per-metric and per-(metric, case) aggregates. Metrics appear in order of
/// first occurrence; cases in band order, empty groups omitted.
pub fn summarize(rows: &[PerPairRow], tau_oir: f64) -> (Vec<SummaryRow>, Vec<SummaryRow>) {
    let mut metrics: Vec<Metric> = Vec::new();
    for r in rows {
        if !metrics.contains(&r.metric) {
            metrics.push(r.metric);
        }
    }
    let mut summary = Vec::new();
    let mut by_case = Vec::new();
    for m in metrics {
        let group: Vec<&PerPairRow> = rows.iter().filter(|r| r.metric == m).collect();
        summary.push(summarize_group(m, "all".into(), &group, tau_oir));
        for case in Case::ALL {
            let sub: Vec<&PerPairRow> = group.iter().copied().filter(|r| r.case == Some(case)).collect();
            if !sub.is_empty() {
                by_case.push(summarize_group(m, case.to_string(), &sub, tau_oir));
            }
        }
    }
    (summary, by_case)
}

fn failed_row(pair: u64, seed: u64, metric: Metric, reason: &Error) -> PerPairRow {
    PerPairRow {
        pair,
        seed,
        case: None,
        iir: 0.0,
        num_true: 0,
        metric,
        num_selected: 0,
        num_inliers: 0,
        oir: 0.0,
        rot_error_deg: None,
        trans_error_cm: None,
        success: false,
        kappa: None,
        status: format!("failed: {reason}"),
    }
}

fn evaluate_pair(cfg: &BenchmarkConfig, index: usize) -> (Vec<PerPairRow>, Vec<TimingRow>) {
    let pair_id = index as u64;
    let mut scene = cfg.scene.clone();
    scene.seed = cfg.seed.wrapping_add(pair_id);
    let mut rows = Vec::with_capacity(cfg.metrics.len());
    let mut timings = Vec::with_capacity(cfg.metrics.len());

    let (pair, seed) = match generate_pair_resampled(&scene, cfg.max_resample) {
        Ok(p) => p,
        Err(e) => {
            for &m in &cfg.metrics {
                rows.push(failed_row(pair_id, scene.seed, m, &e));
            }
            return (rows, timings);
        }
    };
    let tau_d = cfg.tau_d_deg.to_radians();

    for &metric in &cfg.metrics {
        let mut row = failed_row(pair_id, seed, metric, &Error::EmptySelection);
        row.case = Some(case_of(&pair));
        row.iir = pair.iir;
        row.num_true = pair.true_matches.len();
        let outcome = match match_sets(&pair.set_i, &pair.set_j, &cfg.match_config(metric), &cfg.solver) {
            Ok(o) => o,
            Err(e) => {
                row.status = format!("failed: {e}");
                rows.push(row);
                continue;
            }
        };
        timings.push(TimingRow {
            pair: pair_id,
            metric,
            graph_ms: outcome.graph_time.as_secs_f64() * 1e3,
            solver_ms: outcome.solver_time.as_secs_f64() * 1e3,
        });
        let sel = &outcome.correspondences;
        row.num_selected = sel.len();
        match count_inliers(sel, &pair, tau_d, cfg.eval_rho) {
            Ok(n) => {
                row.num_inliers = n;
                row.oir = if sel.is_empty() { 0.0 } else { n as f64 / sel.len() as f64 };
            }
            Err(e) => {
                row.status = format!("failed: {e}");
                rows.push(row);
                continue;
            }
        }
        match &outcome.registration {
            Ok(reg) => {
                let err = alignment_error(&reg.transform, &pair.truth);
                row.rot_error_deg = Some(err.rot_error.to_degrees());
                row.trans_error_cm = Some(err.trans_error * 100.0);
                row.success = is_success(&err);
                row.kappa = Some(reg.kappa);
                row.status = "ok".into();
            }
            Err(Error::Degenerate { .. }) => row.status = "degenerate".into(),
            Err(e) => row.status = format!("failed: {e}"),
        }
        rows.push(row);
    }
    (rows, timings)
}

/// Runs every (pair, metric) combination. Failures are recorded per row.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let per_pair: Vec<(Vec<PerPairRow>, Vec<TimingRow>)> =
        pool.install(|| (0..cfg.num_pairs).into_par_iter().map(|k| evaluate_pair(cfg, k)).collect());
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for (r, t) in per_pair {
        rows.extend(r);
        timings.extend(t);
    }
    let (summary, by_case) = summarize(&rows, cfg.tau_oir);
    Ok(BenchmarkReport {
        rows,
        timings,
        summary,
        by_case,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoRow {
    pub rho: f64,
    pub metric: Metric,
    pub auc: f64,
    pub recall_pct: f64,
}

/// AUC and recall for each `ρ` on the same pairs. Only metrics that use `ρ`
/// are swept; the Graff metric is used when none of the configured ones do.
pub fn sweep_rho(cfg: &BenchmarkConfig, rhos: &[f64]) -> Result<Vec<RhoRow>> {
    if rhos.is_empty() {
        return Err(Error::InvalidParameter("no rho values given".into()));
    }
    if let Some(bad) = rhos.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(Error::InvalidParameter(format!("rho must be positive, got {bad}")));
    }
    let mut base = cfg.clone();
    base.metrics.retain(|m| !m.is_euclidean());
    if base.metrics.is_empty() {
        base.metrics.push(Metric::Graff);
    }
    let mut out = Vec::new();
    for &rho in rhos {
        let mut c = base.clone();
        c.rho = rho;
        for s in run_benchmark(&c)?.summary {
            out.push(RhoRow {
                rho,
                metric: s.metric,
                auc: s.auc,
                recall_pct: s.recall_pct,
            });
        }
    }
    Ok(out)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(Error::from)
}

/// Writes the four report tables into `dir`.
pub fn write_report(report: &BenchmarkReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_csv(&dir.join(PER_PAIR_FILE), &report.rows)?;
    write_csv(&dir.join(SUMMARY_FILE), &report.summary)?;
    write_csv(&dir.join(SUMMARY_BY_CASE_FILE), &report.by_case)?;
    write_csv(&dir.join(TIMINGS_FILE), &report.timings)
}

pub fn write_rho_sweep(rows: &[RhoRow], path: impl AsRef<Path>) -> Result<()> {
    write_csv(path.as_ref(), rows)
}

pub fn read_per_pair(path: impl AsRef<Path>) -> Result<Vec<PerPairRow>> {
    read_csv(path.as_ref())
}

pub fn read_summary(path: impl AsRef<Path>) -> Result<Vec<SummaryRow>> {
    read_csv(path.as_ref())
}
