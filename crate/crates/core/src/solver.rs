//! Correspondence selection by consistency density.
//!
//! The objective is `uᵀMu / uᵀu` over binary `u` whose selected pairs are
//! all compatible (not forbidden, positive weight). [`solve_exact`]
//! enumerates every feasible set and is the oracle for small instances;
//! [`solve_relaxed`] runs projected gradient ascent on the sphere with a
//! growing penalty on incompatible pairs, then rounds greedily.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::association::{ConsistencyGraph, CorrespondenceHypothesis, PairMask};
use crate::error::{Error, Result};

/// Largest instance [`solve_exact`] accepts.
pub const EXACT_MAX: usize = 20;

const DENSITY_TIE: f64 = 1e-12;
const SUPPORT_TOL: f64 = 1e-8;
const INIT_NOISE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Homotopy steps on the penalty.
    pub max_outer_iters: usize,
    /// Gradient steps per homotopy step.
    pub max_inner_iters: usize,
    /// Stop the inner ascent once the projected gradient norm drops below this.
    pub inner_tol: f64,
    /// Initial penalty on incompatible pairs.
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_outer_iters: 100,
            max_inner_iters: 1000,
            inner_tol: 1e-8,
            initial_penalty: 1e-2,
            penalty_growth: 2.0,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iters == 0 || self.max_inner_iters == 0 {
            return Err(Error::InvalidParameter("iteration limits must be positive".into()));
        }
        if !(self.inner_tol > 0.0 && self.initial_penalty > 0.0) {
            return Err(Error::InvalidParameter(
                "inner_tol and initial_penalty must be positive".into(),
            ));
        }
        if !(self.penalty_growth > 1.0) {
            return Err(Error::InvalidParameter("penalty_growth must exceed 1".into()));
        }
        Ok(())
    }
}

/// Indices chosen by a solver, ascending, with their density.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub indices: Vec<usize>,
    pub density: f64,
}

/// Selected correspondences with their indicator over the graph's hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    pub selected: Vec<CorrespondenceHypothesis>,
    pub indicator: Vec<bool>,
    pub density: f64,
}

impl CorrespondenceSet {
    pub fn from_selection(graph: &ConsistencyGraph, sel: &Selection) -> Self {
        let mut indicator = vec![false; graph.len()];
        for &i in &sel.indices {
            indicator[i] = true;
        }
        Self {
            selected: sel.indices.iter().map(|&i| graph.hypotheses[i]).collect(),
            indicator,
            density: sel.density,
        }
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    /// `(a, b)` id pairs.
    pub fn pairs(&self) -> Vec<(u64, u64)> {
        self.selected.iter().map(|h| (h.a, h.b)).collect()
    }
}

fn compatible(m: &DMatrix<f64>, forbidden: &PairMask, p: usize, q: usize) -> bool {
    p == q || (!forbidden.get(p, q) && m[(p, q)] > 0.0)
}

/// `uᵀMu / uᵀu` for a binary indicator.
pub fn density(u: &[bool], m: &DMatrix<f64>) -> Result<f64> {
    let idx: Vec<usize> = u.iter().enumerate().filter(|(_, x)| **x).map(|(i, _)| i).collect();
    if idx.is_empty() {
        return Err(Error::EmptySelection);
    }
    Ok(subset_density(&idx, m))
}

fn subset_density(idx: &[usize], m: &DMatrix<f64>) -> f64 {
    let mut num = 0.0;
    for &p in idx {
        for &q in idx {
            num += m[(p, q)];
        }
    }
    num / idx.len() as f64
}

/// Whether every selected pair is compatible.
pub fn is_feasible(indices: &[usize], m: &DMatrix<f64>, forbidden: &PairMask) -> bool {
    indices
        .iter()
        .enumerate()
        .all(|(i, &p)| indices[i + 1..].iter().all(|&q| compatible(m, forbidden, p, q)))
}

fn check_shape(m: &DMatrix<f64>, forbidden: &PairMask) -> Result<usize> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m.ncols(),
        });
    }
    if forbidden.size() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: forbidden.size(),
        });
    }
    Ok(n)
}

fn better(density: f64, card: usize, best_density: f64, best_card: usize) -> bool {
    let tol = DENSITY_TIE * best_density.abs().max(1.0);
    density > best_density + tol || ((density - best_density).abs() <= tol && card > best_card)
}

/// [`better`], with exact ties going to the lexicographically smaller list.
fn better_selection(cand: &Selection, best: &Selection) -> bool {
    if better(cand.density, cand.indices.len(), best.density, best.indices.len()) {
        return true;
    }
    let tied = !better(best.density, best.indices.len(), cand.density, cand.indices.len());
    tied && cand.indices.len() == best.indices.len() && cand.indices < best.indices
}

/// Globally optimal feasible selection by enumerating every clique of the
/// compatibility graph. Ties go to the larger set, then to the
/// lexicographically smallest index list.
pub fn solve_exact(m: &DMatrix<f64>, forbidden: &PairMask) -> Result<Selection> {
    let n = check_shape(m, forbidden)?;
    if n > EXACT_MAX {
        return Err(Error::TooLarge { m: n, max: EXACT_MAX });
    }
    if n == 0 {
        return Ok(Selection {
            indices: vec![],
            density: 0.0,
        });
    }
    let mut adj = vec![0u32; n];
    for p in 0..n {
        for q in 0..n {
            if p != q && compatible(m, forbidden, p, q) {
                adj[p] |= 1 << q;
            }
        }
    }

    struct Search<'a> {
        m: &'a DMatrix<f64>,
        adj: Vec<u32>,
        stack: Vec<usize>,
        best: Vec<usize>,
        best_density: f64,
    }

    impl Search<'_> {
        // `num` is the running uᵀMu of the current stack
        fn visit(&mut self, candidates: u32, num: f64) {
            let mut rest = candidates;
            while rest != 0 {
                let v = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                let mut add = self.m[(v, v)];
                for &w in &self.stack {
                    add += 2.0 * self.m[(v, w)];
                }
                self.stack.push(v);
                let total = num + add;
                let d = total / self.stack.len() as f64;
                if better(d, self.stack.len(), self.best_density, self.best.len()) {
                    self.best_density = d;
                    self.best = self.stack.clone();
                }
                // only extend with larger indices to enumerate each set once,
                // in lexicographic order
                let higher = if v + 1 >= 32 { 0 } else { !0u32 << (v + 1) };
                self.visit(rest & self.adj[v] & higher, total);
                self.stack.pop();
            }
        }
    }

    let mut search = Search {
        m,
        adj,
        stack: Vec::with_capacity(n),
        best: Vec::new(),
        best_density: f64::NEG_INFINITY,
    };
    let all = if n == 32 { !0 } else { (1u32 << n) - 1 };
    search.visit(all, 0.0);
    let mut indices = search.best;
    indices.sort_unstable();
    Ok(Selection {
        indices,
        density: search.best_density,
    })
}

/// Greedy rounding of a continuous score vector.
///
/// Vertices are visited by descending score (ties by index) and admitted
/// when compatible with everything admitted so far. The densest of the
/// resulting prefix sets is returned, preferring the larger on ties.
pub fn refine_rounding(u_cont: &[f64], m: &DMatrix<f64>, forbidden: &PairMask) -> Result<Selection> {
    let n = check_shape(m, forbidden)?;
    if u_cont.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: u_cont.len(),
        });
    }
    if let Some(bad) = u_cont.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rounding scores must be finite and nonnegative, got {bad}"
        )));
    }
    if n == 0 {
        return Ok(Selection {
            indices: vec![],
            density: 0.0,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| u_cont[b].total_cmp(&u_cont[a]).then(a.cmp(&b)));

    let mut admitted: Vec<usize> = Vec::new();
    let mut num = 0.0;
    let mut best_len = 0;
    let mut best_density = f64::NEG_INFINITY;
    for &v in &order {
        if !admitted.iter().all(|&w| compatible(m, forbidden, v, w)) {
            continue;
        }
        num += m[(v, v)] + 2.0 * admitted.iter().map(|&w| m[(v, w)]).sum::<f64>();
        admitted.push(v);
        let d = num / admitted.len() as f64;
        if better(d, admitted.len(), best_density, best_len) {
            best_density = d;
            best_len = admitted.len();
        }
    }
    let mut indices = admitted[..best_len].to_vec();
    indices.sort_unstable();
    Ok(Selection {
        indices,
        density: best_density,
    })
}

struct Relaxation<'a> {
    m: &'a DMatrix<f64>,
    /// 1 where a pair is incompatible, 0 elsewhere (and on the diagonal).
    conflict: DMatrix<f64>,
}

impl Relaxation<'_> {
    fn gradient_parts(&self, u: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        (self.m * u, &self.conflict * u)
    }

    fn objective(&self, u: &DVector<f64>, d: f64) -> f64 {
        let (mu, cu) = self.gradient_parts(u);
        u.dot(&mu) - d * u.dot(&cu)
    }
}

fn project(v: &DVector<f64>) -> Option<DVector<f64>> {
    let clipped = v.map(|x| x.max(0.0));
    let norm = clipped.norm();
    (norm > 0.0).then(|| clipped / norm)
}

fn support_is_feasible(u: &DVector<f64>, conflict: &DMatrix<f64>) -> bool {
    let max = u.max();
    let support: Vec<usize> = (0..u.len()).filter(|&i| u[i] > SUPPORT_TOL * max).collect();
    support
        .iter()
        .enumerate()
        .all(|(i, &p)| support[i + 1..].iter().all(|&q| conflict[(p, q)] == 0.0))
}

/// Continuous relaxation followed by rounding.
///
/// Maximizes `uᵀ(M - d·C̄)u` over the nonnegative part of the unit sphere,
/// where `C̄` marks incompatible pairs, growing `d` geometrically until the
/// support of `u` is feasible. Every homotopy stage's iterate is rounded and
/// the densest rounding is kept.
pub fn solve_relaxed(m: &DMatrix<f64>, forbidden: &PairMask, cfg: &SolverConfig) -> Result<Selection> {
    cfg.validate()?;
    let n = check_shape(m, forbidden)?;
    if n == 0 {
        return Ok(Selection {
            indices: vec![],
            density: 0.0,
        });
    }
    let conflict = DMatrix::from_fn(n, n, |p, q| if compatible(m, forbidden, p, q) { 0.0 } else { 1.0 });
    let relax = Relaxation { m, conflict };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut u = DVector::from_fn(n, |i, _| {
        let row: f64 = m.row(i).iter().map(|x| x.max(0.0)).sum();
        row + INIT_NOISE * rng.random::<f64>()
    });
    u /= u.norm();

    // the first singleton is always feasible and anchors the index tie-break
    let mut best = Selection {
        indices: vec![0],
        density: m[(0, 0)],
    };
    let first = refine_rounding(u.as_slice(), m, forbidden)?;
    if better_selection(&first, &best) {
        best = first;
    }
    let mut d = cfg.initial_penalty;
    let mut step = 1.0;
    for _ in 0..cfg.max_outer_iters {
        let mut f = relax.objective(&u, d);
        for _ in 0..cfg.max_inner_iters {
            let (mu, cu) = relax.gradient_parts(&u);
            let grad = (mu - cu * d) * 2.0;
            // projected gradient: tangent to the sphere, clipped at active bounds
            let radial = u.dot(&grad);
            let mut tangent = &grad - &u * radial;
            for i in 0..n {
                if u[i] <= 0.0 && tangent[i] < 0.0 {
                    tangent[i] = 0.0;
                }
            }
            if tangent.norm() < cfg.inner_tol {
                break;
            }
            let mut accepted = None;
            for _ in 0..40 {
                if let Some(cand) = project(&(&u + &grad * step)) {
                    let fc = relax.objective(&cand, d);
                    if fc > f {
                        accepted = Some((cand, fc));
                        break;
                    }
                }
                step *= 0.5;
            }
            match accepted {
                Some((cand, fc)) => {
                    let gain = fc - f;
                    u = cand;
                    f = fc;
                    step *= 2.0;
                    if gain <= f64::EPSILON * f.abs().max(1.0) {
                        break;
                    }
                }
                None => break,
            }
        }
        let rounded = refine_rounding(u.as_slice(), m, forbidden)?;
        if better_selection(&rounded, &best) {
            best = rounded;
        }
        if support_is_feasible(&u, &relax.conflict) {
            break;
        }
        d *= cfg.penalty_growth;
    }
    Ok(best)
}

/// Runs [`solve_relaxed`] on a consistency graph.
pub fn select_correspondences(graph: &ConsistencyGraph, cfg: &SolverConfig) -> Result<CorrespondenceSet> {
    let sel = solve_relaxed(&graph.weights, &graph.forbidden, cfg)?;
    Ok(CorrespondenceSet::from_selection(graph, &sel))
}
