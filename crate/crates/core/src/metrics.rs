//! Correspondence quality metrics: output inlier ratio and landmark-match recall.

use crate::error::Result;
use crate::manifold::graff_distance;
use crate::solver::CorrespondenceSet;
use crate::synth::BenchmarkPair;

pub const DEFAULT_TAU_D_DEG: f64 = 6.0;
pub const DEFAULT_TAU_OIR: f64 = 0.8;
pub const DEFAULT_GRID_STEP: f64 = 0.01;

/// Fraction of selected matches whose `d_Graff` after ground-truth alignment
/// is below `tau_d`. An empty selection scores 0.
pub fn compute_oir(selected: &CorrespondenceSet, pair: &BenchmarkPair, tau_d: f64, rho: f64) -> Result<f64> {
    Ok(match count_inliers(selected, pair, tau_d, rho)? {
        0 => 0.0,
        n => n as f64 / selected.len() as f64,
    })
}

pub fn count_inliers(selected: &CorrespondenceSet, pair: &BenchmarkPair, tau_d: f64, rho: f64) -> Result<usize> {
    let back = pair.truth.inverse();
    let mut n = 0;
    for h in &selected.selected {
        let (Some(x), Some(y)) = (pair.set_i.get(h.a), pair.set_j.get(h.b)) else {
            continue;
        };
        if graff_distance(&x.to_graff(), &y.transformed(&back).to_graff(), rho)? < tau_d {
            n += 1;
        }
    }
    Ok(n)
}

/// Fraction of pairs with OIR strictly above `tau_oir`; 0 for no pairs.
pub fn compute_lmr(oirs: &[f64], tau_oir: f64) -> f64 {
    if oirs.is_empty() {
        return 0.0;
    }
    oirs.iter().filter(|&&o| o > tau_oir).count() as f64 / oirs.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmrCurve {
    pub taus: Vec<f64>,
    pub values: Vec<f64>,
}

/// LMR sampled on `0, step, 2 step, ..., 1`. `step` must divide 1 into a whole
/// number of intervals (rounded otherwise).
pub fn lmr_curve(oirs: &[f64], step: f64) -> LmrCurve {
    let n = (1.0 / step).round().max(1.0) as usize;
    let taus: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
    let values = taus.iter().map(|&t| compute_lmr(oirs, t)).collect();
    LmrCurve { taus, values }
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &LmrCurve) -> f64 {
    curve
        .taus
        .windows(2)
        .zip(curve.values.windows(2))
        .map(|(t, v)| (t[1] - t[0]) * (v[0] + v[1]) / 2.0)
        .sum()
}

/// AUC on the default 0.01 grid.
pub fn lmr_auc(oirs: &[f64]) -> f64 {
    auc(&lmr_curve(oirs, DEFAULT_GRID_STEP))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::association::{CorrespondenceHypothesis, MatchConfig};
    use crate::landmarks::LandmarkKind;
    use crate::synth::{generate_pair, SceneConfig};

    #[test]
    fn lmr_examples() {
        assert_eq!(compute_lmr(&[1.0, 1.0, 1.0], 0.8), 1.0);
        assert_eq!(compute_lmr(&[1.0, 0.5], 0.8), 0.5);
        assert_eq!(compute_lmr(&[0.9, 0.7, 0.4], 0.8), 1.0 / 3.0);
        assert_eq!(compute_lmr(&[0.8], 0.8), 0.0);
    }

    #[test]
    fn auc_of_perfect_pairs() {
        let a = lmr_auc(&[1.0; 5]);
        assert!((a - 0.995).abs() < 1e-12, "{a}");
        assert_eq!(lmr_auc(&[0.0; 5]), 0.0);
    }

    #[test]
    fn curve_is_non_increasing() {
        let c = lmr_curve(&[0.1, 0.35, 0.5, 0.5, 0.99, 1.0], 0.01);
        assert_eq!(c.taus.len(), 101);
        assert!(c.values.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn oir_examples() {
        let cfg = SceneConfig {
            seed: 4,
            num_lines: 4,
            num_planes: 4,
            ..SceneConfig::default()
        }
        .noiseless();
        let pair = generate_pair(&cfg).unwrap();
        let tau = DEFAULT_TAU_D_DEG.to_radians();
        let rho = MatchConfig::default().rho;
        let hyp = |a, b| {
            let kind = pair.set_i.get(a).unwrap().kind();
            CorrespondenceHypothesis { a, b, kind }
        };
        let set = |pairs: Vec<(u64, u64)>| CorrespondenceSet {
            indicator: vec![],
            density: 1.0,
            selected: pairs.into_iter().map(|(a, b)| hyp(a, b)).collect(),
        };

        let truth = set(pair.true_matches.clone());
        assert_eq!(compute_oir(&truth, &pair, tau, rho).unwrap(), 1.0);
        assert_eq!(compute_oir(&set(vec![]), &pair, tau, rho).unwrap(), 0.0);

        // Pair every true plane match with a wrong same-kind partner.
        let planes: Vec<(u64, u64)> = pair
            .true_matches
            .iter()
            .copied()
            .filter(|&(a, _)| pair.set_i.get(a).unwrap().kind() == LandmarkKind::Plane)
            .collect();
        let mut mixed = planes.clone();
        for k in 0..planes.len() {
            mixed.push((planes[k].0, planes[(k + 1) % planes.len()].1));
        }
        assert_eq!(compute_oir(&set(mixed), &pair, tau, rho).unwrap(), 0.5);
    }
}
