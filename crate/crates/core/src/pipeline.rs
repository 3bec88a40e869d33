//! Graph construction, correspondence selection and registration in one call.

use std::time::{Duration, Instant};

use crate::association::{build_consistency_graph, MatchConfig};
use crate::error::Result;
use crate::landmarks::{Landmark, LandmarkSet};
use crate::registration::{estimate_transform, RegistrationResult};
use crate::solver::{select_correspondences, CorrespondenceSet, SolverConfig};

#[derive(Debug)]
pub struct MatchOutcome {
    pub correspondences: CorrespondenceSet,
    /// Kept separate so that a degenerate registration still reports the matches.
    pub registration: Result<RegistrationResult>,
    pub graph_time: Duration,
    pub solver_time: Duration,
}

/// Landmark pairs for a selection, first set first.
pub fn matched_landmarks(si: &LandmarkSet, sj: &LandmarkSet, set: &CorrespondenceSet) -> Vec<(Landmark, Landmark)> {
    set.selected
        .iter()
        .map(|h| {
            (
                si.get(h.a).expect("hypothesis id in first set").clone(),
                sj.get(h.b).expect("hypothesis id in second set").clone(),
            )
        })
        .collect()
}

/// Matches `si` against `sj` and estimates the transform taking `si` onto `sj`.
pub fn match_sets(
    si: &LandmarkSet,
    sj: &LandmarkSet,
    match_cfg: &MatchConfig,
    solver_cfg: &SolverConfig,
) -> Result<MatchOutcome> {
    solver_cfg.validate()?;
    let start = Instant::now();
    let graph = build_consistency_graph(si, sj, match_cfg)?;
    let graph_time = start.elapsed();
    let start = Instant::now();
    let correspondences = select_correspondences(&graph, solver_cfg)?;
    let solver_time = start.elapsed();
    let registration = estimate_transform(&matched_landmarks(si, sj, &correspondences));
    Ok(MatchOutcome {
        correspondences,
        registration,
        graph_time,
        solver_time,
    })
}
