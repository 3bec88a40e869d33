//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Everything runs inside a single test so that the wall-clock budgets are
//! measured without other tests competing for the cores. Run with
//! `cargo test -p graffmatch --test acceptance -- --nocapture` to see the
//! report.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DVector, Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use graffmatch::association::{build_consistency_graph, consistency, pairwise_distance, MatchConfig, Metric};
use graffmatch::benchmark::{
    read_per_pair, read_summary, run_benchmark, summarize, write_report, BenchmarkConfig, BenchmarkReport,
    PER_PAIR_FILE, SUMMARY_BY_CASE_FILE, SUMMARY_FILE,
};
use graffmatch::landmarks::{Landmark, LandmarkSet, Line3, Plane3, RigidTransform};
use graffmatch::manifold::{graff_distance, GraffElement};
use graffmatch::metrics::{lmr_curve, DEFAULT_GRID_STEP};
use graffmatch::pipeline::match_sets;
use graffmatch::registration::{alignment_error, estimate_transform, KAPPA_MAX};
use graffmatch::solver::{solve_exact, solve_relaxed, SolverConfig};
use graffmatch::synth::{generate_pair, generate_pair_resampled, SceneConfig};
use graffmatch::Error;

struct Report {
    failed: Vec<&'static str>,
}

impl Report {
    fn check(&mut self, name: &'static str, pass: bool, detail: String) {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(name);
        }
    }
}

fn unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

fn random_landmark(rng: &mut ChaCha8Rng, id: u64) -> Landmark {
    let p = unit(rng) * rng.random_range(0.0..50.0);
    if rng.random_bool(0.5) {
        Landmark::line(id, Line3::new(unit(rng), p).unwrap())
    } else {
        Landmark::plane(id, Plane3::through_point(unit(rng), p).unwrap())
    }
}

fn random_motion(rng: &mut ChaCha8Rng, max_t: f64) -> RigidTransform {
    let axis = Unit::new_normalize(unit(rng));
    let r = Rotation3::from_axis_angle(&axis, rng.random_range(-PI..PI));
    RigidTransform::from_rotation(r, unit(rng) * rng.random_range(0.0..max_t))
}

fn within(elapsed: Duration, budget_s: f64) -> bool {
    elapsed.as_secs_f64() < budget_s
}

fn invariance(rep: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut bad = 0;
    for _ in 0..1000 {
        let x = random_landmark(&mut rng, 0);
        let y = random_landmark(&mut rng, 1);
        let t = random_motion(&mut rng, 100.0);
        let d = graff_distance(&x.to_graff(), &y.to_graff(), 40.0).unwrap();
        let dt = graff_distance(&x.transformed(&t).to_graff(), &y.transformed(&t).to_graff(), 40.0).unwrap();
        let diff = (d - dt).abs();
        worst = worst.max(diff);
        if !(diff < 1e-9) {
            bad += 1;
        }
    }
    let elapsed = start.elapsed();
    rep.check(
        "invariance",
        bad == 0 && within(elapsed, 5.0),
        format!("1000 trials, max |Δd| = {worst:.2e}, {bad} over 1e-9, {:.3} s", elapsed.as_secs_f64()),
    );
}

fn ablation_non_invariance(rep: &mut Report) {
    let line = |p: [f64; 3]| Landmark::line(0, Line3::new(Vector3::x(), Vector3::from(p)).unwrap());
    let (a, b) = (line([0.0, 0.0, 0.0]), line([0.0, 10.0, 0.0]));
    let shift = RigidTransform::from_rotation(Rotation3::identity(), Vector3::new(0.0, 60.0, 80.0));
    let naive = MatchConfig::for_metric(Metric::GraffNaive);
    let graff = MatchConfig::for_metric(Metric::Graff);
    let d_naive = pairwise_distance(&a, &b, &naive).unwrap();
    let d_naive_t = pairwise_distance(&a.transformed(&shift), &b.transformed(&shift), &naive).unwrap();
    let change = (d_naive - d_naive_t).abs();
    let d_graff = pairwise_distance(&a, &b, &graff).unwrap();
    let d_graff_t = pairwise_distance(&a.transformed(&shift), &b.transformed(&shift), &graff).unwrap();

    let plane = |n: Vector3<f64>, d: f64, id| Landmark::plane(id, Plane3::new(n, d).unwrap());
    let (p, q) = (plane(Vector3::z(), 1.0, 0), plane(Vector3::x(), 1.0, 1));
    let cp = MatchConfig::for_metric(Metric::Cp);
    let c_i = pairwise_distance(&p, &q, &cp).unwrap();
    let c_near = pairwise_distance(&p, &q, &cp).unwrap();
    let far = RigidTransform::from_rotation(Rotation3::identity(), Vector3::new(10.0, 0.0, 10.0));
    let c_far = pairwise_distance(&p.transformed(&far), &q.transformed(&far), &cp).unwrap();
    let flips = consistency(c_i, c_near, &cp).is_some() && consistency(c_i, c_far, &cp).is_none();
    let g_i = pairwise_distance(&p, &q, &graff).unwrap();
    let g_far = pairwise_distance(&p.transformed(&far), &q.transformed(&far), &graff).unwrap();
    let graff_holds = consistency(g_i, g_far, &graff).is_some() && (d_graff - d_graff_t).abs() < 1e-12;

    rep.check(
        "ablation non-invariance",
        change > 0.1 && flips && graff_holds,
        format!(
            "naive Δd = {change:.3} rad under a 100 m shift; cp pair {} at identity, {} after (c = {:.2} m); shifted metric unchanged",
            if consistency(c_i, c_near, &cp).is_some() { "consistent" } else { "inconsistent" },
            if consistency(c_i, c_far, &cp).is_none() { "inconsistent" } else { "consistent" },
            (c_i - c_far).abs()
        ),
    );
}

fn point_curve(rep: &mut Report) {
    let origin = GraffElement::point(DVector::zeros(3));
    let mut worst: f64 = 0.0;
    for rho in [1.0, 40.0] {
        for s in [0.0, 0.5, 1.0, 2.0, 10.0, 100.0] {
            let p = GraffElement::point(DVector::from_vec(vec![s, 0.0, 0.0]));
            let d = graff_distance(&origin, &p, rho).unwrap();
            worst = worst.max((d - (s / rho).atan()).abs());
        }
    }
    let far: Vec<f64> = [1e2, 1e3, 1e4, 1e6]
        .iter()
        .map(|&s| graff_distance(&origin, &GraffElement::point(DVector::from_vec(vec![0.0, s, 0.0])), 1.0).unwrap())
        .collect();
    let rising = far.windows(2).all(|w| w[1] > w[0]);
    let gap = FRAC_PI_2 - far[far.len() - 1];
    rep.check(
        "point closed form",
        worst < 1e-12 && rising && gap > 0.0 && gap < 1e-5,
        format!("max |d - arctan(s/ρ)| = {worst:.1e}; π/2 - d(1e6) = {gap:.1e}"),
    );
}

fn worked_example(rep: &mut Report) {
    let a = Line3::new(Vector3::x(), Vector3::zeros()).unwrap();
    let b = Line3::new(Vector3::x(), Vector3::new(0.0, 1.0, 0.0)).unwrap();
    let d = graff_distance(&Landmark::line(0, a).to_graff(), &Landmark::line(1, b).to_graff(), 1.0).unwrap();
    rep.check(
        "parallel lines example",
        (d - FRAC_PI_4).abs() < 1e-12,
        format!("d = {d:.15}, |d - π/4| = {:.1e}", (d - FRAC_PI_4).abs()),
    );
}

fn solver_oracle(rep: &mut Report) {
    let start = Instant::now();
    let cfg = MatchConfig::default();
    let solver = SolverConfig::default();
    let (mut instances, mut close, mut same, mut seed) = (0, 0, 0, 0u64);
    let mut sizes = Vec::new();
    while instances < 200 {
        let scene = SceneConfig {
            seed,
            num_lines: 3,
            num_planes: 3,
            dropout: 0.3,
            spurious: 1,
            ..SceneConfig::default()
        };
        seed += 1;
        let Ok((pair, _)) = generate_pair_resampled(&scene, 16) else {
            continue;
        };
        let graph = build_consistency_graph(&pair.set_i, &pair.set_j, &cfg).unwrap();
        if graph.len() < 2 || graph.len() > 12 {
            continue;
        }
        sizes.push(graph.len());
        instances += 1;
        let exact = solve_exact(&graph.weights, &graph.forbidden).unwrap();
        let relaxed = solve_relaxed(&graph.weights, &graph.forbidden, &solver).unwrap();
        if relaxed.density >= 0.95 * exact.density {
            close += 1;
        }
        if relaxed.indices == exact.indices {
            same += 1;
        }
    }
    let elapsed = start.elapsed();
    let mean_m = sizes.iter().sum::<usize>() as f64 / sizes.len() as f64;
    rep.check(
        "solver oracle",
        close >= 190 && same >= 160 && within(elapsed, 30.0),
        format!(
            "200 instances (mean m = {mean_m:.1}): density ≥ 0.95x exact in {close}, identical set in {same}, {:.2} s",
            elapsed.as_secs_f64()
        ),
    );
}

fn registration_exact(rep: &mut Report) {
    let (mut scenes, mut ok, mut seed) = (0, 0, 0u64);
    let (mut worst_r, mut worst_t): (f64, f64) = (0.0, 0.0);
    let mut skipped = 0;
    while scenes < 500 {
        let cfg = SceneConfig {
            seed: 10_000 + seed,
            ..SceneConfig::default()
        }
        .noiseless();
        seed += 1;
        let pair = match generate_pair(&cfg) {
            Ok(p) => p,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        let reg = match estimate_transform(&pair.true_landmark_pairs()) {
            Ok(r) if r.kappa < KAPPA_MAX => r,
            _ => {
                skipped += 1;
                continue;
            }
        };
        scenes += 1;
        let err = alignment_error(&reg.transform, &pair.truth);
        worst_r = worst_r.max(err.rot_error);
        worst_t = worst_t.max(err.trans_error);
        if err.rot_error < 1e-9 && err.trans_error < 1e-9 {
            ok += 1;
        }
    }
    rep.check(
        "registration exactness",
        ok == 500,
        format!("{ok}/500 exact (skipped {skipped} with κ ≥ 1e3); max errors {worst_r:.1e} rad, {worst_t:.1e} m"),
    );
}

fn degeneracy(rep: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xde);
    let (mut trials, mut degenerate) = (0, 0);
    for k in 0..200 {
        let axis = unit(&mut rng);
        let n = 2 + k % 6;
        let (si, sj): (Vec<Landmark>, Vec<Landmark>) = if k % 2 == 0 {
            // parallel planes at distinct offsets
            (0..n)
                .map(|i| Landmark::plane(i as u64, Plane3::new(axis, i as f64 * 3.0 - 5.0).unwrap()))
                .map(|l| (l.clone(), l))
                .unzip()
        } else {
            // lines on one common axis, at different anchor points
            let base = unit(&mut rng) * 10.0;
            (0..n)
                .map(|i| Landmark::line(i as u64, Line3::new(axis, base + axis * i as f64).unwrap()))
                .map(|l| (l.clone(), l))
                .unzip()
        };
        let t = random_motion(&mut rng, 20.0);
        let sj: Vec<Landmark> = sj.iter().map(|l| l.transformed(&t)).collect();
        let pairs: Vec<(Landmark, Landmark)> = si.iter().cloned().zip(sj.iter().cloned()).collect();
        trials += 2;
        if matches!(estimate_transform(&pairs), Err(Error::Degenerate { .. })) {
            degenerate += 1;
        }
        let (a, b) = (LandmarkSet::new("i", si).unwrap(), LandmarkSet::new("j", sj).unwrap());
        let out = match_sets(&a, &b, &MatchConfig::default(), &SolverConfig::default()).unwrap();
        if matches!(out.registration, Err(Error::Degenerate { .. })) {
            degenerate += 1;
        }
    }
    rep.check(
        "degeneracy",
        degenerate == trials,
        format!("{degenerate}/{trials} parallel-plane and collinear-line fixtures reported degenerate"),
    );
}

fn end_to_end(rep: &mut Report) -> (BenchmarkConfig, BenchmarkReport) {
    let cfg = BenchmarkConfig::default();
    let start = Instant::now();
    let report = run_benchmark(&cfg).unwrap();
    let elapsed = start.elapsed();
    let s = |m| report.summary_for(m).unwrap();
    let graff = s(Metric::Graff);
    let others = [Metric::GraffNaive, Metric::Centroid, Metric::Cp];
    let ordered = others.iter().all(|&m| graff.auc > s(m).auc);
    let detail = Metric::ALL
        .iter()
        .map(|&m| format!("{} recall {:.1}% AUC {:.3}", m, s(m).recall_pct, s(m).auc))
        .collect::<Vec<_>>()
        .join("; ");
    rep.check(
        "end-to-end benchmark",
        graff.recall_pct >= 90.0 && ordered && within(elapsed, 300.0),
        format!("{} pairs: {detail}; {:.1} s", cfg.num_pairs, elapsed.as_secs_f64()),
    );
    (cfg, report)
}

fn aggregation(rep: &mut Report, cfg: &BenchmarkConfig, report: &BenchmarkReport) {
    let dir = tempfile::tempdir().unwrap();
    write_report(report, dir.path()).unwrap();
    let rows = read_per_pair(dir.path().join(PER_PAIR_FILE)).unwrap();
    let summary = read_summary(dir.path().join(SUMMARY_FILE)).unwrap();
    let by_case = read_summary(dir.path().join(SUMMARY_BY_CASE_FILE)).unwrap();
    let (want_summary, want_by_case) = summarize(&rows, cfg.tau_oir);
    let consistent = rows == report.rows && summary == want_summary && by_case == want_by_case;

    let mut monotone = true;
    for m in Metric::ALL {
        let oirs: Vec<f64> = rows.iter().filter(|r| r.metric == m).map(|r| r.oir).collect();
        let curve = lmr_curve(&oirs, DEFAULT_GRID_STEP);
        monotone &= curve.values.windows(2).all(|w| w[1] <= w[0]);
        let successes = rows.iter().filter(|r| r.metric == m && r.success).count();
        monotone &= summary.iter().any(|s| s.metric == m && s.successes == successes);
    }
    rep.check(
        "aggregation",
        consistent && monotone,
        format!(
            "{} rows; summaries recomputed from CSV {}; LMR curves {}",
            rows.len(),
            if consistent { "match exactly" } else { "differ" },
            if monotone { "non-increasing" } else { "not monotone" }
        ),
    );
}

fn run_cli_benchmark(config: &Path, threads: &str, out: &Path) -> Vec<Vec<u8>> {
    let status = Command::new(env!("CARGO_BIN_EXE_graffmatch"))
        .arg("benchmark")
        .arg("--config")
        .arg(config)
        .args(["--threads", threads, "--out"])
        .arg(out)
        .output()
        .expect("binary runs");
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    [PER_PAIR_FILE, SUMMARY_FILE, SUMMARY_BY_CASE_FILE]
        .iter()
        .map(|f| std::fs::read(out.join(f)).unwrap())
        .collect()
}

fn determinism(rep: &mut Report) {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bench.toml");
    let cfg = BenchmarkConfig {
        seed: 500,
        num_pairs: 40,
        ..BenchmarkConfig::default()
    };
    std::fs::write(&config, cfg.to_toml()).unwrap();
    let a = run_cli_benchmark(&config, "4", &dir.path().join("a"));
    let b = run_cli_benchmark(&config, "4", &dir.path().join("b"));
    let c = run_cli_benchmark(&config, "1", &dir.path().join("c"));
    rep.check(
        "determinism",
        a == b && a == c,
        format!(
            "{} pairs x 4 metrics, CSV bytes identical across two 4-thread runs: {}, and vs 1 thread: {}",
            cfg.num_pairs,
            a == b,
            a == c
        ),
    );
}

#[test]
fn acceptance_criteria() {
    let mut rep = Report { failed: Vec::new() };
    invariance(&mut rep);
    ablation_non_invariance(&mut rep);
    point_curve(&mut rep);
    worked_example(&mut rep);
    solver_oracle(&mut rep);
    registration_exact(&mut rep);
    degeneracy(&mut rep);
    let (cfg, report) = end_to_end(&mut rep);
    aggregation(&mut rep, &cfg, &report);
    determinism(&mut rep);
    assert!(rep.failed.is_empty(), "failed criteria: {:?}", rep.failed);
}
