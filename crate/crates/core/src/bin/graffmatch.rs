use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use graffmatch::association::{MatchConfig, Metric};
use graffmatch::benchmark::{
    run_benchmark, sweep_rho, write_report, write_rho_sweep, BenchmarkConfig, RHO_SWEEP_FILE,
};
use graffmatch::landmarks::load_landmark_set;
use graffmatch::pipeline::match_sets;
use graffmatch::solver::SolverConfig;
use graffmatch::synth::{generate_pair_resampled, write_pair_dir, SceneConfig};
use graffmatch::Error;

/// Global matching and registration of 3D line and plane landmarks.
#[derive(Parser)]
#[command(name = "graffmatch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Match two landmark-set files and estimate the transform between them.
    Match(MatchArgs),
    /// Run a seeded benchmark sweep and write CSV reports.
    Benchmark(BenchArgs),
    /// Benchmark AUC for several values of rho.
    SweepRho(SweepArgs),
    /// Write a synthetic benchmark pair as landmark-set and truth files.
    GenScene(GenArgs),
}

#[derive(Args)]
struct MatchParams {
    /// Consistency gate (default depends on the metric).
    #[arg(long, env = "GRAFFMATCH_EPSILON")]
    epsilon: Option<f64>,
    /// Consistency weight falloff (default depends on the metric).
    #[arg(long, env = "GRAFFMATCH_SIGMA")]
    sigma: Option<f64>,
    /// Displacement scaling in meters.
    #[arg(long, env = "GRAFFMATCH_RHO")]
    rho: Option<f64>,
    /// Seed for the solver's initialization (and scene generation where applicable).
    #[arg(long, env = "GRAFFMATCH_SEED")]
    seed: Option<u64>,
}

#[derive(Args)]
struct MatchArgs {
    file_i: PathBuf,
    file_j: PathBuf,
    #[arg(long, env = "GRAFFMATCH_METRIC", default_value = "graff")]
    metric: Metric,
    #[command(flatten)]
    params: MatchParams,
    /// Also write the JSON result to this file.
    #[arg(long, env = "GRAFFMATCH_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// TOML benchmark configuration; built-in defaults otherwise.
    #[arg(long, env = "GRAFFMATCH_CONFIG")]
    config: Option<PathBuf>,
    /// Restrict the run to one metric.
    #[arg(long, env = "GRAFFMATCH_METRIC")]
    metric: Option<Metric>,
    #[command(flatten)]
    params: MatchParams,
    #[arg(long, env = "GRAFFMATCH_NUM_PAIRS")]
    num_pairs: Option<usize>,
    /// Inlier distance gate in degrees.
    #[arg(long, env = "GRAFFMATCH_TAU_D_DEG")]
    tau_d_deg: Option<f64>,
    /// OIR threshold for the headline LMR.
    #[arg(long, env = "GRAFFMATCH_TAU_OIR")]
    tau_oir: Option<f64>,
    /// Worker threads; 0 picks automatically.
    #[arg(long, env = "GRAFFMATCH_THREADS")]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, env = "GRAFFMATCH_OUT", default_value = "benchmark-out")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    bench: BenchArgs,
    /// Comma-separated list of rho values in meters.
    #[arg(long = "rho-values", env = "GRAFFMATCH_RHO_VALUES", value_delimiter = ',', default_value = "10,40,160")]
    rho_values: Vec<f64>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, env = "GRAFFMATCH_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 15)]
    num_lines: usize,
    #[arg(long, default_value_t = 15)]
    num_planes: usize,
    #[arg(long, default_value_t = 0.6)]
    dropout: f64,
    #[arg(long, default_value_t = 0)]
    spurious: usize,
    /// Disable noise, dropout, spurious landmarks and centroid jitter.
    #[arg(long)]
    noiseless: bool,
    #[arg(long, env = "GRAFFMATCH_OUT", default_value = "scene")]
    out: PathBuf,
}

/// Error with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::Degenerate { .. }) { 2 } else { 1 };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Serialize)]
struct MatchOutput {
    metric: Metric,
    status: &'static str,
    matches: Vec<(u64, u64)>,
    density: f64,
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    rotation: Option<[f64; 9]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    translation_kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    graph_ms: f64,
    solver_ms: f64,
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure {
        code: 1,
        message: format!("{}: {e}", path.display()),
    })
}

fn match_config(metric: Metric, p: &MatchParams) -> MatchConfig {
    let mut cfg = MatchConfig::for_metric(metric);
    if let Some(e) = p.epsilon {
        cfg.epsilon = e;
    }
    if let Some(s) = p.sigma {
        cfg.sigma = s;
    }
    if let Some(r) = p.rho {
        cfg.rho = r;
    }
    cfg
}

fn cmd_match(args: MatchArgs) -> Result<(), Failure> {
    let si = load_landmark_set(&args.file_i)?;
    let sj = load_landmark_set(&args.file_j)?;
    let cfg = match_config(args.metric, &args.params);
    let solver = SolverConfig {
        seed: args.params.seed.unwrap_or(0),
        ..SolverConfig::default()
    };
    let outcome = match_sets(&si, &sj, &cfg, &solver)?;
    let mut out = MatchOutput {
        metric: args.metric,
        status: "ok",
        matches: outcome.correspondences.pairs(),
        density: outcome.correspondences.density,
        rotation: None,
        t: None,
        kappa: None,
        translation_kappa: None,
        error: None,
        graph_ms: outcome.graph_time.as_secs_f64() * 1e3,
        solver_ms: outcome.solver_time.as_secs_f64() * 1e3,
    };
    let failure = match outcome.registration {
        Ok(reg) => {
            let t = reg.transform.translation();
            out.rotation = Some(reg.transform.rotation_row_major());
            out.t = Some([t.x, t.y, t.z]);
            out.kappa = Some(reg.kappa);
            out.translation_kappa = Some(reg.translation_kappa);
            None
        }
        Err(e) => {
            out.status = if matches!(e, Error::Degenerate { .. }) { "degenerate" } else { "failed" };
            out.error = Some(e.to_string());
            Some(Failure::from(e))
        }
    };
    let text = serde_json::to_string_pretty(&out).expect("match output serializes") + "\n";
    print!("{text}");
    if let Some(path) = &args.out {
        write_text(path, &text)?;
    }
    failure.map_or(Ok(()), Err)
}

fn bench_config(args: &BenchArgs) -> Result<BenchmarkConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => BenchmarkConfig::load(path)?,
        None => BenchmarkConfig::default(),
    };
    if let Some(m) = args.metric {
        cfg.metrics = vec![m];
    }
    // Gate and falloff overrides apply to every metric family in the run.
    if let Some(e) = args.params.epsilon {
        cfg.graff_epsilon = e;
        cfg.euclidean_epsilon = e;
    }
    if let Some(s) = args.params.sigma {
        cfg.graff_sigma = s;
        cfg.euclidean_sigma = s;
    }
    if let Some(r) = args.params.rho {
        cfg.rho = r;
    }
    if let Some(s) = args.params.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.num_pairs {
        cfg.num_pairs = n;
    }
    if let Some(t) = args.tau_d_deg {
        cfg.tau_d_deg = t;
    }
    if let Some(t) = args.tau_oir {
        cfg.tau_oir = t;
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    Ok(cfg)
}

fn cmd_benchmark(args: BenchArgs) -> Result<(), Failure> {
    let cfg = bench_config(&args)?;
    let report = run_benchmark(&cfg)?;
    write_report(&report, &args.out)?;
    for s in &report.summary {
        println!(
            "{:<12} pairs {:>4}  recall {:>6.2}%  LMR@{} {:.3}  AUC {:.3}",
            s.metric.name(),
            s.pairs,
            s.recall_pct,
            cfg.tau_oir,
            s.lmr,
            s.auc
        );
    }
    Ok(())
}

fn cmd_sweep_rho(args: SweepArgs) -> Result<(), Failure> {
    let cfg = bench_config(&args.bench)?;
    let rows = sweep_rho(&cfg, &args.rho_values)?;
    fs::create_dir_all(&args.bench.out).map_err(|e| Failure {
        code: 1,
        message: format!("{}: {e}", args.bench.out.display()),
    })?;
    write_rho_sweep(&rows, args.bench.out.join(RHO_SWEEP_FILE))?;
    for r in &rows {
        println!("rho {:>8}  {:<12} AUC {:.3}  recall {:.2}%", r.rho, r.metric.name(), r.auc, r.recall_pct);
    }
    Ok(())
}

fn cmd_gen_scene(args: GenArgs) -> Result<(), Failure> {
    let mut cfg = SceneConfig {
        seed: args.seed,
        num_lines: args.num_lines,
        num_planes: args.num_planes,
        dropout: args.dropout,
        spurious: args.spurious,
        ..SceneConfig::default()
    };
    if args.noiseless {
        cfg = cfg.noiseless();
    }
    let (pair, seed) = generate_pair_resampled(&cfg, 16)?;
    write_pair_dir(&pair, &args.out)?;
    println!(
        "wrote {} (seed {seed}, {} true matches, iir {:.4})",
        args.out.display(),
        pair.true_matches.len(),
        pair.iir
    );
    Ok(())
}

fn main() -> ExitCode {
    // usage errors exit with 1 so that 2 stays reserved for degenerate geometry
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Match(a) => cmd_match(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::SweepRho(a) => cmd_sweep_rho(a),
        Command::GenScene(a) => cmd_gen_scene(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
