use std::path::PathBuf;

use clap::Parser;
use serde_json::{json, Map, Value};

use pointerlab::control::{closed_loop_drift, mean_covariance, noise_covariance, FeedbackDesign};
use pointerlab::ensembles::Objective;
use pointerlab::matops::frobenius;
use pointerlab::qbm::{omega_from_point, Qbm};
use pointerlab::trajectories::{ergodic_stats, noise_factor, simulate_mean, TrajectoryConfig};

use crate::commands::pointer_search;
use crate::output::{cfg_f64, cfg_u64, csv_file, fmt_csv, CliError, CliResult, RangeSpec, RunRecord};

#[derive(Parser)]
pub struct Args {
    /// Scaled temperature.
    #[arg(long = "T")]
    temperature: Option<f64>,
    /// Impurity threshold in (0, 1).
    #[arg(long)]
    eps: Option<f64>,
    /// Dimensionless feedback strength (> 0).
    #[arg(long)]
    k: Option<f64>,
    /// Ensemble parameter beta; pointer optimum when omitted.
    #[arg(long)]
    beta: Option<f64>,
    /// Ensemble parameter gamma; boundary value when omitted.
    #[arg(long)]
    gamma: Option<f64>,
    /// RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Integration step; tau*/1000 when omitted.
    #[arg(long)]
    dt: Option<f64>,
    /// Recorded steps after burn-in.
    #[arg(long)]
    steps: Option<u64>,
    /// Burn-in steps; 10 closed-loop time constants when omitted.
    #[arg(long = "burn-in")]
    burn_in: Option<u64>,
    /// Optional CSV dump of the recorded path (step, q, p).
    #[arg(long = "path-csv")]
    path_csv: Option<PathBuf>,
    /// Directory receiving stats.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: Args, config: &Map<String, Value>) -> CliResult {
    let temperature = args
        .temperature
        .or_else(|| cfg_f64(config, "T"))
        .ok_or_else(|| CliError::Input("--T is required".into()))?;
    let eps = args
        .eps
        .or_else(|| cfg_f64(config, "eps"))
        .ok_or_else(|| CliError::Input("--eps is required".into()))?;
    let k = args
        .k
        .or_else(|| cfg_f64(config, "k"))
        .ok_or_else(|| CliError::Input("--k is required".into()))?;
    if !(k > 0.0) {
        return Err(CliError::Input(
            "simulation needs k > 0; the open loop has no stationary mean".into(),
        ));
    }
    let seed = args.seed.or_else(|| cfg_u64(config, "seed")).unwrap_or(42);

    let qbm = Qbm::new(temperature).map_err(CliError::from)?;
    let default_range = RangeSpec {
        lo: 0.4,
        hi: 5.0,
        points: 60,
    };
    let star = pointer_search(&qbm, eps, default_range, Objective::Exact)?;
    let (beta, gamma) = match (args.beta.or_else(|| cfg_f64(config, "beta")), args.gamma) {
        (Some(b), Some(g)) => (b, g),
        (Some(b), None) => (b, qbm.boundary_gamma(b).map_err(CliError::from)?),
        (None, _) => (star.beta_star, star.gamma_star),
    };
    let omega = omega_from_point(beta, gamma).map_err(CliError::from)?;
    let tau_star = star.tau_mix_star;

    let design = FeedbackDesign::new(k, eps, tau_star, 1).map_err(CliError::from)?;
    let n = closed_loop_drift(qbm.model().drift(), &design.gain);
    let noise = noise_covariance(qbm.model(), &omega);
    let m_analytic = mean_covariance(&n, &noise).map_err(CliError::from)?;
    let b = noise_factor(qbm.model(), &omega).map_err(CliError::from)?;

    let dt = match args.dt.or_else(|| cfg_f64(config, "dt")) {
        Some(v) if v > 0.0 => v,
        Some(v) => return Err(CliError::Input(format!("dt must be positive, got {v}"))),
        None => tau_star / 1000.0,
    };
    let slowest = n
        .complex_eigenvalues()
        .iter()
        .map(|e| e.re.abs())
        .fold(f64::INFINITY, f64::min);
    let burn_in = args
        .burn_in
        .or_else(|| cfg_u64(config, "burn-in"))
        .unwrap_or_else(|| (10.0 / (slowest * dt)).ceil() as u64) as usize;
    let steps = args
        .steps
        .or_else(|| cfg_u64(config, "steps"))
        .unwrap_or(1_000_000) as usize;

    let mut warnings = 0usize;
    if dt * frobenius(&n) > 0.1 {
        eprintln!(
            "warning: dt * ||N|| = {:.3} exceeds 0.1; integrator bias may be visible",
            dt * frobenius(&n)
        );
        warnings += 1;
    }

    let cfg = TrajectoryConfig {
        dt,
        steps,
        burn_in,
        seed,
        initial_mean: vec![0.0; 2],
    };
    let path = simulate_mean(&n, &b, &cfg).map_err(CliError::from)?;
    let stats = ergodic_stats(&path, burn_in).map_err(CliError::from)?;
    let emp = stats.cov_matrix();
    let rel_error = frobenius(&(&emp - &m_analytic)) / frobenius(&m_analytic);

    if let Some(path_file) = &args.path_csv {
        let mut sink = csv_file(path_file, &["step", "q", "p"])?;
        for (i, x) in path[burn_in + 1..].iter().enumerate() {
            sink.row(&[i.to_string(), fmt_csv(x[0]), fmt_csv(x[1])])?;
        }
        sink.finish()?;
    }

    let record = RunRecord::new(
        json!({
            "T": temperature, "eps": eps, "k": k,
            "beta": beta, "gamma": gamma, "tau_star": tau_star,
            "dt": dt, "steps": steps, "burn_in": burn_in,
        }),
        json!({
            "analytic_m": [[m_analytic[(0,0)], m_analytic[(0,1)]], [m_analytic[(1,0)], m_analytic[(1,1)]]],
            "empirical_cov": stats.empirical_cov,
            "empirical_mean": stats.empirical_mean,
            "rel_error_frobenius": rel_error,
            "n_samples": stats.n_samples,
            "warnings": warnings,
        }),
        Some(seed),
    );
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        record.write_to(&dir.join("stats.json"))?;
    }
    record.print()
}
