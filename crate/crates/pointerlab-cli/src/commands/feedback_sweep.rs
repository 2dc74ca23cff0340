use std::io;
use std::path::PathBuf;

use clap::Parser;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use pointerlab::control::{evaluate_feedback, FeedbackDesign};
use pointerlab::ensembles::Objective;
use pointerlab::qbm::{omega_from_point, Qbm};

use crate::commands::pointer_search;
use crate::output::{cfg_f64, cfg_str, csv_file, fmt_csv, CliError, CliResult, CsvSink, RangeSpec, RunRecord};

#[derive(Parser)]
pub struct Args {
    /// Scaled temperature.
    #[arg(long = "T")]
    temperature: Option<f64>,
    /// Impurity threshold in (0, 1).
    #[arg(long)]
    eps: Option<f64>,
    /// Dimensionless feedback strength (0 sweeps the open loop).
    #[arg(long)]
    k: Option<f64>,
    /// Boundary grid as LO:HI:N in beta.
    #[arg(long = "beta-range")]
    beta_range: Option<String>,
    /// Pointer mixing time override; computed from a pointer scan if absent.
    #[arg(long = "tau-star")]
    tau_star: Option<f64>,
    /// Directory receiving sweep.csv and summary.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the summary JSON instead of CSV rows.
    #[arg(long)]
    json: bool,
}

pub const SWEEP_HEADER: [&str; 7] = [
    "beta",
    "gamma",
    "tau_mix",
    "infidelity_exact",
    "infidelity_approx",
    "purity_exact",
    "flag",
];

pub struct SweepRow {
    pub beta: f64,
    pub gamma: f64,
    pub tau_mix: f64,
    pub infidelity_exact: f64,
    pub infidelity_approx: f64,
    pub purity_exact: f64,
}

pub struct Sweep {
    pub rows: Vec<SweepRow>,
    pub tau_star: f64,
    pub idx_tau_max: Option<usize>,
    pub idx_infidelity_min: Option<usize>,
    pub open_loop: bool,
}

/// Evaluate mixing time and controlled-state figures of merit along the
/// boundary. `k = 0` leaves the mean unstabilized: the fidelity columns
/// become NaN sentinels.
pub fn sweep_boundary(
    qbm: &Qbm,
    eps: f64,
    k: f64,
    tau_star: f64,
    betas: &[f64],
) -> Sweep {
    let open_loop = k <= 0.0;
    let design = if open_loop {
        None
    } else {
        FeedbackDesign::new(k, eps, tau_star, 1).ok()
    };
    let rows: Vec<SweepRow> = betas
        .par_iter()
        .map(|&beta| {
            let gamma = qbm.boundary_gamma(beta).unwrap_or(f64::NAN);
            let tau_mix = if gamma.is_finite() {
                qbm.mixing_time(beta, gamma, eps).unwrap_or(f64::NAN)
            } else {
                f64::NAN
            };
            let outcome = design.as_ref().and_then(|d| {
                omega_from_point(beta, gamma)
                    .ok()
                    .and_then(|om| evaluate_feedback(qbm.model(), &om, d).ok())
            });
            match outcome {
                Some(o) => SweepRow {
                    beta,
                    gamma,
                    tau_mix,
                    infidelity_exact: 1.0 - o.fidelity_exact,
                    infidelity_approx: 1.0 - o.fidelity_approx,
                    purity_exact: o.purity_exact,
                },
                None => SweepRow {
                    beta,
                    gamma,
                    tau_mix,
                    infidelity_exact: f64::NAN,
                    infidelity_approx: f64::NAN,
                    purity_exact: f64::NAN,
                },
            }
        })
        .collect();

    let mut idx_tau_max = None;
    let mut idx_inf_min = None;
    for (i, r) in rows.iter().enumerate() {
        if r.tau_mix.is_finite()
            && idx_tau_max.map_or(true, |j: usize| r.tau_mix > rows[j].tau_mix)
        {
            idx_tau_max = Some(i);
        }
        if r.infidelity_exact.is_finite()
            && idx_inf_min.map_or(true, |j: usize| r.infidelity_exact < rows[j].infidelity_exact)
        {
            idx_inf_min = Some(i);
        }
    }
    Sweep {
        rows,
        tau_star,
        idx_tau_max,
        idx_infidelity_min: idx_inf_min,
        open_loop,
    }
}

pub fn write_sweep<W: io::Write>(sink: &mut CsvSink<W>, sweep: &Sweep) -> io::Result<()> {
    for (i, r) in sweep.rows.iter().enumerate() {
        let mut flags = Vec::new();
        if Some(i) == sweep.idx_tau_max {
            flags.push("tau_max");
        }
        if Some(i) == sweep.idx_infidelity_min {
            flags.push("infidelity_min");
        }
        sink.row(&[
            fmt_csv(r.beta),
            fmt_csv(r.gamma),
            fmt_csv(r.tau_mix),
            fmt_csv(r.infidelity_exact),
            fmt_csv(r.infidelity_approx),
            fmt_csv(r.purity_exact),
            flags.join("+"),
        ])?;
    }
    Ok(())
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
    if k < 0.0 {
        return Err(CliError::Input(format!("k must be >= 0, got {k}")));
    }
    let range_text = args
        .beta_range
        .as_deref()
        .or_else(|| cfg_str(config, "beta-range"))
        .unwrap_or("0.4:5.0:200");
    let beta_range = RangeSpec::parse(range_text)?;

    let qbm = Qbm::new(temperature).map_err(CliError::from)?;
    let tau_star = match args.tau_star.or_else(|| cfg_f64(config, "tau-star")) {
        Some(t) if t > 0.0 => t,
        Some(t) => return Err(CliError::Input(format!("tau-star must be positive, got {t}"))),
        None => pointer_search(&qbm, eps, beta_range, Objective::Exact)?.tau_mix_star,
    };

    let sweep = sweep_boundary(&qbm, eps, k, tau_star, &beta_range.linear());
    if sweep.open_loop {
        eprintln!(
            "warning: k = 0 leaves the drift marginally stable; fidelity columns are NaN sentinels"
        );
    }

    let summary = RunRecord::new(
        json!({"T": temperature, "eps": eps, "k": k, "beta_range": range_text}),
        json!({
            "tau_star": sweep.tau_star,
            "beta_tau_max": sweep.idx_tau_max.map(|i| sweep.rows[i].beta),
            "beta_infidelity_min": sweep.idx_infidelity_min.map(|i| sweep.rows[i].beta),
            "grid_steps_between_optima": match (sweep.idx_tau_max, sweep.idx_infidelity_min) {
                (Some(a), Some(b)) => Some((a as i64 - b as i64).abs()),
                _ => None,
            },
            "open_loop": sweep.open_loop,
        }),
        None,
    );

    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        let mut file = csv_file(&dir.join("sweep.csv"), &SWEEP_HEADER)?;
        write_sweep(&mut file, &sweep)?;
        file.finish()?;
        summary.write_to(&dir.join("summary.json"))?;
    }

    if args.json {
        summary.print()?;
    } else {
        let stdout = io::stdout().lock();
        let mut sink = CsvSink::new(stdout, &SWEEP_HEADER)?;
        write_sweep(&mut sink, &sweep)?;
        sink.finish()?;
    }
    Ok(())
}
