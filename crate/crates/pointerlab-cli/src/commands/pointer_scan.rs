use std::io;
use std::path::PathBuf;

use clap::Parser;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use pointerlab::qbm::Qbm;

use crate::commands::{parse_objective, pointer_search};
use crate::output::{cfg_f64, cfg_str, csv_file, fmt_csv, CliError, CliResult, CsvSink, RangeSpec, RunRecord};

#[derive(Parser)]
pub struct Args {
    /// Scaled temperature.
    #[arg(long = "T")]
    temperature: Option<f64>,
    /// Impurity threshold in (0, 1).
    #[arg(long)]
    eps: Option<f64>,
    /// Boundary grid as LO:HI:N in beta.
    #[arg(long = "beta-range")]
    beta_range: Option<String>,
    /// Gamma resolution of the full-region grid written with --out.
    #[arg(long)]
    grid: Option<usize>,
    /// Mixing-time objective: exact | asymptotic.
    #[arg(long)]
    objective: Option<String>,
    /// Directory for scan.csv, summary.json, fig5a.csv, fig5b.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the summary JSON instead of CSV rows.
    #[arg(long)]
    json: bool,
}

struct ScanRow {
    beta: f64,
    gamma: f64,
    tau_mix: f64,
    tau_sur: f64,
}

const SCAN_HEADER: [&str; 4] = ["beta", "gamma", "tau_mix", "tau_sur"];

fn boundary_rows(qbm: &Qbm, eps: f64, betas: &[f64]) -> Vec<ScanRow> {
    betas
        .par_iter()
        .map(|&beta| {
            let gamma = qbm.boundary_gamma(beta).unwrap_or(f64::NAN);
            let (tau_mix, tau_sur) = if gamma.is_finite() {
                (
                    qbm.mixing_time(beta, gamma, eps).unwrap_or(f64::NAN),
                    qbm.survival_time(beta, gamma, eps).unwrap_or(f64::NAN),
                )
            } else {
                (f64::NAN, f64::NAN)
            };
            ScanRow {
                beta,
                gamma,
                tau_mix,
                tau_sur,
            }
        })
        .collect()
}

fn write_rows<W: io::Write>(sink: &mut CsvSink<W>, rows: &[ScanRow]) -> io::Result<()> {
    for r in rows {
        sink.row(&[
            fmt_csv(r.beta),
            fmt_csv(r.gamma),
            fmt_csv(r.tau_mix),
            fmt_csv(r.tau_sur),
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
    if !(eps > 0.0 && eps < 1.0) {
        return Err(CliError::Input(format!("eps must be in (0, 1), got {eps}")));
    }
    let range_text = args
        .beta_range
        .as_deref()
        .or_else(|| cfg_str(config, "beta-range"))
        .unwrap_or("0.4:5.0:100");
    let beta_range = RangeSpec::parse(range_text)?;
    let objective = parse_objective(
        args.objective
            .as_deref()
            .or_else(|| cfg_str(config, "objective"))
            .unwrap_or("exact"),
    )?;
    let grid = args
        .grid
        .or_else(|| cfg_f64(config, "grid").map(|v| v as usize))
        .unwrap_or(40);
    if grid < 2 {
        return Err(CliError::Input(format!(
            "--grid needs at least 2 points per axis, got {grid}"
        )));
    }

    let qbm = Qbm::new(temperature).map_err(CliError::from)?;
    let betas = beta_range.linear();
    let rows = boundary_rows(&qbm, eps, &betas);

    let star = pointer_search(&qbm, eps, beta_range, objective)?;
    let summary = RunRecord::new(
        json!({
            "T": temperature,
            "eps": eps,
            "beta_range": range_text,
            "objective": match objective {
                pointerlab::ensembles::Objective::Exact => "exact",
                pointerlab::ensembles::Objective::Asymptotic => "asymptotic",
            },
        }),
        json!({
            "beta_star": star.beta_star,
            "gamma_star": star.gamma_star,
            "tau_mix_star": star.tau_mix_star,
            "omega_star": star.omega_rate,
            "candidates_examined": star.search_trace.len(),
        }),
        None,
    );

    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        let mut scan = csv_file(&dir.join("scan.csv"), &SCAN_HEADER)?;
        write_rows(&mut scan, &rows)?;
        scan.finish()?;
        summary.write_to(&dir.join("summary.json"))?;

        // feasibility boundary over the whole admissible beta span
        let mut fig5a = csv_file(&dir.join("fig5a.csv"), &["beta", "gamma_boundary"])?;
        let wide = RangeSpec {
            lo: 1e-2,
            hi: 16.0 * temperature,
            points: 400,
        };
        for beta in wide.logarithmic() {
            if let Ok(gamma) = qbm.boundary_gamma(beta) {
                fig5a.row(&[fmt_csv(beta), fmt_csv(gamma)])?;
            }
        }
        fig5a.finish()?;

        // mixing/survival over the region interior (gamma fractions of the
        // boundary per beta)
        let mut fig5b = csv_file(&dir.join("fig5b.csv"), &SCAN_HEADER)?;
        let fractions: Vec<f64> = (1..=grid).map(|j| j as f64 / grid as f64).collect();
        let cells: Vec<ScanRow> = betas
            .par_iter()
            .flat_map_iter(|&beta| fractions.iter().map(move |&f| (beta, f)))
            .map(|(beta, f)| {
                let gamma = qbm.boundary_gamma(beta).map(|g| g * f).unwrap_or(f64::NAN);
                let (tau_mix, tau_sur) = if gamma.is_finite() {
                    (
                        qbm.mixing_time(beta, gamma, eps).unwrap_or(f64::NAN),
                        qbm.survival_time(beta, gamma, eps).unwrap_or(f64::NAN),
                    )
                } else {
                    (f64::NAN, f64::NAN)
                };
                ScanRow {
                    beta,
                    gamma,
                    tau_mix,
                    tau_sur,
                }
            })
            .collect();
        write_rows(&mut fig5b, &cells)?;
        fig5b.finish()?;
    }

    if args.json {
        summary.print()?;
    } else {
        let stdout = io::stdout().lock();
        let mut sink = CsvSink::new(stdout, &SCAN_HEADER)?;
        write_rows(&mut sink, &rows)?;
        sink.finish()?;
    }
    Ok(())
}
