use std::path::PathBuf;

use clap::Parser;
use serde_json::{json, Map, Value};

use pointerlab::ensembles::Objective;
use pointerlab::qbm::{power_law_fit, Qbm};

use crate::commands::{parse_objective, pointer_search};
use crate::output::{cfg_f64, cfg_str, csv_file, fmt_csv, CliError, CliResult, RangeSpec, RunRecord};

#[derive(Parser)]
pub struct Args {
    /// Impurity threshold in (0, 1).
    #[arg(long)]
    eps: Option<f64>,
    /// Temperature range LO:HI:N, log-spaced.
    #[arg(long = "t-range")]
    t_range: Option<String>,
    /// Beta search range LO:HI:N for the per-temperature pointer scans.
    #[arg(long = "beta-range")]
    beta_range: Option<String>,
    /// Mixing-time objective: exact | asymptotic.
    #[arg(long)]
    objective: Option<String>,
    /// Directory receiving fig4.csv and table1.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub struct FitOutput {
    pub eps: f64,
    pub samples: Vec<PerTemperature>,
    pub fit: pointerlab::qbm::PowerLawFit,
}

pub struct PerTemperature {
    pub temperature: f64,
    pub beta_star: f64,
    pub gamma_star: f64,
    pub tau_mix_star: f64,
    pub omega_star: f64,
}

/// Per-temperature pointer scans followed by the log-log OLS fit.
pub fn fit_over_temperatures(
    eps: f64,
    temperatures: &[f64],
    beta_range: RangeSpec,
    objective: Objective,
) -> Result<FitOutput, CliError> {
    let mut samples = Vec::with_capacity(temperatures.len());
    for &temperature in temperatures {
        let qbm = Qbm::new(temperature).map_err(CliError::from)?;
        let star = pointer_search(&qbm, eps, beta_range, objective)?;
        samples.push(PerTemperature {
            temperature,
            beta_star: star.beta_star,
            gamma_star: star.gamma_star,
            tau_mix_star: star.tau_mix_star,
            omega_star: star.omega_rate,
        });
    }
    let pairs: Vec<(f64, f64)> = samples
        .iter()
        .map(|s| (s.temperature, s.tau_mix_star))
        .collect();
    let fit = power_law_fit(&pairs).map_err(CliError::from)?;
    Ok(FitOutput { eps, samples, fit })
}

pub fn record(out: &FitOutput, t_range: &str) -> RunRecord {
    RunRecord::new(
        json!({"eps": out.eps, "t_range": t_range}),
        json!({
            "a": out.fit.intercept,
            "b": out.fit.slope,
            "stderr_a": out.fit.stderr_intercept,
            "stderr_b": out.fit.stderr_slope,
            "n_points": out.samples.len(),
            "samples": out.samples.iter().map(|s| json!({
                "T": s.temperature,
                "beta_star": s.beta_star,
                "gamma_star": s.gamma_star,
                "tau_mix_star": s.tau_mix_star,
                "omega_star": s.omega_star,
            })).collect::<Vec<_>>(),
        }),
        None,
    )
}

pub const FIG4_HEADER: [&str; 6] = [
    "T",
    "eps",
    "beta_star",
    "gamma_star",
    "tau_mix_star",
    "omega_star",
];

pub fn write_fig4_rows<W: std::io::Write>(
    sink: &mut crate::output::CsvSink<W>,
    out: &FitOutput,
) -> std::io::Result<()> {
    for s in &out.samples {
        sink.row(&[
            fmt_csv(s.temperature),
            fmt_csv(out.eps),
            fmt_csv(s.beta_star),
            fmt_csv(s.gamma_star),
            fmt_csv(s.tau_mix_star),
            fmt_csv(s.omega_star),
        ])?;
    }
    Ok(())
}

pub fn run(args: Args, config: &Map<String, Value>) -> CliResult {
    let eps = args
        .eps
        .or_else(|| cfg_f64(config, "eps"))
        .ok_or_else(|| CliError::Input("--eps is required".into()))?;
    let t_range_text = args
        .t_range
        .as_deref()
        .or_else(|| cfg_str(config, "t-range"))
        .unwrap_or("100:10000:20")
        .to_string();
    let t_range = RangeSpec::parse(&t_range_text)?;
    let beta_range = RangeSpec::parse(
        args.beta_range
            .as_deref()
            .or_else(|| cfg_str(config, "beta-range"))
            .unwrap_or("0.05:8.0:60"),
    )?;
    let objective = parse_objective(
        args.objective
            .as_deref()
            .or_else(|| cfg_str(config, "objective"))
            .unwrap_or("exact"),
    )?;

    let out = fit_over_temperatures(eps, &t_range.logarithmic(), beta_range, objective)?;
    let rec = record(&out, &t_range_text);

    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        let mut fig4 = csv_file(&dir.join("fig4.csv"), &FIG4_HEADER)?;
        write_fig4_rows(&mut fig4, &out)?;
        fig4.finish()?;
        rec.write_to(&dir.join("table1.json"))?;
    }
    rec.print()
}
