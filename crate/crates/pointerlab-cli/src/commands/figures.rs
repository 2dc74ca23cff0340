use std::path::{Path, PathBuf};

use clap::Parser;
use serde_json::{Map, Value};

use pointerlab::ensembles::Objective;
use pointerlab::qbm::Qbm;

use crate::commands::{fit_powerlaw, pointer_search};
use crate::output::{cfg_str, csv_file, fmt_csv, CliError, CliResult, RangeSpec};

#[derive(Parser)]
pub struct Args {
    /// Output directory for fig4.csv ... fig7b.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Resolution of the boundary sweeps.
    #[arg(long, default_value_t = 200)]
    grid: usize,
}

/// Boundary sweep written as one figure panel.
fn write_panel(
    dir: &Path,
    name: &str,
    temperature: f64,
    eps: f64,
    ks: &[f64],
    grid: usize,
) -> CliResult {
    let qbm = Qbm::new(temperature).map_err(CliError::from)?;
    let range = RangeSpec {
        lo: 0.4,
        hi: 5.0,
        points: grid,
    };
    let tau_star = pointer_search(&qbm, eps, range, Objective::Exact)?.tau_mix_star;

    let sweeps: Vec<super::feedback_sweep::Sweep> = ks
        .iter()
        .map(|&k| super::feedback_sweep::sweep_boundary(&qbm, eps, k, tau_star, &range.linear()))
        .collect();

    let mut header: Vec<String> = vec!["beta".into(), "gamma".into(), "tau_mix".into()];
    for &k in ks {
        header.push(format!("infidelity_exact_k{k}"));
        header.push(format!("purity_exact_k{k}"));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut sink = csv_file(&dir.join(name), &header_refs)?;
    for i in 0..grid {
        let base = &sweeps[0].rows[i];
        let mut cells = vec![fmt_csv(base.beta), fmt_csv(base.gamma), fmt_csv(base.tau_mix)];
        for sweep in &sweeps {
            cells.push(fmt_csv(sweep.rows[i].infidelity_exact));
            cells.push(fmt_csv(sweep.rows[i].purity_exact));
        }
        sink.row(&cells)?;
    }
    sink.finish()?;
    Ok(())
}

pub fn run(args: Args, config: &Map<String, Value>) -> CliResult {
    let dir = args
        .out
        .or_else(|| cfg_str(config, "out").map(PathBuf::from))
        .ok_or_else(|| CliError::Input("--out directory is required".into()))?;
    std::fs::create_dir_all(&dir)?;
    let grid = args.grid.max(2);

    // pointer mixing time against temperature, both thresholds in one table
    let beta_range = RangeSpec {
        lo: 0.05,
        hi: 8.0,
        points: 60,
    };
    let t_range = RangeSpec {
        lo: 100.0,
        hi: 10000.0,
        points: 20,
    };
    let mut fig4 = csv_file(&dir.join("fig4.csv"), &fit_powerlaw::FIG4_HEADER)?;
    for eps in [0.1, 0.2] {
        let out = fit_powerlaw::fit_over_temperatures(
            eps,
            &t_range.logarithmic(),
            beta_range,
            Objective::Exact,
        )?;
        fit_powerlaw::write_fig4_rows(&mut fig4, &out)?;
        fit_powerlaw::record(&out, "100:10000:20")
            .write_to(&dir.join(format!("table1_eps{}.json", eps)))?;
    }
    fig4.finish()?;

    // PR region and mixing/survival maps at T = 100
    {
        let qbm = Qbm::new(100.0).map_err(CliError::from)?;
        let mut fig5a = csv_file(&dir.join("fig5a.csv"), &["beta", "gamma_boundary"])?;
        let wide = RangeSpec {
            lo: 1e-2,
            hi: 1600.0,
            points: 400,
        };
        for beta in wide.logarithmic() {
            if let Ok(gamma) = qbm.boundary_gamma(beta) {
                fig5a.row(&[fmt_csv(beta), fmt_csv(gamma)])?;
            }
        }
        fig5a.finish()?;

        let mut fig5b = csv_file(&dir.join("fig5b.csv"), &["beta", "gamma", "tau_mix", "tau_sur"])?;
        let betas = RangeSpec {
            lo: 0.9,
            hi: 2.5,
            points: 40,
        };
        for beta in betas.linear() {
            let g_max = qbm.boundary_gamma(beta).map_err(CliError::from)?;
            for j in 1..=20 {
                let gamma = g_max * j as f64 / 20.0;
                let tau_mix = qbm.mixing_time(beta, gamma, 0.1).unwrap_or(f64::NAN);
                let tau_sur = qbm.survival_time(beta, gamma, 0.1).unwrap_or(f64::NAN);
                fig5b.row(&[
                    fmt_csv(beta),
                    fmt_csv(gamma),
                    fmt_csv(tau_mix),
                    fmt_csv(tau_sur),
                ])?;
            }
        }
        fig5b.finish()?;
    }

    // feedback sweeps
    write_panel(&dir, "fig6a.csv", 1000.0, 0.1, &[10.0], grid)?;
    write_panel(&dir, "fig6b.csv", 5000.0, 0.1, &[10.0], grid)?;
    write_panel(&dir, "fig6c.csv", 1000.0, 0.2, &[5.0], grid)?;
    write_panel(&dir, "fig6d.csv", 1000.0, 0.2, &[10.0], grid)?;
    write_panel(&dir, "fig7a.csv", 1000.0, 0.5, &[2.0, 10.0], grid)?;
    write_panel(&dir, "fig7b.csv", 1000.0, 0.1, &[2.0], grid)?;

    println!("wrote figure tables into {}", dir.display());
    Ok(())
}
