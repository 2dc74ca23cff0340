use std::path::PathBuf;

use clap::Parser;
use serde_json::{json, Map, Value};

use pointerlab::lgmodel::{is_hurwitz, LGModel};
use pointerlab::matops;

use crate::output::{CliError, CliResult, RunRecord};

#[derive(Parser)]
pub struct Args {
    /// Model JSON file ({A, D} or {n_modes, G, Ctilde_re, Ctilde_im}).
    #[arg(long)]
    model: PathBuf,
    /// Emit a machine-readable record instead of text.
    #[arg(long)]
    json: bool,
}

fn spectrum(a: &pointerlab::SquareMatrix) -> Vec<(f64, f64)> {
    let mut eigs: Vec<(f64, f64)> = a
        .complex_eigenvalues()
        .iter()
        .map(|e| (e.re, e.im))
        .collect();
    eigs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    eigs
}

fn stability_label(a: &pointerlab::SquareMatrix) -> &'static str {
    let eigs = spectrum(a);
    let scale = eigs
        .iter()
        .fold(1.0f64, |m, e| m.max(e.0.abs().max(e.1.abs())));
    let tol = 1e-12 * scale;
    if eigs.iter().all(|e| e.0 < -tol) {
        "Hurwitz"
    } else if eigs.iter().all(|e| e.0 <= tol) {
        "marginally stable"
    } else {
        "unstable"
    }
}

pub fn run(args: Args, _config: &Map<String, Value>) -> CliResult {
    let text = std::fs::read_to_string(&args.model)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.model.display())))?;
    let model = LGModel::from_json(&text).map_err(|e| CliError::Input(e.to_string()))?;

    let eigs = spectrum(model.drift());
    let label = stability_label(model.drift());
    let d_psd = matops::is_psd(model.diffusion(), 1e-9).unwrap_or(false);

    if args.json {
        let record = RunRecord::new(
            json!({"model": args.model.display().to_string()}),
            json!({
                "n_modes": model.n_modes(),
                "A": rows(model.drift()),
                "D": rows(model.diffusion()),
                "eigenvalues_re": eigs.iter().map(|e| e.0).collect::<Vec<_>>(),
                "eigenvalues_im": eigs.iter().map(|e| e.1).collect::<Vec<_>>(),
                "stability": label,
                "hurwitz": is_hurwitz(model.drift()),
                "diffusion_psd": d_psd,
            }),
            None,
        );
        record.print()
    } else {
        println!("modes: {}", model.n_modes());
        println!("drift A:");
        print!("{}", model.drift());
        println!("diffusion D:");
        print!("{}", model.diffusion());
        println!(
            "eigenvalues of A: {}",
            eigs.iter()
                .map(|e| format!("{:+.6e}{:+.6e}i", e.0, e.1))
                .collect::<Vec<_>>()
                .join(", ")
        );
        println!("stability: {label} (Hurwitz: {})", is_hurwitz(model.drift()));
        println!("D positive semidefinite: {d_psd}");
        Ok(())
    }
}

fn rows(m: &pointerlab::SquareMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}
