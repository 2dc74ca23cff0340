use clap::Parser;
use serde_json::{json, Map, Value};

use pointerlab::control::{lqg_equivalence, FeedbackDesign};
use pointerlab::ensembles::Objective;
use pointerlab::matops::frobenius;
use pointerlab::qbm::Qbm;

use crate::commands::pointer_search;
use crate::output::{cfg_f64, CliError, CliResult, RangeSpec, RunRecord};

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
        return Err(CliError::Input(format!("k must be positive, got {k}")));
    }

    let qbm = Qbm::new(temperature).map_err(CliError::from)?;
    // the decoherence-rate minimizer is the natural pointer here: the gain
    // comparison is a small-eps statement
    let range = RangeSpec {
        lo: 0.05,
        hi: 8.0,
        points: 60,
    };
    let star = pointer_search(&qbm, eps, range, Objective::Asymptotic)?;
    let design = FeedbackDesign::new(k, eps, star.tau_mix_star, 1).map_err(CliError::from)?;
    let eq = lqg_equivalence(qbm.model(), &star.omega_star, &design).map_err(CliError::from)?;

    // how far the Riccati solution sits from its cheap-control asymptote
    let omega_inv = star
        .omega_star
        .clone()
        .try_inverse()
        .ok_or_else(|| CliError::Numeric("singular pointer covariance".into()))?;
    let y_ref = &omega_inv * (design.tau_star / design.eps);
    let y_deviation = frobenius(&(&eq.y - &y_ref)) / frobenius(&y_ref);

    RunRecord::new(
        json!({"T": temperature, "eps": eps, "k": k}),
        json!({
            "beta_star": star.beta_star,
            "gamma_star": star.gamma_star,
            "tau_star": star.tau_mix_star,
            "gain_scale": k * eps / star.tau_mix_star,
            "gain_deviation": eq.deviation,
            "riccati_deviation_from_asymptote": y_deviation,
            "cheap_control_residual": eq.cheap_control_residual,
            "cheap_control_residual_relative": eq.cheap_control_residual / frobenius(&eq.p_cost),
        }),
        None,
    )
    .print()
}
