pub mod feedback_sweep;
pub mod figures;
pub mod fit_powerlaw;
pub mod lqg_check;
pub mod model_info;
pub mod pointer_scan;
pub mod simulate;

use pointerlab::ensembles::{Objective, PointerBasisResult, SearchConfig};
use pointerlab::qbm::Qbm;

use crate::output::{CliError, RangeSpec};

/// Pointer-basis search over the PR boundary with the CLI's beta range.
pub fn pointer_search(
    qbm: &Qbm,
    eps: f64,
    beta_range: RangeSpec,
    objective: Objective,
) -> Result<PointerBasisResult, CliError> {
    let search = SearchConfig {
        beta_range: (beta_range.lo, beta_range.hi),
        grid_points: beta_range.points.min(120),
        objective,
        ..Default::default()
    };
    Ok(pointerlab::ensembles::find_pointer_basis(
        qbm.model(),
        eps,
        &search,
    )?)
}

pub fn parse_objective(text: &str) -> Result<Objective, CliError> {
    match text {
        "exact" => Ok(Objective::Exact),
        "asymptotic" => Ok(Objective::Asymptotic),
        other => Err(CliError::Input(format!(
            "objective must be 'exact' or 'asymptotic', got '{other}'"
        ))),
    }
}
