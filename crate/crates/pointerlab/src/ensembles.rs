//! Physically realizable (PR) ensembles, mixing and survival times, and the
//! pointer-basis search.
//!
//! A conditioned steady-state covariance `Omega` labels a uniform Gaussian
//! ensemble. It is physically realizable iff
//!
//! ```text
//! A Omega + Omega A^T + D >= 0        (noise-consistency LMI)
//! Omega + (i/2) Z >= 0                (uncertainty relation)
//! ```
//!
//! The mixing time is the smallest `tau` with
//! `det[2 V(tau)] = (1 - eps)^-2` for the unconditionally evolved covariance
//! started at `Omega`; for small `eps` it reduces to `2 eps / omega` with the
//! decoherence rate `omega = 2 tr A + tr(D Omega^-1)`. The pointer basis is
//! the PR ensemble minimizing `omega` (equivalently, maximizing the mixing
//! time), which for one mode is searched over the pure-state parametrization
//!
//! ```text
//! Omega(beta, gamma) = (1/4) [[alpha, beta], [beta, gamma]],
//! alpha = (beta^2 + 4) / gamma,
//! ```
//!
//! where saturation of the uncertainty relation eliminates `alpha`.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lgmodel::{quantum_cov_min_eig, GaussianState, LGModel};
use crate::matops::{
    check_same_dim, check_symmetric, frobenius, propagate_covariance, sym_eigen_range, symmetrize,
    SquareMatrix, DEFAULT_PSD_TOL,
};

/// Classification of a candidate conditioned covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrStatus {
    /// Both PR constraints hold.
    Pr,
    /// The noise-consistency LMI fails.
    ViolatesLmi,
    /// The uncertainty relation fails.
    ViolatesUncertainty,
    /// Not yet classified.
    Unknown,
}

/// A conditioned covariance together with its PR classification.
#[derive(Debug, Clone)]
pub struct UnravellingCandidate {
    pub omega: SquareMatrix,
    pub pr_status: PrStatus,
}

impl UnravellingCandidate {
    pub fn new(omega: SquareMatrix) -> Self {
        Self {
            omega,
            pr_status: PrStatus::Unknown,
        }
    }

    pub fn classify(mut self, model: &LGModel, tol: f64) -> Result<Self> {
        self.pr_status = is_physically_realizable(model, &self.omega, tol)?;
        Ok(self)
    }
}

/// Test both PR constraints; when they fail, report which one (the LMI is
/// checked first).
pub fn is_physically_realizable(
    model: &LGModel,
    omega: &SquareMatrix,
    tol: f64,
) -> Result<PrStatus> {
    check_same_dim(model.drift(), omega, "is_physically_realizable")?;
    check_symmetric(omega, tol.max(1e-12))?;
    let lmi = model.drift() * omega + omega * model.drift().transpose() + model.diffusion();
    let (min_eig, max_eig) = sym_eigen_range(&lmi);
    let scale = min_eig.abs().max(max_eig.abs()).max(1.0);
    if min_eig < -tol * scale {
        return Ok(PrStatus::ViolatesLmi);
    }
    let q_min = quantum_cov_min_eig(omega, model.symplectic());
    let q_scale = frobenius(omega).max(1.0);
    if q_min < -tol * q_scale {
        return Ok(PrStatus::ViolatesUncertainty);
    }
    Ok(PrStatus::Pr)
}

/// Decoherence rate `omega = 2 tr A + tr(D Omega^-1)`.
pub fn omega_rate(model: &LGModel, omega: &SquareMatrix) -> Result<f64> {
    check_same_dim(model.drift(), omega, "omega_rate")?;
    let inv = omega
        .clone()
        .try_inverse()
        .filter(|m| m.iter().all(|x| x.is_finite()))
        .ok_or(Error::SingularOmega)?;
    Ok(2.0 * model.drift().trace() + (model.diffusion() * inv).trace())
}

/// Relative tolerance on `det(2 Omega) = 1` for "pure" initial covariances.
const PURE_DET_TOL: f64 = 1e-8;
/// Relative bisection tolerance for time roots.
const ROOT_REL_TOL: f64 = 1e-10;
/// Maximum number of bracket doublings before giving up.
const MAX_DOUBLINGS: u32 = 30;

fn require_pure(omega: &SquareMatrix) -> Result<()> {
    let det = (omega * 2.0).determinant();
    if (det - 1.0).abs() > PURE_DET_TOL {
        return Err(Error::ImpureInitial { det });
    }
    Ok(())
}

/// Smallest positive root of `f(t) = 0` where `f(0) < 0` and `f` crosses
/// upward. Brackets by geometric expansion from `t_init`, then bisects.
pub(crate) fn smallest_root<F: FnMut(f64) -> f64>(mut f: F, t_init: f64) -> Result<f64> {
    let mut hi = t_init.max(1e-300);
    let mut lo = 0.0;
    let mut doublings = 0;
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::NoRoot { t_max: hi });
        }
    }
    // bisection: unconditionally safe for the monotone regime targeted here
    for _ in 0..200 {
        if hi - lo <= ROOT_REL_TOL * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Exact mixing time: smallest `tau` with `det[2 V(tau)] = (1 - eps)^-2`,
/// starting from a pure conditioned covariance `omega`.
pub fn mixing_time_exact(model: &LGModel, omega: &SquareMatrix, eps: f64) -> Result<f64> {
    check_same_dim(model.drift(), omega, "mixing_time_exact")?;
    if !(0.0..1.0).contains(&eps) || eps == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "eps must lie in (0, 1), got {eps}"
        )));
    }
    require_pure(omega)?;
    let target = (1.0 - eps).powi(-2);
    let rate = omega_rate(model, omega)?;
    let t_init = if rate.abs() > 1e-12 { 10.0 / rate.abs() } else { 1.0 };
    let a = model.drift();
    let d = model.diffusion();
    smallest_root(
        |t| (propagate_covariance(a, d, omega, t) * 2.0).determinant() - target,
        t_init,
    )
}

/// Small-`eps` mixing time `2 eps / omega`.
pub fn mixing_time_asymptotic(model: &LGModel, omega: &SquareMatrix, eps: f64) -> Result<f64> {
    let rate = omega_rate(model, omega)?;
    if rate <= 0.0 {
        return Err(Error::NonDecohering { omega: rate });
    }
    Ok(2.0 * eps / rate)
}

/// Which quantity the pointer-basis search maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Maximize `2 eps / omega(Omega)` (minimize the decoherence rate).
    Asymptotic,
    /// Maximize the exact mixing-time root; relevant when `eps` is not small.
    Exact,
}

/// Search configuration for [`find_pointer_basis`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Range of the off-diagonal parameter `beta`.
    pub beta_range: (f64, f64),
    /// Range scanned for the momentum-variance parameter `gamma`; the
    /// default covers the feasible region of high-temperature models.
    #[serde(default = "default_gamma_range")]
    pub gamma_range: (f64, f64),
    /// Restrict candidates to the upper feasibility boundary gamma(beta).
    #[serde(default = "default_true")]
    pub boundary_only: bool,
    /// Coarse grid resolution in `beta` (and in `gamma` for region scans).
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// Relative golden-section tolerance for the boundary refinement.
    #[serde(default = "default_refine_tol")]
    pub refine_tol: f64,
    pub objective: Objective,
}

fn default_gamma_range() -> (f64, f64) {
    (1e-3, 1e9)
}
fn default_true() -> bool {
    true
}
fn default_grid_points() -> usize {
    60
}
fn default_refine_tol() -> f64 {
    1e-8
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            beta_range: (0.05, 8.0),
            gamma_range: default_gamma_range(),
            boundary_only: true,
            grid_points: default_grid_points(),
            refine_tol: default_refine_tol(),
            objective: Objective::Asymptotic,
        }
    }
}

/// One evaluated candidate of a pointer-basis search.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SearchSample {
    pub beta: f64,
    pub gamma: f64,
    /// Mixing time under the configured objective (`NaN` when infeasible).
    pub objective_value: f64,
}

/// Result of the constrained pointer-basis optimization.
#[derive(Debug, Clone)]
pub struct PointerBasisResult {
    pub omega_star: SquareMatrix,
    pub beta_star: f64,
    pub gamma_star: f64,
    /// Mixing time at the optimum, under the configured objective.
    pub tau_mix_star: f64,
    /// Decoherence rate at the optimum.
    pub omega_rate: f64,
    pub search_trace: Vec<SearchSample>,
}

/// Pure one-mode covariance from the `(beta, gamma)` parametrization.
pub(crate) fn pure_omega(beta: f64, gamma: f64) -> Result<SquareMatrix> {
    if gamma <= 0.0 {
        return Err(Error::NonpositiveGamma(gamma));
    }
    let alpha = (beta * beta + 4.0) / gamma;
    Ok(SquareMatrix::from_row_slice(2, 2, &[alpha, beta, beta, gamma]) * 0.25)
}

const PR_SEARCH_TOL: f64 = 1e-9;

fn feasible(model: &LGModel, beta: f64, gamma: f64) -> bool {
    match pure_omega(beta, gamma) {
        Ok(om) => matches!(
            is_physically_realizable(model, &om, PR_SEARCH_TOL),
            Ok(PrStatus::Pr)
        ),
        Err(_) => false,
    }
}

/// Upper feasibility boundary in `gamma` at fixed `beta`, located by
/// geometric scan and bisection. `None` when no feasible `gamma` exists.
fn boundary_gamma_numeric(model: &LGModel, beta: f64, gamma_range: (f64, f64)) -> Option<f64> {
    let (g_lo, g_hi) = gamma_range;
    let mut g = g_lo.max(1e-12);
    let mut last_feasible = None;
    while g <= g_hi {
        if feasible(model, beta, g) {
            last_feasible = Some(g);
        } else if last_feasible.is_some() {
            break;
        }
        g *= 2.0;
    }
    let lo = last_feasible?;
    let mut lo = lo;
    let mut hi = (lo * 2.0).min(g_hi * 2.0);
    if feasible(model, beta, hi) {
        return Some(hi); // feasible through the top of the scan range
    }
    for _ in 0..200 {
        if hi - lo <= 1e-13 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if feasible(model, beta, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

fn objective_at(model: &LGModel, eps: f64, objective: Objective, beta: f64, gamma: f64) -> f64 {
    let Ok(om) = pure_omega(beta, gamma) else {
        return f64::NAN;
    };
    let value = match objective {
        Objective::Asymptotic => mixing_time_asymptotic(model, &om, eps),
        Objective::Exact => mixing_time_exact(model, &om, eps),
    };
    value.unwrap_or(f64::NAN)
}

/// Constrained maximization of the mixing time over pure PR ensembles.
///
/// Coarse grid over `beta`, boundary location in `gamma` per grid point,
/// then golden-section refinement of `beta` along the boundary curve. The
/// grid evaluation parallelizes over candidates; ties break toward smaller
/// `beta`, so results do not depend on the worker count.
pub fn find_pointer_basis(
    model: &LGModel,
    eps: f64,
    search: &SearchConfig,
) -> Result<PointerBasisResult> {
    if model.n_modes() != 1 {
        return Err(Error::InvalidParameter(
            "the built-in (beta, gamma) parametrization covers one mode only".into(),
        ));
    }
    if search.grid_points < 2 {
        return Err(Error::InvalidParameter(
            "grid_points must be at least 2".into(),
        ));
    }
    if !(0.0..1.0).contains(&eps) || eps == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "eps must lie in (0, 1), got {eps}"
        )));
    }

    let (b_lo, b_hi) = search.beta_range;
    if !(b_lo < b_hi) {
        return Err(Error::InvalidParameter("empty beta range".into()));
    }
    let m = search.grid_points;
    let betas: Vec<f64> = (0..m)
        .map(|i| b_lo + (b_hi - b_lo) * i as f64 / (m - 1) as f64)
        .collect();

    let mut trace: Vec<SearchSample> = Vec::new();

    if search.boundary_only {
        let grid: Vec<(f64, Option<f64>, f64)> = betas
            .par_iter()
            .map(|&beta| {
                let gamma = boundary_gamma_numeric(model, beta, search.gamma_range);
                let value = gamma
                    .map(|g| objective_at(model, eps, search.objective, beta, g))
                    .unwrap_or(f64::NAN);
                (beta, gamma, value)
            })
            .collect();

        let mut best: Option<(usize, f64)> = None;
        for (i, &(beta, gamma, value)) in grid.iter().enumerate() {
            trace.push(SearchSample {
                beta,
                gamma: gamma.unwrap_or(f64::NAN),
                objective_value: value,
            });
            if value.is_finite() && best.map_or(true, |(_, v)| value > v) {
                best = Some((i, value));
            }
        }
        let (i_best, _) = best.ok_or(Error::EmptyFeasibleSet)?;

        // golden-section refinement between the neighbours of the grid max
        let mut a = betas[i_best.saturating_sub(1)];
        let mut b = betas[(i_best + 1).min(m - 1)];
        let mut eval = |beta: f64, trace: &mut Vec<SearchSample>| -> f64 {
            let gamma = boundary_gamma_numeric(model, beta, search.gamma_range);
            let value = gamma
                .map(|g| objective_at(model, eps, search.objective, beta, g))
                .unwrap_or(f64::NAN);
            trace.push(SearchSample {
                beta,
                gamma: gamma.unwrap_or(f64::NAN),
                objective_value: value,
            });
            if value.is_finite() {
                value
            } else {
                f64::NEG_INFINITY
            }
        };
        let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let mut fc = eval(c, &mut trace);
        let mut fd = eval(d, &mut trace);
        while (b - a) > search.refine_tol * b.abs().max(1.0) {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = eval(c, &mut trace);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = eval(d, &mut trace);
            }
        }
        let beta_star = 0.5 * (a + b);
        let gamma_star = boundary_gamma_numeric(model, beta_star, search.gamma_range)
            .ok_or(Error::EmptyFeasibleSet)?;
        let omega_star = pure_omega(beta_star, gamma_star)?;
        let tau = objective_at(model, eps, search.objective, beta_star, gamma_star);
        if !tau.is_finite() {
            return Err(Error::EmptyFeasibleSet);
        }
        let rate = omega_rate(model, &omega_star)?;
        trace.push(SearchSample {
            beta: beta_star,
            gamma: gamma_star,
            objective_value: tau,
        });
        Ok(PointerBasisResult {
            omega_star,
            beta_star,
            gamma_star,
            tau_mix_star: tau,
            omega_rate: rate,
            search_trace: trace,
        })
    } else {
        // full-region grid: log-spaced gamma, no refinement
        let (g_lo, g_hi) = search.gamma_range;
        if !(g_lo > 0.0 && g_lo < g_hi) {
            return Err(Error::InvalidParameter("bad gamma range".into()));
        }
        let gammas: Vec<f64> = (0..m)
            .map(|j| g_lo * (g_hi / g_lo).powf(j as f64 / (m - 1) as f64))
            .collect();
        let cells: Vec<SearchSample> = betas
            .par_iter()
            .flat_map_iter(|&beta| {
                gammas.iter().map(move |&gamma| (beta, gamma))
            })
            .map(|(beta, gamma)| {
                let value = if feasible(model, beta, gamma) {
                    objective_at(model, eps, search.objective, beta, gamma)
                } else {
                    f64::NAN
                };
                SearchSample {
                    beta,
                    gamma,
                    objective_value: value,
                }
            })
            .collect();
        let mut best: Option<SearchSample> = None;
        for s in &cells {
            if s.objective_value.is_finite()
                && best.map_or(true, |b| s.objective_value > b.objective_value)
            {
                best = Some(*s);
            }
        }
        let star = best.ok_or(Error::EmptyFeasibleSet)?;
        let omega_star = pure_omega(star.beta, star.gamma)?;
        let rate = omega_rate(model, &omega_star)?;
        Ok(PointerBasisResult {
            omega_star,
            beta_star: star.beta,
            gamma_star: star.gamma,
            tau_mix_star: star.objective_value,
            omega_rate: rate,
            search_trace: cells,
        })
    }
}

/// Normalized overlap `(2 pi)^n Int W1 W2` of two Gaussian states:
/// `exp(-1/2 dmu^T (V1+V2)^-1 dmu) / sqrt(det(V1+V2))`.
pub fn gaussian_overlap(s1: &GaussianState, s2: &GaussianState) -> Result<f64> {
    check_same_dim(&s1.cov, &s2.cov, "gaussian_overlap")?;
    if s1.mean.len() != s2.mean.len() {
        return Err(Error::DimensionMismatch("mean lengths differ".into()));
    }
    let sum = &s1.cov + &s2.cov;
    let det = sum.determinant();
    if !(det > 0.0) || !det.is_finite() {
        return Err(Error::SingularSum);
    }
    let inv = sum.try_inverse().ok_or(Error::SingularSum)?;
    let dmu = &s1.mean - &s2.mean;
    let quad = (dmu.transpose() * inv * &dmu)[(0, 0)];
    Ok((-0.5 * quad).exp() / det.sqrt())
}

/// Gauss-Hermite nodes and weights (weight `exp(-x^2)`) via Golub-Welsch.
pub(crate) fn gauss_hermite(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let mut j = SquareMatrix::zeros(order, order);
    for k in 1..order {
        let off = (k as f64 / 2.0).sqrt();
        j[(k - 1, k)] = off;
        j[(k, k - 1)] = off;
    }
    let eig = j.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|i| {
            let node = eig.eigenvalues[i];
            let v0 = eig.eigenvectors[(0, i)];
            (node, std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Base Gauss-Hermite order for survival-time averaging.
const GH_BASE_ORDER: usize = 21;
/// Doubling the order must move the average by less than this.
const GH_ADAPT_TOL: f64 = 1e-8;
const GH_MAX_ORDER: usize = 672;

struct MeanAverager {
    /// scaled principal directions sqrt(2 lambda_i) u_i of the mean covariance
    directions: Vec<DVector<f64>>,
}

impl MeanAverager {
    fn new(mean_cov: &SquareMatrix) -> Result<Self> {
        check_symmetric(mean_cov, 1e-9)?;
        let eig = symmetrize(mean_cov).symmetric_eigen();
        let max_eig = eig
            .eigenvalues
            .iter()
            .fold(0.0f64, |m, &e| m.max(e.abs()));
        let mut directions = Vec::new();
        for i in 0..mean_cov.nrows() {
            let lam = eig.eigenvalues[i];
            if lam < -DEFAULT_PSD_TOL * max_eig.max(1.0) {
                return Err(Error::NotPsd { min_eig: lam });
            }
            if lam > 1e-12 * max_eig.max(1.0) {
                directions.push(eig.eigenvectors.column(i).into_owned() * (2.0 * lam).sqrt());
            }
        }
        Ok(Self { directions })
    }

    /// Average `f(x0)` over `x0 ~ N(0, mean_cov)` with a tensor GH rule.
    fn average<F: Fn(&DVector<f64>) -> f64>(&self, dim: usize, order: usize, f: &F) -> f64 {
        if self.directions.is_empty() {
            return f(&DVector::zeros(dim));
        }
        let (nodes, weights) = gauss_hermite(order);
        let norm = std::f64::consts::PI.sqrt().powi(self.directions.len() as i32);
        let mut total = 0.0;
        let mut idx = vec![0usize; self.directions.len()];
        loop {
            let mut x = DVector::zeros(dim);
            let mut w = 1.0;
            for (d, &i) in idx.iter().enumerate() {
                x += &self.directions[d] * nodes[i];
                w *= weights[i];
            }
            total += w * f(&x);
            // odometer increment over the tensor grid
            let mut d = 0;
            loop {
                idx[d] += 1;
                if idx[d] < nodes.len() {
                    break;
                }
                idx[d] = 0;
                d += 1;
                if d == idx.len() {
                    return total / norm;
                }
            }
        }
    }
}

/// Average survival probability at elapsed time `t`:
/// `E[ overlap(state(x0), evolved state(x0)) ]` over initial conditional
/// means `x0` drawn from `N(0, mean_cov)`.
fn survival_probability_at(
    model: &LGModel,
    omega: &SquareMatrix,
    averager: &MeanAverager,
    order: usize,
    t: f64,
) -> f64 {
    let v_t = propagate_covariance(model.drift(), model.diffusion(), omega, t);
    let phi = (model.drift() * t).exp();
    let sum = omega + &v_t;
    let det = sum.determinant();
    let inv = match sum.try_inverse() {
        Some(m) => m,
        None => return f64::NAN,
    };
    let dim = model.dim();
    let shift = &phi - SquareMatrix::identity(dim, dim);
    averager.average(dim, order, &|x0: &DVector<f64>| {
        let dmu = &shift * x0;
        ((-0.5 * (dmu.transpose() * &inv * &dmu)[(0, 0)]).exp()) / det.sqrt()
    })
}

/// Survival time: smallest `tau` with average survival probability
/// `1 - eps`, the average taken over initial conditional means with
/// covariance `mean_cov`.
///
/// The Gauss-Hermite order starts at 21 and doubles until the value at the
/// root moves by less than 1e-8.
pub fn survival_time(
    model: &LGModel,
    omega: &SquareMatrix,
    eps: f64,
    mean_cov: &SquareMatrix,
) -> Result<f64> {
    check_same_dim(model.drift(), omega, "survival_time")?;
    check_same_dim(model.drift(), mean_cov, "survival_time mean covariance")?;
    if !(0.0..1.0).contains(&eps) || eps == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "eps must lie in (0, 1), got {eps}"
        )));
    }
    require_pure(omega)?;
    let averager = MeanAverager::new(mean_cov)?;
    let rate = omega_rate(model, omega)?;
    let t_init = if rate.abs() > 1e-12 { 10.0 / rate.abs() } else { 1.0 };

    let mut order = GH_BASE_ORDER;
    loop {
        let root = smallest_root(
            |t| (1.0 - eps) - survival_probability_at(model, omega, &averager, order, t),
            t_init,
        )?;
        let here = survival_probability_at(model, omega, &averager, order, root);
        let refined = survival_probability_at(model, omega, &averager, order * 2, root);
        if (here - refined).abs() < GH_ADAPT_TOL || order * 2 > GH_MAX_ORDER {
            if (here - refined).abs() >= GH_ADAPT_TOL {
                log::warn!(
                    "survival-time quadrature not converged at order {order}: delta {:.2e}",
                    (here - refined).abs()
                );
            }
            return Ok(root);
        }
        order *= 2;
    }
}
