//! Linear feedback onto the conditional mean and its evaluation.
//!
//! With monitoring fixed, the control input `u = -K <x>_c` with gain
//! `K = (k eps / tau*) I` leaves the conditioned covariance untouched and
//! shifts only the mean dynamics, whose drift becomes `N = A - K`. When `N`
//! is Hurwitz the conditional mean acquires a stationary covariance `M`
//! solving
//!
//! ```text
//! N M + M N^T + F^T F = 0,     F^T F = A Omega + Omega A^T + D,
//! ```
//!
//! and the unconditioned steady state has covariance `V_ss = Omega + M`.
//! The controlled state is scored against the target through the fidelity
//! `F = 1/sqrt(det(V_ss + Omega))` and purity `1/sqrt(det 2 V_ss)`; for
//! strong control these approach `1 - (tau*/tau)/(4k)` and
//! `1 - (tau*/tau)/(2k)`.
//!
//! The same feedback is the cheap-control limit of LQG optimal control with
//! cost matrices `P = k Omega^-1` and `Q = (tau*^2 / k eps^2) Omega^-1`; see
//! [`lqg_equivalence`].

use serde::Serialize;

use crate::ensembles::{self, is_physically_realizable, PrStatus};
use crate::error::{Error, Result};
use crate::lgmodel::LGModel;
use crate::matops::{
    self, check_same_dim, frobenius, solve_care, solve_lyapunov, symmetrize, SquareMatrix,
};

/// A feedback design: dimensionless strength `k`, purity threshold `eps`,
/// and the pointer mixing time `tau*` setting the gain scale.
#[derive(Debug, Clone)]
pub struct FeedbackDesign {
    pub k: f64,
    pub eps: f64,
    pub tau_star: f64,
    /// Gain matrix `(k eps / tau*) I`.
    pub gain: SquareMatrix,
}

impl FeedbackDesign {
    pub fn new(k: f64, eps: f64, tau_star: f64, n_modes: usize) -> Result<Self> {
        if !(k >= 0.0) {
            return Err(Error::InvalidParameter(format!("k must be >= 0, got {k}")));
        }
        if !(tau_star > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tau_star must be positive, got {tau_star}"
            )));
        }
        Ok(Self {
            k,
            eps,
            tau_star,
            gain: feedback_gain(k, eps, tau_star, 2 * n_modes),
        })
    }
}

/// Proportional gain `(k eps / tau_star) I_dim`.
pub fn feedback_gain(k: f64, eps: f64, tau_star: f64, dim: usize) -> SquareMatrix {
    SquareMatrix::identity(dim, dim) * (k * eps / tau_star)
}

/// Closed-loop drift `N = A - K`.
pub fn closed_loop_drift(a: &SquareMatrix, gain: &SquareMatrix) -> SquareMatrix {
    a - gain
}

/// Stationary covariance `M` of the conditional mean under closed-loop drift
/// `n`, driven by innovation noise of covariance `noise_cov = F^T F`.
pub fn mean_covariance(n: &SquareMatrix, noise_cov: &SquareMatrix) -> Result<SquareMatrix> {
    check_same_dim(n, noise_cov, "mean_covariance")?;
    let max_re = n
        .complex_eigenvalues()
        .iter()
        .fold(f64::NEG_INFINITY, |m, e| m.max(e.re));
    if max_re >= 0.0 {
        return Err(Error::NotHurwitz { max_re });
    }
    solve_lyapunov(n, noise_cov)
}

/// Innovation-noise covariance `F^T F = A Omega + Omega A^T + D`, with
/// boundary-saturating negative eigenvalues within -1e-10 clipped to zero.
pub fn noise_covariance(model: &LGModel, omega: &SquareMatrix) -> SquareMatrix {
    let raw = symmetrize(
        &(model.drift() * omega + omega * model.drift().transpose() + model.diffusion()),
    );
    let eig = raw.clone().symmetric_eigen();
    let max_eig = eig.eigenvalues.iter().fold(0.0f64, |m, &e| m.max(e.abs()));
    if eig.eigenvalues.iter().all(|&e| e >= 0.0) {
        return raw;
    }
    let mut vals = eig.eigenvalues;
    for v in vals.iter_mut() {
        if *v < 0.0 && *v >= -matops::DEFAULT_PSD_TOL * max_eig.max(1.0) {
            *v = 0.0;
        }
    }
    symmetrize(&(&eig.eigenvectors * SquareMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()))
}

/// Everything the evaluation of one feedback design produces.
#[derive(Debug, Clone, Serialize)]
pub struct FeedbackOutcome {
    /// Closed-loop drift `N = A - K` (row-major rows).
    pub n: Vec<Vec<f64>>,
    /// Stationary mean covariance `M`.
    pub m: Vec<Vec<f64>>,
    /// Unconditioned controlled covariance `V_ss = Omega + M`.
    pub v_ss: Vec<Vec<f64>>,
    pub fidelity_exact: f64,
    pub fidelity_approx: f64,
    pub purity_exact: f64,
    pub purity_approx: f64,
    /// Small-eps mixing time of the evaluated ensemble, used in the
    /// approximate formulas.
    pub tau_mix_asymptotic: f64,
}

impl FeedbackOutcome {
    pub fn n_matrix(&self) -> SquareMatrix {
        rows_to_matrix(&self.n)
    }
    pub fn m_matrix(&self) -> SquareMatrix {
        rows_to_matrix(&self.m)
    }
    pub fn v_ss_matrix(&self) -> SquareMatrix {
        rows_to_matrix(&self.v_ss)
    }
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> SquareMatrix {
    SquareMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

fn matrix_to_rows(m: &SquareMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Evaluate a feedback design on a PR pure ensemble: closed-loop drift, mean
/// covariance, controlled covariance, and exact/approximate fidelity and
/// purity against the target ensemble member.
pub fn evaluate_feedback(
    model: &LGModel,
    omega: &SquareMatrix,
    design: &FeedbackDesign,
) -> Result<FeedbackOutcome> {
    check_same_dim(model.drift(), omega, "evaluate_feedback")?;
    if design.k <= 0.0 {
        return Err(Error::InvalidParameter(
            "evaluation needs k > 0; the open loop has no stationary mean".into(),
        ));
    }
    if is_physically_realizable(model, omega, 1e-8)? != PrStatus::Pr {
        return Err(Error::InvalidParameter(
            "omega is not a physically realizable ensemble".into(),
        ));
    }
    let n = closed_loop_drift(model.drift(), &design.gain);
    let noise = noise_covariance(model, omega);
    let m = mean_covariance(&n, &noise)?;
    let v_ss = omega + &m;

    let fidelity_exact = {
        let det = (&v_ss + omega).determinant();
        (1.0 / det.sqrt()).min(1.0)
    };
    let purity_exact = {
        let det = (&v_ss * 2.0).determinant();
        (1.0 / det.sqrt()).min(1.0)
    };
    // the strong-control expansions are derived in the small-eps regime, so
    // the asymptotic mixing time of the evaluated ensemble enters here
    let tau = ensembles::mixing_time_asymptotic(model, omega, design.eps)?;
    let ratio = design.tau_star / tau;
    let fidelity_approx = 1.0 - ratio / (4.0 * design.k);
    let purity_approx = 1.0 - ratio / (2.0 * design.k);

    Ok(FeedbackOutcome {
        n: matrix_to_rows(&n),
        m: matrix_to_rows(&m),
        v_ss: matrix_to_rows(&v_ss),
        fidelity_exact,
        fidelity_approx,
        purity_exact,
        purity_approx,
        tau_mix_asymptotic: tau,
    })
}

/// The LQG problem whose cheap-control limit reproduces the gain above.
#[derive(Debug, Clone)]
pub struct LqgEquivalence {
    /// State-penalty matrix `P = k Omega^-1`.
    pub p_cost: SquareMatrix,
    /// Control-effort matrix `Q = (tau*^2 / k eps^2) Omega^-1`.
    pub q_cost: SquareMatrix,
    /// Stabilizing Riccati solution.
    pub y: SquareMatrix,
    /// Optimal LQG gain `Q^-1 Y`.
    pub k_lqg: SquareMatrix,
    /// Relative Frobenius deviation of `k_lqg` from `(k eps/tau*) I`.
    pub deviation: f64,
    /// `||P - Y Q^-1 Y||_F`, which vanishes in the cheap-control limit.
    pub cheap_control_residual: f64,
}

/// Solve the LQG problem with the equivalence cost matrices and compare its
/// optimal gain against the proportional feedback gain.
pub fn lqg_equivalence(
    model: &LGModel,
    omega: &SquareMatrix,
    design: &FeedbackDesign,
) -> Result<LqgEquivalence> {
    check_same_dim(model.drift(), omega, "lqg_equivalence")?;
    if design.k <= 0.0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    let omega_inv = omega
        .clone()
        .try_inverse()
        .filter(|m| m.iter().all(|x| x.is_finite()))
        .ok_or(Error::SingularOmega)?;
    let omega_inv = symmetrize(&omega_inv);
    let p_cost = &omega_inv * design.k;
    let q_cost = &omega_inv * (design.tau_star * design.tau_star / (design.k * design.eps * design.eps));

    let y = solve_care(model.drift(), &p_cost, &q_cost)?;
    let q_inv = q_cost
        .clone()
        .try_inverse()
        .ok_or(Error::SingularOmega)?;
    let k_lqg = &q_inv * &y;

    let dim = model.dim();
    let k_ref = feedback_gain(design.k, design.eps, design.tau_star, dim);
    let deviation = frobenius(&(&k_lqg - &k_ref)) / frobenius(&k_ref);
    let cheap_control_residual = frobenius(&(&p_cost - &y * &q_inv * &y));

    Ok(LqgEquivalence {
        p_cost,
        q_cost,
        y,
        k_lqg,
        deviation,
        cheap_control_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::pure_omega;
    use crate::lgmodel::check_quantum_cov;
    use approx::assert_relative_eq;
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn qbm(temp: f64) -> LGModel {
        let a = SquareMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, -1.0]);
        let d = SquareMatrix::from_row_slice(2, 2, &[1.0 / (8.0 * temp), 0.0, 0.0, 2.0 * temp]);
        LGModel::from_drift_diffusion(a, d).unwrap()
    }

    /// Boundary gamma for the high-temperature model (upper quadratic root).
    fn boundary_gamma(beta: f64, temp: f64) -> f64 {
        let b = 2.0 * beta + 1.0 / temp;
        let c = beta * beta - 16.0 * beta * temp - 4.0;
        0.5 * (-b + (b * b - 4.0 * c).sqrt())
    }

    fn pointer(temp: f64, eps: f64) -> (SquareMatrix, f64) {
        let model = qbm(temp);
        let search = crate::ensembles::SearchConfig {
            objective: crate::ensembles::Objective::Exact,
            ..Default::default()
        };
        let r = crate::ensembles::find_pointer_basis(&model, eps, &search).unwrap();
        (r.omega_star, r.tau_mix_star)
    }

    #[test]
    fn gain_arithmetic() {
        assert_eq!(feedback_gain(0.0, 0.1, 0.01, 2), SquareMatrix::zeros(2, 2));
        assert_relative_eq!(
            feedback_gain(10.0, 0.1, 0.01, 2),
            SquareMatrix::identity(2, 2) * 100.0
        );
    }

    #[test]
    fn closed_loop_structure_and_eigenvalues() {
        let temp = 1000.0;
        let model = qbm(temp);
        let (_, tau_star) = pointer(temp, 0.1);
        let design = FeedbackDesign::new(10.0, 0.1, tau_star, 1).unwrap();
        let n = closed_loop_drift(model.drift(), &design.gain);
        let rate = 10.0 * 0.1 / tau_star;
        assert_relative_eq!(
            n,
            SquareMatrix::from_row_slice(2, 2, &[-rate, 1.0, 0.0, -(1.0 + rate)]),
            epsilon = 1e-12
        );
        let mut eigs: Vec<f64> = n.complex_eigenvalues().iter().map(|e| e.re).collect();
        eigs.sort_by(f64::total_cmp);
        assert_relative_eq!(eigs[0], -(1.0 + rate), max_relative = 1e-10);
        assert_relative_eq!(eigs[1], -rate, max_relative = 1e-10);

        // open loop: marginally stable
        let open = closed_loop_drift(model.drift(), &SquareMatrix::zeros(2, 2));
        let mut eigs: Vec<f64> = open.complex_eigenvalues().iter().map(|e| e.re).collect();
        eigs.sort_by(f64::total_cmp);
        assert!(eigs[0].abs() + 1.0 < 1e-12 + 1.0 + 1e-12);
        assert_relative_eq!(eigs[0], -1.0, epsilon = 1e-12);
        assert!(eigs[1].abs() < 1e-12);
    }

    #[test]
    fn open_loop_mean_covariance_fails() {
        let model = qbm(1000.0);
        let om = pure_omega(1.0, boundary_gamma(1.0, 1000.0)).unwrap();
        let noise = noise_covariance(&model, &om);
        assert!(matches!(
            mean_covariance(model.drift(), &noise),
            Err(Error::NotHurwitz { .. })
        ));
    }

    #[test]
    fn mean_covariance_residual_randomized() {
        let mut rng = ChaCha12Rng::seed_from_u64(0x21);
        for _ in 0..50 {
            let r = SquareMatrix::from_fn(2, 2, |_, _| {
                (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
            });
            let max_re = r
                .complex_eigenvalues()
                .iter()
                .fold(f64::NEG_INFINITY, |m, e| m.max(e.re));
            let n = &r - SquareMatrix::identity(2, 2) * (max_re + 0.7);
            let c = SquareMatrix::from_fn(2, 2, |_, _| {
                (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
            });
            let noise = c.transpose() * &c;
            let m = mean_covariance(&n, &noise).unwrap();
            let res = frobenius(&(&n * &m + &m * n.transpose() + &noise));
            assert!(res <= 1e-10 * (1.0 + frobenius(&noise)));
        }
    }

    #[test]
    fn strong_control_mean_covariance_limit() {
        // M -> (tau*/2 k eps) F^T F as k grows
        let temp = 1000.0;
        let model = qbm(temp);
        let (omega, tau_star) = pointer(temp, 0.1);
        let noise = noise_covariance(&model, &omega);
        let k = 2000.0;
        let design = FeedbackDesign::new(k, 0.1, tau_star, 1).unwrap();
        let n = closed_loop_drift(model.drift(), &design.gain);
        let m = mean_covariance(&n, &noise).unwrap();
        let approx = &noise * (tau_star / (2.0 * k * 0.1));
        assert!(frobenius(&(&m - &approx)) <= 5.0 / k * frobenius(&approx));
    }

    #[test]
    fn mean_covariance_first_order_in_inverse_k() {
        let temp = 1000.0;
        let model = qbm(temp);
        let (omega, tau_star) = pointer(temp, 0.1);
        let noise = noise_covariance(&model, &omega);
        let m_at = |k: f64| {
            let design = FeedbackDesign::new(k, 0.1, tau_star, 1).unwrap();
            mean_covariance(&closed_loop_drift(model.drift(), &design.gain), &noise).unwrap()
        };
        let mut prev = f64::INFINITY;
        for k in [25.0, 50.0, 100.0] {
            let m1 = m_at(k);
            let m2 = m_at(2.0 * k);
            let defect = frobenius(&(&m2 * 2.0 - &m1)) / frobenius(&m1);
            assert!(defect < prev, "defect not shrinking: {defect} at k={k}");
            prev = defect;
        }
        assert!(prev < 0.02);
    }

    #[test]
    fn feedback_outcome_properties() {
        let temp = 1000.0;
        let model = qbm(temp);
        let (omega, tau_star) = pointer(temp, 0.1);

        let design = FeedbackDesign::new(10.0, 0.1, tau_star, 1).unwrap();
        let out = evaluate_feedback(&model, &omega, &design).unwrap();
        assert!(out.fidelity_exact <= 1.0 && out.fidelity_exact > 0.9);
        assert!(out.purity_exact <= 1.0 && out.purity_exact > 0.9);
        // controlled state stays physical
        assert!(check_quantum_cov(
            &out.v_ss_matrix(),
            model.symplectic(),
            1e-9
        ));

        // k -> infinity pushes the fidelity to one
        let big = FeedbackDesign::new(1e6, 0.1, tau_star, 1).unwrap();
        let out_big = evaluate_feedback(&model, &omega, &big).unwrap();
        assert!(out_big.fidelity_exact > 1.0 - 1e-4);
    }

    #[test]
    fn doubled_control_improves_infidelity_everywhere() {
        let temp = 1000.0;
        let model = qbm(temp);
        let (_, tau_star) = pointer(temp, 0.2);
        let d5 = FeedbackDesign::new(5.0, 0.2, tau_star, 1).unwrap();
        let d10 = FeedbackDesign::new(10.0, 0.2, tau_star, 1).unwrap();
        for i in 0..40 {
            let beta = 0.4 + 4.0 * i as f64 / 39.0;
            let om = pure_omega(beta, boundary_gamma(beta, temp)).unwrap();
            let f5 = evaluate_feedback(&model, &om, &d5).unwrap().fidelity_exact;
            let f10 = evaluate_feedback(&model, &om, &d10).unwrap().fidelity_exact;
            assert!(f10 > f5, "beta {beta}: {f10} <= {f5}");
        }
    }

    #[test]
    fn lqg_gain_matches_in_strong_control() {
        let temp = 1000.0;
        let model = qbm(temp);
        let search = crate::ensembles::SearchConfig::default();
        let r = crate::ensembles::find_pointer_basis(&model, 0.01, &search).unwrap();

        // cost matrices are positive definite whenever Omega is
        let design = FeedbackDesign::new(100.0, 0.01, r.tau_mix_star, 1).unwrap();
        let eq = lqg_equivalence(&model, &r.omega_star, &design).unwrap();
        let (pmin, _) = crate::matops::sym_eigen_range(&eq.p_cost);
        let (qmin, _) = crate::matops::sym_eigen_range(&eq.q_cost);
        assert!(pmin > 0.0 && qmin > 0.0);

        // Riccati solution approaches (tau*/eps) Omega^-1
        let omega_inv = r.omega_star.clone().try_inverse().unwrap();
        let y_ref = &omega_inv * (design.tau_star / design.eps);
        assert!(
            frobenius(&(&eq.y - &y_ref)) <= 0.05 * frobenius(&y_ref),
            "Riccati deviation {}",
            frobenius(&(&eq.y - &y_ref)) / frobenius(&y_ref)
        );

        // deviation of the gain shrinks monotonically with k
        let mut prev = f64::INFINITY;
        for k in [10.0, 100.0, 1000.0] {
            let design = FeedbackDesign::new(k, 0.01, r.tau_mix_star, 1).unwrap();
            let eq = lqg_equivalence(&model, &r.omega_star, &design).unwrap();
            assert!(eq.deviation < prev, "k {k}: {}", eq.deviation);
            prev = eq.deviation;
        }
    }
}
