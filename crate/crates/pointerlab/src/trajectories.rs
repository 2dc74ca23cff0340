//! Monte Carlo simulation of the long-time conditional mean.
//!
//! In the long-time limit the conditional mean follows the linear diffusion
//! `dx = drift x dt + B dw` with `B B^T` equal to the innovation-noise
//! covariance `A Omega + Omega A^T + D`. Euler-Maruyama paths from a seeded
//! generator let the ergodic ensemble statistics be checked against the
//! analytic stationary covariance.
//!
//! Randomness comes from the ChaCha12 counter-based stream cipher seeded
//! with a 64-bit key; standard normal variates are produced by Box-Muller on
//! consecutive 53-bit uniforms. Fixed seed means bit-identical paths.

use nalgebra::DVector;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::control::noise_covariance;
use crate::error::{Error, Result};
use crate::lgmodel::LGModel;
use crate::matops::{check_same_dim, frobenius, psd_sqrt, symmetrize, SquareMatrix};

/// Paths whose norm passes this are reported as divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Configuration of one simulated trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    /// Integration step.
    pub dt: f64,
    /// Recorded steps after burn-in.
    pub steps: usize,
    /// Discarded initial steps.
    pub burn_in: usize,
    /// Seed for the counter-based generator.
    pub seed: u64,
    /// Starting conditional mean.
    pub initial_mean: Vec<f64>,
}

/// Time-averaged statistics of a recorded path.
#[derive(Debug, Clone, Serialize)]
pub struct ErgodicStats {
    pub empirical_mean: Vec<f64>,
    /// Second-moment matrix about zero (the stationary mean is the origin).
    pub empirical_cov: Vec<Vec<f64>>,
    pub n_samples: usize,
}

impl ErgodicStats {
    pub fn cov_matrix(&self) -> SquareMatrix {
        let n = self.empirical_cov.len();
        SquareMatrix::from_fn(n, n, |i, j| self.empirical_cov[i][j])
    }
}

/// Gaussian stream: Box-Muller over 53-bit uniforms from ChaCha12.
pub(crate) struct GaussianStream {
    rng: ChaCha12Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha12Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform in (0, 1]; the open lower end keeps ln() finite.
    fn uniform(&mut self) -> f64 {
        (((self.rng.next_u64() >> 11) + 1) as f64) / (1u64 << 53) as f64
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// Innovation-noise factor `B = sqrt(A Omega + Omega A^T + D)` (symmetric
/// principal square root, so `B B^T` reproduces the noise covariance).
pub fn noise_factor(model: &LGModel, omega: &SquareMatrix) -> Result<SquareMatrix> {
    check_same_dim(model.drift(), omega, "noise_factor")?;
    psd_sqrt(&noise_covariance(model, omega))
}

/// Euler-Maruyama path of the conditional mean:
/// `x <- x + drift x dt + B sqrt(dt) xi` with standard normal `xi`.
///
/// Returns `burn_in + steps + 1` points including the initial one. Warns
/// when `dt ||drift||` exceeds 0.1.
pub fn simulate_mean(
    drift: &SquareMatrix,
    noise_b: &SquareMatrix,
    cfg: &TrajectoryConfig,
) -> Result<Vec<DVector<f64>>> {
    let dim = check_same_dim(drift, noise_b, "simulate_mean")?;
    if cfg.initial_mean.len() != dim {
        return Err(Error::DimensionMismatch(format!(
            "initial mean has length {}, drift is {dim}x{dim}",
            cfg.initial_mean.len()
        )));
    }
    if !(cfg.dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "dt must be positive, got {}",
            cfg.dt
        )));
    }
    if cfg.dt * frobenius(drift) > 0.1 {
        log::warn!(
            "dt * ||drift|| = {:.3} exceeds 0.1; Euler-Maruyama bias may be visible",
            cfg.dt * frobenius(drift)
        );
    }

    let mut stream = GaussianStream::new(cfg.seed);
    let sqrt_dt = cfg.dt.sqrt();
    let total = cfg.burn_in + cfg.steps;
    let mut path = Vec::with_capacity(total + 1);
    let mut x = DVector::from_column_slice(&cfg.initial_mean);
    path.push(x.clone());
    let mut xi = DVector::zeros(dim);
    for step in 0..total {
        for v in xi.iter_mut() {
            *v = stream.next_normal();
        }
        x = &x + drift * &x * cfg.dt + noise_b * &xi * sqrt_dt;
        if x.iter().any(|v| !v.is_finite()) || x.norm() > DIVERGENCE_LIMIT {
            return Err(Error::Divergence {
                step,
                limit: DIVERGENCE_LIMIT,
            });
        }
        path.push(x.clone());
    }
    Ok(path)
}

/// Time-averaged mean and second moment of the post-burn-in path.
pub fn ergodic_stats(path: &[DVector<f64>], burn_in: usize) -> Result<ErgodicStats> {
    if path.len() <= burn_in + 1 {
        return Err(Error::InsufficientSamples {
            len: path.len(),
            burn_in,
        });
    }
    let samples = &path[burn_in + 1..];
    let dim = samples[0].len();
    let n = samples.len();
    let mut mean = DVector::<f64>::zeros(dim);
    let mut second = SquareMatrix::zeros(dim, dim);
    for x in samples {
        mean += x;
        second += x * x.transpose();
    }
    mean /= n as f64;
    second /= n as f64;
    let second = symmetrize(&second);
    Ok(ErgodicStats {
        empirical_mean: mean.iter().copied().collect(),
        empirical_cov: (0..dim)
            .map(|i| (0..dim).map(|j| second[(i, j)]).collect())
            .collect(),
        n_samples: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{closed_loop_drift, mean_covariance, FeedbackDesign};
    use crate::ensembles::{find_pointer_basis, Objective, SearchConfig};
    use crate::matops::{propagate_covariance, sym_eigen_range};
    use crate::qbm::Qbm;
    use approx::assert_relative_eq;

    fn pointer_setup() -> (Qbm, SquareMatrix, f64) {
        let qbm = Qbm::new(1000.0).unwrap();
        let search = SearchConfig {
            objective: Objective::Exact,
            ..Default::default()
        };
        let r = find_pointer_basis(qbm.model(), 0.1, &search).unwrap();
        (qbm, r.omega_star, r.tau_mix_star)
    }

    #[test]
    fn noise_factor_cases() {
        let (qbm, omega, _) = pointer_setup();
        // boundary ensembles saturate the LMI: the factor is rank deficient
        let b = noise_factor(qbm.model(), &omega).unwrap();
        let (min_eig, max_eig) = sym_eigen_range(&b);
        assert!(min_eig.abs() <= 1e-6 * max_eig);
        let noise = noise_covariance(qbm.model(), &omega);
        assert!(frobenius(&(&b * b.transpose() - &noise)) <= 1e-10 * frobenius(&noise));

        // interior ensembles give a full-rank factor with exact reconstruction
        let interior = crate::qbm::omega_from_point(1.0, 60.0).unwrap();
        let b = noise_factor(qbm.model(), &interior).unwrap();
        let noise = noise_covariance(qbm.model(), &interior);
        assert!(frobenius(&(&b * b.transpose() - &noise)) <= 1e-12 * frobenius(&noise));

        // frozen system: zero factor
        let frozen = crate::lgmodel::LGModel::from_drift_diffusion(
            SquareMatrix::zeros(2, 2),
            SquareMatrix::zeros(2, 2),
        )
        .unwrap();
        let b = noise_factor(&frozen, &SquareMatrix::identity(2, 2)).unwrap();
        assert_eq!(b, SquareMatrix::zeros(2, 2));
    }

    #[test]
    fn deterministic_decay_without_noise() {
        let drift = SquareMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, -1.0]);
        let cfg = TrajectoryConfig {
            dt: 1e-3,
            steps: 5000,
            burn_in: 0,
            seed: 7,
            initial_mean: vec![1.0, -1.0],
        };
        let path = simulate_mean(&drift, &SquareMatrix::zeros(2, 2), &cfg).unwrap();
        let last = path.last().unwrap();
        assert!(last.norm() < 1e-2 * path[0].norm());
        assert!(last.norm() > 0.0);
    }

    #[test]
    fn divergence_detected_for_unstable_drift() {
        let drift = SquareMatrix::identity(2, 2) * 5.0;
        let cfg = TrajectoryConfig {
            dt: 0.5,
            steps: 100,
            burn_in: 0,
            seed: 7,
            initial_mean: vec![1.0, 1.0],
        };
        assert!(matches!(
            simulate_mean(&drift, &SquareMatrix::zeros(2, 2), &cfg),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let drift = SquareMatrix::from_row_slice(2, 2, &[-1.0, 0.3, 0.0, -2.0]);
        let b = SquareMatrix::identity(2, 2);
        let cfg = TrajectoryConfig {
            dt: 1e-3,
            steps: 2000,
            burn_in: 10,
            seed: 0xDEADBEEF,
            initial_mean: vec![0.0, 0.0],
        };
        let p1 = simulate_mean(&drift, &b, &cfg).unwrap();
        let p2 = simulate_mean(&drift, &b, &cfg).unwrap();
        for (a, b) in p1.iter().zip(&p2) {
            assert!(a
                .iter()
                .zip(b.iter())
                .all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        // a different seed must give a different path
        let other = TrajectoryConfig { seed: 1, ..cfg };
        let p3 = simulate_mean(&drift, &b, &other).unwrap();
        assert!(p1.last().unwrap() != p3.last().unwrap());
    }

    #[test]
    fn ergodic_stats_basics() {
        let constant = vec![DVector::from_vec(vec![2.0, -1.0]); 100];
        let stats = ergodic_stats(&constant, 10).unwrap();
        assert_relative_eq!(stats.empirical_mean[0], 2.0);
        // second moment of a constant path has zero scatter but not zero value
        assert_relative_eq!(stats.empirical_cov[0][0], 4.0, epsilon = 1e-12);
        assert_eq!(stats.n_samples, 89);

        assert!(matches!(
            ergodic_stats(&constant, 100),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    /// Exact one-step sampler for the linear SDE: x -> exp(N dt) x + w with
    /// w drawn from the exact step covariance. Oracle for Euler-Maruyama.
    fn exact_ou_path(
        drift: &SquareMatrix,
        noise_cov: &SquareMatrix,
        cfg: &TrajectoryConfig,
    ) -> Vec<DVector<f64>> {
        let phi = (drift * cfg.dt).exp();
        let step_cov = propagate_covariance(
            drift,
            noise_cov,
            &SquareMatrix::zeros(drift.nrows(), drift.nrows()),
            cfg.dt,
        );
        let step_b = psd_sqrt(&step_cov).unwrap();
        let mut stream = GaussianStream::new(cfg.seed);
        let mut x = DVector::from_column_slice(&cfg.initial_mean);
        let mut path = vec![x.clone()];
        let mut xi = DVector::zeros(drift.nrows());
        for _ in 0..cfg.burn_in + cfg.steps {
            for v in xi.iter_mut() {
                *v = stream.next_normal();
            }
            x = &phi * &x + &step_b * &xi;
            path.push(x.clone());
        }
        path
    }

    #[test]
    fn closed_loop_statistics_match_lyapunov_covariance() {
        let (qbm, omega, tau_star) = pointer_setup();
        let design = FeedbackDesign::new(10.0, 0.1, tau_star, 1).unwrap();
        let n = closed_loop_drift(qbm.model().drift(), &design.gain);
        let noise = noise_covariance(qbm.model(), &omega);
        let m = mean_covariance(&n, &noise).unwrap();
        let b = noise_factor(qbm.model(), &omega).unwrap();

        let dt = tau_star / 1000.0;
        let cfg = TrajectoryConfig {
            dt,
            steps: 200_000,
            burn_in: 10_000,
            seed: 2024,
            initial_mean: vec![0.0, 0.0],
        };
        let em = simulate_mean(&n, &b, &cfg).unwrap();
        let em_stats = ergodic_stats(&em, cfg.burn_in).unwrap();
        let em_err = frobenius(&(&em_stats.cov_matrix() - &m)) / frobenius(&m);
        assert!(em_err < 0.10, "EM covariance error {em_err}");

        // the exact sampler is the dt-bias-free oracle; it must agree too
        let exact = exact_ou_path(&n, &noise, &cfg);
        let ex_stats = ergodic_stats(&exact, cfg.burn_in).unwrap();
        let ex_err = frobenius(&(&ex_stats.cov_matrix() - &m)) / frobenius(&m);
        assert!(ex_err < 0.10, "exact sampler covariance error {ex_err}");

        // CLT-scale bound on the residual mean, with correlation-adjusted
        // effective sample count
        let kappa = 10.0 * 0.1 / tau_star;
        let n_eff = (cfg.steps as f64 * dt * kappa).max(1.0);
        for i in 0..2 {
            let sigma = (m[(i, i)] / n_eff).sqrt();
            assert!(
                em_stats.empirical_mean[i].abs() < 4.0 * sigma,
                "component {i} mean {} vs sigma {sigma}",
                em_stats.empirical_mean[i]
            );
        }

        // stationarity: the two halves agree on the covariance scale
        let half = cfg.steps / 2;
        let first = ergodic_stats(&em[..cfg.burn_in + 1 + half], cfg.burn_in).unwrap();
        let second = ergodic_stats(&em[cfg.burn_in + half..], 0).unwrap();
        let drift_rel = frobenius(&(&first.cov_matrix() - &second.cov_matrix()))
            / frobenius(&first.cov_matrix());
        assert!(drift_rel < 0.10, "split-sample covariance drift {drift_rel}");
    }

    #[test]
    fn open_loop_momentum_is_stationary_while_position_spreads() {
        let (qbm, omega, tau_star) = pointer_setup();
        let b = noise_factor(qbm.model(), &omega).unwrap();
        let cfg = TrajectoryConfig {
            dt: tau_star / 200.0,
            steps: 400_000,
            burn_in: 20_000,
            seed: 99,
            initial_mean: vec![0.0, 0.0],
        };
        let path = simulate_mean(qbm.model().drift(), &b, &cfg).unwrap();
        let stats = ergodic_stats(&path, cfg.burn_in).unwrap();

        // momentum marginal of the conditional mean: variance noise_pp / 2
        let noise = noise_covariance(qbm.model(), &omega);
        let expected_p = noise[(1, 1)] / 2.0;
        let got_p = stats.empirical_cov[1][1];
        assert!(
            (got_p - expected_p).abs() < 0.15 * expected_p,
            "momentum variance {got_p} vs {expected_p}"
        );

        // position performs a random walk: variance keeps growing
        let third = cfg.steps / 3;
        let early = ergodic_stats(&path[..cfg.burn_in + 1 + third], cfg.burn_in).unwrap();
        let late = ergodic_stats(&path[cfg.burn_in + 2 * third..], 0).unwrap();
        assert!(late.empirical_cov[0][0] > 1.5 * early.empirical_cov[0][0]);
    }
}
