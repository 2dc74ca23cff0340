//! High-temperature quantum Brownian motion in one dimension, in scaled
//! units (damping rate, mass, Boltzmann constant and hbar all unity).
//!
//! The model is generated by `G = [[0, 1], [1, 1]]` and the single coupling
//! row `Ctilde = (sqrt(2T), i/sqrt(8T))`, which yield
//!
//! ```text
//! A = [[0, 1], [0, -1]],    D = diag(1/(8T), 2T).
//! ```
//!
//! Closed forms implemented here, all cross-checked against the generic
//! propagator in the tests:
//!
//! - first and second moments of the unconditional evolution,
//! - `det[2 V(t)]` for a pure initial covariance `Omega(beta, gamma)`,
//! - the feasibility boundary `gamma(beta)` of the PR region,
//! - the momentum-averaged survival probability `S(tau) = 4 sqrt(R/G)`,
//! - mixing and survival times as roots of the two functions above,
//! - the log-log power-law fit for the pointer mixing time against
//!   temperature.

use nalgebra::DVector;
use serde::Serialize;

use crate::ensembles;
use crate::error::{Error, Result};
use crate::lgmodel::{GaussianState, LGModel};
use crate::matops::{frobenius, SquareMatrix};

/// A point of the `(beta, gamma)` parameter plane, classified against the
/// PR feasibility boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub beta: f64,
    pub gamma: f64,
    pub on_boundary: bool,
}

/// Pure conditioned covariance `(1/4) [[alpha, beta], [beta, gamma]]` with
/// `alpha = (beta^2 + 4)/gamma`, so that `det(2 Omega) = 1` identically.
pub fn omega_from_point(beta: f64, gamma: f64) -> Result<SquareMatrix> {
    ensembles::pure_omega(beta, gamma)
}

/// Ordinary least squares of `log10 tau` on `log10 T`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PowerLawFit {
    pub intercept: f64,
    pub slope: f64,
    pub stderr_intercept: f64,
    pub stderr_slope: f64,
}

/// Fit `log10 tau = intercept + slope * log10 T` by OLS with classical
/// standard errors.
pub fn power_law_fit(samples: &[(f64, f64)]) -> Result<PowerLawFit> {
    if samples.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "need at least 3 samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|&(t, tau)| t <= 0.0 || tau <= 0.0) {
        return Err(Error::DegenerateFit("all samples must be positive".into()));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.0.log10()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.log10()).collect();
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateFit(
            "all temperatures coincide; slope is undefined".into(),
        ));
    }
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let s2 = ssr / (n - 2.0);
    Ok(PowerLawFit {
        intercept,
        slope,
        stderr_intercept: (s2 * (1.0 / n + x_mean * x_mean / sxx)).sqrt(),
        stderr_slope: (s2 / sxx).sqrt(),
    })
}

/// The quantum Brownian motion model at scaled temperature `T`.
#[derive(Debug, Clone)]
pub struct Qbm {
    temperature: f64,
    model: LGModel,
}

impl Qbm {
    /// Requires `T >= 10`; the high-temperature derivation is dubious below
    /// `T ~ 100`, which only warns.
    pub fn new(temperature: f64) -> Result<Self> {
        if !(temperature >= 10.0) {
            return Err(Error::InvalidParameter(format!(
                "temperature must be at least 10 in scaled units, got {temperature}"
            )));
        }
        if temperature < 100.0 {
            log::warn!(
                "temperature {temperature} is below 100; the high-temperature model degrades here"
            );
        }
        let g = SquareMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 1.0]);
        let re = nalgebra::DMatrix::from_row_slice(1, 2, &[(2.0 * temperature).sqrt(), 0.0]);
        let im =
            nalgebra::DMatrix::from_row_slice(1, 2, &[0.0, 1.0 / (8.0 * temperature).sqrt()]);
        let model = LGModel::from_hamiltonian(g, re, im)?;

        // the generated moment matrices must reproduce the closed forms
        let a_ref = SquareMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, -1.0]);
        let d_ref = SquareMatrix::from_row_slice(
            2,
            2,
            &[1.0 / (8.0 * temperature), 0.0, 0.0, 2.0 * temperature],
        );
        assert!(
            frobenius(&(model.drift() - &a_ref)) <= 1e-14 * frobenius(&a_ref).max(1.0)
                && frobenius(&(model.diffusion() - &d_ref)) <= 1e-14 * frobenius(&d_ref),
            "drift/diffusion construction disagrees with the closed forms"
        );
        Ok(Self { temperature, model })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn model(&self) -> &LGModel {
        &self.model
    }

    /// Is `(beta, gamma)` inside the PR region? Combines the feasibility
    /// inequality with the uncertainty check of the implied pure state.
    pub fn pr_region_contains(&self, beta: f64, gamma: f64) -> Result<bool> {
        if gamma <= 0.0 {
            return Err(Error::NonpositiveGamma(gamma));
        }
        let t = self.temperature;
        let lhs = (1.0 / (8.0 * t) + beta / 2.0) * (2.0 * t - gamma / 2.0)
            - (gamma - beta).powi(2) / 16.0;
        if lhs < 0.0 {
            return Ok(false);
        }
        let omega = omega_from_point(beta, gamma)?;
        Ok(crate::lgmodel::check_quantum_cov(
            &omega,
            self.model.symplectic(),
            1e-10,
        ))
    }

    /// Residual of the feasibility equality at `(beta, gamma)`; zero on the
    /// boundary, positive inside.
    pub fn boundary_residual(&self, beta: f64, gamma: f64) -> f64 {
        let t = self.temperature;
        (1.0 / (8.0 * t) + beta / 2.0) * (2.0 * t - gamma / 2.0)
            - (gamma - beta).powi(2) / 16.0
    }

    /// Upper boundary of the PR region at fixed `beta`: the larger root of
    /// `gamma^2 + gamma (2 beta + 1/T) + beta^2 - 16 beta T - 4 = 0`.
    pub fn boundary_gamma(&self, beta: f64) -> Result<f64> {
        let t = self.temperature;
        let b = 2.0 * beta + 1.0 / t;
        let c = beta * beta - 16.0 * beta * t - 4.0;
        let disc = b * b - 4.0 * c;
        if disc < 0.0 {
            return Err(Error::NoRealRoot { beta });
        }
        let root = 0.5 * (-b + disc.sqrt());
        if root <= 0.0 {
            return Err(Error::NoRealRoot { beta });
        }
        Ok(root)
    }

    /// Classify a parameter point against the boundary curve.
    pub fn classify_point(&self, beta: f64, gamma: f64) -> Result<BoundaryPoint> {
        if gamma <= 0.0 {
            return Err(Error::NonpositiveGamma(gamma));
        }
        let scale = (self.temperature * gamma).max(1.0);
        Ok(BoundaryPoint {
            beta,
            gamma,
            on_boundary: self.boundary_residual(beta, gamma).abs() <= 1e-10 * scale,
        })
    }

    /// Closed-form unconditional moments at elapsed time `t >= 0` from an
    /// arbitrary initial mean and covariance (ordering `(q, p)`).
    pub fn moments(&self, t: f64, mean0: &DVector<f64>, cov0: &SquareMatrix) -> GaussianState {
        assert!(t >= 0.0, "time must be non-negative");
        assert_eq!(mean0.len(), 2);
        assert_eq!((cov0.nrows(), cov0.ncols()), (2, 2));
        let temp = self.temperature;
        let e = (-t).exp();
        let e2 = (-2.0 * t).exp();
        let (q0, p0) = (mean0[0], mean0[1]);
        let (vq0, vqp0, vp0) = (cov0[(0, 0)], cov0[(0, 1)], cov0[(1, 1)]);

        let q = q0 + p0 * (1.0 - e);
        let p = p0 * e;
        let vp = vp0 * e2 + temp * (1.0 - e2);
        let vqp = vqp0 * e + vp0 * e * (1.0 - e) + temp * (1.0 - e) * (1.0 - e);
        let vq = vq0
            + t / (8.0 * temp)
            + 2.0 * t * temp
            + 2.0 * (vqp0 + vp0 - 2.0 * temp) * (1.0 - e)
            + (temp - vp0) * (1.0 - e2);

        GaussianState {
            mean: DVector::from_vec(vec![q, p]),
            cov: SquareMatrix::from_row_slice(2, 2, &[vq, vqp, vqp, vp]),
        }
    }

    /// Closed-form `det[2 V(t)]` for the pure initial covariance
    /// `Omega(beta, gamma)`; equals one at `t = 0`.
    pub fn det_m(&self, t: f64, beta: f64, gamma: f64) -> f64 {
        let temp = self.temperature;
        let et = t.exp();
        let et2 = et * et;
        let b2 = beta * beta;
        let braces = 8.0 * (4.0 + b2) * (et2 - 1.0) * temp * temp
            + gamma
                * gamma
                * (t + 8.0 * (3.0 - 4.0 * et + et2 + 2.0 * t) * temp * temp)
            + 4.0
                * gamma
                * temp
                * (2.0 + 4.0 * beta * (et - 1.0) * (et - 1.0) * temp
                    - 32.0 * (1.0 - 2.0 * et + et2) * temp * temp
                    + (et2 - 1.0) * (1.0 + 16.0 * temp * temp) * t);
        (-2.0 * t).exp() / (8.0 * gamma * temp) * braces
    }

    fn rate(&self, beta: f64, gamma: f64) -> f64 {
        let temp = self.temperature;
        -2.0 + gamma / (8.0 * temp) + 2.0 * temp * (beta * beta + 4.0) / gamma
    }

    /// Mixing time at `(beta, gamma)`: smallest root of
    /// `det[2 V(tau)] = (1 - eps)^-2` using the closed form.
    pub fn mixing_time(&self, beta: f64, gamma: f64, eps: f64) -> Result<f64> {
        if !self.pr_region_contains(beta, gamma)? {
            return Err(Error::InvalidParameter(format!(
                "({beta}, {gamma}) lies outside the PR region"
            )));
        }
        let target = (1.0 - eps).powi(-2);
        let rate = self.rate(beta, gamma);
        let t_init = if rate.abs() > 1e-12 { 10.0 / rate.abs() } else { 1.0 };
        ensembles::smallest_root(|t| self.det_m(t, beta, gamma) - target, t_init)
    }

    /// Momentum-averaged survival probability `S(tau) = 4 sqrt(R/G)` with
    /// `R = exp(2 tau) gamma T`.
    pub fn survival_probability(&self, tau: f64, beta: f64, gamma: f64) -> Result<f64> {
        if gamma <= 0.0 {
            return Err(Error::NonpositiveGamma(gamma));
        }
        if !(tau >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tau must be non-negative, got {tau}"
            )));
        }
        let t = self.temperature;
        let et = tau.exp();
        let b2 = beta * beta;
        let g2 = gamma * gamma;
        let denom = -t * gamma * (8.0 * t - beta - gamma).powi(2)
            + et * (64.0 * (2.0 - tau) * t * t * t * gamma
                - 16.0 * t * t * (4.0 + b2 + 2.0 * beta * gamma + (1.0 - tau) * g2)
                + 2.0 * t * gamma * (8.0 - 2.0 * tau + b2 + g2 + 2.0 * gamma * beta)
                + tau * g2)
            + et
                * et
                * t
                * (64.0 * (tau - 1.0) * t * t * gamma
                    + 16.0 * t * (4.0 + b2 + beta * gamma)
                    - gamma * ((beta + gamma).powi(2) - 4.0 * tau));
        if denom <= 0.0 {
            return Err(Error::NegativeDiscriminant { tau });
        }
        let r = et * et * gamma * t;
        Ok(4.0 * (r / denom).sqrt())
    }

    /// Survival time at `(beta, gamma)`: smallest root of `S(tau) = 1 - eps`.
    pub fn survival_time(&self, beta: f64, gamma: f64, eps: f64) -> Result<f64> {
        if !self.pr_region_contains(beta, gamma)? {
            return Err(Error::InvalidParameter(format!(
                "({beta}, {gamma}) lies outside the PR region"
            )));
        }
        let rate = self.rate(beta, gamma);
        let t_init = if rate.abs() > 1e-12 { 10.0 / rate.abs() } else { 1.0 };
        let mut incomplete = false;
        let root = ensembles::smallest_root(
            |t| match self.survival_probability(t, beta, gamma) {
                Ok(s) => (1.0 - eps) - s,
                Err(_) => {
                    incomplete = true;
                    1.0 // outside the validity regime: treat as fully decayed
                }
            },
            t_init,
        )?;
        if incomplete {
            log::warn!("survival probability left its validity regime while bracketing");
        }
        Ok(root)
    }
}
