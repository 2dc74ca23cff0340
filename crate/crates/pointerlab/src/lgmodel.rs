//! Linear Gaussian system models and Gaussian-state primitives.
//!
//! A model is specified either directly by its moment dynamics, the drift `A`
//! and diffusion `D` of `d<x>/dt = A <x>` and `dV/dt = A V + V A^T + D`, or by
//! the generators of the underlying Markovian evolution: a real symmetric
//! Hamiltonian quadratic form `G` and a complex linear coupling row block
//! `Ctilde` (one row per dissipative channel), from which
//!
//! ```text
//! A = Z (G + Cbar^T S Cbar),    D = Z Cbar^T Cbar Z^T,
//! S = [[0, I_l], [-I_l, 0]],    Cbar = [[Re Ctilde], [Im Ctilde]],
//! ```
//!
//! in the interleaved configuration ordering (q1, p1, q2, p2, ...) with
//! symplectic form `Z = (+)_n [[0, 1], [-1, 0]]` and hbar = 1.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matops::{
    self, check_same_dim, check_square, check_symmetric, frobenius, sym_eigen_range, symmetrize,
    SquareMatrix,
};

/// Tolerance on `det(2V) >= 1` used by purity and fidelity checks.
const PURITY_DET_TOL: f64 = 1e-9;

/// Gaussian state in phase space: a mean configuration and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub mean: DVector<f64>,
    pub cov: SquareMatrix,
}

impl GaussianState {
    pub fn new(mean: DVector<f64>, cov: SquareMatrix) -> Result<Self> {
        let n = check_square(&cov, "GaussianState covariance")?;
        if mean.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "mean has length {}, covariance is {n}x{n}",
                mean.len()
            )));
        }
        check_symmetric(&cov, 1e-9)?;
        Ok(Self { mean, cov })
    }
}

/// A linear Gaussian open-system model.
///
/// Always carries consistent `(A, D, Z)`; the Hamiltonian data `(G, Ctilde)`
/// is present when the model was built from it. Optional measurement data
/// `(C_meas, Gamma)` supports explicit-measurement workflows where the noise
/// factor `F = C Omega + Gamma` is known.
#[derive(Debug, Clone)]
pub struct LGModel {
    n_modes: usize,
    drift: SquareMatrix,
    diffusion: SquareMatrix,
    symplectic: SquareMatrix,
    hamiltonian: Option<SquareMatrix>,
    ctilde_re: Option<DMatrix<f64>>,
    ctilde_im: Option<DMatrix<f64>>,
    pub c_meas: Option<DMatrix<f64>>,
    pub gamma_meas: Option<DMatrix<f64>>,
}

impl LGModel {
    /// Build a model from the Hamiltonian matrix `G` and coupling `Ctilde`
    /// (given as its real and imaginary parts, each `l x 2n`).
    pub fn from_hamiltonian(
        g: SquareMatrix,
        ctilde_re: DMatrix<f64>,
        ctilde_im: DMatrix<f64>,
    ) -> Result<Self> {
        let (a, d) = build_drift_diffusion(&g, &ctilde_re, &ctilde_im)?;
        let n_modes = g.nrows() / 2;
        Ok(Self {
            n_modes,
            symplectic: symplectic_form(n_modes),
            drift: a,
            diffusion: d,
            hamiltonian: Some(g),
            ctilde_re: Some(ctilde_re),
            ctilde_im: Some(ctilde_im),
            c_meas: None,
            gamma_meas: None,
        })
    }

    /// Build a model directly from drift and diffusion matrices.
    pub fn from_drift_diffusion(a: SquareMatrix, d: SquareMatrix) -> Result<Self> {
        let dim = check_same_dim(&a, &d, "LGModel")?;
        if dim % 2 != 0 {
            return Err(Error::DimensionMismatch(format!(
                "phase-space dimension must be even, got {dim}"
            )));
        }
        check_symmetric(&d, 1e-9)?;
        let (d_min, _) = sym_eigen_range(&d);
        if d_min < -matops::DEFAULT_PSD_TOL * frobenius(&d).max(1.0) {
            return Err(Error::NotPsd { min_eig: d_min });
        }
        let n_modes = dim / 2;
        Ok(Self {
            n_modes,
            symplectic: symplectic_form(n_modes),
            drift: a,
            diffusion: symmetrize(&d),
            hamiltonian: None,
            ctilde_re: None,
            ctilde_im: None,
            c_meas: None,
            gamma_meas: None,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// Phase-space dimension 2n.
    pub fn dim(&self) -> usize {
        2 * self.n_modes
    }

    pub fn drift(&self) -> &SquareMatrix {
        &self.drift
    }

    pub fn diffusion(&self) -> &SquareMatrix {
        &self.diffusion
    }

    pub fn symplectic(&self) -> &SquareMatrix {
        &self.symplectic
    }

    pub fn hamiltonian(&self) -> Option<&SquareMatrix> {
        self.hamiltonian.as_ref()
    }

    /// Serialize to the model JSON document.
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            n_modes: Some(self.n_modes),
            g: self.hamiltonian.as_ref().map(to_rows),
            ctilde_re: self.ctilde_re.as_ref().map(to_rows),
            ctilde_im: self.ctilde_im.as_ref().map(to_rows),
            a: Some(to_rows(&self.drift)),
            d: Some(to_rows(&self.diffusion)),
        };
        serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
    }

    /// Parse a model JSON document holding either `{n_modes, G, Ctilde_re,
    /// Ctilde_im}` or `{A, D}` directly. When both are present the
    /// Hamiltonian data wins and `(A, D)` is cross-checked against it.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)
            .map_err(|e| Error::InvalidParameter(format!("model JSON: {e}")))?;
        match (&file.g, &file.ctilde_re) {
            (Some(g), Some(re)) => {
                let g = from_rows(g, "G")?;
                let re = from_rows_rect(re, "Ctilde_re")?;
                let im = match &file.ctilde_im {
                    Some(im) => from_rows_rect(im, "Ctilde_im")?,
                    None => DMatrix::zeros(re.nrows(), re.ncols()),
                };
                let model = Self::from_hamiltonian(g, re, im)?;
                if let (Some(a), Some(d)) = (&file.a, &file.d) {
                    let a = from_rows(a, "A")?;
                    let d = from_rows(d, "D")?;
                    let tol = 1e-12 * (1.0 + frobenius(model.drift()));
                    if frobenius(&(&a - model.drift())) > tol
                        || frobenius(&(&d - model.diffusion())) > 1e-12 * (1.0 + frobenius(model.diffusion()))
                    {
                        return Err(Error::InvalidParameter(
                            "model JSON: (A, D) inconsistent with (G, Ctilde)".into(),
                        ));
                    }
                }
                Ok(model)
            }
            _ => {
                let a = file
                    .a
                    .as_ref()
                    .ok_or_else(|| Error::InvalidParameter("model JSON needs A or G".into()))?;
                let d = file
                    .d
                    .as_ref()
                    .ok_or_else(|| Error::InvalidParameter("model JSON needs D or Ctilde".into()))?;
                Self::from_drift_diffusion(from_rows(a, "A")?, from_rows(d, "D")?)
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_modes: Option<usize>,
    #[serde(rename = "G", default, skip_serializing_if = "Option::is_none")]
    g: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Ctilde_re", default, skip_serializing_if = "Option::is_none")]
    ctilde_re: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Ctilde_im", default, skip_serializing_if = "Option::is_none")]
    ctilde_im: Option<Vec<Vec<f64>>>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    a: Option<Vec<Vec<f64>>>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    d: Option<Vec<Vec<f64>>>,
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn from_rows_rect(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::InvalidParameter(format!("{what}: empty matrix")));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidParameter(format!("{what}: ragged rows")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn from_rows(rows: &[Vec<f64>], what: &str) -> Result<SquareMatrix> {
    let m = from_rows_rect(rows, what)?;
    check_square(&m, what)?;
    Ok(m)
}

/// Drift and diffusion from Hamiltonian/Lindblad data:
/// `A = Z (G + Cbar^T S Cbar)`, `D = Z Cbar^T Cbar Z^T`.
pub fn build_drift_diffusion(
    g: &SquareMatrix,
    ctilde_re: &DMatrix<f64>,
    ctilde_im: &DMatrix<f64>,
) -> Result<(SquareMatrix, SquareMatrix)> {
    let dim = check_square(g, "G")?;
    if dim % 2 != 0 {
        return Err(Error::DimensionMismatch(format!(
            "G must be 2n x 2n, got {dim}x{dim}"
        )));
    }
    check_symmetric(g, 1e-9)?;
    let l = ctilde_re.nrows();
    if ctilde_re.ncols() != dim
        || ctilde_im.nrows() != l
        || ctilde_im.ncols() != dim
    {
        return Err(Error::DimensionMismatch(format!(
            "Ctilde must be l x {dim}; got re {}x{}, im {}x{}",
            ctilde_re.nrows(),
            ctilde_re.ncols(),
            ctilde_im.nrows(),
            ctilde_im.ncols()
        )));
    }
    let z = symplectic_form(dim / 2);

    // Cbar stacks the real part over the imaginary part (2l x 2n)
    let mut cbar = DMatrix::zeros(2 * l, dim);
    cbar.view_mut((0, 0), (l, dim)).copy_from(ctilde_re);
    cbar.view_mut((l, 0), (l, dim)).copy_from(ctilde_im);

    let mut s = DMatrix::zeros(2 * l, 2 * l);
    s.view_mut((0, l), (l, l))
        .copy_from(&DMatrix::identity(l, l));
    s.view_mut((l, 0), (l, l))
        .copy_from(&(-DMatrix::identity(l, l)));

    let a = &z * (g + cbar.transpose() * s * &cbar);
    let d = symmetrize(&(&z * cbar.transpose() * &cbar * z.transpose()));
    Ok((a, d))
}

/// Block-diagonal symplectic form for `n` modes in interleaved ordering.
pub fn symplectic_form(n: usize) -> SquareMatrix {
    assert!(n >= 1, "at least one mode");
    let mut z = SquareMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        z[(2 * k, 2 * k + 1)] = 1.0;
        z[(2 * k + 1, 2 * k)] = -1.0;
    }
    z
}

/// Purity `1/sqrt(det 2V)` of a Gaussian state, clamped to at most 1.
pub fn purity(v: &SquareMatrix) -> Result<f64> {
    check_square(v, "purity")?;
    check_symmetric(v, 1e-9)?;
    let det = (v * 2.0).determinant();
    if det < 1.0 - PURITY_DET_TOL {
        return Err(Error::InvalidCovariance { det });
    }
    Ok((1.0 / det.sqrt()).min(1.0))
}

/// Fidelity `1/sqrt(det(V1 + V2))` between two zero-mean Gaussian states, at
/// least one of which is pure.
pub fn fidelity_zero_mean(v1: &SquareMatrix, v2: &SquareMatrix) -> Result<f64> {
    check_same_dim(v1, v2, "fidelity_zero_mean")?;
    check_symmetric(v1, 1e-9)?;
    check_symmetric(v2, 1e-9)?;
    for v in [v1, v2] {
        let det = (v * 2.0).determinant();
        if det < 1.0 - PURITY_DET_TOL {
            return Err(Error::InvalidCovariance { det });
        }
    }
    let det = (v1 + v2).determinant();
    if det <= 0.0 {
        return Err(Error::InvalidCovariance { det });
    }
    Ok((1.0 / det.sqrt()).min(1.0))
}

/// Does `V` satisfy the uncertainty relation `V + (i/2) Z >= 0`?
///
/// The Hermitian form is diagonalized through its real symmetric embedding
/// `[[V, -Z/2], [Z/2, V]]`, whose spectrum duplicates that of `V + (i/2)Z`.
pub fn check_quantum_cov(v: &SquareMatrix, z: &SquareMatrix, tol: f64) -> bool {
    let n = v.nrows();
    assert_eq!((z.nrows(), z.ncols()), (n, n), "symplectic form dimension");
    let vs = symmetrize(v);
    let mut embed = SquareMatrix::zeros(2 * n, 2 * n);
    embed.view_mut((0, 0), (n, n)).copy_from(&vs);
    embed.view_mut((n, n), (n, n)).copy_from(&vs);
    embed.view_mut((0, n), (n, n)).copy_from(&(-(z * 0.5)));
    embed.view_mut((n, 0), (n, n)).copy_from(&(z * 0.5));
    let (min_eig, max_eig) = sym_eigen_range(&embed);
    min_eig >= -tol * min_eig.abs().max(max_eig.abs()).max(1.0)
}

/// Minimum eigenvalue of the Hermitian form `V + (i/2) Z`.
pub(crate) fn quantum_cov_min_eig(v: &SquareMatrix, z: &SquareMatrix) -> f64 {
    let n = v.nrows();
    let vs = symmetrize(v);
    let mut embed = SquareMatrix::zeros(2 * n, 2 * n);
    embed.view_mut((0, 0), (n, n)).copy_from(&vs);
    embed.view_mut((n, n), (n, n)).copy_from(&vs);
    embed.view_mut((0, n), (n, n)).copy_from(&(-(z * 0.5)));
    embed.view_mut((n, 0), (n, n)).copy_from(&(z * 0.5));
    sym_eigen_range(&embed).0
}

/// Is every eigenvalue of `a` strictly in the left half plane?
pub fn is_hurwitz(a: &SquareMatrix) -> bool {
    let scale = frobenius(a).max(1.0);
    a.complex_eigenvalues()
        .iter()
        .all(|e| e.re < -1e-12 * scale)
}
