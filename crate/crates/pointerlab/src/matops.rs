//! Dense small-matrix kernels: Lyapunov and Riccati solvers, covariance
//! propagation, positive-semidefiniteness tests and principal square roots.
//!
//! Everything here targets the phase-space dimensions of few-mode Gaussian
//! systems (2n with n of order 1-10), so direct vectorized solves are used
//! throughout rather than blocked Schur algorithms:
//!
//! - continuous Lyapunov `A X + X A^T + Q = 0` via the Kronecker-sum linear
//!   system `(I (+) A + A (+) I) vec(X) = -vec(Q)`,
//! - continuous algebraic Riccati `A^T Y + Y A + P - Y Q^-1 Y = 0` via the
//!   stable invariant subspace of the Hamiltonian matrix (matrix sign
//!   iteration), polished with Newton-Kleinman steps,
//! - covariance propagation `dV/dt = A V + V A^T + D` via the exact
//!   augmented-block matrix exponential, which avoids any step-size tuning
//!   inside root finders built on top of it.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense real square matrix used for all phase-space objects.
pub type SquareMatrix = DMatrix<f64>;

/// Relative tolerance below which an eigenvalue is considered non-negative.
pub const DEFAULT_PSD_TOL: f64 = 1e-10;
/// Relative tolerance on `||M - M^T||_F` for symmetry checks.
pub const DEFAULT_SYM_TOL: f64 = 1e-12;
/// Relative residual tolerance for the linear-matrix-equation solvers.
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-10;

/// Outcome metadata for a matrix-equation solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Frobenius norm of the equation residual after substitution.
    pub residual_norm: f64,
    /// Iterations consumed (0 for the direct Lyapunov solve).
    pub iterations: usize,
    /// Whether the residual meets the configured tolerance.
    pub converged: bool,
}

/// Frobenius norm.
pub fn frobenius(m: &SquareMatrix) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn symmetrize(m: &SquareMatrix) -> SquareMatrix {
    (m + m.transpose()) * 0.5
}

pub(crate) fn check_square(m: &SquareMatrix, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "{what} must be square and non-empty, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows())
}

pub(crate) fn check_same_dim(a: &SquareMatrix, b: &SquareMatrix, what: &str) -> Result<usize> {
    let n = check_square(a, what)?;
    if b.nrows() != n || b.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "{what}: expected {n}x{n}, got {}x{}",
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(n)
}

pub(crate) fn check_symmetric(m: &SquareMatrix, tol: f64) -> Result<()> {
    let asym = frobenius(&(m - m.transpose()));
    let scale = frobenius(m).max(1.0);
    if asym > tol * scale {
        return Err(Error::NotSymmetric {
            asymmetry: asym / scale,
            tol,
        });
    }
    Ok(())
}

/// Eigenvalue range (min, max) of the symmetrized part of `m`.
pub(crate) fn sym_eigen_range(m: &SquareMatrix) -> (f64, f64) {
    let eig = symmetrize(m).symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &e in eig.eigenvalues.iter() {
        lo = lo.min(e);
        hi = hi.max(e);
    }
    (lo, hi)
}

/// Solve the continuous Lyapunov equation `A X + X A^T + Q = 0`.
///
/// Direct Kronecker-sum solve; fails with [`Error::SingularSystem`] when some
/// pair of eigenvalues of `A` sums to zero (e.g. a marginally stable drift
/// has no unconditional steady state).
pub fn solve_lyapunov(a: &SquareMatrix, q: &SquareMatrix) -> Result<SquareMatrix> {
    solve_lyapunov_with_report(a, q).map(|(x, _)| x)
}

/// [`solve_lyapunov`] variant that also returns the solve diagnostics.
pub fn solve_lyapunov_with_report(
    a: &SquareMatrix,
    q: &SquareMatrix,
) -> Result<(SquareMatrix, SolveReport)> {
    let n = check_same_dim(a, q, "solve_lyapunov")?;
    check_symmetric(q, DEFAULT_SYM_TOL.max(1e-9))?;

    let eye = SquareMatrix::identity(n, n);
    // vec(AX) = (I (x) A) vec X,  vec(X A^T) = (A (x) I) vec X   (column stacking)
    let op = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = DVector::from_column_slice(q.as_slice()) * -1.0;

    let lu = op.full_piv_lu();
    let diag = lu.u().diagonal();
    let max_piv = diag.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let min_piv = diag.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    if max_piv == 0.0 || min_piv <= 1e-13 * max_piv {
        return Err(Error::SingularSystem);
    }
    let x_vec = lu.solve(&rhs).ok_or(Error::SingularSystem)?;

    let x = symmetrize(&SquareMatrix::from_column_slice(n, n, x_vec.as_slice()));
    let residual = frobenius(&(a * &x + &x * a.transpose() + q));
    let converged = residual <= DEFAULT_RESIDUAL_TOL * (1.0 + frobenius(q));
    if !converged {
        return Err(Error::SingularSystem);
    }
    Ok((
        x,
        SolveReport {
            residual_norm: residual,
            iterations: 0,
            converged,
        },
    ))
}

fn try_inverse(m: &SquareMatrix, what: &str) -> Result<SquareMatrix> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::DimensionMismatch(format!("{what} is singular")))
}

/// Matrix sign function by the scaled Newton iteration `Z <- (Z/c + c Z^-1)/2`.
fn matrix_sign(h: &SquareMatrix) -> Result<(SquareMatrix, usize)> {
    let m = h.nrows();
    let mut z = h.clone();
    for iter in 0..120 {
        let zinv = z.clone().try_inverse().ok_or_else(|| {
            Error::NoStabilizingSolution("sign iteration hit a singular iterate".into())
        })?;
        // determinant scaling accelerates convergence without changing the limit
        let det = z.determinant().abs();
        let c = if det > 0.0 && det.is_finite() {
            det.powf(1.0 / m as f64)
        } else {
            1.0
        };
        let next = (&z / c + zinv * c) * 0.5;
        let step = frobenius(&(&next - &z));
        let scale = frobenius(&z).max(1.0);
        z = next;
        if step <= 1e-14 * scale {
            return Ok((z, iter + 1));
        }
    }
    Err(Error::NoStabilizingSolution(
        "sign iteration did not converge".into(),
    ))
}

fn care_residual(
    a: &SquareMatrix,
    p: &SquareMatrix,
    r: &SquareMatrix,
    y: &SquareMatrix,
) -> SquareMatrix {
    a.transpose() * y + y * a + p - y * r * y
}

/// Solve the continuous algebraic Riccati equation
/// `A^T Y + Y A + P - Y Q^-1 Y = 0` for the stabilizing `Y >= 0`.
///
/// The stable invariant subspace of the Hamiltonian `[[A, -Q^-1], [-P, -A^T]]`
/// is extracted with the matrix sign function, then the solution is polished
/// by Newton-Kleinman iterations (each one a Lyapunov solve).
pub fn solve_care(
    a: &SquareMatrix,
    p: &SquareMatrix,
    q: &SquareMatrix,
) -> Result<SquareMatrix> {
    solve_care_with_report(a, p, q).map(|(y, _)| y)
}

/// [`solve_care`] variant that also returns the solve diagnostics.
pub fn solve_care_with_report(
    a: &SquareMatrix,
    p: &SquareMatrix,
    q: &SquareMatrix,
) -> Result<(SquareMatrix, SolveReport)> {
    let n = check_same_dim(a, p, "solve_care")?;
    check_same_dim(a, q, "solve_care")?;
    check_symmetric(p, 1e-9)?;
    check_symmetric(q, 1e-9)?;
    let (q_min, _) = sym_eigen_range(q);
    if q_min <= 0.0 {
        return Err(Error::NotPsd { min_eig: q_min });
    }
    let r = try_inverse(q, "solve_care: Q")?;
    let r = symmetrize(&r);

    // Hamiltonian matrix; its stable subspace graph is the stabilizing Y.
    let mut h = SquareMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&r));
    h.view_mut((n, 0), (n, n)).copy_from(&(-p));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let (sign, sign_iters) = matrix_sign(&h)?;
    // projector onto the stable subspace
    let proj = (SquareMatrix::identity(2 * n, 2 * n) - sign) * 0.5;
    let svd = proj.svd(true, false);
    let u = svd
        .u
        .ok_or_else(|| Error::NoStabilizingSolution("subspace extraction failed".into()))?;
    let rank = svd.singular_values.iter().filter(|&&s| s > 0.5).count();
    if rank != n {
        return Err(Error::NoStabilizingSolution(format!(
            "stable subspace has dimension {rank}, expected {n}"
        )));
    }
    let basis = u.columns(0, n).into_owned();
    let u1 = basis.rows(0, n).into_owned();
    let u2 = basis.rows(n, n).into_owned();
    let u1_inv = u1
        .try_inverse()
        .ok_or_else(|| Error::NoStabilizingSolution("stable subspace is not a graph".into()))?;
    let mut y = symmetrize(&(u2 * u1_inv));

    // Newton-Kleinman polish: F = A - R Y, solve F^T Y' + Y' F + P + Y R Y = 0.
    let res_scale = 1.0 + frobenius(p);
    let mut residual = frobenius(&care_residual(a, p, &r, &y));
    let mut nk_iters = 0;
    for _ in 0..20 {
        if residual <= 1e-13 * res_scale {
            break;
        }
        let f = a - &r * &y;
        let rhs = p + &y * &r * &y;
        let y_next = match solve_lyapunov(&f.transpose(), &rhs) {
            Ok(v) => v,
            Err(_) => break,
        };
        let res_next = frobenius(&care_residual(a, p, &r, &y_next));
        nk_iters += 1;
        if res_next < residual {
            y = y_next;
            residual = res_next;
        } else {
            break;
        }
    }

    let converged = residual <= DEFAULT_RESIDUAL_TOL * res_scale;
    if !converged {
        return Err(Error::NoStabilizingSolution(format!(
            "residual {residual:.3e} exceeds tolerance"
        )));
    }
    // the closed loop A - Q^-1 Y must be strictly stable
    let closed = a - &r * &y;
    let max_re = closed
        .complex_eigenvalues()
        .iter()
        .fold(f64::NEG_INFINITY, |m, e| m.max(e.re));
    if max_re >= 0.0 {
        return Err(Error::NoStabilizingSolution(format!(
            "closed loop is not Hurwitz (max Re = {max_re:.3e})"
        )));
    }
    Ok((
        y,
        SolveReport {
            residual_norm: residual,
            iterations: sign_iters + nk_iters,
            converged,
        },
    ))
}

/// Propagate a covariance matrix through `dV/dt = A V + V A^T + D` for a
/// time `t >= 0`, exactly up to roundoff.
///
/// Uses the identity `exp([[A, D], [0, -A^T]] t) = [[F11, F12], [0, F22]]`
/// with `V(t) = F11 V0 F11^T + F12 F11^T`.
pub fn propagate_covariance(
    a: &SquareMatrix,
    d: &SquareMatrix,
    v0: &SquareMatrix,
    t: f64,
) -> SquareMatrix {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "drift must be square");
    assert_eq!((d.nrows(), d.ncols()), (n, n), "diffusion dimension");
    assert_eq!((v0.nrows(), v0.ncols()), (n, n), "covariance dimension");
    assert!(t >= 0.0, "propagation time must be non-negative");
    if t == 0.0 {
        return v0.clone();
    }

    let mut aug = SquareMatrix::zeros(2 * n, 2 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a * t));
    aug.view_mut((0, n), (n, n)).copy_from(&(d * t));
    aug.view_mut((n, n), (n, n)).copy_from(&(-a.transpose() * t));
    let e = aug.exp();
    let f11 = e.view((0, 0), (n, n)).into_owned();
    let f12 = e.view((0, n), (n, n)).into_owned();
    symmetrize(&(&f11 * v0 * f11.transpose() + f12 * f11.transpose()))
}

/// Is `m` positive semidefinite within `tol`?
///
/// `true` iff the minimum eigenvalue of the symmetrized matrix is at least
/// `-tol * max(1, ||m||_2)`. Fails when the asymmetry itself exceeds `tol`.
pub fn is_psd(m: &SquareMatrix, tol: f64) -> Result<bool> {
    check_square(m, "is_psd")?;
    check_symmetric(m, tol.max(DEFAULT_SYM_TOL))?;
    let (min_eig, max_eig) = sym_eigen_range(m);
    let norm2 = min_eig.abs().max(max_eig.abs());
    Ok(min_eig >= -tol * norm2.max(1.0))
}

/// Principal square root of a symmetric PSD matrix.
///
/// Eigenvalues in `[-tol, 0)` are clipped to zero; anything below `-tol`
/// (relative) is rejected as not PSD.
pub fn psd_sqrt(m: &SquareMatrix) -> Result<SquareMatrix> {
    check_square(m, "psd_sqrt")?;
    check_symmetric(m, 1e-9)?;
    let eig = symmetrize(m).symmetric_eigen();
    let max_eig = eig
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, &e| acc.max(e.abs()));
    let floor = -DEFAULT_PSD_TOL * max_eig.max(1.0);
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < floor {
            return Err(Error::NotPsd { min_eig: *v });
        }
        *v = v.max(0.0).sqrt();
    }
    let b = &eig.eigenvectors * SquareMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    Ok(symmetrize(&b))
}

/// First-order determinant expansion `det(I + s X) ~ 1 + s tr X`.
pub fn det_first_order(x: &SquareMatrix, eps_scale: f64) -> f64 {
    1.0 + eps_scale * x.trace()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn uniform(rng: &mut ChaCha12Rng) -> f64 {
        (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    fn random_matrix(rng: &mut ChaCha12Rng, n: usize) -> SquareMatrix {
        SquareMatrix::from_fn(n, n, |_, _| uniform(rng))
    }

    /// Random Hurwitz matrix: shift a random matrix left of its spectral abscissa.
    fn random_stable(rng: &mut ChaCha12Rng, n: usize) -> SquareMatrix {
        let r = random_matrix(rng, n);
        let max_re = r
            .complex_eigenvalues()
            .iter()
            .fold(f64::NEG_INFINITY, |m, e| m.max(e.re));
        r - SquareMatrix::identity(n, n) * (max_re + 0.5)
    }

    fn random_psd(rng: &mut ChaCha12Rng, n: usize) -> SquareMatrix {
        let c = random_matrix(rng, n);
        c.transpose() * c
    }

    #[test]
    fn lyapunov_decoupled_scalars() {
        let a = SquareMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        let q = SquareMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]);
        let x = solve_lyapunov(&a, &q).unwrap();
        assert_relative_eq!(x, SquareMatrix::identity(2, 2), epsilon = 1e-13);
    }

    #[test]
    fn lyapunov_substitution_residual() {
        let a = SquareMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -2.0]);
        let q = SquareMatrix::identity(2, 2);
        let (x, report) = solve_lyapunov_with_report(&a, &q).unwrap();
        let res = frobenius(&(&a * &x + &x * a.transpose() + &q));
        assert!(res <= 1e-12, "residual {res}");
        assert!(report.converged);
        assert_eq!(report.iterations, 0);
    }

    #[test]
    fn lyapunov_marginally_stable_is_singular() {
        // free-particle drift has a zero eigenvalue: no steady state exists
        let a = SquareMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, -1.0]);
        let q = SquareMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 2000.0]);
        match solve_lyapunov(&a, &q) {
            Err(Error::SingularSystem) => {}
            other => panic!("expected SingularSystem, got {other:?}"),
        }
    }

    #[test]
    fn lyapunov_randomized_residuals() {
        let mut rng = ChaCha12Rng::seed_from_u64(0x1);
        for i in 0..100 {
            let n = 2 + (i % 3);
            let a = random_stable(&mut rng, n);
            let q = random_psd(&mut rng, n);
            let x = solve_lyapunov(&a, &q).unwrap();
            let res = frobenius(&(&a * &x + &x * a.transpose() + &q));
            assert!(
                res <= 1e-10 * (1.0 + frobenius(&q)),
                "instance {i}: residual {res}"
            );
        }
    }

    #[test]
    fn care_identity_case() {
        // A = 0, P = Q = I reduces to Y^2 = I with Y = I the stabilizing root
        let a = SquareMatrix::zeros(2, 2);
        let y = solve_care(&a, &SquareMatrix::identity(2, 2), &SquareMatrix::identity(2, 2))
            .unwrap();
        assert_relative_eq!(y, SquareMatrix::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn care_randomized_residuals_and_stability() {
        let mut rng = ChaCha12Rng::seed_from_u64(0x2);
        for i in 0..100 {
            let n = 2 + (i % 2);
            let a = random_stable(&mut rng, n);
            let p = random_psd(&mut rng, n) + SquareMatrix::identity(n, n) * 0.1;
            let q = SquareMatrix::identity(n, n) * 2.0;
            let (y, report) = solve_care_with_report(&a, &p, &q).unwrap();
            let r = q.clone().try_inverse().unwrap();
            let res = frobenius(&care_residual(&a, &p, &r, &y));
            assert!(res <= 1e-10 * (1.0 + frobenius(&p)), "instance {i}: {res}");
            assert!(report.converged);
            let closed = &a - &r * &y;
            let max_re = closed
                .complex_eigenvalues()
                .iter()
                .fold(f64::NEG_INFINITY, |m, e| m.max(e.re));
            assert!(max_re < 0.0, "closed loop not Hurwitz: {max_re}");
        }
    }

    #[test]
    fn care_simple_known_solution() {
        // A = -1, P = 2, Q = 1 (scalar): y^2 + 2y - 2 = 0, y = sqrt(3) - 1
        let a = SquareMatrix::from_element(1, 1, -1.0);
        let p = SquareMatrix::from_element(1, 1, 2.0);
        let q = SquareMatrix::from_element(1, 1, 1.0);
        let y = solve_care(&a, &p, &q).unwrap();
        assert_relative_eq!(y[(0, 0)], 3.0f64.sqrt() - 1.0, epsilon = 1e-12);
    }

    #[test]
    fn propagate_frozen_dynamics() {
        let a = SquareMatrix::zeros(2, 2);
        let d = SquareMatrix::zeros(2, 2);
        let v0 = SquareMatrix::from_row_slice(2, 2, &[1.5, 0.2, 0.2, 0.7]);
        let v = propagate_covariance(&a, &d, &v0, 3.7);
        assert_relative_eq!(v, v0, epsilon = 1e-14);
    }

    #[test]
    fn propagate_long_time_reaches_lyapunov_fixed_point() {
        let a = SquareMatrix::from_row_slice(2, 2, &[-1.0, 0.3, 0.0, -2.0]);
        let d = SquareMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.1, 0.5]);
        let v_inf = solve_lyapunov(&a, &d).unwrap();
        let v0 = SquareMatrix::identity(2, 2) * 4.0;
        let v = propagate_covariance(&a, &d, &v0, 40.0);
        assert!(frobenius(&(&v - &v_inf)) <= 1e-8 * frobenius(&v_inf));
    }

    #[test]
    fn propagate_semigroup_property() {
        let mut rng = ChaCha12Rng::seed_from_u64(0x3);
        for _ in 0..25 {
            let a = random_stable(&mut rng, 2);
            let d = random_psd(&mut rng, 2);
            let v0 = random_psd(&mut rng, 2);
            let (t1, t2) = (0.3 + uniform(&mut rng).abs(), 0.2 + uniform(&mut rng).abs());
            let one_shot = propagate_covariance(&a, &d, &v0, t1 + t2);
            let two_step = propagate_covariance(&a, &d, &propagate_covariance(&a, &d, &v0, t1), t2);
            assert!(
                frobenius(&(&one_shot - &two_step)) <= 1e-9 * frobenius(&one_shot).max(1.0),
                "semigroup violated"
            );
        }
    }

    /// RK4 integration of the covariance flow, used only as an oracle here.
    fn rk4_propagate(
        a: &SquareMatrix,
        d: &SquareMatrix,
        v0: &SquareMatrix,
        t: f64,
        steps: usize,
    ) -> SquareMatrix {
        let h = t / steps as f64;
        let f = |v: &SquareMatrix| a * v + v * a.transpose() + d;
        let mut v = v0.clone();
        for _ in 0..steps {
            let k1 = f(&v);
            let k2 = f(&(&v + &k1 * (h / 2.0)));
            let k3 = f(&(&v + &k2 * (h / 2.0)));
            let k4 = f(&(&v + &k3 * h));
            v += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        v
    }

    #[test]
    fn propagate_matches_rk4_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(0x4);
        for _ in 0..10 {
            let a = random_stable(&mut rng, 2);
            let d = random_psd(&mut rng, 2);
            let v0 = random_psd(&mut rng, 2) + SquareMatrix::identity(2, 2);
            let t = 0.5;
            let exact = propagate_covariance(&a, &d, &v0, t);
            let rk4 = rk4_propagate(&a, &d, &v0, t, 4000);
            assert!(frobenius(&(&exact - &rk4)) <= 1e-8 * frobenius(&exact).max(1.0));
        }
    }

    #[test]
    fn psd_checks() {
        assert!(is_psd(&SquareMatrix::identity(3, 3), 1e-10).unwrap());
        // eigenvalues {3, -1}
        let m = SquareMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(!is_psd(&m, 1e-10).unwrap());
        let asym = SquareMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            is_psd(&asym, 1e-10),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn psd_sqrt_diagonal_and_reconstruction() {
        let m = SquareMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0]);
        let b = psd_sqrt(&m).unwrap();
        assert_relative_eq!(
            b,
            SquareMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]),
            epsilon = 1e-13
        );
        assert_relative_eq!(
            psd_sqrt(&SquareMatrix::identity(4, 4)).unwrap(),
            SquareMatrix::identity(4, 4),
            epsilon = 1e-14
        );

        let mut rng = ChaCha12Rng::seed_from_u64(0x5);
        for _ in 0..20 {
            let m = random_psd(&mut rng, 3);
            let b = psd_sqrt(&m).unwrap();
            assert!(frobenius(&(&b * &b - &m)) <= 1e-12 * frobenius(&m).max(1.0));
        }
    }

    #[test]
    fn psd_sqrt_rejects_indefinite() {
        let m = SquareMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(psd_sqrt(&m), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn det_expansion() {
        assert_relative_eq!(
            det_first_order(&SquareMatrix::identity(2, 2), 0.01),
            1.02,
            epsilon = 1e-15
        );
        assert_relative_eq!(det_first_order(&SquareMatrix::zeros(2, 2), 0.3), 1.0);

        // for 2x2, det(I + sX) = 1 + s tr X + s^2 det X exactly
        let mut rng = ChaCha12Rng::seed_from_u64(0x6);
        for _ in 0..20 {
            let x = random_matrix(&mut rng, 2);
            let s = 1e-4;
            let exact = (SquareMatrix::identity(2, 2) + &x * s).determinant();
            let diff = (det_first_order(&x, s) - exact).abs();
            assert!(diff <= 1.01 * s * s * x.determinant().abs() + 1e-15);
        }
    }
}
