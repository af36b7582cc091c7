use nalgebra::DMatrix;

use super::SystemMatrices;
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy)]
pub struct CareOptions {
    /// Accepted relative Frobenius residual.
    pub residual_tol: f64,
    /// Hamiltonian eigenvalues with `|Re| <= axis_tol * ||M||` count as imaginary.
    pub axis_tol: f64,
    pub sign_tol: f64,
    pub max_sign_iter: usize,
    pub max_newton_iter: usize,
}

impl Default for CareOptions {
    fn default() -> Self {
        Self {
            residual_tol: 1e-8,
            axis_tol: 1e-8,
            sign_tol: 1e-13,
            max_sign_iter: 100,
            max_newton_iter: 20,
        }
    }
}

/// Why a Riccati pair admits no admissible solution at a given `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Infeasibility {
    /// The Hamiltonian has eigenvalues on the imaginary axis.
    ImaginaryAxisEigenvalues,
    /// The stable invariant subspace is not a graph subspace (`X1` singular).
    SingularBasis,
    /// The candidate does not stabilize `A - R X`.
    NotStabilizing,
    /// The candidate is indefinite.
    NotPositiveDefinite,
    /// Both equations solvable but `rho(Sigma Z) >= gamma^2`.
    CouplingRadius { rho: f64, gamma_sq: f64 },
}

impl std::fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::ImaginaryAxisEigenvalues => {
                write!(f, "Hamiltonian eigenvalues on the imaginary axis")
            }
            Self::SingularBasis => write!(f, "stable subspace has no graph basis"),
            Self::NotStabilizing => write!(f, "candidate solution is not stabilizing"),
            Self::NotPositiveDefinite => write!(f, "candidate solution is not positive definite"),
            Self::CouplingRadius { rho, gamma_sq } => {
                write!(f, "rho(Sigma Z) = {rho} >= gamma^2 = {gamma_sq}")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum GareOutcome {
    Solved { x: DMatrix<f64>, residual: f64 },
    Infeasible(Infeasibility),
}

impl GareOutcome {
    pub fn solution(&self) -> Option<&DMatrix<f64>> {
        match self {
            Self::Solved { x, .. } => Some(x),
            Self::Infeasible(_) => None,
        }
    }

    pub fn into_solution(self) -> Option<DMatrix<f64>> {
        match self {
            Self::Solved { x, .. } => Some(x),
            Self::Infeasible(_) => None,
        }
    }
}

fn residual(a: &DMatrix<f64>, r: &DMatrix<f64>, q: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    let res = a.transpose() * x + x * a - x * r * x + q;
    let scale = q.norm();
    if scale > 0.0 {
        res.norm() / scale
    } else {
        res.norm()
    }
}

/// Stabilizing solution of `A'X + XA - X R X + Q = 0` with `R`, `Q` symmetric
/// and `R` possibly indefinite.
///
/// The stable invariant subspace of the Hamiltonian `[[A, -R], [-Q, -A']]` is
/// read off its matrix sign `W` as the null space of `W + I`; with
/// `W + I = [[W11 + I, W12], [W21, W22 + I]]` the graph `[I; X]` of that
/// subspace satisfies `[W12; W22 + I] X = -[W11 + I; W21]`, which is solved in
/// the least-squares sense. The result is polished by Newton-Kleinman steps.
pub fn solve_care(
    a: &DMatrix<f64>,
    r: &DMatrix<f64>,
    q: &DMatrix<f64>,
    opts: &CareOptions,
) -> Result<GareOutcome> {
    let n = a.nrows();
    let mut ham = DMatrix::<f64>::zeros(2 * n, 2 * n);
    ham.view_mut((0, 0), (n, n)).copy_from(a);
    ham.view_mut((0, n), (n, n)).copy_from(&(-r));
    ham.view_mut((n, 0), (n, n)).copy_from(&(-q));
    ham.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let scale = ham.norm().max(1.0);
    let min_re = linalg::eigenvalues(&ham)
        .iter()
        .map(|l| l.re.abs())
        .fold(f64::INFINITY, f64::min);
    if min_re <= opts.axis_tol * scale {
        return Ok(GareOutcome::Infeasible(
            Infeasibility::ImaginaryAxisEigenvalues,
        ));
    }

    let sign = match linalg::matrix_sign(&ham, opts.sign_tol, opts.max_sign_iter) {
        Ok(Some(w)) => w,
        Ok(None) => {
            return Ok(GareOutcome::Infeasible(
                Infeasibility::ImaginaryAxisEigenvalues,
            ))
        }
        Err(it) => {
            return Err(Error::SolverFailure(format!(
                "matrix sign iteration did not converge in {it} steps"
            )))
        }
    };

    let eye = DMatrix::<f64>::identity(n, n);
    let mut lhs = DMatrix::<f64>::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n))
        .copy_from(&sign.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n))
        .copy_from(&(sign.view((n, n), (n, n)) + &eye));
    let mut rhs = DMatrix::<f64>::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&(-(sign.view((0, 0), (n, n)) + &eye)));
    rhs.view_mut((n, 0), (n, n))
        .copy_from(&(-sign.view((n, 0), (n, n))));

    let svd = lhs.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin <= 1e-12 * smax {
        return Ok(GareOutcome::Infeasible(Infeasibility::SingularBasis));
    }
    let x = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::SolverFailure(format!("least-squares solve: {e}")))?;
    let mut x = linalg::symmetrize(&x);

    let mut res = residual(a, r, q, &x);
    for _ in 0..opts.max_newton_iter {
        if res <= 1e-15 {
            break;
        }
        let closed = a - r * &x;
        let forcing = q + &x * r * &x;
        let Some(next) = linalg::solve_lyapunov(&closed, &forcing) else {
            break;
        };
        let next_res = residual(a, r, q, &next);
        if !(next_res < res) {
            break;
        }
        x = next;
        res = next_res;
    }

    if linalg::spectral_abscissa(&(a - r * &x)) >= -opts.axis_tol * scale {
        return Ok(GareOutcome::Infeasible(Infeasibility::NotStabilizing));
    }
    if linalg::min_symmetric_eigenvalue(&x) < -1e-9 * x.norm().max(1.0) {
        return Ok(GareOutcome::Infeasible(Infeasibility::NotPositiveDefinite));
    }
    if !(res <= opts.residual_tol) {
        return Err(Error::SolverFailure(format!(
            "relative residual {res:e} above tolerance {:e}",
            opts.residual_tol
        )));
    }
    Ok(GareOutcome::Solved { x, residual: res })
}

fn inv_gamma_sq(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma", format!("{gamma} is not positive")));
    }
    Ok(if gamma.is_infinite() {
        0.0
    } else {
        gamma.powi(-2)
    })
}

/// Controller equation at `gamma`; `gamma = inf` gives the LQR equation.
pub fn solve_controller_gare(sys: &SystemMatrices, gamma: f64) -> Result<GareOutcome> {
    sys.validate()?;
    let k = inv_gamma_sq(gamma)?;
    let r =
        &sys.b * sys.control_weight_inverse() * sys.b.transpose() - &sys.d * sys.d.transpose() * k;
    let q = sys.h.transpose() * &sys.h;
    solve_care(&sys.a, &linalg::symmetrize(&r), &q, &CareOptions::default())
}

/// Estimator equation at `gamma`; `gamma = inf` gives the Kalman filter equation.
pub fn solve_estimator_gare(sys: &SystemMatrices, gamma: f64) -> Result<GareOutcome> {
    sys.validate()?;
    let k = inv_gamma_sq(gamma)?;
    let r = sys.c.transpose() * sys.noise_inverse() * &sys.c - sys.h.transpose() * &sys.h * k;
    let q = &sys.d * sys.d.transpose();
    solve_care(
        &sys.a.transpose(),
        &linalg::symmetrize(&r),
        &q,
        &CareOptions::default(),
    )
}
