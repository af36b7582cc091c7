use super::gare::{solve_controller_gare, solve_estimator_gare, GareOutcome, Infeasibility};
use super::{RiccatiSolution, SystemMatrices};
use crate::error::{Error, Result};
use crate::linalg::spectral_radius;

/// Outcome of solving both equations at one `gamma`.
#[derive(Debug, Clone)]
pub enum Feasibility {
    Feasible(RiccatiSolution),
    Infeasible(Infeasibility),
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Self::Feasible(_))
    }
}

/// Solve both equations at `gamma` and test the coupling condition.
///
/// `gamma = f64::INFINITY` yields the LQR/Kalman pair.
pub fn synthesis_at(sys: &SystemMatrices, gamma: f64) -> Result<Feasibility> {
    let (z, residual_z) = match solve_controller_gare(sys, gamma)? {
        GareOutcome::Solved { x, residual } => (x, residual),
        GareOutcome::Infeasible(why) => return Ok(Feasibility::Infeasible(why)),
    };
    let (sigma, residual_sigma) = match solve_estimator_gare(sys, gamma)? {
        GareOutcome::Solved { x, residual } => (x, residual),
        GareOutcome::Infeasible(why) => return Ok(Feasibility::Infeasible(why)),
    };
    let rho = spectral_radius(&(&sigma * &z));
    let gamma_sq = gamma * gamma;
    if !(rho < gamma_sq) {
        return Ok(Feasibility::Infeasible(Infeasibility::CouplingRadius {
            rho,
            gamma_sq,
        }));
    }
    Ok(Feasibility::Feasible(RiccatiSolution {
        z,
        sigma,
        gamma,
        residual_z,
        residual_sigma,
    }))
}

/// Bracketing parameters for [`find_gamma_star_with`].
#[derive(Debug, Clone, Copy)]
pub struct GammaSearch {
    /// Relative width of the final bracket.
    pub rel_tol: f64,
    pub start: f64,
    pub expand: f64,
    /// No feasible level below this is an error.
    pub cap: f64,
    /// Feasible all the way down to this level means `gamma* = 0`.
    pub floor: f64,
}

impl Default for GammaSearch {
    fn default() -> Self {
        Self {
            rel_tol: 1e-4,
            start: 1.0,
            expand: 2.0,
            cap: 1e6,
            floor: 1e-9,
        }
    }
}

/// Optimal performance level with default bracketing and relative tolerance `tol`.
pub fn find_gamma_star(sys: &SystemMatrices, tol: f64) -> Result<f64> {
    find_gamma_star_with(
        sys,
        &GammaSearch {
            rel_tol: tol,
            ..GammaSearch::default()
        },
    )
}

/// Optimal performance level: the returned value is feasible and a level
/// `rel_tol` below it is not.
///
/// A probe whose solver fails to converge is treated as infeasible, since
/// convergence trouble only shows up against the feasibility boundary.
pub fn find_gamma_star_with(sys: &SystemMatrices, search: &GammaSearch) -> Result<f64> {
    if !(search.rel_tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    if !(search.expand > 1.0 && search.start > 0.0 && search.cap >= search.start) {
        return Err(Error::invalid("search", "inconsistent bracket settings"));
    }
    sys.validate()?;
    let feasible = |gamma: f64| -> Result<bool> {
        match synthesis_at(sys, gamma) {
            Ok(f) => Ok(f.is_feasible()),
            Err(Error::SolverFailure(_)) => Ok(false),
            Err(e) => Err(e),
        }
    };

    let (mut lo, mut hi);
    if feasible(search.start)? {
        hi = search.start;
        lo = hi / search.expand;
        while feasible(lo)? {
            hi = lo;
            lo /= search.expand;
            if lo < search.floor {
                return Ok(0.0);
            }
        }
    } else {
        lo = search.start;
        hi = lo * search.expand;
        while !feasible(hi)? {
            lo = hi;
            hi *= search.expand;
            if hi > search.cap {
                return Err(Error::Infeasible(format!(
                    "no feasible gamma below {:e}",
                    search.cap
                )));
            }
        }
    }

    while hi > lo * (1.0 + search.rel_tol) {
        let mid = (lo * hi).sqrt();
        if feasible(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
