//! Game-theoretic Riccati equations and the optimal performance level.
//!
//! The controller equation
//!
//! ```text
//! A'Z + ZA - Z (B (G'G)^-1 B' - gamma^-2 D D') Z + H'H = 0
//! ```
//!
//! and the estimator equation
//!
//! ```text
//! A S + S A' - S (C' N^-1 C - gamma^-2 H'H) S + D D' = 0
//! ```
//!
//! are both instances of a continuous algebraic Riccati equation with an
//! indefinite quadratic term. [`solve_care`] handles the generic form; the
//! two wrappers build the coefficients from a [`SystemMatrices`].

mod gamma;
mod gare;
mod system;

pub use gamma::{find_gamma_star, find_gamma_star_with, synthesis_at, Feasibility, GammaSearch};
pub use gare::{
    solve_care, solve_controller_gare, solve_estimator_gare, CareOptions, GareOutcome,
    Infeasibility,
};
pub use system::{group_propagation, PlantParams, SystemMatrices};

pub use crate::linalg::spectral_radius;

use nalgebra::DMatrix;

/// Minimal positive definite solutions of both GAREs at one `gamma`.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    /// Controller equation solution.
    pub z: DMatrix<f64>,
    /// Estimator equation solution.
    pub sigma: DMatrix<f64>,
    pub gamma: f64,
    /// Relative Frobenius residual of the controller equation.
    pub residual_z: f64,
    /// Relative Frobenius residual of the estimator equation.
    pub residual_sigma: f64,
}

impl RiccatiSolution {
    /// `rho(Sigma Z)`, which must stay below `gamma^2` for the pair to be admissible.
    pub fn coupling_radius(&self) -> f64 {
        spectral_radius(&(&self.sigma * &self.z))
    }
}
