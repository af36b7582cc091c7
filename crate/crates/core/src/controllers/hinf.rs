use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::riccati::{find_gamma_star, synthesis_at, Feasibility, RiccatiSolution, SystemMatrices};

/// Observer-based filter `u = K x_hat` with estimator
/// `x_hat' = F x_hat + L (y - C x_hat)`.
///
/// For the H-infinity filter `F = A - (B (G'G)^-1 B' - gamma^-2 D D') Z`,
/// i.e. the estimator runs the plant under the unclamped control and the
/// worst-case disturbance. The LQG filter is the same structure at
/// `gamma = inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct HinfController {
    /// `K = -(G'G)^-1 B' Z`.
    pub gain: DMatrix<f64>,
    /// Estimator drift `F`.
    pub drift: DMatrix<f64>,
    /// Innovation gain `L = [I - gamma^-2 Sigma Z]^-1 Sigma C' N^-1`.
    pub innovation: DMatrix<f64>,
    pub measurement: DMatrix<f64>,
    pub gamma: f64,
    pub x_hat: DVector<f64>,
}

impl HinfController {
    pub fn from_solution(sys: &SystemMatrices, sol: &RiccatiSolution) -> Result<Self> {
        let n = sys.n();
        let inv_g2 = if sol.gamma.is_infinite() {
            0.0
        } else {
            sol.gamma.powi(-2)
        };
        let gain = -(sys.control_weight_inverse() * sys.b.transpose() * &sol.z);
        let r = &sys.b * sys.control_weight_inverse() * sys.b.transpose()
            - &sys.d * sys.d.transpose() * inv_g2;
        let drift = &sys.a - r * &sol.z;
        let coupling = DMatrix::<f64>::identity(n, n) - &sol.sigma * &sol.z * inv_g2;
        let coupling_inv = coupling
            .try_inverse()
            .ok_or_else(|| Error::Infeasible("I - gamma^-2 Sigma Z is singular".to_string()))?;
        let innovation = coupling_inv * &sol.sigma * sys.c.transpose() * sys.noise_inverse();
        Ok(Self {
            gain,
            drift,
            innovation,
            measurement: sys.c.clone(),
            gamma: sol.gamma,
            x_hat: DVector::zeros(n),
        })
    }

    pub fn n(&self) -> usize {
        self.gain.nrows()
    }

    /// Estimator right-hand side at `x_hat` with measurement `y`.
    pub fn estimator_rate(&self, x_hat: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        &self.drift * x_hat + &self.innovation * (y - &self.measurement * x_hat)
    }

    /// One RK4 step of the estimator with `y` held over the step.
    pub fn step_estimator(&mut self, y: &DVector<f64>, dt: f64) -> Result<&DVector<f64>> {
        if !(dt > 0.0) {
            return Err(Error::invalid("dt", "must be positive"));
        }
        if y.len() != self.n() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "y",
                "non-finite or wrongly sized measurement",
            ));
        }
        let x = &self.x_hat;
        let k1 = self.estimator_rate(x, y);
        let k2 = self.estimator_rate(&(x + &k1 * (dt / 2.0)), y);
        let k3 = self.estimator_rate(&(x + &k2 * (dt / 2.0)), y);
        let k4 = self.estimator_rate(&(x + &k3 * dt), y);
        self.x_hat = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        Ok(&self.x_hat)
    }

    /// Unclamped control `K x_hat`.
    pub fn control(&self) -> DVector<f64> {
        &self.gain * &self.x_hat
    }

    pub fn reset(&mut self) {
        self.x_hat.fill(0.0);
    }

    /// Closed loop of plant and filter without disturbance, state `(x, x_hat)`.
    pub fn closed_loop(&self, sys: &SystemMatrices) -> DMatrix<f64> {
        let n = self.n();
        let lc = &self.innovation * &self.measurement;
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&sys.a);
        m.view_mut((0, n), (n, n)).copy_from(&(&sys.b * &self.gain));
        m.view_mut((n, 0), (n, n)).copy_from(&lc);
        m.view_mut((n, n), (n, n)).copy_from(&(&self.drift - &lc));
        m
    }
}

/// H-infinity filter at `gamma_margin * gamma*`.
///
/// A plant with `gamma* = 0` (no disturbance reaches the cost) is synthesized
/// at `gamma = inf`, where the game degenerates to LQG.
pub fn synthesize_hinf(sys: &SystemMatrices, gamma_margin: f64) -> Result<HinfController> {
    if !(gamma_margin > 1.0) || !gamma_margin.is_finite() {
        return Err(Error::invalid(
            "gamma_margin",
            "must be a finite value above 1",
        ));
    }
    let g_star = find_gamma_star(sys, 1e-4)?;
    let gamma = if g_star > 0.0 {
        gamma_margin * g_star
    } else {
        f64::INFINITY
    };
    synthesize_hinf_at(sys, gamma)
}

pub fn synthesize_hinf_at(sys: &SystemMatrices, gamma: f64) -> Result<HinfController> {
    match synthesis_at(sys, gamma)? {
        Feasibility::Feasible(sol) => HinfController::from_solution(sys, &sol),
        Feasibility::Infeasible(why) => Err(Error::Infeasible(format!("gamma = {gamma}: {why}"))),
    }
}

/// LQR gain with a Kalman estimator.
pub fn synthesize_lqg(sys: &SystemMatrices) -> Result<HinfController> {
    synthesize_hinf_at(sys, f64::INFINITY)
}

/// Independent scalar filters, one per sub-network, each designed for the
/// node's own scalar plant with unit disturbance weight.
///
/// The reported `gamma` is the largest per-node level.
pub fn synthesize_decentralized(sys: &SystemMatrices, gamma_margin: f64) -> Result<HinfController> {
    sys.validate()?;
    for (name, m) in [
        ("A", &sys.a),
        ("B", &sys.b),
        ("C", &sys.c),
        ("N", &sys.noise),
        ("H", &sys.h),
        ("G", &sys.g),
    ] {
        if !linalg::is_diagonal(m) {
            return Err(Error::invalid(
                name,
                "decentralized synthesis needs a diagonal matrix",
            ));
        }
    }
    let n = sys.n();
    let mut gain = DMatrix::zeros(n, n);
    let mut drift = DMatrix::zeros(n, n);
    let mut innovation = DMatrix::zeros(n, n);
    let mut gamma = 0.0f64;
    for i in 0..n {
        let scalar = |m: &DMatrix<f64>| DMatrix::from_element(1, 1, m[(i, i)]);
        let node = SystemMatrices {
            a: scalar(&sys.a),
            b: scalar(&sys.b),
            c: scalar(&sys.c),
            d: DMatrix::from_element(1, 1, 1.0),
            noise: scalar(&sys.noise),
            h: scalar(&sys.h),
            g: scalar(&sys.g),
        };
        let ctrl = synthesize_hinf(&node, gamma_margin)?;
        gain[(i, i)] = ctrl.gain[(0, 0)];
        drift[(i, i)] = ctrl.drift[(0, 0)];
        innovation[(i, i)] = ctrl.innovation[(0, 0)];
        gamma = gamma.max(ctrl.gamma);
    }
    Ok(HinfController {
        gain,
        drift,
        innovation,
        measurement: sys.c.clone(),
        gamma,
        x_hat: DVector::zeros(n),
    })
}

/// Maximizing player's strategy `w = gamma^-2 D' Z x`; zero at `gamma = inf`.
pub fn worst_case_disturbance(
    sys: &SystemMatrices,
    z: &DMatrix<f64>,
    gamma: f64,
    x: &DVector<f64>,
) -> DVector<f64> {
    if gamma.is_infinite() {
        return DVector::zeros(sys.n());
    }
    sys.d.transpose() * z * x / (gamma * gamma)
}
