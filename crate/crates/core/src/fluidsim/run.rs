use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    emissions, measure, step_dynamics, update_infections, AttackSpec, NetworkState, NoiseSpec,
};
use crate::controllers::{worst_case_disturbance, ControllerPolicy, ResponseKind};
use crate::error::{Error, Result};
use crate::riccati::SystemMatrices;

/// Source of `w_a`.
#[derive(Debug, Clone, PartialEq)]
pub enum Disturbance {
    Worm(AttackSpec),
    /// Feedback worst case `gamma^-2 D' Z x` from a controller solution `Z`.
    WorstCase {
        z: DMatrix<f64>,
        gamma: f64,
    },
}

/// Independent streams for measurement noise and infection draws, so that
/// changing one model does not reshuffle the other.
#[derive(Debug, Clone)]
pub struct SimRng {
    pub noise: ChaCha8Rng,
    pub infection: ChaCha8Rng,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        let mut noise = ChaCha8Rng::seed_from_u64(seed);
        noise.set_stream(0);
        let mut infection = ChaCha8Rng::seed_from_u64(seed);
        infection.set_stream(1);
        Self { noise, infection }
    }
}

/// Sampled closed-loop run. Sample `k` is taken at `k dt` before the step.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub times: Vec<f64>,
    pub x: Vec<DVector<f64>>,
    pub x_hat: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
    pub w_a: Vec<DVector<f64>>,
    pub w_n: Vec<DVector<f64>>,
    /// Stacked controlled output `[H x; G u]`.
    pub z: Vec<DVector<f64>>,
    /// Trapezoidal running integrals of `||z||^2` and `||w||^2`.
    pub z_sq_cum: Vec<f64>,
    pub w_sq_cum: Vec<f64>,
    pub z_sq_integral: f64,
    pub w_sq_integral: f64,
    /// Level of the filter in the loop, when it has a finite one.
    pub gamma: Option<f64>,
    /// Time each node became infected; `Some(0.0)` for the initial node.
    pub infected_at: Vec<Option<f64>>,
}

impl SimTrace {
    pub fn n(&self) -> usize {
        self.x.first().map_or(0, |v| v.len())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `J_gamma = ||z||^2 - gamma^2 ||w||^2`.
    pub fn j_gamma(&self, gamma: f64) -> f64 {
        self.z_sq_integral - gamma * gamma * self.w_sq_integral
    }
}

/// `L = ||z|| / ||w||` with `w = [w_a; w_n]`.
pub fn cost_ratio(trace: &SimTrace) -> Result<f64> {
    ratio(trace.z_sq_integral, trace.w_sq_integral)
}

pub(crate) fn ratio(z_sq: f64, w_sq: f64) -> Result<f64> {
    if !(w_sq > 0.0) {
        return Err(Error::UndefinedRatio);
    }
    Ok((z_sq / w_sq).sqrt())
}

/// Closed-loop run over `[0, horizon)`.
///
/// Per step: measure, filter, integrate the plant, draw infections, then
/// accumulate costs. The policy's estimator is reset first; the worst-case
/// disturbance reacts to the true state.
pub fn run_scenario(
    sys: &SystemMatrices,
    disturbance: &Disturbance,
    policy: &mut ControllerPolicy,
    noise: &NoiseSpec,
    horizon: f64,
    dt: f64,
) -> Result<SimTrace> {
    sys.validate()?;
    noise.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    if !(horizon >= dt && horizon.is_finite()) {
        return Err(Error::invalid("horizon", "must cover at least one step"));
    }
    let n = sys.n();
    let attack = match disturbance {
        Disturbance::Worm(a) => {
            a.validate(n)?;
            Some(a)
        }
        Disturbance::WorstCase { z, gamma } => {
            if z.shape() != (n, n) {
                return Err(Error::invalid("disturbance.z", "shape mismatch"));
            }
            if !(*gamma > 0.0) {
                return Err(Error::invalid("disturbance.gamma", "must be positive"));
            }
            None
        }
    };
    let steps = (horizon / dt).round() as usize;
    let mut rng = SimRng::new(noise.seed);
    let mut state = match attack {
        Some(a) => NetworkState::for_attack(n, a),
        None => NetworkState::new(n),
    };
    policy.reset();

    let gamma = policy
        .controller()
        .map(|c| c.gamma)
        .filter(|g| g.is_finite() && policy.kind() != ResponseKind::R5);
    let mut trace = SimTrace {
        times: Vec::with_capacity(steps),
        x: Vec::with_capacity(steps),
        x_hat: Vec::with_capacity(steps),
        u: Vec::with_capacity(steps),
        y: Vec::with_capacity(steps),
        w_a: Vec::with_capacity(steps),
        w_n: Vec::with_capacity(steps),
        z: Vec::with_capacity(steps),
        z_sq_cum: Vec::with_capacity(steps),
        w_sq_cum: Vec::with_capacity(steps),
        z_sq_integral: 0.0,
        w_sq_integral: 0.0,
        gamma,
        infected_at: state.infected.iter().map(|&i| i.then_some(0.0)).collect(),
    };

    let (mut prev_z, mut prev_w) = (0.0, 0.0);
    for k in 0..steps {
        let t = k as f64 * dt;
        let (y, w_n) = measure(&state, sys, noise, &mut rng.noise);
        let u = policy.output(&y, dt)?;
        let w_a = match disturbance {
            Disturbance::Worm(a) => emissions(&state, a),
            Disturbance::WorstCase { z, gamma } => worst_case_disturbance(sys, z, *gamma, &state.x),
        };
        let z = sys.controlled_output(&state.x, &u);
        let fz = z.norm_squared();
        let fw = w_a.norm_squared() + w_n.norm_squared();
        if k > 0 {
            trace.z_sq_integral += 0.5 * dt * (prev_z + fz);
            trace.w_sq_integral += 0.5 * dt * (prev_w + fw);
        }
        prev_z = fz;
        prev_w = fw;

        let mut next = step_dynamics(&state, &u, &w_a, sys, dt)?;
        if let Some(a) = attack {
            next = update_infections(&next, a, &mut rng.infection, dt);
            for i in 0..n {
                if next.infected[i] && !state.infected[i] {
                    trace.infected_at[i] = Some(next.t);
                }
            }
        }

        trace.times.push(t);
        trace.x_hat.push(
            policy
                .estimate()
                .cloned()
                .unwrap_or_else(|| DVector::zeros(n)),
        );
        trace.x.push(std::mem::replace(&mut state, next).x);
        trace.u.push(u);
        trace.y.push(y);
        trace.w_a.push(w_a);
        trace.w_n.push(w_n);
        trace.z.push(z);
        trace.z_sq_cum.push(trace.z_sq_integral);
        trace.w_sq_cum.push(trace.w_sq_integral);
    }
    Ok(trace)
}

impl crate::trace::TraceView for SimTrace {
    fn node_count(&self) -> usize {
        self.n()
    }

    fn sample_times(&self) -> &[f64] {
        &self.times
    }

    fn channels(&self) -> &'static [&'static str] {
        &["x", "xhat", "u", "y", "wa", "wn", "z"]
    }

    fn value(&self, channel: &str, k: usize, node: usize) -> Option<f64> {
        let n = self.n();
        Some(match channel {
            "x" => self.x[k][node],
            "xhat" => self.x_hat[k][node],
            "u" => self.u[k][node],
            "y" => self.y[k][node],
            "wa" => self.w_a[k][node],
            "wn" => self.w_n[k][node],
            "z" => self.z[k][node].hypot(self.z[k][n + node]),
            _ => return None,
        })
    }
}
