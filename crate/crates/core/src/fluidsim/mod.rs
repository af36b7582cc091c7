//! Fluid model of malware traffic on a network of sub-networks.
//!
//! `x_i` is the malware volume in flight towards sub-network `i`. Infected
//! sub-networks emit malware at a fixed rate that `D` routes to the others;
//! uninfected ones become infected at random once enough malware has been
//! delivered to them.

mod attack;
mod run;

pub use attack::{
    AttackKind, AttackSpec, FAST_THRESHOLDS, INFECTION_REFERENCE_DT, SLOW_THRESHOLDS,
};
pub(crate) use run::ratio;
pub use run::{cost_ratio, run_scenario, Disturbance, SimRng, SimTrace};

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::riccati::SystemMatrices;

/// Measurement noise: i.i.d. Gaussian per channel and per step, shaped by
/// `E` with `E E' = N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub mean: f64,
    pub std: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            mean: 0.5,
            std: 0.25,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean >= 0.0 && self.mean.is_finite()) {
            return Err(Error::invalid(
                "noise.mean",
                "must be a finite nonnegative value",
            ));
        }
        if !(self.std >= 0.0 && self.std.is_finite()) {
            return Err(Error::invalid(
                "noise.std",
                "must be a finite nonnegative value",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub x: DVector<f64>,
    pub infected: Vec<bool>,
    /// Malware delivered to each sub-network so far.
    pub cum_received: DVector<f64>,
    pub t: f64,
}

impl NetworkState {
    pub fn new(n: usize) -> Self {
        Self {
            x: DVector::zeros(n),
            infected: vec![false; n],
            cum_received: DVector::zeros(n),
            t: 0.0,
        }
    }

    /// Clean network with the attack's initial infection applied.
    pub fn for_attack(n: usize, attack: &AttackSpec) -> Self {
        let mut s = Self::new(n);
        if let Some(i) = attack.initial_infected {
            s.infected[i] = true;
        }
        s
    }

    pub fn infected_count(&self) -> usize {
        self.infected.iter().filter(|v| **v).count()
    }
}

/// One RK4 step of `x' = A x + B u + D w_a` with `u`, `w_a` held constant.
///
/// Delivered malware `max(0, -a_ii) max(x_i, 0) dt` is added to the running
/// totals; overfiltered (negative) volume delivers nothing.
pub fn step_dynamics(
    state: &NetworkState,
    u: &DVector<f64>,
    w_a: &DVector<f64>,
    sys: &SystemMatrices,
    dt: f64,
) -> Result<NetworkState> {
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    if u.iter().chain(w_a.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("input", "non-finite control or disturbance"));
    }
    let forcing = &sys.b * u + &sys.d * w_a;
    let f = |v: &DVector<f64>| &sys.a * v + &forcing;
    let x = &state.x;
    let k1 = f(x);
    let k2 = f(&(x + &k1 * (dt / 2.0)));
    let k3 = f(&(x + &k2 * (dt / 2.0)));
    let k4 = f(&(x + &k3 * dt));
    let x_next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    let mut cum = state.cum_received.clone();
    for i in 0..x_next.len() {
        cum[i] += (-sys.a[(i, i)]).max(0.0) * x_next[i].max(0.0) * dt;
    }
    Ok(NetworkState {
        x: x_next,
        infected: state.infected.clone(),
        cum_received: cum,
        t: state.t + dt,
    })
}

/// Noisy measurement `y = C x + E w_n`; returns `(y, w_n)`.
pub fn measure<R: Rng + ?Sized>(
    state: &NetworkState,
    sys: &SystemMatrices,
    noise: &NoiseSpec,
    rng: &mut R,
) -> (DVector<f64>, DVector<f64>) {
    let n = state.x.len();
    let w_n = DVector::from_fn(n, |_, _| {
        let e: f64 = rng.sample(StandardNormal);
        noise.mean + noise.std * e
    });
    let y = &sys.c * &state.x + sys.noise_shaping() * &w_n;
    (y, w_n)
}

/// Malware emission `w_a`: the attack rate on each infected node.
pub fn emissions(state: &NetworkState, attack: &AttackSpec) -> DVector<f64> {
    DVector::from_fn(state.infected.len(), |i, _| {
        if state.infected[i] {
            attack.per_infected_rate
        } else {
            0.0
        }
    })
}

/// Random infections over a step of length `dt`.
///
/// Every uninfected node draws one uniform variate per call, whether or not
/// it has crossed a threshold, so the stream layout does not depend on the
/// trajectory.
pub fn update_infections<R: Rng + ?Sized>(
    state: &NetworkState,
    attack: &AttackSpec,
    rng: &mut R,
    dt: f64,
) -> NetworkState {
    let mut next = state.clone();
    for i in 0..next.infected.len() {
        if next.infected[i] {
            continue;
        }
        let p = attack.infection_probability(state.cum_received[i], dt);
        let draw: f64 = rng.random();
        if draw < p {
            next.infected[i] = true;
        }
    }
    next
}
