use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{
    count_at_or_above, score_packet, translate_rate_to_threshold, FilterMode, FilterState, Packet,
    ScoreDistribution, ScoreHistogram, ScoreModel, SCORE_LEVELS,
};
use crate::controllers::{synthesize_hinf_at, ControllerPolicy};
use crate::error::{Error, Result};
use crate::fluidsim::{
    ratio, update_infections, AttackKind, AttackSpec, NetworkState, SimRng, SLOW_THRESHOLDS,
};
use crate::riccati::{find_gamma_star, PlantParams, SystemMatrices};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PacketScenario {
    /// 100:1 costs, half of the malware detected.
    S1,
    /// 100:1 costs, a quarter detected.
    S2,
    /// 200:1 costs, half detected.
    S3,
    /// 200:1 costs, a quarter detected.
    S4,
    /// 0.1:1 costs, half detected.
    S5,
}

impl PacketScenario {
    pub const ALL: [PacketScenario; 5] = [Self::S1, Self::S2, Self::S3, Self::S4, Self::S5];

    pub fn cost_ratio(self) -> f64 {
        match self {
            Self::S1 | Self::S2 => 100.0,
            Self::S3 | Self::S4 => 200.0,
            Self::S5 => 0.1,
        }
    }

    pub fn detection(self) -> f64 {
        match self {
            Self::S2 | Self::S4 => 0.25,
            _ => 0.5,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::S1 => "S1",
            Self::S2 => "S2",
            Self::S3 => "S3",
            Self::S4 => "S4",
            Self::S5 => "S5",
        }
    }
}

impl std::fmt::Display for PacketScenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for PacketScenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| Error::invalid("scenario", format!("unknown packet scenario {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianScore {
    pub mean: f64,
    pub std: f64,
}

/// Traffic, scoring and control settings shared by all scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PacketSimConfig {
    /// Synthesis plant; its cost ratio is replaced by the scenario's.
    pub plant: PlantParams,
    pub horizon: f64,
    /// Control interval.
    pub interval: f64,
    /// Mean legitimate packets per ordered node pair and interval.
    pub legit_per_pair: f64,
    /// Mean malware packets an infected node emits per interval, routed by `D`.
    pub malware_per_infected: f64,
    pub packet_size: u32,
    /// Histogram window in intervals.
    pub window: usize,
    /// RK4 steps of the estimator per interval.
    pub estimator_substeps: usize,
    pub gamma_margin: f64,
    pub legit_score: GaussianScore,
    pub malware_score: GaussianScore,
    /// `(delivered packets, probability per 0.01 time units)`.
    pub infection_thresholds: Vec<(f64, f64)>,
    pub initial_infected: usize,
}

impl Default for PacketSimConfig {
    fn default() -> Self {
        Self {
            plant: PlantParams::default(),
            horizon: 50.0,
            interval: 0.5,
            legit_per_pair: 1000.0,
            malware_per_infected: 200.0,
            packet_size: 1000,
            window: 4,
            estimator_substeps: 50,
            gamma_margin: 1.001,
            legit_score: GaussianScore {
                mean: 30.0,
                std: 15.0,
            },
            malware_score: GaussianScore {
                mean: 65.0,
                std: 15.0,
            },
            infection_thresholds: SLOW_THRESHOLDS
                .iter()
                .map(|&(l, p)| (20.0 * l, p))
                .collect(),
            initial_infected: 0,
        }
    }
}

impl PacketSimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, "must be positive"))
            }
        };
        positive("packet.horizon", self.horizon)?;
        positive("packet.interval", self.interval)?;
        if self.horizon < self.interval {
            return Err(Error::invalid(
                "packet.horizon",
                "shorter than one interval",
            ));
        }
        if !(self.legit_per_pair >= 0.0 && self.legit_per_pair.is_finite()) {
            return Err(Error::invalid(
                "packet.legit_per_pair",
                "must be finite and nonnegative",
            ));
        }
        if !(self.malware_per_infected >= 0.0 && self.malware_per_infected.is_finite()) {
            return Err(Error::invalid(
                "packet.malware_per_infected",
                "must be finite and nonnegative",
            ));
        }
        if self.window == 0 {
            return Err(Error::invalid(
                "packet.window",
                "must be at least one interval",
            ));
        }
        if self.estimator_substeps == 0 {
            return Err(Error::invalid(
                "packet.estimator_substeps",
                "must be positive",
            ));
        }
        if !(self.gamma_margin > 1.0 && self.gamma_margin.is_finite()) {
            return Err(Error::invalid(
                "packet.gamma_margin",
                "must be a finite value above 1",
            ));
        }
        if self.initial_infected >= self.plant.nodes {
            return Err(Error::invalid("packet.initial_infected", "no such node"));
        }
        self.attack().validate(self.plant.nodes)
    }

    fn attack(&self) -> AttackSpec {
        AttackSpec {
            kind: AttackKind::A2,
            per_infected_rate: self.malware_per_infected,
            infection_thresholds: self.infection_thresholds.clone(),
            initial_infected: Some(self.initial_infected),
        }
    }
}

/// Per-interval record of a packet-level run. Counts are per interval.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketSimTrace {
    pub scenario: PacketScenario,
    pub mode: FilterMode,
    pub times: Vec<f64>,
    /// Malware passing the filter.
    pub x: Vec<DVector<f64>>,
    pub x_hat: Vec<DVector<f64>>,
    /// Packets filtered.
    pub u: Vec<DVector<f64>>,
    /// Filtering rate requested by the controller.
    pub u_target: Vec<DVector<f64>>,
    /// Packets labeled malware.
    pub y: Vec<DVector<f64>>,
    /// Legitimate packets labeled malware.
    pub m: Vec<DVector<f64>>,
    /// Malware arriving.
    pub w: Vec<DVector<f64>>,
    /// All packets arriving.
    pub total: Vec<DVector<f64>>,
    pub threshold: Vec<Vec<usize>>,
    /// Stacked `[H x; G u]`.
    pub z: Vec<DVector<f64>>,
    pub z_sq: f64,
    pub w_sq: f64,
    pub gamma_star: f64,
    pub infected_at: Vec<Option<f64>>,
}

impl PacketSimTrace {
    pub fn n(&self) -> usize {
        self.x.first().map_or(0, |v| v.len())
    }

    /// `L = ||z|| / ||w||`, with `w` stacking malware arrivals and false positives.
    pub fn cost_ratio(&self) -> Result<f64> {
        ratio(self.z_sq, self.w_sq)
    }

    /// Largest number of packets filtered at one node in one interval.
    pub fn max_filtering(&self) -> f64 {
        self.u
            .iter()
            .flat_map(|u| u.iter().copied())
            .fold(0.0, f64::max)
    }

    /// Time-averaged malware passing the filter, per node.
    pub fn mean_passing(&self) -> DVector<f64> {
        let n = self.n();
        let mut acc = DVector::zeros(n);
        for x in &self.x {
            acc += x;
        }
        acc / self.x.len().max(1) as f64
    }
}

impl crate::trace::TraceView for PacketSimTrace {
    fn node_count(&self) -> usize {
        self.n()
    }

    fn sample_times(&self) -> &[f64] {
        &self.times
    }

    fn channels(&self) -> &'static [&'static str] {
        &["x", "xhat", "u", "y", "wa", "wn", "z", "m", "w"]
    }

    fn value(&self, channel: &str, k: usize, node: usize) -> Option<f64> {
        let n = self.n();
        Some(match channel {
            "x" => self.x[k][node],
            "xhat" => self.x_hat[k][node],
            "u" => self.u[k][node],
            "y" => self.y[k][node],
            "wa" | "w" => self.w[k][node],
            "wn" | "m" => self.m[k][node],
            "z" => self.z[k][node].hypot(self.z[k][n + node]),
            _ => return None,
        })
    }
}

/// A synthesized scenario that can be replayed for many seeds.
#[derive(Debug, Clone)]
pub struct PacketRunner {
    pub scenario: PacketScenario,
    pub mode: FilterMode,
    pub config: PacketSimConfig,
    pub system: SystemMatrices,
    pub model: ScoreModel,
    pub gamma_star: f64,
    policy: ControllerPolicy,
}

impl PacketRunner {
    pub fn new(
        scenario: PacketScenario,
        mode: FilterMode,
        config: &PacketSimConfig,
    ) -> Result<Self> {
        config.validate()?;
        let plant = PlantParams {
            cost_ratio: scenario.cost_ratio(),
            ..config.plant.clone()
        };
        let system = plant.build()?;
        let gamma_star = find_gamma_star(&system, 1e-4)?;
        let policy = match mode {
            FilterMode::Hinf => {
                let gamma = if gamma_star > 0.0 {
                    config.gamma_margin * gamma_star
                } else {
                    f64::INFINITY
                };
                ControllerPolicy::Hinf(synthesize_hinf_at(&system, gamma)?)
            }
            FilterMode::Heuristic => ControllerPolicy::RemoveDetected,
        };
        let legit = ScoreDistribution::discretized_gaussian(
            config.legit_score.mean,
            config.legit_score.std,
        )?;
        let malware = ScoreDistribution::discretized_gaussian(
            config.malware_score.mean,
            config.malware_score.std,
        )?;
        let model = ScoreModel::calibrated(legit, malware, scenario.detection())?;
        Ok(Self {
            scenario,
            mode,
            config: config.clone(),
            system,
            model,
            gamma_star,
            policy,
        })
    }

    /// Level of the filter in the loop (`None` for the heuristic).
    pub fn gamma(&self) -> Option<f64> {
        self.policy.controller().map(|c| c.gamma)
    }

    pub fn run(&self, seed: u64) -> Result<PacketSimTrace> {
        let cfg = &self.config;
        let sys = &self.system;
        let n = sys.n();
        let attack = cfg.attack();
        let intervals = (cfg.horizon / cfg.interval).round() as usize;
        let mut rng = SimRng::new(seed);
        let mut policy = self.policy.clone();
        policy.reset();
        let mut filters = vec![FilterState::new(cfg.window, self.mode); n];
        let mut state = NetworkState::for_attack(n, &attack);
        let legit_draw = poisson(cfg.legit_per_pair)?;

        let mut tr = PacketSimTrace {
            scenario: self.scenario,
            mode: self.mode,
            times: Vec::with_capacity(intervals),
            x: Vec::with_capacity(intervals),
            x_hat: Vec::with_capacity(intervals),
            u: Vec::with_capacity(intervals),
            u_target: Vec::with_capacity(intervals),
            y: Vec::with_capacity(intervals),
            m: Vec::with_capacity(intervals),
            w: Vec::with_capacity(intervals),
            total: Vec::with_capacity(intervals),
            threshold: Vec::with_capacity(intervals),
            z: Vec::with_capacity(intervals),
            z_sq: 0.0,
            w_sq: 0.0,
            gamma_star: self.gamma_star,
            infected_at: state.infected.iter().map(|&i| i.then_some(0.0)).collect(),
        };

        for k in 0..intervals {
            let t = k as f64 * cfg.interval;
            let mut all = vec![[0u64; SCORE_LEVELS]; n];
            let mut bad = vec![[0u64; SCORE_LEVELS]; n];
            let mut y = DVector::zeros(n);
            let mut m = DVector::zeros(n);
            let mut w = DVector::zeros(n);
            for dst in 0..n {
                for src in (0..n).filter(|&s| s != dst) {
                    let legit = match &legit_draw {
                        Some(p) => draw_count(p, &mut rng.noise),
                        None => 0,
                    };
                    let malicious = if state.infected[src] {
                        let mean = attack.per_infected_rate * sys.d[(dst, src)];
                        match poisson(mean)? {
                            Some(p) => draw_count(&p, &mut rng.noise),
                            None => 0,
                        }
                    } else {
                        0
                    };
                    for i in 0..legit + malicious {
                        let pkt = Packet::new(src, dst, cfg.packet_size, i >= legit);
                        let pkt = score_packet(pkt, &self.model, &mut rng.noise);
                        all[dst][pkt.score as usize] += 1;
                        if pkt.is_malware {
                            bad[dst][pkt.score as usize] += 1;
                            w[dst] += 1.0;
                        }
                        if pkt.labeled_malware {
                            y[dst] += 1.0;
                            if !pkt.is_malware {
                                m[dst] += 1.0;
                            }
                        }
                    }
                }
                filters[dst].observe(all[dst]);
            }

            let u_target = policy.output_substepped(&y, cfg.interval, cfg.estimator_substeps)?;
            let mut x = DVector::zeros(n);
            let mut u = DVector::zeros(n);
            let mut thr = vec![SCORE_LEVELS; n];
            for i in 0..n {
                let th = translate_rate_to_threshold(u_target[i], &filters[i]);
                filters[i].dynamic_threshold = th;
                thr[i] = th;
                u[i] = count_at_or_above(&all[i], th) as f64;
                x[i] = (count_below(&bad[i], th)) as f64;
            }

            for i in 0..n {
                state.cum_received[i] += x[i];
            }
            state.x = x.clone();
            state.t = t + cfg.interval;
            let next = update_infections(&state, &attack, &mut rng.infection, cfg.interval);
            for i in 0..n {
                if next.infected[i] && !state.infected[i] {
                    tr.infected_at[i] = Some(next.t);
                }
            }
            state = next;

            let z = sys.controlled_output(&x, &u);
            tr.z_sq += cfg.interval * z.norm_squared();
            tr.w_sq += cfg.interval * (w.norm_squared() + m.norm_squared());

            tr.times.push(t);
            tr.x_hat.push(
                policy
                    .estimate()
                    .cloned()
                    .unwrap_or_else(|| DVector::zeros(n)),
            );
            tr.total.push(DVector::from_fn(n, |i, _| {
                all[i].iter().sum::<u64>() as f64
            }));
            tr.x.push(x);
            tr.u.push(u);
            tr.u_target.push(u_target);
            tr.y.push(y);
            tr.m.push(m);
            tr.w.push(w);
            tr.threshold.push(thr);
            tr.z.push(z);
        }
        Ok(tr)
    }
}

fn count_below(hist: &ScoreHistogram, threshold: usize) -> u64 {
    hist.iter().take(threshold).sum()
}

fn poisson(mean: f64) -> Result<Option<Poisson<f64>>> {
    if mean == 0.0 {
        return Ok(None);
    }
    Poisson::new(mean)
        .map(Some)
        .map_err(|e| Error::invalid("packet.rate", format!("{e}")))
}

fn draw_count<R: Rng + ?Sized>(p: &Poisson<f64>, rng: &mut R) -> u64 {
    p.sample(rng) as u64
}

/// Run one scenario with the default configuration.
pub fn run_packet_scenario(
    scenario: PacketScenario,
    mode: FilterMode,
    seed: u64,
) -> Result<PacketSimTrace> {
    PacketRunner::new(scenario, mode, &PacketSimConfig::default())?.run(seed)
}
