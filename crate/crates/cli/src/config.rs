//! Scenario configuration files (TOML).
//!
//! Every field except `simulator` has a default. `attack` and `response`
//! take a single value or a list; for the packet simulator they name packet
//! scenarios (`S1`..`S5`) and filter modes (`hinf`, `heuristic`).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use filterlab_core::controllers::{ResponseKind, DEFAULT_FIXED_RATE, DEFAULT_TRIGGER_LEVEL};
use filterlab_core::fluidsim::{AttackKind, AttackSpec, NoiseSpec};
use filterlab_core::packetsim::{FilterMode, GaussianScore, PacketScenario, PacketSimConfig};
use filterlab_core::riccati::{PlantParams, SystemMatrices};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Simulator {
    Fluid,
    Packet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<String> {
        match self {
            Self::One(s) => vec![s],
            Self::Many(v) => v,
        }
    }
}

/// Network shape and physics. Node ids are one-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantSection {
    pub nodes: usize,
    pub group_size: usize,
    pub a: f64,
    pub c: f64,
    pub noise_intensity: f64,
    pub group_bias: f64,
    /// `(node id, factor)` multipliers on the state cost.
    pub valuable_nodes: Vec<(usize, f64)>,
}

impl Default for PlantSection {
    fn default() -> Self {
        let p = PlantParams::default();
        Self {
            nodes: p.nodes,
            group_size: p.group_size,
            a: p.a,
            c: p.c,
            noise_intensity: p.noise_intensity,
            group_bias: p.group_bias,
            valuable_nodes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub mean: f64,
    pub std: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let n = NoiseSpec::default();
        Self {
            mean: n.mean,
            std: n.std,
        }
    }
}

/// Replaces parts of an attack preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackOverride {
    pub per_infected_rate: Option<f64>,
    pub infection_thresholds: Option<Vec<(f64, f64)>>,
    /// One-based node id.
    pub initial_infected: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSection {
    pub trigger_level: f64,
    pub fixed_rate: f64,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        Self {
            trigger_level: DEFAULT_TRIGGER_LEVEL,
            fixed_rate: DEFAULT_FIXED_RATE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PacketSection {
    pub interval: f64,
    pub legit_per_pair: f64,
    pub malware_per_infected: f64,
    pub packet_size: u32,
    pub window: usize,
    pub estimator_substeps: usize,
    pub legit_score: GaussianScore,
    pub malware_score: GaussianScore,
    pub infection_thresholds: Vec<(f64, f64)>,
    /// One-based node id.
    pub initial_infected: usize,
}

impl Default for PacketSection {
    fn default() -> Self {
        let p = PacketSimConfig::default();
        Self {
            interval: p.interval,
            legit_per_pair: p.legit_per_pair,
            malware_per_infected: p.malware_per_infected,
            packet_size: p.packet_size,
            window: p.window,
            estimator_substeps: p.estimator_substeps,
            legit_score: p.legit_score,
            malware_score: p.malware_score,
            infection_thresholds: p.infection_thresholds,
            initial_infected: p.initial_infected + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Write one trace CSV per run.
    pub traces: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            traces: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FigureSection {
    /// One-based node ids plotted in each panel.
    pub nodes: Vec<usize>,
}

impl Default for FigureSection {
    fn default() -> Self {
        Self { nodes: vec![1, 2] }
    }
}

/// On-disk layout; every field optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    simulator: Option<Simulator>,
    attack: Option<OneOrMany>,
    response: Option<OneOrMany>,
    cost_ratio: Option<f64>,
    f_l: Option<f64>,
    f_a: Option<f64>,
    b: Option<f64>,
    gamma_margin: Option<f64>,
    seeds: Option<Vec<u64>>,
    horizon: Option<f64>,
    dt: Option<f64>,
    workers: Option<usize>,
    plant: Option<PlantSection>,
    noise: Option<NoiseSection>,
    threshold: Option<ThresholdSection>,
    attack_overrides: Option<BTreeMap<AttackKind, AttackOverride>>,
    packet: Option<PacketSection>,
    output: Option<OutputSection>,
    figures: Option<FigureSection>,
}

/// The grid axes of a batch.
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    Fluid {
        attacks: Vec<AttackKind>,
        responses: Vec<ResponseKind>,
    },
    Packet {
        scenarios: Vec<PacketScenario>,
        modes: Vec<FilterMode>,
    },
}

impl Grid {
    pub fn simulator(&self) -> Simulator {
        match self {
            Self::Fluid { .. } => Simulator::Fluid,
            Self::Packet { .. } => Simulator::Packet,
        }
    }

    pub fn cell_count(&self) -> usize {
        match self {
            Self::Fluid { attacks, responses } => attacks.len() * responses.len(),
            Self::Packet { scenarios, modes } => scenarios.len() * modes.len(),
        }
    }
}

/// Validated, fully defaulted configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub grid: Grid,
    /// Squared state-to-filtering weight ratio (fluid runs; packet
    /// scenarios carry their own).
    pub cost_ratio: f64,
    /// Cost of filtering a legitimate packet.
    pub f_l: f64,
    /// Cost of the filtering action itself.
    pub f_a: f64,
    /// Proportion of filtered packets that are malware.
    pub b: f64,
    pub gamma_margin: f64,
    pub seeds: Vec<u64>,
    pub horizon: f64,
    pub dt: f64,
    /// Parallel workers; 0 picks the number of cores.
    pub workers: usize,
    pub plant: PlantSection,
    pub noise: NoiseSection,
    pub threshold: ThresholdSection,
    pub attack_overrides: BTreeMap<AttackKind, AttackOverride>,
    pub packet: PacketSection,
    pub output: OutputSection,
    pub figures: FigureSection,
}

fn invalid(field: &str, reason: impl Into<String>) -> CliError {
    CliError::Core(filterlab_core::Error::Validation {
        field: field.to_string(),
        reason: reason.into(),
    })
}

fn parse_all<T: std::str::FromStr<Err = filterlab_core::Error>>(
    field: &str,
    values: Vec<String>,
) -> Result<Vec<T>, CliError> {
    if values.is_empty() {
        return Err(invalid(field, "needs at least one value"));
    }
    values
        .iter()
        .map(|v| {
            v.parse::<T>()
                .map_err(|_| invalid(field, format!("unknown value {v:?}")))
        })
        .collect()
}

impl ScenarioConfig {
    /// Control weight `g = f_l (1 - b) + f_a`.
    pub fn control_weight(&self) -> f64 {
        self.f_l * (1.0 - self.b) + self.f_a
    }

    pub fn simulator(&self) -> Simulator {
        self.grid.simulator()
    }

    pub fn plant_params(&self) -> PlantParams {
        PlantParams {
            nodes: self.plant.nodes,
            group_size: self.plant.group_size,
            a: self.plant.a,
            b: self.b,
            c: self.plant.c,
            noise_intensity: self.plant.noise_intensity,
            group_bias: self.plant.group_bias,
            g: self.control_weight(),
            cost_ratio: self.cost_ratio,
            h_scale: self
                .plant
                .valuable_nodes
                .iter()
                .map(|&(id, f)| (id.wrapping_sub(1), f))
                .collect(),
        }
    }

    pub fn system(&self) -> Result<SystemMatrices, CliError> {
        Ok(self.plant_params().build()?)
    }

    pub fn noise_spec(&self, seed: u64) -> NoiseSpec {
        NoiseSpec {
            mean: self.noise.mean,
            std: self.noise.std,
            seed,
        }
    }

    pub fn attack_spec(&self, kind: AttackKind) -> AttackSpec {
        let mut spec = AttackSpec::preset(kind);
        if let Some(o) = self.attack_overrides.get(&kind) {
            if let Some(r) = o.per_infected_rate {
                spec.per_infected_rate = r;
            }
            if let Some(t) = &o.infection_thresholds {
                spec.infection_thresholds = t.clone();
            }
            if let Some(id) = o.initial_infected {
                spec.initial_infected = Some(id.wrapping_sub(1));
            }
        }
        spec
    }

    pub fn packet_config(&self) -> PacketSimConfig {
        PacketSimConfig {
            plant: self.plant_params(),
            horizon: self.horizon,
            interval: self.packet.interval,
            legit_per_pair: self.packet.legit_per_pair,
            malware_per_infected: self.packet.malware_per_infected,
            packet_size: self.packet.packet_size,
            window: self.packet.window,
            estimator_substeps: self.packet.estimator_substeps,
            gamma_margin: self.gamma_margin,
            legit_score: self.packet.legit_score,
            malware_score: self.packet.malware_score,
            infection_thresholds: self.packet.infection_thresholds.clone(),
            initial_infected: self.packet.initial_infected.wrapping_sub(1),
        }
    }

    fn from_raw(raw: RawConfig) -> Result<Self, CliError> {
        let simulator = raw
            .simulator
            .ok_or_else(|| invalid("simulator", "missing; expected \"fluid\" or \"packet\""))?;
        let attack = raw.attack.map(OneOrMany::into_vec);
        let response = raw.response.map(OneOrMany::into_vec);
        let grid = match simulator {
            Simulator::Fluid => Grid::Fluid {
                attacks: match attack {
                    Some(v) => parse_all("attack", v)?,
                    None => AttackKind::ALL.to_vec(),
                },
                responses: match response {
                    Some(v) => parse_all("response", v)?,
                    None => ResponseKind::TABLE.to_vec(),
                },
            },
            Simulator::Packet => Grid::Packet {
                scenarios: match attack {
                    Some(v) => parse_all("attack", v)?,
                    None => PacketScenario::ALL.to_vec(),
                },
                modes: match response {
                    Some(v) => parse_all("response", v)?,
                    None => vec![FilterMode::Hinf, FilterMode::Heuristic],
                },
            },
        };
        let default_margin = match simulator {
            Simulator::Fluid => filterlab_core::controllers::DEFAULT_GAMMA_MARGIN,
            Simulator::Packet => PacketSimConfig::default().gamma_margin,
        };
        let cfg = Self {
            grid,
            cost_ratio: raw.cost_ratio.unwrap_or(100.0),
            f_l: raw.f_l.unwrap_or(1.8),
            f_a: raw.f_a.unwrap_or(0.1),
            b: raw.b.unwrap_or(0.5),
            gamma_margin: raw.gamma_margin.unwrap_or(default_margin),
            seeds: raw.seeds.unwrap_or_else(|| vec![0]),
            horizon: raw.horizon.unwrap_or(50.0),
            dt: raw.dt.unwrap_or(0.01),
            workers: raw.workers.unwrap_or(0),
            plant: raw.plant.unwrap_or_default(),
            noise: raw.noise.unwrap_or_default(),
            threshold: raw.threshold.unwrap_or_default(),
            attack_overrides: raw.attack_overrides.unwrap_or_default(),
            packet: raw.packet.unwrap_or_default(),
            output: raw.output.unwrap_or_default(),
            figures: raw.figures.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn to_raw(&self) -> RawConfig {
        let (simulator, attack, response) = match &self.grid {
            Grid::Fluid { attacks, responses } => (
                Simulator::Fluid,
                attacks.iter().map(|a| a.label().to_string()).collect(),
                responses.iter().map(|r| r.label().to_string()).collect(),
            ),
            Grid::Packet { scenarios, modes } => (
                Simulator::Packet,
                scenarios.iter().map(|s| s.label().to_string()).collect(),
                modes.iter().map(|m| m.label().to_string()).collect(),
            ),
        };
        RawConfig {
            simulator: Some(simulator),
            attack: Some(OneOrMany::Many(attack)),
            response: Some(OneOrMany::Many(response)),
            cost_ratio: Some(self.cost_ratio),
            f_l: Some(self.f_l),
            f_a: Some(self.f_a),
            b: Some(self.b),
            gamma_margin: Some(self.gamma_margin),
            seeds: Some(self.seeds.clone()),
            horizon: Some(self.horizon),
            dt: Some(self.dt),
            workers: Some(self.workers),
            plant: Some(self.plant.clone()),
            noise: Some(self.noise.clone()),
            threshold: Some(self.threshold.clone()),
            attack_overrides: Some(self.attack_overrides.clone()),
            packet: Some(self.packet.clone()),
            output: Some(self.output.clone()),
            figures: Some(self.figures.clone()),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let finite_nonneg = |field: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(field, "must be finite and nonnegative"))
            }
        };
        finite_nonneg("f_l", self.f_l)?;
        finite_nonneg("f_a", self.f_a)?;
        if !(self.b > 0.0 && self.b <= 1.0) {
            return Err(invalid(
                "b",
                format!(
                    "{} outside (0, 1]; b = 0 removes the filtering channel",
                    self.b
                ),
            ));
        }
        if !(self.control_weight() > 0.0) {
            return Err(invalid(
                "f_a",
                "control weight f_l (1 - b) + f_a must be positive",
            ));
        }
        if !(self.cost_ratio > 0.0 && self.cost_ratio.is_finite()) {
            return Err(invalid("cost_ratio", "must be positive"));
        }
        if !(self.gamma_margin > 1.0 && self.gamma_margin.is_finite()) {
            return Err(invalid("gamma_margin", "must be a finite value above 1"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", "must be positive"));
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return Err(invalid("horizon", "must cover at least one step"));
        }
        if self.grid.cell_count() == 0 {
            return Err(invalid("attack", "empty grid"));
        }
        NoiseSpec {
            mean: self.noise.mean,
            std: self.noise.std,
            seed: 0,
        }
        .validate()?;
        let n = self.plant.nodes;
        for &(id, _) in &self.plant.valuable_nodes {
            if id == 0 || id > n {
                return Err(invalid(
                    "plant.valuable_nodes",
                    format!("node id {id} outside 1..={n}"),
                ));
            }
        }
        for &id in &self.figures.nodes {
            if id == 0 || id > n {
                return Err(invalid(
                    "figures.nodes",
                    format!("node id {id} outside 1..={n}"),
                ));
            }
        }
        if !(self.threshold.trigger_level.is_finite() && self.threshold.fixed_rate >= 0.0) {
            return Err(invalid(
                "threshold",
                "needs a finite trigger and nonnegative rate",
            ));
        }
        for (kind, o) in &self.attack_overrides {
            if o.initial_infected.is_some_and(|id| id == 0 || id > n) {
                return Err(invalid(
                    "attack_overrides.initial_infected",
                    "node id out of range",
                ));
            }
            self.attack_spec(*kind).validate(n)?;
        }
        if self.packet.initial_infected == 0 || self.packet.initial_infected > n {
            return Err(invalid("packet.initial_infected", "node id out of range"));
        }
        self.plant_params().build()?;
        if self.simulator() == Simulator::Packet {
            self.packet_config().validate()?;
        }
        Ok(())
    }
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    ScenarioConfig::from_raw(raw)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Core(filterlab_core::Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        )))
    })?;
    parse_config(&text)
}

pub fn config_to_string(cfg: &ScenarioConfig) -> Result<String, CliError> {
    toml::to_string(&cfg.to_raw()).map_err(|e| CliError::Parse(e.to_string()))
}

pub fn write_config(cfg: &ScenarioConfig, path: &Path) -> Result<(), CliError> {
    let text = config_to_string(cfg)?;
    std::fs::write(path, text).map_err(filterlab_core::Error::from)?;
    Ok(())
}
