//! Packet-level replay of the filtering loop.
//!
//! A monitor scores every inbound packet in `[0, 99]` and labels it malware
//! above a fixed cutoff; the label counts are the measurement `y`. A dynamic
//! filter drops the highest-scored packets, choosing its score threshold so
//! that the number dropped matches the rate requested by the controller.

mod run;

pub use run::{
    run_packet_scenario, GaussianScore, PacketRunner, PacketScenario, PacketSimConfig,
    PacketSimTrace,
};

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of distinct scores; thresholds range over `0..=SCORE_LEVELS`.
pub const SCORE_LEVELS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub src: usize,
    pub dst: usize,
    pub size: u32,
    pub is_malware: bool,
    pub score: u8,
    pub labeled_malware: bool,
}

impl Packet {
    pub fn new(src: usize, dst: usize, size: u32, is_malware: bool) -> Self {
        Self {
            src,
            dst,
            size,
            is_malware,
            score: 0,
            labeled_malware: false,
        }
    }
}

/// Distribution over the scores `0..100`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreDistribution {
    pmf: Vec<f64>,
    cdf: Vec<f64>,
}

impl ScoreDistribution {
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.len() != SCORE_LEVELS {
            return Err(Error::invalid(
                "score_distribution",
                format!("need {SCORE_LEVELS} weights"),
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid(
                "score_distribution",
                "weights must be finite and nonnegative",
            ));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("score_distribution", "all weights are zero"));
        }
        let pmf: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = pmf
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        cdf[SCORE_LEVELS - 1] = 1.0;
        Ok(Self { pmf, cdf })
    }

    /// Gaussian binned on `[s, s + 1)` and truncated to `[0, 100)`.
    pub fn discretized_gaussian(mean: f64, std: f64) -> Result<Self> {
        if !(std > 0.0 && std.is_finite() && mean.is_finite()) {
            return Err(Error::invalid(
                "score_distribution",
                "need finite mean and positive std",
            ));
        }
        let phi = |v: f64| 0.5 * (1.0 + libm::erf((v - mean) / (std * std::f64::consts::SQRT_2)));
        let w: Vec<f64> = (0..SCORE_LEVELS)
            .map(|s| phi(s as f64 + 1.0) - phi(s as f64))
            .collect();
        Self::from_weights(&w)
    }

    pub fn point_mass(score: u8) -> Result<Self> {
        let mut w = vec![0.0; SCORE_LEVELS];
        *w.get_mut(score as usize)
            .ok_or_else(|| Error::invalid("score", format!("{score} outside [0, 99]")))? = 1.0;
        Self::from_weights(&w)
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// `P(score >= t)`.
    pub fn tail(&self, t: usize) -> f64 {
        self.pmf.iter().skip(t).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u8 {
        let u: f64 = rng.random();
        self.cdf.partition_point(|c| *c <= u).min(SCORE_LEVELS - 1) as u8
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreModel {
    pub legit: ScoreDistribution,
    pub malware: ScoreDistribution,
    /// Packets scoring at or above this are labeled malware.
    pub monitor_threshold: usize,
}

impl ScoreModel {
    /// Labeling cutoff whose detection rate is closest to `detection`.
    pub fn calibrated(
        legit: ScoreDistribution,
        malware: ScoreDistribution,
        detection: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&detection) {
            return Err(Error::invalid("detection", "must lie in [0, 1]"));
        }
        let monitor_threshold = (0..=SCORE_LEVELS)
            .min_by(|&a, &b| {
                let da = (malware.tail(a) - detection).abs();
                let db = (malware.tail(b) - detection).abs();
                da.total_cmp(&db)
            })
            .unwrap();
        Ok(Self {
            legit,
            malware,
            monitor_threshold,
        })
    }

    pub fn detection_rate(&self) -> f64 {
        self.malware.tail(self.monitor_threshold)
    }

    pub fn false_positive_rate(&self) -> f64 {
        self.legit.tail(self.monitor_threshold)
    }
}

pub fn score_packet<R: Rng + ?Sized>(pkt: Packet, model: &ScoreModel, rng: &mut R) -> Packet {
    let dist = if pkt.is_malware {
        &model.malware
    } else {
        &model.legit
    };
    let score = dist.sample(rng);
    Packet {
        score,
        labeled_malware: score as usize >= model.monitor_threshold,
        ..pkt
    }
}

/// Who sets the filtering rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterMode {
    Hinf,
    /// Filter as many packets as the monitor labels.
    Heuristic,
}

impl FilterMode {
    pub fn label(self) -> &'static str {
        match self {
            Self::Hinf => "hinf",
            Self::Heuristic => "heuristic",
        }
    }
}

impl std::fmt::Display for FilterMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for FilterMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hinf" => Ok(Self::Hinf),
            "heuristic" => Ok(Self::Heuristic),
            other => Err(Error::invalid("mode", format!("unknown mode {other:?}"))),
        }
    }
}

pub type ScoreHistogram = [u64; SCORE_LEVELS];

/// Packets in `hist` scoring at or above `threshold`.
pub fn count_at_or_above(hist: &ScoreHistogram, threshold: usize) -> u64 {
    hist.iter().skip(threshold).sum()
}

/// Per-sub-network dynamic filter with a rolling score histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    /// 100 filters nothing, 0 filters everything.
    pub dynamic_threshold: usize,
    window: VecDeque<ScoreHistogram>,
    /// Window length in control intervals.
    pub window_len: usize,
    pub mode: FilterMode,
}

impl FilterState {
    pub fn new(window_len: usize, mode: FilterMode) -> Self {
        Self {
            dynamic_threshold: SCORE_LEVELS,
            window: VecDeque::with_capacity(window_len.max(1)),
            window_len: window_len.max(1),
            mode,
        }
    }

    pub fn observe(&mut self, hist: ScoreHistogram) {
        if self.window.len() == self.window_len {
            self.window.pop_front();
        }
        self.window.push_back(hist);
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    /// Per-interval average of the histograms in the window.
    pub fn average_histogram(&self) -> [f64; SCORE_LEVELS] {
        let mut avg = [0.0; SCORE_LEVELS];
        if self.window.is_empty() {
            return avg;
        }
        for h in &self.window {
            for (a, c) in avg.iter_mut().zip(h) {
                *a += *c as f64;
            }
        }
        let len = self.window.len() as f64;
        avg.iter_mut().for_each(|a| *a /= len);
        avg
    }
}

/// Threshold whose windowed count of scores at or above it does not exceed
/// `u_target`, filtering as much as allowed.
///
/// Among thresholds that filter the same set of observed scores the highest
/// is reported, with the conventions 0 for "everything" and 100 for
/// "nothing". An empty window filters nothing.
pub fn translate_rate_to_threshold(u_target: f64, filter: &FilterState) -> usize {
    if filter.is_empty() {
        return SCORE_LEVELS;
    }
    let avg = filter.average_histogram();
    let mut ge = [0.0; SCORE_LEVELS + 1];
    for t in (0..SCORE_LEVELS).rev() {
        ge[t] = ge[t + 1] + avg[t];
    }
    let t_min = (0..=SCORE_LEVELS)
        .find(|&t| ge[t] <= u_target)
        .unwrap_or(SCORE_LEVELS);
    if t_min == 0 {
        0
    } else if ge[t_min] == 0.0 {
        SCORE_LEVELS
    } else {
        (t_min..SCORE_LEVELS)
            .find(|&t| avg[t] > 0.0)
            .unwrap_or(SCORE_LEVELS)
    }
}
