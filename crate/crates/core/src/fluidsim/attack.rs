use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step length the infection probabilities are quoted for.
pub const INFECTION_REFERENCE_DT: f64 = 0.01;

/// `(delivered malware, probability per reference step)` for slow worms.
pub const SLOW_THRESHOLDS: [(f64, f64); 2] = [(3.0, 0.002), (10.0, 0.02)];
pub const FAST_THRESHOLDS: [(f64, f64); 2] = [(2.0, 0.02), (5.0, 0.2)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AttackKind {
    /// No attack.
    A1,
    /// High traffic, slow spreading.
    A2,
    /// Low traffic, slow spreading.
    A3,
    /// Low traffic, fast spreading.
    A4,
}

impl AttackKind {
    pub const ALL: [AttackKind; 4] = [Self::A1, Self::A2, Self::A3, Self::A4];

    pub fn label(self) -> &'static str {
        match self {
            Self::A1 => "A1",
            Self::A2 => "A2",
            Self::A3 => "A3",
            Self::A4 => "A4",
        }
    }
}

impl std::fmt::Display for AttackKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| Error::invalid("attack", format!("unknown attack {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSpec {
    pub kind: AttackKind,
    /// Emission rate of each infected sub-network.
    pub per_infected_rate: f64,
    /// Ascending `(delivered malware, probability per reference step)`.
    pub infection_thresholds: Vec<(f64, f64)>,
    pub initial_infected: Option<usize>,
}

impl AttackSpec {
    pub fn preset(kind: AttackKind) -> Self {
        let (rate, thresholds): (f64, &[(f64, f64)]) = match kind {
            AttackKind::A1 => (0.0, &[]),
            AttackKind::A2 => (20.0, &SLOW_THRESHOLDS),
            AttackKind::A3 => (5.0, &SLOW_THRESHOLDS),
            AttackKind::A4 => (5.0, &FAST_THRESHOLDS),
        };
        Self {
            kind,
            per_infected_rate: rate,
            infection_thresholds: thresholds.to_vec(),
            initial_infected: (kind != AttackKind::A1).then_some(0),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.per_infected_rate >= 0.0 && self.per_infected_rate.is_finite()) {
            return Err(Error::invalid(
                "attack.per_infected_rate",
                "must be finite and nonnegative",
            ));
        }
        if self.kind == AttackKind::A1
            && (self.per_infected_rate != 0.0 || self.initial_infected.is_some())
        {
            return Err(Error::invalid(
                "attack",
                "A1 carries no traffic and no initial infection",
            ));
        }
        if let Some(i) = self.initial_infected {
            if i >= n {
                return Err(Error::invalid(
                    "attack.initial_infected",
                    format!("node {i} >= {n}"),
                ));
            }
        }
        for (k, &(level, p)) in self.infection_thresholds.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(
                    "attack.infection_thresholds",
                    "probability outside [0, 1]",
                ));
            }
            if !level.is_finite() {
                return Err(Error::invalid(
                    "attack.infection_thresholds",
                    "non-finite level",
                ));
            }
            if k > 0 {
                let (prev_level, prev_p) = self.infection_thresholds[k - 1];
                if level <= prev_level {
                    return Err(Error::invalid(
                        "attack.infection_thresholds",
                        "levels must be strictly increasing",
                    ));
                }
                if p < prev_p {
                    return Err(Error::invalid(
                        "attack.infection_thresholds",
                        "probabilities must not decrease",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Probability of infection over a step of length `dt` after `cum`
    /// delivered malware. The highest threshold strictly exceeded applies.
    pub fn infection_probability(&self, cum: f64, dt: f64) -> f64 {
        let p = self
            .infection_thresholds
            .iter()
            .filter(|(level, _)| cum > *level)
            .map(|(_, p)| *p)
            .next_back()
            .unwrap_or(0.0);
        if p == 0.0 || dt == INFECTION_REFERENCE_DT {
            p
        } else {
            1.0 - (1.0 - p).powf(dt / INFECTION_REFERENCE_DT)
        }
    }
}
