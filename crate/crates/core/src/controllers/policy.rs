use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::hinf::{synthesize_decentralized, synthesize_hinf, synthesize_lqg, HinfController};
use crate::error::{Error, Result};
use crate::riccati::SystemMatrices;

pub const DEFAULT_TRIGGER_LEVEL: f64 = 5.0;
pub const DEFAULT_FIXED_RATE: f64 = 10.0;

/// Response types, named as in the comparison tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ResponseKind {
    /// No response.
    R1,
    /// Centralized H-infinity filter.
    R2,
    /// Decentralized scalar H-infinity filters.
    R2d,
    /// Fixed-rate filtering once the measurement crosses a trigger level.
    R3,
    /// Remove everything the monitor labels as malware.
    R4,
    /// LQG filter.
    R5,
}

impl ResponseKind {
    pub const TABLE: [ResponseKind; 5] = [Self::R1, Self::R2, Self::R3, Self::R4, Self::R5];

    pub fn label(self) -> &'static str {
        match self {
            Self::R1 => "R1",
            Self::R2 => "R2",
            Self::R2d => "R2d",
            Self::R3 => "R3",
            Self::R4 => "R4",
            Self::R5 => "R5",
        }
    }

    pub fn needs_synthesis(self) -> bool {
        matches!(self, Self::R2 | Self::R2d | Self::R5)
    }
}

impl fmt::Display for ResponseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ResponseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "R1" => Self::R1,
            "R2" => Self::R2,
            "R2d" => Self::R2d,
            "R3" => Self::R3,
            "R4" => Self::R4,
            "R5" => Self::R5,
            other => {
                return Err(Error::invalid(
                    "response",
                    format!("unknown response {other:?}"),
                ))
            }
        })
    }
}

/// A response policy together with whatever state it carries.
#[derive(Debug, Clone, PartialEq)]
pub enum ControllerPolicy {
    NoResponse,
    Hinf(HinfController),
    HinfDecentralized(HinfController),
    Threshold { trigger_level: f64, fixed_rate: f64 },
    RemoveDetected,
    Lqg(HinfController),
}

impl ControllerPolicy {
    /// Build a policy for `sys`, synthesizing filters where needed.
    pub fn build(kind: ResponseKind, sys: &SystemMatrices, gamma_margin: f64) -> Result<Self> {
        Ok(match kind {
            ResponseKind::R1 => Self::NoResponse,
            ResponseKind::R2 => Self::Hinf(synthesize_hinf(sys, gamma_margin)?),
            ResponseKind::R2d => {
                Self::HinfDecentralized(synthesize_decentralized(sys, gamma_margin)?)
            }
            ResponseKind::R3 => Self::Threshold {
                trigger_level: DEFAULT_TRIGGER_LEVEL,
                fixed_rate: DEFAULT_FIXED_RATE,
            },
            ResponseKind::R4 => Self::RemoveDetected,
            ResponseKind::R5 => Self::Lqg(synthesize_lqg(sys)?),
        })
    }

    pub fn kind(&self) -> ResponseKind {
        match self {
            Self::NoResponse => ResponseKind::R1,
            Self::Hinf(_) => ResponseKind::R2,
            Self::HinfDecentralized(_) => ResponseKind::R2d,
            Self::Threshold { .. } => ResponseKind::R3,
            Self::RemoveDetected => ResponseKind::R4,
            Self::Lqg(_) => ResponseKind::R5,
        }
    }

    pub fn controller(&self) -> Option<&HinfController> {
        match self {
            Self::Hinf(c) | Self::HinfDecentralized(c) | Self::Lqg(c) => Some(c),
            _ => None,
        }
    }

    fn controller_mut(&mut self) -> Option<&mut HinfController> {
        match self {
            Self::Hinf(c) | Self::HinfDecentralized(c) | Self::Lqg(c) => Some(c),
            _ => None,
        }
    }

    /// Current state estimate, for policies that keep one.
    pub fn estimate(&self) -> Option<&DVector<f64>> {
        self.controller().map(|c| &c.x_hat)
    }

    pub fn reset(&mut self) {
        if let Some(c) = self.controller_mut() {
            c.reset();
        }
    }

    /// Filtering rate for measurement `y` over a step of length `dt`.
    pub fn output(&mut self, y: &DVector<f64>, dt: f64) -> Result<DVector<f64>> {
        self.output_substepped(y, dt, 1)
    }

    /// As [`Self::output`], integrating any estimator with `substeps` RK4
    /// steps of `dt / substeps`.
    pub fn output_substepped(
        &mut self,
        y: &DVector<f64>,
        dt: f64,
        substeps: usize,
    ) -> Result<DVector<f64>> {
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("y", "non-finite measurement"));
        }
        let u = match self {
            Self::NoResponse => DVector::zeros(y.len()),
            Self::Threshold {
                trigger_level,
                fixed_rate,
            } => y.map(|v| {
                if v >= *trigger_level {
                    *fixed_rate
                } else {
                    0.0
                }
            }),
            Self::RemoveDetected => y.clone(),
            Self::Hinf(c) | Self::HinfDecentralized(c) | Self::Lqg(c) => {
                let h = dt / substeps.max(1) as f64;
                for _ in 0..substeps.max(1) {
                    c.step_estimator(y, h)?;
                }
                c.control()
            }
        };
        // filters cannot inject packets
        Ok(u.map(|v| v.max(0.0)))
    }
}

pub fn policy_output(
    policy: &mut ControllerPolicy,
    y: &DVector<f64>,
    dt: f64,
) -> Result<DVector<f64>> {
    policy.output(y, dt)
}
