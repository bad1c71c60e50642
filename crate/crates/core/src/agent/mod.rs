//! Synthetic operators with known ground truth.
//!
//! [`PointingAgent`] and [`ArmAgent`] emit task inputs directly.
//! [`SensorPointingAgent`] produces raw sensor frames, so its sessions also
//! run through the wire format and the signal chain.

mod arm;
mod pointing;
mod scatter;
mod sensor;

use std::f64::consts::{E, PI};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use arm::{ArmAgent, ArmAgentParams};
pub use pointing::PointingAgent;
pub use scatter::{RadialLadder, LADDER_BLOCK};
pub use sensor::SensorPointingAgent;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("invalid agent parameter: {0}")]
    Invalid(String),
    #[error("cannot parse agent parameters `{0}`")]
    Parse(String),
}

/// Which difficulty the sampled selection time follows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeModel {
    /// a + b·log2(D/W + 1).
    Nominal,
    /// a + b·log2(D/(√(2πe)·σ_w) + 1), with σ_w = sigma_ratio·W the
    /// endpoint spread the agent actually produces.
    #[default]
    Effective,
}

/// Rare long stalls whose chance grows with difficulty, producing the
/// heavy right tail seen in real sessions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StallModel {
    /// Stall probability per squared bit of nominal ID, capped at 1.
    pub rate_per_bit2: f64,
    /// Mean of the exponential stall duration, s.
    pub mean_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    /// Intercept, s.
    pub a_true: f64,
    /// Slope, s/bit.
    pub b_true: f64,
    /// SD of the endpoint-to-center distance as a fraction of target width.
    pub endpoint_sigma_ratio: f64,
    /// Probability that a trial contains one click outside the target.
    pub misclick_rate: f64,
    /// Time a misclick adds to the trial, s.
    pub misclick_penalty_s: f64,
    /// SD of multiplicative time noise.
    pub time_noise: f64,
    pub time_model: TimeModel,
    pub stall: Option<StallModel>,
    pub seed: u64,
}

impl Default for AgentParams {
    fn default() -> Self {
        Self {
            a_true: 0.5,
            b_true: 2.0,
            endpoint_sigma_ratio: 0.12,
            misclick_rate: 0.0,
            misclick_penalty_s: 1.0,
            time_noise: 0.05,
            time_model: TimeModel::Effective,
            stall: None,
            seed: 0,
        }
    }
}

/// Shortest trial the tape layout can express, s.
pub const MIN_TRIAL_S: f64 = 0.6;

impl AgentParams {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::Invalid(m.into()));
        if !(self.b_true > 0.0) {
            return bad("b must be positive");
        }
        if !self.a_true.is_finite() {
            return bad("a must be finite");
        }
        if !(self.endpoint_sigma_ratio >= 0.0) {
            return bad("sigma must be non-negative");
        }
        if self.endpoint_sigma_ratio == 0.0 && self.time_model == TimeModel::Effective {
            return bad("the effective time model needs sigma > 0");
        }
        if !(0.0..1.0).contains(&self.misclick_rate) {
            return bad("misclick rate must be in [0, 1)");
        }
        if !(self.misclick_penalty_s >= 0.0) || !(self.time_noise >= 0.0) {
            return bad("penalty and time noise must be non-negative");
        }
        if let Some(s) = self.stall {
            if !(s.rate_per_bit2 >= 0.0) || !(s.mean_s > 0.0) {
                return bad("stall rate must be >= 0 and mean > 0");
            }
        }
        Ok(())
    }

    /// Expected selection time for a reach of `distance` to a target of
    /// `width`, before noise, stalls and misclick penalties.
    pub fn mean_time(&self, distance: f64, width: f64) -> f64 {
        let id = match self.time_model {
            TimeModel::Nominal => (distance / width + 1.0).log2(),
            TimeModel::Effective => {
                let spread = (2.0 * PI * E).sqrt() * self.endpoint_sigma_ratio * width;
                (distance / spread + 1.0).log2()
            }
        };
        self.a_true + self.b_true * id
    }
}

impl FromStr for AgentParams {
    type Err = AgentError;

    /// `a=0.5,b=2.0,sigma=0.12,seed=7`, plus optional `misclick`,
    /// `penalty`, `noise`, `model=nominal|effective`, `stall=RATE:MEAN`.
    /// Unnamed keys keep their defaults.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = AgentParams::default();
        for part in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| AgentError::Parse(part.into()))?;
            let num = || {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| AgentError::Parse(part.into()))
            };
            match k.trim() {
                "a" => p.a_true = num()?,
                "b" => p.b_true = num()?,
                "sigma" => p.endpoint_sigma_ratio = num()?,
                "misclick" => p.misclick_rate = num()?,
                "penalty" => p.misclick_penalty_s = num()?,
                "noise" => p.time_noise = num()?,
                "seed" => {
                    p.seed = v
                        .trim()
                        .parse()
                        .map_err(|_| AgentError::Parse(part.into()))?
                }
                "model" => {
                    p.time_model = match v.trim() {
                        "nominal" => TimeModel::Nominal,
                        "effective" => TimeModel::Effective,
                        _ => return Err(AgentError::Parse(part.into())),
                    }
                }
                "stall" => {
                    let (r, m) = v
                        .split_once(':')
                        .ok_or_else(|| AgentError::Parse(part.into()))?;
                    let f = |x: &str| {
                        x.trim()
                            .parse::<f64>()
                            .map_err(|_| AgentError::Parse(part.into()))
                    };
                    p.stall = Some(StallModel {
                        rate_per_bit2: f(r)?,
                        mean_s: f(m)?,
                    });
                }
                _ => return Err(AgentError::Parse(part.into())),
            }
        }
        p.validate()?;
        Ok(p)
    }
}
