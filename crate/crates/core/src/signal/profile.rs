//! Calibration profile: the thresholds and speeds that define the
//! kinaesthetic map, plus its `key=value` text form.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("line {line}: expected key=value")]
    Syntax { line: usize },
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("key `{key}`: cannot parse `{value}`")]
    BadValue { key: String, value: String },
    #[error("invalid profile: {0}")]
    Invalid(String),
}

/// Thresholds are in sensor units (milli-g, ADC counts) and are compared
/// against filtered values. Crossing is strict: a value equal to a
/// threshold does not trigger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationProfile {
    pub tilt_pos_x: f64,
    pub tilt_neg_x: f64,
    pub tilt_pos_y: f64,
    pub tilt_neg_y: f64,
    pub stretch_press: f64,
    pub stretch_release: f64,
    /// Below this level the cord drives −Z in arm mode.
    pub stretch_press_down: f64,
    /// Pixels per second.
    pub speed_xy: f64,
    /// Meters per second.
    pub speed_z: f64,
    pub filter_min_cutoff: f64,
    pub filter_beta: f64,
    pub debounce_ms: u32,
    /// Keys this build does not know about, kept in file order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra: Vec<(String, String)>,
}

impl Default for CalibrationProfile {
    fn default() -> Self {
        Self {
            tilt_pos_x: 300.0,
            tilt_neg_x: -300.0,
            tilt_pos_y: 300.0,
            tilt_neg_y: -300.0,
            stretch_press: 600.0,
            stretch_release: 450.0,
            stretch_press_down: 150.0,
            speed_xy: 500.0,
            speed_z: 0.1,
            filter_min_cutoff: 1.0,
            filter_beta: 0.01,
            debounce_ms: 50,
            extra: Vec::new(),
        }
    }
}

const KEYS: [&str; 12] = [
    "tilt_pos_x",
    "tilt_neg_x",
    "tilt_pos_y",
    "tilt_neg_y",
    "stretch_press",
    "stretch_release",
    "stretch_press_down",
    "speed_xy",
    "speed_z",
    "filter_min_cutoff",
    "filter_beta",
    "debounce_ms",
];

impl CalibrationProfile {
    pub fn validate(&self) -> Result<(), ProfileError> {
        let floats = [
            ("tilt_pos_x", self.tilt_pos_x),
            ("tilt_neg_x", self.tilt_neg_x),
            ("tilt_pos_y", self.tilt_pos_y),
            ("tilt_neg_y", self.tilt_neg_y),
            ("stretch_press", self.stretch_press),
            ("stretch_release", self.stretch_release),
            ("stretch_press_down", self.stretch_press_down),
            ("speed_xy", self.speed_xy),
            ("speed_z", self.speed_z),
            ("filter_min_cutoff", self.filter_min_cutoff),
            ("filter_beta", self.filter_beta),
        ];
        if let Some((k, _)) = floats.iter().find(|(_, v)| !v.is_finite()) {
            return Err(ProfileError::Invalid(format!("{k} is not finite")));
        }
        let checks = [
            (
                self.tilt_neg_x < self.tilt_pos_x,
                "tilt_neg_x must be below tilt_pos_x",
            ),
            (
                self.tilt_neg_y < self.tilt_pos_y,
                "tilt_neg_y must be below tilt_pos_y",
            ),
            (
                self.stretch_release < self.stretch_press,
                "stretch_release must be below stretch_press",
            ),
            (
                self.stretch_press_down < self.stretch_release,
                "stretch_press_down must be below stretch_release",
            ),
            (self.speed_xy > 0.0, "speed_xy must be positive"),
            (self.speed_z > 0.0, "speed_z must be positive"),
            (
                self.filter_min_cutoff > 0.0,
                "filter_min_cutoff must be positive",
            ),
            (self.filter_beta >= 0.0, "filter_beta must be non-negative"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, why)) => Err(ProfileError::Invalid(why.to_string())),
            None => Ok(()),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# chinpoint calibration profile\n");
        let _ = write!(out, "{self}");
        out
    }

    pub fn from_text(text: &str) -> Result<Self, ProfileError> {
        let mut known: [Option<String>; KEYS.len()] = Default::default();
        let mut extra: Vec<(String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or(ProfileError::Syntax { line: i + 1 })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(ProfileError::Syntax { line: i + 1 });
            }
            match KEYS.iter().position(|&known_key| known_key == k) {
                Some(idx) if known[idx].is_some() => {
                    return Err(ProfileError::DuplicateKey(k.to_string()))
                }
                Some(idx) => known[idx] = Some(v.to_string()),
                None if extra.iter().any(|(ek, _)| ek == k) => {
                    return Err(ProfileError::DuplicateKey(k.to_string()))
                }
                None => extra.push((k.to_string(), v.to_string())),
            }
        }

        let get = |idx: usize| -> Result<&str, ProfileError> {
            known[idx]
                .as_deref()
                .ok_or(ProfileError::MissingKey(KEYS[idx]))
        };
        let float = |idx: usize| -> Result<f64, ProfileError> {
            let v = get(idx)?;
            v.parse().map_err(|_| ProfileError::BadValue {
                key: KEYS[idx].to_string(),
                value: v.to_string(),
            })
        };
        let debounce = get(11)?;
        let profile = Self {
            tilt_pos_x: float(0)?,
            tilt_neg_x: float(1)?,
            tilt_pos_y: float(2)?,
            tilt_neg_y: float(3)?,
            stretch_press: float(4)?,
            stretch_release: float(5)?,
            stretch_press_down: float(6)?,
            speed_xy: float(7)?,
            speed_z: float(8)?,
            filter_min_cutoff: float(9)?,
            filter_beta: float(10)?,
            debounce_ms: debounce.parse().map_err(|_| ProfileError::BadValue {
                key: KEYS[11].to_string(),
                value: debounce.to_string(),
            })?,
            extra,
        };
        profile.validate()?;
        Ok(profile)
    }

    /// Merges `patch` over a copy of `self` and validates the result.
    pub fn merged(&self, patch: &ProfilePatch) -> Result<Self, ProfileError> {
        let mut p = self.clone();
        macro_rules! apply {
            ($($f:ident),*) => { $( if let Some(v) = patch.$f { p.$f = v; } )* };
        }
        apply!(
            tilt_pos_x,
            tilt_neg_x,
            tilt_pos_y,
            tilt_neg_y,
            stretch_press,
            stretch_release,
            stretch_press_down,
            speed_xy,
            speed_z,
            filter_min_cutoff,
            filter_beta,
            debounce_ms
        );
        p.validate()?;
        Ok(p)
    }
}

impl fmt::Display for CalibrationProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "tilt_pos_x={}", self.tilt_pos_x)?;
        writeln!(f, "tilt_neg_x={}", self.tilt_neg_x)?;
        writeln!(f, "tilt_pos_y={}", self.tilt_pos_y)?;
        writeln!(f, "tilt_neg_y={}", self.tilt_neg_y)?;
        writeln!(f, "stretch_press={}", self.stretch_press)?;
        writeln!(f, "stretch_release={}", self.stretch_release)?;
        writeln!(f, "stretch_press_down={}", self.stretch_press_down)?;
        writeln!(f, "speed_xy={}", self.speed_xy)?;
        writeln!(f, "speed_z={}", self.speed_z)?;
        writeln!(f, "filter_min_cutoff={}", self.filter_min_cutoff)?;
        writeln!(f, "filter_beta={}", self.filter_beta)?;
        writeln!(f, "debounce_ms={}", self.debounce_ms)?;
        for (k, v) in &self.extra {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// Partial update sent during live calibration. Absent fields keep their
/// current value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfilePatch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilt_pos_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilt_neg_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilt_pos_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilt_neg_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stretch_press: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stretch_release: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stretch_press_down: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_xy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_z: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_min_cutoff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub debounce_ms: Option<u32>,
}

impl ProfilePatch {
    /// Parses `key=value` assignments (as given on a command line).
    pub fn from_assignments<'a>(
        items: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self, ProfileError> {
        let mut patch = Self::default();
        for item in items {
            let (k, v) = item
                .split_once('=')
                .ok_or(ProfileError::Syntax { line: 0 })?;
            let (k, v) = (k.trim(), v.trim());
            let bad = || ProfileError::BadValue {
                key: k.to_string(),
                value: v.to_string(),
            };
            let f = || v.parse::<f64>().map_err(|_| bad());
            match k {
                "tilt_pos_x" => patch.tilt_pos_x = Some(f()?),
                "tilt_neg_x" => patch.tilt_neg_x = Some(f()?),
                "tilt_pos_y" => patch.tilt_pos_y = Some(f()?),
                "tilt_neg_y" => patch.tilt_neg_y = Some(f()?),
                "stretch_press" => patch.stretch_press = Some(f()?),
                "stretch_release" => patch.stretch_release = Some(f()?),
                "stretch_press_down" => patch.stretch_press_down = Some(f()?),
                "speed_xy" => patch.speed_xy = Some(f()?),
                "speed_z" => patch.speed_z = Some(f()?),
                "filter_min_cutoff" => patch.filter_min_cutoff = Some(f()?),
                "filter_beta" => patch.filter_beta = Some(f()?),
                "debounce_ms" => patch.debounce_ms = Some(v.parse().map_err(|_| bad())?),
                _ => return Err(bad()),
            }
        }
        Ok(patch)
    }
}
