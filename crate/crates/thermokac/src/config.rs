//! Simulation configuration and the flat `key=value` config-file format.
//!
//! Every field of [`SimConfig`] maps to one documented key. Unknown keys are
//! a hard error so that typos cannot silently fall back to defaults.

use crate::error::{Result, SimError};
use std::fmt;
use std::str::FromStr;

/// Initial velocity distribution. All three families have finite sixth
/// moment by construction; arbitrary densities are rejected rather than
/// trusted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialDistribution {
    Gaussian { mean: f64, variance: f64 },
    Uniform { lo: f64, hi: f64 },
    TwoPoint { a: f64, b: f64, prob_a: f64 },
}

impl InitialDistribution {
    /// Distribution-level mean of a single coordinate.
    pub fn mean(&self) -> f64 {
        match *self {
            InitialDistribution::Gaussian { mean, .. } => mean,
            InitialDistribution::Uniform { lo, hi } => 0.5 * (lo + hi),
            InitialDistribution::TwoPoint { a, b, prob_a } => prob_a * a + (1.0 - prob_a) * b,
        }
    }

    /// Distribution-level second moment of a single coordinate.
    pub fn second_moment(&self) -> f64 {
        match *self {
            InitialDistribution::Gaussian { mean, variance } => mean * mean + variance,
            InitialDistribution::Uniform { lo, hi } => (lo * lo + lo * hi + hi * hi) / 3.0,
            InitialDistribution::TwoPoint { a, b, prob_a } => {
                prob_a * a * a + (1.0 - prob_a) * b * b
            }
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        match *self {
            InitialDistribution::Gaussian { mean, variance } => {
                if !mean.is_finite() || !variance.is_finite() || variance < 0.0 {
                    return Err("gaussian needs finite mean and variance >= 0".into());
                }
            }
            InitialDistribution::Uniform { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() || lo > hi {
                    return Err("uniform needs finite lo <= hi".into());
                }
            }
            InitialDistribution::TwoPoint { a, b, prob_a } => {
                if !a.is_finite() || !b.is_finite() {
                    return Err("two_point needs finite a and b".into());
                }
                if !(0.0..=1.0).contains(&prob_a) {
                    return Err("two_point needs prob_a in [0, 1]".into());
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for InitialDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            InitialDistribution::Gaussian { mean, variance } => {
                write!(f, "gaussian:{mean}:{variance}")
            }
            InitialDistribution::Uniform { lo, hi } => write!(f, "uniform:{lo}:{hi}"),
            InitialDistribution::TwoPoint { a, b, prob_a } => {
                write!(f, "two_point:{a}:{b}:{prob_a}")
            }
        }
    }
}

impl FromStr for InitialDistribution {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| -> std::result::Result<f64, String> {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{p}` is not a number"))
        };
        let dist = match parts.as_slice() {
            ["gaussian", m, v] => InitialDistribution::Gaussian {
                mean: num(m)?,
                variance: num(v)?,
            },
            ["uniform", lo, hi] => InitialDistribution::Uniform {
                lo: num(lo)?,
                hi: num(hi)?,
            },
            ["two_point", a, b, p] => InitialDistribution::TwoPoint {
                a: num(a)?,
                b: num(b)?,
                prob_a: num(p)?,
            },
            _ => {
                return Err(format!(
                    "`{s}` is not one of gaussian:MEAN:VAR, uniform:LO:HI, two_point:A:B:PROB_A"
                ))
            }
        };
        dist.validate()?;
        Ok(dist)
    }
}

/// How the quenched current is seeded at t = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuenchedInit {
    /// Per replica, from the realized initial state: J(V0) and U(V0).
    #[default]
    Empirical,
    /// From the distribution-level mean and second moment (rescaled when the
    /// initial state is projected to the energy sphere).
    Distributional,
}

impl fmt::Display for QuenchedInit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuenchedInit::Empirical => write!(f, "empirical"),
            QuenchedInit::Distributional => write!(f, "distributional"),
        }
    }
}

/// Full simulation configuration. One replica ensemble is entirely
/// determined by these fields; see the config-file keys of the same names.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Number of particles N (>= 2).
    pub n_particles: usize,
    /// Field strength E >= 0.
    pub field_strength: f64,
    /// Time horizon T > 0.
    pub t_final: f64,
    /// Strictly increasing observation times within [0, t_final].
    pub sample_times: Vec<f64>,
    pub initial_distribution: InitialDistribution,
    /// `None` means "decide by process": the interacting process starts on
    /// the energy sphere, the quenched one does not.
    pub project_to_sphere: Option<bool>,
    /// Independent replicas R (>= 1).
    pub replicas: u32,
    pub master_seed: u64,
    pub quenched_init: QuenchedInit,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_particles: 64,
            field_strength: 1.0,
            t_final: 1.0,
            sample_times: vec![0.25, 0.5, 0.75, 1.0],
            initial_distribution: InitialDistribution::Gaussian {
                mean: 0.0,
                variance: 1.0,
            },
            project_to_sphere: None,
            replicas: 8,
            master_seed: 0x5EED,
            quenched_init: QuenchedInit::Empirical,
        }
    }
}

impl SimConfig {
    /// Check all invariants, reporting the offending key on failure.
    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(SimError::config("n_particles", "must be >= 2"));
        }
        if !self.field_strength.is_finite() || self.field_strength < 0.0 {
            return Err(SimError::config("field_strength", "must be finite and >= 0"));
        }
        if !self.t_final.is_finite() || self.t_final <= 0.0 {
            return Err(SimError::config("t_final", "must be finite and > 0"));
        }
        if self.sample_times.is_empty() {
            return Err(SimError::config("sample_times", "must list at least one time"));
        }
        let mut prev = f64::NEG_INFINITY;
        for &t in &self.sample_times {
            if !t.is_finite() || t < 0.0 || t > self.t_final {
                return Err(SimError::config(
                    "sample_times",
                    format!("time {t} is outside [0, {}]", self.t_final),
                ));
            }
            if t <= prev {
                return Err(SimError::config("sample_times", "must be strictly increasing"));
            }
            prev = t;
        }
        self.initial_distribution
            .validate()
            .map_err(|m| SimError::config("initial_distribution", m))?;
        if self.replicas == 0 {
            return Err(SimError::config("replicas", "must be >= 1"));
        }
        Ok(())
    }

    /// Resolve the projection flag for a run that does (`true`) or does not
    /// (`false`) involve the interacting process.
    pub fn projection_for(&self, involves_interacting: bool) -> bool {
        self.project_to_sphere.unwrap_or(involves_interacting)
    }

    /// Apply one `key=value` override. Unknown keys are a hard error.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let bad = |msg: String| SimError::config(key, msg);
        match key {
            "n_particles" => {
                self.n_particles = value
                    .parse()
                    .map_err(|_| bad(format!("`{value}` is not a positive integer")))?;
            }
            "field_strength" => {
                self.field_strength = value
                    .parse()
                    .map_err(|_| bad(format!("`{value}` is not a number")))?;
            }
            "t_final" => {
                self.t_final = value
                    .parse()
                    .map_err(|_| bad(format!("`{value}` is not a number")))?;
            }
            "sample_times" => {
                let mut times = Vec::new();
                for piece in value.split(',') {
                    let t = piece
                        .trim()
                        .parse::<f64>()
                        .map_err(|_| bad(format!("`{piece}` is not a number")))?;
                    times.push(t);
                }
                self.sample_times = times;
            }
            "initial_distribution" => {
                self.initial_distribution = value.parse().map_err(bad)?;
            }
            "project_to_sphere" => {
                self.project_to_sphere = match value {
                    "true" => Some(true),
                    "false" => Some(false),
                    "auto" => None,
                    _ => return Err(bad(format!("`{value}` is not true/false/auto"))),
                };
            }
            "replicas" => {
                self.replicas = value
                    .parse()
                    .map_err(|_| bad(format!("`{value}` is not a positive integer")))?;
            }
            "master_seed" => {
                self.master_seed = value
                    .parse()
                    .map_err(|_| bad(format!("`{value}` is not a 64-bit unsigned integer")))?;
            }
            "quenched_init" => {
                self.quenched_init = match value {
                    "empirical" => QuenchedInit::Empirical,
                    "distributional" => QuenchedInit::Distributional,
                    _ => return Err(bad(format!("`{value}` is not empirical/distributional"))),
                };
            }
            _ => {
                return Err(SimError::config(key, "unknown key"));
            }
        }
        Ok(())
    }

    /// Parse a flat config file. Lines are `key=value`; blank lines and lines
    /// starting with `#` are ignored. Duplicate keys are rejected.
    pub fn parse_str(text: &str) -> Result<SimConfig> {
        let mut config = SimConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                SimError::Parse(format!("line {}: expected key=value, got `{line}`", line_no + 1))
            })?;
            let key = key.trim();
            if seen.iter().any(|k| k == key) {
                return Err(SimError::config(key, "duplicate key"));
            }
            seen.push(key.to_string());
            config.apply_override(key, value)?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Canonical `(key, value)` listing, used for manifests and for echoing
    /// the effective configuration. Key order is fixed.
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        let times = self
            .sample_times
            .iter()
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
            .join(",");
        vec![
            ("n_particles".into(), self.n_particles.to_string()),
            ("field_strength".into(), self.field_strength.to_string()),
            ("t_final".into(), self.t_final.to_string()),
            ("sample_times".into(), times),
            (
                "initial_distribution".into(),
                self.initial_distribution.to_string(),
            ),
            (
                "project_to_sphere".into(),
                match self.project_to_sphere {
                    Some(b) => b.to_string(),
                    None => "auto".into(),
                },
            ),
            ("replicas".into(), self.replicas.to_string()),
            ("master_seed".into(), self.master_seed.to_string()),
            ("quenched_init".into(), self.quenched_init.to_string()),
        ]
    }
}
