//! Run configuration: presets, a flat `key = value` file format, validation.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use dicke_sim::presets::{self, manifold_params, Preset};
use dicke_sim::{IntegratorConfig, PerManifold, SpinManifoldParams, TermFlags};
use serde::{Serialize, Serializer};

use crate::error::ConfigError;

pub const MAX_CENTERS: u32 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelChoice {
    A,
    B,
    Both,
    Custom(TermFlags),
}

impl ModelChoice {
    /// Flags traced in the `modelA` columns, if any.
    pub fn primary(self) -> Option<TermFlags> {
        match self {
            ModelChoice::A | ModelChoice::Both => Some(TermFlags::MODEL_A),
            ModelChoice::B => None,
            ModelChoice::Custom(f) => Some(f),
        }
    }
}

impl fmt::Display for ModelChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelChoice::A => f.write_str("a"),
            ModelChoice::B => f.write_str("b"),
            ModelChoice::Both => f.write_str("both"),
            ModelChoice::Custom(flags) => write!(f, "custom:{}", flags.code()),
        }
    }
}

impl FromStr for ModelChoice {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "a" => Ok(ModelChoice::A),
            "b" => Ok(ModelChoice::B),
            "both" => Ok(ModelChoice::Both),
            _ => {
                let code = lower.strip_prefix("custom:").ok_or_else(|| ConfigError::InvalidValue {
                    key: "model".into(),
                    value: s.into(),
                    reason: "expected a, b, both or custom:<9 flags>".into(),
                })?;
                if code.len() != 9 {
                    return Err(ConfigError::InvalidValue {
                        key: "model".into(),
                        value: s.into(),
                        reason: "custom model needs exactly nine a/b flags, one per term A..I".into(),
                    });
                }
                code.parse::<TermFlags>()
                    .map(ModelChoice::Custom)
                    .map_err(|e| ConfigError::InvalidValue {
                        key: "model".into(),
                        value: s.into(),
                        reason: e.to_string(),
                    })
            }
        }
    }
}

impl Serialize for ModelChoice {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Everything a run depends on. Rates are in units of 2π MHz.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub model: ModelChoice,
    pub n_centers: u32,
    pub p_sigma0: f64,
    pub gamma_2pi_mhz: f64,
    pub gamma_d_sigma0_2pi_mhz: f64,
    pub gamma_d_sigma1_2pi_mhz: f64,
    pub gamma_isc_sigma0_2pi_mhz: f64,
    pub gamma_isc_sigma1_2pi_mhz: f64,
    pub t_max_ns: f64,
    pub samples: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub out_dir: PathBuf,
    pub svg: bool,
}

pub const KEYS: [&str; 14] = [
    "model",
    "n_centers",
    "p_sigma0",
    "gamma_2pi_mhz",
    "gamma_d_sigma0_2pi_mhz",
    "gamma_d_sigma1_2pi_mhz",
    "gamma_isc_sigma0_2pi_mhz",
    "gamma_isc_sigma1_2pi_mhz",
    "t_max_ns",
    "samples",
    "rel_tol",
    "abs_tol",
    "out_dir",
    "svg",
];

pub fn preset(name: &str) -> Result<RunConfig, ConfigError> {
    presets::by_name(name)
        .map(RunConfig::from_preset)
        .ok_or_else(|| ConfigError::UnknownPreset(name.to_string()))
}

impl RunConfig {
    pub fn from_preset(p: Preset) -> Self {
        RunConfig {
            model: ModelChoice::Both,
            n_centers: p.n_emitters,
            p_sigma0: p.p_sigma0,
            gamma_2pi_mhz: p.gamma,
            gamma_d_sigma0_2pi_mhz: p.gamma_d.sigma0,
            gamma_d_sigma1_2pi_mhz: p.gamma_d.sigma1,
            gamma_isc_sigma0_2pi_mhz: p.gamma_isc.sigma0,
            gamma_isc_sigma1_2pi_mhz: p.gamma_isc.sigma1,
            t_max_ns: 100.0,
            samples: 2000,
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            out_dir: PathBuf::from("out"),
            svg: false,
        }
    }

    /// Parses the flat format: one `key = value` per line, `#` comments.
    /// Every key must appear exactly once.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values: [Option<(usize, String)>; KEYS.len()] = Default::default();
        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: line_no })?;
            let key = key.trim();
            let slot = KEYS
                .iter()
                .position(|&k| k == key)
                .ok_or_else(|| ConfigError::UnknownKey {
                    key: key.into(),
                    line: line_no,
                })?;
            if let Some((first, _)) = &values[slot] {
                return Err(ConfigError::DuplicateKey {
                    key: key.into(),
                    first: *first,
                    line: line_no,
                });
            }
            values[slot] = Some((line_no, value.trim().to_string()));
        }
        if let Some(k) = values.iter().position(Option::is_none) {
            return Err(ConfigError::MissingKey(KEYS[k]));
        }
        let get = |key: &str| -> &str {
            let k = KEYS.iter().position(|&x| x == key).unwrap();
            &values[k].as_ref().unwrap().1
        };

        Ok(RunConfig {
            model: get("model").parse()?,
            n_centers: number(get, "n_centers")?,
            p_sigma0: number(get, "p_sigma0")?,
            gamma_2pi_mhz: number(get, "gamma_2pi_mhz")?,
            gamma_d_sigma0_2pi_mhz: number(get, "gamma_d_sigma0_2pi_mhz")?,
            gamma_d_sigma1_2pi_mhz: number(get, "gamma_d_sigma1_2pi_mhz")?,
            gamma_isc_sigma0_2pi_mhz: number(get, "gamma_isc_sigma0_2pi_mhz")?,
            gamma_isc_sigma1_2pi_mhz: number(get, "gamma_isc_sigma1_2pi_mhz")?,
            t_max_ns: number(get, "t_max_ns")?,
            samples: number(get, "samples")?,
            rel_tol: number(get, "rel_tol")?,
            abs_tol: number(get, "abs_tol")?,
            out_dir: match get("out_dir") {
                "" => return Err(invalid("out_dir", "", "must not be empty")),
                s => PathBuf::from(s),
            },
            svg: number(get, "svg")?,
        })
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&self.value_of(key));
            out.push('\n');
        }
        out
    }

    fn value_of(&self, key: &str) -> String {
        match key {
            "model" => self.model.to_string(),
            "n_centers" => self.n_centers.to_string(),
            "p_sigma0" => self.p_sigma0.to_string(),
            "gamma_2pi_mhz" => self.gamma_2pi_mhz.to_string(),
            "gamma_d_sigma0_2pi_mhz" => self.gamma_d_sigma0_2pi_mhz.to_string(),
            "gamma_d_sigma1_2pi_mhz" => self.gamma_d_sigma1_2pi_mhz.to_string(),
            "gamma_isc_sigma0_2pi_mhz" => self.gamma_isc_sigma0_2pi_mhz.to_string(),
            "gamma_isc_sigma1_2pi_mhz" => self.gamma_isc_sigma1_2pi_mhz.to_string(),
            "t_max_ns" => self.t_max_ns.to_string(),
            "samples" => self.samples.to_string(),
            "rel_tol" => self.rel_tol.to_string(),
            "abs_tol" => self.abs_tol.to_string(),
            "out_dir" => self.out_dir.display().to_string(),
            "svg" => self.svg.to_string(),
            _ => unreachable!("unknown key {key}"),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(1..=MAX_CENTERS).contains(&self.n_centers) {
            return Err(invalid(
                "n_centers",
                &self.n_centers.to_string(),
                &format!("must lie in 1..={MAX_CENTERS}"),
            ));
        }
        if !(0.0..=1.0).contains(&self.p_sigma0) {
            return Err(invalid("p_sigma0", &self.p_sigma0.to_string(), "must lie in [0, 1]"));
        }
        for (key, v) in [
            ("gamma_2pi_mhz", self.gamma_2pi_mhz),
            ("gamma_d_sigma0_2pi_mhz", self.gamma_d_sigma0_2pi_mhz),
            ("gamma_d_sigma1_2pi_mhz", self.gamma_d_sigma1_2pi_mhz),
            ("gamma_isc_sigma0_2pi_mhz", self.gamma_isc_sigma0_2pi_mhz),
            ("gamma_isc_sigma1_2pi_mhz", self.gamma_isc_sigma1_2pi_mhz),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(key, &v.to_string(), "rates must be finite and non-negative"));
            }
        }
        if !(self.t_max_ns.is_finite() && self.t_max_ns > 0.0) {
            return Err(invalid("t_max_ns", &self.t_max_ns.to_string(), "must be positive"));
        }
        if self.samples < 2 {
            return Err(invalid("samples", &self.samples.to_string(), "need at least 2"));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(invalid("rel_tol", &self.rel_tol.to_string(), "must lie in (0, 1)"));
        }
        if !(self.abs_tol.is_finite() && self.abs_tol > 0.0) {
            return Err(invalid("abs_tol", &self.abs_tol.to_string(), "must be positive"));
        }
        Ok(())
    }

    /// Rates in ns⁻¹ for both manifolds.
    pub fn to_params(&self) -> Result<PerManifold<SpinManifoldParams>, ConfigError> {
        self.validate()?;
        manifold_params(
            self.p_sigma0,
            self.gamma_2pi_mhz,
            PerManifold::new(self.gamma_d_sigma0_2pi_mhz, self.gamma_d_sigma1_2pi_mhz),
            PerManifold::new(self.gamma_isc_sigma0_2pi_mhz, self.gamma_isc_sigma1_2pi_mhz),
        )
        .map_err(|e| ConfigError::Rates(e.to_string()))
    }

    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig::new(self.t_max_ns, self.samples).with_tolerances(self.rel_tol, self.abs_tol)
    }
}

fn invalid(key: &str, value: &str, reason: &str) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.into(),
        value: value.into(),
        reason: reason.into(),
    }
}

fn number<'a, T: FromStr>(get: impl Fn(&str) -> &'a str, key: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    let raw = get(key);
    raw.parse().map_err(|e: T::Err| invalid(key, raw, &e.to_string()))
}
