//! Resolved experiment configuration.
//!
//! Every command has a fixed key set with defaults. A `key = value` file
//! may override them, command-line flags override the file, and the
//! resolved map is written next to the outputs so a run can be repeated
//! from it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use delay_blowup::integrator::IntegratorOptions;
use delay_blowup::model::PhiTilde;

use crate::error::CliError;

const GLOBAL_KEYS: &[(&str, &str)] = &[
    ("out_dir", "out"),
    ("rel_tol", "1e-9"),
    ("abs_tol", "1e-12"),
    ("h_min", "1e-12"),
    ("r_max", "1e8"),
    ("horizon", "100"),
    ("max_steps", "10000000"),
    ("workers", "0"),
    ("format", "csv,svg,json"),
];

const SIMULATE_KEYS: &[(&str, &str)] = &[
    ("tau", "1"),
    ("delta", "5"),
    ("phi_tilde", "linear"),
    ("form", "polar"),
    ("r0", "0.1"),
    ("theta0", "0"),
    ("closed_form_tol", "1e-8"),
    ("orbit_clip", "5"),
];

const FIGURE_KEYS: &[(&str, &str)] = &[
    ("name", ""),
    ("phi_tilde", "linear"),
    ("orbit_clip", "5"),
    ("monotone_above", "10"),
    ("diagram_tau_min", "0.01"),
    ("diagram_tau_max", "8"),
    ("diagram_n_max", "5"),
    ("diagram_samples", "400"),
    ("diagram_omega_clip", "20"),
    ("threshold_lo", "13"),
    ("threshold_hi", "14.5"),
    ("threshold_width", "0.01"),
    ("probes_per_round", "3"),
];

const VERIFY_KEYS: &[(&str, &str)] = &[
    ("delta", "100"),
    ("tau", "1"),
    ("phi_tilde", "linear"),
];

const PERIODIC_KEYS: &[(&str, &str)] = &[
    ("tau", "1"),
    ("n_max", "3"),
    ("seed_run", "false"),
    ("seed_periods", "5"),
    ("drift_tol", "1e-6"),
    ("residual_tol", "1e-10"),
];

const THRESHOLD_KEYS: &[(&str, &str)] = &[
    ("tau", "0.2"),
    ("lo", "2"),
    ("hi", "3"),
    ("width", "0.01"),
    ("phi_tilde", "linear"),
    ("probes_per_round", "3"),
];

pub const COMMANDS: &[&str] = &["simulate", "figure", "verify-theorem1", "periodic", "threshold"];

fn command_keys(command: &str) -> Option<&'static [(&'static str, &'static str)]> {
    Some(match command {
        "simulate" => SIMULATE_KEYS,
        "figure" => FIGURE_KEYS,
        "verify-theorem1" => VERIFY_KEYS,
        "periodic" => PERIODIC_KEYS,
        "threshold" => THRESHOLD_KEYS,
        _ => return None,
    })
}

fn normalize_key(k: &str) -> String {
    k.trim().replace('-', "_")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    command: String,
    values: BTreeMap<String, String>,
}

impl Config {
    /// Defaults for `command`.
    pub fn defaults(command: &str) -> Result<Self, CliError> {
        let keys = command_keys(command)
            .ok_or_else(|| CliError::Usage(format!("unknown command '{command}'")))?;
        let values = GLOBAL_KEYS
            .iter()
            .chain(keys)
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Ok(Self {
            command: command.into(),
            values,
        })
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), CliError> {
        let key = normalize_key(key);
        if key == "command" {
            let v = value.into();
            if v.trim() != self.command {
                return Err(CliError::Usage(format!(
                    "config is for command '{}', not '{}'",
                    v.trim(),
                    self.command
                )));
            }
            return Ok(());
        }
        match self.values.get_mut(&key) {
            Some(slot) => {
                *slot = value.into().trim().to_string();
                Ok(())
            }
            None => Err(CliError::Usage(format!(
                "unknown config key '{key}' for command '{}'",
                self.command
            ))),
        }
    }

    /// Applies `key = value` lines. `#` starts a comment.
    pub fn merge_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("{origin}:{}: expected key = value", i + 1))
            })?;
            self.set(k, v)
                .map_err(|e| CliError::Usage(format!("{origin}:{}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        self.merge_text(&text, &path.display().to_string())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("key '{key}' not defined for '{}'", self.command))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|_| CliError::Usage(format!("invalid value '{raw}' for '{key}'")))
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        let v: f64 = self.get(key)?;
        if v.is_nan() {
            return Err(CliError::Usage(format!("'{key}' must be a number")));
        }
        Ok(v)
    }

    pub fn positive(&self, key: &str) -> Result<f64, CliError> {
        let v = self.f64(key)?;
        if !(v > 0.0) {
            return Err(CliError::Usage(format!("'{key}' must be > 0, got {v}")));
        }
        Ok(v)
    }

    pub fn bool(&self, key: &str) -> Result<bool, CliError> {
        match self.raw(key) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(CliError::Usage(format!("invalid boolean '{other}' for '{key}'"))),
        }
    }

    pub fn phi_tilde(&self) -> Result<PhiTilde, CliError> {
        let name = self.raw("phi_tilde");
        PhiTilde::preset(name)
            .ok_or_else(|| CliError::Usage(format!("unknown phi_tilde preset '{name}'")))
    }

    pub fn integrator_options(&self) -> Result<IntegratorOptions, CliError> {
        let opts = IntegratorOptions {
            rel_tol: self.positive("rel_tol")?,
            abs_tol: self.positive("abs_tol")?,
            h_min: self.positive("h_min")?,
            r_max: self.positive("r_max")?,
            t_horizon: self.positive("horizon")?,
            max_steps: self.get("max_steps")?,
            ..IntegratorOptions::default()
        };
        opts.validate()?;
        Ok(opts)
    }

    pub fn workers(&self) -> Result<usize, CliError> {
        self.get("workers")
    }

    pub fn formats(&self) -> Result<Formats, CliError> {
        let mut f = Formats::default();
        for part in self.raw("format").split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match part {
                "csv" => f.csv = true,
                "svg" => f.svg = true,
                "json" => f.json = true,
                other => {
                    return Err(CliError::Usage(format!(
                        "unknown format '{other}' (expected csv, svg, json)"
                    )))
                }
            }
        }
        Ok(f)
    }

    /// `key = value` text that reproduces this configuration.
    pub fn to_text(&self) -> String {
        let mut s = format!("command = {}\n", self.command);
        for (k, v) in &self.values {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut m = serde_json::Map::new();
        m.insert("command".into(), self.command.clone().into());
        for (k, v) in &self.values {
            m.insert(k.clone(), v.clone().into());
        }
        serde_json::Value::Object(m)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Formats {
    pub csv: bool,
    pub svg: bool,
    pub json: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_text() {
        for cmd in COMMANDS {
            let c = Config::defaults(cmd).unwrap();
            let mut d = Config::defaults(cmd).unwrap();
            d.merge_text(&c.to_text(), "test").unwrap();
            assert_eq!(c, d);
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let mut c = Config::defaults("simulate").unwrap();
        assert!(matches!(c.merge_text("bogus = 1", "f"), Err(CliError::Usage(_))));
        assert!(matches!(c.set("n_max", "3"), Err(CliError::Usage(_))));
        assert!(c.set("rel-tol", "1e-10").is_ok());
        assert_eq!(c.raw("rel_tol"), "1e-10");
    }

    #[test]
    fn command_key_must_match() {
        let mut c = Config::defaults("periodic").unwrap();
        assert!(c.merge_text("command = periodic\n# note\n\ntau = 2 # trailing", "f").is_ok());
        assert_eq!(c.f64("tau").unwrap(), 2.0);
        assert!(c.merge_text("command = simulate", "f").is_err());
    }

    #[test]
    fn typed_getters_validate() {
        let mut c = Config::defaults("threshold").unwrap();
        c.set("width", "-1").unwrap();
        assert!(c.positive("width").is_err());
        c.set("format", "csv,png").unwrap();
        assert!(c.formats().is_err());
        c.set("format", "json").unwrap();
        assert_eq!(
            c.formats().unwrap(),
            Formats {
                csv: false,
                svg: false,
                json: true
            }
        );
        assert!(c.integrator_options().is_ok());
        c.set("rel_tol", "0").unwrap();
        assert!(c.integrator_options().is_err());
    }
}
