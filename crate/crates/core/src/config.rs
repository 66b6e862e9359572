//! Flat `key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored. Angles take a unit suffix:
//! `deg`, `rad`, or `pi` (a multiple of π); a bare number is radians.
//!
//! ```text
//! # waveplate
//! delta_2h = 1pi
//! delta_2v = 0
//! fractional_detuning = 0.004
//! settings = 0deg:22.5deg, 45deg:67.5deg
//! ```

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use thiserror::Error;

use crate::optics::AnalyzerSetting;
use crate::source::{SourceConstraints, SPEED_OF_LIGHT};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: key `{key}`: {message}")]
    Value {
        line: usize,
        key: String,
        message: String,
    },
}

/// Keys understood by the command-line front end.
pub const KNOWN_KEYS: &[&str] = &[
    "const_sum",
    "delta_2h",
    "delta_2v",
    "pump_frequency",
    "pump_wavelength",
    "theta_1h",
    "theta_1v",
    "omega_1h",
    "omega_1v",
    "fractional_detuning",
    "detector_distance",
    "entangled_source",
    "seed",
    "events",
    "partitions",
    "mode",
    "delta_min",
    "delta_max",
    "points",
    "theta1",
    "chsh_a",
    "chsh_a_prime",
    "chsh_b",
    "chsh_b_prime",
    "settings",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, (String, usize)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    message: "empty key".into(),
                });
            }
            if !KNOWN_KEYS.contains(&key) {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("unknown key `{key}`"),
                });
            }
            if value.is_empty() {
                return Err(ConfigError::Value {
                    line,
                    key: key.into(),
                    message: "missing value".into(),
                });
            }
            if let Some((_, first)) = entries.insert(key.to_string(), (value.to_string(), line)) {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("duplicate key `{key}` (first set on line {first})"),
                });
            }
        }
        Ok(ConfigFile { entries })
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    fn value_error(&self, key: &str, message: String) -> ConfigError {
        ConfigError::Value {
            line: self.entries.get(key).map_or(0, |(_, l)| *l),
            key: key.into(),
            message,
        }
    }

    fn get_with<T>(&self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => parse(v).map(Some).map_err(|m| self.value_error(key, m)),
        }
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.get_with(key, parse_f64)
    }

    pub fn get_angle(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.get_with(key, parse_angle)
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        self.get_with(key, |v| v.parse::<u64>().map_err(|e| format!("`{v}`: {e}")))
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        self.get_with(key, |v| match v {
            "true" | "yes" | "on" | "1" => Ok(true),
            "false" | "no" | "off" | "0" => Ok(false),
            other => Err(format!("expected a boolean, found `{other}`")),
        })
    }

    /// `settings = θ1:θ2, θ1:θ2, ...`
    pub fn get_settings(&self, key: &str) -> Result<Option<Vec<AnalyzerSetting>>, ConfigError> {
        self.get_with(key, |v| v.split(',').map(parse_setting).collect())
    }

    /// Source constraints, starting from the defaults and overriding every key
    /// present. `fractional_detuning` sets ω₁H, ω₁V = ω_p/2 · (1 ± d) unless
    /// they are given explicitly.
    pub fn source_constraints(&self) -> Result<SourceConstraints, ConfigError> {
        let mut c = SourceConstraints::default();
        if let Some(v) = self.get_f64("pump_wavelength")? {
            if v <= 0.0 {
                return Err(self.value_error("pump_wavelength", "must be positive".into()));
            }
            c.pump_frequency = TAU * SPEED_OF_LIGHT / v;
        }
        if let Some(v) = self.get_f64("pump_frequency")? {
            c.pump_frequency = v;
        }
        let detuning = self.get_f64("fractional_detuning")?.unwrap_or(0.0);
        c = c.with_fractional_detuning(detuning);
        if let Some(v) = self.get_f64("omega_1h")? {
            c.beam1_frequencies.0 = v;
        }
        if let Some(v) = self.get_f64("omega_1v")? {
            c.beam1_frequencies.1 = v;
        }
        if let Some(v) = self.get_angle("const_sum")? {
            c.const_sum = v;
        }
        if let Some(v) = self.get_angle("delta_2h")? {
            c.delta_2h = v;
        }
        if let Some(v) = self.get_angle("delta_2v")? {
            c.delta_2v = v;
        }
        if let Some(v) = self.get_angle("theta_1h")? {
            c.beam1_phases.0 = v;
        }
        if let Some(v) = self.get_angle("theta_1v")? {
            c.beam1_phases.1 = v;
        }
        if let Some(v) = self.get_f64("detector_distance")? {
            c.detector_distance = v;
        }
        if let Some(v) = self.get_bool("entangled_source")? {
            c.entangled_source = v;
        }
        Ok(c)
    }

    /// `key=value` lines in key order.
    pub fn canonical(&self) -> String {
        self.entries
            .iter()
            .map(|(k, (v, _))| format!("{k}={v}\n"))
            .collect()
    }
}

fn parse_f64(v: &str) -> Result<f64, String> {
    let x: f64 = v.parse().map_err(|e| format!("`{v}`: {e}"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("`{v}` is not finite"))
    }
}

/// Parses `<number>[deg|rad|pi]` into radians.
pub fn parse_angle(v: &str) -> Result<f64, String> {
    let v = v.trim();
    let (number, scale) = if let Some(n) = v.strip_suffix("deg") {
        (n, PI / 180.0)
    } else if let Some(n) = v.strip_suffix("rad") {
        (n, 1.0)
    } else if let Some(n) = v.strip_suffix("pi") {
        let n = n.trim().trim_end_matches('*');
        (if n.is_empty() { "1" } else { n }, PI)
    } else {
        (v, 1.0)
    };
    let n = parse_f64(number.trim())?;
    if scale == PI / 180.0 {
        Ok(n.to_radians())
    } else {
        Ok(n * scale)
    }
}

fn parse_setting(v: &str) -> Result<AnalyzerSetting, String> {
    let (a, b) = v
        .split_once(':')
        .ok_or_else(|| format!("setting `{}` must be `theta1:theta2`", v.trim()))?;
    AnalyzerSetting::new(parse_angle(a)?, parse_angle(b)?).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::validate_constraints;

    #[test]
    fn angle_units() {
        assert!((parse_angle("90deg").unwrap() - PI / 2.0).abs() < 1e-15);
        assert_eq!(parse_angle("0.25rad").unwrap(), 0.25);
        assert_eq!(parse_angle("0.25").unwrap(), 0.25);
        assert_eq!(parse_angle("pi").unwrap(), PI);
        assert_eq!(parse_angle("0.5pi").unwrap(), 0.5 * PI);
        assert!(parse_angle("ninety").is_err());
        assert!(parse_angle("nan").is_err());
    }

    #[test]
    fn parse_and_override() {
        let cfg = ConfigFile::parse(
            "# comment\n\ndelta_2h = 180deg  # waveplate\ndelta_2v = 0\nfractional_detuning = 0.004\n",
        )
        .unwrap();
        let c = cfg.source_constraints().unwrap();
        assert!((c.delta_2h - PI).abs() < 1e-15);
        assert!((c.fractional_detuning() - 0.004).abs() < 1e-12);
        assert!(validate_constraints(&c).unwrap().passed());
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(
            ConfigFile::parse("seed = 1\nthis is wrong\n").unwrap_err(),
            ConfigError::Syntax {
                line: 2,
                message: "expected `key = value`, found `this is wrong`".into()
            }
        );
        assert!(matches!(
            ConfigFile::parse("seed = 1\n\nbogus = 2").unwrap_err(),
            ConfigError::Syntax { line: 3, .. }
        ));
        assert!(matches!(
            ConfigFile::parse("seed = 1\nseed = 2").unwrap_err(),
            ConfigError::Syntax { line: 2, .. }
        ));
        let cfg = ConfigFile::parse("\ndelta_2h = abc").unwrap();
        assert!(matches!(cfg.source_constraints().unwrap_err(), ConfigError::Value { line: 2, .. }));
    }

    #[test]
    fn settings_list() {
        let cfg = ConfigFile::parse("settings = 0deg:22.5deg, 45deg:67.5deg").unwrap();
        let s = cfg.get_settings("settings").unwrap().unwrap();
        assert_eq!(s.len(), 2);
        assert!((s[1].theta2() - 67.5f64.to_radians()).abs() < 1e-15);
        let bad = ConfigFile::parse("settings = 0deg").unwrap();
        assert!(bad.get_settings("settings").is_err());
    }
}
