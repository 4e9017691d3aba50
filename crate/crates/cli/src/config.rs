//! Flat `key = value` run configuration. Command-line flags are applied on top
//! of the file, so a flag always wins over the same key in the file.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

/// Problem with the configuration or its values. Maps to exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationError(pub String);

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ValidationError {}

impl From<qmeasure::Error> for ValidationError {
    fn from(e: qmeasure::Error) -> Self {
        ValidationError(e.to_string())
    }
}

pub type Validated<T> = std::result::Result<T, ValidationError>;

fn invalid<T>(msg: impl Into<String>) -> Validated<T> {
    Err(ValidationError(msg.into()))
}

/// Keys understood by at least one command.
pub const KNOWN_KEYS: &[&str] = &[
    "L",
    "m",
    "J",
    "a",
    "b",
    "c_supp",
    "d",
    "potential.points",
    "packet.points",
    "grid.points",
    "grid.dt",
    "grid.x_min",
    "grid.x_max",
    "t_max",
    "tol.ideal",
    "tol.eta",
    "tol.stat",
    "tol.check",
    "sweep.L_min",
    "sweep.L_max",
    "sweep.L_step",
    "oracle.L_max",
    "psi",
    "demo.model",
    "demo.n",
    "demo.dim",
    "demo.t",
    "demo.observable",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    /// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
    pub fn parse(text: &str) -> Validated<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return invalid(format!("config line {}: expected key = value", lineno + 1));
            };
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Validated<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ValidationError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Validated<()> {
        if !KNOWN_KEYS.contains(&key) {
            return invalid(format!("unknown config key '{key}'"));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn set_opt(&mut self, key: &str, value: &Option<String>) -> Validated<()> {
        match value {
            Some(v) => self.set(key, v),
            None => Ok(()),
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn real(&self, key: &str, default: f64) -> Validated<f64> {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => parse_real(s).map_err(|e| ValidationError(format!("{key}: {e}"))),
        }
    }

    pub fn real_opt(&self, key: &str) -> Validated<Option<f64>> {
        self.raw(key)
            .map(|s| parse_real(s).map_err(|e| ValidationError(format!("{key}: {e}"))))
            .transpose()
    }

    pub fn count(&self, key: &str, default: usize) -> Validated<usize> {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| {
                ValidationError(format!("{key}: expected a non-negative integer, got '{s}'"))
            }),
        }
    }

    pub fn text<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.raw(key).unwrap_or(default)
    }

    pub fn reals(&self, key: &str) -> Validated<Option<Vec<f64>>> {
        self.raw(key)
            .map(|s| {
                s.split(',')
                    .map(|t| {
                        parse_real(t.trim()).map_err(|e| ValidationError(format!("{key}: {e}")))
                    })
                    .collect()
            })
            .transpose()
    }
}

/// Real number or angle: plain floats plus `pi`, `pi/k`, `k*pi`, `k*pi/j`,
/// each optionally negated.
pub fn parse_real(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1.0, rest.trim()),
        None => (1.0, s),
    };
    let bad = || format!("cannot parse '{s}' as a number");
    let (head, denom) = match body.split_once('/') {
        Some((h, d)) => (h.trim(), d.trim().parse::<f64>().map_err(|_| bad())?),
        None => (body, 1.0),
    };
    let factor = match head.split_once('*') {
        Some((k, p)) if p.trim() == "pi" => k.trim().parse::<f64>().map_err(|_| bad())?,
        None if head == "pi" => 1.0,
        _ => return Err(bad()),
    };
    if denom == 0.0 {
        return Err(bad());
    }
    // `pi/2` must land on FRAC_PI_2 exactly: PI * 1 / 2 is exact in binary.
    Ok(sign * (factor * PI) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn angles() {
        assert_eq!(parse_real("pi/2").unwrap(), FRAC_PI_2);
        assert_eq!(parse_real("pi/4").unwrap(), FRAC_PI_4);
        assert_eq!(parse_real("pi").unwrap(), PI);
        assert_eq!(parse_real("-pi/2").unwrap(), -FRAC_PI_2);
        assert_eq!(parse_real("3*pi/4").unwrap(), 3.0 * PI / 4.0);
        assert_eq!(parse_real("1.5707963267948966").unwrap(), FRAC_PI_2);
        assert!(parse_real("tau").is_err());
        assert!(parse_real("pi/0").is_err());
    }

    #[test]
    fn file_and_comments() {
        let cfg = RunConfig::parse("# run\nL = 5\nJ = pi/2  # flip\n\nm=0.3\n").unwrap();
        assert_eq!(cfg.count("L", 0).unwrap(), 5);
        assert_eq!(cfg.real("J", 0.0).unwrap(), FRAC_PI_2);
        assert_eq!(cfg.real("m", 0.0).unwrap(), 0.3);
        assert_eq!(cfg.real("a", -1.0).unwrap(), -1.0);
        assert!(RunConfig::parse("L 5").is_err());
        assert!(RunConfig::parse("colour = red").is_err());
    }
}
