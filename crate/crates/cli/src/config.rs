//! Flat `key = value` experiment configuration.
//!
//! One schema per experiment kind. Keys outside the schema are rejected,
//! missing keys take the documented default, and keys without a default
//! must be given.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, found {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown key `{key}` for experiment `{kind}`")]
    UnknownKey { kind: Kind, key: String },
    #[error("key `{0}` given more than once")]
    Duplicate(String),
    #[error("missing required key `{key}` for experiment `{kind}`")]
    Missing { kind: Kind, key: String },
    #[error("key `{key}`: cannot parse {value:?} as {expected}")]
    BadValue { key: String, value: String, expected: &'static str },
    #[error("config declares kind `{found}` but was run as `{expected}`")]
    KindMismatch { expected: Kind, found: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Kind {
    Slit,
    Born,
    Luders,
    Pointer,
    Ehrenfest,
    Evolve,
    Collapse,
}

impl Kind {
    pub const ALL: [Kind; 7] =
        [Kind::Slit, Kind::Born, Kind::Luders, Kind::Pointer, Kind::Ehrenfest, Kind::Evolve, Kind::Collapse];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Slit => "slit",
            Kind::Born => "born",
            Kind::Luders => "luders",
            Kind::Pointer => "pointer",
            Kind::Ehrenfest => "ehrenfest",
            Kind::Evolve => "evolve",
            Kind::Collapse => "collapse",
        }
    }

    pub fn schema(self) -> Vec<Param> {
        let mut params = common();
        params.extend(match self {
            Kind::Slit => vec![
                Param::float("z1", None, "lower slit edge"),
                Param::float("z2", None, "upper slit edge"),
                Param::float("eps", Some("0.04"), "sharpness parameter in (0, 1)"),
                Param::int("n", Some("256"), "grid points"),
                Param::float("half_width", Some("10"), "grid covers [-L, L)"),
                Param::float("hbar", Some("1"), "reduced Planck constant"),
                Param::int("regions", Some("10"), "seeded sharp regions"),
                Param::int("observables", Some("5"), "random bounded observables per region"),
            ],
            Kind::Born => vec![
                Param::float("p1", Some("0.3"), "outcome probability"),
                Param::int("copies", Some("10000"), "copies per run"),
                Param::float("lambda", Some("0.5"), "band exponent in (0, 1)"),
                Param::int("runs", Some("200"), "seeded runs"),
                Param::int("max_outside", Some("5"), "runs allowed outside the band"),
                Param::float("mean_tol", Some("0.005"), "tolerance on the mean frequency"),
                Param::int("spectrum_max", Some("8"), "largest N for the average-operator spectrum"),
            ],
            Kind::Luders => vec![
                Param::int("dim", Some("16"), "Hilbert space dimension"),
                Param::float("eps", Some("0.01"), "persistence parameter in (0, 1)"),
                Param::float("delta", Some("0.05"), "preparation radius"),
                Param::int("trials", Some("50"), "seeded trials"),
                Param::int("samples", Some("16"), "samples per region"),
            ],
            Kind::Pointer => vec![
                Param::int("n", Some("32"), "grid points per particle"),
                Param::float("half_width", Some("4"), "grid covers [-L, L)"),
                Param::float("g", Some("1"), "coupling"),
                Param::float("dt", Some("1"), "interaction time"),
                Param::float("eps2", Some("0.01"), "pointer classicality parameter"),
                Param::float("center", Some("1"), "particle slit centre; the union uses both signs"),
                Param::float("width", Some("0.5"), "particle slit width"),
                Param::float("pointer_width", Some("0.5"), "pointer slit width around 0"),
                Param::int("samples", Some("8"), "samples per particle region"),
                Param::int("pairs", Some("16"), "joint samples"),
            ],
            Kind::Ehrenfest => vec![
                Param::choice("force", Some("cubic"), FORCES, "force law"),
                Param::float("coeff", Some("1"), "force coefficient (omega for harmonic)"),
                Param::float("mu", Some("1"), "mass"),
                Param::float("eps", Some("0.05"), "window tolerance"),
                Param::float("r_lo", Some("-2"), "first window centre"),
                Param::float("r_hi", Some("2"), "last window centre"),
                Param::float("r_step", Some("1"), "spacing of window centres"),
                Param::float("cover_lo", Some("-3"), "coverage interval start"),
                Param::float("cover_hi", Some("3"), "coverage interval end"),
                Param::int("n", Some("256"), "grid points"),
                Param::float("half_width", Some("4"), "grid covers [-L, L)"),
                Param::int("states", Some("100"), "random states for the linear-force gap"),
            ],
            Kind::Evolve => vec![
                Param::choice("force", Some("harmonic"), &["harmonic", "cubic", "quartic"], "force law"),
                Param::float("coeff", Some("1"), "force coefficient (omega for harmonic)"),
                Param::float("mu", Some("1"), "mass"),
                Param::float("a", Some("2"), "initial displacement"),
                Param::float("sigma", Some(""), "initial packet width; minimum uncertainty when empty"),
                Param::float("t_max", Some("12.566370614359172"), "final time"),
                Param::float("dt", Some("0.05"), "output step"),
                Param::float("tol", Some("1e-3"), "relative trajectory tolerance"),
                Param::int("n", Some("512"), "grid points"),
                Param::float("half_width", Some("10"), "grid covers [-L, L)"),
                Param::text("trajectory", Some(""), "path for the trajectory CSV"),
            ],
            Kind::Collapse => vec![
                Param::float("mu", Some("1.5"), "mass"),
                Param::float("lambda", Some("0.4"), "sharpening rate"),
                Param::float("q0", Some("2"), "initial value"),
                Param::choice("variance", Some("constant"), &["constant", "exponential"], "variance profile"),
                Param::float("v0", Some("0.3"), "initial variance"),
                Param::float("rate", Some("1"), "decay rate of the exponential profile"),
                Param::float("t_max", Some("5"), "final time"),
                Param::float("dt", Some("0.01"), "integration step"),
                Param::float("tol", Some("1e-8"), "tolerance against the closed form"),
                Param::text("trajectory", Some(""), "path for the trajectory CSV"),
            ],
        });
        params
    }
}

const FORCES: &[&str] = &["harmonic", "linear", "cubic", "quartic"];

fn common() -> Vec<Param> {
    vec![
        Param::int("seed", Some(DEFAULT_SEED_STR), "base seed"),
        Param::text("output", Some(""), "report path; stdout when empty"),
        Param::choice("format", Some("csv"), &["csv", "json"], "report format"),
    ]
}

const DEFAULT_SEED_STR: &str = "20240917";

/// Keys that only affect presentation and stay out of the report body.
pub const PRESENTATION_KEYS: [&str; 2] = ["output", "format"];

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Kind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamType {
    Float,
    Int,
    Text,
    Choice(&'static [&'static str]),
}

#[derive(Debug, Clone)]
pub struct Param {
    pub key: &'static str,
    pub ty: ParamType,
    /// `None` marks a required key; `Some("")` an optional one.
    pub default: Option<&'static str>,
    pub help: &'static str,
}

impl Param {
    fn float(key: &'static str, default: Option<&'static str>, help: &'static str) -> Self {
        Self { key, ty: ParamType::Float, default, help }
    }

    fn int(key: &'static str, default: Option<&'static str>, help: &'static str) -> Self {
        Self { key, ty: ParamType::Int, default, help }
    }

    fn text(key: &'static str, default: Option<&'static str>, help: &'static str) -> Self {
        Self { key, ty: ParamType::Text, default, help }
    }

    fn choice(
        key: &'static str,
        default: Option<&'static str>,
        options: &'static [&'static str],
        help: &'static str,
    ) -> Self {
        Self { key, ty: ParamType::Choice(options), default, help }
    }

    fn check(&self, value: &str) -> Result<(), ConfigError> {
        let bad = |expected| ConfigError::BadValue { key: self.key.into(), value: value.into(), expected };
        if value.is_empty() {
            return Ok(());
        }
        match self.ty {
            ParamType::Float => match value.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(()),
                _ => Err(bad("a finite number")),
            },
            ParamType::Int => value.parse::<u64>().map(|_| ()).map_err(|_| bad("a non-negative integer")),
            ParamType::Text => Ok(()),
            ParamType::Choice(options) => {
                if options.contains(&value) {
                    Ok(())
                } else {
                    Err(bad("one of the listed options"))
                }
            }
        }
    }
}

/// Splits a config file into `(key, value)` pairs. Blank lines and lines
/// starting with `#` are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Syntax { line: k + 1, text: raw.into() });
        };
        let key = key.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(ConfigError::Syntax { line: k + 1, text: raw.into() });
        }
        out.push((key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// A validated configuration: every schema key has a (possibly empty) value.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: Kind,
    values: BTreeMap<String, String>,
}

impl ExperimentConfig {
    /// Resolves file pairs then command-line overrides against the schema.
    pub fn resolve(kind: Kind, file: &[(String, String)], overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let schema = kind.schema();
        let mut given: BTreeMap<String, String> = BTreeMap::new();
        for (key, value) in file {
            if key == "kind" {
                if value != kind.name() {
                    return Err(ConfigError::KindMismatch { expected: kind, found: value.clone() });
                }
                continue;
            }
            if given.insert(key.clone(), value.clone()).is_some() {
                return Err(ConfigError::Duplicate(key.clone()));
            }
        }
        for (key, value) in overrides {
            given.insert(key.clone(), value.clone());
        }
        if let Some(key) = given.keys().find(|k| !schema.iter().any(|p| p.key == k.as_str())) {
            return Err(ConfigError::UnknownKey { kind, key: key.clone() });
        }
        let mut values = BTreeMap::new();
        for p in &schema {
            let value = match (given.remove(p.key), p.default) {
                (Some(v), _) => v,
                (None, Some(d)) => d.to_string(),
                (None, None) => return Err(ConfigError::Missing { kind, key: p.key.into() }),
            };
            if value.is_empty() && p.default.is_none() {
                return Err(ConfigError::Missing { kind, key: p.key.into() });
            }
            p.check(&value)?;
            values.insert(p.key.to_string(), value);
        }
        Ok(Self { kind, values })
    }

    pub fn from_text(kind: Kind, text: &str) -> Result<Self, ConfigError> {
        Self::resolve(kind, &parse_pairs(text)?, &[])
    }

    fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("`{key}` is not in the {} schema", self.kind))
    }

    pub fn f64(&self, key: &str) -> f64 {
        self.raw(key).parse().unwrap_or_else(|_| panic!("`{key}` is not a number"))
    }

    pub fn opt_f64(&self, key: &str) -> Option<f64> {
        let v = self.raw(key);
        (!v.is_empty()).then(|| self.f64(key))
    }

    pub fn u64(&self, key: &str) -> u64 {
        self.raw(key).parse().unwrap_or_else(|_| panic!("`{key}` is not an integer"))
    }

    pub fn usize(&self, key: &str) -> usize {
        self.u64(key) as usize
    }

    pub fn text(&self, key: &str) -> &str {
        self.raw(key)
    }

    pub fn seed(&self) -> u64 {
        self.u64("seed")
    }

    pub fn output(&self) -> Option<&str> {
        Some(self.text("output")).filter(|s| !s.is_empty())
    }

    pub fn format(&self) -> &str {
        self.text("format")
    }

    /// Resolved values minus the presentation keys.
    pub fn echo(&self) -> BTreeMap<String, String> {
        self.values
            .iter()
            .filter(|(k, _)| !PRESENTATION_KEYS.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }
}

/// Renders the schema of one kind as a commented config file.
pub fn template(kind: Kind) -> String {
    let mut out = format!("kind = {}\n", kind.name());
    for p in kind.schema() {
        out.push_str(&format!("# {}\n", p.help));
        match p.default {
            Some(d) => out.push_str(&format!("{} = {}\n", p.key, d)),
            None => out.push_str(&format!("# {} = (required)\n", p.key)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let pairs = parse_pairs("# slit run\n\nz1 = -2\n  z2=2  \n").unwrap();
        assert_eq!(pairs, vec![("z1".into(), "-2".into()), ("z2".into(), "2".into())]);
    }

    #[test]
    fn lines_without_equals_are_rejected() {
        assert_eq!(parse_pairs("z1 -2").unwrap_err(), ConfigError::Syntax { line: 1, text: "z1 -2".into() });
    }

    #[test]
    fn missing_required_key() {
        let err = ExperimentConfig::from_text(Kind::Slit, "z1 = -2").unwrap_err();
        assert_eq!(err, ConfigError::Missing { kind: Kind::Slit, key: "z2".into() });
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        let err = ExperimentConfig::from_text(Kind::Born, "p1 = 0.3\nq = 1").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { .. }));
        let err = ExperimentConfig::from_text(Kind::Born, "p1 = 0.3\np1 = 0.4").unwrap_err();
        assert_eq!(err, ConfigError::Duplicate("p1".into()));
    }

    #[test]
    fn kind_line_must_match() {
        assert!(ExperimentConfig::from_text(Kind::Born, "kind = born").is_ok());
        assert!(matches!(
            ExperimentConfig::from_text(Kind::Born, "kind = slit"),
            Err(ConfigError::KindMismatch { .. })
        ));
    }

    #[test]
    fn values_are_type_checked() {
        assert!(matches!(ExperimentConfig::from_text(Kind::Born, "copies = -3"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(ExperimentConfig::from_text(Kind::Born, "p1 = nan"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(
            ExperimentConfig::from_text(Kind::Ehrenfest, "force = sextic"),
            Err(ConfigError::BadValue { .. })
        ));
    }

    #[test]
    fn overrides_win_and_defaults_fill_in() {
        let cfg = ExperimentConfig::resolve(Kind::Born, &[("p1".into(), "0.3".into())], &[("p1".into(), "0.6".into())])
            .unwrap();
        assert_eq!(cfg.f64("p1"), 0.6);
        assert_eq!(cfg.u64("copies"), 10_000);
        assert_eq!(cfg.seed(), 20_240_917);
        assert!(!cfg.echo().contains_key("format"));
    }

    #[test]
    fn templates_parse_once_required_keys_are_filled() {
        for kind in Kind::ALL {
            let mut text = template(kind);
            if kind == Kind::Slit {
                text.push_str("z1 = -2\nz2 = 2\n");
            }
            ExperimentConfig::from_text(kind, &text).unwrap();
        }
    }
}
