//! Experiment declarations and configuration parsing.
//!
//! Every parameter accepts a comma-separated list; the run covers the
//! Cartesian product of all lists, in declaration order with the last key
//! varying fastest. An empty list yields an empty grid.

use std::path::PathBuf;

use serde_json::Value as Json;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
    #[error("unknown parameter `{key}` for {experiment}")]
    UnknownKey { experiment: &'static str, key: String },
    #[error("missing required parameter `{0}`")]
    Missing(&'static str),
    #[error("bad value `{value}` for `{key}`: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("invalid config file: {0}")]
    File(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    FprEstimate,
    PrivacyAudit,
    BpAttack,
    AbGame,
    FilicDistinguish,
    SaturationScan,
    ErrorAnalysis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyKind {
    Int,
    Float,
    Choice(&'static [&'static str]),
}

#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub kind: KeyKind,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

const fn int(name: &'static str, default: Option<&'static str>, help: &'static str) -> Key {
    Key { name, kind: KeyKind::Int, default, help }
}

const fn float(name: &'static str, default: Option<&'static str>, help: &'static str) -> Key {
    Key { name, kind: KeyKind::Float, default, help }
}

const fn choice(name: &'static str, options: &'static [&'static str], default: Option<&'static str>, help: &'static str) -> Key {
    Key { name, kind: KeyKind::Choice(options), default, help }
}

pub const CONSTRUCTIONS: &[&str] = &["standard", "keyed-prf", "true-random", "ny"];
pub const MECHANISMS: &[&str] = &["mangat", "warner"];

const M: Key = int("m", None, "filter length in bits");
const K: Key = int("k", None, "number of hash functions");
const N: Key = int("n", None, "set size");

const FPR_KEYS: &[Key] = &[
    M,
    K,
    N,
    int("u", Some("4294967296"), "universe size"),
    choice("construction", CONSTRUCTIONS, Some("standard"), "filter construction"),
    int("queries-per-build", Some("100"), "non-member queries per fresh filter"),
];

const AUDIT_KEYS: &[Key] = &[
    choice("mode", MECHANISMS, None, "randomized response mechanism"),
    float("p", None, "mechanism parameter"),
    int("u", Some("100"), "universe size"),
    int("s", Some("10"), "set size; the set is {0, ..., s-1}"),
    int("x", Some("0"), "audited element"),
];

const BP_KEYS: &[Key] = &[
    M,
    K,
    N,
    int("t", None, "query budget"),
    float("delta", Some("0.5"), "payout parameter"),
    int("u", Some("65536"), "universe size"),
    choice("construction", CONSTRUCTIONS, Some("true-random"), "filter construction"),
];

const AB_KEYS: &[Key] = &[
    M,
    K,
    N,
    int("t", Some("0"), "query budget"),
    int("u", Some("1073741824"), "universe size"),
    choice("construction", CONSTRUCTIONS, Some("standard"), "filter construction"),
    choice("adversary", &["random", "saturation", "public-hash"], Some("random"), "adversary strategy"),
];

const FILIC_KEYS: &[Key] = &[
    M,
    K,
    N,
    int("u", Some("65536"), "universe size"),
    choice(
        "filter",
        &["standard", "keyed-prf", "true-random", "key-leaking-ny"],
        Some("key-leaking-ny"),
        "real-world filter",
    ),
    choice(
        "adversary",
        &["key-reading", "public-collision", "constant", "ab-random", "ab-saturation"],
        Some("key-reading"),
        "adversary strategy",
    ),
    int("q_u", Some("0"), "insert-oracle budget"),
    int("q_t", Some("1"), "membership-oracle budget"),
    int("q_v", Some("1"), "reveal-oracle budget"),
];

const SATURATION_KEYS: &[Key] = &[M, N, K, float("delta", Some("0.5"), "payout parameter")];

const ERROR_KEYS: &[Key] = &[
    choice("mode", &["none", "mangat", "warner"], Some("none"), "perturbation applied before building"),
    float("p", Some("0.75"), "mechanism parameter"),
    M,
    K,
    int("s", None, "set size"),
    int("u", Some("4096"), "universe size"),
    choice("construction", CONSTRUCTIONS, Some("keyed-prf"), "filter construction"),
];

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::FprEstimate,
        Experiment::PrivacyAudit,
        Experiment::BpAttack,
        Experiment::AbGame,
        Experiment::FilicDistinguish,
        Experiment::SaturationScan,
        Experiment::ErrorAnalysis,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::FprEstimate => "fpr-estimate",
            Experiment::PrivacyAudit => "privacy-audit",
            Experiment::BpAttack => "bp-attack",
            Experiment::AbGame => "ab-game",
            Experiment::FilicDistinguish => "filic-distinguish",
            Experiment::SaturationScan => "saturation-scan",
            Experiment::ErrorAnalysis => "error-analysis",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, ConfigError> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == name)
            .ok_or_else(|| ConfigError::UnknownExperiment(name.to_string()))
    }

    pub fn about(self) -> &'static str {
        match self {
            Experiment::FprEstimate => "Empirical false-positive rate against the closed form",
            Experiment::PrivacyAudit => "Marginal likelihood-ratio audit of a randomized response mechanism",
            Experiment::BpAttack => "Saturation attack in the bet-or-pass game",
            Experiment::AbGame => "Always-bet game win rate",
            Experiment::FilicDistinguish => "Real/Ideal distinguishing advantage",
            Experiment::SaturationScan => "Exact and bounded saturation probability",
            Experiment::ErrorAnalysis => "Error rates of filters built over perturbed sets",
        }
    }

    pub fn keys(self) -> &'static [Key] {
        match self {
            Experiment::FprEstimate => FPR_KEYS,
            Experiment::PrivacyAudit => AUDIT_KEYS,
            Experiment::BpAttack => BP_KEYS,
            Experiment::AbGame => AB_KEYS,
            Experiment::FilicDistinguish => FILIC_KEYS,
            Experiment::SaturationScan => SATURATION_KEYS,
            Experiment::ErrorAnalysis => ERROR_KEYS,
        }
    }

    /// Metric columns, in output order.
    pub fn metrics(self) -> &'static [&'static str] {
        match self {
            Experiment::FprEstimate => &["queries", "positives", "fpr", "ci_lo", "ci_hi", "fpr_formula"],
            Experiment::PrivacyAudit => &[
                "epsilon",
                "epsilon_prime",
                "claimed_ratio",
                "ratio",
                "ci_lo",
                "ci_hi",
                "verdict",
            ],
            Experiment::BpAttack => &[
                "mean_profit",
                "std_err",
                "ci_lo",
                "ci_hi",
                "bets",
                "win_rate",
                "saturated_rate",
                "p_fp",
                "p_s_exact",
                "p_s_bound",
                "profit_lower_bound",
                "profit_formula",
            ],
            Experiment::AbGame => &["win_rate", "ci_lo", "ci_hi", "forfeits", "saturated_rate", "fpr_formula"],
            Experiment::FilicDistinguish => &["real_rate", "ideal_rate", "advantage", "ci_lo", "ci_hi"],
            Experiment::SaturationScan => &[
                "p_s_exact",
                "p_s_bound",
                "mc_frequency",
                "mc_ci_lo",
                "mc_ci_hi",
                "profit_lower_bound",
                "optimal_k",
                "optimal_k_attack",
            ],
            Experiment::ErrorAnalysis => &[
                "epsilon",
                "epsilon_prime",
                "cardinality_expected",
                "cardinality_mean",
                "fnr_expected",
                "fnr",
                "fpr_expected",
                "fpr",
                "non_member_positive_rate",
            ],
        }
    }

    pub fn key(self, name: &str) -> Option<&'static Key> {
        self.keys().iter().find(|k| k.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(u64),
    Float(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Value {
    fn parse(key: &Key, raw: &str) -> Result<Self, ConfigError> {
        let bad = |reason: String| ConfigError::BadValue {
            key: key.name.to_string(),
            value: raw.to_string(),
            reason,
        };
        match key.kind {
            KeyKind::Int => raw.parse::<u64>().map(Value::Int).map_err(|e| bad(e.to_string())),
            KeyKind::Float => match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Value::Float(v)),
                Ok(_) => Err(bad("not finite".into())),
                Err(e) => Err(bad(e.to_string())),
            },
            KeyKind::Choice(options) => {
                if options.contains(&raw) {
                    Ok(Value::Text(raw.to_string()))
                } else {
                    Err(bad(format!("expected one of {}", options.join(", "))))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn from_name(name: &str) -> Result<Self, ConfigError> {
        match name {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(ConfigError::BadValue {
                key: "format".into(),
                value: other.into(),
                reason: "expected csv or json".into(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// One entry per declared key, in declaration order.
    pub grid: Vec<(&'static str, Vec<Value>)>,
    pub trials: u64,
    pub master_seed: u64,
    pub format: Format,
    pub output: Option<PathBuf>,
    /// Adds an `elapsed_ms` column, which makes output non-reproducible.
    pub timing: bool,
}

/// One grid point: a value for every declared key.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(pub Vec<(&'static str, Value)>);

impl Point {
    fn get(&self, name: &str) -> &Value {
        &self
            .0
            .iter()
            .find(|(k, _)| *k == name)
            .unwrap_or_else(|| panic!("undeclared key {name}"))
            .1
    }

    pub fn int(&self, name: &str) -> u64 {
        match self.get(name) {
            Value::Int(v) => *v,
            other => panic!("{name} is not an integer: {other:?}"),
        }
    }

    pub fn float(&self, name: &str) -> f64 {
        match self.get(name) {
            Value::Float(v) => *v,
            other => panic!("{name} is not a float: {other:?}"),
        }
    }

    pub fn text(&self, name: &str) -> &str {
        match self.get(name) {
            Value::Text(v) => v,
            other => panic!("{name} is not text: {other:?}"),
        }
    }
}

fn split_list(raw: &str) -> Vec<&str> {
    raw.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

impl ExperimentConfig {
    /// Builds a config from raw per-key strings; `raw(name)` returns `None`
    /// for keys that were not given.
    pub fn from_raw<'a>(
        experiment: Experiment,
        raw: impl Fn(&str) -> Option<&'a str>,
        trials: u64,
        master_seed: u64,
    ) -> Result<Self, ConfigError> {
        if trials == 0 {
            return Err(ConfigError::BadValue {
                key: "trials".into(),
                value: "0".into(),
                reason: "need at least one trial".into(),
            });
        }
        let mut grid = Vec::with_capacity(experiment.keys().len());
        for key in experiment.keys() {
            let text = raw(key.name).or(key.default).ok_or(ConfigError::Missing(key.name))?;
            let values = split_list(text)
                .into_iter()
                .map(|v| Value::parse(key, v))
                .collect::<Result<Vec<_>, _>>()?;
            grid.push((key.name, values));
        }
        Ok(Self {
            experiment,
            grid,
            trials,
            master_seed,
            format: Format::Csv,
            output: None,
            timing: false,
        })
    }

    /// Parses the JSON form:
    /// `{"experiment": "...", "trials": N, "seed": S, "format": "csv",
    /// "output": "path", "timing": false, "parameters": {"m": [8, 16], ...}}`.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let file = |msg: String| ConfigError::File(msg);
        let doc: Json = serde_json::from_str(text).map_err(|e| file(e.to_string()))?;
        let obj = doc.as_object().ok_or_else(|| file("top level must be an object".into()))?;
        for key in obj.keys() {
            if !["experiment", "trials", "seed", "format", "output", "timing", "parameters"].contains(&key.as_str()) {
                return Err(file(format!("unknown field `{key}`")));
            }
        }
        let name = obj
            .get("experiment")
            .and_then(Json::as_str)
            .ok_or_else(|| file("`experiment` must be a string".into()))?;
        let experiment = Experiment::from_name(name)?;
        let get_u64 = |field: &str, default: u64| -> Result<u64, ConfigError> {
            match obj.get(field) {
                None => Ok(default),
                Some(v) => v.as_u64().ok_or_else(|| file(format!("`{field}` must be a non-negative integer"))),
            }
        };
        let trials = get_u64("trials", DEFAULT_TRIALS)?;
        let seed = get_u64("seed", 0)?;

        let mut raw: Vec<(String, String)> = Vec::new();
        if let Some(params) = obj.get("parameters") {
            let params = params.as_object().ok_or_else(|| file("`parameters` must be an object".into()))?;
            for (key, value) in params {
                if experiment.key(key).is_none() {
                    return Err(ConfigError::UnknownKey {
                        experiment: experiment.name(),
                        key: key.clone(),
                    });
                }
                let items = match value {
                    Json::Array(items) => items.iter().map(scalar_text).collect::<Result<Vec<_>, _>>()?,
                    other => vec![scalar_text(other)?],
                };
                raw.push((key.clone(), items.join(",")));
            }
        }
        let mut config = Self::from_raw(
            experiment,
            |name| raw.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str()),
            trials,
            seed,
        )?;
        if let Some(f) = obj.get("format") {
            config.format = Format::from_name(f.as_str().ok_or_else(|| file("`format` must be a string".into()))?)?;
        }
        if let Some(o) = obj.get("output") {
            config.output = Some(o.as_str().ok_or_else(|| file("`output` must be a string".into()))?.into());
        }
        if let Some(t) = obj.get("timing") {
            config.timing = t.as_bool().ok_or_else(|| file("`timing` must be a boolean".into()))?;
        }
        Ok(config)
    }

    /// Grid points in emission order.
    pub fn points(&self) -> Vec<Point> {
        let mut points = vec![Point(Vec::new())];
        for (name, values) in &self.grid {
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut next = p.0.clone();
                        next.push((*name, v.clone()));
                        Point(next)
                    })
                })
                .collect();
        }
        points
    }
}

pub const DEFAULT_TRIALS: u64 = 1000;

fn scalar_text(v: &Json) -> Result<String, ConfigError> {
    match v {
        Json::Number(n) => Ok(n.to_string()),
        Json::String(s) => Ok(s.clone()),
        other => Err(ConfigError::File(format!("unsupported parameter value {other}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw_config(e: Experiment, pairs: &[(&str, &str)]) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::from_raw(e, |k| pairs.iter().find(|(n, _)| *n == k).map(|(_, v)| *v), 10, 1)
    }

    #[test]
    fn grid_is_cartesian_in_key_order() {
        let c = raw_config(Experiment::SaturationScan, &[("m", "4,8"), ("n", "5"), ("k", "1,2,3")]).unwrap();
        let pts = c.points();
        assert_eq!(pts.len(), 6);
        assert_eq!((pts[0].int("m"), pts[0].int("k")), (4, 1));
        assert_eq!((pts[1].int("m"), pts[1].int("k")), (4, 2));
        assert_eq!((pts[3].int("m"), pts[3].int("k")), (8, 1));
        assert_eq!(pts[5].float("delta"), 0.5);
    }

    #[test]
    fn empty_list_gives_no_points() {
        let c = raw_config(Experiment::SaturationScan, &[("m", ""), ("n", "5"), ("k", "1")]).unwrap();
        assert!(c.points().is_empty());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(raw_config(Experiment::SaturationScan, &[("n", "5"), ("k", "1")]), Err(ConfigError::Missing("m"))));
        assert!(raw_config(Experiment::SaturationScan, &[("m", "x"), ("n", "5"), ("k", "1")]).is_err());
        assert!(raw_config(Experiment::PrivacyAudit, &[("mode", "other"), ("p", "0.5")]).is_err());
        assert!(raw_config(Experiment::PrivacyAudit, &[("mode", "warner"), ("p", "NaN")]).is_err());
        assert!(ExperimentConfig::from_raw(Experiment::SaturationScan, |_| Some("1"), 0, 0).is_err());
        assert!(Experiment::from_name("nope").is_err());
    }

    #[test]
    fn json_config() {
        let c = ExperimentConfig::from_json(
            r#"{"experiment": "privacy-audit", "trials": 50, "seed": 3, "format": "json",
                "parameters": {"mode": "mangat", "p": [0.1, 0.5]}}"#,
        )
        .unwrap();
        assert_eq!(c.points().len(), 2);
        assert_eq!((c.trials, c.master_seed, c.format), (50, 3, Format::Json));
        let unknown = ExperimentConfig::from_json(r#"{"experiment": "privacy-audit", "parameters": {"mode": "mangat", "p": 0.5, "zz": 1}}"#);
        assert!(matches!(unknown, Err(ConfigError::UnknownKey { .. })));
        assert!(ExperimentConfig::from_json(r#"{"experiment": "privacy-audit", "extra": 1}"#).is_err());
        assert!(ExperimentConfig::from_json("[1]").is_err());
    }
}
