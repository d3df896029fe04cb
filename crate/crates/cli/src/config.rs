//! Flat `key = value` scenario files.
//!
//! ```text
//! # subcritical run with the default cosine data
//! scenario = subcritical
//! alpha = 0.5
//! mass = 3
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ks1d_core::inequality::critical_mass_threshold;
use ks1d_core::GridSpec;
use serde::Serialize;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, found `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}` (first set on line {first})")]
    Duplicate { line: usize, key: String, first: usize },
    #[error("line {line}: {key} = {value}: {reason}")]
    Invalid {
        line: usize,
        key: String,
        value: String,
        reason: String,
    },
    #[error("missing required key `{key}`{context}")]
    Missing { key: String, context: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Subcritical,
    Critical,
    Blowup,
    ThresholdScan,
    Certificate,
    Inequalities,
    Custom,
}

impl Scenario {
    /// Scenarios that integrate the PDE.
    pub fn is_simulation(self) -> bool {
        matches!(self, Self::Subcritical | Self::Critical | Self::Blowup | Self::Custom)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Subcritical => "subcritical",
            Self::Critical => "critical",
            Self::Blowup => "blowup",
            Self::ThresholdScan => "threshold-scan",
            Self::Certificate => "certificate",
            Self::Inequalities => "inequalities",
            Self::Custom => "custom",
        }
    }
}

impl FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "subcritical" => Self::Subcritical,
            "critical" => Self::Critical,
            "blowup" => Self::Blowup,
            "threshold-scan" => Self::ThresholdScan,
            "certificate" => Self::Certificate,
            "inequalities" => Self::Inequalities,
            "custom" => Self::Custom,
            _ => {
                return Err(
                    "expected subcritical, critical, blowup, threshold-scan, certificate, inequalities or custom".into(),
                )
            }
        })
    }
}

/// Initial data presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialPreset {
    /// `u = M`, `v = 0`.
    Constant,
    /// `u = M (1 + amplitude cos(pi x))`, `v = 0`.
    Cosine,
    /// The ramp `u0 = 2M^3 (x + 1/M - 1)_+`, `v0 = M x - M/2`.
    Eq60,
    /// Two-column CSV `u,v` with one row per cell.
    File,
}

impl FromStr for InitialPreset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "constant" => Self::Constant,
            "cosine" => Self::Cosine,
            "eq60" => Self::Eq60,
            "file" => Self::File,
            _ => return Err("expected constant, cosine, eq60 or file".into()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Prop5,
    Prop6,
    Sobolev,
    Lemma4,
    Cor4,
}

impl FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "prop5" => Self::Prop5,
            "prop6" => Self::Prop6,
            "sobolev" => Self::Sobolev,
            "lemma4" => Self::Lemma4,
            "cor4" => Self::Cor4,
            _ => return Err("expected prop5, prop6, sobolev, lemma4 or cor4".into()),
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Prop5 => "prop5",
            Self::Prop6 => "prop6",
            Self::Sobolev => "sobolev",
            Self::Lemma4 => "lemma4",
            Self::Cor4 => "cor4",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Real,
    Integer,
    Text,
}

const KEYS: &[(&str, Kind)] = &[
    ("scenario", Kind::Text),
    ("n_cells", Kind::Integer),
    ("t_end", Kind::Real),
    ("chi", Kind::Real),
    ("eps", Kind::Real),
    ("D", Kind::Real),
    ("gamma", Kind::Real),
    ("alpha", Kind::Real),
    ("diffusion_table", Kind::Text),
    ("q", Kind::Real),
    ("mass", Kind::Real),
    ("initial", Kind::Text),
    ("amplitude", Kind::Real),
    ("initial_file", Kind::Text),
    ("dt_init", Kind::Real),
    ("dt_min", Kind::Real),
    ("dt_max", Kind::Real),
    ("cfl", Kind::Real),
    ("growth_cap", Kind::Real),
    ("max_steps", Kind::Integer),
    ("blowup_threshold", Kind::Real),
    ("collapse_fraction", Kind::Real),
    ("sample_cadence", Kind::Real),
    ("c_tol", Kind::Real),
    ("search_min", Kind::Real),
    ("search_max", Kind::Real),
    ("suite", Kind::Text),
    ("delta", Kind::Real),
    ("seed", Kind::Integer),
    ("output_dir", Kind::Text),
];

/// Keys that a sweep may vary.
pub fn is_numeric_key(key: &str) -> bool {
    KEYS.iter().any(|(k, kind)| *k == key && *kind != Kind::Text)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub n_cells: usize,
    pub t_end: f64,
    pub chi: f64,
    /// `None`: `M^(1-q)` for blowup runs, 1 otherwise.
    pub eps: Option<f64>,
    #[serde(rename = "D")]
    pub d: f64,
    pub gamma: f64,
    pub alpha: Option<f64>,
    pub diffusion_table: Option<PathBuf>,
    pub q: f64,
    /// `None`: taken from the certificate threshold search.
    pub mass: Option<f64>,
    pub initial: InitialPreset,
    pub amplitude: f64,
    pub initial_file: Option<PathBuf>,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub cfl: f64,
    pub growth_cap: f64,
    pub max_steps: usize,
    pub blowup_threshold: f64,
    pub collapse_fraction: Option<f64>,
    pub sample_cadence: f64,
    pub c_tol: f64,
    pub search_min: f64,
    pub search_max: f64,
    pub suite: Option<Suite>,
    pub delta: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
}

struct Entries {
    map: BTreeMap<String, (String, usize)>,
    scenario_line: usize,
}

impl Entries {
    fn raw(&self, key: &str) -> Option<&(String, usize)> {
        self.map.get(key)
    }

    fn invalid(&self, key: &str, reason: impl Into<String>) -> ConfigError {
        let (value, line) = self.map.get(key).cloned().unwrap_or_else(|| ("<default>".into(), self.scenario_line));
        ConfigError::Invalid {
            line,
            key: key.into(),
            value,
            reason: reason.into(),
        }
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.map.get(key) {
            None => Ok(None),
            Some((value, line)) => value.parse::<T>().map(Some).map_err(|e| ConfigError::Invalid {
                line: *line,
                key: key.into(),
                value: value.clone(),
                reason: e.to_string(),
            }),
        }
    }

    fn real(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let x = self.parse::<f64>(key)?.unwrap_or(default);
        if !x.is_finite() {
            return Err(self.invalid(key, "must be finite"));
        }
        Ok(x)
    }

    fn check(&self, key: &str, ok: bool, reason: &str) -> Result<(), ConfigError> {
        if ok {
            Ok(())
        } else {
            Err(self.invalid(key, reason))
        }
    }
}

fn split_lines(text: &str) -> Result<Entries, ConfigError> {
    let mut map: BTreeMap<String, (String, usize)> = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                text: content.into(),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                text: content.into(),
            });
        }
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(ConfigError::UnknownKey { line, key: key.into() });
        }
        if let Some((_, first)) = map.get(key) {
            return Err(ConfigError::Duplicate {
                line,
                key: key.into(),
                first: *first,
            });
        }
        map.insert(key.into(), (value.into(), line));
    }
    let scenario_line = map.get("scenario").map(|(_, l)| *l).unwrap_or(0);
    Ok(Entries { map, scenario_line })
}

struct Defaults {
    n_cells: usize,
    t_end: f64,
    alpha: f64,
    q: f64,
    mass: Option<f64>,
    initial: InitialPreset,
    dt_init: f64,
    collapse_fraction: Option<f64>,
}

fn defaults(s: Scenario) -> Defaults {
    let sim = Defaults {
        n_cells: 256,
        t_end: 20.0,
        alpha: 0.5,
        q: 3.0,
        mass: Some(3.0),
        initial: InitialPreset::Cosine,
        dt_init: 1e-4,
        collapse_fraction: None,
    };
    match s {
        Scenario::Subcritical => sim,
        Scenario::Custom => Defaults { mass: None, ..sim },
        Scenario::Critical => Defaults {
            t_end: 50.0,
            alpha: 1.0,
            mass: Some(0.9),
            ..sim
        },
        Scenario::Blowup | Scenario::ThresholdScan | Scenario::Certificate | Scenario::Inequalities => Defaults {
            n_cells: 1024,
            t_end: 1.0,
            alpha: 2.0,
            q: 5.0,
            mass: None,
            initial: InitialPreset::Eq60,
            dt_init: 1e-6,
            collapse_fraction: Some(0.5),
        },
    }
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let e = split_lines(text)?;
    let scenario: Scenario = e.parse("scenario")?.ok_or_else(|| ConfigError::Missing {
        key: "scenario".into(),
        context: String::new(),
    })?;
    let def = defaults(scenario);
    let needs = |key: &str| ConfigError::Missing {
        key: key.into(),
        context: format!(" for scenario `{}` (line {})", scenario.name(), e.scenario_line),
    };

    let n_cells = e.parse::<usize>("n_cells")?.unwrap_or(def.n_cells);
    e.check("n_cells", n_cells >= GridSpec::MIN_CELLS, "need at least 4 cells")?;
    let t_end = e.real("t_end", def.t_end)?;
    e.check("t_end", t_end > 0.0, "must be > 0")?;
    let chi = e.real("chi", 1.0)?;
    e.check("chi", chi >= 0.0, "must be >= 0")?;
    let eps = e.parse::<f64>("eps")?;
    if let Some(x) = eps {
        e.check("eps", x.is_finite() && x > 0.0, "must be finite and > 0")?;
    }
    let d = e.real("D", 1.0)?;
    e.check("D", d > 0.0, "must be > 0")?;
    let gamma = e.real("gamma", 0.0)?;
    e.check("gamma", gamma >= 0.0, "must be >= 0")?;

    let diffusion_table = e.raw("diffusion_table").map(|(v, _)| PathBuf::from(v));
    let alpha = match (e.parse::<f64>("alpha")?, &diffusion_table) {
        (Some(_), Some(_)) => return Err(e.invalid("alpha", "give either alpha or diffusion_table, not both")),
        (Some(a), None) => Some(a),
        (None, Some(_)) => None,
        (None, None) => Some(def.alpha),
    };
    if let Some(a) = alpha {
        e.check("alpha", a.is_finite() && a >= 0.0, "must be finite and >= 0")?;
        match scenario {
            Scenario::Subcritical => e.check("alpha", a < 1.0, "subcritical runs need alpha < 1")?,
            Scenario::Critical => e.check("alpha", a == 1.0, "critical runs need alpha = 1")?,
            Scenario::Blowup | Scenario::ThresholdScan | Scenario::Certificate => {
                e.check("alpha", a > 1.0, "blowup certificates need an integrable diffusion (alpha > 1)")?
            }
            _ => {}
        }
    } else if matches!(scenario, Scenario::Subcritical | Scenario::Critical) {
        return Err(e.invalid("diffusion_table", "this scenario is defined through alpha"));
    }

    let q = e.real("q", def.q)?;
    let q_min = if matches!(scenario, Scenario::Blowup | Scenario::ThresholdScan | Scenario::Certificate) {
        4.0
    } else {
        2.0
    };
    e.check("q", q > q_min, if q_min == 4.0 { "must be > 4" } else { "must be > 2" })?;

    let mass = e.parse::<f64>("mass")?.or(def.mass);
    if let Some(m) = mass {
        e.check("mass", m.is_finite() && m > 0.0, "must be finite and > 0")?;
        if scenario == Scenario::Critical {
            let limit = critical_mass_threshold(chi.max(f64::MIN_POSITIVE)).unwrap_or(f64::NEG_INFINITY);
            e.check(
                "mass",
                m < limit,
                &format!("critical runs need M < 2/sqrt(chi) - 1 = {limit}"),
            )?;
        }
        if scenario == Scenario::Blowup || e.raw("initial").map(|(v, _)| v == "eq60").unwrap_or(false) {
            e.check("mass", m > 1.0, "the ramp initial data needs M > 1")?;
        }
    } else if scenario == Scenario::Custom && e.raw("initial").map(|(v, _)| v != "file").unwrap_or(true) {
        return Err(needs("mass"));
    }

    let initial = e.parse::<InitialPreset>("initial")?.unwrap_or(def.initial);
    let amplitude = e.real("amplitude", 0.5)?;
    e.check("amplitude", (0.0..1.0).contains(&amplitude), "must lie in [0, 1) to keep u > 0")?;
    let initial_file = e.raw("initial_file").map(|(v, _)| PathBuf::from(v));
    if initial == InitialPreset::File && initial_file.is_none() {
        return Err(needs("initial_file"));
    }

    let dt_init = e.real("dt_init", def.dt_init)?;
    let dt_min = e.real("dt_min", 1e-12)?;
    let dt_max = e.real("dt_max", 1e-2)?;
    for (k, v) in [("dt_init", dt_init), ("dt_min", dt_min), ("dt_max", dt_max)] {
        e.check(k, v > 0.0, "must be > 0")?;
    }
    e.check("dt_init", dt_min <= dt_init && dt_init <= dt_max, "need dt_min <= dt_init <= dt_max")?;
    let cfl = e.real("cfl", 0.4)?;
    e.check("cfl", cfl > 0.0 && cfl <= 0.5, "must lie in (0, 0.5]")?;
    let growth_cap = e.real("growth_cap", 0.1)?;
    e.check("growth_cap", growth_cap > 0.0, "must be > 0")?;
    let max_steps = e.parse::<usize>("max_steps")?.unwrap_or(10_000_000);
    e.check("max_steps", max_steps > 0, "must be > 0")?;
    let blowup_threshold = e.real("blowup_threshold", 1e8)?;
    e.check("blowup_threshold", blowup_threshold > 0.0, "must be > 0")?;
    let collapse_fraction = e.parse::<f64>("collapse_fraction")?.or(def.collapse_fraction);
    if let Some(c) = collapse_fraction {
        e.check("collapse_fraction", c > 0.0 && c <= 1.0, "must lie in (0, 1]")?;
    }
    let sample_cadence = e.real("sample_cadence", t_end / 1000.0)?;
    e.check("sample_cadence", sample_cadence > 0.0, "must be > 0")?;
    let c_tol = e.real("c_tol", ks1d_core::diagnostics::DEFAULT_C_TOL)?;
    e.check("c_tol", c_tol >= 0.0, "must be >= 0")?;

    let search_min = e.real("search_min", 1.5)?;
    let search_max = e.real("search_max", 1e4)?;
    e.check("search_min", search_min > 1.0, "must be > 1")?;
    e.check("search_max", search_max > search_min, "must exceed search_min")?;

    let suite = e.parse::<Suite>("suite")?;
    if scenario == Scenario::Inequalities && suite.is_none() {
        return Err(needs("suite"));
    }
    let delta = e.real("delta", 1.0 / 24.0)?;
    e.check("delta", delta > 0.0, "must be > 0")?;
    let seed = e.parse::<u64>("seed")?.unwrap_or(0);
    let output_dir = e
        .raw("output_dir")
        .map(|(v, _)| PathBuf::from(v))
        .unwrap_or_else(|| PathBuf::from("ks1d-out"));

    Ok(ScenarioConfig {
        scenario,
        n_cells,
        t_end,
        chi,
        eps,
        d,
        gamma,
        alpha,
        diffusion_table,
        q,
        mass,
        initial,
        amplitude,
        initial_file,
        dt_init,
        dt_min,
        dt_max,
        cfl,
        growth_cap,
        max_steps,
        blowup_threshold,
        collapse_fraction,
        sample_cadence,
        c_tol,
        search_min,
        search_max,
        suite,
        delta,
        seed,
        output_dir,
    })
}

/// `text` with every `key = ...` line replaced by `key = value`.
pub fn with_override(text: &str, key: &str, value: &str) -> String {
    let mut out: String = text
        .lines()
        .filter(|line| {
            let content = line.split('#').next().unwrap_or("");
            content.split_once('=').map(|(k, _)| k.trim() != key).unwrap_or(true)
        })
        .map(|line| format!("{line}\n"))
        .collect();
    out.push_str(&format!("{key} = {value}\n"));
    out
}
