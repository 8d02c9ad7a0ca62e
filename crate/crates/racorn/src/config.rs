//! Run configuration: a flat key-value file with sections and comments, CLI
//! overrides layered on top, and defaults equal to the published parameter
//! settings so an empty file reproduces them.
//!
//! ```text
//! # comment
//! [data]
//! data_path = data/djia.csv
//! data_mode = relatives
//!
//! [grids]
//! w_grid = 1:5:1
//! rho_grid = 0.0:0.9:0.1
//! lambda_grid = 0.0,0.01,0.02,0.03
//! top_fraction = 0.1
//! inner_weighting = unnormalized
//! ```
//!
//! Sections are organizational only; keys live in one flat namespace and
//! unknown keys (and sections) are rejected with a nearest-match suggestion.
//! Numeric grids accept comma lists (`0,0.01,0.02`) and inclusive ranges
//! (`start:end:step`).

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;

use crate::csv::InputMode;
use crate::ensemble::{EnsembleConfig, InnerWeighting, StrategyKind};
use crate::error::{Error, Result};
use crate::opt::SolverOptions;

/// Every accepted key, its section, and a short description (used by docs
/// and by the unknown-key suggestion).
pub const KNOWN_KEYS: &[(&str, &str, &str)] = &[
    ("data_path", "data", "path to the dataset CSV"),
    ("data_mode", "data", "`prices` or `relatives`"),
    ("strategies", "run", "comma list: corn-k, racorn-k, racorn-c-k, ubah, ucrp, eg"),
    ("output_dir", "run", "directory for report files"),
    ("workers", "run", "worker threads, 0 = all cores"),
    ("w_grid", "grids", "window widths, list or start:end:step"),
    ("rho_grid", "grids", "correlation thresholds in [0, 1)"),
    ("lambda_grid", "grids", "risk-aversion values (unset: per-strategy default)"),
    ("top_fraction", "grids", "fraction of experts kept, in (0, 1]"),
    ("inner_weighting", "grids", "`unnormalized` or `normalized`"),
    ("tolerance", "solver", "projected-gradient stop tolerance"),
    ("max_iterations", "solver", "solver iteration cap"),
    ("smoothing_epsilon", "solver", "variance smoothing in the gradient path"),
    ("risk_free_rate", "metrics", "annual risk-free rate"),
    ("periods_per_year", "metrics", "annualization factor"),
    ("eg_eta", "metrics", "learning rate of the EG baseline"),
];

const KNOWN_SECTIONS: &[&str] = &["data", "run", "grids", "solver", "metrics"];

/// Levenshtein distance, for near-miss suggestions.
fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, &ca) in a.iter().enumerate() {
        let mut row = vec![i + 1];
        for (j, &cb) in b.iter().enumerate() {
            let cost = usize::from(ca != cb);
            row.push((prev[j] + cost).min(prev[j + 1] + 1).min(row[j] + 1));
        }
        prev = row;
    }
    prev[b.len()]
}

fn suggest<'a>(unknown: &str, candidates: impl Iterator<Item = &'a str>) -> Option<&'a str> {
    candidates
        .map(|c| (edit_distance(unknown, c), c))
        .filter(|(d, _)| *d <= 3)
        .min_by_key(|(d, _)| *d)
        .map(|(_, c)| c)
}

/// Raw `key = value` pairs from one config file, in first-seen order.
#[derive(Debug, Default, Clone)]
pub struct ConfigOverrides {
    values: BTreeMap<String, String>,
}

impl ConfigOverrides {
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Insert one `key = value` override, validating the key name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KNOWN_KEYS.iter().any(|(k, _, _)| *k == key) {
            let mut message = format!("unknown key `{key}`");
            if let Some(s) = suggest(key, KNOWN_KEYS.iter().map(|(k, _, _)| *k)) {
                message.push_str(&format!(", did you mean `{s}`?"));
            }
            return Err(Error::InvalidConfig(message));
        }
        if self.values.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::InvalidConfig(format!("duplicate key `{key}`")));
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Parse a config file body. Unknown keys and sections are rejected before
/// any computation runs.
pub fn parse_config_str(text: &str) -> Result<ConfigOverrides> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut overrides = ConfigOverrides::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw.find(['#', ';']) {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let content = content.trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return Err(Error::Config {
                    line,
                    message: format!("malformed section header `{content}`"),
                });
            };
            let name = name.trim();
            if !KNOWN_SECTIONS.contains(&name) {
                let mut message = format!("unknown section `[{name}]`");
                if let Some(s) = suggest(name, KNOWN_SECTIONS.iter().copied()) {
                    message.push_str(&format!(", did you mean `[{s}]`?"));
                }
                return Err(Error::Config { line, message });
            }
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Config {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            });
        };
        overrides
            .set(key.trim(), value.trim())
            .map_err(|e| match e {
                Error::InvalidConfig(message) => Error::Config { line, message },
                other => other,
            })?;
    }
    Ok(overrides)
}

pub fn load_config(path: impl AsRef<std::path::Path>) -> Result<ConfigOverrides> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text).map_err(|e| e.in_file(path.display().to_string()))
}

/// Which strategies a run covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyChoice {
    Ensemble(StrategyKind),
    Ubah,
    Ucrp,
    Eg,
}

impl StrategyChoice {
    pub fn parse(s: &str) -> Result<StrategyChoice> {
        match s.to_ascii_lowercase().as_str() {
            "corn-k" | "cornk" => Ok(StrategyChoice::Ensemble(StrategyKind::CornK)),
            "racorn-k" | "racornk" => Ok(StrategyChoice::Ensemble(StrategyKind::RacornK)),
            "racorn-c-k" | "racorn(c)-k" | "racornck" => {
                Ok(StrategyChoice::Ensemble(StrategyKind::RacornCK))
            }
            "ubah" => Ok(StrategyChoice::Ubah),
            "ucrp" => Ok(StrategyChoice::Ucrp),
            "eg" => Ok(StrategyChoice::Eg),
            other => Err(Error::InvalidConfig(format!(
                "unknown strategy `{other}` (expected corn-k, racorn-k, racorn-c-k, ubah, ucrp, or eg)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            StrategyChoice::Ensemble(kind) => kind.name(),
            StrategyChoice::Ubah => "UBAH",
            StrategyChoice::Ucrp => "UCRP",
            StrategyChoice::Eg => "EG",
        }
    }

    /// Lower-case token used in file names and CLI arguments.
    pub fn slug(&self) -> &'static str {
        match self {
            StrategyChoice::Ensemble(StrategyKind::CornK) => "corn-k",
            StrategyChoice::Ensemble(StrategyKind::RacornK) => "racorn-k",
            StrategyChoice::Ensemble(StrategyKind::RacornCK) => "racorn-c-k",
            StrategyChoice::Ubah => "ubah",
            StrategyChoice::Ucrp => "ucrp",
            StrategyChoice::Eg => "eg",
        }
    }
}

/// A fully resolved run configuration: defaults, then file, then CLI
/// overrides.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub data_path: Option<PathBuf>,
    pub data_mode: Option<InputMode>,
    pub strategies: Vec<StrategyChoice>,
    pub window_grid: Vec<usize>,
    pub threshold_grid: Vec<f64>,
    /// `None` means each strategy uses its published default grid.
    pub lambda_grid: Option<Vec<f64>>,
    pub top_fraction: f64,
    pub inner_weighting: InnerWeighting,
    pub solver: SolverOptions,
    pub risk_free_rate: f64,
    pub periods_per_year: f64,
    pub eg_eta: f64,
    pub output_dir: Option<PathBuf>,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let base = EnsembleConfig::defaults(StrategyKind::CornK);
        RunConfig {
            data_path: None,
            data_mode: None,
            strategies: vec![
                StrategyChoice::Ensemble(StrategyKind::CornK),
                StrategyChoice::Ensemble(StrategyKind::RacornK),
                StrategyChoice::Ensemble(StrategyKind::RacornCK),
            ],
            window_grid: base.window_grid,
            threshold_grid: base.threshold_grid,
            lambda_grid: None,
            top_fraction: base.top_fraction,
            inner_weighting: base.inner_weighting,
            solver: SolverOptions::default(),
            risk_free_rate: 0.0,
            periods_per_year: 252.0,
            eg_eta: 0.05,
            output_dir: None,
            workers: 0,
        }
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value.parse::<f64>().map_err(|_| {
        Error::InvalidConfig(format!("`{key}` expects a number, got `{value}`"))
    })
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value.parse::<usize>().map_err(|_| {
        Error::InvalidConfig(format!("`{key}` expects a non-negative integer, got `{value}`"))
    })
}

/// Parse `a,b,c` or the inclusive range `start:end:step`.
pub fn parse_f64_list(key: &str, value: &str) -> Result<Vec<f64>> {
    if value.contains(':') {
        let parts: Vec<&str> = value.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidConfig(format!(
                "`{key}` range syntax is start:end:step, got `{value}`"
            )));
        }
        let start = parse_f64(key, parts[0].trim())?;
        let end = parse_f64(key, parts[1].trim())?;
        let step = parse_f64(key, parts[2].trim())?;
        if !(step > 0.0) || end < start {
            return Err(Error::InvalidConfig(format!(
                "`{key}` range needs end >= start and step > 0, got `{value}`"
            )));
        }
        let count = ((end - start) / step).round() as usize;
        if ((start + count as f64 * step) - end).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "`{key}` range `{value}` does not land on its end value"
            )));
        }
        return Ok((0..=count).map(|k| start + k as f64 * step).collect());
    }
    value
        .split(',')
        .map(|cell| parse_f64(key, cell.trim()))
        .collect()
}

pub fn parse_usize_list(key: &str, value: &str) -> Result<Vec<usize>> {
    if value.contains(':') {
        let parts: Vec<&str> = value.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidConfig(format!(
                "`{key}` range syntax is start:end:step, got `{value}`"
            )));
        }
        let start = parse_usize(key, parts[0].trim())?;
        let end = parse_usize(key, parts[1].trim())?;
        let step = parse_usize(key, parts[2].trim())?;
        if step == 0 || end < start {
            return Err(Error::InvalidConfig(format!(
                "`{key}` range needs end >= start and step > 0, got `{value}`"
            )));
        }
        return Ok((start..=end).step_by(step).collect());
    }
    value
        .split(',')
        .map(|cell| parse_usize(key, cell.trim()))
        .collect()
}

impl RunConfig {
    /// Apply one layer of overrides on top of this configuration.
    pub fn apply(&mut self, overrides: &ConfigOverrides) -> Result<()> {
        if let Some(v) = overrides.get("data_path") {
            self.data_path = Some(PathBuf::from(v));
        }
        if let Some(v) = overrides.get("data_mode") {
            self.data_mode = Some(InputMode::parse(v)?);
        }
        if let Some(v) = overrides.get("strategies") {
            self.strategies = v
                .split(',')
                .map(|s| StrategyChoice::parse(s.trim()))
                .collect::<Result<Vec<_>>>()?;
            if self.strategies.is_empty() {
                return Err(Error::InvalidConfig("`strategies` is empty".into()));
            }
        }
        if let Some(v) = overrides.get("output_dir") {
            self.output_dir = Some(PathBuf::from(v));
        }
        if let Some(v) = overrides.get("workers") {
            self.workers = parse_usize("workers", v)?;
        }
        if let Some(v) = overrides.get("w_grid") {
            self.window_grid = parse_usize_list("w_grid", v)?;
        }
        if let Some(v) = overrides.get("rho_grid") {
            self.threshold_grid = parse_f64_list("rho_grid", v)?;
        }
        if let Some(v) = overrides.get("lambda_grid") {
            self.lambda_grid = Some(parse_f64_list("lambda_grid", v)?);
        }
        if let Some(v) = overrides.get("top_fraction") {
            self.top_fraction = parse_f64("top_fraction", v)?;
        }
        if let Some(v) = overrides.get("inner_weighting") {
            self.inner_weighting = InnerWeighting::parse(v)?;
        }
        if let Some(v) = overrides.get("tolerance") {
            self.solver.tolerance = parse_f64("tolerance", v)?;
        }
        if let Some(v) = overrides.get("max_iterations") {
            self.solver.max_iterations = parse_usize("max_iterations", v)?;
        }
        if let Some(v) = overrides.get("smoothing_epsilon") {
            self.solver.smoothing_eps = parse_f64("smoothing_epsilon", v)?;
        }
        if let Some(v) = overrides.get("risk_free_rate") {
            self.risk_free_rate = parse_f64("risk_free_rate", v)?;
        }
        if let Some(v) = overrides.get("periods_per_year") {
            self.periods_per_year = parse_f64("periods_per_year", v)?;
        }
        if let Some(v) = overrides.get("eg_eta") {
            self.eg_eta = parse_f64("eg_eta", v)?;
        }
        Ok(())
    }

    /// The ensemble configuration one strategy runs with; resolves the
    /// per-strategy risk-aversion default when no grid was given.
    pub fn ensemble_config(&self, kind: StrategyKind) -> EnsembleConfig {
        let defaults = EnsembleConfig::defaults(kind);
        EnsembleConfig {
            strategy: kind,
            window_grid: self.window_grid.clone(),
            threshold_grid: self.threshold_grid.clone(),
            lambda_grid: self
                .lambda_grid
                .clone()
                .unwrap_or(defaults.lambda_grid),
            top_fraction: self.top_fraction,
            inner_weighting: self.inner_weighting,
            solver: self.solver,
        }
    }

    /// The provenance echo embedded in every report: all keys that affect
    /// results, with the strategy's effective risk-aversion grid resolved.
    /// Execution details (worker count, output directory) are excluded so
    /// machine reports stay byte-identical across runs and worker counts.
    pub fn echo(&self, choice: StrategyChoice) -> ConfigEcho {
        let lambda_grid = match choice {
            StrategyChoice::Ensemble(kind) => self.ensemble_config(kind).lambda_grid,
            _ => Vec::new(),
        };
        ConfigEcho {
            data_path: self
                .data_path
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
            data_mode: self.data_mode.map(|m| m.to_string()).unwrap_or_default(),
            strategy: choice.slug().to_string(),
            w_grid: self.window_grid.clone(),
            rho_grid: self.threshold_grid.clone(),
            lambda_grid,
            top_fraction: self.top_fraction,
            inner_weighting: self.inner_weighting.as_str().to_string(),
            tolerance: self.solver.tolerance,
            max_iterations: self.solver.max_iterations,
            smoothing_epsilon: self.solver.smoothing_eps,
            risk_free_rate: self.risk_free_rate,
            periods_per_year: self.periods_per_year,
            eg_eta: self.eg_eta,
        }
    }
}

/// The resolved configuration snapshot a report carries.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ConfigEcho {
    pub data_path: String,
    pub data_mode: String,
    pub strategy: String,
    pub w_grid: Vec<usize>,
    pub rho_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    pub top_fraction: f64,
    pub inner_weighting: String,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub smoothing_epsilon: f64,
    pub risk_free_rate: f64,
    pub periods_per_year: f64,
    pub eg_eta: f64,
}
