//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # comments start with '#'
//! experiment = moments
//! dim = 2
//! grid = 64
//! T = 1
//! levels = 6
//! replicas = 20000
//! seed = 1
//! workers = 4              # optional; default GFF_THINLAB_WORKERS or all cores
//! out = results/moments
//! format = csv             # csv | json
//! strict_paper_constants = false
//! deltas = 0.1,0.5,1       # exceedance normalizations tried by thinness-battery
//! set = shapes/segment.txt # optional set file for thinness-battery
//! ```
//!
//! Keys are case-insensitive (`T` and `t` are the same key). Unknown keys
//! are rejected.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

pub const WORKERS_ENV: &str = "GFF_THINLAB_WORKERS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Sample,
    ExploreBbm,
    ExploreField,
    Moments,
    ThinnessBattery,
    DasValidate,
    GreenChecks,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Sample,
        Experiment::ExploreBbm,
        Experiment::ExploreField,
        Experiment::Moments,
        Experiment::ThinnessBattery,
        Experiment::DasValidate,
        Experiment::GreenChecks,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Sample => "sample",
            Experiment::ExploreBbm => "explore-bbm",
            Experiment::ExploreField => "explore-field",
            Experiment::Moments => "moments",
            Experiment::ThinnessBattery => "thinness-battery",
            Experiment::DasValidate => "das-validate",
            Experiment::GreenChecks => "green-checks",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
                Error::Config(format!(
                    "experiment: unknown name '{s}' (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Config(format!(
                "format: expected csv or json, got '{s}'"
            ))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub dim: usize,
    pub grid: usize,
    /// Branching time scale of the BBM surrogate. Field-coupled runs
    /// measure their clock from the operator instead.
    #[serde(rename = "T")]
    pub t: f64,
    pub levels: usize,
    pub replicas: usize,
    pub seed: u64,
    /// `None` resolves through [`WORKERS_ENV`], then the core count.
    pub workers: Option<usize>,
    pub out: PathBuf,
    pub format: Format,
    pub strict_paper_constants: bool,
    pub deltas: Vec<f64>,
    pub set: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        ExperimentConfig {
            experiment,
            dim: 2,
            grid: 64,
            t: 1.0,
            levels: 4,
            replicas: 200,
            seed: 1,
            workers: None,
            out: PathBuf::from("out"),
            format: Format::Csv,
            strict_paper_constants: false,
            deltas: vec![0.1, 0.5, 1.0],
            set: None,
        }
    }

    /// Parse a configuration file. `experiment` may be omitted when the
    /// caller supplies it (the CLI subcommand does).
    pub fn parse(text: &str, experiment: Option<Experiment>) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut exp = experiment;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected 'key = value', got '{line}'",
                    no + 1
                ))
            })?;
            let (k, v) = (k.trim().to_ascii_lowercase(), v.trim().to_string());
            if k == "experiment" {
                let named: Experiment = v.parse()?;
                if let Some(e) = experiment {
                    if e != named {
                        return Err(Error::Config(format!(
                            "experiment: file names '{named}' but '{e}' was requested"
                        )));
                    }
                }
                exp = Some(named);
            } else {
                pairs.push((k, v));
            }
        }
        let exp = exp.ok_or_else(|| Error::Config("experiment: missing".into()))?;
        let mut cfg = ExperimentConfig::new(exp);
        for (k, v) in pairs {
            cfg.set_key(&k, &v)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path, experiment: Option<Experiment>) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("config: cannot read {}: {e}", path.display())))?;
        Self::parse(&text, experiment)
    }

    /// Set one key from its textual value.
    pub fn set_key(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
        }
        match key {
            "dim" | "d" => self.dim = num(key, value)?,
            "grid" | "m" => self.grid = num(key, value)?,
            "t" => self.t = num(key, value)?,
            "levels" | "n_max" => self.levels = num(key, value)?,
            "replicas" => self.replicas = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "workers" => self.workers = Some(num(key, value)?),
            "out" => self.out = PathBuf::from(value),
            "format" => self.format = value.parse()?,
            "strict_paper_constants" | "strict" => {
                self.strict_paper_constants = match value {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => {
                        return Err(Error::Config(format!(
                            "{key}: expected true or false, got '{value}'"
                        )))
                    }
                }
            }
            "deltas" => {
                self.deltas = value
                    .split(',')
                    .map(|s| num::<f64>(key, s.trim()))
                    .collect::<Result<_>>()?
            }
            "set" => self.set = Some(PathBuf::from(value)),
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::Config(format!("{field}: {msg}")));
        if !(2..=4).contains(&self.dim) {
            return bad("dim", format!("must be 2, 3 or 4, got {}", self.dim));
        }
        if self.grid < 4 || !self.grid.is_power_of_two() {
            return bad(
                "grid",
                format!("must be a power of two >= 4, got {}", self.grid),
            );
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return bad("T", format!("must be positive, got {}", self.t));
        }
        if self.levels == 0 {
            return bad("levels", "must be positive".into());
        }
        if self.replicas == 0 {
            return bad("replicas", "must be positive".into());
        }
        if self.experiment == Experiment::Moments && self.replicas < 100 {
            return bad(
                "replicas",
                format!("moments needs at least 100, got {}", self.replicas),
            );
        }
        if self.workers == Some(0) {
            return bad("workers", "must be positive".into());
        }
        if self.deltas.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return bad("deltas", "entries must be positive".into());
        }
        Ok(())
    }

    /// Worker count after applying the environment default.
    pub fn resolved_workers(&self) -> Result<usize> {
        if let Some(w) = self.workers {
            return Ok(w);
        }
        match std::env::var(WORKERS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(w) if w > 0 => Ok(w),
                _ => Err(Error::Config(format!(
                    "{WORKERS_ENV}: expected a positive integer, got '{v}'"
                ))),
            },
            Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        }
    }

    /// The configuration as a file that [`ExperimentConfig::parse`] reads back.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment = {}", self.experiment);
        let _ = writeln!(s, "dim = {}", self.dim);
        let _ = writeln!(s, "grid = {}", self.grid);
        let _ = writeln!(s, "T = {}", self.t);
        let _ = writeln!(s, "levels = {}", self.levels);
        let _ = writeln!(s, "replicas = {}", self.replicas);
        let _ = writeln!(s, "seed = {}", self.seed);
        if let Some(w) = self.workers {
            let _ = writeln!(s, "workers = {w}");
        }
        let _ = writeln!(s, "out = {}", self.out.display());
        let _ = writeln!(s, "format = {}", self.format);
        let _ = writeln!(
            s,
            "strict_paper_constants = {}",
            self.strict_paper_constants
        );
        let deltas: Vec<String> = self.deltas.iter().map(f64::to_string).collect();
        let _ = writeln!(s, "deltas = {}", deltas.join(","));
        if let Some(p) = &self.set {
            let _ = writeln!(s, "set = {}", p.display());
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let text =
            "experiment = moments\nT = 0.5\nreplicas=300 # trailing\nset = a.txt\nworkers = 3\n";
        let cfg = ExperimentConfig::parse(text, None).unwrap();
        assert_eq!(cfg.t, 0.5);
        assert_eq!(cfg.replicas, 300);
        assert_eq!(ExperimentConfig::parse(&cfg.to_text(), None).unwrap(), cfg);
    }

    #[test]
    fn field_level_messages() {
        let err = |t: &str| {
            ExperimentConfig::parse(t, Some(Experiment::Sample))
                .and_then(|c| c.validate())
                .unwrap_err()
                .to_string()
        };
        assert!(err("grid = 100").contains("grid"));
        assert!(err("dim = 7").contains("dim"));
        assert!(err("colour = red").contains("unknown key"));
        assert!(err("experiment = moments").contains("experiment"));
        assert!(ExperimentConfig::parse("dim = 2", None).is_err());
    }
}
