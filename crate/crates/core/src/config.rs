//! Flat `key = value` run configuration.
//!
//! ```text
//! # comments start with '#'
//! params.sigma_a = 0.0197
//! detectors = 10, 40, 49.5
//! case.3.sigma_a_rel = 0.15
//! ```
//!
//! Unknown or repeated keys are errors. Any `case.*` key replaces the five
//! standard cases with the ones defined in the file; a case's missing
//! relative deviations default to zero.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    ModelParameters, NOMINAL_DETECTORS, NOMINAL_DIFF_COEFF, NOMINAL_HALF_THICKNESS, NOMINAL_SIGMA_A,
    NOMINAL_SIGMA_D, NOMINAL_SOURCE_Q,
};
use crate::uncertainty::UncertaintyCase;
use crate::verification::Tolerances;

pub const DEFAULT_GRID: usize = 4001;
pub const DEFAULT_SEED: u64 = 20_240_601;

/// Which output files to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Tsv,
    Json,
    Both,
}

impl OutputFormat {
    pub fn tsv(self) -> bool {
        matches!(self, OutputFormat::Tsv | OutputFormat::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "tsv" => Ok(OutputFormat::Tsv),
            "json" => Ok(OutputFormat::Json),
            "both" => Ok(OutputFormat::Both),
            other => Err(Error::Config(format!("unknown output format '{other}' (expected tsv, json or both)"))),
        }
    }
}

/// Everything one run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub sigma_a: f64,
    pub diff_coeff: f64,
    pub source_q: f64,
    pub sigma_d: f64,
    pub half_thickness: f64,
    pub detectors: Vec<f64>,
    pub cases: Vec<UncertaintyCase>,
    pub n_nodes: usize,
    pub tolerances: Tolerances,
    pub output_dir: PathBuf,
    pub format: OutputFormat,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sigma_a: NOMINAL_SIGMA_A,
            diff_coeff: NOMINAL_DIFF_COEFF,
            source_q: NOMINAL_SOURCE_Q,
            sigma_d: NOMINAL_SIGMA_D,
            half_thickness: NOMINAL_HALF_THICKNESS,
            detectors: NOMINAL_DETECTORS.to_vec(),
            cases: UncertaintyCase::standard_cases(),
            n_nodes: DEFAULT_GRID,
            tolerances: Tolerances::default(),
            output_dir: PathBuf::from("out"),
            format: OutputFormat::Both,
            seed: DEFAULT_SEED,
        }
    }
}

/// The default configuration written out as text.
pub const DEFAULT_CONFIG_TEXT: &str = "\
# slab: half thickness in cm, cross sections in 1/cm, D in cm, Q in 1/(cm^3 s)
params.sigma_a = 0.0197
params.diff_coeff = 0.16
params.source_q = 1e7
params.sigma_d = 7.438
params.half_thickness = 50

# detector positions in cm
detectors = 10, 40, 49.5, -10, -40, -49.5

grid.n_nodes = 4001

# relative standard deviations
case.1.source_q_rel = 0.15
case.2.sigma_d_rel = 0.15
case.3.sigma_a_rel = 0.15
case.4.diff_coeff_rel = 0.15
case.5.sigma_a_rel = 0.10
case.5.diff_coeff_rel = 0.10
case.5.source_q_rel = 0.10
case.5.sigma_d_rel = 0.10

output.dir = out
output.format = both
seed = 20240601
";

fn config_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {line}: {msg}"))
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64> {
    value
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| config_err(line, format!("{key}: '{value}' is not a finite number")))
}

fn parse_usize(line: usize, key: &str, value: &str) -> Result<usize> {
    value.trim().parse().map_err(|_| config_err(line, format!("{key}: '{value}' is not a non-negative integer")))
}

const CASE_FIELDS: [&str; 4] = ["sigma_a_rel", "diff_coeff_rel", "source_q_rel", "sigma_d_rel"];

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        text.parse()
    }

    /// Nominal parameters with the detector at `b`.
    pub fn params_at(&self, b: f64) -> Result<ModelParameters> {
        ModelParameters::new(self.sigma_a, self.diff_coeff, self.source_q, self.sigma_d, self.half_thickness, b)
    }

    /// Checks the invariants that do not depend on the grid.
    pub fn validate(&self) -> Result<()> {
        if self.detectors.is_empty() {
            return Err(Error::Config("at least one detector position is required".into()));
        }
        if self.n_nodes < 3 {
            return Err(Error::Config(format!("grid.n_nodes = {} is below the minimum of 3", self.n_nodes)));
        }
        for &b in &self.detectors {
            self.params_at(b).map_err(|e| Error::Config(e.to_string()))?;
        }
        for case in &self.cases {
            UncertaintyCase::new(case.name.clone(), case.rel_std).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }
}

impl FromStr for RunConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeMap::new();
        let mut cases: BTreeMap<u32, [f64; 4]> = BTreeMap::new();
        let mut case_names: BTreeMap<u32, String> = BTreeMap::new();

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| config_err(line, "expected 'key = value'"))?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(first) = seen.insert(key.to_string(), line) {
                return Err(config_err(line, format!("duplicate key '{key}' (first set on line {first})")));
            }
            let t = &mut cfg.tolerances;
            match key {
                "params.sigma_a" => cfg.sigma_a = parse_f64(line, key, value)?,
                "params.diff_coeff" => cfg.diff_coeff = parse_f64(line, key, value)?,
                "params.source_q" => cfg.source_q = parse_f64(line, key, value)?,
                "params.sigma_d" => cfg.sigma_d = parse_f64(line, key, value)?,
                "params.half_thickness" => cfg.half_thickness = parse_f64(line, key, value)?,
                "detectors" => {
                    cfg.detectors = if value.is_empty() {
                        Vec::new()
                    } else {
                        value.split(',').map(|v| parse_f64(line, key, v)).collect::<Result<_>>()?
                    }
                }
                "grid.n_nodes" => cfg.n_nodes = parse_usize(line, key, value)?,
                "tolerance.fd_first" => t.fd_first = parse_f64(line, key, value)?,
                "tolerance.fd_second" => t.fd_second = parse_f64(line, key, value)?,
                "tolerance.cross_path" => t.cross_path = parse_f64(line, key, value)?,
                "tolerance.symmetry_quadrature" => t.symmetry_quadrature = parse_f64(line, key, value)?,
                "tolerance.symmetry_closed_form" => t.symmetry_closed_form = parse_f64(line, key, value)?,
                "tolerance.duality" => t.duality = parse_f64(line, key, value)?,
                "tolerance.convergence_order" => t.convergence_order = parse_f64(line, key, value)?,
                "output.dir" => cfg.output_dir = PathBuf::from(value),
                "output.format" => cfg.format = value.parse().map_err(|e: Error| config_err(line, e))?,
                "seed" => cfg.seed = value.parse().map_err(|_| config_err(line, format!("seed: '{value}' is not an unsigned integer")))?,
                _ => {
                    let parts: Vec<&str> = key.split('.').collect();
                    match parts.as_slice() {
                        ["case", n, field] => {
                            let n: u32 = n.parse().map_err(|_| config_err(line, format!("case index '{n}' is not an integer")))?;
                            if *field == "name" {
                                case_names.insert(n, value.to_string());
                            } else {
                                let slot = CASE_FIELDS
                                    .iter()
                                    .position(|f| f == field)
                                    .ok_or_else(|| config_err(line, format!("unknown case field '{field}'")))?;
                                cases.entry(n).or_insert([0.0; 4])[slot] = parse_f64(line, key, value)?;
                            }
                        }
                        _ => return Err(config_err(line, format!("unknown key '{key}'"))),
                    }
                }
            }
        }

        if !cases.is_empty() || !case_names.is_empty() {
            for n in case_names.keys() {
                cases.entry(*n).or_insert([0.0; 4]);
            }
            cfg.cases = cases
                .into_iter()
                .map(|(n, rel)| {
                    let name = case_names.remove(&n).unwrap_or_else(|| format!("case {n}"));
                    UncertaintyCase::new(name, rel).map_err(|e| Error::Config(e.to_string()))
                })
                .collect::<Result<_>>()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_text_matches_default_config() {
        let parsed: RunConfig = DEFAULT_CONFIG_TEXT.parse().unwrap();
        assert_eq!(parsed, RunConfig::default());
    }

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!("".parse::<RunConfig>().unwrap(), RunConfig::default());
    }

    #[test]
    fn dotted_keys_and_lists() {
        let cfg: RunConfig = "params.sigma_a = 0.02 # tweak\ndetectors = 5, -5\ncase.7.diff_coeff_rel = 0.2\ncase.7.name = D only\n"
            .parse()
            .unwrap();
        assert_eq!(cfg.sigma_a, 0.02);
        assert_eq!(cfg.detectors, vec![5.0, -5.0]);
        assert_eq!(cfg.cases.len(), 1);
        assert_eq!(cfg.cases[0].name, "D only");
        assert_eq!(cfg.cases[0].rel_std, [0.0, 0.2, 0.0, 0.0]);
    }

    #[test]
    fn errors_are_reported_with_lines() {
        let err = |text: &str| match text.parse::<RunConfig>() {
            Err(Error::Config(msg)) => msg,
            other => panic!("expected config error, got {other:?}"),
        };
        assert!(err("detectors =").contains("at least one detector"));
        assert!(err("\nbogus = 1").starts_with("line 2"));
        assert!(err("seed = 1\nseed = 2").contains("duplicate"));
        assert!(err("params.sigma_a = abc").contains("not a finite number"));
        assert!(err("detectors = 60").contains("detector_b"));
        assert!(err("case.1.foo_rel = 0.1").contains("unknown case field"));
        assert!(err("output.format = xml").contains("unknown output format"));
        assert!(err("no equals sign").contains("key = value"));
        assert!(err("case.2.sigma_a_rel = -0.1").contains("non-negative"));
    }
}
