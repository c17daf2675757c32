//! Flat `key = value` run files.
//!
//! ```text
//! # comments start with '#'
//! scenario.name = bouncing_seeker
//! param.omega = 1000
//! param.x0 = [10, 0]
//! solver.t_max = 40
//! sweep.param = omega
//! sweep.values = 10, 100, 1000
//! compare.tau = 20
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hyseek_core::scenarios::ParamValue;
use hyseek_core::{JumpPolicy, SolverConfig};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("`{key}`: {msg}")]
    Value { key: String, msg: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
}

fn value_err(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        msg: msg.into(),
    }
}

/// Solver fields a run file may override. Unset fields keep the scenario's
/// recommended value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverOverrides {
    pub h: Option<f64>,
    pub t_max: Option<f64>,
    pub j_max: Option<usize>,
    pub tol_mem: Option<f64>,
    pub tol_event: Option<f64>,
    pub sample_stride: Option<usize>,
    pub jump_policy: Option<JumpPolicy>,
}

impl SolverOverrides {
    pub fn apply(&self, cfg: &mut SolverConfig) {
        if let Some(v) = self.h {
            cfg.h = v;
        }
        if let Some(v) = self.t_max {
            cfg.t_max = v;
        }
        if let Some(v) = self.j_max {
            cfg.j_max = v;
        }
        if let Some(v) = self.tol_mem {
            cfg.tol_mem = v;
        }
        if let Some(v) = self.tol_event {
            cfg.tol_event = v;
        }
        if let Some(v) = self.sample_stride {
            cfg.sample_stride = v;
        }
        if let Some(v) = self.jump_policy {
            cfg.jump_policy = v;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Compare {
    pub tau: Option<f64>,
    pub eps_grid: Option<Vec<f64>>,
    /// Coordinates of the reference arc used for the distance.
    pub mask: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: String,
    pub params: BTreeMap<String, ParamValue>,
    pub solver: SolverOverrides,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub write_csv: bool,
    pub write_report: bool,
    pub sweep: Option<Sweep>,
    pub compare: Compare,
}

impl RunConfig {
    pub fn for_scenario(name: &str) -> Self {
        Self {
            scenario: name.to_string(),
            params: BTreeMap::new(),
            solver: SolverOverrides::default(),
            seed: 0,
            out_dir: None,
            write_csv: true,
            write_report: true,
            sweep: None,
            compare: Compare {
                tau: None,
                eps_grid: None,
                mask: None,
            },
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut pairs = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: k + 1,
                    msg: format!("expected `key = value`, got `{line}`"),
                });
            };
            pairs.push((key.trim().to_string(), value.trim().to_string()));
        }
        let mut cfg = Self::for_scenario("");
        let mut named = false;
        let mut sweep_param = None;
        let mut sweep_values = None;
        for (key, value) in &pairs {
            cfg.set(key, value, &mut named, &mut sweep_param, &mut sweep_values)?;
        }
        if !named {
            return Err(ConfigError::Missing("scenario.name"));
        }
        cfg.sweep = match (sweep_param, sweep_values) {
            (None, None) => None,
            (Some(param), Some(values)) => Some(Sweep { param, values }),
            (None, Some(_)) => return Err(ConfigError::Missing("sweep.param")),
            (Some(_), None) => return Err(ConfigError::Missing("sweep.values")),
        };
        Ok(cfg)
    }

    /// Applies one `key = value` pair, as from the command line.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), ConfigError> {
        let Some((key, value)) = pair.split_once('=') else {
            return Err(value_err(pair, "expected `key=value`"));
        };
        let (key, value) = (key.trim(), value.trim());
        let (mut named, mut sp, mut sv) = (true, None, None);
        self.set(key, value, &mut named, &mut sp, &mut sv)?;
        if sp.is_some() || sv.is_some() {
            let mut sweep = self.sweep.take().unwrap_or(Sweep {
                param: String::new(),
                values: Vec::new(),
            });
            if let Some(p) = sp {
                sweep.param = p;
            }
            if let Some(v) = sv {
                sweep.values = v;
            }
            self.sweep = Some(sweep);
        }
        Ok(())
    }

    fn set(
        &mut self,
        key: &str,
        value: &str,
        named: &mut bool,
        sweep_param: &mut Option<String>,
        sweep_values: &mut Option<Vec<f64>>,
    ) -> Result<(), ConfigError> {
        if let Some(p) = key.strip_prefix("param.") {
            let v = parse_list(key, value)?;
            let pv = if value.trim_start().starts_with('[') {
                ParamValue::Vector(v)
            } else if v.len() == 1 {
                ParamValue::Scalar(v[0])
            } else {
                ParamValue::Vector(v)
            };
            self.params.insert(p.to_string(), pv);
            return Ok(());
        }
        match key {
            "scenario.name" => {
                if value.is_empty() {
                    return Err(value_err(key, "empty scenario name"));
                }
                self.scenario = value.to_string();
                *named = true;
            }
            "solver.h" => self.solver.h = Some(positive(key, value)?),
            "solver.t_max" => self.solver.t_max = Some(number(key, value)?),
            "solver.j_max" => self.solver.j_max = Some(integer(key, value)?),
            "solver.tol_mem" => self.solver.tol_mem = Some(number(key, value)?),
            "solver.tol_event" => self.solver.tol_event = Some(positive(key, value)?),
            "solver.sample_stride" => self.solver.sample_stride = Some(integer(key, value)?),
            "solver.jump_policy" => {
                self.solver.jump_policy = Some(match value {
                    "jump-first" => JumpPolicy::JumpFirst,
                    "flow-first" => JumpPolicy::FlowFirst,
                    _ => return Err(value_err(key, "expected `jump-first` or `flow-first`")),
                })
            }
            "solver.seed" => self.seed = integer(key, value)?,
            "output.dir" => self.out_dir = Some(PathBuf::from(value)),
            "output.csv" => self.write_csv = boolean(key, value)?,
            "output.report" => self.write_report = boolean(key, value)?,
            "sweep.param" => *sweep_param = Some(value.to_string()),
            "sweep.values" => *sweep_values = Some(parse_list(key, value)?),
            "compare.tau" => self.compare.tau = Some(positive(key, value)?),
            "compare.eps_grid" => self.compare.eps_grid = Some(parse_list(key, value)?),
            "compare.mask" => {
                let raw = parse_list(key, value)?;
                if raw.iter().any(|v| v.fract() != 0.0 || *v < 0.0) {
                    return Err(value_err(key, "expected non-negative indices"));
                }
                self.compare.mask = Some(raw.into_iter().map(|v| v as usize).collect());
            }
            _ => return Err(value_err(key, "unknown key")),
        }
        Ok(())
    }
}

fn number(key: &str, s: &str) -> Result<f64, ConfigError> {
    let v: f64 = s.parse().map_err(|_| value_err(key, format!("`{s}` is not a number")))?;
    if !v.is_finite() {
        return Err(value_err(key, "must be finite"));
    }
    Ok(v)
}

fn positive(key: &str, s: &str) -> Result<f64, ConfigError> {
    let v = number(key, s)?;
    if v <= 0.0 {
        return Err(value_err(key, "must be positive"));
    }
    Ok(v)
}

fn integer<T: std::str::FromStr>(key: &str, s: &str) -> Result<T, ConfigError> {
    s.parse().map_err(|_| value_err(key, format!("`{s}` is not a non-negative integer")))
}

fn boolean(key: &str, s: &str) -> Result<bool, ConfigError> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(value_err(key, format!("`{s}` is not a boolean"))),
    }
}

/// `1, 2, 3` or `[1, 2, 3]`; an empty list is an error.
fn parse_list(key: &str, s: &str) -> Result<Vec<f64>, ConfigError> {
    let inner = s.trim();
    let inner = inner
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .unwrap_or(inner);
    let out = inner
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| number(key, p))
        .collect::<Result<Vec<_>, _>>()?;
    if out.is_empty() {
        return Err(value_err(key, "empty list"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_section() {
        let cfg = RunConfig::parse(
            "scenario.name = bouncing_seeker  # trailing\n\
             param.omega = 1000\n\
             param.x0 = [10, 0]\n\
             param.k = [0.5]\n\
             solver.h = 1e-4\n\
             solver.jump_policy = flow-first\n\
             solver.seed = 9\n\
             output.csv = no\n\
             sweep.param = omega\n\
             sweep.values = 10, 100\n\
             compare.tau = 20\n\
             compare.mask = [0, 1]\n",
        )
        .unwrap();
        assert_eq!(cfg.scenario, "bouncing_seeker");
        assert_eq!(cfg.params["omega"], ParamValue::Scalar(1000.0));
        assert_eq!(cfg.params["x0"], ParamValue::Vector(vec![10.0, 0.0]));
        assert_eq!(cfg.params["k"], ParamValue::Vector(vec![0.5]));
        assert_eq!(cfg.solver.h, Some(1e-4));
        assert_eq!(cfg.solver.jump_policy, Some(JumpPolicy::FlowFirst));
        assert_eq!(cfg.seed, 9);
        assert!(!cfg.write_csv && cfg.write_report);
        assert_eq!(
            cfg.sweep,
            Some(Sweep {
                param: "omega".into(),
                values: vec![10.0, 100.0]
            })
        );
        assert_eq!(cfg.compare.tau, Some(20.0));
        assert_eq!(cfg.compare.mask, Some(vec![0, 1]));
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "param.omega = 1",
            "scenario.name = a\nbogus",
            "scenario.name = a\nsolver.zzz = 1",
            "scenario.name = a\nsolver.h = -1",
            "scenario.name = a\nparam.w = nan",
            "scenario.name = a\nsweep.param = w\nsweep.values = []",
            "scenario.name = a\nsweep.values = 1, 2",
            "scenario.name = a\ncompare.mask = 0.5",
        ] {
            assert!(RunConfig::parse(text).is_err(), "{text:?} accepted");
        }
    }
}
