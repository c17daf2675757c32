//! Prebuilt closed loops with named, overridable parameters.
//!
//! Every scenario is looked up by name, built from its defaults merged with
//! caller overrides, and returned together with an initial state and a
//! solver configuration that resolves its fastest oscillation.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hybrid::{simulate, HybridArc, HybridError, HybridSystem, SolverConfig};

mod basic;
mod constrained;
mod games;
mod plants;
mod switching;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("invalid override: {0}")]
    InvalidOverride(String),
    #[error("scenario `{0}` has no reference counterpart")]
    NoCounterpart(String),
    #[error(transparent)]
    Simulation(#[from] HybridError),
}

/// Where a default value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    /// Given with the original example.
    Stated,
    /// Not given; picked here and fixed for reproducibility.
    Derived,
    /// Bookkeeping (seeds, modes, switches).
    Trivial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl ParamValue {
    fn kind(&self) -> &'static str {
        match self {
            ParamValue::Scalar(_) => "scalar",
            ParamValue::Vector(_) => "vector",
        }
    }

    fn values(&self) -> &[f64] {
        match self {
            ParamValue::Scalar(v) => std::slice::from_ref(v),
            ParamValue::Vector(v) => v,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Scalar(v) => write!(f, "{v}"),
            ParamValue::Vector(v) => {
                let parts: Vec<String> = v.iter().map(f64::to_string).collect();
                write!(f, "[{}]", parts.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub default: ParamValue,
    pub origin: Origin,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioInfo {
    pub name: String,
    pub description: String,
    pub params: Vec<ParamSpec>,
    pub has_counterpart: bool,
}

/// Facts about a built scenario that tools need to interpret its arcs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMeta {
    pub name: String,
    /// Defaults merged with overrides.
    pub params: BTreeMap<String, ParamValue>,
    /// One name per state component.
    pub labels: Vec<String>,
    /// State indices of the decision estimate `û`.
    pub decision: Vec<usize>,
    /// Optimizer or equilibrium `û` should approach, when known.
    pub target: Option<Vec<f64>>,
    /// State indices matching the components of the reference arc.
    pub counterpart: Option<Vec<usize>>,
}

pub struct Scenario {
    pub system: HybridSystem,
    pub x0: Vec<f64>,
    pub config: SolverConfig,
    pub meta: ScenarioMeta,
}

impl fmt::Debug for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scenario")
            .field("dim", &self.system.dim())
            .field("x0", &self.x0)
            .field("config", &self.config)
            .field("meta", &self.meta)
            .finish()
    }
}

/// Resolved parameters handed to builders.
#[derive(Debug, Clone)]
pub(crate) struct Params {
    values: BTreeMap<String, ParamValue>,
    pub(crate) seed: u64,
}

impl Params {
    pub(crate) fn scalar(&self, name: &str) -> f64 {
        match &self.values[name] {
            ParamValue::Scalar(v) => *v,
            ParamValue::Vector(_) => unreachable!("`{name}` is a vector parameter"),
        }
    }

    pub(crate) fn vector(&self, name: &str) -> &[f64] {
        match &self.values[name] {
            ParamValue::Vector(v) => v,
            ParamValue::Scalar(_) => unreachable!("`{name}` is a scalar parameter"),
        }
    }

    pub(crate) fn flag(&self, name: &str) -> bool {
        self.scalar(name) != 0.0
    }

    /// Checks `pred` on a scalar, naming the rule on failure.
    pub(crate) fn require(&self, name: &str, rule: &str, pred: impl Fn(f64) -> bool) -> Result<f64, ScenarioError> {
        let v = self.scalar(name);
        if pred(v) {
            Ok(v)
        } else {
            Err(ScenarioError::InvalidOverride(format!("{name} = {v}: {rule}")))
        }
    }

    pub(crate) fn require_all(&self, name: &str, rule: &str, pred: impl Fn(f64) -> bool) -> Result<&[f64], ScenarioError> {
        let v = self.vector(name);
        if v.iter().all(|&x| pred(x)) {
            Ok(v)
        } else {
            Err(ScenarioError::InvalidOverride(format!("{name} = {v:?}: {rule}")))
        }
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T, ScenarioError> {
    Err(ScenarioError::InvalidOverride(msg.into()))
}

pub(crate) fn spec(name: &str, default: ParamValue, origin: Origin, description: &str) -> ParamSpec {
    ParamSpec {
        name: name.into(),
        default,
        origin,
        description: description.into(),
    }
}

pub(crate) fn scalar(name: &str, v: f64, origin: Origin, description: &str) -> ParamSpec {
    spec(name, ParamValue::Scalar(v), origin, description)
}

pub(crate) fn vector(name: &str, v: &[f64], origin: Origin, description: &str) -> ParamSpec {
    spec(name, ParamValue::Vector(v.to_vec()), origin, description)
}

/// Step that keeps `h · ω_max` at `per_rad` or below, capped at `cap`.
pub(crate) fn step_for(omega_max: f64, per_rad: f64, cap: f64) -> f64 {
    (per_rad / omega_max).min(cap)
}

pub(crate) fn config(h: f64, t_max: f64, j_max: usize, stride: usize, seed: u64) -> SolverConfig {
    SolverConfig {
        h,
        t_max,
        j_max,
        tol_event: (h * 1e-6).min(1e-10),
        rng_seed: seed,
        sample_stride: stride,
        ..SolverConfig::default()
    }
}

type BuildFn = fn(&Params) -> Result<Scenario, ScenarioError>;
type ReferenceFn = fn(&Params) -> Result<HybridArc, ScenarioError>;

struct Entry {
    name: &'static str,
    description: &'static str,
    params: fn() -> Vec<ParamSpec>,
    build: BuildFn,
    reference: Option<ReferenceFn>,
}

fn registry() -> Vec<Entry> {
    macro_rules! entry {
        ($m:ident :: $f:ident, $desc:expr) => {
            entry!($m::$f, $desc, None)
        };
        ($m:ident :: $f:ident, $desc:expr, $r:expr) => {
            Entry {
                name: stringify!($f),
                description: $desc,
                params: $m::$f::params,
                build: $m::$f::build,
                reference: $r,
            }
        };
    }
    vec![
        entry!(basic::periodic_reset, "timer that halves a decaying state every T seconds"),
        entry!(
            basic::bouncing_seeker,
            "ball under fast oscillating gravity with restitution at impacts",
            Some(basic::bouncing_seeker::reference)
        ),
        entry!(
            basic::bouncing_average,
            "ball under constant averaged gravity; Zeno in finite time",
            Some(basic::bouncing_average::reference)
        ),
        entry!(
            basic::source_surveillance,
            "vehicle seeking two intermittent sources under dwell-time switching"
        ),
        entry!(games::rps_nash, "three players on the simplex with best-response dynamics"),
        entry!(
            constrained::projected_tracking,
            "tracking a drifting optimum inside a rotated box via tangent-cone projection"
        ),
        entry!(
            constrained::unknown_constraints,
            "sliding between cost and constraint gradients for a measured constraint"
        ),
        entry!(
            games::distributed_sign,
            "five agents reaching consensus through sign coupling on a switching graph"
        ),
        entry!(
            switching::attack_gradient,
            "gradient seeking with measurement sign flips limited by an activation monitor"
        ),
        entry!(
            constrained::obstacle_avoid,
            "source seeking around an obstacle with two hysteresis-switched potentials"
        ),
        entry!(
            switching::momentum_reset,
            "heavy-ball seeking with periodic momentum resets",
            Some(switching::momentum_reset::reference)
        ),
        entry!(
            switching::newton_gradient_switch,
            "gradient seeking far from the optimum, Newton seeking near it"
        ),
        entry!(plants::coulomb_plant_loop, "seeking through an oscillator with Coulomb friction"),
        entry!(plants::switched_plant_loop, "seeking through a plant switching between two linear modes"),
        entry!(
            games::nash_intermittent,
            "two-player game on switching plants with intermittent updates"
        ),
        entry!(
            basic::growing_timer_es,
            "seeking with dithers driven by an unbounded timer",
            Some(basic::growing_timer_es::reference)
        ),
    ]
}

fn find(name: &str) -> Result<Entry, ScenarioError> {
    registry()
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| ScenarioError::UnknownScenario(name.to_string()))
}

pub fn list_scenarios() -> Vec<ScenarioInfo> {
    registry()
        .into_iter()
        .map(|e| ScenarioInfo {
            name: e.name.into(),
            description: e.description.into(),
            params: (e.params)(),
            has_counterpart: e.reference.is_some(),
        })
        .collect()
}

fn resolve(
    entry: &Entry,
    overrides: &BTreeMap<String, ParamValue>,
    seed: u64,
) -> Result<Params, ScenarioError> {
    let specs = (entry.params)();
    let mut values: BTreeMap<String, ParamValue> =
        specs.iter().map(|s| (s.name.clone(), s.default.clone())).collect();
    for (name, value) in overrides {
        let Some(current) = values.get(name) else {
            return invalid(format!("`{}` has no parameter `{name}`", entry.name));
        };
        let value = match (current, value) {
            // A one-element list may stand in for a scalar and vice versa.
            (ParamValue::Scalar(_), ParamValue::Vector(v)) if v.len() == 1 => ParamValue::Scalar(v[0]),
            (ParamValue::Vector(d), ParamValue::Scalar(v)) if d.len() == 1 => ParamValue::Vector(vec![*v]),
            _ => value.clone(),
        };
        if current.kind() != value.kind() {
            return invalid(format!("`{name}` expects a {}, got a {}", current.kind(), value.kind()));
        }
        if current.values().len() != value.values().len() {
            return invalid(format!(
                "`{name}` expects {} entries, got {}",
                current.values().len(),
                value.values().len()
            ));
        }
        if value.values().iter().any(|v| !v.is_finite()) {
            return invalid(format!("`{name}` must be finite"));
        }
        values.insert(name.clone(), value);
    }
    Ok(Params { values, seed })
}

/// Builds `name` with `overrides` applied; seeded selectors use seed 0.
pub fn build_scenario(name: &str, overrides: &BTreeMap<String, ParamValue>) -> Result<Scenario, ScenarioError> {
    build_scenario_seeded(name, overrides, 0)
}

pub fn build_scenario_seeded(
    name: &str,
    overrides: &BTreeMap<String, ParamValue>,
    seed: u64,
) -> Result<Scenario, ScenarioError> {
    let entry = find(name)?;
    let params = resolve(&entry, overrides, seed)?;
    let mut sc = (entry.build)(&params)?;
    sc.meta.name = entry.name.into();
    sc.meta.params = params.values;
    sc.config.rng_seed = seed;
    if entry.reference.is_none() {
        sc.meta.counterpart = None;
    }
    debug_assert_eq!(sc.meta.labels.len(), sc.system.dim());
    debug_assert_eq!(sc.x0.len(), sc.system.dim());
    Ok(sc)
}

/// Arc of the averaged or target system paired with `name`, over the same
/// horizon as the scenario's recommended configuration.
pub fn reference_arc(name: &str, overrides: &BTreeMap<String, ParamValue>) -> Result<HybridArc, ScenarioError> {
    let entry = find(name)?;
    let Some(reference) = entry.reference else {
        return Err(ScenarioError::NoCounterpart(name.to_string()));
    };
    let params = resolve(&entry, overrides, 0)?;
    reference(&params)
}

/// Simulates a reference system and keeps the listed coordinates.
pub(crate) fn reference_run(
    sys: &HybridSystem,
    x0: &[f64],
    cfg: &SolverConfig,
    keep: &[usize],
) -> Result<HybridArc, ScenarioError> {
    Ok(simulate(sys, x0, cfg)?.arc.project(keep))
}

pub(crate) fn meta(labels: Vec<String>, decision: Vec<usize>, target: Option<Vec<f64>>) -> ScenarioMeta {
    ScenarioMeta {
        name: String::new(),
        params: BTreeMap::new(),
        labels,
        decision,
        target,
        counterpart: None,
    }
}

/// Runs `extra` after any guard already installed on `sys`.
pub(crate) fn add_guard(sys: HybridSystem, extra: crate::hybrid::GuardFn) -> HybridSystem {
    match sys.guard().cloned() {
        Some(prev) => sys.with_guard(std::sync::Arc::new(move |x: &mut [f64]| {
            prev(x);
            extra(x);
        })),
        None => sys.with_guard(extra),
    }
}
