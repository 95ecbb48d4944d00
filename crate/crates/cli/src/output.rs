// SPDX-License-Identifier: Apache-2.0

//! JSON summaries, CSV writers and the mapping from errors to exit codes.

use std::fmt;
use std::path::Path;

use anosov_core::{Error, MapSpec};
use serde::Serialize;
use serde_json::{json, Map, Value};

pub const TOOL: &str = "anosov";

/// Exit 2: bad input or an unmet precondition. Exit 1: a numerical invariant broke.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Invariant { name: &'static str, message: String },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Invariant { .. } => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Invariant { name, message } => write!(f, "invariant '{name}' failed: {message}"),
        }
    }
}

/// Name of the numerical invariant behind an error, or `None` for input errors.
pub fn invariant_name(e: &Error) -> Option<&'static str> {
    use Error::*;
    match e {
        ConeViolation { .. } => Some("cone_invariance"),
        NotOrientable => Some("stable_orientation"),
        NoConvergence { .. } => Some("bundle_convergence"),
        OrientationAmbiguous { .. } => Some("bundle_orientation"),
        InverseNewtonFailure { .. } => Some("inverse_newton"),
        MissingMultipliers => Some("orbit_multipliers"),
        ContinuationCollision { .. } => Some("orbit_separation"),
        NewtonDivergence { .. } => Some("newton_continuation"),
        HomotopyNotAnosov { .. } => Some("homotopy_cone"),
        EigenSplitFailure { .. } => Some("eigen_split"),
        StepUnderflow { .. } => Some("integrator_step"),
        UnitIntegralMismatch { .. } => Some("unit_speed"),
        TransversalityFailure { .. } => Some("transversality"),
        InsufficientDecaySignal { .. } => Some("decay_signal"),
        NotUnimodular { .. }
        | NotHyperbolic { .. }
        | InvalidSpec(_)
        | OrientationReversed
        | Overflow { .. }
        | IncompleteDatabase(_)
        | SpecMismatch { .. }
        | SigmaMinusOne
        | MeanNotZero { .. }
        | ResolutionExceeded { .. }
        | NotLinear
        | InvalidArgument(_)
        | Io(_)
        | Parse(_) => None,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match invariant_name(&e) {
            Some(name) => CliError::Invariant { name, message: e.to_string() },
            None => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Config(format!("csv: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

/// Rounds every float to 15 significant digits so summaries are byte-stable.
pub fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64");
            let r: f64 = format!("{x:.14e}").parse().expect("rounded float parses");
            if let Some(m) = serde_json::Number::from_f64(r) {
                *n = m;
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_floats),
        Value::Object(o) => o.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// 15 significant digits, for CSV cells.
pub fn fmt15(x: f64) -> String {
    format!("{x:.14e}")
}

pub struct Report {
    pub command: &'static str,
    pub spec: MapSpec,
    pub parameters: Value,
    pub verdicts: Vec<(String, bool)>,
    pub result: Value,
}

impl Report {
    pub fn new(command: &'static str, spec: &MapSpec, parameters: Value) -> Self {
        Report { command, spec: spec.clone(), parameters, verdicts: Vec::new(), result: Value::Null }
    }

    pub fn verdict(&mut self, name: impl Into<String>, ok: bool) {
        self.verdicts.push((name.into(), ok));
    }

    pub fn failing(&self) -> Vec<String> {
        self.verdicts.iter().filter(|(_, ok)| !ok).map(|(n, _)| n.clone()).collect()
    }

    pub fn to_json(&self, seed: u64) -> String {
        let verdicts: Map<String, Value> = self.verdicts.iter().map(|(n, ok)| (n.clone(), Value::Bool(*ok))).collect();
        let failing = self.failing();
        let spec: Value = serde_json::from_str(&self.spec.to_json()).expect("spec json");
        let mut v = json!({
            "tool": TOOL,
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "spec_hash": self.spec.content_hash(),
            "spec": spec,
            "seed": seed,
            "parameters": self.parameters,
            "verdicts": verdicts,
            "passed": failing.is_empty(),
            "failing": failing,
            "result": self.result,
        });
        round_floats(&mut v);
        let mut s = serde_json::to_string_pretty(&v).expect("summary serializes");
        s.push('\n');
        s
    }
}

pub fn csv_writer(path: &Path) -> CliResult<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::config(format!("cannot create {}: {e}", path.display())))
}
