//! JSON scenario files and their runner.
//!
//! ```json
//! {
//!   "name": "demo",
//!   "mode": "censor",
//!   "parameters": { "scheme": { "window": [0, 1] }, "rule": { "signature": 1, "markup": 0 },
//!                   "firm_params": { "mu": 0, "sigma": 0.2 }, "vt_label": 1 }
//! }
//! ```
//!
//! The results JSON echoes `name`, `mode`, `parameters` and `sweep_axis`, so
//! it can be fed back as a scenario.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::censor::{check_existence, solve_censor, CensorProblem, DEFAULT_SOLVER_TOL};
use crate::error::{Error, ErrorKind, Result};
use crate::oracle::{mc_censor_rhs, mc_sentiment, McConfig};
use crate::output::{write_results, Cell, Table};
use crate::process::PerformanceIndex;
use crate::rules::DecisionRule;
use crate::sentiment::{sentiment_value_with, SentimentInputs};
use crate::statics::{
    apply_param, fires, monotonicity_sweep, partial_s_star, partial_t1_minus_t, partials_rates,
    trigger_rhs, v_star_branch, Branch, SweepParam, TriggerState,
};
use crate::verify::{verify_all, VerifyReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Sentiment,
    Censor,
    Statics,
    Verify,
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub parameter: String,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub mode: Mode,
    #[serde(default)]
    pub parameters: Map<String, Value>,
    #[serde(default)]
    pub sweep_axis: Option<SweepAxis>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario> {
        let value: Value = serde_json::from_str(text)?;
        let scenario: Scenario = parse_at(&value, "")?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_file(path: &Path) -> Result<Scenario> {
        Scenario::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let ok_char = |c: char| c.is_ascii_alphanumeric() || "-_.".contains(c);
        if self.name.is_empty() || !self.name.chars().all(ok_char) || self.name.starts_with('.') {
            return Err(Error::validation(
                "name",
                format!(
                    "must be a non-empty file stem of [A-Za-z0-9._-], got {:?}",
                    self.name
                ),
            ));
        }
        if let Some(axis) = &self.sweep_axis {
            if axis.grid.is_empty() || axis.grid.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(
                    "sweep_axis.grid",
                    "must be a non-empty list of finite numbers",
                ));
            }
        }
        if self.mode == Mode::Sweep && self.sweep_axis.is_none() {
            return Err(Error::validation("sweep_axis", "required in sweep mode"));
        }
        Ok(())
    }
}

fn join_key(parts: &[&str]) -> String {
    parts
        .iter()
        .filter(|p| !p.is_empty() && **p != ".")
        .copied()
        .collect::<Vec<_>>()
        .join(".")
}

fn backticked<'a>(msg: &'a str, after: &str) -> Option<&'a str> {
    let rest = &msg[msg.find(after)? + after.len()..];
    rest.split('`').next()
}

/// Deserialize `value` and report failures against the dotted key that
/// caused them, e.g. `market_params.sigma`.
fn parse_at<T: DeserializeOwned>(value: &Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let msg = e.inner().to_string();
        let leaf = backticked(&msg, "missing field `").or_else(|| backticked(&msg, "invalid `"));
        let key = match leaf {
            Some(leaf) if leaf.contains('.') => leaf.to_string(),
            Some(leaf) if !path.ends_with(leaf) => join_key(&[prefix, &path, leaf]),
            _ => join_key(&[prefix, &path]),
        };
        Error::validation(
            if key.is_empty() {
                "scenario".to_string()
            } else {
                key
            },
            msg,
        )
    })
}

fn params_value(s: &Scenario) -> Value {
    Value::Object(s.parameters.clone())
}

fn optional<T: DeserializeOwned>(s: &Scenario, key: &str) -> Result<Option<T>> {
    match s.parameters.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => parse_at(v, key).map(Some),
    }
}

#[derive(Deserialize)]
struct StaticsExtra {
    v_t: f64,
    firm_rule: DecisionRule,
    #[serde(default)]
    e_star_override: Option<f64>,
}

fn trigger_state(s: &Scenario) -> Result<TriggerState> {
    let inputs: SentimentInputs = parse_at(&params_value(s), "")?;
    let extra: StaticsExtra = parse_at(&params_value(s), "")?;
    let state = TriggerState {
        v_t: extra.v_t,
        inputs,
        firm_rule: extra.firm_rule,
        e_star_override: extra.e_star_override,
    };
    state.validate()?;
    Ok(state)
}

/// Output of a scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutput {
    pub results: Value,
    pub table: Table,
    /// Set when the run completed but its checks failed (verify mode).
    pub failure: Option<Diagnostic>,
}

/// JSON diagnostic emitted for every failed run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub kind: ErrorKind,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failed_flags: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_cases: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    pub exit_code: i32,
}

impl Diagnostic {
    pub fn from_error(err: &Error, scenario: Option<&str>) -> Diagnostic {
        let (key, failed_flags) = match err {
            Error::Validation { key, .. } => (Some(key.clone()), Vec::new()),
            Error::Existence { failed, .. } => (None, failed.clone()),
            _ => (None, Vec::new()),
        };
        Diagnostic {
            kind: err.kind(),
            message: err.to_string(),
            key,
            failed_flags,
            failed_cases: None,
            scenario: scenario.map(String::from),
            exit_code: err.exit_code(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self)
            .unwrap_or_else(|_| format!("{{\"exit_code\":{}}}", self.exit_code))
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn run_sentiment(s: &Scenario) -> Result<ScenarioOutput> {
    let inputs: SentimentInputs = parse_at(&params_value(s), "")?;
    inputs.validate()?;
    let mc: Option<McConfig> = optional(s, "mc")?;
    let value = sentiment_value_with(&inputs, &mc.unwrap_or_default())?;
    let estimate = mc.map(|cfg| mc_sentiment(&inputs, &cfg)).transpose()?;
    let mut columns = vec![
        "v_star",
        "prob_good",
        "prob_bad",
        "e_star",
        "discount",
        "delta_e",
    ];
    let mut row: Vec<Cell> = vec![
        value.v_star.into(),
        value.prob_good.into(),
        value.prob_bad.into(),
        value.e_star.into(),
        value.discount.into(),
        value.delta_e.into(),
    ];
    if let Some(e) = estimate {
        columns.extend(["mc_mean", "mc_std_error", "mc_n"]);
        row.extend([e.mean.into(), e.std_error.into(), e.n.into()]);
    }
    let mut table = Table::new(columns);
    table.push(row);
    let mut results = Map::new();
    results.insert("sentiment".into(), to_value(&value)?);
    if let Some(e) = estimate {
        results.insert("mc_estimate".into(), to_value(&e)?);
    }
    Ok(ScenarioOutput {
        results: Value::Object(results),
        table,
        failure: None,
    })
}

fn run_censor(s: &Scenario) -> Result<ScenarioOutput> {
    let problem: CensorProblem = parse_at(&params_value(s), "")?;
    problem.validate()?;
    let tol: f64 = optional(s, "solver_tol")?.unwrap_or(DEFAULT_SOLVER_TOL);
    let mc: Option<McConfig> = optional(s, "mc")?;
    let existence = check_existence(&problem)?;
    let sol = solve_censor(&problem, tol)?;
    let estimate = mc
        .map(|cfg| mc_censor_rhs(&problem, sol.l_vt, &cfg))
        .transpose()?;
    let mut columns = vec![
        "l_vt",
        "residual",
        "branch",
        "iterations",
        "n_term",
        "s1_term",
        "s2_term",
        "vt_plus",
        "weight_mass",
    ];
    let c = sol.rhs_components;
    let mut row: Vec<Cell> = vec![
        sol.l_vt.into(),
        sol.residual.into(),
        Cell::num(sol.branch.sign()),
        sol.iterations.into(),
        c.n_term.into(),
        c.s1_term.into(),
        c.s2_term.into(),
        sol.vt_plus.into(),
        sol.weight_mass.into(),
    ];
    if let Some(e) = estimate {
        columns.extend(["mc_mean", "mc_std_error", "mc_n"]);
        row.extend([e.mean.into(), e.std_error.into(), e.n.into()]);
    }
    let mut table = Table::new(columns);
    table.push(row);
    let mut results = Map::new();
    results.insert("solution".into(), to_value(&sol)?);
    results.insert("existence".into(), to_value(&existence)?);
    if let Some(e) = estimate {
        results.insert("mc_estimate".into(), to_value(&e)?);
    }
    Ok(ScenarioOutput {
        results: Value::Object(results),
        table,
        failure: None,
    })
}

fn sweep_param(axis: &SweepAxis) -> Result<SweepParam> {
    serde_json::from_value(Value::String(axis.parameter.clone())).map_err(|_| {
        Error::validation(
            "sweep_axis.parameter",
            format!(
                "statics sweeps accept a_star, vt, r, a or e_star, got {:?}",
                axis.parameter
            ),
        )
    })
}

fn run_statics(s: &Scenario) -> Result<ScenarioOutput> {
    let state = trigger_state(s)?;
    let mut results = Map::new();
    let rhs = trigger_rhs(&state)?;
    results.insert("trigger_rhs".into(), to_value(&rhs)?);
    results.insert("fires".into(), Value::Bool(fires(&state)?));
    let branch = match state.inputs.index {
        PerformanceIndex::RunningMax => Some(Branch::Max),
        PerformanceIndex::RunningMin => Some(Branch::Min),
        PerformanceIndex::RunningAverage => None,
    };
    if let Some(b) = branch {
        results.insert(
            "v_star_branch".into(),
            to_value(&v_star_branch(&state, b)?)?,
        );
        results.insert("rate_partials".into(), to_value(&partials_rates(&state)?)?);
        results.insert("partial_s_star".into(), to_value(&partial_s_star(&state)?)?);
    }
    if branch == Some(Branch::Max) {
        results.insert(
            "horizon_partial".into(),
            to_value(&partial_t1_minus_t(&state)?)?,
        );
    }

    let table = match &s.sweep_axis {
        Some(axis) => {
            let param = sweep_param(axis)?;
            let report = monotonicity_sweep(&state, param, &axis.grid)?;
            let mut t = Table::new([param.name(), "rhs", "proxy", "fires"]);
            for (k, &v) in axis.grid.iter().enumerate() {
                let fired = fires(&apply_param(&state, param, v)?)?;
                t.push(vec![
                    v.into(),
                    report.rhs[k].into(),
                    report.proxy[k].into(),
                    fired.into(),
                ]);
            }
            results.insert("monotonicity".into(), to_value(&report)?);
            t
        }
        None => {
            let mut t = Table::new(["v_t", "rhs", "fires"]);
            t.push(vec![state.v_t.into(), rhs.into(), fires(&state)?.into()]);
            t
        }
    };
    Ok(ScenarioOutput {
        results: Value::Object(results),
        table,
        failure: None,
    })
}

/// Names accepted by the sentiment sweep axis.
pub const SENTIMENT_AXES: [&str; 9] = [
    "s_star_t", "vt", "vc", "r", "t", "t1", "mu", "sigma", "a_star",
];

fn with_axis(inputs: &SentimentInputs, name: &str, v: f64) -> Result<SentimentInputs> {
    let mut i = *inputs;
    match name {
        "s_star_t" => i.s_star_t = v,
        "vt" => i.vt = v,
        "vc" => i.vc = v,
        "r" => i.r = v,
        "t" => i.t = v,
        "t1" => i.t1 = v,
        "mu" => i.market_params = i.market_params.with_mu(v)?,
        "sigma" => i.market_params = i.market_params.with_sigma(v)?,
        "a_star" => i.market_rule = i.market_rule.with_markup(v)?,
        other => {
            return Err(Error::validation(
                "sweep_axis.parameter",
                format!("sentiment sweeps accept {SENTIMENT_AXES:?}, got {other:?}"),
            ))
        }
    }
    i.validate()?;
    Ok(i)
}

fn run_sweep(s: &Scenario) -> Result<ScenarioOutput> {
    let inputs: SentimentInputs = parse_at(&params_value(s), "")?;
    inputs.validate()?;
    let cfg: McConfig = optional(s, "mc")?.unwrap_or_default();
    let axis = s
        .sweep_axis
        .as_ref()
        .ok_or_else(|| Error::validation("sweep_axis", "required in sweep mode"))?;
    let mut table = Table::new([
        axis.parameter.as_str(),
        "v_star",
        "prob_good",
        "prob_bad",
        "e_star",
        "discount",
    ]);
    let mut values = Vec::new();
    for &v in &axis.grid {
        let value = sentiment_value_with(&with_axis(&inputs, &axis.parameter, v)?, &cfg)?;
        table.push(vec![
            v.into(),
            value.v_star.into(),
            value.prob_good.into(),
            value.prob_bad.into(),
            value.e_star.into(),
            value.discount.into(),
        ]);
        values.push(to_value(&value)?);
    }
    let mut results = Map::new();
    results.insert("sweep".into(), Value::Array(values));
    Ok(ScenarioOutput {
        results: Value::Object(results),
        table,
        failure: None,
    })
}

#[derive(Deserialize)]
struct VerifyExtra {
    #[serde(default = "unit_band")]
    band_scale: f64,
}

fn unit_band() -> f64 {
    1.0
}

/// Results and exit status of a verify report.
pub fn verify_output(report: &VerifyReport) -> Result<ScenarioOutput> {
    let failure = (!report.all_pass).then(|| Diagnostic {
        kind: ErrorKind::Numeric,
        message: format!(
            "{} of {} comparisons outside tolerance",
            report.failed,
            report.cases.len()
        ),
        key: None,
        failed_flags: Vec::new(),
        failed_cases: serde_json::to_value(report.failures()).ok(),
        scenario: None,
        exit_code: 3,
    });
    Ok(ScenarioOutput {
        results: to_value(report)?,
        table: report.table(),
        failure,
    })
}

fn run_verify(s: &Scenario) -> Result<ScenarioOutput> {
    let params = params_value(s);
    let cfg: McConfig = if s.parameters.contains_key("n_paths") {
        parse_at(&params, "")?
    } else {
        optional(s, "mc")?.unwrap_or_default()
    };
    let extra: VerifyExtra = parse_at(&params, "")?;
    verify_output(&verify_all(&cfg, extra.band_scale)?)
}

/// Evaluate a parsed scenario without touching the file system.
pub fn evaluate(s: &Scenario) -> Result<ScenarioOutput> {
    s.validate()?;
    match s.mode {
        Mode::Sentiment => run_sentiment(s),
        Mode::Censor => run_censor(s),
        Mode::Statics => run_statics(s),
        Mode::Sweep => run_sweep(s),
        Mode::Verify => run_verify(s),
    }
}

/// Full results document: the scenario fields followed by the outputs.
pub fn results_document(s: &Scenario, out: &ScenarioOutput) -> Result<Value> {
    let mut doc = match to_value(s)? {
        Value::Object(m) => m,
        _ => Map::new(),
    };
    doc.insert("results".into(), out.results.clone());
    doc.insert("table".into(), to_value(&out.table)?);
    doc.insert("passed".into(), Value::Bool(out.failure.is_none()));
    Ok(Value::Object(doc))
}

/// Outcome of [`run_scenario`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunStatus {
    pub exit_code: i32,
    pub json_path: Option<PathBuf>,
    pub csv_path: Option<PathBuf>,
    pub diagnostic: Option<Diagnostic>,
}

/// Write the outputs of an already-parsed scenario.
pub fn run_parsed(s: &Scenario, out_dir: &Path) -> RunStatus {
    let attempt = || -> Result<(ScenarioOutput, PathBuf, PathBuf)> {
        let out = evaluate(s)?;
        let doc = results_document(s, &out)?;
        let (json, csv) = write_results(out_dir, &s.name, &doc, &out.table)?;
        Ok((out, json, csv))
    };
    match attempt() {
        Ok((out, json, csv)) => {
            let diagnostic = out.failure.map(|mut d| {
                d.scenario = Some(s.name.clone());
                d
            });
            RunStatus {
                exit_code: diagnostic.as_ref().map_or(0, |d| d.exit_code),
                json_path: Some(json),
                csv_path: Some(csv),
                diagnostic,
            }
        }
        Err(e) => failed(&e, Some(&s.name)),
    }
}

fn failed(e: &Error, name: Option<&str>) -> RunStatus {
    let d = Diagnostic::from_error(e, name);
    RunStatus {
        exit_code: d.exit_code,
        json_path: None,
        csv_path: None,
        diagnostic: Some(d),
    }
}

/// Parse `config_path`, run it, and write `<name>.results.{json,csv}` into
/// `out_dir`. Exit codes: 0 success, 2 validation, 3 numeric or existence.
pub fn run_scenario(config_path: &Path, out_dir: &Path) -> RunStatus {
    match Scenario::from_file(config_path) {
        Ok(s) => run_parsed(&s, out_dir),
        Err(e) => failed(&e, None),
    }
}
