//! Closed form versus Monte Carlo on a pinned parameter battery.
//!
//! A case passes when `|closed - mc| ≤ band_scale · (3·se + allowance + 1/n)`.
//! For probabilities `se` is floored at the binomial standard error of the
//! closed-form value, so tiny samples whose paths all agree are not judged
//! on a zero sample variance. The `1/n` term is the resolution of an
//! `n`-path average.

use serde::Serialize;

use crate::censor::{rhs, solve_censor, CensorProblem, ObservationScheme, DEFAULT_SOLVER_TOL};
use crate::error::Result;
use crate::oracle::{mc_censor_rhs, mc_sentiment, mc_trigger_probability, McConfig, McEstimate};
use crate::output::{Cell, Table};
use crate::process::{GbmParams, PerformanceIndex};
use crate::rules::DecisionRule;
use crate::sentiment::{prob_index_at_least, sentiment_value, SentimentInputs};

/// Discretization allowance for extremum indices.
pub const EXTREMUM_ALLOWANCE: f64 = 5e-3;
/// Allowance for the trapezoid treatment of continuous monitoring.
pub const CENSOR_GRID_ALLOWANCE: f64 = 1e-3;
pub const SE_MULTIPLIER: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    TriggerProbability,
    Sentiment,
    CensorRhs,
}

#[derive(Debug, Clone)]
enum Target {
    Trigger(SentimentInputs),
    Sentiment(SentimentInputs),
    Censor(CensorProblem),
}

#[derive(Debug, Clone)]
pub struct Case {
    pub name: String,
    target: Target,
}

impl Case {
    pub fn kind(&self) -> CaseKind {
        match self.target {
            Target::Trigger(_) => CaseKind::TriggerProbability,
            Target::Sentiment(_) => CaseKind::Sentiment,
            Target::Censor(_) => CaseKind::CensorRhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseResult {
    pub case: String,
    pub kind: CaseKind,
    pub closed_form: f64,
    pub mc: McEstimate,
    pub band: f64,
    pub abs_diff: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub config: McConfig,
    pub band_scale: f64,
    pub cases: Vec<CaseResult>,
    pub passed: usize,
    pub failed: usize,
    pub all_pass: bool,
}

impl VerifyReport {
    pub fn failures(&self) -> Vec<&CaseResult> {
        self.cases.iter().filter(|c| !c.pass).collect()
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new([
            "case",
            "kind",
            "closed_form",
            "mc_mean",
            "mc_std_error",
            "mc_n",
            "band",
            "abs_diff",
            "pass",
        ]);
        for c in &self.cases {
            let kind = serde_json::to_value(c.kind)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default();
            t.push(vec![
                Cell::text(&c.case),
                Cell::text(kind),
                c.closed_form.into(),
                c.mc.mean.into(),
                c.mc.std_error.into(),
                c.mc.n.into(),
                c.band.into(),
                c.abs_diff.into(),
                c.pass.into(),
            ]);
        }
        t
    }
}

/// Market state with `S*_t = 1`, horizon 1, `r = 0` and log-moneyness `a_star_log`.
pub fn unit_market(
    mu: f64,
    sigma: f64,
    a_star_log: f64,
    index: PerformanceIndex,
) -> SentimentInputs {
    SentimentInputs {
        s_star_t: 1.0,
        vt: a_star_log.exp(),
        vc: 1.0,
        market_rule: DecisionRule::good(0.0).expect("zero markup is valid"),
        r: 0.0,
        t: 0.0,
        t1: 1.0,
        market_params: GbmParams::new(mu, sigma, 1.0, 0.0).expect("pinned parameters are valid"),
        index,
    }
}

/// The twelve running-maximum cases: `μ* ∈ {-0.1, 0, 0.05}`,
/// `σ* ∈ {0.2, 0.4}`, `A* ∈ {-0.3, 0.2}`.
pub fn running_max_battery() -> Vec<(String, SentimentInputs)> {
    let mut out = Vec::new();
    for mu in [-0.1, 0.0, 0.05] {
        for sigma in [0.2, 0.4] {
            for a in [-0.3, 0.2] {
                out.push((
                    format!("max mu={mu} sigma={sigma} A={a}"),
                    unit_market(mu, sigma, a, PerformanceIndex::RunningMax),
                ));
            }
        }
    }
    out
}

fn censor_problem(rule: DecisionRule) -> CensorProblem {
    CensorProblem {
        scheme: ObservationScheme::new((0.0, 1.0), vec![(0.0, 0.3)], vec![0.6, 0.9])
            .expect("pinned scheme is valid"),
        rule,
        firm_params: GbmParams::with_arithmetic_drift(-0.6, 0.3, 1.0, 0.0)
            .expect("pinned parameters are valid"),
        vt_label: 1.0,
    }
}

/// The full pinned battery.
pub fn default_battery() -> Vec<Case> {
    let mut cases: Vec<Case> = running_max_battery()
        .into_iter()
        .map(|(name, i)| Case {
            name,
            target: Target::Trigger(i),
        })
        .collect();
    for mu in [-0.1, 0.05] {
        for a in [-0.3, 0.2] {
            cases.push(Case {
                name: format!("min mu={mu} sigma=0.3 A={a}"),
                target: Target::Trigger(unit_market(mu, 0.3, a, PerformanceIndex::RunningMin)),
            });
        }
    }
    let mut good_max = unit_market(0.02, 0.3, 0.15, PerformanceIndex::RunningMax);
    good_max.r = 0.03;
    good_max.market_rule = DecisionRule::good(0.1).expect("valid markup");
    cases.push(Case {
        name: "sentiment good max".into(),
        target: Target::Sentiment(good_max),
    });
    let mut bad_min = unit_market(0.0, 0.25, -0.1, PerformanceIndex::RunningMin);
    bad_min.r = 0.03;
    bad_min.market_rule = DecisionRule::bad(0.05).expect("valid markup");
    cases.push(Case {
        name: "sentiment bad min".into(),
        target: Target::Sentiment(bad_min),
    });
    cases.push(Case {
        name: "censor good a=0.1".into(),
        target: Target::Censor(censor_problem(
            DecisionRule::good(0.1).expect("valid markup"),
        )),
    });
    cases.push(Case {
        name: "censor bad a=0".into(),
        target: Target::Censor(censor_problem(
            DecisionRule::bad(0.0).expect("valid markup"),
        )),
    });
    cases
}

fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p)).max(0.0).sqrt() / (n as f64).sqrt()
}

fn is_extremum(index: PerformanceIndex) -> bool {
    matches!(
        index,
        PerformanceIndex::RunningMax | PerformanceIndex::RunningMin
    )
}

pub fn run_case(case: &Case, cfg: &McConfig, band_scale: f64) -> Result<CaseResult> {
    let (closed, mc, se, allowance) = match &case.target {
        Target::Trigger(i) => {
            let p = prob_index_at_least(i)?;
            let est = mc_trigger_probability(i, cfg)?;
            let allowance = if is_extremum(i.index) {
                EXTREMUM_ALLOWANCE
            } else {
                0.0
            };
            (p, est, est.std_error.max(binomial_se(p, est.n)), allowance)
        }
        Target::Sentiment(i) => {
            let v = sentiment_value(i)?;
            let est = mc_sentiment(i, cfg)?;
            let scale = v.e_star * v.discount;
            let p = v.prob_branch(i.market_rule.signature());
            let allowance = if is_extremum(i.index) {
                EXTREMUM_ALLOWANCE * scale
            } else {
                0.0
            };
            (
                v.v_star,
                est,
                est.std_error.max(scale * binomial_se(p, est.n)),
                allowance,
            )
        }
        Target::Censor(pr) => {
            let sol = solve_censor(pr, DEFAULT_SOLVER_TOL)?;
            let closed = rhs(pr, sol.l_vt)?.sum();
            let est = mc_censor_rhs(pr, sol.l_vt, cfg)?;
            (closed, est, est.std_error, CENSOR_GRID_ALLOWANCE)
        }
    };
    let band = band_scale * (SE_MULTIPLIER * se + allowance + 1.0 / mc.n as f64);
    let abs_diff = (closed - mc.mean).abs();
    Ok(CaseResult {
        case: case.name.clone(),
        kind: case.kind(),
        closed_form: closed,
        mc,
        band,
        abs_diff,
        pass: abs_diff <= band,
    })
}

/// Run every case in `battery`. Individual failures are recorded in the
/// report, not raised.
pub fn verify_battery(battery: &[Case], cfg: &McConfig, band_scale: f64) -> Result<VerifyReport> {
    cfg.validate()?;
    if !(band_scale.is_finite() && band_scale >= 0.0) {
        return Err(crate::Error::validation(
            "band_scale",
            format!("must be >= 0, got {band_scale}"),
        ));
    }
    let cases = battery
        .iter()
        .map(|c| run_case(c, cfg, band_scale))
        .collect::<Result<Vec<_>>>()?;
    let passed = cases.iter().filter(|c| c.pass).count();
    Ok(VerifyReport {
        config: *cfg,
        band_scale,
        failed: cases.len() - passed,
        all_pass: passed == cases.len(),
        passed,
        cases,
    })
}

pub fn verify_all(cfg: &McConfig, band_scale: f64) -> Result<VerifyReport> {
    verify_battery(&default_battery(), cfg, band_scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_shape() {
        let b = default_battery();
        assert_eq!(
            b.iter()
                .filter(|c| c.kind() == CaseKind::TriggerProbability)
                .count(),
            16
        );
        assert_eq!(running_max_battery().len(), 12);
    }

    #[test]
    fn small_sample_passes_and_zero_band_fails() {
        let cfg = McConfig::new(10, 50, 0, 1).unwrap();
        let report = verify_all(&cfg, 1.0).unwrap();
        assert!(report.all_pass, "{:?}", report.failures());
        let report = verify_all(&cfg, 0.0).unwrap();
        assert!(!report.all_pass);
    }

    #[test]
    fn moderate_run_passes() {
        let cfg = McConfig::new(20_000, 200, 5, 4).unwrap();
        let report = verify_all(&cfg, 1.0).unwrap();
        assert!(report.all_pass, "{:?}", report.failures());
        assert_eq!(report.table().rows.len(), report.cases.len());
    }
}
