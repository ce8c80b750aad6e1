//! Optimal censor `L_VT` under a deterministic observation scheme.
//!
//! The window `[t, T]` splits into continuously monitored intervals `C`,
//! discrete observation times `D` and an unmonitored remainder. The censor
//! solves `1 = N(L) + S1(L) + S2(L)`, where for good news
//!
//! ```text
//! N(L)    = (1 - vol(C)/(T-t)) L
//! S1(L)   = ∫_C E[X_u 1{X_u ≥ (1+a)L}] du/(T-t) + q Σ_D E[X_u 1{X_u ≥ (1+a)L}]
//! S2(L)/L = ∫_C P(X_u < (1+a)L) du/(T-t)        + q Σ_D P(X_u < (1+a)L)
//! ```
//!
//! with `q = 1/#D`; bad news flips the inequalities. Values are read as
//! already discounted to `t`, so no discount factor appears. The weights are
//! used as written and need not sum to one; [`CensorSolution::weight_mass`]
//! reports their total.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::GbmParams;
use crate::quadrature::{adaptive, Tolerance};
use crate::rules::{DecisionRule, Signature};
use crate::specialfn::erfc_raw;

/// Relative tolerance of the continuous-monitoring integrals.
pub const RHS_QUADRATURE_REL_TOL: f64 = 1e-9;
/// Upper limit for the doubling search of the bracket.
pub const BRACKET_CAP: f64 = 1_152_921_504_606_846_976.0; // 2^60
pub const DEFAULT_SOLVER_TOL: f64 = 1e-10;
const MAX_BISECTIONS: usize = 400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScheme")]
pub struct ObservationScheme {
    window: (f64, f64),
    continuous_intervals: Vec<(f64, f64)>,
    discrete_times: Vec<f64>,
}

#[derive(Deserialize)]
struct RawScheme {
    window: (f64, f64),
    #[serde(default)]
    continuous_intervals: Vec<(f64, f64)>,
    #[serde(default)]
    discrete_times: Vec<f64>,
}

impl TryFrom<RawScheme> for ObservationScheme {
    type Error = Error;

    fn try_from(raw: RawScheme) -> Result<Self> {
        ObservationScheme::new(raw.window, raw.continuous_intervals, raw.discrete_times)
    }
}

impl ObservationScheme {
    /// Intervals are sorted by left end; they must be disjoint, non-degenerate
    /// and inside the window. Discrete times must increase strictly, lie in the
    /// window and avoid interval interiors.
    pub fn new(
        window: (f64, f64),
        mut continuous_intervals: Vec<(f64, f64)>,
        discrete_times: Vec<f64>,
    ) -> Result<Self> {
        let (t, big_t) = window;
        if !(t.is_finite() && big_t.is_finite() && t < big_t) {
            return Err(Error::validation(
                "scheme.window",
                format!("needs finite t < T, got [{t}, {big_t}]"),
            ));
        }
        continuous_intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
        for (lo, hi) in &continuous_intervals {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::validation(
                    "scheme.continuous_intervals",
                    format!("interval [{lo}, {hi}] is empty or non-finite"),
                ));
            }
            if *lo < t || *hi > big_t {
                return Err(Error::validation(
                    "scheme.continuous_intervals",
                    format!("interval [{lo}, {hi}] leaves the window [{t}, {big_t}]"),
                ));
            }
        }
        for pair in continuous_intervals.windows(2) {
            if pair[0].1 >= pair[1].0 {
                return Err(Error::validation(
                    "scheme.continuous_intervals",
                    format!("intervals {:?} and {:?} overlap", pair[0], pair[1]),
                ));
            }
        }
        for (k, u) in discrete_times.iter().enumerate() {
            if !(u.is_finite() && *u >= t && *u <= big_t) {
                return Err(Error::validation(
                    "scheme.discrete_times",
                    format!("time {u} is outside the window [{t}, {big_t}]"),
                ));
            }
            if k > 0 && discrete_times[k - 1] >= *u {
                return Err(Error::validation(
                    "scheme.discrete_times",
                    "times must be strictly increasing",
                ));
            }
            if let Some((lo, hi)) = continuous_intervals
                .iter()
                .find(|(lo, hi)| lo < u && u < hi)
            {
                return Err(Error::validation(
                    "scheme.discrete_times",
                    format!("time {u} lies inside the continuous interval [{lo}, {hi}]"),
                ));
            }
        }
        Ok(ObservationScheme {
            window,
            continuous_intervals,
            discrete_times,
        })
    }

    /// No monitoring at all.
    pub fn unmonitored(t: f64, big_t: f64) -> Result<Self> {
        Self::new((t, big_t), Vec::new(), Vec::new())
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn continuous_intervals(&self) -> &[(f64, f64)] {
        &self.continuous_intervals
    }

    pub fn discrete_times(&self) -> &[f64] {
        &self.discrete_times
    }

    pub fn duration(&self) -> f64 {
        self.window.1 - self.window.0
    }

    /// Total length of the continuous intervals.
    pub fn vol_c(&self) -> f64 {
        self.continuous_intervals
            .iter()
            .map(|(lo, hi)| hi - lo)
            .sum()
    }

    /// `1/#D`, or `None` without discrete observations.
    pub fn q(&self) -> Option<f64> {
        if self.discrete_times.is_empty() {
            None
        } else {
            Some(1.0 / self.discrete_times.len() as f64)
        }
    }

    pub fn is_fully_covered(&self) -> bool {
        self.vol_c() == self.duration()
    }

    /// Total weight placed on the three terms:
    /// `(1 - vol(C)/(T-t)) + vol(C)/(T-t) + [D nonempty]`.
    pub fn weight_mass(&self) -> f64 {
        if self.discrete_times.is_empty() {
            1.0
        } else {
            2.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensorProblem {
    pub scheme: ObservationScheme,
    pub rule: DecisionRule,
    /// Firm value process, rescaled to 1 at the window start.
    pub firm_params: GbmParams,
    /// The incumbent target. Carried for reporting; the equation itself only
    /// involves `L`.
    pub vt_label: f64,
}

impl CensorProblem {
    pub fn validate(&self) -> Result<()> {
        if self.firm_params.start_value() != 1.0 {
            return Err(Error::validation(
                "firm_params.start_value",
                format!(
                    "the firm process is normalized to 1, got {}",
                    self.firm_params.start_value()
                ),
            ));
        }
        if !(self.vt_label.is_finite() && self.vt_label > 0.0) {
            return Err(Error::validation(
                "vt_label",
                format!("must be > 0, got {}", self.vt_label),
            ));
        }
        Ok(())
    }
}

/// Payoff `Z(L)` from the vanilla/digital decomposition.
pub fn z_payoff(rule: &DecisionRule, x: f64, l: f64) -> f64 {
    let a = rule.markup();
    let strike = (1.0 + a) * l;
    match rule.signature() {
        Signature::Good => {
            let digital = if x >= strike { a * l } else { 0.0 };
            l + (x - strike).max(0.0) + digital
        }
        Signature::Bad => {
            let digital = if x <= strike { a * l } else { 0.0 };
            l - (strike - x).max(0.0) + digital
        }
    }
}

/// Payoff `x 1{trigger} + L 1{no trigger}`.
pub fn z_payoff_indicator(rule: &DecisionRule, x: f64, l: f64) -> f64 {
    if rule.triggers(x, l) {
        x
    } else {
        l
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GbmExpectations {
    pub mean: f64,
    pub tail_prob_ge: f64,
    pub tail_prob_le: f64,
    pub partial_mean_ge: f64,
    pub partial_mean_le: f64,
}

/// Lognormal moments of `X_{t+s}` around the strike `(1+a)L`.
pub fn gbm_expectations(
    firm_params: &GbmParams,
    rule: &DecisionRule,
    l: f64,
    s: f64,
) -> Result<GbmExpectations> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::domain(format!("s must be > 0, got {s}")));
    }
    if !(l.is_finite() && l >= 0.0) {
        return Err(Error::domain(format!("L must be >= 0, got {l}")));
    }
    Ok(expectations_at(firm_params, (1.0 + rule.markup()) * l, s))
}

pub(crate) fn expectations_at(p: &GbmParams, strike: f64, s: f64) -> GbmExpectations {
    let x0 = p.start_value();
    let mean = x0 * (p.arithmetic_drift() * s).exp();
    if s <= 0.0 {
        let above = x0 >= strike;
        return GbmExpectations {
            mean,
            tail_prob_ge: f64::from(u8::from(above)),
            tail_prob_le: f64::from(u8::from(!above)),
            partial_mean_ge: if above { mean } else { 0.0 },
            partial_mean_le: if above { 0.0 } else { mean },
        };
    }
    let sigma = p.sigma();
    // Standardized log-distance of the strike from the median path.
    let delta = ((strike / x0).ln() - p.mu() * s) / sigma;
    let root = (2.0 * s).sqrt();
    let z_tail = delta / root;
    let z_mean = (delta - sigma * s) / root;
    GbmExpectations {
        mean,
        tail_prob_ge: 0.5 * erfc_raw(z_tail),
        tail_prob_le: 0.5 * erfc_raw(-z_tail),
        partial_mean_ge: 0.5 * mean * erfc_raw(z_mean),
        partial_mean_le: 0.5 * mean * erfc_raw(-z_mean),
    }
}

/// The three right-hand-side terms at a given `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhsTerms {
    pub n_term: f64,
    pub s1_term: f64,
    pub s2_term: f64,
}

impl RhsTerms {
    pub fn sum(&self) -> f64 {
        self.n_term + self.s1_term + self.s2_term
    }
}

/// `(partial mean, tail)` pair entering `S1` and `S2/L` for the rule's branch.
fn branch_pair(e: &GbmExpectations, signature: Signature) -> (f64, f64) {
    match signature {
        Signature::Good => (e.partial_mean_ge, e.tail_prob_le),
        Signature::Bad => (e.partial_mean_le, e.tail_prob_ge),
    }
}

pub fn rhs(problem: &CensorProblem, l: f64) -> Result<RhsTerms> {
    problem.validate()?;
    if !(l.is_finite() && l >= 0.0) {
        return Err(Error::domain(format!("L must be >= 0, got {l}")));
    }
    rhs_unchecked(problem, l)
}

fn rhs_unchecked(problem: &CensorProblem, l: f64) -> Result<RhsTerms> {
    let scheme = &problem.scheme;
    let (t, _) = scheme.window();
    let duration = scheme.duration();
    let strike = (1.0 + problem.rule.markup()) * l;
    let signature = problem.rule.signature();
    let params = &problem.firm_params;
    let pair_at = |u: f64| branch_pair(&expectations_at(params, strike, u - t), signature);

    let tol = Tolerance::relative(RHS_QUADRATURE_REL_TOL).with_abs(1e-15);
    let mut s1 = 0.0;
    let mut tail = 0.0;
    for &(lo, hi) in scheme.continuous_intervals() {
        let with_interval = |e: Error| match e {
            Error::Numeric(msg) => {
                Error::Numeric(format!("continuous interval [{lo}, {hi}]: {msg}"))
            }
            other => other,
        };
        s1 += adaptive(|u| pair_at(u).0, lo, hi, tol)
            .map_err(with_interval)?
            .value
            / duration;
        tail += adaptive(|u| pair_at(u).1, lo, hi, tol)
            .map_err(with_interval)?
            .value
            / duration;
    }
    if let Some(q) = scheme.q() {
        for &u in scheme.discrete_times() {
            let (m, p) = pair_at(u);
            s1 += q * m;
            tail += q * p;
        }
    }
    let terms = RhsTerms {
        n_term: (1.0 - scheme.vol_c() / duration) * l,
        s1_term: s1,
        s2_term: l * tail,
    };
    if !terms.sum().is_finite() {
        return Err(Error::numeric(format!(
            "non-finite right-hand side at L = {l}"
        )));
    }
    Ok(terms)
}

/// Value of `S1` as `L → ∞`, where its indicator covers everything (bad
/// news) or nothing (good news).
fn s1_at_infinity(problem: &CensorProblem) -> Result<f64> {
    if problem.rule.signature() == Signature::Good {
        return Ok(0.0);
    }
    let scheme = &problem.scheme;
    let (t, _) = scheme.window();
    let mean = |u: f64| {
        problem.firm_params.start_value() * (problem.firm_params.arithmetic_drift() * (u - t)).exp()
    };
    let mut total = 0.0;
    for &(lo, hi) in scheme.continuous_intervals() {
        total += adaptive(mean, lo, hi, Tolerance::relative(RHS_QUADRATURE_REL_TOL))?.value
            / scheme.duration();
    }
    if let Some(q) = scheme.q() {
        total += scheme
            .discrete_times()
            .iter()
            .map(|&u| q * mean(u))
            .sum::<f64>();
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionFlag {
    pub name: String,
    pub holds: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExistenceReport {
    pub branch: Signature,
    pub condition_flags: Vec<ConditionFlag>,
    pub rhs_at_zero: RhsTerms,
    pub s1_at_infinity: f64,
}

impl ExistenceReport {
    pub fn all_hold(&self) -> bool {
        self.condition_flags.iter().all(|f| f.holds)
    }

    pub fn failed(&self) -> Vec<String> {
        self.condition_flags
            .iter()
            .filter(|f| !f.holds)
            .map(|f| f.name.clone())
            .collect()
    }
}

pub const FLAG_BAD_CONTINUITY: &str = "(1) BS1, BS2 continuous";
pub const FLAG_BAD_BOUNDED: &str = "(2) BS1(inf) > -inf";
pub const FLAG_BAD_COVERAGE: &str = "(3) vol(C) != T-t";
pub const FLAG_BAD_START: &str = "(4) 1 >= BS1(0)";
pub const FLAG_GOOD_CONTINUITY: &str = "(i) GS1, GS2 continuous";
pub const FLAG_GOOD_START: &str = "(ii) 1 >= GS1(0)";

/// Sufficient conditions for a root of `rhs_sum(L) = 1`.
pub fn check_existence(problem: &CensorProblem) -> Result<ExistenceReport> {
    problem.validate()?;
    let at_zero = rhs_unchecked(problem, 0.0)?;
    let s1_inf = s1_at_infinity(problem)?;
    let continuity_note =
        "holds by construction: lognormal moments are continuous in L".to_string();
    let flags = match problem.rule.signature() {
        Signature::Bad => vec![
            ConditionFlag {
                name: FLAG_BAD_CONTINUITY.into(),
                holds: true,
                note: continuity_note,
            },
            ConditionFlag {
                name: FLAG_BAD_BOUNDED.into(),
                holds: s1_inf.is_finite(),
                note: format!("BS1(inf) = {s1_inf}"),
            },
            ConditionFlag {
                name: FLAG_BAD_COVERAGE.into(),
                holds: !problem.scheme.is_fully_covered(),
                note: format!(
                    "vol(C) = {}, T-t = {}; BS2 stays bounded for bad news",
                    problem.scheme.vol_c(),
                    problem.scheme.duration()
                ),
            },
            ConditionFlag {
                name: FLAG_BAD_START.into(),
                holds: at_zero.s1_term <= 1.0,
                note: format!("BS1(0) = {}", at_zero.s1_term),
            },
        ],
        Signature::Good => vec![
            ConditionFlag {
                name: FLAG_GOOD_CONTINUITY.into(),
                holds: true,
                note: continuity_note,
            },
            ConditionFlag {
                name: FLAG_GOOD_START.into(),
                holds: at_zero.s1_term <= 1.0,
                note: format!("GS1(0) = {}", at_zero.s1_term),
            },
        ],
    };
    Ok(ExistenceReport {
        branch: problem.rule.signature(),
        condition_flags: flags,
        rhs_at_zero: at_zero,
        s1_at_infinity: s1_inf,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensorSolution {
    pub l_vt: f64,
    /// `rhs_sum(l_vt) - 1`.
    pub residual: f64,
    pub branch: Signature,
    pub iterations: usize,
    pub rhs_components: RhsTerms,
    /// The new target `VT+`, equal to `l_vt`.
    pub vt_plus: f64,
    pub weight_mass: f64,
}

/// Bracketing bisection on `f(L) = rhs_sum(L) - 1`.
pub fn solve_censor(problem: &CensorProblem, tol: f64) -> Result<CensorSolution> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::domain(format!(
            "solver tolerance must be > 0, got {tol}"
        )));
    }
    problem.validate()?;
    let existence = check_existence(problem)?;
    if problem.rule.signature() == Signature::Bad && problem.scheme.is_fully_covered() {
        return Err(Error::Existence {
            failed: vec![FLAG_BAD_COVERAGE.into()],
            detail:
                "continuous monitoring covers the whole window; the right-hand side stays bounded"
                    .into(),
        });
    }
    let mut iterations = 0;
    let done = |l: f64, terms: RhsTerms, iterations: usize| CensorSolution {
        l_vt: l,
        residual: terms.sum() - 1.0,
        branch: problem.rule.signature(),
        iterations,
        rhs_components: terms,
        vt_plus: l,
        weight_mass: problem.scheme.weight_mass(),
    };

    let f0 = existence.rhs_at_zero;
    if (f0.sum() - 1.0).abs() <= tol {
        return Ok(done(0.0, f0, 0));
    }
    if f0.sum() > 1.0 {
        return Err(Error::Existence {
            failed: existence.failed(),
            detail: format!("rhs_sum(0) = {} exceeds 1; no root on [0, inf)", f0.sum()),
        });
    }

    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut f_hi = rhs_unchecked(problem, hi)?;
    iterations += 1;
    while f_hi.sum() - 1.0 < -tol {
        lo = hi;
        hi *= 2.0;
        if hi > BRACKET_CAP {
            let mut failed = existence.failed();
            if failed.is_empty() {
                failed.push("bracket".into());
            }
            return Err(Error::Existence {
                failed,
                detail: format!(
                    "rhs_sum stays below 1 up to L = 2^60 (rhs_sum = {})",
                    f_hi.sum()
                ),
            });
        }
        f_hi = rhs_unchecked(problem, hi)?;
        iterations += 1;
    }
    if (f_hi.sum() - 1.0).abs() <= tol {
        return Ok(done(hi, f_hi, iterations));
    }

    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let terms = rhs_unchecked(problem, mid)?;
        iterations += 1;
        let f = terms.sum() - 1.0;
        if f.abs() <= tol {
            return Ok(done(mid, terms, iterations));
        }
        if f < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::numeric(format!(
        "bisection stalled on [{lo}, {hi}] without meeting tolerance {tol}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::stream_rng;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn firm(drift: f64, sigma: f64) -> GbmParams {
        GbmParams::with_arithmetic_drift(drift, sigma, 1.0, 0.0).unwrap()
    }

    fn problem(scheme: ObservationScheme, rule: DecisionRule, params: GbmParams) -> CensorProblem {
        CensorProblem {
            scheme,
            rule,
            firm_params: params,
            vt_label: 1.0,
        }
    }

    fn single_observation() -> ObservationScheme {
        ObservationScheme::new((0.0, 1.0), vec![], vec![0.5]).unwrap()
    }

    #[test]
    fn scheme_validation() {
        assert!(ObservationScheme::new((1.0, 0.0), vec![], vec![]).is_err());
        assert!(ObservationScheme::new((0.0, 1.0), vec![(0.2, 0.5), (0.4, 0.6)], vec![]).is_err());
        assert!(ObservationScheme::new((0.0, 1.0), vec![(0.2, 1.5)], vec![]).is_err());
        assert!(ObservationScheme::new((0.0, 1.0), vec![(0.2, 0.5)], vec![0.3]).is_err());
        assert!(ObservationScheme::new((0.0, 1.0), vec![], vec![0.6, 0.3]).is_err());
        let s = ObservationScheme::new((0.0, 1.0), vec![(0.5, 0.7), (0.0, 0.3)], vec![0.3, 0.9])
            .unwrap();
        assert_eq!(s.continuous_intervals()[0], (0.0, 0.3));
        assert!((s.vol_c() - 0.5).abs() < 1e-15);
        assert_eq!(s.q(), Some(0.5));
        let json = serde_json::to_string(&s).unwrap();
        let back: ObservationScheme = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn payoff_examples() {
        let g = DecisionRule::good(0.0).unwrap();
        assert_eq!(z_payoff(&g, 2.0, 1.0), 2.0);
        assert_eq!(z_payoff(&g, 0.5, 1.0), 1.0);
        let b = DecisionRule::bad(0.2).unwrap();
        assert!((z_payoff(&b, 1.1, 1.0) - 1.1).abs() < 1e-15);
        assert!((z_payoff_indicator(&b, 1.1, 1.0) - 1.1).abs() < 1e-15);
    }

    #[test]
    fn expectations_at_zero_strike() {
        let p = firm(0.05, 0.3);
        let e = gbm_expectations(&p, &DecisionRule::good(0.0).unwrap(), 0.0, 0.5).unwrap();
        assert_eq!(e.tail_prob_ge, 1.0);
        assert_eq!(e.partial_mean_ge, e.mean);
        assert!((e.mean - (0.05f64 * 0.5).exp()).abs() < 1e-15);
        assert!(gbm_expectations(&p, &DecisionRule::good(0.0).unwrap(), 1.0, 0.0).is_err());
    }

    #[test]
    fn expectations_degenerate_diffusion_are_steps() {
        let p = firm(0.1, 1e-9);
        let rule = DecisionRule::good(0.0).unwrap();
        let centre = (0.1f64).exp();
        let below = gbm_expectations(&p, &rule, centre * 0.99, 1.0).unwrap();
        let above = gbm_expectations(&p, &rule, centre * 1.01, 1.0).unwrap();
        assert_eq!(below.tail_prob_ge, 1.0);
        assert_eq!(above.tail_prob_ge, 0.0);
    }

    #[test]
    fn expectations_match_lognormal_sampling() {
        let p = firm(0.05, 0.3);
        let rule = DecisionRule::good(0.0).unwrap();
        let (l, s) = (1.1, 0.5);
        let e = gbm_expectations(&p, &rule, l, s).unwrap();
        let n = 1_000_000;
        let mut rng = stream_rng(2024, 0);
        let mut acc = [[0.0f64; 2]; 5];
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            let x = (p.mu() * s + p.sigma() * s.sqrt() * z).exp();
            let ge = x >= l;
            let vals = [
                x,
                f64::from(u8::from(ge)),
                f64::from(u8::from(!ge)),
                if ge { x } else { 0.0 },
                if ge { 0.0 } else { x },
            ];
            for (a, v) in acc.iter_mut().zip(vals) {
                a[0] += v;
                a[1] += v * v;
            }
        }
        let exact = [
            e.mean,
            e.tail_prob_ge,
            e.tail_prob_le,
            e.partial_mean_ge,
            e.partial_mean_le,
        ];
        for (k, (a, x)) in acc.iter().zip(exact).enumerate() {
            let m = a[0] / n as f64;
            let se = ((a[1] / n as f64 - m * m) / n as f64).sqrt();
            assert!(
                (m - x).abs() <= 3.0 * se,
                "quantity {k}: mc {m} exact {x} se {se}"
            );
        }
    }

    #[test]
    fn no_monitoring_gives_unit_censor() {
        let pr = problem(
            ObservationScheme::unmonitored(0.0, 1.0).unwrap(),
            DecisionRule::good(0.0).unwrap(),
            firm(0.05, 0.3),
        );
        let terms = rhs(&pr, 0.7).unwrap();
        assert_eq!(
            terms,
            RhsTerms {
                n_term: 0.7,
                s1_term: 0.0,
                s2_term: 0.0
            }
        );
        let sol = solve_censor(&pr, 1e-12).unwrap();
        assert_eq!(sol.l_vt, 1.0);
        assert_eq!(sol.vt_plus, 1.0);
    }

    #[test]
    fn vanilla_call_form_at_zero_markup() {
        let scheme = ObservationScheme::new((0.0, 1.0), vec![], vec![0.25, 0.5, 1.0]).unwrap();
        let p = firm(0.04, 0.25);
        let pr = problem(scheme, DecisionRule::good(0.0).unwrap(), p);
        let l = 0.9;
        let calls: f64 = [0.25, 0.5, 1.0]
            .iter()
            .map(|&u| {
                let e = expectations_at(&p, l, u);
                e.partial_mean_ge - l * e.tail_prob_ge
            })
            .sum();
        let expect = 2.0 * l + calls / 3.0;
        assert!((rhs(&pr, l).unwrap().sum() - expect).abs() < 1e-14);
    }

    #[test]
    fn deterministic_limits() {
        let p = firm(0.0, 1e-12);
        let good = problem(single_observation(), DecisionRule::good(0.0).unwrap(), p);
        let sol = solve_censor(&good, 1e-10).unwrap();
        assert!(sol.l_vt.abs() < 1e-8);
        assert!((rhs(&good, 0.0).unwrap().sum() - 1.0).abs() < 1e-12);
        let bad = problem(single_observation(), DecisionRule::bad(0.0).unwrap(), p);
        let sol = solve_censor(&bad, 1e-10).unwrap();
        assert!((sol.l_vt - 0.5).abs() < 1e-8);
        assert!((rhs(&bad, 0.5).unwrap().sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn existence_first_moment_flag() {
        let pr = problem(
            single_observation(),
            DecisionRule::good(0.0).unwrap(),
            firm(0.01, 0.2),
        );
        let rep = check_existence(&pr).unwrap();
        assert!((rep.rhs_at_zero.s1_term - (0.005f64).exp()).abs() < 1e-14);
        assert!(!rep.all_hold());

        let scheme = ObservationScheme::new((0.0, 1.0), vec![], vec![0.9]).unwrap();
        let pr = problem(scheme, DecisionRule::good(0.0).unwrap(), firm(0.5, 0.2));
        let rep = check_existence(&pr).unwrap();
        assert!((rep.rhs_at_zero.s1_term - (0.45f64).exp()).abs() < 1e-14);
        match solve_censor(&pr, 1e-10) {
            Err(Error::Existence { failed, .. }) => {
                assert_eq!(failed, vec![FLAG_GOOD_START.to_string()])
            }
            other => panic!("expected existence failure, got {other:?}"),
        }
    }

    #[test]
    fn full_coverage_refused_for_bad_news() {
        let scheme = ObservationScheme::new((0.0, 1.0), vec![(0.0, 1.0)], vec![]).unwrap();
        let pr = problem(
            scheme.clone(),
            DecisionRule::bad(0.0).unwrap(),
            firm(0.0, 0.2),
        );
        let rep = check_existence(&pr).unwrap();
        assert!(rep.failed().contains(&FLAG_BAD_COVERAGE.to_string()));
        match solve_censor(&pr, 1e-10) {
            Err(Error::Existence { failed, .. }) => {
                assert_eq!(failed, vec![FLAG_BAD_COVERAGE.to_string()])
            }
            other => panic!("expected existence failure, got {other:?}"),
        }
        let good = problem(scheme, DecisionRule::good(0.0).unwrap(), firm(-0.2, 0.2));
        let sol = solve_censor(&good, 1e-10).unwrap();
        assert!(sol.residual.abs() <= 1e-10);
    }

    #[test]
    fn solver_rejects_bad_tolerance_and_normalization() {
        let pr = problem(
            single_observation(),
            DecisionRule::good(0.0).unwrap(),
            firm(0.0, 0.2),
        );
        assert!(matches!(solve_censor(&pr, 0.0), Err(Error::Domain(_))));
        let mut off = pr.clone();
        off.firm_params = GbmParams::new(0.0, 0.2, 2.0, 0.0).unwrap();
        assert!(matches!(
            solve_censor(&off, 1e-10),
            Err(Error::Validation { .. })
        ));
    }

    #[test]
    fn generic_mixed_scheme_solves() {
        let scheme = ObservationScheme::new((0.0, 1.0), vec![(0.0, 0.3)], vec![0.6, 0.9]).unwrap();
        for rule in [
            DecisionRule::good(0.1).unwrap(),
            DecisionRule::bad(0.1).unwrap(),
            DecisionRule::bad(0.0).unwrap(),
        ] {
            let pr = problem(scheme.clone(), rule, firm(-0.6, 0.3));
            let sol = solve_censor(&pr, 1e-10).unwrap();
            assert!(sol.residual.abs() <= 1e-10, "{rule:?}: {sol:?}");
            let again = rhs(&pr, sol.l_vt).unwrap();
            assert!((again.sum() - 1.0).abs() <= 1e-10);
            assert!((sol.rhs_components.sum() - 1.0 - sol.residual).abs() < 1e-15);
        }
    }

    #[test]
    fn rhs_growth_for_large_l() {
        let scheme = ObservationScheme::new((0.0, 1.0), vec![(0.1, 0.4)], vec![0.6]).unwrap();
        for rule in [
            DecisionRule::good(0.1).unwrap(),
            DecisionRule::bad(0.1).unwrap(),
        ] {
            let pr = problem(scheme.clone(), rule, firm(0.05, 0.3));
            let n_weight = 1.0 - scheme.vol_c() / scheme.duration();
            for l in [1e3, 1e6] {
                let grow = rhs(&pr, 2.0 * l).unwrap().sum() - rhs(&pr, l).unwrap().sum();
                assert!(grow >= n_weight * l * (1.0 - 1e-9));
            }
        }
    }

    proptest! {
        #[test]
        fn payoff_forms_agree(a in -0.9f64..1.0, x in 0.0f64..5.0, l in 0.0f64..5.0, good in any::<bool>()) {
            let rule = if good { DecisionRule::good(a) } else { DecisionRule::bad(a) }.unwrap();
            prop_assert!((z_payoff(&rule, x, l) - z_payoff_indicator(&rule, x, l)).abs() <= 1e-14 * (1.0 + x + l));
        }

        #[test]
        fn expectation_partitions(drift in -0.5f64..0.5, sigma in 0.05f64..1.0, l in 0.0f64..3.0,
                                  a in -0.5f64..0.5, s in 0.01f64..2.0) {
            let p = firm(drift, sigma);
            let e = gbm_expectations(&p, &DecisionRule::good(a).unwrap(), l, s).unwrap();
            prop_assert!((e.tail_prob_ge + e.tail_prob_le - 1.0).abs() <= 1e-12);
            prop_assert!((e.partial_mean_ge + e.partial_mean_le - e.mean).abs() <= 1e-12 * e.mean.max(1.0));
        }

        #[test]
        fn good_bad_consistency_at_zero_markup(drift in -0.5f64..0.5, sigma in 0.05f64..1.0, l in 0.0f64..3.0, d in 0.05f64..1.0) {
            let scheme = ObservationScheme::new((0.0, 1.0), vec![(0.0, 0.4)], vec![d]).unwrap_or_else(|_| ObservationScheme::new((0.0, 1.0), vec![(0.0, 0.4)], vec![]).unwrap());
            let p = firm(drift, sigma);
            let g = rhs(&problem(scheme.clone(), DecisionRule::good(0.0).unwrap(), p), l).unwrap();
            let b = rhs(&problem(scheme.clone(), DecisionRule::bad(0.0).unwrap(), p), l).unwrap();
            let unconditional = rhs(&problem(scheme.clone(), DecisionRule::bad(0.0).unwrap(), p), 1e300).unwrap().s1_term;
            let weights = scheme.vol_c() / scheme.duration() + if scheme.q().is_some() { 1.0 } else { 0.0 };
            prop_assert!((g.s1_term + b.s1_term - unconditional).abs() <= 1e-9 * unconditional.max(1.0));
            prop_assert!((g.s2_term + b.s2_term - l * weights).abs() <= 1e-9 * l.max(1.0));
        }
    }
}
