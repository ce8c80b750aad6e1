//! Comparative statics of early disclosure.
//!
//! At time `T` the firm discloses good news when
//! `V_T ≥ (1+a) e^{-r(T1-T)} E*_T Q*(Σ* ≥ (1+a*)VT)` and bad news when
//! `V_T ≤ (1+a) e^{-r(T1-T)} E*_T (1 - Q*(Σ* ≥ (1+a*)VT))`. Sensitivities
//! without a closed form are central finite differences of the branch values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::PerformanceIndex;
use crate::rules::{DecisionRule, Signature};
use crate::sentiment::{
    prob_index_at_least, running_max_tail, running_min_survival, SentimentInputs,
};

/// Floor of the relative-error denominator.
pub const REL_ERR_FLOOR: f64 = 1e-12;
/// Shortest horizon accepted by [`partial_t1_minus_t`].
pub const MIN_PARTIAL_HORIZON: f64 = 1e-10;

/// Firm observation and market state at time `T` (stored in `inputs.t`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriggerState {
    pub v_t: f64,
    pub inputs: SentimentInputs,
    pub firm_rule: DecisionRule,
    /// Replaces `E*_T = (1+a*)VT` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_star_override: Option<f64>,
}

impl TriggerState {
    pub fn validate(&self) -> Result<()> {
        self.inputs.validate()?;
        if !(self.v_t.is_finite() && self.v_t > 0.0) {
            return Err(Error::validation(
                "v_t",
                format!("must be > 0, got {}", self.v_t),
            ));
        }
        if let Some(e) = self.e_star_override {
            if !(e.is_finite() && e > 0.0) {
                return Err(Error::validation(
                    "e_star_override",
                    format!("must be > 0, got {e}"),
                ));
            }
        }
        Ok(())
    }

    pub fn e_star(&self) -> f64 {
        self.e_star_override
            .unwrap_or_else(|| self.inputs.threshold())
    }

    /// Same state with `E*_T` pinned at its current value.
    pub fn with_pinned_e_star(&self) -> Self {
        TriggerState {
            e_star_override: Some(self.e_star()),
            ..*self
        }
    }

    fn multiplier(&self) -> f64 {
        (1.0 + self.firm_rule.markup()) * self.e_star() * self.inputs.discount()
    }
}

/// Right-hand side of the applicable trigger inequality.
pub fn trigger_rhs(state: &TriggerState) -> Result<f64> {
    state.validate()?;
    let q = prob_index_at_least(&state.inputs)?;
    let branch = match state.firm_rule.signature() {
        Signature::Good => q,
        Signature::Bad => 1.0 - q,
    };
    Ok(state.multiplier() * branch)
}

/// Whether the firm discloses at `T`.
pub fn fires(state: &TriggerState) -> Result<bool> {
    let rhs = trigger_rhs(state)?;
    Ok(match state.firm_rule.signature() {
        Signature::Good => state.v_t >= rhs,
        Signature::Bad => state.v_t <= rhs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    AStar,
    Vt,
    R,
    A,
    EStar,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::AStar => "a_star",
            SweepParam::Vt => "vt",
            SweepParam::R => "r",
            SweepParam::A => "a",
            SweepParam::EStar => "e_star",
        }
    }
}

/// Set one parameter. `E*_T` is pinned when sweeping `a*` or `VT`, so those
/// sweeps act only through the trigger probability.
pub fn apply_param(state: &TriggerState, param: SweepParam, value: f64) -> Result<TriggerState> {
    let mut s = *state;
    match param {
        SweepParam::AStar => {
            s = s.with_pinned_e_star();
            s.inputs.market_rule = s.inputs.market_rule.with_markup(value)?;
        }
        SweepParam::Vt => {
            s = s.with_pinned_e_star();
            s.inputs.vt = value;
        }
        SweepParam::R => s.inputs.r = value,
        SweepParam::A => s.firm_rule = s.firm_rule.with_markup(value)?,
        SweepParam::EStar => s.e_star_override = Some(value),
    }
    s.validate()?;
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Increasing,
    Decreasing,
    WeaklyIncreasing,
    WeaklyDecreasing,
    Constant,
    NonMonotone,
}

impl Trend {
    pub fn of(values: &[f64]) -> Trend {
        let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
        let up = diffs.iter().all(|&d| d > 0.0);
        let down = diffs.iter().all(|&d| d < 0.0);
        let flat = diffs.iter().all(|&d| d == 0.0);
        if flat {
            Trend::Constant
        } else if up {
            Trend::Increasing
        } else if down {
            Trend::Decreasing
        } else if diffs.iter().all(|&d| d >= 0.0) {
            Trend::WeaklyIncreasing
        } else if diffs.iter().all(|&d| d <= 0.0) {
            Trend::WeaklyDecreasing
        } else {
            Trend::NonMonotone
        }
    }

    /// +1, -1, 0 for constant, `None` when non-monotone.
    pub fn sign(self) -> Option<i8> {
        match self {
            Trend::Increasing | Trend::WeaklyIncreasing => Some(1),
            Trend::Decreasing | Trend::WeaklyDecreasing => Some(-1),
            Trend::Constant => Some(0),
            Trend::NonMonotone => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub param: SweepParam,
    pub branch: Signature,
    pub grid: Vec<f64>,
    pub rhs: Vec<f64>,
    /// `rhs` for good news, `-rhs` for bad news.
    pub proxy: Vec<f64>,
    pub observed: Trend,
    pub predicted_sign: i8,
    /// Direction in which the trigger set itself grows along the grid.
    pub trigger_set_sign: Option<i8>,
    /// The proxy and the trigger set move in opposite directions.
    pub tension: bool,
}

/// Predicted direction of the likelihood proxy along each parameter.
pub fn predicted_sign(branch: Signature, param: SweepParam) -> i8 {
    match (branch, param) {
        (Signature::Good, SweepParam::A | SweepParam::EStar) => 1,
        (Signature::Good, SweepParam::R) => -1,
        (Signature::Bad, SweepParam::R) => 1,
        (Signature::Bad, SweepParam::A | SweepParam::EStar) => -1,
        (_, SweepParam::AStar | SweepParam::Vt) => -1,
    }
}

/// Sweep `param` over `grid` and compare the proxy's direction with the
/// prediction. Ties count as weakly monotone. A contrary or non-monotone
/// pattern is a [`Error::PropertyViolation`].
pub fn monotonicity_sweep(
    state: &TriggerState,
    param: SweepParam,
    grid: &[f64],
) -> Result<MonotonicityReport> {
    if grid.len() < 3 {
        return Err(Error::domain("monotonicity grid needs at least 3 points"));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::domain(
            "monotonicity grid must be strictly increasing",
        ));
    }
    let branch = state.firm_rule.signature();
    let rhs = grid
        .iter()
        .map(|&v| trigger_rhs(&apply_param(state, param, v)?))
        .collect::<Result<Vec<f64>>>()?;
    let proxy: Vec<f64> = match branch {
        Signature::Good => rhs.clone(),
        Signature::Bad => rhs.iter().map(|v| -v).collect(),
    };
    let observed = Trend::of(&proxy);
    let rhs_sign = Trend::of(&rhs).sign();
    let trigger_set_sign = rhs_sign.map(|s| match branch {
        Signature::Good => -s,
        Signature::Bad => s,
    });
    let proxy_sign = observed.sign();
    let predicted = predicted_sign(branch, param);
    let report = MonotonicityReport {
        param,
        branch,
        grid: grid.to_vec(),
        rhs,
        proxy,
        observed,
        predicted_sign: predicted,
        trigger_set_sign,
        tension: matches!((proxy_sign, trigger_set_sign), (Some(p), Some(t)) if p != 0 && p == -t),
    };
    match proxy_sign {
        Some(s) if s == predicted || s == 0 => Ok(report),
        _ => Err(Error::PropertyViolation(format!(
            "{} sweep, {:?} news: proxy {:?} but predicted sign {predicted}; values {:?}",
            param.name(),
            branch,
            observed,
            report.proxy
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Max,
    Min,
}

impl Branch {
    fn index(self) -> PerformanceIndex {
        match self {
            Branch::Max => PerformanceIndex::RunningMax,
            Branch::Min => PerformanceIndex::RunningMin,
        }
    }

    fn of_index(index: PerformanceIndex) -> Result<Branch> {
        match index {
            PerformanceIndex::RunningMax => Ok(Branch::Max),
            PerformanceIndex::RunningMin => Ok(Branch::Min),
            PerformanceIndex::RunningAverage => Err(Error::domain(
                "branch values exist for the running maximum and minimum only",
            )),
        }
    }
}

fn branch_probability(inputs: &SentimentInputs, branch: Branch) -> f64 {
    let p = &inputs.market_params;
    let (mu, sigma, a, h) = (p.mu(), p.sigma(), inputs.a_star_log(), inputs.horizon());
    match branch {
        Branch::Max => running_max_tail(mu, sigma, a, h),
        Branch::Min => running_min_survival(mu, sigma, a, h),
    }
}

/// `V*_branch = (1+a) E*_T e^{-r(T1-T)} Q*_branch`.
pub fn v_star_branch(state: &TriggerState, branch: Branch) -> Result<f64> {
    state.validate()?;
    if state.inputs.index != branch.index() {
        return Err(Error::domain(format!(
            "{branch:?} branch needs index {}, state carries {}",
            branch.index().name(),
            state.inputs.index.name()
        )));
    }
    Ok(state.multiplier() * branch_probability(&state.inputs, branch))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StaticsReport {
    pub v_star_branch: f64,
    pub partial_analytic: f64,
    pub partial_fd: f64,
    pub rel_err: f64,
    pub sign_analytic: i8,
    pub eta: f64,
    pub a_star_t: f64,
}

fn sign_of(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Derivative of `V*_max` in the remaining horizon `T1 - T`.
///
/// For `A*_T ≤ 0` the probability is pinned at 1 and the derivative is
/// `-r V*_max`; otherwise the first-passage density adds
/// `(1+a) E*_T e^{-rΔ} A*_T e^{-η²} / (σ* √(2πΔ³))`.
pub fn partial_t1_minus_t(state: &TriggerState) -> Result<StaticsReport> {
    let v = v_star_branch(state, Branch::Max)?;
    let inputs = &state.inputs;
    let horizon = inputs.horizon();
    if horizon < MIN_PARTIAL_HORIZON {
        return Err(Error::domain(format!(
            "horizon T1 - T = {horizon:e} is below {MIN_PARTIAL_HORIZON:e}"
        )));
    }
    let p = &inputs.market_params;
    let (mu, sigma, a) = (p.mu(), p.sigma(), inputs.a_star_log());
    let eta = (a - horizon * mu) / (sigma * (2.0 * horizon).sqrt());
    let mut analytic = -inputs.r * v;
    if a > 0.0 {
        let density = a * (-eta * eta).exp()
            / (sigma * (2.0 * std::f64::consts::PI * horizon.powi(3)).sqrt());
        analytic += state.multiplier() * density;
    }

    let h = (1e-6f64).max(1e-6 * horizon);
    let shifted = |dh: f64| -> Result<f64> {
        let mut s = *state;
        s.inputs.t1 = inputs.t + horizon + dh;
        v_star_branch(&s, Branch::Max)
    };
    let fd = (shifted(h)? - shifted(-h)?) / (2.0 * h);
    Ok(StaticsReport {
        v_star_branch: v,
        partial_analytic: analytic,
        partial_fd: fd,
        rel_err: (analytic - fd).abs() / analytic.abs().max(REL_ERR_FLOOR),
        sign_analytic: sign_of(analytic),
        eta,
        a_star_t: a,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatePartials {
    /// `∂V*/∂r` at fixed `r - Δ*`: only the discount moves.
    pub d_r: f64,
    /// `∂V*/∂(r - Δ*)` at fixed `r`: only the tracker drift moves.
    pub d_r_minus_delta: f64,
    pub probability: f64,
    pub interior: bool,
    pub sign_note: String,
}

fn fd_step(x: f64) -> f64 {
    1e-6 * x.abs().max(1.0)
}

/// Finite-difference partials of the branch value in `r` and in `r - Δ*`.
pub fn partials_rates(state: &TriggerState) -> Result<RatePartials> {
    let branch = Branch::of_index(state.inputs.index)?;
    let v_at = |s: &TriggerState| v_star_branch(s, branch);
    let r = state.inputs.r;
    let hr = fd_step(r);
    let mut up = *state;
    up.inputs.r = r + hr;
    let mut dn = *state;
    dn.inputs.r = r - hr;
    let d_r = (v_at(&up)? - v_at(&dn)?) / (2.0 * hr);

    let mu = state.inputs.market_params.mu();
    let hm = fd_step(mu);
    let mut up = *state;
    up.inputs.market_params = up.inputs.market_params.with_mu(mu + hm)?;
    let mut dn = *state;
    dn.inputs.market_params = dn.inputs.market_params.with_mu(mu - hm)?;
    let d_rd = (v_at(&up)? - v_at(&dn)?) / (2.0 * hm);

    let probability = branch_probability(&state.inputs, branch);
    let interior = probability > 0.0 && probability < 1.0;
    let sign_note = format!(
        "d_r {} 0, d_(r-delta) {} 0 (E* = {}, probability {})",
        if d_r < 0.0 { "<" } else { ">=" },
        if d_rd < 0.0 { "<" } else { ">=" },
        state.e_star(),
        probability
    );
    Ok(RatePartials {
        d_r,
        d_r_minus_delta: d_rd,
        probability,
        interior,
        sign_note,
    })
}

/// Finite-difference partial of the trigger probability in `S*_T`.
pub fn partial_s_star(state: &TriggerState) -> Result<f64> {
    state.validate()?;
    let s = state.inputs.s_star_t;
    let h = fd_step(s);
    let at = |x: f64| {
        let mut i = state.inputs;
        i.s_star_t = x;
        prob_index_at_least(&i)
    };
    Ok((at(s + h)? - at(s - h)?) / (2.0 * h))
}
