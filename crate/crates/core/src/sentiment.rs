//! Market sentiment of a silent firm: `V* = E* · Q*(trigger) · e^{-r(T1 - t)}`
//! with closed-form first-passage probabilities for the running maximum and
//! minimum of a geometric Brownian tracker.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{self, McConfig};
use crate::process::{GbmParams, PerformanceIndex};
use crate::rules::{DecisionRule, Signature};
use crate::specialfn::{erfc_raw, exp_times_erfc};

/// Horizons below this collapse the probabilities to indicators.
pub const MIN_HORIZON: f64 = 1e-12;

/// Full market state at valuation time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentInputs {
    pub s_star_t: f64,
    pub vt: f64,
    pub vc: f64,
    pub market_rule: DecisionRule,
    pub r: f64,
    pub t: f64,
    pub t1: f64,
    pub market_params: GbmParams,
    pub index: PerformanceIndex,
}

impl SentimentInputs {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("s_star_t", self.s_star_t),
            ("vt", self.vt),
            ("vc", self.vc),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(key, format!("must be > 0, got {v}")));
            }
        }
        for (key, v) in [("r", self.r), ("t", self.t), ("t1", self.t1)] {
            if !v.is_finite() {
                return Err(Error::validation(key, format!("must be finite, got {v}")));
            }
        }
        if self.t >= self.t1 {
            return Err(Error::validation(
                "t1",
                format!("must exceed t = {}, got {}", self.t, self.t1),
            ));
        }
        Ok(())
    }

    /// `E* = (1 + a*) VT`, the trigger level of the market rule.
    pub fn threshold(&self) -> f64 {
        self.market_rule.indifference_value(self.vt)
    }

    /// Log-moneyness `A* = log((1 + a*) VT / S*_t)`.
    pub fn a_star_log(&self) -> f64 {
        (self.threshold() / self.s_star_t).ln()
    }

    pub fn horizon(&self) -> f64 {
        self.t1 - self.t
    }

    pub fn discount(&self) -> f64 {
        (-self.r * self.horizon()).exp()
    }
}

/// `P(max_{[0,Δ]} (μu + σW_u) ≥ a)`.
pub fn running_max_tail(mu: f64, sigma: f64, a: f64, horizon: f64) -> f64 {
    if a <= 0.0 {
        return 1.0;
    }
    if horizon < MIN_HORIZON {
        return 0.0;
    }
    let scale = sigma * (2.0 * horizon).sqrt();
    let drift = horizon * mu;
    let direct = 0.5 * erfc_raw((a - drift) / scale);
    let reflected = 0.5 * exp_times_erfc(2.0 * mu * a / (sigma * sigma), (a + drift) / scale);
    (direct + reflected).clamp(0.0, 1.0)
}

/// `P(min_{[0,Δ]} (μu + σW_u) ≥ a)`.
pub fn running_min_survival(mu: f64, sigma: f64, a: f64, horizon: f64) -> f64 {
    if a >= 0.0 {
        return 0.0;
    }
    if horizon < MIN_HORIZON {
        return 1.0;
    }
    let scale = sigma * (2.0 * horizon).sqrt();
    let drift = horizon * mu;
    let direct = 0.5 * erfc_raw((a - drift) / scale);
    let reflected = 0.5 * exp_times_erfc(2.0 * mu * a / (sigma * sigma), -(a + drift) / scale);
    (direct - reflected).clamp(0.0, 1.0)
}

fn require_index(inputs: &SentimentInputs, want: PerformanceIndex) -> Result<()> {
    if inputs.index != want {
        return Err(Error::domain(format!(
            "operation needs index {}, inputs carry {}",
            want.name(),
            inputs.index.name()
        )));
    }
    Ok(())
}

/// `Q*(max S* ≥ (1 + a*) VT | F*_t)`.
pub fn prob_running_max_trigger(inputs: &SentimentInputs) -> Result<f64> {
    inputs.validate()?;
    require_index(inputs, PerformanceIndex::RunningMax)?;
    let p = &inputs.market_params;
    Ok(running_max_tail(
        p.mu(),
        p.sigma(),
        inputs.a_star_log(),
        inputs.horizon(),
    ))
}

/// `Q*(min S* ≥ (1 + a*) VT | F*_t)`.
pub fn prob_running_min_trigger(inputs: &SentimentInputs) -> Result<f64> {
    inputs.validate()?;
    require_index(inputs, PerformanceIndex::RunningMin)?;
    let p = &inputs.market_params;
    Ok(running_min_survival(
        p.mu(),
        p.sigma(),
        inputs.a_star_log(),
        inputs.horizon(),
    ))
}

/// Closed-form `Q*(Σ* ≥ (1 + a*) VT | F*_t)` for the extremum indices.
pub fn prob_index_at_least(inputs: &SentimentInputs) -> Result<f64> {
    match inputs.index {
        PerformanceIndex::RunningMax => prob_running_max_trigger(inputs),
        PerformanceIndex::RunningMin => prob_running_min_trigger(inputs),
        PerformanceIndex::RunningAverage => Err(Error::domain(
            "no closed form for the running average; use the Monte Carlo oracle",
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SentimentValue {
    pub v_star: f64,
    pub prob_good: f64,
    pub prob_bad: f64,
    pub e_star: f64,
    pub discount: f64,
    /// `ΔE* = E* - S*_t`.
    pub delta_e: f64,
}

impl SentimentValue {
    /// Probability of the branch selected by `signature`.
    pub fn prob_branch(&self, signature: Signature) -> f64 {
        match signature {
            Signature::Good => self.prob_good,
            Signature::Bad => self.prob_bad,
        }
    }
}

/// Sentiment value. The running average has no closed form and is
/// estimated with the default Monte Carlo configuration.
pub fn sentiment_value(inputs: &SentimentInputs) -> Result<SentimentValue> {
    sentiment_value_with(inputs, &McConfig::default())
}

/// As [`sentiment_value`], with an explicit Monte Carlo configuration for the
/// running average.
pub fn sentiment_value_with(inputs: &SentimentInputs, cfg: &McConfig) -> Result<SentimentValue> {
    inputs.validate()?;
    let prob_good = match inputs.index {
        PerformanceIndex::RunningAverage => {
            let good = SentimentInputs {
                market_rule: DecisionRule::good(inputs.market_rule.markup())?,
                ..*inputs
            };
            oracle::mc_trigger_probability(&good, cfg)?.mean
        }
        _ => prob_index_at_least(inputs)?,
    };
    Ok(compose(inputs, prob_good))
}

pub(crate) fn compose(inputs: &SentimentInputs, prob_good: f64) -> SentimentValue {
    let prob_bad = 1.0 - prob_good;
    let e_star = inputs.threshold();
    let discount = inputs.discount();
    let branch = match inputs.market_rule.signature() {
        Signature::Good => prob_good,
        Signature::Bad => prob_bad,
    };
    SentimentValue {
        v_star: e_star * branch * discount,
        prob_good,
        prob_bad,
        e_star,
        discount,
        delta_e: e_star - inputs.s_star_t,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{adaptive, Tolerance};
    use proptest::prelude::*;

    pub(crate) fn inputs(
        mu: f64,
        sigma: f64,
        horizon: f64,
        s: f64,
        threshold: f64,
    ) -> SentimentInputs {
        SentimentInputs {
            s_star_t: s,
            vt: threshold,
            vc: 1.0,
            market_rule: DecisionRule::good(0.0).unwrap(),
            r: 0.0,
            t: 0.0,
            t1: horizon,
            market_params: GbmParams::new(mu, sigma, s, 0.0).unwrap(),
            index: PerformanceIndex::RunningMax,
        }
    }

    /// Max tail by integrating the first-passage density
    /// `a / (σ √(2π u³)) exp(-(a - μu)² / (2σ²u))` over `[0, Δ]`.
    fn first_passage_oracle(mu: f64, sigma: f64, a: f64, horizon: f64) -> f64 {
        let density = |u: f64| {
            if u <= 0.0 {
                return 0.0;
            }
            let z = a - mu * u;
            a / (sigma * (2.0 * std::f64::consts::PI * u * u * u).sqrt())
                * (-(z * z) / (2.0 * sigma * sigma * u)).exp()
        };
        adaptive(density, 0.0, horizon, Tolerance::relative(1e-12))
            .unwrap()
            .value
    }

    #[test]
    fn in_the_money_is_certain() {
        let i = inputs(0.05, 0.3, 1.0, 2.0, 1.0);
        assert_eq!(prob_running_max_trigger(&i).unwrap(), 1.0);
    }

    #[test]
    fn zero_drift_terms_merge() {
        let i = inputs(0.0, 0.3, 1.0, 1.0, 1.2);
        let a = i.a_star_log();
        let expect = libm::erfc(a / (0.3 * 2f64.sqrt()));
        assert!((prob_running_max_trigger(&i).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn closed_form_matches_first_passage_density() {
        for &(mu, sigma, a, h) in &[
            (0.05, 0.3, 0.182, 1.0),
            (-0.1, 0.2, 0.2, 1.0),
            (0.3, 0.4, 0.5, 2.0),
            (-0.02, 0.25, 0.05, 0.5),
        ] {
            let closed = running_max_tail(mu, sigma, a, h);
            let oracle = first_passage_oracle(mu, sigma, a, h);
            assert!(
                (closed - oracle).abs() < 1e-10,
                "{mu} {sigma} {a}: {closed} vs {oracle}"
            );
        }
    }

    #[test]
    fn running_min_out_of_the_money_is_zero() {
        let mut i = inputs(0.05, 0.3, 1.0, 1.0, 1.5);
        i.index = PerformanceIndex::RunningMin;
        assert_eq!(prob_running_min_trigger(&i).unwrap(), 0.0);
    }

    #[test]
    fn wrong_index_is_rejected() {
        let i = inputs(0.05, 0.3, 1.0, 1.0, 1.5);
        assert!(prob_running_min_trigger(&i).is_err());
        let mut avg = i;
        avg.index = PerformanceIndex::RunningAverage;
        assert!(prob_index_at_least(&avg).is_err());
    }

    #[test]
    fn certain_trigger_sentiment_is_discounted_target() {
        let mut i = inputs(0.05, 0.3, 2.0, 2.0, 1.0);
        i.market_rule = DecisionRule::good(0.1).unwrap();
        i.r = 0.03;
        let v = sentiment_value(&i).unwrap();
        assert!((v.v_star - 1.1 * (-0.06f64).exp()).abs() < 1e-15);
        i.r = 0.0;
        let v = sentiment_value(&i).unwrap();
        assert_eq!(v.v_star, 1.1);
        assert!((v.delta_e - (1.1 - 2.0)).abs() < 1e-15);
    }

    #[test]
    fn tiny_horizon_collapses_to_indicator() {
        assert_eq!(running_max_tail(0.1, 0.2, 0.1, 1e-13), 0.0);
        assert_eq!(running_max_tail(0.1, 0.2, -0.1, 1e-13), 1.0);
        assert_eq!(running_min_survival(0.1, 0.2, -0.1, 1e-13), 1.0);
    }

    #[test]
    fn extreme_parameters_stay_finite() {
        for &(mu, sigma, a, h) in &[
            (5.0, 0.05, 3.0, 10.0),
            (-5.0, 0.05, 3.0, 10.0),
            (1.0, 0.01, 0.5, 1.0),
        ] {
            let p = running_max_tail(mu, sigma, a, h);
            assert!(
                p.is_finite() && (0.0..=1.0).contains(&p),
                "{mu} {sigma} {a}: {p}"
            );
            let q = running_min_survival(mu, sigma, -a, h);
            assert!(q.is_finite() && (0.0..=1.0).contains(&q));
        }
        assert!((running_max_tail(5.0, 0.05, 3.0, 10.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_inputs_rejected() {
        let mut i = inputs(0.05, 0.3, 1.0, 1.0, 1.5);
        i.t1 = i.t;
        assert!(matches!(sentiment_value(&i), Err(Error::Validation { .. })));
    }

    proptest! {
        #[test]
        fn complementarity(mu in -0.5f64..0.5, sigma in 0.05f64..1.0, a in -1.0f64..1.0, h in 0.01f64..3.0,
                           bad in any::<bool>(), min in any::<bool>()) {
            let mut i = inputs(mu, sigma, h, 1.0, a.exp());
            if bad { i.market_rule = DecisionRule::bad(0.0).unwrap(); }
            if min { i.index = PerformanceIndex::RunningMin; }
            let v = sentiment_value(&i).unwrap();
            prop_assert!((v.prob_good + v.prob_bad - 1.0).abs() <= 1e-12);
            let branch = v.prob_branch(i.market_rule.signature());
            prop_assert!((v.v_star - v.e_star * branch * v.discount).abs() <= 1e-12);
        }

        #[test]
        fn min_max_duality(mu in -0.5f64..0.5, sigma in 0.05f64..1.0, a in -1.0f64..1.0, h in 0.01f64..3.0) {
            let lhs = running_min_survival(mu, sigma, a, h);
            let rhs = 1.0 - running_max_tail(-mu, sigma, -a, h);
            prop_assert!((lhs - rhs).abs() <= 1e-12, "{} vs {}", lhs, rhs);
        }

        #[test]
        fn boundary_continuity(mu in -0.5f64..0.5, sigma in 0.05f64..1.0, h in 0.01f64..3.0) {
            prop_assert!((running_max_tail(mu, sigma, 1e-12, h) - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn max_tail_monotone(mu in -0.5f64..0.5, sigma in 0.05f64..1.0, h in 0.01f64..3.0,
                             a in 0.0f64..1.0, da in 0.0f64..0.5) {
            prop_assert!(running_max_tail(mu, sigma, a + da, h) <= running_max_tail(mu, sigma, a, h) + 1e-15);
        }

        #[test]
        fn max_tail_nondecreasing_in_sigma(s1 in 0.05f64..1.0, ds in 0.0f64..0.5, a in 0.01f64..1.0) {
            // For zero drift the tail rises with volatility.
            prop_assert!(running_max_tail(0.0, s1 + ds, a, 1.0) + 1e-15 >= running_max_tail(0.0, s1, a, 1.0));
        }

        #[test]
        fn firm_and_market_side_agree(mu in -0.5f64..0.5, sigma in 0.05f64..1.0, a in 0.0f64..1.0) {
            let market = inputs(mu, sigma, 1.0, 1.0, a.exp());
            let firm_side = running_max_tail(mu, sigma, a, 1.0);
            let market_side = prob_running_max_trigger(&market).unwrap();
            prop_assert!((firm_side - market_side).abs() <= 1e-15);
        }
    }
}
