//! Firm value from profit flows: accrual with a reporting lag and
//! Cobb-Douglas profit functions, deterministic and Brownian-driven.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::{standard_draws, GbmParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCobbDouglas")]
pub struct CobbDouglasParams {
    a: f64,
    b: f64,
    p: f64,
    w1: f64,
    w2: f64,
    technology: f64,
}

#[derive(Deserialize)]
struct RawCobbDouglas {
    a: f64,
    b: f64,
    p: f64,
    w1: f64,
    w2: f64,
    technology: Option<f64>,
}

impl TryFrom<RawCobbDouglas> for CobbDouglasParams {
    type Error = Error;

    fn try_from(raw: RawCobbDouglas) -> Result<Self> {
        let params = CobbDouglasParams::new(raw.a, raw.b, raw.p, raw.w1, raw.w2)?;
        match raw.technology {
            Some(t) => params.with_technology(t),
            None => Ok(params),
        }
    }
}

impl CobbDouglasParams {
    /// Output `A x1^a x2^b` with the conventional constant
    /// `A = (1-a)^{a-1} / a^a`.
    pub fn new(a: f64, b: f64, p: f64, w1: f64, w2: f64) -> Result<Self> {
        for (key, v) in [("a", a), ("b", b), ("p", p), ("w1", w1), ("w2", w2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(key, format!("must be > 0, got {v}")));
            }
        }
        if a + b >= 1.0 {
            return Err(Error::domain(format!(
                "returns to scale must be decreasing: a + b = {} >= 1",
                a + b
            )));
        }
        Ok(CobbDouglasParams {
            a,
            b,
            p,
            w1,
            w2,
            technology: (1.0 - a).powf(a - 1.0) / a.powf(a),
        })
    }

    pub fn with_technology(mut self, technology: f64) -> Result<Self> {
        if !(technology.is_finite() && technology > 0.0) {
            return Err(Error::validation(
                "technology",
                format!("must be > 0, got {technology}"),
            ));
        }
        self.technology = technology;
        Ok(self)
    }

    /// Scale all three prices by `lambda`.
    pub fn scaled_prices(&self, lambda: f64) -> Result<Self> {
        CobbDouglasParams::new(
            self.a,
            self.b,
            lambda * self.p,
            lambda * self.w1,
            lambda * self.w2,
        )?
        .with_technology(self.technology)
    }

    pub fn with_prices(&self, p: f64, w1: f64, w2: f64) -> Result<Self> {
        CobbDouglasParams::new(self.a, self.b, p, w1, w2)?.with_technology(self.technology)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn w1(&self) -> f64 {
        self.w1
    }

    pub fn w2(&self) -> f64 {
        self.w2
    }

    pub fn technology(&self) -> f64 {
        self.technology
    }

    /// `c(w) = (w1^a w2^b)^{1/(a+b)}`.
    pub fn cost_index(&self) -> f64 {
        (self.w1.powf(self.a) * self.w2.powf(self.b)).powf(1.0 / (self.a + self.b))
    }

    /// Output level of the technology.
    pub fn output(&self, x1: f64, x2: f64) -> f64 {
        self.technology * x1.powf(self.a) * x2.powf(self.b)
    }

    /// `p · output - w1 x1 - w2 x2`.
    pub fn profit_at(&self, x1: f64, x2: f64) -> f64 {
        self.p * self.output(x1, x2) - self.w1 * x1 - self.w2 * x2
    }
}

/// The two printed forms of the cost constant `κ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaForm {
    /// `((a/b)^{b/k} + (a/b)^{-a/k}) / A^{1/k}`.
    MirroredExponents,
    /// `((a/b)^{a/k} + (a/b)^{-a/k}) / A^{1/k}`.
    CrossedExponents,
}

/// The two printed profit-function layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "form", content = "kappa")]
pub enum ProfitForm {
    /// `p^{1/(1-k)} {(k/(κc))^{k/(1-k)} - κc (k/(κc))^{1/(1-k)}}`.
    CostFunction(KappaForm),
    /// `w1^{a/(k-1)} w2^{b/(k-1)} p^{k-1} {(k/κ)^{k/(1-k)} - κ (k/κ)^{1/(1-k)}}`
    /// with the mirrored `κ`.
    PricePower,
}

impl ProfitForm {
    pub const ALL: [ProfitForm; 3] = [
        ProfitForm::CostFunction(KappaForm::MirroredExponents),
        ProfitForm::CostFunction(KappaForm::CrossedExponents),
        ProfitForm::PricePower,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ProfitForm::CostFunction(KappaForm::MirroredExponents) => {
                "cost_function_mirrored_kappa"
            }
            ProfitForm::CostFunction(KappaForm::CrossedExponents) => "cost_function_crossed_kappa",
            ProfitForm::PricePower => "price_power",
        }
    }
}

pub fn kappa(params: &CobbDouglasParams, form: KappaForm) -> f64 {
    let (a, b) = (params.a, params.b);
    let k = a + b;
    let ratio = a / b;
    let first = match form {
        KappaForm::MirroredExponents => ratio.powf(b / k),
        KappaForm::CrossedExponents => ratio.powf(a / k),
    };
    (first + ratio.powf(-a / k)) / params.technology.powf(1.0 / k)
}

fn braces(k: f64, scale: f64) -> f64 {
    let ratio = k / scale;
    ratio.powf(k / (1.0 - k)) - scale * ratio.powf(1.0 / (1.0 - k))
}

/// Cobb-Douglas profit in the cost-function layout with the mirrored `κ`,
/// which is the form that agrees with direct profit maximization.
pub fn cobb_douglas_profit(params: &CobbDouglasParams) -> Result<f64> {
    cobb_douglas_profit_with(
        params,
        ProfitForm::CostFunction(KappaForm::MirroredExponents),
    )
}

pub fn cobb_douglas_profit_with(params: &CobbDouglasParams, form: ProfitForm) -> Result<f64> {
    let k = params.a + params.b;
    let value = match form {
        ProfitForm::CostFunction(kf) => {
            let scale = kappa(params, kf) * params.cost_index();
            params.p.powf(1.0 / (1.0 - k)) * braces(k, scale)
        }
        ProfitForm::PricePower => {
            let kap = kappa(params, KappaForm::MirroredExponents);
            params.w1.powf(params.a / (k - 1.0))
                * params.w2.powf(params.b / (k - 1.0))
                * params.p.powf(k - 1.0)
                * braces(k, kap)
        }
    };
    if !value.is_finite() {
        return Err(Error::numeric(format!(
            "profit is not finite for {params:?}"
        )));
    }
    Ok(value)
}

/// `|π(λp, λw) - λπ(p, w)| / |λπ(p, w)|`.
pub fn homogeneity_deviation(
    params: &CobbDouglasParams,
    form: ProfitForm,
    lambda: f64,
) -> Result<f64> {
    let base = cobb_douglas_profit_with(params, form)?;
    let scaled = cobb_douglas_profit_with(&params.scaled_prices(lambda)?, form)?;
    Ok((scaled - lambda * base).abs() / (lambda * base).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridOptimum {
    pub profit: f64,
    pub x1: f64,
    pub x2: f64,
}

/// Maximize `profit_at` by brute force over a `resolution × resolution`
/// log-spaced grid, re-centred and narrowed around the incumbent `levels`
/// times.
pub fn profit_by_grid_search(
    params: &CobbDouglasParams,
    resolution: usize,
    levels: usize,
) -> Result<GridOptimum> {
    if resolution < 3 {
        return Err(Error::domain("grid resolution must be >= 3"));
    }
    let (mut lo1, mut hi1) = (-25.0f64, 25.0f64);
    let (mut lo2, mut hi2) = (-25.0f64, 25.0f64);
    let mut best = GridOptimum {
        profit: f64::NEG_INFINITY,
        x1: 0.0,
        x2: 0.0,
    };
    let last = (resolution - 1) as f64;
    for _ in 0..levels.max(1) {
        let step1 = (hi1 - lo1) / last;
        let step2 = (hi2 - lo2) / last;
        let xs2: Vec<f64> = (0..resolution)
            .map(|j| (lo2 + step2 * j as f64).exp())
            .collect();
        let pow2: Vec<f64> = xs2.iter().map(|x| x.powf(params.b)).collect();
        let (mut bi, mut bj) = (0, 0);
        let mut level_best = f64::NEG_INFINITY;
        for i in 0..resolution {
            let x1 = (lo1 + step1 * i as f64).exp();
            let head = params.p * params.technology * x1.powf(params.a);
            let cost1 = params.w1 * x1;
            for j in 0..resolution {
                let v = head * pow2[j] - cost1 - params.w2 * xs2[j];
                if v > level_best {
                    level_best = v;
                    bi = i;
                    bj = j;
                }
            }
        }
        let c1 = lo1 + step1 * bi as f64;
        let c2 = lo2 + step2 * bj as f64;
        if level_best > best.profit {
            best = GridOptimum {
                profit: level_best,
                x1: c1.exp(),
                x2: c2.exp(),
            };
        }
        lo1 = c1 - 2.0 * step1;
        hi1 = c1 + 2.0 * step1;
        lo2 = c2 - 2.0 * step2;
        hi2 = c2 + 2.0 * step2;
    }
    Ok(best)
}

/// Instantaneous profit `π_w` sampled on `[T0, T1]`, with reporting lag `Λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfitPath {
    pub times: Vec<f64>,
    pub pi_values: Vec<f64>,
    pub lag: f64,
}

impl ProfitPath {
    pub fn validate(&self) -> Result<()> {
        if self.times.len() < 2 || self.times.len() != self.pi_values.len() {
            return Err(Error::validation(
                "profit_path",
                "needs at least two times and one value per time",
            ));
        }
        if self.times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::validation(
                "profit_path.times",
                "must be strictly increasing",
            ));
        }
        if self
            .times
            .iter()
            .chain(&self.pi_values)
            .any(|v| !v.is_finite())
        {
            return Err(Error::validation("profit_path", "values must be finite"));
        }
        if !(self.lag.is_finite() && self.lag >= 0.0) {
            return Err(Error::validation(
                "profit_path.lag",
                format!("must be >= 0, got {}", self.lag),
            ));
        }
        Ok(())
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValueDecomposition {
    pub v_u: f64,
    /// Accrual already certain at `u`.
    pub delta_ns: f64,
    /// Accrual still uncertain at `u` (the last `Λ` of the window).
    pub delta_s: f64,
    pub vc: f64,
}

/// Integral over `[lo, hi]` of the piecewise-linear interpolant of
/// `(times, values)`.
fn integrate_linear(times: &[f64], values: &[f64], lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let interp = |k: usize, x: f64| {
        let w = (x - times[k]) / (times[k + 1] - times[k]);
        values[k] + w * (values[k + 1] - values[k])
    };
    let mut total = 0.0;
    for k in 0..times.len() - 1 {
        let a = times[k].max(lo);
        let b = times[k + 1].min(hi);
        if b > a {
            total += 0.5 * (b - a) * (interp(k, a) + interp(k, b));
        }
    }
    total
}

/// Split the accrual up to `u` at `max(T0, u - Λ)`.
pub fn accrue(path: &ProfitPath, vc: f64, u: f64) -> Result<ValueDecomposition> {
    path.validate()?;
    let (t0, t1) = (path.start(), path.end());
    if !(u >= t0 && u <= t1) {
        return Err(Error::domain(format!("u = {u} is outside [{t0}, {t1}]")));
    }
    let split = t0.max(u - path.lag);
    let delta_ns = integrate_linear(&path.times, &path.pi_values, t0, split);
    let delta_s = integrate_linear(&path.times, &path.pi_values, split, u);
    Ok(ValueDecomposition {
        v_u: vc + delta_ns + delta_s,
        delta_ns,
        delta_s,
        vc,
    })
}

/// A sampled log-driver `Y` on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogDriver {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl LogDriver {
    /// Brownian motion with drift, `Y_{t0} = 0`, sampled exactly on the grid.
    pub fn brownian(
        drift: f64,
        sigma: f64,
        t0: f64,
        horizon: f64,
        steps: usize,
        seed: u64,
    ) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) || steps == 0 {
            return Err(Error::domain("driver needs horizon > 0 and steps >= 1"));
        }
        let dt = horizon / steps as f64;
        let mut times = Vec::with_capacity(steps + 1);
        let mut values = Vec::with_capacity(steps + 1);
        times.push(t0);
        values.push(0.0);
        let mut y = 0.0;
        for (k, z) in standard_draws(seed, steps).into_iter().enumerate() {
            y += drift * dt + sigma * dt.sqrt() * z;
            times.push(t0 + horizon * (k + 1) as f64 / steps as f64);
            values.push(y);
        }
        Ok(LogDriver { times, values })
    }

    /// Every `factor`-th grid point.
    pub fn coarsened(&self, factor: usize) -> Self {
        let pick = |v: &Vec<f64>| v.iter().step_by(factor.max(1)).copied().collect();
        LogDriver {
            times: pick(&self.times),
            values: pick(&self.values),
        }
    }
}

/// `α ∫_{[lo, hi]} exp(β Y_w) dw` by the trapezoid rule.
pub fn integrate_window(
    alpha: f64,
    beta: f64,
    driver: &LogDriver,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    if driver.times.len() < 2 || driver.times.len() != driver.values.len() {
        return Err(Error::domain("driver needs at least two samples"));
    }
    let first = driver.times[0];
    let last = driver.times[driver.times.len() - 1];
    if lo < first || hi > last {
        return Err(Error::domain(format!(
            "driver covers [{first}, {last}] but the window is [{lo}, {hi}]"
        )));
    }
    let integrand: Vec<f64> = driver.values.iter().map(|y| (beta * y).exp()).collect();
    Ok(alpha * integrate_linear(&driver.times, &integrand, lo, hi))
}

/// Uncertain value `α ∫_{[max(T0, u-Λ), u]} exp(β Y_w) dw`.
pub fn stochastic_profit_value(
    alpha: f64,
    beta: f64,
    driver: &LogDriver,
    lag: f64,
    u: f64,
    t0: f64,
) -> Result<f64> {
    if !(alpha > 0.0 && beta.is_finite()) {
        return Err(Error::domain("needs alpha > 0 and finite beta"));
    }
    if !(lag.is_finite() && lag >= 0.0) {
        return Err(Error::domain(format!("lag must be >= 0, got {lag}")));
    }
    if u < t0 {
        return Err(Error::domain(format!("u = {u} precedes T0 = {t0}")));
    }
    integrate_window(alpha, beta, driver, t0.max(u - lag), u)
}

/// Normalized observation process when instantaneous profit itself follows
/// `π_{T+u} = π_T exp(μ_π u + σ_π W_u)`: the censor's firm process.
pub fn instantaneous_profit_process(mu_pi: f64, sigma_pi: f64, t: f64) -> Result<GbmParams> {
    GbmParams::new(mu_pi, sigma_pi, 1.0, t)
}
