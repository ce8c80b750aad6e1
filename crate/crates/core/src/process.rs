//! Geometric Brownian motion: parameters, exact grid sampling, performance
//! indices of sampled paths and path-wise scaling checks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `S_{t+u} = S_t exp(mu u + sigma W_u)`; `mu` is the drift of the log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGbm")]
pub struct GbmParams {
    mu: f64,
    sigma: f64,
    start_value: f64,
    start_time: f64,
}

#[derive(Deserialize)]
struct RawGbm {
    mu: f64,
    sigma: f64,
    #[serde(default = "one")]
    start_value: f64,
    #[serde(default)]
    start_time: f64,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<RawGbm> for GbmParams {
    type Error = Error;

    fn try_from(raw: RawGbm) -> Result<Self> {
        GbmParams::new(raw.mu, raw.sigma, raw.start_value, raw.start_time)
    }
}

impl GbmParams {
    pub fn new(mu: f64, sigma: f64, start_value: f64, start_time: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::validation("mu", format!("must be finite, got {mu}")));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::validation(
                "sigma",
                format!("must be > 0, got {sigma}"),
            ));
        }
        if !(start_value.is_finite() && start_value > 0.0) {
            return Err(Error::validation(
                "start_value",
                format!("must be > 0, got {start_value}"),
            ));
        }
        if !start_time.is_finite() {
            return Err(Error::validation("start_time", "must be finite"));
        }
        Ok(GbmParams {
            mu,
            sigma,
            start_value,
            start_time,
        })
    }

    /// Risk-neutral tracker: `mu = r - delta - sigma²/2`.
    pub fn risk_neutral(
        r: f64,
        delta: f64,
        sigma: f64,
        start_value: f64,
        start_time: f64,
    ) -> Result<Self> {
        Self::new(
            r - delta - 0.5 * sigma * sigma,
            sigma,
            start_value,
            start_time,
        )
    }

    /// Build from the arithmetic drift `m` of `X_{t+s} = X_t exp((m - sigma²/2)s + sigma W_s)`.
    pub fn with_arithmetic_drift(
        drift: f64,
        sigma: f64,
        start_value: f64,
        start_time: f64,
    ) -> Result<Self> {
        Self::new(drift - 0.5 * sigma * sigma, sigma, start_value, start_time)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn start_value(&self) -> f64 {
        self.start_value
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    /// `E[X_{t+s}] = X_t exp(drift · s)`.
    pub fn arithmetic_drift(&self) -> f64 {
        self.mu + 0.5 * self.sigma * self.sigma
    }

    /// The dividend yield implied by `mu = r - delta - sigma²/2`.
    pub fn implied_dividend(&self, r: f64) -> f64 {
        r - self.mu - 0.5 * self.sigma * self.sigma
    }

    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        Self::new(mu, self.sigma, self.start_value, self.start_time)
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::new(self.mu, sigma, self.start_value, self.start_time)
    }

    pub fn with_start(&self, start_value: f64, start_time: f64) -> Result<Self> {
        Self::new(self.mu, self.sigma, start_value, start_time)
    }
}

/// Path functionals used as tracker-performance indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerformanceIndex {
    RunningMax,
    RunningMin,
    RunningAverage,
}

impl PerformanceIndex {
    pub const ALL: [PerformanceIndex; 3] = [
        PerformanceIndex::RunningMax,
        PerformanceIndex::RunningMin,
        PerformanceIndex::RunningAverage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PerformanceIndex::RunningMax => "running_max",
            PerformanceIndex::RunningMin => "running_min",
            PerformanceIndex::RunningAverage => "running_average",
        }
    }
}

/// A sampled trajectory on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GbmPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub seed: u64,
}

/// Random stream `stream` of the generator seeded with `seed`.
///
/// ChaCha is counter based, so streams are independent and any batch of a
/// Monte Carlo run can be regenerated from `(seed, batch)` alone.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n` standard normal draws from stream 0 of `seed`.
pub fn standard_draws(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = stream_rng(seed, 0);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Sample a path exactly on the grid: log-increments are i.i.d.
/// `N(mu Δ, sigma² Δ)` with `Δ = horizon / steps`.
pub fn sample_path(params: &GbmParams, horizon: f64, steps: usize, seed: u64) -> Result<GbmPath> {
    validate_grid(horizon, steps)?;
    let draws = standard_draws(seed, steps);
    let mut path = path_from_draws(params, horizon, &draws)?;
    path.seed = seed;
    Ok(path)
}

/// Build a path from given standard normal increments, one per step.
pub fn path_from_draws(params: &GbmParams, horizon: f64, draws: &[f64]) -> Result<GbmPath> {
    validate_grid(horizon, draws.len())?;
    let steps = draws.len();
    let dt = horizon / steps as f64;
    let drift = params.mu * dt;
    let vol = params.sigma * dt.sqrt();
    let mut times = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    times.push(params.start_time);
    values.push(params.start_value);
    let mut log_level = 0.0;
    for (k, z) in draws.iter().enumerate() {
        log_level += drift + vol * z;
        times.push(params.start_time + horizon * (k + 1) as f64 / steps as f64);
        values.push(params.start_value * log_level.exp());
    }
    Ok(GbmPath {
        times,
        values,
        seed: 0,
    })
}

fn validate_grid(horizon: f64, steps: usize) -> Result<()> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::domain(format!("horizon must be > 0, got {horizon}")));
    }
    if steps == 0 {
        return Err(Error::domain("steps must be >= 1"));
    }
    Ok(())
}

/// Evaluate a performance index on a sampled path.
pub fn index_of_path(path: &GbmPath, index: PerformanceIndex) -> f64 {
    index_of_values(&path.times, &path.values, index)
}

/// Evaluate a performance index on parallel `times`/`values` slices. The
/// running average is the trapezoid time-average; a single point is its own
/// average.
pub fn index_of_values(times: &[f64], values: &[f64], index: PerformanceIndex) -> f64 {
    debug_assert_eq!(times.len(), values.len());
    debug_assert!(!values.is_empty());
    match index {
        PerformanceIndex::RunningMax => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        PerformanceIndex::RunningMin => values.iter().copied().fold(f64::INFINITY, f64::min),
        PerformanceIndex::RunningAverage => {
            if values.len() == 1 {
                return values[0];
            }
            let span = times[times.len() - 1] - times[0];
            let area: f64 = times
                .windows(2)
                .zip(values.windows(2))
                .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
                .sum();
            area / span
        }
    }
}

/// Worst relative violation of positive homogeneity `Σ(λS) = λΣ(S)` over
/// every restart window `[t_k, t_end]` of a seed-fixed path.
pub fn check_scaling(
    params: &GbmParams,
    horizon: f64,
    steps: usize,
    seed: u64,
    scale: f64,
    index: PerformanceIndex,
) -> Result<f64> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::domain(format!("scale must be > 0, got {scale}")));
    }
    let path = sample_path(params, horizon, steps, seed)?;
    let scaled: Vec<f64> = path.values.iter().map(|v| scale * v).collect();
    let mut worst = 0.0f64;
    for k in 0..path.values.len() {
        let times = &path.times[k..];
        let base = index_of_values(times, &path.values[k..], index);
        let lifted = index_of_values(times, &scaled[k..], index);
        worst = worst.max((lifted - scale * base).abs() / (scale * base));
    }
    Ok(worst)
}

/// Worst relative violation of the restart identity
/// `Σ_{T,T1}(S) = S_T Σ_{T,T1}(S / S_T)` over grid restart times.
pub fn check_restart_scaling(path: &GbmPath, index: PerformanceIndex) -> f64 {
    let mut worst = 0.0f64;
    for k in 0..path.values.len() {
        let times = &path.times[k..];
        let window = &path.values[k..];
        let anchor = window[0];
        let normalized: Vec<f64> = window.iter().map(|v| v / anchor).collect();
        let direct = index_of_values(times, window, index);
        let via_restart = anchor * index_of_values(times, &normalized, index);
        worst = worst.max((direct - via_restart).abs() / direct);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(mu: f64, sigma: f64) -> GbmParams {
        GbmParams::new(mu, sigma, 1.0, 0.0).unwrap()
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(GbmParams::new(0.0, 0.0, 1.0, 0.0).is_err());
        assert!(GbmParams::new(0.0, 0.2, -1.0, 0.0).is_err());
        assert!(GbmParams::new(f64::NAN, 0.2, 1.0, 0.0).is_err());
        let err = serde_json::from_str::<GbmParams>(r#"{"mu": 0.1, "sigma": -0.2}"#).unwrap_err();
        assert!(err.to_string().contains("sigma"));
    }

    #[test]
    fn risk_neutral_drift() {
        let p = GbmParams::risk_neutral(0.05, 0.01, 0.2, 1.0, 0.0).unwrap();
        assert!((p.mu() - (0.05 - 0.01 - 0.02)).abs() < 1e-15);
        assert!((p.implied_dividend(0.05) - 0.01).abs() < 1e-15);
        let f = GbmParams::with_arithmetic_drift(0.5, 0.3, 1.0, 0.0).unwrap();
        assert!((f.arithmetic_drift() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn degenerate_diffusion_is_constant() {
        let path = sample_path(&params(0.0, 1e-12), 1.0, 100, 7).unwrap();
        assert_eq!(path.values[0], 1.0);
        assert!(path.values.iter().all(|v| (v - 1.0).abs() < 1e-6));
    }

    #[test]
    fn deterministic_exponential_limit() {
        let p = GbmParams::new(0.1, 1e-12, 2.0, 0.5).unwrap();
        let path = sample_path(&p, 2.0, 50, 3).unwrap();
        for (t, v) in path.times.iter().zip(&path.values) {
            let expect = 2.0 * (0.1 * (t - 0.5)).exp();
            assert!((v / expect - 1.0).abs() < 1e-9);
        }
        assert!((path.times[50] - 2.5).abs() < 1e-15);
    }

    #[test]
    fn terminal_mean_matches_lognormal_moment() {
        let p = GbmParams::new(0.05, 0.3, 1.0, 0.0).unwrap();
        let n = 100_000;
        let mut rng = stream_rng(11, 0);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            let v = (p.mu() + p.sigma() * z).exp();
            s += v;
            s2 += v * v;
        }
        let mean = s / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        let exact = (p.mu() + 0.5 * p.sigma() * p.sigma()).exp();
        assert!(
            (mean - exact).abs() < 3.0 * se,
            "{mean} vs {exact} (se {se})"
        );
        // Same check through sample_path with one step.
        let (mut s, mut s2) = (0.0, 0.0);
        for seed in 0..20_000u64 {
            let v = sample_path(&p, 1.0, 1, seed).unwrap().values[1];
            s += v;
            s2 += v * v;
        }
        let n = 20_000.0;
        let mean = s / n;
        let se = ((s2 / n - mean * mean) / n).sqrt();
        assert!((mean - exact).abs() < 3.0 * se);
    }

    #[test]
    fn indices_on_simple_paths() {
        let times = [0.0, 0.5, 1.0];
        let flat = [2.0, 2.0, 2.0];
        for idx in PerformanceIndex::ALL {
            assert_eq!(index_of_values(&times, &flat, idx), 2.0);
        }
        let two = [1.0, 3.0];
        let tt = [0.0, 1.0];
        assert_eq!(
            index_of_values(&tt, &two, PerformanceIndex::RunningMax),
            3.0
        );
        assert_eq!(
            index_of_values(&tt, &two, PerformanceIndex::RunningMin),
            1.0
        );
        assert_eq!(
            index_of_values(&tt, &two, PerformanceIndex::RunningAverage),
            2.0
        );
        let up = [1.0, 1.5, 2.5, 4.0];
        let tu = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(index_of_values(&tu, &up, PerformanceIndex::RunningMax), 4.0);
        assert_eq!(index_of_values(&tu, &up, PerformanceIndex::RunningMin), 1.0);
    }

    #[test]
    fn scaling_examples() {
        let p = params(0.03, 0.25);
        for idx in PerformanceIndex::ALL {
            assert_eq!(check_scaling(&p, 1.0, 500, 5, 1.0, idx).unwrap(), 0.0);
        }
        assert!(
            check_scaling(&p, 1.0, 500, 5, 2.0, PerformanceIndex::RunningMax).unwrap() <= 1e-12
        );
        assert!(
            check_scaling(&p, 1.0, 500, 5, 0.5, PerformanceIndex::RunningAverage).unwrap() <= 1e-12
        );
        assert!(check_scaling(&p, 1.0, 500, 5, 0.0, PerformanceIndex::RunningAverage).is_err());
    }

    #[test]
    fn restart_identity_holds_on_grid() {
        let path = sample_path(&params(-0.02, 0.4), 1.0, 400, 9).unwrap();
        for idx in PerformanceIndex::ALL {
            assert!(check_restart_scaling(&path, idx) <= 1e-12);
        }
    }

    #[test]
    fn reflection_duality_with_negated_draws() {
        let p = params(0.07, 0.3);
        let draws = standard_draws(21, 1000);
        let negated: Vec<f64> = draws.iter().map(|z| -z).collect();
        let path = path_from_draws(&p, 1.0, &draws).unwrap();
        let mirror = path_from_draws(&p.with_mu(-p.mu()).unwrap(), 1.0, &negated).unwrap();
        let min = index_of_path(&path, PerformanceIndex::RunningMin);
        let max_mirror = index_of_path(&mirror, PerformanceIndex::RunningMax);
        // log(min S / S0) = -log(max S' / S0)
        assert!(((min.ln()) + max_mirror.ln()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn ordering_of_indices(seed in 0u64..10_000, mu in -0.5f64..0.5, sigma in 0.01f64..1.0) {
            let path = sample_path(&params(mu, sigma), 1.0, 200, seed).unwrap();
            let lo = index_of_path(&path, PerformanceIndex::RunningMin);
            let avg = index_of_path(&path, PerformanceIndex::RunningAverage);
            let hi = index_of_path(&path, PerformanceIndex::RunningMax);
            prop_assert!(lo <= avg && avg <= hi);
        }

        #[test]
        fn determinism(seed in 0u64..10_000) {
            let p = params(0.1, 0.2);
            let a = sample_path(&p, 1.0, 64, seed).unwrap();
            let b = sample_path(&p, 1.0, 64, seed).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
