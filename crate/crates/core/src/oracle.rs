//! Monte Carlo path oracle for the closed forms.
//!
//! Paths are split into equal batches. Batch `k` draws from stream `k` of a
//! ChaCha generator seeded with `base_seed`, batches run on a rayon pool and
//! are combined in batch order, so results are bit-identical for any thread
//! count. `CENSOR_LAB_THREADS` caps the pool size.

use std::sync::OnceLock;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::censor::{z_payoff, CensorProblem};
use crate::error::{Error, Result};
use crate::process::{stream_rng, PerformanceIndex};
use crate::rules::Signature;
use crate::sentiment::SentimentInputs;

pub const THREADS_ENV: &str = "CENSOR_LAB_THREADS";

/// How extremum indices are read off a discrete path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Monitoring {
    /// Grid points only; understates the maximum and overstates the minimum.
    Discrete,
    /// Also counts barrier crossings between grid points, drawn with the
    /// Brownian-bridge crossing probability `exp(-2 (b - x)(b - y) / (σ² Δ))`.
    #[default]
    BridgeCorrected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig")]
pub struct McConfig {
    pub n_paths: usize,
    pub steps_per_unit: usize,
    pub base_seed: u64,
    pub batches: usize,
    pub monitoring: Monitoring,
}

#[derive(Deserialize)]
struct RawConfig {
    n_paths: usize,
    steps_per_unit: usize,
    #[serde(default)]
    base_seed: u64,
    #[serde(default = "default_batches")]
    batches: usize,
    #[serde(default)]
    monitoring: Monitoring,
}

fn default_batches() -> usize {
    1
}

impl TryFrom<RawConfig> for McConfig {
    type Error = Error;

    fn try_from(raw: RawConfig) -> Result<Self> {
        let cfg = McConfig {
            n_paths: raw.n_paths,
            steps_per_unit: raw.steps_per_unit,
            base_seed: raw.base_seed,
            batches: raw.batches,
            monitoring: raw.monitoring,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_paths: 100_000,
            steps_per_unit: 500,
            base_seed: 0,
            batches: 20,
            monitoring: Monitoring::BridgeCorrected,
        }
    }
}

impl McConfig {
    pub fn new(
        n_paths: usize,
        steps_per_unit: usize,
        base_seed: u64,
        batches: usize,
    ) -> Result<Self> {
        let cfg = McConfig {
            n_paths,
            steps_per_unit,
            base_seed,
            batches,
            monitoring: Monitoring::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_monitoring(mut self, monitoring: Monitoring) -> Self {
        self.monitoring = monitoring;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::validation("mc.n_paths", "must be >= 1"));
        }
        if self.steps_per_unit == 0 {
            return Err(Error::validation("mc.steps_per_unit", "must be >= 1"));
        }
        if self.batches == 0 || self.n_paths % self.batches != 0 {
            return Err(Error::validation(
                "mc.batches",
                format!(
                    "must be >= 1 and divide n_paths = {}, got {}",
                    self.n_paths, self.batches
                ),
            ));
        }
        Ok(())
    }

    fn steps_for(&self, horizon: f64) -> usize {
        ((horizon * self.steps_per_unit as f64).ceil() as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl McEstimate {
    /// Whether `value` lies within `k` standard errors plus `allowance`.
    pub fn agrees_with(&self, value: f64, k: f64, allowance: f64) -> bool {
        (self.mean - value).abs() <= k * self.std_error + allowance
    }

    fn scaled(self, factor: f64) -> Self {
        McEstimate {
            mean: factor * self.mean,
            std_error: factor.abs() * self.std_error,
            n: self.n,
        }
    }

    fn exact(value: f64, n: usize) -> Self {
        McEstimate {
            mean: value,
            std_error: 0.0,
            n,
        }
    }
}

/// Running mean and sum of squared deviations of one batch.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        Moments {
            n,
            mean: self.mean + d * w,
            m2: self.m2 + other.m2 + d * d * self.n as f64 * w,
        }
    }

    fn estimate(self) -> McEstimate {
        let std_error = if self.n > 1 {
            (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
        } else {
            0.0
        };
        McEstimate {
            mean: self.mean,
            std_error,
            n: self.n,
        }
    }
}

/// Thread pool honouring `CENSOR_LAB_THREADS`.
pub fn thread_pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = thread_cap() {
            builder = builder.num_threads(n);
        }
        builder
            .build()
            .expect("failed to build the Monte Carlo thread pool")
    })
}

/// Parsed `CENSOR_LAB_THREADS`, ignoring empty, zero or malformed values.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
}

/// Pooled estimate together with the per-batch estimates, in batch order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchedEstimate {
    pub pooled: McEstimate,
    pub batches: Vec<McEstimate>,
}

fn run_batches<F>(cfg: &McConfig, sample: F) -> Result<BatchedEstimate>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    cfg.validate()?;
    let per_batch = cfg.n_paths / cfg.batches;
    let moments: Vec<Moments> = thread_pool().install(|| {
        (0..cfg.batches)
            .into_par_iter()
            .map(|batch| {
                let mut rng = stream_rng(cfg.base_seed, batch as u64);
                let mut m = Moments::default();
                for _ in 0..per_batch {
                    m.push(sample(&mut rng));
                }
                m
            })
            .collect()
    });
    let pooled = moments
        .iter()
        .fold(Moments::default(), |acc, m| acc.merge(*m));
    let pooled = pooled.estimate();
    if !pooled.mean.is_finite() {
        return Err(Error::numeric("Monte Carlo estimate is not finite"));
    }
    Ok(BatchedEstimate {
        pooled,
        batches: moments.into_iter().map(Moments::estimate).collect(),
    })
}

/// Probability that a path crosses the level between two grid points.
#[inline]
fn bridge_hit<R: Rng>(rng: &mut R, gap_start: f64, gap_end: f64, variance_step: f64) -> bool {
    let exponent = 2.0 * gap_start * gap_end / variance_step;
    exponent < 40.0 && rng.random::<f64>() < (-exponent).exp()
}

/// One path's indicator of `Σ ≥ (1+a*)VT`.
fn trigger_indicator<R: Rng>(
    inputs: &SentimentInputs,
    steps: usize,
    monitoring: Monitoring,
    rng: &mut R,
) -> f64 {
    let p = &inputs.market_params;
    let barrier = inputs.a_star_log();
    let dt = inputs.horizon() / steps as f64;
    let drift = p.mu() * dt;
    let vol = p.sigma() * dt.sqrt();
    let variance_step = p.sigma() * p.sigma() * dt;
    let bridge = monitoring == Monitoring::BridgeCorrected;
    match inputs.index {
        PerformanceIndex::RunningMax => {
            if barrier <= 0.0 {
                return 1.0;
            }
            let mut x = 0.0;
            for _ in 0..steps {
                let z: f64 = StandardNormal.sample(rng);
                let y = x + drift + vol * z;
                if y >= barrier
                    || (bridge && bridge_hit(rng, barrier - x, barrier - y, variance_step))
                {
                    return 1.0;
                }
                x = y;
            }
            0.0
        }
        PerformanceIndex::RunningMin => {
            if barrier > 0.0 {
                return 0.0;
            }
            let mut x = 0.0;
            for _ in 0..steps {
                let z: f64 = StandardNormal.sample(rng);
                let y = x + drift + vol * z;
                if y < barrier
                    || (bridge && bridge_hit(rng, x - barrier, y - barrier, variance_step))
                {
                    return 0.0;
                }
                x = y;
            }
            1.0
        }
        PerformanceIndex::RunningAverage => {
            let mut x = 0.0;
            let mut level = 1.0;
            let mut area = 0.0;
            for _ in 0..steps {
                let z: f64 = StandardNormal.sample(rng);
                x += drift + vol * z;
                let next = x.exp();
                area += 0.5 * (level + next);
                level = next;
            }
            let average = inputs.s_star_t * area / steps as f64;
            f64::from(u8::from(average >= inputs.threshold()))
        }
    }
}

/// Frequency of `Σ* ≥ (1+a*)VT` over simulated trackers.
pub fn mc_trigger_probability(inputs: &SentimentInputs, cfg: &McConfig) -> Result<McEstimate> {
    Ok(mc_trigger_probability_batched(inputs, cfg)?.pooled)
}

pub fn mc_trigger_probability_batched(
    inputs: &SentimentInputs,
    cfg: &McConfig,
) -> Result<BatchedEstimate> {
    inputs.validate()?;
    let steps = cfg.steps_for(inputs.horizon());
    run_batches(cfg, |rng| {
        trigger_indicator(inputs, steps, cfg.monitoring, rng)
    })
}

/// `E* · 1{branch event} · e^{-rΔ}` averaged over paths.
pub fn mc_sentiment(inputs: &SentimentInputs, cfg: &McConfig) -> Result<McEstimate> {
    let p = mc_trigger_probability(inputs, cfg)?;
    let branch = match inputs.market_rule.signature() {
        Signature::Good => p,
        Signature::Bad => McEstimate {
            mean: 1.0 - p.mean,
            ..p
        },
    };
    Ok(branch.scaled(inputs.threshold() * inputs.discount()))
}

/// Observation layout of a scheme on a simulation grid.
struct SchemeGrid {
    times: Vec<f64>,
    /// Per continuous interval: indices into `times` of its grid points.
    intervals: Vec<Vec<usize>>,
    discrete: Vec<usize>,
}

fn scheme_grid(problem: &CensorProblem, steps_per_unit: usize) -> SchemeGrid {
    let scheme = &problem.scheme;
    let mut times: Vec<f64> = scheme.discrete_times().to_vec();
    let mut raw_intervals = Vec::new();
    for &(lo, hi) in scheme.continuous_intervals() {
        let n = (((hi - lo) * steps_per_unit as f64).ceil() as usize).max(1);
        let pts: Vec<f64> = (0..=n)
            .map(|k| lo + (hi - lo) * k as f64 / n as f64)
            .collect();
        times.extend_from_slice(&pts);
        raw_intervals.push(pts);
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    let find = |u: f64| {
        times
            .binary_search_by(|v| v.total_cmp(&u))
            .expect("time was inserted")
    };
    SchemeGrid {
        intervals: raw_intervals
            .iter()
            .map(|pts| pts.iter().map(|&u| find(u)).collect())
            .collect(),
        discrete: scheme.discrete_times().iter().map(|&u| find(u)).collect(),
        times,
    }
}

/// Direct estimate of `N(L) + ∫_C E[Z_u] du/(T-t) + q Σ_D E[Z_u]`, with the
/// continuous part integrated by the trapezoid rule on the grid.
pub fn mc_censor_rhs(problem: &CensorProblem, l: f64, cfg: &McConfig) -> Result<McEstimate> {
    problem.validate()?;
    cfg.validate()?;
    if !(l.is_finite() && l >= 0.0) {
        return Err(Error::domain(format!("L must be >= 0, got {l}")));
    }
    let scheme = &problem.scheme;
    let duration = scheme.duration();
    let n_term = (1.0 - scheme.vol_c() / duration) * l;
    if scheme.continuous_intervals().is_empty() && scheme.discrete_times().is_empty() {
        return Ok(McEstimate::exact(n_term, cfg.n_paths));
    }
    let grid = scheme_grid(problem, cfg.steps_per_unit);
    let (t, _) = scheme.window();
    let p = &problem.firm_params;
    let q = scheme.q().unwrap_or(0.0);
    let rule = problem.rule;
    let est = run_batches(cfg, |rng| {
        let mut payoffs = Vec::with_capacity(grid.times.len());
        let mut prev = t;
        let mut log_x = 0.0;
        for &u in &grid.times {
            let dt = u - prev;
            if dt > 0.0 {
                let z: f64 = StandardNormal.sample(rng);
                log_x += p.mu() * dt + p.sigma() * dt.sqrt() * z;
            }
            prev = u;
            payoffs.push(z_payoff(&rule, log_x.exp(), l));
        }
        let mut value = n_term;
        for idx in &grid.intervals {
            for w in idx.windows(2) {
                let h = grid.times[w[1]] - grid.times[w[0]];
                value += 0.5 * h * (payoffs[w[0]] + payoffs[w[1]]) / duration;
            }
        }
        value + q * grid.discrete.iter().map(|&k| payoffs[k]).sum::<f64>()
    })?;
    Ok(est.pooled)
}
