//! Posterior-predictive forecasts by simulating future paths from each
//! retained draw.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{sample_student_t, RngStream};
use crate::error::{Error, Result};
use crate::model::{run_recursion, Effective, ParameterDraw, PriorConfig, LEVEL_FLOOR};
use crate::sampler::PosteriorSamples;

pub const DEFAULT_QUANTILES: [f64; 5] = [0.01, 0.05, 0.5, 0.95, 0.99];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastConfig {
    pub horizon: usize,
    pub paths_per_draw: usize,
    pub quantiles: Vec<f64>,
    /// Redraws of a step whose simulated value would leave the level
    /// non-positive, before the value is floored.
    pub max_retries: usize,
}

impl ForecastConfig {
    pub fn new(horizon: usize) -> Self {
        ForecastConfig {
            horizon,
            paths_per_draw: 2,
            quantiles: DEFAULT_QUANTILES.to_vec(),
            max_retries: 20,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.paths_per_draw == 0 {
            return Err(Error::Config("horizon and paths per draw must be positive".into()));
        }
        validate_quantile_levels(&self.quantiles)
    }
}

/// Levels must lie strictly inside (0, 1) and be strictly increasing.
pub fn validate_quantile_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::Config("at least one quantile level is required".into()));
    }
    if levels.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
        return Err(Error::Config(format!("quantile levels must lie in (0, 1): {levels:?}")));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!("quantile levels must be strictly increasing: {levels:?}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileForecast {
    pub level: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    /// Per-horizon median of the simulated values.
    pub point: Vec<f64>,
    pub mean: Vec<f64>,
    /// Ascending by level.
    pub quantiles: Vec<QuantileForecast>,
    pub n_paths: usize,
    pub seed: u64,
    /// Steps redrawn because the level would have become non-positive.
    pub retries: u64,
    /// Steps floored after running out of retries.
    pub floor_events: u64,
    /// Draws whose in-sample recursion failed and were skipped.
    pub skipped_draws: usize,
}

impl ForecastResult {
    pub fn quantile(&self, level: f64) -> Option<&[f64]> {
        self.quantiles
            .iter()
            .find(|q| (q.level - level).abs() < 1e-12)
            .map(|q| q.values.as_slice())
    }
}

/// Empirical quantile of sorted data with linear interpolation between
/// order statistics (Hyndman-Fan type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Default)]
struct PathStats {
    retries: u64,
    floor_events: u64,
}

/// Simulates `paths_per_draw` future paths of length `horizon` for one draw.
fn simulate_draw(
    y: &[f64],
    theta: &ParameterDraw,
    prior: &PriorConfig,
    cfg: &ForecastConfig,
    rng: &mut RngStream,
    stats: &mut PathStats,
) -> Result<Vec<Vec<f64>>> {
    let paths = run_recursion(y, theta, prior)?;
    let eff = Effective::new(theta, prior);
    let n = y.len();
    let m = paths.log_season_ahead.len();
    let mut out = Vec::with_capacity(cfg.paths_per_draw);
    for _ in 0..cfg.paths_per_draw {
        let mut level = paths.level[n - 1];
        let mut trend = paths.trend[n - 1];
        let mut log_s = paths.log_season_ahead.clone();
        log_s.resize(m + cfg.horizon, 0.0);
        let mut values = Vec::with_capacity(cfg.horizon);
        for j in 0..cfg.horizon {
            let mean = eff.trend_part(level, trend) * log_s[j].exp();
            let scale = (eff.chi2 * eff.variance_factor(level)).sqrt();
            let mut tries = 0;
            let (value, next) = loop {
                let v = sample_student_t(rng, theta.nu, mean, scale)?;
                let next = eff.update(level, trend, log_s[j], v);
                if next.0 > 0.0 && next.0.is_finite() && next.1.is_finite() && next.2.is_finite() {
                    break (v, next);
                }
                if tries == cfg.max_retries {
                    stats.floor_events += 1;
                    let v = v.max(LEVEL_FLOOR);
                    break (v, eff.update(level, trend, log_s[j], v));
                }
                tries += 1;
                stats.retries += 1;
            };
            values.push(value);
            level = next.0;
            trend = next.1;
            if eff.seasonal {
                log_s[j + m] = next.2;
            }
        }
        out.push(values);
    }
    Ok(out)
}

/// Forecast distribution for the `horizon` steps after `y`.
///
/// Each draw simulates on its own substream of `rng`, so the result does
/// not depend on how draws are scheduled across threads.
pub fn simulate_paths(samples: &PosteriorSamples, y: &[f64], cfg: &ForecastConfig, rng: &RngStream) -> Result<ForecastResult> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidParameter("no posterior draws to forecast from".into()));
    }
    let per_draw: Vec<(Option<Vec<Vec<f64>>>, PathStats)> = samples
        .draws
        .par_iter()
        .enumerate()
        .map(|(i, theta)| {
            let mut stream = rng.substream(&[i as u64]);
            let mut stats = PathStats::default();
            let paths = simulate_draw(y, theta, &samples.prior, cfg, &mut stream, &mut stats).ok();
            (paths, stats)
        })
        .collect();

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); cfg.horizon];
    let mut retries = 0;
    let mut floor_events = 0;
    let mut skipped = 0;
    for (paths, stats) in per_draw {
        retries += stats.retries;
        floor_events += stats.floor_events;
        match paths {
            Some(paths) => {
                for path in paths {
                    for (j, v) in path.into_iter().enumerate() {
                        columns[j].push(v);
                    }
                }
            }
            None => skipped += 1,
        }
    }
    if columns[0].is_empty() {
        return Err(Error::Numerical("every posterior draw failed to simulate".into()));
    }
    let n_paths = columns[0].len();
    let mut point = Vec::with_capacity(cfg.horizon);
    let mut mean = Vec::with_capacity(cfg.horizon);
    let mut quantiles: Vec<QuantileForecast> = cfg
        .quantiles
        .iter()
        .map(|&level| QuantileForecast {
            level,
            values: Vec::with_capacity(cfg.horizon),
        })
        .collect();
    for mut col in columns {
        col.sort_by(f64::total_cmp);
        point.push(quantile_sorted(&col, 0.5));
        mean.push(col.iter().sum::<f64>() / col.len() as f64);
        for q in quantiles.iter_mut() {
            q.values.push(quantile_sorted(&col, q.level));
        }
    }
    Ok(ForecastResult {
        point,
        mean,
        quantiles,
        n_paths,
        seed: rng.seed(),
        retries,
        floor_events,
        skipped_draws: skipped,
    })
}

/// A random stream for forecasting series `id` under `seed`, separate from
/// the sampler's chain streams.
pub fn forecast_stream(seed: u64, id: &str) -> RngStream {
    RngStream::new(seed, crate::dist::stream_key(&[crate::dist::hash_str(id), u64::MAX]))
}
