//! The local-seasonal-global-trend model: parameters, the deterministic
//! state recursion and the Student-t likelihood.
//!
//! Indexing is zero-based. For observations `y[0..T]`:
//!
//! * `level[t]`, `trend[t]` are the smoothed level and local trend after
//!   seeing `y[t]`;
//! * `log_season[t]` is the log seasonal factor applied to `y[t]`. The first
//!   `m` of these are the initial seasonal values; afterwards the factor
//!   applied at `t` is the one estimated at `t - m`;
//! * `yhat[j]`, `sigma2hat[j]`, `residual[j]` describe the one-step forecast
//!   of `y[j + 1]` made from the state at `j`.

mod gradient;

pub use gradient::{directional_derivatives, seasonal_gradient, smoothing_gradient, Direction};

use serde::{Deserialize, Serialize};

use crate::dist::student_t_log_norm;
use crate::error::{Error, Result};

/// Levels are floored here before being raised to fractional powers.
pub const LEVEL_FLOOR: f64 = 1e-10;

pub const RHO_RANGE: (f64, f64) = (-0.5, 1.0);
pub const LAMBDA_RANGE: (f64, f64) = (-100.0, 1.0);
pub const B1_RANGE: (f64, f64) = (-100.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    NonSeasonal,
    Seasonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    Homoscedastic,
    Heteroscedastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeasonalPrior {
    Horseshoe,
    Cauchy { scale: f64 },
}

/// Prior hyperparameters and model switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub s_gamma: f64,
    pub s_lambda: f64,
    pub s_b1: f64,
    /// Beta prior on the smoothing parameters.
    pub beta_a: f64,
    pub beta_b: f64,
    pub nu_lower: f64,
    pub nu_upper: f64,
    pub nu_grid_size: usize,
    /// Number of uniformly spaced candidates for rho, phi and tau.
    pub grid_size: usize,
    pub seasonal_prior: SeasonalPrior,
    pub variance_mode: VarianceMode,
    pub model_kind: ModelKind,
    /// Optional proper `IG(shape, scale)` prior on chi². `None` is the
    /// scale-invariant `1/chi²` prior.
    #[serde(default)]
    pub chi2_prior: Option<(f64, f64)>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            s_gamma: 1.0,
            s_lambda: 1.0,
            s_b1: 1.0,
            beta_a: 1.0,
            beta_b: 0.5,
            nu_lower: 1.6,
            nu_upper: 1000.0,
            nu_grid_size: 100,
            grid_size: 64,
            seasonal_prior: SeasonalPrior::Horseshoe,
            variance_mode: VarianceMode::Heteroscedastic,
            model_kind: ModelKind::NonSeasonal,
            chi2_prior: None,
        }
    }
}

impl PriorConfig {
    /// Defaults with the gamma and b1 scales set to `max(y) / 100`.
    pub fn for_values(values: &[f64], model_kind: ModelKind, variance_mode: VarianceMode) -> Self {
        let scale = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) / 100.0;
        PriorConfig {
            s_gamma: scale,
            s_b1: scale,
            model_kind,
            variance_mode,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("s_gamma", self.s_gamma),
            ("s_lambda", self.s_lambda),
            ("s_b1", self.s_b1),
            ("beta_a", self.beta_a),
            ("beta_b", self.beta_b),
            ("nu_lower", self.nu_lower),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.nu_lower < self.nu_upper && self.nu_upper.is_finite()) {
            return Err(Error::Config(format!(
                "nu bounds must satisfy lower < upper, got [{}, {}]",
                self.nu_lower, self.nu_upper
            )));
        }
        if self.nu_grid_size < 2 || self.grid_size < 2 {
            return Err(Error::Config("grids need at least two candidates".into()));
        }
        if let SeasonalPrior::Cauchy { scale } = self.seasonal_prior {
            if !(scale.is_finite() && scale > 0.0) {
                return Err(Error::Config(format!("Cauchy seasonal scale must be > 0, got {scale}")));
            }
        }
        if let Some((a, b)) = self.chi2_prior {
            if !(a > 0.0 && b > 0.0) {
                return Err(Error::Config("chi2 prior shape and scale must be > 0".into()));
            }
        }
        Ok(())
    }

    pub fn is_seasonal(&self) -> bool {
        self.model_kind == ModelKind::Seasonal
    }

    pub fn is_heteroscedastic(&self) -> bool {
        self.variance_mode == VarianceMode::Heteroscedastic
    }
}

/// One complete posterior sample: model parameters plus every latent
/// variable of the scale-mixture hierarchy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDraw {
    pub nu: f64,
    pub gamma: f64,
    pub rho: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub zeta: f64,
    pub chi2: f64,
    pub phi: f64,
    pub tau: f64,
    pub b1: f64,
    /// Initial log seasonal factors; sums to zero. `[0.0]` for the
    /// non-seasonal model.
    pub log_s_init: Vec<f64>,
    /// Student-t mixing variances, one per one-step forecast.
    pub omega2: Vec<f64>,
    pub xi_gamma2: f64,
    pub xi_lambda2: f64,
    pub xi_b1_2: f64,
    /// Horseshoe local scales, one per seasonal factor.
    pub psi2: Vec<f64>,
    pub delta2: f64,
    pub eta_s: Vec<f64>,
    pub eta_delta: f64,
}

impl ParameterDraw {
    pub fn period(&self) -> usize {
        self.log_s_init.len().max(1)
    }

    /// Starting point for a chain.
    pub fn initial(y: &[f64], cfg: &PriorConfig, period: usize, nu: f64) -> Self {
        let seasonal = cfg.is_seasonal() && period > 1;
        let log_s_init = if seasonal {
            initial_log_seasonals(y, period)
        } else {
            vec![0.0]
        };
        let m = log_s_init.len();
        let diffs: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
        let chi2 = if diffs.len() >= 2 {
            let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
            diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64
        } else {
            0.0
        };
        let chi2 = if chi2.is_finite() && chi2 > 0.0 {
            chi2
        } else {
            (1e-2 * y[0]).powi(2).max(1e-8)
        };
        ParameterDraw {
            nu,
            gamma: 0.0,
            rho: 0.5,
            lambda: 0.0,
            alpha: 0.3,
            beta: 0.3,
            zeta: 0.3,
            chi2,
            phi: if cfg.is_heteroscedastic() { 0.5 } else { 1.0 },
            tau: 0.5,
            b1: 0.0,
            log_s_init,
            omega2: vec![1.0; y.len().saturating_sub(1)],
            xi_gamma2: 1.0,
            xi_lambda2: 1.0,
            xi_b1_2: 1.0,
            psi2: vec![1.0; m],
            delta2: 1.0,
            eta_s: vec![1.0; m],
            eta_delta: 1.0,
        }
    }

    pub fn check_invariants(&self) -> Result<()> {
        let sum: f64 = self.log_s_init.iter().sum();
        if sum.abs() > 1e-12 {
            return Err(Error::Numerical(format!("initial log seasonals sum to {sum}")));
        }
        let in_unit = |name: &str, v: f64, closed: bool| {
            let ok = if closed {
                (0.0..=1.0).contains(&v)
            } else {
                v > 0.0 && v < 1.0
            };
            if ok {
                Ok(())
            } else {
                Err(Error::Numerical(format!("{name}={v} outside its range")))
            }
        };
        in_unit("alpha", self.alpha, false)?;
        in_unit("beta", self.beta, false)?;
        in_unit("zeta", self.zeta, false)?;
        in_unit("phi", self.phi, true)?;
        in_unit("tau", self.tau, true)?;
        if !(RHO_RANGE.0..=RHO_RANGE.1).contains(&self.rho) {
            return Err(Error::Numerical(format!("rho={} outside its range", self.rho)));
        }
        let positive = [self.nu, self.chi2, self.xi_gamma2, self.xi_lambda2, self.xi_b1_2, self.delta2, self.eta_delta];
        let all_positive = positive
            .iter()
            .chain(&self.omega2)
            .chain(&self.psi2)
            .chain(&self.eta_s)
            .all(|v| v.is_finite() && *v > 0.0);
        if !all_positive {
            return Err(Error::Numerical("a variance parameter is not strictly positive".into()));
        }
        Ok(())
    }
}

/// Classical multiplicative decomposition: average log ratio of each
/// observation to the mean of its full period, centred to sum to zero.
pub fn initial_log_seasonals(y: &[f64], period: usize) -> Vec<f64> {
    let periods = (y.len() / period).max(1);
    let mut acc = vec![0.0; period];
    let mut counts = vec![0usize; period];
    for p in 0..periods {
        let chunk = &y[p * period..((p + 1) * period).min(y.len())];
        let mean = chunk.iter().sum::<f64>() / chunk.len() as f64;
        for (i, v) in chunk.iter().enumerate() {
            acc[i] += (v / mean).ln();
            counts[i] += 1;
        }
    }
    let mut seeds: Vec<f64> = acc
        .iter()
        .zip(&counts)
        .map(|(a, &c)| if c > 0 { a / c as f64 } else { 0.0 })
        .collect();
    center_log_seasonals(&mut seeds);
    seeds
}

/// Shifts so the values sum to zero; the last entry absorbs rounding so the
/// sum is exact to machine precision.
pub fn center_log_seasonals(seeds: &mut [f64]) {
    if seeds.is_empty() {
        return;
    }
    let mean = seeds.iter().sum::<f64>() / seeds.len() as f64;
    for s in seeds.iter_mut() {
        *s -= mean;
    }
    let n = seeds.len();
    let rest: f64 = seeds[..n - 1].iter().sum();
    seeds[n - 1] = -rest;
}

/// Parameters as actually used by the recursion once the model switches
/// are applied.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Effective {
    pub alpha: f64,
    pub beta: f64,
    pub zeta: f64,
    pub gamma: f64,
    pub rho: f64,
    pub lambda: f64,
    pub chi2: f64,
    pub phi: f64,
    pub tau: f64,
    pub seasonal: bool,
}

impl Effective {
    pub fn new(theta: &ParameterDraw, cfg: &PriorConfig) -> Self {
        let seasonal = cfg.is_seasonal() && theta.log_s_init.len() > 1;
        Effective {
            alpha: theta.alpha,
            beta: theta.beta,
            zeta: theta.zeta,
            gamma: theta.gamma,
            rho: theta.rho,
            lambda: if seasonal { 0.0 } else { theta.lambda },
            chi2: theta.chi2,
            phi: if cfg.is_heteroscedastic() { theta.phi } else { 1.0 },
            tau: theta.tau,
            seasonal,
        }
    }

    /// `max(l, floor)` and whether the floor was hit.
    #[inline]
    pub fn floored(level: f64) -> (f64, bool) {
        if level < LEVEL_FLOOR {
            (LEVEL_FLOOR, true)
        } else {
            (level, false)
        }
    }

    /// `l + γ l^ρ + λ b`, before the seasonal multiplier.
    #[inline]
    pub fn trend_part(&self, level: f64, trend: f64) -> f64 {
        let (lp, _) = Self::floored(level);
        level + self.gamma * lp.powf(self.rho) + self.lambda * trend
    }

    /// `φ² + (1-φ)² l^{2τ}`; the conditional variance is `χ²` times this.
    #[inline]
    pub fn variance_factor(&self, level: f64) -> f64 {
        let (lp, _) = Self::floored(level);
        let w = 1.0 - self.phi;
        self.phi * self.phi + w * w * lp.powf(2.0 * self.tau)
    }

    /// Level, trend and new log seasonal estimate after observing `y` with
    /// seasonal factor `exp(log_s)` applied.
    #[inline]
    pub fn update(&self, level_prev: f64, trend_prev: f64, log_s: f64, y: f64) -> (f64, f64, f64) {
        let deseason = if self.seasonal { y * (-log_s).exp() } else { y };
        let level = self.alpha * deseason + (1.0 - self.alpha) * level_prev;
        let trend = self.beta * (level - level_prev) + (1.0 - self.beta) * trend_prev;
        let log_s_new = if self.seasonal {
            self.zeta * (y / level).ln() + (1.0 - self.zeta) * log_s
        } else {
            0.0
        };
        (level, trend, log_s_new)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePaths {
    pub level: Vec<f64>,
    pub trend: Vec<f64>,
    pub log_season: Vec<f64>,
    /// Log factors for the `m` time steps after the sample.
    pub log_season_ahead: Vec<f64>,
    pub yhat: Vec<f64>,
    pub sigma2hat: Vec<f64>,
    pub residual: Vec<f64>,
    /// Number of levels floored before exponentiation.
    pub clamp_events: usize,
}

impl StatePaths {
    pub fn len(&self) -> usize {
        self.level.len()
    }

    pub fn is_empty(&self) -> bool {
        self.level.is_empty()
    }

    /// `Σ log(1 + e²/(ν σ̂²))` and `Σ log σ̂²` over the forecasts.
    pub fn t_sums(&self, nu: f64) -> (f64, f64) {
        let mut log_kernel = 0.0;
        let mut log_var = 0.0;
        for (e, s2) in self.residual.iter().zip(&self.sigma2hat) {
            log_kernel += (e * e / (nu * s2)).ln_1p();
            log_var += s2.ln();
        }
        (log_kernel, log_var)
    }
}

/// Runs the state recursion for `y` under `theta`.
pub fn run_recursion(y: &[f64], theta: &ParameterDraw, cfg: &PriorConfig) -> Result<StatePaths> {
    let n = y.len();
    if n < 2 {
        return Err(Error::InvalidParameter("recursion needs at least two observations".into()));
    }
    let eff = Effective::new(theta, cfg);
    let m = if eff.seasonal { theta.log_s_init.len() } else { 1 };
    if eff.seasonal && n < 2 * m {
        return Err(Error::InvalidParameter(format!(
            "seasonal recursion needs at least {} observations, got {n}",
            2 * m
        )));
    }

    // log factor applied at each time, plus m entries past the end
    let mut log_s = vec![0.0; n + m];
    if eff.seasonal {
        log_s[..m].copy_from_slice(&theta.log_s_init);
    }
    let mut level = vec![0.0; n];
    let mut trend = vec![0.0; n];
    let mut clamp_events = 0;

    level[0] = if eff.seasonal { y[0] * (-log_s[0]).exp() } else { y[0] };
    trend[0] = theta.b1;
    if eff.seasonal {
        // a no-op when level[0] = y[0] / s[0], kept for uniformity
        log_s[m] = eff.zeta * (y[0] / level[0]).ln() + (1.0 - eff.zeta) * log_s[0];
    }
    for t in 1..n {
        let (l, b, s) = eff.update(level[t - 1], trend[t - 1], log_s[t], y[t]);
        if !(l.is_finite() && b.is_finite() && s.is_finite()) {
            return Err(Error::Recursion { t });
        }
        level[t] = l;
        trend[t] = b;
        if eff.seasonal {
            log_s[t + m] = s;
        }
    }

    let mut yhat = Vec::with_capacity(n - 1);
    let mut sigma2hat = Vec::with_capacity(n - 1);
    let mut residual = Vec::with_capacity(n - 1);
    for t in 0..n - 1 {
        if Effective::floored(level[t]).1 {
            clamp_events += 1;
        }
        let f = eff.trend_part(level[t], trend[t]) * log_s[t + 1].exp();
        let v = eff.chi2 * eff.variance_factor(level[t]);
        if !(f.is_finite() && v.is_finite() && v > 0.0) {
            return Err(Error::Recursion { t: t + 1 });
        }
        yhat.push(f);
        sigma2hat.push(v);
        residual.push(y[t + 1] - f);
    }
    let log_season_ahead = log_s[n..].to_vec();
    log_s.truncate(n);
    Ok(StatePaths {
        level,
        trend,
        log_season: log_s,
        log_season_ahead,
        yhat,
        sigma2hat,
        residual,
        clamp_events,
    })
}

/// Student-t negative log-likelihood of the one-step forecasts, including
/// the normalising constants. Returns `+inf` for invalid input.
pub fn negative_log_likelihood(paths: &StatePaths, nu: f64) -> f64 {
    if !(nu.is_finite() && nu > 0.0) || paths.residual.is_empty() {
        return f64::INFINITY;
    }
    let (log_kernel, log_var) = paths.t_sums(nu);
    let n = paths.residual.len() as f64;
    let value = 0.5 * (nu + 1.0) * log_kernel + 0.5 * log_var - n * student_t_log_norm(nu);
    if value.is_finite() {
        value
    } else {
        f64::INFINITY
    }
}

/// The likelihood part that depends on the smoothing parameters and initial
/// seasonals: `Σ [(ν+1)/2 log(1 + e²/(νσ̂²)) + ½ log σ̂²]`.
pub fn smoothing_objective(paths: &StatePaths, nu: f64) -> f64 {
    let (log_kernel, log_var) = paths.t_sums(nu);
    let value = 0.5 * (nu + 1.0) * log_kernel + 0.5 * log_var;
    if value.is_finite() {
        value
    } else {
        f64::INFINITY
    }
}
