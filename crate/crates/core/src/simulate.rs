//! Synthetic data: draws from the prior and forward simulation of the
//! observation model for a known parameter set.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{sample_beta, sample_categorical, sample_inverse_gamma, sample_normal, sample_standard_normal};
use crate::error::{Error, Result};
use crate::model::{Effective, ParameterDraw, PriorConfig, SeasonalPrior, B1_RANGE, LAMBDA_RANGE};
use crate::sampler::Grids;

/// Inverse-gamma variances whose normal mixture is a `t(nu)` with unit scale.
pub fn sample_omega2<R: Rng + ?Sized>(rng: &mut R, nu: f64, count: usize) -> Result<Vec<f64>> {
    (0..count).map(|_| sample_inverse_gamma(rng, 0.5 * nu, 0.5 * nu)).collect()
}

/// Simulates `n` observations starting from `y0`, using `theta.omega2` as the
/// per-step mixing variances. Fails if any simulated value is not positive.
pub fn simulate_from<R: Rng + ?Sized>(theta: &ParameterDraw, prior: &PriorConfig, y0: f64, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidParameter("simulated series need at least two points".into()));
    }
    if theta.omega2.len() != n - 1 {
        return Err(Error::InvalidParameter(format!(
            "need {} mixing variances, got {}",
            n - 1,
            theta.omega2.len()
        )));
    }
    if !(y0 > 0.0 && y0.is_finite()) {
        return Err(Error::InvalidParameter(format!("initial value {y0} is not positive")));
    }
    let eff = Effective::new(theta, prior);
    let m = theta.log_s_init.len();
    let mut log_s = vec![0.0; n + m];
    if eff.seasonal {
        log_s[..m].copy_from_slice(&theta.log_s_init);
    }
    let mut y = Vec::with_capacity(n);
    y.push(y0);
    let mut level = y0 * (-log_s[0]).exp();
    let mut trend = theta.b1;
    if eff.seasonal {
        log_s[m] = eff.zeta * (y0 / level).ln() + (1.0 - eff.zeta) * log_s[0];
    }
    for t in 1..n {
        let mean = eff.trend_part(level, trend) * log_s[t].exp();
        let sd = (eff.chi2 * theta.omega2[t - 1] * eff.variance_factor(level)).sqrt();
        let v = mean + sd * sample_standard_normal(rng);
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Numerical(format!("simulated value {v} at t={t} is not positive")));
        }
        let (l, b, s) = eff.update(level, trend, log_s[t], v);
        if !(l.is_finite() && b.is_finite() && s.is_finite()) {
            return Err(Error::Recursion { t });
        }
        level = l;
        trend = b;
        if eff.seasonal {
            log_s[t + m] = s;
        }
        y.push(v);
    }
    Ok(y)
}

fn sample_half_cauchy_scale2<R: Rng + ?Sized>(rng: &mut R) -> Result<(f64, f64)> {
    let eta = sample_inverse_gamma(rng, 0.5, 1.0)?;
    Ok((sample_inverse_gamma(rng, 0.5, 1.0 / eta)?, eta))
}

/// `N(0, s² ξ)` with `ξ ~ IG(1/2, 1/2)`, restricted to `(lo, hi)` by joint
/// rejection.
fn sample_truncated_cauchy<R: Rng + ?Sized>(rng: &mut R, scale: f64, lo: f64, hi: f64) -> Result<(f64, f64)> {
    for _ in 0..10_000 {
        let xi = sample_inverse_gamma(rng, 0.5, 0.5)?;
        let v = sample_normal(rng, 0.0, scale * scale * xi)?;
        if v > lo && v < hi {
            return Ok((v, xi));
        }
    }
    Err(Error::Numerical(format!("could not draw a value in ({lo}, {hi}) with scale {scale}")))
}

/// Projects independent normal draws with variances `var` onto the zero-sum
/// hyperplane, giving their distribution conditioned on the sum being zero.
fn zero_sum_normal<R: Rng + ?Sized>(rng: &mut R, var: &[f64]) -> Vec<f64> {
    let z: Vec<f64> = var.iter().map(|v| v.sqrt() * sample_standard_normal(rng)).collect();
    let total: f64 = var.iter().sum();
    let sum: f64 = z.iter().sum();
    let mut x: Vec<f64> = z.iter().zip(var).map(|(zi, vi)| zi - vi * sum / total).collect();
    crate::model::center_log_seasonals(&mut x);
    x
}

/// One draw from the joint prior for a series of length `n`.
///
/// The chi-square prior must be proper. Seasonal seeds are drawn from the
/// shrinkage prior given its scales and then constrained to sum to zero; the
/// scales themselves come from their unconstrained prior.
pub fn sample_prior<R: Rng + ?Sized>(prior: &PriorConfig, grids: &Grids, period: usize, n: usize, rng: &mut R) -> Result<ParameterDraw> {
    prior.validate()?;
    let (a0, b0) = prior
        .chi2_prior
        .ok_or_else(|| Error::InvalidParameter("drawing from the prior needs a proper chi2 prior".into()))?;
    let seasonal = prior.is_seasonal() && period > 1;
    let m = if seasonal { period } else { 1 };
    let uniform = |rng: &mut R, grid: &[f64]| -> Result<f64> { Ok(grid[sample_categorical(rng, &vec![1.0; grid.len()])?]) };

    let nu = uniform(rng, &grids.nu)?;
    let xi_gamma2 = sample_inverse_gamma(rng, 0.5, 0.5)?;
    let gamma = sample_normal(rng, 0.0, prior.s_gamma * prior.s_gamma * xi_gamma2)?;
    let (lambda, xi_lambda2, b1, xi_b1_2) = if seasonal {
        (0.0, sample_inverse_gamma(rng, 0.5, 0.5)?, 0.0, sample_inverse_gamma(rng, 0.5, 0.5)?)
    } else {
        let (lambda, xl) = sample_truncated_cauchy(rng, prior.s_lambda, LAMBDA_RANGE.0, LAMBDA_RANGE.1)?;
        let (b1, xb) = sample_truncated_cauchy(rng, prior.s_b1, B1_RANGE.0, B1_RANGE.1)?;
        (lambda, xl, b1, xb)
    };
    let alpha = sample_beta(rng, prior.beta_a, prior.beta_b)?;
    let beta = sample_beta(rng, prior.beta_a, prior.beta_b)?;
    let zeta = sample_beta(rng, prior.beta_a, prior.beta_b)?;
    let chi2 = sample_inverse_gamma(rng, a0, b0)?;
    let rho_weights: Vec<f64> = grids.rho.iter().map(|r| 1.0 / (1.0 + r * r)).collect();
    let rho = grids.rho[sample_categorical(rng, &rho_weights)?];
    let tau = uniform(rng, &grids.tau)?;
    let phi = if prior.is_heteroscedastic() { uniform(rng, &grids.phi)? } else { 1.0 };

    let mut psi2 = vec![1.0; m];
    let mut eta_s = vec![1.0; m];
    let (mut delta2, mut eta_delta) = (1.0, 1.0);
    let log_s_init = if seasonal {
        let var: Vec<f64> = match prior.seasonal_prior {
            SeasonalPrior::Horseshoe => {
                (delta2, eta_delta) = sample_half_cauchy_scale2(rng)?;
                for i in 0..m {
                    (psi2[i], eta_s[i]) = sample_half_cauchy_scale2(rng)?;
                }
                psi2.iter().map(|p| p * delta2).collect()
            }
            SeasonalPrior::Cauchy { scale } => (0..m)
                .map(|_| Ok(scale * scale * sample_inverse_gamma(rng, 0.5, 0.5)?))
                .collect::<Result<_>>()?,
        };
        zero_sum_normal(rng, &var)
    } else {
        vec![0.0]
    };

    let theta = ParameterDraw {
        nu,
        gamma,
        rho,
        lambda,
        alpha,
        beta,
        zeta,
        chi2,
        phi,
        tau,
        b1,
        log_s_init,
        omega2: sample_omega2(rng, nu, n.saturating_sub(1))?,
        xi_gamma2,
        xi_lambda2,
        xi_b1_2,
        psi2,
        delta2,
        eta_s,
        eta_delta,
    };
    theta.check_invariants()?;
    Ok(theta)
}

/// Fixed parameter values; anything left unset is drawn from the prior.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterOverrides {
    pub nu: Option<f64>,
    pub gamma: Option<f64>,
    pub rho: Option<f64>,
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub zeta: Option<f64>,
    pub chi2: Option<f64>,
    pub phi: Option<f64>,
    pub tau: Option<f64>,
    pub b1: Option<f64>,
    pub log_s_init: Option<Vec<f64>>,
}

impl ParameterOverrides {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("invalid parameter file: {e}")))
    }

    /// Applies the overrides, redrawing the mixing variances when `nu`
    /// changes.
    pub fn apply<R: Rng + ?Sized>(&self, theta: &mut ParameterDraw, rng: &mut R) -> Result<()> {
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut theta.gamma, self.gamma);
        set(&mut theta.rho, self.rho);
        set(&mut theta.lambda, self.lambda);
        set(&mut theta.alpha, self.alpha);
        set(&mut theta.beta, self.beta);
        set(&mut theta.zeta, self.zeta);
        set(&mut theta.chi2, self.chi2);
        set(&mut theta.phi, self.phi);
        set(&mut theta.tau, self.tau);
        set(&mut theta.b1, self.b1);
        if let Some(nu) = self.nu {
            theta.nu = nu;
            theta.omega2 = sample_omega2(rng, nu, theta.omega2.len())?;
        }
        if let Some(seeds) = &self.log_s_init {
            if seeds.len() != theta.log_s_init.len() {
                return Err(Error::InvalidParameter(format!(
                    "expected {} seasonal seeds, got {}",
                    theta.log_s_init.len(),
                    seeds.len()
                )));
            }
            theta.log_s_init = seeds.clone();
            crate::model::center_log_seasonals(&mut theta.log_s_init);
        }
        theta.check_invariants()
    }
}

/// Settings for drawing whole series.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub length: usize,
    pub period: usize,
    pub initial_value: f64,
    /// Simulated series are rejected unless every value lies within this
    /// factor of the initial value.
    pub max_ratio: f64,
    pub max_attempts: usize,
}

impl SimulationConfig {
    pub fn new(length: usize, period: usize) -> Self {
        SimulationConfig {
            length,
            period,
            initial_value: 100.0,
            max_ratio: 100.0,
            max_attempts: 1000,
        }
    }

    fn accepts(&self, y: &[f64]) -> bool {
        let (lo, hi) = (self.initial_value / self.max_ratio, self.initial_value * self.max_ratio);
        y.iter().all(|v| *v >= lo && *v <= hi)
    }
}

/// Draws a parameter set and a series from the prior predictive, keeping
/// only series inside the configured range. The acceptance rule looks at the
/// data alone, so the posterior given an accepted series is unchanged.
pub fn sample_prior_predictive<R: Rng + ?Sized>(
    prior: &PriorConfig,
    grids: &Grids,
    overrides: &ParameterOverrides,
    cfg: &SimulationConfig,
    rng: &mut R,
) -> Result<(ParameterDraw, Vec<f64>)> {
    for _ in 0..cfg.max_attempts {
        let mut theta = sample_prior(prior, grids, cfg.period, cfg.length, rng)?;
        overrides.apply(&mut theta, rng)?;
        match simulate_from(&theta, prior, cfg.initial_value, cfg.length, rng) {
            Ok(y) if cfg.accepts(&y) => return Ok((theta, y)),
            _ => continue,
        }
    }
    Err(Error::Numerical(format!(
        "no acceptable series in {} prior-predictive attempts",
        cfg.max_attempts
    )))
}
