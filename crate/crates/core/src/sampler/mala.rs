//! Langevin-proposal Metropolis-Hastings for the smoothing parameters and
//! the initial seasonal factors, with the latent `ω²` integrated out.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::steps::{seasonal_neg_log_prior, seasonal_prior_slope};
use super::ChainState;
use crate::dist::sample_standard_normal;
use crate::error::Result;
use crate::model::{
    directional_derivatives, run_recursion, seasonal_gradient, smoothing_objective, Direction, ParameterDraw, PriorConfig,
    StatePaths,
};

const LOG_STEP_BOUNDS: (f64, f64) = (-16.0, 2.5);

/// Step size and acceptance bookkeeping for one parameter block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepState {
    pub log_step: f64,
    /// Proposals and acceptances after adaptation stopped.
    pub proposals: u64,
    pub accepted: u64,
    pub adapt_iterations: u64,
}

impl StepState {
    pub fn new(step_size: f64) -> Self {
        StepState {
            log_step: step_size.ln(),
            proposals: 0,
            accepted: 0,
            adapt_iterations: 0,
        }
    }

    pub fn step_size(&self) -> f64 {
        self.log_step.exp()
    }

    pub fn acceptance_rate(&self) -> Option<f64> {
        (self.proposals > 0).then(|| self.accepted as f64 / self.proposals as f64)
    }

    fn record(&mut self, accept_prob: f64, accepted: bool, adapt_target: Option<f64>) {
        match adapt_target {
            Some(target) => {
                self.adapt_iterations += 1;
                let gain = (self.adapt_iterations as f64).powf(-0.6);
                self.log_step = (self.log_step + gain * (accept_prob - target)).clamp(LOG_STEP_BOUNDS.0, LOG_STEP_BOUNDS.1);
            }
            None => {
                self.proposals += 1;
                self.accepted += accepted as u64;
            }
        }
    }
}

/// Potential energy, its gradient, and the draw and paths it was computed
/// from.
struct Evaluated {
    energy: f64,
    grad: Vec<f64>,
    theta: ParameterDraw,
    paths: StatePaths,
}

fn log_proposal(to: &[f64], from: &[f64], grad_from: &[f64], eps: f64) -> f64 {
    let half = 0.5 * eps * eps;
    let ss: f64 = to
        .iter()
        .zip(from)
        .zip(grad_from)
        .map(|((t, f), g)| {
            let d = t - f + half * g;
            d * d
        })
        .sum();
    -ss / (2.0 * eps * eps)
}

/// One Langevin MH step on `u` against `target`. Returns the accepted
/// evaluation, or `None` if the chain stays put.
fn mala_step<R, F>(
    rng: &mut R,
    u: &[f64],
    current: &Evaluated,
    mut target: F,
    step: &mut StepState,
    adapt_target: Option<f64>,
) -> Option<Evaluated>
where
    R: Rng + ?Sized,
    F: FnMut(&[f64]) -> Option<Evaluated>,
{
    let eps = step.step_size();
    let half = 0.5 * eps * eps;
    let proposal: Vec<f64> = u
        .iter()
        .zip(&current.grad)
        .map(|(x, g)| x - half * g + eps * sample_standard_normal(rng))
        .collect();
    let uniform: f64 = rng.random();
    let candidate = target(&proposal);
    let (log_ratio, candidate) = match candidate {
        Some(c) => {
            let lr = current.energy - c.energy + log_proposal(u, &proposal, &c.grad, eps)
                - log_proposal(&proposal, u, &current.grad, eps);
            (if lr.is_nan() { f64::NEG_INFINITY } else { lr }, Some(c))
        }
        None => (f64::NEG_INFINITY, None),
    };
    let accept_prob = log_ratio.min(0.0).exp();
    let accepted = uniform.ln() < log_ratio;
    step.record(accept_prob, accepted, adapt_target);
    if accepted {
        candidate
    } else {
        None
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

/// Energy of the smoothing block in logit coordinates: the collapsed
/// objective minus the log Beta prior and the log Jacobian.
fn smoothing_target(y: &[f64], base: &ParameterDraw, prior: &PriorConfig, u: &[f64]) -> Option<Evaluated> {
    let probs: Vec<f64> = u.iter().map(|&v| logistic(v)).collect();
    if probs.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
        return None;
    }
    let mut theta = base.clone();
    theta.alpha = probs[0];
    theta.beta = probs[1];
    if probs.len() > 2 {
        theta.zeta = probs[2];
    }
    let paths = run_recursion(y, &theta, prior).ok()?;
    if paths.clamp_events > 0 {
        return None;
    }
    let objective = smoothing_objective(&paths, theta.nu);
    if !objective.is_finite() {
        return None;
    }
    let (a, b) = (prior.beta_a, prior.beta_b);
    let dl = directional_derivatives(y, &theta, prior, &paths, &[Direction::Alpha, Direction::Beta]).ok()?;
    let mut energy = objective;
    let mut grad = Vec::with_capacity(probs.len());
    for (k, &p) in probs.iter().enumerate() {
        energy -= a * p.ln() + b * (1.0 - p).ln();
        // the likelihood gradient for zeta is left out of the drift
        let dlik = dl.get(k).copied().unwrap_or(0.0);
        grad.push(dlik * p * (1.0 - p) - (a * (1.0 - p) - b * p));
    }
    if !energy.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return None;
    }
    Some(Evaluated { energy, grad, theta, paths })
}

/// Gradient-assisted MH update of `(α, β)`, plus `ζ` for the seasonal
/// model. Returns whether the proposal was accepted.
pub fn update_smoothing_mh<R: Rng + ?Sized>(
    y: &[f64],
    state: &mut ChainState,
    prior: &PriorConfig,
    step: &mut StepState,
    adapt_target: Option<f64>,
    rng: &mut R,
) -> Result<bool> {
    let th = &state.theta;
    let mut u = vec![logit(th.alpha), logit(th.beta)];
    if prior.is_seasonal() {
        u.push(logit(th.zeta));
    }
    let Some(current) = smoothing_target(y, th, prior, &u) else {
        step.record(0.0, false, adapt_target);
        return Ok(false);
    };
    let base = state.theta.clone();
    match mala_step(rng, &u, &current, |v| smoothing_target(y, &base, prior, v), step, adapt_target) {
        Some(next) => {
            state.theta = next.theta;
            state.paths = next.paths;
            Ok(true)
        }
        None => Ok(false),
    }
}

fn full_seeds(free: &[f64]) -> Vec<f64> {
    let mut seeds = free.to_vec();
    let sum: f64 = free.iter().sum();
    seeds.push(-sum);
    seeds
}

fn seasonal_target(y: &[f64], base: &ParameterDraw, prior: &PriorConfig, free: &[f64]) -> Option<Evaluated> {
    let mut theta = base.clone();
    theta.log_s_init = full_seeds(free);
    let paths = run_recursion(y, &theta, prior).ok()?;
    if paths.clamp_events > 0 {
        return None;
    }
    let objective = smoothing_objective(&paths, theta.nu);
    let energy = objective + seasonal_neg_log_prior(&theta, prior, &theta.log_s_init);
    if !energy.is_finite() {
        return None;
    }
    let mut grad = seasonal_gradient(y, &theta, prior, &paths).ok()?;
    let m = theta.log_s_init.len();
    let last = seasonal_prior_slope(&theta, prior, m - 1, theta.log_s_init[m - 1]);
    for (i, g) in grad.iter_mut().enumerate() {
        *g += seasonal_prior_slope(&theta, prior, i, theta.log_s_init[i]) - last;
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return None;
    }
    Some(Evaluated { energy, grad, theta, paths })
}

/// Gradient-assisted MH update of the `m - 1` free initial log seasonals;
/// the last one is set so the seeds sum to zero.
pub fn update_seasonals_mh<R: Rng + ?Sized>(
    y: &[f64],
    state: &mut ChainState,
    prior: &PriorConfig,
    step: &mut StepState,
    adapt_target: Option<f64>,
    rng: &mut R,
) -> Result<bool> {
    let m = state.theta.log_s_init.len();
    if !prior.is_seasonal() || m < 2 {
        return Ok(false);
    }
    let free = state.theta.log_s_init[..m - 1].to_vec();
    let Some(current) = seasonal_target(y, &state.theta, prior, &free) else {
        step.record(0.0, false, adapt_target);
        return Ok(false);
    };
    let base = state.theta.clone();
    match mala_step(rng, &free, &current, |v| seasonal_target(y, &base, prior, v), step, adapt_target) {
        Some(next) => {
            state.theta = next.theta;
            state.paths = next.paths;
            Ok(true)
        }
        None => Ok(false),
    }
}
