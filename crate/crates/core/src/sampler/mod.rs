//! Gibbs sampler for the model posterior.
//!
//! One sweep runs, in order: χ², the latent `ω²`, ν, γ (with its mixing
//! variance), λ and b1 (non-seasonal only), the smoothing parameters by
//! gradient-assisted MH, the initial seasonals and horseshoe scales
//! (seasonal only), ρ, then τ and φ (heteroscedastic only). The latent
//! `ω²` are conditioned on up to and including the λ/b1 step and
//! integrated out afterwards.

mod conjugate;
mod mala;
pub mod steps;

pub use conjugate::{conjugate_normal_from_residuals, conjugate_normal_posterior, sample_truncated_normal, ConjugateNormalSpec};
pub use mala::{update_seasonals_mh, update_smoothing_mh, StepState};
pub use steps::TruncationClamps;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::TimeSeries;
use crate::dist::{cached_nu_grid, hash_str, stream_key, RngStream};
use crate::error::{Error, Result};
use crate::model::{run_recursion, ParameterDraw, PriorConfig, SeasonalPrior, StatePaths, RHO_RANGE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Total iterations per chain, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub chains: usize,
    pub mh_target_acceptance: f64,
    pub step_size_init: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            iterations: 5000,
            burn_in: 2500,
            thinning: 1,
            chains: 2,
            mh_target_acceptance: 0.55,
            step_size_init: 0.1,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.thinning == 0 || self.chains == 0 {
            return Err(Error::Config("iterations, thinning and chains must be positive".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "burn-in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if !(self.mh_target_acceptance > 0.0 && self.mh_target_acceptance < 1.0) {
            return Err(Error::Config("target acceptance must lie in (0, 1)".into()));
        }
        if !(self.step_size_init.is_finite() && self.step_size_init > 0.0) {
            return Err(Error::Config("initial step size must be > 0".into()));
        }
        Ok(())
    }

    /// Retained draws per chain.
    pub fn kept_per_chain(&self) -> usize {
        (self.iterations - self.burn_in).div_ceil(self.thinning)
    }
}

/// Current draw together with the state paths it implies.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub theta: ParameterDraw,
    pub paths: StatePaths,
}

impl ChainState {
    pub fn new(y: &[f64], theta: ParameterDraw, prior: &PriorConfig) -> Result<Self> {
        let paths = run_recursion(y, &theta, prior)?;
        Ok(ChainState { theta, paths })
    }

    /// Re-runs the recursion after a parameter change.
    pub fn refresh(&mut self, y: &[f64], prior: &PriorConfig) -> Result<()> {
        self.paths = run_recursion(y, &self.theta, prior)?;
        Ok(())
    }
}

/// Candidate sets for the grid-sampled parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Grids {
    pub nu: Vec<f64>,
    pub rho: Vec<f64>,
    pub tau: Vec<f64>,
    pub phi: Vec<f64>,
}

impl Grids {
    pub fn for_prior(prior: &PriorConfig) -> Result<Self> {
        let nu = cached_nu_grid(prior.nu_lower, prior.nu_upper, prior.nu_grid_size)?;
        let unit = steps::uniform_grid(0.0, 1.0, prior.grid_size);
        Ok(Grids {
            nu: nu.candidates().to_vec(),
            rho: steps::uniform_grid(RHO_RANGE.0, RHO_RANGE.1, prior.grid_size),
            tau: unit.clone(),
            phi: unit,
        })
    }

    /// Candidate closest to `nu`.
    pub fn nearest_nu(&self, nu: f64) -> f64 {
        self.nu
            .iter()
            .copied()
            .min_by(|a, b| (a - nu).abs().total_cmp(&(b - nu).abs()))
            .unwrap_or(nu)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub chain: usize,
    pub smoothing_acceptance: Option<f64>,
    pub smoothing_step_size: f64,
    pub seasonal_acceptance: Option<f64>,
    pub seasonal_step_size: Option<f64>,
    /// Levels floored before exponentiation, summed over sweeps.
    pub clamp_events: u64,
    pub lambda_clamps: u64,
    pub b1_clamps: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub chains: Vec<ChainDiagnostics>,
    /// Chains that stopped with an error, with the message.
    pub failed_chains: Vec<(usize, String)>,
}

impl Diagnostics {
    fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
        let v: Vec<f64> = values.flatten().collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn smoothing_acceptance(&self) -> Option<f64> {
        Self::mean_of(self.chains.iter().map(|c| c.smoothing_acceptance))
    }

    pub fn seasonal_acceptance(&self) -> Option<f64> {
        Self::mean_of(self.chains.iter().map(|c| c.seasonal_acceptance))
    }

    pub fn clamp_events(&self) -> u64 {
        self.chains.iter().map(|c| c.clamp_events).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSamples {
    pub series_id: String,
    pub period: usize,
    pub prior: PriorConfig,
    /// Retained draws, chain by chain.
    pub draws: Vec<ParameterDraw>,
    pub diagnostics: Diagnostics,
}

impl PosteriorSamples {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Values of one scalar parameter across draws.
    pub fn column(&self, f: impl Fn(&ParameterDraw) -> f64) -> Vec<f64> {
        self.draws.iter().map(f).collect()
    }
}

/// Runs one full sweep. `adapt` is the acceptance target while step sizes
/// are still being tuned.
///
/// The smoothing, seasonal and grid steps integrate `ω²` out, so `ω²` is
/// redrawn from its full conditional before anything conditions on it again.
pub fn sweep<R: rand::Rng + ?Sized>(
    y: &[f64],
    state: &mut ChainState,
    prior: &PriorConfig,
    grids: &Grids,
    steps_state: &mut (StepState, StepState),
    clamps: &mut TruncationClamps,
    adapt: Option<f64>,
    rng: &mut R,
) -> Result<()> {
    steps::update_omega2(state, rng)?;
    steps::update_chi2(y, state, prior, rng)?;
    steps::update_omega2(state, rng)?;
    steps::update_nu(state, &grids.nu, rng)?;
    steps::update_gamma(y, state, prior, &grids.rho, rng)?;
    if !prior.is_seasonal() {
        steps::update_lambda_b1(y, state, prior, rng, clamps)?;
    }
    mala::update_smoothing_mh(y, state, prior, &mut steps_state.0, adapt, rng)?;
    if prior.is_seasonal() {
        mala::update_seasonals_mh(y, state, prior, &mut steps_state.1, adapt, rng)?;
        if prior.seasonal_prior == SeasonalPrior::Horseshoe {
            steps::update_horseshoe(&mut state.theta, rng)?;
        }
    }
    steps::update_rho(y, state, prior, &grids.rho, rng)?;
    if prior.is_heteroscedastic() {
        steps::update_tau(y, state, prior, &grids.tau, rng)?;
        steps::update_phi(y, state, prior, &grids.phi, rng)?;
    }
    Ok(())
}

struct ChainOutput {
    draws: Vec<ParameterDraw>,
    diagnostics: ChainDiagnostics,
}

fn run_chain(
    y: &[f64],
    period: usize,
    prior: &PriorConfig,
    cfg: &SamplerConfig,
    grids: &Grids,
    chain: usize,
    mut rng: RngStream,
) -> Result<ChainOutput> {
    let theta = ParameterDraw::initial(y, prior, period, grids.nearest_nu(10.0));
    let mut state = ChainState::new(y, theta, prior)?;
    let mut step_states = (StepState::new(cfg.step_size_init), StepState::new(cfg.step_size_init));
    let mut clamps = TruncationClamps::default();
    let mut clamp_events = 0u64;
    let mut draws = Vec::with_capacity(cfg.kept_per_chain());
    for it in 0..cfg.iterations {
        let adapt = (it < cfg.burn_in).then_some(cfg.mh_target_acceptance);
        sweep(y, &mut state, prior, grids, &mut step_states, &mut clamps, adapt, &mut rng)?;
        clamp_events += state.paths.clamp_events as u64;
        if it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thinning == 0 {
            draws.push(state.theta.clone());
        }
    }
    let seasonal = prior.is_seasonal();
    Ok(ChainOutput {
        draws,
        diagnostics: ChainDiagnostics {
            chain,
            smoothing_acceptance: step_states.0.acceptance_rate(),
            smoothing_step_size: step_states.0.step_size(),
            seasonal_acceptance: if seasonal { step_states.1.acceptance_rate() } else { None },
            seasonal_step_size: seasonal.then(|| step_states.1.step_size()),
            clamp_events,
            lambda_clamps: clamps.lambda,
            b1_clamps: clamps.b1,
        },
    })
}

/// Random stream for chain `chain` of the series with id `series_id`.
pub fn chain_stream(seed: u64, series_id: &str, chain: usize) -> RngStream {
    RngStream::new(seed, stream_key(&[hash_str(series_id), chain as u64]))
}

/// Samples the posterior of `series` under `prior`.
///
/// Chains run in parallel, each on its own random stream; their draws are
/// concatenated in chain order. A failing chain is reported in the
/// diagnostics and only fails the fit when every chain fails.
pub fn fit(series: &TimeSeries, prior: &PriorConfig, cfg: &SamplerConfig) -> Result<PosteriorSamples> {
    series.validate()?;
    prior.validate()?;
    cfg.validate()?;
    let period = if prior.is_seasonal() {
        if !series.supports_seasonal_fit() {
            return Err(Error::InvalidSeries {
                id: series.id.clone(),
                message: format!(
                    "seasonal fit needs period > 1 and at least {} observations",
                    2 * series.period.max(2)
                ),
            });
        }
        series.period
    } else {
        1
    };
    let grids = Grids::for_prior(prior)?;
    let y = &series.values;
    let outputs: Vec<Result<ChainOutput>> = (0..cfg.chains)
        .into_par_iter()
        .map(|c| run_chain(y, period, prior, cfg, &grids, c, chain_stream(cfg.seed, &series.id, c)))
        .collect();

    let mut draws = Vec::new();
    let mut diagnostics = Diagnostics::default();
    for (c, out) in outputs.into_iter().enumerate() {
        match out {
            Ok(o) => {
                draws.extend(o.draws);
                diagnostics.chains.push(o.diagnostics);
            }
            Err(e) => {
                log::warn!("series {}: chain {c} failed: {e}", series.id);
                diagnostics.failed_chains.push((c, e.to_string()));
            }
        }
    }
    if draws.is_empty() {
        let message = diagnostics
            .failed_chains
            .first()
            .map(|(_, m)| m.clone())
            .unwrap_or_else(|| "no draws retained".into());
        return Err(Error::InvalidSeries {
            id: series.id.clone(),
            message: format!("all chains failed: {message}"),
        });
    }
    Ok(PosteriorSamples {
        series_id: series.id.clone(),
        period,
        prior: prior.clone(),
        draws,
        diagnostics,
    })
}
