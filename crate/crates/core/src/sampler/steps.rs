//! Conditional distributions for the Gibbs sweep. Each `*_conditional`
//! returns the parameters of the exact conditional; the matching `update_*`
//! draws from it and writes the result into the chain state.

use rand::Rng;
use statrs::function::gamma::ln_gamma;

use super::conjugate::{conjugate_normal_from_residuals, conjugate_normal_posterior, sample_truncated_normal, ConjugateNormalSpec};
use super::ChainState;
use crate::dist::{sample_categorical_neg_log, sample_inverse_gamma, sample_normal};
use crate::error::{Error, Result};
use crate::model::{Effective, ParameterDraw, PriorConfig, SeasonalPrior, B1_RANGE, LAMBDA_RANGE};

/// Attempts at drawing a truncated normal before clamping.
pub const TRUNCATION_TRIES: usize = 100;

/// Shape and scale of an inverse-gamma conditional.
pub type InverseGammaParams = (f64, f64);

fn sigma2_obs(state: &ChainState, t: usize) -> f64 {
    state.theta.omega2[t] * state.paths.sigma2hat[t]
}

/// Conditional for the global variance, with the latent scales `ω²`.
pub fn chi2_conditional(state: &ChainState, prior: &PriorConfig) -> Result<InverseGammaParams> {
    let eff = Effective::new(&state.theta, prior);
    let p = &state.paths;
    let n = p.residual.len();
    let mut scale = 0.0;
    for t in 0..n {
        let e = p.residual[t];
        scale += e * e / (2.0 * state.theta.omega2[t] * eff.variance_factor(p.level[t]));
    }
    let (mut shape, mut extra) = (0.5 * n as f64, 0.0);
    if let Some((a0, b0)) = prior.chi2_prior {
        shape += a0;
        extra = b0;
    }
    let scale = scale + extra;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::Degenerate(format!("chi2 conditional has scale {scale}; residuals are all zero")));
    }
    Ok((shape, scale))
}

pub fn update_chi2<R: Rng + ?Sized>(y: &[f64], state: &mut ChainState, prior: &PriorConfig, rng: &mut R) -> Result<f64> {
    let (shape, scale) = chi2_conditional(state, prior)?;
    state.theta.chi2 = sample_inverse_gamma(rng, shape, scale)?;
    state.refresh(y, prior)?;
    Ok(state.theta.chi2)
}

/// Conditional for `ω²` of forecast `t`.
pub fn omega2_conditional(state: &ChainState, t: usize) -> InverseGammaParams {
    let nu = state.theta.nu;
    let e = state.paths.residual[t];
    (0.5 * (nu + 1.0), e * e / (2.0 * state.paths.sigma2hat[t]) + 0.5 * nu)
}

pub fn update_omega2<R: Rng + ?Sized>(state: &mut ChainState, rng: &mut R) -> Result<()> {
    for t in 0..state.paths.residual.len() {
        let (shape, scale) = omega2_conditional(state, t);
        state.theta.omega2[t] = sample_inverse_gamma(rng, shape, scale)?;
    }
    Ok(())
}

/// Negative log conditional of `ν` at each candidate given the `ω²`.
pub fn nu_neg_log_posterior(candidates: &[f64], omega2: &[f64]) -> Vec<f64> {
    let n = omega2.len() as f64;
    let sum_log: f64 = omega2.iter().map(|w| w.ln()).sum();
    let sum_inv: f64 = omega2.iter().map(|w| 1.0 / w).sum();
    candidates
        .iter()
        .map(|&nu| {
            let half = 0.5 * nu;
            -n * half * half.ln() + n * ln_gamma(half) + 0.5 * (nu + 1.0) * sum_log + half * sum_inv
        })
        .collect()
}

pub fn update_nu<R: Rng + ?Sized>(state: &mut ChainState, candidates: &[f64], rng: &mut R) -> Result<f64> {
    let neg_log = nu_neg_log_posterior(candidates, &state.theta.omega2);
    let i = sample_categorical_neg_log(rng, &neg_log).map_err(degenerate("nu"))?;
    state.theta.nu = candidates[i];
    Ok(state.theta.nu)
}

fn degenerate(name: &'static str) -> impl Fn(Error) -> Error {
    move |e| Error::Degenerate(format!("{name} grid: {e}"))
}

/// `IG(1, v²/(2 s²) + 1/2)`, the conditional of a Cauchy mixing variance.
pub fn cauchy_latent_conditional(value: f64, scale: f64) -> InverseGammaParams {
    (1.0, value * value / (2.0 * scale * scale) + 0.5)
}

/// Regression form of the `γ` conditional.
pub fn gamma_spec(y: &[f64], state: &ChainState, prior: &PriorConfig) -> ConjugateNormalSpec {
    let eff = Effective::new(&state.theta, prior);
    let p = &state.paths;
    let n = p.residual.len();
    let mut spec = ConjugateNormalSpec {
        y: y[1..].to_vec(),
        x: Vec::with_capacity(n),
        s: Vec::with_capacity(n),
        c: Vec::with_capacity(n),
        sigma2: Vec::with_capacity(n),
        prior_variance: state.theta.xi_gamma2 * prior.s_gamma * prior.s_gamma,
    };
    for t in 0..n {
        let (lp, _) = Effective::floored(p.level[t]);
        spec.x.push(lp.powf(eff.rho));
        spec.s.push(p.log_season[t + 1].exp());
        spec.c.push(p.level[t] + eff.lambda * p.trend[t]);
        spec.sigma2.push(sigma2_obs(state, t));
    }
    spec
}

/// Negative log conditional of `ρ` with `γ` integrated out, given `ω²`.
/// Drawing `ρ` from this and then `γ` from its conjugate conditional moves
/// the pair jointly; `γ l^ρ` ties them tightly.
pub fn rho_gamma_neg_log_posterior(y: &[f64], state: &ChainState, prior: &PriorConfig, candidates: &[f64]) -> Vec<f64> {
    let spec = gamma_spec(y, state, prior);
    let floored: Vec<f64> = state.paths.level[..spec.y.len()].iter().map(|&l| Effective::floored(l).0).collect();
    candidates
        .iter()
        .map(|&rho| {
            let mut precision = 1.0 / spec.prior_variance;
            let mut score = 0.0;
            for i in 0..spec.y.len() {
                let xs = floored[i].powf(rho) * spec.s[i];
                precision += xs * xs / spec.sigma2[i];
                score += xs * (spec.y[i] - spec.c[i] * spec.s[i]) / spec.sigma2[i];
            }
            0.5 * precision.ln() - 0.5 * score * score / precision + (rho * rho).ln_1p()
        })
        .collect()
}

/// Draws `ρ` with `γ` integrated out, then `γ` and its Cauchy latent.
pub fn update_gamma<R: Rng + ?Sized>(
    y: &[f64],
    state: &mut ChainState,
    prior: &PriorConfig,
    rho_candidates: &[f64],
    rng: &mut R,
) -> Result<(f64, f64)> {
    let neg_log = rho_gamma_neg_log_posterior(y, state, prior, rho_candidates);
    let i = sample_categorical_neg_log(rng, &neg_log).map_err(degenerate("rho"))?;
    state.theta.rho = rho_candidates[i];
    let (mean, var) = conjugate_normal_posterior(&gamma_spec(y, state, prior))?;
    let gamma = sample_normal(rng, mean, var)?;
    let (shape, scale) = cauchy_latent_conditional(gamma, prior.s_gamma);
    state.theta.gamma = gamma;
    state.theta.xi_gamma2 = sample_inverse_gamma(rng, shape, scale)?;
    state.refresh(y, prior)?;
    Ok((gamma, state.theta.xi_gamma2))
}

/// Regression form of the `λ` conditional (non-seasonal model).
pub fn lambda_spec(y: &[f64], state: &ChainState, prior: &PriorConfig) -> ConjugateNormalSpec {
    let eff = Effective::new(&state.theta, prior);
    let p = &state.paths;
    let n = p.residual.len();
    let mut spec = ConjugateNormalSpec {
        y: y[1..].to_vec(),
        x: Vec::with_capacity(n),
        s: Vec::with_capacity(n),
        c: Vec::with_capacity(n),
        sigma2: Vec::with_capacity(n),
        prior_variance: state.theta.xi_lambda2 * prior.s_lambda * prior.s_lambda,
    };
    for t in 0..n {
        let (lp, _) = Effective::floored(p.level[t]);
        spec.x.push(p.trend[t]);
        spec.s.push(p.log_season[t + 1].exp());
        spec.c.push(p.level[t] + eff.gamma * lp.powf(eff.rho));
        spec.sigma2.push(sigma2_obs(state, t));
    }
    spec
}

/// Mean and variance of the `b1` conditional. `b1` enters forecast `t` as
/// `λ (1-β)^t b1`.
pub fn b1_conditional(state: &ChainState, prior: &PriorConfig) -> Result<(f64, f64)> {
    let th = &state.theta;
    let n = state.paths.residual.len();
    let mut x = Vec::with_capacity(n);
    let mut decay = 1.0;
    for t in 0..n {
        x.push(th.lambda * decay * state.paths.log_season[t + 1].exp());
        decay *= 1.0 - th.beta;
    }
    let sigma2: Vec<f64> = (0..n).map(|t| sigma2_obs(state, t)).collect();
    conjugate_normal_from_residuals(&x, &state.paths.residual, &sigma2, th.b1, th.xi_b1_2 * prior.s_b1 * prior.s_b1)
}

/// Counts of truncated draws that had to be clamped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TruncationClamps {
    pub lambda: u64,
    pub b1: u64,
}

pub fn update_lambda_b1<R: Rng + ?Sized>(
    y: &[f64],
    state: &mut ChainState,
    prior: &PriorConfig,
    rng: &mut R,
    clamps: &mut TruncationClamps,
) -> Result<()> {
    if prior.is_seasonal() {
        return Err(Error::InvalidParameter("lambda and b1 are fixed in the seasonal model".into()));
    }
    let (mean, var) = conjugate_normal_posterior(&lambda_spec(y, state, prior))?;
    let (lambda, clamped) = sample_truncated_normal(rng, mean, var, LAMBDA_RANGE.0, LAMBDA_RANGE.1, TRUNCATION_TRIES)?;
    clamps.lambda += clamped as u64;
    let (shape, scale) = cauchy_latent_conditional(lambda, prior.s_lambda);
    state.theta.lambda = lambda;
    state.theta.xi_lambda2 = sample_inverse_gamma(rng, shape, scale)?;
    state.refresh(y, prior)?;

    let (mean, var) = b1_conditional(state, prior)?;
    // open interval: a clamped draw lands just inside
    let (lo, hi) = (B1_RANGE.0 * (1.0 - f64::EPSILON), B1_RANGE.1 - f64::EPSILON);
    let (b1, clamped) = sample_truncated_normal(rng, mean, var, lo, hi, TRUNCATION_TRIES)?;
    clamps.b1 += clamped as u64;
    let (shape, scale) = cauchy_latent_conditional(b1, prior.s_b1);
    state.theta.b1 = b1;
    state.theta.xi_b1_2 = sample_inverse_gamma(rng, shape, scale)?;
    state.refresh(y, prior)
}

/// Conditional of the local scale `ψ²_i`.
pub fn psi2_conditional(theta: &ParameterDraw, i: usize) -> InverseGammaParams {
    let x = theta.log_s_init[i];
    (1.0, 1.0 / theta.eta_s[i] + x * x / (2.0 * theta.delta2))
}

/// Conditional of the global scale `δ²`.
pub fn delta2_conditional(theta: &ParameterDraw) -> InverseGammaParams {
    let m = theta.log_s_init.len();
    let ss: f64 = theta.log_s_init.iter().zip(&theta.psi2).map(|(x, p)| x * x / p).sum();
    (0.5 * m as f64, 1.0 / theta.eta_delta + 0.5 * ss)
}

/// Conditional of an auxiliary `η` given the scale it mixes.
pub fn eta_conditional(scale2: f64) -> InverseGammaParams {
    (1.0, 1.0 + 1.0 / scale2)
}

pub fn update_horseshoe<R: Rng + ?Sized>(theta: &mut ParameterDraw, rng: &mut R) -> Result<()> {
    let m = theta.log_s_init.len();
    for i in 0..m {
        let (a, b) = psi2_conditional(theta, i);
        theta.psi2[i] = sample_inverse_gamma(rng, a, b)?;
    }
    let (a, b) = delta2_conditional(theta);
    theta.delta2 = sample_inverse_gamma(rng, a, b)?;
    for i in 0..m {
        let (a, b) = eta_conditional(theta.psi2[i]);
        theta.eta_s[i] = sample_inverse_gamma(rng, a, b)?;
    }
    let (a, b) = eta_conditional(theta.delta2);
    theta.eta_delta = sample_inverse_gamma(rng, a, b)?;
    Ok(())
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i + 1 == n { hi } else { lo + step * i as f64 }).collect()
}

fn t_kernel(e: f64, s2: f64, nu: f64) -> f64 {
    (e * e / (nu * s2)).ln_1p()
}

/// Collapsed negative log conditional of `ρ` at each candidate.
pub fn rho_neg_log_posterior(y: &[f64], state: &ChainState, prior: &PriorConfig, candidates: &[f64]) -> Vec<f64> {
    let p = &state.paths;
    let nu = state.theta.nu;
    let half_nu1 = 0.5 * (nu + 1.0);
    let mut eff = Effective::new(&state.theta, prior);
    candidates
        .iter()
        .map(|&rho| {
            eff.rho = rho;
            let mut sum = 0.0;
            for t in 0..p.residual.len() {
                let f = eff.trend_part(p.level[t], p.trend[t]) * p.log_season[t + 1].exp();
                sum += t_kernel(y[t + 1] - f, p.sigma2hat[t], nu);
            }
            half_nu1 * sum + (rho * rho).ln_1p()
        })
        .collect()
}

/// Collapsed negative log conditional for a variance-shape parameter, with
/// `set` applying each candidate.
fn variance_neg_log_posterior<F: Fn(&mut Effective, f64)>(state: &ChainState, prior: &PriorConfig, candidates: &[f64], set: F) -> Vec<f64> {
    let p = &state.paths;
    let nu = state.theta.nu;
    let half_nu1 = 0.5 * (nu + 1.0);
    let mut eff = Effective::new(&state.theta, prior);
    candidates
        .iter()
        .map(|&v| {
            set(&mut eff, v);
            let mut kernel = 0.0;
            let mut log_var = 0.0;
            for t in 0..p.residual.len() {
                let s2 = eff.chi2 * eff.variance_factor(p.level[t]);
                kernel += t_kernel(p.residual[t], s2, nu);
                log_var += s2.ln();
            }
            half_nu1 * kernel + 0.5 * log_var
        })
        .collect()
}

pub fn tau_neg_log_posterior(state: &ChainState, prior: &PriorConfig, candidates: &[f64]) -> Vec<f64> {
    variance_neg_log_posterior(state, prior, candidates, |e, v| e.tau = v)
}

pub fn phi_neg_log_posterior(state: &ChainState, prior: &PriorConfig, candidates: &[f64]) -> Vec<f64> {
    variance_neg_log_posterior(state, prior, candidates, |e, v| e.phi = v)
}

pub fn update_rho<R: Rng + ?Sized>(y: &[f64], state: &mut ChainState, prior: &PriorConfig, candidates: &[f64], rng: &mut R) -> Result<f64> {
    let neg_log = rho_neg_log_posterior(y, state, prior, candidates);
    let i = sample_categorical_neg_log(rng, &neg_log).map_err(degenerate("rho"))?;
    state.theta.rho = candidates[i];
    state.refresh(y, prior)?;
    Ok(state.theta.rho)
}

pub fn update_tau<R: Rng + ?Sized>(y: &[f64], state: &mut ChainState, prior: &PriorConfig, candidates: &[f64], rng: &mut R) -> Result<f64> {
    let neg_log = tau_neg_log_posterior(state, prior, candidates);
    let i = sample_categorical_neg_log(rng, &neg_log).map_err(degenerate("tau"))?;
    state.theta.tau = candidates[i];
    state.refresh(y, prior)?;
    Ok(state.theta.tau)
}

pub fn update_phi<R: Rng + ?Sized>(y: &[f64], state: &mut ChainState, prior: &PriorConfig, candidates: &[f64], rng: &mut R) -> Result<f64> {
    let neg_log = phi_neg_log_posterior(state, prior, candidates);
    let i = sample_categorical_neg_log(rng, &neg_log).map_err(degenerate("phi"))?;
    state.theta.phi = candidates[i];
    state.refresh(y, prior)?;
    Ok(state.theta.phi)
}

/// Negative log prior of the initial log seasonals (up to a constant).
pub fn seasonal_neg_log_prior(theta: &ParameterDraw, prior: &PriorConfig, x: &[f64]) -> f64 {
    match prior.seasonal_prior {
        SeasonalPrior::Horseshoe => x
            .iter()
            .zip(&theta.psi2)
            .map(|(v, p)| v * v / (2.0 * p * theta.delta2))
            .sum(),
        SeasonalPrior::Cauchy { scale } => x.iter().map(|v| (v / scale).powi(2).ln_1p()).sum(),
    }
}

/// Derivative of one term of [`seasonal_neg_log_prior`] with respect to
/// its own coordinate.
pub fn seasonal_prior_slope(theta: &ParameterDraw, prior: &PriorConfig, i: usize, v: f64) -> f64 {
    match prior.seasonal_prior {
        SeasonalPrior::Horseshoe => v / (theta.psi2[i] * theta.delta2),
        SeasonalPrior::Cauchy { scale } => 2.0 * v / (scale * scale + v * v),
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::dist::quadrature::{integrate, integrate_to_infinity, Tolerance};
    use crate::dist::{normalized_weights, RngStream};
    use crate::model::{ModelKind, VarianceMode};
    use rand::Rng;

    pub(crate) fn fixture(kind: ModelKind, n: usize, seed: u64) -> (Vec<f64>, ChainState, PriorConfig) {
        let mut rng = RngStream::new(seed, 5);
        let pattern = [1.15, 0.95, 0.85, 1.05];
        let mut level = 30.0;
        let y: Vec<f64> = (0..n)
            .map(|t| {
                level += 0.6 + rng.random::<f64>() - 0.5;
                let s = if kind == ModelKind::Seasonal { pattern[t % 4] } else { 1.0 };
                level * s * (1.0 + 0.03 * (rng.random::<f64>() - 0.5))
            })
            .collect();
        let prior = PriorConfig::for_values(&y, kind, VarianceMode::Heteroscedastic);
        let mut theta = ParameterDraw::initial(&y, &prior, 4, 5.0);
        theta.gamma = 0.2;
        theta.lambda = if kind == ModelKind::Seasonal { 0.0 } else { 0.5 };
        theta.b1 = 0.3;
        theta.alpha = 0.6;
        theta.beta = 0.25;
        theta.omega2 = (0..n - 1).map(|_| rng.random_range(0.5..2.0)).collect();
        theta.xi_gamma2 = 0.7;
        theta.xi_lambda2 = 1.3;
        theta.xi_b1_2 = 0.9;
        let state = ChainState::new(&y, theta, &prior).unwrap();
        (y, state, prior)
    }

    /// Mean and variance of a density known up to a constant on `[lo, hi]`.
    fn moments_finite<F: Fn(f64) -> f64>(log_f: F, lo: f64, hi: f64) -> (f64, f64) {
        let tol = Tolerance {
            abs: 0.0,
            rel: 1e-11,
            max_intervals: 4000,
        };
        let z = integrate(|v| log_f(v).exp(), lo, hi, tol).unwrap().value;
        let m1 = integrate(|v| v * log_f(v).exp(), lo, hi, tol).unwrap().value / z;
        let m2 = integrate(|v| (v - m1).powi(2) * log_f(v).exp(), lo, hi, tol).unwrap().value / z;
        (m1, m2)
    }

    fn assert_rel(a: f64, b: f64, tol: f64, what: &str) {
        assert!((a - b).abs() <= tol * b.abs().max(1e-300), "{what}: {a} vs {b}");
    }

    /// Mean and variance of the normal conditional, from quadrature of the
    /// likelihood under the full recursion times the normal prior.
    fn normal_conditional_by_quadrature(
        y: &[f64],
        state: &ChainState,
        prior: &PriorConfig,
        set: impl Fn(&mut ParameterDraw, f64),
        prior_var: f64,
        centre: f64,
        spread: f64,
    ) -> (f64, f64) {
        let log_post = |w: f64| {
            let mut th = state.theta.clone();
            set(&mut th, w);
            let p = crate::model::run_recursion(y, &th, prior).unwrap();
            let mut lp = -0.5 * w * w / prior_var;
            for t in 0..p.residual.len() {
                let s2 = th.omega2[t] * p.sigma2hat[t];
                lp -= 0.5 * p.residual[t].powi(2) / s2;
            }
            lp
        };
        let peak = log_post(centre);
        moments_finite(|w| log_post(w) - peak, centre - 12.0 * spread, centre + 12.0 * spread)
    }

    #[test]
    fn rho_with_gamma_integrated_matches_quadrature() {
        let (y, state, prior) = fixture(ModelKind::NonSeasonal, 16, 3);
        let a2 = state.theta.xi_gamma2 * prior.s_gamma.powi(2);
        let candidates = [0.1, 0.5, 0.9];
        let neg_log = rho_gamma_neg_log_posterior(&y, &state, &prior, &candidates);
        let log_marginal = |rho: f64| {
            let mut st = ChainState::new(&y, state.theta.clone(), &prior).unwrap();
            st.theta.rho = rho;
            let (mu, var) = conjugate_normal_posterior(&gamma_spec(&y, &st, &prior)).unwrap();
            let log_post = |w: f64| {
                let mut th = st.theta.clone();
                th.gamma = w;
                let p = crate::model::run_recursion(&y, &th, &prior).unwrap();
                let mut lp = -0.5 * w * w / a2;
                for t in 0..p.residual.len() {
                    lp -= 0.5 * p.residual[t].powi(2) / (th.omega2[t] * p.sigma2hat[t]);
                }
                lp
            };
            let peak = log_post(mu);
            let sd = var.sqrt();
            let tol = Tolerance { abs: 0.0, rel: 1e-11, max_intervals: 4000 };
            peak + integrate(|w| (log_post(w) - peak).exp(), mu - 12.0 * sd, mu + 12.0 * sd, tol).unwrap().value.ln() - (rho * rho).ln_1p()
        };
        let oracle: Vec<f64> = candidates.iter().map(|&r| log_marginal(r)).collect();
        for k in 1..3 {
            let got = neg_log[0] - neg_log[k];
            let want = oracle[k] - oracle[0];
            assert!((got - want).abs() < 1e-6 * want.abs().max(1.0), "rho {}: {got} vs {want}", candidates[k]);
        }
    }

    #[test]
    fn gamma_matches_quadrature() {
        let (y, state, prior) = fixture(ModelKind::NonSeasonal, 16, 1);
        let (mu, var) = conjugate_normal_posterior(&gamma_spec(&y, &state, &prior)).unwrap();
        let a2 = state.theta.xi_gamma2 * prior.s_gamma.powi(2);
        let (m, v) = normal_conditional_by_quadrature(&y, &state, &prior, |th, w| th.gamma = w, a2, mu, var.sqrt());
        assert_rel(mu, m, 1e-6, "gamma mean");
        assert_rel(var, v, 1e-6, "gamma variance");

        let (y, state, prior) = fixture(ModelKind::Seasonal, 16, 2);
        let (mu, var) = conjugate_normal_posterior(&gamma_spec(&y, &state, &prior)).unwrap();
        let a2 = state.theta.xi_gamma2 * prior.s_gamma.powi(2);
        let (m, v) = normal_conditional_by_quadrature(&y, &state, &prior, |th, w| th.gamma = w, a2, mu, var.sqrt());
        assert_rel(mu, m, 1e-6, "seasonal gamma mean");
        assert_rel(var, v, 1e-6, "seasonal gamma variance");
    }

    #[test]
    fn lambda_and_b1_match_quadrature() {
        let (y, state, prior) = fixture(ModelKind::NonSeasonal, 16, 3);
        let (mu, var) = conjugate_normal_posterior(&lambda_spec(&y, &state, &prior)).unwrap();
        let a2 = state.theta.xi_lambda2 * prior.s_lambda.powi(2);
        let (m, v) = normal_conditional_by_quadrature(&y, &state, &prior, |th, w| th.lambda = w, a2, mu, var.sqrt());
        assert_rel(mu, m, 1e-6, "lambda mean");
        assert_rel(var, v, 1e-6, "lambda variance");

        let (mu, var) = b1_conditional(&state, &prior).unwrap();
        let a2 = state.theta.xi_b1_2 * prior.s_b1.powi(2);
        let (m, v) = normal_conditional_by_quadrature(&y, &state, &prior, |th, w| th.b1 = w, a2, mu, var.sqrt());
        assert_rel(mu, m, 1e-6, "b1 mean");
        assert_rel(var, v, 1e-6, "b1 variance");
    }

    #[test]
    fn b1_has_no_influence_beyond_first_step_when_beta_is_one() {
        let (y, mut state, prior) = fixture(ModelKind::NonSeasonal, 12, 4);
        state.theta.beta = 1.0;
        state.refresh(&y, &prior).unwrap();
        let before = state.paths.yhat.clone();
        state.theta.b1 += 0.5;
        state.refresh(&y, &prior).unwrap();
        assert!((state.paths.yhat[0] - before[0] - 0.5 * state.theta.lambda).abs() < 1e-12);
        assert_eq!(&state.paths.yhat[1..], &before[1..]);
    }

    #[test]
    fn chi2_conditional_matches_quadrature() {
        let (_, state, prior) = fixture(ModelKind::NonSeasonal, 14, 5);
        let (shape, scale) = chi2_conditional(&state, &prior).unwrap();
        let eff = Effective::new(&state.theta, &prior);
        let p = &state.paths;
        // likelihood of the residuals as a function of chi2, times 1/chi2
        let log_post = |c: f64| {
            let mut lp = -c.ln();
            for t in 0..p.residual.len() {
                let v = c * state.theta.omega2[t] * eff.variance_factor(p.level[t]);
                lp += -0.5 * v.ln() - 0.5 * p.residual[t].powi(2) / v;
            }
            lp
        };
        let mode = scale / (shape + 1.0);
        let peak = log_post(mode);
        let tol = Tolerance { abs: 0.0, rel: 1e-11, max_intervals: 4000 };
        let z = integrate_to_infinity(|c| (log_post(c) - peak).exp(), 0.0, tol).unwrap().value;
        let m1 = integrate_to_infinity(|c| c * (log_post(c) - peak).exp(), 0.0, tol).unwrap().value / z;
        let var = integrate_to_infinity(|c| (c - m1).powi(2) * (log_post(c) - peak).exp(), 0.0, tol).unwrap().value / z;
        assert_rel(m1, scale / (shape - 1.0), 1e-6, "chi2 mean");
        assert_rel(var, scale * scale / ((shape - 1.0).powi(2) * (shape - 2.0)), 1e-6, "chi2 variance");
    }

    #[test]
    fn chi2_scale_is_quadratic_in_residuals() {
        let (y, state, prior) = fixture(ModelKind::NonSeasonal, 14, 6);
        let (_, scale) = chi2_conditional(&state, &prior).unwrap();
        let mut scaled = state.clone();
        for e in scaled.paths.residual.iter_mut() {
            *e *= 3.0;
        }
        let (_, scale3) = chi2_conditional(&scaled, &prior).unwrap();
        assert_rel(scale3, 9.0 * scale, 1e-12, "scale");
        let mut zero = state.clone();
        zero.paths.residual.iter_mut().for_each(|e| *e = 0.0);
        assert!(matches!(chi2_conditional(&zero, &prior), Err(Error::Degenerate(_))));
        let _ = y;
    }

    #[test]
    fn omega2_zero_residual_mean() {
        let (_, mut state, _) = fixture(ModelKind::NonSeasonal, 6, 7);
        state.theta.nu = 3.0;
        state.paths.residual[0] = 0.0;
        let (a, b) = omega2_conditional(&state, 0);
        assert_eq!((a, b), (2.0, 1.5));
        let mut rng = RngStream::new(1, 1);
        let n = 400_000;
        let mean: f64 = (0..n).map(|_| sample_inverse_gamma(&mut rng, a, b).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - 1.5).abs() < 0.015 * 1.5, "{mean}");
    }

    #[test]
    fn omega2_normal_limit() {
        let (_, mut state, _) = fixture(ModelKind::NonSeasonal, 6, 8);
        state.theta.nu = 1e6;
        let mut rng = RngStream::new(2, 1);
        update_omega2(&mut state, &mut rng).unwrap();
        assert!(state.theta.omega2.iter().all(|w| (w - 1.0).abs() < 1e-2));
    }

    #[test]
    fn horseshoe_conditionals() {
        let (_, state, _) = fixture(ModelKind::Seasonal, 16, 9);
        let mut th = state.theta.clone();
        th.log_s_init = vec![0.0; 4];
        let (a, b) = delta2_conditional(&th);
        assert_eq!((a, b), (2.0, 1.0 / th.eta_delta));
        th.log_s_init = vec![0.3, -0.1, -0.4, 0.2];
        th.psi2 = vec![0.5, 1.0, 2.0, 4.0];
        th.delta2 = 0.3;
        let (a, b) = psi2_conditional(&th, 2);
        assert_eq!(a, 1.0);
        assert_rel(b, 1.0 / th.eta_s[2] + 0.16 / 0.6, 1e-15, "psi2 scale");
        let (_, b) = delta2_conditional(&th);
        assert_rel(b, 1.0 / th.eta_delta + 0.5 * (0.09 / 0.5 + 0.01 + 0.16 / 2.0 + 0.04 / 4.0), 1e-15, "delta2 scale");
        assert_eq!(eta_conditional(0.25), (1.0, 5.0));
    }

    #[test]
    fn horseshoe_update_is_positive_and_keeps_seeds() {
        let (_, state, _) = fixture(ModelKind::Seasonal, 16, 10);
        let mut th = state.theta.clone();
        let seeds = th.log_s_init.clone();
        let mut rng = RngStream::new(3, 1);
        for _ in 0..100 {
            update_horseshoe(&mut th, &mut rng).unwrap();
        }
        assert_eq!(th.log_s_init, seeds);
        th.check_invariants().unwrap();
    }

    #[test]
    fn nu_prefers_large_values_for_unit_latents() {
        let grid = crate::dist::cached_nu_grid(1.6, 1000.0, 100).unwrap();
        let neg = nu_neg_log_posterior(grid.candidates(), &vec![1.0; 500]);
        let w = normalized_weights(&neg).unwrap();
        let (imax, _) = w.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert_eq!(imax, grid.len() - 1);
    }

    #[test]
    fn single_candidate_grid() {
        let (y, mut state, prior) = fixture(ModelKind::NonSeasonal, 12, 11);
        let mut rng = RngStream::new(4, 1);
        for _ in 0..10 {
            assert_eq!(update_rho(&y, &mut state, &prior, &[0.25], &mut rng).unwrap(), 0.25);
            assert_eq!(update_nu(&mut state, &[7.0], &mut rng).unwrap(), 7.0);
        }
    }

    #[test]
    fn rho_penalty_term() {
        let (y, state, prior) = fixture(ModelKind::NonSeasonal, 12, 12);
        let grid = uniform_grid(-0.5, 1.0, 64);
        let with = rho_neg_log_posterior(&y, &state, &prior, &grid);
        for (v, rho) in with.iter().zip(&grid) {
            let mut th = state.theta.clone();
            th.rho = *rho;
            let p = crate::model::run_recursion(&y, &th, &prior).unwrap();
            let kernel: f64 = p
                .residual
                .iter()
                .zip(&p.sigma2hat)
                .map(|(e, s2)| (e * e / (th.nu * s2)).ln_1p())
                .sum();
            let expected = 0.5 * (th.nu + 1.0) * kernel + (rho * rho + 1.0).ln();
            assert_rel(*v, expected, 1e-12, "rho objective");
        }
    }

    #[test]
    fn variance_grids_match_recursion() {
        let (y, state, prior) = fixture(ModelKind::Seasonal, 16, 13);
        let grid = uniform_grid(0.0, 1.0, 64);
        let tau = tau_neg_log_posterior(&state, &prior, &grid);
        let phi = phi_neg_log_posterior(&state, &prior, &grid);
        for (i, v) in grid.iter().enumerate() {
            let objective = |th: &ParameterDraw| {
                let p = crate::model::run_recursion(&y, th, &prior).unwrap();
                crate::model::smoothing_objective(&p, th.nu)
            };
            let mut th = state.theta.clone();
            th.tau = *v;
            assert_rel(tau[i], objective(&th), 1e-12, "tau objective");
            let mut th = state.theta.clone();
            th.phi = *v;
            assert_rel(phi[i], objective(&th), 1e-12, "phi objective");
        }
    }

    #[test]
    fn grid_frequencies_match_weights() {
        let (y, state, prior) = fixture(ModelKind::NonSeasonal, 10, 14);
        let grid = uniform_grid(0.0, 1.0, 8);
        let neg = tau_neg_log_posterior(&state, &prior, &grid);
        let w = normalized_weights(&neg).unwrap();
        let mut rng = RngStream::new(5, 1);
        let mut counts = vec![0usize; grid.len()];
        let mut st = state.clone();
        let n = 100_000;
        for _ in 0..n {
            let v = update_tau(&y, &mut st, &prior, &grid, &mut rng).unwrap();
            counts[grid.iter().position(|g| *g == v).unwrap()] += 1;
            st.theta.tau = state.theta.tau;
            st.refresh(&y, &prior).unwrap();
        }
        for (c, p) in counts.iter().zip(&w) {
            assert!((*c as f64 / n as f64 - p).abs() < 0.01, "{counts:?} vs {w:?}");
        }
    }

    #[test]
    fn uniform_grid_endpoints() {
        let g = uniform_grid(-0.5, 1.0, 64);
        assert_eq!(g.len(), 64);
        assert_eq!(g[0], -0.5);
        assert_eq!(g[63], 1.0);
        assert_eq!(uniform_grid(0.3, 1.0, 1), vec![0.3]);
    }

    #[test]
    fn lambda_stays_in_range() {
        let (y, mut state, prior) = fixture(ModelKind::NonSeasonal, 16, 15);
        let mut rng = RngStream::new(6, 1);
        let mut clamps = TruncationClamps::default();
        for _ in 0..200 {
            update_lambda_b1(&y, &mut state, &prior, &mut rng, &mut clamps).unwrap();
            assert!((LAMBDA_RANGE.0..=LAMBDA_RANGE.1).contains(&state.theta.lambda));
            assert!(state.theta.b1 > B1_RANGE.0 && state.theta.b1 < B1_RANGE.1);
        }
    }
}
