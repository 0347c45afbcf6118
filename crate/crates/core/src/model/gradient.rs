//! Analytic derivatives of the smoothing objective, propagated forward
//! through the recursion alongside the states.

use super::{Effective, ParameterDraw, PriorConfig, StatePaths};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Alpha,
    Beta,
    Zeta,
    /// Free initial log seasonal `i` (for `i < m - 1`); the last one moves
    /// by the opposite amount so the sum stays zero.
    LogSeason(usize),
}

/// Derivatives of [`smoothing_objective`](super::smoothing_objective) along each direction, evaluated
/// at `theta`. `paths` must come from `run_recursion(y, theta, cfg)`.
pub fn directional_derivatives(
    y: &[f64],
    theta: &ParameterDraw,
    cfg: &PriorConfig,
    paths: &StatePaths,
    dirs: &[Direction],
) -> Result<Vec<f64>> {
    let n = y.len();
    let k = dirs.len();
    if paths.len() != n {
        return Err(Error::InvalidParameter("state paths do not match the series".into()));
    }
    let eff = Effective::new(theta, cfg);
    let m = if eff.seasonal { theta.log_s_init.len() } else { 1 };
    for d in dirs {
        if let Direction::LogSeason(i) = d {
            if !eff.seasonal || *i + 1 >= m {
                return Err(Error::InvalidParameter(format!("no free seasonal direction {i}")));
            }
        }
    }
    let nu = theta.nu;
    let l = &paths.level;
    let b = &paths.trend;
    let log_s = &paths.log_season;
    // log factor at t, including the m values past the end
    let log_s_at = |t: usize| if t < n { log_s[t] } else { paths.log_season_ahead[t - n] };

    // tangents: dls[t * k + j] is d log s(t) along direction j
    let mut dls = vec![0.0; (n + m) * k];
    for (j, d) in dirs.iter().enumerate() {
        if let Direction::LogSeason(i) = *d {
            dls[i * k + j] = 1.0;
            dls[(m - 1) * k + j] = -1.0;
        }
    }
    let mut dl = vec![0.0; k];
    let mut db = vec![0.0; k];
    let mut grad = vec![0.0; k];

    let factor = eff.gamma * eff.rho;
    let var_coef = 2.0 * eff.tau * eff.chi2 * (1.0 - eff.phi).powi(2);
    let half_nu = 0.5 * nu;
    let half_nu1 = 0.5 * (nu + 1.0);

    for t in 0..n {
        if t == 0 {
            if eff.seasonal {
                for j in 0..k {
                    dl[j] = -l[0] * dls[j];
                }
            }
        } else {
            let deseason = if eff.seasonal { y[t] * (-log_s[t]).exp() } else { y[t] };
            for (j, d) in dirs.iter().enumerate() {
                let dlt = dls[t * k + j];
                let mut v = (1.0 - eff.alpha) * dl[j] - eff.alpha * deseason * dlt;
                if *d == Direction::Alpha {
                    v += deseason - l[t - 1];
                }
                let mut w = eff.beta * (v - dl[j]) + (1.0 - eff.beta) * db[j];
                if *d == Direction::Beta {
                    w += (l[t] - l[t - 1]) - b[t - 1];
                }
                dl[j] = v;
                db[j] = w;
            }
        }
        if eff.seasonal {
            for (j, d) in dirs.iter().enumerate() {
                let mut v = -eff.zeta * dl[j] / l[t] + (1.0 - eff.zeta) * dls[t * k + j];
                if *d == Direction::Zeta {
                    v += (y[t] / l[t]).ln() - log_s[t];
                }
                dls[(t + m) * k + j] = v;
            }
        }
        if t + 1 < n {
            let (lp, clamped) = Effective::floored(l[t]);
            let dpow = if clamped { 0.0 } else { 1.0 };
            let s_next = log_s_at(t + 1).exp();
            let base = eff.trend_part(l[t], b[t]);
            let e = paths.residual[t];
            let s2 = paths.sigma2hat[t];
            let slope = 1.0 + factor * dpow * lp.powf(eff.rho - 1.0);
            let dvar_dl = var_coef * dpow * lp.powf(2.0 * eff.tau - 1.0);
            let denom = nu * s2 + e * e;
            // d[(ν+1)/2 log(νσ² + e²) - ν/2 log σ²]
            for j in 0..k {
                let dbase = dl[j] * slope + eff.lambda * db[j];
                let dyhat = (dbase + base * dls[(t + 1) * k + j]) * s_next;
                let dvar = dvar_dl * dl[j];
                let de2 = -2.0 * e * dyhat;
                grad[j] += -half_nu * dvar / s2 + half_nu1 * (nu * dvar + de2) / denom;
            }
        }
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numerical("non-finite gradient".into()));
    }
    Ok(grad)
}

/// Gradient of the smoothing objective with respect to `(alpha, beta, zeta)`.
pub fn smoothing_gradient(
    y: &[f64],
    theta: &ParameterDraw,
    cfg: &PriorConfig,
    paths: &StatePaths,
) -> Result<[f64; 3]> {
    let g = directional_derivatives(y, theta, cfg, paths, &[Direction::Alpha, Direction::Beta, Direction::Zeta])?;
    Ok([g[0], g[1], g[2]])
}

/// Gradient with respect to the `m - 1` free initial log seasonals.
pub fn seasonal_gradient(y: &[f64], theta: &ParameterDraw, cfg: &PriorConfig, paths: &StatePaths) -> Result<Vec<f64>> {
    let m = theta.log_s_init.len();
    let dirs: Vec<Direction> = (0..m.saturating_sub(1)).map(Direction::LogSeason).collect();
    directional_derivatives(y, theta, cfg, paths, &dirs)
}

/// Central finite difference of the objective, used as a test oracle.
#[cfg(test)]
pub(crate) fn finite_difference(
    y: &[f64],
    theta: &ParameterDraw,
    cfg: &PriorConfig,
    dir: Direction,
    h: f64,
) -> f64 {
    let eval = |sign: f64| {
        let mut th = theta.clone();
        match dir {
            Direction::Alpha => th.alpha += sign * h,
            Direction::Beta => th.beta += sign * h,
            Direction::Zeta => th.zeta += sign * h,
            Direction::LogSeason(i) => {
                let m = th.log_s_init.len();
                th.log_s_init[i] += sign * h;
                th.log_s_init[m - 1] -= sign * h;
            }
        }
        let p = super::run_recursion(y, &th, cfg).unwrap();
        super::smoothing_objective(&p, th.nu)
    };
    (eval(1.0) - eval(-1.0)) / (2.0 * h)
}
