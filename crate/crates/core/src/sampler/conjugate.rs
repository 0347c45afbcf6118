//! Normal likelihood with a normal prior, in the regression form used for
//! the trend coefficients.

use rand::Rng;

use crate::dist::sample_normal;
use crate::error::{Error, Result};

/// Observations `y_i ~ N(c_i s_i + w x_i s_i, sigma2_i)` with prior
/// `w ~ N(0, prior_variance)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateNormalSpec {
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub c: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub prior_variance: f64,
}

impl ConjugateNormalSpec {
    fn validate(&self) -> Result<()> {
        let n = self.y.len();
        if [self.x.len(), self.s.len(), self.c.len(), self.sigma2.len()].iter().any(|&l| l != n) {
            return Err(Error::InvalidParameter("conjugate spec vectors differ in length".into()));
        }
        if self.sigma2.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidParameter("observation variances must be > 0".into()));
        }
        if !(self.prior_variance.is_finite() && self.prior_variance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "prior variance must be > 0, got {}",
                self.prior_variance
            )));
        }
        Ok(())
    }
}

/// Posterior mean and variance of `w`.
pub fn conjugate_normal_posterior(spec: &ConjugateNormalSpec) -> Result<(f64, f64)> {
    spec.validate()?;
    let mut precision = 1.0 / spec.prior_variance;
    let mut score = 0.0;
    for i in 0..spec.y.len() {
        let xs = spec.x[i] * spec.s[i];
        precision += xs * xs / spec.sigma2[i];
        score += xs * (spec.y[i] - spec.c[i] * spec.s[i]) / spec.sigma2[i];
    }
    let variance = 1.0 / precision;
    if !(variance.is_finite() && variance > 0.0) {
        return Err(Error::Numerical(format!("posterior variance {variance} is not positive")));
    }
    let mean = variance * score;
    if !mean.is_finite() {
        return Err(Error::Numerical("posterior mean is not finite".into()));
    }
    Ok((mean, variance))
}

/// Posterior for a coefficient entering the forecasts as `x_i w`, written
/// in terms of the current value `w0` and the residuals `e_i` it produced:
/// `mean = var · Σ (x_i² w0 + x_i e_i) / sigma2_i`.
pub fn conjugate_normal_from_residuals(
    x: &[f64],
    residual: &[f64],
    sigma2: &[f64],
    current: f64,
    prior_variance: f64,
) -> Result<(f64, f64)> {
    if x.len() != residual.len() || x.len() != sigma2.len() {
        return Err(Error::InvalidParameter("conjugate inputs differ in length".into()));
    }
    if !(prior_variance.is_finite() && prior_variance > 0.0) {
        return Err(Error::InvalidParameter(format!("prior variance must be > 0, got {prior_variance}")));
    }
    let mut precision = 1.0 / prior_variance;
    let mut score = 0.0;
    for i in 0..x.len() {
        if !(sigma2[i].is_finite() && sigma2[i] > 0.0) {
            return Err(Error::InvalidParameter("observation variances must be > 0".into()));
        }
        precision += x[i] * x[i] / sigma2[i];
        score += (x[i] * x[i] * current + x[i] * residual[i]) / sigma2[i];
    }
    let variance = 1.0 / precision;
    let mean = variance * score;
    if !(variance.is_finite() && variance > 0.0 && mean.is_finite()) {
        return Err(Error::Numerical("degenerate conjugate posterior".into()));
    }
    Ok((mean, variance))
}

/// Normal draw restricted to `[lo, hi]` by resampling; after `max_tries`
/// misses the last draw is clamped into range. Returns the value and
/// whether clamping happened.
pub fn sample_truncated_normal<R: Rng + ?Sized>(
    rng: &mut R,
    mean: f64,
    variance: f64,
    lo: f64,
    hi: f64,
    max_tries: usize,
) -> Result<(f64, bool)> {
    let mut last = mean;
    for _ in 0..max_tries.max(1) {
        last = sample_normal(rng, mean, variance)?;
        if (lo..=hi).contains(&last) {
            return Ok((last, false));
        }
    }
    Ok((last.clamp(lo, hi), true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::quadrature::{integrate_real_line, Tolerance};
    use crate::dist::RngStream;
    use rand::Rng;

    fn single(y: f64, prior_variance: f64) -> ConjugateNormalSpec {
        ConjugateNormalSpec {
            y: vec![y],
            x: vec![1.0],
            s: vec![1.0],
            c: vec![0.0],
            sigma2: vec![1.0],
            prior_variance,
        }
    }

    #[test]
    fn flat_prior_limit() {
        let (mu, _) = conjugate_normal_posterior(&single(3.7, 1e12)).unwrap();
        assert!((mu - 3.7).abs() < 1e-6);
    }

    #[test]
    fn unit_prior_halves() {
        let (mu, var) = conjugate_normal_posterior(&single(3.0, 1.0)).unwrap();
        assert!((var - 0.5).abs() < 1e-15);
        assert!((mu - 1.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        let mut s = single(1.0, 1.0);
        s.sigma2[0] = 0.0;
        assert!(conjugate_normal_posterior(&s).is_err());
        let s = single(1.0, -1.0);
        assert!(conjugate_normal_posterior(&s).is_err());
    }

    #[test]
    fn matches_quadrature_on_random_spec() {
        let mut rng = RngStream::new(17, 0);
        for _ in 0..5 {
            let n = 6;
            let spec = ConjugateNormalSpec {
                y: (0..n).map(|_| rng.random_range(-3.0..5.0)).collect(),
                x: (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
                s: (0..n).map(|_| rng.random_range(0.5..1.5)).collect(),
                c: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
                sigma2: (0..n).map(|_| rng.random_range(0.2..3.0)).collect(),
                prior_variance: rng.random_range(0.1..4.0),
            };
            let (mu, var) = conjugate_normal_posterior(&spec).unwrap();
            // unnormalised log posterior, shifted by its value at the mode
            let log_post = |w: f64| {
                let mut lp = -0.5 * w * w / spec.prior_variance;
                for i in 0..n {
                    let r = spec.y[i] - (spec.c[i] + w * spec.x[i]) * spec.s[i];
                    lp -= 0.5 * r * r / spec.sigma2[i];
                }
                lp
            };
            let peak = log_post(mu);
            let tol = Tolerance::default();
            let z = integrate_real_line(|w| (log_post(w) - peak).exp(), tol).unwrap().value;
            let m1 = integrate_real_line(|w| w * (log_post(w) - peak).exp(), tol).unwrap().value / z;
            let m2 = integrate_real_line(|w| w * w * (log_post(w) - peak).exp(), tol).unwrap().value / z;
            assert!((m1 - mu).abs() < 1e-6 * mu.abs().max(1.0), "{m1} vs {mu}");
            assert!(((m2 - m1 * m1) - var).abs() < 1e-6 * var, "{} vs {var}", m2 - m1 * m1);
        }
    }

    #[test]
    fn residual_form_equals_standard_form() {
        let x = [0.8, 0.4, 0.2, 0.1];
        let y = [2.0, 1.5, 1.2, 0.9];
        let c = [0.5, 0.6, 0.7, 0.8];
        let sigma2 = [1.0, 0.5, 2.0, 1.5];
        let w0 = 0.37;
        let residual: Vec<f64> = (0..4).map(|i| y[i] - c[i] - x[i] * w0).collect();
        let spec = ConjugateNormalSpec {
            y: y.to_vec(),
            x: x.to_vec(),
            s: vec![1.0; 4],
            c: c.to_vec(),
            sigma2: sigma2.to_vec(),
            prior_variance: 2.0,
        };
        let (m1, v1) = conjugate_normal_posterior(&spec).unwrap();
        let (m2, v2) = conjugate_normal_from_residuals(&x, &residual, &sigma2, w0, 2.0).unwrap();
        assert!((m1 - m2).abs() < 1e-14);
        assert!((v1 - v2).abs() < 1e-14);
    }

    #[test]
    fn truncation_keeps_draws_in_range() {
        let mut rng = RngStream::new(3, 0);
        for _ in 0..1000 {
            let (v, _) = sample_truncated_normal(&mut rng, 0.8, 1.0, -100.0, 1.0, 100).unwrap();
            assert!((-100.0..=1.0).contains(&v));
        }
        let (v, clamped) = sample_truncated_normal(&mut rng, 50.0, 1e-4, -100.0, 1.0, 100).unwrap();
        assert!(clamped);
        assert_eq!(v, 1.0);
    }
}
