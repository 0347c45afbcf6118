//! Point and interval accuracy measures used in forecasting competitions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{ForecastResult, QuantileForecast};

fn same_length(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Metric(format!(
            "series lengths must match and be non-empty ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Symmetric MAPE on the 0..200 scale.
pub fn smape(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    same_length(actual, forecast)?;
    let mut total = 0.0;
    for (y, f) in actual.iter().zip(forecast) {
        let denom = y.abs() + f.abs();
        if denom == 0.0 {
            return Err(Error::Metric("sMAPE undefined when actual and forecast are both zero".into()));
        }
        total += (y - f).abs() / denom;
    }
    Ok(200.0 * total / actual.len() as f64)
}

/// Mean absolute seasonal difference of the in-sample data with lag `s`.
pub fn naive_scale(insample: &[f64], s: usize) -> Result<f64> {
    if s == 0 || insample.len() <= s {
        return Err(Error::Metric(format!(
            "in-sample length {} must exceed the period {s}",
            insample.len()
        )));
    }
    let total: f64 = insample.windows(s + 1).map(|w| (w[s] - w[0]).abs()).sum();
    let scale = total / (insample.len() - s) as f64;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Metric("scaling denominator is zero".into()));
    }
    Ok(scale)
}

pub fn mase(actual: &[f64], forecast: &[f64], insample: &[f64], s: usize) -> Result<f64> {
    same_length(actual, forecast)?;
    let scale = naive_scale(insample, s)?;
    let mae: f64 = actual.iter().zip(forecast).map(|(y, f)| (y - f).abs()).sum::<f64>() / actual.len() as f64;
    Ok(mae / scale)
}

/// Mean scaled interval score for a `(1 - alpha)` interval.
pub fn msis(actual: &[f64], lower: &[f64], upper: &[f64], alpha: f64, insample: &[f64], s: usize) -> Result<f64> {
    same_length(actual, lower)?;
    same_length(actual, upper)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Metric(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if lower.iter().zip(upper).any(|(l, u)| u < l) {
        return Err(Error::Metric("upper bound below lower bound".into()));
    }
    let scale = naive_scale(insample, s)?;
    let penalty = 2.0 / alpha;
    let mut total = 0.0;
    for i in 0..actual.len() {
        let (y, l, u) = (actual[i], lower[i], upper[i]);
        total += u - l;
        if y < l {
            total += penalty * (l - y);
        }
        if y > u {
            total += penalty * (y - u);
        }
    }
    Ok(total / actual.len() as f64 / scale)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageFlags {
    pub level: f64,
    /// Whether each actual fell strictly below the forecast quantile.
    pub below: Vec<bool>,
}

impl CoverageFlags {
    pub fn fraction(&self) -> f64 {
        self.below.iter().filter(|b| **b).count() as f64 / self.below.len() as f64
    }
}

pub fn coverage_flags(actual: &[f64], quantiles: &[QuantileForecast]) -> Result<Vec<CoverageFlags>> {
    if quantiles.is_empty() {
        return Err(Error::Metric("no quantile forecasts supplied".into()));
    }
    quantiles
        .iter()
        .map(|q| {
            same_length(actual, &q.values)?;
            Ok(CoverageFlags {
                level: q.level,
                below: actual.iter().zip(&q.values).map(|(y, v)| y < v).collect(),
            })
        })
        .collect()
}

/// Coverage flags for one level; errors if the level was not forecast.
pub fn coverage_at(flags: &[CoverageFlags], level: f64) -> Result<&CoverageFlags> {
    flags
        .iter()
        .find(|f| (f.level - level).abs() < 1e-12)
        .ok_or_else(|| Error::Metric(format!("no coverage at level {level}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalScore {
    /// Nominal coverage, e.g. 0.9 for the 5%-95% interval.
    pub nominal: f64,
    pub msis: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub category: Option<String>,
    pub smape: f64,
    pub mase: f64,
    pub msis: Vec<IntervalScore>,
    pub coverage: Vec<CoverageFlags>,
    pub point: Vec<f64>,
    pub actual: Vec<f64>,
}

/// Scores a forecast against held-out values. Intervals are formed from
/// every pair of quantile levels `p` and `1 - p` with `p < 0.5`.
pub fn evaluate(
    id: &str,
    category: Option<String>,
    insample: &[f64],
    period: usize,
    actual: &[f64],
    forecast: &ForecastResult,
) -> Result<EvalRecord> {
    let smape = smape(actual, &forecast.point)?;
    let mase = mase(actual, &forecast.point, insample, period)?;
    let mut intervals = Vec::new();
    for q in forecast.quantiles.iter().filter(|q| q.level < 0.5) {
        if let Some(upper) = forecast.quantile(1.0 - q.level) {
            let alpha = 2.0 * q.level;
            intervals.push(IntervalScore {
                nominal: 1.0 - alpha,
                msis: msis(actual, &q.values, upper, alpha, insample, period)?,
            });
        }
    }
    intervals.sort_by(|a, b| a.nominal.total_cmp(&b.nominal));
    Ok(EvalRecord {
        id: id.to_string(),
        category,
        smape,
        mase,
        msis: intervals,
        coverage: coverage_flags(actual, &forecast.quantiles)?,
        point: forecast.point.clone(),
        actual: actual.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{sample_normal, RngStream};
    use proptest::prelude::*;

    #[test]
    fn smape_golden() {
        assert_eq!(smape(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        let v = smape(&[100.0], &[50.0]).unwrap();
        assert!((v - 200.0 * 50.0 / 150.0).abs() < 1e-9);
        assert!((smape(&[50.0], &[100.0]).unwrap() - v).abs() < 1e-9);
        assert!(smape(&[0.0], &[0.0]).is_err());
        assert!(smape(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn mase_golden() {
        let ins = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mase(&[5.0, 6.0], &[5.0, 6.0], &ins, 1).unwrap(), 0.0);
        assert!((mase(&[5.0, 6.0], &[7.0, 8.0], &ins, 1).unwrap() - 2.0).abs() < 1e-9);
        let repeating = [1.0, 2.0, 3.0, 4.0, 1.0, 2.0, 3.0, 4.0];
        assert!(mase(&[1.0], &[2.0], &repeating, 4).is_err());
    }

    #[test]
    fn msis_golden() {
        let ins = [1.0, 2.0, 3.0, 4.0];
        let v = msis(&[12.0], &[0.0], &[10.0], 0.1, &ins, 1).unwrap();
        assert!((v - 50.0).abs() < 1e-9);
        let inside = msis(&[2.0, 3.0], &[1.0, 0.0], &[4.0, 7.0], 0.1, &ins, 1).unwrap();
        assert!((inside - 5.0).abs() < 1e-9);
        let wider = msis(&[2.0, 3.0], &[0.5, 0.0], &[4.0, 7.0], 0.1, &ins, 1).unwrap();
        assert!(wider > inside);
        let below = msis(&[-1.0], &[0.0], &[10.0], 0.02, &ins, 1).unwrap();
        assert!((below - (10.0 + 100.0)).abs() < 1e-9);
        assert!(msis(&[1.0], &[2.0], &[1.0], 0.1, &ins, 1).is_err());
        assert!(msis(&[1.0], &[0.0], &[2.0], 0.1, &[3.0, 3.0], 1).is_err());
    }

    #[test]
    fn coverage_golden() {
        let q = vec![
            QuantileForecast { level: 0.5, values: vec![10.0, 20.0] },
            QuantileForecast { level: 0.99, values: vec![12.0, 25.0] },
        ];
        let eps = 1e-9;
        let flags = coverage_flags(&[10.0 - eps, 20.0 - eps], &q).unwrap();
        assert_eq!(coverage_at(&flags, 0.99).unwrap().fraction(), 1.0);
        assert_eq!(coverage_at(&flags, 0.5).unwrap().fraction(), 1.0);
        assert!(coverage_flags(&[1.0], &[]).is_err());
        assert!(coverage_at(&flags, 0.05).is_err());
    }

    #[test]
    fn calibrated_coverage() {
        let mut rng = RngStream::new(42, 0);
        let n = 10_000;
        let z95 = 1.6448536269514722;
        let actual: Vec<f64> = (0..n).map(|_| sample_normal(&mut rng, 0.0, 1.0).unwrap()).collect();
        let q = vec![QuantileForecast { level: 0.95, values: vec![z95; n] }];
        let frac = coverage_flags(&actual, &q).unwrap()[0].fraction();
        assert!((frac - 0.95).abs() < 0.02, "{frac}");
    }

    proptest! {
        #[test]
        fn smape_symmetric(a in proptest::collection::vec(0.1f64..1e4, 1..10), b in proptest::collection::vec(0.1f64..1e4, 1..10)) {
            let n = a.len().min(b.len());
            let (a, b) = (&a[..n], &b[..n]);
            let x = smape(a, b).unwrap();
            prop_assert_eq!(x, smape(b, a).unwrap());
            prop_assert!((0.0..=200.0).contains(&x));
        }

        #[test]
        fn mase_scale_invariant(k in 0.01f64..100.0, shift in 0.5f64..3.0) {
            let ins = [1.0, 2.5, 2.0, 4.0, 3.5];
            let act = [5.0, 6.0, 4.0];
            let fc = [5.0 + shift, 6.0 - shift, 4.5];
            let base = mase(&act, &fc, &ins, 1).unwrap();
            let scaled = |v: &[f64]| v.iter().map(|x| x * k).collect::<Vec<_>>();
            let other = mase(&scaled(&act), &scaled(&fc), &scaled(&ins), 1).unwrap();
            prop_assert!((base - other).abs() < 1e-9 * base.max(1.0));
        }

        #[test]
        fn msis_penalty_is_two_over_alpha(alpha in 0.01f64..0.5, miss in 0.1f64..10.0) {
            let ins = [1.0, 2.0, 3.0, 4.0];
            let v = msis(&[10.0 + miss], &[0.0], &[10.0], alpha, &ins, 1).unwrap();
            prop_assert!((v - (10.0 + 2.0 / alpha * miss)).abs() < 1e-9 * v);
        }
    }
}
