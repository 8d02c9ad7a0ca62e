//! Backtest summary metrics: accumulated return, Sharpe ratio, maximum
//! drawdown.

use serde::ser::Serializer;
use serde::Serialize;

use crate::error::{Error, Result};

/// A wealth curve: `values[0] = 1`, and `values[t+1] / values[t]` is the
/// portfolio's growth factor over the period labeled `period_labels[t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthCurve {
    values: Vec<f64>,
    period_labels: Vec<String>,
}

impl WealthCurve {
    pub fn new(values: Vec<f64>, period_labels: Vec<String>) -> Result<Self> {
        if values.len() != period_labels.len() + 1 {
            return Err(Error::InvalidSeries(format!(
                "wealth curve has {} values for {} period labels (expected labels + 1)",
                values.len(),
                period_labels.len()
            )));
        }
        if values.first() != Some(&1.0) {
            return Err(Error::InvalidSeries(
                "wealth curve must start at 1".into(),
            ));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidSeries(
                "wealth curve must stay positive and finite".into(),
            ));
        }
        Ok(Self {
            values,
            period_labels,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn period_labels(&self) -> &[String] {
        &self.period_labels
    }

    /// Final accumulated return (final wealth from initial wealth 1).
    pub fn accumulated_return(&self) -> f64 {
        *self.values.last().expect("curve is never empty")
    }

    pub fn max_drawdown(&self) -> f64 {
        max_drawdown(&self.values)
    }

    pub fn sharpe_ratio(&self, risk_free_rate: f64, periods_per_year: f64) -> SharpeRatio {
        sharpe_ratio(&self.values, risk_free_rate, periods_per_year)
    }
}

/// Largest peak-to-trough relative decline:
/// `max over t of 1 - values[t] / max_{s<=t} values[s]`.
pub fn max_drawdown(values: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut worst = 0.0f64;
    for &v in values {
        peak = peak.max(v);
        worst = worst.max(1.0 - v / peak);
    }
    worst
}

/// Sharpe ratio, or the sentinel for the degenerate zero-deviation cases.
///
/// Zero return deviation makes the ratio non-finite: the sign of the mean
/// excess return picks the infinity, and a zero mean excess on top of zero
/// deviation is reported as undefined (the 0/0 case).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SharpeRatio {
    Value(f64),
    PositiveInfinite,
    NegativeInfinite,
    Undefined,
}

impl SharpeRatio {
    pub fn as_f64(&self) -> f64 {
        match self {
            SharpeRatio::Value(v) => *v,
            SharpeRatio::PositiveInfinite => f64::INFINITY,
            SharpeRatio::NegativeInfinite => f64::NEG_INFINITY,
            SharpeRatio::Undefined => f64::NAN,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, SharpeRatio::Value(_))
    }
}

impl std::fmt::Display for SharpeRatio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SharpeRatio::Value(v) => write!(f, "{v:.4}"),
            SharpeRatio::PositiveInfinite => f.write_str("+inf"),
            SharpeRatio::NegativeInfinite => f.write_str("-inf"),
            SharpeRatio::Undefined => f.write_str("undefined"),
        }
    }
}

impl Serialize for SharpeRatio {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SharpeRatio::Value(v) => serializer.serialize_f64(*v),
            SharpeRatio::PositiveInfinite => serializer.serialize_str("+inf"),
            SharpeRatio::NegativeInfinite => serializer.serialize_str("-inf"),
            SharpeRatio::Undefined => serializer.serialize_str("undefined"),
        }
    }
}

/// Annualized Sharpe ratio over a wealth curve.
///
/// Per-period simple returns `r_t = values[t] / values[t-1] - 1` against the
/// per-period risk-free rate `risk_free_rate / periods_per_year`, scaled by
/// `sqrt(periods_per_year)`. Sample (n-1) standard deviation.
pub fn sharpe_ratio(values: &[f64], risk_free_rate: f64, periods_per_year: f64) -> SharpeRatio {
    let returns: Vec<f64> = values.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
    if returns.len() < 2 {
        return SharpeRatio::Undefined;
    }
    let n = returns.len() as f64;
    let per_period_rf = risk_free_rate / periods_per_year;
    let mean = returns.iter().sum::<f64>() / n;
    let mean_excess = mean - per_period_rf;
    let sample_var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0);
    let std = sample_var.sqrt();
    if std == 0.0 {
        return match mean_excess.partial_cmp(&0.0) {
            Some(std::cmp::Ordering::Greater) => SharpeRatio::PositiveInfinite,
            Some(std::cmp::Ordering::Less) => SharpeRatio::NegativeInfinite,
            _ => SharpeRatio::Undefined,
        };
    }
    SharpeRatio::Value(mean_excess / std * periods_per_year.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mdd_monotone_curve_is_zero() {
        assert_eq!(max_drawdown(&[1.0, 1.0, 1.5, 2.0, 2.0]), 0.0);
    }

    #[test]
    fn mdd_hand_fixtures() {
        assert_eq!(max_drawdown(&[1.0, 2.0, 1.0, 3.0]), 0.5);
        assert_eq!(max_drawdown(&[1.0, 0.5, 0.75, 0.25]), 0.75);
    }

    #[test]
    fn sharpe_constant_curve_is_undefined() {
        assert_eq!(
            sharpe_ratio(&[1.0, 1.0, 1.0, 1.0], 0.0, 252.0),
            SharpeRatio::Undefined
        );
    }

    #[test]
    fn sharpe_zero_deviation_with_nonzero_excess_is_signed_infinity() {
        // Exactly equal per-period returns (representable without rounding)
        // give zero variance and a nonzero mean excess.
        let up = [1.0, 2.0, 4.0, 8.0];
        let sr = sharpe_ratio(&up, 0.0, 252.0);
        assert_eq!(sr, SharpeRatio::PositiveInfinite);
        assert!(!sr.is_finite());
        let down = [1.0, 0.5, 0.25, 0.125];
        assert_eq!(
            sharpe_ratio(&down, 0.0, 252.0),
            SharpeRatio::NegativeInfinite
        );
    }

    /// Spreadsheet-style hand calc recorded before the implementation:
    /// returns (0.02, -0.01, 0.01), rf 0, 252 periods/year
    /// -> mean/std*sqrt(252) = 6.92820323027551.
    #[test]
    fn sharpe_hand_fixture() {
        let curve = [1.0, 1.02, 1.0098, 1.019898];
        match sharpe_ratio(&curve, 0.0, 252.0) {
            SharpeRatio::Value(v) => assert!((v - 6.92820323027551).abs() < 1e-9, "{v}"),
            other => panic!("expected a finite ratio, got {other:?}"),
        }
    }

    #[test]
    fn wealth_curve_shape_is_validated() {
        assert!(WealthCurve::new(vec![1.0, 1.1], vec!["a".into()]).is_ok());
        assert!(WealthCurve::new(vec![1.1, 1.0], vec!["a".into()]).is_err());
        assert!(WealthCurve::new(vec![1.0, 0.0], vec!["a".into()]).is_err());
        assert!(WealthCurve::new(vec![1.0], vec!["a".into()]).is_err());
    }

    #[test]
    fn display_forms() {
        assert_eq!(SharpeRatio::Undefined.to_string(), "undefined");
        assert_eq!(SharpeRatio::PositiveInfinite.to_string(), "+inf");
        assert_eq!(format!("{}", SharpeRatio::Value(1.23456)), "1.2346");
    }

    proptest! {
        #[test]
        fn mdd_scale_invariant_and_bounded(
            steps in proptest::collection::vec(0.5f64..1.5, 1..40),
            scale in 0.001f64..1000.0,
        ) {
            let mut values = vec![1.0];
            for s in steps {
                let next = values.last().unwrap() * s;
                values.push(next);
            }
            let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
            let a = max_drawdown(&values);
            let b = max_drawdown(&scaled);
            prop_assert!((a - b).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
            // zero drawdown iff nondecreasing
            let nondecreasing = values.windows(2).all(|w| w[1] >= w[0]);
            prop_assert_eq!(a == 0.0, nondecreasing);
        }
    }
}
