//! Report emission: a machine JSON file and a wealth-curve CSV per run, plus
//! a combined metrics table across strategies.
//!
//! Machine outputs print every float with 17 significant digits (exact
//! round-trip for f64) and contain nothing run-dependent beyond config and
//! results, so identical configs and data produce byte-identical files
//! regardless of worker count.

use std::io;

use serde::Serialize;

use crate::backtest::BacktestResult;
use crate::config::ConfigEcho;
use crate::error::{Error, Result};
use crate::metrics::{SharpeRatio, WealthCurve};

/// Summary metrics of one run.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryMetrics {
    /// Final accumulated return.
    pub ret: f64,
    pub sharpe: SharpeRatio,
    /// Maximum drawdown in [0, 1].
    pub mdd: f64,
}

/// The machine report for one strategy run.
#[derive(Debug, Clone, Serialize)]
pub struct BacktestReport {
    pub strategy: String,
    pub config: ConfigEcho,
    pub metrics: SummaryMetrics,
    pub non_converged_solves: u64,
    pub assets: Vec<String>,
    pub period_labels: Vec<String>,
    pub wealth: Vec<f64>,
    pub portfolios: Vec<Vec<f64>>,
}

impl BacktestReport {
    pub fn from_result(
        result: &BacktestResult,
        config: ConfigEcho,
        assets: &[String],
        risk_free_rate: f64,
        periods_per_year: f64,
    ) -> BacktestReport {
        BacktestReport {
            strategy: result.strategy.clone(),
            config,
            metrics: SummaryMetrics {
                ret: result.wealth.accumulated_return(),
                sharpe: result.wealth.sharpe_ratio(risk_free_rate, periods_per_year),
                mdd: result.wealth.max_drawdown(),
            },
            non_converged_solves: result.non_converged_solves,
            assets: assets.to_vec(),
            period_labels: result.wealth.period_labels().to_vec(),
            wealth: result.wealth.values().to_vec(),
            portfolios: result
                .portfolios
                .iter()
                .map(|p| p.weights().to_vec())
                .collect(),
        }
    }
}

/// Compact JSON with floats at 17 significant digits.
struct SigDigitFormatter;

impl serde_json::ser::Formatter for SigDigitFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serialize any report structure to the deterministic machine JSON form.
pub fn to_machine_json<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut serializer = serde_json::Serializer::with_formatter(&mut out, SigDigitFormatter);
    value
        .serialize(&mut serializer)
        .map_err(|e| Error::InvalidConfig(format!("report serialization failed: {e}")))?;
    out.push(b'\n');
    String::from_utf8(out).map_err(|_| Error::NonFinite("report encoding"))
}

/// The wealth-curve CSV: header, the initial wealth with an empty label,
/// then one `(period_label, wealth)` row per period.
pub fn wealth_csv(curve: &WealthCurve) -> String {
    let mut out = String::from("period,wealth\n");
    out.push_str(&format!(",{:.16e}\n", curve.values()[0]));
    for (label, value) in curve.period_labels().iter().zip(&curve.values()[1..]) {
        out.push_str(&format!("{label},{value:.16e}\n"));
    }
    out
}

/// One row of the combined metrics table.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub strategy: String,
    pub metrics: SummaryMetrics,
}

/// The combined metrics CSV: one strategy per row, metrics as columns.
pub fn metrics_table_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from("strategy,ret,sharpe,mdd\n");
    for row in rows {
        let sharpe = match row.metrics.sharpe {
            SharpeRatio::Value(v) => format!("{v:.16e}"),
            other => other.to_string(),
        };
        out.push_str(&format!(
            "{},{:.16e},{sharpe},{:.16e}\n",
            row.strategy, row.metrics.ret, row.metrics.mdd
        ));
    }
    out
}

/// Human-readable summary table for standard output.
pub fn human_table(rows: &[MetricsRow]) -> String {
    let label_width = rows
        .iter()
        .map(|r| r.strategy.len())
        .chain([8])
        .max()
        .unwrap();
    let mut out = format!(
        "{:<label_width$} {:>12} {:>10} {:>8}\n",
        "strategy", "RET", "SR", "MDD"
    );
    for row in rows {
        out.push_str(&format!(
            "{:<label_width$} {:>12.4} {:>10} {:>8.4}\n",
            row.strategy,
            row.metrics.ret,
            row.metrics.sharpe.to_string(),
            row.metrics.mdd
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn machine_json_uses_17_significant_digits() {
        #[derive(Serialize)]
        struct Probe {
            x: f64,
        }
        let json = to_machine_json(&Probe { x: 0.1 }).unwrap();
        assert_eq!(json, "{\"x\":1.0000000000000001e-1}\n");
        let reparsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(reparsed["x"].as_f64(), Some(0.1));
    }

    #[test]
    fn sharpe_sentinels_serialize_as_strings() {
        #[derive(Serialize)]
        struct Probe {
            a: SharpeRatio,
            b: SharpeRatio,
            c: SharpeRatio,
        }
        let json = to_machine_json(&Probe {
            a: SharpeRatio::Undefined,
            b: SharpeRatio::NegativeInfinite,
            c: SharpeRatio::Value(1.5),
        })
        .unwrap();
        assert!(json.contains("\"undefined\""), "{json}");
        assert!(json.contains("\"-inf\""), "{json}");
        assert!(json.contains("1.5000000000000000e0"), "{json}");
    }

    #[test]
    fn wealth_csv_layout() {
        let curve =
            WealthCurve::new(vec![1.0, 1.1, 0.99], vec!["d1".into(), "d2".into()]).unwrap();
        let csv = wealth_csv(&curve);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "period,wealth");
        assert_eq!(lines[1], ",1.0000000000000000e0");
        assert!(lines[2].starts_with("d1,1.1"), "{}", lines[2]);
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn metrics_table_mirrors_strategy_rows() {
        let rows = vec![
            MetricsRow {
                strategy: "CORN-K".into(),
                metrics: SummaryMetrics {
                    ret: 0.8,
                    sharpe: SharpeRatio::Value(-0.24),
                    mdd: 0.38,
                },
            },
            MetricsRow {
                strategy: "UCRP".into(),
                metrics: SummaryMetrics {
                    ret: 0.81,
                    sharpe: SharpeRatio::Undefined,
                    mdd: 0.38,
                },
            },
        ];
        let csv = metrics_table_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "strategy,ret,sharpe,mdd");
        assert!(lines[1].starts_with("CORN-K,"), "{}", lines[1]);
        assert!(lines[2].contains("undefined"), "{}", lines[2]);
        let human = human_table(&rows);
        assert!(human.contains("CORN-K"));
        assert!(human.contains("undefined"));
    }
}
