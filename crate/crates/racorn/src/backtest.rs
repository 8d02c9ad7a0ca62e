//! Sequential backtest replay and the naive / follow-the-winner baselines.
//!
//! The engine enforces the trading protocol: at each period the strategy is
//! asked for a portfolio before the period's price relatives are revealed,
//! then wealth is updated and the strategy observes the revealed row.

use crate::error::{Error, Result};
use crate::market::PriceRelativeSeries;
use crate::metrics::WealthCurve;
use crate::opt::Portfolio;

/// A sequential trading strategy. `portfolio` may only read rows strictly
/// before `t`; `observe` is called after the period-`t` portfolio is fixed.
pub trait Strategy {
    fn name(&self) -> &str;

    fn portfolio(&mut self, series: &PriceRelativeSeries, t: usize) -> Result<Portfolio>;

    fn observe(&mut self, series: &PriceRelativeSeries, t: usize) -> Result<()>;

    /// Number of optimizer calls that hit the iteration cap so far.
    fn non_converged_solves(&self) -> u64 {
        0
    }
}

/// Everything a replay produces before metrics are attached.
#[derive(Debug, Clone)]
pub struct BacktestResult {
    pub strategy: String,
    pub wealth: WealthCurve,
    pub portfolios: Vec<Portfolio>,
    pub non_converged_solves: u64,
}

/// Replay `strategy` over the whole series, compounding wealth from 1.
pub fn run(series: &PriceRelativeSeries, strategy: &mut dyn Strategy) -> Result<BacktestResult> {
    let n = series.num_periods();
    if n < 2 {
        return Err(Error::InvalidSeries(format!(
            "backtest needs at least 2 periods, got {n}"
        )));
    }
    let m = series.num_assets();
    let mut wealth = Vec::with_capacity(n + 1);
    wealth.push(1.0);
    let mut portfolios = Vec::with_capacity(n);
    for t in 0..n {
        let portfolio = strategy.portfolio(series, t)?;
        if portfolio.num_assets() != m {
            return Err(Error::Backtest {
                period: t,
                message: format!(
                    "strategy produced {} weights for {m} assets",
                    portfolio.num_assets()
                ),
            });
        }
        let growth = portfolio.period_return(series.row(t));
        let next = wealth.last().unwrap() * growth;
        if !(next.is_finite() && next > 0.0) {
            return Err(Error::Backtest {
                period: t,
                message: format!("wealth became {next}"),
            });
        }
        wealth.push(next);
        portfolios.push(portfolio);
        strategy.observe(series, t)?;
    }
    Ok(BacktestResult {
        strategy: strategy.name().to_string(),
        wealth: WealthCurve::new(wealth, series.period_labels().to_vec())?,
        portfolios,
        non_converged_solves: strategy.non_converged_solves(),
    })
}

/// Uniform buy-and-hold: buy 1/m of wealth per asset at the start and never
/// rebalance; the held weights drift with prices.
#[derive(Debug, Default)]
pub struct UniformBuyAndHold {
    current: Option<Vec<f64>>,
}

impl UniformBuyAndHold {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Strategy for UniformBuyAndHold {
    fn name(&self) -> &str {
        "UBAH"
    }

    fn portfolio(&mut self, series: &PriceRelativeSeries, _t: usize) -> Result<Portfolio> {
        let m = series.num_assets();
        match &self.current {
            None => Ok(Portfolio::uniform(m)),
            Some(w) => Portfolio::new(w.clone()),
        }
    }

    fn observe(&mut self, series: &PriceRelativeSeries, t: usize) -> Result<()> {
        let m = series.num_assets();
        let row = series.row(t);
        let held = self
            .current
            .take()
            .unwrap_or_else(|| vec![1.0 / m as f64; m]);
        let grown: Vec<f64> = held.iter().zip(row).map(|(w, x)| w * x).collect();
        let total: f64 = grown.iter().sum();
        self.current = Some(grown.into_iter().map(|w| w / total).collect());
        Ok(())
    }
}

/// Uniform constant rebalanced portfolio: 1/m per asset, every period.
#[derive(Debug, Default)]
pub struct UniformCrp;

impl UniformCrp {
    pub fn new() -> Self {
        Self
    }
}

impl Strategy for UniformCrp {
    fn name(&self) -> &str {
        "UCRP"
    }

    fn portfolio(&mut self, series: &PriceRelativeSeries, _t: usize) -> Result<Portfolio> {
        Ok(Portfolio::uniform(series.num_assets()))
    }

    fn observe(&mut self, _series: &PriceRelativeSeries, _t: usize) -> Result<()> {
        Ok(())
    }
}

/// Exponentiated-gradient follow-the-winner: multiplicative update
/// `b_i <- b_i * exp(eta * x_i / (b . x))`, renormalized.
#[derive(Debug)]
pub struct ExponentiatedGradient {
    learning_rate: f64,
    current: Option<Vec<f64>>,
}

impl ExponentiatedGradient {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            current: None,
        }
    }
}

impl Strategy for ExponentiatedGradient {
    fn name(&self) -> &str {
        "EG"
    }

    fn portfolio(&mut self, series: &PriceRelativeSeries, _t: usize) -> Result<Portfolio> {
        let m = series.num_assets();
        match &self.current {
            None => Ok(Portfolio::uniform(m)),
            Some(w) => Portfolio::new(w.clone()),
        }
    }

    fn observe(&mut self, series: &PriceRelativeSeries, t: usize) -> Result<()> {
        let m = series.num_assets();
        let row = series.row(t);
        let held = self
            .current
            .take()
            .unwrap_or_else(|| vec![1.0 / m as f64; m]);
        let growth: f64 = held.iter().zip(row).map(|(w, x)| w * x).sum();
        let updated: Vec<f64> = held
            .iter()
            .zip(row)
            .map(|(w, x)| w * (self.learning_rate * x / growth).exp())
            .collect();
        let total: f64 = updated.iter().sum();
        self.current = Some(updated.into_iter().map(|w| w / total).collect());
        Ok(())
    }
}
