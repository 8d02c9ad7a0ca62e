//! Pattern-matching portfolio selection and backtesting.
//!
//! Implements the CORN-K family of correlation-driven strategies: the plain
//! log-optimal form, the risk-aversion variant RACORN-K that penalizes the
//! standard deviation of the portfolio's log returns over the matched
//! periods, and the conservative variant RACORN(C)-K that resolves the
//! risk-aversion grid inside each `(window, threshold)` expert. A sequential
//! backtest engine, the UBAH / UCRP / EG baselines, and summary metrics
//! (accumulated return, Sharpe ratio, maximum drawdown) round out the
//! library; the `racorn` binary drives it from the command line.

pub mod backtest;
pub mod config;
pub mod csv;
pub mod ensemble;
pub mod error;
pub mod market;
pub mod matching;
pub mod metrics;
pub mod opt;
pub mod report;

pub use backtest::{run, BacktestResult, Strategy};
pub use config::{RunConfig, StrategyChoice};
pub use csv::InputMode;
pub use ensemble::{CornEnsemble, EnsembleConfig, StrategyKind};
pub use error::{Error, Result};
pub use market::{derive_relatives, MarketWindow, PriceRelativeSeries, PriceSeries};
pub use matching::{find_matches, pearson, MatchSet};
pub use opt::{grid_oracle, optimize, Objective, Portfolio, SolverOptions};

use backtest::{ExponentiatedGradient, UniformBuyAndHold, UniformCrp};

/// Build the strategy a run configuration names.
pub fn make_strategy(choice: StrategyChoice, config: &RunConfig, num_assets: usize) -> Result<Box<dyn Strategy>> {
    Ok(match choice {
        StrategyChoice::Ensemble(kind) => Box::new(CornEnsemble::new(
            config.ensemble_config(kind),
            num_assets,
        )?),
        StrategyChoice::Ubah => Box::new(UniformBuyAndHold::new()),
        StrategyChoice::Ucrp => Box::new(UniformCrp::new()),
        StrategyChoice::Eg => Box::new(ExponentiatedGradient::new(config.eg_eta)),
    })
}
