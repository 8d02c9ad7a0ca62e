//! Expert grids, wealth-weighted top-k ensembles, and the three
//! pattern-matching strategies built from them.
//!
//! An expert is one `(width, threshold[, risk_aversion])` parameter setting.
//! Each period every expert produces its own portfolio (uniform while in
//! warmup or when its match set is empty, otherwise the solver's optimum over
//! the matched rows), and the master portfolio is the wealth-weighted average
//! of the top fraction of experts by accumulated return.
//!
//! The conservative variant keeps one outer expert per `(width, threshold)`
//! and resolves the risk-aversion grid inside it each period, weighting the
//! per-lambda portfolios by (an approximation of) their instant return on
//! the matched rows.

use rayon::prelude::*;

use crate::backtest::Strategy;
use crate::error::{Error, Result};
use crate::market::PriceRelativeSeries;
use crate::matching::window_correlations;
use crate::opt::{optimize, Objective, Portfolio, SolverOptions};

/// One expert's parameter setting.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertSpec {
    /// Market-window width, at least 1.
    pub width: usize,
    /// Correlation threshold in `[0, 1)`.
    pub threshold: f64,
    /// Risk-aversion coefficient, zero for plain experts.
    pub risk_aversion: f64,
}

impl ExpertSpec {
    fn validate(&self) -> Result<()> {
        if self.width < 1 {
            return Err(Error::InvalidConfig("window width must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.threshold) {
            return Err(Error::InvalidConfig(format!(
                "correlation threshold must be in [0, 1), got {}",
                self.threshold
            )));
        }
        if !(self.risk_aversion.is_finite() && self.risk_aversion >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "risk aversion must be >= 0, got {}",
                self.risk_aversion
            )));
        }
        Ok(())
    }

    /// Lexicographic `(width, threshold, risk_aversion)` order, the
    /// deterministic tie-break for equal wealths.
    fn lex_key(&self) -> (usize, f64, f64) {
        (self.width, self.threshold, self.risk_aversion)
    }
}

/// An expert and its running accumulated return.
#[derive(Debug, Clone)]
pub struct ExpertState {
    pub spec: ExpertSpec,
    /// Accumulated return, starts at 1 and stays positive.
    pub wealth: f64,
    /// The portfolio held for the most recent period.
    pub last_portfolio: Portfolio,
}

impl ExpertState {
    pub fn new(spec: ExpertSpec, num_assets: usize) -> ExpertState {
        ExpertState {
            spec,
            wealth: 1.0,
            last_portfolio: Portfolio::uniform(num_assets),
        }
    }

    /// Compound this expert's wealth with the revealed price relatives.
    pub fn update_wealth(&mut self, relatives: &[f64]) {
        self.wealth *= self.last_portfolio.period_return(relatives);
        debug_assert!(self.wealth > 0.0);
    }
}

/// Which strategy the ensemble runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    CornK,
    RacornK,
    RacornCK,
}

impl StrategyKind {
    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::CornK => "CORN-K",
            StrategyKind::RacornK => "RACORN-K",
            StrategyKind::RacornCK => "RACORN-C-K",
        }
    }
}

/// How the conservative variant weights its per-lambda portfolios: by the
/// exponential of the summed matched log returns (the default), or of their
/// mean (the geometric-average form).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerWeighting {
    Unnormalized,
    Normalized,
}

impl InnerWeighting {
    pub fn parse(s: &str) -> Result<InnerWeighting> {
        match s.to_ascii_lowercase().as_str() {
            "unnormalized" => Ok(InnerWeighting::Unnormalized),
            "normalized" => Ok(InnerWeighting::Normalized),
            other => Err(Error::InvalidConfig(format!(
                "unknown inner weighting `{other}` (expected `unnormalized` or `normalized`)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            InnerWeighting::Unnormalized => "unnormalized",
            InnerWeighting::Normalized => "normalized",
        }
    }
}

/// Grids and knobs for one ensemble strategy.
#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub strategy: StrategyKind,
    pub window_grid: Vec<usize>,
    pub threshold_grid: Vec<f64>,
    /// Ignored by CORN-K (its experts all use zero risk aversion).
    pub lambda_grid: Vec<f64>,
    /// Fraction of experts kept in the ensemble, in `(0, 1]`.
    pub top_fraction: f64,
    pub inner_weighting: InnerWeighting,
    pub solver: SolverOptions,
}

impl EnsembleConfig {
    /// The published defaults: widths 1..=5, thresholds 0.0..=0.9 step 0.1,
    /// top 10% of experts, and a per-strategy risk-aversion grid (0..=0.03
    /// step 0.01 for the flat grid, 0..=0.1 step 0.01 for the conservative
    /// variant, unused for CORN-K).
    pub fn defaults(strategy: StrategyKind) -> EnsembleConfig {
        let lambda_grid = match strategy {
            StrategyKind::CornK => vec![0.0],
            StrategyKind::RacornK => (0..=3).map(|k| k as f64 * 0.01).collect(),
            StrategyKind::RacornCK => (0..=10).map(|k| k as f64 * 0.01).collect(),
        };
        EnsembleConfig {
            strategy,
            window_grid: (1..=5).collect(),
            threshold_grid: (0..=9).map(|k| k as f64 * 0.1).collect(),
            lambda_grid,
            top_fraction: 0.10,
            inner_weighting: InnerWeighting::Unnormalized,
            solver: SolverOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_grid.is_empty()
            || self.threshold_grid.is_empty()
            || self.lambda_grid.is_empty()
        {
            return Err(Error::InvalidConfig("parameter grids must be non-empty".into()));
        }
        if !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "top fraction must be in (0, 1], got {}",
                self.top_fraction
            )));
        }
        for &w in &self.window_grid {
            ExpertSpec {
                width: w,
                threshold: 0.0,
                risk_aversion: 0.0,
            }
            .validate()?;
        }
        for &rho in &self.threshold_grid {
            ExpertSpec {
                width: 1,
                threshold: rho,
                risk_aversion: 0.0,
            }
            .validate()?;
        }
        for &lambda in &self.lambda_grid {
            ExpertSpec {
                width: 1,
                threshold: 0.0,
                risk_aversion: lambda,
            }
            .validate()?;
        }
        Ok(())
    }

    /// Expert count: widths x thresholds for CORN-K and the conservative
    /// variant's outer layer, times the risk grid for the flat grid.
    pub fn expert_count(&self) -> usize {
        let base = self.window_grid.len() * self.threshold_grid.len();
        match self.strategy {
            StrategyKind::CornK | StrategyKind::RacornCK => base,
            StrategyKind::RacornK => base * self.lambda_grid.len(),
        }
    }
}

/// What one expert did for a period.
#[derive(Debug, Clone, PartialEq)]
pub enum ExpertDecision {
    /// The window does not fit in the history yet; trades uniform.
    Warmup,
    /// The match set was empty; trades uniform.
    NoMatch,
    /// Solved over the matched rows.
    Optimized { converged: bool, matches: usize },
}

/// One expert's portfolio for period `t`: uniform during warmup or when no
/// period matches, otherwise the solver's optimum over the matched rows with
/// the expert's risk aversion.
pub fn expert_portfolio(
    series: &PriceRelativeSeries,
    t: usize,
    spec: &ExpertSpec,
    solver: &SolverOptions,
) -> Result<(Portfolio, ExpertDecision)> {
    spec.validate()?;
    let m = series.num_assets();
    if t < spec.width {
        return Ok((Portfolio::uniform(m), ExpertDecision::Warmup));
    }
    let matches = crate::matching::find_matches(series, t, spec.width, spec.threshold)?;
    if matches.is_empty() {
        return Ok((Portfolio::uniform(m), ExpertDecision::NoMatch));
    }
    let rows = matches.rows(series);
    let objective = Objective::from_rows(&rows, spec.risk_aversion)?;
    let solve = optimize(&objective, solver)?;
    Ok((
        solve.portfolio,
        ExpertDecision::Optimized {
            converged: solve.converged,
            matches: matches.len(),
        },
    ))
}

/// Wealth-weighted average of the top experts' portfolios.
///
/// Selects the `ceil(top_fraction * N)` experts (at least one) with the
/// largest accumulated return, ties broken by lexicographic
/// `(width, threshold, risk_aversion)`; the combination weight of each
/// selected expert is its accumulated return. A convex combination of
/// simplex points, hence on the simplex.
pub fn topk_combine(
    experts: &[ExpertState],
    portfolios: &[Portfolio],
    top_fraction: f64,
) -> Result<Portfolio> {
    if experts.is_empty() {
        return Err(Error::EmptyExperts);
    }
    assert_eq!(experts.len(), portfolios.len());
    let k = ((top_fraction * experts.len() as f64).ceil() as usize)
        .clamp(1, experts.len());

    let mut order: Vec<usize> = (0..experts.len()).collect();
    order.sort_by(|&a, &b| {
        experts[b]
            .wealth
            .total_cmp(&experts[a].wealth)
            .then_with(|| {
                let ka = experts[a].spec.lex_key();
                let kb = experts[b].spec.lex_key();
                ka.0.cmp(&kb.0)
                    .then(ka.1.total_cmp(&kb.1))
                    .then(ka.2.total_cmp(&kb.2))
            })
    });
    let mut selected: Vec<usize> = order[..k].to_vec();
    // Reduce in expert-grid order for a deterministic summation order.
    selected.sort_unstable();

    let m = portfolios[0].num_assets();
    let mut combined = vec![0.0; m];
    let mut total = 0.0;
    for &i in &selected {
        let s = experts[i].wealth;
        total += s;
        for (acc, w) in combined.iter_mut().zip(portfolios[i].weights()) {
            *acc += s * w;
        }
    }
    debug_assert!(total > 0.0);
    for w in &mut combined {
        *w /= total;
    }
    Portfolio::new(combined)
}

/// Combine per-lambda portfolios for one `(width, threshold)` setting by
/// their approximated instant return on the matched rows.
///
/// Each lambda's weight is the exponential of the summed (default) or mean
/// (normalized) log return of its portfolio over the matched rows. Exponents
/// are shifted by their maximum before exponentiation; the combination is
/// scale-invariant, and the shift keeps the weights finite for large match
/// sets. Weights are strictly positive, so the denominator never vanishes.
fn combine_by_instant_return(
    portfolios: &[Portfolio],
    match_rows: &[&[f64]],
    weighting: InnerWeighting,
) -> Result<Portfolio> {
    assert!(!portfolios.is_empty());
    let exponents: Vec<f64> = portfolios
        .iter()
        .map(|p| {
            let sum: f64 = match_rows
                .iter()
                .map(|row| p.period_return(row).ln())
                .sum();
            match weighting {
                InnerWeighting::Unnormalized => sum,
                InnerWeighting::Normalized => sum / match_rows.len() as f64,
            }
        })
        .collect();
    let shift = exponents
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = exponents.iter().map(|e| (e - shift).exp()).collect();
    let total: f64 = weights.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::NonFinite("inner ensemble weights"));
    }

    let m = portfolios[0].num_assets();
    let mut combined = vec![0.0; m];
    for (s, p) in weights.iter().zip(portfolios) {
        for (acc, w) in combined.iter_mut().zip(p.weights()) {
            *acc += s * w;
        }
    }
    for w in &mut combined {
        *w /= total;
    }
    Portfolio::new(combined)
}

struct InnerOutcome {
    portfolio: Portfolio,
    non_converged: u64,
}

/// The conservative variant's per-`(width, threshold)` portfolio given the
/// already-matched rows.
fn inner_portfolio_from_rows(
    match_rows: &[&[f64]],
    num_assets: usize,
    lambda_grid: &[f64],
    weighting: InnerWeighting,
    solver: &SolverOptions,
) -> Result<InnerOutcome> {
    if match_rows.is_empty() {
        // Every lambda would trade uniform, and so does their combination.
        return Ok(InnerOutcome {
            portfolio: Portfolio::uniform(num_assets),
            non_converged: 0,
        });
    }
    let mut per_lambda = Vec::with_capacity(lambda_grid.len());
    let mut non_converged = 0;
    for &lambda in lambda_grid {
        let objective = Objective::from_rows(match_rows, lambda)?;
        let solve = optimize(&objective, solver)?;
        if !solve.converged {
            non_converged += 1;
        }
        per_lambda.push(solve.portfolio);
    }
    let portfolio = combine_by_instant_return(&per_lambda, match_rows, weighting)?;
    Ok(InnerOutcome {
        portfolio,
        non_converged,
    })
}

/// The conservative variant's portfolio for one `(width, threshold)` setting
/// at period `t`: solve once per risk-aversion value over the shared match
/// set, then average the solutions weighted by their approximated instant
/// return. Uniform when the match set is empty or the window does not fit.
pub fn racorn_c_inner(
    series: &PriceRelativeSeries,
    t: usize,
    width: usize,
    threshold: f64,
    lambda_grid: &[f64],
    weighting: InnerWeighting,
    solver: &SolverOptions,
) -> Result<Portfolio> {
    let m = series.num_assets();
    if lambda_grid.is_empty() {
        return Err(Error::InvalidConfig("empty risk-aversion grid".into()));
    }
    if t < width {
        return Ok(Portfolio::uniform(m));
    }
    let matches = crate::matching::find_matches(series, t, width, threshold)?;
    let rows = matches.rows(series);
    Ok(inner_portfolio_from_rows(&rows, m, lambda_grid, weighting, solver)?.portfolio)
}

/// The CORN-K / RACORN-K / RACORN(C)-K master strategy: an expert grid with
/// top-k wealth-weighted combination.
pub struct CornEnsemble {
    config: EnsembleConfig,
    experts: Vec<ExpertState>,
    num_assets: usize,
    non_converged: u64,
}

impl CornEnsemble {
    pub fn new(config: EnsembleConfig, num_assets: usize) -> Result<CornEnsemble> {
        config.validate()?;
        if num_assets == 0 {
            return Err(Error::InvalidConfig("no assets".into()));
        }
        let mut experts = Vec::new();
        match config.strategy {
            StrategyKind::CornK | StrategyKind::RacornCK => {
                for &width in &config.window_grid {
                    for &threshold in &config.threshold_grid {
                        experts.push(ExpertState::new(
                            ExpertSpec {
                                width,
                                threshold,
                                risk_aversion: 0.0,
                            },
                            num_assets,
                        ));
                    }
                }
            }
            StrategyKind::RacornK => {
                for &width in &config.window_grid {
                    for &threshold in &config.threshold_grid {
                        for &risk_aversion in &config.lambda_grid {
                            experts.push(ExpertState::new(
                                ExpertSpec {
                                    width,
                                    threshold,
                                    risk_aversion,
                                },
                                num_assets,
                            ));
                        }
                    }
                }
            }
        }
        assert_eq!(experts.len(), config.expert_count());
        Ok(CornEnsemble {
            config,
            experts,
            num_assets,
            non_converged: 0,
        })
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn experts(&self) -> &[ExpertState] {
        &self.experts
    }

    /// Match sets for every `(width, threshold)` pair at period `t`, computed
    /// from one correlation pass per width. Identical to calling
    /// `find_matches` per pair: the same window correlations are filtered by
    /// each threshold.
    fn match_indices(&self, series: &PriceRelativeSeries, t: usize) -> Result<Vec<Vec<usize>>> {
        let mut per_pair = Vec::with_capacity(
            self.config.window_grid.len() * self.config.threshold_grid.len(),
        );
        for &width in &self.config.window_grid {
            let correlations = if t >= width {
                Some(window_correlations(series, t, width)?)
            } else {
                None
            };
            for &threshold in &self.config.threshold_grid {
                let indices = match &correlations {
                    None => Vec::new(),
                    Some(cs) => cs
                        .iter()
                        .filter(|&&(_, c)| c > threshold)
                        .map(|&(j, _)| j)
                        .collect(),
                };
                per_pair.push(indices);
            }
        }
        Ok(per_pair)
    }

    fn expert_portfolios(
        &self,
        series: &PriceRelativeSeries,
        t: usize,
    ) -> Result<(Vec<Portfolio>, u64)> {
        let per_pair = self.match_indices(series, t)?;
        let solver = &self.config.solver;
        let m = self.num_assets;

        match self.config.strategy {
            StrategyKind::CornK | StrategyKind::RacornK => {
                let pair_of = |expert_index: usize| match self.config.strategy {
                    StrategyKind::RacornK => expert_index / self.config.lambda_grid.len(),
                    _ => expert_index,
                };
                let outcomes: Vec<Result<(Portfolio, u64)>> = self
                    .experts
                    .par_iter()
                    .enumerate()
                    .map(|(i, expert)| {
                        let indices = &per_pair[pair_of(i)];
                        if t < expert.spec.width || indices.is_empty() {
                            return Ok((Portfolio::uniform(m), 0));
                        }
                        let rows: Vec<&[f64]> =
                            indices.iter().map(|&j| series.row(j)).collect();
                        let objective =
                            Objective::from_rows(&rows, expert.spec.risk_aversion)?;
                        let solve = optimize(&objective, solver)?;
                        Ok((solve.portfolio, u64::from(!solve.converged)))
                    })
                    .collect();
                let mut portfolios = Vec::with_capacity(outcomes.len());
                let mut non_converged = 0;
                for outcome in outcomes {
                    let (p, nc) = outcome?;
                    portfolios.push(p);
                    non_converged += nc;
                }
                Ok((portfolios, non_converged))
            }
            StrategyKind::RacornCK => {
                let outcomes: Vec<Result<InnerOutcome>> = self
                    .experts
                    .par_iter()
                    .enumerate()
                    .map(|(i, expert)| {
                        if t < expert.spec.width {
                            return Ok(InnerOutcome {
                                portfolio: Portfolio::uniform(m),
                                non_converged: 0,
                            });
                        }
                        let rows: Vec<&[f64]> =
                            per_pair[i].iter().map(|&j| series.row(j)).collect();
                        inner_portfolio_from_rows(
                            &rows,
                            m,
                            &self.config.lambda_grid,
                            self.config.inner_weighting,
                            solver,
                        )
                    })
                    .collect();
                let mut portfolios = Vec::with_capacity(outcomes.len());
                let mut non_converged = 0;
                for outcome in outcomes {
                    let inner = outcome?;
                    portfolios.push(inner.portfolio);
                    non_converged += inner.non_converged;
                }
                Ok((portfolios, non_converged))
            }
        }
    }
}

impl Strategy for CornEnsemble {
    fn name(&self) -> &str {
        self.config.strategy.name()
    }

    fn portfolio(&mut self, series: &PriceRelativeSeries, t: usize) -> Result<Portfolio> {
        assert_eq!(series.num_assets(), self.num_assets);
        let (portfolios, non_converged) = self.expert_portfolios(series, t)?;
        self.non_converged += non_converged;
        let master = topk_combine(&self.experts, &portfolios, self.config.top_fraction)?;
        for (expert, portfolio) in self.experts.iter_mut().zip(portfolios) {
            expert.last_portfolio = portfolio;
        }
        Ok(master)
    }

    fn observe(&mut self, series: &PriceRelativeSeries, t: usize) -> Result<()> {
        let row = series.row(t);
        for expert in &mut self.experts {
            expert.update_wealth(row);
        }
        Ok(())
    }

    fn non_converged_solves(&self) -> u64 {
        self.non_converged
    }
}
