//! Simplex-constrained portfolio objectives and their solvers.
//!
//! The objective over a set of matched price-relative rows is the mean log
//! return of the portfolio minus a risk penalty: the population standard
//! deviation of those log returns, scaled by a risk-aversion coefficient.
//! The risk is the deviation of the *portfolio's* log returns over the
//! matched rows, not a portfolio-weighted sum of per-asset deviations.
//!
//! With zero risk aversion the objective is concave and projected gradient
//! ascent from the uniform start finds the optimum. With positive risk
//! aversion concavity is not guaranteed; the solver returns a stationary
//! point from the same deterministic start, validated against the
//! brute-force grid oracle at small scale.

use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerated negative slack before cleanup clips a weight to zero.
const NEG_CLIP: f64 = -1e-12;
/// Tolerated deviation of the weight sum from one.
const SUM_TOL: f64 = 1e-9;
/// Relative objective improvement under which the solver stops.
const REL_IMPROVEMENT_TOL: f64 = 1e-10;
/// Smallest line-search step before the iteration gives up.
const MIN_STEP: f64 = 1e-12;

/// A long-only portfolio: non-negative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Portfolio {
    weights: Vec<f64>,
}

impl Portfolio {
    /// Validate and clean a weight vector: weights at least `-1e-12`
    /// (clipped to zero), sum within `1e-9` of one, then renormalized
    /// exactly.
    pub fn new(mut weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidPortfolio("no assets".into()));
        }
        for w in &mut weights {
            if !w.is_finite() {
                return Err(Error::InvalidPortfolio(format!("non-finite weight {w}")));
            }
            if *w < NEG_CLIP {
                return Err(Error::InvalidPortfolio(format!(
                    "weight {w} below the clip tolerance"
                )));
            }
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidPortfolio(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        for w in &mut weights {
            *w /= sum;
        }
        Ok(Self { weights })
    }

    /// The uniform portfolio over `num_assets` assets.
    pub fn uniform(num_assets: usize) -> Portfolio {
        assert!(num_assets > 0, "portfolio needs at least one asset");
        Portfolio {
            weights: vec![1.0 / num_assets as f64; num_assets],
        }
    }

    /// All weight on one asset.
    pub fn vertex(num_assets: usize, asset: usize) -> Portfolio {
        assert!(asset < num_assets);
        let mut weights = vec![0.0; num_assets];
        weights[asset] = 1.0;
        Portfolio { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn num_assets(&self) -> usize {
        self.weights.len()
    }

    /// The portfolio's growth factor over one period of price relatives.
    pub fn period_return(&self, relatives: &[f64]) -> f64 {
        dot(&self.weights, relatives)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean projection onto the probability simplex (sort-based).
pub(crate) fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut threshold = 0.0;
    let mut support = 0;
    for (i, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (i + 1) as f64;
        if u - candidate > 0.0 {
            threshold = candidate;
            support = i + 1;
        }
    }
    debug_assert!(support > 0);
    v.iter().map(|&x| (x - threshold).max(0.0)).collect()
}

/// The risk-penalized log-optimal objective over matched rows.
#[derive(Debug, Clone)]
pub struct Objective {
    match_rows: Vec<Vec<f64>>,
    risk_aversion: f64,
}

/// The three components of an objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// `mean_log - risk_aversion * risk`.
    pub value: f64,
    /// Mean of `ln(b . x)` over the matched rows.
    pub mean_log: f64,
    /// Population standard deviation of `ln(b . x)` over the matched rows.
    pub risk: f64,
}

impl Objective {
    /// Requires at least one matched row, rectangular shape, strictly
    /// positive finite entries, and non-negative risk aversion. The empty
    /// match set never reaches here; the ensemble falls back to uniform
    /// upstream.
    pub fn new(match_rows: Vec<Vec<f64>>, risk_aversion: f64) -> Result<Self> {
        if match_rows.is_empty() {
            return Err(Error::InvalidObjective("no matched rows".into()));
        }
        let m = match_rows[0].len();
        if m == 0 {
            return Err(Error::InvalidObjective("rows have no assets".into()));
        }
        for (k, row) in match_rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::InvalidObjective(format!(
                    "row {k} has {} entries, expected {m}",
                    row.len()
                )));
            }
            if row.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
                return Err(Error::InvalidObjective(format!(
                    "row {k} contains a non-positive or non-finite entry"
                )));
            }
        }
        if !(risk_aversion.is_finite() && risk_aversion >= 0.0) {
            return Err(Error::InvalidObjective(format!(
                "risk aversion must be a non-negative finite number, got {risk_aversion}"
            )));
        }
        Ok(Self {
            match_rows,
            risk_aversion,
        })
    }

    /// Build from borrowed rows (the shape the match set produces).
    pub fn from_rows(rows: &[&[f64]], risk_aversion: f64) -> Result<Self> {
        Self::new(rows.iter().map(|r| r.to_vec()).collect(), risk_aversion)
    }

    pub fn num_assets(&self) -> usize {
        self.match_rows[0].len()
    }

    pub fn num_samples(&self) -> usize {
        self.match_rows.len()
    }

    pub fn match_rows(&self) -> &[Vec<f64>] {
        &self.match_rows
    }

    pub fn risk_aversion(&self) -> f64 {
        self.risk_aversion
    }

    fn log_returns(&self, weights: &[f64]) -> Vec<f64> {
        self.match_rows
            .iter()
            .map(|row| dot(weights, row).ln())
            .collect()
    }

    fn mean_and_variance(&self, weights: &[f64]) -> (f64, f64) {
        let logs = self.log_returns(weights);
        let n = logs.len() as f64;
        let mean = logs.iter().sum::<f64>() / n;
        let variance = logs.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
        (mean, variance)
    }

    /// Evaluate the objective exactly (no smoothing in the reported risk).
    pub fn evaluate(&self, portfolio: &Portfolio) -> Result<Evaluation> {
        if portfolio.num_assets() != self.num_assets() {
            return Err(Error::InvalidPortfolio(format!(
                "portfolio has {} assets, objective has {}",
                portfolio.num_assets(),
                self.num_assets()
            )));
        }
        let (mean_log, variance) = self.mean_and_variance(portfolio.weights());
        let risk = variance.sqrt();
        let value = mean_log - self.risk_aversion * risk;
        if !value.is_finite() {
            return Err(Error::NonFinite("objective evaluation"));
        }
        Ok(Evaluation {
            value,
            mean_log,
            risk,
        })
    }

    /// The solver's objective: the standard deviation is smoothed as
    /// `sqrt(variance + eps)` so its gradient stays finite when all log
    /// returns coincide.
    pub fn smoothed_value(&self, weights: &[f64], smoothing_eps: f64) -> f64 {
        let (mean, variance) = self.mean_and_variance(weights);
        mean - self.risk_aversion * (variance + smoothing_eps).sqrt()
    }

    /// Analytic gradient of [`Objective::smoothed_value`].
    ///
    /// Mean term: `(1/n) sum_k x_k / (b . x_k)`. Risk term by the chain rule
    /// through the variance: `d variance = (2/n) sum_k (r_k - mean) x_k /
    /// (b . x_k)` (the mean's own gradient cancels because the deviations
    /// sum to zero).
    pub fn gradient(&self, weights: &[f64], smoothing_eps: f64) -> Vec<f64> {
        let m = self.num_assets();
        let n = self.match_rows.len() as f64;
        let returns: Vec<f64> = self
            .match_rows
            .iter()
            .map(|row| dot(weights, row))
            .collect();
        let logs: Vec<f64> = returns.iter().map(|r| r.ln()).collect();
        let mean = logs.iter().sum::<f64>() / n;
        let variance = logs.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;

        let mut grad_mean = vec![0.0; m];
        let mut grad_var = vec![0.0; m];
        for (k, row) in self.match_rows.iter().enumerate() {
            let inv = 1.0 / returns[k];
            let dev = logs[k] - mean;
            for i in 0..m {
                let g = row[i] * inv;
                grad_mean[i] += g;
                grad_var[i] += dev * g;
            }
        }
        let risk_scale = self.risk_aversion / (variance + smoothing_eps).sqrt();
        (0..m)
            .map(|i| grad_mean[i] / n - risk_scale * grad_var[i] / n)
            .collect()
    }
}

/// Knobs for the projected-gradient solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Projected-gradient norm under which the iterate counts as stationary.
    pub tolerance: f64,
    /// Iteration cap; exhausting it flags the result as non-converged.
    pub max_iterations: usize,
    /// Variance smoothing inside the gradient path.
    pub smoothing_eps: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 2000,
            smoothing_eps: 1e-12,
        }
    }
}

/// Outcome of one solve. Non-convergence is a status, not a failure: a
/// backtest must not abort mid-stream, and the last iterate is always
/// feasible and at least as good as the uniform start.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub portfolio: Portfolio,
    /// Exact objective value at the returned portfolio.
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Projected gradient ascent on the simplex: uniform start, backtracking
/// line search halving from step 1.0, stopping on projected-gradient norm or
/// relative improvement, capped iterations.
pub fn optimize(objective: &Objective, options: &SolverOptions) -> Result<SolveResult> {
    let m = objective.num_assets();

    // A single matched row has zero risk at every portfolio, so the optimum
    // is the vertex of the largest relative; ties go to the lowest index.
    if objective.num_samples() == 1 {
        let row = &objective.match_rows[0];
        let argmax = row
            .iter()
            .enumerate()
            .rev()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("objective rows are non-empty");
        let portfolio = Portfolio::vertex(m, argmax);
        let value = objective.evaluate(&portfolio)?.value;
        return Ok(SolveResult {
            portfolio,
            value,
            converged: true,
            iterations: 0,
        });
    }

    let eps = options.smoothing_eps;
    let mut weights = vec![1.0 / m as f64; m];
    let mut current = objective.smoothed_value(&weights, eps);
    if !current.is_finite() {
        return Err(Error::NonFinite("objective at uniform start"));
    }

    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iterations {
        iterations += 1;
        let gradient = objective.gradient(&weights, eps);

        let stepped: Vec<f64> = weights
            .iter()
            .zip(&gradient)
            .map(|(w, g)| w + g)
            .collect();
        let projected = project_to_simplex(&stepped);
        let pg_norm = projected
            .iter()
            .zip(&weights)
            .map(|(p, w)| (p - w) * (p - w))
            .sum::<f64>()
            .sqrt();
        if pg_norm < options.tolerance {
            converged = true;
            break;
        }

        let mut step = 1.0;
        let mut accepted = None;
        while step >= MIN_STEP {
            let trial: Vec<f64> = weights
                .iter()
                .zip(&gradient)
                .map(|(w, g)| w + step * g)
                .collect();
            let candidate = project_to_simplex(&trial);
            let value = objective.smoothed_value(&candidate, eps);
            if value > current {
                accepted = Some((candidate, value));
                break;
            }
            step *= 0.5;
        }

        match accepted {
            None => {
                // No ascent step exists at this scale; the relative
                // improvement criterion is met.
                converged = true;
                break;
            }
            Some((candidate, value)) => {
                let improvement = (value - current) / current.abs().max(1.0);
                weights = candidate;
                current = value;
                if improvement < REL_IMPROVEMENT_TOL {
                    converged = true;
                    break;
                }
            }
        }
    }

    let portfolio = Portfolio::new(weights)?;
    let value = objective.evaluate(&portfolio)?.value;
    let uniform = Portfolio::uniform(m);
    let uniform_value = objective.evaluate(&uniform)?.value;
    // The ascent is monotone in the smoothed objective; guard the exact
    // objective contract as well.
    if value < uniform_value {
        return Ok(SolveResult {
            portfolio: uniform,
            value: uniform_value,
            converged: false,
            iterations,
        });
    }
    Ok(SolveResult {
        portfolio,
        value,
        converged,
        iterations,
    })
}

/// Exhaustive simplex-grid search, the validation oracle for [`optimize`].
///
/// Enumerates every composition of `round(1/step)` levels into the assets,
/// in lexicographically ascending weight order; ties keep the first (hence
/// lexicographically smallest) maximizer. Refuses more than 4 assets.
pub fn grid_oracle(objective: &Objective, step: f64) -> Result<(Portfolio, f64)> {
    const MAX_ASSETS: usize = 4;
    let m = objective.num_assets();
    if m > MAX_ASSETS {
        return Err(Error::OracleSize {
            max: MAX_ASSETS,
            got: m,
        });
    }
    if !(step.is_finite() && step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidObjective(format!(
            "grid step must be in (0, 1], got {step}"
        )));
    }
    let levels = (1.0 / step).round() as usize;

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut counts = vec![0usize; m];
    enumerate_compositions(levels, m, 0, &mut counts, &mut |counts| {
        let weights: Vec<f64> = counts.iter().map(|&c| c as f64 / levels as f64).collect();
        let portfolio = Portfolio {
            weights: weights.clone(),
        };
        let value = objective
            .evaluate(&portfolio)
            .expect("grid point is feasible")
            .value;
        let better = match &best {
            None => true,
            Some((_, b)) => value > *b,
        };
        if better {
            best = Some((weights, value));
        }
    });
    let (weights, value) = best.expect("grid is non-empty");
    Ok((Portfolio { weights }, value))
}

fn enumerate_compositions(
    remaining: usize,
    slots: usize,
    index: usize,
    counts: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    if index == slots - 1 {
        counts[index] = remaining;
        visit(counts);
        return;
    }
    for take in 0..=remaining {
        counts[index] = take;
        enumerate_compositions(remaining - take, slots, index + 1, counts, visit);
    }
}
