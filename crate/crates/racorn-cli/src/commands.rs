use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};

use racorn::config::{load_config, ConfigOverrides, RunConfig, StrategyChoice};
use racorn::csv::{load_market_csv, load_prices_csv, load_relatives_csv, InputMode};
use racorn::ensemble::InnerWeighting;
use racorn::report::{
    human_table, metrics_table_csv, to_machine_json, wealth_csv, BacktestReport, MetricsRow,
    SummaryMetrics,
};
use racorn::PriceRelativeSeries;

use crate::CommonOpts;

/// Layer defaults, config file, CLI flags, and `--set` pairs, in that order.
fn resolve_config(common: &CommonOpts) -> Result<RunConfig> {
    let mut config = RunConfig::default();
    if let Some(path) = &common.config {
        let overrides = load_config(path)?;
        config.apply(&overrides)?;
    }

    let mut flags = ConfigOverrides::default();
    if let Some(data) = &common.data {
        flags.set("data_path", &data.display().to_string())?;
    }
    if let Some(mode) = &common.mode {
        flags.set("data_mode", mode)?;
    }
    if !common.strategies.is_empty() {
        flags.set("strategies", &common.strategies.join(","))?;
    }
    if let Some(out) = &common.out {
        flags.set("output_dir", &out.display().to_string())?;
    }
    if let Some(workers) = common.workers {
        flags.set("workers", &workers.to_string())?;
    }
    config.apply(&flags)?;

    let mut sets = ConfigOverrides::default();
    for pair in &common.sets {
        let Some((key, value)) = pair.split_once('=') else {
            bail!("--set expects KEY=VALUE, got `{pair}`");
        };
        sets.set(key.trim(), value.trim())?;
    }
    config.apply(&sets)?;
    Ok(config)
}

fn load_series(config: &RunConfig) -> Result<PriceRelativeSeries> {
    let Some(path) = &config.data_path else {
        bail!("no dataset: pass --data or set `data_path`");
    };
    let Some(mode) = config.data_mode else {
        bail!("no input mode: pass --mode prices|relatives or set `data_mode`");
    };
    let series = load_market_csv(path, mode)?;
    Ok(series)
}

/// Tracks files written by one invocation so a failure removes the partial
/// output set.
struct OutputSet {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputSet {
    fn new(dir: &Path) -> Result<OutputSet> {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(OutputSet {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let tmp = self.dir.join(format!("{name}.tmp"));
        fs::write(&tmp, contents)
            .with_context(|| format!("cannot write {}", tmp.display()))?;
        fs::rename(&tmp, &path)
            .with_context(|| format!("cannot move {} into place", path.display()))?;
        self.written.push(path.clone());
        Ok(path)
    }

    fn discard(&mut self) {
        for path in self.written.drain(..) {
            let _ = fs::remove_file(path);
        }
    }
}

fn with_worker_pool<T: Send>(
    workers: usize,
    job: impl FnOnce() -> Result<T> + Send,
) -> Result<T> {
    if workers == 0 {
        return job();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("cannot build worker pool")?;
    pool.install(job)
}

fn run_one(
    series: &PriceRelativeSeries,
    config: &RunConfig,
    choice: StrategyChoice,
) -> Result<BacktestReport> {
    let mut strategy = racorn::make_strategy(choice, config, series.num_assets())?;
    let result = racorn::run(series, strategy.as_mut())?;
    Ok(BacktestReport::from_result(
        &result,
        config.echo(choice),
        series.asset_names(),
        config.risk_free_rate,
        config.periods_per_year,
    ))
}

pub fn backtest(common: &CommonOpts) -> Result<ExitCode> {
    let config = resolve_config(common)?;
    let series = load_series(&config)?;
    let out_dir = config
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("reports"));
    let mut outputs = OutputSet::new(&out_dir)?;

    let outcome = with_worker_pool(config.workers, || {
        let mut rows = Vec::new();
        for &choice in &config.strategies {
            let report = run_one(&series, &config, choice)?;
            let slug = choice.slug();
            outputs.write(&format!("{slug}.report.json"), &to_machine_json(&report)?)?;
            let curve = racorn::metrics::WealthCurve::new(
                report.wealth.clone(),
                report.period_labels.clone(),
            )?;
            outputs.write(&format!("{slug}.wealth.csv"), &wealth_csv(&curve))?;
            rows.push(MetricsRow {
                strategy: report.strategy.clone(),
                metrics: SummaryMetrics {
                    ret: report.metrics.ret,
                    sharpe: report.metrics.sharpe,
                    mdd: report.metrics.mdd,
                },
            });
        }
        outputs.write("metrics.csv", &metrics_table_csv(&rows))?;
        Ok(rows)
    });

    match outcome {
        Ok(rows) => {
            print!("{}", human_table(&rows));
            println!("reports written to {}", out_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Err(err) => {
            outputs.discard();
            Err(err)
        }
    }
}

pub fn validate(data: &Path, mode: &str) -> Result<ExitCode> {
    let mode = InputMode::parse(mode)?;
    let loaded = match mode {
        InputMode::Prices => load_prices_csv(data).map(|prices| {
            let periods = prices.num_periods();
            let assets = prices.num_assets();
            (periods, assets, racorn::derive_relatives(&prices))
        }),
        InputMode::Relatives => load_relatives_csv(data).map(|rel| {
            let periods = rel.num_periods();
            let assets = rel.num_assets();
            (periods, assets, Ok(rel))
        }),
    };

    let (periods, assets, relatives) = match loaded {
        Ok(parts) => parts,
        Err(err) => {
            println!("INVALID: {err}");
            return Ok(ExitCode::FAILURE);
        }
    };
    println!("{periods} periods x {assets} assets ({mode} mode)");

    let relatives = match relatives {
        Ok(rel) => rel,
        Err(err) => {
            println!("INVALID: {err}");
            return Ok(ExitCode::FAILURE);
        }
    };

    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for row in relatives.relatives() {
        for &x in row {
            min = min.min(x);
            max = max.max(x);
        }
    }
    println!("relatives range [{min:.6}, {max:.6}]");

    // Heuristic lint: daily growth factors far from 1 are suspicious but not
    // invalid (a split, a unit mixup, or genuinely wild data).
    let mut warnings = 0usize;
    for (t, row) in relatives.relatives().iter().enumerate() {
        for (i, &x) in row.iter().enumerate() {
            if !(0.2..=5.0).contains(&x) {
                println!(
                    "warning: suspicious relative {x} for {} at period {} (outside [0.2, 5])",
                    relatives.asset_names()[i],
                    relatives.period_labels()[t]
                );
                warnings += 1;
            }
        }
    }
    if warnings == 0 {
        println!("no violations");
    } else {
        println!("{warnings} warning(s), no hard violations");
    }
    Ok(ExitCode::SUCCESS)
}

/// The sweepable configuration axes.
enum Axis {
    LambdaMax(Vec<f64>),
    TopFraction(Vec<f64>),
    InnerWeighting(Vec<InnerWeighting>),
    WindowMax(Vec<usize>),
    ThresholdMax(Vec<f64>),
}

fn parse_axis(axis: &str, values: &str) -> Result<Axis> {
    let f64s = || -> Result<Vec<f64>> {
        values
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .with_context(|| format!("bad axis value `{v}`"))
            })
            .collect()
    };
    match axis {
        "lambda_max" => Ok(Axis::LambdaMax(f64s()?)),
        "top_fraction" => Ok(Axis::TopFraction(f64s()?)),
        "inner_weighting" => Ok(Axis::InnerWeighting(
            values
                .split(',')
                .map(|v| InnerWeighting::parse(v.trim()).map_err(anyhow::Error::from))
                .collect::<Result<Vec<_>>>()?,
        )),
        "w_max" => Ok(Axis::WindowMax(
            values
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<usize>()
                        .with_context(|| format!("bad axis value `{v}`"))
                })
                .collect::<Result<Vec<_>>>()?,
        )),
        "rho_max" => Ok(Axis::ThresholdMax(f64s()?)),
        other => bail!(
            "unknown sweep axis `{other}` (expected lambda_max, top_fraction, inner_weighting, w_max, or rho_max)"
        ),
    }
}

fn inclusive_grid(max: f64, step: f64) -> Vec<f64> {
    let mut grid = Vec::new();
    let mut k = 0usize;
    loop {
        let v = k as f64 * step;
        if v > max + 1e-9 {
            break;
        }
        grid.push(v);
        k += 1;
    }
    grid
}

pub fn sweep(common: &CommonOpts, axis: &str, values: &str) -> Result<ExitCode> {
    let base = resolve_config(common)?;
    if base.strategies.len() != 1 {
        bail!(
            "sweep varies one axis for one strategy; pass exactly one --strategy (got {})",
            base.strategies.len()
        );
    }
    let choice = base.strategies[0];
    let axis = parse_axis(axis, values)?;
    let series = load_series(&base)?;

    struct SweepPoint {
        label: String,
        config: RunConfig,
    }
    let points: Vec<SweepPoint> = match axis {
        Axis::LambdaMax(values) => values
            .into_iter()
            .map(|v| {
                let mut config = base.clone();
                config.lambda_grid = Some(inclusive_grid(v, 0.01));
                SweepPoint {
                    label: format!("lambda_max={v}"),
                    config,
                }
            })
            .collect(),
        Axis::TopFraction(values) => values
            .into_iter()
            .map(|v| {
                let mut config = base.clone();
                config.top_fraction = v;
                SweepPoint {
                    label: format!("top_fraction={v}"),
                    config,
                }
            })
            .collect(),
        Axis::InnerWeighting(values) => values
            .into_iter()
            .map(|v| {
                let mut config = base.clone();
                config.inner_weighting = v;
                SweepPoint {
                    label: format!("inner_weighting={}", v.as_str()),
                    config,
                }
            })
            .collect(),
        Axis::WindowMax(values) => values
            .into_iter()
            .map(|v| {
                let mut config = base.clone();
                config.window_grid = (1..=v.max(1)).collect();
                SweepPoint {
                    label: format!("w_max={v}"),
                    config,
                }
            })
            .collect(),
        Axis::ThresholdMax(values) => values
            .into_iter()
            .map(|v| {
                let mut config = base.clone();
                config.threshold_grid = inclusive_grid(v, 0.1);
                SweepPoint {
                    label: format!("rho_max={v}"),
                    config,
                }
            })
            .collect(),
    };
    if points.is_empty() {
        bail!("sweep needs at least one axis value");
    }

    let rows = with_worker_pool(base.workers, || {
        let mut rows = Vec::new();
        for point in &points {
            let report = run_one(&series, &point.config, choice)?;
            rows.push(MetricsRow {
                strategy: format!("{} {}", report.strategy, point.label),
                metrics: SummaryMetrics {
                    ret: report.metrics.ret,
                    sharpe: report.metrics.sharpe,
                    mdd: report.metrics.mdd,
                },
            });
        }
        Ok(rows)
    })?;

    print!("{}", human_table(&rows));
    if let Some(dir) = &base.output_dir {
        let mut outputs = OutputSet::new(dir)?;
        let path = outputs.write("sweep.csv", &metrics_table_csv(&rows))?;
        println!("sweep table written to {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}
