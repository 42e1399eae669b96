// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bsfwd::backtest::{backtest_trades, format_tables, run_backtest, StrategyConfig, TradeMethod};
use bsfwd::grid::{extrapolate_boundary, GridSpec};
use bsfwd::io::{
    read_blocks, read_features, read_forecasts, write_blocks, write_features, write_forecasts,
};
use bsfwd::ml::{build_features, filtered_backtest, train_filter, FilterModel};
use bsfwd::operator::assemble;
use bsfwd::pipeline::{minimizer_file_name, solve_batch, write_minimizer, BatchReport};
use bsfwd::solver::beta_search;
use bsfwd::synth::{generate, SynthConfig, SynthModel};
use bsfwd::{DataBlock, Error, Result};

use config::{FileConfig, PipelineFlags, StrategyFlags, TrainFlags};

#[derive(Parser)]
#[command(
    name = "bsfwd",
    version,
    about = "Forecast option prices by solving the Black-Scholes equation forwards in time"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forecast tomorrow's and the day after's price for every block.
    Forecast(ForecastArgs),
    /// Run the trading strategy over blocks and forecasts.
    Backtest(BacktestArgs),
    /// Pick the beta with the smallest median forecast error.
    BetaSearch(BetaSearchArgs),
    /// Build labelled feature vectors from the trades of the forecast method.
    Features(FeaturesArgs),
    /// Train the trade filter network.
    TrainFilter(TrainFilterArgs),
    /// Backtest the forecast method with trades vetoed by a trained filter.
    FilterBacktest(FilterBacktestArgs),
    /// Write seeded synthetic data blocks.
    Synth(SynthArgs),
}

#[derive(Args)]
struct SolverArgs {
    /// Grid points per dimension (odd, at least 5).
    #[arg(long)]
    grid_size: Option<usize>,
    /// Regularization parameter in (0, 1).
    #[arg(long)]
    beta: Option<f64>,
    /// Boundary extrapolation in time: quadratic or constant.
    #[arg(long)]
    boundary_mode: Option<String>,
    #[arg(long)]
    cg_tol: Option<f64>,
    #[arg(long)]
    cg_max_iter: Option<usize>,
    /// Solve without scaling rows of the reduced system to unit norm.
    #[arg(long)]
    no_row_normalize: bool,
    /// Lower bound applied to extrapolated option prices.
    #[arg(long)]
    price_floor: Option<f64>,
    /// Worker threads for the batch; 1 runs sequentially.
    #[arg(long)]
    parallelism: Option<usize>,
    /// Flat TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl SolverArgs {
    fn flags(&self) -> PipelineFlags {
        PipelineFlags {
            grid_size: self.grid_size,
            beta: self.beta,
            boundary_mode: self.boundary_mode.clone(),
            cg_tol: self.cg_tol,
            cg_max_iter: self.cg_max_iter,
            no_row_normalize: self.no_row_normalize,
            price_floor: self.price_floor,
            parallelism: self.parallelism,
        }
    }
}

#[derive(Args)]
struct ForecastArgs {
    /// Data blocks CSV.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "forecasts.csv")]
    out: PathBuf,
    /// Directory for one full minimizer grid per option.
    #[arg(long)]
    minimizer_dir: Option<PathBuf>,
    /// Error histogram CSV.
    #[arg(long)]
    hist: Option<PathBuf>,
    /// Directory for the reduced linear system of each option.
    #[arg(long)]
    dump_dir: Option<PathBuf>,
    /// Abort on the first malformed row instead of skipping it.
    #[arg(long)]
    strict: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct StrategyArgs {
    #[arg(long)]
    contract_size: Option<f64>,
    /// Buy only when the predictor exceeds today's ask by more than this.
    #[arg(long)]
    threshold_margin: Option<f64>,
    /// Exit at the realized price one or two days ahead.
    #[arg(long)]
    exit_day: Option<u8>,
    /// Flat TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl StrategyArgs {
    fn resolve(&self) -> Result<StrategyConfig> {
        let file = FileConfig::load(self.config.as_deref())?;
        config::strategy_config(
            &StrategyFlags {
                contract_size: self.contract_size,
                threshold_margin: self.threshold_margin,
                exit_day: self.exit_day,
            },
            &file,
        )
    }
}

#[derive(Args)]
struct BacktestArgs {
    #[arg(long)]
    blocks: PathBuf,
    #[arg(long)]
    forecasts: PathBuf,
    /// bs, last, ask or all.
    #[arg(long, default_value = "all")]
    method: String,
    /// JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Profit/loss histogram CSV.
    #[arg(long)]
    hist: Option<PathBuf>,
    #[command(flatten)]
    strategy: StrategyArgs,
}

#[derive(Args)]
struct BetaSearchArgs {
    #[arg(long)]
    input: PathBuf,
    /// Comma separated candidates.
    #[arg(long, value_delimiter = ',', default_values_t = [0.001, 0.01, 0.1, 0.5])]
    betas: Vec<f64>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    blocks: PathBuf,
    #[arg(long)]
    forecasts: PathBuf,
    #[arg(long, default_value = "features.csv")]
    out: PathBuf,
    #[command(flatten)]
    strategy: StrategyArgs,
}

#[derive(Args)]
struct TrainFilterArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
    /// Cross-validated learning curve CSV.
    #[arg(long)]
    curve: Option<PathBuf>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    k_folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Flat TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct FilterBacktestArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    blocks: PathBuf,
    #[arg(long)]
    forecasts: PathBuf,
    /// Minimum predicted probability of profit for a trade to go ahead.
    #[arg(long)]
    threshold: Option<f64>,
    /// JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    strategy: StrategyArgs,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    n: usize,
    /// gbm_drift, constant or noisy.
    #[arg(long, default_value = "gbm_drift")]
    model: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "blocks.csv")]
    out: PathBuf,
    /// Annualized stock drift (gbm_drift).
    #[arg(long)]
    drift: Option<f64>,
    /// Annualized stock volatility (gbm_drift).
    #[arg(long)]
    volatility: Option<f64>,
    /// Relative quote noise.
    #[arg(long)]
    noise: Option<f64>,
    /// Option bid/ask spread as a fraction of the mid.
    #[arg(long)]
    spread: Option<f64>,
}

fn file_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::File {
        path: path.display().to_string(),
        source,
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(file_error(path))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(file_error(path))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(file_error(path))
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { line, msg } => {
            Error::Config(format!("{}: line {line}: {msg}", path.display()))
        }
        other => other,
    })
}

fn load_blocks(path: &Path, strict: bool) -> Result<Vec<DataBlock>> {
    let (blocks, issues) = with_path(path, read_blocks(open(path)?, strict))?;
    for issue in &issues {
        eprintln!("warning: {}: skipped {issue}", path.display());
    }
    Ok(blocks)
}

fn load_forecasts(path: &Path) -> Result<Vec<bsfwd::Forecast>> {
    with_path(path, read_forecasts(open(path)?))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn cmd_forecast(a: &ForecastArgs) -> Result<()> {
    let file = FileConfig::load(a.solver.config.as_deref())?;
    let cfg = config::pipeline_config(&a.solver.flags(), &file)?;
    let blocks = load_blocks(&a.input, a.strict)?;
    if blocks.is_empty() {
        return Err(Error::EmptyInput("no valid data blocks in input"));
    }
    let solved = solve_batch(&blocks, &cfg);
    let report = BatchReport::from_results(
        &blocks,
        solved
            .iter()
            .map(|r| r.as_ref().map(|s| &s.forecast).map_err(Error::to_string)),
        cfg.hist_bin_width,
    );

    let mut out = create(&a.out)?;
    write_forecasts(&mut out, &report.forecasts)?;
    if let Some(path) = &a.hist {
        report.write_histogram_csv(create(path)?)?;
    }
    if let Some(dir) = &a.minimizer_dir {
        create_dir(dir)?;
        for (block, s) in blocks.iter().zip(&solved) {
            if let Ok(s) = s {
                let w = create(&dir.join(minimizer_file_name(&block.option_id)))?;
                write_minimizer(w, &block.option_id, cfg.solver.beta, &s.grid)?;
            }
        }
    }
    if let Some(dir) = &a.dump_dir {
        create_dir(dir)?;
        for block in &blocks {
            let system = GridSpec::from_block(block, cfg.grid_size).and_then(|spec| {
                let bd = extrapolate_boundary(block, cfg.boundary_mode, cfg.price_floor)?;
                assemble(&spec, &bd, cfg.solver.row_normalize)
            });
            if let Ok(sys) = system {
                let name = minimizer_file_name(&block.option_id).replace(".csv", ".txt");
                let mut w = create(&dir.join(name))?;
                sys.write_dump(&mut w)?;
                w.flush()?;
            }
        }
    }

    for f in &report.failures {
        eprintln!("warning: option {}: {}", f.option_id, f.error);
    }
    let unconverged = report.forecasts.iter().filter(|f| !f.converged).count();
    if unconverged > 0 {
        eprintln!("warning: {unconverged} minimizations hit the iteration limit");
    }
    println!(
        "forecast {} of {} blocks (M = {}, beta = {}); median error {}",
        report.forecasts.len(),
        blocks.len(),
        cfg.grid_size,
        cfg.solver.beta,
        report
            .median_err
            .map_or_else(|| "n/a".to_string(), |m| format!("{:.4}", m))
    );
    Ok(())
}

fn methods(spec: &str) -> Result<Vec<TradeMethod>> {
    if spec == "all" {
        Ok(TradeMethod::ALL.to_vec())
    } else {
        Ok(vec![spec.parse()?])
    }
}

fn cmd_backtest(a: &BacktestArgs) -> Result<()> {
    let cfg = a.strategy.resolve()?;
    let methods = methods(&a.method)?;
    let blocks = load_blocks(&a.blocks, false)?;
    let forecasts = load_forecasts(&a.forecasts)?;
    let reports: Vec<_> = methods
        .iter()
        .map(|&m| run_backtest(&blocks, &forecasts, m, &cfg))
        .collect();
    print!("{}", format_tables(&reports));
    if let Some(r) = reports.first() {
        if !r.skipped.is_empty() {
            eprintln!("warning: {} options skipped", r.skipped.len());
        }
    }
    if let Some(path) = &a.out {
        write_json(path, &reports)?;
    }
    if let Some(path) = &a.hist {
        let mut w = create(path)?;
        writeln!(w, "method,bin_low,bin_high,count")?;
        for r in &reports {
            for b in &r.pnl_histogram {
                let code = match r.method {
                    TradeMethod::BlackScholes => "bs",
                    TradeMethod::LastPrice => "last",
                    TradeMethod::AskPrice => "ask",
                };
                writeln!(w, "{code},{},{},{}", b.low, b.high, b.count)?;
            }
        }
        w.flush()?;
    }
    Ok(())
}

fn cmd_beta_search(a: &BetaSearchArgs) -> Result<()> {
    let file = FileConfig::load(a.solver.config.as_deref())?;
    let cfg = config::pipeline_config(&a.solver.flags(), &file)?;
    for &b in &a.betas {
        if !(b > 0.0 && b < 1.0) {
            return Err(Error::Config(format!(
                "betas: each candidate must lie in (0, 1), got {b}"
            )));
        }
    }
    let blocks = load_blocks(&a.input, false)?;
    let best = beta_search(&blocks, &a.betas, &cfg)?;
    println!("{best}");
    Ok(())
}

fn cmd_features(a: &FeaturesArgs) -> Result<()> {
    let cfg = a.strategy.resolve()?;
    let blocks = load_blocks(&a.blocks, false)?;
    let forecasts = load_forecasts(&a.forecasts)?;
    let (trades, _) = backtest_trades(
        &blocks,
        &forecasts,
        TradeMethod::BlackScholes,
        &cfg,
        |_, _| true,
    );
    let (features, missing) = build_features(&blocks, &forecasts, &trades);
    for id in missing {
        eprintln!("warning: option {id}: missing block or forecast");
    }
    write_features(create(&a.out)?, &features)?;
    println!("{} feature vectors", features.len());
    Ok(())
}

fn cmd_train_filter(a: &TrainFilterArgs) -> Result<()> {
    let file = FileConfig::load(a.config.as_deref())?;
    let cfg = config::train_config(
        &TrainFlags {
            learning_rate: a.learning_rate,
            iterations: a.iterations,
            lambda: a.lambda,
            k_folds: a.k_folds,
            seed: a.seed,
        },
        &file,
    )?;
    let data = with_path(&a.features, read_features(open(&a.features)?))?;
    let out = train_filter(&data, &cfg)?;
    write_json(&a.out, &out.model)?;
    if let Some(path) = &a.curve {
        out.bands.write_csv(create(path)?)?;
    }
    println!(
        "train accuracy {:.4}, test accuracy {:.4}, final validation mse {:.6}",
        out.train_accuracy,
        out.test_accuracy,
        out.curve.eval_loss.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn cmd_filter_backtest(a: &FilterBacktestArgs) -> Result<()> {
    let cfg = a.strategy.resolve()?;
    let file = FileConfig::load(a.strategy.config.as_deref())?;
    let threshold = a.threshold.or(file.threshold).unwrap_or(0.5);
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Config(format!(
            "threshold: must lie in [0, 1], got {threshold}"
        )));
    }
    let model: FilterModel = serde_json::from_reader(open(&a.model)?)
        .map_err(|e| Error::Config(format!("{}: {e}", a.model.display())))?;
    model.validate()?;
    let blocks = load_blocks(&a.blocks, false)?;
    let forecasts = load_forecasts(&a.forecasts)?;
    let unfiltered = run_backtest(&blocks, &forecasts, TradeMethod::BlackScholes, &cfg);
    let filtered = filtered_backtest(&blocks, &forecasts, &model, threshold, &cfg);
    println!("Unfiltered");
    print!("{}", format_tables(std::slice::from_ref(&unfiltered)));
    println!();
    println!("Filtered (threshold {threshold})");
    print!("{}", format_tables(std::slice::from_ref(&filtered)));
    if let Some(path) = &a.out {
        write_json(
            path,
            &serde_json::json!({ "unfiltered": unfiltered, "filtered": filtered }),
        )?;
    }
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    if a.n == 0 {
        return Err(Error::Config("n: must be at least 1".into()));
    }
    let model: SynthModel = a.model.parse()?;
    let mut cfg = SynthConfig::new(model, a.seed);
    cfg.drift = a.drift.unwrap_or(cfg.drift);
    cfg.volatility = a.volatility.unwrap_or(cfg.volatility);
    cfg.noise = a.noise.unwrap_or(cfg.noise);
    cfg.spread = a.spread.unwrap_or(cfg.spread);
    if !(cfg.volatility > 0.0) || !(cfg.noise >= 0.0) || !(cfg.spread >= 0.0) {
        return Err(Error::Config(
            "volatility must be positive, noise and spread nonnegative".into(),
        ));
    }
    write_blocks(create(&a.out)?, &generate(a.n, &cfg))?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Forecast(a) => cmd_forecast(a),
        Command::Backtest(a) => cmd_backtest(a),
        Command::BetaSearch(a) => cmd_beta_search(a),
        Command::Features(a) => cmd_features(a),
        Command::TrainFilter(a) => cmd_train_filter(a),
        Command::FilterBacktest(a) => cmd_filter_backtest(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
