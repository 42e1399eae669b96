//! Browser bindings. Every export takes plain values and returns a JSON
//! string; failures come back as `{"error": "..."}`.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use bsfwd::backtest::{run_backtest, StrategyConfig, TradeMethod};
use bsfwd::grid::{tabulate_f, BoundaryMode, DataBlock, MarketDay};
use bsfwd::pipeline::{run_batch, solve_block, HistogramBin, PipelineConfig};
use bsfwd::solver::SolverConfig;
use bsfwd::synth::{generate, SynthConfig, SynthModel};

/// Three days of quotes, oldest first, plus today's stock quote.
#[derive(Debug, Clone, Deserialize)]
pub struct SurfaceRequest {
    pub option_bid: [f64; 3],
    pub option_ask: [f64; 3],
    pub volatility: [f64; 3],
    pub stock_bid: f64,
    pub stock_ask: f64,
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub boundary_mode: BoundaryMode,
}

fn default_grid() -> usize {
    21
}

fn default_beta() -> f64 {
    0.01
}

#[derive(Debug, Serialize)]
pub struct Surface {
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    /// `u[j][i]`: time level `j`, price node `i`.
    pub u: Vec<Vec<f64>>,
    pub f: Vec<Vec<f64>>,
    pub est_plus1: f64,
    pub est_plus2: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Serialize)]
pub struct BatchSummary {
    pub n: usize,
    pub failures: usize,
    pub median_err: Option<f64>,
    pub bins: Vec<HistogramBin>,
}

#[derive(Debug, Serialize)]
pub struct MethodSummary {
    pub method: TradeMethod,
    pub label: &'static str,
    pub n_traded: usize,
    pub total_pnl: f64,
    pub pct_profit: f64,
    pub pct_loss: f64,
    pub pct_zero: f64,
    pub bins: Vec<HistogramBin>,
}

fn respond<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e),
    }
}

fn error_json(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}

pub fn surface(req: &SurfaceRequest) -> Result<Surface, String> {
    let day = |k: usize| MarketDay {
        option_bid: req.option_bid[k],
        option_ask: req.option_ask[k],
        volatility: req.volatility[k],
        stock_bid: (k == 2).then_some(req.stock_bid),
        stock_ask: (k == 2).then_some(req.stock_ask),
    };
    let block =
        DataBlock::new("demo", [day(0), day(1), day(2)], None, None).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig {
        grid_size: req.grid_size,
        boundary_mode: req.boundary_mode,
        solver: SolverConfig {
            beta: req.beta,
            ..Default::default()
        },
        ..Default::default()
    };
    cfg.validate().map_err(|e| e.to_string())?;
    let solved = solve_block(&block, &cfg).map_err(|e| e.to_string())?;
    let spec = solved.grid.spec;
    Ok(Surface {
        s: (0..spec.m).map(|i| spec.s(i)).collect(),
        t: (0..spec.m).map(|j| spec.t(j)).collect(),
        u: solved.grid.to_matrix(),
        f: tabulate_f(&spec, &solved.boundary).to_matrix(),
        est_plus1: solved.forecast.est_plus1,
        est_plus2: solved.forecast.est_plus2,
        iterations: solved.result.iterations,
        converged: solved.result.converged,
    })
}

pub fn batch(
    n: usize,
    seed: u64,
    model: &str,
    grid_size: usize,
    beta: f64,
) -> Result<BatchSummary, String> {
    let model: SynthModel = model.parse().map_err(|e: bsfwd::Error| e.to_string())?;
    let cfg = PipelineConfig {
        grid_size,
        solver: SolverConfig {
            beta,
            ..Default::default()
        },
        ..Default::default()
    };
    cfg.validate().map_err(|e| e.to_string())?;
    let blocks = generate(n, &SynthConfig::new(model, seed));
    let report = run_batch(&blocks, &cfg);
    Ok(BatchSummary {
        n,
        failures: report.failures.len(),
        median_err: report.median_err,
        bins: report.err_histogram,
    })
}

pub fn compare(n: usize, seed: u64, threshold_margin: f64) -> Result<Vec<MethodSummary>, String> {
    let blocks = generate(n, &SynthConfig::new(SynthModel::GbmDrift, seed));
    let forecasts = run_batch(&blocks, &PipelineConfig::default()).forecasts;
    let strat = StrategyConfig {
        threshold_margin,
        ..Default::default()
    };
    strat.validate().map_err(|e| e.to_string())?;
    Ok(TradeMethod::ALL
        .iter()
        .map(|&m| {
            let r = run_backtest(&blocks, &forecasts, m, &strat);
            MethodSummary {
                method: m,
                label: m.label(),
                n_traded: r.n_traded,
                total_pnl: r.total_pnl,
                pct_profit: r.pct_profit,
                pct_loss: r.pct_loss,
                pct_zero: r.pct_zero,
                bins: r.pnl_histogram,
            }
        })
        .collect())
}

/// Minimizer surface and target function for one option, from a JSON
/// [`SurfaceRequest`].
#[wasm_bindgen]
pub fn solve_surface(request_json: &str) -> String {
    respond(
        serde_json::from_str::<SurfaceRequest>(request_json)
            .map_err(|e| e.to_string())
            .and_then(|r| surface(&r)),
    )
}

/// Forecast error histogram over `n` seeded synthetic blocks.
#[wasm_bindgen]
pub fn batch_histogram(n: u32, seed: u32, model: &str, grid_size: u32, beta: f64) -> String {
    respond(batch(
        n as usize,
        seed as u64,
        model,
        grid_size as usize,
        beta,
    ))
}

/// Profit and loss of the three trading methods on a seeded drifting market.
#[wasm_bindgen]
pub fn backtest_compare(n: u32, seed: u32, threshold_margin: f64) -> String {
    respond(compare(n as usize, seed as u64, threshold_margin))
}
