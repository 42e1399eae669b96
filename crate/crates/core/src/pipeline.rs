//! Per-option forecasting and the parallel batch runner.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    check_grid_size, extrapolate_boundary, BoundaryData, BoundaryMode, DataBlock, GridSpec,
    SolutionGrid, DEFAULT_GRID_SIZE, DEFAULT_PRICE_FLOOR,
};
use crate::operator::assemble;
use crate::solver::{minimize_cg, MinimizeResult, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub solver: SolverConfig,
    pub grid_size: usize,
    pub boundary_mode: BoundaryMode,
    pub price_floor: f64,
    pub parallelism: usize,
    pub hist_bin_width: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            grid_size: DEFAULT_GRID_SIZE,
            boundary_mode: BoundaryMode::Quadratic,
            price_floor: DEFAULT_PRICE_FLOOR,
            parallelism: 1,
            hist_bin_width: 0.01,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        check_grid_size(self.grid_size)?;
        if !(self.price_floor > 0.0) {
            return Err(Error::Config(format!(
                "price_floor must be positive, got {}",
                self.price_floor
            )));
        }
        if !(self.hist_bin_width > 0.0) {
            return Err(Error::Config("histogram bin width must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub option_id: String,
    pub est_plus1: f64,
    pub est_plus2: f64,
    pub err: Option<f64>,
    pub beta_used: f64,
    pub m_used: usize,
    pub converged: bool,
}

/// Mean relative error of the two forecasts against realized prices.
pub fn forecast_error(est: (f64, f64), real: (f64, f64)) -> f64 {
    0.5 * ((est.0 - real.0).abs() / real.0 + (est.1 - real.1).abs() / real.1)
}

/// Everything produced while forecasting one block.
#[derive(Debug, Clone)]
pub struct Solved {
    pub boundary: BoundaryData,
    /// Full minimizer with the prescribed boundary values in place.
    pub grid: SolutionGrid,
    pub result: MinimizeResult,
    pub forecast: Forecast,
}

pub fn solve_block(block: &DataBlock, cfg: &PipelineConfig) -> Result<Solved> {
    let spec = GridSpec::from_block(block, cfg.grid_size)?;
    let bd = extrapolate_boundary(block, cfg.boundary_mode, cfg.price_floor)?;
    let sys = assemble(&spec, &bd, cfg.solver.row_normalize)?;
    let result = minimize_cg(&sys, &cfg.solver)?;
    let grid = SolutionGrid::new(spec, sys.scatter(&result.u)?)?;
    let mid = spec.mid_column();
    let est = (
        grid.get(mid, spec.row_tomorrow()),
        grid.get(mid, spec.row_day_after()),
    );
    let forecast = Forecast {
        option_id: block.option_id.clone(),
        est_plus1: est.0,
        est_plus2: est.1,
        err: block.ground_truth().map(|real| forecast_error(est, real)),
        beta_used: cfg.solver.beta,
        m_used: cfg.grid_size,
        converged: result.converged,
    };
    Ok(Solved {
        boundary: bd,
        grid,
        result,
        forecast,
    })
}

/// Forecasts `u(s*, tau)` and `u(s*, 2 tau)` at the midpoint `s*` of today's
/// stock bid/ask.
pub fn forecast_one(block: &DataBlock, cfg: &PipelineConfig) -> Result<Forecast> {
    solve_block(block, cfg).map(|s| s.forecast)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub low: f64,
    pub high: f64,
    pub count: usize,
}

/// Bins of `width` over `[0, 1)` followed by one overflow bin `[1, inf)`.
pub fn err_histogram(errs: &[f64], width: f64) -> Vec<HistogramBin> {
    let n = ((1.0 / width) - 1e-9).ceil().max(1.0) as usize;
    let mut bins: Vec<HistogramBin> = (0..n)
        .map(|k| HistogramBin {
            low: k as f64 * width,
            high: ((k + 1) as f64 * width).min(1.0),
            count: 0,
        })
        .collect();
    bins.push(HistogramBin {
        low: 1.0,
        high: f64::INFINITY,
        count: 0,
    });
    for &e in errs {
        let k = if e >= 1.0 {
            n
        } else {
            ((e / width).floor().max(0.0) as usize).min(n - 1)
        };
        bins[k].count += 1;
    }
    bins
}

/// Median with the lower-of-two convention for even counts.
pub fn median_lower(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(v[(v.len() - 1) / 2])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchFailure {
    pub option_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub forecasts: Vec<Forecast>,
    pub failures: Vec<BatchFailure>,
    pub err_histogram: Vec<HistogramBin>,
    pub median_err: Option<f64>,
}

impl BatchReport {
    pub fn from_results<'a>(
        blocks: &[DataBlock],
        results: impl IntoIterator<Item = std::result::Result<&'a Forecast, String>>,
        bin_width: f64,
    ) -> Self {
        let mut forecasts = Vec::new();
        let mut failures = Vec::new();
        for (block, r) in blocks.iter().zip(results) {
            match r {
                Ok(f) => forecasts.push(f.clone()),
                Err(error) => failures.push(BatchFailure {
                    option_id: block.option_id.clone(),
                    error,
                }),
            }
        }
        let errs: Vec<f64> = forecasts.iter().filter_map(|f| f.err).collect();
        Self {
            err_histogram: err_histogram(&errs, bin_width),
            median_err: median_lower(&errs),
            forecasts,
            failures,
        }
    }

    pub fn write_histogram_csv<W: Write>(&self, w: W) -> Result<()> {
        write_histogram_csv(w, &self.err_histogram)
    }
}

pub fn write_histogram_csv<W: Write>(w: W, bins: &[HistogramBin]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["bin_low", "bin_high", "count"])?;
    for b in bins {
        out.write_record([b.low.to_string(), b.high.to_string(), b.count.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Solves every block, in input order, on up to `cfg.parallelism` threads.
pub fn solve_batch(blocks: &[DataBlock], cfg: &PipelineConfig) -> Vec<Result<Solved>> {
    if cfg.parallelism <= 1 {
        return blocks.iter().map(|b| solve_block(b, cfg)).collect();
    }
    match rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
    {
        Ok(pool) => pool.install(|| blocks.par_iter().map(|b| solve_block(b, cfg)).collect()),
        Err(_) => blocks.iter().map(|b| solve_block(b, cfg)).collect(),
    }
}

/// Forecasts a batch. Per-block failures are collected, never fatal.
pub fn run_batch(blocks: &[DataBlock], cfg: &PipelineConfig) -> BatchReport {
    let solved = solve_batch(blocks, cfg);
    BatchReport::from_results(
        blocks,
        solved
            .iter()
            .map(|r| r.as_ref().map(|s| &s.forecast).map_err(Error::to_string)),
        cfg.hist_bin_width,
    )
}

/// Writes a full minimizer: `# option_id=`, `# M=`, `# beta=` header lines,
/// then one CSV row per time level `j = 0..M`.
pub fn write_minimizer<W: Write>(
    mut w: W,
    option_id: &str,
    beta: f64,
    grid: &SolutionGrid,
) -> Result<()> {
    writeln!(w, "# option_id={option_id}")?;
    writeln!(w, "# M={}", grid.spec.m)?;
    writeln!(w, "# beta={beta}")?;
    for row in grid.rows() {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// File-system safe name for a minimizer file.
pub fn minimizer_file_name(option_id: &str) -> String {
    let clean: String = option_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{clean}.csv")
}
