//! Buy-side trading rule driven by a price predictor, and profit/loss
//! aggregation for the forecast method and the two extrapolation baselines.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::DataBlock;
use crate::pipeline::{Forecast, HistogramBin};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TradeMethod {
    BlackScholes,
    LastPrice,
    AskPrice,
}

impl TradeMethod {
    pub const ALL: [TradeMethod; 3] = [Self::BlackScholes, Self::LastPrice, Self::AskPrice];

    pub fn label(&self) -> &'static str {
        match self {
            Self::BlackScholes => "Black-Scholes",
            Self::LastPrice => "Last price extrapolation",
            Self::AskPrice => "Ask price extrapolation",
        }
    }

    /// Price the rule compares against today's ask.
    pub fn predictor(&self, block: &DataBlock, forecast: &Forecast) -> f64 {
        let today = block.today();
        match self {
            Self::BlackScholes => 0.5 * (forecast.est_plus1 + forecast.est_plus2),
            Self::LastPrice => 0.5 * (today.option_bid + today.option_ask),
            Self::AskPrice => today.option_ask,
        }
    }
}

impl std::str::FromStr for TradeMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bs" | "black_scholes" => Ok(Self::BlackScholes),
            "last" | "last_price" => Ok(Self::LastPrice),
            "ask" | "ask_price" => Ok(Self::AskPrice),
            other => Err(Error::Config(format!(
                "method must be one of bs, last, ask; got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Buy,
    NoTrade,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Profit,
    Loss,
    Zero,
}

impl Outcome {
    pub fn of(pnl: f64) -> Self {
        if pnl.abs() < 1e-9 {
            Self::Zero
        } else if pnl > 0.0 {
            Self::Profit
        } else {
            Self::Loss
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub contract_size: f64,
    /// Buy only when the predictor exceeds today's ask by more than this.
    pub threshold_margin: f64,
    /// 1 exits at tomorrow's realized price, 2 at the day after.
    pub exit_day: u8,
    pub hist_bin_width: f64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            contract_size: 100.0,
            threshold_margin: 0.0,
            exit_day: 1,
            hist_bin_width: 10.0,
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.contract_size > 0.0) {
            return Err(Error::Config("contract_size must be positive".into()));
        }
        if !matches!(self.exit_day, 1 | 2) {
            return Err(Error::Config(format!(
                "exit_day must be 1 or 2, got {}",
                self.exit_day
            )));
        }
        if !(self.hist_bin_width > 0.0) {
            return Err(Error::Config("histogram bin width must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub option_id: String,
    pub method: TradeMethod,
    pub action: Action,
    pub entry_price: f64,
    pub exit_price: f64,
    pub pnl: f64,
    pub outcome: Outcome,
}

/// Buys one contract at today's ask when the method's predictor is above it
/// (plus the margin), and closes at the realized price on the exit day.
pub fn decide_trade(
    block: &DataBlock,
    forecast: &Forecast,
    method: TradeMethod,
    cfg: &StrategyConfig,
) -> Result<TradeRecord> {
    let exit_price = match cfg.exit_day {
        2 => block.real_plus2,
        _ => block.real_plus1,
    }
    .ok_or_else(|| Error::MissingGroundTruth(block.option_id.clone()))?;
    let entry_price = block.today().option_ask;
    let buy = method.predictor(block, forecast) > entry_price + cfg.threshold_margin;
    let pnl = if buy {
        (exit_price - entry_price) * cfg.contract_size
    } else {
        0.0
    };
    Ok(TradeRecord {
        option_id: block.option_id.clone(),
        method,
        action: if buy { Action::Buy } else { Action::NoTrade },
        entry_price,
        exit_price,
        pnl,
        outcome: Outcome::of(pnl),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedOption {
    pub option_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub method: TradeMethod,
    /// Options evaluated (traded or not).
    pub n_options: usize,
    pub n_traded: usize,
    pub n_no_trade: usize,
    pub total_pnl: f64,
    pub gross_profit: f64,
    pub gross_loss: f64,
    /// Percentages over traded options; all zero when nothing traded.
    pub pct_profit: f64,
    pub pct_loss: f64,
    pub pct_zero: f64,
    pub pnl_histogram: Vec<HistogramBin>,
    pub skipped: Vec<SkippedOption>,
}

impl BacktestReport {
    pub fn from_trades(
        method: TradeMethod,
        trades: &[TradeRecord],
        skipped: Vec<SkippedOption>,
        bin_width: f64,
    ) -> Self {
        let traded: Vec<&TradeRecord> = trades.iter().filter(|t| t.action == Action::Buy).collect();
        // Adding 0.0 turns the -0.0 of an empty sum into 0.0.
        let total_pnl = traded.iter().map(|t| t.pnl).sum::<f64>() + 0.0;
        let gross_profit = traded.iter().map(|t| t.pnl.max(0.0)).sum::<f64>() + 0.0;
        let gross_loss = traded.iter().map(|t| (-t.pnl).max(0.0)).sum::<f64>() + 0.0;
        let count = |o: Outcome| traded.iter().filter(|t| t.outcome == o).count();
        let (np, nl, nz) = (
            count(Outcome::Profit),
            count(Outcome::Loss),
            count(Outcome::Zero),
        );
        let pct = |k: usize| {
            if traded.is_empty() {
                0.0
            } else {
                100.0 * k as f64 / traded.len() as f64
            }
        };
        let pnls: Vec<f64> = traded.iter().map(|t| t.pnl).collect();
        Self {
            method,
            n_options: trades.len(),
            n_traded: traded.len(),
            n_no_trade: trades.len() - traded.len(),
            total_pnl,
            gross_profit,
            gross_loss,
            pct_profit: pct(np),
            pct_loss: pct(nl),
            pct_zero: pct(nz),
            pnl_histogram: pnl_histogram(&pnls, bin_width),
            skipped,
        }
    }
}

/// Bins `[k w, (k + 1) w)` covering the observed range, in ascending order.
pub fn pnl_histogram(pnls: &[f64], width: f64) -> Vec<HistogramBin> {
    let mut counts: std::collections::BTreeMap<i64, usize> = Default::default();
    for &p in pnls {
        *counts.entry((p / width).floor() as i64).or_default() += 1;
    }
    let (Some(&lo), Some(&hi)) = (counts.keys().next(), counts.keys().next_back()) else {
        return Vec::new();
    };
    (lo..=hi)
        .map(|k| HistogramBin {
            low: k as f64 * width,
            high: (k + 1) as f64 * width,
            count: counts.get(&k).copied().unwrap_or(0),
        })
        .collect()
}

/// Trades for every block with a matching forecast, in block order. Blocks
/// without forecasts or ground truth, and forecasts without blocks, are
/// reported as skipped. `gate` can veto individual trades.
pub fn backtest_trades(
    blocks: &[DataBlock],
    forecasts: &[Forecast],
    method: TradeMethod,
    cfg: &StrategyConfig,
    mut gate: impl FnMut(&DataBlock, &Forecast) -> bool,
) -> (Vec<TradeRecord>, Vec<SkippedOption>) {
    let by_id: HashMap<&str, &Forecast> = forecasts
        .iter()
        .map(|f| (f.option_id.as_str(), f))
        .collect();
    let mut trades = Vec::with_capacity(blocks.len());
    let mut skipped = Vec::new();
    let skip = |id: &str, reason: &str| SkippedOption {
        option_id: id.to_string(),
        reason: reason.to_string(),
    };
    for block in blocks {
        let Some(f) = by_id.get(block.option_id.as_str()) else {
            skipped.push(skip(&block.option_id, "no forecast"));
            continue;
        };
        match decide_trade(block, f, method, cfg) {
            Ok(mut t) => {
                if t.action == Action::Buy && !gate(block, f) {
                    t.action = Action::NoTrade;
                    t.pnl = 0.0;
                    t.outcome = Outcome::Zero;
                }
                trades.push(t);
            }
            Err(e) => skipped.push(skip(&block.option_id, &e.to_string())),
        }
    }
    let block_ids: std::collections::HashSet<&str> =
        blocks.iter().map(|b| b.option_id.as_str()).collect();
    for f in forecasts {
        if !block_ids.contains(f.option_id.as_str()) {
            skipped.push(skip(&f.option_id, "no data block"));
        }
    }
    (trades, skipped)
}

pub fn run_backtest(
    blocks: &[DataBlock],
    forecasts: &[Forecast],
    method: TradeMethod,
    cfg: &StrategyConfig,
) -> BacktestReport {
    let (trades, skipped) = backtest_trades(blocks, forecasts, method, cfg, |_, _| true);
    BacktestReport::from_trades(method, &trades, skipped, cfg.hist_bin_width)
}

/// Reports laid out as the profit/loss table followed by the percentage table.
pub fn format_tables(reports: &[BacktestReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Profits and losses");
    let _ = writeln!(
        s,
        "{:<28} {:>10} {:>10} {:>18}",
        "Method", "Options", "Traded", "Total profit/loss"
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{:<28} {:>10} {:>10} {:>18.2}",
            r.method.label(),
            r.n_options,
            r.n_traded,
            r.total_pnl
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "Percentages of traded options");
    let _ = writeln!(
        s,
        "{:<28} {:>9} {:>9} {:>9} {:>9}",
        "Method", "profit", "loss", "zero", "no trade"
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{:<28} {:>8.2}% {:>8.2}% {:>8.2}% {:>9}",
            r.method.label(),
            r.pct_profit,
            r.pct_loss,
            r.pct_zero,
            r.n_no_trade
        );
    }
    s
}
