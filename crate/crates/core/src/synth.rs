//! Seeded synthetic market data.
//!
//! * `gbm_drift`: a geometric Brownian stock path per option with option mids
//!   priced off it (zero-rate call value) plus small quote noise.
//! * `constant`: three identical days; realized prices equal today's mid.
//! * `noisy`: `constant` with relative noise on every quote.
//!
//! Separate fixtures produce labelled data for the trade filter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DataBlock, MarketDay, TAU};
use crate::ml::{FeatureVector, N_FEATURES};
use crate::pipeline::Forecast;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthModel {
    GbmDrift,
    Constant,
    Noisy,
}

impl std::str::FromStr for SynthModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gbm_drift" => Ok(Self::GbmDrift),
            "constant" => Ok(Self::Constant),
            "noisy" => Ok(Self::Noisy),
            other => Err(Error::Config(format!(
                "model must be gbm_drift, constant or noisy; got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub model: SynthModel,
    pub seed: u64,
    /// Annualized stock drift (`gbm_drift`).
    pub drift: f64,
    /// Annualized stock volatility (`gbm_drift`).
    pub volatility: f64,
    /// Relative quote noise; used by `gbm_drift` and `noisy`.
    pub noise: f64,
    /// Option bid/ask spread as a fraction of the mid.
    pub spread: f64,
}

impl SynthConfig {
    pub fn new(model: SynthModel, seed: u64) -> Self {
        Self {
            model,
            seed,
            drift: 1.5,
            volatility: 0.3,
            noise: match model {
                SynthModel::GbmDrift => 0.002,
                SynthModel::Constant => 0.0,
                SynthModel::Noisy => 0.02,
            },
            spread: 0.02,
        }
    }
}

/// Standard normal CDF via the complementary error function.
fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Numerical Recipes `erfcc`, fractional error below 1.2e-7.
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let poly = -z * z - 1.265_512_23
        + t * (1.000_023_68
            + t * (0.374_091_96
                + t * (0.096_784_18
                    + t * (-0.186_288_06
                        + t * (0.278_868_07
                            + t * (-1.135_203_98
                                + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77))))))));
    let r = t * poly.exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

/// Zero-rate Black-Scholes call value.
pub fn call_value(s: f64, k: f64, t: f64, sigma: f64) -> f64 {
    if t <= 0.0 || sigma <= 0.0 {
        return (s - k).max(0.0);
    }
    let sd = sigma * t.sqrt();
    let d1 = ((s / k).ln() + 0.5 * sd * sd) / sd;
    s * norm_cdf(d1) - k * norm_cdf(d1 - sd)
}

const MIN_MID: f64 = 0.05;

fn quote(mid: f64, spread: f64, vol: f64, stock: Option<(f64, f64)>) -> MarketDay {
    let mid = mid.max(MIN_MID);
    let half = (0.5 * spread * mid).max(0.005);
    MarketDay {
        option_bid: (mid - half).max(0.01),
        option_ask: mid + half,
        volatility: vol,
        stock_bid: stock.map(|s| s.0),
        stock_ask: stock.map(|s| s.1),
    }
}

fn stock_quote(s: f64) -> (f64, f64) {
    let half = (0.0001 * s).max(0.005);
    (s - half, s + half)
}

fn gbm_block(id: String, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> DataBlock {
    let s_start = rng.random_range(20.0..200.0);
    let strike = s_start * rng.random_range(0.9..1.1);
    let expiry_days = rng.random_range(20.0..120.0);
    let mut normal = || -> f64 { StandardNormal.sample(rng) };
    // Days -2..=2.
    let mut path = [s_start; 5];
    let (mu, sig) = (cfg.drift, cfg.volatility);
    for k in 1..5 {
        let z = normal();
        path[k] = path[k - 1] * ((mu - 0.5 * sig * sig) * TAU + sig * TAU.sqrt() * z).exp();
    }
    let model_mid = |k: usize| {
        let t = (expiry_days - k as f64) * TAU;
        call_value(path[k], strike, t, sig).max(MIN_MID)
    };
    let mut days = [0usize, 1, 2].map(|k| {
        let mid = model_mid(k) * (1.0 + cfg.noise * normal());
        let vol = sig * (1.0 + 0.05 * normal()).max(0.1);
        quote(mid, cfg.spread, vol, None)
    });
    let (sb, sa) = stock_quote(path[2]);
    days[2].stock_bid = Some(sb);
    days[2].stock_ask = Some(sa);
    DataBlock {
        option_id: id,
        days,
        real_plus1: Some(model_mid(3)),
        real_plus2: Some(model_mid(4)),
    }
}

fn flat_block(id: String, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> DataBlock {
    let s = rng.random_range(20.0..200.0);
    let mid = rng.random_range(0.5..20.0);
    let vol = rng.random_range(0.15..0.6);
    let mut normal = || -> f64 { StandardNormal.sample(rng) };
    let noise = cfg.noise;
    let mut jitter = |v: f64| v * (1.0 + noise * normal());
    let mut days = [0, 1, 2].map(|_| {
        let m = jitter(mid);
        let v = jitter(vol).abs().max(0.01);
        quote(m, cfg.spread, v, None)
    });
    let (sb, sa) = stock_quote(s);
    days[2].stock_bid = Some(sb);
    days[2].stock_ask = Some(sa);
    let real = if noise == 0.0 {
        (days[2].option_mid(), days[2].option_mid())
    } else {
        (jitter(mid).max(0.01), jitter(mid).max(0.01))
    };
    DataBlock {
        option_id: id,
        days,
        real_plus1: Some(real.0),
        real_plus2: Some(real.1),
    }
}

/// `n` blocks with ids `SYN000000`, `SYN000001`, ...
pub fn generate(n: usize, cfg: &SynthConfig) -> Vec<DataBlock> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..n)
        .map(|k| {
            let id = format!("SYN{k:06}");
            match cfg.model {
                SynthModel::GbmDrift => gbm_block(id, cfg, &mut rng),
                SynthModel::Constant | SynthModel::Noisy => flat_block(id, cfg, &mut rng),
            }
        })
        .collect()
}

/// Two Gaussian clusters in 13 dimensions with unit variance and centers
/// `separation` apart, balanced labels.
pub fn gaussian_clusters(n: usize, separation: f64, seed: u64) -> Vec<FeatureVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset = separation / (N_FEATURES as f64).sqrt();
    (0..n)
        .map(|k| {
            let y = (k % 2) as u8;
            let center = if y == 1 { 0.5 * offset } else { -0.5 * offset };
            let mut x = [0.0; N_FEATURES];
            for v in x.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = center + z;
            }
            FeatureVector {
                option_id: format!("G{k:06}"),
                x,
                y,
            }
        })
        .collect()
}

/// Blocks and forecasts for which the forecast strategy always buys and the
/// trade's profitability is carried by today's and yesterday's implied
/// volatility (high for winners, low for losers). All other quotes are noise.
pub fn trade_filter_fixture(n: usize, seed: u64) -> (Vec<DataBlock>, Vec<Forecast>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blocks = Vec::with_capacity(n);
    let mut forecasts = Vec::with_capacity(n);
    for k in 0..n {
        let id = format!("F{k:06}");
        let win = rng.random_bool(0.5);
        let s = rng.random_range(20.0..200.0);
        let mid = rng.random_range(1.0..10.0);
        let signal_vol = |rng: &mut ChaCha8Rng| {
            if win {
                rng.random_range(0.45..0.6)
            } else {
                rng.random_range(0.15..0.3)
            }
        };
        let d_m2 = quote(
            mid * rng.random_range(0.9..1.1),
            0.02,
            rng.random_range(0.15..0.6),
            None,
        );
        let d_m1 = quote(
            mid * rng.random_range(0.9..1.1),
            0.02,
            signal_vol(&mut rng),
            None,
        );
        let d_0 = quote(mid, 0.02, signal_vol(&mut rng), Some(stock_quote(s)));
        let ask = d_0.option_ask;
        let move_ = mid * rng.random_range(0.02..0.1);
        let real1 = if win {
            ask + move_
        } else {
            (ask - move_).max(0.01)
        };
        blocks.push(DataBlock {
            option_id: id.clone(),
            days: [d_m2, d_m1, d_0],
            real_plus1: Some(real1),
            real_plus2: Some(real1),
        });
        let est = ask * rng.random_range(1.02..1.2);
        forecasts.push(Forecast {
            option_id: id,
            est_plus1: est,
            est_plus2: est * rng.random_range(0.98..1.05),
            err: None,
            beta_used: 0.01,
            m_used: 21,
            converged: true,
        });
    }
    (blocks, forecasts)
}
