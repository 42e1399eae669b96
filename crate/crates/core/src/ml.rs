//! Neural-network trade filter.
//!
//! Each traded option becomes a 13-dimensional feature vector (the two
//! forecasts, today's stock quotes, and the option quotes and volatility for
//! the three historical days) labelled 1 when the unfiltered trade made money.
//! A fully connected sigmoid network `13 -> 50 -> 25 -> 14 -> 1` is trained by
//! full-batch gradient descent on the L2-regularized cross-entropy
//!
//! ```text
//! L(theta) = 1/m sum[-y log h - (1 - y) log(1 - h)] + lambda / (2m) sum w^2
//! ```
//!
//! and then used to veto trades whose predicted probability of profit is
//! below a threshold.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backtest::{
    backtest_trades, Action, BacktestReport, StrategyConfig, TradeMethod, TradeRecord,
};
use crate::error::{Error, Result};
use crate::grid::DataBlock;
use crate::pipeline::Forecast;

pub const N_FEATURES: usize = 13;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "est_p1",
    "est_p2",
    "stock_bid_0",
    "stock_ask_0",
    "bid_m2",
    "ask_m2",
    "vol_m2",
    "bid_m1",
    "ask_m1",
    "vol_m1",
    "bid_0",
    "ask_0",
    "vol_0",
];

const OUTPUT_CLAMP: f64 = 1e-12;
const STD_FLOOR: f64 = 1e-12;

/// Iterations per recorded point of the learning curve.
pub const ITERATIONS_PER_EPOCH: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub option_id: String,
    pub x: [f64; N_FEATURES],
    pub y: u8,
}

pub fn feature_row(block: &DataBlock, forecast: &Forecast) -> [f64; N_FEATURES] {
    let [d2, d1, d0] = &block.days;
    [
        forecast.est_plus1,
        forecast.est_plus2,
        d0.stock_bid.unwrap_or(f64::NAN),
        d0.stock_ask.unwrap_or(f64::NAN),
        d2.option_bid,
        d2.option_ask,
        d2.volatility,
        d1.option_bid,
        d1.option_ask,
        d1.volatility,
        d0.option_bid,
        d0.option_ask,
        d0.volatility,
    ]
}

/// One labelled vector per executed trade. Trades whose block or forecast is
/// missing are returned by id in the second list.
pub fn build_features(
    blocks: &[DataBlock],
    forecasts: &[Forecast],
    trades: &[TradeRecord],
) -> (Vec<FeatureVector>, Vec<String>) {
    use std::collections::HashMap;
    let blocks_by_id: HashMap<&str, &DataBlock> =
        blocks.iter().map(|b| (b.option_id.as_str(), b)).collect();
    let fc_by_id: HashMap<&str, &Forecast> = forecasts
        .iter()
        .map(|f| (f.option_id.as_str(), f))
        .collect();
    let mut out = Vec::new();
    let mut missing = Vec::new();
    for t in trades.iter().filter(|t| t.action == Action::Buy) {
        match (
            blocks_by_id.get(t.option_id.as_str()),
            fc_by_id.get(t.option_id.as_str()),
        ) {
            (Some(b), Some(f)) => out.push(FeatureVector {
                option_id: t.option_id.clone(),
                x: feature_row(b, f),
                y: u8::from(t.pnl > 0.0),
            }),
            _ => missing.push(t.option_id.clone()),
        }
    }
    (out, missing)
}

/// Per-feature mean and standard deviation of a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn fit(data: &[FeatureVector]) -> Self {
        let n = data.len().max(1) as f64;
        let mut mean = vec![0.0; N_FEATURES];
        for v in data {
            for (m, x) in mean.iter_mut().zip(&v.x) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut std = vec![0.0; N_FEATURES];
        for v in data {
            for ((s, x), m) in std.iter_mut().zip(&v.x).zip(&mean) {
                *s += (x - m) * (x - m);
            }
        }
        std.iter_mut()
            .for_each(|s| *s = (*s / n).sqrt().max(STD_FLOOR));
        Self { mean, std }
    }

    pub fn apply(&self, x: &[f64; N_FEATURES]) -> [f64; N_FEATURES] {
        let mut out = [0.0; N_FEATURES];
        for (k, o) in out.iter_mut().enumerate() {
            *o = (x[k] - self.mean[k]) / self.std[k];
        }
        out
    }

    pub fn apply_all(&self, data: &[FeatureVector]) -> Vec<FeatureVector> {
        data.iter()
            .map(|v| FeatureVector {
                x: self.apply(&v.x),
                ..v.clone()
            })
            .collect()
    }
}

/// Standardizes `train` with its own statistics and returns them for reuse on
/// validation and test data.
pub fn normalize_features(train: &[FeatureVector]) -> Result<(Vec<FeatureVector>, NormStats)> {
    if train.is_empty() {
        return Err(Error::EmptyInput("cannot normalize an empty feature set"));
    }
    let stats = NormStats::fit(train);
    Ok((stats.apply_all(train), stats))
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fully connected network with sigmoid units throughout. Weights are stored
/// row-major as `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Network {
    /// Uniform `[-r, r]` weights with `r = sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(sizes: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-r..=r))
                    .collect(),
            );
            biases.push(vec![0.0; fan_out]);
        }
        Self {
            sizes: sizes.to_vec(),
            weights,
            biases,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            sizes: self.sizes.clone(),
            weights: self.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.sizes.len() < 2 || self.sizes.last() != Some(&1) {
            return bad(format!(
                "layer sizes {:?} must end in a single output",
                self.sizes
            ));
        }
        if self.weights.len() != self.sizes.len() - 1 || self.biases.len() != self.weights.len() {
            return bad("layer count does not match sizes".into());
        }
        for (l, w) in self.sizes.windows(2).enumerate() {
            if self.weights[l].len() != w[0] * w[1] || self.biases[l].len() != w[1] {
                return bad(format!("layer {l} has wrong dimensions"));
            }
        }
        let finite = self
            .weights
            .iter()
            .chain(&self.biases)
            .flatten()
            .all(|v| v.is_finite());
        if !finite {
            return bad("non-finite parameter".into());
        }
        Ok(())
    }

    /// Activations of every layer, input included.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(x.to_vec());
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let prev = &acts[l];
            let next: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &self.weights[l][o * n_in..(o + 1) * n_in];
                    sigmoid(
                        self.biases[l][o] + row.iter().zip(prev).map(|(a, b)| a * b).sum::<f64>(),
                    )
                })
                .collect();
            acts.push(next);
        }
        acts
    }

    /// Output probability, clamped into `[1e-12, 1 - 1e-12]`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let h = *self.activations(x).last().unwrap().first().unwrap();
        h.clamp(OUTPUT_CLAMP, 1.0 - OUTPUT_CLAMP)
    }

    fn weight_penalty(&self) -> f64 {
        self.weights.iter().flatten().map(|w| w * w).sum()
    }

    /// Applies `self -= rate * grad`.
    fn step(&mut self, grad: &Network, rate: f64) {
        for (p, g) in self
            .weights
            .iter_mut()
            .chain(self.biases.iter_mut())
            .zip(grad.weights.iter().chain(&grad.biases))
        {
            for (pi, gi) in p.iter_mut().zip(g) {
                *pi -= rate * gi;
            }
        }
    }
}

/// Regularized cross-entropy; biases are not penalized.
pub fn loss(net: &Network, batch: &[FeatureVector], lambda: f64) -> f64 {
    let m = batch.len() as f64;
    let data: f64 = batch
        .iter()
        .map(|v| {
            let h = net.predict(&v.x);
            if v.y == 1 {
                -h.ln()
            } else {
                -(1.0 - h).ln()
            }
        })
        .sum();
    data / m + lambda / (2.0 * m) * net.weight_penalty()
}

/// Mean squared error between predicted probability and label.
pub fn eval_mse(net: &Network, batch: &[FeatureVector]) -> f64 {
    batch
        .iter()
        .map(|v| (net.predict(&v.x) - f64::from(v.y)).powi(2))
        .sum::<f64>()
        / batch.len() as f64
}

pub fn accuracy(net: &Network, batch: &[FeatureVector]) -> f64 {
    let hits = batch
        .iter()
        .filter(|v| u8::from(net.predict(&v.x) >= 0.5) == v.y)
        .count();
    hits as f64 / batch.len() as f64
}

/// Backpropagated gradient of [`loss`].
pub fn gradient(net: &Network, batch: &[FeatureVector], lambda: f64) -> Network {
    let m = batch.len() as f64;
    let mut grad = net.zeros_like();
    let layers = net.weights.len();
    for v in batch {
        let acts = net.activations(&v.x);
        let h = acts[layers][0];
        // Clamped outputs have zero derivative.
        let d_out = if (OUTPUT_CLAMP..=1.0 - OUTPUT_CLAMP).contains(&h) {
            (h - f64::from(v.y)) / m
        } else {
            0.0
        };
        let mut delta = vec![d_out];
        for l in (0..layers).rev() {
            let n_in = net.sizes[l];
            let prev = &acts[l];
            for (o, &d) in delta.iter().enumerate() {
                grad.biases[l][o] += d;
                let row = &mut grad.weights[l][o * n_in..(o + 1) * n_in];
                for (g, a) in row.iter_mut().zip(prev) {
                    *g += d * a;
                }
            }
            if l > 0 {
                delta = (0..n_in)
                    .map(|i| {
                        let back: f64 = delta
                            .iter()
                            .enumerate()
                            .map(|(o, d)| d * net.weights[l][o * n_in + i])
                            .sum();
                        back * prev[i] * (1.0 - prev[i])
                    })
                    .collect();
            }
        }
    }
    for (g, w) in grad.weights.iter_mut().zip(&net.weights) {
        for (gi, wi) in g.iter_mut().zip(w) {
            *gi += lambda / m * wi;
        }
    }
    grad
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub lambda: f64,
    pub k_folds: usize,
    pub seed: u64,
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub test_fraction: f64,
    pub hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.00005,
            iterations: 200,
            lambda: 0.01,
            k_folds: 10,
            seed: 0,
            train_fraction: 0.6,
            validation_fraction: 0.2,
            test_fraction: 0.2,
            hidden: vec![50, 25, 14],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return fail(format!(
                "learning_rate must be nonnegative, got {}",
                self.learning_rate
            ));
        }
        if self.iterations == 0 {
            return fail("iterations must be at least 1".into());
        }
        if !(self.lambda >= 0.0) {
            return fail(format!("lambda must be nonnegative, got {}", self.lambda));
        }
        if self.k_folds < 2 {
            return fail(format!("k_folds must be at least 2, got {}", self.k_folds));
        }
        let fr = [
            self.train_fraction,
            self.validation_fraction,
            self.test_fraction,
        ];
        if fr.iter().any(|f| !(0.0..=1.0).contains(f))
            || (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return fail(format!(
                "split fractions {fr:?} must be in [0, 1] and sum to 1"
            ));
        }
        if self.hidden.contains(&0) {
            return fail("hidden layer sizes must be positive".into());
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![N_FEATURES];
        s.extend(&self.hidden);
        s.push(1);
        s
    }
}

/// Training loss and evaluation MSE every [`ITERATIONS_PER_EPOCH`] iterations,
/// starting before the first step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub epoch: Vec<usize>,
    pub train_loss: Vec<f64>,
    pub eval_loss: Vec<f64>,
}

/// Full-batch gradient descent from a seeded initialization.
pub fn train(
    train_set: &[FeatureVector],
    eval_set: &[FeatureVector],
    cfg: &TrainConfig,
) -> Result<(Network, LearningCurve)> {
    if train_set.is_empty() {
        return Err(Error::EmptyInput("training set is empty"));
    }
    let mut net = Network::init(&cfg.layer_sizes(), cfg.seed);
    let mut curve = LearningCurve {
        epoch: Vec::new(),
        train_loss: Vec::new(),
        eval_loss: Vec::new(),
    };
    for it in 0..=cfg.iterations {
        if it % ITERATIONS_PER_EPOCH == 0 || it == cfg.iterations {
            let l = loss(&net, train_set, cfg.lambda);
            if !l.is_finite() {
                return Err(Error::Diverged {
                    iteration: it,
                    loss: l,
                });
            }
            curve.epoch.push(it.div_ceil(ITERATIONS_PER_EPOCH));
            curve.train_loss.push(l);
            curve.eval_loss.push(if eval_set.is_empty() {
                f64::NAN
            } else {
                eval_mse(&net, eval_set)
            });
        }
        if it == cfg.iterations {
            break;
        }
        let g = gradient(&net, train_set, cfg.lambda);
        net.step(&g, cfg.learning_rate);
        if net.validate().is_err() {
            return Err(Error::Diverged {
                iteration: it + 1,
                loss: f64::NAN,
            });
        }
    }
    Ok((net, curve))
}

/// Shuffled train/validation/test index split.
pub fn split_indices(n: usize, cfg: &TrainConfig) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let n_train = (cfg.train_fraction * n as f64).round() as usize;
    let n_val = ((cfg.validation_fraction * n as f64).round() as usize).min(n - n_train.min(n));
    let n_train = n_train.min(n);
    let test = idx.split_off(n_train + n_val);
    let val = idx.split_off(n_train);
    (idx, val, test)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveWithBands {
    pub epoch: Vec<usize>,
    pub mean_eval_loss: Vec<f64>,
    pub std_eval_loss: Vec<f64>,
}

impl CurveWithBands {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["epoch", "mean_eval_loss", "std_eval_loss"])?;
        for k in 0..self.epoch.len() {
            out.write_record([
                self.epoch[k].to_string(),
                self.mean_eval_loss[k].to_string(),
                self.std_eval_loss[k].to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Standard deviation of the last three epoch means relative to their mean.
    pub fn tail_variation(&self) -> f64 {
        let n = self.mean_eval_loss.len();
        let tail = &self.mean_eval_loss[n.saturating_sub(3)..];
        let (mean, std) = mean_std(tail);
        std / mean
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Contiguous folds of the seeded shuffle, sizes differing by at most one.
pub fn fold_indices(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(idx[start..start + len].to_vec());
        start += len;
    }
    folds
}

/// Trains once per fold on the remaining folds (normalized with their own
/// statistics) and reports the per-epoch mean and standard deviation of the
/// held-out MSE.
pub fn k_fold_validate(data: &[FeatureVector], cfg: &TrainConfig) -> Result<CurveWithBands> {
    let k = cfg.k_folds;
    if data.len() < 2 * k {
        return Err(Error::TooFewSamples {
            need: 2 * k,
            got: data.len(),
        });
    }
    let folds = fold_indices(data.len(), k, cfg.seed);
    let curves: Vec<Result<LearningCurve>> = folds
        .par_iter()
        .enumerate()
        .map(|(f, held)| {
            let rest: Vec<FeatureVector> = folds
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, ix)| ix.iter().map(|&i| data[i].clone()))
                .collect();
            let held: Vec<FeatureVector> = held.iter().map(|&i| data[i].clone()).collect();
            let (rest, stats) = normalize_features(&rest)?;
            let held = stats.apply_all(&held);
            train(&rest, &held, cfg).map(|(_, c)| c)
        })
        .collect();
    let curves = curves.into_iter().collect::<Result<Vec<_>>>()?;
    let epochs = curves[0].epoch.clone();
    let (mut mean, mut std) = (Vec::new(), Vec::new());
    for e in 0..epochs.len() {
        let vals: Vec<f64> = curves.iter().map(|c| c.eval_loss[e]).collect();
        let (m, s) = mean_std(&vals);
        mean.push(m);
        std.push(s);
    }
    Ok(CurveWithBands {
        epoch: epochs,
        mean_eval_loss: mean,
        std_eval_loss: std,
    })
}

/// Trained network together with the statistics used to normalize its input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterModel {
    pub network: Network,
    pub norm: NormStats,
}

impl FilterModel {
    pub fn probability(&self, raw: &[f64; N_FEATURES]) -> f64 {
        self.network.predict(&self.norm.apply(raw))
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        if self.norm.mean.len() != N_FEATURES || self.norm.std.len() != N_FEATURES {
            return Err(Error::Config(
                "normalization stats must have 13 entries".into(),
            ));
        }
        if self.network.sizes.first() != Some(&N_FEATURES) {
            return Err(Error::Config("network input must have 13 features".into()));
        }
        Ok(())
    }
}

/// Result of the split/normalize/train/evaluate sequence.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: FilterModel,
    pub curve: LearningCurve,
    pub bands: CurveWithBands,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub test_ids: Vec<String>,
}

/// Splits raw features, trains on the training part (normalized by its own
/// statistics), tracks the validation MSE, and scores the test part. The
/// k-fold bands are computed over the training and validation parts.
pub fn train_filter(data: &[FeatureVector], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let (tr, va, te) = split_indices(data.len(), cfg);
    let pick = |ix: &[usize]| ix.iter().map(|&i| data[i].clone()).collect::<Vec<_>>();
    let (train_raw, val_raw, test_raw) = (pick(&tr), pick(&va), pick(&te));
    let (train_n, norm) = normalize_features(&train_raw)?;
    let val_n = norm.apply_all(&val_raw);
    let test_n = norm.apply_all(&test_raw);
    let (network, curve) = train(&train_n, &val_n, cfg)?;
    let mut cv_data = train_raw;
    cv_data.extend(val_raw);
    let bands = k_fold_validate(&cv_data, cfg)?;
    Ok(TrainOutcome {
        train_accuracy: accuracy(&network, &train_n),
        test_accuracy: if test_n.is_empty() {
            f64::NAN
        } else {
            accuracy(&network, &test_n)
        },
        test_ids: test_raw.into_iter().map(|v| v.option_id).collect(),
        model: FilterModel { network, norm },
        curve,
        bands,
    })
}

/// Forecast-method backtest in which trades whose predicted probability of
/// profit is below `threshold` are not executed.
pub fn filtered_backtest(
    blocks: &[DataBlock],
    forecasts: &[Forecast],
    model: &FilterModel,
    threshold: f64,
    cfg: &StrategyConfig,
) -> BacktestReport {
    let (trades, skipped) =
        backtest_trades(blocks, forecasts, TradeMethod::BlackScholes, cfg, |b, f| {
            model.probability(&feature_row(b, f)) >= threshold
        });
    BacktestReport::from_trades(
        TradeMethod::BlackScholes,
        &trades,
        skipped,
        cfg.hist_bin_width,
    )
}
