//! Flat TOML configuration file and its merge with command-line flags.
//!
//! Every value is resolved as flag, then file, then built-in default.

use std::path::Path;

use serde::Deserialize;

use bsfwd::backtest::StrategyConfig;
use bsfwd::grid::{check_grid_size, BoundaryMode};
use bsfwd::ml::TrainConfig;
use bsfwd::pipeline::PipelineConfig;
use bsfwd::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub grid_size: Option<usize>,
    pub beta: Option<f64>,
    pub boundary_mode: Option<String>,
    pub cg_tol: Option<f64>,
    pub cg_max_iter: Option<usize>,
    pub row_normalize: Option<bool>,
    pub price_floor: Option<f64>,
    pub parallelism: Option<usize>,
    pub contract_size: Option<f64>,
    pub threshold_margin: Option<f64>,
    pub exit_day: Option<u8>,
    pub seed: Option<u64>,
    pub learning_rate: Option<f64>,
    pub iterations: Option<usize>,
    pub lambda: Option<f64>,
    pub k_folds: Option<usize>,
    pub train_fraction: Option<f64>,
    pub validation_fraction: Option<f64>,
    pub test_fraction: Option<f64>,
    pub hidden: Option<Vec<usize>>,
    pub threshold: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|source| Error::File {
            path: path.display().to_string(),
            source,
        })?;
        toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))
    }
}

/// Forecast settings given on the command line; `None` defers to the file.
#[derive(Debug, Clone, Default)]
pub struct PipelineFlags {
    pub grid_size: Option<usize>,
    pub beta: Option<f64>,
    pub boundary_mode: Option<String>,
    pub cg_tol: Option<f64>,
    pub cg_max_iter: Option<usize>,
    pub no_row_normalize: bool,
    pub price_floor: Option<f64>,
    pub parallelism: Option<usize>,
}

fn field<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{name}: {msg}")),
        other => Error::Config(format!("{name}: {other}")),
    })
}

pub fn pipeline_config(flags: &PipelineFlags, file: &FileConfig) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    cfg.grid_size = flags.grid_size.or(file.grid_size).unwrap_or(cfg.grid_size);
    field("grid_size", check_grid_size(cfg.grid_size))?;
    cfg.solver.beta = flags.beta.or(file.beta).unwrap_or(cfg.solver.beta);
    if !(cfg.solver.beta > 0.0 && cfg.solver.beta < 1.0) {
        return Err(Error::Config(format!(
            "beta: must lie in (0, 1), got {}",
            cfg.solver.beta
        )));
    }
    if let Some(mode) = flags.boundary_mode.as_ref().or(file.boundary_mode.as_ref()) {
        cfg.boundary_mode = field("boundary_mode", mode.parse::<BoundaryMode>())?;
    }
    cfg.solver.cg_tol = flags.cg_tol.or(file.cg_tol).unwrap_or(cfg.solver.cg_tol);
    cfg.solver.cg_max_iter = flags
        .cg_max_iter
        .or(file.cg_max_iter)
        .or(cfg.solver.cg_max_iter);
    cfg.solver.row_normalize = if flags.no_row_normalize {
        false
    } else {
        file.row_normalize.unwrap_or(cfg.solver.row_normalize)
    };
    field("solver", cfg.solver.validate())?;
    cfg.price_floor = flags
        .price_floor
        .or(file.price_floor)
        .unwrap_or(cfg.price_floor);
    cfg.parallelism = flags
        .parallelism
        .or(file.parallelism)
        .unwrap_or(cfg.parallelism);
    field("pipeline", cfg.validate())?;
    Ok(cfg)
}

#[derive(Debug, Clone, Default)]
pub struct StrategyFlags {
    pub contract_size: Option<f64>,
    pub threshold_margin: Option<f64>,
    pub exit_day: Option<u8>,
}

pub fn strategy_config(flags: &StrategyFlags, file: &FileConfig) -> Result<StrategyConfig> {
    let d = StrategyConfig::default();
    let cfg = StrategyConfig {
        contract_size: flags
            .contract_size
            .or(file.contract_size)
            .unwrap_or(d.contract_size),
        threshold_margin: flags
            .threshold_margin
            .or(file.threshold_margin)
            .unwrap_or(d.threshold_margin),
        exit_day: flags.exit_day.or(file.exit_day).unwrap_or(d.exit_day),
        hist_bin_width: d.hist_bin_width,
    };
    field("strategy", cfg.validate())?;
    Ok(cfg)
}

#[derive(Debug, Clone, Default)]
pub struct TrainFlags {
    pub learning_rate: Option<f64>,
    pub iterations: Option<usize>,
    pub lambda: Option<f64>,
    pub k_folds: Option<usize>,
    pub seed: Option<u64>,
}

pub fn train_config(flags: &TrainFlags, file: &FileConfig) -> Result<TrainConfig> {
    let d = TrainConfig::default();
    let cfg = TrainConfig {
        learning_rate: flags
            .learning_rate
            .or(file.learning_rate)
            .unwrap_or(d.learning_rate),
        iterations: flags.iterations.or(file.iterations).unwrap_or(d.iterations),
        lambda: flags.lambda.or(file.lambda).unwrap_or(d.lambda),
        k_folds: flags.k_folds.or(file.k_folds).unwrap_or(d.k_folds),
        seed: flags.seed.or(file.seed).unwrap_or(d.seed),
        train_fraction: file.train_fraction.unwrap_or(d.train_fraction),
        validation_fraction: file.validation_fraction.unwrap_or(d.validation_fraction),
        test_fraction: file.test_fraction.unwrap_or(d.test_fraction),
        hidden: file.hidden.clone().unwrap_or(d.hidden),
    };
    field("ml", cfg.validate())?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> FileConfig {
        toml::from_str(text).unwrap()
    }

    #[test]
    fn flag_beats_file_beats_default() {
        let file = parse("grid_size = 31\nbeta = 0.2\n");
        let flags = PipelineFlags {
            grid_size: Some(11),
            ..Default::default()
        };
        let cfg = pipeline_config(&flags, &file).unwrap();
        assert_eq!(cfg.grid_size, 11);
        assert_eq!(cfg.solver.beta, 0.2);
        assert_eq!(cfg.solver.cg_tol, 1e-8);
        assert!(cfg.solver.row_normalize);
    }

    #[test]
    fn row_normalize_precedence() {
        let off = parse("row_normalize = false\n");
        assert!(
            !pipeline_config(&PipelineFlags::default(), &off)
                .unwrap()
                .solver
                .row_normalize
        );
        let flags = PipelineFlags {
            no_row_normalize: true,
            ..Default::default()
        };
        assert!(
            !pipeline_config(&flags, &FileConfig::default())
                .unwrap()
                .solver
                .row_normalize
        );
    }

    #[test]
    fn errors_name_the_field() {
        let e = pipeline_config(&PipelineFlags::default(), &parse("grid_size = 20\n")).unwrap_err();
        assert!(e.to_string().contains("grid_size: M must be odd"), "{e}");
        let e = pipeline_config(&PipelineFlags::default(), &parse("beta = 2.0\n")).unwrap_err();
        assert!(e.to_string().contains("beta:"), "{e}");
        let e = pipeline_config(
            &PipelineFlags::default(),
            &parse("boundary_mode = \"cubic\"\n"),
        )
        .unwrap_err();
        assert!(e.to_string().contains("boundary_mode:"), "{e}");
        let e = strategy_config(&StrategyFlags::default(), &parse("exit_day = 3\n")).unwrap_err();
        assert!(e.to_string().contains("exit_day"), "{e}");
        let e = train_config(&TrainFlags::default(), &parse("k_folds = 1\n")).unwrap_err();
        assert!(e.to_string().contains("k_folds"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("gridsize = 21\n").is_err());
    }

    #[test]
    fn train_and_strategy_precedence() {
        let file = parse(
            "learning_rate = 0.1\niterations = 40\nseed = 3\ncontract_size = 10\nhidden = [8, 4]\n",
        );
        let t = train_config(
            &TrainFlags {
                iterations: Some(60),
                ..Default::default()
            },
            &file,
        )
        .unwrap();
        assert_eq!((t.learning_rate, t.iterations, t.seed), (0.1, 60, 3));
        assert_eq!(t.hidden, vec![8, 4]);
        assert_eq!(t.lambda, 0.01);
        let s = strategy_config(
            &StrategyFlags {
                threshold_margin: Some(0.05),
                ..Default::default()
            },
            &file,
        )
        .unwrap();
        assert_eq!(
            (s.contract_size, s.threshold_margin, s.exit_day),
            (10.0, 0.05, 1)
        );
    }
}
