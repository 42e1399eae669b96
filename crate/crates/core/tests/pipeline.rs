use bsfwd::backtest::{run_backtest, StrategyConfig, TradeMethod};
use bsfwd::grid::{extrapolate_boundary, BoundaryMode, GridSpec};
use bsfwd::io::{read_blocks, read_forecasts, write_blocks, write_forecasts};
use bsfwd::operator::{assemble, read_dump, AssembledSystem};
use bsfwd::pipeline::{run_batch, solve_block, PipelineConfig};
use bsfwd::solver::{beta_search, dense_oracle_solve, minimize_cg, SolverConfig};
use bsfwd::synth::{generate, SynthConfig, SynthModel};

#[test]
fn dumped_system_reloads_into_the_dense_oracle() {
    let block = &generate(1, &SynthConfig::new(SynthModel::GbmDrift, 21))[0];
    let spec = GridSpec::from_block(block, 9).unwrap();
    let bd = extrapolate_boundary(block, BoundaryMode::Quadratic, 0.01).unwrap();
    let sys = assemble(&spec, &bd, true).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("system.txt");
    sys.write_dump(std::fs::File::create(&path).unwrap())
        .unwrap();
    let dumped = read_dump(std::io::BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    assert_eq!(dumped.l, sys.l);
    assert_eq!(dumped.b, sys.b);
    assert_eq!(dumped.f, sys.f);

    let reloaded = AssembledSystem {
        l: dumped.l,
        b: dumped.b,
        f: dumped.f,
        ..sys.clone()
    };
    let cfg = SolverConfig {
        cg_tol: 1e-13,
        ..Default::default()
    };
    let cg = minimize_cg(&sys, &cfg).unwrap();
    let dense = dense_oracle_solve(&reloaded, cfg.beta).unwrap();
    let err: f64 =
        cg.u.iter()
            .zip(&dense)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
    let scale: f64 = dense.iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert!(err <= 1e-8 * scale, "{err} vs {scale}");
}

#[test]
fn drifting_market_mostly_rises() {
    let blocks = generate(500, &SynthConfig::new(SynthModel::GbmDrift, 0));
    let up = blocks
        .iter()
        .filter(|b| b.real_plus1.unwrap() > b.today().option_mid())
        .count();
    assert!(up > 250, "{up} of 500");
}

#[test]
fn constant_market_is_forecast_exactly() {
    let blocks = generate(20, &SynthConfig::new(SynthModel::Constant, 3));
    let report = run_batch(&blocks, &PipelineConfig::default());
    assert!(report.failures.is_empty());
    for (b, f) in blocks.iter().zip(&report.forecasts) {
        let mid = b.today().option_mid();
        assert!(
            (f.est_plus1 - mid).abs() <= 1e-6 * mid.max(1.0),
            "{} vs {mid}",
            f.est_plus1
        );
        assert!((f.est_plus2 - mid).abs() <= 1e-6 * mid.max(1.0));
    }
}

#[test]
fn files_round_trip_through_the_batch() {
    let blocks = generate(30, &SynthConfig::new(SynthModel::Noisy, 4));
    let dir = tempfile::tempdir().unwrap();
    let bpath = dir.path().join("blocks.csv");
    write_blocks(std::fs::File::create(&bpath).unwrap(), &blocks).unwrap();
    let (loaded, issues) = read_blocks(std::fs::File::open(&bpath).unwrap(), true).unwrap();
    assert!(issues.is_empty());

    let report = run_batch(&loaded, &PipelineConfig::default());
    let fpath = dir.path().join("forecasts.csv");
    write_forecasts(std::fs::File::create(&fpath).unwrap(), &report.forecasts).unwrap();
    let forecasts = read_forecasts(std::fs::File::open(&fpath).unwrap()).unwrap();
    assert_eq!(forecasts, report.forecasts);

    let strat = StrategyConfig::default();
    let a = run_backtest(
        &blocks,
        &report.forecasts,
        TradeMethod::BlackScholes,
        &strat,
    );
    let b = run_backtest(&loaded, &forecasts, TradeMethod::BlackScholes, &strat);
    assert_eq!(a, b);
}

#[test]
fn solved_grid_keeps_prescribed_values() {
    let block = &generate(1, &SynthConfig::new(SynthModel::Noisy, 8))[0];
    let s = solve_block(block, &PipelineConfig::default()).unwrap();
    let spec = s.grid.spec;
    let today = block.today();
    assert_eq!(s.grid.get(0, 0), today.option_bid);
    assert_eq!(s.grid.get(spec.m - 1, 0), today.option_ask);
    assert!(s.result.converged);
}

#[test]
fn beta_search_prefers_the_lowest_median_error() {
    let blocks = generate(12, &SynthConfig::new(SynthModel::Noisy, 9));
    let cfg = PipelineConfig {
        grid_size: 9,
        ..Default::default()
    };
    let candidates = [0.001, 0.05, 0.5];
    let best = beta_search(&blocks, &candidates, &cfg).unwrap();
    let median = |beta: f64| {
        let mut c = cfg.clone();
        c.solver.beta = beta;
        run_batch(&blocks, &c).median_err.unwrap()
    };
    let best_err = median(best);
    for b in candidates {
        assert!(best_err <= median(b));
    }
}
