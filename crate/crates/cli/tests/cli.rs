use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bsfwd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bsfwd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth(dir: &Path, n: usize, model: &str, seed: u64) -> std::path::PathBuf {
    let out = dir.join(format!("{model}_{n}_{seed}.csv"));
    let n = n.to_string();
    let seed = seed.to_string();
    let o = bsfwd(&[
        "synth",
        "--n",
        &n,
        "--model",
        model,
        "--seed",
        &seed,
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn missing_input_exits_1_with_path() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("absent.csv");
    let o = bsfwd(&[
        "forecast",
        "--input",
        p(&missing),
        "--out",
        p(&dir.path().join("f.csv")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("absent.csv"), "{}", stderr(&o));
}

#[test]
fn ten_block_file_gives_ten_forecasts() {
    let dir = TempDir::new().unwrap();
    let blocks = synth(dir.path(), 10, "gbm_drift", 1);
    let out = dir.path().join("forecasts.csv");
    let hist = dir.path().join("err_hist.csv");
    let o = bsfwd(&[
        "forecast",
        "--input",
        p(&blocks),
        "--out",
        p(&out),
        "--hist",
        p(&hist),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 11);
    assert!(text.starts_with("option_id,est_p1,est_p2,err,beta,M,converged\n"));
    let counts: usize = std::fs::read_to_string(&hist)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(counts, 10);
}

#[test]
fn even_grid_size_is_rejected() {
    let dir = TempDir::new().unwrap();
    let blocks = synth(dir.path(), 2, "constant", 1);
    let o = bsfwd(&[
        "forecast",
        "--input",
        p(&blocks),
        "--out",
        p(&dir.path().join("f.csv")),
        "--grid-size",
        "20",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("M must be odd"), "{}", stderr(&o));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let a = synth(dir.path(), 15, "noisy", 4);
    let b = dir.path().join("again.csv");
    let o = bsfwd(&[
        "synth",
        "--n",
        "15",
        "--model",
        "noisy",
        "--seed",
        "4",
        "--out",
        p(&b),
    ]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let run = |name: &str, par: &str| {
        let out = dir.path().join(name);
        let mins = dir.path().join(format!("{name}.min"));
        let o = bsfwd(&[
            "forecast",
            "--input",
            p(&a),
            "--out",
            p(&out),
            "--parallelism",
            par,
            "--minimizer-dir",
            p(&mins),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let first = std::fs::read(mins.join("SYN000000.csv")).unwrap();
        (std::fs::read(out).unwrap(), first)
    };
    assert_eq!(run("f1.csv", "1"), run("f2.csv", "4"));
}

#[test]
fn flag_overrides_config_file() {
    let dir = TempDir::new().unwrap();
    let blocks = synth(dir.path(), 3, "constant", 2);
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "grid_size = 9\nbeta = 0.2\n").unwrap();
    let out = dir.path().join("f.csv");

    let o = bsfwd(&[
        "forecast",
        "--input",
        p(&blocks),
        "--out",
        p(&out),
        "--config",
        p(&cfg),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let row = std::fs::read_to_string(&out)
        .unwrap()
        .lines()
        .nth(1)
        .unwrap()
        .to_string();
    assert!(row.ends_with(",0.2,9,true"), "{row}");

    let o = bsfwd(&[
        "forecast",
        "--input",
        p(&blocks),
        "--out",
        p(&out),
        "--config",
        p(&cfg),
        "--grid-size",
        "7",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let row = std::fs::read_to_string(&out)
        .unwrap()
        .lines()
        .nth(1)
        .unwrap()
        .to_string();
    assert!(row.ends_with(",0.2,7,true"), "{row}");

    let o = bsfwd(&["forecast", "--input", p(&blocks), "--out", p(&out)]);
    assert!(o.status.success());
    let row = std::fs::read_to_string(&out)
        .unwrap()
        .lines()
        .nth(1)
        .unwrap()
        .to_string();
    assert!(row.ends_with(",0.01,21,true"), "{row}");
}

#[test]
fn bad_config_names_the_field() {
    let dir = TempDir::new().unwrap();
    let blocks = synth(dir.path(), 1, "constant", 2);
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "beta = 3.0\n").unwrap();
    let o = bsfwd(&[
        "forecast",
        "--input",
        p(&blocks),
        "--out",
        p(&dir.path().join("f.csv")),
        "--config",
        p(&cfg),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("beta:"), "{}", stderr(&o));

    std::fs::write(&cfg, "grid = 21\n").unwrap();
    let o = bsfwd(&[
        "forecast",
        "--input",
        p(&blocks),
        "--out",
        p(&dir.path().join("f.csv")),
        "--config",
        p(&cfg),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("grid"), "{}", stderr(&o));
}

#[test]
fn malformed_rows_are_skipped_or_fatal() {
    let dir = TempDir::new().unwrap();
    let blocks = synth(dir.path(), 3, "constant", 2);
    let mut text = std::fs::read_to_string(&blocks).unwrap();
    text.push_str("BAD,1,oops,0.3,1,1.2,0.3,1,1.2,0.3,50,50.1,,\n");
    std::fs::write(&blocks, text).unwrap();
    let out = dir.path().join("f.csv");
    let o = bsfwd(&["forecast", "--input", p(&blocks), "--out", p(&out)]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("line 5"), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 4);

    let o = bsfwd(&[
        "forecast",
        "--input",
        p(&blocks),
        "--out",
        p(&out),
        "--strict",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 5"), "{}", stderr(&o));
}

#[test]
fn backtest_writes_report_and_tables() {
    let dir = TempDir::new().unwrap();
    let blocks = synth(dir.path(), 40, "gbm_drift", 3);
    let fc = dir.path().join("f.csv");
    assert!(bsfwd(&["forecast", "--input", p(&blocks), "--out", p(&fc)])
        .status
        .success());
    let report = dir.path().join("report.json");
    let hist = dir.path().join("pnl.csv");
    let o = bsfwd(&[
        "backtest",
        "--blocks",
        p(&blocks),
        "--forecasts",
        p(&fc),
        "--method",
        "all",
        "--out",
        p(&report),
        "--hist",
        p(&hist),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("Black-Scholes") && stdout.contains("Ask price extrapolation"));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 3);
    assert_eq!(v[0]["n_options"], 40);
    assert!(std::fs::read_to_string(&hist)
        .unwrap()
        .starts_with("method,bin_low,bin_high,count\n"));

    let o = bsfwd(&[
        "backtest",
        "--blocks",
        p(&blocks),
        "--forecasts",
        p(&fc),
        "--method",
        "best",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn beta_search_prints_a_candidate() {
    let dir = TempDir::new().unwrap();
    let blocks = synth(dir.path(), 6, "noisy", 5);
    let o = bsfwd(&[
        "beta-search",
        "--input",
        p(&blocks),
        "--betas",
        "0.001,0.1",
        "--grid-size",
        "9",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let best: f64 = String::from_utf8(o.stdout).unwrap().trim().parse().unwrap();
    assert!(best == 0.001 || best == 0.1);
    let o = bsfwd(&["beta-search", "--input", p(&blocks), "--betas", "1.5"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn filter_pipeline_runs_end_to_end() {
    let dir = TempDir::new().unwrap();
    let blocks = synth(dir.path(), 120, "gbm_drift", 6);
    let fc = dir.path().join("f.csv");
    assert!(bsfwd(&[
        "forecast",
        "--input",
        p(&blocks),
        "--out",
        p(&fc),
        "--grid-size",
        "9"
    ])
    .status
    .success());
    let feats = dir.path().join("features.csv");
    let o = bsfwd(&[
        "features",
        "--blocks",
        p(&blocks),
        "--forecasts",
        p(&fc),
        "--out",
        p(&feats),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    let cfg = dir.path().join("ml.toml");
    std::fs::write(
        &cfg,
        "learning_rate = 0.5\niterations = 40\nk_folds = 3\nhidden = [8, 4]\n",
    )
    .unwrap();
    let model = dir.path().join("model.json");
    let curve = dir.path().join("curve.csv");
    let o = bsfwd(&[
        "train-filter",
        "--features",
        p(&feats),
        "--config",
        p(&cfg),
        "--out",
        p(&model),
        "--curve",
        p(&curve),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let curve_text = std::fs::read_to_string(&curve).unwrap();
    assert!(curve_text.starts_with("epoch,mean_eval_loss,std_eval_loss\n"));
    assert_eq!(curve_text.lines().count(), 1 + 3);

    let report = dir.path().join("filtered.json");
    let o = bsfwd(&[
        "filter-backtest",
        "--model",
        p(&model),
        "--blocks",
        p(&blocks),
        "--forecasts",
        p(&fc),
        "--threshold",
        "0.5",
        "--out",
        p(&report),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(v["filtered"]["n_traded"].as_u64() <= v["unfiltered"]["n_traded"].as_u64());
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    assert_eq!(bsfwd(&["forecast"]).status.code(), Some(1));
    assert_eq!(bsfwd(&["frobnicate"]).status.code(), Some(1));
    let o = bsfwd(&["forecast", "--help"]);
    assert_eq!(o.status.code(), Some(0));
    let help = String::from_utf8(o.stdout).unwrap();
    for flag in [
        "--input",
        "--out",
        "--minimizer-dir",
        "--beta",
        "--grid-size",
        "--parallelism",
        "--boundary-mode",
        "--no-row-normalize",
        "--config",
        "--strict",
        "--hist",
        "--dump-dir",
    ] {
        assert!(help.contains(flag), "missing {flag}");
    }
}

#[test]
fn synth_rejects_unknown_model_and_zero_count() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("b.csv");
    assert_eq!(
        bsfwd(&["synth", "--n", "3", "--model", "walk", "--out", p(&out)])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        bsfwd(&["synth", "--n", "0", "--out", p(&out)])
            .status
            .code(),
        Some(1)
    );
}
