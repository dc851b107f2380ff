use std::fs;
use std::path::Path;
use std::process::Command;

use ordevo::aggregate::aggregate;
use ordevo::cli::emit::{read_runs_csv, write_aggregate_csv};
use ordevo::cli::{run_cli, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION};

fn run(args: &[&str]) -> i32 {
    run_cli(std::iter::once("ordevo").chain(args.iter().copied()))
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ordevo"))
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = bin()
        .args(["simulate", "--orders", "0,1", "--pop", "8", "--k", "2", "--gens", "12", "--seeds", "2", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));

    let usage = bin().args(["simulate", "--no-such-flag"]).output().unwrap();
    assert_eq!(usage.status.code(), Some(1));

    let bad_value = bin().args(["simulate", "--beta", "abc"]).output().unwrap();
    assert_eq!(bad_value.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad_value.stderr).contains("beta"));

    let invalid = bin().args(["simulate", "--pop", "10", "--k", "3"]).output().unwrap();
    assert_eq!(invalid.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&invalid.stderr).contains("population_size must be divisible by k"));

    let missing = bin()
        .args(["fit", "--input", "/nonexistent/runs.csv", "--out"])
        .arg(dir.path().join("fit"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn library_entry_maps_errors_to_codes() {
    assert_eq!(run(&["simulate", "--pop", "10", "--k", "3"]), EXIT_VALIDATION);
    assert_eq!(run(&["figure1", "--preset", "table1-desk"]), EXIT_USAGE);
    assert_eq!(run(&["--help"]), EXIT_OK);
}

#[test]
fn rerunning_aggregation_on_runs_csv_is_byte_exact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let code = run(&[
        "simulate", "--task", "timeseries", "--targets", "sin,t2", "--orders", "0,2,sr", "--pop", "16", "--k", "4",
        "--beta", "0.5,0.05", "--gens", "40", "--seeds", "3", "--out", &out_arg(&out),
    ]);
    assert_eq!(code, EXIT_OK);
    let series = read_runs_csv(&out.join("runs.csv")).unwrap();
    assert_eq!(series.len(), 2 * 3 * 2 * 3);
    let mut again = Vec::new();
    write_aggregate_csv(&mut again, &aggregate(&series)).unwrap();
    assert_eq!(again, fs::read(out.join("aggregate.csv")).unwrap());
}

#[test]
fn report_carries_what_a_rerun_needs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let args = |o: &Path| {
        vec![
            "simulate".to_string(),
            "--orders".into(),
            "1,sr".into(),
            "--pop".into(),
            "32".into(),
            "--k".into(),
            "2".into(),
            "--gens".into(),
            "30".into(),
            "--seeds".into(),
            "2".into(),
            "--seed".into(),
            "77".into(),
            "--out".into(),
            out_arg(o),
        ]
    };
    assert_eq!(run_cli(std::iter::once("ordevo".to_string()).chain(args(&a))), EXIT_OK);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["engine_version"], ordevo::ENGINE_VERSION);
    assert_eq!(report["subcommand"], "simulate");
    let grid = &report["effective_config"]["grids"][0];
    assert_eq!(grid["base_seed"], 77);
    assert_eq!(grid["population_size"], 32);
    assert_eq!(grid["generations"], 30);
    assert_eq!(grid["beta_is_variance"], true);
    assert!(report.get("threads").is_none());

    // Re-running from the echoed values gives the same bytes.
    assert_eq!(run_cli(std::iter::once("ordevo".to_string()).chain(args(&b))), EXIT_OK);
    for name in ["runs.csv", "aggregate.csv", "report.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(threads);
        let code = run(&[
            "--threads", threads, "simulate", "--orders", "0,1,2", "--pop", "1024", "--k", "8", "--gens", "20",
            "--seeds", "3", "--out", &out_arg(&out),
        ]);
        assert_eq!(code, EXIT_OK);
        bytes.push(
            ["runs.csv", "aggregate.csv", "report.json"]
                .map(|n| fs::read(out.join(n)).unwrap()),
        );
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn figure1_svg_has_a_polyline_per_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig");
    let code = run(&[
        "figure1", "--pop", "64", "--k", "2", "--gens", "60", "--seeds", "2", "--out", &out_arg(&out),
    ]);
    assert_eq!(code, EXIT_OK);
    let svg = fs::read_to_string(out.join("figure1.svg")).unwrap();
    // orders 0..3 plus the self-referential variant, for top-2 and top-1
    assert_eq!(svg.matches("<polyline").count(), 10);
    assert_eq!(svg.matches(r#"data-variant="sr1""#).count(), 2);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["summary"]["curves"].as_array().unwrap().len(), 10);
}

#[test]
fn theorem_check_reports_violations_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("thm");
    let code = run(&["theorem-check", "--trials", "500", "--strict-trials", "4000", "--out", &out_arg(&out)]);
    assert_eq!(code, EXIT_OK);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["lemma2_pathwise_violations"], 0);
    assert_eq!(report["verdicts"]["top1_equal_counts"], true);
    let table = fs::read_to_string(out.join("theorem_check.csv")).unwrap();
    // 12 dominance + 4 top-1 + 2 strict-advantage rows, plus the header
    assert_eq!(table.lines().count(), 19);
}

#[test]
fn fit_reads_back_simulate_output() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let fit = dir.path().join("fit");
    assert_eq!(
        run(&["simulate", "--orders", "1", "--pop", "64", "--k", "2", "--gens", "200", "--seeds", "4", "--out", &out_arg(&sim)]),
        EXIT_OK
    );
    let input = out_arg(&sim.join("runs.csv"));
    assert_eq!(run(&["fit", "--input", &input, "--window-start", "100", "--out", &out_arg(&fit)]), EXIT_OK);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(fit.join("report.json")).unwrap()).unwrap();
    let f = &report["summary"]["fits"][0]["fit"];
    assert_eq!(f["window_start"], 100);
    assert_eq!(f["window_end"], 200);
    let slope = f["slope"].as_f64().unwrap();
    assert!((1.5..2.6).contains(&slope), "slope {slope}");
}

#[test]
fn failed_run_leaves_no_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    // A zero-generation grid is rejected before anything is written.
    assert_eq!(run(&["simulate", "--gens", "0", "--out", &out_arg(&out)]), EXIT_VALIDATION);
    assert!(!out.exists() || fs::read_dir(&out).unwrap().count() == 0);
}

#[test]
fn config_file_values_are_used_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("o");
    fs::write(
        &cfg,
        format!("orders = [0, 1]\npop = 16\nk = 4\ngens = 9\nseeds = 2\nout = {:?}\n", out_arg(&out)),
    )
    .unwrap();
    assert_eq!(run(&["simulate", "--config", cfg.to_str().unwrap(), "--gens", "5"]), EXIT_OK);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["effective_config"]["grids"][0]["generations"], 5);
    assert_eq!(report["effective_config"]["grids"][0]["population_size"], 16);

    fs::write(&cfg, "orderz = [0]\n").unwrap();
    assert_eq!(run(&["simulate", "--config", cfg.to_str().unwrap()]), EXIT_USAGE);
}
