use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use tgarma_core::cli::{reload_chain, run, FitReport, RunConfig};
use tgarma_core::inference::summarize;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/fertility_fixture.csv")
}

fn tgarma(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_tgarma")).args(args).output().expect("binary runs")
}

fn fast<'a>(cmd: &'a str, data: &'a str, out: &'a str) -> Vec<&'a str> {
    vec![cmd, "--data", data, "--draws", "600", "--burn-in", "300", "--thin", "2", "--seed", "7", "--out", out]
}

fn read(p: PathBuf) -> String {
    fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn fit_is_byte_identical_and_reloads_exactly() {
    let d = tempfile::tempdir().unwrap();
    let data = fixture();
    let data = data.to_str().unwrap();
    let a = d.path().join("a");
    let b = d.path().join("b");
    for out in [&a, &b] {
        let o = tgarma(&fast("fit", data, out.to_str().unwrap()));
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("phi1"));
    }
    for f in ["summary.json", "chain.csv"] {
        assert_eq!(read(a.join(f)), read(b.join(f)), "{f} differs");
    }
    let (report, chain) = reload_chain(&a).unwrap();
    assert_eq!(summarize(&chain), report.summary);
    assert_eq!(chain.len(), 600);
    // the embedded config re-runs the same job
    assert_eq!(report.config.mcmc.seed, 7);
    assert_eq!(report.config.data_path.as_deref(), Some(Path::new(data)));
    let parsed: FitReport = serde_json::from_str(&read(a.join("summary.json"))).unwrap();
    assert_eq!(parsed.summary.parameters.len(), 4);

    let echo = d.path().join("echo");
    run(&RunConfig { output_dir: echo.clone(), ..report.config }).unwrap();
    for f in ["summary.json", "chain.csv"] {
        assert_eq!(read(a.join(f)), read(echo.join(f)), "{f} differs after re-running the embedded config");
    }
}

#[test]
fn select_writes_one_row_per_candidate() {
    let d = tempfile::tempdir().unwrap();
    let data = fixture();
    let out = d.path().join("sel");
    let mut args = fast("select", data.to_str().unwrap(), out.to_str().unwrap());
    args.extend(["--candidates", "1,0;1,1;1,2;2,1;2,2"]);
    let o = tgarma(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(out.join("criteria.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "Model,Family,DIC,EBIC,CPO");
    assert_eq!(lines.len(), 11);
    assert!(lines[1].starts_with("\"TGARMA(1,0)\",gamma,"));
    assert!(lines[10].starts_with("\"TGARMA(2,2)\",invgauss,"));
    let json: serde_json::Value = serde_json::from_str(&read(out.join("criteria.json"))).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 10);
    assert_eq!(json["config"]["command"], "select");
}

#[test]
fn forecast_reports_holdout_mape() {
    let d = tempfile::tempdir().unwrap();
    let data = fixture();
    let out = d.path().join("fc");
    let mut args = fast("forecast", data.to_str().unwrap(), out.to_str().unwrap());
    args.extend(["--holdout", "6", "--horizon", "6", "--point", "median"]);
    let o = tgarma(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("MAPE"));
    let csv = read(out.join("forecast.csv"));
    assert_eq!(csv.lines().next(), Some("step,point,lower,upper"));
    assert_eq!(csv.lines().count(), 7);
    let json: serde_json::Value = serde_json::from_str(&read(out.join("forecast.json"))).unwrap();
    assert_eq!(json["train_len"], 94);
    assert!(json["holdout"]["mape"].as_f64().unwrap() > 0.0);
    assert_eq!(json["forecast"]["draws_used"], 600);
    assert_eq!(read(out.join("holdout.csv")).lines().count(), 7);
}

#[test]
fn residuals_write_acf_table() {
    let d = tempfile::tempdir().unwrap();
    let data = fixture();
    let out = d.path().join("res");
    let mut args = fast("residuals", data.to_str().unwrap(), out.to_str().unwrap());
    args.extend(["--maxlag", "10"]);
    let o = tgarma(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let acf = read(out.join("acf.csv"));
    assert_eq!(acf.lines().count(), 12);
    let json: serde_json::Value = serde_json::from_str(&read(out.join("residuals.json"))).unwrap();
    assert_eq!(json["report"]["residuals"].as_array().unwrap().len(), 99);
}

#[test]
fn study_outputs_do_not_depend_on_worker_count() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("study.toml");
    fs::write(
        &cfg,
        "n = 60\nm = 3\nseed = 5\norder = { p = 1, q = 0 }\n\
         true_params = { beta0 = 0.5, phi = [0.4], theta = [], u = 3.0, lambda = 0.5 }\n\
         criteria_models = [{ p = 1, q = 0 }, { p = 1, q = 1 }]\n\
         [mcmc]\ndraws = 200\nburn_in = 100\nthin = 1\n",
    )
    .unwrap();
    for cmd in ["simulate", "select-study"] {
        let mut outputs = Vec::new();
        for w in ["1", "2"] {
            let out = d.path().join(format!("{cmd}{w}"));
            let o = tgarma(&[cmd, "--config", cfg.to_str().unwrap(), "--workers", w, "--out", out.to_str().unwrap()]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            outputs.push(out);
        }
        let names: &[&str] = if cmd == "simulate" { &["sim_table.csv", "sim_report.json"] } else { &["selection.csv", "selection.json"] };
        for f in names {
            assert_eq!(read(outputs[0].join(f)), read(outputs[1].join(f)), "{cmd} {f}");
        }
    }
    let table = read(d.path().join("simulate1/sim_table.csv"));
    assert_eq!(table.lines().next(), Some("Parameter,True,Mean,Variance,CB,CE,AP"));
}

#[test]
fn errors_are_json_with_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let bad = d.path().join("bad.csv");
    fs::write(&bad, "t,y\n1,2\n2,0\n").unwrap();
    let out = d.path().join("o");
    let o = tgarma(&["fit", "--data", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let v: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap();
    assert_eq!(v["error"]["kind"], "data");
    assert!(v["error"]["message"].as_str().unwrap().contains("line 3"));

    let o = tgarma(&["fit", "--data", bad.to_str().unwrap(), "--draws", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = tgarma(&["fit"]);
    assert_eq!(o.status.code(), Some(2));

    // a series this short cannot support the mode search
    let tiny = d.path().join("tiny.csv");
    fs::write(&tiny, "y\n1.5\n").unwrap();
    let o = tgarma(&["fit", "--data", tiny.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}
