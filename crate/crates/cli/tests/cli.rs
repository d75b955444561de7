use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gridarena_core::driver::{self, BudgetRule};
use gridarena_core::table::{load_table, LoadOptions};
use gridarena_core::{EngineConfig, Protocol, TableFormat};
use serde_json::{json, Value};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gridarena"));
    c.env_remove("GRIDARENA_SEED");
    c
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "{:?}\nstdout: {}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_json(path: &Path, v: &Value) {
    fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
}

fn axes(sizes: &[usize]) -> Value {
    let axes: Vec<Value> = sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| json!({"name": format!("x{}", i + 1), "values": (1..=n).collect::<Vec<_>>()}))
        .collect();
    json!({ "axes": axes })
}

fn bowl_landscape(sizes: &[usize], center: &[f64], noise: f64, seed: u64) -> Value {
    json!({
        "grid": axes(sizes),
        "objective": {"family": "separable_bowl", "center": center},
        "noise_sd": noise,
        "seed": seed,
    })
}

fn campaign(dir: &Path, engines: Value, protocols: Value, multipliers: Value, seeds: Value) -> PathBuf {
    let path = dir.join("campaign.json");
    write_json(
        &path,
        &json!({
            "tables": [{
                "id": "bowl",
                "landscape": bowl_landscape(&[5, 4], &[2.0, 3.0], 0.05, 9),
                "folds": 3
            }],
            "engines": engines,
            "protocols": protocols,
            "multipliers": multipliers,
            "seeds": seeds,
        }),
    );
    path
}

fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn gen_table_writes_a_reloadable_table() {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = bowl_landscape(&[5, 5], &[3.0, 3.0], 0.02, 4);
    spec["folds"] = json!(10);
    let spec_path = tmp.path().join("spec.json");
    write_json(&spec_path, &spec);

    for out in ["a", "b"] {
        run_ok(bin().args(["gen-table", "--spec"]).arg(&spec_path).arg("--out").arg(tmp.path().join(out)));
    }
    let a = fs::read_to_string(tmp.path().join("a/scores.csv")).unwrap();
    assert_eq!(a.lines().count(), 1 + 250);
    assert_eq!(a, fs::read_to_string(tmp.path().join("b/scores.csv")).unwrap());
    assert_eq!(
        fs::read(tmp.path().join("a/manifest.json")).unwrap(),
        fs::read(tmp.path().join("b/manifest.json")).unwrap()
    );

    let loaded = load_table(&tmp.path().join("a/scores.csv"), TableFormat::Csv, &LoadOptions::default()).unwrap();
    let spec: gridarena_core::LandscapeSpec = serde_json::from_value(spec).unwrap();
    assert_eq!(loaded, spec.synthesize(10).unwrap());
}

#[test]
fn gen_table_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = bowl_landscape(&[5, 5], &[3.0, 3.0], 0.0, 4);
    spec["folds"] = json!(2);
    let spec_path = tmp.path().join("spec.json");
    write_json(&spec_path, &spec);
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = bin()
        .args(["gen-table", "--spec"])
        .arg(&spec_path)
        .arg("--out")
        .arg(blocker.join("sub"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    spec["objective"]["family"] = json!("volcano");
    write_json(&spec_path, &spec);
    let out = bin()
        .args(["gen-table", "--spec"])
        .arg(&spec_path)
        .arg("--out")
        .arg(tmp.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_is_counted_idempotent_and_resumable() {
    let tmp = tempfile::tempdir().unwrap();
    let config = campaign(
        tmp.path(),
        json!([{"kind": "random"}, {"kind": "parzen"}]),
        json!(["cross_validated"]),
        json!([1]),
        json!([0, 1, 2]),
    );
    let full = tmp.path().join("full");
    let out = run_ok(bin().arg("run").arg("--config").arg(&config).arg("--out").arg(&full));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "6 runs: 6 new, 0 already present");
    assert_eq!(fs::read_dir(full.join("runs")).unwrap().count(), 6);
    assert!(full.join("runs/bowl__parzen__cv__m1__s2.jsonl").exists());

    let out = run_ok(bin().arg("run").arg("--config").arg(&config).arg("--out").arg(&full));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "6 runs: 0 new, 6 already present");

    // Interrupt a second campaign by deleting half of its records.
    let resumed = tmp.path().join("resumed");
    run_ok(bin().arg("run").arg("--config").arg(&config).arg("--out").arg(&resumed));
    for name in ["bowl__random__cv__m1__s0.jsonl", "bowl__parzen__cv__m1__s1.jsonl", "bowl__parzen__cv__m1__s2.jsonl"] {
        fs::remove_file(resumed.join("runs").join(name)).unwrap();
    }
    let out = run_ok(bin().arg("run").arg("--config").arg(&config).arg("--out").arg(&resumed));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "6 runs: 3 new, 3 already present");
    assert_eq!(dir_contents(&full.join("runs")), dir_contents(&resumed.join("runs")));
}

#[test]
fn parallel_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let config = campaign(
        tmp.path(),
        json!([{"kind": "random"}, {"kind": "gp_ei"}, {"kind": "blended"}]),
        json!(["single_fold_all", "cross_validated"]),
        json!([1, 2]),
        json!([3, 4]),
    );
    let one = tmp.path().join("one");
    let eight = tmp.path().join("eight");
    run_ok(bin().arg("run").arg("--config").arg(&config).arg("--out").arg(&one).args(["--jobs", "1"]));
    run_ok(bin().arg("run").arg("--config").arg(&config).arg("--out").arg(&eight).args(["--jobs", "8"]));
    let a = dir_contents(&one.join("runs"));
    assert_eq!(a.len(), 3 * 4 * 2 * 2);
    assert_eq!(a, dir_contents(&eight.join("runs")));
    assert_eq!(dir_contents(&one.join("tables")), dir_contents(&eight.join("tables")));
}

#[test]
fn seed_falls_back_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let config = campaign(tmp.path(), json!([{"kind": "random"}]), json!(["cross_validated"]), json!([1]), json!([]));
    let out = bin().arg("run").arg("--config").arg(&config).arg("--out").arg(tmp.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    run_ok(
        bin()
            .env("GRIDARENA_SEED", "42")
            .arg("run")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(tmp.path().join("o")),
    );
    assert!(tmp.path().join("o/runs/bowl__random__cv__m1__s42.jsonl").exists());
}

#[test]
fn run_config_and_data_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{\"tables\": [").unwrap();
    let out = bin().arg("run").arg("--config").arg(&bad).arg("--out").arg(tmp.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let missing = tmp.path().join("missing.json");
    write_json(
        &missing,
        &json!({
            "tables": [{"id": "t", "path": "nowhere/scores.csv"}],
            "engines": [{"kind": "random"}],
            "seeds": [0],
        }),
    );
    let out = bin().arg("run").arg("--config").arg(&missing).arg("--out").arg(tmp.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere/scores.csv"));
}

#[test]
fn file_tables_resolve_relative_to_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = bowl_landscape(&[4, 4], &[1.0, 1.0], 0.0, 0);
    spec["folds"] = json!(2);
    write_json(&tmp.path().join("spec.json"), &spec);
    run_ok(bin().arg("gen-table").arg("--spec").arg(tmp.path().join("spec.json")).arg("--out").arg(tmp.path().join("gen")));
    let config = tmp.path().join("c.json");
    write_json(
        &config,
        &json!({
            "tables": [{"id": "loss", "path": "gen/scores.csv", "minimize": true}],
            "engines": [{"kind": "grid_sweep"}],
            "protocols": ["cross_validated"],
            "multipliers": [4],
            "seeds": [0],
        }),
    );
    run_ok(bin().arg("run").arg("--config").arg(&config).arg("--out").arg(tmp.path().join("o")));
    let line = fs::read_to_string(tmp.path().join("o/runs/loss__grid_sweep__cv__m4__s0.jsonl")).unwrap();
    let record = gridarena_core::RunRecord::from_json_line(line.trim()).unwrap();
    // Negated bowl: the best arm is the one farthest from (1, 1), score 0 at the center.
    assert_eq!(record.budget, 16);
    assert_eq!(record.ranks.iter().min(), Some(&1));
    assert!(record.r_star > 0.0);
}

fn eval(input: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("eval")
        .arg("--in")
        .arg(input)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn report_rows(path: &Path) -> Vec<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header, ["engine", "m", "p_mean", "p_se", "imp", "imp_se", "overall"]);
    lines
        .map(|l| {
            header
                .iter()
                .zip(l.split(','))
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect()
        })
        .collect()
}

#[test]
fn eval_full_sweep_scores_one_hundred() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("c.json");
    write_json(
        &config,
        &json!({
            "tables": [
                {"id": "a", "landscape": bowl_landscape(&[4, 4], &[2.0, 3.0], 0.0, 0), "folds": 2},
                {"id": "b", "landscape": bowl_landscape(&[4, 4], &[4.0, 1.0], 0.0, 0), "folds": 2}
            ],
            "engines": [{"kind": "grid_sweep"}],
            "multipliers": [4],
            "seeds": [0, 1],
        }),
    );
    let runs = tmp.path().join("runs");
    run_ok(bin().arg("run").arg("--config").arg(&config).arg("--out").arg(&runs));
    let report = tmp.path().join("report");
    let out = eval(&runs, &report, &["--draws", "200", "--reference-m", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = report_rows(&report.join("report.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["imp"], "100");
    assert_eq!(rows[0]["m"], "4");

    let metrics: Value = serde_json::from_slice(&fs::read(report.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["engines"][0]["forte"], json!(["a", "b"]));
    let plot = fs::read_to_string(report.join("plot_data.csv")).unwrap();
    assert!(plot.starts_with("panel,engine,m,value,se\n"));
    assert!(plot.contains("improvement_degree,grid_sweep,4,100,"));
    assert!(plot.contains("p_better_than_random,grid_sweep,4,"));
}

#[test]
fn eval_random_campaign_is_calibrated() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("c.json");
    let seeds: Vec<u64> = (0..50).collect();
    write_json(
        &config,
        &json!({
            "tables": [{"id": "t", "landscape": {
                "grid": axes(&[10, 10]),
                "objective": {"family": "ridge"},
                "noise_sd": 0.02,
                "seed": 5
            }, "folds": 1}],
            "engines": [{"kind": "random"}],
            "multipliers": [1],
            "seeds": seeds,
        }),
    );
    let runs = tmp.path().join("runs");
    run_ok(bin().arg("run").arg("--config").arg(&config).arg("--out").arg(&runs));
    let report = tmp.path().join("report");
    let out = eval(&runs, &report, &["--draws", "2000", "--seed", "11"]);
    assert!(out.status.success());
    let rows = report_rows(&report.join("report.csv"));
    let p: f64 = rows[0]["p_mean"].parse().unwrap();
    let p_se: f64 = rows[0]["p_se"].parse().unwrap();
    let imp: f64 = rows[0]["imp"].parse().unwrap();
    let imp_se: f64 = rows[0]["imp_se"].parse().unwrap();
    // With N = 100 and L = 10 about 12.7% of random pairs tie on dcg10, and
    // ties are losses: the expected p is 0.4366 rather than 0.5.
    assert!((p - 0.4366).abs() <= 4.0 * p_se, "{p} ± {p_se}");
    assert!(imp.abs() <= 3.0 * imp_se, "{imp} ± {imp_se}");

    // Output depends only on the record set.
    let again = tmp.path().join("again");
    assert!(eval(&runs, &again, &["--draws", "2000", "--seed", "11"]).status.success());
    assert_eq!(
        fs::read(report.join("metrics.json")).unwrap(),
        fs::read(again.join("metrics.json")).unwrap()
    );
}

#[test]
fn eval_with_missing_table_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let config = campaign(tmp.path(), json!([{"kind": "random"}]), json!(["cross_validated"]), json!([1]), json!([0]));
    let runs = tmp.path().join("runs");
    run_ok(bin().arg("run").arg("--config").arg(&config).arg("--out").arg(&runs));
    fs::remove_file(runs.join("tables/bowl.meta.json")).unwrap();
    let out = eval(&runs, &tmp.path().join("r"), &["--draws", "10"]);
    assert_eq!(out.status.code(), Some(3));
}

/// A run directory with hand-set mean scores per (engine, model).
fn compare_fixture(dir: &Path, scores: &[(&str, &str, f64)]) {
    let tables = dir.join("tables");
    let runs = dir.join("runs");
    fs::create_dir_all(&tables).unwrap();
    fs::create_dir_all(&runs).unwrap();
    let spec: gridarena_core::LandscapeSpec =
        serde_json::from_value(bowl_landscape(&[3, 3], &[2.0, 2.0], 0.0, 0)).unwrap();
    let table = spec.synthesize(2).unwrap();
    for &(engine, model, r_star) in scores {
        let id = format!("{model}_d");
        gridarena_core::table::save_table(&table, &tables.join(format!("{id}.csv")), TableFormat::Csv).unwrap();
        write_json(
            &tables.join(format!("{id}.meta.json")),
            &json!({"id": id, "model": model, "context": "d"}),
        );
        let mut record = driver::run(
            &EngineConfig::Random,
            &table,
            &id,
            Protocol::CrossValidated,
            1,
            0,
            BudgetRule::default(),
        )
        .unwrap();
        record.engine = engine.to_string();
        record.r_star = r_star;
        fs::write(runs.join(format!("{}.jsonl", record.key())), record.to_json_line() + "\n").unwrap();
    }
}

fn compare(dir: &Path) -> Output {
    bin().arg("compare").arg("--in").arg(dir).output().unwrap()
}

#[test]
fn compare_reports_inversions() {
    let tmp = tempfile::tempdir().unwrap();
    let inverted = tmp.path().join("inv");
    compare_fixture(&inverted, &[("e1", "m1", 0.9), ("e1", "m2", 0.8), ("e2", "m1", 0.7), ("e2", "m2", 0.8)]);
    let out = compare(&inverted);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["rate"], json!(1.0));
    assert_eq!(report["comparisons"], json!(1));
    assert_eq!(report["inversions"][0]["models"], json!(["m1", "m2"]));

    let same = tmp.path().join("same");
    compare_fixture(&same, &[("e1", "m1", 0.9), ("e1", "m2", 0.8), ("e2", "m1", 0.9), ("e2", "m2", 0.8)]);
    let report: Value = serde_json::from_slice(&compare(&same).stdout).unwrap();
    assert_eq!(report["rate"], json!(0.0));

    let lonely = tmp.path().join("lonely");
    compare_fixture(&lonely, &[("e1", "m1", 0.9), ("e1", "m2", 0.8)]);
    assert_eq!(compare(&lonely).status.code(), Some(2));
}
