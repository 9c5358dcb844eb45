//! End-to-end tests of the `bidcraft` binary: pipelines, exit codes, and
//! output formats.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bidcraft(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bidcraft"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = bidcraft(dir, args);
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn workdir() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().to_path_buf();
    (dir, path)
}

#[test]
fn generate_then_fit_km_on_point_mass_yields_a_point_mass_model() {
    let (_guard, dir) = workdir();
    ok(
        &dir,
        &[
            "generate",
            "--out",
            "pm.tsv",
            "--n",
            "50",
            "--seed",
            "3",
            "--price-law",
            "point:17",
        ],
    );
    ok(
        &dir,
        &[
            "fit",
            "--data",
            "pm.tsv",
            "--schema",
            "pm.schema.json",
            "--model",
            "km",
            "--out",
            "km.json",
        ],
    );
    let model =
        bidcraft_core::landscape::MarketModel::load(&dir.join("km.json")).unwrap();
    let dist = model.baseline_distribution().unwrap();
    assert_eq!(dist.mass_at(17), 1.0);

    // A point-mass model scored on matching point-mass data is certain.
    ok(
        &dir,
        &[
            "eval",
            "--data",
            "pm.tsv",
            "--schema",
            "pm.schema.json",
            "--model",
            "km.json",
            "--out",
            "t1.csv",
        ],
    );
    let csv = std::fs::read_to_string(dir.join("t1.csv")).unwrap();
    let anlp: f64 = csv.lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap();
    assert!(anlp.abs() < 1e-9, "anlp {anlp} should vanish");
}

#[test]
fn fit_km_on_fully_censored_data_exits_2() {
    let (_guard, dir) = workdir();
    ok(
        &dir,
        &[
            "generate",
            "--out",
            "c.tsv",
            "--n",
            "30",
            "--seed",
            "2",
            "--price-law",
            "point:10",
            "--censor-law",
            "point:0",
        ],
    );
    let out = bidcraft(
        &dir,
        &[
            "fit",
            "--data",
            "c.tsv",
            "--schema",
            "c.schema.json",
            "--model",
            "km",
            "--out",
            "km.json",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("censored"));
}

#[test]
fn fit_on_missing_file_exits_2_and_names_the_path() {
    let (_guard, dir) = workdir();
    std::fs::write(
        dir.join("schema.json"),
        bidcraft_core::bidlog::LogSchema::canonical(0).to_json(),
    )
    .unwrap();
    let out = bidcraft(
        &dir,
        &[
            "fit",
            "--data",
            "nope.tsv",
            "--schema",
            "schema.json",
            "--model",
            "km",
            "--out",
            "m.json",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.tsv"));
}

#[test]
fn forecaster_fits_are_byte_identical_given_the_seed() {
    let (_guard, dir) = workdir();
    ok(
        &dir,
        &[
            "generate",
            "--out",
            "d.tsv",
            "--n",
            "120",
            "--seed",
            "5",
            "--levels",
            "16",
            "--price-law",
            "uniform:0,12",
        ],
    );
    for out in ["a.json", "b.json"] {
        ok(
            &dir,
            &[
                "fit",
                "--data",
                "d.tsv",
                "--schema",
                "d.schema.json",
                "--model",
                "forecaster",
                "--out",
                out,
                "--levels",
                "16",
                "--epochs",
                "2",
                "--seed",
                "7",
                "--embed-dim",
                "4",
                "--hidden-dim",
                "4",
            ],
        );
    }
    let a = std::fs::read(dir.join("a.json")).unwrap();
    let b = std::fs::read(dir.join("b.json")).unwrap();
    assert_eq!(a, b);
}

/// A hand-written survival curve whose pmf is exactly uniform: S drops by
/// 1/L at every level.
fn uniform_km_model_json(levels: usize) -> String {
    let points: Vec<serde_json::Value> = (0..levels)
        .map(|z| {
            let s = 1.0 - (z as f64 + 1.0) / levels as f64;
            serde_json::json!([z, s])
        })
        .collect();
    serde_json::json!({
        "kind": "km",
        "price_levels": levels,
        "curve": { "points": points, "price_levels": levels },
    })
    .to_string()
}

#[test]
fn uniform_model_eval_reports_ln_l() {
    let (_guard, dir) = workdir();
    ok(
        &dir,
        &[
            "generate",
            "--out",
            "t.tsv",
            "--n",
            "40",
            "--seed",
            "9",
            "--levels",
            "16",
            "--price-law",
            "uniform:0,15",
            "--censor-law",
            "uniform:0,15",
        ],
    );
    std::fs::write(dir.join("uniform.json"), uniform_km_model_json(16)).unwrap();
    ok(
        &dir,
        &[
            "eval",
            "--data",
            "t.tsv",
            "--schema",
            "t.schema.json",
            "--model",
            "uniform.json",
            "--out",
            "table1.csv",
            "--levels",
            "16",
        ],
    );
    let csv = std::fs::read_to_string(dir.join("table1.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "Algorithm,AUC,Log Loss,ANLP");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let anlp: f64 = row[3].parse().unwrap();
    assert!(
        (anlp - (16.0f64).ln()).abs() < 1e-6,
        "anlp {anlp} should be ln 16 for rounded output"
    );
}

#[test]
fn eval_rejects_grid_mismatch() {
    let (_guard, dir) = workdir();
    ok(
        &dir,
        &[
            "generate",
            "--out",
            "t.tsv",
            "--n",
            "20",
            "--seed",
            "1",
            "--levels",
            "32",
            "--price-law",
            "point:3",
        ],
    );
    std::fs::write(dir.join("uniform.json"), uniform_km_model_json(16)).unwrap();
    let out = bidcraft(
        &dir,
        &[
            "eval",
            "--data",
            "t.tsv",
            "--schema",
            "t.schema.json",
            "--model",
            "uniform.json",
            "--out",
            "x.csv",
            "--levels",
            "32",
        ],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid"));
}

#[test]
fn simulate_emits_table2_rows_with_shared_auction_count() {
    let (_guard, dir) = workdir();
    ok(
        &dir,
        &[
            "generate",
            "--out",
            "t.tsv",
            "--n",
            "300",
            "--seed",
            "4",
            "--price-law",
            "uniform:1,60",
            "--mean-ctr",
            "0.05",
        ],
    );
    ok(
        &dir,
        &[
            "simulate",
            "--data",
            "t.tsv",
            "--schema",
            "t.schema.json",
            "--out",
            "report.csv",
            "--budget",
            "200",
            "--n",
            "100",
            "--bidder",
            "mcpc:0",
            "--bidder",
            "const:30",
        ],
    );
    let csv = std::fs::read_to_string(dir.join("report.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "Campaign,Algorithm,Objective,Auction,Impression,Clicks,Cost,Win Rate,CPM,E-CPC"
    );
    assert_eq!(lines.len(), 3);
    let mcpc: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(mcpc[1], "MCPC");
    assert_eq!(mcpc[4], "0", "a zero max-cpc bidder wins nothing");
    assert_eq!(mcpc[8], "NA", "CPM undefined with zero impressions");
    let cons: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(mcpc[3], cons[3], "both rows see the same auction count");

    // The JSON twin mirrors the CSV rows with raw values.
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 2);
    assert!(json[0]["cpm"].is_null());
}

#[test]
fn simulate_rejects_censored_logs_with_a_hint() {
    let (_guard, dir) = workdir();
    ok(
        &dir,
        &[
            "generate",
            "--out",
            "c.tsv",
            "--n",
            "50",
            "--seed",
            "8",
            "--price-law",
            "uniform:0,50",
            "--censor-law",
            "point:25",
        ],
    );
    let out = bidcraft(
        &dir,
        &[
            "simulate",
            "--data",
            "c.tsv",
            "--schema",
            "c.schema.json",
            "--out",
            "r.csv",
            "--budget",
            "100",
            "--bidder",
            "const:10",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("uncensored"));
}

#[test]
fn usage_errors_exit_1() {
    let (_guard, dir) = workdir();
    let out = bidcraft(&dir, &["fit", "--bogus-flag"]);
    assert_eq!(out.status.code(), Some(1));
    let out = bidcraft(&dir, &["--help"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn solve_then_replay_uses_the_policy() {
    let (_guard, dir) = workdir();
    ok(
        &dir,
        &[
            "generate",
            "--out",
            "train.tsv",
            "--n",
            "400",
            "--seed",
            "21",
            "--levels",
            "64",
            "--price-law",
            "gamma:2,5",
            "--mean-ctr",
            "0.05",
        ],
    );
    ok(
        &dir,
        &[
            "fit",
            "--data",
            "train.tsv",
            "--schema",
            "train.schema.json",
            "--model",
            "km",
            "--out",
            "km.json",
            "--levels",
            "64",
        ],
    );
    ok(
        &dir,
        &[
            "solve",
            "--model",
            "km.json",
            "--budget",
            "80",
            "--horizon",
            "100",
            "--ctr",
            "0.05",
            "--out",
            "table.json",
        ],
    );
    ok(
        &dir,
        &[
            "generate",
            "--out",
            "test.tsv",
            "--n",
            "500",
            "--seed",
            "22",
            "--levels",
            "64",
            "--from-model",
            "km.json",
            "--mean-ctr",
            "0.05",
        ],
    );
    ok(
        &dir,
        &[
            "simulate",
            "--data",
            "test.tsv",
            "--schema",
            "test.schema.json",
            "--out",
            "report.csv",
            "--budget",
            "80",
            "--n",
            "100",
            "--levels",
            "64",
            "--bidder",
            "rlb:table.json",
            "--bidder",
            "lb:10",
        ],
    );
    let csv = std::fs::read_to_string(dir.join("report.csv")).unwrap();
    let rlb: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(rlb[1], "RLB");
    let impressions: u64 = rlb[4].parse().unwrap();
    assert!(impressions > 0, "the DP policy should win some auctions");
}

#[test]
fn km_and_forecaster_land_near_the_true_entropy_on_gamma_data() {
    let (_guard, dir) = workdir();
    // Gamma-law data on a compact grid, mixed censoring for the win task.
    ok(
        &dir,
        &[
            "generate",
            "--out",
            "train.tsv",
            "--n",
            "4000",
            "--seed",
            "31",
            "--levels",
            "64",
            "--price-law",
            "gamma:4,4",
            "--mean-ctr",
            "0.05",
        ],
    );
    ok(
        &dir,
        &[
            "generate",
            "--out",
            "test.tsv",
            "--n",
            "1500",
            "--seed",
            "32",
            "--levels",
            "64",
            "--price-law",
            "gamma:4,4",
            "--mean-ctr",
            "0.05",
            "--censor-law",
            "uniform:0,40",
        ],
    );
    ok(
        &dir,
        &[
            "fit",
            "--data",
            "train.tsv",
            "--schema",
            "train.schema.json",
            "--model",
            "km",
            "--out",
            "km.json",
            "--levels",
            "64",
        ],
    );
    ok(
        &dir,
        &[
            "fit",
            "--data",
            "train.tsv",
            "--schema",
            "train.schema.json",
            "--model",
            "forecaster",
            "--out",
            "dlf.json",
            "--levels",
            "64",
            "--epochs",
            "40",
            "--learning-rate",
            "0.3",
            "--seed",
            "6",
        ],
    );
    ok(
        &dir,
        &[
            "eval",
            "--data",
            "test.tsv",
            "--schema",
            "test.schema.json",
            "--model",
            "km.json",
            "--model",
            "dlf.json",
            "--out",
            "table1.csv",
            "--levels",
            "64",
        ],
    );
    let csv = std::fs::read_to_string(dir.join("table1.csv")).unwrap();
    let anlp_of = |row: &str| -> f64 { row.split(',').nth(3).unwrap().parse().unwrap() };
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    let km = anlp_of(rows[0]);
    let dlf = anlp_of(rows[1]);
    // Both estimate the same unconditional law, so they should sit close to
    // each other (and to the true discretized entropy).
    assert!(
        (km - dlf).abs() < 0.2,
        "KM anlp {km} and forecaster anlp {dlf} drifted apart"
    );
}
