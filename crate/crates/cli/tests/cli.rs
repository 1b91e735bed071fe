use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use aimd_arena::{ExperimentConfig, TopologyDef};
use aimd_core::NetworkTopology;
use tempfile::TempDir;

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn arena(args: &[&str]) -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_aimd-arena"))
        .args(args)
        .output()
        .expect("binary runs");
    Outcome {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn write_config(dir: &TempDir, name: &str, json: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, json).unwrap();
    path
}

fn run_with_csv(dir: &TempDir, action: &str, json: &str) -> (Outcome, String) {
    let config = write_config(dir, "config.json", json);
    let csv = dir.path().join("out.csv");
    let _ = fs::remove_file(&csv);
    let out = arena(&[
        action,
        "--config",
        config.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(&csv).unwrap_or_default();
    (out, text)
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

const E1: &str = r#""strategies":[{"alpha":1.5,"beta":0.75,"label":"s1"},{"alpha":1,"beta":0.25,"label":"s2"}],"capacity":50"#;
const TABLE: &str = r#""strategies":[{"alpha":1.5,"beta":0.75},{"alpha":1.25,"beta":0.5},{"alpha":1,"beta":0.25}],"capacity":50"#;

#[test]
fn fixed_point_on_single_server() {
    let dir = TempDir::new().unwrap();
    let json = r#"{"command":"fixed-point",
        "topology":{"kind":"single_server","capacity":50,"users":2},
        "strategies":[{"alpha":1,"beta":0.5},{"alpha":1,"beta":0.5}]}"#;
    let (out, csv) = run_with_csv(&dir, "fixed-point", json);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.contains("T=12.5"), "{}", out.stdout);
    assert!(out.stdout.contains("x*=(25,25)"), "{}", out.stdout);
    assert_eq!(
        csv,
        "user_index,period,peak_rate,throughput\n1,12.5,25,18.75\n2,12.5,25,18.75\n"
    );
}

#[test]
fn replicator_writes_share_columns() {
    let dir = TempDir::new().unwrap();
    let json = format!(
        r#"{{"command":"replicator",{TABLE},"lambda":168,
        "replicator":{{"gain":0.2,"delay":0.25,"mode":"pairwise","horizon":100}}}}"#
    );
    let (out, csv) = run_with_csv(&dir, "replicator", &json);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(csv.starts_with("time,share_1,share_2,share_3\n"));
    let rows = rows(&csv);
    assert!(rows.len() > 100);
    for row in rows {
        let shares: Vec<f64> = row[1..].iter().map(|v| v.parse().unwrap()).collect();
        assert!((shares.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(shares.iter().all(|&x| x >= 0.0));
    }
}

#[test]
fn negative_lambda_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let json = format!(r#"{{"command":"equilibrium",{E1},"lambda":-5}}"#);
    let (out, csv) = run_with_csv(&dir, "equilibrium", &json);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("`lambda`"), "{}", out.stderr);
    assert!(csv.is_empty());
}

#[test]
fn equilibrium_reports_regime_intervals() {
    let dir = TempDir::new().unwrap();
    let json = format!(r#"{{"command":"equilibrium",{E1},"lambda":190}}"#);
    let (out, csv) = run_with_csv(&dir, "run", &json);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(
        out.stdout.contains("lambda=190: mixed p=0.61276"),
        "{}",
        out.stdout
    );
    let rows = rows(&csv);
    let regimes: Vec<&str> = rows.iter().map(|r| r[3].as_str()).collect();
    assert_eq!(regimes, ["dominant_s1", "mixed", "dominant_s2"]);
    let lo: f64 = rows[1][0].parse().unwrap();
    let hi: f64 = rows[1][1].parse().unwrap();
    assert!((lo - 173.4984).abs() < 1e-3);
    assert!((hi - 216.1120).abs() < 1e-3);
    assert_eq!(rows[2][1], "inf");
}

#[test]
fn lambda_sweep_crosses_both_boundaries() {
    let dir = TempDir::new().unwrap();
    let json = format!(
        r#"{{"command":"equilibrium",{E1},
        "sweep":{{"parameter":"lambda","from":0,"to":250,"count":51}}}}"#
    );
    let (out, csv) = run_with_csv(&dir, "sweep", &json);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(csv.starts_with("lambda,regime,p\n"));
    let rows = rows(&csv);
    assert_eq!(rows.len(), 51);
    let lambdas: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(lambdas.windows(2).all(|w| w[0] < w[1]));

    let mut blocks: Vec<(&str, f64, f64)> = Vec::new();
    for (row, &lambda) in rows.iter().zip(&lambdas) {
        match blocks.last_mut() {
            Some((name, _, last)) if *name == row[1] => *last = lambda,
            _ => blocks.push((&row[1], lambda, lambda)),
        }
    }
    let names: Vec<&str> = blocks.iter().map(|b| b.0).collect();
    assert_eq!(names, ["dominant_s1", "mixed", "dominant_s2"]);
    assert!(blocks[0].2 < 173.4984 && 173.4984 < blocks[1].1);
    assert!(blocks[1].2 < 216.1120 && 216.1120 < blocks[2].1);
}

#[test]
fn tau_sweep_stays_on_the_simplex() {
    let dir = TempDir::new().unwrap();
    let json = format!(
        r#"{{"command":"replicator",{TABLE},"lambda":168,
        "replicator":{{"gain":0.2,"mode":"pairwise","horizon":100}},
        "sweep":{{"parameter":"tau","from":0,"to":15,"count":16}}}}"#
    );
    let (out, csv) = run_with_csv(&dir, "sweep", &json);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(csv.starts_with("tau,outcome,share_1,share_2,share_3\n"));
    let rows = rows(&csv);
    assert_eq!(rows.len(), 16);
    for row in &rows {
        let shares: Vec<f64> = row[2..].iter().map(|v| v.parse().unwrap()).collect();
        assert!((shares.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(shares.iter().all(|&x| x >= -1e-9));
    }
}

#[test]
fn empty_sweep_range_fails_validation() {
    let dir = TempDir::new().unwrap();
    for sweep in [
        r#"{"parameter":"lambda","from":0,"to":250,"count":0}"#,
        r#"{"parameter":"lambda","from":250,"to":0,"count":5}"#,
    ] {
        let json = format!(r#"{{"command":"equilibrium",{E1},"sweep":{sweep}}}"#);
        let (out, _) = run_with_csv(&dir, "sweep", &json);
        assert_eq!(out.code, 1);
        assert!(out.stderr.contains("empty range"), "{}", out.stderr);
    }
}

#[test]
fn unsweepable_parameter_is_named() {
    let dir = TempDir::new().unwrap();
    let json = format!(
        r#"{{"command":"equilibrium",{E1},"lambda":1,
        "sweep":{{"parameter":"capacity","from":1,"to":2,"count":2}}}}"#
    );
    let (out, _) = run_with_csv(&dir, "sweep", &json);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("`sweep.parameter`"), "{}", out.stderr);
    assert!(out.stderr.contains("capacity"), "{}", out.stderr);
}

#[test]
fn unknown_keys_fail_with_exit_one() {
    let dir = TempDir::new().unwrap();
    let cases = [
        format!(r#"{{"command":"dominance",{E1},"colour":"red"}}"#),
        r#"{"command":"dominance","capacity":50,"strategies":[{"alpha":1.5,"beta":0.75,"rtt":1},{"alpha":1,"beta":0.25}]}"#.to_string(),
        r#"{"command":"stability","topology":{"kind":"klimov","capacities":[1],"users":1},"rates":[0.5]}"#.to_string(),
        format!(
            r#"{{"command":"replicator",{TABLE},"lambda":1,
            "replicator":{{"gain":1,"delay":0,"mode":"pairwise","horizon":1,"solver":"rk4"}}}}"#
        ),
    ];
    for json in cases {
        let (out, _) = run_with_csv(&dir, "run", &json);
        assert_eq!(out.code, 1, "{json}");
        assert!(out.stderr.contains("unknown field"), "{}", out.stderr);
    }
}

#[test]
fn fields_foreign_to_the_command_are_rejected() {
    let dir = TempDir::new().unwrap();
    let json = format!(r#"{{"command":"dominance",{E1},"rates":[1,2]}}"#);
    let (out, _) = run_with_csv(&dir, "dominance", &json);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("`rates`"), "{}", out.stderr);
}

#[test]
fn seeded_simulation_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let json = r#"{"command":"simulate",
        "topology":{"kind":"reentrant","p1":10,"p2":5,"p3":20,"users":2},
        "strategies":[{"alpha":1,"beta":0.5},{"alpha":2,"beta":0.3}],
        "simulation":{"max_drops":300},"seed":42}"#;
    let (first, a) = run_with_csv(&dir, "simulate", json);
    let (second, b) = run_with_csv(&dir, "simulate", json);
    assert_eq!(first.code, 0, "{}", first.stderr);
    assert_eq!(second.code, 0);
    assert!(a.starts_with("time,event_index,user_index,pre_rate,post_rate\n"));
    assert_eq!(rows(&a).len(), 600);
    assert_eq!(a, b);

    let other = json.replace("\"seed\":42", "\"seed\":43");
    let (_, c) = run_with_csv(&dir, "simulate", &other);
    assert_ne!(a, c);
}

#[test]
fn parallel_sweeps_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let json = format!(
        r#"{{"command":"replicator",{TABLE},"replicator":{{"gain":0.25,"delay":1,"mode":"triple","horizon":40}},
        "sweep":{{"parameter":"lambda","from":100,"to":200,"count":24}}}}"#
    );
    let (out, a) = run_with_csv(&dir, "sweep", &json);
    assert_eq!(out.code, 0, "{}", out.stderr);
    for _ in 0..3 {
        let (_, b) = run_with_csv(&dir, "sweep", &json);
        assert_eq!(a, b);
    }
}

#[test]
fn builtin_topologies_round_trip_through_the_config() {
    let cases = [
        (
            r#"{"kind":"single_server","capacity":50,"users":3}"#,
            NetworkTopology::single_server(50.0, 3).unwrap(),
        ),
        (
            r#"{"kind":"klimov","capacities":[10,20,40]}"#,
            NetworkTopology::klimov(&[10.0, 20.0, 40.0]).unwrap(),
        ),
        (
            r#"{"kind":"reentrant","p1":10,"p2":5,"p3":20,"users":2}"#,
            NetworkTopology::reentrant(10.0, 5.0, 20.0, 2).unwrap(),
        ),
    ];
    for (block, builtin) in cases {
        let json = format!(r#"{{"command":"stability","topology":{block},"rates":[]}}"#);
        let config = ExperimentConfig::from_json(&json).unwrap();
        let from_config = config.topology().unwrap().load_matrix();
        assert_eq!(from_config.matrix(), builtin.load_matrix().matrix());

        // explicit matrices, serialized and parsed back
        let explicit = serde_json::to_string(&TopologyDef::explicit(&builtin)).unwrap();
        let json = format!(r#"{{"command":"stability","topology":{explicit},"rates":[]}}"#);
        let config = ExperimentConfig::from_json(&json).unwrap();
        let rebuilt = config.topology().unwrap().load_matrix();
        assert_eq!(rebuilt.matrix(), builtin.load_matrix().matrix());
    }
}

#[test]
fn stability_flags_overloaded_rows() {
    let dir = TempDir::new().unwrap();
    let json = r#"{"command":"stability",
        "topology":{"kind":"reentrant","p1":10,"p2":5,"p3":20,"users":2},
        "rates":[3,4]}"#;
    let (out, csv) = run_with_csv(&dir, "stability", json);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.contains("stable: false"), "{}", out.stdout);
    assert!(csv.starts_with("row,utilization,binding\n"));
}

#[test]
fn dominance_threshold_is_printed() {
    let dir = TempDir::new().unwrap();
    let json = format!(r#"{{"command":"dominance",{E1}}}"#);
    let (out, csv) = run_with_csv(&dir, "dominance", &json);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let value: f64 = rows(&csv)[0][0].parse().unwrap();
    assert!((value - 173.4984).abs() < 1e-3);
}

#[test]
fn payoff_matrix_lists_every_pair() {
    let dir = TempDir::new().unwrap();
    let json = format!(r#"{{"command":"payoff-matrix",{TABLE},"lambda":140}}"#);
    let (out, csv) = run_with_csv(&dir, "payoff-matrix", &json);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let rows = rows(&csv);
    assert_eq!(rows.len(), 9);
    // diagonal entry: (1 + beta) c / 4 - 2 lambda alpha / (c (1 - beta))
    assert!(csv.starts_with("i,j,payoff\n"));
    let j33: f64 = rows[8][2].parse().unwrap();
    let expected = 1.25 * 50.0 / 4.0 - 2.0 * 140.0 * 1.0 / (50.0 * 0.75);
    assert!((j33 - expected).abs() < 1e-12);
}

#[test]
fn model_inconsistencies_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let frozen = r#"{"command":"fixed-point","topology":{"kind":"klimov","capacities":[10,20]},
        "strategies":[{"alpha":0,"beta":0.5},{"alpha":0,"beta":0.5}]}"#;
    let (out, _) = run_with_csv(&dir, "fixed-point", frozen);
    assert_eq!(out.code, 2, "{}", out.stderr);

    let coarse = format!(
        r#"{{"command":"replicator",{E1},"lambda":190,
        "replicator":{{"gain":50,"delay":0,"mode":"pairwise","step":1,"horizon":10,"initial_shares":[0.9,0.1]}}}}"#
    );
    let (out, _) = run_with_csv(&dir, "replicator", &coarse);
    assert_eq!(out.code, 2, "{}", out.stderr);
    assert!(out.stderr.contains("reduce the integration step"));
}

#[test]
fn core_input_errors_name_the_field() {
    let dir = TempDir::new().unwrap();
    let cases = [
        (
            r#"{"command":"dominance","capacity":50,"strategies":[{"alpha":1.5,"beta":0.75},{"alpha":1,"beta":1.0}]}"#,
            "`strategies[1].beta`",
        ),
        (
            r#"{"command":"dominance","capacity":-1,"strategies":[{"alpha":1.5,"beta":0.75},{"alpha":1,"beta":0.25}]}"#,
            "`capacity`",
        ),
        (
            r#"{"command":"stability","topology":{"kind":"explicit","constituency":[[1]],"capacities":[1],"routing":[[1]],"input":[[1]]},"rates":[0]}"#,
            "`topology`",
        ),
        (
            r#"{"command":"simulate","topology":{"kind":"single_server","capacity":10,"users":1},"strategies":[{"alpha":1,"beta":0.5}],"simulation":{"max_drops":3,"initial_rates":[20]}}"#,
            "`simulation.initial_rates`",
        ),
        (
            r#"{"command":"replicator","capacity":50,"lambda":1,"strategies":[{"alpha":1.5,"beta":0.75},{"alpha":1,"beta":0.25}],"replicator":{"gain":1,"delay":1,"step":0.3,"mode":"pairwise","horizon":5}}"#,
            "`replicator.step`",
        ),
    ];
    for (json, field) in cases {
        let (out, _) = run_with_csv(&dir, "run", json);
        assert_eq!(out.code, 1, "{json}: {}", out.stderr);
        assert!(out.stderr.contains(field), "{field}: {}", out.stderr);
    }
}

#[test]
fn requested_command_must_match_the_config() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        &dir,
        "c.json",
        &format!(r#"{{"command":"dominance",{E1}}}"#),
    );
    let out = arena(&["equilibrium", "--config", path_str(&config)]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("`command`"), "{}", out.stderr);
}

#[test]
fn unreadable_config_and_bad_usage_exit_one() {
    let out = arena(&["run", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("`config`"));
    assert_eq!(arena(&["fly", "--config", "x.json"]).code, 1);
    assert_eq!(arena(&["--help"]).code, 0);
}

#[test]
fn output_path_may_come_from_the_config() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("from_config.csv");
    let json = format!(
        r#"{{"command":"dominance",{E1},"output_path":{}}}"#,
        serde_json::to_string(path_str(&target)).unwrap()
    );
    let config = write_config(&dir, "c.json", &json);
    let out = arena(&["dominance", "--config", path_str(&config)]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(fs::read_to_string(&target)
        .unwrap()
        .starts_with("lambda_star\n"));
}
