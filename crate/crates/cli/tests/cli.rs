use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn gbubbles(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gbubbles"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(args: &[&str]) -> Value {
    let out = gbubbles(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json report")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gbubbles-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn equal_thirds_cost_one_and_a_half() {
    let r = report(&["simplex-cost", "--m", "3", "--a", "0.3333,0.3333,0.3334"]);
    let c = r["result"]["cost"].as_f64().unwrap();
    assert!((c - 1.5).abs() < 1e-6, "{c}");
    assert_eq!(r["tool"], "gbubbles");
    assert_eq!(r["config"]["m"], "3");
}

#[test]
fn hessian_check_reports_identity_and_difference() {
    let r = report(&["hessian-check", "--m", "2", "--a", "0.6,0.4", "--b", "1,-1"]);
    let fd = r["result"]["fd"].as_f64().unwrap();
    let id = r["result"]["identity"].as_f64().unwrap();
    assert!((fd + 6.488).abs() < 1e-3 && (id + 6.488).abs() < 1e-3, "{fd} {id}");
    assert!(r["result"]["rel_err"].as_f64().unwrap() < 1e-5);
}

#[test]
fn malformed_input_exits_with_two() {
    for args in [
        vec!["simplex-cost", "--bogus"],
        vec!["simplex-cost", "--a", "0.5,x"],
        vec!["simplex-cost", "--a", "0.7,0.7"],
        vec!["simplex-cost", "--m", "3", "--a", "0.5,0.5"],
        vec!["gradient-check", "--a", "0.5,0.5"],
        vec!["simplex-cost", "--format", "xml"],
        vec![],
    ] {
        let out = gbubbles(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn reports_are_deterministic() {
    let args = ["optimize-2d", "--nodes", "16", "--steps", "30", "--jitter", "0.05", "--seed", "3"];
    let first = gbubbles(&args);
    let second = gbubbles(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    let other = gbubbles(&["optimize-2d", "--nodes", "16", "--steps", "30", "--jitter", "0.05", "--seed", "4"]);
    assert_ne!(first.stdout, other.stdout);
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let cfg = scratch("run.cfg");
    std::fs::write(&cfg, "# two sets\ncommand = simplex-cost\na = 0.6, 0.4\nformat = json\n").unwrap();
    let r = report(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(r["command"], "simplex-cost");
    assert!((r["result"]["cost"].as_f64().unwrap() - 0.968417118155805).abs() < 1e-12);
    let r = report(&["--config", cfg.to_str().unwrap(), "--a", "0.5,0.5"]);
    assert!((r["result"]["cost"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(r["config"]["a"], "0.5,0.5");

    std::fs::write(&cfg, "nonsense = 1\n").unwrap();
    assert_eq!(gbubbles(&["simplex-cost", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn near_normalised_volumes_are_rescaled_with_a_warning() {
    let out = gbubbles(&["simplex-cost", "--a", "0.5,0.5000004"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("renormalised"));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    let a: f64 = r["result"]["a"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
    assert!((a - 1.0).abs() < 1e-15);
}

#[test]
fn csv_output_and_plot_files() {
    let out = gbubbles(&["hessian-check", "--a", "0.6,0.4", "--b", "1,-1", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("key,value\n"));
    assert!(text.lines().any(|l| l.starts_with("result.identity,")));

    let plot = scratch("net.csv");
    let report_path = scratch("report.json");
    let out = gbubbles(&[
        "optimize-2d",
        "--nodes",
        "12",
        "--steps",
        "10",
        "--plot",
        plot.to_str().unwrap(),
        "--output",
        report_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let csv = std::fs::read_to_string(&plot).unwrap();
    assert_eq!(csv.lines().next(), Some("snapshot,x,y,edge_label"));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert!(r["result"]["cost"].as_f64().unwrap() <= r["result"]["initial_cost"].as_f64().unwrap());
}

#[test]
fn spectrum_of_the_circle() {
    let r = report(&["spectrum", "--shape", "circle", "--nodes", "64"]);
    let tone = r["result"]["tone"].as_f64().unwrap();
    assert!((tone - 2.0).abs() < 1e-3, "{tone}");
}

#[test]
fn one_d_search_finds_the_central_slab() {
    let r = report(&["optimize-1d", "--m", "3"]);
    let c = r["result"]["cost"].as_f64().unwrap();
    assert!((c - 1.822818951701224).abs() < 1e-9);
    assert_eq!(r["result"]["best"]["labels"].as_array().unwrap().len(), 3);
}

#[test]
fn barycenters_have_full_rank() {
    let r = report(&["barycenters", "--a", "0.5,0.3,0.2"]);
    assert_eq!(r["result"]["rank"], 2);
}

#[test]
fn quick_verification_passes() {
    let out = gbubbles(&["verify-all", "--quick"]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.lines().filter(|l| l.starts_with("[PASS]")).count(), 9, "{err}");
    assert!(out.status.success());
}
