use std::fs;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lifeline-iim"))
        .args(args)
        .env_remove("LIFELINE_IIM_SCENARIO_DIR")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn run_writes_a_csv_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.csv");
    let out = cli(&["run", "--scenario", "fukushima-simplified", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("time_h,entity_kind,entity_id,quantity,value\n"));
    assert!(text.contains(",configuration,electric/DC,p_occ,"));
}

#[test]
fn run_honours_format_and_time_step() {
    let out = cli(&["run", "--scenario", "example3", "--format", "json", "--dt", "0.5", "--autonomy-mode", "dominant"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["autonomy_mode"], "dominant");
    assert_eq!(report["steps"].as_array().unwrap().len(), 3);
}

#[test]
fn compare_pra_agrees_on_the_layer_example() {
    let out = cli(&["compare-pra", "--scenario", "example3", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let last = text.lines().last().unwrap();
    let diff: f64 = last.strip_prefix("max diff ").unwrap().parse().unwrap();
    assert!(diff <= 1e-12, "{text}");
}

#[test]
fn compare_pra_evaluates_bundled_trees() {
    let out = cli(&["compare-pra", "--scenario", "example4"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("fault tree 'alarm clock fails'"));
    assert!(text.contains("-alarm clock -backup person"));
}

const TWO_INFLOWS: &str = r#"{
  "schema_version": 1,
  "name": "two-inflows",
  "model": {
    "networks": [
      {
        "id": "net",
        "nodes": [
          { "id": "S1", "kind": "source" },
          { "id": "S2", "kind": "source" },
          { "id": "T", "kind": "target" }
        ],
        "configurations": [
          { "label": "both", "edges": [["S1", "T"], ["S2", "T"]] }
        ],
        "targets": ["T"]
      }
    ]
  },
  "timeline": { "t0": 0.0, "t_end": 1.0, "dt": 1.0 }
}"#;

#[test]
fn validate_reports_the_single_inflow_rule() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("two.json");
    fs::write(&path, TWO_INFLOWS).unwrap();
    let out = cli(&["validate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("single-inflow rule"), "{}", stdout(&out));
}

#[test]
fn validate_accepts_bundled_scenarios() {
    let out = cli(&["validate", "--scenario", "fukushima-detailed"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(cli(&["run", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(cli(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(cli(&["run", "--scenario", "example3", "--format", "xml"]).status.code(), Some(2));
    assert_eq!(cli(&["importance", "--scenario", "example3", "--node", "A"]).status.code(), Some(2));
}

#[test]
fn unknown_scenario_fails() {
    let out = cli(&["run", "--scenario", "nowhere"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown scenario 'nowhere'"));
}

#[test]
fn scenario_directory_overrides_bundled_copies() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("example3.json"), TWO_INFLOWS).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_lifeline-iim"))
        .args(["validate", "--scenario", "example3"])
        .env("LIFELINE_IIM_SCENARIO_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("single-inflow rule"));
}

#[test]
fn importance_and_plot_export() {
    let out = cli(&["importance", "--scenario", "fukushima-detailed", "--node", "DieselGenerator", "--target", "PCV"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().next(), Some("time_h,node,target,delta_p_f"));
    assert!(text.lines().skip(1).all(|l| l.contains(",DieselGenerator,PCV,")));

    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["export-plot-data", "--scenario", "example2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("water_occupancy.csv").is_file());
    assert!(dir.path().join("classic_decay.csv").is_file());
}

#[test]
fn lists_every_bundled_scenario() {
    let text = stdout(&cli(&["list-scenarios"]));
    for name in ["example1", "example2", "example3", "example4", "fukushima-simplified", "fukushima-detailed"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
}
