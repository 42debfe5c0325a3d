use lifeline_core::scenario::{
    bundled_names, bundled_text, export_plot_data, export_report, import_report_json, parse_scenario, ReportFormat,
};
use lifeline_core::{load_bundled, validate_topology, AutonomyMode, Error, Scenario, ScenarioError};

fn scenario(name: &str) -> Scenario {
    load_bundled(name).unwrap().resolve().unwrap()
}

#[test]
fn example2_has_two_networks_and_a_pump_group() {
    let doc = load_bundled("example2").unwrap();
    assert_eq!(doc.model.networks.len(), 2);
    let pumps: Vec<_> = doc
        .model
        .networks
        .iter()
        .flat_map(|n| &n.nodes)
        .filter(|n| n.redundancy_group.as_deref() == Some("pumps"))
        .collect();
    assert_eq!(pumps.len(), 2);
}

#[test]
fn every_bundled_scenario_validates() {
    for name in bundled_names() {
        let sc = scenario(name);
        let report = validate_topology(&sc.model);
        assert!(report.is_valid(), "{name}: {:?}", report.violations);
        sc.curves.check_references(&sc.model.nodes).unwrap();
    }
}

#[test]
fn serialized_documents_parse_back() {
    for name in bundled_names() {
        let doc = load_bundled(name).unwrap();
        assert_eq!(parse_scenario(&doc.to_json()).unwrap(), doc, "{name}");
    }
}

#[test]
fn fukushima_node_tables_carry_site_intensities() {
    let doc = load_bundled("fukushima-detailed").unwrap();
    let node = |id: &str| doc.model.networks.iter().flat_map(|n| &n.nodes).find(|n| n.id == id).unwrap();
    let pga = |id: &str| node(id).site.get(&lifeline_core::HazardKind::EarthquakePga).and_then(|e| e.intensity);
    let depth = |id: &str| node(id).site.get(&lifeline_core::HazardKind::TsunamiDepth).and_then(|e| e.intensity);
    assert_eq!(pga("DieselGenerator"), Some(0.469));
    assert_eq!(depth("DieselGenerator"), Some(9.0));
    assert_eq!(pga("ACLine"), Some(0.415));
    assert_eq!(depth("ACLine"), None);
    assert_eq!(pga("SeawaterPump"), Some(1.0));
    assert_eq!(depth("PCV"), Some(16.0));
    assert_eq!(depth("LocalFireEngines"), None);
}

#[test]
fn unknown_edge_node_is_named_with_its_line() {
    let mut doc = load_bundled("example3").unwrap();
    doc.model.networks[0].configurations[2].edges[1][0] = "Ghost".into();
    let text = doc.to_json();
    match parse_scenario(&text) {
        Err(ScenarioError::References(errors)) => {
            assert_eq!(errors.len(), 1);
            assert!(errors[0].message.contains("'Ghost'"), "{}", errors[0].message);
            let line = errors[0].line.unwrap();
            assert!(text.lines().nth(line - 1).unwrap().contains("\"Ghost\""));
        }
        other => panic!("expected a reference error, got {other:?}"),
    }
}

#[test]
fn empty_and_malformed_files() {
    assert!(matches!(parse_scenario(""), Err(ScenarioError::Syntax { .. })));
    assert!(matches!(parse_scenario("{\n  \"schema_version\": 1,\n  oops"), Err(ScenarioError::Syntax { line: 3, .. })));
    let future = bundled_text("example4").unwrap().replacen("\"schema_version\": 1", "\"schema_version\": 7", 1);
    assert_eq!(
        parse_scenario(&future),
        Err(ScenarioError::SchemaVersion { found: 7, expected: 1 })
    );
    let missing_curves = bundled_text("fukushima-simplified")
        .unwrap()
        .replace("fukushima_calibration.json", "nowhere.json");
    assert!(matches!(parse_scenario(&missing_curves), Err(ScenarioError::References(_))));
}

#[test]
fn unknown_bundled_name() {
    assert!(matches!(
        load_bundled("example9"),
        Err(Error::Scenario(ScenarioError::UnknownScenario(_)))
    ));
}

#[test]
fn event_needs_exactly_one_intensity_source() {
    let mut doc = load_bundled("example3").unwrap();
    doc.timeline.events[0].uniform = Some(0.5);
    doc.timeline.events[0].hazard = Some(lifeline_core::HazardKind::Generic);
    assert!(matches!(doc.resolve(), Err(ScenarioError::Invalid(_))));
}

#[test]
fn quiescent_report_exports_zero_loss() {
    let mut doc = load_bundled("example3").unwrap();
    doc.timeline.events.clear();
    let sc = doc.resolve().unwrap();
    let rep = sc.run(&sc.run_options(None)).unwrap();
    assert_eq!(rep.steps.len(), 2);
    let csv = String::from_utf8(export_report(&rep, ReportFormat::Csv)).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("time_h,entity_kind,entity_id,quantity,value"));
    let loc_rows: Vec<&str> = csv.lines().filter(|l| l.contains(",network,")).collect();
    assert_eq!(loc_rows, vec!["0.0,network,net,loc,0.0", "1.0,network,net,loc,0.0"]);
}

#[test]
fn json_export_round_trips_exactly() {
    let sc = scenario("fukushima-simplified");
    let rep = sc.run(&sc.run_options(None)).unwrap();
    let back = import_report_json(&export_report(&rep, ReportFormat::Json)).unwrap();
    assert_eq!(back, rep);
    for (a, b) in back.probabilities().zip(rep.probabilities()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn csv_is_byte_stable_and_carries_layer_occupancy() {
    let sc = scenario("fukushima-simplified");
    let first = export_report(&sc.run(&sc.run_options(None)).unwrap(), ReportFormat::Csv);
    let second = export_report(&sc.run(&sc.run_options(None)).unwrap(), ReportFormat::Csv);
    assert_eq!(first, second);
    let text = String::from_utf8(first).unwrap();
    for label in ["off-site AC", "in-site AC", "DC"] {
        assert!(text.contains(&format!(",configuration,electric/{label},p_occ,")), "{label}");
    }
    let dc_at_end: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("24.0,configuration,electric/DC,p_occ,"))
        .unwrap()
        .parse()
        .unwrap();
    assert!((dc_at_end - 0.0079).abs() < 1e-4, "{dc_at_end}");
}

#[test]
fn plot_tables_cover_every_network() {
    let sc = scenario("example2");
    let rep = sc.run(&sc.run_options(None)).unwrap();
    let files = export_plot_data(&rep);
    let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
    for expected in ["electric_occupancy.csv", "water_occupancy.csv", "water_p_f.csv", "classic_decay.csv"] {
        assert!(names.contains(&expected), "{expected} missing from {names:?}");
    }
    let (_, occupancy) = files.iter().find(|(n, _)| n == "water_occupancy.csv").unwrap();
    assert_eq!(occupancy.lines().next(), Some("time_h,loc,tower"));
    assert_eq!(occupancy.lines().count(), rep.steps.len() + 1);
}

#[test]
fn simplified_fukushima_narrative() {
    let sc = scenario("fukushima-simplified");
    let rep = sc.run(&sc.run_options(None)).unwrap();
    let occ = |t: f64, net: &str, label: &str| rep.at(t).unwrap().network(net).unwrap().configuration(label).unwrap().p_occ;
    let loc = |t: f64, net: &str| rep.at(t).unwrap().network(net).unwrap().loc;

    assert_eq!(occ(-0.5, "electric", "off-site AC"), 1.0);
    assert!(occ(0.5, "electric", "off-site AC") < 0.01);
    assert!(occ(0.5, "electric", "in-site AC") > 0.9);
    assert!(occ(1.0, "electric", "in-site AC") < 1e-9);
    assert!(occ(1.0, "electric", "DC") + loc(1.0, "electric") > 0.999);

    // The isolation condenser carries the water network until its
    // autonomy runs out, ten hours after the earthquake.
    assert!(occ(9.5, "water", "IC") > 0.99);
    assert!(loc(9.5, "water") < 0.01);
    assert!(loc(10.5, "water") - loc(9.5, "water") > 0.3);
}

#[test]
fn both_autonomy_modes_run_on_fukushima() {
    let sc = scenario("fukushima-detailed");
    let expected = sc.run(&sc.run_options(Some(AutonomyMode::Expected))).unwrap();
    let dominant = sc.run(&sc.run_options(Some(AutonomyMode::Dominant))).unwrap();
    assert_eq!(expected.autonomy_mode, AutonomyMode::Expected);
    let battery = |r: &lifeline_core::ProbabilityReport| r.at(24.0).unwrap().node("DCBattery").unwrap().p_sf;
    // Duty weighted by a small occupancy drains the battery more slowly.
    assert!(battery(&expected) < battery(&dominant));
}
