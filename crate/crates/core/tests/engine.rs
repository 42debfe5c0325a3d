use lifeline_core::engine::combine_reports;
use lifeline_core::{
    importance_series, load_bundled, run_ensemble, run_timeline, run_timeline_with, Adjacency, AutonomyMode, Configuration,
    Error, EventVector, HazardKind, Intervention, ProbabilityReport, RunOptions, Scenario, Timeline,
};

fn scenario(name: &str) -> Scenario {
    load_bundled(name).unwrap().resolve().unwrap()
}

fn options() -> RunOptions {
    RunOptions::with_mode(AutonomyMode::Dominant)
}

#[test]
fn quiet_timeline_keeps_the_first_layer() {
    let sc = scenario("example3");
    let rep = run_timeline(&sc.model, &sc.curves, &Timeline::quiet(0.0, 5.0, 1.0), AutonomyMode::Expected).unwrap();
    assert_eq!(rep.steps.len(), 6);
    for step in &rep.steps {
        let net = step.network("net").unwrap();
        assert_eq!(net.loc, 0.0);
        assert_eq!(net.configurations[0].p_occ, 1.0);
        assert!(net.nodes.iter().all(|n| n.p_f == 0.0));
    }
}

#[test]
fn recovery_layer_restores_capacity_at_its_time() {
    let sc = scenario("example3");
    let mut timeline = Timeline::quiet(0.0, 4.0, 1.0);
    timeline.events.push(
        EventVector::new(0.0)
            .with("S1", HazardKind::Generic, 1.0)
            .with("S2", HazardKind::Generic, 1.0),
    );
    let net = sc.model.network("net").unwrap();
    let pos = |id: &str| net.position(id).unwrap();
    let adjacency = Adjacency::from_edges(net.nodes.len(), &[(pos("C"), pos("T"))]).unwrap();
    // C becomes a temporary source (a mobile generator, say).
    let mut model = sc.model.clone();
    model.nodes.iter_mut().find(|n| n.id == "C").unwrap().kind = lifeline_core::NodeKind::Source;
    timeline.interventions.push(Intervention {
        time: 2.0,
        network: "net".into(),
        configuration: Configuration::new("bypass", 3, adjacency),
    });
    let rep = run_timeline(&model, &sc.curves, &timeline, AutonomyMode::Expected).unwrap();
    let loc = rep.loc_series("net");
    assert_eq!(loc[0], 1.0);
    assert_eq!(loc[1], 1.0);
    assert_eq!(loc[2], 0.0);
    assert_eq!(loc[3], 0.0);
    assert!(rep.steps[1].network("net").unwrap().configuration("bypass").is_none());
    assert_eq!(rep.steps[2].network("net").unwrap().configuration("bypass").unwrap().p_occ, 1.0);
}

#[test]
fn loss_of_capacity_never_recovers_without_interventions() {
    for name in ["example1", "example2", "fukushima-simplified"] {
        let sc = scenario(name);
        for mode in [AutonomyMode::Expected, AutonomyMode::Dominant] {
            let rep = sc.run(&sc.run_options(Some(mode))).unwrap();
            for net in &rep.steps[0].networks {
                let series = rep.loc_series(&net.id);
                for w in series.windows(2) {
                    assert!(w[1] >= w[0] - 1e-12, "{name}/{}: {} then {}", net.id, w[0], w[1]);
                }
            }
            for node in &sc.model.nodes {
                let series = rep.node_series(&node.id);
                for w in series.windows(2) {
                    assert!(w[1].p_sf >= w[0].p_sf, "{name}/{}", node.id);
                }
            }
        }
    }
}

#[test]
fn intervention_leaves_earlier_steps_untouched() {
    let sc = scenario("fukushima-detailed");
    let mut without = sc.timeline.clone();
    without.interventions.clear();
    let with = run_timeline_with(&sc.model, &sc.curves, &sc.timeline, &options()).unwrap();
    let bare = run_timeline_with(&sc.model, &sc.curves, &without, &options()).unwrap();
    for (a, b) in with.steps.iter().zip(&bare.steps) {
        if a.time_h < 3.0 {
            assert_eq!(a, b);
        }
    }
    assert!(with.at(4.0).unwrap().network("water").unwrap().loc < bare.at(4.0).unwrap().network("water").unwrap().loc);
}

#[test]
fn runs_are_bit_identical() {
    let sc = scenario("fukushima-detailed");
    let a = sc.run(&sc.run_options(None)).unwrap();
    let b = sc.run(&sc.run_options(None)).unwrap();
    assert!(a.probabilities().zip(b.probabilities()).all(|(x, y)| x.to_bits() == y.to_bits()));
}

fn scaled_tsunami(sc: &Scenario, factor: f64) -> Timeline {
    let mut t = sc.timeline.clone();
    for e in &mut t.events {
        for hit in e.intensities.values_mut() {
            if hit.hazard == HazardKind::TsunamiDepth {
                hit.value *= factor;
            }
        }
    }
    t
}

fn max_gap(a: &ProbabilityReport, b: &ProbabilityReport) -> f64 {
    a.probabilities().zip(b.probabilities()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn ensemble_of_one_is_the_run_itself() {
    let sc = scenario("fukushima-simplified");
    let single = run_timeline_with(&sc.model, &sc.curves, &sc.timeline, &options()).unwrap();
    let ensemble = run_ensemble(&sc.model, &sc.curves, &[(sc.timeline.clone(), 3.5)], &options()).unwrap();
    assert_eq!(max_gap(&single, &ensemble), 0.0);
    let twins = run_ensemble(
        &sc.model,
        &sc.curves,
        &[(sc.timeline.clone(), 0.2), (sc.timeline.clone(), 0.7)],
        &options(),
    )
    .unwrap();
    assert!(max_gap(&single, &twins) < 1e-15);
}

#[test]
fn ensemble_sits_between_its_members() {
    let sc = scenario("fukushima-simplified");
    let low = scaled_tsunami(&sc, 0.5);
    let high = scaled_tsunami(&sc, 1.0);
    let a = run_timeline_with(&sc.model, &sc.curves, &low, &options()).unwrap();
    let b = run_timeline_with(&sc.model, &sc.curves, &high, &options()).unwrap();
    let mix = run_ensemble(&sc.model, &sc.curves, &[(low, 1.0), (high, 3.0)], &options()).unwrap();
    for net in ["electric", "water"] {
        let (la, lb, lm) = (a.loc_series(net), b.loc_series(net), mix.loc_series(net));
        for i in 0..lm.len() {
            assert!(lm[i] >= la[i].min(lb[i]) - 1e-15 && lm[i] <= la[i].max(lb[i]) + 1e-15);
            assert!((lm[i] - (0.25 * la[i] + 0.75 * lb[i])).abs() < 1e-12);
        }
    }
}

#[test]
fn ensemble_weight_errors() {
    let sc = scenario("example3");
    let rep = sc.run(&sc.run_options(None)).unwrap();
    for weights in [vec![0.0, 0.0], vec![-1.0, 2.0], vec![f64::NAN, 1.0]] {
        assert!(matches!(
            combine_reports(&[rep.clone(), rep.clone()], &weights),
            Err(Error::ZeroWeights)
        ));
    }
}

#[test]
fn scenario_ensemble_block_is_used() {
    let mut doc = load_bundled("fukushima-simplified").unwrap();
    let member = |label: &str, weight: f64, scale: f64| lifeline_core::scenario::EnsembleMember {
        label: label.into(),
        weight,
        scale: [(HazardKind::TsunamiDepth, scale)].into_iter().collect(),
    };
    doc.analysis.ensemble = vec![member("calm", 1.0, 0.5), member("as observed", 1.0, 1.0)];
    let sc = doc.resolve().unwrap();
    let mixed = sc.run(&sc.run_options(None)).unwrap();
    let plain = scenario("fukushima-simplified");
    let observed = plain.run(&plain.run_options(None)).unwrap();
    let calm = run_timeline_with(&plain.model, &plain.curves, &scaled_tsunami(&plain, 0.5), &plain.run_options(None)).unwrap();
    let m = mixed.loc_series("electric");
    let (o, c) = (observed.loc_series("electric"), calm.loc_series("electric"));
    for i in 0..m.len() {
        assert!((m[i] - 0.5 * (o[i] + c[i])).abs() < 1e-12);
    }
}

#[test]
fn importance_is_non_negative_and_zero_before_events() {
    let sc = scenario("fukushima-detailed");
    let opts = sc.run_options(None);
    for pair in &sc.document.analysis.importance_pairs {
        let series = importance_series(&sc.model, &sc.curves, &sc.timeline, &opts, &pair.node, &pair.target).unwrap();
        for (t, d) in &series {
            assert!(*d >= -1e-12, "{} -> {} at {t}: {d}", pair.node, pair.target);
            if *t < 0.0 {
                assert_eq!(*d, 0.0);
            }
        }
    }
    let battery = importance_series(&sc.model, &sc.curves, &sc.timeline, &opts, "DCBattery", "PCV").unwrap();
    assert!(battery.iter().any(|(_, d)| *d > 0.0));
}

#[test]
fn classic_companion_series() {
    let sc = scenario("example2");
    let rep = sc.run(&sc.run_options(None)).unwrap();
    let first = rep.steps[0].classic.as_ref().unwrap();
    assert!(first.corrected);
    assert_eq!(first.system_score, 0.0);
    let scores: Vec<f64> = rep.steps.iter().map(|s| s.classic.as_ref().unwrap().system_score).collect();
    assert!(scores.windows(2).all(|w| w[1] >= w[0]));
    assert!(*scores.last().unwrap() > 0.0);
}

#[test]
fn bad_timelines_are_rejected() {
    let sc = scenario("example3");
    let mut t = Timeline::quiet(0.0, 1.0, 0.0);
    assert!(matches!(run_timeline(&sc.model, &sc.curves, &t, AutonomyMode::Expected), Err(Error::InvalidTimeline(_))));
    t.dt = 0.5;
    t.events.push(EventVector::new(3.0).with("A", HazardKind::Generic, 0.5));
    assert!(matches!(run_timeline(&sc.model, &sc.curves, &t, AutonomyMode::Expected), Err(Error::InvalidTimeline(_))));
}
