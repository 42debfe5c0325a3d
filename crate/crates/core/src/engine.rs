//! Time stepping: carried failure state, autonomy clocks, interventions and
//! report assembly.

use serde::{Deserialize, Serialize};

use crate::cascade::{union, CascadeSolver};
use crate::classic::ClassicSystem;
use crate::error::{Error, Result};
use crate::graph::{Configuration, SystemModel};
use crate::hazard::{autonomy_term, hazard_term, self_failure, CurveLibrary, EventVector, HazardKind};
use crate::report::{
    ClassicNodeRecord, ClassicRecord, ConfigurationRecord, NetworkRecord, NodeRecord, ProbabilityReport, StepRecord,
};

/// Events and interventions within this distance of a grid point belong to
/// that grid point.
const TIME_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutonomyMode {
    /// Duty accrues in proportion to the probability the node's layers are
    /// active.
    #[default]
    Expected,
    /// Duty accrues in full while one of the node's layers is the most
    /// likely active layer, and not at all otherwise.
    Dominant,
}

impl AutonomyMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AutonomyMode::Expected => "expected",
            AutonomyMode::Dominant => "dominant",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Intervention {
    pub time: f64,
    pub network: String,
    /// Appended below every existing layer.
    pub configuration: Configuration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub events: Vec<EventVector>,
    pub interventions: Vec<Intervention>,
}

impl Timeline {
    pub fn quiet(t0: f64, t_end: f64, dt: f64) -> Self {
        Timeline {
            t0,
            t_end,
            dt,
            events: Vec::new(),
            interventions: Vec::new(),
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.t0.is_finite() && self.t_end.is_finite() && self.t0 < self.t_end) {
            return Err(Error::InvalidTimeline(format!("start {} must precede end {}", self.t0, self.t_end)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidTimeline(format!("time step {} must be positive", self.dt)));
        }
        let outside = |t: f64| t < self.t0 - TIME_EPSILON || t > self.t_end + TIME_EPSILON;
        let mut previous = f64::NEG_INFINITY;
        for e in &self.events {
            if outside(e.time) {
                return Err(Error::InvalidTimeline(format!("event at {} lies outside [{}, {}]", e.time, self.t0, self.t_end)));
            }
            if e.time < previous {
                return Err(Error::InvalidTimeline("events must be sorted by time".into()));
            }
            previous = e.time;
            for (node, hit) in &e.intensities {
                if !(hit.value.is_finite() && hit.value >= 0.0) {
                    return Err(Error::InvalidIntensity {
                        context: format!("event at {} on '{node}'", e.time),
                        value: hit.value,
                    });
                }
            }
        }
        for i in &self.interventions {
            if outside(i.time) {
                return Err(Error::InvalidTimeline(format!(
                    "intervention at {} lies outside [{}, {}]",
                    i.time, self.t0, self.t_end
                )));
            }
        }
        Ok(())
    }

    /// Grid `t0, t0 + dt, ...` closed at `t_end`.
    pub fn times(&self) -> Vec<f64> {
        let span = (self.t_end - self.t0) / self.dt;
        let steps = (span - TIME_EPSILON).ceil().max(0.0) as usize;
        (0..=steps)
            .map(|i| if i == steps { self.t_end } else { self.t0 + i as f64 * self.dt })
            .collect()
    }

    /// Index of the grid point an instant is applied at: the first point at
    /// or after it.
    fn slot(times: &[f64], t: f64) -> usize {
        times.iter().position(|&g| g >= t - TIME_EPSILON).unwrap_or(times.len() - 1)
    }
}

/// Duty hours gained by a node over `dt` given the occurrence
/// probabilities of its network's layers at the previous step.
/// `node_layers` lists the layers the node belongs to.
pub fn autonomy_clock_advance(dt: f64, p_occ: &[f64], node_layers: &[usize], mode: AutonomyMode) -> f64 {
    match mode {
        AutonomyMode::Expected => {
            let active: f64 = node_layers.iter().filter_map(|&k| p_occ.get(k)).sum();
            dt * active.min(1.0)
        }
        AutonomyMode::Dominant => {
            let top = p_occ.iter().copied().fold(0.0, f64::max);
            let dominant = top > 0.0 && node_layers.iter().any(|&k| p_occ.get(k) == Some(&top));
            if dominant {
                dt
            } else {
                0.0
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOptions {
    pub mode: AutonomyMode,
    /// Adds the deterministic companion series; the flag selects the
    /// series-parallel correction.
    pub classic: Option<bool>,
    /// Node whose self-failure is forced to 0 throughout.
    pub immune_node: Option<String>,
    pub scenario: String,
}

impl RunOptions {
    pub fn with_mode(mode: AutonomyMode) -> Self {
        RunOptions {
            mode,
            ..RunOptions::default()
        }
    }
}

pub fn run_timeline(model: &SystemModel, curves: &CurveLibrary, timeline: &Timeline, mode: AutonomyMode) -> Result<ProbabilityReport> {
    run_timeline_with(model, curves, timeline, &RunOptions::with_mode(mode))
}

pub fn run_timeline_with(
    model: &SystemModel,
    curves: &CurveLibrary,
    timeline: &Timeline,
    options: &RunOptions,
) -> Result<ProbabilityReport> {
    timeline.check()?;
    curves.check()?;
    curves.check_references(&model.nodes)?;
    for e in &timeline.events {
        for node in e.intensities.keys() {
            model.require_node(node)?;
        }
    }
    let immune = options.immune_node.as_deref().map(|id| model.require_node(id)).transpose()?;

    let times = timeline.times();
    let mut event_slots: Vec<Vec<&EventVector>> = vec![Vec::new(); times.len()];
    for e in &timeline.events {
        event_slots[Timeline::slot(&times, e.time)].push(e);
    }
    let mut intervention_slots: Vec<Vec<&Intervention>> = vec![Vec::new(); times.len()];
    for i in &timeline.interventions {
        intervention_slots[Timeline::slot(&times, i.time)].push(i);
    }

    let n = model.nodes.len();
    let mut model = model.clone();
    let mut hazard_carried = vec![0.0; n];
    let mut envelope = vec![[0.0_f64; HazardKind::ALL.len()]; n];
    let mut duty = vec![0.0; n];
    let mut previous_p_occ: Option<Vec<Vec<f64>>> = None;
    let mut steps = Vec::with_capacity(times.len());

    for (i, &t) in times.iter().enumerate() {
        if let Some(p_occ) = &previous_p_occ {
            let dt = t - times[i - 1];
            for (k, net) in model.networks.iter().enumerate() {
                for (pos, id) in net.nodes.iter().enumerate() {
                    let g = model.node_index(id).expect("checked by solver");
                    if model.nodes[g].autonomy.is_none() {
                        continue;
                    }
                    let layers: Vec<usize> = net
                        .configurations
                        .iter()
                        .enumerate()
                        .filter(|(_, c)| c.is_member(pos))
                        .map(|(c, _)| c)
                        .collect();
                    duty[g] += autonomy_clock_advance(dt, &p_occ[k], &layers, options.mode);
                }
            }
        }

        for intervention in &intervention_slots[i] {
            model.append_configuration(&intervention.network, intervention.configuration.clone())?;
        }

        for event in &event_slots[i] {
            for (g, node) in model.nodes.iter().enumerate() {
                if !event.intensities.contains_key(&node.id) {
                    continue;
                }
                if event.cumulative {
                    let hazard = event.intensities[&node.id].hazard;
                    let h = HazardKind::ALL.iter().position(|k| *k == hazard).expect("known hazard");
                    let p = hazard_term(node, curves, event)?;
                    envelope[g][h] = envelope[g][h].max(p);
                } else {
                    hazard_carried[g] = self_failure(node, curves, std::slice::from_ref(*event), hazard_carried[g], 0.0)?;
                }
            }
        }

        let mut p_sf = Vec::with_capacity(n);
        for (g, node) in model.nodes.iter().enumerate() {
            let mut p = hazard_carried[g];
            for e in envelope[g] {
                p = union(p, e);
            }
            p = union(p, autonomy_term(node, curves, duty[g])?);
            p_sf.push(if Some(g) == immune { 0.0 } else { p });
        }

        let state = CascadeSolver::new(&model)?.solve(&p_sf)?;
        let networks: Vec<NetworkRecord> = model
            .networks
            .iter()
            .zip(&state.networks)
            .map(|(net, ns)| NetworkRecord {
                id: net.id.clone(),
                loc: ns.loc,
                configurations: net
                    .configurations
                    .iter()
                    .zip(&ns.configurations)
                    .map(|(c, s)| ConfigurationRecord {
                        label: c.label.clone(),
                        p_occ: s.p_occ,
                        chain_survival: s.chain_survival,
                    })
                    .collect(),
                nodes: net
                    .nodes
                    .iter()
                    .zip(&ns.nodes)
                    .map(|(id, p)| NodeRecord {
                        id: id.clone(),
                        p_sf: p.p_sf,
                        p_cf: p.p_cf,
                        p_f: p.p_f,
                    })
                    .collect(),
            })
            .collect();
        let classic = match options.classic {
            Some(corrected) => Some(classic_record(&model, &p_sf, corrected)?),
            None => None,
        };
        previous_p_occ = Some(
            state
                .networks
                .iter()
                .map(|ns| ns.configurations.iter().map(|c| c.p_occ).collect())
                .collect(),
        );
        steps.push(StepRecord {
            time_h: t,
            networks,
            classic,
        });
    }

    Ok(ProbabilityReport {
        scenario: options.scenario.clone(),
        autonomy_mode: options.mode,
        steps,
    })
}

fn classic_record(model: &SystemModel, p_sf: &[f64], corrected: bool) -> Result<ClassicRecord> {
    let system = ClassicSystem::from_model(model)?;
    let damage = system.damage(p_sf, corrected)?;
    let decay = system.decay_scores(p_sf, corrected)?;
    Ok(ClassicRecord {
        corrected,
        system_score: system.system_score(&decay)?,
        nodes: system
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| ClassicNodeRecord {
                id: id.clone(),
                q_raw: damage.q.raw[i],
                q: damage.q.clamped[i],
                decay_score: decay[i],
            })
            .collect(),
    })
}

/// Weighted mean of several runs of the same model. Weights are normalised
/// to sum to one.
pub fn run_ensemble(
    model: &SystemModel,
    curves: &CurveLibrary,
    timelines: &[(Timeline, f64)],
    options: &RunOptions,
) -> Result<ProbabilityReport> {
    let reports = timelines
        .iter()
        .map(|(t, _)| run_timeline_with(model, curves, t, options))
        .collect::<Result<Vec<_>>>()?;
    let weights: Vec<f64> = timelines.iter().map(|(_, w)| *w).collect();
    combine_reports(&reports, &weights)
}

pub fn combine_reports(reports: &[ProbabilityReport], weights: &[f64]) -> Result<ProbabilityReport> {
    if reports.is_empty() {
        return Err(Error::EmptyInput("ensemble"));
    }
    if reports.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            context: "ensemble weights".into(),
            expected: reports.len().to_string(),
            found: weights.len().to_string(),
        });
    }
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || total <= 0.0 {
        return Err(Error::ZeroWeights);
    }
    let w: Vec<f64> = weights.iter().map(|x| x / total).collect();
    let first = &reports[0];
    for r in &reports[1..] {
        check_same_shape(first, r)?;
    }
    let mean = |f: &dyn Fn(&ProbabilityReport) -> f64| -> f64 { reports.iter().zip(&w).map(|(r, wi)| wi * f(r)).sum() };

    let mut out = first.clone();
    for (s, step) in out.steps.iter_mut().enumerate() {
        for (k, net) in step.networks.iter_mut().enumerate() {
            net.loc = mean(&|r| r.steps[s].networks[k].loc);
            for (c, cfg) in net.configurations.iter_mut().enumerate() {
                cfg.p_occ = mean(&|r| r.steps[s].networks[k].configurations[c].p_occ);
                cfg.chain_survival = mean(&|r| r.steps[s].networks[k].configurations[c].chain_survival);
            }
            for (x, node) in net.nodes.iter_mut().enumerate() {
                node.p_sf = mean(&|r| r.steps[s].networks[k].nodes[x].p_sf);
                node.p_cf = mean(&|r| r.steps[s].networks[k].nodes[x].p_cf);
                node.p_f = mean(&|r| r.steps[s].networks[k].nodes[x].p_f);
            }
        }
        if let Some(classic) = step.classic.as_mut() {
            let at = |r: &ProbabilityReport| r.steps[s].classic.clone().expect("shape checked");
            classic.system_score = mean(&|r| at(r).system_score);
            for (x, node) in classic.nodes.iter_mut().enumerate() {
                node.q_raw = mean(&|r| at(r).nodes[x].q_raw);
                node.q = mean(&|r| at(r).nodes[x].q);
                node.decay_score = mean(&|r| at(r).nodes[x].decay_score);
            }
        }
    }
    Ok(out)
}

fn check_same_shape(a: &ProbabilityReport, b: &ProbabilityReport) -> Result<()> {
    let mismatch = |what: &str| Err(Error::IncompatibleReports(what.to_string()));
    if a.steps.len() != b.steps.len() {
        return mismatch("different number of time steps");
    }
    for (x, y) in a.steps.iter().zip(&b.steps) {
        if (x.time_h - y.time_h).abs() > TIME_EPSILON {
            return mismatch("different time grids");
        }
        if x.classic.is_some() != y.classic.is_some() {
            return mismatch("classic series present in only some runs");
        }
        if x.networks.len() != y.networks.len() {
            return mismatch("different networks");
        }
        for (n, m) in x.networks.iter().zip(&y.networks) {
            let labels = |r: &NetworkRecord| r.configurations.iter().map(|c| c.label.clone()).collect::<Vec<_>>();
            let ids = |r: &NetworkRecord| r.nodes.iter().map(|c| c.id.clone()).collect::<Vec<_>>();
            if n.id != m.id || labels(n) != labels(m) || ids(n) != ids(m) {
                return mismatch(&format!("network '{}' differs between runs", n.id));
            }
        }
    }
    Ok(())
}

/// Failure probability of `target` over time minus its value in a run where
/// `node` never fails by itself.
pub fn importance_series(
    model: &SystemModel,
    curves: &CurveLibrary,
    timeline: &Timeline,
    options: &RunOptions,
    node: &str,
    target: &str,
) -> Result<Vec<(f64, f64)>> {
    model.require_node(node)?;
    model.require_node(target)?;
    let exposed = run_timeline_with(model, curves, timeline, options)?;
    let immune = run_timeline_with(
        model,
        curves,
        timeline,
        &RunOptions {
            immune_node: Some(node.to_string()),
            ..options.clone()
        },
    )?;
    Ok(exposed
        .steps
        .iter()
        .zip(&immune.steps)
        .map(|(a, b)| {
            let pa = a.node(target).map_or(0.0, |r| r.p_f);
            let pb = b.node(target).map_or(0.0, |r| r.p_f);
            (a.time_h, pa - pb)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clock_advance_modes() {
        for mode in [AutonomyMode::Expected, AutonomyMode::Dominant] {
            assert_eq!(autonomy_clock_advance(1.0, &[1.0, 0.0], &[1], mode), 0.0);
            assert_eq!(autonomy_clock_advance(1.0, &[0.0, 1.0], &[1], mode), 1.0);
        }
        assert_eq!(autonomy_clock_advance(2.0, &[0.5, 0.5], &[0], AutonomyMode::Expected), 1.0);
        assert_eq!(autonomy_clock_advance(2.0, &[0.6, 0.3], &[1], AutonomyMode::Dominant), 0.0);
        assert_eq!(autonomy_clock_advance(2.0, &[0.0, 0.0], &[0], AutonomyMode::Dominant), 0.0);
    }

    #[test]
    fn grid_closes_at_end() {
        let t = Timeline::quiet(-0.5, 1.0, 0.25);
        assert_eq!(t.times(), vec![-0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0]);
        let uneven = Timeline::quiet(0.0, 1.0, 0.4);
        assert_eq!(uneven.times(), vec![0.0, 0.4, 0.8, 1.0]);
        assert_eq!(Timeline::slot(&t.times(), 0.8), 6);
        assert_eq!(Timeline::slot(&t.times(), 0.0), 2);
    }

    #[test]
    fn timeline_checks() {
        assert!(Timeline::quiet(1.0, 0.0, 0.1).check().is_err());
        assert!(Timeline::quiet(0.0, 1.0, 0.0).check().is_err());
        let mut t = Timeline::quiet(0.0, 1.0, 0.5);
        t.events = vec![EventVector::new(0.8), EventVector::new(0.2)];
        assert!(t.check().is_err());
        t.events = vec![EventVector::new(2.0)];
        assert!(t.check().is_err());
    }

    #[test]
    fn ensemble_weights_must_not_vanish() {
        let r = ProbabilityReport {
            scenario: "s".into(),
            autonomy_mode: AutonomyMode::Expected,
            steps: vec![],
        };
        assert_eq!(combine_reports(std::slice::from_ref(&r), &[0.0]), Err(Error::ZeroWeights));
        assert_eq!(combine_reports(&[r.clone(), r.clone()], &[1.0, -1.0]), Err(Error::ZeroWeights));
        assert_eq!(combine_reports(std::slice::from_ref(&r), &[3.0]).unwrap(), r);
    }
}
