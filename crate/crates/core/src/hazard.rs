//! Fragility and autonomy curves, and per-node self-failure probabilities.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{check_probability, Error, Result};
use crate::graph::Node;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HazardKind {
    EarthquakePga,
    TsunamiDepth,
    Generic,
}

impl HazardKind {
    pub const ALL: [HazardKind; 3] = [HazardKind::EarthquakePga, HazardKind::TsunamiDepth, HazardKind::Generic];

    pub fn unit(self) -> IntensityUnit {
        match self {
            HazardKind::EarthquakePga => IntensityUnit::G,
            HazardKind::TsunamiDepth => IntensityUnit::Meters,
            HazardKind::Generic => IntensityUnit::Dimensionless,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            HazardKind::EarthquakePga => "earthquake_pga",
            HazardKind::TsunamiDepth => "tsunami_depth",
            HazardKind::Generic => "generic",
        }
    }
}

impl fmt::Display for HazardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntensityUnit {
    G,
    Meters,
    Dimensionless,
}

impl IntensityUnit {
    pub fn as_str(self) -> &'static str {
        match self {
            IntensityUnit::G => "g",
            IntensityUnit::Meters => "meters",
            IntensityUnit::Dimensionless => "dimensionless",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum FragilityForm {
    LognormalCdf { median: f64, beta: f64 },
    /// `(intensity, probability)` pairs; linear from the origin up to the
    /// first breakpoint, constant after the last.
    PiecewiseLinear { breakpoints: Vec<[f64; 2]> },
    /// Certain failure at or above the threshold.
    Step { threshold: f64 },
}

/// Complete-failure fragility curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragilityCurve {
    pub hazard: HazardKind,
    pub units: IntensityUnit,
    #[serde(flatten)]
    pub form: FragilityForm,
}

impl FragilityCurve {
    pub fn lognormal(hazard: HazardKind, median: f64, beta: f64) -> Self {
        FragilityCurve {
            hazard,
            units: hazard.unit(),
            form: FragilityForm::LognormalCdf { median, beta },
        }
    }

    pub fn linear(hazard: HazardKind, from: f64, to: f64) -> Self {
        FragilityCurve {
            hazard,
            units: hazard.unit(),
            form: FragilityForm::PiecewiseLinear {
                breakpoints: vec![[from, 0.0], [to, 1.0]],
            },
        }
    }

    pub fn step(hazard: HazardKind, threshold: f64) -> Self {
        FragilityCurve {
            hazard,
            units: hazard.unit(),
            form: FragilityForm::Step { threshold },
        }
    }

    pub fn check(&self, name: &str) -> Result<()> {
        let bad = |reason: &str| {
            Err(Error::InvalidCurve {
                curve: name.to_string(),
                reason: reason.to_string(),
            })
        };
        if self.units != self.hazard.unit() {
            return Err(Error::UnitMismatch {
                curve: name.to_string(),
                expected: self.hazard.unit().as_str().into(),
                found: self.units.as_str().into(),
            });
        }
        match &self.form {
            FragilityForm::LognormalCdf { median, beta } => {
                if !(median.is_finite() && *median > 0.0) {
                    return bad("lognormal median must be positive");
                }
                if !(beta.is_finite() && *beta > 0.0) {
                    return bad("lognormal beta must be positive");
                }
            }
            FragilityForm::PiecewiseLinear { breakpoints } => check_breakpoints(name, breakpoints)?,
            FragilityForm::Step { threshold } => {
                if !(threshold.is_finite() && *threshold > 0.0) {
                    return bad("step threshold must be positive and finite");
                }
            }
        }
        Ok(())
    }

    /// Failure probability at `intensity`, which must be expressed in the
    /// unit of `hazard`.
    pub fn eval(&self, hazard: HazardKind, intensity: f64) -> Result<f64> {
        if hazard != self.hazard || hazard.unit() != self.units {
            return Err(Error::UnitMismatch {
                curve: self.hazard.as_str().into(),
                expected: self.units.as_str().into(),
                found: hazard.unit().as_str().into(),
            });
        }
        if !(intensity.is_finite() && intensity >= 0.0) {
            return Err(Error::InvalidIntensity {
                context: hazard.as_str().into(),
                value: intensity,
            });
        }
        Ok(self.probability_at(intensity))
    }

    pub fn probability_at(&self, intensity: f64) -> f64 {
        match &self.form {
            FragilityForm::LognormalCdf { median, beta } => {
                if intensity <= 0.0 {
                    0.0
                } else {
                    standard_normal_cdf((intensity / median).ln() / beta)
                }
            }
            FragilityForm::PiecewiseLinear { breakpoints } => interpolate(breakpoints, intensity),
            FragilityForm::Step { threshold } => {
                if intensity >= *threshold {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

fn standard_normal_cdf(z: f64) -> f64 {
    Normal::standard().cdf(z).clamp(0.0, 1.0)
}

fn check_breakpoints(name: &str, breakpoints: &[[f64; 2]]) -> Result<()> {
    let bad = |reason: &str| {
        Err(Error::InvalidCurve {
            curve: name.to_string(),
            reason: reason.to_string(),
        })
    };
    if breakpoints.is_empty() {
        return bad("piecewise curve needs at least one breakpoint");
    }
    let mut prev: Option<[f64; 2]> = None;
    for &[x, p] in breakpoints {
        if !(x.is_finite() && x >= 0.0) {
            return bad("breakpoint abscissae must be finite and nonnegative");
        }
        if !(0.0..=1.0).contains(&p) {
            return bad("breakpoint probabilities must lie in [0, 1]");
        }
        if let Some([px, pp]) = prev {
            if x <= px {
                return bad("breakpoints must be strictly increasing");
            }
            if p < pp {
                return bad("breakpoint probabilities must be nondecreasing");
            }
        }
        prev = Some([x, p]);
    }
    Ok(())
}

fn interpolate(breakpoints: &[[f64; 2]], x: f64) -> f64 {
    let mut prev = [0.0, 0.0];
    for &[bx, bp] in breakpoints {
        if x < bx {
            let [px, pp] = prev;
            return pp + (bp - pp) * (x - px) / (bx - px);
        }
        if x == bx {
            return bp;
        }
        prev = [bx, bp];
    }
    prev[1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum AutonomyCurve {
    /// Run-out at `capacity_hours` of duty (closed threshold).
    Step { capacity_hours: f64 },
    /// `(duty_hours, probability)` pairs, linear from the origin.
    PiecewiseLinear { breakpoints: Vec<[f64; 2]> },
}

impl AutonomyCurve {
    pub fn check(&self, name: &str) -> Result<()> {
        match self {
            AutonomyCurve::Step { capacity_hours } => {
                if !(capacity_hours.is_finite() && *capacity_hours > 0.0) {
                    return Err(Error::InvalidCurve {
                        curve: name.to_string(),
                        reason: "capacity must be positive and finite".into(),
                    });
                }
                Ok(())
            }
            AutonomyCurve::PiecewiseLinear { breakpoints } => {
                check_breakpoints(name, breakpoints)?;
                if breakpoints[0][0] == 0.0 && breakpoints[0][1] != 0.0 {
                    return Err(Error::InvalidCurve {
                        curve: name.to_string(),
                        reason: "autonomy curves start at 0".into(),
                    });
                }
                Ok(())
            }
        }
    }

    /// Failure probability after `duty_hours` of use. A capacity override
    /// replaces the capacity of step curves and is ignored otherwise.
    pub fn eval(&self, duty_hours: f64, capacity_override: Option<f64>) -> f64 {
        if duty_hours <= 0.0 {
            return 0.0;
        }
        match self {
            AutonomyCurve::Step { capacity_hours } => {
                if duty_hours >= capacity_override.unwrap_or(*capacity_hours) {
                    1.0
                } else {
                    0.0
                }
            }
            AutonomyCurve::PiecewiseLinear { breakpoints } => interpolate(breakpoints, duty_hours),
        }
    }
}

/// Named fragility and autonomy curves.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CurveLibrary {
    #[serde(default)]
    pub fragility: BTreeMap<String, FragilityCurve>,
    #[serde(default)]
    pub autonomy: BTreeMap<String, AutonomyCurve>,
}

impl CurveLibrary {
    pub fn check(&self) -> Result<()> {
        for (name, curve) in &self.fragility {
            curve.check(name)?;
        }
        for (name, curve) in &self.autonomy {
            curve.check(name)?;
        }
        Ok(())
    }

    pub fn fragility(&self, name: &str) -> Result<&FragilityCurve> {
        self.fragility.get(name).ok_or_else(|| Error::UnknownId {
            kind: "fragility curve",
            id: name.to_string(),
        })
    }

    pub fn autonomy(&self, name: &str) -> Result<&AutonomyCurve> {
        self.autonomy.get(name).ok_or_else(|| Error::UnknownId {
            kind: "autonomy curve",
            id: name.to_string(),
        })
    }

    /// Every curve referenced by `nodes` must exist.
    pub fn check_references<'a>(&self, nodes: impl IntoIterator<Item = &'a Node>) -> Result<()> {
        for node in nodes {
            for exposure in node.site.values() {
                if let Some(name) = &exposure.curve {
                    self.fragility(name)?;
                }
            }
            if let Some(a) = &node.autonomy {
                self.autonomy(&a.curve)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazardIntensity {
    pub hazard: HazardKind,
    pub value: f64,
}

/// Hazard intensities acting on nodes at one instant.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventVector {
    pub time: f64,
    /// Cumulative events (aging, for instance) describe a state rather than
    /// a shock: repeated events of the same hazard do not compound, the
    /// node keeps the worst failure probability seen so far.
    pub cumulative: bool,
    pub intensities: BTreeMap<String, HazardIntensity>,
}

impl EventVector {
    pub fn new(time: f64) -> Self {
        EventVector {
            time,
            ..EventVector::default()
        }
    }

    pub fn with(mut self, node: impl Into<String>, hazard: HazardKind, value: f64) -> Self {
        self.intensities.insert(node.into(), HazardIntensity { hazard, value });
        self
    }
}

pub fn eval_fragility(curve: &FragilityCurve, hazard: HazardKind, intensity: f64) -> Result<f64> {
    curve.eval(hazard, intensity)
}

/// Probability that at least one of several independent failures occurs.
pub fn combine_independent(probabilities: &[f64]) -> f64 {
    1.0 - probabilities.iter().map(|p| 1.0 - p).product::<f64>()
}

/// Probability that every member of a redundancy group fails.
pub fn joint_redundant_failure(probabilities: &[f64]) -> Result<f64> {
    if probabilities.is_empty() {
        return Err(Error::EmptyInput("redundancy group"));
    }
    Ok(probabilities.iter().product())
}

/// Fragility term of `node` under one event (0 when the event does not
/// touch the node).
pub fn hazard_term(node: &Node, curves: &CurveLibrary, event: &EventVector) -> Result<f64> {
    let Some(hit) = event.intensities.get(&node.id) else {
        return Ok(0.0);
    };
    let curve_name = node
        .site
        .get(&hit.hazard)
        .and_then(|e| e.curve.as_deref())
        .ok_or_else(|| Error::MissingCurve {
            node: node.id.clone(),
            hazard: hit.hazard.as_str().into(),
        })?;
    let p = curves.fragility(curve_name)?.eval(hit.hazard, hit.value).map_err(|e| match e {
        Error::UnitMismatch { expected, found, .. } => Error::UnitMismatch {
            curve: curve_name.to_string(),
            expected,
            found,
        },
        other => other,
    })?;
    check_probability(curve_name, p)
}

pub fn autonomy_term(node: &Node, curves: &CurveLibrary, duty_hours: f64) -> Result<f64> {
    match &node.autonomy {
        None => Ok(0.0),
        Some(spec) => Ok(curves.autonomy(&spec.curve)?.eval(duty_hours, spec.capacity_hours)),
    }
}

/// Self-failure probability: union of the carried state, the fragility term
/// of every event acting on the node, and the autonomy run-out term.
pub fn self_failure(
    node: &Node,
    curves: &CurveLibrary,
    events: &[EventVector],
    carried_psf: f64,
    duty_hours: f64,
) -> Result<f64> {
    check_probability("carried self-failure", carried_psf)?;
    let mut terms = vec![carried_psf];
    for event in events {
        terms.push(hazard_term(node, curves, event)?);
    }
    terms.push(autonomy_term(node, curves, duty_hours)?);
    Ok(combine_independent(&terms))
}
