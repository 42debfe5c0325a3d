use std::path::Path;

use super::document::{parse_scenario_with, ScenarioDocument};
use super::ScenarioError;
use crate::error::{Error, Result};

/// Directory searched for `<name>.json` before the bundled copies.
pub const SCENARIO_DIR_ENV: &str = "LIFELINE_IIM_SCENARIO_DIR";

const SCENARIOS: [(&str, &str); 6] = [
    ("example1", include_str!("../../scenarios/example1.json")),
    ("example2", include_str!("../../scenarios/example2.json")),
    ("example3", include_str!("../../scenarios/example3.json")),
    ("example4", include_str!("../../scenarios/example4.json")),
    ("fukushima-simplified", include_str!("../../scenarios/fukushima-simplified.json")),
    ("fukushima-detailed", include_str!("../../scenarios/fukushima-detailed.json")),
];

const CURVE_FILES: [(&str, &str); 1] = [(
    "fukushima_calibration.json",
    include_str!("../../scenarios/fukushima_calibration.json"),
)];

pub fn bundled_names() -> Vec<&'static str> {
    SCENARIOS.iter().map(|(n, _)| *n).collect()
}

pub fn bundled_text(name: &str) -> Option<&'static str> {
    SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub(super) fn bundled_curves(name: &str) -> Option<String> {
    CURVE_FILES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| t.to_string())
}

fn override_dir() -> Option<std::path::PathBuf> {
    std::env::var_os(SCENARIO_DIR_ENV).map(Into::into)
}

/// Loads a scenario by bundled name. A file of the same name in the
/// directory named by [`SCENARIO_DIR_ENV`] takes precedence.
pub fn load_bundled(name: &str) -> Result<ScenarioDocument> {
    if let Some(dir) = override_dir() {
        let path = dir.join(format!("{name}.json"));
        if path.is_file() {
            return load_file(&path);
        }
    }
    let text = bundled_text(name).ok_or_else(|| ScenarioError::UnknownScenario(name.to_string()))?;
    Ok(parse_scenario_with(text, &bundled_curves)?)
}

/// Loads a scenario from a path, or by bundled name when no such file
/// exists.
pub fn load_scenario(name_or_path: &str) -> Result<ScenarioDocument> {
    let path = Path::new(name_or_path);
    if path.is_file() {
        load_file(path)
    } else {
        load_bundled(name_or_path)
    }
}

fn load_file(path: &Path) -> Result<ScenarioDocument> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let curves = move |name: &str| {
        std::fs::read_to_string(dir.join(name))
            .ok()
            .or_else(|| override_dir().and_then(|d| std::fs::read_to_string(d.join(name)).ok()))
            .or_else(|| bundled_curves(name))
    };
    Ok(parse_scenario_with(&text, &curves)?)
}
