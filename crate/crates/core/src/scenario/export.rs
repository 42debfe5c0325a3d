use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::ProbabilityReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
}

/// Value rounded to 12 significant digits, printed in the shortest form
/// that reads back to the rounded value.
pub fn format_value(value: f64) -> String {
    if !value.is_finite() {
        return value.to_string();
    }
    let rounded: f64 = format!("{value:.11e}").parse().expect("valid float literal");
    format!("{rounded:?}")
}

pub fn export_report(report: &ProbabilityReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Json => serde_json::to_vec_pretty(report).expect("reports always serialize"),
        ReportFormat::Csv => report_csv(report).into_bytes(),
    }
}

pub fn import_report_json(bytes: &[u8]) -> Result<ProbabilityReport> {
    serde_json::from_slice(bytes).map_err(|e| Error::Io(format!("report: {e}")))
}

fn report_csv(report: &ProbabilityReport) -> String {
    let mut out = String::from("time_h,entity_kind,entity_id,quantity,value\n");
    let mut row = |t: f64, kind: &str, id: &str, quantity: &str, value: f64| {
        let _ = writeln!(out, "{},{kind},{id},{quantity},{}", format_value(t), format_value(value));
    };
    for step in &report.steps {
        let t = step.time_h;
        for net in &step.networks {
            row(t, "network", &net.id, "loc", net.loc);
            for c in &net.configurations {
                let id = format!("{}/{}", net.id, c.label);
                row(t, "configuration", &id, "p_occ", c.p_occ);
                row(t, "configuration", &id, "chain_survival", c.chain_survival);
            }
            for n in &net.nodes {
                row(t, "node", &n.id, "p_sf", n.p_sf);
                row(t, "node", &n.id, "p_cf", n.p_cf);
                row(t, "node", &n.id, "p_f", n.p_f);
            }
        }
        if let Some(classic) = &step.classic {
            row(t, "system", "classic", "sys_s", classic.system_score);
            for n in &classic.nodes {
                row(t, "classic_node", &n.id, "q_raw", n.q_raw);
                row(t, "classic_node", &n.id, "q", n.q);
                row(t, "classic_node", &n.id, "dc_s", n.decay_score);
            }
        }
    }
    out
}

/// Wide CSV tables for plotting, one per network and quantity:
/// `<network>_occupancy.csv` (LoC and every layer's occurrence) and
/// `<network>_<p_sf|p_cf|p_f>.csv` (one column per node), plus
/// `classic_decay.csv` when the classic series is present.
pub fn export_plot_data(report: &ProbabilityReport) -> Vec<(String, String)> {
    let mut files = Vec::new();
    let Some(first) = report.steps.first() else {
        return files;
    };
    for net in &first.networks {
        let mut labels: Vec<String> = Vec::new();
        let mut seen = BTreeSet::new();
        for step in &report.steps {
            if let Some(n) = step.network(&net.id) {
                for c in &n.configurations {
                    if seen.insert(c.label.clone()) {
                        labels.push(c.label.clone());
                    }
                }
            }
        }
        let mut table = String::from("time_h,loc");
        for l in &labels {
            let _ = write!(table, ",{l}");
        }
        table.push('\n');
        for step in &report.steps {
            let n = step.network(&net.id).expect("networks are stable over time");
            let _ = write!(table, "{},{}", format_value(step.time_h), format_value(n.loc));
            for l in &labels {
                let v = n.configuration(l).map_or(0.0, |c| c.p_occ);
                let _ = write!(table, ",{}", format_value(v));
            }
            table.push('\n');
        }
        files.push((format!("{}_occupancy.csv", net.id), table));

        let ids: Vec<&str> = net.nodes.iter().map(|n| n.id.as_str()).collect();
        for quantity in ["p_sf", "p_cf", "p_f"] {
            let mut table = format!("time_h,{}\n", ids.join(","));
            for step in &report.steps {
                let n = step.network(&net.id).expect("networks are stable over time");
                let _ = write!(table, "{}", format_value(step.time_h));
                for node in &n.nodes {
                    let v = match quantity {
                        "p_sf" => node.p_sf,
                        "p_cf" => node.p_cf,
                        _ => node.p_f,
                    };
                    let _ = write!(table, ",{}", format_value(v));
                }
                table.push('\n');
            }
            files.push((format!("{}_{quantity}.csv", net.id), table));
        }
    }
    if let Some(classic) = &first.classic {
        let ids: Vec<&str> = classic.nodes.iter().map(|n| n.id.as_str()).collect();
        let mut table = format!("time_h,sys_s,{}\n", ids.join(","));
        for step in &report.steps {
            let c = step.classic.as_ref().expect("classic series present at every step");
            let _ = write!(table, "{},{}", format_value(step.time_h), format_value(c.system_score));
            for n in &c.nodes {
                let _ = write!(table, ",{}", format_value(n.decay_score));
            }
            table.push('\n');
        }
        files.push(("classic_decay.csv".to_string(), table));
    }
    files
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_value(0.0), "0.0");
        assert_eq!(format_value(1.0), "1.0");
        assert_eq!(format_value(0.951), "0.951");
        assert_eq!(format_value(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_value(2.0 / 3.0 * 1e-7), "6.66666666667e-8");
    }
}
