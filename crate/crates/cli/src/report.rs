use std::path::Path;

use serde::Serialize;

use planbd::attack::Injection;
use planbd::learn::Arch;
use planbd::plan::MetricsReport;
use planbd::stl::BuiltinSpec;
use planbd::world::TriggerShape;
use planbd::Result;

pub fn planner_label(arch: Arch) -> &'static str {
    match arch {
        Arch::Sampler => "sampler",
        Arch::Guidance => "guidance",
    }
}

pub fn injection_label(injection: Injection) -> &'static str {
    match injection {
        Injection::Ds => "ds",
        Injection::Pis => "pis",
    }
}

pub fn spec_label(spec: &BuiltinSpec) -> &'static str {
    match spec {
        BuiltinSpec::Trap { .. } => "trap",
        BuiltinSpec::Misguide { .. } => "misguide",
        BuiltinSpec::Branch { .. } => "branch",
        BuiltinSpec::WasteEnergy { .. } => "waste_energy",
        BuiltinSpec::Hide { .. } => "hide",
        BuiltinSpec::Camouflage { .. } => "camouflage",
    }
}

pub fn shape_label(shape: TriggerShape) -> &'static str {
    match shape {
        TriggerShape::Square => "square",
        TriggerShape::Circle => "circle",
        TriggerShape::Triangle => "triangle",
        TriggerShape::Diamond => "diamond",
    }
}

/// One table row: the experiment cell plus its metrics. `stage` separates
/// repeated measurements of the same cell (e.g. before/after a defense).
#[derive(Debug, Clone, Serialize)]
pub struct MetricsRow {
    pub stage: String,
    pub planner: String,
    pub injection: String,
    pub spec: String,
    pub trigger_shape: String,
    #[serde(flatten)]
    pub metrics: MetricsReport,
}

pub const CSV_HEADER: &str = "stage,planner,injection,spec,trigger_shape,trigger_rate,\
path_len_incr,explore_incr,success_benign,success_backdoored,n_triggered,n_paired";

/// Render rows with fixed six-decimal floats so identical metrics always
/// produce identical bytes.
pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let m = &r.metrics;
        out.push_str(&format!(
            "{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}\n",
            r.stage,
            r.planner,
            r.injection,
            r.spec,
            r.trigger_shape,
            m.trigger_rate,
            m.path_len_incr,
            m.explore_incr,
            m.success_benign,
            m.success_backdoored,
            m.n_triggered,
            m.n_paired
        ));
    }
    out
}

/// Write the CSV and a pretty-printed JSON twin next to it.
pub fn write_metrics(path_csv: &Path, rows: &[MetricsRow]) -> Result<()> {
    std::fs::write(path_csv, metrics_csv(rows))?;
    let mut json = serde_json::to_string_pretty(rows)?;
    json.push('\n');
    std::fs::write(path_csv.with_extension("json"), json)?;
    Ok(())
}
