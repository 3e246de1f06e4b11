//! Text and JSON rendering of scan summaries.

use std::fmt::Write as _;
use std::str::FromStr;

use serde_json::{json, Value};

use crate::scan::{ScanSummary, Status};
use crate::verify::{BugReport, Suppression};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Text,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(Format::Text),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}` (expected text or json)")),
        }
    }
}

fn suppression_json(s: &Suppression) -> Value {
    json!({
        "reason": s.reason,
        "function": s.function,
        "site": {"block": s.site.block, "statement": s.site.statement},
        "pattern": s.pattern,
        "applied": s.applied,
    })
}

pub fn report_json(r: &BugReport) -> Value {
    let f = &r.finding;
    json!({
        "package": r.package,
        "function": f.pair.function,
        "bug_type": f.kind,
        "rule_id": f.rule_id,
        "conversion_site": {"block": f.pair.site.block, "statement": f.pair.site.statement},
        "operation": f.pair.operation,
        "src_type": f.pair.src.to_string(),
        "dst_type": f.pair.dst.to_string(),
        "witness": f.witness.as_ref().map(ToString::to_string),
        "evidence": {
            "kind": r.evidence.kind,
            "site": {"block": r.evidence.site.block, "statement": r.evidence.site.statement},
        },
        "suppressions_considered": r.suppressions_considered.iter().map(suppression_json).collect::<Vec<_>>(),
    })
}

pub fn summary_json(summary: &ScanSummary) -> Value {
    let packages: Vec<Value> = summary
        .packages
        .iter()
        .map(|p| {
            json!({
                "path": p.path,
                "package": p.package,
                "status": p.status,
                "error": p.error,
                "reports": p.reports.len(),
                "suppressed": p.suppressed,
            })
        })
        .collect();
    let totals: serde_json::Map<String, Value> =
        summary.totals.iter().map(|(k, v)| (k.numeral().to_string(), json!(v))).collect();
    json!({
        "packages": packages,
        "reports": summary.sorted_reports().into_iter().map(report_json).collect::<Vec<_>>(),
        "totals": totals,
    })
}

/// The serialized (snake_case) name of a unit enum variant.
fn label(v: impl serde::Serialize) -> String {
    match serde_json::to_value(v) {
        Ok(Value::String(s)) => s,
        _ => String::new(),
    }
}

fn render_text(summary: &ScanSummary) -> String {
    let mut out = String::new();
    let reports = summary.sorted_reports();
    for r in &reports {
        let f = &r.finding;
        let _ = writeln!(
            out,
            "[{}] {}::{}: {} ({})",
            f.kind,
            r.package,
            f.pair.function,
            f.kind.describe(),
            f.rule_id
        );
        let _ = writeln!(out, "    conversion: {} {} {} -> {}", f.pair.site, f.pair.operation, f.pair.src, f.pair.dst);
        let _ = writeln!(out, "    access:     {} via _{} ({})", r.evidence.site, r.evidence.aliased_local, label(r.evidence.kind));
        if let Some(w) = &f.witness {
            let _ = writeln!(out, "    witness:    {w}");
        }
        if !f.arches.is_empty() {
            let arches: Vec<String> = f.arches.iter().map(|a| format!("{a}-bit")).collect();
            let _ = writeln!(out, "    arches:     {}", arches.join(", "));
        }
        for s in &r.suppressions_considered {
            let _ = writeln!(
                out,
                "    considered: {} at {}::{} ({}, {})",
                s.pattern,
                s.function,
                s.site,
                label(s.reason),
                if s.applied { "applied" } else { "not applied" }
            );
        }
    }
    for p in summary.packages.iter().filter(|p| p.status != Status::Ok) {
        let _ = writeln!(
            out,
            "{}: {}{}",
            p.path,
            label(p.status),
            p.error.as_ref().map(|e| format!(": {e}")).unwrap_or_default()
        );
    }
    let n = reports.len();
    let _ = writeln!(out, "{n} finding{} in {} package(s)", if n == 1 { "" } else { "s" }, summary.packages.len());
    out
}

pub fn render_report(summary: &ScanSummary, format: Format) -> String {
    match format {
        Format::Text => render_text(summary),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&summary_json(summary)).expect("json rendering");
            s.push('\n');
            s
        }
    }
}
