//! CSV exports. Each file may start with a `# config_hash=<hash>` line;
//! column headers are fixed per table.

use std::io::Write;

use serde::Serialize;

use crate::analysis::report::{Comparison, ParityRow, ProfileRow, PropertyReport, Severity};
use crate::analysis::{AucTable, SimilarityMatrix, TuningCurve};
use crate::error::Result;

pub const AUC_HEADER: &[&str] = &["model", "radius_deg", "auc_mean", "auc_std", "repetitions"];
pub const TUNING_HEADER: &[&str] = &["identity", "component", "stage", "angle_deg", "response"];
pub const SIMILARITY_HEADER: &[&str] = &[
    "stage",
    "row",
    "col",
    "row_identity",
    "row_angle_deg",
    "col_identity",
    "col_angle_deg",
    "correlation",
];
pub const REPORT_HEADER: &[&str] = &["check", "value", "threshold", "comparison", "passed", "severity", "detail"];
pub const PARITY_HEADER: &[&str] = &["encoder", "identity", "component", "eigenvalue", "parity", "residual"];
pub const INVARIANCE_HEADER: &[&str] = &["model", "identity", "center_deg", "relative_range"];

fn open<W: Write>(mut out: W, config_hash: Option<&str>, header: &[&str]) -> Result<csv::Writer<W>> {
    if let Some(h) = config_hash {
        writeln!(out, "# config_hash={h}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    Ok(w)
}

fn num(v: f64) -> String {
    // shortest representation that parses back to the same bits
    format!("{v:?}")
}

fn tag<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|j| j.as_str().map(str::to_owned))
        .unwrap_or_default()
}

/// One row per vector: `identity, angle_deg, <prefix>0, <prefix>1, ...`.
pub fn write_vectors<W: Write>(
    out: W,
    config_hash: Option<&str>,
    prefix: &str,
    rows: &[(u64, f64, &[f64])],
) -> Result<()> {
    let d = rows.first().map_or(0, |r| r.2.len());
    let mut header = vec!["identity".to_string(), "angle_deg".to_string()];
    header.extend((0..d).map(|k| format!("{prefix}{k}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut w = open(out, config_hash, &header)?;
    for (id, angle, v) in rows {
        let mut rec = vec![id.to_string(), num(*angle)];
        rec.extend(v.iter().map(|x| num(*x)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_auc<W: Write>(out: W, config_hash: Option<&str>, tables: &[AucTable]) -> Result<()> {
    let mut w = open(out, config_hash, AUC_HEADER)?;
    for t in tables {
        for (k, r) in t.radii.iter().enumerate() {
            w.write_record([t.model.clone(), num(*r), num(t.auc_mean[k]), num(t.auc_std[k]), t.repetitions.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_tuning<W: Write>(out: W, config_hash: Option<&str>, curves: &[TuningCurve]) -> Result<()> {
    let mut w = open(out, config_hash, TUNING_HEADER)?;
    for c in curves {
        for (a, r) in c.angles.iter().zip(&c.responses) {
            w.write_record([
                c.label.identity.to_string(),
                c.label.component.to_string(),
                c.label.stage.clone(),
                num(*a),
                num(*r),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Long format; undefined correlations are written as an empty field.
pub fn write_similarity<W: Write>(out: W, config_hash: Option<&str>, m: &SimilarityMatrix) -> Result<()> {
    let mut w = open(out, config_hash, SIMILARITY_HEADER)?;
    let stage = m.stage.name();
    for (i, a) in m.labels.iter().enumerate() {
        for (j, b) in m.labels.iter().enumerate() {
            w.write_record([
                stage.to_string(),
                i.to_string(),
                j.to_string(),
                a.identity.to_string(),
                num(a.angle),
                b.identity.to_string(),
                num(b.angle),
                m.get(i, j).map(num).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_report<W: Write>(out: W, config_hash: Option<&str>, report: &PropertyReport) -> Result<()> {
    let mut w = open(out, config_hash, REPORT_HEADER)?;
    for c in &report.checks {
        let cmp = match c.comparison {
            Comparison::AtMost => "<=",
            Comparison::Above => ">",
            Comparison::Below => "<",
        };
        let sev = match c.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        w.write_record([
            c.name.clone(),
            num(c.value),
            num(c.threshold),
            cmp.to_string(),
            c.passed.to_string(),
            sev.to_string(),
            c.detail.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_parity<W: Write>(out: W, config_hash: Option<&str>, rows: &[ParityRow]) -> Result<()> {
    let mut w = open(out, config_hash, PARITY_HEADER)?;
    for r in rows {
        w.write_record([
            r.encoder.clone(),
            r.identity.to_string(),
            r.component.to_string(),
            num(r.eigenvalue),
            r.parity.map(|p| tag(&p)).unwrap_or_else(|| "unresolved".into()),
            r.residual.map(num).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_invariance<W: Write>(out: W, config_hash: Option<&str>, rows: &[ProfileRow]) -> Result<()> {
    let mut w = open(out, config_hash, INVARIANCE_HEADER)?;
    for r in rows {
        w.write_record([r.model.clone(), r.identity.to_string(), num(r.center), num(r.relative_range)])?;
    }
    w.flush()?;
    Ok(())
}

/// The `config_hash` preamble of an exported file, if present.
pub fn read_config_hash(text: &str) -> Option<&str> {
    text.lines().next()?.strip_prefix("# config_hash=")
}
