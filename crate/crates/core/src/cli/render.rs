use std::fmt::Write;

use crate::evaluation::{CurveTable, MetricsReport};
use crate::models::ModelKind;

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"))
}

fn aligned(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c == 0 {
                    format!("{s:<w$}", w = widths[c])
                } else {
                    format!("{s:>w$}", w = widths[c])
                }
            })
            .collect();
        writeln!(out, "{}", line.join("  ").trim_end()).expect("write to string");
    }
    out
}

/// One summary row per domain followed by per-slot scores.
pub fn render_metrics(reports: &[MetricsReport]) -> String {
    let mut summary = vec![vec!["domain".to_string(), "utterances".into(), "weighted_f1".into()]];
    for r in reports {
        summary.push(vec![r.domain.clone(), r.utterances.to_string(), cell(r.weighted_f1)]);
    }
    let mut slots = vec![vec![
        "domain".to_string(),
        "slot".into(),
        "precision".into(),
        "recall".into(),
        "f1".into(),
        "support".into(),
    ]];
    for r in reports {
        for (name, s) in &r.slots {
            slots.push(vec![
                r.domain.clone(),
                name.clone(),
                cell(Some(s.precision)),
                cell(Some(s.recall)),
                cell(Some(s.f1)),
                s.support.to_string(),
            ]);
        }
    }
    format!("{}\n{}", aligned(&summary), aligned(&slots))
}

/// Rows are target domains; columns are `points x kinds`, `-` where a kind
/// has no value (every baseline at zero in-domain samples).
pub fn render_curve(table: &CurveTable) -> String {
    let kinds: Vec<ModelKind> = if table.kinds.is_empty() {
        ModelKind::ALL.to_vec()
    } else {
        table.kinds.clone()
    };
    let mut header = vec!["domain".to_string()];
    for p in &table.points {
        for k in &kinds {
            header.push(format!("{p}/{k}"));
        }
    }
    let mut rows = vec![header];
    for d in &table.domains {
        let mut row = vec![d.clone()];
        for &p in &table.points {
            for &k in &kinds {
                row.push(cell(table.get(d, p, k).map(|c| c.mean)));
            }
        }
        rows.push(row);
    }
    format!("{}runs: {}\n", aligned(&rows), table.runs)
}
