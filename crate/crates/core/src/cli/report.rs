use std::path::{Path, PathBuf};

use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::metrics::{relative_improvement, MetricsReport};
use crate::pipeline::ResultRecord;

pub const COLUMNS: [&str; 12] = [
    "model",
    "backend",
    "test_acc",
    "precision",
    "recall",
    "f1",
    "auc",
    "imp_test_acc",
    "imp_precision",
    "imp_recall",
    "imp_f1",
    "imp_auc",
];

/// Completed result files (`result_*.json`, `cell_*.json`) under `dir`,
/// ordered baseline first, then CTL, then QTL by circuit size.
pub fn collect_results(dir: &Path) -> Result<Vec<(PathBuf, ResultRecord)>> {
    let mut found = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::Io(std::io::Error::other(e)))?;
        let name = entry.file_name().to_string_lossy();
        let is_result = (name.starts_with("result_") || name.starts_with("cell_")) && name.ends_with(".json");
        if !entry.file_type().is_file() || !is_result {
            continue;
        }
        let rec = ResultRecord::load(entry.path())?;
        if rec.completed {
            found.push((entry.path().to_path_buf(), rec));
        }
    }
    let rank = |m: &str| match m {
        "baseline" => 0,
        "ctl" => 1,
        _ => 2,
    };
    found.sort_by(|(pa, a), (pb, b)| {
        (rank(&a.config.model), a.config.n_qubits, a.config.reps, pa).cmp(&(
            rank(&b.config.model),
            b.config.n_qubits,
            b.config.reps,
            pb,
        ))
    });
    Ok(found)
}

/// One row per ideal report, plus one per noisy report when present.
pub fn rows_of(records: &[ResultRecord]) -> Vec<MetricsReport> {
    records
        .iter()
        .flat_map(|r| std::iter::once(r.metrics.clone()).chain(r.noisy_metrics.clone()))
        .collect()
}

fn values(m: &MetricsReport) -> [f64; 5] {
    [m.accuracy, m.precision, m.recall, m.f1, m.auc]
}

/// Report cells as strings. Accuracy is a percentage with 2 decimals, the
/// other metrics have 4 decimals, improvements are relative percentages with
/// 2 decimals against the first `baseline` row (else the first row). A
/// single row leaves the improvement columns empty.
pub fn table(rows: &[MetricsReport]) -> Result<Vec<Vec<String>>> {
    if rows.is_empty() {
        return Err(Error::Validation("no completed results to report".into()));
    }
    let base = rows.iter().find(|r| r.model_tag == "baseline").unwrap_or(&rows[0]);
    let base_vals = values(base);
    Ok(rows
        .iter()
        .map(|r| {
            let v = values(r);
            let mut cells = vec![
                r.model_tag.clone(),
                r.backend_tag.to_string(),
                format!("{:.2}", 100.0 * v[0]),
            ];
            cells.extend(v[1..].iter().map(|x| format!("{x:.4}")));
            for (x, b) in v.iter().zip(base_vals) {
                cells.push(match relative_improvement(*x, b) {
                    Some(imp) if rows.len() > 1 => format!("{imp:.2}"),
                    _ => String::new(),
                });
            }
            cells
        })
        .collect())
}

pub fn to_csv(cells: &[Vec<String>]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(COLUMNS).map_err(io)?;
    for row in cells {
        w.write_record(row).map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Space-padded columns for terminals.
pub fn to_text(cells: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = COLUMNS.iter().map(|c| c.len()).collect();
    for row in cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let line = |row: Vec<&str>| {
        row.iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(COLUMNS.to_vec());
    out.push('\n');
    for row in cells {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}
