use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::Resolved;
use crate::error::{CliError, CliResult};
use crate::run::{Report, Status};

/// JSON summary written next to the CSV.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ResultRecord {
    pub experiment_id: String,
    pub kind: String,
    pub timestamp: String,
    pub config_hash: String,
    pub seed: u64,
    pub reps: Option<usize>,
    pub status: Status,
    pub qualitative: bool,
    pub description: Option<String>,
    pub summary: Value,
    pub rows: Vec<Value>,
    pub warnings: Vec<String>,
    pub files: Vec<String>,
    pub config: Value,
}

#[derive(Debug, Clone)]
pub struct Written {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub plot: PathBuf,
    /// Binary sample-path dump, when requested.
    pub paths: Option<PathBuf>,
    pub record: ResultRecord,
}

pub fn csv_text(report: &Report) -> CliResult<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Config(format!("csv: {e}"));
    w.write_record(report.header).map_err(fail)?;
    for row in &report.rows {
        w.write_record(row.iter().map(|c| c.render())).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Config(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn gnuplot_script(report: &Report, csv_name: &str, title: &str) -> String {
    let p = &report.plot;
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set key autotitle columnhead\n");
    s.push_str(&format!("set title '{title}'\n"));
    s.push_str(&format!("set xlabel '{}'\nset ylabel '{}'\n", p.xlabel, p.ylabel));
    if p.log_y {
        s.push_str("set logscale y\n");
    }
    match p.err {
        Some(e) => s.push_str(&format!("plot '{csv_name}' using {}:{}:{} with yerrorbars\n", p.x, p.y, e)),
        None => s.push_str(&format!("plot '{csv_name}' using {}:{} with linespoints\n", p.x, p.y)),
    }
    s.push_str("pause -1\n");
    s
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Write `<id>.csv`, `<id>.json` and `<id>.gp` into the output directory.
pub fn write_outputs(r: &Resolved, report: &Report) -> CliResult<Written> {
    std::fs::create_dir_all(&r.out_dir).map_err(|e| CliError::io(&r.out_dir, e))?;
    let csv_name = format!("{}.csv", r.id);
    let (csv, json, plot) = (r.out_dir.join(&csv_name), r.out_dir.join(format!("{}.json", r.id)), r.out_dir.join(format!("{}.gp", r.id)));
    write(&csv, &csv_text(report)?)?;
    write(&plot, &gnuplot_script(report, &csv_name, &r.id))?;
    let rows = report
        .rows
        .iter()
        .map(|row| Value::Object(report.header.iter().zip(row).map(|(h, c)| (h.to_string(), c.to_json())).collect()))
        .collect();
    let record = ResultRecord {
        experiment_id: r.id.clone(),
        kind: r.config.kind.name().to_string(),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        config_hash: r.config_hash(),
        seed: r.seed,
        reps: r.config.reps,
        status: report.status,
        qualitative: r.config.qualitative,
        description: r.config.description.clone(),
        summary: report.summary.clone(),
        rows,
        warnings: report.warnings.clone(),
        files: [&csv, &plot].iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect(),
        config: serde_json::to_value(&r.config).expect("config serializes"),
    };
    let text = serde_json::to_string_pretty(&record).expect("record serializes");
    write(&json, &(text + "\n"))?;
    Ok(Written { csv, json, plot, paths: None, record })
}
