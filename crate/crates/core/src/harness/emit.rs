//! Result files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::config::OutputFormat;
use super::sweep::SweepResult;
use crate::error::Result;

pub const CSV_HEADER: &str =
    "sweep_param,value,shift_mode,mean_delta_tr,std_delta_tr,mean_delta_ts,std_delta_ts,ensemble,seed";

fn field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One line per row; missing statistics are left empty.
pub fn write_csv<W: Write>(result: &SweepResult, mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for row in &result.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            result.sweep_param,
            row.value,
            row.shift_mode,
            field(row.mean_delta_tr),
            field(row.std_delta_tr),
            field(row.mean_delta_ts),
            field(row.std_delta_ts),
            row.ensemble,
            row.seed,
        )?;
    }
    Ok(())
}

pub fn write_json<W: Write>(result: &SweepResult, w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, result)
        .map_err(|e| crate::Error::Io(std::io::Error::other(e)))
}

pub fn load_json(path: &Path) -> Result<SweepResult> {
    let file = File::open(path)?;
    serde_json::from_reader(std::io::BufReader::new(file))
        .map_err(|e| crate::Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, e)))
}

pub fn file_name(result: &SweepResult, format: OutputFormat) -> String {
    let ext = match format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    };
    format!("{}_{}.{ext}", result.config.task_kind, result.config.sweep.kind())
}

/// Writes `result` into `dir` and returns the file path.
pub fn emit(result: &SweepResult, format: OutputFormat, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(file_name(result, format));
    let mut w = BufWriter::new(File::create(&path)?);
    match format {
        OutputFormat::Csv => write_csv(result, &mut w)?,
        OutputFormat::Json => write_json(result, &mut w)?,
    }
    w.flush()?;
    Ok(path)
}
