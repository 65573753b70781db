//! CSV and JSON writers.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;

use super::experiment::{ExperimentResult, SummaryRow, UeRecord};
use super::HarnessError;

/// Files written by [`emit`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Emitted {
    pub samples_csv: PathBuf,
    pub summary_csv: PathBuf,
    pub json: PathBuf,
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| HarnessError::io(path, e))
}

fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<(), HarnessError> {
    let csv_err = |e: csv::Error| HarnessError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(create(path)?);
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Per-UE samples: one row per (scheme, sweep value, drop, UE).
pub fn write_samples_csv(result: &ExperimentResult, path: &Path) -> Result<(), HarnessError> {
    write_rows(
        path,
        &[
            "scheme",
            "sweep_param",
            "sweep_value",
            "drop",
            "ue",
            "ul_tput_bps",
            "dl_tput_bps",
        ],
        &result.ues,
    )
}

pub fn write_summary_csv(rows: &[SummaryRow], path: &Path) -> Result<(), HarnessError> {
    write_rows(path, &["scheme", "sweep_value", "metric", "value"], rows)
}

pub fn read_samples_csv(path: &Path) -> Result<Vec<UeRecord>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    r.deserialize()
        .map(|row| {
            row.map_err(|e| HarnessError::Csv {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
        })
        .collect()
}

/// Full result plus summary as one JSON document.
pub fn write_json(result: &ExperimentResult, path: &Path) -> Result<(), HarnessError> {
    #[derive(Serialize)]
    struct Doc<'a> {
        result: &'a ExperimentResult,
        summary: Vec<SummaryRow>,
    }
    let doc = Doc {
        result,
        summary: result.summary(),
    };
    serde_json::to_writer_pretty(create(path)?, &doc).map_err(|e| HarnessError::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes `<name>_samples.csv`, `<name>_summary.csv` and `<name>.json`
/// into `dir`.
pub fn emit(result: &ExperimentResult, dir: &Path) -> Result<Emitted, HarnessError> {
    let out = Emitted {
        samples_csv: dir.join(format!("{}_samples.csv", result.name)),
        summary_csv: dir.join(format!("{}_summary.csv", result.name)),
        json: dir.join(format!("{}.json", result.name)),
    };
    write_samples_csv(result, &out.samples_csv)?;
    write_summary_csv(&result.summary(), &out.summary_csv)?;
    write_json(result, &out.json)?;
    Ok(out)
}

/// Matrix as CSV, one line per row, no header.
pub fn write_matrix_csv(m: &DMatrix<f64>, path: &Path) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new().from_writer(create(path)?);
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:e}", m[(i, j)])).collect();
        w.write_record(&row).map_err(|e| HarnessError::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}
