use std::fs;
use std::path::Path;

use ridge_core::PointCloud;
use serde::Serialize;

use crate::error::CliError;

/// Reads a numeric CSV with a header row into a cloud.
pub fn read_cloud(path: &Path) -> Result<PointCloud, CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let dim = rdr
        .headers()
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        .len();
    let mut coords = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        for field in rec.iter() {
            let x: f64 = field.trim().parse().map_err(|_| {
                CliError::Usage(format!(
                    "{}: row {} has non-numeric field '{field}'",
                    path.display(),
                    line + 1
                ))
            })?;
            coords.push(x);
        }
    }
    Ok(PointCloud::new(dim, coords)?)
}

/// Reads a CSV with a header into named columns of strings.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let header = rdr
        .headers()
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        rows.push(rec.iter().map(String::from).collect());
    }
    Ok((header, rows))
}

pub fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|k| format!("{prefix}{k}")).collect()
}

/// Shortest round-trip formatting keeps the files byte-stable.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_cloud(path: &Path, prefix: &str, cloud: &PointCloud) -> Result<(), CliError> {
    let rows: Vec<Vec<String>> = cloud.iter().map(|p| p.iter().map(|&x| num(x)).collect()).collect();
    write_csv(path, &names(prefix, cloud.dim()), &rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}
