//! Deterministic CSV/JSON encoding and atomic file output.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a value
//! read back parses to the identical double.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::wave::RadialField;

/// Writes `bytes` to `path` through a sibling temporary file and a rename,
/// creating missing parent directories.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into());
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Encodes a header and rows of floats as CSV.
pub fn csv_bytes<I>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator,
    I::Item: IntoIterator,
    <I::Item as IntoIterator>::Item: CsvCell,
{
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header)?;
    for row in rows {
        let record: Vec<String> = row.into_iter().map(|c| c.cell()).collect();
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(writer.into_inner().map_err(|e| e.into_error())?)
}

/// One CSV field.
pub trait CsvCell {
    fn cell(&self) -> String;
}

impl CsvCell for f64 {
    fn cell(&self) -> String {
        format_float(*self)
    }
}

impl CsvCell for String {
    fn cell(&self) -> String {
        self.clone()
    }
}

impl CsvCell for &str {
    fn cell(&self) -> String {
        (*self).to_string()
    }
}

/// Shortest round-trip text of `x`; non-finite values become `nan`, `inf`, `-inf`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:?}")
    }
}

/// Pretty JSON with a trailing newline.
pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub const TRAJECTORY_HEADER: [&str; 4] = ["t", "r", "u", "v"];

/// Snapshot CSV with one row per stored node.
pub fn trajectory_csv(trajectory: &[RadialField]) -> Result<Vec<u8>> {
    let rows = trajectory.iter().flat_map(|f| {
        (0..f.r.len()).map(move |j| [f.t, f.r[j], f.u[j], f.v[j]])
    });
    csv_bytes(&TRAJECTORY_HEADER, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0] {
            assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(format_float(f64::NAN), "nan");
    }

    #[test]
    fn atomic_write_creates_directories() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a/b/out.csv");
        let bytes = csv_bytes(&["x", "y"], [[1.0, 2.0], [3.0, 4.5]]).unwrap();
        write_atomic(&path, &bytes).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "x,y\n1.0,2.0\n3.0,4.5\n");
        assert!(!dir.path().join("a/b/.out.csv.tmp").exists());
    }

    #[test]
    fn trajectory_rows_follow_snapshots() {
        let f = RadialField {
            t: 0.5,
            r: vec![0.0, 0.1],
            u: vec![1.0, 0.5],
            v: vec![0.0, -1.0],
            support_radius: 0.1,
        };
        let text = String::from_utf8(trajectory_csv(&[f]).unwrap()).unwrap();
        assert_eq!(text, "t,r,u,v\n0.5,0.0,1.0,0.0\n0.5,0.1,0.5,-1.0\n");
    }
}
