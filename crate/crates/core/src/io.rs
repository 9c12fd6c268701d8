//! File formats: single-column path CSV with a JSON metadata sidecar, and
//! the scale/shift/value coefficient CSV.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statistics::CoefficientTable;
use crate::synthesis::{ProcessKind, RngStream, SamplePath};

/// Contents of `<path>.meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathMetadata {
    pub kind: ProcessKind,
    #[serde(rename = "H")]
    pub hurst: Option<f64>,
    #[serde(rename = "N")]
    pub n: usize,
    pub m: Option<usize>,
    pub master_seed: Option<u64>,
    pub stream_index: Option<u64>,
}

impl PathMetadata {
    pub fn of(path: &SamplePath) -> Self {
        Self {
            kind: path.kind(),
            hurst: path.hurst(),
            n: path.len(),
            m: path.refinement(),
            master_seed: path.stream().map(|s| s.master_seed),
            stream_index: path.stream().map(|s| s.stream_index),
        }
    }
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let mut name = csv_path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Writes a `value` header and one value per line with 17 significant digits.
pub fn write_values_csv<W: Write>(values: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["value"])?;
    for v in values {
        w.write_record([format!("{v:.16e}")])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_values_csv<R: Read>(input: R) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.len() != 1 || &headers[0] != "value" {
        return Err(Error::Parse(format!(
            "expected a single `value` column, found header {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = rec.get(0).unwrap_or("").trim();
        let v: f64 = field
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: `{field}` is not a number", i + 2)))?;
        out.push(v);
    }
    Ok(out)
}

/// Writes the CSV and its metadata sidecar.
pub fn save_path(path: &SamplePath, file: &Path) -> Result<()> {
    write_values_csv(
        path.values(),
        BufWriter::new(File::create(file).map_err(Error::file(file))?),
    )?;
    let meta = serde_json::to_string_pretty(&PathMetadata::of(path))?;
    let side = sidecar_path(file);
    std::fs::write(&side, meta + "\n").map_err(Error::file(&side))?;
    Ok(())
}

/// Reads a path CSV; the sidecar, when present, restores its metadata.
pub fn load_path(file: &Path) -> Result<SamplePath> {
    let values = read_values_csv(BufReader::new(File::open(file).map_err(Error::file(file))?))?;
    let side = sidecar_path(file);
    if !side.exists() {
        return SamplePath::external(values);
    }
    let meta: PathMetadata =
        serde_json::from_str(&std::fs::read_to_string(&side).map_err(Error::file(&side))?)
            .map_err(|e| Error::Parse(format!("{}: {e}", side.display())))?;
    if meta.n != values.len() {
        return Err(Error::Parse(format!(
            "{} declares N = {} but the CSV holds {} values",
            side.display(),
            meta.n,
            values.len()
        )));
    }
    let stream = match (meta.master_seed, meta.stream_index) {
        (Some(seed), Some(idx)) => Some(RngStream::new(seed, idx)),
        _ => None,
    };
    SamplePath::with_metadata(values, meta.kind, meta.hurst, stream, meta.m)
}

/// scale,shift,value rows of a coefficient table.
pub fn write_coefficients_csv<W: Write>(table: &CoefficientTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scale", "shift", "value"])?;
    for (scale, shift, v) in table.entries() {
        w.write_record([scale.to_string(), shift.to_string(), format!("{v:.16e}")])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::generate_rosenblatt;
    use crate::wavelets::{MotherWavelet, WaveletKind};

    #[test]
    fn path_round_trip_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("p.csv");
        let p = generate_rosenblatt(64, 0.7, 4, RngStream::new(9, 2)).unwrap();
        save_path(&p, &file).unwrap();
        let q = load_path(&file).unwrap();
        assert_eq!(p, q);
        let meta: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(sidecar_path(&file)).unwrap()).unwrap();
        assert_eq!(meta["kind"], "rosenblatt");
        assert_eq!(meta["N"], 64);
        assert_eq!(meta["m"], 4);
        assert_eq!(meta["stream_index"], 2);
    }

    #[test]
    fn csv_without_sidecar_is_external() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("x.csv");
        std::fs::write(&file, "value\n1.5\n-2\n3e-3\n").unwrap();
        let p = load_path(&file).unwrap();
        assert_eq!(p.values(), &[1.5, -2.0, 0.003]);
        assert_eq!(p.kind(), ProcessKind::External);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = read_values_csv("value\n1\nabc\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(read_values_csv("x\n1\n".as_bytes()).is_err());
    }

    #[test]
    fn coefficient_csv_schema() {
        let p = SamplePath::external((0..40).map(|k| (k as f64).cos()).collect()).unwrap();
        let t = CoefficientTable::new(&p, 4, 2, &MotherWavelet::new(WaveletKind::Haar)).unwrap();
        let mut buf = Vec::new();
        write_coefficients_csv(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "scale,shift,value");
        assert!(lines[1].starts_with("4,1,"));
        assert_eq!(lines.len(), 1 + 9 + 4);
    }
}
