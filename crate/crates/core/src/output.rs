//! Plot-ready files: CSV series with 17 significant digits and streamed JSON.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::work::{ExcitationRecord, WorkSpectrum};

/// A float in round-trip scientific notation.
pub fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

/// A CSV file written row by row.
pub struct CsvWriter {
    path: PathBuf,
    out: BufWriter<fs::File>,
    columns: usize,
}

impl CsvWriter {
    pub fn create(path: impl AsRef<Path>, header: &[&str]) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut out = BufWriter::new(fs::File::create(&path)?);
        writeln!(out, "{}", header.join(","))?;
        Ok(Self { path, out, columns: header.len() })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        if fields.len() != self.columns {
            return Err(Error::Consistency(format!(
                "{}: row of {} fields under a {}-column header",
                self.path.display(),
                fields.len(),
                self.columns
            )));
        }
        writeln!(self.out, "{}", fields.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.out.flush()?;
        Ok(self.path)
    }
}

#[derive(Serialize)]
struct RecordOut<'a> {
    work: f64,
    work_quanta: Option<i64>,
    probability: f64,
    order: usize,
    holes: Option<&'a [u16]>,
    particles: Option<&'a [u16]>,
}

impl<'a> From<&'a ExcitationRecord> for RecordOut<'a> {
    fn from(r: &'a ExcitationRecord) -> Self {
        Self {
            work: r.work,
            work_quanta: r.work_quanta,
            probability: r.probability,
            order: r.order,
            holes: r.transition.as_ref().map(|t| t.holes()),
            particles: r.transition.as_ref().map(|t| t.particles()),
        }
    }
}

/// Writes `{"summary": .., "records": [..]}` with one record per line.
///
/// Holes and particles are 1-based final levels relative to {1..N}; merged
/// finite-temperature records carry `null` there.
pub fn write_wpd_json(path: impl AsRef<Path>, summary: &impl Serialize, spectrum: &WorkSpectrum) -> Result<PathBuf> {
    let path = path.as_ref().to_path_buf();
    let mut out = BufWriter::new(fs::File::create(&path)?);
    let json = |e: serde_json::Error| Error::Io(std::io::Error::other(e));
    out.write_all(b"{\"summary\":")?;
    serde_json::to_writer(&mut out, summary).map_err(json)?;
    out.write_all(b",\n\"records\":[")?;
    for (i, r) in spectrum.records.iter().enumerate() {
        out.write_all(if i == 0 { b"\n" } else { b",\n" })?;
        serde_json::to_writer(&mut out, &RecordOut::from(r)).map_err(json)?;
    }
    out.write_all(b"\n]}\n")?;
    out.flush()?;
    Ok(path)
}

pub fn write_json(path: impl AsRef<Path>, value: &impl Serialize) -> Result<PathBuf> {
    let path = path.as_ref().to_path_buf();
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    fs::write(&path, text + "\n")?;
    Ok(path)
}

/// File-name fragment for a T/T_F value, e.g. `0.05` → `T0.05`.
pub fn temperature_tag(t_over_tf: f64) -> String {
    format!("T{t_over_tf}")
}
