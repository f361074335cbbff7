//! File formats: interferogram, phase-spectrum, index, histogram and sweep
//! CSVs, plus JSON with fixed 17-significant-digit floats so repeated runs
//! produce identical bytes.

use std::io::{Read, Write};

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{HistogramBin, SweepReport};
use crate::metaoptics::{IndexPoint, PhaseSpectrum};
use crate::photonsim::{Interferogram, Sample};

pub const INTERFEROGRAM_HEADER: [&str; 3] = ["phase_rad", "counts_d1", "counts_d2"];
pub const SPECTRUM_HEADER: [&str; 2] = ["wavelength_nm", "phase_rad"];

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("empty input: expected header `{0}`")]
    Empty(String),
    #[error("line {line}: {message}")]
    Line { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn line_error(record: &csv::StringRecord, message: impl Into<String>) -> FormatError {
    FormatError::Line {
        line: record.position().map_or(0, |p| p.line()),
        message: message.into(),
    }
}

/// Read records after checking that the header matches `expected` exactly.
fn read_records<R: Read>(reader: R, expected: &[&str]) -> Result<Vec<csv::StringRecord>, FormatError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut records = rdr.records();
    let joined = expected.join(",");
    let header = match records.next() {
        None => return Err(FormatError::Empty(joined)),
        Some(h) => h?,
    };
    if header.iter().ne(expected.iter().copied()) {
        return Err(line_error(&header, format!("expected header `{joined}`")));
    }
    let mut out = Vec::new();
    for rec in records {
        let rec = rec?;
        if rec.len() != expected.len() {
            return Err(line_error(
                &rec,
                format!("expected {} fields, found {}", expected.len(), rec.len()),
            ));
        }
        out.push(rec);
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T, FormatError> {
    rec[i]
        .parse()
        .map_err(|_| line_error(rec, format!("invalid {name} `{}`", &rec[i])))
}

fn finite(rec: &csv::StringRecord, i: usize, name: &str) -> Result<f64, FormatError> {
    let v: f64 = field(rec, i, name)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(line_error(rec, format!("{name} must be finite")))
    }
}

pub fn read_interferogram<R: Read>(reader: R, label: &str) -> Result<Interferogram, FormatError> {
    let samples = read_records(reader, &INTERFEROGRAM_HEADER)?
        .iter()
        .map(|rec| {
            Ok(Sample {
                phase_rad: finite(rec, 0, "phase_rad")?,
                counts_d1: field(rec, 1, "counts_d1")?,
                counts_d2: field(rec, 2, "counts_d2")?,
            })
        })
        .collect::<Result<Vec<_>, FormatError>>()?;
    Ok(Interferogram::new(samples, 0, label))
}

pub fn write_interferogram<W: Write>(writer: W, ig: &Interferogram) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(INTERFEROGRAM_HEADER)?;
    for s in &ig.samples {
        w.write_record([
            format_float(s.phase_rad),
            s.counts_d1.to_string(),
            s.counts_d2.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_phase_spectrum<R: Read>(reader: R) -> Result<Vec<(f64, f64)>, FormatError> {
    read_records(reader, &SPECTRUM_HEADER)?
        .iter()
        .map(|rec| Ok((finite(rec, 0, "wavelength_nm")?, finite(rec, 1, "phase_rad")?)))
        .collect()
}

pub fn write_phase_spectrum<W: Write>(writer: W, spectrum: &PhaseSpectrum) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SPECTRUM_HEADER)?;
    for &(l, p) in spectrum.points() {
        w.write_record([format_float(l), format_float(p)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_index_spectrum<W: Write>(writer: W, points: &[IndexPoint]) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["wavelength_nm", "n"])?;
    for p in points {
        w.write_record([format_float(p.wavelength_nm), format_float(p.index)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_histogram<W: Write>(writer: W, bins: &[HistogramBin]) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["bin_center", "count"])?;
    for b in bins {
        w.write_record([format_float(b.bin_center), b.count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep<W: Write>(writer: W, report: &SweepReport) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["epsilon", "gamma_shift", "significance"])?;
    for p in &report.points {
        w.write_record([
            format_float(p.epsilon),
            format_float(p.gamma_shift),
            format_float(p.significance),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Seventeen significant digits, enough to round-trip any f64.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

struct FixedFloats;

impl serde_json::ser::Formatter for FixedFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        writer.write_all(format_float(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Non-finite floats are written as `null`.
pub fn write_json<W: Write, T: Serialize + ?Sized>(writer: W, value: &T) -> Result<(), FormatError> {
    let mut ser = serde_json::Serializer::with_formatter(writer, FixedFloats);
    value.serialize(&mut ser)?;
    ser.into_inner().write_all(b"\n")?;
    Ok(())
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String, FormatError> {
    let mut buf = Vec::new();
    write_json(&mut buf, value)?;
    Ok(String::from_utf8(buf).expect("json is utf-8"))
}
