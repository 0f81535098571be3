//! Report serialization: JSON, JSON-lines and CSV, with every float written
//! at 17 significant digits so that values round-trip exactly.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};
use susflow_core::spectral::SpectrumReport;

use crate::error::CliError;
use crate::report::{Payload, RunReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    /// The whole report as one JSON document.
    Json,
    /// One compact JSON record per line.
    Jsonl,
    /// Comma-separated table with a header row.
    Csv,
}

/// `d.dddddddddddddddde±x`: 17 significant digits, locale-free.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// Wraps a formatter, replacing its float output with [`fmt_f64`].
struct Digits17<F>(F);

impl<F: Formatter> Formatter for Digits17<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt_f64(v).as_bytes())
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn end_object_key<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_key(w)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_compact<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Digits17(CompactFormatter));
    value.serialize(&mut ser)?;
    Ok(out)
}

pub fn to_json_pretty<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Digits17(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    Ok(out)
}

fn json_err(e: serde_json::Error) -> CliError {
    CliError::Io(io::Error::other(e))
}

fn unsupported(format: &str, report: &RunReport) -> CliError {
    CliError::Core(susflow_core::Error::InvalidArgument(format!(
        "format {format} is not supported for {} reports",
        report.experiment
    )))
}

/// Serializes a report. Failure reports are always JSON.
pub fn emit(report: &RunReport, format: Format) -> Result<Vec<u8>, CliError> {
    let format = if matches!(report.payload, Payload::Error(_)) { Format::Json } else { format };
    match format {
        Format::Json => {
            let mut out = to_json_pretty(report).map_err(json_err)?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Jsonl => emit_jsonl(report),
        Format::Csv => emit_csv(report),
    }
}

fn lines<T: Serialize>(records: &[T]) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    for r in records {
        out.extend(to_json_compact(r).map_err(json_err)?);
        out.push(b'\n');
    }
    Ok(out)
}

fn emit_jsonl(report: &RunReport) -> Result<Vec<u8>, CliError> {
    match &report.payload {
        Payload::Transversality(r) => lines(r),
        Payload::Genericity(r) => lines(r),
        Payload::Branches(b) => lines(&b.branches),
        Payload::Correlations(c) => lines(&c.samples),
        other => lines(std::slice::from_ref(other)),
    }
}

fn table(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let io_err = |e: csv::Error| CliError::Io(io::Error::other(e));
    w.write_record(header).map_err(io_err)?;
    for row in rows {
        w.write_record(&row).map_err(io_err)?;
    }
    w.into_inner().map_err(|e| CliError::Io(io::Error::other(e.to_string())))
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn spectrum_rows(s: &SpectrumReport) -> Vec<Vec<String>> {
    s.eigenvalues
        .iter()
        .enumerate()
        .map(|(i, e)| vec![i.to_string(), fmt_f64(e[0]), fmt_f64(e[1])])
        .collect()
}

fn emit_csv(report: &RunReport) -> Result<Vec<u8>, CliError> {
    match &report.payload {
        Payload::Branches(b) => table(
            &["word", "n", "y", "s_prime", "E", "slope"],
            b.branches
                .iter()
                .map(|r| {
                    vec![
                        r.word.clone(),
                        r.n.to_string(),
                        fmt_f64(r.y),
                        fmt_f64(r.s_prime),
                        fmt_f64(r.e),
                        fmt_f64(r.slope),
                    ]
                })
                .collect(),
        ),
        Payload::Correlations(c) => table(
            &["t", "re", "im"],
            c.samples
                .iter()
                .map(|s| vec![fmt_f64(s.t), fmt_f64(s.re), fmt_f64(s.im)])
                .collect(),
        ),
        Payload::Transversality(r) => table(
            &["t", "m_value", "m_upper", "n_value", "slack", "fitted_rate"],
            r.iter()
                .map(|e| {
                    vec![
                        fmt_f64(e.t),
                        fmt_f64(e.m_value),
                        fmt_f64(e.m_upper),
                        opt(e.n_value),
                        fmt_f64(e.slack),
                        opt(e.fitted_rate),
                    ]
                })
                .collect(),
        ),
        Payload::Spectrum(s) => table(&["index", "re", "im"], spectrum_rows(s)),
        _ => Err(unsupported("csv", report)),
    }
}
