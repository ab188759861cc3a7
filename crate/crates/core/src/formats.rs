//! CSV and JSON forms of count records, sweeps and HOM scans.
//!
//! Every CSV starts with a fixed header. Readers report the 1-based line of
//! the first bad row.

use std::io::{Read, Write};

use csv::{ReaderBuilder, StringRecord, WriterBuilder};

use crate::counts::CountRecord;
use crate::error::{Error, Result};
use crate::sim::{HomPoint, SweepPoint};

pub const RECORD_HEADER: [&str; 9] = CountRecord::FIELDS;
pub const SWEEP_HEADER: [&str; 10] = ["concentration_pct", "exposure", "A1", "A2", "B1", "B2", "AB", "CD", "AC", "BD"];
pub const HOM_HEADER: [&str; 2] = ["delay", "coincidences"];

fn io_error(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

fn write_rows<W: Write>(out: W, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(out);
    w.write_record(header).map_err(io_error)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(io_error)?;
    }
    w.flush().map_err(io_error)
}

fn read_rows<R: Read, T>(
    input: R,
    header: &[&str],
    mut build: impl FnMut(&[f64]) -> std::result::Result<T, String>,
) -> Result<Vec<T>> {
    let mut r = ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(input);
    let mut rows = r.records();
    let found = match rows.next() {
        None => return Err(Error::Parse { line: 1, message: "empty input".into() }),
        Some(rec) => rec.map_err(|e| csv_error(&e, 1))?,
    };
    if found.iter().collect::<Vec<_>>() != header {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                header.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut out = Vec::new();
    for rec in rows {
        let rec = rec.map_err(|e| csv_error(&e, 0))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let values = parse_fields(&rec, header).map_err(|message| Error::Parse { line, message })?;
        out.push(build(&values).map_err(|message| Error::Parse { line, message })?);
    }
    Ok(out)
}

fn csv_error(e: &csv::Error, fallback_line: usize) -> Error {
    let line = e.position().map_or(fallback_line, |p| p.line() as usize);
    Error::Parse { line, message: e.to_string() }
}

fn parse_fields(rec: &StringRecord, header: &[&str]) -> std::result::Result<Vec<f64>, String> {
    if rec.len() != header.len() {
        return Err(format!("expected {} fields, found {}", header.len(), rec.len()));
    }
    rec.iter()
        .zip(header)
        .map(|(field, name)| match field.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(format!("column {name}: `{field}` is not a finite number")),
        })
        .collect()
}

fn record_from(exposure: f64, counts: &[f64]) -> std::result::Result<CountRecord, String> {
    let mut c = [0.0; 8];
    c.copy_from_slice(counts);
    let rec = CountRecord::from_counts(exposure, c);
    rec.validate().map_err(|e| e.to_string())?;
    Ok(rec)
}

fn record_row(rec: &CountRecord) -> Vec<f64> {
    std::iter::once(rec.exposure).chain(rec.counts()).collect()
}

pub fn write_records_csv<W: Write>(out: W, records: &[CountRecord]) -> Result<()> {
    write_rows(out, &RECORD_HEADER, records.iter().map(record_row))
}

pub fn read_records_csv<R: Read>(input: R) -> Result<Vec<CountRecord>> {
    read_rows(input, &RECORD_HEADER, |v| record_from(v[0], &v[1..]))
}

pub fn write_sweep_csv<W: Write>(out: W, sweep: &[SweepPoint]) -> Result<()> {
    write_rows(
        out,
        &SWEEP_HEADER,
        sweep.iter().map(|p| std::iter::once(p.concentration).chain(record_row(&p.record)).collect()),
    )
}

pub fn read_sweep_csv<R: Read>(input: R) -> Result<Vec<SweepPoint>> {
    read_rows(input, &SWEEP_HEADER, |v| Ok(SweepPoint { concentration: v[0], record: record_from(v[1], &v[2..])? }))
}

pub fn write_hom_csv<W: Write>(out: W, scan: &[HomPoint]) -> Result<()> {
    write_rows(out, &HOM_HEADER, scan.iter().map(|p| vec![p.delay, p.coincidences]))
}

pub fn read_hom_csv<R: Read>(input: R) -> Result<Vec<HomPoint>> {
    read_rows(input, &HOM_HEADER, |v| {
        if v[1] < 0.0 {
            return Err(format!("coincidences {} must be non-negative", v[1]));
        }
        Ok(HomPoint { delay: v[0], coincidences: v[1] })
    })
}

/// JSON array of record objects keyed `exposure, A1, ..., BD`.
pub fn write_records_json<W: Write>(out: W, records: &[CountRecord]) -> Result<()> {
    serde_json::to_writer_pretty(out, records).map_err(io_error)
}

pub fn read_records_json<R: Read>(input: R) -> Result<Vec<CountRecord>> {
    let records: Vec<CountRecord> =
        serde_json::from_reader(input).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
    for rec in &records {
        rec.validate()?;
    }
    Ok(records)
}
