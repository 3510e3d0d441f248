//! Delimited-text interchange: datasets, posteriors, curves.
//!
//! Every table is comma-separated with a header row. Readers report the
//! 1-based file line of the first bad record.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::choice_model::{Offset, RiskDisposition};
use crate::consistency::{PointMethod, UtilityPoint};
use crate::estimation::{ChoiceObservation, PosteriorGrid};
use crate::utility_forms::FormRow;

pub const DATASET_HEADER: [&str; 3] = ["c", "p", "y"];
pub const POSTERIOR_HEADER: [&str; 3] = ["alpha", "beta", "weight"];
pub const CURVE_HEADER: [&str; 5] = ["c", "u", "omega", "disposition", "method"];
pub const FORMS_HEADER: [&str; 4] = ["fbar", "utility", "disutility", "omnibus"];
pub const CHOICE_CURVE_HEADER: [&str; 2] = ["p_minus_c", "prob"];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: {message}")]
    Record { line: u64, message: String },
    #[error("expected header {expected:?}, found {found:?}")]
    Header { expected: Vec<String>, found: Vec<String> },
    #[error("no data rows")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn line_of(err: &csv::Error, fallback: u64) -> u64 {
    err.position().map_or(fallback, |p| p.line())
}

fn read_rows<R, T, F>(reader: R, header: &[&str], mut convert: F) -> Result<Vec<T>, IoError>
where
    R: Read,
    T: for<'de> Deserialize<'de>,
    F: FnMut(T, u64) -> Result<T, String>,
{
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if !header.iter().enumerate().all(|(i, h)| found.get(i).map(String::as_str) == Some(*h)) {
        if found.is_empty() {
            return Err(IoError::Empty);
        }
        return Err(IoError::Header { expected: header.iter().map(|s| s.to_string()).collect(), found });
    }
    let mut out = Vec::new();
    for (idx, rec) in rdr.deserialize::<T>().enumerate() {
        let fallback = idx as u64 + 2;
        let row = rec.map_err(|e| IoError::Record { line: line_of(&e, fallback), message: e.to_string() })?;
        out.push(convert(row, fallback).map_err(|message| IoError::Record { line: fallback, message })?);
    }
    if out.is_empty() {
        return Err(IoError::Empty);
    }
    Ok(out)
}

pub fn read_dataset<R: Read>(reader: R) -> Result<Vec<ChoiceObservation>, IoError> {
    read_rows(reader, &DATASET_HEADER, |o: ChoiceObservation, _| {
        ChoiceObservation::new(o.c, o.p, o.y).map_err(|e| e.to_string())
    })
}

pub fn write_dataset<W: Write>(writer: W, rows: &[ChoiceObservation]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(DATASET_HEADER)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct PosteriorRow {
    alpha: f64,
    beta: f64,
    weight: f64,
}

pub fn write_posterior<W: Write>(writer: W, posterior: &PosteriorGrid) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    for (alpha, beta, weight) in posterior.iter() {
        w.serialize(PosteriorRow { alpha, beta, weight })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `(alpha, beta, weight)` triples in file order.
pub fn read_posterior<R: Read>(reader: R) -> Result<Vec<(f64, f64, f64)>, IoError> {
    let rows = read_rows(reader, &POSTERIOR_HEADER, |r: PosteriorRow, _| {
        if r.weight >= 0.0 && r.alpha > 0.0 && r.beta > 0.0 {
            Ok(r)
        } else {
            Err("alpha and beta must be positive and weight non-negative".into())
        }
    })?;
    Ok(rows.into_iter().map(|r| (r.alpha, r.beta, r.weight)).collect())
}

/// A utility-curve row; `at_bound` is written as an extra column when present.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub point: UtilityPoint,
    pub at_bound: Option<bool>,
}

#[derive(Serialize, Deserialize)]
struct RawCurveRow {
    c: f64,
    u: f64,
    omega: f64,
    disposition: RiskDisposition,
    method: PointMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    at_bound: Option<u8>,
}

pub fn write_curve<W: Write>(writer: W, rows: &[CurveRow]) -> Result<(), IoError> {
    let with_flag = rows.iter().any(|r| r.at_bound.is_some());
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    let mut header: Vec<&str> = CURVE_HEADER.to_vec();
    if with_flag {
        header.push("at_bound");
    }
    w.write_record(&header)?;
    for r in rows {
        let p = r.point;
        let at_bound = with_flag.then(|| u8::from(r.at_bound.unwrap_or(false)));
        w.serialize(RawCurveRow {
            c: p.c,
            u: p.u,
            omega: p.omega.value(),
            disposition: p.disposition,
            method: p.method,
            at_bound,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve<R: Read>(reader: R) -> Result<Vec<CurveRow>, IoError> {
    let rows = read_rows(reader, &CURVE_HEADER, |r: RawCurveRow, _| {
        Offset::new(r.omega).map_err(|e| e.to_string())?;
        if !(0.0..=1.0).contains(&r.u) {
            return Err(format!("utility {} outside [0, 1]", r.u));
        }
        Ok(r)
    })?;
    Ok(rows
        .into_iter()
        .map(|r| CurveRow {
            point: UtilityPoint {
                c: r.c,
                u: r.u,
                omega: Offset::new(r.omega).expect("checked above"),
                disposition: r.disposition,
                method: r.method,
            },
            at_bound: r.at_bound.map(|b| b != 0),
        })
        .collect())
}

pub fn write_forms<W: Write>(writer: W, rows: &[FormRow]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_choice_curve<W: Write>(writer: W, rows: &[(f64, f64)]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CHOICE_CURVE_HEADER)?;
    for (d, prob) in rows {
        w.write_record([d.to_string(), prob.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| IoError::Io(e.error))?;
    Ok(())
}

pub fn read_dataset_file(path: &Path) -> Result<Vec<ChoiceObservation>, IoError> {
    read_dataset(fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::PosteriorGrid;
    use crate::choice_model::ChoiceParams;

    #[test]
    fn dataset_round_trip() {
        let rows = vec![
            ChoiceObservation::new(0.5, 0.3, false).unwrap(),
            ChoiceObservation::new(0.5, 0.9, true).unwrap(),
        ];
        let mut buf = Vec::new();
        write_dataset(&mut buf, &rows).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "c,p,y\n0.5,0.3,0\n0.5,0.9,1\n");
        assert_eq!(read_dataset(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn bad_rows_report_line_numbers() {
        let err = read_dataset("c,p,y\n0.5,0.3,0\n0.5,oops,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, IoError::Record { line: 3, .. }), "{err}");
        let err = read_dataset("c,p,y\n0.5,0.3,0\n0.5,0.4,0\n0.5,0.6,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, IoError::Record { line: 4, .. }), "{err}");
        let err = read_dataset("c,p,y\n1.0,0.3,0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, IoError::Record { line: 2, .. }), "{err}");
    }

    #[test]
    fn empty_and_wrong_header() {
        assert!(matches!(read_dataset("".as_bytes()), Err(IoError::Empty)));
        assert!(matches!(read_dataset("c,p,y\n".as_bytes()), Err(IoError::Empty)));
        assert!(matches!(read_dataset("a,b,c\n1,2,3\n".as_bytes()), Err(IoError::Header { .. })));
    }

    #[test]
    fn posterior_export() {
        let grid = PosteriorGrid::point_mass(ChoiceParams::new(1.5, 2.0).unwrap());
        let mut buf = Vec::new();
        write_posterior(&mut buf, &grid).unwrap();
        assert_eq!(read_posterior(buf.as_slice()).unwrap(), vec![(1.5, 2.0, 1.0)]);
    }

    #[test]
    fn curve_round_trip_with_flag() {
        let p = UtilityPoint::from_omega(0.8, Offset::new(0.13).unwrap(), PointMethod::Mle);
        let rows = vec![CurveRow { point: p, at_bound: Some(true) }];
        let mut buf = Vec::new();
        write_curve(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("c,u,omega,disposition,method,at_bound\n0.8,"));
        assert!(text.trim_end().ends_with("averse,mle,1"));
        assert_eq!(read_curve(buf.as_slice()).unwrap(), rows);

        let mut plain = Vec::new();
        write_curve(&mut plain, &[CurveRow { point: p, at_bound: None }]).unwrap();
        assert!(String::from_utf8(plain).unwrap().starts_with("c,u,omega,disposition,method\n"));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
