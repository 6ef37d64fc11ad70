//! Landmark text format and alignment-result output.
//!
//! ```text
//! specimen <id> p=<p> k=<k>
//! <x> <y> [<z>]        (p lines)
//!
//! specimen <id> ...
//! ```
//!
//! Coordinates are written with 17 significant digits so files round-trip
//! bit for bit.

use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::gpa::AlignmentResult;
use crate::shape::LandmarkConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct Specimen {
    pub id: String,
    pub config: LandmarkConfig,
}

pub fn format_coord(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_landmarks<W: Write>(mut out: W, specimens: &[Specimen]) -> Result<()> {
    for (i, s) in specimens.iter().enumerate() {
        if i > 0 {
            writeln!(out)?;
        }
        if s.id.is_empty() || s.id.contains(char::is_whitespace) {
            return Err(Error::InvalidConfig(format!("specimen id {:?} must be one non-empty token", s.id)));
        }
        writeln!(out, "specimen {} p={} k={}", s.id, s.config.p(), s.config.k())?;
        for row in s.config.coords().row_iter() {
            let line: Vec<String> = row.iter().map(|v| format_coord(*v)).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
    }
    Ok(())
}

/// Numbers specimens `0..n` in order.
pub fn numbered(configs: &[LandmarkConfig]) -> Vec<Specimen> {
    configs
        .iter()
        .enumerate()
        .map(|(i, c)| Specimen { id: i.to_string(), config: c.clone() })
        .collect()
}

fn parse_header(line: &str, lineno: usize) -> Result<(String, usize, usize)> {
    let err = |msg: &str| Error::Parse { line: lineno, msg: msg.to_string() };
    let mut parts = line.split_whitespace();
    if parts.next() != Some("specimen") {
        return Err(err("expected `specimen <id> p=<p> k=<k>`"));
    }
    let id = parts.next().ok_or_else(|| err("missing specimen id"))?.to_string();
    let mut p = None;
    let mut k = None;
    for field in parts {
        match field.split_once('=') {
            Some(("p", v)) => p = Some(v.parse().map_err(|_| err("bad p"))?),
            Some(("k", v)) => k = Some(v.parse().map_err(|_| err("bad k"))?),
            _ => return Err(err(&format!("unexpected header field `{field}`"))),
        }
    }
    match (p, k) {
        (Some(p), Some(k)) => Ok((id, p, k)),
        _ => Err(err("header needs both p= and k=")),
    }
}

pub fn read_landmarks<R: BufRead>(input: R) -> Result<Vec<Specimen>> {
    let mut specimens = Vec::new();
    let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
    while let Some((lineno, line)) = lines.next() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (id, p, k) = parse_header(line.trim(), lineno)?;
        let mut values = Vec::with_capacity(p * k);
        for _ in 0..p {
            let (rowno, row) = lines.next().ok_or(Error::Parse {
                line: lineno,
                msg: format!("specimen {id} ends before {p} landmarks"),
            })?;
            let row = row?;
            let coords: Vec<f64> = row
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse { line: rowno, msg: e.to_string() })?;
            if coords.len() != k {
                return Err(Error::Parse { line: rowno, msg: format!("expected {k} coordinates, got {}", coords.len()) });
            }
            values.extend(coords);
        }
        let config = LandmarkConfig::from_vector(&values, p, k)?;
        specimens.push(Specimen { id, config });
    }
    Ok(specimens)
}

pub fn read_landmark_file(path: &Path) -> Result<Vec<Specimen>> {
    read_landmarks(std::io::BufReader::new(fs::File::open(path)?))
}

pub fn write_landmark_file(path: &Path, specimens: &[Specimen]) -> Result<()> {
    let mut buf = Vec::new();
    write_landmarks(&mut buf, specimens)?;
    fs::write(path, buf)?;
    Ok(())
}

/// Writes `aligned.txt`, `reference.txt` and `objective.csv` (`iter,q`) into `dir`.
pub fn write_alignment(dir: &Path, result: &AlignmentResult, ids: &[String]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let aligned: Vec<Specimen> = result
        .aligned
        .iter()
        .zip(ids)
        .map(|(c, id)| Specimen { id: id.clone(), config: c.clone() })
        .collect();
    write_landmark_file(&dir.join("aligned.txt"), &aligned)?;
    write_landmark_file(
        &dir.join("reference.txt"),
        &[Specimen { id: "reference".into(), config: result.reference.clone() }],
    )?;
    let mut csv = String::from("iter,q\n");
    for (i, q) in result.objective_history.iter().enumerate() {
        csv.push_str(&format!("{},{}\n", i + 1, format_coord(*q)));
    }
    fs::write(dir.join("objective.csv"), csv)?;
    Ok(())
}
