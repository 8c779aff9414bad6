//! Result rows and their CSV form.
//!
//! Reals are written with 17 significant digits, so a file read back with
//! [`read_rows`] reproduces every value bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::herding::{IterationRecord, Variant};

pub const HEADER: [&str; 9] = [
    "method",
    "seed",
    "t",
    "node_count",
    "mmd",
    "wall_time_seconds",
    "cos_theta",
    "gamma",
    "K_t",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub seed: u64,
    pub t: usize,
    pub node_count: usize,
    pub mmd: f64,
    pub wall_time_seconds: f64,
    pub cos_theta: f64,
    pub gamma: f64,
    pub k_t: usize,
}

impl ResultRow {
    pub fn from_record(method: Variant, seed: u64, r: &IterationRecord<f64>) -> Self {
        Self {
            method: method.name().to_string(),
            seed,
            t: r.t,
            node_count: r.node_count,
            mmd: r.mmd,
            wall_time_seconds: r.wall_time,
            cos_theta: r.cos_theta,
            gamma: r.gamma,
            k_t: r.inner_rounds,
        }
    }

    #[cfg(test)]
    pub(crate) fn synthetic(t: usize, node_count: usize, mmd: f64) -> Self {
        Self {
            method: "linesearch".into(),
            seed: 0,
            t,
            node_count,
            mmd,
            wall_time_seconds: t as f64 * 1e-3,
            cos_theta: f64::NAN,
            gamma: f64::NAN,
            k_t: 1,
        }
    }

    /// Bitwise equality, with NaN equal to NaN.
    pub fn same_bits(&self, other: &Self) -> bool {
        let eq = |a: f64, b: f64| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan());
        self.method == other.method
            && self.seed == other.seed
            && self.t == other.t
            && self.node_count == other.node_count
            && self.k_t == other.k_t
            && eq(self.mmd, other.mmd)
            && eq(self.wall_time_seconds, other.wall_time_seconds)
            && eq(self.cos_theta, other.cos_theta)
            && eq(self.gamma, other.gamma)
    }
}

/// `{:.16e}`: 17 significant digits.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_rows<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.seed.to_string(),
            r.t.to_string(),
            r.node_count.to_string(),
            format_real(r.mmd),
            format_real(r.wall_time_seconds),
            format_real(r.cos_theta),
            format_real(r.gamma),
            r.k_t.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().ne(HEADER) {
        return Err(Error::Analysis(format!("unexpected CSV header {header:?}")));
    }
    let bad =
        |field: &str, line: usize| Error::Analysis(format!("bad `{field}` on data line {line}"));
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = i + 1;
        let int = |k: usize| rec[k].parse::<usize>().map_err(|_| bad(HEADER[k], line));
        let real = |k: usize| rec[k].parse::<f64>().map_err(|_| bad(HEADER[k], line));
        rows.push(ResultRow {
            method: rec[0].to_string(),
            seed: rec[1].parse().map_err(|_| bad("seed", line))?,
            t: int(2)?,
            node_count: int(3)?,
            mmd: real(4)?,
            wall_time_seconds: real(5)?,
            cos_theta: real(6)?,
            gamma: real(7)?,
            k_t: int(8)?,
        });
    }
    Ok(rows)
}

pub fn write_rows_file(path: &Path, rows: &[ResultRow]) -> Result<()> {
    write_rows(std::io::BufWriter::new(std::fs::File::create(path)?), rows)
}

pub fn read_rows_file(path: &Path) -> Result<Vec<ResultRow>> {
    read_rows(std::fs::File::open(path)?)
}

/// One line per finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub method: String,
    pub seed: u64,
    pub iterations: usize,
    pub node_count: usize,
    pub mmd: f64,
    pub wall_time_seconds: f64,
    pub fill_distance: f64,
    pub stop: String,
}

pub fn write_summary<W: Write>(out: W, rows: &[RunSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "method",
        "seed",
        "iterations",
        "node_count",
        "mmd",
        "wall_time_seconds",
        "fill_distance",
        "stop",
    ])?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.seed.to_string(),
            r.iterations.to_string(),
            r.node_count.to_string(),
            format_real(r.mmd),
            format_real(r.wall_time_seconds),
            format_real(r.fill_distance),
            r.stop.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
