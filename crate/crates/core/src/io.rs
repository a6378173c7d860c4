//! CSV and JSON serialization of paths.
//!
//! Level-1 paths use the header `t,v1..vd,jump`; rough paths add the
//! running level-2 matrix as `m11..mdd`. Floats are written with 17
//! significant digits. A path that holds constant after its last sample
//! gets an extra hold row at the horizon, so the horizon survives a round
//! trip.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{AlgebraError, G2Element};
use crate::cadlag::{CadlagPath, PathError};
use crate::lift::RoughPath2;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad header: {0}")]
    Header(String),
    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// JSON sidecar for a serialized rough path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoughPathMeta {
    pub d: usize,
    pub n: usize,
    pub marcus_like: bool,
    pub horizon: f64,
}

impl RoughPathMeta {
    pub fn of(x: &RoughPath2) -> Self {
        Self { d: x.dim(), n: x.len(), marcus_like: x.marcus_like(), horizon: x.horizon() }
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn header(d: usize, level2: bool) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=d).map(|i| format!("v{i}")));
    if level2 {
        for i in 1..=d {
            h.extend((1..=d).map(|j| format!("m{i}{j}")));
        }
    }
    h.push("jump".into());
    h
}

/// Writes a level-1 path.
pub fn write_path_csv<W: Write>(w: W, x: &CadlagPath<Vec<f64>>) -> Result<(), IoError> {
    let x = x.extended_to_horizon();
    let mask = x.jump_mask();
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header(x.dim(), false))?;
    for ((t, v), j) in x.times().iter().zip(x.values()).zip(mask) {
        let mut row = vec![fmt(*t)];
        row.extend(v.iter().map(|a| fmt(*a)));
        row.push(u8::from(j).to_string());
        out.write_record(row)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes a rough path as its running signature.
pub fn write_rough_csv<W: Write>(w: W, x: &RoughPath2) -> Result<(), IoError> {
    let path = x.path().extended_to_horizon();
    let mask = path.jump_mask();
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header(x.dim(), true))?;
    for ((t, g), j) in path.times().iter().zip(path.values()).zip(mask) {
        let mut row = vec![fmt(*t)];
        row.extend(g.vec().iter().map(|a| fmt(*a)));
        row.extend(g.mat().iter().map(|a| fmt(*a)));
        row.push(u8::from(j).to_string());
        out.write_record(row)?;
    }
    out.flush()?;
    Ok(())
}

struct Table {
    d: usize,
    level2: bool,
    times: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

fn read_table<R: Read>(r: R) -> Result<Table, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let head: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if head.first().map(String::as_str) != Some("t") {
        return Err(IoError::Header("first column must be t".into()));
    }
    let d = head.iter().filter(|h| h.starts_with('v')).count();
    let m = head.iter().filter(|h| h.starts_with('m')).count();
    if d == 0 || (m != 0 && m != d * d) {
        return Err(IoError::Header(format!("{d} value columns and {m} level-2 columns")));
    }
    let width = 1 + d + m;
    let mut times = Vec::new();
    let mut rows = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let nums = rec
            .iter()
            .take(width)
            .map(|s| s.parse::<f64>().map_err(|e| IoError::Row { row, msg: format!("{s:?}: {e}") }))
            .collect::<Result<Vec<_>, _>>()?;
        if nums.len() != width {
            return Err(IoError::Row { row, msg: format!("expected {width} numeric columns") });
        }
        times.push(nums[0]);
        rows.push(nums[1..].to_vec());
    }
    Ok(Table { d, level2: m > 0, times, rows })
}

/// Reads a level-1 path; level-2 columns, if present, are ignored. The
/// horizon is the last time.
pub fn read_path_csv<R: Read>(r: R) -> Result<CadlagPath<Vec<f64>>, IoError> {
    let t = read_table(r)?;
    let horizon = *t.times.last().ok_or(PathError::Empty)?;
    let values = t.rows.into_iter().map(|mut v| {
        v.truncate(t.d);
        v
    });
    Ok(CadlagPath::new(t.times, values.collect(), horizon)?)
}

/// Reads a rough path written by [`write_rough_csv`].
pub fn read_rough_csv<R: Read>(r: R) -> Result<RoughPath2, IoError> {
    let t = read_table(r)?;
    if !t.level2 {
        return Err(IoError::Header("no level-2 columns".into()));
    }
    let horizon = *t.times.last().ok_or(PathError::Empty)?;
    let points = t
        .rows
        .into_iter()
        .map(|v| G2Element::new(v[..t.d].to_vec(), v[t.d..].to_vec()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RoughPath2::new(CadlagPath::new(t.times, points, horizon)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lift::marcus_lift;

    fn sample() -> CadlagPath<Vec<f64>> {
        CadlagPath::new(
            vec![0.0, 0.25, 0.25, 0.5],
            vec![vec![0.0, 0.0], vec![0.1, 1.0 / 3.0], vec![-0.7, 0.2], vec![0.3, 0.3]],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn level1_round_trip() {
        let x = sample();
        let mut buf = Vec::new();
        write_path_csv(&mut buf, &x).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,v1,v2,jump\n"));
        assert_eq!(text.lines().nth(3).unwrap().rsplit(',').next(), Some("1"));
        let y = read_path_csv(buf.as_slice()).unwrap();
        assert_eq!(y, x.extended_to_horizon());
    }

    #[test]
    fn rough_round_trip() {
        let x = marcus_lift(&sample());
        let mut buf = Vec::new();
        write_rough_csv(&mut buf, &x).unwrap();
        let y = read_rough_csv(buf.as_slice()).unwrap();
        assert_eq!(y.horizon(), 1.0);
        assert!(y.marcus_like());
        for (a, b) in x.points().iter().zip(y.points()) {
            assert!(a.hom_dist(b) < 1e-14);
        }
        let meta = serde_json::to_string(&RoughPathMeta::of(&x)).unwrap();
        assert!(meta.contains("\"marcus_like\":true"));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(read_path_csv("x,v1\n0,0\n".as_bytes()).is_err());
        assert!(read_path_csv("t,v1\n0,zero\n".as_bytes()).is_err());
        assert!(read_path_csv("t,v1\n0.5,1\n0,1\n".as_bytes()).is_err());
        assert!(read_rough_csv("t,v1\n0,0\n".as_bytes()).is_err());
    }
}
