//! Persistence: curve JSON, trajectory JSON-Lines and numeric CSV tables.
//!
//! A trajectory file starts with one header record (format tag, controls,
//! step log, stop reason) followed by one `FlowState` per line. CSV floats
//! are written with 17 significant digits so that they round-trip.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::flow::{EvolveControls, FlowState, FlowTrajectory, StepLogEntry, StopReason};
use crate::geometry::DiscreteCurve;
use crate::{CsfError, Result};

pub const TRAJECTORY_FORMAT: &str = "csflab-trajectory/1";

pub fn load_curve(path: impl AsRef<Path>) -> Result<DiscreteCurve> {
    read_json(path)
}

pub fn save_curve(path: impl AsRef<Path>, curve: &DiscreteCurve) -> Result<()> {
    write_json(path, curve)
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let f = File::open(path.as_ref()).map_err(|e| io_err(path.as_ref(), e))?;
    Ok(serde_json::from_reader(BufReader::new(f))?)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let f = File::create(path.as_ref()).map_err(|e| io_err(path.as_ref(), e))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn io_err(path: &Path, e: std::io::Error) -> CsfError {
    CsfError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub format: String,
    pub controls: Option<EvolveControls>,
    pub frames: usize,
    pub step_log: Vec<StepLogEntry>,
    pub stop: StopReason,
}

pub fn write_trajectory(
    path: impl AsRef<Path>,
    traj: &FlowTrajectory,
    controls: Option<&EvolveControls>,
) -> Result<()> {
    let f = File::create(path.as_ref()).map_err(|e| io_err(path.as_ref(), e))?;
    let mut w = BufWriter::new(f);
    write_trajectory_to(&mut w, traj, controls)?;
    w.flush()?;
    Ok(())
}

pub fn write_trajectory_to<W: Write>(
    w: &mut W,
    traj: &FlowTrajectory,
    controls: Option<&EvolveControls>,
) -> Result<()> {
    let header = TrajectoryHeader {
        format: TRAJECTORY_FORMAT.into(),
        controls: controls.copied(),
        frames: traj.frames.len(),
        step_log: traj.step_log.clone(),
        stop: traj.stop,
    };
    serde_json::to_writer(&mut *w, &header)?;
    w.write_all(b"\n")?;
    for f in &traj.frames {
        serde_json::to_writer(&mut *w, f)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trajectory(path: impl AsRef<Path>) -> Result<(TrajectoryHeader, FlowTrajectory)> {
    let f = File::open(path.as_ref()).map_err(|e| io_err(path.as_ref(), e))?;
    read_trajectory_from(BufReader::new(f))
}

pub fn read_trajectory_from<R: BufRead>(r: R) -> Result<(TrajectoryHeader, FlowTrajectory)> {
    let mut lines = r
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
    let (_, first) = lines
        .next()
        .ok_or_else(|| CsfError::Parse("empty trajectory file".into()))?;
    let header: TrajectoryHeader = serde_json::from_str(&first?)?;
    if header.format != TRAJECTORY_FORMAT {
        return Err(CsfError::Parse(format!(
            "unknown trajectory format {:?}",
            header.format
        )));
    }
    let mut frames = Vec::with_capacity(header.frames);
    for (i, line) in lines {
        let state: FlowState = serde_json::from_str(&line?)
            .map_err(|e| CsfError::Parse(format!("line {}: {e}", i + 1)))?;
        frames.push(state);
    }
    if frames.len() != header.frames {
        return Err(CsfError::Parse(format!(
            "header announces {} frames, file has {}",
            header.frames,
            frames.len()
        )));
    }
    if frames.windows(2).any(|w| w[0].mode != w[1].mode) {
        return Err(CsfError::Parse(
            "frames mix physical and rescaled time".into(),
        ));
    }
    let mut traj = FlowTrajectory::from_frames(frames)?;
    traj.step_log = header.step_log.clone();
    traj.stop = header.stop;
    Ok((header, traj))
}

/// `x` with 17 significant digits; non-finite values become `nan`, `inf`
/// or `-inf`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// A table cell: numbers are formatted with [`fmt_f64`].
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_f64(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Cell::Int(x.into())
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.into())
    }
}

pub fn write_csv_to<W: Write>(w: W, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
    let mut cw = csv::Writer::from_writer(w);
    let csv_err = |e: csv::Error| CsfError::Io(e.to_string());
    cw.write_record(header).map_err(csv_err)?;
    for (i, row) in rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(CsfError::InvalidInput(format!(
                "row {i} has {} cells, header has {}",
                row.len(),
                header.len()
            )));
        }
        cw.write_record(row.iter().map(Cell::render))
            .map_err(csv_err)?;
    }
    cw.flush()?;
    Ok(())
}

pub fn write_csv(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
    let f = File::create(path.as_ref()).map_err(|e| io_err(path.as_ref(), e))?;
    write_csv_to(BufWriter::new(f), header, rows)
}

/// Header and rows of a CSV file whose cells are all numeric or boolean
/// (`true`/`false` read as 1/0).
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl NumericTable {
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CsfError::Parse(format!("no column {name:?}")))?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<NumericTable> {
    let f = File::open(path.as_ref()).map_err(|e| io_err(path.as_ref(), e))?;
    read_csv_from(f)
}

pub fn read_csv_from<R: std::io::Read>(r: R) -> Result<NumericTable> {
    let mut rd = csv::Reader::from_reader(r);
    let parse_err = |e: csv::Error| CsfError::Parse(e.to_string());
    let header = rd
        .headers()
        .map_err(parse_err)?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(parse_err)?;
        let row = rec
            .iter()
            .map(|c| match c {
                "true" => Ok(1.0),
                "false" => Ok(0.0),
                _ => c
                    .parse::<f64>()
                    .map_err(|e| CsfError::Parse(format!("row {}: {c:?}: {e}", i + 1))),
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(NumericTable { header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ExactFamily;
    use crate::flow::FlowMode;
    use crate::geometry::SpacingPolicy;

    #[test]
    fn trajectory_round_trip() {
        let traj = ExactFamily::circle()
            .trajectory(
                &[-1.0, -0.75, -0.5],
                FlowMode::Physical,
                &SpacingPolicy::Uniform { n: 32 },
            )
            .unwrap();
        let mut buf = Vec::new();
        write_trajectory_to(&mut buf, &traj, Some(&EvolveControls::default())).unwrap();
        let (h, back) = read_trajectory_from(&buf[..]).unwrap();
        assert_eq!(h.controls, Some(EvolveControls::default()));
        assert_eq!(back, traj);
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            vec![Cell::Num(0.1), Cell::Int(3)],
            vec![Cell::Num(-1.0 / 3.0), Cell::Int(0)],
        ];
        let mut buf = Vec::new();
        write_csv_to(&mut buf, &["tau", "n"], &rows).unwrap();
        let t = read_csv_from(&buf[..]).unwrap();
        assert_eq!(t.column("tau").unwrap(), vec![0.1, -1.0 / 3.0]);
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("tau,n\n1.0000000000000001e-1,3\n"));
    }

    #[test]
    fn empty_table_has_header() {
        let mut buf = Vec::new();
        write_csv_to(&mut buf, &["tau", "F"], &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "tau,F\n");
    }
}
