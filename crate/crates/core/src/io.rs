//! CSV artifacts. Floats are written in their shortest round-trip form, so a
//! file read back yields bit-identical values.

use std::io::{Read, Write};

use crate::classify::{Cell, RegimeKind};
use crate::error::{DickeError, Result};
use crate::integrator::Trajectory;
use crate::lyapunov::PerturbationTrace;
use crate::model::State;
use crate::stability::{FixedPoint, FixedPointKind};

pub const TRAJECTORY_HEADER: [&str; 7] = ["t", "x", "y", "n", "sx", "sy", "sz"];
pub const FIXED_POINT_HEADER: [&str; 10] = ["kind", "x", "y", "n", "sx", "sy", "sz", "max_real_eig", "stable", "residual"];
pub const TRACE_HEADER: [&str; 3] = ["t", "log_eps", "finite_time_le"];
pub const SPECTRUM_HEADER: [&str; 2] = ["freq", "psd"];
pub const PEAKS_HEADER: [&str; 2] = ["freq", "power"];
pub const AMPLITUDE_HEADER: [&str; 2] = ["g", "amplitude"];
pub const PHASE_HEADER: [&str; 5] = ["omega_q", "g", "label", "le", "n_clusters"];

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| DickeError::Parse { line, msg: format!("bad number {s:?}: {e}") })
}

/// Row writer that flushes after every record.
pub struct CsvOut<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> CsvOut<W> {
    pub fn new(w: W, header: &[&str]) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        inner.write_record(header).map_err(csv_err)?;
        inner.flush()?;
        Ok(CsvOut { inner })
    }

    /// Continue an existing file without repeating the header.
    pub fn append(w: W) -> Self {
        CsvOut { inner: csv::WriterBuilder::new().has_headers(false).from_writer(w) }
    }

    pub fn row<S: AsRef<[u8]>>(&mut self, fields: &[S]) -> Result<()> {
        self.inner.write_record(fields).map_err(csv_err)?;
        self.inner.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W> {
        self.inner.into_inner().map_err(|e| DickeError::Io(e.into_error()))
    }
}

fn csv_err(e: csv::Error) -> DickeError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => DickeError::Io(io),
        other => DickeError::Parse { line, msg: format!("{other:?}") },
    }
}

/// Records of a CSV with exactly the `expected` header, with line numbers.
pub fn read_records(r: impl Read, expected: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(r);
    let mut out = Vec::new();
    let mut header_seen = false;
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if !header_seen {
            let got: Vec<&str> = rec.iter().collect();
            if got != expected {
                return Err(DickeError::Parse { line, msg: format!("expected header {expected:?}, got {got:?}") });
            }
            header_seen = true;
            continue;
        }
        if rec.len() != expected.len() {
            return Err(DickeError::Parse { line, msg: format!("expected {} fields, got {}", expected.len(), rec.len()) });
        }
        out.push((line, rec));
    }
    if !header_seen {
        return Err(DickeError::Parse { line: 1, msg: "empty file".into() });
    }
    Ok(out)
}

pub fn trajectory_row(t: f64, s: &State) -> [String; 7] {
    [t, s.x, s.y, s.n, s.sx, s.sy, s.sz].map(fmt_f64)
}

pub fn write_trajectory<W: Write>(w: W, tr: &Trajectory) -> Result<W> {
    let mut out = CsvOut::new(w, &TRAJECTORY_HEADER)?;
    for (t, s) in tr.times.iter().zip(&tr.states) {
        out.row(&trajectory_row(*t, s))?;
    }
    out.into_inner()
}

pub fn read_trajectory(r: impl Read) -> Result<Vec<(f64, State)>> {
    read_records(r, &TRAJECTORY_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            let v: Vec<f64> = rec.iter().map(|f| parse_f64(f, line)).collect::<Result<_>>()?;
            Ok((v[0], State::new(v[1], v[2], v[3], v[4], v[5], v[6])))
        })
        .collect()
}

pub fn fixed_point_row(fp: &FixedPoint) -> [String; 10] {
    let s = fp.state;
    [
        fp.kind.label().to_string(),
        fmt_f64(s.x),
        fmt_f64(s.y),
        fmt_f64(s.n),
        fmt_f64(s.sx),
        fmt_f64(s.sy),
        fmt_f64(s.sz),
        fmt_f64(fp.max_real_eig),
        fp.stable.to_string(),
        fmt_f64(fp.residual),
    ]
}

pub fn write_fixed_points<W: Write>(w: W, fps: &[FixedPoint]) -> Result<W> {
    let mut out = CsvOut::new(w, &FIXED_POINT_HEADER)?;
    for fp in fps {
        out.row(&fixed_point_row(fp))?;
    }
    out.into_inner()
}

/// Rows of a fixed-point file. `marginal` is recomputed from `max_real_eig`.
pub fn read_fixed_points(r: impl Read) -> Result<Vec<FixedPoint>> {
    read_records(r, &FIXED_POINT_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            let kind = FixedPointKind::parse(&rec[0]).ok_or_else(|| DickeError::Parse { line, msg: format!("unknown kind {:?}", &rec[0]) })?;
            let num = |i: usize| parse_f64(&rec[i], line);
            let stable = match &rec[8] {
                "true" => true,
                "false" => false,
                other => return Err(DickeError::Parse { line, msg: format!("bad boolean {other:?}") }),
            };
            let max_real_eig = num(7)?;
            Ok(FixedPoint {
                state: State::new(num(1)?, num(2)?, num(3)?, num(4)?, num(5)?, num(6)?),
                kind,
                residual: num(9)?,
                max_real_eig,
                stable,
                marginal: max_real_eig.abs() < crate::stability::MARGINAL_BAND,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub log_eps: f64,
    pub finite_time_le: Option<f64>,
}

/// Trace rows; each row carries the finite-time exponent of the window it
/// falls in, or nothing past the last complete window.
pub fn trace_rows(tr: &PerturbationTrace, window: Option<f64>) -> Vec<TraceRow> {
    let windows = tr.finite_time_les.clone();
    let half = window.map(|w| 0.5 * w);
    tr.times
        .iter()
        .zip(&tr.log_eps)
        .map(|(&t, &log_eps)| {
            let ftle = half.and_then(|h| {
                windows.iter().find(|(center, _)| t > center - h - 1e-9 && t <= center + h + 1e-9).map(|w| w.1)
            });
            TraceRow { t, log_eps, finite_time_le: ftle }
        })
        .collect()
}

pub fn trace_row(r: &TraceRow) -> [String; 3] {
    [fmt_f64(r.t), fmt_f64(r.log_eps), r.finite_time_le.map(fmt_f64).unwrap_or_default()]
}

pub fn write_trace<W: Write>(w: W, rows: &[TraceRow]) -> Result<W> {
    let mut out = CsvOut::new(w, &TRACE_HEADER)?;
    for r in rows {
        out.row(&trace_row(r))?;
    }
    out.into_inner()
}

pub fn read_trace(r: impl Read) -> Result<Vec<TraceRow>> {
    read_records(r, &TRACE_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            let ftle = if rec[2].trim().is_empty() { None } else { Some(parse_f64(&rec[2], line)?) };
            Ok(TraceRow { t: parse_f64(&rec[0], line)?, log_eps: parse_f64(&rec[1], line)?, finite_time_le: ftle })
        })
        .collect()
}

/// Two-column numeric table (spectrum, peaks, amplitudes, bifurcation).
pub fn write_pairs<W: Write>(w: W, header: [&str; 2], rows: &[(f64, f64)]) -> Result<W> {
    let mut out = CsvOut::new(w, &header)?;
    for &(a, b) in rows {
        out.row(&[fmt_f64(a), fmt_f64(b)])?;
    }
    out.into_inner()
}

pub fn read_pairs(r: impl Read, header: [&str; 2]) -> Result<Vec<(f64, f64)>> {
    read_records(r, &header)?
        .into_iter()
        .map(|(line, rec)| Ok((parse_f64(&rec[0], line)?, parse_f64(&rec[1], line)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRow {
    pub omega_q: f64,
    pub g: f64,
    pub label: RegimeKind,
    pub le: f64,
    pub n_clusters: usize,
}

impl From<&Cell> for PhaseRow {
    fn from(c: &Cell) -> Self {
        PhaseRow { omega_q: c.omega_q, g: c.g, label: c.label.kind, le: c.label.le, n_clusters: c.label.n_amp_clusters }
    }
}

pub fn phase_row(r: &PhaseRow) -> [String; 5] {
    [fmt_f64(r.omega_q), fmt_f64(r.g), r.label.label().to_string(), fmt_f64(r.le), r.n_clusters.to_string()]
}

pub fn write_phase<W: Write>(w: W, rows: &[PhaseRow]) -> Result<W> {
    let mut out = CsvOut::new(w, &PHASE_HEADER)?;
    for r in rows {
        out.row(&phase_row(r))?;
    }
    out.into_inner()
}

pub fn read_phase(r: impl Read) -> Result<Vec<PhaseRow>> {
    read_records(r, &PHASE_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            let label = RegimeKind::parse(&rec[2]).ok_or_else(|| DickeError::Parse { line, msg: format!("unknown label {:?}", &rec[2]) })?;
            let n_clusters = rec[4].trim().parse().map_err(|e| DickeError::Parse { line, msg: format!("bad count {:?}: {e}", &rec[4]) })?;
            Ok(PhaseRow { omega_q: parse_f64(&rec[0], line)?, g: parse_f64(&rec[1], line)?, label, le: parse_f64(&rec[3], line)?, n_clusters })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1e-300, -2.5e17, 5e-324, f64::MAX, 0.0, -0.0, 1.0 / 3.0] {
            let back: f64 = fmt_f64(v).parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v}");
        }
        assert!(parse_f64(&fmt_f64(f64::NAN), 1).unwrap().is_nan());
        assert_eq!(parse_f64(&fmt_f64(f64::INFINITY), 1).unwrap(), f64::INFINITY);
    }

    #[test]
    fn pairs_round_trip() {
        let rows = vec![(0.0, 1e-17), (0.1, 3.0), (1.0 / 3.0, -0.0)];
        let buf = write_pairs(Vec::new(), SPECTRUM_HEADER, &rows).unwrap();
        assert!(buf.starts_with(b"freq,psd\n"));
        let back = read_pairs(&buf[..], SPECTRUM_HEADER).unwrap();
        assert_eq!(back.len(), 3);
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.0.to_bits(), b.0.to_bits());
            assert_eq!(a.1.to_bits(), b.1.to_bits());
        }
    }

    #[test]
    fn wrong_header_rejected() {
        let e = read_pairs(&b"freq,power\n0.1,2\n"[..], SPECTRUM_HEADER).unwrap_err();
        assert!(matches!(e, DickeError::Parse { line: 1, .. }), "{e}");
        assert!(read_pairs(&b""[..], SPECTRUM_HEADER).is_err());
    }

    #[test]
    fn bad_rows_report_line() {
        let e = read_pairs(&b"freq,psd\n0.1,2\n0.2,x\n"[..], SPECTRUM_HEADER).unwrap_err();
        assert!(matches!(e, DickeError::Parse { line: 3, .. }), "{e}");
        let e = read_pairs(&b"freq,psd\n0.1,2,3\n"[..], SPECTRUM_HEADER).unwrap_err();
        assert!(matches!(e, DickeError::Parse { line: 2, .. }), "{e}");
    }

    #[test]
    fn trace_empty_field() {
        let rows = vec![
            TraceRow { t: 1.0, log_eps: -18.0, finite_time_le: Some(0.01) },
            TraceRow { t: 2.0, log_eps: -17.5, finite_time_le: None },
        ];
        let buf = write_trace(Vec::new(), &rows).unwrap();
        assert!(String::from_utf8_lossy(&buf).contains("2.0,-17.5,\n"));
        assert_eq!(read_trace(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn phase_round_trip() {
        let rows = vec![
            PhaseRow { omega_q: 0.1, g: 0.2, label: RegimeKind::Np, le: -0.02, n_clusters: 0 },
            PhaseRow { omega_q: 0.15, g: 0.3795, label: RegimeKind::IntermittentChaos, le: 5.8e-3, n_clusters: 85 },
        ];
        let buf = write_phase(Vec::new(), &rows).unwrap();
        assert_eq!(read_phase(&buf[..]).unwrap(), rows);
        assert!(read_phase(&b"omega_q,g,label,le,n_clusters\n0.1,0.2,Bogus,0,0\n"[..]).is_err());
    }

    #[test]
    fn fixed_points_round_trip() {
        let p = crate::model::ModelParams::defaults(0.1, 0.3);
        let (fps, _) = crate::stability::fixed_points(&p).unwrap();
        let buf = write_fixed_points(Vec::new(), &fps).unwrap();
        let back = read_fixed_points(&buf[..]).unwrap();
        assert_eq!(back, fps);
    }
}
