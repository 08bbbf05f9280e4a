//! CSV formats: trajectory files (`k,t_ns,x_m,y_m,theta_rad`) and per-slot
//! tracking timelines. Floats are written in shortest round-trip form, so
//! rewriting a parsed file reproduces it byte for byte.

use crate::error::{Error, Result};
use crate::geometry::Pose2;
use crate::tracker::TrackTimeline;
use std::io::{BufRead, Write};
use std::path::Path;

pub const TRAJECTORY_HEADER: &str = "k,t_ns,x_m,y_m,theta_rad";
pub const TIMELINE_HEADER: &str = "k,x_gt,y_gt,theta_gt,x_est,y_est,theta_est,\
alpha_gt,alpha_trk,aod_gt,aod_trk,aoa_gt,aoa_trk,reinit";

/// One trajectory row: slot index, timestamp and pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub slot: u64,
    pub t_ns: u64,
    pub pose: Pose2,
}

pub fn write_trajectory(path: &Path, rows: &[TrajectoryRow]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let inner = |w: &mut dyn Write| -> std::io::Result<()> {
        writeln!(w, "{TRAJECTORY_HEADER}")?;
        for r in rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.slot, r.t_ns, r.pose.x, r.pose.y, r.pose.theta
            )?;
        }
        Ok(())
    };
    inner(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = idx + 1;
        if idx == 0 {
            if line.trim() != TRAJECTORY_HEADER {
                return Err(Error::Csv {
                    path: path.into(),
                    line: lineno,
                    reason: format!("expected header `{TRAJECTORY_HEADER}`"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Csv {
                path: path.into(),
                line: lineno,
                reason: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let parse_err = |what: &str| Error::Csv {
            path: path.into(),
            line: lineno,
            reason: format!("bad {what} value"),
        };
        let slot: u64 = fields[0].trim().parse().map_err(|_| parse_err("slot"))?;
        let t_ns: u64 = fields[1].trim().parse().map_err(|_| parse_err("t_ns"))?;
        let x: f64 = fields[2].trim().parse().map_err(|_| parse_err("x_m"))?;
        let y: f64 = fields[3].trim().parse().map_err(|_| parse_err("y_m"))?;
        let theta: f64 = fields[4]
            .trim()
            .parse()
            .map_err(|_| parse_err("theta_rad"))?;
        if !(x.is_finite() && y.is_finite() && theta.is_finite()) {
            return Err(Error::Csv {
                path: path.into(),
                line: lineno,
                reason: "non-finite pose".into(),
            });
        }
        rows.push(TrajectoryRow {
            slot,
            t_ns,
            pose: Pose2::new(x, y, theta),
        });
    }
    if rows.is_empty() {
        return Err(Error::format(path, "trajectory file has no rows"));
    }
    Ok(rows)
}

pub fn write_timeline(path: &Path, timeline: &TrackTimeline) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let inner = |w: &mut dyn Write| -> std::io::Result<()> {
        writeln!(w, "{TIMELINE_HEADER}")?;
        for r in timeline {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.slot,
                r.pose_gt.x,
                r.pose_gt.y,
                r.pose_gt.theta,
                r.pose_est.x,
                r.pose_est.y,
                r.pose_est.theta,
                r.chan_gt.alpha_mag,
                r.chan_trk.alpha_mag,
                r.chan_gt.aod,
                r.chan_trk.aod,
                r.chan_gt.aoa,
                r.chan_trk.aoa,
                u8::from(r.reinit),
            )?;
        }
        Ok(())
    };
    inner(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn trajectory_roundtrip_is_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        let rows: Vec<TrajectoryRow> = (0..50)
            .map(|k| TrajectoryRow {
                slot: k,
                t_ns: k * 250_000_000,
                pose: Pose2::new(
                    k as f64 * 1.37 + 0.123456789,
                    (k as f64).sin() * 7.0,
                    (k as f64 * 0.01) - 1.0,
                ),
            })
            .collect();
        write_trajectory(&path, &rows).unwrap();
        let back = read_trajectory(&path).unwrap();
        assert_eq!(rows, back);
        // byte-identical rewrite
        let first = std::fs::read(&path).unwrap();
        write_trajectory(&path, &back).unwrap();
        assert_eq!(first, std::fs::read(&path).unwrap());
    }

    #[test]
    fn malformed_rows_report_line_numbers() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, format!("{TRAJECTORY_HEADER}\n0,0,1.0,2.0,abc\n")).unwrap();
        let err = read_trajectory(&path).unwrap_err();
        match err {
            Error::Csv { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
        std::fs::write(&path, "wrong,header\n").unwrap();
        assert!(read_trajectory(&path).is_err());
    }
}
