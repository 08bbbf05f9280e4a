//! Command implementations shared by the binary and the integration tests.

use crate::config::RunConfig;
use beamtrack::error::{Error, Result};
use beamtrack::eval::{pose_error_report, tracking_rmse, PoseErrorReport, TrackingErrorReport};
use beamtrack::geometry::Pose2;
use beamtrack::io::{read_trajectory, write_timeline, write_trajectory, TrajectoryRow};
use beamtrack::odometry::OdometrySolver;
use beamtrack::scan::{scan_sequence, RadarScan};
use beamtrack::seed::{derive_seed, stream_rng};
use beamtrack::synth::{generate_trajectory, generate_world, perturb_pose, render_scan};
use beamtrack::tracker::Tracker;
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

// seed stream ids; every consumer of randomness gets its own stream so the
// fan-out order never matters
const STREAM_WORLD: u64 = 1;
const STREAM_SCAN_BASE: u64 = 1 << 20;
const STREAM_TRACK_NOISE: u64 = 2;
const STREAM_TRACK_MEAS: u64 = 3;
const STREAM_MC_BASE: u64 = 1 << 40;

/// Where the tracker's pose estimates come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum, Default)]
#[serde(rename_all = "kebab-case")]
#[clap(rename_all = "kebab-case")]
pub enum PoseSource {
    /// Estimated trajectory produced by the odometry command.
    #[default]
    Odometry,
    /// Ground truth plus independent Gaussian noise per slot.
    GtNoise,
    /// Ground truth verbatim (noise-free estimates).
    Gt,
}

#[derive(Debug, Serialize)]
pub struct SimulateSummary {
    pub scan_dir: PathBuf,
    pub gt_csv: PathBuf,
    pub manifest: PathBuf,
    pub slot_count: usize,
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn slot_timestamp_ns(slot: usize, period_s: f64) -> u64 {
    (slot as f64 * period_s * 1e9).round() as u64
}

/// Renders the configured world and trajectory into scan files plus a
/// ground-truth CSV and a manifest.
pub fn cmd_simulate(cfg: &RunConfig, out_dir: &Path) -> Result<SimulateSummary> {
    let traj_spec = cfg.synth.trajectory.to_core()?;
    let world_spec = cfg.synth.world.to_core()?;
    let radar = cfg.synth.radar_sim(&cfg.odometry)?;
    let trajectory = generate_trajectory(&traj_spec)?;

    create_dir(out_dir)?;
    let scan_dir = out_dir.join("scans");
    create_dir(&scan_dir)?;

    let anchor: Vec<_> = trajectory
        .iter()
        .step_by(8.max(trajectory.len() / 2048))
        .map(|p| p.position())
        .collect();
    let mut world_rng = stream_rng(cfg.seed, STREAM_WORLD);
    let map = generate_world(&anchor, &world_spec, &mut world_rng)?;
    info!(
        "world: {} point reflectors, {} wall segments",
        map.points.len(),
        map.segments.len()
    );

    // render in parallel batches, write in slot order
    let period = cfg.synth.trajectory.slot_period_s;
    for (batch_index, batch) in trajectory.chunks(64).enumerate() {
        let base = batch_index * 64;
        let scans: Vec<RadarScan> = batch
            .par_iter()
            .enumerate()
            .map(|(i, pose)| {
                let slot = base + i;
                let mut rng = stream_rng(cfg.seed, STREAM_SCAN_BASE + slot as u64);
                render_scan(&map, pose, &radar, slot_timestamp_ns(slot, period), &mut rng)
            })
            .collect();
        for (i, scan) in scans.iter().enumerate() {
            let slot = base + i;
            scan.save(&scan_dir.join(format!("scan_{slot:06}.rscn")))?;
            if (slot + 1) % 100 == 0 {
                info!("rendered {} / {} scans", slot + 1, trajectory.len());
            }
        }
    }

    let gt_csv = out_dir.join("ground_truth.csv");
    let rows: Vec<TrajectoryRow> = trajectory
        .iter()
        .enumerate()
        .map(|(k, pose)| TrajectoryRow {
            slot: k as u64,
            t_ns: slot_timestamp_ns(k, period),
            pose: *pose,
        })
        .collect();
    write_trajectory(&gt_csv, &rows)?;

    let manifest = out_dir.join("manifest.json");
    let manifest_body = serde_json::json!({
        "seed": cfg.seed,
        "config_hash": format!("{:016x}", cfg.content_hash()),
        "slot_count": trajectory.len(),
        "scan_format": "RSCN v1",
    });
    write_file(&manifest, &format!("{:#}\n", manifest_body))?;

    Ok(SimulateSummary {
        scan_dir,
        gt_csv,
        manifest,
        slot_count: trajectory.len(),
    })
}

#[derive(Debug, Serialize)]
pub struct OdometrySummary {
    pub est_csv: PathBuf,
    pub scan_count: usize,
    pub fallback_count: usize,
    pub scans_per_second: f64,
}

/// Sequential scan-to-scan odometry over a directory of scan files.
pub fn cmd_odometry(scan_dir: &Path, cfg: &RunConfig, out_csv: &Path) -> Result<OdometrySummary> {
    let odo_cfg = cfg.odometry.to_core()?;
    let files = scan_sequence(scan_dir)?;
    if files.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "{}: need at least 2 scans, found {}",
            scan_dir.display(),
            files.len()
        )));
    }
    let mut solver = OdometrySolver::new(odo_cfg);
    let mut rows = Vec::with_capacity(files.len());
    let started = std::time::Instant::now();
    for (k, file) in files.iter().enumerate() {
        let scan = RadarScan::load(file)?;
        let step = solver.push_scan(&scan);
        if step.fell_back {
            warn!(
                "slot {k}: registration failed ({} correspondences), using constant-velocity prior",
                step.registration.map_or(0, |r| r.correspondences_used)
            );
        }
        rows.push(TrajectoryRow {
            slot: k as u64,
            t_ns: scan.timestamp_ns,
            pose: step.pose.to_pose(),
        });
        if (k + 1) % 100 == 0 {
            info!("registered {} / {} scans", k + 1, files.len());
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    write_trajectory(out_csv, &rows)?;
    Ok(OdometrySummary {
        est_csv: out_csv.into(),
        scan_count: files.len(),
        fallback_count: solver.fallback_count(),
        scans_per_second: files.len() as f64 / elapsed,
    })
}

#[derive(Debug, Serialize)]
pub struct TrackSummary {
    pub timeline_csv: PathBuf,
    pub report_json: PathBuf,
    pub report: TrackingErrorReport,
}

/// Estimated poses for the tracker, according to the pose source.
fn estimated_poses(
    gt: &[Pose2],
    source: PoseSource,
    est_csv: Option<&Path>,
    cfg: &RunConfig,
    seed: u64,
) -> Result<Vec<Pose2>> {
    match source {
        PoseSource::Gt => Ok(gt.to_vec()),
        PoseSource::GtNoise => {
            let noise = cfg.tracker.noise_spec();
            let mut rng = stream_rng(seed, STREAM_TRACK_NOISE);
            Ok(gt.iter().map(|p| perturb_pose(p, &noise, &mut rng)).collect())
        }
        PoseSource::Odometry => {
            let path = est_csv.ok_or_else(|| {
                Error::Config("pose source `odometry` needs --est <trajectory.csv>".into())
            })?;
            let rows = read_trajectory(path)?;
            if rows.len() != gt.len() {
                return Err(Error::InvalidInput(format!(
                    "slot count mismatch: estimate has {}, ground truth has {}",
                    rows.len(),
                    gt.len()
                )));
            }
            Ok(rows.into_iter().map(|r| r.pose).collect())
        }
    }
}

/// Runs the beam tracker over a ground-truth trajectory with pose estimates
/// from the configured source; writes the per-slot timeline and the report.
pub fn cmd_track(
    gt_csv: &Path,
    source: PoseSource,
    est_csv: Option<&Path>,
    cfg: &RunConfig,
    out_dir: &Path,
) -> Result<TrackSummary> {
    let chan = cfg.channel.to_core()?;
    let trk = cfg.tracker.to_core()?;
    let gt: Vec<Pose2> = read_trajectory(gt_csv)?.into_iter().map(|r| r.pose).collect();
    let est = estimated_poses(&gt, source, est_csv, cfg, cfg.seed)?;

    let mut rng = stream_rng(cfg.seed, STREAM_TRACK_MEAS);
    let mut tracker = Tracker::init(&gt[0], &est[0], &chan, &trk)?;
    let mut timeline = Vec::with_capacity(gt.len());
    timeline.push(tracker.initial_record(&gt[0], &est[0], &mut rng)?);
    for k in 1..gt.len() {
        timeline.push(tracker.step(k, &est[k - 1], &est[k], &gt[k], &mut rng)?);
        if (k + 1) % 100 == 0 {
            info!("tracked {} / {} slots", k + 1, gt.len());
        }
    }

    create_dir(out_dir)?;
    let timeline_csv = out_dir.join("timeline.csv");
    write_timeline(&timeline_csv, &timeline)?;
    let report = tracking_rmse(&timeline)?;
    let report_json = out_dir.join("tracking_report.json");
    write_file(
        &report_json,
        &format!("{}\n", serde_json::to_string_pretty(&report).expect("report serializes")),
    )?;
    info!(
        "tracking: gain rmse {:.3}%, aod rmse {:.3} deg, aoa rmse {:.3} deg, reinit {:.2}%",
        report.gain_mag_rmse_pct,
        report.aod_rmse_deg,
        report.aoa_rmse_deg,
        report.reinit_fraction_pct
    );
    Ok(TrackSummary {
        timeline_csv,
        report_json,
        report,
    })
}

/// Pose-error report between an estimated and a ground-truth trajectory.
pub fn cmd_eval(est_csv: &Path, gt_csv: &Path, cfg: &RunConfig, out_json: &Path) -> Result<PoseErrorReport> {
    let proto = cfg.eval.to_core()?;
    let est: Vec<Pose2> = read_trajectory(est_csv)?.into_iter().map(|r| r.pose).collect();
    let gt: Vec<Pose2> = read_trajectory(gt_csv)?.into_iter().map(|r| r.pose).collect();
    if est.len() != gt.len() {
        return Err(Error::InvalidInput(format!(
            "slot count mismatch: estimate has {}, ground truth has {}",
            est.len(),
            gt.len()
        )));
    }
    let report = pose_error_report(&est, &gt, &proto)?;
    write_file(
        out_json,
        &format!("{}\n", serde_json::to_string_pretty(&report).expect("report serializes")),
    )?;
    info!(
        "pose error: rmse ({:.3}, {:.3}) m / {:.3} deg, kitti {:.3}% / {:.5} deg/m",
        report.rmse_xy[0],
        report.rmse_xy[1],
        report.rmse_yaw_deg,
        report.kitti_trans_pct,
        report.kitti_rot_deg_per_m
    );
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McReport {
    pub replicates: usize,
    pub mean: TrackingErrorReport,
    pub std: TrackingErrorReport,
}

/// One gt-noise tracking replicate with seeds derived from the replicate
/// index; the ground-truth trajectory is shared.
fn track_replicate(
    gt: &[Pose2],
    cfg: &RunConfig,
    replicate: u64,
) -> Result<TrackingErrorReport> {
    let chan = cfg.channel.to_core()?;
    let trk = cfg.tracker.to_core()?;
    let seed = derive_seed(cfg.seed, STREAM_MC_BASE + replicate);
    let noise = cfg.tracker.noise_spec();
    let mut noise_rng = stream_rng(seed, STREAM_TRACK_NOISE);
    let est: Vec<Pose2> = gt
        .iter()
        .map(|p| perturb_pose(p, &noise, &mut noise_rng))
        .collect();
    let mut rng = stream_rng(seed, STREAM_TRACK_MEAS);
    let (timeline, _) = beamtrack::tracker::run_tracking(gt, &est, &chan, &trk, &mut rng)?;
    tracking_rmse(&timeline)
}

/// Runs `replicates` independent gt-noise tracking runs on the configured
/// trajectory and returns each replicate's report (deterministic order).
pub fn run_mc_replicates(cfg: &RunConfig, replicates: usize) -> Result<Vec<TrackingErrorReport>> {
    if replicates == 0 {
        return Err(Error::Config("replicates must be >= 1".into()));
    }
    let traj_spec = cfg.synth.trajectory.to_core()?;
    let gt = generate_trajectory(&traj_spec)?;
    (0..replicates as u64)
        .into_par_iter()
        .map(|r| track_replicate(&gt, cfg, r))
        .collect()
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Aggregates replicate reports into a mean/std summary.
pub fn aggregate_reports(reports: &[TrackingErrorReport]) -> McReport {
    let collect = |f: fn(&TrackingErrorReport) -> f64| -> Vec<f64> {
        reports.iter().map(f).collect()
    };
    let (gain_mean, gain_std) = mean_std(&collect(|r| r.gain_mag_rmse_pct));
    let (aod_mean, aod_std) = mean_std(&collect(|r| r.aod_rmse_deg));
    let (aoa_mean, aoa_std) = mean_std(&collect(|r| r.aoa_rmse_deg));
    let (re_mean, re_std) = mean_std(&collect(|r| r.reinit_fraction_pct));
    McReport {
        replicates: reports.len(),
        mean: TrackingErrorReport {
            gain_mag_rmse_pct: gain_mean,
            aod_rmse_deg: aod_mean,
            aoa_rmse_deg: aoa_mean,
            reinit_fraction_pct: re_mean,
        },
        std: TrackingErrorReport {
            gain_mag_rmse_pct: gain_std,
            aod_rmse_deg: aod_std,
            aoa_rmse_deg: aoa_std,
            reinit_fraction_pct: re_std,
        },
    }
}

/// Monte Carlo aggregation over independent tracking replicates.
pub fn cmd_mc(cfg: &RunConfig, replicates: usize, out_json: &Path) -> Result<McReport> {
    let reports = run_mc_replicates(cfg, replicates)?;
    let summary = aggregate_reports(&reports);
    write_file(
        out_json,
        &format!("{}\n", serde_json::to_string_pretty(&summary).expect("report serializes")),
    )?;
    info!(
        "mc over {} replicates: aod rmse {:.3} deg (std {:.3}), aoa rmse {:.3} deg (std {:.3}), reinit {:.2}% (std {:.2})",
        summary.replicates,
        summary.mean.aod_rmse_deg,
        summary.std.aod_rmse_deg,
        summary.mean.aoa_rmse_deg,
        summary.std.aoa_rmse_deg,
        summary.mean.reinit_fraction_pct,
        summary.std.reinit_fraction_pct
    );
    Ok(summary)
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub simulate: SimulateSummary,
    pub odometry: OdometrySummary,
    pub track: TrackSummary,
    pub pose_report: PoseErrorReport,
}

/// Full chain: simulate, odometry, track, eval; everything lands in `out`.
pub fn cmd_run(cfg: &RunConfig, out_dir: &Path, source: PoseSource) -> Result<RunSummary> {
    let simulate = cmd_simulate(cfg, out_dir)?;
    let est_csv = out_dir.join("odometry.csv");
    let odometry = cmd_odometry(&simulate.scan_dir, cfg, &est_csv)?;
    info!(
        "odometry: {} scans at {:.1} scans/s, {} fallbacks",
        odometry.scan_count, odometry.scans_per_second, odometry.fallback_count
    );
    let track = cmd_track(
        &simulate.gt_csv,
        source,
        Some(est_csv.as_path()),
        cfg,
        out_dir,
    )?;
    let pose_report = cmd_eval(
        &est_csv,
        &simulate.gt_csv,
        cfg,
        &out_dir.join("pose_report.json"),
    )?;
    Ok(RunSummary {
        simulate,
        odometry,
        track,
        pose_report,
    })
}
