//! Trajectory and beam-tracking metrics: start-aligned RMSE, relative
//! odometry error over fixed subsequence lengths, and channel-tracking RMSE
//! with re-initialization overhead.

use crate::error::{Error, Result};
use crate::geometry::{compose, inverse, relative_pose, wrap_angle, Pose2, Transform2};
use crate::tracker::TrackTimeline;
use serde::{Deserialize, Serialize};

/// Pose estimation error summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoseErrorReport {
    /// Per-axis position RMSE after start alignment, metres.
    pub rmse_xy: [f64; 2],
    /// Yaw RMSE after start alignment, degrees.
    pub rmse_yaw_deg: f64,
    /// Relative translational error, percent.
    pub kitti_trans_pct: f64,
    /// Relative rotational error, degrees per metre.
    pub kitti_rot_deg_per_m: f64,
}

/// Beam tracking error summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackingErrorReport {
    /// RMSE of the relative gain-magnitude error, percent.
    pub gain_mag_rmse_pct: f64,
    /// Departure-angle RMSE, degrees (wrapped differences).
    pub aod_rmse_deg: f64,
    /// Arrival-angle RMSE, degrees (wrapped differences).
    pub aoa_rmse_deg: f64,
    /// Re-initializations per slot, percent.
    pub reinit_fraction_pct: f64,
}

/// Relative-error protocol parameters: subsequence lengths in metres and the
/// start-index stride in slots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelativeErrorProtocol {
    pub lengths: Vec<f64>,
    pub stride: usize,
}

impl Default for RelativeErrorProtocol {
    fn default() -> Self {
        RelativeErrorProtocol {
            lengths: vec![100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0],
            stride: 10,
        }
    }
}

impl RelativeErrorProtocol {
    pub fn validate(&self) -> Result<()> {
        if self.lengths.is_empty() || self.lengths.iter().any(|&l| !l.is_finite() || l <= 0.0) {
            return Err(Error::Config(
                "relative-error lengths must be positive and non-empty".into(),
            ));
        }
        if self.stride == 0 {
            return Err(Error::Config("relative-error stride must be positive".into()));
        }
        Ok(())
    }
}

fn check_lengths(est: &[Pose2], gt: &[Pose2]) -> Result<()> {
    if est.len() != gt.len() {
        return Err(Error::InvalidInput(format!(
            "trajectory lengths differ: {} vs {}",
            est.len(),
            gt.len()
        )));
    }
    if est.is_empty() {
        return Err(Error::InvalidInput("empty trajectory".into()));
    }
    Ok(())
}

/// Rigidly moves `est` so its first pose coincides with `gt`'s first pose.
/// No scale estimation, no global fit.
pub fn align_at_start(est: &[Pose2], gt: &[Pose2]) -> Result<Vec<Pose2>> {
    check_lengths(est, gt)?;
    let t_align = compose(&gt[0].to_transform(), &inverse(&est[0].to_transform()));
    Ok(est
        .iter()
        .map(|p| compose(&t_align, &p.to_transform()).to_pose())
        .collect())
}

/// Per-axis position RMSE and yaw RMSE (degrees) of aligned trajectories.
pub fn pose_rmse(est: &[Pose2], gt: &[Pose2]) -> Result<([f64; 2], f64)> {
    check_lengths(est, gt)?;
    let n = est.len() as f64;
    let (mut sx, mut sy, mut st) = (0.0, 0.0, 0.0);
    for (e, g) in est.iter().zip(gt) {
        sx += (e.x - g.x).powi(2);
        sy += (e.y - g.y).powi(2);
        st += wrap_angle(e.theta - g.theta).powi(2);
    }
    Ok((
        [(sx / n).sqrt(), (sy / n).sqrt()],
        (st / n).sqrt().to_degrees(),
    ))
}

fn cumulative_distances(gt: &[Pose2]) -> Vec<f64> {
    let mut cum = Vec::with_capacity(gt.len());
    let mut acc = 0.0;
    cum.push(0.0);
    for w in gt.windows(2) {
        acc += (w[1].position() - w[0].position()).norm();
        cum.push(acc);
    }
    cum
}

/// Relative odometry error: for every start index (fixed stride) and every
/// subsequence length, the pose error between the estimated and true relative
/// motion over the subsequence, normalized by the nominal length; averaged
/// over all windows. Returns (translation percent, rotation degrees/metre).
pub fn kitti_relative_error(est: &[Pose2], gt: &[Pose2]) -> Result<(f64, f64)> {
    kitti_relative_error_with(est, gt, &RelativeErrorProtocol::default())
}

/// Same as [`kitti_relative_error`] with explicit protocol parameters.
pub fn kitti_relative_error_with(
    est: &[Pose2],
    gt: &[Pose2],
    proto: &RelativeErrorProtocol,
) -> Result<(f64, f64)> {
    check_lengths(est, gt)?;
    proto.validate()?;
    let shortest = proto.lengths.iter().copied().fold(f64::INFINITY, f64::min);
    let cum = cumulative_distances(gt);
    let total = *cum.last().unwrap();
    if total < shortest {
        return Err(Error::InvalidInput(format!(
            "trajectory covers {total:.1} m, need at least {shortest} m"
        )));
    }
    let est_t: Vec<Transform2> = est.iter().map(|p| p.to_transform()).collect();
    let gt_t: Vec<Transform2> = gt.iter().map(|p| p.to_transform()).collect();
    let mut trans_sum = 0.0;
    let mut rot_sum = 0.0;
    let mut count = 0usize;
    for start in (0..est.len()).step_by(proto.stride) {
        for &len in &proto.lengths {
            let target = cum[start] + len;
            // first index reaching the target distance
            let end = match cum[start..].iter().position(|&d| d >= target) {
                Some(off) => start + off,
                None => continue,
            };
            let rel_gt = relative_pose(&gt_t[start], &gt_t[end]);
            let rel_est = relative_pose(&est_t[start], &est_t[end]);
            let err = relative_pose(&rel_est.to_transform(), &rel_gt.to_transform());
            trans_sum += err.translation().norm() / len * 100.0;
            rot_sum += err.dtheta.abs() / len;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::InvalidInput(
            "no complete subsequences for the relative-error protocol".into(),
        ));
    }
    Ok((
        trans_sum / count as f64,
        (rot_sum / count as f64).to_degrees(),
    ))
}

/// Full pose report: start alignment, per-axis RMSE, relative errors.
pub fn pose_error_report(
    est: &[Pose2],
    gt: &[Pose2],
    proto: &RelativeErrorProtocol,
) -> Result<PoseErrorReport> {
    let aligned = align_at_start(est, gt)?;
    let (rmse_xy, rmse_yaw_deg) = pose_rmse(&aligned, gt)?;
    let (kitti_trans_pct, kitti_rot_deg_per_m) = kitti_relative_error_with(&aligned, gt, proto)?;
    Ok(PoseErrorReport {
        rmse_xy,
        rmse_yaw_deg,
        kitti_trans_pct,
        kitti_rot_deg_per_m,
    })
}

/// Beam-tracking RMSE over a timeline. The gain error is relative to the true
/// magnitude per slot (reported in percent); angle errors use wrapped
/// differences; the overhead is the re-initialization fraction.
pub fn tracking_rmse(timeline: &TrackTimeline) -> Result<TrackingErrorReport> {
    if timeline.is_empty() {
        return Err(Error::InvalidInput("empty tracking timeline".into()));
    }
    let n = timeline.len() as f64;
    let mut gain_sq = 0.0;
    let mut aod_sq = 0.0;
    let mut aoa_sq = 0.0;
    let mut reinits = 0usize;
    for rec in timeline {
        let gain_rel = (rec.chan_trk.alpha_mag - rec.chan_gt.alpha_mag) / rec.chan_gt.alpha_mag;
        gain_sq += gain_rel * gain_rel;
        aod_sq += wrap_angle(rec.chan_trk.aod - rec.chan_gt.aod).powi(2);
        aoa_sq += wrap_angle(rec.chan_trk.aoa - rec.chan_gt.aoa).powi(2);
        reinits += usize::from(rec.reinit);
    }
    Ok(TrackingErrorReport {
        gain_mag_rmse_pct: (gain_sq / n).sqrt() * 100.0,
        aod_rmse_deg: (aod_sq / n).sqrt().to_degrees(),
        aoa_rmse_deg: (aoa_sq / n).sqrt().to_degrees(),
        reinit_fraction_pct: reinits as f64 / n * 100.0,
    })
}
