//! Sequential scan-to-scan odometry: each incoming scan is reduced to its
//! surface representation and registered against the previous one, with a
//! constant-velocity motion prior and prior fallback on failure.

use crate::geometry::{compose, relative_pose, RelativePose, Transform2};
use crate::pipeline::{process_scan, OdometryConfig, SurfaceRepresentation};
use crate::registration::{register, RegistrationResult};
use crate::scan::RadarScan;

/// Result of feeding one scan to the solver.
#[derive(Debug, Clone, Copy)]
pub struct OdometryStep {
    /// Accumulated world pose (first scan pins the identity).
    pub pose: Transform2,
    /// Registration outcome; `None` for the first scan.
    pub registration: Option<RegistrationResult>,
    /// True when the step fell back to the constant-velocity prior.
    pub fell_back: bool,
}

pub struct OdometrySolver {
    cfg: OdometryConfig,
    prev: Option<SurfaceRepresentation>,
    pose: Transform2,
    last_delta: RelativePose,
    fallback_count: usize,
}

impl OdometrySolver {
    pub fn new(cfg: OdometryConfig) -> Self {
        OdometrySolver {
            cfg,
            prev: None,
            pose: Transform2::identity(),
            last_delta: RelativePose::identity(),
            fallback_count: 0,
        }
    }

    pub fn fallback_count(&self) -> usize {
        self.fallback_count
    }

    /// Processes the next scan of the sequence and returns the updated pose.
    pub fn push_scan(&mut self, scan: &RadarScan) -> OdometryStep {
        let repr = process_scan(scan, &self.cfg);
        let Some(prev) = self.prev.replace(repr) else {
            return OdometryStep {
                pose: self.pose,
                registration: None,
                fell_back: false,
            };
        };
        let cur = self.prev.as_ref().expect("just replaced");
        let result = register(&prev, cur, &self.last_delta, &self.cfg);
        let fell_back = !result.final_cost.is_finite();
        if fell_back {
            self.fallback_count += 1;
        }
        // the estimate is never worse than the prior, use it either way
        let delta = result.estimated;
        self.pose = compose(&self.pose, &delta.to_transform());
        self.last_delta = delta;
        OdometryStep {
            pose: self.pose,
            registration: Some(result),
            fell_back,
        }
    }

    /// Relative pose between the last two accumulated poses.
    pub fn last_delta(&self) -> RelativePose {
        self.last_delta
    }
}

/// Runs the solver over a whole in-memory sequence.
pub fn run_odometry(scans: &[RadarScan], cfg: &OdometryConfig) -> Vec<OdometryStep> {
    let mut solver = OdometrySolver::new(cfg.clone());
    scans.iter().map(|s| solver.push_scan(s)).collect()
}

/// Relative pose actually accumulated between two steps, mostly for tests.
pub fn step_delta(prev: &OdometryStep, cur: &OdometryStep) -> RelativePose {
    relative_pose(&prev.pose, &cur.pose)
}
