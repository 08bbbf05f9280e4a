//! Synthetic scenes: landmark maps, vehicle trajectories, rendered polar
//! scans and pose-noise injection. Stands in for recorded sensor sequences
//! at desk scale; everything is a deterministic function of (spec, seed).

use crate::error::{Error, Result};
use crate::geometry::{inverse, wrap_angle, Pose2};
use crate::scan::RadarScan;
use nalgebra::Vector2;
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Reflective scene content: point reflectors plus wall segments.
#[derive(Debug, Clone, Default)]
pub struct LandmarkMap {
    /// (world position, reflectivity 1..=255)
    pub points: Vec<(Vector2<f64>, u8)>,
    /// (endpoint a, endpoint b, reflectivity 1..=255)
    pub segments: Vec<(Vector2<f64>, Vector2<f64>, u8)>,
}

impl LandmarkMap {
    pub fn landmark_count(&self) -> usize {
        self.points.len() + self.segments.len()
    }

    /// Flattens the map into sample points for rendering: every point
    /// reflector plus segment samples every `spacing` metres.
    pub fn sample_points(&self, spacing: f64) -> Vec<(Vector2<f64>, u8)> {
        let mut out = self.points.clone();
        for (a, b, refl) in &self.segments {
            let len = (b - a).norm();
            let steps = (len / spacing).ceil().max(1.0) as usize;
            for i in 0..=steps {
                let t = i as f64 / steps as f64;
                out.push((a + (b - a) * t, *refl));
            }
        }
        out
    }
}

/// Scene-generation parameters. Landmarks are laid out along an anchor
/// polyline (normally the planned trajectory) so the radar always has
/// targets in range.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldSpec {
    /// Scales landmark counts; 0 yields an empty map.
    pub density: f64,
    /// Station spacing along the anchor polyline, metres.
    pub cluster_spacing: f64,
    /// Lateral offset band for clusters, metres.
    pub offset_min: f64,
    pub offset_max: f64,
    /// Wall length band, metres.
    pub wall_min: f64,
    pub wall_max: f64,
    /// Reflectivity band.
    pub reflectivity_min: u8,
    pub reflectivity_max: u8,
    /// Point reflectors scattered per station (expected count).
    pub scatter_per_station: f64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            density: 1.0,
            cluster_spacing: 18.0,
            offset_min: 12.0,
            offset_max: 60.0,
            wall_min: 6.0,
            wall_max: 22.0,
            reflectivity_min: 120,
            reflectivity_max: 255,
            scatter_per_station: 1.5,
        }
    }
}

impl WorldSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.density.is_finite() || self.density < 0.0 {
            return Err(Error::Config("world density must be nonnegative".into()));
        }
        if !self.cluster_spacing.is_finite() || self.cluster_spacing <= 0.0 {
            return Err(Error::Config("cluster_spacing must be positive".into()));
        }
        if self.reflectivity_min < 1 || self.reflectivity_min > self.reflectivity_max {
            return Err(Error::Config(
                "require 1 <= reflectivity_min <= reflectivity_max".into(),
            ));
        }
        if !(self.offset_min > 0.0 && self.offset_min < self.offset_max) {
            return Err(Error::Config("require 0 < offset_min < offset_max".into()));
        }
        Ok(())
    }
}

/// Generates building-like wall clusters and scattered point reflectors
/// along the anchor polyline. Deterministic for a fixed RNG stream.
pub fn generate_world(
    anchor: &[Vector2<f64>],
    spec: &WorldSpec,
    rng: &mut impl Rng,
) -> Result<LandmarkMap> {
    spec.validate()?;
    let mut map = LandmarkMap::default();
    if spec.density == 0.0 || anchor.len() < 2 {
        return Ok(map);
    }
    // walk the polyline placing a station every cluster_spacing metres
    let mut carried = 0.0;
    for w in anchor.windows(2) {
        let (a, b) = (w[0], w[1]);
        let seg = b - a;
        let len = seg.norm();
        if len == 0.0 {
            continue;
        }
        let dir = seg / len;
        let lateral = Vector2::new(-dir.y, dir.x);
        let wall_prob = (0.8 * spec.density).min(1.0);
        let mut s = spec.cluster_spacing - carried;
        while s <= len {
            let station = a + dir * s;
            for side in [-1.0, 1.0] {
                if rng.gen_range(0.0..1.0) < wall_prob {
                    // facades roughly parallel to the path, building sides
                    // roughly perpendicular; both orientations are needed to
                    // constrain motion in every direction
                    let offset = rng.gen_range(spec.offset_min..spec.offset_max);
                    let wall_len = rng.gen_range(spec.wall_min..spec.wall_max);
                    let mut skew: f64 = rng.gen_range(-0.3..0.3);
                    if rng.gen_range(0.0..1.0) < 0.4 {
                        skew += PI / 2.0;
                    }
                    let wall_dir = Vector2::new(
                        dir.x * skew.cos() - dir.y * skew.sin(),
                        dir.x * skew.sin() + dir.y * skew.cos(),
                    );
                    let refl = rng.gen_range(spec.reflectivity_min..=spec.reflectivity_max);
                    let center = station + lateral * (side * offset);
                    let half = wall_dir * (wall_len / 2.0);
                    map.segments.push((center - half, center + half, refl));
                }
            }
            let expected = spec.scatter_per_station * spec.density;
            let scatter =
                expected.floor() as usize + usize::from(rng.gen_range(0.0..1.0) < expected.fract());
            for _ in 0..scatter {
                let offset = rng.gen_range(spec.offset_min..spec.offset_max);
                let side = if rng.gen_range(0.0..1.0) < 0.5 { -1.0 } else { 1.0 };
                let along = rng.gen_range(-spec.cluster_spacing..spec.cluster_spacing) / 2.0;
                let p = station + lateral * (side * offset) + dir * along;
                let refl = rng.gen_range(spec.reflectivity_min..=spec.reflectivity_max);
                map.points.push((p, refl));
            }
            s += spec.cluster_spacing;
        }
        carried = (len - (s - spec.cluster_spacing)).max(0.0);
    }
    Ok(map)
}

/// Piecewise path element.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PathSegment {
    Straight { length: f64 },
    /// Circular arc: positive angle turns left.
    Arc { radius: f64, angle: f64 },
}

/// Trajectory description: a path traced at constant speed and sampled once
/// per timeslot. Yaw equals the heading of motion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub start: [f64; 3],
    pub segments: Vec<PathSegment>,
    pub slot_count: usize,
    /// Slot period in seconds.
    pub slot_period: f64,
    /// Constant speed; `None` paces the whole path over the slots.
    pub speed: Option<f64>,
}

impl TrajectorySpec {
    /// Straight line preset.
    pub fn straight(length: f64, speed: f64, slot_count: usize, slot_period: f64) -> Self {
        TrajectorySpec {
            start: [0.0, 0.0, 0.0],
            segments: vec![PathSegment::Straight { length }],
            slot_count,
            slot_period,
            speed: Some(speed),
        }
    }

    /// Closed rounded-rectangle loop of roughly 9 km, paced over the slots.
    /// Shaped to keep the default base station outside the loop.
    pub fn urban_loop(slot_count: usize, slot_period: f64) -> Self {
        let r = 80.0;
        let w = 3000.0;
        let h = 1600.0;
        let quarter = PathSegment::Arc {
            radius: r,
            angle: PI / 2.0,
        };
        TrajectorySpec {
            start: [0.0, 0.0, 0.0],
            segments: vec![
                PathSegment::Straight { length: w - 2.0 * r },
                quarter,
                PathSegment::Straight { length: h - 2.0 * r },
                quarter,
                PathSegment::Straight { length: w - 2.0 * r },
                quarter,
                PathSegment::Straight { length: h - 2.0 * r },
                quarter,
            ],
            slot_count,
            slot_period,
            speed: None,
        }
    }

    pub fn total_length(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| match s {
                PathSegment::Straight { length } => *length,
                PathSegment::Arc { radius, angle } => radius * angle.abs(),
            })
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.slot_count == 0 {
            return Err(Error::Config("slot_count must be positive".into()));
        }
        if !self.slot_period.is_finite() || self.slot_period <= 0.0 {
            return Err(Error::Config("slot_period must be positive".into()));
        }
        if self.total_length() <= 0.0 {
            return Err(Error::Config("trajectory has zero length".into()));
        }
        let speed = self.effective_speed();
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(Error::Config("trajectory speed must be positive".into()));
        }
        if speed * self.slot_period >= 5.0 {
            return Err(Error::Config(format!(
                "step of {:.2} m/slot exceeds the 5 m plausibility bound",
                speed * self.slot_period
            )));
        }
        Ok(())
    }

    pub fn effective_speed(&self) -> f64 {
        self.speed
            .unwrap_or_else(|| self.total_length() / (self.slot_count as f64 * self.slot_period))
    }
}

/// Pose at arc length `s` along the path.
fn pose_at(spec: &TrajectorySpec, s: f64) -> Pose2 {
    let mut x = spec.start[0];
    let mut y = spec.start[1];
    let mut heading = spec.start[2];
    let mut remaining = s;
    for seg in &spec.segments {
        match *seg {
            PathSegment::Straight { length } => {
                let step = remaining.min(length);
                x += step * heading.cos();
                y += step * heading.sin();
                remaining -= step;
                if remaining <= 0.0 {
                    break;
                }
            }
            PathSegment::Arc { radius, angle } => {
                let arc_len = radius * angle.abs();
                let step = remaining.min(arc_len);
                let sign = angle.signum();
                let dpsi = sign * step / radius;
                // rotate about the arc centre
                let cx = x - sign * radius * heading.sin();
                let cy = y + sign * radius * heading.cos();
                let a0 = heading - sign * PI / 2.0;
                let a1 = a0 + dpsi;
                x = cx + radius * a1.cos();
                y = cy + radius * a1.sin();
                heading += dpsi;
                remaining -= step;
                if remaining <= 0.0 {
                    break;
                }
            }
        }
    }
    Pose2::new(x, y, wrap_angle(heading))
}

/// Samples the trajectory at every slot.
pub fn generate_trajectory(spec: &TrajectorySpec) -> Result<Vec<Pose2>> {
    spec.validate()?;
    let speed = spec.effective_speed();
    Ok((0..spec.slot_count)
        .map(|k| pose_at(spec, speed * spec.slot_period * k as f64))
        .collect())
}

/// Radar sensor model for rendering.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadarSimConfig {
    pub azimuth_count: u32,
    pub range_bin_count: u32,
    /// Metres per range bin.
    pub range_resolution: f64,
    /// Landmarks outside this annulus are not rendered.
    pub range_min: f64,
    pub range_max: f64,
    /// Mean of the exponential background noise (0 disables).
    pub noise_floor_mean: f64,
    /// Expected false-positive speckle count per azimuth row (0 disables).
    pub speckle_per_azimuth: f64,
    /// Segment sampling spacing for rendering, metres.
    pub segment_sample_spacing: f64,
}

impl Default for RadarSimConfig {
    fn default() -> Self {
        RadarSimConfig {
            azimuth_count: 400,
            range_bin_count: 1000,
            range_resolution: 0.1,
            range_min: 5.0,
            range_max: 100.0,
            noise_floor_mean: 5.0,
            speckle_per_azimuth: 0.02,
            segment_sample_spacing: 0.5,
        }
    }
}

impl RadarSimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.azimuth_count == 0 || self.range_bin_count == 0 {
            return Err(Error::Config("radar grid must be non-empty".into()));
        }
        if !self.range_resolution.is_finite() || self.range_resolution <= 0.0 {
            return Err(Error::Config("range_resolution must be positive".into()));
        }
        if !(self.range_min >= 0.0 && self.range_min < self.range_max) {
            return Err(Error::Config("require 0 <= range_min < range_max".into()));
        }
        if self.noise_floor_mean < 0.0 || self.speckle_per_azimuth < 0.0 {
            return Err(Error::Config("noise parameters must be nonnegative".into()));
        }
        if !self.segment_sample_spacing.is_finite() || self.segment_sample_spacing <= 0.0 {
            return Err(Error::Config(
                "segment_sample_spacing must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Renders the polar intensity grid seen from `sensor_pose`. Landmark pulses
/// are splatted as a three-bin Gaussian at the nearest azimuth row, then
/// exponential background noise and uniform speckle are added and the grid is
/// clamped to byte range.
pub fn render_scan(
    map: &LandmarkMap,
    sensor_pose: &Pose2,
    cfg: &RadarSimConfig,
    timestamp_ns: u64,
    rng: &mut impl Rng,
) -> RadarScan {
    let a = cfg.azimuth_count as usize;
    let r = cfg.range_bin_count as usize;
    let mut grid = vec![0.0f32; a * r];
    let world_to_sensor = inverse(&sensor_pose.to_transform());

    for (p_world, reflectivity) in map.sample_points(cfg.segment_sample_spacing) {
        let p = world_to_sensor.apply(&p_world);
        let range = p.norm();
        if range < cfg.range_min || range > cfg.range_max {
            continue;
        }
        let mut angle = p.y.atan2(p.x);
        if angle < 0.0 {
            angle += TAU;
        }
        let az = (angle / TAU * a as f64).round() as usize % a;
        // fractional bin centre: bin b covers range (b + 0.5) * res
        let c = range / cfg.range_resolution - 0.5;
        let b0 = c.round() as i64;
        for db in -1..=1i64 {
            let b = b0 + db;
            if b < 0 || b >= r as i64 {
                continue;
            }
            let d = b as f64 - c;
            let w = (-d * d / (2.0 * 0.5 * 0.5)).exp();
            let cell = &mut grid[az * r + b as usize];
            *cell = cell.max((reflectivity as f64 * w) as f32);
        }
    }

    if cfg.noise_floor_mean > 0.0 {
        let exp = Exp::new(1.0 / cfg.noise_floor_mean).expect("positive rate");
        for cell in grid.iter_mut() {
            *cell += exp.sample(rng) as f32;
        }
    }
    if cfg.speckle_per_azimuth > 0.0 {
        let expected = cfg.speckle_per_azimuth * a as f64;
        let count =
            expected.floor() as usize + usize::from(rng.gen_range(0.0..1.0) < expected.fract());
        let gate_lo = ((cfg.range_min / cfg.range_resolution) as usize).min(r - 1);
        let gate_hi = ((cfg.range_max / cfg.range_resolution) as usize).min(r - 1);
        for _ in 0..count {
            let az = rng.gen_range(0..a);
            let bin = rng.gen_range(gate_lo..=gate_hi);
            let intensity = rng.gen_range(60.0..200.0) as f32;
            let cell = &mut grid[az * r + bin];
            *cell = cell.max(intensity);
        }
    }

    let intensities: Vec<u8> = grid
        .iter()
        .map(|&v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    RadarScan {
        azimuth_count: cfg.azimuth_count,
        range_bin_count: cfg.range_bin_count,
        range_resolution: cfg.range_resolution,
        timestamp_ns,
        intensities,
    }
}

/// Gaussian pose-estimation error model.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Position error std per axis, metres.
    pub sigma_r: f64,
    /// Yaw error std, radians.
    pub sigma_theta: f64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sigma_r < 0.0 || self.sigma_theta < 0.0 {
            return Err(Error::Config("noise stds must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Adds independent Gaussian errors to position and yaw.
pub fn perturb_pose(pose: &Pose2, noise: &NoiseSpec, rng: &mut impl Rng) -> Pose2 {
    let mut x = pose.x;
    let mut y = pose.y;
    let mut theta = pose.theta;
    if noise.sigma_r > 0.0 {
        let pos = Normal::new(0.0, noise.sigma_r).expect("valid std");
        x += pos.sample(rng);
        y += pos.sample(rng);
    }
    if noise.sigma_theta > 0.0 {
        let yaw = Normal::new(0.0, noise.sigma_theta).expect("valid std");
        theta += yaw.sample(rng);
    }
    Pose2::new(x, y, theta)
}
