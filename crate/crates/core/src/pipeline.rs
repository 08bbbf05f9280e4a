//! Reduction of a raw polar scan to a sparse oriented-surface-point set.
//!
//! Three stages: per-azimuth k-strongest intensity filtering with range
//! gating, grid downsampling to cell centroids, and surface-point estimation
//! from neighbourhood sample covariances.

use crate::error::{Error, Result};
use crate::scan::RadarScan;
use crate::spatial::SpatialGrid;
use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

/// Odometry front-end parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OdometryConfig {
    /// Returns kept per azimuth (K).
    pub k_strongest: u32,
    /// Intensity floor; only strictly greater values pass.
    pub kappa_min: u8,
    /// Neighbourhood radius in metres; also the correspondence search radius.
    pub cell_side: f64,
    /// Resampling factor; downsampling cells have side `cell_side / resample_factor`.
    pub resample_factor: f64,
    /// Surface-normal angle tolerance for correspondences, radians.
    pub angle_tolerance: f64,
    /// Huber loss scale for the point-to-line objective.
    pub huber_delta: f64,
    /// Sensing range gate, metres.
    pub range_min: f64,
    pub range_max: f64,
    /// Minimum neighbourhood size for a surface point.
    pub min_neighbors: usize,
    /// Minimum correspondence count before registration is attempted.
    pub min_correspondences: usize,
}

impl Default for OdometryConfig {
    fn default() -> Self {
        OdometryConfig {
            k_strongest: 3,
            kappa_min: 55,
            cell_side: 3.5,
            resample_factor: 1.0,
            angle_tolerance: 30f64.to_radians(),
            huber_delta: 0.1,
            range_min: 5.0,
            range_max: 100.0,
            min_neighbors: 3,
            min_correspondences: 10,
        }
    }
}

impl OdometryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_strongest < 1 {
            return Err(Error::Config("k_strongest must be >= 1".into()));
        }
        if !self.cell_side.is_finite() || self.cell_side <= 0.0 {
            return Err(Error::Config("cell_side must be positive".into()));
        }
        if !self.resample_factor.is_finite() || self.resample_factor <= 0.0 {
            return Err(Error::Config("resample_factor must be positive".into()));
        }
        if !self.angle_tolerance.is_finite() || self.angle_tolerance <= 0.0 {
            return Err(Error::Config("angle_tolerance must be positive".into()));
        }
        if !self.huber_delta.is_finite() || self.huber_delta <= 0.0 {
            return Err(Error::Config("huber_delta must be positive".into()));
        }
        if !(self.range_min.is_finite() && self.range_max.is_finite())
            || self.range_min < 0.0
            || self.range_min >= self.range_max
        {
            return Err(Error::Config("require 0 <= range_min < range_max".into()));
        }
        if self.min_neighbors < 2 {
            return Err(Error::Config(
                "min_neighbors must be >= 2 (covariance divides by n-1)".into(),
            ));
        }
        Ok(())
    }

    /// Side length of a downsampling grid cell.
    pub fn downsample_cell(&self) -> f64 {
        self.cell_side / self.resample_factor
    }
}

/// Cartesian returns that survived conservative filtering, sensor frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilteredCloud {
    pub points: Vec<Vector2<f64>>,
    /// Generating intensity per point.
    pub intensities: Vec<u8>,
}

impl FilteredCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Cell centroids of the filtered cloud.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DownsampledCloud {
    pub points: Vec<Vector2<f64>>,
}

/// One oriented surface point: neighbourhood mean and unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub mu: Vector2<f64>,
    pub normal: Vector2<f64>,
}

/// Sparse oriented-surface-point set summarizing one scan.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SurfaceRepresentation {
    pub items: Vec<SurfacePoint>,
}

impl SurfaceRepresentation {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Keeps, per azimuth, at most K returns with intensity strictly above the
/// floor and range inside the gate. Equal intensities prefer the nearer bin.
pub fn k_strongest_filter(scan: &RadarScan, cfg: &OdometryConfig) -> FilteredCloud {
    let k = cfg.k_strongest as usize;
    let mut cloud = FilteredCloud::default();
    // (intensity desc, bin asc) selection buffer, reused across azimuths
    let mut kept: Vec<(u8, u32)> = Vec::with_capacity(k + 1);
    for az in 0..scan.azimuth_count {
        kept.clear();
        let row = scan.row(az);
        for (bin, &v) in row.iter().enumerate() {
            if v <= cfg.kappa_min {
                continue;
            }
            let range = scan.bin_range(bin as u32);
            if range < cfg.range_min || range > cfg.range_max {
                continue;
            }
            let candidate = (v, bin as u32);
            let pos = kept
                .iter()
                .position(|&(kv, kb)| (candidate.0 > kv) || (candidate.0 == kv && candidate.1 < kb))
                .unwrap_or(kept.len());
            if pos < k {
                kept.insert(pos, candidate);
                kept.truncate(k);
            }
        }
        // emit in ascending bin order for a stable layout
        kept.sort_unstable_by_key(|&(_, bin)| bin);
        for &(v, bin) in &kept {
            cloud.points.push(scan.polar_to_cartesian(az, bin));
            cloud.intensities.push(v);
        }
    }
    cloud
}

/// Grid cell key for a point, floor indexing anchored at the origin.
fn cell_key(p: &Vector2<f64>, side: f64) -> (i64, i64) {
    ((p.x / side).floor() as i64, (p.y / side).floor() as i64)
}

/// Replaces each occupied grid cell by the centroid of its members.
pub fn downsample(cloud: &FilteredCloud, cfg: &OdometryConfig) -> DownsampledCloud {
    let side = cfg.downsample_cell();
    let mut cells: std::collections::HashMap<(i64, i64), (Vector2<f64>, usize)> =
        std::collections::HashMap::new();
    for p in &cloud.points {
        let entry = cells
            .entry(cell_key(p, side))
            .or_insert((Vector2::zeros(), 0));
        entry.0 += p;
        entry.1 += 1;
    }
    let mut keys: Vec<(i64, i64)> = cells.keys().copied().collect();
    keys.sort_unstable();
    DownsampledCloud {
        points: keys
            .iter()
            .map(|k| {
                let (sum, n) = cells[k];
                sum / n as f64
            })
            .collect(),
    }
}

/// Smallest-eigenvalue unit eigenvector of a symmetric 2x2 matrix, or `None`
/// when the matrix is numerically zero (no orientation information).
pub fn smallest_eigenvector_2x2(m: &Matrix2<f64>) -> Option<Vector2<f64>> {
    let (a, b, c) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
    if a.abs().max(b.abs()).max(c.abs()) < 1e-18 {
        return None;
    }
    let half_trace = 0.5 * (a + c);
    let det = a * c - b * b;
    let disc = (half_trace * half_trace - det).max(0.0).sqrt();
    let lambda_min = half_trace - disc;
    // Eigenvector from the better-conditioned row of (M - lambda I).
    let r1 = Vector2::new(a - lambda_min, b);
    let r2 = Vector2::new(b, c - lambda_min);
    let row = if r1.norm_squared() >= r2.norm_squared() {
        r1
    } else {
        r2
    };
    if row.norm_squared() < 1e-30 {
        // isotropic: every direction is an eigenvector; pick the x axis
        return Some(Vector2::new(1.0, 0.0));
    }
    Some(Vector2::new(-row.y, row.x).normalize())
}

/// Sample covariance of a neighbourhood around its mean (divides by n-1).
fn sample_covariance(neighbors: &[Vector2<f64>], mu: &Vector2<f64>) -> Matrix2<f64> {
    let mut m = Matrix2::zeros();
    for p in neighbors {
        let d = p - mu;
        m[(0, 0)] += d.x * d.x;
        m[(0, 1)] += d.x * d.y;
        m[(1, 1)] += d.y * d.y;
    }
    m[(1, 0)] = m[(0, 1)];
    m / (neighbors.len() as f64 - 1.0)
}

/// Estimates oriented surface points: for each downsampled point, the mean
/// and smallest-variance direction of its filtered-cloud neighbourhood
/// within the configured radius. Normals are flipped to point toward the
/// sensor origin.
pub fn estimate_surface_points(
    down: &DownsampledCloud,
    filtered: &FilteredCloud,
    cfg: &OdometryConfig,
) -> SurfaceRepresentation {
    let grid = SpatialGrid::build(&filtered.points, cfg.cell_side);
    let mut items = Vec::new();
    for p in &down.points {
        let ids = grid.within(p, cfg.cell_side);
        if ids.len() < cfg.min_neighbors {
            continue;
        }
        let neighbors: Vec<Vector2<f64>> = ids
            .iter()
            .map(|&i| filtered.points[i as usize])
            .collect();
        let mu = neighbors.iter().sum::<Vector2<f64>>() / neighbors.len() as f64;
        let cov = sample_covariance(&neighbors, &mu);
        let Some(normal) = smallest_eigenvector_2x2(&cov) else {
            continue; // degenerate: all neighbours identical
        };
        items.push(SurfacePoint {
            mu,
            normal: canonicalize_normal(normal, &mu),
        });
    }
    SurfaceRepresentation { items }
}

/// Sign convention: normals point toward the sensor origin (n . mu < 0).
fn canonicalize_normal(n: Vector2<f64>, mu: &Vector2<f64>) -> Vector2<f64> {
    let d = n.dot(mu);
    let tangent_flip = d == 0.0 && (n.y < 0.0 || (n.y == 0.0 && n.x < 0.0));
    if d > 0.0 || tangent_flip {
        -n
    } else {
        n
    }
}

/// Full front end: filter, downsample, estimate surface points.
pub fn process_scan(scan: &RadarScan, cfg: &OdometryConfig) -> SurfaceRepresentation {
    let filtered = k_strongest_filter(scan, cfg);
    let down = downsample(&filtered, cfg);
    estimate_surface_points(&down, &filtered, cfg)
}
