//! Run configuration: JSON file with `odometry`, `channel`, `tracker`,
//! `synth` and `eval` sections plus the master seed. Angles are degrees and
//! noise power is dBm at this boundary; conversion to the library's radians
//! and watts happens in the section accessors. Unknown keys are rejected.

use beamtrack::channel::ChannelConfig;
use beamtrack::error::{Error, Result};
use beamtrack::eval::RelativeErrorProtocol;
use beamtrack::pipeline::OdometryConfig;
use beamtrack::synth::{NoiseSpec, PathSegment, RadarSimConfig, TrajectorySpec, WorldSpec};
use beamtrack::tracker::{InnovationMode, TrackerConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub odometry: OdometrySection,
    pub channel: ChannelSection,
    pub tracker: TrackerSection,
    pub synth: SynthSection,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 7,
            odometry: OdometrySection::default(),
            channel: ChannelSection::default(),
            tracker: TrackerSection::default(),
            synth: SynthSection::default(),
            eval: EvalSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OdometrySection {
    pub k_strongest: u32,
    pub kappa_min: u8,
    pub cell_side_m: f64,
    pub resample_factor: f64,
    pub angle_tolerance_deg: f64,
    pub huber_delta: f64,
    pub range_min_m: f64,
    pub range_max_m: f64,
    pub min_neighbors: usize,
    pub min_correspondences: usize,
}

impl Default for OdometrySection {
    fn default() -> Self {
        OdometrySection {
            k_strongest: 3,
            kappa_min: 55,
            cell_side_m: 3.5,
            resample_factor: 1.0,
            angle_tolerance_deg: 30.0,
            huber_delta: 0.1,
            range_min_m: 5.0,
            range_max_m: 100.0,
            min_neighbors: 3,
            min_correspondences: 10,
        }
    }
}

impl OdometrySection {
    pub fn to_core(&self) -> Result<OdometryConfig> {
        let cfg = OdometryConfig {
            k_strongest: self.k_strongest,
            kappa_min: self.kappa_min,
            cell_side: self.cell_side_m,
            resample_factor: self.resample_factor,
            angle_tolerance: self.angle_tolerance_deg.to_radians(),
            huber_delta: self.huber_delta,
            range_min: self.range_min_m,
            range_max: self.range_max_m,
            min_neighbors: self.min_neighbors,
            min_correspondences: self.min_correspondences,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    pub spacing_m: f64,
    pub wavelength_m: f64,
    pub carrier_hz: f64,
    pub path_loss_exponent: f64,
    pub ref_gain_mag: f64,
    pub ref_gain_arg_deg: f64,
    pub ref_distance_m: f64,
    pub noise_power_dbm: f64,
    pub bs_position_m: [f64; 2],
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection {
            tx_antennas: 4,
            rx_antennas: 4,
            spacing_m: 0.003,
            wavelength_m: 0.006,
            carrier_hz: 50.0e9,
            path_loss_exponent: 2.2,
            ref_gain_mag: 5.0e-4,
            ref_gain_arg_deg: 0.0,
            ref_distance_m: 1.0,
            noise_power_dbm: -90.0,
            bs_position_m: [-30.0, -125.0],
        }
    }
}

impl ChannelSection {
    pub fn to_core(&self) -> Result<ChannelConfig> {
        let cfg = ChannelConfig {
            n_tx: self.tx_antennas,
            n_rx: self.rx_antennas,
            spacing: self.spacing_m,
            wavelength: self.wavelength_m,
            carrier_hz: self.carrier_hz,
            path_loss_exponent: self.path_loss_exponent,
            ref_gain_mag: self.ref_gain_mag,
            ref_gain_arg: self.ref_gain_arg_deg.to_radians(),
            ref_distance: self.ref_distance_m,
            noise_power: 10f64.powf((self.noise_power_dbm - 30.0) / 10.0),
            bs_position: self.bs_position_m,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerSection {
    pub sigma_r_m: f64,
    pub sigma_theta_deg: f64,
    pub gain_threshold: f64,
    pub aod_threshold_deg: f64,
    pub aoa_threshold_deg: f64,
    pub innovation: InnovationMode,
}

impl Default for TrackerSection {
    fn default() -> Self {
        TrackerSection {
            sigma_r_m: 1.0,
            sigma_theta_deg: 3.0,
            gain_threshold: 5.0e-7,
            aod_threshold_deg: 7.5,
            aoa_threshold_deg: 7.5,
            innovation: InnovationMode::Ekf,
        }
    }
}

impl TrackerSection {
    pub fn to_core(&self) -> Result<TrackerConfig> {
        let cfg = TrackerConfig {
            sigma_r: self.sigma_r_m,
            sigma_theta: self.sigma_theta_deg.to_radians(),
            gain_threshold: self.gain_threshold,
            aod_threshold: self.aod_threshold_deg.to_radians(),
            aoa_threshold: self.aoa_threshold_deg.to_radians(),
            innovation: self.innovation,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Pose-noise injection model for the gt-noise pose source.
    pub fn noise_spec(&self) -> NoiseSpec {
        NoiseSpec {
            sigma_r: self.sigma_r_m,
            sigma_theta: self.sigma_theta_deg.to_radians(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryPreset {
    #[default]
    UrbanLoop,
    Straight,
    Custom,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectorySection {
    pub preset: TrajectoryPreset,
    pub slot_count: usize,
    pub slot_period_s: f64,
    /// Constant speed; unset paces the path over the slot count.
    pub speed_mps: Option<f64>,
    /// Straight preset length.
    pub straight_length_m: f64,
    /// Custom preset path (used when `preset` is `custom`).
    pub segments: Vec<PathSegment>,
    pub start: [f64; 3],
}

impl Default for TrajectorySection {
    fn default() -> Self {
        TrajectorySection {
            preset: TrajectoryPreset::UrbanLoop,
            slot_count: 6000,
            slot_period_s: 0.25,
            speed_mps: None,
            straight_length_m: 500.0,
            segments: Vec::new(),
            start: [0.0, 0.0, 0.0],
        }
    }
}

impl TrajectorySection {
    pub fn to_core(&self) -> Result<TrajectorySpec> {
        let spec = match self.preset {
            TrajectoryPreset::UrbanLoop => {
                TrajectorySpec::urban_loop(self.slot_count, self.slot_period_s)
            }
            TrajectoryPreset::Straight => TrajectorySpec {
                start: self.start,
                segments: vec![PathSegment::Straight {
                    length: self.straight_length_m,
                }],
                slot_count: self.slot_count,
                slot_period: self.slot_period_s,
                speed: self.speed_mps,
            },
            TrajectoryPreset::Custom => {
                if self.segments.is_empty() {
                    return Err(Error::Config(
                        "custom trajectory preset needs a non-empty `segments` list".into(),
                    ));
                }
                TrajectorySpec {
                    start: self.start,
                    segments: self.segments.clone(),
                    slot_count: self.slot_count,
                    slot_period: self.slot_period_s,
                    speed: self.speed_mps,
                }
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadarSection {
    pub azimuth_count: u32,
    pub range_bin_count: u32,
    pub range_resolution_m: f64,
    pub noise_floor_mean: f64,
    pub speckle_per_azimuth: f64,
    pub segment_sample_spacing_m: f64,
}

impl Default for RadarSection {
    fn default() -> Self {
        RadarSection {
            azimuth_count: 400,
            range_bin_count: 1000,
            range_resolution_m: 0.1,
            noise_floor_mean: 5.0,
            speckle_per_azimuth: 0.02,
            segment_sample_spacing_m: 0.5,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub radar: RadarSection,
    pub trajectory: TrajectorySection,
    pub world: WorldSection,
}

impl SynthSection {
    /// Renderer configuration; the sensing annulus comes from the odometry
    /// section so both stages see the same gate.
    pub fn radar_sim(&self, odometry: &OdometrySection) -> Result<RadarSimConfig> {
        let cfg = RadarSimConfig {
            azimuth_count: self.radar.azimuth_count,
            range_bin_count: self.radar.range_bin_count,
            range_resolution: self.radar.range_resolution_m,
            range_min: odometry.range_min_m,
            range_max: odometry.range_max_m,
            noise_floor_mean: self.radar.noise_floor_mean,
            speckle_per_azimuth: self.radar.speckle_per_azimuth,
            segment_sample_spacing: self.radar.segment_sample_spacing_m,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldSection {
    pub density: f64,
    pub cluster_spacing_m: f64,
    pub offset_min_m: f64,
    pub offset_max_m: f64,
    pub wall_min_m: f64,
    pub wall_max_m: f64,
    pub reflectivity_min: u8,
    pub reflectivity_max: u8,
    pub scatter_per_station: f64,
}

impl Default for WorldSection {
    fn default() -> Self {
        let w = WorldSpec::default();
        WorldSection {
            density: w.density,
            cluster_spacing_m: w.cluster_spacing,
            offset_min_m: w.offset_min,
            offset_max_m: w.offset_max,
            wall_min_m: w.wall_min,
            wall_max_m: w.wall_max,
            reflectivity_min: w.reflectivity_min,
            reflectivity_max: w.reflectivity_max,
            scatter_per_station: w.scatter_per_station,
        }
    }
}

impl WorldSection {
    pub fn to_core(&self) -> Result<WorldSpec> {
        let spec = WorldSpec {
            density: self.density,
            cluster_spacing: self.cluster_spacing_m,
            offset_min: self.offset_min_m,
            offset_max: self.offset_max_m,
            wall_min: self.wall_min_m,
            wall_max: self.wall_max_m,
            reflectivity_min: self.reflectivity_min,
            reflectivity_max: self.reflectivity_max,
            scatter_per_station: self.scatter_per_station,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub kitti_stride_slots: usize,
    pub kitti_lengths_m: Vec<f64>,
}

impl Default for EvalSection {
    fn default() -> Self {
        let p = RelativeErrorProtocol::default();
        EvalSection {
            kitti_stride_slots: p.stride,
            kitti_lengths_m: p.lengths,
        }
    }
}

impl EvalSection {
    pub fn to_core(&self) -> Result<RelativeErrorProtocol> {
        let proto = RelativeErrorProtocol {
            lengths: self.kitti_lengths_m.clone(),
            stride: self.kitti_stride_slots,
        };
        proto.validate()?;
        Ok(proto)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Validates every section by converting it.
    pub fn validate(&self) -> Result<()> {
        self.odometry.to_core()?;
        self.channel.to_core()?;
        self.tracker.to_core()?;
        self.synth.radar_sim(&self.odometry)?;
        self.synth.trajectory.to_core()?;
        self.synth.world.to_core()?;
        self.eval.to_core()?;
        Ok(())
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// FNV-1a hash of the canonical JSON form, for run manifests.
    pub fn content_hash(&self) -> u64 {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let mut hash: u64 = 0xcbf29ce484222325;
        for b in bytes {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x100000001b3);
        }
        hash
    }
}
