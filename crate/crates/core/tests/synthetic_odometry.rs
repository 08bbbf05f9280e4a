//! End-to-end odometry on rendered synthetic scenes.

use beamtrack::geometry::{relative_pose, wrap_angle, Pose2};
use beamtrack::odometry::run_odometry;
use beamtrack::pipeline::OdometryConfig;
use beamtrack::scan::RadarScan;
use beamtrack::seed::{rng_from_seed, stream_rng};
use beamtrack::synth::{
    generate_trajectory, generate_world, render_scan, RadarSimConfig, TrajectorySpec, WorldSpec,
};

/// Denser, closer scene than the long-run default: short test paths only
/// pass a few cluster stations, and nearby walls keep the azimuth
/// quantization error small.
fn dense_world() -> WorldSpec {
    WorldSpec {
        density: 1.25,
        cluster_spacing: 8.0,
        offset_min: 8.0,
        offset_max: 30.0,
        wall_min: 8.0,
        wall_max: 25.0,
        scatter_per_station: 2.0,
        ..WorldSpec::default()
    }
}

fn render_sequence(
    traj: &[Pose2],
    world_seed: u64,
    radar: &RadarSimConfig,
    master_seed: u64,
) -> Vec<RadarScan> {
    // extend the anchor beyond both ends so the sensor has targets all along
    let first = traj.first().unwrap();
    let last = traj.last().unwrap();
    let heading = |p: &Pose2| nalgebra::Vector2::new(p.theta.cos(), p.theta.sin());
    let mut anchor = vec![first.position() - heading(first) * 40.0];
    anchor.extend(traj.iter().step_by(4).map(|p| p.position()));
    anchor.push(last.position() + heading(last) * 40.0);
    let map = generate_world(&anchor, &dense_world(), &mut rng_from_seed(world_seed))
        .expect("world");
    traj.iter()
        .enumerate()
        .map(|(k, pose)| {
            let mut rng = stream_rng(master_seed, k as u64);
            render_scan(&map, pose, radar, k as u64 * 250_000_000, &mut rng)
        })
        .collect()
}

#[test]
fn straight_path_recovers_per_step_translation() {
    // noiseless rendering, 1 m per slot straight path
    let spec = TrajectorySpec::straight(40.0, 4.0, 40, 0.25);
    let traj = generate_trajectory(&spec).expect("trajectory");
    let radar = RadarSimConfig {
        noise_floor_mean: 0.0,
        speckle_per_azimuth: 0.0,
        ..RadarSimConfig::default()
    };
    let scans = render_sequence(&traj, 71, &radar, 100);
    let steps = run_odometry(&scans, &OdometryConfig::default());
    for (k, w) in steps.windows(2).enumerate() {
        let delta = relative_pose(&w[0].pose, &w[1].pose);
        let err = (delta.translation() - nalgebra::Vector2::new(1.0, 0.0)).norm();
        assert!(err < 0.1, "step {k}: translation error {err:.3} m");
    }
}

#[test]
fn noisy_scene_tracks_absolute_pose() {
    // default noise floor and speckle; short mixed path with a gentle turn
    let spec = TrajectorySpec {
        start: [0.0, 0.0, 0.0],
        segments: vec![
            beamtrack::synth::PathSegment::Straight { length: 30.0 },
            beamtrack::synth::PathSegment::Arc {
                radius: 60.0,
                angle: 0.5,
            },
            beamtrack::synth::PathSegment::Straight { length: 30.0 },
        ],
        slot_count: 60,
        slot_period: 0.25,
        speed: Some(6.0),
    };
    let traj = generate_trajectory(&spec).expect("trajectory");
    let scans = render_sequence(&traj, 72, &RadarSimConfig::default(), 200);
    let steps = run_odometry(&scans, &OdometryConfig::default());
    let final_est = steps.last().unwrap().pose.to_pose();
    let final_gt = traj.last().unwrap();
    let pos_err = (final_est.position() - final_gt.position()).norm();
    let yaw_err = wrap_angle(final_est.theta - final_gt.theta).abs();
    assert!(pos_err < 1.0, "final position error {pos_err:.3} m over ~90 m");
    assert!(yaw_err < 2f64.to_radians(), "final yaw error {yaw_err:.4} rad");
}
