//! Workflow tests driving the command layer and the binary.

use beamtrack_cli::commands::{
    aggregate_reports, cmd_eval, cmd_odometry, cmd_simulate, cmd_track, run_mc_replicates,
    PoseSource,
};
use beamtrack_cli::config::{RunConfig, TrajectoryPreset};
use std::process::Command;
use tempfile::tempdir;

fn small_config(seed: u64) -> RunConfig {
    let mut cfg = RunConfig {
        seed,
        ..RunConfig::default()
    };
    cfg.synth.trajectory.preset = TrajectoryPreset::Straight;
    cfg.synth.trajectory.slot_count = 40;
    cfg.synth.trajectory.straight_length_m = 60.0;
    cfg.synth.trajectory.speed_mps = Some(6.0);
    cfg
}

#[test]
fn simulate_is_byte_deterministic() {
    let cfg = small_config(5);
    let dir_a = tempdir().unwrap();
    let dir_b = tempdir().unwrap();
    cmd_simulate(&cfg, dir_a.path()).unwrap();
    cmd_simulate(&cfg, dir_b.path()).unwrap();
    for name in ["ground_truth.csv", "manifest.json", "scans/scan_000017.rscn"] {
        let a = std::fs::read(dir_a.path().join(name)).unwrap();
        let b = std::fs::read(dir_b.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    // a different seed changes the scans
    let mut other = small_config(6);
    other.seed = 99;
    let dir_c = tempdir().unwrap();
    cmd_simulate(&other, dir_c.path()).unwrap();
    let a = std::fs::read(dir_a.path().join("scans/scan_000017.rscn")).unwrap();
    let c = std::fs::read(dir_c.path().join("scans/scan_000017.rscn")).unwrap();
    assert_ne!(a, c);
}

#[test]
fn simulate_writes_expected_file_count() {
    let cfg = small_config(7);
    let dir = tempdir().unwrap();
    let summary = cmd_simulate(&cfg, dir.path()).unwrap();
    assert_eq!(summary.slot_count, 40);
    let scans = beamtrack::scan::scan_sequence(&summary.scan_dir).unwrap();
    assert_eq!(scans.len(), 40);
    assert!(summary.gt_csv.exists());
    assert!(summary.manifest.exists());
}

#[test]
fn zero_slots_rejected_at_validation() {
    let mut cfg = small_config(7);
    cfg.synth.trajectory.slot_count = 0;
    assert!(cfg.validate().is_err());
}

#[test]
fn odometry_then_eval_on_clean_scene() {
    // long enough for the shortest relative-error window (100 m)
    let mut cfg = small_config(11);
    cfg.synth.trajectory.slot_count = 100;
    cfg.synth.trajectory.straight_length_m = 150.0;
    let dir = tempdir().unwrap();
    let sim = cmd_simulate(&cfg, dir.path()).unwrap();
    let est_csv = dir.path().join("est.csv");
    let summary = cmd_odometry(&sim.scan_dir, &cfg, &est_csv).unwrap();
    assert_eq!(summary.scan_count, 100);
    let report = cmd_eval(&est_csv, &sim.gt_csv, &cfg, &dir.path().join("report.json")).unwrap();
    // 150 m straight with landmarks around: sub-metre absolute error
    assert!(report.rmse_xy[0] < 1.0 && report.rmse_xy[1] < 1.0);
    assert!(report.kitti_trans_pct < 5.0);
}

#[test]
fn odometry_rejects_missing_and_corrupt_scans() {
    let cfg = small_config(3);
    let dir = tempdir().unwrap();
    std::fs::create_dir_all(dir.path().join("scans")).unwrap();
    // fewer than two scans
    let err = cmd_odometry(&dir.path().join("scans"), &cfg, &dir.path().join("est.csv"));
    assert!(err.is_err());
    // corrupt scan aborts with the file name in the error
    let bad = dir.path().join("scans/scan_000000.rscn");
    std::fs::write(&bad, b"not a scan").unwrap();
    std::fs::write(dir.path().join("scans/scan_000001.rscn"), b"also bad").unwrap();
    let err = cmd_odometry(&dir.path().join("scans"), &cfg, &dir.path().join("est.csv"))
        .unwrap_err();
    assert!(err.to_string().contains("scan_000000.rscn"), "error: {err}");
}

#[test]
fn track_modes_and_slot_mismatch() {
    let cfg = small_config(13);
    let dir = tempdir().unwrap();
    let sim = cmd_simulate(&cfg, dir.path()).unwrap();
    // gt mode with vanishing measurement noise: near-zero tracking error;
    // re-initializations still fire as the true channel drifts
    let mut quiet = cfg.clone();
    quiet.channel.noise_power_dbm = -240.0;
    let summary = cmd_track(&sim.gt_csv, PoseSource::Gt, None, &quiet, dir.path()).unwrap();
    assert!(summary.report.aod_rmse_deg < 1e-6);
    assert!(summary.report.aoa_rmse_deg < 1e-6);
    assert!(summary.report.gain_mag_rmse_pct < 1e-4);
    assert!(summary.timeline_csv.exists());

    // odometry mode requires an estimate with matching slot count
    let short = dir.path().join("short.csv");
    let rows: Vec<beamtrack::io::TrajectoryRow> = beamtrack::io::read_trajectory(&sim.gt_csv)
        .unwrap()
        .into_iter()
        .take(10)
        .collect();
    beamtrack::io::write_trajectory(&short, &rows).unwrap();
    let err = cmd_track(&sim.gt_csv, PoseSource::Odometry, Some(&short), &cfg, dir.path());
    assert!(err.is_err());
}

#[test]
fn mc_means_are_stable_across_independent_reruns() {
    // CLT check: two runs with different master seeds draw independent
    // replicate sets; their means agree within 3 combined standard errors
    let n = 24;
    let reports_a = run_mc_replicates(&small_config(100), n).unwrap();
    let reports_b = run_mc_replicates(&small_config(200), n).unwrap();
    let a = aggregate_reports(&reports_a);
    let b = aggregate_reports(&reports_b);
    for (ma, mb, sa, sb) in [
        (a.mean.aoa_rmse_deg, b.mean.aoa_rmse_deg, a.std.aoa_rmse_deg, b.std.aoa_rmse_deg),
        (a.mean.aod_rmse_deg, b.mean.aod_rmse_deg, a.std.aod_rmse_deg, b.std.aod_rmse_deg),
        (
            a.mean.gain_mag_rmse_pct,
            b.mean.gain_mag_rmse_pct,
            a.std.gain_mag_rmse_pct,
            b.std.gain_mag_rmse_pct,
        ),
    ] {
        let se = ((sa * sa + sb * sb) / n as f64).sqrt();
        assert!(
            (ma - mb).abs() <= 3.0 * se + 1e-12,
            "means {ma} vs {mb} differ beyond 3 standard errors ({se})"
        );
    }
}

#[test]
fn mc_single_replicate_matches_itself() {
    let cfg = small_config(17);
    let reports = run_mc_replicates(&cfg, 1).unwrap();
    let agg = aggregate_reports(&reports);
    assert_eq!(agg.replicates, 1);
    assert_eq!(agg.mean.aod_rmse_deg, reports[0].aod_rmse_deg);
    assert_eq!(agg.std.aod_rmse_deg, 0.0);
    assert_eq!(agg.std.reinit_fraction_pct, 0.0);
    // reruns reproduce exactly
    let again = run_mc_replicates(&cfg, 1).unwrap();
    assert_eq!(reports[0].aoa_rmse_deg, again[0].aoa_rmse_deg);
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_beamtrack"))
}

#[test]
fn binary_exit_codes() {
    // config error: unknown key
    let dir = tempdir().unwrap();
    let bad_cfg = dir.path().join("bad.json");
    std::fs::write(&bad_cfg, r#"{ "seed": 1, "bogus": true }"#).unwrap();
    let out = bin()
        .args(["--config", bad_cfg.to_str().unwrap(), "simulate", "--out"])
        .arg(dir.path().join("x"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // I/O error: missing trajectory file
    let out = bin()
        .args(["eval", "--est", "/nonexistent/a.csv", "--gt", "/nonexistent/b.csv", "--out"])
        .arg(dir.path().join("r.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn binary_track_gt_noise_roundtrip() {
    let dir = tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, small_config(23).to_json_pretty()).unwrap();
    let sim_out = dir.path().join("sim");
    let out = bin()
        .args(["--config", cfg_path.to_str().unwrap(), "simulate", "--out"])
        .arg(&sim_out)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = bin()
        .args(["--config", cfg_path.to_str().unwrap(), "track", "--pose-source", "gt-noise"])
        .args(["--gt"])
        .arg(sim_out.join("ground_truth.csv"))
        .args(["--out"])
        .arg(dir.path().join("track"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("track/timeline.csv").exists());
    assert!(dir.path().join("track/tracking_report.json").exists());
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("track/tracking_report.json")).unwrap(),
    )
    .unwrap();
    assert!(report["aoa_rmse_deg"].as_f64().unwrap() > 0.0);
}

#[test]
fn timeline_csv_has_documented_header() {
    let cfg = small_config(29);
    let dir = tempdir().unwrap();
    let sim = cmd_simulate(&cfg, dir.path()).unwrap();
    cmd_track(&sim.gt_csv, PoseSource::Gt, None, &cfg, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("timeline.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(
        header,
        "k,x_gt,y_gt,theta_gt,x_est,y_est,theta_est,alpha_gt,alpha_trk,aod_gt,aod_trk,aoa_gt,aoa_trk,reinit"
    );
    assert_eq!(text.lines().count(), 41); // header + one row per slot
}
