//! Extended Kalman filter that tracks the reduced channel state
//! (gain magnitude, angle of departure, angle of arrival) from estimated
//! vehicle poses, with deviation-triggered re-initialization.
//!
//! The state evolution is exact under true poses: the gain magnitude scales
//! with the transceiver-distance ratio and the angles advance by geometric
//! control inputs. Pose-estimation errors enter as state-dependent process
//! noise obtained from a first-order expansion. The scalar measurement is the
//! received pilot power.

use crate::channel::{
    array_response, hdot, measurement_variance, pose_to_channel, received_signal, ChannelConfig,
    Measurement, ReducedChannelState,
};
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Pose2};
use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Innovation form used by the posterior update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InnovationMode {
    /// Standard EKF innovation `z - h(s_pred)`.
    #[default]
    Ekf,
    /// Linearized innovation `z - grad_h^T s_pred`.
    PaperLiteral,
}

/// Beam-tracker parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackerConfig {
    /// Pose position error std assumed by the filter, metres.
    pub sigma_r: f64,
    /// Pose yaw error std assumed by the filter, radians.
    pub sigma_theta: f64,
    /// Re-initialization threshold on the gain-magnitude deviation.
    pub gain_threshold: f64,
    /// Re-initialization threshold on the departure-angle deviation, radians.
    pub aod_threshold: f64,
    /// Re-initialization threshold on the arrival-angle deviation, radians.
    pub aoa_threshold: f64,
    pub innovation: InnovationMode,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            sigma_r: 1.0,
            sigma_theta: 3f64.to_radians(),
            gain_threshold: 5.0e-7,
            aod_threshold: 7.5f64.to_radians(),
            aoa_threshold: 7.5f64.to_radians(),
            innovation: InnovationMode::Ekf,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_r", self.sigma_r),
            ("sigma_theta", self.sigma_theta),
            ("gain_threshold", self.gain_threshold),
            ("aod_threshold", self.aod_threshold),
            ("aoa_threshold", self.aoa_threshold),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Estimated poses of two consecutive slots, positions relative to the BS.
#[derive(Debug, Clone, Copy)]
pub struct EvolutionInputs {
    pub r_prev: Vector2<f64>,
    pub r_cur: Vector2<f64>,
    pub theta_prev: f64,
    pub theta_cur: f64,
}

impl EvolutionInputs {
    pub fn from_poses(prev: &Pose2, cur: &Pose2, cfg: &ChannelConfig) -> Self {
        EvolutionInputs {
            r_prev: cfg.relative_position(prev),
            r_cur: cfg.relative_position(cur),
            theta_prev: prev.theta,
            theta_cur: cur.theta,
        }
    }
}

/// One-slot linear evolution of the reduced state: `s' = F s + u + w`,
/// `F = diag(rho, 1, 1)`, `w ~ N(0, Q)`.
#[derive(Debug, Clone, Copy)]
pub struct EvolutionModel {
    /// Gain-magnitude ratio (first diagonal entry of F).
    pub rho: f64,
    pub u: Vector3<f64>,
    pub q: Matrix3<f64>,
}

impl EvolutionModel {
    pub fn f_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::new(self.rho, 1.0, 1.0))
    }
}

/// Builds the evolution model from estimated poses. `alpha_mag_est` is the
/// current gain-magnitude estimate entering the state-dependent noise.
pub fn evolution(
    inputs: &EvolutionInputs,
    alpha_mag_est: f64,
    chan: &ChannelConfig,
    trk: &TrackerConfig,
) -> Result<EvolutionModel> {
    let d_prev = inputs.r_prev.norm();
    let d_cur = inputs.r_cur.norm();
    if !d_prev.is_finite() || !d_cur.is_finite() || d_prev <= 0.0 || d_cur <= 0.0 {
        return Err(Error::Numeric(
            "evolution undefined at zero transceiver distance".into(),
        ));
    }
    let gamma = chan.path_loss_exponent;
    let rho = (d_prev / d_cur).powf(gamma / 2.0);
    // geometric control: change of the departure angle, shortest arc
    let u_aod = wrap_angle(
        inputs.r_cur.x.atan2(inputs.r_cur.y) - inputs.r_prev.x.atan2(inputs.r_prev.y),
    );
    let dtheta = wrap_angle(inputs.theta_cur - inputs.theta_prev);
    let u = Vector3::new(0.0, u_aod, u_aod - dtheta);

    let beta = 1.0 / (d_prev * d_prev) + 1.0 / (d_cur * d_cur);
    let sr2 = trk.sigma_r * trk.sigma_r;
    let st2 = trk.sigma_theta * trk.sigma_theta;
    let a11 = (gamma / 2.0 * rho * alpha_mag_est).powi(2) * beta * sr2;
    let b = beta * sr2;
    let q = Matrix3::new(
        a11, 0.0, 0.0, //
        0.0, b, b, //
        0.0, b, b + 2.0 * st2,
    );
    Ok(EvolutionModel { rho, u, q })
}

/// Diagonal of the four-state process noise including the untracked
/// gain-phase entry `(2 pi / lambda)^2 sigma_r^2`. Diagnostic only; the
/// filter runs on the reduced state.
pub fn full_process_noise_diag(
    inputs: &EvolutionInputs,
    alpha_mag_est: f64,
    chan: &ChannelConfig,
    trk: &TrackerConfig,
) -> Result<[f64; 4]> {
    let model = evolution(inputs, alpha_mag_est, chan, trk)?;
    let phase_var = (2.0 * PI / chan.wavelength).powi(2) * trk.sigma_r * trk.sigma_r;
    Ok([model.q[(0, 0)], phase_var, model.q[(1, 1)], model.q[(2, 2)]])
}

/// First-order covariance of the (gain magnitude, gain phase) process-noise
/// pair. Positive semidefinite by construction; diagnostic only.
pub fn gain_phase_noise_cov(
    inputs: &EvolutionInputs,
    alpha_mag_est: f64,
    chan: &ChannelConfig,
    trk: &TrackerConfig,
) -> Result<Matrix2<f64>> {
    let d_prev = inputs.r_prev.norm();
    let d_cur = inputs.r_cur.norm();
    if !d_prev.is_finite() || !d_cur.is_finite() || d_prev <= 0.0 || d_cur <= 0.0 {
        return Err(Error::Numeric(
            "noise covariance undefined at zero transceiver distance".into(),
        ));
    }
    let gamma = chan.path_loss_exponent;
    let rho = (d_prev / d_cur).powf(gamma / 2.0);
    let beta = 1.0 / (d_prev * d_prev) + 1.0 / (d_cur * d_cur);
    let zeta = 1.0 / d_prev + 1.0 / d_cur;
    let sr2 = trk.sigma_r * trk.sigma_r;
    let a11 = (gamma / 2.0 * rho * alpha_mag_est).powi(2) * beta * sr2;
    let off = -(PI / chan.wavelength) * gamma * rho * alpha_mag_est * zeta * sr2;
    // both slots' position errors feed the phase noise
    let a22 = 2.0 * (2.0 * PI / chan.wavelength).powi(2) * sr2;
    Ok(Matrix2::new(a11, off, off, a22))
}

/// Received pilot power through the configured beams:
/// `|b|^2 |alpha|^2 |g^H a_r(psi)|^2 |f^H a_t(phi)|^2`.
pub fn measurement_fn(
    s: &Vector3<f64>,
    f: &[Complex64],
    g: &[Complex64],
    b: Complex64,
    cfg: &ChannelConfig,
) -> f64 {
    let at = array_response(s.y, cfg.n_tx, cfg.spacing, cfg.wavelength);
    let ar = array_response(s.z, cfg.n_rx, cfg.spacing, cfg.wavelength);
    let tx = hdot(f, &at).norm_sqr();
    let rx = hdot(g, &ar).norm_sqr();
    b.norm_sqr() * s.x * s.x * rx * tx
}

/// Real quadratic form `v^H M v` where `M_{mn} = j (m - n) e^{-j c (m - n)}`
/// with `c = 2 pi d cos(angle) / lambda`. The matrix is Hermitian Toeplitz,
/// so the form is real up to rounding.
fn steering_derivative_form(v: &[Complex64], angle: f64, spacing: f64, wavelength: f64) -> f64 {
    let c = 2.0 * PI * spacing / wavelength * angle.cos();
    let n = v.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for m in 0..n {
        for k in 0..n {
            let d = m as f64 - k as f64;
            let entry = Complex64::i() * d * Complex64::from_polar(1.0, -c * d);
            acc += v[m].conj() * entry * v[k];
        }
    }
    debug_assert!(acc.im.abs() <= 1e-9 * (1.0 + acc.re.abs()));
    acc.re
}

/// Gradient of `measurement_fn` with respect to the reduced state.
pub fn measurement_gradient(
    s: &Vector3<f64>,
    f: &[Complex64],
    g: &[Complex64],
    b: Complex64,
    cfg: &ChannelConfig,
) -> Vector3<f64> {
    let at = array_response(s.y, cfg.n_tx, cfg.spacing, cfg.wavelength);
    let ar = array_response(s.z, cfg.n_rx, cfg.spacing, cfg.wavelength);
    let tx = hdot(f, &at).norm_sqr();
    let rx = hdot(g, &ar).norm_sqr();
    let b2 = b.norm_sqr();
    let alpha2 = s.x * s.x;
    let d_mag = 2.0 * b2 * s.x * rx * tx;
    let phi_form = steering_derivative_form(f, s.y, cfg.spacing, cfg.wavelength);
    let psi_form = steering_derivative_form(g, s.z, cfg.spacing, cfg.wavelength);
    let d_aod = 2.0 * PI * cfg.spacing * s.y.sin() / (cfg.n_tx as f64 * cfg.wavelength)
        * b2
        * alpha2
        * rx
        * phi_form;
    let d_aoa = 2.0 * PI * cfg.spacing * s.z.sin() / (cfg.n_rx as f64 * cfg.wavelength)
        * b2
        * alpha2
        * tx
        * psi_form;
    Vector3::new(d_mag, d_aod, d_aoa)
}

/// Linear-Gaussian prediction; the gain magnitude is clamped at zero.
pub fn predict(
    s: &Vector3<f64>,
    p: &Matrix3<f64>,
    model: &EvolutionModel,
) -> (Vector3<f64>, Matrix3<f64>) {
    let f = model.f_matrix();
    let mut s_pred = f * s + model.u;
    s_pred.x = s_pred.x.max(0.0);
    let p_pred = f * p * f.transpose() + model.q;
    (s_pred, p_pred)
}

/// Posterior from the scalar power measurement.
#[derive(Debug, Clone, Copy)]
pub struct UpdateOutcome {
    pub s: Vector3<f64>,
    pub p: Matrix3<f64>,
    /// True when a degenerate gain forced the update to be skipped.
    pub skipped: bool,
}

/// Scalar-innovation EKF update. A non-finite gain (degenerate denominator)
/// skips the update and returns the prediction.
#[allow(clippy::too_many_arguments)]
pub fn update(
    s_pred: &Vector3<f64>,
    p_pred: &Matrix3<f64>,
    z_bar: f64,
    f: &[Complex64],
    g: &[Complex64],
    b: Complex64,
    chan: &ChannelConfig,
    mode: InnovationMode,
) -> UpdateOutcome {
    let grad = measurement_gradient(s_pred, f, g, b, chan);
    let h_pred = measurement_fn(s_pred, f, g, b, chan);
    let noise_var = measurement_variance(h_pred, chan.noise_power);
    let denom = (grad.transpose() * p_pred * grad)[(0, 0)] + noise_var;
    let gain = p_pred * grad / denom;
    if !denom.is_finite() || denom <= 0.0 || gain.iter().any(|v| !v.is_finite()) {
        return UpdateOutcome {
            s: *s_pred,
            p: *p_pred,
            skipped: true,
        };
    }
    let innovation = match mode {
        InnovationMode::Ekf => z_bar - h_pred,
        InnovationMode::PaperLiteral => z_bar - grad.dot(s_pred),
    };
    let mut s = s_pred + gain * innovation;
    s.x = s.x.max(0.0);
    let p = (Matrix3::identity() - gain * grad.transpose()) * p_pred;
    UpdateOutcome {
        s,
        p: 0.5 * (p + p.transpose()),
        skipped: false,
    }
}

/// Filter state between slots. Angle components are kept unwrapped for
/// continuity; wrapping happens at threshold checks and reporting.
#[derive(Debug, Clone)]
pub struct TrackerState {
    pub s: Vector3<f64>,
    pub p: Matrix3<f64>,
    /// State recorded at the last (re-)initialization.
    pub s_init: Vector3<f64>,
    pub reinit_count: usize,
}

impl TrackerState {
    pub fn reduced(&self) -> ReducedChannelState {
        ReducedChannelState {
            alpha_mag: self.s.x,
            aod: wrap_angle(self.s.y),
            aoa: wrap_angle(self.s.z),
        }
    }
}

/// True when any deviation from the last initialization exceeds its
/// threshold (angle deviations wrapped).
pub fn check_reinit(state: &TrackerState, cfg: &TrackerConfig) -> bool {
    (state.s.x - state.s_init.x).abs() > cfg.gain_threshold
        || wrap_angle(state.s.y - state.s_init.y).abs() > cfg.aod_threshold
        || wrap_angle(state.s.z - state.s_init.z).abs() > cfg.aoa_threshold
}

/// Per-slot record of a tracking run.
#[derive(Debug, Clone, Copy)]
pub struct SlotRecord {
    pub slot: usize,
    pub pose_gt: Pose2,
    pub pose_est: Pose2,
    pub chan_gt: ReducedChannelState,
    pub chan_trk: ReducedChannelState,
    pub reinit: bool,
    pub measurement: Measurement,
}

/// Whole-run timeline.
pub type TrackTimeline = Vec<SlotRecord>;

/// Running tracker: initialization plus the per-slot step.
pub struct Tracker<'a> {
    chan: &'a ChannelConfig,
    cfg: &'a TrackerConfig,
    pub state: TrackerState,
}

impl<'a> Tracker<'a> {
    /// Initializes from the oracle channel at the true starting pose
    /// (standing in for beam training). The initial covariance is the
    /// process noise of a virtual first step that reuses the starting pose.
    pub fn init(
        true_pose: &Pose2,
        est_pose: &Pose2,
        chan: &'a ChannelConfig,
        cfg: &'a TrackerConfig,
    ) -> Result<Self> {
        chan.validate()?;
        cfg.validate()?;
        let oracle = pose_to_channel(true_pose, chan)?.reduced();
        let s = Vector3::new(oracle.alpha_mag, oracle.aod, oracle.aoa);
        let inputs = EvolutionInputs::from_poses(est_pose, est_pose, chan);
        let model = evolution(&inputs, oracle.alpha_mag, chan, cfg)?;
        Ok(Tracker {
            chan,
            cfg,
            state: TrackerState {
                s,
                p: model.q,
                s_init: s,
                reinit_count: 0,
            },
        })
    }

    /// Record for the initialization slot: beams already aligned to the
    /// trained state observe one pilot.
    pub fn initial_record(
        &self,
        true_pose: &Pose2,
        est_pose: &Pose2,
        rng: &mut impl Rng,
    ) -> Result<SlotRecord> {
        let truth = pose_to_channel(true_pose, self.chan)?;
        let f = array_response(self.state.s.y, self.chan.n_tx, self.chan.spacing, self.chan.wavelength);
        let g = array_response(self.state.s.z, self.chan.n_rx, self.chan.spacing, self.chan.wavelength);
        let measurement = received_signal(
            &truth,
            &f,
            &g,
            Complex64::new(1.0, 0.0),
            self.chan.noise_power,
            self.chan,
            rng,
        );
        Ok(SlotRecord {
            slot: 0,
            pose_gt: *true_pose,
            pose_est: *est_pose,
            chan_gt: truth.reduced(),
            chan_trk: self.state.reduced(),
            reinit: false,
            measurement,
        })
    }

    /// One tracking slot: steer beams at the previous posterior, observe the
    /// pilot through the true channel, predict from the estimated poses,
    /// update, and re-initialize from the oracle if the deviation check fires.
    pub fn step(
        &mut self,
        slot: usize,
        pose_est_prev: &Pose2,
        pose_est_cur: &Pose2,
        true_pose_cur: &Pose2,
        rng: &mut impl Rng,
    ) -> Result<SlotRecord> {
        let chan = self.chan;
        let f = array_response(self.state.s.y, chan.n_tx, chan.spacing, chan.wavelength);
        let g = array_response(self.state.s.z, chan.n_rx, chan.spacing, chan.wavelength);
        let pilot = Complex64::new(1.0, 0.0);

        let truth = pose_to_channel(true_pose_cur, chan)?;
        let measurement = received_signal(&truth, &f, &g, pilot, chan.noise_power, chan, rng);

        let inputs = EvolutionInputs::from_poses(pose_est_prev, pose_est_cur, chan);
        let model = evolution(&inputs, self.state.s.x, chan, self.cfg)?;
        let (s_pred, p_pred) = predict(&self.state.s, &self.state.p, &model);
        let outcome = update(
            &s_pred,
            &p_pred,
            measurement.z_bar,
            &f,
            &g,
            pilot,
            chan,
            self.cfg.innovation,
        );
        self.state.s = outcome.s;
        self.state.p = outcome.p;

        let mut reinit = false;
        if check_reinit(&self.state, self.cfg) {
            // beam training oracle: adopt the true channel at the current
            // pose, keeping angle components on the tracker's unwrapped branch
            let oracle = truth.reduced();
            let s_new = Vector3::new(
                oracle.alpha_mag,
                self.state.s.y + wrap_angle(oracle.aod - self.state.s.y),
                self.state.s.z + wrap_angle(oracle.aoa - self.state.s.z),
            );
            self.state.s = s_new;
            self.state.s_init = s_new;
            self.state.p = model.q;
            self.state.reinit_count += 1;
            reinit = true;
        }

        Ok(SlotRecord {
            slot,
            pose_gt: *true_pose_cur,
            pose_est: *pose_est_cur,
            chan_gt: truth.reduced(),
            chan_trk: self.state.reduced(),
            reinit,
            measurement,
        })
    }
}

/// Runs the tracker over aligned ground-truth and estimated pose sequences.
pub fn run_tracking(
    gt: &[Pose2],
    est: &[Pose2],
    chan: &ChannelConfig,
    cfg: &TrackerConfig,
    rng: &mut impl Rng,
) -> Result<(TrackTimeline, usize)> {
    if gt.len() != est.len() {
        return Err(Error::InvalidInput(format!(
            "pose sequences differ in length: {} vs {}",
            gt.len(),
            est.len()
        )));
    }
    if gt.is_empty() {
        return Err(Error::InvalidInput("empty pose sequence".into()));
    }
    let mut tracker = Tracker::init(&gt[0], &est[0], chan, cfg)?;
    let mut timeline = Vec::with_capacity(gt.len());
    timeline.push(tracker.initial_record(&gt[0], &est[0], rng)?);
    for k in 1..gt.len() {
        timeline.push(tracker.step(k, &est[k - 1], &est[k], &gt[k], rng)?);
    }
    let count = tracker.state.reinit_count;
    Ok((timeline, count))
}
