//! Line-of-sight mmWave channel physics: uniform-linear-array responses,
//! distance-power-law path gain, pose-to-channel geometry and received-signal
//! synthesis.
//!
//! Conventions: the base-station array axis is aligned with world +y, so the
//! angle of departure is `atan2(x, y)` of the vehicle position relative to
//! the base station. Yaw, departure and arrival angles satisfy
//! `theta - phi + psi = pi` (mod 2pi).

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Pose2};
use nalgebra::Vector2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// mmWave link parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelConfig {
    /// Transmit (base station) antenna count.
    pub n_tx: usize,
    /// Receive (vehicle) antenna count.
    pub n_rx: usize,
    /// Antenna spacing in metres.
    pub spacing: f64,
    /// Carrier wavelength in metres.
    pub wavelength: f64,
    /// Carrier frequency in Hz (informational; the wavelength drives the math).
    pub carrier_hz: f64,
    /// Path loss exponent.
    pub path_loss_exponent: f64,
    /// Path gain magnitude at the reference distance.
    pub ref_gain_mag: f64,
    /// Path gain argument at the reference distance, radians.
    pub ref_gain_arg: f64,
    /// Reference distance in metres.
    pub ref_distance: f64,
    /// Noise power in watts (linear).
    pub noise_power: f64,
    /// Base station position in world coordinates, metres.
    pub bs_position: [f64; 2],
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            n_tx: 4,
            n_rx: 4,
            spacing: 0.003,
            wavelength: 0.006,
            carrier_hz: 50.0e9,
            path_loss_exponent: 2.2,
            ref_gain_mag: 5.0e-4,
            ref_gain_arg: 0.0,
            ref_distance: 1.0,
            noise_power: 1.0e-12, // -90 dBm
            bs_position: [-30.0, -125.0],
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_tx < 1 || self.n_rx < 1 {
            return Err(Error::Config("antenna counts must be >= 1".into()));
        }
        for (name, v) in [
            ("spacing", self.spacing),
            ("wavelength", self.wavelength),
            ("ref_distance", self.ref_distance),
            ("path_loss_exponent", self.path_loss_exponent),
            ("noise_power", self.noise_power),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.ref_gain_mag.is_finite() || self.ref_gain_mag < 0.0 {
            return Err(Error::Config("ref_gain_mag must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn bs(&self) -> Vector2<f64> {
        Vector2::new(self.bs_position[0], self.bs_position[1])
    }

    /// Vehicle position relative to the base station.
    pub fn relative_position(&self, vehicle: &Pose2) -> Vector2<f64> {
        vehicle.position() - self.bs()
    }
}

/// Channel state including the gain argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullChannelState {
    pub alpha_mag: f64,
    pub alpha_arg: f64,
    /// Angle of departure, radians.
    pub aod: f64,
    /// Angle of arrival, radians.
    pub aoa: f64,
}

impl FullChannelState {
    pub fn reduced(&self) -> ReducedChannelState {
        ReducedChannelState {
            alpha_mag: self.alpha_mag,
            aod: self.aod,
            aoa: self.aoa,
        }
    }
}

/// Tracked channel state: gain magnitude, departure and arrival angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedChannelState {
    pub alpha_mag: f64,
    pub aod: f64,
    pub aoa: f64,
}

/// One received pilot observation.
#[derive(Debug, Clone, Copy)]
pub struct Measurement {
    /// Raw complex baseband sample.
    pub z: Complex64,
    /// Real-valued power measurement |z|^2 - noise power.
    pub z_bar: f64,
}

/// Unit-norm ULA response: (1/sqrt(n)) [1, e^{-j 2 pi d/lambda cos(angle)}, ...].
pub fn array_response(angle: f64, n: usize, spacing: f64, wavelength: f64) -> Vec<Complex64> {
    assert!(n >= 1);
    let step = -2.0 * PI * spacing / wavelength * angle.cos();
    let scale = 1.0 / (n as f64).sqrt();
    (0..n)
        .map(|i| Complex64::from_polar(scale, step * i as f64))
        .collect()
}

/// Hermitian inner product a^H b.
pub fn hdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Complex path gain from the power-law model:
/// `alpha_ref (d0/||r||)^{gamma/2} e^{j 2 pi (||r|| - d0)/lambda}`.
pub fn path_gain(rel: &Vector2<f64>, cfg: &ChannelConfig) -> Result<Complex64> {
    let dist = rel.norm();
    if !dist.is_finite() || dist <= 0.0 {
        return Err(Error::Numeric(
            "path gain undefined at zero transceiver distance".into(),
        ));
    }
    let mag = cfg.ref_gain_mag * (cfg.ref_distance / dist).powf(cfg.path_loss_exponent / 2.0);
    let arg = cfg.ref_gain_arg + 2.0 * PI / cfg.wavelength * (dist - cfg.ref_distance);
    Ok(Complex64::from_polar(mag, wrap_angle(arg)))
}

/// Channel geometry for a vehicle pose: departure angle from the BS array
/// axis (+y), arrival angle from `theta - phi + psi = pi`, complex gain from
/// the path-loss model.
pub fn pose_to_channel(vehicle: &Pose2, cfg: &ChannelConfig) -> Result<FullChannelState> {
    let rel = cfg.relative_position(vehicle);
    let gain = path_gain(&rel, cfg)?;
    let aod = rel.x.atan2(rel.y);
    let aoa = wrap_angle(PI + aod - vehicle.theta);
    Ok(FullChannelState {
        alpha_mag: gain.norm(),
        alpha_arg: gain.arg(),
        aod,
        aoa,
    })
}

/// Full LoS channel matrix `alpha a_r(psi) a_t^H(phi)`, rows = receive antennas.
pub fn channel_matrix(state: &FullChannelState, cfg: &ChannelConfig) -> Vec<Vec<Complex64>> {
    let alpha = Complex64::from_polar(state.alpha_mag, state.alpha_arg);
    let at = array_response(state.aod, cfg.n_tx, cfg.spacing, cfg.wavelength);
    let ar = array_response(state.aoa, cfg.n_rx, cfg.spacing, cfg.wavelength);
    ar.iter()
        .map(|&r| at.iter().map(|&t| alpha * r * t.conj()).collect())
        .collect()
}

/// Complex circularly-symmetric Gaussian sample with the given total variance.
pub fn complex_gaussian(variance: f64, rng: &mut impl Rng) -> Complex64 {
    if variance == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let comp = Normal::new(0.0, (variance / 2.0).sqrt()).expect("valid std");
    Complex64::new(comp.sample(rng), comp.sample(rng))
}

/// Synthesizes the received pilot through precoder `f`, combiner `g` and
/// pilot symbol `b`: `z = alpha (g^H a_r)(a_t^H f) b + v`.
pub fn received_signal(
    state: &FullChannelState,
    f: &[Complex64],
    g: &[Complex64],
    b: Complex64,
    noise_power: f64,
    cfg: &ChannelConfig,
    rng: &mut impl Rng,
) -> Measurement {
    let alpha = Complex64::from_polar(state.alpha_mag, state.alpha_arg);
    let at = array_response(state.aod, cfg.n_tx, cfg.spacing, cfg.wavelength);
    let ar = array_response(state.aoa, cfg.n_rx, cfg.spacing, cfg.wavelength);
    // g^H a_r and a_t^H f
    let rx = hdot(g, &ar);
    let tx = hdot(&at, f);
    let v = complex_gaussian(noise_power, rng);
    let z = alpha * rx * tx * b + v;
    Measurement {
        z,
        z_bar: z.norm_sqr() - noise_power,
    }
}

/// Variance of the power-measurement noise: `(sigma_v^2 + 2 h_bar) sigma_v^2`.
pub fn measurement_variance(h_bar: f64, noise_power: f64) -> f64 {
    (noise_power + 2.0 * h_bar) * noise_power
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn cfg() -> ChannelConfig {
        ChannelConfig::default()
    }

    #[test]
    fn array_response_broadside() {
        // cos(pi/2) = 0: all phases zero
        let a = array_response(PI / 2.0, 4, 0.003, 0.006);
        for v in &a {
            assert_abs_diff_eq!(v.re, 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn array_response_endfire_alternates() {
        // angle 0 with half-wavelength spacing: phase increments of pi
        let a = array_response(0.0, 4, 0.003, 0.006);
        let expect = [0.5, -0.5, 0.5, -0.5];
        for (v, e) in a.iter().zip(expect) {
            assert_abs_diff_eq!(v.re, e, epsilon = 1e-12);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn array_response_unit_norm() {
        let mut rng = crate::seed::rng_from_seed(2);
        for _ in 0..50 {
            let angle: f64 = rng.gen_range(-PI..PI);
            let n = rng.gen_range(1..16);
            let a = array_response(angle, n, 0.003, 0.006);
            let norm: f64 = a.iter().map(|v| v.norm_sqr()).sum();
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn array_correlation_peaks_at_equal_cosine() {
        let a = array_response(1.0, 4, 0.003, 0.006);
        let same = hdot(&a, &array_response(-1.0, 4, 0.003, 0.006)); // cos equal
        assert_abs_diff_eq!(same.norm(), 1.0, epsilon = 1e-12);
        let other = hdot(&a, &array_response(1.4, 4, 0.003, 0.006));
        assert!(other.norm() < 1.0);
    }

    #[test]
    fn path_gain_at_reference_distance() {
        let c = cfg();
        let g = path_gain(&Vector2::new(0.0, 1.0), &c).unwrap();
        assert_abs_diff_eq!(g.norm(), c.ref_gain_mag, epsilon = 1e-18);
        assert_abs_diff_eq!(g.arg(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn path_gain_at_ten_metres() {
        let g = path_gain(&Vector2::new(10.0, 0.0), &cfg()).unwrap();
        // 5e-4 * 10^{-1.1}
        assert_abs_diff_eq!(g.norm(), 3.971641173621407e-5, epsilon = 1e-15);
    }

    #[test]
    fn path_gain_at_default_start_distance() {
        // BS (-30, -125) to vehicle (0, 0): 128.5496 m
        let rel = Vector2::new(30.0, 125.0);
        let g = path_gain(&rel, &cfg()).unwrap();
        assert_abs_diff_eq!(g.norm(), 2.3932727550859264e-6, epsilon = 1e-15);
    }

    #[test]
    fn path_gain_rejects_zero_distance() {
        assert!(path_gain(&Vector2::zeros(), &cfg()).is_err());
    }

    #[test]
    fn path_gain_monotone_and_phase_advances() {
        let c = cfg();
        let mut last = f64::INFINITY;
        for d in [1.0, 2.0, 5.0, 20.0, 100.0, 1000.0] {
            let g = path_gain(&Vector2::new(d, 0.0), &c).unwrap();
            assert!(g.norm() < last);
            last = g.norm();
        }
        // one wavelength of extra distance advances the phase by 2 pi
        let g1 = path_gain(&Vector2::new(10.0, 0.0), &c).unwrap();
        let g2 = path_gain(&Vector2::new(10.0 + c.wavelength, 0.0), &c).unwrap();
        assert_abs_diff_eq!(wrap_angle(g2.arg() - g1.arg()), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn pose_to_channel_default_start() {
        let state = pose_to_channel(&Pose2::identity(), &cfg()).unwrap();
        assert_abs_diff_eq!(state.aod, 0.23554498072086333, epsilon = 1e-12);
        assert_abs_diff_eq!(state.aoa, wrap_angle(PI + state.aod), epsilon = 1e-12);
    }

    #[test]
    fn pose_to_channel_yaw_shifts_aoa_only() {
        let c = cfg();
        let s0 = pose_to_channel(&Pose2::new(10.0, 20.0, 0.2), &c).unwrap();
        let s1 = pose_to_channel(&Pose2::new(10.0, 20.0, 0.3), &c).unwrap();
        assert_abs_diff_eq!(s0.aod, s1.aod, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(s1.aoa - s0.aoa), -0.1, epsilon = 1e-12);
    }

    #[test]
    fn pose_to_channel_boresight() {
        // vehicle straight "north" of the BS with zero yaw: aod 0, aoa pi
        let c = cfg();
        let vehicle = Pose2::new(c.bs_position[0], c.bs_position[1] + 50.0, 0.0);
        let s = pose_to_channel(&vehicle, &c).unwrap();
        assert_abs_diff_eq!(s.aod, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.aoa, PI, epsilon = 1e-12);
    }

    #[test]
    fn pose_to_channel_rejects_coincident_positions() {
        let c = cfg();
        let on_bs = Pose2::new(c.bs_position[0], c.bs_position[1], 0.0);
        assert!(pose_to_channel(&on_bs, &c).is_err());
    }

    #[test]
    fn yaw_aod_aoa_identity_holds() {
        let c = cfg();
        let mut rng = crate::seed::rng_from_seed(9);
        for _ in 0..200 {
            let pose = Pose2::new(
                rng.gen_range(-400.0..400.0),
                rng.gen_range(-400.0..400.0),
                rng.gen_range(-PI..PI),
            );
            if c.relative_position(&pose).norm() < 1.0 {
                continue;
            }
            let s = pose_to_channel(&pose, &c).unwrap();
            let residual = wrap_angle(pose.theta - s.aod + s.aoa - PI);
            assert_abs_diff_eq!(residual, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gain_ratio_matches_distance_power_law() {
        let c = cfg();
        let mut rng = crate::seed::rng_from_seed(10);
        for _ in 0..100 {
            let a = Pose2::new(rng.gen_range(-300.0..300.0), rng.gen_range(0.0..300.0), 0.0);
            let b = Pose2::new(rng.gen_range(-300.0..300.0), rng.gen_range(0.0..300.0), 0.0);
            let da = c.relative_position(&a).norm();
            let db = c.relative_position(&b).norm();
            if da < 1.0 || db < 1.0 {
                continue;
            }
            let sa = pose_to_channel(&a, &c).unwrap();
            let sb = pose_to_channel(&b, &c).unwrap();
            let rho = (da / db).powf(c.path_loss_exponent / 2.0);
            assert_abs_diff_eq!(sb.alpha_mag, rho * sa.alpha_mag, epsilon = 1e-18);
        }
    }

    #[test]
    fn received_signal_aligned_noiseless() {
        let c = cfg();
        let state = pose_to_channel(&Pose2::identity(), &c).unwrap();
        let f = array_response(state.aod, c.n_tx, c.spacing, c.wavelength);
        let g = array_response(state.aoa, c.n_rx, c.spacing, c.wavelength);
        let mut rng = crate::seed::rng_from_seed(0);
        let m = received_signal(&state, &f, &g, Complex64::new(1.0, 0.0), 0.0, &c, &mut rng);
        // perfect beam alignment with unit-norm responses: z = alpha
        assert_abs_diff_eq!(m.z.norm(), state.alpha_mag, epsilon = 1e-18);
        assert_abs_diff_eq!(m.z_bar, state.alpha_mag * state.alpha_mag, epsilon = 1e-24);
    }

    #[test]
    fn received_signal_null_steering() {
        let c = cfg();
        let state = pose_to_channel(&Pose2::identity(), &c).unwrap();
        let at = array_response(state.aod, c.n_tx, c.spacing, c.wavelength);
        // orthogonal precoder: swap a pair and negate one to zero the inner product
        let f = vec![at[1].conj(), -at[0].conj(), at[3].conj(), -at[2].conj()];
        let fn_norm: f64 = f.iter().map(|v| v.norm_sqr()).sum();
        assert_abs_diff_eq!(fn_norm, 1.0, epsilon = 1e-12);
        let g = array_response(state.aoa, c.n_rx, c.spacing, c.wavelength);
        let mut rng = crate::seed::rng_from_seed(0);
        let m = received_signal(&state, &f, &g, Complex64::new(1.0, 0.0), 0.0, &c, &mut rng);
        assert_abs_diff_eq!(m.z.norm(), 0.0, epsilon = 1e-18);
    }

    #[test]
    fn z_bar_mean_matches_beam_gain() {
        // E[z_bar] = |g^H H f|^2 over noisy draws
        let c = cfg();
        let state = pose_to_channel(&Pose2::new(40.0, 10.0, 0.3), &c).unwrap();
        let f = array_response(state.aod + 0.05, c.n_tx, c.spacing, c.wavelength);
        let g = array_response(state.aoa - 0.03, c.n_rx, c.spacing, c.wavelength);
        let mut rng = crate::seed::rng_from_seed(123);
        let n = 100_000;
        let mut mean = 0.0;
        for _ in 0..n {
            let m = received_signal(
                &state,
                &f,
                &g,
                Complex64::new(1.0, 0.0),
                c.noise_power,
                &c,
                &mut rng,
            );
            mean += m.z_bar;
        }
        mean /= n as f64;
        let mut quiet = crate::seed::rng_from_seed(0);
        let exact = received_signal(&state, &f, &g, Complex64::new(1.0, 0.0), 0.0, &c, &mut quiet)
            .z
            .norm_sqr();
        let rel = (mean - exact).abs() / exact;
        assert!(rel < 0.02, "relative error {rel}");
    }

    #[test]
    fn measurement_variance_formula() {
        assert_abs_diff_eq!(measurement_variance(0.0, 1e-12), 1e-24, epsilon = 1e-36);
        assert_abs_diff_eq!(
            measurement_variance(1e-11, 1e-12),
            2.1e-23,
            epsilon = 1e-35
        );
    }

    #[test]
    fn measurement_noise_variance_empirical() {
        // var of v_tilde = 2 Re[h v*] + |v|^2 - sigma_v^2 matches the formula
        let c = cfg();
        let state = pose_to_channel(&Pose2::new(25.0, -5.0, 0.1), &c).unwrap();
        let f = array_response(state.aod, c.n_tx, c.spacing, c.wavelength);
        let g = array_response(state.aoa, c.n_rx, c.spacing, c.wavelength);
        let mut quiet = crate::seed::rng_from_seed(0);
        let h = received_signal(&state, &f, &g, Complex64::new(1.0, 0.0), 0.0, &c, &mut quiet).z;
        let h_bar = h.norm_sqr();
        let mut rng = crate::seed::rng_from_seed(77);
        let n = 100_000;
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for _ in 0..n {
            let v = complex_gaussian(c.noise_power, &mut rng);
            let vt = 2.0 * (h * v.conj()).re + v.norm_sqr() - c.noise_power;
            sum += vt;
            sumsq += vt * vt;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        let expect = measurement_variance(h_bar, c.noise_power);
        let rel = (var - expect).abs() / expect;
        assert!(rel < 0.02, "relative error {rel}");
    }
}
