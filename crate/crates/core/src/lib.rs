//! Radar-odometry-aided mmWave beam tracking.
//!
//! The library covers the full desk-scale pipeline: polar radar scans are
//! reduced to sparse oriented-surface-point sets, consecutive sets are
//! registered on the plane to estimate vehicle motion, and the resulting pose
//! stream drives an extended Kalman filter that tracks the line-of-sight
//! channel (gain magnitude, angle of departure, angle of arrival) of a mmWave
//! downlink. A synthetic scene generator and an evaluation module make every
//! stage testable without recorded sensor data.

pub mod channel;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod odometry;
pub mod pipeline;
pub mod registration;
pub mod scan;
pub mod seed;
pub mod spatial;
pub mod synth;
pub mod tracker;

pub use error::Error;
