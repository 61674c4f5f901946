//! Planar soft-arm simulation under a bearing-based sensory feedback law.
//!
//! The arm is a tapered, nearly inextensible Cosserat rod clamped at the base
//! and free at the tip. Each node senses the bearing to a target and the arm
//! contracts its longitudinal muscles from the base up to the point closest to
//! the target. Alongside the dynamic simulator the crate carries the spatial
//! equilibrium analysis, unicycle pursuit baselines used for trajectory
//! comparison, and bend tracking utilities.

pub mod environment;
pub mod equilibrium;
pub mod error;
pub mod geometry;
pub mod ode;
pub mod output;
pub mod postprocess;
pub mod pursuit;
pub mod rod;
pub mod runner;
pub mod scenario;
pub mod sensing;
pub mod stability;
pub mod vec2;

pub use error::{Error, Result};
pub use geometry::RodGeometry;
pub use rod::{InitialShape, RodState};
pub use vec2::Vec2;

/// Wrap an angle onto the half-open interval (-pi, pi].
pub fn wrap_angle(angle: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut a = angle % TAU;
    if a > PI {
        a -= TAU;
    } else if a <= -PI {
        a += TAU;
    }
    a
}
