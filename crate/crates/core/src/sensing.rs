//! Bearing/closest-point sensing and the muscle couple feedback law.
//!
//! Every node measures the vector to the target and its bearing relative to
//! the local tangent. The arm actuates its longitudinal muscles from the base
//! up to the node closest to the target with couple `u = -mu sin(alpha)`,
//! where the gain `mu = mu_tilde * EI * step(s_bar - s)` switches off smoothly
//! past the closest point.

use serde::{Deserialize, Serialize};

use crate::geometry::RodGeometry;
use crate::rod::RodState;
use crate::vec2::Vec2;
use crate::wrap_angle;

/// Per-node sensory information about a point target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensoryReading {
    /// `target - r(s)` at each node.
    pub target_vector: Vec<Vec2>,
    pub distance: Vec<f64>,
    /// Signed angle from the unit tangent to the unit target vector, in (-pi, pi].
    pub bearing: Vec<f64>,
    pub closest_index: usize,
    pub closest_s: f64,
}

impl SensoryReading {
    pub fn min_distance(&self) -> f64 {
        self.distance[self.closest_index]
    }

    pub fn bearing_at_closest(&self) -> f64 {
        self.bearing[self.closest_index]
    }
}

/// Signed angle that rotates `from` onto `to`, wrapped to (-pi, pi].
pub fn signed_angle(from: Vec2, to: Vec2) -> f64 {
    wrap_angle(from.cross(to).atan2(from.dot(to)))
}

/// Sense a point target from every node of the rod.
///
/// A node that coincides with the target has distance 0 and bearing 0 and
/// becomes the closest point.
pub fn sense(state: &RodState, ds: f64, target: Vec2) -> SensoryReading {
    let n = state.n_nodes();
    let mut target_vector = Vec::with_capacity(n);
    let mut distance = Vec::with_capacity(n);
    let mut bearing = Vec::with_capacity(n);
    let mut closest_index = 0;
    for i in 0..n {
        let rho = target - state.position[i];
        let d = rho.norm();
        let alpha = if d == 0.0 {
            0.0
        } else {
            signed_angle(Vec2::from_angle(state.theta[i]), rho)
        };
        // strict comparison keeps the smallest arclength on ties
        if d < distance.get(closest_index).copied().unwrap_or(f64::INFINITY) {
            closest_index = i;
        }
        target_vector.push(rho);
        distance.push(d);
        bearing.push(alpha);
    }
    SensoryReading {
        target_vector,
        distance,
        bearing,
        closest_index,
        closest_s: closest_index as f64 * ds,
    }
}

/// Default smooth-step width: two elements.
pub fn default_step_width(geometry: &RodGeometry) -> f64 {
    2.0 * geometry.ds()
}

/// Default feedback gain `mu_tilde = 200 / L0`.
pub fn default_gain(geometry: &RodGeometry) -> f64 {
    200.0 / geometry.rest_length
}

/// Logistic approximation of the indicator `1{x >= 0}` whose slope at the
/// midpoint is `1 / width`.
pub fn smooth_step(x: f64, width: f64) -> f64 {
    1.0 / (1.0 + (-4.0 * x / width).exp())
}

/// Gain `mu(s) = mu_tilde EI(s) step(s_bar - s)` at every node.
pub fn gain_profile(closest_s: f64, geometry: &RodGeometry, mu_tilde: f64, width: f64) -> Vec<f64> {
    (0..geometry.n_nodes())
        .map(|i| {
            let s = geometry.node_s(i);
            mu_tilde * geometry.bending_stiffness_at(s) * smooth_step(closest_s - s, width)
        })
        .collect()
}

/// Muscle couple and its split onto the top and bottom longitudinal muscles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlField {
    pub gain: Vec<f64>,
    pub couple: Vec<f64>,
    /// `u` where `u >= 0`, else 0.
    pub top: Vec<f64>,
    /// `u` where `u < 0`, else 0.
    pub bottom: Vec<f64>,
}

impl ControlField {
    fn from_couple(gain: Vec<f64>, couple: Vec<f64>) -> Self {
        let top = couple.iter().map(|&u| if u >= 0.0 { u } else { 0.0 }).collect();
        let bottom = couple.iter().map(|&u| if u < 0.0 { u } else { 0.0 }).collect();
        ControlField {
            gain,
            couple,
            top,
            bottom,
        }
    }

    pub fn zero(n: usize) -> Self {
        ControlField::from_couple(vec![0.0; n], vec![0.0; n])
    }
}

/// Target feedback `u = -mu sin(alpha)`.
pub fn control_couple(reading: &SensoryReading, gain: &[f64]) -> ControlField {
    let couple = reading
        .bearing
        .iter()
        .zip(gain)
        .map(|(&alpha, &mu)| -mu * alpha.sin())
        .collect();
    ControlField::from_couple(gain.to_vec(), couple)
}

/// Feedback toward a target at infinity along slope `m`:
/// `u = -mu (m cos(theta) - sin(theta)) / sqrt(1 + m^2)`.
pub fn slope_feedback_couple(state: &RodState, slope: f64, gain: &[f64]) -> ControlField {
    let norm = (1.0 + slope * slope).sqrt();
    let couple = state
        .theta
        .iter()
        .zip(gain)
        .map(|(&th, &mu)| -mu * (slope * th.cos() - th.sin()) / norm)
        .collect();
    ControlField::from_couple(gain.to_vec(), couple)
}
