//! External loads on the arm: water drag, rigid circular obstacles, and the
//! target trajectory.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RodGeometry;
use crate::rod::RodState;
use crate::vec2::Vec2;

/// Quadratic drag in the material frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DragParams {
    pub water_density: f64,
    pub c_tan: f64,
    pub c_per: f64,
}

impl Default for DragParams {
    fn default() -> Self {
        DragParams {
            water_density: 1022.0,
            c_tan: 0.155,
            c_per: 5.065,
        }
    }
}

impl DragParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.water_density.is_finite() && self.water_density >= 0.0) {
            return Err(Error::field("environment.drag.water_density", "must be >= 0"));
        }
        if !(self.c_tan > 0.0 && self.c_per > self.c_tan && self.c_per.is_finite()) {
            return Err(Error::field(
                "environment.drag",
                "coefficients must satisfy c_per > c_tan > 0",
            ));
        }
        Ok(())
    }

    /// `(k_tan, k_per)` such that the force density components are
    /// `-k v |v|` for a cross section of the given radius.
    pub fn coefficients(&self, radius: f64) -> (f64, f64) {
        let area_tan = 2.0 * PI * radius;
        let area_per = 2.0 * radius;
        (
            0.5 * self.water_density * area_tan * self.c_tan,
            0.5 * self.water_density * area_per * self.c_per,
        )
    }

    /// Drag force density for velocity `v` of a cross section with frame
    /// angle `theta` and radius `radius`.
    pub fn force_at(&self, v: Vec2, theta: f64, radius: f64) -> Vec2 {
        let a = Vec2::from_angle(theta);
        let b = Vec2::new(-a.y, a.x);
        let (v1, v2) = (v.dot(a), v.dot(b));
        let (k_tan, k_per) = self.coefficients(radius);
        a * (-k_tan * v1 * v1.abs()) + b * (-k_per * v2 * v2.abs())
    }
}

/// Drag force density (N/m) at every node.
pub fn drag_force(state: &RodState, params: &DragParams, geometry: &RodGeometry) -> Vec<Vec2> {
    (0..state.n_nodes())
        .map(|i| {
            params.force_at(
                state.velocity[i],
                state.theta[i],
                geometry.radius_at(geometry.node_s(i)),
            )
        })
        .collect()
}

pub const DEFAULT_CONTACT_STIFFNESS: f64 = 1.0e4;
pub const DEFAULT_CONTACT_DAMPING: f64 = 10.0;

/// Rigid circular obstacle with a frictionless penalty contact law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: Vec2,
    pub radius: f64,
    #[serde(default = "default_stiffness")]
    pub stiffness: f64,
    #[serde(default = "default_damping")]
    pub damping: f64,
}

fn default_stiffness() -> f64 {
    DEFAULT_CONTACT_STIFFNESS
}

fn default_damping() -> f64 {
    DEFAULT_CONTACT_DAMPING
}

impl Obstacle {
    pub fn new(center: Vec2, radius: f64) -> Self {
        Obstacle {
            center,
            radius,
            stiffness: DEFAULT_CONTACT_STIFFNESS,
            damping: DEFAULT_CONTACT_DAMPING,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.center.is_finite() {
            return Err(Error::field("environment.obstacles.center", "must be finite"));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::field("environment.obstacles.radius", "must be > 0"));
        }
        if !(self.stiffness.is_finite() && self.stiffness > 0.0) {
            return Err(Error::field("environment.obstacles.stiffness", "must be > 0"));
        }
        if !(self.damping.is_finite() && self.damping >= 0.0) {
            return Err(Error::field("environment.obstacles.damping", "must be >= 0"));
        }
        Ok(())
    }

    /// Penetration of a cross section of radius `section` centered at `p`.
    pub fn penetration(&self, p: Vec2, section: f64) -> f64 {
        self.radius + section - (p - self.center).norm()
    }

    /// Contact force density on a cross section at `p` moving with `v`.
    pub fn force_at(&self, p: Vec2, v: Vec2, section: f64) -> Vec2 {
        let offset = p - self.center;
        let dist = offset.norm();
        let depth = self.radius + section - dist;
        if depth <= 0.0 || dist == 0.0 {
            return Vec2::ZERO;
        }
        let normal = offset * (1.0 / dist);
        let normal_speed = v.dot(normal);
        // no adhesion: damping may only reduce the push, never pull
        let magnitude = (self.stiffness * depth - self.damping * normal_speed).max(0.0);
        normal * magnitude
    }
}

/// Sum of obstacle contact force densities (N/m) at every node.
pub fn obstacle_force(state: &RodState, obstacles: &[Obstacle], geometry: &RodGeometry) -> Vec<Vec2> {
    (0..state.n_nodes())
        .map(|i| {
            let section = geometry.radius_at(geometry.node_s(i));
            obstacles
                .iter()
                .map(|o| o.force_at(state.position[i], state.velocity[i], section))
                .fold(Vec2::ZERO, |acc, f| acc + f)
        })
        .collect()
}

/// Deepest penetration of any node into any obstacle (0 when clear).
pub fn max_penetration(state: &RodState, obstacles: &[Obstacle], geometry: &RodGeometry) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..state.n_nodes() {
        let section = geometry.radius_at(geometry.node_s(i));
        for o in obstacles {
            worst = worst.max(o.penetration(state.position[i], section));
        }
    }
    worst
}

/// Constant-velocity target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetMotion {
    pub position: Vec2,
    #[serde(default)]
    pub velocity: Vec2,
}

impl TargetMotion {
    pub fn fixed(position: Vec2) -> Self {
        TargetMotion {
            position,
            velocity: Vec2::ZERO,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.position.is_finite() && self.velocity.is_finite()) {
            return Err(Error::field(
                "environment.target",
                "position and velocity must be finite",
            ));
        }
        Ok(())
    }

    pub fn position_at(&self, t: f64) -> Vec2 {
        self.position + self.velocity * t
    }

    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }

    /// Heading of the motion; 0 for a static target.
    pub fn heading(&self) -> f64 {
        if self.velocity == Vec2::ZERO {
            0.0
        } else {
            self.velocity.angle()
        }
    }
}

pub fn target_update(motion: &TargetMotion, t: f64) -> Vec2 {
    motion.position_at(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rod::{InitialShape, RodModel};

    fn straight() -> (RodGeometry, RodState) {
        let g = RodGeometry::default();
        let s = RodModel::new(g.clone()).unwrap().init(&InitialShape::Straight).unwrap();
        (g, s)
    }

    #[test]
    fn drag_vanishes_at_rest() {
        let (g, s) = straight();
        let f = drag_force(&s, &DragParams::default(), &g);
        assert!(f.iter().all(|v| *v == Vec2::ZERO));
    }

    #[test]
    fn normal_drag_value() {
        // -1/2 * 1022 * (2 * 0.01) * 5.065 * (0.1 * 0.1)
        let expected: f64 = -0.5 * 1022.0 * (2.0 * 0.01) * 5.065 * (0.1 * 0.1);
        assert!((expected + 0.51764).abs() < 1e-5);
        let f = DragParams::default().force_at(Vec2::new(0.0, 0.1), 0.0, 0.01);
        assert!((f.y - expected).abs() < 1e-12);
        assert!(f.x.abs() < 1e-15);
    }

    #[test]
    fn drag_scales_quadratically() {
        let d = DragParams::default();
        let v = Vec2::new(0.03, -0.07);
        let f1 = d.force_at(v, 0.3, 0.004);
        let f2 = d.force_at(v * 2.0, 0.3, 0.004);
        assert!((f2 - f1 * 4.0).norm() < 1e-15);
    }

    #[test]
    fn drag_coefficient_ordering_is_enforced() {
        let d = DragParams {
            c_tan: 1.0,
            c_per: 0.5,
            ..DragParams::default()
        };
        assert!(d.validate().is_err());
        assert!(DragParams::default().validate().is_ok());
    }

    #[test]
    fn obstacle_without_contact_is_silent() {
        let (g, s) = straight();
        let obstacles = [Obstacle::new(Vec2::new(0.1, 0.1), 0.02)];
        assert!(obstacle_force(&s, &obstacles, &g).iter().all(|f| *f == Vec2::ZERO));
        assert_eq!(max_penetration(&s, &obstacles, &g), 0.0);
    }

    #[test]
    fn static_penetration_gives_penalty_force() {
        let (g, s) = straight();
        let i = 99;
        let section = g.radius_at(g.node_s(i));
        let depth = 2e-4;
        // small obstacle pressing on one node near the thin tip
        let radius = 5e-4;
        let center = s.position[i] + Vec2::new(0.0, radius + section - depth);
        let o = Obstacle::new(center, radius);
        let f = obstacle_force(&s, &[o.clone()], &g);
        assert!((f[i].norm() - o.stiffness * depth).abs() < 1e-9);
        assert!(f[i].y < 0.0);
        let touched = f.iter().filter(|v| **v != Vec2::ZERO).count();
        assert_eq!(touched, 1);
    }

    #[test]
    fn frictionless_when_sliding() {
        let o = Obstacle::new(Vec2::ZERO, 0.05);
        let p = Vec2::new(0.0, 0.052);
        // velocity tangent to the surface
        let f = o.force_at(p, Vec2::new(0.3, 0.0), 0.003);
        assert!(f.x.abs() < 1e-15);
        assert!(f.y > 0.0);
    }

    #[test]
    fn target_motion() {
        let m = TargetMotion {
            position: Vec2::new(0.1, 0.1),
            velocity: Vec2::new(-0.2, 0.0),
        };
        assert_eq!(target_update(&m, 0.0), m.position);
        let p = target_update(&m, 1.0);
        assert!((p.x + 0.1).abs() < 1e-15);
        assert_eq!(p.y, 0.1);
        let fixed = TargetMotion::fixed(Vec2::new(0.3, 0.0));
        assert_eq!(target_update(&fixed, 17.5), Vec2::new(0.3, 0.0));
    }
}
