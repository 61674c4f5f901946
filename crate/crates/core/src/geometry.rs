//! Tapered rod geometry and material constants.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Material and shape description of a linearly tapered rod.
///
/// The radius falls linearly from `base_radius` at `s = 0` to `tip_radius`
/// at `s = rest_length`. Cross sections are circular, so `A = pi r^2` and
/// `I = A^2 / (4 pi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RodGeometry {
    pub rest_length: f64,
    pub n_elements: usize,
    pub base_radius: f64,
    pub tip_radius: f64,
    pub density: f64,
    pub youngs_modulus: f64,
    pub damping: f64,
}

impl Default for RodGeometry {
    /// Octopus-arm scale values: 20 cm arm tapering from 1 cm to 1 mm.
    fn default() -> Self {
        RodGeometry {
            rest_length: 0.2,
            n_elements: 100,
            base_radius: 0.01,
            tip_radius: 0.001,
            density: 1042.0,
            youngs_modulus: 1.0e4,
            damping: 0.01,
        }
    }
}

impl RodGeometry {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rod.rest_length", self.rest_length),
            ("rod.base_radius", self.base_radius),
            ("rod.tip_radius", self.tip_radius),
            ("rod.density", self.density),
            ("rod.youngs_modulus", self.youngs_modulus),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::field(name, format!("must be finite and > 0, got {value}")));
            }
        }
        if !(self.damping.is_finite() && self.damping >= 0.0) {
            return Err(Error::field("rod.damping", "must be finite and >= 0"));
        }
        if self.n_elements < 2 {
            return Err(Error::field("rod.n_elements", "must be at least 2"));
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.n_elements + 1
    }

    /// Element length.
    pub fn ds(&self) -> f64 {
        self.rest_length / self.n_elements as f64
    }

    /// Arclength of node `i`.
    pub fn node_s(&self, i: usize) -> f64 {
        self.rest_length * i as f64 / self.n_elements as f64
    }

    pub fn node_arclengths(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| self.node_s(i)).collect()
    }

    pub fn radius_at(&self, s: f64) -> f64 {
        let f = s / self.rest_length;
        self.tip_radius * f + self.base_radius * (1.0 - f)
    }

    pub fn area_at(&self, s: f64) -> f64 {
        let r = self.radius_at(s);
        PI * r * r
    }

    pub fn second_moment_at(&self, s: f64) -> f64 {
        let a = self.area_at(s);
        a * a / (4.0 * PI)
    }

    pub fn bending_stiffness_at(&self, s: f64) -> f64 {
        self.youngs_modulus * self.second_moment_at(s)
    }

    /// Bending stiffness sampled at the nodes.
    pub fn node_bending_stiffness(&self) -> Vec<f64> {
        (0..self.n_nodes())
            .map(|i| self.bending_stiffness_at(self.node_s(i)))
            .collect()
    }

    /// Largest stable step for the explicit integrator: `0.25 ds sqrt(rho / E)`.
    pub fn stable_dt(&self) -> f64 {
        0.25 * self.ds() * (self.density / self.youngs_modulus).sqrt()
    }
}
