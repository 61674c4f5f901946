//! Spatial (arclength) analysis of closed-loop equilibria.
//!
//! At equilibrium the arm satisfies `EI theta_s = -u`, so under the target
//! feedback the sensory variables obey
//!
//! ```text
//! rho_s   = -cos(alpha)
//! alpha_s = (1/rho - mu/EI) sin(alpha)
//! theta_s = (mu/EI) sin(alpha)
//! ```
//!
//! with `mu/EI = mu_tilde * step(s_bar - s)`, so the taper drops out.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::RodGeometry;
use crate::ode::{integrate, OdeOptions};
use crate::sensing::{default_step_width, smooth_step};
use crate::vec2::Vec2;

/// Fraction of `L0` below which the target counts as captured.
pub const CAPTURE_FLOOR: f64 = 1e-4;

/// Gain ratio `mu / EI` along the arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeedbackGain {
    pub mu_tilde: f64,
    pub s_bar: f64,
    pub width: f64,
}

impl FeedbackGain {
    pub fn new(mu_tilde: f64, s_bar: f64, geometry: &RodGeometry) -> Self {
        FeedbackGain {
            mu_tilde,
            s_bar,
            width: default_step_width(geometry),
        }
    }

    pub fn ratio(&self, s: f64) -> f64 {
        if self.mu_tilde == 0.0 {
            0.0
        } else {
            self.mu_tilde * smooth_step(self.s_bar - s, self.width)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumProfile {
    pub s: Vec<f64>,
    /// Distance to the target; infinite for a target at infinity.
    pub rho: Vec<f64>,
    pub alpha: Vec<f64>,
    pub theta: Vec<f64>,
    pub position: Vec<Vec2>,
    pub gain: FeedbackGain,
    pub rho0: f64,
    pub alpha0: f64,
    /// Arclength at which `rho` hit the capture floor.
    pub captured_at: Option<f64>,
}

impl EquilibriumProfile {
    pub fn min_rho(&self) -> f64 {
        self.rho.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `cos(alpha)` at the last sample (the tip unless captured).
    pub fn tip_alignment(&self) -> f64 {
        self.alpha.last().map_or(f64::NAN, |a| a.cos())
    }
}

fn uniform_grid(length: f64, n_points: usize) -> Result<Vec<f64>> {
    if n_points < 2 {
        return Err(Error::InvalidInput("equilibrium grid needs at least 2 points".into()));
    }
    let last = (n_points - 1) as f64;
    Ok((0..n_points).map(|i| length * i as f64 / last).collect())
}

fn ode_options(geometry: &RodGeometry) -> OdeOptions {
    OdeOptions {
        rtol: 1e-12,
        atol: 1e-14,
        // keeps the controller from stepping over the smooth step at s_bar
        max_step: Some(0.5 * default_step_width(geometry)),
        ..OdeOptions::default()
    }
}

/// Integrate the closed-loop equilibrium for a target at distance `rho0` and
/// bearing `alpha0` from the base, sampling `n_points` uniformly over
/// `[0, L0]`. Stops at the capture floor.
pub fn integrate_equilibrium(
    rho0: f64,
    alpha0: f64,
    gain: &FeedbackGain,
    geometry: &RodGeometry,
    n_points: usize,
) -> Result<EquilibriumProfile> {
    if !(rho0.is_finite() && rho0 > 0.0) {
        return Err(Error::InvalidInput(format!("rho0 must be > 0, got {rho0}")));
    }
    if !(alpha0.is_finite() && gain.mu_tilde.is_finite() && gain.mu_tilde >= 0.0) {
        return Err(Error::InvalidInput(
            "alpha0 and mu_tilde must be finite, mu_tilde >= 0".into(),
        ));
    }
    let grid = uniform_grid(geometry.rest_length, n_points)?;
    let floor = CAPTURE_FLOOR * geometry.rest_length;
    let g = *gain;
    let rhs = move |s: f64, y: &[f64]| {
        let (rho, alpha, theta) = (y[0], y[1], y[2]);
        let k = g.ratio(s);
        let sa = alpha.sin();
        vec![-alpha.cos(), (1.0 / rho - k) * sa, k * sa, theta.cos(), theta.sin()]
    };
    let sol = integrate(
        rhs,
        0.0,
        &[rho0, alpha0, 0.0, 0.0, 0.0],
        &grid[1..],
        &ode_options(geometry),
        Some(move |_: f64, y: &[f64]| y[0] - floor),
    )?;
    let mut profile = EquilibriumProfile {
        s: vec![0.0],
        rho: vec![rho0],
        alpha: vec![alpha0],
        theta: vec![0.0],
        position: vec![Vec2::ZERO],
        gain: g,
        rho0,
        alpha0,
        captured_at: sol.event,
    };
    for (s, y) in sol.t.iter().zip(&sol.y) {
        profile.s.push(*s);
        profile.rho.push(y[0]);
        profile.alpha.push(y[1]);
        profile.theta.push(y[2]);
        profile.position.push(Vec2::new(y[3], y[4]));
    }
    if profile.captured_at.is_some() {
        // pin the reported minimum to the floor itself
        *profile.rho.last_mut().unwrap() = floor;
    }
    Ok(profile)
}

/// Equilibrium under slope feedback toward a target at infinity along slope
/// `m`: `theta_s = (mu/EI) (m cos(theta) - sin(theta)) / sqrt(1 + m^2)`.
pub fn integrate_slope_equilibrium(
    slope: f64,
    gain: &FeedbackGain,
    geometry: &RodGeometry,
    n_points: usize,
) -> Result<EquilibriumProfile> {
    if !slope.is_finite() {
        return Err(Error::InvalidInput("slope must be finite".into()));
    }
    let grid = uniform_grid(geometry.rest_length, n_points)?;
    let norm = (1.0 + slope * slope).sqrt();
    let g = *gain;
    let rhs = move |s: f64, y: &[f64]| {
        let theta = y[0];
        vec![
            g.ratio(s) * (slope * theta.cos() - theta.sin()) / norm,
            theta.cos(),
            theta.sin(),
        ]
    };
    let sol = integrate(
        rhs,
        0.0,
        &[0.0, 0.0, 0.0],
        &grid[1..],
        &ode_options(geometry),
        None::<fn(f64, &[f64]) -> f64>,
    )?;
    let heading = slope.atan();
    let mut profile = EquilibriumProfile {
        s: vec![0.0],
        rho: vec![f64::INFINITY],
        alpha: vec![heading],
        theta: vec![0.0],
        position: vec![Vec2::ZERO],
        gain: g,
        rho0: f64::INFINITY,
        alpha0: heading,
        captured_at: None,
    };
    for (s, y) in sol.t.iter().zip(&sol.y) {
        profile.s.push(*s);
        profile.rho.push(f64::INFINITY);
        profile.alpha.push(heading - y[0]);
        profile.theta.push(y[0]);
        profile.position.push(Vec2::new(y[1], y[2]));
    }
    Ok(profile)
}

/// Exact slope-feedback equilibrium angle with a sharp cut-off at `s_bar`.
pub fn closed_form_theta(s: f64, slope: f64, mu_tilde: f64, s_bar: f64) -> f64 {
    let root = (1.0 + slope * slope).sqrt();
    let active = s.min(s_bar).max(0.0);
    let arg = 0.5 * mu_tilde * active + (1.0 / root).atanh();
    2.0 * ((root / slope) * arg.tanh() - 1.0 / slope).atan()
}

/// Default sweep: `mu_tilde` in `{0} U {2^k / L0 : k = 0..=10}`.
pub fn default_gain_grid(geometry: &RodGeometry) -> Vec<f64> {
    std::iter::once(0.0)
        .chain((0..=10).map(|k| f64::from(1u32 << k) / geometry.rest_length))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub mu_tilde: f64,
    pub min_rho: f64,
    pub tip_alignment: f64,
    pub captured_at: Option<f64>,
    pub success: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Smallest swept gain meeting the criterion; `None` is evidence against
    /// the claim over the tested range.
    pub found: Option<f64>,
}

impl SweepReport {
    /// True when `min_rho` never increases along the sweep.
    pub fn min_rho_non_increasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].min_rho <= w[0].min_rho)
    }
}

fn sweep(
    rho0: f64,
    alpha0: f64,
    gains: &[f64],
    geometry: &RodGeometry,
    accept: impl Fn(&EquilibriumProfile) -> bool,
) -> Result<SweepReport> {
    let mut rows = Vec::with_capacity(gains.len());
    let mut found = None;
    for &mu_tilde in gains {
        // gain active along the whole arm; the profile itself locates s_bar
        let gain = FeedbackGain::new(mu_tilde, geometry.rest_length, geometry);
        let profile = integrate_equilibrium(rho0, alpha0, &gain, geometry, geometry.n_nodes())?;
        let success = accept(&profile);
        if success && found.is_none() {
            found = Some(mu_tilde);
        }
        rows.push(SweepRow {
            mu_tilde,
            min_rho: profile.min_rho(),
            tip_alignment: profile.tip_alignment(),
            captured_at: profile.captured_at,
            success,
        });
    }
    Ok(SweepReport { rows, found })
}

/// Sweep the gain for an in-reach target and report the first gain whose
/// equilibrium comes within `tolerance` of the target.
pub fn verify_reach(
    rho0: f64,
    alpha0: f64,
    tolerance: f64,
    gains: &[f64],
    geometry: &RodGeometry,
) -> Result<SweepReport> {
    if rho0 > geometry.rest_length {
        return Err(Error::InvalidInput("verify_reach needs rho0 <= L0".into()));
    }
    if !(tolerance > 0.0) {
        return Err(Error::InvalidInput("tolerance must be > 0".into()));
    }
    sweep(rho0, alpha0, gains, geometry, |p| p.min_rho() <= tolerance)
}

/// Sweep the gain for an out-of-reach target and report the first gain whose
/// tip satisfies `cos(alpha(L0)) >= 1 - tolerance`.
pub fn verify_pointing(
    rho0: f64,
    alpha0: f64,
    tolerance: f64,
    gains: &[f64],
    geometry: &RodGeometry,
) -> Result<SweepReport> {
    if rho0 <= geometry.rest_length {
        return Err(Error::InvalidInput("verify_pointing needs rho0 > L0".into()));
    }
    if !(tolerance > 0.0 && tolerance < 1.0) {
        return Err(Error::InvalidInput("tolerance must lie in (0, 1)".into()));
    }
    sweep(rho0, alpha0, gains, geometry, |p| {
        p.captured_at.is_none() && p.tip_alignment() >= 1.0 - tolerance
    })
}
