//! Discretized planar Cosserat rod with a clamped base and a free tip.
//!
//! Layout on the arclength grid (N elements, N + 1 nodes):
//!
//! * nodes carry position `r`, frame angle `theta`, their velocities, and the
//!   lumped mass / rotational inertia of their Voronoi cell;
//! * elements carry the stretch/shear strains, the internal force `n` and the
//!   internal bending couple `m`.
//!
//! Inextensibility and unshearability are relaxed into a stiff penalty on the
//! element strains, so `n` is a constitutive output instead of a Lagrange
//! multiplier. Time stepping is position Verlet; the linear damping and the
//! quadratic water drag are integrated with an exponential update so the
//! very large rotational damping rate near the thin tip stays stable.

use serde::{Deserialize, Serialize};

use crate::environment::DragParams;
use crate::error::{Error, Result};
use crate::geometry::RodGeometry;
use crate::vec2::Vec2;

/// Multiplier on `E A` used for both the stretch and the shear rigidity.
pub const DEFAULT_PENALTY_FACTOR: f64 = 4.0;

/// Curvature profile used to build the initial configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialShape {
    Straight,
    /// Uniform curvature (1/m): a circular arc.
    ConstantCurvature {
        curvature: f64,
    },
    /// `peak * exp(-(s - center)^2 / (2 width^2))`.
    GaussianBump {
        peak: f64,
        center: f64,
        width: f64,
    },
    /// Explicit nodal curvature samples, one per node.
    Samples {
        curvature: Vec<f64>,
    },
}

impl InitialShape {
    fn nodal_curvature(&self, geometry: &RodGeometry) -> Result<Vec<f64>> {
        let s = geometry.node_arclengths();
        let kappa: Vec<f64> = match self {
            InitialShape::Straight => vec![0.0; s.len()],
            InitialShape::ConstantCurvature { curvature } => vec![*curvature; s.len()],
            InitialShape::GaussianBump { peak, center, width } => {
                if !(*width > 0.0) {
                    return Err(Error::field("rod.initial_shape.width", "must be > 0"));
                }
                s.iter()
                    .map(|&si| peak * (-(si - center).powi(2) / (2.0 * width * width)).exp())
                    .collect()
            }
            InitialShape::Samples { curvature } => {
                if curvature.len() != s.len() {
                    return Err(Error::field(
                        "rod.initial_shape.curvature",
                        format!("expected {} samples, got {}", s.len(), curvature.len()),
                    ));
                }
                curvature.clone()
            }
        };
        if kappa.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidInput("initial curvature profile is not finite".into()));
        }
        Ok(kappa)
    }
}

/// Snapshot of the rod at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RodState {
    pub time: f64,
    pub position: Vec<Vec2>,
    pub theta: Vec<f64>,
    pub velocity: Vec<Vec2>,
    pub angular_velocity: Vec<f64>,
    /// Nodal curvature: centered differences of `theta`, one-sided at the ends.
    pub curvature: Vec<f64>,
    /// Element internal force, material-frame components.
    pub n1: Vec<f64>,
    pub n2: Vec<f64>,
    /// Element internal elastic couple `EI kappa`.
    pub couple: Vec<f64>,
}

impl RodState {
    pub fn n_nodes(&self) -> usize {
        self.position.len()
    }

    pub fn n_elements(&self) -> usize {
        self.position.len() - 1
    }

    /// Tangent `r_s` at each node; centered in the interior, one-sided at the ends.
    pub fn tangents(&self, ds: f64) -> Vec<Vec2> {
        let r = &self.position;
        let n = r.len();
        (0..n)
            .map(|i| {
                if i == 0 {
                    (r[1] - r[0]) * (1.0 / ds)
                } else if i == n - 1 {
                    (r[n - 1] - r[n - 2]) * (1.0 / ds)
                } else {
                    (r[i + 1] - r[i - 1]) * (0.5 / ds)
                }
            })
            .collect()
    }

    /// Element stretch `|r_s|`.
    pub fn element_stretch(&self, ds: f64) -> Vec<f64> {
        self.position.windows(2).map(|w| (w[1] - w[0]).norm() / ds).collect()
    }

    /// Largest `| |r_s| - 1 |` over the elements.
    pub fn max_stretch_deviation(&self, ds: f64) -> f64 {
        self.element_stretch(ds)
            .into_iter()
            .map(|e| (e - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|p| p.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.theta.iter().all(|x| x.is_finite())
            && self.angular_velocity.iter().all(|x| x.is_finite())
            && self.curvature.iter().all(|x| x.is_finite())
            && self.n1.iter().all(|x| x.is_finite())
            && self.n2.iter().all(|x| x.is_finite())
            && self.couple.iter().all(|x| x.is_finite())
    }

    /// Reflection of the state across the e1 axis.
    pub fn mirrored(&self) -> RodState {
        RodState {
            time: self.time,
            position: self.position.iter().map(|p| p.mirror()).collect(),
            theta: self.theta.iter().map(|x| -x).collect(),
            velocity: self.velocity.iter().map(|v| v.mirror()).collect(),
            angular_velocity: self.angular_velocity.iter().map(|x| -x).collect(),
            curvature: self.curvature.iter().map(|x| -x).collect(),
            n1: self.n1.clone(),
            n2: self.n2.iter().map(|x| -x).collect(),
            couple: self.couple.iter().map(|x| -x).collect(),
        }
    }

    /// Rotation of the whole configuration about the base by `angle`.
    ///
    /// The result no longer satisfies the clamp `theta(0) = 0` unless the
    /// angle is zero; it exists for equivariance checks of the sensing layer.
    pub fn rotated(&self, angle: f64) -> RodState {
        RodState {
            time: self.time,
            position: self.position.iter().map(|p| p.rotate(angle)).collect(),
            theta: self.theta.iter().map(|x| x + angle).collect(),
            velocity: self.velocity.iter().map(|v| v.rotate(angle)).collect(),
            angular_velocity: self.angular_velocity.clone(),
            curvature: self.curvature.clone(),
            n1: self.n1.clone(),
            n2: self.n2.clone(),
            couple: self.couple.clone(),
        }
    }
}

/// Nodal curvature from nodal angles.
pub fn nodal_curvature(theta: &[f64], ds: f64) -> Vec<f64> {
    let n = theta.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                (theta[1] - theta[0]) / ds
            } else if i == n - 1 {
                (theta[n - 1] - theta[n - 2]) / ds
            } else {
                (theta[i + 1] - theta[i - 1]) / (2.0 * ds)
            }
        })
        .collect()
}

/// Loads applied over one step.
#[derive(Debug, Clone, Copy)]
pub struct Loads<'a> {
    /// External force per unit length at each node (N/m).
    pub force_density: Option<&'a [Vec2]>,
    /// Muscle couple `u` at each node (N m); its arclength derivative enters
    /// the angular balance.
    pub control_couple: Option<&'a [f64]>,
    /// Quadratic water drag.
    pub drag: Option<&'a DragParams>,
}

impl Loads<'_> {
    pub const NONE: Loads<'static> = Loads {
        force_density: None,
        control_couple: None,
        drag: None,
    };
}

/// Precomputed per-node and per-element coefficients of a rod.
#[derive(Debug, Clone)]
pub struct RodModel {
    geometry: RodGeometry,
    ds: f64,
    /// Voronoi length of each node (trapezoid weights).
    cell: Vec<f64>,
    mass: Vec<f64>,
    inertia: Vec<f64>,
    radius: Vec<f64>,
    element_bending: Vec<f64>,
    element_stretch_rigidity: Vec<f64>,
    element_shear_rigidity: Vec<f64>,
}

impl RodModel {
    pub fn new(geometry: RodGeometry) -> Result<Self> {
        Self::with_penalty(geometry, DEFAULT_PENALTY_FACTOR)
    }

    pub fn with_penalty(geometry: RodGeometry, penalty_factor: f64) -> Result<Self> {
        geometry.validate()?;
        if !(penalty_factor.is_finite() && penalty_factor > 0.0) {
            return Err(Error::field("rod.penalty_factor", "must be > 0"));
        }
        let n = geometry.n_elements;
        let ds = geometry.ds();
        let cell: Vec<f64> = (0..=n).map(|i| if i == 0 || i == n { 0.5 * ds } else { ds }).collect();
        let s = geometry.node_arclengths();
        let mass = (0..=n)
            .map(|i| geometry.density * geometry.area_at(s[i]) * cell[i])
            .collect();
        let inertia = (0..=n)
            .map(|i| geometry.density * geometry.second_moment_at(s[i]) * cell[i])
            .collect();
        let radius = s.iter().map(|&si| geometry.radius_at(si)).collect();
        let mid: Vec<f64> = (0..n).map(|j| (j as f64 + 0.5) * ds).collect();
        let element_bending = mid.iter().map(|&sm| geometry.bending_stiffness_at(sm)).collect();
        let element_stretch_rigidity: Vec<f64> = mid
            .iter()
            .map(|&sm| penalty_factor * geometry.youngs_modulus * geometry.area_at(sm))
            .collect();
        let element_shear_rigidity = element_stretch_rigidity.clone();
        Ok(RodModel {
            geometry,
            ds,
            cell,
            mass,
            inertia,
            radius,
            element_bending,
            element_stretch_rigidity,
            element_shear_rigidity,
        })
    }

    pub fn geometry(&self) -> &RodGeometry {
        &self.geometry
    }

    pub fn ds(&self) -> f64 {
        self.ds
    }

    pub fn node_radius(&self) -> &[f64] {
        &self.radius
    }

    pub fn node_mass(&self) -> &[f64] {
        &self.mass
    }

    /// Initial configuration at rest, reconstructed from a curvature profile by
    /// integrating `theta_s = kappa` (trapezoid) and `r_s = (cos theta, sin theta)`
    /// element by element, so every element starts unstretched and unsheared.
    pub fn init(&self, shape: &InitialShape) -> Result<RodState> {
        let kappa = shape.nodal_curvature(&self.geometry)?;
        Ok(self.state_from_curvature(&kappa))
    }

    /// Rest configuration whose nodal angles integrate `kappa`.
    pub fn state_from_curvature(&self, kappa: &[f64]) -> RodState {
        let n = self.geometry.n_elements;
        let ds = self.ds;
        let mut theta = vec![0.0; n + 1];
        for i in 1..=n {
            theta[i] = theta[i - 1] + 0.5 * ds * (kappa[i - 1] + kappa[i]);
        }
        self.state_from_theta(&theta)
    }

    /// Rest configuration with the given nodal angles (`theta[0]` is forced to 0).
    pub fn state_from_theta(&self, theta: &[f64]) -> RodState {
        let n = self.geometry.n_elements;
        let ds = self.ds;
        let mut theta = theta.to_vec();
        theta[0] = 0.0;
        let mut position = vec![Vec2::ZERO; n + 1];
        for j in 0..n {
            position[j + 1] = position[j] + Vec2::from_angle(0.5 * (theta[j] + theta[j + 1])) * ds;
        }
        let mut state = RodState {
            time: 0.0,
            position,
            theta,
            velocity: vec![Vec2::ZERO; n + 1],
            angular_velocity: vec![0.0; n + 1],
            curvature: Vec::new(),
            n1: vec![0.0; n],
            n2: vec![0.0; n],
            couple: vec![0.0; n],
        };
        self.update_internal(&mut state);
        state
    }

    /// Recompute curvature and element internal forces/couples from the
    /// configuration.
    pub fn update_internal(&self, state: &mut RodState) {
        let n = self.geometry.n_elements;
        let ds = self.ds;
        state.curvature = nodal_curvature(&state.theta, ds);
        state.n1.resize(n, 0.0);
        state.n2.resize(n, 0.0);
        state.couple.resize(n, 0.0);
        for j in 0..n {
            let (e, a, b) = self.element_frame(state, j);
            state.n1[j] = self.element_stretch_rigidity[j] * (a.dot(e) - 1.0);
            state.n2[j] = self.element_shear_rigidity[j] * b.dot(e);
            state.couple[j] = self.element_bending[j] * (state.theta[j + 1] - state.theta[j]) / ds;
        }
    }

    fn element_frame(&self, state: &RodState, j: usize) -> (Vec2, Vec2, Vec2) {
        let e = (state.position[j + 1] - state.position[j]) * (1.0 / self.ds);
        let mid = 0.5 * (state.theta[j] + state.theta[j + 1]);
        let a = Vec2::from_angle(mid);
        let b = Vec2::new(-a.y, a.x);
        (e, a, b)
    }

    /// Net internal force and torque on every node for the configuration in
    /// `state`, plus the contribution of a muscle couple field.
    fn internal_loads(&self, state: &RodState, control: Option<&[f64]>, force: &mut [Vec2], torque: &mut [f64]) {
        let n = self.geometry.n_elements;
        let ds = self.ds;
        force.iter_mut().for_each(|f| *f = Vec2::ZERO);
        torque.iter_mut().for_each(|t| *t = 0.0);
        for j in 0..n {
            let (e, a, b) = self.element_frame(state, j);
            let n1 = self.element_stretch_rigidity[j] * (a.dot(e) - 1.0);
            let n2 = self.element_shear_rigidity[j] * b.dot(e);
            let n_lab = a * n1 + b * n2;
            force[j] += n_lab;
            force[j + 1] -= n_lab;

            let mut total_couple = self.element_bending[j] * (state.theta[j + 1] - state.theta[j]) / ds;
            if let Some(u) = control {
                total_couple += 0.5 * (u[j] + u[j + 1]);
            }
            torque[j] += total_couple;
            torque[j + 1] -= total_couple;

            let shear_torque = 0.5 * ds * e.cross(n_lab);
            torque[j] += shear_torque;
            torque[j + 1] += shear_torque;
        }
    }

    /// Advance `state` by `dt` in place.
    pub fn step_in_place(&self, state: &mut RodState, loads: &Loads, dt: f64) -> Result<()> {
        let n_nodes = self.geometry.n_nodes();
        if let Some(f) = loads.force_density {
            if f.len() != n_nodes {
                return Err(Error::InvalidInput(format!(
                    "force field has {} samples, rod has {n_nodes} nodes",
                    f.len()
                )));
            }
        }
        if let Some(u) = loads.control_couple {
            if u.len() != n_nodes {
                return Err(Error::InvalidInput(format!(
                    "couple field has {} samples, rod has {n_nodes} nodes",
                    u.len()
                )));
            }
        }
        let half = 0.5 * dt;
        for i in 1..n_nodes {
            state.position[i] += state.velocity[i] * half;
            state.theta[i] += state.angular_velocity[i] * half;
        }

        let mut force = vec![Vec2::ZERO; n_nodes];
        let mut torque = vec![0.0; n_nodes];
        self.internal_loads(state, loads.control_couple, &mut force, &mut torque);

        let zeta = self.geometry.damping;
        for i in 1..n_nodes {
            let w = self.cell[i];
            let mut f = force[i];
            if let Some(ext) = loads.force_density {
                f += ext[i] * w;
            }
            let a = Vec2::from_angle(state.theta[i]);
            let b = Vec2::new(-a.y, a.x);
            let v = state.velocity[i];
            let (v1, v2) = (v.dot(a), v.dot(b));
            let (k_tan, k_per) = match loads.drag {
                Some(d) => d.coefficients(self.radius[i]),
                None => (0.0, 0.0),
            };
            let m = self.mass[i];
            let rate_tan = (zeta + k_tan * v1.abs()) * w / m;
            let rate_per = (zeta + k_per * v2.abs()) * w / m;
            let v1n = damped_update(v1, f.dot(a) / m, rate_tan, dt);
            let v2n = damped_update(v2, f.dot(b) / m, rate_per, dt);
            state.velocity[i] = a * v1n + b * v2n;

            let j = self.inertia[i];
            state.angular_velocity[i] = damped_update(state.angular_velocity[i], torque[i] / j, zeta * w / j, dt);
        }

        for i in 1..n_nodes {
            state.position[i] += state.velocity[i] * half;
            state.theta[i] += state.angular_velocity[i] * half;
        }
        state.position[0] = Vec2::ZERO;
        state.theta[0] = 0.0;
        state.velocity[0] = Vec2::ZERO;
        state.angular_velocity[0] = 0.0;
        state.time += dt;
        self.update_internal(state);

        if !state.is_finite() {
            return Err(Error::Instability {
                time: state.time,
                detail: "non-finite rod state".into(),
            });
        }
        Ok(())
    }

    /// Advance by `dt`, returning the new state.
    pub fn step(&self, state: &RodState, loads: &Loads, dt: f64) -> Result<RodState> {
        let mut next = state.clone();
        self.step_in_place(&mut next, loads, dt)?;
        Ok(next)
    }

    /// `(kinetic, elastic)` energies by trapezoidal quadrature of the nodal
    /// fields: `1/2 (rho A |r_t|^2 + rho I theta_t^2)` and `1/2 EI kappa^2`.
    pub fn energy_diagnostics(&self, state: &RodState) -> (f64, f64) {
        let kinetic = (0..state.n_nodes())
            .map(|i| {
                0.5 * (self.mass[i] * state.velocity[i].norm_sq() + self.inertia[i] * state.angular_velocity[i].powi(2))
            })
            .sum();
        let s = self.geometry.node_arclengths();
        let elastic = (0..state.n_nodes())
            .map(|i| 0.5 * self.cell[i] * self.geometry.bending_stiffness_at(s[i]) * state.curvature[i].powi(2))
            .sum();
        (kinetic, elastic)
    }

    /// Discrete Hamiltonian of the unloaded rod: kinetic energy plus the
    /// element bending and stretch/shear penalty energies the integrator
    /// actually conserves.
    pub fn total_energy(&self, state: &RodState) -> f64 {
        let (kinetic, _) = self.energy_diagnostics(state);
        let ds = self.ds;
        let potential: f64 = (0..self.geometry.n_elements)
            .map(|j| {
                let (e, a, b) = self.element_frame(state, j);
                let e1 = a.dot(e) - 1.0;
                let e2 = b.dot(e);
                let kappa = (state.theta[j + 1] - state.theta[j]) / ds;
                0.5 * ds
                    * (self.element_bending[j] * kappa * kappa
                        + self.element_stretch_rigidity[j] * e1 * e1
                        + self.element_shear_rigidity[j] * e2 * e2)
            })
            .sum();
        kinetic + potential
    }
}

/// Exact solution over `dt` of `x' = accel - rate * x` with both held fixed.
fn damped_update(x: f64, accel: f64, rate: f64, dt: f64) -> f64 {
    let z = rate * dt;
    if z < 1e-12 {
        return x + accel * dt;
    }
    let decay = (-z).exp();
    // (1 - e^{-z}) / z, accurate for small z
    let phi = -(-z).exp_m1() / z;
    x * decay + accel * dt * phi
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> RodModel {
        RodModel::new(RodGeometry::default()).unwrap()
    }

    #[test]
    fn straight_rod_lies_on_e1() {
        let m = model();
        let s = m.init(&InitialShape::Straight).unwrap();
        for (i, p) in s.position.iter().enumerate() {
            assert_eq!(s.theta[i], 0.0);
            assert!((p.x - m.geometry().node_s(i)).abs() < 1e-15);
            assert_eq!(p.y, 0.0);
        }
    }

    #[test]
    fn constant_curvature_builds_circular_arc() {
        let m = model();
        let c = 5.0;
        let s = m.init(&InitialShape::ConstantCurvature { curvature: c }).unwrap();
        let l = m.geometry().rest_length;
        let tip = *s.position.last().unwrap();
        // closed-form endpoint of an arc of radius 1/c starting tangent to e1
        let expected = Vec2::new((c * l).sin() / c, (1.0 - (c * l).cos()) / c);
        // chord-vs-arc per element is O((c ds)^2 / 24)
        assert!((tip - expected).norm() < 1e-5, "{tip:?} vs {expected:?}");
        assert!(s.curvature.iter().all(|k| (k - c).abs() < 1e-9));
    }

    #[test]
    fn gaussian_bump_has_single_interior_bend() {
        let m = model();
        let shape = InitialShape::GaussianBump {
            peak: 60.0,
            center: 0.04,
            width: 0.01,
        };
        let s = m.init(&shape).unwrap();
        // independent reconstruction by fine-step cumulative integration
        let steps = 20_000;
        let h = m.geometry().rest_length / steps as f64;
        let (mut th, mut p) = (0.0f64, Vec2::ZERO);
        let kappa = |x: f64| 60.0 * (-(x - 0.04f64).powi(2) / (2.0 * 0.01 * 0.01)).exp();
        for k in 0..steps {
            let x = k as f64 * h;
            let th_mid = th + 0.5 * h * kappa(x);
            p += Vec2::from_angle(th_mid) * h;
            th += h * kappa(x + 0.5 * h);
        }
        let tip = *s.position.last().unwrap();
        assert!((tip - p).norm() < 1e-4, "{tip:?} vs {p:?}");
        let peaks = (1..s.curvature.len() - 1)
            .filter(|&i| s.curvature[i] > s.curvature[i - 1] && s.curvature[i] >= s.curvature[i + 1])
            .count();
        assert_eq!(peaks, 1);
    }

    #[test]
    fn rejects_non_finite_profile() {
        let m = model();
        let mut k = vec![0.0; 101];
        k[7] = f64::NAN;
        let err = m.init(&InitialShape::Samples { curvature: k }).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn unloaded_straight_rod_stays_put() {
        let m = model();
        let s0 = m.init(&InitialShape::Straight).unwrap();
        let mut s = s0.clone();
        let dt = m.geometry().stable_dt();
        for _ in 0..200 {
            m.step_in_place(&mut s, &Loads::NONE, dt).unwrap();
        }
        for i in 0..s.n_nodes() {
            assert!((s.position[i] - s0.position[i]).norm() < 1e-14);
            assert!(s.theta[i].abs() < 1e-14);
        }
    }

    #[test]
    fn energies_of_rest_states() {
        let m = model();
        let s = m.init(&InitialShape::Straight).unwrap();
        assert_eq!(m.energy_diagnostics(&s), (0.0, 0.0));

        let g = RodGeometry {
            base_radius: 0.005,
            tip_radius: 0.005,
            ..RodGeometry::default()
        };
        let m = RodModel::new(g.clone()).unwrap();
        let c = 3.0;
        let s = m.init(&InitialShape::ConstantCurvature { curvature: c }).unwrap();
        let (k, e) = m.energy_diagnostics(&s);
        let expected = 0.5 * g.bending_stiffness_at(0.0) * c * c * g.rest_length;
        assert_eq!(k, 0.0);
        assert!((e - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let m = model();
        let mut s = m.init(&InitialShape::Straight).unwrap();
        let u = vec![0.0; 7];
        let loads = Loads {
            control_couple: Some(&u),
            ..Loads::NONE
        };
        assert!(m.step_in_place(&mut s, &loads, 1e-4).is_err());
    }

    #[test]
    fn non_finite_load_reports_instability_time() {
        let m = model();
        let mut s = m.init(&InitialShape::Straight).unwrap();
        let mut f = vec![Vec2::ZERO; 101];
        f[50] = Vec2::new(f64::INFINITY, 0.0);
        let loads = Loads {
            force_density: Some(&f),
            ..Loads::NONE
        };
        match m.step_in_place(&mut s, &loads, 1e-4) {
            Err(Error::Instability { time, .. }) => assert!((time - 1e-4).abs() < 1e-18),
            other => panic!("expected instability, got {other:?}"),
        }
    }

    #[test]
    fn damped_update_limits() {
        assert!((damped_update(1.0, 0.0, 0.0, 0.1) - 1.0).abs() < 1e-15);
        assert!((damped_update(0.0, 2.0, 0.0, 0.1) - 0.2).abs() < 1e-15);
        // overdamped limit reaches terminal velocity accel / rate
        assert!((damped_update(5.0, 3.0, 1e6, 1.0) - 3e-6).abs() < 1e-15);
    }
}
