//! Unicycle pursuers steered by motion camouflage or classical pursuit, used
//! as reference trajectories for the arm's closest point.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec2::Vec2;
use crate::wrap_angle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteeringLaw {
    MotionCamouflage,
    ClassicalPursuit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PursuitAgent {
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
    pub chi: f64,
    pub law: SteeringLaw,
}

impl PursuitAgent {
    pub fn new(position: Vec2, heading: f64, speed: f64, chi: f64, law: SteeringLaw) -> Result<Self> {
        if !(speed.is_finite() && speed > 0.0) {
            return Err(Error::InvalidInput(format!("pursuer speed must be > 0, got {speed}")));
        }
        if !(chi.is_finite() && chi > 0.0) {
            return Err(Error::InvalidInput(format!("steering gain must be > 0, got {chi}")));
        }
        if !(position.is_finite() && heading.is_finite()) {
            return Err(Error::InvalidInput("pursuer state must be finite".into()));
        }
        Ok(PursuitAgent {
            position,
            heading: wrap_angle(heading),
            speed,
            chi,
            law,
        })
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::from_angle(self.heading) * self.speed
    }
}

/// Relative geometry of pursuer and target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BearingGeometry {
    /// Pursuer-target distance.
    pub sigma: f64,
    /// Angle from the pursuer heading to the line of sight.
    pub phi: f64,
    /// Bearing of the pursuer seen from the target, measured so that
    /// `sigma_dot = -v cos(phi) - v_t cos(psi)`.
    pub psi: f64,
}

/// `None` when pursuer and target coincide.
pub fn bearing_geometry(agent: &PursuitAgent, target: Vec2, target_heading: f64) -> Option<BearingGeometry> {
    let los = target - agent.position;
    let sigma = los.norm();
    if sigma == 0.0 {
        return None;
    }
    let lambda = los.angle();
    Some(BearingGeometry {
        sigma,
        phi: wrap_angle(lambda - agent.heading),
        psi: wrap_angle(lambda + PI - target_heading),
    })
}

pub fn mc_steering(geometry: &BearingGeometry, speed: f64, target_speed: f64, chi: f64) -> f64 {
    chi * (geometry.phi.sin() + target_speed / speed * geometry.psi.sin())
}

/// Classical pursuit steering; `None` once the pursuer is within
/// `capture_floor` of the target.
pub fn cp_steering(
    geometry: &BearingGeometry,
    speed: f64,
    target_speed: f64,
    chi: f64,
    capture_floor: f64,
) -> Option<f64> {
    if geometry.sigma <= capture_floor {
        return None;
    }
    let drift = geometry.phi.sin() + target_speed / speed * geometry.psi.sin();
    Some(chi * geometry.phi.sin() + drift / geometry.sigma)
}

/// One RK4 step of the unicycle with the steering rate held at `u`.
pub fn unicycle_step(agent: &PursuitAgent, u: f64, dt: f64) -> PursuitAgent {
    let v = agent.speed;
    let f = |heading: f64| Vec2::from_angle(heading) * v;
    let h0 = agent.heading;
    let k1 = f(h0);
    let k2 = f(h0 + 0.5 * dt * u);
    let k3 = k2;
    let k4 = f(h0 + dt * u);
    let position = agent.position + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    PursuitAgent {
        position,
        heading: wrap_angle(h0 + dt * u),
        ..*agent
    }
}

/// Time-stamped planar path.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub position: Vec<Vec2>,
}

impl Trajectory {
    pub fn push(&mut self, t: f64, p: Vec2) {
        self.t.push(t);
        self.position.push(p);
    }

    /// Linear interpolation; `t` must lie within the sampled range.
    pub fn at(&self, t: f64) -> Vec2 {
        let k = self.t.partition_point(|&ti| ti <= t);
        if k == 0 {
            return self.position[0];
        }
        if k == self.t.len() {
            return *self.position.last().unwrap();
        }
        let (t0, t1) = (self.t[k - 1], self.t[k]);
        let w = (t - t0) / (t1 - t0);
        self.position[k - 1] * (1.0 - w) + self.position[k] * w
    }

    pub fn path_length(&self) -> f64 {
        self.position.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    pub fn average_speed(&self) -> f64 {
        match (self.t.first(), self.t.last()) {
            (Some(a), Some(b)) if b > a => self.path_length() / (b - a),
            _ => 0.0,
        }
    }
}

/// Pursuer distance at which the run stops.
pub const DEFAULT_CAPTURE_DISTANCE: f64 = 1e-6;

/// Chase a constant-velocity target on the time grid `times`.
pub fn pursue(agent: &PursuitAgent, target_start: Vec2, target_velocity: Vec2, times: &[f64]) -> Result<Trajectory> {
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("pursuit times must increase".into()));
    }
    let target_speed = target_velocity.norm();
    let target_heading = if target_speed == 0.0 {
        0.0
    } else {
        target_velocity.angle()
    };
    let mut traj = Trajectory::default();
    let mut agent = *agent;
    let Some(&t0) = times.first() else {
        return Ok(traj);
    };
    traj.push(t0, agent.position);
    for w in times.windows(2) {
        let target = target_start + target_velocity * w[0];
        let Some(g) = bearing_geometry(&agent, target, target_heading) else {
            break;
        };
        let u = match agent.law {
            SteeringLaw::MotionCamouflage => Some(mc_steering(&g, agent.speed, target_speed, agent.chi)),
            SteeringLaw::ClassicalPursuit => {
                cp_steering(&g, agent.speed, target_speed, agent.chi, DEFAULT_CAPTURE_DISTANCE)
            }
        };
        let Some(u) = u else {
            break;
        };
        agent = unicycle_step(&agent, u, w[1] - w[0]);
        traj.push(w[1], agent.position);
    }
    Ok(traj)
}

/// RMS distance between two trajectories, with `b` interpolated onto the
/// samples of `a` that fall inside the common time range.
pub fn trajectory_rms(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    let (Some(&a0), Some(&a1), Some(&b0), Some(&b1)) = (a.t.first(), a.t.last(), b.t.first(), b.t.last()) else {
        return Err(Error::InvalidInput("empty trajectory".into()));
    };
    let (lo, hi) = (a0.max(b0), a1.min(b1));
    if lo > hi {
        return Err(Error::InvalidInput("trajectories do not overlap in time".into()));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (t, p) in a.t.iter().zip(&a.position) {
        if *t < lo || *t > hi {
            continue;
        }
        sum += (*p - b.at(*t)).norm_sq();
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidInput("no common samples".into()));
    }
    Ok((sum / count as f64).sqrt())
}

/// Both steering laws started from the first sample of `reference`.
#[derive(Debug, Clone, Serialize)]
pub struct BaselineComparison {
    pub speed: f64,
    pub initial_heading: f64,
    pub motion_camouflage: Trajectory,
    pub classical_pursuit: Trajectory,
    pub rms_motion_camouflage: f64,
    pub rms_classical_pursuit: f64,
}

/// Run MC and CP unicycles with the reference path's average speed and
/// initial direction of travel, on the reference time grid, and measure
/// their RMS distance to it.
pub fn compare_with_baselines(
    reference: &Trajectory,
    target_start: Vec2,
    target_velocity: Vec2,
    chi: f64,
) -> Result<BaselineComparison> {
    if reference.t.len() < 2 {
        return Err(Error::InvalidInput("reference trajectory needs two samples".into()));
    }
    let speed = reference.average_speed();
    let start = reference.position[0];
    let initial_heading = reference
        .position
        .iter()
        .find(|p| (**p - start).norm() > 0.0)
        .map(|p| (*p - start).angle())
        .ok_or_else(|| Error::InvalidInput("reference trajectory never moves".into()))?;
    let run = |law| -> Result<Trajectory> {
        let agent = PursuitAgent::new(start, initial_heading, speed, chi, law)?;
        pursue(&agent, target_start, target_velocity, &reference.t)
    };
    let motion_camouflage = run(SteeringLaw::MotionCamouflage)?;
    let classical_pursuit = run(SteeringLaw::ClassicalPursuit)?;
    Ok(BaselineComparison {
        speed,
        initial_heading,
        rms_motion_camouflage: trajectory_rms(reference, &motion_camouflage)?,
        rms_classical_pursuit: trajectory_rms(reference, &classical_pursuit)?,
        motion_camouflage,
        classical_pursuit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn agent(law: SteeringLaw) -> PursuitAgent {
        PursuitAgent::new(Vec2::ZERO, 0.0, 1.0, 25.0, law).unwrap()
    }

    #[test]
    fn bearing_examples() {
        let a = agent(SteeringLaw::MotionCamouflage);
        let g = bearing_geometry(&a, Vec2::new(1.0, 0.0), 0.0).unwrap();
        assert_eq!(g.phi, 0.0);
        assert_eq!(g.sigma, 1.0);
        let g = bearing_geometry(&a, Vec2::new(0.0, 1.0), 0.0).unwrap();
        assert!((g.phi - FRAC_PI_2).abs() < 1e-15);
        assert!(bearing_geometry(&a, Vec2::ZERO, 0.0).is_none());
    }

    #[test]
    fn steering_values() {
        let g = BearingGeometry {
            sigma: 1.0,
            phi: 0.0,
            psi: 0.0,
        };
        assert_eq!(mc_steering(&g, 1.0, 0.5, 25.0), 0.0);
        assert_eq!(cp_steering(&g, 1.0, 0.5, 25.0, 1e-6), Some(0.0));
        let g = BearingGeometry {
            sigma: 0.3,
            phi: FRAC_PI_2,
            psi: 0.4,
        };
        assert_eq!(mc_steering(&g, 0.2, 0.0, 25.0), 25.0);
        let (v, vt, chi) = (0.3, 0.2, 25.0);
        let mc = mc_steering(&g, v, vt, chi);
        let cp = cp_steering(&g, v, vt, chi, 1e-6).unwrap();
        let extra = (g.phi.sin() + vt / v * g.psi.sin()) / g.sigma;
        assert!((cp - (chi * g.phi.sin() + extra)).abs() < 1e-14);
        assert!((mc - chi * (g.phi.sin() + vt / v * g.psi.sin())).abs() < 1e-14);
        let near = BearingGeometry { sigma: 1e-9, ..g };
        assert!(cp_steering(&near, v, vt, chi, 1e-6).is_none());
    }

    #[test]
    fn straight_and_zero_steps() {
        let a = PursuitAgent::new(Vec2::new(1.0, 2.0), 0.7, 0.3, 25.0, SteeringLaw::ClassicalPursuit).unwrap();
        let b = unicycle_step(&a, 0.0, 0.5);
        let d = b.position - a.position;
        assert!((d - Vec2::from_angle(0.7) * 0.15).norm() < 1e-15);
        assert_eq!(unicycle_step(&a, 3.0, 0.0), a);
    }

    #[test]
    fn constant_steering_closes_a_circle() {
        let (v, u) = (0.2, 4.0);
        let mut a = PursuitAgent::new(Vec2::ZERO, 0.3, v, 25.0, SteeringLaw::MotionCamouflage).unwrap();
        let n = 2000;
        let dt = 2.0 * PI / u / n as f64;
        for _ in 0..n {
            a = unicycle_step(&a, u, dt);
        }
        assert!(a.position.norm() < 1e-6 * v / u);
    }

    #[test]
    fn rejects_bad_agents() {
        assert!(PursuitAgent::new(Vec2::ZERO, 0.0, 0.0, 25.0, SteeringLaw::MotionCamouflage).is_err());
        assert!(PursuitAgent::new(Vec2::ZERO, 0.0, 1.0, -1.0, SteeringLaw::MotionCamouflage).is_err());
    }

    #[test]
    fn rms_examples() {
        let mut a = Trajectory::default();
        let mut b = Trajectory::default();
        for i in 0..20 {
            let t = i as f64 * 0.1;
            a.push(t, Vec2::new(t, t * t));
            b.push(t, Vec2::new(t, t * t + 0.03));
        }
        assert_eq!(trajectory_rms(&a, &a).unwrap(), 0.0);
        assert!((trajectory_rms(&a, &b).unwrap() - 0.03).abs() < 1e-12);
        let mut late = Trajectory::default();
        late.push(5.0, Vec2::ZERO);
        late.push(6.0, Vec2::ZERO);
        assert!(trajectory_rms(&a, &late).is_err());
    }

    #[test]
    fn cp_locks_onto_static_target() {
        let a = PursuitAgent::new(Vec2::ZERO, 0.0, 0.2, 25.0, SteeringLaw::ClassicalPursuit).unwrap();
        let target = Vec2::new(0.0, 0.5);
        let times: Vec<f64> = (0..=2000).map(|i| i as f64 * 1e-3).collect();
        let traj = pursue(&a, target, Vec2::ZERO, &times).unwrap();
        // reconstruct headings from the path and check the line-of-sight error
        let mut locked_since = None;
        for k in 1..traj.t.len() {
            let heading = (traj.position[k] - traj.position[k - 1]).angle();
            let los = (target - traj.position[k - 1]).angle();
            let phi = wrap_angle(los - heading).abs();
            if phi < 0.05 {
                locked_since.get_or_insert(k);
            } else {
                locked_since = None;
            }
        }
        assert!(locked_since.is_some());
    }
}
