//! Trajectory-decay check of a closed-loop equilibrium: perturb the curvature
//! of a settled state and follow the distance to the unperturbed continuation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rod::RodState;
use crate::runner::{simulate, ClosedLoop};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy)]
pub struct StabilityOptions {
    /// Relative curvature noise amplitude (0.01 for 1 %).
    pub magnitude: f64,
    /// Simulated time after the perturbation.
    pub settle_time: f64,
    /// Required `distance(settle_time) / distance(0)`.
    pub decay_ratio: f64,
    pub seed: u64,
    pub samples: usize,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions {
            magnitude: 0.01,
            settle_time: 2.0,
            decay_ratio: 0.1,
            seed: 1,
            samples: 40,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub t: Vec<f64>,
    /// L2 curvature distance to the unperturbed continuation, 1/m * sqrt(m).
    pub distance: Vec<f64>,
    /// L2 curvature distance of the unperturbed continuation from the
    /// settled state it started at.
    pub reference_drift: Vec<f64>,
    pub initial_distance: f64,
    pub final_ratio: f64,
    pub decayed: bool,
}

fn l2(a: &[f64], b: &[f64], ds: f64) -> f64 {
    let n = a.len();
    let sq: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).collect();
    let inner: f64 = sq[1..n - 1].iter().sum();
    ((inner + 0.5 * (sq[0] + sq[n - 1])) * ds).sqrt()
}

/// Multiply each nodal curvature by `1 + magnitude * xi`, `xi ~ U(-1, 1)`.
///
/// The angle increments are integrated from the base and every element edge
/// is rotated by the mean increment of its end nodes, so element lengths,
/// velocities and the clamp are untouched.
pub fn perturb_curvature(loop_: &ClosedLoop, state: &RodState, magnitude: f64, seed: u64) -> RodState {
    let model = loop_.model();
    let ds = model.ds();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dk: Vec<f64> = state
        .curvature
        .iter()
        .map(|k| k * magnitude * rng.gen_range(-1.0..1.0))
        .collect();
    let mut dtheta = vec![0.0; dk.len()];
    for i in 1..dk.len() {
        dtheta[i] = dtheta[i - 1] + 0.5 * ds * (dk[i - 1] + dk[i]);
    }
    let mut out = state.clone();
    for (theta, d) in out.theta.iter_mut().zip(&dtheta) {
        *theta += d;
    }
    for j in 0..dtheta.len() - 1 {
        let edge = state.position[j + 1] - state.position[j];
        out.position[j + 1] = out.position[j] + edge.rotate(0.5 * (dtheta[j] + dtheta[j + 1]));
    }
    model.update_internal(&mut out);
    out
}

/// Perturb `equilibrium` and integrate both copies under `loop_`.
pub fn perturbation_decay(
    loop_: &ClosedLoop,
    equilibrium: &RodState,
    dt: f64,
    opts: &StabilityOptions,
) -> Result<StabilityReport> {
    if !(opts.settle_time > 0.0) || opts.samples == 0 {
        return Err(Error::InvalidInput(
            "settle time and sample count must be positive".into(),
        ));
    }
    let ds = loop_.model().ds();
    let mut reference = equilibrium.clone();
    let mut perturbed = perturb_curvature(loop_, equilibrium, opts.magnitude, opts.seed);
    let n_steps = (opts.settle_time / dt).round() as usize;
    let stride = (n_steps / opts.samples).max(1);
    let initial = l2(&reference.curvature, &perturbed.curvature, ds);
    let mut report = StabilityReport {
        t: Vec::new(),
        distance: Vec::new(),
        reference_drift: Vec::new(),
        initial_distance: initial,
        final_ratio: 0.0,
        decayed: false,
    };
    for k in 0..=n_steps {
        if k % stride == 0 || k == n_steps {
            report.t.push(k as f64 * dt);
            report.distance.push(l2(&reference.curvature, &perturbed.curvature, ds));
            report
                .reference_drift
                .push(l2(&reference.curvature, &equilibrium.curvature, ds));
        }
        if k == n_steps {
            break;
        }
        loop_.step(&mut reference, dt)?;
        if let Err(e) = loop_.step(&mut perturbed, dt) {
            return Err(Error::Instability {
                time: perturbed.time,
                detail: format!("perturbed run diverged; distance history {:?}: {e}", report.distance),
            });
        }
    }
    let last = *report.distance.last().expect("at least one sample");
    report.final_ratio = if initial > 0.0 { last / initial } else { 0.0 };
    report.decayed = last <= opts.decay_ratio * initial;
    Ok(report)
}

/// Settle the scenario over its configured duration, then run
/// [`perturbation_decay`] on the final state.
pub fn verify_stability(scenario: &Scenario, opts: &StabilityOptions) -> Result<StabilityReport> {
    let run = simulate(scenario)?;
    if let Some(e) = run.failure {
        return Err(e);
    }
    let loop_ = ClosedLoop::from_scenario(scenario)?;
    let mut equilibrium = run.final_state;
    equilibrium.time = 0.0;
    perturbation_decay(&loop_, &equilibrium, scenario.dt(), opts)
}
