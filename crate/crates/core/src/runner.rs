//! Closed-loop simulation: sense, compute the muscle couple, add obstacle
//! contact, step the rod; sample frames at the output cadence.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::environment::{max_penetration, obstacle_force, DragParams, Obstacle, TargetMotion};
use crate::error::{Error, Result};
use crate::output::{fmt_g9, write_json, CsvSink};
use crate::postprocess::{bend_location, point_at, BendLocation};
use crate::pursuit::Trajectory;
use crate::rod::{Loads, RodModel, RodState};
use crate::scenario::{ControlMode, Scenario};
use crate::sensing::{control_couple, gain_profile, sense, slope_feedback_couple, ControlField, SensoryReading};
use crate::vec2::Vec2;

/// Controller, environment and rod model of one scenario.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    model: RodModel,
    mode: ControlMode,
    mu_tilde: f64,
    width: f64,
    slope: f64,
    hold_on_contact: bool,
    drag: Option<DragParams>,
    obstacles: Vec<Obstacle>,
    target: Option<TargetMotion>,
}

/// Everything the controller computed from one state.
#[derive(Debug, Clone)]
pub struct Actuation {
    pub target: Option<Vec2>,
    pub reading: Option<SensoryReading>,
    pub control: ControlField,
}

impl ClosedLoop {
    pub fn from_scenario(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let model = RodModel::with_penalty(scenario.geometry(), scenario.rod.penalty_factor)?;
        Ok(ClosedLoop {
            model,
            mode: scenario.control.mode,
            mu_tilde: scenario.gain(),
            width: scenario.step_width(),
            slope: scenario.control.slope.unwrap_or(0.0),
            hold_on_contact: scenario.control.hold_on_contact,
            drag: scenario.drag(),
            obstacles: scenario.obstacles(),
            target: scenario.target(),
        })
    }

    pub fn model(&self) -> &RodModel {
        &self.model
    }

    pub fn mode(&self) -> ControlMode {
        self.mode
    }

    pub fn mu_tilde(&self) -> f64 {
        self.mu_tilde
    }

    pub fn step_width(&self) -> f64 {
        self.width
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn target(&self) -> Option<&TargetMotion> {
        self.target.as_ref()
    }

    /// The same loop with the target feedback disabled.
    pub fn passive(&self) -> Self {
        ClosedLoop {
            mode: ControlMode::Off,
            ..self.clone()
        }
    }

    pub fn actuation(&self, state: &RodState) -> Actuation {
        let geometry = self.model.geometry();
        let n = geometry.n_nodes();
        match (self.mode, &self.target) {
            (ControlMode::Target, Some(motion)) => {
                let target = motion.position_at(state.time);
                let reading = sense(state, geometry.ds(), target);
                let gain = gain_profile(reading.closest_s, geometry, self.mu_tilde, self.width);
                let control = if self.hold_on_contact {
                    let mut held = reading.clone();
                    for (i, alpha) in held.bearing.iter_mut().enumerate() {
                        if held.distance[i] < self.model.node_radius()[i] {
                            *alpha = 0.0;
                        }
                    }
                    control_couple(&held, &gain)
                } else {
                    control_couple(&reading, &gain)
                };
                Actuation {
                    target: Some(target),
                    reading: Some(reading),
                    control,
                }
            }
            (ControlMode::Slope, _) => {
                let gain = gain_profile(geometry.rest_length, geometry, self.mu_tilde, self.width);
                Actuation {
                    target: self.target.as_ref().map(|m| m.position_at(state.time)),
                    reading: None,
                    control: slope_feedback_couple(state, self.slope, &gain),
                }
            }
            _ => Actuation {
                target: self.target.as_ref().map(|m| m.position_at(state.time)),
                reading: self
                    .target
                    .as_ref()
                    .map(|m| sense(state, geometry.ds(), m.position_at(state.time))),
                control: ControlField::zero(n),
            },
        }
    }

    /// Advance `state` by `dt` under a previously computed actuation.
    pub fn advance(&self, state: &mut RodState, actuation: &Actuation, dt: f64) -> Result<()> {
        let contact = if self.obstacles.is_empty() {
            None
        } else {
            Some(obstacle_force(state, &self.obstacles, self.model.geometry()))
        };
        let loads = Loads {
            force_density: contact.as_deref(),
            control_couple: Some(&actuation.control.couple),
            drag: self.drag.as_ref(),
        };
        self.model.step_in_place(state, &loads, dt)
    }

    /// One closed-loop step; returns the actuation that drove it.
    pub fn step(&self, state: &mut RodState, dt: f64) -> Result<Actuation> {
        let act = self.actuation(state);
        self.advance(state, &act, dt)?;
        Ok(act)
    }

    /// Largest `|u| / (mu_tilde EI)` over nodes beyond `s_bar + 3w`.
    pub fn passivity_ratio(&self, actuation: &Actuation) -> f64 {
        let Some(reading) = &actuation.reading else {
            return 0.0;
        };
        if self.mode != ControlMode::Target {
            return 0.0;
        }
        let geometry = self.model.geometry();
        let limit = reading.closest_s + 3.0 * self.width;
        let ei = geometry.node_bending_stiffness();
        (0..geometry.n_nodes())
            .filter(|&i| geometry.node_s(i) > limit)
            .map(|i| actuation.control.couple[i].abs() / (self.mu_tilde * ei[i]))
            .fold(0.0, f64::max)
    }
}

/// Sensor summary of one frame.
#[derive(Debug, Clone, Serialize)]
pub struct FrameSensing {
    pub target: Vec2,
    pub s_bar: f64,
    pub s_bar_point: Vec2,
    pub min_rho: f64,
    pub alpha_at_s_bar: f64,
    /// `cos(alpha)` at the tip.
    pub tip_alignment: f64,
}

/// Rod configuration and actuation sampled at an output instant.
#[derive(Debug, Clone)]
pub struct Frame {
    pub t: f64,
    pub state: RodState,
    pub couple: Vec<f64>,
    pub sensing: Option<FrameSensing>,
    pub bend: BendLocation,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub status: &'static str,
    pub steps: usize,
    pub dt: f64,
    pub final_time: f64,
    pub frames: usize,
    pub final_min_rho: Option<f64>,
    pub tip_alignment: Option<f64>,
    pub max_stretch_deviation: f64,
    pub max_penetration: f64,
    pub max_passive_couple_ratio: f64,
    pub wall_time_s: f64,
    pub failure: Option<String>,
}

#[derive(Debug)]
pub struct RunResult {
    pub frames: Vec<Frame>,
    pub summary: RunSummary,
    pub final_state: RodState,
    /// Set when the run stopped early.
    pub failure: Option<Error>,
}

fn frame_of(loop_: &ClosedLoop, state: &RodState, act: &Actuation) -> Result<Frame> {
    let ds = loop_.model.ds();
    let sensing = match (&act.reading, act.target) {
        (Some(r), Some(target)) => Some(FrameSensing {
            target,
            s_bar: r.closest_s,
            s_bar_point: state.position[r.closest_index],
            min_rho: r.min_distance(),
            alpha_at_s_bar: r.bearing_at_closest(),
            tip_alignment: r.bearing.last().map_or(f64::NAN, |a| a.cos()),
        }),
        _ => None,
    };
    Ok(Frame {
        t: state.time,
        state: state.clone(),
        couple: act.control.couple.clone(),
        sensing,
        bend: bend_location(&state.curvature, ds)?,
    })
}

/// Integrate a scenario from its initial shape.
pub fn simulate(scenario: &Scenario) -> Result<RunResult> {
    let loop_ = ClosedLoop::from_scenario(scenario)?;
    let state = loop_.model.init(&scenario.rod.initial_shape)?;
    simulate_from(
        &loop_,
        state,
        scenario.integration.duration,
        scenario.dt(),
        scenario.integration.output_rate,
    )
}

/// Integrate `loop_` from `state` for `duration`, keeping a frame every
/// `1 / output_rate` seconds (rounded to whole steps).
pub fn simulate_from(
    loop_: &ClosedLoop,
    mut state: RodState,
    duration: f64,
    dt: f64,
    output_rate: f64,
) -> Result<RunResult> {
    let started = Instant::now();
    let geometry = loop_.model.geometry();
    let ds = geometry.ds();
    let n_steps = (duration / dt - 1e-9).ceil().max(0.0) as usize;
    let stride = ((1.0 / (output_rate * dt)).round() as usize).max(1);
    let mut frames = Vec::new();
    let mut max_dev = state.max_stretch_deviation(ds);
    let mut max_pen = max_penetration(&state, &loop_.obstacles, geometry);
    let mut max_passive = 0.0f64;
    let mut failure = None;
    let mut steps = 0;
    let mut last_act = loop_.actuation(&state);
    for k in 0..=n_steps {
        let act = if k == 0 {
            last_act.clone()
        } else {
            loop_.actuation(&state)
        };
        if k % stride == 0 {
            max_passive = max_passive.max(loop_.passivity_ratio(&act));
            frames.push(frame_of(loop_, &state, &act)?);
        }
        if k == n_steps {
            last_act = act;
            break;
        }
        if let Err(e) = loop_.advance(&mut state, &act, dt) {
            failure = Some(e);
            last_act = act;
            break;
        }
        steps += 1;
        max_dev = max_dev.max(state.max_stretch_deviation(ds));
        if !loop_.obstacles.is_empty() {
            max_pen = max_pen.max(max_penetration(&state, &loop_.obstacles, geometry));
        }
    }
    let final_reading = last_act.reading.as_ref();
    let summary = RunSummary {
        status: if failure.is_some() { "failed" } else { "ok" },
        steps,
        dt,
        final_time: state.time,
        frames: frames.len(),
        final_min_rho: final_reading.map(|r| r.min_distance()),
        tip_alignment: final_reading.and_then(|r| r.bearing.last()).map(|a| a.cos()),
        max_stretch_deviation: max_dev,
        max_penetration: max_pen,
        max_passive_couple_ratio: max_passive,
        wall_time_s: started.elapsed().as_secs_f64(),
        failure: failure.as_ref().map(|e| e.to_string()),
    };
    Ok(RunResult {
        frames,
        summary,
        final_state: state,
        failure,
    })
}

/// Lab-frame path of the node closest to the target, one sample per frame.
pub fn closest_point_trajectory(run: &RunResult) -> Trajectory {
    let mut traj = Trajectory::default();
    for f in &run.frames {
        if let Some(s) = &f.sensing {
            traj.push(f.t, s.s_bar_point);
        }
    }
    traj
}

pub const ROD_HEADER: [&str; 8] = ["t_s", "node", "s_m", "x_m", "y_m", "theta_rad", "kappa_per_m", "u_Nm"];
pub const SENSORY_HEADER: [&str; 8] = [
    "t_s",
    "s_bar_m",
    "min_rho_m",
    "alpha_at_s_bar_rad",
    "target_x_m",
    "target_y_m",
    "s_bar_x_m",
    "s_bar_y_m",
];
pub const BEND_HEADER: [&str; 5] = ["t_s", "s_bend_m", "bend_x_m", "bend_y_m", "kappa_peak_per_m"];

/// Write the enabled CSV series and `summary.json` into `out_dir`.
pub fn write_outputs(scenario: &Scenario, run: &RunResult, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let geometry = scenario.geometry();
    let ds = geometry.ds();
    if scenario.output.rod {
        let mut sink = CsvSink::create(&out_dir.join("rod.csv"), &ROD_HEADER)?;
        for f in &run.frames {
            for i in 0..f.state.n_nodes() {
                let p = f.state.position[i];
                sink.row(&[
                    fmt_g9(f.t),
                    i.to_string(),
                    fmt_g9(geometry.node_s(i)),
                    fmt_g9(p.x),
                    fmt_g9(p.y),
                    fmt_g9(f.state.theta[i]),
                    fmt_g9(f.state.curvature[i]),
                    fmt_g9(f.couple[i]),
                ])?;
            }
        }
        sink.finish()?;
    }
    if scenario.output.sensory {
        let mut sink = CsvSink::create(&out_dir.join("sensory.csv"), &SENSORY_HEADER)?;
        for f in &run.frames {
            if let Some(s) = &f.sensing {
                sink.numbers(&[
                    f.t,
                    s.s_bar,
                    s.min_rho,
                    s.alpha_at_s_bar,
                    s.target.x,
                    s.target.y,
                    s.s_bar_point.x,
                    s.s_bar_point.y,
                ])?;
            }
        }
        sink.finish()?;
    }
    if scenario.output.bend {
        let mut sink = CsvSink::create(&out_dir.join("bend.csv"), &BEND_HEADER)?;
        for f in &run.frames {
            match f.bend {
                BendLocation::At { s, peak } => {
                    let p = point_at(&f.state.position, ds, s);
                    sink.numbers(&[f.t, s, p.x, p.y, peak])?;
                }
                BendLocation::NoBend => sink.numbers(&[f.t, f64::NAN, f64::NAN, f64::NAN, 0.0])?,
            }
        }
        sink.finish()?;
    }
    write_json(&out_dir.join("summary.json"), &run.summary)
}

/// Load, simulate and write a scenario. A numerical failure still writes the
/// frames produced so far and a failed summary before returning the error.
pub fn run_scenario(config: &Path, overrides: &[String], out_dir: &Path) -> Result<RunSummary> {
    let scenario = Scenario::load(config, overrides)?;
    let mut run = simulate(&scenario)?;
    write_outputs(&scenario, &run, out_dir)?;
    match run.failure.take() {
        Some(e) => Err(e),
        None => Ok(run.summary),
    }
}
