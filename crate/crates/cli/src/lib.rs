//! Subcommands behind the `octoarm` binary.

use std::path::{Path, PathBuf};

use serde_json::json;

use octoarm::equilibrium::{
    closed_form_theta, default_gain_grid, integrate_equilibrium, integrate_slope_equilibrium, verify_pointing,
    verify_reach, EquilibriumProfile, FeedbackGain, SweepReport,
};
use octoarm::output::{fmt_g9, write_json, CsvSink, Table};
use octoarm::postprocess::{track_bend, RodFrame};
use octoarm::pursuit::compare_with_baselines;
use octoarm::runner::{closest_point_trajectory, simulate, write_outputs, RunSummary};
use octoarm::scenario::{ControlMode, Scenario};
use octoarm::{Error, Result, Vec2};

/// Reach tolerance as a fraction of `L0`.
pub const REACH_TOLERANCE: f64 = 0.01;
/// Pointing tolerance on `1 - cos(alpha(L0))`.
pub const POINTING_TOLERANCE: f64 = 0.01;
pub const DEFAULT_CHI: f64 = 25.0;
pub const DEFAULT_CUTOFF_HZ: f64 = 1.0;
/// Sampling of exported equilibrium profiles.
pub const PROFILE_POINTS: usize = 1001;

/// Exit status for an error: 2 for numerical failures, 1 otherwise.
pub fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        2
    } else {
        1
    }
}

pub fn simulate_cmd(config: &Path, overrides: &[String], out: &Path) -> Result<RunSummary> {
    octoarm::runner::run_scenario(config, overrides, out)
}

fn write_profile(path: &Path, p: &EquilibriumProfile, closed_form: Option<(f64, f64)>) -> Result<f64> {
    let mut header = vec!["s_m", "rho_m", "alpha_rad", "theta_rad", "x_m", "y_m"];
    if closed_form.is_some() {
        header.push("theta_exact_rad");
    }
    let mut sink = CsvSink::create(path, &header)?;
    let mut max_err = 0.0f64;
    for i in 0..p.s.len() {
        let mut row = vec![
            p.s[i],
            p.rho[i],
            p.alpha[i],
            p.theta[i],
            p.position[i].x,
            p.position[i].y,
        ];
        if let Some((slope, mu)) = closed_form {
            let exact = closed_form_theta(p.s[i], slope, mu, p.gain.s_bar);
            max_err = max_err.max((exact - p.theta[i]).abs());
            row.push(exact);
        }
        sink.numbers(&row)?;
    }
    sink.finish()?;
    Ok(max_err)
}

fn write_sweep(path: &Path, report: &SweepReport) -> Result<()> {
    let mut sink = CsvSink::create(
        path,
        &[
            "mu_tilde_per_m",
            "min_rho_m",
            "tip_alignment",
            "captured_at_m",
            "success",
        ],
    )?;
    for r in &report.rows {
        sink.row(&[
            fmt_g9(r.mu_tilde),
            fmt_g9(r.min_rho),
            fmt_g9(r.tip_alignment),
            fmt_g9(r.captured_at.unwrap_or(f64::NAN)),
            u8::from(r.success).to_string(),
        ])?;
    }
    sink.finish()
}

/// Equilibrium profile at the configured gain plus the reach or pointing
/// sweep for the configured target (slope mode: profile against the exact
/// solution).
pub fn equilibrium_cmd(config: &Path, overrides: &[String], out: &Path) -> Result<serde_json::Value> {
    let scenario = Scenario::load(config, overrides)?;
    std::fs::create_dir_all(out)?;
    let geometry = scenario.geometry();
    let gain = FeedbackGain::new(scenario.gain(), geometry.rest_length, &geometry);
    let summary = match scenario.control.mode {
        ControlMode::Slope => {
            let slope = scenario.control.slope.unwrap_or(0.0);
            let profile = integrate_slope_equilibrium(slope, &gain, &geometry, PROFILE_POINTS)?;
            let err = write_profile(&out.join("profile.csv"), &profile, Some((slope, gain.mu_tilde)))?;
            json!({
                "mode": "slope",
                "slope": slope,
                "mu_tilde": gain.mu_tilde,
                "max_closed_form_error_rad": err,
                "tip_theta_rad": profile.theta.last(),
            })
        }
        _ => {
            let target = scenario
                .target()
                .ok_or_else(|| Error::field("environment.target", "required by `equilibrium`"))?
                .position;
            let rho0 = target.norm();
            let alpha0 = target.angle();
            let profile = integrate_equilibrium(rho0, alpha0, &gain, &geometry, PROFILE_POINTS)?;
            write_profile(&out.join("profile.csv"), &profile, None)?;
            let gains = default_gain_grid(&geometry);
            let (kind, report) = if rho0 <= geometry.rest_length {
                let tol = REACH_TOLERANCE * geometry.rest_length;
                ("reach", verify_reach(rho0, alpha0, tol, &gains, &geometry)?)
            } else {
                (
                    "pointing",
                    verify_pointing(rho0, alpha0, POINTING_TOLERANCE, &gains, &geometry)?,
                )
            };
            write_sweep(&out.join("sweep.csv"), &report)?;
            json!({
                "mode": "target",
                "rho0": rho0,
                "alpha0": alpha0,
                "mu_tilde": gain.mu_tilde,
                "min_rho": profile.min_rho(),
                "tip_alignment": profile.tip_alignment(),
                "captured_at": profile.captured_at,
                "sweep": kind,
                "found_mu_tilde": report.found,
                "min_rho_non_increasing": report.min_rho_non_increasing(),
            })
        }
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Simulate a moving-target scenario and compare the closest-point path with
/// the unicycle baselines.
pub fn pursue_cmd(config: &Path, overrides: &[String], out: &Path, chi: f64) -> Result<serde_json::Value> {
    let scenario = Scenario::load(config, overrides)?;
    let target = scenario
        .target()
        .ok_or_else(|| Error::field("environment.target", "required by `pursue`"))?;
    let mut run = simulate(&scenario)?;
    write_outputs(&scenario, &run, out)?;
    if let Some(e) = run.failure.take() {
        return Err(e);
    }
    let reference = closest_point_trajectory(&run);
    let cmp = compare_with_baselines(&reference, target.position, target.velocity, chi)?;
    let mut sink = CsvSink::create(
        &out.join("pursuit.csv"),
        &[
            "t_s",
            "rod_x_m",
            "rod_y_m",
            "mc_x_m",
            "mc_y_m",
            "cp_x_m",
            "cp_y_m",
            "target_x_m",
            "target_y_m",
        ],
    )?;
    for (i, &t) in reference.t.iter().enumerate() {
        let r = reference.position[i];
        let mc = cmp
            .motion_camouflage
            .position
            .get(i)
            .copied()
            .unwrap_or(Vec2::new(f64::NAN, f64::NAN));
        let cp = cmp
            .classical_pursuit
            .position
            .get(i)
            .copied()
            .unwrap_or(Vec2::new(f64::NAN, f64::NAN));
        let tg = target.position + target.velocity * t;
        sink.numbers(&[t, r.x, r.y, mc.x, mc.y, cp.x, cp.y, tg.x, tg.y])?;
    }
    sink.finish()?;
    let summary = json!({
        "chi": chi,
        "speed": cmp.speed,
        "initial_heading": cmp.initial_heading,
        "rms_motion_camouflage": cmp.rms_motion_camouflage,
        "rms_classical_pursuit": cmp.rms_classical_pursuit,
        "closer_to": if cmp.rms_classical_pursuit < cmp.rms_motion_camouflage { "classical_pursuit" } else { "motion_camouflage" },
    });
    write_json(&out.join("pursuit.json"), &summary)?;
    Ok(summary)
}

/// Rod frames from a `rod.csv`, plus the node spacing.
pub fn read_rod_frames(path: &Path) -> Result<(Vec<RodFrame>, f64)> {
    let table = Table::read(path)?;
    let (ct, cn, cs, cx, cy, ck) = (
        table.column("t_s")?,
        table.column("node")?,
        table.column("s_m")?,
        table.column("x_m")?,
        table.column("y_m")?,
        table.column("kappa_per_m")?,
    );
    let mut frames: Vec<RodFrame> = Vec::new();
    let mut ds = None;
    for row in &table.rows {
        if row[cn] == 0.0 {
            frames.push(RodFrame {
                t: row[ct],
                position: Vec::new(),
                curvature: Vec::new(),
            });
        }
        let frame = frames
            .last_mut()
            .ok_or_else(|| Error::InvalidInput(format!("{}: first row is not node 0", path.display())))?;
        if row[ct] != frame.t || row[cn] as usize != frame.position.len() {
            return Err(Error::InvalidInput(format!(
                "{}: rows out of order at t = {}",
                path.display(),
                row[ct]
            )));
        }
        if row[cn] == 1.0 && ds.is_none() {
            ds = Some(row[cs]);
        }
        frame.position.push(Vec2::new(row[cx], row[cy]));
        frame.curvature.push(row[ck]);
    }
    let ds = ds.ok_or_else(|| Error::InvalidInput(format!("{}: fewer than two nodes", path.display())))?;
    Ok((frames, ds))
}

/// Bend track of an existing run. `input` is a run directory or its `rod.csv`.
pub fn bendprofile_cmd(input: &Path, out: &Path, cutoff: f64) -> Result<serde_json::Value> {
    let path: PathBuf = if input.is_dir() {
        input.join("rod.csv")
    } else {
        input.to_path_buf()
    };
    if !path.exists() {
        return Err(Error::ConfigNotFound(path));
    }
    let (frames, ds) = read_rod_frames(&path)?;
    let track = track_bend(&frames, ds, cutoff)?;
    std::fs::create_dir_all(out)?;
    let mut sink = CsvSink::create(
        &out.join("bend_profile.csv"),
        &[
            "t_s",
            "s_bend_m",
            "bend_x_m",
            "bend_y_m",
            "kappa_peak_per_m",
            "speed_m_per_s",
            "filtered_speed_m_per_s",
        ],
    )?;
    for i in 0..track.t.len() {
        sink.numbers(&[
            track.t[i],
            track.s_bend[i],
            track.position[i].x,
            track.position[i].y,
            track.peak_curvature[i],
            track.speed[i],
            track.filtered_speed[i],
        ])?;
    }
    sink.finish()?;
    let (peak_i, peak) = track
        .filtered_speed
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, (i, v)| if v > a.1 { (i, v) } else { a });
    let summary = json!({
        "frames": track.t.len(),
        "cutoff_hz": cutoff,
        "peak_filtered_speed": peak,
        "peak_time": track.t.get(peak_i),
        "speed_peaks": track.speed_peaks(0.1),
    });
    write_json(&out.join("bend_summary.json"), &summary)?;
    Ok(summary)
}
