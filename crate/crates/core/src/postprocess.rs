//! Bend-point tracking and zero-phase smoothing of its speed.

use std::f64::consts::{PI, SQRT_2};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Location of the curvature peak along the arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BendLocation {
    At { s: f64, peak: f64 },
    NoBend,
}

impl BendLocation {
    pub fn arclength(&self) -> Option<f64> {
        match self {
            BendLocation::At { s, .. } => Some(*s),
            BendLocation::NoBend => None,
        }
    }
}

/// Arclength of the largest `|kappa|` on a uniform grid of spacing `ds`,
/// refined by the vertex of the parabola through the peak and its neighbours.
/// The first of several equal maxima wins.
pub fn bend_location(curvature: &[f64], ds: f64) -> Result<BendLocation> {
    if curvature.is_empty() {
        return Err(Error::InvalidInput("empty curvature profile".into()));
    }
    let mut best = 0;
    for (i, k) in curvature.iter().enumerate() {
        if k.abs() > curvature[best].abs() {
            best = i;
        }
    }
    let peak = curvature[best].abs();
    if peak == 0.0 {
        return Ok(BendLocation::NoBend);
    }
    let mut offset = 0.0;
    if best > 0 && best + 1 < curvature.len() {
        let (l, c, r) = (curvature[best - 1].abs(), peak, curvature[best + 1].abs());
        let denom = l - 2.0 * c + r;
        if denom < 0.0 {
            offset = (0.5 * (l - r) / denom).clamp(-0.5, 0.5);
        }
    }
    let s = (best as f64 + offset) * ds;
    let last = (curvature.len() - 1) as f64 * ds;
    Ok(BendLocation::At {
        s: s.clamp(0.0, last),
        peak,
    })
}

/// Lab-frame point at arclength `s` by linear interpolation between nodes.
pub fn point_at(position: &[Vec2], ds: f64, s: f64) -> Vec2 {
    let x = (s / ds).max(0.0);
    let i = (x.floor() as usize).min(position.len() - 1);
    if i + 1 >= position.len() {
        return position[position.len() - 1];
    }
    let w = x - i as f64;
    position[i] * (1.0 - w) + position[i + 1] * w
}

fn check_uniform(t: &[f64]) -> Result<f64> {
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    if !(dt > 0.0) || t.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-3 * dt) {
        return Err(Error::InvalidInput("samples must have a uniform cadence".into()));
    }
    Ok(dt)
}

/// Speed of a sampled lab-frame path: centred differences inside, one-sided
/// at the ends.
pub fn bend_velocity(t: &[f64], position: &[Vec2]) -> Result<Vec<f64>> {
    if t.len() < 3 || t.len() != position.len() {
        return Err(Error::InvalidInput("need at least 3 matching samples".into()));
    }
    let dt = check_uniform(t)?;
    let n = t.len();
    Ok((0..n)
        .map(|i| {
            let (a, b, span) = if i == 0 {
                (0, 1, dt)
            } else if i == n - 1 {
                (n - 2, n - 1, dt)
            } else {
                (i - 1, i + 1, 2.0 * dt)
            };
            (position[b] - position[a]).norm() / span
        })
        .collect())
}

/// Second-order Butterworth low-pass in direct form II transposed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    /// Bilinear transform with the cut-off prewarped onto the digital axis.
    pub fn butterworth_lowpass(cutoff: f64, sample_rate: f64) -> Result<Self> {
        if !(cutoff > 0.0 && sample_rate > 2.0 * cutoff) {
            return Err(Error::InvalidInput(format!(
                "sample rate {sample_rate} Hz must exceed twice the cut-off {cutoff} Hz"
            )));
        }
        let k = (PI * cutoff / sample_rate).tan();
        let norm = 1.0 + SQRT_2 * k + k * k;
        let b0 = k * k / norm;
        Ok(Biquad {
            b: [b0, 2.0 * b0, b0],
            a: [1.0, 2.0 * (k * k - 1.0) / norm, (1.0 - SQRT_2 * k + k * k) / norm],
        })
    }

    /// Steady-state delay line for a unit step.
    fn step_state(&self) -> [f64; 2] {
        let dc = (self.b[0] + self.b[1] + self.b[2]) / (self.a[0] + self.a[1] + self.a[2]);
        let z1 = self.b[2] - self.a[2] * dc;
        let z0 = self.b[1] - self.a[1] * dc + z1;
        [z0, z1]
    }

    fn run(&self, x: &[f64], mut z: [f64; 2]) -> Vec<f64> {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        x.iter()
            .map(|&xi| {
                let y = b0 * xi + z[0];
                z[0] = b1 * xi - a1 * y + z[1];
                z[1] = b2 * xi - a2 * y;
                y
            })
            .collect()
    }

    /// Forward-backward filtering with odd extension of `3 * order + 3`
    /// samples at each end and steady-state initial conditions.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>> {
        let pad = PADLEN;
        if x.len() <= pad {
            return Err(Error::InvalidInput(format!(
                "series of {} samples is shorter than the filter warm-up ({} samples)",
                x.len(),
                pad + 1
            )));
        }
        let n = x.len();
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));
        let zi = self.step_state();
        let scaled = |z: [f64; 2], v: f64| [z[0] * v, z[1] * v];
        let fwd = self.run(&ext, scaled(zi, ext[0]));
        let rev: Vec<f64> = fwd.iter().rev().copied().collect();
        let back = self.run(&rev, scaled(zi, rev[0]));
        Ok(back.iter().rev().skip(pad).take(n).copied().collect())
    }

    /// Magnitude response at frequency `f`.
    pub fn gain_at(&self, f: f64, sample_rate: f64) -> f64 {
        let w = 2.0 * PI * f / sample_rate;
        let eval = |c: &[f64; 3]| {
            let re = c[0] + c[1] * w.cos() + c[2] * (2.0 * w).cos();
            let im = -c[1] * w.sin() - c[2] * (2.0 * w).sin();
            (re * re + im * im).sqrt()
        };
        eval(&self.b) / eval(&self.a)
    }
}

const PADLEN: usize = 9;

pub const DEFAULT_CUTOFF_HZ: f64 = 1.0;

/// Zero-phase second-order Butterworth low-pass.
pub fn lowpass(series: &[f64], sample_rate: f64, cutoff: f64) -> Result<Vec<f64>> {
    Biquad::butterworth_lowpass(cutoff, sample_rate)?.filtfilt(series)
}

/// Number of strict interior local maxima after dropping `margin` samples at
/// each end. Plateaus count once.
pub fn count_local_maxima(series: &[f64], margin: usize) -> usize {
    if series.len() <= 2 * margin {
        return 0;
    }
    let mut core: Vec<f64> = series[margin..series.len() - margin].to_vec();
    core.dedup();
    core.windows(3).filter(|w| w[1] > w[0] && w[1] > w[2]).count()
}

#[derive(Debug, Clone, Serialize)]
pub struct BendTrack {
    pub t: Vec<f64>,
    pub s_bend: Vec<f64>,
    pub position: Vec<Vec2>,
    pub peak_curvature: Vec<f64>,
    pub speed: Vec<f64>,
    pub filtered_speed: Vec<f64>,
}

impl BendTrack {
    /// Filtered-speed maxima after discarding `margin_time` at each end.
    pub fn speed_peaks(&self, margin_time: f64) -> usize {
        if self.t.len() < 2 {
            return 0;
        }
        let dt = self.t[1] - self.t[0];
        let margin = (margin_time / dt).round() as usize;
        count_local_maxima(&self.filtered_speed, margin)
    }
}

/// One sampled rod configuration.
#[derive(Debug, Clone)]
pub struct RodFrame {
    pub t: f64,
    pub position: Vec<Vec2>,
    pub curvature: Vec<f64>,
}

/// Track the bend through uniformly spaced frames. Frames before the first
/// bend appears are skipped; losing the bend afterwards is an error.
pub fn track_bend(frames: &[RodFrame], ds: f64, cutoff: f64) -> Result<BendTrack> {
    let mut track = BendTrack {
        t: Vec::new(),
        s_bend: Vec::new(),
        position: Vec::new(),
        peak_curvature: Vec::new(),
        speed: Vec::new(),
        filtered_speed: Vec::new(),
    };
    for f in frames {
        match bend_location(&f.curvature, ds)? {
            BendLocation::At { s, peak } => {
                track.t.push(f.t);
                track.s_bend.push(s);
                track.position.push(point_at(&f.position, ds, s));
                track.peak_curvature.push(peak);
            }
            BendLocation::NoBend if track.t.is_empty() => {}
            BendLocation::NoBend => {
                return Err(Error::InvalidInput(format!("bend lost at t = {}", f.t)));
            }
        }
    }
    track.speed = bend_velocity(&track.t, &track.position)?;
    let rate = 1.0 / check_uniform(&track.t)?;
    track.filtered_speed = lowpass(&track.speed, rate, cutoff)?;
    Ok(track)
}
