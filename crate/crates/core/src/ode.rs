//! Adaptive Dormand-Prince 5(4) integration with a terminal event.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest allowed step; `None` lets the controller choose freely.
    pub max_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: None,
            max_steps: 1_000_000,
        }
    }
}

/// Samples of the solution at the requested output points (and at the event,
/// if one fired).
#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    /// Where the event function reached zero, if it did.
    pub event: Option<f64>,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand-Prince step; returns the 5th-order solution and the scaled
/// error norm.
fn dp_step<F>(f: &F, t: f64, y: &[f64], h: f64, opts: &OdeOptions) -> (Vec<f64>, f64)
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let n = y.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    let mut tmp = vec![0.0; n];
    for stage in 0..7 {
        for i in 0..n {
            let mut acc = y[i];
            for (j, kj) in k.iter().enumerate() {
                acc += h * A[stage][j] * kj[i];
            }
            tmp[i] = acc;
        }
        k.push(f(t + C[stage] * h, &tmp));
    }
    let mut y5 = vec![0.0; n];
    let mut err = 0.0;
    for i in 0..n {
        let mut hi = 0.0;
        let mut lo = 0.0;
        for s in 0..7 {
            hi += B5[s] * k[s][i];
            lo += B4[s] * k[s][i];
        }
        y5[i] = y[i] + h * hi;
        let scale = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
        let e = h * (hi - lo) / scale;
        err += e * e;
    }
    (y5, (err / n as f64).sqrt())
}

fn check_finite(t: f64, y: &[f64]) -> Result<()> {
    if y.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Instability {
            time: t,
            detail: "non-finite ODE state".into(),
        })
    }
}

/// Integrate `y' = f(t, y)` from `t0` through every point of `outputs`
/// (strictly increasing, all `>= t0`). Integration stops early at the first
/// zero of `event(t, y)` crossed from positive to non-positive, located to
/// round-off by bisection on the step length.
pub fn integrate<F, G>(
    f: F,
    t0: f64,
    y0: &[f64],
    outputs: &[f64],
    opts: &OdeOptions,
    event: Option<G>,
) -> Result<OdeSolution>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
    G: Fn(f64, &[f64]) -> f64,
{
    if outputs.windows(2).any(|w| w[1] <= w[0]) || outputs.first().is_some_and(|&t| t < t0) {
        return Err(Error::InvalidInput("output points must increase from t0".into()));
    }
    check_finite(t0, y0)?;
    let mut sol = OdeSolution {
        t: Vec::with_capacity(outputs.len()),
        y: Vec::with_capacity(outputs.len()),
        event: None,
    };
    let mut t = t0;
    let mut y = y0.to_vec();
    let span = outputs.last().map_or(0.0, |&t_end| t_end - t0);
    let mut h = if span > 0.0 { 1e-3 * span } else { 0.0 };
    let mut steps = 0;
    for &target in outputs {
        while t < target {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::Instability {
                    time: t,
                    detail: "ODE step limit exceeded".into(),
                });
            }
            let mut step = h.min(target - t);
            if let Some(hm) = opts.max_step {
                step = step.min(hm);
            }
            let (y_new, err) = dp_step(&f, t, &y, step, opts);
            if !(err <= 1.0) {
                let factor = if err.is_finite() {
                    (0.9 * err.powf(-0.2)).max(0.1)
                } else {
                    0.1
                };
                h = step * factor;
                if h < 1e-14 * (1.0 + t.abs()) {
                    return Err(Error::Instability {
                        time: t,
                        detail: "ODE step size underflow".into(),
                    });
                }
                continue;
            }
            let t_new = if step == target - t { target } else { t + step };
            if let Some(g) = &event {
                if g(t, &y) > 0.0 && g(t_new, &y_new) <= 0.0 {
                    let (te, ye) = locate_event(&f, g, t, &y, step, opts);
                    check_finite(te, &ye)?;
                    sol.event = Some(te);
                    sol.t.push(te);
                    sol.y.push(ye);
                    return Ok(sol);
                }
            }
            check_finite(t_new, &y_new)?;
            t = t_new;
            y = y_new;
            let grow = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).min(5.0)
            };
            // a step shortened to land on an output point says nothing about h
            if step >= h {
                h = step * grow;
            }
        }
        sol.t.push(t);
        sol.y.push(y.clone());
    }
    Ok(sol)
}

fn locate_event<F, G>(f: &F, g: &G, t: f64, y: &[f64], h: f64, opts: &OdeOptions) -> (f64, Vec<f64>)
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
    G: Fn(f64, &[f64]) -> f64,
{
    let (mut lo, mut hi) = (0.0, h);
    let mut best = dp_step(f, t, y, h, opts).0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (ym, _) = dp_step(f, t, y, mid, opts);
        if g(t + mid, &ym) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
            best = ym;
        }
    }
    (t + hi, best)
}

#[cfg(test)]
mod tests {
    use super::*;

    type NoEvent = fn(f64, &[f64]) -> f64;

    #[test]
    fn exponential_decay() {
        let out: Vec<f64> = (1..=10).map(|i| i as f64 * 0.5).collect();
        let sol = integrate(
            |_, y| vec![-y[0]],
            0.0,
            &[1.0],
            &out,
            &OdeOptions::default(),
            None::<NoEvent>,
        )
        .unwrap();
        for (t, y) in sol.t.iter().zip(&sol.y) {
            assert!((y[0] - (-t).exp()).abs() < 1e-10);
        }
        assert!(sol.event.is_none());
    }

    #[test]
    fn harmonic_oscillator_hits_output_points() {
        let out = [1.0, 2.0, std::f64::consts::PI];
        let sol = integrate(
            |_, y| vec![y[1], -y[0]],
            0.0,
            &[0.0, 1.0],
            &out,
            &OdeOptions::default(),
            None::<NoEvent>,
        )
        .unwrap();
        assert_eq!(sol.t, out);
        for (t, y) in sol.t.iter().zip(&sol.y) {
            assert!((y[0] - t.sin()).abs() < 1e-9);
            assert!((y[1] - t.cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn event_stops_integration() {
        // y = 1 - t reaches 0.25 at t = 0.75
        let sol = integrate(
            |_, _| vec![-1.0],
            0.0,
            &[1.0],
            &[0.5, 2.0],
            &OdeOptions::default(),
            Some(|_: f64, y: &[f64]| y[0] - 0.25),
        )
        .unwrap();
        let te = sol.event.unwrap();
        assert!((te - 0.75).abs() < 1e-12);
        assert_eq!(sol.t.len(), 2);
        assert!((sol.y[1][0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rejects_decreasing_outputs() {
        let r = integrate(
            |_, y| vec![y[0]],
            0.0,
            &[1.0],
            &[1.0, 0.5],
            &OdeOptions::default(),
            None::<NoEvent>,
        );
        assert!(r.is_err());
    }
}
