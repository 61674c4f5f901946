use octoarm::equilibrium::{
    closed_form_theta, default_gain_grid, integrate_equilibrium, integrate_slope_equilibrium, verify_reach,
    FeedbackGain,
};
use octoarm::pursuit::{unicycle_step, PursuitAgent, SteeringLaw};
use octoarm::sensing::default_gain;
use octoarm::{RodGeometry, Vec2};

fn uniform() -> RodGeometry {
    RodGeometry {
        tip_radius: RodGeometry::default().base_radius,
        ..RodGeometry::default()
    }
}

/// Independent check of the exact solution: the angle must satisfy
/// `theta_s = mu (m cos - sin) / sqrt(1 + m^2)` under a sharp cut-off.
#[test]
fn closed_form_solves_its_ode() {
    let (m, mu, sbar) = (1.0, 1000.0, 0.2);
    let h = 1e-6;
    for k in 1..200 {
        let s = 0.2 * k as f64 / 200.0;
        let d = (closed_form_theta(s + h, m, mu, sbar) - closed_form_theta(s - h, m, mu, sbar)) / (2.0 * h);
        let th = closed_form_theta(s, m, mu, sbar);
        let rhs = mu * (m * th.cos() - th.sin()) / (1.0f64 + m * m).sqrt();
        assert!((d - rhs).abs() < 1e-4 * (1.0 + rhs.abs()), "s = {s}: {d} vs {rhs}");
    }
}

#[test]
fn slope_ode_matches_closed_form_for_other_slopes() {
    let g = uniform();
    for &m in &[0.3, 2.0, -1.5] {
        let gain = FeedbackGain::new(default_gain(&g), g.rest_length, &g);
        let p = integrate_slope_equilibrium(m, &gain, &g, 2001).unwrap();
        // the smooth step halves the gain at s_bar; stay clear of it
        for (s, th) in p.s.iter().zip(&p.theta) {
            if *s < g.rest_length - 10.0 * gain.width {
                let exact = closed_form_theta(*s, m, gain.mu_tilde, f64::INFINITY);
                assert!((th - exact).abs() < 1e-6, "m = {m}, s = {s}");
            }
        }
    }
}

#[test]
fn unicycle_driven_by_curvature_retraces_centerline() {
    let g = RodGeometry::default();
    let target = Vec2::new(0.12, 0.08);
    let gain = FeedbackGain::new(default_gain(&g), g.rest_length, &g);
    let n = 10_001;
    let p = integrate_equilibrium(target.norm(), target.angle(), &gain, &g, n).unwrap();
    let kappa: Vec<f64> =
        p.s.iter()
            .zip(&p.alpha)
            .map(|(s, a)| gain.ratio(*s) * a.sin())
            .collect();
    let mut agent = PursuitAgent::new(Vec2::ZERO, 0.0, 1.0, 1.0, SteeringLaw::MotionCamouflage).unwrap();
    let mut worst = 0.0f64;
    // Simpson mean of the curvature over each pair of samples
    for i in (0..p.s.len() - 2).step_by(2) {
        let ds = p.s[i + 2] - p.s[i];
        let u = (kappa[i] + 4.0 * kappa[i + 1] + kappa[i + 2]) / 6.0;
        agent = unicycle_step(&agent, u, ds);
        worst = worst.max((agent.position - p.position[i + 2]).norm());
    }
    assert!(worst < 1e-6, "centerline mismatch {worst}");
}

#[test]
fn reach_sweep_monotone_on_default_grid() {
    let g = RodGeometry::default();
    for &(x, y) in &[(0.1, 0.0), (0.0, 0.1), (-0.05, 0.05), (0.06, -0.08)] {
        let t = Vec2::new(x, y);
        let r = verify_reach(t.norm(), t.angle(), 0.01 * g.rest_length, &default_gain_grid(&g), &g).unwrap();
        assert!(r.min_rho_non_increasing(), "target ({x}, {y})");
    }
}
