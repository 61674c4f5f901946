use octoarm::environment::{drag_force, DragParams};
use octoarm::rod::{nodal_curvature, Loads, RodModel};
use octoarm::runner::ClosedLoop;
use octoarm::scenario::Scenario;
use octoarm::sensing::{control_couple, default_step_width, gain_profile, sense};
use octoarm::{InitialShape, RodGeometry, RodState, Vec2};
use proptest::prelude::*;

fn model() -> RodModel {
    RodModel::new(RodGeometry::default()).unwrap()
}

/// Smooth random curvature `sum a_k sin(k pi s / L + p_k)` with small random
/// node velocities.
fn random_state(model: &RodModel, amps: &[f64], phases: &[f64], vel: f64, seed: u64) -> RodState {
    let g = model.geometry();
    let kappa: Vec<f64> = g
        .node_arclengths()
        .iter()
        .map(|&s| {
            amps.iter()
                .zip(phases)
                .enumerate()
                .map(|(k, (a, p))| a * ((k + 1) as f64 * std::f64::consts::PI * s / g.rest_length + p).sin())
                .sum()
        })
        .collect();
    let mut state = model.state_from_curvature(&kappa);
    let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (x >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    for i in 1..state.n_nodes() {
        state.velocity[i] = Vec2::new(vel * next(), vel * next());
        state.angular_velocity[i] = 10.0 * vel * next();
    }
    state
}

fn loop_for(toml: &str) -> ClosedLoop {
    ClosedLoop::from_scenario(&Scenario::from_toml_str(toml, &[]).unwrap()).unwrap()
}

#[test]
fn passive_energy_never_increases() {
    let m = model();
    let drag = DragParams::default();
    let mut state = m
        .init(&InitialShape::GaussianBump {
            peak: 15.0,
            center: 0.1,
            width: 0.02,
        })
        .unwrap();
    let dt = m.geometry().stable_dt();
    let loads = Loads {
        drag: Some(&drag),
        ..Loads::NONE
    };
    let mut e = m.total_energy(&state);
    let e0 = e;
    let steps = (1.0 / dt).ceil() as usize;
    for k in 0..steps {
        m.step_in_place(&mut state, &loads, dt).unwrap();
        let next = m.total_energy(&state);
        assert!(next <= e + 1e-9, "energy rose at step {k}: {e} -> {next}");
        e = next;
    }
    assert!(e < e0);
}

#[test]
fn clamp_holds_under_load() {
    let lp = loop_for(
        r#"
        [environment.target]
        position = [0.05, 0.1]
        [integration]
        duration = 0.1
        "#,
    );
    let mut state = lp.model().init(&InitialShape::Straight).unwrap();
    for _ in 0..200 {
        lp.step(&mut state, 1.6e-4).unwrap();
        assert_eq!(state.position[0], Vec2::ZERO);
        assert_eq!(state.theta[0], 0.0);
        assert_eq!(state.velocity[0], Vec2::ZERO);
    }
}

#[test]
fn mirrored_run_is_mirror_image() {
    let cfg = |y: f64, oy: f64| {
        format!(
            r#"
            [environment.drag]
            enabled = true
            [environment.target]
            position = [0.1, {y}]
            velocity = [0.0, {vy}]
            [[environment.obstacles]]
            center = [0.08, {oy}]
            radius = 0.01
            [integration]
            duration = 0.3
            "#,
            vy = 0.1 * y.signum(),
        )
    };
    let a = loop_for(&cfg(0.08, 0.03));
    let b = loop_for(&cfg(-0.08, -0.03));
    let init = a
        .model()
        .init(&InitialShape::GaussianBump {
            peak: 5.0,
            center: 0.05,
            width: 0.02,
        })
        .unwrap();
    let mut sa = init.clone();
    let mut sb = init.mirrored();
    let dt = a.model().geometry().stable_dt();
    for _ in 0..(0.3 / dt) as usize {
        a.step(&mut sa, dt).unwrap();
        b.step(&mut sb, dt).unwrap();
    }
    let ma = sa.mirrored();
    for i in 0..sa.n_nodes() {
        assert!((ma.position[i] - sb.position[i]).norm() < 1e-10);
        assert!((ma.theta[i] - sb.theta[i]).abs() < 1e-10);
        assert!((ma.curvature[i] - sb.curvature[i]).abs() < 1e-10);
    }
}

#[test]
fn sensory_kinematics_on_dynamic_snapshot() {
    let lp = loop_for(
        r#"
        [control]
        gain = 50.0
        [environment.target]
        position = [0.1, 0.05]
        [integration]
        duration = 0.5
        "#,
    );
    let mut state = lp.model().init(&InitialShape::Straight).unwrap();
    let dt = lp.model().geometry().stable_dt();
    for _ in 0..(0.5 / dt) as usize {
        lp.step(&mut state, dt).unwrap();
    }
    let ds = lp.model().ds();
    let r = sense(&state, ds, Vec2::new(0.1, 0.05));
    let rho_min = r.min_distance();
    let kmax = state.curvature.iter().fold(0.0f64, |a, k| a.max(k.abs()));
    let stretch = state.max_stretch_deviation(ds);
    for i in 0..state.n_nodes() - 1 {
        if r.distance[i].min(r.distance[i + 1]) < 5.0 * ds {
            continue;
        }
        let fd = (r.distance[i + 1] - r.distance[i]) / ds;
        let mid = -0.5 * (r.bearing[i].cos() + r.bearing[i + 1].cos());
        let bound = 2.0 * ds * (kmax + 1.0 / rho_min) + 2.0 * stretch + 1e-3;
        assert!((fd - mid).abs() < bound, "node {i}: {fd} vs {mid}, bound {bound}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn drag_power_is_non_positive(
        amps in prop::collection::vec(-20.0..20.0f64, 3),
        phases in prop::collection::vec(0.0..6.3f64, 3),
        vel in 0.0..2.0f64,
        seed in any::<u64>(),
    ) {
        let m = model();
        let s = random_state(&m, &amps, &phases, vel, seed);
        let f = drag_force(&s, &DragParams::default(), m.geometry());
        for i in 0..s.n_nodes() {
            prop_assert!(f[i].dot(s.velocity[i]) <= 0.0);
        }
    }

    #[test]
    fn stored_curvature_matches_angle_differences(
        amps in prop::collection::vec(-20.0..20.0f64, 3),
        phases in prop::collection::vec(0.0..6.3f64, 3),
    ) {
        let m = model();
        let s = random_state(&m, &amps, &phases, 0.0, 0);
        let ds = m.ds();
        // forward differences against the stored centred values
        let ks = nodal_curvature(&s.curvature, ds);
        let bound = 10.0 * ds * ks.iter().fold(0.0f64, |a, k| a.max(k.abs())) + 1e-9;
        for i in 0..s.n_nodes() - 1 {
            let fwd = (s.theta[i + 1] - s.theta[i]) / ds;
            prop_assert!((fwd - s.curvature[i]).abs() <= bound);
        }
    }

    #[test]
    fn bearing_reconstructs_target_direction(
        amps in prop::collection::vec(-30.0..30.0f64, 3),
        phases in prop::collection::vec(0.0..6.3f64, 3),
        tx in -0.4..0.4f64,
        ty in -0.4..0.4f64,
    ) {
        let m = model();
        let s = random_state(&m, &amps, &phases, 0.0, 0);
        let target = Vec2::new(tx, ty);
        let r = sense(&s, m.ds(), target);
        for i in 0..s.n_nodes() {
            if r.distance[i] == 0.0 {
                continue;
            }
            let rebuilt = Vec2::from_angle(s.theta[i]).rotate(r.bearing[i]);
            let unit = r.target_vector[i] * (1.0 / r.distance[i]);
            prop_assert!((rebuilt.x - unit.x).abs() < 1e-12);
            prop_assert!((rebuilt.y - unit.y).abs() < 1e-12);
        }
    }

    #[test]
    fn sensing_is_rotation_invariant(
        amps in prop::collection::vec(-30.0..30.0f64, 3),
        phases in prop::collection::vec(0.0..6.3f64, 3),
        tx in -0.4..0.4f64,
        ty in -0.4..0.4f64,
        angle in -3.1..3.1f64,
    ) {
        let m = model();
        let g = m.geometry();
        let s = random_state(&m, &amps, &phases, 0.0, 0);
        let target = Vec2::new(tx, ty);
        let a = sense(&s, m.ds(), target);
        let b = sense(&s.rotated(angle), m.ds(), target.rotate(angle));
        prop_assert_eq!(a.closest_index, b.closest_index);
        let w = default_step_width(g);
        let ga = gain_profile(a.closest_s, g, 1000.0, w);
        let gb = gain_profile(b.closest_s, g, 1000.0, w);
        let ua = control_couple(&a, &ga);
        let ub = control_couple(&b, &gb);
        for i in 0..s.n_nodes() {
            let d = octoarm::wrap_angle(a.bearing[i] - b.bearing[i]);
            prop_assert!(d.abs() < 1e-10);
            prop_assert!((ga[i] - gb[i]).abs() < 1e-10);
            prop_assert!((ua.couple[i] - ub.couple[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn muscle_split_partitions_the_couple(
        amps in prop::collection::vec(-30.0..30.0f64, 3),
        phases in prop::collection::vec(0.0..6.3f64, 3),
        tx in -0.4..0.4f64,
        ty in -0.4..0.4f64,
    ) {
        let m = model();
        let g = m.geometry();
        let s = random_state(&m, &amps, &phases, 0.0, 0);
        let r = sense(&s, m.ds(), Vec2::new(tx, ty));
        let gain = gain_profile(r.closest_s, g, 1000.0, default_step_width(g));
        let c = control_couple(&r, &gain);
        for i in 0..s.n_nodes() {
            prop_assert_eq!(c.top[i] * c.bottom[i], 0.0);
            prop_assert!(c.top[i] >= 0.0 && c.bottom[i] <= 0.0);
            prop_assert_eq!(c.top[i] + c.bottom[i], c.couple[i]);
        }
    }
}
