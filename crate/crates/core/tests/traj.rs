use interact_core::environment::EnvGeometry;
use interact_core::traj::{plan, sample, KinematicBounds, PathSpec};
use interact_core::Error;
use nalgebra::Vector2;
use proptest::prelude::*;

fn line(len: f64) -> PathSpec {
    PathSpec::Line {
        start: Vector2::new(0.2, -0.1),
        end: Vector2::new(0.2 + 0.6 * len, -0.1 + 0.8 * len),
    }
}

fn door() -> PathSpec {
    PathSpec::Arc {
        center: Vector2::new(0.5, 1.0),
        radius: 0.45,
        angle_start: -std::f64::consts::FRAC_PI_2,
        angle_end: -std::f64::consts::FRAC_PI_2 + 70f64.to_radians(),
    }
}

#[test]
fn cruise_speed_is_exact() {
    let bounds = KinematicBounds { v_max: 1.0, a_max: 1.0 };
    let profile = plan(&line(4.0), &bounds, 0.0, 0.0).unwrap();
    assert_eq!(profile.duration(), 5.0);
    for t in [1.5, 2.5, 3.5] {
        let r = sample(&profile, t);
        assert_eq!(r.xd_d, 1.0);
        assert_eq!(r.xdd_d, 0.0);
    }
}

#[test]
fn holds_terminal_point() {
    let bounds = KinematicBounds {
        v_max: 0.15,
        a_max: 0.3,
    };
    let path = door();
    let profile = plan(&path, &bounds, 0.0, 0.0).unwrap();
    let r = sample(&profile, profile.duration() + 3.0);
    assert_eq!(r.x_d, path.length());
    assert_eq!(r.xd_d, 0.0);
    assert_eq!(r.xdd_d, 0.0);
    let opened = Vector2::new(0.5, 1.0) + 0.45 * Vector2::new(20f64.to_radians().cos(), -(70f64.to_radians().cos()));
    assert!((r.ee_pos - opened).norm() < 1e-12);
}

#[test]
fn holds_start_before_the_motion() {
    let bounds = KinematicBounds {
        v_max: 0.15,
        a_max: 0.3,
    };
    let profile = plan(&door(), &bounds, 0.0, 0.0).unwrap();
    let r = sample(&profile, -1.0);
    assert_eq!((r.x_d, r.xd_d, r.xdd_d), (0.0, 0.0, 0.0));
    assert_eq!(r.ee_pos, sample(&profile, 0.0).ee_pos);
}

#[test]
fn moving_start_brakes_in_time() {
    let bounds = KinematicBounds { v_max: 1.0, a_max: 2.0 };
    let profile = plan(&line(1.0), &bounds, 0.5, 0.8).unwrap();
    let end = sample(&profile, profile.duration());
    assert!((end.x_d - 1.0).abs() < 1e-12);
    assert_eq!(end.xd_d, 0.0);
    assert!(matches!(
        plan(&line(1.0), &bounds, 0.9, 1.0),
        Err(Error::InfeasibleProfile { .. })
    ));
}

#[test]
fn arc_coordinate_matches_reference_at_zero_error() {
    let bounds = KinematicBounds {
        v_max: 0.15,
        a_max: 0.3,
    };
    let path = door();
    let geometry: EnvGeometry = path.geometry();
    let profile = plan(&path, &bounds, 0.0, 0.0).unwrap();
    let steps = 400;
    for i in 0..=steps {
        let t = profile.duration() * i as f64 / steps as f64;
        let r = sample(&profile, t);
        assert!((geometry.coordinate(&r.ee_pos) - r.x_d).abs() < 1e-12);
        assert!((r.v.vector() - geometry.direction(&r.ee_pos).vector()).norm() < 1e-12);
        assert!((r.v.vector().dot(&r.ee_vel) - r.xd_d).abs() < 1e-12);
    }
}

fn path() -> impl Strategy<Value = PathSpec> {
    prop_oneof![
        (0.05f64..3.0).prop_map(line),
        (0.1f64..1.0, 0.1f64..3.0).prop_map(|(r, sweep)| PathSpec::Arc {
            center: Vector2::new(0.3, 0.9),
            radius: r,
            angle_start: -1.0,
            angle_end: -1.0 + sweep,
        }),
    ]
}

proptest! {
    #[test]
    fn sampled_references_are_consistent(
        path in path(),
        v_max in 0.05f64..1.5,
        a_max in 0.05f64..3.0,
    ) {
        let bounds = KinematicBounds { v_max, a_max };
        let profile = plan(&path, &bounds, 0.0, 0.0).unwrap();
        let n = 2000;
        let dt = profile.duration() / n as f64;
        let mut prev = sample(&profile, 0.0);
        prop_assert_eq!(prev.xd_d, 0.0);
        for i in 1..=n {
            let r = sample(&profile, i as f64 * dt);
            prop_assert!(r.xd_d <= v_max + 1e-9 && r.xd_d >= -1e-12);
            prop_assert!([-a_max, 0.0, a_max].contains(&r.xdd_d));
            // Continuity of position and speed.
            prop_assert!((r.x_d - prev.x_d).abs() <= v_max * dt + 1e-12);
            prop_assert!((r.xd_d - prev.xd_d).abs() <= a_max * dt + 1e-12);
            // The speed is the derivative of the position.
            let mid = 0.5 * (r.xd_d + prev.xd_d);
            prop_assert!(((r.x_d - prev.x_d) / dt - mid).abs() <= a_max * dt);
            prev = r;
        }
    }

    #[test]
    fn handle_velocity_is_the_derivative_of_position(path in path(), frac in 0.0f64..1.0) {
        let bounds = KinematicBounds { v_max: 0.3, a_max: 0.5 };
        let profile = plan(&path, &bounds, 0.0, 0.0).unwrap();
        let t = frac * profile.duration();
        let h = 1e-6;
        let fd = (sample(&profile, t + h).ee_pos - sample(&profile, t - h).ee_pos) / (2.0 * h);
        prop_assert!((fd - sample(&profile, t).ee_vel).norm() < 1e-6);
    }
}
