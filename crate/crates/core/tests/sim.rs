use interact_core::environment::{Contact, EnvGeometry, EnvParams, TaskDirection};
use interact_core::model::{Link, RobotModel, RobotState};
use interact_core::sim::{
    apply_torque_tracking, run_episode, Controller, EpisodeSetup, Measurement, NoiseConfig, NormalSpring, Setpoint,
    SimConfig, SimLog, TorqueTrackingGains, TrackedQuantity, World,
};
use interact_core::Error;
use nalgebra::{DVector, Vector2};

fn two_link() -> RobotModel {
    let link = |mass, length| Link {
        mass,
        length,
        com: 0.5 * length,
        inertia: mass * length * length / 12.0,
    };
    RobotModel::fixed_arm(vec![link(2.0, 0.5), link(1.0, 0.4)], 0.0, 9.81)
}

/// Prismatic base with no links: the end-effector is the base itself.
fn cart(mass: f64) -> RobotModel {
    RobotModel {
        base_mass: Some(mass),
        links: vec![],
        friction: vec![0.0],
        actuated: vec![0],
        base_dofs: 1,
        torque_limits: vec![f64::INFINITY],
        joint_limits: vec![(f64::NEG_INFINITY, f64::INFINITY)],
        ..RobotModel::fixed_arm(vec![], 0.0, 9.81)
    }
}

fn x_line() -> EnvGeometry {
    EnvGeometry::line(Vector2::zeros(), TaskDirection::new(Vector2::x()).unwrap())
}

#[test]
fn gravity_compensation_holds_still() {
    let model = two_link();
    let q = DVector::from_vec(vec![-0.7, 0.9]);
    let tau = model.gravity_terms(&q).unwrap();
    let mut w = World::new(model, RobotState::at_rest(q.clone()), None).unwrap();
    for _ in 0..1000 {
        w.step(&tau, 1e-3).unwrap();
    }
    assert!((&w.state.q - &q).amax() < 1e-6);
    assert!(w.state.qd.amax() < 1e-6);
}

#[test]
fn rigidly_held_spring_has_constant_force() {
    let model = two_link();
    let q = DVector::from_vec(vec![-0.9, 1.2]);
    let params = EnvParams::new(0.5, 2.0, 300.0, 1.5, 0.05);
    let contact = Contact {
        params,
        geometry: x_line(),
    };
    let pose = model.ee_kinematics(&q).unwrap();
    let expected = params.k * (pose.position.x - params.x0) + params.f_s;
    // τ = g + Jᵀ v λ balances the environment reaction exactly.
    let j = model.ee_jacobian(&q).unwrap();
    let tau = model.gravity_terms(&q).unwrap() + j.transpose() * DVector::from_vec(vec![expected, 0.0]);
    let mut w = World::new(model, RobotState::at_rest(q), Some(contact)).unwrap();
    for _ in 0..500 {
        w.step(&tau, 1e-3).unwrap();
        assert!((w.lambda - expected).abs() < 1e-9, "{} vs {expected}", w.lambda);
    }
}

#[test]
fn mass_only_environment_moves_quadratically() {
    let (m_robot, m_env, force) = (1.0, 2.0, 3.0);
    let contact = Contact {
        params: EnvParams::new(m_env, 0.0, 0.0, 0.0, 0.0),
        geometry: x_line(),
    };
    let mut model = cart(m_robot);
    model.gravity = 0.0;
    let mut w = World::new(model, RobotState::at_rest(DVector::zeros(1)), Some(contact)).unwrap();
    let lambda = m_env * force / (m_robot + m_env);
    let tau = DVector::from_element(1, force);
    for i in 1..=1000 {
        w.step(&tau, 1e-3).unwrap();
        let t = i as f64 * 1e-3;
        assert!((w.lambda - lambda).abs() < 1e-12);
        assert!((w.env_coordinate - lambda * t * t / (2.0 * m_env)).abs() < 1e-6);
    }
}

#[test]
fn passive_energy_is_conserved() {
    let model = two_link();
    let mut w = World::new(model, RobotState::at_rest(DVector::from_vec(vec![-0.4, 0.8])), None).unwrap();
    let e0 = w.robot_energy().unwrap();
    let tau = DVector::zeros(2);
    for _ in 0..10_000 {
        w.step(&tau, 1e-3).unwrap();
    }
    assert!((w.robot_energy().unwrap() - e0).abs() < 1e-5);
}

#[test]
fn drift_beyond_tolerance_is_reported() {
    let contact = Contact {
        params: EnvParams::new(1.0, 0.0, 0.0, 0.0, 0.0),
        geometry: x_line(),
    };
    let mut w = World::new(cart(1.0), RobotState::at_rest(DVector::zeros(1)), Some(contact)).unwrap();
    w.env_coordinate += 1e-3;
    assert!(matches!(
        w.step(&DVector::zeros(1), 1e-3),
        Err(Error::ConstraintDrift(_))
    ));
}

#[test]
fn torque_tracking_contract() {
    let mut model = two_link();
    model.torque_limits = vec![5.0, 5.0];
    let tau = DVector::from_vec(vec![1.0, -2.0]);
    let q = DVector::from_vec(vec![0.3, 0.1]);
    let qd = DVector::from_vec(vec![0.0, 1.0]);
    let gains = TorqueTrackingGains {
        kp: vec![100.0, 100.0],
        kd: vec![10.0, 10.0],
    };
    assert_eq!(apply_torque_tracking(&model, &gains, &tau, &q, &qd, &q, &qd), tau);
    let zero = TorqueTrackingGains::zeros(2);
    let q2 = DVector::from_vec(vec![1.0, -1.0]);
    assert_eq!(apply_torque_tracking(&model, &zero, &tau, &q, &qd, &q2, &qd), tau);
    let out = apply_torque_tracking(&model, &gains, &tau, &q, &qd, &q2, &qd);
    assert_eq!(out.as_slice(), &[-5.0, 5.0]);
}

/// Fixed torques plus joint-space PD towards a fixed posture.
struct Hold {
    tau: DVector<f64>,
    q: DVector<f64>,
    ticks: usize,
}

impl Controller for Hold {
    fn tick(&mut self, _: &Measurement) -> interact_core::Result<()> {
        self.ticks += 1;
        Ok(())
    }

    fn setpoint(&self, _: f64) -> Setpoint {
        Setpoint {
            tau: self.tau.clone(),
            q: self.q.clone(),
            qd: DVector::zeros(self.q.len()),
        }
    }

    fn tracking_reference(&self) -> f64 {
        0.0
    }

    fn diagnostics(&self) -> Vec<(&'static str, f64)> {
        vec![("ticks", self.ticks as f64)]
    }
}

fn door_setup(duration: f64) -> (EpisodeSetup, Hold) {
    let model = two_link();
    let q = DVector::from_vec(vec![-0.9, 1.2]);
    let p0 = model.ee_kinematics(&q).unwrap().position;
    let radius = 0.6;
    let contact = Contact {
        params: EnvParams::new(1.5, 0.5, 0.0, 0.0, 0.0),
        geometry: EnvGeometry::Arc {
            hinge: p0 + Vector2::new(0.0, radius),
            radius,
            closed_angle: -std::f64::consts::FRAC_PI_2,
            ccw: true,
        },
    };
    let tau = model.gravity_terms(&q).unwrap() + DVector::from_vec(vec![0.5, 0.3]);
    let setup = EpisodeSetup {
        name: "hold".into(),
        model,
        initial: RobotState::at_rest(q.clone()),
        contact: Some(contact),
        normal_spring: Some(NormalSpring {
            stiffness: 2e3,
            damping: 40.0,
        }),
        duration,
        tracked: TrackedQuantity::DoorAngleDeg,
        gains: TorqueTrackingGains {
            kp: vec![30.0, 30.0],
            kd: vec![3.0, 3.0],
        },
    };
    (setup, Hold { tau, q, ticks: 0 })
}

#[test]
fn zero_length_episode_is_empty() {
    let (setup, mut c) = door_setup(0.0);
    let log = run_episode(&setup, &mut c, &SimConfig::default()).unwrap();
    assert!(log.is_empty());
}

#[test]
fn controller_runs_at_control_rate() {
    let (setup, mut c) = door_setup(0.5);
    let log = run_episode(&setup, &mut c, &SimConfig::default()).unwrap();
    assert_eq!(c.ticks, 100);
    assert_eq!(log.len(), 100);
    let t = log.column("t").unwrap();
    for w in t.windows(2) {
        assert!((w[1] - w[0] - 0.005).abs() < 1e-12);
    }
}

#[test]
fn energy_bookkeeping_balances() {
    let (setup, mut c) = door_setup(2.0);
    let log = run_episode(&setup, &mut c, &SimConfig::default()).unwrap();
    let col = |n: &str| log.column(n).unwrap();
    let (work, er, ee, diss, t) = (
        col("work"),
        col("robot_energy"),
        col("env_energy"),
        col("dissipated"),
        col("t"),
    );
    for i in 1..log.len() {
        let residual = work[i] - er[i] - ee[i] - diss[i];
        assert!(residual.abs() < 1e-3 * t[i], "t={} residual {residual}", t[i]);
    }
}

#[test]
fn same_seed_gives_identical_logs() {
    let config = SimConfig {
        noise: NoiseConfig {
            torque_std: 0.2,
            encoder_std: 1e-4,
        },
        seed: 7,
        ..SimConfig::default()
    };
    let run = || {
        let (setup, mut c) = door_setup(0.5);
        run_episode(&setup, &mut c, &config).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.to_binary(), b.to_binary());
    let other = {
        let (setup, mut c) = door_setup(0.5);
        run_episode(&setup, &mut c, &SimConfig { seed: 8, ..config }).unwrap()
    };
    assert_ne!(a.to_binary(), other.to_binary());
    assert_eq!(SimLog::from_binary(&a.to_binary()).unwrap(), a);
}

#[test]
fn failures_carry_episode_context() {
    let (mut setup, mut c) = door_setup(0.1);
    setup.gains.kp.pop();
    match run_episode(&setup, &mut c, &SimConfig::default()) {
        Err(Error::Episode { episode, .. }) => assert_eq!(episode, "hold"),
        other => panic!("{other:?}"),
    }
}
