//! Deterministic closed-loop simulation: physics at a fixed step, the
//! controller at the control rate, torque tracking in between.

pub mod log;
pub mod world;

pub use log::SimLog;
pub use world::{NormalSpring, World, CONSTRAINT_TOL};

use std::collections::VecDeque;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::environment::{Contact, EnvGeometry};
use crate::error::{Error, Result};
use crate::model::{RobotModel, RobotState};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Standard deviation of measured actuator torques, N·m.
    pub torque_std: f64,
    /// Standard deviation of encoder readings, rad or m.
    pub encoder_std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt_physics: f64,
    /// Hz
    pub control_rate: f64,
    pub noise: NoiseConfig,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt_physics: 1e-3,
            control_rate: 200.0,
            noise: NoiseConfig::default(),
            seed: 0,
        }
    }
}

impl SimConfig {
    /// Physics steps per control period.
    pub fn steps_per_tick(&self) -> Result<usize> {
        if !(self.dt_physics > 0.0 && self.control_rate > 0.0) {
            return Err(Error::InvalidParameter("step and control rate must be positive".into()));
        }
        let ratio = 1.0 / (self.control_rate * self.dt_physics);
        let k = ratio.round();
        if k < 1.0 || (ratio - k).abs() > 1e-9 * ratio {
            return Err(Error::InvalidParameter(
                "control period must be an integer multiple of the physics step".into(),
            ));
        }
        Ok(k as usize)
    }

    pub fn control_period(&self) -> f64 {
        1.0 / self.control_rate
    }

    pub fn validate(&self) -> Result<()> {
        self.steps_per_tick()?;
        if !(self.noise.torque_std >= 0.0 && self.noise.encoder_std >= 0.0) {
            return Err(Error::InvalidParameter("noise levels must be non-negative".into()));
        }
        Ok(())
    }
}

/// Joint-level PD gains of the torque-tracking loop, one per actuator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorqueTrackingGains {
    pub kp: Vec<f64>,
    pub kd: Vec<f64>,
}

impl TorqueTrackingGains {
    pub fn zeros(m: usize) -> Self {
        Self {
            kp: vec![0.0; m],
            kd: vec![0.0; m],
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if self.kp.len() != m || self.kd.len() != m {
            return Err(Error::Dimension {
                what: "tracking gains",
                expected: m,
                got: self.kp.len().min(self.kd.len()),
            });
        }
        if self.kp.iter().chain(&self.kd).any(|g| !(*g >= 0.0)) {
            return Err(Error::InvalidParameter("tracking gains must be non-negative".into()));
        }
        Ok(())
    }
}

/// `τ_ref = τ* + K_p (q* − q) + K_d (q̇* − q̇)` on the actuated coordinates,
/// clamped to the torque limits.
pub fn apply_torque_tracking(
    model: &RobotModel,
    gains: &TorqueTrackingGains,
    tau_star: &DVector<f64>,
    q_star: &DVector<f64>,
    qd_star: &DVector<f64>,
    q: &DVector<f64>,
    qd: &DVector<f64>,
) -> DVector<f64> {
    let mut tau = tau_star.clone();
    for (i, &c) in model.actuated.iter().enumerate() {
        tau[i] += gains.kp[i] * (q_star[c] - q[c]) + gains.kd[i] * (qd_star[c] - qd[c]);
    }
    model.saturate(&mut tau);
    tau
}

/// What the controller sees at a tick.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub t: f64,
    /// Encoder positions and finite-difference velocities.
    pub state: RobotState,
    /// Mean measured actuator torque over the last control period.
    pub tau_measured: DVector<f64>,
    pub period: f64,
    pub grasped: bool,
}

/// Plan values handed to the torque-tracking loop.
#[derive(Debug, Clone)]
pub struct Setpoint {
    pub tau: DVector<f64>,
    pub q: DVector<f64>,
    pub qd: DVector<f64>,
}

pub trait Controller {
    /// Runs at the control rate.
    fn tick(&mut self, meas: &Measurement) -> Result<()>;
    /// Interpolated plan at any time after the last tick.
    fn setpoint(&self, t: f64) -> Setpoint;
    /// Desired value of the tracked task quantity (door angle in degrees or
    /// coordinate in metres).
    fn tracking_reference(&self) -> f64;
    /// Named per-tick values appended to the log; names must not change
    /// between ticks.
    fn diagnostics(&self) -> Vec<(&'static str, f64)>;
}

/// How the task quantity is read off the true environment coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackedQuantity {
    /// Coordinate divided by the radius, in degrees.
    DoorAngleDeg,
    /// The coordinate itself, in metres.
    Coordinate,
}

/// Everything needed to build the plant for one episode.
#[derive(Debug, Clone)]
pub struct EpisodeSetup {
    pub name: String,
    pub model: RobotModel,
    pub initial: RobotState,
    pub contact: Option<Contact>,
    pub normal_spring: Option<NormalSpring>,
    pub duration: f64,
    pub tracked: TrackedQuantity,
    pub gains: TorqueTrackingGains,
}

fn tracked_value(kind: TrackedQuantity, contact: Option<&Contact>, s: f64) -> f64 {
    match (kind, contact.map(|c| c.geometry)) {
        (TrackedQuantity::DoorAngleDeg, Some(EnvGeometry::Arc { radius, .. })) => (s / radius).to_degrees(),
        _ => s,
    }
}

/// Simulates one episode. The log holds one row per control tick.
pub fn run_episode(setup: &EpisodeSetup, controller: &mut dyn Controller, config: &SimConfig) -> Result<SimLog> {
    let wrap = |time: f64| {
        let name = setup.name.clone();
        move |e: Error| Error::Episode {
            episode: name,
            time,
            source: Box::new(e),
        }
    };
    config.validate().map_err(wrap(0.0))?;
    setup.gains.validate(setup.model.num_actuators()).map_err(wrap(0.0))?;
    if !(setup.duration >= 0.0) {
        return Err(wrap(0.0)(Error::InvalidParameter(
            "episode length must be non-negative".into(),
        )));
    }
    let mut world = World::new(setup.model.clone(), setup.initial.clone(), setup.contact).map_err(wrap(0.0))?;
    if let Some(sp) = setup.normal_spring {
        world = world.with_normal_spring(sp);
    }
    let n = setup.model.dof();
    let m = setup.model.num_actuators();
    let per_tick = config.steps_per_tick()?;
    let dt = config.dt_physics;
    let steps = (setup.duration / dt).round() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let enc = Normal::new(0.0, config.noise.encoder_std).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let trq = Normal::new(0.0, config.noise.torque_std).map_err(|e| Error::InvalidParameter(e.to_string()))?;

    let mut history: VecDeque<DVector<f64>> = VecDeque::with_capacity(per_tick + 1);
    let mut tau_sum = DVector::zeros(m);
    let mut tau_count = 0usize;
    let mut tau_applied = DVector::zeros(m);
    let mut log: Option<SimLog> = None;
    let e_robot0 = world.robot_energy().map_err(wrap(0.0))?;
    let e_env0 = world.environment_energy().map_err(wrap(0.0))?;

    for i in 0..steps {
        let t = i as f64 * dt;
        let q_meas = world.state.q.map(|v| v + enc.sample(&mut rng));
        if history.is_empty() {
            for _ in 0..per_tick {
                history.push_back(q_meas.clone());
            }
        }
        let oldest = history.front().expect("non-empty history").clone();
        let qd_meas = (&q_meas - &oldest) / (per_tick as f64 * dt);
        history.push_back(q_meas.clone());
        if history.len() > per_tick {
            history.pop_front();
        }
        let measured = RobotState::new(q_meas.clone(), qd_meas.clone());

        if i % per_tick == 0 {
            let tau_measured = if tau_count > 0 {
                &tau_sum / tau_count as f64
            } else {
                DVector::zeros(m)
            };
            tau_sum.fill(0.0);
            tau_count = 0;
            let meas = Measurement {
                t,
                state: measured.clone(),
                tau_measured,
                period: config.control_period(),
                grasped: world.contact.is_some(),
            };
            controller.tick(&meas).map_err(wrap(t))?;
            let diag = controller.diagnostics();
            let log = log.get_or_insert_with(|| SimLog::new(log_columns(n, m, &diag)));
            let row = log_row(
                &world,
                &tau_applied,
                setup,
                controller.tracking_reference(),
                &diag,
                e_robot0,
                e_env0,
            )
            .map_err(wrap(t))?;
            log.push(row).map_err(wrap(t))?;
        }

        let sp = controller.setpoint(t);
        tau_applied = apply_torque_tracking(&setup.model, &setup.gains, &sp.tau, &sp.q, &sp.qd, &q_meas, &qd_meas);
        for (acc, v) in tau_sum.iter_mut().zip(tau_applied.iter()) {
            *acc += v + trq.sample(&mut rng);
        }
        tau_count += 1;
        world.step(&tau_applied, dt).map_err(wrap(t))?;
    }
    Ok(log.unwrap_or_default())
}

fn log_columns(n: usize, m: usize, diag: &[(&'static str, f64)]) -> Vec<String> {
    let mut c = vec!["t".to_string()];
    c.extend((0..n).map(|i| format!("q{i}")));
    c.extend((0..n).map(|i| format!("qd{i}")));
    c.extend((0..m).map(|i| format!("tau{i}")));
    for name in [
        "ee_x",
        "ee_y",
        "ee_phi",
        "s",
        "lambda",
        "track",
        "track_ref",
        "work",
        "robot_energy",
        "env_energy",
        "dissipated",
    ] {
        c.push(name.into());
    }
    c.extend(diag.iter().map(|(k, _)| k.to_string()));
    c
}

fn log_row(
    world: &World,
    tau: &DVector<f64>,
    setup: &EpisodeSetup,
    track_ref: f64,
    diag: &[(&'static str, f64)],
    e_robot0: f64,
    e_env0: f64,
) -> Result<Vec<f64>> {
    let mut r = vec![world.time];
    r.extend(world.state.q.iter());
    r.extend(world.state.qd.iter());
    r.extend(tau.iter());
    let pose = world.model.ee_kinematics(&world.state.q)?;
    let s = world.kinematic_coordinate().unwrap_or(0.0);
    r.extend([
        pose.position.x,
        pose.position.y,
        pose.orientation,
        s,
        world.lambda,
        tracked_value(setup.tracked, world.contact.as_ref(), s),
        track_ref,
        world.actuator_work,
        world.robot_energy()? - e_robot0,
        world.environment_energy()? - e_env0,
        world.dissipated,
    ]);
    r.extend(diag.iter().map(|(_, v)| *v));
    Ok(r)
}
