//! TOML robot and scenario files.
//!
//! A robot file holds the fields of [`RobotModel`] at top level. A scenario
//! file names a robot either by path (relative to the scenario file) or
//! inline as a `[robot]` table:
//!
//! ```toml
//! name = "heavy_door"
//! robot = "ballbot.toml"
//! initial_q = [0.0, 0.0, -2.0, 1.0]
//! duration = 10.0
//! settle = 1.0
//!
//! [task]
//! kind = "door"
//! radius = 0.45
//! opening_deg = 70.0
//! prior_radius = 0.55
//!
//! [environment]
//! kind = "door"
//! m = 6.5
//! b = 60.0
//! k = 0.0
//! f_s = 10.0
//!
//! [bounds]
//! v_max = 0.15
//! a_max = 0.3
//!
//! [noise]
//! torque_std = 0.3
//! encoder_std = 2e-5
//!
//! [normal_spring]
//! stiffness = 2e4
//! damping = 300.0
//! ```
//!
//! Environment kinds: `door` needs a door task; `payload` and `spring` need
//! a lift task (a spring is a line environment with `k > 0`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::{ControllerConfig, Scenario, Task};
use crate::environment::EnvParams;
use crate::error::{Error, Result};
use crate::model::RobotModel;
use crate::sim::{NoiseConfig, NormalSpring};
use crate::traj::KinematicBounds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentKind {
    Door,
    Payload,
    Spring,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    pub kind: EnvironmentKind,
    pub m: f64,
    pub b: f64,
    pub k: f64,
    pub f_s: f64,
    #[serde(default)]
    pub x0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RobotRef {
    Path(String),
    Inline(RobotModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub robot: RobotRef,
    pub initial_q: Vec<f64>,
    pub duration: f64,
    #[serde(default)]
    pub settle: f64,
    pub task: Task,
    pub environment: EnvironmentSpec,
    pub bounds: KinematicBounds,
    #[serde(default)]
    pub noise: NoiseConfig,
    pub normal_spring: NormalSpring,
}

fn toml_error(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

pub fn parse_robot(text: &str) -> Result<RobotModel> {
    let robot: RobotModel = toml::from_str(text).map_err(toml_error)?;
    robot.validate()?;
    Ok(robot)
}

pub fn load_robot(path: &Path) -> Result<RobotModel> {
    parse_robot(&std::fs::read_to_string(path)?)
}

/// Parses a scenario and balances its initial posture. Robot paths resolve
/// against `base_dir`; without one, only inline robots are accepted.
pub fn parse_scenario(text: &str, base_dir: Option<&Path>) -> Result<Scenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(toml_error)?;
    let robot = match file.robot {
        RobotRef::Inline(robot) => robot,
        RobotRef::Path(p) => match base_dir {
            Some(dir) => load_robot(&dir.join(p))?,
            None => return Err(Error::Config(format!("robot reference {p:?} cannot be resolved"))),
        },
    };
    let env = file.environment;
    let matches = matches!(
        (env.kind, &file.task),
        (EnvironmentKind::Door, Task::Door { .. })
            | (EnvironmentKind::Payload | EnvironmentKind::Spring, Task::Lift { .. })
    );
    if !matches {
        return Err(Error::Config(format!(
            "environment kind {:?} does not fit the task",
            env.kind
        )));
    }
    Scenario {
        name: file.name,
        robot,
        initial_q: file.initial_q,
        task: file.task,
        environment: EnvParams::new(env.m, env.b, env.k, env.f_s, env.x0),
        bounds: file.bounds,
        duration: file.duration,
        settle: file.settle,
        noise: file.noise,
        normal_spring: file.normal_spring,
    }
    .balanced()
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    parse_scenario(&std::fs::read_to_string(path)?, path.parent())
}

/// Scenario file with the robot inlined.
pub fn scenario_to_toml(scenario: &Scenario) -> Result<String> {
    let kind = match scenario.task {
        Task::Door { .. } => EnvironmentKind::Door,
        Task::Lift { .. } if scenario.environment.k > 0.0 => EnvironmentKind::Spring,
        Task::Lift { .. } => EnvironmentKind::Payload,
    };
    let env = scenario.environment;
    let file = ScenarioFile {
        name: scenario.name.clone(),
        robot: RobotRef::Inline(scenario.robot.clone()),
        initial_q: scenario.initial_q.clone(),
        duration: scenario.duration,
        settle: scenario.settle,
        task: scenario.task,
        environment: EnvironmentSpec {
            kind,
            m: env.m,
            b: env.b,
            k: env.k,
            f_s: env.f_s,
            x0: env.x0,
        },
        bounds: scenario.bounds,
        noise: scenario.noise,
        normal_spring: scenario.normal_spring,
    };
    toml::to_string(&file).map_err(toml_error)
}

pub fn robot_to_toml(robot: &RobotModel) -> Result<String> {
    toml::to_string(robot).map_err(toml_error)
}

/// Controller variant with its MPC and torque-tracking settings.
pub fn parse_controller(text: &str) -> Result<ControllerConfig> {
    let config: ControllerConfig = toml::from_str(text).map_err(toml_error)?;
    config.variant.validate()?;
    Ok(config)
}

pub fn load_controller(path: &Path) -> Result<ControllerConfig> {
    parse_controller(&std::fs::read_to_string(path)?)
}

pub fn controller_to_toml(config: &ControllerConfig) -> Result<String> {
    toml::to_string(config).map_err(toml_error)
}
