//! Experimental setups: door opening with a light or heavy door and lifting
//! an unmodelled payload.

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::environment::{Contact, EnvGeometry, EnvParams, TaskDirection};
use crate::error::{Error, Result};
use crate::model::{RobotModel, RobotState};
use crate::sim::{EpisodeSetup, NoiseConfig, NormalSpring, TorqueTrackingGains, TrackedQuantity};
use crate::traj::KinematicBounds;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(deny_unknown_fields)]
pub enum Task {
    /// Hinge above the handle at grasp; the door opens counter-clockwise by
    /// `opening_deg`. The controller starts from `prior_radius`.
    Door {
        radius: f64,
        opening_deg: f64,
        prior_radius: f64,
    },
    /// Raise the handle vertically by `height`.
    Lift { height: f64 },
}

impl Task {
    pub fn is_door(&self) -> bool {
        matches!(self, Task::Door { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub robot: RobotModel,
    /// Posture at grasp; unactuated coordinates are overwritten by
    /// [`Scenario::balanced`].
    pub initial_q: Vec<f64>,
    pub task: Task,
    /// True environment; `x0` is measured from the grasp point.
    pub environment: EnvParams,
    pub bounds: KinematicBounds,
    pub duration: f64,
    /// Time between grasp and the start of the motion, s.
    #[serde(default)]
    pub settle: f64,
    pub noise: NoiseConfig,
    pub normal_spring: NormalSpring,
}

/// Adjusts the unactuated coordinates of `q` until gravity exerts no
/// generalized force on them.
pub fn balance_unactuated(model: &RobotModel, q: &DVector<f64>) -> Result<DVector<f64>> {
    let n = model.dof();
    let free: Vec<usize> = (0..n).filter(|i| !model.actuated.contains(i)).collect();
    let mut q = q.clone();
    if free.is_empty() {
        return Ok(q);
    }
    let residual = |q: &DVector<f64>| -> Result<DVector<f64>> {
        let g = model.gravity_terms(q)?;
        Ok(DVector::from_iterator(free.len(), free.iter().map(|&i| g[i])))
    };
    for _ in 0..50 {
        let r = residual(&q)?;
        if r.amax() < 1e-12 {
            return Ok(q);
        }
        let mut jac = DMatrix::zeros(free.len(), free.len());
        for (c, &i) in free.iter().enumerate() {
            let h = 1e-7;
            let mut qp = q.clone();
            qp[i] += h;
            jac.set_column(c, &((residual(&qp)? - &r) / h));
        }
        let step = jac
            .lu()
            .solve(&r)
            .ok_or_else(|| Error::DegenerateGeometry("posture cannot be balanced".into()))?;
        for (c, &i) in free.iter().enumerate() {
            q[i] -= step[c];
        }
    }
    if residual(&q)?.amax() < 1e-9 {
        Ok(q)
    } else {
        Err(Error::DegenerateGeometry("posture cannot be balanced".into()))
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.robot.validate()?;
        if self.initial_q.len() != self.robot.dof() {
            return Err(Error::Dimension {
                what: "initial posture",
                expected: self.robot.dof(),
                got: self.initial_q.len(),
            });
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidParameter("episode length must be positive".into()));
        }
        if !(self.settle >= 0.0 && self.settle < self.duration) {
            return Err(Error::InvalidParameter(
                "settle time must lie within the episode".into(),
            ));
        }
        self.environment.validate()?;
        self.bounds.validate()?;
        let ok = match self.task {
            Task::Door {
                radius,
                opening_deg,
                prior_radius,
            } => radius > 0.0 && prior_radius > 0.0 && opening_deg > 0.0 && opening_deg < 180.0,
            Task::Lift { height } => height > 0.0 && height.is_finite(),
        };
        if !ok {
            return Err(Error::InvalidParameter("task dimensions must be positive".into()));
        }
        if !(self.noise.torque_std >= 0.0 && self.noise.encoder_std >= 0.0) {
            return Err(Error::InvalidParameter("noise levels must be non-negative".into()));
        }
        if !(self.normal_spring.stiffness > 0.0 && self.normal_spring.damping >= 0.0) {
            return Err(Error::InvalidParameter("normal spring must be stiff".into()));
        }
        Ok(())
    }

    /// Same scenario with the unactuated coordinates balanced.
    pub fn balanced(mut self) -> Result<Self> {
        self.validate()?;
        let q = balance_unactuated(&self.robot, &DVector::from_column_slice(&self.initial_q))?;
        self.initial_q = q.iter().copied().collect();
        Ok(self)
    }

    pub fn initial_state(&self) -> RobotState {
        RobotState::at_rest(DVector::from_column_slice(&self.initial_q))
    }

    pub fn grasp_point(&self) -> Result<Vector2<f64>> {
        Ok(self.robot.ee_kinematics(&self.initial_state().q)?.position)
    }

    /// True environment geometry, with the coordinate zero at grasp.
    pub fn true_geometry(&self) -> Result<EnvGeometry> {
        let p0 = self.grasp_point()?;
        Ok(match self.task {
            Task::Door { radius, .. } => EnvGeometry::Arc {
                hinge: p0 + Vector2::new(0.0, radius),
                radius,
                closed_angle: -std::f64::consts::FRAC_PI_2,
                ccw: true,
            },
            Task::Lift { .. } => EnvGeometry::line(p0, TaskDirection::new(Vector2::y())?),
        })
    }

    pub fn tracked(&self) -> TrackedQuantity {
        match self.task {
            Task::Door { .. } => TrackedQuantity::DoorAngleDeg,
            Task::Lift { .. } => TrackedQuantity::Coordinate,
        }
    }

    /// Final task value the reference settles at.
    pub fn target(&self) -> f64 {
        match self.task {
            Task::Door { opening_deg, .. } => opening_deg,
            Task::Lift { height } => height,
        }
    }

    pub fn episode_setup(&self, gains: TorqueTrackingGains, label: &str) -> Result<EpisodeSetup> {
        Ok(EpisodeSetup {
            name: format!("{}/{label}", self.name),
            model: self.robot.clone(),
            initial: self.initial_state(),
            contact: Some(Contact {
                params: self.environment,
                geometry: self.true_geometry()?,
            }),
            normal_spring: Some(self.normal_spring),
            duration: self.duration,
            tracked: self.tracked(),
            gains,
        })
    }
}

/// Arm posture of the built-in scenarios: elbow down, forearm raised.
const GRASP_POSTURE: [f64; 4] = [0.0, 0.0, -2.0, 1.0];

fn ballbot_scenario(name: &str, task: Task, environment: EnvParams, duration: f64) -> Scenario {
    Scenario {
        name: name.into(),
        robot: RobotModel::planar_ballbot(),
        initial_q: GRASP_POSTURE.to_vec(),
        task,
        environment,
        bounds: KinematicBounds {
            v_max: 0.15,
            a_max: 0.3,
        },
        duration,
        settle: 1.0,
        noise: NoiseConfig {
            torque_std: 0.3,
            encoder_std: 2e-5,
        },
        normal_spring: NormalSpring {
            stiffness: 2e4,
            damping: 300.0,
        },
    }
}

pub fn light_door() -> Scenario {
    let door = Task::Door {
        radius: 0.45,
        opening_deg: 70.0,
        prior_radius: 0.55,
    };
    ballbot_scenario("light_door", door, EnvParams::new(3.0, 40.0, 0.0, 4.0, 0.0), 10.0)
}

pub fn heavy_door() -> Scenario {
    let door = Task::Door {
        radius: 0.45,
        opening_deg: 70.0,
        prior_radius: 0.55,
    };
    ballbot_scenario("heavy_door", door, EnvParams::new(6.5, 60.0, 0.0, 10.0, 0.0), 10.0)
}

/// A 2 kg payload: pure inertia plus its weight as the static force.
pub fn lift() -> Scenario {
    let payload = 2.0;
    let robot = RobotModel::planar_ballbot();
    let weight = payload * robot.gravity;
    ballbot_scenario(
        "lift",
        Task::Lift { height: 0.25 },
        EnvParams::new(payload, 0.0, 0.0, weight, 0.0),
        12.0,
    )
}

/// The three built-in scenarios, balanced.
pub fn builtin() -> Result<Vec<Scenario>> {
    [light_door(), heavy_door(), lift()]
        .into_iter()
        .map(Scenario::balanced)
        .collect()
}
