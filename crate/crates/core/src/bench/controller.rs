//! The three interaction controllers sharing one whole-body MPC: the
//! baseline with a door-frame PD force, identification (MIAC) and
//! model-reference adaptation (MRAC).

use nalgebra::{DVector, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::adaptive::{MracGains, MracState};
use crate::environment::{Contact, EnvGeometry, EnvParams, TaskDirection};
use crate::error::{Error, Result};
use crate::estimation::{
    extract_ee_force, DoorEstimator, DoorEstimatorConfig, MiacConfig, MiacFilterState, MomentumObserver,
    DEFAULT_MAX_JACOBIAN_CONDITION,
};
use crate::model::{EePose, RobotModel, RobotState};
use crate::mpc::slq::SlqSettings;
use crate::mpc::{Constraints, MpcCost, MpcModel, MpcReference, RecedingHorizon};
use crate::sim::{Controller, Measurement, Setpoint, TorqueTrackingGains};
use crate::traj::{self, KinematicBounds, PathSpec, Profile};

use super::scenario::{Scenario, Task};

/// Door estimates with a larger radius standard deviation are ignored, m.
const MAX_RADIUS_STD: f64 = 0.02;

/// Weights and solver budget of the shared MPC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcTuning {
    pub horizon: f64,
    pub nodes: usize,
    /// SLQ iterations per control tick.
    pub iterations: usize,
    /// Weights on joint positions, then on joint velocities.
    pub q_pos: Vec<f64>,
    pub q_vel: Vec<f64>,
    pub r: Vec<f64>,
    /// Weights on end-effector x, y and orientation.
    pub q_ee: [f64; 3],
    pub terminal_scale: f64,
    /// Index of the base coordinate whose reference follows the
    /// end-effector reference horizontally in door tasks.
    pub follow_base: Option<usize>,
}

impl MpcTuning {
    pub fn cost(&self) -> MpcCost {
        let q_ss: Vec<f64> = self.q_pos.iter().chain(&self.q_vel).copied().collect();
        MpcCost::diagonal(&q_ss, &self.r, self.q_ee, self.terminal_scale)
    }

    pub fn settings(&self) -> SlqSettings {
        SlqSettings {
            horizon: self.horizon,
            nodes: self.nodes,
            max_iterations: self.iterations,
            ..SlqSettings::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(deny_unknown_fields)]
pub enum VariantKind {
    /// PD force in the (radial, tangential) frame of the path.
    BaselinePd {
        k_radial: f64,
        k_tangential: f64,
        d_radial: f64,
        d_tangential: f64,
    },
    Miac {
        filter: MiacConfig,
        /// Momentum observer gain, 1/s.
        observer_gain: f64,
    },
    Mrac {
        gains: MracGains,
        /// Starting value of π̂.
        #[serde(default)]
        initial_estimate: [f64; 4],
    },
}

impl VariantKind {
    pub fn label(&self) -> &'static str {
        match self {
            VariantKind::BaselinePd { .. } => "baseline_pd",
            VariantKind::Miac { .. } => "miac",
            VariantKind::Mrac { .. } => "mrac",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            VariantKind::BaselinePd {
                k_radial,
                k_tangential,
                d_radial,
                d_tangential,
            } => {
                if [k_radial, k_tangential, d_radial, d_tangential]
                    .iter()
                    .any(|g| !(**g >= 0.0 && g.is_finite()))
                {
                    return Err(Error::InvalidParameter("PD gains must be non-negative".into()));
                }
                Ok(())
            }
            VariantKind::Miac { filter, observer_gain } => {
                MiacFilterState::new(filter)?;
                if !(*observer_gain > 0.0) {
                    return Err(Error::InvalidParameter("observer gain must be positive".into()));
                }
                Ok(())
            }
            VariantKind::Mrac {
                gains,
                initial_estimate,
            } => {
                if initial_estimate.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("initial estimate must be finite".into()));
                }
                gains.validate()
            }
        }
    }
}

/// Everything a controller instance is built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub variant: VariantKind,
    pub mpc: MpcTuning,
    pub tracking: TorqueTrackingGains,
    #[serde(default)]
    pub door: DoorEstimatorConfig,
}

enum VariantState {
    Baseline {
        k: [f64; 2],
        d: [f64; 2],
    },
    Miac {
        filter: MiacFilterState,
        observer: MomentumObserver,
        x2_prev: Option<f64>,
        lambda_hat: f64,
    },
    Mrac {
        state: MracState,
        sigma: f64,
        x_tilde: f64,
        adaptive: f64,
        pd: f64,
    },
}

enum TaskState {
    Door {
        estimator: DoorEstimator,
        prior_radius: f64,
        opening: f64,
        /// Hinge and radius the current profile was planned on.
        planned: Option<(Vector2<f64>, f64)>,
    },
    Lift,
}

pub struct TaskController {
    robot: RobotModel,
    variant: VariantState,
    task: TaskState,
    mpc: RecedingHorizon,
    cost: MpcCost,
    constraints: Constraints,
    tuning: MpcTuning,
    bounds: KinematicBounds,
    /// End-effector position and posture at grasp.
    p0: Vector2<f64>,
    q0: DVector<f64>,
    geometry: EnvGeometry,
    profile: Profile,
    profile_t0: f64,
    last: Option<Setpoint>,
    track_ref: f64,
    s: f64,
    failures: usize,
}

fn estimated_arc(p0: &Vector2<f64>, hinge: Vector2<f64>, radius: f64) -> EnvGeometry {
    let r = p0 - hinge;
    EnvGeometry::Arc {
        hinge,
        radius,
        closed_angle: r.y.atan2(r.x),
        ccw: true,
    }
}

fn path_of(geometry: &EnvGeometry, length: f64) -> PathSpec {
    match *geometry {
        EnvGeometry::Arc {
            hinge,
            radius,
            closed_angle,
            ccw,
        } => PathSpec::Arc {
            center: hinge,
            radius,
            angle_start: closed_angle,
            angle_end: closed_angle + if ccw { 1.0 } else { -1.0 } * length / radius,
        },
        EnvGeometry::Line { origin, direction } => PathSpec::Line {
            start: origin,
            end: origin + direction * length,
        },
    }
}

impl TaskController {
    pub fn new(scenario: &Scenario, config: &ControllerConfig) -> Result<Self> {
        config.variant.validate()?;
        let robot = scenario.robot.clone();
        let n = robot.dof();
        let q0 = DVector::from_column_slice(&scenario.initial_q);
        let p0 = robot.ee_kinematics(&q0)?.position;
        let cost = config.mpc.cost();
        cost.validate(n, robot.num_actuators())?;
        let settings = config.mpc.settings();
        settings.validate()?;
        let (task, geometry, length) = match scenario.task {
            Task::Door {
                prior_radius,
                opening_deg,
                ..
            } => {
                let hinge = p0 + Vector2::new(0.0, prior_radius);
                let geometry = estimated_arc(&p0, hinge, prior_radius);
                let opening = opening_deg.to_radians();
                let task = TaskState::Door {
                    estimator: DoorEstimator::new(config.door)?,
                    prior_radius,
                    opening,
                    planned: Some((hinge, prior_radius)),
                };
                (task, geometry, prior_radius * opening)
            }
            Task::Lift { height } => (
                TaskState::Lift,
                EnvGeometry::line(p0, TaskDirection::new(Vector2::y())?),
                height,
            ),
        };
        let profile = traj::plan(&path_of(&geometry, length), &scenario.bounds, 0.0, 0.0)?;
        let variant = match &config.variant {
            VariantKind::BaselinePd {
                k_radial,
                k_tangential,
                d_radial,
                d_tangential,
            } => VariantState::Baseline {
                k: [*k_radial, *k_tangential],
                d: [*d_radial, *d_tangential],
            },
            VariantKind::Miac { filter, observer_gain } => VariantState::Miac {
                filter: MiacFilterState::new(filter)?,
                observer: MomentumObserver::uniform(n, *observer_gain)?,
                x2_prev: None,
                lambda_hat: 0.0,
            },
            VariantKind::Mrac {
                gains,
                initial_estimate,
            } => VariantState::Mrac {
                state: MracState::new(*gains, 0.0)?.with_estimate(Vector4::from(*initial_estimate)),
                sigma: 0.0,
                x_tilde: 0.0,
                adaptive: 0.0,
                pd: 0.0,
            },
        };
        Ok(Self {
            constraints: Constraints::from_model(&robot),
            robot,
            variant,
            task,
            mpc: RecedingHorizon::new(settings),
            cost,
            tuning: config.mpc.clone(),
            bounds: scenario.bounds,
            p0,
            q0,
            geometry,
            profile,
            profile_t0: scenario.settle,
            last: None,
            track_ref: 0.0,
            s: 0.0,
            failures: 0,
        })
    }

    /// Number of ticks whose solve failed and reused the previous plan.
    pub fn failures(&self) -> usize {
        self.failures
    }

    /// Folds the new handle position into the door estimate and re-plans the
    /// profile on the current circle from the present reference state.
    fn update_door(&mut self, t: f64, p: Vector2<f64>) -> Result<()> {
        let TaskState::Door {
            estimator,
            prior_radius,
            opening,
            planned,
        } = &mut self.task
        else {
            return Ok(());
        };
        estimator.push(p)?;
        let (hinge, radius) = match estimator.estimate() {
            Some(e) if e.radius > 0.0 && e.covariance[(2, 2)].sqrt() < MAX_RADIUS_STD => (e.hinge, e.radius),
            _ => (self.p0 + Vector2::new(0.0, *prior_radius), *prior_radius),
        };
        if *planned == Some((hinge, radius)) {
            return Ok(());
        }
        let (s_old, sd_old, _) = self.profile.state_at(t - self.profile_t0);
        let r_old = planned.map_or(radius, |(_, r)| r);
        let angle = s_old / r_old;
        self.geometry = estimated_arc(&self.p0, hinge, radius);
        let path = path_of(&self.geometry, radius * *opening);
        let s = (angle * radius).min(path.length());
        let remaining = path.length() - s;
        let speed = (sd_old / r_old * radius)
            .clamp(0.0, self.bounds.v_max)
            .min((2.0 * self.bounds.a_max * remaining).sqrt());
        self.profile = traj::plan(&path, &self.bounds, s, speed)?;
        self.profile_t0 = self.profile_t0.max(t);
        *planned = Some((hinge, radius));
        Ok(())
    }

    fn reference_scale(&self) -> f64 {
        match (&self.task, self.geometry) {
            (TaskState::Door { .. }, EnvGeometry::Arc { radius, .. }) => radius.recip().to_degrees(),
            _ => 1.0,
        }
    }

    fn build_reference(&self, t: f64, model: &MpcModel, q_meas: &DVector<f64>) -> Result<MpcReference> {
        let n = self.robot.dof();
        let settings = &self.mpc.settings;
        let dt = settings.node_dt();
        let u_ref = model.static_input(q_meas)?;
        let pose0 = self.robot.ee_kinematics(&self.q0)?;
        let mut states = Vec::with_capacity(settings.nodes + 1);
        let mut ee = Vec::with_capacity(settings.nodes + 1);
        for k in 0..=settings.nodes {
            let r = traj::sample(&self.profile, t + k as f64 * dt - self.profile_t0);
            let mut x = DVector::zeros(2 * n);
            x.rows_mut(0, n).copy_from(&self.q0);
            if let (Some(b), TaskState::Door { .. }) = (self.tuning.follow_base, &self.task) {
                x[b] = self.q0[b] + r.ee_pos.x - self.p0.x;
                x[n + b] = r.ee_vel.x;
            }
            states.push(x);
            ee.push(EePose {
                position: r.ee_pos,
                orientation: pose0.orientation,
            });
        }
        Ok(MpcReference {
            states,
            inputs: vec![u_ref; settings.nodes],
            ee,
        })
    }
}

impl Controller for TaskController {
    fn tick(&mut self, meas: &Measurement) -> Result<()> {
        let t = meas.t;
        let q = &meas.state.q;
        let p = self.robot.ee_kinematics(q)?.position;
        let pd = self.robot.ee_velocity(&meas.state)?;
        self.update_door(t, p)?;
        let geometry = self.geometry;
        let s = geometry.coordinate(&p);
        let sd = geometry.gradient(&p).dot(&pd);
        let v = geometry.direction(&p);
        self.s = s;
        let reference = traj::sample(&self.profile, t - self.profile_t0);
        self.track_ref = reference.x_d * self.reference_scale();

        let mut model = MpcModel::free(self.robot.clone());
        match &mut self.variant {
            VariantState::Baseline { k, d } => {
                let tangent = v.vector();
                let radial = Vector2::new(tangent.y, -tangent.x);
                let e = reference.ee_pos - p;
                let ed = reference.ee_vel - pd;
                model.f_ee = radial * (k[0] * radial.dot(&e) + d[0] * radial.dot(&ed))
                    + tangent * (k[1] * tangent.dot(&e) + d[1] * tangent.dot(&ed));
            }
            VariantState::Miac {
                filter,
                observer,
                x2_prev,
                lambda_hat,
            } => {
                let tau_ext = observer.step(&self.robot, &meas.state, &meas.tau_measured, meas.period)?;
                match extract_ee_force(&self.robot, q, tau_ext, &v, DEFAULT_MAX_JACOBIAN_CONDITION) {
                    Ok(f) => {
                        *lambda_hat = f.lambda;
                        if let Some(prev) = *x2_prev {
                            filter.update(s, sd, prev, f.lambda);
                        }
                    }
                    Err(Error::KinematicSingularity(_)) => {}
                    Err(e) => return Err(e),
                }
                *x2_prev = Some(sd);
                let pi = filter.pi;
                model.contact = Some(Contact {
                    params: EnvParams::new(pi[0], pi[1], pi[2], pi[3], 0.0),
                    geometry,
                });
            }
            VariantState::Mrac {
                state,
                sigma,
                x_tilde,
                adaptive,
                pd: pd_term,
            } => {
                let out = state.tick((reference.x_d, reference.xd_d, reference.xdd_d), s, sd, &v, meas.period)?;
                model.f_ee = out.force.f_ee;
                *sigma = out.errors.sigma;
                *x_tilde = out.errors.x_tilde;
                *adaptive = out.force.adaptive;
                *pd_term = out.force.pd;
            }
        }

        let mpc_ref = self.build_reference(t, &model, q)?;
        let out = self
            .mpc
            .tick(t, &model, &self.cost, &mpc_ref, &self.constraints, &meas.state)?;
        if out.status.is_none() {
            self.failures += 1;
        }
        self.last = Some(Setpoint {
            tau: out.tau,
            q: out.q,
            qd: out.qd,
        });
        Ok(())
    }

    fn setpoint(&self, t: f64) -> Setpoint {
        if let Some((tau, x)) = self.mpc.sample(t) {
            return Setpoint { tau, q: x.q, qd: x.qd };
        }
        self.last.clone().unwrap_or_else(|| {
            let n = self.robot.dof();
            let state = RobotState::at_rest(self.q0.clone());
            Setpoint {
                tau: self.robot.selection_matrix()
                    * self.robot.gravity_terms(&state.q).unwrap_or_else(|_| DVector::zeros(n)),
                q: state.q,
                qd: state.qd,
            }
        })
    }

    fn tracking_reference(&self) -> f64 {
        self.track_ref
    }

    fn diagnostics(&self) -> Vec<(&'static str, f64)> {
        let (radius, hinge_x, hinge_y) = match self.geometry {
            EnvGeometry::Arc { radius, hinge, .. } => (radius, hinge.x, hinge.y),
            EnvGeometry::Line { .. } => (f64::NAN, f64::NAN, f64::NAN),
        };
        let mut d = vec![
            ("s_hat", self.s),
            ("radius_hat", radius),
            ("hinge_x_hat", hinge_x),
            ("hinge_y_hat", hinge_y),
            ("solve_failures", self.failures as f64),
        ];
        let (pi, lambda_hat, sigma, x_tilde, adaptive, pd) = match &self.variant {
            VariantState::Baseline { .. } => (
                Vector4::from_element(f64::NAN),
                f64::NAN,
                f64::NAN,
                f64::NAN,
                f64::NAN,
                f64::NAN,
            ),
            VariantState::Miac { filter, lambda_hat, .. } => {
                (filter.pi, *lambda_hat, f64::NAN, f64::NAN, f64::NAN, f64::NAN)
            }
            VariantState::Mrac {
                state,
                sigma,
                x_tilde,
                adaptive,
                pd,
            } => (state.pi_hat, f64::NAN, *sigma, *x_tilde, *adaptive, *pd),
        };
        d.extend([
            ("pi_m", pi[0]),
            ("pi_b", pi[1]),
            ("pi_k", pi[2]),
            ("pi_fs", pi[3]),
            ("lambda_hat", lambda_hat),
            ("sigma", sigma),
            ("x_tilde", x_tilde),
            ("f_adaptive", adaptive),
            ("f_pd", pd),
        ]);
        d
    }
}
