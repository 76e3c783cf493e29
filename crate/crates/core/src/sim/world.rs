//! Ground-truth plant: robot plus grasped environment, advanced by RK4.

use nalgebra::{DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::environment::{coupled_accel, env_energy, Contact, EnvGeometry};
use crate::error::{Error, Result};
use crate::model::{RobotModel, RobotState, MAX_DOF};

/// Largest tolerated gap between the integrated environment coordinate and
/// the coordinate of the end-effector, m.
pub const CONSTRAINT_TOL: f64 = 1e-4;

/// Stiff spring-damper holding the handle on the environment path in the
/// direction normal to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalSpring {
    /// N/m
    pub stiffness: f64,
    /// N·s/m
    pub damping: f64,
}

/// Signed normal offset of `p` from the path, its rate and the unit normal.
fn normal_offset(geom: &EnvGeometry, p: &Vector2<f64>, pd: &Vector2<f64>) -> (f64, f64, Vector2<f64>) {
    match *geom {
        EnvGeometry::Line { origin, direction } => {
            let n = Vector2::new(-direction.y, direction.x);
            (n.dot(&(p - origin)), n.dot(pd), n)
        }
        EnvGeometry::Arc { hinge, radius, .. } => {
            let r = p - hinge;
            let rho = r.norm();
            let n = r / rho;
            (rho - radius, n.dot(pd), n)
        }
    }
}

#[derive(Debug, Clone)]
pub struct World {
    pub model: RobotModel,
    pub contact: Option<Contact>,
    pub normal_spring: Option<NormalSpring>,
    pub state: RobotState,
    pub time: f64,
    /// Environment coordinate integrated alongside the robot.
    pub env_coordinate: f64,
    /// Work done by the actuators since the start, J.
    pub actuator_work: f64,
    /// Energy dissipated by friction and damping since the start, J.
    pub dissipated: f64,
    /// Interaction force λ at the start of the last step, N.
    pub lambda: f64,
    /// Force the end-effector exerted on the environment at the start of the
    /// last step, N.
    pub lambda_ee: Vector2<f64>,
}

struct Derivative {
    xdot: Vec<f64>,
    lambda: f64,
    lambda_ee: Vector2<f64>,
}

impl World {
    pub fn new(model: RobotModel, state: RobotState, contact: Option<Contact>) -> Result<Self> {
        model.validate()?;
        if state.dof() != model.dof() || !state.is_finite() {
            return Err(Error::Dimension {
                what: "initial state",
                expected: model.dof(),
                got: state.dof(),
            });
        }
        let mut w = Self {
            model,
            contact,
            normal_spring: None,
            state,
            time: 0.0,
            env_coordinate: 0.0,
            actuator_work: 0.0,
            dissipated: 0.0,
            lambda: 0.0,
            lambda_ee: Vector2::zeros(),
        };
        if let Some(c) = &w.contact {
            c.params.validate()?;
            c.geometry.validate()?;
            w.env_coordinate = c.geometry.coordinate(&w.ee_position());
        }
        Ok(w)
    }

    pub fn with_normal_spring(mut self, spring: NormalSpring) -> Self {
        self.normal_spring = Some(spring);
        self
    }

    pub fn ee_position(&self) -> Vector2<f64> {
        let t = self.model.terms(self.state.q.as_slice(), self.state.qd.as_slice());
        Vector2::new(t.ee_pos[0], t.ee_pos[1])
    }

    /// Environment coordinate of the current end-effector position.
    pub fn kinematic_coordinate(&self) -> Option<f64> {
        self.contact
            .as_ref()
            .map(|c| c.geometry.coordinate(&self.ee_position()))
    }

    fn derivative(&self, x: &[f64], gen: &[f64; MAX_DOF]) -> Result<Derivative> {
        let n = self.model.dof();
        let (q, rest) = x.split_at(n);
        let qd = &rest[..n];
        let terms = self.model.terms(q, qd);
        let p = Vector2::new(terms.ee_pos[0], terms.ee_pos[1]);
        let mut pd = Vector2::zeros();
        for r in 0..n {
            pd.x += terms.jee[0][r] * qd[r];
            pd.y += terms.jee[1][r] * qd[r];
        }
        let mut f_normal = [0.0; 2];
        let mut normal_power = 0.0;
        if let (Some(c), Some(sp)) = (&self.contact, &self.normal_spring) {
            let (e, ed, nrm) = normal_offset(&c.geometry, &p, &pd);
            let f = sp.stiffness * e + sp.damping * ed;
            f_normal = [f * nrm.x, f * nrm.y];
            normal_power = sp.damping * ed * ed;
        }
        let acc = coupled_accel(&self.model, &terms, qd, gen, &f_normal, self.contact.as_ref())?;
        let mut xdot = vec![0.0; 2 * n + 3];
        xdot[..n].copy_from_slice(qd);
        xdot[n..2 * n].copy_from_slice(&acc.qdd[..n]);
        let mut power = 0.0;
        let mut friction = 0.0;
        for r in 0..n {
            power += gen[r] * qd[r];
            friction += self.model.friction[r] * qd[r] * qd[r];
        }
        let mut lambda_ee = Vector2::new(f_normal[0], f_normal[1]);
        if let Some(c) = &self.contact {
            xdot[2 * n] = acc.sd;
            friction += c.params.b * acc.sd * acc.sd;
            lambda_ee += acc.grad * acc.lambda;
        }
        xdot[2 * n + 1] = power;
        xdot[2 * n + 2] = friction + normal_power;
        Ok(Derivative {
            xdot,
            lambda: acc.lambda,
            lambda_ee,
        })
    }

    /// Advances one RK4 step of length `dt` with actuator torques `tau` held
    /// constant.
    pub fn step(&mut self, tau: &DVector<f64>, dt: f64) -> Result<()> {
        let n = self.model.dof();
        if tau.len() != self.model.num_actuators() {
            return Err(Error::Dimension {
                what: "tau",
                expected: self.model.num_actuators(),
                got: tau.len(),
            });
        }
        let gen = self.model.generalized_force(tau.as_slice());
        let mut x = Vec::with_capacity(2 * n + 3);
        x.extend_from_slice(self.state.q.as_slice());
        x.extend_from_slice(self.state.qd.as_slice());
        x.extend_from_slice(&[self.env_coordinate, self.actuator_work, self.dissipated]);
        let k1 = self.derivative(&x, &gen)?;
        let at = |k: &[f64], h: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + h * b).collect() };
        let k2 = self.derivative(&at(&k1.xdot, 0.5 * dt), &gen)?;
        let k3 = self.derivative(&at(&k2.xdot, 0.5 * dt), &gen)?;
        let k4 = self.derivative(&at(&k3.xdot, dt), &gen)?;
        for i in 0..x.len() {
            x[i] += dt / 6.0 * (k1.xdot[i] + 2.0 * k2.xdot[i] + 2.0 * k3.xdot[i] + k4.xdot[i]);
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence { iteration: 0 });
        }
        self.state.q.copy_from_slice(&x[..n]);
        self.state.qd.copy_from_slice(&x[n..2 * n]);
        self.env_coordinate = x[2 * n];
        self.actuator_work = x[2 * n + 1];
        self.dissipated = x[2 * n + 2];
        self.lambda = k1.lambda;
        self.lambda_ee = k1.lambda_ee;
        self.time += dt;
        if let Some(s) = self.kinematic_coordinate() {
            let drift = (s - self.env_coordinate).abs();
            if drift > CONSTRAINT_TOL {
                return Err(Error::ConstraintDrift(drift));
            }
        }
        Ok(())
    }

    /// Kinetic plus gravitational energy of the robot.
    pub fn robot_energy(&self) -> Result<f64> {
        Ok(self.model.kinetic_energy(&self.state)? + self.model.potential_energy(&self.state.q)?)
    }

    /// Stored energy of the environment including the normal spring.
    pub fn environment_energy(&self) -> Result<f64> {
        let Some(c) = &self.contact else {
            return Ok(0.0);
        };
        let t = self.model.terms(self.state.q.as_slice(), self.state.qd.as_slice());
        let p = Vector2::new(t.ee_pos[0], t.ee_pos[1]);
        let g = c.geometry.gradient(&p);
        let mut sd = 0.0;
        let mut pd = Vector2::zeros();
        for r in 0..t.n {
            let jx = t.jee[0][r];
            let jy = t.jee[1][r];
            sd += (jx * g.x + jy * g.y) * self.state.qd[r];
            pd += Vector2::new(jx, jy) * self.state.qd[r];
        }
        let s = c.geometry.coordinate(&p);
        let mut e = env_energy(&c.params, s, sd);
        if let Some(sp) = &self.normal_spring {
            let (off, _, _) = normal_offset(&c.geometry, &p, &pd);
            e += 0.5 * sp.stiffness * off * off;
        }
        Ok(e)
    }
}
