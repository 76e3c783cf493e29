//! Linear impedance environment projected onto the manipulation direction,
//! and its rigid coupling to the robot.
//!
//! The environment is a one-dimensional coordinate `s(p)` of the end-effector
//! position `p`: arc length along a straight line or around a hinge. It obeys
//!
//! ```text
//! m s̈ + b ṡ + k (s − x0) + f_s = λ
//! ```
//!
//! where `λ` is the force the robot applies along the coordinate. Normal
//! components are never transmitted.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{solve_spd, RobotModel, Terms, MAX_DOF};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvParams {
    /// kg
    pub m: f64,
    /// N·s/m
    pub b: f64,
    /// N/m
    pub k: f64,
    /// N
    pub f_s: f64,
    /// m
    pub x0: f64,
}

impl EnvParams {
    pub const ZERO: EnvParams = EnvParams {
        m: 0.0,
        b: 0.0,
        k: 0.0,
        f_s: 0.0,
        x0: 0.0,
    };

    pub fn new(m: f64, b: f64, k: f64, f_s: f64, x0: f64) -> Self {
        Self { m, b, k, f_s, x0 }
    }

    /// Passivity: non-negative mass, damping and stiffness, all finite.
    pub fn validate(&self) -> Result<()> {
        let all = [self.m, self.b, self.k, self.f_s, self.x0];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("environment parameters must be finite".into()));
        }
        if self.m < 0.0 || self.b < 0.0 || self.k < 0.0 {
            return Err(Error::InvalidParameter(
                "environment must be passive (m, b, k >= 0)".into(),
            ));
        }
        Ok(())
    }

    /// `(m, b, k, f_s)`, the regression parameter vector.
    pub fn as_regression(&self) -> [f64; 4] {
        [self.m, self.b, self.k, self.f_s]
    }

    pub fn with_regression(&self, pi: &[f64; 4]) -> Self {
        Self {
            m: pi[0],
            b: pi[1],
            k: pi[2],
            f_s: pi[3],
            x0: self.x0,
        }
    }
}

/// Unit vector tangent to the manipulation path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskDirection(Vector2<f64>);

impl TaskDirection {
    pub const UNIT_TOL: f64 = 1e-9;

    pub fn new(v: Vector2<f64>) -> Result<Self> {
        if (v.norm() - 1.0).abs() > Self::UNIT_TOL || !v.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "task direction must be unit length, |v| = {}",
                v.norm()
            )));
        }
        Ok(Self(v))
    }

    /// Normalises a non-zero vector.
    pub fn from_unnormalized(v: Vector2<f64>) -> Result<Self> {
        let n = v.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidParameter("zero task direction".into()));
        }
        Ok(Self(v / n))
    }

    pub fn vector(&self) -> Vector2<f64> {
        self.0
    }

    /// Direction rotated by +90°.
    pub fn normal(&self) -> TaskDirection {
        TaskDirection(Vector2::new(-self.0.y, self.0.x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnvState {
    /// projected position, m
    pub x: f64,
    /// projected velocity, m/s
    pub xd: f64,
}

/// λ = m ẍ + b ẋ + k (x − x0) + f_s
pub fn interaction_force(p: &EnvParams, x: f64, xd: f64, xdd: f64) -> f64 {
    p.m * xdd + p.b * xd + p.k * (x - p.x0) + p.f_s
}

pub fn project(v: &TaskDirection, vec: &Vector2<f64>) -> f64 {
    v.0.dot(vec)
}

/// Environment acceleration under an applied force.
pub fn env_accel(p: &EnvParams, x: f64, xd: f64, lambda_applied: f64) -> Result<f64> {
    if p.m <= 0.0 {
        return Err(Error::MasslessEnvironment);
    }
    Ok((lambda_applied - p.b * xd - p.k * (x - p.x0) - p.f_s) / p.m)
}

/// Stored energy: kinetic, spring and the potential of the static force.
pub fn env_energy(p: &EnvParams, s: f64, sd: f64) -> f64 {
    0.5 * p.m * sd * sd + 0.5 * p.k * (s - p.x0).powi(2) + p.f_s * s
}

/// Shape of the environment coordinate in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EnvGeometry {
    /// `s = vᵀ (p − origin)`.
    Line {
        origin: Vector2<f64>,
        direction: Vector2<f64>,
    },
    /// `s = R · dir · (atan2(p − hinge) − closed_angle)`, i.e. arc length of
    /// the handle around the hinge; `ccw` selects the opening sense.
    Arc {
        hinge: Vector2<f64>,
        radius: f64,
        closed_angle: f64,
        ccw: bool,
    },
}

impl EnvGeometry {
    pub fn line(origin: Vector2<f64>, direction: TaskDirection) -> Self {
        EnvGeometry::Line {
            origin,
            direction: direction.vector(),
        }
    }

    fn sense(ccw: bool) -> f64 {
        if ccw {
            1.0
        } else {
            -1.0
        }
    }

    pub fn coordinate(&self, p: &Vector2<f64>) -> f64 {
        match *self {
            EnvGeometry::Line { origin, direction } => direction.dot(&(p - origin)),
            EnvGeometry::Arc {
                hinge,
                radius,
                closed_angle,
                ccw,
            } => {
                let r = p - hinge;
                let ang = crate::model::wrap_angle(r.y.atan2(r.x) - closed_angle);
                radius * Self::sense(ccw) * ang
            }
        }
    }

    /// ∂s/∂p.
    pub fn gradient(&self, p: &Vector2<f64>) -> Vector2<f64> {
        match *self {
            EnvGeometry::Line { direction, .. } => direction,
            EnvGeometry::Arc { hinge, radius, ccw, .. } => {
                let r = p - hinge;
                let rho2 = r.norm_squared();
                radius * Self::sense(ccw) * Vector2::new(-r.y, r.x) / rho2
            }
        }
    }

    /// ṗᵀ (∂²s/∂p²) ṗ.
    pub fn curvature_term(&self, p: &Vector2<f64>, pd: &Vector2<f64>) -> f64 {
        match *self {
            EnvGeometry::Line { .. } => 0.0,
            EnvGeometry::Arc { hinge, radius, ccw, .. } => {
                let r = p - hinge;
                let rho2 = r.norm_squared();
                let rho4 = rho2 * rho2;
                let hxx = 2.0 * r.x * r.y / rho4;
                let hxy = (r.y * r.y - r.x * r.x) / rho4;
                let quad = hxx * (pd.x * pd.x - pd.y * pd.y) + 2.0 * hxy * pd.x * pd.y;
                radius * Self::sense(ccw) * quad
            }
        }
    }

    /// Unit tangent at `p`, pointing towards increasing `s`.
    pub fn direction(&self, p: &Vector2<f64>) -> TaskDirection {
        match *self {
            EnvGeometry::Line { direction, .. } => TaskDirection(direction),
            EnvGeometry::Arc { hinge, ccw, .. } => {
                let r = p - hinge;
                let t = Self::sense(ccw) * Vector2::new(-r.y, r.x) / r.norm();
                TaskDirection(t)
            }
        }
    }

    /// Point on the path at coordinate `s`.
    pub fn point_at(&self, s: f64) -> Vector2<f64> {
        match *self {
            EnvGeometry::Line { origin, direction } => origin + s * direction,
            EnvGeometry::Arc {
                hinge,
                radius,
                closed_angle,
                ccw,
            } => {
                let a = closed_angle + Self::sense(ccw) * s / radius;
                hinge + radius * Vector2::new(a.cos(), a.sin())
            }
        }
    }

    /// Path tangent at coordinate `s`.
    pub fn tangent_at(&self, s: f64) -> TaskDirection {
        match *self {
            EnvGeometry::Line { direction, .. } => TaskDirection(direction),
            EnvGeometry::Arc {
                radius,
                closed_angle,
                ccw,
                ..
            } => {
                let a = closed_angle + Self::sense(ccw) * s / radius;
                TaskDirection(Self::sense(ccw) * Vector2::new(-a.sin(), a.cos()))
            }
        }
    }

    /// Signed curvature of the path in the tangent-normal frame, 1/m.
    pub fn curvature(&self) -> f64 {
        match *self {
            EnvGeometry::Line { .. } => 0.0,
            EnvGeometry::Arc { radius, .. } => 1.0 / radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            EnvGeometry::Line { origin, direction } => {
                TaskDirection::new(direction)?;
                if !origin.iter().all(|v| v.is_finite()) {
                    return Err(Error::InvalidParameter("line origin must be finite".into()));
                }
            }
            EnvGeometry::Arc {
                hinge,
                radius,
                closed_angle,
                ..
            } => {
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(Error::InvalidParameter("arc radius must be positive".into()));
                }
                if !(hinge.iter().all(|v| v.is_finite()) && closed_angle.is_finite()) {
                    return Err(Error::InvalidParameter("arc geometry must be finite".into()));
                }
            }
        }
        Ok(())
    }
}

/// A grasped environment: parameters plus the geometry of its coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    pub params: EnvParams,
    pub geometry: EnvGeometry,
}

/// Result of the coupled robot-environment dynamics at one instant.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CoupledAccel {
    pub qdd: [f64; MAX_DOF],
    /// Environment coordinate, its rate and λ.
    pub s: f64,
    pub sd: f64,
    pub lambda: f64,
    /// ∂s/∂p at the end-effector.
    pub grad: Vector2<f64>,
}

/// Robot accelerations with the environment folded in by elimination of its
/// coordinate. `gen_force` is Sᵀτ, `f_virtual` an extra force the robot is
/// believed to exert at the end-effector (zero in the true plant).
pub(crate) fn coupled_accel(
    model: &RobotModel,
    terms: &Terms,
    qd: &[f64],
    gen_force: &[f64; MAX_DOF],
    f_virtual: &[f64; 2],
    contact: Option<&Contact>,
) -> Result<CoupledAccel> {
    let n = terms.n;
    let mut mass = terms.mass;
    let mut rhs = [0.0; MAX_DOF];
    for r in 0..n {
        rhs[r] = gen_force[r] - terms.bias[r] - terms.jee[0][r] * f_virtual[0] - terms.jee[1][r] * f_virtual[1];
    }
    let mut out = CoupledAccel {
        qdd: [0.0; MAX_DOF],
        s: 0.0,
        sd: 0.0,
        lambda: 0.0,
        grad: Vector2::zeros(),
    };
    let Some(c) = contact else {
        solve_spd(&mass, n, &rhs, &mut out.qdd, model.max_condition)?;
        return Ok(out);
    };

    let p = Vector2::new(terms.ee_pos[0], terms.ee_pos[1]);
    let g = c.geometry.gradient(&p);
    // a = J_eeᵀ ∂s/∂p = ∂s/∂q
    let mut a = [0.0; MAX_DOF];
    for r in 0..n {
        a[r] = terms.jee[0][r] * g.x + terms.jee[1][r] * g.y;
    }
    let mut pd = Vector2::zeros();
    let mut sd = 0.0;
    for r in 0..n {
        pd.x += terms.jee[0][r] * qd[r];
        pd.y += terms.jee[1][r] * qd[r];
        sd += a[r] * qd[r];
    }
    let kappa = g.x * terms.ee_bias_acc[0] + g.y * terms.ee_bias_acc[1] + c.geometry.curvature_term(&p, &pd);
    let s = c.geometry.coordinate(&p);
    let e = &c.params;
    let static_part = e.m * kappa + e.b * sd + e.k * (s - e.x0) + e.f_s;
    for r in 0..n {
        for col in 0..n {
            mass[r][col] += e.m * a[r] * a[col];
        }
        rhs[r] -= a[r] * static_part;
    }
    solve_spd(&mass, n, &rhs, &mut out.qdd, model.max_condition)?;
    let mut sdd = kappa;
    for r in 0..n {
        sdd += a[r] * out.qdd[r];
    }
    out.s = s;
    out.sd = sd;
    out.lambda = interaction_force(e, s, sd, sdd);
    out.grad = g;
    Ok(out)
}
