//! Whole-body model predictive control over the coupled robot-environment
//! model, solved with SLQ and soft constraints.

pub mod barrier;
mod receding;
pub mod slq;

pub use receding::{RecedingHorizon, TickOutput};

use std::ops::AddAssign;

use nalgebra::{DMatrix, DVector, Matrix3, Vector2};
use serde::{Deserialize, Serialize};

use crate::environment::{coupled_accel, Contact};
use crate::error::{Error, Result};
use crate::model::{wrap_angle, EePose, RobotModel, RobotState, MAX_DOF};
use barrier::{relaxed_log_barrier, relaxed_log_barrier_curvature, relaxed_log_barrier_slope};
use slq::{CostExpansion, OcProblem, SlqSettings, SlqSolution, WarmStart};

pub type MpcSolution = SlqSolution;

/// The controller's internal model: robot, believed environment and the
/// virtual end-effector force.
#[derive(Debug, Clone)]
pub struct MpcModel {
    pub robot: RobotModel,
    /// `None` when no environment is modelled, i.e. λ_ee ≡ 0.
    pub contact: Option<Contact>,
    /// Extra operational-space force the planned torques must produce, N.
    pub f_ee: Vector2<f64>,
}

impl MpcModel {
    pub fn free(robot: RobotModel) -> Self {
        Self {
            robot,
            contact: None,
            f_ee: Vector2::zeros(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.robot.validate()?;
        if let Some(c) = &self.contact {
            c.params.validate()?;
            c.geometry.validate()?;
        }
        if !self.f_ee.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("virtual force must be finite".into()));
        }
        Ok(())
    }

    /// Static generalized force the model needs at rest in `q`: gravity plus
    /// the elastic and static environment force plus the virtual force.
    pub fn static_generalized_force(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        let mut g = self.robot.gravity_terms(q)?;
        let jee = self.robot.ee_jacobian(q)?;
        let mut f = self.f_ee;
        if let Some(c) = &self.contact {
            let p = self.robot.ee_kinematics(q)?.position;
            let s = c.geometry.coordinate(&p);
            let e = &c.params;
            f += c.geometry.gradient(&p) * (e.k * (s - e.x0) + e.f_s);
        }
        g += jee.transpose() * f;
        Ok(g)
    }

    /// Input that best balances [`Self::static_generalized_force`] through Sᵀ.
    pub fn static_input(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        let g = self.static_generalized_force(q)?;
        Ok(self.robot.selection_matrix() * g)
    }
}

/// Quadratic tracking weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcCost {
    /// 2n×2n weight on `(q, q̇)`.
    pub q_ss: DMatrix<f64>,
    /// m×m weight on the input.
    pub r: DMatrix<f64>,
    /// Weight on (position x, position y, orientation) of the end-effector.
    pub q_ee: Matrix3<f64>,
    /// Multiplier of the state terms evaluated at the horizon end.
    pub terminal_scale: f64,
}

impl MpcCost {
    pub fn diagonal(q_ss: &[f64], r: &[f64], q_ee: [f64; 3], terminal_scale: f64) -> Self {
        Self {
            q_ss: DMatrix::from_diagonal(&DVector::from_column_slice(q_ss)),
            r: DMatrix::from_diagonal(&DVector::from_column_slice(r)),
            q_ee: Matrix3::from_diagonal(&q_ee.into()),
            terminal_scale,
        }
    }

    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        let dim = |what, expected, got| {
            if expected == got {
                Ok(())
            } else {
                Err(Error::Dimension { what, expected, got })
            }
        };
        dim("state weight rows", 2 * n, self.q_ss.nrows())?;
        dim("state weight cols", 2 * n, self.q_ss.ncols())?;
        dim("input weight rows", m, self.r.nrows())?;
        dim("input weight cols", m, self.r.ncols())?;
        let sym = |a: &DMatrix<f64>| (a - a.transpose()).amax() <= 1e-12 * a.amax().max(1.0);
        if !sym(&self.q_ss) || !sym(&self.r) || (self.q_ee - self.q_ee.transpose()).amax() > 1e-12 {
            return Err(Error::InvalidParameter("cost weights must be symmetric".into()));
        }
        let min_eig = |a: DMatrix<f64>| a.symmetric_eigenvalues().min();
        if min_eig(self.q_ss.clone()) < -1e-12 || self.q_ee.symmetric_eigenvalues().min() < -1e-12 {
            return Err(Error::InvalidParameter(
                "state weights must be positive semidefinite".into(),
            ));
        }
        if !(min_eig(self.r.clone()) > 0.0) {
            return Err(Error::InvalidParameter("input weight must be positive definite".into()));
        }
        if !(self.terminal_scale >= 0.0) {
            return Err(Error::InvalidParameter("terminal scale must be non-negative".into()));
        }
        Ok(())
    }
}

/// Desired state, input and end-effector pose at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcReference {
    /// `nodes + 1` stacked `(q, q̇)` references.
    pub states: Vec<DVector<f64>>,
    /// `nodes` input references.
    pub inputs: Vec<DVector<f64>>,
    /// `nodes + 1` end-effector poses.
    pub ee: Vec<EePose>,
}

impl MpcReference {
    /// The same reference at every node.
    pub fn constant(state: DVector<f64>, input: DVector<f64>, ee: EePose, nodes: usize) -> Self {
        Self {
            states: vec![state; nodes + 1],
            inputs: vec![input; nodes],
            ee: vec![ee; nodes + 1],
        }
    }

    fn validate(&self, nodes: usize, nx: usize, nu: usize) -> Result<()> {
        if self.states.len() != nodes + 1 || self.ee.len() != nodes + 1 {
            return Err(Error::Dimension {
                what: "reference nodes",
                expected: nodes + 1,
                got: self.states.len().min(self.ee.len()),
            });
        }
        if self.inputs.len() != nodes {
            return Err(Error::Dimension {
                what: "reference input nodes",
                expected: nodes,
                got: self.inputs.len(),
            });
        }
        if let Some(s) = self.states.iter().find(|s| s.len() != nx) {
            return Err(Error::Dimension {
                what: "reference state",
                expected: nx,
                got: s.len(),
            });
        }
        if let Some(u) = self.inputs.iter().find(|u| u.len() != nu) {
            return Err(Error::Dimension {
                what: "reference input",
                expected: nu,
                got: u.len(),
            });
        }
        Ok(())
    }
}

/// Soft joint and torque limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    pub joint_limits: Vec<(f64, f64)>,
    pub torque_limits: Vec<f64>,
    pub mu: f64,
    /// Relaxation as a fraction of each constraint's range.
    pub delta_fraction: f64,
}

impl Constraints {
    pub const DEFAULT_MU: f64 = 1e-2;
    pub const DEFAULT_DELTA_FRACTION: f64 = 1e-3;

    /// The model's own limits with default barrier parameters.
    pub fn from_model(robot: &RobotModel) -> Self {
        Self {
            joint_limits: robot.joint_limits.clone(),
            torque_limits: robot.torque_limits.clone(),
            mu: Self::DEFAULT_MU,
            delta_fraction: Self::DEFAULT_DELTA_FRACTION,
        }
    }

    pub fn none(n: usize, m: usize) -> Self {
        Self {
            joint_limits: vec![(f64::NEG_INFINITY, f64::INFINITY); n],
            torque_limits: vec![f64::INFINITY; m],
            mu: Self::DEFAULT_MU,
            delta_fraction: Self::DEFAULT_DELTA_FRACTION,
        }
    }

    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        if self.joint_limits.len() != n {
            return Err(Error::Dimension {
                what: "joint limits",
                expected: n,
                got: self.joint_limits.len(),
            });
        }
        if self.torque_limits.len() != m {
            return Err(Error::Dimension {
                what: "torque limits",
                expected: m,
                got: self.torque_limits.len(),
            });
        }
        if self.joint_limits.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidParameter("joint limits need lower < upper".into()));
        }
        if self.torque_limits.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::InvalidParameter("torque limits must be positive".into()));
        }
        if !(self.mu > 0.0 && self.delta_fraction > 0.0) {
            return Err(Error::InvalidParameter("barrier parameters must be positive".into()));
        }
        Ok(())
    }
}

/// One soft bound `h = sign·(z − bound) ≥ 0` with precomputed relaxation.
#[derive(Debug, Clone, Copy)]
struct Bound {
    index: usize,
    bound: f64,
    sign: f64,
    delta: f64,
}

fn bounds_of(limits: impl Iterator<Item = (usize, f64, f64)>, frac: f64) -> Vec<Bound> {
    let mut out = Vec::new();
    for (i, lo, hi) in limits {
        let range = hi - lo;
        let delta = if range.is_finite() { frac * range } else { frac };
        if lo.is_finite() {
            out.push(Bound {
                index: i,
                bound: lo,
                sign: 1.0,
                delta,
            });
        }
        if hi.is_finite() {
            out.push(Bound {
                index: i,
                bound: hi,
                sign: -1.0,
                delta,
            });
        }
    }
    out
}

struct RobotProblem<'a> {
    model: &'a MpcModel,
    cost: &'a MpcCost,
    reference: &'a MpcReference,
    state_bounds: Vec<Bound>,
    input_bounds: Vec<Bound>,
    mu: f64,
    n: usize,
    m: usize,
    /// ∂(ee angle)/∂q.
    angle_row: [f64; MAX_DOF],
}

impl<'a> RobotProblem<'a> {
    fn new(model: &'a MpcModel, cost: &'a MpcCost, reference: &'a MpcReference, constraints: &Constraints) -> Self {
        let n = model.robot.dof();
        let m = model.robot.num_actuators();
        let frac = constraints.delta_fraction;
        let state_bounds = bounds_of(
            constraints
                .joint_limits
                .iter()
                .enumerate()
                .map(|(i, &(lo, hi))| (i, lo, hi)),
            frac,
        );
        let input_bounds = bounds_of(
            constraints.torque_limits.iter().enumerate().map(|(i, &t)| (i, -t, t)),
            frac,
        );
        let mut angle_row = [0.0; MAX_DOF];
        let off = n - model.robot.links.len();
        for r in angle_row.iter_mut().take(n).skip(off) {
            *r = 1.0;
        }
        Self {
            model,
            cost,
            reference,
            state_bounds,
            input_bounds,
            mu: constraints.mu,
            n,
            m,
            angle_row,
        }
    }

    fn ee_error(&self, k: usize, q: &[f64]) -> ([f64; 3], [[f64; MAX_DOF]; 2]) {
        let zeros = [0.0; MAX_DOF];
        let t = self.model.robot.terms(q, &zeros[..self.n]);
        let r = &self.reference.ee[k];
        let e = [
            t.ee_pos[0] - r.position.x,
            t.ee_pos[1] - r.position.y,
            wrap_angle(t.ee_angle - r.orientation),
        ];
        (e, t.jee)
    }

    fn state_terms(&self, k: usize, x: &[f64]) -> f64 {
        let xr = &self.reference.states[k];
        let dx = DVector::from_fn(2 * self.n, |i, _| x[i] - xr[i]);
        let (e, _) = self.ee_error(k, &x[..self.n]);
        let e = nalgebra::Vector3::from(e);
        dx.dot(&(&self.cost.q_ss * &dx)) + e.dot(&(self.cost.q_ee * e))
    }

    fn state_expansion(&self, k: usize, x: &[f64], lx: &mut DVector<f64>, lxx: &mut DMatrix<f64>) {
        let n = self.n;
        let xr = &self.reference.states[k];
        let dx = DVector::from_fn(2 * n, |i, _| x[i] - xr[i]);
        *lx += 2.0 * &self.cost.q_ss * &dx;
        *lxx += 2.0 * &self.cost.q_ss;
        let (e, jee) = self.ee_error(k, &x[..n]);
        let j = DMatrix::from_fn(3, n, |r, c| if r < 2 { jee[r][c] } else { self.angle_row[c] });
        let qe = DMatrix::from_fn(3, 3, |r, c| self.cost.q_ee[(r, c)]);
        let e = DVector::from_column_slice(&e);
        let jt_q = j.transpose() * &qe;
        let g = 2.0 * &jt_q * e;
        let h = 2.0 * &jt_q * &j;
        lx.rows_mut(0, n).add_assign(&g);
        lxx.view_mut((0, 0), (n, n)).add_assign(&h);
    }
}

fn barrier_value(bounds: &[Bound], z: &[f64], mu: f64) -> f64 {
    bounds
        .iter()
        .map(|b| relaxed_log_barrier(b.sign * (z[b.index] - b.bound), mu, b.delta))
        .sum()
}

fn barrier_expansion(bounds: &[Bound], z: &[f64], mu: f64, g: &mut DVector<f64>, h: &mut DMatrix<f64>) {
    for b in bounds {
        let v = b.sign * (z[b.index] - b.bound);
        g[b.index] += b.sign * relaxed_log_barrier_slope(v, mu, b.delta);
        h[(b.index, b.index)] += relaxed_log_barrier_curvature(v, mu, b.delta);
    }
}

impl OcProblem for RobotProblem<'_> {
    fn state_dim(&self) -> usize {
        2 * self.n
    }

    fn input_dim(&self) -> usize {
        self.m
    }

    fn dynamics(&self, x: &[f64], u: &[f64], xdot: &mut [f64]) -> Result<()> {
        let n = self.n;
        let (q, qd) = x.split_at(n);
        let robot = &self.model.robot;
        let terms = robot.terms(q, qd);
        let gen = robot.generalized_force(u);
        let f = [self.model.f_ee.x, self.model.f_ee.y];
        let acc = coupled_accel(robot, &terms, qd, &gen, &f, self.model.contact.as_ref())?;
        xdot[..n].copy_from_slice(qd);
        xdot[n..].copy_from_slice(&acc.qdd[..n]);
        Ok(())
    }

    fn running_cost(&self, k: usize, x: &[f64], u: &[f64]) -> f64 {
        let ur = &self.reference.inputs[k];
        let du = DVector::from_fn(self.m, |i, _| u[i] - ur[i]);
        self.state_terms(k, x)
            + du.dot(&(&self.cost.r * &du))
            + barrier_value(&self.state_bounds, x, self.mu)
            + barrier_value(&self.input_bounds, u, self.mu)
    }

    fn running_expansion(&self, k: usize, x: &[f64], u: &[f64]) -> CostExpansion {
        let mut e = CostExpansion::zeros(2 * self.n, self.m);
        self.state_expansion(k, x, &mut e.lx, &mut e.lxx);
        let ur = &self.reference.inputs[k];
        let du = DVector::from_fn(self.m, |i, _| u[i] - ur[i]);
        e.lu = 2.0 * &self.cost.r * du;
        e.luu = 2.0 * &self.cost.r;
        barrier_expansion(&self.state_bounds, x, self.mu, &mut e.lx, &mut e.lxx);
        barrier_expansion(&self.input_bounds, u, self.mu, &mut e.lu, &mut e.luu);
        e
    }

    fn terminal_cost(&self, x: &[f64]) -> f64 {
        self.cost.terminal_scale * self.state_terms(self.reference.states.len() - 1, x)
    }

    fn terminal_expansion(&self, x: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let nx = 2 * self.n;
        let mut g = DVector::zeros(nx);
        let mut h = DMatrix::zeros(nx, nx);
        self.state_expansion(self.reference.states.len() - 1, x, &mut g, &mut h);
        (g * self.cost.terminal_scale, h * self.cost.terminal_scale)
    }
}

/// Solves the finite-horizon problem from the measured state `x0`.
pub fn solve(
    model: &MpcModel,
    cost: &MpcCost,
    reference: &MpcReference,
    constraints: &Constraints,
    x0: &RobotState,
    settings: &SlqSettings,
    warm: Option<&WarmStart>,
) -> Result<MpcSolution> {
    let n = model.robot.dof();
    let m = model.robot.num_actuators();
    if x0.dof() != n {
        return Err(Error::Dimension {
            what: "initial state",
            expected: n,
            got: x0.dof(),
        });
    }
    if !x0.is_finite() {
        return Err(Error::InvalidParameter("initial state must be finite".into()));
    }
    cost.validate(n, m)?;
    constraints.validate(n, m)?;
    reference.validate(settings.nodes, 2 * n, m)?;
    let problem = RobotProblem::new(model, cost, reference, constraints);
    let default;
    let warm = match warm {
        Some(w) => w,
        None => {
            default = WarmStart {
                inputs: reference.inputs.clone(),
                states: None,
                gains: None,
            };
            &default
        }
    };
    slq::solve(&problem, settings, &x0.stacked(), warm)
}

/// Total cost of an input sequence under the same objective `solve` uses.
pub fn evaluate_cost(
    model: &MpcModel,
    cost: &MpcCost,
    reference: &MpcReference,
    constraints: &Constraints,
    x0: &RobotState,
    settings: &SlqSettings,
    inputs: &[DVector<f64>],
) -> Option<f64> {
    let problem = RobotProblem::new(model, cost, reference, constraints);
    slq::rollout_cost(&problem, settings, &x0.stacked(), inputs)
}
