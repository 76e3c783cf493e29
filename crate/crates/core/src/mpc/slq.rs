//! Sequential linear-quadratic trajectory optimisation.
//!
//! Discrete-time Gauss–Newton variant: the dynamics are integrated with RK4
//! between equally spaced nodes and linearised by forward differences of the
//! discrete step, the running cost is expanded to second order, an LQ backward
//! pass yields feedforward and feedback terms and a backtracking Armijo line
//! search on the true cost accepts the update.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Second-order expansion of a cost integrand at one node.
#[derive(Debug, Clone)]
pub struct CostExpansion {
    pub lx: DVector<f64>,
    pub lu: DVector<f64>,
    pub lxx: DMatrix<f64>,
    pub luu: DMatrix<f64>,
    pub lux: DMatrix<f64>,
}

impl CostExpansion {
    pub fn zeros(nx: usize, nu: usize) -> Self {
        Self {
            lx: DVector::zeros(nx),
            lu: DVector::zeros(nu),
            lxx: DMatrix::zeros(nx, nx),
            luu: DMatrix::zeros(nu, nu),
            lux: DMatrix::zeros(nu, nx),
        }
    }
}

/// A finite-horizon optimal control problem on `nodes` equally spaced steps.
pub trait OcProblem {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    /// Continuous-time dynamics `ẋ = f(x, u)`.
    fn dynamics(&self, x: &[f64], u: &[f64], xdot: &mut [f64]) -> Result<()>;
    /// Running cost integrand at node `k`.
    fn running_cost(&self, k: usize, x: &[f64], u: &[f64]) -> f64;
    fn running_expansion(&self, k: usize, x: &[f64], u: &[f64]) -> CostExpansion;
    fn terminal_cost(&self, x: &[f64]) -> f64;
    /// Gradient and Hessian of the terminal cost.
    fn terminal_expansion(&self, x: &[f64]) -> (DVector<f64>, DMatrix<f64>);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlqSettings {
    /// Horizon length, s.
    pub horizon: f64,
    pub nodes: usize,
    /// RK4 substeps between nodes.
    pub substeps: usize,
    pub max_iterations: usize,
    /// Stop once the accepted decrease is below `abs_tol + rel_tol·|J|`.
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub backtrack_factor: f64,
    pub armijo: f64,
    pub max_backtracks: usize,
    /// Levenberg regularisation bounds on the input Hessian.
    pub reg_min: f64,
    pub reg_max: f64,
}

impl Default for SlqSettings {
    fn default() -> Self {
        Self {
            horizon: 1.5,
            nodes: 40,
            substeps: 1,
            max_iterations: 20,
            abs_tol: 1e-9,
            rel_tol: 1e-7,
            backtrack_factor: 0.5,
            armijo: 1e-4,
            max_backtracks: 12,
            reg_min: 1e-8,
            reg_max: 1e8,
        }
    }
}

impl SlqSettings {
    pub fn node_dt(&self) -> f64 {
        self.horizon / self.nodes as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || self.nodes == 0 || self.substeps == 0 {
            return Err(Error::InvalidParameter(
                "horizon, nodes and substeps must be positive".into(),
            ));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::InvalidParameter("backtrack factor must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    /// Iteration budget exhausted; the best iterate is still returned.
    MaxIterations,
    /// No step length produced sufficient decrease.
    LineSearchStalled,
}

#[derive(Debug, Clone)]
pub struct SlqSolution {
    pub states: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
    /// Time-varying feedback `u = ū + K (x − x̄)`.
    pub gains: Vec<DMatrix<f64>>,
    pub cost: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    /// Cost of the initial rollout followed by every accepted iterate.
    pub cost_history: Vec<f64>,
    pub dt: f64,
}

impl SlqSolution {
    /// Input and linearly interpolated state at time `t` into the plan.
    pub fn sample(&self, t: f64) -> (DVector<f64>, DVector<f64>) {
        let n = self.inputs.len();
        let pos = (t / self.dt).max(0.0);
        let k = (pos.floor() as usize).min(n.saturating_sub(1));
        let u = self.inputs[k].clone();
        let frac = (pos - k as f64).clamp(0.0, 1.0);
        let x = if k + 1 < self.states.len() {
            &self.states[k] * (1.0 - frac) + &self.states[k + 1] * frac
        } else {
            self.states[self.states.len() - 1].clone()
        };
        (u, x)
    }
}

/// Reusable buffers for [`step`].
#[derive(Debug, Clone)]
pub struct StepScratch {
    cur: Vec<f64>,
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl StepScratch {
    pub fn new(nx: usize) -> Self {
        Self {
            cur: vec![0.0; nx],
            k1: vec![0.0; nx],
            k2: vec![0.0; nx],
            k3: vec![0.0; nx],
            k4: vec![0.0; nx],
            tmp: vec![0.0; nx],
        }
    }
}

/// Discrete transition: RK4 over one node interval.
pub fn step<P: OcProblem + ?Sized>(
    problem: &P,
    settings: &SlqSettings,
    x: &[f64],
    u: &[f64],
    out: &mut [f64],
    ws: &mut StepScratch,
) -> Result<()> {
    let nx = x.len();
    let h = settings.node_dt() / settings.substeps as f64;
    let StepScratch {
        cur,
        k1,
        k2,
        k3,
        k4,
        tmp,
    } = ws;
    cur.copy_from_slice(x);
    for _ in 0..settings.substeps {
        problem.dynamics(cur, u, k1)?;
        for i in 0..nx {
            tmp[i] = cur[i] + 0.5 * h * k1[i];
        }
        problem.dynamics(tmp, u, k2)?;
        for i in 0..nx {
            tmp[i] = cur[i] + 0.5 * h * k2[i];
        }
        problem.dynamics(tmp, u, k3)?;
        for i in 0..nx {
            tmp[i] = cur[i] + h * k3[i];
        }
        problem.dynamics(tmp, u, k4)?;
        for i in 0..nx {
            cur[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    out.copy_from_slice(cur);
    Ok(())
}

/// Simulates the discrete system; returns `None` if the trajectory leaves the
/// finite domain or the dynamics fail.
/// States, inputs and cost of one rollout.
type Trajectory = (Vec<DVector<f64>>, Vec<DVector<f64>>, f64);

fn rollout<P: OcProblem + ?Sized>(
    problem: &P,
    settings: &SlqSettings,
    x0: &DVector<f64>,
    policy: impl Fn(usize, &DVector<f64>) -> DVector<f64>,
) -> Option<Trajectory> {
    let n = settings.nodes;
    let dt = settings.node_dt();
    let mut xs = Vec::with_capacity(n + 1);
    let mut us = Vec::with_capacity(n);
    xs.push(x0.clone());
    let mut cost = 0.0;
    let mut next = DVector::zeros(x0.len());
    let mut ws = StepScratch::new(x0.len());
    for k in 0..n {
        let u = policy(k, &xs[k]);
        if !u.iter().all(|v| v.is_finite()) {
            return None;
        }
        cost += dt * problem.running_cost(k, xs[k].as_slice(), u.as_slice());
        step(
            problem,
            settings,
            xs[k].as_slice(),
            u.as_slice(),
            next.as_mut_slice(),
            &mut ws,
        )
        .ok()?;
        if !next.iter().all(|v| v.is_finite()) {
            return None;
        }
        xs.push(next.clone());
        us.push(u);
    }
    cost += problem.terminal_cost(xs[n].as_slice());
    cost.is_finite().then_some((xs, us, cost))
}

/// Total cost of an open-loop input sequence.
pub fn rollout_cost<P: OcProblem + ?Sized>(
    problem: &P,
    settings: &SlqSettings,
    x0: &DVector<f64>,
    inputs: &[DVector<f64>],
) -> Option<f64> {
    rollout(problem, settings, x0, |k, _| inputs[k].clone()).map(|r| r.2)
}

/// Total cost when tracking a nominal plan with its feedback gains.
pub fn closed_loop_cost<P: OcProblem + ?Sized>(
    problem: &P,
    settings: &SlqSettings,
    x0: &DVector<f64>,
    plan: &SlqSolution,
) -> Option<f64> {
    rollout(problem, settings, x0, |k, x| {
        &plan.inputs[k] + &plan.gains[k] * (x - &plan.states[k])
    })
    .map(|r| r.2)
}

/// Relative forward-difference step.
const FD_STEP: f64 = 1e-6;

/// Discrete Jacobians `(A, B)` of one RK4 step by forward differences.
pub fn linearize<P: OcProblem + ?Sized>(
    problem: &P,
    settings: &SlqSettings,
    x: &DVector<f64>,
    u: &DVector<f64>,
    x_next: &DVector<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let nx = x.len();
    let nu = u.len();
    let mut a = DMatrix::zeros(nx, nx);
    let mut b = DMatrix::zeros(nx, nu);
    let mut xp = x.clone();
    let mut up = u.clone();
    let mut out = DVector::zeros(nx);
    let mut ws = StepScratch::new(nx);
    let rel = FD_STEP;
    for i in 0..nx {
        let h = rel * x[i].abs().max(1.0);
        xp[i] = x[i] + h;
        let h = xp[i] - x[i];
        step(
            problem,
            settings,
            xp.as_slice(),
            u.as_slice(),
            out.as_mut_slice(),
            &mut ws,
        )?;
        a.set_column(i, &((&out - x_next) / h));
        xp[i] = x[i];
    }
    for j in 0..nu {
        let h = rel * u[j].abs().max(1.0);
        up[j] = u[j] + h;
        let h = up[j] - u[j];
        step(
            problem,
            settings,
            x.as_slice(),
            up.as_slice(),
            out.as_mut_slice(),
            &mut ws,
        )?;
        b.set_column(j, &((&out - x_next) / h));
        up[j] = u[j];
    }
    Ok((a, b))
}

/// Gradient of the total cost with respect to every input of an open-loop
/// sequence, via the adjoint recursion on the linearised dynamics.
pub fn cost_gradient<P: OcProblem + ?Sized>(
    problem: &P,
    settings: &SlqSettings,
    x0: &DVector<f64>,
    inputs: &[DVector<f64>],
) -> Result<Vec<DVector<f64>>> {
    let (xs, us, _) =
        rollout(problem, settings, x0, |k, _| inputs[k].clone()).ok_or(Error::Divergence { iteration: 0 })?;
    let dt = settings.node_dt();
    let n = settings.nodes;
    let (mut lambda, _) = problem.terminal_expansion(xs[n].as_slice());
    let mut grads = vec![DVector::zeros(problem.input_dim()); n];
    for k in (0..n).rev() {
        let (a, b) = linearize(problem, settings, &xs[k], &us[k], &xs[k + 1])?;
        let e = problem.running_expansion(k, xs[k].as_slice(), us[k].as_slice());
        grads[k] = dt * &e.lu + b.transpose() * &lambda;
        lambda = dt * &e.lx + a.transpose() * &lambda;
    }
    Ok(grads)
}

/// Initial guess: inputs, optionally with the nominal states and gains they
/// were computed for.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub inputs: Vec<DVector<f64>>,
    pub states: Option<Vec<DVector<f64>>>,
    pub gains: Option<Vec<DMatrix<f64>>>,
}

impl WarmStart {
    pub fn constant(u: DVector<f64>, nodes: usize) -> Self {
        Self {
            inputs: vec![u; nodes],
            states: None,
            gains: None,
        }
    }
}

struct BackwardPass {
    ff: Vec<DVector<f64>>,
    gains: Vec<DMatrix<f64>>,
    /// Expected decrease terms: Σ kᵀQu and Σ kᵀQuu k.
    d1: f64,
    d2: f64,
}

fn backward_pass(
    lin: &[(DMatrix<f64>, DMatrix<f64>)],
    exps: &[CostExpansion],
    terminal: &(DVector<f64>, DMatrix<f64>),
    dt: f64,
    reg: f64,
) -> Option<BackwardPass> {
    let n = lin.len();
    let mut vx = terminal.0.clone();
    let mut vxx = terminal.1.clone();
    let mut ff = vec![DVector::zeros(0); n];
    let mut gains = vec![DMatrix::zeros(0, 0); n];
    let (mut d1, mut d2) = (0.0, 0.0);
    for k in (0..n).rev() {
        let (a, b) = &lin[k];
        let e = &exps[k];
        let bt_vxx = b.transpose() * &vxx;
        let qx = dt * &e.lx + a.transpose() * &vx;
        let qu = dt * &e.lu + b.transpose() * &vx;
        let qxx = dt * &e.lxx + a.transpose() * &vxx * a;
        let quu = dt * &e.luu + &bt_vxx * b;
        let qux = dt * &e.lux + &bt_vxx * a;
        let mut quu_reg = quu.clone();
        for i in 0..quu_reg.nrows() {
            quu_reg[(i, i)] += reg;
        }
        let chol = Cholesky::new(quu_reg)?;
        let kff = -chol.solve(&qu);
        let kfb = -chol.solve(&qux);
        d1 += kff.dot(&qu);
        d2 += kff.dot(&(&quu * &kff));
        let kt = kfb.transpose();
        vx = &qx + &kt * &quu * &kff + &kt * &qu + qux.transpose() * &kff;
        vxx = &qxx + &kt * &quu * &kfb + &kt * &qux + qux.transpose() * &kfb;
        vxx = 0.5 * (&vxx + vxx.transpose());
        ff[k] = kff;
        gains[k] = kfb;
    }
    Some(BackwardPass { ff, gains, d1, d2 })
}

/// Runs SLQ from `x0`. The returned cost never exceeds the cost of the
/// warm-start rollout.
pub fn solve<P: OcProblem + ?Sized>(
    problem: &P,
    settings: &SlqSettings,
    x0: &DVector<f64>,
    warm: &WarmStart,
) -> Result<SlqSolution> {
    settings.validate()?;
    let n = settings.nodes;
    let nx = problem.state_dim();
    let nu = problem.input_dim();
    if x0.len() != nx {
        return Err(Error::Dimension {
            what: "initial state",
            expected: nx,
            got: x0.len(),
        });
    }
    if warm.inputs.len() != n {
        return Err(Error::Dimension {
            what: "warm-start inputs",
            expected: n,
            got: warm.inputs.len(),
        });
    }
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidParameter("initial state must be finite".into()));
    }
    let dt = settings.node_dt();

    let first = match (&warm.states, &warm.gains) {
        (Some(xs), Some(ks)) if xs.len() == n + 1 && ks.len() == n => {
            rollout(problem, settings, x0, |k, x| &warm.inputs[k] + &ks[k] * (x - &xs[k]))
        }
        _ => rollout(problem, settings, x0, |k, _| warm.inputs[k].clone()),
    };
    let (mut xs, mut us, mut cost) = first.ok_or(Error::Divergence { iteration: 0 })?;
    let mut gains = vec![DMatrix::zeros(nu, nx); n];
    let mut history = vec![cost];
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;
    let mut reg = 0.0;

    for it in 0..settings.max_iterations {
        let mut lin = Vec::with_capacity(n);
        let mut exps = Vec::with_capacity(n);
        for k in 0..n {
            lin.push(linearize(problem, settings, &xs[k], &us[k], &xs[k + 1])?);
            exps.push(problem.running_expansion(k, xs[k].as_slice(), us[k].as_slice()));
        }
        let terminal = problem.terminal_expansion(xs[n].as_slice());

        let bp = loop {
            if let Some(bp) = backward_pass(&lin, &exps, &terminal, dt, reg) {
                break Some(bp);
            }
            reg = (reg * 10.0).max(settings.reg_min);
            if reg > settings.reg_max {
                break None;
            }
        };
        let Some(bp) = bp else {
            status = SolveStatus::LineSearchStalled;
            break;
        };

        let mut alpha = 1.0;
        let mut accepted = None;
        let mut any_finite = false;
        for _ in 0..=settings.max_backtracks {
            let trial = rollout(problem, settings, x0, |k, x| {
                &us[k] + alpha * &bp.ff[k] + &bp.gains[k] * (x - &xs[k])
            });
            if let Some((nxs, nus, ncost)) = trial {
                any_finite = true;
                let expected = alpha * bp.d1 + 0.5 * alpha * alpha * bp.d2;
                if ncost <= cost + settings.armijo * expected.min(0.0) && ncost <= cost {
                    accepted = Some((nxs, nus, ncost));
                    break;
                }
            }
            alpha *= settings.backtrack_factor;
        }
        iterations = it + 1;
        let Some((nxs, nus, ncost)) = accepted else {
            if !any_finite {
                return Err(Error::Divergence { iteration: it + 1 });
            }
            status = SolveStatus::LineSearchStalled;
            // keep the gains of the last backward pass for the nominal plan
            gains = bp.gains;
            break;
        };
        let decrease = cost - ncost;
        debug_assert!(decrease >= 0.0);
        xs = nxs;
        us = nus;
        gains = bp.gains;
        cost = ncost;
        history.push(cost);
        reg = if reg > 0.0 {
            (reg / 10.0).max(settings.reg_min)
        } else {
            0.0
        };
        if decrease <= settings.abs_tol + settings.rel_tol * cost.abs() {
            status = SolveStatus::Converged;
            break;
        }
    }

    Ok(SlqSolution {
        states: xs,
        inputs: us,
        gains,
        cost,
        iterations,
        status,
        cost_history: history,
        dt,
    })
}
