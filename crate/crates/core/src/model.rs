//! Planar mobile-manipulator rigid-body model.
//!
//! The robot is an optional prismatic base moving along the world x axis,
//! carrying a serial chain of up to three revolute links. Joint angles are
//! relative; the absolute angle of link `i` is `chain_offset + q_1 + ... + q_i`.
//! Gravity acts along world -y. All terms of
//!
//! ```text
//! M(q) q̈ + n(q, q̇) = Sᵀ τ − J_eeᵀ f
//! ```
//!
//! are assembled in closed form; `n` collects Coriolis, centrifugal, gravity
//! and viscous friction forces.

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of generalized coordinates the closed-form assembly supports.
pub const MAX_DOF: usize = 4;

/// Default bound on the mass-matrix condition estimate.
pub const DEFAULT_MAX_CONDITION: f64 = 1e10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Link {
    /// kg
    pub mass: f64,
    /// joint-to-joint length, m
    pub length: f64,
    /// distance from the proximal joint to the centre of mass, m
    pub com: f64,
    /// rotational inertia about the centre of mass, kg·m²
    pub inertia: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotModel {
    /// Mass of the prismatic base; `None` for a fixed-base arm.
    pub base_mass: Option<f64>,
    pub links: Vec<Link>,
    /// Absolute angle of the first link at zero joint angle, rad.
    pub chain_offset: f64,
    /// m/s², acting along -y.
    pub gravity: f64,
    /// Viscous friction per generalized coordinate, N·m·s/rad (N·s/m for the base).
    pub friction: Vec<f64>,
    /// Indices of actuated coordinates; row `i` of S selects `actuated[i]`.
    pub actuated: Vec<usize>,
    /// Number of leading coordinates treated as base coordinates by the
    /// augmented Jacobian.
    pub base_dofs: usize,
    /// Symmetric actuator limits, one per actuator.
    pub torque_limits: Vec<f64>,
    /// Position limits per generalized coordinate.
    pub joint_limits: Vec<(f64, f64)>,
    pub max_condition: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub q: DVector<f64>,
    pub qd: DVector<f64>,
}

impl RobotState {
    pub fn new(q: DVector<f64>, qd: DVector<f64>) -> Self {
        Self { q, qd }
    }

    pub fn at_rest(q: DVector<f64>) -> Self {
        let n = q.len();
        Self {
            q,
            qd: DVector::zeros(n),
        }
    }

    pub fn dof(&self) -> usize {
        self.q.len()
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qd.iter()).all(|v| v.is_finite())
    }

    /// Stacked `(q, q̇)`.
    pub fn stacked(&self) -> DVector<f64> {
        let n = self.q.len();
        let mut x = DVector::zeros(2 * n);
        x.rows_mut(0, n).copy_from(&self.q);
        x.rows_mut(n, n).copy_from(&self.qd);
        x
    }

    pub fn from_stacked(x: &[f64]) -> Self {
        let n = x.len() / 2;
        Self {
            q: DVector::from_column_slice(&x[..n]),
            qd: DVector::from_column_slice(&x[n..2 * n]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub tau: DVector<f64>,
}

impl ControlInput {
    pub fn new(tau: DVector<f64>) -> Self {
        Self { tau }
    }

    pub fn zeros(m: usize) -> Self {
        Self { tau: DVector::zeros(m) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EePose {
    pub position: Vector2<f64>,
    /// Wrapped to (−π, π].
    pub orientation: f64,
}

/// Wraps an angle to (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut w = a.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

/// Closed-form terms evaluated at one state; fixed-size so the solver hot
/// path never allocates.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Terms {
    pub n: usize,
    pub mass: [[f64; MAX_DOF]; MAX_DOF],
    pub bias: [f64; MAX_DOF],
    /// Rows are x and y of the end-effector position Jacobian.
    pub jee: [[f64; MAX_DOF]; 2],
    pub ee_pos: [f64; 2],
    pub ee_angle: f64,
    /// J̇_ee q̇
    pub ee_bias_acc: [f64; 2],
}

impl RobotModel {
    /// Fixed-base serial arm, every joint actuated.
    pub fn fixed_arm(links: Vec<Link>, chain_offset: f64, gravity: f64) -> Self {
        let n = links.len();
        Self {
            base_mass: None,
            links,
            chain_offset,
            gravity,
            friction: vec![0.0; n],
            actuated: (0..n).collect(),
            base_dofs: 0,
            torque_limits: vec![f64::INFINITY; n],
            joint_limits: vec![(f64::NEG_INFINITY, f64::INFINITY); n],
            max_condition: DEFAULT_MAX_CONDITION,
        }
    }

    /// The planar ball-balancing stand-in: actuated base translation,
    /// unactuated body pitch and a two-link arm mounted on top of the body.
    pub fn planar_ballbot() -> Self {
        Self {
            base_mass: Some(12.0),
            links: vec![
                Link {
                    mass: 22.0,
                    length: 0.8,
                    com: 0.35,
                    inertia: 1.2,
                },
                Link {
                    mass: 2.5,
                    length: 0.45,
                    com: 0.22,
                    inertia: 0.045,
                },
                Link {
                    mass: 1.5,
                    length: 0.45,
                    com: 0.25,
                    inertia: 0.03,
                },
            ],
            chain_offset: std::f64::consts::FRAC_PI_2,
            gravity: 9.81,
            friction: vec![0.01; 4],
            actuated: vec![0, 2, 3],
            base_dofs: 2,
            torque_limits: vec![250.0, 80.0, 60.0],
            joint_limits: vec![(-5.0, 5.0), (-0.6, 0.6), (-3.0, 1.0), (-0.2, 2.9)],
            max_condition: DEFAULT_MAX_CONDITION,
        }
    }

    pub fn dof(&self) -> usize {
        self.base_offset() + self.links.len()
    }

    pub fn num_actuators(&self) -> usize {
        self.actuated.len()
    }

    fn base_offset(&self) -> usize {
        usize::from(self.base_mass.is_some())
    }

    /// Checks structural invariants: dimension bookkeeping, finite and
    /// non-negative physical parameters, S of full row rank.
    pub fn validate(&self) -> Result<()> {
        let n = self.dof();
        if n == 0 || n > MAX_DOF {
            return Err(Error::InvalidParameter(format!(
                "model must have 1..={MAX_DOF} coordinates, has {n}"
            )));
        }
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if let Some(mb) = self.base_mass {
            if !(mb.is_finite() && mb >= 0.0) {
                return bad(format!("base mass {mb}"));
            }
        }
        for (i, l) in self.links.iter().enumerate() {
            let ok = [l.mass, l.length, l.com, l.inertia]
                .iter()
                .all(|v| v.is_finite() && *v >= 0.0);
            if !ok {
                return bad(format!("link {i} has invalid parameters"));
            }
        }
        if !(self.gravity.is_finite() && self.chain_offset.is_finite()) {
            return bad("gravity / chain offset must be finite".into());
        }
        if self.friction.len() != n {
            return Err(Error::Dimension {
                what: "friction",
                expected: n,
                got: self.friction.len(),
            });
        }
        if self.friction.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
            return bad("friction must be finite and non-negative".into());
        }
        let m = self.actuated.len();
        if m == 0 || m > n {
            return bad(format!("{m} actuators for {n} coordinates"));
        }
        let mut seen = [false; MAX_DOF];
        for &a in &self.actuated {
            if a >= n || seen[a] {
                return bad("actuation map must select distinct coordinates".into());
            }
            seen[a] = true;
        }
        if self.torque_limits.len() != m {
            return Err(Error::Dimension {
                what: "torque limits",
                expected: m,
                got: self.torque_limits.len(),
            });
        }
        if self.torque_limits.iter().any(|t| t.is_nan() || *t <= 0.0) {
            return bad("torque limits must be positive".into());
        }
        if self.joint_limits.len() != n {
            return Err(Error::Dimension {
                what: "joint limits",
                expected: n,
                got: self.joint_limits.len(),
            });
        }
        if self.joint_limits.iter().any(|(lo, hi)| !(lo < hi)) {
            return bad("joint limits need lower < upper".into());
        }
        if self.base_dofs > n {
            return bad("base dofs exceed coordinate count".into());
        }
        if !(self.max_condition > 1.0) {
            return bad("max_condition must exceed 1".into());
        }
        Ok(())
    }

    fn check_len(&self, what: &'static str, len: usize) -> Result<()> {
        let n = self.dof();
        if len != n {
            return Err(Error::Dimension {
                what,
                expected: n,
                got: len,
            });
        }
        Ok(())
    }

    /// Actuation map S (m_act × n).
    pub fn selection_matrix(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.actuated.len(), self.dof());
        for (row, &col) in self.actuated.iter().enumerate() {
            s[(row, col)] = 1.0;
        }
        s
    }

    /// Sᵀ τ written into a fixed-size buffer.
    pub(crate) fn generalized_force(&self, tau: &[f64]) -> [f64; MAX_DOF] {
        let mut out = [0.0; MAX_DOF];
        for (i, &c) in self.actuated.iter().enumerate() {
            out[c] += tau[i];
        }
        out
    }

    /// Absolute link angles and angular rates.
    fn link_angles(&self, q: &[f64], qd: &[f64]) -> ([f64; MAX_DOF], [f64; MAX_DOF]) {
        let off = self.base_offset();
        let mut alpha = [0.0; MAX_DOF];
        let mut omega = [0.0; MAX_DOF];
        let mut a = self.chain_offset;
        let mut w = 0.0;
        for i in 0..self.links.len() {
            a += q[off + i];
            w += qd[off + i];
            alpha[i] = a;
            omega[i] = w;
        }
        (alpha, omega)
    }

    fn origin(&self, q: &[f64]) -> [f64; 2] {
        if self.base_mass.is_some() {
            [q[0], 0.0]
        } else {
            [0.0, 0.0]
        }
    }

    /// Assembles every closed-form term in one pass.
    pub(crate) fn terms(&self, q: &[f64], qd: &[f64]) -> Terms {
        let n = self.dof();
        let off = self.base_offset();
        let nl = self.links.len();
        let (alpha, omega) = self.link_angles(q, qd);
        let mut cs = [(0.0, 0.0); MAX_DOF];
        for i in 0..nl {
            cs[i] = (alpha[i].cos(), alpha[i].sin());
        }

        let mut mass = [[0.0; MAX_DOF]; MAX_DOF];
        let mut bias = [0.0; MAX_DOF];
        if let Some(mb) = self.base_mass {
            mass[0][0] += mb;
        }

        for i in 0..nl {
            let link = &self.links[i];
            // COM Jacobian, accumulated from the link tip backwards.
            let mut jc = [[0.0; MAX_DOF]; 2];
            if off == 1 {
                jc[0][0] = 1.0;
            }
            let (c_i, s_i) = cs[i];
            let mut sx = -link.com * s_i;
            let mut sy = link.com * c_i;
            jc[0][off + i] = sx;
            jc[1][off + i] = sy;
            let w2 = omega[i] * omega[i];
            let mut ax = -link.com * w2 * c_i;
            let mut ay = -link.com * w2 * s_i;
            for j in (0..i).rev() {
                let l = self.links[j].length;
                let (c_j, s_j) = cs[j];
                sx -= l * s_j;
                sy += l * c_j;
                jc[0][off + j] = sx;
                jc[1][off + j] = sy;
                let wj2 = omega[j] * omega[j];
                ax -= l * wj2 * c_j;
                ay -= l * wj2 * s_j;
            }
            let m = link.mass;
            for r in 0..n {
                for c in r..n {
                    let v = m * (jc[0][r] * jc[0][c] + jc[1][r] * jc[1][c]);
                    mass[r][c] += v;
                }
                // Coriolis/centrifugal and gravity.
                bias[r] += m * (jc[0][r] * ax + jc[1][r] * ay) + m * self.gravity * jc[1][r];
            }
            // Rotational inertia: ω_i = sum of relative rates up to i.
            for r in off..=off + i {
                for c in r..=off + i {
                    mass[r][c] += link.inertia;
                }
            }
        }
        for r in 0..n {
            for c in 0..r {
                mass[r][c] = mass[c][r];
            }
            bias[r] += self.friction[r] * qd[r];
        }

        let origin = self.origin(q);
        let mut ee = origin;
        let mut jee = [[0.0; MAX_DOF]; 2];
        let mut ee_acc = [0.0; 2];
        if off == 1 {
            jee[0][0] = 1.0;
        }
        let mut tx = 0.0;
        let mut ty = 0.0;
        for k in (0..nl).rev() {
            let l = self.links[k].length;
            let (c_k, s_k) = cs[k];
            ee[0] += l * c_k;
            ee[1] += l * s_k;
            tx -= l * s_k;
            ty += l * c_k;
            jee[0][off + k] = tx;
            jee[1][off + k] = ty;
            let wk2 = omega[k] * omega[k];
            ee_acc[0] -= l * wk2 * c_k;
            ee_acc[1] -= l * wk2 * s_k;
        }
        let ee_angle = if nl > 0 { alpha[nl - 1] } else { 0.0 };

        Terms {
            n,
            mass,
            bias,
            jee,
            ee_pos: ee,
            ee_angle,
            ee_bias_acc: ee_acc,
        }
    }

    /// Joint-space inertia M(q).
    pub fn mass_matrix(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_len("q", q.len())?;
        let zeros = vec![0.0; q.len()];
        let t = self.terms(q.as_slice(), &zeros);
        Ok(DMatrix::from_fn(t.n, t.n, |r, c| t.mass[r][c]))
    }

    /// n(q, q̇): Coriolis, centrifugal, gravity and friction forces.
    pub fn bias_terms(&self, q: &DVector<f64>, qd: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len("q", q.len())?;
        self.check_len("qd", qd.len())?;
        let t = self.terms(q.as_slice(), qd.as_slice());
        Ok(DVector::from_fn(t.n, |r, _| t.bias[r]))
    }

    /// Gravity part of n(q, q̇).
    pub fn gravity_terms(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        let friction_free = Self {
            friction: vec![0.0; self.dof()],
            ..self.clone()
        };
        friction_free.bias_terms(q, &DVector::zeros(q.len()))
    }

    /// q̈ = M⁻¹(Sᵀτ − n − J_eeᵀ f_ext).
    pub fn forward_dynamics(
        &self,
        state: &RobotState,
        u: &ControlInput,
        f_ext_ee: &Vector2<f64>,
    ) -> Result<DVector<f64>> {
        self.check_len("q", state.q.len())?;
        self.check_len("qd", state.qd.len())?;
        if u.tau.len() != self.num_actuators() {
            return Err(Error::Dimension {
                what: "tau",
                expected: self.num_actuators(),
                got: u.tau.len(),
            });
        }
        let t = self.terms(state.q.as_slice(), state.qd.as_slice());
        let gen = self.generalized_force(u.tau.as_slice());
        let mut rhs = [0.0; MAX_DOF];
        for r in 0..t.n {
            rhs[r] = gen[r] - t.bias[r] - t.jee[0][r] * f_ext_ee.x - t.jee[1][r] * f_ext_ee.y;
        }
        let mut out = [0.0; MAX_DOF];
        solve_spd(&t.mass, t.n, &rhs, &mut out, self.max_condition)?;
        Ok(DVector::from_column_slice(&out[..t.n]))
    }

    pub fn ee_kinematics(&self, q: &DVector<f64>) -> Result<EePose> {
        self.check_len("q", q.len())?;
        let zeros = vec![0.0; q.len()];
        let t = self.terms(q.as_slice(), &zeros);
        Ok(EePose {
            position: Vector2::new(t.ee_pos[0], t.ee_pos[1]),
            orientation: wrap_angle(t.ee_angle),
        })
    }

    /// 2×n end-effector position Jacobian.
    pub fn ee_jacobian(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_len("q", q.len())?;
        let zeros = vec![0.0; q.len()];
        let t = self.terms(q.as_slice(), &zeros);
        Ok(DMatrix::from_fn(2, t.n, |r, c| t.jee[r][c]))
    }

    /// End-effector linear velocity J_ee q̇.
    pub fn ee_velocity(&self, state: &RobotState) -> Result<Vector2<f64>> {
        let j = self.ee_jacobian(&state.q)?;
        let v = j * &state.qd;
        Ok(Vector2::new(v[0], v[1]))
    }

    /// J_base = [I 0] stacked over J_ee; square when `base_dofs + 2 == n`.
    pub fn augmented_jacobian(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = self.dof();
        let jee = self.ee_jacobian(q)?;
        let nb = self.base_dofs;
        let mut j = DMatrix::zeros(nb + 2, n);
        for i in 0..nb {
            j[(i, i)] = 1.0;
        }
        j.rows_mut(nb, 2).copy_from(&jee);
        Ok(j)
    }

    /// Ṁ q̇, needed by the momentum observer.
    pub fn mass_matrix_rate_times_qd(&self, q: &DVector<f64>, qd: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len("q", q.len())?;
        self.check_len("qd", qd.len())?;
        let n = self.dof();
        let off = self.base_offset();
        let (alpha, omega) = self.link_angles(q.as_slice(), qd.as_slice());
        let mut out = DVector::zeros(n);
        for i in 0..self.links.len() {
            let link = &self.links[i];
            let mut jc = DMatrix::<f64>::zeros(2, n);
            let mut jdot = DMatrix::<f64>::zeros(2, n);
            if off == 1 {
                jc[(0, 0)] = 1.0;
            }
            let (s_i, c_i) = alpha[i].sin_cos();
            let (mut sx, mut sy) = (-link.com * s_i, link.com * c_i);
            let (mut dx, mut dy) = (-link.com * omega[i] * c_i, -link.com * omega[i] * s_i);
            jc[(0, off + i)] = sx;
            jc[(1, off + i)] = sy;
            jdot[(0, off + i)] = dx;
            jdot[(1, off + i)] = dy;
            for j in (0..i).rev() {
                let l = self.links[j].length;
                let (s_j, c_j) = alpha[j].sin_cos();
                sx -= l * s_j;
                sy += l * c_j;
                dx -= l * omega[j] * c_j;
                dy -= l * omega[j] * s_j;
                jc[(0, off + j)] = sx;
                jc[(1, off + j)] = sy;
                jdot[(0, off + j)] = dx;
                jdot[(1, off + j)] = dy;
            }
            let v = &jc * qd;
            let a = &jdot * qd;
            out += link.mass * (jdot.transpose() * v + jc.transpose() * a);
        }
        Ok(out)
    }

    /// ½ q̇ᵀ M q̇.
    pub fn kinetic_energy(&self, state: &RobotState) -> Result<f64> {
        let m = self.mass_matrix(&state.q)?;
        Ok(0.5 * state.qd.dot(&(m * &state.qd)))
    }

    /// Gravitational potential energy relative to y = 0.
    pub fn potential_energy(&self, q: &DVector<f64>) -> Result<f64> {
        self.check_len("q", q.len())?;
        let zeros = vec![0.0; q.len()];
        let (alpha, _) = self.link_angles(q.as_slice(), &zeros);
        let mut y = 0.0;
        let mut v = 0.0;
        for (i, link) in self.links.iter().enumerate() {
            let s = alpha[i].sin();
            v += link.mass * self.gravity * (y + link.com * s);
            y += link.length * s;
        }
        Ok(v)
    }

    /// Clamps each actuator command to its symmetric limit.
    pub fn saturate(&self, tau: &mut DVector<f64>) {
        for (t, lim) in tau.iter_mut().zip(&self.torque_limits) {
            *t = t.clamp(-lim, *lim);
        }
    }
}

/// Cholesky solve for a small SPD system stored in a fixed-size array.
///
/// The condition number is estimated from the ratio of the extreme squared
/// Cholesky pivots, a lower bound on the true 2-norm condition number.
pub(crate) fn solve_spd(
    a: &[[f64; MAX_DOF]; MAX_DOF],
    n: usize,
    b: &[f64; MAX_DOF],
    x: &mut [f64; MAX_DOF],
    max_condition: f64,
) -> Result<()> {
    let mut l = [[0.0; MAX_DOF]; MAX_DOF];
    let mut pmin = f64::INFINITY;
    let mut pmax: f64 = 0.0;
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::SingularMassMatrix(f64::INFINITY));
        }
        pmin = pmin.min(d);
        pmax = pmax.max(d);
        let dj = d.sqrt();
        l[j][j] = dj;
        for i in j + 1..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = s / dj;
        }
    }
    let cond = pmax / pmin;
    if cond > max_condition {
        return Err(Error::SingularMassMatrix(cond));
    }
    let mut y = [0.0; MAX_DOF];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    Ok(())
}
