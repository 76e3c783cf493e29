//! Model-reference adaptation of the virtual end-effector force.
//!
//! With `x̃ = x_d − x`, `ẋ_r = ẋ_d + Λx̃`, `σ = ẋ_r − ẋ` and the regressor
//! `Y = [ẍ_r, ẋ_r, x − x₀, 1]`, the commanded interaction force is
//! `λ_cmd = Y π̂ + k_s σ`, applied along the task direction, and the
//! estimate follows `π̂̇ = K_π⁻¹ Yᵀ σ`.

use nalgebra::{Matrix4, RowVector4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::environment::TaskDirection;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MracGains {
    /// Λ, 1/s.
    pub lambda: f64,
    /// k_s, N·s/m.
    pub k_s: f64,
    /// Diagonal of K_π.
    pub k_pi: [f64; 4],
}

impl MracGains {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.k_s > 0.0) {
            return Err(Error::InvalidParameter("Λ and k_s must be positive".into()));
        }
        if self.k_pi.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
            return Err(Error::InvalidParameter("K_π must be positive definite".into()));
        }
        Ok(())
    }

    pub fn k_pi_matrix(&self) -> Matrix4<f64> {
        Matrix4::from_diagonal(&Vector4::from(self.k_pi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositeErrors {
    pub x_tilde: f64,
    pub xd_r: f64,
    pub xdd_r: f64,
    pub sigma: f64,
}

pub fn composite_errors(x_d: f64, xd_d: f64, xdd_d: f64, x: f64, xd: f64, lambda: f64) -> CompositeErrors {
    let x_tilde = x_d - x;
    let x_tilde_dot = xd_d - xd;
    let xd_r = xd_d + lambda * x_tilde;
    CompositeErrors {
        x_tilde,
        xd_r,
        xdd_r: xdd_d + lambda * x_tilde_dot,
        sigma: xd_r - xd,
    }
}

/// `Y = [ẍ_r, ẋ_r, x − x₀, 1]`.
pub fn regressor(xdd_r: f64, xd_r: f64, x: f64, x0: f64) -> RowVector4<f64> {
    RowVector4::new(xdd_r, xd_r, x - x0, 1.0)
}

/// Explicit Euler step of `π̂̇ = K_π⁻¹ Yᵀ σ`.
pub fn adaptation_step(
    pi_hat: &Vector4<f64>,
    y: &RowVector4<f64>,
    sigma: f64,
    k_pi: &Matrix4<f64>,
    dt: f64,
) -> Result<Vector4<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter("adaptation step must be positive".into()));
    }
    let rate = k_pi
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("K_π must be positive definite".into()))?
        .solve(&(y.transpose() * sigma));
    Ok(pi_hat + rate * dt)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlForce {
    pub f_ee: Vector2<f64>,
    /// `Y π̂`, N.
    pub adaptive: f64,
    /// `k_s σ`, N.
    pub pd: f64,
}

impl ControlForce {
    pub fn lambda_cmd(&self) -> f64 {
        self.adaptive + self.pd
    }
}

pub fn control_force(
    pi_hat: &Vector4<f64>,
    y: &RowVector4<f64>,
    sigma: f64,
    k_s: f64,
    v: &TaskDirection,
) -> ControlForce {
    let adaptive = (y * pi_hat)[0];
    let pd = k_s * sigma;
    ControlForce {
        f_ee: (adaptive + pd) * v.vector(),
        adaptive,
        pd,
    }
}

/// `V = ½ m σ² + Λ k_s x̃² + ½ π̃ᵀ K_π π̃` with `π̃ = π − π̂`; needs the true
/// parameters, so it is only available in simulation.
pub fn lyapunov(
    m: f64,
    errors: &CompositeErrors,
    gains: &MracGains,
    pi_true: &Vector4<f64>,
    pi_hat: &Vector4<f64>,
) -> f64 {
    let pt = pi_true - pi_hat;
    0.5 * m * errors.sigma.powi(2)
        + gains.lambda * gains.k_s * errors.x_tilde.powi(2)
        + 0.5 * pt.dot(&(gains.k_pi_matrix() * pt))
}

/// Per-tick record of the adaptive law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MracOutput {
    pub errors: CompositeErrors,
    pub y: RowVector4<f64>,
    pub force: ControlForce,
    pub pi_hat: Vector4<f64>,
}

/// Adaptive law with its running estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct MracState {
    pub gains: MracGains,
    pub pi_hat: Vector4<f64>,
    /// Spring origin `x₀` along the task coordinate.
    pub x0: f64,
}

impl MracState {
    pub fn new(gains: MracGains, x0: f64) -> Result<Self> {
        gains.validate()?;
        Ok(Self {
            gains,
            pi_hat: Vector4::zeros(),
            x0,
        })
    }

    pub fn with_estimate(mut self, pi_hat: Vector4<f64>) -> Self {
        self.pi_hat = pi_hat;
        self
    }

    /// Computes the force with the current estimate, then adapts.
    pub fn tick(
        &mut self,
        reference: (f64, f64, f64),
        x: f64,
        xd: f64,
        v: &TaskDirection,
        dt: f64,
    ) -> Result<MracOutput> {
        let (x_d, xd_d, xdd_d) = reference;
        let errors = composite_errors(x_d, xd_d, xdd_d, x, xd, self.gains.lambda);
        let y = regressor(errors.xdd_r, errors.xd_r, x, self.x0);
        let force = control_force(&self.pi_hat, &y, errors.sigma, self.gains.k_s, v);
        self.pi_hat = adaptation_step(&self.pi_hat, &y, errors.sigma, &self.gains.k_pi_matrix(), dt)?;
        Ok(MracOutput {
            errors,
            y,
            force,
            pi_hat: self.pi_hat,
        })
    }
}
