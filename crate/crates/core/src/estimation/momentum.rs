//! Generalized-momentum disturbance observer.
//!
//! With `p = M(q) q̇` the robot obeys `ṗ = Sᵀτ − n + Ṁq̇ − τ_ext`, so the
//! residual
//!
//! ```text
//! τ̂_ext = K_o (∫ (Sᵀτ − n + Ṁq̇ − τ̂_ext) dt − (p − p₀))
//! ```
//!
//! follows `τ̂̇_ext = K_o (τ_ext − τ̂_ext)` without measuring accelerations.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::{RobotModel, RobotState};

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumObserver {
    /// Diagonal observer gain K_o, 1/s.
    gain: DVector<f64>,
    integral: DVector<f64>,
    tau_ext: DVector<f64>,
    p0: Option<DVector<f64>>,
}

impl MomentumObserver {
    pub fn new(gain: DVector<f64>) -> Result<Self> {
        if gain.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
            return Err(Error::InvalidParameter("observer gains must be positive".into()));
        }
        let n = gain.len();
        Ok(Self {
            gain,
            integral: DVector::zeros(n),
            tau_ext: DVector::zeros(n),
            p0: None,
        })
    }

    pub fn uniform(n: usize, k: f64) -> Result<Self> {
        Self::new(DVector::from_element(n, k))
    }

    pub fn gain(&self) -> &DVector<f64> {
        &self.gain
    }

    pub fn estimate(&self) -> &DVector<f64> {
        &self.tau_ext
    }

    pub fn reset(&mut self) {
        self.integral.fill(0.0);
        self.tau_ext.fill(0.0);
        self.p0 = None;
    }

    /// Advances the observer by `dt` with the actuator torques applied over
    /// the step and returns the new estimate.
    pub fn step(
        &mut self,
        model: &RobotModel,
        state: &RobotState,
        tau_applied: &DVector<f64>,
        dt: f64,
    ) -> Result<&DVector<f64>> {
        let n = model.dof();
        if self.gain.len() != n {
            return Err(Error::Dimension {
                what: "observer gain",
                expected: n,
                got: self.gain.len(),
            });
        }
        if tau_applied.len() != model.num_actuators() {
            return Err(Error::Dimension {
                what: "applied torque",
                expected: model.num_actuators(),
                got: tau_applied.len(),
            });
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter("observer step must be positive".into()));
        }
        let m = model.mass_matrix(&state.q)?;
        let p = &m * &state.qd;
        let Some(p0) = &self.p0 else {
            self.p0 = Some(p);
            return Ok(&self.tau_ext);
        };
        let bias = model.bias_terms(&state.q, &state.qd)?;
        let mdot_qd = model.mass_matrix_rate_times_qd(&state.q, &state.qd)?;
        let gen = model.selection_matrix().transpose() * tau_applied;
        self.integral += (gen - bias + mdot_qd - &self.tau_ext) * dt;
        self.tau_ext = (&self.integral - (p - p0)).component_mul(&self.gain);
        Ok(&self.tau_ext)
    }
}
