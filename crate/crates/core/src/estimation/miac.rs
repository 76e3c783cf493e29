//! Kalman-filter identification of the environment parameters
//! `π = (m, b, k, f_s)` from the regression
//!
//! ```text
//! λ[k] = [(x₂[k] − x₂[k−1]) / T_s, x₂[k], x₁[k], 1] π + w[k]
//! ```
//!
//! with `x₁ = x − x₀`, `x₂ = ẋ` and a random-walk parameter model.

use nalgebra::{Matrix4, RowVector4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MiacConfig {
    /// Initial estimate `(m, b, k, f_s)`.
    pub pi0: [f64; 4],
    /// Diagonal of the initial covariance.
    pub p0: [f64; 4],
    /// Diagonal of the random-walk covariance.
    pub q: [f64; 4],
    /// Measurement variance, N².
    pub r_w: f64,
    /// Sampling time, s.
    pub ts: f64,
}

impl Default for MiacConfig {
    fn default() -> Self {
        Self {
            pi0: [0.0; 4],
            p0: [10.0, 10.0, 100.0, 25.0],
            q: [1e-6; 4],
            r_w: 0.25,
            ts: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiacFilterState {
    pub pi: Vector4<f64>,
    pub p: Matrix4<f64>,
    pub q: Matrix4<f64>,
    pub r_w: f64,
    pub ts: f64,
}

/// Diagnostics of one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiacUpdate {
    pub innovation: f64,
    /// Whether any of m̂, b̂, k̂ had to be clamped at zero.
    pub clamped: bool,
}

impl MiacFilterState {
    pub fn new(config: &MiacConfig) -> Result<Self> {
        let ok = config.p0.iter().all(|v| *v >= 0.0 && v.is_finite())
            && config.q.iter().all(|v| *v >= 0.0 && v.is_finite())
            && config.pi0.iter().all(|v| v.is_finite());
        if !ok {
            return Err(Error::InvalidParameter(
                "covariances must be finite and non-negative".into(),
            ));
        }
        if !(config.r_w > 0.0 && config.ts > 0.0) {
            return Err(Error::InvalidParameter(
                "measurement variance and sampling time must be positive".into(),
            ));
        }
        Ok(Self {
            pi: Vector4::from(config.pi0),
            p: Matrix4::from_diagonal(&Vector4::from(config.p0)),
            q: Matrix4::from_diagonal(&Vector4::from(config.q)),
            r_w: config.r_w,
            ts: config.ts,
        })
    }

    /// Regression row `H_k`.
    pub fn regressor(&self, x1: f64, x2: f64, x2_prev: f64) -> RowVector4<f64> {
        RowVector4::new((x2 - x2_prev) / self.ts, x2, x1, 1.0)
    }

    /// Random-walk prediction followed by the measurement update in Joseph
    /// form, then projection onto `m, b, k ≥ 0`.
    pub fn update(&mut self, x1: f64, x2: f64, x2_prev: f64, lambda: f64) -> MiacUpdate {
        let h = self.regressor(x1, x2, x2_prev);
        self.update_with(&h, lambda)
    }

    pub fn update_with(&mut self, h: &RowVector4<f64>, lambda: f64) -> MiacUpdate {
        self.p += self.q;
        let innovation = lambda - (h * self.pi)[0];
        let ph = self.p * h.transpose();
        let s = (h * ph)[0] + self.r_w;
        let k = ph / s;
        self.pi += k * innovation;
        let ikh = Matrix4::identity() - k * h;
        self.p = ikh * self.p * ikh.transpose() + k * self.r_w * k.transpose();
        self.p = 0.5 * (self.p + self.p.transpose());
        let mut clamped = false;
        for i in 0..3 {
            if self.pi[i] < 0.0 {
                self.pi[i] = 0.0;
                clamped = true;
            }
        }
        MiacUpdate { innovation, clamped }
    }
}
