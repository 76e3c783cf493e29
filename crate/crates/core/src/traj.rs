//! Time-optimal reference generation along a single line or arc segment.
//!
//! The profile is trapezoidal (or triangular) in arc length: accelerate at
//! `a_max`, cruise at most at `v_max`, brake at `a_max` to rest at the end of
//! the path. It can be recomputed in O(1) from any reachable interior state,
//! which is what the door task needs when the hinge estimate moves.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::environment::{EnvGeometry, TaskDirection};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathSpec {
    Line {
        start: Vector2<f64>,
        end: Vector2<f64>,
    },
    Arc {
        center: Vector2<f64>,
        radius: f64,
        angle_start: f64,
        angle_end: f64,
    },
}

impl PathSpec {
    pub fn length(&self) -> f64 {
        match *self {
            PathSpec::Line { start, end } => (end - start).norm(),
            PathSpec::Arc {
                radius,
                angle_start,
                angle_end,
                ..
            } => radius * (angle_end - angle_start).abs(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let PathSpec::Arc { radius, .. } = *self {
            if !(radius > 0.0) {
                return Err(Error::InvalidParameter("arc radius must be positive".into()));
            }
        }
        let len = self.length();
        if !(len > 0.0 && len.is_finite()) {
            return Err(Error::InvalidParameter("path must have non-zero finite length".into()));
        }
        Ok(())
    }

    /// The path as an environment coordinate with `s = 0` at the start.
    pub fn geometry(&self) -> EnvGeometry {
        match *self {
            PathSpec::Line { start, end } => EnvGeometry::Line {
                origin: start,
                direction: (end - start).normalize(),
            },
            PathSpec::Arc {
                center,
                radius,
                angle_start,
                angle_end,
            } => EnvGeometry::Arc {
                hinge: center,
                radius,
                closed_angle: angle_start,
                ccw: angle_end >= angle_start,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KinematicBounds {
    /// m/s
    pub v_max: f64,
    /// m/s²
    pub a_max: f64,
}

impl KinematicBounds {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_max > 0.0 && self.a_max > 0.0 && self.v_max.is_finite() && self.a_max.is_finite()) {
            return Err(Error::InvalidParameter("kinematic bounds must be positive".into()));
        }
        Ok(())
    }
}

/// Desired motion at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    /// Arc length along the path, m.
    pub x_d: f64,
    pub xd_d: f64,
    pub xdd_d: f64,
    pub ee_pos: Vector2<f64>,
    pub ee_vel: Vector2<f64>,
    pub ee_acc: Vector2<f64>,
    pub v: TaskDirection,
}

/// A planned trapezoidal profile; times are relative to the planning instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Profile {
    pub path: PathSpec,
    pub bounds: KinematicBounds,
    pub s0: f64,
    pub v0: f64,
    pub v_peak: f64,
    /// Durations of the acceleration, cruise and braking phases.
    pub t_accel: f64,
    pub t_cruise: f64,
    pub t_brake: f64,
}

impl Profile {
    pub fn duration(&self) -> f64 {
        self.t_accel + self.t_cruise + self.t_brake
    }

    /// Arc length, speed and acceleration at time `t` after planning; the
    /// start is held before that.
    pub fn state_at(&self, t: f64) -> (f64, f64, f64) {
        let a = self.bounds.a_max;
        if t < 0.0 {
            return (self.s0, self.v0, 0.0);
        }
        let (t1, t2, t3) = (self.t_accel, self.t_cruise, self.t_brake);
        let d1 = 0.5 * (self.v0 + self.v_peak) * t1;
        let d2 = self.v_peak * t2;
        if t < t1 {
            (self.s0 + self.v0 * t + 0.5 * a * t * t, self.v0 + a * t, a)
        } else if t < t1 + t2 {
            let tc = t - t1;
            (self.s0 + d1 + self.v_peak * tc, self.v_peak, 0.0)
        } else if t < t1 + t2 + t3 {
            let tb = t - t1 - t2;
            (
                self.s0 + d1 + d2 + self.v_peak * tb - 0.5 * a * tb * tb,
                self.v_peak - a * tb,
                -a,
            )
        } else {
            (self.path.length(), 0.0, 0.0)
        }
    }
}

/// Plans the minimum-time trapezoidal profile from `(current_s, current_speed)`
/// to rest at the end of `path`.
pub fn plan(path: &PathSpec, bounds: &KinematicBounds, current_s: f64, current_speed: f64) -> Result<Profile> {
    path.validate()?;
    bounds.validate()?;
    let a = bounds.a_max;
    let v0 = current_speed;
    if !(v0 >= 0.0) || v0 > bounds.v_max * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "current speed {v0} outside [0, v_max = {}]",
            bounds.v_max
        )));
    }
    let v0 = v0.min(bounds.v_max);
    let length = path.length();
    let remaining = length - current_s;
    let braking = v0 * v0 / (2.0 * a);
    let slack = 1e-9 * length.max(1.0);
    if remaining < braking - slack {
        return Err(Error::InfeasibleProfile { speed: v0, remaining });
    }
    let remaining = remaining.max(braking);
    let v_peak = (a * remaining + 0.5 * v0 * v0).sqrt().min(bounds.v_max).max(v0);
    let t_accel = (v_peak - v0) / a;
    let t_brake = v_peak / a;
    let ramp_dist = (v_peak * v_peak - v0 * v0) / (2.0 * a) + v_peak * v_peak / (2.0 * a);
    let t_cruise = if v_peak > 0.0 {
        ((remaining - ramp_dist) / v_peak).max(0.0)
    } else {
        0.0
    };
    Ok(Profile {
        path: *path,
        bounds: *bounds,
        s0: current_s,
        v0,
        v_peak,
        t_accel,
        t_cruise,
        t_brake,
    })
}

/// Reference at time `t` after planning; holds the terminal point once the
/// profile has finished.
pub fn sample(profile: &Profile, t: f64) -> Reference {
    let (s, sd, sdd) = profile.state_at(t);
    let geom = profile.path.geometry();
    let tangent = geom.tangent_at(s);
    let tv = tangent.vector();
    let normal_acc = match geom {
        EnvGeometry::Arc { hinge, .. } => {
            let p = geom.point_at(s);
            let inward = (hinge - p).normalize();
            inward * sd * sd * geom.curvature()
        }
        EnvGeometry::Line { .. } => Vector2::zeros(),
    };
    Reference {
        x_d: s,
        xd_d: sd,
        xdd_d: sdd,
        ee_pos: geom.point_at(s),
        ee_vel: tv * sd,
        ee_acc: tv * sdd + normal_acc,
        v: tangent,
    }
}
