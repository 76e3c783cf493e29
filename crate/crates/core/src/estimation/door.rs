//! Recursive estimation of a door's hinge, radius and opening angle from the
//! stream of handle positions.
//!
//! Points are buffered until their spread is large enough for a circle to be
//! identifiable. The buffer is then fitted algebraically, refined by a few
//! geometric Gauss–Newton steps, and from there on every new point is folded
//! in by an extended Kalman filter on `[c_x, c_y, r]` with the pseudo
//! measurement `|p − c| − r = 0`.

use nalgebra::{Matrix3, RowVector3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::wrap_angle;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoorEstimatorConfig {
    /// Standard deviation of the handle position measurements, m.
    pub meas_std: f64,
    /// Largest deviation of the buffered points from their chord needed
    /// before the first fit, m. The fit also waits for ten measurement
    /// standard deviations of spread.
    pub min_sagitta: f64,
    /// Opening sense of the door.
    pub ccw: bool,
}

impl Default for DoorEstimatorConfig {
    fn default() -> Self {
        Self {
            meas_std: 2e-3,
            min_sagitta: 0.01,
            ccw: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoorEstimate {
    pub hinge: Vector2<f64>,
    pub radius: f64,
    /// Opening angle of the latest point relative to the closed-door ray, rad.
    pub angle: f64,
    /// Covariance of `[hinge_x, hinge_y, radius]`.
    pub covariance: Matrix3<f64>,
}

#[derive(Debug, Clone)]
pub struct DoorEstimator {
    config: DoorEstimatorConfig,
    buffer: Vec<Vector2<f64>>,
    mean: Option<Vector3<f64>>,
    cov: Matrix3<f64>,
    /// Absolute direction of the closed-door ray, rad.
    closed_ray: Option<f64>,
    first: Option<Vector2<f64>>,
    latest: Option<Vector2<f64>>,
}

/// Algebraic (Kåsa) circle fit: least squares on `x² + y² + D x + E y + F = 0`.
pub fn algebraic_circle_fit(points: &[Vector2<f64>]) -> Result<(Vector2<f64>, f64)> {
    if points.len() < 3 {
        return Err(Error::DegenerateGeometry(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    let centroid = points.iter().sum::<Vector2<f64>>() / points.len() as f64;
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for p in points {
        let d = p - centroid;
        let row = Vector3::new(d.x, d.y, 1.0);
        ata += row * row.transpose();
        atb -= row * d.norm_squared();
    }
    let sol = ata
        .cholesky()
        .map(|c| c.solve(&atb))
        .ok_or_else(|| Error::DegenerateGeometry("points are collinear".into()))?;
    let c = Vector2::new(-0.5 * sol.x, -0.5 * sol.y);
    let r2 = c.norm_squared() - sol.z;
    let scale = points.iter().map(|p| (p - centroid).norm()).fold(0.0, f64::max);
    if !(r2 > 0.0) || !sol.iter().all(|v| v.is_finite()) || c.norm() > 1e6 * scale.max(1e-12) {
        return Err(Error::DegenerateGeometry("points are collinear".into()));
    }
    Ok((c + centroid, r2.sqrt()))
}

/// Largest distance of the points from the chord joining the first point and
/// the point farthest from it.
fn sagitta(points: &[Vector2<f64>]) -> f64 {
    let Some(a) = points.first() else {
        return 0.0;
    };
    let b = points
        .iter()
        .max_by(|p, q| (*p - a).norm_squared().total_cmp(&(*q - a).norm_squared()))
        .unwrap_or(a);
    let chord = b - a;
    let len = chord.norm();
    if len == 0.0 {
        return 0.0;
    }
    let normal = Vector2::new(-chord.y, chord.x) / len;
    points.iter().map(|p| normal.dot(&(p - a)).abs()).fold(0.0, f64::max)
}

fn measurement_row(x: &Vector3<f64>, p: &Vector2<f64>) -> (f64, RowVector3<f64>) {
    let d = p - Vector2::new(x.x, x.y);
    let rho = d.norm().max(1e-12);
    (rho - x.z, RowVector3::new(-d.x / rho, -d.y / rho, -1.0))
}

impl DoorEstimator {
    pub fn new(config: DoorEstimatorConfig) -> Result<Self> {
        if !(config.meas_std > 0.0 && config.min_sagitta > 0.0) {
            return Err(Error::InvalidParameter(
                "door estimator tolerances must be positive".into(),
            ));
        }
        Ok(Self {
            config,
            buffer: Vec::new(),
            mean: None,
            cov: Matrix3::zeros(),
            closed_ray: None,
            first: None,
            latest: None,
        })
    }

    /// Starts from a prior circle instead of waiting for the first fit.
    pub fn with_prior(
        config: DoorEstimatorConfig,
        hinge: Vector2<f64>,
        radius: f64,
        covariance: Matrix3<f64>,
    ) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter("prior radius must be positive".into()));
        }
        let mut e = Self::new(config)?;
        e.mean = Some(Vector3::new(hinge.x, hinge.y, radius));
        e.cov = covariance;
        Ok(e)
    }

    pub fn is_initialized(&self) -> bool {
        self.mean.is_some()
    }

    /// Folds in one handle position.
    pub fn push(&mut self, p: Vector2<f64>) -> Result<()> {
        if !p.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("handle position must be finite".into()));
        }
        self.first.get_or_insert(p);
        self.latest = Some(p);
        if self.mean.is_some() {
            self.ekf_update(&p);
            return Ok(());
        }
        self.buffer.push(p);
        let spread = self.config.min_sagitta.max(10.0 * self.config.meas_std);
        if self.buffer.len() >= 3 && sagitta(&self.buffer) >= spread {
            self.initialize()?;
        }
        Ok(())
    }

    fn initialize(&mut self) -> Result<()> {
        let (c, r) = algebraic_circle_fit(&self.buffer)?;
        let mut x = Vector3::new(c.x, c.y, r);
        let var = self.config.meas_std.powi(2);
        let mut info = Matrix3::zeros();
        for _ in 0..5 {
            info = Matrix3::zeros();
            let mut grad = Vector3::zeros();
            for p in &self.buffer {
                let (res, h) = measurement_row(&x, p);
                info += h.transpose() * h / var;
                grad += h.transpose() * res / var;
            }
            let Some(chol) = info.cholesky() else {
                break;
            };
            x -= chol.solve(&grad);
        }
        let cov = info
            .try_inverse()
            .ok_or_else(|| Error::DegenerateGeometry("circle not identifiable".into()))?;
        self.mean = Some(x);
        self.cov = 0.5 * (cov + cov.transpose());
        self.buffer.clear();
        Ok(())
    }

    fn ekf_update(&mut self, p: &Vector2<f64>) {
        let Some(x) = self.mean else {
            return;
        };
        let (res, h) = measurement_row(&x, p);
        let var = self.config.meas_std.powi(2);
        let ph = self.cov * h.transpose();
        let s = (h * ph)[0] + var;
        let k = ph / s;
        let ikh = Matrix3::identity() - k * h;
        self.mean = Some(x - k * res);
        self.cov = ikh * self.cov * ikh.transpose() + k * var * k.transpose();
        self.cov = 0.5 * (self.cov + self.cov.transpose());
    }

    /// Current estimate, or `None` before the first fit.
    pub fn estimate(&self) -> Option<DoorEstimate> {
        let x = self.mean?;
        let hinge = Vector2::new(x.x, x.y);
        let first = self.first.unwrap_or(hinge + Vector2::new(0.0, -x.z));
        let ray = self.closed_ray.unwrap_or_else(|| {
            let d = first - hinge;
            d.y.atan2(d.x)
        });
        let angle = self.latest.map_or(0.0, |p| self.angle_from(&hinge, ray, &p));
        Some(DoorEstimate {
            hinge,
            radius: x.z,
            angle,
            covariance: self.cov,
        })
    }

    /// Fixes the closed-door ray instead of taking it from the first point.
    pub fn set_closed_ray(&mut self, angle: f64) {
        self.closed_ray = Some(angle);
    }

    fn angle_from(&self, hinge: &Vector2<f64>, ray: f64, p: &Vector2<f64>) -> f64 {
        let d = p - hinge;
        let a = wrap_angle(d.y.atan2(d.x) - ray);
        if self.config.ccw {
            a
        } else {
            -a
        }
    }
}

/// Batch convenience: runs the estimator over a whole stream.
pub fn estimate_door(points: &[Vector2<f64>], config: DoorEstimatorConfig) -> Result<DoorEstimate> {
    let mut est = DoorEstimator::new(config)?;
    for p in points {
        est.push(*p)?;
    }
    if points.len() < 3 {
        return Err(Error::DegenerateGeometry(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    est.estimate()
        .ok_or_else(|| Error::DegenerateGeometry("points are collinear within tolerance".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arc(n: usize, span: f64, r: f64) -> Vec<Vector2<f64>> {
        (0..n)
            .map(|i| {
                let a = -std::f64::consts::FRAC_PI_2 + span * i as f64 / (n - 1) as f64;
                r * Vector2::new(a.cos(), a.sin())
            })
            .collect()
    }

    #[test]
    fn exact_points_give_exact_circle() {
        let est = estimate_door(&arc(50, 0.7, 0.8), DoorEstimatorConfig::default()).unwrap();
        assert!(est.hinge.norm() < 1e-6);
        assert!((est.radius - 0.8).abs() < 1e-6);
    }

    #[test]
    fn angle_is_relative_to_closed_ray() {
        let theta = 0.5;
        let est = estimate_door(&arc(30, theta, 0.8), DoorEstimatorConfig::default()).unwrap();
        assert!((est.angle - theta).abs() < 1e-9);
    }

    #[test]
    fn collinear_points_are_rejected() {
        let pts: Vec<_> = (0..20).map(|i| Vector2::new(i as f64 * 0.01, 0.3)).collect();
        assert!(matches!(
            estimate_door(&pts, DoorEstimatorConfig::default()),
            Err(Error::DegenerateGeometry(_))
        ));
        assert!(algebraic_circle_fit(&pts).is_err());
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(
            estimate_door(&arc(2, 0.5, 1.0), DoorEstimatorConfig::default()),
            Err(Error::DegenerateGeometry(_))
        ));
    }
}
