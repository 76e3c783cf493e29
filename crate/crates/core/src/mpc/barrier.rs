//! Relaxed logarithmic barrier for soft inequality constraints `h ≥ 0`.
//!
//! For `h > δ` the penalty is `−μ ln h`. Below `δ` it continues as the
//! quadratic that matches value, slope and curvature at `h = δ`, so the
//! penalty is finite for every real `h` and grows quadratically with the
//! violation.

/// Penalty value.
pub fn relaxed_log_barrier(h: f64, mu: f64, delta: f64) -> f64 {
    if h > delta {
        -mu * h.ln()
    } else {
        let z = (h - 2.0 * delta) / delta;
        0.5 * mu * (z * z - 1.0) - mu * delta.ln()
    }
}

/// First derivative with respect to `h`.
pub fn relaxed_log_barrier_slope(h: f64, mu: f64, delta: f64) -> f64 {
    if h > delta {
        -mu / h
    } else {
        mu * (h - 2.0 * delta) / (delta * delta)
    }
}

/// Second derivative with respect to `h`.
pub fn relaxed_log_barrier_curvature(h: f64, mu: f64, delta: f64) -> f64 {
    if h > delta {
        mu / (h * h)
    } else {
        mu / (delta * delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_at_unit_margin() {
        assert_eq!(relaxed_log_barrier(1.0, 1.0, 0.1), 0.0);
    }

    #[test]
    fn branches_join_smoothly() {
        for &(mu, delta) in &[(1.0, 0.1), (1e-2, 1e-3), (3.0, 0.5)] {
            let inner = -mu * f64::ln(delta);
            let outer_z: f64 = -1.0;
            let outer = 0.5 * mu * (outer_z * outer_z - 1.0) - mu * f64::ln(delta);
            assert_eq!(inner, outer);
            assert_eq!(relaxed_log_barrier(delta, mu, delta), inner);
            let log_slope = -mu / delta;
            let quad_slope = mu * (delta - 2.0 * delta) / (delta * delta);
            assert!((log_slope - quad_slope).abs() <= 4.0 * f64::EPSILON * log_slope.abs());
            // the function is continuous across the switch
            let eps = delta * 1e-9;
            let l = relaxed_log_barrier(delta + eps, mu, delta);
            let r = relaxed_log_barrier(delta - eps, mu, delta);
            assert!((l - r).abs() < 1e-6 * mu);
        }
    }

    #[test]
    fn finite_and_increasing_when_violated() {
        let (mu, delta) = (1.0, 0.1);
        let mut prev = relaxed_log_barrier(delta, mu, delta);
        let mut h = delta;
        while h > -1.0 {
            h -= 0.01;
            let v = relaxed_log_barrier(h, mu, delta);
            assert!(v.is_finite() && v > prev);
            prev = v;
        }
    }
}
