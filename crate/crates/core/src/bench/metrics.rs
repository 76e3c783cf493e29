//! Tracking metrics computed purely from episode logs.

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

use crate::adaptive::{lyapunov, CompositeErrors, MracGains};
use crate::environment::EnvParams;
use crate::error::{Error, Result};
use crate::sim::SimLog;

/// `√(mean((d − m)²))`.
pub fn rmse(desired: &[f64], measured: &[f64]) -> Result<f64> {
    if desired.len() != measured.len() {
        return Err(Error::LengthMismatch(desired.len(), measured.len()));
    }
    if desired.is_empty() {
        return Err(Error::InvalidParameter("rmse of an empty series".into()));
    }
    let sum: f64 = desired.iter().zip(measured).map(|(d, m)| (d - m).powi(2)).sum();
    Ok((sum / desired.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    /// Degrees for doors, metres for lifting.
    pub rmse: f64,
    /// `|desired − actual|` at the last logged tick.
    pub final_error: f64,
    pub mean_force: f64,
    pub max_force: f64,
}

fn column(log: &SimLog, name: &str) -> Result<Vec<f64>> {
    log.column(name)
        .ok_or_else(|| Error::LogFormat(format!("log has no column {name:?}")))
}

pub fn episode_metrics(log: &SimLog) -> Result<EpisodeMetrics> {
    let desired = column(log, "track_ref")?;
    let actual = column(log, "track")?;
    let force = column(log, "lambda")?;
    let rmse = rmse(&desired, &actual)?;
    let last = desired.len() - 1;
    Ok(EpisodeMetrics {
        rmse,
        final_error: (desired[last] - actual[last]).abs(),
        mean_force: force.iter().sum::<f64>() / force.len() as f64,
        max_force: force.iter().fold(0.0, |a, f| a.max(f.abs())),
    })
}

/// Lyapunov value of the adaptive law at every tick, against the true
/// environment.
pub fn lyapunov_series(log: &SimLog, truth: &EnvParams, gains: &MracGains) -> Result<Vec<f64>> {
    let sigma = column(log, "sigma")?;
    let x_tilde = column(log, "x_tilde")?;
    let pi: Vec<Vec<f64>> = ["pi_m", "pi_b", "pi_k", "pi_fs"]
        .iter()
        .map(|c| column(log, c))
        .collect::<Result<_>>()?;
    let pi_true = Vector4::from(truth.as_regression());
    Ok((0..log.len())
        .map(|i| {
            let errors = CompositeErrors {
                x_tilde: x_tilde[i],
                xd_r: 0.0,
                xdd_r: 0.0,
                sigma: sigma[i],
            };
            let pi_hat = Vector4::new(pi[0][i], pi[1][i], pi[2][i], pi[3][i]);
            lyapunov(truth.m, &errors, gains, &pi_true, &pi_hat)
        })
        .collect())
}

/// Largest least-squares slope of `v` over consecutive windows of `window`
/// samples, per sample period `dt`.
pub fn max_windowed_slope(v: &[f64], window: usize, dt: f64) -> f64 {
    if window < 2 || v.len() < window {
        return 0.0;
    }
    let n = window as f64;
    let t_mean = (n - 1.0) / 2.0;
    let denom: f64 = (0..window).map(|i| (i as f64 - t_mean).powi(2)).sum::<f64>() * dt;
    v.chunks_exact(window)
        .map(|w| {
            let mean = w.iter().sum::<f64>() / n;
            w.iter()
                .enumerate()
                .map(|(i, y)| (i as f64 - t_mean) * (y - mean))
                .sum::<f64>()
                / denom
        })
        .fold(f64::NEG_INFINITY, f64::max)
}
