//! End-effector force recovery from external generalized torques through the
//! augmented Jacobian `J_aug = [J_base; J_ee]`.

use nalgebra::{DVector, Vector2};

use crate::environment::{project, TaskDirection};
use crate::error::{Error, Result};
use crate::model::RobotModel;

/// Condition number above which `J_aug` is treated as singular.
pub const DEFAULT_MAX_JACOBIAN_CONDITION: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct ForceEstimate {
    /// Force the robot exerts on the environment, N.
    pub lambda_ee: Vector2<f64>,
    /// `vᵀ λ_ee`.
    pub lambda: f64,
    /// Base wrench components.
    pub tau_base: DVector<f64>,
}

/// Solves `J_augᵀ [τ_base; λ_ee] = τ_ext`.
pub fn extract_ee_force(
    model: &RobotModel,
    q: &DVector<f64>,
    tau_ext: &DVector<f64>,
    v: &TaskDirection,
    max_condition: f64,
) -> Result<ForceEstimate> {
    let n = model.dof();
    if tau_ext.len() != n {
        return Err(Error::Dimension {
            what: "external torque",
            expected: n,
            got: tau_ext.len(),
        });
    }
    let j = model.augmented_jacobian(q)?;
    if j.nrows() != n {
        return Err(Error::Dimension {
            what: "augmented jacobian rows",
            expected: n,
            got: j.nrows(),
        });
    }
    let sv = j.singular_values();
    let cond = sv.max() / sv.min();
    if !(cond <= max_condition) {
        return Err(Error::KinematicSingularity(cond));
    }
    let w = j
        .transpose()
        .lu()
        .solve(tau_ext)
        .ok_or(Error::KinematicSingularity(f64::INFINITY))?;
    let nb = model.base_dofs;
    let lambda_ee = Vector2::new(w[nb], w[nb + 1]);
    Ok(ForceEstimate {
        lambda_ee,
        lambda: project(v, &lambda_ee),
        tau_base: w.rows(0, nb).into_owned(),
    })
}
