//! Receding-horizon wrapper: warm starts each solve from the previous plan
//! shifted to the current time and falls back to that plan on failure.

use nalgebra::DVector;

use super::slq::{SlqSettings, SolveStatus, WarmStart};
use super::{solve, Constraints, MpcCost, MpcModel, MpcReference, MpcSolution};
use crate::error::{Error, Result};
use crate::model::RobotState;

/// Head of the plan at the tick time plus solver diagnostics.
#[derive(Debug, Clone)]
pub struct TickOutput {
    pub tau: DVector<f64>,
    pub q: DVector<f64>,
    pub qd: DVector<f64>,
    /// `None` when the solve failed and the previous plan was reused.
    pub status: Option<SolveStatus>,
    pub iterations: usize,
    pub cost: f64,
}

/// Load stages of a cold start whose direct solve diverged.
const CONTINUATION_STAGES: usize = 8;
/// Least SLQ iterations per continuation stage.
const CONTINUATION_ITERATIONS: usize = 10;

#[derive(Debug, Clone)]
pub struct RecedingHorizon {
    pub settings: SlqSettings,
    plan: Option<(MpcSolution, f64)>,
}

impl RecedingHorizon {
    pub fn new(settings: SlqSettings) -> Self {
        Self { settings, plan: None }
    }

    /// The current plan and the time it was computed for.
    pub fn plan(&self) -> Option<(&MpcSolution, f64)> {
        self.plan.as_ref().map(|(p, t)| (p, *t))
    }

    pub fn reset(&mut self) {
        self.plan = None;
    }

    /// Planned input and state at absolute time `t`.
    pub fn sample(&self, t: f64) -> Option<(DVector<f64>, RobotState)> {
        let (plan, t0) = self.plan.as_ref()?;
        let (u, x) = plan.sample(t - t0);
        Some((u, RobotState::from_stacked(x.as_slice())))
    }

    /// Previous plan shifted to start at `t`, holding its last input.
    fn shifted(&self, t: f64) -> Option<WarmStart> {
        let (plan, t0) = self.plan.as_ref()?;
        let n = self.settings.nodes;
        if plan.inputs.len() != n {
            return None;
        }
        let dt = self.settings.node_dt();
        let elapsed = (t - t0).max(0.0);
        let last = plan.gains.len() - 1;
        let mut inputs = Vec::with_capacity(n);
        let mut states = Vec::with_capacity(n + 1);
        let mut gains = Vec::with_capacity(n);
        for k in 0..=n {
            let tk = elapsed + k as f64 * dt;
            let (u, x) = plan.sample(tk);
            states.push(x);
            if k < n {
                inputs.push(u);
                let idx = ((tk / plan.dt).floor() as usize).min(last);
                gains.push(plan.gains[idx].clone());
            }
        }
        Some(WarmStart {
            inputs,
            states: Some(states),
            gains: Some(gains),
        })
    }

    /// Solves without a usable previous plan. If the open-loop initial rollout
    /// diverges, the static loads of the model (virtual force, spring and
    /// static environment force) are ramped up from zero, each stage warm
    /// started with the feedback of the one before.
    fn cold_start(
        &self,
        model: &MpcModel,
        cost: &MpcCost,
        reference: &MpcReference,
        constraints: &Constraints,
        x0: &RobotState,
    ) -> Result<MpcSolution> {
        match solve(model, cost, reference, constraints, x0, &self.settings, None) {
            Err(Error::Divergence { iteration: 0 }) => {}
            other => return other,
        }
        let settings = SlqSettings {
            max_iterations: self.settings.max_iterations.max(CONTINUATION_ITERATIONS),
            ..self.settings
        };
        let mut warm = None;
        let mut last = None;
        for stage in 0..=CONTINUATION_STAGES {
            let alpha = stage as f64 / CONTINUATION_STAGES as f64;
            let mut scaled = model.clone();
            scaled.f_ee *= alpha;
            if let Some(c) = &mut scaled.contact {
                c.params.k *= alpha;
                c.params.f_s *= alpha;
            }
            let start = match warm.take() {
                Some(w) => w,
                None => WarmStart::constant(scaled.static_input(&x0.q)?, settings.nodes),
            };
            let sol = solve(&scaled, cost, reference, constraints, x0, &settings, Some(&start))?;
            warm = Some(WarmStart {
                inputs: sol.inputs.clone(),
                states: Some(sol.states.clone()),
                gains: Some(sol.gains.clone()),
            });
            last = Some(sol);
        }
        last.ok_or(Error::Divergence { iteration: 0 })
    }

    /// Installs the current model, solves from `x0` and returns the head of
    /// the new plan. A failed solve reuses the previous plan if there is one.
    pub fn tick(
        &mut self,
        t: f64,
        model: &MpcModel,
        cost: &MpcCost,
        reference: &MpcReference,
        constraints: &Constraints,
        x0: &RobotState,
    ) -> Result<TickOutput> {
        let result = match self.shifted(t) {
            Some(warm) => match solve(model, cost, reference, constraints, x0, &self.settings, Some(&warm)) {
                Err(Error::Divergence { iteration: 0 }) => self.cold_start(model, cost, reference, constraints, x0),
                other => other,
            },
            None => self.cold_start(model, cost, reference, constraints, x0),
        };
        match result {
            Ok(sol) => {
                let out = TickOutput {
                    tau: sol.inputs[0].clone(),
                    q: x0.q.clone(),
                    qd: x0.qd.clone(),
                    status: Some(sol.status),
                    iterations: sol.iterations,
                    cost: sol.cost,
                };
                self.plan = Some((sol, t));
                Ok(out)
            }
            Err(e) => {
                let Some((u, x)) = self.sample(t) else {
                    return Err(e);
                };
                Ok(TickOutput {
                    tau: u,
                    q: x.q,
                    qd: x.qd,
                    status: None,
                    iterations: 0,
                    cost: f64::NAN,
                })
            }
        }
    }
}
