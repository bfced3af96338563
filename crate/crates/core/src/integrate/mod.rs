//! Numerical integration of the four systems and trajectory recording.
//!
//! Second-order systems are integrated on the stacked state `(x, v)`. For
//! first-order systems the recorded `v` is `ẋ` re-evaluated from the
//! right-hand side at each sample.

mod metrics;
mod solver;

pub use metrics::{record_metrics, write_csv, MetricSeries};
pub use solver::{solve_ivp, OdeSolution, StepControl, StepStats, MAX_STEPS, MIN_STEP_FRACTION};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::FlowRhs;
use crate::operators::{ensure_finite, Vector};

/// Default number of evenly spaced samples.
pub const DEFAULT_SAMPLES: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub x0: Vector,
    pub v0: Option<Vector>,
}

impl InitialState {
    pub fn first_order(x0: Vector) -> Self {
        Self { x0, v0: None }
    }

    pub fn second_order(x0: Vector, v0: Vector) -> Self {
        Self { x0, v0: Some(v0) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: Vector,
    pub v: Vector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryInfo {
    pub solver: String,
    pub control: StepControl,
    pub t_end: f64,
    pub stats: StepStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub order: usize,
    pub dim: usize,
    pub samples: Vec<Sample>,
    pub info: TrajectoryInfo,
}

impl Trajectory {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectories are never empty")
    }
}

/// Integrate `flow` from `init` on `[0, t_end]` with at least
/// [`DEFAULT_SAMPLES`] evenly spaced samples.
pub fn integrate(flow: &FlowRhs, init: &InitialState, t_end: f64, control: StepControl) -> Result<Trajectory> {
    integrate_with_samples(flow, init, t_end, control, DEFAULT_SAMPLES)
}

pub fn integrate_with_samples(
    flow: &FlowRhs,
    init: &InitialState,
    t_end: f64,
    control: StepControl,
    samples: usize,
) -> Result<Trajectory> {
    flow.check_state(&init.x0)?;
    ensure_finite(&init.x0, "x₀")?;
    let dim = init.x0.len();
    let order = flow.order();
    let samples = samples.max(DEFAULT_SAMPLES);
    let y0 = match (order, &init.v0) {
        (1, _) => init.x0.clone(),
        (_, Some(v0)) => {
            if v0.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: v0.len() });
            }
            ensure_finite(v0, "v₀")?;
            let mut y = Vector::zeros(2 * dim);
            y.rows_mut(0, dim).copy_from(&init.x0);
            y.rows_mut(dim, dim).copy_from(v0);
            y
        }
        (_, None) => return Err(Error::Missing("initial velocity v₀ for a second-order system".into())),
    };

    let rhs = |t: f64, y: &Vector| flow.state_derivative(t, y);
    let sol = solve_ivp(&rhs, &y0, t_end, control, samples)?;

    let samples = sol
        .t
        .iter()
        .zip(sol.y)
        .map(|(&t, y)| {
            if order == 1 {
                let v = flow.velocity(t, &y);
                Sample { t, x: y, v }
            } else {
                Sample { t, x: y.rows(0, dim).into_owned(), v: y.rows(dim, dim).into_owned() }
            }
        })
        .collect();
    Ok(Trajectory {
        order,
        dim,
        samples,
        info: TrajectoryInfo { solver: control.solver_name().into(), control, t_end, stats: sol.stats },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{grad1_rhs, grad2_rhs, Schedule};
    use crate::operators::{FunctionOracle, Quadratic};
    use nalgebra::{dvector, DMatrix};
    use std::sync::Arc;

    fn half_sq() -> Arc<dyn FunctionOracle> {
        Arc::new(Quadratic::new(DMatrix::identity(1, 1), dvector![0.0]).unwrap())
    }

    #[test]
    fn first_order_decay() {
        let flow = grad1_rhs(half_sq(), Schedule::constant(1.0, None)).unwrap();
        let traj = integrate(&flow, &InitialState::first_order(dvector![1.0]), 1.0, StepControl::default()).unwrap();
        assert_eq!(traj.samples[0].x, dvector![1.0]);
        assert!((traj.last().x[0] - 0.3678794).abs() < 1e-6);
        assert!((traj.last().x[0] - (-1f64).exp()).abs() < 1e-8);
        // v is the recomputed right-hand side.
        assert!((traj.last().v[0] + traj.last().x[0]).abs() < 1e-15);
    }

    #[test]
    fn second_order_overdamped() {
        // ẍ + 3ẋ + 2x = 0 with x(0) = 1, ẋ(0) = −1 has x(t) = e^{−t}.
        let flow = grad2_rhs(half_sq(), Schedule::constant(2.0, Some(3.0))).unwrap();
        let init = InitialState::second_order(dvector![1.0], dvector![-1.0]);
        let traj = integrate(&flow, &init, 1.0, StepControl::default()).unwrap();
        assert!((traj.last().x[0] - (-1f64).exp()).abs() < 1e-8);
        assert!((traj.last().v[0] + (-1f64).exp()).abs() < 1e-8);
        assert_eq!(traj.samples[0].v, dvector![-1.0]);
    }

    #[test]
    fn second_order_needs_velocity() {
        let flow = grad2_rhs(half_sq(), Schedule::constant(2.0, Some(3.0))).unwrap();
        let err = integrate(&flow, &InitialState::first_order(dvector![1.0]), 1.0, StepControl::default());
        assert!(matches!(err, Err(Error::Missing(_))));
        let err = integrate(&flow, &InitialState::second_order(dvector![1.0], dvector![1.0, 2.0]), 1.0, StepControl::default());
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn dimension_is_checked() {
        let flow = grad1_rhs(half_sq(), Schedule::constant(1.0, None)).unwrap();
        let err = integrate(&flow, &InitialState::first_order(dvector![1.0, 2.0]), 1.0, StepControl::default());
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }
}
