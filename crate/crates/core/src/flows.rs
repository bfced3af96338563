//! Right-hand sides of the four dynamical systems and the time-varying
//! parameters that drive them.
//!
//! | kind    | system                                              |
//! |---------|-----------------------------------------------------|
//! | `Fb1`   | `ẋ = λ(t)[J_{ηA}(x − ηBx) − x]`                     |
//! | `Fb2`   | `ẍ + γ(t)ẋ + λ(t)[x − J_{ηA}(x − ηBx)] = 0`         |
//! | `Grad1` | `ẋ + λ(t)∇g(x) = 0`                                 |
//! | `Grad2` | `ẍ + γ(t)ẋ + λ(t)∇g(x) = 0`                         |
//!
//! Solutions are only required to satisfy these equations for almost every
//! `t`; numerically the right-hand side is evaluated pointwise everywhere.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::certificates::CheckedInequality;
use crate::error::{Error, Result};
use crate::operators::{ensure_dim, FunctionOracle, MonotoneMap, ResolventOracle, Vector};

/// Slack for conditions checked on a time grid.
pub const GRID_SLACK: f64 = 1e-9;

/// Default number of grid points for time-varying checks.
pub const DEFAULT_GRID_POINTS: usize = 2000;

/// Evenly spaced check points on `[0, t_end]`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_end: f64,
    pub points: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, points: usize) -> Result<Self> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::InvalidParameter(format!("grid horizon must be positive, got {t_end}")));
        }
        if points < 2 {
            return Err(Error::InvalidParameter("grid needs at least two points".into()));
        }
        Ok(Self { t_end, points })
    }

    pub fn with_horizon(t_end: f64) -> Result<Self> {
        Self::new(t_end, DEFAULT_GRID_POINTS)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.points - 1;
        (0..=n).map(move |i| self.t_end * i as f64 / n as f64)
    }
}

/// A user-supplied scalar function of time.
#[derive(Clone)]
pub struct CustomProfile {
    pub label: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl CustomProfile {
    pub fn new(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { label: label.into(), f: Arc::new(f) }
    }
}

impl fmt::Debug for CustomProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomProfile({})", self.label)
    }
}

impl PartialEq for CustomProfile {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.f, &other.f)
    }
}

/// A scalar parameter `t ↦ p(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum Profile {
    Constant { value: f64 },
    /// `end + (start − end)·exp(−rate·t)`, monotone between `start` and `end`.
    Exponential { start: f64, end: f64, rate: f64 },
    #[serde(skip)]
    Custom(CustomProfile),
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Profile::Constant { value }
    }

    pub fn custom(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Profile::Custom(CustomProfile::new(label, f))
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::Exponential { start, end, rate } => end + (start - end) * (-rate * t).exp(),
            Profile::Custom(c) => (c.f)(t),
        }
    }

    /// Exact `(inf, sup)` over `t ≥ 0` when known in closed form.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self {
            Profile::Constant { value } => Some((*value, *value)),
            Profile::Exponential { start, end, rate } => {
                if *rate >= 0.0 {
                    Some((start.min(*end), start.max(*end)))
                } else {
                    None
                }
            }
            Profile::Custom(_) => None,
        }
    }

    pub fn validate(&self, what: &str) -> Result<()> {
        let ok = match self {
            Profile::Constant { value } => value.is_finite(),
            Profile::Exponential { start, end, rate } => {
                start.is_finite() && end.is_finite() && rate.is_finite() && *rate >= 0.0
            }
            Profile::Custom(_) => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{what} profile has invalid parameters: {self:?}")))
        }
    }
}

/// Time-varying parameters `λ(t)`, `γ(t)`, `α(t)` plus declared bounds and
/// monotonicity flags. Flags are trusted inputs, re-checked on a grid by
/// [`Schedule::check`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Schedule {
    pub lambda: Option<Profile>,
    pub gamma: Option<Profile>,
    pub alpha: Option<Profile>,
    pub lambda_lower: Option<f64>,
    pub lambda_upper: Option<f64>,
    #[serde(default)]
    pub gamma_nonincreasing: bool,
    #[serde(default)]
    pub gamma_over_lambda_nonincreasing: bool,
}

impl Schedule {
    pub fn with_lambda(lambda: Profile) -> Self {
        Self { lambda: Some(lambda), ..Self::default() }
    }

    /// Constant `λ` and `γ`; both flags hold trivially.
    pub fn constant(lambda: f64, gamma: Option<f64>) -> Self {
        Self {
            lambda: Some(Profile::constant(lambda)),
            gamma: gamma.map(Profile::constant),
            gamma_nonincreasing: gamma.is_some(),
            gamma_over_lambda_nonincreasing: gamma.is_some(),
            ..Self::default()
        }
    }

    pub fn gamma(mut self, gamma: Profile) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn alpha(mut self, alpha: Profile) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn lambda_bounds_declared(mut self, lower: f64, upper: f64) -> Self {
        self.lambda_lower = Some(lower);
        self.lambda_upper = Some(upper);
        self
    }

    pub fn flags(mut self, gamma_nonincreasing: bool, gamma_over_lambda_nonincreasing: bool) -> Self {
        self.gamma_nonincreasing = gamma_nonincreasing;
        self.gamma_over_lambda_nonincreasing = gamma_over_lambda_nonincreasing;
        self
    }

    pub fn lambda_profile(&self) -> Result<&Profile> {
        self.lambda.as_ref().ok_or_else(|| Error::Missing("relaxation schedule λ(t)".into()))
    }

    pub fn gamma_profile(&self) -> Result<&Profile> {
        self.gamma.as_ref().ok_or_else(|| Error::Missing("damping schedule γ(t)".into()))
    }

    pub fn alpha_profile(&self) -> Result<&Profile> {
        self.alpha.as_ref().ok_or_else(|| Error::Missing("schedule α(t)".into()))
    }

    /// `(λ̲, λ̄)`: declared values first, then closed-form profile bounds,
    /// then the extremes over `grid`.
    pub fn lambda_bounds(&self, grid: &TimeGrid) -> Result<(f64, f64)> {
        let lambda = self.lambda_profile()?;
        let sampled = || {
            grid.times().map(|t| lambda.value(t)).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
        };
        let (lo, hi) = lambda.bounds().unwrap_or_else(sampled);
        Ok((self.lambda_lower.unwrap_or(lo), self.lambda_upper.unwrap_or(hi)))
    }

    /// Re-check the declared bounds and flags on `grid`.
    pub fn check(&self, grid: &TimeGrid) -> Result<Vec<CheckedInequality>> {
        let lambda = self.lambda_profile()?;
        lambda.validate("λ")?;
        let (lower, upper) = self.lambda_bounds(grid)?;
        let mut out = vec![
            CheckedInequality::strict("λ̲ > 0", 0.0, lower),
            CheckedInequality::on_grid("λ̲ ≤ λ(t)", grid, |t| (lower, lambda.value(t))),
            CheckedInequality::on_grid("λ(t) ≤ λ̄", grid, |t| (lambda.value(t), upper)),
        ];
        if self.gamma_nonincreasing {
            let gamma = self.gamma_profile()?;
            out.push(nonincreasing_on_grid("γ̇(t) ≤ 0", grid, |t| gamma.value(t)));
        }
        if self.gamma_over_lambda_nonincreasing {
            let gamma = self.gamma_profile()?;
            out.push(nonincreasing_on_grid("d/dt(γ(t)/λ(t)) ≤ 0", grid, |t| gamma.value(t) / lambda.value(t)));
        }
        Ok(out)
    }
}

/// Monotone decrease checked by forward differences between grid points.
pub(crate) fn nonincreasing_on_grid(name: &str, grid: &TimeGrid, f: impl Fn(f64) -> f64) -> CheckedInequality {
    let times: Vec<f64> = grid.times().collect();
    let mut worst = CheckedInequality::grid_seed(name);
    for w in times.windows(2) {
        let (a, b) = (f(w[0]), f(w[1]));
        worst.absorb(b - a, 0.0, w[0]);
    }
    worst.finish()
}

/// Which of the four systems a [`FlowRhs`] realises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    Fb1,
    Fb2,
    Grad1,
    Grad2,
}

impl FlowKind {
    pub fn order(self) -> usize {
        match self {
            FlowKind::Fb1 | FlowKind::Grad1 => 1,
            FlowKind::Fb2 | FlowKind::Grad2 => 2,
        }
    }
}

impl fmt::Display for FlowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FlowKind::Fb1 => "fb1",
            FlowKind::Fb2 => "fb2",
            FlowKind::Grad1 => "grad1",
            FlowKind::Grad2 => "grad2",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
enum Drive {
    ForwardBackward { a: Arc<dyn ResolventOracle>, b: Arc<dyn MonotoneMap> },
    ProxGradient { f: Arc<dyn FunctionOracle>, g: Arc<dyn FunctionOracle> },
    Gradient { g: Arc<dyn FunctionOracle> },
}

/// Immutable right-hand side of one of the four systems.
#[derive(Debug, Clone)]
pub struct FlowRhs {
    kind: FlowKind,
    eta: Option<f64>,
    schedule: Schedule,
    drive: Drive,
    dim: Option<usize>,
}

fn check_eta(eta: f64) -> Result<()> {
    if eta.is_finite() && eta > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("step η must be positive, got {eta}")))
    }
}

fn common_dim(a: Option<usize>, b: Option<usize>) -> Result<Option<usize>> {
    match (a, b) {
        (Some(x), Some(y)) if x != y => Err(Error::DimensionMismatch { expected: x, actual: y }),
        (Some(x), _) | (_, Some(x)) => Ok(Some(x)),
        _ => Ok(None),
    }
}

/// `ẋ = λ(t)[J_{ηA}(x − ηBx) − x]`.
pub fn fb1_rhs(
    a: Arc<dyn ResolventOracle>,
    b: Arc<dyn MonotoneMap>,
    eta: f64,
    schedule: Schedule,
) -> Result<FlowRhs> {
    check_eta(eta)?;
    schedule.lambda_profile()?.validate("λ")?;
    let dim = common_dim(a.dim(), b.dim())?;
    Ok(FlowRhs { kind: FlowKind::Fb1, eta: Some(eta), schedule, drive: Drive::ForwardBackward { a, b }, dim })
}

/// `ẋ = λ(t)[prox_{ηf}(x − η∇g(x)) − x]`, built directly from `(f, g)`.
pub fn prox_grad1_rhs(
    f: Arc<dyn FunctionOracle>,
    g: Arc<dyn FunctionOracle>,
    eta: f64,
    schedule: Schedule,
) -> Result<FlowRhs> {
    check_eta(eta)?;
    schedule.lambda_profile()?.validate("λ")?;
    let dim = common_dim(f.dim(), g.dim())?;
    let probe = Vector::zeros(dim.unwrap_or(1));
    if f.prox(eta, &probe).is_none() {
        return Err(Error::Missing(format!("prox of {}", f.description())));
    }
    if g.gradient(&probe).is_none() {
        return Err(Error::Missing(format!("gradient of {}", g.description())));
    }
    Ok(FlowRhs { kind: FlowKind::Fb1, eta: Some(eta), schedule, drive: Drive::ProxGradient { f, g }, dim })
}

/// `ẍ = −γ(t)ẋ − λ(t)[x − J_{ηA}(x − ηBx)]`.
pub fn fb2_rhs(
    a: Arc<dyn ResolventOracle>,
    b: Arc<dyn MonotoneMap>,
    eta: f64,
    schedule: Schedule,
) -> Result<FlowRhs> {
    check_eta(eta)?;
    schedule.lambda_profile()?.validate("λ")?;
    schedule.gamma_profile()?.validate("γ")?;
    let dim = common_dim(a.dim(), b.dim())?;
    Ok(FlowRhs { kind: FlowKind::Fb2, eta: Some(eta), schedule, drive: Drive::ForwardBackward { a, b }, dim })
}

/// `ẋ = −λ(t)∇g(x)`.
pub fn grad1_rhs(g: Arc<dyn FunctionOracle>, schedule: Schedule) -> Result<FlowRhs> {
    schedule.lambda_profile()?.validate("λ")?;
    let dim = g.dim();
    if g.gradient(&Vector::zeros(dim.unwrap_or(1))).is_none() {
        return Err(Error::Missing(format!("gradient of {}", g.description())));
    }
    Ok(FlowRhs { kind: FlowKind::Grad1, eta: None, schedule, drive: Drive::Gradient { g }, dim })
}

/// `ẍ = −γ(t)ẋ − λ(t)∇g(x)`.
pub fn grad2_rhs(g: Arc<dyn FunctionOracle>, schedule: Schedule) -> Result<FlowRhs> {
    schedule.lambda_profile()?.validate("λ")?;
    schedule.gamma_profile()?.validate("γ")?;
    let dim = g.dim();
    if g.gradient(&Vector::zeros(dim.unwrap_or(1))).is_none() {
        return Err(Error::Missing(format!("gradient of {}", g.description())));
    }
    Ok(FlowRhs { kind: FlowKind::Grad2, eta: None, schedule, drive: Drive::Gradient { g }, dim })
}

impl FlowRhs {
    pub fn kind(&self) -> FlowKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.kind.order()
    }

    pub fn eta(&self) -> Option<f64> {
        self.eta
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub(crate) fn check_state(&self, x: &Vector) -> Result<()> {
        ensure_dim(self.dim, x)
    }

    fn lambda(&self, t: f64) -> f64 {
        self.schedule.lambda.as_ref().expect("λ checked at construction").value(t)
    }

    fn gamma(&self, t: f64) -> f64 {
        self.schedule.gamma.as_ref().expect("γ checked at construction").value(t)
    }

    /// The forward-backward residual `J_{ηA}(x − ηBx) − x`, or `−∇g(x)` for
    /// gradient systems.
    fn residual(&self, x: &Vector) -> Vector {
        match &self.drive {
            Drive::ForwardBackward { a, b } => {
                let eta = self.eta.expect("η set for forward-backward flows");
                a.resolve(eta, &(x - b.eval(x) * eta)) - x
            }
            Drive::ProxGradient { f, g } => {
                let eta = self.eta.expect("η set for forward-backward flows");
                let grad = g.gradient(x).expect("gradient checked at construction");
                f.prox(eta, &(x - grad * eta)).expect("prox checked at construction") - x
            }
            Drive::Gradient { g } => -g.gradient(x).expect("gradient checked at construction"),
        }
    }

    /// First-order velocity `ẋ = rhs(t, x)`. Panics for second-order flows.
    pub fn velocity(&self, t: f64, x: &Vector) -> Vector {
        assert_eq!(self.order(), 1, "velocity() called on a second-order flow");
        self.residual(x) * self.lambda(t)
    }

    /// Second-order acceleration `ẍ = rhs(t, x, v)`. Panics for first-order flows.
    pub fn acceleration(&self, t: f64, x: &Vector, v: &Vector) -> Vector {
        assert_eq!(self.order(), 2, "acceleration() called on a first-order flow");
        self.residual(x) * self.lambda(t) - v * self.gamma(t)
    }

    /// Time derivative of the augmented state (`x` for order 1, `(x, v)`
    /// stacked for order 2).
    pub fn state_derivative(&self, t: f64, y: &Vector) -> Vector {
        match self.order() {
            1 => self.velocity(t, y),
            _ => {
                let d = y.len() / 2;
                let x = y.rows(0, d).into_owned();
                let v = y.rows(d, d).into_owned();
                let a = self.acceleration(t, &x, &v);
                let mut out = Vector::zeros(2 * d);
                out.rows_mut(0, d).copy_from(&v);
                out.rows_mut(d, d).copy_from(&a);
                out
            }
        }
    }
}
