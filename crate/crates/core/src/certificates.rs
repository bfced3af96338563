//! Hypothesis checks for the four exponential-rate theorems.
//!
//! Each `certify_*` function evaluates every hypothesis of its theorem as a
//! named [`CheckedInequality`]. If all hold, the result is a
//! [`RateCertificate`] carrying the inputs, the derived constants and the
//! inequalities themselves; otherwise the error lists every violated one by
//! name. Time-varying hypotheses are checked on a [`TimeGrid`] and record
//! their worst sample.
//!
//! The second-order results rest on a differential inequality lemma: if
//! `ḧ + γḣ + b₁h + b₂u̇ + b₃u ≤ 0` with `γ + γ̇ ≤ b₁ + 1` and
//! `b₂ + ḃ₂ ≤ b₃`, then `L(t) = eᵗḣ + (γ − 1)eᵗh + b₂eᵗu` is nonincreasing,
//! and `M = L(0)` yields the envelopes in [`lemma_bound`].

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Rejection, Result};
use crate::flows::{nonincreasing_on_grid, Profile, Schedule, TimeGrid, GRID_SLACK};
use crate::operators::FunctionOracle;

/// Relative rounding allowance for scalar `≤` checks.
pub const ROUNDING: f64 = 1e-12;

/// Floor used when reporting the lemma constant as strictly positive.
pub const M_FLOOR: f64 = 1e-12;

/// Inequality names, shared by certifiers, reports and tests.
pub mod names {
    pub const FB1_ALPHA: &str = "α < 2ρβ²λ̲";
    pub const FB1_STEP: &str = "1/β + λ̄/(2α) ≤ ρ + 1/η";
    pub const FB1_RATE: &str = "C > 0";
    pub const GRAD1_ALPHA: &str = "α ≤ 2λ̲βρ²";
    pub const FB2_DELTA: &str = "δβρ < 1";
    pub const FB2_ETA: &str = "1/η > 0";
    pub const FB2_THETA_QUADRATIC: &str = "θ(t) ≤ Kλ(t) + K²λ²(t)";
    pub const FB2_THETA: &str = "θ > 2";
    pub const FB2_GAMMA_LOW: &str = "(1+√(1+4θ(t)))/2 ≤ γ(t)";
    pub const FB2_GAMMA_HIGH: &str = "γ(t) ≤ 1 + Kλ(t)";
    pub const LAMBDA_POSITIVE: &str = "λ̲ > 0";
    pub const LAMBDA_LOWER: &str = "λ̲ ≤ λ(t)";
    pub const GAMMA_DECREASING: &str = "γ̇(t) ≤ 0";
    pub const GAMMA_OVER_LAMBDA: &str = "d/dt(γ(t)/λ(t)) ≤ 0";
    pub const GRAD2_RHO_BETA: &str = "ρβ ≤ 1";
    pub const GRAD2_ALPHA_BAR: &str = "ᾱ > 1";
    pub const GRAD2_ALPHA: &str = "α(t) ≥ max{ᾱ, 2/(β²ρ²) − 1}";
    pub const GRAD2_LAMBDA_LOW: &str = "α(t)/(βρ²) ≤ λ(t)";
    pub const GRAD2_LAMBDA_HIGH: &str = "λ(t) ≤ (β/2)(α(t) + α²(t))";
    pub const GRAD2_GAMMA_LOW: &str = "(1+√(1+8λ(t)/β))/2 ≤ γ(t)";
    pub const GRAD2_GAMMA_HIGH: &str = "γ(t) ≤ 1 + α(t)";
    pub const GRAD2_GAMMA_BAR: &str = "γ̲ > 2";
    pub const LEMMA_B2: &str = "b₂(t) ≥ 0";
    pub const LEMMA_GAMMA: &str = "γ(t) ≥ γ̲ > 1";
    pub const LEMMA_HYP1: &str = "γ(t) + γ̇(t) ≤ b₁(t) + 1";
    pub const LEMMA_HYP2: &str = "b₂(t) + ḃ₂(t) ≤ b₃(t)";
}

/// One evaluated hypothesis, `lhs < rhs` or `lhs ≤ rhs + slack`.
///
/// For grid checks `lhs`, `rhs` and `at_time` describe the worst sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckedInequality {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub strict: bool,
    pub slack: f64,
    pub at_time: Option<f64>,
    pub holds: bool,
}

impl CheckedInequality {
    pub fn strict(name: &str, lhs: f64, rhs: f64) -> Self {
        Self { name: name.into(), lhs, rhs, strict: true, slack: 0.0, at_time: None, holds: lhs < rhs }
    }

    /// `lhs ≤ rhs`, ties accepted up to relative rounding.
    pub fn non_strict(name: &str, lhs: f64, rhs: f64) -> Self {
        let slack = ROUNDING * 1f64.max(lhs.abs()).max(rhs.abs());
        Self { name: name.into(), lhs, rhs, strict: false, slack, at_time: None, holds: lhs <= rhs + slack }
    }

    /// `lhs(t) ≤ rhs(t)` at every grid time, slack `1e−9·max(1, |rhs|)`.
    pub fn on_grid(name: &str, grid: &TimeGrid, f: impl Fn(f64) -> (f64, f64)) -> Self {
        let mut worst = Self::grid_seed(name);
        for t in grid.times() {
            let (lhs, rhs) = f(t);
            worst.absorb(lhs, rhs, t);
        }
        worst.finish()
    }

    pub(crate) fn grid_seed(name: &str) -> Self {
        Self {
            name: name.into(),
            lhs: f64::NAN,
            rhs: f64::NAN,
            strict: false,
            slack: 0.0,
            at_time: None,
            holds: true,
        }
    }

    /// Keep the sample with the largest excess `lhs − rhs − slack`.
    pub(crate) fn absorb(&mut self, lhs: f64, rhs: f64, t: f64) {
        let slack = GRID_SLACK * 1f64.max(rhs.abs());
        let excess = lhs - rhs - slack;
        let current = self.lhs - self.rhs - self.slack;
        if self.at_time.is_none() || excess > current || excess.is_nan() {
            self.lhs = lhs;
            self.rhs = rhs;
            self.slack = slack;
            self.at_time = Some(t);
        }
    }

    pub(crate) fn finish(mut self) -> Self {
        self.holds = self.lhs <= self.rhs + self.slack;
        self
    }

    /// Re-evaluate the stored relation.
    pub fn recheck(&self) -> bool {
        if self.strict {
            self.lhs < self.rhs
        } else {
            self.lhs <= self.rhs + self.slack
        }
    }

    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Theorem {
    Fb1,
    Grad1,
    Fb2,
    Grad2,
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Theorem::Fb1 => "FB1",
            Theorem::Grad1 => "GRAD1",
            Theorem::Fb2 => "FB2",
            Theorem::Grad2 => "GRAD2",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CertificateInputs {
    pub rho: f64,
    pub beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_lower: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    /// Exponent of `exp(−Ct)` in the first-order forward-backward bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// `K = 2ρ(1 − α)/(2ρ + 1/η)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    /// `θ` evaluated at `λ̲`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_lower: Option<f64>,
    /// Exponent `r` of the slowest term `exp(−rt)` of the envelope.
    pub decay_exponent: f64,
    /// `γ̲ − 1` for the second-order envelopes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transient_exponent: Option<f64>,
}

/// A validated hypothesis set plus derived constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCertificate {
    pub theorem: Theorem,
    pub inputs: CertificateInputs,
    pub constants: DerivedConstants,
    pub inequalities: Vec<CheckedInequality>,
    /// Horizon of the grid used for time-varying checks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
}

impl RateCertificate {
    pub fn decay_exponent(&self) -> f64 {
        self.constants.decay_exponent
    }

    /// Re-evaluate every stored inequality and the constants' consistency
    /// with the stored inputs.
    pub fn recheck(&self) -> bool {
        if !self.inequalities.iter().all(CheckedInequality::recheck) || !(self.constants.decay_exponent > 0.0) {
            return false;
        }
        let i = &self.inputs;
        let close = |a: f64, b: f64| (a - b).abs() <= ROUNDING * 1f64.max(a.abs()).max(b.abs());
        match self.theorem {
            Theorem::Fb1 => match (i.alpha, i.eta, i.lambda_lower, self.constants.c) {
                (Some(alpha), Some(eta), Some(ll), Some(c)) => {
                    close(c, fb1_rate(i.rho, i.beta, ll, alpha, eta)) && close(c, self.constants.decay_exponent)
                }
                _ => false,
            },
            Theorem::Grad1 => i.alpha.is_some_and(|a| close(a, self.constants.decay_exponent)),
            Theorem::Fb2 => match (i.alpha, i.delta, i.lambda_lower, i.eta, self.constants.gamma_lower) {
                (Some(alpha), Some(delta), Some(ll), Some(eta), Some(gl)) => {
                    let a = Fb2Algebra::new(i.rho, i.beta, alpha, delta);
                    close(eta, a.eta()) && close(gl, fb2_gamma_lower(a.theta(ll))) && gl > 2.0
                }
                _ => false,
            },
            Theorem::Grad2 => match (i.alpha_lower, self.constants.gamma_lower) {
                (Some(ab), Some(gl)) => close(gl, grad2_gamma_lower(i.rho, i.beta, ab)) && gl > 2.0,
                _ => false,
            },
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn require_positive(pairs: &[(&str, f64)]) -> Result<()> {
    for (name, v) in pairs {
        if !(v.is_finite() && *v > 0.0) {
            return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
        }
    }
    Ok(())
}

fn require_unit_open(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in (0, 1), got {v}")))
    }
}

fn finalize(
    theorem: Theorem,
    inputs: CertificateInputs,
    constants: DerivedConstants,
    inequalities: Vec<CheckedInequality>,
    horizon: Option<f64>,
) -> Result<RateCertificate> {
    let violated: Vec<_> = inequalities.iter().filter(|c| !c.holds).cloned().collect();
    if !violated.is_empty() {
        return Err(Error::Rejected(Rejection { theorem, violated }));
    }
    Ok(RateCertificate { theorem, inputs, constants, inequalities, horizon })
}

/// `C = (2ρλ̲ − α/β²)/(2ρ + 1/η)`.
pub fn fb1_rate(rho: f64, beta: f64, lambda_lower: f64, alpha: f64, eta: f64) -> f64 {
    (2.0 * rho * lambda_lower - alpha / (beta * beta)) / (2.0 * rho + 1.0 / eta)
}

/// First-order forward-backward flow: `‖x(t) − x*‖² ≤ ‖x₀ − x*‖²exp(−Ct)`.
pub fn certify_fb1(
    rho: f64,
    beta: f64,
    lambda_lower: f64,
    lambda_upper: f64,
    alpha: f64,
    eta: f64,
) -> Result<RateCertificate> {
    require_positive(&[("ρ", rho), ("β", beta), ("λ̲", lambda_lower), ("λ̄", lambda_upper), ("α", alpha), ("η", eta)])?;
    if lambda_lower > lambda_upper {
        return Err(Error::InvalidParameter(format!("λ̲ = {lambda_lower} exceeds λ̄ = {lambda_upper}")));
    }
    let c = fb1_rate(rho, beta, lambda_lower, alpha, eta);
    let inequalities = vec![
        CheckedInequality::strict(names::FB1_ALPHA, alpha, 2.0 * rho * beta * beta * lambda_lower),
        CheckedInequality::non_strict(names::FB1_STEP, 1.0 / beta + lambda_upper / (2.0 * alpha), rho + 1.0 / eta),
        CheckedInequality::strict(names::FB1_RATE, 0.0, c),
    ];
    finalize(
        Theorem::Fb1,
        CertificateInputs {
            rho,
            beta,
            alpha: Some(alpha),
            eta: Some(eta),
            lambda_lower: Some(lambda_lower),
            lambda_upper: Some(lambda_upper),
            ..Default::default()
        },
        DerivedConstants { c: Some(c), decay_exponent: c, ..Default::default() },
        inequalities,
        None,
    )
}

/// First-order gradient flow: the value gap decays like `exp(−αt)`.
pub fn certify_grad1(rho: f64, beta: f64, lambda_lower: f64, alpha: f64) -> Result<RateCertificate> {
    require_positive(&[("ρ", rho), ("β", beta), ("λ̲", lambda_lower), ("α", alpha)])?;
    let inequalities =
        vec![CheckedInequality::non_strict(names::GRAD1_ALPHA, alpha, 2.0 * lambda_lower * beta * rho * rho)];
    finalize(
        Theorem::Grad1,
        CertificateInputs {
            rho,
            beta,
            alpha: Some(alpha),
            lambda_lower: Some(lambda_lower),
            ..Default::default()
        },
        DerivedConstants { decay_exponent: alpha, ..Default::default() },
        inequalities,
        None,
    )
}

/// The fixed algebra of the second-order forward-backward theorem.
///
/// With `S = 1/β + 1/(4ρβ²α)` the step is `1/η = S/δ − ρ`, so that
/// `ρ + S/δ = 2ρ + 1/η` and `ρ + 1/η − S = S(1 − δ)/δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fb2Algebra {
    pub rho: f64,
    pub beta: f64,
    pub alpha: f64,
    pub delta: f64,
}

impl Fb2Algebra {
    pub fn new(rho: f64, beta: f64, alpha: f64, delta: f64) -> Self {
        Self { rho, beta, alpha, delta }
    }

    /// `S = 1/β + 1/(4ρβ²α)`.
    pub fn s(&self) -> f64 {
        1.0 / self.beta + 1.0 / (4.0 * self.rho * self.beta * self.beta * self.alpha)
    }

    /// `1/η = S/δ − ρ`.
    pub fn inv_eta(&self) -> f64 {
        self.s() / self.delta - self.rho
    }

    pub fn eta(&self) -> f64 {
        1.0 / self.inv_eta()
    }

    /// `ρ + S/δ`.
    pub fn denominator(&self) -> f64 {
        self.rho + self.s() / self.delta
    }

    /// `K = 2ρ(1 − α)/(ρ + S/δ)`.
    pub fn k(&self) -> f64 {
        2.0 * self.rho * (1.0 - self.alpha) / self.denominator()
    }

    /// `θ(t)/λ(t) = (δ/(1 − δ))·(ρ + S/δ)/S`.
    pub fn theta_per_lambda(&self) -> f64 {
        self.delta / (1.0 - self.delta) * self.denominator() / self.s()
    }

    pub fn theta(&self, lambda: f64) -> f64 {
        self.theta_per_lambda() * lambda
    }

    /// `ρ + 1/η − S`, the coefficient multiplying `1/λ²` in `b₂` and `b₃`.
    pub fn excess(&self) -> f64 {
        self.rho + self.inv_eta() - self.s()
    }
}

fn fb2_gamma_lower(theta: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * theta).sqrt()) / 2.0
}

/// Second-order forward-backward flow with variable damping and relaxation.
///
/// On success the envelope is
/// `‖u₀ − x*‖²exp(−(γ̲ − 1)t) + M/(γ̲ − 2)·exp(−t)`, so the final decay
/// exponent is 1 and the transient one `γ̲ − 1`.
pub fn certify_fb2(
    rho: f64,
    beta: f64,
    alpha: f64,
    delta: f64,
    schedule: &Schedule,
    grid: &TimeGrid,
) -> Result<RateCertificate> {
    require_positive(&[("ρ", rho), ("β", beta)])?;
    require_unit_open("α", alpha)?;
    require_unit_open("δ", delta)?;
    let lambda = schedule.lambda_profile()?;
    let gamma = schedule.gamma_profile()?;
    lambda.validate("λ")?;
    gamma.validate("γ")?;

    let alg = Fb2Algebra::new(rho, beta, alpha, delta);
    let mut inequalities = vec![
        CheckedInequality::strict(names::FB2_DELTA, delta * beta * rho, 1.0),
        CheckedInequality::strict(names::FB2_ETA, 0.0, alg.inv_eta()),
    ];
    let inputs = |lambda_lower: Option<f64>, lambda_upper: Option<f64>| CertificateInputs {
        rho,
        beta,
        alpha: Some(alpha),
        delta: Some(delta),
        eta: Some(alg.eta()),
        lambda_lower,
        lambda_upper,
        ..Default::default()
    };
    if inequalities.iter().any(|c| !c.holds) {
        return finalize(Theorem::Fb2, inputs(None, None), DerivedConstants::default(), inequalities, None);
    }

    let k = alg.k();
    let (lambda_lower, lambda_upper) = schedule.lambda_bounds(grid)?;
    let theta = alg.theta(lambda_lower);
    let gamma_lower = fb2_gamma_lower(theta);

    inequalities.push(CheckedInequality::strict(names::LAMBDA_POSITIVE, 0.0, lambda_lower));
    inequalities.push(CheckedInequality::on_grid(names::LAMBDA_LOWER, grid, |t| (lambda_lower, lambda.value(t))));
    inequalities.push(CheckedInequality::on_grid(names::FB2_THETA_QUADRATIC, grid, |t| {
        let l = lambda.value(t);
        (alg.theta(l), k * l + k * k * l * l)
    }));
    inequalities.push(CheckedInequality::strict(names::FB2_THETA, 2.0, theta));
    inequalities.push(CheckedInequality::on_grid(names::FB2_GAMMA_LOW, grid, |t| {
        (fb2_gamma_lower(alg.theta(lambda.value(t))), gamma.value(t))
    }));
    inequalities.push(CheckedInequality::on_grid(names::FB2_GAMMA_HIGH, grid, |t| {
        (gamma.value(t), 1.0 + k * lambda.value(t))
    }));
    inequalities.push(nonincreasing_on_grid(names::GAMMA_DECREASING, grid, |t| gamma.value(t)));
    inequalities.push(nonincreasing_on_grid(names::GAMMA_OVER_LAMBDA, grid, |t| gamma.value(t) / lambda.value(t)));

    finalize(
        Theorem::Fb2,
        inputs(Some(lambda_lower), Some(lambda_upper)),
        DerivedConstants {
            k: Some(k),
            theta: Some(theta),
            gamma_lower: Some(gamma_lower),
            decay_exponent: 1.0,
            transient_exponent: Some(gamma_lower - 1.0),
            ..Default::default()
        },
        inequalities,
        Some(grid.t_end),
    )
}

/// Constant parameters for the second-order forward-backward flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fb2Constants {
    pub lambda: f64,
    pub gamma: f64,
    pub eta: f64,
}

impl Fb2Constants {
    pub fn schedule(&self) -> Schedule {
        Schedule::constant(self.lambda, Some(self.gamma))
    }
}

/// Smallest constant `λ` with `θ > 2` and `θ ≤ Kλ + K²λ²`, inflated by 1%,
/// with `γ` at the midpoint of the resulting damping window.
pub fn suggest_constants_fb2(rho: f64, beta: f64, alpha: f64, delta: f64) -> Result<Fb2Constants> {
    require_positive(&[("ρ", rho), ("β", beta)])?;
    require_unit_open("α", alpha)?;
    require_unit_open("δ", delta)?;
    let feasibility = CheckedInequality::strict(names::FB2_DELTA, delta * beta * rho, 1.0);
    if !feasibility.holds {
        return Err(Error::Rejected(Rejection { theorem: Theorem::Fb2, violated: vec![feasibility] }));
    }
    let alg = Fb2Algebra::new(rho, beta, alpha, delta);
    let p = alg.theta_per_lambda();
    let k = alg.k();
    // Pλ ≤ Kλ + K²λ²  ⇔  λ ≥ (P − K)/K²  for λ > 0.
    let quadratic_root = ((p - k) / (k * k)).max(0.0);
    let theta_root = 2.0 / p;
    let lambda = 1.01 * quadratic_root.max(theta_root);
    let low = fb2_gamma_lower(p * lambda);
    let high = 1.0 + k * lambda;
    if !(low <= high) || !lambda.is_finite() {
        return Err(Error::Infeasible(format!("damping window [{low}, {high}] is empty")));
    }
    Ok(Fb2Constants { lambda, gamma: 0.5 * (low + high), eta: alg.eta() })
}

fn grad2_gamma_lower(rho: f64, beta: f64, alpha_lower: f64) -> f64 {
    (1.0 + (1.0 + 8.0 * alpha_lower / (beta * beta * rho * rho)).sqrt()) / 2.0
}

/// Second-order gradient flow: value-gap envelope
/// `(g(u₀) − g*)exp(−(γ̲ − 1)t) + M/(γ̲ − 2)·exp(−t)`.
pub fn certify_grad2(
    rho: f64,
    beta: f64,
    alpha_lower: f64,
    schedule: &Schedule,
    grid: &TimeGrid,
) -> Result<RateCertificate> {
    require_positive(&[("ρ", rho), ("β", beta)])?;
    if !alpha_lower.is_finite() {
        return Err(Error::InvalidParameter(format!("ᾱ must be finite, got {alpha_lower}")));
    }
    let alpha = schedule.alpha_profile()?;
    let lambda = schedule.lambda_profile()?;
    let gamma = schedule.gamma_profile()?;
    alpha.validate("α")?;
    lambda.validate("λ")?;
    gamma.validate("γ")?;

    let alpha_floor = alpha_lower.max(2.0 / (beta * beta * rho * rho) - 1.0);
    let gamma_lower = grad2_gamma_lower(rho, beta, alpha_lower);
    let (lambda_lower, lambda_upper) = schedule.lambda_bounds(grid)?;
    let inequalities = vec![
        CheckedInequality::non_strict(names::GRAD2_RHO_BETA, rho * beta, 1.0),
        CheckedInequality::strict(names::GRAD2_ALPHA_BAR, 1.0, alpha_lower),
        CheckedInequality::on_grid(names::GRAD2_ALPHA, grid, |t| (alpha_floor, alpha.value(t))),
        CheckedInequality::on_grid(names::GRAD2_LAMBDA_LOW, grid, |t| {
            (alpha.value(t) / (beta * rho * rho), lambda.value(t))
        }),
        CheckedInequality::on_grid(names::GRAD2_LAMBDA_HIGH, grid, |t| {
            let a = alpha.value(t);
            (lambda.value(t), beta / 2.0 * (a + a * a))
        }),
        CheckedInequality::on_grid(names::GRAD2_GAMMA_LOW, grid, |t| {
            ((1.0 + (1.0 + 8.0 * lambda.value(t) / beta).sqrt()) / 2.0, gamma.value(t))
        }),
        CheckedInequality::on_grid(names::GRAD2_GAMMA_HIGH, grid, |t| (gamma.value(t), 1.0 + alpha.value(t))),
        nonincreasing_on_grid(names::GAMMA_DECREASING, grid, |t| gamma.value(t)),
        nonincreasing_on_grid(names::GAMMA_OVER_LAMBDA, grid, |t| gamma.value(t) / lambda.value(t)),
        CheckedInequality::strict(names::GRAD2_GAMMA_BAR, 2.0, gamma_lower),
    ];
    finalize(
        Theorem::Grad2,
        CertificateInputs {
            rho,
            beta,
            alpha_lower: Some(alpha_lower),
            lambda_lower: Some(lambda_lower),
            lambda_upper: Some(lambda_upper),
            ..Default::default()
        },
        DerivedConstants {
            gamma_lower: Some(gamma_lower),
            decay_exponent: 1.0,
            transient_exponent: Some(gamma_lower - 1.0),
            ..Default::default()
        },
        inequalities,
        Some(grid.t_end),
    )
}

/// Constant parameters for the second-order gradient flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grad2Constants {
    pub alpha: f64,
    pub alpha_lower: f64,
    pub lambda: f64,
    pub gamma: f64,
}

impl Grad2Constants {
    pub fn schedule(&self) -> Schedule {
        Schedule::constant(self.lambda, Some(self.gamma)).alpha(Profile::constant(self.alpha))
    }
}

/// Constant choice for the second-order gradient flow: `α = 2/(β²ρ²) − 1`
/// when `βρ < 1`, else `α = 1 + ε`; `λ` at the bottom of its window and `γ`
/// at the midpoint of its window.
pub fn suggest_constants_grad2(rho: f64, beta: f64, epsilon: f64) -> Result<Grad2Constants> {
    require_positive(&[("ρ", rho), ("β", beta), ("ε", epsilon)])?;
    let rb = CheckedInequality::non_strict(names::GRAD2_RHO_BETA, rho * beta, 1.0);
    if !rb.holds {
        return Err(Error::Rejected(Rejection { theorem: Theorem::Grad2, violated: vec![rb] }));
    }
    let alpha = if rho * beta < 1.0 { 2.0 / (beta * beta * rho * rho) - 1.0 } else { 1.0 + epsilon };
    let lambda = alpha / (beta * rho * rho);
    let low = (1.0 + (1.0 + 8.0 * lambda / beta).sqrt()) / 2.0;
    let high = 1.0 + alpha;
    Ok(Grad2Constants { alpha, alpha_lower: alpha, lambda, gamma: 0.5 * (low + high) })
}

/// Which branch of the lemma's conclusion applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaCase {
    /// `1 < γ̲ < 2`: `(h(0) + M/(2 − γ̲))exp(−(γ̲ − 1)t)`.
    Slow,
    /// `γ̲ > 2`: `h(0)exp(−(γ̲ − 1)t) + M/(γ̲ − 2)exp(−t)`.
    Fast,
    /// `γ̲ = 2`: `(h(0) + Mt)exp(−t)`.
    Critical,
}

const CRITICAL_TOL: f64 = 1e-12;

impl LemmaCase {
    pub fn for_gamma_lower(gamma_lower: f64) -> Result<Self> {
        if !(gamma_lower > 1.0) || !gamma_lower.is_finite() {
            return Err(Error::InvalidParameter(format!("the lemma needs γ̲ > 1, got {gamma_lower}")));
        }
        Ok(if (gamma_lower - 2.0).abs() <= CRITICAL_TOL {
            LemmaCase::Critical
        } else if gamma_lower < 2.0 {
            LemmaCase::Slow
        } else {
            LemmaCase::Fast
        })
    }
}

/// Initial value of the Lyapunov quantity, raw and floored at `1e−12`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaM {
    pub raw: f64,
    pub clamped: f64,
}

/// `M = ḣ(0) + (γ(0) − 1)h(0) + b₂(0)u(0)`.
pub fn lemma_m(h0: f64, hdot0: f64, gamma0: f64, b2_0: f64, u0: f64) -> LemmaM {
    let raw = hdot0 + (gamma0 - 1.0) * h0 + b2_0 * u0;
    LemmaM { raw, clamped: raw.max(M_FLOOR) }
}

/// Evaluate the lemma's closed-form envelope for `h`.
pub fn lemma_bound(case: LemmaCase, gamma_lower: f64, h0: f64, m: f64, t: f64) -> Result<f64> {
    if LemmaCase::for_gamma_lower(gamma_lower)? != case {
        return Err(Error::InvalidParameter(format!("lemma case {case:?} does not match γ̲ = {gamma_lower}")));
    }
    if !(m > 0.0) {
        return Err(Error::InvalidParameter(format!("lemma bound needs M > 0, got {m}")));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("lemma bound needs t ≥ 0, got {t}")));
    }
    Ok(match case {
        LemmaCase::Slow => (h0 + m / (2.0 - gamma_lower)) * (-(gamma_lower - 1.0) * t).exp(),
        LemmaCase::Fast => h0 * (-(gamma_lower - 1.0) * t).exp() + m / (gamma_lower - 2.0) * (-t).exp(),
        LemmaCase::Critical => (h0 + m * t) * (-t).exp(),
    })
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The quantity `h` the lemma is applied to.
#[derive(Debug, Clone)]
pub enum LyapunovTarget {
    /// `h = ½‖x − x*‖²`, `ḣ = ⟨x − x*, ẋ⟩`.
    HalfSquaredDistance,
    /// `h = g(x) − g(x*)`, `ḣ = ⟨∇g(x), ẋ⟩`.
    ValueGap(Arc<dyn FunctionOracle>),
}

/// Coefficients `b₁, b₂, b₃` of the lemma's differential inequality for a
/// concrete system, with `u = ‖ẋ‖²`.
#[derive(Clone)]
pub struct LemmaCoefficients {
    pub gamma: Profile,
    b1: ScalarFn,
    b2: ScalarFn,
    b3: ScalarFn,
    pub gamma_lower: f64,
    pub case: LemmaCase,
    pub target: LyapunovTarget,
}

impl fmt::Debug for LemmaCoefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LemmaCoefficients")
            .field("gamma", &self.gamma)
            .field("gamma_lower", &self.gamma_lower)
            .field("case", &self.case)
            .field("target", &self.target)
            .finish_non_exhaustive()
    }
}

fn derivative(f: &dyn Fn(f64) -> f64, t: f64) -> f64 {
    let h = 1e-5 * t.abs().max(1.0);
    if t - h < 0.0 {
        (f(t + h) - f(t)) / h
    } else {
        (f(t + h) - f(t - h)) / (2.0 * h)
    }
}

impl LemmaCoefficients {
    pub fn new(
        gamma: Profile,
        b1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        b2: impl Fn(f64) -> f64 + Send + Sync + 'static,
        b3: impl Fn(f64) -> f64 + Send + Sync + 'static,
        gamma_lower: f64,
        target: LyapunovTarget,
    ) -> Result<Self> {
        let case = LemmaCase::for_gamma_lower(gamma_lower)?;
        Ok(Self { gamma, b1: Arc::new(b1), b2: Arc::new(b2), b3: Arc::new(b3), gamma_lower, case, target })
    }

    /// Coefficients of the second-order forward-backward system, with
    /// `h = ½‖x − x*‖²`:
    ///
    /// - `b₁ = λ·2ρ(1 − α)/(2ρ + 1/η)`
    /// - `b₂ = (γ/λ)(ρ + 1/η − S)/(2ρ + 1/η)`
    /// - `b₃ = γ²(ρ + 1/η − S)/(λ(2ρ + 1/η)) − 1`
    pub fn fb2(rho: f64, beta: f64, alpha: f64, delta: f64, schedule: &Schedule, grid: &TimeGrid) -> Result<Self> {
        let alg = Fb2Algebra::new(rho, beta, alpha, delta);
        let lambda = schedule.lambda_profile()?.clone();
        let gamma = schedule.gamma_profile()?.clone();
        let (lambda_lower, _) = schedule.lambda_bounds(grid)?;
        let e = 2.0 * rho + alg.inv_eta();
        let d = alg.excess();
        let k = 2.0 * rho * (1.0 - alpha) / e;
        let (l1, l2, l3) = (lambda.clone(), lambda.clone(), lambda);
        let (g2, g3) = (gamma.clone(), gamma.clone());
        Self::new(
            gamma,
            move |t| k * l1.value(t),
            move |t| g2.value(t) / l2.value(t) * d / e,
            move |t| {
                let g = g3.value(t);
                g * g * d / (l3.value(t) * e) - 1.0
            },
            fb2_gamma_lower(alg.theta(lambda_lower)),
            LyapunovTarget::HalfSquaredDistance,
        )
    }

    /// Coefficients of the second-order gradient system, with
    /// `h = g(x) − g(x*)`: `b₁ = α`, `b₂ = γ/(2λ)`, `b₃ = γ²/(2λ) − 1/β`.
    pub fn grad2(
        rho: f64,
        beta: f64,
        alpha_lower: f64,
        schedule: &Schedule,
        g: Arc<dyn FunctionOracle>,
    ) -> Result<Self> {
        let alpha = schedule.alpha_profile()?.clone();
        let lambda = schedule.lambda_profile()?.clone();
        let gamma = schedule.gamma_profile()?.clone();
        let (l2, l3) = (lambda.clone(), lambda);
        let (g2, g3) = (gamma.clone(), gamma.clone());
        Self::new(
            gamma,
            move |t| alpha.value(t),
            move |t| g2.value(t) / (2.0 * l2.value(t)),
            move |t| {
                let g = g3.value(t);
                g * g / (2.0 * l3.value(t)) - 1.0 / beta
            },
            grad2_gamma_lower(rho, beta, alpha_lower),
            LyapunovTarget::ValueGap(g),
        )
    }

    pub fn b1(&self, t: f64) -> f64 {
        (self.b1)(t)
    }

    pub fn b2(&self, t: f64) -> f64 {
        (self.b2)(t)
    }

    pub fn b3(&self, t: f64) -> f64 {
        (self.b3)(t)
    }

    pub fn gamma_at(&self, t: f64) -> f64 {
        self.gamma.value(t)
    }

    /// `M` from initial data `h(0)`, `ḣ(0)`, `u(0)`.
    pub fn initial_m(&self, h0: f64, hdot0: f64, u0: f64) -> LemmaM {
        lemma_m(h0, hdot0, self.gamma_at(0.0), self.b2(0.0), u0)
    }

    /// Check the lemma's hypotheses on `grid`.
    pub fn check_hypotheses(&self, grid: &TimeGrid) -> Vec<CheckedInequality> {
        let gamma = |t: f64| self.gamma.value(t);
        let b2 = |t: f64| self.b2(t);
        vec![
            CheckedInequality::strict(names::LEMMA_GAMMA, 1.0, self.gamma_lower),
            CheckedInequality::on_grid(names::LEMMA_GAMMA, grid, |t| (self.gamma_lower, gamma(t))),
            CheckedInequality::on_grid(names::LEMMA_B2, grid, |t| (0.0, b2(t))),
            CheckedInequality::on_grid(names::LEMMA_HYP1, grid, |t| {
                (gamma(t) + derivative(&gamma, t), self.b1(t) + 1.0)
            }),
            CheckedInequality::on_grid(names::LEMMA_HYP2, grid, |t| (b2(t) + derivative(&b2, t), self.b3(t))),
        ]
    }
}
