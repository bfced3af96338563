//! Envelopes, empirical rates and the pointwise checks run along a
//! trajectory.

use serde::{Deserialize, Serialize};

use crate::certificates::{
    lemma_bound, CheckedInequality, LemmaCase, LemmaCoefficients, LemmaM, LyapunovTarget, RateCertificate, Theorem,
};
use crate::error::{Error, Result};
use crate::integrate::{MetricSeries, Trajectory};

/// Smallest value accepted by [`fit_rate`].
pub const FIT_FLOOR: f64 = 1e-300;

/// Samples below this fraction of the series maximum are treated as
/// unresolved by the integrator and left out of envelope rate fits.
pub const RESOLUTION_FLOOR: f64 = 1e-12;

/// Tail fraction used by [`verify_envelope`].
pub const ENVELOPE_FIT_TAIL: f64 = 0.5;

/// Allowed shortfall of the fitted rate below the certified one.
pub const RATE_SHORTFALL: f64 = 0.05;

/// Least-squares slope of `−ln y` against `t` over the last `tail_fraction`
/// of the samples.
pub fn fit_rate(ts: &[f64], ys: &[f64], tail_fraction: f64) -> Result<f64> {
    if ts.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: ts.len(), actual: ys.len() });
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!("tail fraction must lie in (0, 1], got {tail_fraction}")));
    }
    let n = ts.len();
    let take = ((n as f64) * tail_fraction).ceil() as usize;
    let start = n - take.min(n);
    let (tt, ly): (Vec<f64>, Vec<f64>) =
        ts[start..].iter().zip(&ys[start..]).filter(|(_, &y)| y > FIT_FLOOR).map(|(&t, &y)| (t, -y.ln())).unzip();
    if tt.len() < 10 {
        return Err(Error::Fit(format!(
            "only {} of the last {take} samples are above {FIT_FLOOR:e}; shorten t_end",
            tt.len()
        )));
    }
    let m = tt.len() as f64;
    let t_mean = tt.iter().sum::<f64>() / m;
    let y_mean = ly.iter().sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, y) in tt.iter().zip(&ly) {
        sxy += (t - t_mean) * (y - y_mean);
        sxx += (t - t_mean) * (t - t_mean);
    }
    if sxx == 0.0 {
        return Err(Error::Fit("tail samples share a single time".into()));
    }
    Ok(sxy / sxx)
}

/// Which metric an envelope bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeMetric {
    /// `‖x(t) − x*‖²`.
    DistanceSquared,
    /// `F(x(t)) − F(x*)`.
    ValueGap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum EnvelopeForm {
    /// `initial·exp(−rate·t)`.
    Exponential { initial: f64, rate: f64 },
    /// The lemma's closed form.
    Lemma { case: LemmaCase, gamma_lower: f64, initial: f64, m: f64 },
}

/// A theorem's closed-form upper bound on one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub theorem: Theorem,
    pub metric: EnvelopeMetric,
    pub form: EnvelopeForm,
    /// Exponent of the slowest decaying term.
    pub decay_exponent: f64,
}

impl Envelope {
    pub fn value(&self, t: f64) -> f64 {
        match self.form {
            EnvelopeForm::Exponential { initial, rate } => initial * (-rate * t).exp(),
            EnvelopeForm::Lemma { case, gamma_lower, initial, m } => {
                lemma_bound(case, gamma_lower, initial, m, t).expect("validated at construction")
            }
        }
    }
}

/// Initial data needed to instantiate an envelope.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct InitialMetrics {
    /// `‖x₀ − x*‖²`.
    pub h0: Option<f64>,
    /// `F(x₀) − F(x*)`.
    pub gap0: Option<f64>,
    /// The `M` entering the envelope, already in the envelope's scaling.
    pub lemma_m: Option<f64>,
}

fn need(v: Option<f64>, what: &str, theorem: Theorem) -> Result<f64> {
    v.ok_or_else(|| Error::Missing(format!("{what} for the {theorem} envelope")))
}

pub fn build_envelope(cert: &RateCertificate, init: &InitialMetrics) -> Result<Envelope> {
    let theorem = cert.theorem;
    let r = cert.decay_exponent();
    let (metric, form) = match theorem {
        Theorem::Fb1 => (
            EnvelopeMetric::DistanceSquared,
            EnvelopeForm::Exponential { initial: need(init.h0, "h(0)", theorem)?, rate: r },
        ),
        Theorem::Grad1 => (
            EnvelopeMetric::ValueGap,
            EnvelopeForm::Exponential { initial: need(init.gap0, "g(x₀) − g*", theorem)?, rate: r },
        ),
        Theorem::Fb2 | Theorem::Grad2 => {
            let (metric, initial) = if theorem == Theorem::Fb2 {
                (EnvelopeMetric::DistanceSquared, need(init.h0, "h(0)", theorem)?)
            } else {
                (EnvelopeMetric::ValueGap, need(init.gap0, "g(u₀) − g*", theorem)?)
            };
            let gamma_lower = need(cert.constants.gamma_lower, "γ̲", theorem)?;
            let m = need(init.lemma_m, "M", theorem)?;
            let case = LemmaCase::for_gamma_lower(gamma_lower)?;
            lemma_bound(case, gamma_lower, initial, m, 0.0)?;
            (metric, EnvelopeForm::Lemma { case, gamma_lower, initial, m })
        }
    };
    let (EnvelopeForm::Exponential { initial, .. } | EnvelopeForm::Lemma { initial, .. }) = form;
    if !(initial >= 0.0 && initial.is_finite()) {
        return Err(Error::InvalidParameter(format!("envelope anchor must be finite and ≥ 0, got {initial}")));
    }
    Ok(Envelope { theorem, metric, form, decay_exponent: r })
}

/// Initial metrics for `cert` taken from the first sample of a run.
///
/// For the second-order theorems `M` is computed from the Lyapunov quantity
/// and floored at `1e−12`; the distance form works with `h = ½‖x − x*‖²`, so
/// its envelope uses `2M`.
pub fn initial_metrics(
    cert: &RateCertificate,
    coeffs: Option<&LemmaCoefficients>,
    traj: &Trajectory,
    metrics: &MetricSeries,
) -> Result<(InitialMetrics, Option<LemmaM>)> {
    let h0 = metrics.h.first().copied();
    let gap0 = metrics.gap.as_ref().and_then(|g| g.first().copied());
    let mut init = InitialMetrics { h0, gap0, lemma_m: None };
    let mut raw = None;
    if matches!(cert.theorem, Theorem::Fb2 | Theorem::Grad2) {
        let coeffs = coeffs.ok_or_else(|| Error::Missing("lemma coefficients".into()))?;
        let first = lyapunov_terms(traj, coeffs, metrics)?.into_iter().next().expect("non-empty trajectory");
        let m = coeffs.initial_m(first.h, first.hdot, first.u);
        let scale = if cert.theorem == Theorem::Fb2 { 2.0 } else { 1.0 };
        init.lemma_m = Some(scale * m.clamped);
        raw = Some(m);
    }
    Ok((init, raw))
}

/// Outcome of comparing a metric series against an envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub metric: EnvelopeMetric,
    pub theoretical_rate: f64,
    /// `None` when the metric never rises above the resolution floor.
    pub fitted_rate: Option<f64>,
    pub rate_pass: bool,
    /// `max metric(t)/envelope(t)` over samples.
    pub max_ratio: f64,
    /// Largest `(metric − envelope)/envelope` among violating samples, else 0.
    pub max_relative_violation: f64,
    pub violations: usize,
    pub samples: usize,
    pub tol_abs: f64,
    pub tol_rel: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainReport>,
    pub pass: bool,
}

pub fn verify_envelope(
    metrics: &MetricSeries,
    which: EnvelopeMetric,
    envelope: &Envelope,
    tol_abs: f64,
    tol_rel: f64,
) -> Result<RateReport> {
    let ys: &[f64] = match which {
        EnvelopeMetric::DistanceSquared => &metrics.h,
        EnvelopeMetric::ValueGap => {
            metrics.gap.as_deref().ok_or_else(|| Error::Missing("value gap in the metric series".into()))?
        }
    };
    let mut violations = 0;
    let mut max_ratio: f64 = 0.0;
    let mut max_rel: f64 = 0.0;
    for (&t, &y) in metrics.t.iter().zip(ys) {
        let env = envelope.value(t);
        if env > 0.0 {
            max_ratio = max_ratio.max(y / env);
        }
        if y > env * (1.0 + tol_rel) + tol_abs {
            violations += 1;
            max_rel = max_rel.max(if env > 0.0 { (y - env) / env } else { f64::INFINITY });
        }
    }

    let peak = ys.iter().copied().fold(0.0, f64::max);
    let (ts, yr): (Vec<f64>, Vec<f64>) =
        metrics.t.iter().zip(ys).filter(|(_, &y)| y > RESOLUTION_FLOOR * peak && y > FIT_FLOOR).map(|(&t, &y)| (t, y)).unzip();
    let fitted_rate = if ts.len() >= 20 { fit_rate(&ts, &yr, ENVELOPE_FIT_TAIL).ok() } else { None };
    let theoretical_rate = envelope.decay_exponent;
    let rate_pass = fitted_rate.is_none_or(|r| r >= theoretical_rate - RATE_SHORTFALL);

    Ok(RateReport {
        metric: which,
        theoretical_rate,
        fitted_rate,
        rate_pass,
        max_ratio,
        max_relative_violation: max_rel,
        violations,
        samples: ys.len(),
        tol_abs,
        tol_rel,
        chain: None,
        pass: violations == 0 && rate_pass,
    })
}

/// Per-inequality counts from a chain check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainCheck {
    pub name: String,
    pub violations: usize,
    /// Largest `lhs − rhs − slack` seen (negative when the check never binds).
    pub worst_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub checks: Vec<ChainCheck>,
    pub samples: usize,
    pub pass: bool,
}

struct ChainBuilder {
    checks: Vec<ChainCheck>,
}

impl ChainBuilder {
    fn new(names: &[&str]) -> Self {
        Self {
            checks: names
                .iter()
                .map(|n| ChainCheck { name: n.to_string(), violations: 0, worst_excess: f64::NEG_INFINITY })
                .collect(),
        }
    }

    fn le(&mut self, i: usize, lhs: f64, rhs: f64) {
        let excess = lhs - rhs - 1e-8 * (1.0 + lhs.abs() + rhs.abs());
        let c = &mut self.checks[i];
        c.worst_excess = c.worst_excess.max(excess);
        if excess > 0.0 || excess.is_nan() {
            c.violations += 1;
        }
    }

    fn finish(self, samples: usize) -> ChainReport {
        let pass = self.checks.iter().all(|c| c.violations == 0);
        ChainReport { checks: self.checks, samples, pass }
    }
}

fn chain_inputs(metrics: &MetricSeries) -> Result<(&[f64], &[f64])> {
    let gap = metrics.gap.as_deref().ok_or_else(|| Error::Missing("value gap in the metric series".into()))?;
    let gn = metrics.gradnorm.as_deref().ok_or_else(|| Error::Missing("gradient norm in the metric series".into()))?;
    Ok((gap, gn))
}

const CHAIN_NAMES: [&str; 4] = [
    "0 ≤ ρ/2‖x − x*‖²",
    "ρ/2‖x − x*‖² ≤ g(x) − g(x*)",
    "g(x) − g(x*) ≤ 1/(2β)‖x − x*‖²",
    "ρ‖x − x*‖ ≤ ‖∇g(x)‖",
];

/// Strong-convexity and descent-lemma sandwich at every sample, slack
/// `1e−8·(1 + |lhs| + |rhs|)`.
pub fn verify_value_chain(metrics: &MetricSeries, rho: f64, beta: f64) -> Result<ChainReport> {
    let (gap, gn) = chain_inputs(metrics)?;
    let mut b = ChainBuilder::new(&CHAIN_NAMES);
    for i in 0..metrics.len() {
        let h = metrics.h[i];
        b.le(0, 0.0, rho / 2.0 * h);
        b.le(1, rho / 2.0 * h, gap[i]);
        b.le(2, gap[i], h / (2.0 * beta));
        b.le(3, rho * h.sqrt(), gn[i]);
    }
    Ok(b.finish(metrics.len()))
}

/// The sandwich plus the time links of the gradient-flow conclusion:
/// `g(x) − g* ≤ (g(x₀) − g*)e^{−αt} ≤ 1/(2β)‖x₀ − x*‖²e^{−αt}`.
pub fn verify_rate_chain(metrics: &MetricSeries, rho: f64, beta: f64, alpha: f64) -> Result<ChainReport> {
    let (gap, gn) = chain_inputs(metrics)?;
    let mut names = CHAIN_NAMES.to_vec();
    names.push("g(x) − g(x*) ≤ (g(x₀) − g(x*))e^{−αt}");
    names.push("(g(x₀) − g(x*))e^{−αt} ≤ 1/(2β)‖x₀ − x*‖²e^{−αt}");
    let mut b = ChainBuilder::new(&names);
    let (gap0, h0) = (gap[0], metrics.h[0]);
    for i in 0..metrics.len() {
        let (t, h) = (metrics.t[i], metrics.h[i]);
        let decay = (-alpha * t).exp();
        b.le(0, 0.0, rho / 2.0 * h);
        b.le(1, rho / 2.0 * h, gap[i]);
        b.le(2, gap[i], h / (2.0 * beta));
        b.le(3, rho * h.sqrt(), gn[i]);
        b.le(4, gap[i], gap0 * decay);
        b.le(5, gap0 * decay, h0 / (2.0 * beta) * decay);
    }
    Ok(b.finish(metrics.len()))
}

/// The pieces of `L(t) = eᵗ(ḣ + (γ − 1)h + b₂u)` at one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovTerms {
    pub t: f64,
    pub h: f64,
    pub hdot: f64,
    pub u: f64,
}

/// `h`, `ḣ` and `u` along the trajectory for the coefficients' target.
pub fn lyapunov_terms(
    traj: &Trajectory,
    coeffs: &LemmaCoefficients,
    metrics: &MetricSeries,
) -> Result<Vec<LyapunovTerms>> {
    if traj.order != 2 {
        return Err(Error::InvalidParameter("the Lyapunov check needs a second-order trajectory".into()));
    }
    let xs = &metrics.x_star;
    let g_star = match &coeffs.target {
        LyapunovTarget::ValueGap(g) => Some(g.value(xs)),
        LyapunovTarget::HalfSquaredDistance => None,
    };
    Ok(traj
        .samples
        .iter()
        .map(|s| {
            let d = &s.x - xs;
            let (h, hdot) = match &coeffs.target {
                LyapunovTarget::HalfSquaredDistance => (0.5 * d.norm_squared(), d.dot(&s.v)),
                LyapunovTarget::ValueGap(g) => {
                    let grad = g.gradient(&s.x).expect("smooth target");
                    (g.value(&s.x) - g_star.expect("set above"), grad.dot(&s.v))
                }
            };
            LyapunovTerms { t: s.t, h, hdot, u: s.v.norm_squared() }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub samples: usize,
    pub l0: f64,
    /// Largest `ΔL/Δt` between consecutive samples.
    pub max_increase_rate: f64,
    /// Allowed `ΔL/Δt`, `1e−6·(1 + |L(0)|)`.
    pub drift_limit: f64,
    pub violations: usize,
    /// Last sample time included.
    pub horizon: f64,
    /// The lemma's hypotheses evaluated on the sample times.
    pub hypotheses: Vec<CheckedInequality>,
    pub hypotheses_hold: bool,
    pub pass: bool,
}

/// `L(t)` must be nonincreasing along all samples up to the drift tolerance.
pub fn verify_lyapunov(traj: &Trajectory, coeffs: &LemmaCoefficients, metrics: &MetricSeries) -> Result<LyapunovReport> {
    verify_lyapunov_until(traj, coeffs, metrics, f64::INFINITY)
}

/// As [`verify_lyapunov`], restricted to samples with `t ≤ horizon`.
///
/// `L` carries a factor `eᵗ`, which amplifies the integrator's absolute
/// error; long runs may need a shorter horizon for a meaningful check.
pub fn verify_lyapunov_until(
    traj: &Trajectory,
    coeffs: &LemmaCoefficients,
    metrics: &MetricSeries,
    horizon: f64,
) -> Result<LyapunovReport> {
    let terms: Vec<_> = lyapunov_terms(traj, coeffs, metrics)?.into_iter().filter(|p| p.t <= horizon).collect();
    let l: Vec<f64> = terms
        .iter()
        .map(|p| p.t.exp() * (p.hdot + (coeffs.gamma_at(p.t) - 1.0) * p.h + coeffs.b2(p.t) * p.u))
        .collect();
    let l0 = l[0];
    let drift_limit = 1e-6 * (1.0 + l0.abs());
    let mut violations = 0;
    let mut max_rate = f64::NEG_INFINITY;
    for (w, p) in l.windows(2).zip(terms.windows(2)) {
        let dt = p[1].t - p[0].t;
        let rate = (w[1] - w[0]) / dt;
        max_rate = max_rate.max(rate);
        if rate > drift_limit || rate.is_nan() {
            violations += 1;
        }
    }
    let last = terms.last().map_or(0.0, |p| p.t);
    let hypotheses = if last > 0.0 {
        let grid = crate::flows::TimeGrid::new(last, terms.len().max(2))?;
        coeffs.check_hypotheses(&grid)
    } else {
        Vec::new()
    };
    let hypotheses_hold = hypotheses.iter().all(|c| c.holds);
    Ok(LyapunovReport {
        samples: terms.len(),
        l0,
        max_increase_rate: if max_rate.is_finite() { max_rate } else { 0.0 },
        drift_limit,
        violations,
        horizon: last,
        hypotheses,
        hypotheses_hold,
        pass: violations == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificates::{certify_fb1, certify_fb2, certify_grad1};
    use crate::flows::{Schedule, TimeGrid};
    use crate::integrate::{Sample, StepControl, StepStats, TrajectoryInfo};
    use nalgebra::dvector;

    fn series(t: Vec<f64>, h: Vec<f64>) -> MetricSeries {
        let n = t.len();
        MetricSeries { t, h, u: vec![0.0; n], gap: None, gradnorm: None, x_star: dvector![0.0] }
    }

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn fit_rate_examples() {
        let t = linspace(0.0, 20.0, 201);
        let y: Vec<f64> = t.iter().map(|t| (-0.5 * t).exp()).collect();
        assert!((fit_rate(&t, &y, 1.0).unwrap() - 0.5).abs() < 1e-6);
        assert_eq!(fit_rate(&t, &vec![1.0; 201], 1.0).unwrap(), 0.0);
        let t = linspace(0.0, 30.0, 301);
        let y: Vec<f64> = t.iter().map(|t| 2.0 * (-t).exp() + (-3.0 * t).exp()).collect();
        assert!((fit_rate(&t, &y, 0.25).unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn fit_rate_rejects_underflow() {
        let t = linspace(0.0, 1.0, 50);
        let mut y = vec![1.0; 50];
        y[45..].iter_mut().for_each(|v| *v = 0.0);
        assert!(matches!(fit_rate(&t, &y, 0.2), Err(Error::Fit(_))));
        assert!(fit_rate(&t, &y, 0.0).is_err());
    }

    #[test]
    fn envelope_examples() {
        let cert = certify_fb1(1.0, 1.0, 1.0, 1.0, 0.5, 1.0).unwrap();
        let env = build_envelope(&cert, &InitialMetrics { h0: Some(4.0), ..Default::default() }).unwrap();
        assert_eq!(env.value(0.0), 4.0);
        assert!((env.value(2.0) - 4.0 * (-1f64).exp()).abs() < 1e-15);

        let cert = certify_grad1(1.0, 1.0, 1.0, 2.0).unwrap();
        let env = build_envelope(&cert, &InitialMetrics { gap0: Some(0.5), ..Default::default() }).unwrap();
        assert!((env.value(1.0) - 0.06767).abs() < 1e-5);
        assert!(build_envelope(&cert, &InitialMetrics { h0: Some(1.0), ..Default::default() }).is_err());

        let grid = TimeGrid::with_horizon(10.0).unwrap();
        let cert = certify_fb2(1.0, 1.0, 0.5, 0.5, &Schedule::constant(40.0, Some(11.0)), &grid).unwrap();
        let gl = cert.constants.gamma_lower.unwrap();
        let init = InitialMetrics { h0: Some(1.0), lemma_m: Some(6.0), ..Default::default() };
        let env = build_envelope(&cert, &init).unwrap();
        let t = 0.7;
        let expected = (-(gl - 1.0) * t).exp() + 6.0 / (gl - 2.0) * (-t).exp();
        assert!((env.value(t) - expected).abs() < 1e-15);
        assert_eq!(env.decay_exponent, 1.0);
    }

    #[test]
    fn envelope_verification() {
        let cert = certify_fb1(1.0, 1.0, 1.0, 1.0, 0.5, 1.0).unwrap();
        let t = linspace(0.0, 20.0, 501);
        let env = build_envelope(&cert, &InitialMetrics { h0: Some(1.0), ..Default::default() }).unwrap();

        let zero = verify_envelope(&series(t.clone(), vec![0.0; 501]), EnvelopeMetric::DistanceSquared, &env, 1e-8, 1e-6)
            .unwrap();
        assert!(zero.pass && zero.violations == 0 && zero.fitted_rate.is_none());

        let fast: Vec<f64> = t.iter().map(|t| (-2.0 * t).exp()).collect();
        let ok = verify_envelope(&series(t.clone(), fast), EnvelopeMetric::DistanceSquared, &env, 1e-8, 1e-6).unwrap();
        assert!(ok.pass);
        assert!((ok.fitted_rate.unwrap() - 2.0).abs() < 1e-9);

        let doubled: Vec<f64> = t.iter().map(|&t| 2.0 * env.value(t)).collect();
        let bad = verify_envelope(&series(t, doubled), EnvelopeMetric::DistanceSquared, &env, 0.0, 1e-6).unwrap();
        assert!(!bad.pass);
        assert!((bad.max_ratio - 2.0).abs() < 1e-12);
        assert_eq!(bad.violations, 501);
    }

    #[test]
    fn slow_fit_fails_rate_check() {
        let cert = certify_fb1(1.0, 1.0, 1.0, 1.0, 0.5, 1.0).unwrap();
        let env = build_envelope(&cert, &InitialMetrics { h0: Some(10.0), ..Default::default() }).unwrap();
        let t = linspace(0.0, 10.0, 501);
        let slow: Vec<f64> = t.iter().map(|t| (-0.3 * t).exp()).collect();
        let r = verify_envelope(&series(t, slow), EnvelopeMetric::DistanceSquared, &env, 1e-8, 1e-6).unwrap();
        assert_eq!(r.violations, 0);
        assert!(!r.rate_pass && !r.pass);
    }

    #[test]
    fn chain_examples() {
        // g = ½x²: gap = h/2 and ‖∇g‖ = √h, so every link is an equality.
        let t = linspace(0.0, 5.0, 50);
        let h: Vec<f64> = t.iter().map(|t| (-2.0 * t).exp()).collect();
        let mut m = series(t, h.clone());
        m.gap = Some(h.iter().map(|h| h / 2.0).collect());
        m.gradnorm = Some(h.iter().map(|h| h.sqrt()).collect());
        assert!(verify_value_chain(&m, 1.0, 1.0).unwrap().pass);
        assert!(verify_rate_chain(&m, 1.0, 1.0, 1.0).unwrap().pass);
        assert!(!verify_rate_chain(&m, 1.0, 1.0, 2.5).unwrap().pass);
        assert!(!verify_value_chain(&m, 1.5, 1.0).unwrap().pass);
        assert!(verify_value_chain(&series(vec![0.0], vec![0.0]), 1.0, 1.0).is_err());
    }

    fn equilibrium_traj() -> Trajectory {
        Trajectory {
            order: 2,
            dim: 1,
            samples: (0..10).map(|i| Sample { t: i as f64, x: dvector![0.0], v: dvector![0.0] }).collect(),
            info: TrajectoryInfo {
                solver: "none".into(),
                control: StepControl::default(),
                t_end: 9.0,
                stats: StepStats::default(),
            },
        }
    }

    #[test]
    fn lyapunov_at_equilibrium() {
        let grid = TimeGrid::with_horizon(9.0).unwrap();
        let coeffs =
            LemmaCoefficients::fb2(1.0, 1.0, 0.5, 0.5, &Schedule::constant(40.0, Some(11.0)), &grid).unwrap();
        let traj = equilibrium_traj();
        let m = series(traj.times().collect(), vec![0.0; 10]);
        let r = verify_lyapunov(&traj, &coeffs, &m).unwrap();
        assert!(r.pass && r.l0 == 0.0 && r.max_increase_rate == 0.0);
        assert!(r.hypotheses_hold);
    }
}
