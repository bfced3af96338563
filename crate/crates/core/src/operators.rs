//! Evaluation oracles for the operators of `0 ∈ Ax + Bx`.
//!
//! `A` is only ever touched through its resolvent `J_{ηA} = (id + ηA)^{-1}`
//! ([`ResolventOracle`]); `B` is a single-valued monotone Lipschitz map
//! ([`MonotoneMap`]). When `A = ∂f` the resolvent is the proximal map of
//! `ηf`, and the closed-form catalog in [`ProxSpec`] covers the functions
//! used by the benchmark suite.
//!
//! The catalog of shipped operators is our own choice: zero, weighted ℓ1,
//! scaled squared norm, box indicator and the translated linear map
//! `x ↦ ρx − c`.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense real vector; the finite-dimensional stand-in for the Hilbert space.
pub type Vector = nalgebra::DVector<f64>;

/// Slack used when comparing audited constants against their claims.
pub const AUDIT_SLACK: f64 = 1e-9;

/// Radius of the ball audit points are drawn from.
pub const AUDIT_RADIUS: f64 = 10.0;

pub(crate) fn ensure_finite(x: &Vector, what: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{what} has non-finite coordinates")))
    }
}

pub(crate) fn ensure_dim(expected: Option<usize>, x: &Vector) -> Result<()> {
    match expected {
        Some(d) if d != x.len() => Err(Error::DimensionMismatch { expected: d, actual: x.len() }),
        _ => Ok(()),
    }
}

/// Single-valued monotone map `B` that is `(1/β)`-Lipschitz.
pub trait MonotoneMap: Send + Sync + Debug {
    fn eval(&self, x: &Vector) -> Vector;

    /// The `β` of the `(1/β)`-Lipschitz bound.
    fn beta(&self) -> f64;

    /// Fixed input dimension, if the map has one.
    fn dim(&self) -> Option<usize> {
        None
    }
}

/// Resolvent `J_{ηA}` of a maximally monotone operator `A`.
pub trait ResolventOracle: Send + Sync + Debug {
    fn resolve(&self, eta: f64, x: &Vector) -> Vector;

    fn description(&self) -> String;

    fn dim(&self) -> Option<usize> {
        None
    }
}

/// A convex function with whatever first-order information it exposes.
pub trait FunctionOracle: Send + Sync + Debug {
    fn value(&self, x: &Vector) -> f64;

    fn gradient(&self, _x: &Vector) -> Option<Vector> {
        None
    }

    /// `prox_{ηf}(x)`, when available in closed form.
    fn prox(&self, _eta: f64, _x: &Vector) -> Option<Vector> {
        None
    }

    /// Modulus `ρ` such that `f − (ρ/2)‖·‖²` is convex.
    fn strong_convexity(&self) -> f64 {
        0.0
    }

    fn description(&self) -> String;

    fn dim(&self) -> Option<usize> {
        None
    }
}

/// Closed-form proximal catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProxSpec {
    /// `f ≡ 0`; the resolvent of the zero operator.
    Zero,
    /// `f = w‖x‖₁`.
    L1Norm { weight: f64 },
    /// `f = (c/2)‖x‖²`.
    ScaledSqNorm { c: f64 },
    /// Indicator of `{lo ≤ x ≤ hi}`; its subdifferential is the normal cone.
    BoxIndicator { lo: Vec<f64>, hi: Vec<f64> },
    /// `f = (ρ/2)‖x‖² − ⟨c, x⟩`, so `∂f(x) = ρx − c`.
    TranslatedLinear { rho: f64, c: Vec<f64> },
}

/// A validated catalog entry. Acts both as a [`FunctionOracle`] and as the
/// [`ResolventOracle`] of its subdifferential.
#[derive(Debug, Clone, PartialEq)]
pub struct Prox {
    spec: ProxSpec,
}

/// Validate a catalog spec and return its oracle.
pub fn build_prox(spec: ProxSpec) -> Result<Prox> {
    match &spec {
        ProxSpec::Zero => {}
        ProxSpec::L1Norm { weight } => {
            if !(weight.is_finite() && *weight > 0.0) {
                return Err(Error::InvalidParameter(format!("l1_norm requires w > 0, got {weight}")));
            }
        }
        ProxSpec::ScaledSqNorm { c } => {
            if !(c.is_finite() && *c > 0.0) {
                return Err(Error::InvalidParameter(format!("scaled_sqnorm requires c > 0, got {c}")));
            }
        }
        ProxSpec::BoxIndicator { lo, hi } => {
            if lo.is_empty() || lo.len() != hi.len() {
                return Err(Error::InvalidParameter(format!(
                    "box_indicator requires lo and hi of equal positive length, got {} and {}",
                    lo.len(),
                    hi.len()
                )));
            }
            if let Some(i) = (0..lo.len()).find(|&i| !(lo[i] <= hi[i]) || lo[i].is_nan() || hi[i].is_nan()) {
                return Err(Error::InvalidParameter(format!(
                    "box_indicator requires lo ≤ hi componentwise; component {i} has lo={} hi={}",
                    lo[i], hi[i]
                )));
            }
        }
        ProxSpec::TranslatedLinear { rho, c } => {
            if !(rho.is_finite() && *rho > 0.0) {
                return Err(Error::InvalidParameter(format!("translated_linear requires ρ > 0, got {rho}")));
            }
            if c.is_empty() || c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("translated_linear requires a finite, non-empty c".into()));
            }
        }
    }
    Ok(Prox { spec })
}

fn soft_threshold(v: f64, tau: f64) -> f64 {
    v.signum() * (v.abs() - tau).max(0.0)
}

impl Prox {
    pub fn spec(&self) -> &ProxSpec {
        &self.spec
    }

    /// Closed-form minimiser of `f(y) + ‖y − x‖²/(2η)`.
    ///
    /// Panics on a dimension mismatch with a fixed-dimension entry; use
    /// [`resolvent`] for a checked call.
    pub fn apply(&self, eta: f64, x: &Vector) -> Vector {
        match &self.spec {
            ProxSpec::Zero => x.clone(),
            ProxSpec::L1Norm { weight } => x.map(|v| soft_threshold(v, eta * weight)),
            ProxSpec::ScaledSqNorm { c } => x / (1.0 + eta * c),
            ProxSpec::BoxIndicator { lo, hi } => {
                assert_eq!(x.len(), lo.len(), "box dimension mismatch");
                Vector::from_iterator(x.len(), x.iter().enumerate().map(|(i, v)| v.clamp(lo[i], hi[i])))
            }
            ProxSpec::TranslatedLinear { rho, c } => {
                assert_eq!(x.len(), c.len(), "translated_linear dimension mismatch");
                let c = Vector::from_column_slice(c);
                (x + eta * c) / (1.0 + eta * rho)
            }
        }
    }

    fn fixed_dim(&self) -> Option<usize> {
        match &self.spec {
            ProxSpec::BoxIndicator { lo, .. } => Some(lo.len()),
            ProxSpec::TranslatedLinear { c, .. } => Some(c.len()),
            _ => None,
        }
    }
}

impl FunctionOracle for Prox {
    fn value(&self, x: &Vector) -> f64 {
        match &self.spec {
            ProxSpec::Zero => 0.0,
            ProxSpec::L1Norm { weight } => weight * x.iter().map(|v| v.abs()).sum::<f64>(),
            ProxSpec::ScaledSqNorm { c } => 0.5 * c * x.norm_squared(),
            ProxSpec::BoxIndicator { lo, hi } => {
                let inside = x.iter().enumerate().all(|(i, v)| lo[i] <= *v && *v <= hi[i]);
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ProxSpec::TranslatedLinear { rho, c } => {
                let c = Vector::from_column_slice(c);
                0.5 * rho * x.norm_squared() - c.dot(x)
            }
        }
    }

    fn gradient(&self, x: &Vector) -> Option<Vector> {
        match &self.spec {
            ProxSpec::Zero => Some(Vector::zeros(x.len())),
            ProxSpec::ScaledSqNorm { c } => Some(x * *c),
            ProxSpec::TranslatedLinear { rho, c } => Some(x * *rho - Vector::from_column_slice(c)),
            ProxSpec::L1Norm { .. } | ProxSpec::BoxIndicator { .. } => None,
        }
    }

    fn prox(&self, eta: f64, x: &Vector) -> Option<Vector> {
        Some(self.apply(eta, x))
    }

    fn strong_convexity(&self) -> f64 {
        match &self.spec {
            ProxSpec::ScaledSqNorm { c } => *c,
            ProxSpec::TranslatedLinear { rho, .. } => *rho,
            _ => 0.0,
        }
    }

    fn description(&self) -> String {
        match &self.spec {
            ProxSpec::Zero => "zero".into(),
            ProxSpec::L1Norm { weight } => format!("{weight}·‖x‖₁"),
            ProxSpec::ScaledSqNorm { c } => format!("({c}/2)‖x‖²"),
            ProxSpec::BoxIndicator { .. } => "box indicator".into(),
            ProxSpec::TranslatedLinear { rho, .. } => format!("({rho}/2)‖x‖² − ⟨c,x⟩"),
        }
    }

    fn dim(&self) -> Option<usize> {
        self.fixed_dim()
    }
}

impl ResolventOracle for Prox {
    fn resolve(&self, eta: f64, x: &Vector) -> Vector {
        self.apply(eta, x)
    }

    fn description(&self) -> String {
        format!("∂[{}]", FunctionOracle::description(self))
    }

    fn dim(&self) -> Option<usize> {
        self.fixed_dim()
    }
}

/// Checked resolvent evaluation `J_{ηA}(x)`.
pub fn resolvent(a: &dyn ResolventOracle, eta: f64, x: &Vector) -> Result<Vector> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidParameter(format!("resolvent step η must be positive, got {eta}")));
    }
    ensure_finite(x, "resolvent input")?;
    ensure_dim(a.dim(), x)?;
    Ok(a.resolve(eta, x))
}

/// Affine map `x ↦ Mx + s`. Monotone when the symmetric part of `M` is PSD.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    matrix: DMatrix<f64>,
    shift: Vector,
    beta: f64,
}

impl LinearMap {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidParameter("linear map needs a non-empty square matrix".into()));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("linear map has non-finite entries".into()));
        }
        let n = matrix.nrows();
        let sigma_max = matrix.clone().singular_values().max();
        let beta = if sigma_max > 0.0 { 1.0 / sigma_max } else { f64::INFINITY };
        Ok(Self { matrix, shift: Vector::zeros(n), beta })
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: DMatrix::identity(dim, dim), shift: Vector::zeros(dim), beta: 1.0 }
    }

    /// The planar skew map `(x, y) ↦ (y, −x)`: monotone, 1-Lipschitz, not cocoercive.
    pub fn rotation() -> Self {
        Self { matrix: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]), shift: Vector::zeros(2), beta: 1.0 }
    }

    pub fn with_shift(mut self, shift: Vector) -> Result<Self> {
        ensure_dim(Some(self.matrix.nrows()), &shift)?;
        self.shift = shift;
        Ok(self)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl MonotoneMap for LinearMap {
    fn eval(&self, x: &Vector) -> Vector {
        &self.matrix * x + &self.shift
    }

    fn beta(&self) -> f64 {
        self.beta
    }

    fn dim(&self) -> Option<usize> {
        Some(self.matrix.nrows())
    }
}

/// `∇g` viewed as a monotone map.
#[derive(Debug, Clone)]
pub struct GradientMap {
    g: Arc<dyn FunctionOracle>,
    beta: f64,
}

impl GradientMap {
    pub fn new(g: Arc<dyn FunctionOracle>, beta: f64, dim: usize) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::InvalidParameter(format!("gradient map needs β > 0, got {beta}")));
        }
        if g.gradient(&Vector::zeros(dim)).is_none() {
            return Err(Error::Missing(format!("gradient of {}", g.description())));
        }
        Ok(Self { g, beta })
    }
}

impl MonotoneMap for GradientMap {
    fn eval(&self, x: &Vector) -> Vector {
        self.g.gradient(x).expect("gradient checked at construction")
    }

    fn beta(&self) -> f64 {
        self.beta
    }

    fn dim(&self) -> Option<usize> {
        self.g.dim()
    }
}

/// A monotone map given by a closure; handy for ad-hoc operators.
#[derive(Clone)]
pub struct FnMap {
    f: Arc<dyn Fn(&Vector) -> Vector + Send + Sync>,
    beta: f64,
    dim: Option<usize>,
}

impl FnMap {
    pub fn new(beta: f64, f: impl Fn(&Vector) -> Vector + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f), beta, dim: None }
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = Some(dim);
        self
    }
}

impl Debug for FnMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnMap").field("beta", &self.beta).field("dim", &self.dim).finish()
    }
}

impl MonotoneMap for FnMap {
    fn eval(&self, x: &Vector) -> Vector {
        (self.f)(x)
    }

    fn beta(&self) -> f64 {
        self.beta
    }

    fn dim(&self) -> Option<usize> {
        self.dim
    }
}

/// `g(x) = ½xᵀQx + bᵀx` with `Q` symmetric positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    q: DMatrix<f64>,
    b: Vector,
    lambda_min: f64,
    lambda_max: f64,
}

impl Quadratic {
    pub fn new(q: DMatrix<f64>, b: Vector) -> Result<Self> {
        let n = q.nrows();
        if n == 0 || !q.is_square() {
            return Err(Error::InvalidParameter("Q must be a non-empty square matrix".into()));
        }
        ensure_dim(Some(n), &b)?;
        ensure_finite(&b, "b")?;
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("Q has non-finite entries".into()));
        }
        let scale = q.amax().max(1.0);
        if (&q - q.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidParameter("Q must be symmetric".into()));
        }
        let eig = q.clone().symmetric_eigen();
        let lambda_min = eig.eigenvalues.min();
        let lambda_max = eig.eigenvalues.max();
        if !(lambda_min > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Q must be positive definite; smallest eigenvalue is {lambda_min}"
            )));
        }
        Ok(Self { q, b, lambda_min, lambda_max })
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn b(&self) -> &Vector {
        &self.b
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// Solves `Qx = −b` by Cholesky.
    pub fn minimizer(&self) -> Vector {
        let chol = self.q.clone().cholesky().expect("Q is positive definite");
        chol.solve(&(-&self.b))
    }
}

impl FunctionOracle for Quadratic {
    fn value(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.b.dot(x)
    }

    fn gradient(&self, x: &Vector) -> Option<Vector> {
        Some(&self.q * x + &self.b)
    }

    fn strong_convexity(&self) -> f64 {
        self.lambda_min
    }

    fn description(&self) -> String {
        format!("½xᵀQx + bᵀx (d = {})", self.q.nrows())
    }

    fn dim(&self) -> Option<usize> {
        Some(self.q.nrows())
    }
}

/// Source of graph points `(x, y)` with `y ∈ T(x)` for an operator `T`.
pub trait GraphSampler: Sync {
    fn dim(&self) -> usize;

    /// Map a seed point `z` to a point on the graph.
    fn graph_point(&self, z: &Vector) -> (Vector, Vector);
}

/// Graph of a single-valued map: `(z, B z)`.
#[derive(Debug, Clone, Copy)]
pub struct MapGraph<'a> {
    pub map: &'a dyn MonotoneMap,
    pub dim: usize,
}

impl GraphSampler for MapGraph<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn graph_point(&self, z: &Vector) -> (Vector, Vector) {
        (z.clone(), self.map.eval(z))
    }
}

/// Graph of `A + B` reached through the resolvent: with `p = J_{ηA}(z)` one has
/// `(z − p)/η ∈ A p`, hence `(p, (z − p)/η + B p)` lies on the graph of `A + B`.
#[derive(Debug, Clone, Copy)]
pub struct SumGraph<'a> {
    pub a: &'a dyn ResolventOracle,
    pub b: &'a dyn MonotoneMap,
    pub eta: f64,
    pub dim: usize,
}

impl GraphSampler for SumGraph<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn graph_point(&self, z: &Vector) -> (Vector, Vector) {
        let p = self.a.resolve(self.eta, z);
        let y = (z - &p) / self.eta + self.b.eval(&p);
        (p, y)
    }
}

/// Uniform sample from the Euclidean ball of the given radius.
pub fn sample_ball<R: Rng>(rng: &mut R, dim: usize, radius: f64) -> Vector {
    loop {
        let g = Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = g.norm();
        if n > 0.0 {
            let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
            return g * (r / n);
        }
    }
}

/// Empirical constants observed over sampled graph pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub pairs: usize,
    pub discarded: usize,
    pub rho_claim: f64,
    pub beta_claim: Option<f64>,
    /// `min ⟨Δy, Δx⟩ / ‖Δx‖²` over the pairs.
    pub min_monotone_quotient: f64,
    /// `max ‖Δy‖ / ‖Δx‖`, only when a Lipschitz claim is audited.
    pub max_lipschitz_ratio: Option<f64>,
    /// Pairs with `⟨Δy, Δx⟩ − β‖Δy‖² < −1e−6`, only with a β claim.
    pub cocoercivity_violations: Option<usize>,
    pub monotone_pass: bool,
    pub lipschitz_pass: bool,
    pub pass: bool,
}

impl AuditReport {
    pub fn cocoercivity_violation_fraction(&self) -> Option<f64> {
        self.cocoercivity_violations.map(|v| v as f64 / self.pairs as f64)
    }
}

/// Threshold below which a cocoercivity quotient counts as violated.
pub const COCOERCIVITY_MARGIN: f64 = 1e-6;

/// Sample `n_pairs` graph pairs from seed points uniform on the ball of
/// radius 10 and compare the observed monotonicity quotient against
/// `rho_claim` and, when given, the Lipschitz ratio against `1/beta_claim`.
///
/// Pairs whose inputs coincide are discarded and resampled.
pub fn audit_map(
    sampler: &dyn GraphSampler,
    rho_claim: f64,
    beta_claim: Option<f64>,
    n_pairs: usize,
    seed: u64,
) -> Result<AuditReport> {
    if n_pairs == 0 {
        return Err(Error::InvalidParameter("audit needs n_pairs ≥ 1".into()));
    }
    if let Some(beta) = beta_claim {
        if !(beta > 0.0) {
            return Err(Error::InvalidParameter(format!("β claim must be positive, got {beta}")));
        }
    }
    let dim = sampler.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_quotient = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    let mut coco_violations = 0usize;
    let mut discarded = 0usize;
    let mut accepted = 0usize;
    let max_attempts = 100 * n_pairs + 1000;

    while accepted < n_pairs {
        if accepted + discarded >= max_attempts {
            return Err(Error::InvalidParameter(format!(
                "audit sampler produced {discarded} degenerate pairs; operator graph looks collapsed"
            )));
        }
        let z1 = sample_ball(&mut rng, dim, AUDIT_RADIUS);
        let z2 = sample_ball(&mut rng, dim, AUDIT_RADIUS);
        let (x1, y1) = sampler.graph_point(&z1);
        let (x2, y2) = sampler.graph_point(&z2);
        let dx = &x1 - &x2;
        let dy = &y1 - &y2;
        let dx2 = dx.norm_squared();
        if dx2 == 0.0 {
            discarded += 1;
            continue;
        }
        accepted += 1;
        let inner = dy.dot(&dx);
        min_quotient = min_quotient.min(inner / dx2);
        if let Some(beta) = beta_claim {
            max_ratio = max_ratio.max(dy.norm() / dx2.sqrt());
            if inner - beta * dy.norm_squared() < -COCOERCIVITY_MARGIN {
                coco_violations += 1;
            }
        }
    }

    let monotone_pass = min_quotient >= rho_claim - AUDIT_SLACK;
    let lipschitz_pass = match beta_claim {
        Some(beta) => max_ratio <= 1.0 / beta + AUDIT_SLACK,
        None => true,
    };
    Ok(AuditReport {
        pairs: accepted,
        discarded,
        rho_claim,
        beta_claim,
        min_monotone_quotient: min_quotient,
        max_lipschitz_ratio: beta_claim.map(|_| max_ratio),
        cocoercivity_violations: beta_claim.map(|_| coco_violations),
        monotone_pass,
        lipschitz_pass,
        pass: monotone_pass && lipschitz_pass,
    })
}
