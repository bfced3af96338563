//! Small benchmark instances of `0 ∈ Ax + Bx` with exact moduli and known
//! solutions.
//!
//! The skew-rotation instance is the interesting one: its `B` is monotone and
//! Lipschitz but not cocoercive, so the classical forward-backward analysis
//! does not cover it.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{
    audit_map, build_prox, sample_ball, AuditReport, FunctionOracle, GradientMap, LinearMap, MapGraph,
    MonotoneMap, ProxSpec, Quadratic, ResolventOracle, SumGraph, Vector, AUDIT_RADIUS,
};

/// Tolerance used when an instance computes its own `x*` iteratively.
pub const GROUND_TRUTH_TOL: f64 = 1e-11;

const GROUND_TRUTH_MAX_ITER: usize = 1_000_000;

/// A fully specified inclusion `0 ∈ Ax + Bx`.
///
/// When the problem is `min f + g`, `A = ∂f` (through its prox) and
/// `B = ∇g`; `f` absent means `A = 0`.
#[derive(Clone)]
pub struct ProblemInstance {
    pub name: String,
    pub description: String,
    pub dim: usize,
    pub a: Arc<dyn ResolventOracle>,
    pub b: Arc<dyn MonotoneMap>,
    pub f: Option<Arc<dyn FunctionOracle>>,
    pub g: Option<Arc<dyn FunctionOracle>>,
    pub rho: f64,
    pub beta: f64,
    pub x_star: Option<Vector>,
    pub descriptor: Option<ProblemDescriptor>,
}

impl fmt::Debug for ProblemInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemInstance")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("rho", &self.rho)
            .field("beta", &self.beta)
            .field("x_star", &self.x_star)
            .finish_non_exhaustive()
    }
}

impl ProblemInstance {
    /// True when the problem is `min g` with `g` smooth, so the gradient
    /// systems apply.
    pub fn is_smooth(&self) -> bool {
        self.g.is_some() && self.f.is_none()
    }

    pub fn x_star(&self) -> Result<&Vector> {
        self.x_star.as_ref().ok_or_else(|| Error::Missing(format!("ground truth x* for {}", self.name)))
    }

    /// `F = f + g` when a value oracle exists.
    pub fn objective(&self, x: &Vector) -> Option<f64> {
        let g = self.g.as_ref()?.value(x);
        Some(g + self.f.as_ref().map_or(0.0, |f| f.value(x)))
    }

    pub fn gradient(&self, x: &Vector) -> Option<Vector> {
        if self.f.is_some() {
            return None;
        }
        self.g.as_ref()?.gradient(x)
    }

    /// `‖x − J_{ηA}(x − ηBx)‖`.
    pub fn fixed_point_residual(&self, eta: f64, x: &Vector) -> f64 {
        let y = self.a.resolve(eta, &(x - self.b.eval(x) * eta));
        (y - x).norm()
    }

    pub fn with_name(mut self, name: impl Into<String>, description: impl Into<String>) -> Self {
        self.name = name.into();
        self.description = description.into();
        self
    }
}

/// `g(x) = ½xᵀQx + bᵀx`, `A = 0`, `B = ∇g`.
pub fn make_quadratic(q: DMatrix<f64>, b: Vector) -> Result<ProblemInstance> {
    let quad = Quadratic::new(q, b)?;
    let dim = quad.b().len();
    let rho = quad.lambda_min();
    let beta = 1.0 / quad.lambda_max();
    let x_star = quad.minimizer();
    let g: Arc<dyn FunctionOracle> = Arc::new(quad);
    Ok(ProblemInstance {
        name: "quadratic".into(),
        description: format!("strongly convex quadratic in {dim} dimensions"),
        dim,
        a: Arc::new(build_prox(ProxSpec::Zero)?),
        b: Arc::new(GradientMap::new(g.clone(), beta, dim)?),
        f: None,
        g: Some(g),
        rho,
        beta,
        x_star: Some(x_star),
        descriptor: None,
    })
}

/// `min w‖x‖₁ + ½xᵀQx + bᵀx`; `x*` from [`ground_truth`].
pub fn make_sc_lasso(q: DMatrix<f64>, b: Vector, w: f64) -> Result<ProblemInstance> {
    if !(w >= 0.0 && w.is_finite()) {
        return Err(Error::InvalidParameter(format!("ℓ₁ weight must satisfy w ≥ 0, got {w}")));
    }
    if w == 0.0 {
        return make_quadratic(q, b);
    }
    let quad = Quadratic::new(q, b)?;
    let dim = quad.b().len();
    let rho = quad.lambda_min();
    let beta = 1.0 / quad.lambda_max();
    let g: Arc<dyn FunctionOracle> = Arc::new(quad);
    let l1 = Arc::new(build_prox(ProxSpec::L1Norm { weight: w })?);
    let mut instance = ProblemInstance {
        name: "sc-lasso".into(),
        description: format!("ℓ₁-regularised strongly convex quadratic in {dim} dimensions, w = {w}"),
        dim,
        a: l1.clone(),
        b: Arc::new(GradientMap::new(g.clone(), beta, dim)?),
        f: Some(l1),
        g: Some(g),
        rho,
        beta,
        x_star: None,
        descriptor: None,
    };
    instance.x_star = Some(ground_truth(&instance, GROUND_TRUTH_TOL)?);
    Ok(instance)
}

/// `A(x) = ρx − c`, `B(x) = Sx` with `S = [[0, 1], [−1, 0]]`.
pub fn make_skew_rotation(rho: f64, c: Vector) -> Result<ProblemInstance> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidParameter(format!("skew rotation needs ρ > 0, got {rho}")));
    }
    if c.len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, actual: c.len() });
    }
    let rotation = LinearMap::rotation();
    let m = DMatrix::identity(2, 2) * rho + rotation.matrix();
    let x_star = m.lu().solve(&c).ok_or_else(|| Error::InvalidParameter("ρI + S is singular".into()))?;
    Ok(ProblemInstance {
        name: "skew-rotation".into(),
        description: format!("A = ρI − c with ρ = {rho}, B = planar rotation (monotone, not cocoercive)"),
        dim: 2,
        a: Arc::new(build_prox(ProxSpec::TranslatedLinear { rho, c: c.iter().copied().collect() })?),
        b: Arc::new(rotation),
        f: None,
        g: None,
        rho,
        beta: 1.0,
        x_star: Some(x_star),
        descriptor: None,
    })
}

/// Discrete forward-backward iteration `x⁺ = J_{ηA}(x − ηBx)` with
/// `η = β·min(1, ρβ)`, stopped when `‖x⁺ − x‖ ≤ tol·1e−2`.
pub fn ground_truth(instance: &ProblemInstance, tol: f64) -> Result<Vector> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParameter(format!("ground truth tolerance must be positive, got {tol}")));
    }
    let eta = instance.beta * 1f64.min(instance.rho * instance.beta);
    let target = tol * 1e-2;
    let mut x = Vector::zeros(instance.dim);
    let mut residual = f64::INFINITY;
    for _ in 0..GROUND_TRUTH_MAX_ITER {
        let next = instance.a.resolve(eta, &(&x - instance.b.eval(&x) * eta));
        residual = (&next - &x).norm();
        x = next;
        if !residual.is_finite() {
            break;
        }
        if residual <= target {
            return Ok(x);
        }
    }
    Err(Error::NoConvergence { iterations: GROUND_TRUTH_MAX_ITER, residual })
}

/// Sandwich checks for smooth instances at random points:
/// `ρ/2‖x − x*‖² ≤ g(x) − g* ≤ 1/(2β)‖x − x*‖²` and `ρ‖x − x*‖ ≤ ‖∇g(x)‖`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub points: usize,
    pub lower_violations: usize,
    pub upper_violations: usize,
    pub gradient_violations: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceAudit {
    /// `A + B` against `ρ`.
    pub sum: AuditReport,
    /// `B` against `β`, including the cocoercivity count.
    pub forward: AuditReport,
    pub sandwich: Option<SandwichReport>,
    /// Names of the claims that failed.
    pub failures: Vec<String>,
    pub pass: bool,
}

impl InstanceAudit {
    pub fn cocoercivity_violation_fraction(&self) -> f64 {
        self.forward.cocoercivity_violation_fraction().unwrap_or(0.0)
    }
}

/// Audit the instance's own `(ρ, β)` claims.
pub fn audit_instance(instance: &ProblemInstance, n_pairs: usize, seed: u64) -> Result<InstanceAudit> {
    audit_claims(instance, instance.rho, instance.beta, n_pairs, seed)
}

/// Audit arbitrary `(ρ, β)` claims against the instance's operators.
///
/// Cocoercivity of `B` is measured but is not one of the claims.
pub fn audit_claims(
    instance: &ProblemInstance,
    rho: f64,
    beta: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<InstanceAudit> {
    if n_pairs < 100 {
        return Err(Error::InvalidParameter(format!("instance audit needs at least 100 pairs, got {n_pairs}")));
    }
    let sum_graph = SumGraph { a: instance.a.as_ref(), b: instance.b.as_ref(), eta: 1.0, dim: instance.dim };
    let sum = audit_map(&sum_graph, rho, None, n_pairs, seed)?;
    let forward_graph = MapGraph { map: instance.b.as_ref(), dim: instance.dim };
    let forward = audit_map(&forward_graph, 0.0, Some(beta), n_pairs, seed.wrapping_add(1))?;

    let mut failures = Vec::new();
    if !sum.monotone_pass {
        failures.push(format!("A + B is {rho}-strongly monotone"));
    }
    if !forward.monotone_pass {
        failures.push("B is monotone".to_string());
    }
    if !forward.lipschitz_pass {
        failures.push(format!("B is 1/{beta}-Lipschitz"));
    }
    let sandwich = if instance.is_smooth() {
        let report = sandwich_checks(instance, rho, beta, n_pairs, seed.wrapping_add(2))?;
        if report.lower_violations > 0 {
            failures.push("ρ/2‖x − x*‖² ≤ g(x) − g(x*)".into());
        }
        if report.upper_violations > 0 {
            failures.push("g(x) − g(x*) ≤ 1/(2β)‖x − x*‖²".into());
        }
        if report.gradient_violations > 0 {
            failures.push("ρ‖x − x*‖ ≤ ‖∇g(x)‖".into());
        }
        Some(report)
    } else {
        None
    };
    let pass = failures.is_empty();
    Ok(InstanceAudit { sum, forward, sandwich, failures, pass })
}

fn sandwich_checks(instance: &ProblemInstance, rho: f64, beta: f64, points: usize, seed: u64) -> Result<SandwichReport> {
    let g = instance.g.as_ref().expect("smooth instance");
    let x_star = instance.x_star()?;
    let g_star = g.value(x_star);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut lower, mut upper, mut grad) = (0, 0, 0);
    for _ in 0..points {
        let x = x_star + sample_ball(&mut rng, instance.dim, AUDIT_RADIUS);
        let d2 = (&x - x_star).norm_squared();
        let gap = g.value(&x) - g_star;
        let gn = g.gradient(&x).expect("smooth instance").norm();
        let lo = rho / 2.0 * d2;
        let hi = d2 / (2.0 * beta);
        if lo > gap + 1e-8 * (1.0 + lo.abs() + gap.abs()) {
            lower += 1;
        }
        if gap > hi + 1e-8 * (1.0 + gap.abs() + hi.abs()) {
            upper += 1;
        }
        let lhs = rho * d2.sqrt();
        if lhs > gn + 1e-8 * (1.0 + lhs + gn) {
            grad += 1;
        }
    }
    Ok(SandwichReport {
        points,
        lower_violations: lower,
        upper_violations: upper,
        gradient_violations: grad,
        pass: lower + upper + grad == 0,
    })
}

/// Serializable recipe for an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemDescriptor {
    /// `q` given row by row.
    Quadratic { q: Vec<Vec<f64>>, b: Vec<f64> },
    ScLasso { q: Vec<Vec<f64>>, b: Vec<f64>, w: f64 },
    /// `Q = U diag(eigs) Uᵀ` with `U` a seeded random orthogonal matrix and
    /// eigenvalues evenly spaced on `[eig_min, eig_max]`; `b` standard normal.
    RandomScLasso { dim: usize, seed: u64, w: f64, eig_min: f64, eig_max: f64 },
    SkewRotation { rho: f64, c: Vec<f64> },
}

/// Largest dimension accepted from descriptors.
pub const MAX_DIM: usize = 100;

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || n > MAX_DIM {
        return Err(Error::InvalidParameter(format!("matrix dimension must be in 1..={MAX_DIM}, got {n}")));
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, actual: bad.len() });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn random_spd(dim: usize, seed: u64, eig_min: f64, eig_max: f64) -> Result<(DMatrix<f64>, Vector)> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::InvalidParameter(format!("dimension must be in 1..={MAX_DIM}, got {dim}")));
    }
    if !(eig_min > 0.0 && eig_min <= eig_max && eig_max.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "eigenvalue range must satisfy 0 < eig_min ≤ eig_max, got [{eig_min}, {eig_max}]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss: DMatrix<f64> = DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(&mut rng));
    let u = gauss.qr().q();
    let eigs = Vector::from_fn(dim, |i, _| {
        if dim == 1 {
            eig_min
        } else {
            eig_min + (eig_max - eig_min) * i as f64 / (dim - 1) as f64
        }
    });
    let q: DMatrix<f64> = &u * DMatrix::from_diagonal(&eigs) * u.transpose();
    let q = (&q + q.transpose()) * 0.5;
    let b = Vector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
    Ok((q, b))
}

impl ProblemDescriptor {
    pub fn build(&self) -> Result<ProblemInstance> {
        let instance = match self {
            ProblemDescriptor::Quadratic { q, b } => make_quadratic(matrix_from_rows(q)?, Vector::from_vec(b.clone()))?,
            ProblemDescriptor::ScLasso { q, b, w } => {
                make_sc_lasso(matrix_from_rows(q)?, Vector::from_vec(b.clone()), *w)?
            }
            ProblemDescriptor::RandomScLasso { dim, seed, w, eig_min, eig_max } => {
                let (q, b) = random_spd(*dim, *seed, *eig_min, *eig_max)?;
                make_sc_lasso(q, b, *w)?
            }
            ProblemDescriptor::SkewRotation { rho, c } => make_skew_rotation(*rho, Vector::from_vec(c.clone()))?,
        };
        Ok(ProblemInstance { descriptor: Some(self.clone()), ..instance })
    }
}

/// A named entry of the shipped suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub descriptor: ProblemDescriptor,
}

/// The shipped benchmark suite.
pub fn registry() -> Vec<RegistryEntry> {
    vec![
        RegistryEntry {
            name: "quadratic-2d",
            description: "g(x) = ½xᵀdiag(1, 4)x − (1, 4)ᵀx, x* = (1, 1)",
            descriptor: ProblemDescriptor::Quadratic {
                q: vec![vec![1.0, 0.0], vec![0.0, 4.0]],
                b: vec![-1.0, -4.0],
            },
        },
        RegistryEntry {
            name: "sc-lasso-20d",
            description: "0.1‖x‖₁ + random 20-d quadratic with spectrum in [1, 4]",
            descriptor: ProblemDescriptor::RandomScLasso { dim: 20, seed: 7, w: 0.1, eig_min: 1.0, eig_max: 4.0 },
        },
        RegistryEntry {
            name: "skew-rotation",
            description: "A(x) = x − (1, 0), B = planar rotation; B is not cocoercive",
            descriptor: ProblemDescriptor::SkewRotation { rho: 1.0, c: vec![1.0, 0.0] },
        },
        RegistryEntry {
            name: "scalar-quadratic",
            description: "g(x) = ½x² in one dimension",
            descriptor: ProblemDescriptor::Quadratic { q: vec![vec![1.0]], b: vec![0.0] },
        },
    ]
}

pub fn lookup(name: &str) -> Option<RegistryEntry> {
    registry().into_iter().find(|e| e.name == name)
}

/// Build a registry instance by name.
pub fn by_name(name: &str) -> Result<ProblemInstance> {
    let entry = lookup(name).ok_or_else(|| Error::Missing(format!("problem '{name}' in the registry")))?;
    Ok(entry.descriptor.build()?.with_name(entry.name, entry.description))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn quadratic_examples() {
        let p = make_quadratic(dmatrix![1.0, 0.0; 0.0, 4.0], dvector![0.0, 0.0]).unwrap();
        assert!((p.rho - 1.0).abs() < 1e-14 && (p.beta - 0.25).abs() < 1e-14);
        assert!(p.x_star().unwrap().norm() < 1e-15);
        let p = make_quadratic(DMatrix::identity(2, 2), dvector![-1.0, 0.0]).unwrap();
        assert!((p.x_star().unwrap() - dvector![1.0, 0.0]).norm() < 1e-15);
        let p = make_quadratic(dmatrix![1.0, 0.0; 0.0, 4.0], dvector![-1.0, -4.0]).unwrap();
        assert!((p.x_star().unwrap() - dvector![1.0, 1.0]).norm() < 1e-14);
        assert!(p.is_smooth());
    }

    #[test]
    fn non_spd_is_rejected() {
        assert!(make_quadratic(dmatrix![1.0, 0.0; 0.0, -1.0], dvector![0.0, 0.0]).is_err());
        assert!(make_sc_lasso(dmatrix![1.0, 2.0; 0.0, 1.0], dvector![0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn sc_lasso_examples() {
        let p = make_sc_lasso(DMatrix::identity(2, 2), dvector![-2.0, 0.0], 1.0).unwrap();
        assert!((p.x_star().unwrap() - dvector![1.0, 0.0]).norm() < 1e-9);
        assert!(!p.is_smooth());
        let p = make_sc_lasso(dmatrix![1.0, 0.0; 0.0, 4.0], dvector![-1.0, -4.0], 10.0).unwrap();
        assert!(p.x_star().unwrap().norm() < 1e-9);
        let p = make_sc_lasso(dmatrix![1.0, 0.0; 0.0, 4.0], dvector![-1.0, -4.0], 0.0).unwrap();
        assert!((p.x_star().unwrap() - dvector![1.0, 1.0]).norm() < 1e-9);
    }

    #[test]
    fn skew_rotation_examples() {
        let p = make_skew_rotation(1.0, dvector![1.0, 0.0]).unwrap();
        let xs = p.x_star().unwrap().clone();
        assert!((&xs - dvector![0.5, 0.5]).norm() < 1e-15);
        assert!(p.fixed_point_residual(1.0, &xs) <= 1e-9);
        assert_eq!(p.a.resolve(1.0, &dvector![3.0, 1.0]), dvector![2.0, 0.5]);
        let p = make_skew_rotation(1.0, dvector![0.0, 0.0]).unwrap();
        assert_eq!(p.x_star().unwrap().norm(), 0.0);
        assert!(make_skew_rotation(0.0, dvector![1.0, 0.0]).is_err());
        assert!(make_skew_rotation(1.0, dvector![1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn ground_truth_matches_closed_forms() {
        for name in ["quadratic-2d", "skew-rotation", "scalar-quadratic"] {
            let p = by_name(name).unwrap();
            let x = ground_truth(&p, 1e-10).unwrap();
            assert!((x - p.x_star().unwrap()).norm() <= 1e-9, "{name}");
        }
        let p = by_name("skew-rotation").unwrap();
        assert!(matches!(ground_truth(&p, 0.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn skew_rotation_is_not_cocoercive() {
        let p = by_name("skew-rotation").unwrap();
        let audit = audit_instance(&p, 1000, 3).unwrap();
        assert!(audit.pass, "{:?}", audit.failures);
        assert!(audit.cocoercivity_violation_fraction() >= 0.99);
    }

    #[test]
    fn inflated_rho_fails() {
        let p = by_name("quadratic-2d").unwrap();
        assert!(audit_instance(&p, 200, 1).unwrap().pass);
        let audit = audit_claims(&p, 2.0 * p.rho, p.beta, 200, 1).unwrap();
        assert!(!audit.pass);
        assert!(audit.failures.iter().any(|f| f.contains("strongly monotone")));
        assert!(audit_instance(&p, 99, 1).is_err());
    }

    #[test]
    fn registry_descriptors_round_trip() {
        let entries = registry();
        assert!(entries.len() >= 3);
        for e in entries {
            let json = serde_json::to_string(&e.descriptor).unwrap();
            let back: ProblemDescriptor = serde_json::from_str(&json).unwrap();
            assert_eq!(back, e.descriptor);
        }
        assert!(by_name("nope").is_err());
    }
}
