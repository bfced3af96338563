//! Turning a config into a problem instance, a schedule and a certificate.

use expflow::certificates::LemmaCoefficients;
use expflow::flows::{fb1_rhs, fb2_rhs, grad1_rhs, grad2_rhs};
use expflow::problems::lookup;
use expflow::{
    certify_fb1, certify_fb2, certify_grad1, certify_grad2, suggest_constants_fb2, suggest_constants_grad2, FlowKind,
    FlowRhs, InitialState, ProblemInstance, RateCertificate, Schedule, TimeGrid, Vector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, Params, ProblemRef};
use crate::CliError;

/// Horizon for grid checks when `t_end` is left to the certified rate.
pub const PROVISIONAL_HORIZON: f64 = 50.0;

/// Default `t_end` decays the envelope's leading term by this factor.
pub const DEFAULT_DECAY: f64 = 1e10;

/// Half-width of the box the default initial point is drawn from.
pub const DEFAULT_INIT_RADIUS: f64 = 5.0;

/// Used when the config leaves `ε` unset for suggested constants.
pub const DEFAULT_EPSILON: f64 = 0.5;

pub fn resolve_problem(problem: &ProblemRef) -> Result<ProblemInstance, CliError> {
    match problem {
        ProblemRef::Name(name) => {
            let entry = lookup(name).ok_or_else(|| CliError::UnknownProblem(name.clone()))?;
            Ok(entry.descriptor.build().map_err(CliError::from_params)?.with_name(entry.name, entry.description))
        }
        ProblemRef::Inline(d) => {
            let p = d.build().map_err(CliError::from_params)?;
            Ok(p.with_name("inline", format!("{d:?}")))
        }
    }
}

/// The fully resolved parameters of one system.
#[derive(Debug, Clone)]
pub enum Plan {
    Fb1 { alpha: f64, eta: f64, schedule: Schedule },
    Grad1 { alpha: f64, schedule: Schedule },
    Fb2 { alpha: f64, delta: f64, eta: f64, schedule: Schedule },
    Grad2 { alpha_lower: f64, schedule: Schedule },
}

impl Plan {
    pub fn kind(&self) -> FlowKind {
        match self {
            Plan::Fb1 { .. } => FlowKind::Fb1,
            Plan::Grad1 { .. } => FlowKind::Grad1,
            Plan::Fb2 { .. } => FlowKind::Fb2,
            Plan::Grad2 { .. } => FlowKind::Grad2,
        }
    }

    pub fn schedule(&self) -> &Schedule {
        match self {
            Plan::Fb1 { schedule, .. }
            | Plan::Grad1 { schedule, .. }
            | Plan::Fb2 { schedule, .. }
            | Plan::Grad2 { schedule, .. } => schedule,
        }
    }
}

fn forbid(params: &Params, system: FlowKind, names: &[&str]) -> Result<(), CliError> {
    for name in names {
        let present = match *name {
            "alpha" => params.alpha.is_some(),
            "eta" => params.eta.is_some(),
            "delta" => params.delta.is_some(),
            "gamma" => params.gamma.is_some(),
            "alpha_lower" => params.alpha_lower.is_some(),
            "epsilon" => params.epsilon.is_some(),
            _ => false,
        };
        if present {
            return Err(CliError::Config(format!("params.{name} is not a parameter of {system}")));
        }
    }
    Ok(())
}

fn required<T: Clone>(v: &Option<T>, name: &str, system: FlowKind) -> Result<T, CliError> {
    v.clone().ok_or_else(|| CliError::Config(format!("{system} needs params.{name}")))
}

pub fn plan(params: &Params, system: FlowKind, problem: &ProblemInstance) -> Result<Plan, CliError> {
    let lambda = || params.lambda.as_ref().map_or(expflow::Profile::constant(1.0), |l| l.profile());
    match system {
        FlowKind::Fb1 => {
            forbid(params, system, &["delta", "gamma", "alpha_lower", "epsilon"])?;
            let alpha = required(&params.alpha, "alpha", system)?.number("alpha")?;
            let eta = required(&params.eta, "eta", system)?;
            Ok(Plan::Fb1 { alpha, eta, schedule: Schedule::with_lambda(lambda()) })
        }
        FlowKind::Grad1 => {
            forbid(params, system, &["eta", "delta", "gamma", "alpha_lower", "epsilon"])?;
            let alpha = required(&params.alpha, "alpha", system)?.number("alpha")?;
            Ok(Plan::Grad1 { alpha, schedule: Schedule::with_lambda(lambda()) })
        }
        FlowKind::Fb2 => {
            forbid(params, system, &["alpha_lower", "epsilon"])?;
            let alpha = required(&params.alpha, "alpha", system)?.number("alpha")?;
            let delta = required(&params.delta, "delta", system)?;
            let (schedule, eta) = match (&params.lambda, &params.gamma) {
                (None, None) => {
                    let c = suggest_constants_fb2(problem.rho, problem.beta, alpha, delta)
                        .map_err(CliError::from_params)?;
                    (c.schedule(), c.eta)
                }
                (Some(l), Some(g)) => {
                    let eta = expflow::certificates::Fb2Algebra::new(problem.rho, problem.beta, alpha, delta).eta();
                    (Schedule::with_lambda(l.profile()).gamma(g.profile()), eta)
                }
                _ => return Err(CliError::Config("fb2 needs both params.lambda and params.gamma, or neither".into())),
            };
            if let Some(given) = params.eta {
                if (given - eta).abs() > 1e-9 * eta.abs().max(1.0) {
                    return Err(CliError::Config(format!(
                        "params.eta = {given} but (ρ, β, α, δ) determine η = {eta}; omit it"
                    )));
                }
            }
            Ok(Plan::Fb2 { alpha, delta, eta, schedule })
        }
        FlowKind::Grad2 => {
            forbid(params, system, &["eta", "delta"])?;
            match (&params.alpha, &params.lambda, &params.gamma) {
                (None, None, None) => {
                    if params.alpha_lower.is_some() {
                        return Err(CliError::Config("params.alpha_lower needs params.alpha".into()));
                    }
                    let eps = params.epsilon.unwrap_or(DEFAULT_EPSILON);
                    let c = suggest_constants_grad2(problem.rho, problem.beta, eps).map_err(CliError::from_params)?;
                    Ok(Plan::Grad2 { alpha_lower: c.alpha_lower, schedule: c.schedule() })
                }
                (Some(a), Some(l), Some(g)) => {
                    if params.epsilon.is_some() {
                        return Err(CliError::Config("params.epsilon applies only to suggested constants".into()));
                    }
                    let alpha = a.profile();
                    let alpha_lower = match params.alpha_lower {
                        Some(v) => v,
                        None => alpha.bounds().map(|(lo, _)| lo).ok_or_else(|| {
                            CliError::Config("params.alpha_lower is needed for this α profile".into())
                        })?,
                    };
                    let schedule = Schedule::with_lambda(l.profile()).gamma(g.profile()).alpha(alpha);
                    Ok(Plan::Grad2 { alpha_lower, schedule })
                }
                _ => Err(CliError::Config(
                    "grad2 needs all of params.alpha, params.lambda and params.gamma, or none of them".into(),
                )),
            }
        }
    }
}

/// Everything resolved from a config before any integration happens.
#[derive(Debug, Clone)]
pub struct Setup {
    pub problem: ProblemInstance,
    pub plan: Plan,
    pub seed: u64,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig, seed: u64) -> Result<Self, CliError> {
        let problem = resolve_problem(&cfg.problem)?;
        check_compatible(cfg.system, &problem)?;
        let plan = plan(&cfg.params, cfg.system, &problem)?;
        Ok(Self { problem, plan, seed })
    }

    pub fn kind(&self) -> FlowKind {
        self.plan.kind()
    }

    pub fn certify(&self, horizon: f64) -> expflow::Result<RateCertificate> {
        let p = &self.problem;
        let grid = TimeGrid::with_horizon(horizon)?;
        match &self.plan {
            Plan::Fb1 { alpha, eta, schedule } => {
                let (lo, hi) = schedule.lambda_bounds(&grid)?;
                certify_fb1(p.rho, p.beta, lo, hi, *alpha, *eta)
            }
            Plan::Grad1 { alpha, schedule } => {
                let (lo, _) = schedule.lambda_bounds(&grid)?;
                certify_grad1(p.rho, p.beta, lo, *alpha)
            }
            Plan::Fb2 { alpha, delta, schedule, .. } => certify_fb2(p.rho, p.beta, *alpha, *delta, schedule, &grid),
            Plan::Grad2 { alpha_lower, schedule } => certify_grad2(p.rho, p.beta, *alpha_lower, schedule, &grid),
        }
    }

    /// Certificate and horizon: `t_end` if given, else `ln(1e10)/r`.
    pub fn certify_for_run(&self, t_end: Option<f64>) -> expflow::Result<(RateCertificate, f64)> {
        if let Some(t) = t_end {
            return Ok((self.certify(t)?, t));
        }
        let cert = self.certify(PROVISIONAL_HORIZON)?;
        let t = DEFAULT_DECAY.ln() / cert.decay_exponent();
        if t > PROVISIONAL_HORIZON {
            Ok((self.certify(t)?, t))
        } else {
            Ok((cert, t))
        }
    }

    pub fn flow(&self) -> expflow::Result<FlowRhs> {
        let p = &self.problem;
        match &self.plan {
            Plan::Fb1 { eta, schedule, .. } => fb1_rhs(p.a.clone(), p.b.clone(), *eta, schedule.clone()),
            Plan::Fb2 { eta, schedule, .. } => fb2_rhs(p.a.clone(), p.b.clone(), *eta, schedule.clone()),
            Plan::Grad1 { schedule, .. } => grad1_rhs(smooth_part(p)?, schedule.clone()),
            Plan::Grad2 { schedule, .. } => grad2_rhs(smooth_part(p)?, schedule.clone()),
        }
    }

    pub fn lemma_coefficients(&self, horizon: f64) -> expflow::Result<Option<LemmaCoefficients>> {
        let p = &self.problem;
        match &self.plan {
            Plan::Fb2 { alpha, delta, schedule, .. } => {
                let grid = TimeGrid::with_horizon(horizon)?;
                LemmaCoefficients::fb2(p.rho, p.beta, *alpha, *delta, schedule, &grid).map(Some)
            }
            Plan::Grad2 { alpha_lower, schedule } => {
                LemmaCoefficients::grad2(p.rho, p.beta, *alpha_lower, schedule, smooth_part(p)?).map(Some)
            }
            _ => Ok(None),
        }
    }

    pub fn initial_state(&self, cfg: &ExperimentConfig) -> Result<InitialState, CliError> {
        let dim = self.problem.dim;
        let init = cfg.init.clone().unwrap_or_default();
        let vector = |v: Vec<f64>, name: &str| {
            if v.len() != dim {
                return Err(CliError::Config(format!("init.{name} has {} entries, the problem has dimension {dim}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(CliError::Config(format!("init.{name} must be finite")));
            }
            Ok(Vector::from_vec(v))
        };
        let x0 = match init.x0 {
            Some(v) => vector(v, "x0")?,
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                Vector::from_fn(dim, |_, _| rng.random_range(-DEFAULT_INIT_RADIUS..DEFAULT_INIT_RADIUS))
            }
        };
        if self.kind().order() == 1 {
            if init.v0.is_some() {
                return Err(CliError::Config(format!("init.v0 is meaningless for the first-order {} system", self.kind())));
            }
            return Ok(InitialState::first_order(x0));
        }
        let v0 = match init.v0 {
            Some(v) => vector(v, "v0")?,
            None => Vector::zeros(dim),
        };
        Ok(InitialState::second_order(x0, v0))
    }
}

fn smooth_part(p: &ProblemInstance) -> expflow::Result<std::sync::Arc<dyn expflow::FunctionOracle>> {
    p.g.clone().ok_or_else(|| expflow::Error::Missing(format!("smooth part of '{}'", p.name)))
}

pub fn check_compatible(system: FlowKind, problem: &ProblemInstance) -> Result<(), CliError> {
    if matches!(system, FlowKind::Grad1 | FlowKind::Grad2) && !problem.is_smooth() {
        return Err(CliError::Incompatible {
            system,
            problem: problem.name.clone(),
            reason: "gradient systems need a smooth objective g with no nonsmooth part".into(),
        });
    }
    Ok(())
}
