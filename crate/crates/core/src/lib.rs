//! Continuous-time forward-backward and gradient dynamics for strongly
//! monotone inclusions `0 ∈ Ax + Bx`, together with the machinery to
//! certify relaxation/damping parameters, integrate the trajectories and
//! check the exponential convergence envelopes along them.
//!
//! The crate is organised bottom-up:
//!
//! - [`operators`]: vectors, resolvents, proximal catalog, monotonicity audits.
//! - [`flows`]: parameter schedules and right-hand sides of the four systems.
//! - [`certificates`]: hypothesis checks and derived rate constants.
//! - [`integrate`]: Runge-Kutta integration, trajectories and metric series.
//! - [`analysis`]: rate fitting, envelopes, chain and Lyapunov checks.
//! - [`problems`]: benchmark instances with known moduli and solutions.
//!
//! Everything works in finite dimension with dense `f64` vectors.

pub mod analysis;
pub mod certificates;
pub mod error;
pub mod flows;
pub mod integrate;
pub mod operators;
pub mod problems;

pub use analysis::{
    build_envelope, fit_rate, verify_envelope, verify_lyapunov, verify_value_chain, ChainReport,
    Envelope, EnvelopeMetric, InitialMetrics, LyapunovReport, RateReport,
};
pub use certificates::{
    certify_fb1, certify_fb2, certify_grad1, certify_grad2, lemma_bound, lemma_m,
    suggest_constants_fb2, suggest_constants_grad2, CheckedInequality, LemmaCase,
    LemmaCoefficients, RateCertificate, Theorem,
};
pub use error::{Error, Rejection, Result};
pub use flows::{FlowKind, FlowRhs, Profile, Schedule, TimeGrid};
pub use integrate::{
    integrate, record_metrics, InitialState, MetricSeries, StepControl, Trajectory,
};
pub use operators::{
    audit_map, build_prox, resolvent, FunctionOracle, MonotoneMap, Prox, ProxSpec,
    ResolventOracle, Vector,
};
pub use problems::{ground_truth, ProblemDescriptor, ProblemInstance};
