use std::path::PathBuf;

use expflow::analysis::{initial_metrics, verify_lyapunov, verify_rate_chain};
use expflow::certificates::LemmaM;
use expflow::integrate::{integrate_with_samples, TrajectoryInfo, DEFAULT_SAMPLES};
use expflow::problems::{audit_instance, registry, InstanceAudit};
use expflow::{
    build_envelope, record_metrics, verify_envelope, verify_value_chain, ChainReport, Envelope, EnvelopeMetric,
    FlowKind, InitialMetrics, LyapunovReport, MetricSeries, RateCertificate, RateReport, Trajectory,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::artifacts::{self, csv_field, OutDir};
use crate::config::{ExperimentConfig, ParamValue, Params, MAX_SWEEP_CELLS, SWEEP_AXES};
use crate::setup::{plan, resolve_problem, check_compatible, Plan, Setup};
use crate::{CliError, TOOL_NAME, TOOL_VERSION};

pub const DEFAULT_OUT_DIR: &str = "expflow-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Certify,
    Simulate,
    Verify,
    Sweep,
    List,
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// What a command did. `pass` decides the exit status.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub pass: bool,
    pub messages: Vec<String>,
    /// Printed even under `--quiet`.
    pub failures: Vec<String>,
    pub artifacts: Vec<PathBuf>,
}

pub fn execute(command: Command, opts: &Options) -> Result<Outcome, CliError> {
    if command == Command::List {
        return Ok(list());
    }
    let path = opts.config.as_ref().ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let cfg = ExperimentConfig::load(path)?;
    execute_config(command, &cfg, opts)
}

pub fn execute_config(command: Command, cfg: &ExperimentConfig, opts: &Options) -> Result<Outcome, CliError> {
    let seed = opts.seed.or(cfg.seed).unwrap_or(0);
    let out = || {
        OutDir::create(opts.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| DEFAULT_OUT_DIR.into()))
    };
    match command {
        Command::List => Ok(list()),
        Command::Certify => certify(cfg, &Setup::new(cfg, seed)?, &out()?),
        Command::Simulate => simulate(cfg, &Setup::new(cfg, seed)?, &out()?),
        Command::Verify => verify(cfg, &Setup::new(cfg, seed)?, &out()?),
        Command::Sweep => sweep(cfg, seed, &out()?),
    }
}

pub fn list() -> Outcome {
    let mut messages = vec![format!("{:<18} {:>4} {:>6} {:>6} {:<7} description", "name", "dim", "ρ", "β", "smooth")];
    for entry in registry() {
        match entry.descriptor.build() {
            Ok(p) => messages.push(format!(
                "{:<18} {:>4} {:>6.3} {:>6.3} {:<7} {}",
                entry.name,
                p.dim,
                p.rho,
                p.beta,
                if p.is_smooth() { "yes" } else { "no" },
                entry.description
            )),
            Err(e) => messages.push(format!("{:<18} unavailable: {e}", entry.name)),
        }
    }
    Outcome { pass: true, messages, ..Default::default() }
}

fn describe(cert: &RateCertificate) -> String {
    let c = &cert.constants;
    let mut s = format!("{} certified: decay exponent {}", cert.theorem, cert.decay_exponent());
    if let Some(v) = c.c {
        s.push_str(&format!(", C = {v}"));
    }
    if let Some(v) = c.theta {
        s.push_str(&format!(", θ = {v:.6}"));
    }
    if let Some(v) = c.gamma_lower {
        s.push_str(&format!(", γ̲ = {v:.6}"));
    }
    if let Some(v) = cert.inputs.eta {
        s.push_str(&format!(", η = {v}"));
    }
    s
}

fn rejected(out: &OutDir, r: &expflow::Rejection, artifacts: Vec<PathBuf>) -> Result<Outcome, CliError> {
    let mut artifacts = artifacts;
    for stale in [artifacts::CERTIFICATE_JSON, artifacts::REPORT_JSON] {
        out.remove(stale)?;
    }
    artifacts.push(out.write_json(artifacts::REJECTION_JSON, r)?);
    Ok(Outcome { pass: false, failures: vec![r.to_string()], artifacts, ..Default::default() })
}

fn certify(cfg: &ExperimentConfig, setup: &Setup, out: &OutDir) -> Result<Outcome, CliError> {
    match setup.certify_for_run(cfg.integrator.t_end) {
        Ok((cert, _)) => {
            let mut messages = vec![format!("{} on {}", describe(&cert), setup.problem.name)];
            for c in &cert.inequalities {
                messages.push(format!("  {}  (margin {:.3e})", c.name, c.margin()));
            }
            out.remove(artifacts::REJECTION_JSON)?;
            let path = out.write_json(artifacts::CERTIFICATE_JSON, &cert)?;
            Ok(Outcome { pass: true, messages, artifacts: vec![path], ..Default::default() })
        }
        Err(expflow::Error::Rejected(r)) => rejected(out, &r, Vec::new()),
        Err(e) => Err(CliError::from_params(e)),
    }
}

fn run(cfg: &ExperimentConfig, setup: &Setup, t_end: f64) -> Result<(Trajectory, MetricSeries), CliError> {
    let flow = setup.flow().map_err(CliError::from_params)?;
    let init = setup.initial_state(cfg)?;
    let control = cfg.integrator.control()?;
    let samples = cfg.integrator.samples.unwrap_or(DEFAULT_SAMPLES);
    let traj = integrate_with_samples(&flow, &init, t_end, control, samples).map_err(CliError::from_params)?;
    let metrics = record_metrics(&traj, &setup.problem)?;
    Ok((traj, metrics))
}

fn simulate(cfg: &ExperimentConfig, setup: &Setup, out: &OutDir) -> Result<Outcome, CliError> {
    let t_end = match (cfg.integrator.t_end, setup.certify_for_run(None)) {
        (Some(t), _) => t,
        (None, Ok((_, t))) => t,
        (None, Err(e)) => {
            return Err(CliError::Config(format!(
                "integrator.t_end is required when the parameters are not certified ({e})"
            )))
        }
    };
    let (traj, metrics) = run(cfg, setup, t_end)?;
    let path = out.write_trajectory(&traj, &metrics)?;
    let last = metrics.h.last().copied().unwrap_or(f64::NAN);
    let messages = vec![format!(
        "{} on {}: {} samples to t = {t_end:.4}, ‖x − x*‖² = {last:.3e} at the end ({} steps, {} rejected)",
        setup.kind(),
        setup.problem.name,
        traj.samples.len(),
        traj.info.stats.accepted,
        traj.info.stats.rejected
    )];
    Ok(Outcome { pass: true, messages, artifacts: vec![path], ..Default::default() })
}

#[derive(Debug, Clone, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProblemSummary {
    pub name: String,
    pub dim: usize,
    pub rho: f64,
    pub beta: f64,
    pub x_star: Vec<f64>,
}

/// Everything `verify` measured, written as `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: ToolInfo,
    pub problem: ProblemSummary,
    pub system: FlowKind,
    pub seed: u64,
    pub certificate: RateCertificate,
    pub integration: TrajectoryInfo,
    pub initial: InitialMetrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lemma_m: Option<LemmaM>,
    pub envelope: Envelope,
    pub rate: RateReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<LyapunovReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit: Option<InstanceAudit>,
    pub failures: Vec<String>,
    pub pass: bool,
}

pub struct Verification {
    pub report: Report,
    pub trajectory: Trajectory,
    pub metrics: MetricSeries,
}

fn metric_for(kind: FlowKind) -> EnvelopeMetric {
    match kind {
        FlowKind::Fb1 | FlowKind::Fb2 => EnvelopeMetric::DistanceSquared,
        FlowKind::Grad1 | FlowKind::Grad2 => EnvelopeMetric::ValueGap,
    }
}

/// Integrate under a certificate and run every applicable check.
pub fn run_verification(
    cfg: &ExperimentConfig,
    setup: &Setup,
    cert: RateCertificate,
    t_end: f64,
) -> Result<Verification, CliError> {
    let p = &setup.problem;
    let (traj, metrics) = run(cfg, setup, t_end)?;
    let coeffs = setup.lemma_coefficients(t_end)?;
    let (initial, lemma_m) = initial_metrics(&cert, coeffs.as_ref(), &traj, &metrics)?;
    let envelope = build_envelope(&cert, &initial)?;
    let metric = metric_for(setup.kind());
    let rate = verify_envelope(&metrics, metric, &envelope, cfg.verify.tol_abs, cfg.verify.tol_rel)?;

    let chain = match &setup.plan {
        Plan::Grad1 { alpha, .. } => Some(verify_rate_chain(&metrics, p.rho, p.beta, *alpha)?),
        _ if p.is_smooth() => Some(verify_value_chain(&metrics, p.rho, p.beta)?),
        _ => None,
    };
    let lyapunov = coeffs.as_ref().map(|c| verify_lyapunov(&traj, c, &metrics)).transpose()?;
    let audit = match cfg.verify.audit_pairs {
        0 => None,
        n => Some(audit_instance(p, n, setup.seed).map_err(CliError::from_params)?),
    };

    let mut failures = Vec::new();
    if rate.violations > 0 {
        failures.push(format!(
            "envelope exceeded at {} of {} samples (worst relative excess {:.3e})",
            rate.violations, rate.samples, rate.max_relative_violation
        ));
    }
    if !rate.rate_pass {
        failures.push(format!(
            "fitted rate {:.4} is below the certified {} by more than the allowed shortfall",
            rate.fitted_rate.unwrap_or(f64::NAN),
            rate.theoretical_rate
        ));
    }
    for c in chain.iter().flat_map(|c| &c.checks).filter(|c| c.violations > 0) {
        failures.push(format!("'{}' violated at {} samples", c.name, c.violations));
    }
    if let Some(l) = lyapunov.as_ref().filter(|l| !l.pass) {
        failures.push(format!(
            "Lyapunov function increased at {} sample intervals (max rate {:.3e} > {:.3e})",
            l.violations, l.max_increase_rate, l.drift_limit
        ));
    }
    if let Some(a) = audit.as_ref().filter(|a| !a.pass) {
        failures.push(format!("operator audit failed: {}", a.failures.join("; ")));
    }

    let report = Report {
        tool: ToolInfo { name: TOOL_NAME, version: TOOL_VERSION },
        problem: ProblemSummary {
            name: p.name.clone(),
            dim: p.dim,
            rho: p.rho,
            beta: p.beta,
            x_star: metrics.x_star.iter().copied().collect(),
        },
        system: setup.kind(),
        seed: setup.seed,
        certificate: cert,
        integration: traj.info.clone(),
        initial,
        lemma_m,
        envelope,
        rate,
        chain,
        lyapunov,
        audit,
        pass: failures.is_empty(),
        failures,
    };
    Ok(Verification { report, trajectory: traj, metrics })
}

fn verify(cfg: &ExperimentConfig, setup: &Setup, out: &OutDir) -> Result<Outcome, CliError> {
    let (cert, t_end) = match setup.certify_for_run(cfg.integrator.t_end) {
        Ok(ok) => ok,
        Err(expflow::Error::Rejected(r)) => return rejected(out, &r, Vec::new()),
        Err(e) => return Err(CliError::from_params(e)),
    };
    out.remove(artifacts::REJECTION_JSON)?;
    let mut artifacts = vec![out.write_json(artifacts::CERTIFICATE_JSON, &cert)?];
    let v = run_verification(cfg, setup, cert, t_end)?;
    let r = &v.report;
    artifacts.push(out.write_trajectory(&v.trajectory, &v.metrics)?);
    artifacts.push(out.write_envelope(&v.metrics, &r.envelope)?);
    let title = format!("{} on {}", setup.kind(), setup.problem.name);
    artifacts.push(out.write_plot_script(r.envelope.metric, &title)?);
    artifacts.push(out.write_json(artifacts::REPORT_JSON, r)?);

    let mut messages = vec![format!("{} on {}", describe(&r.certificate), setup.problem.name)];
    messages.push(format!(
        "envelope: {} samples to t = {t_end:.4}, {} violations, max metric/envelope = {:.4}",
        r.rate.samples, r.rate.violations, r.rate.max_ratio
    ));
    match r.rate.fitted_rate {
        Some(f) => messages.push(format!("fitted rate {f:.4} (certified {})", r.rate.theoretical_rate)),
        None => messages.push("fitted rate: metric fell below resolution before enough samples".into()),
    }
    if let Some(c) = &r.chain {
        messages.push(format!("chain: {} of {} links hold", c.checks.iter().filter(|c| c.violations == 0).count(), c.checks.len()));
    }
    if let Some(l) = &r.lyapunov {
        messages.push(format!(
            "Lyapunov: max dL/dt = {:.3e} over [0, {:.3}], hypotheses {}",
            l.max_increase_rate,
            l.horizon,
            if l.hypotheses_hold { "hold" } else { "fail" }
        ));
    }
    if let Some(a) = &r.audit {
        messages.push(format!(
            "audit: {}, cocoercivity fails on {:.1}% of pairs",
            if a.pass { "claims hold" } else { "claims fail" },
            100.0 * a.cocoercivity_violation_fraction()
        ));
    }
    messages.push(if r.pass { "PASS".into() } else { "FAIL".into() });
    Ok(Outcome { pass: r.pass, messages, failures: r.failures.clone(), artifacts })
}

fn set_axis(params: &mut Params, axis: &str, v: f64) {
    match axis {
        "alpha" => params.alpha = Some(ParamValue::Number(v)),
        "alpha_lower" => params.alpha_lower = Some(v),
        "delta" => params.delta = Some(v),
        "eta" => params.eta = Some(v),
        "gamma" => params.gamma = Some(ParamValue::Number(v)),
        "lambda" => params.lambda = Some(ParamValue::Number(v)),
        _ => unreachable!("axes are validated"),
    }
}

#[derive(Debug, Clone)]
struct Cell {
    values: Vec<f64>,
    status: &'static str,
    decay_exponent: Option<f64>,
    note: String,
    fitted_rate: Option<f64>,
    verified: Option<bool>,
}

fn eval_cell(cfg: &ExperimentConfig, base: &Setup, axes: &[String], values: Vec<f64>, simulate: bool) -> Cell {
    let mut cell = Cell { values, status: "invalid", decay_exponent: None, note: String::new(), fitted_rate: None, verified: None };
    let mut params = cfg.params.clone();
    for (a, v) in axes.iter().zip(&cell.values) {
        set_axis(&mut params, a, *v);
    }
    let setup = match plan(&params, cfg.system, &base.problem) {
        Ok(plan) => Setup { plan, ..base.clone() },
        Err(e) => {
            cell.note = e.to_string();
            return cell;
        }
    };
    let (cert, t_end) = match setup.certify_for_run(cfg.integrator.t_end) {
        Ok(ok) => ok,
        Err(expflow::Error::Rejected(r)) => {
            cell.status = "rejected";
            cell.note = r.names().join("; ");
            return cell;
        }
        Err(e) => {
            cell.note = e.to_string();
            return cell;
        }
    };
    cell.status = "certified";
    cell.decay_exponent = Some(cert.decay_exponent());
    if simulate {
        match run_verification(cfg, &setup, cert, t_end) {
            Ok(v) => {
                cell.fitted_rate = v.report.rate.fitted_rate;
                cell.verified = Some(v.report.pass);
                cell.note = v.report.failures.join("; ");
            }
            Err(e) => {
                cell.verified = Some(false);
                cell.note = e.to_string();
            }
        }
    }
    cell
}

fn sweep(cfg: &ExperimentConfig, seed: u64, out: &OutDir) -> Result<Outcome, CliError> {
    let spec = cfg.sweep.as_ref().ok_or_else(|| CliError::Config("sweep needs a \"sweep\" block".into()))?;
    if spec.axes.is_empty() {
        return Err(CliError::Config("sweep.axes is empty".into()));
    }
    let mut axes = Vec::new();
    let mut grids = Vec::new();
    for (name, axis) in &spec.axes {
        if !SWEEP_AXES.contains(&name.as_str()) {
            return Err(CliError::Config(format!("cannot sweep '{name}'; sweepable: {}", SWEEP_AXES.join(", "))));
        }
        axes.push(name.clone());
        grids.push(axis.values(name)?);
    }
    let total = grids.iter().try_fold(1usize, |acc, g| acc.checked_mul(g.len())).unwrap_or(usize::MAX);
    if total > MAX_SWEEP_CELLS {
        return Err(CliError::Config(format!("sweep has {total} cells, more than {MAX_SWEEP_CELLS}")));
    }

    let problem = resolve_problem(&cfg.problem)?;
    check_compatible(cfg.system, &problem)?;
    // The plan is replaced per cell; this one only carries the problem and seed.
    let base = Setup { problem, plan: Plan::Grad1 { alpha: 1.0, schedule: expflow::Schedule::constant(1.0, None) }, seed };

    let cells: Vec<Vec<f64>> = (0..total)
        .map(|mut k| {
            let mut v = vec![0.0; grids.len()];
            for i in (0..grids.len()).rev() {
                v[i] = grids[i][k % grids[i].len()];
                k /= grids[i].len();
            }
            v
        })
        .collect();
    let results: Vec<Cell> =
        cells.into_par_iter().map(|values| eval_cell(cfg, &base, &axes, values, spec.simulate)).collect();

    let mut csv = axes.join(",");
    csv.push_str(",status,decay_exponent,");
    if spec.simulate {
        csv.push_str("fitted_rate,verified,");
    }
    csv.push_str("note\n");
    for c in &results {
        let mut row: Vec<String> = c.values.iter().map(|v| v.to_string()).collect();
        row.push(c.status.into());
        row.push(c.decay_exponent.map_or(String::new(), |r| format!("{r:.16e}")));
        if spec.simulate {
            row.push(c.fitted_rate.map_or(String::new(), |r| format!("{r:.16e}")));
            row.push(c.verified.map_or(String::new(), |b| b.to_string()));
        }
        row.push(csv_field(&c.note));
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    let path = out.write_text(artifacts::SWEEP_CSV, &csv)?;

    let certified: Vec<&Cell> = results.iter().filter(|c| c.status == "certified").collect();
    let mut messages = vec![format!("{} of {} cells certified", certified.len(), results.len())];
    if let Some(best) = certified.iter().max_by(|a, b| a.decay_exponent.partial_cmp(&b.decay_exponent).expect("finite rates")) {
        let at: Vec<String> = axes.iter().zip(&best.values).map(|(a, v)| format!("{a} = {v}")).collect();
        messages.push(format!("largest decay exponent {} at {}", best.decay_exponent.unwrap_or(f64::NAN), at.join(", ")));
    }
    let failures: Vec<String> = certified
        .iter()
        .filter(|c| c.verified == Some(false))
        .map(|c| format!("cell {:?} certified but failed verification: {}", c.values, c.note))
        .collect();
    Ok(Outcome { pass: failures.is_empty(), messages, failures, artifacts: vec![path] })
}
