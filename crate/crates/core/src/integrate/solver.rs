//! Explicit Runge-Kutta solvers on `ẏ = f(t, y)` with dense output.
//!
//! Adaptive stepping uses the Dormand-Prince 5(4) pair with PI step size
//! control and its fifth-order continuous extension; fixed stepping uses
//! classical RK4 with cubic Hermite interpolation between steps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::Vector;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const C2: f64 = 0.2;
const C3: f64 = 0.3;
const C4: f64 = 0.8;
const C5: f64 = 8.0 / 9.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

// PI controller (Hairer & Wanner's defaults).
const PI_BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - PI_BETA * 0.75;
const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Steps shorter than this fraction of the horizon abort the run.
pub const MIN_STEP_FRACTION: f64 = 1e-14;

/// Hard cap on accepted plus rejected steps.
pub const MAX_STEPS: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum StepControl {
    Fixed { h: f64 },
    Adaptive { rel_tol: f64, abs_tol: f64 },
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl::Adaptive { rel_tol: 1e-9, abs_tol: 1e-12 }
    }
}

impl StepControl {
    pub fn solver_name(&self) -> &'static str {
        match self {
            StepControl::Fixed { .. } => "rk4",
            StepControl::Adaptive { .. } => "dopri5",
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepControl::Fixed { h } => h.is_finite() && h > 0.0,
            StepControl::Adaptive { rel_tol, abs_tol } => {
                rel_tol.is_finite() && abs_tol.is_finite() && rel_tol > 0.0 && abs_tol > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("step control must have positive finite values: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub min_step: f64,
    pub max_step: f64,
}

impl StepStats {
    fn record(&mut self, h: f64) {
        self.accepted += 1;
        if self.accepted == 1 {
            self.min_step = h;
            self.max_step = h;
        } else {
            self.min_step = self.min_step.min(h);
            self.max_step = self.max_step.max(h);
        }
    }
}

/// Solution of an initial value problem sampled at strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub t: Vec<f64>,
    pub y: Vec<Vector>,
    pub stats: StepStats,
}

/// Emits dense samples on an even grid plus every accepted step end.
struct Recorder {
    grid: Vec<f64>,
    next: usize,
    t: Vec<f64>,
    y: Vec<Vector>,
    tie: f64,
}

impl Recorder {
    fn new(t_end: f64, min_samples: usize, y0: &Vector) -> Self {
        let n = min_samples.max(2);
        let grid = (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect();
        Self { grid, next: 1, t: vec![0.0], y: vec![y0.clone()], tie: 1e-13 * t_end }
    }

    /// Record the step `(t0, t1]` with interpolant `interp(θ)`, `θ ∈ [0, 1]`.
    fn step(&mut self, t0: f64, t1: f64, y1: &Vector, interp: impl Fn(f64) -> Vector) {
        let h = t1 - t0;
        while self.next < self.grid.len() && self.grid[self.next] < t1 - self.tie {
            let tg = self.grid[self.next];
            if tg > t0 + self.tie {
                self.t.push(tg);
                self.y.push(interp((tg - t0) / h));
            }
            self.next += 1;
        }
        if self.next < self.grid.len() && self.grid[self.next] <= t1 + self.tie {
            self.next += 1;
        }
        self.t.push(t1);
        self.y.push(y1.clone());
    }
}

fn check_finite(t: f64, y: &Vector) -> Result<()> {
    if y.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Integration { t, reason: "state became non-finite".into() })
    }
}

/// Integrate `ẏ = f(t, y)` on `[0, t_end]`.
///
/// The output contains at least `min_samples` evenly spaced times plus
/// every accepted step end; the first sample is exactly `(0, y0)`.
pub fn solve_ivp(
    f: &dyn Fn(f64, &Vector) -> Vector,
    y0: &Vector,
    t_end: f64,
    control: StepControl,
    min_samples: usize,
) -> Result<OdeSolution> {
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::InvalidParameter(format!("t_end must be positive, got {t_end}")));
    }
    control.validate()?;
    check_finite(0.0, y0)?;
    match control {
        StepControl::Fixed { h } => rk4(f, y0, t_end, h, min_samples),
        StepControl::Adaptive { rel_tol, abs_tol } => dopri5(f, y0, t_end, rel_tol, abs_tol, min_samples),
    }
}

fn rk4(
    f: &dyn Fn(f64, &Vector) -> Vector,
    y0: &Vector,
    t_end: f64,
    h: f64,
    min_samples: usize,
) -> Result<OdeSolution> {
    let n = ((t_end / h) - 1e-9).ceil().max(1.0) as usize;
    if n > MAX_STEPS {
        return Err(Error::InvalidParameter(format!("fixed step {h} needs {n} steps, more than {MAX_STEPS}")));
    }
    let mut rec = Recorder::new(t_end, min_samples, y0);
    let mut stats = StepStats::default();
    let mut y = y0.clone();
    let mut k1 = f(0.0, &y);
    stats.rhs_evals += 1;
    for i in 0..n {
        let t0 = t_end * i as f64 / n as f64;
        let t1 = if i + 1 == n { t_end } else { t_end * (i + 1) as f64 / n as f64 };
        let h = t1 - t0;
        let k2 = f(t0 + h / 2.0, &(&y + &k1 * (h / 2.0)));
        let k3 = f(t0 + h / 2.0, &(&y + &k2 * (h / 2.0)));
        let k4 = f(t1, &(&y + &k3 * h));
        let y1 = &y + (&k1 + &k2 * 2.0 + &k3 * 2.0 + &k4) * (h / 6.0);
        check_finite(t1, &y1)?;
        let f1 = f(t1, &y1);
        stats.rhs_evals += 4;
        stats.record(h);
        // Cubic Hermite on (y, f) at both ends.
        let (ya, fa, fb) = (&y, &k1, &f1);
        rec.step(t0, t1, &y1, |s| {
            let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
            let h10 = s * (1.0 - s) * (1.0 - s);
            let h01 = s * s * (3.0 - 2.0 * s);
            let h11 = s * s * (s - 1.0);
            ya * h00 + fa * (h10 * h) + &y1 * h01 + fb * (h11 * h)
        });
        y = y1;
        k1 = f1;
    }
    Ok(OdeSolution { t: rec.t, y: rec.y, stats })
}

fn error_norm(err: &Vector, y0: &Vector, y1: &Vector, rel_tol: f64, abs_tol: f64) -> f64 {
    let n = err.len().max(1) as f64;
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1.iter()))
        .map(|(e, (a, b))| {
            let sk = abs_tol + rel_tol * a.abs().max(b.abs());
            (e / sk).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

/// Initial step guess from Hairer, Nørsett & Wanner.
fn initial_step(
    f: &dyn Fn(f64, &Vector) -> Vector,
    y0: &Vector,
    f0: &Vector,
    t_end: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> f64 {
    let scale = y0.map(|v| abs_tol + rel_tol * v.abs());
    let rms = |v: &Vector| (v.component_div(&scale).norm_squared() / v.len().max(1) as f64).sqrt();
    let d0 = rms(y0);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(t_end);
    let y1 = y0 + f0 * h0;
    let f1 = f(h0, &y1);
    let d2 = rms(&(f1 - f0)) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1).min(t_end)
}

fn dopri5(
    f: &dyn Fn(f64, &Vector) -> Vector,
    y0: &Vector,
    t_end: f64,
    rel_tol: f64,
    abs_tol: f64,
    min_samples: usize,
) -> Result<OdeSolution> {
    let mut rec = Recorder::new(t_end, min_samples, y0);
    let mut stats = StepStats::default();
    let h_min = MIN_STEP_FRACTION * t_end;
    let mut t = 0.0;
    let mut y = y0.clone();
    let mut k1 = f(t, &y);
    stats.rhs_evals += 1;
    let mut h = initial_step(f, &y, &k1, t_end, rel_tol, abs_tol);
    stats.rhs_evals += 1;
    let mut fac_old: f64 = 1e-4;
    let mut last_rejected = false;

    while t < t_end {
        if stats.accepted + stats.rejected >= MAX_STEPS {
            return Err(Error::Integration { t, reason: format!("exceeded {MAX_STEPS} steps") });
        }
        if h < h_min {
            return Err(Error::Integration { t, reason: format!("step size {h:e} underflowed below {h_min:e}") });
        }
        let last = t + h >= t_end - 10.0 * h_min;
        if last {
            h = t_end - t;
        }

        let k2 = f(t + C2 * h, &(&y + &k1 * (h * A21)));
        let k3 = f(t + C3 * h, &(&y + (&k1 * A31 + &k2 * A32) * h));
        let k4 = f(t + C4 * h, &(&y + (&k1 * A41 + &k2 * A42 + &k3 * A43) * h));
        let k5 = f(t + C5 * h, &(&y + (&k1 * A51 + &k2 * A52 + &k3 * A53 + &k4 * A54) * h));
        let k6 = f(t + h, &(&y + (&k1 * A61 + &k2 * A62 + &k3 * A63 + &k4 * A64 + &k5 * A65) * h));
        let y1 = &y + (&k1 * B1 + &k3 * B3 + &k4 * B4 + &k5 * B5 + &k6 * B6) * h;
        let t1 = if last { t_end } else { t + h };
        let k7 = f(t1, &y1);
        stats.rhs_evals += 6;

        let err_vec = (&k1 * E1 + &k3 * E3 + &k4 * E4 + &k5 * E5 + &k6 * E6 + &k7 * E7) * h;
        let err = error_norm(&err_vec, &y, &y1, rel_tol, abs_tol);
        if !err.is_finite() || !y1.iter().all(|v| v.is_finite()) {
            // Treat as a hard rejection and shrink.
            stats.rejected += 1;
            h *= FAC_MIN;
            last_rejected = true;
            continue;
        }

        let fac11 = err.powf(EXPO);
        if err <= 1.0 {
            let fac = (fac11 / fac_old.powf(PI_BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            fac_old = err.max(1e-4);
            stats.record(h);

            let ydiff = &y1 - &y;
            let bspl = &k1 * h - &ydiff;
            let c3 = &ydiff - &k7 * h - &bspl;
            let c4 = (&k1 * D1 + &k3 * D3 + &k4 * D4 + &k5 * D5 + &k6 * D6 + &k7 * D7) * h;
            let y_start = y.clone();
            rec.step(t, t1, &y1, |s| {
                let s1 = 1.0 - s;
                &y_start + (&ydiff + (&bspl + (&c3 + &c4 * s1) * s) * s1) * s
            });

            t = t1;
            y = y1;
            k1 = k7;
            let mut h_new = h / fac;
            if last_rejected {
                h_new = h_new.min(h);
            }
            last_rejected = false;
            h = h_new;
        } else {
            stats.rejected += 1;
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            last_rejected = true;
        }
    }
    Ok(OdeSolution { t: rec.t, y: rec.y, stats })
}
