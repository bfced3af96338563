use std::io::Write;

use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::error::{Error, Result};
use crate::operators::Vector;
use crate::problems::ProblemInstance;

/// Quantities bounded by the rate theorems, one entry per sample.
///
/// `h` is the un-halved `‖x − x*‖²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub t: Vec<f64>,
    pub h: Vec<f64>,
    pub u: Vec<f64>,
    pub gap: Option<Vec<f64>>,
    pub gradnorm: Option<Vec<f64>>,
    pub x_star: Vector,
}

impl MetricSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

pub fn record_metrics(traj: &Trajectory, problem: &ProblemInstance) -> Result<MetricSeries> {
    let x_star = problem.x_star()?.clone();
    if x_star.len() != traj.dim {
        return Err(Error::DimensionMismatch { expected: traj.dim, actual: x_star.len() });
    }
    let f_star = problem.objective(&x_star);
    let smooth = problem.gradient(&x_star).is_some();
    let n = traj.samples.len();
    let mut series = MetricSeries {
        t: Vec::with_capacity(n),
        h: Vec::with_capacity(n),
        u: Vec::with_capacity(n),
        gap: f_star.map(|_| Vec::with_capacity(n)),
        gradnorm: smooth.then(|| Vec::with_capacity(n)),
        x_star,
    };
    for s in &traj.samples {
        series.t.push(s.t);
        series.h.push((&s.x - &series.x_star).norm_squared());
        series.u.push(s.v.norm_squared());
        if let (Some(gap), Some(fs)) = (series.gap.as_mut(), f_star) {
            gap.push(problem.objective(&s.x).expect("value oracle present") - fs);
        }
        if let Some(gn) = series.gradnorm.as_mut() {
            gn.push(problem.gradient(&s.x).expect("smooth instance").norm());
        }
    }
    Ok(series)
}

fn push_float(line: &mut String, v: f64) {
    line.push(',');
    line.push_str(&format!("{v:.16e}"));
}

/// CSV with header `t,x_0..x_{d-1}[,v_0..v_{d-1}],h,u,gap,gradnorm`.
///
/// Velocity columns appear only for second-order trajectories; unavailable
/// metrics are written as empty fields.
pub fn write_csv<W: Write>(traj: &Trajectory, metrics: &MetricSeries, mut out: W) -> Result<()> {
    if metrics.len() != traj.samples.len() {
        return Err(Error::DimensionMismatch { expected: traj.samples.len(), actual: metrics.len() });
    }
    let mut header = String::from("t");
    for i in 0..traj.dim {
        header.push_str(&format!(",x_{i}"));
    }
    if traj.order == 2 {
        for i in 0..traj.dim {
            header.push_str(&format!(",v_{i}"));
        }
    }
    header.push_str(",h,u,gap,gradnorm");
    writeln!(out, "{header}")?;

    for (i, s) in traj.samples.iter().enumerate() {
        let mut line = format!("{:.16e}", s.t);
        for v in s.x.iter() {
            push_float(&mut line, *v);
        }
        if traj.order == 2 {
            for v in s.v.iter() {
                push_float(&mut line, *v);
            }
        }
        push_float(&mut line, metrics.h[i]);
        push_float(&mut line, metrics.u[i]);
        for col in [&metrics.gap, &metrics.gradnorm] {
            match col {
                Some(c) => push_float(&mut line, c[i]),
                None => line.push(','),
            }
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{grad1_rhs, Schedule};
    use crate::integrate::{integrate, InitialState, Sample, StepControl, StepStats, TrajectoryInfo};
    use crate::problems::{by_name, make_quadratic};
    use nalgebra::{dvector, DMatrix};

    fn constant_traj(x: Vector, v: Vector, order: usize) -> Trajectory {
        Trajectory {
            order,
            dim: x.len(),
            samples: (0..3).map(|i| Sample { t: i as f64, x: x.clone(), v: v.clone() }).collect(),
            info: TrajectoryInfo {
                solver: "none".into(),
                control: StepControl::default(),
                t_end: 2.0,
                stats: StepStats::default(),
            },
        }
    }

    #[test]
    fn constant_at_solution() {
        let p = by_name("quadratic-2d").unwrap();
        let xs = p.x_star().unwrap().clone();
        let m = record_metrics(&constant_traj(xs, dvector![0.0, 0.0], 1), &p).unwrap();
        assert!(m.h.iter().all(|&h| h == 0.0));
        assert!(m.gap.unwrap().iter().all(|&g| g.abs() < 1e-15));
    }

    #[test]
    fn velocity_norm() {
        let p = by_name("skew-rotation").unwrap();
        let m = record_metrics(&constant_traj(dvector![0.0, 0.0], dvector![3.0, 4.0], 2), &p).unwrap();
        assert_eq!(m.u[0], 25.0);
        assert!(m.gap.is_none() && m.gradnorm.is_none());
    }

    #[test]
    fn scalar_decay_metric() {
        let p = make_quadratic(DMatrix::identity(1, 1), dvector![0.0]).unwrap();
        let flow = grad1_rhs(p.g.clone().unwrap(), Schedule::constant(1.0, None)).unwrap();
        let traj = integrate(&flow, &InitialState::first_order(dvector![1.0]), 3.0, StepControl::default()).unwrap();
        let m = record_metrics(&traj, &p).unwrap();
        for (t, h) in m.t.iter().zip(&m.h) {
            assert!((h - (-2.0 * t).exp()).abs() <= 1e-8);
        }
    }

    #[test]
    fn missing_ground_truth() {
        let mut p = by_name("skew-rotation").unwrap();
        p.x_star = None;
        let err = record_metrics(&constant_traj(dvector![0.0, 0.0], dvector![0.0, 0.0], 1), &p);
        assert!(matches!(err, Err(Error::Missing(_))));
    }

    #[test]
    fn csv_layout() {
        let p = by_name("skew-rotation").unwrap();
        let traj = constant_traj(dvector![1.0, 2.0], dvector![0.0, 0.0], 2);
        let m = record_metrics(&traj, &p).unwrap();
        let mut buf = Vec::new();
        write_csv(&traj, &m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,x_0,x_1,v_0,v_1,h,u,gap,gradnorm");
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 9);
        assert_eq!(row[1], "1.0000000000000000e0");
        assert_eq!((row[7], row[8]), ("", ""));
    }
}
