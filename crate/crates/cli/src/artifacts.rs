//! Files written next to a run: CSV tables, JSON reports, a gnuplot script.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use expflow::integrate::write_csv;
use expflow::{Envelope, EnvelopeMetric, MetricSeries, Trajectory};
use serde::Serialize;

use crate::CliError;

pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const ENVELOPE_CSV: &str = "envelope.csv";
pub const CERTIFICATE_JSON: &str = "certificate.json";
pub const REJECTION_JSON: &str = "rejection.json";
pub const REPORT_JSON: &str = "report.json";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const PLOT_SCRIPT: &str = "plot.gp";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_owned(), source }
}

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        Ok(Self { root })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn writer(&self, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
        let path = self.path(name);
        let file = File::create(&path).map_err(io_err(&path))?;
        Ok((path, BufWriter::new(file)))
    }

    /// Delete `name` if present, so a rerun leaves no stale result behind.
    pub fn remove(&self, name: &str) -> Result<(), CliError> {
        let path = self.path(name);
        match fs::remove_file(&path) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(CliError::Io { path, source: e }),
            _ => Ok(()),
        }
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        fs::write(&path, text).map_err(io_err(&path))?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(expflow::Error::from)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    pub fn write_trajectory(&self, traj: &Trajectory, metrics: &MetricSeries) -> Result<PathBuf, CliError> {
        let (path, mut w) = self.writer(TRAJECTORY_CSV)?;
        write_csv(traj, metrics, &mut w)?;
        w.flush().map_err(io_err(&path))?;
        Ok(path)
    }

    /// `t,metric,envelope` for the quantity the envelope bounds.
    pub fn write_envelope(&self, metrics: &MetricSeries, env: &Envelope) -> Result<PathBuf, CliError> {
        let ys = metric_column(metrics, env.metric)?;
        let (path, mut w) = self.writer(ENVELOPE_CSV)?;
        let mut body = format!("t,{},envelope\n", metric_name(env.metric));
        for (t, y) in metrics.t.iter().zip(ys) {
            body.push_str(&format!("{t:.16e},{y:.16e},{:.16e}\n", env.value(*t)));
        }
        w.write_all(body.as_bytes()).map_err(io_err(&path))?;
        w.flush().map_err(io_err(&path))?;
        Ok(path)
    }

    pub fn write_plot_script(&self, metric: EnvelopeMetric, title: &str) -> Result<PathBuf, CliError> {
        self.write_text(PLOT_SCRIPT, &plot_script(metric, title))
    }
}

pub fn metric_name(metric: EnvelopeMetric) -> &'static str {
    match metric {
        EnvelopeMetric::DistanceSquared => "h",
        EnvelopeMetric::ValueGap => "gap",
    }
}

pub fn metric_column(metrics: &MetricSeries, metric: EnvelopeMetric) -> Result<&[f64], CliError> {
    match metric {
        EnvelopeMetric::DistanceSquared => Ok(&metrics.h),
        EnvelopeMetric::ValueGap => metrics
            .gap
            .as_deref()
            .ok_or_else(|| CliError::Core(expflow::Error::Missing("value gap in the metric series".into()))),
    }
}

/// Gnuplot script drawing the metric and its envelope on a log scale.
pub fn plot_script(metric: EnvelopeMetric, title: &str) -> String {
    let label = match metric {
        EnvelopeMetric::DistanceSquared => "‖x(t) − x*‖²",
        EnvelopeMetric::ValueGap => "g(x(t)) − g(x*)",
    };
    format!(
        "# gnuplot {PLOT_SCRIPT}\n\
         set datafile separator ','\n\
         set terminal pngcairo size 900,600\n\
         set output 'decay.png'\n\
         set title '{title}'\n\
         set logscale y\n\
         set format y '10^{{%L}}'\n\
         set xlabel 't'\n\
         set ylabel '{label}'\n\
         set key top right\n\
         plot '{ENVELOPE_CSV}' using 1:2 skip 1 with lines lw 2 title 'trajectory', \\\n\
         \x20    '' using 1:3 skip 1 with lines lw 2 dt 2 title 'certified envelope'\n"
    )
}

/// Quote a CSV field when it contains a separator, quote or newline.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("α < 2ρβ²λ̲"), "α < 2ρβ²λ̲");
        assert_eq!(csv_field("a, b"), "\"a, b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }

    #[test]
    fn plot_script_reads_envelope_csv() {
        let s = plot_script(EnvelopeMetric::ValueGap, "grad1 on scalar-quadratic");
        assert!(s.contains("'envelope.csv' using 1:2"));
        assert!(s.contains("using 1:3"));
        assert!(s.contains("set logscale y"));
    }
}
