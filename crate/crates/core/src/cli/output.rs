//! Time-series tables and run summaries.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;

pub const TIMESERIES_COLUMNS: [&str; 21] = [
    "t",
    "x1",
    "x2",
    "x3",
    "p1",
    "p2",
    "p3",
    "omega1",
    "omega2",
    "omega3",
    "pi1",
    "pi2",
    "pi3",
    "phi",
    "S1",
    "S2",
    "S3",
    "H",
    "res_omega_sq",
    "res_pi_sq",
    "res_omega_pi",
];

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

/// One row of [`TIMESERIES_COLUMNS`] per sample.
pub fn timeseries_rows(traj: &Trajectory) -> Vec<[f64; 21]> {
    traj.times
        .iter()
        .zip(&traj.states)
        .zip(&traj.diagnostics)
        .map(|((&t, z), d)| {
            let mut row = [0.0; 21];
            row[0] = t;
            row[1..4].copy_from_slice(z.x.as_slice());
            row[4..7].copy_from_slice(z.p.as_slice());
            row[7..10].copy_from_slice(z.omega.as_slice());
            row[10..13].copy_from_slice(z.pi.as_slice());
            row[13] = z.phi;
            row[14..17].copy_from_slice(d.spin.as_slice());
            row[17] = d.hamiltonian;
            row[18..21].copy_from_slice(&d.residuals);
            row
        })
        .collect()
}

/// Shortest text that parses back to the same `f64`; exponent form outside
/// `[1e-5, 1e16)`.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || !a.is_finite() || (1e-5..1e16).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// Comma-separated, header row first, shortest round-trip float text.
pub fn write_timeseries(traj: &Trajectory, path: &Path) -> Result<(), OutputError> {
    let csv_err = |source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| OutputError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(TIMESERIES_COLUMNS).map_err(csv_err)?;
    for row in timeseries_rows(traj) {
        w.write_record(row.iter().map(|&v| format_float(v)))
            .map_err(csv_err)?;
    }
    w.flush().map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a table written by [`write_timeseries`].
pub fn read_timeseries(path: &Path) -> Result<Vec<[f64; 21]>, OutputError> {
    let csv_err = |source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?;
    if header.iter().ne(TIMESERIES_COLUMNS) {
        return Err(OutputError::Format {
            path: path.to_path_buf(),
            message: "unexpected header".into(),
        });
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let mut row = [0.0; 21];
        for (slot, field) in row.iter_mut().zip(rec.iter()) {
            *slot = field.parse().map_err(|e| OutputError::Format {
                path: path.to_path_buf(),
                message: format!("bad number `{field}`: {e}"),
            })?;
        }
        out.push(row);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// Passes when `value < threshold`.
    Below,
    /// Passes when `value > threshold`.
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub bound: Bound,
    pub passed: bool,
}

impl Check {
    pub fn below(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            bound: Bound::Below,
            passed: value < threshold,
        }
    }

    pub fn above(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            bound: Bound::Above,
            passed: value > threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, f64>,
    pub artifacts: BTreeMap<String, String>,
}

impl Summary {
    pub fn new(scenario: &str, seed: u64) -> Self {
        Self {
            scenario: scenario.into(),
            seed,
            passed: true,
            checks: Vec::new(),
            metrics: BTreeMap::new(),
            artifacts: BTreeMap::new(),
        }
    }

    pub fn check(&mut self, c: Check) {
        self.passed &= c.passed;
        self.checks.push(c);
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), OutputError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|source| OutputError::Io {
                path: dir.to_path_buf(),
                source,
            })?;
        }
        fs::write(path, self.to_json()).map_err(|source| OutputError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, FieldConfig, GaugeFunction, IntegrateOptions, ModelParams};
    use crate::phasespace::PhasePoint;
    use nalgebra::Vector3;

    fn short_trajectory(samples: usize) -> Trajectory {
        let params = ModelParams::default();
        let z = PhasePoint::new(
            Vector3::zeros(),
            Vector3::new(0.1, 0.2, 0.0),
            Vector3::new(params.a, 0.0, 0.0),
            Vector3::new(0.0, params.b, 0.0),
            1.0,
            0.0,
        );
        let mut traj = integrate(
            &z,
            (0.0, 1.0),
            &params,
            &FieldConfig::uniform(Vector3::new(0.0, 0.0, 1.0)),
            &GaugeFunction::constant(1.0),
            &IntegrateOptions::default(),
        )
        .unwrap();
        traj.times.truncate(samples);
        traj.states.truncate(samples);
        traj.derivatives.truncate(samples);
        traj.diagnostics.truncate(samples);
        traj
    }

    #[test]
    fn three_samples_four_lines_and_exact_round_trip() {
        let traj = short_trajectory(3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ts.csv");
        write_timeseries(&traj, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().all(|l| l.split(',').count() == 21));
        let back = read_timeseries(&path).unwrap();
        assert_eq!(back, timeseries_rows(&traj));
    }

    #[test]
    fn float_text_round_trips() {
        for v in [
            0.0,
            -0.0,
            1.0,
            0.1,
            1e-16,
            -2.5e-300,
            1e16,
            123456.789,
            f64::MAX,
            f64::MIN_POSITIVE,
        ] {
            let text = format_float(v);
            assert_eq!(
                text.parse::<f64>().unwrap().to_bits(),
                v.to_bits(),
                "{text}"
            );
            assert!(text.len() <= 24, "{text}");
        }
        assert_eq!(
            format_float(1.1102230246251565e-16),
            "1.1102230246251565e-16"
        );
        assert_eq!(format_float(0.25), "0.25");
    }

    #[test]
    fn io_error_names_path() {
        let traj = short_trajectory(2);
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = write_timeseries(&traj, &blocker.join("ts.csv")).unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
    }

    #[test]
    fn summary_checks() {
        let mut s = Summary::new("larmor", 1);
        s.check(Check::below("a", 1e-9, 1e-6));
        assert!(s.passed);
        s.check(Check::above("b", 0.01, 0.1));
        assert!(!s.passed);
        s.metric("z", 1.0);
        s.metric("a", 2.0);
        let json = s.to_json();
        assert!(json.find("\"a\": 2.0").unwrap() < json.find("\"z\": 1.0").unwrap());
    }
}
