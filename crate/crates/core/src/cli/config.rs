//! Scenario files: TOML, or JSON when the extension is `.json`.

use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::dynamics::{FieldConfig, GaugeFunction, IntegrateOptions, ModelParams, PotentialSign};
use crate::phasespace::PhasePoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    FreeSpin,
    Larmor,
    SternGerlach,
    GaugeCompare,
    VerifySo3,
    VerifyLorentz,
    VerifyT4,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Self::FreeSpin,
        Self::Larmor,
        Self::SternGerlach,
        Self::GaugeCompare,
        Self::VerifySo3,
        Self::VerifyLorentz,
        Self::VerifyT4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::FreeSpin => "free_spin",
            Self::Larmor => "larmor",
            Self::SternGerlach => "stern_gerlach",
            Self::GaugeCompare => "gauge_compare",
            Self::VerifySo3 => "verify_so3",
            Self::VerifyLorentz => "verify_lorentz",
            Self::VerifyT4 => "verify_t4",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Self::FreeSpin => "zero field: spin and velocity stay constant",
            Self::Larmor => "uniform field: spin precession and cyclotron frequencies",
            Self::SternGerlach => "linear-gradient field: spin-dependent deflection",
            Self::GaugeCompare => "two gauge functions give the same S(t) and x(t)",
            Self::VerifySo3 => "bracket algebra, Dirac bracket, bundle maps and group law",
            Self::VerifyLorentz => "boost invariance of the covariant T3 surface",
            Self::VerifyT4 => "boost invariance and structure group of the T4 surface",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        let key = name.strip_prefix("verify_").map_or(name, |s| s);
        Self::ALL.into_iter().find(|s| {
            s.name() == name
                || (s.is_verification() && s.name().strip_prefix("verify_") == Some(key))
        })
    }

    pub fn is_verification(self) -> bool {
        matches!(self, Self::VerifySo3 | Self::VerifyLorentz | Self::VerifyT4)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    #[serde(default = "one")]
    pub m: f64,
    #[serde(default = "one")]
    pub e: f64,
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "one")]
    pub a: f64,
    /// Defaults to `b² = 3ħ²/4a²`.
    pub b: Option<f64>,
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default)]
    pub convention: PotentialSign,
}

fn one() -> f64 {
    1.0
}

impl Default for ParamsSpec {
    fn default() -> Self {
        Self {
            m: 1.0,
            e: 1.0,
            mu: 1.0,
            c: 1.0,
            a: 1.0,
            b: None,
            hbar: 1.0,
            convention: PotentialSign::default(),
        }
    }
}

impl ParamsSpec {
    pub fn to_params(&self) -> ModelParams {
        ModelParams {
            m: self.m,
            e: self.e,
            mu: self.mu,
            c: self.c,
            a: self.a,
            b: self
                .b
                .unwrap_or_else(|| ModelParams::spin_half_b(self.a, self.hbar)),
            hbar: self.hbar,
            convention: self.convention,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Uniform {
        b: [f64; 3],
    },
    LinearGradient {
        b0: [f64; 3],
        /// Rows of `G` in `B = B₀ + G x`.
        gradient: [[f64; 3]; 3],
    },
}

impl FieldSpec {
    pub fn to_field(&self) -> crate::Result<FieldConfig> {
        match self {
            Self::Uniform { b } => Ok(FieldConfig::uniform(Vector3::from(*b))),
            Self::LinearGradient { b0, gradient } => {
                let g = Matrix3::from_fn(|i, j| gradient[i][j]);
                FieldConfig::linear_gradient(Vector3::from(*b0), g)
            }
        }
    }

    /// Magnitude of the field at the origin.
    pub fn strength(&self) -> f64 {
        match self {
            Self::Uniform { b } => Vector3::from(*b).norm(),
            Self::LinearGradient { b0, .. } => Vector3::from(*b0).norm(),
        }
    }

    pub fn direction(&self) -> Vector3<f64> {
        let v = match self {
            Self::Uniform { b } => Vector3::from(*b),
            Self::LinearGradient { b0, .. } => Vector3::from(*b0),
        };
        v.try_normalize(0.0).unwrap_or_else(Vector3::z)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeSpec {
    /// Expression in `t`, e.g. `"1 + 0.5*sin(2*t)"`.
    pub phi: String,
}

impl Default for GaugeSpec {
    fn default() -> Self {
        Self { phi: "1".into() }
    }
}

/// Initial state. `omega` and `pi` default to a frame rotated by
/// `spin_euler` (roll, pitch, yaw) applied to `(a, 0, 0)` and `(0, b, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    #[serde(default)]
    pub x: [f64; 3],
    #[serde(default)]
    pub p: [f64; 3],
    pub omega: Option<[f64; 3]>,
    pub pi: Option<[f64; 3]>,
    #[serde(default = "default_euler")]
    pub spin_euler: [f64; 3],
}

fn default_euler() -> [f64; 3] {
    [0.7, -0.4, 1.1]
}

impl Default for InitialSpec {
    fn default() -> Self {
        Self {
            x: [0.0; 3],
            p: [0.0; 3],
            omega: None,
            pi: None,
            spin_euler: default_euler(),
        }
    }
}

impl InitialSpec {
    pub fn to_point(&self, params: &ModelParams, phi0: f64) -> PhasePoint {
        let [r, p, y] = self.spin_euler;
        let rot = Rotation3::from_euler_angles(r, p, y);
        let omega = self
            .omega
            .map(Vector3::from)
            .unwrap_or_else(|| rot * Vector3::new(params.a, 0.0, 0.0));
        let pi = self
            .pi
            .map(Vector3::from)
            .unwrap_or_else(|| rot * Vector3::new(0.0, params.b, 0.0));
        PhasePoint::new(
            Vector3::from(self.x),
            Vector3::from(self.p),
            omega,
            pi,
            phi0,
            0.0,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    #[serde(default)]
    pub project_every: usize,
    pub max_step: Option<f64>,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

fn default_rel_tol() -> f64 {
    1e-10
}
fn default_abs_tol() -> f64 {
    1e-12
}
fn default_max_steps() -> usize {
    1_000_000
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            rel_tol: default_rel_tol(),
            abs_tol: default_abs_tol(),
            project_every: 0,
            max_step: None,
            max_steps: default_max_steps(),
        }
    }
}

impl SolverSpec {
    pub fn to_options(&self) -> IntegrateOptions {
        IntegrateOptions {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            project_every: self.project_every,
            max_step: self.max_step,
            max_steps: self.max_steps,
            ..IntegrateOptions::default()
        }
    }
}

/// Pass/fail thresholds; every field defaults to the acceptance value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub bracket: f64,
    pub dirac: f64,
    pub rotation: f64,
    pub fiber_invariance: f64,
    pub casimir_identity: f64,
    pub normalization: f64,
    pub covariant: f64,
    pub tetrad: f64,
    pub bmt_round_trip: f64,
    pub bmt_orthogonality: f64,
    pub frequency_rel: f64,
    pub drift_unprojected: f64,
    pub drift_projected: f64,
    pub gauge_observable: f64,
    pub gauge_motion_min: f64,
    pub rank_gap: f64,
    pub group_law: f64,
    pub spin_constant: f64,
    pub energy: f64,
    pub second_order: f64,
    pub deflection_min: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            bracket: 1e-8,
            dirac: 1e-8,
            rotation: 1e-10,
            fiber_invariance: 1e-12,
            casimir_identity: 1e-10,
            normalization: 1e-10,
            covariant: 1e-9,
            tetrad: 1e-9,
            bmt_round_trip: 1e-10,
            bmt_orthogonality: 1e-12,
            frequency_rel: 1e-6,
            drift_unprojected: 1e-6,
            drift_projected: 1e-10,
            gauge_observable: 1e-6,
            gauge_motion_min: 0.1,
            rank_gap: 1e6,
            group_law: 1e-12,
            spin_constant: 1e-9,
            energy: 1e-8,
            second_order: 1e-7,
            deflection_min: 1e-6,
        }
    }
}

impl Thresholds {
    /// Replaces every tolerance (not the lower bounds) with `tol`.
    pub fn override_all(&mut self, tol: f64) {
        for field in [
            &mut self.bracket,
            &mut self.dirac,
            &mut self.rotation,
            &mut self.fiber_invariance,
            &mut self.casimir_identity,
            &mut self.normalization,
            &mut self.covariant,
            &mut self.tetrad,
            &mut self.bmt_round_trip,
            &mut self.bmt_orthogonality,
            &mut self.frequency_rel,
            &mut self.drift_unprojected,
            &mut self.drift_projected,
            &mut self.gauge_observable,
            &mut self.group_law,
            &mut self.spin_constant,
            &mut self.energy,
            &mut self.second_order,
        ] {
            *field = tol;
        }
    }
}

/// Random-sample sizes and the boost range for verification suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingSpec {
    pub points: usize,
    pub boosts: usize,
    pub max_beta: f64,
    /// Optional fixed boost velocity applied in addition to the random ones.
    pub beta: Option<[f64; 3]>,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        Self {
            points: 1000,
            boosts: 1000,
            max_beta: 0.99,
            beta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub timeseries: String,
    pub summary: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("output"),
            timeseries: "timeseries.csv".into(),
            summary: "summary.json".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: ParamsSpec,
    pub field: Option<FieldSpec>,
    #[serde(default)]
    pub gauge: GaugeSpec,
    /// Second gauge for `gauge_compare`.
    pub gauge_alt: Option<GaugeSpec>,
    #[serde(default)]
    pub initial: InitialSpec,
    /// Integration interval; `periods` is used when absent.
    pub t_span: Option<[f64; 2]>,
    /// Number of Larmor periods when `t_span` is absent.
    #[serde(default = "default_periods")]
    pub periods: f64,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub sampling: SamplingSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_periods() -> f64 {
    10.0
}

/// A configuration problem with the offending field path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        path: path.into(),
        message: message.into(),
    }
}

impl ScenarioConfig {
    /// Defaults for `scenario` with the field each simulation needs.
    pub fn template(scenario: Scenario) -> Self {
        let field = match scenario {
            Scenario::FreeSpin => Some(FieldSpec::Uniform { b: [0.0; 3] }),
            Scenario::Larmor | Scenario::GaugeCompare => {
                Some(FieldSpec::Uniform { b: [0.0, 0.0, 1.0] })
            }
            Scenario::SternGerlach => Some(FieldSpec::LinearGradient {
                b0: [0.0, 0.0, 1.0],
                gradient: [[-0.05, 0.0, 0.0], [0.0, -0.05, 0.0], [0.0, 0.0, 0.1]],
            }),
            _ => None,
        };
        let gauge_alt = (scenario == Scenario::GaugeCompare).then(|| GaugeSpec {
            phi: "1 + 0.5*sin(2*t)".into(),
        });
        let initial = InitialSpec {
            x: [0.2, -0.1, 0.0],
            p: [0.6, 0.3, 0.05],
            ..InitialSpec::default()
        };
        let solver = SolverSpec {
            max_step: (scenario == Scenario::GaugeCompare).then_some(0.02),
            project_every: usize::from(!scenario.is_verification()),
            ..SolverSpec::default()
        };
        let t_span = (scenario == Scenario::FreeSpin).then_some([0.0, 10.0]);
        Self {
            scenario,
            seed: 42,
            params: ParamsSpec::default(),
            field,
            gauge: GaugeSpec::default(),
            gauge_alt,
            initial,
            t_span,
            periods: default_periods(),
            solver,
            thresholds: Thresholds::default(),
            sampling: SamplingSpec::default(),
            output: OutputSpec::default(),
        }
    }

    pub fn from_toml(src: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(src).map_err(|e| invalid("", e.to_string().trim_end()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(src: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(src).map_err(|e| invalid("", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| invalid("", format!("cannot read {}: {e}", path.display())))?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let parsed = if is_json {
            Self::from_json(&src)
        } else {
            Self::from_toml(&src)
        };
        parsed.map_err(|e| ConfigError {
            path: e.path,
            message: format!("{}: {}", path.display(), e.message),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// The model parameters with `b` resolved.
    pub fn model_params(&self) -> ModelParams {
        self.params.to_params()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.params;
        for (name, v) in [("m", p.m), ("c", p.c), ("a", p.a)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(
                    &format!("params.{name}"),
                    format!("must be positive, got {v}"),
                ));
            }
        }
        if let Some(b) = p.b {
            if !(b > 0.0 && b.is_finite()) {
                return Err(invalid("params.b", format!("must be positive, got {b}")));
            }
        }
        for (name, v) in [("e", p.e), ("mu", p.mu), ("hbar", p.hbar)] {
            if !v.is_finite() {
                return Err(invalid(&format!("params.{name}"), "must be finite"));
            }
        }
        if p.b.is_none() && !(p.hbar > 0.0) {
            return Err(invalid(
                "params.hbar",
                "must be positive when params.b is omitted",
            ));
        }
        if let Some(FieldSpec::LinearGradient { gradient, .. }) = &self.field {
            let tr = gradient[0][0] + gradient[1][1] + gradient[2][2];
            if tr.abs() > 1e-12 {
                return Err(invalid(
                    "field.gradient",
                    format!("must be traceless (div B = 0), trace = {tr}"),
                ));
            }
        }
        GaugeFunction::from_expr(&self.gauge.phi)
            .map_err(|e| invalid("gauge.phi", e.to_string()))?;
        if let Some(g) = &self.gauge_alt {
            GaugeFunction::from_expr(&g.phi)
                .map_err(|e| invalid("gauge_alt.phi", e.to_string()))?;
        }
        if let Some([t0, t1]) = self.t_span {
            if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
                return Err(invalid(
                    "t_span",
                    format!("must satisfy t0 < t1, got [{t0}, {t1}]"),
                ));
            }
        }
        if !(self.periods > 0.0) {
            return Err(invalid("periods", "must be positive"));
        }
        let s = &self.solver;
        if !(s.rel_tol > 0.0) {
            return Err(invalid("solver.rel_tol", "must be positive"));
        }
        if !(s.abs_tol > 0.0) {
            return Err(invalid("solver.abs_tol", "must be positive"));
        }
        if let Some(h) = s.max_step {
            if !(h > 0.0) {
                return Err(invalid("solver.max_step", "must be positive"));
            }
        }
        let sm = &self.sampling;
        if !(sm.max_beta >= 0.0 && sm.max_beta < 1.0) {
            return Err(invalid(
                "sampling.max_beta",
                format!("|β| must be in [0, 1), got {}", sm.max_beta),
            ));
        }
        if let Some(beta) = sm.beta {
            let n = Vector3::from(beta).norm();
            if !(n < 1.0) {
                return Err(invalid(
                    "sampling.beta",
                    format!("|β| must be < 1, got {n}"),
                ));
            }
        }
        if sm.points == 0 || sm.boosts == 0 {
            return Err(invalid("sampling", "points and boosts must be positive"));
        }
        let needs_field = matches!(
            self.scenario,
            Scenario::Larmor | Scenario::SternGerlach | Scenario::GaugeCompare
        );
        match (&self.field, self.scenario) {
            (None, _) if needs_field => {
                return Err(invalid(
                    "field",
                    format!("required by scenario {}", self.scenario),
                ))
            }
            (Some(FieldSpec::Uniform { b }), Scenario::Larmor | Scenario::GaugeCompare)
                if Vector3::from(*b).norm() == 0.0 =>
            {
                return Err(invalid("field.b", "must be nonzero for this scenario"))
            }
            (Some(FieldSpec::LinearGradient { .. }), Scenario::Larmor) => {
                return Err(invalid("field.kind", "larmor needs a uniform field"))
            }
            (Some(FieldSpec::Uniform { .. }), Scenario::SternGerlach) => {
                return Err(invalid(
                    "field.kind",
                    "stern_gerlach needs a linear_gradient field",
                ))
            }
            _ => {}
        }
        if self.scenario == Scenario::GaugeCompare && self.gauge_alt.is_none() {
            return Err(invalid("gauge_alt", "required by scenario gauge_compare"));
        }
        if self.output.timeseries.is_empty() || self.output.summary.is_empty() {
            return Err(invalid("output", "file names must be non-empty"));
        }
        Ok(())
    }
}
