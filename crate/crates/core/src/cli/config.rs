//! Scenario configuration: JSON schema, validation and JSON-pointer errors.

use crate::asymptotics::LambdaGrid;
use crate::geometry::Direction;
use crate::kernels::{Cutoff, CutoffKind};
use crate::model::{PointM, ToricModel};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

impl ConfigError {
    fn at(pointer: &str, message: impl Into<String>) -> Self {
        ConfigError::Schema { pointer: pointer.to_string(), message: message.into() }
    }

    pub fn pointer(&self) -> Option<&str> {
        match self {
            ConfigError::Schema { pointer, .. } => Some(pointer),
            ConfigError::Io { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub shifts: Vec<i64>,
    #[serde(default)]
    pub constants: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionKind {
    Normal,
    FixedRotation,
}

fn default_point() -> usize {
    0
}
fn default_exponent_tol() -> f64 {
    0.02
}
fn default_stability() -> f64 {
    0.05
}
fn default_coefficient_tol() -> f64 {
    0.03
}
fn default_correction_exponent() -> f64 {
    -1.0
}
fn default_correction_tol() -> f64 {
    0.2
}
fn default_profile_tol() -> f64 {
    0.05
}
fn default_h_grid() -> Vec<f64> {
    (0..=8).map(|j| 0.25 * j as f64).collect()
}
fn default_h0() -> f64 {
    0.3
}
fn default_scale_d() -> f64 {
    1.0
}
fn default_delta() -> f64 {
    0.25
}
fn default_radii() -> LambdaGrid {
    LambdaGrid::new(50.0, 500.0, 12)
}
fn default_count_tol() -> f64 {
    0.05
}
fn default_levels() -> u64 {
    200
}
fn default_identity_lambda() -> f64 {
    100.0
}
fn default_identity_tol() -> f64 {
    1e-12
}

/// A requested check. `point` indexes into the scenario's `points`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Check {
    Exponent(ExponentCheck),
    Coefficient(CoefficientCheck),
    CorrectionOrder(CorrectionCheck),
    Profile(ProfileCheck),
    RapidDecay(RapidDecayCheck),
    TraceLeading(TraceLeadingCheck),
    NonperiodDecay(NonperiodCheck),
    Counting(CountingCheck),
    Identities(IdentitiesCheck),
}

/// Fitted exponent of the on-locus diagonal over the lambda grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentCheck {
    #[serde(default = "default_point")]
    pub point: usize,
    /// Defaults to `d + (1 - r)/2`.
    #[serde(default)]
    pub expected: Option<f64>,
    #[serde(default = "default_exponent_tol")]
    pub tolerance: f64,
    #[serde(default = "default_stability")]
    pub stability_threshold: f64,
}

/// Ratio of the diagonal to its leading term at one lambda.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientCheck {
    #[serde(default = "default_point")]
    pub point: usize,
    pub lambda: f64,
    #[serde(default = "default_coefficient_tol")]
    pub tolerance: f64,
}

/// Fitted exponent of the relative deviation from the leading term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectionCheck {
    #[serde(default = "default_point")]
    pub point: usize,
    #[serde(default = "default_correction_exponent")]
    pub expected: f64,
    #[serde(default = "default_correction_tol")]
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileCheck {
    #[serde(default = "default_point")]
    pub point: usize,
    pub direction: DirectionKind,
    #[serde(default)]
    pub factor: usize,
    #[serde(default = "default_h_grid")]
    pub h_grid: Vec<f64>,
    pub lambda: f64,
    #[serde(default = "default_profile_tol")]
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RapidDecayCheck {
    #[serde(default = "default_point")]
    pub point: usize,
    #[serde(default)]
    pub factor: usize,
    #[serde(default = "default_h0")]
    pub h0: f64,
    #[serde(rename = "D", default = "default_scale_d")]
    pub scale_d: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

/// Trace transform against the sum of the component predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceLeadingCheck {
    pub lambda: f64,
    #[serde(default = "default_coefficient_tol")]
    pub tolerance: f64,
    #[serde(default = "default_exponent_tol")]
    pub exponent_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonperiodCheck {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountingCheck {
    #[serde(default = "default_radii")]
    pub radii: LambdaGrid,
    #[serde(default = "default_count_tol")]
    pub tolerance: f64,
}

/// Level normalization and the full-period identity of the trace transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentitiesCheck {
    #[serde(default = "default_levels")]
    pub levels: u64,
    #[serde(default = "default_identity_lambda")]
    pub lambda: f64,
    #[serde(default = "default_identity_tol")]
    pub tolerance: f64,
}

impl Check {
    pub fn name(&self) -> &'static str {
        match self {
            Check::Exponent(_) => "exponent",
            Check::Coefficient(_) => "coefficient",
            Check::CorrectionOrder(_) => "correction_order",
            Check::Profile(_) => "profile",
            Check::RapidDecay(_) => "rapid_decay",
            Check::TraceLeading(_) => "trace_leading",
            Check::NonperiodDecay(_) => "nonperiod_decay",
            Check::Counting(_) => "counting",
            Check::Identities(_) => "identities",
        }
    }

    fn point_index(&self) -> Option<usize> {
        match self {
            Check::Exponent(c) => Some(c.point),
            Check::Coefficient(c) => Some(c.point),
            Check::CorrectionOrder(c) => Some(c.point),
            Check::Profile(c) => Some(c.point),
            Check::RapidDecay(c) => Some(c.point),
            _ => None,
        }
    }
}

/// The tagged enum buffers its content and loses the inner path, so a failing
/// check is parsed again as its parameter struct to locate the field.
fn locate_check_error(value: &serde_json::Value) -> Option<(String, String)> {
    fn inner<T: serde::de::DeserializeOwned>(v: serde_json::Value) -> Option<(String, String)> {
        serde_path_to_error::deserialize::<_, T>(v).err().map(|e| (pointer_of(e.path()), e.inner().to_string()))
    }
    let mut map = value.as_object()?.clone();
    let name = map.remove("name")?;
    let rest = serde_json::Value::Object(map);
    match name.as_str()? {
        "exponent" => inner::<ExponentCheck>(rest),
        "coefficient" => inner::<CoefficientCheck>(rest),
        "correction_order" => inner::<CorrectionCheck>(rest),
        "profile" => inner::<ProfileCheck>(rest),
        "rapid_decay" => inner::<RapidDecayCheck>(rest),
        "trace_leading" => inner::<TraceLeadingCheck>(rest),
        "nonperiod_decay" => inner::<NonperiodCheck>(rest),
        "counting" => inner::<CountingCheck>(rest),
        "identities" => inner::<IdentitiesCheck>(rest),
        _ => None,
    }
}

fn default_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub model: ModelBlock,
    /// Unit direction; normalized on load.
    pub beta: Vec<f64>,
    pub s0: Vec<f64>,
    pub cutoff: CutoffKind,
    pub lambda_grid: LambdaGrid,
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    #[serde(default)]
    pub checks: Vec<Check>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
}

/// A validated scenario with its model and cutoff built.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub model: ToricModel,
    pub cutoff: Cutoff,
    pub points: Vec<PointM>,
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

fn refine_pointer(text: &str, pointer: &str) -> Option<(String, String)> {
    let index: usize = pointer.strip_prefix("/checks/")?.parse().ok()?;
    let doc: serde_json::Value = serde_json::from_str(text).ok()?;
    let (inner, message) = locate_check_error(doc.get("checks")?.get(index)?)?;
    Some((format!("{pointer}{inner}"), message))
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let pointer = pointer_of(e.path());
            refine_pointer(text, &pointer)
                .map(|(p, m)| ConfigError::at(&p, m))
                .unwrap_or_else(|| ConfigError::at(&pointer, e.inner().to_string()))
        })?;
        scenario.normalize_beta()?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Leaves already-unit vectors untouched so that a round trip is exact.
    fn normalize_beta(&mut self) -> Result<(), ConfigError> {
        let norm = self.beta.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 4.0 * f64::EPSILON {
            let unit = Direction::normalized(&self.beta).map_err(|e| ConfigError::at("/beta", e.to_string()))?;
            self.beta = unit.as_slice().to_vec();
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let model = self.build_model()?;
        let r = model.r;
        if self.beta.len() != r {
            return Err(ConfigError::at("/beta", format!("length {} but the model has r = {r}", self.beta.len())));
        }
        if self.s0.len() != r {
            return Err(ConfigError::at("/s0", format!("length {} but the model has r = {r}", self.s0.len())));
        }
        if self.s0.iter().any(|x| !x.is_finite()) {
            return Err(ConfigError::at("/s0", "entries must be finite"));
        }
        self.lambda_grid.validate().map_err(|e| ConfigError::at("/lambda_grid", e.to_string()))?;
        Cutoff::new(self.cutoff, r).map_err(|e| ConfigError::at("/cutoff", e.to_string()))?;
        for (j, p) in self.points.iter().enumerate() {
            if p.len() != model.d {
                return Err(ConfigError::at(
                    &format!("/points/{j}"),
                    format!("length {} but the model has {} factors", p.len(), model.d),
                ));
            }
            PointM::new(p.clone()).map_err(|e| ConfigError::at(&format!("/points/{j}"), e.to_string()))?;
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(ConfigError::at("/tol", "must be positive"));
        }
        for (j, check) in self.checks.iter().enumerate() {
            if let Some(i) = check.point_index() {
                if i >= self.points.len() {
                    return Err(ConfigError::at(
                        &format!("/checks/{j}/point"),
                        format!("index {i} but only {} points are configured", self.points.len()),
                    ));
                }
            }
        }
        Ok(())
    }

    fn build_model(&self) -> Result<ToricModel, ConfigError> {
        ToricModel::new(&self.model.shifts, &self.model.constants).map_err(|e| ConfigError::at("/model", e.to_string()))
    }

    pub fn prepare(&self, tol_override: Option<f64>) -> Result<Prepared, ConfigError> {
        let mut scenario = self.clone();
        if let Some(t) = tol_override {
            scenario.tol = t;
            scenario.validate()?;
        }
        let model = scenario.build_model()?;
        let cutoff = Cutoff::new(scenario.cutoff, model.r).map_err(|e| ConfigError::at("/cutoff", e.to_string()))?;
        let points = scenario.points.iter().map(|p| PointM { s: p.clone() }).collect();
        Ok(Prepared { scenario, model, cutoff, points })
    }

    /// Hex SHA-256 of the canonical (compact) JSON of the parsed scenario.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("scenario serializes")))
    }
}
