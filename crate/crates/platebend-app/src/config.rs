//! The JSON problem description.
//!
//! A document may name a `scenario`; the scenario's document then supplies
//! defaults and the user document is merged over it key by key.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;

use platebend::flow::ConstraintMode;

use crate::catalog;
use crate::AppError;

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Preasymptotic,
    Prestrain,
    Bilayer,
}

impl Model {
    pub fn constraint(&self) -> ConstraintMode {
        match self {
            Model::Preasymptotic => ConstraintMode::None,
            Model::Prestrain => ConstraintMode::Aver,
            Model::Bilayer => ConstraintMode::Bary,
        }
    }
}

pub type Params = BTreeMap<String, f64>;

fn default_degree() -> usize {
    2
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub model: Model,
    #[serde(default = "default_degree")]
    pub degree: usize,
    pub mesh: MeshSpec,
    #[serde(default)]
    pub material: MaterialSpec,
    #[serde(default)]
    pub penalties: PenaltySpec,
    #[serde(default)]
    pub metric: MetricSpec,
    #[serde(default)]
    pub curvature: Option<CurvatureSpec>,
    #[serde(default)]
    pub boundary: BoundarySpec,
    #[serde(default)]
    pub force: Option<FieldSpec>,
    #[serde(default)]
    pub initial: Option<InitialSpec>,
    #[serde(default)]
    pub flow: FlowSpec,
    #[serde(default)]
    pub preprocess: PreprocessSpec,
    #[serde(default)]
    pub dynamics: Option<DynamicsSpec>,
    #[serde(default)]
    pub output: OutputSpec,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSpec {
    File {
        path: PathBuf,
    },
    Bundled {
        name: String,
    },
    Rectangle {
        x: [f64; 2],
        y: [f64; 2],
        n: [usize; 2],
    },
    Disc {
        #[serde(default = "one")]
        radius: f64,
        n: usize,
        /// Passes of refinement of the cells touching the boundary.
        #[serde(default)]
        refine_boundary: usize,
    },
    Diamond {
        n: usize,
        m: usize,
    },
    Starshade {
        n: usize,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Squared thickness `s^2` of the preasymptotic model.
    #[serde(default)]
    pub s2: f64,
}

fn default_mu() -> f64 {
    6.0
}

fn default_lambda() -> f64 {
    8.0
}

impl Default for MaterialSpec {
    fn default() -> Self {
        MaterialSpec { mu: default_mu(), lambda: default_lambda(), s2: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PenaltySpec {
    #[serde(default = "one")]
    pub gamma0: f64,
    #[serde(default = "one")]
    pub gamma1: f64,
    #[serde(default = "ten")]
    pub gamma2: f64,
}

fn ten() -> f64 {
    10.0
}

impl Default for PenaltySpec {
    fn default() -> Self {
        PenaltySpec { gamma0: 1.0, gamma1: 1.0, gamma2: 10.0 }
    }
}

/// A vector field: a catalog entry with parameters, or three expressions in `x1, x2, t`.
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub builtin: Option<String>,
    #[serde(default)]
    pub params: Params,
    pub expr: Option<[String; 3]>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub builtin: Option<String>,
    #[serde(default)]
    pub params: Params,
    /// Rows of `g` as expressions.
    pub components: Option<[[String; 2]; 2]>,
    /// `g = grad y^T grad y` of an immersion.
    pub immersion: Option<FieldSpec>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum CurvatureValue {
    Scalar(f64),
    Matrix([[f64; 2]; 2]),
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CurvatureSpec {
    /// Spontaneous curvature per region label.
    pub regions: Option<BTreeMap<String, CurvatureValue>>,
    pub constant: Option<CurvatureValue>,
    /// Adds `(alpha/2) int |Z|^2` to the bilayer energy.
    #[serde(default)]
    pub constant_term: bool,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    #[default]
    Free,
    /// Dirichlet on the whole boundary.
    Clamped,
    /// Mixed (value only) on the whole boundary.
    Mixed,
    /// Edge labels as stored in the mesh file.
    Mesh,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub at: [f64; 2],
    pub value: [String; 3],
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProgramSpec {
    pub name: String,
    #[serde(default)]
    pub params: Params,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    #[serde(default)]
    pub kind: BoundaryKind,
    /// Boundary data taken from an immersion (value and gradient).
    pub immersion: Option<FieldSpec>,
    pub value: Option<[String; 3]>,
    /// Rows of `Phi = grad phi`, one per component.
    pub gradient: Option<[[String; 2]; 3]>,
    #[serde(default)]
    pub points: Vec<PointSpec>,
    /// A catalog point-condition program; replaces `points`.
    pub program: Option<ProgramSpec>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    Identity,
    /// BC preprocessing followed by metric preprocessing.
    Preprocess,
    /// Interpolant of an immersion.
    Immersion,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub kind: InitialKind,
    pub immersion: Option<FieldSpec>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub accelerate: bool,
    #[serde(default)]
    pub adaptive_tau: bool,
    /// Must agree with the model when given.
    pub constraint: Option<String>,
    /// A registered flow scheme; defaults to the one of the constraint mode.
    pub scheme: Option<String>,
}

fn default_tau() -> f64 {
    0.01
}

fn default_tol() -> f64 {
    1e-6
}

fn default_max_iter() -> usize {
    100_000
}

impl Default for FlowSpec {
    fn default() -> Self {
        FlowSpec {
            tau: default_tau(),
            tol: default_tol(),
            max_iter: default_max_iter(),
            accelerate: false,
            adaptive_tau: false,
            constraint: None,
            scheme: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PreprocessSpec {
    #[serde(default = "default_pre_tau")]
    pub tau: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub eps0: f64,
    #[serde(default = "default_pre_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub accelerate: bool,
    /// Run the metric stage after the BC stage.
    #[serde(default = "yes")]
    pub metric: bool,
    /// Fictitious force of the BC stage.
    pub force: Option<[String; 3]>,
}

fn default_pre_tau() -> f64 {
    0.05
}

fn default_pre_max_iter() -> usize {
    10_000
}

fn yes() -> bool {
    true
}

impl Default for PreprocessSpec {
    fn default() -> Self {
        PreprocessSpec {
            tau: default_pre_tau(),
            tol: default_tol(),
            eps0: 0.0,
            max_iter: default_pre_max_iter(),
            accelerate: false,
            metric: true,
            force: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSpec {
    pub dt: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_prefix")]
    pub prefix: String,
    #[serde(default = "yes")]
    pub vtk: bool,
    #[serde(default = "yes")]
    pub csv: bool,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_prefix() -> String {
    "run".into()
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: default_out_dir(), prefix: default_prefix(), vtk: true, csv: true }
    }
}

/// Recursively overlays `top` on `base`; objects merge, everything else is replaced.
/// An object whose `kind` or `builtin` differs from the base replaces it whole.
pub fn merge(base: &mut Value, top: Value) {
    let retagged = |b: &serde_json::Map<String, Value>, t: &serde_json::Map<String, Value>| {
        ["kind", "builtin"].iter().any(|k| t.get(*k).is_some_and(|v| b.get(*k) != Some(v)))
    };
    match (base, top) {
        (Value::Object(b), Value::Object(t)) if !retagged(b, &t) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<ProblemConfig, AppError> {
    let value: Value = serde_json::from_str(text).map_err(|e| AppError::Config(format!("invalid JSON: {e}")))?;
    parse_config_value(value, base_dir)
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ProblemConfig, AppError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| AppError::Config(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config_str(&text, &base)
}

pub fn parse_config_value(mut value: Value, base_dir: &Path) -> Result<ProblemConfig, AppError> {
    let Value::Object(obj) = &mut value else {
        return Err(AppError::Config("configuration must be a JSON object".into()));
    };
    if let Some(name) = obj.remove("scenario") {
        let Value::String(name) = name else {
            return Err(AppError::Config("scenario: expected a name".into()));
        };
        let mut doc = catalog::scenario_document(&name)?;
        merge(&mut doc, value);
        value = doc;
    }
    match value.get("model") {
        None | Some(Value::Null) => return Err(AppError::Config("model required".into())),
        _ => {}
    }
    let mut config: ProblemConfig =
        serde_path_to_error::deserialize(value).map_err(|e| AppError::Config(format!("{}: {}", e.path(), e.inner())))?;
    config.base_dir = base_dir.to_path_buf();
    config.validate()?;
    Ok(config)
}

impl ProblemConfig {
    pub fn constraint(&self) -> ConstraintMode {
        self.model.constraint()
    }

    pub fn validate(&self) -> Result<(), AppError> {
        let bad = |m: String| Err(AppError::Config(m));
        if let Some(c) = &self.flow.constraint {
            let mode = ConstraintMode::parse(c).map_err(|e| AppError::Config(format!("flow.constraint: {e}")))?;
            if mode != self.constraint() {
                return bad(format!(
                    "flow.constraint: model {:?} uses constraint mode '{}', not '{}'",
                    self.model,
                    self.constraint().name(),
                    mode.name()
                ));
            }
        }
        if self.flow.accelerate && self.model != Model::Preasymptotic {
            return bad("flow.accelerate: acceleration applies to the preasymptotic model only".into());
        }
        if !(1..=4).contains(&self.degree) {
            return bad(format!("degree: expected 1..=4, got {}", self.degree));
        }
        if self.model == Model::Preasymptotic && !(self.material.s2 >= 0.0) {
            return bad("material.s2: must be nonnegative".into());
        }
        let m = &self.metric;
        if [m.builtin.is_some(), m.components.is_some(), m.immersion.is_some()].iter().filter(|&&b| b).count() > 1 {
            return bad("metric: give one of builtin, components or immersion".into());
        }
        if let Some(z) = &self.curvature {
            if z.regions.is_some() == z.constant.is_some() {
                return bad("curvature: give exactly one of regions or constant".into());
            }
            if self.model != Model::Bilayer {
                return bad("curvature: only the bilayer model has a spontaneous curvature".into());
            }
        }
        let b = &self.boundary;
        if b.immersion.is_some() && (b.value.is_some() || b.gradient.is_some()) {
            return bad("boundary: immersion excludes value and gradient".into());
        }
        if b.program.is_some() && !b.points.is_empty() {
            return bad("boundary: program replaces points".into());
        }
        if b.kind == BoundaryKind::Free && (b.value.is_some() || b.gradient.is_some()) {
            return bad("boundary: value or gradient given for a free boundary".into());
        }
        if let Some(init) = &self.initial {
            if (init.kind == InitialKind::Immersion) != init.immersion.is_some() {
                return bad("initial: the immersion kind needs, and only it takes, an immersion".into());
            }
        }
        if let Some(d) = &self.dynamics {
            if !(d.dt > 0.0) || d.steps == 0 {
                return bad("dynamics: needs dt > 0 and steps >= 1".into());
            }
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Initial-state rule: the explicit choice, else preprocessing when
    /// boundary conditions are present and the identity otherwise.
    pub fn initial_kind(&self) -> InitialKind {
        match &self.initial {
            Some(i) => i.kind,
            None if self.boundary.kind != BoundaryKind::Free
                || !self.boundary.points.is_empty()
                || self.boundary.program.is_some() =>
            {
                InitialKind::Preprocess
            }
            None => InitialKind::Identity,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn parse(v: Value) -> Result<ProblemConfig, AppError> {
        parse_config_value(v, Path::new("."))
    }

    #[test]
    fn defaults_are_applied() {
        let c = parse(json!({"model": "prestrain", "mesh": {"kind": "disc", "n": 2}})).unwrap();
        assert_eq!((c.material.mu, c.material.lambda), (6.0, 8.0));
        assert_eq!((c.penalties.gamma0, c.penalties.gamma1, c.penalties.gamma2), (1.0, 1.0, 10.0));
        assert_eq!(c.degree, 2);
        assert_eq!(c.constraint(), ConstraintMode::Aver);
        assert_eq!(c.initial_kind(), InitialKind::Identity);
    }

    #[test]
    fn model_is_required() {
        let err = parse(json!({"mesh": {"kind": "disc", "n": 2}})).unwrap_err();
        assert!(err.to_string().contains("model required"), "{err}");
        assert!(parse(json!({"model": null})).unwrap_err().to_string().contains("model required"));
    }

    #[test]
    fn constraint_must_match_model() {
        let err = parse(json!({"model": "bilayer", "mesh": {"kind": "disc", "n": 2}, "flow": {"constraint": "aver"}}))
            .unwrap_err()
            .to_string();
        assert!(err.contains("flow.constraint") && err.contains("'bary'"), "{err}");
        parse(json!({"model": "bilayer", "mesh": {"kind": "disc", "n": 2}, "flow": {"constraint": "bary"}})).unwrap();
    }

    #[test]
    fn unknown_keys_report_their_path() {
        let err = parse(json!({"model": "prestrain", "mesh": {"kind": "disc", "n": 2}, "flow": {"tau": 0.1, "tua": 1}}))
            .unwrap_err()
            .to_string();
        assert!(err.contains("flow") && err.contains("tua"), "{err}");
        let err = parse(json!({"model": "prestrain", "mesh": {"kind": "disc", "n": 2, "radiuss": 1}})).unwrap_err().to_string();
        assert!(err.contains("mesh") && err.contains("radiuss"), "{err}");
        let err = parse(json!({"model": "prestrain", "mesh": {"kind": "disc", "n": "two"}})).unwrap_err().to_string();
        assert!(err.contains("mesh"), "{err}");
    }

    #[test]
    fn scenario_provides_defaults() {
        let c = parse(json!({"scenario": "bubble", "flow": {"accelerate": true}})).unwrap();
        assert_eq!(c.model, Model::Preasymptotic);
        assert!(c.flow.accelerate);
        assert_eq!(c.flow.tau, 0.01);
        assert_eq!(c.material.s2, 1e-3);
        let err = parse(json!({"scenario": "nope"})).unwrap_err().to_string();
        assert!(err.contains("unknown scenario 'nope'"), "{err}");
    }

    #[test]
    fn merge_replaces_retagged_objects() {
        let mut base = json!({"mesh": {"kind": "bundled", "name": "disc320"}});
        merge(&mut base, json!({"mesh": {"kind": "disc", "n": 4}}));
        assert_eq!(base, json!({"mesh": {"kind": "disc", "n": 4}}));
        merge(&mut base, json!({"mesh": {"kind": "disc", "radius": 2.0}}));
        assert_eq!(base, json!({"mesh": {"kind": "disc", "n": 4, "radius": 2.0}}));
    }

    #[test]
    fn merge_overlays_objects() {
        let mut a = json!({"a": {"b": 1, "c": 2}, "d": [1, 2]});
        merge(&mut a, json!({"a": {"c": 3}, "d": [4]}));
        assert_eq!(a, json!({"a": {"b": 1, "c": 3}, "d": [4]}));
    }
}
