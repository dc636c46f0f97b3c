//! Experiment configuration: JSON schema, `--set` overrides, validation.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::calderon::ReconMode;
use crate::diffusion::Mode;
use crate::dirichlet::Potential;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    ValidateOp,
    Spectrum,
    Dnmap,
    RungeSweep,
    Invert,
    Extend,
    Diffuse,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::ValidateOp => "validate-op",
            Pipeline::Spectrum => "spectrum",
            Pipeline::Dnmap => "dnmap",
            Pipeline::RungeSweep => "runge-sweep",
            Pipeline::Invert => "invert",
            Pipeline::Extend => "extend",
            Pipeline::Diffuse => "diffuse",
        }
    }
}

/// Built-in potential families, or node values in interior order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Zero,
    Constant { value: f64 },
    Gaussian { amp: f64, center: [f64; 2], width: f64 },
    TwoBump { bumps: [Bump; 2] },
    Values { values: Vec<f64> },
    /// CSV `node,value` (interior index) or JSON `{"<node>": value}`
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub amp: f64,
    pub center: [f64; 2],
    pub width: f64,
}

impl Default for PotentialSpec {
    fn default() -> Self {
        PotentialSpec::Zero
    }
}

impl PotentialSpec {
    pub fn build(&self, grid: &Grid) -> Result<Potential> {
        match self {
            PotentialSpec::Zero => Ok(Potential::zero(grid)),
            PotentialSpec::Constant { value } => Ok(Potential::constant(grid, *value)),
            PotentialSpec::Gaussian { amp, center, width } => Ok(Potential::gaussian(grid, *amp, *center, *width)),
            PotentialSpec::TwoBump { bumps } => {
                let a = Potential::gaussian(grid, bumps[0].amp, bumps[0].center, bumps[0].width);
                let b = Potential::gaussian(grid, bumps[1].amp, bumps[1].center, bumps[1].width);
                Potential::new(grid, a.values + b.values)
            }
            PotentialSpec::Values { values } => Potential::new(grid, DVector::from_vec(values.clone())),
            PotentialSpec::File { path } => Potential::new(grid, read_node_values(path, grid.interior().len())?),
        }
    }
}

fn read_node_values(path: &Path, n: usize) -> Result<DVector<f64>> {
    let mut v = DVector::from_element(n, f64::NAN);
    let mut put = |node: usize, value: f64| -> Result<()> {
        if node >= n {
            return Err(Error::ConfigInvalid(format!("node {node} outside omega ({n} nodes)")));
        }
        v[node] = value;
        Ok(())
    };
    if path.extension().is_some_and(|e| e == "json") {
        let map: std::collections::BTreeMap<String, f64> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        for (k, val) in map {
            let node = k
                .parse()
                .map_err(|_| Error::ConfigInvalid(format!("bad node index `{k}`")))?;
            put(node, val)?;
        }
    } else {
        let mut r = csv::Reader::from_path(path)?;
        for rec in r.deserialize() {
            let (node, value): (usize, f64) = rec?;
            put(node, value)?;
        }
    }
    if v.iter().any(|x| x.is_nan()) {
        return Err(Error::ConfigInvalid(format!("{} does not cover every interior node", path.display())));
    }
    Ok(v)
}

/// Gaussian profile used for test functions and targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    Constant { value: f64 },
    Sign,
    Gaussian { center: [f64; 2], width: f64 },
}

impl ProfileSpec {
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        match *self {
            ProfileSpec::Constant { value } => value,
            ProfileSpec::Sign => {
                if p[0] > 0.0 {
                    1.0
                } else if p[0] < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            ProfileSpec::Gaussian { center, width } => {
                let r2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
                (-r2 / (2.0 * width * width)).exp()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Potentials {
    /// potential of the forward pipelines
    pub q: PotentialSpec,
    pub q_ref: PotentialSpec,
    pub q_true: PotentialSpec,
}

impl Default for Potentials {
    fn default() -> Self {
        Potentials {
            q: PotentialSpec::Zero,
            q_ref: PotentialSpec::Zero,
            q_true: PotentialSpec::Gaussian {
                amp: 0.5,
                center: [0.0, 0.0],
                width: 0.4,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub oracle: f64,
    pub identity: f64,
    pub eig: f64,
    /// final relative Runge residual, if gated
    pub runge: Option<f64>,
    /// RUNGE_FAIL threshold inside the reconstruction, if gated
    pub runge_gate: Option<f64>,
    /// relative reconstruction error, if gated
    pub reconstruction: Option<f64>,
    pub extension: f64,
    pub heat: f64,
    pub semigroup: f64,
    /// allowed deviation of the Richardson ratio from 2
    pub richardson: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            oracle: 5e-3,
            identity: 1e-10,
            eig: 1e-8,
            runge: None,
            runge_gate: None,
            reconstruction: None,
            extension: 5e-3,
            heat: 1e-6,
            semigroup: 1e-12,
            richardson: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateParams {
    pub bumps: usize,
    pub pad: usize,
    pub width: [f64; 2],
    pub export_matrix: bool,
}

impl Default for ValidateParams {
    fn default() -> Self {
        ValidateParams {
            bumps: 10,
            pad: 8,
            width: [0.1, 0.25],
            export_matrix: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DnParams {
    pub source: String,
    pub target: String,
}

impl Default for DnParams {
    fn default() -> Self {
        DnParams {
            source: "W1".into(),
            target: "W2".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RungeParams {
    pub window: String,
    pub target: ProfileSpec,
    /// default: `1e-2 .. 1e-12`, 11 points
    pub alphas: Option<Vec<f64>>,
}

impl Default for RungeParams {
    fn default() -> Self {
        RungeParams {
            window: "W1".into(),
            target: ProfileSpec::Constant { value: 1.0 },
            alphas: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InvertParams {
    pub source: String,
    pub target: String,
    pub sigma: f64,
    pub mode: ReconMode,
    pub alpha: f64,
    pub max_iter: usize,
}

impl Default for InvertParams {
    fn default() -> Self {
        InvertParams {
            source: "W1".into(),
            target: "W2".into(),
            sigma: 0.0,
            mode: ReconMode::Pairs,
            alpha: 1e-6,
            max_iter: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtendParams {
    pub u: ProfileSpec,
    pub levels: usize,
    pub pad: usize,
}

impl Default for ExtendParams {
    fn default() -> Self {
        ExtendParams {
            u: ProfileSpec::Gaussian {
                center: [0.0, 0.0],
                width: 0.2,
            },
            levels: 4,
            pad: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffuseParams {
    pub mode: Mode,
    /// exterior data in clamped mode, sampled on the exterior support
    pub exterior: ProfileSpec,
    pub times: Vec<f64>,
    pub heat_t: f64,
    pub heat_pad: usize,
}

impl Default for DiffuseParams {
    fn default() -> Self {
        DiffuseParams {
            mode: Mode::Clamped,
            exterior: ProfileSpec::Gaussian {
                center: [1.5, 0.0],
                width: 0.1,
            },
            times: vec![0.1, 1.0, 10.0],
            heat_t: 0.5,
            heat_pad: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub pipeline: Option<Pipeline>,
    pub grid: GridSpec,
    pub s: f64,
    #[serde(default)]
    pub potentials: Potentials,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub validate: ValidateParams,
    #[serde(default)]
    pub dnmap: DnParams,
    #[serde(default)]
    pub runge: RungeParams,
    #[serde(default)]
    pub invert: InvertParams,
    #[serde(default)]
    pub extend: ExtendParams,
    #[serde(default)]
    pub diffuse: DiffuseParams,
}

impl ExperimentConfig {
    /// Parses JSON text, applies `key=value` overrides, then validates.
    pub fn from_json(text: &str, overrides: &[String]) -> Result<Self> {
        let mut v: Value = serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(format!("parse: {e}")))?;
        for o in overrides {
            apply_override(&mut v, o)?;
        }
        let cfg: ExperimentConfig =
            serde_json::from_value(v).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ConfigInvalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return bad(format!("s = {} outside (0, 1)", self.s));
        }
        if self.output_dir.as_os_str().is_empty() {
            return bad("output_dir is empty".into());
        }
        let v = &self.validate;
        if v.pad < 4 || v.bumps == 0 || !(v.width[0] > 0.0 && v.width[0] < v.width[1]) {
            return bad("validate: need pad >= 4, bumps >= 1, 0 < width[0] < width[1]".into());
        }
        if let Some(a) = &self.runge.alphas {
            if a.is_empty() || a.iter().any(|x| !(*x >= 0.0)) {
                return bad("runge.alphas must be nonempty and >= 0".into());
            }
        }
        if !(self.invert.sigma >= 0.0) || !(self.invert.alpha >= 0.0) {
            return bad("invert: sigma and alpha must be >= 0".into());
        }
        if self.extend.levels < 3 || self.extend.pad < 4 {
            return bad("extend: need levels >= 3 and pad >= 4".into());
        }
        if self.diffuse.times.iter().any(|t| !(*t >= 0.0)) || !(self.diffuse.heat_t > 0.0) || self.diffuse.heat_pad < 4 {
            return bad("diffuse: times >= 0, heat_t > 0, heat_pad >= 4".into());
        }
        Ok(())
    }

    /// Canonical JSON (sorted keys) used for hashing.
    pub fn canonical_json(&self) -> Result<String> {
        let v = serde_json::to_value(self)?;
        Ok(serde_json::to_string(&sort_keys(v))?)
    }
}

fn sort_keys(v: Value) -> Value {
    match v {
        Value::Object(m) => {
            let sorted: std::collections::BTreeMap<String, Value> =
                m.into_iter().map(|(k, v)| (k, sort_keys(v))).collect();
            Value::Object(sorted.into_iter().collect())
        }
        Value::Array(a) => Value::Array(a.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

/// `a.b.c=value`; the value is parsed as JSON, falling back to a string.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::ConfigInvalid(format!("override `{spec}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        if key.is_empty() {
            return Err(Error::ConfigInvalid(format!("empty key in `{path}`")));
        }
        let last = i + 1 == keys.len();
        cur = match cur {
            Value::Object(m) => {
                if last {
                    m.insert(key.to_string(), value);
                    return Ok(());
                }
                m.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(a) => {
                let idx: usize = key
                    .parse()
                    .map_err(|_| Error::ConfigInvalid(format!("`{key}` indexes an array")))?;
                let slot = a
                    .get_mut(idx)
                    .ok_or_else(|| Error::ConfigInvalid(format!("index {idx} out of range in `{path}`")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(Error::ConfigInvalid(format!("`{path}` descends into a scalar"))),
        };
    }
    Ok(())
}
