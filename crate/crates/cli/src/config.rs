//! Scenario configuration: a single JSON document with an explicit schema
//! version. Unknown fields are rejected. Matrices travel as row-major
//! `[re, im]` pairs.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use loewner_core::bounds::GFunction;
use loewner_core::envelope::SigmoidCombination;
use loewner_core::maps::{PolyMap, Side};
use loewner_core::spectral::HermitianOperator;
use loewner_core::CoreError;
use serde::{Deserialize, Serialize};

use crate::catalog;

pub const SCHEMA_VERSION: u32 = 1;

/// A materialized multivariate scalar function.
pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Top-level scenario document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub kind: ScenarioKind,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tolerances: Tolerancing,
    #[serde(flatten)]
    pub body: ScenarioBody,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    FitEnvelope,
    Certify,
    Wbound,
    Tails,
}

impl ScenarioKind {
    pub fn label(self) -> &'static str {
        match self {
            ScenarioKind::FitEnvelope => "fit-envelope",
            ScenarioKind::Certify => "certify",
            ScenarioKind::Wbound => "wbound",
            ScenarioKind::Tails => "tails",
        }
    }
}

/// Kind-specific payload; exactly one section must be present and it must
/// match `kind`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioBody {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_envelope: Option<FitEnvelopeScenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certify: Option<CertifyScenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wbound: Option<WboundScenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tails: Option<TailsScenario>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerancing {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cert_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub commutator_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side_tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitEnvelopeScenario {
    pub function: FunctionSpec,
    /// Per-axis `[lo, hi]` pairs.
    pub region: Vec<[f64; 2]>,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_per_axis: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_cap: Option<usize>,
    /// Verification grid for the report (defaults to 2x the fit grid).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify_grid: Option<usize>,
    /// Optional paths to save the fitted combinations for later runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub save_lower: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub save_upper: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyScenario {
    pub function: FunctionSpec,
    pub g: GSpec,
    pub region: Vec<[f64; 2]>,
    pub weights: Vec<Vec<f64>>,
    pub operators: OperatorSource,
    #[serde(default)]
    pub map: MapSpec,
    pub envelope: EnvelopeChoice,
    pub bounds: Vec<BoundRequest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_grid: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WboundScenario {
    pub family: Vec<UnivariateSpec>,
    pub g: UnivariateSpec,
    pub interval: [f64; 2],
    pub dim: usize,
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scaling_kappas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domination: Option<DominationSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DominationSpec {
    pub u: f64,
    pub upsilon_g: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailsScenario {
    pub dim: usize,
    pub boxes: Vec<[f64; 2]>,
    pub counts: Vec<usize>,
    #[serde(default = "default_true")]
    pub commuting: bool,
    pub f: TailFunctionConfig,
    pub h: TailFunctionConfig,
    pub g: GSpec,
    pub weights: Vec<Vec<f64>>,
    pub theta: f64,
    pub ell: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    pub statistics: Vec<TailStatisticSpec>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailStatisticSpec {
    Sum,
    Product,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailFunctionConfig {
    pub function: FunctionSpec,
    /// Upper linear envelope `<c, x> + d` dominating the function on the box.
    pub upper_c: Vec<f64>,
    pub upper_d: f64,
}

/// Multivariate scalar function.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionSpec {
    Polynomial { terms: Vec<MonomialSpec> },
    Affine { coeffs: Vec<f64>, offset: f64 },
    ExpSum { beta: Vec<f64>, #[serde(default = "one")] scale: f64 },
    LogSum { beta: Vec<f64>, #[serde(default = "one")] scale: f64 },
    PowerSum { beta: Vec<f64>, q: f64, #[serde(default = "one")] scale: f64 },
    SigmoidFile { path: String },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialSpec {
    pub coeff: f64,
    pub exponents: Vec<u32>,
}

/// Univariate scalar function: a catalog name or explicit 1-D polynomial
/// coefficients (constant term first).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UnivariateSpec {
    Named(String),
    Poly { coeffs: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GSpec {
    Power { beta: Vec<f64>, q: f64 },
    Log { beta: Vec<f64> },
    Exp { beta: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OperatorSource {
    /// Haar-basis sampling with uniform eigenvalues in the per-axis boxes.
    Sampled { dim: usize, counts: Vec<usize>, #[serde(default = "default_true")] commuting: bool },
    /// Explicit matrices per axis.
    Files { axes: Vec<Vec<String>> },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MapSpec {
    /// `Phi(X) = X`.
    #[default]
    Identity,
    /// `Phi(X) = V* X V` with `V` the leading columns of a seeded Haar
    /// unitary.
    SampledIsometry { columns: usize },
    /// Explicit coefficients (exponent -> value) and optional isometry.
    Poly {
        coeffs: BTreeMap<String, f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        isometry: Option<MatrixSpec>,
    },
}

/// Row-major complex matrix: entries are `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvelopeChoice {
    /// Fit sigmoid envelopes to `function` on the box.
    Fit {
        epsilon: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid_per_axis: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_cap: Option<usize>,
    },
    /// Affine sandwich (worked-constant flavor; needs normalized maps).
    Linear { a: Vec<f64>, b: f64, c: Vec<f64>, d: f64 },
    /// Load previously fitted sigmoid combinations.
    Files { lower: String, upper: String, epsilon: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BoundRequest {
    Fundamental { side: SideSpec, comparison: String },
    Affine { side: SideSpec, alpha: f64 },
    Ratio { side: SideSpec, sign: RatioSignSpec },
    Difference { side: SideSpec },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SideSpec {
    Upper,
    Lower,
}

impl From<SideSpec> for Side {
    fn from(s: SideSpec) -> Side {
        match s {
            SideSpec::Upper => Side::Upper,
            SideSpec::Lower => Side::Lower,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RatioSignSpec {
    Positive,
    Negative,
}

/// Configuration-level failure, mapped to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let cfg: ScenarioConfig =
        serde_json::from_str(&text).map_err(|e| ConfigError(e.to_string()))?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(ConfigError(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            cfg.schema_version
        )));
    }
    let sections = [
        cfg.body.fit_envelope.is_some(),
        cfg.body.certify.is_some(),
        cfg.body.wbound.is_some(),
        cfg.body.tails.is_some(),
    ];
    if sections.iter().filter(|&&p| p).count() != 1 {
        return Err(ConfigError("exactly one scenario section must be present".into()));
    }
    let matches = match cfg.kind {
        ScenarioKind::FitEnvelope => cfg.body.fit_envelope.is_some(),
        ScenarioKind::Certify => cfg.body.certify.is_some(),
        ScenarioKind::Wbound => cfg.body.wbound.is_some(),
        ScenarioKind::Tails => cfg.body.tails.is_some(),
    };
    if !matches {
        return Err(ConfigError(format!(
            "kind is `{}` but the matching section is missing",
            cfg.kind.label()
        )));
    }
    Ok(cfg)
}

impl FunctionSpec {
    /// Materialize as an evaluation closure; file-backed functions read their
    /// document now.
    pub fn build(&self, n_vars: usize) -> Result<ScalarField, ConfigError> {
        let arity_err = |have: usize| {
            ConfigError(format!("function arity {have} does not match the {n_vars}-axis box"))
        };
        match self {
            FunctionSpec::Polynomial { terms } => {
                for t in terms {
                    if t.exponents.len() != n_vars {
                        return Err(arity_err(t.exponents.len()));
                    }
                }
                let terms = terms.clone();
                Ok(Arc::new(move |x: &[f64]| {
                    terms
                        .iter()
                        .map(|t| {
                            t.coeff
                                * t.exponents
                                    .iter()
                                    .zip(x)
                                    .map(|(&e, xi)| xi.powi(e as i32))
                                    .product::<f64>()
                        })
                        .sum()
                }))
            }
            FunctionSpec::Affine { coeffs, offset } => {
                if coeffs.len() != n_vars {
                    return Err(arity_err(coeffs.len()));
                }
                let (coeffs, offset) = (coeffs.clone(), *offset);
                Ok(Arc::new(move |x: &[f64]| {
                    offset + coeffs.iter().zip(x).map(|(c, xi)| c * xi).sum::<f64>()
                }))
            }
            FunctionSpec::ExpSum { beta, scale } => {
                if beta.len() != n_vars {
                    return Err(arity_err(beta.len()));
                }
                let (beta, scale) = (beta.clone(), *scale);
                Ok(Arc::new(move |x: &[f64]| {
                    scale * beta.iter().zip(x).map(|(b, xi)| b * xi).sum::<f64>().exp()
                }))
            }
            FunctionSpec::LogSum { beta, scale } => {
                if beta.len() != n_vars {
                    return Err(arity_err(beta.len()));
                }
                let (beta, scale) = (beta.clone(), *scale);
                Ok(Arc::new(move |x: &[f64]| {
                    scale * beta.iter().zip(x).map(|(b, xi)| b * xi).sum::<f64>().ln()
                }))
            }
            FunctionSpec::PowerSum { beta, q, scale } => {
                if beta.len() != n_vars {
                    return Err(arity_err(beta.len()));
                }
                let (beta, q, scale) = (beta.clone(), *q, *scale);
                Ok(Arc::new(move |x: &[f64]| {
                    scale * beta.iter().zip(x).map(|(b, xi)| b * xi).sum::<f64>().powf(q)
                }))
            }
            FunctionSpec::SigmoidFile { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| ConfigError(format!("cannot read {path}: {e}")))?;
                let combo: SigmoidCombination = serde_json::from_str(&text)
                    .map_err(|e| ConfigError(format!("{path}: {e}")))?;
                if combo.n_vars != n_vars {
                    return Err(arity_err(combo.n_vars));
                }
                Ok(Arc::new(move |x: &[f64]| combo.eval_scalar(x).unwrap_or(f64::NAN)))
            }
        }
    }
}

impl UnivariateSpec {
    pub fn build(&self) -> Result<loewner_core::wbound::ScalarFn1, ConfigError> {
        match self {
            UnivariateSpec::Named(name) => catalog::univariate(name).ok_or_else(|| {
                ConfigError(format!(
                    "unknown function `{name}`; nearest catalog match is `{}`",
                    catalog::nearest(name, catalog::UNIVARIATE_NAMES)
                ))
            }),
            UnivariateSpec::Poly { coeffs } => {
                let coeffs = coeffs.clone();
                Ok(loewner_core::wbound::ScalarFn1::new("poly", move |x| {
                    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
                }))
            }
        }
    }
}

impl GSpec {
    pub fn build(&self) -> Result<GFunction, ConfigError> {
        let map_err = |e: CoreError| ConfigError(e.to_string());
        match self {
            GSpec::Power { beta, q } => GFunction::power(beta.clone(), *q).map_err(map_err),
            GSpec::Log { beta } => GFunction::log(beta.clone()).map_err(map_err),
            GSpec::Exp { beta } => GFunction::exp(beta.clone()).map_err(map_err),
        }
    }
}

impl MapSpec {
    pub fn build(&self, dim: usize, seed: u64) -> Result<PolyMap, ConfigError> {
        let map_err = |e: CoreError| ConfigError(e.to_string());
        match self {
            MapSpec::Identity => Ok(PolyMap::identity(dim)),
            MapSpec::SampledIsometry { columns } => {
                PolyMap::sampled_normalized(dim, *columns, seed ^ 0x69736f).map_err(map_err)
            }
            MapSpec::Poly { coeffs, isometry } => {
                let mut parsed = BTreeMap::new();
                for (k, &v) in coeffs {
                    let e: i64 = k
                        .parse()
                        .map_err(|_| ConfigError(format!("bad exponent key `{k}`")))?;
                    parsed.insert(e, v);
                }
                match isometry {
                    Some(m) => {
                        PolyMap::from_row_major_isometry(parsed, m.rows, m.cols, &m.entries)
                            .map_err(map_err)
                    }
                    None => PolyMap::from_row_major_isometry(
                        parsed,
                        dim,
                        dim,
                        &identity_pairs(dim),
                    )
                    .map_err(map_err),
                }
            }
        }
    }
}

fn identity_pairs(dim: usize) -> Vec<[f64; 2]> {
    let mut out = vec![[0.0, 0.0]; dim * dim];
    for i in 0..dim {
        out[i * dim + i] = [1.0, 0.0];
    }
    out
}

/// Parse an operator document: `{ "dim": d, "entries": [[re, im], ...] }`
/// row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorDoc {
    pub dim: usize,
    pub entries: Vec<[f64; 2]>,
}

pub fn load_operator(path: &str) -> Result<HermitianOperator, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {path}: {e}")))?;
    let doc: OperatorDoc =
        serde_json::from_str(&text).map_err(|e| ConfigError(format!("{path}: {e}")))?;
    HermitianOperator::from_row_major_pairs(doc.dim, &doc.entries)
        .map_err(|e| ConfigError(format!("{path}: {e}")))
}
