//! Weighted map-sums over multi-indices, extremal scalar constants by box
//! optimization, and the four certificate builders (fundamental, affine,
//! ratio, difference).
//!
//! A certificate is an inequality instance made concrete: both operators, the
//! scalar constant with its optimization provenance, and the Loewner witness
//! (minimum eigenvalue of the slack). Extremal constants are numerical grid
//! estimates, never rigorous suprema; the witness is the acceptance signal.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envelope::{EnvelopePair, LinearEnvelope};
use crate::error::{CoreError, Result};
use crate::exec::map_indexed;
use crate::maps::{
    apply_polymap, build_poly_bound_operator, scalar_poly_range_from_values, PolyMap, RangeStyle,
    Side, SpectrumRange,
};
use crate::spectral::{
    apply_scalar_function, eigh, loewner_leq, multivariate_operator_function, HermitianOperator,
    IntervalBox, OperatorTuple,
};

/// Per-axis probability vectors; multi-index weights are their products.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightGrid {
    axis_weights: Vec<Vec<f64>>,
}

impl WeightGrid {
    pub fn new(axis_weights: Vec<Vec<f64>>) -> Result<Self> {
        if axis_weights.is_empty() {
            return Err(CoreError::Invalid("need at least one weight axis".into()));
        }
        for (i, w) in axis_weights.iter().enumerate() {
            if w.is_empty() {
                return Err(CoreError::Invalid(format!("axis {i} has no weights")));
            }
            if w.iter().any(|&x| x < 0.0 || !x.is_finite()) {
                return Err(CoreError::Invalid(format!("axis {i} has negative weights")));
            }
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(CoreError::Invalid(format!(
                    "axis {i} weights sum to {sum}, expected 1 within 1e-12"
                )));
            }
        }
        Ok(WeightGrid { axis_weights })
    }

    /// Uniform weights `1/k_i` per axis.
    pub fn uniform(counts: &[usize]) -> Result<Self> {
        Self::new(counts.iter().map(|&k| vec![1.0 / k as f64; k]).collect())
    }

    pub fn n_axes(&self) -> usize {
        self.axis_weights.len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.axis_weights.iter().map(|w| w.len()).collect()
    }

    pub fn axis(&self, i: usize) -> &[f64] {
        &self.axis_weights[i]
    }

    /// `w_{1,j_1} * ... * w_{n,j_n}`.
    pub fn product_weight(&self, multi: &[usize]) -> f64 {
        self.axis_weights.iter().zip(multi).map(|(w, &j)| w[j]).product()
    }
}

/// All multi-indices of the given shape in row-major order.
pub fn multi_indices(counts: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = counts.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; counts.len()];
    for _ in 0..total {
        out.push(idx.clone());
        for ax in (0..counts.len()).rev() {
            idx[ax] += 1;
            if idx[ax] < counts[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
    out
}

/// Per-axis lists of Hermitian operators with spectra inside per-axis boxes.
#[derive(Debug, Clone)]
pub struct OperatorFamily {
    axes: Vec<Vec<HermitianOperator>>,
    region: IntervalBox,
    commuting: bool,
    worst_commutator: f64,
}

impl OperatorFamily {
    /// Check uniform dimension, spectrum containment (within
    /// `spectrum_tol`), and measure whether the whole family commutes
    /// (pairwise commutator norms within `commutator_tol * scale`).
    pub fn new(
        axes: Vec<Vec<HermitianOperator>>,
        region: IntervalBox,
        spectrum_tol: f64,
        commutator_tol: f64,
    ) -> Result<Self> {
        if axes.len() != region.n_axes() {
            return Err(CoreError::DimensionMismatch {
                left: axes.len(),
                right: region.n_axes(),
                context: "family axes vs box axes".into(),
            });
        }
        if axes.iter().any(|a| a.is_empty()) {
            return Err(CoreError::Invalid("every axis needs at least one operator".into()));
        }
        let dim = axes[0][0].dim();
        for (i, axis) in axes.iter().enumerate() {
            let (lo, hi) = region.axis(i);
            for (j, op) in axis.iter().enumerate() {
                if op.dim() != dim {
                    return Err(CoreError::DimensionMismatch {
                        left: op.dim(),
                        right: dim,
                        context: format!("family operator ({i},{j})"),
                    });
                }
                let dec = eigh(op);
                if dec.min_eig() < lo - spectrum_tol || dec.max_eig() > hi + spectrum_tol {
                    return Err(CoreError::OutOfRange(format!(
                        "operator ({i},{j}) spectrum [{:.6}, {:.6}] escapes [{lo}, {hi}]",
                        dec.min_eig(),
                        dec.max_eig()
                    )));
                }
            }
        }
        let all: Vec<&HermitianOperator> = axes.iter().flatten().collect();
        let scale = all.iter().map(|o| o.frob_norm()).fold(1.0, f64::max);
        let mut worst: f64 = 0.0;
        for i in 0..all.len() {
            for j in (i + 1)..all.len() {
                let ab = all[i].matrix() * all[j].matrix();
                let ba = all[j].matrix() * all[i].matrix();
                worst = worst.max((ab - ba).norm());
            }
        }
        Ok(OperatorFamily {
            axes,
            region,
            commuting: worst <= commutator_tol * scale,
            worst_commutator: worst,
        })
    }

    pub fn n_axes(&self) -> usize {
        self.axes.len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len()).collect()
    }

    pub fn dim(&self) -> usize {
        self.axes[0][0].dim()
    }

    pub fn operator(&self, axis: usize, idx: usize) -> &HermitianOperator {
        &self.axes[axis][idx]
    }

    pub fn region(&self) -> &IntervalBox {
        &self.region
    }

    pub fn commuting(&self) -> bool {
        self.commuting
    }

    pub fn worst_commutator(&self) -> f64 {
        self.worst_commutator
    }

    /// The mixed tuple `(A^{(1)}_{j_1}, ..., A^{(n)}_{j_n})`.
    pub fn tuple(&self, multi: &[usize]) -> Result<OperatorTuple> {
        OperatorTuple::new(
            multi.iter().enumerate().map(|(ax, &j)| self.axes[ax][j].clone()).collect(),
        )
    }
}

/// One polynomial map shared by all multi-indices, or one per multi-index
/// (row-major order).
#[derive(Debug, Clone)]
pub enum MapAssignment {
    Shared(PolyMap),
    PerIndex(Vec<PolyMap>),
}

impl MapAssignment {
    pub fn get(&self, flat: usize) -> &PolyMap {
        match self {
            MapAssignment::Shared(m) => m,
            MapAssignment::PerIndex(v) => &v[flat],
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            MapAssignment::Shared(m) => m.output_dim(),
            MapAssignment::PerIndex(v) => v[0].output_dim(),
        }
    }

    pub fn all_normalized(&self) -> bool {
        match self {
            MapAssignment::Shared(m) => m.is_normalized(),
            MapAssignment::PerIndex(v) => v.iter().all(|m| m.is_normalized()),
        }
    }

    fn validate(&self, input_dim: usize, count: usize) -> Result<()> {
        let check = |m: &PolyMap| -> Result<()> {
            if m.input_dim() != input_dim {
                return Err(CoreError::DimensionMismatch {
                    left: m.input_dim(),
                    right: input_dim,
                    context: "map input dimension vs family".into(),
                });
            }
            Ok(())
        };
        match self {
            MapAssignment::Shared(m) => check(m),
            MapAssignment::PerIndex(v) => {
                if v.len() != count {
                    return Err(CoreError::DimensionMismatch {
                        left: v.len(),
                        right: count,
                        context: "per-index map count vs multi-index count".into(),
                    });
                }
                let k = v[0].output_dim();
                for m in v {
                    check(m)?;
                    if m.output_dim() != k {
                        return Err(CoreError::DimensionMismatch {
                            left: m.output_dim(),
                            right: k,
                            context: "map output dimensions differ".into(),
                        });
                    }
                }
                Ok(())
            }
        }
    }
}

/// The right-hand-side comparison function `g`.
#[derive(Clone)]
pub enum GFunction {
    /// `(sum beta_i x_i)^q`, `beta_i >= 0`.
    Power { beta: Vec<f64>, q: f64 },
    /// `log(sum beta_i x_i)`, `beta_i >= 0`, positive argument.
    Log { beta: Vec<f64> },
    /// `exp(sum beta_i x_i)`.
    Exp { beta: Vec<f64> },
    /// Arbitrary scalar function; operator evaluation requires commuting
    /// arguments.
    Custom {
        name: String,
        arity: usize,
        f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    },
}

impl std::fmt::Debug for GFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

impl GFunction {
    pub fn power(beta: Vec<f64>, q: f64) -> Result<Self> {
        Self::check_beta(&beta, true)?;
        if !q.is_finite() {
            return Err(CoreError::Invalid("power exponent must be finite".into()));
        }
        Ok(GFunction::Power { beta, q })
    }

    pub fn log(beta: Vec<f64>) -> Result<Self> {
        Self::check_beta(&beta, true)?;
        Ok(GFunction::Log { beta })
    }

    pub fn exp(beta: Vec<f64>) -> Result<Self> {
        Self::check_beta(&beta, false)?;
        Ok(GFunction::Exp { beta })
    }

    fn check_beta(beta: &[f64], nonneg: bool) -> Result<()> {
        if beta.is_empty() {
            return Err(CoreError::Invalid("beta must not be empty".into()));
        }
        if beta.iter().any(|b| !b.is_finite()) || (nonneg && beta.iter().any(|&b| b < 0.0)) {
            return Err(CoreError::Invalid("beta coefficients invalid".into()));
        }
        Ok(())
    }

    pub fn arity(&self) -> usize {
        match self {
            GFunction::Power { beta, .. } | GFunction::Log { beta } | GFunction::Exp { beta } => {
                beta.len()
            }
            GFunction::Custom { arity, .. } => *arity,
        }
    }

    pub fn label(&self) -> String {
        match self {
            GFunction::Power { q, .. } => format!("power(q={q})"),
            GFunction::Log { .. } => "log".into(),
            GFunction::Exp { .. } => "exp".into(),
            GFunction::Custom { name, .. } => format!("custom({name})"),
        }
    }

    fn scalar_of_sum(&self, s: f64) -> Result<f64> {
        match self {
            GFunction::Power { q, .. } => {
                let int_q = (*q == q.trunc()) && q.abs() < 1e9;
                if int_q && *q >= 0.0 {
                    Ok(s.powi(*q as i32))
                } else if s > 0.0 {
                    Ok(s.powf(*q))
                } else {
                    Err(CoreError::Domain {
                        eigenvalue: s,
                        detail: format!("power(q={q}) needs a positive argument"),
                    })
                }
            }
            GFunction::Log { .. } => {
                if s > 0.0 {
                    Ok(s.ln())
                } else {
                    Err(CoreError::Domain {
                        eigenvalue: s,
                        detail: "log needs a positive argument".into(),
                    })
                }
            }
            GFunction::Exp { .. } => Ok(s.exp()),
            GFunction::Custom { .. } => unreachable!("custom g has no inner sum"),
        }
    }

    pub fn eval_scalar(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.arity() {
            return Err(CoreError::DimensionMismatch {
                left: x.len(),
                right: self.arity(),
                context: "g arity".into(),
            });
        }
        match self {
            GFunction::Custom { f, .. } => {
                let v = f(x);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(CoreError::Domain {
                        eigenvalue: x[0],
                        detail: format!("custom g not finite at {x:?}"),
                    })
                }
            }
            GFunction::Power { beta, .. } | GFunction::Log { beta } | GFunction::Exp { beta } => {
                let s: f64 = beta.iter().zip(x).map(|(b, xi)| b * xi).sum();
                self.scalar_of_sum(s)
            }
        }
    }

    /// `g` of an operator tuple. The built-in kinds reduce to single-variable
    /// spectral calculus of `S = sum beta_i V_i`; custom kinds need a
    /// commuting argument tuple.
    pub fn eval_operator(
        &self,
        args: &[HermitianOperator],
        commutator_tol: f64,
    ) -> Result<HermitianOperator> {
        if args.len() != self.arity() {
            return Err(CoreError::DimensionMismatch {
                left: args.len(),
                right: self.arity(),
                context: "g operator arity".into(),
            });
        }
        match self {
            GFunction::Custom { f, .. } => {
                let tuple = OperatorTuple::new(args.to_vec())?;
                multivariate_operator_function(|x| f(x), &tuple, commutator_tol)
            }
            GFunction::Power { beta, .. } | GFunction::Log { beta } | GFunction::Exp { beta } => {
                let dim = args[0].dim();
                let mut s = DMatrix::<Complex64>::zeros(dim, dim);
                for (b, v) in beta.iter().zip(args) {
                    if v.dim() != dim {
                        return Err(CoreError::DimensionMismatch {
                            left: v.dim(),
                            right: dim,
                            context: "g argument dimensions".into(),
                        });
                    }
                    s += v.matrix().scale(*b);
                }
                let s = HermitianOperator::symmetrized(s);
                let dec = eigh(&s);
                let mut values = Vec::with_capacity(dim);
                for &l in dec.eigenvalues.iter() {
                    values.push(self.scalar_of_sum(l)?);
                }
                Ok(dec.assemble(&values))
            }
        }
    }
}

/// What a weighted map-sum ranges over.
pub enum PhiSumExpr<'a> {
    /// `sum_j w_j Phi_j(f(A_{j_1}, ..., A_{j_n}))`; every tuple must commute.
    FOfTuple(&'a (dyn Fn(&[f64]) -> f64 + Sync)),
    /// `sum_j w_j Phi_j(f(A_{j_axis}, ..., A_{j_axis}))` - the axis operator
    /// repeated in every slot, so only univariate calculus is needed.
    RepeatedTuple {
        axis: usize,
        f: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    },
    /// `sum_j w_j Phi_j(A_{j_axis})`.
    RawAxis(usize),
}

/// Exact finite sum over all multi-indices `j in [k_1] x ... x [k_n]`.
pub fn weighted_phi_sum(
    expr: &PhiSumExpr<'_>,
    family: &OperatorFamily,
    maps: &MapAssignment,
    weights: &WeightGrid,
    commutator_tol: f64,
) -> Result<HermitianOperator> {
    let counts = family.counts();
    if weights.counts() != counts {
        return Err(CoreError::DimensionMismatch {
            left: weights.n_axes(),
            right: family.n_axes(),
            context: "weights vs family shape".into(),
        });
    }
    let indices = multi_indices(&counts);
    maps.validate(family.dim(), indices.len())?;
    if let PhiSumExpr::FOfTuple(_) = expr {
        if !family.commuting() {
            return Err(CoreError::NonCommuting {
                i: 0,
                j: 0,
                norm: family.worst_commutator(),
                tol: commutator_tol,
            });
        }
    }
    let n = family.n_axes();
    let mut acc = HermitianOperator::zeros(maps.output_dim());
    for (flat, multi) in indices.iter().enumerate() {
        let map = maps.get(flat);
        let w = weights.product_weight(multi);
        let inner = match expr {
            PhiSumExpr::FOfTuple(f) => {
                let tuple = family.tuple(multi)?;
                multivariate_operator_function(|x| f(x), &tuple, commutator_tol)?
            }
            PhiSumExpr::RepeatedTuple { axis, f } => {
                let op = family.operator(*axis, multi[*axis]);
                apply_scalar_function(op, |l| f(&vec![l; n]))?
            }
            PhiSumExpr::RawAxis(axis) => family.operator(*axis, multi[*axis]).clone(),
        };
        acc = acc.add(&apply_polymap(map, &inner)?.scale(w))?;
    }
    Ok(acc)
}

/// Direction of a box extremization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremalMode {
    Max,
    Min,
}

#[derive(Debug, Clone)]
pub struct Extremum {
    pub value: f64,
    pub argpoint: Vec<f64>,
    pub provenance: String,
}

#[derive(Debug, Clone)]
pub struct OptimizeConfig {
    pub grid_per_axis: usize,
    pub total_cap: usize,
    pub polish_starts: usize,
    pub polish_sweeps: usize,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            grid_per_axis: 64,
            total_cap: 1 << 18,
            polish_starts: 5,
            polish_sweeps: 60,
        }
    }
}

/// Dense grid scan plus deterministic coordinate-descent polish from the best
/// grid points. Ties break toward the lowest flat grid index. The result is a
/// numerical (non-rigorous) extremum.
pub fn box_optimize<H>(
    h: H,
    domains: &[SpectrumRange],
    mode: ExtremalMode,
    cfg: &OptimizeConfig,
) -> Result<Extremum>
where
    H: Fn(&[f64]) -> f64 + Sync,
{
    if domains.is_empty() {
        return Err(CoreError::Invalid("box_optimize needs at least one axis".into()));
    }
    let bounds: Vec<(f64, f64)> = domains.iter().map(|r| r.padded()).collect();
    let n_axes = bounds.len();
    let res = {
        let mut p = cfg.grid_per_axis.max(2);
        while p > 2 && (p as u128).pow(n_axes as u32) > cfg.total_cap as u128 {
            p -= 1;
        }
        p
    };
    let total: usize = (0..n_axes).map(|_| res).product();
    let point_of = |mut idx: usize| -> Vec<f64> {
        let mut coords = vec![0usize; n_axes];
        for ax in (0..n_axes).rev() {
            coords[ax] = idx % res;
            idx /= res;
        }
        coords
            .iter()
            .zip(&bounds)
            .map(|(&k, &(lo, hi))| {
                if hi <= lo {
                    lo
                } else {
                    lo + (hi - lo) * (k as f64) / ((res - 1) as f64)
                }
            })
            .collect()
    };

    let sign = match mode {
        ExtremalMode::Max => 1.0,
        ExtremalMode::Min => -1.0,
    };
    let values: Vec<f64> = map_indexed(total, |i| sign * h(&point_of(i)));
    if let Some(k) = values.iter().position(|v| v.is_nan()) {
        return Err(CoreError::Domain {
            eigenvalue: point_of(k)[0],
            detail: format!("objective undefined at grid point {:?}", point_of(k)),
        });
    }

    // Best-first start list, ties by lowest flat index.
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap().then(a.cmp(&b)));
    let starts = order.iter().take(cfg.polish_starts.max(1));

    let eval = |x: &[f64]| sign * h(x);
    let mut best_val = f64::NEG_INFINITY;
    let mut best_point = point_of(order[0]);
    for &s in starts {
        let mut x = point_of(s);
        let mut v = values[s];
        let mut radius: Vec<f64> = bounds
            .iter()
            .map(|&(lo, hi)| if hi > lo { (hi - lo) / ((res - 1) as f64) } else { 0.0 })
            .collect();
        for _sweep in 0..cfg.polish_sweeps {
            let mut improved = false;
            for ax in 0..n_axes {
                if radius[ax] == 0.0 {
                    continue;
                }
                for step in [-1.0, -0.5, 0.5, 1.0] {
                    let mut cand = x.clone();
                    cand[ax] =
                        (x[ax] + step * radius[ax]).clamp(bounds[ax].0, bounds[ax].1);
                    let cv = eval(&cand);
                    if cv > v {
                        v = cv;
                        x = cand;
                        improved = true;
                    }
                }
            }
            if !improved {
                let max_r = radius.iter().cloned().fold(0.0, f64::max);
                if max_r < 1e-14 {
                    break;
                }
                for r in radius.iter_mut() {
                    *r *= 0.5;
                }
            }
        }
        if v > best_val {
            best_val = v;
            best_point = x;
        }
    }

    Ok(Extremum {
        value: sign * best_val,
        argpoint: best_point,
        provenance: format!(
            "grid {res}^{n_axes} ({total} points) + coordinate descent from {} starts, {} sweeps; numerical extremum, not a rigorous bound",
            cfg.polish_starts, cfg.polish_sweeps
        ),
    })
}

/// Envelope flavor a certificate is built from.
#[derive(Debug, Clone)]
pub enum EnvelopeSpec {
    /// Sigmoid pair: arguments are Kantorovich-corrected bound operators and
    /// constants scan their grid-estimated spectrum ranges.
    Sigmoid(EnvelopePair),
    /// Affine sandwich with normalized maps: arguments are raw weighted map
    /// sums and constants scan the original box (the worked-constant form).
    Linear(LinearEnvelope),
}

#[derive(Debug, Clone)]
pub struct CertConfig {
    pub cert_tol: f64,
    /// Grid used for scalar spectrum ranges.
    pub range_grid: usize,
    pub commutator_tol: f64,
    pub optimize: OptimizeConfig,
}

impl Default for CertConfig {
    fn default() -> Self {
        CertConfig {
            cert_tol: 1e-8,
            range_grid: 64,
            commutator_tol: 1e-8,
            optimize: OptimizeConfig::default(),
        }
    }
}

/// Everything a certificate builder needs.
pub struct CertScenario<'a> {
    pub family: &'a OperatorFamily,
    pub weights: &'a WeightGrid,
    pub maps: &'a MapAssignment,
    pub f: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    pub envelope: &'a EnvelopeSpec,
    pub g: &'a GFunction,
    pub cfg: CertConfig,
}

/// Sign case of a ratio certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RatioSign {
    /// `g(args) > 0`.
    Positive,
    /// `g(args) < 0`.
    Negative,
}

/// A fully materialized inequality instance.
#[derive(Debug, Clone)]
pub struct BoundCertificate {
    pub inequality_id: String,
    pub side: Side,
    pub lhs: HermitianOperator,
    pub rhs: HermitianOperator,
    pub constant: f64,
    pub constant_provenance: String,
    pub witness: f64,
    pub holds: bool,
    pub ranges_used: Vec<SpectrumRange>,
    /// `g` evaluated on the certificate's arguments, kept for bound algebra.
    pub g_operator: Option<HermitianOperator>,
    pub notes: Vec<String>,
}

impl BoundCertificate {
    #[allow(clippy::too_many_arguments)]
    fn finish(
        inequality_id: String,
        side: Side,
        lhs: HermitianOperator,
        rhs: HermitianOperator,
        constant: f64,
        constant_provenance: String,
        ranges_used: Vec<SpectrumRange>,
        g_operator: Option<HermitianOperator>,
        notes: Vec<String>,
        cert_tol: f64,
    ) -> Result<Self> {
        let check = match side {
            Side::Upper => loewner_leq(&lhs, &rhs, cert_tol)?,
            Side::Lower => loewner_leq(&rhs, &lhs, cert_tol)?,
        };
        Ok(BoundCertificate {
            inequality_id,
            side,
            lhs,
            rhs,
            constant,
            constant_provenance,
            witness: check.witness,
            holds: check.holds,
            ranges_used,
            g_operator,
            notes,
        })
    }
}

struct Assembled {
    /// `sum_j w_j Phi_j(f(tuple_j))`.
    weighted_f_sum: HermitianOperator,
    /// The n side-dependent arguments handed to `g`.
    g_args: Vec<HermitianOperator>,
    /// Scan domain for the `x` variable (None in the linear flavor, where the
    /// scan runs over the original box and `x` is the envelope value).
    u_range: Option<SpectrumRange>,
    /// Scan domains for the `g` variables.
    v_ranges: Vec<SpectrumRange>,
    notes: Vec<String>,
    linear: Option<LinearEnvelope>,
}

fn validate_scenario(scn: &CertScenario<'_>) -> Result<()> {
    let n = scn.family.n_axes();
    if scn.weights.counts() != scn.family.counts() {
        return Err(CoreError::DimensionMismatch {
            left: scn.weights.n_axes(),
            right: n,
            context: "weights vs family".into(),
        });
    }
    if scn.g.arity() != n {
        return Err(CoreError::DimensionMismatch {
            left: scn.g.arity(),
            right: n,
            context: "g arity vs family axes".into(),
        });
    }
    match scn.envelope {
        EnvelopeSpec::Sigmoid(pair) => {
            if pair.upper.n_vars != n {
                return Err(CoreError::DimensionMismatch {
                    left: pair.upper.n_vars,
                    right: n,
                    context: "envelope arity vs family axes".into(),
                });
            }
        }
        EnvelopeSpec::Linear(env) => {
            if env.n_vars() != n {
                return Err(CoreError::DimensionMismatch {
                    left: env.n_vars(),
                    right: n,
                    context: "linear envelope arity vs family axes".into(),
                });
            }
            if !scn.maps.all_normalized() {
                return Err(CoreError::Invalid(
                    "linear-envelope certificates need normalized maps (a_1 = 1)".into(),
                ));
            }
        }
    }
    Ok(())
}

fn assemble(scn: &CertScenario<'_>, side: Side) -> Result<Assembled> {
    validate_scenario(scn)?;
    let counts = scn.family.counts();
    let indices = multi_indices(&counts);
    scn.maps.validate(scn.family.dim(), indices.len())?;
    let weighted_f_sum = weighted_phi_sum(
        &PhiSumExpr::FOfTuple(scn.f),
        scn.family,
        scn.maps,
        scn.weights,
        scn.cfg.commutator_tol,
    )?;

    match scn.envelope {
        EnvelopeSpec::Linear(env) => {
            let mut g_args = Vec::with_capacity(scn.family.n_axes());
            for axis in 0..scn.family.n_axes() {
                g_args.push(weighted_phi_sum(
                    &PhiSumExpr::RawAxis(axis),
                    scn.family,
                    scn.maps,
                    scn.weights,
                    scn.cfg.commutator_tol,
                )?);
            }
            let v_ranges = scn
                .family
                .region()
                .intervals()
                .iter()
                .map(|&(lo, hi)| SpectrumRange { lo, hi, padding: 0.0 })
                .collect();
            Ok(Assembled {
                weighted_f_sum,
                g_args,
                u_range: None,
                v_ranges,
                notes: vec!["constants from the coupled scan of the linear envelope over the original box".into()],
                linear: Some(env.clone()),
            })
        }
        EnvelopeSpec::Sigmoid(pair) => {
            let region = scn.family.region();
            let grid = scn.cfg.range_grid;

            // Envelope values over the full box, reused for every map.
            let (full_lo, full_up) = crate::maps::envelope_grid_values(pair, region, grid)?;
            let mut u_range = SpectrumRange::zero();
            for (flat, multi) in indices.iter().enumerate() {
                let w = scn.weights.product_weight(multi);
                let r = scalar_poly_range_from_values(
                    side,
                    scn.maps.get(flat),
                    &full_lo,
                    &full_up,
                    RangeStyle::FactorHull,
                )?;
                u_range = u_range.add(&r.scale(w));
            }

            // Per-axis repeated-tuple arguments and their diagonal ranges.
            let mut g_args = Vec::with_capacity(scn.family.n_axes());
            let mut v_ranges = Vec::with_capacity(scn.family.n_axes());
            for axis in 0..scn.family.n_axes() {
                let interval = region.axis(axis);
                let diag_pair = pair.restrict_diagonal(interval)?;
                let diag_region = IntervalBox::new(vec![interval])?;
                let (diag_lo, diag_up) =
                    crate::maps::envelope_grid_values(&diag_pair, &diag_region, grid)?;

                let mut arg = HermitianOperator::zeros(scn.maps.output_dim());
                let mut range = SpectrumRange::zero();
                for (flat, multi) in indices.iter().enumerate() {
                    let map = scn.maps.get(flat);
                    let w = scn.weights.product_weight(multi);
                    let op = scn.family.operator(axis, multi[axis]).clone();
                    let tuple = OperatorTuple::new(vec![op])?;
                    let bound = build_poly_bound_operator(side, map, &diag_pair, &tuple)?;
                    arg = arg.add(&bound.scale(w))?;
                    let r = scalar_poly_range_from_values(
                        side,
                        map,
                        &diag_lo,
                        &diag_up,
                        RangeStyle::FactorHull,
                    )?;
                    range = range.add(&r.scale(w));
                }
                g_args.push(arg);
                v_ranges.push(range);
            }
            Ok(Assembled {
                weighted_f_sum,
                g_args,
                u_range: Some(u_range),
                v_ranges,
                notes: vec![
                    "g-arguments sum bound operators of each axis operator repeated across all function slots".into(),
                    "spectrum ranges are grid-estimated (factor hull) and padded".into(),
                ],
                linear: None,
            })
        }
    }
}

/// Extremize `combine(x, g(v))` over the scenario's scan domains.
fn extremal_constant(
    scn: &CertScenario<'_>,
    asm: &Assembled,
    side: Side,
    mode: ExtremalMode,
    combine: &(dyn Fn(f64, f64) -> f64 + Sync),
    needs_g: bool,
) -> Result<Extremum> {
    let g = scn.g;
    match &asm.linear {
        Some(env) => {
            let domains = asm.v_ranges.clone();
            let env = env.clone();
            let h = move |x: &[f64]| -> f64 {
                let u = match side {
                    Side::Upper => env.upper_at(x),
                    Side::Lower => env.lower_at(x),
                };
                let gv = if needs_g {
                    match g.eval_scalar(x) {
                        Ok(v) => v,
                        Err(_) => return f64::NAN,
                    }
                } else {
                    0.0
                };
                combine(u, gv)
            };
            box_optimize(h, &domains, mode, &scn.cfg.optimize)
        }
        None => {
            let mut domains = vec![asm.u_range.unwrap()];
            domains.extend(asm.v_ranges.iter().cloned());
            let h = move |z: &[f64]| -> f64 {
                let gv = if needs_g {
                    match g.eval_scalar(&z[1..]) {
                        Ok(v) => v,
                        Err(_) => return f64::NAN,
                    }
                } else {
                    0.0
                };
                combine(z[0], gv)
            };
            box_optimize(h, &domains, mode, &scn.cfg.optimize)
        }
    }
}

fn ranges_for_report(asm: &Assembled) -> Vec<SpectrumRange> {
    let mut out = Vec::new();
    if let Some(r) = asm.u_range {
        out.push(r);
    }
    out.extend(asm.v_ranges.iter().cloned());
    out
}

/// Certificate for a general comparison function `F(u, v)` that is monotone
/// nondecreasing in `u`. The operator-side evaluation `F(U, g(V))` uses joint
/// spectral calculus, so `U` and `g(V)` must commute.
pub fn fundamental_bound(
    scn: &CertScenario<'_>,
    side: Side,
    f_uv: &(dyn Fn(f64, f64) -> f64 + Sync),
    f_label: &str,
) -> Result<BoundCertificate> {
    let asm = assemble(scn, side)?;
    let g_op = scn.g.eval_operator(&asm.g_args, scn.cfg.commutator_tol)?;

    sampled_monotonicity_check(&asm, scn, f_uv)?;

    let mode = match side {
        Side::Upper => ExtremalMode::Max,
        Side::Lower => ExtremalMode::Min,
    };
    let ext = extremal_constant(scn, &asm, side, mode, &|u, v| f_uv(u, v), true)?;

    // Left side: F applied jointly to the two (commuting) operators.
    let pair = OperatorTuple::new(vec![asm.weighted_f_sum.clone(), g_op.clone()])?;
    let lhs = multivariate_operator_function(|x| f_uv(x[0], x[1]), &pair, scn.cfg.commutator_tol)?;
    let rhs = HermitianOperator::identity(lhs.dim()).scale(ext.value);

    let mut notes = asm.notes.clone();
    notes.push(format!("comparison function {f_label}; monotonicity checked on samples only"));
    BoundCertificate::finish(
        format!("fundamental[{}]/{}", f_label, side.label()),
        side,
        lhs,
        rhs,
        ext.value,
        format!("{} of F(x, g(x_args)): {}", mode_label(mode), ext.provenance),
        ranges_for_report(&asm),
        Some(g_op),
        notes,
        scn.cfg.cert_tol,
    )
}

fn mode_label(mode: ExtremalMode) -> &'static str {
    match mode {
        ExtremalMode::Max => "max",
        ExtremalMode::Min => "min",
    }
}

/// Spot-check that F is nondecreasing in its first argument over the scan
/// domain; catches obvious misuse, proves nothing.
fn sampled_monotonicity_check(
    asm: &Assembled,
    scn: &CertScenario<'_>,
    f_uv: &(dyn Fn(f64, f64) -> f64 + Sync),
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d6f6e6f);
    let (ulo, uhi) = match asm.u_range {
        Some(r) => r.padded(),
        None => {
            let env = asm.linear.as_ref().unwrap();
            let corners: Vec<f64> = scn
                .family
                .region()
                .intervals()
                .iter()
                .map(|&(lo, hi)| (lo + hi) / 2.0)
                .collect();
            let mid = env.lower_at(&corners).min(env.upper_at(&corners));
            (mid - 1.0, mid + 1.0)
        }
    };
    let sample_v = |rng: &mut ChaCha8Rng| -> Option<f64> {
        let x: Vec<f64> = asm
            .v_ranges
            .iter()
            .map(|r| {
                let (lo, hi) = r.padded();
                if hi > lo {
                    rng.random_range(lo..hi)
                } else {
                    lo
                }
            })
            .collect();
        scn.g.eval_scalar(&x).ok()
    };
    let scale = (uhi - ulo).abs().max(1.0);
    for _ in 0..200 {
        let mut u1 = rng.random_range(ulo..uhi.max(ulo + 1e-9));
        let mut u2 = rng.random_range(ulo..uhi.max(ulo + 1e-9));
        if u1 > u2 {
            std::mem::swap(&mut u1, &mut u2);
        }
        let Some(v) = sample_v(&mut rng) else { continue };
        let y1 = f_uv(u1, v);
        let y2 = f_uv(u2, v);
        if y1.is_finite() && y2.is_finite() && y2 < y1 - 1e-9 * scale.max(y1.abs()) {
            return Err(CoreError::Invalid(format!(
                "F failed the sampled monotonicity check: F({u1:.6}, {v:.6}) = {y1:.6} > F({u2:.6}, {v:.6}) = {y2:.6}"
            )));
        }
    }
    Ok(())
}

/// Certificate for `F(u, v) = u - alpha v`:
/// `sum w Phi(f) <=/>= alpha g(args) + extremal(x - alpha g(x_args)) I`.
pub fn affine_bound(scn: &CertScenario<'_>, side: Side, alpha: f64) -> Result<BoundCertificate> {
    let asm = assemble(scn, side)?;
    let mode = match side {
        Side::Upper => ExtremalMode::Max,
        Side::Lower => ExtremalMode::Min,
    };
    let needs_g = alpha != 0.0;
    let ext = extremal_constant(scn, &asm, side, mode, &move |u, v| u - alpha * v, needs_g)?;

    let k = asm.weighted_f_sum.dim();
    let (rhs, g_op) = if needs_g {
        let g_op = scn.g.eval_operator(&asm.g_args, scn.cfg.commutator_tol)?;
        (g_op.scale(alpha).shift(ext.value), Some(g_op))
    } else {
        (HermitianOperator::identity(k).scale(ext.value), None)
    };

    BoundCertificate::finish(
        format!("affine[alpha={alpha}]/{}", side.label()),
        side,
        asm.weighted_f_sum.clone(),
        rhs,
        ext.value,
        format!("{} of (x - {alpha} g(x_args)): {}", mode_label(mode), ext.provenance),
        ranges_for_report(&asm),
        g_op,
        asm.notes.clone(),
        scn.cfg.cert_tol,
    )
}

/// Ratio certificate: `sum w Phi(f) <= C g(args)` (upper) or `>= C g(args)`
/// (lower), with `C` an extremum of `x / g(x_args)`. The sign case is
/// verified on the eigenvalues of `g(args)` before certification.
pub fn ratio_bound(scn: &CertScenario<'_>, side: Side, sign: RatioSign) -> Result<BoundCertificate> {
    let asm = assemble(scn, side)?;
    let g_op = scn.g.eval_operator(&asm.g_args, scn.cfg.commutator_tol)?;
    let dec = eigh(&g_op);
    match sign {
        RatioSign::Positive => {
            if dec.min_eig() <= 0.0 {
                return Err(CoreError::SignPrecondition {
                    what: "ratio certificate with g(args) > 0".into(),
                    eigenvalue: dec.min_eig(),
                });
            }
        }
        RatioSign::Negative => {
            if dec.max_eig() >= 0.0 {
                return Err(CoreError::SignPrecondition {
                    what: "ratio certificate with g(args) < 0".into(),
                    eigenvalue: dec.max_eig(),
                });
            }
        }
    }

    let mode = match (side, sign) {
        (Side::Upper, RatioSign::Positive) | (Side::Lower, RatioSign::Negative) => {
            ExtremalMode::Max
        }
        (Side::Upper, RatioSign::Negative) | (Side::Lower, RatioSign::Positive) => {
            ExtremalMode::Min
        }
    };
    let ext = extremal_constant(scn, &asm, side, mode, &|u, v| u / v, true)?;

    let rhs = g_op.scale(ext.value);
    let mut notes = asm.notes.clone();
    notes.push(format!("sign case: g(args) {} 0", match sign {
        RatioSign::Positive => ">",
        RatioSign::Negative => "<",
    }));
    BoundCertificate::finish(
        format!(
            "ratio[{}]/{}",
            match sign {
                RatioSign::Positive => "g>0",
                RatioSign::Negative => "g<0",
            },
            side.label()
        ),
        side,
        asm.weighted_f_sum.clone(),
        rhs,
        ext.value,
        format!("{} of x / g(x_args): {}", mode_label(mode), ext.provenance),
        ranges_for_report(&asm),
        Some(g_op),
        notes,
        scn.cfg.cert_tol,
    )
}

/// Difference certificate: `sum w Phi(f) - g(args) <=/>= extremal(x - g(x_args)) I`.
pub fn difference_bound(scn: &CertScenario<'_>, side: Side) -> Result<BoundCertificate> {
    let asm = assemble(scn, side)?;
    let mode = match side {
        Side::Upper => ExtremalMode::Max,
        Side::Lower => ExtremalMode::Min,
    };
    let ext = extremal_constant(scn, &asm, side, mode, &|u, v| u - v, true)?;
    let g_op = scn.g.eval_operator(&asm.g_args, scn.cfg.commutator_tol)?;
    let rhs = g_op.shift(ext.value);

    BoundCertificate::finish(
        format!("difference/{}", side.label()),
        side,
        asm.weighted_f_sum.clone(),
        rhs,
        ext.value,
        format!("{} of (x - g(x_args)): {}", mode_label(mode), ext.provenance),
        ranges_for_report(&asm),
        Some(g_op),
        asm.notes.clone(),
        scn.cfg.cert_tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::{fit_envelopes, FitConfig};
    use crate::spectral::{haar_unitary, random_hermitian_in};
    use approx::assert_abs_diff_eq;

    fn identity_maps(d: usize) -> MapAssignment {
        MapAssignment::Shared(PolyMap::identity(d))
    }

    fn diag_family(axes: Vec<Vec<Vec<f64>>>, region: IntervalBox) -> OperatorFamily {
        let ops = axes
            .into_iter()
            .map(|axis| axis.into_iter().map(|d| HermitianOperator::from_diagonal(&d)).collect())
            .collect();
        OperatorFamily::new(ops, region, 1e-9, 1e-8).unwrap()
    }

    #[test]
    fn phi_sum_linearity() {
        let region = IntervalBox::new(vec![(0.0, 3.0)]).unwrap();
        let fam = diag_family(vec![vec![vec![1.0, 2.0], vec![0.5, 3.0]]], region);
        let w = WeightGrid::new(vec![vec![0.5, 0.5]]).unwrap();
        let f = |x: &[f64]| x[0];
        let sum = weighted_phi_sum(
            &PhiSumExpr::FOfTuple(&f),
            &fam,
            &identity_maps(2),
            &w,
            1e-8,
        )
        .unwrap();
        let expect = HermitianOperator::from_diagonal(&[0.75, 2.5]);
        assert!(sum.sub(&expect).unwrap().frob_norm() < 1e-10);
    }

    #[test]
    fn phi_sum_constants_and_completeness() {
        let region = IntervalBox::new(vec![(0.0, 3.0), (0.0, 3.0)]).unwrap();
        let fam = diag_family(
            vec![
                vec![vec![1.0, 2.0], vec![0.5, 3.0]],
                vec![vec![0.0, 1.0], vec![2.0, 2.5]],
            ],
            region,
        );
        let w = WeightGrid::new(vec![vec![0.25, 0.75], vec![0.6, 0.4]]).unwrap();
        // Multi-index weights must sum to one over all 4 indices.
        let total: f64 = multi_indices(&fam.counts())
            .iter()
            .map(|m| w.product_weight(m))
            .sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);

        let one = |_: &[f64]| 1.0;
        let sum = weighted_phi_sum(
            &PhiSumExpr::FOfTuple(&one),
            &fam,
            &identity_maps(2),
            &w,
            1e-8,
        )
        .unwrap();
        assert!(sum.sub(&HermitianOperator::identity(2)).unwrap().frob_norm() < 1e-10);
    }

    #[test]
    fn phi_sum_product_matches_brute_force() {
        let region = IntervalBox::new(vec![(0.0, 4.0), (0.0, 4.0)]).unwrap();
        let a = vec![vec![1.0, 2.0], vec![0.5, 3.0]];
        let b = vec![vec![0.5, 1.0], vec![2.0, 2.5]];
        let fam = diag_family(vec![a.clone(), b.clone()], region);
        let w = WeightGrid::new(vec![vec![0.3, 0.7], vec![0.6, 0.4]]).unwrap();
        let f = |x: &[f64]| x[0] * x[1];
        let sum = weighted_phi_sum(
            &PhiSumExpr::FOfTuple(&f),
            &fam,
            &identity_maps(2),
            &w,
            1e-8,
        )
        .unwrap();
        // Direct four-term sum on the diagonals.
        let wts = [[0.3, 0.7], [0.6, 0.4]];
        let mut expect = [0.0, 0.0];
        for j1 in 0..2 {
            for j2 in 0..2 {
                for d in 0..2 {
                    expect[d] += wts[0][j1] * wts[1][j2] * a[j1][d] * b[j2][d];
                }
            }
        }
        assert!(sum.sub(&HermitianOperator::from_diagonal(&expect)).unwrap().frob_norm() < 1e-10);
    }

    #[test]
    fn phi_sum_rejects_noncommuting_for_f_form() {
        let region = IntervalBox::new(vec![(-2.0, 2.0), (-2.0, 2.0)]).unwrap();
        let x = HermitianOperator::from_real(&nalgebra::DMatrix::from_row_slice(
            2,
            2,
            &[0.0, 1.0, 1.0, 0.0],
        ))
        .unwrap();
        let z = HermitianOperator::from_diagonal(&[1.0, -1.0]);
        let fam =
            OperatorFamily::new(vec![vec![x], vec![z]], region, 1e-9, 1e-8).unwrap();
        assert!(!fam.commuting());
        let w = WeightGrid::new(vec![vec![1.0], vec![1.0]]).unwrap();
        let f = |x: &[f64]| x[0] + x[1];
        let err = weighted_phi_sum(&PhiSumExpr::FOfTuple(&f), &fam, &identity_maps(2), &w, 1e-8);
        assert!(matches!(err, Err(CoreError::NonCommuting { .. })));
    }

    #[test]
    fn box_optimize_examples() {
        let cfg = OptimizeConfig::default();
        let dom = [SpectrumRange { lo: 0.0, hi: 1.0, padding: 0.0 }];
        let vertex = box_optimize(|x| x[0] - x[0] * x[0], &dom, ExtremalMode::Max, &cfg).unwrap();
        assert_abs_diff_eq!(vertex.value, 0.25, epsilon = 1e-9);
        assert_abs_diff_eq!(vertex.argpoint[0], 0.5, epsilon = 1e-4);

        let dom2 = [SpectrumRange { lo: 1.0, hi: 2.0, padding: 0.0 }];
        let inv = box_optimize(|x| 1.0 / x[0], &dom2, ExtremalMode::Min, &cfg).unwrap();
        assert_abs_diff_eq!(inv.value, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(inv.argpoint[0], 2.0, epsilon = 1e-12);

        let dom3 = [
            SpectrumRange { lo: 0.0, hi: 1.0, padding: 0.0 },
            SpectrumRange { lo: 0.0, hi: 1.0, padding: 0.0 },
        ];
        let corner = box_optimize(|x| x[0] + x[1], &dom3, ExtremalMode::Max, &cfg).unwrap();
        assert_abs_diff_eq!(corner.value, 2.0, epsilon = 1e-12);

        let nan = box_optimize(|x| (x[0] - 0.5).ln(), &dom, ExtremalMode::Max, &cfg);
        assert!(matches!(nan, Err(CoreError::Domain { .. })));
    }

    /// Worked ratio constant: envelope f <= x, g = x^2 on [1, 2] gives
    /// alpha_1 = max x/x^2 = 1.
    #[test]
    fn ratio_worked_constant_is_one() {
        let region = IntervalBox::new(vec![(1.0, 2.0)]).unwrap();
        let fam = diag_family(vec![vec![vec![1.0, 1.5, 2.0]]], region);
        let w = WeightGrid::new(vec![vec![1.0]]).unwrap();
        let env = EnvelopeSpec::Linear(LinearEnvelope {
            a: vec![1.0],
            b: 0.0,
            c: vec![1.0],
            d: 0.0,
        });
        let g = GFunction::power(vec![1.0], 2.0).unwrap();
        let maps = identity_maps(3);
        let f = |x: &[f64]| x[0];
        let scn = CertScenario {
            family: &fam,
            weights: &w,
            maps: &maps,
            f: &f,
            envelope: &env,
            g: &g,
            cfg: CertConfig::default(),
        };
        let cert = ratio_bound(&scn, Side::Upper, RatioSign::Positive).unwrap();
        assert_abs_diff_eq!(cert.constant, 1.0, epsilon = 1e-9);
        assert!(cert.holds, "witness {}", cert.witness);
    }

    /// Worked difference constant: f <= x, g = x^2 on [0, 1] gives
    /// beta_1 = max (x - x^2) = 1/4.
    #[test]
    fn difference_worked_constant_quarter() {
        let region = IntervalBox::new(vec![(0.0, 1.0)]).unwrap();
        let fam = diag_family(vec![vec![vec![0.0, 0.5, 1.0]]], region);
        let w = WeightGrid::new(vec![vec![1.0]]).unwrap();
        let env = EnvelopeSpec::Linear(LinearEnvelope {
            a: vec![1.0],
            b: 0.0,
            c: vec![1.0],
            d: 0.0,
        });
        let g = GFunction::power(vec![1.0], 2.0).unwrap();
        let maps = identity_maps(3);
        let f = |x: &[f64]| x[0];
        let scn = CertScenario {
            family: &fam,
            weights: &w,
            maps: &maps,
            f: &f,
            envelope: &env,
            g: &g,
            cfg: CertConfig::default(),
        };
        let cert = difference_bound(&scn, Side::Upper).unwrap();
        assert_abs_diff_eq!(cert.constant, 0.25, epsilon = 1e-6);
        assert!(cert.holds, "witness {}", cert.witness);
    }

    #[test]
    fn ratio_equality_for_identity_g() {
        // g = x (power q=1), f = x exactly, identity maps: constant 1 and
        // equality within tolerance.
        let region = IntervalBox::new(vec![(1.0, 2.0)]).unwrap();
        let fam = diag_family(vec![vec![vec![1.0, 1.3, 2.0]]], region);
        let w = WeightGrid::new(vec![vec![1.0]]).unwrap();
        let env = EnvelopeSpec::Linear(LinearEnvelope {
            a: vec![1.0],
            b: 0.0,
            c: vec![1.0],
            d: 0.0,
        });
        let g = GFunction::power(vec![1.0], 1.0).unwrap();
        let maps = identity_maps(3);
        let f = |x: &[f64]| x[0];
        let scn = CertScenario {
            family: &fam,
            weights: &w,
            maps: &maps,
            f: &f,
            envelope: &env,
            g: &g,
            cfg: CertConfig::default(),
        };
        let cert = ratio_bound(&scn, Side::Upper, RatioSign::Positive).unwrap();
        assert_abs_diff_eq!(cert.constant, 1.0, epsilon = 1e-9);
        assert!(cert.witness.abs() < 1e-8);

        // Difference flavor of the same equality scenario: constant 0.
        let diff = difference_bound(&scn, Side::Upper).unwrap();
        assert_abs_diff_eq!(diff.constant, 0.0, epsilon = 1e-9);
        assert!(diff.witness.abs() < 1e-8);
    }

    #[test]
    fn shrunken_constant_fails_loewner() {
        let region = IntervalBox::new(vec![(1.0, 2.0)]).unwrap();
        let fam = diag_family(vec![vec![vec![1.0, 1.5, 2.0]]], region);
        let w = WeightGrid::new(vec![vec![1.0]]).unwrap();
        let env = EnvelopeSpec::Linear(LinearEnvelope {
            a: vec![1.0],
            b: 0.0,
            c: vec![1.0],
            d: 0.0,
        });
        let g = GFunction::power(vec![1.0], 2.0).unwrap();
        let maps = identity_maps(3);
        let f = |x: &[f64]| x[0];
        let scn = CertScenario {
            family: &fam,
            weights: &w,
            maps: &maps,
            f: &f,
            envelope: &env,
            g: &g,
            cfg: CertConfig::default(),
        };
        let cert = ratio_bound(&scn, Side::Upper, RatioSign::Positive).unwrap();
        let halved = cert.g_operator.as_ref().unwrap().scale(cert.constant * 0.5);
        let check = loewner_leq(&cert.lhs, &halved, 1e-8).unwrap();
        assert!(!check.holds);
    }

    #[test]
    fn affine_alpha_zero_is_spectral_bound() {
        let region = IntervalBox::new(vec![(0.5, 1.5)]).unwrap();
        let pair =
            fit_envelopes(|x: &[f64]| 1.0 + 0.25 * x[0], &region, 0.05, &FitConfig::default())
                .unwrap();
        let fam = diag_family(vec![vec![vec![0.5, 1.0, 1.5]]], region);
        let w = WeightGrid::new(vec![vec![1.0]]).unwrap();
        let env = EnvelopeSpec::Sigmoid(pair);
        let g = GFunction::power(vec![1.0], 1.0).unwrap();
        let maps = identity_maps(3);
        let f = |x: &[f64]| 1.0 + 0.25 * x[0];
        let scn = CertScenario {
            family: &fam,
            weights: &w,
            maps: &maps,
            f: &f,
            envelope: &env,
            g: &g,
            cfg: CertConfig::default(),
        };
        let cert = affine_bound(&scn, Side::Upper, 0.0).unwrap();
        assert!(cert.holds, "witness {}", cert.witness);
        // Constant is the top of the u-range, which dominates the LHS spectrum.
        let lhs_top = eigh(&cert.lhs).max_eig();
        assert!(cert.constant >= lhs_top - 1e-9);
        assert!(cert.constant <= lhs_top + 0.2);
    }

    #[test]
    fn affine_one_matches_difference_constant() {
        let region = IntervalBox::new(vec![(0.5, 1.5)]).unwrap();
        let pair =
            fit_envelopes(|x: &[f64]| 1.5 + 0.5 * x[0], &region, 0.1, &FitConfig::default())
                .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let u = haar_unitary(4, &mut rng);
        let ops =
            vec![vec![
                random_hermitian_in(4, 0.5, 1.5, Some(&u), &mut rng),
                random_hermitian_in(4, 0.5, 1.5, Some(&u), &mut rng),
            ]];
        let fam = OperatorFamily::new(ops, region, 1e-9, 1e-8).unwrap();
        let w = WeightGrid::new(vec![vec![0.4, 0.6]]).unwrap();
        let env = EnvelopeSpec::Sigmoid(pair);
        let g = GFunction::exp(vec![0.5]).unwrap();
        let maps = identity_maps(4);
        let f = |x: &[f64]| 1.5 + 0.5 * x[0];
        let scn = CertScenario {
            family: &fam,
            weights: &w,
            maps: &maps,
            f: &f,
            envelope: &env,
            g: &g,
            cfg: CertConfig::default(),
        };
        let aff = affine_bound(&scn, Side::Upper, 1.0).unwrap();
        let dif = difference_bound(&scn, Side::Upper).unwrap();
        assert!((aff.constant - dif.constant).abs() <= 1e-10);
        assert!(aff.holds && dif.holds);
    }

    #[test]
    fn fundamental_constant_function_is_tight() {
        let region = IntervalBox::new(vec![(0.0, 1.0)]).unwrap();
        let c = 2.5;
        // Hand-built constant envelope pair (both sides equal to c).
        let combo = |value: f64| {
            crate::envelope::SigmoidCombination::new(
                1,
                vec![crate::envelope::SigmoidTerm {
                    outer: value / crate::spectral::sigmoid(60.0),
                    offset: 60.0,
                    inner: vec![0.0],
                }],
            )
            .unwrap()
        };
        let pair = EnvelopePair {
            lower: combo(c),
            upper: combo(c),
            epsilon: 1e-9,
            region: region.clone(),
            verification_grid: 2,
            achieved_gap_lower: 0.0,
            achieved_gap_upper: 0.0,
        };
        let fam = diag_family(vec![vec![vec![0.1, 0.9]]], region);
        let w = WeightGrid::new(vec![vec![1.0]]).unwrap();
        let env = EnvelopeSpec::Sigmoid(pair);
        let g = GFunction::power(vec![1.0], 1.0).unwrap();
        let maps = identity_maps(2);
        let f = move |_: &[f64]| c;
        let scn = CertScenario {
            family: &fam,
            weights: &w,
            maps: &maps,
            f: &f,
            envelope: &env,
            g: &g,
            cfg: CertConfig::default(),
        };
        let cert = fundamental_bound(&scn, Side::Upper, &|u, _| u, "F(u,v)=u").unwrap();
        assert!(cert.holds);
        // Both sides are c I up to range padding.
        assert!((cert.constant - c).abs() < 1e-3, "constant {}", cert.constant);
        assert!(cert.witness < 1e-3);

        // Shrinking the computed constant must break the certificate.
        let shrunk = HermitianOperator::identity(cert.rhs.dim()).scale(cert.constant * 0.5);
        assert!(!loewner_leq(&cert.lhs, &shrunk, 1e-8).unwrap().holds);
    }

    #[test]
    fn fundamental_rejects_decreasing_f() {
        let region = IntervalBox::new(vec![(1.0, 2.0)]).unwrap();
        let pair = fit_envelopes(|x: &[f64]| x[0], &region, 0.05, &FitConfig::default()).unwrap();
        let fam = diag_family(vec![vec![vec![1.0, 2.0]]], region);
        let w = WeightGrid::new(vec![vec![1.0]]).unwrap();
        let env = EnvelopeSpec::Sigmoid(pair);
        let g = GFunction::power(vec![1.0], 1.0).unwrap();
        let maps = identity_maps(2);
        let f = |x: &[f64]| x[0];
        let scn = CertScenario {
            family: &fam,
            weights: &w,
            maps: &maps,
            f: &f,
            envelope: &env,
            g: &g,
            cfg: CertConfig::default(),
        };
        let err = fundamental_bound(&scn, Side::Upper, &|u, _| -u, "F(u,v)=-u");
        assert!(matches!(err, Err(CoreError::Invalid(_))));
    }

    #[test]
    fn ratio_sign_precondition_names_eigenvalue() {
        let region = IntervalBox::new(vec![(-1.0, 1.0)]).unwrap();
        let fam = diag_family(vec![vec![vec![-0.5, 0.5]]], region);
        let w = WeightGrid::new(vec![vec![1.0]]).unwrap();
        let env = EnvelopeSpec::Linear(LinearEnvelope {
            a: vec![1.0],
            b: -0.1,
            c: vec![1.0],
            d: 0.1,
        });
        let g = GFunction::power(vec![1.0], 1.0).unwrap();
        let maps = identity_maps(2);
        let f = |x: &[f64]| x[0];
        let scn = CertScenario {
            family: &fam,
            weights: &w,
            maps: &maps,
            f: &f,
            envelope: &env,
            g: &g,
            cfg: CertConfig::default(),
        };
        // g(args) has a negative and a positive eigenvalue: both sign cases fail.
        assert!(matches!(
            ratio_bound(&scn, Side::Upper, RatioSign::Positive),
            Err(CoreError::SignPrecondition { .. })
        ));
        assert!(matches!(
            ratio_bound(&scn, Side::Upper, RatioSign::Negative),
            Err(CoreError::SignPrecondition { .. })
        ));
    }

    #[test]
    fn ratio_negative_sign_case_holds() {
        // f = x with tight envelopes on [0.2, 0.5]; g = log(x) < 0 there.
        let region = IntervalBox::new(vec![(0.2, 0.5)]).unwrap();
        let fam = diag_family(vec![vec![vec![0.2, 0.35, 0.5]]], region);
        let w = WeightGrid::new(vec![vec![1.0]]).unwrap();
        let env = EnvelopeSpec::Linear(LinearEnvelope {
            a: vec![1.0],
            b: -0.05,
            c: vec![1.0],
            d: 0.0,
        });
        let g = GFunction::log(vec![1.0]).unwrap();
        let maps = identity_maps(3);
        let f = |x: &[f64]| x[0];
        let scn = CertScenario {
            family: &fam,
            weights: &w,
            maps: &maps,
            f: &f,
            envelope: &env,
            g: &g,
            cfg: CertConfig::default(),
        };
        let up = ratio_bound(&scn, Side::Upper, RatioSign::Negative).unwrap();
        assert!(up.holds, "upper witness {}", up.witness);
        let lo = ratio_bound(&scn, Side::Lower, RatioSign::Negative).unwrap();
        assert!(lo.holds, "lower witness {}", lo.witness);
    }
}
