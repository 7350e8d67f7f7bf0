//! One-sided sigmoid envelopes `Psi_L <= f <= Psi_U` on a box, and the linear
//! (chord) envelopes used by the worked constants.
//!
//! The fitter samples random ridge features `sigma(<C,x> + B)`, solves a
//! regularized least-squares problem on a uniform grid, then shifts each side
//! by one extra saturated sigmoid term so the result is one-sided. The shift
//! includes a curvature margin estimated from second differences, so
//! one-sidedness survives verification on grids finer than the fitting grid.
//! Everything is certified on grids, not on the continuum; reports state the
//! grid.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::exec::map_indexed;
use crate::spectral::{
    sigmoid, sigmoid_of_operator, HermitianOperator, IntervalBox, OperatorTuple,
};

/// Offset at which the shift sigmoid is considered saturated.
const SATURATION_OFFSET: f64 = 60.0;

/// One term of a sigmoid combination: `outer * sigma(<inner, x> + offset)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmoidTerm {
    #[serde(rename = "A")]
    pub outer: f64,
    #[serde(rename = "B")]
    pub offset: f64,
    #[serde(rename = "C")]
    pub inner: Vec<f64>,
}

/// Finite sum of outer-weighted sigmoids of affine forms. The empty
/// combination is the zero function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmoidCombination {
    pub n_vars: usize,
    pub terms: Vec<SigmoidTerm>,
}

impl SigmoidCombination {
    pub fn new(n_vars: usize, terms: Vec<SigmoidTerm>) -> Result<Self> {
        if n_vars == 0 {
            return Err(CoreError::Invalid("n_vars must be >= 1".into()));
        }
        for (i, t) in terms.iter().enumerate() {
            if t.inner.len() != n_vars {
                return Err(CoreError::DimensionMismatch {
                    left: t.inner.len(),
                    right: n_vars,
                    context: format!("inner weights of term {i}"),
                });
            }
            if !(t.outer.is_finite() && t.offset.is_finite())
                || t.inner.iter().any(|c| !c.is_finite())
            {
                return Err(CoreError::Invalid(format!("term {i} has non-finite coefficients")));
            }
        }
        Ok(SigmoidCombination { n_vars, terms })
    }

    pub fn zero(n_vars: usize) -> Self {
        SigmoidCombination { n_vars, terms: Vec::new() }
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    /// `sum_i A_i sigma(<C_i, x> + B_i)`; the empty combination returns 0.
    pub fn eval_scalar(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_vars {
            return Err(CoreError::DimensionMismatch {
                left: x.len(),
                right: self.n_vars,
                context: "eval_scalar input".into(),
            });
        }
        let mut acc = 0.0;
        for t in &self.terms {
            let z: f64 = t.inner.iter().zip(x).map(|(c, xi)| c * xi).sum::<f64>() + t.offset;
            acc += t.outer * sigmoid(z);
        }
        Ok(acc)
    }

    /// `sum_i A_i sigma(sum_j C_{i,j} X_j + B_i I)`. Well-defined and
    /// Hermitian for any tuple; commuting is not required.
    pub fn eval_operator(&self, tuple: &OperatorTuple) -> Result<HermitianOperator> {
        if tuple.len() != self.n_vars {
            return Err(CoreError::DimensionMismatch {
                left: tuple.len(),
                right: self.n_vars,
                context: "eval_operator tuple arity".into(),
            });
        }
        let dim = tuple.dim();
        let mut acc = HermitianOperator::zeros(dim);
        for t in &self.terms {
            let mut arg = DMatrix::zeros(dim, dim);
            for (c, op) in t.inner.iter().zip(tuple.ops()) {
                arg += op.matrix().scale(*c);
            }
            let arg = HermitianOperator::symmetrized(arg).shift(t.offset);
            let s = sigmoid_of_operator(&arg)?;
            acc = acc.add(&s.scale(t.outer))?;
        }
        Ok(acc)
    }

    /// Restriction to the diagonal `x -> (x, ..., x)` as a univariate
    /// combination: inner weights collapse to their sum.
    pub fn restrict_diagonal(&self) -> SigmoidCombination {
        SigmoidCombination {
            n_vars: 1,
            terms: self
                .terms
                .iter()
                .map(|t| SigmoidTerm {
                    outer: t.outer,
                    offset: t.offset,
                    inner: vec![t.inner.iter().sum()],
                })
                .collect(),
        }
    }
}

/// A fitted pair `Psi_L <= f <= Psi_U` with one-sided gaps at most `epsilon`
/// on the verification grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvelopePair {
    pub lower: SigmoidCombination,
    pub upper: SigmoidCombination,
    pub epsilon: f64,
    pub region: IntervalBox,
    /// Points per axis of the grid the one-sided invariant was certified on.
    pub verification_grid: usize,
    pub achieved_gap_lower: f64,
    pub achieved_gap_upper: f64,
}

impl EnvelopePair {
    /// Diagonal restriction of both envelopes over a single interval. Valid
    /// whenever the diagonal points lie in the region the pair was fitted on.
    pub fn restrict_diagonal(&self, interval: (f64, f64)) -> Result<EnvelopePair> {
        Ok(EnvelopePair {
            lower: self.lower.restrict_diagonal(),
            upper: self.upper.restrict_diagonal(),
            epsilon: self.epsilon,
            region: IntervalBox::new(vec![interval])?,
            verification_grid: self.verification_grid,
            achieved_gap_lower: self.achieved_gap_lower,
            achieved_gap_upper: self.achieved_gap_upper,
        })
    }
}

/// Budget and reproducibility knobs for [`fit_envelopes`].
#[derive(Debug, Clone)]
pub struct FitConfig {
    /// Fitting grid resolution per axis.
    pub grid_per_axis: usize,
    /// Total fitting grid points are capped at this.
    pub grid_cap: usize,
    /// First term count in the doubling schedule.
    pub n_start: usize,
    /// Last term count tried.
    pub n_cap: usize,
    /// Relative Tikhonov regularization.
    pub ridge: f64,
    /// Seed for the feature draws; identical seeds reproduce identical fits.
    pub seed: u64,
    /// The shift/verification grid is this many times finer than the fitting
    /// grid (same endpoints).
    pub cert_refine: usize,
    /// Safety factor on the curvature margin added to each one-sided shift.
    pub margin_safety: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            grid_per_axis: 33,
            grid_cap: 1 << 16,
            n_start: 8,
            n_cap: 1024,
            ridge: 1e-8,
            seed: 0,
            cert_refine: 4,
            margin_safety: 2.0,
        }
    }
}

/// Per-step record of the fit schedule; the retained best gap is
/// non-increasing by construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitLog {
    pub schedule: Vec<usize>,
    /// Best total gap retained after each schedule step.
    pub best_gaps: Vec<f64>,
}

/// Fit one-sided sigmoid envelopes for `f` on a box.
pub fn fit_envelopes<F>(
    f: F,
    region: &IntervalBox,
    epsilon: f64,
    cfg: &FitConfig,
) -> Result<EnvelopePair>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    fit_envelopes_with_log(f, region, epsilon, cfg).map(|(pair, _)| pair)
}

struct Candidate {
    base: SigmoidCombination,
    shift_up: f64,
    shift_down: f64,
    gap_upper: f64,
    gap_lower: f64,
}

impl Candidate {
    fn total_gap(&self) -> f64 {
        self.gap_upper.max(self.gap_lower)
    }
}

/// [`fit_envelopes`] with the per-step schedule log.
pub fn fit_envelopes_with_log<F>(
    f: F,
    region: &IntervalBox,
    epsilon: f64,
    cfg: &FitConfig,
) -> Result<(EnvelopePair, FitLog)>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    if !(epsilon > 0.0) {
        return Err(CoreError::Invalid("epsilon must be positive".into()));
    }
    let n_vars = region.n_axes();
    let fit_res = region.capped_resolution(cfg.grid_per_axis, cfg.grid_cap);
    let cert_res = region.capped_resolution((fit_res - 1) * cfg.cert_refine.max(1) + 1, 1 << 18);

    let fit_points: Vec<Vec<f64>> =
        map_indexed(region.grid_len(fit_res), |i| region.grid_point(i, fit_res));
    let cert_points: Vec<Vec<f64>> =
        map_indexed(region.grid_len(cert_res), |i| region.grid_point(i, cert_res));
    let f_fit: Vec<f64> = map_indexed(fit_points.len(), |i| f(&fit_points[i]));
    let f_cert: Vec<f64> = map_indexed(cert_points.len(), |i| f(&cert_points[i]));
    for (vals, pts) in [(&f_fit, &fit_points), (&f_cert, &cert_points)] {
        if let Some(k) = vals.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::Domain {
                eigenvalue: pts[k][0],
                detail: format!("f not finite at grid point {:?}", pts[k]),
            });
        }
    }

    // The zero function needs no terms at all.
    if f_cert.iter().all(|&v| v == 0.0) && f_fit.iter().all(|&v| v == 0.0) {
        let zero = SigmoidCombination::zero(n_vars);
        return Ok((
            EnvelopePair {
                lower: zero.clone(),
                upper: zero,
                epsilon,
                region: region.clone(),
                verification_grid: cert_res,
                achieved_gap_lower: 0.0,
                achieved_gap_upper: 0.0,
            },
            FitLog { schedule: vec![0], best_gaps: vec![0.0] },
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<Candidate> = None;
    let mut schedule = Vec::new();
    let mut best_gaps = Vec::new();

    let mut n_terms = cfg.n_start.max(1);
    loop {
        let cand = fit_at_budget(
            region, n_vars, n_terms, &fit_points, &f_fit, &cert_points, &f_cert, cert_res, cfg,
            &mut rng,
        )?;
        if best.as_ref().is_none_or(|b| cand.total_gap() < b.total_gap()) {
            best = Some(cand);
        }
        schedule.push(n_terms);
        best_gaps.push(best.as_ref().unwrap().total_gap());
        if best.as_ref().unwrap().total_gap() <= epsilon || n_terms >= cfg.n_cap {
            break;
        }
        n_terms = (n_terms * 2).min(cfg.n_cap);
    }

    let best = best.unwrap();
    if best.total_gap() > epsilon {
        return Err(CoreError::FitBudget {
            best_gap: best.total_gap(),
            epsilon,
            schedule,
            gaps: best_gaps,
        });
    }

    let saturated = |s: f64| SigmoidTerm {
        outer: s / sigmoid(SATURATION_OFFSET),
        offset: SATURATION_OFFSET,
        inner: vec![0.0; n_vars],
    };
    let mut upper_terms = best.base.terms.clone();
    upper_terms.push(saturated(best.shift_up));
    let mut lower_terms = best.base.terms.clone();
    lower_terms.push(saturated(-best.shift_down));

    let pair = EnvelopePair {
        lower: SigmoidCombination::new(n_vars, lower_terms)?,
        upper: SigmoidCombination::new(n_vars, upper_terms)?,
        epsilon,
        region: region.clone(),
        verification_grid: cert_res,
        achieved_gap_lower: best.gap_lower,
        achieved_gap_upper: best.gap_upper,
    };
    Ok((pair, FitLog { schedule, best_gaps }))
}

#[allow(clippy::too_many_arguments)]
fn fit_at_budget<R: Rng>(
    region: &IntervalBox,
    n_vars: usize,
    n_terms: usize,
    fit_points: &[Vec<f64>],
    f_fit: &[f64],
    cert_points: &[Vec<f64>],
    f_cert: &[f64],
    cert_res: usize,
    cfg: &FitConfig,
    rng: &mut R,
) -> Result<Candidate> {
    use rand_distr::StandardNormal;

    // Ridge features: random direction, log-uniform steepness scaled to the
    // axis widths, bias anchored so the transition crosses the box.
    let mut features = Vec::with_capacity(n_terms);
    for _ in 0..n_terms {
        let dir: Vec<f64> = (0..n_vars).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let kappa = (rng.random_range(2f64.ln()..30f64.ln())).exp();
        let inner: Vec<f64> = dir
            .iter()
            .zip(region.intervals())
            .map(|(g, &(lo, hi))| kappa * g / ((n_vars as f64).sqrt() * (hi - lo)))
            .collect();
        let anchor: Vec<f64> = region
            .intervals()
            .iter()
            .map(|&(lo, hi)| rng.random_range(lo..hi))
            .collect();
        let offset = -inner.iter().zip(&anchor).map(|(c, a)| c * a).sum::<f64>();
        features.push(SigmoidTerm { outer: 0.0, offset, inner });
    }

    // Design matrix on the fitting grid.
    let rows = map_indexed(fit_points.len(), |p| {
        let x = &fit_points[p];
        features
            .iter()
            .map(|t| sigmoid(t.inner.iter().zip(x).map(|(c, xi)| c * xi).sum::<f64>() + t.offset))
            .collect::<Vec<f64>>()
    });
    let phi = DMatrix::from_fn(fit_points.len(), n_terms, |r, c| rows[r][c]);
    let y = DVector::from_column_slice(f_fit);
    let mut gram = phi.transpose() * &phi;
    let rhs = phi.transpose() * y;
    let lambda = cfg.ridge * (gram.trace() / n_terms as f64).max(1e-300);
    for i in 0..n_terms {
        gram[(i, i)] += lambda;
    }
    let weights = gram
        .cholesky()
        .map(|ch| ch.solve(&rhs))
        .ok_or_else(|| CoreError::Invalid("ridge system not positive definite".into()))?;

    let base = SigmoidCombination::new(
        n_vars,
        features
            .iter()
            .zip(weights.iter())
            .map(|(t, &w)| SigmoidTerm { outer: w, offset: t.offset, inner: t.inner.clone() })
            .collect(),
    )?;

    // Residuals on the finer certification grid decide shifts and gaps.
    let resid: Vec<f64> = map_indexed(cert_points.len(), |p| {
        base.eval_scalar(&cert_points[p]).unwrap() - f_cert[p]
    });
    let rmax = resid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let rmin = resid.iter().cloned().fold(f64::INFINITY, f64::min);
    let margin = cfg.margin_safety * second_difference_bound(&resid, n_vars, cert_res) / 8.0
        + 1e-12 * (rmax - rmin).abs().max(1.0);

    let shift_up = (-rmin).max(0.0) + margin;
    let shift_down = rmax.max(0.0) + margin;
    Ok(Candidate {
        base,
        shift_up,
        shift_down,
        gap_upper: rmax + shift_up,
        gap_lower: -rmin + shift_down,
    })
}

/// Max per-axis second difference over the grid; `h^2 |r''|` in disguise,
/// which bounds how far the residual can dip between neighboring points.
fn second_difference_bound(values: &[f64], n_vars: usize, res: usize) -> f64 {
    let mut strides = vec![1usize; n_vars];
    for ax in (0..n_vars.saturating_sub(1)).rev() {
        strides[ax] = strides[ax + 1] * res;
    }
    let mut total = 0.0;
    for &stride in &strides {
        let mut worst: f64 = 0.0;
        for (i, &v) in values.iter().enumerate() {
            let coord = (i / stride) % res;
            if coord == 0 || coord + 1 >= res {
                continue;
            }
            let dd = values[i - stride] - 2.0 * v + values[i + stride];
            worst = worst.max(dd.abs());
        }
        total += worst;
    }
    total
}

/// Which side of an envelope a violation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnvelopeSide {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvelopeViolation {
    pub side: EnvelopeSide,
    pub point: Vec<f64>,
    pub amount: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub grid_per_axis: usize,
    pub max_upper_gap: f64,
    pub max_lower_gap: f64,
    pub worst_upper_point: Vec<f64>,
    pub worst_lower_point: Vec<f64>,
    /// Points where one-sidedness breaks by more than `side_tol`.
    pub one_sided_violations: Vec<EnvelopeViolation>,
    /// Points where a gap exceeds `epsilon` by more than `gap_slack`.
    pub gap_violations: Vec<EnvelopeViolation>,
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyConfig {
    pub side_tol: f64,
    pub gap_slack: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { side_tol: 1e-9, gap_slack: 1e-9 }
    }
}

/// Exhaustively evaluate both envelopes against `f` on a uniform grid
/// (corners included).
pub fn verify_envelope<F>(
    f: F,
    pair: &EnvelopePair,
    grid_per_axis: usize,
    cfg: &VerifyConfig,
) -> Result<EnvelopeReport>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    if grid_per_axis < 2 {
        return Err(CoreError::Invalid("verification grid needs >= 2 points per axis".into()));
    }
    let region = &pair.region;
    let n = region.grid_len(grid_per_axis);
    let rows = map_indexed(n, |i| {
        let x = region.grid_point(i, grid_per_axis);
        let fv = f(&x);
        let up = pair.upper.eval_scalar(&x).unwrap();
        let lo = pair.lower.eval_scalar(&x).unwrap();
        (x, up - fv, fv - lo)
    });

    let mut report = EnvelopeReport {
        grid_per_axis,
        max_upper_gap: f64::NEG_INFINITY,
        max_lower_gap: f64::NEG_INFINITY,
        worst_upper_point: Vec::new(),
        worst_lower_point: Vec::new(),
        one_sided_violations: Vec::new(),
        gap_violations: Vec::new(),
    };
    for (x, up_gap, lo_gap) in rows {
        if up_gap > report.max_upper_gap {
            report.max_upper_gap = up_gap;
            report.worst_upper_point = x.clone();
        }
        if lo_gap > report.max_lower_gap {
            report.max_lower_gap = lo_gap;
            report.worst_lower_point = x.clone();
        }
        for (side, gap) in [(EnvelopeSide::Upper, up_gap), (EnvelopeSide::Lower, lo_gap)] {
            if gap < -cfg.side_tol {
                report.one_sided_violations.push(EnvelopeViolation {
                    side,
                    point: x.clone(),
                    amount: -gap,
                });
            }
            if gap > pair.epsilon + cfg.gap_slack {
                report.gap_violations.push(EnvelopeViolation {
                    side,
                    point: x.clone(),
                    amount: gap - pair.epsilon,
                });
            }
        }
    }
    Ok(report)
}

/// Affine sandwich `<a,x> + b <= f <= <c,x> + d` on a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearEnvelope {
    pub a: Vec<f64>,
    pub b: f64,
    pub c: Vec<f64>,
    pub d: f64,
}

impl LinearEnvelope {
    pub fn n_vars(&self) -> usize {
        self.a.len()
    }

    pub fn lower_at(&self, x: &[f64]) -> f64 {
        self.a.iter().zip(x).map(|(ai, xi)| ai * xi).sum::<f64>() + self.b
    }

    pub fn upper_at(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(ci, xi)| ci * xi).sum::<f64>() + self.d
    }
}

/// Grid check of a linear envelope; analogous to [`verify_envelope`].
pub fn linear_envelope_verify<F>(
    f: F,
    env: &LinearEnvelope,
    region: &IntervalBox,
    grid_per_axis: usize,
    lin_tol: f64,
) -> Result<Vec<EnvelopeViolation>>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    if grid_per_axis < 2 {
        return Err(CoreError::Invalid("verification grid needs >= 2 points per axis".into()));
    }
    if env.a.len() != region.n_axes() || env.c.len() != region.n_axes() {
        return Err(CoreError::DimensionMismatch {
            left: env.a.len(),
            right: region.n_axes(),
            context: "linear envelope arity".into(),
        });
    }
    let n = region.grid_len(grid_per_axis);
    let rows = map_indexed(n, |i| {
        let x = region.grid_point(i, grid_per_axis);
        let fv = f(&x);
        (env.lower_at(&x) - fv, fv - env.upper_at(&x), x)
    });
    let mut violations = Vec::new();
    for (lower_excess, upper_excess, x) in rows {
        if lower_excess > lin_tol {
            violations.push(EnvelopeViolation {
                side: EnvelopeSide::Lower,
                point: x.clone(),
                amount: lower_excess,
            });
        }
        if upper_excess > lin_tol {
            violations.push(EnvelopeViolation {
                side: EnvelopeSide::Upper,
                point: x,
                amount: upper_excess,
            });
        }
    }
    Ok(violations)
}

/// Chord (secant) coefficients of a univariate function over `[m, M]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChordCoefficients {
    pub a: f64,
    pub b: f64,
    pub m: f64,
    pub big_m: f64,
}

/// `a = (f(M) - f(m)) / (M - m)`, `b = (M f(m) - m f(M)) / (M - m)`; the
/// chord interpolates `f` at both endpoints.
pub fn chord<F>(f: F, m: f64, big_m: f64) -> Result<ChordCoefficients>
where
    F: Fn(f64) -> f64,
{
    if !(m < big_m) {
        return Err(CoreError::Invalid(format!("chord needs m < M, got [{m}, {big_m}]")));
    }
    let fm = f(m);
    let fm_big = f(big_m);
    let a = (fm_big - fm) / (big_m - m);
    let b = (big_m * fm - m * fm_big) / (big_m - m);
    let defect = (a * m + b - fm).abs().max((a * big_m + b - fm_big).abs());
    if defect > 1e-10 * fm.abs().max(fm_big.abs()).max(1.0) {
        return Err(CoreError::Invalid(format!("chord interpolation defect {defect:.3e}")));
    }
    Ok(ChordCoefficients { a, b, m, big_m })
}
