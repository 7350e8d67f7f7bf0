//! Bounds algebra: interval-coefficient monoids for combining certificate
//! constants, and Monte-Carlo verification of the random-ensemble tail
//! inequalities with Ky Fan norms.
//!
//! The Monte-Carlo check uses paired sampling: each trial draws one family
//! and evaluates both threshold events on the same draw, so the probability
//! inequality follows from per-path operator domination plus counting rather
//! than from independent estimation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    box_optimize, BoundCertificate, ExtremalMode, GFunction, MapAssignment, OperatorFamily,
    OptimizeConfig, PhiSumExpr, WeightGrid,
};
use crate::envelope::LinearEnvelope;
use crate::error::{CoreError, Result};
use crate::exec::map_indexed;
use crate::maps::{Side, SpectrumRange};
use crate::spectral::{
    eigh, haar_unitary, ky_fan_norm, loewner_leq, random_hermitian_in, HermitianOperator,
    IntervalBox,
};

/// Closed real interval, the coefficient object of the bounds algebra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalCoefficient {
    pub lo: f64,
    pub hi: f64,
}

impl IntervalCoefficient {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(CoreError::Invalid(format!("interval needs lo <= hi, got [{lo}, {hi}]")));
        }
        Ok(IntervalCoefficient { lo, hi })
    }
}

/// `[p.lo + q.lo, p.hi + q.hi]`.
pub fn interval_add(p: IntervalCoefficient, q: IntervalCoefficient) -> IntervalCoefficient {
    IntervalCoefficient { lo: p.lo + q.lo, hi: p.hi + q.hi }
}

/// `[p.lo * q.lo, p.hi * q.hi]`; defined only for positive intervals.
pub fn interval_mul(
    p: IntervalCoefficient,
    q: IntervalCoefficient,
) -> Result<IntervalCoefficient> {
    if !(p.lo > 0.0 && q.lo > 0.0) {
        return Err(CoreError::Positivity {
            what: "interval multiplication needs positive intervals".into(),
            min_eig: p.lo.min(q.lo),
        });
    }
    Ok(IntervalCoefficient { lo: p.lo * q.lo, hi: p.hi * q.hi })
}

/// How two certificates are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CombineMode {
    Add,
    Mul,
}

/// Combine two upper certificates sharing the same `g(args)` operator:
/// addition sums the constants against `g(args)`, multiplication multiplies
/// them against `g(args)^2` (commuting, nonnegative sides required).
pub fn combine_operator_bounds(
    mode: CombineMode,
    cert_f: &BoundCertificate,
    cert_h: &BoundCertificate,
    cert_tol: f64,
) -> Result<BoundCertificate> {
    let g_f = cert_f.g_operator.as_ref().ok_or_else(|| {
        CoreError::Invalid("certificate carries no g operator to combine against".into())
    })?;
    let g_h = cert_h.g_operator.as_ref().ok_or_else(|| {
        CoreError::Invalid("certificate carries no g operator to combine against".into())
    })?;
    if cert_f.side != Side::Upper || cert_h.side != Side::Upper {
        return Err(CoreError::Invalid("only upper certificates combine".into()));
    }
    let defect = g_f.sub(g_h)?.frob_norm();
    if defect > 1e-9 * g_f.frob_norm().max(1.0) {
        return Err(CoreError::Invalid(format!(
            "mismatched g(args) operators (defect {defect:.3e})"
        )));
    }

    let mut ranges = cert_f.ranges_used.clone();
    ranges.extend(cert_h.ranges_used.iter().cloned());
    let mut notes = vec![format!(
        "combined from [{}] and [{}]",
        cert_f.inequality_id, cert_h.inequality_id
    )];

    match mode {
        CombineMode::Add => {
            let constant = cert_f.constant + cert_h.constant;
            let lhs = cert_f.lhs.add(&cert_h.lhs)?;
            let rhs = g_f.scale(constant);
            let check = loewner_leq(&lhs, &rhs, cert_tol)?;
            notes.push("constants add against the shared g(args)".into());
            Ok(BoundCertificate {
                inequality_id: "combined-add/upper".into(),
                side: Side::Upper,
                lhs,
                rhs,
                constant,
                constant_provenance: format!(
                    "{} + {}",
                    cert_f.constant, cert_h.constant
                ),
                witness: check.witness,
                holds: check.holds,
                ranges_used: ranges,
                g_operator: Some(g_f.clone()),
                notes,
            })
        }
        CombineMode::Mul => {
            if !(cert_f.constant > 0.0 && cert_h.constant > 0.0) {
                return Err(CoreError::Positivity {
                    what: "multiplicative combination needs positive constants".into(),
                    min_eig: cert_f.constant.min(cert_h.constant),
                });
            }
            let g_min = eigh(g_f).min_eig();
            if g_min < -cert_tol {
                return Err(CoreError::Positivity {
                    what: "multiplicative combination needs g(args) >= 0".into(),
                    min_eig: g_min,
                });
            }
            for (label, op) in [("left", &cert_f.lhs), ("right", &cert_h.lhs)] {
                let min = eigh(op).min_eig();
                if min < -cert_tol {
                    return Err(CoreError::Positivity {
                        what: format!("{label} factor of a product certificate"),
                        min_eig: min,
                    });
                }
            }
            let raw = cert_f.lhs.mul_raw(&cert_h.lhs)?;
            let herm_defect = (&raw - raw.adjoint()).norm();
            if herm_defect > 1e-8 * raw.norm().max(1.0) {
                return Err(CoreError::NotHermitian {
                    asymmetry: herm_defect,
                    tol: 1e-8 * raw.norm().max(1.0),
                });
            }
            let lhs = HermitianOperator::symmetrized(raw);
            let constant = cert_f.constant * cert_h.constant;
            let g_sq = HermitianOperator::symmetrized(g_f.mul_raw(g_h)?);
            let rhs = g_sq.scale(constant);
            let check = loewner_leq(&lhs, &rhs, cert_tol)?;
            notes.push("constants multiply against the shared g(args)^2".into());
            Ok(BoundCertificate {
                inequality_id: "combined-mul/upper".into(),
                side: Side::Upper,
                lhs,
                rhs,
                constant,
                constant_provenance: format!(
                    "{} * {}",
                    cert_f.constant, cert_h.constant
                ),
                witness: check.witness,
                holds: check.holds,
                ranges_used: ranges,
                g_operator: Some(g_f.clone()),
                notes,
            })
        }
    }
}

/// Random Hermitian ensemble description. Boxes may be degenerate (`lo ==
/// hi`), in which case the drawn operator is exactly `lo * I`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub dim: usize,
    /// Per-axis spectrum boxes `[m_i, M_i]`, `m_i <= M_i`.
    pub boxes: Vec<(f64, f64)>,
    /// Operators per axis.
    pub counts: Vec<usize>,
    pub seed: u64,
    /// Share one Haar eigenbasis across the whole family.
    pub commuting: bool,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(CoreError::Invalid("ensemble dimension must be >= 1".into()));
        }
        for &(lo, hi) in &self.boxes {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(CoreError::Invalid(format!("bad spectrum box [{lo}, {hi}]")));
            }
        }
        if self.counts.len() != self.boxes.len() || self.counts.contains(&0) {
            return Err(CoreError::Invalid("counts must match the box axes and be positive".into()));
        }
        Ok(())
    }

    /// The spectrum boxes as a proper interval box, with degenerate axes
    /// widened by a relative hair so grid machinery stays defined.
    pub fn effective_region(&self) -> Result<IntervalBox> {
        IntervalBox::new(
            self.boxes
                .iter()
                .map(|&(lo, hi)| {
                    if lo < hi {
                        (lo, hi)
                    } else {
                        let eps = 1e-9 * lo.abs().max(1.0);
                        (lo - eps, hi + eps)
                    }
                })
                .collect(),
        )
    }
}

/// Draw one operator family: each operator is `U diag(uniform in [m_i, M_i]) U*`
/// with Haar-random `U`; the commuting flag shares one `U` across the family.
/// Degenerate boxes produce exact multiples of the identity.
pub fn sample_ensemble(spec: &EnsembleSpec) -> Result<OperatorFamily> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let shared = if spec.commuting { Some(haar_unitary(spec.dim, &mut rng)) } else { None };
    let mut axes = Vec::with_capacity(spec.counts.len());
    for (axis, &k) in spec.counts.iter().enumerate() {
        let (lo, hi) = spec.boxes[axis];
        let ops = (0..k)
            .map(|_| random_hermitian_in(spec.dim, lo, hi, shared.as_ref(), &mut rng))
            .collect();
        axes.push(ops);
    }
    OperatorFamily::new(axes, spec.effective_region()?, 1e-8, 1e-8)
}

/// Which statistic the tail query inspects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailStatistic {
    /// Sum of the two bounded function-sums.
    Sum,
    /// Their product (commuting ensembles only).
    Product,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailQuery {
    pub theta: f64,
    /// Ky Fan order.
    pub ell: usize,
    pub trials: usize,
    pub statistic: TailStatistic,
}

/// One bounded function in a tail experiment: `f <= <c, x> + d` on the box.
pub struct TailFunctionSpec<'a> {
    pub label: String,
    pub f: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    /// Upper linear envelope coefficients (`c`, `d`).
    pub upper: LinearEnvelope,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailReport {
    pub trials: usize,
    pub accepted: usize,
    pub excluded: usize,
    pub p_lhs: f64,
    pub p_rhs: f64,
    pub stderr_lhs: f64,
    pub stderr_rhs: f64,
    pub theta: f64,
    pub ell: usize,
    pub statistic: TailStatistic,
    pub alpha_f: f64,
    pub alpha_h: f64,
    /// Accepted trials where the left event fired but the right one did not.
    pub domination_violations: usize,
    /// Accepted trials where a pathwise Loewner certificate failed.
    pub certificate_violations: usize,
    pub direction_holds: bool,
}

struct TrialOutcome {
    excluded: bool,
    event_lhs: bool,
    event_rhs: bool,
    cert_ok: bool,
}

/// Paired Monte-Carlo check of the tail-bound direction: on every draw the
/// left statistic's threshold event is compared against the bounding
/// statistic's event, with the pathwise Loewner certificates asserted on the
/// same draw.
pub fn mc_tail_check(
    ens: &EnsembleSpec,
    f_spec: &TailFunctionSpec<'_>,
    h_spec: &TailFunctionSpec<'_>,
    g: &GFunction,
    weights: &WeightGrid,
    query: &TailQuery,
) -> Result<TailReport> {
    if query.trials < 100 {
        return Err(CoreError::Invalid("tail checks need at least 100 trials".into()));
    }
    if query.ell < 1 || query.ell > ens.dim {
        return Err(CoreError::OutOfRange(format!(
            "Ky Fan order {} outside 1..={}",
            query.ell, ens.dim
        )));
    }
    ens.validate()?;
    let region = ens.effective_region()?;
    let n = region.n_axes();
    for spec in [f_spec, h_spec] {
        if spec.upper.n_vars() != n {
            return Err(CoreError::DimensionMismatch {
                left: spec.upper.n_vars(),
                right: n,
                context: format!("upper envelope arity of {}", spec.label),
            });
        }
    }
    if g.arity() != n || weights.counts() != ens.counts {
        return Err(CoreError::Invalid("g arity and weights must match the ensemble".into()));
    }

    // Draw-independent envelope constants: alpha = max over the box of
    // (upper envelope) / g.
    let alpha_of = |env: &LinearEnvelope| -> Result<f64> {
        let domains: Vec<SpectrumRange> = region
            .intervals()
            .iter()
            .map(|&(lo, hi)| SpectrumRange { lo, hi, padding: 0.0 })
            .collect();
        let env = env.clone();
        let h = move |x: &[f64]| match g.eval_scalar(x) {
            Ok(gv) if gv > 0.0 => env.upper_at(x) / gv,
            _ => f64::NAN,
        };
        Ok(box_optimize(h, &domains, ExtremalMode::Max, &OptimizeConfig::default())?.value)
    };
    let alpha_f = alpha_of(&f_spec.upper)?;
    let alpha_h = alpha_of(&h_spec.upper)?;
    if query.statistic == TailStatistic::Product && !(alpha_f > 0.0 && alpha_h > 0.0) {
        return Err(CoreError::Positivity {
            what: "product tail bounds need positive envelope constants".into(),
            min_eig: alpha_f.min(alpha_h),
        });
    }

    let maps = MapAssignment::Shared(crate::maps::PolyMap::identity(ens.dim));
    let outcomes: Vec<Result<TrialOutcome>> = map_indexed(query.trials, |t| {
        let trial_spec = EnsembleSpec {
            seed: ens.seed ^ (t as u64).wrapping_mul(0x9E3779B97F4A7C15) ^ 0x7461696c,
            ..ens.clone()
        };
        run_trial(&trial_spec, f_spec, h_spec, g, weights, &maps, query, alpha_f, alpha_h)
    });

    let mut accepted = 0usize;
    let mut excluded = 0usize;
    let mut hits_lhs = 0usize;
    let mut hits_rhs = 0usize;
    let mut domination_violations = 0usize;
    let mut certificate_violations = 0usize;
    for outcome in outcomes {
        match outcome {
            Err(e) if e.is_precondition() => excluded += 1,
            Err(e) => return Err(e),
            Ok(o) if o.excluded => excluded += 1,
            Ok(o) => {
                accepted += 1;
                hits_lhs += o.event_lhs as usize;
                hits_rhs += o.event_rhs as usize;
                if o.event_lhs && !o.event_rhs {
                    domination_violations += 1;
                }
                if !o.cert_ok {
                    certificate_violations += 1;
                }
            }
        }
    }
    if accepted == 0 {
        return Err(CoreError::Invalid("every tail trial was excluded".into()));
    }
    let p = |hits: usize| hits as f64 / accepted as f64;
    let se = |p: f64| (p * (1.0 - p) / accepted as f64).sqrt();
    let (p_lhs, p_rhs) = (p(hits_lhs), p(hits_rhs));
    let (stderr_lhs, stderr_rhs) = (se(p_lhs), se(p_rhs));
    let pooled = (stderr_lhs.powi(2) + stderr_rhs.powi(2)).sqrt();
    Ok(TailReport {
        trials: query.trials,
        accepted,
        excluded,
        p_lhs,
        p_rhs,
        stderr_lhs,
        stderr_rhs,
        theta: query.theta,
        ell: query.ell,
        statistic: query.statistic,
        alpha_f,
        alpha_h,
        domination_violations,
        certificate_violations,
        direction_holds: p_lhs <= p_rhs + 3.0 * pooled,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_trial(
    ens: &EnsembleSpec,
    f_spec: &TailFunctionSpec<'_>,
    h_spec: &TailFunctionSpec<'_>,
    g: &GFunction,
    weights: &WeightGrid,
    maps: &MapAssignment,
    query: &TailQuery,
    alpha_f: f64,
    alpha_h: f64,
) -> Result<TrialOutcome> {
    let family = sample_ensemble(ens)?;
    let f_sum = crate::bounds::weighted_phi_sum(
        &PhiSumExpr::FOfTuple(f_spec.f),
        &family,
        maps,
        weights,
        1e-8,
    )?;
    let h_sum = crate::bounds::weighted_phi_sum(
        &PhiSumExpr::FOfTuple(h_spec.f),
        &family,
        maps,
        weights,
        1e-8,
    )?;
    let mut g_args = Vec::with_capacity(family.n_axes());
    for axis in 0..family.n_axes() {
        g_args.push(crate::bounds::weighted_phi_sum(
            &PhiSumExpr::RawAxis(axis),
            &family,
            maps,
            weights,
            1e-8,
        )?);
    }
    let g_op = g.eval_operator(&g_args, 1e-8)?;

    // Nonnegative statistics are a precondition for Ky Fan monotonicity.
    let pd_tol = 1e-8;
    if eigh(&f_sum).min_eig() < -pd_tol || eigh(&h_sum).min_eig() < -pd_tol {
        return Ok(TrialOutcome { excluded: true, event_lhs: false, event_rhs: false, cert_ok: true });
    }

    // Pathwise certificates on this draw.
    let cert_f = loewner_leq(&f_sum, &g_op.scale(alpha_f), 1e-8)?;
    let cert_h = loewner_leq(&h_sum, &g_op.scale(alpha_h), 1e-8)?;
    let cert_ok = cert_f.holds && cert_h.holds;

    let (event_lhs, event_rhs) = match query.statistic {
        TailStatistic::Sum => {
            let lhs_stat = ky_fan_norm(&f_sum.add(&h_sum)?, query.ell)?;
            let rhs_stat = ky_fan_norm(&g_op.scale(alpha_f + alpha_h), query.ell)?;
            (lhs_stat >= query.theta, rhs_stat >= query.theta)
        }
        TailStatistic::Product => {
            let raw = f_sum.mul_raw(&h_sum)?;
            let defect = (&raw - raw.adjoint()).norm();
            if defect > 1e-8 * raw.norm().max(1.0) {
                // Product left the Hermitian class: precondition miss.
                return Ok(TrialOutcome {
                    excluded: true,
                    event_lhs: false,
                    event_rhs: false,
                    cert_ok: true,
                });
            }
            let product = HermitianOperator::symmetrized(raw);
            let lhs_stat = ky_fan_norm(&product, query.ell)?;
            // Rescaled threshold: || g(args) ||_ell >= sqrt(theta / (a_f a_h)).
            let rhs_stat = ky_fan_norm(&g_op, query.ell)?;
            let rescaled = (query.theta / (alpha_f * alpha_h)).sqrt();
            (lhs_stat >= query.theta, rhs_stat >= rescaled)
        }
    };
    Ok(TrialOutcome { excluded: false, event_lhs, event_rhs, cert_ok })
}
