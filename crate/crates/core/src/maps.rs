//! The Kantorovich correction function, polynomial isometry maps
//! `Phi(X) = V* (sum_i a_i X^i) V`, the envelope-based bound operators they
//! induce, and scalar spectrum-range estimation for those operators.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::envelope::EnvelopePair;
use crate::error::{CoreError, Result};
use crate::exec::map_indexed;
use crate::spectral::{eigh, HermitianOperator, IntervalBox, OperatorTuple};

/// Which side of an inequality a bound operator or constant belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Upper,
    Lower,
}

impl Side {
    pub fn label(self) -> &'static str {
        match self {
            Side::Upper => "upper",
            Side::Lower => "lower",
        }
    }
}

/// The Kantorovich function
/// `K(m,M,r) = (mM^r - Mm^r)/((r-1)(M-m)) * [((r-1)(M^r-m^r))/(r(mM^r - Mm^r))]^r`
/// for `0 < m <= M`. Extended by continuity: `K = 1` at `r in {0,1}` and on
/// degenerate intervals.
pub fn kantorovich(m: f64, big_m: f64, r: f64) -> Result<f64> {
    if !(m > 0.0) {
        return Err(CoreError::Positivity {
            what: "Kantorovich lower endpoint".into(),
            min_eig: m,
        });
    }
    if big_m < m {
        return Err(CoreError::Invalid(format!("Kantorovich needs m <= M, got [{m}, {big_m}]")));
    }
    if !r.is_finite() {
        return Err(CoreError::Invalid("Kantorovich exponent must be finite".into()));
    }
    if r == 0.0 || r == 1.0 || big_m - m <= 1e-12 * big_m.max(1.0) {
        return Ok(1.0);
    }
    let mr = m.powf(r);
    let big_mr = big_m.powf(r);
    let cross = m * big_mr - big_m * mr;
    let first = cross / ((r - 1.0) * (big_m - m));
    let bracket = ((r - 1.0) * (big_mr - mr)) / (r * cross);
    Ok(first * bracket.powf(r))
}

/// Polynomial isometry map `Phi(X) = V* (sum_i a_i X^i) V`.
///
/// Coefficients are indexed by integer exponent; the sign of a coefficient
/// decides which envelope its term follows inside a bound operator. Negative
/// exponents are matrix inverse powers and demand positive-definite inputs.
#[derive(Debug, Clone)]
pub struct PolyMap {
    coeffs: BTreeMap<i64, f64>,
    isometry: DMatrix<Complex64>,
}

impl PolyMap {
    /// Build from exponent/coefficient pairs and a d x k isometry
    /// (`V* V = I_k` within 1e-9). Zero coefficients are dropped.
    pub fn new(coeffs: BTreeMap<i64, f64>, isometry: DMatrix<Complex64>) -> Result<Self> {
        let k = isometry.ncols();
        if isometry.nrows() < k || k == 0 {
            return Err(CoreError::Invalid(format!(
                "isometry must be d x k with d >= k >= 1, got {} x {}",
                isometry.nrows(),
                k
            )));
        }
        let defect = (isometry.adjoint() * &isometry - DMatrix::<Complex64>::identity(k, k)).norm();
        if defect > 1e-9 {
            return Err(CoreError::Invalid(format!("V*V - I defect {defect:.3e} exceeds 1e-9")));
        }
        let coeffs: BTreeMap<i64, f64> = coeffs.into_iter().filter(|&(_, a)| a != 0.0).collect();
        for (&i, &a) in &coeffs {
            if !a.is_finite() {
                return Err(CoreError::Invalid(format!("coefficient a_{i} is not finite")));
            }
        }
        Ok(PolyMap { coeffs, isometry })
    }

    /// The normalized positive linear map `X -> V* X V` (only `a_1 = 1`).
    pub fn normalized(isometry: DMatrix<Complex64>) -> Result<Self> {
        Self::new(BTreeMap::from([(1, 1.0)]), isometry)
    }

    /// Build from coefficients and a row-major `[re, im]` isometry (the wire
    /// format used in scenario configs).
    pub fn from_row_major_isometry(
        coeffs: BTreeMap<i64, f64>,
        rows: usize,
        cols: usize,
        entries: &[[f64; 2]],
    ) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(CoreError::DimensionMismatch {
                left: entries.len(),
                right: rows * cols,
                context: "row-major isometry entry count".into(),
            });
        }
        let v = DMatrix::from_fn(rows, cols, |r, c| {
            let [re, im] = entries[r * cols + c];
            Complex64::new(re, im)
        });
        Self::new(coeffs, v)
    }

    /// Normalized map through the leading columns of a seeded Haar unitary.
    pub fn sampled_normalized(dim: usize, columns: usize, seed: u64) -> Result<Self> {
        use rand::SeedableRng;
        if columns == 0 || columns > dim {
            return Err(CoreError::OutOfRange(format!(
                "isometry columns {columns} outside 1..={dim}"
            )));
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let u = crate::spectral::haar_unitary(dim, &mut rng);
        Self::normalized(u.columns(0, columns).into_owned())
    }

    /// The identity map on dimension `d`.
    pub fn identity(d: usize) -> Self {
        PolyMap {
            coeffs: BTreeMap::from([(1, 1.0)]),
            isometry: DMatrix::identity(d, d),
        }
    }

    pub fn coeffs(&self) -> &BTreeMap<i64, f64> {
        &self.coeffs
    }

    pub fn isometry(&self) -> &DMatrix<Complex64> {
        &self.isometry
    }

    /// Input dimension d.
    pub fn input_dim(&self) -> usize {
        self.isometry.nrows()
    }

    /// Output dimension k.
    pub fn output_dim(&self) -> usize {
        self.isometry.ncols()
    }

    /// Whether this is the plain `a_1 = 1` normalized form.
    pub fn is_normalized(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs.get(&1) == Some(&1.0)
    }

    pub fn has_negative_exponent(&self) -> bool {
        self.coeffs.keys().any(|&i| i < 0)
    }

    /// Compress `M` to `V* M V`.
    pub fn compress(&self, m: &DMatrix<Complex64>) -> HermitianOperator {
        HermitianOperator::symmetrized(self.isometry.adjoint() * m * &self.isometry)
    }

    /// Scalar counterpart `sum_i a_i x^i`.
    pub fn eval_scalar(&self, x: f64) -> f64 {
        self.coeffs.iter().map(|(&i, &a)| a * x.powi(i as i32)).sum()
    }
}

/// `Phi(X) = V* (sum_i a_i X^i) V` by spectral calculus.
pub fn apply_polymap(map: &PolyMap, x: &HermitianOperator) -> Result<HermitianOperator> {
    if x.dim() != map.input_dim() {
        return Err(CoreError::DimensionMismatch {
            left: x.dim(),
            right: map.input_dim(),
            context: "polynomial map input".into(),
        });
    }
    let dec = eigh(x);
    if map.has_negative_exponent() {
        let spectral_norm = dec.min_eig().abs().max(dec.max_eig().abs());
        let floor = 1e-10 * spectral_norm.max(1.0);
        if dec.min_eig() <= floor {
            return Err(CoreError::Positivity {
                what: "input of a map with negative exponents".into(),
                min_eig: dec.min_eig(),
            });
        }
    }
    let values: Vec<f64> = dec
        .eigenvalues
        .iter()
        .map(|&l| map.coeffs.iter().map(|(&i, &a)| a * l.powi(i as i32)).sum())
        .collect();
    let poly = dec.assemble(&values);
    Ok(map.compress(poly.matrix()))
}

/// Eigenvalue range of a bound operator, estimated on a grid and padded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRange {
    pub lo: f64,
    pub hi: f64,
    pub padding: f64,
}

impl SpectrumRange {
    pub fn new(lo: f64, hi: f64, padding: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(CoreError::Invalid(format!("range needs lo <= hi, got [{lo}, {hi}]")));
        }
        Ok(SpectrumRange { lo, hi, padding })
    }

    /// Endpoints with padding applied.
    pub fn padded(&self) -> (f64, f64) {
        (self.lo - self.padding, self.hi + self.padding)
    }

    pub fn scale(&self, w: f64) -> SpectrumRange {
        SpectrumRange { lo: self.lo * w, hi: self.hi * w, padding: self.padding * w.abs() }
    }

    /// Interval (Minkowski) sum.
    pub fn add(&self, other: &SpectrumRange) -> SpectrumRange {
        SpectrumRange {
            lo: self.lo + other.lo,
            hi: self.hi + other.hi,
            padding: self.padding + other.padding,
        }
    }

    pub fn zero() -> SpectrumRange {
        SpectrumRange { lo: 0.0, hi: 0.0, padding: 0.0 }
    }
}

/// Kantorovich factor for one polynomial term, given the relevant envelope
/// operator's eigenvalue range. Constant and linear terms pass through
/// uncorrected.
fn term_factor(side: Side, coeff: f64, exponent: i64, ranges: &EnvelopeEigRanges) -> Result<f64> {
    if exponent == 0 || exponent == 1 {
        return Ok(1.0);
    }
    let r = exponent as f64;
    let positive = coeff >= 0.0;
    match (side, positive) {
        // Upper bound, nonnegative coefficient: K over the upper envelope.
        (Side::Upper, true) => kantorovich(ranges.upper.0, ranges.upper.1, r),
        // Upper bound, negative coefficient: 1/K over the lower envelope.
        (Side::Upper, false) => Ok(1.0 / kantorovich(ranges.lower.0, ranges.lower.1, r)?),
        (Side::Lower, true) => Ok(1.0 / kantorovich(ranges.lower.0, ranges.lower.1, r)?),
        (Side::Lower, false) => kantorovich(ranges.upper.0, ranges.upper.1, r),
    }
}

/// Which envelope a polynomial term is raised on, by side and coefficient sign.
fn term_envelope(side: Side, coeff: f64) -> Side {
    match (side, coeff >= 0.0) {
        (Side::Upper, true) | (Side::Lower, false) => Side::Upper,
        (Side::Upper, false) | (Side::Lower, true) => Side::Lower,
    }
}

struct EnvelopeEigRanges {
    lower: (f64, f64),
    upper: (f64, f64),
}

/// Check the positivity preconditions a coefficient set imposes on the
/// envelope values (operator eigenvalues or scalar grid values).
fn check_positivity(map: &PolyMap, min_lower: f64, min_upper: f64, what: &str) -> Result<()> {
    let needs_nonneg_lower = map.coeffs.iter().any(|(&i, &a)| a >= 0.0 && i >= 2);
    let has_negative_coeff = map.coeffs.iter().any(|(_, &a)| a < 0.0);
    let has_negative_exp = map.has_negative_exponent();
    if (needs_nonneg_lower || has_negative_coeff || has_negative_exp) && min_lower < -1e-12 {
        return Err(CoreError::Positivity {
            what: format!("lower envelope of {what}"),
            min_eig: min_lower,
        });
    }
    if (has_negative_coeff || has_negative_exp) && min_upper <= 0.0 {
        return Err(CoreError::Positivity {
            what: format!("upper envelope of {what}"),
            min_eig: min_upper,
        });
    }
    Ok(())
}

/// The Kantorovich-corrected bound operator
/// `V* [ sum_{a_i >= 0} a_i K_i Env^i + sum_{a_i < 0} a_i K_i' Env'^i ] V`
/// that dominates (upper) or is dominated by (lower) `Phi(f(T))`.
pub fn build_poly_bound_operator(
    side: Side,
    map: &PolyMap,
    pair: &EnvelopePair,
    tuple: &OperatorTuple,
) -> Result<HermitianOperator> {
    if tuple.dim() != map.input_dim() {
        return Err(CoreError::DimensionMismatch {
            left: tuple.dim(),
            right: map.input_dim(),
            context: "bound operator dimension".into(),
        });
    }
    let psi_lower = pair.lower.eval_operator(tuple)?;
    let psi_upper = pair.upper.eval_operator(tuple)?;
    let dec_lower = eigh(&psi_lower);
    let dec_upper = eigh(&psi_upper);
    check_positivity(map, dec_lower.min_eig(), dec_upper.min_eig(), "the operator tuple")?;
    let ranges = EnvelopeEigRanges {
        lower: (dec_lower.min_eig(), dec_lower.max_eig()),
        upper: (dec_upper.min_eig(), dec_upper.max_eig()),
    };

    let dim = tuple.dim();
    let mut poly = DMatrix::<Complex64>::zeros(dim, dim);
    for (&exponent, &coeff) in &map.coeffs {
        let factor = term_factor(side, coeff, exponent, &ranges)?;
        let dec = match term_envelope(side, coeff) {
            Side::Upper => &dec_upper,
            Side::Lower => &dec_lower,
        };
        if exponent < 0 && dec.min_eig() <= 1e-10 * dec.max_eig().abs().max(1.0) {
            return Err(CoreError::Positivity {
                what: format!("envelope raised to negative exponent {exponent}"),
                min_eig: dec.min_eig(),
            });
        }
        let values: Vec<f64> =
            dec.eigenvalues.iter().map(|&l| coeff * factor * l.powi(exponent as i32)).collect();
        poly += dec.assemble(&values).matrix();
    }
    Ok(map.compress(&poly))
}

/// How the Kantorovich factor enters a scalar range scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeStyle {
    /// Every term uses the box-global Kantorovich factor.
    BoxGlobal,
    /// Each term's factor is bracketed between 1 and the box-global value,
    /// which encloses any operator whose envelope spectrum is a sub-interval
    /// of the scanned one. Wider but containment-safe.
    FactorHull,
}

/// Scalar counterpart of [`build_poly_bound_operator`] scanned over a box
/// grid: the Kantorovich factors use the box-global envelope min/max, each
/// grid point contributes `sum_i a_i K_i Psi(x)^i`, and the resulting range
/// is padded by `1e-6 * width`. Ranges computed this way are grid
/// estimates, not rigorous enclosures.
pub fn scalar_poly_range(
    side: Side,
    map: &PolyMap,
    pair: &EnvelopePair,
    region: &IntervalBox,
    grid_per_axis: usize,
) -> Result<SpectrumRange> {
    let (lower_vals, upper_vals) = envelope_grid_values(pair, region, grid_per_axis)?;
    scalar_poly_range_from_values(side, map, &lower_vals, &upper_vals, RangeStyle::BoxGlobal)
}

/// [`scalar_poly_range`] with the factor-hull style; this is what certificate
/// ranges are built from.
pub fn scalar_poly_range_hull(
    side: Side,
    map: &PolyMap,
    pair: &EnvelopePair,
    region: &IntervalBox,
    grid_per_axis: usize,
) -> Result<SpectrumRange> {
    let (lower_vals, upper_vals) = envelope_grid_values(pair, region, grid_per_axis)?;
    scalar_poly_range_from_values(side, map, &lower_vals, &upper_vals, RangeStyle::FactorHull)
}

/// Both envelopes evaluated over a capped uniform grid on `region`.
pub fn envelope_grid_values(
    pair: &EnvelopePair,
    region: &IntervalBox,
    grid_per_axis: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if grid_per_axis < 2 {
        return Err(CoreError::Invalid("range grid needs >= 2 points per axis".into()));
    }
    if region.n_axes() != pair.upper.n_vars {
        return Err(CoreError::DimensionMismatch {
            left: region.n_axes(),
            right: pair.upper.n_vars,
            context: "range box arity".into(),
        });
    }
    let res = region.capped_resolution(grid_per_axis, 1 << 18);
    let n = region.grid_len(res);
    let values: Vec<(f64, f64)> = map_indexed(n, |i| {
        let x = region.grid_point(i, res);
        (pair.lower.eval_scalar(&x).unwrap(), pair.upper.eval_scalar(&x).unwrap())
    });
    let lower = values.iter().map(|v| v.0).collect();
    let upper = values.iter().map(|v| v.1).collect();
    Ok((lower, upper))
}

/// Range of the scalar bound polynomial over precomputed envelope values.
pub fn scalar_poly_range_from_values(
    side: Side,
    map: &PolyMap,
    lower_vals: &[f64],
    upper_vals: &[f64],
    style: RangeStyle,
) -> Result<SpectrumRange> {
    let fold = |vals: &[f64], init: f64, op: fn(f64, f64) -> f64| vals.iter().cloned().fold(init, op);
    let min_lower = fold(lower_vals, f64::INFINITY, f64::min);
    let max_lower = fold(lower_vals, f64::NEG_INFINITY, f64::max);
    let min_upper = fold(upper_vals, f64::INFINITY, f64::min);
    let max_upper = fold(upper_vals, f64::NEG_INFINITY, f64::max);
    check_positivity(map, min_lower, min_upper, "the box grid")?;
    let ranges = EnvelopeEigRanges {
        lower: (min_lower, max_lower),
        upper: (min_upper, max_upper),
    };

    // Per term: scaled coefficient at the box-global factor and at factor 1.
    let mut factors: Vec<(i64, f64, f64, Side)> = Vec::new();
    for (&exponent, &coeff) in &map.coeffs {
        let env = term_envelope(side, coeff);
        if exponent < 0 {
            let floor = match env {
                Side::Lower => min_lower,
                Side::Upper => min_upper,
            };
            if floor <= 0.0 {
                return Err(CoreError::Positivity {
                    what: format!("scalar envelope raised to negative exponent {exponent}"),
                    min_eig: floor,
                });
            }
        }
        let boxed = coeff * term_factor(side, coeff, exponent, &ranges)?;
        let unit = match style {
            RangeStyle::BoxGlobal => boxed,
            RangeStyle::FactorHull => coeff,
        };
        factors.push((exponent, boxed, unit, env));
    }

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (&l_val, &u_val) in lower_vals.iter().zip(upper_vals) {
        let mut acc_lo = 0.0;
        let mut acc_hi = 0.0;
        for &(exponent, boxed, unit, env) in &factors {
            let base = match env {
                Side::Lower => l_val,
                Side::Upper => u_val,
            };
            let term = base.powi(exponent as i32);
            let (a, b) = (boxed * term, unit * term);
            acc_lo += a.min(b);
            acc_hi += a.max(b);
        }
        lo = lo.min(acc_lo);
        hi = hi.max(acc_hi);
    }
    let padding = 1e-6 * (hi - lo);
    SpectrumRange::new(lo, hi, padding)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::{fit_envelopes, FitConfig, SigmoidCombination, SigmoidTerm};
    use crate::spectral::{haar_unitary, loewner_leq, random_hermitian_in};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kantorovich_hand_values() {
        // (1,2,2): first factor 2, bracket 3/4, squared -> 2 * 9/16.
        assert_abs_diff_eq!(kantorovich(1.0, 2.0, 2.0).unwrap(), 1.125, epsilon = 1e-14);
        // Degenerate interval.
        assert_abs_diff_eq!(kantorovich(5.0, 5.0, 3.0).unwrap(), 1.0, epsilon = 0.0);
        // (1,3,-1): first factor 2/3, bracket 2.
        assert_abs_diff_eq!(kantorovich(1.0, 3.0, -1.0).unwrap(), 4.0 / 3.0, epsilon = 1e-14);

        assert!(kantorovich(0.0, 1.0, 2.0).is_err());
        assert!(kantorovich(2.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn kantorovich_r2_closed_form_and_scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let m = rng.random_range(0.1..2.0);
            let big_m = m + rng.random_range(0.01..3.0);
            let k2 = kantorovich(m, big_m, 2.0).unwrap();
            assert_abs_diff_eq!(k2, (m + big_m).powi(2) / (4.0 * m * big_m), epsilon = 1e-12);

            let r = rng.random_range(-3.0..3.0);
            let c = rng.random_range(0.1..10.0);
            let k = kantorovich(m, big_m, r).unwrap();
            let kc = kantorovich(c * m, c * big_m, r).unwrap();
            assert!((k - kc).abs() <= 1e-10 * k.abs().max(1.0), "K({m},{big_m},{r}) scale");
        }
    }

    #[test]
    fn polymap_identity_and_normalization() {
        let map = PolyMap::identity(3);
        let x = HermitianOperator::from_diagonal(&[1.0, -0.5, 2.0]);
        let r = apply_polymap(&map, &x).unwrap();
        assert!(r.sub(&x).unwrap().frob_norm() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let u = haar_unitary(4, &mut rng);
            let v = u.columns(0, 2).into_owned();
            let map = PolyMap::normalized(v).unwrap();
            let r = apply_polymap(&map, &HermitianOperator::identity(4)).unwrap();
            assert!(r.sub(&HermitianOperator::identity(2)).unwrap().frob_norm() < 1e-10);
        }
    }

    #[test]
    fn polymap_positivity_of_normalized_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..25 {
            let u = haar_unitary(5, &mut rng);
            let v = u.columns(0, 3).into_owned();
            let map = PolyMap::normalized(v).unwrap();
            let b = random_hermitian_in(5, -1.0, 1.0, None, &mut rng);
            let bump = random_hermitian_in(5, 0.0, 2.0, None, &mut rng);
            let a = b.add(&bump).unwrap();
            let pa = apply_polymap(&map, &a).unwrap();
            let pb = apply_polymap(&map, &b).unwrap();
            assert!(loewner_leq(&pb, &pa, 1e-10).unwrap().holds);
        }
    }

    #[test]
    fn polymap_square_compression_scalar() {
        // V = e1 (d=2, k=1), X = diag(1,2): V* X^2 V = 1.
        let v = DMatrix::from_column_slice(2, 1, &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let map = PolyMap::new(BTreeMap::from([(2, 1.0)]), v).unwrap();
        let x = HermitianOperator::from_diagonal(&[1.0, 2.0]);
        let r = apply_polymap(&map, &x).unwrap();
        assert_eq!(r.dim(), 1);
        assert_abs_diff_eq!(r.matrix()[(0, 0)].re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn polymap_negative_exponent_requires_pd() {
        let map = PolyMap::new(BTreeMap::from([(-1, 1.0)]), DMatrix::identity(2, 2)).unwrap();
        let x = HermitianOperator::from_diagonal(&[0.0, 1.0]);
        assert!(matches!(apply_polymap(&map, &x), Err(CoreError::Positivity { .. })));
        let y = HermitianOperator::from_diagonal(&[0.5, 1.0]);
        let r = apply_polymap(&map, &y).unwrap();
        assert_abs_diff_eq!(r.matrix()[(0, 0)].re, 2.0, epsilon = 1e-12);
    }

    /// A constant-value envelope pair around the constant function c.
    fn constant_pair(c: f64, n_vars: usize, region: IntervalBox) -> EnvelopePair {
        let combo = |value: f64| {
            SigmoidCombination::new(
                n_vars,
                vec![SigmoidTerm {
                    outer: value / crate::spectral::sigmoid(60.0),
                    offset: 60.0,
                    inner: vec![0.0; n_vars],
                }],
            )
            .unwrap()
        };
        EnvelopePair {
            lower: combo(c),
            upper: combo(c),
            epsilon: 1e-9,
            region,
            verification_grid: 2,
            achieved_gap_lower: 0.0,
            achieved_gap_upper: 0.0,
        }
    }

    #[test]
    fn bound_operator_identity_map_returns_envelope() {
        let region = IntervalBox::new(vec![(0.0, 1.0)]).unwrap();
        let pair = fit_envelopes(|x| x[0], &region, 0.05, &FitConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_hermitian_in(4, 0.0, 1.0, None, &mut rng);
        let t = OperatorTuple::new(vec![a]).unwrap();
        let bound = build_poly_bound_operator(Side::Upper, &PolyMap::identity(4), &pair, &t).unwrap();
        let psi_u = pair.upper.eval_operator(&t).unwrap();
        assert!(bound.sub(&psi_u).unwrap().frob_norm() < 1e-10);
    }

    #[test]
    fn bound_operator_constant_envelope_squares() {
        let region = IntervalBox::new(vec![(0.0, 1.0)]).unwrap();
        let pair = constant_pair(3.0, 1, region);
        let map = PolyMap::new(BTreeMap::from([(2, 1.0)]), DMatrix::identity(3, 3)).unwrap();
        let t = OperatorTuple::new(vec![HermitianOperator::from_diagonal(&[0.2, 0.5, 0.9])]).unwrap();
        let bound = build_poly_bound_operator(Side::Upper, &map, &pair, &t).unwrap();
        // Constant envelope c: degenerate spectrum, K = 1, bound = c^2 I.
        assert!(bound.sub(&HermitianOperator::identity(3).scale(9.0)).unwrap().frob_norm() < 1e-8);
    }

    #[test]
    fn bound_operator_dominates_phi_of_f_squared() {
        // Random commuting tuples, map a_2 = 1: Phi(f(T)) <= bound (upper side).
        let region = IntervalBox::new(vec![(0.5, 1.5), (0.5, 1.5)]).unwrap();
        let f = |x: &[f64]| 1.0 + 0.5 * x[0] * x[1];
        let pair = fit_envelopes(f, &region, 0.1, &FitConfig::default()).unwrap();
        let map = PolyMap::new(BTreeMap::from([(2, 1.0)]), DMatrix::identity(5, 5)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let u = haar_unitary(5, &mut rng);
            let t = OperatorTuple::new(vec![
                random_hermitian_in(5, 0.5, 1.5, Some(&u), &mut rng),
                random_hermitian_in(5, 0.5, 1.5, Some(&u), &mut rng),
            ])
            .unwrap();
            let f_op = crate::spectral::multivariate_operator_function(f, &t, 1e-8).unwrap();
            let phi_f2 = apply_polymap(&map, &f_op).unwrap();
            let upper = build_poly_bound_operator(Side::Upper, &map, &pair, &t).unwrap();
            let lower = build_poly_bound_operator(Side::Lower, &map, &pair, &t).unwrap();
            assert!(loewner_leq(&phi_f2, &upper, 1e-8).unwrap().holds);
            assert!(loewner_leq(&lower, &phi_f2, 1e-8).unwrap().holds);
        }
    }

    #[test]
    fn scalar_range_identity_and_squared() {
        // Envelope pair == x on [1,2] via a linear fit with tiny epsilon is
        // overkill; a constant-direction check still pins the K factors.
        let region = IntervalBox::new(vec![(1.0, 2.0)]).unwrap();
        let pair = fit_envelopes(|x| x[0], &region, 0.01, &FitConfig::default()).unwrap();

        let ident = scalar_poly_range(Side::Upper, &PolyMap::identity(2), &pair, &region, 65).unwrap();
        assert!((ident.lo - 1.0).abs() < 0.02, "lo {}", ident.lo);
        assert!((ident.hi - 2.0).abs() < 0.02, "hi {}", ident.hi);

        let sq = PolyMap::new(BTreeMap::from([(2, 1.0)]), DMatrix::identity(2, 2)).unwrap();
        let r = scalar_poly_range(Side::Upper, &sq, &pair, &region, 65).unwrap();
        // K(~1,~2,2) ~ 1.125: endpoints near 1.125 and 4.5.
        assert!((r.lo - 1.125).abs() < 0.08, "lo {}", r.lo);
        assert!((r.hi - 4.5).abs() < 0.2, "hi {}", r.hi);

        assert!(scalar_poly_range(Side::Upper, &sq, &pair, &region, 1).is_err());
    }

    #[test]
    fn range_arithmetic() {
        let a = SpectrumRange::new(1.0, 2.0, 0.1).unwrap();
        let b = SpectrumRange::new(-1.0, 3.0, 0.0).unwrap();
        let s = a.add(&b);
        assert_eq!((s.lo, s.hi), (0.0, 5.0));
        let w = a.scale(0.5);
        assert_eq!((w.lo, w.hi, w.padding), (0.5, 1.0, 0.05));
        assert!(SpectrumRange::new(2.0, 1.0, 0.0).is_err());
    }
}
