//! Dense Hermitian linear algebra: eigendecomposition, spectral calculus,
//! Loewner-order testing, Ky Fan norms, and joint diagonalization of
//! commuting tuples.
//!
//! Everything downstream certifies inequalities against this module: a
//! certificate "holds" exactly when the minimum eigenvalue of its slack
//! operator (computed here) clears the tolerance.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Default numerical tolerances. All relative unless noted.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Hermitian symmetry defect, relative to `max(1, ||H||_F)`.
    pub herm_tol: f64,
    /// Basis orthonormality defect (absolute Frobenius).
    pub ortho_tol: f64,
    /// Reconstruction defect, relative to `max(1, ||H||_F)`.
    pub recon_tol: f64,
    /// Commutator bound for joint diagonalization, relative to `max_i ||A_i||_F`.
    pub commutator_tol: f64,
    /// Positive-definiteness floor, relative to the spectral norm.
    pub pd_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            herm_tol: 1e-9,
            ortho_tol: 1e-9,
            recon_tol: 1e-9,
            commutator_tol: 1e-8,
            pd_tol: 1e-10,
        }
    }
}

/// Dense square complex matrix, Hermitian within tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    entries: DMatrix<Complex64>,
}

impl HermitianOperator {
    /// Wrap a matrix after checking the Hermitian invariant
    /// `||H - H*||_F <= herm_tol * max(1, ||H||_F)`.
    pub fn new(entries: DMatrix<Complex64>, herm_tol: f64) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(CoreError::DimensionMismatch {
                left: entries.nrows(),
                right: entries.ncols(),
                context: "operator must be square".into(),
            });
        }
        if entries.nrows() == 0 {
            return Err(CoreError::Invalid("operator dimension must be >= 1".into()));
        }
        let scale = entries.norm().max(1.0);
        let asymmetry = (&entries - entries.adjoint()).norm();
        if asymmetry > herm_tol * scale {
            return Err(CoreError::NotHermitian {
                asymmetry,
                tol: herm_tol * scale,
            });
        }
        Ok(HermitianOperator { entries })
    }

    /// `new` with the default tolerance.
    pub fn from_matrix(entries: DMatrix<Complex64>) -> Result<Self> {
        Self::new(entries, Tolerances::default().herm_tol)
    }

    /// Symmetrize `(M + M*)/2` unconditionally; for matrices that are
    /// Hermitian up to roundoff this removes the defect exactly.
    pub fn symmetrized(entries: DMatrix<Complex64>) -> Self {
        let sym = (&entries + entries.adjoint()).scale(0.5);
        HermitianOperator { entries: sym }
    }

    pub fn from_real(m: &DMatrix<f64>) -> Result<Self> {
        Self::from_matrix(m.map(|x| Complex64::new(x, 0.0)))
    }

    /// Build from row-major `[re, im]` entry pairs (the wire format).
    pub fn from_row_major_pairs(dim: usize, entries: &[[f64; 2]]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(CoreError::DimensionMismatch {
                left: entries.len(),
                right: dim * dim,
                context: "row-major entry count".into(),
            });
        }
        Self::from_matrix(DMatrix::from_fn(dim, dim, |r, c| {
            let [re, im] = entries[r * dim + c];
            Complex64::new(re, im)
        }))
    }

    /// Row-major `[re, im]` entry pairs (the wire format).
    pub fn to_row_major_pairs(&self) -> Vec<[f64; 2]> {
        let d = self.dim();
        let mut out = Vec::with_capacity(d * d);
        for r in 0..d {
            for c in 0..d {
                let z = self.entries[(r, c)];
                out.push([z.re, z.im]);
            }
        }
        out
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        let mut m = DMatrix::zeros(d, d);
        for (i, &x) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(x, 0.0);
        }
        HermitianOperator { entries: m }
    }

    pub fn identity(dim: usize) -> Self {
        HermitianOperator {
            entries: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianOperator {
            entries: DMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn frob_norm(&self) -> f64 {
        self.entries.norm()
    }

    pub fn scale(&self, c: f64) -> Self {
        HermitianOperator {
            entries: self.entries.scale(c),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other, "operator addition")?;
        Ok(HermitianOperator {
            entries: &self.entries + &other.entries,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other, "operator subtraction")?;
        Ok(HermitianOperator {
            entries: &self.entries - &other.entries,
        })
    }

    /// Add `c * I`.
    pub fn shift(&self, c: f64) -> Self {
        let mut entries = self.entries.clone();
        for i in 0..entries.nrows() {
            entries[(i, i)] += Complex64::new(c, 0.0);
        }
        HermitianOperator { entries }
    }

    /// Matrix product. The product of two Hermitian operators is Hermitian
    /// only when they commute, so the raw matrix is returned.
    pub fn mul_raw(&self, other: &Self) -> Result<DMatrix<Complex64>> {
        self.check_same_dim(other, "operator product")?;
        Ok(&self.entries * &other.entries)
    }

    fn check_same_dim(&self, other: &Self, context: &str) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(CoreError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
                context: context.into(),
            });
        }
        Ok(())
    }
}

/// Eigendecomposition with eigenvalues ascending and a unitary basis.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: DVector<f64>,
    pub basis: DMatrix<Complex64>,
}

impl SpectralDecomposition {
    pub fn min_eig(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eig(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// Reassemble `Q diag(values) Q*` for arbitrary per-eigenvalue values.
    pub fn assemble(&self, values: &[f64]) -> HermitianOperator {
        let dim = self.basis.nrows();
        let mut d = DMatrix::zeros(dim, dim);
        for (i, &v) in values.iter().enumerate() {
            d[(i, i)] = Complex64::new(v, 0.0);
        }
        let m = &self.basis * d * self.basis.adjoint();
        HermitianOperator::symmetrized(m)
    }
}

/// Eigendecomposition of a Hermitian operator; deterministic for fixed input.
pub fn eigh(h: &HermitianOperator) -> SpectralDecomposition {
    let se = h.matrix().clone().symmetric_eigen();
    // nalgebra does not order the eigenvalues; sort ascending, stably.
    let mut idx: Vec<usize> = (0..se.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());
    let eigenvalues = DVector::from_iterator(idx.len(), idx.iter().map(|&i| se.eigenvalues[i]));
    let mut basis = DMatrix::zeros(h.dim(), h.dim());
    for (col, &i) in idx.iter().enumerate() {
        basis.set_column(col, &se.eigenvectors.column(i));
    }
    SpectralDecomposition { eigenvalues, basis }
}

/// Apply a scalar function through the spectral theorem:
/// `phi(H) = Q diag(phi(lambda_i)) Q*`.
pub fn apply_scalar_function<F>(h: &HermitianOperator, phi: F) -> Result<HermitianOperator>
where
    F: Fn(f64) -> f64,
{
    let dec = eigh(h);
    let mut values = Vec::with_capacity(dec.eigenvalues.len());
    for &lambda in dec.eigenvalues.iter() {
        let v = phi(lambda);
        if !v.is_finite() {
            return Err(CoreError::Domain {
                eigenvalue: lambda,
                detail: format!("function value {v} is not finite"),
            });
        }
        values.push(v);
    }
    Ok(dec.assemble(&values))
}

/// Numerically stable logistic sigmoid.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Sigmoid of an operator, `(I + exp(-Y))^{-1}`, realized by spectral calculus.
pub fn sigmoid_of_operator(y: &HermitianOperator) -> Result<HermitianOperator> {
    apply_scalar_function(y, sigmoid)
}

/// Outcome of a Loewner-order test `A <= B`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LoewnerCheck {
    pub holds: bool,
    /// Minimum eigenvalue of `B - A`; nonnegative (within tolerance) certifies
    /// the inequality.
    pub witness: f64,
}

/// Test `A <= B` in the Loewner order.
pub fn loewner_leq(a: &HermitianOperator, b: &HermitianOperator, tol: f64) -> Result<LoewnerCheck> {
    let diff = b.sub(a)?;
    let witness = eigh(&diff).min_eig();
    Ok(LoewnerCheck {
        holds: witness >= -tol,
        witness,
    })
}

/// Ky Fan `ell`-norm: sum of the `ell` largest singular values. For a
/// Hermitian operator these are the largest absolute eigenvalues.
pub fn ky_fan_norm(a: &HermitianOperator, ell: usize) -> Result<f64> {
    if ell < 1 || ell > a.dim() {
        return Err(CoreError::OutOfRange(format!(
            "Ky Fan order {ell} outside 1..={}",
            a.dim()
        )));
    }
    let mut svals: Vec<f64> = eigh(a).eigenvalues.iter().map(|x| x.abs()).collect();
    svals.sort_by(|x, y| y.partial_cmp(x).unwrap());
    Ok(svals[..ell].iter().sum())
}

/// Ordered tuple of Hermitian operators of a common dimension.
#[derive(Debug, Clone)]
pub struct OperatorTuple {
    ops: Vec<HermitianOperator>,
}

impl OperatorTuple {
    pub fn new(ops: Vec<HermitianOperator>) -> Result<Self> {
        if ops.is_empty() {
            return Err(CoreError::Invalid("tuple needs at least one operator".into()));
        }
        let dim = ops[0].dim();
        for (i, op) in ops.iter().enumerate() {
            if op.dim() != dim {
                return Err(CoreError::DimensionMismatch {
                    left: dim,
                    right: op.dim(),
                    context: format!("tuple operator {i}"),
                });
            }
        }
        Ok(OperatorTuple { ops })
    }

    /// The n-fold repetition of a single operator, `(A, A, ..., A)`.
    pub fn repeated(op: HermitianOperator, n: usize) -> Result<Self> {
        Self::new(vec![op; n.max(1)])
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.ops[0].dim()
    }

    pub fn ops(&self) -> &[HermitianOperator] {
        &self.ops
    }

    pub fn op(&self, i: usize) -> &HermitianOperator {
        &self.ops[i]
    }

    /// Largest pairwise commutator Frobenius norm, with the offending pair.
    pub fn max_commutator(&self) -> (usize, usize, f64) {
        let mut worst = (0, 0, 0.0);
        for i in 0..self.ops.len() {
            for j in (i + 1)..self.ops.len() {
                let ab = self.ops[i].matrix() * self.ops[j].matrix();
                let ba = self.ops[j].matrix() * self.ops[i].matrix();
                let norm = (ab - ba).norm();
                if norm > worst.2 {
                    worst = (i, j, norm);
                }
            }
        }
        worst
    }

    pub fn max_frob_norm(&self) -> f64 {
        self.ops.iter().map(|o| o.frob_norm()).fold(0.0, f64::max)
    }
}

/// Cartesian product of closed real intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalBox {
    intervals: Vec<(f64, f64)>,
}

impl IntervalBox {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(CoreError::Invalid("box needs at least one axis".into()));
        }
        for (i, &(lo, hi)) in intervals.iter().enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(CoreError::Invalid(format!(
                    "axis {i}: need finite lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(IntervalBox { intervals })
    }

    pub fn n_axes(&self) -> usize {
        self.intervals.len()
    }

    pub fn axis(&self, i: usize) -> (f64, f64) {
        self.intervals[i]
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    /// Uniform grid resolution per axis such that the total point count stays
    /// under `cap`; never below 2 points per axis.
    pub fn capped_resolution(&self, per_axis: usize, cap: usize) -> usize {
        let n = self.n_axes() as u32;
        let mut p = per_axis.max(2);
        while p > 2 && (p as u128).pow(n) > cap as u128 {
            p -= 1;
        }
        p
    }

    /// Total number of points in a `per_axis` uniform grid.
    pub fn grid_len(&self, per_axis: usize) -> usize {
        self.intervals.iter().map(|_| per_axis).product()
    }

    /// The grid point for a flattened index (row-major, axis 0 slowest).
    pub fn grid_point(&self, mut idx: usize, per_axis: usize) -> Vec<f64> {
        let n = self.n_axes();
        let mut coords = vec![0usize; n];
        for ax in (0..n).rev() {
            coords[ax] = idx % per_axis;
            idx /= per_axis;
        }
        coords
            .iter()
            .zip(&self.intervals)
            .map(|(&k, &(lo, hi))| {
                if per_axis == 1 {
                    lo
                } else {
                    lo + (hi - lo) * (k as f64) / ((per_axis - 1) as f64)
                }
            })
            .collect()
    }
}

/// Simultaneous diagonalization of a commuting tuple.
#[derive(Debug, Clone)]
pub struct JointDiagonalization {
    pub basis: DMatrix<Complex64>,
    /// `joint_eigs[i][k]` is the k-th diagonal entry of operator `i` in the
    /// shared basis.
    pub joint_eigs: Vec<Vec<f64>>,
}

/// Jointly diagonalize a commuting tuple.
///
/// Strategy: diagonalize a generic random real combination `sum c_i A_i`
/// (fixed internal RNG stream, so the result is deterministic for a given
/// input), then verify every operator is diagonal in that basis; retry with
/// fresh coefficients up to 3 times. Generic combinations separate joint
/// eigenspaces almost surely; genuinely shared joint eigenvalues are scalar
/// on their eigenspace and need no separation.
pub fn joint_diagonalize(tuple: &OperatorTuple, tol: f64) -> Result<JointDiagonalization> {
    let scale = tuple.max_frob_norm().max(1.0);
    let (i, j, comm) = tuple.max_commutator();
    if comm > tol * scale {
        return Err(CoreError::NonCommuting {
            i,
            j,
            norm: comm,
            tol: tol * scale,
        });
    }

    let dim = tuple.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6a6f_696e_745f_6469);
    let mut best: Option<(f64, JointDiagonalization)> = None;
    for _attempt in 0..3 {
        let coeffs: Vec<f64> = (0..tuple.len()).map(|_| rng.random_range(0.5..1.5)).collect();
        let mut combo = DMatrix::zeros(dim, dim);
        for (c, op) in coeffs.iter().zip(tuple.ops()) {
            combo += op.matrix().scale(*c);
        }
        let dec = eigh(&HermitianOperator::symmetrized(combo));

        let mut off_diag_worst: f64 = 0.0;
        let mut joint_eigs = Vec::with_capacity(tuple.len());
        for op in tuple.ops() {
            let d = dec.basis.adjoint() * op.matrix() * &dec.basis;
            let mut off: f64 = 0.0;
            let mut diag = Vec::with_capacity(dim);
            for r in 0..dim {
                for c in 0..dim {
                    if r == c {
                        diag.push(d[(r, c)].re);
                    } else {
                        off += d[(r, c)].norm_sqr();
                    }
                }
            }
            off_diag_worst = off_diag_worst.max(off.sqrt() / op.frob_norm().max(1.0));
            joint_eigs.push(diag);
        }

        let jd = JointDiagonalization {
            basis: dec.basis,
            joint_eigs,
        };
        if off_diag_worst <= Tolerances::default().recon_tol.max(tol) {
            return Ok(jd);
        }
        if best.as_ref().is_none_or(|(w, _)| off_diag_worst < *w) {
            best = Some((off_diag_worst, jd));
        }
    }
    // Commutators passed but no generic combination separated the spectrum
    // cleanly; surface it as a precondition failure on the tuple.
    let (worst, _) = best.unwrap();
    Err(CoreError::NonCommuting {
        i: 0,
        j: 0,
        norm: worst,
        tol: Tolerances::default().recon_tol.max(tol),
    })
}

/// `f(A_1, ..., A_n)` for a commuting tuple via joint spectral calculus:
/// `Q diag(f(lambda_{1,k}, ..., lambda_{n,k})) Q*`.
pub fn multivariate_operator_function<F>(
    f: F,
    tuple: &OperatorTuple,
    commutator_tol: f64,
) -> Result<HermitianOperator>
where
    F: Fn(&[f64]) -> f64,
{
    let jd = joint_diagonalize(tuple, commutator_tol)?;
    let dim = tuple.dim();
    let mut values = Vec::with_capacity(dim);
    let mut point = vec![0.0; tuple.len()];
    for k in 0..dim {
        for (i, eigs) in jd.joint_eigs.iter().enumerate() {
            point[i] = eigs[k];
        }
        let v = f(&point);
        if !v.is_finite() {
            return Err(CoreError::Domain {
                eigenvalue: point[0],
                detail: format!("multivariate function not finite at {point:?}"),
            });
        }
        values.push(v);
    }
    let mut d = DMatrix::zeros(dim, dim);
    for (k, &v) in values.iter().enumerate() {
        d[(k, k)] = Complex64::new(v, 0.0);
    }
    Ok(HermitianOperator::symmetrized(&jd.basis * d * jd.basis.adjoint()))
}

/// Draw a Haar-distributed unitary: QR of a complex Gaussian matrix with the
/// R-diagonal phases folded into Q.
pub fn haar_unitary<R: Rng>(dim: usize, rng: &mut R) -> DMatrix<Complex64> {
    use rand_distr::StandardNormal;
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) / 2f64.sqrt()
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..dim {
        let d = r[(c, c)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for row in 0..dim {
            q[(row, c)] *= phase;
        }
    }
    q
}

/// Random Hermitian operator with eigenvalues drawn uniformly in `[lo, hi]`
/// in the given (or a fresh Haar-random) eigenbasis.
pub fn random_hermitian_in<R: Rng>(
    dim: usize,
    lo: f64,
    hi: f64,
    basis: Option<&DMatrix<Complex64>>,
    rng: &mut R,
) -> HermitianOperator {
    if lo == hi {
        return HermitianOperator::from_diagonal(&vec![lo; dim]);
    }
    let eigs: Vec<f64> = (0..dim).map(|_| rng.random_range(lo..hi)).collect();
    let owned;
    let u = match basis {
        Some(u) => u,
        None => {
            owned = haar_unitary(dim, rng);
            &owned
        }
    };
    let mut d = DMatrix::zeros(dim, dim);
    for (i, &x) in eigs.iter().enumerate() {
        d[(i, i)] = Complex64::new(x, 0.0);
    }
    HermitianOperator::symmetrized(u * d * u.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pauli_x() -> HermitianOperator {
        HermitianOperator::from_real(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap()
    }

    fn pauli_z() -> HermitianOperator {
        HermitianOperator::from_diagonal(&[1.0, -1.0])
    }

    #[test]
    fn eigh_diagonal_sorted() {
        let h = HermitianOperator::from_diagonal(&[2.0, 1.0]);
        let dec = eigh(&h);
        assert_abs_diff_eq!(dec.eigenvalues[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dec.eigenvalues[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn eigh_identity() {
        let dec = eigh(&HermitianOperator::identity(3));
        for &l in dec.eigenvalues.iter() {
            assert_abs_diff_eq!(l, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn eigh_offdiagonal_pm_one() {
        // Characteristic polynomial of [[0,1],[1,0]] is l^2 - 1.
        let dec = eigh(&pauli_x());
        assert_abs_diff_eq!(dec.eigenvalues[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dec.eigenvalues[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eigh_rejects_non_hermitian() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]).map(|x| Complex64::new(x, 0.0));
        let err = HermitianOperator::from_matrix(m).unwrap_err();
        match err {
            CoreError::NotHermitian { asymmetry, .. } => {
                assert_abs_diff_eq!(asymmetry, 2f64.sqrt(), epsilon = 1e-12)
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn scalar_function_sqrt_diag() {
        let h = HermitianOperator::from_diagonal(&[1.0, 4.0]);
        let r = apply_scalar_function(&h, f64::sqrt).unwrap();
        let expect = HermitianOperator::from_diagonal(&[1.0, 2.0]);
        assert!(r.sub(&expect).unwrap().frob_norm() < 1e-12);
    }

    #[test]
    fn scalar_function_identity_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = random_hermitian_in(5, -2.0, 3.0, None, &mut rng);
        let r = apply_scalar_function(&h, |x| x).unwrap();
        assert!(r.sub(&h).unwrap().frob_norm() < 1e-9 * h.frob_norm().max(1.0));
    }

    #[test]
    fn scalar_function_exp_offdiagonal() {
        // exp([[0,1],[1,0]]) = cosh(1) I + sinh(1) X, by hand with eigenvalues +-1.
        let r = apply_scalar_function(&pauli_x(), f64::exp).unwrap();
        let expect = HermitianOperator::identity(2)
            .scale(1f64.cosh())
            .add(&pauli_x().scale(1f64.sinh()))
            .unwrap();
        assert!(r.sub(&expect).unwrap().frob_norm() < 1e-12);
    }

    #[test]
    fn scalar_function_domain_error_names_eigenvalue() {
        let h = HermitianOperator::from_diagonal(&[-1.0, 4.0]);
        let err = apply_scalar_function(&h, f64::ln).unwrap_err();
        match err {
            CoreError::Domain { eigenvalue, .. } => assert_abs_diff_eq!(eigenvalue, -1.0),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn sigmoid_zero_is_half_identity() {
        let s = sigmoid_of_operator(&HermitianOperator::zeros(2)).unwrap();
        assert!(s.sub(&HermitianOperator::identity(2).scale(0.5)).unwrap().frob_norm() < 1e-15);
    }

    #[test]
    fn sigmoid_ln3_diag() {
        // sigma(ln 3) = 3/4 by hand.
        let s = sigmoid_of_operator(&HermitianOperator::from_diagonal(&[3f64.ln(), 0.0])).unwrap();
        let expect = HermitianOperator::from_diagonal(&[0.75, 0.5]);
        assert!(s.sub(&expect).unwrap().frob_norm() < 1e-12);
    }

    #[test]
    fn sigmoid_offdiagonal_form() {
        let s = sigmoid_of_operator(&pauli_x()).unwrap();
        let expect = HermitianOperator::identity(2)
            .scale(0.5)
            .add(&pauli_x().scale(sigmoid(1.0) - 0.5))
            .unwrap();
        assert!(s.sub(&expect).unwrap().frob_norm() < 1e-12);
    }

    #[test]
    fn loewner_basic() {
        let a = HermitianOperator::from_diagonal(&[1.0, 2.0]);
        let b = HermitianOperator::from_diagonal(&[2.0, 3.0]);
        let c = loewner_leq(&a, &b, 0.0).unwrap();
        assert!(c.holds);
        assert_abs_diff_eq!(c.witness, 1.0, epsilon = 1e-12);

        let refl = loewner_leq(&a, &a, 1e-12).unwrap();
        assert!(refl.holds);
        assert_abs_diff_eq!(refl.witness, 0.0, epsilon = 1e-12);

        let bad = loewner_leq(
            &HermitianOperator::from_diagonal(&[0.0, 2.0]),
            &HermitianOperator::from_diagonal(&[1.0, 1.0]),
            1e-12,
        )
        .unwrap();
        assert!(!bad.holds);
        assert_abs_diff_eq!(bad.witness, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn loewner_dimension_mismatch() {
        let a = HermitianOperator::identity(2);
        let b = HermitianOperator::identity(3);
        assert!(loewner_leq(&a, &b, 0.0).is_err());
    }

    #[test]
    fn ky_fan_values_and_range_check() {
        let a = HermitianOperator::from_diagonal(&[3.0, -4.0, 1.0]);
        assert_abs_diff_eq!(ky_fan_norm(&a, 2).unwrap(), 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ky_fan_norm(&HermitianOperator::identity(3), 3).unwrap(), 3.0);
        assert!(ky_fan_norm(&a, 4).is_err());
        assert!(ky_fan_norm(&a, 0).is_err());
    }

    #[test]
    fn joint_diag_diagonal_pair() {
        let t = OperatorTuple::new(vec![
            HermitianOperator::from_diagonal(&[1.0, 2.0]),
            HermitianOperator::from_diagonal(&[3.0, 4.0]),
        ])
        .unwrap();
        let jd = joint_diagonalize(&t, 1e-8).unwrap();
        let mut eigs0 = jd.joint_eigs[0].clone();
        eigs0.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_abs_diff_eq!(eigs0[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(eigs0[1], 2.0, epsilon = 1e-10);
    }

    #[test]
    fn joint_diag_polynomial_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_hermitian_in(6, -1.0, 2.0, None, &mut rng);
        let h2 = apply_scalar_function(&h, |x| x * x).unwrap();
        let t = OperatorTuple::new(vec![h, h2]).unwrap();
        assert!(joint_diagonalize(&t, 1e-8).is_ok());
    }

    #[test]
    fn joint_diag_rejects_pauli_pair() {
        let t = OperatorTuple::new(vec![pauli_x(), pauli_z()]).unwrap();
        match joint_diagonalize(&t, 1e-8).unwrap_err() {
            CoreError::NonCommuting { norm, .. } => {
                assert_abs_diff_eq!(norm, 2.0 * 2f64.sqrt(), epsilon = 1e-12)
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn multivariate_function_diagonals() {
        let t = OperatorTuple::new(vec![
            HermitianOperator::from_diagonal(&[1.0, 2.0]),
            HermitianOperator::from_diagonal(&[3.0, 4.0]),
        ])
        .unwrap();
        let sum = multivariate_operator_function(|x| x[0] + x[1], &t, 1e-8).unwrap();
        assert!(sum.sub(&HermitianOperator::from_diagonal(&[4.0, 6.0])).unwrap().frob_norm() < 1e-10);

        let one = multivariate_operator_function(|_| 1.0, &t, 1e-8).unwrap();
        assert!(one.sub(&HermitianOperator::identity(2)).unwrap().frob_norm() < 1e-10);

        let prod = multivariate_operator_function(|x| x[0] * x[1], &t, 1e-8).unwrap();
        assert!(prod.sub(&HermitianOperator::from_diagonal(&[3.0, 8.0])).unwrap().frob_norm() < 1e-10);
    }

    #[test]
    fn grid_points_cover_corners() {
        let b = IntervalBox::new(vec![(0.0, 1.0), (2.0, 4.0)]).unwrap();
        let n = b.grid_len(3);
        assert_eq!(n, 9);
        let first = b.grid_point(0, 3);
        let last = b.grid_point(8, 3);
        assert_eq!(first, vec![0.0, 2.0]);
        assert_eq!(last, vec![1.0, 4.0]);
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = haar_unitary(8, &mut rng);
        let defect = (u.adjoint() * &u - DMatrix::<Complex64>::identity(8, 8)).norm();
        assert!(defect < 1e-12, "unitarity defect {defect}");
    }
}
