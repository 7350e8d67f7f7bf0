//! W-boundedness: the least admissible constant `C` with
//! `sum_j w_j Phi(f_j(A_j)) <= C g(sum_j w_j Phi(A_j))` for a family of
//! convex functions on `[m, M]`, plus the scaling and linear-domination
//! checks.
//!
//! The constant comes from the chord form: each convex `f_j` is dominated on
//! `[m, M]` by its secant line, and `C = max_x max_j (a_j x + b_j) / g(x)`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{box_optimize, ExtremalMode, OptimizeConfig};
use crate::envelope::{chord, ChordCoefficients};
use crate::error::{CoreError, Result};
use crate::exec::map_indexed;
use crate::maps::{apply_polymap, PolyMap, SpectrumRange};
use crate::spectral::{apply_scalar_function, loewner_leq, random_hermitian_in, HermitianOperator};

/// A named univariate scalar function.
#[derive(Clone)]
pub struct ScalarFn1 {
    pub name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl ScalarFn1 {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ScalarFn1 { name: name.into(), f: Arc::new(f) }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

impl std::fmt::Debug for ScalarFn1 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ScalarFn1({})", self.name)
    }
}

/// Inputs of a W-bound computation.
#[derive(Debug, Clone)]
pub struct WBoundSpec {
    pub family: Vec<ScalarFn1>,
    pub g: ScalarFn1,
    pub interval: (f64, f64),
    /// Normalized map (`a_1 = 1`); its input dimension is the sampling
    /// dimension of [`verify_w_bound`].
    pub map: PolyMap,
    pub weights: Vec<f64>,
}

impl WBoundSpec {
    /// Validates shapes, normalization, positivity of `g` on a dense grid,
    /// and midpoint convexity of every family member on sampled pairs.
    pub fn new(
        family: Vec<ScalarFn1>,
        g: ScalarFn1,
        interval: (f64, f64),
        map: PolyMap,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let (m, big_m) = interval;
        if !(m < big_m) {
            return Err(CoreError::Invalid(format!("interval needs m < M, got [{m}, {big_m}]")));
        }
        if family.is_empty() {
            return Err(CoreError::Invalid("family must not be empty".into()));
        }
        if weights.len() != family.len() {
            return Err(CoreError::DimensionMismatch {
                left: weights.len(),
                right: family.len(),
                context: "weights vs family size".into(),
            });
        }
        if weights.iter().any(|&w| w < 0.0) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(CoreError::Invalid("weights must be a probability vector".into()));
        }
        if !map.is_normalized() {
            return Err(CoreError::Invalid("W-bound needs a normalized map (a_1 = 1)".into()));
        }

        for (i, y) in grid_1d(m, big_m, 1025).into_iter().enumerate() {
            let gv = g.eval(y);
            if !(gv > 0.0) {
                return Err(CoreError::Positivity {
                    what: format!("g({y}) at grid point {i}"),
                    min_eig: gv,
                });
            }
        }

        // Midpoint convexity guard on sampled pairs; catches misuse, proves
        // nothing about the continuum.
        let mut rng = ChaCha8Rng::seed_from_u64(0x77626f756e64);
        for f in &family {
            let mut scale: f64 = 1.0;
            for _ in 0..1000 {
                let x = rng.random_range(m..big_m);
                let y = rng.random_range(m..big_m);
                let fx = f.eval(x);
                let fy = f.eval(y);
                scale = scale.max(fx.abs()).max(fy.abs());
                let mid = f.eval(0.5 * (x + y));
                if mid > 0.5 * (fx + fy) + 1e-9 * scale {
                    return Err(CoreError::Invalid(format!(
                        "family member {} failed midpoint convexity at ({x}, {y})",
                        f.name
                    )));
                }
            }
        }
        Ok(WBoundSpec { family, g, interval, map, weights })
    }

    pub fn chords(&self) -> Result<Vec<ChordCoefficients>> {
        self.family
            .iter()
            .map(|f| {
                let func = f.clone();
                chord(move |x| func.eval(x), self.interval.0, self.interval.1)
            })
            .collect()
    }

    fn with_g(&self, g: ScalarFn1) -> WBoundSpec {
        WBoundSpec {
            family: self.family.clone(),
            g,
            interval: self.interval,
            map: self.map.clone(),
            weights: self.weights.clone(),
        }
    }
}

fn grid_1d(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|k| lo + (hi - lo) * (k as f64) / ((points - 1) as f64))
        .collect()
}

/// The computed W-bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WBoundResult {
    pub constant: f64,
    pub arg_x: f64,
    pub per_function_chords: Vec<ChordCoefficients>,
    pub provenance: String,
}

/// `C = max_{m <= x <= M} max_j (a_j x + b_j) / g(x)` by grid + polish.
pub fn w_bound_constant(spec: &WBoundSpec) -> Result<WBoundResult> {
    let chords = spec.chords()?;
    let g = spec.g.clone();
    let chords_for_h = chords.clone();
    let h = move |x: &[f64]| -> f64 {
        let gv = g.eval(x[0]);
        if !(gv > 0.0) {
            return f64::NAN;
        }
        let top = chords_for_h
            .iter()
            .map(|c| c.a * x[0] + c.b)
            .fold(f64::NEG_INFINITY, f64::max);
        top / gv
    };
    let domain = [SpectrumRange { lo: spec.interval.0, hi: spec.interval.1, padding: 0.0 }];
    let ext = box_optimize(h, &domain, ExtremalMode::Max, &OptimizeConfig::default())?;
    Ok(WBoundResult {
        constant: ext.value,
        arg_x: ext.argpoint[0],
        per_function_chords: chords,
        provenance: ext.provenance,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WBoundVerifyReport {
    pub trials: usize,
    pub pass_count: usize,
    pub worst_witness: f64,
    pub constant: f64,
}

/// Sample random Hermitian `A_j` with spectra in `[m, M]` and Loewner-check
/// `sum_j w_j Phi(f_j(A_j)) <= C g(sum_j w_j Phi(A_j))` on every draw.
pub fn verify_w_bound(spec: &WBoundSpec, trials: usize, seed: u64) -> Result<WBoundVerifyReport> {
    if trials < 1 {
        return Err(CoreError::Invalid("need at least one trial".into()));
    }
    let constant = w_bound_constant(spec)?.constant;
    let dim = spec.map.input_dim();
    let (m, big_m) = spec.interval;
    let k = spec.family.len();

    let witnesses: Vec<Result<f64>> = map_indexed(trials, |t| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (t as u64).wrapping_mul(0x9E3779B97F4A7C15));
        let ops: Vec<HermitianOperator> =
            (0..k).map(|_| random_hermitian_in(dim, m, big_m, None, &mut rng)).collect();
        let out_dim = spec.map.output_dim();
        let mut lhs = HermitianOperator::zeros(out_dim);
        let mut arg = HermitianOperator::zeros(out_dim);
        for ((f, w), a) in spec.family.iter().zip(&spec.weights).zip(&ops) {
            let fa = apply_scalar_function(a, |x| f.eval(x))?;
            lhs = lhs.add(&apply_polymap(&spec.map, &fa)?.scale(*w))?;
            arg = arg.add(&apply_polymap(&spec.map, a)?.scale(*w))?;
        }
        let g = &spec.g;
        let rhs = apply_scalar_function(&arg, |x| g.eval(x))?.scale(constant);
        Ok(loewner_leq(&lhs, &rhs, 0.0)?.witness)
    });

    let mut worst = f64::INFINITY;
    let mut pass = 0usize;
    for w in witnesses {
        let w = w?;
        worst = worst.min(w);
        if w >= -1e-8 {
            pass += 1;
        }
    }
    Ok(WBoundVerifyReport { trials, pass_count: pass, worst_witness: worst, constant })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingReport {
    pub kappa: f64,
    pub constant_base: f64,
    pub constant_scaled: f64,
    pub arg_base: f64,
    pub arg_scaled: f64,
    /// `W(kappa g) == W(g) / kappa` within tolerance on the shared grid.
    pub holds: bool,
}

/// Check `W_{Phi, kappa g} = W_{Phi, g} / kappa`.
pub fn scaling_check(spec: &WBoundSpec, kappa: f64) -> Result<ScalingReport> {
    if !(kappa > 0.0) {
        return Err(CoreError::Invalid("kappa must be positive".into()));
    }
    let base = w_bound_constant(spec)?;
    let g = spec.g.clone();
    let scaled_spec = spec.with_g(ScalarFn1::new(
        format!("{}*{}", kappa, spec.g.name),
        move |x| kappa * g.eval(x),
    ));
    let scaled = w_bound_constant(&scaled_spec)?;
    let expect = base.constant / kappa;
    let holds = (scaled.constant - expect).abs() <= 1e-10 * expect.abs().max(1.0);
    Ok(ScalingReport {
        kappa,
        constant_base: base.constant,
        constant_scaled: scaled.constant,
        arg_base: base.arg_x,
        arg_scaled: scaled.arg_x,
        holds,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DominationReport {
    pub u: f64,
    pub upsilon_g: f64,
    /// W-bound of the family composed with multiplication by `u`.
    pub w_composed: f64,
    /// The claimed dominating constant `upsilon_g * |u|`.
    pub bound: f64,
    pub holds: bool,
    /// First grid point where `g(u y) <= upsilon_g |u| g(y)` fails, with the
    /// excess.
    pub hypothesis_violation: Option<(f64, f64)>,
}

/// Domination by the scalar operator `u I`: checks the homogeneity
/// hypothesis `g(u y) <= upsilon_g |u| g(y)` on a grid, then compares the
/// W-bound of the composed family `x -> f_j(u x)` against `upsilon_g |u|`.
pub fn domination_check(spec: &WBoundSpec, u: f64, upsilon_g: f64) -> Result<DominationReport> {
    if u == 0.0 || !u.is_finite() {
        return Err(CoreError::Invalid("u must be nonzero and finite".into()));
    }
    let (m, big_m) = spec.interval;
    let bound = upsilon_g * u.abs();

    let mut hypothesis_violation = None;
    for y in grid_1d(m, big_m, 1025) {
        let lhs = spec.g.eval(u * y);
        let rhs = bound * spec.g.eval(y);
        if lhs > rhs + 1e-12 * rhs.abs().max(1.0) {
            hypothesis_violation = Some((y, lhs - rhs));
            break;
        }
    }

    let composed: Vec<ScalarFn1> = spec
        .family
        .iter()
        .map(|f| {
            let inner = f.clone();
            ScalarFn1::new(format!("{}(u x)", f.name), move |x| inner.eval(u * x))
        })
        .collect();
    let composed_spec = WBoundSpec {
        family: composed,
        g: spec.g.clone(),
        interval: spec.interval,
        map: spec.map.clone(),
        weights: spec.weights.clone(),
    };
    let w_composed = w_bound_constant(&composed_spec)?.constant;
    let holds = hypothesis_violation.is_none()
        && w_composed <= bound + 1e-10 * bound.abs().max(1.0);
    Ok(DominationReport { u, upsilon_g, w_composed, bound, holds, hypothesis_violation })
}
