//! Cross-module property checks on random inputs: the guarantees the rest of
//! the crate leans on, exercised at desk scale.

use std::sync::Arc;

use loewner_core::bounds::{
    box_optimize, ratio_bound, CertConfig, CertScenario, EnvelopeSpec, ExtremalMode, GFunction,
    MapAssignment, OperatorFamily, OptimizeConfig, RatioSign, WeightGrid,
};
use loewner_core::envelope::LinearEnvelope;
use loewner_core::maps::{PolyMap, Side, SpectrumRange};
use loewner_core::spectral::{
    apply_scalar_function, eigh, haar_unitary, ky_fan_norm, loewner_leq,
    multivariate_operator_function, random_hermitian_in, HermitianOperator, IntervalBox,
    OperatorTuple,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn reconstruction_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..200 {
        let dim = 1 + (i % 16);
        let h = random_hermitian_in(dim, -5.0, 5.0, None, &mut rng);
        let dec = eigh(&h);
        let values: Vec<f64> = dec.eigenvalues.iter().cloned().collect();
        let rebuilt = dec.assemble(&values);
        let defect = rebuilt.sub(&h).unwrap().frob_norm();
        assert!(
            defect <= 1e-10 * h.frob_norm().max(1.0),
            "reconstruction defect {defect:.3e} at dim {dim}"
        );
    }
}

#[test]
fn spectrum_mapping_multiset() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..50 {
        let dim = 2 + (i % 9);
        let h = random_hermitian_in(dim, -2.0, 2.0, None, &mut rng);
        let input = eigh(&h);
        let mapped = apply_scalar_function(&h, |x| x * x * x - x).unwrap();
        let mut expect: Vec<f64> = input.eigenvalues.iter().map(|&l| l * l * l - l).collect();
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let got = eigh(&mapped).eigenvalues;
        for (e, g) in expect.iter().zip(got.iter()) {
            assert!((e - g).abs() <= 1e-9, "eigenvalue {g} vs mapped {e}");
        }
    }
}

#[test]
fn loewner_antisymmetry() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let dim = 4;
        let a = random_hermitian_in(dim, -1.0, 1.0, None, &mut rng);
        let b = random_hermitian_in(dim, -1.0, 1.0, None, &mut rng);
        let tol = 1e-12;
        let ab = loewner_leq(&a, &b, tol).unwrap();
        let ba = loewner_leq(&b, &a, tol).unwrap();
        if ab.holds && ba.holds {
            let dist = a.sub(&b).unwrap().frob_norm();
            assert!(dist <= dim as f64 * 1e-10, "both orders hold but distance {dist:.3e}");
        }
    }
    // Constructed equality case: both directions hold.
    let a = HermitianOperator::from_diagonal(&[1.0, 2.0, 3.0]);
    assert!(loewner_leq(&a, &a, 1e-12).unwrap().holds);
}

proptest! {
    #[test]
    fn ky_fan_monotone_in_order(eigs in proptest::collection::vec(-10.0f64..10.0, 1..10)) {
        let a = HermitianOperator::from_diagonal(&eigs);
        let mut prev = 0.0;
        for ell in 1..=eigs.len() {
            let v = ky_fan_norm(&a, ell).unwrap();
            prop_assert!(v + 1e-12 >= prev, "Ky Fan norm decreased: {v} < {prev}");
            prev = v;
        }
    }
}

/// Independent oracle: for a tuple built in a known shared eigenbasis, the
/// joint calculus must match the hand-assembled per-eigenvector evaluation.
#[test]
fn joint_calculus_matches_brute_force_assembly() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let f = |x: &[f64]| (x[0] * x[1]).sin() + 0.5 * x[0];
    for i in 0..50 {
        let dim = 2 + (i % 7);
        let u = haar_unitary(dim, &mut rng);
        let eigs_a: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.5)).collect();
        let eigs_b: Vec<f64> = (0..dim).map(|_| rng.random_range(0.2..2.0)).collect();
        let assemble = |eigs: &[f64]| {
            let d = HermitianOperator::from_diagonal(eigs);
            HermitianOperator::from_matrix(&u * d.matrix() * u.adjoint()).unwrap()
        };
        let tuple = OperatorTuple::new(vec![assemble(&eigs_a), assemble(&eigs_b)]).unwrap();

        // Brute force over all dim joint eigenvalues in the known basis.
        let values: Vec<f64> =
            (0..dim).map(|k| f(&[eigs_a[k], eigs_b[k]])).collect();
        let expected = {
            let d = HermitianOperator::from_diagonal(&values);
            HermitianOperator::from_matrix(&u * d.matrix() * u.adjoint()).unwrap()
        };

        let got = multivariate_operator_function(f, &tuple, 1e-8).unwrap();
        let defect = got.sub(&expected).unwrap().frob_norm();
        assert!(defect <= 1e-9, "joint calculus defect {defect:.3e} at trial {i}");
    }
}

/// Enlarging a scan domain never shrinks a max nor grows a min.
#[test]
fn extremal_constant_monotone_in_ranges() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = |x: &[f64]| (3.0 * x[0]).sin() + 0.3 * x[0] - 0.1 * x[0] * x[0];
    let cfg = OptimizeConfig::default();
    for _ in 0..25 {
        let lo = rng.random_range(-2.0..0.0);
        let hi = rng.random_range(0.5..2.5);
        let grow = rng.random_range(0.1..1.0);
        let small = [SpectrumRange { lo, hi, padding: 0.0 }];
        let large = [SpectrumRange { lo: lo - grow, hi: hi + grow, padding: 0.0 }];
        let max_small = box_optimize(h, &small, ExtremalMode::Max, &cfg).unwrap().value;
        let max_large = box_optimize(h, &large, ExtremalMode::Max, &cfg).unwrap().value;
        assert!(max_large >= max_small - 1e-12);
        let min_small = box_optimize(h, &small, ExtremalMode::Min, &cfg).unwrap().value;
        let min_large = box_optimize(h, &large, ExtremalMode::Min, &cfg).unwrap().value;
        assert!(min_large <= min_small + 1e-12);
    }
}

/// Replacing g by kappa g divides the ratio constant by kappa exactly on the
/// shared scan.
#[test]
fn ratio_constant_scales_inversely_with_g() {
    let region = IntervalBox::new(vec![(1.0, 2.0)]).unwrap();
    let family = OperatorFamily::new(
        vec![vec![
            HermitianOperator::from_diagonal(&[1.0, 1.4, 2.0]),
            HermitianOperator::from_diagonal(&[1.1, 1.6, 1.9]),
        ]],
        region,
        1e-9,
        1e-8,
    )
    .unwrap();
    let weights = WeightGrid::uniform(&[2]).unwrap();
    let maps = MapAssignment::Shared(PolyMap::identity(3));
    let env =
        EnvelopeSpec::Linear(LinearEnvelope { a: vec![1.0], b: 0.0, c: vec![3.0], d: -2.0 });
    let f = |x: &[f64]| x[0] * x[0];

    let custom_g = |kappa: f64| GFunction::Custom {
        name: format!("{kappa}*x"),
        arity: 1,
        f: Arc::new(move |x: &[f64]| kappa * (x[0] + 0.3 * x[0] * x[0])),
    };
    let constant_for = |kappa: f64| {
        let g = custom_g(kappa);
        let scn = CertScenario {
            family: &family,
            weights: &weights,
            maps: &maps,
            f: &f,
            envelope: &env,
            g: &g,
            cfg: CertConfig::default(),
        };
        ratio_bound(&scn, Side::Upper, RatioSign::Positive).unwrap().constant
    };
    let base = constant_for(1.0);
    for kappa in [0.25, 0.5, 2.0, 8.0] {
        let scaled = constant_for(kappa);
        let expect = base / kappa;
        assert!(
            (scaled - expect).abs() <= 1e-10 * expect.abs().max(1.0),
            "kappa {kappa}: {scaled} vs {expect}"
        );
    }
}
