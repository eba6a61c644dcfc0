use std::f64::consts::PI;

use magnilift::instance_gen::random_spline;
use magnilift::rng::Rng64;
use magnilift::spline_hat::{
    check_criterion, check_real_criterion, conjugate_equivalent, recover, sample_deviation,
    sample_magnitudes, Complex64, ComplexCoeffSeq,
};
use proptest::prelude::*;

/// `|f(t)|` of the linear interpolant of the coefficients, evaluated directly.
fn direct_samples(c: &[Complex64]) -> Vec<f64> {
    let at = |k: i64| {
        if k < 0 || k >= c.len() as i64 {
            Complex64::new(0.0, 0.0)
        } else {
            c[k as usize]
        }
    };
    let mut out = Vec::new();
    for k in -1..=c.len() as i64 {
        out.push(at(k).norm());
        out.push(((at(k) + at(k + 1)) * 0.5).norm());
    }
    out.pop();
    out
}

fn distinct_classes(seqs: &[ComplexCoeffSeq], tol: f64) -> Vec<ComplexCoeffSeq> {
    let mut reps: Vec<ComplexCoeffSeq> = Vec::new();
    for s in seqs {
        if !reps.iter().any(|r| conjugate_equivalent(r, s, tol)) {
            reps.push(s.clone());
        }
    }
    reps
}

#[test]
fn phase_grid_oracle_for_one_i_one() {
    let target = ComplexCoeffSeq::from_pairs(0, &[(1.0, 0.0), (0.0, 1.0), (1.0, 0.0)]);
    let want = direct_samples(target.coeffs());
    assert_eq!(sample_magnitudes(&target).values.len(), want.len());
    for (a, b) in sample_magnitudes(&target).values.iter().zip(&want) {
        assert!((a - b).abs() < 1e-15);
    }
    // all unimodular phase choices on a 24-point grid, first entry fixed to 1
    let grid: Vec<f64> = (0..24).map(|k| k as f64 * PI / 12.0).collect();
    let mut hits = Vec::new();
    for &a in &grid {
        for &b in &grid {
            let c = [Complex64::new(1.0, 0.0), Complex64::from_polar(1.0, a), Complex64::from_polar(1.0, b)];
            let s = direct_samples(&c);
            if s.iter().zip(&want).all(|(x, y)| (x - y).abs() < 1e-9) {
                hits.push(ComplexCoeffSeq::new(0, c.to_vec()));
            }
        }
    }
    let oracle = distinct_classes(&hits, 1e-8);
    assert_eq!(oracle.len(), 2);
    let recovered = recover(&sample_magnitudes(&target), 1e-9).unwrap();
    assert_eq!(recovered.len(), 2);
    for o in &oracle {
        assert!(recovered.iter().any(|r| conjugate_equivalent(o, r, 1e-8)));
    }
}

#[test]
fn hand_values() {
    let c = ComplexCoeffSeq::from_pairs(0, &[(1.0, 0.0), (2.0, 0.0)]);
    let s = sample_magnitudes(&c);
    let at = |t: f64| s.values[((t - s.grid_start) * 2.0) as usize];
    assert_eq!((at(0.0), at(1.0), at(0.5)), (1.0, 2.0, 1.5));
    let c = ComplexCoeffSeq::from_pairs(0, &[(1.0, 0.0), (0.0, 1.0)]);
    let s = sample_magnitudes(&c);
    assert!((s.values[3] - 2f64.sqrt() / 2.0).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn samples_match_direct_evaluation(seed in any::<u64>(), len in 1usize..9, p in 0usize..3) {
        let mut rng = Rng64::new(seed);
        let c = random_spline(&mut rng, len, Some(p.min(len - 1))).unwrap();
        let s = sample_magnitudes(&c);
        prop_assert_eq!(s.grid_start, (c.offset() - 1) as f64);
        for (a, b) in s.values.iter().zip(direct_samples(c.coeffs())) {
            prop_assert!((a - b).abs() <= 1e-14);
        }
        for (j, t) in s.points().iter().enumerate() {
            prop_assert!((c.eval(*t).norm() - s.values[j]).abs() <= 1e-12);
        }
    }

    #[test]
    fn criterion_passing_round_trips(seed in any::<u64>(), len in 1usize..11) {
        let mut rng = Rng64::new(seed);
        let c = random_spline(&mut rng, len, None).unwrap();
        prop_assert!(check_criterion(&c).retrievable);
        let classes = recover(&sample_magnitudes(&c), 1e-9).unwrap();
        prop_assert_eq!(classes.len(), 1);
        prop_assert!(conjugate_equivalent(&classes[0], &c, 1e-8));
    }

    #[test]
    fn branch_count_is_bounded(seed in any::<u64>(), len in 3usize..9, p in 2usize..5) {
        let mut rng = Rng64::new(seed);
        let p = p.min(len - 1);
        let c = random_spline(&mut rng, len, Some(p)).unwrap();
        prop_assert!(!check_criterion(&c).retrievable);
        let s = sample_magnitudes(&c);
        let classes = recover(&s, 1e-9).unwrap();
        prop_assert!(classes.len() >= 2 && classes.len() <= 1 << (p - 1));
        prop_assert!(classes.iter().any(|r| conjugate_equivalent(r, &c, 1e-8)));
        for r in &classes {
            prop_assert!(sample_deviation(&s, &sample_magnitudes(r)).unwrap() <= 1e-8);
        }
        prop_assert_eq!(distinct_classes(&classes, 1e-8).len(), classes.len());
    }

    #[test]
    fn real_combinations_pass_real_criterion(seed in any::<u64>(), len in 1usize..11, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = Rng64::new(seed);
        let c = random_spline(&mut rng, len, None).unwrap();
        let d: Vec<f64> = c.real_part().iter().zip(c.imag_part()).map(|(x, y)| a * x + b * y).collect();
        prop_assert!(check_real_criterion(&d, 1e-9));
    }

    #[test]
    fn equivalence_is_invariant_under_rotation_and_conjugation(seed in any::<u64>(), len in 1usize..8, phase in 0.0f64..6.3) {
        let mut rng = Rng64::new(seed);
        let c = random_spline(&mut rng, len, Some(len.min(3) - 1)).unwrap();
        let w = Complex64::from_polar(1.0, phase);
        let rotated = ComplexCoeffSeq::new(c.offset(), c.coeffs().iter().map(|z| z * w).collect());
        let conj = ComplexCoeffSeq::new(c.offset(), c.coeffs().iter().map(|z| z.conj()).collect());
        prop_assert!(conjugate_equivalent(&c, &rotated, 1e-9));
        prop_assert!(conjugate_equivalent(&c, &conj, 1e-9));
    }
}
