use magnilift::affine::{
    build_t, build_tu, check_affine_pr, injective_t, AffineOptions, AffineSystem, AffineVerdict,
};
use magnilift::instance_gen::{random_affine_system, AffineMode};
use magnilift::rng::Rng64;
use nalgebra::DVector;
use proptest::prelude::*;

/// `|Phi f + b|` for every measurement and reference, computed from scratch.
fn magnitudes(sys: &AffineSystem, f: &[f64]) -> Vec<f64> {
    let f = DVector::from_column_slice(f);
    sys.measurements()
        .iter()
        .flat_map(|m| {
            let pf = &m.phi * &f;
            m.refs.iter().map(move |b| (&pf + b).norm()).collect::<Vec<_>>()
        })
        .collect()
}

fn full_column_rank(m: &nalgebra::DMatrix<f64>) -> bool {
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.max();
    m.nrows() >= m.ncols() && smax > 0.0 && sv.min() > 1e-9 * smax
}

fn random_system(seed: u64, mode: AffineMode) -> AffineSystem {
    let mut rng = Rng64::new(seed);
    let p = 1 + rng.below(3) as usize;
    let d = 1 + rng.below(3) as usize;
    let m = 1 + rng.below(4) as usize;
    let refs = 1 + rng.below(3) as usize;
    AffineSystem::from_json(&random_affine_system(&mut rng, p, d, m, refs, mode).unwrap()).unwrap()
}

fn mode_of(k: u8) -> AffineMode {
    match k % 3 {
        0 => AffineMode::Generic,
        1 => AffineMode::Realized,
        _ => AffineMode::Single,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn certified_no_ships_a_valid_pair(seed in any::<u64>(), mode in any::<u8>()) {
        let sys = random_system(seed, mode_of(mode));
        let r = check_affine_pr(&sys, &AffineOptions { budget: 50, ..AffineOptions::default() });
        if r.verdict == AffineVerdict::CertifiedNo {
            let ce = r.counterexample.unwrap();
            let (mf, mg) = (magnitudes(&sys, &ce.f), magnitudes(&sys, &ce.g));
            let scale = 1.0 + mf.iter().chain(&mg).fold(0.0f64, |a, &b| a.max(b));
            let gap = mf.iter().zip(&mg).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            prop_assert!(gap <= 1e-10 * scale);
            let dist: f64 = ce.f.iter().zip(&ce.g).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            prop_assert!(dist > 1e-6);
        } else {
            prop_assert!(r.counterexample.is_none());
        }
    }

    #[test]
    fn injective_t_makes_every_tu_injective(seed in any::<u64>()) {
        let sys = random_system(seed, AffineMode::Generic);
        prop_assume!(sys.n_refs() >= 2 && injective_t(&sys, 1e-9).unwrap());
        prop_assert!(full_column_rank(&build_t(&sys).unwrap()));
        let mut rng = Rng64::new(seed ^ 0x5eed);
        for _ in 0..20 {
            let u = DVector::from_vec(rng.normal_vec(sys.p()));
            prop_assert!(full_column_rank(&build_tu(&sys, &u).unwrap()));
        }
        let r = check_affine_pr(&sys, &AffineOptions::default());
        prop_assert_eq!(r.verdict, AffineVerdict::CertifiedYes);
    }

    #[test]
    fn stored_magnitudes_match_direct(seed in any::<u64>()) {
        let sys = random_system(seed, AffineMode::Generic);
        let mut rng = Rng64::new(seed);
        let f = rng.normal_vec(sys.p());
        let direct = magnitudes(&sys, &f);
        let lib = sys.magnitudes(&DVector::from_vec(f));
        prop_assert_eq!(direct.len(), lib.len());
        for (a, b) in direct.iter().zip(&lib) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
        }
    }
}

#[test]
fn scalar_single_reference_counterexample() {
    let raw = serde_json::from_str(r#"{"p": 1, "measurements": [{"phi": [[1]], "refs": [[5]]}]}"#).unwrap();
    let sys = AffineSystem::from_json(&raw).unwrap();
    let r = check_affine_pr(&sys, &AffineOptions::default());
    assert_eq!(r.verdict, AffineVerdict::CertifiedNo);
    let ce = r.counterexample.unwrap();
    assert_eq!(ce.u, vec![-5.0]);
    assert!(((ce.f[0] + 5.0).abs() - (ce.g[0] + 5.0).abs()).abs() < 1e-12);
    assert_ne!(ce.f, ce.g);
}
