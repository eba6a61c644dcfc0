use magnilift::conjugate_certify::{
    certify_range_space, certify_vector, complement_property, split_symmetric, CertifyOptions,
    RealMeasurementMatrix, Status,
};
use magnilift::instance_gen::random_range_matrix;
use magnilift::rng::Rng64;
use nalgebra::{Complex, DMatrix, DVector};
use proptest::prelude::*;

fn sign_counts(s: &DMatrix<f64>) -> (usize, usize) {
    let eig = s.clone().symmetric_eigen();
    let cut = 1e-9 * eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let pos = eig.eigenvalues.iter().filter(|&&l| l > cut).count();
    let neg = eig.eigenvalues.iter().filter(|&&l| l < -cut).count();
    (pos, neg)
}

fn numeric_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let cut = 1e-9 * sv.max().max(f64::MIN_POSITIVE);
    sv.iter().filter(|&&s| s > cut).count()
}

fn sym(x: &DMatrix<f64>) -> DMatrix<f64> {
    (x + x.transpose()) * 0.5
}

fn gaussian(rng: &mut Rng64, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.normal())
}

/// Witness conditions checked from scratch.
fn witness_holds(a: &DMatrix<f64>, x: &DMatrix<f64>) -> bool {
    let rank_ok = numeric_rank(x) <= 2;
    let sym_ok = sym(x).amax() > 1e-6 * x.amax();
    let trace_ok = a.row_iter().all(|row| {
        let r = row.transpose();
        (r.transpose() * x * &r)[0].abs() <= 1e-8 * r.norm_squared() * x.amax().max(1.0)
    });
    rank_ok && sym_ok && trace_ok
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rank_two_matrices_have_small_inertia(seed in any::<u64>(), n in 1usize..7, rank in 0usize..3) {
        let mut rng = Rng64::new(seed);
        let x = gaussian(&mut rng, n, rank) * gaussian(&mut rng, rank, n);
        let (p, q) = sign_counts(&sym(&x));
        prop_assert!(p <= 2 && q <= 2);
    }

    #[test]
    fn splitting_reproduces_symmetric_part(seed in any::<u64>(), n in 1usize..7, pos in 0usize..3, neg in 0usize..3) {
        let mut rng = Rng64::new(seed);
        let (pos, neg) = (pos.min(n), neg.min(n - pos.min(n)));
        let q = gaussian(&mut rng, n, n).qr().q();
        let mut lambda = DVector::zeros(n);
        for k in 0..pos {
            lambda[k] = rng.uniform_in(0.1, 3.0);
        }
        for k in pos..pos + neg {
            lambda[k] = -rng.uniform_in(0.1, 3.0);
        }
        let s = &q * DMatrix::from_diagonal(&lambda) * q.transpose();
        let x = split_symmetric(&s);
        prop_assert!(x.is_some());
        let x = x.unwrap();
        prop_assert!(numeric_rank(&x) <= 2);
        let gap = (sym(&x) - &s).amax();
        prop_assert!(gap <= 1e-10 * s.amax().max(1.0), "gap {gap:e} lambda {lambda}");
    }

    #[test]
    fn indefinite_beyond_two_is_rejected(seed in any::<u64>(), n in 3usize..7) {
        let mut rng = Rng64::new(seed);
        let q = gaussian(&mut rng, n, n).qr().q();
        let lambda = DVector::from_fn(n, |k, _| if k < 3 { 1.0 + k as f64 } else { 0.0 });
        let s = &q * DMatrix::from_diagonal(&lambda) * q.transpose();
        prop_assert!(split_symmetric(&s).is_none());
    }

    #[test]
    fn certifier_agrees_with_complement_property(seed in any::<u64>(), m in 2usize..9, pooled in any::<bool>()) {
        let mut rng = Rng64::new(seed);
        let a = random_range_matrix(&mut rng, m, 2, pooled.then_some(3)).unwrap();
        let v = certify_range_space(&RealMeasurementMatrix::new(a.clone()).unwrap(), &CertifyOptions::default());
        let cp = complement_property(&a).unwrap();
        prop_assert!(v.exact);
        prop_assert_eq!(v.status == Status::ConjugatePR, cp);
    }

    #[test]
    fn witnesses_revalidate(seed in any::<u64>(), n in 2usize..5, extra in 0usize..4) {
        let mut rng = Rng64::new(seed);
        let m = n + extra;
        let a = random_range_matrix(&mut rng, m, n, Some(n + 1)).unwrap();
        let opts = CertifyOptions { budget: 20_000, ..CertifyOptions::default() };
        let v = certify_range_space(&RealMeasurementMatrix::new(a.clone()).unwrap(), &opts);
        if v.status == Status::NotConjugatePR {
            prop_assert!(witness_holds(&a, v.witness.as_ref().unwrap()));
        }
    }

    #[test]
    fn appending_rows_keeps_conjugate_pr(seed in any::<u64>(), n in 2usize..4, m in 3usize..7) {
        let mut rng = Rng64::new(seed);
        let a = random_range_matrix(&mut rng, m.max(n), n, Some(n + 1)).unwrap();
        let opts = CertifyOptions::default();
        let before = certify_range_space(&RealMeasurementMatrix::new(a.clone()).unwrap(), &opts);
        let extra = gaussian(&mut rng, 1, n);
        let b = DMatrix::from_fn(a.nrows() + 1, n, |i, j| if i < a.nrows() { a[(i, j)] } else { extra[(0, j)] });
        let after = certify_range_space(&RealMeasurementMatrix::new(b).unwrap(), &opts);
        if before.status == Status::ConjugatePR {
            prop_assert_eq!(after.status, Status::ConjugatePR);
        }
    }
}

/// Searches a coarse complex grid for a split `x = x1 + x2` with
/// `a^T X a = 0` for every row and `sym(X) != 0`, where
/// `X = Re(x2) Re(x1)^T + Im(x2) Im(x1)^T`.
fn grid_split_exists(a: &DMatrix<f64>, x: &[Complex<f64>]) -> bool {
    let steps: Vec<f64> = (-4..=4).map(|k| k as f64 * 0.25).collect();
    let n = x.len();
    let per = steps.len() * steps.len();
    let total = per.pow(n as u32);
    (0..total).any(|code| {
        let mut c = code;
        let x1: Vec<Complex<f64>> = (0..n)
            .map(|_| {
                let k = c % per;
                c /= per;
                Complex::new(steps[k / steps.len()], steps[k % steps.len()])
            })
            .collect();
        let x2: Vec<Complex<f64>> = x.iter().zip(&x1).map(|(t, p)| t - p).collect();
        let xm = DMatrix::from_fn(n, n, |i, j| x2[i].re * x1[j].re + x2[i].im * x1[j].im);
        let traces_vanish = a.row_iter().all(|r| (r * &xm * r.transpose())[0].abs() < 1e-12);
        traces_vanish && sym(&xm).amax() > 1e-9
    })
}

#[test]
fn vector_verdicts_match_grid_oracle() {
    let x = [Complex::new(1.0, 0.0), Complex::new(0.0, 1.0)];
    let opts = CertifyOptions::default();

    let id = DMatrix::<f64>::identity(2, 2);
    assert!(grid_split_exists(&id, &x));
    let v = certify_vector(&RealMeasurementMatrix::new(id.clone()).unwrap(), &x, &opts).unwrap();
    assert_eq!(v.status, Status::NotConjugatePR);
    assert!(witness_holds(&id, v.witness.as_ref().unwrap()));

    let three = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    assert!(!grid_split_exists(&three, &x));
    let v = certify_vector(&RealMeasurementMatrix::new(three).unwrap(), &x, &opts).unwrap();
    assert_eq!(v.status, Status::ConjugatePR);
}

#[test]
fn identity_witness_is_e1_e2() {
    let v = certify_range_space(
        &RealMeasurementMatrix::new(DMatrix::identity(2, 2)).unwrap(),
        &CertifyOptions::default(),
    );
    assert_eq!(v.status, Status::NotConjugatePR);
    assert!(v.exact);
    assert_eq!(v.nullspace_dim, 1);
    let w = v.witness.unwrap();
    assert!((w - DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0])).amax() < 1e-12);
}
