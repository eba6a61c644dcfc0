use magnilift::gram::polarize;
use magnilift::graph_model::{observe, orbit_equivalent, SimpleGraph, VectorField};
use magnilift::instance_gen::{circulant_counterexample, glued_simplices, random_field};
use magnilift::reconstruction::{reconstruct_complete, reconstruct_propagate, ReconstructOptions};
use magnilift::rng::Rng64;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn random_orthogonal(rng: &mut Rng64, d: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(d, d, |_, _| rng.normal());
    m.qr().q()
}

fn max_field_gap(a: &VectorField, b: &VectorField) -> f64 {
    a.vectors()
        .iter()
        .zip(b.vectors())
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn observation_is_orthogonally_invariant(seed in any::<u64>(), n in 2usize..9, d in 1usize..5) {
        let mut rng = Rng64::new(seed);
        let (g, f) = random_field(&mut rng, n, d, Some(0.6)).unwrap();
        let u = random_orthogonal(&mut rng, d);
        let uf = f.transformed(&u).unwrap();
        let (a, b) = (observe(&g, &f).unwrap(), observe(&g, &uf).unwrap());
        let scale = 1.0 + f.max_norm();
        for (x, y) in a.vertex_norms().iter().zip(b.vertex_norms()) {
            prop_assert!((x - y).abs() <= 1e-12 * scale);
        }
        for (k, x) in a.edge_norms() {
            prop_assert!((x - b.edge_norms()[k]).abs() <= 1e-12 * scale);
        }
        let t = orbit_equivalent(&f, &uf, 1e-8).unwrap();
        prop_assert!(t.is_some());
        let mapped = f.transformed(&t.unwrap()).unwrap();
        prop_assert!(max_field_gap(&mapped, &uf) <= 1e-8 * scale);
    }

    #[test]
    fn polarization_matches_inner_products(seed in any::<u64>(), n in 2usize..8, d in 1usize..4) {
        let mut rng = Rng64::new(seed);
        let (g, f) = random_field(&mut rng, n, d, Some(0.7)).unwrap();
        let pg = polarize(&observe(&g, &f).unwrap(), &g);
        let scale = 1.0 + f.max_norm().powi(2);
        for i in 0..n {
            let direct: f64 = f.vector(i).iter().map(|x| x * x).sum();
            prop_assert!((pg.get(i, i).unwrap() - direct).abs() <= 1e-12 * scale);
        }
        for &(i, j) in g.edges() {
            let direct: f64 = f.vector(i).iter().zip(f.vector(j)).map(|(x, y)| x * y).sum();
            prop_assert!((pg.get(i, j).unwrap() - direct).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn complete_graph_round_trip(seed in any::<u64>(), n in 1usize..15, d in 1usize..5) {
        let mut rng = Rng64::new(seed);
        let (g, f) = random_field(&mut rng, n, d, None).unwrap();
        let r = reconstruct_complete(&observe(&g, &f).unwrap(), &g, d, &ReconstructOptions::default()).unwrap();
        prop_assert!(r.certified_unique);
        prop_assert!(orbit_equivalent(&f, &r.field, 1e-8).unwrap().is_some());
    }

    #[test]
    fn glued_simplices_round_trip(seed in any::<u64>(), d in 1usize..4, length in 1usize..12, tree in any::<bool>()) {
        let mut rng = Rng64::new(seed);
        let (g, f) = glued_simplices(&mut rng, d, length, tree).unwrap();
        let r = reconstruct_propagate(&observe(&g, &f).unwrap(), &g, d, &ReconstructOptions::default()).unwrap();
        prop_assert!(r.certified_unique);
        prop_assert!(r.unreached.is_empty());
        let u = orbit_equivalent(&f, &r.field, 1e-8).unwrap();
        prop_assert!(u.is_some());
        let mapped = f.transformed(&u.unwrap()).unwrap();
        prop_assert!(max_field_gap(&mapped, &r.field) <= 1e-8 * (1.0 + f.max_norm()));
    }
}

#[test]
fn circulant_realizations_share_observations() {
    for n in (4..=16).step_by(2) {
        let (g, h, alt) = circulant_counterexample(n).unwrap();
        assert_eq!(observe(&g, &h).unwrap(), observe(&g, &alt).unwrap());
        assert!(orbit_equivalent(&h, &alt, 1e-8).unwrap().is_none());
        let r = reconstruct_propagate(&observe(&g, &h).unwrap(), &g, 2, &ReconstructOptions::default());
        assert!(r.is_err());
    }
}

#[test]
fn orbit_rejects_same_norms_different_angles() {
    // equal norms everywhere, but the angle between the two vectors differs
    let f = VectorField::new(2, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let g = VectorField::new(2, vec![vec![1.0, 0.0], vec![0.6, 0.8]]).unwrap();
    assert!(orbit_equivalent(&f, &g, 1e-8).unwrap().is_none());
    let graph = SimpleGraph::new(2, &[]).unwrap();
    assert_eq!(observe(&graph, &f).unwrap(), observe(&graph, &g).unwrap());
}
