use fbasis::orbit::{orbit_distance, OrbitConfig};
use fbasis::rank::{orbit_dim, orbit_tangent, tangent_annihilation};
use fbasis::*;
use proptest::prelude::*;

fn st33() -> TensorSpaceSpec {
    TensorSpaceSpec::new(SpaceKind::St, 3, 3).unwrap()
}

fn o3() -> GroupSpec {
    GroupSpec::new(GroupKind::O, 3).unwrap()
}

proptest! {
    #[test]
    fn coords_round_trip(x in prop::collection::vec(-10.0f64..10.0, 7)) {
        let basis = orthonormal_basis::<f64>(&st33()).unwrap();
        let a = basis.from_coords(&x).unwrap();
        let back = basis.coords(&a).unwrap();
        for (p, q) in x.iter().zip(&back) {
            prop_assert!((p - q).abs() <= 1e-12 * p.abs().max(1.0));
        }
    }

    #[test]
    fn symmetrize_is_idempotent(data in prop::collection::vec(-1.0f64..1.0, 27)) {
        let s = tensor::symmetrize(3, 3, data).unwrap();
        let again = s.to_dense().symmetrize();
        prop_assert!(s.sub(&again).unwrap().max_abs() <= 1e-15);
    }
}

#[test]
fn ranks_respect_tangent_annihilation_and_scaling() {
    let f = builtin_family(ST33_DEFAULT).unwrap();
    let gated = rank::gate_family::<f64>(&f, 20, 5, 1e-8, 0.95).unwrap().family;
    let basis = orthonormal_basis::<f64>(&st33()).unwrap();
    let mut rng = rng_from_seed(17);
    for _ in 0..50 {
        let a = unit_gaussian_element(&basis, &mut rng);
        let od = orbit_dim(&a, &basis, &o3(), 1e-8).unwrap().orbit_dim;
        let jr = rank::jacobian_report(&gated, &a, &basis, 1e-8).unwrap();
        let t = orbit_tangent(&a, &basis, &o3()).unwrap();
        assert!(tangent_annihilation(&jr.jacobian, &t) <= 1e-6);
        assert!(od <= group_dim(&o3()));
        assert!(jr.rank + od <= basis.len());

        let a2 = a.scaled(2.0);
        assert_eq!(orbit_dim(&a2, &basis, &o3(), 1e-8).unwrap().orbit_dim, od);
        assert_eq!(rank::jacobian_report(&gated, &a2, &basis, 1e-8).unwrap().rank, jr.rank);
    }
}

#[test]
fn orbit_distance_is_symmetric() {
    let basis = orthonormal_basis::<f64>(&st33()).unwrap();
    let mut rng = rng_from_seed(23);
    let cfg = OrbitConfig::default();
    for _ in 0..50 {
        let a = unit_gaussian_element(&basis, &mut rng);
        let b = unit_gaussian_element(&basis, &mut rng);
        let ab = orbit_distance(&a, &b, &o3(), &cfg).unwrap();
        let ba = orbit_distance(&b, &a, &o3(), &cfg).unwrap();
        assert!((ab.distance - ba.distance).abs() <= 1e-6, "{} vs {}", ab.distance, ba.distance);
        assert!(ab.distance >= (a.norm() - b.norm()).abs() - 1e-9);
        assert!(ab.distance <= a.norm() + b.norm());
    }
}

#[test]
fn quotient_estimate_never_below_bound() {
    for (kind, m) in [(SpaceKind::St, 2), (SpaceKind::St, 3), (SpaceKind::S, 2), (SpaceKind::S, 3)] {
        let spec = TensorSpaceSpec::new(kind, m, 3).unwrap();
        let q = quotient_dim_estimate::<f64>(&spec, &o3(), 10, 3, 1e-8).unwrap();
        assert!(q.estimate >= lower_bound(&spec, &o3()).unwrap());
        assert!(q.estimate < dim_space(&spec).unwrap());
    }
}

#[test]
fn single_precision_core() {
    let basis = orthonormal_basis::<f32>(&st33()).unwrap();
    let mut rng = rng_from_seed(29);
    let a: SymTensor32 = unit_gaussian_element(&basis, &mut rng);
    let g = haar_sample::<f32, _>(&o3(), &mut rng);
    let ga = act(&g, &a).unwrap();
    assert!((ga.norm() - a.norm()).abs() < 1e-5);
    assert_eq!(orbit_dim(&a, &basis, &o3(), 1e-4).unwrap().orbit_dim, 3);
}
