use aelt_core::orlicz::{embedding_constant, l2_to_orlicz_infimum, norm_report};
use aelt_core::sampling::{random_periodic, rng};
use aelt_core::*;
use proptest::prelude::*;

fn grid() -> Grid {
    make_grid(1.0, 64).unwrap()
}

fn sample(seed: u64, index: usize) -> DiscreteFunction {
    random_periodic(&mut rng(seed), grid(), 2, index, 0.01, 10.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_modular_relation(seed in any::<u64>(), index in 0usize..4) {
        let r = norm_report(&GFunction::example5(), &sample(seed, index)).unwrap();
        prop_assert!(r.relation_holds(), "{r:?}");
    }

    #[test]
    fn luxemburg_is_absolutely_homogeneous(seed in any::<u64>(), index in 0usize..4, c in -50.0..50.0f64) {
        prop_assume!(c.abs() > 1e-3);
        let g = GFunction::example5();
        let u = sample(seed, index);
        let lhs = luxemburg_norm(&g, &u.scaled(c)).unwrap();
        let rhs = c.abs() * luxemburg_norm(&g, &u).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + rhs), "{lhs} vs {rhs}");
    }

    #[test]
    fn luxemburg_triangle_inequality(seed in any::<u64>(), index in 0usize..4) {
        let g = GFunction::pnorm(2, 3.0).unwrap();
        let u = sample(seed, index);
        let v = sample(seed.wrapping_add(1), index + 1);
        let lhs = luxemburg_norm(&g, &u.add_scaled(&v, 1.0)).unwrap();
        prop_assert!(lhs <= luxemburg_norm(&g, &u).unwrap() + luxemburg_norm(&g, &v).unwrap() + 1e-8);
    }
}

#[test]
fn sup_bounded_by_embedding_constant() {
    let g = GFunction::example5();
    let c = embedding_constant(&g, 2.0).unwrap();
    let mut r = rng(200);
    for i in 0..200 {
        let u = random_periodic(&mut r, grid(), 2, i, 0.01, 10.0);
        let sup = u.nodes().map(|x| x[0].hypot(x[1])).fold(0.0, f64::max);
        let bound = c * sobolev_norm(&g, &u).unwrap();
        assert!(sup <= bound + 1e-6, "sample {i}: {sup} > {bound}");
    }
}

#[test]
fn l2_comparison_infimum_is_positive() {
    let g = GFunction::example5();
    let mut r = rng(500);
    let samples: Vec<DiscreteFunction> = (0..500).map(|i| random_periodic(&mut r, grid(), 2, i, 0.01, 10.0)).collect();
    let inf = l2_to_orlicz_infimum(&g, &samples).unwrap();
    println!("empirical inf of int |u|^2 / ||u||_G^2 over 500 samples: {inf:.6}");
    assert!(inf > 0.0);
}
