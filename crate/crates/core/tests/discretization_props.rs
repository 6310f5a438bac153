use aelt_core::sampling::{random_periodic, rng};
use aelt_core::*;
use proptest::prelude::*;

fn sample(seed: u64, index: usize, n: usize) -> DiscreteFunction {
    random_periodic(&mut rng(seed), make_grid(1.0, n).unwrap(), 2, index, 0.01, 10.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn phi_dominates_nodal_values(seed in any::<u64>(), index in 0usize..4) {
        let g = GFunction::example5();
        let u = sample(seed, index, 64);
        let p = phi(&g, &u).unwrap();
        let two_i = 2.0 * u.grid().length();
        for x in u.nodes() {
            prop_assert!(p >= 2.0 * g.value(&[x[0] / two_i, x[1] / two_i]) - 1e-8);
        }
    }

    #[test]
    fn constants_have_zero_derivative(c in prop::array::uniform3(-1e6..1e6f64), n in 2usize..64) {
        let u = DiscreteFunction::constant(make_grid(1.0, 2 * n).unwrap(), &c);
        prop_assert!(derivative(&u).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn derivative_integrates_to_zero(seed in any::<u64>(), index in 0usize..4, n in 2usize..128) {
        let u = sample(seed, index, 2 * n);
        let du = derivative(&u);
        // telescoping is exact up to rounding of the summed differences
        let tol = 64.0 * f64::EPSILON * u.max_abs() * (2 * n) as f64;
        for k in 0..2 {
            let comp: Vec<f64> = du.nodes().map(|x| x[k]).collect();
            let total = integrate(u.grid(), &comp).unwrap();
            prop_assert!(total.abs() <= tol, "{total}");
        }
    }

    #[test]
    fn phi_is_convex_along_rays(seed in any::<u64>(), index in 0usize..4, a in 0.0..3.0f64, b in 0.0..3.0f64) {
        let g = GFunction::pnorm(2, 3.0).unwrap();
        let u = sample(seed, index, 32);
        let mid = phi(&g, &u.scaled(0.5 * (a + b))).unwrap();
        let avg = 0.5 * (phi(&g, &u.scaled(a)).unwrap() + phi(&g, &u.scaled(b)).unwrap());
        prop_assert!(mid <= avg * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn projection_lands_on_the_boundary(seed in any::<u64>(), index in 0usize..4, k in 1usize..50) {
        let g = GFunction::example5();
        let rho = 0.004;
        let v = project_to_boundary(&g, &sample(seed, index, 64), rho).unwrap();
        let kf = k as f64;
        prop_assert!(phi(&g, &v.scaled((kf + 1.0) / kf)).unwrap() > rho);
        prop_assert!(phi(&g, &v.scaled(kf / (kf + 1.0))).unwrap() < rho);
    }
}
