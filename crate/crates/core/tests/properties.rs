use kpoincare::convalg::{convolve, norm0, star, Axis, Chart, GridFunction};
use kpoincare::decomp::{factor_bc, factor_cb, swap_bc_to_cb, swap_cb_to_bc};
use kpoincare::groupoid::{gamma00_join, gamma00_split, gb_compose, gb_ends, gb_inverse, GroupoidPoint};
use kpoincare::groups::{
    c_inv, c_mul, embed_b, embed_c, exp_c, log_c, sample_b, sample_c, stream_rng, CLieParam, CParam,
};
use kpoincare::report::{Residual, RunConfig};
use nalgebra::DVector;
use proptest::prelude::*;

fn c_strategy(n: usize) -> impl Strategy<Value = CParam> {
    (-2.0..2.0f64, prop::collection::vec(-2.0..2.0f64, n)).prop_map(|(u, y)| CParam {
        s: u.exp(),
        y: DVector::from_vec(y),
    })
}

fn dim_and_seed() -> impl Strategy<Value = (usize, u64)> {
    (1usize..=3, any::<u64>())
}

fn gamma0_grid(values: Vec<f64>) -> GridFunction {
    let axes = [Axis::new(-1.0, 1.0, 4), Axis::new(-1.0, 1.0, 3), Axis::new(-1.0, 1.0, 3)];
    GridFunction::new(Chart::Gamma0, axes, values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn c_group_law((a, b, c) in (1usize..=3).prop_flat_map(|n| (c_strategy(n), c_strategy(n), c_strategy(n)))) {
        let left = c_mul(&c_mul(&a, &b), &c);
        let right = c_mul(&a, &c_mul(&b, &c));
        prop_assert!(left.dist(&right) < 1e-12 * left.s.max(1.0) * 10.0);
        let e = c_mul(&a, &c_inv(&a));
        prop_assert!(e.dist(&CParam::identity(a.n())) < 1e-12);
        let hom = embed_c(&c_mul(&a, &b)).m - embed_c(&a).mul(&embed_c(&b)).m;
        prop_assert!(hom.amax() < 1e-10 * embed_c(&a).m.amax() * embed_c(&b).m.amax());
    }

    #[test]
    fn exp_log_round_trip(sdot in prop_oneof![-3.0..3.0f64, -1e-5..1e-5f64], y in prop::collection::vec(-3.0..3.0f64, 1..4)) {
        let x = CLieParam { sdot, ydot: DVector::from_vec(y) };
        let back = log_c(&exp_c(&x));
        prop_assert!((back.sdot - x.sdot).abs() < 1e-12);
        prop_assert!((back.ydot - &x.ydot).amax() < 1e-12 * x.ydot.amax().max(1.0));
    }

    #[test]
    fn swap_round_trip_and_factor_readout((n, seed) in dim_and_seed()) {
        let mut rng = stream_rng(seed, 0);
        let b = sample_b(&mut rng, n);
        let c = sample_c(&mut rng, n);
        let cb = swap_bc_to_cb(&b, &c).unwrap();
        let back = swap_cb_to_bc(&cb.c, &cb.b).unwrap();
        prop_assert!(back.b.dist(&b) < 1e-9 && back.c.dist(&c) < 1e-9 * c.s.max(1.0));
        let scale = cb.c.s * (cb.b.alpha - 1.0) - (b.alpha - 1.0) / c.s;
        prop_assert!(scale.abs() < 1e-10 * (1.0 / c.s).max(1.0));
        let g = embed_b(&b).mul(&embed_c(&c));
        let f = factor_bc(&g).unwrap();
        prop_assert!(f.b.dist(&b) < 1e-9 && f.c.dist(&c) < 1e-9 * c.s.max(1.0));
        let cbm = factor_cb(&g).unwrap();
        prop_assert!(cbm.b.dist(&cb.b) < 1e-9 && cbm.c.dist(&cb.c) < 1e-9 * cb.c.s.max(1.0));
    }

    #[test]
    fn groupoid_ends_and_inverse((n, seed) in dim_and_seed()) {
        let mut rng = stream_rng(seed, 1);
        let g1 = GroupoidPoint::new(sample_b(&mut rng, n), sample_c(&mut rng, n));
        let (l1, r1) = gb_ends(&g1).unwrap();
        let g2 = GroupoidPoint::new(r1, sample_c(&mut rng, n));
        let g12 = gb_compose(&g1, &g2).unwrap();
        let (l12, r12) = gb_ends(&g12).unwrap();
        prop_assert!(l12.dist(&l1) < 1e-12);
        prop_assert!(r12.dist(&gb_ends(&g2).unwrap().1) < 1e-9);
        let inv = gb_inverse(&g1).unwrap();
        let unit = gb_compose(&g1, &inv).unwrap();
        prop_assert!(unit.dist(&GroupoidPoint::unit(l1)) < 1e-9);
    }

    #[test]
    fn gamma00_split_join_round_trip(t in 0.05..20.0f64, x in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..4)) {
        let x1 = DVector::from_iterator(x.len(), x.iter().map(|p| p.0));
        let x2 = DVector::from_iterator(x.len(), x.iter().map(|p| p.1));
        let (v, c) = gamma00_split(t, &x1, &x2);
        let (t2, a, b) = gamma00_join(&v, &c);
        prop_assert!((t2 - t).abs() == 0.0);
        prop_assert!((a - &x1).amax() == 0.0);
        prop_assert!((b - &x2).amax() < 1e-12 * (t * x1.amax()).max(1.0));
    }

    #[test]
    fn gamma0_grid_algebra(v in prop::collection::vec(-1.0..1.0f64, 108)) {
        let (f1, rest) = v.split_at(36);
        let (f2, f3) = rest.split_at(36);
        let (f1, f2, f3) = (gamma0_grid(f1.to_vec()), gamma0_grid(f2.to_vec()), gamma0_grid(f3.to_vec()));
        prop_assert!(star(&star(&f1).unwrap()).unwrap().max_abs_diff(&f1).unwrap() == 0.0);
        let left = convolve(&convolve(&f1, &f2).unwrap(), &f3).unwrap();
        let right = convolve(&f1, &convolve(&f2, &f3).unwrap()).unwrap();
        prop_assert!(left.max_abs_diff(&right).unwrap() < 1e-12);
        let f12 = convolve(&f1, &f2).unwrap();
        let anti = convolve(&star(&f2).unwrap(), &star(&f1).unwrap()).unwrap();
        prop_assert!(star(&f12).unwrap().max_abs_diff(&anti).unwrap() < 1e-12);
        prop_assert!(norm0(&f12).unwrap() <= norm0(&f1).unwrap() * norm0(&f2).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn residual_pass_flag(r in prop_oneof![Just(f64::NAN), 0.0..1.0f64], tol in 0.0..1.0f64) {
        let res = Residual::new("x", r, 1, None, tol);
        prop_assert_eq!(res.pass, !r.is_nan() && r <= tol);
    }

    #[test]
    fn config_json_round_trip(n in 1usize..5, seed in any::<u64>(), grid in (2usize..20).prop_map(|g| 2 * g)) {
        let mut c = RunConfig::default();
        c.set("n", &n.to_string()).unwrap();
        c.set("seed", &seed.to_string()).unwrap();
        c.set("grid", &grid.to_string()).unwrap();
        c.validate().unwrap();
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        prop_assert_eq!(back, c);
    }
}
