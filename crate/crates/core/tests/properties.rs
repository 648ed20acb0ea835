use isogm::geometry::{cross_cost, pairwise_cost, random_rigid, random_rotation, random_shear, sample_shape, Shape};
use isogm::ot::{distortion_p2, entropic_gw, sinkhorn, GwParams, SinkhornParams};
use isogm::{Metric, MlpMap, PointCloud, Scaling};
use ndarray::Array2;
use proptest::prelude::*;

fn cloud_strategy(max_n: usize) -> impl Strategy<Value = PointCloud> {
    (2..=max_n).prop_flat_map(|n| {
        prop::collection::vec(-3.0f64..3.0, n * 3).prop_map(move |v| {
            PointCloud::new(Array2::from_shape_vec((n, 3), v).unwrap()).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rigid_maps_preserve_distances(x in cloud_strategy(12), seed in any::<u64>(), scale in 0.0f64..5.0) {
        let rigid = random_rigid(3, scale, seed).unwrap();
        let z = rigid.apply(&x).unwrap();
        let cx = pairwise_cost(&x, Metric::Euclidean, Scaling::None).unwrap();
        let cz = pairwise_cost(&z, Metric::Euclidean, Scaling::None).unwrap();
        let worst = (&cx.values() - &cz.values()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(worst <= 1e-10);
        let d = distortion_p2(cx.values(), &z, Metric::Euclidean, Scaling::None).unwrap();
        prop_assert!(d.value <= 1e-20);
    }

    #[test]
    fn rotations_are_proper(seed in any::<u64>(), d in 2usize..6) {
        let r = random_rotation(d, seed).unwrap();
        let m = r.rotation();
        let gram = m.t().dot(&m);
        for i in 0..d {
            for j in 0..d {
                let expect = if i == j { 1.0 } else { 0.0 };
                prop_assert!((gram[[i, j]] - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn shears_are_not_isometries(x in cloud_strategy(10), seed in any::<u64>()) {
        let shear = random_shear(3, 0.8, seed).unwrap();
        let y = shear.apply(&x).unwrap();
        let cx = pairwise_cost(&x, Metric::Euclidean, Scaling::None).unwrap();
        let d = distortion_p2(cx.values(), &y, Metric::Euclidean, Scaling::None).unwrap();
        let spread = cx.values().iter().fold(0.0f64, |m, v| m.max(*v));
        prop_assume!(spread > 1e-3);
        prop_assert!(d.value > 0.0);
    }

    #[test]
    fn scaling_keeps_the_plan(x in cloud_strategy(8), y in cloud_strategy(8), factor in 0.1f64..10.0) {
        // a positive rescaling of the cost with ε rescaled alongside leaves the plan unchanged
        let c = cross_cost(&x, &y, Metric::SqEuclidean, Scaling::None).unwrap();
        let params = SinkhornParams { max_iter: 50_000, tol: 1e-12 };
        let eps = 0.5;
        let base = sinkhorn(c.values(), x.weights(), y.weights(), eps, &params).unwrap();
        let scaled = c.values().mapv(|v| v * factor);
        let other = sinkhorn(scaled.view(), x.weights(), y.weights(), eps * factor, &params).unwrap();
        let worst = (&base.plan - &other.plan).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn mean_and_max_scaling_normalize(x in cloud_strategy(10)) {
        let raw = pairwise_cost(&x, Metric::Euclidean, Scaling::None).unwrap();
        prop_assume!(raw.values().iter().any(|v| *v > 1e-9));
        let max = pairwise_cost(&x, Metric::Euclidean, Scaling::Max).unwrap();
        let mean = pairwise_cost(&x, Metric::Euclidean, Scaling::Mean).unwrap();
        prop_assert!((max.values().iter().fold(0.0f64, |m, v| m.max(*v)) - 1.0).abs() < 1e-12);
        prop_assert!((mean.values().mean().unwrap() - 1.0).abs() < 1e-12);
        let back = max.raw_values();
        prop_assert!((&back - &raw.values()).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn plans_are_nonnegative_and_feasible(x in cloud_strategy(10), y in cloud_strategy(10), eps in 0.01f64..1.0) {
        let c = cross_cost(&x, &y, Metric::Euclidean, Scaling::Mean).unwrap();
        let r = sinkhorn(c.values(), x.weights(), y.weights(), eps, &SinkhornParams::default()).unwrap();
        prop_assert!(r.plan.iter().all(|&p| p >= 0.0));
        if r.converged {
            let rows = r.row_sums() - x.weights();
            let cols = r.col_sums() - y.weights();
            prop_assert!(rows.iter().chain(cols.iter()).all(|e| e.abs() < 1e-6));
        }
    }

    #[test]
    fn gw_cost_is_nonnegative(x in cloud_strategy(7), y in cloud_strategy(7)) {
        let cx = pairwise_cost(&x, Metric::Euclidean, Scaling::Max).unwrap();
        let cy = pairwise_cost(&y, Metric::Euclidean, Scaling::Max).unwrap();
        let r = entropic_gw(cx.values(), cy.values(), x.weights(), y.weights(), 0.01, &GwParams::default()).unwrap();
        prop_assert!(r.cost >= -1e-9);
    }

    #[test]
    fn initialization_is_deterministic(seed in any::<u64>()) {
        let a = MlpMap::orthogonal(&[3, 16, 8, 3], true, seed).unwrap();
        let b = MlpMap::orthogonal(&[3, 16, 8, 3], true, seed).unwrap();
        prop_assert_eq!(a.params_flat(), b.params_flat());
    }
}

#[test]
fn shapes_are_reproducible() {
    for shape in [Shape::SCurve, Shape::Spiral, Shape::GaussianMixture] {
        let a = sample_shape(shape, 100, 0.1, 5).unwrap();
        let b = sample_shape(shape, 100, 0.1, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dim(), 3);
    }
}
