//! Solver outputs checked against brute-force enumeration and direct formulas.

use isogm::geometry::{cross_cost, pairwise_cost, random_rigid, sample_shape, Shape};
use isogm::oracle::{brute_force_gm, brute_force_ot, gw_cost_naive, next_permutation, permutation_distortion};
use isogm::ot::{
    entropic_gw, gm_gap, gw_objective, sinkhorn, sinkhorn_divergence, GapParams, GwParams,
    SinkhornParams,
};
use isogm::{Metric, PointCloud, Scaling};
use ndarray::{array, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian_cloud(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PointCloud::new(Array2::from_shape_fn((n, 3), |_| StandardNormal.sample(&mut rng))).unwrap()
}

fn tight() -> SinkhornParams {
    SinkhornParams {
        max_iter: 100_000,
        tol: 1e-9,
    }
}

#[test]
fn two_point_swap_has_diagonal_plan() {
    let c = array![[0.0, 1.0], [1.0, 0.0]];
    let w = array![0.5, 0.5];
    let r = sinkhorn(c.view(), w.view(), w.view(), 0.001, &Default::default()).unwrap();
    assert!(r.converged);
    assert!(r.linear_cost(c.view()) < 1e-12);
    assert!((r.plan[[0, 0]] - 0.5).abs() < 1e-6 && (r.plan[[1, 1]] - 0.5).abs() < 1e-6);
}

#[test]
fn sinkhorn_near_exact_ot_at_small_epsilon() {
    for seed in 0..10 {
        let n = 4 + (seed as usize % 3);
        let a = gaussian_cloud(n, seed);
        let b = gaussian_cloud(n, 100 + seed);
        let c = cross_cost(&a, &b, Metric::Euclidean, Scaling::Max).unwrap();
        let (_, exact) = brute_force_ot(c.values()).unwrap();
        let params = SinkhornParams {
            max_iter: 100_000,
            tol: 1e-6,
        };
        let r = sinkhorn(c.values(), a.weights(), b.weights(), 0.001, &params).unwrap();
        assert!(r.converged);
        let cost = r.linear_cost(c.values());
        assert!((cost - exact).abs() <= 0.05 * exact, "seed {seed}: {cost} vs {exact}");
        assert!(cost >= exact - 1e-9);
    }
}

#[test]
fn converged_plans_meet_marginals() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let (n, m) = (rng.random_range(2..12), rng.random_range(2..12));
        let c = Array2::from_shape_fn((n, m), |_| rng.random::<f64>());
        let mut a = Array1::from_shape_fn(n, |_| rng.random::<f64>() + 0.1);
        a /= a.sum();
        let mut b = Array1::from_shape_fn(m, |_| rng.random::<f64>() + 0.1);
        b /= b.sum();
        let params = SinkhornParams {
            max_iter: 20_000,
            ..Default::default()
        };
        for eps in [0.5, 0.05, 0.005] {
            let r = sinkhorn(c.view(), a.view(), b.view(), eps, &params).unwrap();
            assert!(r.converged, "eps {eps}");
            let rows = r.row_sums() - &a;
            let cols = r.col_sums() - &b;
            assert!(rows.iter().chain(cols.iter()).all(|e| e.abs() < 1e-6));
            assert!(r.plan.iter().all(|&p| p >= 0.0));
        }
    }
}

#[test]
fn divergence_from_three_sinkhorn_calls() {
    let a = gaussian_cloud(64, 1);
    let b = PointCloud::new(gaussian_cloud(64, 2).into_points() + 0.7).unwrap();
    let eps = 0.1;
    let d = sinkhorn_divergence(&a, &b, Metric::SqEuclidean, Scaling::Mean, eps, &tight()).unwrap();
    // independent assembly: scale all three by the mean of the cross cost
    let cab = cross_cost(&a, &b, Metric::SqEuclidean, Scaling::None).unwrap().into_values();
    let s = cab.mean().unwrap();
    let caa = cross_cost(&a, &a, Metric::SqEuclidean, Scaling::None).unwrap().into_values() / s;
    let cbb = cross_cost(&b, &b, Metric::SqEuclidean, Scaling::None).unwrap().into_values() / s;
    let cab = cab / s;
    let reg = |c: &Array2<f64>, x: &PointCloud, y: &PointCloud| {
        let r = sinkhorn(c.view(), x.weights(), y.weights(), eps, &tight()).unwrap();
        // primal form: <C, π> + ε KL(π | a⊗b)
        let mut kl = 0.0;
        for ((i, j), &p) in r.plan.indexed_iter() {
            if p > 0.0 {
                kl += p * (p / (x.weights()[i] * y.weights()[j])).ln();
            }
        }
        r.linear_cost(c.view()) + eps * kl
    };
    let expected = reg(&cab, &a, &b) - 0.5 * reg(&caa, &a, &a) - 0.5 * reg(&cbb, &b, &b);
    assert!((d.value - expected).abs() < 1e-7, "{} vs {expected}", d.value);
    // symmetry holds to the solver tolerance, so tighten it for a 1e-9 check
    let exact = SinkhornParams {
        max_iter: 100_000,
        tol: 1e-12,
    };
    let ab = sinkhorn_divergence(&a, &b, Metric::SqEuclidean, Scaling::Mean, eps, &exact).unwrap();
    let ba = sinkhorn_divergence(&b, &a, Metric::SqEuclidean, Scaling::Mean, eps, &exact).unwrap();
    assert!((ab.value - ba.value).abs() < 1e-9);
}

#[test]
fn self_divergence_is_zero() {
    let a = sample_shape(Shape::Spiral, 50, 0.05, 3).unwrap();
    for eps in [0.01, 0.1] {
        let d = sinkhorn_divergence(&a, &a, Metric::SqEuclidean, Scaling::Mean, eps, &Default::default()).unwrap();
        assert!(d.value.abs() <= 1e-8);
    }
}

#[test]
fn factorized_gw_matches_quadruple_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for k in 0..20 {
        let x = gaussian_cloud(5, 200 + k);
        let y = gaussian_cloud(5, 300 + k);
        let cx = pairwise_cost(&x, Metric::Euclidean, Scaling::Max).unwrap();
        let cy = pairwise_cost(&y, Metric::Euclidean, Scaling::Max).unwrap();
        let mut plan = Array2::from_shape_fn((5, 5), |_| rng.random::<f64>());
        plan /= plan.sum();
        let naive = gw_cost_naive(cx.values(), cy.values(), plan.view()).unwrap();
        assert!((gw_objective(cx.values(), cy.values(), plan.view()) - naive).abs() <= 1e-10);
        let r = entropic_gw(cx.values(), cy.values(), x.weights(), y.weights(), 0.01, &GwParams::default()).unwrap();
        let naive = gw_cost_naive(cx.values(), cy.values(), r.coupling.plan.view()).unwrap();
        assert!((r.cost - naive).abs() <= 1e-10);
    }
}

#[test]
fn gw_of_a_cloud_with_itself_is_small() {
    let x = gaussian_cloud(16, 5);
    let c = pairwise_cost(&x, Metric::Euclidean, Scaling::Max).unwrap();
    let r = entropic_gw(c.values(), c.values(), x.weights(), x.weights(), 0.001, &GwParams::default()).unwrap();
    assert!(r.cost <= 1e-3, "{}", r.cost);
    let diagonal: f64 = (0..16).map(|i| r.coupling.plan[[i, i]]).sum();
    assert!(diagonal > 0.95, "{diagonal}");
}

#[test]
fn gw_bias_shrinks_with_epsilon() {
    for seed in 0..5 {
        let x = gaussian_cloud(5, 400 + seed);
        let y = gaussian_cloud(5, 500 + seed);
        let cx = pairwise_cost(&x, Metric::Euclidean, Scaling::Max).unwrap();
        let cy = pairwise_cost(&y, Metric::Euclidean, Scaling::Max).unwrap();
        let exact = brute_force_gm(cx.values(), cy.values()).unwrap().best_distortion_sq;
        let params = GwParams {
            outer_iter: 500,
            tol: 1e-9,
            sinkhorn: tight(),
            anneal: true,
        };
        let gaps: Vec<f64> = [0.1, 0.01, 0.001]
            .iter()
            .map(|&eps| {
                let r = entropic_gw(cx.values(), cy.values(), x.weights(), y.weights(), eps, &params).unwrap();
                (r.cost - exact).abs()
            })
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "seed {seed}: {gaps:?}");
    }
}

#[test]
fn gw_is_invariant_to_relabeling() {
    let x = gaussian_cloud(12, 11);
    let y = gaussian_cloud(12, 12);
    let cx = pairwise_cost(&x, Metric::Euclidean, Scaling::Max).unwrap();
    let cy = pairwise_cost(&y, Metric::Euclidean, Scaling::Max).unwrap();
    let params = GwParams {
        outer_iter: 200,
        tol: 1e-9,
        sinkhorn: tight(),
        anneal: true,
    };
    let base = entropic_gw(cx.values(), cy.values(), x.weights(), y.weights(), 0.01, &params).unwrap();
    let perm: Vec<usize> = vec![3, 0, 7, 1, 11, 5, 9, 2, 10, 4, 8, 6];
    let permuted = Array2::from_shape_fn((12, 12), |(i, j)| cx.values()[[perm[i], perm[j]]]);
    let r = entropic_gw(permuted.view(), cy.values(), x.weights(), y.weights(), 0.01, &params).unwrap();
    assert!((r.cost - base.cost).abs() < 1e-6, "{} vs {}", r.cost, base.cost);
}

#[test]
fn rigid_maps_have_negligible_gap() {
    let x = sample_shape(Shape::SCurve, 64, 0.0, 2).unwrap();
    let z = random_rigid(3, 1.0, 8).unwrap().apply(&x).unwrap();
    let g = gm_gap(&x, &z, &GapParams::default()).unwrap();
    assert!(g.distortion < 1e-12);
    assert!(g.value.abs() <= 1e-3, "{}", g.value);
    let id = gm_gap(&x, &x, &GapParams::default()).unwrap();
    assert!(id.value.abs() <= 1e-3);
}

#[test]
fn exact_gap_is_never_negative() {
    for seed in 0..5 {
        let x = gaussian_cloud(6, 600 + seed);
        let y = gaussian_cloud(6, 700 + seed);
        let cx = pairwise_cost(&x, Metric::Euclidean, Scaling::None).unwrap();
        let cy = pairwise_cost(&y, Metric::Euclidean, Scaling::None).unwrap();
        let gm = brute_force_gm(cx.values(), cy.values()).unwrap().best_distortion_sq;
        let mut p: Vec<usize> = (0..6).collect();
        loop {
            assert!(permutation_distortion(cx.values(), cy.values(), &p) - gm >= -1e-9);
            if !next_permutation(&mut p) {
                break;
            }
        }
    }
}
