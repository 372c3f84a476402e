mod common;

use common::{phi_inv, volumes_from};
use gaussian_bubbles::frontflow::{
    first_variation_residual, optimize_1d, optimize_2d, optimize_2d_with, volume_project, OptimizeOptions,
    Partition1D, PolygonalNetwork, VertexKind,
};
use gaussian_bubbles::measure::TRUNCATION_RADIUS;
use gaussian_bubbles::simplicial::{self, VolumeVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const R: f64 = TRUNCATION_RADIUS;

fn slab_net(nodes: usize) -> PolygonalNetwork {
    let t = phi_inv(2.0 / 3.0);
    PolygonalNetwork::slabs(&[-t, t], &[0, 1, 2], nodes, R).unwrap()
}

/// Exhaustive oracle over one-interval-per-label orderings.
fn best_ordering_cost(a: &[f64]) -> f64 {
    let m = a.len();
    let mut best = f64::INFINITY;
    let mut perm: Vec<usize> = (0..m).collect();
    fn heap(k: usize, p: &mut Vec<usize>, a: &[f64], best: &mut f64) {
        if k == 1 {
            let mut acc = 0.0;
            let mut c = 0.0;
            for &l in &p[..p.len() - 1] {
                acc += a[l];
                let t = phi_inv(acc);
                c += (-0.5 * t * t).exp();
            }
            *best = best.min(c);
            return;
        }
        for i in 0..k {
            heap(k - 1, p, a, best);
            let j = if k % 2 == 0 { i } else { 0 };
            p.swap(j, k - 1);
        }
    }
    heap(m, &mut perm, a, &mut best);
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn one_d_optimum_matches_vertex_enumeration(m in 2usize..5, raw in prop::collection::vec(0.1f64..1.0, 4)) {
        let a = VolumeVector::new(volumes_from(&raw[..m], 0.05)).unwrap();
        let r = optimize_1d(m, &a, m).unwrap();
        let oracle = best_ordering_cost(a.as_slice());
        prop_assert!((r.cost - oracle).abs() <= 1e-9, "{} vs {oracle}", r.cost);
        for (v, t) in r.best.volumes(m).iter().zip(a.as_slice()) {
            prop_assert!((v - t).abs() <= 1e-10);
        }
    }

    #[test]
    fn cost_gradient_matches_finite_differences(seed in any::<u64>(), slab in any::<bool>()) {
        let base = if slab { slab_net(12) } else { PolygonalNetwork::tripod([0.1, -0.2], 12, R).unwrap() };
        let net = base.jittered(0.05, seed).unwrap();
        let g = net.cost_gradient();
        let h = 1e-6;
        for v in 0..net.node_count() {
            for c in 0..2 {
                let mut p = net.clone();
                p.vertices[v][c] += h;
                let up = p.cost();
                p.vertices[v][c] -= 2.0 * h;
                let down = p.cost();
                let fd = (up - down) / (2.0 * h);
                prop_assert!((g[v][c] - fd).abs() <= 1e-5 * fd.abs() + 1e-9, "vertex {v}: {} vs {fd}", g[v][c]);
            }
        }
    }
}

#[test]
fn volume_gradient_matches_finite_differences() {
    let net = PolygonalNetwork::tripod([0.2, 0.1], 14, R).unwrap().jittered(0.05, 11).unwrap();
    let (g, _) = net.volume_gradient();
    let h = 1e-6;
    for v in 0..net.node_count() {
        if net.kinds[v] == VertexKind::Boundary {
            continue;
        }
        for c in 0..2 {
            let mut p = net.clone();
            p.vertices[v][c] += h;
            let up = p.volumes();
            p.vertices[v][c] -= 2.0 * h;
            let down = p.volumes();
            for f in 0..3 {
                let fd = (up[f] - down[f]) / (2.0 * h);
                assert!((g[f][v][c] - fd).abs() <= 1e-6 * fd.abs() + 1e-10, "{} vs {fd}", g[f][v][c]);
            }
        }
    }
}

#[test]
fn descent_and_volume_conservation() {
    let a = VolumeVector::new(vec![0.4, 0.35, 0.25]).unwrap();
    let init = PolygonalNetwork::tripod_for(&a, 30).unwrap();
    let opts = OptimizeOptions { jitter: 0.08, ..Default::default() };
    let r = optimize_2d_with(&a, &init, 400, 5, &opts).unwrap();
    assert!(r.event.is_none());
    for w in r.trace.windows(2) {
        if !w[1].remeshed {
            assert!(w[1].cost <= w[0].cost + 1e-12, "step {}: {} -> {}", w[1].step, w[0].cost, w[1].cost);
        }
    }
    for (v, t) in r.network.volumes().iter().zip(a.as_slice()) {
        assert!((v - t).abs() <= 1e-9);
    }
    assert!(r.cost < r.initial_cost);
}

#[test]
fn unequal_volumes_converge_to_the_simplicial_candidate() {
    let a = VolumeVector::new(vec![0.4, 0.35, 0.25]).unwrap();
    let init = PolygonalNetwork::tripod_for(&a, 40).unwrap();
    let opts = OptimizeOptions { jitter: 0.05, ..Default::default() };
    let r = optimize_2d_with(&a, &init, 3000, 3, &opts).unwrap();
    let rep = first_variation_residual(&r.network).unwrap();
    assert!(rep.max_angle_error_deg <= 0.5);
    assert!(rep.max_pointwise <= 5e-3);
    assert!(rep.max_cocycle <= 1e-4);
    let c = simplicial::cost(&a).unwrap().value;
    assert!((r.cost - c).abs() <= 1e-3, "{} vs {c}", r.cost);
    // The junction sits at the shift y(a).
    let y = simplicial::solve_shift(&a).unwrap().y;
    let p = r.network.vertices[r.network.junctions()[0]];
    assert!((p[0] - y[0]).hypot(p[1] - y[1]) < 1e-3);
}

#[test]
fn exact_tripod_is_already_converged() {
    let a = VolumeVector::new(vec![0.4, 0.35, 0.25]).unwrap();
    let init = PolygonalNetwork::tripod_for(&a, 30).unwrap();
    let r = optimize_2d(&a, &init, 50, 0).unwrap();
    assert!(r.converged);
    assert!((r.cost - init.cost()).abs() < 1e-12);
}

#[test]
fn perturbed_slabs_descend_back_to_the_slab_value() {
    let a = VolumeVector::uniform(3).unwrap();
    let opts = OptimizeOptions { jitter: 0.05, ..Default::default() };
    let r = optimize_2d_with(&a, &slab_net(60), 2000, 1, &opts).unwrap();
    let t = phi_inv(2.0 / 3.0);
    let slab = 2.0 * (-0.5 * t * t).exp();
    assert!(r.cost < r.initial_cost);
    // Straight slabs are critical for this topology: descent cannot pass
    // below them without a topology change.
    assert!((r.cost - slab).abs() <= 1e-9, "{} vs {slab}", r.cost);
    assert!(r.cost > 1.5);
}

#[test]
fn slab_multipliers_match_two_set_multipliers() {
    let net = slab_net(40);
    let rep = first_variation_residual(&net).unwrap();
    let t = phi_inv(2.0 / 3.0);
    // The left line x = -t between faces 0 | 1 is the two-set interface
    // with shift -t: sector 0 = {x >= -t} is face 1.
    let left = simplicial::multipliers(&[-t], 2).unwrap().lambda_ij(0, 1);
    let right = simplicial::multipliers(&[t], 2).unwrap().lambda_ij(0, 1);
    assert!((rep.lambda(1, 0).unwrap() - left).abs() <= 1e-9);
    assert!((rep.lambda(2, 1).unwrap() - right).abs() <= 1e-9);
    assert!((rep.lambda(0, 1).unwrap() - t).abs() <= 1e-9);
    assert!((rep.lambda(1, 2).unwrap() + t).abs() <= 1e-9);
}

#[test]
fn stationary_networks_are_second_order_flat() {
    let a = VolumeVector::uniform(3).unwrap();
    let net = PolygonalNetwork::tripod([0.0, 0.0], 30, R).unwrap();
    assert!(first_variation_residual(&net).unwrap().max_pointwise < 1e-4);
    let c0 = net.cost();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let free: Vec<usize> = (0..net.node_count()).filter(|&v| net.kinds[v] != VertexKind::Boundary).collect();
    for _ in 0..100 {
        let mut dirs: Vec<[f64; 2]> = free.iter().map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let norm = dirs.iter().map(|d| d[0] * d[0] + d[1] * d[1]).sum::<f64>().sqrt();
        let mut p = net.clone();
        for (d, &v) in dirs.iter_mut().zip(&free) {
            p.vertices[v][0] += 1e-3 * d[0] / norm;
            p.vertices[v][1] += 1e-3 * d[1] / norm;
        }
        let p = volume_project(&p, &a).unwrap();
        assert!((p.cost() - c0).abs() <= 1e-6, "{:e}", p.cost() - c0);
    }
}

#[test]
fn projection_examples() {
    let a = VolumeVector::uniform(3).unwrap();
    let off = PolygonalNetwork::tripod([0.05, 0.0], 30, R).unwrap();
    for v in volume_project(&off, &a).unwrap().volumes() {
        assert!((v - 1.0 / 3.0).abs() <= 1e-9);
    }
    let converged = PolygonalNetwork::tripod([0.0, 0.0], 30, R).unwrap();
    let jittered = converged.jittered(0.01, 4).unwrap();
    let p = volume_project(&jittered, &a).unwrap();
    let disp: f64 = p
        .vertices
        .iter()
        .zip(&jittered.vertices)
        .map(|(x, y)| (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2))
        .sum::<f64>()
        .sqrt();
    assert!(disp <= 0.05, "{disp}");
}

#[test]
fn two_d_beats_one_d_for_equal_volumes() {
    let a = VolumeVector::uniform(3).unwrap();
    let one_d = optimize_1d(3, &a, 6).unwrap().cost;
    let two_d = PolygonalNetwork::tripod([0.0, 0.0], 20, R).unwrap().cost();
    assert!(one_d > two_d + 0.3);
}

#[test]
fn partition_costs() {
    let t = phi_inv(0.25);
    assert!(Partition1D::new(vec![-t, t], vec![0, 1, 0]).is_err());
    let p = Partition1D::new(vec![t, -t], vec![0, 1, 0]).unwrap();
    let v = p.volumes(2);
    assert!((v[0] - 0.5).abs() < 1e-12 && (v[1] - 0.5).abs() < 1e-12);
    assert!((p.cost() - 2.0 * (-0.5 * t * t).exp()).abs() < 1e-15);
}
