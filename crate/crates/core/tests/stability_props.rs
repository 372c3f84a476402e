use gaussian_bubbles::stability::{self, CurveNetworkMesh, DiscreteField, End};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn admissible(mesh: &CurveNetworkMesh, seed: u64) -> DiscreteField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = DiscreteField::zeros(mesh);
    for vals in f.values.iter_mut() {
        let n = vals.len();
        for v in &mut vals[..n - 1] {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    for j in 0..mesh.junctions.len() {
        let sig = mesh.junction_signs(j);
        let slot = |s: usize| {
            let (e, end) = mesh.junctions[j].slots[s];
            (e, if end == End::Start { 0 } else { mesh.edges[e].len() - 1 })
        };
        let partial: f64 = (0..2).map(|s| sig[s] * f.values[slot(s).0][slot(s).1]).sum();
        let (e, k) = slot(2);
        f.values[e][k] = -partial / sig[2];
    }
    f
}

/// `|Fᵀ S G + <L F, G>|` for smooth bumps supported in `|s| < 3` on a
/// line through the origin.
fn parts_gap(nodes: usize) -> f64 {
    let mesh = CurveNetworkMesh::line([0.0, 1.0], 0.0, 8.5, nodes).unwrap();
    let bump = |s: f64, c: f64| {
        let u = (s - c) / 2.5;
        if u.abs() < 1.0 { (-1.0 / (1.0 - u * u)).exp() } else { 0.0 }
    };
    let f = DiscreteField::from_fn(&mesh, |e, k| bump(mesh.edges[e].points[k][0], 0.3));
    let g = DiscreteField::from_fn(&mesh, |e, k| bump(mesh.edges[e].points[k][0], -0.4) * 2.0);
    let ops = stability::assemble(&mesh).unwrap();
    let lf = stability::apply_l(&mesh, &f).unwrap();
    (ops.q_fields(&f, &g) + ops.inner_fields(&lf, &g)).abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn q_is_symmetric(seed in any::<u64>(), cx in -0.5f64..0.5, cy in -0.5f64..0.5) {
        let mesh = CurveNetworkMesh::tripod([cx, cy], 8.5, 60).unwrap();
        let ops = stability::assemble(&mesh).unwrap();
        let f = admissible(&mesh, seed);
        let g = admissible(&mesh, seed.wrapping_add(1));
        prop_assert!(f.junction_residual(&mesh) < 1e-12);
        prop_assert!((ops.q_fields(&f, &g) - ops.q_fields(&g, &f)).abs() <= 1e-12);
    }
}

#[test]
fn integration_by_parts_is_second_order() {
    let coarse = parts_gap(401);
    let fine = parts_gap(801);
    let rate = (coarse / fine).log2();
    assert!(rate > 1.8, "gaps {coarse:e} -> {fine:e}, rate {rate}");
}

#[test]
fn tripod_eigenfields_are_orthogonal() {
    let mesh = CurveNetworkMesh::tripod([0.0, 0.0], 8.5, 80).unwrap();
    let ops = stability::assemble(&mesh).unwrap();
    let pairs = stability::eigenpairs(&mesh, 8).unwrap();
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            if (pairs[i].0 - pairs[j].0).abs() < 1e-6 {
                continue;
            }
            let (fi, fj) = (&pairs[i].1, &pairs[j].1);
            let c = ops.inner_fields(fi, fj)
                / (ops.inner_fields(fi, fi) * ops.inner_fields(fj, fj)).sqrt();
            assert!(c.abs() <= 1e-6, "modes {i}, {j}: {c:e}");
        }
    }
}

#[test]
fn tone_self_converges() {
    let tones: Vec<(f64, f64)> = [50usize, 100, 200]
        .iter()
        .map(|&n| {
            let mesh = CurveNetworkMesh::tripod([0.0, 0.0], 8.5, n).unwrap();
            (8.5 / (n - 1) as f64, stability::fundamental_tone(&mesh, false).unwrap().tone)
        })
        .collect();
    for w in tones.windows(2) {
        let (h, t) = w[0];
        assert!((w[1].1 - t).abs() <= h * h, "{tones:?}");
    }
}

#[test]
fn flat_stationary_networks_have_tone_at_least_one() {
    let mut meshes = vec![
        CurveNetworkMesh::line([1.0, 0.0], 0.0, 8.5, 400).unwrap(),
        CurveNetworkMesh::line([0.6, 0.8], 0.7, 8.5, 400).unwrap(),
    ];
    for c in [[0.0, 0.0], [0.3, -0.2], [-0.5, 0.4]] {
        meshes.push(CurveNetworkMesh::tripod(c, 8.5, 150).unwrap());
    }
    for mesh in &meshes {
        let r = stability::fundamental_tone(mesh, false).unwrap();
        assert!(r.tone >= 1.0 - 5e-2, "tone {}", r.tone);
    }
}

#[test]
fn field_csv_has_one_row_per_node() {
    let mesh = CurveNetworkMesh::tripod([0.0, 0.0], 8.5, 20).unwrap();
    let f = DiscreteField::linear(&mesh, [1.0, 0.0]);
    assert_eq!(f.to_csv(&mesh).lines().count(), 1 + 3 * 20);
}
