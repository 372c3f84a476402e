mod common;

use gaussian_bubbles::geometry::{barycenter_rank, SimplexDirections, SimplicialPartition};
use gaussian_bubbles::measure;
use proptest::prelude::*;

fn argmax_sector(p: &SimplicialPartition, x: &[f64]) -> (usize, f64) {
    let d = p.base_dim();
    let y = p.shift();
    let mut scores: Vec<(usize, f64)> = (0..p.m())
        .map(|i| {
            let z = p.directions().vector(i);
            (i, (0..d).map(|k| (x[k] - y[k]) * z[k]).sum())
        })
        .collect();
    scores.sort_by(|a, b| b.1.total_cmp(&a.1));
    (scores[0].0, scores[0].1 - scores[1].1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gram_is_regular(m in 2usize..9) {
        let g = SimplexDirections::regular(m).unwrap().gram();
        for i in 0..m {
            for j in 0..m {
                let want = if i == j { 1.0 } else { -1.0 / (m as f64 - 1.0) };
                prop_assert!((g[(i, j)] - want).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn one_sector_claims_each_point(
        m in 2usize..5,
        shift in prop::collection::vec(-1.0f64..1.0, 3),
        x in prop::collection::vec(-4.0f64..4.0, 6),
        extra in 0usize..3,
    ) {
        let p = SimplicialPartition::with_shift(m, &shift[..m - 1]).unwrap().with_extra(extra);
        let pt = &x[..p.ambient_dim()];
        let (want, margin) = argmax_sector(&p, pt);
        prop_assume!(margin > 1e-9);
        prop_assert_eq!(p.sector_of(pt).unwrap(), want);
        let mut moved = pt.to_vec();
        for v in moved.iter_mut().skip(m - 1) {
            *v += 7.5;
        }
        prop_assert_eq!(p.sector_of(&moved).unwrap(), want);
    }

    #[test]
    fn tripod_rays_balance(y0 in -1.0f64..1.0, y1 in -1.0f64..1.0) {
        let p = SimplicialPartition::with_shift(3, &[y0, y1]).unwrap();
        let pieces = p.interfaces().unwrap();
        let mut s = [0.0; 2];
        for piece in &pieces {
            prop_assert!((piece.origin[0] - y0).abs() < 1e-15 && (piece.origin[1] - y1).abs() < 1e-15);
            s[0] += piece.frame[0][0];
            s[1] += piece.frame[0][1];
        }
        prop_assert!(s[0].hypot(s[1]) < 1e-12);
    }

    #[test]
    fn shifted_partitions_have_full_rank(
        m in 2usize..5,
        shift in prop::collection::vec(-0.6f64..0.6, 3),
        extra in 0usize..2,
    ) {
        let base = SimplicialPartition::with_shift(m, &shift[..m - 1]).unwrap();
        let vols: Vec<f64> = measure::sector_volumes(&base).unwrap().iter().map(|v| v.value).collect();
        let mut sorted = vols.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assume!(sorted.windows(2).all(|w| w[1] - w[0] > 1e-3));
        let r = barycenter_rank(&base.regions(), 1e-8).unwrap();
        prop_assert_eq!(r.rank, m - 1);
        let lifted = barycenter_rank(&base.clone().with_extra(extra).regions(), 1e-8).unwrap();
        prop_assert_eq!(lifted.rank, r.rank);
    }
}

#[test]
fn partition_json_round_trip() {
    let p = SimplicialPartition::with_shift(4, &[0.1, -0.2, 0.3]).unwrap().with_extra(2);
    let back = SimplicialPartition::from_json(&p.to_json()).unwrap();
    assert_eq!(back, p);
}
