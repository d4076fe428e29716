use pencil::hyperbolic::{dist_hyp, midpoint_height, HPoint};
use pencil::mesh::MeshSpace;
use pencil::space::{exact_hyperbolic_target, TargetSpace};
use proptest::prelude::*;

fn coord() -> impl Strategy<Value = f64> {
    -8.0..8.0f64
}

fn height() -> impl Strategy<Value = f64> {
    -5.0..5.0f64
}

fn point(n: usize) -> impl Strategy<Value = HPoint> {
    (prop::collection::vec(coord(), n - 1), height()).prop_map(|(x, t)| HPoint::new(x, t).unwrap())
}

fn d(p: &HPoint, q: &HPoint) -> f64 {
    dist_hyp(p, q).unwrap()
}

proptest! {
    #[test]
    fn metric_axioms(p in point(3), q in point(3), r in point(3)) {
        prop_assert_eq!(d(&p, &p), 0.0);
        prop_assert!(d(&p, &q) >= 0.0);
        prop_assert!((d(&p, &q) - d(&q, &p)).abs() <= 1e-12 * (1.0 + d(&p, &q)));
        prop_assert!(d(&p, &r) <= d(&p, &q) + d(&q, &r) + 1e-9);
    }

    #[test]
    fn horizontal_translations_are_isometries(p in point(4), q in point(4), v in prop::collection::vec(coord(), 3)) {
        let shift = |a: &HPoint| HPoint::new(a.x.iter().zip(&v).map(|(c, s)| c + s).collect(), a.t).unwrap();
        let (a, b) = (d(&p, &q), d(&shift(&p), &shift(&q)));
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
    }

    #[test]
    fn rotations_are_isometries(p in point(3), q in point(3), theta in 0.0..std::f64::consts::TAU) {
        let (c, s) = (theta.cos(), theta.sin());
        let rot = |a: &HPoint| HPoint::new(vec![c * a.x[0] - s * a.x[1], s * a.x[0] + c * a.x[1]], a.t).unwrap();
        let (a, b) = (d(&p, &q), d(&rot(&p), &rot(&q)));
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
    }

    #[test]
    fn dilations_shift_height(p in point(2), q in point(2), k in -3.0..3.0f64) {
        let dil = |a: &HPoint| HPoint::new(a.x.iter().map(|c| c * k.exp()).collect(), a.t + k).unwrap();
        let (a, b) = (d(&p, &q), d(&dil(&p), &dil(&q)));
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
    }

    #[test]
    fn vertical_distance_is_height_difference(x in prop::collection::vec(coord(), 2), t in height(), t2 in height()) {
        let a = HPoint::new(x.clone(), t).unwrap();
        let b = HPoint::new(x, t2).unwrap();
        prop_assert!((d(&a, &b) - (t - t2).abs()).abs() <= 1e-12);
    }

    #[test]
    fn midpoint_identity(x in prop::collection::vec(coord(), 2), x2 in prop::collection::vec(coord(), 2)) {
        let gap = x.iter().zip(&x2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        prop_assume!(gap > 1e-6);
        let tr = midpoint_height(&x, &x2).unwrap();
        prop_assert!(((-tr).exp() * gap - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn horocyclic_bound(x in coord(), x2 in coord(), t in height()) {
        let a = HPoint::planar(x, t);
        let b = HPoint::planar(x2, t);
        prop_assert!(d(&a, &b) <= (-t).exp() * (x - x2).abs() + 1e-12);
    }

    #[test]
    fn proximity_is_a_lower_bound_on_sample_distances(p in point(2), a in point(2), b in point(2)) {
        let h2 = exact_hyperbolic_target(2).unwrap();
        let g = h2.geodesic(&a, &b, 64).unwrap();
        let near = h2.proximity(&g).unwrap();
        let to_samples = g.points().iter().map(|q| d(&p, q)).fold(f64::INFINITY, f64::min);
        let exact = near(&p).unwrap();
        prop_assert!(exact <= to_samples + 1e-9);
        prop_assert!(exact >= to_samples - 0.5 * g.length() / 63.0 - 1e-9);
    }

    #[test]
    fn graph_distances_match_floyd_warshall(
        n in 2usize..9,
        raw in prop::collection::vec((0usize..9, 0usize..9, 0.1..5.0f64), 1..30),
    ) {
        let mut edges: Vec<(u32, u32, f64)> = (0..n - 1).map(|i| (i as u32, i as u32 + 1, 3.0)).collect();
        edges.extend(raw.into_iter().filter(|&(a, b, _)| a < n && b < n && a != b).map(|(a, b, w)| (a as u32, b as u32, w)));
        let mesh = MeshSpace::from_edges((0..n).map(|i| vec![i as f64, 0.0]).collect(), &edges, 1.0).unwrap();
        let mut fw = vec![vec![f64::INFINITY; n]; n];
        for i in 0..n {
            fw[i][i] = 0.0;
        }
        for &(a, b, w) in &edges {
            let (a, b) = (a as usize, b as usize);
            fw[a][b] = fw[a][b].min(w);
            fw[b][a] = fw[b][a].min(w);
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    fw[i][j] = fw[i][j].min(fw[i][k] + fw[k][j]);
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let m = mesh.distance(&(i as u32), &(j as u32)).unwrap();
                prop_assert!((m - fw[i][j]).abs() <= 1e-9, "{} {}: {} vs {}", i, j, m, fw[i][j]);
            }
        }
        let doc = mesh.to_document();
        let back = MeshSpace::from_document(doc.clone()).unwrap();
        prop_assert_eq!(back.to_document(), doc);
    }
}
