mod common;

use common::{distance_to_semicircle, distance_to_vertical, line_integral_distance};
use pencil::certifier::{estimate_delta, CertifierConfig};
use pencil::hyperbolic::{dist_hyp, HPoint};
use pencil::pencil::CoordinatePencil;
use pencil::space::exact_hyperbolic_target;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn closed_form_distance_matches_line_integral() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 2..=4 {
        for _ in 0..300 {
            let x: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let x2: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let (t, t2) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let d = dist_hyp(&HPoint::new(x.clone(), t).unwrap(), &HPoint::new(x2.clone(), t2).unwrap()).unwrap();
            let oracle = line_integral_distance(&x, t, &x2, t2, 1e-12);
            assert!((d - oracle).abs() <= 1e-9 * oracle, "n={n}: {d} vs {oracle}");
        }
    }
}

#[test]
fn vertical_pairs_have_log_distance() {
    let p = HPoint::new(vec![0.7, -1.0], -2.0).unwrap();
    let q = HPoint::new(vec![0.7, -1.0], 3.5).unwrap();
    let oracle = line_integral_distance(&p.x, p.t, &q.x, q.t, 1e-13);
    assert!((dist_hyp(&p, &q).unwrap() - oracle).abs() < 1e-12);
}

/// Slimness of the ideal triangle with vertical sides over 0 and `s` and the
/// semicircle joining their feet, by dense search over heights.
fn ideal_slimness(s: f64) -> f64 {
    let (c, r) = (0.5 * s, 0.5 * s);
    let mut worst: f64 = 0.0;
    let steps = 40_000;
    for k in 0..=steps {
        let t = -12.0 + 24.0 * k as f64 / steps as f64 + (0.5 * s).ln();
        let y = t.exp();
        // a point of the side over 0, against the other two sides
        let d = distance_to_vertical(0.0, y, s).min(distance_to_semicircle(0.0, y, c, r));
        worst = worst.max(d);
        // a point of the semicircle at height y, when it exists
        if y < r {
            let u = c - (r * r - y * y).sqrt();
            let d = distance_to_vertical(u, y, 0.0).min(distance_to_vertical(u, y, s));
            worst = worst.max(d);
        }
    }
    worst
}

#[test]
fn truncated_slimness_matches_dense_ideal_search() {
    let ideal = ideal_slimness(2.0);
    assert!((ideal - (1.0 + 2f64.sqrt()).ln()).abs() < 5e-4, "{ideal}");
    let f = CoordinatePencil::new(exact_hyperbolic_target(2).unwrap(), 2).unwrap();
    let mut grid = CertifierConfig::exact_defaults().triangles;
    grid.separations = vec![2.0];
    let est = estimate_delta(&f, &grid).unwrap();
    assert!((est.delta - ideal).abs() < 1e-3, "{} vs {ideal}", est.delta);
}
