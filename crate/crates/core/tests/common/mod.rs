#![allow(dead_code)]

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Hyperbolic length of the upper-half-space geodesic through `(x, e^t)` and
/// `(x′, e^t′)`, integrated numerically along the semicircle (or the vertical
/// segment) in the plane containing both points.
pub fn line_integral_distance(x: &[f64], t: f64, x2: &[f64], t2: f64, rel_tol: f64) -> f64 {
    let gap: f64 = x.iter().zip(x2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let (y1, y2) = (t.exp(), t2.exp());
    if gap <= 1e-12 * y1.max(y2) {
        // ∫ dy / y along the vertical segment, in log-height to keep it smooth.
        let (lo, hi) = (t.min(t2), t.max(t2));
        return simpson(&|_s: f64| 1.0, lo, hi, rel_tol * (hi - lo).max(1e-300));
    }
    // Semicircle centered at c on the boundary line; with y = r sin θ, ds = dθ / sin θ.
    let c = (gap * gap + y2 * y2 - y1 * y1) / (2.0 * gap);
    let th1 = y1.atan2(-c);
    let th2 = y2.atan2(gap - c);
    let (lo, hi) = (th1.min(th2), th1.max(th2));
    let rough = simpson(&|th: f64| 1.0 / th.sin(), lo, hi, 1e-6);
    simpson(&|th: f64| 1.0 / th.sin(), lo, hi, rel_tol * rough)
}

/// `sinh d((u, y), semicircle(c, r)) = |(u − c)² + y² − r²| / (2 r y)`.
pub fn distance_to_semicircle(u: f64, y: f64, c: f64, r: f64) -> f64 {
    (((u - c).powi(2) + y * y - r * r).abs() / (2.0 * r * y)).asinh()
}

/// `sinh d((u, y), vertical line over a) = |u − a| / y`.
pub fn distance_to_vertical(u: f64, y: f64, a: f64) -> f64 {
    ((u - a).abs() / y).asinh()
}
