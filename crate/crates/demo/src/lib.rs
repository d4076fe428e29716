//! Browser bindings: distances and geodesics in the upper half-plane, vertical
//! triangles with their displaced heights, and certification of the identity.

use pencil::certifier::{certify, displaced_height, CertifierConfig};
use pencil::hyperbolic::{dist_hyp, midpoint_height, GeodesicArc, HPoint};
use pencil::pencil::CoordinatePencil;
use pencil::space::exact_hyperbolic_target;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn polyline(a: &HPoint, b: &HPoint, count: usize) -> pencil::Result<Vec<[f64; 2]>> {
    let arc = GeodesicArc::new(a, b)?;
    Ok(arc.sample(count.max(2)).points().iter().map(|p| [p.x[0], p.height()]).collect())
}

/// Distance between `(x1, e^t1)` and `(x2, e^t2)` and the connecting geodesic
/// in upper half-plane coordinates.
pub fn geodesic_json(x1: f64, t1: f64, x2: f64, t2: f64, count: usize) -> pencil::Result<String> {
    let (a, b) = (HPoint::planar(x1, t1), HPoint::planar(x2, t2));
    let distance = dist_hyp(&a, &b)?;
    Ok(json!({ "distance": distance, "points": polyline(&a, &b, count)? }).to_string())
}

/// The vertical triangle over `x` and `x2`: midpoint height `t(r)`, displaced
/// height `h_T` for closeness `big_delta`, and the third side down to `t(r) − depth`.
pub fn triangle_json(x: f64, x2: f64, big_delta: f64, depth: f64) -> pencil::Result<String> {
    let (lo, hi) = (x.min(x2), x.max(x2));
    let tr = midpoint_height(&[lo], &[hi])?;
    let f = CoordinatePencil::new(exact_hyperbolic_target(2)?, 2)?;
    let mut grid = CertifierConfig::exact_defaults().triangles;
    grid.base_x = lo;
    grid.depth = pencil::certifier::Depth::BelowMidpoint { d: depth };
    let report = displaced_height(&f, &grid, hi - lo, big_delta, 1e-4)?;
    let bottom = tr - depth;
    let side = polyline(&HPoint::planar(lo, bottom), &HPoint::planar(hi, bottom), 200)?;
    Ok(json!({
        "midpoint_height": tr,
        "displaced_height": report.displaced_height,
        "gap_at_height": report.gap_at_height,
        "third_side": side,
    })
    .to_string())
}

/// Certifies the identity of ℍⁿ with `pairs` verification pairs.
pub fn certify_identity_json(n: usize, pairs: usize) -> pencil::Result<String> {
    let f = CoordinatePencil::new(exact_hyperbolic_target(n)?, n)?;
    let mut cfg = CertifierConfig::exact_defaults();
    cfg.pairs = pairs.max(1);
    let outcome = certify(&f, &cfg)?;
    Ok(match outcome.result {
        Ok(c) => json!({
            "pass": c.pass, "delta": c.delta, "R": c.R, "C0": c.C0,
            "Delta": c.Delta, "K": c.K, "sup_discrepancy": c.sup_discrepancy, "pairs": c.pairs,
        }),
        Err(r) => json!({ "pass": false, "stage": r.stage, "reason": r.reason }),
    }
    .to_string())
}

fn js(e: pencil::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn geodesic(x1: f64, t1: f64, x2: f64, t2: f64, count: usize) -> Result<String, JsError> {
    geodesic_json(x1, t1, x2, t2, count).map_err(js)
}

#[wasm_bindgen]
pub fn vertical_triangle(x: f64, x2: f64, big_delta: f64, depth: f64) -> Result<String, JsError> {
    triangle_json(x, x2, big_delta, depth).map_err(js)
}

#[wasm_bindgen]
pub fn certify_identity(n: usize, pairs: usize) -> Result<String, JsError> {
    certify_identity_json(n, pairs).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn geodesic_reports_distance_and_endpoints() {
        let v: Value = serde_json::from_str(&geodesic_json(0.0, 0.0, 0.0, 1.0, 5).unwrap()).unwrap();
        assert!((v["distance"].as_f64().unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(v["points"].as_array().unwrap().len(), 5);
    }

    #[test]
    fn triangle_heights() {
        let v: Value = serde_json::from_str(&triangle_json(0.0, 2.0, 2.9, 4.0).unwrap()).unwrap();
        assert_eq!(v["midpoint_height"].as_f64().unwrap(), 0.0);
        let h = v["displaced_height"].as_f64().unwrap();
        assert!((h - (2.0 / 2.9f64.sinh()).ln()).abs() < 1e-3, "{h}");
    }

    #[test]
    fn identity_certifies() {
        let v: Value = serde_json::from_str(&certify_identity_json(2, 50).unwrap()).unwrap();
        assert_eq!(v["pass"], Value::Bool(true));
        assert_eq!(v["sup_discrepancy"].as_f64().unwrap(), 0.0);
    }
}
