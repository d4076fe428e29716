//! Exact geometry of ℍⁿ in exponential coordinates.
//!
//! A point is `(x, t)` with `x ∈ ℝⁿ⁻¹` and metric `e^{-2t}|dx|² + dt²`. The chart
//! `(x, t) ↦ (x, e^t)` identifies this with the upper half-space, where geodesics
//! are vertical lines and semicircles orthogonal to the boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::SampledGeodesic;

/// Depth used to truncate ideal sides unless a caller picks another one.
pub const DEFAULT_DEPTH: f64 = 20.0;

/// Horizontal separations below this fraction of the lower height are treated
/// as vertical when parameterizing geodesics.
const NEAR_VERTICAL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HPoint {
    pub x: Vec<f64>,
    pub t: f64,
}

impl HPoint {
    pub fn new(x: Vec<f64>, t: f64) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::invalid("a point of ℍⁿ needs n ≥ 2"));
        }
        if !t.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("coordinates must be finite"));
        }
        Ok(HPoint { x, t })
    }

    /// Convenience constructor for ℍ².
    pub fn planar(x: f64, t: f64) -> Self {
        HPoint { x: vec![x], t }
    }

    /// Dimension `n` of the ambient ℍⁿ.
    pub fn dim(&self) -> usize {
        self.x.len() + 1
    }

    /// Height in the upper half-space chart.
    pub fn height(&self) -> f64 {
        self.t.exp()
    }
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

pub(crate) fn horizontal_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

/// Hyperbolic distance between two points of ℍⁿ.
///
/// Uses `sinh²(d/2) = |Δx|² e^{-(t+t')}/4 + sinh²((t-t')/2)`, the half-space
/// formula rewritten so that vertical pairs come out as `|t - t'|`.
pub fn dist_hyp(p: &HPoint, q: &HPoint) -> Result<f64> {
    check_dims(&p.x, &q.x)?;
    Ok(dist_unchecked(&p.x, p.t, &q.x, q.t))
}

pub(crate) fn dist_unchecked(x: &[f64], t: f64, x2: &[f64], t2: f64) -> f64 {
    let gap2: f64 = x.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum();
    dist_from_gap2(gap2, t, t2)
}

/// Distance from the squared horizontal gap and the two heights.
pub(crate) fn dist_from_gap2(gap2: f64, t: f64, t2: f64) -> f64 {
    let half = 0.5 * (t - t2);
    let sh = half.sinh();
    let s2 = 0.25 * gap2 * (-(t + t2)).exp() + sh * sh;
    2.0 * s2.sqrt().asinh()
}

/// A vertical geodesic `t ↦ (x, t)`; unit speed in `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerticalGeodesic {
    pub x: Vec<f64>,
}

impl VerticalGeodesic {
    pub fn new(x: Vec<f64>) -> Self {
        VerticalGeodesic { x }
    }

    pub fn at(&self, t: f64) -> HPoint {
        HPoint {
            x: self.x.clone(),
            t,
        }
    }
}

/// Ideal triangle with two vertical sides and the semicircle joining their feet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerticalTriangle {
    pub side_p: VerticalGeodesic,
    pub side_q: VerticalGeodesic,
    /// `t(r)`, the height of the top of the third side.
    pub midpoint_height: f64,
    pub displaced_height: Option<f64>,
}

impl VerticalTriangle {
    pub fn separation(&self) -> f64 {
        horizontal_gap(&self.side_p.x, &self.side_q.x)
    }

    /// The point `r` at the top of the third side.
    pub fn midpoint(&self) -> HPoint {
        let x = self
            .side_p
            .x
            .iter()
            .zip(&self.side_q.x)
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        HPoint {
            x,
            t: self.midpoint_height,
        }
    }

    /// Record `h_T`. Heights above `t(r)` contradict the definition and are rejected.
    pub fn set_displaced_height(&mut self, h: f64, tol: f64) -> Result<()> {
        if !h.is_finite() || h > self.midpoint_height + tol {
            return Err(Error::Certification(format!(
                "displaced height {h} exceeds midpoint height {}",
                self.midpoint_height
            )));
        }
        self.displaced_height = Some(h);
        Ok(())
    }

    /// Samples the finite stand-in for the ideal third side: the geodesic between
    /// `(x, -depth)` and `(x', -depth)`, at `count` evenly spaced arc-length values.
    pub fn sample_third_side(&self, depth: f64, count: usize) -> Result<SampledGeodesic<HPoint>> {
        if count < 2 {
            return Err(Error::invalid("third side needs at least two samples"));
        }
        let a = self.side_p.at(-depth);
        let b = self.side_q.at(-depth);
        Ok(GeodesicArc::new(&a, &b)?.sample(count))
    }
}

/// Height `t(r)` solving `e^{-t}|x - x'| = 2`.
pub fn midpoint_height(x: &[f64], x_prime: &[f64]) -> Result<f64> {
    check_dims(x, x_prime)?;
    let gap = horizontal_gap(x, x_prime);
    if gap == 0.0 {
        return Err(Error::invalid("vertical sides coincide; no ideal triangle"));
    }
    Ok((gap / 2.0).ln())
}

pub fn vertical_triangle(x: &[f64], x_prime: &[f64]) -> Result<VerticalTriangle> {
    let midpoint_height = midpoint_height(x, x_prime)?;
    Ok(VerticalTriangle {
        side_p: VerticalGeodesic::new(x.to_vec()),
        side_q: VerticalGeodesic::new(x_prime.to_vec()),
        midpoint_height,
        displaced_height: None,
    })
}

/// Unit-speed parameterization of the geodesic segment between two points.
#[derive(Debug, Clone)]
pub struct GeodesicArc {
    start: HPoint,
    end: HPoint,
    shape: ArcShape,
    length: f64,
}

#[derive(Debug, Clone)]
enum ArcShape {
    /// Vertical line (or a segment too steep to resolve as a circle).
    Vertical,
    /// Semicircle in the vertical plane through `start` spanned by `dir`.
    /// A point at signed parameter `σ` sits at horizontal offset
    /// `center + radius·tanh σ` along `dir` and height `radius / cosh σ`.
    Circle {
        dir: Vec<f64>,
        center: f64,
        radius: f64,
        sigma_start: f64,
    },
}

impl GeodesicArc {
    pub fn new(a: &HPoint, b: &HPoint) -> Result<Self> {
        check_dims(&a.x, &b.x)?;
        let gap = horizontal_gap(&a.x, &b.x);
        let length = dist_unchecked(&a.x, a.t, &b.x, b.t);
        let low = a.t.min(b.t).exp();
        let shape = if gap <= NEAR_VERTICAL * low {
            ArcShape::Vertical
        } else {
            let dir: Vec<f64> = a.x.iter().zip(&b.x).map(|(p, q)| (q - p) / gap).collect();
            let (ya, yb) = (a.height(), b.height());
            // center on the boundary line, measured from a along dir
            let center = (gap * gap + (yb - ya) * (yb + ya)) / (2.0 * gap);
            let radius = center.hypot(ya);
            let sigma_start = (-center / ya).asinh();
            ArcShape::Circle {
                dir,
                center,
                radius,
                sigma_start,
            }
        };
        Ok(GeodesicArc {
            start: a.clone(),
            end: b.clone(),
            shape,
            length,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Point at arc-length `s ∈ [0, length]` from the start.
    pub fn point_at(&self, s: f64) -> HPoint {
        if s <= 0.0 {
            return self.start.clone();
        }
        if s >= self.length {
            return self.end.clone();
        }
        match &self.shape {
            ArcShape::Vertical => {
                let frac = s / self.length;
                let t = if self.end.t >= self.start.t {
                    self.start.t + s
                } else {
                    self.start.t - s
                };
                let x = self
                    .start
                    .x
                    .iter()
                    .zip(&self.end.x)
                    .map(|(p, q)| p + (q - p) * frac)
                    .collect();
                HPoint { x, t }
            }
            ArcShape::Circle {
                dir,
                center,
                radius,
                sigma_start,
            } => {
                let sigma = sigma_start + s;
                let offset = center + radius * sigma.tanh();
                let t = radius.ln() - ln_cosh(sigma);
                let x = self
                    .start
                    .x
                    .iter()
                    .zip(dir)
                    .map(|(p, d)| p + d * offset)
                    .collect();
                HPoint { x, t }
            }
        }
    }

    /// `count` points evenly spaced in arc-length, endpoints included. A
    /// zero-length arc yields the single point.
    pub fn sample(&self, count: usize) -> SampledGeodesic<HPoint> {
        if self.length == 0.0 || count < 2 {
            return SampledGeodesic::exact(vec![self.start.clone()], vec![0.0]);
        }
        let step = self.length / (count - 1) as f64;
        let mut points = Vec::with_capacity(count);
        let mut params = Vec::with_capacity(count);
        for i in 0..count {
            let s = if i + 1 == count { self.length } else { i as f64 * step };
            points.push(self.point_at(s));
            params.push(s);
        }
        SampledGeodesic::exact(points, params)
    }

    /// Distance from `p` to the segment, by golden-section search on the
    /// arc-length parameter. The distance to a point is convex along a geodesic,
    /// so the search finds the global minimum.
    pub fn distance_to(&self, p: &HPoint) -> f64 {
        let f = |s: f64| {
            let q = self.point_at(s);
            dist_unchecked(&p.x, p.t, &q.x, q.t)
        };
        let (_, v) = golden_min(f, 0.0, self.length, 1e-11);
        v.min(f(0.0)).min(f(self.length))
    }
}

fn ln_cosh(s: f64) -> f64 {
    let a = s.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
pub(crate) fn golden_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    if b - a <= tol {
        let m = 0.5 * (a + b);
        return (m, f(m));
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn vertical_distance_is_height_difference() {
        let p = HPoint::new(vec![0.0, 0.0], 0.0).unwrap();
        let q = HPoint::new(vec![0.0, 0.0], 5.0).unwrap();
        assert_relative_eq!(dist_hyp(&p, &q).unwrap(), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn horizontal_pair_matches_arccosh_form() {
        for a in [0.1, 1.0, 3.0, 25.0] {
            let d = dist_hyp(&HPoint::planar(0.0, 0.0), &HPoint::planar(a, 0.0)).unwrap();
            assert_relative_eq!(d, 2.0 * (a / 2.0).asinh(), max_relative = 1e-14);
            assert_relative_eq!(d, (1.0 + a * a / 2.0).acosh(), max_relative = 1e-12);
        }
    }

    #[test]
    fn horocyclic_distance_is_below_leaf_length() {
        for (gap, t) in [(1.0, 0.0), (3.0, 1.0), (0.01, -3.0), (40.0, 2.0)] {
            let u: f64 = (-t as f64).exp() * gap;
            let d = dist_hyp(&HPoint::planar(0.0, t), &HPoint::planar(gap, t)).unwrap();
            assert!(d <= u + 1e-12, "d = {d}, u = {u}");
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let p = HPoint::new(vec![0.0], 0.0).unwrap();
        let q = HPoint::new(vec![0.0, 1.0], 0.0).unwrap();
        assert!(matches!(
            dist_hyp(&p, &q),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(HPoint::new(vec![], 0.0).is_err());
        assert!(HPoint::new(vec![f64::NAN], 0.0).is_err());
    }

    #[test]
    fn midpoint_heights() {
        assert_relative_eq!(midpoint_height(&[0.0], &[2.0]).unwrap(), 0.0);
        let e = std::f64::consts::E;
        assert_relative_eq!(midpoint_height(&[0.0], &[2.0 * e]).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(
            midpoint_height(&[0.0], &[1.0]).unwrap(),
            -std::f64::consts::LN_2,
            epsilon = 1e-12
        );
        assert!(midpoint_height(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn triangles() {
        let t = vertical_triangle(&[0.0], &[2.0]).unwrap();
        assert_eq!(t.midpoint_height, 0.0);
        assert!(t.displaced_height.is_none());
        let t3 = vertical_triangle(&[0.0, 0.0], &[2.0, 0.0]).unwrap();
        assert_eq!(t3.midpoint_height, 0.0);
        let t6 = vertical_triangle(&[0.0], &[6.0]).unwrap();
        assert_relative_eq!(t6.midpoint_height, 3f64.ln(), epsilon = 1e-15);
        assert!(vertical_triangle(&[0.5], &[0.5]).is_err());
    }

    #[test]
    fn displaced_height_cannot_exceed_midpoint() {
        let mut t = vertical_triangle(&[0.0], &[2.0]).unwrap();
        assert!(t.set_displaced_height(0.5, 1e-9).is_err());
        t.set_displaced_height(-1.5, 1e-9).unwrap();
        assert_eq!(t.displaced_height, Some(-1.5));
    }

    #[test]
    fn third_side_apex_approaches_midpoint() {
        let t = vertical_triangle(&[0.0], &[2.0]).unwrap();
        let side = t.sample_third_side(20.0, 101).unwrap();
        let apex = side.points().iter().map(|p| p.t).fold(f64::MIN, f64::max);
        assert!((apex - 0.0).abs() < 1e-6, "apex {apex}");

        let e = std::f64::consts::E;
        let t = vertical_triangle(&[0.0], &[2.0 * e]).unwrap();
        let side = t.sample_third_side(20.0, 101).unwrap();
        let apex = side.points().iter().map(|p| p.t).fold(f64::MIN, f64::max);
        assert!((apex - 1.0).abs() < 1e-6, "apex {apex}");

        let two = t.sample_third_side(20.0, 2).unwrap();
        assert_eq!(two.len(), 2);
        assert_eq!(two.points()[0], HPoint::planar(0.0, -20.0));
        assert_eq!(two.points()[1], HPoint::planar(2.0 * e, -20.0));
        assert!(t.sample_third_side(20.0, 1).is_err());
    }

    #[test]
    fn arc_samples_are_unit_speed() {
        let a = HPoint::new(vec![-1.0, 0.3], -2.0).unwrap();
        let b = HPoint::new(vec![2.0, -0.5], 0.7).unwrap();
        let arc = GeodesicArc::new(&a, &b).unwrap();
        let g = arc.sample(64);
        for w in g.points().windows(2).zip(g.params().windows(2)) {
            let (pts, ps) = w;
            let d = dist_hyp(&pts[0], &pts[1]).unwrap();
            assert_relative_eq!(d, ps[1] - ps[0], max_relative = 1e-8);
        }
        assert_relative_eq!(
            g.params().last().copied().unwrap(),
            dist_hyp(&a, &b).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn distance_to_segment() {
        let a = HPoint::planar(0.0, -3.0);
        let b = HPoint::planar(0.0, 3.0);
        let arc = GeodesicArc::new(&a, &b).unwrap();
        // sinh d = |Δx| / y for the distance to a vertical line
        let p = HPoint::planar(1.5, 0.2);
        let expect = (1.5 * (-0.2f64).exp()).asinh();
        assert_relative_eq!(arc.distance_to(&p), expect, max_relative = 1e-9);
        // beyond the end the nearest point is the endpoint
        let far = HPoint::planar(0.0, 5.0);
        assert_relative_eq!(arc.distance_to(&far), 2.0, epsilon = 1e-9);
    }
}
