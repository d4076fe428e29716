//! Target spaces: geodesic metric spaces seen through distance and
//! geodesic-sampling queries.

use std::fmt::Debug;

use crate::error::{Error, Result};
use crate::hyperbolic::{dist_hyp, GeodesicArc, HPoint};

/// A finite polyline standing in for a geodesic, with cumulative arc-length
/// parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledGeodesic<P> {
    points: Vec<P>,
    params: Vec<f64>,
    /// Samples of a true geodesic segment (not merely a polyline).
    exact: bool,
}

impl<P> SampledGeodesic<P> {
    pub fn new(points: Vec<P>, params: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != params.len() {
            return Err(Error::invalid(
                "sampled geodesic needs one parameter per point and at least one point",
            ));
        }
        if params[0] != 0.0 {
            return Err(Error::invalid("arc parameters must start at 0"));
        }
        if params.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("arc parameters must be strictly increasing"));
        }
        Ok(SampledGeodesic {
            points,
            params,
            exact: false,
        })
    }

    pub(crate) fn exact(points: Vec<P>, params: Vec<f64>) -> Self {
        debug_assert_eq!(points.len(), params.len());
        SampledGeodesic {
            points,
            params,
            exact: true,
        }
    }

    /// Marks the samples as lying on one geodesic segment.
    pub fn into_exact(mut self) -> Self {
        self.exact = true;
        self
    }

    pub(crate) fn single(point: P) -> Self {
        SampledGeodesic {
            points: vec![point],
            params: vec![0.0],
            exact: true,
        }
    }

    pub fn points(&self) -> &[P] {
        &self.points
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Total arc-length.
    pub fn length(&self) -> f64 {
        *self.params.last().unwrap_or(&0.0)
    }

    /// True when the samples lie on a single geodesic segment, so the segment
    /// between the first and last sample may be used in place of the polyline.
    pub fn is_exact(&self) -> bool {
        self.exact
    }

    pub fn first(&self) -> &P {
        &self.points[0]
    }

    pub fn last(&self) -> &P {
        &self.points[self.points.len() - 1]
    }
}

/// Distance from a point to a fixed set, prepared once and queried many times.
pub type Proximity<'a, P> = Box<dyn Fn(&P) -> Result<f64> + Send + Sync + 'a>;

/// A geodesic metric space queried through distances and sampled geodesics.
pub trait TargetSpace: Sync {
    type Point: Clone + Debug + PartialEq + Send + Sync;

    fn distance(&self, a: &Self::Point, b: &Self::Point) -> Result<f64>;

    /// Geodesic from `a` to `b` sampled at (up to) `samples` points.
    fn geodesic(&self, a: &Self::Point, b: &Self::Point, samples: usize)
        -> Result<SampledGeodesic<Self::Point>>;

    /// Additive accuracy of `distance` relative to the space it models.
    fn tolerance(&self) -> f64;

    /// Distances from one source to many targets.
    fn distances_from(&self, source: &Self::Point, targets: &[Self::Point]) -> Result<Vec<f64>> {
        targets.iter().map(|t| self.distance(source, t)).collect()
    }

    /// Distance to the union of the sample points of `path`.
    fn proximity<'a>(&'a self, path: &'a SampledGeodesic<Self::Point>) -> Result<Proximity<'a, Self::Point>> {
        Ok(Box::new(move |p| {
            let mut best = f64::INFINITY;
            for q in path.points() {
                best = best.min(self.distance(p, q)?);
            }
            Ok(best)
        }))
    }
}

/// ℍᵐ itself, with the closed-form distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactHyperbolic {
    dim: usize,
}

pub fn exact_hyperbolic_target(m: usize) -> Result<ExactHyperbolic> {
    if m < 2 {
        return Err(Error::invalid(format!("ℍᵐ needs m ≥ 2, got {m}")));
    }
    Ok(ExactHyperbolic { dim: m })
}

impl ExactHyperbolic {
    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check(&self, p: &HPoint) -> Result<()> {
        if p.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: p.dim(),
            });
        }
        Ok(())
    }
}

impl TargetSpace for ExactHyperbolic {
    type Point = HPoint;

    fn distance(&self, a: &HPoint, b: &HPoint) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        dist_hyp(a, b)
    }

    fn geodesic(&self, a: &HPoint, b: &HPoint, samples: usize) -> Result<SampledGeodesic<HPoint>> {
        self.check(a)?;
        self.check(b)?;
        if a == b {
            return Ok(SampledGeodesic::single(a.clone()));
        }
        Ok(GeodesicArc::new(a, b)?.sample(samples.max(2)))
    }

    fn tolerance(&self) -> f64 {
        1e-12
    }

    /// Exact paths are treated as the full geodesic segment; other polylines
    /// are searched sample by sample and refined on the adjacent segments.
    fn proximity<'a>(&'a self, path: &'a SampledGeodesic<HPoint>) -> Result<Proximity<'a, HPoint>> {
        for p in path.points() {
            self.check(p)?;
        }
        if path.len() == 1 {
            let only = path.first().clone();
            return Ok(Box::new(move |p| dist_hyp(p, &only)));
        }
        if path.is_exact() {
            let arc = GeodesicArc::new(path.first(), path.last())?;
            return Ok(Box::new(move |p| {
                self.check(p)?;
                Ok(arc.distance_to(p))
            }));
        }
        Ok(Box::new(move |p| {
            self.check(p)?;
            let pts = path.points();
            let (mut best_i, mut best) = (0, f64::INFINITY);
            for (i, q) in pts.iter().enumerate() {
                let d = dist_hyp(p, q)?;
                if d < best {
                    best = d;
                    best_i = i;
                }
            }
            let lo = best_i.saturating_sub(1);
            let hi = (best_i + 1).min(pts.len() - 1);
            for i in lo..hi {
                best = best.min(GeodesicArc::new(&pts[i], &pts[i + 1])?.distance_to(p));
            }
            Ok(best)
        }))
    }
}
