//! Pencil embeddings `F: ℍⁿ → X`, sending each vertical geodesic `η_x` to a
//! flow line in the target.

use crate::error::{Error, Result};
use crate::hyperbolic::HPoint;
use crate::space::{ExactHyperbolic, SampledGeodesic, TargetSpace};
use crate::warped::WarpedModel;

pub type PointOf<P> = <<P as Pencil>::Target as TargetSpace>::Point;

pub trait Pencil: Sync {
    type Target: TargetSpace;

    fn target(&self) -> &Self::Target;

    /// Number of horizontal coordinates of the domain, `n − 1`.
    fn domain_dim(&self) -> usize;

    fn at(&self, x: &[f64], t: f64) -> Result<PointOf<Self>>;

    /// True when every `F ∘ η_x` is exactly a geodesic of the target, so a
    /// sampled image may be treated as the full segment.
    fn vertical_is_geodesic(&self) -> bool {
        false
    }

    /// `F ∘ η_x` on `[t_lo, t_hi]`, sampled every `step` with `t` itself as
    /// the arc parameter. Repeated consecutive points are dropped.
    fn vertical_image(&self, x: &[f64], t_lo: f64, t_hi: f64, step: f64) -> Result<SampledGeodesic<PointOf<Self>>> {
        if !(t_hi > t_lo && step > 0.0) {
            return Err(Error::invalid(format!("empty vertical range [{t_lo}, {t_hi}] or step {step}")));
        }
        let count = ((t_hi - t_lo) / step).ceil() as usize;
        let mut points: Vec<PointOf<Self>> = Vec::with_capacity(count + 1);
        let mut params = Vec::with_capacity(count + 1);
        for k in 0..=count {
            let t = if k == count { t_hi } else { t_lo + k as f64 * step };
            let p = self.at(x, t)?;
            if points.last() == Some(&p) {
                continue;
            }
            points.push(p);
            params.push(t - t_lo);
        }
        let g = SampledGeodesic::new(points, params)?;
        Ok(if self.vertical_is_geodesic() { g.into_exact() } else { g })
    }
}

/// `F(x, t) = ((x, 0, …, 0), t)` into ℍᵐ; the identity when `n = m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinatePencil {
    target: ExactHyperbolic,
    n: usize,
}

impl CoordinatePencil {
    pub fn new(target: ExactHyperbolic, n: usize) -> Result<Self> {
        if n < 2 || n > target.dim() {
            return Err(Error::invalid(format!(
                "a coordinate pencil needs 2 ≤ n ≤ m, got n = {n}, m = {}",
                target.dim()
            )));
        }
        Ok(CoordinatePencil { target, n })
    }
}

impl Pencil for CoordinatePencil {
    type Target = ExactHyperbolic;

    fn target(&self) -> &ExactHyperbolic {
        &self.target
    }

    fn domain_dim(&self) -> usize {
        self.n - 1
    }

    fn at(&self, x: &[f64], t: f64) -> Result<HPoint> {
        if x.len() != self.n - 1 {
            return Err(Error::DimensionMismatch {
                expected: self.n - 1,
                found: x.len(),
            });
        }
        let mut coords = x.to_vec();
        coords.resize(self.target.dim() - 1, 0.0);
        HPoint::new(coords, t)
    }

    fn vertical_is_geodesic(&self) -> bool {
        true
    }
}

/// Pushes a point along the leaf of a warped model: `F(x, t)` is the mesh
/// vertex nearest to leaf parameter `x` at height `t`.
#[derive(Debug, Clone, Copy)]
pub struct LeafPencil<'a> {
    model: &'a WarpedModel,
}

impl<'a> LeafPencil<'a> {
    pub fn new(model: &'a WarpedModel) -> Self {
        LeafPencil { model }
    }
}

impl Pencil for LeafPencil<'_> {
    type Target = WarpedModel;

    fn target(&self) -> &WarpedModel {
        self.model
    }

    fn domain_dim(&self) -> usize {
        1
    }

    fn at(&self, x: &[f64], t: f64) -> Result<u32> {
        if x.len() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: x.len(),
            });
        }
        self.model.leaf_vertex(x[0], t)
    }
}

/// A pencil given by an arbitrary map; used for controls.
pub struct MapPencil<'a, T, F> {
    target: &'a T,
    dim: usize,
    map: F,
}

impl<'a, T, F> MapPencil<'a, T, F>
where
    T: TargetSpace,
    F: Fn(&[f64], f64) -> Result<T::Point> + Sync,
{
    pub fn new(target: &'a T, dim: usize, map: F) -> Self {
        MapPencil { target, dim, map }
    }
}

/// The constant map onto `point`.
pub fn constant_pencil<T: TargetSpace>(
    target: &T,
    dim: usize,
    point: T::Point,
) -> MapPencil<'_, T, impl Fn(&[f64], f64) -> Result<T::Point> + Sync> {
    MapPencil::new(target, dim, move |_, _| Ok(point.clone()))
}

impl<T, F> Pencil for MapPencil<'_, T, F>
where
    T: TargetSpace,
    F: Fn(&[f64], f64) -> Result<T::Point> + Sync,
{
    type Target = T;

    fn target(&self) -> &T {
        self.target
    }

    fn domain_dim(&self) -> usize {
        self.dim
    }

    fn at(&self, x: &[f64], t: f64) -> Result<T::Point> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        (self.map)(x, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::exact_hyperbolic_target;
    use crate::warped::{HullPiece, LatticeSpec, Region};
    use approx::assert_relative_eq;

    #[test]
    fn coordinate_pencil_pads_with_zeros() {
        let h3 = exact_hyperbolic_target(3).unwrap();
        let f = CoordinatePencil::new(h3, 2).unwrap();
        assert_eq!(f.at(&[1.5], -2.0).unwrap(), HPoint::new(vec![1.5, 0.0], -2.0).unwrap());
        assert!(f.at(&[1.0, 2.0], 0.0).is_err());
        assert!(CoordinatePencil::new(h3, 4).is_err());
        assert!(CoordinatePencil::new(h3, 1).is_err());
    }

    #[test]
    fn vertical_images_are_unit_speed() {
        let h2 = exact_hyperbolic_target(2).unwrap();
        let f = CoordinatePencil::new(h2, 2).unwrap();
        let g = f.vertical_image(&[0.3], -1.0, 2.0, 0.5).unwrap();
        assert!(g.is_exact());
        assert_eq!(g.len(), 7);
        let d = h2.distance(g.first(), g.last()).unwrap();
        assert_relative_eq!(d, g.length(), epsilon = 1e-12);
    }

    #[test]
    fn leaf_pencil_columns_are_nearly_unit_speed() {
        let piece = HullPiece::new(-1.0, 1.0, -2.0, 2.0).unwrap();
        let model = WarpedModel::plane(LatticeSpec::new(0.05, 1, vec![Region::Hull(piece)])).unwrap();
        let f = LeafPencil::new(&model);
        let g = f.vertical_image(&[1.0], -1.5, 1.5, 0.05).unwrap();
        let d = model.distance(g.first(), g.last()).unwrap();
        assert!((d - g.length()).abs() <= 2.0 * 0.05, "{d} vs {}", g.length());
        assert!(f.at(&[5.0], 0.0).is_err());
    }

    #[test]
    fn constant_pencil_ignores_input() {
        let h2 = exact_hyperbolic_target(2).unwrap();
        let p = HPoint::planar(0.0, 0.0);
        let f = constant_pencil(&h2, 1, p.clone());
        assert_eq!(f.at(&[7.0], 3.0).unwrap(), p);
        assert!(f.vertical_image(&[0.0], 0.0, 1.0, 0.1).unwrap().len() == 1);
    }
}
