use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Depth, TriangleGrid};
use crate::error::Result;
use crate::hyperbolic::midpoint_height;
use crate::pencil::{Pencil, PointOf};
use crate::space::{SampledGeodesic, TargetSpace};

const MAX_THIRD_SIDE_SAMPLES: usize = 100_000;

/// `x` and `x + s·e₁` in `ℝ^{dim}`.
pub(super) fn pair_at(base_x: f64, dim: usize, s: f64) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; dim];
    x[0] = base_x;
    let mut x2 = x.clone();
    x2[0] += s;
    (x, x2)
}

/// Images of the three sides of a truncated vertical triangle.
pub struct TriangleSides<P> {
    pub x: Vec<f64>,
    pub x_prime: Vec<f64>,
    pub midpoint_height: f64,
    pub bottom: f64,
    pub top: f64,
    pub p: SampledGeodesic<P>,
    pub q: SampledGeodesic<P>,
    pub r: SampledGeodesic<P>,
}

/// `P = F(η_x)`, `Q = F(η_x′)` on `[bottom, t(r) + top_margin]` and `R` the
/// target geodesic between their lower ends.
pub fn triangle_sides<F: Pencil>(
    pencil: &F,
    grid: &TriangleGrid,
    depth: &Depth,
    separation: f64,
) -> Result<TriangleSides<PointOf<F>>> {
    let (x, x_prime) = pair_at(grid.base_x, pencil.domain_dim(), separation);
    let tr = midpoint_height(&x, &x_prime)?;
    let bottom = depth.bottom(tr);
    let top = tr + grid.top_margin;
    let p = pencil.vertical_image(&x, bottom, top, grid.step)?;
    let q = pencil.vertical_image(&x_prime, bottom, top, grid.step)?;
    let samples = grid.third_side_samples.min(MAX_THIRD_SIDE_SAMPLES);
    let r = pencil.target().geodesic(p.first(), q.first(), samples)?;
    Ok(TriangleSides {
        x,
        x_prime,
        midpoint_height: tr,
        bottom,
        top,
        p,
        q,
        r,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaWitness {
    pub separation: f64,
    /// Which side (`"P"`, `"Q"` or `"R"`) carries the farthest point.
    pub side: String,
    /// Arc parameter of that point along its side.
    pub param: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaEstimate {
    pub delta: f64,
    pub per_triangle: Vec<f64>,
    pub witness: DeltaWitness,
}

fn slimness<F: Pencil>(pencil: &F, sides: &TriangleSides<PointOf<F>>, separation: f64) -> Result<DeltaWitness> {
    let target = pencil.target();
    let all = [(&sides.p, "P"), (&sides.q, "Q"), (&sides.r, "R")];
    let fields = [
        target.proximity(&sides.p)?,
        target.proximity(&sides.q)?,
        target.proximity(&sides.r)?,
    ];
    let mut best = DeltaWitness {
        separation,
        side: "P".into(),
        param: 0.0,
        distance: 0.0,
    };
    for (i, (side, name)) in all.iter().enumerate() {
        for (pt, &param) in side.points().iter().zip(side.params()) {
            let mut d = f64::INFINITY;
            for (j, field) in fields.iter().enumerate() {
                if j != i {
                    d = d.min(field(pt)?);
                }
            }
            if d > best.distance {
                best = DeltaWitness {
                    separation,
                    side: (*name).into(),
                    param,
                    distance: d,
                };
            }
        }
    }
    Ok(best)
}

/// `δ`: the largest distance from a point of one side of a truncated
/// vertical triangle to the union of the other two, over the grid.
pub fn estimate_delta<F: Pencil>(pencil: &F, grid: &TriangleGrid) -> Result<DeltaEstimate> {
    let per: Vec<DeltaWitness> = grid
        .separations
        .par_iter()
        .map(|&s| {
            let sides = triangle_sides(pencil, grid, &grid.depth, s)?;
            slimness(pencil, &sides, s)
        })
        .collect::<Result<_>>()?;
    let mut witness = per[0].clone();
    for w in &per[1..] {
        if w.distance > witness.distance {
            witness = w.clone();
        }
    }
    Ok(DeltaEstimate {
        delta: witness.distance,
        per_triangle: per.iter().map(|w| w.distance).collect(),
        witness,
    })
}

/// Change in the slimness of the witness triangle when truncated 2 units higher.
pub(super) fn truncation_residual<F: Pencil>(pencil: &F, grid: &TriangleGrid, witness: &DeltaWitness) -> Result<f64> {
    let shallower = grid.depth.shallower(2.0);
    let sides = triangle_sides(pencil, grid, &shallower, witness.separation)?;
    Ok((slimness(pencil, &sides, witness.separation)?.distance - witness.distance).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certifier::CertifierConfig;
    use crate::pencil::{constant_pencil, CoordinatePencil};
    use crate::space::exact_hyperbolic_target;
    use crate::hyperbolic::HPoint;

    fn coarse(mut grid: TriangleGrid) -> TriangleGrid {
        grid.separations = vec![0.01, 1.0, 10.0];
        grid.step = 0.05;
        grid.third_side_samples = 801;
        grid
    }

    #[test]
    fn identity_triangles_are_ideal_slim() {
        let h2 = exact_hyperbolic_target(2).unwrap();
        let f = CoordinatePencil::new(h2, 2).unwrap();
        let grid = coarse(CertifierConfig::exact_defaults().triangles);
        let est = estimate_delta(&f, &grid).unwrap();
        let ideal = (1.0 + 2f64.sqrt()).ln();
        for d in &est.per_triangle {
            assert!((d - ideal).abs() < 0.02, "{d}");
        }
    }

    #[test]
    fn constant_map_has_zero_slimness() {
        let h2 = exact_hyperbolic_target(2).unwrap();
        let f = constant_pencil(&h2, 1, HPoint::planar(0.0, 0.0));
        let grid = coarse(CertifierConfig::exact_defaults().triangles);
        assert_eq!(estimate_delta(&f, &grid).unwrap().delta, 0.0);
    }

    #[test]
    fn sides_span_the_requested_heights() {
        let h2 = exact_hyperbolic_target(2).unwrap();
        let f = CoordinatePencil::new(h2, 2).unwrap();
        let grid = coarse(CertifierConfig::exact_defaults().triangles);
        let sides = triangle_sides(&f, &grid, &grid.depth, 2.0).unwrap();
        assert_eq!(sides.midpoint_height, 0.0);
        assert_eq!(sides.p.first().t, -20.0);
        assert_eq!(sides.q.last().t, 6.0);
        assert_eq!(sides.r.first(), sides.p.first());
    }
}
