use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::slim::triangle_sides;
use super::TriangleGrid;
use crate::error::{Error, Result};
use crate::pencil::Pencil;
use crate::space::TargetSpace;

/// Displaced height of one grid triangle and the two claim checks on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleReport {
    pub separation: f64,
    pub midpoint_height: f64,
    pub displaced_height: f64,
    /// `d(F(x, h_T), F(x′, h_T))`.
    pub gap_at_height: f64,
    /// `h_T ≤ t(r)`.
    pub below_midpoint: bool,
    /// `d(F(x, h_T), F(x′, h_T)) ≤ 3Δ`.
    pub slim_above: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct C0Estimate {
    pub c0: f64,
    pub witness: TriangleReport,
    pub triangles: Vec<TriangleReport>,
}

/// `h_T`: the least height at which `F(x, t)` comes within `Δ` of the image of
/// the other vertical side, or `F(x′, t)` within `Δ` of the first. Scanned
/// upward from the bottom of the truncated sides every `grid.step`, then
/// bisected to `tol`.
pub fn displaced_height<F: Pencil>(
    pencil: &F,
    grid: &TriangleGrid,
    separation: f64,
    big_delta: f64,
    tol: f64,
) -> Result<TriangleReport> {
    let sides = triangle_sides(pencil, grid, &grid.depth, separation)?;
    let target = pencil.target();
    let near_p = target.proximity(&sides.p)?;
    let near_q = target.proximity(&sides.q)?;
    let close = |t: f64| -> Result<bool> {
        Ok(near_q(&pencil.at(&sides.x, t)?)? <= big_delta || near_p(&pencil.at(&sides.x_prime, t)?)? <= big_delta)
    };

    if close(sides.bottom)? {
        return Err(Error::OutOfRange(format!(
            "sides are already within Delta = {big_delta} at the bottom t = {} of the triangle with separation {separation}",
            sides.bottom
        )));
    }
    let mut lo = sides.bottom;
    let mut hi = None;
    let mut t = sides.bottom;
    while t < sides.top {
        t = (t + grid.step).min(sides.top);
        if close(t)? {
            hi = Some(t);
            break;
        }
        lo = t;
    }
    let mut hi = hi.ok_or_else(|| {
        Error::OutOfRange(format!(
            "sides never come within Delta = {big_delta} below t = {} (separation {separation})",
            sides.top
        ))
    })?;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if close(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    let gap = target.distance(&pencil.at(&sides.x, hi)?, &pencil.at(&sides.x_prime, hi)?)?;
    let slack = target.tolerance();
    Ok(TriangleReport {
        separation,
        midpoint_height: sides.midpoint_height,
        displaced_height: hi,
        gap_at_height: gap,
        below_midpoint: hi <= sides.midpoint_height + tol + slack,
        slim_above: gap <= 3.0 * big_delta + slack,
    })
}

/// `C₀ = max (t(r) − h_T)` over the triangle grid.
pub fn estimate_c0<F: Pencil>(pencil: &F, grid: &TriangleGrid, big_delta: f64, tol: f64) -> Result<C0Estimate> {
    let triangles: Vec<TriangleReport> = grid
        .separations
        .par_iter()
        .map(|&s| displaced_height(pencil, grid, s, big_delta, tol))
        .collect::<Result<_>>()?;
    let mut witness = triangles[0].clone();
    for tri in &triangles[1..] {
        if tri.midpoint_height - tri.displaced_height > witness.midpoint_height - witness.displaced_height {
            witness = tri.clone();
        }
    }
    Ok(C0Estimate {
        c0: witness.midpoint_height - witness.displaced_height,
        witness,
        triangles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certifier::CertifierConfig;
    use crate::pencil::CoordinatePencil;
    use crate::space::exact_hyperbolic_target;

    #[test]
    fn identity_height_matches_closed_form() {
        // In ℍ² the distance from (x, t) to the line over x′ is asinh(e^{-t}|x − x′|).
        let h2 = exact_hyperbolic_target(2).unwrap();
        let f = CoordinatePencil::new(h2, 2).unwrap();
        let grid = CertifierConfig::exact_defaults().triangles;
        let big_delta = 2.9;
        for s in [0.01, 1.0, 15.0] {
            let rep = displaced_height(&f, &grid, s, big_delta, 1e-4).unwrap();
            let expected = (s / big_delta.sinh()).ln();
            assert!((rep.displaced_height - expected).abs() < 2e-4, "{s}: {rep:?}");
            assert!(rep.below_midpoint && rep.slim_above);
        }
    }

    #[test]
    fn identity_c0_is_separation_free() {
        let h2 = exact_hyperbolic_target(2).unwrap();
        let f = CoordinatePencil::new(h2, 2).unwrap();
        let mut grid = CertifierConfig::exact_defaults().triangles;
        grid.separations = vec![0.1, 2.0];
        let est = estimate_c0(&f, &grid, 2.9, 1e-4).unwrap();
        let expected = (2.9f64.sinh() / 2.0).ln();
        assert!((est.c0 - expected).abs() < 2e-4, "{}", est.c0);
    }

    #[test]
    fn shallow_triangles_are_rejected() {
        let h2 = exact_hyperbolic_target(2).unwrap();
        let f = CoordinatePencil::new(h2, 2).unwrap();
        let mut grid = CertifierConfig::exact_defaults().triangles;
        grid.depth = super::super::Depth::BelowMidpoint { d: 0.5 };
        assert!(matches!(
            displaced_height(&f, &grid, 1.0, 2.9, 1e-3),
            Err(Error::OutOfRange(_))
        ));
    }
}
