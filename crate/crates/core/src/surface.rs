//! Square-tiled (origami) surfaces: unit squares glued by two permutations,
//! their cone points, and straight-line flow on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Corners of a unit square, listed counter-clockwise from the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Corner {
    LowerLeft,
    LowerRight,
    UpperRight,
    UpperLeft,
}

impl Corner {
    pub const ALL: [Corner; 4] = [
        Corner::LowerLeft,
        Corner::LowerRight,
        Corner::UpperRight,
        Corner::UpperLeft,
    ];

    fn index(self) -> usize {
        self as usize
    }

    /// Offset of the corner from the square's lower-left corner.
    pub fn offset(self) -> (f64, f64) {
        match self {
            Corner::LowerLeft => (0.0, 0.0),
            Corner::LowerRight => (1.0, 0.0),
            Corner::UpperRight => (1.0, 1.0),
            Corner::UpperLeft => (0.0, 1.0),
        }
    }
}

/// A corner orbit with its link: the squares around it in counter-clockwise
/// order. The total angle is `angle_multiple · 2π`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceVertex {
    pub link: Vec<(usize, Corner)>,
}

impl SurfaceVertex {
    pub fn angle_multiple(&self) -> usize {
        self.link.len() / 4
    }

    pub fn is_cone_point(&self) -> bool {
        self.angle_multiple() > 1
    }
}

/// Gluing data as it appears in scene files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GluingSpec {
    pub squares: usize,
    pub right_glue: Vec<usize>,
    pub top_glue: Vec<usize>,
}

/// A point of the surface: square index and coordinates in `[0, 1]²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub square: usize,
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SquareTiledSurface {
    right: Vec<usize>,
    top: Vec<usize>,
    left: Vec<usize>,
    bottom: Vec<usize>,
    vertices: Vec<SurfaceVertex>,
    /// For each square and corner: (vertex index, position in its link).
    corner_slots: Vec<[(usize, usize); 4]>,
}

fn inverse(perm: &[usize]) -> Result<Vec<usize>> {
    let mut inv = vec![usize::MAX; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        if p >= perm.len() || inv[p] != usize::MAX {
            return Err(Error::invalid(format!("{perm:?} is not a permutation")));
        }
        inv[p] = i;
    }
    Ok(inv)
}

impl SquareTiledSurface {
    /// `right[s]` is the square glued to the right side of `s`, `top[s]` the
    /// one glued above it.
    pub fn new(right: Vec<usize>, top: Vec<usize>) -> Result<Self> {
        let n = right.len();
        if n == 0 || top.len() != n {
            return Err(Error::invalid("gluings must be permutations of the same nonzero size"));
        }
        let left = inverse(&right)?;
        let bottom = inverse(&top)?;
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(s) = stack.pop() {
            for t in [right[s], top[s], left[s], bottom[s]] {
                if !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        if seen.contains(&false) {
            return Err(Error::invalid("gluings do not give a connected surface"));
        }
        let mut surface = SquareTiledSurface {
            right,
            top,
            left,
            bottom,
            vertices: Vec::new(),
            corner_slots: vec![[(usize::MAX, 0); 4]; n],
        };
        surface.build_links();
        Ok(surface)
    }

    pub fn from_spec(spec: &GluingSpec) -> Result<Self> {
        if spec.right_glue.len() != spec.squares || spec.top_glue.len() != spec.squares {
            return Err(Error::invalid("gluing lists must have one entry per square"));
        }
        SquareTiledSurface::new(spec.right_glue.clone(), spec.top_glue.clone())
    }

    pub fn to_spec(&self) -> GluingSpec {
        GluingSpec {
            squares: self.num_squares(),
            right_glue: self.right.clone(),
            top_glue: self.top.clone(),
        }
    }

    /// Staircase of `n` squares: square `2i+1` sits right of `2i`, square
    /// `2i+2` above `2i+1`; rows and columns close up into cylinders.
    pub fn staircase(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("staircase needs at least one square"));
        }
        let mut right: Vec<usize> = (0..n).collect();
        let mut top: Vec<usize> = (0..n).collect();
        let mut s = 0;
        while s + 1 < n {
            right.swap(s, s + 1);
            s += 2;
        }
        let mut s = 1;
        while s + 1 < n {
            top.swap(s, s + 1);
            s += 2;
        }
        SquareTiledSurface::new(right, top)
    }

    pub fn num_squares(&self) -> usize {
        self.right.len()
    }

    pub fn right_of(&self, s: usize) -> usize {
        self.right[s]
    }

    pub fn top_of(&self, s: usize) -> usize {
        self.top[s]
    }

    pub fn left_of(&self, s: usize) -> usize {
        self.left[s]
    }

    pub fn bottom_of(&self, s: usize) -> usize {
        self.bottom[s]
    }

    fn build_links(&mut self) {
        let n = self.num_squares();
        for s0 in 0..n {
            for c0 in Corner::ALL {
                if self.corner_slots[s0][c0.index()].0 != usize::MAX {
                    continue;
                }
                let id = self.vertices.len();
                let mut link = Vec::new();
                let (mut s, mut c) = (s0, c0);
                loop {
                    self.corner_slots[s][c.index()] = (id, link.len());
                    link.push((s, c));
                    // counter-clockwise step to the next quadrant around the vertex
                    (s, c) = match c {
                        Corner::LowerLeft => (self.left[s], Corner::LowerRight),
                        Corner::LowerRight => (self.bottom[s], Corner::UpperRight),
                        Corner::UpperRight => (self.right[s], Corner::UpperLeft),
                        Corner::UpperLeft => (self.top[s], Corner::LowerLeft),
                    };
                    if (s, c) == (s0, c0) {
                        break;
                    }
                }
                self.vertices.push(SurfaceVertex { link });
            }
        }
    }

    pub fn vertices(&self) -> &[SurfaceVertex] {
        &self.vertices
    }

    /// Vertex index at a corner of a square.
    pub fn corner_vertex(&self, square: usize, corner: Corner) -> usize {
        self.corner_slots[square][corner.index()].0
    }

    pub fn cone_points(&self) -> Vec<usize> {
        (0..self.vertices.len())
            .filter(|&v| self.vertices[v].is_cone_point())
            .collect()
    }

    /// Euler characteristic from the cell structure: vertices counted as
    /// classes of corners under the side gluings.
    pub fn euler_characteristic(&self) -> i64 {
        let n = self.num_squares();
        let mut parent: Vec<usize> = (0..4 * n).collect();
        fn find(parent: &mut [usize], mut a: usize) -> usize {
            while parent[a] != a {
                parent[a] = parent[parent[a]];
                a = parent[a];
            }
            a
        }
        let mut union = |a: usize, b: usize| {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        };
        let slot = |s: usize, c: Corner| 4 * s + c.index();
        for s in 0..n {
            let r = self.right[s];
            union(slot(s, Corner::LowerRight), slot(r, Corner::LowerLeft));
            union(slot(s, Corner::UpperRight), slot(r, Corner::UpperLeft));
            let t = self.top[s];
            union(slot(s, Corner::UpperLeft), slot(t, Corner::LowerLeft));
            union(slot(s, Corner::UpperRight), slot(t, Corner::LowerRight));
        }
        let vertices = (0..4 * n).filter(|&a| find(&mut parent, a) == a).count() as i64;
        let edges = 2 * n as i64;
        let faces = n as i64;
        vertices - edges + faces
    }

    pub fn genus(&self) -> Result<usize> {
        let chi = self.euler_characteristic();
        if chi > 2 || chi % 2 != 0 {
            return Err(Error::invalid(format!("Euler characteristic {chi} is not that of a closed orientable surface")));
        }
        Ok(((2 - chi) / 2) as usize)
    }

    /// Checks Σ(angle − 2π) = 2π(2g − 2), in units of 2π and integer arithmetic.
    pub fn check_gauss_bonnet(&self) -> Result<()> {
        let genus = self.genus()? as i64;
        let excess: i64 = self
            .vertices
            .iter()
            .map(|v| v.angle_multiple() as i64 - 1)
            .sum();
        if excess == 2 * genus - 2 {
            Ok(())
        } else {
            Err(Error::Certification(format!(
                "cone angle excess {excess}·2π differs from 2π(2g − 2) with g = {genus}"
            )))
        }
    }

    /// Follows the straight line from `start` in direction `dir` (any nonzero
    /// vector) for Euclidean length `length`.
    ///
    /// Passing exactly through a cone point is an error; regular vertices are
    /// crossed diagonally.
    pub fn flow(&self, start: SurfacePoint, dir: (f64, f64), length: f64) -> Result<SurfacePoint> {
        let norm = dir.0.hypot(dir.1);
        if !(norm > 0.0) || !(length >= 0.0) {
            return Err(Error::invalid("flow needs a nonzero direction and nonnegative length"));
        }
        let (dx, dy) = (dir.0 / norm, dir.1 / norm);
        let SurfacePoint { mut square, mut u, mut v } = start;
        let mut left = length;
        const EPS: f64 = 1e-13;
        loop {
            let tx = if dx > 0.0 {
                (1.0 - u) / dx
            } else if dx < 0.0 {
                -u / dx
            } else {
                f64::INFINITY
            };
            let ty = if dy > 0.0 {
                (1.0 - v) / dy
            } else if dy < 0.0 {
                -v / dy
            } else {
                f64::INFINITY
            };
            let step = tx.min(ty);
            if step >= left {
                return Ok(SurfacePoint {
                    square,
                    u: u + dx * left,
                    v: v + dy * left,
                });
            }
            left -= step;
            u += dx * step;
            v += dy * step;
            let cross_x = tx - step <= EPS;
            let cross_y = ty - step <= EPS;
            if cross_x && cross_y {
                let corner = match (dx > 0.0, dy > 0.0) {
                    (true, true) => Corner::UpperRight,
                    (false, true) => Corner::UpperLeft,
                    (false, false) => Corner::LowerLeft,
                    (true, false) => Corner::LowerRight,
                };
                if self.vertices[self.corner_vertex(square, corner)].is_cone_point() {
                    return Err(Error::OutOfRange(format!(
                        "straight line through square {square} hits a cone point"
                    )));
                }
            }
            if cross_x {
                if dx > 0.0 {
                    square = self.right[square];
                    u = 0.0;
                } else {
                    square = self.left[square];
                    u = 1.0;
                }
            }
            if cross_y {
                if dy > 0.0 {
                    square = self.top[square];
                    v = 0.0;
                } else {
                    square = self.bottom[square];
                    v = 1.0;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_has_no_cone_points() {
        let t = SquareTiledSurface::new(vec![0], vec![0]).unwrap();
        assert_eq!(t.vertices().len(), 1);
        assert_eq!(t.vertices()[0].angle_multiple(), 1);
        assert_eq!(t.genus().unwrap(), 1);
        t.check_gauss_bonnet().unwrap();
    }

    #[test]
    fn two_square_staircase_is_a_torus() {
        let s = SquareTiledSurface::staircase(2).unwrap();
        assert_eq!(s.genus().unwrap(), 1);
        assert!(s.cone_points().is_empty());
        s.check_gauss_bonnet().unwrap();
    }

    #[test]
    fn three_square_staircase_has_one_six_pi_point() {
        let s = SquareTiledSurface::staircase(3).unwrap();
        assert_eq!(s.genus().unwrap(), 2);
        let cones = s.cone_points();
        assert_eq!(cones.len(), 1);
        assert_eq!(s.vertices()[cones[0]].angle_multiple(), 3);
        s.check_gauss_bonnet().unwrap();
    }

    #[test]
    fn rejects_bad_gluings() {
        assert!(SquareTiledSurface::new(vec![0, 0], vec![0, 1]).is_err());
        assert!(SquareTiledSurface::new(vec![0, 1], vec![0, 1]).is_err());
        assert!(SquareTiledSurface::new(vec![0], vec![0, 1]).is_err());
    }

    #[test]
    fn link_walks_every_corner_once() {
        let s = SquareTiledSurface::staircase(5).unwrap();
        let total: usize = s.vertices().iter().map(|v| v.link.len()).sum();
        assert_eq!(total, 4 * 5);
        for sq in 0..5 {
            for c in Corner::ALL {
                let v = s.corner_vertex(sq, c);
                assert!(s.vertices()[v].link.contains(&(sq, c)));
            }
        }
    }

    #[test]
    fn flow_wraps_around_torus() {
        let t = SquareTiledSurface::new(vec![0], vec![0]).unwrap();
        let start = SurfacePoint { square: 0, u: 0.25, v: 0.5 };
        let end = t.flow(start, (1.0, 0.0), 3.5).unwrap();
        assert!((end.u - 0.75).abs() < 1e-12 && (end.v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn flow_changes_squares() {
        let s = SquareTiledSurface::staircase(3).unwrap();
        let start = SurfacePoint { square: 0, u: 0.5, v: 0.5 };
        let end = s.flow(start, (1.0, 0.0), 1.0).unwrap();
        assert_eq!(end.square, 1);
        let end = s.flow(end, (0.0, 1.0), 1.0).unwrap();
        assert_eq!(end.square, 2);
        let back = s.flow(end, (-1.0, -1.0), 2f64.sqrt() * 0.25).unwrap();
        assert_eq!(back.square, 2);
        assert!((back.u - 0.25).abs() < 1e-12);
    }

    #[test]
    fn flow_into_cone_point_is_rejected() {
        let s = SquareTiledSurface::staircase(3).unwrap();
        let cone = s.cone_points()[0];
        let (sq, c) = s.vertices()[cone].link[0];
        let (cu, cv) = c.offset();
        let start = SurfacePoint { square: sq, u: 0.5, v: 0.5 };
        let r = s.flow(start, (cu - 0.5, cv - 0.5), 1.0);
        assert!(r.is_err());
    }
}
