//! Warped products `e^{-2t}·(flat base) + dt²` discretized as stacks of
//! lattices, over a Euclidean base or over a patch of the universal cover of a
//! square-tiled surface.
//!
//! Layer `k` sits at height `t = k·h` and carries a square lattice of spacing
//! `h·e^t` in leaf-aligned coordinates `(u1, u2)`: `u1` runs along the leaf,
//! `u2` across it. Two vertices at most `m` layers apart are joined when the
//! midpoint-metric length of the straight segment between them is at most
//! `m·h`; the edge weight is the exact local geodesic length.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperbolic::{dist_from_gap2, HPoint};
use crate::mesh::{AdjacencyBuilder, MeshSpace, VertexId};
use crate::space::{Proximity, SampledGeodesic, TargetSpace};
use crate::surface::{Corner, SquareTiledSurface, SurfacePoint};

pub const DEFAULT_THICKENING: f64 = 0.2;

/// Stencil radius in lattice steps used when none is given.
pub fn default_stencil(resolution: f64) -> usize {
    4.max((0.1 / resolution).ceil() as usize)
}

/// Convex hull of two vertical geodesic segments `x = x_lo`, `x = x_hi`
/// between heights `t_bottom` and `t_top`: the region between them above the
/// geodesic through the two bottom endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HullPiece {
    pub x_lo: f64,
    pub x_hi: f64,
    pub t_bottom: f64,
    pub t_top: f64,
}

impl HullPiece {
    pub fn new(x_lo: f64, x_hi: f64, t_bottom: f64, t_top: f64) -> Result<Self> {
        let finite = [x_lo, x_hi, t_bottom, t_top].iter().all(|v| v.is_finite());
        if !finite || x_lo >= x_hi || t_bottom >= t_top {
            return Err(Error::invalid(format!(
                "degenerate hull piece x ∈ [{x_lo}, {x_hi}], t ∈ [{t_bottom}, {t_top}]"
            )));
        }
        Ok(HullPiece { x_lo, x_hi, t_bottom, t_top })
    }

    /// Whether a point lies in the hull thickened by about `mu`: it must be
    /// within `mu` of each bounding geodesic's inner side, and of the plane
    /// `u2 = 0` (`cross = |u2|`).
    fn contains(&self, u1: f64, cross: f64, t: f64, mu: f64, sinh_mu: f64) -> bool {
        if t > self.t_top + mu || t < self.t_bottom - mu {
            return false;
        }
        let y = t.exp();
        if cross > sinh_mu * y {
            return false;
        }
        let c = 0.5 * (self.x_lo + self.x_hi);
        let half = 0.5 * (self.x_hi - self.x_lo);
        let dx = (u1 - c).abs();
        if dx - half > sinh_mu * y {
            return false;
        }
        let yb = self.t_bottom.exp();
        let rho2 = half * half + yb * yb;
        let r2 = dx * dx + y * y;
        r2 >= rho2 || rho2 - r2 <= 2.0 * rho2.sqrt() * y * sinh_mu
    }

    /// Whether a point lies in the closed hull itself.
    pub fn contains_exactly(&self, x: f64, t: f64) -> bool {
        let yb = self.t_bottom.exp();
        let c = 0.5 * (self.x_lo + self.x_hi);
        let half = 0.5 * (self.x_hi - self.x_lo);
        x >= self.x_lo
            && x <= self.x_hi
            && t <= self.t_top
            && (x - c).powi(2) + (2.0 * t).exp() >= half * half + yb * yb
    }
}

/// A piece of mesh domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    /// `|u1|, |u2| ≤ half_width`, `t_min ≤ t ≤ t_max`.
    Box { half_width: f64, t_min: f64, t_max: f64 },
    Hull(HullPiece),
}

impl Region {
    fn validate(&self) -> Result<()> {
        match *self {
            Region::Box { half_width, t_min, t_max } => {
                if !(half_width > 0.0 && t_min < t_max && t_min.is_finite() && t_max.is_finite()) {
                    return Err(Error::invalid(format!(
                        "degenerate box: half width {half_width}, t ∈ [{t_min}, {t_max}]"
                    )));
                }
                Ok(())
            }
            Region::Hull(p) => HullPiece::new(p.x_lo, p.x_hi, p.t_bottom, p.t_top).map(|_| ()),
        }
    }

    fn contains(&self, u1: f64, cross: f64, t: f64, mu: f64, sinh_mu: f64) -> bool {
        match *self {
            Region::Box { half_width, t_min, t_max } => {
                t >= t_min && t <= t_max && u1.abs() <= half_width && cross <= half_width
            }
            Region::Hull(p) => p.contains(u1, cross, t, mu, sinh_mu),
        }
    }

    fn t_bounds(&self, mu: f64) -> (f64, f64) {
        match *self {
            Region::Box { t_min, t_max, .. } => (t_min, t_max),
            Region::Hull(p) => (p.t_bottom - mu, p.t_top + mu),
        }
    }

    fn u1_bounds(&self, t: f64, sinh_mu: f64) -> (f64, f64) {
        match *self {
            Region::Box { half_width, .. } => (-half_width, half_width),
            Region::Hull(p) => {
                let w = sinh_mu * t.exp();
                (p.x_lo - w, p.x_hi + w)
            }
        }
    }

    /// Up to two `u1` intervals covering the region at height `t`.
    fn u1_spans(&self, t: f64, mu: f64, sinh_mu: f64) -> [Option<(f64, f64)>; 2] {
        let (lo, hi) = self.t_bounds(mu);
        if t < lo || t > hi {
            return [None, None];
        }
        let (a, b) = self.u1_bounds(t, sinh_mu);
        let Region::Hull(p) = *self else {
            return [Some((a, b)), None];
        };
        let y = t.exp();
        let c = 0.5 * (p.x_lo + p.x_hi);
        let half = 0.5 * (p.x_hi - p.x_lo);
        let yb = p.t_bottom.exp();
        let rho2 = half * half + yb * yb;
        let hole2 = rho2 - 2.0 * rho2.sqrt() * y * sinh_mu - y * y;
        if hole2 <= 0.0 {
            return [Some((a, b)), None];
        }
        // Shrink the hole slightly so rounding never drops a boundary vertex.
        let hole = hole2.sqrt() * (1.0 - 1e-9);
        [Some((a, c - hole)), Some((c + hole, b))]
    }

    fn cross_bound(&self, t: f64, sinh_mu: f64) -> f64 {
        match *self {
            Region::Box { half_width, .. } => half_width,
            Region::Hull(_) => sinh_mu * t.exp(),
        }
    }
}

/// Discretization parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    pub resolution: f64,
    /// Stencil radius in lattice steps.
    pub stencil: usize,
    /// Hyperbolic thickening of hull pieces.
    pub thickening: f64,
    /// 1: the vertical plane over the leaf only; 2: the full warped product.
    pub base_dim: usize,
    /// Largest flat distance from the leaf kept in the mesh.
    pub width_cap: f64,
    pub regions: Vec<Region>,
}

impl LatticeSpec {
    pub fn new(resolution: f64, base_dim: usize, regions: Vec<Region>) -> Self {
        LatticeSpec {
            resolution,
            stencil: default_stencil(resolution),
            thickening: DEFAULT_THICKENING,
            base_dim,
            width_cap: f64::INFINITY,
            regions,
        }
    }

    pub fn with_stencil(mut self, stencil: usize) -> Self {
        self.stencil = stencil;
        self
    }

    pub fn with_thickening(mut self, mu: f64) -> Self {
        self.thickening = mu;
        self
    }

    pub fn with_width_cap(mut self, width: f64) -> Self {
        self.width_cap = width;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(Error::invalid(format!("resolution {} must be positive", self.resolution)));
        }
        if self.stencil == 0 {
            return Err(Error::invalid("stencil radius must be at least 1"));
        }
        if !(self.thickening > 0.0) {
            return Err(Error::invalid("thickening must be positive"));
        }
        if self.base_dim != 1 && self.base_dim != 2 {
            return Err(Error::invalid(format!("base dimension {} not in {{1, 2}}", self.base_dim)));
        }
        if !(self.width_cap > 0.0) {
            return Err(Error::invalid("width cap must be positive"));
        }
        if self.regions.is_empty() {
            return Err(Error::invalid("mesh domain has no regions"));
        }
        self.regions.iter().try_for_each(Region::validate)
    }
}

/// A cone point of the unfolded patch, in leaf-aligned developed coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeSite {
    pub u1: f64,
    pub u2: f64,
    /// Total angle in units of 2π.
    pub angle_multiple: usize,
    /// Sheets unfolded around the point (at most `angle_multiple`).
    pub sheets: usize,
}

impl ConeSite {
    pub fn distance_to_leaf(&self) -> f64 {
        self.u2.abs()
    }

    /// Angle of a developed point around the cone point, measured from the
    /// direction toward the leaf, in `(−π, π]`.
    fn angle_of(&self, u1: f64, u2: f64) -> f64 {
        let side = if self.u2 >= 0.0 { 1.0 } else { -1.0 };
        let (dx, dy) = (u1 - self.u1, u2 - self.u2);
        (side * dx).atan2(-side * dy)
    }
}

/// A straight leaf on a square-tiled surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leaf {
    pub slope: f64,
    pub basepoint: SurfacePoint,
}

impl Leaf {
    pub fn golden(basepoint: SurfacePoint) -> Self {
        Leaf {
            slope: (1.0 + 5f64.sqrt()) / 2.0,
            basepoint,
        }
    }

    fn frame(&self) -> ((f64, f64), (f64, f64)) {
        let norm = self.slope.hypot(1.0);
        let d = (1.0 / norm, self.slope / norm);
        (d, (-d.1, d.0))
    }
}

/// Cone points met by a strip around a leaf, found by developing the strip
/// into the plane.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverPatch {
    pub cones: Vec<ConeSite>,
    pub width: f64,
}

impl CoverPatch {
    /// Unfolds the strip of flat half-width `width ≤ 1` around the leaf
    /// segment `u1 ∈ [u1_lo, u1_hi]`. Cone points of angle `2πk` keep
    /// `min(k, sheets)` sheets.
    pub fn unfold(
        surface: &SquareTiledSurface,
        leaf: &Leaf,
        sheets: usize,
        (u1_lo, u1_hi): (f64, f64),
        width: f64,
    ) -> Result<Self> {
        if sheets == 0 {
            return Err(Error::invalid("sheets must be at least 1"));
        }
        if !(width > 0.0 && width <= 1.0) {
            return Err(Error::invalid(format!("strip half-width {width} must lie in (0, 1]")));
        }
        if !leaf.slope.is_finite() || leaf.basepoint.square >= surface.num_squares() {
            return Err(Error::invalid("leaf needs a finite slope and a basepoint on the surface"));
        }
        let (d, n) = leaf.frame();
        let b = (leaf.basepoint.u, leaf.basepoint.v);
        let (lo, hi) = (u1_lo - 1.0, u1_hi + 1.0);
        let corners = [(lo, -width), (lo, width), (hi, -width), (hi, width)]
            .map(|(a, c)| (b.0 + a * d.0 + c * n.0, b.1 + a * d.1 + c * n.1));
        let fold = |f: fn(f64, f64) -> f64, pick: fn(&(f64, f64)) -> f64| {
            corners.iter().map(pick).fold(corners.iter().map(pick).next().unwrap(), f)
        };
        let (x0, x1) = (fold(f64::min, |c| c.0).floor() as i64, fold(f64::max, |c| c.0).ceil() as i64);
        let (y0, y1) = (fold(f64::min, |c| c.1).floor() as i64, fold(f64::max, |c| c.1).ceil() as i64);
        let mut lattice = Vec::new();
        for a in x0..=x1 {
            for c in y0..=y1 {
                let w = (a as f64 - b.0, c as f64 - b.1);
                let u1 = w.0 * d.0 + w.1 * d.1;
                let u2 = w.0 * n.0 + w.1 * n.1;
                if u2.abs() <= width && u1 >= lo && u1 <= hi {
                    lattice.push((u1, u2));
                }
            }
        }
        lattice.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut cones = Vec::new();
        let mut at = 0.0;
        let mut foot = leaf.basepoint;
        for (u1, u2) in lattice {
            let dir = if u1 >= at { d } else { (-d.0, -d.1) };
            foot = surface.flow(foot, dir, (u1 - at).abs())?;
            at = u1;
            const SHORT: f64 = 1e-9;
            let side = if u2 >= 0.0 { n } else { (-n.0, -n.1) };
            if u2.abs() <= SHORT {
                // the leaf itself runs into this lattice point
                let probe = surface.flow(foot, (-d.0, -d.1), 1e-6)?;
                let end = surface.flow(probe, d, 1e-6 - SHORT)?;
                let v = surface.corner_vertex(end.square, nearest_corner(end));
                if surface.vertices()[v].is_cone_point() {
                    return Err(Error::invalid(format!(
                        "leaf passes through a cone point at leaf parameter {u1}"
                    )));
                }
                continue;
            }
            let end = surface.flow(foot, side, u2.abs() - SHORT)?;
            let v = surface.corner_vertex(end.square, nearest_corner(end));
            let k = surface.vertices()[v].angle_multiple();
            if k > 1 {
                cones.push(ConeSite {
                    u1,
                    u2,
                    angle_multiple: k,
                    sheets: k.min(sheets),
                });
            }
        }
        Ok(CoverPatch { cones, width })
    }
}

fn nearest_corner(p: SurfacePoint) -> Corner {
    match (p.u > 0.5, p.v > 0.5) {
        (false, false) => Corner::LowerLeft,
        (true, false) => Corner::LowerRight,
        (true, true) => Corner::UpperRight,
        (false, true) => Corner::UpperLeft,
    }
}

#[derive(Debug, Clone, Copy)]
struct Run {
    i_lo: i64,
    i_hi: i64,
    first: VertexId,
}

#[derive(Debug, Clone)]
struct Layer {
    t: f64,
    spacing: f64,
    j_max: i64,
    rows: Vec<Vec<Run>>,
}

impl Layer {
    fn row(&self, j: i64) -> &[Run] {
        if j.abs() > self.j_max {
            &[]
        } else {
            &self.rows[(j + self.j_max) as usize]
        }
    }

    fn lookup(&self, i: i64, j: i64) -> Option<VertexId> {
        let row = self.row(j);
        let pos = row.partition_point(|r| r.i_hi < i);
        row.get(pos)
            .filter(|r| r.i_lo <= i)
            .map(|r| r.first + (i - r.i_lo) as VertexId)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Node {
    Main,
    Branch { cone: u32, angle: f64 },
    Apex { cone: u32 },
}

impl Node {
    fn cone(&self) -> Option<u32> {
        match *self {
            Node::Main => None,
            Node::Branch { cone, .. } | Node::Apex { cone } => Some(cone),
        }
    }
}

/// Vertex data needed while joining edges.
#[derive(Debug, Clone, Copy)]
struct Site {
    node: Node,
    layer: usize,
    u1: f64,
    u2: f64,
}

/// A meshed warped product together with its lattice layout.
#[derive(Debug, Clone)]
pub struct WarpedModel {
    mesh: MeshSpace,
    spec: LatticeSpec,
    k_lo: i64,
    layers: Vec<Layer>,
    cones: Vec<ConeSite>,
    main_count: usize,
    flat: bool,
}

/// ℍ³ as the warped product over the Euclidean plane, meshed on
/// `[−x_max, x_max]² × [t_min, t_max]`.
pub fn warped_plane_target(t_min: f64, t_max: f64, x_max: f64, resolution: f64) -> Result<WarpedModel> {
    let region = Region::Box {
        half_width: x_max,
        t_min,
        t_max,
    };
    WarpedModel::plane(LatticeSpec::new(resolution, 2, vec![region]))
}

/// The warped product over a strip of the universal cover of `surface`
/// around `leaf`.
pub fn warped_cover_target(
    surface: &SquareTiledSurface,
    leaf: &Leaf,
    sheets: usize,
    spec: LatticeSpec,
) -> Result<WarpedModel> {
    spec.validate()?;
    if spec.base_dim != 2 {
        return Err(Error::invalid("a cover patch needs base dimension 2"));
    }
    if !spec.width_cap.is_finite() {
        return Err(Error::invalid("a cover patch needs a finite width cap"));
    }
    let sinh_mu = spec.thickening.sinh();
    let mut range = (f64::INFINITY, f64::NEG_INFINITY);
    for r in &spec.regions {
        let (lo, hi) = r.t_bounds(spec.thickening);
        for t in [lo, hi] {
            let (a, b) = r.u1_bounds(t, sinh_mu);
            range = (range.0.min(a), range.1.max(b));
        }
    }
    let patch = CoverPatch::unfold(surface, leaf, sheets, range, spec.width_cap)?;
    WarpedModel::build(spec, patch.cones, false)
}

fn segment_length(gap2: f64, ta: f64, tb: f64) -> f64 {
    let tm = 0.5 * (ta + tb);
    let dt = ta - tb;
    ((-2.0 * tm).exp() * gap2 + dt * dt).sqrt()
}

impl WarpedModel {
    /// Warped product over the Euclidean plane (`base_dim` 2) or the vertical
    /// plane over a line (`base_dim` 1), both with an exact hyperbolic oracle.
    pub fn plane(spec: LatticeSpec) -> Result<Self> {
        spec.validate()?;
        WarpedModel::build(spec, Vec::new(), true)
    }

    fn build(spec: LatticeSpec, mut cones: Vec<ConeSite>, flat: bool) -> Result<Self> {
        let h = spec.resolution;
        let mu = spec.thickening;
        let sinh_mu = mu.sinh();
        cones.sort_by(|a, b| a.u1.total_cmp(&b.u1));
        let (t_lo, t_hi) = spec
            .regions
            .iter()
            .map(|r| r.t_bounds(mu))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |a, b| (a.0.min(b.0), a.1.max(b.1)));
        let k_lo = (t_lo / h).floor() as i64;
        let k_hi = (t_hi / h).ceil() as i64;

        let inside = |u1: f64, cross: f64, t: f64| {
            cross <= spec.width_cap && spec.regions.iter().any(|r| r.contains(u1, cross, t, mu, sinh_mu))
        };

        let dim = spec.base_dim + 1;
        let mut coords: Vec<f64> = Vec::new();
        let mut sites: Vec<Site> = Vec::new();
        let mut layers = Vec::new();
        let mut next: u64 = 0;
        for k in k_lo..=k_hi {
            let t = k as f64 * h;
            let s = h * t.exp();
            let active: Vec<&Region> = spec
                .regions
                .iter()
                .filter(|r| {
                    let (lo, hi) = r.t_bounds(mu);
                    t >= lo && t <= hi
                })
                .collect();
            let inside = |u1: f64, cross: f64| {
                cross <= spec.width_cap && active.iter().any(|r| r.contains(u1, cross, t, mu, sinh_mu))
            };
            let j_max = if spec.base_dim == 1 {
                0
            } else {
                let cross = spec
                    .regions
                    .iter()
                    .map(|r| r.cross_bound(t, sinh_mu))
                    .fold(0.0, f64::max)
                    .min(spec.width_cap);
                (cross / s).floor() as i64
            };
            let mut rows = Vec::with_capacity((2 * j_max + 1) as usize);
            for j in -j_max..=j_max {
                let u2 = j as f64 * s;
                let mut spans: Vec<(i64, i64)> = spec
                    .regions
                    .iter()
                    .filter(|r| r.cross_bound(t, sinh_mu) >= u2.abs())
                    .flat_map(|r| r.u1_spans(t, mu, sinh_mu))
                    .flatten()
                    .map(|(a, b)| ((a / s).ceil() as i64, (b / s).floor() as i64))
                    .filter(|(a, b)| a <= b)
                    .collect();
                spans.sort_unstable();
                let mut merged: Vec<(i64, i64)> = Vec::new();
                for (a, b) in spans {
                    match merged.last_mut() {
                        Some(last) if a <= last.1 + 1 => last.1 = last.1.max(b),
                        _ => merged.push((a, b)),
                    }
                }
                let mut runs: Vec<Run> = Vec::new();
                for (a, b) in merged {
                    for i in a..=b {
                        let u1 = i as f64 * s;
                        if !inside(u1, u2.abs()) {
                            continue;
                        }
                        if next >= u32::MAX as u64 {
                            return Err(Error::invalid("mesh exceeds 2³² vertices"));
                        }
                        match runs.last_mut() {
                            Some(r) if r.i_hi + 1 == i => r.i_hi = i,
                            _ => runs.push(Run {
                                i_lo: i,
                                i_hi: i,
                                first: next as VertexId,
                            }),
                        }
                        next += 1;
                        coords.push(u1);
                        if spec.base_dim == 2 {
                            coords.push(u2);
                        }
                        coords.push(t);
                        sites.push(Site {
                            node: Node::Main,
                            layer: (k - k_lo) as usize,
                            u1,
                            u2,
                        });
                    }
                }
                rows.push(runs);
            }
            layers.push(Layer {
                t,
                spacing: s,
                j_max,
                rows,
            });
        }
        let main_count = sites.len();
        if main_count == 0 {
            return Err(Error::invalid("mesh domain contains no lattice points"));
        }

        // branch and apex vertices around cone points
        let mut extras_by_cone: Vec<Vec<Vec<VertexId>>> = vec![vec![Vec::new(); layers.len()]; cones.len()];
        for (ci, cone) in cones.iter().enumerate() {
            let d = cone.distance_to_leaf();
            for (li, layer) in layers.iter().enumerate() {
                let t = layer.t;
                if !inside(cone.u1, d, t) {
                    continue;
                }
                let mut push = |node: Node, u1: f64, u2: f64, sites: &mut Vec<Site>, coords: &mut Vec<f64>| {
                    extras_by_cone[ci][li].push(sites.len() as VertexId);
                    coords.extend_from_slice(&[u1, u2, t]);
                    sites.push(Site { node, layer: li, u1, u2 });
                };
                push(Node::Apex { cone: ci as u32 }, cone.u1, cone.u2, &mut sites, &mut coords);
                let s = layer.spacing;
                let reach = spec.width_cap - d;
                let (i0, i1) = (((cone.u1 - reach) / s).ceil() as i64, ((cone.u1 + reach) / s).floor() as i64);
                let (j0, j1) = (((cone.u2 - reach) / s).ceil() as i64, ((cone.u2 + reach) / s).floor() as i64);
                let limit = PI * cone.sheets as f64;
                for i in i0..=i1 {
                    for j in j0..=j1 {
                        let (u1, u2) = (i as f64 * s, j as f64 * s);
                        let rho = (u1 - cone.u1).hypot(u2 - cone.u2);
                        if rho == 0.0 || !inside(u1, d + rho, t) {
                            continue;
                        }
                        let psi = cone.angle_of(u1, u2);
                        for turn in (1..=cone.sheets as i32).flat_map(|n| [-n, n]) {
                            let phi = psi + 2.0 * PI * turn as f64;
                            if phi > -limit && phi <= limit {
                                push(Node::Branch { cone: ci as u32, angle: phi }, u1, u2, &mut sites, &mut coords);
                            }
                        }
                    }
                }
            }
        }
        for per_layer in &mut extras_by_cone {
            for list in per_layer.iter_mut() {
                list.sort_by(|&a, &b| sites[a as usize].u1.total_cmp(&sites[b as usize].u1));
            }
        }
        if sites.len() >= u32::MAX as usize {
            return Err(Error::invalid("mesh exceeds 2³² vertices"));
        }

        let builder = EdgeBuilder {
            spec: &spec,
            layers: &layers,
            cones: &cones,
            sites: &sites,
            extras_by_cone: &extras_by_cone,
        };
        let mut adj = AdjacencyBuilder::with_capacity(sites.len(), sites.len() * 16);
        let mut scratch = Vec::new();
        for v in 0..sites.len() {
            scratch.clear();
            builder.neighbors(v, &mut scratch);
            for &(w, len) in &scratch {
                adj.push(w, len);
            }
            adj.finish_vertex();
        }
        let mut mesh = MeshSpace::from_parts(dim, coords, adj, h);
        let reached = mesh.component_of(0);
        if !reached[..main_count].iter().all(|&r| r) {
            return Err(Error::invalid("mesh domain is not connected"));
        }
        let stranded = reached.iter().filter(|&&r| !r).count();
        if stranded > 0 {
            log::debug!("dropping {stranded} cone-sheet vertices cut off from the lattice");
            mesh = mesh.retain(&reached);
        }
        log::debug!(
            "warped mesh: {} vertices ({} on cone sheets), {} edges, {} layers",
            mesh.num_vertices(),
            mesh.num_vertices() - main_count,
            mesh.num_edges(),
            layers.len()
        );
        Ok(WarpedModel {
            mesh,
            spec,
            k_lo,
            layers,
            cones,
            main_count,
            flat,
        })
    }

    pub fn mesh(&self) -> &MeshSpace {
        &self.mesh
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn cones(&self) -> &[ConeSite] {
        &self.cones
    }

    pub fn base_dim(&self) -> usize {
        self.spec.base_dim
    }

    /// Vertices on cone sheets or at cone points.
    pub fn branch_vertex_count(&self) -> usize {
        self.mesh.num_vertices() - self.main_count
    }

    /// True when distances have the exact hyperbolic oracle.
    pub fn has_exact_oracle(&self) -> bool {
        self.flat
    }

    /// Nearest lattice vertex of the main sheet to `(u, t)`, with `u` holding
    /// `base_dim` leaf-aligned coordinates (missing ones read as 0).
    pub fn snap(&self, u: &[f64], t: f64) -> Result<VertexId> {
        let k = (t / self.spec.resolution).round() as i64;
        let outside = || Error::OutOfRange(format!("point {u:?} at height {t} lies outside the mesh domain"));
        if k < self.k_lo || k >= self.k_lo + self.layers.len() as i64 || !t.is_finite() {
            return Err(outside());
        }
        let layer = &self.layers[(k - self.k_lo) as usize];
        let u1 = u.first().copied().unwrap_or(0.0);
        let u2 = u.get(1).copied().unwrap_or(0.0);
        let i = (u1 / layer.spacing).round();
        let j = (u2 / layer.spacing).round();
        if !i.is_finite() || i.abs() > 1e15 || j.abs() > 1e15 {
            return Err(outside());
        }
        layer.lookup(i as i64, j as i64).ok_or_else(outside)
    }

    /// Snapped vertex on the leaf at parameter `x`.
    pub fn leaf_vertex(&self, x: f64, t: f64) -> Result<VertexId> {
        self.snap(&[x], t)
    }

    /// Developed coordinates of a vertex as a point of ℍ^{base_dim + 1}.
    pub fn hpoint(&self, v: VertexId) -> HPoint {
        let c = self.mesh.coords(v);
        let (x, t) = c.split_at(c.len() - 1);
        HPoint {
            x: x.to_vec(),
            t: t[0],
        }
    }

    /// Compares mesh distances with exact distances between the snapped
    /// vertices on `pairs` seeded random pairs from `safe`.
    pub fn cross_check(&self, safe: &SafeBox, pairs: usize, seed: u64) -> Result<CrossCheck> {
        if !self.flat {
            return Err(Error::invalid("no exact oracle for a singular model"));
        }
        if pairs == 0 || !(safe.half_width > 0.0 && safe.t_min < safe.t_max) {
            return Err(Error::invalid("cross-check needs pairs and a nondegenerate box"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = self.spec.base_dim;
        let draw = |rng: &mut ChaCha8Rng| -> Result<VertexId> {
            let u: Vec<f64> = (0..dim).map(|_| rng.gen_range(-safe.half_width..=safe.half_width)).collect();
            self.snap(&u, rng.gen_range(safe.t_min..=safe.t_max))
        };
        let mut chosen = Vec::with_capacity(pairs);
        let mut attempts = 0usize;
        while chosen.len() < pairs {
            attempts += 1;
            if attempts > 1000 * pairs {
                return Err(Error::invalid("safe box admits too few pairs"));
            }
            let (a, b) = (draw(&mut rng)?, draw(&mut rng)?);
            let (ca, cb) = (self.mesh.coords(a), self.mesh.coords(b));
            let n = ca.len() - 1;
            let gap2: f64 = (0..n).map(|i| (ca[i] - cb[i]).powi(2)).sum();
            let exact = dist_from_gap2(gap2, ca[n], cb[n]);
            if exact >= safe.min_distance && apex_height(gap2, ca[n], cb[n]).ln() <= safe.t_max {
                chosen.push((a, b, exact));
            }
        }
        let errors: Vec<(f64, f64, f64)> = chosen
            .par_iter()
            .map(|&(a, b, exact)| {
                let d = self.mesh.mesh_distance(a, b)?;
                Ok(((d - exact).abs() / exact, exact, d))
            })
            .collect::<Result<_>>()?;
        let mut worst = errors[0];
        for e in &errors {
            if e.0 > worst.0 {
                worst = *e;
            }
        }
        Ok(CrossCheck {
            pairs,
            max_relative_error: worst.0,
            mean_relative_error: errors.iter().map(|e| e.0).sum::<f64>() / pairs as f64,
            worst: (worst.1, worst.2),
        })
    }

    /// Exact hyperbolic distance between the developed positions of two
    /// vertices; only meaningful for flat models.
    pub fn exact_distance(&self, a: VertexId, b: VertexId) -> Result<f64> {
        if !self.flat {
            return Err(Error::invalid("no exact oracle for a singular model"));
        }
        let (ca, cb) = (self.mesh.coords(a), self.mesh.coords(b));
        let n = ca.len() - 1;
        let gap2: f64 = (0..n).map(|i| (ca[i] - cb[i]).powi(2)).sum();
        Ok(dist_from_gap2(gap2, ca[n], cb[n]))
    }
}

/// Agreement of mesh distances with the exact oracle on random pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub pairs: usize,
    pub max_relative_error: f64,
    pub mean_relative_error: f64,
    /// `(exact, mesh)` distances of the worst pair.
    pub worst: (f64, f64),
}

/// A box of the domain whose geodesics stay in the mesh: pairs are drawn
/// with `|u_i| ≤ half_width`, `t ∈ [t_min, t_max]`, and kept only when the
/// connecting geodesic stays below `t_max` and is at least `min_distance` long.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafeBox {
    pub half_width: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub min_distance: f64,
}

fn apex_height(gap2: f64, ta: f64, tb: f64) -> f64 {
    let (ya, yb) = (ta.exp(), tb.exp());
    if gap2 == 0.0 {
        return ya.max(yb);
    }
    let a = (gap2 + yb * yb - ya * ya) / (2.0 * gap2.sqrt());
    (a * a + ya * ya).sqrt()
}

struct EdgeBuilder<'a> {
    spec: &'a LatticeSpec,
    layers: &'a [Layer],
    cones: &'a [ConeSite],
    sites: &'a [Site],
    extras_by_cone: &'a [Vec<Vec<VertexId>>],
}

impl EdgeBuilder<'_> {
    fn neighbors(&self, v: usize, out: &mut Vec<(VertexId, f64)>) {
        let a = self.sites[v];
        let m = self.spec.stencil as i64;
        let h = self.spec.resolution;
        let reach = m as f64 * h * (1.0 + 1e-9);
        let ta = self.layers[a.layer].t;
        let consider = |w: VertexId, out: &mut Vec<(VertexId, f64)>| {
            if w as usize == v {
                return;
            }
            let b = self.sites[w as usize];
            let tb = self.layers[b.layer].t;
            let gap2 = (a.u1 - b.u1).powi(2) + (a.u2 - b.u2).powi(2);
            if segment_length(gap2, ta, tb) <= reach && self.valid(&a, &b) {
                out.push((w, dist_from_gap2(gap2, ta, tb)));
            }
        };
        for dk in -m..=m {
            let l2 = a.layer as i64 + dk;
            if l2 < 0 || l2 >= self.layers.len() as i64 {
                continue;
            }
            let layer = &self.layers[l2 as usize];
            let dt = dk as f64 * h;
            let rem2 = reach * reach - dt * dt;
            if rem2 < 0.0 {
                continue;
            }
            let r_flat = (0.5 * (ta + layer.t)).exp() * rem2.sqrt();
            let s = layer.spacing;
            let j0 = ((a.u2 - r_flat) / s).ceil() as i64;
            let j1 = ((a.u2 + r_flat) / s).floor() as i64;
            for j in j0.max(-layer.j_max)..=j1.min(layer.j_max) {
                let du2 = j as f64 * s - a.u2;
                let r1 = (r_flat * r_flat - du2 * du2).max(0.0).sqrt();
                let i0 = ((a.u1 - r1) / s).ceil() as i64;
                let i1 = ((a.u1 + r1) / s).floor() as i64;
                for run in layer.row(j) {
                    let (lo, hi) = (run.i_lo.max(i0), run.i_hi.min(i1));
                    for i in lo..=hi {
                        consider(run.first + (i - run.i_lo) as VertexId, out);
                    }
                }
            }
            // cone sheets within reach
            let span = r_flat + self.spec.width_cap;
            let first = self.cones.partition_point(|c| c.u1 < a.u1 - span);
            for ci in first..self.cones.len() {
                let cone = &self.cones[ci];
                if cone.u1 > a.u1 + span {
                    break;
                }
                let gap = (cone.u1 - a.u1).hypot(cone.u2 - a.u2);
                if gap > r_flat + self.spec.width_cap - cone.distance_to_leaf() {
                    continue;
                }
                let extras = &self.extras_by_cone[ci][l2 as usize];
                let start = extras.partition_point(|&w| self.sites[w as usize].u1 < a.u1 - r_flat);
                for &w in &extras[start..] {
                    let b = &self.sites[w as usize];
                    if b.u1 > a.u1 + r_flat {
                        break;
                    }
                    if (b.u1 - a.u1).powi(2) + (b.u2 - a.u2).powi(2) <= r_flat * r_flat * (1.0 + 1e-9) {
                        consider(w, out);
                    }
                }
            }
        }
    }

    fn angle_around(&self, site: &Site, cone: usize) -> f64 {
        match site.node {
            Node::Branch { cone: c, angle } if c as usize == cone => angle,
            _ => self.cones[cone].angle_of(site.u1, site.u2),
        }
    }

    /// Whether the straight segment between two vertices exists in the cover:
    /// it may not wind across the cut behind a cone point.
    fn valid(&self, a: &Site, b: &Site) -> bool {
        if self.cones.is_empty() {
            return true;
        }
        let (ca, cb) = (a.node.cone(), b.node.cone());
        if let (Some(p), Some(q)) = (ca, cb) {
            if p != q {
                return false;
            }
        }
        let check = |ci: usize| -> bool {
            if matches!(a.node, Node::Apex { cone } if cone as usize == ci)
                || matches!(b.node, Node::Apex { cone } if cone as usize == ci)
            {
                return true;
            }
            (self.angle_around(a, ci) - self.angle_around(b, ci)).abs() < PI
        };
        if let Some(p) = ca.or(cb) {
            if !check(p as usize) {
                return false;
            }
        }
        let (lo, hi) = (a.u1.min(b.u1), a.u1.max(b.u1));
        let first = self.cones.partition_point(|c| c.u1 < lo);
        for ci in first..self.cones.len() {
            let cone = &self.cones[ci];
            if cone.u1 > hi {
                break;
            }
            if Some(ci as u32) == ca.or(cb) {
                continue;
            }
            if a.node == Node::Main && b.node == Node::Main {
                // the cut is the ray from the cone point straight away from the leaf
                let (da, db) = (a.u1 - cone.u1, b.u1 - cone.u1);
                if da * db < 0.0 {
                    let u2 = a.u2 + (b.u2 - a.u2) * da / (da - db);
                    if (u2 - cone.u2) * cone.u2.signum() > 0.0 {
                        return false;
                    }
                }
            } else if !check(ci) {
                return false;
            }
        }
        true
    }
}

impl TargetSpace for WarpedModel {
    type Point = VertexId;

    fn distance(&self, a: &VertexId, b: &VertexId) -> Result<f64> {
        self.mesh.distance(a, b)
    }

    fn geodesic(&self, a: &VertexId, b: &VertexId, samples: usize) -> Result<SampledGeodesic<VertexId>> {
        self.mesh.geodesic(a, b, samples)
    }

    fn tolerance(&self) -> f64 {
        self.mesh.tolerance()
    }

    fn distances_from(&self, source: &VertexId, targets: &[VertexId]) -> Result<Vec<f64>> {
        self.mesh.distances_from(source, targets)
    }

    fn proximity<'a>(&'a self, path: &'a SampledGeodesic<VertexId>) -> Result<Proximity<'a, VertexId>> {
        self.mesh.proximity(path)
    }
}
