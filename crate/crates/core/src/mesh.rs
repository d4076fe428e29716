//! Weighted graphs approximating Riemannian metrics, queried with Dijkstra.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{Proximity, SampledGeodesic, TargetSpace};

pub type VertexId = u32;

const NO_PRED: u32 = u32::MAX;

/// Undirected weighted graph in compressed adjacency form. Vertices carry a
/// coordinate tuple of fixed length.
#[derive(Debug, Clone)]
pub struct MeshSpace {
    dim: usize,
    coords: Vec<f64>,
    offsets: Vec<usize>,
    targets: Vec<VertexId>,
    weights: Vec<f64>,
    resolution: f64,
    proximity_cutoff: Option<f64>,
}

/// JSON exchange form: `{vertices: [[coords…]], edges: [[i, j, w]], resolution: h}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshDocument {
    pub vertices: Vec<Vec<f64>>,
    pub edges: Vec<(VertexId, VertexId, f64)>,
    pub resolution: f64,
}

/// Output of a (multi-source) Dijkstra run.
#[derive(Debug, Clone)]
pub struct ShortestPaths {
    pub dist: Vec<f64>,
    pred: Vec<VertexId>,
}

impl ShortestPaths {
    pub fn reached(&self, v: VertexId) -> bool {
        self.dist[v as usize].is_finite()
    }

    /// Vertices from a source to `v`, source first.
    pub fn path_to(&self, v: VertexId) -> Vec<VertexId> {
        let mut path = vec![v];
        let mut cur = v;
        while self.pred[cur as usize] != NO_PRED {
            cur = self.pred[cur as usize];
            path.push(cur);
        }
        path.reverse();
        path
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct QueueEntry {
    dist: f64,
    vertex: VertexId,
}

impl Eq for QueueEntry {}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Builds the compressed form from per-vertex neighbor lists.
pub(crate) struct AdjacencyBuilder {
    offsets: Vec<usize>,
    targets: Vec<VertexId>,
    weights: Vec<f64>,
}

impl AdjacencyBuilder {
    pub(crate) fn with_capacity(vertices: usize, edges: usize) -> Self {
        let mut offsets = Vec::with_capacity(vertices + 1);
        offsets.push(0);
        AdjacencyBuilder {
            offsets,
            targets: Vec::with_capacity(edges),
            weights: Vec::with_capacity(edges),
        }
    }

    pub(crate) fn push(&mut self, target: VertexId, weight: f64) {
        self.targets.push(target);
        self.weights.push(weight);
    }

    /// Closes the neighbor list of the current vertex.
    pub(crate) fn finish_vertex(&mut self) {
        self.offsets.push(self.targets.len());
    }
}

impl MeshSpace {
    /// Builds a mesh from an undirected edge list.
    pub fn from_edges(
        vertices: Vec<Vec<f64>>,
        edges: &[(VertexId, VertexId, f64)],
        resolution: f64,
    ) -> Result<Self> {
        let n = vertices.len();
        if n == 0 {
            return Err(Error::invalid("mesh has no vertices"));
        }
        let dim = vertices[0].len();
        if vertices.iter().any(|v| v.len() != dim) {
            return Err(Error::invalid("vertex coordinate tuples differ in length"));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::invalid("resolution must be positive"));
        }
        let mut degree = vec![0usize; n];
        for &(i, j, w) in edges {
            if i as usize >= n || j as usize >= n {
                return Err(Error::invalid(format!("edge ({i}, {j}) references a missing vertex")));
            }
            if i == j {
                return Err(Error::invalid(format!("self-loop at vertex {i}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::invalid(format!("edge ({i}, {j}) has weight {w}")));
            }
            degree[i as usize] += 1;
            degree[j as usize] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for v in 0..n {
            offsets[v + 1] = offsets[v] + degree[v];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![0; offsets[n]];
        let mut weights = vec![0.0; offsets[n]];
        for &(i, j, w) in edges {
            for (a, b) in [(i, j), (j, i)] {
                let slot = fill[a as usize];
                targets[slot] = b;
                weights[slot] = w;
                fill[a as usize] += 1;
            }
        }
        Ok(MeshSpace {
            dim,
            coords: vertices.into_iter().flatten().collect(),
            offsets,
            targets,
            weights,
            resolution,
            proximity_cutoff: None,
        })
    }

    pub(crate) fn from_parts(
        dim: usize,
        coords: Vec<f64>,
        adjacency: AdjacencyBuilder,
        resolution: f64,
    ) -> Self {
        debug_assert_eq!(coords.len() / dim + 1, adjacency.offsets.len());
        MeshSpace {
            dim,
            coords,
            offsets: adjacency.offsets,
            targets: adjacency.targets,
            weights: adjacency.weights,
            resolution,
            proximity_cutoff: None,
        }
    }

    /// Proximity fields stop growing beyond `cutoff`; queries past it fail.
    pub fn with_proximity_cutoff(mut self, cutoff: f64) -> Self {
        self.proximity_cutoff = Some(cutoff);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn num_vertices(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn coords(&self, v: VertexId) -> &[f64] {
        let i = v as usize * self.dim;
        &self.coords[i..i + self.dim]
    }

    pub fn neighbors(&self, v: VertexId) -> impl Iterator<Item = (VertexId, f64)> + '_ {
        let range = self.offsets[v as usize]..self.offsets[v as usize + 1];
        self.targets[range.clone()]
            .iter()
            .copied()
            .zip(self.weights[range].iter().copied())
    }

    pub fn edge_weight(&self, a: VertexId, b: VertexId) -> Option<f64> {
        self.neighbors(a).find(|&(v, _)| v == b).map(|(_, w)| w)
    }

    fn check_vertex(&self, v: VertexId) -> Result<()> {
        if (v as usize) < self.num_vertices() {
            Ok(())
        } else {
            Err(Error::OutOfRange(format!(
                "vertex {v} not in mesh of {} vertices",
                self.num_vertices()
            )))
        }
    }

    pub fn is_connected(&self) -> bool {
        self.component_of(0).iter().all(|&r| r)
    }

    /// Membership mask of the connected component containing `v`.
    pub(crate) fn component_of(&self, v: VertexId) -> Vec<bool> {
        let mut seen = vec![false; self.num_vertices()];
        let mut stack = vec![v];
        seen[v as usize] = true;
        while let Some(u) = stack.pop() {
            for (w, _) in self.neighbors(u) {
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    stack.push(w);
                }
            }
        }
        seen
    }

    /// Keeps the vertices marked in `keep`, which must be a union of
    /// components; survivors are renumbered in their original order.
    pub(crate) fn retain(self, keep: &[bool]) -> MeshSpace {
        let mut new_id = vec![VertexId::MAX; keep.len()];
        let mut next = 0;
        for (v, &k) in keep.iter().enumerate() {
            if k {
                new_id[v] = next;
                next += 1;
            }
        }
        let mut coords = Vec::with_capacity(next as usize * self.dim);
        let mut adj = AdjacencyBuilder::with_capacity(next as usize, self.targets.len());
        for v in (0..keep.len()).filter(|&v| keep[v]) {
            coords.extend_from_slice(self.coords(v as VertexId));
            for (w, len) in self.neighbors(v as VertexId) {
                adj.push(new_id[w as usize], len);
            }
            adj.finish_vertex();
        }
        MeshSpace::from_parts(self.dim, coords, adj, self.resolution)
    }

    /// Dijkstra from a set of sources at distance zero. Stops once every vertex
    /// in `targets` is settled, or once the frontier passes `cutoff`.
    pub fn shortest_paths(
        &self,
        sources: &[VertexId],
        targets: Option<&[VertexId]>,
        cutoff: Option<f64>,
    ) -> ShortestPaths {
        let n = self.num_vertices();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred = vec![NO_PRED; n];
        let mut settled = vec![false; n];
        let mut heap = BinaryHeap::new();
        for &s in sources {
            if dist[s as usize] > 0.0 {
                dist[s as usize] = 0.0;
                heap.push(QueueEntry { dist: 0.0, vertex: s });
            }
        }
        let mut wanted = vec![false; if targets.is_some() { n } else { 0 }];
        let mut remaining = 0usize;
        if let Some(ts) = targets {
            for &t in ts {
                if !wanted[t as usize] {
                    wanted[t as usize] = true;
                    remaining += 1;
                }
            }
        }
        let limit = cutoff.unwrap_or(f64::INFINITY);
        while let Some(QueueEntry { dist: d, vertex: u }) = heap.pop() {
            let ui = u as usize;
            if settled[ui] {
                continue;
            }
            if d > limit {
                dist[ui] = f64::INFINITY;
                break;
            }
            settled[ui] = true;
            if targets.is_some() && wanted[ui] {
                remaining -= 1;
                if remaining == 0 {
                    break;
                }
            }
            for k in self.offsets[ui]..self.offsets[ui + 1] {
                let v = self.targets[k];
                let nd = d + self.weights[k];
                if nd < dist[v as usize] {
                    dist[v as usize] = nd;
                    pred[v as usize] = u;
                    heap.push(QueueEntry { dist: nd, vertex: v });
                }
            }
        }
        // tentative labels that were never settled are not distances
        for (d, s) in dist.iter_mut().zip(&settled) {
            if !s {
                *d = f64::INFINITY;
            }
        }
        ShortestPaths { dist, pred }
    }

    pub fn mesh_distance(&self, a: VertexId, b: VertexId) -> Result<f64> {
        self.check_vertex(a)?;
        self.check_vertex(b)?;
        if a == b {
            return Ok(0.0);
        }
        let sp = self.shortest_paths(&[a], Some(&[b]), None);
        if sp.reached(b) {
            Ok(sp.dist[b as usize])
        } else {
            Err(Error::Unreachable {
                from: a as usize,
                to: b as usize,
            })
        }
    }

    /// Shortest path from `a` to `b`, thinned to at most `samples` vertices with
    /// cumulative path length as parameters.
    pub fn mesh_geodesic(
        &self,
        a: VertexId,
        b: VertexId,
        samples: usize,
    ) -> Result<SampledGeodesic<VertexId>> {
        self.check_vertex(a)?;
        self.check_vertex(b)?;
        if a == b {
            return Ok(SampledGeodesic::single(a));
        }
        let sp = self.shortest_paths(&[a], Some(&[b]), None);
        if !sp.reached(b) {
            return Err(Error::Unreachable {
                from: a as usize,
                to: b as usize,
            });
        }
        let path = sp.path_to(b);
        let cum: Vec<f64> = path.iter().map(|&v| sp.dist[v as usize]).collect();
        let keep = thin_indices(&cum, samples.max(2));
        let points = keep.iter().map(|&i| path[i]).collect();
        let params = keep.iter().map(|&i| cum[i]).collect();
        SampledGeodesic::new(points, params)
    }

    pub fn to_document(&self) -> MeshDocument {
        let vertices = (0..self.num_vertices() as VertexId)
            .map(|v| self.coords(v).to_vec())
            .collect();
        let mut edges = Vec::with_capacity(self.num_edges());
        for u in 0..self.num_vertices() as VertexId {
            for (v, w) in self.neighbors(u) {
                if u < v {
                    edges.push((u, v, w));
                }
            }
        }
        MeshDocument {
            vertices,
            edges,
            resolution: self.resolution,
        }
    }

    pub fn from_document(doc: MeshDocument) -> Result<Self> {
        MeshSpace::from_edges(doc.vertices, &doc.edges, doc.resolution)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(file, &self.to_document())?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let doc: MeshDocument = serde_json::from_reader(file)?;
        MeshSpace::from_document(doc)
    }

    /// Star graph: a center joined to `rays` paths of `length` unit edges.
    /// Coordinates are planar, rays spread evenly in angle.
    pub fn star(rays: usize, length: usize) -> Result<Self> {
        if rays == 0 || length == 0 {
            return Err(Error::invalid("star needs at least one ray of positive length"));
        }
        let mut vertices = vec![vec![0.0, 0.0]];
        let mut edges = Vec::new();
        for r in 0..rays {
            let angle = std::f64::consts::TAU * r as f64 / rays as f64;
            let mut prev = 0;
            for k in 1..=length {
                let id = vertices.len() as VertexId;
                vertices.push(vec![k as f64 * angle.cos(), k as f64 * angle.sin()]);
                edges.push((prev, id, 1.0));
                prev = id;
            }
        }
        MeshSpace::from_edges(vertices, &edges, 1.0)
    }

    /// Vertex on ray `ray` at `k` steps from the center of a [`MeshSpace::star`].
    pub fn star_vertex(length: usize, ray: usize, k: usize) -> VertexId {
        if k == 0 {
            0
        } else {
            (1 + ray * length + (k.min(length) - 1)) as VertexId
        }
    }

    /// Flat square lattice on `[-half_extent, half_extent]²` with every lattice
    /// offset of length at most `stencil` spacings as an edge.
    pub fn euclidean_grid(half_extent: f64, spacing: f64, stencil: usize) -> Result<Self> {
        if !(half_extent > 0.0 && spacing > 0.0) || stencil == 0 {
            return Err(Error::invalid("grid needs positive extent, spacing, stencil"));
        }
        let k = (half_extent / spacing).floor() as i64;
        let side = (2 * k + 1) as usize;
        let id = |i: i64, j: i64| ((i + k) as usize * side + (j + k) as usize) as VertexId;
        let m = stencil as i64;
        let offsets: Vec<(i64, i64)> = (-m..=m)
            .flat_map(|a| (-m..=m).map(move |b| (a, b)))
            .filter(|&(a, b)| (a, b) != (0, 0) && a * a + b * b <= m * m)
            .collect();
        let mut coords = Vec::with_capacity(side * side * 2);
        let mut adj = AdjacencyBuilder::with_capacity(side * side, side * side * offsets.len());
        for i in -k..=k {
            for j in -k..=k {
                coords.push(i as f64 * spacing);
                coords.push(j as f64 * spacing);
                for &(a, b) in &offsets {
                    let (p, q) = (i + a, j + b);
                    if p.abs() <= k && q.abs() <= k {
                        adj.push(id(p, q), spacing * ((a * a + b * b) as f64).sqrt());
                    }
                }
                adj.finish_vertex();
            }
        }
        Ok(MeshSpace::from_parts(2, coords, adj, spacing))
    }

    /// Vertex nearest to a planar point of a [`MeshSpace::euclidean_grid`].
    pub fn grid_vertex(&self, half_extent: f64, x: f64, y: f64) -> Result<VertexId> {
        let h = self.resolution;
        let k = (half_extent / h).floor() as i64;
        let (i, j) = ((x / h).round() as i64, (y / h).round() as i64);
        if i.abs() > k || j.abs() > k {
            return Err(Error::OutOfRange(format!("({x}, {y}) outside the grid")));
        }
        let side = 2 * k + 1;
        Ok(((i + k) * side + (j + k)) as VertexId)
    }
}

/// Indices into a cumulative-length sequence keeping the endpoints and the
/// entries nearest to evenly spaced lengths.
fn thin_indices(cum: &[f64], samples: usize) -> Vec<usize> {
    let n = cum.len();
    if samples >= n {
        return (0..n).collect();
    }
    let total = cum[n - 1];
    let mut keep = vec![0];
    let mut j = 0;
    for s in 1..samples - 1 {
        let target = total * s as f64 / (samples - 1) as f64;
        while j + 1 < n && cum[j + 1] <= target {
            j += 1;
        }
        let pick = if j + 1 < n && (cum[j + 1] - target) < (target - cum[j]) {
            j + 1
        } else {
            j
        };
        if pick > *keep.last().unwrap() && pick < n - 1 {
            keep.push(pick);
        }
    }
    keep.push(n - 1);
    keep
}

impl TargetSpace for MeshSpace {
    type Point = VertexId;

    fn distance(&self, a: &VertexId, b: &VertexId) -> Result<f64> {
        self.mesh_distance(*a, *b)
    }

    fn geodesic(&self, a: &VertexId, b: &VertexId, samples: usize) -> Result<SampledGeodesic<VertexId>> {
        self.mesh_geodesic(*a, *b, samples)
    }

    fn tolerance(&self) -> f64 {
        2.0 * self.resolution
    }

    fn distances_from(&self, source: &VertexId, targets: &[VertexId]) -> Result<Vec<f64>> {
        self.check_vertex(*source)?;
        for &t in targets {
            self.check_vertex(t)?;
        }
        let sp = self.shortest_paths(&[*source], Some(targets), None);
        targets
            .iter()
            .map(|&t| {
                if sp.reached(t) {
                    Ok(sp.dist[t as usize])
                } else {
                    Err(Error::Unreachable {
                        from: *source as usize,
                        to: t as usize,
                    })
                }
            })
            .collect()
    }

    fn proximity<'a>(&'a self, path: &'a SampledGeodesic<VertexId>) -> Result<Proximity<'a, VertexId>> {
        for &v in path.points() {
            self.check_vertex(v)?;
        }
        let field = self.shortest_paths(path.points(), None, self.proximity_cutoff);
        Ok(Box::new(move |&v| {
            self.check_vertex(v)?;
            let d = field.dist[v as usize];
            if d.is_finite() {
                Ok(d)
            } else if let Some(c) = self.proximity_cutoff {
                Err(Error::OutOfRange(format!(
                    "vertex {v} lies beyond the proximity cutoff {c}"
                )))
            } else {
                Err(Error::Unreachable {
                    from: path.first().to_owned() as usize,
                    to: v as usize,
                })
            }
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_graph() -> MeshSpace {
        let vertices = (0..4).map(|i| vec![i as f64]).collect();
        MeshSpace::from_edges(vertices, &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 0.5), (0, 3, 5.0)], 1.0).unwrap()
    }

    #[test]
    fn distances_on_small_graph() {
        let m = path_graph();
        assert_eq!(m.mesh_distance(2, 2).unwrap(), 0.0);
        assert_eq!(m.mesh_distance(0, 1).unwrap(), 1.0);
        assert_eq!(m.mesh_distance(0, 3).unwrap(), 3.5);
        assert_eq!(m.mesh_distance(3, 0).unwrap(), 3.5);
        assert_eq!(m.edge_weight(2, 3), Some(0.5));
        assert!(m.mesh_distance(0, 9).is_err());
    }

    #[test]
    fn unreachable_is_an_error() {
        let vertices = vec![vec![0.0], vec![1.0], vec![2.0]];
        let m = MeshSpace::from_edges(vertices, &[(0, 1, 1.0)], 1.0).unwrap();
        assert!(!m.is_connected());
        assert!(matches!(m.mesh_distance(0, 2), Err(Error::Unreachable { from: 0, to: 2 })));
        assert!(matches!(m.mesh_geodesic(2, 0, 4), Err(Error::Unreachable { .. })));
    }

    #[test]
    fn rejects_bad_edges() {
        let v = vec![vec![0.0], vec![1.0]];
        assert!(MeshSpace::from_edges(v.clone(), &[(0, 1, 0.0)], 1.0).is_err());
        assert!(MeshSpace::from_edges(v.clone(), &[(0, 2, 1.0)], 1.0).is_err());
        assert!(MeshSpace::from_edges(v.clone(), &[(1, 1, 1.0)], 1.0).is_err());
        assert!(MeshSpace::from_edges(v, &[(0, 1, 1.0)], -1.0).is_err());
    }

    #[test]
    fn geodesic_samples() {
        let m = path_graph();
        let g = m.mesh_geodesic(0, 1, 2).unwrap();
        assert_eq!(g.points(), &[0, 1]);
        assert_eq!(g.params(), &[0.0, 1.0]);
        let g = m.mesh_geodesic(0, 3, 10).unwrap();
        assert_eq!(g.points(), &[0, 1, 2, 3]);
        assert_eq!(g.params(), &[0.0, 1.0, 3.0, 3.5]);
        let g = m.mesh_geodesic(0, 3, 2).unwrap();
        assert_eq!(g.points(), &[0, 3]);
        let g = m.mesh_geodesic(1, 1, 5).unwrap();
        assert_eq!(g.points(), &[1]);
        assert_eq!(g.params(), &[0.0]);
    }

    #[test]
    fn json_round_trip() {
        let m = path_graph();
        let doc = m.to_document();
        let text = serde_json::to_string(&doc).unwrap();
        assert!(text.contains("\"edges\":[[0,1,1.0]"));
        let back = MeshSpace::from_document(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.to_document(), doc);
    }

    #[test]
    fn star_distances() {
        let s = MeshSpace::star(3, 4).unwrap();
        assert_eq!(s.num_vertices(), 13);
        let a = MeshSpace::star_vertex(4, 0, 4);
        let b = MeshSpace::star_vertex(4, 2, 3);
        assert_eq!(s.mesh_distance(a, b).unwrap(), 7.0);
        assert_eq!(MeshSpace::star_vertex(4, 1, 0), 0);
    }

    #[test]
    fn grid_distances_follow_stencil_norm() {
        let g = MeshSpace::euclidean_grid(2.0, 0.5, 1).unwrap();
        let a = g.grid_vertex(2.0, -2.0, -2.0).unwrap();
        let b = g.grid_vertex(2.0, 2.0, 2.0).unwrap();
        // 4-neighborhood: Manhattan distance
        assert!((g.mesh_distance(a, b).unwrap() - 8.0).abs() < 1e-12);
        let g3 = MeshSpace::euclidean_grid(2.0, 0.5, 3).unwrap();
        let d = g3.mesh_distance(a, b).unwrap();
        assert!((d - 32f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn multi_source_proximity() {
        let m = path_graph();
        let path = m.mesh_geodesic(0, 1, 2).unwrap();
        let prox = m.proximity(&path).unwrap();
        assert_eq!(prox(&2).unwrap(), 2.0);
        assert_eq!(prox(&3).unwrap(), 2.5);
        let cut = path_graph().with_proximity_cutoff(2.2);
        let path = cut.mesh_geodesic(0, 1, 2).unwrap();
        let prox = cut.proximity(&path).unwrap();
        assert!(prox(&3).is_err());
    }

    #[test]
    fn thinning_keeps_endpoints() {
        let cum: Vec<f64> = (0..11).map(|i| i as f64).collect();
        assert_eq!(thin_indices(&cum, 3), vec![0, 5, 10]);
        assert_eq!(thin_indices(&cum, 2), vec![0, 10]);
        assert_eq!(thin_indices(&cum, 20).len(), 11);
    }
}
