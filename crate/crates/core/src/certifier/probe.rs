use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::TargetSpace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    /// Largest four-point defect found.
    pub delta: f64,
    /// Indices of the quadruple attaining it.
    pub witness: [usize; 4],
    pub quadruples: usize,
}

fn defect(d: &[Vec<f64>], [a, b, c, e]: [usize; 4]) -> f64 {
    let mut s = [d[a][b] + d[c][e], d[a][c] + d[b][e], d[a][e] + d[b][c]];
    s.sort_by(f64::total_cmp);
    0.5 * (s[2] - s[1])
}

/// Gromov four-point defect over quadruples of `points`: all of them when
/// there are at most `quadruples`, otherwise that many seeded random ones.
pub fn hyperbolicity_probe<T: TargetSpace>(
    space: &T,
    points: &[T::Point],
    quadruples: usize,
    seed: u64,
) -> Result<ProbeResult> {
    let n = points.len();
    if n < 4 || quadruples == 0 {
        return Err(Error::Config(format!("probe needs at least 4 points and 1 quadruple, got {n} and {quadruples}")));
    }
    let d: Vec<Vec<f64>> = points
        .par_iter()
        .map(|p| space.distances_from(p, points))
        .collect::<Result<_>>()?;
    let total = n * (n - 1) * (n - 2) * (n - 3) / 24;
    let quads: Vec<[usize; 4]> = if total <= quadruples {
        let mut all = Vec::with_capacity(total);
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    for e in c + 1..n {
                        all.push([a, b, c, e]);
                    }
                }
            }
        }
        all
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..quadruples)
            .map(|_| {
                let v = sample(&mut rng, n, 4);
                [v.index(0), v.index(1), v.index(2), v.index(3)]
            })
            .collect()
    };
    let mut best = ProbeResult {
        delta: 0.0,
        witness: quads[0],
        quadruples: quads.len(),
    };
    for q in &quads {
        let v = defect(&d, *q);
        if v > best.delta {
            best.delta = v;
            best.witness = *q;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub size: f64,
    pub points: usize,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Defects strictly increase over at least three sizes and grow at
    /// least half as fast as the size.
    pub non_hyperbolic: bool,
}

/// Runs the probe on point sets of growing size and flags unbounded growth.
pub fn probe_sweep<T, G>(space: &T, sizes: &[f64], points_for: G, quadruples: usize, seed: u64) -> Result<SweepReport>
where
    T: TargetSpace,
    G: Fn(f64) -> Result<Vec<T::Point>>,
{
    let mut rows = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let pts = points_for(size)?;
        let res = hyperbolicity_probe(space, &pts, quadruples, seed)?;
        log::info!("probe size {size}: {} points, delta {}", pts.len(), res.delta);
        rows.push(SweepRow {
            size,
            points: pts.len(),
            delta: res.delta,
        });
    }
    let increasing = rows.len() >= 3 && rows.windows(2).all(|w| w[1].size > w[0].size && w[1].delta > w[0].delta);
    let non_hyperbolic = increasing && {
        let (first, last) = (&rows[0], &rows[rows.len() - 1]);
        last.delta / last.size >= 0.5 * first.delta / first.size
    };
    Ok(SweepReport { rows, non_hyperbolic })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshSpace;

    #[test]
    fn trees_have_zero_defect() {
        let star = MeshSpace::star(3, 5).unwrap();
        let pts: Vec<u32> = (0..star.num_vertices() as u32).collect();
        let r = hyperbolicity_probe(&star, &pts, 5000, 1).unwrap();
        assert_eq!(r.delta, 0.0);
    }

    #[test]
    fn square_cycle_defect() {
        // A 4-cycle with unit edges: pair sums 2, 2 and 4 give defect 1.
        let c4 = MeshSpace::from_edges(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]],
            &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)],
            1.0,
        )
        .unwrap();
        let r = hyperbolicity_probe(&c4, &[0, 1, 2, 3], 10, 0).unwrap();
        assert_eq!(r.delta, 1.0);
        assert_eq!(r.quadruples, 1);
    }
}
