use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SampleDomain;
use crate::error::{Error, Result};
use crate::hyperbolic::{dist_hyp, HPoint};
use crate::pencil::Pencil;
use crate::space::TargetSpace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    /// `(x, t)` with the height last.
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub d_hyp: f64,
    pub d_target: f64,
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub sup: f64,
    pub witness: Option<PairRecord>,
    pub records: Vec<PairRecord>,
}

fn sample_point(domain: &SampleDomain, dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match *domain {
        SampleDomain::Box { half_width, t_min, t_max } => {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-half_width..=half_width)).collect();
            v.push(rng.gen_range(t_min..=t_max));
            v
        }
        SampleDomain::Hull(piece) => loop {
            let x = rng.gen_range(piece.x_lo..=piece.x_hi);
            let t = rng.gen_range(piece.t_bottom..=piece.t_top);
            if piece.contains_exactly(x, t) {
                break vec![x, t];
            }
        },
    }
}

/// Draws `pairs` seeded random pairs from `domain` and measures
/// `sup |d_X(F(p), F(q)) − d_ℍ(p, q)|`.
pub fn verify_almost_isometry<F: Pencil>(
    pencil: &F,
    domain: &SampleDomain,
    pairs: usize,
    seed: u64,
) -> Result<Verification> {
    let dim = pencil.domain_dim();
    if let SampleDomain::Hull(_) = domain {
        if dim != 1 {
            return Err(Error::Config("hull sampling domains need one horizontal coordinate".into()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<(Vec<f64>, Vec<f64>)> = (0..pairs)
        .map(|_| (sample_point(domain, dim, &mut rng), sample_point(domain, dim, &mut rng)))
        .collect();
    let target = pencil.target();
    let records: Vec<PairRecord> = draws
        .into_par_iter()
        .map(|(p, q)| {
            let (px, pt) = p.split_at(dim);
            let (qx, qt) = q.split_at(dim);
            let d_hyp = dist_hyp(&HPoint::new(px.to_vec(), pt[0])?, &HPoint::new(qx.to_vec(), qt[0])?)?;
            let d_target = target.distance(&pencil.at(px, pt[0])?, &pencil.at(qx, qt[0])?)?;
            Ok(PairRecord {
                discrepancy: (d_target - d_hyp).abs(),
                p,
                q,
                d_hyp,
                d_target,
            })
        })
        .collect::<Result<_>>()?;
    let mut witness: Option<&PairRecord> = None;
    for rec in &records {
        if witness.map_or(true, |w| rec.discrepancy > w.discrepancy) {
            witness = Some(rec);
        }
    }
    Ok(Verification {
        sup: witness.map_or(0.0, |w| w.discrepancy),
        witness: witness.cloned(),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pencil::{constant_pencil, CoordinatePencil};
    use crate::space::exact_hyperbolic_target;
    use crate::warped::HullPiece;

    #[test]
    fn identity_has_no_discrepancy() {
        let h3 = exact_hyperbolic_target(3).unwrap();
        let f = CoordinatePencil::new(h3, 3).unwrap();
        let dom = SampleDomain::Box {
            half_width: 5.0,
            t_min: -6.0,
            t_max: 6.0,
        };
        let v = verify_almost_isometry(&f, &dom, 200, 7).unwrap();
        assert_eq!(v.records.len(), 200);
        assert!(v.sup < 1e-9, "{}", v.sup);
    }

    #[test]
    fn seeds_reproduce_pairs() {
        let h2 = exact_hyperbolic_target(2).unwrap();
        let f = constant_pencil(&h2, 1, HPoint::planar(0.0, 0.0));
        let dom = SampleDomain::Hull(HullPiece::new(-1.0, 1.0, -4.0, 3.0).unwrap());
        let a = verify_almost_isometry(&f, &dom, 50, 3).unwrap();
        let b = verify_almost_isometry(&f, &dom, 50, 3).unwrap();
        assert_eq!(a, b);
        for r in &a.records {
            assert_eq!(r.discrepancy, r.d_hyp);
        }
    }
}
