use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::slim::pair_at;
use super::{DivergenceSchedule, PairGrid};
use crate::error::{Error, Result};
use crate::pencil::Pencil;
use crate::space::TargetSpace;

/// One pair `(x, t)`, `(x + u·e^t, t)` and the target distance of its image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsRWitness {
    pub t: f64,
    pub u: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsREstimate {
    pub epsilon: f64,
    pub r: f64,
    pub witness: EpsRWitness,
    pub rows: Vec<EpsRWitness>,
}

fn same_height_distance<F: Pencil>(pencil: &F, base_x: f64, gap: f64, t: f64) -> Result<f64> {
    let (x, x2) = pair_at(base_x, pencil.domain_dim(), gap);
    let target = pencil.target();
    target.distance(&pencil.at(&x, t)?, &pencil.at(&x2, t)?)
}

/// `R`: the largest image distance over grid pairs with `u < ε`. Every grid
/// pair is then checked against `d ≤ (R/ε)·u + R`, up to the target
/// tolerance; a violation is reported with its pair.
pub fn estimate_eps_r<F: Pencil>(pencil: &F, grid: &PairGrid, epsilon: f64) -> Result<EpsREstimate> {
    if !grid.ratios.iter().any(|&u| u < epsilon) {
        return Err(Error::Config(format!("no grid ratio below epsilon = {epsilon}")));
    }
    let cells: Vec<(f64, f64)> = grid
        .heights
        .iter()
        .flat_map(|&t| grid.ratios.iter().map(move |&u| (t, u)))
        .collect();
    let rows: Vec<EpsRWitness> = cells
        .par_iter()
        .map(|&(t, u)| {
            let distance = same_height_distance(pencil, grid.base_x, u * t.exp(), t)?;
            Ok(EpsRWitness { t, u, distance })
        })
        .collect::<Result<_>>()?;
    let mut witness = None::<EpsRWitness>;
    for row in rows.iter().filter(|w| w.u < epsilon) {
        if witness.map_or(true, |w| row.distance > w.distance) {
            witness = Some(*row);
        }
    }
    let witness = witness.expect("a qualifying ratio exists");
    let r = witness.distance;
    let slack = pencil.target().tolerance();
    if let Some(bad) = rows.iter().find(|w| w.distance > (r / epsilon) * w.u + r + slack) {
        return Err(Error::Certification(format!(
            "linear bound d <= (R/eps)u + R fails at t = {}, u = {}: d = {} > {}",
            bad.t,
            bad.u,
            bad.distance,
            (r / epsilon) * bad.u + r
        )));
    }
    Ok(EpsREstimate {
        epsilon,
        r,
        witness,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub ok: bool,
    pub reason: String,
    /// Rows `(u, t, d)` in schedule order.
    pub rows: Vec<(f64, f64, f64)>,
    pub growth: f64,
}

/// Checks that `d(F(x, t_k), F(x′, t_k))` grows along the schedule: no drop
/// below the running maximum by more than `2R`, a strictly larger maximum in
/// each successive decade of `u`, and total growth above `2R` per decade.
pub fn check_divergence<F: Pencil>(pencil: &F, schedule: &DivergenceSchedule, r: f64) -> Result<DivergenceReport> {
    let rows: Vec<(f64, f64, f64)> = schedule
        .ratios
        .par_iter()
        .map(|&u| {
            let t = (schedule.span / u).ln();
            Ok((u, t, same_height_distance(pencil, schedule.base_x, schedule.span, t)?))
        })
        .collect::<Result<_>>()?;
    let growth = rows.last().unwrap().2 - rows[0].2;
    let fail = |reason: String| DivergenceReport {
        ok: false,
        reason,
        rows: rows.clone(),
        growth,
    };

    let mut running = f64::NEG_INFINITY;
    for &(u, _, d) in &rows {
        if d < running - 2.0 * r {
            return Ok(fail(format!("distance {d} at u = {u} drops more than 2R below {running}")));
        }
        running = running.max(d);
    }

    let u0 = rows[0].0;
    let decade = |u: f64| ((u / u0).log10() + 1e-9).floor() as i64;
    let mut maxima: Vec<(i64, f64)> = Vec::new();
    for &(u, _, d) in &rows {
        match maxima.last_mut() {
            Some((k, m)) if *k == decade(u) => *m = m.max(d),
            _ => maxima.push((decade(u), d)),
        }
    }
    if let Some(w) = maxima.windows(2).find(|w| w[1].1 <= w[0].1) {
        return Ok(fail(format!("decade {} does not exceed the maximum {} of decade {}", w[1].0, w[0].1, w[0].0)));
    }

    let decades = (rows.last().unwrap().0 / u0).log10();
    if !(growth > 2.0 * r * decades) {
        return Ok(fail(format!("total growth {growth} is not above 2R per decade over {decades} decades")));
    }
    Ok(DivergenceReport {
        ok: true,
        reason: String::new(),
        rows,
        growth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certifier::CertifierConfig;
    use crate::hyperbolic::HPoint;
    use crate::pencil::{constant_pencil, CoordinatePencil, MapPencil};
    use crate::space::exact_hyperbolic_target;

    #[test]
    fn identity_r_is_largest_small_ratio_distance() {
        let h2 = exact_hyperbolic_target(2).unwrap();
        let f = CoordinatePencil::new(h2, 2).unwrap();
        let cfg = CertifierConfig::exact_defaults();
        let est = estimate_eps_r(&f, &cfg.pair_grid, 1.0).unwrap();
        assert!((est.r - 2.0 * 0.495f64.asinh()).abs() < 1e-9, "{}", est.r);
        assert_eq!(est.witness.u, 0.99);
        assert_eq!(est.rows.len(), 11 * 12);
    }

    #[test]
    fn eps_r_recheck_reports_violations() {
        let h2 = exact_hyperbolic_target(2).unwrap();
        let f = MapPencil::new(&h2, 1, |x: &[f64], t: f64| {
            let far = x[0] >= t.exp();
            Ok(HPoint::planar(if far { 1000.0 * x[0] } else { x[0] }, t))
        });
        let cfg = CertifierConfig::exact_defaults();
        let err = estimate_eps_r(&f, &cfg.pair_grid, 1.0).unwrap_err();
        assert!(matches!(err, Error::Certification(_)), "{err}");
    }

    #[test]
    fn identity_diverges_and_constant_does_not() {
        let h2 = exact_hyperbolic_target(2).unwrap();
        let sched = CertifierConfig::exact_defaults().divergence;
        let f = CoordinatePencil::new(h2, 2).unwrap();
        let rep = check_divergence(&f, &sched, 0.9624).unwrap();
        assert!(rep.ok, "{}", rep.reason);
        assert_eq!(rep.rows.len(), 17);
        let c = constant_pencil(&h2, 1, HPoint::planar(0.0, 0.0));
        let rep = check_divergence(&c, &sched, 0.0).unwrap();
        assert!(!rep.ok);
        assert_eq!(rep.growth, 0.0);
    }
}
