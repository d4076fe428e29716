//! Numerical certification that a pencil embedding is almost isometric:
//! estimate the hypothesis constants, derive `K`, and test the bound on
//! random pairs.

mod height;
mod pairs;
mod probe;
mod slim;
mod verify;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperbolic::DEFAULT_DEPTH;
use crate::pencil::Pencil;
use crate::warped::HullPiece;

pub use height::{displaced_height, estimate_c0, C0Estimate, TriangleReport};
pub use pairs::{check_divergence, estimate_eps_r, DivergenceReport, EpsRWitness, EpsREstimate};
pub use probe::{hyperbolicity_probe, probe_sweep, ProbeResult, SweepReport, SweepRow};
pub use slim::{estimate_delta, triangle_sides, DeltaEstimate, DeltaWitness, TriangleSides};
pub use verify::{verify_almost_isometry, PairRecord, Verification};

/// How far below the midpoint the vertical sides of a triangle are truncated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Depth {
    /// Sides start at `t = −l`.
    Absolute { l: f64 },
    /// Sides start at `t = t(r) − d`.
    BelowMidpoint { d: f64 },
}

impl Depth {
    pub fn bottom(&self, midpoint_height: f64) -> f64 {
        match *self {
            Depth::Absolute { l } => -l,
            Depth::BelowMidpoint { d } => midpoint_height - d,
        }
    }

    fn shallower(&self, by: f64) -> Depth {
        match *self {
            Depth::Absolute { l } => Depth::Absolute { l: l - by },
            Depth::BelowMidpoint { d } => Depth::BelowMidpoint { d: d - by },
        }
    }
}

/// Vertical triangles with sides over `base_x` and `base_x + s·e₁`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleGrid {
    pub base_x: f64,
    pub separations: Vec<f64>,
    pub depth: Depth,
    /// Vertical sides end at `t(r) + top_margin`.
    pub top_margin: f64,
    /// Sampling step along vertical sides, also the scan step for `h_T`.
    pub step: f64,
    pub third_side_samples: usize,
}

/// Pairs `(x, t)`, `(x + u·e^t, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairGrid {
    pub base_x: f64,
    pub heights: Vec<f64>,
    /// Values of `e^{−t}|x − x′|`.
    pub ratios: Vec<f64>,
}

/// Pairs `(x, t_k)`, `(x + span, t_k)` with `t_k = ln(span / u_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceSchedule {
    pub base_x: f64,
    pub span: f64,
    pub ratios: Vec<f64>,
}

impl DivergenceSchedule {
    /// `u_k = 10^{k/4}` from 1 to `10^decades`.
    pub fn decades(base_x: f64, span: f64, decades: usize) -> Self {
        DivergenceSchedule {
            base_x,
            span,
            ratios: (0..=4 * decades).map(|k| 10f64.powf(k as f64 / 4.0)).collect(),
        }
    }
}

/// Where random verification pairs are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleDomain {
    /// `x ∈ [−half_width, half_width]^{n−1}`, `t ∈ [t_min, t_max]`.
    Box { half_width: f64, t_min: f64, t_max: f64 },
    /// The hull of two vertical segments (one horizontal coordinate only).
    Hull(HullPiece),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifierConfig {
    pub epsilon: f64,
    pub triangles: TriangleGrid,
    pub pair_grid: PairGrid,
    pub divergence: DivergenceSchedule,
    pub verify_domain: SampleDomain,
    pub pairs: usize,
    pub seed: u64,
    /// Bisection tolerance for displaced heights.
    pub height_tolerance: f64,
}

fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| lo * (hi / lo).powf(k as f64 / (count - 1) as f64))
        .collect()
}

const RATIOS: [f64; 12] = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 0.9, 0.99, 1.5, 2.0, 3.0, 4.0];

impl CertifierConfig {
    /// Grids for an exact target: deep truncation, wide boxes.
    pub fn exact_defaults() -> Self {
        CertifierConfig {
            epsilon: 1.0,
            triangles: TriangleGrid {
                base_x: 0.0,
                separations: log_spaced(2e-3, 20.0, 12),
                depth: Depth::Absolute { l: DEFAULT_DEPTH },
                top_margin: 6.0,
                step: 0.02,
                third_side_samples: 2001,
            },
            pair_grid: PairGrid {
                base_x: 0.0,
                heights: (-5..=5).map(f64::from).collect(),
                ratios: RATIOS.to_vec(),
            },
            divergence: DivergenceSchedule::decades(0.0, 1.0, 4),
            verify_domain: SampleDomain::Box {
                half_width: 5.0,
                t_min: -6.0,
                t_max: 6.0,
            },
            pairs: 1000,
            seed: 0,
            height_tolerance: 1e-3,
        }
    }

    /// Grids for a mesh target of resolution `h`; every query stays inside
    /// [`CertifierConfig::mesh_regions`].
    pub fn mesh_defaults(h: f64) -> Self {
        CertifierConfig {
            epsilon: 1.0,
            triangles: TriangleGrid {
                base_x: 0.0,
                separations: log_spaced(2e-3, 2.0, 12),
                depth: Depth::BelowMidpoint { d: 4.0 },
                top_margin: 3.0,
                step: h,
                third_side_samples: usize::MAX,
            },
            pair_grid: PairGrid {
                base_x: 0.0,
                heights: (-5..=5).map(f64::from).collect(),
                ratios: RATIOS.to_vec(),
            },
            divergence: DivergenceSchedule::decades(0.0, 1.0, 4),
            verify_domain: SampleDomain::Hull(HullPiece {
                x_lo: -1.0,
                x_hi: 1.0,
                t_bottom: -4.0,
                t_top: 3.0,
            }),
            pairs: 1000,
            seed: 0,
            height_tolerance: 1e-3,
        }
    }

    /// Hull pieces covering every point and geodesic the certifier queries,
    /// for one horizontal coordinate.
    pub fn mesh_regions(&self) -> Result<Vec<HullPiece>> {
        let mut pieces = Vec::new();
        let tri = &self.triangles;
        for &s in &tri.separations {
            let tr = (s / 2.0).ln();
            pieces.push(HullPiece::new(tri.base_x, tri.base_x + s, tri.depth.bottom(tr), tr + tri.top_margin)?);
        }
        let pg = &self.pair_grid;
        for &t in &pg.heights {
            for &u in &pg.ratios {
                pieces.push(HullPiece::new(pg.base_x, pg.base_x + u * t.exp(), t, t + 2.0)?);
            }
        }
        let dv = &self.divergence;
        let umax = dv.ratios.iter().copied().fold(0.0, f64::max);
        let umin = dv.ratios.iter().copied().fold(f64::INFINITY, f64::min);
        pieces.push(HullPiece::new(
            dv.base_x,
            dv.base_x + dv.span,
            (dv.span / umax).ln() - 0.1,
            (dv.span / umin).ln() + 1.0,
        )?);
        match self.verify_domain {
            SampleDomain::Hull(p) => pieces.push(p),
            SampleDomain::Box { .. } => {
                return Err(Error::Config("mesh targets need a hull verification domain".into()))
            }
        }
        Ok(pieces)
    }

    fn validate(&self, n: usize) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon {} must be positive", self.epsilon)));
        }
        let mut seps = self.triangles.separations.clone();
        seps.sort_by(f64::total_cmp);
        seps.dedup();
        if seps.len() < 10 || seps[0] <= 0.0 {
            return Err(Error::Config("triangle grid needs at least 10 distinct positive separations".into()));
        }
        if !(self.triangles.step > 0.0 && self.triangles.top_margin > 0.0) {
            return Err(Error::Config("triangle step and top margin must be positive".into()));
        }
        if self.triangles.third_side_samples < 2 {
            return Err(Error::Config("third side needs at least 2 samples".into()));
        }
        if self.pair_grid.heights.is_empty() || self.pair_grid.ratios.iter().any(|&u| !(u > 0.0)) {
            return Err(Error::Config("pair grid needs heights and positive ratios".into()));
        }
        if self.divergence.ratios.len() < 2 || !(self.divergence.span > 0.0) {
            return Err(Error::Config("divergence schedule needs at least two ratios and a positive span".into()));
        }
        if self.pairs == 0 {
            return Err(Error::Config("need at least one verification pair".into()));
        }
        if !(self.height_tolerance > 0.0) {
            return Err(Error::Config("height tolerance must be positive".into()));
        }
        if matches!(self.verify_domain, SampleDomain::Hull(_)) && n != 2 {
            return Err(Error::Config("hull verification domains need n = 2".into()));
        }
        Ok(())
    }
}

/// The hypothesis constants as estimated on the grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisEstimates {
    pub delta: f64,
    pub epsilon: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub divergence_ok: bool,
}

/// Derived constants of the almost-isometry bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct Constants {
    pub Delta: f64,
    pub C0: f64,
    pub C1: f64,
    pub K1: f64,
    pub K2: f64,
    pub K: f64,
}

/// `Δ = max{3δ, 2R/ε + R}`, `C₁ = 2C₀ + 5Δ + 1`, and `K = max{K₁, K₂}` with
/// `K₁ = 2(C₀ + C₁) + 2R/ε + R + 2` and `K₂ = 7Δ + 4C₀ + 2δ + 2R/ε + R + 2`.
pub fn compute_k(est: &HypothesisEstimates, c0: f64) -> Result<Constants> {
    if !est.divergence_ok {
        return Err(Error::Certification("divergence check failed; no constant K".into()));
    }
    let (delta, eps, r) = (est.delta, est.epsilon, est.r);
    let spread = 2.0 * r / eps + r;
    let big_delta = delta_constant(delta, eps, r);
    let c1 = 2.0 * c0 + 5.0 * big_delta + 1.0;
    let k1 = 2.0 * (c0 + c1) + spread + 2.0;
    let k2 = 7.0 * big_delta + 4.0 * c0 + 2.0 * delta + spread + 2.0;
    Ok(Constants {
        Delta: big_delta,
        C0: c0,
        C1: c1,
        K1: k1,
        K2: k2,
        K: k1.max(k2),
    })
}

/// `Δ = max{3δ, 2R/ε + R}`.
pub fn delta_constant(delta: f64, epsilon: f64, r: f64) -> f64 {
    (3.0 * delta).max(2.0 * r / epsilon + r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grids {
    pub triangles: TriangleGrid,
    pub pair_grid: PairGrid,
    pub divergence: DivergenceSchedule,
    pub verify_domain: SampleDomain,
    pub seed: u64,
    pub height_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witnesses {
    pub delta: DeltaWitness,
    #[serde(rename = "R")]
    pub r: EpsRWitness,
    pub c0: TriangleReport,
    pub sup_discrepancy: Option<PairRecord>,
}

/// Everything the certifier measured and derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct Certificate {
    pub delta: f64,
    pub epsilon: f64,
    pub R: f64,
    pub C0: f64,
    pub Delta: f64,
    pub C1: f64,
    pub K1: f64,
    pub K2: f64,
    pub K: f64,
    pub sup_discrepancy: f64,
    pub pairs: usize,
    pub pass: bool,
    /// How the two proof-case constants are combined.
    pub aggregation: String,
    /// The divergence property is checked on a finite schedule only.
    pub empirical: bool,
    /// Change in the slimness estimate of the witness triangle when its
    /// sides are truncated 2 units higher.
    pub truncation_residual: f64,
    pub divergence: DivergenceReport,
    pub triangles: Vec<TriangleReport>,
    pub grids: Grids,
    pub witnesses: Witnesses,
    pub threads: usize,
}

/// Outcome of a pipeline run that did not produce a certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refusal {
    pub stage: String,
    pub reason: String,
    pub estimates: Option<HypothesisEstimates>,
}

/// A certificate, or the stage at which certification failed.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub result: std::result::Result<Certificate, Refusal>,
    /// Per-pair records of the verification stage, when it ran.
    pub records: Vec<PairRecord>,
}

/// Runs the whole pipeline: δ, (ε, R) with its recheck, divergence, Δ,
/// displaced heights and C₀, K, then random-pair verification.
///
/// Configuration and range errors are returned as `Err`; failed hypotheses
/// come back as an [`Outcome`] with a [`Refusal`].
pub fn certify<P: Pencil>(pencil: &P, config: &CertifierConfig) -> Result<Outcome>
where
    P::Target: Sync,
{
    let n = pencil.domain_dim() + 1;
    config.validate(n)?;
    let refuse = |stage: &str, reason: String, estimates: Option<HypothesisEstimates>| Outcome {
        result: Err(Refusal {
            stage: stage.into(),
            reason,
            estimates,
        }),
        records: Vec::new(),
    };

    let delta = estimate_delta(pencil, &config.triangles)?;
    log::info!("delta = {:.6} (triangle {:?})", delta.delta, delta.witness);

    let eps_r = match estimate_eps_r(pencil, &config.pair_grid, config.epsilon) {
        Ok(v) => v,
        Err(Error::Certification(reason)) => return Ok(refuse("epsilon_R", reason, None)),
        Err(e) => return Err(e),
    };
    log::info!("R = {:.6} for epsilon = {}", eps_r.r, config.epsilon);

    let divergence = check_divergence(pencil, &config.divergence, eps_r.r)?;
    log::info!("divergence ok = {}", divergence.ok);
    let estimates = HypothesisEstimates {
        delta: delta.delta,
        epsilon: config.epsilon,
        r: eps_r.r,
        divergence_ok: divergence.ok,
    };
    if !divergence.ok {
        let reason = format!("distances along the divergence schedule do not grow: {}", divergence.reason);
        return Ok(refuse("divergence", reason, Some(estimates)));
    }

    let big_delta = delta_constant(estimates.delta, estimates.epsilon, estimates.r);
    let c0 = estimate_c0(pencil, &config.triangles, big_delta, config.height_tolerance)?;
    if let Some(bad) = c0.triangles.iter().find(|t| !t.below_midpoint || !t.slim_above) {
        let reason = format!("claim check failed on triangle {bad:?}");
        return Ok(refuse("displaced_height", reason, Some(estimates)));
    }
    let constants = compute_k(&estimates, c0.c0)?;
    log::info!("C0 = {:.6}, Delta = {:.6}, K = {:.6}", c0.c0, constants.Delta, constants.K);

    let verification = verify_almost_isometry(pencil, &config.verify_domain, config.pairs, config.seed)?;
    let residual = slim::truncation_residual(pencil, &config.triangles, &delta.witness)?;

    let certificate = Certificate {
        delta: estimates.delta,
        epsilon: estimates.epsilon,
        R: estimates.r,
        C0: constants.C0,
        Delta: constants.Delta,
        C1: constants.C1,
        K1: constants.K1,
        K2: constants.K2,
        K: constants.K,
        sup_discrepancy: verification.sup,
        pairs: verification.records.len(),
        pass: verification.sup <= constants.K,
        aggregation: "K = max(K1, K2); K1 = 2(C0 + C1) + 2R/epsilon + R + 2, K2 = 7 Delta + 4 C0 + 2 delta + 2R/epsilon + R + 2".into(),
        empirical: true,
        truncation_residual: residual,
        divergence,
        triangles: c0.triangles.clone(),
        grids: Grids {
            triangles: config.triangles.clone(),
            pair_grid: config.pair_grid.clone(),
            divergence: config.divergence.clone(),
            verify_domain: config.verify_domain,
            seed: config.seed,
            height_tolerance: config.height_tolerance,
        },
        witnesses: Witnesses {
            delta: delta.witness,
            r: eps_r.witness,
            c0: c0.witness,
            sup_discrepancy: verification.witness.clone(),
        },
        threads: rayon::current_num_threads(),
    };
    Ok(Outcome {
        result: Ok(certificate),
        records: verification.records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(delta: f64, r: f64) -> HypothesisEstimates {
        HypothesisEstimates {
            delta,
            epsilon: 1.0,
            r,
            divergence_ok: true,
        }
    }

    #[test]
    fn k_for_tree_like_idealization() {
        let c = compute_k(&est(0.0, 0.0), 0.0).unwrap();
        assert_eq!(c.Delta, 0.0);
        assert_eq!(c.C1, 1.0);
        assert_eq!(c.K1, 4.0);
        assert_eq!(c.K, 4.0);
    }

    #[test]
    fn k_for_unit_constants() {
        let c = compute_k(&est(1.0, 1.0), 2.0).unwrap();
        assert_eq!(c.Delta, 3.0);
        assert_eq!(c.C1, 20.0);
        assert_eq!(c.K1, 49.0);
        assert_eq!(c.K2, 36.0);
        assert_eq!(c.K, 49.0);
    }

    #[test]
    fn no_k_without_divergence() {
        let mut e = est(0.0, 0.0);
        e.divergence_ok = false;
        assert!(compute_k(&e, 0.0).is_err());
    }

    #[test]
    fn mesh_regions_cover_the_grids() {
        let cfg = CertifierConfig::mesh_defaults(0.05);
        let pieces = cfg.mesh_regions().unwrap();
        assert_eq!(pieces.len(), 12 + 11 * 12 + 1 + 1);
        assert!(CertifierConfig::exact_defaults().mesh_regions().is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = CertifierConfig::exact_defaults();
        assert!(cfg.validate(2).is_ok());
        cfg.triangles.separations.truncate(5);
        assert!(cfg.validate(2).is_err());
        let mut cfg = CertifierConfig::exact_defaults();
        cfg.epsilon = 0.0;
        assert!(cfg.validate(2).is_err());
    }
}
