//! The `pencil` command line: `certify`, `probe` and `mesh`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::certifier::{certify, probe_sweep, CertifierConfig, Depth, Outcome, PairRecord, SweepReport};
use crate::config::{ModelKind, SceneConfig};
use crate::error::{Error, Result};
use crate::hyperbolic::HPoint;
use crate::mesh::MeshSpace;
use crate::pencil::{constant_pencil, CoordinatePencil, LeafPencil, Pencil};
use crate::space::exact_hyperbolic_target;
use crate::warped::{default_stencil, warped_cover_target, LatticeSpec, Region, WarpedModel};

const CSV_HELP: &str = "\
CSV outputs (floats with 12 significant digits):
  certify  pairs.csv       p_x1..p_x{n-1}, p_t, q_x1..q_x{n-1}, q_t, d_hyp, d_target, discrepancy
           triangles.csv   separation, midpoint_height, displaced_height, gap_at_height, below_midpoint, slim_above
           divergence.csv  u, t, d_target
  probe    probe.csv       box_size, points, delta_estimate

Exit codes: 0 pass, 1 certified failure, 2 usage or configuration error.";

#[derive(Debug, Parser)]
#[command(name = "pencil", version, about = "Certify almost-isometric pencils of vertical geodesics", after_help = CSV_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Scene configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads; results are byte-identical only with 1.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// The ε of the small-separation hypothesis.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,

    /// Truncation depth of the vertical triangles.
    #[arg(long = "depth-L", global = true)]
    pub depth_l: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the hypothesis constants, derive K and verify the bound.
    Certify,
    /// Four-point hyperbolicity sweep over growing boxes.
    Probe,
    /// Build and export a mesh, with a cross-check against the exact oracle.
    Mesh,
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> u8 {
    let threads = cli.threads.unwrap_or(0);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {threads} threads: {e}");
            return 2;
        }
    };
    match pool.install(|| dispatch(cli)) {
        Ok(code) => code,
        Err(Error::Certification(msg)) => {
            eprintln!("certification failed: {msg}");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(cli: &Cli) -> Result<u8> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config PATH is required".into()))?;
    let scene = SceneConfig::load(path)?;
    fs::create_dir_all(&cli.out)?;
    match cli.command {
        Command::Certify => cmd_certify(cli, &scene),
        Command::Probe => cmd_probe(cli, &scene),
        Command::Mesh => cmd_mesh(cli, &scene),
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.11e}")
}

fn certifier_config(cli: &Cli, scene: &SceneConfig, base: CertifierConfig) -> CertifierConfig {
    let mut cfg = scene.certifier.apply(base);
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(eps) = cli.epsilon {
        cfg.epsilon = eps;
    }
    if let Some(l) = cli.depth_l {
        cfg.triangles.depth = match cfg.triangles.depth {
            Depth::Absolute { .. } => Depth::Absolute { l },
            Depth::BelowMidpoint { .. } => Depth::BelowMidpoint { d: l },
        };
    }
    cfg
}

fn lattice(scene: &SceneConfig, h: f64, base_dim: usize, regions: Vec<Region>) -> LatticeSpec {
    let mut spec = LatticeSpec::new(h, base_dim, regions).with_stencil(scene.stencil.unwrap_or(default_stencil(h)));
    if let Some(mu) = scene.thickening {
        spec = spec.with_thickening(mu);
    }
    spec
}

fn cover_model(scene: &SceneConfig, spec: LatticeSpec) -> Result<WarpedModel> {
    let surface = scene.surface()?;
    surface.check_gauss_bonnet()?;
    log::info!(
        "surface: {} squares, genus {}, {} cone points",
        surface.num_squares(),
        surface.genus()?,
        surface.cone_points().len()
    );
    let spec = spec.with_width_cap(scene.width.unwrap_or(0.9));
    warped_cover_target(&surface, &scene.leaf()?, scene.sheets.unwrap_or(3), spec)
}

fn cmd_certify(cli: &Cli, scene: &SceneConfig) -> Result<u8> {
    match scene.model {
        ModelKind::ExactHyperbolic | ModelKind::Constant => {
            let n = scene.dim.unwrap_or(2);
            let m = scene.target_dim.unwrap_or(n);
            let target = exact_hyperbolic_target(m)?;
            let cfg = certifier_config(cli, scene, CertifierConfig::exact_defaults());
            if scene.model == ModelKind::Constant {
                let origin = HPoint::new(vec![0.0; m - 1], 0.0)?;
                report_certificate(cli, &constant_pencil(&target, n - 1, origin), &cfg)
            } else {
                report_certificate(cli, &CoordinatePencil::new(target, n)?, &cfg)
            }
        }
        ModelKind::WarpedPlane | ModelKind::WarpedCover => {
            let h = scene.resolution()?;
            let cfg = certifier_config(cli, scene, CertifierConfig::mesh_defaults(h));
            let regions = cfg.mesh_regions()?.into_iter().map(Region::Hull).collect();
            let model = if scene.model == ModelKind::WarpedPlane {
                WarpedModel::plane(lattice(scene, h, 1, regions))?
            } else {
                cover_model(scene, lattice(scene, h, 2, regions))?
            };
            log::info!(
                "mesh: {} vertices, {} edges",
                model.mesh().num_vertices(),
                model.mesh().num_edges()
            );
            report_certificate(cli, &LeafPencil::new(&model), &cfg)
        }
        ModelKind::Euclidean | ModelKind::Star => Err(Error::Config(format!(
            "model {:?} has no pencil; use `pencil probe`",
            scene.model
        ))),
    }
}

fn write_pairs(path: &Path, records: &[PairRecord], dim: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = Vec::new();
    for side in ["p", "q"] {
        header.extend((1..=dim).map(|i| format!("{side}_x{i}")));
        header.push(format!("{side}_t"));
    }
    header.extend(["d_hyp", "d_target", "discrepancy"].map(String::from));
    w.write_record(&header)?;
    for r in records {
        let row: Vec<String> = r
            .p
            .iter()
            .chain(&r.q)
            .chain([&r.d_hyp, &r.d_target, &r.discrepancy])
            .map(|&v| fmt(v))
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn report_certificate<P: Pencil>(cli: &Cli, pencil: &P, cfg: &CertifierConfig) -> Result<u8>
where
    P::Target: Sync,
{
    let Outcome { result, records } = certify(pencil, cfg)?;
    match result {
        Ok(cert) => {
            fs::write(cli.out.join("certificate.json"), serde_json::to_string_pretty(&cert)?)?;
            write_pairs(&cli.out.join("pairs.csv"), &records, pencil.domain_dim())?;
            let mut w = csv::Writer::from_path(cli.out.join("triangles.csv"))?;
            w.write_record([
                "separation",
                "midpoint_height",
                "displaced_height",
                "gap_at_height",
                "below_midpoint",
                "slim_above",
            ])?;
            for t in &cert.triangles {
                w.write_record([
                    fmt(t.separation),
                    fmt(t.midpoint_height),
                    fmt(t.displaced_height),
                    fmt(t.gap_at_height),
                    t.below_midpoint.to_string(),
                    t.slim_above.to_string(),
                ])?;
            }
            w.flush()?;
            let mut w = csv::Writer::from_path(cli.out.join("divergence.csv"))?;
            w.write_record(["u", "t", "d_target"])?;
            for &(u, t, d) in &cert.divergence.rows {
                w.write_record([fmt(u), fmt(t), fmt(d)])?;
            }
            w.flush()?;
            println!(
                "delta = {}\nepsilon = {}\nR = {}\nC0 = {}\nDelta = {}\nK = {}\nsup_discrepancy = {}\npairs = {}\npass = {}",
                fmt(cert.delta),
                fmt(cert.epsilon),
                fmt(cert.R),
                fmt(cert.C0),
                fmt(cert.Delta),
                fmt(cert.K),
                fmt(cert.sup_discrepancy),
                cert.pairs,
                cert.pass
            );
            if cert.pass {
                Ok(0)
            } else {
                eprintln!(
                    "certification failed: sup discrepancy exceeds K at {:?}",
                    cert.witnesses.sup_discrepancy
                );
                Ok(1)
            }
        }
        Err(refusal) => {
            fs::write(cli.out.join("refusal.json"), serde_json::to_string_pretty(&refusal)?)?;
            println!("pass = false");
            eprintln!("certification failed at stage {}: {}", refusal.stage, refusal.reason);
            Ok(1)
        }
    }
}

/// Seeded points of `[−1, 1]^dim`, rescaled per box size so the sweep
/// compares the same configuration at every scale.
fn unit_points(count: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect())
        .collect()
}

fn cmd_probe(cli: &Cli, scene: &SceneConfig) -> Result<u8> {
    let probe = scene
        .probe
        .clone()
        .ok_or_else(|| Error::Config("probe needs a `probe` section".into()))?;
    let seed = cli.seed.unwrap_or(probe.seed);
    let max_size = probe.sizes.iter().copied().fold(0.0, f64::max);
    let report: SweepReport = match scene.model {
        ModelKind::Euclidean => {
            let spacing = scene.require(scene.spacing, "spacing")?;
            let grid = MeshSpace::euclidean_grid(max_size, spacing, scene.stencil.unwrap_or(4))?;
            let unit = unit_points(probe.points, 2, seed);
            let points_for =
                |b: f64| unit.iter().map(|u| grid.grid_vertex(max_size, b * u[0], b * u[1])).collect();
            probe_sweep(&grid, &probe.sizes, points_for, probe.quadruples, seed)?
        }
        ModelKind::Star => {
            let rays = scene.require(scene.rays, "rays")?;
            let length = scene.require(scene.length, "length")?;
            let star = MeshSpace::star(rays, length)?;
            let points_for = |b: f64| {
                let reach = (b.max(0.0) as usize).min(length);
                let mut pts = vec![0];
                for r in 0..rays {
                    pts.extend((1..=reach).map(|k| MeshSpace::star_vertex(length, r, k)));
                }
                Ok(pts)
            };
            probe_sweep(&star, &probe.sizes, points_for, probe.quadruples, seed)?
        }
        ModelKind::ExactHyperbolic => {
            let m = scene.target_dim.or(scene.dim).unwrap_or(2);
            let target = exact_hyperbolic_target(m)?;
            let unit = unit_points(probe.points, m, seed);
            let points_for = |b: f64| {
                unit.iter()
                    .map(|u| HPoint::new(u[..m - 1].iter().map(|c| b * c).collect(), b * u[m - 1]))
                    .collect()
            };
            probe_sweep(&target, &probe.sizes, points_for, probe.quadruples, seed)?
        }
        other => return Err(Error::Config(format!("probe does not support model {other:?}"))),
    };
    let mut w = csv::Writer::from_path(cli.out.join("probe.csv"))?;
    w.write_record(["box_size", "points", "delta_estimate"])?;
    for row in &report.rows {
        w.write_record([fmt(row.size), row.points.to_string(), fmt(row.delta)])?;
        println!("{} {} {}", fmt(row.size), row.points, fmt(row.delta));
    }
    w.flush()?;
    fs::write(cli.out.join("probe.json"), serde_json::to_string_pretty(&report)?)?;
    println!("non_hyperbolic = {}", report.non_hyperbolic);
    Ok(if report.non_hyperbolic { 1 } else { 0 })
}

fn cmd_mesh(cli: &Cli, scene: &SceneConfig) -> Result<u8> {
    let (mesh, model) = match scene.model {
        ModelKind::WarpedPlane | ModelKind::WarpedCover => {
            let h = scene.resolution()?;
            let b = scene.require(scene.domain_box, "box")?;
            let region = Region::Box {
                half_width: b.half_width,
                t_min: b.t_min,
                t_max: b.t_max,
            };
            let model = if scene.model == ModelKind::WarpedPlane {
                WarpedModel::plane(lattice(scene, h, scene.base_dim.unwrap_or(1), vec![region]))
            } else {
                cover_model(scene, lattice(scene, h, 2, vec![region]))
            }
            .map_err(|e| Error::Config(format!("mesh domain: {e}")))?;
            (model.mesh().clone(), Some(model))
        }
        ModelKind::Euclidean => {
            let b = scene.require(scene.domain_box, "box")?;
            let spacing = scene.require(scene.spacing, "spacing")?;
            (MeshSpace::euclidean_grid(b.half_width, spacing, scene.stencil.unwrap_or(4))?, None)
        }
        ModelKind::Star => {
            let rays = scene.require(scene.rays, "rays")?;
            (MeshSpace::star(rays, scene.require(scene.length, "length")?)?, None)
        }
        other => return Err(Error::Config(format!("model {other:?} has no mesh"))),
    };
    mesh.write_json(&cli.out.join("mesh.json"))?;
    println!("vertices = {}\nedges = {}", mesh.num_vertices(), mesh.num_edges());
    if let (Some(model), Some(check)) = (&model, scene.cross_check) {
        let seed = cli.seed.unwrap_or(check.seed);
        let report = model.cross_check(&check.safe_box, check.pairs, seed)?;
        println!(
            "cross_check pairs = {}\nmax_relative_error = {}\nmean_relative_error = {}",
            report.pairs,
            fmt(report.max_relative_error),
            fmt(report.mean_relative_error)
        );
        fs::write(cli.out.join("cross_check.json"), serde_json::to_string_pretty(&report)?)?;
    }
    Ok(0)
}
