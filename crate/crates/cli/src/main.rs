//! `ddm`: discrepancy evaluation, registration, template fitting and scene
//! flow from the command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ddm_core::config::TaskConfigFile;
use ddm_core::ddf::generate_reference_points;
use ddm_core::deform::{fit_template, register_nonrigid};
use ddm_core::eval::{
    flow_metrics, fscore, normal_consistency, surface_samples, v2v, vertex_rmse, EvalReport, RegistrationError,
    FLOW_CONVENTION,
};
use ddm_core::flow::estimate_scene_flow;
use ddm_core::geom::{PointCloud, Surface, TriangleMesh};
use ddm_core::io::{load_surface, save_surface};
use ddm_core::metric::ddm;
use ddm_core::optim::OptimTrace;
use ddm_core::records::{FlowRecord, Provenance, TransformRecord};
use ddm_core::rigid::register_rigid;
use ddm_core::{DdmError, Result};

#[derive(Parser)]
#[command(name = "ddm", version, about = "Directional-distance shape discrepancy and the solvers built on it")]
struct Cli {
    /// Seed for every random choice (reference points, graph sampling).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "DDM_THREADS")]
    threads: Option<usize>,
    /// TOML configuration; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the discrepancy between two surfaces.
    Eval {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Also print per-reference-point statistics.
        #[arg(long)]
        verbose: bool,
    },
    /// Rigidly align a source cloud to a target; writes a JSON transform.
    RegisterRigid {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Deform a source mesh onto a target mesh with an embedded graph.
    RegisterNonrigid {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a template mesh to a target mesh, keeping its connectivity.
    FitTemplate {
        #[arg(long)]
        init: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate per-point scene flow from a source to a target cloud.
    SceneFlow {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a result against ground truth.
    Metrics {
        #[arg(long, value_enum)]
        kind: MetricKind,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Print JSON instead of `key = value` lines.
        #[arg(long)]
        json: bool,
        /// Samples per mesh for surface scores.
        #[arg(long, default_value_t = 50_000)]
        samples: usize,
        /// Translation threshold for rigid success, in model units.
        #[arg(long, default_value_t = 0.3)]
        te_thresh: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricKind {
    Rigid,
    Mesh,
    Flow,
    Surface,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                DdmError::NumericalAbort { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(DdmError::InvalidInput("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| DdmError::InvalidInput(e.to_string()))?;
    }
    let mut cfg = match &cli.config {
        Some(path) => TaskConfigFile::load(path)?,
        None => TaskConfigFile::default(),
    };
    cfg.set_seed(cli.seed);
    let provenance = |trace: &OptimTrace, inputs: &[&PathBuf]| -> Result<Provenance> {
        Ok(Provenance {
            seed: cli.seed,
            config_hash: cfg.hash()?,
            iterations: trace.iterations,
            final_value: trace.final_value,
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        })
    };

    match &cli.command {
        Command::Eval { a, b, verbose } => {
            let (sa, sb) = (load_surface(a)?, load_surface(b)?);
            let refs = generate_reference_points(&sa, &cfg.eval.refgen, Some(&sb))?;
            let value = ddm(&sa, &sb, &refs, &cfg.eval.metric)?;
            println!("{}", value.value);
            if *verbose {
                let terms = value.per_point.unwrap_or_default();
                let n = terms.len() as f64;
                let mean_d = terms.iter().map(|t| t.0).sum::<f64>() / n;
                let max_d = terms.iter().map(|t| t.0).fold(0.0, f64::max);
                let mean_s = terms.iter().map(|t| t.1).sum::<f64>() / n;
                println!("reference_points = {}", terms.len());
                println!("mean_d = {mean_d}");
                println!("max_d = {max_d}");
                println!("mean_confidence = {mean_s}");
            }
        }
        Command::RegisterRigid { src, tgt, out } => {
            let (s, t) = (as_cloud(load_surface(src)?), as_cloud(load_surface(tgt)?));
            let (transform, trace) = register_rigid(&s, &t, &cfg.rigid)?;
            TransformRecord::new(&transform, Some(provenance(&trace, &[src, tgt])?)).save(out)?;
        }
        Command::RegisterNonrigid { src, tgt, out } => {
            let (s, t) = (as_mesh(load_surface(src)?, src)?, as_mesh(load_surface(tgt)?, tgt)?);
            let (_, deformed, _) = register_nonrigid(&s, &t, &cfg.nonrigid)?;
            save_surface(&deformed.into(), out)?;
        }
        Command::FitTemplate { init, tgt, out } => {
            let (s, t) = (as_mesh(load_surface(init)?, init)?, as_mesh(load_surface(tgt)?, tgt)?);
            let (fitted, _) = fit_template(&s, &t, &cfg.template)?;
            save_surface(&fitted.into(), out)?;
        }
        Command::SceneFlow { src, tgt, out } => {
            let (s, t) = (as_cloud(load_surface(src)?), as_cloud(load_surface(tgt)?));
            let (flow, trace) = estimate_scene_flow(&s, &t, &cfg.flow)?;
            FlowRecord::new(src.display().to_string(), &flow, Some(provenance(&trace, &[src, tgt])?)).save(out)?;
        }
        Command::Metrics {
            kind,
            pred,
            gt,
            json,
            samples,
            te_thresh,
        } => {
            let report = metrics(*kind, pred, gt, *samples, *te_thresh, cli.seed)?;
            if *json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.to_key_value());
            }
        }
    }
    Ok(())
}

/// Meshes contribute their vertices.
fn as_cloud(s: Surface) -> PointCloud {
    match s {
        Surface::PointCloud(c) => c,
        Surface::TriangleMesh(m) => PointCloud { points: m.vertices },
    }
}

fn as_mesh(s: Surface, path: &Path) -> Result<TriangleMesh> {
    match s {
        Surface::TriangleMesh(m) => Ok(m),
        Surface::PointCloud(_) => Err(DdmError::InvalidInput(format!(
            "{} has no faces; a triangle mesh is required",
            path.display()
        ))),
    }
}

fn metrics(kind: MetricKind, pred: &Path, gt: &Path, samples: usize, te_thresh: f64, seed: u64) -> Result<EvalReport> {
    let mut report = EvalReport::default();
    match kind {
        MetricKind::Rigid => {
            let e = RegistrationError::between(
                &TransformRecord::load(pred)?.transform()?,
                &TransformRecord::load(gt)?.transform()?,
            );
            report.notes.push(format!("success: RE < 15 degrees and TE < {te_thresh}"));
            report.insert("re_deg", e.re);
            report.insert("te", e.te);
            report.insert("success", f64::from(u8::from(e.succeeds(15.0, te_thresh))));
        }
        MetricKind::Mesh => {
            let (p, g) = (load_surface(pred)?, load_surface(gt)?);
            report.insert("rmse", vertex_rmse(p.positions(), g.positions())?);
            report.insert("v2v", v2v(p.positions(), g.positions())?);
        }
        MetricKind::Flow => {
            let (p, g) = (FlowRecord::load(pred)?.field(), FlowRecord::load(gt)?.field());
            let m = flow_metrics(&p.delta, &g.delta)?;
            report.notes.push(FLOW_CONVENTION.to_string());
            report.insert("epe3d", m.epe);
            report.insert("acc_strict", m.acc_strict);
            report.insert("acc_relax", m.acc_relax);
            report.insert("outliers", m.outliers);
        }
        MetricKind::Surface => {
            let (p, g) = (load_surface(pred)?, load_surface(gt)?);
            let sp = surface_samples(&p, samples, seed)?;
            let sg = surface_samples(&g, samples, seed.wrapping_add(1))?;
            report.notes.push("F-score thresholds are absolute lengths".into());
            for t in [0.005, 0.01] {
                report.insert(&format!("fscore@{t}"), fscore(&sp, &sg, t)?);
            }
            if let (Some(pm), Some(gm)) = (p.as_mesh(), g.as_mesh()) {
                report.insert("normal_consistency", normal_consistency(pm, gm, samples, seed)?);
            }
        }
    }
    Ok(report)
}
