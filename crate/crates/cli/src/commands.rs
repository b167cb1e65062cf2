use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde_json::{json, Value};
use stableplace_core::annotate::{annotate, AnnotationRecord, Provenance};
use stableplace_core::baselines::{bbf, chsa, rpf, Method, PlacementProposal};
use stableplace_core::bench::{evaluate_placement, run_benchmark, BenchObject};
use stableplace_core::geom::{PointCloud, RigidPose, TriMesh};
use stableplace_core::io::{cloud_bytes, mesh_bytes, read_cloud, read_mesh, write_atomic};
use stableplace_core::planner::{planner, RankedPlanes, ScoredCloud};
use stableplace_core::seed::derive;
use stableplace_core::settle::{SettleModel, TableConfig};
use stableplace_core::shapes::desk_corpus;
use stableplace_core::viewsynth::{augment, oracle_scored, render_random_view, sample_fixed, transfer_support, AugmentConfig};

use crate::config::ToolConfig;
use crate::{AnnotateArgs, BenchArgs, Cli, Command, MakeCorpusArgs, PlaceArgs, SynthArgs};

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => ToolConfig::load(p)?,
        None => ToolConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Ok(v) = std::env::var("STABLEPLACE_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| anyhow!("STABLEPLACE_THREADS must be a positive integer, got `{v}`"))?;
        if n == 0 {
            bail!("STABLEPLACE_THREADS must be at least 1");
        }
        cfg.threads = Some(n);
    }
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring worker pool")?;
    }
    match cli.command {
        Command::Annotate(a) => cmd_annotate(&cfg, a),
        Command::Place(a) => cmd_place(&cfg, a),
        Command::SynthView(a) => cmd_synth(&cfg, a),
        Command::Bench(a) => cmd_bench(cfg, a),
        Command::MakeCorpus(a) => cmd_make_corpus(a),
    }
}

fn provenance(cfg: &ToolConfig) -> Provenance {
    let mut p = Provenance::new(cfg.seed);
    p.config_hash = cfg.hash();
    p.config = Some(cfg.to_value());
    p.generated_at = SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| format!("unix:{}", d.as_secs()));
    p
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("object").to_string()
}

fn load_mesh(path: &Path) -> Result<TriMesh> {
    read_mesh(path).with_context(|| format!("reading mesh {}", path.display()))
}

fn annotate_mesh(cfg: &ToolConfig, mesh: &TriMesh, id: &str, path: &Path) -> Result<AnnotationRecord> {
    let mut rec = annotate(mesh, id, &path.display().to_string(), &cfg.annotate_params())
        .with_context(|| format!("annotating {}", path.display()))?;
    rec.provenance = provenance(cfg);
    Ok(rec)
}

fn load_annotation(path: &Path) -> Result<AnnotationRecord> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing annotation {}", path.display()))
}

fn annotation_for(cfg: &ToolConfig, mesh: &TriMesh, mesh_path: &Path, given: Option<&Path>) -> Result<AnnotationRecord> {
    match given {
        Some(p) => load_annotation(p),
        None => annotate_mesh(cfg, mesh, &stem(mesh_path), mesh_path),
    }
}

fn cmd_annotate(cfg: &ToolConfig, a: AnnotateArgs) -> Result<()> {
    let records: Vec<Result<(PathBuf, AnnotationRecord)>> = a
        .meshes
        .par_iter()
        .map(|p| {
            let mesh = load_mesh(p)?;
            let rec = annotate_mesh(cfg, &mesh, &stem(p), p)?;
            Ok((a.out.join(format!("{}.json", stem(p))), rec))
        })
        .collect();
    for r in records {
        let (out, rec) = r?;
        write_json(&out, &rec)?;
        tracing::info!(object = %rec.object_id, planes = rec.planes.len(), out = %out.display(), "annotated");
    }
    Ok(())
}

fn plane_json(ranked: &RankedPlanes) -> Value {
    Value::Array(
        ranked
            .planes
            .iter()
            .map(|p| json!({ "model": p.model.coefficients(), "score": p.score, "inliers": p.model.inliers }))
            .collect(),
    )
}

fn cmd_place(cfg: &ToolConfig, a: PlaceArgs) -> Result<()> {
    let cloud = read_cloud(&a.cloud).with_context(|| format!("reading cloud {}", a.cloud.display()))?;
    let mesh = a.mesh.as_deref().map(load_mesh).transpose()?;
    let seed = derive(cfg.seed, &["place", a.method.as_str()]);
    let mut planes = None;
    let proposal: PlacementProposal = match a.method {
        Method::Chsa => chsa(&cloud)?,
        Method::Bbf => bbf(&cloud)?,
        Method::Rpf => rpf(&cloud, &cfg.ransac, seed)?,
        Method::Planner => {
            let scored = if cloud.scores().is_some() {
                cloud.clone()
            } else {
                let (Some(mesh), Some(mesh_path)) = (&mesh, &a.mesh) else {
                    bail!("the planner needs a cloud with a score column, or --mesh for oracle scores");
                };
                let rec = annotation_for(cfg, mesh, mesh_path, a.annotation.as_deref())?;
                let visible = transfer_support(&cloud, mesh, &rec, cfg.bench.transfer_tol, cfg.bench.min_visible_points);
                oracle_scored(&cloud, &visible)?
            };
            let scored = if scored.labels().is_some() { ScoredCloud::from_labels(scored)? } else { ScoredCloud::new(scored, None)? };
            let (p, ranked) = planner(&scored, &cfg.planner_params(), seed)?;
            planes = Some(plane_json(&ranked));
            p
        }
    };
    let rotation = RigidPose::new(proposal.rotation, Default::default()).rotation_row_major();
    let mut out = json!({
        "method": a.method,
        "cloud": a.cloud.display().to_string(),
        "proposal": proposal,
        "rotation": rotation,
    });
    if let Some(p) = planes {
        out["planes"] = p;
    }
    if let Some(mesh) = &mesh {
        let model = SettleModel::new(mesh)?;
        let table = TableConfig::tilted(cfg.bench.tilt_deg, 0.0)?;
        let result = evaluate_placement(&model, Some(&proposal), &table, &cfg.settle, cfg.bench.success_deg)?;
        out["evaluation"] = json!({ "table": table, "result": result });
        if let Some(trace_path) = &a.trace {
            let start = model.resting_pose(table.frame() * proposal.rotation, &table);
            let (_, trace) = model.settle(&start, &table, &cfg.settle)?;
            let mut buf = Vec::new();
            trace.write_jsonl(&mut buf)?;
            write_atomic(trace_path, &buf)?;
        }
    } else if a.trace.is_some() {
        bail!("--trace requires --mesh");
    }
    out["provenance"] = serde_json::to_value(provenance(cfg))?;
    write_json(&a.out, &out)?;
    tracing::info!(method = %a.method, out = %a.out.display(), "proposal written");
    Ok(())
}

fn cmd_synth(cfg: &ToolConfig, a: SynthArgs) -> Result<()> {
    if a.views == 0 {
        bail!("--views must be at least 1");
    }
    let mesh = load_mesh(&a.mesh)?;
    let rec = annotation_for(cfg, &mesh, &a.mesh, a.annotation.as_deref())?;
    let name = stem(&a.mesh);
    let prov = serde_json::to_value(provenance(cfg))?;
    let views: Vec<Result<(PointCloud, Value)>> = (0..a.views)
        .into_par_iter()
        .map(|v| {
            let vs = v.to_string();
            let seed = derive(cfg.seed, &[&name, "view", &vs]);
            let (cam, mut cloud) = render_random_view(&mesh, &cfg.camera, seed)?;
            if let Some(n) = a.points {
                cloud = sample_fixed(&cloud, n, derive(seed, &["sample"]))?;
            }
            if a.augment {
                let aug = AugmentConfig { seed: derive(seed, &["augment"]), ..cfg.augment };
                cloud = augment(&cloud, &aug)?;
            }
            let visible = transfer_support(&cloud, &mesh, &rec, cfg.bench.transfer_tol, cfg.bench.min_visible_points);
            let cloud = oracle_scored(&cloud, &visible)?;
            let sidecar = json!({
                "mesh": a.mesh.display().to_string(),
                "object_id": rec.object_id,
                "view": v,
                "camera": cam,
                "points": cloud.len(),
                "visible_planes": visible,
            });
            Ok((cloud, sidecar))
        })
        .collect();
    for (v, r) in views.into_iter().enumerate() {
        let (cloud, mut sidecar) = r?;
        sidecar["provenance"] = prov.clone();
        let ply = a.out.join(format!("{name}_view{v:03}.ply"));
        write_atomic(&ply, &cloud_bytes(&cloud, &ply)?)?;
        write_json(&a.out.join(format!("{name}_view{v:03}.json")), &sidecar)?;
    }
    tracing::info!(views = a.views, out = %a.out.display(), "views written");
    Ok(())
}

/// Mesh files under `dir`, sorted by path.
fn discover(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).with_context(|| format!("listing {}", d.display()))? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else if matches!(
                p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
                Some("obj" | "ply")
            ) {
                out.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}

fn cmd_bench(mut cfg: ToolConfig, a: BenchArgs) -> Result<()> {
    if let Some(r) = a.regime {
        cfg.bench.regime = r;
    }
    if let Some(t) = a.trials {
        cfg.bench.trials = t;
    }
    cfg.validate()?;
    let paths = discover(&a.corpus)?;
    if paths.is_empty() {
        bail!("no .obj or .ply meshes under {}", a.corpus.display());
    }
    let objects: Vec<Result<BenchObject>> = paths
        .par_iter()
        .map(|p| {
            let mesh = load_mesh(p)?;
            let id = p.strip_prefix(&a.corpus).unwrap_or(p).with_extension("").to_string_lossy().replace('\\', "/");
            let sidecar = p.with_extension("json");
            let annotation = if sidecar.exists() { load_annotation(&sidecar)? } else { annotate_mesh(&cfg, &mesh, &id, p)? };
            Ok(BenchObject { id, mesh, annotation })
        })
        .collect();
    let objects: Vec<BenchObject> = objects.into_iter().collect::<Result<_>>()?;
    let mut report = run_benchmark(&objects, &a.methods, &cfg.bench_config())?;
    report.provenance = Some(provenance(&cfg));
    write_json(&a.out, &report)?;
    write_atomic(&a.out.with_extension("md"), report.to_markdown().as_bytes())?;
    write_atomic(&a.out.with_extension("csv"), report.to_csv().as_bytes())?;
    print!("{}", report.to_markdown());
    tracing::info!(objects = objects.len(), out = %a.out.display(), "benchmark written");
    Ok(())
}

fn cmd_make_corpus(a: MakeCorpusArgs) -> Result<()> {
    for o in desk_corpus() {
        let p = a.out.join(format!("{}.obj", o.id));
        write_atomic(&p, &mesh_bytes(&o.mesh, &p)?)?;
    }
    tracing::info!(out = %a.out.display(), "corpus written");
    Ok(())
}
