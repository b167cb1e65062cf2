//! Acceptance run: every headline criterion, one PASS/FAIL line each.
//! Bench criteria run on a single worker thread.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{Quaternion, Rotation3, UnitQuaternion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use stableplace_core::annotate::{annotate, tilt_verify, AnnotateParams, AnnotationRecord};
use stableplace_core::baselines::{chsa, ChsaAnalysis, Method};
use stableplace_core::bench::{evaluate_placement, run_benchmark, BenchConfig, BenchObject, BenchReport, Regime};
use stableplace_core::geom::{convex_hull, Point3, PointCloud, TriMesh, Vector3};
use stableplace_core::planner::{planner, PlannerParams, ScoredCloud};
use stableplace_core::settle::{instability, SettleModel, SettleParams, TableConfig};
use stableplace_core::shapes;
use stableplace_core::viewsynth::{
    oracle_scored, render_partial, render_random_view, transfer_support, CameraConfig, VirtualCamera,
};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg.into()) }
}

fn within_budget(elapsed: Duration, budget_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < budget_s, format!("took {:.2}s, budget {budget_s}s", elapsed.as_secs_f64()))
}

fn angle_deg(a: &Vector3, b: &Vector3) -> f64 {
    (a.normalize().dot(&b.normalize())).clamp(-1.0, 1.0).acos().to_degrees()
}

fn geometry_suite() -> Check {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let sizes = Uniform::new_inclusive(4usize, 200).unwrap();
    let coord = Uniform::new(-1.0, 1.0).unwrap();
    for case in 0..500 {
        let n = sizes.sample(&mut rng);
        let pts: Vec<Point3> =
            (0..n).map(|_| Point3::new(coord.sample(&mut rng), coord.sample(&mut rng), coord.sample(&mut rng))).collect();
        let hull = convex_hull(&pts).map_err(|e| format!("case {case}: {e}"))?;
        for (i, f) in hull.faces.iter().enumerate() {
            let nrm = hull.face_cross(i).normalize();
            let o = hull.vertices[f[0]];
            if let Some(p) = pts.iter().find(|p| (*p - o).dot(&nrm) > 1e-9) {
                return Err(format!("case {case}: point {p:?} outside face {i}"));
            }
        }
        let again = convex_hull(&hull.vertices).map_err(|e| format!("case {case}: rehull {e}"))?;
        let key = |m: &TriMesh| {
            let mut v: Vec<[u64; 3]> = m.vertices.iter().map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]).collect();
            v.sort_unstable();
            v
        };
        ensure(key(&again) == key(&hull), format!("case {case}: hull of hull changed vertex set"))?;
        let (v1, v2) = (hull.mass_properties().unwrap().volume, again.mass_properties().unwrap().volume);
        ensure((v1 - v2).abs() <= 1e-12 * v1.max(1.0), format!("case {case}: volume {v1} vs {v2}"))?;
    }
    let cube = shapes::cuboid(1.0, 1.0, 1.0).mass_properties().map_err(|e| e.to_string())?;
    ensure((cube.volume - 1.0).abs() <= 1e-9 && cube.com.coords.norm() <= 1e-9, format!("cube {cube:?}"))?;
    // L profile [0,2]x[0,1] ∪ [0,1]x[1,2], depth 1: volume 3, COM (5/6, 5/6, 1/2).
    let l = shapes::extrude(&[[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]], 0.0, 1.0);
    let mp = l.mass_properties().map_err(|e| e.to_string())?;
    let want = Point3::new(5.0 / 6.0, 5.0 / 6.0, 0.5);
    ensure((mp.volume - 3.0).abs() <= 1e-9 && (mp.com - want).norm() <= 1e-9, format!("L-prism {mp:?}"))?;
    within_budget(t.elapsed(), 10.0)?;
    Ok(format!("500 clouds contained and idempotent, cube and L-prism exact, {:.2}s", t.elapsed().as_secs_f64()))
}

fn instability_suite() -> Check {
    let run = |m: &[f64], l: usize| -> Vec<f64> { (1..=m.len()).map(|i| instability(m, l, i).unwrap()).collect() };
    let cases: [(&[f64], usize, &[f64]); 4] = [
        (&[4.0, 2.0, 0.0, 0.0], 2, &[4.0, 3.0, 1.0, 0.0]),
        (&[3.0, 3.0, 3.0, 0.0, 0.0, 0.0], 3, &[3.0, 3.0, 3.0, 2.0, 1.0, 0.0]),
        (&[6.0, 0.0, 0.0], 5, &[6.0, 3.0, 2.0]),
        (&[1.0, 2.0, 3.0, 4.0], 1, &[1.0, 2.0, 3.0, 4.0]),
    ];
    for (m, l, want) in cases {
        let got = run(m, l);
        ensure(got == want, format!("{m:?} L={l}: got {got:?}, want {want:?}"))?;
    }
    Ok("windowed instability exact on both branches, [4,2,0,0]/L=2 -> [4,3,1,0]".into())
}

fn rod_toppling() -> Check {
    let t = Instant::now();
    let r = 0.01;
    let params = SettleParams::default();
    let mut report = Vec::new();
    for (ratio, should_stand) in [(12.0, false), (10.0, true)] {
        let model = SettleModel::new(&shapes::cylinder(r, ratio * r, 32)).map_err(|e| e.to_string())?;
        for k in 0..8 {
            let table = TableConfig::tilted(10.0, 45.0 * k as f64).unwrap();
            let start = model.resting_pose(table.frame(), &table);
            let (o, _) = model.settle(&start, &table, &params).map_err(|e| e.to_string())?;
            let stood = o.stable && o.topples == 0;
            ensure(stood == should_stand, format!("h={ratio}r azimuth {}: stable={} topples={}", 45 * k, o.stable, o.topples))?;
        }
        report.push(format!("h={ratio}r {}", if should_stand { "stands" } else { "topples" }));
    }
    within_budget(t.elapsed(), 1.0)?;
    Ok(format!("{} at all 8 azimuths, {:.3}s", report.join(", "), t.elapsed().as_secs_f64()))
}

fn cube_annotation() -> Check {
    let t = Instant::now();
    let params = AnnotateParams::default();
    let cube = shapes::cuboid(1.0, 1.0, 1.0);
    let rec = annotate(&cube, "cube", "cube", &params).map_err(|e| e.to_string())?;
    ensure(rec.planes.len() == 6, format!("cube: {} planes", rec.planes.len()))?;
    let axes = [Vector3::x(), -Vector3::x(), Vector3::y(), -Vector3::y(), Vector3::z(), -Vector3::z()];
    for a in &axes {
        let best = rec.planes.iter().map(|p| angle_deg(&p.normal, a)).fold(f64::INFINITY, f64::min);
        ensure(best <= 1.0, format!("no plane within 1° of {a:?} (closest {best:.3}°)"))?;
    }
    for p in &rec.planes {
        ensure(tilt_verify(&cube, p, &params.settle).map_err(|e| e.to_string())?, format!("plane {:?} fails tilt check", p.normal))?;
    }
    let ball = annotate(&shapes::icosphere(0.5, 2), "ball", "ball", &params).map_err(|e| e.to_string())?;
    ensure(ball.planes.is_empty() && ball.no_stable_planes, format!("icosphere: {} planes", ball.planes.len()))?;
    within_budget(t.elapsed(), 30.0)?;
    Ok(format!("cube 6 axis planes tilt-verified, icosphere 0 planes, {:.2}s", t.elapsed().as_secs_f64()))
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Rotation3<f64> {
    let g = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let q = Quaternion::new(g(rng), g(rng), g(rng), g(rng));
    UnitQuaternion::from_quaternion(q).to_rotation_matrix()
}

fn chsa_validation() -> Check {
    let cube = ChsaAnalysis::new(&PointCloud::new(shapes::cuboid(1.0, 1.0, 1.0).vertices).unwrap()).map_err(|e| e.to_string())?;
    let sinks = cube.sinks();
    ensure(sinks.len() == 6, format!("cube sinks {}", sinks.len()))?;
    for &s in &sinks {
        ensure((cube.probability[s] - 1.0 / 6.0).abs() <= 1e-9, format!("cube basin {}", cube.probability[s]))?;
    }
    let wedge = shapes::wedge(0.15, 0.05, 0.10);
    let analysis = ChsaAnalysis::new(&PointCloud::new(wedge.vertices.clone()).unwrap()).map_err(|e| e.to_string())?;
    let model = SettleModel::new(&wedge).map_err(|e| e.to_string())?;
    let table = TableConfig::flat();
    let params = SettleParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    let drops = 10_000;
    let mut counts = vec![0usize; analysis.polytope.facets.len()];
    for _ in 0..drops {
        let start = model.drop_pose(random_rotation(&mut rng), &table);
        let (o, _) = model.settle(&start, &table, &params).map_err(|e| e.to_string())?;
        let (f, _) = analysis
            .polytope
            .facets
            .iter()
            .enumerate()
            .map(|(i, f)| (i, f.normal.dot(&o.resting_direction)))
            .fold((0, f64::NEG_INFINITY), |a, x| if x.1 > a.1 { x } else { a });
        counts[f] += 1;
    }
    let mut worst: f64 = 0.0;
    let mut cells = Vec::new();
    for (f, &c) in counts.iter().enumerate() {
        let mc = 100.0 * c as f64 / drops as f64;
        let p = 100.0 * analysis.probability[f];
        if mc > 0.0 || p > 0.0 {
            cells.push(format!("{p:.1}/{mc:.1}"));
        }
        worst = worst.max((mc - p).abs());
    }
    ensure(worst <= 5.0, format!("wedge basins vs Monte Carlo differ by {worst:.2} points ({})", cells.join(", ")))?;
    Ok(format!("cube basins 1/6, wedge CHSA/MC % {} (max gap {worst:.2} points)", cells.join(", ")))
}

fn annotated_scored(cloud: &PointCloud, mesh: &TriMesh, rec: &AnnotationRecord) -> ScoredCloud {
    let visible = transfer_support(cloud, mesh, rec, 0.005, 3);
    ScoredCloud::from_labels(oracle_scored(cloud, &visible).unwrap()).unwrap()
}

fn truncated_plane() -> Check {
    let cube = shapes::cuboid(1.0, 1.0, 1.0);
    let cam = VirtualCamera::look_at(Point3::new(2.0, 0.0, 2.0), Point3::origin(), Vector3::z(), &CameraConfig::default())
        .map_err(|e| e.to_string())?;
    let cloud = render_partial(&cube, &cam).map_err(|e| e.to_string())?;
    let model = SettleModel::new(&cube).unwrap();
    let table = TableConfig::tilted(10.0, 0.0).unwrap();
    let params = SettleParams::default();
    let c = chsa(&cloud).map_err(|e| e.to_string())?;
    let n = c.source_normal.unwrap();
    let truncation = Vector3::new(-1.0, 0.0, -1.0).normalize();
    ensure(angle_deg(&n, &truncation) <= 1.0, format!("CHSA normal {n:?} is not the truncation plane"))?;
    let r = evaluate_placement(&model, Some(&c), &table, &params, 10.0).map_err(|e| e.to_string())?;
    ensure(!r.success, format!("CHSA placement unexpectedly succeeded: {r:?}"))?;
    let rec = annotate(&cube, "cube", "cube", &AnnotateParams::default()).map_err(|e| e.to_string())?;
    let (p, _) = planner(&annotated_scored(&cloud, &cube, &rec), &PlannerParams::default(), 0).map_err(|e| e.to_string())?;
    let rp = evaluate_placement(&model, Some(&p), &table, &params, 10.0).map_err(|e| e.to_string())?;
    ensure(rp.success, format!("planner placement failed: {rp:?}"))?;
    Ok(format!(
        "CHSA picks truncation plane and fails (drift {:.1}°), planner succeeds (drift {:.2}°)",
        r.rotation_drift_deg.unwrap_or(f64::NAN),
        rp.rotation_drift_deg.unwrap_or(f64::NAN)
    ))
}

fn implicit_plane() -> Check {
    let chair = shapes::desk_corpus().into_iter().find(|o| o.id == "toy_chair").expect("chair in corpus").mesh;
    let rec = annotate(&chair, "toy_chair", "toy_chair", &AnnotateParams::default()).map_err(|e| e.to_string())?;
    let zmin = chair.vertices.iter().map(|v| v.z).fold(f64::INFINITY, f64::min);
    let leg_plane = rec
        .planes
        .iter()
        .position(|p| angle_deg(&p.normal, &-Vector3::z()) <= 1.0)
        .ok_or("no leg-tip plane annotated")?;
    let tips = &rec.planes[leg_plane].support_vertices;
    ensure(tips.iter().all(|&v| (chair.vertices[v].z - zmin).abs() < 1e-12), "leg-tip mask includes non-tip vertices")?;
    let quadrant = |p: &Point3| (p.x > 0.0, p.y > 0.0);
    let mut legs: Vec<(bool, bool)> = tips.iter().map(|&v| quadrant(&chair.vertices[v])).collect();
    legs.sort_unstable();
    legs.dedup();
    ensure(legs.len() == 4, format!("mask covers {} legs", legs.len()))?;

    let cam_cfg = CameraConfig::default();
    let model = SettleModel::new(&chair).unwrap();
    let table = TableConfig::tilted(10.0, 0.0).unwrap();
    for view in 0..200u64 {
        let (_, cloud) = render_random_view(&chair, &cam_cfg, view).map_err(|e| e.to_string())?;
        let visible = transfer_support(&cloud, &chair, &rec, 0.005, 3);
        let Some(vp) = visible.iter().find(|v| v.plane == leg_plane) else { continue };
        // A tip counts as seen when the view has points on its bottom face.
        let mut seen: Vec<(bool, bool)> = vp
            .points
            .iter()
            .map(|&i| cloud.points()[i])
            .filter(|p| (p.z - zmin).abs() < 1e-6)
            .map(|p| quadrant(&p))
            .collect();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() < 3 {
            continue;
        }
        let scored = ScoredCloud::from_labels(oracle_scored(&cloud, &visible).unwrap()).unwrap();
        let (p, ranked) = planner(&scored, &PlannerParams::default(), view).map_err(|e| e.to_string())?;
        let n = p.source_normal.unwrap();
        ensure(angle_deg(&n, &-Vector3::z()) <= 2.0, format!("view {view}: planner normal {n:?}"))?;
        let best = &ranked.planes[ranked.best].model;
        let mut spanned: Vec<(bool, bool)> = best.inliers.iter().map(|&i| quadrant(&cloud.points()[i])).collect();
        spanned.sort_unstable();
        spanned.dedup();
        ensure(spanned.len() >= 3, format!("view {view}: selected plane spans {} legs", spanned.len()))?;
        let r = evaluate_placement(&model, Some(&p), &table, &SettleParams::default(), 10.0).map_err(|e| e.to_string())?;
        ensure(r.success, format!("view {view}: placement failed {r:?}"))?;
        return Ok(format!(
            "leg-tip plane annotated; view {view} shows {} legs, planner plane spans {}, placement drift {:.2}°",
            seen.len(),
            spanned.len(),
            r.rotation_drift_deg.unwrap()
        ));
    }
    Err("no view among 200 shows 3 leg tips".into())
}

fn desk_objects() -> Vec<BenchObject> {
    shapes::desk_corpus()
        .into_iter()
        .map(|o| {
            let annotation = annotate(&o.mesh, &o.id, &o.id, &AnnotateParams::default()).expect("annotate corpus");
            BenchObject { id: o.id, mesh: o.mesh, annotation }
        })
        .collect()
}

fn sr_line(rep: &BenchReport) -> String {
    Method::ALL.iter().map(|&m| format!("{m} {:.1}", rep.success_rate(m).unwrap())).collect::<Vec<_>>().join(", ")
}

fn run_regime(objects: &[BenchObject], regime: Regime) -> Result<(BenchReport, Duration), String> {
    let t = Instant::now();
    let cfg = BenchConfig { regime, trials: 100, seed: 0, ..BenchConfig::default() };
    let rep = run_benchmark(objects, &Method::ALL, &cfg).map_err(|e| e.to_string())?;
    Ok((rep, t.elapsed()))
}

fn partial_trend(rep: &BenchReport, elapsed: Duration) -> Check {
    let sr = |m| rep.success_rate(m).unwrap();
    let (p, r, c, b) = (sr(Method::Planner), sr(Method::Rpf), sr(Method::Chsa), sr(Method::Bbf));
    let line = format!("SR {}, {:.1}s", sr_line(rep), elapsed.as_secs_f64());
    ensure(p >= r && r > c && c > b, format!("ordering planner >= rpf > chsa > bbf violated: {line}"))?;
    within_budget(elapsed, 600.0)?;
    Ok(line)
}

fn whole_trend(rep: &BenchReport, elapsed: Duration) -> Check {
    let sr = |m| rep.success_rate(m).unwrap();
    let (p, r, c) = (sr(Method::Planner), sr(Method::Rpf), sr(Method::Chsa));
    let line = format!("SR {}, {:.1}s", sr_line(rep), elapsed.as_secs_f64());
    ensure(c >= p - 5.0, format!("chsa < planner - 5: {line}"))?;
    ensure(p >= r && c >= r, format!("planner and chsa must both be >= rpf: {line}"))?;
    within_budget(elapsed, 600.0)?;
    Ok(line)
}

fn determinism(objects: &[BenchObject], first: &BenchReport) -> Check {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().map_err(|e| e.to_string())?;
    let (again, _) = pool.install(|| run_regime(objects, Regime::Partial))?;
    let (a, b) = (first.to_json().map_err(|e| e.to_string())?, again.to_json().map_err(|e| e.to_string())?);
    ensure(a.as_bytes() == b.as_bytes(), "partial-regime reports differ between runs")?;
    Ok(format!("partial report identical across runs and thread counts ({} bytes)", a.len()))
}

fn main() -> ExitCode {
    rayon::ThreadPoolBuilder::new().num_threads(1).build_global().expect("single worker pool");
    let mut results: Vec<(&str, Check, Duration)> = Vec::new();
    let run = |name: &'static str, f: &dyn Fn() -> Check, results: &mut Vec<(&str, Check, Duration)>| {
        let t = Instant::now();
        let r = f();
        let d = t.elapsed();
        match &r {
            Ok(msg) => println!("PASS  {name}: {msg}"),
            Err(msg) => println!("FAIL  {name}: {msg}"),
        }
        results.push((name, r, d));
    };
    run("geometry oracle suite", &geometry_suite, &mut results);
    run("instability unit suite", &instability_suite, &mut results);
    run("analytic toppling", &rod_toppling, &mut results);
    run("cube annotation", &cube_annotation, &mut results);
    run("CHSA validation", &chsa_validation, &mut results);
    run("truncated-plane failure", &truncated_plane, &mut results);
    run("implicit chair plane", &implicit_plane, &mut results);

    let objects = desk_objects();
    let partial = run_regime(&objects, Regime::Partial);
    let whole = run_regime(&objects, Regime::Whole);
    run("desk partial-view trend", &|| partial.as_ref().map_err(Clone::clone).and_then(|(r, d)| partial_trend(r, *d)), &mut results);
    run("desk whole-shape trend", &|| whole.as_ref().map_err(Clone::clone).and_then(|(r, d)| whole_trend(r, *d)), &mut results);
    run("bench determinism", &|| partial.as_ref().map_err(Clone::clone).and_then(|(r, _)| determinism(&objects, r)), &mut results);

    let failed = results.iter().filter(|r| r.1.is_err()).count();
    println!("{} of {} acceptance criteria passed", results.len() - failed, results.len());
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
