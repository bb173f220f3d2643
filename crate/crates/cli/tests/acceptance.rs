//! Acceptance suite: one PASS/FAIL line per criterion on stderr.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use lineart::camera::Camera;
use lineart::curvature::{curvature_derivative, principal_curvatures};
use lineart::dataset::{medoid_cost, select_distinct};
use lineart::eval::{chamfer, chamfer_matrix, evaluate, BinaryDrawing};
use lineart::filter::{compose, grad_thresholds, render_drawing, taper};
use lineart::image::{Image, Mask};
use lineart::lines::{occluding_contours, LineKind, LineSegment3D};
use lineart::mesh::primitives::{blobby_sphere, icosphere, lobed_torus, open_cylinder, open_torus, rounded_cube, torus};
use lineart::mesh::{save_obj, Topology, TriangleMesh, Vec3};
use lineart::optimize::{Objective, Profile};
use lineart::raster::{render_maps, MapStack, RenderOptions};
use lineart::ranker::{hinge_loss, hinge_rank_loss, synthetic_preference_pairs, MiniScorer, MiniTopology, ReferenceScorer, SyntheticConfig};
use lineart::{Drawing, ThresholdSet};
use lineart_cli::commands::prepare;
use lineart_cli::config::{RunConfig, ScorerConfig};
use lineart_cli::{cmd_gen_candidates, cmd_optimize, cmd_render, cmd_train_ranker, with_threads};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run(name: &str, f: impl FnOnce() -> Check) -> bool {
    let clock = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into()))
    });
    let secs = clock.elapsed().as_secs_f64();
    let (tag, detail, ok) = match outcome {
        Ok(d) => ("PASS", d, true),
        Err(d) => ("FAIL", d, false),
    };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{tag} {name}: {detail} [{secs:.2} s]");
    ok
}

fn write_mesh(dir: &Path, name: &str, mesh: &TriangleMesh) -> PathBuf {
    let p = dir.join(format!("{name}.obj"));
    save_obj(mesh, &p).unwrap();
    p
}

fn scene_config(mesh: PathBuf, out: PathBuf, size: usize) -> RunConfig {
    RunConfig {
        mesh: Some(mesh),
        output: out,
        width: size,
        height: size,
        camera: lineart_cli::config::CameraConfig {
            azimuth: 30.0,
            elevation: 35.0,
            ..Default::default()
        },
        ..RunConfig::default()
    }
}

// Curvature oracle: errors are measured against the larger analytic
// principal curvature magnitude at each vertex.

fn curvature_errors(mesh: &TriangleMesh, exact: impl Fn(usize, &Vec3) -> Option<(f64, f64)>) -> (f64, usize, f64) {
    let clock = Instant::now();
    let f = curvature_derivative(mesh, &principal_curvatures(mesh));
    let secs = clock.elapsed().as_secs_f64();
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for (i, p) in mesh.vertices().iter().enumerate() {
        let Some((k1, k2)) = exact(i, p) else { continue };
        let scale = k1.abs().max(k2.abs());
        worst = worst.max((f.k1[i] - k1).abs() / scale).max((f.k2[i] - k2).abs() / scale);
        n += 1;
    }
    (worst, n, secs)
}

fn curvature_oracle() -> Check {
    let mut parts = Vec::new();
    let sphere = icosphere(4, 1.0);
    let cyl_r = 0.5;
    let cyl = open_cylinder(cyl_r, 2.0, 96, 40);
    let cyl_boundary: Vec<bool> = {
        let topo = Topology::build(&cyl);
        let mut b = vec![false; cyl.vertex_count()];
        for e in topo.edges().iter().filter(|e| e.is_boundary()) {
            b[e.v[0]] = true;
            b[e.v[1]] = true;
        }
        b
    };
    let (big_r, r) = (1.0, 0.3);
    let tor = torus(big_r, r, 240, 80);
    let cases: Vec<(&str, (f64, usize, f64))> = vec![
        ("icosphere4", curvature_errors(&sphere, |_, _| Some((1.0, 1.0)))),
        (
            "cylinder",
            curvature_errors(&cyl, |i, _| (!cyl_boundary[i]).then_some((1.0 / cyl_r, 0.0))),
        ),
        (
            "torus",
            curvature_errors(&tor, |_, p| {
                let v = p.z.atan2((p.x * p.x + p.y * p.y).sqrt() - big_r);
                let kp = v.cos() / (big_r + r * v.cos());
                let km = 1.0 / r;
                Some((km.max(kp), km.min(kp)))
            }),
        ),
    ];
    let mut ok = true;
    for (name, (worst, n, secs)) in &cases {
        parts.push(format!("{name} max err {:.2}% over {n} vertices in {secs:.2} s", 100.0 * worst));
        ok &= *worst <= 0.05 && *secs < 5.0;
    }
    ensure(tor.face_count() >= 10_000, || "torus too coarse".into())?;
    let detail = parts.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// Differentiable filter.

fn thresholded(kind: LineKind) -> Option<usize> {
    match kind {
        LineKind::Suggestive => Some(0),
        LineKind::Ridge => Some(1),
        LineKind::Valley => Some(2),
        LineKind::ApparentRidge => Some(3),
        _ => None,
    }
}

fn random_maps(rng: &mut ChaCha8Rng, w: usize, h: usize) -> MapStack {
    let mut maps = MapStack::empty(w, h);
    for kind in LineKind::ALL {
        let p = if thresholded(kind).is_some() { 0.35 } else { 0.05 };
        let m = maps.line_mut(kind);
        for i in 0..w * h {
            if rng.gen_bool(p) {
                m.mask.as_mut_slice()[i] = true;
                m.scalar.as_mut_slice()[i] = rng.gen_range(0.05..2.0);
            }
        }
    }
    maps
}

fn clear_of_kinks_and_ties(maps: &MapStack, t: &[f64; 4], ext: Option<&Drawing>, boundaries: bool) -> bool {
    for i in 0..maps.width * maps.height {
        let mut vals = Vec::new();
        for kind in LineKind::ALL {
            let m = maps.line(kind);
            if !m.mask.as_slice()[i] {
                continue;
            }
            match thresholded(kind) {
                Some(k) => {
                    let d = m.scalar.as_slice()[i];
                    if (d - t[k]).abs() < 1e-3 {
                        return false;
                    }
                    vals.push(taper(t[k], d));
                }
                None if kind == LineKind::Crease || (kind == LineKind::Boundary && !boundaries) => {}
                None => vals.push(1.0),
            }
        }
        if let Some(e) = ext {
            vals.push(e.as_slice()[i]);
        }
        vals.retain(|v| *v > 0.0);
        vals.sort_by(f64::total_cmp);
        if vals.windows(2).any(|p| p[1] - p[0] < 1e-4) {
            return false;
        }
    }
    true
}

fn gradient_check() -> Check {
    let clock = Instant::now();
    let (w, h, step) = (16, 12, 1e-6);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut configs, mut worst, mut nonzero) = (0, 0.0f64, 0);
    while configs < 100 {
        let maps = random_maps(&mut rng, w, h);
        let t: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.01..1.5));
        let boundaries = rng.gen_bool(0.5);
        let ext = rng
            .gen_bool(0.3)
            .then(|| Image::from_fn(w, h, |_, _| if rng.gen_bool(0.2) { rng.gen_range(0.0..1.0) } else { 0.0 }));
        if !clear_of_kinks_and_ties(&maps, &t, ext.as_ref(), boundaries) {
            continue;
        }
        let up = Image::from_fn(w, h, |_, _| rng.gen_range(-1.0..1.0));
        let ts = ThresholdSet::from_array(t).with_boundaries(boundaries);
        let loss = |x: [f64; 4]| -> f64 {
            let d = render_drawing(&maps, &ts.with_values(x), ext.as_ref()).unwrap();
            d.as_slice().iter().zip(up.as_slice()).map(|(a, b)| a * b).sum()
        };
        let g = grad_thresholds(&maps, &ts, ext.as_ref(), &up).map_err(|e| e.to_string())?.to_array();
        for k in 0..4 {
            let (mut lo, mut hi) = (t, t);
            lo[k] -= step;
            hi[k] += step;
            let fd = (loss(hi) - loss(lo)) / (2.0 * step);
            let err = if fd.abs() < 1e-9 {
                ensure(g[k].abs() < 1e-9, || format!("config {configs}: analytic {} where fd is 0", g[k]))?;
                0.0
            } else {
                nonzero += 1;
                (g[k] - fd).abs() / fd.abs()
            };
            worst = worst.max(err);
        }
        configs += 1;
    }
    let secs = clock.elapsed().as_secs_f64();
    let detail = format!("{configs} configs, {nonzero} nonzero components, max rel err {worst:.2e}, {secs:.2} s");
    ensure(worst <= 1e-3 && secs < 10.0, || detail.clone())?;
    Ok(detail)
}

// Planted optimum through the optimize command.

fn planted(mesh: &TriangleMesh, name: &str, boundaries: bool, need_all_kinds: bool) -> Check {
    let clock = Instant::now();
    let dir = TempDir::new().unwrap();
    let mut cfg = scene_config(write_mesh(dir.path(), name, mesh), dir.path().join("out"), 768);
    cfg.optimize.profile = Profile::Fast;
    let scene = prepare(&cfg).map_err(|e| e.to_string())?;
    if need_all_kinds {
        for kind in [LineKind::Suggestive, LineKind::Ridge, LineKind::Valley, LineKind::ApparentRidge] {
            ensure(scene.maps.line(kind).mask.any(), || format!("{kind:?} map empty"))?;
        }
    }
    let t_star = ThresholdSet::from_array([0.2, 0.3, 0.25, 0.5]).with_boundaries(boundaries);
    let target_png = dir.path().join("target.png");
    compose(&scene.maps, &t_star).unwrap().save_png(&target_png).unwrap();
    cfg.scorer = ScorerConfig::Reference { target: target_png.clone() };
    let out = cmd_optimize(&cfg).map_err(|e| e.to_string())?;
    let scorer = ReferenceScorer::new(Drawing::load_png(&target_png).unwrap());
    let at_star = Objective::new(&scene.maps, &scorer, None).unwrap().score(&t_star).unwrap();
    let secs = clock.elapsed().as_secs_f64();
    let detail = format!(
        "score {:.3e} vs t* {:.3e}, boundary flag {} (planted {boundaries}), t = {:?}, {} starts, {secs:.1} s",
        out.record.score,
        at_star,
        out.record.include_boundaries,
        out.record.thresholds.to_array().map(|v| (v * 1e4).round() / 1e4),
        out.record.starts,
    );
    ensure(out.record.score >= at_star - 1e-6, || detail.clone())?;
    ensure(out.record.include_boundaries == boundaries, || detail.clone())?;
    ensure(secs < 120.0, || detail.clone())?;
    Ok(detail)
}

fn planted_closed() -> Check {
    planted(&lobed_torus(1.0, 0.3, 4, 0.15, 160, 80), "lobed_torus", false, true)
}

fn planted_open() -> Check {
    planted(&open_torus(1.0, 0.3, 4.5, 160, 80), "open_torus", true, false)
}

// Metrics.

fn hline(w: usize, h: usize, y: usize) -> BinaryDrawing {
    BinaryDrawing::from_mask(Image::from_fn(w, h, |x, yy| yy == y && (10..w - 10).contains(&x)))
}

fn metric_identities() -> Check {
    let a = hline(100, 60, 20);
    let r = evaluate(&a, &a, 3.0).map_err(|e| e.to_string())?;
    ensure(
        r.precision == 1.0 && r.recall == 1.0 && r.iou == 1.0 && r.f1 == 1.0 && r.chamfer == Some(0.0),
        || format!("identical drawings gave {r:?}"),
    )?;
    let mut worst_cd: f64 = 0.0;
    for d in 1..=10 {
        let c = chamfer(&a, &hline(100, 60, 20 + d)).map_err(|e| e.to_string())?;
        worst_cd = worst_cd.max((c - d as f64).abs());
    }
    ensure(worst_cd <= 0.1, || format!("parallel-line Chamfer off by {worst_cd}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..20 {
        let rand_mask = |rng: &mut ChaCha8Rng| BinaryDrawing::from_mask(Image::from_fn(48, 40, |_, _| rng.gen_bool(0.05)));
        let (s, h) = (rand_mask(&mut rng), rand_mask(&mut rng));
        let mut prev: Option<lineart::eval::EvalReport> = None;
        for radius in [0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0] {
            let r = evaluate(&s, &h, radius).map_err(|e| e.to_string())?;
            if let Some(p) = &prev {
                ensure(r.precision >= p.precision && r.recall >= p.recall && r.iou >= p.iou, || {
                    format!("drawing {k}: metrics drop at radius {radius}")
                })?;
            }
            prev = Some(r);
        }
    }
    Ok(format!("identity exact, parallel-line Chamfer max err {worst_cd:.2e} px, radius monotone on 20 drawings"))
}

// k-medoids.

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

fn segment_drawing(w: usize, x0: f64, y0: f64, x1: f64, y1: f64) -> Drawing {
    let mut d = Drawing::new(w, w);
    let n = 4 * w;
    for s in 0..=n {
        let a = s as f64 / n as f64;
        let (x, y) = (x0 + (x1 - x0) * a, y0 + (y1 - y0) * a);
        let (xi, yi) = ((x as usize).min(w - 1), (y as usize).min(w - 1));
        *d.get_mut(xi, yi) = 1.0;
    }
    d
}

fn kmedoids_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut instances = 0;
    for _ in 0..25 {
        let clusters = rng.gen_range(2..=4);
        let per = rng.gen_range(2..=12 / clusters);
        let w = 40;
        let mut drawings = Vec::new();
        for _ in 0..clusters {
            let (x0, y0, x1, y1) = (
                rng.gen_range(2.0..38.0),
                rng.gen_range(2.0..38.0),
                rng.gen_range(2.0..38.0),
                rng.gen_range(2.0..38.0),
            );
            for _ in 0..per {
                let j = |rng: &mut ChaCha8Rng| rng.gen_range(-1.0..1.0);
                drawings.push(segment_drawing(w, x0 + j(&mut rng), y0 + j(&mut rng), x1 + j(&mut rng), y1 + j(&mut rng)));
            }
        }
        let k = clusters;
        let sel = select_distinct(&drawings, k).map_err(|e| e.to_string())?;
        let bins: Vec<BinaryDrawing> = drawings.iter().map(|d| lineart::eval::binarize(d, 0.5)).collect();
        let dist = chamfer_matrix(&bins).map_err(|e| e.to_string())?;
        let best = subsets(drawings.len(), k)
            .iter()
            .map(|s| medoid_cost(&dist, s))
            .fold(f64::INFINITY, f64::min);
        ensure(sel.cost == best, || {
            format!("instance {instances}: PAM cost {} vs exhaustive {best}", sel.cost)
        })?;
        instances += 1;
    }
    Ok(format!("{instances} clustered instances with <= 12 candidates match exhaustive cost exactly"))
}

fn candidates_264_select_8() -> Check {
    let dir = TempDir::new().unwrap();
    let mut cfg = scene_config(
        write_mesh(dir.path(), "lobed", &lobed_torus(1.0, 0.3, 4, 0.15, 120, 60)),
        dir.path().join("data"),
        256,
    );
    cfg.seed = 3;
    let out = cmd_gen_candidates(&cfg).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    for (v, d) in out.view_dirs.iter().enumerate() {
        let man: lineart::dataset::Manifest =
            serde_json::from_str(&fs::read_to_string(d.join("manifest.json")).unwrap()).map_err(|e| e.to_string())?;
        let pngs = fs::read_dir(d).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "png")).count();
        ensure(out.candidate_counts[v] == 264 && pngs == 264 && man.candidates.len() == 264, || {
            format!("view {v}: {} candidates, {pngs} files", out.candidate_counts[v])
        })?;
        ensure(man.selected.len() == 8, || format!("view {v}: {} selected", man.selected.len()))?;
        parts.push(format!("view {v}: 264 candidates, selected {:?}", man.selected));
    }
    Ok(parts.join("; "))
}

// Ranking.

fn hinge_at_equality() -> Check {
    let scores = vec![(0.3, 0.3); 37];
    let l = hinge_loss(&scores, 1.0);
    ensure(l == 37.0, || format!("hinge {l}"))?;
    let pairs = synthetic_preference_pairs(&SyntheticConfig { pairs: 25, ..SyntheticConfig::default() }).map_err(|e| e.to_string())?;
    let constant = MiniScorer::zeros(MiniTopology::default(), 0.4).map_err(|e| e.to_string())?;
    let (l2, _) = hinge_rank_loss(&constant, &pairs, 1.0).map_err(|e| e.to_string())?;
    ensure(l2 == 25.0, || format!("constant scorer hinge {l2}"))?;
    Ok("37 equal pairs -> 37.0; constant mini scorer on 25 pairs -> 25.0".into())
}

fn ranker_training() -> Check {
    let clock = Instant::now();
    let dir = TempDir::new().unwrap();
    let mut cfg = RunConfig {
        output: dir.path().to_path_buf(),
        seed: 1,
        ..RunConfig::default()
    };
    cfg.train.data.pairs = 256;
    cfg.train.held_out = 200;
    cfg.train.config.epochs = 12;
    cfg.train.config.lr = 1e-3;
    let r = cmd_train_ranker(&cfg).map_err(|e| e.to_string())?;
    let secs = clock.elapsed().as_secs_f64();
    let detail = format!(
        "held-out accuracy {:.3} -> {:.3} on {} pairs, loss {:.3} -> {:.3}, {secs:.1} s",
        r.held_out_accuracy_before, r.held_out_accuracy_after, r.held_out_pairs, r.initial_loss, r.final_loss
    );
    ensure(r.held_out_accuracy_after >= 0.9 && secs < 300.0, || detail.clone())?;
    Ok(detail)
}

// Contours.

fn endpoint_key(p: &Vec3) -> [u64; 3] {
    [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]
}

fn contour_loops() -> Check {
    let meshes: Vec<(&str, TriangleMesh)> = vec![
        ("icosphere", icosphere(4, 1.0)),
        ("torus", torus(1.0, 0.3, 96, 48)),
        ("lobed_torus", lobed_torus(1.0, 0.3, 4, 0.15, 120, 60)),
        ("rounded_cube", rounded_cube(0.5, 6.0, 16)),
        ("blobby_sphere", blobby_sphere(4, 0.15)),
    ];
    let mut parts = Vec::new();
    for (name, m) in &meshes {
        let topo = Topology::build(m);
        ensure(topo.boundary_edge_count() == 0 && topo.non_manifold_edge_count() == 0, || {
            format!("{name} is not watertight")
        })?;
        let cam = Camera::framing(m, 30.0, 35.0, 512, 512).unwrap();
        let segs: Vec<LineSegment3D> = occluding_contours(m, &cam);
        let mut deg: HashMap<[u64; 3], usize> = HashMap::new();
        for s in &segs {
            for p in &s.p {
                *deg.entry(endpoint_key(p)).or_default() += 1;
            }
        }
        let bad = deg.values().filter(|&&d| d != 2).count();
        ensure(!segs.is_empty() && bad == 0, || format!("{name}: {bad} endpoints of degree != 2"))?;
        parts.push(format!("{name} {} segs", segs.len()));
    }
    Ok(format!("all endpoints degree 2: {}", parts.join(", ")))
}

fn sphere_circle() -> Check {
    let m = icosphere(5, 1.0);
    let (w, h) = (768, 768);
    let cam = Camera::framing(&m, 30.0, 35.0, w, h).unwrap();
    let maps = render_maps(&m, &cam, &RenderOptions::default());
    let mask: &Mask = &maps.contour.mask;
    let d = (cam.position - cam.target).norm();
    let radius = cam.focal() * (1.0f64 / d).asin().tan();
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    let pts = mask.set_pixels();
    let near = pts
        .iter()
        .filter(|&&(x, y)| (((x as f64 + 0.5 - cx).hypot(y as f64 + 0.5 - cy)) - radius).abs() <= 1.5)
        .count();
    let frac = near as f64 / pts.len().max(1) as f64;
    let detail = format!("{near}/{} mask pixels within 1.5 px of r = {radius:.1} px ({:.2}%)", pts.len(), 100.0 * frac);
    ensure(!pts.is_empty() && frac >= 0.99, || detail.clone())?;
    Ok(detail)
}

// Determinism.

fn read_all(dir: &Path, files: &[&str]) -> Vec<Vec<u8>> {
    files.iter().map(|f| fs::read(dir.join(f)).unwrap()).collect()
}

fn determinism() -> Check {
    let dir = TempDir::new().unwrap();
    let mesh = write_mesh(dir.path(), "lobed", &lobed_torus(1.0, 0.3, 4, 0.15, 120, 60));
    let base = scene_config(mesh.clone(), dir.path().join("probe"), 512);
    let scene = prepare(&base).map_err(|e| e.to_string())?;
    let target = dir.path().join("target.png");
    compose(&scene.maps, &ThresholdSet::from_array([0.1, 0.2, 0.2, 0.3])).unwrap().save_png(&target).unwrap();

    let mut renders = Vec::new();
    let mut optimizes = Vec::new();
    for (run, threads) in [(0, 1), (1, 1), (2, 8), (3, 8)] {
        let mut cfg = scene_config(mesh.clone(), dir.path().join(format!("render{run}")), 512);
        cfg.thresholds = Some(ThresholdSet::from_array([0.05, 0.1, 0.1, 0.2]).with_boundaries(true));
        cfg.dump_maps = true;
        with_threads(threads, || cmd_render(&cfg)).unwrap().map_err(|e| e.to_string())?;
        renders.push(read_all(&cfg.output, &["drawing.png", "render.json", "maps.bin"]));

        let mut cfg = scene_config(mesh.clone(), dir.path().join(format!("opt{run}")), 512);
        cfg.optimize.profile = Profile::Fast;
        cfg.scorer = ScorerConfig::Reference { target: target.clone() };
        with_threads(threads, || cmd_optimize(&cfg)).unwrap().map_err(|e| e.to_string())?;
        optimizes.push(read_all(&cfg.output, &["drawing.png", "result.json", "trace.jsonl"]));
    }
    ensure(renders.windows(2).all(|p| p[0] == p[1]), || "render outputs differ".into())?;
    ensure(optimizes.windows(2).all(|p| p[0] == p[1]), || "optimize outputs differ".into())?;
    Ok("render and optimize outputs bit-identical over 2 runs x threads {1, 8}".into())
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Check); 12] = [
        ("curvature_oracle", curvature_oracle),
        ("filter_gradient_check", gradient_check),
        ("planted_optimum_closed_torus", planted_closed),
        ("planted_optimum_open_torus_boundary_flag", planted_open),
        ("metric_identities", metric_identities),
        ("kmedoids_exhaustive_oracle", kmedoids_oracle),
        ("candidates_264_select_8", candidates_264_select_8),
        ("hinge_loss_at_equality", hinge_at_equality),
        ("ranker_held_out_accuracy", ranker_training),
        ("contour_closed_loops", contour_loops),
        ("sphere_contour_circle", sphere_circle),
        ("determinism_runs_and_threads", determinism),
    ];
    let failed: Vec<&str> = criteria
        .into_iter()
        .filter_map(|(name, f)| (!run(name, f)).then_some(name))
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
