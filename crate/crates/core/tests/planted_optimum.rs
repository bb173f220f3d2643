use std::time::Instant;

use lineart::filter::compose;
use lineart::mesh::{normalize_size, primitives};
use lineart::optimize::{boundary_check, optimize_thresholds, OptimizeConfig};
use lineart::raster::{render_maps, RenderOptions};
use lineart::ranker::ReferenceScorer;
use lineart::{Camera, ThresholdSet};

#[test]
fn planted_thresholds_on_lobed_torus() {
    let clock = Instant::now();
    let mesh = normalize_size(&primitives::lobed_torus(1.0, 0.3, 4, 0.15, 160, 80)).unwrap();
    let cam = Camera::framing(&mesh, 30.0, 35.0, 768, 768).unwrap();
    let maps = render_maps(&mesh, &cam, &RenderOptions::default());
    let planted = ThresholdSet::from_array([0.2, 0.3, 0.25, 0.5]);
    let scorer = ReferenceScorer::new(compose(&maps, &planted).unwrap());
    let render_time = clock.elapsed();
    let r = optimize_thresholds(&maps, &scorer, None, &OptimizeConfig::fast()).unwrap();
    let flag = boundary_check(&maps, &scorer, None, &r.best).unwrap();
    println!("render {:?} total {:?} best {:?} score {:e}", render_time, clock.elapsed(), r.best.to_array(), r.best_score);
    for s in &r.starts {
        println!("{} it {} ev {} {:?} {:e}", s.index, s.iterations, s.evaluations, s.stop, s.final_score);
    }
    assert!(r.best_score >= -1e-6);
    assert!(!flag);
}
