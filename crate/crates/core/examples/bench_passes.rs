use std::time::Instant;
use wavemap::evolve::{step, FieldState};
use wavemap::grid::{GridSpec, Plane};
use wavemap::pulse::{synthesize_cauchy_data, PulseConfig};
use wavemap::vec3::V3;

fn main() {
    let n = 2048usize;
    let cfg = PulseConfig { delta: 0.025, u0: -4.0, profile_amp: 1.0, angular_modes: vec![(0, 1.0), (2, 0.5)] };
    let grid = GridSpec::new(n, 6.0, 0.4);
    let data = synthesize_cauchy_data(&grid, &cfg).unwrap();
    let mut state = FieldState { t: data.t_init, phi: data.phi0.clone(), pi: data.phi1.clone() };
    // warm
    step(&mut state, &grid, grid.dt()).unwrap();
    let reps = 30;
    let t0 = Instant::now();
    for _ in 0..reps {
        step(&mut state, &grid, grid.dt()).unwrap();
    }
    let el = t0.elapsed().as_secs_f64();
    println!("full step: {:.1} ms, {:.3e} cell-steps/s", el / reps as f64 * 1e3, (n * n * reps) as f64 / el);

    // raw memory bandwidth probe: stream-add two planes
    let mut a = Plane::fill(n, V3::new(1.0, 2.0, 3.0));
    let b = Plane::fill(n, V3::new(0.1, 0.2, 0.3));
    let t0 = Instant::now();
    for _ in 0..reps {
        use rayon::prelude::*;
        a.data.par_chunks_mut(n).zip(b.data.par_chunks(n)).for_each(|(ar, br)| {
            for (x, y) in ar.iter_mut().zip(br.iter()) {
                *x += y.scale(0.01);
            }
        });
    }
    let el = t0.elapsed().as_secs_f64();
    let bytes = (n * n * reps) as f64 * (48.0 + 24.0);
    println!("stream add: {:.1} GB/s", bytes / el / 1e9);
}
