use std::time::Instant;
use wavemap::evolve::{evolve_with, EvolveParams};
use wavemap::grid::GridSpec;
use wavemap::pulse::{synthesize_cauchy_data, PulseConfig};

fn main() {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(512);
    let delta: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(0.1);
    let cfg = PulseConfig { delta, u0: -4.0, profile_amp: 1.0, angular_modes: vec![(0, 1.0), (2, 0.5)] };
    let grid = GridSpec::new(n, 6.0, 0.4);
    let t0 = Instant::now();
    let data = synthesize_cauchy_data(&grid, &cfg).unwrap();
    println!("synthesis: {:?}", t0.elapsed());
    let t0 = Instant::now();
    let params = EvolveParams { save_stride: 0, ..EvolveParams::new(-1.0) };
    let h = evolve_with(&data, &grid, &params, |_| Ok(())).unwrap();
    let steps = ((-1.0f64 - data.t_init) / grid.dt()).ceil();
    let el = t0.elapsed();
    println!("evolve n={n}: {:?} for {} steps, failure={:?}", el, steps, h.failure);
    println!("cell-steps/s: {:.3e}", (n * n) as f64 * steps / el.as_secs_f64());
    println!("max repair: {:.3e}", h.series.repair.iter().cloned().fold(0.0, f64::max));
    println!("max constraint: {:.3e}", h.series.constraint.iter().cloned().fold(0.0, f64::max));
    let e = &h.series.energy;
    println!("energy drift: {:.3e}", (e.iter().cloned().fold(f64::MIN, f64::max) - e.iter().cloned().fold(f64::MAX, f64::min)) / e[0]);
}
