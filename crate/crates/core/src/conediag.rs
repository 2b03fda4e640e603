//! Double-null diagnostics on a Cauchy evolution.
//!
//! Cone slices C_u (outgoing) and C̄_ū (incoming) are reconstructed from the
//! evolution by sampling rings S_{ū,u}: bicubic (4-point Lagrange tensor)
//! interpolation in space of stencil-evaluated derivatives, linear
//! interpolation in time between step states, and exact spectral
//! differentiation in θ for rotation derivatives. Everything downstream —
//! the energy norm families E/Ē/F/F̄, the flux balances, the commuted
//! equation residuals — consumes these rings.
//!
//! Mixed derivatives use that Ω commutes with L, L̄ and □, so e.g.
//! ‖L∇̸^kφ‖ is realized as ‖Ω^k(Lφ)‖/r^k from spectral derivatives of the
//! Lφ ring.

use crate::error::{Error, Result};
use crate::evolve::{rhs_at, FieldState, History, IntervalCtx};
use crate::geometry::{to_null_coords, Frame, NullCoords};
use crate::grid::{Boundary, GridSpec};
use crate::vec3::V3;
use rayon::prelude::*;
use rustfft::{num_complex::Complex64, FftPlanner};

/// What a cone plan's fixed coordinate means.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeKind {
    /// C_u: fixed u, rings parameterized by ū.
    Outgoing,
    /// C̄_ū: fixed ū, rings parameterized by u.
    Incoming,
    /// Annulus in a constant-time slice, rings parameterized by r
    /// (the flat boundary piece of flux balances on a Cauchy domain).
    TimeAnnulus,
}

/// A requested cone slice.
#[derive(Debug, Clone)]
pub struct ConePlan {
    pub kind: ConeKind,
    /// The fixed coordinate: u, ū or t depending on kind.
    pub level: f64,
    /// Values of the varying coordinate (ū, u or r), strictly increasing.
    pub coords: Vec<f64>,
    pub theta_count: usize,
}

impl ConePlan {
    pub fn uniform(lo: f64, hi: f64, count: usize) -> Vec<f64> {
        assert!(count >= 2 && hi > lo, "need an increasing range");
        (0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect()
    }

    pub fn outgoing(u: f64, ub_range: (f64, f64), count: usize, theta_count: usize) -> ConePlan {
        ConePlan {
            kind: ConeKind::Outgoing,
            level: u,
            coords: Self::uniform(ub_range.0, ub_range.1, count),
            theta_count,
        }
    }

    pub fn incoming(ub: f64, u_range: (f64, f64), count: usize, theta_count: usize) -> ConePlan {
        ConePlan {
            kind: ConeKind::Incoming,
            level: ub,
            coords: Self::uniform(u_range.0, u_range.1, count),
            theta_count,
        }
    }

    pub fn time_annulus(t: f64, r_range: (f64, f64), count: usize, theta_count: usize) -> ConePlan {
        ConePlan {
            kind: ConeKind::TimeAnnulus,
            level: t,
            coords: Self::uniform(r_range.0, r_range.1, count),
            theta_count,
        }
    }

    /// (t, r) of the ring at one value of the varying coordinate.
    fn ring_geometry(&self, c: f64) -> (f64, f64) {
        match self.kind {
            ConeKind::Outgoing => (self.level + c, c - self.level),
            ConeKind::Incoming => (c + self.level, self.level - c),
            ConeKind::TimeAnnulus => (self.level, c),
        }
    }
}

/// Raw interpolated channels on one ring, before spectral work.
#[derive(Debug, Clone)]
struct RawRing {
    chans: [Vec<V3>; 10],
}

const CH_PHI: usize = 0;
const CH_PI: usize = 1;
const CH_DX: usize = 2;
const CH_DY: usize = 3;
const CH_DXX: usize = 4;
const CH_DYY: usize = 5;
const CH_DXY: usize = 6;
const CH_PIX: usize = 7;
const CH_PIY: usize = 8;
const CH_PIT: usize = 9;

/// One ring of a finished cone slice, with frame and rotation derivatives.
#[derive(Debug, Clone)]
pub struct ConeRing {
    /// The varying coordinate value (ū, u or r per the slice kind).
    pub coord: f64,
    pub t: f64,
    pub r: f64,
    /// Ω^k φ, k = 0..4.
    pub om_phi: [Vec<V3>; 5],
    /// Ω^k (Lφ), k = 0..2.
    pub om_l: [Vec<V3>; 3],
    /// Ω^k (L̄φ), k = 0..2.
    pub om_lb: [Vec<V3>; 3],
    /// Ω^k (L²φ), k = 0..1.
    pub om_l2: [Vec<V3>; 2],
    /// Ω^k (L̄²φ), k = 0..1.
    pub om_lb2: [Vec<V3>; 2],
    /// Ω^k (∂t²φ), k = 0..2.
    pub om_pit: [Vec<V3>; 3],
    /// Ω^k (∂r²φ), k = 0..2.
    pub om_rr: [Vec<V3>; 3],
    /// Ω^k (∂rφ), k = 0..2.
    pub om_dr: [Vec<V3>; 3],
    pub pi: Vec<V3>,
}

impl ConeRing {
    /// ∇̸^k φ at a θ node (Ω^kφ / r^k).
    #[inline]
    pub fn slash_phi(&self, k: usize, i: usize) -> V3 {
        self.om_phi[k][i].scale(self.r.powi(-(k as i32)))
    }
}

/// A reconstructed cone (or annulus) slice.
#[derive(Debug, Clone)]
pub struct ConeSlice {
    pub kind: ConeKind,
    pub level: f64,
    pub theta_count: usize,
    pub rings: Vec<ConeRing>,
}

impl ConeSlice {
    pub fn d_theta(&self) -> f64 {
        std::f64::consts::TAU / self.theta_count as f64
    }

    /// Max over all nodes of |q(ring, node)|.
    pub fn max_node_norm<F>(&self, q: F) -> f64
    where
        F: Fn(&ConeRing, usize) -> V3,
    {
        let mut worst = 0.0f64;
        for ring in &self.rings {
            for i in 0..self.theta_count {
                worst = worst.max(q(ring, i).norm());
            }
        }
        worst
    }

    /// ∫ f dμ over rings with coord ≤ limit, cone measure r dθ d(coord):
    /// trapezoid along the cone, exact periodic sum in θ.
    pub fn integral<F>(&self, limit: f64, f: F) -> f64
    where
        F: Fn(&ConeRing, usize) -> f64,
    {
        let dth = self.d_theta();
        let m = self.rings.iter().take_while(|r| r.coord <= limit + 1e-12).count();
        if m < 2 {
            return 0.0;
        }
        let mut total = 0.0;
        for (idx, ring) in self.rings[..m].iter().enumerate() {
            let mut s = 0.0;
            for i in 0..self.theta_count {
                s += f(ring, i);
            }
            let dc = if idx == 0 {
                (self.rings[1].coord - self.rings[0].coord) * 0.5
            } else if idx == m - 1 {
                (self.rings[m - 1].coord - self.rings[m - 2].coord) * 0.5
            } else {
                (self.rings[idx + 1].coord - self.rings[idx - 1].coord) * 0.5
            };
            total += s * ring.r * dth * dc;
        }
        total
    }

    pub fn l2_norm<F>(&self, limit: f64, q: F) -> f64
    where
        F: Fn(&ConeRing, usize) -> V3,
    {
        self.integral(limit, |r, i| q(r, i).norm_sq()).sqrt()
    }

    pub fn max_coord(&self) -> f64 {
        self.rings.last().map(|r| r.coord).unwrap_or(f64::NAN)
    }
}

// ---------------------------------------------------------------------------
// sampling

const LAGRANGE_MARGIN: isize = 6;

fn lagrange_weights(f: f64) -> [f64; 4] {
    [
        -f * (f - 1.0) * (f - 2.0) / 6.0,
        (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0,
        -(f + 1.0) * f * (f - 2.0) / 2.0,
        (f + 1.0) * f * (f - 1.0) / 6.0,
    ]
}

const S1: [(isize, f64); 4] =
    [(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)];
const S2: [(isize, f64); 5] = [
    (-2, -1.0 / 12.0),
    (-1, 16.0 / 12.0),
    (0, -30.0 / 12.0),
    (1, 16.0 / 12.0),
    (2, -1.0 / 12.0),
];

/// How ∂t²φ is evaluated at grid cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecondTimeDeriv {
    /// Centered difference of π across neighboring stored states; falls
    /// back to the equation at history ends.
    TimeStencil,
    /// Evaluate the evolution equation ∂t²φ = Δφ + φ·Q₀ at the cell — the
    /// memory-free option while streaming. Valid for fields that solve the
    /// equation (everything the solver produces).
    FromEquation,
}

struct CellSampler<'a> {
    grid: &'a GridSpec,
    state: &'a FieldState,
    /// (earlier, later) states bracketing `state`, for time stencils.
    neighbors: (Option<&'a FieldState>, Option<&'a FieldState>),
    mode: SecondTimeDeriv,
}

impl<'a> CellSampler<'a> {
    fn channels(&self, i: usize, j: usize) -> [V3; 10] {
        let h = self.grid.h();
        let phi = &self.state.phi;
        let pi = &self.state.pi;
        let mut dx = V3::ZERO;
        let mut dy = V3::ZERO;
        let mut pix = V3::ZERO;
        let mut piy = V3::ZERO;
        for &(o, c) in &S1 {
            dx += phi.at((i as isize + o) as usize, j).scale(c);
            dy += phi.at(i, (j as isize + o) as usize).scale(c);
            pix += pi.at((i as isize + o) as usize, j).scale(c);
            piy += pi.at(i, (j as isize + o) as usize).scale(c);
        }
        let mut dxx = V3::ZERO;
        let mut dyy = V3::ZERO;
        for &(o, c) in &S2 {
            dxx += phi.at((i as isize + o) as usize, j).scale(c);
            dyy += phi.at(i, (j as isize + o) as usize).scale(c);
        }
        let mut dxy = V3::ZERO;
        for &(ox, cx) in &S1 {
            for &(oy, cy) in &S1 {
                dxy +=
                    phi.at((i as isize + ox) as usize, (j as isize + oy) as usize).scale(cx * cy);
            }
        }
        let pit = match self.mode {
            SecondTimeDeriv::FromEquation => rhs_at(phi, pi, self.grid, i, j),
            SecondTimeDeriv::TimeStencil => match self.neighbors {
                (Some(bef), Some(aft)) => {
                    (aft.pi.at(i, j) - bef.pi.at(i, j)).scale(1.0 / (aft.t - bef.t))
                }
                _ => rhs_at(phi, pi, self.grid, i, j),
            },
        };
        let ih = 1.0 / h;
        [
            phi.at(i, j),
            pi.at(i, j),
            dx.scale(ih),
            dy.scale(ih),
            dxx.scale(ih * ih),
            dyy.scale(ih * ih),
            dxy.scale(ih * ih),
            pix.scale(ih),
            piy.scale(ih),
            pit,
        ]
    }

    /// Bicubic sample of all channels at a physical point.
    fn sample(&self, x: f64, y: f64) -> Result<[V3; 10]> {
        let n = self.grid.n as isize;
        let gx = self.grid.grid_coord(x);
        let gy = self.grid.grid_coord(y);
        let ix = gx.floor() as isize;
        let iy = gy.floor() as isize;
        if ix < LAGRANGE_MARGIN
            || iy < LAGRANGE_MARGIN
            || ix + LAGRANGE_MARGIN >= n
            || iy + LAGRANGE_MARGIN >= n
        {
            return Err(Error::ConeOutOfDomain(format!(
                "sample point ({x:.3}, {y:.3}) too close to the grid boundary"
            )));
        }
        let wx = lagrange_weights(gx - ix as f64);
        let wy = lagrange_weights(gy - iy as f64);
        let mut acc = [V3::ZERO; 10];
        for (b, &wyy) in wy.iter().enumerate() {
            for (a, &wxx) in wx.iter().enumerate() {
                let ci = (ix - 1 + a as isize) as usize;
                let cj = (iy - 1 + b as isize) as usize;
                let ch = self.channels(ci, cj);
                let w = wxx * wyy;
                for (slot, v) in ch.iter().enumerate() {
                    acc[slot] += v.scale(w);
                }
            }
        }
        Ok(acc)
    }
}

// ---------------------------------------------------------------------------
// extraction

#[derive(Debug, Clone, Copy)]
struct RingJob {
    t: f64,
    r: f64,
    plan: usize,
    ring: usize,
}

/// Collects ring samples for a set of cone plans while an evolution (or a
/// replayed history) streams by, then finishes them into [`ConeSlice`]s.
pub struct Extractor {
    plans: Vec<ConePlan>,
    jobs: Vec<RingJob>,
    next: usize,
    raw: Vec<Vec<Option<RawRing>>>,
    mode: SecondTimeDeriv,
}

impl Extractor {
    pub fn new(grid: &GridSpec, plans: Vec<ConePlan>, mode: SecondTimeDeriv) -> Result<Extractor> {
        let r_min = grid.r_min();
        let mut jobs = Vec::new();
        let mut raw = Vec::new();
        for (p, plan) in plans.iter().enumerate() {
            if plan.theta_count < 8 || !plan.theta_count.is_power_of_two() {
                return Err(Error::Config(vec![format!(
                    "theta_count {} must be a power of two >= 8",
                    plan.theta_count
                )]));
            }
            let mut rings = Vec::new();
            for (k, &c) in plan.coords.iter().enumerate() {
                let (t, r) = plan.ring_geometry(c);
                if r <= r_min {
                    return Err(Error::ConeOutOfDomain(format!(
                        "ring at coord {c} has r = {r:.4} inside the axis exclusion {r_min:.4}"
                    )));
                }
                jobs.push(RingJob { t, r, plan: p, ring: k });
                rings.push(None);
            }
            raw.push(rings);
        }
        jobs.sort_by(|a, b| a.t.total_cmp(&b.t));
        Ok(Extractor { plans, jobs, next: 0, raw, mode })
    }

    /// Feed one evolution interval. Call in time order.
    pub fn consume(&mut self, ctx: IntervalCtx<'_>) -> Result<()> {
        while self.next < self.jobs.len() {
            let job = self.jobs[self.next];
            if job.t > ctx.b.t + 1e-12 {
                break;
            }
            if job.t < ctx.a.t - 1e-9 {
                return Err(Error::ConeOutOfDomain(format!(
                    "ring at t = {} lies before the evolved range starting at {}",
                    job.t, ctx.a.t
                )));
            }
            let ring = self.sample_ring(&ctx, job)?;
            self.raw[job.plan][job.ring] = Some(ring);
            self.next += 1;
        }
        Ok(())
    }

    fn sample_ring(&self, ctx: &IntervalCtx<'_>, job: RingJob) -> Result<RawRing> {
        let nt = self.plans[job.plan].theta_count;
        let span = (ctx.b.t - ctx.a.t).max(1e-300);
        let alpha = ((job.t - ctx.a.t) / span).clamp(0.0, 1.0);
        let sa = CellSampler {
            grid: ctx.grid,
            state: ctx.a,
            neighbors: (ctx.before, Some(ctx.b)),
            mode: self.mode,
        };
        let sb = CellSampler {
            grid: ctx.grid,
            state: ctx.b,
            neighbors: (Some(ctx.a), ctx.after),
            mode: self.mode,
        };
        let dth = std::f64::consts::TAU / nt as f64;
        let samples: Vec<Result<[V3; 10]>> = (0..nt)
            .into_par_iter()
            .map(|i| {
                let th = i as f64 * dth;
                let (s, c) = th.sin_cos();
                let (x, y) = (job.r * c, job.r * s);
                let va = sa.sample(x, y)?;
                let vb = sb.sample(x, y)?;
                let mut out = [V3::ZERO; 10];
                for k in 0..10 {
                    out[k] = va[k].scale(1.0 - alpha) + vb[k].scale(alpha);
                }
                Ok(out)
            })
            .collect();
        let mut chans: [Vec<V3>; 10] = Default::default();
        for c in chans.iter_mut() {
            c.reserve(nt);
        }
        for s in samples {
            let v = s?;
            for (k, c) in chans.iter_mut().enumerate() {
                c.push(v[k]);
            }
        }
        Ok(RawRing { chans })
    }

    /// Spectral θ-derivatives and frame assembly.
    pub fn finish(self) -> Result<Vec<ConeSlice>> {
        if self.next < self.jobs.len() {
            let job = self.jobs[self.next];
            return Err(Error::ConeOutOfDomain(format!(
                "ring at t = {} was never reached by the evolution",
                job.t
            )));
        }
        let mut planner = FftPlanner::new();
        let mut out = Vec::with_capacity(self.plans.len());
        for (plan, rings) in self.plans.iter().zip(self.raw.into_iter()) {
            let nt = plan.theta_count;
            let fft = planner.plan_fft_forward(nt);
            let ifft = planner.plan_fft_inverse(nt);
            let mut slice = ConeSlice {
                kind: plan.kind,
                level: plan.level,
                theta_count: nt,
                rings: Vec::with_capacity(plan.coords.len()),
            };
            for (k, raw) in rings.into_iter().enumerate() {
                let raw = raw.expect("all rings fulfilled");
                let coord = plan.coords[k];
                let (t, r) = plan.ring_geometry(coord);
                let trig: Vec<(f64, f64)> =
                    (0..nt).map(|i| (i as f64 * std::f64::consts::TAU / nt as f64).sin_cos()).collect();
                let dr: Vec<V3> = (0..nt)
                    .map(|i| raw.chans[CH_DX][i].scale(trig[i].1) + raw.chans[CH_DY][i].scale(trig[i].0))
                    .collect();
                let rr: Vec<V3> = (0..nt)
                    .map(|i| {
                        let (s, c) = trig[i];
                        raw.chans[CH_DXX][i].scale(c * c)
                            + raw.chans[CH_DXY][i].scale(2.0 * c * s)
                            + raw.chans[CH_DYY][i].scale(s * s)
                    })
                    .collect();
                let drpi: Vec<V3> = (0..nt)
                    .map(|i| raw.chans[CH_PIX][i].scale(trig[i].1) + raw.chans[CH_PIY][i].scale(trig[i].0))
                    .collect();
                let pit = &raw.chans[CH_PIT];
                let l: Vec<V3> = (0..nt).map(|i| raw.chans[CH_PI][i] + dr[i]).collect();
                let lb: Vec<V3> = (0..nt).map(|i| raw.chans[CH_PI][i] - dr[i]).collect();
                let l2: Vec<V3> = (0..nt).map(|i| pit[i] + drpi[i].scale(2.0) + rr[i]).collect();
                let lb2: Vec<V3> = (0..nt).map(|i| pit[i] - drpi[i].scale(2.0) + rr[i]).collect();

                let om = |vals: &[V3], max_k: usize| -> Vec<Vec<V3>> {
                    ring_omega_derivs(vals, max_k, fft.as_ref(), ifft.as_ref())
                };
                let arr5 = |mut v: Vec<Vec<V3>>| -> [Vec<V3>; 5] {
                    [v.remove(0), v.remove(0), v.remove(0), v.remove(0), v.remove(0)]
                };
                let arr3 =
                    |mut v: Vec<Vec<V3>>| -> [Vec<V3>; 3] { [v.remove(0), v.remove(0), v.remove(0)] };
                let arr2 = |mut v: Vec<Vec<V3>>| -> [Vec<V3>; 2] { [v.remove(0), v.remove(0)] };
                slice.rings.push(ConeRing {
                    coord,
                    t,
                    r,
                    om_phi: arr5(om(&raw.chans[CH_PHI], 4)),
                    om_l: arr3(om(&l, 2)),
                    om_lb: arr3(om(&lb, 2)),
                    om_l2: arr2(om(&l2, 1)),
                    om_lb2: arr2(om(&lb2, 1)),
                    om_pit: arr3(om(pit, 2)),
                    om_rr: arr3(om(&rr, 2)),
                    om_dr: arr3(om(&dr, 2)),
                    pi: raw.chans[CH_PI].clone(),
                });
            }
            out.push(slice);
        }
        Ok(out)
    }
}

/// Ω^k (= ∂θ^k) of ring samples for k = 0..=max_k, via FFT of the
/// trigonometric interpolant. The Nyquist bin is zeroed for every
/// derivative order (smooth fields carry no content there; this keeps odd
/// derivatives real).
fn ring_omega_derivs(
    vals: &[V3],
    max_k: usize,
    fft: &dyn rustfft::Fft<f64>,
    ifft: &dyn rustfft::Fft<f64>,
) -> Vec<Vec<V3>> {
    let n = vals.len();
    let mut out = vec![vec![V3::ZERO; n]; max_k + 1];
    out[0].copy_from_slice(vals);
    if max_k == 0 {
        return out;
    }
    let inv_n = 1.0 / n as f64;
    for comp in 0..3 {
        let mut spec: Vec<Complex64> = vals.iter().map(|v| Complex64::new(v[comp], 0.0)).collect();
        fft.process(&mut spec);
        for (k, slot) in out.iter_mut().enumerate().skip(1) {
            let mut work: Vec<Complex64> = spec
                .iter()
                .enumerate()
                .map(|(idx, &s)| {
                    if idx == n / 2 {
                        return Complex64::new(0.0, 0.0);
                    }
                    let m = if idx < n / 2 { idx as f64 } else { idx as f64 - n as f64 };
                    s * Complex64::new(0.0, m).powu(k as u32)
                })
                .collect();
            ifft.process(&mut work);
            for (i, w) in work.iter().enumerate() {
                slot[i][comp] = w.re * inv_n;
            }
        }
    }
    out
}

/// Extract cone slices from a stored history (replay path; centered time
/// stencils for ∂t²φ require the history saved densely: slice spacing at
/// most the grid spacing).
pub fn extract_cones(history: &History, plans: Vec<ConePlan>) -> Result<Vec<ConeSlice>> {
    let spacing = history.max_slice_spacing();
    let limit = history.grid.h() * 1.0001;
    if spacing > limit {
        return Err(Error::ResolutionInsufficient {
            need: "second time derivatives on cones".into(),
            have: spacing,
            limit,
        });
    }
    let mut ex = Extractor::new(&history.grid, plans, SecondTimeDeriv::TimeStencil)?;
    history.replay(|ctx| ex.consume(ctx))?;
    ex.finish()
}

/// Single-cone convenience wrapper over [`extract_cones`].
pub fn extract_cone(
    history: &History,
    kind: ConeKind,
    level: f64,
    range: (f64, f64),
    null_count: usize,
    theta_count: usize,
) -> Result<ConeSlice> {
    let plan =
        ConePlan { kind, level, coords: ConePlan::uniform(range.0, range.1, null_count), theta_count };
    Ok(extract_cones(history, vec![plan])?.remove(0))
}

// ---------------------------------------------------------------------------
// energy norms

/// The weighted norm family at one (u, ū).
#[derive(Debug, Clone, serde::Serialize)]
pub struct EnergyReport {
    pub u: f64,
    pub ub: f64,
    /// E₁..E₃ on C_u.
    pub e: [f64; 3],
    /// Ē₁..Ē₃ on C̄_ū.
    pub eb: [f64; 3],
    /// F₂, F₃ on C_u.
    pub f: [f64; 2],
    /// F̄₂, F̄₃ on C̄_ū.
    pub fb: [f64; 2],
}

impl EnergyReport {
    pub fn aggregate(&self) -> f64 {
        self.e.iter().sum::<f64>()
            + self.eb.iter().sum::<f64>()
            + self.f.iter().sum::<f64>()
            + self.fb.iter().sum::<f64>()
    }

    /// Outgoing-cone part only (the part the initial data bounds directly).
    pub fn outgoing_part(&self) -> f64 {
        self.e.iter().sum::<f64>() + self.f.iter().sum::<f64>()
    }
}

/// Evaluate the norm family from an outgoing slice at u (rings over ū,
/// truncated at ū*) and an incoming slice at ū* (rings over u', truncated
/// at u). Weights: E_k = ‖∇̸^{k-1}Lφ‖ + δ^{-1/2}‖∇̸^kφ‖,
/// Ē_k = ‖∇̸^kφ‖ + δ^{-1/2}‖∇̸^{k-1}L̄φ‖, F_k = δ‖∇̸^{k-2}L²φ‖,
/// F̄_k = ‖∇̸^{k-2}L̄²φ‖.
pub fn energy_report(cu: &ConeSlice, cb: &ConeSlice, delta: f64, u: f64, ub: f64) -> EnergyReport {
    assert!(matches!(cu.kind, ConeKind::Outgoing) && matches!(cb.kind, ConeKind::Incoming));
    let sq = delta.sqrt();
    let e = |k: usize| -> f64 {
        let lk = cu.l2_norm(ub, |r, i| r.om_l[k - 1][i].scale(r.r.powi(1 - k as i32)));
        let ak = cu.l2_norm(ub, |r, i| r.slash_phi(k, i));
        lk + ak / sq
    };
    let ebk = |k: usize| -> f64 {
        let ak = cb.l2_norm(u, |r, i| r.slash_phi(k, i));
        let lbk = cb.l2_norm(u, |r, i| r.om_lb[k - 1][i].scale(r.r.powi(1 - k as i32)));
        ak + lbk / sq
    };
    let f =
        |k: usize| delta * cu.l2_norm(ub, |r, i| r.om_l2[k - 2][i].scale(r.r.powi(2 - k as i32)));
    let fbk = |k: usize| cb.l2_norm(u, |r, i| r.om_lb2[k - 2][i].scale(r.r.powi(2 - k as i32)));
    EnergyReport {
        u,
        ub,
        e: [e(1), e(2), e(3)],
        eb: [ebk(1), ebk(2), ebk(3)],
        f: [f(2), f(3)],
        fb: [fbk(2), fbk(3)],
    }
}

/// ‖L̄ Ω^i φ‖_{L²(C_u)} for i = 0 or 1: the transverse flux through an
/// outgoing cone, expected to scale like δ.
pub fn lb_phi_on_outgoing_cone(cu: &ConeSlice, i: usize) -> f64 {
    assert!(i <= 1 && matches!(cu.kind, ConeKind::Outgoing));
    cu.l2_norm(f64::INFINITY, |r, th| r.om_lb[i][th])
}

// ---------------------------------------------------------------------------
// flux identity

/// Source model entering the flux balance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceModel {
    /// Φ = 0: free linear wave (for injected oracle fields).
    Free,
    /// Φ = the rotation-commuted wave map right-hand side for Ω^iφ.
    WaveMap,
}

/// The rotation-commuted wave map source Σ c·Ω^kφ·Q₀(∇Ω^pφ,∇Ω^qφ) at a
/// ring node, n ≤ 2, from first-order frame data (Q₀ in its LL-free frame
/// expansion).
fn commuted_source(ring: &ConeRing, n: usize, i: usize) -> V3 {
    let q0s = |p: usize, q: usize| -> f64 {
        let ap = ring.om_phi[p + 1][i].scale(ring.r.powi(-1 - p as i32));
        let aq = ring.om_phi[q + 1][i].scale(ring.r.powi(-1 - q as i32));
        -0.5 * (ring.om_l[p][i].dot(ring.om_lb[q][i]) + ring.om_lb[p][i].dot(ring.om_l[q][i]))
            + ap.dot(aq)
    };
    let mut rhs = V3::ZERO;
    for k in 0..=n {
        for p in 0..=(n - k) {
            let q = n - k - p;
            const F: [f64; 3] = [1.0, 1.0, 2.0];
            let c = F[n] / (F[k] * F[p] * F[q]);
            rhs += ring.om_phi[k][i].scale(c * q0s(p, q));
        }
    }
    rhs
}

/// Everything bounding the flux domain D(u, ū*) ∩ {t ≥ t₀}.
pub struct FluxDomain<'a> {
    /// Outgoing cone at u over ū ∈ [0, ū*].
    pub cu: &'a ConeSlice,
    /// Incoming cone at ū* over u' ∈ [t₀ − ū*, u].
    pub cb: &'a ConeSlice,
    /// Incoming cone at ū = 0 over u' ∈ [t₀, u] (trivial for pulse data).
    pub cb0: &'a ConeSlice,
    /// Initial-slice annulus at t₀ between the two incoming cones.
    pub sigma0: &'a ConeSlice,
    /// Outgoing cones at ascending u' samples spanning [t₀ − ū*, u], each
    /// clipped to t ≥ t₀: the bulk quadrature grid.
    pub bulk: &'a [ConeSlice],
}

/// Both sides of the energy flux balance for multiplier X and field Ω^iφ:
///
/// ∫_{C_u}T(X,L) + ∫_{C̄}T(X,L̄)
///   = ∫_{Σ₀}T(X,∂t) dx + ∫_{C̄₀}T(X,L̄) − 2∬_D (K^X + Φ·XΩ^iφ) r dθ du dū,
///
/// cone measure r dθ d(null). The flat Σ₀ term replaces the initial-cone
/// flux of the characteristic setup, since data here lives on t = t₀.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FluxBalance {
    pub lhs_cu: f64,
    pub lhs_cb: f64,
    pub rhs_sigma0: f64,
    pub rhs_cb0: f64,
    pub rhs_bulk: f64,
    pub residual: f64,
}

const RESIDUAL_FLOOR: f64 = 1e-12;

pub fn energy_identity_residual(
    dom: &FluxDomain<'_>,
    x: Frame,
    field: usize,
    source: SourceModel,
) -> Result<FluxBalance> {
    if field > 2 {
        return Err(Error::UnknownIdentity(format!("field selector {field} (max Omega^2)")));
    }
    if matches!(x, Frame::Omega) {
        return Err(Error::UnknownIdentity("flux multiplier must be L or Lb".into()));
    }
    let i = field;
    // |∇̸Ω^iφ|² enters as the mixed frame component T(L,L̄).
    let ang = |r: &ConeRing, th: usize| r.om_phi[i + 1][th].scale(1.0 / r.r);
    let t_xl = |r: &ConeRing, th: usize| -> f64 {
        match x {
            Frame::L => r.om_l[i][th].norm_sq(),
            _ => ang(r, th).norm_sq(),
        }
    };
    let t_xlb = |r: &ConeRing, th: usize| -> f64 {
        match x {
            Frame::L => ang(r, th).norm_sq(),
            _ => r.om_lb[i][th].norm_sq(),
        }
    };

    let lhs_cu = dom.cu.integral(f64::INFINITY, t_xl);
    let lhs_cb = dom.cb.integral(f64::INFINITY, t_xlb);
    let rhs_cb0 = dom.cb0.integral(f64::INFINITY, t_xlb);
    // T(X, ∂t) = ½(T(X,L) + T(X,L̄)); annulus measure r dθ dr = dx.
    let rhs_sigma0 =
        dom.sigma0.integral(f64::INFINITY, |r, th| 0.5 * (t_xl(r, th) + t_xlb(r, th)));

    // bulk: inner cone integrals over ū (weight 2), outer trapezoid in u.
    let sgn = if matches!(x, Frame::L) { 1.0 } else { -1.0 };
    let inner: Vec<(f64, f64)> = dom
        .bulk
        .iter()
        .map(|slice| {
            let v = slice.integral(f64::INFINITY, |r, th| {
                let a = ang(r, th);
                let k_l = 0.5 / r.r * (a.norm_sq() + r.om_l[i][th].dot(r.om_lb[i][th]));
                let kx = sgn * k_l;
                let work = match source {
                    SourceModel::Free => 0.0,
                    SourceModel::WaveMap => {
                        let src = commuted_source(r, i, th);
                        let xd = match x {
                            Frame::L => r.om_l[i][th],
                            _ => r.om_lb[i][th],
                        };
                        src.dot(xd)
                    }
                };
                2.0 * (kx + work)
            });
            (slice.level, v)
        })
        .collect();
    let mut rhs_bulk = 0.0;
    for (k, &(u, v)) in inner.iter().enumerate() {
        let du = if inner.len() < 2 {
            0.0
        } else if k == 0 {
            (inner[1].0 - u) * 0.5
        } else if k == inner.len() - 1 {
            (u - inner[k - 1].0) * 0.5
        } else {
            (inner[k + 1].0 - inner[k - 1].0) * 0.5
        };
        rhs_bulk += v * du;
    }

    let lhs = lhs_cu + lhs_cb;
    let rhs = rhs_sigma0 + rhs_cb0 - rhs_bulk;
    let residual = (lhs - rhs).abs() / (lhs.abs() + rhs.abs() + RESIDUAL_FLOOR);
    Ok(FluxBalance { lhs_cu, lhs_cb, rhs_sigma0, rhs_cb0, rhs_bulk, residual })
}

// ---------------------------------------------------------------------------
// commuted equation residual on evolved data

/// Max pointwise residual of □Ω^nφ = Σ c·Ω^kφ·Q₀(∇Ω^pφ,∇Ω^qφ) over the
/// nodes of a slice, with □ = ∂t² − ∂r² − r⁻¹∂r − r⁻²∂θ² assembled from
/// the extracted channels. n ≤ 2 (matches the second-time-derivative depth
/// available from stored evolutions).
pub fn commuted_equation_residual_on_slice(slice: &ConeSlice, n: usize) -> Result<f64> {
    if n > 2 {
        return Err(Error::UnknownIdentity(format!("commuted order n={n} unsupported (max 2)")));
    }
    let mut worst = 0.0f64;
    for ring in &slice.rings {
        let r = ring.r;
        for i in 0..slice.theta_count {
            let box_f = ring.om_pit[n][i]
                - ring.om_rr[n][i]
                - ring.om_dr[n][i].scale(1.0 / r)
                - ring.om_phi[n + 2][i].scale(1.0 / (r * r));
            let rhs = commuted_source(ring, n, i);
            worst = worst.max((box_f - rhs).max_abs());
        }
    }
    Ok(worst)
}

/// Foliation consistency: each node's reconstructed (t, x) must map back to
/// the slice's fixed coordinate. Returns the max discrepancy.
pub fn foliation_consistency(slice: &ConeSlice) -> f64 {
    let mut worst = 0.0f64;
    for ring in &slice.rings {
        for i in 0..slice.theta_count {
            let th = i as f64 * slice.d_theta();
            let c: NullCoords = to_null_coords(ring.t, ring.r * th.cos(), ring.r * th.sin());
            let err = match slice.kind {
                ConeKind::Outgoing => (c.u - slice.level).abs(),
                ConeKind::Incoming => (c.ub - slice.level).abs(),
                ConeKind::TimeAnnulus => (c.t() - slice.level).abs(),
            };
            worst = worst.max(err);
        }
    }
    worst
}

/// Cone diagnostics presume the isolated-pulse (Dirichlet) configuration.
pub fn require_dirichlet(grid: &GridSpec) -> Result<()> {
    if !matches!(grid.boundary, Boundary::DirichletNorthPole) {
        return Err(Error::Config(vec![
            "cone diagnostics need the Dirichlet (isolated pulse) configuration".into(),
        ]));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{LinearTime, RotatingGeodesic, ScalarField, VectorField, VectorJetField};
    use crate::evolve::{evolve_with, EvolveParams};
    use crate::fit::convergence_order;

    /// Inject an analytic field as a history (bypassing evolution).
    fn injected_history(field: &dyn VectorJetField, grid: &GridSpec, t0: f64, t1: f64) -> History {
        let steps = ((t1 - t0) / grid.dt()).ceil() as usize;
        let dt = (t1 - t0) / steps as f64;
        let slices: Vec<FieldState> = (0..=steps)
            .map(|k| FieldState::from_analytic(field, grid, t0 + k as f64 * dt))
            .collect();
        History { grid: *grid, slices, failure: None, series: Default::default() }
    }

    fn constant_map() -> VectorField {
        VectorField([ScalarField::Const(0.0), ScalarField::Const(0.0), ScalarField::Const(1.0)])
    }

    #[test]
    fn constant_map_extracts_to_zero_derivatives() {
        let grid = GridSpec::new(64, 6.0, 0.4);
        let h = injected_history(&constant_map(), &grid, -2.0, -1.5);
        let cu = extract_cone(&h, ConeKind::Outgoing, -1.8, (0.05, 0.2), 8, 32).unwrap();
        for ring in &cu.rings {
            for i in 0..cu.theta_count {
                assert!(ring.om_l[0][i].norm() < 1e-12);
                assert!(ring.om_lb[0][i].norm() < 1e-12);
                assert!(ring.slash_phi(1, i).norm() < 1e-12);
                assert!((ring.om_phi[0][i][2] - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn linear_time_field_has_unit_null_derivatives() {
        let grid = GridSpec::new(128, 6.0, 0.4);
        let h = injected_history(&LinearTime, &grid, -2.3, -1.8);
        let cu = extract_cone(&h, ConeKind::Outgoing, -1.5, (-0.6, -0.45), 12, 32).unwrap();
        for ring in &cu.rings {
            for i in 0..cu.theta_count {
                assert!((ring.om_l[0][i][0] - 1.0).abs() < 1e-8, "L t = 1");
                assert!((ring.om_lb[0][i][0] - 1.0).abs() < 1e-8, "Lb t = 1");
                assert!(ring.slash_phi(1, i).norm() < 1e-8);
                assert!(ring.om_l2[0][i].norm() < 1e-6);
            }
        }
        assert!(foliation_consistency(&cu) < 1e-12);
    }

    #[test]
    fn geodesic_extraction_converges_under_refinement() {
        let field = RotatingGeodesic { omega: 1.1 };
        let mut errs = Vec::new();
        for n in [64usize, 128, 256] {
            let grid = GridSpec::new(n, 6.0, 0.4);
            let h = injected_history(&field, &grid, -2.2, -1.7);
            let cu = extract_cone(&h, ConeKind::Outgoing, -1.6, (-0.45, -0.3), 10, 32).unwrap();
            let mut worst = 0.0f64;
            for ring in &cu.rings {
                for i in 0..cu.theta_count {
                    let jets = field.jets(ring.t, ring.r, 0.0);
                    // spatially uniform: Lφ = ∂tφ, L²φ = ∂t²φ
                    let want_l = V3::new(jets[0].d(1, 0, 0), jets[1].d(1, 0, 0), 0.0);
                    let want_l2 = V3::new(jets[0].d(2, 0, 0), jets[1].d(2, 0, 0), 0.0);
                    worst = worst.max((ring.om_l[0][i] - want_l).max_abs());
                    worst = worst.max((ring.om_l2[0][i] - want_l2).max_abs());
                }
            }
            errs.push((grid.h(), worst));
        }
        let order = convergence_order(&errs).unwrap();
        assert!(order > 1.8, "cone extraction order {order} (errors {errs:?})");
    }

    /// Build the full flux domain plan set for a run starting at t0.
    fn flux_plans(t0: f64, u: f64, ubs: f64, nu: usize, theta: usize) -> Vec<ConePlan> {
        let mut plans = vec![
            ConePlan::outgoing(u, (0.0, ubs), 24, theta),
            ConePlan::incoming(ubs, (t0 - ubs, u), 48, theta),
            ConePlan::incoming(0.0, (t0, u), 48, theta),
            ConePlan::time_annulus(t0, (-t0, -t0 + 2.0 * ubs), 24, theta),
        ];
        for k in 0..nu {
            let uu = (t0 - ubs) + (u - (t0 - ubs)) * k as f64 / (nu - 1) as f64;
            let lo = (t0 - uu).max(0.0);
            if lo >= ubs - 1e-9 {
                continue;
            }
            plans.push(ConePlan::outgoing(uu, (lo, ubs), 24, theta));
        }
        plans
    }

    #[test]
    fn flux_identity_exact_for_linear_time_field() {
        // φ = t solves □φ = 0; the balance must close with the Free source.
        let grid = GridSpec::new(256, 6.0, 0.4);
        let (t0, u, ubs) = (-3.0, -2.0, 0.4);
        let h = injected_history(&LinearTime, &grid, t0, u + ubs + 0.05);
        let plans = flux_plans(t0, u, ubs, 33, 32);
        let slices = extract_cones(&h, plans).unwrap();
        let dom = FluxDomain {
            cu: &slices[0],
            cb: &slices[1],
            cb0: &slices[2],
            sigma0: &slices[3],
            bulk: &slices[4..],
        };
        for x in [Frame::L, Frame::Lb] {
            let bal = energy_identity_residual(&dom, x, 0, SourceModel::Free).unwrap();
            assert!(bal.residual < 2e-3, "flux residual {} for {x:?}: {bal:?}", bal.residual);
        }
    }

    #[test]
    fn constant_map_fluxes_vanish() {
        let grid = GridSpec::new(64, 6.0, 0.4);
        let h = injected_history(&constant_map(), &grid, -2.0, -1.3);
        let plans = flux_plans(-2.0, -1.6, 0.2, 9, 16);
        let slices = extract_cones(&h, plans).unwrap();
        let dom = FluxDomain {
            cu: &slices[0],
            cb: &slices[1],
            cb0: &slices[2],
            sigma0: &slices[3],
            bulk: &slices[4..],
        };
        let bal = energy_identity_residual(&dom, Frame::L, 0, SourceModel::WaveMap).unwrap();
        assert!(bal.residual < 1e-12, "{bal:?}");
        assert!(bal.lhs_cu < 1e-30, "stencil rounding only: {bal:?}");
    }

    #[test]
    fn streaming_and_replay_agree_on_smooth_runs() {
        // Evolve a weak pulse both ways; rings must agree to the accuracy of
        // the ∂t²φ realization (equation vs time stencil, both O(h²)).
        let cfg = crate::pulse::PulseConfig {
            delta: 0.2,
            u0: -2.0,
            profile_amp: 1.0,
            angular_modes: vec![(0, 1.0), (1, 0.4)],
        };
        let grid = GridSpec::new(256, 4.0, 0.4);
        let data = crate::pulse::synthesize_cauchy_data(&grid, &cfg).unwrap();
        let plan = || vec![ConePlan::outgoing(-1.6, (0.0, 0.2), 12, 32)];
        let mut ex = Extractor::new(&grid, plan(), SecondTimeDeriv::FromEquation).unwrap();
        let mut params = EvolveParams::new(-1.3);
        params.save_stride = 1; // identical interval spacing: only pit differs
        let hist = evolve_with(&data, &grid, &params, |ctx| ex.consume(ctx)).unwrap();
        assert!(hist.failure.is_none(), "{:?}", hist.failure);
        let stream = ex.finish().unwrap().remove(0);
        let replay = extract_cones(&hist, plan()).unwrap().remove(0);
        let mut worst = 0.0f64;
        let mut worst_l2 = 0.0f64;
        for (ra, rb) in stream.rings.iter().zip(replay.rings.iter()) {
            for i in 0..stream.theta_count {
                worst = worst.max((ra.om_l[0][i] - rb.om_l[0][i]).max_abs());
                worst_l2 = worst_l2.max((ra.om_l2[0][i] - rb.om_l2[0][i]).max_abs());
            }
        }
        assert!(worst < 1e-9, "first-derivative mismatch {worst}");
        // the two ∂t²φ realizations are independent O(h²) discretizations;
        // compare relative to the second-derivative scale
        let l2_scale = stream.max_node_norm(|r, i| r.om_l2[0][i]).max(1e-30);
        assert!(worst_l2 / l2_scale < 0.1, "relative L2 mismatch {}", worst_l2 / l2_scale);
        assert!(stream.max_node_norm(|r, i| r.om_l[0][i]) > 1e-3, "field should be nontrivial");
    }

    #[test]
    fn history_too_sparse_is_an_error() {
        let grid = GridSpec::new(64, 6.0, 0.4);
        let mut h = injected_history(&LinearTime, &grid, -2.0, -1.5);
        let mut k = 0;
        h.slices.retain(|_| {
            k += 1;
            k % 3 == 1
        });
        let r = extract_cone(&h, ConeKind::Outgoing, -1.8, (0.05, 0.2), 8, 32);
        assert!(matches!(r, Err(Error::ResolutionInsufficient { .. })));
    }

    #[test]
    fn axis_exclusion_rejected_at_plan_time() {
        let grid = GridSpec::new(64, 6.0, 0.4);
        let plan = ConePlan::outgoing(-0.05, (0.0, 0.04), 8, 16);
        assert!(matches!(
            Extractor::new(&grid, vec![plan], SecondTimeDeriv::FromEquation),
            Err(Error::ConeOutOfDomain(_))
        ));
    }

    #[test]
    fn commuted_residual_on_geodesic_slice_is_second_order() {
        let field = RotatingGeodesic { omega: 0.9 };
        let mut errs = Vec::new();
        for n in [64usize, 128, 256] {
            let grid = GridSpec::new(n, 6.0, 0.4);
            let h = injected_history(&field, &grid, -2.2, -1.7);
            let cu = extract_cone(&h, ConeKind::Outgoing, -1.6, (-0.45, -0.3), 10, 32).unwrap();
            errs.push((grid.h(), commuted_equation_residual_on_slice(&cu, 0).unwrap()));
        }
        let order = convergence_order(&errs).unwrap();
        assert!(order > 1.6, "commuted residual order {order} ({errs:?})");
        assert!(errs.last().unwrap().1 < 1e-3, "residual {:?}", errs);
    }

    #[test]
    fn pulse_energy_report_consistent_with_closed_form_data() {
        // E-norms at the first evolved cone should sit near the closed-form
        // values on the data cone (propagation + discretization allowance).
        let cfg = crate::pulse::PulseConfig {
            delta: 0.2,
            u0: -2.0,
            profile_amp: 1.0,
            angular_modes: vec![(0, 1.0), (2, 0.5)],
        };
        let grid = GridSpec::new(256, 4.0, 0.4);
        let data = crate::pulse::synthesize_cauchy_data(&grid, &cfg).unwrap();
        let u_probe = -1.7;
        let plans = vec![
            ConePlan::outgoing(u_probe, (0.0, cfg.delta), 24, 64),
            ConePlan::incoming(cfg.delta, (cfg.u0, u_probe), 24, 64),
        ];
        let mut ex = Extractor::new(&grid, plans, SecondTimeDeriv::FromEquation).unwrap();
        let params = EvolveParams { save_stride: 0, ..EvolveParams::new(-1.4) };
        let hist = evolve_with(&data, &grid, &params, |c| ex.consume(c)).unwrap();
        assert!(hist.failure.is_none(), "{:?}", hist.failure);
        let slices = ex.finish().unwrap();
        let rep = energy_report(&slices[0], &slices[1], cfg.delta, u_probe, cfg.delta);
        let table = crate::pulse::initial_cone_norms(&cfg, 400, 64);
        let e1_data = crate::pulse::cone_norm(&table, "L_nab0_phi").unwrap().l2
            + crate::pulse::cone_norm(&table, "nab1_phi").unwrap().l2 / cfg.delta.sqrt();
        assert!(rep.e[0] > 0.0 && rep.e[0].is_finite());
        let ratio = rep.e[0] / e1_data;
        assert!(
            (0.5..2.0).contains(&ratio),
            "E1 propagated {} vs data {} (ratio {ratio})",
            rep.e[0],
            e1_data
        );
        // the transverse flux must be small and finite
        let lb = lb_phi_on_outgoing_cone(&slices[0], 0);
        assert!(lb.is_finite() && lb < e1_data);
    }
}
