//! Uniform Cartesian grid specification and field storage.

use crate::error::{Error, Result};
use crate::vec3::V3;
use serde::{Deserialize, Serialize};

/// Boundary handling for the Cauchy evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Field clamped to the constant map (0,0,1) on the outer ring.
    /// Legitimate while finite propagation speed keeps the pulse interior;
    /// a boundary monitor enforces that.
    #[default]
    DirichletNorthPole,
    /// Periodic wrap, for manufactured-solution tests.
    Periodic,
}

/// A square grid on [−L, L]² with n points per side.
///
/// Points sit at x_i = −L + i·h with h = 2L/n; with even n the axis r = 0
/// falls exactly on a grid point.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub l_box: f64,
    /// Courant factor; dt = cfl·h (possibly rounded down to land exactly on
    /// the final time).
    pub cfl: f64,
    #[serde(default)]
    pub boundary: Boundary,
}

impl GridSpec {
    pub fn new(n: usize, l_box: f64, cfl: f64) -> GridSpec {
        GridSpec { n, l_box, cfl, boundary: Boundary::DirichletNorthPole }
    }

    #[inline]
    pub fn h(&self) -> f64 {
        2.0 * self.l_box / self.n as f64
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.cfl * self.h()
    }

    /// Axis exclusion radius for null-frame diagnostics: 2 grid spacings.
    #[inline]
    pub fn r_min(&self) -> f64 {
        2.0 * self.h()
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        -self.l_box + i as f64 * self.h()
    }

    /// Continuous grid coordinate of a physical position (units of h).
    #[inline]
    pub fn grid_coord(&self, x: f64) -> f64 {
        (x + self.l_box) / self.h()
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.n < 64 {
            errs.push(format!("grid.n = {} but at least 64 points per side are required", self.n));
        }
        if self.l_box <= 0.0 {
            errs.push(format!("grid.l_box = {} must be positive", self.l_box));
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            errs.push(format!("grid.cfl = {} outside (0, 0.5]", self.cfl));
        }
        errs
    }
}

/// An n×n plane of target-space vectors, row-major.
#[derive(Debug, Clone)]
pub struct Plane {
    pub n: usize,
    pub data: Vec<V3>,
}

impl Plane {
    pub fn fill(n: usize, v: V3) -> Plane {
        Plane { n, data: vec![v; n * n] }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> V3 {
        self.data[j * self.n + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: V3) {
        self.data[j * self.n + i] = v;
    }

    pub fn rows(&self) -> std::slice::Chunks<'_, V3> {
        self.data.chunks(self.n)
    }

    pub fn rows_mut(&mut self) -> std::slice::ChunksMut<'_, V3> {
        self.data.chunks_mut(self.n)
    }
}

/// Resolution precondition for short-pulse data: the pulse support annulus
/// (radial width 4δ around r = −t_init) must carry at least 16 grid points,
/// i.e. h ≤ δ/4. Returns the smallest admissible n on failure.
pub fn check_pulse_resolution(grid: &GridSpec, delta: f64) -> Result<()> {
    let h = grid.h();
    if h > delta / 4.0 {
        let need = (8.0 * grid.l_box / delta).ceil() as usize + 1;
        return Err(Error::Config(vec![format!(
            "grid too coarse for pulse width delta={delta}: h={h:.5e} exceeds delta/4; \
             need n >= {need} at l_box={}",
            grid.l_box
        )]));
    }
    Ok(())
}
