//! Null-polar coordinates, null frames, stress-energy frame components and
//! deformation currents on Minkowski R^{2+1}.
//!
//! The optical functions are u = (t−r)/2 (retarded) and ū = (t+r)/2
//! (advanced); their level sets are the outgoing cones C_u and incoming
//! cones C̄_ū, intersecting in circles S_{ū,u}. The frame fields are
//! L = ∂t + ∂r, L̄ = ∂t − ∂r and the angular derivative ∇̸ = r⁻¹∂θ, with
//! Ω = ∂θ = r∇̸ the rotation Killing field.

use crate::error::{Error, Result};
use crate::vec3::V3;

/// Multiplier / frame vector fields used in the flux identities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    /// L = ∂t + ∂r (outgoing null).
    L,
    /// L̄ = ∂t − ∂r (incoming null).
    Lb,
    /// Ω = ∂θ (rotation).
    Omega,
}

/// Null-polar coordinates of a spacetime point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullCoords {
    /// Retarded time u = (t − r)/2.
    pub u: f64,
    /// Advanced time ū = (t + r)/2.
    pub ub: f64,
    /// Spatial radius, ≥ 0.
    pub r: f64,
    /// Angle in [0, 2π); 0 on the axis.
    pub theta: f64,
    /// Set when r = 0, where θ is undefined.
    pub on_axis: bool,
}

impl NullCoords {
    pub fn t(&self) -> f64 {
        self.ub + self.u
    }

    pub fn x1(&self) -> f64 {
        self.r * self.theta.cos()
    }

    pub fn x2(&self) -> f64 {
        self.r * self.theta.sin()
    }
}

/// Cartesian (t, x₁, x₂) → null-polar coordinates.
pub fn to_null_coords(t: f64, x1: f64, x2: f64) -> NullCoords {
    let r = x1.hypot(x2);
    let on_axis = r == 0.0;
    let theta = if on_axis {
        0.0
    } else {
        let a = x2.atan2(x1);
        if a < 0.0 {
            a + std::f64::consts::TAU
        } else {
            a
        }
    };
    NullCoords { u: 0.5 * (t - r), ub: 0.5 * (t + r), r, theta, on_axis }
}

/// First-order null-frame derivatives of a (possibly R³-valued) field at a
/// point, together with the radius that produced them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullFrameDeriv {
    /// Lφ = ∂tφ + ∂rφ.
    pub l: V3,
    /// L̄φ = ∂tφ − ∂rφ.
    pub lb: V3,
    /// ∇̸φ = Ωφ / r.
    pub ang: V3,
    pub r: f64,
}

impl NullFrameDeriv {
    /// Reconstruct the Cartesian gradient (∂tφ, ∂₁φ, ∂₂φ).
    pub fn to_cartesian(&self, theta: f64) -> (V3, V3, V3) {
        let dt = (self.l + self.lb).scale(0.5);
        let dr = (self.l - self.lb).scale(0.5);
        let (s, c) = theta.sin_cos();
        let d1 = dr.scale(c) - self.ang.scale(s);
        let d2 = dr.scale(s) + self.ang.scale(c);
        (dt, d1, d2)
    }
}

/// Assemble the null-frame derivatives from Cartesian gradients.
///
/// `grad_t`, `grad_x1`, `grad_x2` hold (∂t, ∂₁, ∂₂) of each target component.
/// Fails inside the axis exclusion radius, where ∂r and ∇̸ degenerate.
pub fn null_frame_derivatives(
    grad_t: V3,
    grad_x1: V3,
    grad_x2: V3,
    coords: &NullCoords,
    r_min: f64,
) -> Result<NullFrameDeriv> {
    if coords.r <= r_min {
        return Err(Error::AxisExclusion {
            t: coords.t(),
            x1: coords.x1(),
            x2: coords.x2(),
            r: coords.r,
            r_min,
        });
    }
    let (s, c) = coords.theta.sin_cos();
    let dr = grad_x1.scale(c) + grad_x2.scale(s);
    let ang = grad_x2.scale(c) - grad_x1.scale(s); // Ωφ/r = (x₁∂₂ − x₂∂₁)φ/r
    Ok(NullFrameDeriv { l: grad_t + dr, lb: grad_t - dr, ang, r: coords.r })
}

/// Frame components of the energy-momentum tensor
/// T_{αβ} = ∂αφ∂βφ − ½ g_{αβ} ∂^μφ∂_μφ, summed over target components.
///
/// Diagonal null entries are T(L,L) = |Lφ|², T(L̄,L̄) = |L̄φ|², and the mixed
/// one is T(L,L̄) = |∇̸φ|²; all three are nonnegative (dominant energy). The
/// rotation entries follow from g(Ω,L) = g(Ω,L̄) = 0: T(Ω,Y) = Ωφ·Yφ.
pub fn stress_energy(d: &NullFrameDeriv, x: Frame, y: Frame) -> f64 {
    match (x, y) {
        (Frame::L, Frame::L) => d.l.norm_sq(),
        (Frame::Lb, Frame::Lb) => d.lb.norm_sq(),
        (Frame::L, Frame::Lb) | (Frame::Lb, Frame::L) => d.ang.norm_sq(),
        (Frame::Omega, Frame::L) | (Frame::L, Frame::Omega) => d.ang.scale(d.r).dot(d.l),
        (Frame::Omega, Frame::Lb) | (Frame::Lb, Frame::Omega) => d.ang.scale(d.r).dot(d.lb),
        (Frame::Omega, Frame::Omega) => {
            // T(Ω,Ω) = |Ωφ|² − ½ g(Ω,Ω) ∂^μφ∂_μφ, g(Ω,Ω) = r².
            let q = -d.l.dot(d.lb) + d.ang.norm_sq();
            d.r * d.r * (d.ang.norm_sq() - 0.5 * q)
        }
    }
}

/// Deformation current K^X = T^{μν} (X)π_{μν} for the multipliers.
///
/// K^Ω = 0 (Ω is Killing); K^L = (1/2r)(|∇̸φ|² + Lφ·L̄φ) and K^{L̄} = −K^L.
pub fn deformation_current(x: Frame, d: &NullFrameDeriv, r: f64) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::Config(vec![format!("deformation current needs r > 0, got {r}")]));
    }
    Ok(match x {
        Frame::Omega => 0.0,
        Frame::L => 0.5 / r * (d.ang.norm_sq() + d.l.dot(d.lb)),
        Frame::Lb => -0.5 / r * (d.ang.norm_sq() + d.l.dot(d.lb)),
    })
}
