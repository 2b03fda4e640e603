//! The null form Q₀, its pointwise null-structure bound, commutator
//! identities with the frame fields, and the right-hand sides of the
//! rotation/null-commuted wave map equation.
//!
//! Q₀(∇φ,∇ψ) = g^{αβ}∂_αφ∂_βψ = −∂tφ∂tψ + ∂₁φ∂₁ψ + ∂₂φ∂₂ψ. In the null
//! frame it expands as
//!
//! Q₀ = −½(Lφ·L̄ψ + L̄φ·Lψ) + ∇̸φ·∇̸ψ,
//!
//! with no LL term; Cauchy–Schwarz then gives the pointwise bound
//! |Q₀| ≤ |Lφ||L̄ψ| + |L̄φ||Lψ| + |∇̸φ||∇̸ψ| with constant one.
//!
//! Commutation with L and L̄ produces the 1/r structure
//!
//! X(Q₀(∇φ,∇ψ)) − Q₀(∇Xφ,∇ψ) − Q₀(∇φ,∇Xψ) = ∓(1/r)(2Q₀ + Lφ L̄ψ + L̄φ Lψ),
//!
//! with the minus sign for X = L and plus for X = L̄; equivalently
//! ±(2/r)∇̸φ·∇̸ψ. The signs follow from [L,L̄] = 0 and [L,∇̸] = −(1/r)∇̸,
//! and every formula in this module is pinned by residual tests against
//! exact jet derivatives.

use crate::analytic::{FrameOps, ScalarField, VectorJetField};
use crate::error::{Error, Result};
use crate::geometry::{null_frame_derivatives, Frame, NullCoords};
use crate::jet::Jet3;
use crate::vec3::V3;

/// Cartesian gradients of a pair of R³-valued fields at one point.
/// Index 0 is ∂t, 1 is ∂₁, 2 is ∂₂; each entry collects the three target
/// components.
#[derive(Debug, Clone, Copy)]
pub struct GradientPair {
    pub dphi: [V3; 3],
    pub dpsi: [V3; 3],
}

/// Q₀ per target component (signature −,+,+ contraction over spacetime).
pub fn q0(p: &GradientPair) -> V3 {
    let mut out = V3::ZERO;
    for j in 0..3 {
        out[j] = -p.dphi[0][j] * p.dpsi[0][j]
            + p.dphi[1][j] * p.dpsi[1][j]
            + p.dphi[2][j] * p.dpsi[2][j];
    }
    out
}

/// Q₀ contracted over target components, the scalar entering the wave map
/// source φ·Q₀(∇φ,∇φ).
pub fn q0_scalar(p: &GradientPair) -> f64 {
    let v = q0(p);
    v[0] + v[1] + v[2]
}

/// Q₀ from null-frame data (the LL-free expansion).
#[inline]
pub fn q0_frame(l_a: V3, lb_a: V3, ang_a: V3, l_b: V3, lb_b: V3, ang_b: V3) -> f64 {
    -0.5 * (l_a.dot(lb_b) + lb_a.dot(l_b)) + ang_a.dot(ang_b)
}

/// |Q₀(∇φ,∇ψ)| / (|Lφ||L̄ψ| + |L̄φ||Lψ| + |∇̸φ||∇̸ψ|).
///
/// Bounded by 1; both zero → 0 by convention. The LφLψ product is absent
/// from the denominator — that is the point of the null structure.
pub fn q0_null_bound_ratio(p: &GradientPair, coords: &NullCoords, r_min: f64) -> Result<f64> {
    let fa = null_frame_derivatives(p.dphi[0], p.dphi[1], p.dphi[2], coords, r_min)?;
    let fb = null_frame_derivatives(p.dpsi[0], p.dpsi[1], p.dpsi[2], coords, r_min)?;
    let num = q0_scalar(p).abs();
    let den = fa.l.norm() * fb.lb.norm() + fa.lb.norm() * fb.l.norm() + fa.ang.norm() * fb.ang.norm();
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(num / den)
}

fn q0_of_jets(a: &Jet3, b: &Jet3) -> f64 {
    -a.d(1, 0, 0) * b.d(1, 0, 0) + a.d(0, 1, 0) * b.d(0, 1, 0) + a.d(0, 0, 1) * b.d(0, 0, 1)
}

/// Q₀(∇a,∇b) as a jet (for differentiating the null form itself).
fn q0_jet(a: &Jet3, b: &Jet3) -> Jet3 {
    let t = a.partial(0).mul(&b.partial(0));
    let x = a.partial(1).mul(&b.partial(1));
    let y = a.partial(2).mul(&b.partial(2));
    x.add(&y).sub(&t)
}

/// Max residual of the [X, Q₀] commutation formula over sample points,
/// with exact derivatives from jets. X is L or L̄.
pub fn commutator_residual_q0(
    x: Frame,
    phi: &ScalarField,
    psi: &ScalarField,
    points: &[(f64, f64, f64)],
) -> Result<f64> {
    let sign = match x {
        Frame::L => -1.0,
        Frame::Lb => 1.0,
        Frame::Omega => {
            return Err(Error::UnknownIdentity("q0 commutator is for X ∈ {L, Lb}".into()))
        }
    };
    let mut worst = 0.0f64;
    for &(t, px, py) in points {
        let ops = FrameOps::new(px, py);
        let r = ops.r();
        let ja = phi.jet(t, px, py);
        let jb = psi.jet(t, px, py);
        let apply = |f: &Jet3| match x {
            Frame::L => ops.l(f),
            _ => ops.lb(f),
        };
        let xq0 = apply(&q0_jet(&ja, &jb)).val();
        let q0_xa = q0_of_jets(&apply(&ja), &jb);
        let q0_xb = q0_of_jets(&ja, &apply(&jb));
        let q0v = q0_of_jets(&ja, &jb);
        let la = ops.l(&ja).val();
        let lba = ops.lb(&ja).val();
        let lb_ = ops.l(&jb).val();
        let lbb = ops.lb(&jb).val();
        let corr = (2.0 * q0v + la * lbb + lba * lb_) / r;
        let resid = xq0 - q0_xa - q0_xb - sign * corr;
        worst = worst.max(resid.abs());
    }
    Ok(worst)
}

/// Identities of the vector-field commutator table, checked with exact
/// derivatives. Returns the max residual over the sample points.
///
/// Accepted ids: `omega_slash` ([Ω,∇̸] = 0), `box_omega` ([□,Ω] = 0),
/// `box_l` and `box_lb` (the 1/(2r²) and 2/r Δ̸ corrections).
pub fn commutator_residual_vectorfields(
    identity_id: &str,
    field: &ScalarField,
    points: &[(f64, f64, f64)],
) -> Result<f64> {
    if !matches!(identity_id, "omega_slash" | "box_omega" | "box_l" | "box_lb") {
        return Err(Error::UnknownIdentity(identity_id.into()));
    }
    let mut worst = 0.0f64;
    for &(t, px, py) in points {
        let ops = FrameOps::new(px, py);
        let r = ops.r();
        let f = field.jet(t, px, py);
        let resid = match identity_id {
            "omega_slash" => ops.omega(&ops.slash(&f)).val() - ops.slash(&ops.omega(&f)).val(),
            "box_omega" => ops.box_op(&ops.omega(&f)).val() - ops.omega(&ops.box_op(&f)).val(),
            "box_l" => {
                let lf = ops.l(&f);
                ops.box_op(&lf).val() - ops.l(&ops.box_op(&f)).val()
                    + (lf.val() - ops.lb(&f).val()) / (2.0 * r * r)
                    + 2.0 / r * ops.lap_ang(&f).val()
            }
            "box_lb" => {
                let lbf = ops.lb(&f);
                ops.box_op(&lbf).val() - ops.lb(&ops.box_op(&f)).val()
                    + (lbf.val() - ops.l(&f).val()) / (2.0 * r * r)
                    - 2.0 / r * ops.lap_ang(&f).val()
            }
            other => return Err(Error::UnknownIdentity(other.into())),
        };
        worst = worst.max(resid.abs());
    }
    Ok(worst)
}

/// Which commuted field the right-hand side is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommutedKind {
    /// □ Ω^n φ
    OmegaN,
    /// □ L Ω^n φ
    LOmegaN,
    /// □ L̄ Ω^n φ
    LbOmegaN,
}

/// All frame-derivative data of a field at one point needed to evaluate the
/// commuted right-hand sides up to n = 2.
///
/// Entries are indexed by the rotation order k. Mixed second entries use
/// that Ω commutes with L, L̄ and □, so e.g. L²Ω^kφ = Ω^k L²φ.
#[derive(Debug, Clone)]
pub struct FieldJet {
    pub r: f64,
    /// Ω^k φ.
    pub omega: [V3; 3],
    /// L Ω^k φ.
    pub l_omega: [V3; 3],
    /// L̄ Ω^k φ.
    pub lb_omega: [V3; 3],
    /// ∇̸ Ω^k φ.
    pub slash_omega: [V3; 3],
    /// L² Ω^k φ.
    pub l2_omega: [V3; 3],
    /// L̄² Ω^k φ.
    pub lb2_omega: [V3; 3],
    /// L L̄ Ω^k φ (= L̄ L Ω^k φ).
    pub llb_omega: [V3; 3],
    /// ∇̸ L Ω^k φ.
    pub slash_l_omega: [V3; 3],
    /// ∇̸ L̄ Ω^k φ.
    pub slash_lb_omega: [V3; 3],
    /// Δ̸ Ω^k φ.
    pub lap_omega: [V3; 3],
}

impl FieldJet {
    /// Exact evaluation from an analytic field.
    pub fn from_analytic(field: &dyn VectorJetField, t: f64, x: f64, y: f64) -> FieldJet {
        let ops = FrameOps::new(x, y);
        let jets = field.jets(t, x, y);
        let mut fj = FieldJet {
            r: ops.r(),
            omega: [V3::ZERO; 3],
            l_omega: [V3::ZERO; 3],
            lb_omega: [V3::ZERO; 3],
            slash_omega: [V3::ZERO; 3],
            l2_omega: [V3::ZERO; 3],
            lb2_omega: [V3::ZERO; 3],
            llb_omega: [V3::ZERO; 3],
            slash_l_omega: [V3::ZERO; 3],
            slash_lb_omega: [V3::ZERO; 3],
            lap_omega: [V3::ZERO; 3],
        };
        for c in 0..3 {
            let mut om = jets[c];
            for k in 0..3 {
                fj.omega[k][c] = om.val();
                let l = ops.l(&om);
                let lb = ops.lb(&om);
                fj.l_omega[k][c] = l.val();
                fj.lb_omega[k][c] = lb.val();
                fj.slash_omega[k][c] = ops.slash(&om).val();
                fj.l2_omega[k][c] = ops.l(&l).val();
                fj.lb2_omega[k][c] = ops.lb(&lb).val();
                fj.llb_omega[k][c] = ops.l(&lb).val();
                fj.slash_l_omega[k][c] = ops.slash(&l).val();
                fj.slash_lb_omega[k][c] = ops.slash(&lb).val();
                fj.lap_omega[k][c] = ops.lap_ang(&om).val();
                if k < 2 {
                    om = ops.omega(&om);
                }
            }
        }
        fj
    }

    fn q0s(&self, p: usize, q: usize) -> f64 {
        q0_frame(
            self.l_omega[p],
            self.lb_omega[p],
            self.slash_omega[p],
            self.l_omega[q],
            self.lb_omega[q],
            self.slash_omega[q],
        )
    }

    /// Q₀(∇LΩ^pφ, ∇Ω^qφ).
    fn q0s_l(&self, p: usize, q: usize) -> f64 {
        q0_frame(
            self.l2_omega[p],
            self.llb_omega[p],
            self.slash_l_omega[p],
            self.l_omega[q],
            self.lb_omega[q],
            self.slash_omega[q],
        )
    }

    /// Q₀(∇L̄Ω^pφ, ∇Ω^qφ).
    fn q0s_lb(&self, p: usize, q: usize) -> f64 {
        q0_frame(
            self.llb_omega[p],
            self.lb2_omega[p],
            self.slash_lb_omega[p],
            self.l_omega[q],
            self.lb_omega[q],
            self.slash_omega[q],
        )
    }
}

fn multinomial(n: usize, i: usize, p: usize, q: usize) -> f64 {
    const F: [f64; 3] = [1.0, 1.0, 2.0];
    F[n] / (F[i] * F[p] * F[q])
}

/// Right-hand side of the commuted wave map equation, □(D Ω^n φ) = RHS,
/// with exact constants. Supports n ≤ 2.
pub fn commuted_equation_rhs(n: usize, which: CommutedKind, f: &FieldJet) -> Result<V3> {
    if n > 2 {
        return Err(Error::UnknownIdentity(format!("commuted order n={n} unsupported (max 2)")));
    }
    let r = f.r;
    let mut rhs = V3::ZERO;
    for i in 0..=n {
        for p in 0..=(n - i) {
            let q = n - i - p;
            let c = multinomial(n, i, p, q);
            match which {
                CommutedKind::OmegaN => {
                    rhs += f.omega[i].scale(c * f.q0s(p, q));
                }
                CommutedKind::LOmegaN => {
                    let cross = f.l_omega[p].dot(f.lb_omega[q]) + f.lb_omega[p].dot(f.l_omega[q]);
                    let dq0 = f.q0s_l(p, q) + f.q0s_l(q, p) - (2.0 * f.q0s(p, q) + cross) / r;
                    rhs += f.l_omega[i].scale(c * f.q0s(p, q)) + f.omega[i].scale(c * dq0);
                }
                CommutedKind::LbOmegaN => {
                    let cross = f.l_omega[p].dot(f.lb_omega[q]) + f.lb_omega[p].dot(f.l_omega[q]);
                    let dq0 = f.q0s_lb(p, q) + f.q0s_lb(q, p) + (2.0 * f.q0s(p, q) + cross) / r;
                    rhs += f.lb_omega[i].scale(c * f.q0s(p, q)) + f.omega[i].scale(c * dq0);
                }
            }
        }
    }
    match which {
        CommutedKind::OmegaN => {}
        CommutedKind::LOmegaN => {
            rhs -= (f.l_omega[n] - f.lb_omega[n]).scale(0.5 / (r * r));
            rhs -= f.lap_omega[n].scale(2.0 / r);
        }
        CommutedKind::LbOmegaN => {
            rhs -= (f.lb_omega[n] - f.l_omega[n]).scale(0.5 / (r * r));
            rhs += f.lap_omega[n].scale(2.0 / r);
        }
    }
    Ok(rhs)
}
