//! Closed-form test fields with exact derivatives, and frame operators on
//! their jets.
//!
//! Residual checks of differential identities need derivatives that are
//! exact to rounding; grid differencing would bury an identity error under
//! discretization error. The zoo below mixes polynomials, travelling
//! trigonometric waves and localized bumps, all evaluated through
//! [`crate::jet::Jet3`] so every derivative up to third order is exact.
//! Sampling is seeded and reproducible.

use crate::jet::Jet3;
use crate::vec3::V3;
use rand_chacha::ChaCha8Rng;
use rand::Rng;

/// Frame differential operators acting on jets anchored at one point.
///
/// Holds the coordinate jets (and r⁻¹) so that L, L̄, Ω, ∇̸, □ and Δ̸ become
/// jet algebra. Each application of a first-order operator costs one order
/// of jet accuracy.
pub struct FrameOps {
    x: Jet3,
    y: Jet3,
    ir: Jet3,
}

impl FrameOps {
    /// Requires r > 0; the frame is singular on the axis.
    pub fn new(x: f64, y: f64) -> FrameOps {
        let xj = Jet3::var(1, x);
        let yj = Jet3::var(2, y);
        let r2 = xj.mul(&xj).add(&yj.mul(&yj));
        FrameOps { x: xj, y: yj, ir: r2.inv_sqrt() }
    }

    pub fn r(&self) -> f64 {
        1.0 / self.ir.val()
    }

    /// ∂r f = (x₁∂₁ + x₂∂₂)f / r.
    pub fn dr(&self, f: &Jet3) -> Jet3 {
        self.x.mul(&f.partial(1)).add(&self.y.mul(&f.partial(2))).mul(&self.ir)
    }

    /// L f = ∂t f + ∂r f.
    pub fn l(&self, f: &Jet3) -> Jet3 {
        f.partial(0).add(&self.dr(f))
    }

    /// L̄ f = ∂t f − ∂r f.
    pub fn lb(&self, f: &Jet3) -> Jet3 {
        f.partial(0).sub(&self.dr(f))
    }

    /// Ω f = (x₁∂₂ − x₂∂₁) f.
    pub fn omega(&self, f: &Jet3) -> Jet3 {
        self.x.mul(&f.partial(2)).sub(&self.y.mul(&f.partial(1)))
    }

    /// ∇̸ f = Ω f / r.
    pub fn slash(&self, f: &Jet3) -> Jet3 {
        self.omega(f).mul(&self.ir)
    }

    /// □ f = ∂t² f − Δ f (wave operator with the +∂t² convention).
    pub fn box_op(&self, f: &Jet3) -> Jet3 {
        let tt = f.partial(0).partial(0);
        let xx = f.partial(1).partial(1);
        let yy = f.partial(2).partial(2);
        tt.sub(&xx).sub(&yy)
    }

    /// Δ̸ f = Ω²f / r², the Laplacian on the circle S_{ū,u}.
    pub fn lap_ang(&self, f: &Jet3) -> Jet3 {
        self.omega(&self.omega(f)).mul(&self.ir).mul(&self.ir)
    }

    /// Cartesian gradient values (∂t, ∂₁, ∂₂) of a jet.
    pub fn grad(f: &Jet3) -> [f64; 3] {
        [f.d(1, 0, 0), f.d(0, 1, 0), f.d(0, 0, 1)]
    }
}

/// A scalar test field evaluable as an order-3 jet anywhere.
#[derive(Debug, Clone)]
pub enum ScalarField {
    Const(f64),
    /// Coordinate t.
    T,
    /// Coordinate x₁.
    X1,
    /// Sum of monomials c · t^i x₁^j x₂^k.
    Poly(Vec<(f64, u8, u8, u8)>),
    /// amp · sin(k·(t,x₁,x₂) + phase) (cos for `is_cos`).
    Wave { amp: f64, k: [f64; 3], phase: f64, is_cos: bool },
    /// amp · exp(−a_t(t−c_t)² − a_1(x₁−c₁)² − a_2(x₂−c₂)²).
    Bump { amp: f64, a: [f64; 3], c: [f64; 3] },
    /// Composition g(ξ·(t,x₁,x₂)) with g = amp·sin(s + phase); ξ may be null.
    AlongRay { amp: f64, xi: [f64; 3], phase: f64 },
    Sum(Box<ScalarField>, Box<ScalarField>),
    Product(Box<ScalarField>, Box<ScalarField>),
}

impl ScalarField {
    pub fn jet(&self, t: f64, x: f64, y: f64) -> Jet3 {
        match self {
            ScalarField::Const(v) => Jet3::constant(*v),
            ScalarField::T => Jet3::var(0, t),
            ScalarField::X1 => Jet3::var(1, x),
            ScalarField::Poly(terms) => {
                let vt = Jet3::var(0, t);
                let vx = Jet3::var(1, x);
                let vy = Jet3::var(2, y);
                let mut acc = Jet3::zero();
                for &(c, i, j, k) in terms {
                    let mut m = Jet3::constant(c);
                    for _ in 0..i {
                        m = m.mul(&vt);
                    }
                    for _ in 0..j {
                        m = m.mul(&vx);
                    }
                    for _ in 0..k {
                        m = m.mul(&vy);
                    }
                    acc = acc.add(&m);
                }
                acc
            }
            ScalarField::Wave { amp, k, phase, is_cos } => {
                let w = Jet3::var(0, t)
                    .scale(k[0])
                    .add(&Jet3::var(1, x).scale(k[1]))
                    .add(&Jet3::var(2, y).scale(k[2]))
                    .add_const(*phase);
                if *is_cos {
                    w.cos().scale(*amp)
                } else {
                    w.sin().scale(*amp)
                }
            }
            ScalarField::Bump { amp, a, c } => {
                let dt = Jet3::var(0, t).add_const(-c[0]);
                let dx = Jet3::var(1, x).add_const(-c[1]);
                let dy = Jet3::var(2, y).add_const(-c[2]);
                let q = dt
                    .mul(&dt)
                    .scale(-a[0])
                    .add(&dx.mul(&dx).scale(-a[1]))
                    .add(&dy.mul(&dy).scale(-a[2]));
                q.exp().scale(*amp)
            }
            ScalarField::AlongRay { amp, xi, phase } => {
                let w = Jet3::var(0, t)
                    .scale(xi[0])
                    .add(&Jet3::var(1, x).scale(xi[1]))
                    .add(&Jet3::var(2, y).scale(xi[2]))
                    .add_const(*phase);
                w.sin().scale(*amp)
            }
            ScalarField::Sum(a, b) => a.jet(t, x, y).add(&b.jet(t, x, y)),
            ScalarField::Product(a, b) => a.jet(t, x, y).mul(&b.jet(t, x, y)),
        }
    }

    /// Random representative of the zoo: polynomial, wave, bump, or a
    /// product of two of those.
    pub fn random(rng: &mut ChaCha8Rng) -> ScalarField {
        match rng.gen_range(0..5) {
            0 => ScalarField::random_poly(rng),
            1 => ScalarField::random_wave(rng),
            2 => ScalarField::random_bump(rng),
            3 => ScalarField::Product(
                Box::new(ScalarField::random_poly(rng)),
                Box::new(ScalarField::random_wave(rng)),
            ),
            _ => ScalarField::Sum(
                Box::new(ScalarField::random_wave(rng)),
                Box::new(ScalarField::random_bump(rng)),
            ),
        }
    }

    pub fn random_poly(rng: &mut ChaCha8Rng) -> ScalarField {
        let n = rng.gen_range(2..5);
        let mut terms = Vec::with_capacity(n);
        for _ in 0..n {
            let mut e = [0u8; 3];
            let deg = rng.gen_range(0..=3);
            for _ in 0..deg {
                e[rng.gen_range(0..3)] += 1;
            }
            terms.push((rng.gen_range(-1.0..1.0), e[0], e[1], e[2]));
        }
        ScalarField::Poly(terms)
    }

    pub fn random_wave(rng: &mut ChaCha8Rng) -> ScalarField {
        ScalarField::Wave {
            amp: rng.gen_range(0.2..1.0),
            k: [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
            is_cos: rng.gen_bool(0.5),
        }
    }

    pub fn random_bump(rng: &mut ChaCha8Rng) -> ScalarField {
        ScalarField::Bump {
            amp: rng.gen_range(0.3..1.2),
            a: [rng.gen_range(0.1..0.8), rng.gen_range(0.1..0.8), rng.gen_range(0.1..0.8)],
            c: [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
        }
    }

    /// A field constant along a null ray: g(ξ·x) with g sine and ξ null,
    /// ξ = (1, cos α, sin α) up to scale (so that Q₀(ξ,ξ) = 0).
    pub fn random_null_ray(rng: &mut ChaCha8Rng) -> ScalarField {
        let alpha = rng.gen_range(0.0..std::f64::consts::TAU);
        let s = rng.gen_range(0.5..2.0);
        ScalarField::AlongRay {
            amp: rng.gen_range(0.3..1.0),
            xi: [s, s * alpha.cos(), s * alpha.sin()],
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
        }
    }
}

/// Random sample point bounded away from the axis.
pub fn random_point(rng: &mut ChaCha8Rng) -> (f64, f64, f64) {
    let r = rng.gen_range(0.4..3.5);
    let th = rng.gen_range(0.0..std::f64::consts::TAU);
    (rng.gen_range(-3.0..3.0), r * th.cos(), r * th.sin())
}

/// An R³-valued test field with exact jets.
pub trait VectorJetField: Sync {
    fn jets(&self, t: f64, x: f64, y: f64) -> [Jet3; 3];

    fn value(&self, t: f64, x: f64, y: f64) -> V3 {
        let j = self.jets(t, x, y);
        V3::new(j[0].val(), j[1].val(), j[2].val())
    }

    fn dt(&self, t: f64, x: f64, y: f64) -> V3 {
        let j = self.jets(t, x, y);
        V3::new(j[0].d(1, 0, 0), j[1].d(1, 0, 0), j[2].d(1, 0, 0))
    }
}

/// Exact solution: uniform rotation along a great circle,
/// φ(t) = (cos ωt, sin ωt, 0). Satisfies □φ = −ω²φ = φ·Q₀(∇φ,∇φ).
pub struct RotatingGeodesic {
    pub omega: f64,
}

impl VectorJetField for RotatingGeodesic {
    fn jets(&self, t: f64, _x: f64, _y: f64) -> [Jet3; 3] {
        let w = Jet3::var(0, t).scale(self.omega);
        [w.cos(), w.sin(), Jet3::zero()]
    }
}

/// Exact solution valued in the equator: φ = (cos F, sin F, 0) with
/// F = a·sin(k(t − x₁)). The phase rides a null direction, so the null-form
/// source vanishes and □φ = 0 component-wise in the intrinsic frame.
pub struct EquatorTravelingWave {
    pub amp: f64,
    pub k: f64,
}

impl VectorJetField for EquatorTravelingWave {
    fn jets(&self, t: f64, x: f64, _y: f64) -> [Jet3; 3] {
        let w = Jet3::var(0, t).sub(&Jet3::var(1, x)).scale(self.k);
        let f = w.sin().scale(self.amp);
        [f.cos(), f.sin(), Jet3::zero()]
    }
}

/// Arbitrary (not sphere-valued) smooth vector field from three scalars.
pub struct VectorField(pub [ScalarField; 3]);

impl VectorJetField for VectorField {
    fn jets(&self, t: f64, x: f64, y: f64) -> [Jet3; 3] {
        [self.0[0].jet(t, x, y), self.0[1].jet(t, x, y), self.0[2].jet(t, x, y)]
    }
}

/// The linear field φ = (t, 0, 0): □φ = 0, Lφ = L̄φ = (1,0,0).
pub struct LinearTime;

impl VectorJetField for LinearTime {
    fn jets(&self, t: f64, _x: f64, _y: f64) -> [Jet3; 3] {
        [Jet3::var(0, t), Jet3::zero(), Jet3::zero()]
    }
}
