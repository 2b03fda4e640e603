//! Truncated multivariate Taylor arithmetic ("jets").
//!
//! The verification batteries need derivatives of closed-form test fields
//! that are exact to rounding, so that identity residuals measure the
//! identity and not a differencing scheme. A jet carries the Taylor
//! coefficients of a smooth function at a point up to a fixed total order;
//! sums, products and compositions of jets propagate those coefficients
//! exactly. `Jet3` covers three spacetime variables (t, x₁, x₂) up to third
//! order; `Jet2` covers two cone variables (ū, θ) up to fourth order.
//!
//! Coefficients are stored as Taylor coefficients c_α = ∂^α f / α!, which
//! makes multiplication a plain truncated convolution. Each jet tracks the
//! highest total order that is still exact (`ord`), which drops by one per
//! differentiation; binary operations return the weaker of the two inputs.

/// Multi-index exponents for three variables, total degree ≤ 4, graded order.
const EXPS3: [(usize, usize, usize); 35] = [
    (0, 0, 0),
    (1, 0, 0),
    (0, 1, 0),
    (0, 0, 1),
    (2, 0, 0),
    (1, 1, 0),
    (1, 0, 1),
    (0, 2, 0),
    (0, 1, 1),
    (0, 0, 2),
    (3, 0, 0),
    (2, 1, 0),
    (2, 0, 1),
    (1, 2, 0),
    (1, 1, 1),
    (1, 0, 2),
    (0, 3, 0),
    (0, 2, 1),
    (0, 1, 2),
    (0, 0, 3),
    (4, 0, 0),
    (3, 1, 0),
    (3, 0, 1),
    (2, 2, 0),
    (2, 1, 1),
    (2, 0, 2),
    (1, 3, 0),
    (1, 2, 1),
    (1, 1, 2),
    (1, 0, 3),
    (0, 4, 0),
    (0, 3, 1),
    (0, 2, 2),
    (0, 1, 3),
    (0, 0, 4),
];

/// Multi-index exponents for two variables, total degree ≤ 4, graded order.
const EXPS2: [(usize, usize); 15] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
    (4, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 4),
];

const fn idx3(i: usize, j: usize, k: usize) -> usize {
    // graded lexicographic rank; only called with i+j+k <= 4
    let d = i + j + k;
    let base = match d {
        0 => 0,
        1 => 1,
        2 => 4,
        3 => 10,
        _ => 20,
    };
    // within degree d, rank by (d-i, then d-i-j)
    let mut r = 0;
    let mut ii = d;
    loop {
        if ii == i {
            break;
        }
        r += d - ii + 1;
        ii -= 1;
    }
    base + r + (d - i - j)
}

const fn idx2(i: usize, j: usize) -> usize {
    let d = i + j;
    let base = match d {
        0 => 0,
        1 => 1,
        2 => 3,
        3 => 6,
        _ => 10,
    };
    base + j
}

const FACT: [f64; 5] = [1.0, 1.0, 2.0, 6.0, 24.0];

macro_rules! jet_common {
    ($Jet:ident, $NC:expr, $MAXORD:expr) => {
        impl $Jet {
            pub const MAX_ORD: usize = $MAXORD;

            /// Constant function.
            pub fn constant(v: f64) -> Self {
                let mut j = Self { c: [0.0; $NC], ord: $MAXORD };
                j.c[0] = v;
                j
            }

            pub fn zero() -> Self {
                Self::constant(0.0)
            }

            /// Value of the function at the expansion point.
            #[inline]
            pub fn val(&self) -> f64 {
                self.c[0]
            }

            pub fn add(&self, o: &Self) -> Self {
                let mut r = Self { c: [0.0; $NC], ord: self.ord.min(o.ord) };
                for i in 0..$NC {
                    r.c[i] = self.c[i] + o.c[i];
                }
                r
            }

            pub fn sub(&self, o: &Self) -> Self {
                let mut r = Self { c: [0.0; $NC], ord: self.ord.min(o.ord) };
                for i in 0..$NC {
                    r.c[i] = self.c[i] - o.c[i];
                }
                r
            }

            pub fn neg(&self) -> Self {
                self.scale(-1.0)
            }

            pub fn scale(&self, s: f64) -> Self {
                let mut r = *self;
                for c in r.c.iter_mut() {
                    *c *= s;
                }
                r
            }

            pub fn add_const(&self, s: f64) -> Self {
                let mut r = *self;
                r.c[0] += s;
                r
            }

            /// Composition g(f) where `gder[k]` = g^{(k)} at the point f.val().
            /// `gder` must supply at least ord+1 entries.
            pub fn compose(&self, gder: &[f64]) -> Self {
                let ord = self.ord;
                let mut w = *self;
                w.c[0] = 0.0;
                // Horner in the nilpotent part.
                let mut acc = Self::constant(gder[ord] / FACT[ord]);
                acc.ord = ord;
                for k in (0..ord).rev() {
                    acc = acc.mul(&w).add_const(gder[k] / FACT[k]);
                }
                acc
            }

            pub fn recip(&self) -> Self {
                let v = self.val();
                let mut g = [0.0; $MAXORD + 1];
                let mut p = 1.0 / v;
                for (k, gk) in g.iter_mut().enumerate() {
                    *gk = p;
                    p *= -((k + 1) as f64) / v;
                }
                self.compose(&g)
            }

            pub fn sqrt(&self) -> Self {
                let v = self.val();
                let s = v.sqrt();
                let mut g = [0.0; $MAXORD + 1];
                let mut p = s;
                let mut e = 0.5;
                g[0] = p;
                for gk in g.iter_mut().skip(1) {
                    p = p / v * e;
                    *gk = p;
                    e -= 1.0;
                }
                self.compose(&g)
            }

            /// v^{-1/2}, used to normalize onto the sphere.
            pub fn inv_sqrt(&self) -> Self {
                let v = self.val();
                let s = 1.0 / v.sqrt();
                let mut g = [0.0; $MAXORD + 1];
                let mut p = s;
                let mut e = -0.5;
                g[0] = p;
                for gk in g.iter_mut().skip(1) {
                    p = p / v * e;
                    *gk = p;
                    e -= 1.0;
                }
                self.compose(&g)
            }

            pub fn exp(&self) -> Self {
                let e = self.val().exp();
                self.compose(&[e; $MAXORD + 1])
            }

            pub fn sin(&self) -> Self {
                let (s, c) = self.val().sin_cos();
                let mut g = [0.0; $MAXORD + 1];
                for (k, gk) in g.iter_mut().enumerate() {
                    *gk = match k % 4 {
                        0 => s,
                        1 => c,
                        2 => -s,
                        _ => -c,
                    };
                }
                self.compose(&g)
            }

            pub fn cos(&self) -> Self {
                let (s, c) = self.val().sin_cos();
                let mut g = [0.0; $MAXORD + 1];
                for (k, gk) in g.iter_mut().enumerate() {
                    *gk = match k % 4 {
                        0 => c,
                        1 => -s,
                        2 => -c,
                        _ => s,
                    };
                }
                self.compose(&g)
            }
        }
    };
}

/// Jet in (t, x₁, x₂) up to total order 4.
#[derive(Debug, Clone, Copy)]
pub struct Jet3 {
    c: [f64; 35],
    /// Highest total order whose coefficients are exact.
    pub ord: usize,
}

jet_common!(Jet3, 35, 4);

impl Jet3 {
    /// Coordinate function: axis 0 = t, 1 = x₁, 2 = x₂.
    pub fn var(axis: usize, value: f64) -> Self {
        let mut j = Self::constant(value);
        let e = match axis {
            0 => idx3(1, 0, 0),
            1 => idx3(0, 1, 0),
            _ => idx3(0, 0, 1),
        };
        j.c[e] = 1.0;
        j
    }

    /// Derivative value ∂_t^i ∂_{x₁}^j ∂_{x₂}^k f (requires i+j+k ≤ ord).
    pub fn d(&self, i: usize, j: usize, k: usize) -> f64 {
        debug_assert!(i + j + k <= self.ord);
        self.c[idx3(i, j, k)] * FACT[i] * FACT[j] * FACT[k]
    }

    pub fn mul(&self, o: &Self) -> Self {
        let ord = self.ord.min(o.ord);
        let mut r = Self { c: [0.0; 35], ord };
        for (ia, &(i1, j1, k1)) in EXPS3.iter().enumerate() {
            let a = self.c[ia];
            if a == 0.0 {
                continue;
            }
            let d1 = i1 + j1 + k1;
            if d1 > ord {
                continue;
            }
            for (ib, &(i2, j2, k2)) in EXPS3.iter().enumerate() {
                if d1 + i2 + j2 + k2 > ord {
                    continue;
                }
                r.c[idx3(i1 + i2, j1 + j2, k1 + k2)] += a * o.c[ib];
            }
        }
        r
    }

    /// Partial derivative as a jet of one lower order.
    pub fn partial(&self, axis: usize) -> Self {
        assert!(self.ord >= 1, "jet order exhausted");
        let mut r = Self { c: [0.0; 35], ord: self.ord - 1 };
        for (i, &(a, b, c)) in EXPS3.iter().enumerate() {
            let (sa, sb, sc, f) = match axis {
                0 => (a + 1, b, c, (a + 1) as f64),
                1 => (a, b + 1, c, (b + 1) as f64),
                _ => (a, b, c + 1, (c + 1) as f64),
            };
            if sa + sb + sc <= 4 {
                r.c[i] = self.c[idx3(sa, sb, sc)] * f;
            }
        }
        r
    }
}

/// Jet in (ū, θ) up to total order 4, for closed-form cone data.
#[derive(Debug, Clone, Copy)]
pub struct Jet2 {
    c: [f64; 15],
    pub ord: usize,
}

jet_common!(Jet2, 15, 4);

impl Jet2 {
    /// Coordinate function: axis 0 = ū, 1 = θ.
    pub fn var(axis: usize, value: f64) -> Self {
        let mut j = Self::constant(value);
        let e = if axis == 0 { idx2(1, 0) } else { idx2(0, 1) };
        j.c[e] = 1.0;
        j
    }

    /// Derivative value ∂_ū^i ∂_θ^j f (requires i+j ≤ ord).
    pub fn d(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i + j <= self.ord);
        self.c[idx2(i, j)] * FACT[i] * FACT[j]
    }

    pub fn mul(&self, o: &Self) -> Self {
        let ord = self.ord.min(o.ord);
        let mut r = Self { c: [0.0; 15], ord };
        for (ia, &(i1, j1)) in EXPS2.iter().enumerate() {
            let a = self.c[ia];
            if a == 0.0 {
                continue;
            }
            let d1 = i1 + j1;
            if d1 > ord {
                continue;
            }
            for (ib, &(i2, j2)) in EXPS2.iter().enumerate() {
                if d1 + i2 + j2 > ord {
                    continue;
                }
                r.c[idx2(i1 + i2, j1 + j2)] += a * o.c[ib];
            }
        }
        r
    }

    pub fn partial(&self, axis: usize) -> Self {
        assert!(self.ord >= 1, "jet order exhausted");
        let mut r = Self { c: [0.0; 15], ord: self.ord - 1 };
        for (i, &(a, b)) in EXPS2.iter().enumerate() {
            let (sa, sb, f) = if axis == 0 {
                (a + 1, b, (a + 1) as f64)
            } else {
                (a, b + 1, (b + 1) as f64)
            };
            if sa + sb <= 4 {
                r.c[i] = self.c[idx2(sa, sb)] * f;
            }
        }
        r
    }
}
