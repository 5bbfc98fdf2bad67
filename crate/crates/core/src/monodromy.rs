//! Integer 2×2 monodromies of torus bundles.
//!
//! Everything except the eigen-data is exact `i64` arithmetic with overflow
//! detection. Surgery coefficients are integers and must not pick up rounding.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An orientation-preserving gluing matrix `[[m11, m12], [m21, m22]]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[i64; 4]", into = "[i64; 4]")]
pub struct Monodromy {
    m: [[i64; 2]; 2],
}

impl TryFrom<[i64; 4]> for Monodromy {
    type Error = Error;
    fn try_from(e: [i64; 4]) -> Result<Self> {
        Monodromy::new(e[0], e[1], e[2], e[3])
    }
}

impl From<Monodromy> for [i64; 4] {
    fn from(m: Monodromy) -> Self {
        [m.m[0][0], m.m[0][1], m.m[1][0], m.m[1][1]]
    }
}

impl Monodromy {
    pub fn new(m11: i64, m12: i64, m21: i64, m22: i64) -> Result<Self> {
        let det = m11
            .checked_mul(m22)
            .and_then(|a| m12.checked_mul(m21).and_then(|b| a.checked_sub(b)))
            .ok_or(Error::Overflow)?;
        if det != 1 {
            return Err(Error::NotOrientationPreserving { det });
        }
        Ok(Self { m: [[m11, m12], [m21, m22]] })
    }

    pub fn identity() -> Self {
        Self { m: [[1, 0], [0, 1]] }
    }

    pub fn entries(&self) -> [[i64; 2]; 2] {
        self.m
    }

    pub fn entry(&self, i: usize, j: usize) -> i64 {
        self.m[i][j]
    }

    pub fn trace(&self) -> i64 {
        self.m[0][0] + self.m[1][1]
    }

    /// `|trace| > 2`.
    pub fn is_anosov(&self) -> bool {
        self.trace().abs() > 2
    }

    pub fn inverse(&self) -> Self {
        let [[a, b], [c, d]] = self.m;
        Self { m: [[d, -b], [-c, a]] }
    }

    pub fn transpose(&self) -> Self {
        let [[a, b], [c, d]] = self.m;
        Self { m: [[a, c], [b, d]] }
    }

    /// `self · other`.
    pub fn compose(&self, other: &Monodromy) -> Result<Self> {
        let mut out = [[0i64; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = 0i64;
                for k in 0..2 {
                    let term = self.m[i][k].checked_mul(other.m[k][j]).ok_or(Error::Overflow)?;
                    acc = acc.checked_add(term).ok_or(Error::Overflow)?;
                }
                out[i][j] = acc;
            }
        }
        Ok(Self { m: out })
    }

    pub fn power(&self, n: u32) -> Result<Self> {
        (0..n).try_fold(Self::identity(), |acc, _| acc.compose(self))
    }

    pub fn apply(&self, v: HomologyClass) -> Result<HomologyClass> {
        let mut out = [0i64; 2];
        for (i, o) in out.iter_mut().enumerate() {
            let a = self.m[i][0].checked_mul(v.p).ok_or(Error::Overflow)?;
            let b = self.m[i][1].checked_mul(v.q).ok_or(Error::Overflow)?;
            *o = a.checked_add(b).ok_or(Error::Overflow)?;
        }
        HomologyClass::new(out[0], out[1])
    }

    /// Real action on a point of the plane.
    pub fn act(&self, v: [f64; 2]) -> [f64; 2] {
        let m = self.as_f64();
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    pub fn as_f64(&self) -> [[f64; 2]; 2] {
        self.m.map(|row| row.map(|x| x as f64))
    }

    /// Eigenvalues and unit eigenvectors of an Anosov monodromy.
    pub fn eigen_data(&self) -> Result<EigenData> {
        if !self.is_anosov() {
            return Err(Error::NotAnosov { trace: self.trace() });
        }
        let tr = self.trace() as f64;
        let disc = (tr * tr - 4.0).sqrt();
        // The larger-magnitude root is computed directly; its partner from
        // the determinant to avoid cancellation.
        let expanding = 0.5 * (tr + tr.signum() * disc);
        let contracting = 1.0 / expanding;
        Ok(EigenData {
            expanding,
            contracting,
            expanding_direction: self.eigenvector(expanding),
            contracting_direction: self.eigenvector(contracting),
        })
    }

    fn eigenvector(&self, lambda: f64) -> [f64; 2] {
        let m = self.as_f64();
        // Rows of (M − λ) are orthogonal to the eigenvector; use the larger.
        let r0 = [m[0][0] - lambda, m[0][1]];
        let r1 = [m[1][0], m[1][1] - lambda];
        let r = if r0[0].hypot(r0[1]) >= r1[0].hypot(r1[1]) { r0 } else { r1 };
        let mut v = [-r[1], r[0]];
        let n = v[0].hypot(v[1]);
        v = [v[0] / n, v[1] / n];
        if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) {
            v = [-v[0], -v[1]];
        }
        v
    }

    /// Slope of the image class `m·γ` in the `(K, γ)` frame of the knot.
    pub fn image_slope(&self, gamma: HomologyClass) -> Result<Slope> {
        let image = self.apply(gamma)?;
        Ok(Slope::of_class(image))
    }
}

impl fmt::Display for Monodromy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [[a, b], [c, d]] = self.m;
        write!(f, "[[{a},{b}],[{c},{d}]]")
    }
}

/// Eigen-data of an Anosov monodromy. For negative trace both eigenvalues
/// are negative; `expanding` is always the one of modulus > 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenData {
    pub expanding: f64,
    pub contracting: f64,
    pub expanding_direction: [f64; 2],
    pub contracting_direction: [f64; 2],
}

/// A nonzero class `p·K + q·γ` in the homology of a fibre torus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[i64; 2]", into = "[i64; 2]")]
pub struct HomologyClass {
    pub p: i64,
    pub q: i64,
}

impl TryFrom<[i64; 2]> for HomologyClass {
    type Error = Error;
    fn try_from(v: [i64; 2]) -> Result<Self> {
        HomologyClass::new(v[0], v[1])
    }
}

impl From<HomologyClass> for [i64; 2] {
    fn from(c: HomologyClass) -> Self {
        [c.p, c.q]
    }
}

impl HomologyClass {
    pub fn new(p: i64, q: i64) -> Result<Self> {
        if p == 0 && q == 0 {
            return Err(Error::ZeroClass);
        }
        Ok(Self { p, q })
    }

    /// The second generator `(0, 1)`.
    pub fn second_generator() -> Self {
        Self { p: 0, q: 1 }
    }

    pub fn gcd(&self) -> i64 {
        gcd(self.p, self.q)
    }

    pub fn primitive(&self) -> Self {
        let g = self.gcd();
        Self { p: self.p / g, q: self.q / g }
    }

    pub fn scaled(&self, k: i64) -> Result<Self> {
        let p = self.p.checked_mul(k).ok_or(Error::Overflow)?;
        let q = self.q.checked_mul(k).ok_or(Error::Overflow)?;
        HomologyClass::new(p, q)
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.unsigned_abs(), b.unsigned_abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a as i64
}

/// An extended rational in lowest terms with nonnegative denominator;
/// `den == 0` is the infinite slope (stored as `1/0`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Slope {
    pub num: i64,
    pub den: i64,
}

impl Slope {
    pub fn new(num: i64, den: i64) -> Result<Self> {
        if num == 0 && den == 0 {
            return Err(Error::ZeroClass);
        }
        if den == 0 {
            return Ok(Self { num: 1, den: 0 });
        }
        let g = gcd(num, den);
        let (mut n, mut d) = (num / g, den / g);
        if d < 0 {
            n = n.checked_neg().ok_or(Error::Overflow)?;
            d = -d;
        }
        Ok(Self { num: n, den: d })
    }

    /// Slope of `p·K + q·γ`: displacement along `K` per unit of `γ`.
    ///
    /// This is the convention that makes `[[5,9],[1,2]]·(0,1) = (9,2)` have
    /// slope 9/2. Under it `(0, 1)` has slope 0 and `(1, 0)` slope ∞.
    pub fn of_class(c: HomologyClass) -> Self {
        Self::new(c.p, c.q).expect("homology classes are nonzero")
    }

    pub fn is_infinite(&self) -> bool {
        self.den == 0
    }

    pub fn to_f64(&self) -> f64 {
        if self.den == 0 {
            f64::INFINITY
        } else {
            self.num as f64 / self.den as f64
        }
    }
}

impl fmt::Display for Slope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 0 {
            f.write_str("inf")
        } else if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}
