//! Exterior calculus on a single 3-dimensional coordinate chart.
//!
//! Scalar fields carry their partial derivatives in closed form. Finite
//! differences are only used to validate those partials, never to evaluate a
//! contact condition: the conditions checked downstream are sign conditions
//! and difference noise near a zero would flip verdicts.
//!
//! Orientation is the coordinate order of the chart, so a 3-form value is the
//! coefficient against `dx₁∧dx₂∧dx₃`. Flow boxes use `(w, s, t)`, torus
//! bundles use `(x, y, z)`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the chart.
pub type Point = [f64; 3];
/// A tangent vector in the coordinate frame of the chart.
pub type Vector = [f64; 3];

/// Step used by the finite-difference validation oracle.
pub const FD_STEP: f64 = 1e-5;

type ValueFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(Point) -> [f64; 3] + Send + Sync>;

/// A smooth function of one real variable with its first two derivatives.
///
/// This is the building block for the coefficient profiles `a(t)`, `b(t)`,
/// bump functions and rotation angles. The second derivative is carried so
/// that the first derivative can itself be lifted to a [`ScalarField`].
#[derive(Clone)]
pub struct Profile {
    value: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    first: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    second: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl Profile {
    pub fn new(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        first: impl Fn(f64) -> f64 + Send + Sync + 'static,
        second: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            first: Arc::new(first),
            second: Arc::new(second),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c, |_| 0.0, |_| 0.0)
    }

    /// `u ↦ slope·u + offset`.
    pub fn affine(slope: f64, offset: f64) -> Self {
        Self::new(move |u| slope * u + offset, move |_| slope, |_| 0.0)
    }

    pub fn value(&self, u: f64) -> f64 {
        (self.value)(u)
    }

    pub fn derivative(&self, u: f64) -> f64 {
        (self.first)(u)
    }

    pub fn second_derivative(&self, u: f64) -> f64 {
        (self.second)(u)
    }

    /// The derivative as a profile. Its own second derivative is unknown and
    /// reported as NaN, so it must not be differentiated twice.
    pub fn derived(&self) -> Profile {
        let first = self.first.clone();
        let second = self.second.clone();
        Profile {
            value: first,
            first: second,
            second: Arc::new(|_| f64::NAN),
        }
    }

    /// `u ↦ k·self(u)`.
    pub fn scaled(&self, k: f64) -> Profile {
        let p = self.clone();
        let p1 = self.clone();
        let p2 = self.clone();
        Profile::new(
            move |u| k * p.value(u),
            move |u| k * p1.derivative(u),
            move |u| k * p2.second_derivative(u),
        )
    }

    /// `u ↦ self(u / width)`.
    pub fn rescaled_argument(&self, width: f64) -> Profile {
        let p = self.clone();
        let p1 = self.clone();
        let p2 = self.clone();
        Profile::new(
            move |u| p.value(u / width),
            move |u| p1.derivative(u / width) / width,
            move |u| p2.second_derivative(u / width) / (width * width),
        )
    }
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Profile(..)")
    }
}

/// A scalar field on the chart together with its analytic gradient.
#[derive(Clone)]
pub struct ScalarField {
    value: ValueFn,
    gradient: GradFn,
}

impl ScalarField {
    pub fn new(
        value: impl Fn(Point) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(Point) -> [f64; 3] + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c, |_| [0.0; 3])
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// The coordinate function `x_axis`.
    pub fn coordinate(axis: usize) -> Self {
        assert!(axis < 3, "chart axis out of range");
        let mut e = [0.0; 3];
        e[axis] = 1.0;
        Self::new(move |p| p[axis], move |_| e)
    }

    /// A field depending on a single coordinate through `profile`.
    pub fn along(axis: usize, profile: Profile) -> Self {
        assert!(axis < 3, "chart axis out of range");
        let p = profile.clone();
        Self::new(
            move |x| p.value(x[axis]),
            move |x| {
                let mut g = [0.0; 3];
                g[axis] = profile.derivative(x[axis]);
                g
            },
        )
    }

    pub fn eval(&self, p: Point) -> f64 {
        (self.value)(p)
    }

    pub fn gradient(&self, p: Point) -> [f64; 3] {
        (self.gradient)(p)
    }

    /// Central finite-difference gradient, the validation oracle.
    pub fn fd_gradient(&self, p: Point, h: f64) -> [f64; 3] {
        let mut g = [0.0; 3];
        for (i, gi) in g.iter_mut().enumerate() {
            let mut plus = p;
            let mut minus = p;
            plus[i] += h;
            minus[i] -= h;
            *gi = (self.eval(plus) - self.eval(minus)) / (2.0 * h);
        }
        g
    }

    /// Largest disagreement between the analytic and finite-difference
    /// partials at `p`, measured relative to the partial (absolute below
    /// `abs_floor`). Values ≤ 1 mean agreement at tolerance `rel`.
    pub fn partials_deviation(&self, p: Point, rel: f64, abs_floor: f64) -> f64 {
        let exact = self.gradient(p);
        let approx = self.fd_gradient(p, FD_STEP);
        exact
            .iter()
            .zip(approx.iter())
            .map(|(e, a)| (e - a).abs() / (rel * e.abs()).max(abs_floor))
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, k: f64) -> Self {
        let f = self.clone();
        let g = self.clone();
        Self::new(move |p| k * f.eval(p), move |p| g.gradient(p).map(|d| k * d))
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ScalarField(..)")
    }
}

impl Add for ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: ScalarField) -> ScalarField {
        let (a, b) = (self.clone(), rhs.clone());
        ScalarField::new(
            move |p| a.eval(p) + b.eval(p),
            move |p| {
                let (ga, gb) = (self.gradient(p), rhs.gradient(p));
                [ga[0] + gb[0], ga[1] + gb[1], ga[2] + gb[2]]
            },
        )
    }
}

impl Sub for ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: ScalarField) -> ScalarField {
        self + (-rhs)
    }
}

impl Neg for ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.scale(-1.0)
    }
}

impl Mul for ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: ScalarField) -> ScalarField {
        let (a, b) = (self.clone(), rhs.clone());
        ScalarField::new(
            move |p| a.eval(p) * b.eval(p),
            move |p| {
                let (fa, fb) = (self.eval(p), rhs.eval(p));
                let (ga, gb) = (self.gradient(p), rhs.gradient(p));
                [
                    ga[0] * fb + fa * gb[0],
                    ga[1] * fb + fa * gb[1],
                    ga[2] * fb + fa * gb[2],
                ]
            },
        )
    }
}

/// Value of a 2-form at a point, stored as the antisymmetric matrix
/// `m[i][j] = ω(∂_i, ∂_j)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoFormValue(pub [[f64; 3]; 3]);

impl TwoFormValue {
    /// `ω(u, v) = Σ_{i<j} m_ij (u_i v_j − u_j v_i)`.
    pub fn apply(&self, u: Vector, v: Vector) -> f64 {
        let m = &self.0;
        let mut acc = 0.0;
        for i in 0..3 {
            for j in (i + 1)..3 {
                acc += m[i][j] * (u[i] * v[j] - u[j] * v[i]);
            }
        }
        acc
    }
}

/// Coefficient of a 3-form against the oriented chart volume.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ThreeFormValue(pub f64);

impl ThreeFormValue {
    pub fn coefficient(self) -> f64 {
        self.0
    }

    /// +1, −1 or 0.
    pub fn sign(self) -> i8 {
        if self.0 > 0.0 {
            1
        } else if self.0 < 0.0 {
            -1
        } else {
            0
        }
    }
}

/// Wedge of two 1-form values.
pub fn wedge_one_one(a: [f64; 3], b: [f64; 3]) -> TwoFormValue {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = a[i] * b[j] - a[j] * b[i];
        }
    }
    TwoFormValue(m)
}

/// Wedge of a 1-form value with a 2-form value.
pub fn wedge_one_two(a: [f64; 3], w: &TwoFormValue) -> ThreeFormValue {
    let m = &w.0;
    ThreeFormValue(a[0] * m[1][2] + a[1] * m[2][0] + a[2] * m[0][1])
}

/// `a∧b∧c` as the determinant of the coefficient rows.
pub fn wedge_three(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> ThreeFormValue {
    ThreeFormValue(
        a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
            + a[2] * (b[0] * c[1] - b[1] * c[0]),
    )
}

/// Cross product of coefficient triples.
pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// `p dx₁ + q dx₂ + r dx₃`.
#[derive(Clone, Debug)]
pub struct OneForm {
    coeffs: [ScalarField; 3],
}

impl OneForm {
    pub fn new(p: ScalarField, q: ScalarField, r: ScalarField) -> Self {
        Self { coeffs: [p, q, r] }
    }

    /// The coordinate differential `dx_axis`.
    pub fn coordinate(axis: usize) -> Self {
        let mut c = [ScalarField::zero(), ScalarField::zero(), ScalarField::zero()];
        c[axis] = ScalarField::constant(1.0);
        let [p, q, r] = c;
        Self::new(p, q, r)
    }

    /// The exact form `df`, given the Hessian of `f` for the partials of the
    /// coefficients.
    pub fn exact(
        f: &ScalarField,
        hessian: impl Fn(Point) -> [[f64; 3]; 3] + Send + Sync + 'static,
    ) -> Self {
        let hessian = Arc::new(hessian);
        let fields: Vec<ScalarField> = (0..3)
            .map(|i| {
                let g = f.clone();
                let h = hessian.clone();
                ScalarField::new(move |p| g.gradient(p)[i], move |p| h(p)[i])
            })
            .collect();
        let [p, q, r]: [ScalarField; 3] = fields.try_into().expect("three coefficients");
        Self::new(p, q, r)
    }

    pub fn coefficient(&self, axis: usize) -> &ScalarField {
        &self.coeffs[axis]
    }

    pub fn coefficients(&self) -> &[ScalarField; 3] {
        &self.coeffs
    }

    pub fn eval(&self, p: Point) -> [f64; 3] {
        [
            self.coeffs[0].eval(p),
            self.coeffs[1].eval(p),
            self.coeffs[2].eval(p),
        ]
    }

    pub fn apply(&self, p: Point, v: Vector) -> f64 {
        dot(self.eval(p), v)
    }

    /// `dω` at `p` from the analytic partials.
    pub fn exterior_derivative(&self, p: Point) -> TwoFormValue {
        let grads = [
            self.coeffs[0].gradient(p),
            self.coeffs[1].gradient(p),
            self.coeffs[2].gradient(p),
        ];
        Self::derivative_from_partials(&grads)
    }

    /// `dω` at `p` from finite-difference partials (validation only).
    pub fn exterior_derivative_fd(&self, p: Point, h: f64) -> TwoFormValue {
        let grads = [
            self.coeffs[0].fd_gradient(p, h),
            self.coeffs[1].fd_gradient(p, h),
            self.coeffs[2].fd_gradient(p, h),
        ];
        Self::derivative_from_partials(&grads)
    }

    // grads[j][i] = ∂_i ω_j
    fn derivative_from_partials(grads: &[[f64; 3]; 3]) -> TwoFormValue {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = grads[j][i] - grads[i][j];
            }
        }
        TwoFormValue(m)
    }

    /// `ω∧dω` at `p`: negative for a negative contact form, positive for a
    /// positive one, zero where the form is not contact.
    pub fn contact_volume(&self, p: Point) -> ThreeFormValue {
        wedge_one_two(self.eval(p), &self.exterior_derivative(p))
    }

    pub fn contact_volume_fd(&self, p: Point, h: f64) -> ThreeFormValue {
        wedge_one_two(self.eval(p), &self.exterior_derivative_fd(p, h))
    }

    /// Pointwise sum.
    pub fn plus(&self, other: &OneForm) -> OneForm {
        OneForm::new(
            self.coeffs[0].clone() + other.coeffs[0].clone(),
            self.coeffs[1].clone() + other.coeffs[1].clone(),
            self.coeffs[2].clone() + other.coeffs[2].clone(),
        )
    }

    pub fn scaled(&self, k: f64) -> OneForm {
        OneForm::new(
            self.coeffs[0].scale(k),
            self.coeffs[1].scale(k),
            self.coeffs[2].scale(k),
        )
    }
}

/// `|α∧β| / (|α||β|)`, the sine of the angle between the coefficient
/// vectors. Zero exactly where `ker α = ker β`.
pub fn transversality_margin(alpha: &OneForm, beta: &OneForm, p: Point) -> Result<f64> {
    transversality_margin_values(alpha.eval(p), beta.eval(p))
}

pub fn transversality_margin_values(a: [f64; 3], b: [f64; 3]) -> Result<f64> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateForm {
            which: if na == 0.0 { "alpha" } else { "beta" },
        });
    }
    Ok(norm(cross(a, b)) / (na * nb))
}

/// One axis of a sampling grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub samples: usize,
    /// Periodic axes sample `[lo, hi)`; the endpoint is the same point as `lo`.
    #[serde(default)]
    pub periodic: bool,
}

impl Axis {
    pub fn closed(lo: f64, hi: f64, samples: usize) -> Self {
        Self { lo, hi, samples, periodic: false }
    }

    pub fn periodic(lo: f64, hi: f64, samples: usize) -> Self {
        Self { lo, hi, samples, periodic: true }
    }

    /// A single sample at `at`.
    pub fn fixed(at: f64) -> Self {
        Self { lo: at, hi: at, samples: 1, periodic: false }
    }

    fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    pub fn value(&self, i: usize) -> f64 {
        if self.samples == 1 {
            return self.lo;
        }
        let denom = if self.periodic { self.samples } else { self.samples - 1 };
        self.lo + (self.hi - self.lo) * (i as f64) / (denom as f64)
    }
}

/// A product grid over the chart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: [Axis; 3],
}

impl GridSpec {
    pub fn new(axes: [Axis; 3]) -> Result<Self> {
        for (i, a) in axes.iter().enumerate() {
            if !(a.lo.is_finite() && a.hi.is_finite()) || a.lo > a.hi {
                return Err(Error::InvalidGrid(format!("axis {i}: empty range [{}, {}]", a.lo, a.hi)));
            }
            if a.samples == 0 {
                return Err(Error::InvalidGrid(format!("axis {i}: no samples")));
            }
            if !a.is_degenerate() && a.samples < 2 {
                return Err(Error::InvalidGrid(format!(
                    "axis {i}: a non-degenerate range needs at least 2 samples"
                )));
            }
        }
        Ok(Self { axes })
    }

    /// `n³` samples of the fundamental domain `[0,1]³`.
    pub fn unit_cube(n: usize) -> Result<Self> {
        Self::new([Axis::closed(0.0, 1.0, n); 3])
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.samples).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, flat: usize) -> [usize; 3] {
        let n1 = self.axes[1].samples;
        let n2 = self.axes[2].samples;
        [flat / (n1 * n2), (flat / n2) % n1, flat % n2]
    }

    pub fn point(&self, idx: [usize; 3]) -> Point {
        [
            self.axes[0].value(idx[0]),
            self.axes[1].value(idx[1]),
            self.axes[2].value(idx[2]),
        ]
    }

    pub fn point_at(&self, flat: usize) -> Point {
        self.point(self.index(flat))
    }

    fn flat(&self, idx: [usize; 3]) -> usize {
        (idx[0] * self.axes[1].samples + idx[1]) * self.axes[2].samples + idx[2]
    }
}

/// Two adjacent samples along `axis` with opposite signs, or a single sample
/// where the field is exactly zero (`lower == upper`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroCrossing {
    pub axis: usize,
    pub lower: Point,
    pub upper: Point,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub min: f64,
    pub max: f64,
    pub argmin: Point,
    pub argmax: Point,
    pub crossings: Vec<ZeroCrossing>,
}

/// Exact min/max over the grid samples and the sign-change brackets between
/// neighbours. Ties go to the lowest lexicographic index regardless of how
/// the parallel reduction is scheduled.
pub fn grid_scan<F>(field: F, grid: &GridSpec) -> GridSummary
where
    F: Fn(Point) -> f64 + Sync,
{
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|k| field(grid.point_at(k)))
        .collect();

    let pick = |better: fn(f64, f64) -> bool| {
        values
            .par_iter()
            .enumerate()
            .map(|(i, &v)| (i, v))
            .reduce_with(|a, b| {
                if better(b.1, a.1) || (b.1 == a.1 && b.0 < a.0) {
                    b
                } else {
                    a
                }
            })
            .expect("grid is nonempty")
    };
    let (imin, vmin) = pick(|x, y| x < y);
    let (imax, vmax) = pick(|x, y| x > y);

    let mut crossings = Vec::new();
    for flat in 0..values.len() {
        let idx = grid.index(flat);
        let v = values[flat];
        if v == 0.0 {
            crossings.push(ZeroCrossing {
                axis: usize::MAX,
                lower: grid.point(idx),
                upper: grid.point(idx),
            });
            continue;
        }
        for axis in 0..3 {
            if idx[axis] + 1 < grid.axes[axis].samples {
                let mut next = idx;
                next[axis] += 1;
                let w = values[grid.flat(next)];
                if v * w < 0.0 {
                    crossings.push(ZeroCrossing {
                        axis,
                        lower: grid.point(idx),
                        upper: grid.point(next),
                    });
                }
            }
        }
    }

    GridSummary {
        min: vmin,
        max: vmax,
        argmin: grid.point_at(imin),
        argmax: grid.point_at(imax),
        crossings,
    }
}

/// Bisection on a bracket `[lo, hi]` with `f(lo)·f(hi) ≤ 0`.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    if flo == 0.0 {
        return lo;
    }
    if f(hi) == 0.0 {
        return hi;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
