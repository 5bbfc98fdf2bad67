//! Flow boxes around a transverse annulus and the bi-contact shear surgery.
//!
//! Near an annulus `C = {t = 0}` transverse to the flow, the pair is put in
//! the normal form
//!
//! ```text
//! α = dw + a(t) ds,   β = ds + b(t) dw,   a(0) = b(0) = 0
//! ```
//!
//! with `w ∈ [−ε, ε]` across the annulus, `s` along its core and
//! `t ∈ (−τ, τ)` along the flow. Cutting along `C` and regluing by the shear
//! `F(w, s) = (w, s + f(w))`, `f(w) = q·g(w/ε)`, is a `(1, q)` surgery. The
//! forms are made to match across the cut by adding `±ρ` to α and `±σ` to β
//! with
//!
//! ```text
//! ρ = ½ λ₁(t) a(t) f′(w) dw,   σ = ½ λ₂(t) f′(w) dw,
//! ```
//!
//! so that `F*(α − ρ) = α + ρ` and `F*(β − σ) = β + σ` where `λᵢ = 1`.
//! The contact conditions of the new forms reduce to
//!
//! ```text
//! α̃∧dα̃ = −a′ ± ½ λ₁′ a² f′,    β̃∧dβ̃ = b′ ± ½ λ₂′ f′.
//! ```

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::chart::{cross, dot, grid_scan, norm, Axis, GridSpec, OneForm, Point, Profile, ScalarField};
use crate::error::{Error, Result};
use crate::monodromy::{HomologyClass, Monodromy, Slope};
use crate::report::{CheckRecord, VerificationReport};

/// Width of each smoothed ramp of `g′`, as a fraction of `[−1, 1]`.
pub const DEFAULT_RAMP: f64 = 0.25;

/// How `a` and `b` depend on `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileChoice {
    /// `a(t) = a(τ)·t/τ`, `b(t) = b(τ)·t/τ`.
    Linear { a_tau: f64, b_tau: f64 },
    /// `a(t) = t`, `b(t) = b_slope·t`.
    Normalized { b_slope: f64 },
}

/// The normal form of the pair on a flow box around the annulus.
#[derive(Clone, Debug)]
pub struct FlowBoxModel {
    pub epsilon: f64,
    pub tau: f64,
    pub a: Profile,
    pub b: Profile,
    pub choice: ProfileChoice,
}

impl FlowBoxModel {
    pub fn alpha(&self) -> OneForm {
        OneForm::new(
            ScalarField::constant(1.0),
            ScalarField::along(2, self.a.clone()),
            ScalarField::zero(),
        )
    }

    pub fn beta(&self) -> OneForm {
        OneForm::new(
            ScalarField::along(2, self.b.clone()),
            ScalarField::constant(1.0),
            ScalarField::zero(),
        )
    }

    /// `a(τ)·b(τ)`, the quantity that must stay below 1.
    pub fn end_product(&self) -> f64 {
        self.a.value(self.tau) * self.b.value(self.tau)
    }

    /// The `(w, t)` grid over the box, with `s` fixed (nothing depends on it).
    pub fn grid(&self, w_samples: usize, t_samples: usize) -> Result<GridSpec> {
        GridSpec::new([
            Axis::closed(-self.epsilon, self.epsilon, w_samples),
            Axis::fixed(0.0),
            Axis::closed(-self.tau, self.tau, t_samples),
        ])
    }
}

fn positive(name: &'static str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive and finite, got {x}")))
    }
}

/// Build the flow-box normal form. With `require_bicontact`, models with
/// `a(τ)·b(τ) ≥ 1` are rejected, since their kernels meet inside the box.
pub fn build_flowbox(epsilon: f64, tau: f64, choice: ProfileChoice, require_bicontact: bool) -> Result<FlowBoxModel> {
    positive("epsilon", epsilon)?;
    positive("tau", tau)?;
    let (a, b) = match choice {
        ProfileChoice::Linear { a_tau, b_tau } => {
            (Profile::affine(a_tau / tau, 0.0), Profile::affine(b_tau / tau, 0.0))
        }
        ProfileChoice::Normalized { b_slope } => (Profile::affine(1.0, 0.0), Profile::affine(b_slope, 0.0)),
    };
    let model = FlowBoxModel { epsilon, tau, a, b, choice };
    let product = model.end_product();
    if require_bicontact && !(product < 1.0) {
        return Err(Error::NotBiContact { product });
    }
    Ok(model)
}

/// Quintic smootherstep `6x⁵ − 15x⁴ + 10x³` on `[0, 1]`.
fn smootherstep(x: f64) -> f64 {
    x * x * x * (x * (6.0 * x - 15.0) + 10.0)
}

fn smootherstep_prime(x: f64) -> f64 {
    30.0 * x * x * (1.0 - x) * (1.0 - x)
}

/// Antiderivative of the smootherstep vanishing at 0; equals ½ at 1.
fn smootherstep_integral(x: f64) -> f64 {
    x * x * x * x * (x * (x - 3.0) + 2.5)
}

/// The twist profile `g`: 0 below −1, `period` above 1, increasing in
/// between, with `g′` a trapezoid whose corners are smoothed by a quintic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShearProfile {
    pub q: i64,
    pub period: f64,
    pub ramp: f64,
}

impl ShearProfile {
    /// Total twist `2π`, ramps of width 0.25: the plateau of `g′` is
    /// `2π/1.75 ≈ 3.59`.
    pub fn canonical(q: i64) -> Self {
        Self { q, period: 2.0 * PI, ramp: DEFAULT_RAMP }
    }

    /// The same shape with total twist `period`.
    pub fn with_period(q: i64, period: f64) -> Result<Self> {
        positive("period", period)?;
        Ok(Self { q, period, ramp: DEFAULT_RAMP })
    }

    /// Height of the plateau of `g′`.
    pub fn plateau(&self) -> f64 {
        self.period / (2.0 - self.ramp)
    }

    pub fn g(&self, u: f64) -> f64 {
        let (r, h) = (self.ramp, self.plateau());
        if u <= -1.0 {
            0.0
        } else if u < -1.0 + r {
            h * r * smootherstep_integral((u + 1.0) / r)
        } else if u <= 1.0 - r {
            0.5 * h * r + h * (u + 1.0 - r)
        } else if u < 1.0 {
            self.period - h * r * smootherstep_integral((1.0 - u) / r)
        } else {
            self.period
        }
    }

    pub fn g_prime(&self, u: f64) -> f64 {
        let (r, h) = (self.ramp, self.plateau());
        if u <= -1.0 || u >= 1.0 {
            0.0
        } else if u < -1.0 + r {
            h * smootherstep((u + 1.0) / r)
        } else if u <= 1.0 - r {
            h
        } else {
            h * smootherstep((1.0 - u) / r)
        }
    }

    pub fn g_second(&self, u: f64) -> f64 {
        let (r, h) = (self.ramp, self.plateau());
        if u <= -1.0 || u >= 1.0 {
            0.0
        } else if u < -1.0 + r {
            h * smootherstep_prime((u + 1.0) / r) / r
        } else if u <= 1.0 - r {
            0.0
        } else {
            -h * smootherstep_prime((1.0 - u) / r) / r
        }
    }

    /// `g` as a profile.
    pub fn g_profile(&self) -> Profile {
        let (s0, s1, s2) = (*self, *self, *self);
        Profile::new(move |u| s0.g(u), move |u| s1.g_prime(u), move |u| s2.g_second(u))
    }

    /// `f(w) = q·g(w/ε)`.
    pub fn f(&self, epsilon: f64) -> Profile {
        self.g_profile().rescaled_argument(epsilon).scaled(self.q as f64)
    }

    /// Bound on `g′` that scales with the period: 4 for the canonical `2π`.
    pub fn derivative_bound(&self) -> f64 {
        4.0 * self.period / (2.0 * PI)
    }

    /// Checks `g(−1) = 0`, `g(1) = period` and `0 ≤ g′ ≤ bound` on a sample.
    pub fn validate(&self) -> Result<()> {
        if !(self.ramp > 0.0 && self.ramp <= 1.0) {
            return Err(Error::param("ramp", format!("must lie in (0, 1], got {}", self.ramp)));
        }
        if self.g(-1.0).abs() > 1e-12 || (self.g(1.0) - self.period).abs() > 1e-12 {
            return Err(Error::param("g", "boundary values are off"));
        }
        let bound = self.derivative_bound();
        for i in 0..=4000 {
            let u = -1.0 + i as f64 / 2000.0;
            let d = self.g_prime(u);
            if !(0.0..=bound).contains(&d) {
                return Err(Error::param("g", format!("g'({u}) = {d} outside [0, {bound}]")));
            }
        }
        Ok(())
    }
}

/// The annulus map `(s, w) ↦ (s + f(w), w)`.
#[derive(Clone, Debug)]
pub struct ShearMap {
    f: Profile,
}

pub fn shear_map(profile: &ShearProfile, epsilon: f64) -> ShearMap {
    ShearMap { f: profile.f(epsilon) }
}

impl ShearMap {
    pub fn apply(&self, s: f64, w: f64) -> (f64, f64) {
        (s + self.f.value(w), w)
    }

    /// The map on flow-box points `(w, s, t)`.
    pub fn apply_point(&self, p: Point) -> Point {
        [p[0], p[1] + self.f.value(p[0]), p[2]]
    }

    pub fn f_prime(&self, w: f64) -> f64 {
        self.f.derivative(w)
    }

    /// Coefficients of `F*ω` at `p`, given the coefficients of `ω` at `F(p)`.
    pub fn pull_back(&self, p: Point, at_image: [f64; 3]) -> [f64; 3] {
        [at_image[0] + at_image[1] * self.f_prime(p[0]), at_image[1], at_image[2]]
    }
}

/// Which side of `C` a one-sided perturbation lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Negative,
    Positive,
}

impl Side {
    fn contains(self, t: f64) -> bool {
        match self {
            Side::Negative => t <= 0.0,
            Side::Positive => t >= 0.0,
        }
    }

    fn opposite(self) -> Side {
        match self {
            Side::Negative => Side::Positive,
            Side::Positive => Side::Negative,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BumpSupport {
    Both,
    One(Side),
}

/// A bump `λ` with `λ(0) = 1`, supported in `[−τᵢ, τᵢ]` (or the half of it
/// named by `support`).
#[derive(Clone, Debug)]
pub struct BumpProfile {
    pub half_width: f64,
    pub support: BumpSupport,
    pub lambda: Profile,
}

impl BumpProfile {
    /// `cos²(πt/(2τ))` on the support, zero elsewhere.
    pub fn cos_squared(half_width: f64, support: BumpSupport) -> Result<Self> {
        positive("tau", half_width)?;
        let k = PI / (2.0 * half_width);
        let inside = move |t: f64| {
            t.abs() < half_width
                && match support {
                    BumpSupport::Both => true,
                    BumpSupport::One(side) => side.contains(t),
                }
        };
        let lambda = Profile::new(
            move |t| if inside(t) { (k * t).cos().powi(2) } else { 0.0 },
            move |t| if inside(t) { -k * (2.0 * k * t).sin() } else { 0.0 },
            move |t| if inside(t) { -2.0 * k * k * (2.0 * k * t).cos() } else { 0.0 },
        );
        Self::custom(half_width, support, lambda)
    }

    /// A user-supplied bump, checked against the bounds on a sample.
    pub fn custom(half_width: f64, support: BumpSupport, lambda: Profile) -> Result<Self> {
        positive("tau", half_width)?;
        let bump = Self { half_width, support, lambda };
        bump.validate()?;
        Ok(bump)
    }

    /// Largest `|λ′|` permitted.
    pub fn derivative_bound(&self) -> f64 {
        PI / self.half_width
    }

    fn in_support(&self, t: f64) -> bool {
        t.abs() <= self.half_width
            && match self.support {
                BumpSupport::Both => true,
                BumpSupport::One(side) => side.contains(t),
            }
    }

    pub fn validate(&self) -> Result<()> {
        let lam = &self.lambda;
        if (lam.value(0.0) - 1.0).abs() > 1e-12 {
            return Err(Error::BumpBounds(format!("lambda(0) = {} instead of 1", lam.value(0.0))));
        }
        let n = 4000;
        let bound = self.derivative_bound();
        for i in 0..=n {
            let t = self.half_width * (-1.5 + 3.0 * i as f64 / n as f64);
            let (v, d) = (lam.value(t), lam.derivative(t));
            if !self.in_support(t) && v != 0.0 {
                return Err(Error::BumpBounds(format!("lambda({t}) = {v} outside the support")));
            }
            if d.abs() > bound {
                return Err(Error::BumpBounds(format!("|lambda'({t})| = {} > {bound}", d.abs())));
            }
            if (t < 0.0 && d < -1e-15) || (t > 0.0 && d > 1e-15) {
                return Err(Error::BumpBounds(format!("lambda' has the wrong sign at t = {t}")));
            }
        }
        Ok(())
    }
}

/// Whether the perturbations straddle `C` or sit on one side of it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurgeryMode {
    /// `α ∓ ρ`, `β ∓ σ` on the two sides, with the factor ½.
    TwoSided,
    /// Unperturbed forms on one side; `α + 2ρ`, `β + 2σ` on the given side.
    OneSided(Side),
}

/// The surgered forms on the two sides of the cut.
#[derive(Clone, Debug)]
pub struct SurgeryResult {
    pub alpha_tilde_minus: OneForm,
    pub alpha_tilde_plus: OneForm,
    pub beta_tilde_minus: OneForm,
    pub beta_tilde_plus: OneForm,
    pub q: i64,
    pub tau1: f64,
    pub tau2: f64,
    pub mode: SurgeryMode,
    /// Side of `C` carrying the `+` branch; the `−` branch is on the other.
    pub plus_side: Side,
    pub shear: ShearProfile,
    pub epsilon: f64,
    pub lambda1: BumpProfile,
    pub lambda2: BumpProfile,
    /// `(1, q)`, relative to the framing of the annulus core by `ker α`.
    pub dehn_coefficient: (i64, i64),
}

impl SurgeryResult {
    /// Factor in front of `λᵢ f′` in the perturbations.
    pub fn factor(&self) -> f64 {
        match self.mode {
            SurgeryMode::TwoSided => 0.5,
            SurgeryMode::OneSided(_) => 1.0,
        }
    }

    pub fn shear_map(&self) -> ShearMap {
        shear_map(&self.shear, self.epsilon)
    }
}

/// Cut the flow box along `C` and reglue by the shear, perturbing the forms
/// so that they match across the cut.
pub fn perform_surgery(
    model: &FlowBoxModel,
    shear: &ShearProfile,
    tau1: f64,
    tau2: f64,
    mode: SurgeryMode,
) -> Result<SurgeryResult> {
    positive("tau1", tau1)?;
    if !(tau1 < tau2) {
        return Err(Error::param("tau1", format!("must be below tau2 = {tau2}, got {tau1}")));
    }
    if tau2 > model.tau {
        return Err(Error::param("tau2", format!("must not exceed tau = {}, got {tau2}", model.tau)));
    }
    shear.validate()?;

    let support = match mode {
        SurgeryMode::TwoSided => BumpSupport::Both,
        SurgeryMode::OneSided(side) => BumpSupport::One(side),
    };
    let lambda1 = BumpProfile::cos_squared(tau1, support)?;
    let lambda2 = BumpProfile::cos_squared(tau2, support)?;

    let (factor, plus_side) = match mode {
        SurgeryMode::TwoSided => (0.5, Side::Negative),
        SurgeryMode::OneSided(side) => (1.0, side),
    };
    let f_prime = ScalarField::along(0, shear.f(model.epsilon).derived());
    let rho = (ScalarField::along(2, lambda1.lambda.clone()) * ScalarField::along(2, model.a.clone()) * f_prime.clone())
        .scale(factor);
    let sigma = (ScalarField::along(2, lambda2.lambda.clone()) * f_prime).scale(factor);

    let dw = |c: ScalarField| OneForm::new(c, ScalarField::zero(), ScalarField::zero());
    let (alpha, beta) = (model.alpha(), model.beta());
    let (alpha_minus, beta_minus) = match mode {
        SurgeryMode::TwoSided => (alpha.plus(&dw(-rho.clone())), beta.plus(&dw(-sigma.clone()))),
        SurgeryMode::OneSided(_) => (alpha.clone(), beta.clone()),
    };

    Ok(SurgeryResult {
        alpha_tilde_plus: alpha.plus(&dw(rho)),
        beta_tilde_plus: beta.plus(&dw(sigma)),
        alpha_tilde_minus: alpha_minus,
        beta_tilde_minus: beta_minus,
        q: shear.q,
        tau1,
        tau2,
        mode,
        plus_side,
        shear: *shear,
        epsilon: model.epsilon,
        lambda1,
        lambda2,
        dehn_coefficient: (1, shear.q),
    })
}

/// Largest coefficient deviation of `F*(minus branch)` from the plus branch
/// on an `n × n` grid of `(s, w)` on `C`, for α and for β.
pub fn gluing_residual(r: &SurgeryResult, s_period: f64, n: usize) -> (f64, f64) {
    let map = r.shear_map();
    let n = n.max(2);
    let mut worst = (0.0f64, 0.0f64);
    for i in 0..n {
        let s = s_period * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let w = -r.epsilon + 2.0 * r.epsilon * j as f64 / (n - 1) as f64;
            let p = [w, s, 0.0];
            let fp = map.apply_point(p);
            let dev = |minus: &OneForm, plus: &OneForm| {
                let pulled = map.pull_back(p, minus.eval(fp));
                let target = plus.eval(p);
                (0..3).map(|k| (pulled[k] - target[k]).abs()).fold(0.0, f64::max)
            };
            worst.0 = worst.0.max(dev(&r.alpha_tilde_minus, &r.alpha_tilde_plus));
            worst.1 = worst.1.max(dev(&r.beta_tilde_minus, &r.beta_tilde_plus));
        }
    }
    worst
}

/// `ε/(2π|q|)`: any `τ₁` below it keeps α̃ contact. Infinite for `q = 0`.
pub fn tau1_bound(q: i64, epsilon: f64) -> f64 {
    if q == 0 {
        f64::INFINITY
    } else {
        epsilon / (2.0 * PI * (q as f64).abs())
    }
}

/// Restrict the `t` axis of `grid` to one side of `C`.
fn half_grid(grid: &GridSpec, side: Side) -> Result<GridSpec> {
    let t = grid.axes[2];
    let zero_inside = t.lo <= 0.0 && t.hi >= 0.0;
    if !zero_inside {
        return Err(Error::InvalidGrid("t axis must contain 0".into()));
    }
    let step = if t.samples > 1 { (t.hi - t.lo) / (t.samples - 1) as f64 } else { 0.0 };
    let count = |len: f64| if step > 0.0 { (len / step).round() as usize + 1 } else { 1 };
    let axis = match side {
        Side::Negative => {
            let n = count(-t.lo);
            if n > 1 { Axis::closed(t.lo, 0.0, n) } else { Axis::fixed(0.0) }
        }
        Side::Positive => {
            let n = count(t.hi);
            if n > 1 { Axis::closed(0.0, t.hi, n) } else { Axis::fixed(0.0) }
        }
    };
    GridSpec::new([grid.axes[0], grid.axes[1], axis])
}

/// Contact and transversality checks of the surgered forms, each branch on
/// its own side of `C`.
pub fn verify_surgery_contact(r: &SurgeryResult, m: &FlowBoxModel, grid: &GridSpec) -> Result<VerificationReport> {
    let mut report = VerificationReport::new();
    let origin = [0.0, 0.0, 0.0];
    let alpha_sign = sign_or_one(m.alpha().contact_volume(origin).coefficient());
    let beta_sign = sign_or_one(m.beta().contact_volume(origin).coefficient());
    let reference = cross(m.alpha().eval(origin), m.beta().eval(origin));
    let reference = reference.map(|c| c / norm(reference));

    let minus_side = r.plus_side.opposite();
    let branches = [
        ("plus", r.plus_side, &r.alpha_tilde_plus, &r.beta_tilde_plus, 1.0),
        ("minus", minus_side, &r.alpha_tilde_minus, &r.beta_tilde_minus, -1.0),
    ];

    let mut min_abs = (f64::INFINITY, f64::INFINITY);
    let mut min_trans = f64::INFINITY;
    for (label, side, alpha, beta, pm) in branches {
        let g = half_grid(grid, side)?;
        let pm_str = if pm > 0.0 { "+" } else { "-" };

        let sa = grid_scan(|p| alpha_sign * alpha.contact_volume(p).coefficient(), &g);
        min_abs.0 = min_abs.0.min(grid_scan(|p| alpha.contact_volume(p).coefficient().abs(), &g).min);
        let mut rec = CheckRecord::new(
            format!("alpha-{label}-contact"),
            "-a' ± (1/2) lambda1' a^2 f' != 0",
            sa.min,
            0.0,
        )
        .with_witness(vec![sa.argmin[0], sa.argmin[2]]);
        if !rec.passed {
            rec = rec.with_detail(format!(
                "-a'(t) {pm_str} c lambda1'(t) a(t)^2 f'(w) changes sign at (w, t) = ({:.6}, {:.6})",
                sa.argmin[0], sa.argmin[2]
            ));
        }
        report.push(rec);

        let sb = grid_scan(|p| beta_sign * beta.contact_volume(p).coefficient(), &g);
        min_abs.1 = min_abs.1.min(grid_scan(|p| beta.contact_volume(p).coefficient().abs(), &g).min);
        let mut rec = CheckRecord::new(
            format!("beta-{label}-contact"),
            "b' ± (1/2) lambda2' f' != 0",
            sb.min,
            0.0,
        )
        .with_witness(vec![sb.argmin[0], sb.argmin[2]]);
        if !rec.passed {
            rec = rec.with_detail(format!(
                "b'(t) {pm_str} c lambda2'(t) f'(w) changes sign at (w, t) = ({:.6}, {:.6})",
                sb.argmin[0], sb.argmin[2]
            ));
        }
        report.push(rec);

        let st = grid_scan(
            |p| {
                let (a, b) = (alpha.eval(p), beta.eval(p));
                dot(cross(a, b), reference) / (norm(a) * norm(b))
            },
            &g,
        );
        min_trans = min_trans.min(st.min);
        report.push(
            CheckRecord::new(format!("transversality-{label}"), "ker alpha~ transverse to ker beta~", st.min, 0.0)
                .with_witness(vec![st.argmin[0], st.argmin[2]]),
        );
    }

    if matches!(m.choice, ProfileChoice::Normalized { .. }) && r.q != 0 {
        // |c λ₁′ t² f′| ≤ c (π/τ₁) τ₁² (4|q|/ε) = 2πτ₁|q|/ε for c = ½.
        let chain = r.factor() * r.lambda1.derivative_bound() * r.tau1 * r.tau1 * r.shear.derivative_bound()
            * (r.q as f64).abs()
            / r.epsilon;
        report.push(CheckRecord::new("tau1-chain", "2 pi tau1 |q| / eps < 1", 1.0 - chain, 0.0).with_detail(
            format!("chain bound {chain:.6}"),
        ));
        let f = r.shear.f(r.epsilon);
        let lam = &r.lambda1.lambda;
        let observed = grid_scan(
            |p| (r.factor() * lam.derivative(p[2]) * p[2] * p[2] * f.derivative(p[0])).abs(),
            grid,
        )
        .max;
        report.push(
            CheckRecord::new("tau1-chain-dominates", "|c lambda1' t^2 f'| <= chain", chain - observed, -1e-12)
                .with_detail(format!("sampled sup {observed:.6}")),
        );
        report.set_value("tau1_chain", chain);
    }

    report.set_value("q", r.q);
    report.set_value("tau1", r.tau1);
    report.set_value("tau2", r.tau2);
    report.set_value("min_abs_alpha_contact", min_abs.0);
    report.set_value("min_abs_beta_contact", min_abs.1);
    report.set_value("min_transversality", min_trans);
    Ok(report)
}

fn sign_or_one(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// The surgery coefficients allowed by the slope criterion: negative `q`
/// must satisfy `|q|/(2ε) < slope(B γ)`, positive `q` always qualify.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleCoefficients {
    pub slope: Slope,
    /// Annulus width `2ε`.
    pub width: f64,
    /// Smallest admissible `q`; `None` when every negative `q` qualifies.
    pub min_q: Option<i64>,
}

impl AdmissibleCoefficients {
    pub fn contains(&self, q: i64) -> bool {
        self.min_q.map_or(true, |m| q >= m)
    }
}

impl fmt::Display for AdmissibleCoefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.min_q {
            Some(m) => write!(f, "{{q in Z : q >= {m}}}"),
            None => f.write_str("Z"),
        }
    }
}

/// Admissible surgery coefficients on an annulus of width `2ε` whose core
/// is carried to `B γ`.
pub fn admissible_negative_coefficients(b: &Monodromy, gamma: HomologyClass, epsilon: f64) -> Result<AdmissibleCoefficients> {
    if !b.is_anosov() {
        return Err(Error::NotAnosov { trace: b.trace() });
    }
    positive("epsilon", epsilon)?;
    let width = 2.0 * epsilon;
    if width > 1.0 {
        return Err(Error::param("epsilon", format!("annulus width 2·epsilon = {width} exceeds 1")));
    }
    let slope = b.image_slope(gamma)?;
    let min_q = if slope.is_infinite() {
        None
    } else if slope.num <= 0 {
        Some(0)
    } else {
        // Largest n with n·den < width·num.
        let (num, den) = (slope.num as f64, slope.den as f64);
        let target = width * num;
        let mut n = (target / den).floor().max(0.0) as i64;
        while n > 0 && n as f64 * den >= target {
            n -= 1;
        }
        while ((n + 1) as f64) * den < target {
            n += 1;
        }
        Some(-n)
    };
    Ok(AdmissibleCoefficients { slope, width, min_q })
}

/// Flow box calibrated to a slope `k`: `τ = 1`, `b(t) = k t`,
/// `a(t) = t/(2k)`, so `a(τ)b(τ) = ½`.
pub fn slope_calibrated_box(slope: f64, epsilon: f64) -> Result<FlowBoxModel> {
    positive("slope", slope)?;
    build_flowbox(epsilon, 1.0, ProfileChoice::Linear { a_tau: 0.5 / slope, b_tau: slope }, true)
}

/// One-sided surgery on [`slope_calibrated_box`] with a shear of total
/// twist 1 (one unit of length along the core).
pub fn slope_calibrated_surgery(model: &FlowBoxModel, q: i64) -> Result<SurgeryResult> {
    let shear = ShearProfile::with_period(q, 1.0)?;
    let tau1 = if q == 0 { 0.5 * model.tau } else { 0.9 * tau1_bound(q, model.epsilon).min(model.tau) };
    perform_surgery(model, &shear, tau1, model.tau, SurgeryMode::OneSided(Side::Negative))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normalized(epsilon: f64, tau: f64) -> FlowBoxModel {
        build_flowbox(epsilon, tau, ProfileChoice::Normalized { b_slope: 1.0 }, true).unwrap()
    }

    #[test]
    fn flowbox_examples() {
        let m = build_flowbox(1.0, 1.0, ProfileChoice::Linear { a_tau: 0.5, b_tau: 0.5 }, true).unwrap();
        assert!((m.end_product() - 0.25).abs() < 1e-15);
        assert_eq!(m.a.value(0.0), 0.0);
        assert_eq!(m.b.value(0.0), 0.0);
        assert!(matches!(
            build_flowbox(1.0, 1.0, ProfileChoice::Linear { a_tau: 1.1, b_tau: 1.1 }, true),
            Err(Error::NotBiContact { .. })
        ));
        let n = normalized(0.5, 0.01);
        assert_eq!(n.a.value(0.004), 0.004);
        assert!(build_flowbox(0.0, 1.0, ProfileChoice::Normalized { b_slope: 1.0 }, false).is_err());
    }

    #[test]
    fn canonical_g_bounds() {
        let s = ShearProfile::canonical(1);
        s.validate().unwrap();
        assert!(s.plateau() <= 3.6);
        assert!(s.g(-1.0).abs() < 1e-12);
        assert!((s.g(1.0) - 2.0 * PI).abs() < 1e-12);
        assert_eq!(s.g(-3.0), 0.0);
        assert_eq!(s.g(7.0), 2.0 * PI);
    }

    #[test]
    fn g_pieces_are_continuous() {
        let s = ShearProfile::canonical(1);
        for u in [-1.0, -0.75, 0.75, 1.0] {
            let h = 1e-12;
            assert!((s.g(u - h) - s.g(u + h)).abs() < 1e-10);
            assert!((s.g_prime(u - h) - s.g_prime(u + h)).abs() < 1e-9);
            assert!((s.g_second(u - h) - s.g_second(u + h)).abs() < 1e-6);
        }
    }

    #[test]
    fn g_derivatives_match_differences() {
        let s = ShearProfile::canonical(1);
        for i in 0..200 {
            let u = -1.1 + 2.2 * i as f64 / 199.0;
            let h = 1e-6;
            let d1 = (s.g(u + h) - s.g(u - h)) / (2.0 * h);
            let d2 = (s.g_prime(u + h) - s.g_prime(u - h)) / (2.0 * h);
            assert!((d1 - s.g_prime(u)).abs() <= 1e-6 * s.g_prime(u).abs().max(1.0));
            assert!((d2 - s.g_second(u)).abs() <= 1e-4 * s.g_second(u).abs().max(1.0), "u = {u}");
        }
    }

    #[test]
    fn shear_examples() {
        let eps = 0.5;
        let id = shear_map(&ShearProfile::canonical(0), eps);
        assert_eq!(id.apply(0.3, 0.1), (0.3, 0.1));
        let one = shear_map(&ShearProfile::canonical(1), eps);
        let (s, _) = one.apply(0.0, eps);
        assert!((s - 2.0 * PI).abs() < 1e-12);
        let neg = shear_map(&ShearProfile::canonical(-3), eps);
        assert_eq!(neg.apply(0.7, -eps), (0.7, -eps));
    }

    #[test]
    fn cos_squared_bump() {
        let b = BumpProfile::cos_squared(0.2, BumpSupport::Both).unwrap();
        assert_eq!(b.lambda.value(0.0), 1.0);
        assert_eq!(b.lambda.value(0.25), 0.0);
        let max = (0..=1000)
            .map(|i| b.lambda.derivative(-0.2 + 0.4 * i as f64 / 1000.0).abs())
            .fold(0.0, f64::max);
        assert!((max - PI / 0.4).abs() < 1e-3);
        let one = BumpProfile::cos_squared(0.2, BumpSupport::One(Side::Positive)).unwrap();
        assert_eq!(one.lambda.value(-0.1), 0.0);
        assert_eq!(one.lambda.value(0.0), 1.0);
    }

    #[test]
    fn steep_bump_is_rejected() {
        let tau = 0.1;
        let k = 4.0 * PI / tau;
        let lam = Profile::new(
            move |t: f64| if t.abs() < tau { (-(k * t).powi(2)).exp() } else { 0.0 },
            move |t: f64| if t.abs() < tau { -2.0 * k * k * t * (-(k * t).powi(2)).exp() } else { 0.0 },
            |_| 0.0,
        );
        assert!(matches!(BumpProfile::custom(tau, BumpSupport::Both, lam), Err(Error::BumpBounds(_))));
    }

    #[test]
    fn tau1_bound_examples() {
        assert!((tau1_bound(1, 2.0 * PI) - 1.0).abs() < 1e-15);
        assert!((tau1_bound(4, 0.5) - 0.019894367886486918).abs() < 1e-15);
        assert_eq!(tau1_bound(0, 0.5), f64::INFINITY);
    }

    #[test]
    fn surgery_preconditions() {
        let m = normalized(0.5, 0.1);
        let s = ShearProfile::canonical(2);
        assert!(perform_surgery(&m, &s, 0.05, 0.05, SurgeryMode::TwoSided).is_err());
        assert!(perform_surgery(&m, &s, 0.05, 0.2, SurgeryMode::TwoSided).is_err());
        assert!(perform_surgery(&m, &s, 0.01, 0.05, SurgeryMode::TwoSided).is_ok());
    }

    #[test]
    fn zero_coefficient_is_identity() {
        let m = normalized(0.5, 0.1);
        let r = perform_surgery(&m, &ShearProfile::canonical(0), 0.03, 0.06, SurgeryMode::TwoSided).unwrap();
        let grid = m.grid(21, 21).unwrap();
        for k in 0..grid.len() {
            let p = grid.point_at(k);
            for form in [&r.alpha_tilde_minus, &r.alpha_tilde_plus] {
                assert_eq!(form.eval(p), m.alpha().eval(p));
            }
            for form in [&r.beta_tilde_minus, &r.beta_tilde_plus] {
                assert_eq!(form.eval(p), m.beta().eval(p));
            }
        }
    }

    #[test]
    fn gluing_identity_two_sided() {
        let eps = 0.5;
        let tau1 = 0.9 * tau1_bound(2, eps);
        let m = normalized(eps, 2.0 * tau1);
        let r = perform_surgery(&m, &ShearProfile::canonical(2), tau1, 2.0 * tau1, SurgeryMode::TwoSided).unwrap();
        let (ra, rb) = gluing_residual(&r, 1.0, 101);
        assert!(ra < 1e-12 && rb < 1e-12, "{ra} {rb}");
    }

    #[test]
    fn gluing_identity_one_sided() {
        let eps = 0.5;
        let m = normalized(eps, 0.1);
        for side in [Side::Negative, Side::Positive] {
            let r = perform_surgery(&m, &ShearProfile::canonical(-3), 0.02, 0.1, SurgeryMode::OneSided(side)).unwrap();
            let (ra, rb) = gluing_residual(&r, 1.0, 101);
            assert!(ra < 1e-12 && rb < 1e-12, "{ra} {rb}");
            // The minus branch is untouched.
            let p = [0.1, 0.0, 0.01];
            assert_eq!(r.beta_tilde_minus.eval(p), m.beta().eval(p));
        }
    }

    #[test]
    fn gluing_fails_off_the_annulus() {
        let eps = 0.5;
        let m = normalized(eps, 0.1);
        let r = perform_surgery(&m, &ShearProfile::canonical(2), 0.02, 0.05, SurgeryMode::TwoSided).unwrap();
        let map = r.shear_map();
        let p = [0.0, 0.0, 0.03];
        let pulled = map.pull_back(p, r.beta_tilde_minus.eval(map.apply_point(p)));
        assert!((pulled[0] - r.beta_tilde_plus.eval(p)[0]).abs() > 1e-3);
    }

    // Closed forms of the contact volumes, derived by hand from the
    // coefficients (1 ± cλ₁af′, a, 0) and (b ± cλ₂f′, 1, 0).
    #[test]
    fn contact_volumes_match_closed_form() {
        let eps = 0.5;
        let m = build_flowbox(eps, 0.1, ProfileChoice::Linear { a_tau: 0.03, b_tau: 0.2 }, true).unwrap();
        let r = perform_surgery(&m, &ShearProfile::canonical(3), 0.04, 0.08, SurgeryMode::TwoSided).unwrap();
        let f = r.shear.f(eps);
        for &(w, t) in &[(0.1, -0.02), (-0.3, 0.035), (0.45, -0.07), (0.0, 0.0)] {
            let p = [w, 0.0, t];
            let (l1, l2) = (&r.lambda1.lambda, &r.lambda2.lambda);
            let (a, a1, b1) = (m.a.value(t), m.a.derivative(t), m.b.derivative(t));
            let fp = f.derivative(w);
            for (pm, alpha, beta) in [
                (1.0, &r.alpha_tilde_plus, &r.beta_tilde_plus),
                (-1.0, &r.alpha_tilde_minus, &r.beta_tilde_minus),
            ] {
                let want_a = -a1 + pm * 0.5 * l1.derivative(t) * a * a * fp;
                let want_b = b1 + pm * 0.5 * l2.derivative(t) * fp;
                assert!((alpha.contact_volume(p).0 - want_a).abs() < 1e-12);
                assert!((beta.contact_volume(p).0 - want_b).abs() < 1e-12);
                assert!((alpha.contact_volume_fd(p, 1e-6).0 - want_a).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn worked_example_passes() {
        let eps = 0.5;
        let tau1 = 0.9 * tau1_bound(3, eps);
        let m = normalized(eps, 2.0 * tau1);
        let r = perform_surgery(&m, &ShearProfile::canonical(3), tau1, 2.0 * tau1, SurgeryMode::TwoSided).unwrap();
        let rep = verify_surgery_contact(&r, &m, &m.grid(101, 101).unwrap()).unwrap();
        assert!(rep.passed(), "{rep:#?}");
        let chain = rep.check("tau1-chain").unwrap();
        assert!((chain.margin - 0.1).abs() < 1e-12);
    }

    #[test]
    fn positive_q_beta_passes_with_positive_eta() {
        let eps = 0.5;
        let tau1 = 0.9 * tau1_bound(5, eps);
        let m = normalized(eps, 2.0 * tau1);
        let r = perform_surgery(&m, &ShearProfile::canonical(5), tau1, 2.0 * tau1, SurgeryMode::TwoSided).unwrap();
        let rep = verify_surgery_contact(&r, &m, &m.grid(101, 101).unwrap()).unwrap();
        assert!(rep.check("beta-plus-contact").unwrap().passed);
        assert!(rep.check("beta-minus-contact").unwrap().passed);
    }

    #[test]
    fn large_tau1_produces_witness() {
        let eps = 0.5;
        let tau1 = 10.0 * eps / (2.0 * PI * 3.0);
        let m = normalized(eps, 2.0 * tau1);
        let r = perform_surgery(&m, &ShearProfile::canonical(3), tau1, 2.0 * tau1, SurgeryMode::TwoSided).unwrap();
        let rep = verify_surgery_contact(&r, &m, &m.grid(101, 101).unwrap()).unwrap();
        let failing: Vec<_> = rep.failures().filter(|c| c.name.starts_with("alpha")).collect();
        assert!(!failing.is_empty());
        assert!(failing.iter().all(|c| c.witness.is_some() && c.detail.is_some()));
    }

    #[test]
    fn worked_slope_example() {
        let b = Monodromy::new(5, 9, 1, 2).unwrap();
        let g = HomologyClass::second_generator();
        let adm = admissible_negative_coefficients(&b, g, 0.5).unwrap();
        assert_eq!(adm.min_q, Some(-4));
        assert_eq!(adm.to_string(), "{q in Z : q >= -4}");
        assert_eq!(admissible_negative_coefficients(&b, g, 0.25).unwrap().min_q, Some(-2));
        let a = Monodromy::new(2, 1, 1, 1).unwrap();
        assert_eq!(admissible_negative_coefficients(&a, g, 0.5).unwrap().min_q, Some(0));
        assert!(admissible_negative_coefficients(&b, g, 0.6).is_err());
        assert!(admissible_negative_coefficients(&Monodromy::identity(), g, 0.5).is_err());
    }

    #[test]
    fn boundary_width_is_strict() {
        // slope 9/2 and 2ε = 8/9 puts n = 4 exactly on the boundary.
        let b = Monodromy::new(5, 9, 1, 2).unwrap();
        let adm = admissible_negative_coefficients(&b, HomologyClass::second_generator(), 4.0 / 9.0).unwrap();
        assert_eq!(adm.min_q, Some(-3));
    }

    #[test]
    fn slope_setup_separates_signs() {
        let eps = 0.5;
        let slope = 4.5;
        let m = slope_calibrated_box(slope, eps).unwrap();
        let grid = m.grid(101, 201).unwrap();
        let threshold = (2.0 * eps * slope).ceil() as i64;
        for q in [1, 3, 8] {
            let r = slope_calibrated_surgery(&m, q).unwrap();
            let rep = verify_surgery_contact(&r, &m, &grid).unwrap();
            assert!(rep.check("beta-plus-contact").unwrap().passed, "q = {q}");
        }
        for q in [-threshold - 1, -threshold - 4] {
            let r = slope_calibrated_surgery(&m, q).unwrap();
            let rep = verify_surgery_contact(&r, &m, &grid).unwrap();
            let c = rep.check("beta-plus-contact").unwrap();
            assert!(!c.passed && c.witness.is_some(), "q = {q}");
        }
    }
}
