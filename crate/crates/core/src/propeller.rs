//! Propeller bi-contact structures on `T²`-bundles over the circle.
//!
//! A propeller is a pair of planar forms whose kernels rotate with the fibre
//! coordinate `z`:
//!
//! ```text
//! α = cos θ_α(z) dx − sin θ_α(z) dy + ε(z) dz
//! β = cos θ_β(z) dx + sin θ_β(z) dy
//! ```
//!
//! on `T² × [0, 1]`, glued by `(p, 0) ~ (A p, 1)`. With these sign choices
//! `α∧dα = θ_α′` and `β∧dβ = −θ_β′`, so two profiles rotating the same way
//! give contact forms of opposite signs. The `ε dz` term never changes the
//! contact volume; it only separates the kernels where the horizontal parts
//! line up.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::chart::{
    bisect, cross, dot, grid_scan, norm, transversality_margin_values, GridSpec, OneForm, Point, Profile,
    ScalarField,
};
use crate::error::{Error, Result};
use crate::monodromy::Monodromy;
use crate::report::{CheckRecord, VerificationReport};

/// Largest accepted gluing defect, in radians between normalized coefficient
/// vectors.
pub const GLUING_TOLERANCE: f64 = 1e-9;

/// Default size of the `ε dz` perturbation.
pub const DEFAULT_EPSILON: f64 = 0.1;

/// The `ε(z)` in front of `dz` in α.
#[derive(Clone, Debug)]
pub enum EpsilonProfile {
    Zero,
    Constant(f64),
    /// `ε₀·κ^z`, where `κ` is the factor by which the monodromy pullback
    /// stretches the horizontal part of α. This is the profile that glues
    /// when the monodromy is not an isometry; for the identity it is the
    /// constant `ε₀`.
    MonodromyScaled(f64),
    Custom(Profile),
}

/// Parameters of a propeller.
#[derive(Clone, Debug)]
pub struct PropellerSpec {
    /// θ_α as a function of `z` (radians).
    pub alpha_angle: Profile,
    /// θ_β as a function of `z` (radians).
    pub beta_angle: Profile,
    pub epsilon: EpsilonProfile,
    pub monodromy: Monodromy,
    /// Extra full turns of β (the `n` of the n-twist family).
    pub twist_count: u32,
}

fn linear_angle(start: f64, total: f64) -> Profile {
    Profile::affine(total, start)
}

fn wrap_pi(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

/// Boundary covector angles `(ψ(0), Δψ)` for a form whose horizontal
/// covector at `z = 1` points at angle `target`, glued by `Aᵀ`.
fn glued_rotation(m: &Monodromy, target: f64) -> (f64, f64) {
    let c1 = [target.cos(), target.sin()];
    let c0 = m.transpose().act(c1);
    let psi0 = c0[1].atan2(c0[0]);
    (psi0, wrap_pi(target - psi0))
}

impl PropellerSpec {
    /// Rotation profiles `θ_α(z) = θ_β(z) = 2πz` on `T³`.
    pub fn torus_example(epsilon: EpsilonProfile) -> Self {
        Self {
            alpha_angle: linear_angle(0.0, 2.0 * PI),
            beta_angle: linear_angle(0.0, 2.0 * PI),
            epsilon,
            monodromy: Monodromy::identity(),
            twist_count: 0,
        }
    }

    /// Affine rotation profiles `θ(z) = start + total·z`.
    pub fn linear(
        alpha: (f64, f64),
        beta: (f64, f64),
        epsilon: EpsilonProfile,
        monodromy: Monodromy,
    ) -> Self {
        Self {
            alpha_angle: linear_angle(alpha.0, alpha.1),
            beta_angle: linear_angle(beta.0, beta.1),
            epsilon,
            monodromy,
            twist_count: 0,
        }
    }

    /// The minimal-twisting propeller of the suspension of an Anosov
    /// monodromy with positive trace.
    ///
    /// The eigen-covectors of `Aᵀ` cut the projective circle into two arcs.
    /// α takes the midpoint of one arc at `z = 1`, β the midpoint of the
    /// other, and each rotates linearly back to the `Aᵀ`-image of that
    /// covector at `z = 0`. Both rotations stay inside their arc, so they
    /// are shorter than π, never cross each other, and go in opposite
    /// senses: α comes out negative and β positive. The kernels intersect
    /// along `∂z`, which generates the suspension flow.
    pub fn minimal_twist_suspension(m: Monodromy) -> Result<Self> {
        Self::n_twist(m, 0, EpsilonProfile::Zero)
    }

    /// The minimal-twisting propeller with `n` extra full turns added to β,
    /// so that β rotates by an angle in `(2nπ, (2n+1)π)`.
    pub fn n_twist(m: Monodromy, n: u32, epsilon: EpsilonProfile) -> Result<Self> {
        if m.trace() <= 2 {
            return Err(Error::param(
                "monodromy",
                format!("suspension propellers need trace > 2, got {}", m.trace()),
            ));
        }
        let eig = m.transpose().eigen_data()?;
        let phi_u = eig.expanding_direction[1].atan2(eig.expanding_direction[0]);
        let phi_s = eig.contracting_direction[1].atan2(eig.contracting_direction[0]);
        let width1 = (phi_u - phi_s).rem_euclid(PI);
        let mid1 = phi_s + 0.5 * width1;
        let mid2 = phi_u + 0.5 * (PI - width1);

        let (a0, da) = glued_rotation(&m, mid2);
        let (b0, db) = glued_rotation(&m, mid1);
        let db = db + db.signum() * 2.0 * PI * n as f64;
        // α's covector angle is −θ_α, β's is +θ_β.
        Ok(Self {
            alpha_angle: linear_angle(-a0, -da),
            beta_angle: linear_angle(b0, db),
            epsilon,
            monodromy: m,
            twist_count: n,
        })
    }

    /// Total rotation of β across the fibre interval.
    pub fn beta_rotation(&self) -> f64 {
        self.beta_angle.value(1.0) - self.beta_angle.value(0.0)
    }

    pub fn alpha_rotation(&self) -> f64 {
        self.alpha_angle.value(1.0) - self.alpha_angle.value(0.0)
    }
}

/// Two forms on the fundamental domain together with their gluing.
#[derive(Clone, Debug)]
pub struct BiContactCandidate {
    pub alpha: OneForm,
    pub beta: OneForm,
    pub monodromy: Monodromy,
    /// True when both forms are horizontal, so that the line field is `∂z`
    /// and the flow is the suspension of the monodromy.
    pub suspension: bool,
}

fn cos_profile(theta: &Profile, sign: f64) -> Profile {
    let (t0, t1, t2) = (theta.clone(), theta.clone(), theta.clone());
    Profile::new(
        move |z| sign * t0.value(z).cos(),
        move |z| -sign * t1.value(z).sin() * t1.derivative(z),
        move |z| {
            let (th, d1, d2) = (t2.value(z), t2.derivative(z), t2.second_derivative(z));
            -sign * (th.cos() * d1 * d1 + th.sin() * d2)
        },
    )
}

fn sin_profile(theta: &Profile, sign: f64) -> Profile {
    let (t0, t1, t2) = (theta.clone(), theta.clone(), theta.clone());
    Profile::new(
        move |z| sign * t0.value(z).sin(),
        move |z| sign * t1.value(z).cos() * t1.derivative(z),
        move |z| {
            let (th, d1, d2) = (t2.value(z), t2.derivative(z), t2.second_derivative(z));
            sign * (th.cos() * d2 - th.sin() * d1 * d1)
        },
    )
}

/// Angle between two coefficient vectors.
fn angular_defect(u: [f64; 3], v: [f64; 3]) -> f64 {
    norm(cross(u, v)).atan2(dot(u, v))
}

/// Pullback of a covector at `z = 1` to `z = 0` through `(p, 0) ↦ (A p, 1)`.
fn pull_back(m: &Monodromy, c: [f64; 3]) -> [f64; 3] {
    let h = m.transpose().act([c[0], c[1]]);
    [h[0], h[1], c[2]]
}

/// Build the forms of a propeller and check that they glue.
pub fn build_propeller(spec: &PropellerSpec) -> Result<BiContactCandidate> {
    let alpha_h = [
        cos_profile(&spec.alpha_angle, 1.0),
        sin_profile(&spec.alpha_angle, -1.0),
    ];
    let beta_h = [
        cos_profile(&spec.beta_angle, 1.0),
        sin_profile(&spec.beta_angle, 1.0),
    ];

    let epsilon = match &spec.epsilon {
        EpsilonProfile::Zero => None,
        EpsilonProfile::Constant(e) => Some(Profile::constant(*e)),
        EpsilonProfile::MonodromyScaled(e) => {
            let h1 = [alpha_h[0].value(1.0), alpha_h[1].value(1.0)];
            let pulled = spec.monodromy.transpose().act(h1);
            let kappa = pulled[0].hypot(pulled[1]) / h1[0].hypot(h1[1]);
            let ln_k = kappa.ln();
            let e = *e;
            Some(Profile::new(
                move |z| e * (ln_k * z).exp(),
                move |z| e * ln_k * (ln_k * z).exp(),
                move |z| e * ln_k * ln_k * (ln_k * z).exp(),
            ))
        }
        EpsilonProfile::Custom(p) => Some(p.clone()),
    };

    let [ap, aq] = alpha_h;
    let [bp, bq] = beta_h;
    let candidate = BiContactCandidate {
        alpha: OneForm::new(
            ScalarField::along(2, ap),
            ScalarField::along(2, aq),
            epsilon.clone().map_or_else(ScalarField::zero, |e| ScalarField::along(2, e)),
        ),
        beta: OneForm::new(
            ScalarField::along(2, bp),
            ScalarField::along(2, bq),
            ScalarField::zero(),
        ),
        monodromy: spec.monodromy,
        suspension: epsilon.is_none(),
    };

    for (name, form) in [("alpha", &candidate.alpha), ("beta", &candidate.beta)] {
        let defect = candidate.gluing_defect(form);
        if !(defect <= GLUING_TOLERANCE) {
            return Err(Error::GluingMismatch { form: name, defect });
        }
    }
    Ok(candidate)
}

impl BiContactCandidate {
    /// Angular defect between `Φ*(ω at z = 1)` and `ω at z = 0`. The
    /// coefficients depend on `z` only, so one `(x, y)` suffices.
    pub fn gluing_defect(&self, form: &OneForm) -> f64 {
        let top = pull_back(&self.monodromy, form.eval([0.0, 0.0, 1.0]));
        let bottom = form.eval([0.0, 0.0, 0.0]);
        angular_defect(top, bottom)
    }

    /// Signed `z`-component of the coefficient cross product `α × β`.
    fn horizontal_determinant(&self, z: f64) -> f64 {
        let p = [0.0, 0.0, z];
        cross(self.alpha.eval(p), self.beta.eval(p))[2]
    }

    pub fn transversality_margin(&self, p: Point) -> Result<f64> {
        transversality_margin_values(self.alpha.eval(p), self.beta.eval(p))
    }

    /// Fibre heights in `[0, 1)` where `ker α = ker β`, refined by bisection
    /// to `1e-10`. Brackets come from sign changes of the `dx∧dy`
    /// coefficient of `α∧β` on `samples` points; a root is kept only if the
    /// whole cross product vanishes there.
    pub fn coincidence_loci(&self, samples: usize) -> Vec<f64> {
        let n = samples.max(2);
        let zs: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let vals: Vec<f64> = zs.iter().map(|&z| self.horizontal_determinant(z)).collect();

        let mut roots = Vec::new();
        for i in 0..=n {
            if vals[i] == 0.0 {
                roots.push(zs[i]);
            } else if i < n && vals[i] * vals[i + 1] < 0.0 {
                roots.push(bisect(|z| self.horizontal_determinant(z), zs[i], zs[i + 1], 1e-10));
            }
        }

        let mut loci: Vec<f64> = roots
            .into_iter()
            .filter(|&z| {
                let p = [0.0, 0.0, z];
                let c = cross(self.alpha.eval(p), self.beta.eval(p));
                // The dx∧dy part is ~1e-10 after bisection; the dz parts must
                // vanish on their own.
                c[0].hypot(c[1]) <= 1e-9
            })
            .map(|z| if z >= 1.0 - 1e-9 { 0.0 } else { z })
            .collect();
        loci.sort_by(f64::total_cmp);
        loci.dedup_by(|a, b| (*a - *b).abs() < 1e-8);
        loci
    }

    /// Lower bound of the transversality margin over the fibre interval.
    pub fn margin_floor(&self, samples: usize) -> f64 {
        (0..=samples)
            .map(|i| {
                let z = i as f64 / samples as f64;
                self.transversality_margin([0.0, 0.0, z]).unwrap_or(0.0)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Sign-robust minimum of a contact volume: the minimum of
/// `reference_sign · (ω∧dω)` over the grid, so a sign change anywhere shows
/// up as a non-positive margin.
fn contact_record(
    name: &str,
    citation: &str,
    form: &OneForm,
    grid: &GridSpec,
    threshold: f64,
) -> (CheckRecord, i8, f64) {
    let reference = form.contact_volume(grid.point_at(0)).sign();
    let sign = if reference == 0 { 1.0 } else { reference as f64 };
    let summary = grid_scan(|p| sign * form.contact_volume(p).coefficient(), grid);
    let abs_min = grid_scan(|p| form.contact_volume(p).coefficient().abs(), grid).min;
    let record = CheckRecord::new(name, citation, summary.min, threshold)
        .with_witness(summary.argmin.to_vec())
        .with_detail(format!("sign {reference:+}, min |w^dw| = {abs_min:.6e}"));
    (record, reference, abs_min)
}

/// Grid verification of a candidate: both contact conditions with opposite
/// signs, transversality of the kernels on the grid, and the same refined
/// along the fibre interval so that coincidence tori between grid heights
/// are not missed.
pub fn verify_bicontact(c: &BiContactCandidate, grid: &GridSpec, threshold: f64) -> VerificationReport {
    let mut report = VerificationReport::new();
    let citation = "bi-contact <=> projectively Anosov";

    let (ra, sa, ma) = contact_record("alpha-contact", citation, &c.alpha, grid, threshold);
    let (rb, sb, mb) = contact_record("beta-contact", citation, &c.beta, grid, threshold);
    report.push(ra);
    report.push(rb);
    report.push(
        CheckRecord::boolean("opposite-signs", citation, sa as i32 * sb as i32 == -1)
            .with_detail(format!("alpha {sa:+}, beta {sb:+}")),
    );

    let trans = grid_scan(|p| c.transversality_margin(p).unwrap_or(0.0), grid);
    let zero_tori: Vec<f64> = {
        let zs = grid.axes[2];
        let mut v: Vec<f64> = (0..zs.samples)
            .map(|k| zs.value(k))
            // z = 1 is the torus z = 0 again; margins within rounding of an
            // exact zero count as zero.
            .filter(|&z| z < 1.0 && c.transversality_margin([0.0, 0.0, z]).unwrap_or(0.0) <= threshold.max(0.0) + 1e-12)
            .collect();
        v.dedup();
        v
    };
    report.push(
        CheckRecord::new("transversality", "transverse kernels", trans.min, threshold)
            .with_witness(trans.argmin.to_vec()),
    );

    // The forms only depend on z, so transversality is a question about
    // the fibre interval, refined between grid heights.
    let samples = (grid.axes[2].samples * 100).max(4000);
    let loci = c.coincidence_loci(samples);
    let fibre = match loci.first() {
        Some(&z) => CheckRecord::new("fibre-transversality", "transverse kernels", 0.0, threshold)
            .with_witness(vec![0.0, 0.0, z])
            .with_detail(format!("kernels coincide on {} fibre torus/tori", loci.len())),
        None => CheckRecord::new("fibre-transversality", "transverse kernels", c.margin_floor(samples), threshold),
    };
    report.push(fibre);

    report.set_value("alpha_sign", sa);
    report.set_value("beta_sign", sb);
    report.set_value("min_abs_alpha_contact", ma);
    report.set_value("min_abs_beta_contact", mb);
    report.set_value("min_transversality", trans.min);
    report.set_value("failing_fibres", zero_tori);
    report
}

/// Serializable description of the propeller families used by scenarios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PropellerFamily {
    /// `θ(z) = start + total·z` for each form.
    Linear {
        alpha_start: f64,
        alpha_total: f64,
        beta_start: f64,
        beta_total: f64,
    },
    MinimalTwistSuspension,
    NTwist { n: u32 },
}
