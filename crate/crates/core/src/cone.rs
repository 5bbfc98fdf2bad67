//! Lorentz cone fields on a flow box.
//!
//! On the flow box the pair defines two quadratic forms of signature (2, 1)
//!
//! ```text
//! Q± = ±α β − c dt²
//! ```
//!
//! whose positive cones are disjoint. The flow is `∂t`, its differential
//! keeps the components `(W, S, T)` of a vector fixed, so pushing `v` from
//! `C` to height `t` gives `±(W + a(t)S)(S + b(t)W) − cT²`, with derivative
//!
//! ```text
//! ±(b′W² + a′S² + (ab′ + ba′) SW).
//! ```
//!
//! The cones are strictly invariant exactly when this quadratic form in
//! `(W, S)` is definite, i.e. when `(ab′ + ba′)² < 4a′b′`. For linear
//! profiles that is `a(τ)b(τ) < 1`, the transversality condition at the
//! ends of the box.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart::{grid_scan, OneForm, Point};
use crate::error::Result;
use crate::report::{CheckRecord, VerificationReport};
use crate::surgery::{build_flowbox, FlowBoxModel, ProfileChoice, SurgeryResult};

pub const DEFAULT_C: f64 = 1e-2;

/// Number of `t` samples of the certificate.
pub const CERTIFICATE_SAMPLES: usize = 1001;

/// `W ∂w + S ∂s + T ∂t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentVector {
    pub w: f64,
    pub s: f64,
    pub t: f64,
}

impl TangentVector {
    pub fn new(w: f64, s: f64, t: f64) -> Self {
        Self { w, s, t }
    }

    pub fn as_array(self) -> [f64; 3] {
        [self.w, self.s, self.t]
    }
}

/// `Q = sign·α β − c dt²`.
#[derive(Clone, Debug)]
pub struct LorentzMetric {
    pub sign: f64,
    pub c: f64,
    pub alpha: OneForm,
    pub beta: OneForm,
}

impl LorentzMetric {
    pub fn on_flowbox(m: &FlowBoxModel, positive: bool, c: f64) -> Self {
        Self {
            sign: if positive { 1.0 } else { -1.0 },
            c,
            alpha: m.alpha(),
            beta: m.beta(),
        }
    }

    /// `Q_p(v)`.
    pub fn eval(&self, p: Point, v: TangentVector) -> f64 {
        let v3 = v.as_array();
        self.sign * self.alpha.apply(p, v3) * self.beta.apply(p, v3) - self.c * v.t * v.t
    }
}

/// `Q` on `C`, where `a = b = 0`: `±WS − cT²`.
pub fn eval_metric(q: &LorentzMetric, v: TangentVector) -> f64 {
    q.eval([0.0, 0.0, 0.0], v)
}

/// `Q(Dφᵗ v)` for `v` based on `C`.
pub fn pushforward_value(q: &LorentzMetric, v: TangentVector, m: &FlowBoxModel, t: f64) -> f64 {
    let (a, b) = (m.a.value(t), m.b.value(t));
    q.sign * (v.w + a * v.s) * (v.s + b * v.w) - q.c * v.t * v.t
}

/// `d/dt Q(Dφᵗ v)`.
pub fn growth_derivative(q: &LorentzMetric, v: TangentVector, m: &FlowBoxModel, t: f64) -> f64 {
    let (a, b) = (m.a.value(t), m.b.value(t));
    let (a1, b1) = (m.a.derivative(t), m.b.derivative(t));
    q.sign * (b1 * v.w * v.w + a1 * v.s * v.s + (a * b1 + b * a1) * v.s * v.w)
}

/// Outcome of [`positivity_certificate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub holds: bool,
    /// Minimum over `t` of `2√(a′b′) − |ab′ + ba′|`.
    pub min_margin: f64,
    /// Height of the minimum.
    pub witness_t: f64,
    /// Unit `(W, S)` minimizing the growth derivative at `witness_t`.
    pub witness_direction: [f64; 2],
    /// Growth derivative of `Q⁺` along the witness direction.
    pub min_derivative: f64,
    /// Smallest derivative found by scanning directions, as a cross-check.
    pub scanned_min_derivative: f64,
}

impl Certificate {
    pub fn to_report(&self) -> VerificationReport {
        let mut r = VerificationReport::new();
        r.push(
            CheckRecord::new(
                "cone-positivity",
                "2 sqrt(a'b') > |ab' + ba'|",
                self.min_margin,
                0.0,
            )
            .with_witness(vec![self.witness_t, self.witness_direction[0], self.witness_direction[1]]),
        );
        r.push(CheckRecord::new(
            "cone-growth-directions",
            "d/dt Q(D phi v) > 0",
            self.scanned_min_derivative,
            0.0,
        ));
        r.set_value("certificate_holds", self.holds);
        r.set_value("certificate_min_margin", self.min_margin);
        r
    }
}

fn discriminant_margin(a: f64, b: f64, a1: f64, b1: f64) -> f64 {
    let h = (a * b1 + b * a1).abs();
    if a1 <= 0.0 || b1 <= 0.0 {
        // Not definite at all; report how far from it.
        return a1.min(b1).min(0.0) - h;
    }
    2.0 * (a1 * b1).sqrt() - h
}

/// Smallest eigenpair of the symmetric matrix `[[p, h], [h, r]]`.
fn smallest_eigen(p: f64, h: f64, r: f64) -> (f64, [f64; 2]) {
    let mean = 0.5 * (p + r);
    let rad = (0.25 * (p - r) * (p - r) + h * h).sqrt();
    let lam = mean - rad;
    // (p − λ) x + h y = 0
    let v = if h.abs() > 1e-300 {
        [h, lam - p]
    } else if p <= r {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    };
    let n = v[0].hypot(v[1]);
    let mut v = [v[0] / n, v[1] / n];
    if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) {
        v = [-v[0], -v[1]];
    }
    (lam, v)
}

fn unit_directions(n: usize) -> impl Iterator<Item = [f64; 2]> {
    (0..n).map(move |k| {
        let th = PI * k as f64 / n as f64;
        [th.cos(), th.sin()]
    })
}

/// Certify that the growth derivative of `Q⁺` is a positive-definite
/// quadratic form in `(W, S)` at every sampled height of the box.
pub fn positivity_certificate(m: &FlowBoxModel) -> Certificate {
    let q = LorentzMetric::on_flowbox(m, true, DEFAULT_C);
    let n = CERTIFICATE_SAMPLES;
    let ts: Vec<f64> = (0..n).map(|i| -m.tau + 2.0 * m.tau * i as f64 / (n - 1) as f64).collect();
    let margins: Vec<f64> = ts
        .par_iter()
        .map(|&t| discriminant_margin(m.a.value(t), m.b.value(t), m.a.derivative(t), m.b.derivative(t)))
        .collect();

    // Ties go to the larger t.
    let (imin, &min_margin) = margins
        .iter()
        .enumerate()
        .reduce(|best, cur| if cur.1 <= best.1 { cur } else { best })
        .expect("samples");
    let t = ts[imin];
    let (a, b, a1, b1) = (m.a.value(t), m.b.value(t), m.a.derivative(t), m.b.derivative(t));
    let (lam, dir) = smallest_eigen(b1, 0.5 * (a * b1 + b * a1), a1);
    let holds = min_margin > 0.0;

    // Directions scanned: 64 per sample when certifying, 256 at the witness
    // otherwise.
    let scanned_min_derivative = if holds {
        ts.par_iter()
            .map(|&t| {
                unit_directions(64)
                    .map(|[w, s]| growth_derivative(&q, TangentVector::new(w, s, 0.0), m, t))
                    .fold(f64::INFINITY, f64::min)
            })
            .reduce(|| f64::INFINITY, f64::min)
    } else {
        unit_directions(256)
            .map(|[w, s]| growth_derivative(&q, TangentVector::new(w, s, 0.0), m, t))
            .fold(f64::INFINITY, f64::min)
    };

    Certificate {
        holds,
        min_margin,
        witness_t: t,
        witness_direction: dir,
        min_derivative: lam,
        scanned_min_derivative,
    }
}

/// Disjointness, the value on the flow direction and strict invariance of
/// both cone fields under the flow of the box.
pub fn cone_invariance_check(m: &FlowBoxModel, c: f64, base_points: usize, directions: usize) -> VerificationReport {
    let mut report = VerificationReport::new();
    let qp = LorentzMetric::on_flowbox(m, true, c);
    let qm = LorentzMetric::on_flowbox(m, false, c);

    // Sampled nonzero vectors on C: a latitude/longitude net of the sphere.
    let mut sample = Vec::new();
    for i in 0..=16 {
        let phi = PI * i as f64 / 16.0;
        for j in 0..32 {
            let th = 2.0 * PI * j as f64 / 32.0;
            sample.push(TangentVector::new(phi.sin() * th.cos(), phi.sin() * th.sin(), phi.cos()));
        }
    }
    let mut sum_residual = 0.0f64;
    let mut both_positive = 0usize;
    let mut worst_overlap = f64::NEG_INFINITY;
    for &v in &sample {
        let (p, n) = (eval_metric(&qp, v), eval_metric(&qm, v));
        sum_residual = sum_residual.max((p + n + 2.0 * c * v.t * v.t).abs());
        worst_overlap = worst_overlap.max(p.min(n));
        if p > 0.0 && n > 0.0 {
            both_positive += 1;
        }
    }
    report.push(CheckRecord::below("cone-sum-identity", "Q+ + Q- = -2c T^2", sum_residual, 1e-14));
    report.push(
        CheckRecord::boolean("cone-disjointness", "C+ and C- are disjoint", both_positive == 0)
            .with_detail(format!("{} vectors, max min(Q+, Q-) = {worst_overlap:.3e}", sample.len())),
    );
    let flow = TangentVector::new(0.0, 0.0, 1.0);
    let residual = (eval_metric(&qp, flow) + c).abs().max((eval_metric(&qm, flow) + c).abs());
    report.push(CheckRecord::below("cone-flow-direction", "Q(X) = -c", residual, 1e-15));

    // Invariance: boundary vectors at a base height t0, pushed forward for
    // Q⁺ and backward for Q⁻. On the boundary (W + a0 S)(S + b0 W) = ±cT²,
    // so the pushed value is ±[(W + a S)(S + b W) − (W + a0 S)(S + b0 W)],
    // independent of c. Values are reported per unit |(W, S)|².
    let n0 = base_points.max(2);
    let steps = 16;
    let results: Vec<(f64, [f64; 4])> = (0..n0)
        .into_par_iter()
        .map(|k| {
            let t0 = -m.tau + 2.0 * m.tau * k as f64 / n0 as f64;
            let (a0, b0) = (m.a.value(t0), m.b.value(t0));
            let det = 1.0 - a0 * b0;
            let mut worst = (f64::INFINITY, [0.0; 4]);
            if det.abs() < 1e-9 {
                return worst;
            }
            for j in 0..directions {
                let th = 2.0 * PI * (j as f64 + 0.5) / directions as f64;
                let (u, v) = (th.cos(), th.sin());
                // (u, v) = (W + a0 S, S + b0 W)
                let w = (u - a0 * v) / det;
                let s = (v - b0 * u) / det;
                let (metric, forward) = if u * v > 0.0 { (&qp, true) } else { (&qm, false) };
                for i in 1..=steps {
                    let t = if forward {
                        t0 + (m.tau - t0) * i as f64 / steps as f64
                    } else {
                        t0 - (t0 + m.tau) * i as f64 / steps as f64
                    };
                    if (forward && t <= t0) || (!forward && t >= t0) {
                        continue;
                    }
                    let (a, b) = (m.a.value(t), m.b.value(t));
                    let value = metric.sign * ((w + a * s) * (s + b * w) - u * v) / (w * w + s * s);
                    if value < worst.0 {
                        worst = (value, [t0, w, s, t]);
                    }
                }
            }
            worst
        })
        .collect();
    let (min_value, witness) = results
        .iter()
        .copied()
        .fold((f64::INFINITY, [0.0; 4]), |acc, x| if x.0 < acc.0 { x } else { acc });
    let mut rec = CheckRecord::new("cone-invariance", "D phi^{±t}(C±) ⊂ C±", min_value, 0.0);
    if !(min_value > 0.0) {
        rec = rec
            .with_witness(witness.to_vec())
            .with_detail("boundary vector (t0, W, S) leaves the cone at height t");
    }
    report.push(rec);
    report.set_value("cone_invariance_min", min_value);
    report.set_value("c", c);
    report
}

/// One cell of the `(a(τ), b(τ))` sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub a_tau: f64,
    pub b_tau: f64,
    pub certificate: bool,
    pub min_margin: f64,
    /// `|a(τ)b(τ) − 1|` is too small for the verdict to be meaningful.
    pub excluded: bool,
}

impl SweepCell {
    /// Whether the certificate agrees with `a(τ)b(τ) < 1`.
    pub fn agrees(&self) -> bool {
        self.excluded || self.certificate == (self.a_tau * self.b_tau < 1.0)
    }

    pub fn to_record(&self) -> CheckRecord {
        let name = format!("cone-sweep a={:.3} b={:.3}", self.a_tau, self.b_tau);
        let threshold = if self.excluded { f64::MIN } else { 0.0 };
        let margin = if self.excluded { 0.0 } else if self.agrees() { 1.0 } else { -1.0 };
        CheckRecord::new(name, "certificate <=> a(tau) b(tau) < 1", margin, threshold)
            .with_witness(vec![self.a_tau, self.b_tau, self.min_margin])
    }
}

/// Certificates of the linear models on an `n × n` grid of cell centres
/// `(i + ½)·(1.5/n)`, `τ = 1`.
pub fn sweep(n: usize, boundary_margin: f64) -> Result<Vec<SweepCell>> {
    let h = 1.5 / n as f64;
    (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (a_tau, b_tau) = ((k / n) as f64 * h + 0.5 * h, (k % n) as f64 * h + 0.5 * h);
            let m = build_flowbox(1.0, 1.0, ProfileChoice::Linear { a_tau, b_tau }, false)?;
            let cert = positivity_certificate(&m);
            Ok(SweepCell {
                a_tau,
                b_tau,
                certificate: cert.holds,
                min_margin: cert.min_margin,
                excluded: (a_tau * b_tau - 1.0).abs() < boundary_margin,
            })
        })
        .collect()
}

/// Normal form of the surgered box read back from the forms: at fixed `w`,
/// `α̃ = P dw + a ds` and `β̃ = B dw + ds`, so after dividing α̃ by `P` the
/// pair is again `dw + ã ds`, `ds + b̃ dw` with `ãb̃ = aB/P`.
#[derive(Clone, Debug)]
pub struct ExtractedNormalForm {
    /// Largest sampled `ã b̃` over both branches.
    pub end_product: f64,
    /// `(w, t)` where it occurs.
    pub at: [f64; 2],
    /// Linear model with `a(τ) = b(τ) = √end_product`.
    pub model: FlowBoxModel,
}

pub fn extract_normal_form(r: &SurgeryResult, m: &FlowBoxModel, w_samples: usize, t_samples: usize) -> Result<ExtractedNormalForm> {
    let grid = m.grid(w_samples, t_samples)?;
    let product = |p: Point, alpha: &OneForm, beta: &OneForm| {
        let (a, b) = (alpha.eval(p), beta.eval(p));
        a[1] * b[0] / a[0]
    };
    let plus = r.plus_side;
    let scan = grid_scan(
        |p| {
            let on_plus = match plus {
                crate::surgery::Side::Negative => p[2] <= 0.0,
                crate::surgery::Side::Positive => p[2] >= 0.0,
            };
            if on_plus {
                product(p, &r.alpha_tilde_plus, &r.beta_tilde_plus)
            } else {
                product(p, &r.alpha_tilde_minus, &r.beta_tilde_minus)
            }
        },
        &grid,
    );
    let end_product = scan.max.max(1e-12);
    let side = end_product.sqrt();
    let model = build_flowbox(m.epsilon, m.tau, ProfileChoice::Linear { a_tau: side, b_tau: side }, false)?;
    Ok(ExtractedNormalForm { end_product, at: [scan.argmax[0], scan.argmax[2]], model })
}
