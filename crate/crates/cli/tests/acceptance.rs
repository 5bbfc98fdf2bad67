//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so the lines always
//! reach stdout.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use bicontact_core::chart::{GridSpec, OneForm, Point, Profile};
use bicontact_core::cone::{
    cone_invariance_check, eval_metric, growth_derivative, positivity_certificate, pushforward_value, sweep,
    LorentzMetric, TangentVector, DEFAULT_C,
};
use bicontact_core::flow::{splitting_ratio, FlowConfig};
use bicontact_core::monodromy::Monodromy;
use bicontact_core::propeller::{build_propeller, verify_bicontact, EpsilonProfile, PropellerSpec};
use bicontact_core::surgery::{
    build_flowbox, gluing_residual, perform_surgery, tau1_bound, verify_surgery_contact, BumpProfile, BumpSupport,
    FlowBoxModel, ProfileChoice, ShearProfile, Side, SurgeryMode,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

fn criterion(n: u32, title: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let in_time = limit.map_or(true, |l| elapsed < l);
    let ok = out.ok && in_time;
    let limit_note = limit.map(|l| format!(" (limit {:.0?})", l)).unwrap_or_default();
    println!(
        "{} criterion {n}: {title} [{:.2?}{limit_note}] {}",
        if ok { "PASS" } else { "FAIL" },
        elapsed,
        out.detail
    );
    ok
}

fn normalized(eps: f64, tau: f64) -> FlowBoxModel {
    build_flowbox(eps, tau, ProfileChoice::Normalized { b_slope: 1.0 }, true).unwrap()
}

fn c1() -> Outcome {
    let src = bicontact_lab::examples::find("coeffs-worked-example").unwrap();
    let r = bicontact_lab::run_source(src).unwrap();
    let min_q = r.values["min_q"].as_i64();
    let text = r.values["admissible"].as_str().unwrap_or("").to_string();
    outcome(min_q == Some(-4) && text == "{q in Z : q >= -4}", format!("min q = {min_q:?}, sequence {text}"))
}

fn c2() -> Outcome {
    let bare = build_propeller(&PropellerSpec::torus_example(EpsilonProfile::Zero)).unwrap();
    let loci = bare.coincidence_loci(4000);
    let want = [0.0, 0.25, 0.5, 0.75];
    let located = loci.len() == 4 && loci.iter().zip(want).all(|(z, w)| (z - w).abs() <= 1e-6);

    let grid = GridSpec::unit_cube(41).unwrap();
    let varying = Profile::new(
        |z: f64| 0.1 + 0.05 * (2.0 * PI * z).sin(),
        |z: f64| 0.1 * PI * (2.0 * PI * z).cos(),
        |z: f64| -0.2 * PI * PI * (2.0 * PI * z).sin(),
    );
    let mut worst = f64::INFINITY;
    let mut all = true;
    for eps in [EpsilonProfile::Constant(0.1), EpsilonProfile::Constant(-0.05), EpsilonProfile::Custom(varying)] {
        let c = build_propeller(&PropellerSpec::torus_example(eps)).unwrap();
        let rep = verify_bicontact(&c, &grid, 1e-3);
        all &= rep.passed();
        for ch in &rep.checks {
            if ch.name != "opposite-signs" {
                worst = worst.min(ch.margin);
            }
        }
    }
    outcome(located && all, format!("loci {loci:?}; perturbed candidates pass at 1e-3, smallest margin {worst:.4e}"))
}

fn c3() -> Outcome {
    let mut worst_alpha = f64::INFINITY;
    let mut worst_chain_margin = f64::INFINITY;
    let mut failures = Vec::new();
    for q in (1..=8).flat_map(|q: i64| [q, -q]) {
        for eps in [0.25, 0.5, 1.0] {
            let tau1 = 0.9 * tau1_bound(q, eps);
            let m = normalized(eps, 2.0 * tau1);
            let r = perform_surgery(&m, &ShearProfile::canonical(q), tau1, 2.0 * tau1, SurgeryMode::TwoSided).unwrap();
            let rep = verify_surgery_contact(&r, &m, &m.grid(201, 201).unwrap()).unwrap();
            for name in ["alpha-plus-contact", "alpha-minus-contact"] {
                let c = rep.check(name).unwrap();
                worst_alpha = worst_alpha.min(c.margin);
                if !(c.passed && c.margin > 0.0) {
                    failures.push(format!("{name} q={q} eps={eps}"));
                }
            }
            let chain = rep.values["tau1_chain"].as_f64().unwrap();
            worst_chain_margin = worst_chain_margin.min(1.0 - chain);
        }
    }
    let ok = failures.is_empty() && worst_chain_margin >= 0.1 - 1e-12;
    outcome(
        ok,
        format!("48 cases, smallest alpha~ margin {worst_alpha:.4e}, smallest 1 - chain {worst_chain_margin:.6}, failures {failures:?}"),
    )
}

fn c4() -> Outcome {
    let cells = sweep(50, 1e-3).unwrap();
    let judged = cells.iter().filter(|c| !c.excluded).count();
    let bad = cells.iter().filter(|c| !c.agrees()).count();
    outcome(cells.len() == 2500 && bad == 0, format!("{judged} of {} cells judged, {bad} disagreements", cells.len()))
}

/// Five-point central difference.
fn fd4(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

fn c5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    // Growth derivative against central differences of the pushforward.
    let mut worst_growth = 0.0f64;
    for i in 0..1000 {
        let (ka, kb) = (rng.gen_range(0.05..1.5), rng.gen_range(0.05..1.5));
        let m = if i % 2 == 0 {
            build_flowbox(1.0, 1.0, ProfileChoice::Linear { a_tau: ka, b_tau: kb }, false).unwrap()
        } else {
            let prof = |k: f64| {
                Profile::new(
                    move |t: f64| k * t.tanh(),
                    move |t: f64| k / t.cosh().powi(2),
                    move |t: f64| -2.0 * k * t.tanh() / t.cosh().powi(2),
                )
            };
            FlowBoxModel {
                epsilon: 1.0,
                tau: 1.0,
                a: prof(ka),
                b: prof(kb),
                choice: ProfileChoice::Linear { a_tau: ka * 1f64.tanh(), b_tau: kb * 1f64.tanh() },
            }
        };
        let q = LorentzMetric::on_flowbox(&m, rng.gen_bool(0.5), DEFAULT_C);
        let t = rng.gen_range(-0.99..0.99);
        let v = TangentVector::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let exact = growth_derivative(&q, v, &m, t);
        let h = 1e-5;
        let fd = (pushforward_value(&q, v, &m, t + h) - pushforward_value(&q, v, &m, t - h)) / (2.0 * h);
        let scale = exact.abs().max(1e-3 * (v.w * v.w + v.s * v.s));
        worst_growth = worst_growth.max((exact - fd).abs() / scale);
    }

    // Analytic partials of the shipped coefficient fields.
    let h = 1e-4;
    let mut worst_partial = 0.0f64;
    let mut check_form = |form: &OneForm, p: Point| {
        for coeff in form.coefficients() {
            let g = coeff.gradient(p);
            for axis in 0..3 {
                let approx = fd4(
                    |x| {
                        let mut q = p;
                        q[axis] = x;
                        coeff.eval(q)
                    },
                    p[axis],
                    h,
                );
                let err = (g[axis] - approx).abs() / (1e-4 * g[axis].abs()).max(1e-6);
                worst_partial = worst_partial.max(err);
            }
        }
    };
    let a = Monodromy::new(2, 1, 1, 1).unwrap();
    let props = [
        PropellerSpec::torus_example(EpsilonProfile::Constant(0.1)),
        PropellerSpec::minimal_twist_suspension(a).unwrap(),
        PropellerSpec::n_twist(a, 1, EpsilonProfile::MonodromyScaled(0.1)).unwrap(),
    ];
    for spec in props {
        let c = build_propeller(&spec).unwrap();
        for _ in 0..100 {
            let p = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.001..0.999)];
            check_form(&c.alpha, p);
            check_form(&c.beta, p);
        }
    }
    let (q, eps) = (3, 0.5);
    let tau1 = 0.9 * tau1_bound(q, eps);
    let m = normalized(eps, 2.0 * tau1);
    let r = perform_surgery(&m, &ShearProfile::canonical(q), tau1, 2.0 * tau1, SurgeryMode::TwoSided).unwrap();
    // Keep stencils off the finitely smooth junctions of the bumps and ramps.
    let t_breaks = [0.0, tau1, -tau1, 2.0 * tau1, -2.0 * tau1];
    let w_breaks = [-eps, -0.75 * eps, 0.75 * eps, eps];
    let mut n = 0;
    while n < 200 {
        let p = [rng.gen_range(-eps..eps), rng.gen_range(0.0..2.0 * PI), rng.gen_range(-2.0 * tau1..2.0 * tau1)];
        if t_breaks.iter().any(|b| (p[2] - b).abs() < 3.0 * h) || w_breaks.iter().any(|b| (p[0] - b).abs() < 3.0 * h) {
            continue;
        }
        n += 1;
        for form in [&r.alpha_tilde_plus, &r.alpha_tilde_minus, &r.beta_tilde_plus, &r.beta_tilde_minus] {
            check_form(form, p);
        }
    }
    let shear = ShearProfile::canonical(1);
    let bump = BumpProfile::cos_squared(1.0, BumpSupport::Both).unwrap();
    for _ in 0..200 {
        let u = rng.gen_range(-1.3..1.3);
        if [-1.0, -0.75, 0.75, 1.0].iter().all(|b: &f64| (u - b).abs() > 3.0 * h) {
            let err = (shear.g_prime(u) - fd4(|x| shear.g(x), u, h)).abs() / (1e-4 * shear.g_prime(u).abs()).max(1e-6);
            worst_partial = worst_partial.max(err);
            let err = (bump.lambda.derivative(u) - fd4(|x| bump.lambda.value(x), u, h)).abs()
                / (1e-4 * bump.lambda.derivative(u).abs()).max(1e-6);
            worst_partial = worst_partial.max(err);
        }
    }
    outcome(
        worst_growth <= 1e-6 && worst_partial <= 1.0,
        format!(
            "growth derivative worst relative error {worst_growth:.2e} (tol 1e-6); partials worst error {:.2e} of tolerance (rel 1e-4)",
            worst_partial
        ),
    )
}

fn c6() -> Outcome {
    let run = |m: Monodromy, returns: usize| {
        let c = build_propeller(&PropellerSpec::minimal_twist_suspension(m).unwrap()).unwrap();
        splitting_ratio(&c, [0.1, 0.2, 0.0], returns, FlowConfig::new(0.01), 1000.0).unwrap()
    };
    let a = Monodromy::new(2, 1, 1, 1).unwrap();
    let b = Monodromy::new(5, 9, 1, 2).unwrap();
    let ta = 2.0 * ((3.0 + 5f64.sqrt()) / 2.0).ln();
    let tb = 2.0 * ((7.0 + 3.0 * 5f64.sqrt()) / 2.0).ln();
    let mut ok = true;
    let mut notes = Vec::new();
    for (label, m, n, target, tol) in [("A", a, 10, ta, 0.02), ("A", a, 20, ta, 0.01), ("B", b, 10, tb, 0.02)] {
        let est = run(m, n);
        let rel = (est.estimate() - target).abs() / target;
        let naive = *est.naive.last().unwrap();
        let naive_rel = (naive - target).abs() / target;
        ok &= rel <= tol;
        notes.push(format!(
            "{label}@{n}: {:.6} vs {target:.6} ({:.3}%, tol {}%); naive L_n/n {naive:.6} ({:.3}%)",
            est.estimate(),
            100.0 * rel,
            100.0 * tol,
            100.0 * naive_rel
        ));
    }
    outcome(ok, notes.join("; "))
}

fn c7() -> Outcome {
    let eps = 0.5;
    // q = 0 is coefficient-identical.
    let m = normalized(eps, 0.02);
    let r = perform_surgery(&m, &ShearProfile::canonical(0), 0.01, 0.02, SurgeryMode::TwoSided).unwrap();
    let grid = m.grid(41, 41).unwrap();
    let mut identical = true;
    for k in 0..grid.len() {
        let p = grid.point_at(k);
        identical &= r.alpha_tilde_plus.eval(p) == m.alpha().eval(p)
            && r.alpha_tilde_minus.eval(p) == m.alpha().eval(p)
            && r.beta_tilde_plus.eval(p) == m.beta().eval(p)
            && r.beta_tilde_minus.eval(p) == m.beta().eval(p);
    }
    // Gluing identities on C.
    let q = 2;
    let tau1 = 0.9 * tau1_bound(q, eps);
    let m = normalized(eps, 2.0 * tau1);
    let mut worst = 0.0f64;
    for mode in [SurgeryMode::TwoSided, SurgeryMode::OneSided(Side::Negative), SurgeryMode::OneSided(Side::Positive)] {
        let r = perform_surgery(&m, &ShearProfile::canonical(q), tau1, 2.0 * tau1, mode).unwrap();
        let (ra, rb) = gluing_residual(&r, 2.0 * PI, 101);
        worst = worst.max(ra).max(rb);
    }
    outcome(identical && worst < 1e-10, format!("q = 0 identical: {identical}; worst gluing residual {worst:.2e} (tol 1e-10)"))
}

fn c8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let m = build_flowbox(1.0, 1.0, ProfileChoice::Linear { a_tau: 0.5, b_tau: 0.5 }, false).unwrap();
    let mut worst_sum = 0.0f64;
    let mut disjoint = true;
    for _ in 0..10_000 {
        let c = rng.gen_range(1e-3..0.1);
        let v = TangentVector::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let (qp, qm) = (LorentzMetric::on_flowbox(&m, true, c), LorentzMetric::on_flowbox(&m, false, c));
        let (vp, vm) = (eval_metric(&qp, v), eval_metric(&qm, v));
        worst_sum = worst_sum.max((vp + vm + 2.0 * c * v.t * v.t).abs());
        disjoint &= !(vp > 0.0 && vm > 0.0);
    }
    let mut invariant = true;
    let mut models = 0;
    for (a, b) in [(0.5, 0.5), (0.99, 0.99), (0.2, 1.4), (1.2, 0.3), (0.9, 1.05)] {
        let m = build_flowbox(1.0, 1.0, ProfileChoice::Linear { a_tau: a, b_tau: b }, false).unwrap();
        if !positivity_certificate(&m).holds {
            continue;
        }
        models += 1;
        for c in [1e-3, 1e-2, 5e-2] {
            let rep = cone_invariance_check(&m, c, 32, 256);
            invariant &= rep.passed();
        }
    }
    let bad = build_flowbox(1.0, 1.0, ProfileChoice::Linear { a_tau: 1.1, b_tau: 1.1 }, false).unwrap();
    let rep = cone_invariance_check(&bad, DEFAULT_C, 32, 256);
    let inv = rep.check("cone-invariance").unwrap();
    let witnessed = !inv.passed && inv.witness.is_some();
    outcome(
        worst_sum <= 1e-14 && disjoint && invariant && witnessed,
        format!(
            "|Q+ + Q- + 2cT^2| <= {worst_sum:.1e}; disjoint {disjoint}; invariance on {models} certified models x 3 c: {invariant}; witness at a(tau)b(tau) = 1.21: {:?}",
            inv.witness
        ),
    )
}

fn main() {
    let s = Duration::from_secs;
    let results = [
        criterion(1, "admissible coefficients of the worked example", Some(s(1)), c1),
        criterion(2, "coincidence tori and perturbed torus example", Some(s(10)), c2),
        criterion(3, "alpha~ contact below the tau1 bound", Some(s(60)), c3),
        criterion(4, "certificate equals a(tau)b(tau) < 1 on the sweep", Some(s(30)), c4),
        criterion(5, "derivative oracles", None, c5),
        criterion(6, "splitting of suspensions", Some(s(30)), c6),
        criterion(7, "surgery algebra", None, c7),
        criterion(8, "Lorentz cone structure", None, c8),
    ];
    let passed = results.iter().filter(|&&r| r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
