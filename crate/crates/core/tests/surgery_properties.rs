use std::f64::consts::PI;

use bicontact_core::cone::{extract_normal_form, positivity_certificate};
use bicontact_core::surgery::{
    build_flowbox, gluing_residual, perform_surgery, slope_calibrated_box, slope_calibrated_surgery, tau1_bound,
    verify_surgery_contact, FlowBoxModel, ProfileChoice, ShearProfile, Side, SurgeryMode,
};
use proptest::prelude::*;

fn normalized(epsilon: f64, tau: f64) -> FlowBoxModel {
    build_flowbox(epsilon, tau, ProfileChoice::Normalized { b_slope: 1.0 }, true).unwrap()
}

fn nonzero_q() -> impl Strategy<Value = i64> {
    (1i64..=8, any::<bool>()).prop_map(|(q, neg)| if neg { -q } else { q })
}

fn epsilon() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![0.25, 0.5, 1.0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // Any τ₁ under the bound keeps α̃ contact on both branches.
    #[test]
    fn tau1_below_bound_keeps_alpha_contact(q in nonzero_q(), eps in epsilon(), frac in 0.01f64..(1.0 - 1e-6)) {
        let tau1 = frac * tau1_bound(q, eps);
        let m = normalized(eps, 2.0 * tau1);
        let r = perform_surgery(&m, &ShearProfile::canonical(q), tau1, 2.0 * tau1, SurgeryMode::TwoSided).unwrap();
        let rep = verify_surgery_contact(&r, &m, &m.grid(201, 201).unwrap()).unwrap();
        for name in ["alpha-plus-contact", "alpha-minus-contact", "tau1-chain", "tau1-chain-dominates"] {
            let c = rep.check(name).unwrap();
            prop_assert!(c.passed, "{name}: {c:?}");
        }
    }

    #[test]
    fn gluing_identities_hold_on_c(q in -8i64..=8, eps in epsilon(), one_sided in any::<bool>(), positive in any::<bool>()) {
        let tau1 = if q == 0 { 0.01 } else { 0.9 * tau1_bound(q, eps) };
        let m = normalized(eps, 2.0 * tau1);
        let mode = if one_sided {
            SurgeryMode::OneSided(if positive { Side::Positive } else { Side::Negative })
        } else {
            SurgeryMode::TwoSided
        };
        let r = perform_surgery(&m, &ShearProfile::canonical(q), tau1, 2.0 * tau1, mode).unwrap();
        let (ra, rb) = gluing_residual(&r, 2.0 * PI, 51);
        prop_assert!(ra < 1e-12 && rb < 1e-12, "{ra} {rb}");
    }

    #[test]
    fn zero_surgery_is_exact_identity(eps in epsilon(), tau1 in 0.001f64..0.05) {
        let m = normalized(eps, 2.0 * tau1);
        let r = perform_surgery(&m, &ShearProfile::canonical(0), tau1, 2.0 * tau1, SurgeryMode::TwoSided).unwrap();
        let grid = m.grid(31, 31).unwrap();
        for k in 0..grid.len() {
            let p = grid.point_at(k);
            prop_assert_eq!(r.alpha_tilde_plus.eval(p), m.alpha().eval(p));
            prop_assert_eq!(r.alpha_tilde_minus.eval(p), m.alpha().eval(p));
            prop_assert_eq!(r.beta_tilde_plus.eval(p), m.beta().eval(p));
            prop_assert_eq!(r.beta_tilde_minus.eval(p), m.beta().eval(p));
        }
    }

    // Surgeries that pass every local check have a normal form that the
    // cone certificate accepts.
    #[test]
    fn passing_surgeries_are_cone_certified(q in 1i64..=8, eps in epsilon(), frac in 0.1f64..0.95) {
        let tau1 = frac * tau1_bound(q, eps);
        let m = normalized(eps, 2.0 * tau1);
        let r = perform_surgery(&m, &ShearProfile::canonical(q), tau1, 2.0 * tau1, SurgeryMode::TwoSided).unwrap();
        let rep = verify_surgery_contact(&r, &m, &m.grid(61, 61).unwrap()).unwrap();
        prop_assume!(rep.passed());
        let nf = extract_normal_form(&r, &m, 61, 61).unwrap();
        prop_assert!(nf.end_product < 1.0);
        prop_assert!(positivity_certificate(&nf.model).holds);
    }
}

#[test]
fn alpha_margin_is_nonincreasing_in_q() {
    for eps in [0.25, 0.5, 1.0] {
        let tau1 = 0.9 * tau1_bound(8, eps);
        let m = normalized(eps, 2.0 * tau1);
        let grid = m.grid(101, 101).unwrap();
        let margin = |q: i64| {
            let r = perform_surgery(&m, &ShearProfile::canonical(q), tau1, 2.0 * tau1, SurgeryMode::TwoSided).unwrap();
            let rep = verify_surgery_contact(&r, &m, &grid).unwrap();
            rep.check("alpha-plus-contact").unwrap().margin.min(rep.check("alpha-minus-contact").unwrap().margin)
        };
        for sign in [1, -1] {
            let ms: Vec<f64> = (1..=8).map(|q| margin(sign * q)).collect();
            for w in ms.windows(2) {
                assert!(w[1] <= w[0] + 1e-15, "eps {eps}, sign {sign}: {ms:?}");
            }
        }
    }
}

#[test]
fn beta_sign_structure_in_slope_setup() {
    let slope = 4.5;
    for eps in [0.25, 0.5] {
        let m = slope_calibrated_box(slope, eps).unwrap();
        let grid = m.grid(101, 201).unwrap();
        let threshold = (2.0 * eps * slope).ceil() as i64;
        for q in 1..=8 {
            let rep = verify_surgery_contact(&slope_calibrated_surgery(&m, q).unwrap(), &m, &grid).unwrap();
            assert!(rep.check("beta-plus-contact").unwrap().passed, "q = {q}");
            assert!(rep.check("beta-minus-contact").unwrap().passed, "q = {q}");
        }
        for q in (threshold + 1)..=(threshold + 6) {
            let rep = verify_surgery_contact(&slope_calibrated_surgery(&m, -q).unwrap(), &m, &grid).unwrap();
            let c = rep.check("beta-plus-contact").unwrap();
            assert!(!c.passed, "q = -{q}");
            let w = c.witness.as_ref().unwrap();
            assert!(w[1] < 0.0, "violation sits on the perturbed side: {w:?}");
        }
    }
}

#[test]
fn linear_model_rejected_when_not_bicontact() {
    let r = build_flowbox(0.5, 1.0, ProfileChoice::Linear { a_tau: 1.1, b_tau: 1.1 }, true);
    assert!(r.is_err());
    let m = build_flowbox(0.5, 1.0, ProfileChoice::Linear { a_tau: 1.1, b_tau: 1.1 }, false).unwrap();
    assert!(!positivity_certificate(&m).holds);
}
