//! One function per scenario kind, each producing a [`VerificationReport`].

use bicontact_core::chart::GridSpec;
use bicontact_core::cone::{cone_invariance_check, extract_normal_form, positivity_certificate, sweep};
use bicontact_core::flow::{integrate_returns, orbit_margin_profile, splitting_ratio, FlowConfig};
use bicontact_core::monodromy::HomologyClass;
use bicontact_core::propeller::{build_propeller, verify_bicontact, BiContactCandidate, EpsilonProfile, PropellerSpec};
use bicontact_core::report::{CheckRecord, VerificationReport};
use bicontact_core::surgery::{
    admissible_negative_coefficients, build_flowbox, gluing_residual, perform_surgery, tau1_bound,
    verify_surgery_contact, ProfileChoice, ShearProfile,
};
use bicontact_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scenario::{
    monodromy, ConeSection, EpsilonSection, FamilySection, FlowSection, Kind, PropellerSection, Scenario,
};
use crate::RunError;

/// Core errors raised while setting a model up are precondition failures.
fn pre(e: Error) -> RunError {
    RunError::Precondition(e.to_string())
}

pub fn run_pipeline(s: &Scenario) -> Result<VerificationReport, RunError> {
    // `validate` guarantees the section for the kind is present.
    match s.kind {
        Kind::PropellerVerify => propeller_verify(s, s.propeller.as_ref().unwrap()),
        Kind::Surgery => surgery(s),
        Kind::ConeCheck => cone_check(s.cone.as_ref().unwrap()),
        Kind::Coeffs => coeffs(s),
        Kind::FlowSim => flow_sim(s),
    }
}

pub fn build_candidate(p: &PropellerSection) -> Result<BiContactCandidate, RunError> {
    let m = monodromy(p.monodromy)?;
    let eps = match p.epsilon {
        EpsilonSection::Zero => EpsilonProfile::Zero,
        EpsilonSection::Constant { value } => EpsilonProfile::Constant(value),
        EpsilonSection::MonodromyScaled { value } => EpsilonProfile::MonodromyScaled(value),
    };
    let spec = match p.family {
        FamilySection::Torus => {
            if m != bicontact_core::monodromy::Monodromy::identity() {
                return Err(RunError::Precondition("family torus needs the identity monodromy".into()));
            }
            PropellerSpec::torus_example(eps)
        }
        FamilySection::Linear { alpha_start, alpha_total, beta_start, beta_total } => {
            PropellerSpec::linear((alpha_start, alpha_total), (beta_start, beta_total), eps, m)
        }
        FamilySection::MinimalTwistSuspension => {
            let mut spec = PropellerSpec::minimal_twist_suspension(m).map_err(pre)?;
            spec.epsilon = eps;
            spec
        }
        FamilySection::NTwist { n } => PropellerSpec::n_twist(m, n, eps).map_err(pre)?,
    };
    build_propeller(&spec).map_err(pre)
}

fn propeller_verify(s: &Scenario, p: &PropellerSection) -> Result<VerificationReport, RunError> {
    let c = build_candidate(p)?;
    let mut report = VerificationReport::new();
    let tol = s.thresholds.gluing;
    report.push(CheckRecord::below("alpha-gluing", "forms glue across the monodromy", c.gluing_defect(&c.alpha), tol));
    report.push(CheckRecord::below("beta-gluing", "forms glue across the monodromy", c.gluing_defect(&c.beta), tol));
    let grid = GridSpec::unit_cube(p.grid).map_err(pre)?;
    report.extend(verify_bicontact(&c, &grid, s.thresholds.margin));
    let loci = c.coincidence_loci(p.loci_samples);
    report.set_value("coincidence_count", loci.len());
    report.set_value("coincidence_loci", &loci);
    report.set_value("margin_floor", c.margin_floor(p.loci_samples));
    report.set_value("suspension", c.suspension);
    Ok(report)
}

fn surgery(s: &Scenario) -> Result<VerificationReport, RunError> {
    let sec = s.surgery.as_ref().unwrap();
    let bound = tau1_bound(sec.q, sec.epsilon);
    let tau1 = match (sec.tau1, sec.tau1_factor) {
        (Some(t), _) => t,
        (None, Some(f)) => f * bound,
        (None, None) => unreachable!("validated"),
    };
    let tau2 = sec.tau2.unwrap_or(2.0 * tau1);
    let tau = sec.tau.unwrap_or(tau2);
    let model = build_flowbox(sec.epsilon, tau, sec.profile, true).map_err(pre)?;
    let shear = ShearProfile::with_period(sec.q, sec.period).map_err(pre)?;
    let r = perform_surgery(&model, &shear, tau1, tau2, sec.mode.to_mode()).map_err(pre)?;

    let grid = model.grid(sec.grid[0], sec.grid[1]).map_err(pre)?;
    let mut report = verify_surgery_contact(&r, &model, &grid).map_err(pre)?;
    let (ra, rb) = gluing_residual(&r, sec.period, sec.gluing_samples);
    let tol = s.thresholds.residual;
    report.push(CheckRecord::below("gluing-alpha", "F*(alpha - rho) = alpha + rho on C", ra, tol));
    report.push(CheckRecord::below("gluing-beta", "F*(beta - sigma) = beta + sigma on C", rb, tol));

    if sec.q != 0 && report.passed() {
        let nf = extract_normal_form(&r, &model, sec.grid[0], sec.grid[1]).map_err(pre)?;
        let cert = positivity_certificate(&nf.model);
        report.push(
            CheckRecord::new("normal-form-certificate", "a(tau) b(tau) < 1 after surgery", cert.min_margin, 0.0)
                .with_witness(vec![nf.at[0], nf.at[1]])
                .with_detail(format!("largest sampled product {:.6}", nf.end_product)),
        );
        report.set_value("normal_form_product", nf.end_product);
    }
    report.set_value("tau1_bound", if bound.is_finite() { Some(bound) } else { None });
    report.set_value("factor", r.factor());
    report.set_value("dehn_coefficient", [r.dehn_coefficient.0, r.dehn_coefficient.1]);
    Ok(report)
}

fn cone_check(sec: &ConeSection) -> Result<VerificationReport, RunError> {
    match *sec {
        ConeSection::Model { a_tau, b_tau, c, base_points, directions } => {
            let m = build_flowbox(1.0, 1.0, ProfileChoice::Linear { a_tau, b_tau }, false).map_err(pre)?;
            let cert = positivity_certificate(&m);
            let mut report = cert.to_report();
            report.extend(cone_invariance_check(&m, c, base_points, directions));
            report.set_value("end_product", a_tau * b_tau);
            report.set_value("witness_t", cert.witness_t);
            report.set_value("witness_direction", cert.witness_direction);
            Ok(report)
        }
        ConeSection::Sweep { n, boundary_margin } => {
            let cells = sweep(n, boundary_margin).map_err(pre)?;
            let mut report = VerificationReport::new();
            for cell in &cells {
                report.push(cell.to_record());
            }
            report.set_value("cells", cells.len());
            report.set_value("excluded", cells.iter().filter(|c| c.excluded).count());
            report.set_value("certified", cells.iter().filter(|c| c.certificate).count());
            report.set_value("disagreements", cells.iter().filter(|c| !c.agrees()).count());
            Ok(report)
        }
    }
}

fn coeffs(s: &Scenario) -> Result<VerificationReport, RunError> {
    let sec = s.coeffs.as_ref().unwrap();
    let b = monodromy(sec.monodromy)?;
    let gamma = HomologyClass::new(sec.gamma[0], sec.gamma[1]).map_err(pre)?;
    let adm = admissible_negative_coefficients(&b, gamma, sec.epsilon).map_err(pre)?;
    let mut report = VerificationReport::new();
    report.push(CheckRecord::boolean("anosov-monodromy", "|trace| > 2", b.is_anosov()));
    report.set_value("slope", adm.slope.to_string());
    report.set_value("slope_value", if adm.slope.is_infinite() { None } else { Some(adm.slope.to_f64()) });
    report.set_value("width", adm.width);
    report.set_value("min_q", adm.min_q);
    report.set_value("admissible", adm.to_string());

    Ok(report)
}

fn flow_start(s: &Scenario, given: Option<[f64; 3]>) -> [f64; 3] {
    given.unwrap_or_else(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), 0.0]
    })
}

/// A failed orbit becomes a failing check with the point and time.
fn orbit_failure(e: Error) -> Result<CheckRecord, RunError> {
    match e {
        Error::DegeneratePlane { point, margin, floor, time } => Ok(CheckRecord::new(
            "orbit-transversality",
            "ker alpha and ker beta transverse along the orbit",
            margin,
            floor,
        )
        .with_witness(vec![point[0], point[1], point[2], time])
        .with_detail(format!("kernels coincide within the step starting at time {time:.9}"))),
        Error::NoReturn { max_time } => Ok(CheckRecord::boolean("orbit-return", "orbit returns to z = 0", false)
            .with_detail(format!("no return within {max_time}"))),
        other => Err(pre(other)),
    }
}

fn flow_sim(s: &Scenario) -> Result<VerificationReport, RunError> {
    let c = build_candidate(s.propeller.as_ref().unwrap())?;
    let mut report = VerificationReport::new();
    let floor = s.thresholds.margin_floor;
    match *s.flow.as_ref().unwrap() {
        FlowSection::Splitting { start, returns, step, max_time } => {
            let start = flow_start(s, start);
            let config = FlowConfig { step, margin_floor: floor };
            report.set_value("start", start);
            let est = match splitting_ratio(&c, start, returns, config, max_time) {
                Ok(e) => e,
                Err(e) => {
                    report.push(orbit_failure(e)?);
                    return Ok(report);
                }
            };
            for (k, (&v, (&naive, &l))) in
                est.per_return.iter().zip(est.naive.iter().zip(est.log_ratio.iter())).enumerate()
            {
                report.push(
                    CheckRecord::new(format!("splitting-return-{:03}", k + 1), "dominated splitting", v, s.thresholds.splitting)
                        .with_detail(format!("naive {naive:.12}, log ratio {l:.12}")),
                );
            }
            let tr = integrate_returns(&c, start, returns, config, max_time).map_err(pre)?;
            let (mut worst, mut at) = (f64::INFINITY, [0.0; 4]);
            for &(t, p) in &tr.samples {
                let m = c.transversality_margin(p).unwrap_or(0.0);
                if m < worst {
                    worst = m;
                    at = [p[0], p[1], p[2], t];
                }
            }
            report.push(
                CheckRecord::new("orbit-margin", "transverse kernels along the orbit", worst, floor).with_witness(at.to_vec()),
            );
            report.set_value("splitting_estimate", est.estimate());
            report.set_value("naive_estimate", est.naive.last().copied());
            report.set_value("per_time", est.per_time());
            report.set_value("horizon", est.horizon);
            report.set_value("method", &est.method);
            if c.suspension && c.monodromy.is_anosov() {
                let eig = c.monodromy.eigen_data().map_err(pre)?;
                report.set_value("eigenvalue_log_ratio", 2.0 * eig.expanding.abs().ln());
            }
        }
        FlowSection::Orbit { start, duration, step } => {
            let start = flow_start(s, start);
            report.set_value("start", start);
            let config = FlowConfig { step, margin_floor: floor };
            match orbit_margin_profile(&c, start, duration, config) {
                Ok(prof) => {
                    let at = prof.samples.iter().find(|x| x.t == prof.min_time).unwrap();
                    report.push(
                        CheckRecord::new("orbit-margin", "transverse kernels along the orbit", prof.min_margin, floor)
                            .with_witness(vec![at.x, at.y, at.z, at.t]),
                    );
                    report.set_value("min_margin", prof.min_margin);
                    report.set_value("min_time", prof.min_time);
                    report.set_value("min_z", at.z);
                    let last = prof.samples.last().unwrap();
                    report.set_value("end", [last.x, last.y, last.z]);
                }
                Err(e) => {
                    let rec = orbit_failure(e)?;
                    if let Some(w) = &rec.witness {
                        report.set_value("failure_time", w[3]);
                        report.set_value("failure_z", w[2]);
                    }
                    report.push(rec);
                }
            }
            report.set_value("fibre_loci", c.coincidence_loci(4000));
            // Where the kernels would meet without the dz term, for comparison
            // with the position of the smallest margin.
            let mut bare = s.propeller.clone().unwrap();
            bare.epsilon = EpsilonSection::Zero;
            if let Ok(b) = build_candidate(&bare) {
                report.set_value("unperturbed_loci", b.coincidence_loci(4000));
            }
        }
    }
    Ok(report)
}
