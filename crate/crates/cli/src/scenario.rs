//! Scenario files: TOML with one top-level `kind` and one section per
//! pipeline. Unknown keys are rejected everywhere.

use std::f64::consts::PI;
use std::path::Path;

use bicontact_core::monodromy::{HomologyClass, Monodromy};
use bicontact_core::surgery::{ProfileChoice, Side, SurgeryMode};
use serde::{Deserialize, Serialize};

use crate::RunError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    PropellerVerify,
    Surgery,
    ConeCheck,
    Coeffs,
    FlowSim,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::PropellerVerify => "propeller-verify",
            Kind::Surgery => "surgery",
            Kind::ConeCheck => "cone-check",
            Kind::Coeffs => "coeffs",
            Kind::FlowSim => "flow-sim",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub kind: Kind,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub description: Option<String>,
    /// Seed for every randomized choice the pipeline makes.
    #[serde(default)]
    pub seed: u64,
    /// Exit status the scenario is meant to produce. Documentation for
    /// readers and the test suite; `run` ignores it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_exit: Option<i32>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propeller: Option<PropellerSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surgery: Option<SurgerySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cone: Option<ConeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<CoeffsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowSection>,
    /// Expected report values, turned into checks named `expect:<key>`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expect: Vec<Expectation>,
}

/// Margin floors and tolerances. Every field has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Contact and transversality margins must exceed this.
    pub margin: f64,
    /// Angular gluing defect allowed across `z = 0 ~ z = 1`.
    pub gluing: f64,
    /// Residual allowed in the surgery gluing identities.
    pub residual: f64,
    /// Orbits stop when the transversality margin drops below this.
    pub margin_floor: f64,
    /// Per-return splitting must exceed this.
    pub splitting: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { margin: 0.0, gluing: 1e-9, residual: 1e-10, margin_floor: 1e-6, splitting: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub key: String,
    pub value: toml::Value,
    /// Absolute tolerance for numbers (exact match when absent).
    #[serde(default)]
    pub tol: Option<f64>,
    /// Relative tolerance for numbers.
    #[serde(default)]
    pub rel_tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EpsilonSection {
    Zero,
    Constant { value: f64 },
    MonodromyScaled { value: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySection {
    /// Both forms rotating once, `θ = 2πz`, identity monodromy.
    Torus,
    Linear { alpha_start: f64, alpha_total: f64, beta_start: f64, beta_total: f64 },
    MinimalTwistSuspension,
    NTwist { n: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropellerSection {
    pub family: FamilySection,
    #[serde(default = "identity_matrix")]
    pub monodromy: [[i64; 2]; 2],
    #[serde(default = "zero_epsilon")]
    pub epsilon: EpsilonSection,
    /// Samples per axis of the verification grid.
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Samples of the fibre interval when locating coincidence tori.
    #[serde(default = "default_loci_samples")]
    pub loci_samples: usize,
}

fn identity_matrix() -> [[i64; 2]; 2] {
    [[1, 0], [0, 1]]
}

fn zero_epsilon() -> EpsilonSection {
    EpsilonSection::Zero
}

fn default_grid() -> usize {
    41
}

fn default_loci_samples() -> usize {
    4000
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeSection {
    TwoSided,
    OneSidedNegative,
    OneSidedPositive,
}

impl ModeSection {
    pub fn to_mode(self) -> SurgeryMode {
        match self {
            ModeSection::TwoSided => SurgeryMode::TwoSided,
            ModeSection::OneSidedNegative => SurgeryMode::OneSided(Side::Negative),
            ModeSection::OneSidedPositive => SurgeryMode::OneSided(Side::Positive),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurgerySection {
    pub epsilon: f64,
    pub q: i64,
    /// Either `tau1` or `tau1_factor` (a multiple of the τ₁ bound).
    #[serde(default)]
    pub tau1: Option<f64>,
    #[serde(default)]
    pub tau1_factor: Option<f64>,
    /// Defaults to `2·tau1`.
    #[serde(default)]
    pub tau2: Option<f64>,
    /// Half-height of the box; defaults to `tau2`.
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default = "normalized_profile")]
    pub profile: ProfileChoice,
    #[serde(default = "two_sided")]
    pub mode: ModeSection,
    /// Total twist of the shear.
    #[serde(default = "full_turn")]
    pub period: f64,
    /// `[w samples, t samples]`.
    #[serde(default = "surgery_grid")]
    pub grid: [usize; 2],
    /// Samples per side of the `(s, w)` grid on `C` for the gluing residual.
    #[serde(default = "gluing_grid")]
    pub gluing_samples: usize,
}

fn normalized_profile() -> ProfileChoice {
    ProfileChoice::Normalized { b_slope: 1.0 }
}

fn two_sided() -> ModeSection {
    ModeSection::TwoSided
}

fn full_turn() -> f64 {
    2.0 * PI
}

fn surgery_grid() -> [usize; 2] {
    [201, 201]
}

fn gluing_grid() -> usize {
    101
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConeSection {
    /// Certificate and invariance sampling on one linear model, `τ = 1`.
    Model {
        a_tau: f64,
        b_tau: f64,
        #[serde(default = "default_c")]
        c: f64,
        #[serde(default = "default_base_points")]
        base_points: usize,
        #[serde(default = "default_directions")]
        directions: usize,
    },
    /// Certificate against `a(τ)b(τ) < 1` on an `n × n` sweep.
    Sweep {
        #[serde(default = "default_sweep")]
        n: usize,
        #[serde(default = "default_boundary")]
        boundary_margin: f64,
    },
}

fn default_c() -> f64 {
    bicontact_core::cone::DEFAULT_C
}

fn default_base_points() -> usize {
    32
}

fn default_directions() -> usize {
    256
}

fn default_sweep() -> usize {
    50
}

fn default_boundary() -> f64 {
    1e-3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffsSection {
    pub monodromy: [[i64; 2]; 2],
    #[serde(default = "second_generator")]
    pub gamma: [i64; 2],
    /// Half-width of the annulus; the criterion uses `2ε`.
    pub epsilon: f64,
}

fn second_generator() -> [i64; 2] {
    [0, 1]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FlowSection {
    /// Per-return splitting along one orbit.
    Splitting {
        #[serde(default)]
        start: Option<[f64; 3]>,
        returns: usize,
        #[serde(default = "default_step")]
        step: f64,
        #[serde(default = "default_max_time")]
        max_time: f64,
    },
    /// Transversality margin along one orbit for a fixed duration.
    Orbit {
        #[serde(default)]
        start: Option<[f64; 3]>,
        duration: f64,
        #[serde(default = "default_step")]
        step: f64,
    },
}

fn default_step() -> f64 {
    0.01
}

fn default_max_time() -> f64 {
    1000.0
}

fn positive(name: &'static str, x: f64) -> Result<(), RunError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(RunError::Precondition(format!("{name} must be positive, got {x}")))
    }
}

fn missing(section: &str, kind: Kind) -> RunError {
    RunError::Parse(format!("kind = \"{}\" needs a [{section}] section", kind.as_str()))
}

pub fn monodromy(m: [[i64; 2]; 2]) -> Result<Monodromy, RunError> {
    Monodromy::new(m[0][0], m[0][1], m[1][0], m[1][1]).map_err(|e| RunError::Precondition(format!("monodromy: {e}")))
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        let s: Scenario = toml::from_str(text).map_err(|e| RunError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_path(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Structural checks that do not need any computation.
    pub fn validate(&self) -> Result<(), RunError> {
        let t = &self.thresholds;
        positive("thresholds.gluing", t.gluing)?;
        positive("thresholds.residual", t.residual)?;
        positive("thresholds.margin_floor", t.margin_floor)?;
        match self.kind {
            Kind::PropellerVerify => {
                let p = self.propeller.as_ref().ok_or_else(|| missing("propeller", self.kind))?;
                p.validate()?;
            }
            Kind::FlowSim => {
                let p = self.propeller.as_ref().ok_or_else(|| missing("propeller", self.kind))?;
                p.validate()?;
                match self.flow.as_ref().ok_or_else(|| missing("flow", self.kind))? {
                    FlowSection::Splitting { returns, step, max_time, start } => {
                        positive("flow.step", *step)?;
                        positive("flow.max_time", *max_time)?;
                        if *returns == 0 {
                            return Err(RunError::Precondition("flow.returns must be at least 1".into()));
                        }
                        check_start(start)?;
                    }
                    FlowSection::Orbit { duration, step, start } => {
                        positive("flow.step", *step)?;
                        positive("flow.duration", *duration)?;
                        check_start(start)?;
                    }
                }
            }
            Kind::Surgery => {
                let s = self.surgery.as_ref().ok_or_else(|| missing("surgery", self.kind))?;
                positive("epsilon", s.epsilon)?;
                positive("period", s.period)?;
                match (s.tau1, s.tau1_factor) {
                    (Some(t), None) => positive("tau1", t)?,
                    (None, Some(f)) => {
                        positive("tau1_factor", f)?;
                        if s.q == 0 {
                            return Err(RunError::Precondition(
                                "tau1_factor needs q != 0 (the tau1 bound is infinite); give tau1".into(),
                            ));
                        }
                    }
                    _ => return Err(RunError::Precondition("give exactly one of tau1, tau1_factor".into())),
                }
                if let Some(t) = s.tau2 {
                    positive("tau2", t)?;
                }
                if let Some(t) = s.tau {
                    positive("tau", t)?;
                }
                if s.grid[0] < 2 || s.grid[1] < 2 || s.gluing_samples < 2 {
                    return Err(RunError::Precondition("surgery grids need at least 2 samples per axis".into()));
                }
            }
            Kind::ConeCheck => match self.cone.as_ref().ok_or_else(|| missing("cone", self.kind))? {
                ConeSection::Model { a_tau, b_tau, c, base_points, directions } => {
                    positive("a_tau", *a_tau)?;
                    positive("b_tau", *b_tau)?;
                    positive("c", *c)?;
                    if *base_points < 2 || *directions < 4 {
                        return Err(RunError::Precondition("cone sampling too coarse".into()));
                    }
                }
                ConeSection::Sweep { n, boundary_margin } => {
                    if *n == 0 {
                        return Err(RunError::Precondition("sweep n must be positive".into()));
                    }
                    if !(*boundary_margin >= 0.0) {
                        return Err(RunError::Precondition("boundary_margin must be nonnegative".into()));
                    }
                }
            },
            Kind::Coeffs => {
                let c = self.coeffs.as_ref().ok_or_else(|| missing("coeffs", self.kind))?;
                positive("epsilon", c.epsilon)?;
                monodromy(c.monodromy)?;
                HomologyClass::new(c.gamma[0], c.gamma[1])
                    .map_err(|e| RunError::Precondition(format!("gamma: {e}")))?;
            }
        }
        for e in &self.expect {
            if let Some(t) = e.tol.or(e.rel_tol) {
                if !(t >= 0.0) {
                    return Err(RunError::Precondition(format!("expect {}: tolerance must be nonnegative", e.key)));
                }
            }
        }
        Ok(())
    }
}

fn check_start(start: &Option<[f64; 3]>) -> Result<(), RunError> {
    if let Some(s) = start {
        if !(0.0..1.0).contains(&s[2]) || !s.iter().all(|x| x.is_finite()) {
            return Err(RunError::Precondition(format!("flow.start must be finite with z in [0, 1), got {s:?}")));
        }
    }
    Ok(())
}

impl PropellerSection {
    fn validate(&self) -> Result<(), RunError> {
        monodromy(self.monodromy)?;
        match self.epsilon {
            EpsilonSection::Constant { value } | EpsilonSection::MonodromyScaled { value } => {
                positive("epsilon", value)?
            }
            EpsilonSection::Zero => {}
        }
        if self.grid < 2 || self.loci_samples < 2 {
            return Err(RunError::Precondition("propeller grids need at least 2 samples".into()));
        }
        Ok(())
    }
}
