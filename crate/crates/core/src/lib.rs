//! Numerical toolkit for bi-contact structures on 3-manifolds.
//!
//! A pair of contact forms `(α, β)` of opposite signs with transverse
//! kernels determines a projectively Anosov flow along `ker α ∩ ker β`.
//! This crate builds such pairs on torus bundles over the circle, performs
//! the flow-box shear surgery on them, checks Lorentz-cone invariance of
//! the linearized flow, and integrates the resulting flows.
//!
//! ```
//! use bicontact_core::propeller::{build_propeller, verify_bicontact, EpsilonProfile, PropellerSpec};
//! use bicontact_core::chart::GridSpec;
//!
//! let spec = PropellerSpec::torus_example(EpsilonProfile::Constant(0.1));
//! let pair = build_propeller(&spec).unwrap();
//! let report = verify_bicontact(&pair, &GridSpec::unit_cube(9).unwrap(), 1e-3);
//! assert!(report.passed());
//! ```

pub mod chart;
pub mod cone;
pub mod error;
pub mod flow;
pub mod monodromy;
pub mod propeller;
pub mod report;
pub mod surgery;

pub use error::{Error, Result};
