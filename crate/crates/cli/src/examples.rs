//! Scenario files shipped with the tool, embedded at build time.

/// `(name, TOML source)` of every file under `scenarios/`.
pub const EXAMPLES: &[(&str, &str)] = &[
    ("coeffs-golden-mean", include_str!("../../../scenarios/coeffs-golden-mean.toml")),
    ("coeffs-narrow-annulus", include_str!("../../../scenarios/coeffs-narrow-annulus.toml")),
    ("coeffs-negative-epsilon", include_str!("../../../scenarios/coeffs-negative-epsilon.toml")),
    ("coeffs-worked-example", include_str!("../../../scenarios/coeffs-worked-example.toml")),
    ("cone-near-boundary", include_str!("../../../scenarios/cone-near-boundary.toml")),
    ("cone-quarter", include_str!("../../../scenarios/cone-quarter.toml")),
    ("cone-sweep", include_str!("../../../scenarios/cone-sweep.toml")),
    ("cone-violated", include_str!("../../../scenarios/cone-violated.toml")),
    ("flow-degenerate-torus", include_str!("../../../scenarios/flow-degenerate-torus.toml")),
    ("flow-splitting-golden", include_str!("../../../scenarios/flow-splitting-golden.toml")),
    ("flow-splitting-worked-example", include_str!("../../../scenarios/flow-splitting-worked-example.toml")),
    ("flow-twist-margin", include_str!("../../../scenarios/flow-twist-margin.toml")),
    ("surgery-gluing-q2", include_str!("../../../scenarios/surgery-gluing-q2.toml")),
    ("surgery-one-sided", include_str!("../../../scenarios/surgery-one-sided.toml")),
    ("surgery-one-sided-upper", include_str!("../../../scenarios/surgery-one-sided-upper.toml")),
    ("surgery-q0-identity", include_str!("../../../scenarios/surgery-q0-identity.toml")),
    ("surgery-q3-violation", include_str!("../../../scenarios/surgery-q3-violation.toml")),
    ("surgery-q3-within-bound", include_str!("../../../scenarios/surgery-q3-within-bound.toml")),
    ("surgery-q5-beta", include_str!("../../../scenarios/surgery-q5-beta.toml")),
    ("suspension-minimal-twist", include_str!("../../../scenarios/suspension-minimal-twist.toml")),
    ("suspension-one-twist", include_str!("../../../scenarios/suspension-one-twist.toml")),
    ("torus-perturbed", include_str!("../../../scenarios/torus-perturbed.toml")),
    ("torus-quarter-shift", include_str!("../../../scenarios/torus-quarter-shift.toml")),
    ("torus-unperturbed", include_str!("../../../scenarios/torus-unperturbed.toml")),
];

pub fn find(name: &str) -> Option<&'static str> {
    EXAMPLES.iter().find(|(n, _)| *n == name).map(|(_, src)| *src)
}
