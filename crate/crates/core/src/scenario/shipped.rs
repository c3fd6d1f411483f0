//! Scenario files shipped with the crate.

/// `(id, TOML source)` of every shipped scenario, sorted by id.
pub const SHIPPED: &[(&str, &str)] = &[
    ("affine_blowup", include_str!("../../scenarios/affine_blowup.toml")),
    ("affine_fast", include_str!("../../scenarios/affine_fast.toml")),
    ("affine_support", include_str!("../../scenarios/affine_support.toml")),
    ("circle_trig_rates", include_str!("../../scenarios/circle_trig_rates.toml")),
    ("countercampbell_rates", include_str!("../../scenarios/countercampbell_rates.toml")),
    ("countercampbell_spectral", include_str!("../../scenarios/countercampbell_spectral.toml")),
    ("doubling_spectral", include_str!("../../scenarios/doubling_spectral.toml")),
    ("kernel_telegraph", include_str!("../../scenarios/kernel_telegraph.toml")),
    ("neumann_check", include_str!("../../scenarios/neumann_check.toml")),
    ("shear_orbits", include_str!("../../scenarios/shear_orbits.toml")),
    ("telegraph_ladder", include_str!("../../scenarios/telegraph_ladder.toml")),
    ("torus_threshold", include_str!("../../scenarios/torus_threshold.toml")),
    ("transverse_torus_fast", include_str!("../../scenarios/transverse_torus_fast.toml")),
    ("transverse_torus_support", include_str!("../../scenarios/transverse_torus_support.toml")),
];

/// Source of a shipped scenario by id.
pub fn shipped(id: &str) -> Option<&'static str> {
    SHIPPED.iter().find(|(k, _)| *k == id).map(|(_, v)| *v)
}
