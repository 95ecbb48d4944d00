// SPDX-License-Identifier: Apache-2.0

mod common;

macro_rules! property_tests {
    ($($name:ident => $label:literal),* $(,)?) => {
        $(
            #[test]
            fn $name() {
                let p = common::suite().into_iter().find(|p| p.name == $label).expect("property exists");
                if let Err(e) = (p.run)(p.cases) {
                    panic!("{}: {e}", p.name);
                }
            }
        )*

        #[test]
        fn every_property_has_a_test() {
            let named = [$($label),*];
            for p in common::suite() {
                assert!(named.contains(&p.name), "no test for {}", p.name);
            }
        }
    };
}

property_tests! {
    lift_equivariance => "lift equivariance",
    jacobian_consistency => "jacobian vs finite differences",
    linear_cone_bounds => "linear cone bounds",
    linear_model_invariance => "linear model ignores perturbations",
    bundle_colinearity => "bundle colinearity and orientation",
    bundle_unit_norm => "bundle unit norm",
    stretch_determinant => "stretch determinant identity",
    bundle_depth_robustness => "bundle depth robustness",
    orbit_counts => "orbit count invariance",
    orbit_closure => "orbit closure",
    period_coherence => "period coherence",
    multiplier_identities => "multiplier trace and determinant",
    exp_log_round_trip => "series exp/log round trip",
    truncation_stability => "zero truncation stability",
    identity_residuals => "identity residuals",
    sigma_substitution => "sigma substitution",
    flow_composition => "flow composition",
    unit_speed => "unit speed and unit integral",
    measure_normalization => "measure normalization",
    character_oracle => "character correlation oracle",
    swap_symmetry => "zero-lag swap symmetry",
}
