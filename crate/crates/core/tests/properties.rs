use dicke_sim::asymptote::{asymptote_linear, AsymptoteSettings};
use dicke_sim::generator::fluorescence_weights;
use dicke_sim::ode::integrate_linear;
use dicke_sim::{
    build_generator, build_state_space, initial_state, HalfInt, IntegratorConfig, Manifold, SpinManifoldParams, Term,
    TermFlags, Variant,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn slots_round_trip(n in 1u32..=40) {
        let space = build_state_space(n).unwrap();
        prop_assert_eq!(space.len() as u32, n * (n + 3) / 2);
        for (i, &d) in space.indices().iter().enumerate() {
            prop_assert_eq!(space.slot(d), Some(i));
            prop_assert!(d.j() >= HalfInt::HALF);
            prop_assert!((d.j() - d.m()).is_integer());
        }
    }

    #[test]
    fn emission_alone_conserves_each_ladder(n in 1u32..=8, gamma in 0.005f64..0.2) {
        let space = build_state_space(n).unwrap();
        let params = SpinManifoldParams::new(gamma, 0.0, 0.0, 1.0).unwrap();
        let gen = build_generator(&space, &params, TermFlags::MODEL_A).unwrap();
        // spread weight over every ladder, not just the top one
        let init: Vec<f64> = (0..space.dim()).map(|k| if k + 1 == space.dim() { 0.0 } else { 1.0 / (k as f64 + 2.0) }).collect();
        let ladder_sums = |x: &[f64]| {
            let mut sums = std::collections::BTreeMap::new();
            for (d, v) in space.indices().iter().zip(x) {
                *sums.entry(d.j()).or_insert(0.0) += v;
            }
            sums
        };
        let before = ladder_sums(&init);
        let (_, xs) = integrate_linear(gen.matrix(), &init, &IntegratorConfig::new(100.0, 50)).unwrap();
        for x in &xs {
            for (j, s) in ladder_sums(x) {
                prop_assert!((s - before[&j]).abs() < 1e-10, "J = {} drifted to {}", j, s);
            }
        }
    }

    #[test]
    fn model_b_stays_nonnegative(
        n in 1u32..=6,
        gamma in 0.01f64..0.1,
        gamma_d in 0.0f64..3.0,
        gamma_isc in 0.0f64..0.1,
    ) {
        let space = build_state_space(n).unwrap();
        let params = SpinManifoldParams::new(gamma, gamma_d, gamma_isc, 1.0).unwrap();
        let gen = build_generator(&space, &params, TermFlags::MODEL_B).unwrap();
        prop_assert!(gen.matrix().most_negative_off_diagonal().is_none());
        let init = initial_state(&space, Manifold::Zero).to_vector();
        let (_, xs) = integrate_linear(gen.matrix(), &init, &IntegratorConfig::new(200.0, 100)).unwrap();
        let w = fluorescence_weights(&space, &params, TermFlags::MODEL_B);
        for x in &xs {
            prop_assert!(x.iter().all(|&v| v >= -1e-9));
            let f: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
            prop_assert!(f >= -1e-9);
        }
    }
}

/// Null-space projection and long-horizon integration agree on random small generators.
#[test]
fn asymptote_routes_agree_on_random_generators() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let settings = AsymptoteSettings::default();
    for case in 0..100 {
        let n = rng.gen_range(1..=4);
        let gamma = rng.gen_range(0.02..1.0);
        let gamma_d = if rng.gen_bool(0.15) {
            0.0
        } else {
            rng.gen_range(0.05..2.0)
        };
        let gamma_isc = if rng.gen_bool(0.15) {
            0.0
        } else {
            rng.gen_range(0.0..0.5)
        };
        let flags = Term::ALL.iter().fold(TermFlags::MODEL_A, |f, &t| {
            f.with(
                t,
                if rng.gen_bool(0.5) {
                    Variant::ModelB
                } else {
                    Variant::ModelA
                },
            )
        });
        let space = build_state_space(n).unwrap();
        let params = SpinManifoldParams::new(gamma, gamma_d, gamma_isc, 1.0).unwrap();
        let gen = build_generator(&space, &params, flags).unwrap();
        let init = initial_state(&space, Manifold::Zero).to_vector();
        let w = fluorescence_weights(&space, &params, flags);
        let report = asymptote_linear(gen.matrix(), &init, &w, &settings)
            .unwrap_or_else(|e| panic!("case {case} (N={n}, {flags}): {e}"));
        let gap = report.disagreement().expect("zero eigenvalue is semisimple here");
        assert!(gap < 1e-8, "case {case}: gap {gap}");
    }
}
