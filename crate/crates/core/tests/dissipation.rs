use burgers_lab::dissipation::{
    bregman, delta_psi_profile, eulerian_rate, instantaneous_rate, integrated_eulerian, lagrangian_anomaly, EntropyPair,
};
use burgers_lab::entropy::EntropySolution;
use burgers_lab::initial::InitialVelocity;
use burgers_lab::presets;
use proptest::prelude::*;

fn convex_pairs() -> Vec<EntropyPair> {
    vec![
        EntropyPair::Energy,
        EntropyPair::Square,
        EntropyPair::Quartic,
        EntropyPair::Abs,
        EntropyPair::sampled(vec![-2.0, -0.5, 0.0, 1.0, 2.0], vec![3.0, 0.4, 0.0, 0.5, 2.5]).unwrap(),
    ]
}

#[test]
fn anomaly_grows_by_the_integrated_rate() {
    let ramp = EntropySolution::new(InitialVelocity::linear_ramp(-1.0, 1.0), 3.0).unwrap();
    let dip = EntropySolution::new(presets::two_dip().unwrap(), presets::TWO_DIP_HORIZON).unwrap();
    for (sol, ta, tb) in [(&ramp, 1.2, 2.8), (&dip, 0.9, 2.9)] {
        for pair in convex_pairs() {
            let lag = lagrangian_anomaly(sol, &pair, tb).unwrap() - lagrangian_anomaly(sol, &pair, ta).unwrap();
            let eul = integrated_eulerian(sol, &pair, ta, tb).unwrap();
            assert!((lag - eul).abs() < 1e-6 * (1.0 + lag.abs()), "{} lag {lag} eul {eul}", pair.name());
            assert!(lag <= 1e-12);
        }
    }
}

#[test]
fn ramp_anomaly_is_continuous_through_collapse() {
    let sol = EntropySolution::new(InitialVelocity::linear_ramp(-1.0, 1.0), 3.0).unwrap();
    assert_eq!(lagrangian_anomaly(&sol, &EntropyPair::Energy, 0.9).unwrap(), 0.0);
    // After collapse the shock joins u = 1 to u = -1 and dissipates at the Riemann rate.
    for t in [1.0 + 1e-9, 1.5, 2.7] {
        let a = lagrangian_anomaly(&sol, &EntropyPair::Energy, t).unwrap();
        assert!((a + 2.0 / 3.0 * (t - 1.0)).abs() < 1e-9, "t={t} {a}");
    }
}

#[test]
fn delta_psi_monotone_on_tanh_step() {
    let sol = EntropySolution::new(presets::tanh_step(0.4, 0.3).unwrap(), 3.0).unwrap();
    let grid: Vec<f64> = (1..=120).map(|i| 3.0 * i as f64 / 120.0).collect();
    for pair in convex_pairs() {
        for id in sol.tree().live_at(3.0) {
            let prof = delta_psi_profile(&sol, &pair, id, &grid).unwrap();
            for w in prof.windows(2) {
                assert!(w[1].1 <= w[0].1 + 1e-8, "{} at s={}", pair.name(), w[1].0);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn riemann_energy_rate_is_cubic_in_jump(um in -2.0f64..2.0, gap in 0.01f64..3.0, t in 0.1f64..1.9) {
        let up = um - gap;
        let sol = EntropySolution::new(InitialVelocity::riemann(um, up), 2.0).unwrap();
        let want = (up - um).powi(3) / 12.0;
        let lag = instantaneous_rate(&sol, &EntropyPair::Energy, t).unwrap().total;
        let eul = eulerian_rate(&sol, &EntropyPair::Energy, t).unwrap().total;
        prop_assert!((lag - want).abs() < 1e-9 * (1.0 + want.abs()));
        prop_assert!((eul - want).abs() < 1e-9 * (1.0 + want.abs()));
    }

    #[test]
    fn momentum_has_no_anomaly(um in -2.0f64..2.0, gap in 0.01f64..3.0, t in 0.1f64..1.9) {
        let sol = EntropySolution::new(InitialVelocity::riemann(um, um - gap), 2.0).unwrap();
        for pair in [EntropyPair::Momentum, EntropyPair::NegMomentum] {
            prop_assert!(instantaneous_rate(&sol, &pair, t).unwrap().total.abs() < 1e-10);
            prop_assert!(eulerian_rate(&sol, &pair, t).unwrap().total.abs() < 1e-10);
        }
    }

    #[test]
    fn convex_rates_are_non_positive(um in -2.0f64..2.0, gap in 0.01f64..3.0, t in 0.1f64..1.9) {
        let sol = EntropySolution::new(InitialVelocity::riemann(um, um - gap), 2.0).unwrap();
        for pair in convex_pairs() {
            let r = instantaneous_rate(&sol, &pair, t).unwrap().total;
            prop_assert!(r <= 1e-12, "{} {}", pair.name(), r);
        }
    }

    #[test]
    fn bregman_is_non_negative(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        for pair in convex_pairs() {
            prop_assert!(bregman(&pair, a, b) >= -1e-12);
        }
    }
}
