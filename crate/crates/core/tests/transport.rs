use burgers_lab::dissipation::EntropyPair;
use burgers_lab::entropy::EntropySolution;
use burgers_lab::initial::InitialVelocity;
use burgers_lab::presets;
use burgers_lab::transport::{
    evolve_density, evolve_scalar, initial_invariant, integrated_scalar_rate, momentum_anomaly, scalar_anomaly, scalar_invariant,
    weak_residual, window_at, Passive, TestBump,
};
use proptest::prelude::*;

fn sawtooth() -> EntropySolution {
    EntropySolution::new(InitialVelocity::sawtooth(1.0, 0.5).unwrap(), 3.0).unwrap()
}

#[test]
fn riemann_atom_collects_swept_mass() {
    let sol = EntropySolution::new(InitialVelocity::riemann(1.0, -1.0), 2.0).unwrap();
    let rho0 = Passive::Constant { value: 2.5 };
    for t in [0.3, 1.1] {
        let m = evolve_density(&rho0, &sol, t).unwrap();
        assert_eq!(m.atoms.len(), 1);
        assert!((m.atoms[0].mass - 2.5 * 2.0 * t).abs() < 1e-12);
        assert!((m.continuous(0.5).unwrap() - 2.5).abs() < 1e-14);
    }
}

#[test]
fn product_residual_is_carried_by_the_shock() {
    let sol = sawtooth();
    let rho0 = Passive::Step { minus: 1.0, plus: 3.0 };
    let theta0 = Passive::Linear { intercept: 0.2, slope: 1.0 };
    let mut largest: f64 = 0.0;
    for b in TestBump::family(-1.5, 1.5, 0.6, 2.9) {
        let r = weak_residual(&sol, &rho0, &theta0, &b).unwrap();
        assert!(r.density.abs() < 1e-9, "{r:?}");
        assert!((r.product - r.product_predicted).abs() < 1e-8, "{r:?}");
        assert!((r.momentum - r.momentum_predicted).abs() < 1e-8, "{r:?}");
        // The endpoint average makes the jump terms of the scalar equation cancel.
        assert!(r.scalar.abs() < 1e-9, "{r:?}");
        largest = largest.max(r.product.abs());
    }
    assert!(largest > 1e-3, "product residual vanished: {largest}");
}

#[test]
fn bump_outside_the_flow_is_rejected() {
    let sol = sawtooth();
    let c = Passive::Constant { value: 1.0 };
    let b = TestBump { xc: 0.0, tc: 0.6, rx: 0.5, rt: 0.3 };
    assert!(weak_residual(&sol, &c, &c, &b).is_err());
}

#[test]
fn negative_density_is_rejected() {
    let sol = sawtooth();
    let rho0 = Passive::Linear { intercept: 0.0, slope: 1.0 };
    assert!(rho0.require_nonnegative(sol.initial(), -1.0, 1.0).is_err());
}

#[test]
fn scalar_invariant_drops_by_the_anomaly() {
    let sol = EntropySolution::new(presets::tanh_step(0.4, 0.3).unwrap(), 3.0).unwrap();
    let rho0 = Passive::Gaussian { center: 0.0, width: 1.0, height: 1.0 };
    let theta0 = Passive::Velocity;
    let ta = sol.tree().event_times().into_iter().fold(0.0, f64::max);
    for psi in [EntropyPair::Square, EntropyPair::Quartic] {
        let j0 = initial_invariant(&rho0, &theta0, &sol, &psi, -6.0, 6.0).unwrap();
        for t in [1.2, 2.6] {
            let (lo, hi) = window_at(&sol, -6.0, 6.0, t).unwrap();
            let m = evolve_density(&rho0, &sol, t).unwrap();
            let j = scalar_invariant(&m, &evolve_scalar(&theta0, &sol, t).unwrap(), &psi, lo, hi).unwrap();
            let an = scalar_anomaly(&rho0, &theta0, &sol, &psi, t).unwrap();
            assert!((j - j0 - an.lagrangian).abs() < 1e-8, "{} t={t}", psi.name());
            if t > ta + 0.1 {
                let lag_a = scalar_anomaly(&rho0, &theta0, &sol, &psi, ta + 1e-2).unwrap().lagrangian;
                let eul = integrated_scalar_rate(&rho0, &theta0, &sol, &psi, ta + 1e-2, t).unwrap();
                assert!((an.lagrangian - lag_a - eul).abs() < 1e-6, "{} t={t}", psi.name());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sawtooth_momentum_anomaly_closed_form(minus in 0.1f64..4.0, plus in 0.1f64..4.0, t in 0.6f64..2.9) {
        let sol = sawtooth();
        let rho0 = Passive::Step { minus, plus };
        let m = evolve_density(&rho0, &sol, t).unwrap();
        let a = &momentum_anomaly(&m).unwrap()[0];
        let want = (plus - minus) * (0.5 / t) / (t * t);
        prop_assert!((a.second_form - want).abs() < 1e-10);
        prop_assert!((a.flux_balance - want).abs() < 1e-6);
        prop_assert!((a.mass_rate - a.mass_rate_formula).abs() < 1e-5);
    }

    #[test]
    fn mass_is_conserved(center in -1.0f64..1.0, width in 0.2f64..1.5, t in 0.1f64..1.9) {
        let sol = EntropySolution::new(InitialVelocity::riemann(1.0, -0.5), 2.0).unwrap();
        let rho0 = Passive::Gaussian { center, width, height: 1.0 };
        let unit = Passive::Constant { value: 1.0 };
        let m0 = initial_invariant(&rho0, &unit, &sol, &EntropyPair::Momentum, -12.0, 12.0).unwrap();
        let (lo, hi) = window_at(&sol, -12.0, 12.0, t).unwrap();
        let m = evolve_density(&rho0, &sol, t).unwrap();
        prop_assert!((m.mass_in(lo, hi).unwrap() - m0).abs() < 1e-12);
    }
}
