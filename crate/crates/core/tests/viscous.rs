use burgers_lab::initial::InitialVelocity;
use burgers_lab::viscous::{
    argmin_set, khokhlov_velocity, stationary_shock_velocity, KhokhlovTransition, PotentialSource, TransitionDensity,
    ViscousSolution,
};
use proptest::prelude::*;

fn khokhlov(nu: f64) -> ViscousSolution {
    ViscousSolution::new(InitialVelocity::khokhlov(1.0, nu, 0.5).unwrap(), nu).unwrap()
}

#[test]
fn quadrature_transition_matches_mixture() {
    let nu = 0.05;
    let v = khokhlov(nu);
    for (s, x) in [(0.7, 0.1), (0.6, 0.0), (0.9, -0.4)] {
        let td = v.transition_density(s, x, 1.0, PotentialSource::HopfCole).unwrap();
        let exact = KhokhlovTransition::new(1.0, nu, s, x, 1.0);
        for i in 0..60 {
            let a = -1.5 + 0.05 * i as f64;
            assert!((td.density(a).unwrap() - exact.density(a)).abs() < 1e-7, "s={s} x={x} a={a}");
        }
    }
}

#[test]
fn backward_average_reproduces_velocity() {
    let nu = 0.1;
    let v = khokhlov(nu);
    for x in [-0.7, -0.05, 0.0, 0.3] {
        for src in [PotentialSource::Khokhlov, PotentialSource::HopfCole] {
            let td = v.transition_density(0.6, x, 1.0, src).unwrap();
            assert!((td.mean_velocity().unwrap() - khokhlov_velocity(1.0, nu, x, 1.0)).abs() < 1e-8, "{src:?} x={x}");
        }
    }
}

#[test]
fn riemann_settles_to_stationary_shock() {
    let nu = 0.1;
    let v = ViscousSolution::new(InitialVelocity::riemann(1.0, -1.0), nu).unwrap();
    for x in [-0.5, -0.1, 0.0, 0.05, 0.4] {
        assert!((v.velocity(x, 8.0).unwrap() - stationary_shock_velocity(1.0, nu, x)).abs() < 1e-6, "x={x}");
    }
}

#[test]
fn symmetric_action_has_two_minimizers() {
    let f = |a: f64| (a * a) / 2.0 - a.abs();
    let m = argmin_set(&f, -3.0, 3.0, 4096, 1e-9);
    assert_eq!(m.len(), 2);
    assert!((m[0] + 1.0).abs() < 1e-6 && (m[1] - 1.0).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn density_is_gauge_invariant(gauge in -5.0f64..5.0, x in -1.0f64..1.0) {
        let v = khokhlov(0.1);
        let a = TransitionDensity::with_gauge(v.clone(), 0.7, x, 1.0, PotentialSource::HopfCole, 0.0).unwrap();
        let b = TransitionDensity::with_gauge(v, 0.7, x, 1.0, PotentialSource::HopfCole, gauge).unwrap();
        for i in 0..20 {
            let l = -1.0 + 0.1 * i as f64;
            prop_assert!((a.density(l).unwrap() - b.density(l).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn transition_density_is_normalized(x in -1.0f64..1.0, s in 0.55f64..0.95) {
        let td = khokhlov(0.1).transition_density(s, x, 1.0, PotentialSource::HopfCole).unwrap();
        prop_assert!((td.mass(td.lo, td.hi).unwrap() - 1.0).abs() < 1e-8);
    }
}
