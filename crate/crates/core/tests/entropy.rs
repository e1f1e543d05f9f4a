use burgers_lab::entropy::{lax_oleinik, EntropySolution};
use burgers_lab::initial::{lagrangian_map, InitialVelocity};
use burgers_lab::presets;
use burgers_lab::quad::{integrate_split, Tol};
use proptest::prelude::*;

#[test]
fn ramp_collapses_at_unit_time() {
    let sol = EntropySolution::new(InitialVelocity::linear_ramp(-1.0, 1.0), 3.0).unwrap();
    assert!(sol.shocks_at(0.99).unwrap().is_empty());
    let s = sol.shocks_at(1.5).unwrap();
    assert_eq!(s.len(), 1);
    assert!(s[0].x.abs() < 1e-12);
    assert!((s[0].u_minus - 1.0).abs() < 1e-12 && (s[0].u_plus + 1.0).abs() < 1e-12);
}

#[test]
fn two_dip_tree_has_one_merger() {
    let sol = EntropySolution::new(presets::two_dip().unwrap(), presets::TWO_DIP_HORIZON).unwrap();
    let tree = sol.tree();
    assert_eq!(tree.mergers.len(), 1);
    let roots = tree.roots();
    assert_eq!(roots.len(), 1);
    assert_eq!(tree.leaves(roots[0]).len(), 2);
    assert_eq!(tree.live_at(presets::TWO_DIP_HORIZON).len(), 1);
    let m = &tree.mergers[0];
    assert_eq!(m.children.len(), 2);
    assert!(m.t > 0.6 && m.t < presets::TWO_DIP_HORIZON);
}

#[test]
fn sawtooth_matches_closed_form() {
    let sol = EntropySolution::new(InitialVelocity::sawtooth(1.0, 0.5).unwrap(), 3.0).unwrap();
    for t in [0.7, 1.3, 2.9] {
        for x in [-0.8, -0.3, 0.2, 0.9] {
            let v = sol.evaluate(x, t).unwrap();
            assert!((v.mean - (x - x.signum()) / t).abs() < 1e-10, "x={x} t={t}");
        }
        let s = sol.shocks_at(t).unwrap();
        assert!((s[0].jump() - 2.0 / t).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn riemann_shock_moves_at_mean_speed(um in -2.0f64..2.0, gap in 0.05f64..3.0, t in 0.1f64..2.0) {
        let up = um - gap;
        let sol = EntropySolution::new(InitialVelocity::riemann(um, up), 2.0).unwrap();
        let s = sol.shocks_at(t).unwrap();
        prop_assert_eq!(s.len(), 1);
        prop_assert!((s[0].x - 0.5 * (um + up) * t).abs() < 1e-10);
    }

    #[test]
    fn shocks_are_compressive_and_equal_area(t in 0.6f64..3.0) {
        let u0 = presets::tanh_step(0.4, 0.3).unwrap();
        let sol = EntropySolution::new(u0.clone(), 3.0).unwrap();
        for s in sol.shocks_at(t).unwrap() {
            prop_assert!(s.u_minus > s.u_plus);
            let tau = t - sol.t0();
            prop_assert!((lagrangian_map(&u0, s.a_minus, t) - s.x).abs() < 1e-8);
            prop_assert!((lagrangian_map(&u0, s.a_plus, t) - s.x).abs() < 1e-8);
            let area = integrate_split(|a| u0.velocity(a), s.a_minus, s.a_plus, &[], Tol::tight()).unwrap();
            let chord = 0.5 * (u0.velocity(s.a_minus) + u0.velocity(s.a_plus)) * (s.a_plus - s.a_minus);
            prop_assert!((area - chord).abs() < 1e-7 * (1.0 + tau), "area {} chord {}", area, chord);
        }
    }

    #[test]
    fn lax_oleinik_inverts_characteristics_before_collapse(a in -0.95f64..0.95, t in 0.05f64..0.95) {
        let u0 = InitialVelocity::linear_ramp(-1.0, 1.0);
        let x = lagrangian_map(&u0, a, t);
        let m = lax_oleinik(&u0, x, t - u0.t0).unwrap();
        prop_assert_eq!(m.labels.len(), 1);
        prop_assert!((m.labels[0] - a).abs() < 1e-8);
    }
}
