use burgers_lab::error::Error;
use burgers_lab::initial::InitialVelocity;
use burgers_lab::monte_carlo::{
    escape_probability, fluctuation_check, fluctuation_samples, integrate_backward, FluctuationConfig, Gaussian, SdeConfig,
    VelocitySource,
};
use burgers_lab::stats::{ks_pvalue, ks_statistic, mean_se};
use burgers_lab::viscous::{khokhlov_velocity, KhokhlovTransition};

fn khokhlov_cfg(x: f64, n: usize, seed: u64) -> SdeConfig {
    SdeConfig {
        source: VelocitySource::Khokhlov { length: 1.0 },
        nu: 0.1,
        kappa: 0.1,
        x,
        t: 1.0,
        s: 0.5,
        steps: 200,
        n_paths: n,
        seed,
        record: vec![0.75],
    }
}

#[test]
fn endpoints_follow_the_transition_law() {
    for x in [0.0, 0.3] {
        let ens = integrate_backward(&khokhlov_cfg(x, 10_000, 2)).unwrap();
        let law = KhokhlovTransition::new(1.0, 0.1, 0.5, x, 1.0);
        let d = ks_statistic(&ens.endpoints, |a| law.cdf(a));
        assert!(ks_pvalue(d, ens.endpoints.len()) > 1e-3, "x={x} d={d}");
        assert_eq!(ens.recorded.len(), 1);
        assert_eq!(ens.recorded[0].len(), 10_000);
    }
}

#[test]
fn velocity_is_a_backward_average() {
    for x in [-0.4, 0.0, 0.25] {
        let ens = integrate_backward(&khokhlov_cfg(x, 10_000, 4)).unwrap();
        let v: Vec<f64> = ens.endpoints.iter().map(|&a| khokhlov_velocity(1.0, 0.1, a, 0.5)).collect();
        let (m, se) = mean_se(&v);
        assert!((m - khokhlov_velocity(1.0, 0.1, x, 1.0)).abs() <= 3.0 * se, "x={x} mean {m} se {se}");
    }
}

#[test]
fn ensembles_are_reproducible() {
    let a = integrate_backward(&khokhlov_cfg(0.1, 300, 8)).unwrap();
    let b = integrate_backward(&khokhlov_cfg(0.1, 300, 8)).unwrap();
    let c = integrate_backward(&khokhlov_cfg(0.1, 300, 9)).unwrap();
    assert_eq!(a.endpoints, b.endpoints);
    assert_ne!(a.endpoints, c.endpoints);
    let mut buf = Vec::new();
    a.write_csv(&mut buf).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with("# seed=8"));
}

#[test]
fn coarse_steps_and_bad_sources_are_rejected() {
    let mut cfg = khokhlov_cfg(0.0, 10, 1);
    cfg.steps = 20;
    assert!(matches!(integrate_backward(&cfg), Err(Error::StepTooCoarse { .. })));
    let hc = SdeConfig {
        source: VelocitySource::HopfCole { initial: InitialVelocity::riemann(1.0, -1.0) },
        nu: 0.02,
        kappa: 0.02,
        steps: 200,
        ..cfg
    };
    assert!(matches!(integrate_backward(&hc), Err(Error::StepTooCoarse { .. })));
    let fl = FluctuationConfig {
        source: VelocitySource::HopfCole { initial: InitialVelocity::riemann(1.0, -1.0) },
        nu: 0.2,
        t0: 0.5,
        tf: 1.0,
        rho0: Gaussian { mean: 0.0, std: 0.5 },
        rho_f: Gaussian { mean: 0.0, std: 0.3 },
        steps: 200,
        n_paths: 10,
        seed: 1,
        variance_cap: 1e6,
    };
    assert!(fluctuation_samples(&fl).is_err());
}

#[test]
fn stationary_escape_beats_chebyshev() {
    for pr in [0.0, 1.0, 2.0] {
        let r = escape_probability(1.0, pr, 1e-3, 1.0, 0.5, 20_000, 100, 5).unwrap();
        assert!(r.pass, "pr={pr} p={} bound {}", r.probability, r.lower_bound);
        assert!((r.left_fraction - 0.5).abs() < 3.0 * (0.25f64 / 20_000.0).sqrt());
    }
}

#[test]
fn fluctuation_identity_on_stationary_shock() {
    let r = fluctuation_check(&FluctuationConfig {
        source: VelocitySource::StationaryShock { amplitude: 1.0 },
        nu: 0.2,
        t0: 0.0,
        tf: 0.5,
        rho0: Gaussian { mean: 0.0, std: 0.5 },
        rho_f: Gaussian { mean: 0.0, std: 0.3 },
        steps: 500,
        n_paths: 10_000,
        seed: 3,
        variance_cap: 1e6,
    })
    .unwrap();
    assert!(r.identity_pass, "E[e^W] {} +- {}", r.mean_exp_w, r.jackknife_error);
    assert!(r.jensen_pass && r.mean_w < 0.0);
}
