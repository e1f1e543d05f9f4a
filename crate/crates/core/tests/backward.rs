use burgers_lab::backward::{verify_martingale, BranchLaw, Side, TwoStateProcess};
use burgers_lab::entropy::EntropySolution;
use burgers_lab::initial::InitialVelocity;
use burgers_lab::presets;
use burgers_lab::stats::{ks_pvalue, ks_statistic};

fn sawtooth(t0: f64, tf: f64) -> EntropySolution {
    EntropySolution::new(InitialVelocity::sawtooth(1.0, t0).unwrap(), tf).unwrap()
}

#[test]
fn sawtooth_exit_time_follows_label_geometry() {
    let (t0, tf) = (0.2, 1.5);
    let sol = sawtooth(t0, tf);
    let ens = BranchLaw::new(&sol, 0, t0, tf).unwrap().sample_paths(&sol, 4000, 3).unwrap();
    for p in &ens.paths {
        // A label at distance b from the shock enters it when b = L (1 - t0 / tau).
        assert!((p.tau - t0 / (1.0 - p.label.abs())).abs() < 1e-9 * p.tau, "{p:?}");
        match p.side {
            Side::Minus => assert!(p.label < 0.0),
            Side::Plus => assert!(p.label > 0.0),
        }
    }
}

#[test]
fn sawtooth_exit_time_distribution() {
    let (t0, tf) = (0.2, 1.5);
    let sol = sawtooth(t0, tf);
    let ens = BranchLaw::new(&sol, 0, t0, tf).unwrap().sample_paths(&sol, 20_000, 5).unwrap();
    let taus: Vec<f64> = ens.paths.iter().map(|p| p.tau).collect();
    // Labels swept uniformly: P(tau <= s) = tf (s - t0) / (s (tf - t0)).
    let d = ks_statistic(&taus, |s| (tf * (s - t0) / (s * (tf - t0))).clamp(0.0, 1.0));
    assert!(ks_pvalue(d, taus.len()) > 1e-3, "ks d = {d}");
    let left = ens.paths.iter().filter(|p| p.side == Side::Minus).count() as f64 / taus.len() as f64;
    assert!((left - 0.5).abs() < 3.0 * (0.25f64 / taus.len() as f64).sqrt());
}

#[test]
fn data_time_changes_the_law_not_the_mean() {
    // Both data times give the same velocity field for t >= 0.5.
    let tf = 1.9;
    let times = [0.6, 0.9, 1.2, 1.5];
    let mut samples = Vec::new();
    for t_ref in [0.2, 0.5] {
        let sol = sawtooth(t_ref, tf);
        let ens = BranchLaw::new(&sol, 0, t_ref, tf).unwrap().sample_paths(&sol, 20_000, 9).unwrap();
        let rep = verify_martingale(&ens, &sol, &times, None).unwrap();
        assert!(rep.pass, "t_ref {t_ref}: max z {}", rep.max_abs_z);
        let mut taus: Vec<f64> = ens.paths.iter().map(|p| p.tau).collect();
        taus.sort_by(f64::total_cmp);
        samples.push(taus);
    }
    let (a, b) = (&samples[0], &samples[1]);
    let mut gap: f64 = 0.0;
    for &s in a.iter().chain(b.iter()) {
        let fa = a.partition_point(|&x| x <= s) as f64 / a.len() as f64;
        let fb = b.partition_point(|&x| x <= s) as f64 / b.len() as f64;
        gap = gap.max((fa - fb).abs());
    }
    // Two-sample KS critical value at 1e-6 for n = m = 20000 is about 0.027.
    assert!(gap > 0.05, "laws coincide: {gap}");
}

#[test]
fn merger_branches_in_proportion_to_jumps() {
    let sol = EntropySolution::new(presets::two_dip().unwrap(), presets::TWO_DIP_HORIZON).unwrap();
    let m = sol.tree().mergers[0].clone();
    let law = BranchLaw::new(&sol, m.parent, 0.0, presets::TWO_DIP_HORIZON).unwrap();
    let probs = law.branch_probs(&sol, m.parent).unwrap();
    let jumps: Vec<f64> = m.children.iter().map(|&c| sol.segment_state(c, m.t).unwrap().jump()).collect();
    let total: f64 = jumps.iter().sum();
    for (c, j) in m.children.iter().zip(&jumps) {
        let p = probs.iter().find(|b| b.child == *c).unwrap().prob;
        assert!((p - j / total).abs() < 1e-6, "child {c}: {p} vs {}", j / total);
    }
    let (lhs, rhs) = law.velocity_identity(&sol, m.parent).unwrap();
    assert!((lhs - rhs).abs() < 1e-8);
    assert!((law.normalization() - 1.0).abs() < 1e-8);
}

#[test]
fn two_state_limit_is_a_martingale() {
    let sol = EntropySolution::new(InitialVelocity::riemann(2.0, -1.0), 2.0).unwrap();
    let proc = TwoStateProcess::at_shock(&sol, 0, 1.5).unwrap();
    let sides = proc.sample(20_000, 4);
    assert!(proc.verify(&sides, &[0.2, 0.8, 1.4]).unwrap().pass);
    let speed = sol.segment_state(0, 1.5).unwrap().speed();
    assert!((proc.shock_velocity_representation(&sol).unwrap() - speed).abs() < 1e-12);
}

#[test]
fn paths_depend_only_on_seed() {
    let sol = sawtooth(0.2, 1.5);
    let law = BranchLaw::new(&sol, 0, 0.2, 1.5).unwrap();
    let a = law.sample_paths(&sol, 500, 17).unwrap();
    let b = law.sample_paths(&sol, 500, 17).unwrap();
    let c = law.sample_paths(&sol, 500, 18).unwrap();
    assert_eq!(a.paths, b.paths);
    assert_ne!(a.paths, c.paths);
}
