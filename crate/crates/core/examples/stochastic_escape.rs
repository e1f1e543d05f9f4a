//! Backward stochastic flow: averaging the data and escaping a shock.
use burgers_lab::monte_carlo::{escape_probability, integrate_backward, khokhlov_escape, SdeConfig, VelocitySource};
use burgers_lab::stats::mean_se;
use burgers_lab::viscous::khokhlov_velocity;

fn main() -> burgers_lab::Result<()> {
    let nu = 0.1;
    for x in [-0.5, 0.0, 0.4] {
        let cfg = SdeConfig {
            source: VelocitySource::Khokhlov { length: 1.0 },
            nu,
            kappa: nu,
            x,
            t: 1.0,
            s: 0.5,
            steps: 200,
            n_paths: 10_000,
            seed: 1,
            record: vec![],
        };
        let ens = integrate_backward(&cfg)?;
        let v: Vec<f64> = ens.endpoints.iter().map(|&a| khokhlov_velocity(1.0, nu, a, 0.5)).collect();
        let (m, se) = mean_se(&v);
        println!("x = {x:+.1}: backward average {m:+.5} +- {se:.5}, velocity {:+.5}", khokhlov_velocity(1.0, nu, x, 1.0));
    }
    for kappa in [1e-2, 1e-3] {
        let r = escape_probability(1.0, 1.0, kappa, 1.0, 0.5, 20_000, 100, 2)?;
        println!(
            "stationary shock, kappa {kappa}: P(escape) = {:.4} >= {:.4}, left {:.3}",
            r.probability, r.lower_bound, r.left_fraction
        );
    }
    let r = khokhlov_escape(1.0, 1.0, 1e-3, 1.0, 0.5, 5_000, 200, 3)?;
    println!("Khokhlov shock: P(escape) = {:.4}, left {:.3}", r.probability, r.left_fraction);
    Ok(())
}
