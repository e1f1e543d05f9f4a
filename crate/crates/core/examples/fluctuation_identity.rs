//! Exponential average of the fluctuation functional along viscous trajectories.
use burgers_lab::monte_carlo::{fluctuation_check, FluctuationConfig, Gaussian, VelocitySource};

fn main() -> burgers_lab::Result<()> {
    for nu in [0.1, 0.2, 0.4] {
        let r = fluctuation_check(&FluctuationConfig {
            source: VelocitySource::Khokhlov { length: 1.0 },
            nu,
            t0: 0.5,
            tf: 1.0,
            rho0: Gaussian { mean: 0.0, std: 0.5 },
            rho_f: Gaussian { mean: 0.0, std: 0.3 },
            steps: 500,
            n_paths: 10_000,
            seed: 7,
            variance_cap: 1e6,
        })?;
        println!("nu {nu}: E[exp W] = {:.4} +- {:.4}, E[W] = {:+.4}", r.mean_exp_w, r.jackknife_error, r.mean_w);
    }
    Ok(())
}
