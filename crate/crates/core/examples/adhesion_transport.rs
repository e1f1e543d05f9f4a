//! Density with atoms at shocks, scalar invariants and their anomalies.
use burgers_lab::dissipation::EntropyPair;
use burgers_lab::entropy::EntropySolution;
use burgers_lab::initial::InitialVelocity;
use burgers_lab::transport::{
    evolve_density, evolve_scalar, initial_invariant, momentum_anomaly, scalar_anomaly, scalar_invariant, weak_residual,
    window_at, Passive, TestBump,
};

fn main() -> burgers_lab::Result<()> {
    let sol = EntropySolution::new(InitialVelocity::sawtooth(1.0, 0.5)?, 3.0)?;
    let rho0 = Passive::Step { minus: 1.0, plus: 3.0 };
    let theta0 = Passive::Linear { intercept: 0.2, slope: 1.0 };
    let psi = EntropyPair::Square;
    let j0 = initial_invariant(&rho0, &theta0, &sol, &psi, -4.0, 4.0)?;
    for t in [0.7, 1.5, 2.5] {
        let m = evolve_density(&rho0, &sol, t)?;
        let (lo, hi) = window_at(&sol, -4.0, 4.0, t)?;
        let j = scalar_invariant(&m, &evolve_scalar(&theta0, &sol, t)?, &psi, lo, hi)?;
        let an = scalar_anomaly(&rho0, &theta0, &sol, &psi, t)?;
        for a in momentum_anomaly(&m)? {
            println!("t = {t}: atom mass {:.5}, momentum anomaly {:+.6} (balance {:+.6})", a.mass, a.second_form, a.flux_balance);
        }
        println!("        J change {:+.8}, lagrangian anomaly {:+.8}", j - j0, an.lagrangian);
    }
    let b = TestBump { xc: 0.0, tc: 1.5, rx: 0.8, rt: 0.5 };
    let r = weak_residual(&sol, &rho0, &theta0, &b)?;
    println!(
        "weak residuals: density {:.1e}, product {:+.6} (shock {:+.6}), scalar {:.1e}",
        r.density, r.product, r.product_predicted, r.scalar
    );
    Ok(())
}
