//! Entropy dissipation at shocks in Lagrangian and Eulerian form.
use burgers_lab::dissipation::{delta_psi_profile, eulerian_rate, instantaneous_rate, EntropyPair};
use burgers_lab::entropy::EntropySolution;
use burgers_lab::initial::InitialVelocity;

fn main() -> burgers_lab::Result<()> {
    let sol = EntropySolution::new(InitialVelocity::riemann(1.0, -1.0), 2.0)?;
    for pair in [EntropyPair::Momentum, EntropyPair::Energy, EntropyPair::Quartic, EntropyPair::Abs] {
        let lag = instantaneous_rate(&sol, &pair, 1.0)?;
        let eul = eulerian_rate(&sol, &pair, 1.0)?;
        println!("{:>8}: lagrangian {:+.10}  eulerian {:+.10}", pair.name(), lag.total, eul.total);
    }
    let ramp = EntropySolution::new(InitialVelocity::linear_ramp(-1.0, 1.0), 3.0)?;
    let grid: Vec<f64> = (1..=12).map(|i| 0.25 * i as f64).collect();
    for (s, v) in delta_psi_profile(&ramp, &EntropyPair::Square, 0, &grid)? {
        println!("delta_psi({s:.2}) = {v:.6}");
    }
    Ok(())
}
