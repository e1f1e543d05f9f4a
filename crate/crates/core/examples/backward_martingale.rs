//! Backward paths off a sawtooth shock and their martingale checks.
use burgers_lab::backward::{verify_martingale, BranchLaw};
use burgers_lab::entropy::EntropySolution;
use burgers_lab::initial::InitialVelocity;

fn main() -> burgers_lab::Result<()> {
    let (t0, tf) = (0.2, 2.0);
    let sol = EntropySolution::new(InitialVelocity::sawtooth(1.0, t0)?, tf)?;
    let law = BranchLaw::new(&sol, 0, t0, tf)?;
    println!("normalization {:.12}", law.normalization());
    let ens = law.sample_paths(&sol, 50_000, 1)?;
    let rep = verify_martingale(&ens, &sol, &[0.6, 0.9, 1.2, 1.5, 1.9], None)?;
    for m in &rep.unconditional {
        println!("t = {:.1}: mean velocity {:+.5} +- {:.5} (target {:+.5})", m.t, m.mean, m.se, m.target);
    }
    println!("{} conditional bins, max |z| = {:.2}, pass = {}", rep.conditional.len(), rep.max_abs_z, rep.pass);
    let mut out = Vec::new();
    ens.write_csv(&sol, &[0.5, 1.0, 1.5], &mut out)?;
    println!("{}", String::from_utf8_lossy(&out).lines().take(4).collect::<Vec<_>>().join("\n"));
    Ok(())
}
