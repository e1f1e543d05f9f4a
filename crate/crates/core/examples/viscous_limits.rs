//! Hopf-Cole solution, backward transition densities and their inviscid limit.
use burgers_lab::initial::InitialVelocity;
use burgers_lab::viscous::{khokhlov_velocity, limit_measure, LimitRequest, PointSelector, PotentialSource, ViscousSolution};

fn main() -> burgers_lab::Result<()> {
    let nu = 0.05;
    let v = ViscousSolution::new(InitialVelocity::khokhlov(1.0, nu, 0.5)?, nu)?;
    for x in [-0.5, -0.02, 0.0, 0.3] {
        println!("u({x}, 1) = {:+.10} closed form {:+.10}", v.velocity(x, 1.0)?, khokhlov_velocity(1.0, nu, x, 1.0));
    }
    let td = v.transition_density(0.5, 0.0, 1.0, PotentialSource::HopfCole)?;
    for (a, p, _) in td.profile(9)? {
        println!("  density({a:+.3}) = {p:.5}");
    }
    let family = |nu: f64| ViscousSolution::new(InitialVelocity::khokhlov(1.0, nu, 0.1)?, nu);
    let phi = |a: f64| a * a / (2.0 * 0.5) - a.abs() / 0.5;
    for selector in [PointSelector::Fixed, PointSelector::ShockFrame { p: 0.25 }] {
        let req = LimitRequest {
            family: &family,
            inviscid_potential: &phi,
            one_sided: (1.0, -1.0),
            x: 0.0,
            s: 0.5,
            t: 1.0,
            search: (-3.0, 3.0),
            selector,
            stay_label: Some(0.0),
            source: PotentialSource::Khokhlov,
        };
        let m = limit_measure(&req, &[0.1, 0.05, 0.02, 0.01])?;
        println!("{selector:?}: atoms {:?} weights {:?} decay exponent {:?}", m.atoms, m.weights, m.decay_exponent);
    }
    Ok(())
}
