//! Named initial data used by scenarios, examples and tests.

use crate::error::Result;
use crate::initial::InitialVelocity;

/// Two compressive dips whose shocks form at different times and later merge.
pub fn two_dip() -> Result<InitialVelocity> {
    InitialVelocity::sample_fn(two_dip_velocity, -6.0, 6.0, 1201)
}

pub fn two_dip_velocity(a: f64) -> f64 {
    -0.5 * ((a + 1.0) / 0.2).tanh() - 0.5 * ((a - 1.0) / 0.3).tanh()
}

/// Horizon that comfortably contains the merger of [`two_dip`].
pub const TWO_DIP_HORIZON: f64 = 3.0;

/// A single smooth compressive step.
pub fn tanh_step(width: f64, drift: f64) -> Result<InitialVelocity> {
    InitialVelocity::sample_fn(|a| drift - (a / width).tanh(), -8.0, 8.0, 801)
}

pub fn names() -> &'static [(&'static str, &'static str)] {
    &[
        ("riemann", "single jump u-=1, u+=-1 at the origin"),
        ("ramp", "compressive ramp of slope -1 on [-1, 1], focusing at t=1"),
        ("sawtooth", "inviscid sawtooth of length 1 at data time 0.2"),
        ("two_dip", "two tanh dips forming shocks at t=0.4 and t=0.6 that merge near t=2"),
        ("tanh_step", "smooth step -tanh(a/0.4)+0.3 forming one moving shock"),
    ]
}

pub fn by_name(name: &str) -> Result<InitialVelocity> {
    match name {
        "riemann" => Ok(InitialVelocity::riemann(1.0, -1.0)),
        "ramp" => Ok(InitialVelocity::linear_ramp(-1.0, 1.0)),
        "sawtooth" => InitialVelocity::sawtooth(1.0, 0.2),
        "two_dip" => two_dip(),
        "tanh_step" => tanh_step(0.4, 0.3),
        other => crate::error::invalid(format!("unknown preset `{other}`")),
    }
}
