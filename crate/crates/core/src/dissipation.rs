//! Convex entropies, Bregman divergences and dissipation anomalies at shocks.

use crate::entropy::{EntropySolution, ShockState};
use crate::error::{invalid, Error, Result};
use crate::initial::InitialVelocity;
use crate::quad::{integrate_split, Tol};
use serde::{Deserialize, Serialize};

/// A convex entropy `psi` with its flux `J(u) = int_0^u v psi'(v) dv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntropyPair {
    /// `psi = u`
    Momentum,
    /// `psi = -u`
    NegMomentum,
    /// `psi = u^2 / 2`
    Energy,
    /// `psi = u^2`
    Square,
    /// `psi = u^4`
    Quartic,
    /// `psi = |u|`
    Abs,
    /// Piecewise-linear interpolant of convex samples, extended linearly.
    Sampled { grid: Vec<f64>, values: Vec<f64> },
}

impl EntropyPair {
    pub fn sampled(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return invalid("sampled entropy needs matching grid/values");
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("sampled entropy grid must increase");
        }
        let slopes: Vec<f64> = (0..grid.len() - 1).map(|i| (values[i + 1] - values[i]) / (grid[i + 1] - grid[i])).collect();
        if slopes.windows(2).any(|w| w[1] < w[0] - 1e-12 * (1.0 + w[0].abs())) {
            return invalid("sampled entropy is not convex");
        }
        Ok(EntropyPair::Sampled { grid, values })
    }

    pub fn name(&self) -> String {
        match self {
            EntropyPair::Momentum => "u".into(),
            EntropyPair::NegMomentum => "-u".into(),
            EntropyPair::Energy => "u^2/2".into(),
            EntropyPair::Square => "u^2".into(),
            EntropyPair::Quartic => "u^4".into(),
            EntropyPair::Abs => "|u|".into(),
            EntropyPair::Sampled { grid, .. } => format!("sampled[{}]", grid.len()),
        }
    }

    fn seg(grid: &[f64], u: f64) -> usize {
        let n = grid.len();
        match grid.binary_search_by(|v| v.total_cmp(&u)) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    pub fn psi(&self, u: f64) -> f64 {
        match self {
            EntropyPair::Momentum => u,
            EntropyPair::NegMomentum => -u,
            EntropyPair::Energy => 0.5 * u * u,
            EntropyPair::Square => u * u,
            EntropyPair::Quartic => u.powi(4),
            EntropyPair::Abs => u.abs(),
            EntropyPair::Sampled { grid, values } => {
                let i = Self::seg(grid, u);
                let m = (values[i + 1] - values[i]) / (grid[i + 1] - grid[i]);
                values[i] + m * (u - grid[i])
            }
        }
    }

    /// Right derivative of `psi`.
    pub fn dpsi(&self, u: f64) -> f64 {
        match self {
            EntropyPair::Momentum => 1.0,
            EntropyPair::NegMomentum => -1.0,
            EntropyPair::Energy => u,
            EntropyPair::Square => 2.0 * u,
            EntropyPair::Quartic => 4.0 * u.powi(3),
            EntropyPair::Abs => {
                if u >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            EntropyPair::Sampled { grid, values } => {
                let i = Self::seg(grid, u);
                (values[i + 1] - values[i]) / (grid[i + 1] - grid[i])
            }
        }
    }

    /// Entropy flux `J(u) = int_0^u v psi'(v) dv`.
    pub fn flux(&self, u: f64) -> f64 {
        match self {
            EntropyPair::Momentum => 0.5 * u * u,
            EntropyPair::NegMomentum => -0.5 * u * u,
            EntropyPair::Energy => u * u * u / 3.0,
            EntropyPair::Square => 2.0 * u * u * u / 3.0,
            EntropyPair::Quartic => 0.8 * u.powi(5),
            EntropyPair::Abs => 0.5 * u * u.abs(),
            EntropyPair::Sampled { .. } => self.piecewise(u, |m, a, b| 0.5 * m * (b * b - a * a)),
        }
    }

    /// Primitive `int_0^u psi(v) dv`.
    pub fn primitive(&self, u: f64) -> f64 {
        match self {
            EntropyPair::Momentum => 0.5 * u * u,
            EntropyPair::NegMomentum => -0.5 * u * u,
            EntropyPair::Energy => u * u * u / 6.0,
            EntropyPair::Square => u * u * u / 3.0,
            EntropyPair::Quartic => 0.2 * u.powi(5),
            EntropyPair::Abs => 0.5 * u * u.abs(),
            EntropyPair::Sampled { .. } => self.piecewise(u, |_, a, b| 0.5 * (self.psi(a) + self.psi(b)) * (b - a)),
        }
    }

    fn piecewise(&self, u: f64, piece: impl Fn(f64, f64, f64) -> f64) -> f64 {
        let EntropyPair::Sampled { grid, .. } = self else { unreachable!() };
        let (lo, hi, sign) = if u >= 0.0 { (0.0, u, 1.0) } else { (u, 0.0, -1.0) };
        let mut pts = vec![lo];
        pts.extend(grid.iter().copied().filter(|&g| g > lo && g < hi));
        pts.push(hi);
        let mut s = 0.0;
        for w in pts.windows(2) {
            s += piece(self.dpsi(0.5 * (w[0] + w[1])), w[0], w[1]);
        }
        sign * s
    }

    /// Points where `psi` is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            EntropyPair::Abs => vec![0.0],
            EntropyPair::Sampled { grid, .. } => grid.clone(),
            _ => vec![],
        }
    }
}

/// `psi(u*) - psi(u) - psi'(u) (u* - u)`.
pub fn bregman(pair: &EntropyPair, u_star: f64, u: f64) -> f64 {
    pair.psi(u_star) - pair.psi(u) - pair.dpsi(u) * (u_star - u)
}

/// `int_a^b psi(u0(a)) da`.
pub fn data_integral(pair: &EntropyPair, u0: &InitialVelocity, a: f64, b: f64) -> Result<f64> {
    let breaks: Vec<f64> = u0.breakpoints().into_iter().filter(|&p| p > a && p < b).collect();
    integrate_split(|s| pair.psi(u0.velocity(s)), a, b, &breaks, Tol::tight())
}

#[derive(Clone, Debug, Serialize)]
pub struct ShockRate {
    pub id: usize,
    pub x: f64,
    pub rate: f64,
    pub jump_term: f64,
    pub bregman_term: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateReport {
    pub t: f64,
    pub total: f64,
    pub shocks: Vec<ShockRate>,
}

/// Dissipation rate from the uniformized-velocity integral over each shock interval.
pub fn instantaneous_rate(sol: &EntropySolution, pair: &EntropyPair, t: f64) -> Result<RateReport> {
    sol.require_regular_time(t)?;
    let tau = t - sol.t0();
    if tau <= 0.0 {
        return invalid("rate needs t > t0");
    }
    let mut shocks = Vec::new();
    for s in sol.shocks_at(t)? {
        let us = s.speed();
        let breaks: Vec<f64> = pair.kinks().iter().map(|v| s.x - tau * v).collect();
        let ua = |a: f64| (s.x - a) / tau;
        let jump = integrate_split(|a| pair.psi(us) - pair.psi(ua(a)), s.a_minus, s.a_plus, &breaks, Tol::tight())?;
        let breg = integrate_split(|a| bregman(pair, us, ua(a)), s.a_minus, s.a_plus, &breaks, Tol::tight())?;
        let (jump, breg) = (jump / tau, -breg / tau);
        shocks.push(ShockRate { id: s.id, x: s.x, rate: jump + breg, jump_term: jump, bregman_term: breg });
    }
    let total = shocks.iter().map(|r| r.rate).sum();
    Ok(RateReport { t, total, shocks })
}

/// Per-shock Eulerian rate `u*(psi(u-) - psi(u+)) - (J(u-) - J(u+))`.
pub fn eulerian_shock_rate(pair: &EntropyPair, s: &ShockState) -> f64 {
    let (um, up) = (s.u_minus, s.u_plus);
    s.speed() * (pair.psi(um) - pair.psi(up)) - (pair.flux(um) - pair.flux(up))
}

pub fn eulerian_rate(sol: &EntropySolution, pair: &EntropyPair, t: f64) -> Result<RateReport> {
    sol.require_regular_time(t)?;
    let shocks: Vec<ShockRate> = sol
        .shocks_at(t)?
        .iter()
        .map(|s| {
            let r = eulerian_shock_rate(pair, s);
            ShockRate { id: s.id, x: s.x, rate: r, jump_term: f64::NAN, bregman_term: f64::NAN }
        })
        .collect();
    Ok(RateReport { t, total: shocks.iter().map(|r| r.rate).sum(), shocks })
}

/// `int psi(u) dx - int psi(u0) da` accumulated by all shocks alive at `t`.
pub fn lagrangian_anomaly(sol: &EntropySolution, pair: &EntropyPair, t: f64) -> Result<f64> {
    let tau = t - sol.t0();
    let mut total = 0.0;
    for s in sol.shocks_at(t)? {
        let data = data_integral(pair, sol.initial(), s.a_minus, s.a_plus)?;
        total -= data - tau * (pair.primitive(s.u_minus) - pair.primitive(s.u_plus));
    }
    Ok(total)
}

/// Time integral of the Eulerian rate over `[ta, tb]`.
pub fn integrated_eulerian(sol: &EntropySolution, pair: &EntropyPair, ta: f64, tb: f64) -> Result<f64> {
    let breaks: Vec<f64> = sol.tree().event_times();
    let err: std::cell::RefCell<Option<Error>> = Default::default();
    let v = integrate_split(
        |t| {
            let r: Result<f64> =
                sol.tree().live_at(t).into_iter().map(|id| sol.segment_state(id, t).map(|s| eulerian_shock_rate(pair, &s))).sum();
            r.unwrap_or_else(|e| {
                err.borrow_mut().get_or_insert(e);
                0.0
            })
        },
        ta,
        tb,
        &breaks,
        Tol { abs: 1e-11, rel: 1e-10 },
    )?;
    match err.into_inner() {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// The interpolating quantity `Delta_psi(s)` for the shock `shock_id` alive at the last grid time.
///
/// Labels inside live descendant shocks carry the uniformized velocity, the rest carry `u0`.
pub fn delta_psi_profile(sol: &EntropySolution, pair: &EntropyPair, shock_id: usize, s_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    let Some(&t) = s_grid.last() else {
        return invalid("empty time grid");
    };
    if s_grid.windows(2).any(|w| w[1] < w[0]) {
        return invalid("time grid must be ascending");
    }
    let fin = sol.segment_state(shock_id, t)?;
    let u0 = sol.initial();
    let total = data_integral(pair, u0, fin.a_minus, fin.a_plus)?;
    let t0 = sol.t0();
    let mut out = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        if s < t0 || s > t {
            return Err(Error::OutOfSupport { t: s, lo: t0, hi: t });
        }
        let tau = s - t0;
        let mut v = total;
        if tau > 0.0 {
            for id in sol.tree().descendants_live_at(shock_id, s) {
                let st = sol.segment_state(id, s)?;
                let (vm, vp) = ((st.x - st.a_minus) / tau, (st.x - st.a_plus) / tau);
                v += tau * (pair.primitive(vm) - pair.primitive(vp));
                v -= data_integral(pair, u0, st.a_minus, st.a_plus)?;
            }
        }
        out.push((s, v));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fluxes_match_quadrature() {
        for p in [EntropyPair::Energy, EntropyPair::Quartic, EntropyPair::Abs, EntropyPair::Square] {
            for &u in &[-1.3, 0.4, 2.0] {
                let j = crate::quad::integrate_split(|v| v * p.dpsi(v), 0.0, u, &[0.0], Tol::tight()).unwrap();
                assert!((j - p.flux(u)).abs() < 1e-12);
                let q = crate::quad::integrate_split(|v| p.psi(v), 0.0, u, &[0.0], Tol::tight()).unwrap();
                assert!((q - p.primitive(u)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sampled_pair_matches_abs() {
        let s = EntropyPair::sampled(vec![-2.0, 0.0, 2.0], vec![2.0, 0.0, 2.0]).unwrap();
        for &u in &[-1.5, -0.2, 0.7, 3.0] {
            assert!((s.psi(u) - u.abs()).abs() < 1e-15);
            assert!((s.flux(u) - EntropyPair::Abs.flux(u)).abs() < 1e-14);
            assert!((s.primitive(u) - EntropyPair::Abs.primitive(u)).abs() < 1e-14);
        }
        assert!(EntropyPair::sampled(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 1.5]).is_err());
    }

    #[test]
    fn riemann_energy_rate() {
        let sol = EntropySolution::new(InitialVelocity::riemann(1.0, -1.0), 10.0).unwrap();
        let e = eulerian_rate(&sol, &EntropyPair::Energy, 1.0).unwrap();
        assert!((e.total + 2.0 / 3.0).abs() < 1e-14);
    }
}
