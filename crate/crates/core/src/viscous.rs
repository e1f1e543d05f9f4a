//! Viscous Burgers by Hopf-Cole quadrature, the Khokhlov sawtooth in closed form,
//! backward transition densities and their zero-viscosity limits.

use crate::error::{invalid, Error, Result};
use crate::initial::{ln_cosh, InitialVelocity, Profile};
use crate::quad::{brent, golden_min, integrate_split, Tol};
use serde::Serialize;
use statrs::function::erf::erfc;
use std::f64::consts::PI;

const SCAN: usize = 2048;
/// Log-weight drop beyond which the integrand is ignored (`e^-50` relative).
const CUTOFF: f64 = 50.0;
const PAD: f64 = 15.0;

pub fn khokhlov_velocity(length: f64, nu: f64, x: f64, t: f64) -> f64 {
    (x - length * (length * x / (2.0 * nu * t)).tanh()) / t
}

pub fn khokhlov_gradient(length: f64, nu: f64, x: f64, t: f64) -> f64 {
    let th = (length * x / (2.0 * nu * t)).tanh();
    (1.0 - length * length / (2.0 * nu * t) * (1.0 - th * th)) / t
}

/// Potential with `u = d/dx phi`; the additive gauge is fixed to zero at `x = 0`.
pub fn khokhlov_potential(length: f64, nu: f64, x: f64, t: f64) -> f64 {
    x * x / (2.0 * t) - 2.0 * nu * ln_cosh(length * x / (2.0 * nu * t))
}

pub fn khokhlov_potential_rate(length: f64, nu: f64, x: f64, t: f64) -> f64 {
    -x * x / (2.0 * t * t) + length * x / (t * t) * (length * x / (2.0 * nu * t)).tanh()
}

/// Inviscid limit of the Khokhlov profile away from `x = 0`.
pub fn sawtooth_velocity(length: f64, x: f64, t: f64) -> f64 {
    (x - length * x.signum()) / t
}

/// Stationary viscous shock `-U tanh(U x / 2 nu)` joining `U` to `-U`.
pub fn stationary_shock_velocity(amplitude: f64, nu: f64, x: f64) -> f64 {
    -amplitude * (amplitude * x / (2.0 * nu)).tanh()
}

/// Viscous solution issued from `initial` at `initial.t0`.
#[derive(Clone, Debug)]
pub struct ViscousSolution {
    initial: InitialVelocity,
    nu: f64,
}

/// Integration region for one log-weight profile.
struct Window {
    lo: f64,
    hi: f64,
    peak: f64,
    minima: Vec<f64>,
}

impl ViscousSolution {
    pub fn new(initial: InitialVelocity, nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return invalid("viscosity must be positive");
        }
        Ok(ViscousSolution { initial, nu })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn t0(&self) -> f64 {
        self.initial.t0
    }

    pub fn initial(&self) -> &InitialVelocity {
        &self.initial
    }

    /// Label range holding the backward mass from `(x, t)` to time `te`.
    fn label_range(&self, x: f64, t: f64, te: f64) -> (f64, f64) {
        let dt = t - te;
        match &self.initial.profile {
            Profile::Khokhlov { length, .. } | Profile::Sawtooth { length } => {
                let pad = PAD * (2.0 * self.nu * dt * te / t).sqrt() + 1e-12;
                ((x * te - dt * length) / t - pad, (x * te + dt * length) / t + pad)
            }
            _ => {
                let sup = self.initial.sup_abs().unwrap_or(0.0);
                let pad = PAD * (2.0 * self.nu * dt).sqrt() + 1e-12;
                (x - dt * sup - pad, x + dt * sup + pad)
            }
        }
    }

    /// Scans `f` (a negative log-weight) and returns the region within `CUTOFF` of its minimum.
    fn window(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> Window {
        let h = (hi - lo) / SCAN as f64;
        let v: Vec<f64> = (0..=SCAN).map(|i| f(lo + h * i as f64)).collect();
        let mut minima = Vec::new();
        for k in 1..SCAN {
            if v[k] <= v[k - 1] && v[k] <= v[k + 1] {
                let (a, _) =
                    golden_min(f, lo + h * (k - 1) as f64, lo + h * (k + 1) as f64, 1e-13 * (1.0 + lo.abs().max(hi.abs())));
                minima.push(a);
            }
        }
        let mut peak = v.iter().copied().fold(f64::INFINITY, f64::min);
        for &m in &minima {
            peak = peak.min(f(m));
        }
        let first = v.iter().position(|&e| e - peak < CUTOFF).unwrap_or(0);
        let last = v.iter().rposition(|&e| e - peak < CUTOFF).unwrap_or(SCAN);
        Window { lo: lo + h * first.saturating_sub(1) as f64, hi: lo + h * (last + 1).min(SCAN) as f64, peak, minima }
    }

    fn breaks(&self, w: &Window) -> Vec<f64> {
        let mut b = w.minima.clone();
        match &self.initial.profile {
            Profile::SmoothSampled { grid, .. } => b.extend(grid.iter().copied().filter(|&g| g > w.lo && g < w.hi)),
            _ => b.extend(self.initial.breakpoints().into_iter().filter(|&g| g > w.lo && g < w.hi)),
        }
        b
    }

    fn heat_exponent(&self, x: f64, tau: f64) -> impl Fn(f64) -> f64 + '_ {
        let nu = self.nu;
        move |a: f64| (x - a) * (x - a) / (4.0 * nu * tau) + self.initial.potential(a) / (2.0 * nu)
    }

    fn check_time(&self, t: f64) -> Result<f64> {
        let tau = t - self.initial.t0;
        if !(tau > 0.0) {
            return Err(Error::OutOfSupport { t, lo: self.initial.t0, hi: f64::INFINITY });
        }
        Ok(tau)
    }

    /// Velocity at `(x, t)` as the log-weight average of the data.
    pub fn velocity(&self, x: f64, t: f64) -> Result<f64> {
        let tau = self.check_time(t)?;
        let e = self.heat_exponent(x, tau);
        let (lo, hi) = self.label_range(x, t, self.initial.t0);
        let w = Self::window(&e, lo, hi);
        if !w.peak.is_finite() {
            return Err(Error::UnderflowAllWeights { x });
        }
        let br = self.breaks(&w);
        let tol = Tol { abs: 1e-300, rel: 1e-13 };
        let den = integrate_split(|a| (w.peak - e(a)).exp(), w.lo, w.hi, &br, tol)?;
        let num = integrate_split(
            |a| self.initial.velocity(a) * (w.peak - e(a)).exp(),
            w.lo,
            w.hi,
            &br,
            Tol { abs: 1e-14 * den, rel: 1e-13 },
        )?;
        if !(den > 0.0) {
            return Err(Error::UnderflowAllWeights { x });
        }
        Ok(num / den)
    }

    /// Potential `phi = -2 nu ln` of the heat solution, normalized so that `phi -> phi0` as `t -> t0`.
    pub fn potential(&self, x: f64, t: f64) -> Result<f64> {
        let tau = self.check_time(t)?;
        let e = self.heat_exponent(x, tau);
        let (lo, hi) = self.label_range(x, t, self.initial.t0);
        let w = Self::window(&e, lo, hi);
        let br = self.breaks(&w);
        let den = integrate_split(|a| (w.peak - e(a)).exp(), w.lo, w.hi, &br, Tol { abs: 1e-300, rel: 1e-13 })?;
        let log_heat = den.ln() - w.peak - 0.5 * (4.0 * PI * self.nu * tau).ln();
        Ok(-2.0 * self.nu * log_heat)
    }

    /// Potential at time `s`, exact data potential at `s = t0`.
    pub fn potential_at(&self, a: f64, s: f64) -> Result<f64> {
        if s == self.initial.t0 {
            Ok(self.initial.potential(a))
        } else {
            self.potential(a, s)
        }
    }

    /// Backward transition density from `(x, t)` to time `s`.
    pub fn transition_density(&self, s: f64, x: f64, t: f64, source: PotentialSource) -> Result<TransitionDensity> {
        TransitionDensity::new(self.clone(), s, x, t, source)
    }
}

/// Where the potential at the earlier time comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialSource {
    HopfCole,
    /// Closed form; requires Khokhlov data.
    Khokhlov,
}

/// Density over labels `a` at time `s` of the backward diffusion from `(x, t)`.
#[derive(Clone, Debug)]
pub struct TransitionDensity {
    base: ViscousSolution,
    pub s: f64,
    pub x: f64,
    pub t: f64,
    source: PotentialSource,
    /// Gauge shift added to the earlier potential (density must not depend on it).
    pub gauge: f64,
    pub lo: f64,
    pub hi: f64,
    pub log_normalizer: f64,
    pub minima: Vec<f64>,
    breaks: Vec<f64>,
    peak: f64,
}

impl TransitionDensity {
    pub fn new(base: ViscousSolution, s: f64, x: f64, t: f64, source: PotentialSource) -> Result<Self> {
        Self::with_gauge(base, s, x, t, source, 0.0)
    }

    pub fn with_gauge(base: ViscousSolution, s: f64, x: f64, t: f64, source: PotentialSource, gauge: f64) -> Result<Self> {
        if !(s >= base.t0() && s < t) {
            return Err(Error::OutOfSupport { t: s, lo: base.t0(), hi: t });
        }
        if source == PotentialSource::Khokhlov && !matches!(base.initial.profile, Profile::Khokhlov { .. }) {
            return invalid("closed-form potential needs Khokhlov data");
        }
        let mut d = TransitionDensity {
            base,
            s,
            x,
            t,
            source,
            gauge,
            lo: 0.0,
            hi: 0.0,
            log_normalizer: 0.0,
            minima: vec![],
            breaks: vec![],
            peak: 0.0,
        };
        let (lo, hi) = d.base.label_range(x, t, s);
        let err = std::cell::Cell::new(None);
        let f = |a: f64| match d.exponent(a) {
            Ok(v) => v,
            Err(e) => {
                err.set(Some(e));
                f64::INFINITY
            }
        };
        let w = ViscousSolution::window(&f, lo, hi);
        if let Some(e) = err.take() {
            return Err(e);
        }
        let mut breaks = w.minima.clone();
        if s == d.base.t0() {
            breaks.extend(d.base.breaks(&w));
        }
        let mass = integrate_split(|a| (w.peak - f(a)).exp(), w.lo, w.hi, &breaks, Tol { abs: 1e-300, rel: 1e-12 })?;
        if let Some(e) = err.take() {
            return Err(e);
        }
        if !(mass > 0.0) {
            return Err(Error::UnderflowAllWeights { x });
        }
        d.lo = w.lo;
        d.hi = w.hi;
        d.peak = w.peak;
        d.minima = w.minima;
        d.breaks = breaks;
        d.log_normalizer = mass.ln() - w.peak;
        Ok(d)
    }

    fn earlier_potential(&self, a: f64) -> Result<f64> {
        let v = match self.source {
            PotentialSource::HopfCole => self.base.potential_at(a, self.s)?,
            PotentialSource::Khokhlov => {
                let Profile::Khokhlov { length, viscosity } = self.base.initial.profile else {
                    unreachable!("checked at construction")
                };
                khokhlov_potential(length, viscosity, a, self.s)
            }
        };
        Ok(v + self.gauge)
    }

    /// Negative log of the unnormalized density.
    pub fn exponent(&self, a: f64) -> Result<f64> {
        let dt = self.t - self.s;
        Ok(((self.x - a) * (self.x - a) / (2.0 * dt) + self.earlier_potential(a)?) / (2.0 * self.base.nu))
    }

    pub fn log_density(&self, a: f64) -> Result<f64> {
        Ok(-self.exponent(a)? - self.log_normalizer)
    }

    pub fn density(&self, a: f64) -> Result<f64> {
        Ok(self.log_density(a)?.exp())
    }

    /// `int_lo^hi f(a) density(a) da`, clipped to the support window.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, lo: f64, hi: f64) -> Result<f64> {
        let (lo, hi) = (lo.max(self.lo), hi.min(self.hi));
        if hi <= lo {
            return Ok(0.0);
        }
        let err = std::cell::Cell::new(None);
        let g = |a: f64| match self.log_density(a) {
            Ok(l) => f(a) * l.exp(),
            Err(e) => {
                err.set(Some(e));
                0.0
            }
        };
        let v = integrate_split(g, lo, hi, &self.breaks, Tol { abs: 1e-15, rel: 1e-11 })?;
        if let Some(e) = err.take() {
            return Err(e);
        }
        Ok(v)
    }

    pub fn mass(&self, lo: f64, hi: f64) -> Result<f64> {
        self.integrate(|_| 1.0, lo, hi)
    }

    /// Total mass with the Gaussian prefactor and the potential difference, without numerical normalization.
    ///
    /// Only the Hopf-Cole gauge makes this exactly one.
    pub fn analytic_mass(&self) -> Result<f64> {
        if self.source != PotentialSource::HopfCole {
            return invalid("analytic normalization needs the Hopf-Cole potential");
        }
        let nu = self.base.nu;
        let phi_xt = match self.source {
            PotentialSource::HopfCole => self.base.potential(self.x, self.t)?,
            PotentialSource::Khokhlov => {
                let Profile::Khokhlov { length, viscosity } = self.base.initial.profile else {
                    unreachable!("checked at construction")
                };
                khokhlov_potential(length, viscosity, self.x, self.t)
            }
        } + self.gauge;
        let log_pref = phi_xt / (2.0 * nu) - 0.5 * (4.0 * PI * nu * (self.t - self.s)).ln();
        Ok((self.log_normalizer + log_pref).exp())
    }

    /// `E[u(a, s)]` under the density, the right side of the fixed-point identity.
    pub fn mean_velocity(&self) -> Result<f64> {
        let err = std::cell::Cell::new(None);
        let v = self.integrate(
            |a| {
                let r = if self.s == self.base.t0() {
                    Ok(self.base.initial.velocity(a))
                } else {
                    match self.source {
                        PotentialSource::Khokhlov => {
                            let Profile::Khokhlov { length, viscosity } = self.base.initial.profile else {
                                unreachable!("checked at construction")
                            };
                            Ok(khokhlov_velocity(length, viscosity, a, self.s))
                        }
                        PotentialSource::HopfCole => self.base.velocity(a, self.s),
                    }
                };
                r.unwrap_or_else(|e| {
                    err.set(Some(e));
                    0.0
                })
            },
            self.lo,
            self.hi,
        )?;
        if let Some(e) = err.take() {
            return Err(e);
        }
        Ok(v)
    }

    /// Rows `(a, density, log_density)` on a uniform grid over the support window.
    pub fn profile(&self, n: usize) -> Result<Vec<(f64, f64, f64)>> {
        (0..n)
            .map(|i| {
                let a = self.lo + (self.hi - self.lo) * i as f64 / (n.max(2) - 1) as f64;
                let l = self.log_density(a)?;
                Ok((a, l.exp(), l))
            })
            .collect()
    }
}

/// Closed-form backward transition law of the Khokhlov solution: a two-Gaussian mixture.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct KhokhlovTransition {
    pub means: [f64; 2],
    pub weights: [f64; 2],
    pub variance: f64,
}

impl KhokhlovTransition {
    pub fn new(length: f64, nu: f64, s: f64, x: f64, t: f64) -> Self {
        let m = x * s / t;
        let v = 2.0 * nu * s * (t - s) / t;
        let k = length / (2.0 * nu * s);
        let (lp, lm) = (k * m, -k * m);
        let top = lp.max(lm);
        let (wp, wm) = ((lp - top).exp(), (lm - top).exp());
        KhokhlovTransition { means: [m - k * v, m + k * v], weights: [wm / (wp + wm), wp / (wp + wm)], variance: v }
    }

    pub fn density(&self, a: f64) -> f64 {
        let norm = 1.0 / (2.0 * PI * self.variance).sqrt();
        (0..2).map(|i| self.weights[i] * norm * (-(a - self.means[i]).powi(2) / (2.0 * self.variance)).exp()).sum()
    }

    pub fn cdf(&self, a: f64) -> f64 {
        (0..2).map(|i| self.weights[i] * 0.5 * erfc(-(a - self.means[i]) / (2.0 * self.variance).sqrt())).sum()
    }
}

/// How the terminal point approaches the shock as viscosity decreases.
#[derive(Clone, Copy, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PointSelector {
    /// Fixed terminal point.
    Fixed,
    /// Terminal point where the viscous velocity equals `p u- + (1 - p) u+`.
    ShockFrame { p: f64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct Atom {
    pub a: f64,
    pub weight: f64,
    pub window: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitRow {
    pub nu: f64,
    pub x_nu: f64,
    pub atoms: Vec<Atom>,
    pub residual: f64,
    /// Density at the label that stays on the shock, when one is given.
    pub stay_density: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitMeasure {
    pub x: f64,
    pub s: f64,
    pub t: f64,
    /// Minimizers of the inviscid backward action.
    pub atoms: Vec<f64>,
    pub rows: Vec<LimitRow>,
    /// Weights at the smallest viscosity.
    pub weights: Vec<f64>,
    /// Linear extrapolation of the weights to zero viscosity from the two smallest values.
    pub extrapolated: Vec<f64>,
    /// Fitted `c` in `stay_density ~ nu^(-1/2) exp(-c / nu)`.
    pub decay_exponent: Option<f64>,
}

/// Inputs for [`limit_measure`].
pub struct LimitRequest<'a> {
    /// Family member at viscosity `nu`.
    pub family: &'a dyn Fn(f64) -> Result<ViscousSolution>,
    /// Inviscid potential at time `s`.
    pub inviscid_potential: &'a dyn Fn(f64) -> f64,
    /// One-sided inviscid velocities at `(x, t)`, used by the shock-frame selector.
    pub one_sided: (f64, f64),
    pub x: f64,
    pub s: f64,
    pub t: f64,
    /// Label range searched for minimizers.
    pub search: (f64, f64),
    pub selector: PointSelector,
    pub stay_label: Option<f64>,
    pub source: PotentialSource,
}

/// Minimizers of `f` on `[lo, hi]`, with ties to a relative tolerance.
pub fn argmin_set(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, n: usize, tie: f64) -> Vec<f64> {
    let h = (hi - lo) / n as f64;
    let v: Vec<f64> = (0..=n).map(|i| f(lo + h * i as f64)).collect();
    let mut cands = Vec::new();
    for k in 0..=n {
        let l = if k > 0 { v[k - 1] } else { f64::INFINITY };
        let r = if k < n { v[k + 1] } else { f64::INFINITY };
        if v[k] <= l && v[k] <= r {
            let a0 = lo + h * k.saturating_sub(1) as f64;
            let a1 = lo + h * (k + 1).min(n) as f64;
            cands.push(golden_min(f, a0, a1, 1e-12 * (1.0 + a0.abs().max(a1.abs()))));
        }
    }
    let best = cands.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let mut out: Vec<f64> = cands.iter().filter(|c| c.1 <= best + tie * (1.0 + best.abs())).map(|c| c.0).collect();
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() < 4.0 * h);
    out
}

/// Atom weights of the backward transition law along a decreasing viscosity sequence.
pub fn limit_measure(req: &LimitRequest, nus: &[f64]) -> Result<LimitMeasure> {
    if nus.is_empty() || nus.windows(2).any(|w| w[1] >= w[0]) {
        return invalid("viscosity sequence must be non-empty and decreasing");
    }
    let (x, s, t) = (req.x, req.s, req.t);
    let dt = t - s;
    let action = |a: f64| (x - a) * (x - a) / (2.0 * dt) + (req.inviscid_potential)(a);
    let atoms = argmin_set(&action, req.search.0, req.search.1, 8192, 1e-9);
    if atoms.is_empty() {
        return invalid("no minimizer of the backward action in the search range");
    }
    let curvature: Vec<f64> = atoms
        .iter()
        .map(|&a| {
            let h = 1e-4 * (1.0 + a.abs());
            ((action(a + h) - 2.0 * action(a) + action(a - h)) / (h * h)).max(1e-12)
        })
        .collect();
    let gaps: Vec<f64> = atoms.windows(2).map(|w| w[1] - w[0]).collect();
    let scale = 1.0 + atoms.iter().fold(0.0f64, |m, a| m.max(a.abs())) + x.abs();
    let mut rows = Vec::new();
    for &nu in nus {
        let v = (req.family)(nu)?;
        let x_nu = match req.selector {
            PointSelector::Fixed => x,
            PointSelector::ShockFrame { p } => {
                let target = p * req.one_sided.0 + (1.0 - p) * req.one_sided.1;
                let g = |z: f64| v.velocity(z, t).map(|u| u - target).unwrap_or(f64::NAN);
                let mut span = 0.5 * nu / (req.one_sided.0 - req.one_sided.1).abs();
                let mut found = None;
                for _ in 0..60 {
                    if g(x - span) * g(x + span) <= 0.0 {
                        found = Some(brent(g, x - span, x + span, 1e-14 * scale)?);
                        break;
                    }
                    span *= 1.5;
                }
                found.ok_or_else(|| Error::RootNotConverged(format!("no shock-frame point near x = {x}")))?
            }
        };
        let td = TransitionDensity::new(v, s, x_nu, t, req.source)?;
        let mut out = Vec::new();
        for (i, &a) in atoms.iter().enumerate() {
            let sigma = (2.0 * nu / curvature[i]).sqrt();
            let mut delta = (6.0 * sigma).max(1e-3 * scale);
            let near = [i.checked_sub(1).map(|j| gaps[j]), gaps.get(i).copied()];
            let sep = near.iter().flatten().fold(f64::INFINITY, |m: f64, g| m.min(*g));
            if delta > 0.45 * sep {
                delta = 0.45 * sep;
                if delta < 2.0 * sigma {
                    return Err(Error::AtomWindowOverlap { separation: sep, min_window: 2.0 * sigma });
                }
            }
            out.push(Atom { a, weight: td.mass(a - delta, a + delta)?, window: delta });
        }
        let residual = 1.0 - out.iter().map(|a| a.weight).sum::<f64>();
        let stay_density = req.stay_label.map(|a| td.density(a)).transpose()?;
        rows.push(LimitRow { nu, x_nu, atoms: out, residual, stay_density });
    }
    let last = rows.last().expect("non-empty");
    let weights: Vec<f64> = last.atoms.iter().map(|a| a.weight).collect();
    let extrapolated = if rows.len() >= 2 {
        let prev = &rows[rows.len() - 2];
        let (n1, n2) = (prev.nu, last.nu);
        (0..weights.len())
            .map(|i| {
                let (w1, w2) = (prev.atoms[i].weight, last.atoms[i].weight);
                w2 - n2 * (w1 - w2) / (n1 - n2)
            })
            .collect()
    } else {
        weights.clone()
    };
    let decay_exponent = if rows.len() >= 2 && rows.iter().all(|r| r.stay_density.is_some_and(|d| d > 0.0)) {
        let xs: Vec<f64> = rows.iter().map(|r| 1.0 / r.nu).collect();
        let ys: Vec<f64> = rows.iter().map(|r| (r.stay_density.unwrap_or(0.0) * r.nu.sqrt()).ln()).collect();
        Some(-crate::stats::linear_fit(&xs, &ys).slope)
    } else {
        None
    };
    Ok(LimitMeasure { x, s, t, atoms, rows, weights, extrapolated, decay_exponent })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn khokhlov_closed_forms() {
        assert_eq!(khokhlov_velocity(1.0, 0.1, 0.0, 1.0), 0.0);
        assert!((khokhlov_velocity(1.0, 0.05, 2.0, 1.0) - (2.0 - 20f64.tanh())).abs() < 1e-15);
        assert!((khokhlov_velocity(1.0, 1e-6, 0.5, 2.0) + 0.25).abs() < 1e-12);
        let h = 1e-6;
        let (x, t) = (0.3, 0.8);
        let fd = (khokhlov_potential(1.0, 0.1, x + h, t) - khokhlov_potential(1.0, 0.1, x - h, t)) / (2.0 * h);
        assert!((fd - khokhlov_velocity(1.0, 0.1, x, t)).abs() < 1e-8);
        let ft = (khokhlov_potential(1.0, 0.1, x, t + h) - khokhlov_potential(1.0, 0.1, x, t - h)) / (2.0 * h);
        assert!((ft - khokhlov_potential_rate(1.0, 0.1, x, t)).abs() < 1e-7);
    }

    #[test]
    fn mixture_cdf_normalized() {
        let k = KhokhlovTransition::new(1.0, 0.05, 0.5, 0.1, 1.0);
        assert!((k.cdf(10.0) - 1.0).abs() < 1e-12 && k.cdf(-10.0).abs() < 1e-12);
        assert!((k.weights[0] + k.weights[1] - 1.0).abs() < 1e-15);
    }
}
