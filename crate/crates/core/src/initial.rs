//! Initial velocity profiles and their potentials.

use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};

/// Closed-form or tabulated initial velocity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// Step from `u_minus` (left) to `u_plus` (right) at the origin.
    Riemann { u_minus: f64, u_plus: f64 },
    /// `slope * clamp(a, -half_width, half_width)`.
    LinearRamp {
        slope: f64,
        #[serde(default = "one")]
        half_width: f64,
    },
    /// Inviscid Khokhlov tooth at the data time: `(a - L sign a) / t0`.
    Sawtooth { length: f64 },
    /// Viscous Khokhlov profile at the data time.
    Khokhlov { length: f64, viscosity: f64 },
    /// Monotone cubic (Fritsch-Carlson) interpolant, constant outside the grid.
    SmoothSampled { grid: Vec<f64>, values: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
    phi: Vec<f64>,
}

impl Pchip {
    fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 3 || y.len() != n {
            return invalid("sampled profile needs matching grid/values with at least 3 points");
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("sampled grid must be strictly increasing");
        }
        if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return invalid("sampled profile contains non-finite entries");
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let del: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            if del[i - 1] * del[i] > 0.0 {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                d[i] = (w1 + w2) / (w1 / del[i - 1] + w2 / del[i]);
            }
        }
        d[0] = end_slope(h[0], h[1], del[0], del[1]);
        d[n - 1] = end_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
        let mut p = Pchip { x, y, d, phi: vec![0.0; n] };
        for i in 0..n - 1 {
            p.phi[i + 1] = p.phi[i] + p.cell_integral(i, 1.0);
        }
        Ok(p)
    }

    fn cell(&self, a: f64) -> usize {
        match self.x.binary_search_by(|v| v.total_cmp(&a)) {
            Ok(i) => i.min(self.x.len() - 2),
            Err(i) => (i - 1).min(self.x.len() - 2),
        }
    }

    fn cell_integral(&self, i: usize, s: f64) -> f64 {
        let h = self.x[i + 1] - self.x[i];
        let (s2, s3, s4) = (s * s, s * s * s, s * s * s * s);
        let i00 = s4 / 2.0 - s3 + s;
        let i10 = s4 / 4.0 - 2.0 * s3 / 3.0 + s2 / 2.0;
        let i01 = -s4 / 2.0 + s3;
        let i11 = s4 / 4.0 - s3 / 3.0;
        h * (self.y[i] * i00 + h * self.d[i] * i10 + self.y[i + 1] * i01 + h * self.d[i + 1] * i11)
    }

    fn eval(&self, a: f64) -> (f64, f64, f64) {
        let n = self.x.len();
        if a <= self.x[0] {
            return (self.y[0], 0.0, self.y[0] * (a - self.x[0]));
        }
        if a >= self.x[n - 1] {
            return (self.y[n - 1], 0.0, self.phi[n - 1] + self.y[n - 1] * (a - self.x[n - 1]));
        }
        let i = self.cell(a);
        let h = self.x[i + 1] - self.x[i];
        let s = (a - self.x[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let u = self.y[i] * (2.0 * s3 - 3.0 * s2 + 1.0)
            + h * self.d[i] * (s3 - 2.0 * s2 + s)
            + self.y[i + 1] * (-2.0 * s3 + 3.0 * s2)
            + h * self.d[i + 1] * (s3 - s2);
        let du = (self.y[i] * (6.0 * s2 - 6.0 * s)
            + h * self.d[i] * (3.0 * s2 - 4.0 * s + 1.0)
            + self.y[i + 1] * (-6.0 * s2 + 6.0 * s)
            + h * self.d[i + 1] * (3.0 * s2 - 2.0 * s))
            / h;
        (u, du, self.phi[i] + self.cell_integral(i, s))
    }

    /// Local minima of the (piecewise quadratic) derivative.
    fn gradient_minima(&self) -> Vec<(f64, f64)> {
        let n = self.x.len();
        let mut cand: Vec<(f64, f64)> = Vec::new();
        for i in 0..n - 1 {
            let (lo, hi) = (self.x[i], self.x[i + 1]);
            let mut pts = vec![lo, hi];
            // derivative is quadratic in s; its vertex
            let h = hi - lo;
            let c2 = 6.0 * self.y[i] + 3.0 * h * self.d[i] - 6.0 * self.y[i + 1] + 3.0 * h * self.d[i + 1];
            let c1 = -6.0 * self.y[i] - 4.0 * h * self.d[i] + 6.0 * self.y[i + 1] - 2.0 * h * self.d[i + 1];
            if c2 > 0.0 {
                let s = -c1 / (2.0 * c2);
                if s > 0.0 && s < 1.0 {
                    pts.push(lo + s * h);
                }
            }
            for p in pts {
                cand.push((p, self.eval(p).1));
            }
        }
        cand.sort_by(|a, b| a.0.total_cmp(&b.0));
        cand.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-14);
        let mut out = Vec::new();
        for k in 0..cand.len() {
            let g = cand[k].1;
            let left = if k > 0 { cand[k - 1].1 } else { f64::INFINITY };
            let right = if k + 1 < cand.len() { cand[k + 1].1 } else { f64::INFINITY };
            if g < 0.0 && g <= left && g < right {
                out.push(cand[k]);
            }
        }
        // minima inside one compression dip are pooled into the deepest
        let mut pooled: Vec<(f64, f64)> = Vec::new();
        for m in out {
            if let Some(p) = pooled.last_mut() {
                let ceiling = 0.5 * p.1.max(m.1);
                let peak = (1..64).map(|j| self.eval(p.0 + (m.0 - p.0) * j as f64 / 64.0).1).fold(f64::NEG_INFINITY, f64::max);
                if peak < ceiling {
                    if m.1 < p.1 {
                        *p = m;
                    }
                    continue;
                }
            }
            pooled.push(m);
        }
        pooled
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

/// Initial velocity `u0` at the data time `t0`, with its potential `phi0` (`phi0' = u0`).
#[derive(Clone, Debug, PartialEq)]
pub struct InitialVelocity {
    pub profile: Profile,
    pub t0: f64,
    pub potential_offset: f64,
    pchip: Option<Pchip>,
}

#[derive(Serialize, Deserialize)]
struct InitialVelocityFile {
    #[serde(flatten)]
    profile: Profile,
    #[serde(default)]
    t0: f64,
    #[serde(default)]
    potential_offset: f64,
}

impl Serialize for InitialVelocity {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        InitialVelocityFile { profile: self.profile.clone(), t0: self.t0, potential_offset: self.potential_offset }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for InitialVelocity {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = InitialVelocityFile::deserialize(d)?;
        InitialVelocity::with_time(f.profile, f.t0).map(|v| v.with_offset(f.potential_offset)).map_err(serde::de::Error::custom)
    }
}

impl InitialVelocity {
    pub fn riemann(u_minus: f64, u_plus: f64) -> Self {
        Self::with_time(Profile::Riemann { u_minus, u_plus }, 0.0).expect("finite riemann data")
    }

    pub fn linear_ramp(slope: f64, half_width: f64) -> Self {
        Self::with_time(Profile::LinearRamp { slope, half_width }, 0.0).expect("valid ramp")
    }

    pub fn sawtooth(length: f64, t0: f64) -> Result<Self> {
        Self::with_time(Profile::Sawtooth { length }, t0)
    }

    pub fn khokhlov(length: f64, viscosity: f64, t0: f64) -> Result<Self> {
        Self::with_time(Profile::Khokhlov { length, viscosity }, t0)
    }

    pub fn sampled(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::with_time(Profile::SmoothSampled { grid, values }, 0.0)
    }

    /// Samples `f` on a uniform grid of `n` points over `[lo, hi]`.
    pub fn sample_fn(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Result<Self> {
        let grid: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let values = grid.iter().map(|&a| f(a)).collect();
        Self::sampled(grid, values)
    }

    pub fn with_time(profile: Profile, t0: f64) -> Result<Self> {
        if !t0.is_finite() {
            return invalid("t0 must be finite");
        }
        let pchip = match &profile {
            Profile::Riemann { u_minus, u_plus } => {
                if !(u_minus.is_finite() && u_plus.is_finite()) {
                    return invalid("riemann states must be finite");
                }
                None
            }
            Profile::LinearRamp { slope, half_width } => {
                if !slope.is_finite() || !(*half_width > 0.0) || !half_width.is_finite() {
                    return invalid("ramp needs finite slope and positive half width");
                }
                None
            }
            Profile::Sawtooth { length } => {
                if !(*length > 0.0) || !(t0 > 0.0) {
                    return invalid("sawtooth needs L > 0 and t0 > 0");
                }
                None
            }
            Profile::Khokhlov { length, viscosity } => {
                if !(*length > 0.0) || !(t0 > 0.0) || !(*viscosity > 0.0) {
                    return invalid("khokhlov needs L > 0, nu > 0 and t0 > 0");
                }
                None
            }
            Profile::SmoothSampled { grid, values } => Some(Pchip::new(grid.clone(), values.clone())?),
        };
        Ok(InitialVelocity { profile, t0, potential_offset: 0.0, pchip })
    }

    pub fn at_time(mut self, t0: f64) -> Result<Self> {
        let off = self.potential_offset;
        self = Self::with_time(self.profile, t0)?;
        Ok(self.with_offset(off))
    }

    pub fn with_offset(mut self, c0: f64) -> Self {
        self.potential_offset = c0;
        self
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))
    }

    /// `(u0(a), u0'(a), phi0(a))`. At a jump the right-hand value is returned.
    pub fn eval(&self, a: f64) -> (f64, f64, f64) {
        let c0 = self.potential_offset;
        match &self.profile {
            Profile::Riemann { u_minus, u_plus } => {
                if a < 0.0 {
                    (*u_minus, 0.0, u_minus * a + c0)
                } else {
                    (*u_plus, 0.0, u_plus * a + c0)
                }
            }
            Profile::LinearRamp { slope, half_width } => {
                let w = *half_width;
                if a.abs() <= w {
                    (slope * a, *slope, 0.5 * slope * a * a + c0)
                } else {
                    let u = slope * w * a.signum();
                    (u, 0.0, 0.5 * slope * w * w + u * (a - w * a.signum()) + c0)
                }
            }
            Profile::Sawtooth { length } => {
                let t0 = self.t0;
                let sg = if a < 0.0 { -1.0 } else { 1.0 };
                ((a - length * sg) / t0, 1.0 / t0, a * a / (2.0 * t0) - length * a.abs() / t0 + c0)
            }
            Profile::Khokhlov { length, viscosity } => {
                let t0 = self.t0;
                let z = length * a / (2.0 * viscosity * t0);
                let th = z.tanh();
                let sech2 = 1.0 - th * th;
                let u = (a - length * th) / t0;
                let du = (1.0 - length * length / (2.0 * viscosity * t0) * sech2) / t0;
                (u, du, a * a / (2.0 * t0) - 2.0 * viscosity * ln_cosh(z) + c0)
            }
            Profile::SmoothSampled { .. } => {
                let (u, du, p) = self.pchip.as_ref().expect("pchip built").eval(a);
                (u, du, p + c0)
            }
        }
    }

    pub fn velocity(&self, a: f64) -> f64 {
        self.eval(a).0
    }

    pub fn gradient(&self, a: f64) -> f64 {
        self.eval(a).1
    }

    pub fn potential(&self, a: f64) -> f64 {
        self.eval(a).2
    }

    /// Labels where `u0` has a jump or a kink.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.profile {
            Profile::Riemann { .. } | Profile::Sawtooth { .. } => vec![0.0],
            Profile::LinearRamp { half_width, .. } => vec![-half_width, *half_width],
            Profile::Khokhlov { .. } => vec![0.0],
            Profile::SmoothSampled { grid, .. } => grid.clone(),
        }
    }

    /// `sup |u0|`, or `None` for profiles that grow linearly.
    pub fn sup_abs(&self) -> Option<f64> {
        match &self.profile {
            Profile::Riemann { u_minus, u_plus } => Some(u_minus.abs().max(u_plus.abs())),
            Profile::LinearRamp { slope, half_width } => Some((slope * half_width).abs()),
            Profile::SmoothSampled { values, .. } => Some(values.iter().fold(0.0f64, |m, v| m.max(v.abs()))),
            _ => None,
        }
    }

    /// `(min u0, max u0)` for bounded profiles.
    pub fn range(&self) -> Option<(f64, f64)> {
        match &self.profile {
            Profile::Riemann { u_minus, u_plus } => Some((u_minus.min(*u_plus), u_minus.max(*u_plus))),
            Profile::LinearRamp { slope, half_width } => {
                let v = (slope * half_width).abs();
                Some((-v, v))
            }
            Profile::SmoothSampled { values, .. } => Some((
                values.iter().copied().fold(f64::INFINITY, f64::min),
                values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            )),
            _ => None,
        }
    }

    /// Labels of local minima of `u0'` with negative value, with that value.
    pub fn compression_sites(&self) -> Vec<(f64, f64)> {
        match &self.profile {
            Profile::Riemann { .. } => vec![],
            Profile::LinearRamp { slope, .. } => {
                if *slope < 0.0 {
                    vec![(0.0, *slope)]
                } else {
                    vec![]
                }
            }
            Profile::Sawtooth { .. } => vec![],
            Profile::Khokhlov { .. } => {
                let g = self.gradient(0.0);
                if g < 0.0 {
                    vec![(0.0, g)]
                } else {
                    vec![]
                }
            }
            Profile::SmoothSampled { .. } => self.pchip.as_ref().expect("pchip built").gradient_minima(),
        }
    }

    /// Label interval outside of which `u0` is constant (sampled data only).
    pub fn support(&self) -> Option<(f64, f64)> {
        match &self.profile {
            Profile::SmoothSampled { grid, .. } => Some((grid[0], grid[grid.len() - 1])),
            Profile::LinearRamp { half_width, .. } => Some((-half_width, *half_width)),
            Profile::Riemann { .. } => Some((0.0, 0.0)),
            _ => None,
        }
    }
}

pub(crate) fn ln_cosh(z: f64) -> f64 {
    let a = z.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Position at time `t` of the characteristic leaving label `a` at `t0`.
pub fn lagrangian_map(u0: &InitialVelocity, a: f64, t: f64) -> f64 {
    a + (t - u0.t0) * u0.velocity(a)
}

/// Earliest time at which a characteristic crossing or a jump produces a shock.
pub fn first_shock_time(u0: &InitialVelocity) -> f64 {
    match &u0.profile {
        Profile::Riemann { u_minus, u_plus } => {
            if u_minus > u_plus {
                u0.t0
            } else {
                f64::INFINITY
            }
        }
        Profile::Sawtooth { .. } => u0.t0,
        _ => {
            let g = u0.compression_sites().iter().map(|p| p.1).fold(0.0f64, f64::min);
            if g < 0.0 {
                u0.t0 + 1.0 / (-g)
            } else {
                f64::INFINITY
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, Tol};

    #[test]
    fn ramp_characteristic() {
        let u = InitialVelocity::linear_ramp(-1.0, 1.0);
        assert!((lagrangian_map(&u, 0.5, 0.5) - 0.25).abs() < 1e-15);
        assert!((first_shock_time(&u) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pchip_potential_matches_quadrature() {
        let u = InitialVelocity::sample_fn(|a: f64| (-a * a).exp() * a.sin(), -3.0, 3.0, 41).unwrap();
        for &b in &[-4.0, -1.3, 0.2, 2.9, 5.0] {
            let q = integrate(|a| u.velocity(a), -3.0, b, Tol::tight()).unwrap();
            assert!((u.potential(b) - q).abs() < 1e-12, "{b}");
        }
    }

    #[test]
    fn pchip_derivative_consistent() {
        let u = InitialVelocity::sample_fn(|a: f64| -a.tanh(), -3.0, 3.0, 31).unwrap();
        for &a in &[-2.1, -0.33, 0.01, 1.7] {
            let h = 1e-6;
            let fd = (u.velocity(a + h) - u.velocity(a - h)) / (2.0 * h);
            assert!((fd - u.gradient(a)).abs() < 1e-6);
        }
    }

    #[test]
    fn khokhlov_potential_derivative() {
        let u = InitialVelocity::khokhlov(1.0, 0.1, 0.5).unwrap();
        for &a in &[-1.0, -0.05, 0.3] {
            let h = 1e-6;
            let fd = (u.potential(a + h) - u.potential(a - h)) / (2.0 * h);
            assert!((fd - u.velocity(a)).abs() < 1e-6);
        }
    }

    #[test]
    fn toml_roundtrip() {
        let u = InitialVelocity::from_toml("kind = \"riemann\"\nu_minus = 1.0\nu_plus = -1.0\n").unwrap();
        assert_eq!(u, InitialVelocity::riemann(1.0, -1.0));
        assert!(InitialVelocity::from_toml("kind = \"sawtooth\"\nlength = 1.0\n").is_err());
    }
}
