//! Shock intervals as edges of the lower convex hull of `H(a) = a^2/2 + tau*phi0(a)`.
//!
//! The tangent slope of a hull edge is the shock position and its end labels are
//! the Lagrangian shock interval.

use crate::error::Result;
use crate::initial::InitialVelocity;
use crate::quad::brent;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub a_minus: f64,
    pub a_plus: f64,
    pub x: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.a_plus - self.a_minus
    }

    pub fn contains(&self, a: f64) -> bool {
        a >= self.a_minus && a <= self.a_plus
    }
}

#[inline]
fn xi_h(u0: &InitialVelocity, tau: f64, a: f64) -> (f64, f64) {
    let (u, _, p) = u0.eval(a);
    (a + tau * u, 0.5 * a * a + tau * p)
}

struct Side {
    a: Vec<f64>,
    xi: Vec<f64>,
    h: Vec<f64>,
}

impl Side {
    fn build(u0: &InitialVelocity, tau: f64, pts: Vec<f64>) -> Side {
        let mut xi = Vec::with_capacity(pts.len());
        let mut h = Vec::with_capacity(pts.len());
        for &a in &pts {
            let (x, hh) = xi_h(u0, tau, a);
            xi.push(x);
            h.push(hh);
        }
        Side { a: pts, xi, h }
    }

    /// Minimum of `H(a) - x a` over the side, refined on the exact profile.
    fn min(&self, u0: &InitialVelocity, tau: f64, x: f64) -> (f64, f64) {
        let n = self.a.len();
        let g = |k: usize| self.h[k] - x * self.a[k];
        let mut best_k = 0;
        let mut best = g(0);
        let mut cand: Vec<usize> = Vec::new();
        for k in 0..n {
            let v = g(k);
            if v < best {
                best = v;
                best_k = k;
            }
            if (k == 0 || v <= g(k - 1)) && (k + 1 == n || v <= g(k + 1)) {
                cand.push(k);
            }
        }
        let mut out = (best, self.a[best_k]);
        for k in cand {
            for (lo, hi) in [(k.saturating_sub(1), k), (k, (k + 1).min(n - 1))] {
                if lo == hi {
                    continue;
                }
                let (fl, fh) = (self.xi[lo] - x, self.xi[hi] - x);
                if fl <= 0.0 && fh >= 0.0 && fl < fh {
                    let r = brent(|a| xi_h(u0, tau, a).0 - x, self.a[lo], self.a[hi], 1e-15).unwrap_or(self.a[k]);
                    let v = xi_h(u0, tau, r).1 - x * r;
                    if v < out.0 {
                        out = (v, r);
                    }
                }
            }
        }
        out
    }
}

fn side_points(lo: f64, hi: f64, c: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let h = (hi - lo) / n as f64;
    let mut pts: Vec<f64> = (0..=n).map(|i| lo + h * i as f64).collect();
    let mut d = h;
    for _ in 0..45 {
        pts.push(c - d);
        pts.push(c + d);
        d *= 0.5;
    }
    pts.push(c);
    pts.retain(|&a| a >= lo && a <= hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let left: Vec<f64> = pts.iter().copied().filter(|&a| a <= c).collect();
    let right: Vec<f64> = pts.iter().copied().filter(|&a| a >= c).collect();
    (left, right)
}

/// Hull edge over label `c` within `[lo, hi]`, or `None` when `c` is a regular label.
///
/// The bracket must contain the whole shock interval.
pub fn solve_through(u0: &InitialVelocity, tau: f64, lo: f64, hi: f64, c: f64, n: usize) -> Result<Option<Interval>> {
    let (l, r) = side_points(lo, hi, c, n);
    let left = Side::build(u0, tau, l);
    let right = Side::build(u0, tau, r);
    let (xc, hc) = xi_h(u0, tau, c);
    let gc = hc - xc * c;
    let tol = 1e-14 * (1.0 + hc.abs() + (xc * c).abs());
    if left.min(u0, tau, xc).0 >= gc - tol && right.min(u0, tau, xc).0 >= gc - tol {
        return Ok(None);
    }
    let f = |x: f64| left.min(u0, tau, x).0 - right.min(u0, tau, x).0;
    let x_lo = left.xi.iter().copied().fold(f64::INFINITY, f64::min);
    let x_hi = right.xi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (flo, fhi) = (f(x_lo), f(x_hi));
    let x = if flo >= 0.0 {
        x_lo
    } else if fhi <= 0.0 {
        x_hi
    } else {
        let scale = 1.0 + x_lo.abs().max(x_hi.abs());
        brent(f, x_lo, x_hi, 1e-16 * scale)?
    };
    let (_, am) = left.min(u0, tau, x);
    let (_, ap) = right.min(u0, tau, x);
    if ap - am <= 1e-13 * (1.0 + c.abs()) {
        return Ok(None);
    }
    Ok(Some(Interval { a_minus: am, a_plus: ap, x }))
}

/// All shock intervals with labels in `[lo, hi]` resolvable on an `n`-point grid.
pub fn find_shocks(u0: &InitialVelocity, tau: f64, lo: f64, hi: f64, n: usize) -> Result<Vec<Interval>> {
    let a: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let h: Vec<f64> = a.iter().map(|&v| xi_h(u0, tau, v).1).collect();
    let mut hull: Vec<usize> = Vec::new();
    for k in 0..a.len() {
        while hull.len() >= 2 {
            let (i, j) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (a[j] - a[i]) * (h[k] - h[i]) - (h[j] - h[i]) * (a[k] - a[i]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(k);
    }
    let scale = 1.0 + h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out: Vec<Interval> = Vec::new();
    for w in hull.windows(2) {
        let (i, j) = (w[0], w[1]);
        if j <= i + 1 {
            continue;
        }
        let slope = (h[j] - h[i]) / (a[j] - a[i]);
        let (mut deep, mut kd) = (0.0, i);
        for k in i + 1..j {
            let d = h[k] - (h[i] + slope * (a[k] - a[i]));
            if d > deep {
                deep = d;
                kd = k;
            }
        }
        if deep <= 1e-13 * scale {
            continue;
        }
        let m = 3.0 * (hi - lo) / n as f64;
        let blo = (a[i] - m).max(lo);
        let bhi = (a[j] + m).min(hi);
        if let Some(iv) = solve_through(u0, tau, blo, bhi, a[kd], 1024)? {
            if out.last().is_none_or(|p: &Interval| iv.a_minus > p.a_plus) {
                out.push(iv);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_after_collapse() {
        let u = InitialVelocity::linear_ramp(-1.0, 1.0);
        let iv = solve_through(&u, 1.5, -4.0, 4.0, 0.0, 2048).unwrap().unwrap();
        assert!((iv.a_minus + 1.5).abs() < 1e-10);
        assert!((iv.a_plus - 1.5).abs() < 1e-10);
        assert!(iv.x.abs() < 1e-12);
    }

    #[test]
    fn regular_label_has_no_edge() {
        let u = InitialVelocity::linear_ramp(-1.0, 1.0);
        assert!(solve_through(&u, 0.5, -4.0, 4.0, 0.3, 2048).unwrap().is_none());
    }

    #[test]
    fn tanh_step_shock_satisfies_equal_area() {
        let u = InitialVelocity::sample_fn(|a: f64| -(a / 0.4).tanh() + 0.3, -5.0, 5.0, 401).unwrap();
        let tau = 1.2;
        let shocks = find_shocks(&u, tau, -8.0, 8.0, 4096).unwrap();
        assert_eq!(shocks.len(), 1);
        let s = shocks[0];
        let (um, up) = (u.velocity(s.a_minus), u.velocity(s.a_plus));
        assert!((s.a_minus + tau * um - s.x).abs() < 1e-10);
        assert!((s.a_plus + tau * up - s.x).abs() < 1e-10);
        let mean = (u.potential(s.a_plus) - u.potential(s.a_minus)) / s.width();
        assert!((mean - 0.5 * (um + up)).abs() < 1e-10);
    }
}
