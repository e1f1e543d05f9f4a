//! Entropy (Lax-Oleinik) solutions of inviscid Burgers and their shock trees.

pub mod maxwell;
pub mod tree;

pub use maxwell::{find_shocks, solve_through, Interval};
pub use tree::{MergerEvent, Origin, Segment, ShockTree};

use crate::error::{invalid, Error, Result};
use crate::initial::{first_shock_time, InitialVelocity, Profile};
use crate::quad::{brent, golden_min};
use serde::Serialize;

/// One-sided values of the entropy solution at a point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PointValue {
    pub left: f64,
    pub right: f64,
    pub mean: f64,
    pub at_shock: bool,
}

impl PointValue {
    fn regular(u: f64) -> Self {
        PointValue { left: u, right: u, mean: u, at_shock: false }
    }

    fn jump(l: f64, r: f64) -> Self {
        PointValue { left: l, right: r, mean: 0.5 * (l + r), at_shock: true }
    }
}

/// State of one shock segment at time `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShockState {
    pub id: usize,
    pub t: f64,
    pub x: f64,
    pub u_minus: f64,
    pub u_plus: f64,
    pub a_minus: f64,
    pub a_plus: f64,
    /// One-sided velocity gradients at the shock.
    pub du_minus: f64,
    pub du_plus: f64,
}

impl ShockState {
    pub fn speed(&self) -> f64 {
        0.5 * (self.u_minus + self.u_plus)
    }

    pub fn jump(&self) -> f64 {
        self.u_minus - self.u_plus
    }
}

/// Minimizers of `(x - a)^2 / (2 tau) + phi0(a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Minimizers {
    pub labels: Vec<f64>,
    pub value: f64,
}

const LO_CELLS: usize = 2048;

/// Lax-Oleinik minimization on an explicit label window.
pub fn lax_oleinik_in(u0: &InitialVelocity, x: f64, tau: f64, lo: f64, hi: f64) -> Result<Minimizers> {
    let f = |a: f64| (x - a) * (x - a) / (2.0 * tau) + u0.potential(a);
    let h = (hi - lo) / LO_CELLS as f64;
    let vals: Vec<f64> = (0..=LO_CELLS).map(|i| f(lo + h * i as f64)).collect();
    let mut cands: Vec<(f64, f64)> = Vec::new();
    for k in 0..=LO_CELLS {
        let l = if k > 0 { vals[k - 1] } else { f64::INFINITY };
        let r = if k < LO_CELLS { vals[k + 1] } else { f64::INFINITY };
        if vals[k] <= l && vals[k] <= r {
            if k == 0 || k == LO_CELLS {
                return Err(Error::MinimizerNotBracketed { lo, hi });
            }
            let (al, ar) = (lo + h * (k - 1) as f64, lo + h * (k + 1) as f64);
            let (mut a, mut v) = golden_min(f, al, ar, 1e-12 * (1.0 + al.abs()));
            let g = |a: f64| a + tau * u0.velocity(a) - x;
            if let Ok(r) = brent(g, al, a, 1e-15).or_else(|_| brent(g, a, ar, 1e-15)) {
                let vr = f(r);
                if vr <= v + 1e-14 * (1.0 + v.abs()) {
                    a = r;
                    v = vr;
                }
            }
            cands.push((a, v));
        }
    }
    let best = cands.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let tol = 1e-10 * best.abs().max(1.0);
    let mut labels: Vec<f64> = cands.iter().filter(|c| c.1 <= best + tol).map(|c| c.0).collect();
    labels.sort_by(f64::total_cmp);
    labels.dedup_by(|a, b| (*a - *b).abs() < 4.0 * h);
    Ok(Minimizers { labels, value: best })
}

/// Lax-Oleinik minimization for bounded data on the window the data's speed implies.
pub fn lax_oleinik(u0: &InitialVelocity, x: f64, tau: f64) -> Result<Minimizers> {
    let Some(sup) = u0.sup_abs() else {
        return invalid("unbounded data needs an explicit label window");
    };
    let m = 1e-3 * (1.0 + tau * sup);
    lax_oleinik_in(u0, x, tau, x - tau * sup - m, x + tau * sup + m)
}

#[derive(Clone, Debug)]
pub struct EntropySolution {
    initial: InitialVelocity,
    tf: f64,
    tree: ShockTree,
}

impl EntropySolution {
    /// Builds the solution with data at `initial.t0` on the horizon `[t0, tf]`.
    pub fn new(initial: InitialVelocity, tf: f64) -> Result<Self> {
        let t0 = initial.t0;
        if !(tf > t0) {
            return invalid("horizon must exceed the data time");
        }
        let single = |t_start: f64, origin: Origin| ShockTree {
            t0,
            tf,
            segments: vec![Segment {
                id: 0,
                t_start,
                t_end: tf,
                anchor: 0.0,
                origin,
                parent: None,
                children: vec![],
                bracket: (0.0, 0.0),
            }],
            mergers: vec![],
        };
        let empty = ShockTree { t0, tf, ..Default::default() };
        let tree = match &initial.profile {
            Profile::Riemann { u_minus, u_plus } => {
                if u_minus > u_plus {
                    single(t0, Origin::Initial)
                } else {
                    empty
                }
            }
            Profile::LinearRamp { .. } => {
                let ts = first_shock_time(&initial);
                if ts < tf {
                    single(ts, Origin::Formation { label: 0.0 })
                } else {
                    empty
                }
            }
            Profile::Sawtooth { .. } => single(t0, Origin::Initial),
            Profile::Khokhlov { .. } => return invalid("viscous profiles are not inviscid data; use sawtooth"),
            Profile::SmoothSampled { .. } => {
                if !tf.is_finite() {
                    return invalid("tabulated data needs a finite horizon");
                }
                tree::build(&initial, tf)?
            }
        };
        Ok(EntropySolution { initial, tf, tree })
    }

    pub fn initial(&self) -> &InitialVelocity {
        &self.initial
    }

    pub fn t0(&self) -> f64 {
        self.initial.t0
    }

    pub fn horizon(&self) -> f64 {
        self.tf
    }

    pub fn tree(&self) -> &ShockTree {
        &self.tree
    }

    fn check_time(&self, t: f64) -> Result<f64> {
        let t0 = self.initial.t0;
        if !(t >= t0 && t <= self.tf) {
            return Err(Error::OutOfSupport { t, lo: t0, hi: self.tf });
        }
        Ok(t - t0)
    }

    /// Nearest formation or merger time within `tol` of `t`.
    pub fn event_near(&self, t: f64, tol: f64) -> Option<f64> {
        self.tree.event_times().into_iter().find(|&e| (e - t).abs() <= tol && e > self.initial.t0)
    }

    /// Fails with `ShockEventAtT` when `t` sits on a formation or merger.
    pub fn require_regular_time(&self, t: f64) -> Result<()> {
        match self.event_near(t, 1e-9 * (1.0 + t.abs())) {
            Some(e) => Err(Error::ShockEventAtT { t, event: e }),
            None => Ok(()),
        }
    }

    pub fn evaluate(&self, x: f64, t: f64) -> Result<PointValue> {
        let tau = self.check_time(t)?;
        let u0 = &self.initial;
        if tau == 0.0 {
            return Ok(match &u0.profile {
                Profile::Riemann { u_minus, u_plus } if x == 0.0 => PointValue::jump(*u_minus, *u_plus),
                Profile::Sawtooth { length } if x == 0.0 => PointValue::jump(length / u0.t0, -length / u0.t0),
                _ => PointValue::regular(u0.velocity(x)),
            });
        }
        let near = |xs: f64, scale: f64| (x - xs).abs() <= 1e-12 * (1.0 + scale);
        Ok(match &u0.profile {
            Profile::Riemann { u_minus, u_plus } => {
                let (l, r) = (*u_minus, *u_plus);
                if l > r {
                    let xs = 0.5 * (l + r) * tau;
                    if near(xs, xs.abs()) {
                        PointValue::jump(l, r)
                    } else if x < xs {
                        PointValue::regular(l)
                    } else {
                        PointValue::regular(r)
                    }
                } else if x <= l * tau {
                    PointValue::regular(l)
                } else if x >= r * tau {
                    PointValue::regular(r)
                } else {
                    PointValue::regular(x / tau)
                }
            }
            Profile::LinearRamp { slope, half_width } => {
                let v = slope * half_width;
                let edge = half_width * (1.0 + slope * tau);
                if edge <= 0.0 {
                    if near(0.0, 0.0) {
                        PointValue::jump(-v, v)
                    } else {
                        PointValue::regular(if x < 0.0 { -v } else { v })
                    }
                } else if x.abs() <= edge {
                    PointValue::regular(slope * x / (1.0 + slope * tau))
                } else {
                    PointValue::regular(v * x.signum())
                }
            }
            Profile::Sawtooth { length } => {
                if near(0.0, 0.0) {
                    PointValue::jump(length / t, -length / t)
                } else {
                    PointValue::regular((x - length * x.signum()) / t)
                }
            }
            Profile::Khokhlov { .. } => unreachable!("rejected at construction"),
            Profile::SmoothSampled { .. } => {
                let m = lax_oleinik(u0, x, tau)?;
                let l = u0.velocity(m.labels[0]);
                let r = u0.velocity(*m.labels.last().expect("non-empty"));
                if m.labels.len() > 1 {
                    PointValue::jump(l, r)
                } else {
                    PointValue::regular(l)
                }
            }
        })
    }

    /// Label at `t0` of the characteristic reaching a regular point `(x, t)`.
    pub fn back_label(&self, x: f64, t: f64) -> Result<Option<f64>> {
        let tau = self.check_time(t)?;
        if let Profile::SmoothSampled { .. } = self.initial.profile {
            let m = lax_oleinik(&self.initial, x, tau)?;
            return Ok((m.labels.len() == 1).then(|| m.labels[0]));
        }
        let v = self.evaluate(x, t)?;
        if v.at_shock {
            return Ok(None);
        }
        if let Profile::Riemann { u_minus, u_plus } = self.initial.profile {
            if u_minus <= u_plus && x > u_minus * tau && x < u_plus * tau {
                return Ok(Some(0.0));
            }
        }
        Ok(Some(x - tau * v.mean))
    }

    /// State of segment `id` at `t` within its lifetime.
    pub fn segment_state(&self, id: usize, t: f64) -> Result<ShockState> {
        let tau = self.check_time(t)?;
        let seg = self.tree.segment(id)?;
        let slack = 1e-12 * (1.0 + t.abs());
        if t < seg.t_start - slack || t > seg.t_end + slack {
            return Err(Error::OutOfSupport { t, lo: seg.t_start, hi: seg.t_end });
        }
        let u0 = &self.initial;
        let st = |x, um, up, am, ap, dm, dp| ShockState {
            id,
            t,
            x,
            u_minus: um,
            u_plus: up,
            a_minus: am,
            a_plus: ap,
            du_minus: dm,
            du_plus: dp,
        };
        Ok(match &u0.profile {
            Profile::Riemann { u_minus, u_plus } => {
                let x = 0.5 * (u_minus + u_plus) * tau;
                st(x, *u_minus, *u_plus, x - tau * u_minus, x - tau * u_plus, 0.0, 0.0)
            }
            Profile::LinearRamp { slope, half_width } => {
                let v = -slope * half_width;
                let w = (v * tau).max(*half_width);
                st(0.0, v, -v, -w, w, 0.0, 0.0)
            }
            Profile::Sawtooth { length } => {
                let a = length * (1.0 - u0.t0 / t);
                st(0.0, length / t, -length / t, -a, a, 1.0 / t, 1.0 / t)
            }
            Profile::Khokhlov { .. } => unreachable!("rejected at construction"),
            Profile::SmoothSampled { .. } if seg.parent.is_some() && t >= seg.t_end - slack => {
                self.merging_child_state(id, seg.t_end)?
            }
            Profile::SmoothSampled { .. } => {
                let (lo, hi) = seg.bracket;
                let mut iv = solve_through(u0, tau, lo, hi, seg.anchor, tree::SOLVE_GRID)?;
                for &c in &seg.children {
                    if iv.is_some() {
                        break;
                    }
                    let anchor = self.tree.segments[c].anchor;
                    iv = solve_through(u0, tau, lo, hi, anchor, tree::SOLVE_GRID)?;
                }
                let iv = iv.unwrap_or(Interval {
                    a_minus: seg.anchor,
                    a_plus: seg.anchor,
                    x: seg.anchor + tau * u0.velocity(seg.anchor),
                });
                let (um, gm, _) = u0.eval(iv.a_minus);
                let (up, gp, _) = u0.eval(iv.a_plus);
                st(iv.x, um, up, iv.a_minus, iv.a_plus, gm / (1.0 + tau * gm), gp / (1.0 + tau * gp))
            }
        })
    }

    /// Same as [`segment_state`](Self::segment_state), refined by Newton from a nearby state of the
    /// same segment; falls back to the global solve when Newton does not settle.
    pub fn segment_state_near(&self, id: usize, t: f64, guess: &ShockState) -> Result<ShockState> {
        let seg = self.tree.segment(id)?;
        if !matches!(self.initial.profile, Profile::SmoothSampled { .. }) || guess.id != id || t >= seg.t_end {
            return self.segment_state(id, t);
        }
        let tau = self.check_time(t)?;
        match bitangent_newton(&self.initial, tau, guess.a_minus, guess.a_plus) {
            Some((am, ap))
                if (am - guess.a_minus).abs().max((ap - guess.a_plus).abs()) <= 0.25 * (guess.a_plus - guess.a_minus) =>
            {
                let (um, gm, _) = self.initial.eval(am);
                let (up, gp, _) = self.initial.eval(ap);
                if um <= up {
                    return self.segment_state(id, t);
                }
                Ok(ShockState {
                    id,
                    t,
                    x: 0.5 * (am + tau * um + ap + tau * up),
                    u_minus: um,
                    u_plus: up,
                    a_minus: am,
                    a_plus: ap,
                    du_minus: gm / (1.0 + tau * gm),
                    du_plus: gp / (1.0 + tau * gp),
                })
            }
            _ => self.segment_state(id, t),
        }
    }

    /// State of a child at the instant it merges: its share of the parent interval.
    fn merging_child_state(&self, id: usize, tm: f64) -> Result<ShockState> {
        let seg = self.tree.segment(id)?;
        let pid = seg.parent.ok_or(Error::UnknownShock(id))?;
        let Origin::Merger { event } = self.tree.segments[pid].origin else {
            return Err(Error::UnknownShock(pid));
        };
        let ev = &self.tree.mergers[event];
        let k = ev.children.iter().position(|&c| c == id).ok_or(Error::UnknownShock(id))?;
        let whole = self.segment_state(pid, tm)?;
        let tau = tm - self.initial.t0;
        let (am, ap) = (
            if k == 0 { whole.a_minus } else { ev.separators[k - 1] },
            if k + 1 == ev.children.len() { whole.a_plus } else { ev.separators[k] },
        );
        let (um, gm, _) = self.initial.eval(am);
        let (up, gp, _) = self.initial.eval(ap);
        Ok(ShockState {
            id,
            t: tm,
            x: whole.x,
            u_minus: um,
            u_plus: up,
            a_minus: am,
            a_plus: ap,
            du_minus: gm / (1.0 + tau * gm),
            du_plus: gp / (1.0 + tau * gp),
        })
    }

    /// All shocks alive at `t`, ordered by position.
    pub fn shocks_at(&self, t: f64) -> Result<Vec<ShockState>> {
        self.check_time(t)?;
        self.tree.live_at(t).into_iter().map(|id| self.segment_state(id, t)).collect()
    }

    /// Sticky Lagrangian map: labels inside a shock interval sit at the shock.
    pub fn sticky_position(&self, a: f64, t: f64, shocks: &[ShockState]) -> f64 {
        for s in shocks {
            if a >= s.a_minus && a <= s.a_plus {
                return s.x;
            }
        }
        a + (t - self.initial.t0) * self.initial.velocity(a)
    }
}

/// Newton iteration for the end labels of a hull edge: equal images and equal-area mean.
fn bitangent_newton(u0: &InitialVelocity, tau: f64, mut am: f64, mut ap: f64) -> Option<(f64, f64)> {
    let scale = 1.0 + am.abs().max(ap.abs());
    for _ in 0..30 {
        let (um, gm, pm) = u0.eval(am);
        let (up, gp, pp) = u0.eval(ap);
        let (xm, xp) = (am + tau * um, ap + tau * up);
        let (dm, dp) = (1.0 + tau * gm, 1.0 + tau * gp);
        let d = ap - am;
        if !(d > 0.0) {
            return None;
        }
        let mean = (0.5 * (ap * ap - am * am) + tau * (pp - pm)) / d;
        let f1 = xp - xm;
        let f2 = mean - 0.5 * (xm + xp);
        let (j11, j12) = (-dm, dp);
        let (j21, j22) = ((mean - xm) / d - 0.5 * dm, (xp - mean) / d - 0.5 * dp);
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let sm = (f1 * j22 - f2 * j12) / det;
        let sp = (j11 * f2 - j21 * f1) / det;
        am -= sm;
        ap -= sp;
        if sm.abs().max(sp.abs()) <= 1e-11 * scale {
            return Some((am, ap));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn riemann_values() {
        let s = EntropySolution::new(InitialVelocity::riemann(1.0, -1.0), 10.0).unwrap();
        let v = s.evaluate(0.0, 1.0).unwrap();
        assert!(v.at_shock && v.left == 1.0 && v.right == -1.0 && v.mean == 0.0);
        let sh = s.shocks_at(2.0).unwrap();
        assert_eq!(sh.len(), 1);
        assert_eq!((sh[0].a_minus, sh[0].a_plus), (-2.0, 2.0));
    }

    #[test]
    fn rarefaction_fan() {
        let s = EntropySolution::new(InitialVelocity::riemann(-1.0, 1.0), 10.0).unwrap();
        assert!((s.evaluate(0.3, 1.0).unwrap().mean - 0.3).abs() < 1e-15);
    }

    #[test]
    fn ramp_before_and_after_collapse() {
        let s = EntropySolution::new(InitialVelocity::linear_ramp(-1.0, 1.0), 5.0).unwrap();
        assert!((s.evaluate(0.2, 0.5).unwrap().mean + 0.4).abs() < 1e-14);
        let st = s.segment_state(0, 1.01).unwrap();
        assert!((st.a_plus - 1.01).abs() < 1e-14 && (st.a_minus + 1.01).abs() < 1e-14);
    }

    #[test]
    fn sawtooth_values() {
        let s = EntropySolution::new(InitialVelocity::sawtooth(1.0, 1e-3).unwrap(), 5.0).unwrap();
        assert!((s.evaluate(0.5, 2.0).unwrap().mean + 0.25).abs() < 1e-15);
    }

    #[test]
    fn sampled_lax_oleinik_matches_ramp() {
        let ramp = InitialVelocity::linear_ramp(-1.0, 1.0);
        let u = InitialVelocity::sample_fn(|a| ramp.velocity(a), -3.0, 3.0, 601).unwrap();
        let s = EntropySolution::new(u, 0.9).unwrap();
        for &x in &[-0.4, -0.05, 0.07, 0.3] {
            let v = s.evaluate(x, 0.5).unwrap();
            assert!((v.mean - (-x / 0.5)).abs() < 1e-8, "{x}: {}", v.mean);
        }
    }
}
