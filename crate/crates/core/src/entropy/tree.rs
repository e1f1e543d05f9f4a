//! Formation and merger history of shocks for tabulated data.

use super::maxwell::{solve_through, Interval};
use crate::error::{Error, Result};
use crate::initial::InitialVelocity;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Origin {
    /// Present at the data time (jump in the data).
    Initial,
    /// Gradient catastrophe at the given label.
    Formation { label: f64 },
    /// Collision of the children listed on the segment.
    Merger { event: usize },
}

#[derive(Clone, Debug, Serialize)]
pub struct Segment {
    pub id: usize,
    pub t_start: f64,
    pub t_end: f64,
    /// A label that lies inside the shock interval for the whole lifetime.
    pub anchor: f64,
    pub origin: Origin,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub(crate) bracket: (f64, f64),
}

#[derive(Clone, Debug, Serialize)]
pub struct MergerEvent {
    pub t: f64,
    pub x: f64,
    pub children: Vec<usize>,
    pub parent: usize,
    /// Labels of the characteristics entering the merger point between adjacent children.
    pub separators: Vec<f64>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ShockTree {
    pub t0: f64,
    pub tf: f64,
    pub segments: Vec<Segment>,
    pub mergers: Vec<MergerEvent>,
}

pub(crate) const SOLVE_GRID: usize = 2048;
const BUILD_GRID: usize = 4096;
const CHECK_STEPS: usize = 400;

impl ShockTree {
    pub fn segment(&self, id: usize) -> Result<&Segment> {
        self.segments.get(id).ok_or(Error::UnknownShock(id))
    }

    /// Segments alive at `t` (a segment ending in a merger at `t` is not alive there).
    pub fn live_at(&self, t: f64) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .segments
            .iter()
            .filter(|s| s.t_start <= t && (t < s.t_end || (s.parent.is_none() && t <= s.t_end)))
            .map(|s| s.id)
            .collect();
        v.sort_by(|&a, &b| self.segments[a].anchor.total_cmp(&self.segments[b].anchor));
        v
    }

    pub fn roots(&self) -> Vec<usize> {
        self.segments.iter().filter(|s| s.parent.is_none()).map(|s| s.id).collect()
    }

    /// Segment ids from `id` up to its root.
    pub fn ancestry(&self, id: usize) -> Vec<usize> {
        let mut out = vec![id];
        let mut cur = id;
        while let Some(p) = self.segments[cur].parent {
            out.push(p);
            cur = p;
        }
        out
    }

    /// The segment of the subtree rooted at `id` that is alive at `t`, along the branch containing `label`.
    pub fn descendants_live_at(&self, id: usize, t: f64) -> Vec<usize> {
        let s = &self.segments[id];
        if t >= s.t_start {
            return if t <= s.t_end { vec![id] } else { vec![] };
        }
        s.children.iter().flat_map(|&c| self.descendants_live_at(c, t)).collect()
    }

    /// Formation and merger times.
    pub fn event_times(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .segments
            .iter()
            .filter(|s| matches!(s.origin, Origin::Formation { .. }))
            .map(|s| s.t_start)
            .chain(self.mergers.iter().map(|m| m.t))
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Number of leaves below `id`, counting `id` itself when it has no children.
    pub fn leaves(&self, id: usize) -> Vec<usize> {
        let s = &self.segments[id];
        if s.children.is_empty() {
            vec![id]
        } else {
            s.children.iter().flat_map(|&c| self.leaves(c)).collect()
        }
    }
}

pub(crate) fn label_window(u0: &InitialVelocity, tau_max: f64) -> (f64, f64) {
    let (slo, shi) = u0.support().unwrap_or((0.0, 0.0));
    let (umin, umax) = u0.range().unwrap_or((0.0, 0.0));
    let m = tau_max * (umax - umin) + 1.0;
    (slo - m, shi + m)
}

struct Builder<'a> {
    u0: &'a InitialVelocity,
    lo: f64,
    hi: f64,
    tree: ShockTree,
    live: Vec<usize>,
}

impl<'a> Builder<'a> {
    fn interval(&self, id: usize, t: f64) -> Result<Option<Interval>> {
        let c = self.tree.segments[id].anchor;
        solve_through(self.u0, t - self.tree.t0, self.lo, self.hi, c, BUILD_GRID)
    }

    fn merged(&self, left: usize, right: usize, t: f64) -> Result<bool> {
        let cr = self.tree.segments[right].anchor;
        Ok(self.interval(left, t)?.is_some_and(|iv| iv.a_plus >= cr))
    }

    fn next_merger(&self, ta: f64, tb: f64) -> Result<Option<(usize, f64, f64)>> {
        let mut best: Option<(usize, f64, f64)> = None;
        for k in 0..self.live.len().saturating_sub(1) {
            let (l, r) = (self.live[k], self.live[k + 1]);
            if !self.merged(l, r, tb)? {
                continue;
            }
            let start = self.tree.segments[l].t_start.max(self.tree.segments[r].t_start);
            let mut lo = ta.max(start);
            if self.merged(l, r, lo)? {
                return Err(Error::MergeAmbiguous { t: lo });
            }
            let mut hi = tb;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if self.merged(l, r, mid)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            if best.is_none_or(|b| hi < b.1) {
                best = Some((k, hi, lo));
            }
        }
        Ok(best)
    }

    fn merge(&mut self, k: usize, tm: f64, t_before: f64) -> Result<()> {
        let (l, r) = (self.live[k], self.live[k + 1]);
        let (cl, cr) = (self.tree.segments[l].anchor, self.tree.segments[r].anchor);
        let mut back = 1e-12 * (1.0 + tm.abs());
        let mut tb = t_before;
        let sep = loop {
            let al = self.interval(l, tb)?.map_or(cl, |i| i.a_plus);
            let ar = self.interval(r, tb)?.map_or(cr, |i| i.a_minus);
            if al <= ar && al < cr && ar > cl {
                break 0.5 * (al + ar);
            }
            back *= 10.0;
            tb = t_before - back;
            if back > 1e-6 * (1.0 + tm.abs()) {
                return Err(Error::MergeAmbiguous { t: tm });
            }
        };
        let tau = tm - self.tree.t0;
        let x = sep + tau * self.u0.velocity(sep);
        let pid = self.tree.segments.len();
        let eid = self.tree.mergers.len();
        self.tree.segments.push(Segment {
            id: pid,
            t_start: tm,
            t_end: self.tree.tf,
            anchor: sep,
            origin: Origin::Merger { event: eid },
            parent: None,
            children: vec![l, r],
            bracket: (self.lo, self.hi),
        });
        for c in [l, r] {
            self.tree.segments[c].t_end = tm;
            self.tree.segments[c].parent = Some(pid);
        }
        self.tree.mergers.push(MergerEvent { t: tm, x, children: vec![l, r], parent: pid, separators: vec![sep] });
        self.live.splice(k..k + 2, [pid]);
        Ok(())
    }

    fn form(&mut self, label: f64, t: f64) -> Result<()> {
        for &id in &self.live {
            if self.interval(id, t)?.is_some_and(|iv| iv.contains(label)) {
                return Ok(());
            }
        }
        let id = self.tree.segments.len();
        self.tree.segments.push(Segment {
            id,
            t_start: t,
            t_end: self.tree.tf,
            anchor: label,
            origin: Origin::Formation { label },
            parent: None,
            children: vec![],
            bracket: (self.lo, self.hi),
        });
        let pos = self.live.iter().position(|&s| self.tree.segments[s].anchor > label).unwrap_or(self.live.len());
        self.live.insert(pos, id);
        Ok(())
    }
}

/// Builds the shock tree of tabulated data on `[t0, tf]`.
pub(crate) fn build(u0: &InitialVelocity, tf: f64) -> Result<ShockTree> {
    let t0 = u0.t0;
    let (lo, hi) = label_window(u0, tf - t0);
    let mut sites: Vec<(f64, f64)> =
        u0.compression_sites().into_iter().map(|(a, g)| (a, t0 - 1.0 / g)).filter(|&(_, tc)| tc < tf).collect();
    sites.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut b = Builder { u0, lo, hi, tree: ShockTree { t0, tf, ..Default::default() }, live: vec![] };
    let Some(first) = sites.first().map(|s| s.1) else {
        return Ok(b.tree);
    };
    let dt = (tf - first) / CHECK_STEPS as f64;
    let mut checks: Vec<(f64, Option<f64>)> = (1..=CHECK_STEPS).map(|j| (first + dt * j as f64, None)).collect();
    checks.extend(sites.iter().map(|&(a, tc)| (tc, Some(a))));
    checks.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut ta = first;
    for (tb, site) in checks {
        if tb > ta {
            while let Some((k, tm, before)) = b.next_merger(ta, tb)? {
                b.merge(k, tm, before)?;
                ta = tm;
            }
        }
        if let Some(label) = site {
            b.form(label, tb)?;
        }
        ta = ta.max(tb);
    }
    let mut tree = b.tree;
    for id in 0..tree.segments.len() {
        let s = &tree.segments[id];
        let t_probe = if s.parent.is_some() { s.t_end - 1e-12 * (1.0 + s.t_end.abs()) } else { s.t_end };
        let iv = solve_through(u0, t_probe - t0, lo, hi, s.anchor, BUILD_GRID)?;
        if let Some(iv) = iv {
            let m = 0.05 * iv.width() + 8.0 * (hi - lo) / BUILD_GRID as f64;
            tree.segments[id].bracket = ((iv.a_minus - m).max(lo), (iv.a_plus + m).min(hi));
        }
    }
    Ok(tree)
}
