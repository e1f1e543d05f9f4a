//! Geometric backward process: branch densities along a shock tree, path sampling
//! and backward-martingale checks.

use crate::entropy::{EntropySolution, Origin, ShockState};
use crate::error::{invalid, Error, Result};
use crate::initial::Profile;
use crate::quad::{brent, integrate, integrate_split, Tol};
use crate::rng;
use crate::stats::{mean_se, quantile_bins};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;
use std::io::Write;

pub const TABLE_POINTS: usize = 4096;
pub const MIN_BIN: usize = 30;
const MAX_BINS: usize = 10;
const NARROW: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Minus,
    Plus,
}

impl Side {
    pub fn sign(self) -> i8 {
        match self {
            Side::Minus => -1,
            Side::Plus => 1,
        }
    }
}

/// Position label in the extended state space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StateLabel {
    Left,
    OnShock,
    Right,
    Downward,
}

impl StateLabel {
    pub fn code(self) -> &'static str {
        match self {
            StateLabel::Left => "-1",
            StateLabel::OnShock => "0",
            StateLabel::Right => "+1",
            StateLabel::Downward => "down",
        }
    }
}

#[derive(Clone, Debug)]
struct Table {
    s: Vec<f64>,
    states: Vec<Option<ShockState>>,
    cum: Vec<f64>,
    frac_plus: Vec<f64>,
    a_minus: Vec<f64>,
    a_plus: Vec<f64>,
}

/// Branch law restricted to one segment of the tree.
#[derive(Clone, Debug, Serialize)]
pub struct SegmentLaw {
    pub id: usize,
    pub t_lo: f64,
    pub t_hi: f64,
    /// Probability of leaving the shock from this segment at a time in `(t_lo, t_hi]`.
    pub mass: f64,
    /// Probability of leaving exactly at formation, when a finite interval focuses at once.
    pub start_atom: f64,
    /// Total probability of this segment and everything below it.
    pub subtree_mass: f64,
    /// Formation segments have an integrable singularity at `t_lo`.
    pub singular: bool,
    /// Below this table coordinate the interval is too narrow to resolve and its
    /// probability is taken from the interval width.
    pub s_cut: f64,
    #[serde(skip)]
    table: Table,
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchProb {
    pub child: usize,
    pub prob: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchLaw {
    pub shock_id: usize,
    pub t_ref: f64,
    pub tf: f64,
    pub t_star: f64,
    /// Width of the shock interval at `tf` in labels transported to `t_ref`.
    pub width: f64,
    pub u_final: f64,
    pub x_final: f64,
    pub segments: Vec<SegmentLaw>,
    #[serde(skip)]
    index: HashMap<usize, usize>,
    #[serde(skip)]
    exact_labels: bool,
}

fn reference_edges(s: &ShockState, t_ref: f64) -> (f64, f64) {
    (s.x - (s.t - t_ref) * s.u_minus, s.x - (s.t - t_ref) * s.u_plus)
}

impl BranchLaw {
    /// Branch law of the shock `shock_id` observed at `tf`, with characteristics labelled at `t_ref`.
    pub fn new(sol: &EntropySolution, shock_id: usize, t_ref: f64, tf: f64) -> Result<Self> {
        let tree = sol.tree();
        let root = tree.segment(shock_id)?;
        let slack = 1e-12 * (1.0 + tf.abs());
        if !(tf > root.t_start && tf <= root.t_end + slack) {
            return Err(Error::OutOfSupport { t: tf, lo: root.t_start, hi: root.t_end });
        }
        if t_ref < sol.t0() - slack {
            return invalid("reference time precedes the data time");
        }
        let mut ids = vec![shock_id];
        let mut k = 0;
        while k < ids.len() {
            ids.extend(tree.segments[ids[k]].children.iter().copied());
            k += 1;
        }
        let leaves: Vec<usize> = ids.iter().copied().filter(|&i| tree.segments[i].children.is_empty()).collect();
        let t_star = leaves.iter().map(|&i| tree.segments[i].t_start).fold(f64::INFINITY, f64::min);
        for &l in &leaves {
            let seg = &tree.segments[l];
            let ok = match seg.origin {
                Origin::Initial => t_ref <= seg.t_start + slack,
                _ => t_ref < seg.t_start,
            };
            if !ok {
                return Err(Error::T0TooLate { t_ref, t_form: seg.t_start });
            }
        }
        let fin = sol.segment_state(shock_id, tf)?;
        let (bm, bp) = reference_edges(&fin, t_ref);
        let width = bp - bm;
        if !(width > 0.0) {
            return invalid("shock has zero reference width at the final time");
        }
        let exact_labels = !matches!(sol.initial().profile, Profile::SmoothSampled { .. });
        let mut law = BranchLaw {
            shock_id,
            t_ref,
            tf,
            t_star,
            width,
            u_final: fin.speed(),
            x_final: fin.x,
            segments: Vec::with_capacity(ids.len()),
            index: HashMap::new(),
            exact_labels,
        };
        for &id in &ids {
            let seg = &tree.segments[id];
            let t_hi = if id == shock_id { tf } else { seg.t_end };
            let singular = matches!(seg.origin, Origin::Formation { .. });
            let start_atom = if seg.children.is_empty() {
                let s0 = sol.segment_state(id, seg.t_start)?;
                let (l, r) = reference_edges(&s0, t_ref);
                ((r - l) / width).max(0.0)
            } else {
                0.0
            };
            let mut sl = SegmentLaw {
                id,
                t_lo: seg.t_start,
                t_hi,
                mass: 0.0,
                start_atom,
                subtree_mass: 0.0,
                singular,
                s_cut: 0.0,
                table: Table { s: vec![], states: vec![], cum: vec![], frac_plus: vec![], a_minus: vec![], a_plus: vec![] },
            };
            if singular && !exact_labels {
                sl.s_cut = law.resolvable_cut(sol, &sl)?;
            }
            sl.table = law.tabulate(sol, &sl)?;
            sl.mass = law.segment_integral(sol, &sl, sl.t_hi)?;
            let total = *sl.table.cum.last().expect("non-empty table");
            if total > 0.0 {
                let k = sl.mass / total;
                sl.table.cum.iter_mut().for_each(|c| *c *= k);
            }
            law.index.insert(id, law.segments.len());
            law.segments.push(sl);
        }
        for &id in ids.iter().rev() {
            let k = law.index[&id];
            let below: f64 = tree.segments[id].children.iter().map(|c| law.segments[law.index[c]].subtree_mass).sum();
            let sl = &mut law.segments[k];
            sl.subtree_mass = sl.mass + sl.start_atom + below;
        }
        Ok(law)
    }

    fn tau_of(sl: &SegmentLaw, s: f64) -> f64 {
        let d = sl.t_hi - sl.t_lo;
        if sl.singular {
            sl.t_lo + d * s * s
        } else {
            sl.t_lo + d * s
        }
    }

    fn dtau_ds(sl: &SegmentLaw, s: f64) -> f64 {
        let d = sl.t_hi - sl.t_lo;
        if sl.singular {
            2.0 * d * s
        } else {
            d
        }
    }

    /// `(p_minus, p_plus)` from a segment state.
    pub fn densities_from(&self, st: &ShockState) -> (f64, f64) {
        let lag = st.t - self.t_ref;
        let half = 0.5 * st.jump() / self.width;
        (half * (1.0 - st.du_minus * lag), half * (1.0 - st.du_plus * lag))
    }

    /// Branch densities `(p_minus, p_plus)` on segment `id` at time `tau`.
    pub fn densities(&self, sol: &EntropySolution, id: usize, tau: f64) -> Result<(f64, f64)> {
        let sl = self.segment_law(id)?;
        if !(tau >= sl.t_lo && tau <= sl.t_hi) {
            return Err(Error::OutOfSupport { t: tau, lo: sl.t_lo, hi: sl.t_hi });
        }
        Ok(self.densities_from(&sol.segment_state(id, tau)?))
    }

    pub fn segment_law(&self, id: usize) -> Result<&SegmentLaw> {
        self.index.get(&id).map(|&k| &self.segments[k]).ok_or(Error::UnknownShock(id))
    }

    /// Smallest table coordinate at which the Lagrangian interval is at least `NARROW` wide.
    fn resolvable_cut(&self, sol: &EntropySolution, sl: &SegmentLaw) -> Result<f64> {
        let width = |s: f64| -> Result<f64> {
            let st = sol.segment_state(sl.id, Self::tau_of(sl, s))?;
            Ok(st.a_plus - st.a_minus)
        };
        if width(1.0)? < NARROW {
            return Ok(1.0);
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if width(mid)? >= NARROW {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    fn state_near(&self, sol: &EntropySolution, sl: &SegmentLaw, s: f64, tau: f64) -> Result<ShockState> {
        let st = &sl.table.states;
        if st.is_empty() {
            return sol.segment_state(sl.id, tau);
        }
        let k = ((s * (st.len() - 1) as f64).round() as usize).min(st.len() - 1);
        match st[k..].iter().flatten().next() {
            Some(g) => sol.segment_state_near(sl.id, tau, g),
            None => sol.segment_state(sl.id, tau),
        }
    }

    fn reference_width(&self, sol: &EntropySolution, id: usize, tau: f64) -> Result<f64> {
        let (l, r) = reference_edges(&sol.segment_state(id, tau)?, self.t_ref);
        Ok(r - l)
    }

    fn segment_integral(&self, sol: &EntropySolution, sl: &SegmentLaw, upto: f64) -> Result<f64> {
        if upto <= sl.t_lo {
            return Ok(0.0);
        }
        let s_hi =
            if sl.singular { ((upto - sl.t_lo) / (sl.t_hi - sl.t_lo)).sqrt() } else { (upto - sl.t_lo) / (sl.t_hi - sl.t_lo) }
                .min(1.0);
        if s_hi <= sl.s_cut {
            return Ok(self.reference_width(sol, sl.id, upto)? / self.width);
        }
        let head = if sl.s_cut > 0.0 { self.reference_width(sol, sl.id, Self::tau_of(sl, sl.s_cut))? / self.width } else { 0.0 };
        let err = std::cell::Cell::new(None);
        let f = |s: f64| {
            let tau = Self::tau_of(sl, s);
            match self.state_near(sol, sl, s, tau) {
                Ok(st) => {
                    let (m, p) = self.densities_from(&st);
                    (m + p) * Self::dtau_ds(sl, s)
                }
                Err(e) => {
                    err.set(Some(e));
                    0.0
                }
            }
        };
        let v = integrate(f, sl.s_cut, s_hi, Tol { abs: 1e-12, rel: 1e-11 })?;
        if let Some(e) = err.take() {
            return Err(e);
        }
        Ok(head + v)
    }

    fn tabulate(&self, sol: &EntropySolution, sl: &SegmentLaw) -> Result<Table> {
        let n = TABLE_POINTS;
        let s: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
        let mut g = vec![0.0; n];
        let mut frac_plus = vec![0.5; n];
        let mut a_minus = vec![0.0; n];
        let mut a_plus = vec![0.0; n];
        let first = if sl.singular { 1 } else { 0 };
        let cut = (sl.s_cut * (n - 1) as f64).ceil() as usize;
        let mut states: Vec<Option<ShockState>> = vec![None; n];
        let mut prev: Option<ShockState> = None;
        for k in (first.max(cut)..n).rev() {
            let tau = Self::tau_of(sl, s[k]);
            let st = match &prev {
                Some(p) => sol.segment_state_near(sl.id, tau, p)?,
                None => sol.segment_state(sl.id, tau)?,
            };
            let (m, p) = self.densities_from(&st);
            g[k] = (m + p) * Self::dtau_ds(sl, s[k]);
            frac_plus[k] = if m + p > 0.0 { p / (m + p) } else { 0.5 };
            a_minus[k] = st.a_minus;
            a_plus[k] = st.a_plus;
            states[k] = Some(st);
            prev = Some(st);
        }
        if sl.singular {
            let anchor = sol.tree().segments[sl.id].anchor;
            if cut >= 1 && cut < n {
                // narrow start: width, labels and branch density are all linear in s there
                let head = self.reference_width(sol, sl.id, Self::tau_of(sl, s[cut]))? / self.width;
                for k in 0..cut {
                    let w = s[k] / s[cut];
                    g[k] = head / s[cut];
                    frac_plus[k] = frac_plus[cut];
                    a_minus[k] = anchor + w * (a_minus[cut] - anchor);
                    a_plus[k] = anchor + w * (a_plus[cut] - anchor);
                }
            } else if cut == 0 {
                g[0] = (2.0 * g[1] - g[2]).max(0.0);
                frac_plus[0] = frac_plus[1];
                let st = sol.segment_state(sl.id, sl.t_lo)?;
                a_minus[0] = st.a_minus.min(a_minus[1]);
                a_plus[0] = st.a_plus.max(a_plus[1]);
            }
        }
        let mut cum = vec![0.0; n];
        for k in 1..n {
            cum[k] = cum[k - 1] + 0.5 * (g[k] + g[k - 1]) * (s[k] - s[k - 1]);
        }
        Ok(Table { s, states, cum, frac_plus, a_minus, a_plus })
    }

    /// Sum of all segment probabilities (should be 1).
    pub fn normalization(&self) -> f64 {
        self.segments.iter().map(|s| s.mass + s.start_atom).sum()
    }

    /// Segment probabilities from interval widths alone, without integrating densities.
    pub fn width_masses(&self, sol: &EntropySolution) -> Result<Vec<(usize, f64)>> {
        self.segments
            .iter()
            .map(|sl| {
                let (l1, r1) = reference_edges(&sol.segment_state(sl.id, sl.t_hi)?, self.t_ref);
                let (l0, r0) = reference_edges(&sol.segment_state(sl.id, sl.t_lo)?, self.t_ref);
                Ok((sl.id, ((r1 - l1) - (r0 - l0)) / self.width))
            })
            .collect()
    }

    /// Probabilities of each child at the merger that created segment `id`.
    pub fn branch_probs(&self, sol: &EntropySolution, id: usize) -> Result<Vec<BranchProb>> {
        let seg = sol.tree().segment(id)?;
        let total: f64 = seg.children.iter().map(|c| self.segment_law(*c).map(|s| s.subtree_mass)).sum::<Result<f64>>()?;
        seg.children.iter().map(|&c| Ok(BranchProb { child: c, prob: self.segment_law(c)?.subtree_mass / total })).collect()
    }

    /// `(sum_i B_i u*_i, u*)` at the merger that created segment `id`.
    pub fn velocity_identity(&self, sol: &EntropySolution, id: usize) -> Result<(f64, f64)> {
        let seg = sol.tree().segment(id)?;
        let tm = seg.t_start;
        let mut lhs = 0.0;
        for b in self.branch_probs(sol, id)? {
            lhs += b.prob * sol.segment_state(b.child, tm)?.speed();
        }
        Ok((lhs, sol.segment_state(id, tm)?.speed()))
    }

    /// Jump rates `(lambda_minus, lambda_plus)` off segment `id` at `tau`.
    pub fn jump_rates(&self, sol: &EntropySolution, id: usize, tau: f64) -> Result<(f64, f64)> {
        let sl = self.segment_law(id)?;
        if !(tau > sl.t_lo && tau <= sl.t_hi) {
            return Err(Error::OutOfSupport { t: tau, lo: sl.t_lo, hi: sl.t_hi });
        }
        let below = sl.subtree_mass - sl.mass;
        let p_tau = below + self.segment_integral(sol, sl, tau)?;
        let (m, p) = self.densities(sol, id, tau)?;
        Ok((m / p_tau, p / p_tau))
    }

    /// Probability that a path sits on the shock tree at time `t`.
    pub fn atom_mass(&self, sol: &EntropySolution, t: f64) -> Result<f64> {
        let mut m = 0.0;
        for id in sol.tree().descendants_live_at(self.shock_id, t) {
            let (l, r) = reference_edges(&sol.segment_state(id, t)?, self.t_ref);
            m += (r - l) / self.width;
        }
        Ok(m)
    }

    fn draw_in_segment<R: Rng>(&self, sol: &EntropySolution, sl: &SegmentLaw, u: f64, rng: &mut R) -> Result<(f64, Side, f64)> {
        let tb = &sl.table;
        let k = tb.cum.partition_point(|&c| c <= u).clamp(1, tb.cum.len() - 1);
        let (c0, c1) = (tb.cum[k - 1], tb.cum[k]);
        let w = if c1 > c0 { ((u - c0) / (c1 - c0)).clamp(0.0, 1.0) } else { 0.5 };
        let s = tb.s[k - 1] + w * (tb.s[k] - tb.s[k - 1]);
        let tau = Self::tau_of(sl, s).clamp(sl.t_lo, sl.t_hi);
        let lerp = |v: &[f64]| v[k - 1] + w * (v[k] - v[k - 1]);
        let side = if rng.random::<f64>() < lerp(&tb.frac_plus) { Side::Plus } else { Side::Minus };
        let label = if self.exact_labels {
            let st = sol.segment_state(sl.id, tau)?;
            if side == Side::Plus {
                st.a_plus
            } else {
                st.a_minus
            }
        } else if side == Side::Plus {
            lerp(&tb.a_plus)
        } else {
            lerp(&tb.a_minus)
        };
        Ok((tau, side, label))
    }

    fn draw_start_atom<R: Rng>(&self, sol: &EntropySolution, sl: &SegmentLaw, rng: &mut R) -> Result<(f64, Side, f64)> {
        let st = sol.segment_state(sl.id, sl.t_lo)?;
        let (l, r) = reference_edges(&st, self.t_ref);
        let b = l + rng.random::<f64>() * (r - l);
        let u0 = sol.initial();
        let lag = self.t_ref - sol.t0();
        let label = brent(|a| a + lag * u0.velocity(a) - b, st.a_minus, st.a_plus, 1e-14 * (1.0 + b.abs()))?;
        let anchor = sol.tree().segments[sl.id].anchor;
        Ok((sl.t_lo, if label < anchor { Side::Minus } else { Side::Plus }, label))
    }

    fn draw_one(&self, sol: &EntropySolution, seed: u64, i: usize) -> Result<BackwardPath> {
        let mut rng = rng::stream(seed, i as u64);
        let tree = sol.tree();
        let mut cur = self.segment_law(self.shock_id)?;
        loop {
            let u = rng.random::<f64>() * cur.subtree_mass;
            let (tau, side, label) = if u < cur.mass {
                self.draw_in_segment(sol, cur, u, &mut rng)?
            } else if u < cur.mass + cur.start_atom || tree.segments[cur.id].children.is_empty() {
                self.draw_start_atom(sol, cur, &mut rng)?
            } else {
                let mut v = rng.random::<f64>() * (cur.subtree_mass - cur.mass - cur.start_atom);
                let children = &tree.segments[cur.id].children;
                let mut next = *children.last().expect("checked non-empty");
                for &c in children {
                    let m = self.segment_law(c)?.subtree_mass;
                    if v < m {
                        next = c;
                        break;
                    }
                    v -= m;
                }
                cur = self.segment_law(next)?;
                continue;
            };
            return Ok(BackwardPath { id: i, segment: cur.id, tau, side, label });
        }
    }

    /// Draws `n` independent backward paths; stream `i` depends only on `(seed, i)`.
    pub fn sample_paths(&self, sol: &EntropySolution, n: usize, seed: u64) -> Result<PathEnsemble> {
        if n == 0 {
            return invalid("need at least one path");
        }
        let paths = (0..n).into_par_iter().map(|i| self.draw_one(sol, seed, i)).collect::<Result<Vec<_>>>()?;
        Ok(PathEnsemble { root: self.shock_id, t0: sol.t0(), tf: self.tf, seed, paths })
    }
}

/// One realization: on the tree for `t >= tau`, on the characteristic of `label` before.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BackwardPath {
    pub id: usize,
    /// Segment the path leaves from.
    pub segment: usize,
    pub tau: f64,
    pub side: Side,
    pub label: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PathPoint {
    pub x: f64,
    pub v: f64,
    pub label: StateLabel,
    /// Segment carrying the path when it is on the shock.
    pub on: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PathEnsemble {
    pub root: usize,
    pub t0: f64,
    pub tf: f64,
    pub seed: u64,
    pub paths: Vec<BackwardPath>,
}

impl PathEnsemble {
    /// Positions, right velocities and labels of every path at `t`.
    pub fn snapshot(&self, sol: &EntropySolution, t: f64) -> Result<Vec<PathPoint>> {
        if !(t >= self.t0 && t <= self.tf) {
            return Err(Error::OutOfSupport { t, lo: self.t0, hi: self.tf });
        }
        let tree = sol.tree();
        let mut states: HashMap<usize, ShockState> = HashMap::new();
        for id in tree.descendants_live_at(self.root, t) {
            states.insert(id, sol.segment_state(id, t)?);
        }
        let u0 = sol.initial();
        let mut carrier: HashMap<usize, usize> = HashMap::new();
        let mut out = Vec::with_capacity(self.paths.len());
        for p in &self.paths {
            if t < p.tau {
                let v = u0.velocity(p.label);
                let label = if p.side == Side::Plus { StateLabel::Right } else { StateLabel::Left };
                out.push(PathPoint { x: p.label + (t - self.t0) * v, v, label, on: None });
                continue;
            }
            let id = match carrier.get(&p.segment) {
                Some(&c) => c,
                None => {
                    let c = tree
                        .ancestry(p.segment)
                        .into_iter()
                        .find(|a| states.contains_key(a))
                        .ok_or(Error::UnknownShock(p.segment))?;
                    carrier.insert(p.segment, c);
                    c
                }
            };
            let st = &states[&id];
            out.push(PathPoint { x: st.x, v: st.speed(), label: StateLabel::OnShock, on: Some(id) });
        }
        Ok(out)
    }

    pub fn velocities(&self, sol: &EntropySolution, t: f64) -> Result<Vec<f64>> {
        Ok(self.snapshot(sol, t)?.into_iter().map(|p| p.v).collect())
    }

    /// Fraction of paths on the shock tree at `t`.
    pub fn on_shock_fraction(&self, sol: &EntropySolution, t: f64) -> Result<f64> {
        let s = self.snapshot(sol, t)?;
        Ok(s.iter().filter(|p| p.on.is_some()).count() as f64 / s.len() as f64)
    }

    /// Long-format CSV: one row per path and time.
    pub fn write_csv<W: Write>(&self, sol: &EntropySolution, times: &[f64], w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["path_id", "tau", "side", "t", "x", "label"]).map_err(csv_err)?;
        let snaps = times.iter().map(|&t| self.snapshot(sol, t)).collect::<Result<Vec<_>>>()?;
        for (i, p) in self.paths.iter().enumerate() {
            for (j, &t) in times.iter().enumerate() {
                let q = &snaps[j][i];
                wr.write_record([
                    p.id.to_string(),
                    format!("{:.12e}", p.tau),
                    p.side.sign().to_string(),
                    format!("{t:.12e}"),
                    format!("{:.12e}", q.x),
                    q.label.code().to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidInput(format!("csv: {other:?}")),
    }
}

/// Velocities of an ensemble at one time, with the atom (if any) each sample sits in.
pub struct VelocitySnapshot {
    pub v: Vec<f64>,
    pub atom: Vec<Option<usize>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MeanCheck {
    pub t: f64,
    pub mean: f64,
    pub se: f64,
    pub target: f64,
    pub deviation: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BinCheck {
    pub t: f64,
    pub s: f64,
    pub bin: String,
    pub count: usize,
    /// Mean of the conditioning velocity over the bin.
    pub given: f64,
    pub mean: f64,
    pub se: f64,
    pub deviation: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MartingaleReport {
    pub target: f64,
    pub unconditional: Vec<MeanCheck>,
    pub conditional: Vec<BinCheck>,
    /// Bins with fewer than the minimum count, skipped.
    pub empty_bins: Vec<String>,
    pub max_abs_z: f64,
    pub pass: bool,
}

fn within(dev: f64, se: f64, scale: f64) -> bool {
    if se > 0.0 {
        dev.abs() <= 3.0 * se
    } else {
        dev.abs() <= 1e-12 * (1.0 + scale.abs())
    }
}

/// Unconditional means at `times` and conditional means given the velocity at a later time.
///
/// With `conditioning = None`, each time is conditioned on the next one in `times`.
pub fn check_martingale<F>(target: f64, times: &[f64], conditioning: Option<f64>, snap: F) -> Result<MartingaleReport>
where
    F: Fn(f64) -> Result<VelocitySnapshot>,
{
    let mut ts = times.to_vec();
    ts.sort_by(f64::total_cmp);
    let mut cache: Vec<(f64, VelocitySnapshot)> = Vec::new();
    for &t in ts.iter().chain(conditioning.iter()) {
        if !cache.iter().any(|c| c.0 == t) {
            cache.push((t, snap(t)?));
        }
    }
    let get = |t: f64| &cache.iter().find(|c| c.0 == t).expect("cached").1;
    let mut report =
        MartingaleReport { target, unconditional: vec![], conditional: vec![], empty_bins: vec![], max_abs_z: 0.0, pass: true };
    for &t in &ts {
        let (mean, se) = mean_se(&get(t).v);
        let deviation = mean - target;
        let pass = within(deviation, se, target);
        if se > 0.0 {
            report.max_abs_z = report.max_abs_z.max(deviation.abs() / se);
        }
        report.pass &= pass;
        report.unconditional.push(MeanCheck { t, mean, se, target, deviation, pass });
    }
    let pairs: Vec<(f64, f64)> = match conditioning {
        Some(s) => ts.iter().filter(|&&t| t < s).map(|&t| (t, s)).collect(),
        None => ts.windows(2).map(|w| (w[0], w[1])).collect(),
    };
    for (t, s) in pairs {
        let (now, later) = (get(t), get(s));
        let mut atoms: Vec<(usize, Vec<usize>)> = Vec::new();
        let mut free: Vec<usize> = Vec::new();
        for (i, a) in later.atom.iter().enumerate() {
            match a {
                Some(id) => match atoms.iter_mut().find(|g| g.0 == *id) {
                    Some(g) => g.1.push(i),
                    None => atoms.push((*id, vec![i])),
                },
                None => free.push(i),
            }
        }
        let mut groups: Vec<(String, Vec<usize>)> = atoms.into_iter().map(|(id, v)| (format!("shock:{id}"), v)).collect();
        if free.len() >= MIN_BIN {
            for (k, b) in quantile_bins(&later.v, &free, MIN_BIN, MAX_BINS).into_iter().enumerate() {
                groups.push((format!("q{k}"), b));
            }
        } else if !free.is_empty() {
            groups.push(("free".into(), free));
        }
        for (name, idx) in groups {
            if idx.len() < MIN_BIN {
                report.empty_bins.push(format!("t={t}|s={s}|{name}"));
                continue;
            }
            let d: Vec<f64> = idx.iter().map(|&i| now.v[i] - later.v[i]).collect();
            let (deviation, se) = mean_se(&d);
            let given = idx.iter().map(|&i| later.v[i]).sum::<f64>() / idx.len() as f64;
            let pass = within(deviation, se, given);
            if se > 0.0 {
                report.max_abs_z = report.max_abs_z.max(deviation.abs() / se);
            }
            report.pass &= pass;
            report.conditional.push(BinCheck {
                t,
                s,
                bin: name,
                count: idx.len(),
                given,
                mean: given + deviation,
                se,
                deviation,
                pass,
            });
        }
    }
    Ok(report)
}

/// Martingale checks for sampled geometric paths.
pub fn verify_martingale(
    ens: &PathEnsemble,
    sol: &EntropySolution,
    times: &[f64],
    conditioning: Option<f64>,
) -> Result<MartingaleReport> {
    let target = sol.segment_state(ens.root, ens.tf)?.speed();
    check_martingale(target, times, conditioning, |t| {
        let s = ens.snapshot(sol, t)?;
        Ok(VelocitySnapshot { v: s.iter().map(|p| p.v).collect(), atom: s.iter().map(|p| p.on).collect() })
    })
}

/// Zero-noise limit process: leaves the shock at `tf` to either side with probability one half.
#[derive(Clone, Debug, Serialize)]
pub struct TwoStateProcess {
    pub tf: f64,
    pub x_final: f64,
    pub u_minus: f64,
    pub u_plus: f64,
    pub a_minus: f64,
    pub a_plus: f64,
}

impl TwoStateProcess {
    pub fn at_shock(sol: &EntropySolution, id: usize, tf: f64) -> Result<Self> {
        let s = sol.segment_state(id, tf)?;
        Ok(TwoStateProcess { tf, x_final: s.x, u_minus: s.u_minus, u_plus: s.u_plus, a_minus: s.a_minus, a_plus: s.a_plus })
    }

    pub fn sample(&self, n: usize, seed: u64) -> Vec<Side> {
        (0..n)
            .into_par_iter()
            .map(|i| if rng::stream(seed, i as u64).random::<bool>() { Side::Plus } else { Side::Minus })
            .collect()
    }

    /// Right velocity before `tf` on the given side.
    pub fn velocity(&self, side: Side) -> f64 {
        match side {
            Side::Minus => self.u_minus,
            Side::Plus => self.u_plus,
        }
    }

    pub fn verify(&self, sides: &[Side], times: &[f64]) -> Result<MartingaleReport> {
        if times.iter().any(|&t| t >= self.tf) {
            return invalid("two-state checks need times before the final time");
        }
        let target = 0.5 * (self.u_minus + self.u_plus);
        check_martingale(target, times, None, |_| {
            Ok(VelocitySnapshot { v: sides.iter().map(|&s| self.velocity(s)).collect(), atom: vec![None; sides.len()] })
        })
    }

    /// Average of the data velocity over the shock interval, which the two states straddle.
    pub fn shock_velocity_representation(&self, sol: &EntropySolution) -> Result<f64> {
        let (am, ap) = (self.a_minus, self.a_plus);
        let mut breaks: Vec<f64> = sol.initial().breakpoints();
        breaks.retain(|&b| b > am && b < ap);
        let v = integrate_split(|a| sol.initial().velocity(a), am, ap, &breaks, Tol::tight())?;
        Ok(v / (ap - am))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial::InitialVelocity;

    fn riemann() -> EntropySolution {
        EntropySolution::new(InitialVelocity::riemann(1.0, -1.0), 2.0).unwrap()
    }

    #[test]
    fn riemann_law_is_flat() {
        let sol = riemann();
        let law = BranchLaw::new(&sol, 0, 0.0, 2.0).unwrap();
        for tau in [0.1, 0.7, 2.0] {
            let (m, p) = law.densities(&sol, 0, tau).unwrap();
            assert!((m - 0.25).abs() < 1e-15 && (p - 0.25).abs() < 1e-15);
            let (lm, lp) = law.jump_rates(&sol, 0, tau).unwrap();
            assert!((lm - 0.5 / tau).abs() < 1e-10 && (lp - 0.5 / tau).abs() < 1e-10);
        }
        assert!((law.normalization() - 1.0).abs() < 1e-12);
        assert!((law.atom_mass(&sol, 0.5).unwrap() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn sawtooth_density_closed_form() {
        let (t0, tf) = (0.2, 1.5);
        let sol = EntropySolution::new(InitialVelocity::sawtooth(1.0, t0).unwrap(), tf).unwrap();
        let law = BranchLaw::new(&sol, 0, t0, tf).unwrap();
        for tau in [0.21, 0.5, 1.4] {
            let (m, p) = law.densities(&sol, 0, tau).unwrap();
            let want = t0 * tf / (2.0 * tau * tau * (tf - t0));
            assert!((m - want).abs() < 1e-13 && (p - want).abs() < 1e-13);
        }
        assert!((law.normalization() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn late_reference_is_rejected() {
        let sol = EntropySolution::new(InitialVelocity::linear_ramp(-1.0, 1.0), 3.0).unwrap();
        assert!(matches!(BranchLaw::new(&sol, 0, 1.0, 3.0), Err(Error::T0TooLate { .. })));
        let sol = riemann();
        assert!(matches!(BranchLaw::new(&sol, 0, 0.5, 2.0), Err(Error::T0TooLate { .. })));
    }

    #[test]
    fn ramp_focus_atom() {
        let sol = EntropySolution::new(InitialVelocity::linear_ramp(-1.0, 1.0), 3.0).unwrap();
        let law = BranchLaw::new(&sol, 0, 0.5, 3.0).unwrap();
        let sl = law.segment_law(0).unwrap();
        assert!((sl.start_atom - 0.5 / 2.5).abs() < 1e-12);
        assert!((law.normalization() - 1.0).abs() < 1e-10);
    }
}
