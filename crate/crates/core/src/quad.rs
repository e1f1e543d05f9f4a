//! Adaptive Gauss-Kronrod quadrature and scalar root/minimum search.

use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// Absolute and relative tolerance pair; the target is `max(abs, rel * |I|)`.
#[derive(Clone, Copy, Debug)]
pub struct Tol {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tol {
    fn default() -> Self {
        Tol { abs: 1e-10, rel: 1e-8 }
    }
}

impl Tol {
    pub fn tight() -> Self {
        Tol { abs: 1e-13, rel: 1e-12 }
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    val: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Adaptive 15-point Gauss-Kronrod on `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tol) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if b < a {
        return integrate(f, b, a, tol).map(|v| -v);
    }
    let (v, e) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, val: v, err: e });
    let mut total = v;
    let mut err = e;
    let mut pieces = 1usize;
    while err > tol.abs.max(tol.rel * total.abs()) {
        if pieces > 4000 {
            return Err(Error::QuadratureFail { estimate: total, error: err });
        }
        let p = heap.pop().expect("heap never empty");
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            return Err(Error::QuadratureFail { estimate: total, error: err });
        }
        let (v1, e1) = gk15(&f, p.a, m);
        let (v2, e2) = gk15(&f, m, p.b);
        total += v1 + v2 - p.val;
        err += e1 + e2 - p.err;
        heap.push(Piece { a: p.a, b: m, val: v1, err: e1 });
        heap.push(Piece { a: m, b: p.b, val: v2, err: e2 });
        pieces += 1;
        if pieces.is_multiple_of(64) {
            total = heap.iter().map(|p| p.val).sum();
            err = heap.iter().map(|p| p.err).sum();
        }
    }
    Ok(heap.iter().map(|p| p.val).sum())
}

/// Integrates over `[a, b]` splitting at every breakpoint strictly inside.
pub fn integrate_split<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], tol: Tol) -> Result<f64> {
    if b < a {
        return integrate_split(f, b, a, breaks, tol).map(|v| -v);
    }
    let mut pts: Vec<f64> = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&p| p > a && p < b).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    pts.extend(inner);
    pts.push(b);
    let n = (pts.len() - 1) as f64;
    let sub = Tol { abs: tol.abs / n, rel: tol.rel };
    let mut s = 0.0;
    for w in pts.windows(2) {
        s += integrate(&f, w[0], w[1], sub)?;
    }
    Ok(s)
}

/// Brent root search on a sign-changing bracket.
pub fn brent<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, xtol: f64) -> Result<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::RootNotConverged(format!("no sign change on [{a}, {b}]: f = {fa:e}, {fb:e}")));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Err(Error::RootNotConverged("brent iteration limit".into()))
}

/// Golden-section minimization on `[a, b]`; returns `(argmin, value)`.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, xtol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > xtol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        if c >= d {
            break;
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// `ln(sum(exp(v)))` with max subtraction.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let v = integrate(|x| x.powi(5) - 2.0 * x, -1.0, 2.0, Tol::tight()).unwrap();
        assert!((v - (64.0 / 6.0 - 1.0 / 6.0 - 3.0)).abs() < 1e-13);
    }

    #[test]
    fn gaussian_mass() {
        let v = integrate(|x: f64| (-x * x).exp(), -10.0, 10.0, Tol::tight()).unwrap();
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn kink_split() {
        let v = integrate_split(|x: f64| x.abs(), -1.0, 3.0, &[0.0], Tol::tight()).unwrap();
        assert!((v - 5.0).abs() < 1e-13);
    }

    #[test]
    fn brent_cubic() {
        let r = brent(|x| x * x * x - 2.0, 0.0, 2.0, 1e-15).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn golden_quadratic() {
        let (x, _) = golden_min(|x| (x - 0.3) * (x - 0.3), -1.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
    }
}
