//! Small statistics helpers for Monte Carlo checks.

use serde::Serialize;

/// Sample mean and its standard error.
pub fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (m, f64::NAN);
    }
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

pub fn variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)
}

/// Delete-one jackknife estimate and standard error of `stat`.
pub fn jackknife<F: Fn(&[f64]) -> f64>(x: &[f64], stat: F) -> (f64, f64) {
    let n = x.len();
    let full = stat(x);
    let mut buf: Vec<f64> = Vec::with_capacity(n.saturating_sub(1));
    let mut loo = Vec::with_capacity(n);
    for i in 0..n {
        buf.clear();
        buf.extend_from_slice(&x[..i]);
        buf.extend_from_slice(&x[i + 1..]);
        loo.push(stat(&buf));
    }
    let m = loo.iter().sum::<f64>() / n as f64;
    let v = loo.iter().map(|v| (v - m) * (v - m)).sum::<f64>() * (n as f64 - 1.0) / n as f64;
    (full, v.sqrt())
}

/// Jackknife standard error of the mean, in O(n).
pub fn jackknife_mean(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let s: f64 = x.iter().sum();
    let full = s / n;
    let loo: Vec<f64> = x.iter().map(|v| (s - v) / (n - 1.0)).collect();
    let m = loo.iter().sum::<f64>() / n;
    let v = loo.iter().map(|v| (v - m) * (v - m)).sum::<f64>() * (n - 1.0) / n;
    (full, v.sqrt())
}

/// Normal-approximation half width (3 sigma plus continuity correction) for a binomial proportion.
pub fn binomial_halfwidth(p: f64, n: usize, z: f64) -> f64 {
    z * (p * (1.0 - p) / n as f64).sqrt() + 0.5 / n as f64
}

/// Kolmogorov-Smirnov statistic against a continuous CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d
}

/// Asymptotic p-value of the KS statistic `d` for `n` samples.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lam = (sn + 0.12 + 0.11 / sn) * d;
    if lam < 1e-3 {
        return 1.0;
    }
    let mut s = 0.0;
    for j in 1..200 {
        let j = j as f64;
        let term = 2.0 * (-1f64).powf(j - 1.0) * (-2.0 * j * j * lam * lam).exp();
        s += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    s.clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    LinearFit { slope, intercept: my - slope * mx, r2 }
}

/// Index groups of equal-count quantile bins of `values`, each with at least `min_count` members.
pub fn quantile_bins(values: &[f64], idx: &[usize], min_count: usize, max_bins: usize) -> Vec<Vec<usize>> {
    if idx.len() < min_count {
        return vec![];
    }
    let mut order = idx.to_vec();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let nb = (order.len() / min_count).clamp(1, max_bins);
    let size = order.len() / nb;
    (0..nb)
        .map(|k| {
            let end = if k + 1 == nb { order.len() } else { (k + 1) * size };
            order[k * size..end].to_vec()
        })
        .collect()
}
