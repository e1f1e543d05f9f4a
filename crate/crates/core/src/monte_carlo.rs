//! Backward stochastic Lagrangian flows by Euler-Maruyama, escape statistics and the
//! fluctuation functional.

use crate::error::{invalid, Error, Result};
use crate::initial::{ln_cosh, InitialVelocity};
use crate::rng;
use crate::stats::{binomial_halfwidth, jackknife_mean, linear_fit, mean_se, variance, LinearFit};
use crate::viscous::{khokhlov_potential, khokhlov_potential_rate, khokhlov_velocity, ViscousSolution};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Velocity field driving the flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VelocitySource {
    /// `(x - L tanh(L x / 2 nu t)) / t`, or the sawtooth when `nu = 0`.
    Khokhlov { length: f64 },
    /// `-U tanh(U x / 2 nu)`, or `-U sign(x)` when `nu = 0`.
    StationaryShock { amplitude: f64 },
    /// Hopf-Cole quadrature of the given data (slow; small ensembles only).
    HopfCole { initial: InitialVelocity },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SdeConfig {
    pub source: VelocitySource,
    pub nu: f64,
    pub kappa: f64,
    /// Terminal point.
    pub x: f64,
    pub t: f64,
    /// Earlier time reached by the backward flow.
    pub s: f64,
    /// Number of base steps over `[s, t]`; steps are refined inside the shock layer.
    pub steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    /// Intermediate times at which positions are recorded.
    #[serde(default)]
    pub record: Vec<f64>,
}

/// Saturation depth of `tanh` beyond which the layer drift is constant to 1e-12.
const LAYER_WIDTHS: f64 = 30.0;

enum Field {
    Khokhlov { length: f64, nu: f64 },
    Shock { amp: f64, nu: f64 },
    HopfCole(Box<ViscousSolution>),
}

impl Field {
    fn u(&self, x: f64, t: f64) -> f64 {
        match self {
            Field::Khokhlov { length, nu } => {
                if *nu > 0.0 {
                    khokhlov_velocity(*length, *nu, x, t)
                } else {
                    (x - length * sign(x)) / t
                }
            }
            Field::Shock { amp, nu } => {
                if *nu > 0.0 {
                    -amp * (amp * x / (2.0 * nu)).tanh()
                } else {
                    -amp * sign(x)
                }
            }
            Field::HopfCole(v) => v.velocity(x, t).unwrap_or(f64::NAN),
        }
    }

    /// `(half width, speed)` of the region near `x = 0` needing fine steps at time `t`.
    fn layer(&self, t: f64, kappa: f64) -> Option<(f64, f64)> {
        match self {
            Field::Khokhlov { length, nu } => Some((LAYER_WIDTHS * nu * t / length, length / t)),
            Field::Shock { amp, nu } => Some((LAYER_WIDTHS * nu / amp, *amp)),
            Field::HopfCole(_) => {
                let _ = kappa;
                None
            }
        }
    }

    /// Fine step inside the layer.
    fn inner_step(&self, t: f64, kappa: f64) -> f64 {
        match self {
            Field::Khokhlov { length, nu } | Field::Shock { amp: length, nu } => {
                let speed = match self {
                    Field::Khokhlov { .. } => length / t,
                    _ => *length,
                };
                if *nu > 0.0 {
                    nu / (10.0 * speed * speed)
                } else {
                    kappa / (100.0 * speed * speed)
                }
            }
            Field::HopfCole(_) => f64::INFINITY,
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl SdeConfig {
    pub fn prandtl(&self) -> f64 {
        if self.kappa > 0.0 {
            self.nu / self.kappa
        } else {
            f64::INFINITY
        }
    }

    pub fn base_dt(&self) -> f64 {
        (self.t - self.s) / self.steps as f64
    }

    fn field(&self) -> Result<Field> {
        Ok(match &self.source {
            VelocitySource::Khokhlov { length } => {
                if !(*length > 0.0) {
                    return invalid("sawtooth length must be positive");
                }
                Field::Khokhlov { length: *length, nu: self.nu }
            }
            VelocitySource::StationaryShock { amplitude } => {
                if !(*amplitude > 0.0) {
                    return invalid("shock amplitude must be positive");
                }
                Field::Shock { amp: *amplitude, nu: self.nu }
            }
            VelocitySource::HopfCole { initial } => Field::HopfCole(Box::new(ViscousSolution::new(initial.clone(), self.nu)?)),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu >= 0.0 && self.kappa >= 0.0) {
            return invalid("viscosity and noise diffusivity must be non-negative");
        }
        if !(self.t > self.s) {
            return invalid("backward flow needs s < t");
        }
        if matches!(self.source, VelocitySource::Khokhlov { .. }) && !(self.s > 0.0) {
            return invalid("the Khokhlov field is singular at t = 0");
        }
        if self.n_paths == 0 || self.steps == 0 {
            return invalid("need at least one path and one step");
        }
        if self.record.iter().any(|&r| !(r > self.s && r < self.t)) {
            return invalid("recording times must lie strictly between s and t");
        }
        let bound = 1e-2 * (self.t - self.s);
        if self.base_dt() > bound * (1.0 + 1e-12) {
            return Err(Error::StepTooCoarse { dt: self.base_dt(), bound });
        }
        if let VelocitySource::HopfCole { initial } = &self.source {
            if let Some(sup) = initial.sup_abs() {
                let layer = self.nu / (10.0 * sup * sup);
                if self.base_dt() > layer {
                    return Err(Error::StepTooCoarse { dt: self.base_dt(), bound: layer });
                }
            }
        }
        Ok(())
    }
}

/// Endpoints (and recorded positions) of a backward SDE ensemble.
#[derive(Clone, Debug, Serialize)]
pub struct SdeEnsemble {
    pub config: SdeConfig,
    pub endpoints: Vec<f64>,
    /// `recorded[k][i]`: position of path `i` at `config.record[k]`.
    pub recorded: Vec<Vec<f64>>,
    /// Mean number of steps per path.
    pub mean_steps: f64,
}

struct PathOut {
    end: f64,
    rec: Vec<f64>,
    steps: usize,
}

/// Integrates one backward path in `sigma = t - s'`; `stop` may end the path early.
fn run_path<R: Rng, S: FnMut(f64, f64) -> bool>(field: &Field, cfg: &SdeConfig, rng: &mut R, mut stop: S) -> PathOut {
    let horizon = cfg.t - cfg.s;
    let dt_base = cfg.base_dt();
    let amp = (2.0 * cfg.kappa).sqrt();
    let mut marks: Vec<f64> = cfg.record.iter().map(|&r| cfg.t - r).collect();
    marks.sort_by(f64::total_cmp);
    let mut rec = vec![f64::NAN; marks.len()];
    let mut next = 0;
    let (mut sigma, mut xi) = (0.0, cfg.x);
    let mut steps = 0;
    while sigma < horizon {
        let time = cfg.t - sigma;
        let mut dt = dt_base;
        if let Some((hw, speed)) = field.layer(time, cfg.kappa) {
            let inner = field.inner_step(time, cfg.kappa).min(dt_base);
            let d = xi.abs() - hw;
            dt = if d <= 0.0 {
                inner
            } else {
                // largest dt with speed*dt + 6 sqrt(2 kappa dt) <= d
                let b = 6.0 * amp;
                let r = (-b + (b * b + 4.0 * speed * d).sqrt()) / (2.0 * speed);
                (r * r).clamp(inner, dt_base)
            };
        }
        let mut land = horizon;
        if next < marks.len() {
            land = marks[next];
        }
        if sigma + dt >= land {
            dt = land - sigma;
        }
        let z: f64 = if cfg.kappa > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
        xi += -field.u(xi, time) * dt + amp * dt.sqrt() * z;
        sigma = if sigma + dt >= land { land } else { sigma + dt };
        steps += 1;
        while next < marks.len() && sigma >= marks[next] {
            rec[next] = xi;
            next += 1;
        }
        if stop(sigma, xi) {
            break;
        }
    }
    let order: Vec<usize> = {
        let mut o: Vec<usize> = (0..cfg.record.len()).collect();
        o.sort_by(|&a, &b| (cfg.t - cfg.record[a]).total_cmp(&(cfg.t - cfg.record[b])));
        o
    };
    let mut out_rec = vec![f64::NAN; rec.len()];
    for (k, &i) in order.iter().enumerate() {
        out_rec[i] = rec[k];
    }
    PathOut { end: xi, rec: out_rec, steps }
}

/// Euler-Maruyama for `d xi = -u(xi, t - sigma) d sigma + sqrt(2 kappa) dW` from `xi(0) = x`.
pub fn integrate_backward(cfg: &SdeConfig) -> Result<SdeEnsemble> {
    cfg.validate()?;
    let field = cfg.field()?;
    let outs: Vec<PathOut> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| run_path(&field, cfg, &mut rng::stream(cfg.seed, i as u64), |_, _| false))
        .collect();
    let mut recorded = vec![Vec::with_capacity(cfg.n_paths); cfg.record.len()];
    for o in &outs {
        for (k, r) in o.rec.iter().enumerate() {
            recorded[k].push(*r);
        }
    }
    let mean_steps = outs.iter().map(|o| o.steps as f64).sum::<f64>() / outs.len() as f64;
    Ok(SdeEnsemble { config: cfg.clone(), endpoints: outs.iter().map(|o| o.end).collect(), recorded, mean_steps })
}

impl SdeEnsemble {
    /// CSV with a `#` header recording the run parameters.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let c = &self.config;
        writeln!(
            w,
            "# seed={} dt={:e} n={} nu={:e} kappa={:e} pr={:e}",
            c.seed,
            c.base_dt(),
            c.n_paths,
            c.nu,
            c.kappa,
            c.prandtl()
        )?;
        let mut wr = csv::Writer::from_writer(w);
        let mut head = vec!["path_id".to_string(), "endpoint".to_string()];
        head.extend(c.record.iter().map(|r| format!("x_at_{r}")));
        wr.write_record(&head).map_err(crate::backward::csv_err)?;
        for (i, e) in self.endpoints.iter().enumerate() {
            let mut row = vec![i.to_string(), format!("{e:.15e}")];
            row.extend(self.recorded.iter().map(|r| format!("{:.15e}", r[i])));
            wr.write_record(&row).map_err(crate::backward::csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EscapeReport {
    pub pr: f64,
    pub kappa: f64,
    pub nu: f64,
    pub amplitude: f64,
    pub horizon: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub threshold: f64,
    pub n: usize,
    pub probability: f64,
    pub std_error: f64,
    /// Fraction of escaped paths on the negative side.
    pub left_fraction: f64,
    pub chebyshev_bound: f64,
    /// `1 - bound - 3 sigma` (with continuity correction).
    pub lower_bound: f64,
    pub pass: bool,
    pub base_dt: f64,
    pub mean_steps: f64,
    pub seed: u64,
}

/// Escape exponent of the stationary shock: `min(1, 1/Pr)`, with `Pr = 0` giving 1.
pub fn stationary_alpha(pr: f64) -> f64 {
    if pr <= 1.0 {
        1.0
    } else {
        1.0 / pr
    }
}

/// Probability that the backward flow started on a stationary shock ends at `|xi| >= alpha (1 - eps) U t`.
pub fn escape_probability(
    amplitude: f64,
    pr: f64,
    kappa: f64,
    horizon: f64,
    epsilon: f64,
    n: usize,
    steps: usize,
    seed: u64,
) -> Result<EscapeReport> {
    if !(kappa > 0.0 && pr >= 0.0 && epsilon > 0.0 && epsilon < 1.0) {
        return invalid("escape needs kappa > 0, Pr >= 0 and 0 < epsilon < 1");
    }
    let nu = pr * kappa;
    let cfg = SdeConfig {
        source: VelocitySource::StationaryShock { amplitude },
        nu,
        kappa,
        x: 0.0,
        t: horizon,
        s: 0.0,
        steps,
        n_paths: n,
        seed,
        record: vec![],
    };
    let ens = integrate_backward(&cfg)?;
    let alpha = stationary_alpha(pr);
    let threshold = alpha * (1.0 - epsilon) * amplitude * horizon;
    let escaped: Vec<f64> = ens.endpoints.iter().copied().filter(|e| e.abs() >= threshold).collect();
    let p = escaped.len() as f64 / n as f64;
    let left = escaped.iter().filter(|&&e| e < 0.0).count() as f64 / escaped.len().max(1) as f64;
    let bound = kappa / (epsilon * epsilon * alpha * alpha * amplitude * amplitude * horizon);
    let lower = 1.0 - bound - binomial_halfwidth(p, n, 3.0);
    Ok(EscapeReport {
        pr,
        kappa,
        nu,
        amplitude,
        horizon,
        epsilon,
        alpha,
        threshold,
        n,
        probability: p,
        std_error: (p * (1.0 - p) / n as f64).sqrt(),
        left_fraction: left,
        chebyshev_bound: bound,
        lower_bound: lower,
        pass: p >= lower,
        base_dt: cfg.base_dt(),
        mean_steps: ens.mean_steps,
        seed,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct KhokhlovEscapeReport {
    pub pr: f64,
    pub kappa: f64,
    pub length: f64,
    pub tau: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub threshold: f64,
    pub n: usize,
    pub probability: f64,
    pub std_error: f64,
    pub left_fraction: f64,
    pub left_std_error: f64,
    /// Chebyshev bound on the failure probability, when its denominator is positive.
    pub chebyshev_bound: Option<f64>,
    pub seed: u64,
}

/// Escape in logarithmic time `tau = ln(t_f / t)` for the Khokhlov solution, with `t_f = 1`.
pub fn khokhlov_escape(
    length: f64,
    pr: f64,
    kappa: f64,
    tau: f64,
    epsilon: f64,
    n: usize,
    steps: usize,
    seed: u64,
) -> Result<KhokhlovEscapeReport> {
    if !(kappa > 0.0 && pr > 0.0 && length > 0.0 && tau > 0.0 && epsilon > 0.0 && epsilon < 1.0) {
        return invalid("escape needs positive kappa, Pr, length, tau and 0 < epsilon < 1");
    }
    if steps < 100 {
        return Err(Error::StepTooCoarse { dt: tau / steps as f64, bound: 1e-2 * tau });
    }
    let nu = pr * kappa;
    let tf = 1.0;
    let alpha = (1.0f64).min(1.0 / (2.0 * pr));
    let threshold = -0.5 * alpha * (1.0 - epsilon) * length * length * (1.0 - (-2.0 * tau).exp());
    let dt_base = tau / steps as f64;
    let ends: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i as u64);
            let (mut s, mut xi) = (0.0f64, 0.0f64);
            while s < tau {
                let scale = (-s).exp();
                let hw = LAYER_WIDTHS * nu * tf * scale / length;
                let noise = (2.0 * kappa * tf * scale).sqrt();
                let inner = (nu * tf * scale / (10.0 * length * length)).min(dt_base);
                let d = xi.abs() - hw;
                let mut dt = if d <= 0.0 {
                    inner
                } else {
                    let b = 6.0 * noise;
                    let speed = length + xi.abs();
                    let r = (-b + (b * b + 4.0 * speed * d).sqrt()) / (2.0 * speed);
                    (r * r).clamp(inner, dt_base)
                };
                dt = dt.min(tau - s);
                let z: f64 = rng.sample(StandardNormal);
                let drift = -(xi - length * (length * xi / (2.0 * nu * tf * scale)).tanh());
                xi += drift * dt + noise * dt.sqrt() * z;
                s += dt;
            }
            xi
        })
        .collect();
    let phi_star = |x: f64| -length * x.abs() + 0.5 * x * x;
    let hits: Vec<f64> = ends.iter().copied().filter(|&x| phi_star(x) <= threshold).collect();
    let p = hits.len() as f64 / n as f64;
    let m = hits.len().max(1) as f64;
    let left = hits.iter().filter(|&&x| x < 0.0).count() as f64 / m;
    let margin = 0.5 * epsilon * alpha * length * length * (1.0 - (-2.0 * tau).exp())
        - (kappa + nu * std::f64::consts::LN_2) * tf * (-tau).exp() * (1.0 - (-tau).exp());
    let second = 2.0
        * kappa
        * tf
        * (-tau).exp()
        * (2.0 / 3.0 * length * length * (1.0 - (-3.0 * tau).exp())
            + kappa * tf * (-tau).exp() * (tau - 0.5 * (1.0 - (-2.0 * tau).exp())));
    Ok(KhokhlovEscapeReport {
        pr,
        kappa,
        length,
        tau,
        epsilon,
        alpha,
        threshold,
        n,
        probability: p,
        std_error: (p * (1.0 - p) / n as f64).sqrt(),
        left_fraction: left,
        left_std_error: (0.25 / m).sqrt(),
        chebyshev_bound: (margin > 0.0).then(|| second / (margin * margin)),
        seed,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ScaleRow {
    pub kappa: f64,
    pub tau_esc: f64,
    pub ell_esc: f64,
    /// Median first time with `|xi| >= 10 ell_esc`.
    pub half_escape_time: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScaleReport {
    pub pr: f64,
    pub amplitude: f64,
    pub rows: Vec<ScaleRow>,
    pub fit: LinearFit,
}

/// Predicted escape time and distance for the stationary shock.
pub fn escape_scales(pr: f64, kappa: f64, amplitude: f64) -> Result<(f64, f64)> {
    if !(pr > 0.0 && kappa > 0.0 && amplitude > 0.0) {
        return invalid("escape scales need positive Pr, kappa and amplitude");
    }
    let nu = pr * kappa;
    Ok((kappa.max(nu) / (amplitude * amplitude), kappa / (stationary_alpha(pr).sqrt() * amplitude)))
}

/// Empirical half-escape times across `kappas` with a linear fit against `kappa`.
pub fn escape_time_scaling(pr: f64, kappas: &[f64], amplitude: f64, n: usize, seed: u64) -> Result<ScaleReport> {
    let mut rows = Vec::new();
    for (j, &kappa) in kappas.iter().enumerate() {
        let (tau_esc, ell_esc) = escape_scales(pr, kappa, amplitude)?;
        let horizon = 200.0 * tau_esc;
        let cfg = SdeConfig {
            source: VelocitySource::StationaryShock { amplitude },
            nu: pr * kappa,
            kappa,
            x: 0.0,
            t: horizon,
            s: 0.0,
            steps: 20_000,
            n_paths: n,
            seed: seed.wrapping_add(j as u64),
            record: vec![],
        };
        cfg.validate()?;
        let field = cfg.field()?;
        let target = 10.0 * ell_esc;
        let mut times: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut hit = f64::INFINITY;
                run_path(&field, &cfg, &mut rng::stream(cfg.seed, i as u64), |s, x| {
                    if x.abs() >= target {
                        hit = s;
                        true
                    } else {
                        false
                    }
                });
                hit
            })
            .collect();
        times.sort_by(f64::total_cmp);
        let half = times[n / 2];
        rows.push(ScaleRow { kappa, tau_esc, ell_esc, half_escape_time: half });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.kappa).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.half_escape_time).collect();
    Ok(ScaleReport { pr, amplitude, fit: linear_fit(&xs, &ys), rows })
}

/// Gaussian reference densities for the fluctuation functional.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub mean: f64,
    pub std: f64,
}

impl Gaussian {
    pub fn ln_pdf(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.std;
        -0.5 * z * z - self.std.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FluctuationReport {
    pub nu: f64,
    pub n: usize,
    pub mean_exp_w: f64,
    pub jackknife_error: f64,
    pub mean_w: f64,
    pub w_std_error: f64,
    pub exp_w_variance: f64,
    pub identity_pass: bool,
    pub jensen_pass: bool,
    pub seed: u64,
}

/// Forward-in-time setup for the fluctuation functional.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FluctuationConfig {
    pub source: VelocitySource,
    pub nu: f64,
    pub t0: f64,
    pub tf: f64,
    pub rho0: Gaussian,
    pub rho_f: Gaussian,
    pub steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub variance_cap: f64,
}

fn potential(source: &VelocitySource, nu: f64, x: f64, t: f64) -> Result<(f64, f64)> {
    match source {
        VelocitySource::Khokhlov { length } => {
            Ok((khokhlov_potential(*length, nu, x, t), khokhlov_potential_rate(*length, nu, x, t)))
        }
        VelocitySource::StationaryShock { amplitude } => Ok((-2.0 * nu * ln_cosh(amplitude * x / (2.0 * nu)), 0.0)),
        VelocitySource::HopfCole { .. } => invalid("the fluctuation functional needs a closed-form potential"),
    }
}

/// Samples `W = ln rho_f(X_f) - ln rho0(X_0) - [phi(X_f, t_f) - phi(X_0, t_0) - int d_t phi dt] / nu`
/// along `dX = u dt + sqrt(2 nu) dW` with `X_0 ~ rho0`.
pub fn fluctuation_samples(cfg: &FluctuationConfig) -> Result<Vec<f64>> {
    if !(cfg.nu > 0.0 && cfg.tf > cfg.t0 && cfg.steps >= 100 && cfg.n_paths >= 2) {
        return invalid("fluctuation check needs nu > 0, tf > t0, at least 100 steps and 2 paths");
    }
    if matches!(cfg.source, VelocitySource::Khokhlov { .. }) && !(cfg.t0 > 0.0) {
        return invalid("the Khokhlov field is singular at t = 0");
    }
    potential(&cfg.source, cfg.nu, 0.0, cfg.tf)?;
    let field = match &cfg.source {
        VelocitySource::Khokhlov { length } => Field::Khokhlov { length: *length, nu: cfg.nu },
        VelocitySource::StationaryShock { amplitude } => Field::Shock { amp: *amplitude, nu: cfg.nu },
        VelocitySource::HopfCole { .. } => unreachable!("rejected above"),
    };
    let dt = (cfg.tf - cfg.t0) / cfg.steps as f64;
    let amp = (2.0 * cfg.nu * dt).sqrt();
    (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(cfg.seed, i as u64);
            let z0: f64 = rng.sample(StandardNormal);
            let x0 = cfg.rho0.mean + cfg.rho0.std * z0;
            let mut x = x0;
            let (_, mut rate_prev) = potential(&cfg.source, cfg.nu, x, cfg.t0)?;
            let mut work = 0.0;
            for k in 0..cfg.steps {
                let t = cfg.t0 + dt * k as f64;
                let z: f64 = rng.sample(StandardNormal);
                x += field.u(x, t) * dt + amp * z;
                let (_, rate) = potential(&cfg.source, cfg.nu, x, t + dt)?;
                work += 0.5 * (rate + rate_prev) * dt;
                rate_prev = rate;
            }
            let (phi_f, _) = potential(&cfg.source, cfg.nu, x, cfg.tf)?;
            let (phi_0, _) = potential(&cfg.source, cfg.nu, x0, cfg.t0)?;
            Ok(cfg.rho_f.ln_pdf(x) - cfg.rho0.ln_pdf(x0) - (phi_f - phi_0 - work) / cfg.nu)
        })
        .collect()
}

/// Checks `E[e^W] = 1` with a jackknife error and `E[W] <= 0`.
pub fn fluctuation_check(cfg: &FluctuationConfig) -> Result<FluctuationReport> {
    let w = fluctuation_samples(cfg)?;
    let e: Vec<f64> = w.iter().map(|v| v.exp()).collect();
    let var = variance(&e);
    if !(var <= cfg.variance_cap) {
        return Err(Error::VarianceBlowup { variance: var, cap: cfg.variance_cap });
    }
    let (m, jk) = jackknife_mean(&e);
    let (mw, sw) = mean_se(&w);
    Ok(FluctuationReport {
        nu: cfg.nu,
        n: cfg.n_paths,
        mean_exp_w: m,
        jackknife_error: jk,
        mean_w: mw,
        w_std_error: sw,
        exp_w_variance: var,
        identity_pass: (m - 1.0).abs() <= 3.0 * jk,
        jensen_pass: mw <= 0.0,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(kappa: f64) -> SdeConfig {
        SdeConfig {
            source: VelocitySource::Khokhlov { length: 1.0 },
            nu: 0.1,
            kappa,
            x: 0.7,
            t: 1.0,
            s: 0.5,
            steps: 200,
            n_paths: 64,
            seed: 3,
            record: vec![0.8],
        }
    }

    #[test]
    fn zero_noise_follows_characteristic() {
        let e = integrate_backward(&cfg(0.0)).unwrap();
        let c = cfg(0.0);
        let u = khokhlov_velocity(1.0, c.nu, c.x, c.t);
        assert!(e.endpoints.iter().all(|&v| v == e.endpoints[0]));
        assert!((e.endpoints[0] - (c.x - u * (c.t - c.s))).abs() < 0.02);
    }

    #[test]
    fn coarse_steps_rejected() {
        let mut c = cfg(0.1);
        c.steps = 50;
        assert!(matches!(integrate_backward(&c), Err(Error::StepTooCoarse { .. })));
    }

    #[test]
    fn scales() {
        let (t, l) = escape_scales(1.0, 0.01, 1.0).unwrap();
        assert!((t - 0.01).abs() < 1e-15 && (l - 0.01).abs() < 1e-15);
        let (t, l) = escape_scales(4.0, 0.01, 1.0).unwrap();
        assert!((t - 0.04).abs() < 1e-15 && (l - 0.02).abs() < 1e-15);
    }

    #[test]
    fn chebyshev_arithmetic() {
        let r = escape_probability(1.0, 1.0, 0.01, 1.0, 0.5, 2000, 200, 1).unwrap();
        assert!((r.chebyshev_bound - 0.04).abs() < 1e-15);
        assert!(r.pass);
    }
}
