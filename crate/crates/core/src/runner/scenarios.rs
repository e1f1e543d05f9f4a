use super::*;
use crate::backward::{verify_martingale, BranchLaw};
use crate::dissipation::{delta_psi_profile, eulerian_rate, instantaneous_rate};
use crate::entropy::EntropySolution;
use crate::monte_carlo::{
    escape_probability, escape_time_scaling, fluctuation_samples, integrate_backward, khokhlov_escape, FluctuationConfig,
    SdeConfig,
};
use crate::rng::stream_seed;
use crate::stats::{binomial_halfwidth, jackknife_mean, ks_pvalue, ks_statistic, mean_se, variance};
use crate::transport::{
    evolve_density, evolve_scalar, initial_invariant, integrated_scalar_rate, momentum_anomaly, scalar_anomaly, scalar_invariant,
    weak_residual, window_at, TestBump,
};
use crate::viscous::{
    khokhlov_velocity, limit_measure, KhokhlovTransition, LimitRequest, PointSelector, PotentialSource, ViscousSolution,
};
use serde_json::{json, Value};

/// Tables, checks and a JSON report from one scenario.
#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    pub report: Value,
}

use CheckKind::{Invariant, Tolerance};

fn f(v: f64) -> String {
    format!("{v}")
}

pub(super) fn execute(spec: &ExperimentSpec) -> Result<Outcome> {
    let seed = spec.seed;
    match &spec.scenario {
        Scenario::AnomalySuite(p) => anomaly_suite(p),
        Scenario::GeometricMartingale(p) => geometric_martingale(p, seed),
        Scenario::LimitMeasures(p) => limit_measures(p),
        Scenario::CiFixedPoint(p) => ci_fixed_point(p, seed),
        Scenario::EscapeSweep(p) => escape_sweep(p, seed),
        Scenario::TransportSuite(p) => transport_suite(p),
        Scenario::Fluctuation(p) => fluctuation(p, seed),
    }
}

fn anomaly_suite(p: &AnomalySuite) -> Result<Outcome> {
    let sol = EntropySolution::new(p.initial.build()?, p.horizon_time)?;
    let mut rates =
        Table::new("rates", &["t", "entropy", "shock_id", "x", "instantaneous", "eulerian", "jump_term", "bregman_term"]);
    let mut checks = Vec::new();
    let mut pairs = p.entropies.clone();
    if !pairs.contains(&EntropyPair::Momentum) {
        pairs.push(EntropyPair::Momentum);
    }
    let mut worst_gap: f64 = 0.0;
    let mut worst_momentum: f64 = 0.0;
    let mut worst_sign: f64 = f64::NEG_INFINITY;
    for &t in &p.sample_times {
        for pair in &pairs {
            let lag = instantaneous_rate(&sol, pair, t)?;
            let eul = eulerian_rate(&sol, pair, t)?;
            for (a, b) in lag.shocks.iter().zip(&eul.shocks) {
                rates.push(vec![
                    f(t),
                    pair.name(),
                    a.id.to_string(),
                    f(a.x),
                    f(a.rate),
                    f(b.rate),
                    f(a.jump_term),
                    f(a.bregman_term),
                ]);
                worst_gap = worst_gap.max((a.rate - b.rate).abs());
                match pair {
                    EntropyPair::Momentum | EntropyPair::NegMomentum => worst_momentum = worst_momentum.max(a.rate.abs()),
                    _ => worst_sign = worst_sign.max(a.rate),
                }
            }
        }
    }
    checks.push(Check::at_most("lagrangian_equals_eulerian", Tolerance, worst_gap, 1e-8));
    checks.push(Check::at_most("momentum_rate_zero", Invariant, worst_momentum, 1e-10));
    if worst_sign.is_finite() {
        checks.push(Check::at_most("convex_rates_non_positive", Invariant, worst_sign, 1e-10));
    }
    let mut mono = Table::new("delta_psi", &["entropy", "shock_id", "s", "delta_psi"]);
    let tf = p.horizon_time;
    let t0 = sol.t0();
    let grid: Vec<f64> = (1..=p.monotone_samples).map(|i| t0 + (tf - t0) * i as f64 / p.monotone_samples as f64).collect();
    let mut worst_rise: f64 = 0.0;
    let finals = sol.tree().live_at(tf);
    for pair in &p.entropies {
        for &id in &finals {
            let prof = delta_psi_profile(&sol, pair, id, &grid)?;
            for w in prof.windows(2) {
                worst_rise = worst_rise.max(w[1].1 - w[0].1);
            }
            for (s, v) in prof {
                mono.push(vec![pair.name(), id.to_string(), f(s), f(v)]);
            }
        }
    }
    checks.push(Check::at_most("delta_psi_non_increasing", Invariant, worst_rise, 1e-8));
    Ok(Outcome {
        tables: vec![rates, mono],
        checks,
        report: json!({ "max_rate_gap": worst_gap, "max_momentum_rate": worst_momentum, "max_delta_psi_rise": worst_rise }),
    })
}

fn geometric_martingale(p: &GeometricMartingale, seed: u64) -> Result<Outcome> {
    let mut summary =
        Table::new("martingale", &["case", "kind", "t", "s", "bin", "count", "mean", "reference", "se", "deviation", "pass"]);
    let mut law_t = Table::new("law", &["case", "segment", "t_lo", "t_hi", "mass", "start_atom", "subtree_mass"]);
    let mut branch_t = Table::new("branching", &["case", "node", "child", "probability", "empirical", "se", "z"]);
    let mut tables = Vec::new();
    let mut checks = Vec::new();
    let mut reports = Vec::new();
    for (k, case) in p.cases.iter().enumerate() {
        let sol = EntropySolution::new(case.initial.build()?, p.horizon_time)?;
        let id = match p.shock_id {
            Some(i) => i,
            None => match sol.tree().live_at(p.horizon_time).as_slice() {
                [one] => *one,
                _ => return Err(Error::ConfigInvalid("several shocks at the horizon; set shock_id".into())),
            },
        };
        let t_ref = case.reference_time.unwrap_or(sol.t0());
        let law = BranchLaw::new(&sol, id, t_ref, p.horizon_time)?;
        for s in &law.segments {
            law_t.push(vec![
                k.to_string(),
                s.id.to_string(),
                f(s.t_lo),
                f(s.t_hi),
                f(s.mass),
                f(s.start_atom),
                f(s.subtree_mass),
            ]);
        }
        checks.push(Check::at_most(format!("case{k}_normalization"), Tolerance, (law.normalization() - 1.0).abs(), 1e-8));
        let ens = law.sample_paths(&sol, p.paths, stream_seed(seed, k as u64))?;
        let rep = verify_martingale(&ens, &sol, &p.snapshot_times, None)?;
        for m in &rep.unconditional {
            summary.push(vec![
                k.to_string(),
                "unconditional".into(),
                f(m.t),
                String::new(),
                String::new(),
                p.paths.to_string(),
                f(m.mean),
                f(m.target),
                f(m.se),
                f(m.deviation),
                m.pass.to_string(),
            ]);
        }
        for b in &rep.conditional {
            summary.push(vec![
                k.to_string(),
                "conditional".into(),
                f(b.t),
                f(b.s),
                b.bin.clone(),
                b.count.to_string(),
                f(b.mean),
                f(b.given),
                f(b.se),
                f(b.deviation),
                b.pass.to_string(),
            ]);
        }
        checks.push(Check::flag(format!("case{k}_unconditional_means"), Tolerance, rep.unconditional.iter().all(|m| m.pass)));
        checks.push(Check::flag(format!("case{k}_conditional_means"), Tolerance, rep.conditional.iter().all(|m| m.pass)));
        let mut identity_gap: f64 = 0.0;
        let mut branch_z: f64 = 0.0;
        for seg in &sol.tree().segments {
            if seg.children.is_empty() || !law.segments.iter().any(|s| s.id == seg.id) {
                continue;
            }
            let (lhs, rhs) = law.velocity_identity(&sol, seg.id)?;
            identity_gap = identity_gap.max((lhs - rhs).abs());
            let below: Vec<usize> = ens.paths.iter().filter(|q| q.tau < seg.t_start).map(|q| q.id).collect();
            let reach = |child: usize, seg_of: usize| sol.tree().ancestry(seg_of).contains(&child);
            let n = below.len();
            for bp in law.branch_probs(&sol, seg.id)? {
                let hits = ens.paths.iter().filter(|q| q.tau < seg.t_start && reach(bp.child, q.segment)).count();
                let emp = hits as f64 / n.max(1) as f64;
                let se = (bp.prob * (1.0 - bp.prob) / n.max(1) as f64).sqrt();
                let z = if se > 0.0 { (emp - bp.prob) / se } else { 0.0 };
                branch_z = branch_z.max(z.abs());
                branch_t.push(vec![k.to_string(), seg.id.to_string(), bp.child.to_string(), f(bp.prob), f(emp), f(se), f(z)]);
            }
        }
        checks.push(Check::at_most(format!("case{k}_velocity_identity"), Tolerance, identity_gap, 1e-8));
        checks.push(Check::at_most(format!("case{k}_branch_frequencies_z"), Tolerance, branch_z, 3.0));
        let mut paths = Vec::new();
        let sub =
            crate::backward::PathEnsemble { paths: ens.paths.iter().take(p.written_paths).cloned().collect(), ..ens.clone() };
        sub.write_csv(&sol, &p.snapshot_times, &mut paths)?;
        let text = String::from_utf8(paths).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut pt = Table::new(&format!("paths_case{k}"), &[]);
        pt.header = rdr.headers().map_err(crate::backward::csv_err)?.iter().map(String::from).collect();
        for r in rdr.records() {
            pt.push(r.map_err(crate::backward::csv_err)?.iter().map(String::from).collect());
        }
        tables.push(pt);
        reports.push(json!({
            "case": k, "shock_id": id, "t_ref": t_ref, "target": rep.target, "max_abs_z": rep.max_abs_z,
            "empty_bins": rep.empty_bins, "velocity_identity_gap": identity_gap,
        }));
    }
    tables.insert(0, summary);
    tables.insert(1, law_t);
    tables.insert(2, branch_t);
    Ok(Outcome { tables, checks, report: json!({ "cases": reports }) })
}

fn limit_measures(p: &LimitMeasures) -> Result<Outcome> {
    let (l, s, t) = (p.length_scale, p.s_time, p.t_time);
    let family = |nu: f64| ViscousSolution::new(InitialVelocity::khokhlov(l, nu, p.data_time)?, nu);
    let phi_s = |a: f64| a * a / (2.0 * s) - l * a.abs() / s;
    let mut selectors = vec![(String::from("fixed"), PointSelector::Fixed, None)];
    for &q in &p.shock_frame_fractions {
        selectors.push((format!("shock_frame_{q}"), PointSelector::ShockFrame { p: q }, Some(q)));
    }
    let mut rows =
        Table::new("limit_rows", &["selector", "nu", "x_nu", "atom", "label", "weight", "window", "residual", "stay_density"]);
    let mut checks = Vec::new();
    let mut reports = Vec::new();
    let predicted = l * l * (1.0 - s / t) / (4.0 * s);
    for (name, sel, q) in selectors {
        let req = LimitRequest {
            family: &family,
            inviscid_potential: &phi_s,
            one_sided: (l / t, -l / t),
            x: p.x_position,
            s,
            t,
            search: (p.x_position - p.search_half_width, p.x_position + p.search_half_width),
            selector: sel,
            stay_label: Some(p.x_position),
            source: PotentialSource::Khokhlov,
        };
        let m = limit_measure(&req, &p.viscosities)?;
        for r in &m.rows {
            for (i, a) in r.atoms.iter().enumerate() {
                rows.push(vec![
                    name.clone(),
                    f(r.nu),
                    f(r.x_nu),
                    i.to_string(),
                    f(a.a),
                    f(a.weight),
                    f(a.window),
                    f(r.residual),
                    r.stay_density.map(f).unwrap_or_default(),
                ]);
            }
        }
        let expect = match q {
            None => vec![0.5, 0.5],
            Some(q) => vec![q, 1.0 - q],
        };
        let gap = if m.weights.len() == expect.len() {
            m.weights.iter().zip(&expect).map(|(w, e)| (w - e).abs()).fold(0.0, f64::max)
        } else {
            f64::INFINITY
        };
        checks.push(Check::at_most(format!("{name}_weights"), Tolerance, gap, 0.02));
        if q.is_none() {
            let rel = m.decay_exponent.map(|c| ((c - predicted) / predicted).abs()).unwrap_or(f64::INFINITY);
            checks.push(Check::at_most("stay_decay_exponent_relative", Tolerance, rel, 0.05));
        }
        reports.push(json!({
            "selector": name, "atoms": m.atoms, "weights": m.weights, "extrapolated": m.extrapolated,
            "decay_exponent": m.decay_exponent, "predicted_exponent": predicted,
        }));
    }
    Ok(Outcome { tables: vec![rows], checks, report: json!({ "selectors": reports }) })
}

fn ci_fixed_point(p: &CiFixedPoint, seed: u64) -> Result<Outcome> {
    let mut table = Table::new("ci", &["x", "mean_u0", "se", "u_nu", "z", "ks_d", "ks_p", "mean_steps"]);
    let kappa = p.nu_viscosity / p.prandtl_number;
    let mut worst_z: f64 = 0.0;
    let mut worst_p: f64 = 1.0;
    for (k, &x) in p.x_positions.iter().enumerate() {
        let cfg = SdeConfig {
            source: crate::monte_carlo::VelocitySource::Khokhlov { length: p.length_scale },
            nu: p.nu_viscosity,
            kappa,
            x,
            t: p.t_time,
            s: p.s_time,
            steps: p.steps,
            n_paths: p.paths,
            seed: stream_seed(seed, k as u64),
            record: vec![],
        };
        let ens = integrate_backward(&cfg)?;
        let u: Vec<f64> = ens.endpoints.iter().map(|&y| khokhlov_velocity(p.length_scale, p.nu_viscosity, y, p.s_time)).collect();
        let (mean, se) = mean_se(&u);
        let target = khokhlov_velocity(p.length_scale, p.nu_viscosity, x, p.t_time);
        let z = (mean - target) / se;
        let (d, pv) = if (p.prandtl_number - 1.0).abs() < 1e-12 {
            let tr = KhokhlovTransition::new(p.length_scale, p.nu_viscosity, p.s_time, x, p.t_time);
            let d = ks_statistic(&ens.endpoints, |a| tr.cdf(a));
            (d, ks_pvalue(d, ens.endpoints.len()))
        } else {
            (f64::NAN, f64::NAN)
        };
        if pv.is_finite() {
            worst_p = worst_p.min(pv);
        }
        worst_z = worst_z.max(z.abs());
        table.push(vec![f(x), f(mean), f(se), f(target), f(z), f(d), f(pv), f(ens.mean_steps)]);
    }
    let mut checks = vec![];
    if (p.prandtl_number - 1.0).abs() < 1e-12 {
        checks.push(Check::at_most("fixed_point_max_abs_z", Tolerance, worst_z, 3.0));
        checks.push(Check {
            name: "transition_ks_min_pvalue".into(),
            kind: Tolerance,
            value: worst_p,
            limit: 1e-3,
            pass: worst_p >= 1e-3,
        });
    }
    Ok(Outcome { tables: vec![table], checks, report: json!({ "kappa": kappa, "max_abs_z": worst_z, "min_ks_pvalue": worst_p }) })
}

fn escape_sweep(p: &EscapeSweep, seed: u64) -> Result<Outcome> {
    let mut table = Table::new(
        "escape",
        &[
            "pr",
            "kappa",
            "nu",
            "alpha",
            "threshold",
            "n",
            "probability",
            "std_error",
            "left_fraction",
            "chebyshev_bound",
            "lower_bound",
            "pass",
            "base_dt",
            "mean_steps",
            "seed",
        ],
    );
    let mut checks = Vec::new();
    let mut kappas = p.kappa_diffusivities.clone();
    kappas.sort_by(|a, b| b.total_cmp(a));
    let mut cell = 0u64;
    let mut all_bounds = true;
    let mut monotone = true;
    for &pr in &p.prandtl_numbers {
        let mut prev: Option<(f64, f64)> = None;
        for &kappa in &kappas {
            let r = escape_probability(
                p.amplitude_velocity,
                pr,
                kappa,
                p.horizon_time,
                p.epsilon,
                p.paths,
                p.steps,
                stream_seed(seed, cell),
            )?;
            cell += 1;
            all_bounds &= r.pass;
            if let Some((q, se)) = prev {
                monotone &= r.probability >= q - 3.0 * (se * se + r.std_error * r.std_error).sqrt() - 1.0 / p.paths as f64;
            }
            prev = Some((r.probability, r.std_error));
            table.push(vec![
                f(pr),
                f(kappa),
                f(r.nu),
                f(r.alpha),
                f(r.threshold),
                r.n.to_string(),
                f(r.probability),
                f(r.std_error),
                f(r.left_fraction),
                f(r.chebyshev_bound),
                f(r.lower_bound),
                r.pass.to_string(),
                f(r.base_dt),
                f(r.mean_steps),
                r.seed.to_string(),
            ]);
        }
    }
    checks.push(Check::flag("stationary_escape_bounds", Tolerance, all_bounds));
    checks.push(Check::flag("stationary_escape_monotone_in_kappa", Tolerance, monotone));
    let mut tables = vec![table];
    let mut report = json!({ "cells": cell });
    if let Some(k) = &p.khokhlov {
        let mut kt = Table::new(
            "khokhlov_escape",
            &[
                "pr",
                "kappa",
                "tau",
                "alpha",
                "threshold",
                "n",
                "probability",
                "std_error",
                "left_fraction",
                "left_std_error",
                "chebyshev_bound",
            ],
        );
        let mut ks = k.kappa_diffusivities.clone();
        ks.sort_by(|a, b| b.total_cmp(a));
        let mut last = None;
        let mut split = true;
        let mut mono = true;
        for (j, &kappa) in ks.iter().enumerate() {
            let r = khokhlov_escape(
                k.length_scale,
                k.prandtl_number,
                kappa,
                k.log_time_horizon,
                k.epsilon,
                k.paths,
                k.steps,
                stream_seed(seed ^ 0x6b68, j as u64),
            )?;
            split &= (r.left_fraction - 0.5).abs() <= 3.0 * r.left_std_error;
            if let Some((q, se)) = last {
                let q: f64 = q;
                let se: f64 = se;
                mono &= r.probability >= q - 3.0 * (se * se + r.std_error * r.std_error).sqrt() - 1.0 / k.paths as f64;
            }
            last = Some((r.probability, r.std_error));
            kt.push(vec![
                f(k.prandtl_number),
                f(kappa),
                f(r.tau),
                f(r.alpha),
                f(r.threshold),
                r.n.to_string(),
                f(r.probability),
                f(r.std_error),
                f(r.left_fraction),
                f(r.left_std_error),
                r.chebyshev_bound.map(f).unwrap_or_default(),
            ]);
            if j + 1 == ks.len() {
                let floor = 1.0 - r.chebyshev_bound.unwrap_or(1.0) - binomial_halfwidth(r.probability, r.n, 3.0);
                checks.push(Check {
                    name: "khokhlov_escape_smallest_kappa".into(),
                    kind: Tolerance,
                    value: r.probability,
                    limit: floor,
                    pass: r.probability >= floor,
                });
            }
        }
        checks.push(Check::flag("khokhlov_escape_monotone_in_kappa", Tolerance, mono));
        checks.push(Check::flag("khokhlov_side_split", Tolerance, split));
        tables.push(kt);
    }
    if let Some(sc) = &p.scaling {
        let rep = escape_time_scaling(
            sc.prandtl_number,
            &sc.kappa_diffusivities,
            p.amplitude_velocity,
            sc.paths,
            stream_seed(seed ^ 0x7363, 0),
        )?;
        let mut st = Table::new("escape_scaling", &["kappa", "tau_esc", "ell_esc", "half_escape_time"]);
        for r in &rep.rows {
            st.push(vec![f(r.kappa), f(r.tau_esc), f(r.ell_esc), f(r.half_escape_time)]);
        }
        checks.push(Check {
            name: "half_escape_linear_in_kappa_r2".into(),
            kind: Tolerance,
            value: rep.fit.r2,
            limit: 0.95,
            pass: rep.fit.r2 > 0.95,
        });
        report["scaling_fit"] = json!(rep.fit);
        tables.push(st);
    }
    Ok(Outcome { tables, checks, report })
}

fn transport_suite(p: &TransportSuite) -> Result<Outcome> {
    let sol = EntropySolution::new(p.initial.build()?, p.horizon_time)?;
    let [lo, hi] = p.label_window;
    p.rho0.require_nonnegative(sol.initial(), lo, hi)?;
    let psi = &p.entropy;
    let unit = crate::transport::Passive::Constant { value: 1.0 };
    let mass0 = initial_invariant(&p.rho0, &unit, &sol, &EntropyPair::Momentum, lo, hi)?;
    let j0 = initial_invariant(&p.rho0, &p.theta0, &sol, psi, lo, hi)?;
    let mut inv = Table::new(
        "invariants",
        &["t", "mass", "mass_error", "j_psi", "j_change", "lagrangian_anomaly", "drop_error", "integrated_eulerian_error"],
    );
    let mut prof = Table::new("profile", &["t", "x", "rho_continuous", "theta", "flag"]);
    let mut mom =
        Table::new("momentum", &["t", "shock_id", "x", "mass", "second_form", "flux_balance", "mass_rate", "mass_rate_formula"]);
    let mut atoms_json = Vec::new();
    let (mut mass_err, mut drop_err, mut pre_err, mut eul_err, mut mom_err, mut mdot_err): (f64, f64, f64, f64, f64, f64) =
        (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let mut mdot_min = f64::INFINITY;
    let mut pre_count = 0;
    for &t in &p.times {
        let m = evolve_density(&p.rho0, &sol, t)?;
        let th = evolve_scalar(&p.theta0, &sol, t)?;
        let (xl, xh) = window_at(&sol, lo, hi, t)?;
        let mass = m.mass_in(xl, xh)?;
        let j = scalar_invariant(&m, &th, psi, xl, xh)?;
        let an = scalar_anomaly(&p.rho0, &p.theta0, &sol, psi, t)?;
        let events: Vec<f64> = sol.tree().event_times().into_iter().filter(|&e| e <= t).collect();
        let ta = events.iter().copied().fold(sol.t0(), f64::max);
        let base =
            if ta > sol.t0() { scalar_anomaly(&p.rho0, &p.theta0, &sol, psi, ta + 1e-6 * (1.0 + ta))?.lagrangian } else { 0.0 };
        let integ = integrated_scalar_rate(&p.rho0, &p.theta0, &sol, psi, ta, t)?;
        let e_int = (integ - (an.lagrangian - base)).abs();
        mass_err = mass_err.max((mass - mass0).abs());
        drop_err = drop_err.max((j - j0 - an.lagrangian).abs());
        eul_err = eul_err.max(e_int);
        if m.atoms.is_empty() {
            pre_err = pre_err.max((j - j0).abs());
            pre_count += 1;
        }
        inv.push(vec![f(t), f(mass), f(mass - mass0), f(j), f(j - j0), f(an.lagrangian), f(j - j0 - an.lagrangian), f(e_int)]);
        for a in momentum_anomaly(&m)? {
            mom_err = mom_err.max((a.second_form - a.flux_balance).abs());
            mdot_err = mdot_err.max((a.mass_rate - a.mass_rate_formula).abs());
            mdot_min = mdot_min.min(a.mass_rate_formula);
            mom.push(vec![
                f(t),
                a.id.to_string(),
                f(a.x),
                f(a.mass),
                f(a.second_form),
                f(a.flux_balance),
                f(a.mass_rate),
                f(a.mass_rate_formula),
            ]);
        }
        let n = p.profile_points.max(2);
        for (x, r) in m.profile(xl, xh, n)? {
            let on = m.atoms.iter().any(|a| (a.x - x).abs() <= 1e-12 * (1.0 + x.abs()));
            let theta = th.value(x)?;
            prof.push(vec![f(t), f(x), f(r), f(theta), if on { "shock".into() } else { "regular".into() }]);
        }
        for (a, s) in m.atoms.iter().zip(&th.shocks) {
            prof.push(vec![f(t), f(a.x), f(a.mass), f(s.theta_star), "atom".into()]);
        }
        atoms_json.push(json!({ "t": t, "atoms": m.atoms, "scalars": th.shocks }));
    }
    let mut checks = vec![
        Check::at_most("mass_conservation", Tolerance, mass_err, 1e-12),
        Check::at_most("invariant_drop_equals_lagrangian_anomaly", Tolerance, drop_err, 1e-5),
        Check::at_most("integrated_eulerian_scalar_rate", Tolerance, eul_err, 1e-4),
        Check::at_most("momentum_forms_agree", Tolerance, mom_err, 1e-4),
        Check::at_most("mass_rate_relation", Tolerance, mdot_err, 1e-4),
    ];
    if mdot_min.is_finite() {
        checks.push(Check::at_most("monotone_absorption", Invariant, -mdot_min, 1e-10));
    }
    if pre_count > 0 {
        checks.push(Check::at_most("invariant_constant_before_shocks", Tolerance, pre_err, 1e-8));
    }
    let mut tables = vec![inv, mom, prof];
    if let Some([xa, xb, ta, tb]) = p.bump_box {
        let mut wt = Table::new(
            "weak_residuals",
            &["xc", "tc", "rx", "rt", "density", "product", "product_predicted", "momentum", "momentum_predicted", "scalar"],
        );
        let (mut dens, mut prod, mut momw, mut prod_size): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
        for b in TestBump::family(xa, xb, ta, tb) {
            let r = weak_residual(&sol, &p.rho0, &p.theta0, &b)?;
            dens = dens.max(r.density.abs());
            prod = prod.max((r.product - r.product_predicted).abs());
            momw = momw.max((r.momentum - r.momentum_predicted).abs());
            prod_size = prod_size.max(r.product.abs());
            wt.push(vec![
                f(b.xc),
                f(b.tc),
                f(b.rx),
                f(b.rt),
                f(r.density),
                f(r.product),
                f(r.product_predicted),
                f(r.momentum),
                f(r.momentum_predicted),
                f(r.scalar),
            ]);
        }
        checks.push(Check::at_most("density_weak_residual", Invariant, dens, 1e-5));
        checks.push(Check::at_most("product_residual_matches_shock_terms", Tolerance, prod, 1e-4));
        checks.push(Check::at_most("momentum_residual_matches_shock_terms", Tolerance, momw, 1e-4));
        tables.push(wt);
    }
    Ok(Outcome { tables, checks, report: json!({ "initial_mass": mass0, "initial_invariant": j0, "snapshots": atoms_json }) })
}

fn fluctuation(p: &Fluctuation, seed: u64) -> Result<Outcome> {
    let cfg = FluctuationConfig {
        source: p.source.clone(),
        nu: p.nu_viscosity,
        t0: p.start_time,
        tf: p.end_time,
        rho0: p.rho0,
        rho_f: p.rho_final,
        steps: p.steps,
        n_paths: p.paths,
        seed,
        variance_cap: p.variance_cap,
    };
    let w = fluctuation_samples(&cfg)?;
    let e: Vec<f64> = w.iter().map(|v| v.exp()).collect();
    let var = variance(&e);
    let (mean, jk) = jackknife_mean(&e);
    let (mw, sw) = mean_se(&w);
    let mut table = Table::new("w_samples", &["path_id", "w"]);
    for (i, v) in w.iter().enumerate() {
        table.push(vec![i.to_string(), f(*v)]);
    }
    let checks = vec![
        Check::at_most("exp_w_variance", Invariant, var, p.variance_cap),
        Check {
            name: "mean_exp_w_within_3_jackknife".into(),
            kind: Tolerance,
            value: (mean - 1.0).abs(),
            limit: 3.0 * jk,
            pass: (mean - 1.0).abs() <= 3.0 * jk,
        },
        Check::at_most("mean_w_non_positive", Tolerance, mw, 0.0),
    ];
    Ok(Outcome {
        tables: vec![table],
        checks,
        report: json!({ "mean_exp_w": mean, "jackknife_error": jk, "mean_w": mw, "w_std_error": sw, "exp_w_variance": var, "dt": (p.end_time - p.start_time) / p.steps as f64, "n": p.paths, "nu": p.nu_viscosity }),
    })
}
