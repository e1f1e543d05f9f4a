use burgers_lab::dissipation::{delta_psi_profile, eulerian_rate, instantaneous_rate, EntropyPair};
use burgers_lab::entropy::EntropySolution;
use burgers_lab::initial::InitialVelocity;
use burgers_lab::monte_carlo::{
    escape_probability, fluctuation_check, khokhlov_escape, FluctuationConfig, Gaussian, VelocitySource,
};
use burgers_lab::presets;
use burgers_lab::rng::stream_seed;
use burgers_lab::runner::{self, Check, ExperimentSpec};
use burgers_lab::stats::binomial_halfwidth;
use burgers_lab::transport::{
    evolve_density, evolve_scalar, initial_invariant, integrated_scalar_rate, momentum_anomaly, scalar_anomaly, scalar_invariant,
    window_at, Passive,
};
use burgers_lab::viscous::{khokhlov_velocity, ViscousSolution};
use burgers_lab::Result;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Result<Verdict> {
    Ok(Verdict { pass, detail: detail.into() })
}

fn spec_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("specs").join(name)
}

fn failing(checks: &[Check]) -> Vec<String> {
    checks.iter().filter(|c| !c.pass).map(|c| format!("{}={:.3e}", c.name, c.value)).collect()
}

fn run_spec(name: &str, keep: impl Fn(&Check) -> bool) -> Result<Verdict> {
    let spec = ExperimentSpec::from_file(&spec_path(name))?;
    let out = runner::execute(&spec)?;
    let kept: Vec<Check> = out.checks.into_iter().filter(|c| keep(c)).collect();
    let bad = failing(&kept);
    verdict(!kept.is_empty() && bad.is_empty(), if bad.is_empty() { format!("{} checks ok", kept.len()) } else { bad.join(" ") })
}

fn energy_anomaly() -> Result<Verdict> {
    let sol = EntropySolution::new(InitialVelocity::riemann(1.0, -1.0), 2.0)?;
    let lag = instantaneous_rate(&sol, &EntropyPair::Energy, 1.0)?.total;
    let eul = eulerian_rate(&sol, &EntropyPair::Energy, 1.0)?.total;
    let err = (lag + 2.0 / 3.0).abs().max((lag - eul).abs());
    verdict(err <= 1e-8, format!("rate {lag:.12} eulerian {eul:.12} err {err:.2e}"))
}

fn test_solutions() -> Result<Vec<(&'static str, EntropySolution, Vec<f64>)>> {
    Ok(vec![
        ("riemann", EntropySolution::new(InitialVelocity::riemann(1.0, -1.0), 2.0)?, vec![0.5, 1.5]),
        ("ramp", EntropySolution::new(InitialVelocity::linear_ramp(-1.0, 1.0), 3.0)?, vec![1.5, 2.5]),
        ("sawtooth", EntropySolution::new(InitialVelocity::sawtooth(1.0, 0.5)?, 3.0)?, vec![0.7, 2.0]),
        ("two_dip", EntropySolution::new(presets::two_dip()?, presets::TWO_DIP_HORIZON)?, vec![0.8, 2.5]),
    ])
}

fn momentum_conservation() -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    let mut shocks = 0;
    for (_, sol, times) in test_solutions()? {
        for t in times {
            for r in [instantaneous_rate(&sol, &EntropyPair::Momentum, t)?, eulerian_rate(&sol, &EntropyPair::Momentum, t)?] {
                shocks += r.shocks.len();
                worst = r.shocks.iter().fold(worst, |w, s| w.max(s.rate.abs()));
            }
        }
    }
    verdict(shocks > 0 && worst <= 1e-10, format!("{shocks} shock rates, max |rate| {worst:.2e}"))
}

fn delta_psi_monotone() -> Result<Verdict> {
    let cases = [
        EntropySolution::new(InitialVelocity::linear_ramp(-1.0, 1.0), 3.0)?,
        EntropySolution::new(presets::two_dip()?, presets::TWO_DIP_HORIZON)?,
    ];
    let mut rise: f64 = 0.0;
    let mut profiles = 0;
    for sol in &cases {
        let tf = sol.horizon();
        let grid: Vec<f64> = (1..=200).map(|i| sol.t0() + (tf - sol.t0()) * i as f64 / 200.0).collect();
        for pair in [EntropyPair::Square, EntropyPair::Quartic, EntropyPair::Abs] {
            for id in sol.tree().live_at(tf) {
                let prof = delta_psi_profile(sol, &pair, id, &grid)?;
                profiles += 1;
                rise = prof.windows(2).fold(rise, |r, w| r.max(w[1].1 - w[0].1));
            }
        }
    }
    verdict(profiles >= 6 && rise <= 1e-8, format!("{profiles} profiles x 200 times, max rise {rise:.2e}"))
}

fn hopf_cole_fidelity() -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    for nu in [0.05, 0.1, 0.2] {
        let v = ViscousSolution::new(InitialVelocity::khokhlov(1.0, nu, 0.5)?, nu)?;
        for j in 0..11 {
            let t = 0.6 + 0.14 * j as f64;
            for i in 0..101 {
                let x = -2.0 + 0.04 * i as f64;
                worst = worst.max((v.velocity(x, t)? - khokhlov_velocity(1.0, nu, x, t)).abs());
            }
        }
    }
    verdict(worst <= 1e-8, format!("sup error {worst:.2e} on 11x101 grid"))
}

fn stationary_escape() -> Result<Verdict> {
    let mut cell = 0;
    let mut bad = Vec::new();
    for pr in [0.0, 0.5, 1.0, 2.0] {
        let mut prev: Option<(f64, f64)> = None;
        for kappa in [1e-2, 1e-3, 1e-4] {
            let r = escape_probability(1.0, pr, kappa, 1.0, 0.5, 100_000, 100, stream_seed(1, cell))?;
            cell += 1;
            if !r.pass {
                bad.push(format!("bound pr={pr} kappa={kappa} p={}", r.probability));
            }
            if let Some((q, se)) = prev {
                if r.probability < q - 3.0 * (se * se + r.std_error * r.std_error).sqrt() - 1e-5 {
                    bad.push(format!("order pr={pr} kappa={kappa}"));
                }
            }
            prev = Some((r.probability, r.std_error));
        }
    }
    verdict(
        bad.is_empty(),
        if bad.is_empty() { format!("{cell} cells above bound, non-decreasing as kappa falls") } else { bad.join("; ") },
    )
}

fn khokhlov_escape_limit() -> Result<Verdict> {
    let mut bad = Vec::new();
    let mut last = None;
    let mut summary = Vec::new();
    for (j, kappa) in [1e-2, 1e-3, 1e-4].into_iter().enumerate() {
        let r = khokhlov_escape(1.0, 1.0, kappa, 1.0, 0.5, 20_000, 200, stream_seed(7, j as u64))?;
        summary.push(format!("{:.4}", r.probability));
        if (r.left_fraction - 0.5).abs() > 3.0 * r.left_std_error {
            bad.push(format!("split kappa={kappa} left={}", r.left_fraction));
        }
        if let Some((q, se)) = last {
            let (q, se): (f64, f64) = (q, se);
            if r.probability < q - 3.0 * (se * se + r.std_error * r.std_error).sqrt() - 5e-5 {
                bad.push(format!("order kappa={kappa}"));
            }
        }
        last = Some((r.probability, r.std_error));
        if j == 2 {
            let floor = 1.0 - r.chebyshev_bound.unwrap_or(1.0) - binomial_halfwidth(r.probability, r.n, 3.0);
            if r.probability < floor {
                bad.push(format!("floor p={} < {floor}", r.probability));
            }
        }
    }
    verdict(
        bad.is_empty(),
        if bad.is_empty() { format!("p = [{}], split within 3 sigma", summary.join(", ")) } else { bad.join("; ") },
    )
}

fn transport() -> Result<Verdict> {
    let (length, t0) = (1.0, 0.5);
    let saw = EntropySolution::new(InitialVelocity::sawtooth(length, t0)?, 3.0)?;
    let rho0 = Passive::Step { minus: 1.0, plus: 3.0 };
    let theta0 = Passive::Linear { intercept: 0.2, slope: 1.0 };
    let unit = Passive::Constant { value: 1.0 };
    let psi = EntropyPair::Square;
    let u0 = saw.initial();
    let (mut mom, mut mass, mut drop) = (0.0f64, 0.0f64, 0.0f64);
    let mass0 = initial_invariant(&rho0, &unit, &saw, &EntropyPair::Momentum, -4.0, 4.0)?;
    let j0 = initial_invariant(&rho0, &theta0, &saw, &psi, -4.0, 4.0)?;
    for t in [0.7, 1.5, 2.5] {
        let m = evolve_density(&rho0, &saw, t)?;
        let th = evolve_scalar(&theta0, &saw, t)?;
        for a in momentum_anomaly(&m)? {
            let s = saw.segment_state(a.id, t)?;
            let want = (rho0.value(s.a_plus, u0) - rho0.value(s.a_minus, u0)) * (t0 / t) * (length / t).powi(2);
            mom = mom.max((a.second_form - want).abs()).max((a.flux_balance - want).abs());
        }
        let (lo, hi) = window_at(&saw, -4.0, 4.0, t)?;
        mass = mass.max((m.mass_in(lo, hi)? - mass0).abs());
        let lag = scalar_anomaly(&rho0, &theta0, &saw, &psi, t)?.lagrangian;
        let eul = integrated_scalar_rate(&rho0, &theta0, &saw, &psi, t0, t)?;
        let dj = scalar_invariant(&m, &th, &psi, lo, hi)? - j0;
        drop = drop.max((dj - lag).abs()).max((dj - eul).abs());
    }
    let ramp = EntropySolution::new(InitialVelocity::linear_ramp(-1.0, 1.0), 3.0)?;
    let g = Passive::Gaussian { center: 0.3, width: 0.7, height: 1.0 };
    let jr0 = initial_invariant(&g, &theta0, &ramp, &psi, -3.0, 3.0)?;
    let mut pre: f64 = 0.0;
    for t in [0.25, 0.5, 0.9] {
        let (lo, hi) = window_at(&ramp, -3.0, 3.0, t)?;
        let j = scalar_invariant(&evolve_density(&g, &ramp, t)?, &evolve_scalar(&theta0, &ramp, t)?, &psi, lo, hi)?;
        pre = pre.max((j - jr0).abs());
    }
    let pass = mom <= 1e-6 && mass <= 1e-12 && pre <= 1e-8 && drop <= 1e-5;
    verdict(pass, format!("momentum {mom:.2e}, mass {mass:.2e}, pre-shock J {pre:.2e}, post-shock drop {drop:.2e}"))
}

fn fluctuation_identity() -> Result<Verdict> {
    let r = fluctuation_check(&FluctuationConfig {
        source: VelocitySource::Khokhlov { length: 1.0 },
        nu: 0.2,
        t0: 0.5,
        tf: 1.0,
        rho0: Gaussian { mean: 0.0, std: 0.5 },
        rho_f: Gaussian { mean: 0.0, std: 0.3 },
        steps: 500,
        n_paths: 10_000,
        seed: 1,
        variance_cap: 1e6,
    })?;
    verdict(
        r.identity_pass && r.jensen_pass,
        format!("E[e^W] {:.4} +- {:.4} (jackknife), E[W] {:.4}", r.mean_exp_w, r.jackknife_error, r.mean_w),
    )
}

fn csv_bodies(dir: &Path) -> Result<Vec<(String, Vec<u8>)>> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir)? {
        let p = e?.path();
        if p.extension().is_some_and(|x| x == "csv") {
            out.push((p.file_name().unwrap_or_default().to_string_lossy().into_owned(), std::fs::read(&p)?));
        }
    }
    out.sort();
    Ok(out)
}

fn reproducibility() -> Result<Verdict> {
    let tmp = tempfile::tempdir()?;
    let mut compared = 0;
    for name in ["ci_fixed_point.toml", "geometric_martingale.toml", "transport_suite.toml"] {
        let mut spec = ExperimentSpec::from_file(&spec_path(name))?;
        let mut bodies = Vec::new();
        for jobs in [1, 4] {
            spec.output_dir = tmp.path().join(format!("{}_{jobs}", spec.name));
            runner::run(&spec, Some(jobs))?;
            bodies.push(csv_bodies(&spec.output_dir)?);
        }
        if bodies[0].is_empty() || bodies[0] != bodies[1] {
            return verdict(false, format!("{name}: CSV bodies differ between --jobs 1 and 4"));
        }
        compared += bodies[0].len();
    }
    verdict(true, format!("{compared} CSV files identical across --jobs 1 and 4"))
}

type Criterion = (&'static str, f64, fn() -> Result<Verdict>);

fn main() -> ExitCode {
    std::env::remove_var(runner::OUTPUT_DIR_ENV);
    let criteria: [Criterion; 13] = [
        ("energy anomaly of the Riemann shock", 1.0, energy_anomaly),
        ("momentum anomaly vanishes", 1.0, momentum_conservation),
        ("delta-psi monotone on ramp and two-dip", 10.0, delta_psi_monotone),
        ("geometric martingale on the sawtooth", 30.0, || run_spec("geometric_martingale.toml", |_| true)),
        ("merger tree branching and velocity identity", 30.0, || run_spec("two_dip_merger.toml", |_| true)),
        ("Hopf-Cole against the Khokhlov closed form", 10.0, hopf_cole_fidelity),
        ("zero-viscosity limit measures", 60.0, || run_spec("limit_measures.toml", |_| true)),
        ("stochastic Lagrangian fixed point by simulation", 60.0, || run_spec("ci_fixed_point.toml", |_| true)),
        ("stationary shock escape bound", 120.0, stationary_escape),
        ("Khokhlov escape and side split", 60.0, khokhlov_escape_limit),
        ("transport anomalies and invariants", 10.0, transport),
        ("fluctuation identity", 60.0, fluctuation_identity),
        ("reproducibility across --jobs", f64::INFINITY, reproducibility),
    ];
    let mut failed = 0;
    for (k, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let res = run();
        let secs = start.elapsed().as_secs_f64();
        let (ok, detail) = match res {
            Ok(v) => (v.pass && secs < *budget, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let timing = if budget.is_finite() { format!("{secs:.1}s of {budget}s") } else { format!("{secs:.1}s") };
        println!("[{}] {:>2} {name}: {detail} ({timing})", if ok { "PASS" } else { "FAIL" }, k + 1);
        failed += usize::from(!ok);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
