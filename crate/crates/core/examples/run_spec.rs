//! Running a catalog scenario from code instead of the command line.
use burgers_lab::runner::{catalog, execute, ExperimentSpec};

fn main() -> burgers_lab::Result<()> {
    let entry = catalog().into_iter().find(|e| e.kind == "anomaly_suite").expect("catalog entry");
    let spec = ExperimentSpec { name: "demo".into(), seed: 3, output_dir: "out/demo".into(), scenario: entry.example };
    println!("{}", spec.to_toml()?);
    let out = execute(&spec)?;
    for c in &out.checks {
        println!("{:<32} {:>12.3e} <= {:<8.1e} {}", c.name, c.value, c.limit, if c.pass { "ok" } else { "FAIL" });
    }
    for t in &out.tables {
        println!("table {} with {} rows", t.name, t.rows.len());
    }
    Ok(())
}
