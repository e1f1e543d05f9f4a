//! Shock tree of two merging dips and the entropy solution around it.
use burgers_lab::entropy::EntropySolution;
use burgers_lab::presets;

fn main() -> burgers_lab::Result<()> {
    let sol = EntropySolution::new(presets::two_dip()?, presets::TWO_DIP_HORIZON)?;
    for seg in &sol.tree().segments {
        println!(
            "segment {} on [{:.4}, {:.4}] parent {:?} children {:?}",
            seg.id, seg.t_start, seg.t_end, seg.parent, seg.children
        );
    }
    for m in &sol.tree().mergers {
        println!("merger at t = {:.4}, x = {:.4}: {:?} -> {}", m.t, m.x, m.children, m.parent);
    }
    for t in [0.5, 1.0, 2.5] {
        for s in sol.shocks_at(t)? {
            println!(
                "t = {t}: shock {} at x = {:.4}, u- = {:.4}, u+ = {:.4}, labels [{:.4}, {:.4}]",
                s.id, s.x, s.u_minus, s.u_plus, s.a_minus, s.a_plus
            );
        }
    }
    let x = -2.0;
    println!("u({x}, 1.0) = {:.6}", sol.evaluate(x, 1.0)?.mean);
    Ok(())
}
