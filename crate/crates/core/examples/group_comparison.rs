//! Compare two samples with the Mann-Whitney U test, Cohen's d and a
//! bootstrap interval on each mean.
//!
//! Usage: `cargo run --example group_comparison`

use faultline::analysis::{bootstrap_mean_ci, cohens_d, mann_whitney};

fn main() -> anyhow::Result<()> {
    // centrality z-scores of solved and unsolved tasks
    let solved = [-0.9, -0.4, -1.1, 0.2, -0.3, -0.7, 0.1, -0.5];
    let unsolved = [0.6, 1.3, -0.2, 0.9, 0.4, 1.8, 0.3];
    let mw = mann_whitney(&solved, &unsolved)?;
    println!("U = {}  p = {:.4}  exact = {}  rank-biserial = {:.3}", mw.u, mw.p_value, mw.exact, mw.rank_biserial);
    println!("Cohen's d = {:.3}", cohens_d(&solved, &unsolved)?);
    for (name, sample) in [("solved", &solved[..]), ("unsolved", &unsolved[..])] {
        let ci = bootstrap_mean_ci(sample, 1000, 0.95, 7)?;
        println!("{name:<9} mean {:.3}  95% [{:.3}, {:.3}]", ci.estimate, ci.lower, ci.upper);
    }
    Ok(())
}
