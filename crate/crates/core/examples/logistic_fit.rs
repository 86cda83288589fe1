//! Fit a logistic model by IRLS to simulated outcomes and compare the
//! estimates with the generating coefficients.
//!
//! Usage: `cargo run --example logistic_fit [n] [seed]`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use faultline::analysis::fit_logistic;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1000);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);
    let truth: [f64; 3] = [0.5, -1.2, 0.4];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row = vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let eta = truth[0] + truth[1] * row[0] + truth[2] * row[1];
        y.push(rng.gen::<f64>() < 1.0 / (1.0 + (-eta).exp()));
        x.push(row);
    }
    let fit = fit_logistic(&x, &y, &["complexity", "centrality"])?;
    println!("converged={} iterations={} n={}", fit.converged, fit.iterations, fit.n);
    println!("{:<12} {:>8} {:>8} {:>8} {:>8} {:>8}", "term", "true", "est", "se", "z", "p");
    for (c, t) in fit.coefficients.iter().zip(truth) {
        println!("{:<12} {:>8.3} {:>8.3} {:>8.3} {:>8.2} {:>8.4}", c.name, t, c.estimate, c.std_error, c.z, c.p_value);
    }
    println!("log-lik {:.3}  null {:.3}  McFadden R2 {:.3}  AIC {:.2}", fit.log_likelihood, fit.null_log_likelihood, fit.mcfadden_r2, fit.aic);
    Ok(())
}
