//! Bin simulated task outcomes on a complexity-by-centrality grid and draw
//! the fitted difficulty boundary lines.
//!
//! Usage: `cargo run --example difficulty_grid`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use faultline::analysis::{difficulty_grid, fit_logistic};

fn main() -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let points: Vec<(f64, f64, bool)> = (0..400)
        .map(|_| {
            let (x, y): (f64, f64) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let p = 1.0 / (1.0 + (-(0.3 - 0.8 * x - 1.1 * y)).exp());
            (x, y, rng.gen::<f64>() < p)
        })
        .collect();
    let x: Vec<Vec<f64>> = points.iter().map(|p| vec![p.0, p.1]).collect();
    let y: Vec<bool> = points.iter().map(|p| p.2).collect();
    let fit = fit_logistic(&x, &y, &["complexity", "centrality"])?;
    let bins = 4;
    let grid = difficulty_grid(&points, bins, Some(&fit))?;

    println!("success rate by cell (rows: centrality high to low, columns: complexity low to high)");
    for row in grid.cells.chunks(bins).rev() {
        let line: Vec<String> = row
            .iter()
            .map(|c| c.rate.map_or("   -  ".into(), |r| format!("{r:>5.2} ")))
            .collect();
        println!("{}", line.join(""));
    }
    for l in &grid.lines {
        println!("{:<6} {:.3}*x + {:.3}*y + {:.3} = 0", l.level, l.a, l.b, l.c);
    }
    Ok(())
}
