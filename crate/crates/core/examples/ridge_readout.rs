// Ridge regression of a readout from feature and target matrices, checked
// against the stationarity condition of the penalized objective.

use multirc::training::ridge_solve;
use nalgebra::DMatrix;

pub fn run_example() -> multirc::Result<()> {
    // Four features, two outputs, six samples.
    let x = DMatrix::from_fn(4, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0 + 0.1 * j as f64);
    let y = DMatrix::from_fn(2, 6, |i, j| if i == 0 { x[(0, j)] - 0.5 * x[(2, j)] } else { x[(1, j)] * 0.3 });
    for beta in [0.01, 0.1, 1.0] {
        let w = ridge_solve(&x, &y, beta)?;
        // Gradient of |W X - Y|^2 + beta |W|^2 vanishes at the minimizer.
        let grad = (&w * &x - &y) * x.transpose() + &w * beta;
        println!("beta {beta:>5}: |W| = {:.6}, |grad| = {:.2e}", w.norm(), grad.norm());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> multirc::Result<()> {
    run_example()
}
