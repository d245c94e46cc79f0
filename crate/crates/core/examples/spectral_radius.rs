// Sparse random adjacency rescaled to requested spectral radii.

use multirc::linalg::spectral_radius;
use multirc::netgen::{build_adjacency, rescale_to_rho};

pub fn run_example() -> multirc::Result<()> {
    let m = build_adjacency(300, 0.04, 2)?;
    println!("n = {}, nonzeros = {}", m.n(), m.nnz());
    for rho in [0.1, 1.25, 2.5] {
        let scaled = rescale_to_rho(&m, rho)?;
        let got = spectral_radius(&scaled.to_dense())?;
        println!("requested {rho:<5} measured {got:.12}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> multirc::Result<()> {
    run_example()
}
