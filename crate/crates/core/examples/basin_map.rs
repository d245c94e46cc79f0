// Basins of the closed loop over a grid of constant-input initial conditions.

use multirc::basins::{map_basins, mirror_consistency, BasinOptions};
use multirc::netgen::{NetParams, ReservoirNet};
use multirc::taskgen::{seeing_double_pair, RotationMode};
use multirc::training::{train_on, TrainingParams};

pub fn run_example() -> multirc::Result<()> {
    let net = ReservoirNet::build(NetParams { n: 100, ..Default::default() })?;
    let (rho, b) = (0.4, 5.0);
    let targets = seeing_double_pair(0.0, b, RotationMode::Opposite, net.params.tau)?;
    let res = net.at_rho(rho)?;
    let (readout, _) = train_on(&res, &[targets.0, targets.1], &TrainingParams::default())?;
    let opts = BasinOptions { nx: 9, ny: 9, t_predict: 200.0, ..Default::default() };
    let grid = map_basins(&res, &readout, (&targets.0, &targets.1), &opts)?;
    for (k, e) in grid.catalog.iter().enumerate() {
        println!("attractor {k}: {} at ({:.3}, {:.3})", e.label.kind.as_str(), e.label.centre[0], e.label.centre[1]);
    }
    for j in (0..grid.ny).rev() {
        let row: Vec<String> = (0..grid.nx).map(|i| format!("{:>3}", grid.label_at(i, j))).collect();
        println!("{}", row.join(""));
    }
    let mirror = mirror_consistency(&grid, b);
    println!("mirror consistent at {}/{} cells", mirror.consistent, mirror.checked);
    Ok(())
}

#[allow(dead_code)]
fn main() -> multirc::Result<()> {
    run_example()
}
