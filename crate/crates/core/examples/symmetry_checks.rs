// Odd-symmetry diagnostics: the square readout vanishes for the fully
// overlapping opposite-rotation task, the driven response repeats with a sign
// flip every half period, and the closed loop maps r0 and -r0 to mirror images.

use multirc::harness::response_after_listening;
use multirc::netgen::{NetParams, ReservoirNet};
use multirc::symmetry::{half_period_antisymmetry, mirror_trajectory_residual, square_readout_ratio};
use multirc::taskgen::{seeing_double_pair, RotationMode};
use multirc::training::{train_on, TrainingParams};
use std::f64::consts::TAU;

pub fn run_example() -> multirc::Result<()> {
    let net = ReservoirNet::build(NetParams { n: 100, ..Default::default() })?;
    let params = TrainingParams::default();
    let res = net.at_rho(1.0)?;
    for (x_cen, mode) in [(0.0, RotationMode::Opposite), (3.0, RotationMode::Same), (3.0, RotationMode::Opposite)] {
        let targets = seeing_double_pair(x_cen, 5.0, mode, net.params.tau)?;
        let (readout, finals) = train_on(&res, &[targets.0, targets.1], &params)?;
        let ratio = square_readout_ratio(&readout)?;
        let mirror = mirror_trajectory_residual(&res, &readout, &finals[0], 50.0)?;
        println!("x_cen {x_cen} {}: |W2|/|W1| = {ratio:.3e}, mirror residual = {mirror:.3e}", mode.as_str());
    }
    let targets = seeing_double_pair(0.0, 5.0, RotationMode::Opposite, net.params.tau)?;
    let (states, _) = response_after_listening(&res, &targets.0, params.t_listen, 2.0 * TAU)?;
    println!("half-period antisymmetry residual = {:.3e}", half_period_antisymmetry(&states, TAU)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> multirc::Result<()> {
    run_example()
}
