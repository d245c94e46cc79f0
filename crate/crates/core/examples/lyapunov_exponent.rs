// Largest Lyapunov exponents: a silent readout (pure decay at rate gamma),
// a reconstructed cycle, and an over-driven reservoir.

use multirc::analysis::{largest_lyapunov, LyapunovOptions, Target};
use multirc::dynamics::TrainedReadout;
use multirc::harness::predict;
use multirc::netgen::{NetParams, ReservoirNet};
use multirc::taskgen::{seeing_double_pair, RotationMode};
use multirc::training::{train_multifunctional, TrainingParams};
use nalgebra::DMatrix;

pub fn run_example() -> multirc::Result<()> {
    let net = ReservoirNet::build(NetParams { n: 200, seed: 1, ..Default::default() })?;
    let opts = LyapunovOptions::default();
    let targets = seeing_double_pair(-5.5, 5.0, RotationMode::Opposite, net.params.tau)?;

    // With a zero readout and a zero adjacency the state just decays.
    let silent = TrainedReadout::from_matrix(DMatrix::zeros(2, 2 * net.n()))?;
    let res = net.at_rho(0.0)?;
    let decay = largest_lyapunov(&res, &silent, &vec![0.1; net.n()], &opts)?;
    println!("decay: lambda_max = {:.5} (gamma = {})", decay.lambda_max, net.params.gamma);

    for rho in [1.2, 2.4] {
        let (readout, finals) = train_multifunctional(&net, rho, &[targets.0, targets.1], &TrainingParams::default())?;
        let res = net.at_rho(rho)?;
        let (label, run) = predict(&res, &readout, &finals[0], (&targets.0, &targets.1), Target::A, 600.0, 40.0)?;
        let est = largest_lyapunov(&res, &readout, &run.final_state, &opts)?;
        println!("rho {rho}: {} with lambda_max = {:.5}", label.kind.as_str(), est.lambda_max);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> multirc::Result<()> {
    run_example()
}
