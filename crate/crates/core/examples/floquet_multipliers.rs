// Floquet multipliers of a reconstructed limit cycle from its monodromy matrix.

use multirc::floquet::{find_cycle, floquet_multipliers, monodromy, FloquetOptions};
use multirc::netgen::{NetParams, ReservoirNet};
use multirc::taskgen::{seeing_double_pair, RotationMode};
use multirc::training::{train_multifunctional, TrainingParams};

pub fn run_example() -> multirc::Result<()> {
    let net = ReservoirNet::build(NetParams { n: 100, ..Default::default() })?;
    let (rho, b) = (1.2, 5.0);
    let targets = seeing_double_pair(-5.5, b, RotationMode::Opposite, net.params.tau)?;
    let (readout, finals) = train_multifunctional(&net, rho, &[targets.0, targets.1], &TrainingParams::default())?;
    let res = net.at_rho(rho)?;
    let opts = FloquetOptions::default();
    let cycle = find_cycle(&res, &readout, &finals[0], 200.0, b, &opts)?;
    let m = monodromy(&res, &readout, &cycle.state, cycle.period, &opts)?;
    println!("period {:.6}, return residual {:.2e}", cycle.period, m.return_residual);
    for (k, mu) in floquet_multipliers(&m.q, opts.top_k)?.iter().enumerate() {
        println!("mu_{} = {:.6} {:+.6}i  |mu| = {:.6}", k + 1, mu.re, mu.im, mu.norm());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> multirc::Result<()> {
    run_example()
}
