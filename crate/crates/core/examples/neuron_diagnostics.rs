// Per-neuron view of two coexisting attractors: histograms of the state
// difference between the runs, selected activity traces, and the rank
// correlation of the two trained responses.

use multirc::dynamics::integrate_closed_loop;
use multirc::netgen::{NetParams, ReservoirNet};
use multirc::neuron::{neuron_traces, paired_run_difference, spearman, BIN_COUNT};
use multirc::taskgen::{seeing_double_pair, RotationMode};
use multirc::training::{train_on, TrainingParams};

pub fn run_example() -> multirc::Result<()> {
    let net = ReservoirNet::build(NetParams { n: 100, ..Default::default() })?;
    let targets = seeing_double_pair(-5.5, 5.0, RotationMode::Opposite, net.params.tau)?;
    let res = net.at_rho(1.2)?;
    let (readout, finals) = train_on(&res, &[targets.0, targets.1], &TrainingParams::default())?;
    let diff = paired_run_difference(&res, &readout, &finals[0], &finals[1], 20.0, 100)?;
    for (k, t) in diff.times.iter().enumerate() {
        let mode = (0..BIN_COUNT).max_by_key(|&i| diff.histograms[k][i]).unwrap_or(0);
        println!("t {t:>5.1}: x gap {:+.3}, spread {:.3}, fullest bin {mode}", diff.x_gap[k], diff.spread[k]);
    }
    let steps = (10.0 / res.tau()) as usize;
    let (a, _) = integrate_closed_loop(&res, &readout, &finals[0], steps)?;
    let (b, _) = integrate_closed_loop(&res, &readout, &finals[1], steps)?;
    let idx = [0, 24, 49, 99];
    let (ta, tb) = (neuron_traces(&a, &idx)?, neuron_traces(&b, &idx)?);
    for (k, i) in idx.iter().enumerate() {
        println!("neuron {}: rank correlation between runs {:?}", i + 1, spearman(&ta[k], &tb[k]));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> multirc::Result<()> {
    run_example()
}
