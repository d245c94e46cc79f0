// Train one readout on both circles, close the loop from each training end
// state and classify what the autonomous reservoir settles onto.

use multirc::analysis::{classify_prediction, Target, Thresholds, ASSESS_WINDOW};
use multirc::dynamics::{run_closed_loop, RunOptions};
use multirc::netgen::{NetParams, ReservoirNet};
use multirc::taskgen::{seeing_double_pair, RotationMode};
use multirc::training::{train_multifunctional, TrainingParams};

pub fn run_example() -> multirc::Result<()> {
    let net = ReservoirNet::build(NetParams { n: 200, ..Default::default() })?;
    let (rho, x_cen, b) = (1.2, -5.5, 5.0);
    let targets = seeing_double_pair(x_cen, b, RotationMode::Opposite, net.params.tau)?;
    let (readout, finals) = train_multifunctional(&net, rho, &[targets.0, targets.1], &TrainingParams::default())?;
    let res = net.at_rho(rho)?;
    let steps = (300.0 / res.tau()) as usize;
    let keep = (ASSESS_WINDOW / res.tau()) as usize;
    for (which, r0) in [Target::A, Target::B].into_iter().zip(&finals) {
        let run = run_closed_loop(&res, &readout, r0, steps, &RunOptions { record_from: steps - keep, ..Default::default() })?;
        let label = classify_prediction(&run.projected, (&targets.0, &targets.1), which, ASSESS_WINDOW, &Thresholds::for_radius(b));
        println!(
            "{}: {} centre ({:.3}, {:.3}) period {:?} delta_rel {:?}",
            which.as_str(),
            label.kind.as_str(),
            label.centre[0],
            label.centre[1],
            label.period,
            label.delta_rel
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> multirc::Result<()> {
    run_example()
}
