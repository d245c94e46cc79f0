// Residence intervals of an autonomous trajectory near each target circle.
// An over-driven reservoir wanders between the two ruins.

use multirc::analysis::{ResidenceTracker, Target};
use multirc::dynamics::visit_closed_loop;
use multirc::dynamics::ClosedLoop;
use multirc::netgen::{NetParams, ReservoirNet};
use multirc::taskgen::{seeing_double_pair, RotationMode};
use multirc::training::{train_on, TrainingParams};

pub fn run_example() -> multirc::Result<()> {
    let net = ReservoirNet::build(NetParams { n: 100, ..Default::default() })?;
    let targets = seeing_double_pair(-3.0, 5.0, RotationMode::Opposite, net.params.tau)?;
    let res = net.at_rho(2.4)?;
    let (readout, finals) = train_on(&res, &[targets.0, targets.1], &TrainingParams::default())?;
    let cl = ClosedLoop::new(&res, &readout)?;
    let mut tracker = ResidenceTracker::new((&targets.0, &targets.1), 10.0, res.tau());
    let steps = (500.0 / res.tau()) as usize;
    visit_closed_loop(&cl, &readout, &finals[0], steps, res.tau(), None, |_, _, u| {
        tracker.push(u);
    })?;
    let record = tracker.record();
    let time_in = |t: Target| record.intervals.iter().filter(|(l, _)| *l == t).map(|(_, d)| d).sum::<f64>();
    println!("switches: {}", record.switch_count);
    println!("time near A: {:.1}, near B: {:.1}", time_in(Target::A), time_in(Target::B));
    for (label, d) in record.intervals.iter().take(8) {
        println!("  {} for {d:.2}", label.as_str());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> multirc::Result<()> {
    run_example()
}
