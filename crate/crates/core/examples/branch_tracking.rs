// Follow the reconstructed attractor while the spectral radius is lowered,
// retraining at every step and seeding each run from the previous state.

use multirc::analysis::Target;
use multirc::continuation::{detect_period_doubling, track_branch, BranchParameter, BranchSetup, TrackOptions};
use multirc::netgen::{NetParams, ReservoirNet};
use multirc::taskgen::RotationMode;
use multirc::training::TrainingParams;

pub fn run_example() -> multirc::Result<()> {
    let net = ReservoirNet::build(NetParams { n: 100, ..Default::default() })?;
    let setup = BranchSetup {
        net: &net,
        parameter: BranchParameter::Rho,
        rho: 1.2,
        x_cen: -5.5,
        b: 5.0,
        mode: RotationMode::Opposite,
        training: TrainingParams { t_listen: 100.0, t_train: 200.0, ..Default::default() },
        which: Target::A,
    };
    let path = [1.2, 1.1, 1.0, 0.9];
    let branch = track_branch(&setup, &path, None, &TrackOptions::default())?;
    for p in &branch.points {
        println!("rho {:.2}: {} period {:?} maxima {:?}", p.param, p.label.kind.as_str(), p.period, p.extrema);
    }
    println!("termination: {}", branch.termination.as_str());
    println!("period doublings: {}", detect_period_doubling(&branch.points).len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> multirc::Result<()> {
    run_example()
}
