// Local maxima of a signal and period-doubling detection along a branch of
// synthetic cycles whose second harmonic grows with the parameter.

use multirc::analysis::{classify_prediction, local_maxima, Target, Thresholds};
use multirc::continuation::{detect_period_doubling, BranchPoint};
use multirc::taskgen::{seeing_double_pair, RotationMode, Trajectory};
use std::f64::consts::TAU;

fn orbit(eps: f64, tau: f64) -> Trajectory {
    // Period 2 pi for eps = 0; a subharmonic of period 4 pi splits the maxima otherwise.
    let n = (60.0 / tau) as usize;
    let samples: Vec<Vec<f64>> = (0..=n)
        .map(|i| {
            let t = i as f64 * tau;
            vec![-5.5 + 5.0 * t.cos() + eps * (0.5 * t).cos(), 5.0 * t.sin()]
        })
        .collect();
    Trajectory::from_samples(tau, &samples).expect("rectangular samples")
}

pub fn run_example() -> multirc::Result<()> {
    let tau = 0.01;
    let targets = seeing_double_pair(-5.5, 5.0, RotationMode::Opposite, tau)?;
    let period_one = orbit(0.0, tau);
    let maxima = local_maxima(&period_one.component(0), tau);
    println!("period-one maxima: {}", maxima.iter().map(|(t, x)| format!("({t:.2}, {x:.3})")).collect::<Vec<_>>().join(" "));
    let mut points = Vec::new();
    for (k, eps) in [0.0, 0.0, 0.5, 0.8].into_iter().enumerate() {
        let traj = orbit(eps, tau);
        let label = classify_prediction(&traj, (&targets.0, &targets.1), Target::A, 40.0, &Thresholds::for_radius(5.0));
        println!("param {k}: {} period {:?} maxima clusters {}", label.kind.as_str(), label.period.map(|p| p / TAU), label.clusters);
        points.push(BranchPoint {
            param: k as f64,
            final_state: vec![],
            extrema: label.extrema.clone(),
            period: label.period,
            label,
            orbit: traj.tail(4.0 * TAU),
        });
    }
    for pd in detect_period_doubling(&points) {
        println!("period doubling in {:?}, period ratio {:.3}", pd.param_interval, pd.period_ratio);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> multirc::Result<()> {
    run_example()
}
