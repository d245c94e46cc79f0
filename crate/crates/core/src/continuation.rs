//! Tracking of stable attractors as `rho` or `x_cen` changes, retraining the
//! readout at every step and seeding the closed loop with the previous state.

use std::io::Write;

use crate::analysis::{classify_prediction, AttractorKind, AttractorLabel, Target, Thresholds};
use crate::basins::{same_attractor, CatalogEntry, CellOutcome};
use crate::dynamics::{run_closed_loop, RunOptions, TrainedReadout};
use crate::error::{Error, Result};
use crate::netgen::{Reservoir, ReservoirNet};
use crate::taskgen::{seeing_double_pair, OrbitSpec, RotationMode, Trajectory};
use crate::training::{train_on, TrainingParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchParameter {
    Rho,
    XCen,
}

impl BranchParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            BranchParameter::Rho => "rho",
            BranchParameter::XCen => "x_cen",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rho" => Some(BranchParameter::Rho),
            "x_cen" => Some(BranchParameter::XCen),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchPoint {
    pub param: f64,
    pub final_state: Vec<f64>,
    pub extrema: Vec<f64>,
    pub period: Option<f64>,
    pub label: AttractorLabel,
    /// Subsampled assessment window.
    pub orbit: Trajectory,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    EndOfRange,
    /// The attractor at `param` no longer matched the previous point.
    LostTrack { param: f64 },
    Diverged { param: f64 },
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::EndOfRange => "end_of_range",
            Termination::LostTrack { .. } => "lost_track",
            Termination::Diverged { .. } => "diverged",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationBranch {
    pub parameter: BranchParameter,
    pub points: Vec<BranchPoint>,
    pub termination: Termination,
    /// Label of the attractor that broke the track, if any.
    pub lost_label: Option<AttractorLabel>,
}

/// Fixed setup of a tracking run; the varied parameter overrides `rho` or `x_cen`.
#[derive(Debug, Clone, Copy)]
pub struct BranchSetup<'a> {
    pub net: &'a ReservoirNet,
    pub parameter: BranchParameter,
    pub rho: f64,
    pub x_cen: f64,
    pub b: f64,
    pub mode: RotationMode,
    pub training: TrainingParams,
    /// Target whose reconstruction the branch follows; sets the classifier's sense of correct.
    pub which: Target,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackOptions {
    pub settle: f64,
    pub assess: f64,
    /// Subsampling of the stored assessment window.
    pub orbit_stride: usize,
}

impl Default for TrackOptions {
    fn default() -> Self {
        Self { settle: 100.0, assess: 40.0, orbit_stride: 10 }
    }
}

/// Tracks the attractor through `path`. Without `init`, the branch starts from
/// the training run's final state for `setup.which` at `path[0]`.
pub fn track_branch(setup: &BranchSetup<'_>, path: &[f64], init: Option<&[f64]>, opts: &TrackOptions) -> Result<BifurcationBranch> {
    let train = |p: f64| -> Result<(Reservoir<'_>, TrainedReadout, (OrbitSpec, OrbitSpec), Vec<Vec<f64>>)> {
        let (rho, x_cen) = match setup.parameter {
            BranchParameter::Rho => (p, setup.x_cen),
            BranchParameter::XCen => (setup.rho, p),
        };
        let targets = seeing_double_pair(x_cen, setup.b, setup.mode, setup.net.params.tau)?;
        let res = setup.net.at_rho(rho)?;
        let (readout, finals) = train_on(&res, &[targets.0, targets.1], &setup.training)?;
        Ok((res, readout, targets, finals))
    };
    let mut start = init.map(|s| s.to_vec());
    track_with(setup.parameter, setup.which, path, opts, |k, p| {
        let (res, readout, targets, finals) = train(p)?;
        let r0 = match (k, start.take()) {
            (0, Some(s)) => Some(s),
            (0, None) => Some(setup.which.pick((finals[0].clone(), finals[1].clone()))),
            _ => None,
        };
        Ok((res, readout, targets, r0))
    })
}

type StepModel<'a> = (Reservoir<'a>, TrainedReadout, (OrbitSpec, OrbitSpec), Option<Vec<f64>>);

/// Core loop. `model(k, p)` supplies the reservoir, readout and targets for the
/// `k`-th path value, and the starting state when `k == 0`.
pub fn track_with<'a>(
    parameter: BranchParameter,
    which: Target,
    path: &[f64],
    opts: &TrackOptions,
    mut model: impl FnMut(usize, f64) -> Result<StepModel<'a>>,
) -> Result<BifurcationBranch> {
    if path.is_empty() {
        return Err(Error::InvalidParameter("empty parameter path".into()));
    }
    let increasing = path.len() < 2 || path[1] > path[0];
    if path.windows(2).any(|w| (w[1] > w[0]) != increasing || w[1] == w[0]) {
        return Err(Error::InvalidParameter("parameter path must be strictly monotone".into()));
    }
    let mut points: Vec<BranchPoint> = Vec::new();
    let mut state: Vec<f64> = Vec::new();
    for (k, &p) in path.iter().enumerate() {
        let (res, readout, targets, r0) = model(k, p)?;
        if let Some(r0) = r0 {
            state = r0;
        }
        let b = targets.0.radius();
        let th = Thresholds::for_radius(b);
        let settle = (opts.settle / res.tau()).round() as usize;
        let assess = (opts.assess / res.tau()).round() as usize;
        let run = match run_closed_loop(&res, &readout, &state, settle + assess, &RunOptions { record_from: settle, ..Default::default() }) {
            Ok(run) => run,
            Err(Error::Diverged { .. }) => {
                return Ok(BifurcationBranch { parameter, points, termination: Termination::Diverged { param: p }, lost_label: None })
            }
            Err(e) => return Err(e),
        };
        let label = classify_prediction(&run.projected, (&targets.0, &targets.1), which, opts.assess, &th);
        let keep: Vec<Vec<f64>> = run.projected.samples().step_by(opts.orbit_stride.max(1)).map(|s| s.to_vec()).collect();
        let orbit = Trajectory::from_samples(res.tau() * opts.orbit_stride.max(1) as f64, &keep)?;
        let point = BranchPoint { param: p, final_state: run.final_state, extrema: label.extrema.clone(), period: label.period, label, orbit };
        if let Some(prev) = points.last() {
            if !continues(prev, &point, b) {
                return Ok(BifurcationBranch {
                    parameter,
                    points,
                    termination: Termination::LostTrack { param: p },
                    lost_label: Some(point.label),
                });
            }
        }
        state.clone_from(&point.final_state);
        points.push(point);
    }
    Ok(BifurcationBranch { parameter, points, termination: Termination::EndOfRange, lost_label: None })
}

/// Whether `cur` is the same attractor as `prev` under the basin catalog rule.
pub fn continues(prev: &BranchPoint, cur: &BranchPoint, b: f64) -> bool {
    let entry = CatalogEntry { label: prev.label.clone(), representative: prev.orbit.clone() };
    let cell = CellOutcome { label: cur.label.clone(), representative: Some(cur.orbit.clone()) };
    same_attractor(&entry, &cell, &Thresholds::for_radius(b), b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodDoubling {
    pub param_interval: (f64, f64),
    pub period_ratio: f64,
}

/// Consecutive points whose period ratio lies in `[1.9, 2.1]` while the number
/// of maxima clusters doubles.
pub fn detect_period_doubling(points: &[BranchPoint]) -> Vec<PeriodDoubling> {
    points
        .windows(2)
        .filter_map(|w| {
            let (t0, t1) = (w[0].period?, w[1].period?);
            let ratio = t1 / t0;
            let doubled = w[0].label.clusters > 0 && w[1].label.clusters == 2 * w[0].label.clusters;
            ((1.9..=2.1).contains(&ratio) && doubled).then_some(PeriodDoubling { param_interval: (w[0].param, w[1].param), period_ratio: ratio })
        })
        .collect()
}

/// Branch CSV `param,period,label,extrema`; extrema are `;`-joined.
pub fn write_branch_csv<W: Write>(branch: &BifurcationBranch, mut w: W) -> Result<()> {
    writeln!(w, "param,period,label,extrema")?;
    for p in &branch.points {
        let ext: Vec<String> = p.extrema.iter().map(|v| v.to_string()).collect();
        let period = p.period.map(|t| t.to_string()).unwrap_or_default();
        writeln!(w, "{},{period},{},{}", p.param, p.label.kind.as_str(), ext.join(";"))?;
    }
    Ok(())
}

/// True when every point of the branch is a fixed point.
pub fn is_fixed_point_branch(branch: &BifurcationBranch) -> bool {
    branch.points.iter().all(|p| p.label.kind == AttractorKind::FixedPoint && p.extrema.len() == 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgen::NetParams;
    use nalgebra::DMatrix;
    use std::f64::consts::TAU;

    fn synthetic(param: f64, period: f64, clusters: usize) -> BranchPoint {
        let mut label = AttractorLabel::diverged();
        label.kind = AttractorKind::OtherLimitCycle;
        label.period = Some(period);
        label.clusters = clusters;
        BranchPoint { param, final_state: vec![], extrema: vec![], period: Some(period), label, orbit: Trajectory::new(2, 0.1, vec![0.0, 0.0]).unwrap() }
    }

    #[test]
    fn period_doubling_examples() {
        let pts: Vec<BranchPoint> = [(1, TAU), (1, TAU), (2, 2.0 * TAU), (2, 2.0 * TAU)]
            .iter()
            .enumerate()
            .map(|(k, (c, t))| synthetic(k as f64, *t, *c))
            .collect();
        let ev = detect_period_doubling(&pts);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].param_interval, (1.0, 2.0));
        assert!((ev[0].period_ratio - 2.0).abs() < 1e-12);
        assert!(detect_period_doubling(&[synthetic(0.0, TAU, 1), synthetic(1.0, TAU, 1)]).is_empty());
        assert!(detect_period_doubling(&[synthetic(0.0, TAU, 1), synthetic(1.0, 2.2 * TAU, 2)]).is_empty());
        // Ratio two without doubling of the maxima count is not flagged.
        assert!(detect_period_doubling(&[synthetic(0.0, TAU, 1), synthetic(1.0, 2.0 * TAU, 1)]).is_empty());
    }

    #[test]
    fn fixed_point_branch_with_a_silent_readout() {
        let net = ReservoirNet::build(NetParams { n: 20, p: 0.2, ..Default::default() }).unwrap();
        let readout = TrainedReadout::from_matrix(DMatrix::zeros(2, 40)).unwrap();
        let targets = seeing_double_pair(0.0, 5.0, RotationMode::Opposite, 0.01).unwrap();
        let opts = TrackOptions { settle: 20.0, assess: 10.0, ..Default::default() };
        let branch = track_with(BranchParameter::Rho, Target::A, &[0.3, 0.4, 0.5], &opts, |k, p| {
            let init = (k == 0).then(|| vec![0.1; 20]);
            Ok((net.at_rho(p)?, readout.clone(), targets, init))
        })
        .unwrap();
        assert_eq!(branch.termination, Termination::EndOfRange);
        assert_eq!(branch.points.len(), 3);
        assert!(is_fixed_point_branch(&branch));
        let mut csv = Vec::new();
        write_branch_csv(&branch, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("param,period,label,extrema\n0.3,,fixed_point,"));
    }

    #[test]
    fn non_monotone_path_is_rejected() {
        let r = track_with(BranchParameter::Rho, Target::A, &[0.3, 0.2, 0.4], &TrackOptions::default(), |_, _| unreachable!());
        assert!(r.is_err());
    }

    #[test]
    fn identity_jump_ends_the_track() {
        let mut a = synthetic(0.0, TAU, 1);
        a.label.centre = vec![0.0, 0.0];
        let mut b = a.clone();
        b.label.centre = vec![3.0, 0.0];
        assert!(continues(&a, &a, 5.0));
        assert!(!continues(&a, &b, 5.0));
    }
}
