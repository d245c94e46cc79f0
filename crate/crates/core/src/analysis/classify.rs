//! Colour-coded labelling of a closed-loop prediction against the two targets.

use super::{distance, estimate_period, mean_point, roundness, sup_motion, winding_direction};
use crate::taskgen::{OrbitSpec, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttractorKind {
    CorrectCycle,
    SwitchedCycle,
    NonPeriodic,
    OtherLimitCycle,
    FixedPoint,
    Diverged,
}

impl AttractorKind {
    pub const ALL: [AttractorKind; 6] = [
        AttractorKind::CorrectCycle,
        AttractorKind::SwitchedCycle,
        AttractorKind::NonPeriodic,
        AttractorKind::OtherLimitCycle,
        AttractorKind::FixedPoint,
        AttractorKind::Diverged,
    ];

    /// Plot colour.
    pub fn color(self) -> &'static str {
        match self {
            AttractorKind::CorrectCycle => "blue",
            AttractorKind::SwitchedCycle => "yellow",
            AttractorKind::NonPeriodic => "magenta",
            AttractorKind::OtherLimitCycle => "black",
            AttractorKind::FixedPoint => "green",
            AttractorKind::Diverged => "grey",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AttractorKind::CorrectCycle => "correct_cycle",
            AttractorKind::SwitchedCycle => "switched_cycle",
            AttractorKind::NonPeriodic => "non_periodic",
            AttractorKind::OtherLimitCycle => "other_limit_cycle",
            AttractorKind::FixedPoint => "fixed_point",
            AttractorKind::Diverged => "diverged",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s || k.color() == s)
    }

    pub fn is_cycle(self) -> bool {
        matches!(self, AttractorKind::CorrectCycle | AttractorKind::SwitchedCycle | AttractorKind::OtherLimitCycle)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttractorLabel {
    pub kind: AttractorKind,
    pub centre: Vec<f64>,
    pub winding: i8,
    pub period: Option<f64>,
    pub delta_rel: Option<f64>,
    /// x-maxima of one period, or the fixed point's x.
    pub extrema: Vec<f64>,
    /// Maxima clusters in one period.
    pub clusters: usize,
}

impl AttractorLabel {
    pub fn diverged() -> Self {
        Self {
            kind: AttractorKind::Diverged,
            centre: vec![],
            winding: 0,
            period: None,
            delta_rel: None,
            extrema: vec![],
            clusters: 0,
        }
    }
}

/// Which of the two targets a prediction is meant to reproduce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    A,
    B,
}

impl Target {
    pub fn other(self) -> Target {
        match self {
            Target::A => Target::B,
            Target::B => Target::A,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Target::A => "A",
            Target::B => "B",
        }
    }

    pub fn pick<T>(self, pair: (T, T)) -> T {
        match self {
            Target::A => pair.0,
            Target::B => pair.1,
        }
    }
}

/// Classification tolerances, all proportional to the orbit radius `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Largest component range over the window that counts as stationary.
    pub eps_fp: f64,
    /// Centre matching distance.
    pub eps_cen: f64,
    /// Maxima clustering tolerance.
    pub eps_amp: f64,
    /// Roundness bound for a correct reconstruction.
    pub delta_rel_max: f64,
}

impl Thresholds {
    pub fn for_radius(b: f64) -> Self {
        Self { eps_fp: 1e-3 * b, eps_cen: 0.1 * b, eps_amp: 1e-2 * b, delta_rel_max: 0.25 }
    }
}

/// Default classification window.
pub const ASSESS_WINDOW: f64 = 40.0;

/// Labels the closing `window` of a prediction meant to reproduce `which`.
pub fn classify_prediction(
    traj: &Trajectory,
    targets: (&OrbitSpec, &OrbitSpec),
    which: Target,
    window: f64,
    th: &Thresholds,
) -> AttractorLabel {
    if traj.is_empty() || !traj.is_finite() {
        return AttractorLabel::diverged();
    }
    let w = traj.tail(window);
    if sup_motion(&w) < th.eps_fp {
        let last = w.sample(w.len() - 1).to_vec();
        return AttractorLabel {
            kind: AttractorKind::FixedPoint,
            extrema: vec![last[0]],
            centre: last,
            winding: 0,
            period: None,
            delta_rel: None,
            clusters: 1,
        };
    }
    let Some(est) = estimate_period(&w, th.eps_amp) else {
        let centre = mean_point(&w);
        let winding = winding_direction(&w, &centre);
        return AttractorLabel {
            kind: AttractorKind::NonPeriodic,
            centre,
            winding,
            period: None,
            delta_rel: None,
            extrema: vec![],
            clusters: 0,
        };
    };
    // Average over whole periods so a partial turn does not bias the centre.
    let whole = (w.duration() / est.period).floor().max(1.0);
    let n = ((whole * est.period / w.step()).round() as usize).clamp(1, w.len());
    let closing = w.slice(w.len() - n, w.len());
    let centre = mean_point(&closing);
    let winding = winding_direction(&closing, &centre);
    let matches = |t: &OrbitSpec| {
        let (_, rel) = roundness(&w, &t.centre(), t.radius());
        let ok = distance(&centre, &t.centre()) < th.eps_cen && winding == t.winding() && rel < th.delta_rel_max;
        (ok, rel)
    };
    let here = which.pick(targets);
    let there = which.other().pick(targets);
    let (ok_here, rel_here) = matches(here);
    let (kind, delta_rel) = if ok_here {
        (AttractorKind::CorrectCycle, rel_here)
    } else {
        match matches(there) {
            (true, rel) => (AttractorKind::SwitchedCycle, rel),
            _ => (AttractorKind::OtherLimitCycle, rel_here),
        }
    };
    AttractorLabel {
        kind,
        centre,
        winding,
        period: Some(est.period),
        delta_rel: Some(delta_rel),
        extrema: est.extrema,
        clusters: est.clusters,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taskgen::{generate_orbit, seeing_double_pair, RotationMode};

    fn pair(x_cen: f64) -> (OrbitSpec, OrbitSpec) {
        seeing_double_pair(x_cen, 5.0, RotationMode::Opposite, 0.01).unwrap()
    }

    #[test]
    fn exact_replays() {
        let (a, b) = pair(0.0);
        let th = Thresholds::for_radius(5.0);
        let ta = generate_orbit(&a, 60000).unwrap();
        let tb = generate_orbit(&b, 60000).unwrap();
        let la = classify_prediction(&ta, (&a, &b), Target::A, ASSESS_WINDOW, &th);
        assert_eq!(la.kind, AttractorKind::CorrectCycle);
        assert!((la.period.unwrap() - 2.0 * std::f64::consts::PI).abs() < 0.02);
        assert!(la.delta_rel.unwrap() < 1e-9);
        assert_eq!(classify_prediction(&tb, (&a, &b), Target::A, ASSESS_WINDOW, &th).kind, AttractorKind::SwitchedCycle);
        assert_eq!(classify_prediction(&tb, (&a, &b), Target::B, ASSESS_WINDOW, &th).kind, AttractorKind::CorrectCycle);

        let (a, b) = pair(5.5);
        let ta = generate_orbit(&a, 60000).unwrap();
        assert_eq!(classify_prediction(&ta, (&a, &b), Target::B, ASSESS_WINDOW, &th).kind, AttractorKind::SwitchedCycle);
    }

    #[test]
    fn decaying_spiral_is_a_fixed_point() {
        let (a, b) = pair(0.0);
        let data: Vec<f64> = (0..=60000)
            .flat_map(|i| {
                let t = i as f64 * 0.01;
                [5.0 * (-t).exp() * t.cos(), 5.0 * (-t).exp() * t.sin()]
            })
            .collect();
        let traj = Trajectory::new(2, 0.01, data).unwrap();
        let l = classify_prediction(&traj, (&a, &b), Target::A, ASSESS_WINDOW, &Thresholds::for_radius(5.0));
        assert_eq!(l.kind, AttractorKind::FixedPoint);
        assert_eq!((l.winding, l.period), (0, None));
    }

    #[test]
    fn off_centre_and_squashed_cycles() {
        let (a, b) = pair(0.0);
        let th = Thresholds::for_radius(5.0);
        let shifted = generate_orbit(&OrbitSpec { x_cen: 2.0, ..a }, 60000).unwrap();
        assert_eq!(classify_prediction(&shifted, (&a, &b), Target::A, ASSESS_WINDOW, &th).kind, AttractorKind::OtherLimitCycle);
        let squashed = generate_orbit(&OrbitSpec { b_y: 3.0, ..a }, 60000).unwrap();
        let l = classify_prediction(&squashed, (&a, &b), Target::A, ASSESS_WINDOW, &th);
        assert_eq!(l.kind, AttractorKind::OtherLimitCycle);
        assert!((l.delta_rel.unwrap() - 0.4).abs() < 1e-3);
    }

    #[test]
    fn irregular_and_broken_signals() {
        let (a, b) = pair(0.0);
        let th = Thresholds::for_radius(5.0);
        let data: Vec<f64> = (0..=60000)
            .flat_map(|i| {
                let t = i as f64 * 0.01;
                [5.0 * t.cos() + 2.0 * (t * 2f64.sqrt()).cos(), 5.0 * t.sin()]
            })
            .collect();
        let l = classify_prediction(&Trajectory::new(2, 0.01, data).unwrap(), (&a, &b), Target::A, ASSESS_WINDOW, &th);
        assert_eq!(l.kind, AttractorKind::NonPeriodic);
        let bad = Trajectory::new(2, 0.01, vec![0.0, f64::NAN]).unwrap();
        assert_eq!(classify_prediction(&bad, (&a, &b), Target::A, ASSESS_WINDOW, &th).kind, AttractorKind::Diverged);
    }

    #[test]
    fn names_round_trip() {
        for k in AttractorKind::ALL {
            assert_eq!(AttractorKind::parse(k.as_str()), Some(k));
            assert_eq!(AttractorKind::parse(k.color()), Some(k));
        }
    }
}
