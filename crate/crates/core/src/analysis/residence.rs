//! Residence times near the two quasi-attractors during itinerant motion.
//!
//! Each sample is labelled from the trailing `window`: it belongs to `A` when
//! the motion over the window sweeps at least half a turn about `A`'s centre
//! in `A`'s rotation sense, and likewise for `B`. When neither or both hold,
//! the label goes to the target whose centre is nearer to the window's mean
//! position. Angles and positions are kept as running prefix sums over a ring
//! buffer, so labelling streams in O(window) memory.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::io::Write;

use super::{step_angle, Target};
use crate::error::Result;
use crate::taskgen::{OrbitSpec, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct ResidenceRecord {
    /// Consecutive `(label, duration)` pairs with differing labels.
    pub intervals: Vec<(Target, f64)>,
    pub switch_count: usize,
}

/// Streaming labeller; feed samples in time order.
#[derive(Debug, Clone)]
pub struct ResidenceTracker {
    targets: (OrbitSpec, OrbitSpec),
    window: usize,
    step: f64,
    prev: Option<[f64; 2]>,
    total: [f64; 2],
    /// Prefix angles about each centre for the last `window + 1` samples.
    angles: VecDeque<[f64; 2]>,
    /// Prefix position sums, one entry ahead of `angles`.
    sums: VecDeque<[f64; 2]>,
    runs: Vec<(Target, u64)>,
}

impl ResidenceTracker {
    pub fn new(targets: (&OrbitSpec, &OrbitSpec), window: f64, step: f64) -> Self {
        let w = ((window / step).round() as usize).max(1);
        let mut sums = VecDeque::with_capacity(w + 2);
        sums.push_back([0.0, 0.0]);
        Self {
            targets: (*targets.0, *targets.1),
            window: w,
            step,
            prev: None,
            total: [0.0, 0.0],
            angles: VecDeque::with_capacity(w + 1),
            sums,
            runs: Vec::new(),
        }
    }

    pub fn push(&mut self, s: &[f64]) -> Target {
        let (a, b) = (&self.targets.0, &self.targets.1);
        let centres = [a.centre(), b.centre()];
        if let Some(q) = self.prev {
            for (k, c) in centres.iter().enumerate() {
                self.total[k] += step_angle((q[0] - c[0], q[1] - c[1]), (s[0] - c[0], s[1] - c[1]));
            }
        }
        self.prev = Some([s[0], s[1]]);
        self.angles.push_back(self.total);
        let last = *self.sums.back().expect("nonempty");
        self.sums.push_back([last[0] + s[0], last[1] + s[1]]);
        if self.angles.len() > self.window + 1 {
            self.angles.pop_front();
            self.sums.pop_front();
        }
        let (first, now) = (self.angles[0], self.total);
        let in_a = (now[0] - first[0]) * a.winding() as f64 >= PI;
        let in_b = (now[1] - first[1]) * b.winding() as f64 >= PI;
        let label = match (in_a, in_b) {
            (true, false) => Target::A,
            (false, true) => Target::B,
            _ => {
                let k = self.angles.len() as f64;
                let (lo, hi) = (self.sums[0], *self.sums.back().expect("nonempty"));
                let m = [(hi[0] - lo[0]) / k, (hi[1] - lo[1]) / k];
                let da = (m[0] - a.x_cen).hypot(m[1] - a.y_cen);
                let db = (m[0] - b.x_cen).hypot(m[1] - b.y_cen);
                if da <= db {
                    Target::A
                } else {
                    Target::B
                }
            }
        };
        match self.runs.last_mut() {
            Some((l, n)) if *l == label => *n += 1,
            _ => self.runs.push((label, 1)),
        }
        label
    }

    pub fn record(&self) -> ResidenceRecord {
        let intervals: Vec<(Target, f64)> = self.runs.iter().map(|(l, n)| (*l, *n as f64 * self.step)).collect();
        ResidenceRecord { switch_count: intervals.len().saturating_sub(1), intervals }
    }
}

/// Per-sample quasi-attractor labels.
pub fn residence_labels(traj: &Trajectory, targets: (&OrbitSpec, &OrbitSpec), window: f64) -> Vec<Target> {
    let mut t = ResidenceTracker::new(targets, window, traj.step());
    traj.samples().map(|s| t.push(s)).collect()
}

/// Merges runs of equal labels into intervals of duration `samples * step`.
pub fn intervals_from_labels(labels: &[Target], step: f64) -> ResidenceRecord {
    let mut runs: Vec<(Target, u64)> = Vec::new();
    for &l in labels {
        match runs.last_mut() {
            Some((last, n)) if *last == l => *n += 1,
            _ => runs.push((l, 1)),
        }
    }
    let intervals: Vec<(Target, f64)> = runs.into_iter().map(|(l, n)| (l, n as f64 * step)).collect();
    ResidenceRecord { switch_count: intervals.len().saturating_sub(1), intervals }
}

pub fn residence_intervals(traj: &Trajectory, targets: (&OrbitSpec, &OrbitSpec), window: f64) -> ResidenceRecord {
    let mut t = ResidenceTracker::new(targets, window, traj.step());
    traj.samples().for_each(|s| {
        t.push(s);
    });
    t.record()
}

/// CSV `label,duration`.
pub fn write_residence_csv<W: Write>(rec: &ResidenceRecord, mut w: W) -> Result<()> {
    writeln!(w, "label,duration")?;
    for (l, d) in &rec.intervals {
        writeln!(w, "{},{d}", l.as_str())?;
    }
    Ok(())
}
