//! Attractor characterization of closed-loop predictions.

mod classify;
mod lyapunov;
mod period;
mod residence;

pub use classify::{classify_prediction, AttractorKind, ASSESS_WINDOW, AttractorLabel, Target, Thresholds};
pub use lyapunov::{largest_lyapunov, largest_lyapunov_field, LyapunovEstimate, LyapunovMethod, LyapunovOptions};
pub use period::{estimate_period, local_maxima, PeriodEstimate};
pub use residence::{intervals_from_labels, residence_intervals, residence_labels, write_residence_csv, ResidenceRecord, ResidenceTracker};

use crate::taskgen::Trajectory;

/// Per-component mean of all samples.
pub fn mean_point(traj: &Trajectory) -> Vec<f64> {
    let mut m = vec![0.0; traj.dim()];
    for s in traj.samples() {
        for (a, v) in m.iter_mut().zip(s) {
            *a += v;
        }
    }
    let n = traj.len().max(1) as f64;
    m.iter_mut().for_each(|a| *a /= n);
    m
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Largest per-component range over the window.
pub fn sup_motion(traj: &Trajectory) -> f64 {
    (0..traj.dim())
        .map(|k| {
            let (lo, hi) = traj.samples().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s[k]), hi.max(s[k])));
            hi - lo
        })
        .fold(0.0, f64::max)
}

/// Radial spread about `centre`: `(delta, delta / b)` where `delta` is the
/// gap between the largest and smallest distance from the centre.
pub fn roundness(traj: &Trajectory, centre: &[f64], b: f64) -> (f64, f64) {
    let (lo, hi) = traj.samples().fold((f64::INFINITY, 0.0f64), |(lo, hi), s| {
        let d = distance(s, centre);
        (lo.min(d), hi.max(d))
    });
    let delta = if traj.is_empty() { 0.0 } else { hi - lo };
    (delta, delta / b)
}

/// Net signed angle swept about `centre` by the first two components.
pub fn swept_angle(traj: &Trajectory, centre: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for s in traj.samples() {
        let p = (s[0] - centre[0], s[1] - centre[1]);
        if let Some(q) = prev {
            total += step_angle(q, p);
        }
        prev = Some(p);
    }
    total
}

#[inline]
pub(crate) fn step_angle(q: (f64, f64), p: (f64, f64)) -> f64 {
    let cross = q.0 * p.1 - q.1 * p.0;
    let dot = q.0 * p.0 + q.1 * p.1;
    cross.atan2(dot)
}

/// +1 counter-clockwise, -1 clockwise, 0 when less than half a turn is swept.
pub fn winding_direction(traj: &Trajectory, centre: &[f64]) -> i8 {
    let a = swept_angle(traj, centre);
    if a.abs() < std::f64::consts::PI {
        0
    } else if a > 0.0 {
        1
    } else {
        -1
    }
}

/// Symmetric Hausdorff distance between two point clouds.
pub fn hausdorff(a: &Trajectory, b: &Trajectory) -> f64 {
    fn directed(a: &Trajectory, b: &Trajectory) -> f64 {
        a.samples()
            .map(|p| b.samples().map(|q| distance(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    directed(a, b).max(directed(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taskgen::{generate_orbit, OrbitSpec};
    use proptest::prelude::*;

    fn circle(b_x: f64, b_y: f64, x_cen: f64) -> Trajectory {
        generate_orbit(&OrbitSpec { b_x, b_y, x_cen, y_cen: 0.0, tau: 0.01 }, 700).unwrap()
    }

    #[test]
    fn roundness_examples() {
        let (d, r) = roundness(&circle(5.0, 5.0, 0.0), &[0.0, 0.0], 5.0);
        assert!(d < 1e-12 && r < 1e-12);
        let (d, r) = roundness(&circle(5.0, 4.0, 0.0), &[0.0, 0.0], 5.0);
        assert!((d - 1.0).abs() < 1e-4 && (r - 0.2).abs() < 1e-4);
        let (d, r) = roundness(&circle(5.0, 5.0, 1.0), &[0.0, 0.0], 5.0);
        assert!((d - 2.0).abs() < 1e-4 && (r - 0.4).abs() < 1e-4);
    }

    #[test]
    fn winding_examples() {
        let a = circle(5.0, 5.0, 0.0);
        let b = circle(-5.0, 5.0, 0.0);
        assert_eq!(winding_direction(&a, &[0.0, 0.0]), 1);
        assert_eq!(winding_direction(&b, &[0.0, 0.0]), -1);
        assert_eq!(winding_direction(&a.reversed(), &[0.0, 0.0]), -1);
        // Seen from far away the circle sweeps no net angle.
        assert_eq!(winding_direction(&a, &[20.0, 0.0]), 0);
    }

    #[test]
    fn hausdorff_of_shifted_circles() {
        let h = hausdorff(&circle(5.0, 5.0, 0.0), &circle(5.0, 5.0, 0.5));
        assert!((h - 0.5).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn roundness_is_translation_covariant(dx in -20.0f64..20.0, dy in -20.0f64..20.0, by in 3.0f64..6.0) {
            let t = circle(5.0, by, 0.0);
            let shifted = t.map_samples(|s, o| { o[0] = s[0] + dx; o[1] = s[1] + dy; });
            let (d0, r0) = roundness(&t, &[0.0, 0.0], 5.0);
            let (d1, r1) = roundness(&shifted, &[dx, dy], 5.0);
            prop_assert!((d0 - d1).abs() < 1e-12 && (r0 - r1).abs() < 1e-12);
        }

        #[test]
        fn winding_ignores_scale(k in 0.01f64..100.0, cw in any::<bool>()) {
            let t = circle(if cw { -5.0 } else { 5.0 }, 5.0, 2.0);
            let scaled = t.map_samples(|s, o| { o[0] = 2.0 + k * (s[0] - 2.0); o[1] = k * s[1]; });
            prop_assert_eq!(winding_direction(&t, &[2.0, 0.0]), winding_direction(&scaled, &[2.0, 0.0]));
        }
    }
}
