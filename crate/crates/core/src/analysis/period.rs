//! Period detection from the pattern of local maxima of the x-component.

use crate::taskgen::Trajectory;

/// A repeating pattern of maxima.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodEstimate {
    pub period: f64,
    /// Mean value of each maximum in one repetition of the pattern, in time order.
    pub extrema: Vec<f64>,
    /// Distinct maxima clusters in the pattern.
    pub clusters: usize,
}

/// Local maxima of `x` as `(time, value)`, refined by parabolic interpolation.
/// Plateaus count once, at their left edge.
pub fn local_maxima(x: &[f64], tau: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for i in 1..x.len().saturating_sub(1) {
        let (a, b, c) = (x[i - 1], x[i], x[i + 1]);
        if b > a && b >= c {
            let curv = a - 2.0 * b + c;
            let off = if curv < 0.0 { (0.5 * (a - c) / curv).clamp(-0.5, 0.5) } else { 0.0 };
            out.push(((i as f64 + off) * tau, b - 0.25 * (a - c) * off));
        }
    }
    out
}

/// Smallest number of maxima after which the cluster labels repeat, with at
/// least three repetitions and consistent recurrence spacing.
pub fn estimate_period(traj: &Trajectory, eps_amp: f64) -> Option<PeriodEstimate> {
    if traj.len() < 4 {
        return None;
    }
    let x = traj.component(0);
    let maxima = local_maxima(&x, traj.step());
    if maxima.len() < 3 {
        return None;
    }
    // Greedy clustering against the first member of each cluster.
    let mut heads: Vec<f64> = Vec::new();
    let labels: Vec<usize> = maxima
        .iter()
        .map(|&(_, v)| match heads.iter().position(|h| (h - v).abs() < eps_amp) {
            Some(k) => k,
            None => {
                heads.push(v);
                heads.len() - 1
            }
        })
        .collect();
    let m = labels.len();
    (1..=m / 3).find_map(|p| {
        if !(0..m - p).all(|k| labels[k] == labels[k + p]) {
            return None;
        }
        let gaps: Vec<f64> = (0..m - p).map(|k| maxima[k + p].0 - maxima[k].0).collect();
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let slack = 1e-2 * mean + 2.0 * traj.step();
        if gaps.iter().any(|g| (g - mean).abs() > slack) {
            return None;
        }
        let extrema = (0..p)
            .map(|j| {
                let vals: Vec<f64> = (j..m).step_by(p).map(|k| maxima[k].1).collect();
                vals.iter().sum::<f64>() / vals.len() as f64
            })
            .collect();
        let mut seen: Vec<usize> = labels[..p].to_vec();
        seen.sort_unstable();
        seen.dedup();
        Some(PeriodEstimate { period: mean, extrema, clusters: seen.len() })
    })
}
