//! Internal-state views: per-neuron traces and the histogram of component
//! differences between two closed-loop runs.

use std::io::Write;

use crate::dynamics::{visit_closed_loop, ClosedLoop, StateTrajectory, TrainedReadout};
use crate::error::{Error, Result};
use crate::netgen::Reservoir;

pub const BIN_COUNT: usize = 200;
pub const BIN_LO: f64 = -2.0;
pub const BIN_HI: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceStream {
    pub times: Vec<f64>,
    /// `BIN_COUNT` counts per time over `[BIN_LO, BIN_HI]`.
    pub histograms: Vec<Vec<u32>>,
    pub x_gap: Vec<f64>,
    /// Standard deviation of the component differences per time.
    pub spread: Vec<f64>,
}

/// Index of the bin holding `v`; the top edge belongs to the last bin.
pub fn bin_index(v: f64) -> usize {
    let w = (BIN_HI - BIN_LO) / BIN_COUNT as f64;
    (((v - BIN_LO) / w).floor().max(0.0) as usize).min(BIN_COUNT - 1)
}

/// Runs the closed loop from `r0_a` and `r0_b` over `span` and bins
/// `r_a(t) - r_b(t)` every `stride` steps.
pub fn paired_run_difference(
    res: &Reservoir<'_>,
    readout: &TrainedReadout,
    r0_a: &[f64],
    r0_b: &[f64],
    span: f64,
    stride: usize,
) -> Result<DifferenceStream> {
    let cl = ClosedLoop::new(res, readout)?;
    let steps = (span / res.tau()).round() as usize;
    let stride = stride.max(1);
    let record = |r0: &[f64]| -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let (mut states, mut xs) = (Vec::new(), Vec::new());
        visit_closed_loop(&cl, readout, r0, steps, res.tau(), None, |i, r, u| {
            if i % stride == 0 {
                states.push(r.to_vec());
                xs.push(u[0]);
            }
        })?;
        Ok((states, xs))
    };
    let (a, b) = rayon::join(|| record(r0_a), || record(r0_b));
    let ((sa, xa), (sb, xb)) = (a?, b?);
    let mut out = DifferenceStream { times: vec![], histograms: vec![], x_gap: vec![], spread: vec![] };
    for k in 0..sa.len() {
        let mut counts = vec![0u32; BIN_COUNT];
        let (mut s1, mut s2) = (0.0, 0.0);
        for (p, q) in sa[k].iter().zip(&sb[k]) {
            let d = p - q;
            counts[bin_index(d)] += 1;
            s1 += d;
            s2 += d * d;
        }
        let n = sa[k].len() as f64;
        let mean = s1 / n;
        out.times.push((k * stride) as f64 * res.tau());
        out.histograms.push(counts);
        out.x_gap.push(xa[k] - xb[k]);
        out.spread.push((s2 / n - mean * mean).max(0.0).sqrt());
    }
    Ok(out)
}

/// Component traces for the requested neurons.
pub fn neuron_traces(states: &StateTrajectory, indices: &[usize]) -> Result<Vec<Vec<f64>>> {
    if let Some(&bad) = indices.iter().find(|&&i| i >= states.dim()) {
        return Err(Error::InvalidParameter(format!("neuron index {bad} out of range for {} neurons", states.dim())));
    }
    Ok(indices.iter().map(|&i| states.component(i)).collect())
}

/// Fractional ranks, ties sharing their mean rank.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let mean = 0.5 * (i + j) as f64 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = mean;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation; `None` when either input is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let m = (a.len() as f64 + 1.0) / 2.0;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - m) * (y - m);
        saa += (x - m).powi(2);
        sbb += (y - m).powi(2);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

/// CSV `t,x_gap,bin_0..bin_199`.
pub fn write_difference_csv<W: Write>(stream: &DifferenceStream, mut w: W) -> Result<()> {
    let bins: Vec<String> = (0..BIN_COUNT).map(|k| format!("bin_{k}")).collect();
    writeln!(w, "t,x_gap,{}", bins.join(","))?;
    for ((t, g), h) in stream.times.iter().zip(&stream.x_gap).zip(&stream.histograms) {
        let counts: Vec<String> = h.iter().map(|c| c.to_string()).collect();
        writeln!(w, "{t},{g},{}", counts.join(","))?;
    }
    Ok(())
}

/// CSV `t,r_<i>...` for the selected neurons.
pub fn write_traces_csv<W: Write>(step: f64, indices: &[usize], traces: &[Vec<f64>], mut w: W) -> Result<()> {
    let names: Vec<String> = indices.iter().map(|i| format!("r_{}", i + 1)).collect();
    writeln!(w, "t,{}", names.join(","))?;
    let len = traces.first().map_or(0, Vec::len);
    for k in 0..len {
        let row: Vec<String> = traces.iter().map(|t| t[k].to_string()).collect();
        writeln!(w, "{},{}", k as f64 * step, row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgen::{NetParams, ReservoirNet};
    use crate::taskgen::Trajectory;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    #[test]
    fn bin_edges() {
        assert_eq!(bin_index(-2.0), 0);
        assert_eq!(bin_index(2.0), BIN_COUNT - 1);
        assert_eq!(bin_index(0.0), 100);
        assert_eq!(bin_index(-0.01), 99);
        assert_eq!(bin_index(0.019), 100);
    }

    #[test]
    fn identical_starts_fill_the_zero_bin() {
        let net = ReservoirNet::build(NetParams { n: 30, p: 0.2, ..Default::default() }).unwrap();
        let res = net.at_rho(1.0).unwrap();
        let ro = TrainedReadout::from_matrix(DMatrix::from_fn(2, 60, |i, j| 0.1 * ((i + 2 * j) as f64).sin())).unwrap();
        let r0 = vec![0.2; 30];
        let s = paired_run_difference(&res, &ro, &r0, &r0, 5.0, 10).unwrap();
        assert_eq!(s.times.len(), 51);
        for h in &s.histograms {
            assert_eq!(h[bin_index(0.0)], 30);
            assert_eq!(h.iter().sum::<u32>(), 30);
        }
        let r1: Vec<f64> = (0..30).map(|k| 0.3 * (k as f64).sin()).collect();
        let s = paired_run_difference(&res, &ro, &r0, &r1, 5.0, 10).unwrap();
        assert!(s.histograms.iter().all(|h| h.iter().sum::<u32>() == 30));
        let mut buf = Vec::new();
        write_difference_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap().split(',').count(), 202);
    }

    #[test]
    fn traces_restack_to_the_trajectory() {
        let data: Vec<f64> = (0..12).map(|k| k as f64).collect();
        let st = StateTrajectory::new(Trajectory::new(3, 0.1, data.clone()).unwrap());
        let tr = neuron_traces(&st, &[0, 1, 2]).unwrap();
        let restacked: Vec<f64> = (0..4).flat_map(|t| tr.iter().map(move |c| c[t])).collect();
        assert_eq!(restacked, data);
        assert!(neuron_traces(&st, &[3]).is_err());
        let constant = StateTrajectory::new(Trajectory::new(2, 0.1, vec![0.5; 8]).unwrap());
        assert!(neuron_traces(&constant, &[1]).unwrap()[0].iter().all(|v| *v == 0.5));
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), None);
        // Monotone transforms keep ranks.
        let r = spearman(&[1.0, 2.0, 2.0, 5.0], &[0.1, 0.4, 0.4, 9.0]).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn spearman_is_bounded(v in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..40)) {
            let (a, b): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            if let Some(r) = spearman(&a, &b) {
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
            }
        }
    }
}
