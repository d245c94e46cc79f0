//! Circular-orbit training signals for the seeing-double task.

use crate::error::{Error, Result};

/// One circular (or, with unequal radii, elliptical) orbit
/// `u(t) = (b_x cos t + x_cen, b_y sin t + y_cen)`.
///
/// The radii are signed: `b_x = b_y > 0` rotates counter-clockwise and
/// `b_x = -b_y` clockwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitSpec {
    pub b_x: f64,
    pub b_y: f64,
    pub x_cen: f64,
    pub y_cen: f64,
    pub tau: f64,
}

/// Relative rotation of the two seeing-double orbits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RotationMode {
    Opposite,
    Same,
}

impl RotationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RotationMode::Opposite => "opposite",
            RotationMode::Same => "same",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "opposite" => Some(RotationMode::Opposite),
            "same" => Some(RotationMode::Same),
            _ => None,
        }
    }
}

impl OrbitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidSpec(format!("tau must be positive, got {}", self.tau)));
        }
        if self.b_x == 0.0 || self.b_y == 0.0 || !self.b_x.is_finite() || !self.b_y.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "radii must be finite and nonzero, got ({}, {})",
                self.b_x, self.b_y
            )));
        }
        if !self.x_cen.is_finite() || !self.y_cen.is_finite() {
            return Err(Error::InvalidSpec("centre must be finite".into()));
        }
        Ok(())
    }

    pub fn centre(&self) -> [f64; 2] {
        [self.x_cen, self.y_cen]
    }

    /// Unsigned radius; equal to `|b_x| = |b_y|` for circles.
    pub fn radius(&self) -> f64 {
        self.b_x.abs().max(self.b_y.abs())
    }

    /// +1 for counter-clockwise rotation, -1 for clockwise.
    pub fn winding(&self) -> i8 {
        if self.b_x * self.b_y > 0.0 {
            1
        } else {
            -1
        }
    }

    pub fn point_at(&self, t: f64) -> [f64; 2] {
        [self.b_x * t.cos() + self.x_cen, self.b_y * t.sin() + self.y_cen]
    }

    /// The orbit `-u(t)`: both radii and the centre change sign.
    pub fn negated(&self) -> OrbitSpec {
        OrbitSpec {
            b_x: -self.b_x,
            b_y: -self.b_y,
            x_cen: -self.x_cen,
            y_cen: -self.y_cen,
            tau: self.tau,
        }
    }

    /// Whether the point sets of two circular orbits share at least one point.
    pub fn intersects(&self, other: &OrbitSpec) -> bool {
        let d = (self.x_cen - other.x_cen).hypot(self.y_cen - other.y_cen);
        let (r1, r2) = (self.radius(), other.radius());
        d <= r1 + r2 && d >= (r1 - r2).abs()
    }
}

/// Uniformly sampled time series in `R^D`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    step: f64,
    data: Vec<f64>,
}

impl Trajectory {
    pub fn new(dim: usize, step: f64, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::Dimension(format!(
                "{} values do not form samples of dimension {dim}",
                data.len()
            )));
        }
        if !(step > 0.0) {
            return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
        }
        Ok(Self { dim, step, data })
    }

    /// Builds a trajectory from explicit sample rows.
    pub fn from_samples(step: f64, samples: &[Vec<f64>]) -> Result<Self> {
        let dim = samples.first().map(|s| s.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(dim * samples.len());
        for s in samples {
            if s.len() != dim {
                return Err(Error::Dimension("ragged samples".into()));
            }
            data.extend_from_slice(s);
        }
        Self::new(dim, step, data)
    }

    pub(crate) fn with_capacity(dim: usize, step: f64, samples: usize) -> Self {
        Self { dim, step, data: Vec::with_capacity(dim * samples) }
    }

    pub(crate) fn push(&mut self, sample: &[f64]) {
        debug_assert_eq!(sample.len(), self.dim);
        self.data.extend_from_slice(sample);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn samples(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Time span covered, `(len - 1) * step`.
    pub fn duration(&self) -> f64 {
        self.len().saturating_sub(1) as f64 * self.step
    }

    /// One component as a time series.
    pub fn component(&self, k: usize) -> Vec<f64> {
        self.samples().map(|s| s[k]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Samples `start..end` as a new trajectory.
    pub fn slice(&self, start: usize, end: usize) -> Trajectory {
        Trajectory {
            dim: self.dim,
            step: self.step,
            data: self.data[start * self.dim..end * self.dim].to_vec(),
        }
    }

    /// The closing window of the given duration (inclusive of both ends).
    pub fn tail(&self, window: f64) -> Trajectory {
        let n = ((window / self.step).round() as usize + 1).min(self.len());
        self.slice(self.len() - n, self.len())
    }

    /// The same samples in reverse order.
    pub fn reversed(&self) -> Trajectory {
        let mut data = Vec::with_capacity(self.data.len());
        for s in self.data.chunks_exact(self.dim).rev() {
            data.extend_from_slice(s);
        }
        Trajectory { dim: self.dim, step: self.step, data }
    }

    /// Maps every sample through `f` into a new trajectory.
    pub fn map_samples(&self, mut f: impl FnMut(&[f64], &mut [f64])) -> Trajectory {
        let mut data = vec![0.0; self.data.len()];
        for (src, dst) in self.data.chunks_exact(self.dim).zip(data.chunks_exact_mut(self.dim)) {
            f(src, dst);
        }
        Trajectory { dim: self.dim, step: self.step, data }
    }
}

/// Samples an orbit at `t = i * tau` for `i = 0..=n_steps`.
pub fn generate_orbit(spec: &OrbitSpec, n_steps: usize) -> Result<Trajectory> {
    spec.validate()?;
    if n_steps < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 steps, got {n_steps}")));
    }
    let mut traj = Trajectory::with_capacity(2, spec.tau, n_steps + 1);
    for i in 0..=n_steps {
        traj.push(&spec.point_at(i as f64 * spec.tau));
    }
    Ok(traj)
}

/// The two seeing-double orbits: `C_A` at `(x_cen, 0)` rotating counter-clockwise,
/// `C_B` at `(-x_cen, 0)`, clockwise for [`RotationMode::Opposite`].
pub fn seeing_double_pair(x_cen: f64, b: f64, mode: RotationMode, tau: f64) -> Result<(OrbitSpec, OrbitSpec)> {
    if !(b > 0.0) {
        return Err(Error::InvalidSpec(format!("radius must be positive, got {b}")));
    }
    let a = OrbitSpec { b_x: b, b_y: b, x_cen, y_cen: 0.0, tau };
    let b_x = match mode {
        RotationMode::Opposite => -b,
        RotationMode::Same => b,
    };
    let c = OrbitSpec { b_x, b_y: b, x_cen: -x_cen, y_cen: 0.0, tau };
    a.validate()?;
    Ok((a, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(b_x: f64, b_y: f64, x_cen: f64) -> OrbitSpec {
        OrbitSpec { b_x, b_y, x_cen, y_cen: 0.0, tau: 0.01 }
    }

    fn signed_area(t: &Trajectory) -> f64 {
        let n = t.len();
        (0..n)
            .map(|i| {
                let p = t.sample(i);
                let q = t.sample((i + 1) % n);
                p[0] * q[1] - q[0] * p[1]
            })
            .sum::<f64>()
            / 2.0
    }

    #[test]
    fn first_sample_is_shifted_radius() {
        let t = generate_orbit(&spec(5.0, 5.0, -3.0), 10).unwrap();
        assert_eq!(t.sample(0), &[2.0, 0.0]);
        assert_eq!(t.len(), 11);
    }

    #[test]
    fn clockwise_orbit_has_negative_area() {
        let n = (2.0 * std::f64::consts::PI / 0.01).ceil() as usize;
        let cw = generate_orbit(&spec(-5.0, 5.0, 0.0), n).unwrap();
        let ccw = generate_orbit(&spec(5.0, 5.0, 0.0), n).unwrap();
        assert!(signed_area(&cw) < 0.0);
        assert!(signed_area(&ccw) > 0.0);
    }

    #[test]
    fn full_period_closes() {
        let n = (2.0 * std::f64::consts::PI / 0.01).ceil() as usize;
        let t = generate_orbit(&spec(5.0, 5.0, 0.0), n).unwrap();
        let (a, b) = (t.sample(0), t.sample(n));
        let d = (a[0] - b[0]).hypot(a[1] - b[1]);
        assert!(d < 2.0 * 5.0 * 0.01);
    }

    #[test]
    fn rejects_bad_tau_and_short_runs() {
        let mut s = spec(5.0, 5.0, 0.0);
        s.tau = 0.0;
        assert!(matches!(generate_orbit(&s, 10), Err(Error::InvalidSpec(_))));
        s.tau = -0.1;
        assert!(generate_orbit(&s, 10).is_err());
        assert!(generate_orbit(&spec(5.0, 5.0, 0.0), 1).is_err());
    }

    #[test]
    fn pair_overlap_cases() {
        let (a, b) = seeing_double_pair(-5.5, 5.0, RotationMode::Opposite, 0.01).unwrap();
        assert!(!a.intersects(&b));
        let (a, b) = seeing_double_pair(-3.0, 5.0, RotationMode::Opposite, 0.01).unwrap();
        assert!(a.intersects(&b));
        let (a, b) = seeing_double_pair(0.0, 5.0, RotationMode::Opposite, 0.01).unwrap();
        assert!(a.intersects(&b));
        assert_eq!(a.centre(), b.centre());
        assert_eq!(a.winding(), -b.winding());
        let (a, b) = seeing_double_pair(2.0, 5.0, RotationMode::Same, 0.01).unwrap();
        assert_eq!(a.winding(), b.winding());
        assert!(seeing_double_pair(0.0, 0.0, RotationMode::Same, 0.01).is_err());
    }

    #[test]
    fn overlap_threshold_is_radius() {
        for &x in &[0.0, 2.5, 4.999, 5.0, -5.0] {
            let (a, b) = seeing_double_pair(x, 5.0, RotationMode::Opposite, 0.01).unwrap();
            assert!(a.intersects(&b), "x_cen = {x}");
        }
        for &x in &[5.001, -5.5, 8.0] {
            let (a, b) = seeing_double_pair(x, 5.0, RotationMode::Opposite, 0.01).unwrap();
            assert!(!a.intersects(&b), "x_cen = {x}");
        }
    }

    #[test]
    fn centred_orbit_is_half_period_antisymmetric() {
        let s = spec(5.0, -5.0, 0.0);
        for i in 0..50 {
            let t = i as f64 * 0.37;
            let p = s.point_at(t);
            let q = s.point_at(t + std::f64::consts::PI);
            assert!((p[0] + q[0]).abs() < 1e-13 && (p[1] + q[1]).abs() < 1e-13);
        }
    }

    proptest! {
        #[test]
        fn samples_lie_on_the_circle(b in 0.5f64..10.0, sx in prop::bool::ANY, x_cen in -10.0f64..10.0, y_cen in -3.0f64..3.0) {
            let b_x = if sx { b } else { -b };
            let s = OrbitSpec { b_x, b_y: b, x_cen, y_cen, tau: 0.01 };
            let t = generate_orbit(&s, 500).unwrap();
            for p in t.samples() {
                let e = ((p[0] - x_cen) / b_x).powi(2) + ((p[1] - y_cen) / b).powi(2) - 1.0;
                prop_assert!(e.abs() < 1e-12);
            }
        }
    }
}
