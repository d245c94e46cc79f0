//! Reservoir construction: Erdős–Rényi adjacency at unit spectral radius and a
//! one-entry-per-row input matrix, both drawn from seeded ChaCha20 streams.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{spectral_radius, Adjacency};
use crate::rng::{self, Stream};

/// Spectral radius below which a draw is considered degenerate.
const MIN_RADIUS: f64 = 1e-12;
const MAX_ATTEMPTS: u32 = 10;

/// Design parameters of the reservoir; defaults reproduce the reference setup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetParams {
    pub n: usize,
    pub d: usize,
    pub p: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub tau: f64,
    pub seed: u64,
}

impl Default for NetParams {
    fn default() -> Self {
        Self { n: 1000, d: 2, p: 0.04, sigma: 0.2, gamma: 5.0, tau: 0.01, seed: 2 }
    }
}

impl NetParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if self.d < 1 {
            return bad("d must be at least 1".into());
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return bad(format!("p must lie in (0, 1], got {}", self.p));
        }
        if !(self.gamma > 0.0) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.sigma >= 0.0) {
            return bad(format!("sigma must be non-negative, got {}", self.sigma));
        }
        if !(self.tau > 0.0) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        Ok(())
    }
}

/// `N x D` input matrix with exactly one nonzero per row.
#[derive(Debug, Clone, PartialEq)]
pub struct InputMatrix {
    d: usize,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl InputMatrix {
    pub fn from_entries(d: usize, cols: Vec<usize>, vals: Vec<f64>) -> Result<Self> {
        if cols.len() != vals.len() || cols.iter().any(|&c| c >= d) {
            return Err(Error::Dimension("input matrix entries inconsistent with d".into()));
        }
        Ok(Self { d, cols, vals })
    }

    pub fn rows(&self) -> usize {
        self.cols.len()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Column and value of the single nonzero in row `i`.
    #[inline]
    pub fn entry(&self, i: usize) -> (usize, f64) {
        (self.cols[i], self.vals[i])
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows(), self.d);
        for i in 0..self.rows() {
            m[(i, self.cols[i])] = self.vals[i];
        }
        m
    }

    /// `out = scale * W_in u`.
    #[inline]
    pub fn apply(&self, u: &[f64], scale: f64, out: &mut [f64]) {
        for ((o, &c), &v) in out.iter_mut().zip(&self.cols).zip(&self.vals) {
            *o = scale * v * u[c];
        }
    }
}

/// Draws an `n x n` Erdős–Rényi matrix (independent entries, nonzero with
/// probability `p`, uniform on (-1, 1)) and rescales it to unit spectral radius.
/// Diagonal entries are drawn like any other entry.
pub fn build_adjacency(n: usize, p: f64, seed: u64) -> Result<Adjacency> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n must be at least 2, got {n}")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParameter(format!("p must lie in (0, 1], got {p}")));
    }
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = rng::stream(seed, Stream::Adjacency { attempt });
        let mut triplets = Vec::with_capacity((n as f64 * n as f64 * p * 1.1) as usize + 8);
        for i in 0..n {
            for j in 0..n {
                if rng.random::<f64>() < p {
                    triplets.push((i, j, rng::open_unit(&mut rng)));
                }
            }
        }
        let raw = Adjacency::from_triplets(n, &triplets)?;
        let radius = spectral_radius(&raw.to_dense())?;
        if radius >= MIN_RADIUS {
            log::debug!("adjacency n={n} p={p} attempt={attempt}: raw spectral radius {radius}");
            return Ok(raw.scaled(1.0 / radius));
        }
    }
    Err(Error::DegenerateAdjacency { attempts: MAX_ATTEMPTS as usize })
}

/// `rho * m_unit`.
pub fn rescale_to_rho(m_unit: &Adjacency, rho: f64) -> Result<Adjacency> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!("spectral radius must be non-negative, got {rho}")));
    }
    Ok(m_unit.scaled(rho))
}

pub fn build_input_matrix(n: usize, d: usize, seed: u64) -> Result<InputMatrix> {
    if n < 1 || d < 1 {
        return Err(Error::InvalidParameter(format!("input matrix needs n, d >= 1, got {n}x{d}")));
    }
    let mut rng = rng::stream(seed, Stream::InputMatrix);
    let mut cols = Vec::with_capacity(n);
    let mut vals = Vec::with_capacity(n);
    for _ in 0..n {
        cols.push(rng.random_range(0..d));
        vals.push(rng::open_unit(&mut rng));
    }
    InputMatrix::from_entries(d, cols, vals)
}

/// Immutable reservoir: adjacency stored at unit spectral radius plus the
/// input matrix and scalar parameters of the open-loop flow.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirNet {
    pub params: NetParams,
    m_unit: Adjacency,
    w_in: InputMatrix,
}

impl ReservoirNet {
    pub fn build(params: NetParams) -> Result<Self> {
        params.validate()?;
        let m_unit = build_adjacency(params.n, params.p, params.seed)?;
        let w_in = build_input_matrix(params.n, params.d, params.seed)?;
        Ok(Self { params, m_unit, w_in })
    }

    /// Assembles a net from explicit parts; `m_unit` is taken as given.
    pub fn from_parts(params: NetParams, m_unit: Adjacency, w_in: InputMatrix) -> Result<Self> {
        params.validate()?;
        if m_unit.n() != params.n || w_in.rows() != params.n || w_in.dim() != params.d {
            return Err(Error::Dimension("net parts do not match (n, d)".into()));
        }
        Ok(Self { params, m_unit, w_in })
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn d(&self) -> usize {
        self.params.d
    }

    pub fn m_unit(&self) -> &Adjacency {
        &self.m_unit
    }

    pub fn w_in(&self) -> &InputMatrix {
        &self.w_in
    }

    /// The net with its adjacency scaled to spectral radius `rho`.
    pub fn at_rho(&self, rho: f64) -> Result<Reservoir<'_>> {
        Ok(Reservoir { net: self, rho, m: rescale_to_rho(&self.m_unit, rho)? })
    }

    /// Writes the text archive format (see the crate README).
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        let p = &self.params;
        writeln!(w, "# multirc reservoir v1")?;
        writeln!(w, "n {}", p.n)?;
        writeln!(w, "d {}", p.d)?;
        writeln!(w, "p {}", p.p)?;
        writeln!(w, "sigma {}", p.sigma)?;
        writeln!(w, "gamma {}", p.gamma)?;
        writeln!(w, "tau {}", p.tau)?;
        writeln!(w, "seed {}", p.seed)?;
        let t = self.m_unit.triplets();
        writeln!(w, "adjacency {}", t.len())?;
        for (i, j, v) in t {
            writeln!(w, "{i} {j} {v:e}")?;
        }
        writeln!(w, "input {}", self.w_in.rows())?;
        for i in 0..self.w_in.rows() {
            let (c, v) = self.w_in.entry(i);
            writeln!(w, "{i} {c} {v:e}")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate().filter_map(|(k, l)| match l {
            Ok(s) if s.trim_start().starts_with('#') || s.trim().is_empty() => None,
            other => Some((k + 1, other)),
        });
        let mut next = || -> Result<(usize, String)> {
            match lines.next() {
                Some((k, Ok(s))) => Ok((k, s)),
                Some((_, Err(e))) => Err(e.into()),
                None => Err(Error::Parse { line: 0, msg: "unexpected end of file".into() }),
            }
        };
        fn field<T: std::str::FromStr>(line: usize, s: &str, key: &str) -> Result<T> {
            let mut it = s.split_whitespace();
            match (it.next(), it.next(), it.next()) {
                (Some(k), Some(v), None) if k == key => v
                    .parse()
                    .map_err(|_| Error::Parse { line, msg: format!("bad value for `{key}`: {v}") }),
                _ => Err(Error::Parse { line, msg: format!("expected `{key} <value>`, got `{s}`") }),
            }
        }
        fn entry(line: usize, s: &str) -> Result<(usize, usize, f64)> {
            let parts: Vec<&str> = s.split_whitespace().collect();
            let bad = || Error::Parse { line, msg: format!("expected `i j value`, got `{s}`") };
            if parts.len() != 3 {
                return Err(bad());
            }
            Ok((
                parts[0].parse().map_err(|_| bad())?,
                parts[1].parse().map_err(|_| bad())?,
                parts[2].parse().map_err(|_| bad())?,
            ))
        }
        let (l, s) = next()?;
        let n: usize = field(l, &s, "n")?;
        let (l, s) = next()?;
        let d: usize = field(l, &s, "d")?;
        let (l, s) = next()?;
        let p: f64 = field(l, &s, "p")?;
        let (l, s) = next()?;
        let sigma: f64 = field(l, &s, "sigma")?;
        let (l, s) = next()?;
        let gamma: f64 = field(l, &s, "gamma")?;
        let (l, s) = next()?;
        let tau: f64 = field(l, &s, "tau")?;
        let (l, s) = next()?;
        let seed: u64 = field(l, &s, "seed")?;
        let (l, s) = next()?;
        let nnz: usize = field(l, &s, "adjacency")?;
        let mut triplets = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            let (l, s) = next()?;
            triplets.push(entry(l, &s)?);
        }
        let (l, s) = next()?;
        let rows: usize = field(l, &s, "input")?;
        let mut cols = vec![0; rows];
        let mut vals = vec![0.0; rows];
        for _ in 0..rows {
            let (l, s) = next()?;
            let (i, c, v) = entry(l, &s)?;
            if i >= rows {
                return Err(Error::Parse { line: l, msg: format!("input row {i} out of range") });
            }
            cols[i] = c;
            vals[i] = v;
        }
        let params = NetParams { n, d, p, sigma, gamma, tau, seed };
        let m_unit = Adjacency::from_triplets(n, &triplets)?;
        let w_in = InputMatrix::from_entries(d, cols, vals)?;
        Self::from_parts(params, m_unit, w_in)
    }
}

/// A [`ReservoirNet`] with its adjacency scaled to a particular spectral radius.
#[derive(Debug, Clone)]
pub struct Reservoir<'a> {
    pub net: &'a ReservoirNet,
    pub rho: f64,
    m: Adjacency,
}

impl<'a> Reservoir<'a> {
    /// Uses an explicit matrix in place of `rho * m_unit`; for synthetic test systems.
    pub fn with_matrix(net: &'a ReservoirNet, rho: f64, m: Adjacency) -> Result<Self> {
        if m.n() != net.n() {
            return Err(Error::Dimension("adjacency size differs from net".into()));
        }
        Ok(Self { net, rho, m })
    }

    pub fn n(&self) -> usize {
        self.net.n()
    }

    pub fn d(&self) -> usize {
        self.net.d()
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.m
    }

    pub fn gamma(&self) -> f64 {
        self.net.params.gamma
    }

    pub fn sigma(&self) -> f64 {
        self.net.params.sigma
    }

    pub fn tau(&self) -> f64 {
        self.net.params.tau
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjacency_is_unit_radius_and_repeatable() {
        let a = build_adjacency(80, 0.1, 5).unwrap();
        let b = build_adjacency(80, 0.1, 5).unwrap();
        assert_eq!(a, b);
        let r = spectral_radius(&a.to_dense()).unwrap();
        assert!((r - 1.0).abs() < 1e-10, "radius {r}");
        assert_ne!(a, build_adjacency(80, 0.1, 6).unwrap());
    }

    #[test]
    fn small_nets_are_dense() {
        assert!(matches!(build_adjacency(10, 0.5, 1).unwrap(), Adjacency::Dense(_)));
        assert!(matches!(build_adjacency(64, 0.1, 1).unwrap(), Adjacency::Sparse(_)));
    }

    #[test]
    fn rescale_examples() {
        let m = Adjacency::from_dense(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        let half = rescale_to_rho(&m, 0.5).unwrap().to_dense();
        assert_eq!(half, DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]));
        assert_eq!(rescale_to_rho(&m, 0.0).unwrap().to_dense(), DMatrix::zeros(2, 2));
        assert_eq!(rescale_to_rho(&m, 1.0).unwrap(), m);
        assert!(matches!(rescale_to_rho(&m, -0.1), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn input_matrix_has_one_entry_per_row() {
        let w = build_input_matrix(500, 3, 9).unwrap();
        let dense = w.to_dense();
        for i in 0..500 {
            let nz: Vec<f64> = dense.row(i).iter().copied().filter(|v| *v != 0.0).collect();
            assert_eq!(nz.len(), 1);
            assert!(nz[0] > -1.0 && nz[0] < 1.0);
        }
        assert_eq!(w, build_input_matrix(500, 3, 9).unwrap());
    }

    #[test]
    fn degenerate_parameters_are_rejected() {
        assert!(build_adjacency(1, 0.5, 1).is_err());
        assert!(build_adjacency(10, 0.0, 1).is_err());
        assert!(build_adjacency(10, 1.5, 1).is_err());
        let mut p = NetParams { n: 10, ..Default::default() };
        p.gamma = -1.0;
        assert!(ReservoirNet::build(p).is_err());
    }

    #[test]
    fn text_archive_round_trips() {
        let net = ReservoirNet::build(NetParams { n: 70, p: 0.1, seed: 3, ..Default::default() }).unwrap();
        let mut buf = Vec::new();
        net.write_text(&mut buf).unwrap();
        let back = ReservoirNet::read_text(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn truncated_archive_reports_a_parse_error() {
        let text = "n 10\nd 2\np 0.5\nsigma 0.2\ngamma five\n";
        match ReservoirNet::read_text(std::io::Cursor::new(text)) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
    }
}
