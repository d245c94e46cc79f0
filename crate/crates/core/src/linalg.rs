//! Matrix storage for the adjacency matrix and dense eigenvalue helpers.

use nalgebra::{Complex, DMatrix, Schur};

use crate::error::{Error, Result};

/// Below this size the adjacency is kept dense.
pub const DENSE_BELOW: usize = 64;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets sorted by row then column.
    pub fn from_sorted_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in triplets {
            if i >= n_rows || j >= n_cols {
                return Err(Error::Dimension(format!("entry ({i}, {j}) outside {n_rows}x{n_cols}")));
            }
            if let Some(prev) = last {
                if (i, j) <= prev {
                    return Err(Error::Dimension("triplets not sorted or duplicated".into()));
                }
            }
            last = Some((i, j));
            row_ptr[i + 1] += 1;
            col_idx.push(j as u32);
            values.push(v);
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self { n_rows, n_cols, row_ptr, col_idx, values })
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n_rows) {
            let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let cols = &self.col_idx[lo..hi];
            let vals = &self.values[lo..hi];
            // Four independent sums hide the floating-point add latency.
            let mut acc = [0.0f64; 4];
            let mut c4 = cols.chunks_exact(4);
            let mut v4 = vals.chunks_exact(4);
            for (c, v) in (&mut c4).zip(&mut v4) {
                acc[0] += v[0] * x[c[0] as usize];
                acc[1] += v[1] * x[c[1] as usize];
                acc[2] += v[2] * x[c[2] as usize];
                acc[3] += v[3] * x[c[3] as usize];
            }
            for (c, v) in c4.remainder().iter().zip(v4.remainder()) {
                acc[0] += v * x[*c as usize];
            }
            *o = (acc[0] + acc[1]) + (acc[2] + acc[3]);
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.col_idx[k] as usize, self.values[k]))
        })
    }
}

/// Square adjacency matrix, sparse for realistic sizes and dense for tiny ones.
#[derive(Debug, Clone, PartialEq)]
pub enum Adjacency {
    Sparse(CsrMatrix),
    Dense(DMatrix<f64>),
}

impl Adjacency {
    /// Chooses the storage from the size: dense below [`DENSE_BELOW`].
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let csr = CsrMatrix::from_sorted_triplets(n, n, triplets)?;
        Ok(if n < DENSE_BELOW { Adjacency::Dense(csr.to_dense()) } else { Adjacency::Sparse(csr) })
    }

    pub fn from_dense(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension("adjacency must be square".into()));
        }
        Ok(Adjacency::Dense(m))
    }

    pub fn n(&self) -> usize {
        match self {
            Adjacency::Sparse(m) => m.n_rows,
            Adjacency::Dense(m) => m.nrows(),
        }
    }

    pub fn nnz(&self) -> usize {
        match self {
            Adjacency::Sparse(m) => m.nnz(),
            Adjacency::Dense(m) => m.iter().filter(|v| **v != 0.0).count(),
        }
    }

    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Adjacency::Sparse(m) => m.mul_vec(x, out),
            Adjacency::Dense(m) => {
                let n = m.nrows();
                out[..n].fill(0.0);
                for j in 0..m.ncols() {
                    let xj = x[j];
                    if xj == 0.0 {
                        continue;
                    }
                    for (o, a) in out.iter_mut().zip(m.column(j).iter()) {
                        *o += a * xj;
                    }
                }
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        match self {
            Adjacency::Sparse(m) => Adjacency::Sparse(m.scaled(s)),
            Adjacency::Dense(m) => Adjacency::Dense(m * s),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Adjacency::Sparse(m) => m.to_dense(),
            Adjacency::Dense(m) => m.clone(),
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n()];
        match self {
            Adjacency::Sparse(m) => {
                for (i, j, v) in m.triplets() {
                    if i == j {
                        d[i] = v;
                    }
                }
            }
            Adjacency::Dense(m) => d.iter_mut().enumerate().for_each(|(i, x)| *x = m[(i, i)]),
        }
        d
    }

    /// Nonzero entries in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        match self {
            Adjacency::Sparse(m) => m.triplets().collect(),
            Adjacency::Dense(m) => {
                let mut t = Vec::new();
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        if m[(i, j)] != 0.0 {
                            t.push((i, j, m[(i, j)]));
                        }
                    }
                }
                t
            }
        }
    }
}

/// All eigenvalues of a general real square matrix.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if !m.is_square() {
        return Err(Error::Dimension("eigenvalues of a non-square matrix".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    let n = m.nrows();
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 1000 * n.max(10))
        .ok_or_else(|| Error::Numeric(format!("Schur decomposition did not converge ({n}x{n})")))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Sorts by descending magnitude, ties broken by descending real then imaginary part.
pub fn sort_canonical(values: &mut [Complex<f64>]) {
    values.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    });
}

pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

pub fn frobenius<'a>(values: impl IntoIterator<Item = &'a f64>) -> f64 {
    values.into_iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_and_dense_products_agree() {
        let t = vec![(0, 1, 2.0), (0, 3, -1.0), (2, 0, 0.5), (3, 3, 4.0)];
        let csr = CsrMatrix::from_sorted_triplets(4, 4, &t).unwrap();
        let dense = csr.to_dense();
        let x = [1.0, -2.0, 3.0, 0.25];
        let mut a = [0.0; 4];
        csr.mul_vec(&x, &mut a);
        let mut b = [0.0; 4];
        Adjacency::Dense(dense.clone()).mul_vec(&x, &mut b);
        let c = &dense * nalgebra::DVector::from_row_slice(&x);
        for i in 0..4 {
            assert!((a[i] - c[i]).abs() < 1e-15);
            assert!((b[i] - c[i]).abs() < 1e-15);
        }
        assert_eq!(csr.triplets().collect::<Vec<_>>(), t);
    }

    #[test]
    fn unsorted_triplets_are_rejected() {
        assert!(CsrMatrix::from_sorted_triplets(2, 2, &[(1, 0, 1.0), (0, 0, 1.0)]).is_err());
        assert!(CsrMatrix::from_sorted_triplets(2, 2, &[(0, 2, 1.0)]).is_err());
    }

    #[test]
    fn rotation_spectrum_is_a_conjugate_pair() {
        let th: f64 = 0.7;
        let m = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        let ev = eigenvalues(&m).unwrap();
        assert!((ev[0].norm() - 1.0).abs() < 1e-14);
        assert!((ev[0].im + ev[1].im).abs() < 1e-14);
        assert!((spectral_radius(&m).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn canonical_sort_breaks_ties() {
        let mut v = vec![Complex::new(0.5, 0.0), Complex::new(0.0, -1.0), Complex::new(-1.0, 0.0), Complex::new(0.0, 1.0), Complex::new(1.0, 0.0)];
        sort_canonical(&mut v);
        assert_eq!(
            v,
            vec![Complex::new(1.0, 0.0), Complex::new(0.0, 1.0), Complex::new(0.0, -1.0), Complex::new(-1.0, 0.0), Complex::new(0.5, 0.0)]
        );
    }
}
