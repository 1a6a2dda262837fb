//! Small linear-algebra layer: a dense/sparse matrix type and vector helpers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, CoexError, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Fold from +0 so that empty vectors give 0 rather than -0.
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// `y += s * x`
pub fn axpy(s: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

pub fn positive_part_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |acc, v| acc + v.max(0.0).powi(2)).sqrt()
}

/// A real matrix stored either densely (column-major) or in CSR form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    storage: Storage,
}

#[derive(Clone, Debug, PartialEq)]
enum Storage {
    Dense(Vec<f64>),
    Csr {
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    },
}

/// On-disk form: column-major dense data or COO triplets.
#[derive(Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "lowercase")]
enum MatrixRepr {
    Dense {
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    },
    Coo {
        rows: usize,
        cols: usize,
        entries: Vec<(usize, usize, f64)>,
    },
}

impl TryFrom<MatrixRepr> for Matrix {
    type Error = CoexError;

    fn try_from(r: MatrixRepr) -> Result<Self> {
        match r {
            MatrixRepr::Dense { rows, cols, data } => Matrix::dense(rows, cols, data),
            MatrixRepr::Coo {
                rows,
                cols,
                entries,
            } => Matrix::from_triplets(rows, cols, &entries),
        }
    }
}

impl From<Matrix> for MatrixRepr {
    fn from(m: Matrix) -> Self {
        match m.storage {
            Storage::Dense(data) => MatrixRepr::Dense {
                rows: m.rows,
                cols: m.cols,
                data,
            },
            Storage::Csr { .. } => MatrixRepr::Coo {
                rows: m.rows,
                cols: m.cols,
                entries: m.triplets(),
            },
        }
    }
}

impl Matrix {
    /// Dense matrix from column-major data.
    pub fn dense(rows: usize, cols: usize, col_major: Vec<f64>) -> Result<Self> {
        check_dim("dense matrix data", rows * cols, col_major.len())?;
        Ok(Self {
            rows,
            cols,
            storage: Storage::Dense(col_major),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = vec![0.0; r * c];
        for (i, row) in rows.iter().enumerate() {
            check_dim("matrix row", c, row.len())?;
            for (j, v) in row.iter().enumerate() {
                data[i + j * r] = *v;
            }
        }
        Self::dense(r, c, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            storage: Storage::Csr {
                indptr: vec![0; rows + 1],
                indices: Vec::new(),
                values: Vec::new(),
            },
        }
    }

    pub fn identity(n: usize) -> Self {
        let entries: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &entries).expect("identity is well formed")
    }

    /// Sparse matrix from COO triplets; duplicates are summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        entries: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut sorted = entries.to_vec();
        for &(i, j, v) in &sorted {
            if i >= rows || j >= cols {
                return invalid(format!("triplet ({i}, {j}) outside {rows}x{cols}"));
            }
            if !v.is_finite() {
                return invalid("non-finite matrix entry");
            }
        }
        sorted.sort_by_key(|a| (a.0, a.1));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        Ok(Self {
            rows,
            cols,
            storage: Storage::Csr {
                indptr,
                indices,
                values,
            },
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Dense(d) => d.iter().filter(|v| **v != 0.0).count(),
            Storage::Csr { values, .. } => values.len(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Dense(d) => d[i + j * self.rows],
            Storage::Csr {
                indptr,
                indices,
                values,
            } => (indptr[i]..indptr[i + 1])
                .find(|&p| indices[p] == j)
                .map_or(0.0, |p| values[p]),
        }
    }

    /// Nonzero entries in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        match &self.storage {
            Storage::Dense(d) => {
                for i in 0..self.rows {
                    for j in 0..self.cols {
                        let v = d[i + j * self.rows];
                        if v != 0.0 {
                            out.push((i, j, v));
                        }
                    }
                }
            }
            Storage::Csr {
                indptr,
                indices,
                values,
            } => {
                for i in 0..self.rows {
                    for p in indptr[i]..indptr[i + 1] {
                        out.push((i, indices[p], values[p]));
                    }
                }
            }
        }
        out
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        match &self.storage {
            Storage::Dense(d) => {
                for (j, xj) in x.iter().enumerate() {
                    if *xj != 0.0 {
                        axpy(*xj, &d[j * self.rows..(j + 1) * self.rows], &mut out);
                    }
                }
            }
            Storage::Csr {
                indptr,
                indices,
                values,
            } => {
                for (i, o) in out.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for p in indptr[i]..indptr[i + 1] {
                        s += values[p] * x[indices[p]];
                    }
                    *o = s;
                }
            }
        }
        out
    }

    /// `out += s * Aᵀ y`
    pub fn apply_t_add(&self, y: &[f64], s: f64, out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        match &self.storage {
            Storage::Dense(d) => {
                for (j, o) in out.iter_mut().enumerate() {
                    *o += s * dot(&d[j * self.rows..(j + 1) * self.rows], y);
                }
            }
            Storage::Csr {
                indptr,
                indices,
                values,
            } => {
                for (i, yi) in y.iter().enumerate() {
                    if *yi == 0.0 {
                        continue;
                    }
                    for p in indptr[i]..indptr[i + 1] {
                        out[indices[p]] += s * values[p] * yi;
                    }
                }
            }
        }
    }

    pub fn apply_t(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        self.apply_t_add(y, 1.0, &mut out);
        out
    }

    /// Multiply every entry by `s`.
    pub fn scaled(mut self, s: f64) -> Self {
        match &mut self.storage {
            Storage::Dense(d) => d.iter_mut().for_each(|v| *v *= s),
            Storage::Csr { values, .. } => values.iter_mut().for_each(|v| *v *= s),
        }
        self
    }
}

/// Result of a power-iteration estimate of the spectral norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OpNormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest singular value of `a` by power iteration on `AᵀA`.
pub fn estimate_op_norm(a: &Matrix, tol: f64, max_iter: usize, seed: u64) -> OpNormEstimate {
    if a.rows() == 0 || a.cols() == 0 || a.nnz() == 0 {
        return OpNormEstimate {
            value: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..a.cols()).map(|_| rng.gen_range(0.5..1.5)).collect();
    let n0 = norm(&v);
    v.iter_mut().for_each(|x| *x /= n0);
    let mut sigma = 0.0;
    for it in 1..=max_iter {
        let av = a.apply(&v);
        let est = norm(&av);
        let mut w = a.apply_t(&av);
        let nw = norm(&w);
        if nw == 0.0 {
            return OpNormEstimate {
                value: est,
                iterations: it,
                converged: true,
            };
        }
        w.iter_mut().for_each(|x| *x /= nw);
        v = w;
        if it > 1 && (est - sigma).abs() <= tol * est {
            return OpNormEstimate {
                value: est.max(sigma),
                iterations: it,
                converged: true,
            };
        }
        sigma = est;
    }
    log::warn!("power iteration did not converge in {max_iter} iterations");
    OpNormEstimate {
        value: sigma,
        iterations: max_iter,
        converged: false,
    }
}

/// Op-norm with default tolerance and seed.
pub fn op_norm(a: &Matrix) -> f64 {
    estimate_op_norm(a, 1e-10, 10_000, 0x5eed).value
}
