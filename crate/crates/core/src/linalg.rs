//! Banded matrices and an LU solver with partial pivoting.
//!
//! A dense matrix is just a banded one with `kl = ku = n - 1`, so small test
//! systems and the 1D discretizations share one code path.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("singular matrix: pivot {pivot:e} at column {column}")]
    SingularMatrix { column: usize, pivot: f64 },
    #[error("dimension mismatch: matrix {matrix}, vector {vector}")]
    DimensionMismatch { matrix: usize, vector: usize },
}

/// Square matrix with `kl` sub- and `ku` super-diagonals, row-major band storage.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let kl = kl.min(n.saturating_sub(1));
        let ku = ku.min(n.saturating_sub(1));
        Self { n, kl, ku, data: vec![0.0; n * (kl + ku + 1)] }
    }

    pub fn dense(n: usize) -> Self {
        Self::zeros(n, n.saturating_sub(1), n.saturating_sub(1))
    }

    pub fn identity(n: usize) -> Self {
        let mut a = Self::zeros(n, 0, 0);
        for i in 0..n {
            a.set(i, i, 1.0);
        }
        a
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut a = Self::dense(n);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                a.set(i, j, v);
            }
        }
        a
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    #[inline]
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        i * (self.kl + self.ku + 1) + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.index(i, j)]
        } else {
            0.0
        }
    }

    /// Panics when `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band ({}, {})", self.kl, self.ku);
        let idx = self.index(i, j);
        self.data[idx] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band ({}, {})", self.kl, self.ku);
        let idx = self.index(i, j);
        self.data[idx] += v;
    }

    /// Column range `[lo, hi)` of row `i` inside the band.
    pub fn row_range(&self, i: usize) -> (usize, usize) {
        (i.saturating_sub(self.kl), (i + self.ku + 1).min(self.n))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let (lo, hi) = self.row_range(i);
                (lo..hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Infinity norm.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let (lo, hi) = self.row_range(i);
                (lo..hi).map(|j| self.get(i, j).abs()).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

/// LU factors of a banded matrix with row pivoting.
///
/// Row `i` of the working storage covers columns `i - kl ..= i + kl + ku`,
/// the extra `kl` super-diagonals receive fill-in from pivoting.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    width: usize,
    data: Vec<f64>,
    /// Row interchanged with row `k` at elimination step `k`.
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn factor(a: &BandedMatrix) -> Result<Self, LinalgError> {
        let n = a.n;
        let kl = a.kl;
        let ku = a.ku;
        let width = 2 * kl + ku + 1;
        let mut data = vec![0.0; n * width];
        let mut scale = vec![0.0f64; n];
        for i in 0..n {
            let (lo, hi) = a.row_range(i);
            for j in lo..hi {
                let v = a.get(i, j);
                data[i * width + (j + kl - i)] = v;
                scale[i] = scale[i].max(v.abs());
            }
        }
        let at = |data: &Vec<f64>, i: usize, j: usize| -> f64 {
            if j + kl < i || j > i + kl + ku {
                0.0
            } else {
                data[i * width + (j + kl - i)]
            }
        };

        let mut pivots: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = at(&data, k, k).abs();
            for i in k + 1..=last_row {
                let v = at(&data, i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if scale[p] == 0.0 || best <= 1e-14 * scale[p] {
                return Err(LinalgError::SingularMatrix { column: k, pivot: best });
            }
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let ik = k * width + (j + kl - k);
                    let ip = p * width + (j + kl - p);
                    data.swap(ik, ip);
                }
                // multipliers left of column k stay in place (LAPACK gbtrf layout)
                scale.swap(k, p);
            }
            pivots[k] = p;
            let pivot = data[k * width + kl];
            for i in k + 1..=last_row {
                let ik = i * width + (k + kl - i);
                let factor = data[ik] / pivot;
                if factor == 0.0 {
                    continue;
                }
                data[ik] = factor;
                for j in k + 1..=last_col {
                    let kj = k * width + (j + kl - k);
                    let ij = i * width + (j + kl - i);
                    data[ij] -= factor * data[kj];
                }
            }
        }
        Ok(Self { n, kl, width, data, pivots })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = self.n;
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch { matrix: n, vector: b.len() });
        }
        let kl = self.kl;
        let w = self.width;
        let mut y: Vec<f64> = b.to_vec();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                y.swap(k, p);
            }
            let yk = y[k];
            if yk == 0.0 {
                continue;
            }
            for i in k + 1..=(k + kl).min(n - 1) {
                y[i] -= self.data[i * w + (k + kl - i)] * yk;
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let hi = (i + w - kl).min(n);
            let mut s = y[i];
            for j in i + 1..hi {
                s -= self.data[i * w + (j + kl - i)] * x[j];
            }
            x[i] = s / self.data[i * w + kl];
        }
        Ok(x)
    }
}

/// Solves `A x = b` for a banded `A`.
pub fn solve_linear_banded(a: &BandedMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if b.len() != a.dim() {
        return Err(LinalgError::DimensionMismatch { matrix: a.dim(), vector: b.len() });
    }
    BandedLu::factor(a)?.solve(b)
}
