//! Small dense and banded linear-algebra kernels used by the samplers.
//!
//! The dense path hand-rolls a lower-triangular Cholesky so that a failing
//! pivot can be reported by index and retried under the jitter schedule.
//! The banded path covers symmetric positive definite matrices whose nonzeros
//! stay within a fixed half-bandwidth (lattice Laplacians, diagonal models);
//! its factor is band-limited, so factorization costs O(n·bw²) and a solve
//! costs O(n·bw).

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Symmetric banded matrix, lower storage: `data[j * (bw + 1) + d]` holds
/// the entry `(j + d, j)` for `d` in `0..=bw`.
#[derive(Debug, Clone)]
pub struct SymBanded {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBanded {
    pub fn zeros(n: usize, bw: usize) -> Self {
        SymBanded {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Set entry (i, j) with i >= j and i - j <= bw.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(i >= j && i - j <= self.bw && i < self.n);
        self.data[j * (self.bw + 1) + (i - j)] = value;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        if hi - lo > self.bw {
            return 0.0;
        }
        self.data[lo * (self.bw + 1) + (hi - lo)]
    }

    /// Banded Cholesky `A = L·Lᵀ`. Fails on the first non-positive pivot.
    pub fn cholesky(&self) -> Result<BandedCholesky> {
        let bw = self.bw;
        let n = self.n;
        let mut l = vec![0.0; n * (bw + 1)];
        for j in 0..n {
            let lo = j.saturating_sub(bw);
            let mut d = self.data[j * (bw + 1)];
            for k in lo..j {
                let ljk = l[k * (bw + 1) + (j - k)];
                d -= ljk * ljk;
            }
            if d <= 0.0 {
                return Err(Error::NotPsd {
                    pivot: j,
                    value: d,
                    jitter: 0.0,
                });
            }
            let ljj = d.sqrt();
            l[j * (bw + 1)] = ljj;
            let hi = (j + bw).min(n - 1);
            for i in (j + 1)..=hi {
                let mut s = self.data[j * (bw + 1) + (i - j)];
                let klo = i.saturating_sub(bw).max(lo);
                for k in klo..j {
                    s -= l[k * (bw + 1) + (i - k)] * l[k * (bw + 1) + (j - k)];
                }
                l[j * (bw + 1) + (i - j)] = s / ljj;
            }
        }
        Ok(BandedCholesky { n, bw, data: l })
    }
}

/// Lower-triangular banded Cholesky factor.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedCholesky {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn l(&self, i: usize, j: usize) -> f64 {
        self.data[j * (self.bw + 1) + (i - j)]
    }

    /// Solve L·x = b in place, starting the sweep at `first_nonzero`
    /// (rows before it are assumed zero in b and stay zero in x).
    pub fn solve_lower_from(&self, b: &mut [f64], first_nonzero: usize) {
        let bw = self.bw;
        for i in first_nonzero..self.n {
            let lo = i.saturating_sub(bw).max(first_nonzero);
            let mut s = b[i];
            for k in lo..i {
                s -= self.l(i, k) * b[k];
            }
            b[i] = s / self.l(i, i);
        }
    }

    pub fn solve_lower(&self, b: &mut [f64]) {
        self.solve_lower_from(b, 0);
    }

    /// Solve Lᵀ·x = b in place.
    pub fn solve_upper(&self, b: &mut [f64]) {
        let bw = self.bw;
        for i in (0..self.n).rev() {
            let hi = (i + bw).min(self.n - 1);
            let mut s = b[i];
            for k in (i + 1)..=hi {
                s -= self.l(k, i) * b[k];
            }
            b[i] = s / self.l(i, i);
        }
    }

    /// Solve (L·Lᵀ)·x = b in place.
    pub fn solve(&self, b: &mut [f64]) {
        self.solve_lower(b);
        self.solve_upper(b);
    }
}

/// Dense lower-triangular Cholesky with pivot reporting.
///
/// Returns the factor L (as a full matrix with zero upper triangle) or the
/// offending pivot index and value.
pub fn dense_cholesky(matrix: &DMatrix<f64>) -> std::result::Result<DMatrix<f64>, (usize, f64)> {
    let n = matrix.nrows();
    assert_eq!(n, matrix.ncols());
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = matrix[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 {
            return Err((j, d));
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = matrix[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Dense Cholesky under the diagonal jitter escalation schedule: start at
/// zero, then `1e-12·scale`, growing tenfold per retry up to `1e-6·scale`.
/// Returns the factor and the jitter that succeeded.
pub fn dense_cholesky_with_jitter(
    matrix: &DMatrix<f64>,
    scale: f64,
) -> Result<(DMatrix<f64>, f64)> {
    let mut jitter = 0.0;
    loop {
        let attempt = if jitter == 0.0 {
            matrix.clone()
        } else {
            let mut m = matrix.clone();
            for i in 0..m.nrows() {
                m[(i, i)] += jitter;
            }
            m
        };
        match dense_cholesky(&attempt) {
            Ok(l) => return Ok((l, jitter)),
            Err((pivot, value)) => {
                let next = if jitter == 0.0 { 1e-12 * scale } else { jitter * 10.0 };
                if next > 1e-6 * scale || next == 0.0 {
                    return Err(Error::NotPsd { pivot, value, jitter });
                }
                jitter = next;
            }
        }
    }
}
