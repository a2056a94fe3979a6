//! Gaussian elimination with partial pivoting on a banded system.

use crate::error::{Error, Result};

/// Square matrix with `lower` sub-diagonals and `upper` super-diagonals.
/// Storage reserves `lower` extra super-diagonals for pivoting fill-in.
#[derive(Debug, Clone)]
pub(crate) struct BandMatrix {
    n: usize,
    lower: usize,
    upper_fill: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        let upper_fill = upper + lower;
        let width = lower + upper_fill + 1;
        Self {
            n,
            lower,
            upper_fill,
            width,
            data: vec![0.0; n * width],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.lower >= i && j <= i + self.upper_fill, "({i}, {j}) outside band");
        i * self.width + (j + self.lower - i)
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    /// Solves `A x = b` in place, consuming the matrix.
    pub fn solve(mut self, mut b: Vec<f64>) -> Result<Vec<f64>> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let scale = self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last_row = (k + self.lower).min(n - 1);
            let last_col = (k + self.upper_fill).min(n - 1);
            let mut pivot = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last_row {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    pivot = i;
                }
            }
            if best <= scale * 1e-300 {
                return Err(Error::Solver(format!("singular banded system at column {k}")));
            }
            if pivot != k {
                for j in k..=last_col {
                    let a = self.get(k, j);
                    let c = self.get(pivot, j);
                    self.set(k, j, c);
                    self.set(pivot, j, a);
                }
                b.swap(k, pivot);
            }
            let diag = self.get(k, k);
            for i in k + 1..=last_row {
                let factor = self.get(i, k) / diag;
                if factor == 0.0 {
                    continue;
                }
                self.set(i, k, 0.0);
                for j in k + 1..=last_col {
                    let v = self.get(i, j) - factor * self.get(k, j);
                    self.set(i, j, v);
                }
                b[i] -= factor * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let last_col = (i + self.upper_fill).min(n - 1);
            let mut acc = b[i];
            for j in i + 1..=last_col {
                acc -= self.get(i, j) * x[j];
            }
            x[i] = acc / self.get(i, i);
        }
        Ok(x)
    }
}
