//! Small dense linear algebra used by the algebraic solver and the
//! multiplier initialisation. Systems here have at most a few hundred rows.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major dense square matrix with an in-place LU factorisation.
#[derive(Clone, Debug)]
pub struct DenseMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|x| *x = T::zero());
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.n + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.n + c] = v;
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.n + c] += v;
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|r| (0..self.n).map(|c| self.get(r, c) * x[c]).sum())
            .collect()
    }

    /// Solves `A x = b` by Gaussian elimination with partial pivoting.
    /// `self` is overwritten by its factors; `b` is overwritten by `x`.
    pub fn solve_in_place(&mut self, b: &mut [T]) -> Result<()> {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        let scale = self
            .data
            .iter()
            .fold(T::zero(), |m, x| m.max(x.abs()))
            .max(T::min_positive_value());
        let tiny = scale * T::epsilon() * T::from_count(n.max(1));
        for k in 0..n {
            let mut piv = k;
            let mut best = self.get(k, k).abs();
            for r in (k + 1)..n {
                let v = self.get(r, k).abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best <= tiny {
                return Err(Error::SingularMatrix(n));
            }
            if piv != k {
                for c in 0..n {
                    self.data.swap(k * n + c, piv * n + c);
                }
                b.swap(k, piv);
            }
            let d = self.get(k, k);
            for r in (k + 1)..n {
                let f = self.get(r, k) / d;
                if f == T::zero() {
                    continue;
                }
                for c in (k + 1)..n {
                    let v = self.get(k, c);
                    self.add(r, c, -f * v);
                }
                self.set(r, k, T::zero());
                let bk = b[k];
                b[r] -= f * bk;
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for c in (k + 1)..n {
                s -= self.get(k, c) * b[c];
            }
            b[k] = s / self.get(k, k);
        }
        Ok(())
    }
}
