//! Banded matrices with an LU factorization using partial pivoting.

use crate::error::{Error, Result};

/// Square matrix with `kl` sub- and `ku` super-diagonals.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as isize - i as isize + self.kl as isize;
        (0..=(self.kl + self.ku) as isize)
            .contains(&off)
            .then(|| i * (self.kl + self.ku + 1) + off as usize)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds `v` at `(i, j)`. Panics outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).expect("entry outside band");
        self.data[s] += v;
    }

    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row_range(i).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// `I - c A`.
    pub fn shifted_identity(&self, c: f64) -> Self {
        let mut m = Self::zeros(self.n, self.kl, self.ku);
        for i in 0..self.n {
            for j in self.row_range(i) {
                m.add(i, j, -c * self.get(i, j));
            }
            m.add(i, i, 1.0);
        }
        m
    }

    pub fn lu(&self) -> Result<BandLu> {
        BandLu::factor(self)
    }
}

/// LU factors of a [`BandMatrix`] with row interchanges.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    width: usize,
    upper: Vec<f64>,
    lower: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    fn factor(a: &BandMatrix) -> Result<Self> {
        let (n, kl, ku) = (a.n, a.kl, a.ku);
        let width = 2 * kl + ku + 1;
        // row i holds columns i-kl ..= i+kl+ku
        let mut u = vec![0.0; n * width];
        let idx = |i: usize, j: usize| i * width + (j + kl - i);
        for i in 0..n {
            for j in a.row_range(i) {
                u[idx(i, j)] = a.get(i, j);
            }
        }
        let mut lower = vec![0.0; n * kl.max(1)];
        let mut pivots = vec![0; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = u[idx(k, k)].abs();
            for i in k + 1..=last {
                let v = u[idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > 0.0) || !best.is_finite() {
                return Err(Error::Singular(k));
            }
            pivots[k] = p;
            let jend = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=jend {
                    u.swap(idx(k, j), idx(p, j));
                }
            }
            let piv = u[idx(k, k)];
            for i in k + 1..=last {
                let l = u[idx(i, k)] / piv;
                lower[k * kl + (i - k - 1)] = l;
                u[idx(i, k)] = 0.0;
                if l != 0.0 {
                    for j in k + 1..=jend {
                        u[idx(i, j)] -= l * u[idx(k, j)];
                    }
                }
            }
        }
        Ok(Self {
            n,
            kl,
            width,
            upper: u,
            lower,
            pivots,
        })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, w) = (self.n, self.kl, self.width);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            let end = (k + kl).min(n - 1);
            for (off, bi) in b[k + 1..=end].iter_mut().enumerate() {
                *bi -= self.lower[k * kl + off] * bk;
            }
        }
        let ku_ext = w - kl - 1;
        for k in (0..n).rev() {
            let row = &self.upper[k * w..(k + 1) * w];
            let mut s = b[k];
            for j in k + 1..=(k + ku_ext).min(n - 1) {
                s -= row[j + kl - k] * b[j];
            }
            b[k] = s / row[kl];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_system_requiring_pivoting() {
        let n = 12;
        let mut a = BandMatrix::zeros(n, 2, 1);
        for i in 0..n {
            a.add(i, i, if i % 3 == 0 { 1e-12 } else { 2.0 });
            if i + 1 < n {
                a.add(i, i + 1, 1.0);
            }
            for d in 1..=2 {
                if i >= d {
                    a.add(i, i - d, 3.0 + d as f64);
                }
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b = a.matvec(&x);
        let y = a.lu().unwrap().solve(&b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = BandMatrix::zeros(4, 1, 1);
        assert!(matches!(a.lu(), Err(Error::Singular(0))));
    }
}
