use crate::error::{Error, Result};

use super::CsrMatrix;

/// LU factorization with partial pivoting of a banded matrix, stored
/// column-major with room for the fill that row interchanges create.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandedLu {
    /// Number of stored entries a factorization of `a` would need.
    pub fn storage_for(a: &CsrMatrix) -> usize {
        let (kl, ku) = a.bandwidths();
        a.nrows() * (2 * kl + ku + 1)
    }

    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Singular(format!("matrix is {}x{}", a.nrows(), a.ncols())));
        }
        let n = a.nrows();
        let (kl, ku) = a.bandwidths();
        let ldab = 2 * kl + ku + 1;
        let mut lu = Self { n, kl, ku, ldab, ab: vec![0.0; n * ldab], ipiv: vec![0; n] };
        for i in 0..n {
            for (j, v) in a.row(i) {
                *lu.at_mut(i, j) = v;
            }
        }
        lu.factor_in_place()?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.ldab + (self.kl + self.ku + i - j)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.ab[self.idx(i, j)]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let p = self.idx(i, j);
        &mut self.ab[p]
    }

    fn factor_in_place(&mut self) -> Result<()> {
        let n = self.n;
        let kl = self.kl;
        let kuf = self.kl + self.ku;
        for k in 0..n {
            let km = kl.min(n - 1 - k);
            let mut p = k;
            let mut best = self.at(k, k).abs();
            for i in k + 1..=k + km {
                let v = self.at(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular(format!("zero pivot in column {k}")));
            }
            self.ipiv[k] = p;
            let jmax = (k + kuf).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let (ik, ip) = (self.idx(k, j), self.idx(p, j));
                    self.ab.swap(ik, ip);
                }
            }
            let pivot = self.at(k, k);
            let col = self.idx(k + 1, k);
            for v in &mut self.ab[col..col + km] {
                *v /= pivot;
            }
            for j in k + 1..=jmax {
                let akj = self.at(k, j);
                if akj == 0.0 {
                    continue;
                }
                let lcol = self.idx(k + 1, k);
                let tcol = self.idx(k + 1, j);
                for r in 0..km {
                    self.ab[tcol + r] -= self.ab[lcol + r] * akj;
                }
            }
        }
        Ok(())
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let kuf = self.kl + self.ku;
        for k in 0..n {
            let p = self.ipiv[k];
            if p != k {
                b.swap(k, p);
            }
            let km = self.kl.min(n - 1 - k);
            let bk = b[k];
            if bk != 0.0 {
                let col = self.idx(k + 1, k);
                for r in 0..km {
                    b[k + 1 + r] -= self.ab[col + r] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let bk = b[k] / self.at(k, k);
            b[k] = bk;
            if bk != 0.0 {
                let i0 = k.saturating_sub(kuf);
                for i in i0..k {
                    b[i] -= self.at(i, k) * bk;
                }
            }
        }
    }
}
