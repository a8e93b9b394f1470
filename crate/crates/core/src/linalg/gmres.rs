use crate::error::{Error, Result};

use super::{norm2, CsrMatrix};

/// Incomplete LU factorization with the sparsity pattern of the matrix.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        let mut lu = a.clone();
        let mut diag = vec![usize::MAX; n];
        for (i, d) in diag.iter_mut().enumerate() {
            *d = lu
                .position(i, i)
                .ok_or_else(|| Error::Singular(format!("no diagonal entry in row {i}")))?;
        }
        let rp = lu.row_ptr().to_vec();
        let ci = lu.col_idx().to_vec();
        let mut marker = vec![usize::MAX; n];
        for i in 0..n {
            for p in rp[i]..rp[i + 1] {
                marker[ci[p]] = p;
            }
            let vals = lu.values_mut();
            for p in rp[i]..rp[i + 1] {
                let k = ci[p];
                if k >= i {
                    break;
                }
                let pivot = vals[diag[k]];
                if pivot == 0.0 {
                    return Err(Error::Singular(format!("zero ILU pivot in row {k}")));
                }
                let lik = vals[p] / pivot;
                vals[p] = lik;
                for q in diag[k] + 1..rp[k + 1] {
                    let m = marker[ci[q]];
                    if m != usize::MAX {
                        vals[m] -= lik * vals[q];
                    }
                }
            }
            for p in rp[i]..rp[i + 1] {
                marker[ci[p]] = usize::MAX;
            }
            if lu.values()[diag[i]] == 0.0 || !lu.values()[diag[i]].is_finite() {
                return Err(Error::Singular(format!("zero ILU pivot in row {i}")));
            }
        }
        Ok(Self { lu, diag })
    }

    pub fn apply(&self, x: &mut [f64]) {
        let rp = self.lu.row_ptr();
        let ci = self.lu.col_idx();
        let v = self.lu.values();
        let n = x.len();
        for i in 0..n {
            let mut s = x[i];
            for p in rp[i]..self.diag[i] {
                s -= v[p] * x[ci[p]];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for p in self.diag[i] + 1..rp[i + 1] {
                s -= v[p] * x[ci[p]];
            }
            x[i] = s / v[self.diag[i]];
        }
    }
}

/// Restarted GMRES with right ILU(0) preconditioning. Converges on the true
/// relative residual `||b - Ax|| / ||b||`.
pub fn gmres_ilu0(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<(Vec<f64>, f64)> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0.0));
    }
    let m = Ilu0::factor(a)?;
    let mut r = b.to_vec();
    let mut total = 0;
    let mut rel = 1.0;
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(restart + 1);
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];

    while total < max_iter {
        let beta = norm2(&r);
        rel = beta / bnorm;
        if rel <= tol {
            return Ok((x, rel));
        }
        basis.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k_used = 0;

        for k in 0..restart {
            z.copy_from_slice(&basis[k]);
            m.apply(&mut z);
            a.matvec(&z, &mut w);
            for (j, vj) in basis.iter().enumerate() {
                let hjk: f64 = w.iter().zip(vj).map(|(a, b)| a * b).sum();
                h[j][k] = hjk;
                w.iter_mut().zip(vj).for_each(|(wi, vi)| *wi -= hjk * vi);
            }
            let hn = norm2(&w);
            h[k + 1][k] = hn;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            if denom == 0.0 {
                break;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            total += 1;
            if !g[k + 1].is_finite() {
                return Err(Error::LinearSolveFailed { tol, achieved: f64::NAN });
            }
            // leave a margin: the recurrence estimate drifts from the true residual
            if g[k + 1].abs() / bnorm <= 0.1 * tol || hn == 0.0 || total >= max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }

        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        z.iter_mut().for_each(|v| *v = 0.0);
        for (yj, vj) in y.iter().zip(&basis) {
            z.iter_mut().zip(vj).for_each(|(zi, vi)| *zi += yj * vi);
        }
        m.apply(&mut z);
        x.iter_mut().zip(&z).for_each(|(xi, zi)| *xi += zi);
        a.matvec(&x, &mut w);
        r.iter_mut().zip(b.iter().zip(&w)).for_each(|(ri, (bi, wi))| *ri = bi - wi);
        if k_used == 0 {
            break;
        }
    }
    let achieved = norm2(&r) / bnorm;
    if achieved <= tol {
        Ok((x, achieved))
    } else {
        Err(Error::LinearSolveFailed { tol, achieved: rel.min(achieved) })
    }
}
