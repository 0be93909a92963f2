//! Dense symmetric factorizations through LAPACK, with an eigenvalue-clipping
//! fallback for matrices that are only numerically semidefinite.

use crate::error::{LqgError, Result};

/// `C ~= B B^T`, column-major `n x n`. When `triangular` only the lower
/// triangle of `b` is meaningful.
#[derive(Debug)]
pub struct Factor {
    pub n: usize,
    pub b: Vec<f64>,
    pub triangular: bool,
    /// Sum of the negative eigenvalues removed by clipping (0 for Cholesky).
    pub clipped: f64,
}

/// Factor the symmetric `n x n` matrix produced by `build` (column-major, or
/// row-major, which is the same thing). `build` is called a second time only
/// when Cholesky fails, so the matrix is never held twice.
pub fn factor_psd(build: impl Fn() -> Vec<f64>, n: usize) -> Result<Factor> {
    let mut a = build();
    if a.len() != n * n {
        return Err(LqgError::Factorization(format!(
            "matrix has {} entries, expected {}",
            a.len(),
            n * n
        )));
    }
    let mut info = 0;
    unsafe { lapack::dpotrf(b'L', n as i32, &mut a, n as i32, &mut info) };
    if info == 0 {
        return Ok(Factor {
            n,
            b: a,
            triangular: true,
            clipped: 0.0,
        });
    }
    drop(a);
    eigen_factor(build(), n)
}

fn eigen_factor(mut a: Vec<f64>, n: usize) -> Result<Factor> {
    let mut w = vec![0.0; n];
    let mut info = 0;
    let mut work = vec![0.0; 1];
    let mut iwork = vec![0i32; 1];
    unsafe {
        lapack::dsyevd(
            b'V', b'L', n as i32, &mut a, n as i32, &mut w, &mut work, -1, &mut iwork, -1, &mut info,
        )
    };
    let lwork = work[0] as usize;
    let liwork = iwork[0] as usize;
    work = vec![0.0; lwork.max(1)];
    iwork = vec![0; liwork.max(1)];
    unsafe {
        lapack::dsyevd(
            b'V',
            b'L',
            n as i32,
            &mut a,
            n as i32,
            &mut w,
            &mut work,
            lwork as i32,
            &mut iwork,
            liwork as i32,
            &mut info,
        )
    };
    if info != 0 {
        return Err(LqgError::Factorization(format!("dsyevd info {info}")));
    }
    let top = w.iter().cloned().fold(0.0f64, f64::max);
    let floor = -1e-10 * top;
    if let Some(bad) = w.iter().find(|l| **l < floor) {
        return Err(LqgError::Factorization(format!("eigenvalue {bad} below {floor}")));
    }
    let clipped: f64 = w.iter().filter(|l| **l < 0.0).map(|l| -l).sum();
    for (j, l) in w.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        a[j * n..(j + 1) * n].iter_mut().for_each(|v| *v *= s);
    }
    Ok(Factor {
        n,
        b: a,
        triangular: false,
        clipped,
    })
}

impl Factor {
    /// Overwrites the `n x m` column-major block `z` with `B z`.
    pub fn apply(&self, z: &mut Vec<f64>, m: usize) {
        let n = self.n;
        assert_eq!(z.len(), n * m);
        if self.triangular {
            unsafe {
                blas::dtrmm(
                    b'L', b'L', b'N', b'N', n as i32, m as i32, 1.0, &self.b, n as i32, z, n as i32,
                )
            };
        } else {
            let mut out = vec![0.0; n * m];
            unsafe {
                blas::dgemm(
                    b'N', b'N', n as i32, m as i32, n as i32, 1.0, &self.b, n as i32, z, n as i32, 0.0, &mut out,
                    n as i32,
                )
            };
            *z = out;
        }
    }

    /// `diag(B B^T)`.
    pub fn variances(&self) -> Vec<f64> {
        let n = self.n;
        let mut v = vec![0.0; n];
        for j in 0..n {
            let start = if self.triangular { j } else { 0 };
            for i in start..n {
                let x = self.b[j * n + i];
                v[i] += x * x;
            }
        }
        v
    }

    /// `w^T B B^T w` for a sparse weight vector, i.e. the variance of a linear functional.
    pub fn variance_of(&self, w: &[(usize, f64)]) -> f64 {
        let n = self.n;
        let mut x = vec![0.0; n];
        for &(k, c) in w {
            let cols = if self.triangular { k + 1 } else { n };
            for (j, xj) in x.iter_mut().enumerate().take(cols) {
                *xj += c * self.b[j * n + k];
            }
        }
        x.iter().map(|a| a * a).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(f: &Factor) -> Vec<f64> {
        let n = f.n;
        let mut c = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    let bik = if f.triangular && k > i { 0.0 } else { f.b[k * n + i] };
                    let bjk = if f.triangular && k > j { 0.0 } else { f.b[k * n + j] };
                    s += bik * bjk;
                }
                c[j * n + i] = s;
            }
        }
        c
    }

    #[test]
    fn cholesky_reconstructs() {
        let n = 6;
        let c: Vec<f64> = (0..n * n)
            .map(|k| (-((k / n) as f64 - (k % n) as f64).abs() / 2.0).exp())
            .collect();
        let f = factor_psd(|| c.clone(), n).unwrap();
        assert!(f.triangular);
        for (a, b) in reconstruct(&f).iter().zip(&c) {
            assert!((a - b).abs() < 1e-12);
        }
        let v = f.variances();
        assert!(v.iter().all(|x| (x - 1.0).abs() < 1e-12));
        let w = [(1, 0.5), (4, -2.0), (5, 1.0)];
        let mut direct = 0.0;
        for &(i, a) in &w {
            for &(j, b) in &w {
                direct += a * b * c[i * n + j];
            }
        }
        assert!((f.variance_of(&w) - direct).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_goes_through_clipping() {
        // rank one: v v^T
        let v = [1.0, 2.0, -1.0];
        let c: Vec<f64> = (0..9).map(|k| v[k / 3] * v[k % 3]).collect();
        let f = factor_psd(|| c.clone(), 3).unwrap();
        for (a, b) in reconstruct(&f).iter().zip(&c) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!((f.variance_of(&[(0, 1.0), (1, 1.0)]) - 9.0).abs() < 1e-10);
        let mut z = vec![1.0, 0.0, 0.0];
        f.apply(&mut z, 1);
        assert!(z.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let c = vec![1.0, 2.0, 2.0, 1.0];
        assert!(matches!(factor_psd(|| c.clone(), 2), Err(LqgError::Factorization(_))));
    }
}
