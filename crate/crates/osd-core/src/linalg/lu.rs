//! LU decomposition with partial pivoting.

use alloc::vec;
use alloc::vec::Vec;

use libm::fabs;

use super::{LinalgError, Mat};

#[derive(Debug, Clone)]
pub struct Lu {
    lu: Mat,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn new(a: &Mat) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::NotSquare);
        }
        let n = a.dim();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;

        let scale = lu.max_abs().max(1.0);
        for k in 0..n {
            let mut pivot_row = k;
            let mut pivot_val = fabs(lu[(k, k)]);
            for i in k + 1..n {
                let v = fabs(lu[(i, k)]);
                if v > pivot_val {
                    pivot_val = v;
                    pivot_row = i;
                }
            }
            if pivot_val < f64::EPSILON * scale * n as f64 {
                return Err(LinalgError::Singular);
            }
            if pivot_row != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(pivot_row, j)];
                    lu[(pivot_row, j)] = tmp;
                }
                perm.swap(k, pivot_row);
                sign = -sign;
            }
            for i in k + 1..n {
                let factor = lu[(i, k)] / lu[(k, k)];
                lu[(i, k)] = factor;
                for j in k + 1..n {
                    let sub = factor * lu[(k, j)];
                    lu[(i, j)] -= sub;
                }
            }
        }
        Ok(Lu { lu, perm, sign })
    }

    pub fn det(&self) -> f64 {
        let n = self.lu.dim();
        let mut d = self.sign;
        for i in 0..n {
            d *= self.lu[(i, i)];
        }
        d
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.dim();
        assert_eq!(b.len(), n, "rhs length mismatch");
        let mut x = vec![0.0; n];
        for i in 0..n {
            let mut acc = b[self.perm[i]];
            for (j, xj) in x.iter().enumerate().take(i) {
                acc -= self.lu[(i, j)] * xj;
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for (j, xj) in x.iter().enumerate().skip(i + 1) {
                acc -= self.lu[(i, j)] * xj;
            }
            x[i] = acc / self.lu[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> Result<Mat, LinalgError> {
        let n = self.lu.dim();
        let mut inv = Mat::zeros(n, n);
        let mut e = vec![0.0; n];
        for col in 0..n {
            if col > 0 {
                e[col - 1] = 0.0;
            }
            e[col] = 1.0;
            let x = self.solve(&e);
            inv.set_col(col, &x);
        }
        if !inv.is_finite() {
            return Err(LinalgError::Overflow { norm: self.lu.max_abs() });
        }
        Ok(inv)
    }
}
