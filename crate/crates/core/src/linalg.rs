//! Small dense/banded linear algebra kernels used by the spectral engine and
//! the field sampler.

use crate::error::{Error, Result};

/// Eigenpairs of a symmetric tridiagonal matrix, ascending.
///
/// `rows[r][j]` is component `tracked[r]` of the unit eigenvector belonging to
/// `values[j]`.
#[derive(Debug, Clone)]
pub struct TridiagEigen {
    pub values: Vec<f64>,
    pub tracked: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
}

const MAX_QL_ITER: usize = 80;

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix.
///
/// Only the eigenvector components listed in `tracked` are accumulated, which
/// keeps the cost at O(n² · (1 + |tracked|/n)) instead of O(n³) when only a
/// few components are needed (for instance the boundary component that
/// carries the spectral weight). Pass `0..n` to obtain full eigenvectors.
pub fn tridiag_eigen(diag: &[f64], offdiag: &[f64], tracked: &[usize]) -> Result<TridiagEigen> {
    let n = diag.len();
    if n == 0 {
        return Err(Error::degenerate("empty tridiagonal matrix"));
    }
    if offdiag.len() + 1 != n {
        return Err(Error::invalid("off-diagonal length must be n-1"));
    }
    if let Some(&bad) = tracked.iter().find(|&&t| t >= n) {
        return Err(Error::invalid(format!("tracked row {bad} out of range")));
    }
    let mut d = diag.to_vec();
    let mut e = offdiag.to_vec();
    e.push(0.0);
    let mut z: Vec<Vec<f64>> = tracked
        .iter()
        .map(|&t| {
            let mut row = vec![0.0; n];
            row[t] = 1.0;
            row
        })
        .collect();

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_ITER {
                return Err(Error::numeric(format!(
                    "tridiagonal QL did not converge at index {l}"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for row in z.iter_mut() {
                    let f = row[i + 1];
                    row[i + 1] = s * row[i] + c * f;
                    row[i] = c * row[i] - s * f;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&j| d[j]).collect();
    let rows = z
        .into_iter()
        .map(|row| order.iter().map(|&j| row[j]).collect())
        .collect();
    Ok(TridiagEigen {
        values,
        tracked: tracked.to_vec(),
        rows,
    })
}

/// Solve a tridiagonal system `A x = rhs` (Thomas algorithm).
///
/// `lower[i]` couples rows `i+1` and `i`, `upper[i]` couples `i` and `i+1`.
pub fn tridiag_solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if rhs.len() != n || lower.len() + 1 != n.max(1) || upper.len() + 1 != n.max(1) {
        return Err(Error::invalid("tridiagonal system has inconsistent sizes"));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return Err(Error::numeric("zero pivot in tridiagonal solve"));
    }
    x[0] = rhs[0] / beta;
    for i in 1..n {
        c[i] = upper[i - 1] / beta;
        beta = diag[i] - lower[i - 1] * c[i];
        if beta == 0.0 {
            return Err(Error::numeric("zero pivot in tridiagonal solve"));
        }
        x[i] = (rhs[i] - lower[i - 1] * x[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i + 1] * x[i + 1];
    }
    Ok(x)
}

/// Lower Cholesky factor of a symmetric positive definite band matrix.
///
/// Row `i` stores `L[i][i-bw..=i]` (entries left of column 0 are zero).
#[derive(Debug, Clone)]
pub struct BandCholesky {
    pub n: usize,
    pub bandwidth: usize,
    data: Vec<f64>,
}

impl BandCholesky {
    /// Factor the matrix with entries `entry(i, j)` for `|i-j| <= bandwidth`
    /// (zero outside the band).
    pub fn factor(n: usize, bandwidth: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let bw = bandwidth.min(n.saturating_sub(1));
        let w = bw + 1;
        let mut data = vec![0.0; n * w];
        // data[i*w + (j + bw - i)] = L[i][j]
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut sum = entry(i, j);
                let ri = i * w + bw - i;
                let rj = j * w + bw - j;
                for k in k0..j {
                    sum -= data[ri + k] * data[rj + k];
                }
                if i == j {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return Err(Error::numeric(format!(
                            "covariance not positive definite at row {i} (pivot {sum:e})"
                        )));
                    }
                    data[ri + i] = sum.sqrt();
                } else {
                    data[ri + j] = sum / data[rj + j];
                }
            }
        }
        Ok(BandCholesky { n, bandwidth: bw, data })
    }

    /// `L z` for a vector of standard normals `z`.
    pub fn mul_lower(&self, z: &[f64]) -> Vec<f64> {
        let w = self.bandwidth + 1;
        (0..self.n)
            .map(|i| {
                let j0 = i.saturating_sub(self.bandwidth);
                let base = i * w + self.bandwidth - i;
                (j0..=i).map(|j| self.data[base + j] * z[j]).sum()
            })
            .collect()
    }
}
