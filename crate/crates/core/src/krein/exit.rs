//! Exit time from an interval: Kac moments, the exponential-moment
//! threshold and the principal Dirichlet eigenvalue.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{tridiag_eigen, tridiag_solve};
use crate::measures::AtomicMeasure;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExitStats {
    /// `E^0[H^n]`, `n = 1..=n_max`.
    pub moments: Vec<f64>,
    pub c: f64,
    pub c_tilde: f64,
    pub lambda_min: f64,
    /// `1/C`: `E^0 e^{λH} < ∞` below this rate.
    pub exp_moment_bound: f64,
}

impl ExitStats {
    /// `C̃ ≤ 1/λ_min ≤ 4 C̃`.
    pub fn kac_krein_holds(&self) -> bool {
        let inv = 1.0 / self.lambda_min;
        self.c_tilde <= inv && inv <= 4.0 * self.c_tilde
    }
}

/// Exit statistics of `(a, b)` for the diffusion started at 0.
pub fn kac_exit(measure: &AtomicMeasure, a: f64, b: f64, n_max: usize) -> Result<ExitStats> {
    if !(a < 0.0 && 0.0 < b) {
        return Err(Error::invalid(format!("need a < 0 < b, got ({a}, {b})")));
    }
    let (lo, hi) = measure.window();
    if a < lo || b > hi {
        return Err(Error::invalid("exit interval leaves the window"));
    }
    let sites: Vec<(f64, f64)> = measure.atoms().iter().copied().filter(|&(x, _)| x > a && x < b).collect();
    if sites.is_empty() {
        return Err(Error::degenerate("no mass inside the exit interval"));
    }
    let n = sites.len();
    let pos: Vec<f64> = sites.iter().map(|s| s.0).collect();
    let mass: Vec<f64> = sites.iter().map(|s| s.1).collect();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n - 1];
    for i in 0..n {
        let left = if i == 0 { pos[0] - a } else { pos[i] - pos[i - 1] };
        let right = if i + 1 == n { b - pos[i] } else { pos[i + 1] - pos[i] };
        diag[i] = 1.0 / left + 1.0 / right;
        if i + 1 < n {
            off[i] = -1.0 / right;
        }
    }

    let at_zero = |u: &[f64]| -> f64 {
        let i = pos.partition_point(|&p| p < 0.0);
        let (xl, ul) = if i == 0 { (a, 0.0) } else { (pos[i - 1], u[i - 1]) };
        let (xr, ur) = if i == n { (b, 0.0) } else { (pos[i], u[i]) };
        if xr == 0.0 {
            return ur;
        }
        ul + (ur - ul) * (0.0 - xl) / (xr - xl)
    };
    let mut moments = Vec::with_capacity(n_max);
    let mut u = vec![1.0; n];
    for k in 1..=n_max {
        let rhs: Vec<f64> = u.iter().zip(&mass).map(|(u, m)| k as f64 * m * u).collect();
        u = tridiag_solve(&off, &diag, &off, &rhs)?;
        moments.push(at_zero(&u));
    }

    let c = sites.iter().map(|&(x, m)| (b - x) * (x - a) * m).sum::<f64>() / (b - a);
    let mut c_tilde: f64 = 0.0;
    let mut acc = 0.0;
    for &(x, m) in sites.iter().rev().filter(|s| s.0 <= 0.0) {
        acc += m;
        c_tilde = c_tilde.max((x - a) * acc);
    }
    acc = 0.0;
    for &(x, m) in sites.iter().filter(|s| s.0 >= 0.0) {
        acc += m;
        c_tilde = c_tilde.max((b - x) * acc);
    }

    let sym_diag: Vec<f64> = diag.iter().zip(&mass).map(|(d, m)| d / m).collect();
    let sym_off: Vec<f64> = (0..n - 1).map(|i| off[i] / (mass[i] * mass[i + 1]).sqrt()).collect();
    let lambda_min = tridiag_eigen(&sym_diag, &sym_off, &[])?.values[0];

    Ok(ExitStats {
        moments,
        c,
        c_tilde,
        lambda_min,
        exp_moment_bound: 1.0 / c,
    })
}
