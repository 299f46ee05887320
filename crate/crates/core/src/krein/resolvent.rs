//! Two-sided objects: full-line resolvent, hitting transforms and the
//! `h`/`V` sandwich.

use super::spectral::check_pair;
use super::string::StieltjesString;
use crate::error::{Error, Result};

/// `h_{ν,a}` from `1/h = 1/h_+ + 1/h_−`.
pub fn two_sided_h(plus: &StieltjesString, minus: &StieltjesString, lambda: f64) -> Result<f64> {
    check_pair(plus, minus)?;
    let hp = plus.krein_h(lambda)?.value;
    let hm = minus.krein_h(lambda)?.value;
    Ok(1.0 / (1.0 / hp + 1.0 / hm))
}

/// `ln` of the growing factor `φ_s(r) + ψ_s(r)/h_other` at distance `r`.
fn ln_growing(s: &StieltjesString, lambda: f64, r: f64, h_other: f64) -> Result<f64> {
    let v = s.phi_psi(lambda, r)?;
    Ok((v.phi + v.psi / h_other).ln() + v.log_scale as f64 * std::f64::consts::LN_2)
}

fn ln_decaying(s: &StieltjesString, lambda: f64, r: f64) -> Result<f64> {
    Ok(s.decaying_solution(lambda, &[r])?.0[0])
}

/// Resolvent density `g_λ(x, y)` (w.r.t. ν) of the diffusion on the line,
/// coordinates measured from the common anchor: for `x ≤ y`
/// `g = h (φ(x) + ψ(x)/h_−)(φ(y) − ψ(y)/h_+)` with φ even and ψ odd.
pub fn resolvent_full_line(
    plus: &StieltjesString,
    minus: &StieltjesString,
    lambda: f64,
    x: f64,
    y: f64,
) -> Result<f64> {
    check_pair(plus, minus)?;
    if !(lambda > 0.0) {
        return Err(Error::invalid(format!("λ = {lambda} must be positive")));
    }
    let (x, y) = if x <= y { (x, y) } else { (y, x) };
    if x < -minus.length() || y > plus.length() {
        return Err(Error::invalid("points outside the string pair"));
    }
    let hp = plus.krein_h(lambda)?.value;
    let hm = minus.krein_h(lambda)?.value;
    let h = 1.0 / (1.0 / hp + 1.0 / hm);
    // left factor: the solution that is decaying towards −∞
    let left = if x < 0.0 {
        ln_decaying(minus, lambda, -x)?
    } else {
        ln_growing(plus, lambda, x, hm)?
    };
    let right = if y > 0.0 {
        ln_decaying(plus, lambda, y)?
    } else {
        ln_growing(minus, lambda, -y, hp)?
    };
    Ok(h * (left + right).exp())
}

/// `E^a e^{−λ H_b} = g(a,b)/g(b,b)`.
pub fn hitting_laplace(
    plus: &StieltjesString,
    minus: &StieltjesString,
    lambda: f64,
    a: f64,
    b: f64,
) -> Result<f64> {
    Ok(resolvent_full_line(plus, minus, lambda, a, b)? / resolvent_full_line(plus, minus, lambda, b, b)?)
}

/// `n(e^{−λ H_x}) = 1/ψ(x, λ)` for excursions on the side of `s`.
pub fn excursion_hitting_laplace(s: &StieltjesString, lambda: f64, x: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::invalid("λ must be non-negative"));
    }
    if !(x > 0.0) {
        return Err(Error::invalid("x must be positive"));
    }
    Ok((-s.phi_psi(lambda, x)?.ln_psi()).exp())
}

/// `V(r) = ∫_0^r ν([a−x, a+x]) dx`.
pub fn two_sided_v(plus: &StieltjesString, minus: &StieltjesString, r: f64) -> f64 {
    plus.integrated_mass(r) + minus.integrated_mass(r)
}

/// Exact inverse of the piecewise-linear, eventually strictly increasing `V`.
pub fn two_sided_v_inverse(plus: &StieltjesString, minus: &StieltjesString, eta: f64) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::invalid("η must be positive"));
    }
    let mut atoms: Vec<(f64, f64)> = plus.atoms().iter().chain(minus.atoms()).copied().collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut v, mut slope, mut pos) = (0.0, 0.0, 0.0);
    for (xi, m) in atoms {
        let next = v + slope * (xi - pos);
        if next >= eta && slope > 0.0 {
            return Ok(pos + (eta - v) / slope);
        }
        v = next;
        pos = xi;
        slope += m;
    }
    Ok(pos + (eta - v) / slope)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HvPoint {
    pub eta: f64,
    /// `h_{ν,a}(1/η)`.
    pub h: f64,
    /// `V^{-1}(η)`.
    pub v_inverse: f64,
    pub holds: bool,
}

/// `¼ h(1/η) ≤ V^{-1}(η) ≤ 64 h(1/η)` at `n` geometric radii in
/// `[r_lo, r_hi]` (with `η = V(r)`).
pub fn hv_sandwich(
    plus: &StieltjesString,
    minus: &StieltjesString,
    r_lo: f64,
    r_hi: f64,
    n: usize,
) -> Result<Vec<HvPoint>> {
    if !(r_lo > 0.0 && r_lo < r_hi && r_hi <= plus.length().min(minus.length())) {
        return Err(Error::invalid("need 0 < r_lo < r_hi ≤ string length"));
    }
    (0..n)
        .map(|k| {
            let r = r_lo * (r_hi / r_lo).powf(k as f64 / (n.max(2) - 1) as f64);
            let eta = two_sided_v(plus, minus, r);
            if !(eta > 0.0) {
                return Err(Error::degenerate(format!("V({r}) = 0")));
            }
            let h = two_sided_h(plus, minus, 1.0 / eta)?;
            let v_inverse = two_sided_v_inverse(plus, minus, eta)?;
            Ok(HvPoint {
                eta,
                h,
                v_inverse,
                holds: 0.25 * h <= v_inverse && v_inverse <= 64.0 * h,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krein::{Boundary, Direction};

    fn pair(delta: f64, length: f64) -> (StieltjesString, StieltjesString) {
        let p = StieltjesString::uniform(delta, length, Boundary::DirichletAtEnd).unwrap();
        let m = StieltjesString::anchored(0.0, Direction::Minus, p.atoms().to_vec(), p.length(), p.boundary()).unwrap();
        (p, m)
    }

    #[test]
    fn lebesgue_resolvent() {
        let (p, m) = pair(1e-3, 20.0);
        let g00 = resolvent_full_line(&p, &m, 1.0, 0.0, 0.0).unwrap();
        assert!((g00 - 0.5).abs() < 1e-3);
        let g01 = resolvent_full_line(&p, &m, 1.0, 0.0, 1.0).unwrap();
        assert!((g01 - (-1f64).exp() / 2.0).abs() < 1e-3);
        let g10 = resolvent_full_line(&p, &m, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(g01, g10);
        let gm = resolvent_full_line(&p, &m, 1.0, -0.5, 0.7).unwrap();
        assert!((gm - (-1.2f64).exp() / 2.0).abs() < 1e-3);
        let hit = hitting_laplace(&p, &m, 1.0, 0.0, 1.0).unwrap();
        assert!((hit - (-1f64).exp()).abs() < 1e-3);
        assert!(resolvent_full_line(&p, &m, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn excursion_transform() {
        let (p, _) = pair(1e-3, 5.0);
        let v = excursion_hitting_laplace(&p, 1.0, 1.0).unwrap();
        assert!((v - 1.0 / 1f64.sinh()).abs() < 1e-3);
        assert!((excursion_hitting_laplace(&p, 1e-12, 1.0).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn v_inverse_round_trip() {
        let (p, m) = pair(0.01, 4.0);
        for r in [0.003, 0.05, 0.5, 3.0] {
            let eta = two_sided_v(&p, &m, r);
            assert!((two_sided_v_inverse(&p, &m, eta).unwrap() - r).abs() < 1e-12);
        }
        // Lebesgue: V(r) = r²
        assert!((two_sided_v(&p, &m, 2.0) - 4.0).abs() < 1e-3);
    }

    #[test]
    fn lebesgue_sandwich_holds() {
        let (p, m) = pair(1e-3, 20.0);
        let pts = hv_sandwich(&p, &m, 0.01, 5.0, 20).unwrap();
        assert_eq!(pts.len(), 20);
        assert!(pts.iter().all(|q| q.holds));
        // h = √η/2, V^{-1} = √η
        let q = pts[10];
        assert!((q.v_inverse / q.h - 2.0).abs() < 0.05);
    }
}
