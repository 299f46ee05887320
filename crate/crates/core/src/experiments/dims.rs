//! Spectral slopes at an anchor: level-set dimension, the short-time
//! exponent of `p(t;a,a)` by two routes, and the excursion-lifetime tail.

use super::simulation::reflecting_strings;
use crate::error::{Error, Result};
use crate::krein::{
    spectral_decompose, survival, two_sided_h, two_sided_v, two_sided_v_inverse, SpectralBc, StieltjesString,
};
use crate::measures::{scaling_stats, AtomicMeasure};
use crate::stats::{geometric_grid, ols};

/// λ-grid density for all spectral slope fits.
const PER_DECADE: usize = 8;

/// Radius range `[16ε, 1]` for the local `α̂` that sets the window; below
/// a few cells the midpoint quantization dominates.
const ALPHA_R_MIN_CELLS: f64 = 16.0;
const ALPHA_R_MAX: f64 = 1.0;

/// The two strings at `a`, each running to its own window edge.
fn strings_at(measure: &AtomicMeasure, a: f64) -> Result<(StieltjesString, StieltjesString)> {
    let (lo, hi) = measure.window();
    if !(a > lo && a < hi) {
        return Err(Error::invalid(format!("anchor {a} is not interior to the window")));
    }
    reflecting_strings(measure, a)
}

/// Local `α̂` at `a`: `scaling_stats` slope over `[16ε, min(1, room)]`.
pub fn local_alpha(measure: &AtomicMeasure, a: f64) -> Result<f64> {
    let (lo, hi) = measure.window();
    let eps = measure.resolution();
    let r_max = ALPHA_R_MAX.min(hi - a).min(a - lo);
    let r_min = ALPHA_R_MIN_CELLS * eps;
    if !(r_max > 2.0 * r_min) {
        return Err(Error::invalid(format!("anchor {a} too close to the window edge")));
    }
    Ok(scaling_stats(measure, a, r_min, r_max)?.alpha_hat)
}

/// Trusted λ range `[1, 0.1·ε^{-(1+α̂)}]` and the hard limit
/// `ε^{-(1+α̂)}` beyond which slopes are refused.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolutionWindow {
    pub alpha_hat: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub lambda_max: f64,
}

pub fn resolution_window(measure: &AtomicMeasure, a: f64) -> Result<ResolutionWindow> {
    let alpha_hat = local_alpha(measure, a)?;
    let eps = measure.resolution();
    let lambda_max = eps.powf(-(1.0 + alpha_hat));
    if !(lambda_max > 10.0) {
        return Err(Error::invalid(format!(
            "resolution ε = {eps} leaves no usable λ range (ε^-(1+α̂) = {lambda_max})"
        )));
    }
    Ok(ResolutionWindow {
        alpha_hat,
        lambda_lo: 1.0,
        lambda_hi: 0.1 * lambda_max,
        lambda_max,
    })
}

fn checked_range(w: &ResolutionWindow, lambda_lo: f64, lambda_hi: f64) -> Result<()> {
    if !(lambda_lo >= w.lambda_lo && lambda_lo < lambda_hi && lambda_hi <= w.lambda_max) {
        return Err(Error::invalid(format!(
            "λ range [{lambda_lo}, {lambda_hi}] outside the resolution window [1, {}]",
            w.lambda_max
        )));
    }
    Ok(())
}

/// Slope of `−log h_{ν,a}(λ)` against `log λ` on `[lambda_lo, lambda_hi]`.
pub fn level_set_dimension(measure: &AtomicMeasure, a: f64, lambda_lo: f64, lambda_hi: f64) -> Result<f64> {
    let w = resolution_window(measure, a)?;
    checked_range(&w, lambda_lo, lambda_hi)?;
    let (plus, minus) = strings_at(measure, a)?;
    h_slope(&plus, &minus, lambda_lo, lambda_hi)
}

fn h_slope(plus: &StieltjesString, minus: &StieltjesString, lambda_lo: f64, lambda_hi: f64) -> Result<f64> {
    let grid = geometric_grid(lambda_lo, lambda_hi, PER_DECADE);
    let mut xs = Vec::with_capacity(grid.len());
    let mut ys = Vec::with_capacity(grid.len());
    for &l in &grid {
        xs.push(l.ln());
        ys.push(-two_sided_h(plus, minus, l)?.ln());
    }
    Ok(ols(&xs, &ys)?.slope)
}

/// Both estimates of the critical exponent of `∫_{0+} t^{-β} p(t;a,a) dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortTime {
    /// Route (i): the `h` slope over the trusted window.
    pub via_h: f64,
    /// Route (ii): zero crossing of the growth rate of `∫_x V^{-β}`.
    pub via_integral: f64,
    pub window: ResolutionWindow,
    /// `(β, growth rate)` pairs of route (ii).
    pub growth: Vec<(f64, f64)>,
}

/// `∫_{x0}^{x1} V(x)^{-β} dx`, exact on the linear pieces of `V`.
fn v_power_integral(plus: &StieltjesString, minus: &StieltjesString, beta: f64, x0: f64, x1: f64) -> f64 {
    let mut knots: Vec<f64> = plus
        .atoms()
        .iter()
        .chain(minus.atoms())
        .map(|p| p.0)
        .filter(|&x| x > x0 && x < x1)
        .collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let mut total = 0.0;
    let mut left = x0;
    for right in knots.into_iter().chain(std::iter::once(x1)) {
        let (va, vb) = (two_sided_v(plus, minus, left), two_sided_v(plus, minus, right));
        let slope = (vb - va) / (right - left);
        total += if slope <= 0.0 || (vb - va) <= 1e-14 * va {
            (right - left) * va.powf(-beta)
        } else if (beta - 1.0).abs() < 1e-12 {
            (vb / va).ln() / slope
        } else {
            (vb.powf(1.0 - beta) - va.powf(1.0 - beta)) / (slope * (1.0 - beta))
        };
        left = right;
    }
    total
}

pub fn short_time_exponent(measure: &AtomicMeasure, a: f64) -> Result<ShortTime> {
    let w = resolution_window(measure, a)?;
    let (plus, minus) = strings_at(measure, a)?;
    let via_h = h_slope(&plus, &minus, w.lambda_lo, w.lambda_hi)?;
    // the radii that the trusted λ range resolves
    let x_lo = two_sided_v_inverse(&plus, &minus, 1.0 / w.lambda_hi)?;
    let x_hi = two_sided_v_inverse(&plus, &minus, 1.0 / w.lambda_lo)?.min(plus.length()).min(minus.length());
    if !(x_hi > 10.0 * x_lo) {
        return Err(Error::degenerate("resolved radius range is narrower than a decade"));
    }
    // shell contributions S_k = ∫ V^{-β} over [x_{k+1}, x_k]; the sum is
    // finite iff S_k shrinks as x_k → 0, i.e. the growth rate is negative
    let cutoffs = geometric_grid(x_lo, x_hi, PER_DECADE);
    let mids: Vec<f64> = cutoffs.windows(2).map(|w| -(w[0] * w[1]).sqrt().ln()).collect();
    let mut growth = Vec::new();
    for i in 0..=56 {
        let beta = 0.1 + 0.025 * i as f64;
        let shells: Vec<f64> = cutoffs
            .windows(2)
            .map(|w| v_power_integral(&plus, &minus, beta, w[0], w[1]).ln())
            .collect();
        growth.push((beta, ols(&mids, &shells)?.slope));
    }
    let via_integral = crossing(&growth)?;
    Ok(ShortTime {
        via_h,
        via_integral,
        window: w,
        growth,
    })
}

/// First sign change of the growth rate, linearly interpolated.
fn crossing(growth: &[(f64, f64)]) -> Result<f64> {
    growth
        .windows(2)
        .find(|w| w[0].1 < 0.0 && w[1].1 >= 0.0)
        .map(|w| w[0].0 + (w[1].0 - w[0].0) * (-w[0].1) / (w[1].1 - w[0].1))
        .ok_or_else(|| Error::degenerate("shell growth does not change sign on the β grid"))
}

/// Slope of `log n(ζ > t)` against `−log t` for `t ∈ [1/λ_hi, 1/λ_lo]`, with
/// `n = n_+ + n_−` from the absorbed decompositions of both sides.
pub fn excursion_short_time(measure: &AtomicMeasure, a: f64) -> Result<f64> {
    let w = resolution_window(measure, a)?;
    let (plus, minus) = strings_at(measure, a)?;
    let sp = spectral_decompose(&plus, SpectralBc::DirichletAt0)?;
    let sm = spectral_decompose(&minus, SpectralBc::DirichletAt0)?;
    let grid = geometric_grid(1.0 / w.lambda_hi, 1.0 / w.lambda_lo, PER_DECADE);
    let mut xs = Vec::with_capacity(grid.len());
    let mut ys = Vec::with_capacity(grid.len());
    for &t in &grid {
        xs.push(-t.ln());
        ys.push((survival(&sp, t)? + survival(&sm, t)?).ln());
    }
    Ok(ols(&xs, &ys)?.slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krein::Boundary;
    use crate::measures::build_lebesgue;

    #[test]
    fn lebesgue_slopes() {
        let m = build_lebesgue(4.0, 1.0 / 256.0).unwrap();
        let a = m.atoms()[1000].0;
        let w = resolution_window(&m, a).unwrap();
        assert!((w.alpha_hat - 1.0).abs() < 1e-2, "{w:?}");
        let d = level_set_dimension(&m, a, w.lambda_lo, w.lambda_hi).unwrap();
        assert!((d - 0.5).abs() < 0.02, "{d}");
        let st = short_time_exponent(&m, a).unwrap();
        assert!((st.via_integral - 0.5).abs() < 0.03, "{st:?}");
        let e = excursion_short_time(&m, a).unwrap();
        assert!((e - 0.5).abs() < 0.03, "{e}");
        assert!(level_set_dimension(&m, a, 0.5, 10.0).is_err());
        assert!(level_set_dimension(&m, a, 1.0, 10.0 * w.lambda_max).is_err());
    }

    #[test]
    fn v_integral_matches_closed_form() {
        // V(x) = 2x on the linear piece past the last atom of a unit atom at 0
        let p = StieltjesString::new(vec![(0.0, 1.0)], 4.0, Boundary::NeumannAtEnd).unwrap();
        let q = p.clone();
        let got = v_power_integral(&p, &q, 0.5, 1.0, 4.0);
        let want = (2.0f64 * 4.0).sqrt() - 2.0f64.sqrt();
        assert!((got - want).abs() < 1e-12);
    }
}
