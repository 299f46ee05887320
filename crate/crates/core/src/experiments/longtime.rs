//! Long-time ratio statistics against the Lebesgue measure on the same
//! window and grid.

use super::simulation::{hitting_tail_mc, reflecting_strings};
use super::{Check, Series};
use crate::error::{Error, Result};
use crate::krein::{
    heat_kernel, spectral_decompose, spectral_decompose_at, spectral_decompose_line, to_string, Boundary, Direction,
    KernelMode, SpectralBc,
};
use crate::measures::{build_lebesgue, AtomicMeasure};
use crate::rng;
use crate::stats::geometric_grid;

/// Ratios are only read once `√(2t)` exceeds a few correlation lengths.
pub const T_MIX: f64 = 16.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LongtimeSetup {
    /// Ascending times inside `[T_MIX, t_edge]`.
    pub t_grid: Vec<f64>,
    /// Hitting target sits this far to the right of the anchor.
    pub hit_distance: f64,
    pub mc_paths: usize,
    /// Time at which the spectral hitting tail is checked by Monte Carlo.
    pub mc_time: f64,
    pub seed: u64,
    /// Relative tolerance on the ratio targets.
    pub tol: f64,
}

impl LongtimeSetup {
    /// Four times per decade from `T_MIX` to the edge time of `(measure, a)`.
    pub fn default_for(measure: &AtomicMeasure, a: f64, mc_paths: usize, seed: u64) -> Result<Self> {
        let a = measure.atoms()[measure.nearest_atom(a)].0;
        let t_edge = edge_time(measure, a)?;
        if !(t_edge > 2.0 * T_MIX) {
            return Err(Error::invalid(format!("window too small for long-time ratios (t_edge = {t_edge})")));
        }
        Ok(LongtimeSetup {
            t_grid: geometric_grid(T_MIX, t_edge, 4),
            hit_distance: 1.0,
            mc_paths,
            mc_time: T_MIX,
            seed,
            tol: 0.10,
        })
    }
}

/// `room²/8`, where reflections off the window edge are `e^{-8}` effects.
pub fn edge_time(measure: &AtomicMeasure, a: f64) -> Result<f64> {
    let (lo, hi) = measure.window();
    let room = (a - lo).min(hi - a);
    if !(room > 0.0) {
        return Err(Error::invalid("anchor outside the window"));
    }
    Ok(room * room / 8.0)
}

fn grid_spacing(measure: &AtomicMeasure) -> Result<f64> {
    if let Some(d) = measure.meta().grid_spacing {
        return Ok(d);
    }
    let pos: Vec<f64> = measure.positions().collect();
    let d = pos.get(1).map(|p| p - pos[0]).unwrap_or(0.0);
    if !(d > 0.0) || pos.windows(2).any(|w| ((w[1] - w[0]) / d - 1.0).abs() > 1e-9) {
        return Err(Error::invalid("long-time ratios need a measure on a uniform grid"));
    }
    Ok(d)
}

/// Spectral `p(t;a,a)`, `n(t)` and `P^a(H_b ≥ t)` on a time grid.
struct Curves {
    p: Vec<f64>,
    n: Vec<f64>,
    tail: Vec<f64>,
}

fn curves(measure: &AtomicMeasure, a: f64, b: f64, ts: &[f64]) -> Result<Curves> {
    let (lo, _) = measure.window();
    let (plus, minus) = reflecting_strings(measure, a)?;
    let line = spectral_decompose_line(&plus, &minus, &[0.0], false)?;
    let np = spectral_decompose(&plus, SpectralBc::DirichletAt0)?;
    let nm = spectral_decompose(&minus, SpectralBc::DirichletAt0)?;
    // absorbed at b, reflected at the left edge; the start sits at b − a
    let from_b = to_string(measure, b, Direction::Minus, b - lo, Boundary::NeumannAtEnd)?;
    let hit = spectral_decompose_at(&from_b, SpectralBc::DirichletAt0, &[b - a])?;
    let u = hit.modes_at(b - a)?;
    let mut out = Curves {
        p: Vec::new(),
        n: Vec::new(),
        tail: Vec::new(),
    };
    for &t in ts {
        out.p.push(heat_kernel(&line, KernelMode::ReflectingP, t, 0.0, 0.0)?);
        out.n.push(heat_kernel(&np, KernelMode::LevyN, t, 0.0, 0.0)? + heat_kernel(&nm, KernelMode::LevyN, t, 0.0, 0.0)?);
        let tail: f64 = hit
            .pairs
            .iter()
            .zip(&u)
            .zip(&hit.boundary_data)
            .map(|((&(xi, _), &uj), &dj)| (-t * xi).exp() * uj * dj / xi)
            .sum();
        out.tail.push(tail);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LongtimeRatios {
    pub z_hat: f64,
    pub t: Vec<f64>,
    pub r_p: Vec<f64>,
    pub r_n: Vec<f64>,
    pub r_h: Vec<f64>,
    /// Monte Carlo and spectral `P^a(H_b ≥ mc_time)` for the measure.
    pub mc_tail: (f64, f64),
    pub spectral_tail_at_mc: f64,
    /// Monte Carlo `R_H(mc_time)` with its standard error.
    pub mc_ratio: (f64, f64),
}

/// `R_p`, `R_n`, `R_H` of `measure` at the atom nearest `a` against Lebesgue
/// on the same window and grid (anchor and target at the same atoms).
pub fn longtime_ratios(measure: &AtomicMeasure, a: f64, setup: &LongtimeSetup) -> Result<LongtimeRatios> {
    let a = measure.atoms()[measure.nearest_atom(a)].0;
    let t_edge = edge_time(measure, a)?;
    let ts = &setup.t_grid;
    if ts.is_empty() || ts[0] < T_MIX || ts[ts.len() - 1] > t_edge * (1.0 + 1e-9) || ts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(format!(
            "t grid must be ascending inside [{T_MIX}, {t_edge}]"
        )));
    }
    if !(setup.mc_time > 0.0 && setup.mc_time <= t_edge) {
        return Err(Error::invalid("Monte Carlo time outside the validity window"));
    }
    let reference = build_lebesgue(measure.half_length(), grid_spacing(measure)?)?;
    if reference.len() != measure.len() {
        return Err(Error::invalid("measure grid does not match the Lebesgue grid of its window"));
    }
    let ib = measure.nearest_atom(a + setup.hit_distance);
    let b = measure.atoms()[ib].0;
    let ia = measure.nearest_atom(a);
    let mut all_t = ts.clone();
    all_t.push(setup.mc_time);
    let nu = curves(measure, a, b, &all_t)?;
    let leb = curves(&reference, a, b, &all_t)?;
    let k = ts.len();
    let ratio = |x: &[f64], y: &[f64]| -> Vec<f64> { x[..k].iter().zip(&y[..k]).map(|(p, q)| p / q).collect() };

    let s_nu = rng::child_seed(setup.seed, 1);
    let s_leb = rng::child_seed(setup.seed, 2);
    let (p_nu, se_nu) = hitting_tail_mc(measure, ia, ib, setup.mc_time, setup.mc_paths, s_nu)?;
    let (p_leb, se_leb) = hitting_tail_mc(&reference, ia, ib, setup.mc_time, setup.mc_paths, s_leb)?;
    let r = p_nu / p_leb;
    let r_se = r * ((se_nu / p_nu).powi(2) + (se_leb / p_leb).powi(2)).sqrt();

    Ok(LongtimeRatios {
        z_hat: measure.total_mass() / (2.0 * measure.half_length()),
        t: ts.clone(),
        r_p: ratio(&nu.p, &leb.p),
        r_n: ratio(&nu.n, &leb.n),
        r_h: ratio(&nu.tail, &leb.tail),
        mc_tail: (p_nu, se_nu),
        spectral_tail_at_mc: nu.tail[k],
        mc_ratio: (r, r_se),
    })
}

/// Checks at the largest valid `t`: `R_p, R_n → 1/√Ẑ`, `R_H → Ẑ`, the
/// exact-scaling companions `R_n, R_H → √Ẑ`, and Monte Carlo confirmation
/// of the spectral hitting tail.
pub fn longtime_checks(
    label: &str,
    measure: &AtomicMeasure,
    a: f64,
    setup: &LongtimeSetup,
) -> Result<(Vec<Check>, Vec<Series>)> {
    let r = longtime_ratios(measure, a, setup)?;
    let last = r.t.len() - 1;
    let t = r.t[last];
    let z = r.z_hat;
    let tol = setup.tol;
    let (mc, se) = r.mc_tail;
    let checks = vec![
        Check::relative(format!("{label}: R_p(t={t:.0}) -> 1/sqrt(Z)"), "ltt", r.r_p[last], 1.0 / z.sqrt(), tol),
        Check::relative(format!("{label}: R_n(t={t:.0}) -> 1/sqrt(Z)"), "ellong", r.r_n[last], 1.0 / z.sqrt(), tol),
        Check::relative(format!("{label}: R_H(t={t:.0}) -> Z"), "lth", r.r_h[last], z, tol),
        Check::relative(format!("{label}: R_n(t={t:.0}) -> sqrt(Z) (exact mass scaling)"), "ellong", r.r_n[last], z.sqrt(), tol),
        Check::relative(format!("{label}: R_H(t={t:.0}) -> sqrt(Z) (exact mass scaling)"), "lth", r.r_h[last], z.sqrt(), tol),
        Check::close(
            format!("{label}: Monte Carlo hitting tail at t={} vs spectral (4 SE + 0.005)", setup.mc_time),
            "lth",
            mc,
            r.spectral_tail_at_mc,
            4.0 * se + 0.005,
        ),
    ];
    let series = vec![
        Series {
            name: format!("{label}.R_p"),
            points: r.t.iter().copied().zip(r.r_p.iter().copied()).collect(),
        },
        Series {
            name: format!("{label}.R_n"),
            points: r.t.iter().copied().zip(r.r_n.iter().copied()).collect(),
        },
        Series {
            name: format!("{label}.R_H"),
            points: r.t.iter().copied().zip(r.r_h.iter().copied()).collect(),
        },
    ];
    Ok((checks, series))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lebesgue_against_itself_and_scaled() {
        let m = build_lebesgue(32.0, 0.25).unwrap();
        let a = 0.0;
        let setup = LongtimeSetup::default_for(&m, a, 2000, 1).unwrap();
        let r = longtime_ratios(&m, a, &setup).unwrap();
        let ones = r.r_p.iter().chain(&r.r_n).chain(&r.r_h);
        assert!(ones.into_iter().all(|v| (v - 1.0).abs() < 1e-12));
        let four = m.scaled(4.0).unwrap();
        let r4 = longtime_ratios(&four, a, &setup).unwrap();
        let last = r4.t.len() - 1;
        assert!((r4.z_hat - 4.0).abs() < 1e-9);
        assert!((r4.r_p[last] - 0.5).abs() < 0.01, "{:?}", r4.r_p);
        assert!((r4.r_n[last] - 2.0).abs() < 0.02, "{:?}", r4.r_n);
        assert!((r4.r_h[last] - 2.0).abs() < 0.05, "{:?}", r4.r_h);
        // tail at t → 0 is 1
        let tiny = curves(&m, m.atoms()[m.nearest_atom(0.0)].0, m.atoms()[m.nearest_atom(1.0)].0, &[1e-9]).unwrap();
        assert!((tiny.tail[0] - 1.0).abs() < 1e-6, "{}", tiny.tail[0]);
        assert!((r.mc_tail.0 - r.spectral_tail_at_mc).abs() < 4.0 * r.mc_tail.1 + 0.005);
    }
}
