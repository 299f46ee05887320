//! Exact identities and sandwiches evaluated on fixed grids.

use std::f64::consts::FRAC_PI_2;

use rand::Rng as _;

use super::simulation::{exit_times, reflecting_strings};
use super::Check;
use crate::error::{Error, Result};
use crate::krein::{
    heat_kernel, hv_sandwich, kac_exit, spectral_decompose, spectral_decompose_full, spectral_decompose_line, survival,
    two_sided, Boundary, KernelMode, SpectralBc, StieltjesString,
};
use crate::measures::AtomicMeasure;
use crate::rng;
use crate::stats::gauss_legendre;

const QUADRATURE_NODES: usize = 256;

/// `max_t |∫_0^t p(u)S(t−u)du + c·S(t) + m(a)·p(t) − 1|` at the atom nearest
/// `a`, with `p = p(·;a,a)` on the line, `S = n(ζ > ·)` summed over both
/// sides, `c` the line offset and `m(a)` the anchor mass.
pub fn convolution_identity(measure: &AtomicMeasure, a: f64, ts: &[f64]) -> Result<f64> {
    let a = measure.atoms()[measure.nearest_atom(a)].0;
    let (plus, minus) = reflecting_strings(measure, a)?;
    let line = spectral_decompose_line(&plus, &minus, &[0.0], false)?;
    let sp = spectral_decompose(&plus, SpectralBc::DirichletAt0)?;
    let sm = spectral_decompose(&minus, SpectralBc::DirichletAt0)?;
    let anchor_mass = sp.offset + sm.offset;
    let p = |u: f64| heat_kernel(&line, KernelMode::ReflectingP, u, 0.0, 0.0);
    let s = |u: f64| -> Result<f64> { Ok(survival(&sp, u)? + survival(&sm, u)?) };
    let (nodes, weights) = gauss_legendre(QUADRATURE_NODES);
    let mut worst: f64 = 0.0;
    for &t in ts {
        if !(t > 0.0) {
            return Err(Error::invalid("convolution identity needs t > 0"));
        }
        // u = t sin²θ removes both endpoint singularities
        let mut conv = 0.0;
        for (z, w) in nodes.iter().zip(&weights) {
            let th = FRAC_PI_2 * (z + 1.0) / 2.0;
            let (sn, cs) = th.sin_cos();
            let u = t * sn * sn;
            conv += w * FRAC_PI_2 / 2.0 * 2.0 * t * sn * cs * p(u)? * s(t - u)?;
        }
        let total = conv + line.offset * s(t)? + anchor_mass * p(t)?;
        worst = worst.max((total - 1.0).abs());
    }
    Ok(worst)
}

/// Largest relative defect of `∫ π(t;z) q(u;z,y) m(dz) = π(t+u; y)` and of
/// Chapman–Kolmogorov `∫ p(t;x,z)p(u;z,y) m(dz) = p(t+u;x,y)` over random
/// strings with `atoms` atoms: `(entrance, chapman_kolmogorov)`.
pub fn random_string_kernels(count: usize, atoms: usize, seed: u64) -> Result<(f64, f64)> {
    let mut r = rng::stream(seed, 3);
    let (mut ent, mut ck): (f64, f64) = (0.0, 0.0);
    for _ in 0..count {
        let s = StieltjesString::random(&mut r, atoms, 0.05, 2.0, Boundary::NeumannAtEnd);
        let t = r.gen_range(0.1..2.0);
        let u = r.gen_range(0.1..2.0);
        let star = spectral_decompose_full(&s, SpectralBc::DirichletAt0)?;
        let refl = spectral_decompose_full(&s, SpectralBc::NeumannAt0)?;
        let (pos, mass) = star.sites();
        let y = pos[r.gen_range(0..pos.len())];
        let x = pos[r.gen_range(0..pos.len())];
        let mut lhs = 0.0;
        for (&z, &m) in pos.iter().zip(mass) {
            lhs += m
                * heat_kernel(&star, KernelMode::HittingPi, t, z, 0.0)?
                * heat_kernel(&star, KernelMode::AbsorbingQ, u, z, y)?;
        }
        let rhs = heat_kernel(&star, KernelMode::HittingPi, t + u, y, 0.0)?;
        ent = ent.max((lhs - rhs).abs() / rhs.abs().max(1.0));
        let (pos, mass) = refl.sites();
        let mut lhs = 0.0;
        for (&z, &m) in pos.iter().zip(mass) {
            lhs += m
                * heat_kernel(&refl, KernelMode::ReflectingP, t, x, z)?
                * heat_kernel(&refl, KernelMode::ReflectingP, u, z, y)?;
        }
        let rhs = heat_kernel(&refl, KernelMode::ReflectingP, t + u, x, y)?;
        ck = ck.max((lhs - rhs).abs() / rhs.abs().max(1.0));
    }
    Ok((ent, ck))
}

/// Fraction of random strings (up to `max_atoms` atoms) whose spectral
/// reconstruction lies inside the Dirichlet/Neumann bracket at
/// `λ ∈ {0.1, 1, 10}`.
pub fn reconstruction_in_bracket(count: usize, max_atoms: usize, seed: u64) -> Result<f64> {
    let mut r = rng::stream(seed, 4);
    let mut good = 0usize;
    for i in 0..count {
        let n = r.gen_range(1..=max_atoms);
        let bc = if i % 2 == 0 { Boundary::DirichletAtEnd } else { Boundary::NeumannAtEnd };
        let s = StieltjesString::random(&mut r, n, 0.05, 2.0, bc);
        let sig = spectral_decompose(&s, SpectralBc::NeumannAt0)?;
        let mut ok = true;
        for lam in [0.1, 1.0, 10.0] {
            let k = s.krein_h(lam)?;
            let other = k.neumann.unwrap_or(k.dirichlet);
            let (lo, hi) = (k.dirichlet.min(other), k.dirichlet.max(other));
            let hs = sig.h(lam);
            ok &= hs >= lo - 1e-9 * hi && hs <= hi + 1e-9 * hi;
        }
        good += usize::from(ok);
    }
    Ok(good as f64 / count as f64)
}

/// A random atomic measure on `[−l, l]` with `n` atoms, one of them at 0.
pub fn random_measure(rng: &mut rng::Rng, n: usize, l: f64) -> Result<AtomicMeasure> {
    let mut atoms: Vec<(f64, f64)> = (1..n.max(2))
        .map(|_| (rng.gen_range(-l..l), rng.gen_range(0.05..2.0)))
        .collect();
    atoms.push((0.0, rng.gen_range(0.05..2.0)));
    atoms.sort_by(|p, q| p.0.total_cmp(&q.0));
    atoms.dedup_by(|p, q| p.0 == q.0);
    AtomicMeasure::manual(atoms, l)
}

/// Sandwich (hv) and Kac–Krein verdicts for random measures on `[−1, 1]`:
/// `(hv holds on all, Kac–Krein holds on how many)`.
pub fn random_sandwiches(count: usize, atoms: usize, seed: u64) -> Result<(bool, usize)> {
    let mut r = rng::stream(seed, 5);
    let mut hv_all = true;
    let mut kk = 0usize;
    for _ in 0..count {
        let m = random_measure(&mut r, atoms, 1.0)?;
        let (plus, minus) = two_sided(&m, 0.0, 1.0, Boundary::NeumannAtEnd)?;
        hv_all &= hv_sandwich(&plus, &minus, 0.01, 1.0, 20)?.iter().all(|p| p.holds);
        kk += usize::from(kac_exit(&m, -1.0, 1.0, 2)?.kac_krein_holds());
    }
    Ok((hv_all, kk))
}

/// `measure` translated so that `a` sits at the origin.
fn recentred(measure: &AtomicMeasure, a: f64) -> Result<AtomicMeasure> {
    let atoms = measure.atoms().iter().map(|&(x, m)| (x - a, m)).collect();
    AtomicMeasure::manual(atoms, measure.half_length() + a.abs())
}

/// Budgets for the Monte Carlo part of [`identity_suite`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityBudget {
    pub exit_paths: usize,
    pub seed: u64,
}

/// Convolution identity, (hv), Kac–Krein and the exponential exit moment at
/// the atom nearest `a`, with exit interval `(a − 1, a + 1)`.
pub fn identity_suite(label: &str, measure: &AtomicMeasure, a: f64, budget: IdentityBudget) -> Result<Vec<Check>> {
    let a = measure.atoms()[measure.nearest_atom(a)].0;
    let mut out = Vec::new();

    let dev = convolution_identity(measure, a, &[0.5, 1.0, 2.0])?;
    out.push(Check::at_most(
        format!("{label}: convolution identity max |total-1| at t in {{0.5,1,2}}"),
        "identity",
        dev,
        1e-3,
    ));

    let (plus, minus) = reflecting_strings(measure, a)?;
    let r_hi = plus.length().min(minus.length()).min(1.0);
    let r_lo = (16.0 * measure.resolution()).min(r_hi / 10.0);
    let hv = hv_sandwich(&plus, &minus, r_lo, r_hi, 20)?;
    let worst = hv
        .iter()
        .map(|p| (p.v_inverse / p.h).max(0.0))
        .fold(f64::NAN, |acc: f64, v| if acc.is_nan() { v } else { acc.min(v) });
    let mut c = Check::holds(format!("{label}: (hv) 1/4 h(1/eta) <= V^-1(eta) at 20 eta"), "hv", hv.iter().all(|p| p.holds));
    c.estimate = worst;
    c.target = 0.25;
    c.pass = hv.iter().all(|p| p.holds);
    out.push(c);

    let shifted = recentred(measure, a)?;
    let e = kac_exit(&shifted, -1.0, 1.0, 160)?;
    let inv = 1.0 / e.lambda_min;
    let mut c = Check::close(
        format!(
            "{label}: Kac-Krein C~ <= 1/lambda_min <= 4C~ on (a-1,a+1) (C~={:.4})",
            e.c_tilde
        ),
        "kac-krein",
        inv,
        2.5 * e.c_tilde,
        1.5 * e.c_tilde,
    );
    c.pass = e.kac_krein_holds();
    out.push(c);

    // E e^{λH} at λ = 0.8/C: Monte Carlo with N and 2N paths against the
    // Kac series Σ λ^n E[H^n]/n!
    let lambda = 0.8 * e.exp_moment_bound;
    let mut series = 1.0;
    let mut ln_fact = 0.0;
    for (k, m) in e.moments.iter().enumerate() {
        let n = (k + 1) as f64;
        ln_fact += n.ln();
        series += (n * lambda.ln() + m.ln() - ln_fact).exp();
    }
    let n = budget.exit_paths;
    let h = exit_times(measure, a - 1.0, a + 1.0, a, 2 * n, rng::child_seed(budget.seed, 7))?;
    let vals: Vec<f64> = h.iter().map(|t| (lambda * t).exp()).collect();
    let half = vals[..n].iter().sum::<f64>() / n as f64;
    let full = vals.iter().sum::<f64>() / (2 * n) as f64;
    out.push(Check::relative(
        format!("{label}: E exp(0.8 H/C) stable under doubling ({n} -> {} paths)", 2 * n),
        "exit",
        full,
        half,
        0.10,
    ));
    out.push(Check::relative(
        format!("{label}: E exp(0.8 H/C) Monte Carlo vs Kac series"),
        "exit",
        full,
        series,
        0.10,
    ));
    let mean = h.iter().sum::<f64>() / h.len() as f64;
    out.push(Check::relative(
        format!("{label}: Monte Carlo E[H] vs Kac moment"),
        "exit",
        mean,
        e.moments[0],
        0.02,
    ));
    Ok(out)
}
