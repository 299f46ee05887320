//! Monte Carlo cross-checks of the simulators against each other and
//! against the spectral engine.

use rand::Rng as _;
use rayon::prelude::*;

use super::Check;
use crate::diffusion::{ExcursionHarvester, ExcursionSet, ExitSampler, GapChain, InverseLocalTime, TimeChangeWalk};
use crate::error::{Error, Result};
use crate::krein::{to_string, two_sided_h, Boundary, Direction, StieltjesString};
use crate::measures::AtomicMeasure;
use crate::rng::{self, Rng};
use crate::stats::{geometric_grid, ks_two_sample, mean_se};

/// Replicas sharing one RNG stream.
const BATCH: usize = 256;

/// `n` independent draws of `f`, batched on derived streams of `seed`.
/// The output order and values do not depend on the thread count.
pub fn replicas<T: Send>(n: usize, seed: u64, f: impl Fn(&mut Rng) -> T + Sync) -> Vec<T> {
    (0..n.div_ceil(BATCH))
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(seed, 16 + b as u64);
            let len = BATCH.min(n - b * BATCH);
            (0..len).map(|_| f(&mut r)).collect::<Vec<T>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// The pair `m_{ν,a,±}` with each side running to its window edge, Neumann
/// at the far ends (the simulators reflect at the outermost atoms).
pub fn reflecting_strings(measure: &AtomicMeasure, a: f64) -> Result<(StieltjesString, StieltjesString)> {
    let (lo, hi) = measure.window();
    Ok((
        to_string(measure, a, Direction::Plus, hi - a, Boundary::NeumannAtEnd)?,
        to_string(measure, a, Direction::Minus, a - lo, Boundary::NeumannAtEnd)?,
    ))
}

/// KS distance between the time-`t` marginals of the gap diffusion and of
/// the time-changed walk, both started at the atom nearest `x0`.
pub fn oracle_ks(measure: &AtomicMeasure, x0: f64, t: f64, samples: usize, seed: u64, walk_step: f64) -> Result<f64> {
    let chain = GapChain::new(measure)?;
    let walk = TimeChangeWalk::new(measure, walk_step)?;
    let start = chain.nearest(x0);
    let pos = chain.positions();
    let gap = replicas(samples, rng::child_seed(seed, 0), |r| chain.position_at(start, t, r));
    let orc = replicas(samples, rng::child_seed(seed, 1), |r| pos[walk.run(start, t, r, |_| {})]);
    Ok(ks_two_sample(&gap, &orc))
}

/// Excursions from the atom nearest `a`, pooled over `paths` runs of
/// length `t`.
pub fn harvest(measure: &AtomicMeasure, a: f64, t: f64, paths: usize, seed: u64) -> Result<ExcursionSet> {
    let chain = GapChain::new(measure)?;
    let k = chain.nearest(a);
    let sets = replicas(paths, seed, |r| {
        let mut h = ExcursionHarvester::new(chain.positions(), chain.masses(), k)?;
        chain.run(k, t, r, |e| h.visit(e));
        h.finish()
    });
    let mut out = ExcursionSet {
        excursions: Vec::new(),
        anchor: chain.positions()[k],
        total_local_time: 0.0,
        discarded: 0,
        edge_contacts: 0,
    };
    for s in sets {
        let s = s?;
        out.excursions.extend(s.excursions);
        out.total_local_time += s.total_local_time;
        out.discarded += s.discarded;
        out.edge_contacts += s.edge_contacts;
    }
    Ok(out)
}

/// Empirical rate of excursions with `M ≥ d` on each side, times `d`, at
/// the atom distances `d` nearest a geometric grid over `[x_lo, x_hi]`
/// (exactly 1 in expectation). Returns `(d, d·rate_plus, d·rate_minus)`;
/// the minus side uses its own atom distances.
pub fn excursion_rates(set: &ExcursionSet, measure: &AtomicMeasure, x_lo: f64, x_hi: f64) -> Vec<(f64, f64, f64)> {
    let a = set.anchor;
    let atoms = measure.atoms();
    let plus = |x: f64| {
        let k = atoms.partition_point(|p| p.0 < a + x).min(atoms.len() - 1);
        atoms[k].0 - a
    };
    let minus = |x: f64| {
        let k = atoms.partition_point(|p| p.0 <= a - x);
        a - atoms[k.saturating_sub(1)].0
    };
    let mut out: Vec<(f64, f64, f64)> = geometric_grid(x_lo, x_hi, 8)
        .into_iter()
        .map(|x| {
            let (dp, dm) = (plus(x), minus(x));
            (dp, set.rate_max_at_least(dp, 1) * dp, set.rate_max_at_least(dm, -1) * dm)
        })
        .collect();
    out.dedup_by(|p, q| p.0 == q.0);
    out
}

/// KS distance between the argmax fractions `U` of the even-indexed
/// excursions and `1 − U` of the odd-indexed ones, restricted to
/// excursions reaching at least `min_max`.
pub fn time_reversal_ks(set: &ExcursionSet, min_max: f64) -> Result<(f64, usize)> {
    let u: Vec<f64> = set
        .excursions
        .iter()
        .filter(|e| e.max >= min_max && e.lifetime > 0.0)
        .map(|e| e.argmax_time / e.lifetime)
        .collect();
    if u.len() < 100 {
        return Err(Error::degenerate(format!("only {} excursions reach {min_max}", u.len())));
    }
    let even: Vec<f64> = u.iter().step_by(2).copied().collect();
    let odd: Vec<f64> = u.iter().skip(1).step_by(2).map(|v| 1.0 - v).collect();
    Ok((ks_two_sample(&even, &odd), u.len()))
}

/// Increments `ℓ(s + Δ) − ℓ(s)` of the inverse local time at the atom
/// nearest `a`: `blocks` per path over `paths` paths.
pub fn inverse_local_time_increments(
    measure: &AtomicMeasure,
    a: f64,
    delta: f64,
    blocks: usize,
    paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(delta > 0.0) {
        return Err(Error::invalid("Δ must be positive"));
    }
    let chain = GapChain::new(measure)?;
    let k = chain.nearest(a);
    let grid: Vec<f64> = (0..=blocks).map(|i| i as f64 * delta).collect();
    let per_path = replicas(paths, seed, |r| {
        let mut c = InverseLocalTime::new(k, chain.masses()[k], grid.clone())?;
        chain.run_while(k, r, |e| {
            c.visit(e);
            !c.done()
        });
        let l = c.finish()?;
        Ok::<Vec<f64>, Error>(l.windows(2).map(|w| w[1] - w[0]).collect())
    });
    let mut out = Vec::with_capacity(blocks * paths);
    for p in per_path {
        out.extend(p?);
    }
    Ok(out)
}

/// `(estimate, standard error, exact)` of `E e^{−λ ℓ(Δ)}` with the exact
/// value `exp(−Δ/h_{ν,a}(λ))` from the reflecting strings.
pub fn inverse_local_time_laplace(increments: &[f64], lambda: f64, delta: f64, strings: &(StieltjesString, StieltjesString)) -> Result<(f64, f64, f64)> {
    let vals: Vec<f64> = increments.iter().map(|x| (-lambda * x).exp()).collect();
    let (m, se) = mean_se(&vals);
    let h = two_sided_h(&strings.0, &strings.1, lambda)?;
    Ok((m, se, (-delta / h).exp()))
}

/// `P(H_target ≥ t)` from the atom `start` for the reflected gap diffusion:
/// `(fraction, standard error)`.
pub fn hitting_tail_mc(measure: &AtomicMeasure, start: usize, target: usize, t: f64, paths: usize, seed: u64) -> Result<(f64, f64)> {
    let chain = GapChain::new(measure)?;
    if start >= chain.len() || target >= chain.len() || start == target {
        return Err(Error::invalid("start and target must be distinct atoms"));
    }
    let survived = replicas(paths, seed, |r| {
        let mut alive = true;
        chain.run_while(start, r, |e| {
            if e.index as usize == target {
                alive = false;
                return false;
            }
            e.time + e.holding < t
        });
        if alive {
            1.0
        } else {
            0.0
        }
    });
    Ok(mean_se(&survived))
}

/// Exit times of `(a, b)` from `x0`.
pub fn exit_times(measure: &AtomicMeasure, a: f64, b: f64, x0: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let s = ExitSampler::new(measure, a, b)?;
    Ok(replicas(n, seed, |r| s.sample(x0, r)))
}

/// A uniform draw from `[lo, hi]` and a `ν`-weighted atom in the same range.
pub fn draw_anchor(measure: &AtomicMeasure, lo: f64, hi: f64, q: f64, rng: &mut Rng) -> Result<f64> {
    if q == 0.0 {
        return Ok(rng.gen_range(lo..hi));
    }
    let inner: Vec<(f64, f64)> = measure
        .atoms()
        .iter()
        .filter(|p| p.0 >= lo && p.0 <= hi)
        .map(|&(x, m)| (x, m.powf(q)))
        .collect();
    let total: f64 = inner.iter().map(|p| p.1).sum();
    if inner.is_empty() || !(total > 0.0) {
        return Err(Error::degenerate("no mass in the anchor range"));
    }
    let mut u = rng.gen::<f64>() * total;
    for &(x, w) in &inner {
        if u < w {
            return Ok(x);
        }
        u -= w;
    }
    Ok(inner[inner.len() - 1].0)
}

/// KS checks of the two simulators at the given times.
pub fn oracle_checks(measure: &AtomicMeasure, label: &str, times: &[f64], samples: usize, seed: u64) -> Result<Vec<Check>> {
    let pos: Vec<f64> = measure.positions().collect();
    let min_gap = pos.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let x0 = pos[measure.nearest_atom(0.0)];
    times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let d = oracle_ks(measure, x0, t, samples, rng::child_seed(seed, i as u64), min_gap / 4.0)?;
            Ok(Check::at_most(format!("{label}: KS gap vs time-change at t={t}"), "timechange", d, 0.05))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::build_lebesgue;

    #[test]
    fn replicas_are_thread_independent() {
        let f = |r: &mut Rng| r.gen::<f64>();
        let a = replicas(1000, 5, f);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| replicas(1000, 5, f));
        assert_eq!(a, b);
        assert_eq!(a.len(), 1000);
    }

    #[test]
    fn hitting_tail_matches_reflection_principle() {
        // P(H_1 > t) = erf(1/(2√t)) for var-2t motion started at 0
        let m = build_lebesgue(8.0, 0.125).unwrap();
        let s = m.nearest_atom(0.0625);
        let t = m.nearest_atom(1.0625);
        let (p, se) = hitting_tail_mc(&m, s, t, 1.0, 4000, 3).unwrap();
        let want = 0.520_499_877_8; // erf(0.5)
        assert!((p - want).abs() < 4.0 * se + 0.01, "{p} ± {se}");
    }

    #[test]
    fn anchors_in_range() {
        let m = build_lebesgue(2.0, 0.25).unwrap();
        let mut r = rng::stream(1, 0);
        for q in [0.0, 1.0] {
            let a = draw_anchor(&m, -1.0, 1.0, q, &mut r).unwrap();
            assert!((-1.0..=1.0).contains(&a));
        }
    }
}
