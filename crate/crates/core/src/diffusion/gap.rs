//! Exact event-driven simulation of the gap diffusion on the atoms.

use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::measures::AtomicMeasure;
use crate::rng::{self, Rng};

/// Nearest-neighbour jump chain with generator `(d/dm)(d/dx)`: from atom
/// `k` the walk jumps to `k±1` at rate `1/(m_k · gap)`. The outermost atoms
/// reflect.
#[derive(Debug, Clone)]
pub struct GapChain {
    pos: Arc<[f64]>,
    mass: Arc<[f64]>,
    rate_left: Vec<f64>,
    rate_right: Vec<f64>,
}

/// One sojourn: arrival at `index` at `time`, staying for `holding`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub index: u32,
    pub holding: f64,
}

impl GapChain {
    pub fn new(measure: &AtomicMeasure) -> Result<Self> {
        Self::from_atoms(measure.atoms())
    }

    pub fn from_atoms(atoms: &[(f64, f64)]) -> Result<Self> {
        if atoms.len() < 2 {
            return Err(Error::degenerate("gap diffusion needs at least two atoms"));
        }
        let n = atoms.len();
        let pos: Vec<f64> = atoms.iter().map(|a| a.0).collect();
        let mass: Vec<f64> = atoms.iter().map(|a| a.1).collect();
        let mut rate_left = vec![0.0; n];
        let mut rate_right = vec![0.0; n];
        for k in 0..n {
            if k > 0 {
                rate_left[k] = 1.0 / (mass[k] * (pos[k] - pos[k - 1]));
            }
            if k + 1 < n {
                rate_right[k] = 1.0 / (mass[k] * (pos[k + 1] - pos[k]));
            }
        }
        Ok(GapChain {
            pos: pos.into(),
            mass: mass.into(),
            rate_left,
            rate_right,
        })
    }

    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.pos
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn nearest(&self, x: f64) -> usize {
        let i = self.pos.partition_point(|&p| p < x);
        if i == 0 {
            0
        } else if i == self.pos.len() || x - self.pos[i - 1] <= self.pos[i] - x {
            i - 1
        } else {
            i
        }
    }

    /// Holding time at `k` and the next atom.
    #[inline]
    pub fn step(&self, k: usize, rng: &mut Rng) -> (f64, usize) {
        let (l, r) = (self.rate_left[k], self.rate_right[k]);
        let total = l + r;
        let e: f64 = Exp1.sample(rng);
        let next = if rng.gen::<f64>() * total < l { k - 1 } else { k + 1 };
        (e / total, next)
    }

    /// Run from `start` until time `t_end`, handing every sojourn to `visit`
    /// (the last one truncated at `t_end`). Returns the final atom.
    pub fn run(&self, start: usize, t_end: f64, rng: &mut Rng, mut visit: impl FnMut(Event)) -> usize {
        let mut t = 0.0;
        let mut k = start;
        loop {
            let (hold, next) = self.step(k, rng);
            if t + hold >= t_end {
                visit(Event {
                    time: t,
                    index: k as u32,
                    holding: t_end - t,
                });
                return k;
            }
            visit(Event {
                time: t,
                index: k as u32,
                holding: hold,
            });
            t += hold;
            k = next;
        }
    }

    /// Run from `start` for as long as `visit` returns true. Returns the
    /// atom of the last sojourn handed out.
    pub fn run_while(&self, start: usize, rng: &mut Rng, mut visit: impl FnMut(Event) -> bool) -> usize {
        let mut t = 0.0;
        let mut k = start;
        loop {
            let (hold, next) = self.step(k, rng);
            if !visit(Event {
                time: t,
                index: k as u32,
                holding: hold,
            }) {
                return k;
            }
            t += hold;
            k = next;
        }
    }

    /// Position at time `t` only.
    pub fn position_at(&self, start: usize, t: f64, rng: &mut Rng) -> f64 {
        let mut time = 0.0;
        let mut k = start;
        loop {
            let (hold, next) = self.step(k, rng);
            time += hold;
            if time >= t {
                return self.pos[k];
            }
            k = next;
        }
    }
}

/// A stored trajectory with per-atom occupation times.
#[derive(Debug, Clone)]
pub struct PathRecord {
    pub event_times: Vec<f64>,
    pub atom_indices: Vec<u32>,
    pub holding: Vec<f64>,
    /// Total time spent at each atom.
    pub occupation: Vec<f64>,
    pub total_time: f64,
    pub seed: u64,
    /// Requested start when it was not an atom.
    pub snapped_from: Option<f64>,
    positions: Arc<[f64]>,
    masses: Arc<[f64]>,
}

impl PathRecord {
    /// `L(T, x_k)` = time at atom `k` divided by its mass.
    pub fn local_time(&self, k: usize) -> f64 {
        self.occupation[k] / self.masses[k]
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.event_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.event_times.is_empty()
    }

    /// Index of the atom at position `x`, if any.
    pub fn atom_index(&self, x: f64) -> Option<usize> {
        let i = self.positions.partition_point(|&p| p < x);
        (i < self.positions.len() && self.positions[i] == x).then_some(i)
    }

    /// Events with their holding times, for streaming consumers.
    pub fn events(&self) -> impl Iterator<Item = Event> + '_ {
        (0..self.len()).map(|i| Event {
            time: self.event_times[i],
            index: self.atom_indices[i],
            holding: self.holding[i],
        })
    }

    pub(crate) fn from_parts(
        chain: &GapChain,
        events: Vec<Event>,
        total_time: f64,
        seed: u64,
        snapped_from: Option<f64>,
    ) -> Self {
        let mut occupation = vec![0.0; chain.len()];
        for e in &events {
            occupation[e.index as usize] += e.holding;
        }
        PathRecord {
            event_times: events.iter().map(|e| e.time).collect(),
            atom_indices: events.iter().map(|e| e.index).collect(),
            holding: events.iter().map(|e| e.holding).collect(),
            occupation,
            total_time,
            seed,
            snapped_from,
            positions: chain.pos.clone(),
            masses: chain.mass.clone(),
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("T = {t} must be positive and finite")));
    }
    Ok(())
}

/// Exact path of the atomic diffusion on `[0, T]` started at (the atom
/// nearest to) `x0`.
pub fn simulate_gap_diffusion(measure: &AtomicMeasure, x0: f64, t: f64, seed: u64) -> Result<PathRecord> {
    check_time(t)?;
    let chain = GapChain::new(measure)?;
    let start = chain.nearest(x0);
    let snapped = (chain.pos[start] != x0).then_some(x0);
    let mut rng = rng::stream(seed, 0);
    let mut events = Vec::new();
    chain.run(start, t, &mut rng, |e| events.push(e));
    Ok(PathRecord::from_parts(&chain, events, t, seed, snapped))
}

/// Exit time of `(a, b)` from `x0` for the atomic diffusion, with `a` and
/// `b` absorbing. A start off the atoms first moves to a neighbour with
/// the harmonic (natural-scale) probabilities, taking no time.
#[derive(Debug, Clone)]
pub struct ExitSampler {
    pos: Vec<f64>,
    rate_left: Vec<f64>,
    rate_right: Vec<f64>,
    a: f64,
    b: f64,
}

impl ExitSampler {
    pub fn new(measure: &AtomicMeasure, a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::invalid("need a < b"));
        }
        let atoms: Vec<(f64, f64)> = measure.atoms().iter().copied().filter(|&(x, _)| x > a && x < b).collect();
        if atoms.is_empty() {
            return Err(Error::degenerate("no atoms inside the exit interval"));
        }
        let n = atoms.len();
        let pos: Vec<f64> = atoms.iter().map(|p| p.0).collect();
        let rate_left = (0..n)
            .map(|k| 1.0 / (atoms[k].1 * (pos[k] - if k == 0 { a } else { pos[k - 1] })))
            .collect();
        let rate_right = (0..n)
            .map(|k| 1.0 / (atoms[k].1 * (if k + 1 == n { b } else { pos[k + 1] } - pos[k])))
            .collect();
        Ok(ExitSampler {
            pos,
            rate_left,
            rate_right,
            a,
            b,
        })
    }

    pub fn sample(&self, x0: f64, rng: &mut Rng) -> f64 {
        let n = self.pos.len() as isize;
        let i = self.pos.partition_point(|&p| p < x0);
        let mut k: isize = if i < self.pos.len() && self.pos[i] == x0 {
            i as isize
        } else {
            let left = if i == 0 { self.a } else { self.pos[i - 1] };
            let right = if i == self.pos.len() { self.b } else { self.pos[i] };
            if rng.gen::<f64>() * (right - left) < right - x0 {
                i as isize - 1
            } else {
                i as isize
            }
        };
        let mut t = 0.0;
        while k >= 0 && k < n {
            let ku = k as usize;
            let (l, r) = (self.rate_left[ku], self.rate_right[ku]);
            let e: f64 = Exp1.sample(rng);
            t += e / (l + r);
            k += if rng.gen::<f64>() * (l + r) < l { -1 } else { 1 };
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::build_lebesgue;

    #[test]
    fn path_invariants() {
        let m = build_lebesgue(1.0, 0.1).unwrap();
        let x0 = m.atoms()[10].0;
        let p = simulate_gap_diffusion(&m, x0, 5.0, 3).unwrap();
        assert!(p.snapped_from.is_none());
        for w in p.event_times.windows(2) {
            assert!(w[1] > w[0]);
        }
        for w in p.atom_indices.windows(2) {
            assert_eq!((w[1] as i64 - w[0] as i64).abs(), 1);
        }
        let total: f64 = p.occupation.iter().sum();
        assert!((total - 5.0).abs() < 1e-12);
        // occupation identity with f = position
        let lhs: f64 = p.events().map(|e| p.positions()[e.index as usize] * e.holding).sum();
        let rhs: f64 = (0..m.len()).map(|k| p.positions()[k] * p.local_time(k) * p.masses()[k]).sum();
        assert!((lhs - rhs).abs() < 1e-12);
        let q = simulate_gap_diffusion(&m, x0, 5.0, 3).unwrap();
        assert_eq!(p.event_times, q.event_times);
        assert_eq!(simulate_gap_diffusion(&m, 0.0, 1.0, 1).unwrap().snapped_from, Some(0.0));
    }

    #[test]
    fn two_atom_holding_mean() {
        let m = AtomicMeasure::manual(vec![(0.0, 2.0), (1.0, 0.5)], 1.0).unwrap();
        let p = simulate_gap_diffusion(&m, 0.0, 40_000.0, 9).unwrap();
        let holds: Vec<f64> = p.events().filter(|e| e.index == 0).map(|e| e.holding).collect();
        let mean = holds.iter().sum::<f64>() / holds.len() as f64;
        assert!(holds.len() > 9_000);
        assert!((mean - 2.0).abs() < 0.04 * 2.0, "{mean}");
    }

    #[test]
    fn too_few_atoms() {
        let m = AtomicMeasure::manual(vec![(0.0, 1.0)], 1.0).unwrap();
        assert!(matches!(simulate_gap_diffusion(&m, 0.0, 1.0, 1), Err(Error::DegenerateInput(_))));
        let l = build_lebesgue(1.0, 0.1).unwrap();
        assert!(simulate_gap_diffusion(&l, 0.0, -1.0, 1).is_err());
    }
}
