//! Independent oracle: a fine simple random walk time-changed by the
//! additive functional `A_ν(t) = ∫ L(t, x) ν(dx)`.

use rand::RngCore;

use super::gap::{Event, GapChain, PathRecord};
use crate::error::{Error, Result};
use crate::measures::AtomicMeasure;
use crate::rng::{self, Rng};

/// Walk lattice with the atoms snapped onto it.
#[derive(Debug, Clone)]
pub struct TimeChangeWalk {
    chain: GapChain,
    /// Atom index at each lattice site, or −1.
    site_atom: Vec<i32>,
    atom_site: Vec<usize>,
    /// `m · h / 2`: the additive-functional increment per visit.
    increment: Vec<f64>,
}

impl TimeChangeWalk {
    pub fn new(measure: &AtomicMeasure, walk_step: f64) -> Result<Self> {
        let chain = GapChain::new(measure)?;
        let pos = chain.positions();
        let min_gap = pos.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        if !(walk_step > 0.0) || walk_step > min_gap * (1.0 + 1e-9) {
            return Err(Error::invalid(format!(
                "walk step {walk_step} must be positive and at most the minimal gap {min_gap}"
            )));
        }
        let atom_site: Vec<usize> = pos.iter().map(|&p| ((p - pos[0]) / walk_step).round() as usize).collect();
        if atom_site.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("walk step too coarse: two atoms share a lattice site"));
        }
        let mut site_atom = vec![-1i32; atom_site[atom_site.len() - 1] + 1];
        for (k, &s) in atom_site.iter().enumerate() {
            site_atom[s] = k as i32;
        }
        let increment = chain.masses().iter().map(|m| m * walk_step / 2.0).collect();
        Ok(TimeChangeWalk {
            chain,
            site_atom,
            atom_site,
            increment,
        })
    }

    pub fn chain(&self) -> &GapChain {
        &self.chain
    }

    /// Run until `A` reaches `t_end`; each change of atom is one sojourn.
    /// Returns the final atom.
    pub fn run(&self, start: usize, t_end: f64, rng: &mut Rng, mut visit: impl FnMut(Event)) -> usize {
        let last = self.site_atom.len() - 1;
        let mut site = self.atom_site[start];
        let mut current = start;
        let mut since = 0.0;
        let mut a = 0.0;
        let mut bits = 0u64;
        let mut left = 0u32;
        loop {
            let k = self.site_atom[site];
            if k >= 0 {
                let k = k as usize;
                if k != current {
                    visit(Event {
                        time: since,
                        index: current as u32,
                        holding: a - since,
                    });
                    current = k;
                    since = a;
                }
                a += self.increment[k];
                if a >= t_end {
                    visit(Event {
                        time: since,
                        index: current as u32,
                        holding: t_end - since,
                    });
                    return current;
                }
            }
            if left == 0 {
                bits = rng.next_u64();
                left = 64;
            }
            let up = bits & 1 == 1;
            bits >>= 1;
            left -= 1;
            if up {
                if site < last {
                    site += 1;
                }
            } else {
                site = site.saturating_sub(1);
            }
        }
    }
}

/// Oracle path of the time-changed walk on `[0, T]`.
pub fn simulate_time_change_oracle(
    measure: &AtomicMeasure,
    x0: f64,
    t: f64,
    seed: u64,
    walk_step: f64,
) -> Result<PathRecord> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid("T must be positive and finite"));
    }
    let walk = TimeChangeWalk::new(measure, walk_step)?;
    let start = walk.chain.nearest(x0);
    let snapped = (walk.chain.positions()[start] != x0).then_some(x0);
    let mut rng = rng::stream(seed, 1);
    let mut events = Vec::new();
    walk.run(start, t, &mut rng, |e| events.push(e));
    Ok(PathRecord::from_parts(&walk.chain, events, t, seed, snapped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::build_lebesgue;

    #[test]
    fn oracle_path_invariants() {
        let m = build_lebesgue(1.0, 0.05).unwrap();
        let p = simulate_time_change_oracle(&m, 0.025, 2.0, 4, 0.025).unwrap();
        for w in p.atom_indices.windows(2) {
            assert_eq!((w[1] as i64 - w[0] as i64).abs(), 1);
        }
        for w in p.event_times.windows(2) {
            assert!(w[1] > w[0]);
        }
        assert!((p.occupation.iter().sum::<f64>() - 2.0).abs() < 1e-9);
        assert!(simulate_time_change_oracle(&m, 0.0, 1.0, 4, 0.06).is_err());
    }

    #[test]
    fn additive_functional_is_monotone_with_light_side() {
        // heavy atoms on the right, a nearly massless one on the left
        let atoms = vec![(-0.5, 1e-6), (0.0, 0.1), (0.1, 0.1), (0.2, 0.1)];
        let m = AtomicMeasure::manual(atoms, 1.0).unwrap();
        let p = simulate_time_change_oracle(&m, 0.0, 5.0, 1, 0.05).unwrap();
        assert!(p.event_times.windows(2).all(|w| w[1] >= w[0]));
        assert!(p.occupation[0] < 1e-3 * 5.0);
    }
}
