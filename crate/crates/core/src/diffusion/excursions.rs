//! Excursions away from an atom and the inverse local time at it.

use serde::Serialize;

use super::gap::{Event, PathRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Excursion {
    /// Local time at the anchor when the excursion starts.
    pub start_local_time: f64,
    pub lifetime: f64,
    /// Largest distance from the anchor.
    pub max: f64,
    /// +1 or −1: side of the first jump.
    pub sign: i8,
    /// Time from the start until the maximum, taken as the midpoint of the
    /// first arrival at and last departure from the farthest atom.
    pub argmax_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcursionSet {
    pub excursions: Vec<Excursion>,
    pub anchor: f64,
    pub total_local_time: f64,
    /// Incomplete final excursions (0 or 1).
    pub discarded: usize,
    /// Sojourns at the outermost atoms.
    pub edge_contacts: usize,
}

impl ExcursionSet {
    /// Per unit local time, excursions on side `sign` with `M ≥ x`.
    pub fn rate_max_at_least(&self, x: f64, sign: i8) -> f64 {
        let count = self.excursions.iter().filter(|e| e.sign == sign && e.max >= x).count();
        count as f64 / self.total_local_time
    }
}

#[derive(Debug, Clone)]
struct Current {
    start: f64,
    start_local_time: f64,
    sign: i8,
    max: f64,
    first_arrival: f64,
    last_departure: f64,
}

/// Streaming excursion extractor: feed it sojourns in time order.
#[derive(Debug, Clone)]
pub struct ExcursionHarvester<'a> {
    positions: &'a [f64],
    anchor: usize,
    anchor_mass: f64,
    local_time: f64,
    seen_anchor: bool,
    current: Option<Current>,
    out: Vec<Excursion>,
    edge_contacts: usize,
}

impl<'a> ExcursionHarvester<'a> {
    pub fn new(positions: &'a [f64], masses: &[f64], anchor: usize) -> Result<Self> {
        if anchor >= positions.len() {
            return Err(Error::invalid("anchor index out of range"));
        }
        Ok(ExcursionHarvester {
            positions,
            anchor,
            anchor_mass: masses[anchor],
            local_time: 0.0,
            seen_anchor: false,
            current: None,
            out: Vec::new(),
            edge_contacts: 0,
        })
    }

    pub fn visit(&mut self, e: Event) {
        let k = e.index as usize;
        if k == 0 || k + 1 == self.positions.len() {
            self.edge_contacts += 1;
        }
        if k == self.anchor {
            if let Some(c) = self.current.take() {
                self.out.push(Excursion {
                    start_local_time: c.start_local_time,
                    lifetime: e.time - c.start,
                    max: c.max,
                    sign: c.sign,
                    argmax_time: 0.5 * (c.first_arrival + c.last_departure) - c.start,
                });
            }
            self.seen_anchor = true;
            self.local_time += e.holding / self.anchor_mass;
            return;
        }
        if !self.seen_anchor {
            return;
        }
        let d = self.positions[k] - self.positions[self.anchor];
        let dist = d.abs();
        let end = e.time + e.holding;
        match self.current.as_mut() {
            None => {
                self.current = Some(Current {
                    start: e.time,
                    start_local_time: self.local_time,
                    sign: if d > 0.0 { 1 } else { -1 },
                    max: dist,
                    first_arrival: e.time,
                    last_departure: end,
                });
            }
            Some(c) => {
                if dist > c.max {
                    c.max = dist;
                    c.first_arrival = e.time;
                    c.last_departure = end;
                } else if dist == c.max {
                    c.last_departure = end;
                }
            }
        }
    }

    pub fn finish(self) -> Result<ExcursionSet> {
        if !self.seen_anchor {
            return Err(Error::degenerate("the path never visits the anchor"));
        }
        Ok(ExcursionSet {
            excursions: self.out,
            anchor: self.positions[self.anchor],
            total_local_time: self.local_time,
            discarded: usize::from(self.current.is_some()),
            edge_contacts: self.edge_contacts,
        })
    }
}

/// Excursions of a stored path away from the atom at `a`.
pub fn extract_excursions(path: &PathRecord, a: f64) -> Result<ExcursionSet> {
    let k = path
        .atom_index(a)
        .ok_or_else(|| Error::invalid(format!("{a} is not an atom of the path's measure")))?;
    let mut h = ExcursionHarvester::new(path.positions(), path.masses(), k)?;
    for e in path.events() {
        h.visit(e);
    }
    h.finish()
}

/// Streaming evaluation of `ℓ(s) = inf{t : L(t, a) > s}` on a sorted grid.
#[derive(Debug, Clone)]
pub struct InverseLocalTime {
    anchor: usize,
    mass: f64,
    grid: Vec<f64>,
    next: usize,
    local_time: f64,
    out: Vec<f64>,
}

impl InverseLocalTime {
    pub fn new(anchor: usize, mass: f64, grid: Vec<f64>) -> Result<Self> {
        if grid.windows(2).any(|w| w[1] < w[0]) || grid.first().is_some_and(|&g| g < 0.0) {
            return Err(Error::invalid("local-time grid must be nonnegative and sorted"));
        }
        Ok(InverseLocalTime {
            anchor,
            mass,
            out: Vec::with_capacity(grid.len()),
            grid,
            next: 0,
            local_time: 0.0,
        })
    }

    pub fn visit(&mut self, e: Event) {
        if e.index as usize != self.anchor {
            return;
        }
        let end = self.local_time + e.holding / self.mass;
        while self.next < self.grid.len() && self.grid[self.next] < end {
            let s = self.grid[self.next];
            self.out.push(e.time + (s - self.local_time) * self.mass);
            self.next += 1;
        }
        self.local_time = end;
    }

    pub fn done(&self) -> bool {
        self.next == self.grid.len()
    }

    pub fn finish(self) -> Result<Vec<f64>> {
        if !self.done() {
            return Err(Error::invalid(format!(
                "grid reaches local time {} but only {} was accumulated",
                self.grid[self.grid.len() - 1],
                self.local_time
            )));
        }
        Ok(self.out)
    }
}

/// `ℓ_{ν,a}` read off a stored path at the given local times.
pub fn inverse_local_time_samples(path: &PathRecord, a: f64, grid: &[f64]) -> Result<Vec<f64>> {
    let k = path
        .atom_index(a)
        .ok_or_else(|| Error::invalid(format!("{a} is not an atom of the path's measure")))?;
    let mut c = InverseLocalTime::new(k, path.masses()[k], grid.to_vec())?;
    for e in path.events() {
        c.visit(e);
        if c.done() {
            break;
        }
    }
    c.finish()
}
