//! One-sided Stieltjes strings and the φ/ψ solutions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::AtomicMeasure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Plus,
    Minus,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Plus => 1.0,
            Direction::Minus => -1.0,
        }
    }
}

/// Termination of a truncated string at its length `Λ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Infinite mass at `Λ`: the diffusion is killed there.
    DirichletAtEnd,
    /// Massless free continuation past the last atom: reflection.
    NeumannAtEnd,
}

impl Boundary {
    pub fn toggled(self) -> Self {
        match self {
            Boundary::DirichletAtEnd => Boundary::NeumannAtEnd,
            Boundary::NeumannAtEnd => Boundary::DirichletAtEnd,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StieltjesString {
    anchor: f64,
    direction: Direction,
    atoms: Vec<(f64, f64)>,
    length: f64,
    boundary: Boundary,
}

/// φ, ψ and their right slopes at `(x, λ)`. Stored values are the true
/// values divided by `2^log_scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiPsiValue {
    pub phi: f64,
    pub phi_slope: f64,
    pub psi: f64,
    pub psi_slope: f64,
    pub x: f64,
    pub lambda: f64,
    pub log_scale: i32,
}

const RESCALE_ABOVE: f64 = 1.0e150;
const RESCALE_EXP: i32 = 500;

impl PhiPsiValue {
    /// Relative deviation of the Wronskian `φψ' − φ'ψ` from one.
    pub fn wronskian_defect(&self) -> f64 {
        let target = 2f64.powi(-2 * self.log_scale);
        let w = self.phi * self.psi_slope - self.phi_slope * self.psi;
        let size = (self.phi * self.psi_slope).abs() + (self.phi_slope * self.psi).abs();
        (w - target).abs() / size.max(target)
    }

    /// True value of φ (may overflow to infinity).
    pub fn phi_true(&self) -> f64 {
        self.phi * 2f64.powi(self.log_scale)
    }

    pub fn psi_true(&self) -> f64 {
        self.psi * 2f64.powi(self.log_scale)
    }

    pub fn ln_psi(&self) -> f64 {
        self.psi.ln() + self.log_scale as f64 * std::f64::consts::LN_2
    }

    pub fn ln_phi(&self) -> f64 {
        self.phi.ln() + self.log_scale as f64 * std::f64::consts::LN_2
    }
}

/// Krein correspondence of a truncated string with both terminations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KreinValue {
    pub dirichlet: f64,
    pub neumann: Option<f64>,
    /// The termination matching the string's own boundary flag.
    pub value: f64,
}

impl KreinValue {
    /// Width of the Dirichlet/Neumann bracket (infinite when φ'(Λ) = 0).
    pub fn bracket(&self) -> f64 {
        match self.neumann {
            Some(n) => (n - self.dirichlet).abs(),
            None => f64::INFINITY,
        }
    }
}

impl StieltjesString {
    /// String anchored at 0 in the plus direction.
    pub fn new(atoms: Vec<(f64, f64)>, length: f64, boundary: Boundary) -> Result<Self> {
        Self::anchored(0.0, Direction::Plus, atoms, length, boundary)
    }

    pub fn anchored(
        anchor: f64,
        direction: Direction,
        atoms: Vec<(f64, f64)>,
        length: f64,
        boundary: Boundary,
    ) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::invalid("string length must be positive and finite"));
        }
        if atoms.is_empty() {
            return Err(Error::degenerate("string has no atoms"));
        }
        let mut prev = -1.0;
        for (k, &(xi, m)) in atoms.iter().enumerate() {
            if !(xi > prev) || xi < 0.0 {
                return Err(Error::invalid(format!("atom distances not strictly increasing at {k}")));
            }
            if xi > length {
                return Err(Error::invalid(format!("atom {k} at {xi} beyond length {length}")));
            }
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::invalid(format!("atom {k} has non-positive mass")));
            }
            prev = xi;
        }
        Ok(StieltjesString {
            anchor,
            direction,
            atoms,
            length,
            boundary,
        })
    }

    /// Midpoint-rule discretization of `m(x) = x` on `[0, Λ]`: mass `δ/2`
    /// at 0 and `δ` at every `kδ`.
    pub fn uniform(delta: f64, length: f64, boundary: Boundary) -> Result<Self> {
        if !(delta > 0.0 && delta <= length) {
            return Err(Error::invalid("need 0 < δ ≤ Λ"));
        }
        let n = (length / delta).round() as usize;
        let atoms = (0..n)
            .map(|k| (k as f64 * delta, if k == 0 { delta / 2.0 } else { delta }))
            .collect();
        Self::new(atoms, n as f64 * delta, boundary)
    }

    /// Random string for property tests: `n` atoms with positive gaps and
    /// masses drawn from `[lo, hi]` and a Dirichlet/Neumann flag.
    pub fn random<R: rand::Rng>(rng: &mut R, n: usize, lo: f64, hi: f64, boundary: Boundary) -> Self {
        let mut x = 0.0;
        let atoms: Vec<(f64, f64)> = (0..n.max(1))
            .map(|_| {
                x += rng.gen_range(lo..hi);
                (x, rng.gen_range(lo..hi))
            })
            .collect();
        let length = x + rng.gen_range(lo..hi);
        Self::new(atoms, length, boundary).expect("random string is valid")
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn with_boundary(&self, boundary: Boundary) -> Self {
        StieltjesString { boundary, ..self.clone() }
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// `m(x)` (right-continuous).
    pub fn mass_function(&self, x: f64) -> f64 {
        self.atoms.iter().take_while(|a| a.0 <= x).map(|a| a.1).sum()
    }

    /// `V(r) = ∫_0^r m(x) dx`, exact for the step function `m`.
    pub fn integrated_mass(&self, r: f64) -> f64 {
        self.atoms
            .iter()
            .take_while(|a| a.0 <= r)
            .map(|&(xi, m)| m * (r - xi))
            .sum()
    }

    /// Same string with every mass multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::anchored(
            self.anchor,
            self.direction,
            self.atoms.iter().map(|&(x, m)| (x, m * c)).collect(),
            self.length,
            self.boundary,
        )
    }

    /// 64-bit FNV-1a over distances, masses, length and boundary flag.
    pub fn hash(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(PRIME);
            }
        };
        for &(x, m) in &self.atoms {
            eat(&x.to_le_bytes());
            eat(&m.to_le_bytes());
        }
        eat(&self.length.to_le_bytes());
        eat(&[match self.boundary {
            Boundary::DirichletAtEnd => 0u8,
            Boundary::NeumannAtEnd => 1u8,
        }]);
        h
    }

    /// φ, ψ at `x` by exact propagation: affine between atoms, slope jump
    /// `λ m u` across an atom (an atom located at `x` is included).
    pub fn phi_psi(&self, lambda: f64, x: f64) -> Result<PhiPsiValue> {
        if !(0.0..=self.length).contains(&x) {
            return Err(Error::invalid(format!("x = {x} outside [0, {}]", self.length)));
        }
        if !lambda.is_finite() {
            return Err(Error::invalid("λ must be finite"));
        }
        let (mut p, mut dp, mut q, mut dq) = (1.0f64, 0.0f64, 0.0f64, 1.0f64);
        let mut scale = 0i32;
        let mut pos = 0.0;
        for &(xi, m) in self.atoms.iter().take_while(|a| a.0 <= x) {
            let g = xi - pos;
            p += g * dp;
            q += g * dq;
            dp += lambda * m * p;
            dq += lambda * m * q;
            pos = xi;
            if p.abs().max(q.abs()).max(dp.abs()).max(dq.abs()) > RESCALE_ABOVE {
                let f = 2f64.powi(-RESCALE_EXP);
                p *= f;
                dp *= f;
                q *= f;
                dq *= f;
                scale += RESCALE_EXP;
            }
        }
        let g = x - pos;
        p += g * dp;
        q += g * dq;
        Ok(PhiPsiValue {
            phi: p,
            phi_slope: dp,
            psi: q,
            psi_slope: dq,
            x,
            lambda,
            log_scale: scale,
        })
    }

    /// `h_D = ψ(Λ)/φ(Λ)` and `h_N = ψ'(Λ)/φ'(Λ)`, which bracket the value of
    /// any continuation of the string past `Λ`.
    pub fn krein_h(&self, lambda: f64) -> Result<KreinValue> {
        if !(lambda > 0.0) {
            return Err(Error::invalid(format!("λ = {lambda} must be positive")));
        }
        let v = self.phi_psi(lambda, self.length)?;
        let dirichlet = v.psi / v.phi;
        let neumann = (v.phi_slope != 0.0).then(|| v.psi_slope / v.phi_slope);
        let value = match self.boundary {
            Boundary::DirichletAtEnd => dirichlet,
            Boundary::NeumannAtEnd => neumann.ok_or_else(|| {
                Error::numeric("φ'(Λ) = 0: Neumann termination undefined")
            })?,
        };
        Ok(KreinValue {
            dirichlet,
            neumann,
            value,
        })
    }

    /// Decaying solution `f = φ − ψ/h` normalized to `f(0) = 1`, evaluated
    /// at each of `xs` by a backward sweep from the terminal condition.
    /// Returns `(ln f(x_i), h)`.
    pub fn decaying_solution(&self, lambda: f64, xs: &[f64]) -> Result<(Vec<f64>, f64)> {
        if !(lambda > 0.0) {
            return Err(Error::invalid("λ must be positive"));
        }
        for &x in xs {
            if !(0.0..=self.length).contains(&x) {
                return Err(Error::invalid(format!("x = {x} outside [0, {}]", self.length)));
            }
        }
        // (f, f') at the current point, f' being the left slope
        let (mut f, mut df) = match self.boundary {
            Boundary::DirichletAtEnd => (0.0f64, -1.0f64),
            Boundary::NeumannAtEnd => (1.0, 0.0),
        };
        let mut ln_scale = 0.0f64;
        let mut order: Vec<usize> = (0..xs.len()).collect();
        order.sort_by(|&a, &b| xs[b].total_cmp(&xs[a]));
        let mut out = vec![0.0; xs.len()];
        let mut next = 0;
        let mut pos = self.length;
        let mut record = |target: f64, pos: f64, f: f64, df: f64, ln_scale: f64, next: &mut usize| {
            while *next < order.len() && xs[order[*next]] >= target {
                let x = xs[order[*next]];
                out[order[*next]] = (f - (pos - x) * df).ln() + ln_scale;
                *next += 1;
            }
        };
        for &(xi, m) in self.atoms.iter().rev() {
            // points in (xi, pos] lie on the affine piece ending at pos
            record(xi, pos, f, df, ln_scale, &mut next);
            let g = pos - xi;
            f -= g * df;
            df -= lambda * m * f;
            pos = xi;
            if f.abs().max(df.abs()) > RESCALE_ABOVE {
                f *= 2f64.powi(-RESCALE_EXP);
                df *= 2f64.powi(-RESCALE_EXP);
                ln_scale += RESCALE_EXP as f64 * std::f64::consts::LN_2;
            }
        }
        record(0.0, pos, f, df, ln_scale, &mut next);
        let f0 = f - pos * df;
        let ln_f0 = f0.ln() + ln_scale;
        let h = -f0 / df;
        for v in out.iter_mut() {
            *v -= ln_f0;
        }
        Ok((out, h))
    }

    /// Right-continuous inverse `m*`: gaps become masses and vice versa,
    /// the boundary flag is toggled and the new length is the total mass.
    pub fn dual(&self) -> Result<Self> {
        let n = self.atoms.len();
        let mut cum = Vec::with_capacity(n + 1);
        cum.push(0.0);
        for &(_, m) in &self.atoms {
            cum.push(cum.last().unwrap() + m);
        }
        let mut gaps = Vec::with_capacity(n + 1);
        let mut prev = 0.0;
        for &(xi, _) in &self.atoms {
            gaps.push(xi - prev);
            prev = xi;
        }
        let total = cum[n];
        let atoms: Vec<(f64, f64)> = match self.boundary {
            Boundary::DirichletAtEnd => {
                gaps.push(self.length - prev);
                (0..=n).map(|k| (cum[k], gaps[k])).filter(|a| a.1 > 0.0).collect()
            }
            Boundary::NeumannAtEnd => {
                (0..n).map(|k| (cum[k], gaps[k])).filter(|a| a.1 > 0.0).collect()
            }
        };
        Self::anchored(self.anchor, self.direction, atoms, total, self.boundary.toggled())
    }

    /// Mass-preserving coarsening into bins of width `Λ/max_atoms`, each bin
    /// replaced by one atom at its centre of mass. Returns the bin width
    /// (zero when no coarsening was needed).
    pub fn coarsened(&self, max_atoms: usize) -> Result<(Self, f64)> {
        if self.atoms.len() <= max_atoms {
            return Ok((self.clone(), 0.0));
        }
        let width = self.length / max_atoms as f64;
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(max_atoms);
        let mut bin = usize::MAX;
        let (mut mass, mut moment) = (0.0, 0.0);
        for &(xi, m) in &self.atoms {
            let b = ((xi / width) as usize).min(max_atoms - 1);
            if b != bin && mass > 0.0 {
                out.push((moment / mass, mass));
                mass = 0.0;
                moment = 0.0;
            }
            bin = b;
            mass += m;
            moment += m * xi;
        }
        if mass > 0.0 {
            out.push((moment / mass, mass));
        }
        // centres of mass of distinct bins are strictly increasing
        let s = Self::anchored(self.anchor, self.direction, out, self.length, self.boundary)?;
        Ok((s, width))
    }
}

/// One-sided string `x ↦ ν([a, a±x])` truncated at `Λ`. An atom sitting
/// exactly at the anchor is shared equally by the two sides.
pub fn to_string(
    measure: &AtomicMeasure,
    a: f64,
    direction: Direction,
    length: f64,
    boundary: Boundary,
) -> Result<StieltjesString> {
    let (lo, hi) = measure.window();
    if !(a >= lo && a <= hi) {
        return Err(Error::invalid(format!("anchor {a} outside the window")));
    }
    let room = match direction {
        Direction::Plus => hi - a,
        Direction::Minus => a - lo,
    };
    if !(length > 0.0) || length > room * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "length {length} exceeds the distance {room} from the anchor to the window edge"
        )));
    }
    let length = length.min(room);
    let s = direction.sign();
    let mut atoms: Vec<(f64, f64)> = measure
        .atoms()
        .iter()
        .filter_map(|&(x, m)| {
            let d = (x - a) * s;
            if d == 0.0 {
                Some((0.0, m / 2.0))
            } else if d > 0.0 && d <= length {
                Some((d, m))
            } else {
                None
            }
        })
        .collect();
    if atoms.is_empty() {
        return Err(Error::degenerate("no atoms within the string length"));
    }
    atoms.sort_by(|p, q| p.0.total_cmp(&q.0));
    StieltjesString::anchored(a, direction, atoms, length, boundary)
}

/// The pair of strings `m_{ν,a,+}`, `m_{ν,a,−}` with a common length.
pub fn two_sided(
    measure: &AtomicMeasure,
    a: f64,
    length: f64,
    boundary: Boundary,
) -> Result<(StieltjesString, StieltjesString)> {
    Ok((
        to_string(measure, a, Direction::Plus, length, boundary)?,
        to_string(measure, a, Direction::Minus, length, boundary)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::build_lebesgue;

    #[test]
    fn one_atom_hand_recursion() {
        let s = StieltjesString::new(vec![(1.0, 2.0)], 5.0, Boundary::DirichletAtEnd).unwrap();
        let v = s.phi_psi(1.0, 2.0).unwrap();
        assert_eq!((v.phi, v.phi_slope, v.psi, v.psi_slope), (3.0, 2.0, 4.0, 3.0));
        assert!(v.wronskian_defect() < 1e-15);
        let z = s.phi_psi(0.0, 3.7).unwrap();
        assert_eq!((z.phi, z.psi), (1.0, 3.7));
        assert!(s.phi_psi(1.0, 6.0).is_err());
    }

    #[test]
    fn two_level_continued_fraction() {
        let s = StieltjesString::new(vec![(2.0, 3.0)], 10.0, Boundary::DirichletAtEnd).unwrap();
        let h = s.krein_h(5.0).unwrap();
        // ψ/φ at 10: φ = 1 + 8·15, ψ = 2 + 8·31
        assert!((h.dirichlet - 250.0 / 121.0).abs() < 1e-14);
        assert!((h.neumann.unwrap() - 31.0 / 15.0).abs() < 1e-14);
        assert!((h.dirichlet - 2.0667).abs() < 1e-3);
        assert!(s.krein_h(0.0).is_err());
        let small = s.krein_h(1e-12).unwrap();
        assert!((small.dirichlet - 10.0).abs() < 1e-8);
    }

    #[test]
    fn lebesgue_cosh() {
        let s = StieltjesString::uniform(1e-3, 2.0, Boundary::DirichletAtEnd).unwrap();
        let v = s.phi_psi(4.0, 1.0).unwrap();
        assert!((v.phi - 2f64.cosh()).abs() < 1e-3);
        assert!((v.psi - 2f64.sinh() / 2.0).abs() < 1e-3);
    }

    #[test]
    fn large_lambda_length_stays_finite() {
        let s = StieltjesString::uniform(1e-2, 100.0, Boundary::DirichletAtEnd).unwrap();
        let h = s.krein_h(100.0).unwrap();
        assert!(h.dirichlet.is_finite() && (h.value * 10.0 - 1.0).abs() < 1e-2);
        assert!(s.phi_psi(100.0, 100.0).unwrap().wronskian_defect() < 1e-10);
    }

    #[test]
    fn dual_small_cases() {
        let s = StieltjesString::new(vec![(1.0, 2.0)], 1.0, Boundary::NeumannAtEnd).unwrap();
        let d = s.dual().unwrap();
        assert_eq!(d.atoms(), &[(0.0, 1.0)]);
        assert_eq!((d.length(), d.boundary()), (2.0, Boundary::DirichletAtEnd));
        for lam in [0.3, 2.0] {
            let h = s.krein_h(lam).unwrap().value;
            let hd = d.krein_h(lam).unwrap().value;
            assert!((lam * h * hd - 1.0).abs() < 1e-14);
            assert!((hd - 2.0 / (1.0 + 2.0 * lam)).abs() < 1e-14);
        }
        let back = d.dual().unwrap();
        assert_eq!(back.atoms(), s.atoms());
        assert_eq!(back.boundary(), s.boundary());
    }

    #[test]
    fn to_string_examples() {
        let m = build_lebesgue(1.0, 0.5).unwrap();
        let p = to_string(&m, 0.0, Direction::Plus, 1.0, Boundary::DirichletAtEnd).unwrap();
        assert_eq!(p.atoms(), &[(0.25, 0.5), (0.75, 0.5)]);
        let q = to_string(&m, 0.0, Direction::Minus, 1.0, Boundary::DirichletAtEnd).unwrap();
        assert_eq!(q.atoms(), p.atoms());
        assert!(to_string(&m, 0.0, Direction::Plus, 1.5, Boundary::DirichletAtEnd).is_err());
        let one = AtomicMeasure::manual(vec![(2.0, 3.0)], 5.0).unwrap();
        let s = to_string(&one, 0.0, Direction::Plus, 5.0, Boundary::DirichletAtEnd).unwrap();
        assert_eq!(s.atoms(), &[(2.0, 3.0)]);
        assert!(matches!(
            to_string(&one, 0.0, Direction::Minus, 5.0, Boundary::DirichletAtEnd),
            Err(Error::DegenerateInput(_))
        ));
        let at = to_string(&m, 0.25, Direction::Plus, 0.75, Boundary::DirichletAtEnd).unwrap();
        assert_eq!(at.atoms(), &[(0.0, 0.25), (0.5, 0.5)]);
    }

    #[test]
    fn decaying_solution_matches_forward() {
        let s = StieltjesString::new(vec![(0.5, 1.0), (1.2, 0.4), (2.0, 0.7)], 3.0, Boundary::NeumannAtEnd).unwrap();
        let lam = 1.7;
        let h = s.krein_h(lam).unwrap().value;
        let xs = [0.0, 0.3, 0.5, 1.0, 2.0, 2.9];
        let (lnf, hb) = s.decaying_solution(lam, &xs).unwrap();
        assert!((hb - h).abs() < 1e-13 * h);
        for (x, l) in xs.iter().zip(&lnf) {
            let v = s.phi_psi(lam, *x).unwrap();
            let f = v.phi - v.psi / h;
            assert!((l.exp() - f).abs() < 1e-12, "{x}: {} vs {f}", l.exp());
        }
    }

    #[test]
    fn coarsening_preserves_mass() {
        let s = StieltjesString::uniform(1e-3, 10.0, Boundary::DirichletAtEnd).unwrap();
        let (c, w) = s.coarsened(1000).unwrap();
        assert!(c.atoms().len() <= 1000 && w > 0.0);
        assert!((c.total_mass() - s.total_mass()).abs() < 1e-9);
        let h0 = s.krein_h(1.0).unwrap().value;
        let h1 = c.krein_h(1.0).unwrap().value;
        assert!((h0 - h1).abs() < 1e-2);
    }
}
