//! Spectral decompositions of strings as symmetric tridiagonal problems.
//!
//! A string with masses `m_i` at sites `p_i` carries the operator
//! `−(d/dm)(d/dx)`, i.e. `K u = ξ M u` with `K` the stiffness matrix of the
//! gaps. Eigenvectors are normalized in `L²(m)`, so `u_j = v_j/√m` for the
//! unit eigenvectors `v_j` of `M^{-1/2} K M^{-1/2}`.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use super::string::{Boundary, Direction, StieltjesString};
use crate::error::{Error, Result};
use crate::jsonio;
use crate::linalg::tridiag_eigen;

/// Strings with more atoms are coarsened before the eigensolve.
pub const MAX_ATOMS: usize = 8192;
/// Largest chain for which all eigenvector rows may be requested.
pub const MAX_FULL_MODES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectralBc {
    /// Reflection at the anchor: the measure σ.
    NeumannAt0,
    /// Absorption at the anchor: the measure σ* of the dual string.
    DirichletAt0,
    /// Both sides joined at the anchor (two-sided kernel of the full line).
    Line,
}

impl SpectralBc {
    pub fn as_str(self) -> &'static str {
        match self {
            SpectralBc::NeumannAt0 => "neumann-at-0",
            SpectralBc::DirichletAt0 => "dirichlet-at-0",
            SpectralBc::Line => "line",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum End {
    /// No restriction: eigenfunctions are flat past the outermost site.
    Free,
    /// `u = 0` at the given coordinate.
    Pinned(f64),
}

#[derive(Debug, Clone, PartialEq)]
struct Chain {
    pos: Vec<f64>,
    mass: Vec<f64>,
    left: End,
    right: End,
}

impl Chain {
    fn from_string(s: &StieltjesString, bc0: SpectralBc) -> Result<(Chain, f64)> {
        let mut atoms: Vec<(f64, f64)> = s.atoms().to_vec();
        let mut offset = 0.0;
        let left = match bc0 {
            SpectralBc::NeumannAt0 => {
                offset = atoms[0].0;
                End::Free
            }
            SpectralBc::DirichletAt0 => {
                if atoms[0].0 == 0.0 {
                    offset = atoms.remove(0).1;
                }
                End::Pinned(0.0)
            }
            SpectralBc::Line => return Err(Error::invalid("line chain needs two strings")),
        };
        let right = match s.boundary() {
            Boundary::NeumannAtEnd => End::Free,
            Boundary::DirichletAtEnd => {
                if atoms.last().is_some_and(|a| a.0 >= s.length()) {
                    atoms.pop();
                }
                End::Pinned(s.length())
            }
        };
        if atoms.is_empty() {
            return Err(Error::degenerate("no free atoms left for the eigenproblem"));
        }
        let (pos, mass) = atoms.into_iter().unzip();
        Ok((Chain { pos, mass, left, right }, offset))
    }

    fn from_pair(plus: &StieltjesString, minus: &StieltjesString) -> Result<Chain> {
        let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(plus.atoms().len() + minus.atoms().len());
        let mut left = End::Free;
        for &(xi, m) in minus.atoms().iter().rev() {
            if minus.boundary() == Boundary::DirichletAtEnd && xi >= minus.length() {
                continue;
            }
            atoms.push((-xi, m));
        }
        if minus.boundary() == Boundary::DirichletAtEnd {
            left = End::Pinned(-minus.length());
        }
        for &(xi, m) in plus.atoms() {
            if plus.boundary() == Boundary::DirichletAtEnd && xi >= plus.length() {
                continue;
            }
            match atoms.last_mut() {
                Some(last) if last.0 == xi => last.1 += m,
                _ => atoms.push((xi, m)),
            }
        }
        let right = match plus.boundary() {
            Boundary::DirichletAtEnd => End::Pinned(plus.length()),
            Boundary::NeumannAtEnd => End::Free,
        };
        if atoms.is_empty() {
            return Err(Error::degenerate("no free atoms left for the eigenproblem"));
        }
        let (pos, mass) = atoms.into_iter().unzip();
        Ok(Chain { pos, mass, left, right })
    }

    fn len(&self) -> usize {
        self.pos.len()
    }

    /// Symmetrized operator `M^{-1/2} K M^{-1/2}`.
    fn matrix(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.len();
        let mut k = vec![0.0; n];
        let mut off = Vec::with_capacity(n.saturating_sub(1));
        for i in 0..n.saturating_sub(1) {
            let c = 1.0 / (self.pos[i + 1] - self.pos[i]);
            k[i] += c;
            k[i + 1] += c;
            off.push(-c / (self.mass[i] * self.mass[i + 1]).sqrt());
        }
        if let End::Pinned(p) = self.left {
            k[0] += 1.0 / (self.pos[0] - p);
        }
        if let End::Pinned(p) = self.right {
            k[n - 1] += 1.0 / (p - self.pos[n - 1]);
        }
        let diag = k.iter().zip(&self.mass).map(|(k, m)| k / m).collect();
        (diag, off)
    }

    /// Sites whose mode values determine `u(x)` by interpolation.
    fn support_of(&self, x: f64) -> Vec<usize> {
        let i = self.pos.partition_point(|&p| p < x);
        if i < self.len() && self.pos[i] == x {
            vec![i]
        } else if i == 0 {
            vec![0]
        } else if i == self.len() {
            vec![i - 1]
        } else {
            vec![i - 1, i]
        }
    }

    /// Interpolation weights expressing `u(x)` through site values.
    fn interpolation(&self, x: f64) -> Result<Vec<(usize, f64)>> {
        let n = self.len();
        let lo = match self.left {
            End::Free => f64::NEG_INFINITY,
            End::Pinned(p) => p,
        };
        let hi = match self.right {
            End::Free => f64::INFINITY,
            End::Pinned(p) => p,
        };
        if !(x >= lo && x <= hi) {
            return Err(Error::invalid(format!("point {x} outside the string")));
        }
        let i = self.pos.partition_point(|&p| p < x);
        Ok(if i < n && self.pos[i] == x {
            vec![(i, 1.0)]
        } else if i == 0 {
            match self.left {
                End::Free => vec![(0, 1.0)],
                End::Pinned(p) => vec![(0, (x - p) / (self.pos[0] - p))],
            }
        } else if i == n {
            match self.right {
                End::Free => vec![(n - 1, 1.0)],
                End::Pinned(p) => vec![(n - 1, (p - x) / (p - self.pos[n - 1]))],
            }
        } else {
            let (a, b) = (self.pos[i - 1], self.pos[i]);
            let w = (x - a) / (b - a);
            vec![(i - 1, 1.0 - w), (i, w)]
        })
    }

    /// Green-function kink at a point lying off the support: the part of
    /// the resolvent diagonal the discrete modes cannot see.
    fn gap_offset(&self, x: f64) -> f64 {
        let i = self.pos.partition_point(|&p| p < x);
        if i < self.len() && self.pos[i] == x {
            return 0.0;
        }
        let l = if i > 0 {
            Some(x - self.pos[i - 1])
        } else {
            match self.left {
                End::Pinned(p) => Some(x - p),
                End::Free => None,
            }
        };
        let r = if i < self.len() {
            Some(self.pos[i] - x)
        } else {
            match self.right {
                End::Pinned(p) => Some(p - x),
                End::Free => None,
            }
        };
        match (l, r) {
            (Some(l), Some(r)) => l * r / (l + r),
            (Some(l), None) => l,
            (None, Some(r)) => r,
            (None, None) => 0.0,
        }
    }
}

/// Eigenvalue/weight pairs of σ or σ*, with the mode values needed to
/// evaluate heat kernels.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub bc: SpectralBc,
    /// `(ξ_j, c_j)`, ξ ascending.
    pub pairs: Vec<(f64, f64)>,
    /// Constant term: `h(λ) = offset + Σ c_j/(λ+ξ_j)`.
    pub offset: f64,
    pub string_hash: u64,
    /// Dirichlet/Neumann bracket of the source string(s) at λ = 1.
    pub bracket_width: f64,
    /// Bin width used to coarsen the string, zero if untouched.
    pub binning_width: f64,
    /// `u_j(0)` for reflecting bc, `u_j'(0)` for absorbing bc.
    pub boundary_data: Vec<f64>,
    chain: Chain,
    tracked: Vec<usize>,
    /// `rows[r][j]`: value of mode `j` at site `tracked[r]`.
    rows: Vec<Vec<f64>>,
}

impl SpectralDecomposition {
    /// `offset + Σ c_j/(λ+ξ_j)`.
    pub fn h(&self, lambda: f64) -> f64 {
        self.offset + self.pairs.iter().map(|&(x, c)| c / (lambda + x)).sum::<f64>()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Positions and masses of the sites of the underlying chain (signed
    /// coordinates for the line).
    pub fn sites(&self) -> (&[f64], &[f64]) {
        (&self.chain.pos, &self.chain.mass)
    }

    /// Mode values `u_j(x)` for every pair, by interpolation between sites.
    pub fn modes_at(&self, x: f64) -> Result<Vec<f64>> {
        let weights = self.chain.interpolation(x)?;
        let mut out = vec![0.0; self.rows.first().map_or(0, |r| r.len())];
        for (site, w) in weights {
            let r = self.tracked.binary_search(&site).map_err(|_| {
                Error::invalid(format!("mode values at {x} were not retained; decompose with this point tracked"))
            })?;
            for (o, v) in out.iter_mut().zip(&self.rows[r]) {
                *o += w * v;
            }
        }
        Ok(out)
    }

    /// Whether mode values are available at every site.
    pub fn has_full_modes(&self) -> bool {
        self.tracked.len() == self.chain.len()
    }

    pub fn to_json(&self) -> Result<String> {
        jsonio::to_string(&SpectraFile {
            bc: self.bc.as_str().to_string(),
            pairs: self.pairs.iter().map(|&(x, c)| [x, c]).collect(),
            string_hash: format!("{:016x}", self.string_hash),
            bracket_width: self.bracket_width,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SpectraFile {
    pub bc: String,
    pub pairs: Vec<[f64; 2]>,
    pub string_hash: String,
    pub bracket_width: f64,
}

fn solve(
    chain: Chain,
    bc: SpectralBc,
    offset: f64,
    extra_points: &[f64],
    full: bool,
) -> Result<SpectralDecomposition> {
    let n = chain.len();
    if full && n > MAX_FULL_MODES {
        return Err(Error::invalid(format!(
            "full modes requested for {n} sites (limit {MAX_FULL_MODES})"
        )));
    }
    let anchor_sites = chain.support_of(0.0);
    let mut tracked: Vec<usize> = if full {
        (0..n).collect()
    } else {
        let mut t = anchor_sites.clone();
        for &x in extra_points {
            t.extend(chain.support_of(x));
        }
        t
    };
    tracked.sort_unstable();
    tracked.dedup();
    let (diag, off) = chain.matrix();
    let eig = tridiag_eigen(&diag, &off, &tracked)?;
    let rows: Vec<Vec<f64>> = eig
        .rows
        .iter()
        .zip(&tracked)
        .map(|(row, &site)| {
            let s = chain.mass[site].sqrt();
            row.iter().map(|v| v / s).collect()
        })
        .collect();
    let values: Vec<f64> = eig.values.iter().map(|v| v.max(0.0)).collect();
    let mut decomposition = SpectralDecomposition {
        bc,
        pairs: Vec::new(),
        offset,
        string_hash: 0,
        bracket_width: 0.0,
        binning_width: 0.0,
        boundary_data: Vec::new(),
        chain,
        tracked,
        rows,
    };
    let at_zero = decomposition.modes_at(0.0)?;
    let (pairs, data): (Vec<(f64, f64)>, Vec<f64>) = match bc {
        SpectralBc::NeumannAt0 | SpectralBc::Line => values
            .iter()
            .zip(&at_zero)
            .map(|(&xi, &u)| ((xi, u * u), u))
            .unzip(),
        SpectralBc::DirichletAt0 => {
            let p0 = decomposition.chain.pos[0];
            let r0 = decomposition.tracked.binary_search(&0).expect("site 0 tracked");
            values
                .iter()
                .zip(&decomposition.rows[r0])
                .map(|(&xi, &u)| {
                    let slope = u / p0;
                    ((xi, slope * slope / xi), slope)
                })
                .unzip()
        }
    };
    decomposition.pairs = pairs;
    decomposition.boundary_data = data;
    if bc == SpectralBc::Line {
        decomposition.offset = decomposition.chain.gap_offset(0.0);
    }
    Ok(decomposition)
}

fn prepend_zero_pair(d: &mut SpectralDecomposition, weight: f64) {
    d.pairs.insert(0, (0.0, weight));
    d.boundary_data.insert(0, 0.0);
    for row in d.rows.iter_mut() {
        row.insert(0, 0.0);
    }
}

fn decompose_impl(s: &StieltjesString, bc0: SpectralBc, points: &[f64], full: bool) -> Result<SpectralDecomposition> {
    if bc0 == SpectralBc::Line {
        return Err(Error::invalid("use spectral_decompose_line for the two-sided problem"));
    }
    let (s_eff, width) = s.coarsened(MAX_ATOMS)?;
    let (chain, offset) = Chain::from_string(&s_eff, bc0)?;
    let mut d = solve(chain, bc0, offset, points, full)?;
    if bc0 == SpectralBc::DirichletAt0 && s.boundary() == Boundary::DirichletAtEnd {
        // killing at Λ leaves 1/(λΛ) in h*: an atom of σ* at zero
        prepend_zero_pair(&mut d, 1.0 / s_eff.length());
    }
    d.string_hash = s.hash();
    d.binning_width = width;
    d.bracket_width = s.krein_h(1.0)?.bracket();
    Ok(d)
}

/// σ (reflecting at the anchor) or σ* (absorbing at the anchor) of `s`,
/// keeping only the mode values needed at the anchor.
pub fn spectral_decompose(s: &StieltjesString, bc0: SpectralBc) -> Result<SpectralDecomposition> {
    decompose_impl(s, bc0, &[], false)
}

/// As [`spectral_decompose`], also retaining mode values around `points`.
pub fn spectral_decompose_at(s: &StieltjesString, bc0: SpectralBc, points: &[f64]) -> Result<SpectralDecomposition> {
    decompose_impl(s, bc0, points, false)
}

/// As [`spectral_decompose`] with mode values at every site.
pub fn spectral_decompose_full(s: &StieltjesString, bc0: SpectralBc) -> Result<SpectralDecomposition> {
    decompose_impl(s, bc0, &[], true)
}

/// Two-sided decomposition of the diffusion on the whole (truncated) line
/// from the pair `m_{ν,a,±}`; points are signed coordinates from the anchor.
pub fn spectral_decompose_line(
    plus: &StieltjesString,
    minus: &StieltjesString,
    points: &[f64],
    full: bool,
) -> Result<SpectralDecomposition> {
    check_pair(plus, minus)?;
    // a split anchor atom sits on both sides but is one site of the chain
    let (p, wp) = plus.coarsened(MAX_ATOMS / 2 + 1)?;
    let (m, wm) = minus.coarsened(MAX_ATOMS / 2 + 1)?;
    let chain = Chain::from_pair(&p, &m)?;
    let mut d = solve(chain, SpectralBc::Line, 0.0, points, full)?;
    d.string_hash = plus.hash() ^ minus.hash().rotate_left(32);
    d.binning_width = wp.max(wm);
    d.bracket_width = plus.krein_h(1.0)?.bracket().max(minus.krein_h(1.0)?.bracket());
    Ok(d)
}

pub(crate) fn check_pair(plus: &StieltjesString, minus: &StieltjesString) -> Result<()> {
    if plus.direction() != Direction::Plus || minus.direction() != Direction::Minus {
        return Err(Error::invalid("expected a (plus, minus) string pair"));
    }
    if plus.anchor() != minus.anchor() {
        return Err(Error::invalid("strings have different anchors"));
    }
    Ok(())
}

type CacheKey = (u64, SpectralBc);

fn cache() -> &'static RwLock<HashMap<CacheKey, Arc<SpectralDecomposition>>> {
    static CACHE: OnceLock<RwLock<HashMap<CacheKey, Arc<SpectralDecomposition>>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Memoized [`spectral_decompose`], keyed by string hash and bc.
pub fn spectral_decompose_cached(s: &StieltjesString, bc0: SpectralBc) -> Result<Arc<SpectralDecomposition>> {
    let key = (s.hash(), bc0);
    if let Some(d) = cache().read().expect("spectral cache poisoned").get(&key) {
        return Ok(d.clone());
    }
    let d = Arc::new(spectral_decompose(s, bc0)?);
    cache()
        .write()
        .expect("spectral cache poisoned")
        .entry(key)
        .or_insert_with(|| d.clone());
    Ok(d)
}
