//! Speed measures: exact references and sampled boundary Liouville measures.
//!
//! Every measure is a finite list of atoms inside a window `[-L, L]`. The
//! continuum objects are approximated by atoms of mass `O(δ)` on a midpoint
//! grid, and all scale-dependent statistics are only trusted above the
//! resolution reported by [`AtomicMeasure::resolution`].

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::BandCholesky;
use crate::{jsonio, rng, stats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    /// `log(1/d) + d - 1` on `[ε, 1)`, linear ramp below `ε`, zero beyond 1.
    /// A mixture of triangle kernels, hence exactly positive definite, with
    /// correlation length one.
    TruncatedLogExactPd,
    /// `-log(max(d, ε))`, only meaningful on windows of length at most one.
    SharpLogFloor,
}

impl Kernel {
    /// Covariance at lag `d` for cutoff `eps`.
    pub fn covariance(self, d: f64, eps: f64) -> f64 {
        let d = d.abs();
        match self {
            Kernel::TruncatedLogExactPd => {
                if d >= 1.0 {
                    0.0
                } else if d < eps {
                    (1.0 / eps).ln() - d / eps + d
                } else {
                    (1.0 / d).ln() + d - 1.0
                }
            }
            Kernel::SharpLogFloor => -(d.max(eps)).ln(),
        }
    }
}

impl std::str::FromStr for Kernel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "truncated-log-exact-pd" => Ok(Kernel::TruncatedLogExactPd),
            "sharp-log-floor" => Ok(Kernel::SharpLogFloor),
            other => Err(Error::invalid(format!("unknown kernel {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmcConfig {
    pub gamma: f64,
    pub depth_n: u32,
    pub window_half_length: f64,
    pub grid_spacing: f64,
    pub kernel: Kernel,
    pub seed: u64,
}

impl GmcConfig {
    /// Default-kernel configuration with grid spacing equal to the cutoff.
    pub fn new(gamma: f64, depth_n: u32, window_half_length: f64, seed: u64) -> Self {
        GmcConfig {
            gamma,
            depth_n,
            window_half_length,
            grid_spacing: 0.5f64.powi(depth_n as i32),
            kernel: Kernel::TruncatedLogExactPd,
            seed,
        }
    }

    pub fn cutoff(&self) -> f64 {
        0.5f64.powi(self.depth_n as i32)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma < std::f64::consts::SQRT_2) {
            return Err(Error::invalid(format!("gamma {} outside [0, sqrt 2)", self.gamma)));
        }
        if self.depth_n == 0 {
            return Err(Error::invalid("depth_n must be positive"));
        }
        if !(self.window_half_length >= 1.0) {
            return Err(Error::invalid("window half-length must be at least 1"));
        }
        let eps = self.cutoff();
        if !(self.grid_spacing > 0.0 && self.grid_spacing <= eps) {
            return Err(Error::invalid("grid spacing must satisfy 0 < δ ≤ ε"));
        }
        if self.kernel == Kernel::SharpLogFloor && 2.0 * self.window_half_length > 1.0 + 1e-12 {
            // the pure log kernel is only a covariance on windows of length ≤ 1
            return Err(Error::invalid("sharp-log-floor needs a window of length at most 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Lebesgue,
    Manual,
    Gmc,
}

impl MeasureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MeasureKind::Lebesgue => "lebesgue",
            MeasureKind::Manual => "manual",
            MeasureKind::Gmc => "gmc",
        }
    }
}

/// Provenance of a measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureMeta {
    pub kind: MeasureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gmc: Option<GmcConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_spacing: Option<f64>,
    /// Global multiplier applied after construction (1 unless rescaled).
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    atoms: Vec<(f64, f64)>,
    half_length: f64,
    meta: MeasureMeta,
}

impl AtomicMeasure {
    /// Hand-built measure. Atoms must be strictly increasing in position,
    /// have positive finite mass and lie inside `[-half_length, half_length]`.
    pub fn manual(atoms: Vec<(f64, f64)>, half_length: f64) -> Result<Self> {
        Self::with_meta(
            atoms,
            half_length,
            MeasureMeta {
                kind: MeasureKind::Manual,
                gmc: None,
                grid_spacing: None,
                scale: 1.0,
            },
        )
    }

    pub fn with_meta(atoms: Vec<(f64, f64)>, half_length: f64, meta: MeasureMeta) -> Result<Self> {
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(Error::invalid("window half-length must be positive"));
        }
        if atoms.is_empty() {
            return Err(Error::degenerate("measure has no atoms"));
        }
        for (k, &(x, m)) in atoms.iter().enumerate() {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::invalid(format!("atom {k} has non-positive mass {m}")));
            }
            if !(x.abs() <= half_length) {
                return Err(Error::invalid(format!("atom {k} at {x} outside the window")));
            }
            if k > 0 && !(x > atoms[k - 1].0) {
                return Err(Error::invalid(format!("atom positions not strictly increasing at {k}")));
            }
        }
        Ok(AtomicMeasure {
            atoms,
            half_length,
            meta,
        })
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn window(&self) -> (f64, f64) {
        (-self.half_length, self.half_length)
    }

    pub fn meta(&self) -> &MeasureMeta {
        &self.meta
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.0)
    }

    pub fn masses(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.1)
    }

    pub fn total_mass(&self) -> f64 {
        self.masses().sum()
    }

    /// Smallest scale at which the measure is meant to be resolved: the
    /// field cutoff for GMC samples, the grid spacing for Lebesgue and the
    /// minimal atom spacing otherwise.
    pub fn resolution(&self) -> f64 {
        if let Some(cfg) = &self.meta.gmc {
            return cfg.cutoff();
        }
        if let Some(d) = self.meta.grid_spacing {
            return d;
        }
        self.atoms
            .windows(2)
            .map(|w| w[1].0 - w[0].0)
            .fold(f64::INFINITY, f64::min)
            .min(self.half_length)
    }

    /// Same atoms with every mass multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid("scale factor must be positive"));
        }
        let mut meta = self.meta.clone();
        meta.scale *= c;
        Self::with_meta(
            self.atoms.iter().map(|&(x, m)| (x, m * c)).collect(),
            self.half_length,
            meta,
        )
    }

    /// Rescaled so that the window average `ν([-L, L]) / 2L` equals one.
    pub fn normalized(&self) -> Result<Self> {
        self.scaled(2.0 * self.half_length / self.total_mass())
    }

    /// Index of the atom closest to `x`.
    pub fn nearest_atom(&self, x: f64) -> usize {
        let i = self.atoms.partition_point(|a| a.0 < x);
        if i == 0 {
            0
        } else if i == self.atoms.len() || (x - self.atoms[i - 1].0) <= (self.atoms[i].0 - x) {
            i - 1
        } else {
            i
        }
    }

    /// Index of an atom located exactly at `x`, if any.
    pub fn atom_at(&self, x: f64) -> Option<usize> {
        let i = self.atoms.partition_point(|a| a.0 < x);
        (i < self.atoms.len() && self.atoms[i].0 == x).then_some(i)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = MeasureFile {
            kind: self.meta.kind.as_str().to_string(),
            window: [-self.half_length, self.half_length],
            meta: self.meta.clone(),
            atoms: self.atoms.iter().map(|&(x, m)| [x, m]).collect(),
        };
        jsonio::to_string(&file)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MeasureFile = jsonio::from_str(text)?;
        if file.window[0] != -file.window[1] {
            return Err(Error::Parse {
                offset: 0,
                message: "window must be symmetric [-L, L]".into(),
            });
        }
        Self::with_meta(
            file.atoms.into_iter().map(|[x, m]| (x, m)).collect(),
            file.window[1],
            file.meta,
        )
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct MeasureFile {
    kind: String,
    window: [f64; 2],
    meta: MeasureMeta,
    atoms: Vec<[f64; 2]>,
}

fn midpoint_grid(half_length: f64, delta: f64) -> Vec<f64> {
    let cells = (2.0 * half_length / delta + 1e-9).floor() as usize;
    (0..cells)
        .map(|k| -half_length + (k as f64 + 0.5) * delta)
        .collect()
}

/// Lebesgue measure on `[-L, L]` quantized to cell midpoints of width `δ`.
pub fn build_lebesgue(half_length: f64, delta: f64) -> Result<AtomicMeasure> {
    if !(delta > 0.0 && half_length > 0.0) {
        return Err(Error::invalid("L and δ must be positive"));
    }
    if delta > half_length {
        return Err(Error::invalid(format!("δ = {delta} exceeds L = {half_length}")));
    }
    let atoms = midpoint_grid(half_length, delta)
        .into_iter()
        .map(|x| (x, delta))
        .collect();
    AtomicMeasure::with_meta(
        atoms,
        half_length,
        MeasureMeta {
            kind: MeasureKind::Lebesgue,
            gmc: None,
            grid_spacing: Some(delta),
            scale: 1.0,
        },
    )
}

type FactorKey = (Kernel, u64, u64, usize);

fn factor_cache() -> &'static Mutex<HashMap<FactorKey, Arc<(BandCholesky, f64)>>> {
    static CACHE: OnceLock<Mutex<HashMap<FactorKey, Arc<(BandCholesky, f64)>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Cholesky factor of the grid covariance and the diagonal variance used.
fn grid_factor(kernel: Kernel, eps: f64, delta: f64, n: usize) -> Result<Arc<(BandCholesky, f64)>> {
    let key = (kernel, eps.to_bits(), delta.to_bits(), n);
    if let Some(f) = factor_cache().lock().expect("factor cache poisoned").get(&key) {
        return Ok(f.clone());
    }
    let bandwidth = match kernel {
        Kernel::TruncatedLogExactPd => ((1.0 / delta).ceil() as usize).saturating_sub(1),
        Kernel::SharpLogFloor => n,
    };
    let var0 = kernel.covariance(0.0, eps);
    let mut jitter = 0.0;
    let factor = loop {
        let entry = |i: usize, j: usize| {
            let c = kernel.covariance((i as f64 - j as f64) * delta, eps);
            if i == j {
                c + jitter
            } else {
                c
            }
        };
        match BandCholesky::factor(n, bandwidth, entry) {
            Ok(f) => break f,
            Err(e) => {
                jitter = if jitter == 0.0 { 1e-10 * var0 } else { jitter * 100.0 };
                if jitter > 1e-2 * var0 {
                    return Err(e);
                }
            }
        }
    };
    let out = Arc::new((factor, var0 + jitter));
    factor_cache()
        .lock()
        .expect("factor cache poisoned")
        .insert(key, out.clone());
    Ok(out)
}

/// The centered Gaussian field `Y` on the midpoint grid, together with its
/// pointwise variance.
pub fn sample_field(cfg: &GmcConfig) -> Result<(Vec<f64>, f64)> {
    cfg.validate()?;
    let n = midpoint_grid(cfg.window_half_length, cfg.grid_spacing).len();
    let factor = grid_factor(cfg.kernel, cfg.cutoff(), cfg.grid_spacing, n)?;
    let mut r = rng::stream(cfg.seed, 0);
    let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
    Ok((factor.0.mul_lower(&z), factor.1))
}

/// Atomic approximation of the boundary Liouville measure: mass
/// `δ·exp(γY − γ²Var(Y)/2)` at each grid midpoint.
pub fn sample_boundary_liouville(cfg: &GmcConfig) -> Result<AtomicMeasure> {
    cfg.validate()?;
    let grid = midpoint_grid(cfg.window_half_length, cfg.grid_spacing);
    let delta = cfg.grid_spacing;
    let atoms: Vec<(f64, f64)> = if cfg.gamma == 0.0 {
        grid.into_iter().map(|x| (x, delta)).collect()
    } else {
        let (field, var) = sample_field(cfg)?;
        let g = cfg.gamma;
        grid.into_iter()
            .zip(field)
            .map(|(x, y)| (x, delta * (g * y - 0.5 * g * g * var).exp()))
            .collect()
    };
    AtomicMeasure::with_meta(
        atoms,
        cfg.window_half_length,
        MeasureMeta {
            kind: if cfg.gamma == 0.0 { MeasureKind::Lebesgue } else { MeasureKind::Gmc },
            gmc: Some(*cfg),
            grid_spacing: Some(delta),
            scale: 1.0,
        },
    )
}

/// `ν([a, b])`.
pub fn interval_mass(measure: &AtomicMeasure, a: f64, b: f64) -> Result<f64> {
    if a > b {
        return Err(Error::invalid(format!("interval [{a}, {b}] is reversed")));
    }
    let atoms = measure.atoms();
    let lo = atoms.partition_point(|p| p.0 < a);
    let hi = atoms.partition_point(|p| p.0 <= b);
    Ok(atoms[lo..hi].iter().map(|p| p.1).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingStats {
    pub z_hat: f64,
    pub alpha_hat: f64,
    pub fit_range: (f64, f64),
    pub residual: f64,
}

/// Ergodic average `Ẑ = ν([-L, L]) / 2L` and the local dimension estimate at
/// `a`: the log-log slope of `ν([a-r, a+r])` over a geometric radius grid.
pub fn scaling_stats(measure: &AtomicMeasure, a: f64, r_min: f64, r_max: f64) -> Result<ScalingStats> {
    let l = measure.half_length();
    let eps = measure.resolution();
    if !(r_min >= eps * (1.0 - 1e-12) && r_min < r_max && r_max <= l) {
        return Err(Error::invalid(format!(
            "fit range [{r_min}, {r_max}] must satisfy ε={eps} ≤ r_min < r_max ≤ L={l}"
        )));
    }
    if !(a.abs() < l) {
        return Err(Error::invalid("anchor must be interior to the window"));
    }
    let radii = stats::geometric_grid(r_min, r_max, 8);
    let mut xs = Vec::with_capacity(radii.len());
    let mut ys = Vec::with_capacity(radii.len());
    for r in radii {
        let mass = interval_mass(measure, a - r, a + r)?;
        if mass <= 0.0 {
            return Err(Error::degenerate(format!("no mass within radius {r} of {a}")));
        }
        xs.push(r.ln());
        ys.push(mass.ln());
    }
    let fit = stats::ols(&xs, &ys)?;
    Ok(ScalingStats {
        z_hat: measure.total_mass() / (2.0 * l),
        alpha_hat: fit.slope,
        fit_range: (r_min, r_max),
        residual: fit.residual,
    })
}

/// Multifractal exponent `1 + (1/2 − q)γ²/2` of the boundary Liouville
/// measure at `ν_q`-typical points.
pub fn multifractal_alpha(gamma: f64, q: f64) -> f64 {
    1.0 + (0.5 - q) * gamma * gamma / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lebesgue_midpoints() {
        let m = build_lebesgue(1.0, 0.5).unwrap();
        assert_eq!(m.atoms(), &[(-0.75, 0.5), (-0.25, 0.5), (0.25, 0.5), (0.75, 0.5)]);
        assert!(matches!(build_lebesgue(1.0, 2.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_lebesgue(1.0, 0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_lebesgue(-1.0, 0.1), Err(Error::InvalidArgument(_))));
        let big = build_lebesgue(2.0, 0.01).unwrap();
        assert!((big.total_mass() - 4.0).abs() <= 0.01);
    }

    #[test]
    fn interval_mass_basics() {
        let m = build_lebesgue(1.0, 0.5).unwrap();
        assert_eq!(interval_mass(&m, 0.0, 1.0).unwrap(), 1.0);
        assert_eq!(interval_mass(&m, 0.1, 0.1).unwrap(), 0.0);
        assert!(interval_mass(&m, 1.0, 0.0).is_err());
        let left = interval_mass(&m, -1.0, 0.0).unwrap();
        let right = interval_mass(&m, 0.0, 1.0).unwrap();
        assert_eq!(left + right, m.total_mass());
    }

    #[test]
    fn manual_validation() {
        assert!(AtomicMeasure::manual(vec![(0.0, 1.0), (0.0, 1.0)], 1.0).is_err());
        assert!(AtomicMeasure::manual(vec![(0.0, -1.0)], 1.0).is_err());
        assert!(AtomicMeasure::manual(vec![(3.0, 1.0)], 1.0).is_err());
        assert!(AtomicMeasure::manual(vec![(2.0, 3.0)], 5.0).is_ok());
    }

    #[test]
    fn gamma_zero_is_lebesgue() {
        let cfg = GmcConfig::new(0.0, 6, 2.0, 11);
        let g = sample_boundary_liouville(&cfg).unwrap();
        let l = build_lebesgue(2.0, cfg.grid_spacing).unwrap();
        assert_eq!(g.atoms(), l.atoms());
    }

    #[test]
    fn gmc_is_deterministic_per_seed() {
        let cfg = GmcConfig::new(1.0, 8, 1.0, 42);
        let a = sample_boundary_liouville(&cfg).unwrap();
        let b = sample_boundary_liouville(&cfg).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let c = sample_boundary_liouville(&GmcConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.atoms(), c.atoms());
    }

    #[test]
    fn gmc_rejects_bad_config() {
        let mut cfg = GmcConfig::new(1.5, 6, 2.0, 1);
        assert!(matches!(sample_boundary_liouville(&cfg), Err(Error::InvalidArgument(_))));
        cfg.gamma = 1.0;
        cfg.grid_spacing = 0.5;
        assert!(sample_boundary_liouville(&cfg).is_err());
        let sharp = GmcConfig { kernel: Kernel::SharpLogFloor, ..GmcConfig::new(1.0, 6, 2.0, 1) };
        assert!(sample_boundary_liouville(&sharp).is_err());
    }

    #[test]
    fn truncated_kernel_is_positive_definite_mixture() {
        let eps = 1.0 / 64.0;
        let k = Kernel::TruncatedLogExactPd;
        // continuity at ε and at 1, convexity on a fine grid
        assert!((k.covariance(eps, eps) - ((1.0 / eps).ln() + eps - 1.0)).abs() < 1e-12);
        assert!(k.covariance(1.0, eps).abs() < 1e-15);
        let h = 1e-3;
        for i in 1..1500 {
            let d = i as f64 * h;
            let second = k.covariance(d - h, eps) - 2.0 * k.covariance(d, eps) + k.covariance(d + h, eps);
            assert!(second >= -1e-12, "not convex at {d}");
        }
    }

    #[test]
    fn scaling_stats_lebesgue() {
        let m = build_lebesgue(2.0, 1e-3).unwrap();
        let s = scaling_stats(&m, 0.0, 0.01, 1.0).unwrap();
        assert!((s.z_hat - 1.0).abs() < 1e-9);
        assert!((s.alpha_hat - 1.0).abs() < 0.01);
        assert!(scaling_stats(&m, 0.0, 1e-4, 1.0).is_err());
        assert!(scaling_stats(&m, 0.0, 0.5, 0.1).is_err());
    }

    #[test]
    fn scaling_stats_scale_covariance() {
        let m = sample_boundary_liouville(&GmcConfig::new(1.0, 7, 1.0, 3)).unwrap();
        let s1 = scaling_stats(&m, 0.1, 1.0 / 128.0, 0.5).unwrap();
        let s2 = scaling_stats(&m.scaled(3.0).unwrap(), 0.1, 1.0 / 128.0, 0.5).unwrap();
        assert!((s2.z_hat / s1.z_hat - 3.0).abs() < 1e-12);
        assert!((s2.alpha_hat - s1.alpha_hat).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = sample_boundary_liouville(&GmcConfig::new(1.0, 5, 1.0, 9)).unwrap();
        let text = m.to_json().unwrap();
        let back = AtomicMeasure::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert!(text.starts_with("{\"kind\":\"gmc\",\"window\":[-1.0000000000000000e0,1.0000000000000000e0]"));
    }

    #[test]
    fn malformed_json_names_offset() {
        let bad = "{\"kind\":\"manual\",\"window\":[-1,1],\"meta\":{\"kind\":\"manual\",\"scale\":1},\"atoms\":[[0,1],[0.5]]}";
        match AtomicMeasure::from_json(bad) {
            Err(Error::Parse { offset, .. }) => assert!(offset > 60 && offset <= bad.len()),
            other => panic!("{other:?}"),
        }
    }
}
