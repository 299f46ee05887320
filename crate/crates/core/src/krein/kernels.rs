//! Heat kernels and excursion laws as finite spectral sums.

use super::spectral::{SpectralBc, SpectralDecomposition};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelMode {
    /// `p(t;x,y) = Σ e^{-tξ} u(x)u(y)` for the process reflected at 0.
    ReflectingP,
    /// `q(t;x,y)` for the process killed at 0.
    AbsorbingQ,
    /// `q(t;x,y)/(xy)`, the process conditioned never to hit 0.
    HTransform,
    /// Density `π(t;x)` of the hitting time of 0 from `x`.
    HittingPi,
    /// Lévy density `n(t)` of the inverse local time at 0.
    LevyN,
}

impl KernelMode {
    fn needs(self) -> &'static [SpectralBc] {
        match self {
            KernelMode::ReflectingP => &[SpectralBc::NeumannAt0, SpectralBc::Line],
            _ => &[SpectralBc::DirichletAt0],
        }
    }
}

/// Evaluate a heat kernel; `x`, `y` are ignored where the mode has no use
/// for them.
pub fn heat_kernel(spec: &SpectralDecomposition, mode: KernelMode, t: f64, x: f64, y: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::invalid(format!("t = {t} must be positive")));
    }
    if !mode.needs().contains(&spec.bc) {
        return Err(Error::invalid(format!(
            "{mode:?} needs a {:?} decomposition, got {}",
            mode.needs(),
            spec.bc.as_str()
        )));
    }
    let decay = |j: usize| (-t * spec.pairs[j].0).exp();
    let sum = |a: &[f64], b: &[f64]| -> f64 { (0..spec.len()).map(|j| decay(j) * a[j] * b[j]).sum() };
    Ok(match mode {
        KernelMode::ReflectingP | KernelMode::AbsorbingQ => sum(&spec.modes_at(x)?, &spec.modes_at(y)?),
        KernelMode::HTransform => {
            if !(x > 0.0 && y > 0.0) {
                return Err(Error::invalid("h-transform kernel needs x, y > 0"));
            }
            sum(&spec.modes_at(x)?, &spec.modes_at(y)?) / (x * y)
        }
        KernelMode::HittingPi => sum(&spec.modes_at(x)?, &spec.boundary_data),
        KernelMode::LevyN => sum(&spec.boundary_data, &spec.boundary_data),
    })
}

/// `n(ζ > t) = Σ c*_j e^{-ξ*_j t}`.
pub fn survival(spec_star: &SpectralDecomposition, t: f64) -> Result<f64> {
    if spec_star.bc != SpectralBc::DirichletAt0 {
        return Err(Error::invalid("survival needs the dirichlet-at-0 decomposition"));
    }
    if !(t > 0.0) {
        return Err(Error::invalid(format!("t = {t} must be positive")));
    }
    Ok(spec_star.pairs.iter().map(|&(x, c)| c * (-t * x).exp()).sum())
}
