//! Strings, Krein correspondence and the spectral objects built on them.

pub mod exit;
pub mod kernels;
pub mod resolvent;
pub mod spectral;
pub mod string;

pub use exit::{kac_exit, ExitStats};
pub use kernels::{heat_kernel, survival, KernelMode};
pub use resolvent::{
    excursion_hitting_laplace, hitting_laplace, hv_sandwich, resolvent_full_line, two_sided_h, two_sided_v,
    two_sided_v_inverse, HvPoint,
};
pub use spectral::{
    spectral_decompose, spectral_decompose_at, spectral_decompose_cached, spectral_decompose_full,
    spectral_decompose_line, SpectralBc, SpectralDecomposition,
};
pub use string::{to_string, two_sided, Boundary, Direction, KreinValue, PhiPsiValue, StieltjesString};
