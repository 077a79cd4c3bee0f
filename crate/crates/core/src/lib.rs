//! Frames generated by iterating a diagonal operator with Carleson eigenvalues
//! on the canonical vector `g_j = sqrt(1 - |z_j|^2)`.
//!
//! The infinite objects are handled through explicit truncations: `n` rows of
//! the spectrum and `K` exponents. Every report records the truncation it was
//! computed on.

// `!(x > 0.0)` guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod carleson;
pub mod certify;
pub mod continuous;
pub mod error;
pub mod exponents;
pub mod frame_ops;

pub use num_complex::Complex64;

/// Library version, echoed in CLI report provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use carleson::{
    blaschke_product, canonical_vector, carleson_delta, make_geometric_real, make_sector,
    pseudo_hyperbolic, reference_geometric, tail_defect, AngleRule, CarlesonDeltaEstimate,
    CarlesonSpectrum, DiskPoint, FrameVector, SpectrumFlags,
};
pub use certify::{
    degenerate_check, extension_induction, extension_step, null_vector, perturbation_j,
    perturbation_j_with_reference, verify_chps_chain, zero_set_guard, ChpsChainReport,
    ExtensionConfig, ExtensionInduction, ExtensionStepReport, PerturbationCertificate,
    ReferenceTruncation, ZeroSetGuard,
};
pub use continuous::{
    continuous_bounds, continuous_report, delta_frame_bound, discrete_sandwich_check,
    discrete_sandwich_check_with, riemann_energy, ContinuousBoundReport, EnergyOptions, Quadrature,
    RiemannEnergy, SandwichReport, VectorEnergy,
};
pub use error::{Error, Result};
pub use exponents::{
    block_count_check, gamma_const, log_block_density, ms_sum, select_subsequence, theta,
    theta_sup_check, DensityGrids, DensityReport, ExponentKind, ExponentSet, MsSum, MsVerdict,
    ThetaValue,
};
pub use frame_ops::{
    analysis_apply, frame_bounds, frame_bounds_converged, interpolate, power, reconstruct,
    synthesis_matrix, FrameBoundEstimate, SynthesisMatrix,
};
