//! Quantum geometry of Dirac-model Chern insulators in `2N` dimensions.
//!
//! The crate computes the quantum geometric tensor of the occupied band
//! doublet of `H(k) = d0(k) + sum_i d_i(k) Gamma_i`, the Berry-curvature traces
//! built from it, and Chern numbers obtained two ways: from the signed area
//! that the Brillouin zone sweeps on the hypersphere carrying the quantum
//! metric, and from gauge-invariant lattice field strengths. The
//! [`riemann`] module checks the constant-curvature geometry of that
//! hypersphere, and [`spectroscopy`] reconstructs the metric from simulated
//! golden-rule transition rates.

pub mod chern;
pub mod error;
pub mod gamma;
pub mod linalg;
pub mod model;
pub mod qgt;
pub mod riemann;
pub mod spectroscopy;

pub use chern::{BrillouinGrid, ChernMethod, ChernResult, SignRegime, SweepRow};
pub use error::{Error, Result};
pub use gamma::{build_gammas, GammaSet};
pub use linalg::{CMatrix, RMatrix};
pub use model::{
    DerivativeScheme, DiracModel, FourierModel, ModelSpec, OccupiedProjector, SpectrumAtK,
};
pub use qgt::{DetIdentityReport, NonAbelianQgt, PairTrace, QgtResult};
pub use riemann::{CurvatureBundle, EulerCheck, FdOptions, MetricField};
pub use spectroscopy::{DriveSpec, OmegaWindow, ProbeSettings, RateResult, TailHandling};
